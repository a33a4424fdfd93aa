"""relayhouse - computer-controlled house lighting and intrusion alarm.

A register-accurate parallel-port model drives an eight-channel relay
card; a deterministic simulator stands in for the physical hardware; a
polling daemon runs the lights and the infrared alarm and serves a small
HTTP/SSE API for operators.
"""

__version__ = "0.1.0"
