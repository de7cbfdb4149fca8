"""qconf: simulator and verification harness for relay-mediated quantum
dialogue, multi-party conference, and XOR computation protocols."""

__version__ = "0.1.0"
