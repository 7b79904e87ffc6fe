"""Decision rules for robust multistage MILPs with decision-dependent uncertainty sets."""

__version__ = "0.1.0"
