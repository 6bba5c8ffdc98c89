"""ARMv6 instruction-set simulation with two semantic engines."""
__version__ = "0.1.0"
