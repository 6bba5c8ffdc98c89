"""Bundled example programs, as assembly source and flat little-endian binaries."""
from __future__ import annotations

from importlib import resources

NAMES = ("sum", "fib", "arith")


def source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.s").read_text()


def binary(name: str) -> bytes:
    return resources.files(__name__).joinpath(f"{name}.bin").read_bytes()


def path(name: str, ext: str = "bin"):
    return resources.files(__name__).joinpath(f"{name}.{ext}")
