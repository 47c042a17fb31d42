"""Hierarchical seed derivation from a single master seed.

Every random stream in the pipeline is addressed by a path of components,
e.g. ``derive_seed(master, "run", "CMAES", 3, 1, 0)``. Components are folded
into a 64-bit state one at a time with the splitmix64 finaliser:

    state_0 = splitmix64(encode(master))
    state_k = splitmix64(state_{k-1} XOR encode(component_k))

Integers encode as themselves (mod 2**64); strings as the first 8 bytes of
their SHA-256 digest, big endian. Any sub-result can therefore be regenerated
from ``(master, path)`` alone.
"""

from __future__ import annotations

import hashlib

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _encode(component) -> int:
    if isinstance(component, bool):
        return int(component)
    if isinstance(component, int):
        return component & MASK64
    if isinstance(component, str):
        return int.from_bytes(hashlib.sha256(component.encode()).digest()[:8], "big")
    raise TypeError(f"seed path components must be int or str, got {component!r}")


def derive_seed(master: int, *path) -> int:
    """64-bit seed for the stream at ``path`` below ``master``."""
    state = splitmix64(_encode(master))
    for component in path:
        state = splitmix64(state ^ _encode(component))
    return state


def derive_seed32(master: int, *path) -> int:
    """Like :func:`derive_seed` but folded to 32 bits for legacy RNG APIs."""
    s = derive_seed(master, *path)
    return (s ^ (s >> 32)) & 0xFFFFFFFF
