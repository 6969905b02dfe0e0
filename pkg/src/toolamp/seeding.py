"""Deterministic randomness derivation.

Every stochastic decision in the package draws from a generator derived
by hashing the run seed together with the identifiers of the decision
point (tool id, query, scope).  This makes outcomes independent of
evaluation order, so serial and concurrent runs agree bit for bit, and
it does not depend on PYTHONHASHSEED.
"""

import hashlib
import random

_SEP = b"\x1f"


def stable_u64(*parts: object) -> int:
    """Hash the parts into an unsigned 64-bit integer (BLAKE2b, fixed)."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8", "surrogatepass"))
        h.update(_SEP)
    return int.from_bytes(h.digest(), "big")


def derive_rng(*parts: object) -> random.Random:
    """A fresh ``random.Random`` seeded from the hashed parts."""
    return random.Random(stable_u64(*parts))


def unit_uniform(*parts: object) -> float:
    """A deterministic draw in [0, 1) keyed by the parts."""
    return stable_u64(*parts) / 2.0**64
