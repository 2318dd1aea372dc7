"""Deterministic derivation of independent RNG streams from one master seed."""

import hashlib

_SEED_BITS = 63


def derive_seed(master_seed: int, domain: str, index: int) -> int:
    """Derive a stable sub-seed for ``(domain, index)`` from the master seed.

    The same triple always maps to the same value on every platform and
    Python version, so every random stream in a run is a pure function of
    the master seed. Distinct domains (for example ``"client_train.3"`` vs
    ``"adversary.3"``) give unrelated streams even at equal indices.
    """
    payload = f"{master_seed}|{domain}|{index}".encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") >> (64 - _SEED_BITS)
