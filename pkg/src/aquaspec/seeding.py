"""Deterministic seed derivation so one root seed drives every component."""

import hashlib


def derive_seed(root_seed: int, *labels: object) -> int:
    """Derive a stable 64-bit sub-seed from a root seed and a label path.

    SHA-256 based, so the mapping is reproducible across processes and
    platforms (the builtin ``hash`` is salted per process and is not).
    """
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode("ascii"))
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")
