"""Party key material, pairwise shared keys and the keyed PRF.

Public/secret key pairs are opaque identifiers: onions are handled by an
ideal registry (see :mod:`onionsim.onions`), so keys only matter for
deriving shared-key PRF outputs.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Dict, Tuple

from .errors import ConfigError

__all__ = [
    "EMPTY_NONCE",
    "PartyKeys",
    "SharedKey",
    "KeyMaterial",
    "gen_keys",
    "prf",
]

EMPTY_NONCE = 0
"""Reserved nonce value; never produced by :meth:`KeyMaterial.prf_nonce` or random nonce draws."""

_MASK64 = (1 << 64) - 1


def _digest(*parts: object, size: int = 16, key: bytes = b"") -> int:
    h = hashlib.blake2b(digest_size=size, key=key)
    for part in parts:
        h.update(str(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


@dataclass(frozen=True)
class SharedKey:
    key_id: int  # 128-bit


@dataclass(frozen=True)
class PartyKeys:
    party: int
    public_id: int
    secret_id: int


@dataclass
class KeyMaterial:
    """Keys for parties ``1..n_parties``.

    ``mode="ideal"`` replaces the keyed hash by lazily sampled random-function
    tables (one per key), still deterministic given ``seed`` and the order
    of queries.
    """

    n_parties: int
    seed: int
    parties: Dict[int, PartyKeys]
    shared: Dict[Tuple[int, int], SharedKey]
    mode: str = "normal"
    _self_keys: Dict[int, SharedKey] = field(default_factory=dict, repr=False)
    _tables: Dict[int, Tuple[random.Random, Dict[bytes, int]]] = field(default_factory=dict, repr=False)

    def shared_key(self, i: int, j: int) -> SharedKey:
        if i == j:
            # a party's checkpoint draws for itself use a private key
            return self._self_keys[i]
        pair = (i, j) if i < j else (j, i)
        key = self.shared.get(pair)
        if key is None:
            if not (1 <= pair[0] and pair[1] <= self.n_parties):
                raise KeyError(pair)
            # derived on first use; the value does not depend on when
            key = self.shared[pair] = SharedKey(_digest("shared", pair[0], pair[1], self.seed))
        return key

    def prf(self, key: SharedKey, data: bytes) -> int:
        if self.mode == "normal":
            return prf(key, data)
        rng, table = self._tables.setdefault(
            key.key_id, (random.Random(_digest("table", self.seed, key.key_id)), {})
        )
        if data not in table:
            table[data] = rng.getrandbits(64)
        return table[data]

    def prf_nonce(self, key: SharedKey, data: bytes) -> int:
        """PRF output usable as a nonce: the reserved empty value is rejected."""
        value = self.prf(key, data)
        attempt = 0
        while value == EMPTY_NONCE:
            attempt += 1
            value = self.prf(key, data + b"#" + str(attempt).encode())
        return value


def gen_keys(n_parties: int, seed: int, mode: str = "normal") -> KeyMaterial:
    if n_parties < 2:
        raise ConfigError(f"need at least 2 parties, got {n_parties}")
    if mode not in ("normal", "ideal"):
        raise ConfigError(f"unknown PRF mode {mode!r}")
    parties = {
        i: PartyKeys(i, _digest("pk", seed, i), _digest("sk", seed, i)) for i in range(1, n_parties + 1)
    }
    shared: Dict[Tuple[int, int], SharedKey] = {}
    self_keys = {i: SharedKey(_digest("self", i, seed)) for i in parties}
    return KeyMaterial(n_parties, seed, parties, shared, mode, self_keys)


def prf(key: SharedKey, data: bytes) -> int:
    """Keyed 64-bit PRF (BLAKE2b in keyed mode)."""
    h = hashlib.blake2b(data, digest_size=8, key=key.key_id.to_bytes(16, "big"))
    return int.from_bytes(h.digest(), "big") & _MASK64

