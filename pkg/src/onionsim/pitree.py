"""Onion forming for the tree protocol: checkpoint data, checkpoint onions
and merge-tree merging onions.

Merge trees are suffix-addressed. A leaf has an ``(h-1)``-bit label, the
parent of ``x^{bB}`` is ``x^{B}`` and the root is the empty label, so a leaf
onion's path is ``h`` segments of ``d`` parties each followed by the
recipient. Two leaves whose labels agree from bit ``m+1`` on share every
segment from the ``m``-th ancestor upwards, and first meet at path position
``m*d + 1``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Tuple

from .errors import ConfigError
from .keys import KeyMaterial
from .onions import DUMMY, OnionRegistry, RoutingPlan, random_nonce

__all__ = [
    "CheckpointDatum",
    "PitreeParams",
    "MergeTreeNode",
    "theorem_threshold",
    "bernoulli_from_prf",
    "gen_ckpt_data",
    "checkpoint_plan",
    "form_checkpoint_onion",
    "build_merge_tree",
    "merging_plans",
    "form_merging_onions",
    "merge_level",
]


@dataclass(frozen=True, order=True)
class CheckpointDatum:
    epoch: int
    verifier: int
    checkpoint: int


def _is_power_of_two(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


@dataclass(frozen=True)
class PitreeParams:
    """Tunables of the tree protocol.

    ``threshold`` is the number of missing checkpoints at which a party
    aborts; :func:`theorem_threshold` gives the asymptotic choice.
    ``ckpt_freq=None`` means ``chi / (N * h)``.
    """

    n_parties: int
    chi: int
    d: int
    kappa: float = 0.0
    lam: int = 16
    threshold: Fraction = Fraction(1)
    ckpt_freq: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "threshold", Fraction(self.threshold))

    @property
    def h(self) -> int:
        return self.chi.bit_length()

    @property
    def freq(self) -> float:
        if self.ckpt_freq is not None:
            return self.ckpt_freq
        return self.chi / (self.n_parties * self.h)

    def validate(self) -> None:
        if self.n_parties < 2:
            raise ConfigError(f"need at least 2 parties, got {self.n_parties}")
        if not _is_power_of_two(self.chi):
            raise ConfigError(f"chi must be a power of two, got {self.chi}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if not 0 <= self.kappa < 0.5:
            raise ConfigError(f"kappa must lie in [0, 0.5), got {self.kappa}")
        if not 0 <= self.freq <= 1:
            raise ConfigError(f"checkpoint frequency must lie in [0, 1], got {self.freq}")
        if self.threshold <= 0:
            raise ConfigError("abort threshold must be positive")


@dataclass(frozen=True)
class MergeTreeNode:
    label: str
    parties: Tuple[int, ...]
    nonces: Tuple[int, ...]


def theorem_threshold(delta: float, kappa: float, eps: float, lam: int) -> float:
    """``2 (1-delta) (1-kappa)^3 kappa log^{1+eps}(lam)`` (log base 2)."""
    return 2 * (1 - delta) * (1 - kappa) ** 3 * kappa * math.log2(lam) ** (1 + eps)


def _fixed_point_threshold(freq: float) -> int:
    return math.ceil(Fraction(freq) * (1 << 64))


def bernoulli_from_prf(value: int, freq: float) -> bool:
    """True iff ``value < freq * 2**64``, compared exactly."""
    if not 0 <= freq <= 1:
        raise ValueError(f"frequency must lie in [0, 1], got {freq}")
    return value < _fixed_point_threshold(freq)


def _prf_input(epoch: int, bit: int) -> bytes:
    return f"{epoch}||{bit}".encode()


def gen_ckpt_data(owner: int, keys: KeyMaterial, n_epochs: int, freq: float) -> FrozenSet[CheckpointDatum]:
    """Checkpoint data of ``owner`` over epochs ``1..n_epochs``.

    Membership and checkpoint value depend only on the shared key of the
    unordered pair, so ``(l, k, c)`` is in the owner's set exactly when
    ``(l, owner, c)`` is in ``k``'s.
    """
    cutoff = _fixed_point_threshold(freq)
    data = []
    for epoch in range(1, n_epochs + 1):
        for k in range(1, keys.n_parties + 1):
            key = keys.shared_key(owner, k)
            if keys.prf(key, _prf_input(epoch, 0)) < cutoff:
                data.append(CheckpointDatum(epoch, k, keys.prf_nonce(key, _prf_input(epoch, 1))))
    return frozenset(data)


def checkpoint_plan(owner: int, datum: CheckpointDatum, h: int, d: int, n_parties: int,
                    rng: random.Random) -> RoutingPlan:
    """Dummy plan with ``h*d`` uniform intermediaries, verifier pinned at ``epoch*d``."""
    if not 1 <= datum.epoch <= h:
        raise ConfigError(f"checkpoint epoch {datum.epoch} outside [1, {h}]")
    length = h * d
    pin = datum.epoch * d - 1
    path = [rng.randint(1, n_parties) for _ in range(length + 1)]
    nonces = [random_nonce(rng) for _ in range(length)]
    path[pin] = datum.verifier
    nonces[pin] = datum.checkpoint
    return RoutingPlan(DUMMY, tuple(path), tuple(nonces), owner)


def form_checkpoint_onion(registry: OnionRegistry, owner: int, datum: CheckpointDatum,
                          params: PitreeParams, rng: random.Random) -> int:
    plan = checkpoint_plan(owner, datum, params.h, params.d, params.n_parties, rng)
    return registry.form_onion(plan, "checkpoint", verifier=datum.verifier, epoch=datum.epoch)


def build_merge_tree(h: int, d: int, n_parties: int, rng: random.Random) -> Dict[str, MergeTreeNode]:
    # draw order is fixed (by label length, then label) for reproducibility
    tree = {}
    for depth in range(h):
        for bits in range(1 << depth):
            label = format(bits, f"0{depth}b") if depth else ""
            parties = tuple(rng.randint(1, n_parties) for _ in range(d))
            nonces = tuple(random_nonce(rng) for _ in range(d))
            tree[label] = MergeTreeNode(label, parties, nonces)
    return tree


def merging_plans(sender: int, message: Optional[str], recipient: int, chi: int, d: int,
                  n_parties: int, rng: random.Random) -> List[Tuple[str, RoutingPlan]]:
    if not _is_power_of_two(chi):
        raise ConfigError(f"chi must be a power of two, got {chi}")
    h = chi.bit_length()
    tree = build_merge_tree(h, d, n_parties, rng)
    plans = []
    for bits in range(chi):
        leaf = format(bits, f"0{h - 1}b") if h > 1 else ""
        path: List[int] = []
        nonces: List[int] = []
        for start in range(h):
            node = tree[leaf[start:]]
            path.extend(node.parties)
            nonces.extend(node.nonces)
        path.append(recipient)
        plans.append((leaf, RoutingPlan(message, tuple(path), tuple(nonces), sender)))
    return plans


def merge_level(leaf_a: str, leaf_b: str) -> int:
    """Tree level ``m`` of the lowest common ancestor of two leaves."""
    if len(leaf_a) != len(leaf_b):
        raise ValueError("leaves of different trees")
    m = 0
    while leaf_a[m:] != leaf_b[m:]:
        m += 1
    return m


def form_merging_onions(registry: OnionRegistry, sender: int, message: Optional[str], recipient: int,
                        params: PitreeParams, rng: random.Random) -> List[int]:
    h, d = params.h, params.d
    handles = []
    for leaf, plan in merging_plans(sender, message, recipient, params.chi, d, params.n_parties, rng):
        merge_positions = tuple(m * d + 1 for m in range(1, h))
        handles.append(
            registry.form_onion(plan, "merging", group=(sender, message), leaf=leaf,
                                merge_positions=merge_positions)
        )
    return handles

