"""Butterfly mixing prefix for the butterfly protocol.

Parties double as the switching nodes of every butterfly stage. Party ``i``
has the ``(n-1)``-bit label ``i-1`` (most significant bit first); at stage
``tau`` it is paired with the party whose label differs in bit
``((tau-1) mod (n-1)) + 1``. A mixing-phase segment for epoch ``tau`` stays
inside that two-party subnet.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

from .errors import ConfigError
from .keys import EMPTY_NONCE
from .onions import RoutingPlan
from .pitree import CheckpointDatum, PitreeParams

__all__ = [
    "ButterflyConfig",
    "PibflyParams",
    "stage_bit",
    "partner",
    "subnet_of",
    "random_walk",
    "convert_plan",
]


def _check_power_of_two(n_parties: int) -> None:
    if n_parties < 2 or n_parties & (n_parties - 1):
        raise ConfigError(f"butterfly needs a power-of-two party count >= 2, got {n_parties}")


@dataclass(frozen=True)
class ButterflyConfig:
    n_parties: int
    iterations: int

    def __post_init__(self) -> None:
        _check_power_of_two(self.n_parties)
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")

    @property
    def stages(self) -> int:
        return self.n_parties.bit_length()  # log2(N) + 1

    @property
    def mixing_epochs(self) -> int:
        return self.stages * self.iterations


def stage_bit(stage: int, n_parties: int) -> int:
    """1-based (most significant first) label bit flipped at ``stage``."""
    if stage < 1:
        raise ConfigError(f"stages are numbered from 1, got {stage}")
    width = n_parties.bit_length() - 1
    return (stage - 1) % width + 1


def partner(i: int, stage: int, n_parties: int) -> int:
    _check_power_of_two(n_parties)
    width = n_parties.bit_length() - 1
    return ((i - 1) ^ (1 << (width - stage_bit(stage, n_parties)))) + 1


def subnet_of(i: int, stage: int, n_parties: int) -> Tuple[int, int]:
    j = partner(i, stage, n_parties)
    return (i, j) if i < j else (j, i)


def random_walk(config: ButterflyConfig, rng: random.Random,
                pin: Optional[Tuple[int, int]] = None) -> List[int]:
    """Walk ``w_1..w_L`` with ``w_{t+1}`` uniform on the stage-``t+1`` subnet of ``w_t``.

    With ``pin=(l, k)`` the walk is forced through ``w_l = k`` and extended
    backwards and forwards by the same two-choice rule.
    """
    n, L = config.n_parties, config.mixing_epochs
    walk = [0] * L
    if pin is None:
        start = 0
        walk[0] = rng.randint(1, n)
    else:
        epoch, party = pin
        if not 1 <= epoch <= L:
            raise ConfigError(f"pinned epoch {epoch} outside [1, {L}]")
        start = epoch - 1
        walk[start] = party
        for t in range(start - 1, -1, -1):
            walk[t] = rng.choice(subnet_of(walk[t + 1], t + 2, n))
    for t in range(start + 1, L):
        walk[t] = rng.choice(subnet_of(walk[t - 1], t + 1, n))
    return walk


def convert_plan(base: RoutingPlan, config: ButterflyConfig, d: int, rng: random.Random,
                 checkpoint: Optional[CheckpointDatum] = None) -> RoutingPlan:
    """Replace the first epoch of a tree-protocol plan by the mixing phase.

    ``checkpoint`` embeds a mixing-phase checkpoint (epoch <= L) by pinning
    the walk; later checkpoints are expected to live in ``base`` already.
    """
    if len(base.path) % d != 1 or len(base.path) < d + 1:
        raise ConfigError(f"base plan of length {len(base.path)} is not h*d + 1 for d={d}")
    n, L = config.n_parties, config.mixing_epochs
    pin = None
    if checkpoint is not None:
        if not 1 <= checkpoint.epoch <= L:
            raise ConfigError(f"mixing checkpoint epoch {checkpoint.epoch} outside [1, {L}]")
        pin = (checkpoint.epoch, checkpoint.verifier)
    walk = random_walk(config, rng, pin)
    path: List[int] = []
    for tau, hub in enumerate(walk, start=1):
        subnet = subnet_of(hub, tau, n)
        path.extend(rng.choice(subnet) for _ in range(d - 1))
        path.append(hub)
    nonces = [EMPTY_NONCE] * (L * d)
    if checkpoint is not None:
        nonces[checkpoint.epoch * d - 1] = checkpoint.checkpoint
    return RoutingPlan(base.message, tuple(path) + base.path[d:], tuple(nonces) + base.nonces[d:], base.origin)


@dataclass(frozen=True)
class PibflyParams:
    """Butterfly-protocol tunables on top of the tree parameters.

    ``tree.threshold`` is unused here; the abort rule is "more than
    ``abort_fraction * W``" missing checkpoints with
    ``W = (1 - kappa) * chi / (n*D + h)`` unless ``threshold`` overrides it.
    """

    tree: PitreeParams
    iterations: int
    abort_fraction: Fraction = Fraction(1, 3)
    threshold: Optional[Fraction] = None
    butterfly: ButterflyConfig = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "butterfly", ButterflyConfig(self.tree.n_parties, self.iterations))
        object.__setattr__(self, "abort_fraction", Fraction(self.abort_fraction))
        if self.threshold is not None:
            object.__setattr__(self, "threshold", Fraction(self.threshold))

    @classmethod
    def create(cls, n_parties: int, chi: int, d: int, iterations: int, kappa: float = 0.0,
               lam: int = 16, ckpt_freq: Optional[float] = None, **kw) -> "PibflyParams":
        return cls(PitreeParams(n_parties, chi, d, kappa, lam, ckpt_freq=ckpt_freq), iterations, **kw)

    @property
    def mixing_epochs(self) -> int:
        return self.butterfly.mixing_epochs

    @property
    def total_epochs(self) -> int:
        return self.mixing_epochs + self.tree.h - 1

    @property
    def freq(self) -> float:
        if self.tree.ckpt_freq is not None:
            return self.tree.ckpt_freq
        return self.tree.chi / (self.tree.n_parties * (self.mixing_epochs + self.tree.h))

    @property
    def expected_checkpoints(self) -> Fraction:
        kappa = Fraction(str(self.tree.kappa))
        return (1 - kappa) * Fraction(self.tree.chi, self.mixing_epochs + self.tree.h)

    @property
    def abort_threshold(self) -> Fraction:
        if self.threshold is not None:
            return self.threshold
        return self.abort_fraction * self.expected_checkpoints

    def validate(self) -> None:
        self.tree.validate()
        if not 0 <= self.freq <= 1:
            raise ConfigError(f"checkpoint frequency must lie in [0, 1], got {self.freq}")
        if self.abort_threshold < 0:
            raise ConfigError("abort threshold must be non-negative")
