"""Protocol definitions consumed by the engine.

A protocol decides how each party forms its onions, when diagnostics run
and when a party aborts. The engine owns everything that happens on the
wire.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Optional

from .errors import ConfigError
from .keys import EMPTY_NONCE, KeyMaterial
from .onions import DUMMY, OnionRegistry, RoutingPlan, random_nonce
from .pibfly import PibflyParams, convert_plan
from .pitree import (
    CheckpointDatum,
    PitreeParams,
    checkpoint_plan,
    form_checkpoint_onion,
    form_merging_onions,
    gen_ckpt_data,
    merging_plans,
)

__all__ = ["Protocol", "PiTree", "PiButterfly", "Strawman", "make_strawman_protocol", "make_protocol"]


class Protocol:
    name = "abstract"
    n_parties: int
    kappa: float
    d: int = 1
    n_epochs: int = 0
    abort_fanout: int = 1

    @property
    def total_rounds(self) -> int:
        raise NotImplementedError

    def validate(self) -> None:
        pass

    def checkpoint_data(self, keys: KeyMaterial, party: int) -> FrozenSet[CheckpointDatum]:
        return frozenset()

    def form_onions(self, registry: OnionRegistry, party: int, message: Optional[str], recipient: int,
                    data: FrozenSet[CheckpointDatum], rng: random.Random) -> None:
        raise NotImplementedError

    def diagnostic_epoch(self, rnd: int) -> Optional[int]:
        if self.n_epochs and rnd % self.d == 0 and 1 <= rnd // self.d <= self.n_epochs:
            return rnd // self.d
        return None

    def should_abort(self, missing: int) -> bool:
        return False

    def describe(self) -> Dict[str, Any]:
        return {"protocol": self.name, "n_parties": self.n_parties, "kappa": self.kappa}


class PiTree(Protocol):
    name = "pitree"

    def __init__(self, params: PitreeParams) -> None:
        self.params = params
        self.n_parties = params.n_parties
        self.kappa = params.kappa
        self.d = params.d
        self.n_epochs = params.h
        self.abort_fanout = params.chi

    @property
    def total_rounds(self) -> int:
        return self.n_epochs * self.d + 1

    def validate(self) -> None:
        self.params.validate()

    def checkpoint_data(self, keys, party):
        return gen_ckpt_data(party, keys, self.n_epochs, self.params.freq)

    def form_onions(self, registry, party, message, recipient, data, rng):
        form_merging_onions(registry, party, message, recipient, self.params, rng)
        for datum in sorted(data):
            form_checkpoint_onion(registry, party, datum, self.params, rng)

    def should_abort(self, missing: int) -> bool:
        # "at least T missing" triggers an abort
        return missing >= self.params.threshold

    def describe(self):
        p = self.params
        return {"protocol": self.name, "n_parties": p.n_parties, "chi": p.chi, "d": p.d, "h": p.h,
                "kappa": p.kappa, "lam": p.lam, "threshold": str(p.threshold), "ckpt_freq": p.freq}


class PiButterfly(Protocol):
    name = "pibfly"

    def __init__(self, params: PibflyParams) -> None:
        self.params = params
        tree = params.tree
        self.n_parties = tree.n_parties
        self.kappa = tree.kappa
        self.d = tree.d
        self.n_epochs = params.total_epochs
        self.abort_fanout = tree.chi

    @property
    def total_rounds(self) -> int:
        return self.n_epochs * self.d + 1

    @property
    def merge_positions(self):
        L, d = self.params.mixing_epochs, self.d
        return tuple(L * d + (m - 1) * d + 1 for m in range(1, self.params.tree.h))

    def validate(self) -> None:
        self.params.validate()

    def checkpoint_data(self, keys, party):
        return gen_ckpt_data(party, keys, self.n_epochs, self.params.freq)

    def form_onions(self, registry, party, message, recipient, data, rng):
        tree, bfly = self.params.tree, self.params.butterfly
        h, d, n = tree.h, tree.d, tree.n_parties
        L = bfly.mixing_epochs
        merge_positions = self.merge_positions
        for leaf, base in merging_plans(party, message, recipient, tree.chi, d, n, rng):
            plan = convert_plan(base, bfly, d, rng)
            registry.form_onion(plan, "merging", group=(party, message), leaf=leaf,
                                merge_positions=merge_positions)
        for datum in sorted(data):
            if datum.epoch <= L:
                base = RoutingPlan(DUMMY, tuple(rng.randint(1, n) for _ in range(h * d + 1)),
                                   tuple(random_nonce(rng) for _ in range(h * d)), party)
                plan = convert_plan(base, bfly, d, rng, checkpoint=datum)
            else:
                shifted = CheckpointDatum(datum.epoch - L + 1, datum.verifier, datum.checkpoint)
                plan = convert_plan(checkpoint_plan(party, shifted, h, d, n, rng), bfly, d, rng)
            registry.form_onion(plan, "checkpoint", verifier=datum.verifier, epoch=datum.epoch)

    def should_abort(self, missing: int) -> bool:
        return missing > self.params.abort_threshold

    def describe(self):
        p = self.params
        return {"protocol": self.name, "n_parties": p.tree.n_parties, "chi": p.tree.chi, "d": p.tree.d,
                "h": p.tree.h, "iterations": p.iterations, "mixing_epochs": p.mixing_epochs,
                "total_epochs": p.total_epochs, "kappa": p.tree.kappa, "lam": p.tree.lam,
                "ckpt_freq": p.freq, "abort_threshold": str(p.abort_threshold)}


class Strawman(Protocol):
    """One onion per message through ``alpha_hops`` uniform relays; nothing else.

    Weakly robust (with no drops every message arrives) and cheap, which
    makes it the target of the isolation attack.
    """

    name = "strawman"

    def __init__(self, n_parties: int, alpha_hops: int, kappa: float = 0.0, abort_fanout: int = 1) -> None:
        self.n_parties = n_parties
        self.alpha_hops = alpha_hops
        self.kappa = kappa
        self.abort_fanout = abort_fanout

    @property
    def total_rounds(self) -> int:
        return self.alpha_hops + 1

    def validate(self) -> None:
        if self.alpha_hops < 0:
            raise ConfigError(f"alpha_hops must be >= 0, got {self.alpha_hops}")
        if self.n_parties < 2:
            raise ConfigError(f"need at least 2 parties, got {self.n_parties}")
        if not 0 <= self.kappa < 1:
            raise ConfigError(f"kappa must lie in [0, 1), got {self.kappa}")

    def route(self, party: int, recipient: int, rng: random.Random):
        return tuple(rng.randint(1, self.n_parties) for _ in range(self.alpha_hops)) + (recipient,)

    def form_onions(self, registry, party, message, recipient, data, rng):
        path = self.route(party, recipient, rng)
        registry.form_onion(RoutingPlan(message, path, (EMPTY_NONCE,) * (len(path) - 1), party), "plain")

    def describe(self):
        return {"protocol": self.name, "n_parties": self.n_parties, "alpha_hops": self.alpha_hops,
                "kappa": self.kappa}


def make_strawman_protocol(alpha_hops: int, n_parties: int = 16, kappa: float = 0.0, **kw) -> Strawman:
    proto = Strawman(n_parties, alpha_hops, kappa, **kw)
    proto.validate()
    return proto


def make_protocol(name: str, **cfg: Any) -> Protocol:
    """Build a protocol from flat keyword parameters (as found in config files)."""
    name = name.lower()
    if name == "pitree":
        threshold = cfg.get("threshold", 1)
        return PiTree(PitreeParams(cfg["n_parties"], cfg["chi"], cfg["d"], cfg.get("kappa", 0.0),
                                   cfg.get("lam", 16), Fraction(str(threshold)), cfg.get("ckpt_freq")))
    if name == "pibfly":
        extra = {}
        if cfg.get("threshold") is not None:
            extra["threshold"] = Fraction(str(cfg["threshold"]))
        return PiButterfly(PibflyParams.create(cfg["n_parties"], cfg["chi"], cfg["d"], cfg["iterations"],
                                               cfg.get("kappa", 0.0), cfg.get("lam", 16),
                                               cfg.get("ckpt_freq"), **extra))
    if name == "strawman":
        return Strawman(cfg["n_parties"], cfg.get("alpha_hops", 0), cfg.get("kappa", 0.0),
                        cfg.get("abort_fanout", 1))
    raise ConfigError(f"unknown protocol {name!r}")
