"""Synchronous execution of an onion-routing protocol.

All onions are formed up front and released in round 1. An onion sent in
round ``r`` reaches the ``r``-th party on its path, which peels it at the
end of that round and sends the next layer in round ``r + 1``. Each round:

1. every party transmits its outbox (ordered by sender, then handle);
2. the adversary sees the links and names the onions to drop;
3. receivers peel what survived;
4. each party merges peeled onions sharing a non-empty nonce;
5. on the last round of an epoch, honest parties run the diagnostic test;
6. aborted honest parties stop relaying foreign onions and send abort
   messages to ``abort_fanout`` uniformly chosen parties.
"""

from __future__ import annotations

import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Set, Tuple

from . import __version__
from .adversaries import AdversaryView, LinkObservation, OnionClass, OracleView, PeelObservation, Strategy
from .errors import AdversaryPowerError, ConfigError, OnionError
from .inputs import SimpleInput
from .keys import EMPTY_NONCE, gen_keys
from .onions import ABORT, Deliver, OnionRegistry, Relay, RoutingPlan
from .protocols import Protocol
from .seeding import stream_rng
from .transcript import (
    AbortEvent,
    Delivery,
    Diagnostic,
    Drop,
    Merge,
    RunTranscript,
    Strand,
    Transmission,
)

__all__ = ["PartyState", "Peeled", "Execution", "run", "merge_step", "diagnostic_check", "abort_broadcast"]


class Peeled(NamedTuple):
    """An onion peeled this round, waiting to be sent on."""

    nonce: int
    handle: int
    next_party: int


@dataclass
class PartyState:
    id: int
    corrupted: bool = False
    aborted: bool = False
    pending: List[Peeled] = field(default_factory=list)
    expected: Dict[int, Set[int]] = field(default_factory=dict)
    observed: Dict[int, Set[int]] = field(default_factory=lambda: defaultdict(set))
    received: Counter = field(default_factory=Counter)


def merge_step(entries: Iterable[Peeled], keep: str = "lowest") -> Tuple[List[Peeled], List[Tuple[Peeled, Peeled]]]:
    """Collapse onions with equal non-empty nonces to one survivor each.

    Returns the surviving entries (in input order) and ``(survivor, dropped)``
    pairs. ``keep`` picks the survivor by handle: ``"lowest"`` or ``"highest"``.
    """
    if keep not in ("lowest", "highest"):
        raise ConfigError(f"merge tie-break must be 'lowest' or 'highest', got {keep!r}")
    entries = list(entries)
    groups: Dict[int, List[Peeled]] = defaultdict(list)
    for e in entries:
        if e.nonce != EMPTY_NONCE:
            groups[e.nonce].append(e)
    gone: Set[int] = set()
    merges = []
    for nonce in sorted(groups):
        group = sorted(groups[nonce], key=lambda e: e.handle, reverse=(keep == "highest"))
        for loser in group[1:]:
            merges.append((group[0], loser))
            gone.add(loser.handle)
    return [e for e in entries if e.handle not in gone], merges


def diagnostic_check(expected: Set[int], observed: Set[int], protocol: Protocol) -> Tuple[int, bool]:
    """``(missing, abort)`` for one party at one diagnostic round."""
    missing = len(expected - observed)
    return missing, protocol.should_abort(missing)


def abort_broadcast(registry: OnionRegistry, party: int, fanout: int, n_parties: int,
                    rng: random.Random) -> List[Tuple[int, int]]:
    """Form ``fanout`` one-hop abort onions to parties drawn with replacement."""
    out = []
    for _ in range(fanout):
        target = rng.randint(1, n_parties)
        handle = registry.form_onion(RoutingPlan(ABORT, (target,), (), party), "abort")
        out.append((target, handle))
    return out


class Execution:
    """One run, advanced a round at a time with :meth:`step`."""

    def __init__(self, protocol: Protocol, inputs: SimpleInput, adversary: Strategy, seed: int,
                 prf_mode: str = "normal", merge_keep: str = "lowest") -> None:
        protocol.validate()
        if inputs.n_parties != protocol.n_parties:
            raise ConfigError(f"input has {inputs.n_parties} parties, protocol expects {protocol.n_parties}")
        if merge_keep not in ("lowest", "highest"):
            raise ConfigError(f"merge tie-break must be 'lowest' or 'highest', got {merge_keep!r}")
        self.protocol = protocol
        self.inputs = inputs
        self.adversary = adversary
        self.seed = seed
        self.merge_keep = merge_keep
        n = protocol.n_parties
        self.n = n
        self.registry = OnionRegistry(stream_rng(seed, "handles"))
        self.abort_rng = stream_rng(seed, "abort")
        corrupted = adversary.setup(n, protocol.kappa, stream_rng(seed, "corrupt"),
                                    stream_rng(seed, "adversary"), protocol)
        self.corrupted = frozenset(corrupted)
        self.parties = {p: PartyState(p, corrupted=p in self.corrupted) for p in range(1, n + 1)}
        self.view = AdversaryView(n, self.corrupted)
        self.round = 0
        self.total_rounds = protocol.total_rounds
        self.terminal: Dict[int, Tuple[str, int]] = {}
        self.outbox: List[Tuple[int, int, int]] = []  # (sender, receiver, handle)

        header = {
            "version": __version__,
            "seed": seed,
            "n_parties": n,
            "rounds": self.total_rounds,
            "prf_mode": prf_mode,
            "merge_keep": merge_keep,
            "adversary": adversary.describe(),
            "adversary_mode": adversary.mode,
            "corrupted": sorted(self.corrupted),
            "input": inputs.as_dict(),
            **protocol.describe(),
        }
        self.transcript = RunTranscript(header, self.corrupted)
        self._form(gen_keys(n, seed, prf_mode))

    # forming phase

    def _form(self, keys) -> None:
        for p, state in self.parties.items():
            data = self.protocol.checkpoint_data(keys, p)
            for datum in data:
                state.expected.setdefault(datum.epoch, set()).add(datum.checkpoint)
            self.protocol.form_onions(self.registry, p, self.inputs.message(p), self.inputs.recipient(p),
                                      data, stream_rng(self.seed, f"form/{p}"))
        for handle in self.registry.live_handles():
            lin = self.registry.lineage_of(handle)
            self.outbox.append((lin.plan.origin, lin.plan.path[0], handle))

    def force_abort(self, party: int) -> None:
        """Make an honest party abort before round 1 (it floods from round 1 on)."""
        state = self.parties[party]
        if state.corrupted:
            raise ConfigError(f"party {party} is corrupted and never aborts")
        if state.aborted:
            return
        state.aborted = True
        self.transcript.aborts.append(AbortEvent(self.round, party, "forced"))
        for target, handle in abort_broadcast(self.registry, party, self.protocol.abort_fanout, self.n,
                                              self.abort_rng):
            self.outbox.append((party, target, handle))

    # execution phase

    @property
    def done(self) -> bool:
        return self.round >= self.total_rounds

    def _oracle_view(self, rnd: int, links: List[Tuple[int, int, int]]) -> OracleView:
        reg = self.registry
        classes: Dict[int, OnionClass] = {}
        groups: Dict[tuple, List[int]] = defaultdict(list)
        merge_round: Dict[int, int] = {}
        for _, _, handle in links:
            lin = reg.lineage_of(handle)
            if lin.plan.origin in self.corrupted:
                continue
            if lin.kind == "checkpoint":
                if lin.info["verifier"] not in self.corrupted:
                    classes[handle] = OnionClass("singleton", None, lin.index, "checkpoint", None)
            elif lin.kind == "merging":
                position = reg.record(handle).hop_index + 1
                upcoming = [(m, pos) for m, pos in enumerate(lin.info["merge_positions"], start=1) if pos >= position]
                if not upcoming:
                    classes[handle] = OnionClass("singleton", None, lin.index, "merging", None)
                    continue
                m, pos = upcoming[0]
                groups[(lin.info["group"], lin.info["leaf"][m:], m)].append(handle)
                merge_round[handle] = pos
        for members in groups.values():
            if len(members) == 2:
                a, b = members
                for x, y in ((a, b), (b, a)):
                    classes[x] = OnionClass("pair", y, reg.handle_lineage[x], "merging", merge_round[x])
            else:
                for x in members:
                    classes[x] = OnionClass("singleton", None, reg.handle_lineage[x], "merging", merge_round[x])
        return OracleView(rnd, classes)

    def _end(self, handle: int, kind: str, rnd: int) -> None:
        self.terminal[self.registry.handle_lineage[handle]] = (kind, rnd)

    def step(self) -> None:
        if self.done:
            raise RuntimeError("run already finished")
        self.round += 1
        rnd = self.round
        tr = self.transcript
        reg = self.registry

        # 1. transmit
        links = sorted(self.outbox)
        self.outbox = []
        tr.transmissions.extend(Transmission(rnd, s, r, h) for s, r, h in links)
        self.view.links.append([LinkObservation(s, r, h) for s, r, h in links])

        # 2. adversary
        oracle = self._oracle_view(rnd, links) if self.adversary.mode == "oracle" else None
        on_wire = {h: (s, r) for s, r, h in links}
        drops = set()
        for h in self.adversary.decide(self.view, rnd, oracle):
            if h not in on_wire:
                raise AdversaryPowerError(f"round {rnd}: handle {h:#x} is not on the wire")
            s, r = on_wire[h]
            if s not in self.corrupted and r not in self.corrupted:
                raise AdversaryPowerError(f"round {rnd}: link {s}->{r} has no corrupted end")
            drops.add(h)
        for s, r, h in links:
            if h in drops:
                tr.drops.append(Drop(rnd, h, s, r))
                self._end(h, "dropped", rnd)

        # 3. process
        epoch = self.protocol.diagnostic_epoch(rnd)
        newly_aborted = []
        for s, r, h in links:
            if h in drops:
                continue
            state = self.parties[r]
            result = reg.proc_onion(r, h)
            if isinstance(result, Deliver):
                tr.deliveries.append(Delivery(rnd, r, result.message, h))
                self._end(h, "delivered", rnd)
                if result.message == ABORT:
                    if not state.corrupted and not state.aborted:
                        state.aborted = True
                        newly_aborted.append((r, "message"))
                elif result.message is not None:
                    state.received[result.message] += 1
                if state.corrupted:
                    self.view.peels.append(PeelObservation(rnd, r, h, None, None, None, result.message))
            elif isinstance(result, Relay):
                state.pending.append(Peeled(result.nonce, result.handle, result.next_party))
                if epoch is not None and result.nonce != EMPTY_NONCE:
                    state.observed[epoch].add(result.nonce)
                if state.corrupted:
                    self.view.peels.append(
                        PeelObservation(rnd, r, h, result.next_party, result.nonce, result.handle, None))
            else:
                raise OnionError(f"round {rnd}: party {r} received an onion not meant for it")
        for p, cause in newly_aborted:
            tr.aborts.append(AbortEvent(rnd, p, cause))

        # 4. merge
        for p, state in self.parties.items():
            if len(state.pending) < 2:
                continue
            state.pending, merges = merge_step(state.pending, self.merge_keep)
            for survivor, lost in merges:
                tr.merges.append(Merge(rnd, p, survivor.handle, lost.handle, survivor.nonce))
                self._end(lost.handle, "merged", rnd)

        # 5. diagnostics
        if epoch is not None:
            for p, state in self.parties.items():
                if state.corrupted or state.aborted:
                    continue
                expected = state.expected.get(epoch, set())
                missing, abort = diagnostic_check(expected, state.observed.get(epoch, set()), self.protocol)
                tr.diagnostics.append(Diagnostic(rnd, p, epoch, len(expected), missing,
                                                 "abort" if abort else "continue"))
                if abort:
                    state.aborted = True
                    tr.aborts.append(AbortEvent(rnd, p, "diagnostic"))

        # 6. aborted parties strand foreign onions and flood
        last = rnd == self.total_rounds
        for p, state in self.parties.items():
            if state.aborted:
                keep = []
                for e in state.pending:
                    if reg.lineage_of(e.handle).plan.origin == p:
                        keep.append(e)
                    else:
                        tr.strands.append(Strand(rnd, p, e.handle))
                        self._end(e.handle, "stranded", rnd)
                state.pending = keep
                if not last:
                    for target, handle in abort_broadcast(reg, p, self.protocol.abort_fanout, self.n,
                                                          self.abort_rng):
                        self.outbox.append((p, target, handle))
            self.outbox.extend((p, e.next_party, e.handle) for e in state.pending)
            state.pending = []

    def run_to_end(self) -> RunTranscript:
        while not self.done:
            self.step()
        return self.finish()

    def finish(self) -> RunTranscript:
        tr = self.transcript
        for s, r, h in self.outbox:
            tr.strands.append(Strand(self.round, s, h))
            self._end(h, "stranded", self.round)
        self.outbox = []
        tr.lineages = list(self.registry.lineages)
        tr.handle_lineage = dict(self.registry.handle_lineage)
        tr.terminal = dict(self.terminal)
        tr.received = {p: Counter(s.received) for p, s in self.parties.items()}
        self.view.received_counts = tr.received_counts()
        tr.flags = dict(self.adversary.flags(self.view))
        return tr


def run(protocol: Protocol, inputs: SimpleInput, adversary: Strategy, seed: int, *,
        prf_mode: str = "normal", merge_keep: str = "lowest",
        forced_aborts: Iterable[int] = ()) -> RunTranscript:
    """Execute one full run and return its transcript."""
    ex = Execution(protocol, inputs, adversary, seed, prf_mode=prf_mode, merge_keep=merge_keep)
    for p in forced_aborts:
        ex.force_abort(p)
    return ex.run_to_end()
