"""Run transcripts and their line-delimited JSON serialisation.

Event log schema (one JSON object per line, keys sorted):

* ``{"kind": "header", ...}`` -- first line: protocol, parameters, seed,
  adversary name and mode, corrupted set, package version.
* per round, in this order: ``transmit`` (sender, receiver, handle),
  ``drop`` (handle, sender, receiver), ``deliver`` (recipient, message,
  handle), ``merge`` (party, survivor, dropped, nonce), ``diagnostic``
  (party, epoch, expected, missing, verdict), ``abort`` (party, cause),
  ``strand`` (party, handle).
* ``lineage`` lines (ground truth, round 0): index, kind, origin, path,
  nonces, terminal event and its round.
* a final ``flags`` line with the adversary's own flags.

Handles and nonces are written as fixed-width lowercase hex strings.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, NamedTuple, Optional, Tuple

from .onions import Lineage

__all__ = [
    "Transmission",
    "Drop",
    "Delivery",
    "Merge",
    "Diagnostic",
    "AbortEvent",
    "Strand",
    "RunTranscript",
    "TERMINAL_KINDS",
]

TERMINAL_KINDS = ("delivered", "merged", "dropped", "stranded")


class Transmission(NamedTuple):
    round: int
    sender: int
    receiver: int
    handle: int


class Drop(NamedTuple):
    round: int
    handle: int
    sender: int
    receiver: int


class Delivery(NamedTuple):
    round: int
    recipient: int
    message: Optional[str]
    handle: int


class Merge(NamedTuple):
    round: int
    party: int
    survivor: int
    dropped: int
    nonce: int


class Diagnostic(NamedTuple):
    round: int
    party: int
    epoch: int
    expected: int
    missing: int
    verdict: str


class AbortEvent(NamedTuple):
    round: int
    party: int
    cause: str


class Strand(NamedTuple):
    round: int
    party: int
    handle: int


def _hex(value: int, width: int) -> str:
    return format(value, f"0{width}x")


@dataclass
class RunTranscript:
    header: Dict[str, Any]
    corrupted: FrozenSet[int]
    transmissions: List[Transmission] = field(default_factory=list)
    drops: List[Drop] = field(default_factory=list)
    deliveries: List[Delivery] = field(default_factory=list)
    merges: List[Merge] = field(default_factory=list)
    diagnostics: List[Diagnostic] = field(default_factory=list)
    aborts: List[AbortEvent] = field(default_factory=list)
    strands: List[Strand] = field(default_factory=list)
    # ground truth, never shown to realistic adversaries
    lineages: List[Lineage] = field(default_factory=list)
    handle_lineage: Dict[int, int] = field(default_factory=dict)
    terminal: Dict[int, Tuple[str, int]] = field(default_factory=dict)
    received: Dict[int, Counter] = field(default_factory=dict)
    flags: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_parties(self) -> int:
        return self.header["n_parties"]

    @property
    def honest(self) -> List[int]:
        return [p for p in range(1, self.n_parties + 1) if p not in self.corrupted]

    @property
    def rounds(self) -> int:
        return self.header["rounds"]

    def received_counts(self) -> List[int]:
        """``v_1..v_N``: number of real messages each party received."""
        return [sum(self.received.get(p, Counter()).values()) for p in range(1, self.n_parties + 1)]

    def message_deliveries(self) -> List[Delivery]:
        return [d for d in self.deliveries if d.message is not None and not d.message.startswith("\x00")]

    def aborted_parties(self) -> FrozenSet[int]:
        return frozenset(a.party for a in self.aborts)

    def lineage_of(self, handle: int) -> Lineage:
        return self.lineages[self.handle_lineage[handle]]

    def to_jsonl(self) -> str:
        by_round: Dict[int, List[Dict[str, Any]]] = {}

        def add(rnd: int, row: Dict[str, Any]) -> None:
            by_round.setdefault(rnd, []).append(row)

        for t in self.transmissions:
            add(t.round, {"kind": "transmit", "round": t.round, "sender": t.sender,
                          "receiver": t.receiver, "handle": _hex(t.handle, 32)})
        for dr in self.drops:
            add(dr.round, {"kind": "drop", "round": dr.round, "handle": _hex(dr.handle, 32),
                           "sender": dr.sender, "receiver": dr.receiver})
        for dl in self.deliveries:
            msg = dl.message if dl.message is None or not dl.message.startswith("\x00") else "ABORT"
            add(dl.round, {"kind": "deliver", "round": dl.round, "recipient": dl.recipient,
                           "message": msg, "handle": _hex(dl.handle, 32)})
        for m in self.merges:
            add(m.round, {"kind": "merge", "round": m.round, "party": m.party,
                          "survivor": _hex(m.survivor, 32), "dropped": _hex(m.dropped, 32),
                          "nonce": _hex(m.nonce, 16)})
        for dg in self.diagnostics:
            add(dg.round, {"kind": "diagnostic", "round": dg.round, "party": dg.party, "epoch": dg.epoch,
                           "expected": dg.expected, "missing": dg.missing, "verdict": dg.verdict})
        for a in self.aborts:
            add(a.round, {"kind": "abort", "round": a.round, "party": a.party, "cause": a.cause})
        for s in self.strands:
            add(s.round, {"kind": "strand", "round": s.round, "party": s.party, "handle": _hex(s.handle, 32)})

        lines = [json.dumps({"kind": "header", **self.header}, sort_keys=True)]
        for rnd in sorted(by_round):
            lines.extend(json.dumps(row, sort_keys=True) for row in by_round[rnd])
        for lin in self.lineages:
            end, end_round = self.terminal.get(lin.index, ("live", -1))
            lines.append(json.dumps({
                "kind": "lineage", "round": 0, "index": lin.index, "type": lin.kind,
                "origin": lin.plan.origin, "path": list(lin.plan.path),
                "nonces": [_hex(x, 16) for x in lin.plan.nonces],
                "terminal": end, "terminal_round": end_round,
            }, sort_keys=True))
        lines.append(json.dumps({"kind": "flags", **_jsonable(self.flags)}, sort_keys=True))
        return "\n".join(lines) + "\n"


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = [_jsonable(v) for v in obj]
        return sorted(items) if isinstance(obj, (set, frozenset)) else items
    return obj
