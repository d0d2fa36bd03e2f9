"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even
under capture) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import random
import subprocess
import sys
from fractions import Fraction
from functools import lru_cache
from pathlib import Path


from onionsim.adversaries import (
    passive_strategy,
    sender_targeting_strategy,
    singleton_dropping_strategy,
    isolating_strategy,
)
from onionsim.analytics import (
    balls_bins_oracle,
    cannot_affect_check,
    equalizing_experiment,
    isolation_probability,
    onion_cost,
    pairs_expectation_oracle,
    zeta_recursion,
)
from onionsim.engine import run
from onionsim.inputs import random_simple_input
from onionsim.keys import gen_keys
from onionsim.pitree import gen_ckpt_data, merge_level
from onionsim.protocols import make_protocol, make_strawman_protocol

BFLY = dict(n_parties=16, chi=4, d=4, iterations=4, kappa=0.25, lam=16)
PARTWAY_EPS = 1.5


def report(n: int, ok: bool, text: str, capsys=None) -> None:
    line = f"CRITERION {n:>2} [{'PASS' if ok else 'FAIL'}] {text}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)


def sigma(seed: int, n: int = 16):
    return random_simple_input(n, random.Random(seed))


@lru_cache(maxsize=None)
def passive_bfly_runs():
    proto = make_protocol("pibfly", **BFLY)
    return [run(proto, sigma(s), passive_strategy(), s) for s in range(200)]


def check_1():
    runs = passive_bfly_runs()
    good = sum(len(t.message_deliveries()) == 16 and not t.aborts for t in runs)
    return good == 200, f"passive completeness: {good}/200 runs with 16 deliveries and 0 aborts"


def check_2():
    proto = make_protocol("pitree", n_parties=16, chi=4, d=2, kappa=0.25)
    d = proto.d
    violations = merges = 0
    for s in range(100):
        tr = run(proto, sigma(s), passive_strategy(), s)
        predicted = set()
        for lin in tr.lineages:
            if lin.kind != "merging":
                continue
            for m, pos in enumerate(lin.info["merge_positions"], start=1):
                predicted.add((lin.info["group"], lin.info["leaf"][m:], m, lin.plan.path[pos - 1], pos,
                               lin.plan.nonces[pos - 1]))
        actual = set()
        for mg in tr.merges:
            a, b = tr.lineage_of(mg.survivor), tr.lineage_of(mg.dropped)
            merges += 1
            if a.kind != "merging" or b.kind != "merging" or a.info["group"] != b.info["group"]:
                violations += 1
                continue
            m = merge_level(a.info["leaf"], b.info["leaf"])
            pos = m * d + 1
            ok = (m >= 1 and mg.round == pos and a.plan.path[pos - 1] == b.plan.path[pos - 1] == mg.party
                  and a.plan.nonces[pos - 1] == b.plan.nonces[pos - 1] == mg.nonce)
            violations += not ok
            actual.add((a.info["group"], a.info["leaf"][m:], m, mg.party, mg.round, mg.nonce))
        violations += len(predicted ^ actual)
    return violations == 0, f"merge rendezvous: {merges} merges over 100 runs, {violations} violations"


def check_3():
    bad = 0
    epochs = make_protocol("pibfly", **BFLY).n_epochs
    freq = make_protocol("pibfly", **BFLY).params.freq
    for s in range(50):
        keys = gen_keys(16, s)
        data = {i: gen_ckpt_data(i, keys, epochs, freq) for i in range(1, 17)}
        for i in range(1, 17):
            for k in range(1, 17):
                mine = {(x.epoch, x.checkpoint) for x in data[i] if x.verifier == k}
                theirs = {(x.epoch, x.checkpoint) for x in data[k] if x.verifier == i}
                bad += mine != theirs
    return bad == 0, f"checkpoint symmetry: {bad} asymmetric ordered pairs over 50 seeds"


def check_4():
    rep = isolation_probability(100, 0.2, 3, 100_000, seed=4)
    exact = Fraction(1140, 161700)
    ok_sampler = rep.exact == exact and abs(rep.empirical - float(exact)) <= 0.2 * float(exact)
    # engine-level: direct sends, so the target transmits exactly one onion,
    # to a recipient other than itself; corruption excludes the target
    proto = make_strawman_protocol(0, n_parties=100, kappa=0.2)
    trials = hits = 0
    for s in range(1000):
        inp = sigma(s, 100)
        target = next(p for p in range(1, 101) if inp.recipient(p) != p)
        tr = run(proto, inp, isolating_strategy(target), s)
        trials += 1
        hits += bool(tr.flags["isolated"])
    engine_p, engine_exact = hits / trials, 20 / 99
    ok_engine = abs(engine_p - engine_exact) <= 0.2 * engine_exact
    return ok_sampler and ok_engine, (
        f"isolation probability: sampler {rep.empirical:.5f} vs exact {float(exact):.5f} "
        f"(rel err {rep.relative_error:.3f}, tol 0.20); engine one-transmission check "
        f"{engine_p:.3f} vs 20/99={engine_exact:.3f}")


def check_5():
    proto = make_strawman_protocol(1, n_parties=16, kappa=0.25)
    i, j = 1, 2
    s0 = sigma(5)
    mean_hops, unaffected = cannot_affect_check(proto, isolating_strategy(i), s0, i, j, 200, base_seed=5)
    rep = equalizing_experiment(proto, isolating_strategy(i), s0, i, j, 400, base_seed=5, bootstrap=50)
    zero1, pos0 = rep.zero_given_isolated[1], rep.positive_given_isolated[0]
    ok = unaffected and zero1 == 1.0 and pos0 is not None and pos0 > 0
    return ok, (f"lower-bound demo: cannot_affect={unaffected} (mean hops {mean_hops:.3f}); "
                f"isolated runs {rep.isolated[0]}/{rep.isolated[1]}; P[v_r=0|iso, sigma1]={zero1}; "
                f"P[v_r>0|iso, sigma0]={pos0}")


def check_6():
    proto = make_protocol("pibfly", **BFLY)
    L, d, chi = proto.params.mixing_epochs, proto.d, BFLY["chi"]
    need = math.ceil((1 - BFLY["kappa"]) * chi / 3)
    violations = 0
    for s in range(500):
        target = s % 16 + 1
        tr = run(proto, sigma(s), sender_targeting_strategy(target), s)
        aborted = any(a.round <= (L + 1) * d and a.party not in tr.corrupted for a in tr.aborts)
        alive = 0
        for lin in tr.lineages:
            if lin.kind == "merging" and lin.plan.origin == target:
                end = tr.terminal.get(lin.index)
                alive += end is None or end[1] > L * d
        violations += not (aborted or alive >= need)
    return violations == 0, f"premix dichotomy: {violations} violations in 500 runs (retain bar {need})"


def check_7():
    proto = make_protocol("pibfly", **BFLY)
    L, h, d = proto.params.mixing_epochs, proto.params.tree.h, proto.d
    partway = L + math.ceil(h / PARTWAY_EPS)
    schedule = [0.5] + [0.0] * (proto.n_epochs - 1)
    zeta = zeta_recursion(schedule)
    reaches = zeta[partway - 1] >= 0.5
    good = 0
    for s in range(200):
        tr = run(proto, sigma(s), singleton_dropping_strategy(schedule), s)
        aborted = {a.party for a in tr.aborts if a.round <= partway * d}
        good += set(tr.honest) <= aborted
    ok = reaches and good >= 0.95 * 200
    return ok, (f"zeta-threshold abort: E[zeta_{partway}]={zeta[partway - 1]:.2f}, all honest aborted "
                f"by round {partway * d} in {good}/200 runs (bar 190)")


def check_8():
    small = pairs_expectation_oracle(4, 2)
    big = pairs_expectation_oracle(50, 20, trials=100_000, seed=8)
    ok = small.exhaustive == Fraction(12, 7) == small.formula and big.relative_error <= 0.01
    return ok, (f"pairs oracle: exhaustive {small.exhaustive} (want 12/7); Monte-Carlo {big.empirical:.4f} "
                f"vs {float(big.formula):.4f} (rel err {big.relative_error:.4f}, tol 0.01)")


def check_9():
    mean = balls_bins_oracle(16, 64, 4, 100_000, seed=9)
    closed = 64 * (1 - (63 / 64) ** 16)
    succ = balls_bins_oracle(100, 128, 4, 10_000, seed=9)
    ok = abs(mean.mean_nonempty - closed) <= 0.01 * closed and succ.success_fraction >= 0.999
    return ok, (f"balls-bins oracle: mean nonempty {mean.mean_nonempty:.3f} vs {closed:.3f} "
                f"(tol 1%); success fraction {succ.success_fraction:.4f} (bar 0.999)")


def check_10():
    runs = passive_bfly_runs()
    chi = BFLY["chi"]
    over = 0
    reconciled = True
    worst = 0
    for tr in runs:
        cost = onion_cost(tr)
        worst = max(worst, cost.max_formed)
        over += cost.max_formed > 3 * chi
        recount = sum(1 for t in tr.transmissions if t.sender in set(tr.honest))
        reconciled &= (cost.total == len(tr.transmissions)
                       and cost.onion_cost == Fraction(recount, len(tr.honest)))
    ok = over == 0 and reconciled
    return ok, (f"onion-cost accounting: X <= 3chi={3 * chi} violated in {over}/200 runs (max X {worst}); "
                f"cost reconciliation {'exact' if reconciled else 'BROKEN'}")


def check_11(tmp: Path):
    outputs = []
    for k in range(2):
        # same relative output path each time, since the config echo records it
        work = tmp / f"rep{k}"
        work.mkdir()
        cmds = [
            ["run", "--protocol", "pibfly", "--seed", "11"],
            ["run", "--protocol", "pitree", "--seed", "11", "--adversary",
             "singleton_dropping:schedule=[0.5,0,0]", "--oracle-mode"],
            ["equalize", "--protocol", "strawman", "--adversary", "isolating:target=1", "--trials", "100"],
            ["oracles", "pairs", "--trials", "2000"],
            ["oracles", "bins", "--trials", "2000"],
        ]
        files = {}
        for n, cmd in enumerate(cmds):
            dest = work / "res" / str(n)
            subprocess.run([sys.executable, "-m", "onionsim", *cmd, "--out", f"res/{n}"], check=True,
                           capture_output=True, cwd=work)
            for f in sorted(dest.iterdir()):
                files[f"{n}/{f.name}"] = f.read_bytes()
        outputs.append(files)
    same = outputs[0] == outputs[1]
    return same, f"determinism: {len(outputs[0])} output files byte-identical across reruns: {same}"


def test_criterion_01_passive_completeness(capsys):
    ok, text = check_1()
    report(1, ok, text, capsys)
    assert ok, text


def test_criterion_02_merge_rendezvous(capsys):
    ok, text = check_2()
    report(2, ok, text, capsys)
    assert ok, text


def test_criterion_03_checkpoint_symmetry(capsys):
    ok, text = check_3()
    report(3, ok, text, capsys)
    assert ok, text


def test_criterion_04_isolation_probability(capsys):
    ok, text = check_4()
    report(4, ok, text, capsys)
    assert ok, text


def test_criterion_05_lower_bound_demo(capsys):
    ok, text = check_5()
    report(5, ok, text, capsys)
    assert ok, text


def test_criterion_06_premix_dichotomy(capsys):
    ok, text = check_6()
    report(6, ok, text, capsys)
    assert ok, text


def test_criterion_07_zeta_threshold_abort(capsys):
    ok, text = check_7()
    report(7, ok, text, capsys)
    assert ok, text


def test_criterion_08_pairs_oracle(capsys):
    ok, text = check_8()
    report(8, ok, text, capsys)
    assert ok, text


def test_criterion_09_balls_bins_oracle(capsys):
    ok, text = check_9()
    report(9, ok, text, capsys)
    assert ok, text


def test_criterion_10_onion_cost_accounting(capsys):
    ok, text = check_10()
    report(10, ok, text, capsys)
    assert ok, text


def test_criterion_11_determinism(capsys, tmp_path):
    ok, text = check_11(tmp_path)
    report(11, ok, text, capsys)
    assert ok, text


if __name__ == "__main__":
    import tempfile

    checks = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9, check_10]
    failed = 0
    for n, check in enumerate(checks, start=1):
        ok, text = check()
        report(n, ok, text)
        failed += not ok
    with tempfile.TemporaryDirectory() as tmp:
        ok, text = check_11(Path(tmp))
        report(11, ok, text)
        failed += not ok
    sys.exit(1 if failed else 0)
