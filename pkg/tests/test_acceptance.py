"""Acceptance criteria 1-9.

Each test records one PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py) and when this file is run as a script.
"""

import math
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from modedse.codec import clear_cache, feature_ids
from modedse.dse import DseConfig, archive_csv, random_genotype, run_dse
from modedse.genotype import (
    PB_GENOTYPE_TEXT,
    PE_GENOTYPE_TEXT,
    Genotype,
    exhaustive_genotype,
    parse_genotype,
    validate_genotype,
)
from modedse.media_io import synthesize_sequence
from modedse.metrics import RdCurve, bd_energy, bd_rate
from modedse.objectives import collect_objectives, default_energy_table, estimate_energy
from modedse.pareto import hypervolume, nondominated_sort
from modedse.pipeline import encode_sequence

from oracles import cost_lookup, interpret_guards, prepared_frames, random_cu_instance

RESULTS: dict[int, str] = {}

DSE_QP = 20
DSE_SEED = 7
TRAINING_KINDS = ("moving_block", "gradient", "noise")


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)


# --------------------------------------------------------------------------- 1


def test_criterion_1_guard_semantics():
    seqs = [synthesize_sequence(k, 128, 64, 2, seed=i) for i, k in enumerate(TRAINING_KINDS)]
    frames = prepared_frames(seqs)
    rng = np.random.default_rng(101)
    mismatches = 0
    start = time.perf_counter()
    for _ in range(1000):
        g, pipe, ctx = random_cu_instance(rng, frames)
        trace = []
        pipe.decide_cu(ctx, trace)
        genes = g[ctx.depth]
        expect = interpret_guards(genes.order, genes.guards, cost_lookup(ctx, pipe), ctx.frame.intra_only)
        mismatches += [s.position for s in trace] != expect
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10.0
    record(1, ok, f"{mismatches} mismatches in 1000 instances, {elapsed:.1f} s (limit 10 s)")
    assert ok


# --------------------------------------------------------------------------- 2


def test_criterion_2_subset_minimum():
    rng = np.random.default_rng(202)
    probes = [random_genotype(rng) for _ in range(50)]
    exhaustive = exhaustive_genotype()
    violations = []
    ctus = 0
    start = time.perf_counter()
    for i, kind in enumerate(TRAINING_KINDS):
        seq = synthesize_sequence(kind, 128, 64, 10, seed=i)
        rep = encode_sequence(seq, exhaustive, DSE_QP, probes=probes)
        for c in rep.ctus:
            ctus += 1
            worst = min(c.probe_costs)
            if c.cost_j > worst:
                violations.append((kind, c.frame, c.x, c.y, c.cost_j, worst))
    elapsed = time.perf_counter() - start
    ok = not violations and elapsed < 60.0
    detail = f"{len(violations)} violations over {ctus} CTUs x 50 genotypes, {elapsed:.1f} s (limit 60 s)"
    if violations:
        k, f, x, y, ex, gd = violations[0]
        detail += f"; first: {k} frame {f} ctu ({x},{y}) exhaustive J {ex:.2f} > guarded J {gd:.2f}"
    record(2, ok, detail)
    assert ok, detail


# --------------------------------------------------------------------------- 3


def chain_ranks(points):
    """Front index as the longest dominance chain ending at each point."""
    n = len(points)
    dominators = [[] for _ in range(n)]
    for i in range(n):
        a = points[i]
        for j in range(n):
            b = points[j]
            if all(x <= y for x, y in zip(a, b)) and a != b:
                dominators[j].append(i)
    rank = [0] * n
    for j in sorted(range(n), key=lambda k: sum(points[k])):
        if dominators[j]:
            rank[j] = 1 + max(rank[i] for i in dominators[j])
    return rank


def test_criterion_3_nsga_sort():
    rng = np.random.default_rng(303)
    bad = 0
    sort_time = 0.0
    for t in range(1000):
        n = int(rng.integers(1, 201))
        if t % 2:
            pts = [tuple(int(v) for v in row) for row in rng.integers(0, 8, (n, 4))]
        else:
            pts = [tuple(float(v) for v in row) for row in rng.random((n, 4))]
        t0 = time.perf_counter()
        fronts = nondominated_sort(pts)
        sort_time += time.perf_counter() - t0
        got = [0] * n
        for r, f in enumerate(fronts):
            for i in f:
                got[i] = r
        bad += got != chain_ranks(pts) or sorted(i for f in fronts for i in f) != list(range(n))
    ok = bad == 0 and sort_time < 30.0
    record(3, ok, f"{bad} of 1000 populations differ from the oracle, sort time {sort_time:.1f} s (limit 30 s)")
    assert ok


# --------------------------------------------------------------------------- 4


def test_criterion_4_energy_model():
    table = default_energy_table()
    ids = sorted(feature_ids())
    rng = np.random.default_rng(404)
    failures = Counter()
    for _ in range(10_000):
        k = int(rng.integers(1, 6))
        chosen = rng.choice(ids, size=k, replace=False)
        a = {f: int(rng.integers(0, 100_000)) for f in chosen}
        b = {f: int(rng.integers(0, 100_000)) for f in rng.choice(ids, size=int(rng.integers(1, 6)), replace=False)}
        s = int(rng.integers(0, 100))
        ea, eb = estimate_energy(a, table), estimate_energy(b, table)
        exact = sum(Fraction(n) * Fraction(table[f]) for f, n in a.items())
        failures["exact"] += Fraction(ea) != exact
        failures["additive"] += estimate_energy(Counter(a) + Counter(b), table) != ea + eb
        failures["linear"] += estimate_energy({f: s * n for f, n in a.items()}, table) != s * ea
    failures["empty"] += estimate_energy({}, table) != 0.0
    ok = sum(failures.values()) == 0
    record(4, ok, "10000 random feature counts; violations " + ", ".join(f"{k}={v}" for k, v in sorted(failures.items())))
    assert ok


# --------------------------------------------------------------------------- 5


def test_criterion_5_bd_shift():
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(20):
        rates = np.sort(rng.uniform(100, 20000, 4))[::-1]
        psnrs = np.sort(rng.uniform(25, 50, 4))[::-1]
        energies = np.sort(rng.uniform(50, 5000, 4))[::-1]
        ref = RdCurve.from_lists(rates.tolist(), psnrs.tolist(), energies.tolist())
        for c in (0.9, 0.97, 1.03, 1.1, 2.0):
            worst = max(worst, abs(bd_rate(ref, ref.scaled(rate=c)) - (c - 1) * 100),
                        abs(bd_energy(ref, ref.scaled(energy=c)) - (c - 1) * 100))
    ok = worst <= 1e-6
    record(5, ok, f"max |BD - (c-1)*100| = {worst:.2e} over 20 curves x 5 factors (limit 1e-6)")
    assert ok


# --------------------------------------------------------------------------- 6, 7, 9


def training_sequences():
    return [synthesize_sequence(k, 128, 64, 2, seed=i, name=k) for i, k in enumerate(TRAINING_KINDS)]


def dse_config(workers=1):
    return DseConfig(population_size=40, iterations=200, qp=DSE_QP, seed=DSE_SEED, workers=workers,
                     training=TRAINING_KINDS)


def _strict_nondominated(vectors) -> bool:
    V = np.asarray(vectors, dtype=float)
    le = (V[:, None, :] <= V[None, :, :]).all(axis=2)
    lt = (V[:, None, :] < V[None, :, :]).any(axis=2)
    return not (le & lt).any()


@pytest.fixture(scope="module")
def dse_run():
    clear_cache()
    seqs = training_sequences()
    table = default_energy_table()
    checks = {"nondominated_violations": 0, "hv_decreases": 0, "generations": 0, "ref": None, "hv": []}

    def on_generation(gen, population, archive):
        vecs = [e.vector for e in archive]
        if checks["ref"] is None:
            V = np.asarray([p.vector for p in population], dtype=float)
            lo, hi = V.min(axis=0), V.max(axis=0)
            checks["ref"] = tuple((hi + 0.5 * (hi - lo) + 1.0).tolist())
        hv = hypervolume(vecs, checks["ref"])
        if checks["hv"] and hv < checks["hv"][-1]:
            checks["hv_decreases"] += 1
        checks["hv"].append(hv)
        checks["nondominated_violations"] += not _strict_nondominated(vecs)
        checks["generations"] += 1

    start = time.perf_counter()
    archive = run_dse(dse_config(), seqs, table, on_generation=on_generation)
    elapsed = time.perf_counter() - start
    base = [collect_objectives(encode_sequence(s, exhaustive_genotype(), DSE_QP), table) for s in seqs]
    base_rate = sum(b.rate for b in base) / len(base)
    base_effort = sum(b.effort for b in base) / len(base)
    return {"archive": archive, "elapsed": elapsed, "checks": checks, "base_rate": base_rate,
            "base_effort": base_effort, "csv": archive_csv(archive, DSE_QP), "seqs": seqs, "table": table}


@pytest.mark.slow
def test_criterion_6_directional_dse(dse_run):
    archive = list(dse_run["archive"])
    br, be = dse_run["base_rate"], dse_run["base_effort"]
    n = len(archive)
    mutual = _strict_nondominated([e.vector for e in archive])
    good = [e for e in archive if e.objectives.effort <= 0.6 * be and e.objectives.rate <= 1.10 * br]
    min_effort = min(archive, key=lambda e: (e.objectives.effort, e.objectives.rate))
    min_rate = min(archive, key=lambda e: (e.objectives.rate, e.objectives.effort))
    tradeoff = min_effort.objectives.rate >= min_rate.objectives.rate
    best = max(good, key=lambda e: 1 - e.objectives.effort / be, default=None)
    ok = n >= 20 and mutual and bool(good) and tradeoff and dse_run["elapsed"] < 15 * 60
    detail = (f"(a) {n} archive points, mutually nondominated={mutual}; "
              f"(b) {len(good)} points with >=40% effort savings at <=10% rate increase")
    if best is not None:
        detail += (f" (e.g. {100 * (1 - best.objectives.effort / be):.1f}% savings at "
                   f"{100 * (best.objectives.rate / br - 1):+.2f}% rate)")
    detail += (f"; (c) min-effort rate {min_effort.objectives.rate:.1f} >= min-rate rate "
               f"{min_rate.objectives.rate:.1f}: {tradeoff}; runtime {dse_run['elapsed']:.0f} s (limit 900 s)")
    record(6, ok, detail)
    assert ok, detail


@pytest.mark.slow
def test_criterion_7_archive_invariants(dse_run):
    c = dse_run["checks"]
    ok = c["generations"] == 201 and c["nondominated_violations"] == 0 and c["hv_decreases"] == 0
    record(7, ok, f"{c['generations']} archive snapshots, {c['nondominated_violations']} nondominance "
                  f"violations, {c['hv_decreases']} hypervolume decreases")
    assert ok


def test_criterion_8_published_literals(tiny_seq):
    problems = []
    for name, text in (("PB", PB_GENOTYPE_TEXT), ("PE", PE_GENOTYPE_TEXT)):
        g = parse_genotype(text)
        errs = validate_genotype(g)
        if errs:
            problems.append(f"{name}: {errs}")
        if any(genes.guards[:2] != (None, None) for genes in g.depths):
            problems.append(f"{name}: guard slots 0/1 not AlwaysTest")
        if g.to_text() != text:
            problems.append(f"{name}: text form does not round-trip bitwise")
        if parse_genotype(g.to_compact()).to_text() != text:
            problems.append(f"{name}: compact form does not round-trip")
        js = g.to_json()
        if parse_genotype(js).to_json() != js or Genotype.from_dict(g.to_dict()) != g:
            problems.append(f"{name}: JSON does not round-trip bitwise")
        for qp in (10, 40):
            rep = encode_sequence(tiny_seq, g, qp)
            if not (rep.total_rate > 0 and rep.effort > 0 and len(rep.ctus) == 2):
                problems.append(f"{name}: encode at QP {qp} produced an empty report")
    ok = not problems
    record(8, ok, "PB and PE parse, validate, encode and round-trip" if ok else "; ".join(problems))
    assert ok


@pytest.mark.slow
def test_criterion_9_determinism(dse_run):
    # cold cache and parallel workers: the rerun must not lean on state from the first run
    clear_cache()
    start = time.perf_counter()
    rerun = run_dse(dse_config(workers=2), dse_run["seqs"], dse_run["table"])
    elapsed = time.perf_counter() - start
    same = archive_csv(rerun, DSE_QP) == dse_run["csv"]
    record(9, same, f"serial run vs workers=2 rerun (same seed, cold cache): archive CSVs "
                    f"{'byte-identical' if same else 'DIFFER'} ({len(dse_run['csv'])} bytes, rerun {elapsed:.0f} s)")
    assert same


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
