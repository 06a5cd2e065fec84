"""NSGA-II search over mode-decision genotypes.

Individuals are evaluated by encoding every training sequence at one QP and
averaging the resulting :class:`ObjectiveVector`. Objective vectors are
minimised as ``(rate, -psnr, effort, energy)``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .codec import DEFAULT_CONFIG, CodecConfig, valid_modes
from .genotype import (
    DEPTHS,
    DepthGenes,
    Genotype,
    exhaustive_genotype,
    hm_like_genotype,
    parse_genotype,
    require_valid,
)
from .media_io import Sequence
from .objectives import EnergyTable, ObjectiveVector, collect_objectives
from .pareto import ParetoArchive, crowding_distance, hypervolume, nondominated_sort
from .pipeline import encode_sequence

log = logging.getLogger(__name__)

ARCHIVE_SCHEMA = "modedse-archive/1"
ARCHIVE_COLUMNS = ("qp", "genotype", "rate_bits", "psnr_db", "effort", "energy", "rank")
DEFAULT_QPS = (10, 20, 30, 40)


class DepthMismatch(ValueError):
    pass


class EmptyArchive(ValueError):
    pass


class EvaluationError(RuntimeError):
    pass


@dataclass
class Individual:
    genotype: Genotype
    objectives: ObjectiveVector | None = None
    rank: int | None = None
    crowding: float | None = None

    @property
    def vector(self):
        return None if self.objectives is None else self.objectives.minimized()

    @property
    def key(self) -> str:
        return self.genotype.to_compact()


@dataclass(frozen=True)
class DseConfig:
    """Search settings for one per-QP run.

    ``iterations`` counts generations; each generation produces
    ``population_size`` offspring.
    """

    population_size: int = 40
    iterations: int = 200
    qp: int = 20
    crossover_prob: float = 0.9
    order_swap_prob: float = 0.5
    guard_mutation_prob: float = 0.5
    init_always_prob: float = 0.25
    seed: int = 0
    training: tuple[str, ...] = ()
    workers: int = 1
    archive_capacity: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "training", tuple(self.training))
        if self.population_size < 4:
            raise ValueError(f"population_size must be >= 4, got {self.population_size}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        for name in ("crossover_prob", "order_swap_prob", "guard_mutation_prob", "init_always_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "population_size": self.population_size,
            "iterations": self.iterations,
            "qp": self.qp,
            "crossover_prob": self.crossover_prob,
            "order_swap_prob": self.order_swap_prob,
            "guard_mutation_prob": self.guard_mutation_prob,
            "init_always_prob": self.init_always_prob,
            "seed": self.seed,
            "training": list(self.training),
            "workers": self.workers,
            "archive_capacity": self.archive_capacity,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DseConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown dse config keys: {sorted(unknown)}")
        return cls(**d)


# --------------------------------------------------------------------------- operators


def _random_guard(rng: np.random.Generator, depth: int, always_prob: float):
    if rng.random() < always_prob:
        return None
    modes = valid_modes(depth)
    return int(modes[rng.integers(len(modes))])


def random_genotype(rng: np.random.Generator, always_prob: float = 0.25) -> Genotype:
    depths = []
    for d in DEPTHS:
        order = tuple(int(m) for m in rng.permutation(valid_modes(d)))
        guards = (None, None) + tuple(_random_guard(rng, d, always_prob) for _ in order[2:])
        depths.append(DepthGenes(d, order, guards))
    return Genotype(tuple(depths))


def _cuts(n: int, rng) -> tuple[int, int]:
    a, b = sorted(int(v) for v in rng.choice(n + 1, size=2, replace=False))
    return a, b


def _ox_child(keep: tuple, other: tuple, a: int, b: int) -> tuple:
    n = len(keep)
    child = [None] * n
    child[a:b] = keep[a:b]
    kept = set(keep[a:b])
    fill = [other[(b + i) % n] for i in range(n) if other[(b + i) % n] not in kept]
    for i, m in enumerate(fill):
        child[(b + i) % n] = m
    return tuple(child)


def order_crossover(p1, p2, rng, cuts: tuple[int, int] | None = None):
    """OX on two order vectors (tuples or :class:`DepthGenes`).

    Child 1 keeps ``p1[a:b]`` in place and takes the remaining modes in the
    order they appear in ``p2``, starting after the second cut and wrapping;
    child 2 is symmetric.
    """
    if isinstance(p1, DepthGenes) or isinstance(p2, DepthGenes):
        if not (isinstance(p1, DepthGenes) and isinstance(p2, DepthGenes)) or p1.depth != p2.depth:
            raise DepthMismatch("order crossover needs two parents of the same depth")
        o1, o2 = p1.order, p2.order
    else:
        o1, o2 = tuple(p1), tuple(p2)
    if len(o1) != len(o2) or set(o1) != set(o2):
        raise DepthMismatch("parents are not permutations of the same mode set")
    a, b = cuts if cuts is not None else _cuts(len(o1), rng)
    return _ox_child(o1, o2, a, b), _ox_child(o2, o1, a, b)


def crossover(g1: Genotype, g2: Genotype, rng) -> tuple[Genotype, Genotype]:
    """Per-depth OX on the orders; guards swap positionally outside the cut segment."""
    c1, c2 = [], []
    for d1, d2 in zip(g1.depths, g2.depths):
        if d1.depth != d2.depth:
            raise DepthMismatch(f"depth {d1.depth} crossed with depth {d2.depth}")
        a, b = _cuts(len(d1.order), rng)
        o1, o2 = order_crossover(d1.order, d2.order, rng, cuts=(a, b))
        gd1 = d2.guards[:a] + d1.guards[a:b] + d2.guards[b:]
        gd2 = d1.guards[:a] + d2.guards[a:b] + d1.guards[b:]
        c1.append(DepthGenes(d1.depth, o1, gd1))
        c2.append(DepthGenes(d1.depth, o2, gd2))
    return Genotype(tuple(c1)), Genotype(tuple(c2))


def mutate(genotype: Genotype, rng, config: DseConfig) -> Genotype:
    out = []
    for genes in genotype.depths:
        order, guards = list(genes.order), list(genes.guards)
        if config.order_swap_prob > 0 and rng.random() < config.order_swap_prob:
            i, j = (int(v) for v in rng.choice(len(order), size=2, replace=False))
            order[i], order[j] = order[j], order[i]
        if config.guard_mutation_prob > 0 and rng.random() < config.guard_mutation_prob:
            slot = int(rng.integers(2, len(guards)))
            guards[slot] = _random_guard(rng, genes.depth, config.init_always_prob)
        out.append(DepthGenes(genes.depth, order, guards))
    return Genotype(tuple(out))


# --------------------------------------------------------------------------- evaluation


def evaluate_genotype(
    genotype: Genotype,
    sequences: list[Sequence],
    qp: int,
    table: EnergyTable,
    codec_config: CodecConfig = DEFAULT_CONFIG,
) -> ObjectiveVector:
    """Objectives averaged over ``sequences``."""
    try:
        vectors = [collect_objectives(encode_sequence(s, genotype, qp, codec_config), table) for s in sequences]
    except Exception as exc:
        raise EvaluationError(f"evaluating genotype {genotype.to_compact()!r} failed: {exc}") from exc
    return ObjectiveVector.mean(vectors)


_WORKER: dict = {}


def _worker_init(sequences, qp, table, codec_config):
    _WORKER.update(sequences=sequences, qp=qp, table=table, codec_config=codec_config)


def _worker_eval(text: str) -> ObjectiveVector:
    w = _WORKER
    return evaluate_genotype(parse_genotype(text), w["sequences"], w["qp"], w["table"], w["codec_config"])


class _Evaluator:
    """Memoised, optionally parallel evaluation; results come back in input order."""

    def __init__(self, config, sequences, table, codec_config):
        self.args = (list(sequences), config.qp, table, codec_config)
        self.memo: dict[str, ObjectiveVector] = {}
        self.requested = 0
        self.pool = None
        if config.workers > 1:
            ctx = multiprocessing.get_context("fork" if os.name == "posix" else "spawn")
            self.pool = ProcessPoolExecutor(config.workers, mp_context=ctx, initializer=_worker_init,
                                            initargs=self.args)

    def __call__(self, individuals: list[Individual]) -> None:
        self.requested += len(individuals)
        todo = []
        for ind in individuals:
            k = ind.key
            if k not in self.memo and k not in todo:
                todo.append(k)
        if self.pool is not None and len(todo) > 1:
            results = list(self.pool.map(_worker_eval, todo))
        else:
            results = [evaluate_genotype(parse_genotype(k), *self.args) for k in todo]
        self.memo.update(zip(todo, results))
        for ind in individuals:
            ind.objectives = self.memo[ind.key]

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()
            self.pool = None


# --------------------------------------------------------------------------- selection


def assign_rank_and_crowding(population: list[Individual]) -> list[list[int]]:
    fronts = nondominated_sort(population)
    for r, front in enumerate(fronts):
        members = [population[i] for i in front]
        for ind, c in zip(members, crowding_distance(members)):
            ind.rank, ind.crowding = r, c
    return fronts


def _better(a: Individual, b: Individual) -> bool:
    return (a.rank, -a.crowding) < (b.rank, -b.crowding)


def tournament(population: list[Individual], rng) -> Individual:
    i, j = (int(v) for v in rng.integers(len(population), size=2))
    a, b = population[i], population[j]
    return b if _better(b, a) else a


def environmental_selection(candidates: list[Individual], size: int) -> list[Individual]:
    """Elitist truncation by front, then by crowding within the split front.

    Duplicate genotypes are kept only if too few distinct ones remain.
    """
    seen = set()
    unique, dups = [], []
    for ind in candidates:
        (dups if ind.key in seen else unique).append(ind)
        seen.add(ind.key)
    pool = unique if len(unique) >= size else unique + dups[: size - len(unique)]
    pool = [replace(ind) for ind in pool]
    fronts = assign_rank_and_crowding(pool)
    chosen: list[Individual] = []
    for front in fronts:
        members = [pool[i] for i in front]
        if len(chosen) + len(members) <= size:
            chosen.extend(members)
            continue
        order = sorted(range(len(members)), key=lambda k: (-members[k].crowding, front[k]))
        chosen.extend(members[k] for k in order[: size - len(chosen)])
        break
    # crowding is recomputed on the survivors so tournaments see the new population
    assign_rank_and_crowding(chosen)
    return chosen


def initial_population(config: DseConfig, rng) -> list[Individual]:
    genotypes = [exhaustive_genotype(), hm_like_genotype()]
    keys = {g.to_compact() for g in genotypes}
    while len(genotypes) < config.population_size:
        g = random_genotype(rng, config.init_always_prob)
        if g.to_compact() not in keys:
            keys.add(g.to_compact())
            genotypes.append(g)
    return [Individual(g) for g in genotypes]


# --------------------------------------------------------------------------- driver


@dataclass
class GenerationStats:
    generation: int
    archive_size: int
    evaluations: int
    requested: int
    front_size: int


def run_dse(
    config: DseConfig,
    sequences: list[Sequence],
    table: EnergyTable,
    codec_config: CodecConfig = DEFAULT_CONFIG,
    on_generation: Callable[[int, list[Individual], ParetoArchive], None] | None = None,
) -> ParetoArchive:
    """One NSGA-II run at ``config.qp``; returns the archive of explored
    nondominated individuals.

    ``on_generation`` is called after the initial population (generation 0)
    and after every generation with the population and the archive.
    ``archive.stats`` records generation count, distinct evaluations and
    requested evaluations (memo hits included).
    """
    if not sequences:
        raise ValueError("run_dse needs at least one training sequence")
    rng = np.random.default_rng(config.seed)
    evaluate = _Evaluator(config, sequences, table, codec_config)
    archive = ParetoArchive(config.archive_capacity)
    history: list[GenerationStats] = []
    try:
        population = initial_population(config, rng)
        evaluate(population)
        population = environmental_selection(population, config.population_size)
        archive.update(population)
        _record(history, 0, archive, evaluate, population)
        if on_generation:
            on_generation(0, population, archive)
        for gen in range(1, config.iterations + 1):
            offspring: list[Individual] = []
            while len(offspring) < config.population_size:
                p1, p2 = tournament(population, rng), tournament(population, rng)
                if rng.random() < config.crossover_prob:
                    g1, g2 = crossover(p1.genotype, p2.genotype, rng)
                else:
                    g1, g2 = p1.genotype, p2.genotype
                offspring.append(Individual(mutate(g1, rng, config)))
                offspring.append(Individual(mutate(g2, rng, config)))
            offspring = offspring[: config.population_size]
            evaluate(offspring)
            archive.update(offspring)
            population = environmental_selection(population + offspring, config.population_size)
            _record(history, gen, archive, evaluate, population)
            if on_generation:
                on_generation(gen, population, archive)
    finally:
        evaluate.close()
    archive.stats = {
        "qp": config.qp,
        "generations": config.iterations,
        "evaluations": len(evaluate.memo),
        "requested_evaluations": evaluate.requested,
        "history": history,
    }
    return archive


def _record(history, gen, archive, evaluate, population):
    history.append(GenerationStats(gen, len(archive), len(evaluate.memo), evaluate.requested,
                                   sum(1 for p in population if p.rank == 0)))
    log.info("generation %d: archive %d, distinct evaluations %d", gen, len(archive), len(evaluate.memo))


# --------------------------------------------------------------------------- combination


@dataclass
class CombinedSolution:
    """One genotype per QP."""

    picks: dict[int, Individual] = field(default_factory=dict)

    def genotype(self, qp: int) -> Genotype:
        return self.picks[qp].genotype

    @property
    def qps(self) -> tuple[int, ...]:
        return tuple(sorted(self.picks))

    def to_dict(self) -> dict:
        out = {"format": "modedse-combined/1", "qps": {}}
        for qp in self.qps:
            ind = self.picks[qp]
            entry = {"genotype": ind.genotype.to_dict()}
            if ind.objectives is not None:
                o = ind.objectives
                entry["objectives"] = {"rate_bits": o.rate, "psnr_db": o.psnr, "effort": o.effort, "energy": o.energy}
            out["qps"][str(qp)] = entry
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "CombinedSolution":
        picks = {}
        for qp, entry in d["qps"].items():
            g = Genotype.from_dict(entry["genotype"])
            require_valid(g)
            o = entry.get("objectives")
            obj = None if o is None else ObjectiveVector(o["rate_bits"], o["psnr_db"], o["effort"], o["energy"])
            picks[int(qp)] = Individual(g, obj)
        return cls(picks)

    @classmethod
    def uniform(cls, genotype: Genotype, qps=DEFAULT_QPS) -> "CombinedSolution":
        return cls({qp: Individual(genotype) for qp in qps})


def nearest_to_anchor(entries: list[Individual], weights) -> Individual:
    """Entry with the smallest weighted distance to the ideal point after
    per-objective min-max normalisation. Ties go to the lexicographically
    smallest objective vector, then the genotype text."""
    if not entries:
        raise EmptyArchive("cannot pick from an empty archive")
    w = np.asarray(weights, dtype=float)
    if w.shape != (4,) or (w < 0).any() or w.sum() == 0:
        raise ValueError("weights must be four non-negative numbers, not all zero")
    V = np.array([e.vector for e in entries], dtype=float)
    lo, hi = V.min(axis=0), V.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    N = (V - lo) / span
    dist = np.sqrt((w * N**2).sum(axis=1))
    best = min(range(len(entries)), key=lambda i: (dist[i], tuple(V[i]), entries[i].key))
    return entries[best]


def combine_across_qps(
    archives: Mapping[int, ParetoArchive],
    weights=(1.0, 0.0, 1.0, 0.0),
    qps=DEFAULT_QPS,
    picker: Callable[[list[Individual]], Individual] | None = None,
) -> CombinedSolution:
    """Pick one archive entry per QP (default: nearest to the weighted ideal point)."""
    missing = [qp for qp in qps if qp not in archives]
    if missing:
        raise KeyError(f"no archive for QP(s) {missing}")
    picks = {}
    for qp in qps:
        entries = list(archives[qp])
        if not entries:
            raise EmptyArchive(f"archive for QP {qp} is empty")
        picks[qp] = picker(entries) if picker else nearest_to_anchor(entries, weights)
    return CombinedSolution(picks)


# --------------------------------------------------------------------------- export


def rate_effort_ranks(entries: list[Individual]) -> list[int]:
    """Front index of each entry when only (rate, effort) are considered."""
    pts = [(e.objectives.rate, e.objectives.effort) for e in entries]
    ranks = [0] * len(entries)
    for r, front in enumerate(nondominated_sort(pts)):
        for i in front:
            ranks[i] = r
    return ranks


def archive_rows(archive, qp: int) -> list[dict]:
    entries = list(archive)
    ranks = rate_effort_ranks(entries)
    rows = []
    for e, r in zip(entries, ranks):
        o = e.objectives
        rows.append({"qp": qp, "genotype": e.key, "rate_bits": o.rate, "psnr_db": o.psnr,
                     "effort": o.effort, "energy": o.energy, "rank": r})
    rows.sort(key=lambda row: (row["rank"], row["rate_bits"], row["effort"], row["genotype"]))
    return rows


def archive_csv(archive, qp: int) -> str:
    """CSV text; floats use ``repr`` so values round-trip exactly."""
    buf = io.StringIO()
    buf.write(f"# schema: {ARCHIVE_SCHEMA}; rank = front index on (rate_bits, effort)\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ARCHIVE_COLUMNS)
    for row in archive_rows(archive, qp):
        w.writerow([row["qp"], row["genotype"], repr(row["rate_bits"]), repr(row["psnr_db"]),
                    repr(row["effort"]), repr(row["energy"]), row["rank"]])
    return buf.getvalue()


def write_archive_csv(archive, qp: int, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(archive_csv(archive, qp))


def read_archive_csv(path) -> tuple[int | None, ParetoArchive]:
    """Inverse of :func:`write_archive_csv` (rank is recomputed, not read)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != ARCHIVE_COLUMNS:
        raise ValueError(f"{path}: expected columns {ARCHIVE_COLUMNS}, got {reader.fieldnames}")
    archive = ParetoArchive()
    qp = None
    for row in reader:
        qp = int(row["qp"])
        obj = ObjectiveVector(float(row["rate_bits"]), float(row["psnr_db"]),
                              float(row["effort"]), float(row["energy"]))
        archive.add(Individual(parse_genotype(row["genotype"]), obj))
    return qp, archive


def hypervolume_reference(vectors, margin: float = 0.1) -> tuple[float, ...]:
    """A reference point beyond the worst value of each objective."""
    V = np.asarray(vectors, dtype=float)
    hi, lo = V.max(axis=0), V.min(axis=0)
    pad = np.maximum((hi - lo) * margin, np.maximum(np.abs(hi) * 1e-6, 1e-9))
    return tuple(float(v) for v in hi + pad)


def archive_hypervolume(archive, ref) -> float:
    return hypervolume([e.vector for e in archive], ref)
