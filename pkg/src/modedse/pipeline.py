"""Guarded mode decision and sequence encoding under a genotype.

Positions of ``O(d)`` are visited left to right. A position runs when its
guard is AlwaysTest or names the current best mode; after each run the best
mode is the minimum-J result so far (earlier position wins ties).
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .codec import (
    CTU_SIZE,
    DEFAULT_CONFIG,
    INTRA_CAPABLE,
    MODE_NAMES,
    CodecConfig,
    CuContext,
    FrameState,
    ModeResult,
    evaluate_mode,
    rd_lambda,
)
from .genotype import Genotype, InvalidGenotype, validate_genotype
from .media_io import Sequence, pad_to_ctu


class TraceStep(NamedTuple):
    position: int
    mode: int
    cost_j: float


class ModePipeline:
    """Mode decision engine for one genotype.

    The instance itself is stateless apart from the genotype; per-frame
    reconstruction state lives in the :class:`FrameState` carried by contexts.
    """

    def __init__(self, genotype: Genotype, config: CodecConfig = DEFAULT_CONFIG, validate: bool = True):
        if validate:
            problems = validate_genotype(genotype)
            if problems:
                raise InvalidGenotype("; ".join(problems))
        self.genotype = genotype
        self.config = config

    # -- context plumbing used by eval_split

    def context(self, frame: FrameState, x: int, y: int, depth: int, qp: int) -> CuContext:
        return CuContext(frame, x, y, depth, qp, frame.neighbor_motion(x, y), self.config)

    def sub_context(self, ctx: CuContext, x: int, y: int) -> CuContext:
        return self.context(ctx.frame, x, y, ctx.depth + 1, ctx.qp)

    def commit(self, ctx: CuContext, result: ModeResult) -> None:
        """Write ``result``'s reconstruction and motion into the frame state."""
        f = ctx.frame
        n = ctx.size
        f.recon[ctx.y : ctx.y + n, ctx.x : ctx.x + n] = result.reconstruction
        for pu in result.pus:
            sl = (slice(pu.y >> 2, (pu.y + pu.h) >> 2), slice(pu.x >> 2, (pu.x + pu.w) >> 2))
            if pu.mv is None:
                f.has_motion[sl] = False
            else:
                f.has_motion[sl] = True
                f.motion[sl] = pu.mv

    def save_region(self, ctx: CuContext):
        f = ctx.frame
        n = ctx.size
        sl = (slice(ctx.y >> 2, (ctx.y + n) >> 2), slice(ctx.x >> 2, (ctx.x + n) >> 2))
        return (
            f.recon[ctx.y : ctx.y + n, ctx.x : ctx.x + n].copy(),
            f.motion[sl].copy(),
            f.has_motion[sl].copy(),
        )

    def restore_region(self, ctx: CuContext, saved) -> None:
        f = ctx.frame
        n = ctx.size
        sl = (slice(ctx.y >> 2, (ctx.y + n) >> 2), slice(ctx.x >> 2, (ctx.x + n) >> 2))
        f.recon[ctx.y : ctx.y + n, ctx.x : ctx.x + n] = saved[0]
        f.motion[sl] = saved[1]
        f.has_motion[sl] = saved[2]

    # -- decision

    def decide_cu(self, ctx: CuContext, trace: list | None = None) -> ModeResult:
        """Best mode for ``ctx`` under the guard rule.

        The returned result carries the winning mode's rate/distortion and the
        effort of *all* evaluations plus one guard-check cost per consulted
        guard. In intra-only frames the positions holding modes 0, 9 and 10
        are kept and the first two of them are always tested.
        """
        genes = self.genotype[ctx.depth]
        order, guards = genes.order, genes.guards
        if ctx.frame.intra_only:
            positions = [i for i, m in enumerate(order) if m in INTRA_CAPABLE]
        else:
            positions = range(len(order))
        guard_cost = self.config.guard_check_effort
        best: ModeResult | None = None
        effort = 0.0
        for k, i in enumerate(positions):
            g = guards[i]
            if k >= 2 and g is not None:
                effort += guard_cost
                if best is None or g != best.mode:
                    continue
            result = evaluate_mode(order[i], ctx, self)
            effort += result.effort
            if trace is not None:
                trace.append(TraceStep(i, order[i], result.rd.cost_j))
            if best is None or result.rd.cost_j < best.rd.cost_j:
                best = result
        return replace(best, effort=effort)


def decide_cu(ctx: CuContext, genotype: Genotype, trace: list | None = None) -> ModeResult:
    return ModePipeline(genotype, ctx.config).decide_cu(ctx, trace)


@dataclass
class CtuRecord:
    frame: int
    x: int
    y: int
    rate: float
    distortion: int
    cost_j: float
    effort: float
    modes: dict
    probe_costs: tuple = ()


@dataclass
class EncodeReport:
    sequence: str
    qp: int
    genotype: str
    frames: int
    width: int
    height: int
    total_rate: float
    total_distortion: int
    num_samples: int
    effort: float
    frame_features: list[Counter]
    ctus: list[CtuRecord]
    wall_time: float = 0.0

    @property
    def features(self) -> Counter:
        total = Counter()
        for c in self.frame_features:
            total.update(c)
        return total

    @property
    def mode_counts(self) -> Counter:
        """Leaf-CU usage keyed by ``"d<depth>:<mode name>:<variant>"``."""
        total = Counter()
        for ctu in self.ctus:
            total.update(ctu.modes)
        return total

    @property
    def total_cost(self) -> float:
        return sum(c.cost_j for c in self.ctus)

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "qp": self.qp,
            "genotype": self.genotype,
            "frames": self.frames,
            "width": self.width,
            "height": self.height,
            "total_rate_bits": self.total_rate,
            "total_distortion_sse": self.total_distortion,
            "num_samples": self.num_samples,
            "effort": self.effort,
            "features": dict(sorted(self.features.items())),
            "frame_features": [dict(sorted(c.items())) for c in self.frame_features],
            "mode_counts": dict(sorted(self.mode_counts.items())),
            "ctus": [
                {
                    "frame": c.frame, "x": c.x, "y": c.y, "rate": c.rate, "distortion": c.distortion,
                    "cost_j": c.cost_j, "effort": c.effort, "modes": dict(sorted(c.modes.items())),
                }
                for c in self.ctus
            ],
            "wall_time_s": self.wall_time,
        }


def _leaf_counts(result: ModeResult) -> dict:
    c = Counter(f"d{d}:{MODE_NAMES[m]}:{v}" for _, _, d, m, v in result.leaves)
    return dict(c)


def encode_sequence(
    seq: Sequence,
    genotype: Genotype,
    qp: int,
    config: CodecConfig = DEFAULT_CONFIG,
    probes: list[Genotype] | None = None,
) -> EncodeReport:
    """Encode ``seq`` low-delay style: frame 0 intra-only, then P-frames
    predicted from the previous reconstruction.

    Each genotype in ``probes`` is additionally run on every CTU against the
    identical coding state, before the real decision is committed; the probe
    costs J land in ``CtuRecord.probe_costs``.
    """
    rd_lambda(qp)
    pipeline = ModePipeline(genotype, config)
    probe_pipelines = [ModePipeline(p, config) for p in probes or ()]
    start = time.perf_counter()
    reference = None
    total_rate = 0.0
    total_dist = 0
    effort = 0.0
    frame_features = []
    ctus = []
    for t, frame in enumerate(seq.frames):
        state = FrameState(pad_to_ctu(frame.luma), reference, frame.width, frame.height, config.search_range)
        feats = Counter()
        for y in range(0, state.height, CTU_SIZE):
            for x in range(0, state.width, CTU_SIZE):
                ctx = pipeline.context(state, x, y, 0, qp)
                probe_costs = tuple(p.decide_cu(ctx).rd.cost_j for p in probe_pipelines)
                result = pipeline.decide_cu(ctx)
                pipeline.commit(ctx, result)
                total_rate += result.rd.rate
                total_dist += result.rd.distortion
                effort += result.effort
                feats.update(result.features)
                ctus.append(CtuRecord(t, x, y, result.rd.rate, result.rd.distortion, result.rd.cost_j,
                                      result.effort, _leaf_counts(result), probe_costs))
        frame_features.append(feats)
        reference = state.recon.copy()
    return EncodeReport(
        sequence=seq.name,
        qp=qp,
        genotype=genotype.to_compact(),
        frames=len(seq),
        width=seq.width,
        height=seq.height,
        total_rate=total_rate,
        total_distortion=total_dist,
        num_samples=len(seq) * seq.width * seq.height,
        effort=effort,
        frame_features=frame_features,
        ctus=ctus,
        wall_time=time.perf_counter() - start,
    )
