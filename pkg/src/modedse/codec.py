"""Simplified quadtree block encoder with the eleven mode evaluators.

Every evaluator takes a :class:`CuContext` and returns a :class:`ModeResult`
holding rate, distortion, the block reconstruction, bitstream feature counts
and an operation-count effort. Evaluators are pure; results of the leaf
evaluators are memoised on the exact inputs they read.

Conventions
-----------
* Motion vectors are full-pel ``(dx, dy)``; the prediction of a block at
  ``(x, y)`` is the reference block at ``(x + dx, y + dy)``. References are
  edge-padded so every vector in the search window is addressable.
* No transform: the spatial residual is quantised directly and its rate is an
  order-0 entropy estimate.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter, OrderedDict
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

INTRA_2NX2N = 0
INTER_2NX2N = 1
MERGE_2NX2N = 2
INTER_NX2N = 3
INTER_2NXN = 4
INTER_2NXNU = 5
INTER_2NXND = 6
INTER_NLX2N = 7
INTER_NRX2N = 8
INTRA_NXN = 9
SPLIT = 10

MODE_NAMES = (
    "Intra2Nx2N",
    "Inter2Nx2N",
    "Merge2Nx2N",
    "InterNx2N",
    "Inter2NxN",
    "Inter2NxnU",
    "Inter2NxnD",
    "InternLx2N",
    "InternRx2N",
    "IntraNxN",
    "Split",
)
MAX_DEPTH = 3
CTU_SIZE = 64

_SHALLOW_MODES = (0, 1, 2, 3, 4, 5, 6, 7, 8, 10)
_DEEPEST_MODES = (0, 1, 2, 3, 4, 9)
INTRA_CAPABLE = frozenset({INTRA_2NX2N, INTRA_NXN, SPLIT})

PARTITION_OF_MODE = {
    INTER_NX2N: "Nx2N",
    INTER_2NXN: "2NxN",
    INTER_2NXNU: "2NxnU",
    INTER_2NXND: "2NxnD",
    INTER_NLX2N: "nLx2N",
    INTER_NRX2N: "nRx2N",
}
ASYMMETRIC = frozenset({"2NxnU", "2NxnD", "nLx2N", "nRx2N"})


class InvalidDepthForMode(ValueError):
    pass


class InvalidDepthForPartition(InvalidDepthForMode):
    pass


class OutOfRangeQp(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


def valid_modes(depth: int) -> tuple[int, ...]:
    """Mode ids allowed at ``depth``."""
    if depth in (0, 1, 2):
        return _SHALLOW_MODES
    if depth == MAX_DEPTH:
        return _DEEPEST_MODES
    raise InvalidDepthForMode(f"depth {depth} outside 0..{MAX_DEPTH}")


def is_valid_mode(mode: int, depth: int) -> bool:
    return depth in (0, 1, 2, 3) and mode in valid_modes(depth)


def check_qp(qp: int) -> None:
    if not 0 <= qp <= 51:
        raise OutOfRangeQp(f"qp {qp} outside 0..51")


def rd_lambda(qp: int) -> float:
    """Lagrange multiplier 0.85 * 2**((qp - 12) / 3)."""
    check_qp(qp)
    return 0.85 * 2.0 ** ((qp - 12) / 3.0)


def quant_step(qp: int) -> float:
    return 2.0 ** ((qp - 4) / 6.0)


def se_golomb_bits(v):
    """Length of the signed exp-Golomb code of ``v`` (scalar or array)."""
    if isinstance(v, (int, np.integer)):
        k = 2 * int(v) - 1 if v > 0 else -2 * int(v)
        return 2 * (k + 1).bit_length() - 1
    v = np.asarray(v, dtype=np.int64)
    k = np.where(v > 0, 2 * v - 1, -2 * v)
    return 2 * np.floor(np.log2(k + 1)).astype(np.int64) + 1


@dataclass(frozen=True)
class CodecConfig:
    """Codec constants. Header costs are in bits, effort in sample operations."""

    search_range: int = 8
    skip_bits: float = 2.0
    merge_bits: float = 4.0
    inter_bits: float = 8.0
    intra_bits: float = 4.0
    split_flag_bits: float = 1.0
    partition_bits: float = 2.0
    residual_overhead_bits: float = 1.0
    deadzone: float = 1.0 / 3.0
    intra_predictors: tuple[str, ...] = ("dc", "planar")
    guard_check_effort: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "intra_predictors", tuple(self.intra_predictors))
        if self.search_range < 0:
            raise ValueError("search_range must be >= 0")
        bad = set(self.intra_predictors) - {"dc", "planar"}
        if bad or not self.intra_predictors:
            raise ValueError(f"unsupported intra predictors {sorted(bad)}")

    @cached_property
    def key(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["intra_predictors"] = list(self.intra_predictors)
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "CodecConfig":
        d = dict(d or {})
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown codec config keys: {sorted(unknown)}")
        return cls(**d)


DEFAULT_CONFIG = CodecConfig()


@dataclass(frozen=True)
class RdCost:
    rate: float
    distortion: int
    cost_j: float

    @classmethod
    def of(cls, rate: float, distortion: int, lam: float) -> "RdCost":
        return cls(float(rate), int(distortion), distortion + lam * rate)


@dataclass(frozen=True)
class PuInfo:
    """Placement and motion of one decoded prediction unit (``mv`` None for intra)."""

    x: int
    y: int
    w: int
    h: int
    mv: tuple[int, int] | None


@dataclass(frozen=True, eq=False)
class ModeResult:
    mode: int
    rd: RdCost
    reconstruction: np.ndarray
    features: Counter
    effort: float
    pus: tuple[PuInfo, ...] = ()
    # (x, y, depth, mode, variant) of each leaf CU inside this result
    leaves: tuple[tuple, ...] = ()


class FrameState:
    """Mutable per-frame coding state owned by one pipeline.

    ``current`` and ``reference`` are CTU-padded luma planes; ``recon`` is
    filled CU by CU. ``motion``/``has_motion`` store decoded vectors on a 4x4
    grid for merge candidates and vector prediction.
    """

    def __init__(self, current: np.ndarray, reference: np.ndarray | None, valid_w: int, valid_h: int,
                 search_range: int = 8):
        self.current = np.ascontiguousarray(current, dtype=np.uint8)
        self.height, self.width = self.current.shape
        if self.width % CTU_SIZE or self.height % CTU_SIZE:
            raise DimensionMismatch("frame state expects CTU-padded planes")
        self.valid_w = valid_w
        self.valid_h = valid_h
        self.intra_only = reference is None
        self.recon = np.zeros_like(self.current)
        self.motion = np.zeros((self.height // 4, self.width // 4, 2), dtype=np.int16)
        self.has_motion = np.zeros((self.height // 4, self.width // 4), dtype=bool)
        self.pad = search_range
        self.cur_key = hashlib.blake2b(
            self.current.tobytes() + f"{valid_w}x{valid_h}".encode(), digest_size=16
        ).digest()
        if reference is None:
            self.reference = None
            self.ref_pad = None
            self.ref_key = b""
        else:
            reference = np.ascontiguousarray(reference, dtype=np.uint8)
            if reference.shape != self.current.shape:
                raise DimensionMismatch("reference and current frame shapes differ")
            self.reference = reference
            self.ref_pad = np.pad(reference, search_range, mode="edge").astype(np.int32)
            self.ref_key = hashlib.blake2b(
                reference.tobytes() + f"pad{search_range}".encode(), digest_size=16
            ).digest()
        self._cur32 = self.current.astype(np.int32)

    def valid_extent(self, x: int, y: int, w: int, h: int) -> tuple[int, int]:
        """Rows/cols of the block at (x, y) that lie inside the unpadded frame."""
        return max(0, min(h, self.valid_h - y)), max(0, min(w, self.valid_w - x))

    def neighbor_motion(self, x: int, y: int) -> tuple[tuple[int, int], ...]:
        cands = []
        if x > 0 and self.has_motion[y >> 2, (x - 1) >> 2]:
            cands.append(tuple(int(v) for v in self.motion[y >> 2, (x - 1) >> 2]))
        if y > 0 and self.has_motion[(y - 1) >> 2, x >> 2]:
            top = tuple(int(v) for v in self.motion[(y - 1) >> 2, x >> 2])
            if top not in cands:
                cands.append(top)
        return tuple(cands)


@dataclass(frozen=True, eq=False)
class CuContext:
    frame: FrameState
    x: int
    y: int
    depth: int
    qp: int
    neighbor_motion: tuple[tuple[int, int], ...] = ()
    config: CodecConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if not 0 <= self.depth <= MAX_DEPTH:
            raise InvalidDepthForMode(f"depth {self.depth} outside 0..{MAX_DEPTH}")
        check_qp(self.qp)
        s = self.size
        if self.x % s or self.y % s or self.x + s > self.frame.width or self.y + s > self.frame.height:
            raise ValueError(f"CU ({self.x},{self.y}) size {s} not aligned inside the frame")
        if len(self.neighbor_motion) > 2:
            raise ValueError("at most two neighbour motion candidates")
        r = self.frame.pad
        for mv in self.neighbor_motion:
            if abs(mv[0]) > r or abs(mv[1]) > r:
                raise ValueError(f"candidate {mv} outside the search range {r}")

    @property
    def size(self) -> int:
        return CTU_SIZE >> self.depth

    @property
    def lam(self) -> float:
        return rd_lambda(self.qp)

    def original(self, x: int | None = None, y: int | None = None, w: int | None = None, h: int | None = None):
        x = self.x if x is None else x
        y = self.y if y is None else y
        w = self.size if w is None else w
        h = self.size if h is None else h
        return self.frame._cur32[y : y + h, x : x + w]


class ResidualResult(NamedTuple):
    rate: float
    reconstruction: np.ndarray
    distortion: int
    nonzero: int


def _order0_bits(levels: np.ndarray) -> float:
    flat = levels.ravel()
    lo = int(flat.min())
    counts = np.bincount(flat - lo)
    present = np.flatnonzero(counts)
    c = counts[present]
    bits = float(-(c * np.log2(c / flat.size)).sum())
    # alphabet side information: every nonzero level value present is signalled once
    values = present + lo
    values = values[values != 0]
    return bits + float(se_golomb_bits(values).sum())


def code_residual(
    original: np.ndarray,
    prediction: np.ndarray,
    qp: int,
    *,
    valid: tuple[int, int] | None = None,
    deadzone: float = 1.0 / 3.0,
    overhead_bits: float = 1.0,
) -> ResidualResult:
    """Dead-zone quantise the spatial residual and estimate its rate.

    Returns ``(rate, reconstruction, distortion, nonzero)``; the distortion is
    the SSE over the ``valid`` (rows, cols) top-left region, the whole block by
    default.
    """
    original = np.asarray(original)
    prediction = np.asarray(prediction)
    if original.shape != prediction.shape:
        raise DimensionMismatch(f"{original.shape} vs {prediction.shape}")
    check_qp(qp)
    step = quant_step(qp)
    prediction = prediction.astype(np.int32, copy=False)
    resid = original.astype(np.int32, copy=False) - prediction
    mags = np.floor(np.abs(resid) * (1.0 / step) + deadzone)
    nonzero = int(np.count_nonzero(mags))
    if nonzero:
        levels = np.copysign(mags, resid).astype(np.int32)
        recon = np.clip(prediction + np.rint(levels * step).astype(np.int32), 0, 255)
        rate = overhead_bits + _order0_bits(levels)
    else:
        recon = prediction
        rate = overhead_bits
    vh, vw = valid if valid is not None else original.shape
    diff = original[:vh, :vw].astype(np.int64) - recon[:vh, :vw]
    return ResidualResult(rate, recon, int(np.vdot(diff, diff)), nonzero)


def sse(a: np.ndarray, b: np.ndarray, valid: tuple[int, int] | None = None) -> int:
    vh, vw = valid if valid is not None else a.shape
    d = a[:vh, :vw].astype(np.int64) - b[:vh, :vw]
    return int(np.vdot(d, d))


# --------------------------------------------------------------------------- memo

_CACHE: OrderedDict = OrderedDict()
_CACHE_MAX = 60_000
_cache_stats = {"hits": 0, "misses": 0}


def clear_cache() -> None:
    _CACHE.clear()
    _cache_stats["hits"] = _cache_stats["misses"] = 0


def cache_stats() -> dict:
    return dict(_cache_stats, size=len(_CACHE))


def _memo(key, compute):
    hit = _CACHE.get(key)
    if hit is not None:
        _CACHE.move_to_end(key)
        _cache_stats["hits"] += 1
        return hit
    _cache_stats["misses"] += 1
    value = compute()
    _CACHE[key] = value
    if len(_CACHE) > _CACHE_MAX:
        _CACHE.popitem(last=False)
    return value


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------- intra


def _intra_neighbors(recon: np.ndarray, x: int, y: int, n: int):
    top = recon[y - 1, x : x + n].astype(np.int32) if y > 0 else None
    left = recon[y : y + n, x - 1].astype(np.int32) if x > 0 else None
    return top, left


def _substitute(top, left, n):
    if top is None and left is None:
        mid = np.full(n, 128, dtype=np.int32)
        return mid, mid
    if top is None:
        top = np.full(n, left[0], dtype=np.int32)
    if left is None:
        left = np.full(n, top[0], dtype=np.int32)
    return top, left


def predict_dc(top, left, n: int) -> np.ndarray:
    parts = [p for p in (top, left) if p is not None]
    if not parts:
        return np.full((n, n), 128, dtype=np.int32)
    s = int(sum(int(p.sum()) for p in parts))
    cnt = sum(p.size for p in parts)
    return np.full((n, n), (s + cnt // 2) // cnt, dtype=np.int32)


def predict_planar(top, left, n: int) -> np.ndarray:
    top, left = _substitute(top, left, n)
    tr = int(top[n - 1])
    bl = int(left[n - 1])
    xs = np.arange(n)
    ys = xs[:, None]
    shift = int(math.log2(n)) + 1
    val = (n - 1 - xs) * left[:, None] + (xs + 1) * tr + (n - 1 - ys) * top[None, :] + (ys + 1) * bl + n
    return (val >> shift).astype(np.int32)


_PREDICTORS = {"dc": predict_dc, "planar": predict_planar}


def _intra_block(original, top, left, n, qp, lam, valid, config, header_bits):
    """Best predictor for one square intra block: (rd, recon, nonzero, effort)."""
    best = None
    effort = 0.0
    for name in config.intra_predictors:
        pred = _PREDICTORS[name](top, left, n)
        res = code_residual(original, pred, qp, valid=valid, deadzone=config.deadzone,
                            overhead_bits=config.residual_overhead_bits)
        effort += 2 * n * n
        rd = RdCost.of(header_bits + res.rate, res.distortion, lam)
        if best is None or rd.cost_j < best[0].cost_j:
            best = (rd, res.reconstruction, res.nonzero)
    return best + (effort,)


def _leaf_features(kind: str, rate: float, nonzero: int) -> Counter:
    c = Counter({kind: 1, "bits": int(round(rate))})
    if nonzero:
        c["coeff"] = nonzero
    return c


def eval_intra_2nx2n(ctx: CuContext) -> ModeResult:
    """DC and planar prediction from reconstructed neighbours; the cheaper wins."""
    n = ctx.size
    top, left = _intra_neighbors(ctx.frame.recon, ctx.x, ctx.y, n)
    key = (INTRA_2NX2N, ctx.qp, ctx.x, ctx.y, n, ctx.frame.cur_key, ctx.config.key,
           None if top is None else top.tobytes(), None if left is None else left.tobytes())

    def compute():
        valid = ctx.frame.valid_extent(ctx.x, ctx.y, n, n)
        rd, recon, nz, effort = _intra_block(ctx.original(), top, left, n, ctx.qp, ctx.lam, valid,
                                             ctx.config, ctx.config.intra_bits)
        return ModeResult(
            INTRA_2NX2N, rd, _frozen(recon), _leaf_features(f"intra_pred_{n}", rd.rate, nz), effort,
            (PuInfo(ctx.x, ctx.y, n, n, None),), ((ctx.x, ctx.y, ctx.depth, INTRA_2NX2N, "intra"),),
        )

    return _memo(key, compute)


def eval_intra_nxn(ctx: CuContext) -> ModeResult:
    """Four 4x4 intra PUs of an 8x8 CU, reconstructed in z-order."""
    if ctx.depth != MAX_DEPTH:
        raise InvalidDepthForMode(f"IntraNxN is only valid at depth {MAX_DEPTH}, got {ctx.depth}")
    n = ctx.size
    top, left = _intra_neighbors(ctx.frame.recon, ctx.x, ctx.y, n)
    key = (INTRA_NXN, ctx.qp, ctx.x, ctx.y, ctx.frame.cur_key, ctx.config.key,
           None if top is None else top.tobytes(), None if left is None else left.tobytes())

    def compute():
        half = n // 2
        recon = np.zeros((n, n), dtype=np.int32)
        original = ctx.original()
        rate = 0.0
        dist = 0
        nonzero = 0
        effort = 0.0
        features = Counter()
        for oy, ox in ((0, 0), (0, half), (half, 0), (half, half)):
            pu_top = (recon[oy - 1, ox : ox + half] if oy > 0
                      else None if top is None else top[ox : ox + half])
            pu_left = (recon[oy : oy + half, ox - 1] if ox > 0
                       else None if left is None else left[oy : oy + half])
            valid = ctx.frame.valid_extent(ctx.x + ox, ctx.y + oy, half, half)
            rd, pu_recon, nz, eff = _intra_block(
                original[oy : oy + half, ox : ox + half], pu_top, pu_left, half, ctx.qp, ctx.lam, valid,
                ctx.config, ctx.config.intra_bits,
            )
            recon[oy : oy + half, ox : ox + half] = pu_recon
            rate += rd.rate
            dist += rd.distortion
            nonzero += nz
            effort += eff
            features[f"intra_pred_{half}"] += 1
        features["bits"] = int(round(rate))
        if nonzero:
            features["coeff"] = nonzero
        return ModeResult(
            INTRA_NXN, RdCost.of(rate, dist, ctx.lam), _frozen(recon), features, effort,
            (PuInfo(ctx.x, ctx.y, n, n, None),), ((ctx.x, ctx.y, ctx.depth, INTRA_NXN, "intra"),),
        )

    return _memo(key, compute)


# --------------------------------------------------------------------------- inter


def _require_reference(ctx: CuContext):
    if ctx.frame.ref_pad is None:
        raise ValueError("inter evaluation needs a reference frame")


def _mc_block(ctx: CuContext, x: int, y: int, w: int, h: int, mv) -> np.ndarray:
    p = ctx.frame.pad
    return ctx.frame.ref_pad[y + p + mv[1] : y + p + mv[1] + h, x + p + mv[0] : x + p + mv[0] + w]


_SEARCH_ORDER: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _search_order(r: int):
    """Window positions sorted by (|dx|+|dy|, dy, dx) for tie breaking."""
    if r not in _SEARCH_ORDER:
        pos = [(abs(dx) + abs(dy), dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
        pos.sort()
        dys = np.array([p[1] for p in pos])
        dxs = np.array([p[2] for p in pos])
        _SEARCH_ORDER[r] = (dxs, dys, (dys + r) * (2 * r + 1) + (dxs + r))
    return _SEARCH_ORDER[r]


def sse_surface(ctx: CuContext, x: int, y: int, w: int, h: int) -> np.ndarray:
    """SSE of the block at (x, y) against every window position, indexed [dy+r, dx+r]."""
    r = ctx.frame.pad
    key = ("sse", ctx.frame.cur_key, ctx.frame.ref_key, x, y, w, h)

    def compute():
        region = ctx.frame.ref_pad[y : y + h + 2 * r, x : x + w + 2 * r]
        windows = sliding_window_view(region, (h, w))
        diff = windows - ctx.original(x, y, w, h)
        return _frozen(np.einsum("ijkl,ijkl->ij", diff, diff, dtype=np.int64))

    return _memo(key, compute)


def motion_search(ctx: CuContext, x: int, y: int, w: int, h: int, mvp: tuple[int, int]):
    """Exhaustive full-pel search minimising SSE + lambda * (header + MVD bits).

    Returns ``(mv, cost, positions)``. Ties go to the smallest |dx|+|dy|,
    then raster order.
    """
    r = ctx.frame.pad
    surface = sse_surface(ctx, x, y, w, h)
    span = np.arange(-r, r + 1)
    bits_x = se_golomb_bits(span - mvp[0])
    bits_y = se_golomb_bits(span - mvp[1])
    cost = surface + ctx.lam * (ctx.config.inter_bits + bits_y[:, None] + bits_x[None, :])
    dxs, dys, flat_idx = _search_order(r)
    k = int(np.argmin(cost.ravel()[flat_idx]))
    return (int(dxs[k]), int(dys[k])), float(cost.ravel()[flat_idx[k]]), (2 * r + 1) ** 2


def merge_candidates(ctx: CuContext) -> tuple[tuple[int, int], ...]:
    return ctx.neighbor_motion if ctx.neighbor_motion else ((0, 0),)


def merge_index_bits(index: int, count: int) -> float:
    """Truncated unary length of the candidate index."""
    return float(min(index + 1, count - 1))


def _code_pu(ctx, x, y, w, h, mv, header_bits):
    original = ctx.original(x, y, w, h)
    pred = _mc_block(ctx, x, y, w, h, mv)
    valid = ctx.frame.valid_extent(x, y, w, h)
    res = code_residual(original, pred, ctx.qp, valid=valid, deadzone=ctx.config.deadzone,
                        overhead_bits=ctx.config.residual_overhead_bits)
    rd = RdCost.of(header_bits + res.rate, res.distortion, ctx.lam)
    return rd, res.reconstruction, res.nonzero


def _inter_pu(ctx: CuContext, x: int, y: int, w: int, h: int, allow_merge: bool):
    """Best of merge candidates and motion search for one PU.

    Returns (rd, recon, nonzero, mv, variant, effort).
    """
    cfg = ctx.config
    best = None
    effort = 0.0
    if allow_merge:
        cands = merge_candidates(ctx)
        for i, mv in enumerate(cands):
            hdr = cfg.merge_bits + merge_index_bits(i, len(cands))
            rd, recon, nz = _code_pu(ctx, x, y, w, h, mv, hdr)
            effort += 2 * w * h
            if best is None or rd.cost_j < best[0].cost_j:
                best = (rd, recon, nz, mv, "merge")
    mvp = ctx.neighbor_motion[0] if ctx.neighbor_motion else (0, 0)
    mv, _, positions = motion_search(ctx, x, y, w, h, mvp)
    mvd_bits = se_golomb_bits(mv[0] - mvp[0]) + se_golomb_bits(mv[1] - mvp[1])
    rd, recon, nz = _code_pu(ctx, x, y, w, h, mv, cfg.inter_bits + mvd_bits)
    effort += positions * w * h + 2 * w * h
    if best is None or rd.cost_j < best[0].cost_j:
        best = (rd, recon, nz, mv, "inter")
    return best + (effort,)


def _inter_key(mode, ctx):
    return (mode, ctx.qp, ctx.x, ctx.y, ctx.size, ctx.frame.cur_key, ctx.frame.ref_key,
            ctx.neighbor_motion, ctx.config.key)


def eval_inter_2nx2n(ctx: CuContext) -> ModeResult:
    """Motion search over the +-search_range window, MVD against the first candidate."""
    _require_reference(ctx)
    n = ctx.size

    def compute():
        rd, recon, nz, mv, variant, effort = _inter_pu(ctx, ctx.x, ctx.y, n, n, allow_merge=False)
        return ModeResult(
            INTER_2NX2N, rd, _frozen(recon), _leaf_features(f"mc_int_{n}x{n}", rd.rate, nz), effort,
            (PuInfo(ctx.x, ctx.y, n, n, mv),), ((ctx.x, ctx.y, ctx.depth, INTER_2NX2N, variant),),
        )

    return _memo(_inter_key(INTER_2NX2N, ctx), compute)


def eval_merge_2nx2n(ctx: CuContext) -> ModeResult:
    """Merge (residual, no MVD) and skip (no residual, no MVD) for every candidate."""
    _require_reference(ctx)
    n = ctx.size

    def compute():
        cfg = ctx.config
        cands = merge_candidates(ctx)
        original = ctx.original()
        valid = ctx.frame.valid_extent(ctx.x, ctx.y, n, n)
        best = None
        effort = 0.0
        for i, mv in enumerate(cands):
            idx_bits = merge_index_bits(i, len(cands))
            pred = _mc_block(ctx, ctx.x, ctx.y, n, n, mv)
            skip_rd = RdCost.of(cfg.skip_bits + idx_bits, sse(original, pred, valid), ctx.lam)
            res = code_residual(original, pred, ctx.qp, valid=valid, deadzone=cfg.deadzone,
                                overhead_bits=cfg.residual_overhead_bits)
            merge_rd = RdCost.of(cfg.merge_bits + idx_bits + res.rate, res.distortion, ctx.lam)
            effort += 2 * n * n
            for rd, recon, nz, variant in ((skip_rd, pred, 0, "skip"), (merge_rd, res.reconstruction, res.nonzero, "merge")):
                if best is None or rd.cost_j < best[0].cost_j:
                    best = (rd, recon, nz, mv, variant)
        rd, recon, nz, mv, variant = best
        kind = f"skip_{n}" if variant == "skip" else f"mc_int_{n}x{n}"
        return ModeResult(
            MERGE_2NX2N, rd, _frozen(np.array(recon, dtype=np.int32)), _leaf_features(kind, rd.rate, nz), effort,
            (PuInfo(ctx.x, ctx.y, n, n, mv),), ((ctx.x, ctx.y, ctx.depth, MERGE_2NX2N, variant),),
        )

    return _memo(_inter_key(MERGE_2NX2N, ctx), compute)


def partition_geometry(partition: str, size: int) -> tuple[tuple[int, int, int, int], ...]:
    """PU rectangles ``(ox, oy, w, h)`` relative to the CU origin."""
    n, h2, q = size, size // 2, size // 4
    table = {
        "Nx2N": ((0, 0, h2, n), (h2, 0, h2, n)),
        "2NxN": ((0, 0, n, h2), (0, h2, n, h2)),
        "2NxnU": ((0, 0, n, q), (0, q, n, n - q)),
        "2NxnD": ((0, 0, n, n - q), (0, n - q, n, q)),
        "nLx2N": ((0, 0, q, n), (q, 0, n - q, n)),
        "nRx2N": ((0, 0, n - q, n), (n - q, 0, q, n)),
    }
    if partition not in table:
        raise ValueError(f"unknown partition {partition!r}")
    return table[partition]


def eval_inter_partitioned(ctx: CuContext, partition: str) -> ModeResult:
    """Two-PU inter CU; each PU takes the better of merge and motion search."""
    if partition in ASYMMETRIC and ctx.depth >= MAX_DEPTH:
        raise InvalidDepthForPartition(f"{partition} is not available at depth {ctx.depth}")
    mode = {v: k for k, v in PARTITION_OF_MODE.items()}[partition]
    _require_reference(ctx)
    n = ctx.size

    def compute():
        recon = np.zeros((n, n), dtype=np.int32)
        rate = ctx.config.partition_bits
        dist = 0
        effort = 0.0
        features = Counter()
        pus = []
        variants = []
        for ox, oy, w, h in partition_geometry(partition, n):
            rd, pu_recon, nz, mv, variant, eff = _inter_pu(ctx, ctx.x + ox, ctx.y + oy, w, h, allow_merge=True)
            recon[oy : oy + h, ox : ox + w] = pu_recon
            rate += rd.rate
            dist += rd.distortion
            effort += eff
            features[f"mc_int_{w}x{h}"] += 1
            if nz:
                features["coeff"] += nz
            pus.append(PuInfo(ctx.x + ox, ctx.y + oy, w, h, mv))
            variants.append(variant)
        features["bits"] = int(round(rate))
        return ModeResult(
            mode, RdCost.of(rate, dist, ctx.lam), _frozen(recon), features, effort, tuple(pus),
            ((ctx.x, ctx.y, ctx.depth, mode, "+".join(variants)),),
        )

    return _memo(_inter_key(mode, ctx), compute)


# --------------------------------------------------------------------------- split


def eval_split(ctx: CuContext, pipeline) -> ModeResult:
    """Run the full mode decision on the four sub-CUs and aggregate.

    ``pipeline`` provides ``sub_context``, ``decide_cu``, ``commit``,
    ``save_region`` and ``restore_region``; the frame state is restored before
    returning so that the split stays a pure evaluation.
    """
    if ctx.depth >= MAX_DEPTH:
        raise InvalidDepthForMode(f"Split is not available at depth {ctx.depth}")
    n = ctx.size
    half = n // 2
    saved = pipeline.save_region(ctx)
    recon = np.zeros((n, n), dtype=np.int32)
    rate = ctx.config.split_flag_bits
    dist = 0
    effort = 0.0
    features = Counter({"split_flag": 1, "bits": int(round(ctx.config.split_flag_bits))})
    pus = []
    leaves = []
    try:
        for oy, ox in ((0, 0), (0, half), (half, 0), (half, half)):
            sub = pipeline.sub_context(ctx, ctx.x + ox, ctx.y + oy)
            res = pipeline.decide_cu(sub)
            pipeline.commit(sub, res)
            recon[oy : oy + half, ox : ox + half] = res.reconstruction
            rate += res.rd.rate
            dist += res.rd.distortion
            effort += res.effort
            features.update(res.features)
            pus.extend(res.pus)
            leaves.extend(res.leaves)
    finally:
        pipeline.restore_region(ctx, saved)
    return ModeResult(SPLIT, RdCost.of(rate, dist, ctx.lam), _frozen(recon), features, effort,
                      tuple(pus), tuple(leaves))


def evaluate_mode(mode: int, ctx: CuContext, pipeline=None) -> ModeResult:
    """Dispatch ``mode`` on ``ctx``, enforcing the depth-validity rule."""
    if not is_valid_mode(mode, ctx.depth):
        if mode in PARTITION_OF_MODE:
            raise InvalidDepthForPartition(f"{MODE_NAMES[mode]} is not available at depth {ctx.depth}")
        raise InvalidDepthForMode(f"mode {mode} is not available at depth {ctx.depth}")
    if mode == INTRA_2NX2N:
        return eval_intra_2nx2n(ctx)
    if mode == INTER_2NX2N:
        return eval_inter_2nx2n(ctx)
    if mode == MERGE_2NX2N:
        return eval_merge_2nx2n(ctx)
    if mode == INTRA_NXN:
        return eval_intra_nxn(ctx)
    if mode == SPLIT:
        if pipeline is None:
            raise ValueError("Split needs a pipeline")
        return eval_split(ctx, pipeline)
    return eval_inter_partitioned(ctx, PARTITION_OF_MODE[mode])


def feature_ids() -> list[str]:
    """Every feature id the codec can emit (closed world for energy tables)."""
    ids = {"bits", "coeff", "split_flag"}
    for depth in range(MAX_DEPTH + 1):
        n = CTU_SIZE >> depth
        ids.add(f"intra_pred_{n}")
        ids.add(f"skip_{n}")
        ids.add(f"mc_int_{n}x{n}")
        for part in PARTITION_OF_MODE.values():
            if part in ASYMMETRIC and depth == MAX_DEPTH:
                continue
            for _, _, w, h in partition_geometry(part, n):
                ids.add(f"mc_int_{w}x{h}")
    ids.add(f"intra_pred_{(CTU_SIZE >> MAX_DEPTH) // 2}")
    return sorted(ids)
