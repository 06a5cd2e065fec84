"""Bjontegaard-delta rate/energy and mean effort savings over four QPs.

Each curve is fitted with the cubic through its four (psnr, log10 value)
points; the difference of the two cubics is integrated in closed form over
the overlapping PSNR interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NoOverlap(ValueError):
    pass


class DegenerateFit(ValueError):
    pass


class ZeroReferenceEffort(ZeroDivisionError):
    pass


class NonMonotoneCurve(ValueError):
    pass


@dataclass(frozen=True)
class RdPoint:
    rate: float
    psnr: float
    energy: float = 1.0
    effort: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class RdCurve:
    """Four operating points ordered by increasing QP."""

    points: tuple[RdPoint, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) != 4:
            raise ValueError(f"an RD curve needs exactly 4 points, got {len(pts)}")
        for a, b in zip(pts, pts[1:]):
            if not (b.rate < a.rate and b.psnr < a.psnr):
                raise NonMonotoneCurve("rate and psnr must both fall strictly as QP rises")

    @classmethod
    def from_lists(cls, rates, psnrs, energies=None, efforts=None) -> "RdCurve":
        n = len(rates)
        energies = energies if energies is not None else [1.0] * n
        efforts = efforts if efforts is not None else [1.0] * n
        return cls(tuple(RdPoint(*v) for v in zip(rates, psnrs, energies, efforts)))

    def scaled(self, rate: float = 1.0, energy: float = 1.0, effort: float = 1.0) -> "RdCurve":
        return RdCurve(tuple(RdPoint(p.rate * rate, p.psnr, p.energy * energy, p.effort * effort)
                             for p in self.points))


def _fit(x: np.ndarray, y: np.ndarray, center: float, scale: float) -> np.ndarray:
    """Coefficients (ascending powers of the centred, scaled abscissa) of the
    cubic interpolating the four points."""
    if len(np.unique(x)) != len(x):
        raise DegenerateFit("repeated PSNR values make the cubic fit singular")
    t = (x - center) / scale
    V = np.vander(t, 4, increasing=True)
    try:
        return np.linalg.solve(V, y)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFit(str(exc)) from exc


def _integral(c: np.ndarray, lo: float, hi: float) -> float:
    # antiderivative of sum c_k t^k, evaluated in t
    k = np.arange(1, len(c) + 1)
    return float(np.sum(c / k * (hi**k - lo**k)))


def _bd(ref_x, ref_y, test_x, test_y) -> float:
    ref_x, test_x = np.asarray(ref_x, float), np.asarray(test_x, float)
    lo = max(ref_x.min(), test_x.min())
    hi = min(ref_x.max(), test_x.max())
    if not hi > lo:
        raise NoOverlap(f"PSNR ranges do not overlap ([{ref_x.min()}, {ref_x.max()}] vs "
                        f"[{test_x.min()}, {test_x.max()}])")
    center = 0.5 * (lo + hi)
    scale = 0.5 * (hi - lo)
    c_ref = _fit(ref_x, np.log10(ref_y), center, scale)
    c_test = _fit(test_x, np.log10(test_y), center, scale)
    # integral over psnr = scale * integral over t in [-1, 1]
    avg = (_integral(c_test, -1.0, 1.0) - _integral(c_ref, -1.0, 1.0)) / 2.0
    return (10.0**avg - 1.0) * 100.0


def bd_rate(reference: RdCurve, test: RdCurve) -> float:
    """Average rate difference in percent at equal PSNR (negative = savings)."""
    return _bd([p.psnr for p in reference.points], [p.rate for p in reference.points],
               [p.psnr for p in test.points], [p.rate for p in test.points])


def bd_energy(reference: RdCurve, test: RdCurve) -> float:
    """Average decoding-energy difference in percent at equal PSNR."""
    for p in reference.points + test.points:
        if not p.energy > 0:
            raise ValueError("energies must be positive for the log-domain fit")
    return _bd([p.psnr for p in reference.points], [p.energy for p in reference.points],
               [p.psnr for p in test.points], [p.energy for p in test.points])


def mean_effort_savings(reference: RdCurve, test: RdCurve) -> float:
    """Mean over the paired QPs of ``(1 - effort_test / effort_ref) * 100``."""
    out = []
    for r, t in zip(reference.points, test.points):
        if r.effort == 0:
            raise ZeroReferenceEffort("reference effort is zero at some QP")
        out.append((1.0 - t.effort / r.effort) * 100.0)
    return float(np.mean(out))
