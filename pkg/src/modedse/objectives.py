"""The four DSE objectives: rate, PSNR, encoding effort and decoding energy.

Decoding energy follows the feature model ``E = sum_f n_f * e_f`` where
``n_f`` counts occurrences of a bitstream feature and ``e_f`` is its specific
energy (nJ by convention).
"""

from __future__ import annotations

import logging
import math
import os
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Mapping

from .codec import feature_ids
from .pipeline import EncodeReport

log = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0
# energies are held as multiples of 2**-10 nJ: integer counts times dyadic
# energies then sum exactly in binary floating point, so the estimate is
# exactly linear
ENERGY_RESOLUTION = 2.0**-10


class UnknownFeature(KeyError):
    pass


FeatureCounts = Counter


class EnergyTable:
    """Immutable map feature id -> specific energy, rounded to ENERGY_RESOLUTION."""

    def __init__(self, energies: Mapping[str, float]):
        self._e = {}
        for k, v in energies.items():
            v = float(v)
            if not v >= 0 or math.isinf(v) or v > 2.0**32:
                raise ValueError(f"energy for {k!r} must be finite, non-negative and < 2**32, got {v}")
            self._e[k] = round(v / ENERGY_RESOLUTION) * ENERGY_RESOLUTION

    def __getitem__(self, feature: str) -> float:
        try:
            return self._e[feature]
        except KeyError:
            raise UnknownFeature(feature) from None

    def __contains__(self, feature) -> bool:
        return feature in self._e

    def __len__(self):
        return len(self._e)

    def items(self):
        return self._e.items()

    def missing(self, features) -> list[str]:
        return sorted(f for f in features if f not in self._e)

    @classmethod
    def parse(cls, text: str, source: str = "<string>") -> "EnergyTable":
        """Parse ``feature_id <tab> energy`` lines; ``#`` starts a comment.

        Ids the codec never emits are kept but logged as warnings.
        """
        energies = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{source}:{lineno}: expected 'feature_id<TAB>energy', got {raw!r}")
            try:
                energies[parts[0]] = float(parts[1])
            except ValueError:
                raise ValueError(f"{source}:{lineno}: energy {parts[1]!r} is not a number") from None
        known = set(feature_ids())
        for f in sorted(set(energies) - known):
            log.warning("%s: feature %r is not produced by the codec", source, f)
        return cls(energies)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "EnergyTable":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read(), str(path))

    def dumps(self) -> str:
        return "".join(f"{k}\t{v!r}\n" for k, v in sorted(self._e.items()))


def default_energy_table() -> EnergyTable:
    """Synthetic, ordering-faithful table shipped with the package."""
    text = resources.files("modedse").joinpath("data/energy_default.tsv").read_text(encoding="utf-8")
    return EnergyTable.parse(text, "energy_default.tsv")


def estimate_energy(counts: Mapping[str, int], table: EnergyTable) -> float:
    # sorted iteration keeps the float sum independent of insertion order
    total = 0.0
    for f in sorted(counts):
        n = counts[f]
        if n:
            total += n * table[f]
    return total


def extract_features(report: EncodeReport) -> Counter:
    """Sequence-level feature counts: the sum of the per-frame counts."""
    total = Counter()
    for frame in report.frame_features:
        total.update(frame)
    return total


def psnr(total_sse: int, num_samples: int) -> float:
    if num_samples <= 0:
        raise ValueError("num_samples must be positive")
    if total_sse == 0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(255.0**2 * num_samples / total_sse))


@dataclass(frozen=True)
class ObjectiveVector:
    rate: float
    psnr: float
    effort: float
    energy: float

    def minimized(self) -> tuple[float, float, float, float]:
        """Orientation used by the optimiser: every entry is minimised."""
        return (self.rate, -self.psnr, self.effort, self.energy)

    @staticmethod
    def mean(vectors) -> "ObjectiveVector":
        vectors = list(vectors)
        n = len(vectors)
        return ObjectiveVector(
            sum(v.rate for v in vectors) / n,
            sum(v.psnr for v in vectors) / n,
            sum(v.effort for v in vectors) / n,
            sum(v.energy for v in vectors) / n,
        )


def collect_objectives(report: EncodeReport, table: EnergyTable) -> ObjectiveVector:
    return ObjectiveVector(
        rate=float(report.total_rate),
        psnr=psnr(report.total_distortion, report.num_samples),
        effort=float(report.effort),
        energy=estimate_energy(extract_features(report), table),
    )
