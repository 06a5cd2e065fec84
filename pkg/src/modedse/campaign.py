"""Campaign configuration plus the train and validate workflows.

A campaign is one JSON file::

    {
      "output_dir": "runs/demo",
      "energy_table": null,
      "qps": [10, 20, 30, 40],
      "codec": {},
      "dse": {"population_size": 40, "iterations": 200, "seed": 1},
      "dse_per_qp": {"40": {"iterations": 100}},
      "anchors": {"balanced": [1, 0, 1, 0]},
      "training": [{"name": "blk", "synthetic": {"kind": "moving_block", "width": 128, "height": 64, "frames": 2}}],
      "validation": [{"name": "clip", "path": "clip.yuv", "width": 176, "height": 144, "frames": 4}]
    }

``MODEDSE_OUTPUT_DIR`` overrides ``output_dir``.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .codec import DEFAULT_CONFIG, CodecConfig
from .dse import (
    DEFAULT_QPS,
    CombinedSolution,
    DseConfig,
    combine_across_qps,
    read_archive_csv,
    run_dse,
    write_archive_csv,
)
from .genotype import Genotype, exhaustive_genotype
from .media_io import SYNTHETIC_KINDS, Sequence, load_raw_video, synthesize_sequence
from .metrics import RdCurve, bd_energy, bd_rate, mean_effort_savings
from .objectives import EnergyTable, ObjectiveVector, collect_objectives, default_energy_table
from .pipeline import encode_sequence

log = logging.getLogger(__name__)

OUTPUT_ENV = "MODEDSE_OUTPUT_DIR"
SCATTER_SCHEMA = "modedse-scatter/1"
REPORT_SCHEMA = "modedse-validation/1"
SCATTER_COLUMNS = ("qp", "genotype", "rate_increase_pct", "psnr_delta_db", "effort_savings_pct",
                   "energy_savings_pct")
REPORT_COLUMNS = ("sequence", "bd_rate_pct", "bd_rate_std", "bd_energy_pct", "bd_energy_std",
                  "effort_savings_pct", "effort_savings_std")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SequenceSpec:
    """Either a synthetic recipe or a raw file on disk."""

    name: str
    synthetic: dict | None = None
    path: str | None = None
    width: int | None = None
    height: int | None = None
    frames: int | None = None
    layout: str = "yuv420"

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "SequenceSpec":
        if "name" not in d:
            raise ConfigError(f"sequence spec without a name: {d}")
        if ("synthetic" in d) == ("path" in d):
            raise ConfigError(f"sequence {d['name']!r}: give exactly one of 'synthetic' or 'path'")
        if "synthetic" in d:
            syn = dict(d["synthetic"])
            if syn.get("kind") not in SYNTHETIC_KINDS:
                raise ConfigError(f"sequence {d['name']!r}: synthetic kind must be one of {SYNTHETIC_KINDS}")
            return cls(d["name"], synthetic=syn)
        missing = [k for k in ("width", "height", "frames") if k not in d]
        if missing:
            raise ConfigError(f"sequence {d['name']!r}: raw input needs {missing}")
        path = Path(d["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        return cls(d["name"], path=str(path), width=int(d["width"]), height=int(d["height"]),
                   frames=int(d["frames"]), layout=d.get("layout", "yuv420"))

    def load(self) -> Sequence:
        if self.synthetic is not None:
            s = dict(self.synthetic)
            kind = s.pop("kind")
            w, h, n = s.pop("width", 64), s.pop("height", 64), s.pop("frames", 2)
            if "motion" in s:
                s["motion"] = tuple(s["motion"])
            return synthesize_sequence(kind, w, h, n, name=self.name, **s)
        return load_raw_video(self.path, self.width, self.height, self.frames, layout=self.layout, name=self.name)


@dataclass
class CampaignConfig:
    training: list[SequenceSpec]
    validation: list[SequenceSpec]
    dse: DseConfig = field(default_factory=DseConfig)
    dse_per_qp: dict[int, dict] = field(default_factory=dict)
    qps: tuple[int, ...] = DEFAULT_QPS
    energy_table: str | None = None
    codec: CodecConfig = DEFAULT_CONFIG
    output_dir: str = "modedse_out"
    anchors: dict[str, tuple[float, ...]] = field(default_factory=lambda: {"balanced": (1.0, 0.0, 1.0, 0.0)})

    def __post_init__(self):
        if not self.training:
            raise ConfigError("campaign needs at least one training sequence")
        train = [s.name for s in self.training]
        val = [s.name for s in self.validation]
        for label, names in (("training", train), ("validation", val)):
            if len(set(names)) != len(names):
                raise ConfigError(f"duplicate {label} sequence names: {names}")
        overlap = sorted(set(train) & set(val))
        if overlap:
            raise ConfigError(f"training and validation sets must be disjoint; shared: {overlap}")
        for name, w in self.anchors.items():
            if len(w) != 4 or any(v < 0 for v in w) or sum(w) == 0:
                raise ConfigError(f"anchor {name!r} must be four non-negative weights, not all zero")

    def dse_for(self, qp: int) -> DseConfig:
        overrides = dict(self.dse_per_qp.get(qp, {}))
        return replace(self.dse, qp=qp, training=tuple(s.name for s in self.training), **overrides)

    def table(self) -> EnergyTable:
        return EnergyTable.load(self.energy_table) if self.energy_table else default_energy_table()

    @property
    def out(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "CampaignConfig":
        known = {"training", "validation", "dse", "dse_per_qp", "qps", "energy_table", "codec", "output_dir", "anchors"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown campaign keys {sorted(unknown)}; allowed: {sorted(known)}")
        try:
            dse_dict = dict(d.get("dse", {}))
            for k in ("qp", "training"):
                if k in dse_dict:
                    raise ConfigError(f"'dse.{k}' is set by the campaign; remove it")
            et = d.get("energy_table")
            if et and base is not None and not Path(et).is_absolute():
                et = str(base / et)
            out = d.get("output_dir", "modedse_out")
            if base is not None and not Path(out).is_absolute():
                out = str(base / out)
            return cls(
                training=[SequenceSpec.from_dict(s, base) for s in d.get("training", [])],
                validation=[SequenceSpec.from_dict(s, base) for s in d.get("validation", [])],
                dse=DseConfig.from_dict(dse_dict),
                dse_per_qp={int(k): dict(v) for k, v in d.get("dse_per_qp", {}).items()},
                qps=tuple(int(q) for q in d.get("qps", DEFAULT_QPS)),
                energy_table=et,
                codec=CodecConfig.from_dict(d.get("codec")),
                output_dir=out,
                anchors={k: tuple(float(x) for x in v) for k, v in d.get("anchors", {"balanced": [1, 0, 1, 0]}).items()},
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "CampaignConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data, base=path.parent)


def _mean_objectives(genotype: Genotype, seqs, qp, table, codec) -> ObjectiveVector:
    return ObjectiveVector.mean(collect_objectives(encode_sequence(s, genotype, qp, codec), table) for s in seqs)


def relative_to_baseline(obj: ObjectiveVector, base: ObjectiveVector) -> dict:
    return {
        "rate_increase_pct": (obj.rate / base.rate - 1.0) * 100.0,
        "psnr_delta_db": obj.psnr - base.psnr,
        "effort_savings_pct": (1.0 - obj.effort / base.effort) * 100.0,
        "energy_savings_pct": (1.0 - obj.energy / base.energy) * 100.0,
    }


def write_scatter_csv(archive, qp: int, baseline: ObjectiveVector, path) -> None:
    """Archive points relative to the exhaustive baseline at the same QP."""
    rows = []
    for e in archive:
        rel = relative_to_baseline(e.objectives, baseline)
        rows.append((qp, e.key, *(rel[c] for c in SCATTER_COLUMNS[2:])))
    rows.sort(key=lambda r: (r[4], r[2], r[1]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema: {SCATTER_SCHEMA}; baseline = exhaustive genotype, same sequences and QP\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCATTER_COLUMNS)
        for r in rows:
            w.writerow([r[0], r[1], *(repr(float(v)) for v in r[2:])])


def cmd_train(config: CampaignConfig, on_generation=None) -> dict:
    """Run one DSE per QP; writes archives, scatter data and combined picks.

    Returns ``{qp: archive}``.
    """
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    seqs = [s.load() for s in config.training]
    table = config.table()
    archives = {}
    for qp in config.qps:
        dcfg = config.dse_for(qp)
        log.info("training at QP %d (population %d, %d generations)", qp, dcfg.population_size, dcfg.iterations)
        archive = run_dse(dcfg, seqs, table, config.codec, on_generation=on_generation)
        archives[qp] = archive
        write_archive_csv(archive, qp, out / f"archive_qp{qp}.csv")
        base = _mean_objectives(exhaustive_genotype(), seqs, qp, table, config.codec)
        write_scatter_csv(archive, qp, base, out / f"scatter_qp{qp}.csv")
    if set(DEFAULT_QPS) <= set(archives):
        for name, weights in sorted(config.anchors.items()):
            combined = combine_across_qps(archives, weights)
            (out / f"combined_{name}.json").write_text(combined.to_json(), encoding="utf-8")
    return archives


def load_archives(out: Path, qps=DEFAULT_QPS) -> dict:
    archives = {}
    for qp in qps:
        path = out / f"archive_qp{qp}.csv"
        if not path.exists():
            raise ConfigError(f"missing {path}; run 'train' first")
        archives[qp] = read_archive_csv(path)[1]
    return archives


@dataclass
class ValidationRow:
    sequence: str
    bd_rate: float
    bd_energy: float
    effort_savings: float


def _curve(seq, combined_or_genotype, table, codec, qps) -> RdCurve:
    pts = []
    for qp in qps:
        g = combined_or_genotype.genotype(qp) if isinstance(combined_or_genotype, CombinedSolution) else combined_or_genotype
        o = collect_objectives(encode_sequence(seq, g, qp, codec), table)
        pts.append((o.rate, o.psnr, o.energy, o.effort))
    return RdCurve.from_lists(*zip(*pts))


def cmd_validate(config: CampaignConfig, combined: CombinedSolution, report_path=None) -> list[ValidationRow]:
    """Compare ``combined`` with the exhaustive baseline on the validation set."""
    missing = [qp for qp in DEFAULT_QPS if qp not in combined.picks]
    if missing:
        raise ConfigError(f"combined solution lacks QP(s) {missing}")
    if not config.validation:
        raise ConfigError("campaign has no validation sequences")
    table = config.table()
    rows = []
    for spec in config.validation:
        seq = spec.load()
        ref = _curve(seq, exhaustive_genotype(), table, config.codec, DEFAULT_QPS)
        test = _curve(seq, combined, table, config.codec, DEFAULT_QPS)
        rows.append(ValidationRow(seq.name, bd_rate(ref, test), bd_energy(ref, test), mean_effort_savings(ref, test)))
    if report_path is None:
        config.out.mkdir(parents=True, exist_ok=True)
        report_path = config.out / "validation_report.csv"
    write_validation_report(rows, report_path)
    return rows


def write_validation_report(rows: list[ValidationRow], path) -> None:
    """One row per sequence plus a ``mean`` row carrying sample standard deviations."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema: {REPORT_SCHEMA}; baseline = exhaustive genotype; std = sample standard deviation\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([r.sequence, repr(r.bd_rate), "", repr(r.bd_energy), "", repr(r.effort_savings), ""])
        cols = [[r.bd_rate for r in rows], [r.bd_energy for r in rows], [r.effort_savings for r in rows]]
        stats = []
        for c in cols:
            a = np.asarray(c, dtype=float)
            stats += [repr(float(a.mean())), repr(float(a.std(ddof=1))) if len(a) > 1 else "0.0"]
        w.writerow(["mean", *stats])
