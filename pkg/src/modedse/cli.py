"""Command-line entry point: ``modedse {train,validate,inspect,encode}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import campaign
from .codec import CodecConfig
from .dse import CombinedSolution
from .genotype import (
    PB_GENOTYPE_TEXT,
    PE_GENOTYPE_TEXT,
    GenotypeParseError,
    InvalidGenotype,
    describe,
    exhaustive_genotype,
    hm_like_genotype,
    parse_genotype,
    render_unwrapped,
    require_valid,
)
from .media_io import SYNTHETIC_KINDS, load_raw_video, synthesize_sequence
from .objectives import EnergyTable, collect_objectives, default_energy_table
from .pipeline import encode_sequence

BUILTIN_GENOTYPES = {
    "exhaustive": exhaustive_genotype,
    "hm": hm_like_genotype,
    "pb": lambda: parse_genotype(PB_GENOTYPE_TEXT),
    "pe": lambda: parse_genotype(PE_GENOTYPE_TEXT),
}


def load_genotype(arg: str):
    """A builtin name (exhaustive, hm, pb, pe) or a path to a text/JSON genotype file."""
    if arg in BUILTIN_GENOTYPES:
        g = BUILTIN_GENOTYPES[arg]()
    else:
        try:
            text = Path(arg).read_text(encoding="utf-8")
        except OSError as exc:
            raise campaign.ConfigError(f"cannot read genotype {arg!r}: {exc.strerror}") from None
        g = parse_genotype(text)
    require_valid(g)
    return g


def _cmd_train(args) -> int:
    cfg = campaign.CampaignConfig.load(args.config)
    archives = campaign.cmd_train(cfg)
    for qp, a in archives.items():
        print(f"QP {qp}: {len(a)} archive points, {a.stats['evaluations']} distinct evaluations")
    print(f"outputs in {cfg.out}")
    return 0


def _cmd_validate(args) -> int:
    cfg = campaign.CampaignConfig.load(args.config)
    if args.genotype:
        combined = CombinedSolution.uniform(load_genotype(args.genotype))
    else:
        path = Path(args.combined) if args.combined else cfg.out / f"combined_{args.anchor}.json"
        if not path.exists():
            raise campaign.ConfigError(f"{path} not found; run 'train' or pass --combined/--genotype")
        combined = CombinedSolution.from_dict(json.loads(path.read_text(encoding="utf-8")))
    rows = campaign.cmd_validate(cfg, combined, args.report)
    for r in rows:
        print(f"{r.sequence:>16s}  BD-rate {r.bd_rate:+7.2f}%  BD-energy {r.bd_energy:+7.2f}%  "
              f"effort savings {r.effort_savings:6.2f}%")
    return 0


def _cmd_inspect(args) -> int:
    g = load_genotype(args.genotype)
    sys.stdout.write(describe(g))
    if args.unwrapped:
        sys.stdout.write(render_unwrapped(g))
    if args.json:
        sys.stdout.write(g.to_json())
    return 0


def _load_sequence(args):
    if args.synthetic:
        return synthesize_sequence(args.synthetic, args.width, args.height, args.frames, seed=args.seed)
    return load_raw_video(args.input, args.width, args.height, args.frames, layout=args.layout)


def _cmd_encode(args) -> int:
    g = load_genotype(args.genotype)
    seq = _load_sequence(args)
    codec = CodecConfig.from_dict(json.loads(Path(args.codec).read_text())) if args.codec else CodecConfig()
    table = EnergyTable.load(args.energy_table) if args.energy_table else default_energy_table()
    report = encode_sequence(seq, g, args.qp, codec)
    obj = collect_objectives(report, table)
    data = report.to_dict()
    data["objectives"] = {"rate_bits": obj.rate, "psnr_db": obj.psnr, "effort": obj.effort, "energy": obj.energy}
    text = json.dumps(data, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"rate {obj.rate:.1f} bits, PSNR {obj.psnr:.2f} dB, effort {obj.effort:.0f}, energy {obj.energy:.1f}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modedse", description="Mode-decision design-space exploration.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one DSE per QP and write archives")
    t.add_argument("config", help="campaign JSON file")
    t.set_defaults(func=_cmd_train)

    v = sub.add_parser("validate", help="compare a combined solution with the exhaustive baseline")
    v.add_argument("config", help="campaign JSON file")
    v.add_argument("--combined", help="combined-solution JSON (default: <output_dir>/combined_<anchor>.json)")
    v.add_argument("--anchor", default="balanced", help="anchor name used to locate the default combined file")
    v.add_argument("--genotype", help="use one genotype at every QP instead (builtin name or file)")
    v.add_argument("--report", help="report CSV path (default: <output_dir>/validation_report.csv)")
    v.set_defaults(func=_cmd_validate)

    i = sub.add_parser("inspect", help="print order, guards and unreachable positions")
    i.add_argument("genotype", help="builtin name (exhaustive, hm, pb, pe) or genotype file")
    i.add_argument("--unwrapped", action="store_true", help="also print the decision as if-clauses")
    i.add_argument("--json", action="store_true", help="also print the JSON serialisation")
    i.set_defaults(func=_cmd_inspect)

    e = sub.add_parser("encode", help="encode one sequence at one QP, emit the report as JSON")
    e.add_argument("--genotype", default="exhaustive")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="raw .yuv/.y4m file")
    src.add_argument("--synthetic", choices=SYNTHETIC_KINDS)
    e.add_argument("--width", type=int, default=64)
    e.add_argument("--height", type=int, default=64)
    e.add_argument("--frames", type=int, default=2)
    e.add_argument("--layout", choices=("yuv420", "luma"), default="yuv420")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--qp", type=int, default=20)
    e.add_argument("--codec", help="codec config JSON")
    e.add_argument("--energy-table", help="feature energy TSV")
    e.add_argument("-o", "--output", help="write the JSON here instead of stdout")
    e.set_defaults(func=_cmd_encode)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (campaign.ConfigError, GenotypeParseError, InvalidGenotype, ValueError, OSError) as exc:
        print(f"modedse: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
