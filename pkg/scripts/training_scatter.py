"""Training scatter at one QP: archive points relative to the exhaustive baseline.

Writes a CSV with rate increase, effort savings and energy savings per archive
point and prints a coarse text histogram of effort savings.

    python scripts/training_scatter.py --qp 20 --generations 200 --out scatter_qp20.csv
"""

import argparse
import logging

from modedse.campaign import write_scatter_csv
from modedse.dse import DseConfig, run_dse, write_archive_csv
from modedse.genotype import exhaustive_genotype
from modedse.media_io import synthesize_sequence
from modedse.objectives import ObjectiveVector, collect_objectives, default_energy_table
from modedse.pipeline import encode_sequence

KINDS = ("moving_block", "gradient", "noise")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--qp", type=int, default=20)
    ap.add_argument("--population", type=int, default=40)
    ap.add_argument("--generations", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--width", type=int, default=128)
    ap.add_argument("--height", type=int, default=64)
    ap.add_argument("--frames", type=int, default=2)
    ap.add_argument("--out", default="scatter.csv")
    ap.add_argument("--archive", help="also write the raw archive CSV here")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    seqs = [synthesize_sequence(k, args.width, args.height, args.frames, seed=i, name=k) for i, k in enumerate(KINDS)]
    table = default_energy_table()
    cfg = DseConfig(population_size=args.population, iterations=args.generations, qp=args.qp,
                    seed=args.seed, workers=args.workers, training=KINDS)
    archive = run_dse(cfg, seqs, table)
    base = ObjectiveVector.mean(collect_objectives(encode_sequence(s, exhaustive_genotype(), args.qp), table) for s in seqs)
    write_scatter_csv(archive, args.qp, base, args.out)
    if args.archive:
        write_archive_csv(archive, args.qp, args.archive)

    savings = sorted(100 * (1 - e.objectives.effort / base.effort) for e in archive)
    print(f"{len(archive)} archive points, {archive.stats['evaluations']} distinct genotypes evaluated")
    for lo in range(-20, 100, 20):
        n = sum(lo <= s < lo + 20 for s in savings)
        print(f"effort savings {lo:4d}..{lo + 20:3d}%  {'#' * n}")
    print(f"scatter written to {args.out}")


if __name__ == "__main__":
    main()
