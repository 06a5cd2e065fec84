"""Per-CTU comparison of the exhaustive genotype against random guarded ones.

Each probe genotype decides every CTU on the identical coding state that the
exhaustive encoder sees; the script lists CTUs where a probe reaches a lower
cost J than the exhaustive search.

    python scripts/subset_minimum_probe.py --frames 10 --probes 50
"""

import argparse

import numpy as np

from modedse.dse import random_genotype
from modedse.genotype import exhaustive_genotype
from modedse.media_io import synthesize_sequence
from modedse.pipeline import encode_sequence


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--kinds", nargs="+", default=["moving_block", "gradient", "noise"])
    ap.add_argument("--width", type=int, default=128)
    ap.add_argument("--height", type=int, default=64)
    ap.add_argument("--frames", type=int, default=10)
    ap.add_argument("--probes", type=int, default=50)
    ap.add_argument("--qp", type=int, default=20)
    ap.add_argument("--seed", type=int, default=202)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    probes = [random_genotype(rng) for _ in range(args.probes)]
    total = worse = 0
    for i, kind in enumerate(args.kinds):
        seq = synthesize_sequence(kind, args.width, args.height, args.frames, seed=i)
        rep = encode_sequence(seq, exhaustive_genotype(), args.qp, probes=probes)
        for c in rep.ctus:
            total += 1
            k = int(np.argmin(c.probe_costs))
            if c.probe_costs[k] < c.cost_j:
                worse += 1
                print(f"{kind:>12s} frame {c.frame} ctu ({c.x:3d},{c.y:3d}): exhaustive J {c.cost_j:10.2f}  "
                      f"probe #{k} J {c.probe_costs[k]:10.2f}")
    print(f"{worse} of {total} CTUs beaten by at least one of {args.probes} guarded genotypes")


if __name__ == "__main__":
    main()
