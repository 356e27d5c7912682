"""Decide the eleven conditions on a seeded mix of chains and tabulate.

For every chain the lattice of implications is checked; the summary groups
chains by (reversible, irreducible, aperiodic) and counts how often each
condition holds.

    python3 scripts/condition_sweep.py --seeds 200
"""

import argparse
import collections
import sys

from markovmix.generators import seeded_family
from markovmix.verify import LABELS, ChainAnalysis, VerifyConfig, check_conditions, check_implication_lattice


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--max-lag", type=int, default=32)
    ap.add_argument("--k-max", type=int, default=10)
    args = ap.parse_args(argv)
    cfg = VerifyConfig(max_lag=args.max_lag)

    groups = collections.defaultdict(lambda: collections.Counter())
    sizes = collections.Counter()
    violations = []
    for seed in range(args.seeds):
        chain = seeded_family(seed, 1, args.k_max)
        an = ChainAnalysis(chain, cfg)
        s = an.structure
        reports = check_conditions(chain, analysis=an)
        imps, eqs = check_implication_lattice(chain, reports, s)
        key = ("rev" if s.reversible else "nonrev", "irr" if s.irreducible else "red",
               "aper" if s.aperiodic else "per")
        sizes[key] += 1
        for label, r in reports.items():
            groups[key][label] += r.holds
        bad = [f"{i.source}=>{i.target}" for i in imps if not i.consistent]
        bad += ["equal(" + ",".join(e.labels) + ")" for e in eqs if not e.consistent]
        if bad:
            violations.append((seed, bad))

    print("group".ljust(22) + "n".rjust(5) + "".join(l.rjust(5) for l in LABELS))
    for key in sorted(sizes):
        row = "/".join(key).ljust(22) + str(sizes[key]).rjust(5)
        row += "".join(str(groups[key][l]).rjust(5) for l in LABELS)
        print(row)
    print(f"\nlattice violations: {len(violations)}")
    for seed, bad in violations:
        print(f"  seed {seed}: {', '.join(bad)}")
    return 1 if violations else 0


if __name__ == "__main__":
    sys.exit(main())
