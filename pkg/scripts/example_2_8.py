"""Reproduce the four-state counterexample: rho(1) = 1 but rho(2) = 0.

Prints the mixing profile, the detailed-balance witness and the distance of
J_2, J_3, J_4 from the product law.
"""

import numpy as np

from markovmix.chain import ChainPowers, check_reversibility
from markovmix.generators import make_example_2_8
from markovmix.mixing import mixing_profile
from markovmix.verify import verify_chain


def main():
    chain = make_example_2_8()
    profile = mixing_profile(chain, max_lag=6, max_doubling=3)
    print(profile.to_csv(), end="")

    rev = check_reversibility(chain)
    i, j = rev.witness_index
    print(f"\nreversible: {rev.reversible}; witness {rev.witness}: "
          f"p({rev.witness[0]},{rev.witness[1]})={chain.transition[i, j]}, "
          f"p({rev.witness[1]},{rev.witness[0]})={chain.transition[j, i]}")

    pw = ChainPowers(chain)
    prod = np.outer(chain.stationary, chain.stationary)
    for m in (2, 3, 4):
        print(f"max |J_{m} - mu x mu| = {np.abs(pw.joint(m).table - prod).max():.3g}")

    report = verify_chain(chain, checks=["R", "A", "B", "lattice"])
    print()
    print(report.to_text(), end="")


if __name__ == "__main__":
    main()
