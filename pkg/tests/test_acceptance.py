"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line."""

import time

import numpy as np
import pytest

from markovmix.chain import ChainPowers, check_reversibility, check_structure, joint_at_lag, validate_chain
from markovmix.generators import (
    GeneratorSpec,
    estimate_chain,
    make_cycle,
    make_example_2_8,
    make_named,
    make_random_reversible,
    make_two_state,
    seeded_family,
    simulate_path,
)
from markovmix.mixing import (
    alpha_coefficient,
    alpha_exhaustive,
    beta_coefficient,
    beta_partition_oracle,
    mixing_profile,
    rho_bruteforce_oracle,
    rho_coefficient,
)
from markovmix.spectral import (
    ScoreFunction,
    SymmetricOperator,
    centered_indicator,
    doubling_diagnostics,
    slem_and_gap,
    subset_rate_table,
)
from markovmix.verify import LABELS, check_conditions, check_implication_lattice, check_rate_matching


@pytest.fixture
def verdict(capsys):
    """Call as ``verdict(number, name, ok, detail, seconds)``; prints one line and asserts."""

    def emit(number, name, ok, detail, seconds, budget=None):
        in_time = budget is None or seconds < budget
        passed = bool(ok) and in_time
        timing = f"{seconds:.2f}s" + (f" (<{budget}s)" if budget else "")
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if passed else 'FAIL'} {name}: {detail}; {timing}")
        assert ok, detail
        assert in_time, f"took {seconds:.2f}s, budget {budget}s"

    return emit


def reversible_chain(seed):
    return make_random_reversible(2 + seed % 7, seed)


def test_example_2_8(verdict):
    t0 = time.perf_counter()
    c = make_example_2_8()
    pw = ChainPowers(c)
    r1, r2 = rho_coefficient(pw.joint(1)), rho_coefficient(pw.joint(2))
    rev = check_reversibility(c)
    i, j = rev.witness_index
    product = np.outer(c.stationary, c.stationary)
    joint_err = max(float(np.abs(pw.joint(m).table - product).max()) for m in (2, 3, 4))
    elapsed = time.perf_counter() - t0
    ok = (
        abs(r1 - 1) <= 1e-12 and abs(r2) <= 1e-12
        and not rev.reversible and rev.witness == ("2", "1")
        and c.transition[i, j] == 0 and c.transition[j, i] == 0.5
        and joint_err <= 1e-14
    )
    detail = f"rho(1)={r1:.17g} rho(2)={r2:.3g} witness={rev.witness} max|J_m - mu x mu|={joint_err:.2g}"
    verdict(1, "four-state counterexample", ok, detail, elapsed, 1)


def test_reversible_power_law(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(200):
        c = reversible_chain(seed)
        pw = ChainPowers(c)
        r1 = rho_coefficient(pw.joint(1))
        for n in range(1, 33):
            worst = max(worst, abs(rho_coefficient(pw.joint(n)) - r1 ** n))
    elapsed = time.perf_counter() - t0
    verdict(2, "reversible power law", worst <= 1e-8, f"max |rho(n) - rho(1)^n| = {worst:.3g} over 200 chains",
            elapsed, 30)


def test_inequality_suite(verdict):
    t0 = time.perf_counter()
    a_rho = a_beta = sub = -np.inf
    n_rev = 0
    for seed in range(200):
        c = seeded_family(seed)
        n_rev += check_reversibility(c).reversible
        pw = ChainPowers(c)
        rho = {}
        for n in range(1, 17):
            J = pw.joint(n)
            a, r, b = alpha_coefficient(J), rho_coefficient(J), beta_coefficient(J)
            rho[n] = r
            a_rho = max(a_rho, 4 * a - r)
            a_beta = max(a_beta, 2 * a - b)
        for m in range(1, 16):
            for n in range(1, 17 - m):
                sub = max(sub, rho[m + n] - rho[m] * rho[n])
    elapsed = time.perf_counter() - t0
    ok = a_rho <= 1e-10 and a_beta <= 1e-10 and sub <= 1e-10 and 0 < n_rev < 200
    detail = (f"max(4a-rho)={a_rho:.3g} max(2a-beta)={a_beta:.3g} max(rho(m+n)-rho(m)rho(n))={sub:.3g}; "
              f"{n_rev} reversible of 200")
    verdict(3, "inequality suite", ok, detail, elapsed, 60)


def test_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    alpha_gap = rho_gap = slem_gap = beta_gap = 0.0
    over = -np.inf
    for seed in range(200):
        c = seeded_family(seed, 1, 10)
        for n in (1, 2, 3):
            J = joint_at_lag(c, n)
            alpha_gap = max(alpha_gap, abs(alpha_coefficient(J) - alpha_exhaustive(J)))
        if c.k <= 8:
            J = joint_at_lag(c, 1 + seed % 3)
            exact, oracle = rho_coefficient(J), rho_bruteforce_oracle(J, seed=seed)
            rho_gap = max(rho_gap, abs(exact - oracle))
            over = max(over, oracle - exact)
        if check_reversibility(c).reversible:
            s = slem_and_gap(c)
            slem_gap = max(slem_gap, abs(s.slem - rho_coefficient(joint_at_lag(c, 1))))
        if c.k <= 4:
            J = joint_at_lag(c, 1 + seed % 4)
            beta_gap = max(beta_gap, abs(beta_coefficient(J) - beta_partition_oracle(J)))
    elapsed = time.perf_counter() - t0
    ok = alpha_gap <= 1e-15 and rho_gap <= 1e-6 and over <= 1e-9 and slem_gap <= 1e-9 and beta_gap <= 1e-15
    detail = (f"alpha vs exhaustive {alpha_gap:.2g}, rho vs oracle {rho_gap:.2g}, "
              f"rho vs SLEM {slem_gap:.2g}, beta vs partitions {beta_gap:.2g}")
    verdict(4, "oracle equivalence", ok, detail, elapsed)


def test_doubling_structure(verdict):
    t0 = time.perf_counter()
    min_c = np.inf
    min_step = np.inf
    for seed in range(100):
        c = reversible_chain(seed)
        rng = np.random.default_rng(seed)
        op = SymmetricOperator(c)
        pw = ChainPowers(c)
        for _ in range(10):
            g = rng.normal(size=c.k)
            g *= rng.uniform(0.05, 1.0) / np.sqrt(c.stationary @ g ** 2)
            d = doubling_diagnostics(c, ScoreFunction.from_values(c, g), 6, pw, op)
            corr = np.array(d.correlations[1:])
            min_c = min(min_c, corr.min())
            min_step = min(min_step, np.diff(np.array(d.roots[1:])).min())
    three = make_named(GeneratorSpec("k-cycle", k=3))
    c1 = doubling_diagnostics(three, centered_indicator(three, ["0"]), 2).correlations[1]
    elapsed = time.perf_counter() - t0
    ok = min_c >= -1e-12 and min_step >= -1e-10 and abs(c1 + 1 / 9) <= 1e-12
    detail = f"min c_n={min_c:.3g}, min root step={min_step:.3g}, 3-cycle c_1={c1:.17g}"
    verdict(5, "doubling structure", ok, detail, elapsed)


def _submask_max(rates, d):
    out = rates.copy()
    for b in range(d):
        bit = 1 << b
        idx = np.arange(1 << d)
        has = (idx & bit) > 0
        out[has] = np.maximum(out[has], out[idx[has] ^ bit])
    return out


def test_subset_rate_machinery(verdict):
    t0 = time.perf_counter()
    union_excess = strict_gap = R_gap = bound_excess = 0.0
    R_max = 0.0
    chains = [reversible_chain(s) for s in range(60) if 2 + s % 7 <= 6]
    chains += [make_cycle(4, 0.5), make_cycle(5, 0.5), validate_chain([[0.0, 1.0], [1.0, 0.0]])]
    for c in chains:
        D_idx, rates = subset_rate_table(c)
        d = len(D_idx)
        R = _submask_max(rates, d)
        full = (1 << d) - 1
        for A in range(1 << d):
            rest = full ^ A
            B = rest
            while True:
                hi = max(rates[A], rates[B])
                union_excess = max(union_excess, rates[A | B] - hi)
                if abs(rates[A] - rates[B]) > 1e-6:
                    strict_gap = max(strict_gap, abs(rates[A | B] - hi))
                R_gap = max(R_gap, abs(R[A | B] - max(R[A], R[B])))
                if B == 0:
                    break
                B = (B - 1) & rest
        s = check_structure(c)
        RS = float(R[full])
        if s.irreducible and s.aperiodic:
            R_max = max(R_max, RS)
        pw = ChainPowers(c)
        for n in range(6):
            L = 1 << n
            bound_excess = max(bound_excess, alpha_coefficient(pw.joint(L)) - RS ** L)
    elapsed = time.perf_counter() - t0
    ok = union_excess <= 1e-9 and strict_gap <= 1e-8 and R_gap <= 1e-8 and R_max < 1 - 1e-9 and bound_excess <= 1e-10
    detail = (f"{len(chains)} chains: union excess {union_excess:.2g}, strict-case gap {strict_gap:.2g}, "
              f"R union gap {R_gap:.2g}, max R(S) (irreducible aperiodic) {R_max:.6f}, "
              f"bound excess {bound_excess:.2g}")
    verdict(6, "subset-rate machinery", ok, detail, elapsed)


def test_eleven_conditions(verdict):
    t0 = time.perf_counter()
    all_true = 0
    tried = 0
    seed = 0
    while tried < 100:
        c = reversible_chain(seed)
        seed += 1
        s = check_structure(c)
        if not (s.irreducible and s.aperiodic):
            continue
        tried += 1
        all_true += all(r.holds for r in check_conditions(c).values())
    periodic = [validate_chain([[0.0, 1.0], [1.0, 0.0]]), make_cycle(4, 0.5)]
    all_false = sum(not any(r.holds for r in check_conditions(c).values()) for c in periodic)
    violations = 0
    for seed in range(200):
        c = seeded_family(seed, 1, 10)
        reports = check_conditions(c)
        imps, eqs = check_implication_lattice(c, reports)
        violations += sum(not i.consistent for i in imps) + sum(not e.consistent for e in eqs)
    elapsed = time.perf_counter() - t0
    ok = all_true == tried == 100 and all_false == 2 and violations == 0
    detail = (f"{all_true}/{tried} aperiodic chains with all {len(LABELS)} true, "
              f"{all_false}/2 periodic with all false, {violations} lattice violations on 200 chains")
    verdict(7, "eleven-condition equivalence", ok, detail, elapsed)


def test_rate_matching(verdict):
    t0 = time.perf_counter()
    c = make_two_state(0.25)
    hold = check_rate_matching(c, 0.5)
    fail = check_rate_matching(c, 0.4)
    elapsed = time.perf_counter() - t0
    ok = all(hold.conditions.values()) and not any(fail.conditions.values()) and hold.ok and fail.ok
    detail = f"r=0.5 -> {hold.conditions}, r=0.4 -> {fail.conditions}"
    verdict(8, "rate matching", ok, detail, elapsed)


def test_simulation_round_trip(verdict):
    t0 = time.perf_counter()
    c = make_two_state(0.25)
    path = simulate_path(c, 10 ** 6, 42)
    est = estimate_chain(path)
    p12 = float(est.transition[0, 1])
    exact = mixing_profile(c, 32, 5)
    fitted = mixing_profile(est, 32, 5)
    gap = max(float(np.max(np.abs(np.array(getattr(exact, f)) - np.array(getattr(fitted, f)))))
              for f in ("alpha", "rho", "beta"))
    same = simulate_path(c, 10 ** 6, 42).to_text() == path.to_text()
    elapsed = time.perf_counter() - t0
    ok = abs(p12 - 0.25) <= 0.005 and gap <= 0.02 and same
    detail = f"p(1,2) estimate {p12:.6f}, max profile gap {gap:.3g}, byte-identical rerun {same}"
    verdict(9, "simulation round trip", ok, detail, elapsed)
