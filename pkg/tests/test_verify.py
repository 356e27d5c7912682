import numpy as np
import pytest
from hypothesis import given, strategies as st

from markovmix.chain import check_structure, validate_chain
from markovmix.errors import NotReversible, StateSpaceTooLarge, WindowTooSmall
from markovmix.generators import make_cycle, make_random_reversible, make_two_state, seeded_family
from markovmix.verify import (
    LABELS,
    ChainAnalysis,
    VerifyConfig,
    assess_decay,
    check_condition_A2_A3,
    check_condition_A3,
    check_condition_R1,
    check_condition_R2,
    check_condition_R3_A1_rates,
    check_condition_R4,
    check_conditions,
    check_conditions_B,
    check_implication_lattice,
    check_rate_matching,
    check_spectral_bound,
    verify_chain,
)

W16 = VerifyConfig(max_lag=16)


def analysis(chain, cfg=W16):
    return ChainAnalysis(chain, cfg)


def fitted(report):
    return report.witness["fit"]["rate"]


class TestDecay:
    def test_geometric(self):
        lags = np.arange(1, 17)
        fit = assess_decay(lags, 0.5 ** lags, 0.0)
        assert fit.holds and fit.status == "decays"
        assert fit.rate == pytest.approx(0.5, abs=1e-12)

    def test_constant(self):
        fit = assess_decay(range(1, 17), [0.25] * 16, 0.25)
        assert not fit.holds and fit.status == "boundary"

    def test_vanished(self):
        fit = assess_decay(range(1, 9), [1.0] + [0.0] * 7, 0.0)
        assert fit.holds and fit.status == "vanished"

    def test_guard_band(self):
        lags = np.arange(1, 17)
        r = 1 - 1e-10
        fit = assess_decay(lags, r ** lags, r ** (2.0 ** 40))
        assert not fit.holds and fit.status == "boundary"
        r = 1 - 1e-8
        assert assess_decay(lags, r ** lags, r ** (2.0 ** 40)).holds

    def test_vanished_keeps_rate(self):
        lags = [1, 2, 4, 8, 16, 32]
        vals = [0.01 ** L for L in lags]
        fit = assess_decay(lags, vals, 0.0, doubling=True)
        assert fit.status == "vanished"
        assert fit.rate == pytest.approx(0.01, rel=1e-9)

    def test_plateau(self):
        lags = np.arange(1, 17)
        fit = assess_decay(lags, 0.5 ** lags + 1e-6, 1e-6)
        assert not fit.holds

    def test_too_small(self):
        with pytest.raises(WindowTooSmall):
            assess_decay([1, 2, 3], [0.5, 0.25, 0.125], 0.0)
        with pytest.raises(WindowTooSmall):
            assess_decay([], [], 0.0)

    def test_oscillating_doubling(self):
        lags = [1, 2, 4, 8, 16, 32]
        vals = [0.3, 0.3, 0.1, 0.2 ** 8, 0.2 ** 16, 0.2 ** 32]
        fit = assess_decay(lags, vals, 0.0, doubling=True)
        assert fit.holds and fit.rate < 1


class TestR:
    def test_R1(self, t_quarter, two_cycle, ex28):
        r = check_condition_R1(t_quarter)
        assert r.holds and r.margin == pytest.approx(0.5, abs=1e-12)
        r = check_condition_R1(two_cycle)
        assert not r.holds and r.margin == pytest.approx(0.0, abs=1e-12)
        assert not check_condition_R1(ex28).holds

    def test_R3_A1(self, t_quarter, two_cycle, iid3):
        R3, A1 = check_condition_R3_A1_rates(t_quarter, analysis(t_quarter))
        assert R3.holds and A1.holds
        assert fitted(R3) == pytest.approx(0.5, abs=1e-6)
        R3, A1 = check_condition_R3_A1_rates(two_cycle, analysis(two_cycle))
        assert not R3.holds and not A1.holds
        R3, A1 = check_condition_R3_A1_rates(iid3, analysis(iid3))
        assert R3.holds and A1.holds
        assert R3.status == A1.status == "vanished"

    def test_R2_example(self, ex28):
        # rho(2) = 0 certifies rho-mixing even though R1 fails
        r = check_condition_R2(ex28)
        assert r.holds and r.witness["first_lag"] == 2

    def test_R4(self, ex28, two_cycle):
        for seed in range(10):
            assert check_condition_R4(make_random_reversible(2 + seed % 7, seed)).holds
        r = check_condition_R4(ex28)
        assert not r.holds and not r.witness["identity_holds"]
        assert r.witness["text"] == "n=2: rho=0, rho(1)^2=1"
        assert r.witness["max_deviation"] == pytest.approx(1.0, abs=1e-12)
        r = check_condition_R4(two_cycle)
        assert r.witness["identity_holds"] and not r.holds
        assert r.witness["r"] == pytest.approx(1.0)

    def test_R4_fit_equals_rho1(self, t_quarter):
        r = check_condition_R4(t_quarter)
        assert r.holds and r.witness["r"] == pytest.approx(0.5, abs=1e-12)


class TestA:
    def test_two_state(self, t_quarter):
        A2, A3 = check_condition_A2_A3(t_quarter, analysis(t_quarter, VerifyConfig(max_doubling=4)))
        assert A2.holds and A3.holds
        assert A2.witness["rate_bound"] <= 0.5 + 1e-9

    def test_two_cycle(self, two_cycle):
        A2, A3 = check_condition_A2_A3(two_cycle)
        assert not A2.holds and not A3.holds
        assert A3.witness["worst_set"] == ["0"]

    def test_iid(self, iid3):
        A2, A3 = check_condition_A2_A3(iid3)
        assert A2.holds and A3.holds

    def test_too_large(self):
        c = validate_chain(np.full((13, 13), 1 / 13))
        with pytest.raises(StateSpaceTooLarge):
            check_condition_A3(c)


class TestB:
    def test_two_state(self, t_quarter):
        reports = check_conditions_B(t_quarter, analysis(t_quarter))
        assert all(r.holds for r in reports)
        assert reports[1].witness["lambda"] == pytest.approx(0.5, abs=1e-6)

    def test_two_cycle(self, two_cycle):
        assert not any(r.holds for r in check_conditions_B(two_cycle, analysis(two_cycle)))

    def test_example(self, ex28):
        reports = check_conditions_B(ex28, analysis(ex28))
        assert all(r.holds for r in reports)


class TestLattice:
    def test_reversible_aperiodic(self):
        c = make_random_reversible(5, 3)
        reports = check_conditions(c)
        assert all(r.holds for r in reports.values())
        imps, eqs = check_implication_lattice(c, reports)
        assert all(i.consistent for i in imps) and all(e.consistent for e in eqs)
        assert len(eqs) == 2

    @pytest.mark.parametrize("chain", [
        validate_chain([[0.0, 1.0], [1.0, 0.0]]),
        make_cycle(4, 0.5),
    ], ids=["2-cycle", "4-cycle"])
    def test_reversible_periodic(self, chain):
        reports = check_conditions(chain)
        assert not any(r.holds for r in reports.values())
        imps, eqs = check_implication_lattice(chain, reports)
        assert all(i.consistent for i in imps) and all(e.consistent for e in eqs)

    def test_example(self, ex28):
        reports = check_conditions(ex28)
        h = {k: r.holds for k, r in reports.items()}
        assert not h["R1"] and not h["R4"]
        assert h["R2"] and h["R3"]
        assert all(h[k] for k in ("A1", "A2", "A3", "B1", "B2", "B3", "B4"))
        imps, eqs = check_implication_lattice(ex28, reports)
        assert all(i.consistent for i in imps)
        assert eqs == ()

    def test_violation_flagged(self, t_quarter):
        reports = dict(check_conditions(t_quarter))
        r = reports["A2"]
        reports["A2"] = type(r)("A2", False, r.margin, r.witness, r.window)
        imps, eqs = check_implication_lattice(t_quarter, reports)
        assert any(not i.consistent and (i.source, i.target) == ("A1", "A2") for i in imps)
        assert not all(e.consistent for e in eqs)

    @given(st.integers(0, 10_000))
    def test_no_violation(self, seed):
        c = seeded_family(seed, 1, 10)
        reports = check_conditions(c)
        imps, eqs = check_implication_lattice(c, reports)
        assert all(i.consistent for i in imps)
        assert all(e.consistent for e in eqs)
        s = check_structure(c)
        if s.reversible and s.irreducible and s.aperiodic:
            assert all(r.holds for r in reports.values())

    def test_every_label_reported(self, t_quarter):
        assert tuple(check_conditions(t_quarter)) == LABELS


class TestRates:
    @given(st.integers(0, 10_000))
    def test_fitted_rates_agree(self, seed):
        c = make_random_reversible(2 + seed % 7, seed)
        an = ChainAnalysis(c)
        r_star = an.rho(1)
        reports = check_conditions(c, analysis=an)
        for label in ("R3", "A1", "B4"):
            assert fitted(reports[label]) <= r_star + 0.02
        assert reports["A2"].witness["rate_fit"] == pytest.approx(r_star, abs=0.02)


class TestRateMatching:
    def test_two_state(self, t_quarter):
        ok = check_rate_matching(t_quarter, 0.5)
        assert all(ok.conditions.values()) and ok.ok
        bad = check_rate_matching(t_quarter, 0.4)
        assert not any(bad.conditions.values()) and bad.ok

    def test_iid(self, iid3):
        for r in (0.01, 0.3, 0.9):
            assert all(check_rate_matching(iid3, r).conditions.values())

    def test_non_reversible(self, ex28):
        with pytest.raises(NotReversible):
            check_rate_matching(ex28, 0.5)

    def test_range(self, t_quarter):
        with pytest.raises(ValueError):
            check_rate_matching(t_quarter, 1.0)

    @given(st.integers(0, 10_000), st.floats(0.05, 0.95))
    def test_agreement(self, seed, r):
        c = make_random_reversible(2 + seed % 5, seed)
        rep = check_rate_matching(c, r)
        assert rep.consistent and rep.beta_direction_consistent


class TestReport:
    def test_spectral_bound(self):
        sb = check_spectral_bound(make_random_reversible(5, 2))
        assert sb["applicable"] and sb["ok"]
        assert not check_spectral_bound(make_cycle(3))["applicable"]

    def test_example_power_law_fails(self, ex28):
        rep = verify_chain(ex28, checks=["power-law"])
        assert not rep.overall
        assert "n=2: rho=0, rho(1)^2=1" in rep.failures[0]

    def test_example_lattice_passes(self, ex28):
        assert verify_chain(ex28, checks=["lattice"]).overall

    def test_reversible_full(self):
        rep = verify_chain(make_two_state(0.3))
        assert rep.overall
        d = rep.to_dict()
        assert set(d["conditions"]) == set(LABELS)
        assert d["overall"] == "pass"
        assert "overall: PASS" in rep.to_text()
        assert rep.to_json() == verify_chain(make_two_state(0.3)).to_json()

    def test_text_witness(self, ex28):
        text = verify_chain(ex28, checks=["structure"]).to_text()
        assert "witness 2->1" in text


@pytest.mark.slow
def test_lattice_long_window():
    cfg = VerifyConfig(max_lag=64)
    bad = []
    for seed in range(200):
        c = seeded_family(seed, 1, 10)
        an = ChainAnalysis(c, cfg)
        imps, eqs = check_implication_lattice(c, check_conditions(c, analysis=an), an.structure)
        if not all(i.consistent for i in imps) or not all(e.consistent for e in eqs):
            bad.append(seed)
    assert bad == []
