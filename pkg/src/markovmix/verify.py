"""
Finite-window decisions for the exponential-decay conditions on a chain.

Eleven conditions are checked, in three families:

    R1  rho(1) < 1
    R2  rho(n) -> 0                      (rho-mixing)
    R3  rho(n) -> 0 exponentially fast
    R4  rho(n) = r^n for some r in [0, 1)
    A1  alpha(n) -> 0 exponentially fast
    A2  alpha(2^n) -> 0 like r^(2^n)
    A3  per set A, |J_{2^n}(A x A) - mu(A)^2| -> 0 like c_A^(2^n)
    B1  per-state total variation to mu decays geometrically
    B2  the same with one rate uniform over states
    B3  return probabilities on a small set converge geometrically
    B4  beta(n) -> 0 exponentially fast

Asymptotic statements are decided from a finite window plus one far probe
(lag 2^40, cheap by repeated squaring), so every decision here is a proxy;
see :func:`assess_decay`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import textio
from .chain import ChainModel, ChainPowers, JointDistribution, StructureReport, chain_to_json, check_structure, find_small_set
from .errors import (
    InvariantViolation,
    NoSmallSetFound,
    NotReversible,
    StateSpaceTooLarge,
    WindowTooSmall,
)
from .mixing import alpha_coefficient, beta_coefficient, rho_coefficient

LABELS = ("R1", "R2", "R3", "R4", "A1", "A2", "A3", "B1", "B2", "B3", "B4")
A3_MAX_STATES = 12


@dataclass(frozen=True)
class VerifyConfig:
    """Windows and tolerances for the decisions.

    ``guard`` is the band around 1 inside which a rate counts as "boundary"
    (not decaying). ``zero_tol`` is the level below which a coefficient is
    treated as exactly zero. The probe value at lag ``2**probe_exponent``
    must be at most ``probe_tol`` for decay to be accepted.
    """

    max_lag: int = 32
    max_doubling: int = 5
    guard: float = 1e-9
    zero_tol: float = 1e-14
    power_law_tol: float = 1e-8
    probe_exponent: int = 40
    probe_tol: float = 1e-9

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @property
    def probe_lag(self) -> int:
        return 1 << self.probe_exponent


@dataclass(frozen=True)
class DecayFit:
    status: str
    holds: bool
    rate: float
    prefactor: float
    residual: float
    usable: int
    probe: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _fit_rate(L, env, usable, doubling: bool, need: int) -> tuple:
    """(rate, prefactor, log residual) of the envelope over its usable points."""
    if len(usable) < 2:
        return 0.0, float(env.max()) if len(env) else 0.0, 0.0
    if doubling:
        # secant from the last point where the envelope still drops, so a
        # flat stretch caused by oscillation does not read as rate 1
        last = usable[-1]
        drops = [j for j in usable[:-1] if env[j] > env[last] * (1 + 1e-9)]
        sel = np.array([drops[-1], last]) if drops else usable[-2:]
    else:
        sel = usable[len(usable) // 2:]
        if len(sel) < need:
            sel = usable[-need:]
    x, y = L[sel], np.log(env[sel])
    slope, icpt = np.polyfit(x, y, 1)
    slope = min(float(slope), 0.0)
    residual = float(np.max(np.abs(y - (slope * x + icpt))))
    logpre = float(np.max(np.log(env[usable]) - L[usable] * slope))
    return float(np.exp(slope)), float(np.exp(min(logpre, 700.0))), residual


def assess_decay(lags, values, probe: float, cfg: VerifyConfig = VerifyConfig(),
                 doubling: bool = False) -> DecayFit:
    """Decide whether ``values`` (indexed by ``lags``) decay exponentially.

    The sequence is replaced by its running maximum from the right, so the
    fit sees a nonincreasing envelope even when the raw values oscillate.

    * If the whole second half of the window is below ``zero_tol`` the
      sequence has vanished (exact independence at finite lag): holds, and
      the rate reported is the one seen before the values dropped out.
    * Otherwise ``log(value)`` is fitted linearly in the lag over the tail:
      the second half of the usable points (at least 4) for contiguous lags,
      the last usable doubling lag and the latest earlier one where the
      envelope is strictly larger. The rate is
      ``exp(slope)`` and the prefactor is ``sup value / rate**lag``.
    * Holds iff the rate is below ``1 - guard`` and the far probe is below
      ``probe_tol``. The log residual is reported, not used.

    Raises:
        WindowTooSmall: too few usable points and the sequence has not vanished.
    """
    L = np.asarray(lags, dtype=float)
    v = np.maximum(np.asarray(values, dtype=float), 0.0)
    if len(v) == 0:
        raise WindowTooSmall("empty window")
    env = np.maximum.accumulate(v[::-1])[::-1]
    usable = np.flatnonzero(env > cfg.zero_tol)
    need = 2 if doubling else 4
    if np.all(env[len(env) // 2:] <= cfg.zero_tol):
        # still report the rate seen before the values dropped out
        rate, prefactor, residual = _fit_rate(L, env, usable, doubling, 2)
        return DecayFit("vanished", True, rate, float(v.max()), residual, len(usable), float(probe))
    if len(usable) < need:
        raise WindowTooSmall(f"{len(usable)} usable lags, need {need}")
    rate, prefactor, residual = _fit_rate(L, env, usable, doubling, need)
    decays = rate < 1 - cfg.guard
    probe_ok = probe <= cfg.probe_tol
    if decays and probe_ok:
        status = "decays"
    elif not decays:
        status = "boundary" if abs(rate - 1) <= cfg.guard else "no-decay"
    else:
        status = "plateau"
    return DecayFit(status, decays and probe_ok, rate, prefactor, residual, len(usable), float(probe))


@dataclass(frozen=True)
class ConditionReport:
    label: str
    holds: bool
    margin: float
    witness: dict
    window: tuple
    status: str = ""
    summary: str = ""

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "status": self.status,
            "margin": self.margin,
            "witness": self.witness,
            "window": list(self.window),
            "summary": self.summary,
        }


def _short(x: float) -> str:
    return f"{round(float(x), 12) + 0.0:.12g}"


class ChainAnalysis:
    """Shared, call-local cache of coefficients and distances for one chain."""

    def __init__(self, chain: ChainModel, cfg: VerifyConfig = VerifyConfig()):
        self.chain = chain
        self.cfg = cfg
        self.powers = ChainPowers(chain)
        self._coeff = {}
        self._structure = None

    @property
    def structure(self) -> StructureReport:
        if self._structure is None:
            self._structure = check_structure(self.chain)
        return self._structure

    @property
    def lags(self) -> list:
        return list(range(1, self.cfg.max_lag + 1))

    @property
    def doubling_lags(self) -> list:
        return [1 << j for j in range(self.cfg.max_doubling + 1)]

    def coefficients(self, n: int) -> tuple:
        if n not in self._coeff:
            joint = self.powers.joint(n)
            self._coeff[n] = (alpha_coefficient(joint), rho_coefficient(joint), beta_coefficient(joint))
        return self._coeff[n]

    def alpha(self, n):
        return self.coefficients(n)[0]

    def rho(self, n):
        if n in self._coeff:
            return self._coeff[n][1]
        return rho_coefficient(self.powers.joint(n))

    def beta(self, n):
        return beta_coefficient(self.powers.joint(n))

    def tv_by_state(self, n: int) -> np.ndarray:
        """``1/2 sum_j |P^n(x, j) - mu_j|`` for each support state x."""
        C = self.powers.centered_power(n)
        return 0.5 * np.abs(C[self.chain.support]).sum(axis=1)


def _window(lags) -> tuple:
    return (int(min(lags)), int(max(lags)))


def _decay_report(label, fit: DecayFit, lags, witness: dict, what: str) -> ConditionReport:
    w = {"fit": fit.to_dict()}
    w.update(witness)
    summary = f"{what}: {fit.status}, rate {_short(fit.rate)}"
    return ConditionReport(label, fit.holds, 1.0 - fit.rate, w, _window(lags), fit.status, summary)


def check_condition_R1(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    """Spectral gap: rho(1) < 1 - guard; margin 1 - rho(1)."""
    an = analysis or ChainAnalysis(chain)
    r1 = an.rho(1)
    holds = r1 < 1 - an.cfg.guard
    status = "holds" if holds else ("boundary" if abs(r1 - 1) <= an.cfg.guard else "fails")
    return ConditionReport("R1", holds, 1.0 - r1, {"rho1": r1}, (1, 1), status, f"rho(1)={_short(r1)}")


def check_condition_R2(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    """rho-mixing, certified by a lag m in the window with rho(m) < 1 - guard.

    Submultiplicativity then gives rho(km) <= rho(m)^k -> 0, so the finite
    certificate is exact.
    """
    an = analysis or ChainAnalysis(chain)
    values = [an.rho(n) for n in an.lags]
    best = int(np.argmin(values))
    hits = [n for n, v in zip(an.lags, values) if v < 1 - an.cfg.guard]
    holds = bool(hits)
    witness = {"first_lag": hits[0] if hits else None, "min_rho": values[best], "min_lag": an.lags[best]}
    if holds:
        summary = f"rho({hits[0]})={_short(values[hits[0] - 1])} < 1"
    else:
        summary = f"rho(n) >= 1 - guard on 1..{an.cfg.max_lag}"
    return ConditionReport("R2", holds, 1.0 - values[best], witness, _window(an.lags),
                           "holds" if holds else "fails", summary)


def check_condition_R3(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    an = analysis or ChainAnalysis(chain)
    values = [an.rho(n) for n in an.lags]
    fit = assess_decay(an.lags, values, an.rho(an.cfg.probe_lag), an.cfg)
    return _decay_report("R3", fit, an.lags, {}, "rho(n)")


def check_condition_A1(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    an = analysis or ChainAnalysis(chain)
    values = [an.alpha(n) for n in an.lags]
    fit = assess_decay(an.lags, values, an.alpha(an.cfg.probe_lag), an.cfg)
    return _decay_report("A1", fit, an.lags, {}, "alpha(n)")


def check_condition_R3_A1_rates(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> tuple:
    an = analysis or ChainAnalysis(chain)
    return check_condition_R3(chain, an), check_condition_A1(chain, an)


def check_condition_R4(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    """Power law rho(n) = rho(1)^n over the window, and rho(1) < 1.

    The witness keeps the two facts apart: ``identity_holds`` is the power
    law alone (true on periodic reversible chains with r = 1), ``holds``
    additionally needs r in [0, 1).
    """
    an = analysis or ChainAnalysis(chain)
    r1 = an.rho(1)
    values = np.array([an.rho(n) for n in an.lags])
    powers = r1 ** np.array(an.lags, dtype=float)
    dev = np.abs(values - powers)
    worst = int(np.argmax(dev))
    identity = bool(dev[worst] <= an.cfg.power_law_tol)
    holds = identity and r1 < 1 - an.cfg.guard
    n = an.lags[worst]
    text = f"n={n}: rho={_short(values[worst])}, rho(1)^{n}={_short(powers[worst])}"
    witness = {
        "r": r1,
        "identity_holds": identity,
        "max_deviation": float(dev[worst]),
        "worst_lag": n,
        "text": text,
    }
    if holds:
        status = "holds"
    elif identity:
        status = "boundary"
    else:
        status = "fails"
    summary = ("identity holds" if identity else "identity fails at " + text) + f", r={_short(r1)}"
    return ConditionReport("R4", holds, 1.0 - r1, witness, _window(an.lags), status, summary)


def check_condition_A2(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    an = analysis or ChainAnalysis(chain)
    lags = an.doubling_lags
    values = np.array([an.alpha(n) for n in lags])
    fit = assess_decay(lags, values, an.alpha(an.cfg.probe_lag), an.cfg, doubling=True)
    roots = np.maximum(values, 0.0) ** (1.0 / np.array(lags, dtype=float))
    witness = {"rate_bound": float(roots.max()), "rate_fit": fit.rate, "C": 1.0}
    return _decay_report("A2", fit, lags, witness, "alpha(2^n)")


def _set_masks(m: int) -> np.ndarray:
    """Nonempty subsets avoiding the last index: one per complement pair."""
    if m <= 1:
        return np.zeros((0, m))
    masks = np.arange(1, 1 << (m - 1), dtype=np.int64)
    return ((masks[:, None] >> np.arange(m)) & 1).astype(float)


def check_condition_A3(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    """Per-set doubling decay of ``|J_{2^n}(A x A) - mu(A)^2|``.

    A and its complement give the same deviation, so one of each pair is
    checked.

    Raises:
        StateSpaceTooLarge: support above 12 states.
    """
    an = analysis or ChainAnalysis(chain)
    sp = chain.support
    if len(sp) > A3_MAX_STATES:
        raise StateSpaceTooLarge(f"A3 enumeration limited to {A3_MAX_STATES} support states, got {len(sp)}")
    bits = _set_masks(len(sp))
    lags = an.doubling_lags
    ind = np.zeros((len(bits), chain.k))
    ind[:, sp] = bits
    # 1_A^T D 1_A per set, D the deviation table of the joint law
    def dev_at(n):
        D = an.powers.joint(n).deviation
        return np.abs(np.einsum("ai,ij,aj->a", ind, D, ind))

    table = np.stack([dev_at(n) for n in lags], axis=1) if len(bits) else np.zeros((0, len(lags)))
    probe = dev_at(an.cfg.probe_lag) if len(bits) else np.zeros(0)
    rates = {}
    worst_rate, worst_set, worst_status, all_hold = 0.0, (), "vanished", True
    for a in range(len(bits)):
        fit = assess_decay(lags, table[a], probe[a], an.cfg, doubling=True)
        labels = chain.labels(sp[bits[a] > 0])
        rates["{" + ",".join(labels) + "}"] = fit.rate
        if not fit.holds:
            all_hold = False
        if fit.rate > worst_rate or (not fit.holds and worst_status in ("vanished", "decays")):
            worst_rate, worst_set, worst_status = fit.rate, labels, fit.status
    witness = {"worst_set": list(worst_set), "worst_rate": worst_rate, "sets_checked": len(bits)}
    if len(rates) <= 64:
        witness["c_A"] = rates
    status = "holds" if all_hold else worst_status
    summary = f"worst c_A {_short(worst_rate)} at {{{','.join(worst_set)}}}"
    return ConditionReport("A3", all_hold, 1.0 - worst_rate, witness, _window(lags), status, summary)


def check_condition_A2_A3(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> tuple:
    an = analysis or ChainAnalysis(chain)
    return check_condition_A2(chain, an), check_condition_A3(chain, an)


def check_condition_B1(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    """Per-state geometric decay of the total variation distance to mu."""
    an = analysis or ChainAnalysis(chain)
    tv = np.stack([an.tv_by_state(n) for n in an.lags])
    probe = an.tv_by_state(an.cfg.probe_lag)
    theta, G, ok = {}, {}, True
    worst = 0.0
    for col, x in enumerate(chain.support):
        fit = assess_decay(an.lags, tv[:, col], probe[col], an.cfg)
        theta[chain.states[x]] = fit.rate
        G[chain.states[x]] = fit.prefactor
        ok &= fit.holds
        worst = max(worst, fit.rate)
    status = "holds" if ok else ("boundary" if abs(worst - 1) <= an.cfg.guard else "fails")
    return ConditionReport("B1", bool(ok), 1.0 - worst, {"theta": theta, "G": G}, _window(an.lags), status,
                           f"slowest state rate {_short(worst)}")


def check_condition_B2(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    """Uniform rate lambda for ``max_x TV(P^n(x, .), mu)``; G(x) is per-state prefactor at lambda."""
    an = analysis or ChainAnalysis(chain)
    tv = np.stack([an.tv_by_state(n) for n in an.lags])
    probe = float(an.tv_by_state(an.cfg.probe_lag).max()) if tv.size else 0.0
    fit = assess_decay(an.lags, tv.max(axis=1), probe, an.cfg)
    L = np.array(an.lags, dtype=float)
    G = {}
    for col, x in enumerate(chain.support):
        if fit.rate > 0:
            with np.errstate(divide="ignore"):
                g = np.max(np.exp(np.log(np.maximum(tv[:, col], 1e-300)) - L * np.log(fit.rate)))
        else:
            g = float(tv[:, col].max())
        G[chain.states[x]] = float(min(g, 1e300))
    return _decay_report("B2", fit, an.lags, {"lambda": fit.rate, "G": G}, "max_x TV")


def check_condition_B3(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    """Return-probability decay on a small set C: ``|P(X_n in C | X_0 in C) - mu(C)|``.

    Raises:
        NoSmallSetFound: no lag in the window yields a small set.
    """
    an = analysis or ChainAnalysis(chain)
    small = find_small_set(chain, an.cfg.max_lag, an.powers)
    if small is None:
        raise NoSmallSetFound(f"no small set within lags 1..{an.cfg.max_lag}")
    ind = np.zeros(chain.k)
    ind[list(small.indices)] = 1.0
    muC = float(chain.stationary @ ind)

    def s(n):
        return abs(float(ind @ an.powers.joint(n).deviation @ ind)) / muC

    values = [s(n) for n in an.lags]
    fit = assess_decay(an.lags, values, s(an.cfg.probe_lag), an.cfg)
    witness = {"C": list(small.states), "t": small.t, "n": small.n, "mu_C": muC}
    return _decay_report("B3", fit, an.lags, witness, f"small set {{{','.join(small.states)}}}")


def check_condition_B4(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> ConditionReport:
    an = analysis or ChainAnalysis(chain)
    values = [an.beta(n) for n in an.lags]
    fit = assess_decay(an.lags, values, an.beta(an.cfg.probe_lag), an.cfg)
    return _decay_report("B4", fit, an.lags, {}, "beta(n)")


def check_conditions_B(chain: ChainModel, analysis: Optional[ChainAnalysis] = None) -> tuple:
    an = analysis or ChainAnalysis(chain)
    return (check_condition_B1(chain, an), check_condition_B2(chain, an),
            check_condition_B3(chain, an), check_condition_B4(chain, an))


CHECKERS = {
    "R1": check_condition_R1,
    "R2": check_condition_R2,
    "R3": check_condition_R3,
    "R4": check_condition_R4,
    "A1": check_condition_A1,
    "A2": check_condition_A2,
    "A3": check_condition_A3,
    "B1": check_condition_B1,
    "B2": check_condition_B2,
    "B3": check_condition_B3,
    "B4": check_condition_B4,
}


def check_conditions(chain: ChainModel, labels=LABELS, analysis: Optional[ChainAnalysis] = None) -> dict:
    an = analysis or ChainAnalysis(chain)
    out = {}
    for label in labels:
        try:
            out[label] = CHECKERS[label](chain, an)
        except NoSmallSetFound as exc:
            out[label] = ConditionReport(label, False, 0.0, {"error": str(exc)}, (1, an.cfg.max_lag),
                                         "error", str(exc))
    return out


# (scope, from, to). Scope "all" applies to every finite chain.
IMPLICATIONS = (
    ("all", "R1", "R2"),
    ("all", "R2", "R3"),
    ("all", "R3", "R2"),
    ("all", "R3", "A1"),
    ("all", "A1", "A2"),
    ("all", "A2", "A3"),
    ("all", "R4", "R1"),
    ("all", "B4", "A1"),
    ("all", "B1", "B2"),
    ("all", "B2", "B1"),
    ("all", "B2", "B3"),
    ("all", "B3", "B2"),
    ("all", "B3", "B4"),
    ("all", "B4", "B3"),
    ("irreducible", "R3", "B3"),
    ("reversible", "A2", "R1"),
    ("reversible", "A3", "A2"),
    ("reversible", "R1", "R4"),
)

RA_LABELS = ("R1", "R2", "R3", "R4", "A1", "A2", "A3")


@dataclass(frozen=True)
class Implication:
    source: str
    target: str
    scope: str
    consistent: bool

    def to_dict(self) -> dict:
        return {"from": self.source, "to": self.target, "scope": self.scope, "consistent": self.consistent}


@dataclass(frozen=True)
class Equivalence:
    labels: tuple
    scope: str
    consistent: bool

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "scope": self.scope, "consistent": self.consistent}


@dataclass(frozen=True)
class RateMatchingReport:
    r: float
    conditions: dict
    consistent: bool
    beta_bound: bool
    beta_direction_consistent: bool
    witness: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.consistent and self.beta_direction_consistent

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "conditions": self.conditions,
            "consistent": self.consistent,
            "beta_bound": self.beta_bound,
            "beta_direction_consistent": self.beta_direction_consistent,
            "witness": self.witness,
        }


@dataclass(frozen=True)
class VerificationReport:
    chain: dict
    structure: StructureReport
    conditions: tuple
    implications: tuple = ()
    equivalences: tuple = ()
    extras: dict = field(default_factory=dict)
    failures: tuple = ()

    @property
    def overall(self) -> bool:
        return (
            all(i.consistent for i in self.implications)
            and all(e.consistent for e in self.equivalences)
            and not self.failures
        )

    def condition(self, label: str) -> ConditionReport:
        for c in self.conditions:
            if c.label == label:
                return c
        raise KeyError(label)

    def booleans(self) -> dict:
        return {c.label: c.holds for c in self.conditions}

    def to_dict(self) -> dict:
        return {
            "chain": self.chain,
            "structure": self.structure.to_dict(),
            "conditions": {c.label: c.to_dict() for c in self.conditions},
            "implications": [i.to_dict() for i in self.implications],
            "equivalences": [e.to_dict() for e in self.equivalences],
            "extras": self.extras,
            "failures": list(self.failures),
            "overall": "pass" if self.overall else "fail",
        }

    def to_json(self, meta: Optional[dict] = None) -> str:
        doc = {"meta": meta} if meta is not None else {}
        doc.update(self.to_dict())
        return textio.dumps(doc) + "\n"

    def to_text(self, meta: Optional[dict] = None) -> str:
        lines = []
        for key, value in (meta or {}).items():
            lines.append(f"# {key}: {value}")
        s = self.structure
        lines.append(f"chain: k={self.chain.get('k')} sha256={self.chain.get('sha256')}")
        if s.reversible:
            rev = "yes"
        else:
            a, b = s.reversibility_witness
            rev = f"no (witness {a}->{b}, imbalance {s.reversibility_violation:.3e})"
        lines.append(f"reversible: {rev}")
        lines.append(f"irreducible: {'yes' if s.irreducible else 'no'}  period: {s.period}")
        if self.conditions:
            lines.append("")
            lines.append(f"{'cond':<5} {'holds':<6} {'status':<9} {'margin':>12}  details")
            for c in self.conditions:
                lines.append(f"{c.label:<5} {'yes' if c.holds else 'no':<6} {c.status:<9} {_short(c.margin):>12}  {c.summary}")
        if self.implications:
            lines.append("")
            lines.append("implications:")
            for i in self.implications:
                lines.append(f"  {i.source} => {i.target} [{i.scope}]: {'ok' if i.consistent else 'VIOLATED'}")
        for e in self.equivalences:
            lines.append(f"  equal({','.join(e.labels)}) [{e.scope}]: {'ok' if e.consistent else 'VIOLATED'}")
        for name, extra in self.extras.items():
            lines.append("")
            lines.append(f"{name}: {textio.dumps(extra, indent=0).replace(chr(10), ' ')}")
        for f in self.failures:
            lines.append(f"FAILED: {f}")
        lines.append("")
        lines.append(f"overall: {'PASS' if self.overall else 'FAIL'}")
        return "\n".join(lines) + "\n"


def check_implication_lattice(chain: ChainModel, reports, structure: Optional[StructureReport] = None) -> tuple:
    """(implications, equivalences) applicable to this chain.

    An implication is inconsistent when its source holds and its target
    fails. Reversible chains also get the seven R/A booleans compared, and
    reversible irreducible chains all eleven.
    """
    if isinstance(reports, dict):
        reports = list(reports.values())
    holds = {r.label: r.holds for r in reports}
    s = structure or check_structure(chain)
    scopes = {"all"}
    if s.irreducible:
        scopes.add("irreducible")
    if s.reversible:
        scopes.add("reversible")
    imps = []
    for scope, a, b in IMPLICATIONS:
        if scope in scopes and a in holds and b in holds:
            imps.append(Implication(a, b, scope, not (holds[a] and not holds[b])))
    eqs = []
    if s.reversible:
        ra = [l for l in RA_LABELS if l in holds]
        eqs.append(Equivalence(tuple(ra), "reversible", len({holds[l] for l in ra}) <= 1))
        if s.irreducible:
            allv = [l for l in LABELS if l in holds]
            eqs.append(Equivalence(tuple(allv), "reversible+irreducible", len({holds[l] for l in allv}) <= 1))
    return tuple(imps), tuple(eqs)


def _scaled_tail(an: ChainAnalysis, base: float, start: int, max_exp: int = 64) -> dict:
    """Largest ``coefficient(2^j) / base^(2^j)`` over doubling lags past ``start``.

    The centered transition matrix is divided by ``base`` before squaring, so
    the ratios are formed without underflow. All three coefficients are
    positively homogeneous in the deviation table. Squaring stops once the
    scaled matrix has died out or blown up.
    """
    chain = an.chain
    sp = chain.support
    mu = chain.stationary[sp]
    scale = np.sqrt(np.outer(mu, mu))
    E = chain.centered_transition()[np.ix_(sp, sp)] / base
    out = {"rho": 0.0, "alpha": 0.0, "beta": 0.0, "lags": []}
    for j in range(max_exp + 1):
        if j:
            E = E @ E
        size = float(np.abs(E).max()) if E.size else 0.0
        if (1 << j) > start and size > 0:
            D = mu[:, None] * E
            joint = JointDistribution(1 << j, D, mu, D)
            out["rho"] = max(out["rho"], float(np.linalg.svd(D / scale, compute_uv=False)[0]))
            out["alpha"] = max(out["alpha"], alpha_coefficient(joint))
            out["beta"] = max(out["beta"], float(0.5 * np.abs(D).sum()))
            out["lags"].append(1 << j)
        if size < 1e-100 or size > 1e100:
            break
    return out


def check_rate_matching(chain: ChainModel, r: float, m: int = 5,
                        analysis: Optional[ChainAnalysis] = None) -> RateMatchingReport:
    """Evaluate the four equivalent rate conditions for a given r in (0, 1).

    (i) rho(1) <= r; (ii) rho(n) <= r^n on the window; (iii) alpha(n) <= r^n
    on the window; (iv) alpha(2^j) <= r^(2^j) for j <= m, i.e. the doubling
    bound with constant 1. Comparisons use the guard band. Since (ii)-(iv)
    quantify over all n, they are also checked at doubling lags past the
    window, as ratios to ``(r + guard)^n`` (see :func:`_scaled_tail`). Also checked:
    an observed bound beta(n) <= r^n must come with (i).

    Raises:
        NotReversible: the equivalence needs detailed balance.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    an = analysis or ChainAnalysis(chain)
    if not an.structure.reversible:
        raise NotReversible("rate matching needs a reversible chain")
    g = an.cfg.guard
    reff = r + g
    lags = np.array(an.lags, dtype=float)
    rn = r ** lags
    rho = np.array([an.rho(n) for n in an.lags])
    alpha = np.array([an.alpha(n) for n in an.lags])
    beta = np.array([an.beta(n) for n in an.lags])
    dl = [1 << j for j in range(m + 1)]
    alpha_d = np.array([an.alpha(n) for n in dl])
    # "for all n" reaches past the window: ratios to (r + guard)^n at
    # doubling lags, formed on the scaled matrix
    tail = _scaled_tail(an, reff, max(an.cfg.max_lag, dl[-1]))
    slack = 1 + g
    conds = {
        "i": bool(rho[0] <= reff),
        "ii": bool(np.all(rho <= rn + g) and tail["rho"] <= slack),
        "iii": bool(np.all(alpha <= rn + g) and tail["alpha"] <= slack),
        "iv": bool(np.all(alpha_d <= reff ** np.array(dl, dtype=float)) and tail["alpha"] <= slack),
    }
    consistent = len(set(conds.values())) == 1
    beta_bound = bool(np.all(beta <= rn + g) and tail["beta"] <= slack)
    witness = {
        "rho1": float(rho[0]),
        "max_rho_excess": float(np.max(rho - rn)),
        "max_alpha_excess": float(np.max(alpha - rn)),
        "max_doubling_excess": float(np.max(alpha_d - reff ** np.array(dl, dtype=float))),
        "tail_ratios": {k: tail[k] for k in ("rho", "alpha", "beta")},
        "tail_lags": [tail["lags"][0], tail["lags"][-1]] if tail["lags"] else [],
    }
    return RateMatchingReport(float(r), conds, consistent, beta_bound, (not beta_bound) or conds["i"], witness)


def check_spectral_bound(chain: ChainModel, m: int = 5, analysis: Optional[ChainAnalysis] = None) -> dict:
    """``|J_{2^n}(A x B) - mu(A) mu(B)| <= R(S)^(2^n)`` for all A, B and n <= m.

    The left side maximized over A, B is alpha(2^n), so the exhaustive check
    is a comparison of alpha against R(S).
    """
    from .spectral import slem_and_gap

    an = analysis or ChainAnalysis(chain)
    summary = slem_and_gap(chain, m, powers=an.powers)
    if not summary.reversible or summary.R_of_S is None:
        return {"applicable": False, "ok": True}
    R = summary.R_of_S
    worst = 0.0
    ok = True
    for j in range(m + 1):
        n = 1 << j
        excess = an.alpha(n) - R ** n
        worst = max(worst, excess)
        ok &= excess <= 1e-10
    return {
        "applicable": True,
        "ok": bool(ok),
        "R_of_S": R,
        "slem": summary.slem,
        "gap": summary.gap,
        "R_equals_slem": summary.R_equals_slem,
        "max_excess": worst,
    }


def chain_summary(chain: ChainModel) -> dict:
    digest = hashlib.sha256(chain_to_json(chain).encode()).hexdigest()
    return {"k": chain.k, "states": list(chain.states), "sha256": digest}


def verify_chain(chain: ChainModel, cfg: VerifyConfig = VerifyConfig(), checks=None,
                 rate: Optional[float] = None) -> VerificationReport:
    """Run the selected checks and assemble a report.

    ``checks`` is a subset of {"structure", "R", "A", "B", "lattice",
    "power-law", "rate-matching", "spectral-bound"}; default all. The report
    fails when an implication or equivalence is violated, or when a check
    with a built-in assertion (power law, rate matching, spectral bound)
    does not pass. Conditions that simply do not hold are not failures.
    """
    checks = set(checks or ("structure", "R", "A", "B", "lattice", "power-law", "rate-matching", "spectral-bound"))
    an = ChainAnalysis(chain, cfg)
    s = an.structure
    labels = []
    if "lattice" in checks:
        labels = list(LABELS)
    else:
        for fam in ("R", "A", "B"):
            if fam in checks:
                labels += [l for l in LABELS if l[0] == fam]
    if "power-law" in checks and "R4" not in labels:
        labels.append("R4")
        labels.sort(key=LABELS.index)
    reports = check_conditions(chain, labels, an)
    imps, eqs = ((), ())
    if "lattice" in checks:
        imps, eqs = check_implication_lattice(chain, reports, s)
    extras, failures = {}, []
    if "power-law" in checks:
        w = reports["R4"].witness
        extras["power_law"] = {"identity_holds": w["identity_holds"], "max_deviation": w["max_deviation"],
                               "witness": w["text"]}
        if not w["identity_holds"]:
            failures.append("power law: " + w["text"])
    if "rate-matching" in checks:
        if s.reversible:
            r1 = an.rho(1)
            r = rate if rate is not None else (r1 if cfg.guard < r1 < 1 - cfg.guard else 0.5)
            rm = check_rate_matching(chain, r, cfg.max_doubling, an)
            extras["rate_matching"] = rm.to_dict()
            if not rm.ok:
                failures.append(f"rate matching disagrees at r={_short(r)}: {rm.conditions}")
        else:
            extras["rate_matching"] = {"applicable": False}
    if "spectral-bound" in checks:
        try:
            sb = check_spectral_bound(chain, cfg.max_doubling, an)
        except InvariantViolation as exc:
            sb = {"applicable": True, "ok": False, "error": str(exc)}
        extras["spectral_bound"] = sb
        if not sb["ok"]:
            failures.append("spectral bound violated")
    return VerificationReport(
        chain=chain_summary(chain),
        structure=s,
        conditions=tuple(reports[l] for l in labels),
        implications=imps,
        equivalences=eqs,
        extras=extras,
        failures=tuple(failures),
    )
