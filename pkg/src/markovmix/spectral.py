"""
The chain as an operator on L^2(mu): doubling-lag correlations, r(g),
centered indicators, R(D), SLEM and spectral gap.

For a reversible chain ``S = D^{1/2} P D^{-1/2}`` (D = diag(mu) on the
support) is symmetric. A score g maps to ``a = sqrt(mu) * g`` and

    E[g(X_0) g(X_n)] = sum_e <a, v_e>^2 lambda_e^n,

so at even lags the correlations are nonnegative and ``c_n^(1/2^n)``
increases to the largest ``|lambda_e|`` among eigencomponents present in g.
That closed form is what :func:`r_of_g` returns for reversible chains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import textio
from .chain import ChainModel, ChainPowers, check_reversibility
from .errors import InvariantViolation, NotReversible, ScoreOutOfUnitBall, SubsetTooLarge
from .mixing import rho_coefficient

SUBSET_MAX_STATES = 20
CLUSTER_TOL = 1e-9
PRESENCE_TOL = 1e-9
UNIT_BALL_TOL = 1e-12
ABS_WEIGHT_FLOOR = 1e-24


@dataclass(frozen=True)
class ScoreFunction:
    """A real function on the states, with mean and L^2 norm under mu."""

    values: np.ndarray
    mean: float
    norm2: float

    @classmethod
    def from_values(cls, chain: ChainModel, values) -> "ScoreFunction":
        g = np.array(values, dtype=float)
        if g.shape != (chain.k,):
            raise ValueError(f"score needs {chain.k} values, got shape {g.shape}")
        g.setflags(write=False)
        mu = chain.stationary
        return cls(g, float(mu @ g), float(np.sqrt(mu @ (g * g))))

    @property
    def in_unit_ball(self) -> bool:
        return self.norm2 <= 1 + UNIT_BALL_TOL

    @property
    def in_centered_unit_ball(self) -> bool:
        return self.in_unit_ball and abs(self.mean) <= 1e-12

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "mean": self.mean, "norm2": self.norm2}


def indicator(chain: ChainModel, A: Iterable) -> np.ndarray:
    v = np.zeros(chain.k)
    v[chain.indices(A)] = 1.0
    return v


def centered_indicator(chain: ChainModel, A: Iterable) -> ScoreFunction:
    """``J_A = I_A - mu(A)``, given A as state labels."""
    ind = indicator(chain, A)
    return ScoreFunction.from_values(chain, ind - chain.stationary @ ind)


def normalized(chain: ChainModel, g: ScoreFunction) -> ScoreFunction:
    """Centered and scaled to unit L^2 norm (zero stays zero)."""
    f = g.values - g.mean
    s = float(np.sqrt(chain.stationary @ (f * f)))
    return ScoreFunction.from_values(chain, f / s if s > 0 else f)


def expectation_product(chain: ChainModel, g: ScoreFunction, h: ScoreFunction, n: int,
                        powers: Optional[ChainPowers] = None) -> float:
    """``E[g(X_0) h(X_n)]`` as the bilinear form against J_n.

    Split as ``E g * E h + g^T (J_n - mu mu^T) h`` so small covariances keep
    their relative accuracy.
    """
    powers = powers or ChainPowers(chain)
    D = powers.joint(n).deviation
    return float(g.mean * h.mean + g.values @ D @ h.values)


def _require_reversible(chain: ChainModel, what: str):
    rev = check_reversibility(chain)
    if not rev.reversible:
        raise NotReversible(
            f"{what} needs a reversible chain; detailed balance fails at {rev.witness} "
            f"(imbalance {rev.violation:.3e})"
        )


def backward_conditional_mean(chain: ChainModel, f: ScoreFunction, m: int,
                              powers: Optional[ChainPowers] = None) -> np.ndarray:
    """``s -> E[f(X_0) | X_m = s]`` on the support (nan off the support)."""
    powers = powers or ChainPowers(chain)
    mu = chain.stationary
    Pm = powers.transition_power(m)
    out = np.full(chain.k, np.nan)
    sp = chain.support
    out[sp] = (f.values * mu) @ Pm[:, sp] / mu[sp]
    return out


def conditional_mean_check(chain: ChainModel, f: ScoreFunction, m: int,
                           powers: Optional[ChainPowers] = None) -> float:
    """max over support states of ``|E[f(X_2m) | X_m] - E[f(X_0) | X_m]|``.

    By the Markov property the first is ``P^m f``; the second is the
    time-reversed mean. They coincide for reversible chains.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    _require_reversible(chain, "conditional_mean_check")
    powers = powers or ChainPowers(chain)
    sp = chain.support
    forward = powers.transition_power(m) @ f.values
    backward = backward_conditional_mean(chain, f, m, powers)
    return float(np.max(np.abs(forward[sp] - backward[sp]))) if len(sp) else 0.0


class SymmetricOperator:
    """Eigendecomposition of ``D^{1/2} P D^{-1/2}`` on the support of a reversible chain."""

    def __init__(self, chain: ChainModel):
        self.chain = chain
        self.support = chain.support
        mu = chain.stationary[self.support]
        self.sqrt_mu = np.sqrt(mu)
        P = chain.transition[np.ix_(self.support, self.support)]
        S = self.sqrt_mu[:, None] * P / self.sqrt_mu[None, :]
        S = 0.5 * (S + S.T)
        w, V = np.linalg.eigh(S)
        order = np.argsort(-w, kind="stable")
        self.eigenvalues = w[order]
        self.vectors = V[:, order]
        self.clusters = self._cluster(self.eigenvalues)

    @staticmethod
    def _cluster(w: np.ndarray) -> list:
        groups = []
        for i, lam in enumerate(w):
            if groups and abs(w[groups[-1][-1]] - lam) <= CLUSTER_TOL:
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups

    def cluster_weights(self, scores: np.ndarray) -> np.ndarray:
        """Squared projection of each score row onto each eigen-cluster.

        ``scores`` holds function values on the support, shape (..., m).
        """
        coeff = (scores * self.sqrt_mu) @ self.vectors
        return np.stack([np.sum(coeff[..., c] ** 2, axis=-1) for c in self.clusters], axis=-1)

    def cluster_moduli(self) -> np.ndarray:
        return np.array([np.abs(self.eigenvalues[c]).max() for c in self.clusters])

    def rates(self, scores: np.ndarray) -> tuple:
        """(rate, top weight, total weight) per score row.

        The rate is the largest ``|lambda|`` over clusters carrying more than
        ``PRESENCE_TOL`` of the score norm; top weight is the squared mass on
        clusters attaining it.
        """
        weights = self.cluster_weights(scores)
        total = weights.sum(axis=-1)
        # relative presence test, with an absolute floor so rounding residue
        # of an identically zero score does not register
        present = weights > np.maximum((PRESENCE_TOL ** 2) * total[..., None], ABS_WEIGHT_FLOOR)
        mod = self.cluster_moduli()
        rate = np.where(present, mod, -1.0).max(axis=-1)
        rate = np.maximum(rate, 0.0)
        at_top = present & (np.abs(mod - rate[..., None]) <= CLUSTER_TOL)
        top = np.where(at_top, weights, 0.0).sum(axis=-1)
        return rate, top, total


@dataclass(frozen=True)
class DoublingDiagnostics:
    """Correlations ``c_n = E[g(X_0) g(X_{2^n})]`` for n = 0..m and their roots."""

    g: ScoreFunction
    lags: tuple
    correlations: tuple
    roots: tuple
    r_window: float
    r_spectral: Optional[float]
    r_of_g: float
    reversible: bool
    nonnegative: bool
    roots_nondecreasing: bool

    def to_dict(self) -> dict:
        return {
            "g": self.g.to_dict(),
            "lags": list(self.lags),
            "correlations": list(self.correlations),
            "roots": list(self.roots),
            "r_window": self.r_window,
            "r_spectral": self.r_spectral,
            "r_of_g": self.r_of_g,
            "reversible": self.reversible,
            "nonnegative": self.nonnegative,
            "roots_nondecreasing": self.roots_nondecreasing,
        }

    def to_json(self) -> str:
        return textio.dumps(self.to_dict()) + "\n"


def _roots(corr: np.ndarray, lags: np.ndarray, neg_tol: float = 1e-12) -> np.ndarray:
    out = np.full(len(corr), np.nan)
    ok = corr >= -neg_tol
    out[ok] = np.maximum(corr[ok], 0.0) ** (1.0 / lags[ok])
    return out


def _window_rate(roots: np.ndarray) -> float:
    tail = roots[1:] if len(roots) > 1 else roots
    tail = tail[~np.isnan(tail)]
    return float(tail.max()) if len(tail) else float("nan")


def doubling_diagnostics(chain: ChainModel, g: ScoreFunction, m: int = 5,
                         powers: Optional[ChainPowers] = None,
                         operator: Optional[SymmetricOperator] = None) -> DoublingDiagnostics:
    """Doubling-lag correlation sequence of g and its decay rate r(g).

    For reversible chains the sequence must be nonnegative at even lags
    (n >= 1) and its roots nondecreasing; a violation raises
    InvariantViolation. The spectral rate is authoritative there and the
    window is checked against it through the bounds
    ``w_top r^(2^n) <= c_n <= |g|^2 r^(2^n)``. Non-reversible chains get the
    raw sequence; negative correlations show up as nan roots.

    Raises:
        ScoreOutOfUnitBall: if the L^2 norm of g exceeds 1.
    """
    if g.norm2 > 1 + UNIT_BALL_TOL:
        raise ScoreOutOfUnitBall(f"|g|_2 = {g.norm2!r} > 1")
    if m < 0:
        raise ValueError("m must be nonnegative")
    powers = powers or ChainPowers(chain)
    lags = np.array([1 << n for n in range(m + 1)], dtype=float)
    corr = np.array([expectation_product(chain, g, g, int(L), powers) for L in lags])
    roots = _roots(corr, lags)
    r_window = _window_rate(roots)
    reversible = check_reversibility(chain).reversible
    nonneg = bool(np.all(corr[1:] >= -1e-12))
    even_roots = roots[1:]
    mono = bool(np.all(np.diff(even_roots) >= -1e-10)) if nonneg else False
    r_spec = None
    if reversible:
        if not nonneg:
            raise InvariantViolation(f"negative even-lag correlation {corr[1:].min()!r} on a reversible chain")
        if not mono or np.any(even_roots > 1 + 1e-10):
            raise InvariantViolation("doubling roots are not nondecreasing within [0, 1]")
        op = operator or SymmetricOperator(chain)
        rate, top, total = op.rates(g.values[op.support])
        r_spec = float(rate)
        _check_window_against_rate(corr[1:], lags[1:], r_spec, float(top), float(total))
    r = r_spec if r_spec is not None else r_window
    return DoublingDiagnostics(
        g=g,
        lags=tuple(int(L) for L in lags),
        correlations=tuple(float(c) for c in corr),
        roots=tuple(float(x) for x in roots),
        r_window=r_window,
        r_spectral=r_spec,
        r_of_g=float(r),
        reversible=reversible,
        nonnegative=nonneg,
        roots_nondecreasing=mono,
    )


def _check_window_against_rate(corr, lags, r, top, total, slack=1e-12):
    upper = total * r ** lags + slack
    lower = top * np.maximum(r - CLUSTER_TOL, 0.0) ** lags * (1 - 1e-9) - slack
    if np.any(corr > upper) or np.any(corr < lower):
        raise InvariantViolation(f"doubling correlations {corr.tolist()} inconsistent with spectral rate {r!r}")


def r_of_g(chain: ChainModel, g: ScoreFunction, m: int = 5) -> float:
    return doubling_diagnostics(chain, g, m).r_of_g


def r_of_centered_indicator(chain: ChainModel, A: Iterable, m: int = 5,
                            powers: Optional[ChainPowers] = None,
                            operator: Optional[SymmetricOperator] = None) -> float:
    """``r(J_A)`` for the centered indicator of the state set A (labels)."""
    return doubling_diagnostics(chain, centered_indicator(chain, A), m, powers, operator).r_of_g


@dataclass(frozen=True)
class SubsetRate:
    value: float
    maximizer: tuple


def _subset_rates_table(chain: ChainModel, D_idx: np.ndarray, m: int,
                        powers: ChainPowers, operator: Optional[SymmetricOperator]):
    """r(J_A) for every A inside the index set D_idx; row i is the bitmask i."""
    d = len(D_idx)
    if d > SUBSET_MAX_STATES:
        raise SubsetTooLarge(f"subset enumeration limited to {SUBSET_MAX_STATES} support states, got {d}")
    mu = chain.stationary
    masks = np.arange(1 << d, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(d)) & 1).astype(float)
    ind = np.zeros((len(masks), chain.k))
    ind[:, D_idx] = bits
    G = ind - (ind @ mu)[:, None]
    lags = np.array([1 << n for n in range(m + 1)], dtype=float)
    corr = np.stack([np.einsum("ai,ij,aj->a", G, powers.joint(int(L)).deviation, G) for L in lags], axis=1)
    if operator is not None:
        rate, top, total = operator.rates(G[:, operator.support])
        if np.any(corr[:, 1:] < -1e-12):
            raise InvariantViolation("negative even-lag correlation on a reversible chain")
        for a in range(len(masks)):
            _check_window_against_rate(corr[a, 1:], lags[1:], rate[a], top[a], total[a])
        return rate
    roots = np.stack([_roots(c, lags) for c in corr])
    tail = roots[:, 1:] if m >= 1 else roots
    return np.where(np.isnan(tail), -np.inf, tail).max(axis=1).clip(min=0.0)


def subset_rate_table(chain: ChainModel, D: Optional[Iterable] = None, m: int = 5,
                      powers: Optional[ChainPowers] = None) -> tuple:
    """(support indices of D, array of r(J_A) indexed by bitmask over them)."""
    sp = set(chain.support.tolist())
    D_idx = chain.support if D is None else np.array(sorted(i for i in chain.indices(D) if i in sp), dtype=int)
    powers = powers or ChainPowers(chain)
    op = SymmetricOperator(chain) if check_reversibility(chain).reversible else None
    return D_idx, _subset_rates_table(chain, D_idx, m, powers, op)


def R_of_subset(chain: ChainModel, D: Iterable, m: int = 5,
                powers: Optional[ChainPowers] = None) -> SubsetRate:
    """``R(D) = max r(J_A)`` over A inside D, with a maximizing A.

    States of D outside the support change J_A only on a null set, so the
    enumeration runs over D intersected with the support.

    Raises:
        SubsetTooLarge: when that intersection has more than 20 states.
    """
    D_idx, rates = subset_rate_table(chain, D, m, powers)
    best = int(np.argmax(rates))
    A = tuple(int(D_idx[b]) for b in range(len(D_idx)) if best >> b & 1)
    return SubsetRate(float(rates[best]), chain.labels(A))


@dataclass(frozen=True)
class SpectralSummary:
    reversible: bool
    rho1: float
    eigenvalues: Optional[tuple] = None
    slem: Optional[float] = None
    gap: Optional[float] = None
    R_of_S: Optional[float] = None
    R_maximizer: Optional[tuple] = None
    R_equals_slem: Optional[bool] = None
    R_by_subset: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "reversible": self.reversible,
            "rho1": self.rho1,
            "eigenvalues": list(self.eigenvalues) if self.eigenvalues is not None else None,
            "slem": self.slem,
            "gap": self.gap,
            "R_of_S": self.R_of_S,
            "R_maximizer": list(self.R_maximizer) if self.R_maximizer is not None else None,
            "R_equals_slem": self.R_equals_slem,
            "R_by_subset": {k: v for k, v in self.R_by_subset.items()},
        }

    def to_json(self) -> str:
        return textio.dumps(self.to_dict()) + "\n"


def slem_and_gap(chain: ChainModel, m: int = 5, subsets: Iterable = (),
                 powers: Optional[ChainPowers] = None) -> SpectralSummary:
    """Spectrum of the self-adjoint transition operator and the derived gap.

    One copy of the eigenvalue closest to 1 is the Perron value; the SLEM is
    the largest modulus among the rest. It must equal rho(1) to 1e-9. R(S) is
    added when the support has at most 20 states, and is checked to stay
    below the SLEM; whether the two coincide is only reported. Non-reversible
    chains get rho(1) alone.
    """
    powers = powers or ChainPowers(chain)
    rho1 = rho_coefficient(powers.joint(1))
    if not check_reversibility(chain).reversible:
        return SpectralSummary(False, rho1)
    op = SymmetricOperator(chain)
    w = op.eigenvalues
    rest = np.delete(w, int(np.argmin(np.abs(w - 1.0))))
    slem = float(np.abs(rest).max()) if len(rest) else 0.0
    slem = min(slem, 1.0)
    if abs(slem - rho1) > 1e-9:
        raise InvariantViolation(f"SLEM {slem!r} differs from rho(1) {rho1!r}")
    R = Rmax = eq = None
    if len(op.support) <= SUBSET_MAX_STATES:
        rates = _subset_rates_table(chain, op.support, m, powers, op)
        best = int(np.argmax(rates))
        R = float(rates[best])
        Rmax = chain.labels(tuple(int(op.support[b]) for b in range(len(op.support)) if best >> b & 1))
        if R > slem + 1e-9:
            raise InvariantViolation(f"R(S) = {R!r} exceeds SLEM {slem!r}")
        eq = abs(R - slem) <= 1e-9
    by_subset = {}
    for D in subsets:
        labels = tuple(D)
        by_subset["{" + ",".join(labels) + "}"] = R_of_subset(chain, labels, m, powers).value
    return SpectralSummary(
        reversible=True,
        rho1=rho1,
        eigenvalues=tuple(float(x) for x in w),
        slem=slem,
        gap=1.0 - slem,
        R_of_S=R,
        R_maximizer=Rmax,
        R_equals_slem=eq,
        R_by_subset=by_subset,
    )
