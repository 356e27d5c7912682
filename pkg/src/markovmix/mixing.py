"""
Dependence coefficients between X_0 and X_n.

For a stationary Markov chain the coefficients between past and future
sigma-fields reduce to the two coordinates (X_0, X_n), so all three are
functions of the joint table ``J_n`` alone:

* alpha: ``max |J(A x B) - mu(A) mu(B)|`` over pairs of state sets,
* rho:   the maximal correlation = top singular value of the centered kernel
  ``Q(i,j) = (J(i,j) - mu_i mu_j) / sqrt(mu_i mu_j)``,
* beta:  ``1/2 sum |J(i,j) - mu_i mu_j|`` (the atom partition is optimal).

The ``*_oracle`` / ``*_exhaustive`` functions are deliberately naive
reference routes used by the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import textio
from .chain import ChainModel, ChainPowers, JointDistribution
from .errors import InvariantViolation, StateSpaceTooLarge

ALPHA_MAX_STATES = 24
_CHUNK = 1 << 14


def _support_blocks(joint: JointDistribution):
    sp = joint.support
    mu = joint.marginal[sp]
    return sp, mu, joint.table[np.ix_(sp, sp)], joint.deviation[np.ix_(sp, sp)]


def beta_coefficient(joint: JointDistribution) -> float:
    """Absolute regularity coefficient of (X_0, X_n)."""
    return float(0.5 * np.abs(joint.deviation).sum())


def _bit_rows(masks: np.ndarray, width: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(width)) & 1).astype(float)


@dataclass(frozen=True)
class AlphaWitness:
    value: float
    A: tuple
    B: tuple


def alpha_witness(joint: JointDistribution) -> AlphaWitness:
    """alpha(X_0, X_n) together with a maximizing pair of index sets.

    Every subset A of the support is enumerated (only those avoiding the last
    support state: the complement flips the sign of the column sums). For a
    fixed A the objective is additive in the columns, so the best B collects
    the columns with positive (or all with negative) sum
    ``d_j = sum_{i in A} (J(i,j) - mu_i mu_j)``.
    """
    sp, _, _, D = _support_blocks(joint)
    m = len(sp)
    if m > ALPHA_MAX_STATES:
        raise StateSpaceTooLarge(f"alpha enumeration needs at most {ALPHA_MAX_STATES} support states, got {m}")
    if m <= 1:
        return AlphaWitness(0.0, (), ())
    width = m - 1
    best, best_mask, best_sign = -1.0, 0, 1
    for start in range(0, 1 << width, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, 1 << width), dtype=np.int64)
        d = _bit_rows(masks, width) @ D[:width, :]
        pos = np.where(d > 0, d, 0.0).sum(axis=1)
        neg = -np.where(d < 0, d, 0.0).sum(axis=1)
        for arr, sign in ((pos, 1), (neg, -1)):
            i = int(np.argmax(arr))
            if arr[i] > best:
                best, best_mask, best_sign = float(arr[i]), int(masks[i]), sign
    A = [a for a in range(width) if best_mask >> a & 1]
    d = D[A, :].sum(axis=0) if A else np.zeros(m)
    B = np.flatnonzero(d > 0) if best_sign > 0 else np.flatnonzero(d < 0)
    return AlphaWitness(best, tuple(int(sp[a]) for a in A), tuple(int(sp[b]) for b in B))


def alpha_coefficient(joint: JointDistribution) -> float:
    """Strong mixing coefficient of (X_0, X_n); at most 24 support states."""
    return alpha_witness(joint).value


def alpha_exhaustive(joint: JointDistribution) -> float:
    """Reference alpha: all 2^k x 2^k set pairs, no greedy inner step."""
    sp, _, _, D = _support_blocks(joint)
    m = len(sp)
    if m > 12:
        raise StateSpaceTooLarge("exhaustive alpha oracle is limited to 12 states")
    bits = _bit_rows(np.arange(1 << m, dtype=np.int64), m)
    return float(np.abs(bits @ D @ bits.T).max())


def set_partitions(items):
    """Yield all set partitions of ``items`` as lists of lists."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def beta_partition_oracle(joint: JointDistribution) -> float:
    """Reference beta: supremum over all pairs of finite partitions of the states."""
    k = joint.k
    if k > 6:
        raise StateSpaceTooLarge("partition oracle is limited to 6 states")
    J = joint.table
    mu = joint.marginal
    parts = list(set_partitions(range(k)))
    best = 0.0
    for pa in parts:
        for pb in parts:
            s = 0.0
            for A in pa:
                for B in pb:
                    s += abs(J[np.ix_(A, B)].sum() - mu[A].sum() * mu[B].sum())
            best = max(best, 0.5 * s)
    return best


def rho_coefficient(joint: JointDistribution) -> float:
    """Maximal correlation of (X_0, X_n).

    The score substitution ``a_i = g(i) sqrt(mu_i)`` turns the variational
    problem into the top singular value of ``Q``. The same number is the
    second singular value of the uncentered ``M(i,j) = J(i,j)/sqrt(mu_i mu_j)``;
    both are computed and must agree to 1e-10.
    """
    sp, mu, J, D = _support_blocks(joint)
    if len(sp) <= 1:
        return 0.0
    scale = np.sqrt(np.outer(mu, mu))
    centered = np.linalg.svd(D / scale, compute_uv=False)[0]
    uncentered = np.linalg.svd(J / scale, compute_uv=False)[1]
    if abs(centered - uncentered) > 1e-10:
        raise InvariantViolation(
            f"centered ({centered!r}) and uncentered ({uncentered!r}) maximal correlation disagree"
        )
    return float(min(max(centered, 0.0), 1.0))


def rho_bruteforce_oracle(joint: JointDistribution, restarts: int = 8, seed: int = 0,
                          max_iter: int = 100_000) -> float:
    """Maximal correlation by alternating maximization of E[g(X_0) h(X_n)].

    With g fixed the best unit-variance, mean-zero h is the normalized
    conditional mean ``E[g(X_0) | X_n]``, and symmetrically for g. Each start
    is a seeded Gaussian score; the best value over restarts is returned. The
    result is a lower bound on the true supremum.
    """
    sp, mu, J, _ = _support_blocks(joint)
    if len(sp) <= 1:
        return 0.0
    rng = np.random.default_rng(seed)

    def normalize(f):
        f = f - mu @ f
        norm = math.sqrt(max(float(mu @ (f * f)), 0.0))
        return f / norm if norm > 1e-300 else None

    best = 0.0
    for _ in range(restarts):
        g = normalize(rng.standard_normal(len(sp)))
        value = 0.0
        stall = 0
        for _ in range(max_iter):
            h = normalize((J.T @ g) / mu)
            if h is None:
                break
            new = float(g @ J @ h)
            g_next = normalize((J @ h) / mu)
            if g_next is None:
                value = max(value, new)
                break
            g = g_next
            stall = stall + 1 if new - value <= 1e-16 else 0
            value = max(value, new)
            if stall >= 3:
                break
        best = max(best, value)
    return best


@dataclass(frozen=True)
class MixingProfile:
    """Per-lag (alpha, rho, beta) on contiguous lags 1..N plus doubling lags."""

    lags: tuple
    alpha: tuple
    rho: tuple
    beta: tuple

    def at(self, lag: int) -> tuple:
        i = self.lags.index(lag)
        return self.alpha[i], self.rho[i], self.beta[i]

    def rows(self):
        return zip(self.lags, self.alpha, self.rho, self.beta)

    def check(self, tol: float = 1e-10, mono_tol: float = 1e-12) -> None:
        """Raise InvariantViolation unless bounds, ordering and monotonicity hold."""
        for lag, a, r, b in self.rows():
            if not (-tol <= a <= 0.25 + tol and -tol <= r <= 1 + tol and -tol <= b <= 1 + tol):
                raise InvariantViolation(f"lag {lag}: coefficient out of range ({a}, {r}, {b})")
            if 4 * a > r + tol:
                raise InvariantViolation(f"lag {lag}: 4 alpha = {4 * a!r} > rho = {r!r}")
            if 2 * a > b + tol:
                raise InvariantViolation(f"lag {lag}: 2 alpha = {2 * a!r} > beta = {b!r}")
        for name in ("alpha", "rho", "beta"):
            seq = getattr(self, name)
            for i in range(1, len(seq)):
                if seq[i] > seq[i - 1] + mono_tol:
                    raise InvariantViolation(
                        f"{name} increases from lag {self.lags[i - 1]} to {self.lags[i]}"
                    )

    def to_dict(self) -> dict:
        return {
            "lags": list(self.lags),
            "alpha": list(self.alpha),
            "rho": list(self.rho),
            "beta": list(self.beta),
        }

    def to_csv(self, meta: Optional[dict] = None) -> str:
        lines = []
        for key, value in (meta or {}).items():
            lines.append(f"# {key}: {value}")
        lines.append("lag,alpha,rho,beta")
        for lag, a, r, b in self.rows():
            lines.append(f"{lag},{textio.fmt(a)},{textio.fmt(r)},{textio.fmt(b)}")
        return "\n".join(lines) + "\n"

    def to_json(self, meta: Optional[dict] = None) -> str:
        doc = {"meta": meta} if meta is not None else {}
        doc.update(self.to_dict())
        return textio.dumps(doc) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "MixingProfile":
        return cls(tuple(doc["lags"]), tuple(doc["alpha"]), tuple(doc["rho"]), tuple(doc["beta"]))


def profile_lags(max_lag: int, max_doubling: int) -> tuple:
    return tuple(sorted(set(range(1, max_lag + 1)) | {1 << j for j in range(max_doubling + 1)}))


def mixing_profile(chain: ChainModel, max_lag: int = 32, max_doubling: int = 5,
                   powers: Optional[ChainPowers] = None) -> MixingProfile:
    """alpha, rho, beta at lags 1..max_lag and 2^0..2^max_doubling.

    The profile invariants (ranges, ``4 alpha <= rho``, ``2 alpha <= beta``,
    monotone decrease) are checked before returning.
    """
    if max_lag < 1:
        raise ValueError("max_lag must be at least 1")
    powers = powers or ChainPowers(chain)
    lags = profile_lags(max_lag, max_doubling)
    alpha, rho, beta = [], [], []
    for n in lags:
        joint = powers.joint(n)
        alpha.append(alpha_coefficient(joint))
        rho.append(rho_coefficient(joint))
        beta.append(beta_coefficient(joint))
    profile = MixingProfile(lags, tuple(alpha), tuple(rho), tuple(beta))
    profile.check()
    return profile
