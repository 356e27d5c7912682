"""
Finite-state strictly stationary Markov chains.

A chain is the pair (mu, P): a row-stochastic transition matrix and a
stationary marginal. Everything about lag-n dependence lives in the joint
law of (X_0, X_n), ``J_n = diag(mu) @ P**n``.

Matrix powers are computed by repeated squaring. Next to ``P**n`` we also
keep the centered power ``(P - 1 mu^T)**n``, which equals ``P**n - 1 mu^T``
exactly whenever mu is stationary. The centered form keeps the deviation
``J_n - mu mu^T`` accurate to relative precision when it is tiny, instead of
losing it to cancellation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    ChainValidationError,
    InvalidChainFile,
    NegativeEntry,
    NotStationary,
    RowSumViolation,
)

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10
SYMMETRY_TOL = 1e-12
DRIFT_TOL = 1e-11


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChainModel:
    """A validated stationary chain. Build with :func:`validate_chain`."""

    states: tuple
    transition: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(self, "transition", _readonly(self.transition))
        object.__setattr__(self, "stationary", _readonly(self.stationary))

    @property
    def k(self) -> int:
        return len(self.states)

    @property
    def support(self) -> np.ndarray:
        """Indices of states with positive stationary mass."""
        return np.flatnonzero(self.stationary > 0)

    def index(self, label) -> int:
        return self.states.index(str(label))

    def indices(self, labels) -> list:
        return [self.index(s) for s in labels]

    def labels(self, indices) -> tuple:
        return tuple(self.states[i] for i in indices)

    def centered_transition(self) -> np.ndarray:
        """``P - 1 mu^T``; its n-th power is ``P**n - 1 mu^T`` for n >= 1."""
        return self.transition - self.stationary[None, :]

    def __eq__(self, other):
        if not isinstance(other, ChainModel):
            return NotImplemented
        return (
            self.states == other.states
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.stationary, other.stationary)
        )

    __hash__ = None


def _check_transition(raw_transition) -> np.ndarray:
    try:
        P = np.array(raw_transition, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChainValidationError(f"transition is not numeric: {exc}") from exc
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise ChainValidationError(f"transition must be a non-empty square matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ChainValidationError("transition contains non-finite entries")
    if np.any(P < 0):
        i, j = np.argwhere(P < 0)[0]
        raise NegativeEntry(f"p({i},{j}) = {float(P[i, j])!r} < 0")
    dev = np.abs(P.sum(axis=1) - 1.0)
    if np.any(dev > ROW_SUM_TOL):
        i = int(np.argmax(dev))
        raise RowSumViolation(f"row {i} sums to {float(P[i].sum())!r} (off by {dev[i]:.3e})")
    return P


def validate_chain(
    raw_transition,
    raw_stationary=None,
    states: Optional[Sequence] = None,
    stationarity_tol: float = STATIONARY_TOL,
) -> ChainModel:
    """Validate a transition matrix (and optional marginal) into a ChainModel.

    When ``raw_stationary`` is omitted the marginal is computed by
    :func:`compute_stationary`. A supplied marginal is accepted as long as it
    is a probability vector fixed by P, even if the fixed space is not
    one-dimensional.

    Raises:
        NegativeEntry, RowSumViolation: on a bad transition matrix.
        NotStationary: when the supplied marginal is not a fixed vector.
    """
    P = _check_transition(raw_transition)
    k = P.shape[0]
    if states is None:
        states = [str(i) for i in range(k)]
    states = [str(s) for s in states]
    if len(states) != k:
        raise ChainValidationError(f"{len(states)} state labels for a {k}-state matrix")
    if len(set(states)) != k:
        raise ChainValidationError("state labels must be unique")

    if raw_stationary is None:
        mu = compute_stationary(P)
    else:
        mu = np.array(raw_stationary, dtype=float)
        if mu.shape != (k,):
            raise ChainValidationError(f"stationary vector has shape {mu.shape}, expected ({k},)")
        if not np.all(np.isfinite(mu)):
            raise ChainValidationError("stationary vector contains non-finite entries")
        if np.any(mu < 0):
            raise NegativeEntry(f"mu({int(np.argmax(mu < 0))}) < 0")
        if abs(mu.sum() - 1.0) > ROW_SUM_TOL:
            raise NotStationary(f"stationary vector sums to {float(mu.sum())!r}")
    drift = np.max(np.abs(mu @ P - mu))
    if drift > stationarity_tol:
        raise NotStationary(f"max |mu P - mu| = {drift:.3e} exceeds {stationarity_tol:.1e}")
    return ChainModel(tuple(states), P, mu)


def strongly_connected(adjacency: np.ndarray) -> tuple:
    """(count, labels) of the strongly connected components of a digraph."""
    n, labels = connected_components(csr_matrix(adjacency), directed=True, connection="strong")
    return int(n), labels


def closed_classes(P: np.ndarray) -> list:
    """Recurrent classes of P: SCCs with no edge leaving them, ordered by first index."""
    adj = P > 0
    _, labels = strongly_connected(adj)
    classes = []
    seen = set()
    for i in range(P.shape[0]):
        c = labels[i]
        if c in seen:
            continue
        seen.add(c)
        members = np.flatnonzero(labels == c)
        outside = np.ones(P.shape[0], dtype=bool)
        outside[members] = False
        if not adj[np.ix_(members, outside)].any():
            classes.append(members)
    return classes


def _solve_fixed_vector(sub: np.ndarray) -> np.ndarray:
    m = sub.shape[0]
    A = np.vstack([sub.T - np.eye(m), np.ones((1, m))])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    v, *_ = np.linalg.lstsq(A, b, rcond=None)
    v = np.where(v < 0, 0.0, v)
    return v / v.sum()


def compute_stationary(transition) -> np.ndarray:
    """Canonical stationary vector of a row-stochastic matrix.

    Each recurrent class gets its own stationary vector from a direct linear
    solve; the result is their uniform mixture, so irreducible chains get the
    unique solution and e.g. the identity matrix gets the uniform vector.
    Transient states receive exactly zero mass.
    """
    P = _check_transition(transition)
    k = P.shape[0]
    classes = closed_classes(P)
    mu = np.zeros(k)
    for members in classes:
        mu[members] += _solve_fixed_vector(P[np.ix_(members, members)]) / len(classes)
    return mu / mu.sum()


class MatrixPowers:
    """Integer powers of a fixed square matrix by repeated squaring.

    With ``stochastic=True`` every product is renormalized to unit row sums.
    The cache is keyed by exponent and lives on the instance; create one per
    computation instead of sharing it across threads.
    """

    def __init__(self, base: np.ndarray, stochastic: bool = False):
        self.base = np.asarray(base, dtype=float)
        self.stochastic = stochastic
        self._cache = {1: self.base}
        self._squares = [self.base]

    def _mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = a @ b
        if self.stochastic:
            # products of stochastic matrices are stochastic; without this the
            # row sums drift like (1 + eps)^n at very large exponents
            out /= out.sum(axis=1, keepdims=True)
        return out

    def _square(self, j: int) -> np.ndarray:
        while len(self._squares) <= j:
            prev = self._squares[-1]
            nxt = self._mul(prev, prev)
            self._squares.append(nxt)
            self._cache.setdefault(1 << (len(self._squares) - 1), nxt)
        return self._squares[j]

    def power(self, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError("exponent must be a positive integer")
        if n in self._cache:
            return self._cache[n]
        result = None
        j = 0
        m = n
        while m:
            if m & 1:
                sq = self._square(j)
                result = sq if result is None else self._mul(result, sq)
            m >>= 1
            j += 1
        self._cache[n] = result
        return result


def naive_power(base: np.ndarray, n: int) -> np.ndarray:
    """``base**n`` by n-1 successive products (test reference only)."""
    out = np.array(base, dtype=float)
    for _ in range(n - 1):
        out = out @ base
    return out


@dataclass(frozen=True)
class JointDistribution:
    """Law of (X_0, X_n) for a stationary chain.

    ``table[i, j] = mu_i * P**n(i, j)``; ``deviation`` is ``table - mu mu^T``
    computed from the centered power, and ``marginal`` is mu (both margins).
    """

    lag: int
    table: np.ndarray
    marginal: np.ndarray
    deviation: np.ndarray

    @property
    def k(self) -> int:
        return self.table.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.marginal > 0)

    def product(self) -> np.ndarray:
        return np.outer(self.marginal, self.marginal)


class ChainPowers:
    """Call-local cache of ``P**n`` and ``(P - 1 mu^T)**n`` for one chain."""

    def __init__(self, chain: ChainModel):
        self.chain = chain
        self.plain = MatrixPowers(chain.transition, stochastic=True)
        self.centered = MatrixPowers(chain.centered_transition())
        self._centered = {}

    def transition_power(self, n: int) -> np.ndarray:
        return self.plain.power(n)

    def centered_power(self, n: int) -> np.ndarray:
        """``P**n - 1 mu^T``, from the centered recursion when it is trustworthy.

        On chains where ``P - 1 mu^T`` keeps an eigenvalue on the unit circle
        (reducible or periodic ones) tiny rounding drift in mu grows linearly
        in n; once the two routes disagree by more than 1e-11 the direct
        difference is used instead.
        """
        if n not in self._centered:
            fast = self.centered.power(n)
            direct = self.plain.power(n) - self.chain.stationary[None, :]
            self._centered[n] = fast if np.max(np.abs(fast - direct)) <= DRIFT_TOL else direct
        return self._centered[n]

    def joint(self, n: int) -> JointDistribution:
        if n < 1:
            raise ValueError("lag must be a positive integer")
        mu = self.chain.stationary
        table = mu[:, None] * self.plain.power(n)
        deviation = mu[:, None] * self.centered_power(n)
        return JointDistribution(int(n), _readonly(table), self.chain.stationary, _readonly(deviation))


def joint_at_lag(chain: ChainModel, n: int, powers: Optional[ChainPowers] = None) -> JointDistribution:
    """Joint law of (X_0, X_n)."""
    powers = powers or ChainPowers(chain)
    return powers.joint(n)


@dataclass(frozen=True)
class ReversibilityCheck:
    reversible: bool
    violation: float
    witness: Optional[tuple] = None
    witness_index: Optional[tuple] = None


def check_reversibility(chain: ChainModel, tol: float = SYMMETRY_TOL) -> ReversibilityCheck:
    """Detailed balance test: is ``mu_i p(i,j) = mu_j p(j,i)`` for all pairs?

    On failure the witness is the first pair (in index order, i < j) with the
    largest flow imbalance, oriented so that its first coordinate is the
    direction carrying less flow.
    """
    flow = chain.stationary[:, None] * chain.transition
    gap = np.abs(flow - flow.T)
    worst = float(gap.max()) if gap.size else 0.0
    if worst <= tol:
        return ReversibilityCheck(True, worst)
    # ties up to rounding go to the first pair in index order
    iu = np.argwhere(np.triu(gap, 1) >= worst * (1 - 1e-9))
    i, j = (int(x) for x in iu[0])
    if flow[i, j] > flow[j, i]:
        i, j = j, i
    return ReversibilityCheck(False, worst, chain.labels((i, j)), (i, j))


def _period(adj: np.ndarray, members: np.ndarray) -> int:
    """gcd of cycle lengths inside one strongly connected component (0 if acyclic)."""
    sub = adj[np.ix_(members, members)]
    level = {0: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(sub[u]):
                v = int(v)
                if v not in level:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u, v in np.argwhere(sub):
        g = math.gcd(g, level[int(u)] + 1 - level[int(v)])
    return abs(g)


@dataclass(frozen=True)
class StructureReport:
    support: tuple
    reversible: bool
    reversibility_violation: float
    reversibility_witness: Optional[tuple]
    irreducible: bool
    period: int
    aperiodic: bool
    components: tuple = field(default_factory=tuple)
    component_periods: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "support": list(self.support),
            "reversible": self.reversible,
            "reversibility_violation": self.reversibility_violation,
            "reversibility_witness": list(self.reversibility_witness) if self.reversibility_witness else None,
            "irreducible": self.irreducible,
            "period": self.period,
            "aperiodic": self.aperiodic,
            "components": [list(c) for c in self.components],
            "component_periods": list(self.component_periods),
        }


def check_structure(chain: ChainModel) -> StructureReport:
    """Reversibility, irreducibility and period of the chain restricted to its support.

    Irreducibility is strong connectivity of the digraph ``p(i,j) > 0`` on
    support states; the period is the gcd of the per-component periods.
    """
    rev = check_reversibility(chain)
    sp = chain.support
    adj = chain.transition[np.ix_(sp, sp)] > 0
    ncomp, labels = strongly_connected(adj)
    components = []
    periods = []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        components.append(chain.labels(sp[members]))
        periods.append(_period(adj, members))
    components.sort(key=lambda labs: chain.index(labs[0]))
    nonzero = [p for p in periods if p > 0]
    period = reduce(math.gcd, nonzero, 0) or 1
    return StructureReport(
        support=chain.labels(sp),
        reversible=rev.reversible,
        reversibility_violation=rev.violation,
        reversibility_witness=rev.witness,
        irreducible=ncomp == 1,
        period=period,
        aperiodic=period == 1,
        components=tuple(components),
        component_periods=tuple(periods),
    )


@dataclass(frozen=True)
class SmallSet:
    """A C-set: ``P(X_0 in A, X_n in B) >= t mu(A) mu(B)`` for all A, B inside C."""

    states: tuple
    indices: tuple
    t: float
    n: int


def _greedy_positive_block(positive: np.ndarray) -> list:
    members = list(range(positive.shape[0]))
    while members:
        block = positive[np.ix_(members, members)]
        if block.all():
            return members
        zeros = (~block).sum(axis=0) + (~block).sum(axis=1) - (~np.diag(block))
        worst = int(zeros.max())
        drop = max(pos for pos, z in enumerate(zeros) if z == worst)
        members.pop(drop)
    return members


def find_small_set(chain: ChainModel, max_n: int, powers: Optional[ChainPowers] = None) -> Optional[SmallSet]:
    """Search lags 1..max_n for a small set on the support.

    For each lag the candidate is grown greedily: start from the whole
    support and repeatedly drop the state involved in the most pairs with
    ``J_n(i,j) = 0`` (ties drop the highest index) until every pair inside
    the set is positive; then ``t`` is the smallest ratio
    ``J_n(i,j) / (mu_i mu_j)`` inside it. Across lags the largest set wins,
    then the largest ``t``, then the smallest lag. Returns None if no lag
    yields a non-empty set.
    """
    powers = powers or ChainPowers(chain)
    sp = chain.support
    mu = chain.stationary[sp]
    best = None
    for n in range(1, max_n + 1):
        J = powers.joint(n).table[np.ix_(sp, sp)]
        members = _greedy_positive_block(J > 0)
        if not members:
            continue
        idx = np.array(members)
        ratio = J[np.ix_(idx, idx)] / np.outer(mu[idx], mu[idx])
        key = (len(members), float(ratio.min()), -n)
        if best is None or key > best[0]:
            best = (key, tuple(int(i) for i in sp[idx]), n)
    if best is None:
        return None
    (_, t, _), indices, n = best
    return SmallSet(chain.labels(indices), indices, t, n)


def chain_to_dict(chain: ChainModel) -> dict:
    return {
        "states": list(chain.states),
        "transition": chain.transition.tolist(),
        "stationary": chain.stationary.tolist(),
    }


def chain_to_json(chain: ChainModel) -> str:
    """Chain file text: one row of the transition matrix per line."""
    rows = ",\n    ".join(json.dumps(row) for row in chain.transition.tolist())
    return (
        "{\n"
        f'  "states": {json.dumps(list(chain.states))},\n'
        f'  "transition": [\n    {rows}\n  ],\n'
        f'  "stationary": {json.dumps(chain.stationary.tolist())}\n'
        "}\n"
    )


def chain_from_json(text: str, stationarity_tol: float = STATIONARY_TOL) -> ChainModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidChainFile(f"chain file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "transition" not in doc:
        raise InvalidChainFile('chain file needs a "transition" field')
    return validate_chain(
        doc["transition"], doc.get("stationary"), doc.get("states"), stationarity_tol=stationarity_tol
    )


def load_chain(path) -> ChainModel:
    return chain_from_json(Path(path).read_text())


def save_chain(chain: ChainModel, path) -> None:
    Path(path).write_text(chain_to_json(chain))
