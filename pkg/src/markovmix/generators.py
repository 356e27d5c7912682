"""
Named chains, seeded random chain families, and path simulation.

Randomness comes from a counter-based SplitMix64 stream, so every output
is a pure function of its seed and can be reproduced in any language:

    z_i = seed + (i + 1) * 0x9E3779B97F4A7C15            (mod 2^64)
    z_i = (z_i ^ (z_i >> 30)) * 0xBF58476D1CE4E5B9
    z_i = (z_i ^ (z_i >> 27)) * 0x94D049BB133111EB
    z_i =  z_i ^ (z_i >> 31)
    u_i = (z_i >> 11) * 2^-53                              in [0, 1)
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chain import ChainModel, _solve_fixed_vector, closed_classes, compute_stationary, validate_chain
from .errors import BadParameter, EmptyPath, NotStationary

GAMMA = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)

KINDS = (
    "example-2-8",
    "two-state",
    "k-cycle",
    "identity",
    "iid",
    "random-stochastic",
    "random-reversible",
    "birth-death",
)


class SplitMix64:
    """Counter-based SplitMix64. ``uniforms(n)`` continues where the last call stopped."""

    def __init__(self, seed: int):
        self.seed = np.uint64(int(seed) % (1 << 64))
        self.counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        i = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = self.seed + i * GAMMA
            z = (z ^ (z >> np.uint64(30))) * MIX1
            z = (z ^ (z >> np.uint64(27))) * MIX2
        return z ^ (z >> np.uint64(31))

    def uniforms(self, n: int) -> np.ndarray:
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    k: Optional[int] = None
    p: Optional[float] = None
    q: Optional[float] = None
    bias: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def _labels(k: int) -> list:
    return [str(i) for i in range(k)]


def make_example_2_8() -> ChainModel:
    """Four states 1..4, each row splitting 1/2 : 1/2 between two successors.

    Rows 1 and 3 go to {1, 2}, rows 2 and 4 to {3, 4}. The stationary law is
    uniform and under it X_0 and X_2 are independent, yet X_1 determines the
    pair class of X_0.
    """
    P = np.zeros((4, 4))
    for i, j in ((1, 1), (1, 2), (2, 3), (2, 4), (3, 1), (3, 2), (4, 3), (4, 4)):
        P[i - 1, j - 1] = 0.5
    return validate_chain(P, _uniform(4), states=["1", "2", "3", "4"])


def make_two_state(p: float) -> ChainModel:
    """Symmetric flip chain ``[[1-p, p], [p, 1-p]]``, states "1", "2"."""
    _check_prob("p", p)
    return validate_chain([[1 - p, p], [p, 1 - p]], [0.5, 0.5], states=["1", "2"])


def make_random_reversible(k: int, seed: int, self_loop_bias: float = 0.0) -> ChainModel:
    """Reversible chain from a symmetric weight matrix.

    ``W = (U + U^T)/2 + bias * I`` with U iid uniforms; then
    ``p(i,j) = W(i,j)/sum_j W(i,j)`` and ``mu_i = sum_j W(i,j) / sum W``, so
    ``mu_i p(i,j) = W(i,j)/sum W`` is symmetric up to one rounding.
    """
    if k < 2:
        raise BadParameter("random-reversible needs k >= 2")
    if self_loop_bias < 0:
        raise BadParameter("self_loop_bias must be nonnegative")
    U = SplitMix64(seed).uniforms(k * k).reshape(k, k)
    W = 0.5 * (U + U.T) + self_loop_bias * np.eye(k)
    rows = W.sum(axis=1)
    P = W / rows[:, None]
    return validate_chain(P, rows / rows.sum(), states=_labels(k))


def make_random_stochastic(k: int, seed: int) -> ChainModel:
    """Rows of normalized iid uniforms; generally not reversible."""
    if k < 1:
        raise BadParameter("k must be at least 1")
    U = SplitMix64(seed).uniforms(k * k).reshape(k, k)
    P = U / U.sum(axis=1)[:, None]
    return validate_chain(P, states=_labels(k))


def make_random_sparse(k: int, seed: int, keep: float = 0.5) -> ChainModel:
    """Normalized uniform rows with each entry kept with probability ``keep``.

    Every row keeps its largest draw, so rows never empty out. The result
    may be reducible, periodic or have transient states.
    """
    if k < 1:
        raise BadParameter("k must be at least 1")
    _check_prob("keep", keep)
    rng = SplitMix64(seed)
    U = rng.uniforms(k * k).reshape(k, k)
    mask = rng.uniforms(k * k).reshape(k, k) < keep
    mask[np.arange(k), np.argmax(U, axis=1)] = True
    W = np.where(mask, U, 0.0)
    return validate_chain(W / W.sum(axis=1)[:, None], states=_labels(k))


def make_cycle(k: int, p: float = 1.0) -> ChainModel:
    """Walk on Z/k: forward with probability p, backward otherwise.

    p = 1 is the rotation i -> i+1; p = 1/2 the symmetric (reversible) walk.
    """
    if k < 1:
        raise BadParameter("k must be at least 1")
    _check_prob("p", p)
    P = np.zeros((k, k))
    for i in range(k):
        P[i, (i + 1) % k] += p
        P[i, (i - 1) % k] += 1 - p
    return validate_chain(P, _uniform(k), states=_labels(k))


def make_birth_death(k: int, p: float = 0.5, q: float = 0.5) -> ChainModel:
    """Tridiagonal chain: up with p, down with q, holding otherwise; reflecting ends."""
    if k < 1:
        raise BadParameter("k must be at least 1")
    _check_prob("p", p)
    _check_prob("q", q)
    if p + q > 1:
        raise BadParameter("birth-death needs p + q <= 1")
    P = np.zeros((k, k))
    for i in range(k):
        if i + 1 < k:
            P[i, i + 1] = p
        if i > 0:
            P[i, i - 1] = q
        P[i, i] = 1 - P[i].sum()
    if p > 0 and q > 0:
        # detailed balance: mu_{i+1} / mu_i = p / q
        w = (p / q) ** np.arange(k, dtype=float)
        mu = w / w.sum()
    else:
        mu = compute_stationary(P)
    return validate_chain(P, mu, states=_labels(k))


def _check_prob(name, p):
    if p is None or not (0.0 <= float(p) <= 1.0) or math.isnan(float(p)):
        raise BadParameter(f"{name} must lie in [0, 1], got {p!r}")


def _need_k(spec: GeneratorSpec, minimum: int = 1) -> int:
    if spec.k is None or int(spec.k) < minimum:
        raise BadParameter(f"{spec.kind} needs k >= {minimum}")
    return int(spec.k)


def make_named(spec: GeneratorSpec) -> ChainModel:
    """Build the chain described by ``spec``; deterministic in every field.

    Raises:
        BadParameter: unknown kind, missing or out-of-range parameters.
    """
    kind = spec.kind
    if kind == "example-2-8":
        return make_example_2_8()
    if kind == "two-state":
        return make_two_state(spec.p)
    if kind == "k-cycle":
        return make_cycle(_need_k(spec), 1.0 if spec.p is None else spec.p)
    if kind == "identity":
        k = _need_k(spec)
        return validate_chain(np.eye(k), _uniform(k), states=_labels(k))
    if kind == "iid":
        k = _need_k(spec)
        return validate_chain(np.tile(_uniform(k), (k, 1)), _uniform(k), states=_labels(k))
    if kind == "random-stochastic":
        return make_random_stochastic(_need_k(spec), spec.seed)
    if kind == "random-reversible":
        return make_random_reversible(_need_k(spec, 2), spec.seed, spec.bias)
    if kind == "birth-death":
        return make_birth_death(_need_k(spec), 0.5 if spec.p is None else spec.p,
                                0.5 if spec.q is None else spec.q)
    raise BadParameter(f"unknown generator kind {kind!r}; expected one of {', '.join(KINDS)}")


FAMILY_KINDS = ("reversible", "reversible-lazy", "stochastic", "sparse", "birth-death", "cycle")


def seeded_family(seed: int, k_min: int = 2, k_max: int = 8) -> ChainModel:
    """One chain from a mixed family, chosen and parametrized by ``seed``.

    Covers reversible, lazy reversible, dense and sparse non-reversible,
    birth-death and biased cycle chains.
    """
    u = SplitMix64(seed ^ 0x5DEECE66D).uniforms(4)
    k = k_min + int(u[0] * (k_max - k_min + 1))
    kind = FAMILY_KINDS[int(u[1] * len(FAMILY_KINDS))]
    if kind == "reversible":
        return make_random_reversible(max(k, 2), seed)
    if kind == "reversible-lazy":
        return make_random_reversible(max(k, 2), seed, self_loop_bias=1.0)
    if kind == "stochastic":
        return make_random_stochastic(k, seed)
    if kind == "sparse":
        return make_random_sparse(k, seed, 0.2 + 0.5 * float(u[2]))
    if kind == "birth-death":
        p = 0.05 + 0.5 * float(u[2])
        return make_birth_death(k, p, (1 - p) * float(u[3]))
    return make_cycle(max(k, 3), float(u[2]))


@dataclass(frozen=True)
class PathSample:
    """States X_0..X_{T-1} as indices into ``chain.states``."""

    length: int
    states: np.ndarray
    seed: int
    chain: ChainModel

    def labels(self) -> list:
        names = self.chain.states
        return [names[i] for i in self.states]

    def to_text(self) -> str:
        return "\n".join(self.labels()) + "\n"

    @classmethod
    def from_text(cls, text: str, chain: ChainModel, seed: int = 0) -> "PathSample":
        names = [line.strip() for line in text.splitlines() if line.strip()]
        idx = np.array(chain.indices(names), dtype=np.int64)
        return cls(len(idx), idx, seed, chain)


def _draw(cum: list, u: float) -> int:
    j = bisect.bisect_right(cum, u)
    if j >= len(cum):
        # u beyond the last partial sum (rounding): last state with mass
        j = max(i for i in range(len(cum)) if cum[i] > (cum[i - 1] if i else 0.0))
    return j


def simulate_path(chain: ChainModel, T: int, seed: int) -> PathSample:
    """Sample X_0 ~ mu, then T-1 transitions, by inverse CDF in state order.

    Uniform u_0 picks X_0 and u_t picks X_t from row X_{t-1}: the state is
    the first j whose partial sum exceeds u.
    """
    if T < 1:
        raise BadParameter("T must be at least 1")
    u = SplitMix64(seed).uniforms(T).tolist()
    cum_mu = np.cumsum(chain.stationary).tolist()
    rows = [np.cumsum(row).tolist() for row in chain.transition]
    out = np.empty(T, dtype=np.int64)
    x = _draw(cum_mu, u[0])
    out[0] = x
    for t in range(1, T):
        x = _draw(rows[x], u[t])
        out[t] = x
    return PathSample(T, out, int(seed), chain)


def estimate_chain(path: PathSample, laplace: bool = False) -> ChainModel:
    """Plug-in chain from one path.

    Transition frequencies are used as they are (zero smoothing), or with
    one pseudo-count per entry when ``laplace`` is set. A state never left
    during the path gets a self-loop. The marginal is the exact stationary
    vector of the estimate (recurrent classes weighted by their empirical
    occupation when the estimate is reducible). It must match the empirical
    occupation frequencies within ``5/sqrt(T)``.

    Raises:
        EmptyPath: no observations.
        NotStationary: the two marginals disagree beyond the tolerance.
    """
    if path.length < 1 or len(path.states) == 0:
        raise EmptyPath("cannot estimate a chain from an empty path")
    k = path.chain.k
    s = np.asarray(path.states, dtype=np.int64)
    counts = np.zeros((k, k))
    np.add.at(counts, (s[:-1], s[1:]), 1.0)
    if laplace:
        counts += 1.0
    rows = counts.sum(axis=1)
    for i in np.flatnonzero(rows == 0):
        counts[i, i] = 1.0
    P = counts / counts.sum(axis=1)[:, None]
    empirical = np.bincount(s, minlength=k) / len(s)
    mu = _weighted_stationary(P, empirical)
    tol = 5.0 / math.sqrt(len(s))
    gap = float(np.max(np.abs(mu - empirical)))
    if gap > tol:
        raise NotStationary(f"stationary law of the estimate is {gap:.3e} from the empirical marginal (> {tol:.3e})")
    return validate_chain(P, mu, states=path.chain.states)


def _weighted_stationary(P: np.ndarray, empirical: np.ndarray) -> np.ndarray:
    classes = closed_classes(P)
    weights = np.array([empirical[c].sum() for c in classes])
    if weights.sum() <= 0:
        return compute_stationary(P)
    weights = weights / weights.sum()
    mu = np.zeros(P.shape[0])
    for c, w in zip(classes, weights):
        mu[c] += w * _solve_fixed_vector(P[np.ix_(c, c)])
    return mu / mu.sum()
