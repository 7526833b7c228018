"""The two-dimensional Markov chain over (ordered count, ready count).

Each evaluation period the autoscaler picks a new ordered count (the
horizontal coordinate, driven by the metric model) while the platform
provisions or removes containers toward the last order (the vertical
coordinate, a birth-death process observed at evaluation instants).
The two moves are independent given the current state, so each row of
the chain's transition matrix is an outer product of a horizontal vector
and a vertical row.  The stationary distribution of this chain carries
all steady-state answers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ._jit import maybe_jit
from .config import AutoscalerConfig
from .errors import (ChainStructureWarning, NonErgodicError, NumericalError,
                     ValidationError)
from .evaluator import order_probabilities
from .metric_model import MetricModel, observed_value_distribution

# Direct dense solve up to this many states, power iteration beyond.
_DIRECT_SOLVE_LIMIT = 400
_TRUNCATE_BELOW = 1e-15
_UNIFORMIZATION_TOL = 1e-12


def _check_target(i_target: int, n_max: int) -> int:
    if not (isinstance(i_target, (int, np.integer)) and not isinstance(i_target, bool)):
        raise ValidationError(f"target ready count must be an integer, got {i_target!r}")
    i_target = int(i_target)
    if not 1 <= i_target <= n_max:
        raise ValidationError(f"target ready count must be in [1, {n_max}], got {i_target}")
    return i_target


def build_rate_matrix(i_target: int, cfg: AutoscalerConfig) -> np.ndarray:
    """Generator of the provisioning process while the order is i_target.

    States are ready counts 1..n_max.  Below target, the (i_target - j)
    pending containers provision in parallel at mu_pro each; above
    target, the (j - i_target) surplus containers drain at mu_dep each.
    The target itself is absorbing.
    """
    i_target = _check_target(i_target, cfg.n_max)
    n = cfg.n_max
    q = np.zeros((n, n), dtype=np.float64)
    for j in range(1, n + 1):
        if j < i_target:
            rate = (i_target - j) * cfg.mu_pro
            q[j - 1, j] = rate
            q[j - 1, j - 1] -= rate
        elif j > i_target:
            rate = (j - i_target) * cfg.mu_dep
            q[j - 1, j - 2] = rate
            q[j - 1, j - 1] -= rate
    return q


@maybe_jit
def _uniformized_transient(q, j0, t, tol):
    n = q.shape[0]
    v = np.zeros(n)
    v[j0] = 1.0
    rate = 0.0
    for k in range(n):
        if -q[k, k] > rate:
            rate = -q[k, k]
    a = rate * t
    if a <= 0.0:
        return v
    p_mat = np.eye(n) + q / rate
    # Poisson(a)-weighted powers of the uniformized DTMC.  The running
    # weight underflows to 0 for a > ~745; the steady-state break below
    # then assigns all mass to the converged power, which is the correct
    # limit because the chain has long since mixed at that many steps.
    weight = math.exp(-a)
    cum = weight
    out = weight * v
    k_max = int(a + 12.0 * math.sqrt(a) + 60.0)
    for k in range(1, k_max + 1):
        v_new = np.dot(v, p_mat)
        diff = 0.0
        for m in range(n):
            diff += abs(v_new[m] - v[m])
        v = v_new
        weight *= a / k
        out = out + weight * v
        cum += weight
        if cum >= 1.0 - tol or diff <= 1e-15:
            break
    # Remaining Poisson mass rides on the last (converged) power, which
    # keeps the result a probability vector instead of dropping the tail.
    out = out + (1.0 - cum) * v
    return out


def transient_distribution(q: np.ndarray, j_start: int, t: float) -> np.ndarray:
    """Row j_start of exp(q t), by uniformization.

    j_start indexes ready counts from 1.  Nonnegativity and unit sum are
    guaranteed by construction; truncation error is below 1e-12.
    """
    q = np.ascontiguousarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValidationError(f"rate matrix must be square, got shape {q.shape}")
    n = q.shape[0]
    j_start = _check_target(j_start, n)
    if not (isinstance(t, (int, float)) and math.isfinite(t) and t >= 0):
        raise ValidationError(f"t must be finite and >= 0, got {t!r}")
    with np.errstate(over="ignore"):
        return _uniformized_transient(q, j_start - 1, float(t), _UNIFORMIZATION_TOL)


def vertical_transition_probs(i_target: int, cfg: AutoscalerConfig) -> np.ndarray:
    """Matrix of P[ready j -> j'] over one evaluation period at order i_target."""
    i_target = _check_target(i_target, cfg.n_max)
    q = build_rate_matrix(i_target, cfg)
    out = np.empty((cfg.n_max, cfg.n_max), dtype=np.float64)
    for j in range(1, cfg.n_max + 1):
        out[j - 1] = transient_distribution(q, j, cfg.t_eva_s)
    return out


def horizontal_transition_probs(j: int, arrival_rate: float, model: MetricModel,
                                cfg: AutoscalerConfig) -> np.ndarray:
    """Probability vector over next ordered counts, given j ready containers.

    Independent of the current order: every evaluation redecides from the
    windowed metric alone, whose law depends only on the per-container
    rate arrival_rate / j.
    """
    j = _check_target(j, cfg.n_max)
    if not (isinstance(arrival_rate, (int, float)) and math.isfinite(arrival_rate)
            and arrival_rate > 0):
        raise ValidationError(f"arrival_rate must be finite and > 0, got {arrival_rate!r}")
    dist = observed_value_distribution(model, arrival_rate / j)
    return order_probabilities(dist, cfg.target_value, cfg.n_max).probs.copy()


@dataclass(frozen=True)
class ClusterChain:
    """Assembled DTMC over states s(i, j) = (i-1)*n_max + (j-1)."""

    n_max: int
    arrival_rate: float
    transition_matrix: np.ndarray
    horizontal: np.ndarray  # [j-1, i'-1]
    vertical: np.ndarray    # [i-1, j-1, j'-1]

    def __post_init__(self):
        n = self.n_max
        p = np.asarray(self.transition_matrix, dtype=np.float64)
        if p.shape != (n * n, n * n):
            raise ValidationError(f"transition matrix must be {n * n}x{n * n}, got {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("transition matrix entries must be finite and >= 0")
        row_err = float(np.max(np.abs(p.sum(axis=1) - 1.0)))
        if row_err > 1e-10:
            raise ValidationError(f"transition matrix rows must sum to 1 (max error {row_err:.3e})")
        for name in ("transition_matrix", "horizontal", "vertical"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return self.n_max * self.n_max

    def state_index(self, i: int, j: int) -> int:
        if not (1 <= i <= self.n_max and 1 <= j <= self.n_max):
            raise ValidationError(f"state ({i}, {j}) out of range for n_max={self.n_max}")
        return (i - 1) * self.n_max + (j - 1)

    def state_of(self, s: int) -> tuple:
        if not 0 <= s < self.n_states:
            raise ValidationError(f"state index {s} out of range")
        return s // self.n_max + 1, s % self.n_max + 1


def build_chain(arrival_rate: float, model: MetricModel, cfg: AutoscalerConfig) -> ClusterChain:
    """Assemble the full chain from cached per-coordinate factors.

    The n_max horizontal vectors and n_max vertical matrices are each
    computed once; rows of the product chain are outer products, so
    assembly is quadratic in the state count rather than cubic.
    """
    n = cfg.n_max
    horizontal = np.empty((n, n), dtype=np.float64)
    for j in range(1, n + 1):
        horizontal[j - 1] = horizontal_transition_probs(j, arrival_rate, model, cfg)
    vertical = np.empty((n, n, n), dtype=np.float64)
    for i in range(1, n + 1):
        vertical[i - 1] = vertical_transition_probs(i, cfg)
    m = n * n
    p = np.empty((m, m), dtype=np.float64)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            row = np.kron(horizontal[j - 1], vertical[i - 1, j - 1])
            p[(i - 1) * n + (j - 1)] = row
    p[p < _TRUNCATE_BELOW] = 0.0
    p /= p.sum(axis=1, keepdims=True)
    return ClusterChain(n_max=n, arrival_rate=float(arrival_rate),
                        transition_matrix=p, horizontal=horizontal, vertical=vertical)


def _recurrence_structure(p: np.ndarray):
    """Strongly connected components split into recurrent and transient."""
    n_comp, labels = connected_components(csr_matrix(p > 0.0), directed=True,
                                          connection="strong")
    has_exit = np.zeros(n_comp, dtype=bool)
    src, dst = np.nonzero(p > 0.0)
    leaving = labels[src] != labels[dst]
    has_exit[labels[src[leaving]]] = True
    recurrent = [np.flatnonzero(labels == c) for c in range(n_comp) if not has_exit[c]]
    transient = np.flatnonzero(has_exit[labels])
    return recurrent, transient


def _power_iteration(p: np.ndarray, start: np.ndarray, max_iter: int = 500_000,
                     tol: float = 1e-14) -> np.ndarray:
    # The half-lazy update has the same stationary vector but cannot
    # stall on a periodic chain.
    v = start / start.sum()
    for _ in range(max_iter):
        v_new = 0.5 * (v + v @ p)
        if float(np.max(np.abs(v_new - v))) < tol:
            return v_new
        v = v_new
    return v


def solve_stationary(p: np.ndarray, method: str = "auto") -> np.ndarray:
    """Stationary row vector of a row-stochastic matrix.

    Direct method: replace one equation of the balance system (p^T - I)
    with the normalization row and solve by LU with partial pivoting.
    Chains above _DIRECT_SOLVE_LIMIT states, or method="power", use
    half-lazy power iteration instead.  Multiple recurrent classes make
    the stationary vector non-unique and raise NonErgodicError; transient
    states only warn, since they legitimately carry zero mass.
    """
    if method not in ("auto", "direct", "power"):
        raise ValidationError(f"unknown method {method!r}")
    p = np.ascontiguousarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValidationError(f"transition matrix must be square, got shape {p.shape}")
    m = p.shape[0]
    if np.any(p < -1e-14) or not np.all(np.isfinite(p)):
        raise ValidationError("transition matrix entries must be finite and >= -1e-14")
    p = np.where(p < 0.0, 0.0, p)
    row_err = float(np.max(np.abs(p.sum(axis=1) - 1.0)))
    if row_err > 1e-9:
        raise ValidationError(f"rows must sum to 1 (max error {row_err:.3e})")

    recurrent, transient = _recurrence_structure(p)
    if len(recurrent) > 1:
        classes = [cls.tolist() for cls in recurrent]
        raise NonErgodicError(
            f"chain has {len(classes)} recurrent classes {classes}; "
            "stationary distribution is not unique", recurrent_classes=classes)
    if transient.size:
        warnings.warn(
            f"{transient.size} of {m} states are transient and receive zero "
            "stationary mass", ChainStructureWarning, stacklevel=2)

    pi = None
    if method != "power" and m <= _DIRECT_SOLVE_LIMIT:
        a = p.T - np.eye(m)
        a[0, :] = 1.0
        b = np.zeros(m)
        b[0] = 1.0
        try:
            candidate = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            candidate = None
        if candidate is not None and np.all(np.isfinite(candidate)):
            pi = candidate
    if pi is None:
        pi = _power_iteration(p, np.full(m, 1.0 / m))

    pi = np.where(pi < 0.0, 0.0, pi)
    total = float(pi.sum())
    if not math.isfinite(total) or total <= 0:
        raise NumericalError("stationary solve produced a degenerate vector")
    pi /= total
    residual = float(np.max(np.abs(pi @ p - pi)))
    if residual > 1e-10:
        # One refinement pass; direct solves very rarely need it.
        pi = _power_iteration(p, pi)
        pi = np.where(pi < 0.0, 0.0, pi)
        pi /= pi.sum()
        residual = float(np.max(np.abs(pi @ p - pi)))
        if residual > 1e-10:
            raise NumericalError(
                f"stationary residual {residual:.3e} exceeds 1e-10 after refinement")
    return pi


@dataclass(frozen=True)
class StationaryDistribution:
    """Stationary mass per chain state plus the ready-count marginal."""

    pi: np.ndarray
    marginal_ready: np.ndarray
    n_transient: int

    def __post_init__(self):
        for name in ("pi", "marginal_ready"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def stationary_distribution(chain: ClusterChain, method: str = "auto") -> StationaryDistribution:
    p = chain.transition_matrix
    recurrent, transient = _recurrence_structure(p)
    if len(recurrent) > 1:
        named = [[chain.state_of(s) for s in cls.tolist()] for cls in recurrent]
        raise NonErgodicError(
            f"chain has {len(named)} recurrent classes over (order, ready) states: "
            f"{named}", recurrent_classes=named)
    with warnings.catch_warnings():
        # solve_stationary re-detects structure; one warning here is enough.
        warnings.simplefilter("ignore", ChainStructureWarning)
        pi = solve_stationary(p, method=method)
    if transient.size:
        warnings.warn(
            f"{transient.size} of {chain.n_states} chain states are transient "
            "and receive zero stationary mass", ChainStructureWarning, stacklevel=2)
    marginal = pi.reshape(chain.n_max, chain.n_max).sum(axis=0)
    return StationaryDistribution(pi=pi, marginal_ready=marginal,
                                  n_transient=int(transient.size))
