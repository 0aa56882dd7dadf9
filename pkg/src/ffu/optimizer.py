"""Newton-CG solver for the smoothed fitness-for-use covariance problem.

The hard problem minimizes the largest privacy-profile entry subject to
per-query variance bounds. It is replaced by a sequence of smooth convex
problems in the full symmetric covariance ``Sigma``::

    F(Sigma) = lse_t1(b_i' Sigma^-1 b_i) + lse_t2(v_j Sigma v_j' / c_j)
               + sum_j lambda_j v_j Sigma v_j'

where ``lse_t(a) = log(sum(exp(t * a))) / t`` upper-bounds ``max(a)`` by at
most ``log(n) / t``. Each stage is solved by truncated Newton steps with a
backtracking line search, after which ``t1`` and ``t2`` grow by ``mu``. The
final iterate is rescaled so the tightest variance bound holds with equality.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import DimensionMismatch, NoStep, NotDescent, NotPositiveDefinite, SingularInit
from .linalg import cholesky, inverse_spd, kron_apply, pseudo_inverse, solve_spd, symmetrize
from .privacy import Covariance, privacy_profile, query_variances
from .workloads import Decomposition, VarianceTargets

INIT_SLACK = 0.99
NULL_RTOL = 1e-10
# variance on hidden directions, relative to the largest visible eigenvalue
HIDDEN_SCALE = 1e6


@dataclass(frozen=True)
class OptimizerConfig:
    t1_init: float = 1.0
    t2_init: float = 1.0
    mu: float = 10.0
    max_iter: int = 2000
    nttol: float = 1e-6
    tol: float = 1e-3
    max_cg: int = 5
    tol2: float = 1e-10
    ls_sigma: float = 0.01
    ls_beta: float = 0.5
    ls_max_trials: int = 41
    lambda_total: float = 0.0
    precondition: bool = True

    def __post_init__(self):
        if not self.mu > 1:
            raise ValueError("mu must exceed 1")
        for name in ("t1_init", "t2_init", "nttol", "tol", "tol2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.ls_beta < 1 or not 0 < self.ls_sigma < 1:
            raise ValueError("line-search constants must lie in (0, 1)")
        if self.max_iter < 1 or self.max_cg < 1 or self.ls_max_trials < 1:
            raise ValueError("iteration caps must be positive")
        if self.lambda_total < 0:
            raise ValueError("lambda_total must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown optimizer settings: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "OptimizerConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SolveResult:
    sigma: Covariance
    sigma_raw: Covariance
    gamma: float
    alpha: float
    iterations: int
    objective_trace: list[float]
    trace_t1: list[float]
    converged: bool
    t1_final: float
    stalls: int = 0

    @property
    def cost(self) -> float:
        return math.sqrt(self.alpha)

    def summary(self) -> dict:
        return {
            "gamma": self.gamma,
            "iterations": self.iterations,
            "converged": self.converged,
            "t1_final": self.t1_final,
            "stalls": self.stalls,
            "objective_trace": [{"t1": t, "value": v} for t, v in zip(self.trace_t1, self.objective_trace)],
        }


def _target_values(targets, m: int) -> np.ndarray:
    if targets is None:
        return np.ones(m)
    c = np.asarray(getattr(targets, "values", targets), dtype=float).reshape(-1)
    if c.size != m:
        raise DimensionMismatch(f"{c.size} targets for {m} queries")
    return VarianceTargets(c).values


def _sigma_of(cov) -> np.ndarray:
    return cov.sigma if isinstance(cov, Covariance) else symmetrize(np.atleast_2d(np.asarray(cov, float)))


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b))


class SmoothedObjective:
    """``F`` and its derivatives for fixed smoothing parameters.

    With ``linear_weights`` given, the variance softmax is dropped and the
    objective becomes the privacy softmax plus a weighted total variance.
    """

    def __init__(self, dec: Decomposition, targets, t1: float, t2: float,
                 lambda_total: float = 0.0, linear_weights=None):
        self.basis = dec.basis
        self.rep = dec.representation
        self.c = _target_values(targets, dec.m) if linear_weights is None else np.ones(dec.m)
        self.t1, self.t2 = float(t1), float(t2)
        self.variance_softmax = linear_weights is None
        lin = np.full(dec.m, float(lambda_total))
        if linear_weights is not None:
            lin = lin + np.asarray(linear_weights, dtype=float)
        self.linear = lin
        self.linear_grad = (self.rep.T * lin) @ self.rep if np.any(lin) else None

    @property
    def n_terms(self) -> int:
        """Number of smoothed terms, which bounds the softmax slack."""
        return self.basis.shape[1] + (self.rep.shape[0] if self.variance_softmax else 0)

    def _parts(self, sigma, factor):
        solved = solve_spd(factor, self.basis)
        g = np.einsum("ij,ij->j", self.basis, solved)
        value = logsumexp(self.t1 * g) / self.t1
        h = None
        if self.variance_softmax:
            h = np.einsum("ij,ij->i", self.rep @ sigma, self.rep) / self.c
            value += logsumexp(self.t2 * h) / self.t2
        if self.linear_grad is not None:
            value += _inner(self.linear_grad, sigma)
        return value, solved, g, h

    def value(self, sigma) -> float:
        """Objective value; raises :class:`NotPositiveDefinite` off the cone."""
        sigma = _sigma_of(sigma)
        return self._parts(sigma, cholesky(sigma))[0]

    def at(self, sigma) -> "Evaluation":
        sigma = _sigma_of(sigma)
        factor = cholesky(sigma)
        value, solved, g, h = self._parts(sigma, factor)
        return Evaluation(self, sigma, factor, value, solved, g, h)


class Evaluation:
    """Objective, gradient and Hessian action at one point."""

    def __init__(self, obj: SmoothedObjective, sigma, factor, value, solved, g, h):
        self.obj = obj
        self.sigma = sigma
        self.factor = factor
        self.value = float(value)
        self.profile = g
        self.ratios = h
        self.u = solved
        self.w = softmax(obj.t1 * g)
        active = self.w > 0.0
        self._u_act, self._w_act = solved[:, active], self.w[active]
        self.priv_grad = -(self._u_act * self._w_act) @ self._u_act.T
        grad = self.priv_grad.copy()
        if h is not None:
            self.omega = softmax(obj.t2 * h)
            self.var_grad = (obj.rep.T * (self.omega / obj.c)) @ obj.rep
            grad += self.var_grad
        if obj.linear_grad is not None:
            grad += obj.linear_grad
        self.grad = symmetrize(grad)
        self._inv = None

    @property
    def sigma_inv(self) -> np.ndarray:
        if self._inv is None:
            self._inv = inverse_spd(self.factor)
        return self._inv

    def hess_times(self, p: np.ndarray) -> np.ndarray:
        obj = self.obj
        g_bar = self.priv_grad
        # weighted curvature of each quadratic form b' Sigma^-1 b
        out = -kron_apply(g_bar, self.sigma_inv, p) - kron_apply(self.sigma_inv, g_bar, p)
        u, w = self._u_act, self._w_act
        q = np.einsum("ij,ij->j", u, p @ u)
        out += obj.t1 * ((u * (w * q)) @ u.T - g_bar * _inner(g_bar, p))
        if obj.variance_softmax:
            r = np.einsum("ij,ij->i", obj.rep @ p, obj.rep) / obj.c
            out += obj.t2 * (
                (obj.rep.T * (self.omega * r / obj.c)) @ obj.rep - self.var_grad * _inner(self.var_grad, p)
            )
        return symmetrize(out)


# ---------------------------------------------------------------- public pieces


def objective(dec, cov, targets, t1=1.0, t2=1.0, lambda_total=0.0) -> float:
    return SmoothedObjective(dec, targets, t1, t2, lambda_total).value(cov)


def gradient(dec, cov, targets, t1=1.0, t2=1.0, lambda_total=0.0) -> np.ndarray:
    return SmoothedObjective(dec, targets, t1, t2, lambda_total).at(cov).grad


def hess_times_vec(dec, cov, targets, t1, t2, direction, lambda_total=0.0) -> np.ndarray:
    ev = SmoothedObjective(dec, targets, t1, t2, lambda_total).at(cov)
    return ev.hess_times(symmetrize(direction))


def _cg(ev: Evaluation, max_cg: int, tol2: float, precondition: bool = True) -> tuple[np.ndarray, bool]:
    """Truncated CG on ``H s = -grad``; the flag reports negative curvature.

    With ``precondition`` the residual is mapped through ``R -> Sigma R Sigma``,
    the inverse of the curvature of ``log det`` at ``Sigma``. This removes most
    of the ill-conditioning that comes from the spread of Sigma's eigenvalues.
    """
    if precondition:
        sigma = ev.sigma

        def apply(r):
            return sigma @ r @ sigma
    else:
        def apply(r):
            return r

    s = np.zeros_like(ev.grad)
    r = -ev.grad
    if not np.any(r):
        return s, False
    z = apply(r)
    p = z.copy()
    rz_old = _inner(r, z)
    for _ in range(max_cg):
        hp = ev.hess_times(p)
        curv = _inner(p, hp)
        if curv <= 0.0:
            return s, True
        a = rz_old / curv
        s = s + a * p
        r = r - a * hp
        if _inner(r, r) <= tol2:
            break
        z = apply(r)
        rz_new = _inner(r, z)
        p = z + (rz_new / rz_old) * p
        rz_old = rz_new
    return s, False


def _descent_direction(ev: Evaluation, config: OptimizerConfig) -> np.ndarray:
    s, _ = _cg(ev, config.max_cg, config.tol2, config.precondition)
    if _inner(s, ev.grad) >= 0.0 and np.any(ev.grad):
        # only reachable through round-off or curvature breakdown
        s = -ev.grad
    return s


def conjugate_gradient(dec, cov, targets, t1=1.0, t2=1.0, config: OptimizerConfig | None = None) -> np.ndarray:
    config = config or OptimizerConfig()
    ev = SmoothedObjective(dec, targets, t1, t2, config.lambda_total).at(cov)
    return _cg(ev, config.max_cg, config.tol2, config.precondition)[0]


def _backtrack(obj: SmoothedObjective, ev: Evaluation, direction, config: OptimizerConfig) -> tuple[float, float]:
    slope = _inner(direction, ev.grad)
    if not slope < 0.0:
        raise NotDescent(f"direction has non-negative slope {slope:.3e}")
    alpha = 1.0
    for _ in range(config.ls_max_trials):
        try:
            trial = obj.value(ev.sigma + alpha * direction)
        except NotPositiveDefinite:
            alpha *= config.ls_beta
            continue
        if trial <= ev.value + alpha * config.ls_sigma * slope:
            return alpha, trial
        alpha *= config.ls_beta
    raise NoStep(f"no acceptable step among {config.ls_max_trials} trials")


def line_search(dec, cov, targets, t1, t2, direction, config: OptimizerConfig | None = None) -> float:
    config = config or OptimizerConfig()
    obj = SmoothedObjective(dec, targets, t1, t2, config.lambda_total)
    return _backtrack(obj, obj.at(cov), np.asarray(direction, float), config)[0]


def initialize(dec: Decomposition, targets, q=None) -> Covariance:
    """Scaled ``Q^+ Q^+'`` that meets every variance target with 1% slack."""
    c = _target_values(targets, dec.m)
    qp = np.eye(dec.k) if q is None else pseudo_inverse(q)
    if qp.shape[0] != dec.k:
        raise DimensionMismatch(f"initializer gives order {qp.shape[0]}, basis has {dec.k} rows")
    shape = symmetrize(qp @ qp.T)
    try:
        cholesky(shape)
    except NotPositiveDefinite:
        raise SingularInit("Q^+ Q^+' is singular; fall back to Q = I") from None
    var = query_variances(dec.representation, shape)
    scale = INIT_SLACK * float(np.min(c / var))
    return Covariance(scale * shape)


# ---------------------------------------------------------------- outer loop


def _minimize(dec, make_objective, sigma0, config, n_terms, callback):
    t1, t2 = config.t1_init, config.t2_init
    obj = make_objective(t1, t2)
    ev = obj.at(sigma0)
    trace, trace_t1 = [ev.value], [t1]
    converged = False
    stalls = 0
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        direction = _descent_direction(ev, config)
        decrement = _inner(direction, ev.grad)
        stage_done = abs(decrement) < config.nttol
        if not stage_done:
            try:
                alpha, _ = _backtrack(obj, ev, direction, config)
            except NoStep:
                stalls += 1
                stage_done = True
        if stage_done:
            if n_terms / t1 < config.tol:
                converged = True
                break
            t1 *= config.mu
            t2 *= config.mu
            obj = make_objective(t1, t2)
            ev = obj.at(ev.sigma)
            trace.append(ev.value)
            trace_t1.append(t1)
            continue
        ev = obj.at(symmetrize(ev.sigma + alpha * direction))
        trace.append(ev.value)
        trace_t1.append(t1)
        if callback is not None:
            callback(iterations, ev.sigma, ev.value, t1)
    return ev.sigma, iterations, trace, trace_t1, converged, t1, stalls


def visible_subspace(rep: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of ``range(L')`` and ``null(L)``.

    Noise along ``null(L)`` never reaches a released answer, yet it still
    lowers every privacy term, so the objective has no minimizer there.
    """
    _, s, vt = np.linalg.svd(rep, full_matrices=True)
    rank = int(np.sum(s > NULL_RTOL * s[0])) if s.size else 0
    return vt[:rank].T, vt[rank:].T


def _reduced(dec: Decomposition, visible: np.ndarray) -> Decomposition:
    return Decomposition(dec.basis_kind, visible.T @ dec.basis, dec.representation @ visible)


def _lift(sigma_r: np.ndarray, visible: np.ndarray, hidden: np.ndarray) -> np.ndarray:
    """Embed a visible-subspace covariance, with large variance on hidden directions."""
    big = HIDDEN_SCALE * float(np.max(np.linalg.eigvalsh(sigma_r)))
    return symmetrize(visible @ sigma_r @ visible.T + big * (hidden @ hidden.T))


def _run(dec, sigma0, config, n_terms, callback, make_objective):
    """Outer loop on the visible subspace; returns the lifted raw optimum."""
    visible, hidden = visible_subspace(dec.representation)
    if hidden.shape[1] == 0:
        out = _minimize(dec, make_objective(dec), sigma0, config, n_terms, callback)
        return out
    red = _reduced(dec, visible)
    raw, *rest = _minimize(red, make_objective(red), visible.T @ sigma0 @ visible, config, n_terms, callback)
    return (_lift(raw, visible, hidden), *rest)


def solve(dec: Decomposition, targets, config: OptimizerConfig | None = None, q_init=None,
          callback: Callable | None = None) -> SolveResult:
    """Covariance meeting every variance target at (approximately) minimal privacy cost.

    When the representation matrix has a null space the search runs on its
    complement, and ``callback`` sees iterates of that smaller order.
    """
    config = config or OptimizerConfig()
    c = _target_values(targets, dec.m)
    sigma0 = initialize(dec, c, q_init).sigma

    def make_objective(d):
        return lambda t1, t2: SmoothedObjective(d, c, t1, t2, config.lambda_total)

    raw, iters, trace, trace_t1, converged, t1, stalls = _run(
        dec, sigma0, config, dec.d + dec.m, callback, make_objective)
    raw_cov = Covariance(raw)
    gamma = float(np.max(query_variances(dec, raw_cov) / c))
    final = Covariance(raw / gamma)
    alpha = float(np.max(privacy_profile(dec, final)))
    return SolveResult(final, raw_cov, gamma, alpha, iters, trace, trace_t1, converged, t1, stalls)


WEIGHT_PRESETS = ("uniform", "inverse-variance", "inverse-sd")


def preset_weights(targets, preset: str) -> np.ndarray:
    c = np.asarray(getattr(targets, "values", targets), dtype=float)
    if preset == "uniform":
        return np.ones_like(c)
    if preset == "inverse-variance":
        return 1.0 / c
    if preset == "inverse-sd":
        return 1.0 / np.sqrt(c)
    raise ValueError(f"unknown weight preset {preset!r}; expected one of {WEIGHT_PRESETS}")


def solve_sum_squared(dec: Decomposition, weights=None, budget: float = 1.0,
                      config: OptimizerConfig | None = None, callback: Callable | None = None) -> SolveResult:
    """Minimize weighted total variance, then scale to privacy cost ``budget``."""
    config = config or OptimizerConfig()
    if budget <= 0:
        raise ValueError("privacy budget must be positive")
    w = np.ones(dec.m) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.size != dec.m:
        raise DimensionMismatch(f"{w.size} weights for {dec.m} queries")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    sigma0 = initialize(dec, np.ones(dec.m)).sigma

    def make_objective(d):
        return lambda t1, t2: SmoothedObjective(d, None, t1, t2, config.lambda_total, linear_weights=w)

    raw, iters, trace, trace_t1, converged, t1, stalls = _run(dec, sigma0, config, dec.d, callback, make_objective)
    raw_cov = Covariance(raw)
    alpha_raw = float(np.max(privacy_profile(dec, raw_cov)))
    gamma = budget**2 / alpha_raw
    final = Covariance(raw / gamma)
    alpha = float(np.max(privacy_profile(dec, final)))
    return SolveResult(final, raw_cov, gamma, alpha, iters, trace, trace_t1, converged, t1, stalls)
