"""Weighted Cox proportional-hazards fitting and the Breslow baseline.

The outcome model is a proportional-hazards regression on the design
``[a] ++ [m_1..m_k] ++ [a*m_j for j > ell] ++ [c_1..c_p]``. Interaction
columns for structural-zero mediators (j <= ell) are omitted: m_j = 1
implies a = 1 in the data, so a*m_j equals m_j numerically and keeping
both would make the model unidentifiable. The m_j main effect is retained
for all j.

Ties are handled with the Breslow convention throughout: tied events
share the same risk set, and the baseline cumulative hazard jumps by
(weighted events at t) / (weighted risk-set sum of exp(theta.x)) at each
distinct event time, which pairs with the partial likelihood used here.
An event at a knot counts in its own risk set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_model import Dataset, MediatorSchema
from .exceptions import (
    ConvergenceError,
    DataValidationError,
    MonotoneLikelihoodError,
    RankDeficientDesignError,
)
from .glm import _checked_solve

__all__ = [
    "DesignSpec",
    "CoxFit",
    "StepFunction",
    "fit_weighted_cox",
    "breslow_baseline",
    "cumhaz_at",
]

# Coefficient magnitude treated as monotone likelihood when the partial
# likelihood is still improving.
_DIVERGENCE_BOUND = 50.0


@dataclass(frozen=True)
class DesignSpec:
    """Column layout of the proportional-hazards design matrix."""

    schema: MediatorSchema
    p: int

    @property
    def interaction_indices(self) -> tuple[int, ...]:
        # mediators that get an a*m column (non-structural ones only)
        return tuple(range(self.schema.ell, self.schema.k))

    @property
    def column_names(self) -> tuple[str, ...]:
        k, ell = self.schema.k, self.schema.ell
        return (
            ("a",)
            + tuple(f"m_{j + 1}" for j in range(k))
            + tuple(f"a:m_{j + 1}" for j in range(ell, k))
            + tuple(f"c_{i + 1}" for i in range(self.p))
        )

    @property
    def n_columns(self) -> int:
        return 1 + self.schema.k + (self.schema.k - self.schema.ell) + self.p

    def build_matrix(self, d: Dataset) -> np.ndarray:
        if d.schema != self.schema or d.p != self.p:
            raise DataValidationError("dataset does not match the design spec")
        a = d.a.astype(float)[:, None]
        m = d.m.astype(float)
        inter = a * m[:, list(self.interaction_indices)]
        return np.hstack([a, m, inter, d.c])

    def theta_blocks(self, theta: np.ndarray):
        """Split a coefficient vector into (exposure, mediator, interaction,
        covariate) blocks following the column layout."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_columns,):
            raise DataValidationError(
                f"theta has length {theta.size}, design needs {self.n_columns}"
            )
        k = self.schema.k
        n_int = k - self.schema.ell
        return (
            theta[0],
            theta[1 : 1 + k],
            theta[1 + k : 1 + k + n_int],
            theta[1 + k + n_int :],
        )


@dataclass
class CoxFit:
    theta: np.ndarray
    loglik: float            # weighted Breslow partial log-likelihood at theta
    converged: bool
    iterations: int
    grad_norm: float
    information: np.ndarray  # negative Hessian of the partial log-likelihood
    spec: DesignSpec


@dataclass
class StepFunction:
    """Right-continuous step function: 0 before the first knot, last value
    carried forward beyond the last knot."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise DataValidationError("times and values must be 1-d of equal length")
        if self.times.size and not (np.diff(self.times) > 0).all():
            raise DataValidationError("knot times must be strictly increasing")
        if self.values.size and (
            (self.values < 0).any() or (np.diff(self.values) < -0.0).any()
        ):
            raise DataValidationError("values must be nonnegative and nondecreasing")


def cumhaz_at(s: StepFunction, t) -> float | np.ndarray:
    """Last-observation-carried-forward evaluation of a StepFunction."""
    idx = np.searchsorted(s.times, t, side="right")
    padded = np.concatenate([[0.0], s.values])
    out = padded[idx]
    return float(out) if np.isscalar(t) else out


class CoxProblem:
    """Weight-independent precomputation for repeated weighted Cox fits.

    Rows are stably sorted by follow-up time; distinct-time blocks and the
    per-row outer products needed by the Newton Hessian are cached so that
    bootstrap replicates pay only O(n q^2) per iteration.
    """

    def __init__(self, X, time, event):
        X = np.asarray(X, dtype=float)
        time = np.asarray(time, dtype=float)
        event = np.asarray(event).astype(bool)
        order = np.argsort(time, kind="stable")
        self.order = order
        self.X = np.ascontiguousarray(X[order])
        self.time = time[order]
        self.event = event[order]
        self.n, self.q = self.X.shape
        # starts of the distinct-time blocks that contain at least one
        # event; the risk set of an event time is the row suffix from its
        # block start (ties stay in their own risk set)
        change = np.flatnonzero(np.diff(self.time) != 0) + 1
        starts = np.concatenate([[0], change])
        block_id = np.repeat(np.arange(starts.size), np.diff(np.r_[starts, self.n]))
        block_has_event = np.zeros(starts.size, dtype=bool)
        np.logical_or.at(block_has_event, block_id[self.event], True)
        self.event_starts = starts[block_has_event]
        self.knot_times = self.time[self.event_starts]
        self.n_event_times = self.event_starts.size
        # suffix sums are taken over a time-reversed contiguous layout
        self._suffix_idx = self.n - 1 - self.event_starts
        self._triu = np.triu_indices(self.q)
        self._X_fused_rev = None
        self._scratch = None

    @property
    def X_fused(self):
        """Per-row [1, x, upper-triangle(x x')] blocks in time-reversed row
        order; one in-place cumsum then yields every risk-set sum S0, S1
        and (symmetric, packed) S2 at once."""
        if self._X_fused_rev is None:
            n, q = self.n, self.q
            iu, ju = self._triu
            fused = np.empty((n, 1 + q + iu.size))
            fused[:, 0] = 1.0
            fused[:, 1 : 1 + q] = self.X
            fused[:, 1 + q :] = self.X[:, iu] * self.X[:, ju]
            self._X_fused_rev = np.ascontiguousarray(fused[::-1])
            self._scratch = np.empty_like(self._X_fused_rev)
        return self._X_fused_rev

    def weight_terms(self, w):
        """Per-fit precomputation depending on weights only."""
        d_all = np.where(self.event, w, 0.0)
        # all events between consecutive event-block starts belong to the
        # earlier block, so one reduceat at the event starts gives D_g
        D = np.add.reduceat(d_all, self.event_starts)
        return d_all, D, self.X.T @ d_all

    def loglik_score_hess(self, theta, w, wt=None, need_hess=True):
        q = self.q
        d_all, D, xw_events = self.weight_terms(w) if wt is None else wt
        eta = self.X @ theta
        c = float(eta.max()) if eta.size else 0.0
        r_rev = np.ascontiguousarray((w * np.exp(eta - c))[::-1])

        if need_hess:
            buf = np.multiply(self.X_fused, r_rev[:, None], out=self._scratch)
            np.cumsum(buf, axis=0, out=buf)
            suff = buf[self._suffix_idx]
            s0 = suff[:, 0]
            s1 = suff[:, 1 : 1 + q]
            s2_packed = suff[:, 1 + q :]
        else:
            s0 = np.cumsum(r_rev)[self._suffix_idx]
            s1 = s2_packed = None

        with np.errstate(divide="ignore"):
            log_s0 = np.log(s0)
        ll = float(d_all @ eta - c * d_all.sum() - D @ log_s0)
        if s1 is None:
            return ll, None, None

        u = s1 / s0[:, None]
        score = xw_events - D @ u
        iu, ju = self._triu
        neg_hess = np.empty((q, q))
        packed = (D / s0) @ s2_packed
        neg_hess[iu, ju] = packed
        neg_hess[ju, iu] = packed
        neg_hess -= (u * D[:, None]).T @ u
        return ll, score, neg_hess

    def fit(self, w, tol=1e-8, max_iter=100, theta0=None):
        theta = np.zeros(self.q) if theta0 is None else np.array(theta0, dtype=float)
        wt = self.weight_terms(w)
        ll, score, neg_hess = self.loglik_score_hess(theta, w, wt)
        gnorm = float(np.linalg.norm(score))
        for it in range(1, max_iter + 1):
            if gnorm <= tol:
                return theta, ll, True, it - 1, gnorm, neg_hess
            if it == 1 and np.linalg.matrix_rank(neg_hess) < self.q:
                raise RankDeficientDesignError(
                    "rank-deficient design after the structural-zero "
                    "interaction rule (collinear columns)"
                )
            step = _checked_solve(neg_hess, score)
            # improvements below float resolution of the log-likelihood must
            # not be rejected, or the endgame stalls short of tol
            slack = 1e-10 * (1.0 + abs(ll))
            new_theta = theta + step
            new_ll, new_score, new_hess = self.loglik_score_hess(new_theta, w, wt)
            halvings = 0
            while new_ll < ll - slack and halvings < 30:
                step *= 0.5
                new_theta = theta + step
                new_ll, _, _ = self.loglik_score_hess(new_theta, w, wt, need_hess=False)
                halvings += 1
            if halvings:
                new_ll, new_score, new_hess = self.loglik_score_hess(new_theta, w, wt)
            improving = new_ll >= ll - slack
            theta, ll, score, neg_hess = new_theta, new_ll, new_score, new_hess
            gnorm = float(np.linalg.norm(score))
            if improving and np.abs(theta).max() > _DIVERGENCE_BOUND:
                raise MonotoneLikelihoodError(
                    "partial likelihood appears monotone (risk-set separation): "
                    f"|theta| exceeded {_DIVERGENCE_BOUND} while still improving"
                )
        raise ConvergenceError(
            f"Cox fit did not converge in {max_iter} iterations "
            f"(gradient norm {gnorm:.3e} > tol {tol:.1e})"
        )

    def baseline(self, theta, w):
        """Distinct event times and Breslow increments D_g / S0_g."""
        if self.n_event_times == 0:
            return np.empty(0), np.empty(0)
        eta = self.X @ theta if self.q else np.zeros(self.n)
        c = float(eta.max()) if eta.size else 0.0
        r_rev = np.ascontiguousarray((w * np.exp(eta - c))[::-1])
        _, D, _ = self.weight_terms(w)
        s0 = np.cumsum(r_rev)[self._suffix_idx]
        if (s0 <= 0).any():
            raise DataValidationError("empty (zero-weight) risk set at an event time")
        increments = (D / s0) * np.exp(-c)
        return self.knot_times.copy(), increments


def _sorted_weights(problem: CoxProblem, w, n: int) -> np.ndarray:
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DataValidationError(f"weights must have shape ({n},)")
    if (w < 0).any() or not w.sum() > 0:
        raise DataValidationError("weights must be nonnegative with positive sum")
    return w[problem.order]


def fit_weighted_cox(d: Dataset, spec: DesignSpec, w=None, tol: float = 1e-8,
                     max_iter: int = 100, theta0=None) -> CoxFit:
    """Fit the weighted Cox model by Newton iteration with step-halving.

    Requires at least two distinct event times and a full-rank design after
    the structural-zero interaction rule. The returned fit satisfies
    ``||score(theta)|| <= tol`` when ``converged`` is set.
    """
    X = spec.build_matrix(d)
    problem = CoxProblem(X, d.time, d.event)
    if problem.n_event_times < 2:
        raise DataValidationError(
            f"need >= 2 distinct event times, got {problem.n_event_times}"
        )
    const = X.var(axis=0) == 0
    if const.any():
        names = [spec.column_names[i] for i in np.flatnonzero(const)]
        raise RankDeficientDesignError(f"constant design column(s): {names}")
    ws = _sorted_weights(problem, w, d.n)
    theta, ll, converged, iters, gnorm, info = problem.fit(
        ws, tol=tol, max_iter=max_iter, theta0=theta0
    )
    return CoxFit(theta=theta, loglik=ll, converged=converged, iterations=iters,
                  grad_norm=gnorm, information=info, spec=spec)


def breslow_baseline(fit: CoxFit, d: Dataset, w=None) -> StepFunction:
    """Baseline cumulative hazard with knots at the distinct event times.

    The increment at event time t is (weighted events at t) divided by the
    weighted risk-set sum of exp(theta.x); increments are invariant to a
    positive rescaling of the weights. All-censored data yield an empty
    step function (identically zero).
    """
    X = fit.spec.build_matrix(d)
    problem = CoxProblem(X, d.time, d.event)
    ws = _sorted_weights(problem, w, d.n)
    knots, increments = problem.baseline(np.asarray(fit.theta, dtype=float), ws)
    return StepFunction(times=knots, values=np.cumsum(increments))
