"""Weighted logistic regression via Newton / IRLS with step-halving.

Every factor of the mediator joint model is one of these fits. The
optimizer is deliberately plain: unpenalized Bernoulli likelihood, exact
Newton steps with halving, gradient-norm stopping rule. Complete
separation is an error rather than a quasi-infinite coefficient vector,
because downstream joint probabilities must stay strictly inside (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConvergenceError,
    DataValidationError,
    RankDeficientDesignError,
    SeparationError,
)

__all__ = ["LogisticFit", "fit_weighted_logistic", "predict_prob"]

# |linear predictor| clamp used for probability evaluation only; keeps
# expit output strictly inside (0, 1) in float64.
_MAX_ETA = 36.0

# Coefficient magnitude at which a still-improving likelihood is treated
# as complete separation.
_SEPARATION_BOUND = 30.0


def expit(eta):
    return 1.0 / (1.0 + np.exp(-eta))


def _bernoulli_loglik(eta, y, w):
    # sum w * (y*eta - log(1 + e^eta)), stable via logaddexp
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def _checked_solve(hess, score):
    """Newton direction with a residual check: LAPACK does not reliably
    flag numerically singular systems, so verify the solution."""
    try:
        step = np.linalg.solve(hess, score)
    except np.linalg.LinAlgError:
        raise RankDeficientDesignError(
            "singular information matrix (collinear design)"
        ) from None
    residual = np.linalg.norm(hess @ step - score)
    if not np.isfinite(step).all() or residual > 1e-4 * max(np.linalg.norm(score), 1e-12):
        raise RankDeficientDesignError(
            "numerically singular information matrix (collinear design)"
        )
    return step


@dataclass
class LogisticFit:
    beta: np.ndarray        # coefficients, intercept first
    converged: bool
    iterations: int
    grad_norm: float        # ||sum w_i (y_i - p_i) x_i|| at beta
    information: np.ndarray  # X' diag(w p (1-p)) X at beta


def fit_weighted_logistic(X, y, w, tol: float = 1e-8, max_iter: int = 100,
                          beta0=None) -> LogisticFit:
    """Maximize the weight-scaled Bernoulli log-likelihood.

    Parameters
    ----------
    X : (n, q) design matrix, intercept column included by the caller.
    y : (n,) 0/1 response.
    w : (n,) nonnegative weights with positive sum.
    tol : stopping rule on the Euclidean norm of the weighted score.
    max_iter : Newton iteration cap.
    beta0 : optional warm start.

    Deterministic for fixed inputs. Raises
    :class:`RankDeficientDesignError` for collinear designs,
    :class:`SeparationError` when coefficients diverge with the likelihood
    still improving, and :class:`ConvergenceError` past ``max_iter``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n, q = X.shape
    if y.shape != (n,) or w.shape != (n,):
        raise DataValidationError("X, y, w must agree on the number of rows")
    if n < q:
        raise DataValidationError(f"need at least q={q} rows, got n={n}")
    if (w < 0).any() or not w.sum() > 0:
        raise DataValidationError("weights must be nonnegative with positive sum")
    if (X == 0).all(axis=0).any():
        raise RankDeficientDesignError("design has an all-zero column")

    beta = np.zeros(q) if beta0 is None else np.array(beta0, dtype=float)
    eta = X @ beta
    ll = _bernoulli_loglik(eta, y, w)

    for it in range(1, max_iter + 1):
        p = expit(eta)
        score = X.T @ (w * (y - p))
        gnorm = float(np.linalg.norm(score))
        if gnorm <= tol:
            info = X.T @ (X * (w * p * (1.0 - p))[:, None])
            return LogisticFit(beta=beta, converged=True, iterations=it - 1,
                               grad_norm=gnorm, information=info)
        wpq = w * p * (1.0 - p)
        hess = X.T @ (X * wpq[:, None])
        if it == 1 and np.linalg.matrix_rank(hess) < q:
            raise RankDeficientDesignError(
                "rank-deficient design (collinear columns)"
            )
        step = _checked_solve(hess, score)

        # accept improvements below the float resolution of the
        # log-likelihood, or the endgame stalls short of tol
        slack = 1e-10 * (1.0 + abs(ll))
        new_beta = beta + step
        new_eta = X @ new_beta
        new_ll = _bernoulli_loglik(new_eta, y, w)
        halvings = 0
        while new_ll < ll - slack and halvings < 30:
            step *= 0.5
            new_beta = beta + step
            new_eta = X @ new_beta
            new_ll = _bernoulli_loglik(new_eta, y, w)
            halvings += 1

        improving = new_ll >= ll - slack
        beta, eta, ll = new_beta, new_eta, new_ll
        if improving and np.abs(beta).max() > _SEPARATION_BOUND:
            raise SeparationError(
                "complete separation suspected: |beta| exceeded "
                f"{_SEPARATION_BOUND} while the likelihood is still improving"
            )

    raise ConvergenceError(
        f"logistic fit did not converge in {max_iter} iterations "
        f"(gradient norm {gnorm:.3e} > tol {tol:.1e})"
    )


def predict_prob(fit: LogisticFit, x) -> float:
    """Evaluate logit^{-1}(beta . (1, x)); always strictly inside (0, 1)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size + 1 != fit.beta.size:
        raise DataValidationError(
            f"covariate row has length {x.size}, expected {fit.beta.size - 1}"
        )
    eta = fit.beta[0] + x @ fit.beta[1:]
    return float(expit(np.clip(eta, -_MAX_ETA, _MAX_ETA)))


def predict_prob_rows(beta, X) -> np.ndarray:
    """Vectorized probabilities for a design block (intercept prepended)."""
    eta = beta[0] + X @ beta[1:]
    return expit(np.clip(eta, -_MAX_ETA, _MAX_ETA))
