"""Prepared end-to-end pipeline for repeated weighted refits.

Bootstrap replicates and simulation replications refit the entire
(outcome model, mediator model, plug-in estimator) stack under new
observation weights. Everything weight-independent -- design matrices,
the time ordering, risk-set block structure, per-row outer products --
is assembled once here so a refit costs a few Newton iterations.

Each refit warm-starts from the unit-weight point fit, never from another
replicate, so results are independent of replicate execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cox import CoxProblem, DesignSpec
from .data_model import Dataset
from .estimator import (
    EffectEstimates,
    IDENTIFIED_ARMS,
    hazard_combo_terms,
    plugin_risk,
)
from .exceptions import DataValidationError, DegenerateMediatorError, EstimationError
from .glm import fit_weighted_logistic
from .mediators import (
    MediatorJointModel,
    _factor_recipes,
    enumerate_joint_rows,
)

__all__ = ["EstimatorPipeline", "PipelineFit"]


@dataclass
class PipelineFit:
    theta: np.ndarray
    betas: list[np.ndarray]
    lambda_t: float
    risks: dict          # (a, a_star) -> risk
    effects: EffectEstimates


class EstimatorPipeline:
    def __init__(self, d: Dataset, tol: float = 1e-8, max_iter: int = 100):
        self.d = d
        self.tol = tol
        self.max_iter = max_iter
        self.spec = DesignSpec(schema=d.schema, p=d.p)

        X = self.spec.build_matrix(d)
        const = X.var(axis=0) == 0
        if const.any():
            names = [self.spec.column_names[i] for i in np.flatnonzero(const)]
            raise DataValidationError(f"constant design column(s): {names}")
        self.cox_problem = CoxProblem(X, d.time, d.event)
        if self.cox_problem.n_event_times < 2:
            raise DataValidationError(
                f"need >= 2 distinct event times, got {self.cox_problem.n_event_times}"
            )
        self.cox_problem.X_fused  # build the Hessian cache once

        self.recipes = _factor_recipes(d.schema)
        a_col = d.a.astype(float)
        self.factor_rows = []
        self.factor_X = []
        self.factor_y = []
        for recipe in self.recipes:
            rows = d.a == 1 if recipe.structural else np.ones(d.n, dtype=bool)
            y = d.m[rows, recipe.index].astype(float)
            if y.size == 0 or y.min() == y.max():
                raise DegenerateMediatorError(
                    f"mediator m_{recipe.index + 1} is constant within its "
                    "fitting subsample"
                )
            Xr = recipe.design(
                a_col[rows], d.m[rows][:, list(recipe.earlier)].astype(float),
                d.c[rows], d.schema.ell,
            )
            self.factor_rows.append(rows)
            self.factor_X.append(np.hstack([np.ones((rows.sum(), 1)), Xr]))
            self.factor_y.append(y)

        self._warm_theta = None
        self._warm_betas = None

    def _fit_models(self, w):
        ws = w[self.cox_problem.order]
        theta, _, _, _, _, _ = self.cox_problem.fit(
            ws, tol=self.tol, max_iter=self.max_iter, theta0=self._warm_theta
        )
        betas = []
        for rows, X, y, warm in zip(
            self.factor_rows, self.factor_X, self.factor_y,
            self._warm_betas or [None] * len(self.factor_X),
        ):
            fit = fit_weighted_logistic(X, y, w[rows], tol=self.tol,
                                        max_iter=self.max_iter, beta0=warm)
            betas.append(fit.beta)
        return theta, betas, ws

    def _lambda_at(self, theta, ws, t: float) -> float:
        knots, increments = self.cox_problem.baseline(theta, ws)
        upto = np.searchsorted(knots, t, side="right")
        return float(increments[:upto].sum())

    def _mediator_model(self, betas) -> MediatorJointModel:
        fits = [_BareFit(beta) for beta in betas]
        return MediatorJointModel(schema=self.d.schema, fits=fits, recipes=self.recipes)

    def effects_at(self, w, t: float) -> PipelineFit:
        """Refit everything under weights ``w`` and evaluate the three
        identified risks and their ratios at horizon ``t``."""
        w = np.asarray(w, dtype=float)
        theta, betas, ws = self._fit_models(w)
        lam = self._lambda_at(theta, ws, t)
        mdl = self._mediator_model(betas)
        p_arm = {
            0: enumerate_joint_rows(mdl, 0, self.d.c),
            1: enumerate_joint_rows(mdl, 1, self.d.c),
        }
        _, _, _, th_c = self.spec.theta_blocks(theta)
        row_terms = self.d.c @ th_c
        risks = {}
        for a, a_star in IDENTIFIED_ARMS:
            combo = hazard_combo_terms(self.spec, theta, a_star)
            risks[(a, a_star)] = plugin_risk(lam, combo, row_terms, p_arm[a], w)
        if risks[(0, 0)] <= 0 or risks[(0, 1)] <= 0:
            raise EstimationError(
                f"zero denominator risk at t={t}: move the horizon past the "
                "first event time"
            )
        effects = EffectEstimates(
            t=float(t),
            joint=risks[(1, 1)] / risks[(0, 0)],
            anesthesia=risks[(0, 1)] / risks[(0, 0)],
            surgery=risks[(1, 1)] / risks[(0, 1)],
        )
        return PipelineFit(theta=theta, betas=betas, lambda_t=lam,
                           risks=risks, effects=effects)

    def point_fit(self, t: float) -> PipelineFit:
        """Unit-weight fit; also primes the warm start used by replicates."""
        fit = self.effects_at(np.ones(self.d.n), t)
        self._warm_theta = fit.theta
        self._warm_betas = fit.betas
        return fit


class _BareFit:
    """Minimal stand-in carrying only the coefficient vector."""

    __slots__ = ("beta",)

    def __init__(self, beta):
        self.beta = beta
