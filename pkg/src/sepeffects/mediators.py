"""Factorized joint mediator model Pr(m | a, c) with structural zeros.

The joint law is fit one conditional at a time, in schema order (the
structural-zero mediators come first):

* factor j <= ell is fit on exposed rows only and its regressors exclude
  the exposure; conditional on a=0 the factor is the point mass at m_j=0
  and is never evaluated through the model;
* factor j > ell is fit on all rows with regressors (a, earlier
  mediators, c). An earlier structural-zero mediator m_i enters through
  the single product column a*m_i, which equals m_i numerically; keeping
  one column avoids a rank-deficient design.

Regressor order within each factor: intercept, exposure (j > ell only),
earlier mediators in index order, covariates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Dataset, MediatorSchema
from .exceptions import (
    DataValidationError,
    DegenerateMediatorError,
    EnumerationCapError,
)
from .glm import LogisticFit, expit, fit_weighted_logistic, predict_prob_rows

__all__ = [
    "ENUMERATION_CAP",
    "FactorRecipe",
    "MediatorJointModel",
    "fit_mediator_model",
    "joint_prob",
    "enumerate_joint",
    "mediator_combinations",
]

# 2^k terms appear in every estimator sum; beyond this cap the cost is
# dominated by enumeration and the request is refused.
ENUMERATION_CAP = 20


@dataclass(frozen=True)
class FactorRecipe:
    index: int                 # 0-based mediator index j
    structural: bool           # j < ell: exposed-rows-only fit, no exposure term
    uses_exposure: bool
    earlier: tuple[int, ...]   # indices of regressor mediators (all i < j)

    def design(self, a_col: np.ndarray, m_earlier: np.ndarray, c: np.ndarray,
               ell: int) -> np.ndarray:
        """Assemble the factor design (without intercept; predict_prob_rows
        and fit_weighted_logistic prepend it / expect it respectively)."""
        cols = []
        if self.uses_exposure:
            cols.append(a_col[:, None])
        for pos, i in enumerate(self.earlier):
            col = m_earlier[:, pos]
            if i < ell and self.uses_exposure:
                col = col * a_col  # a*m_i; equals m_i on rows where m_i can be 1
            cols.append(col[:, None])
        cols.append(c)
        return np.hstack(cols) if cols else np.empty((len(a_col), 0))


@dataclass
class MediatorJointModel:
    schema: MediatorSchema
    fits: list[LogisticFit]
    recipes: list[FactorRecipe]

    @property
    def k(self) -> int:
        return self.schema.k


def _factor_recipes(schema: MediatorSchema) -> list[FactorRecipe]:
    return [
        FactorRecipe(
            index=j,
            structural=j < schema.ell,
            uses_exposure=j >= schema.ell,
            earlier=tuple(range(j)),
        )
        for j in range(schema.k)
    ]


def fit_mediator_model(d: Dataset, w=None, tol: float = 1e-8,
                       max_iter: int = 100) -> MediatorJointModel:
    """Fit all k factors in schema order.

    Structural factors (j <= ell) use exposed rows only. A factor whose
    response is constant within its fitting subsample has no estimable
    conditional law and raises :class:`DegenerateMediatorError`.
    """
    w = np.ones(d.n) if w is None else np.asarray(w, dtype=float)
    if w.shape != (d.n,):
        raise DataValidationError(f"weights must have shape ({d.n},)")
    recipes = _factor_recipes(d.schema)
    a_col = d.a.astype(float)
    fits: list[LogisticFit] = []
    for recipe in recipes:
        j = recipe.index
        rows = d.a == 1 if recipe.structural else np.ones(d.n, dtype=bool)
        if not rows.any():
            raise DataValidationError(
                f"no exposed rows to fit structural mediator m_{j + 1}"
            )
        y = d.m[rows, j].astype(float)
        if y.min() == y.max():
            raise DegenerateMediatorError(
                f"mediator m_{j + 1} ('{d.schema.names[j]}') is constant "
                "within its fitting subsample"
            )
        Xr = recipe.design(a_col[rows], d.m[rows][:, list(recipe.earlier)].astype(float),
                           d.c[rows], d.schema.ell)
        X = np.hstack([np.ones((rows.sum(), 1)), Xr])
        fits.append(fit_weighted_logistic(X, y, w[rows], tol=tol, max_iter=max_iter))
    return MediatorJointModel(schema=d.schema, fits=fits, recipes=recipes)


def mediator_combinations(k: int) -> np.ndarray:
    """All binary vectors of length k in lexicographic order, shape (2^k, k).

    Row index read as a binary number with m_1 as the most significant bit.
    """
    if k > ENUMERATION_CAP:
        raise EnumerationCapError(
            f"k={k} exceeds the enumeration cap of {ENUMERATION_CAP}"
        )
    if k == 0:
        return np.zeros((1, 0))
    idx = np.arange(2 ** k)
    return ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(float)


def _factor_prob_rows(mdl: MediatorJointModel, j: int, a: int,
                      C: np.ndarray, m_prefix: np.ndarray) -> np.ndarray:
    """P(m_j = 1 | a, c, m_prefix) for every covariate row."""
    recipe = mdl.recipes[j]
    n = C.shape[0]
    a_col = np.full(n, float(a))
    m_earlier = np.broadcast_to(m_prefix, (n, len(recipe.earlier)))
    Xr = recipe.design(a_col, np.asarray(m_earlier, dtype=float), C, mdl.schema.ell)
    return predict_prob_rows(mdl.fits[j].beta, Xr)


def enumerate_joint_rows(mdl: MediatorJointModel, a: int, C: np.ndarray) -> np.ndarray:
    """Joint probabilities for all 2^k mediator vectors at each covariate
    row; shape (n, 2^k), rows sum to 1, combination order lexicographic."""
    k, ell = mdl.schema.k, mdl.schema.ell
    combos = mediator_combinations(k)
    n = C.shape[0]
    out = np.ones((n, combos.shape[0]))
    cache: dict[tuple[int, tuple[float, ...]], np.ndarray] = {}
    for s, m in enumerate(combos):
        for j in range(k):
            if a == 0 and j < ell:
                if m[j] == 1:
                    out[:, s] = 0.0
                    break
                continue  # point mass at 0: factor contributes 1
            key = (j, tuple(m[:j]))
            pj = cache.get(key)
            if pj is None:
                pj = _factor_prob_rows(mdl, j, a, C, m[:j])
                cache[key] = pj
            out[:, s] *= pj if m[j] == 1 else (1.0 - pj)
    return out


def joint_prob(mdl: MediatorJointModel, m, a: int, c) -> float:
    """Probability of one mediator vector: the product of its factors."""
    m = np.asarray(m, dtype=float)
    if m.shape != (mdl.schema.k,) or not np.isin(m, (0.0, 1.0)).all():
        raise DataValidationError(f"m must be a 0/1 vector of length {mdl.schema.k}")
    c = np.atleast_2d(np.asarray(c, dtype=float))
    prob = 1.0
    for j in range(mdl.schema.k):
        if a == 0 and j < mdl.schema.ell:
            if m[j] == 1:
                return 0.0
            continue
        pj = float(_factor_prob_rows(mdl, j, a, c, m[:j])[0])
        prob *= pj if m[j] == 1 else 1.0 - pj
    return prob


def enumerate_joint(mdl: MediatorJointModel, a: int, c) -> np.ndarray:
    """Probability vector over {0,1}^k in lexicographic order; sums to 1.

    Under a=0 every vector with a structural coordinate set to 1 gets
    exactly zero mass.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    return enumerate_joint_rows(mdl, a, c)[0]
