"""Plug-in estimation of counterfactual diagnosis risks and effect ratios.

The identifying functional standardizes the outcome conditional over the
mediator law of one arm and the empirical covariate distribution:

    risk(a, a*) = 1 - (sum_i w_i)^{-1} sum_i w_i sum_m
                  exp{-Lambda0(t) exp(lp(a*, m, c_i))} Pr(m | a, c_i)

where ``a`` selects the mediator arm, ``a*`` the arm of the hazard linear
predictor, and the outer sum runs over the (weighted) observed covariate
rows. Only (a, a*) in {(0,0), (0,1), (1,1)} are identified: with (1, 0)
the mediator law under exposure puts mass on configurations that occur
only with exposure, where the outcome conditional given a=0 does not
exist. That request is rejected rather than extrapolated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cox import CoxFit, StepFunction, cumhaz_at
from .data_model import Dataset
from .exceptions import (
    DataValidationError,
    EnumerationCapError,
    EstimationError,
    InternalCheckError,
    UnidentifiedContrastError,
)
from .mediators import (
    ENUMERATION_CAP,
    MediatorJointModel,
    enumerate_joint_rows,
    mediator_combinations,
)

__all__ = [
    "CounterfactualRisk",
    "EffectEstimates",
    "CurveSet",
    "FrontdoorPsi01",
    "estimate_psi",
    "survival_curves",
    "effect_ratios",
    "frontdoor_psi01_empirical",
    "estimate_psi01_extended",
]

IDENTIFIED_ARMS = ((0, 0), (0, 1), (1, 1))


@dataclass(frozen=True)
class CounterfactualRisk:
    a: int        # mediator arm
    a_star: int   # outcome (hazard) arm
    t: float
    risk: float


@dataclass(frozen=True)
class EffectEstimates:
    t: float
    joint: float       # risk(1,1) / risk(0,0)
    anesthesia: float  # risk(0,1) / risk(0,0)
    surgery: float     # risk(1,1) / risk(0,1)


@dataclass
class CurveSet:
    grid: np.ndarray
    s00: np.ndarray
    s01: np.ndarray
    s11: np.ndarray


def _check_arms(a: int, a_star: int) -> None:
    if (a, a_star) == (1, 0):
        raise UnidentifiedContrastError(
            "(a, a*) = (1, 0) is not identified: Pr(m | a=0, c) = 0 on the "
            "structural-zero support, so the outcome conditional under a*=0 "
            "is undefined for mediator values drawn from the exposed arm"
        )
    if (a, a_star) not in IDENTIFIED_ARMS:
        raise DataValidationError(f"(a, a*) must be one of {IDENTIFIED_ARMS}")


def hazard_combo_terms(spec, theta, a_star: int) -> np.ndarray:
    """Mediator-combination part of the hazard linear predictor for arm a*:
    theta_a * a* + theta_m . m + a* theta_int . m_{j>ell}, one value per
    combination in lexicographic order."""
    th_a, th_m, th_int, _ = spec.theta_blocks(theta)
    combos = mediator_combinations(spec.schema.k)
    inter = list(spec.interaction_indices)
    return th_a * a_star + combos @ th_m + a_star * (combos[:, inter] @ th_int)


def hazard_covariate_terms(spec, theta, C: np.ndarray) -> np.ndarray:
    _, _, _, th_c = spec.theta_blocks(theta)
    return C @ th_c


def plugin_risk(lambda_t: float, combo_terms: np.ndarray, row_terms: np.ndarray,
                P: np.ndarray, w: np.ndarray) -> float:
    """Evaluate the double sum given precomputed pieces; the outer sum uses
    numpy pairwise summation, so the result does not depend on how rows
    might be partitioned across workers."""
    with np.errstate(over="ignore"):
        hazard_scale = np.exp(row_terms[:, None] + combo_terms[None, :])
        surv = np.exp(-lambda_t * hazard_scale)
    inner = (surv * P).sum(axis=1)
    return 1.0 - float((w * inner).sum() / w.sum())


def _unit_weights(d: Dataset, w):
    if w is None:
        return np.ones(d.n)
    w = np.asarray(w, dtype=float)
    if w.shape != (d.n,):
        raise DataValidationError(f"weights must have shape ({d.n},)")
    if (w < 0).any() or not w.sum() > 0:
        raise DataValidationError("weights must be nonnegative with positive sum")
    return w


def estimate_psi(cox: CoxFit, base: StepFunction, med: MediatorJointModel,
                 d: Dataset, a: int, a_star: int, t: float, w=None) -> CounterfactualRisk:
    """Substitution estimate of the diagnosis risk by time t under mediator
    arm ``a`` and outcome arm ``a_star``.

    Cost is O(n 2^k): one mediator enumeration per covariate row. Before
    the first baseline knot the risk is exactly 0.
    """
    _check_arms(a, a_star)
    if t < 0:
        raise DataValidationError("t must be >= 0")
    w = _unit_weights(d, w)
    lam = cumhaz_at(base, t)
    P = enumerate_joint_rows(med, a, d.c)
    risk = plugin_risk(lam, hazard_combo_terms(cox.spec, cox.theta, a_star),
                       hazard_covariate_terms(cox.spec, cox.theta, d.c), P, w)
    return CounterfactualRisk(a=a, a_star=a_star, t=float(t), risk=risk)


def survival_curves(cox: CoxFit, base: StepFunction, med: MediatorJointModel,
                    d: Dataset, grid, w=None) -> CurveSet:
    """Counterfactual survival S_{a a*}(t) = 1 - risk over a sorted grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DataValidationError("time grid must be nonempty")
    if (np.diff(grid) < 0).any():
        raise DataValidationError("time grid must be sorted")
    w = _unit_weights(d, w)
    lams = cumhaz_at(base, grid)
    curves = {}
    for arm_m, arm_y in IDENTIFIED_ARMS:
        P = enumerate_joint_rows(med, arm_m, d.c)
        combo = hazard_combo_terms(cox.spec, cox.theta, arm_y)
        rows = hazard_covariate_terms(cox.spec, cox.theta, d.c)
        surv = np.array([1.0 - plugin_risk(l, combo, rows, P, w) for l in lams])
        curves[(arm_m, arm_y)] = surv
    return CurveSet(grid=grid, s00=curves[(0, 0)], s01=curves[(0, 1)],
                    s11=curves[(1, 1)])


def effect_ratios(r00: CounterfactualRisk, r01: CounterfactualRisk,
                  r11: CounterfactualRisk) -> EffectEstimates:
    """Relative-risk contrasts at a common horizon.

    joint = r11/r00, anesthesia = r01/r00, surgery = r11/r01; the
    telescoping identity joint = anesthesia * surgery is algebraic.
    """
    expected = {(0, 0): r00, (0, 1): r01, (1, 1): r11}
    for (a, a_star), r in expected.items():
        if (r.a, r.a_star) != (a, a_star):
            raise DataValidationError(
                f"risk argument for arms {(a, a_star)} carries {(r.a, r.a_star)}"
            )
    if not (r00.t == r01.t == r11.t):
        raise DataValidationError("risks must share the same horizon t")
    if r00.risk <= 0 or r01.risk <= 0:
        raise EstimationError(
            "zero denominator: both baseline risks must be positive "
            f"(risk00={r00.risk}, risk01={r01.risk})"
        )
    return EffectEstimates(
        t=r00.t,
        joint=r11.risk / r00.risk,
        anesthesia=r01.risk / r00.risk,
        surgery=r11.risk / r01.risk,
    )


@dataclass(frozen=True)
class FrontdoorPsi01:
    """Both empirical routes to Pr{Y(n=0, o=1) <= t} on discrete data."""

    value: float              # direct plug-in route
    arithmetic_route: float   # front-door minus back-door arithmetic
    gap: float

    def __float__(self):
        return self.value


def frontdoor_psi01_empirical(d: Dataset, t: float) -> FrontdoorPsi01:
    """Compute the t-risk under (mediators from a=0, outcome from a=1) two
    ways from raw cell frequencies and check they coincide.

    Route (i) plugs empirical conditionals into the identification sum
    directly. Route (ii) evaluates the front-door formula for the no-surgery
    arm, subtracts the a=0 back-door term, and rescales by Pr(a=1). The two
    agree by algebra; a gap above 1e-10 signals an implementation bug and
    raises :class:`InternalCheckError`.

    Requires p=0 and fully uncensored data.
    """
    if d.p != 0:
        raise DataValidationError("front-door check requires p=0 (no covariates)")
    if not (d.event == 1).all():
        raise DataValidationError("front-door check requires uncensored data")
    k = d.schema.k
    if k > ENUMERATION_CAP:
        raise EnumerationCapError(f"k={k} exceeds the enumeration cap")

    code = d.m @ (1 << np.arange(k - 1, -1, -1)) if k else np.zeros(d.n, dtype=np.int64)
    n_cells = 1 << k
    idx = d.a * n_cells + code
    counts = np.bincount(idx, minlength=2 * n_cells).astype(float)
    hits = np.bincount(idx, weights=(d.time <= t).astype(float), minlength=2 * n_cells)
    n0_cell, n1_cell = counts[:n_cells], counts[n_cells:]
    e0_cell, e1_cell = hits[:n_cells], hits[n_cells:]
    n0, n1 = n0_cell.sum(), n1_cell.sum()
    if n0 == 0 or n1 == 0:
        raise DataValidationError("both exposure arms must be present")

    support0 = np.flatnonzero(n0_cell > 0)
    missing = support0[n1_cell[support0] == 0]
    if missing.size:
        raise EstimationError(
            "empty cell: Pr(a=1, m)=0 for mediator pattern(s) "
            f"{missing.tolist()} inside the a=0 support"
        )

    pr_m_given_a0 = n0_cell[support0] / n0
    pr_y_a1_m = e1_cell[support0] / n1_cell[support0]
    direct = float(pr_m_given_a0 @ pr_y_a1_m)

    n_tot = n0 + n1
    pr_a0, pr_a1 = n0 / n_tot, n1 / n_tot
    pr_y_a0_m = e0_cell[support0] / n0_cell[support0]
    frontdoor_n0 = float(pr_m_given_a0 @ (pr_y_a0_m * pr_a0 + pr_y_a1_m * pr_a1))
    arithmetic = (frontdoor_n0 - (e0_cell.sum() / n0) * pr_a0) / pr_a1

    gap = abs(direct - arithmetic)
    if gap > 1e-10:
        raise InternalCheckError(
            f"front-door identity violated: |direct - arithmetic| = {gap:.3e}"
        )
    return FrontdoorPsi01(value=direct, arithmetic_route=float(arithmetic), gap=gap)


def random_frontdoor_instance(rng: np.random.Generator, n: int):
    """Random discrete uncensored instance (p=0) on which the two
    front-door routes are both defined; returns (dataset, horizon).

    Resamples until every mediator pattern in the a=0 support also occurs
    with a=1 (the arithmetic route needs those cells). Deterministic for a
    given generator state.
    """
    from .data_model import MediatorSchema  # local import to avoid cycle noise

    if n < 8:
        raise DataValidationError("need n >= 8 rows for a usable instance")
    while True:
        k = int(rng.integers(1, 4))
        ell = int(rng.integers(0, k + 1))
        a = rng.integers(0, 2, size=n)
        if a.min() == a.max():
            continue
        m = np.zeros((n, k), dtype=np.int64)
        for j in range(k):
            base = rng.uniform(0.25, 0.75)
            shift = rng.uniform(-0.2, 0.2)
            p = np.clip(base + shift * a, 0.1, 0.9)
            m[:, j] = rng.random(n) < p
            if j < ell:
                m[:, j] *= a
        time = rng.uniform(0.1, 10.0, size=n)
        schema = MediatorSchema(k=k, ell=ell, names=tuple(f"m_{j+1}" for j in range(k)))
        d = Dataset(c=np.empty((n, 0)), a=a, m=m, time=time,
                    event=np.ones(n, dtype=np.int64), schema=schema)
        code = d.m @ (1 << np.arange(k - 1, -1, -1))
        support0 = set(code[d.a == 0].tolist())
        support1 = set(code[d.a == 1].tolist())
        if not support0 <= support1:
            continue
        return d, float(np.median(time))


def estimate_psi01_extended(cox_l: CoxFit, base_l: StepFunction,
                            med_l: MediatorJointModel, l_model: MediatorJointModel,
                            d: Dataset, t: float, l_arm: int, w=None) -> CounterfactualRisk:
    """Extended-graph estimate of the (mediators at 0, outcome at 1) risk
    when a binary block L co-determines mediators and outcome.

    ``cox_l`` and ``med_l`` must be fit with covariates ``[c, l]`` (the L
    columns appended after the baseline covariates), while ``l_model``
    models L given (a, c) as a factorized joint. The estimate sums over
    both the L block (drawn from arm ``l_arm``) and the mediator block
    (drawn conditional on (l, a=0, c)):

        1 - mean_i sum_l sum_m exp{-Lambda0(t) exp(lp(1, m, c_i, l))}
            Pr(m | l, a=0, c_i) Pr(l | a=l_arm, c_i)

    With an empty L block this reduces exactly to
    ``estimate_psi(a=0 -> mediators, a*=1 -> outcome)``.
    """
    if l_arm not in (0, 1):
        raise DataValidationError("l_arm must be 0 or 1")
    if t < 0:
        raise DataValidationError("t must be >= 0")
    k = med_l.schema.k
    k_l = l_model.schema.k
    if k + k_l > ENUMERATION_CAP:
        raise EnumerationCapError(
            f"k + k_L = {k + k_l} exceeds the enumeration cap of {ENUMERATION_CAP}"
        )
    if cox_l.spec.p != d.p + k_l:
        raise DataValidationError(
            f"outcome model expects {cox_l.spec.p} covariates; dataset has p={d.p} "
            f"and the L block adds {k_l}"
        )
    w = _unit_weights(d, w)
    lam = cumhaz_at(base_l, t)
    combo = hazard_combo_terms(cox_l.spec, cox_l.theta, 1)
    p_l = enumerate_joint_rows(l_model, l_arm, d.c)
    l_combos = mediator_combinations(k_l)

    inner_total = np.zeros(d.n)
    with np.errstate(over="ignore"):
        for s, l_vec in enumerate(l_combos):
            c_aug = np.hstack([d.c, np.broadcast_to(l_vec, (d.n, k_l))])
            p_m = enumerate_joint_rows(med_l, 0, c_aug)
            rows = hazard_covariate_terms(cox_l.spec, cox_l.theta, c_aug)
            surv = np.exp(-lam * np.exp(rows[:, None] + combo[None, :]))
            inner_total += (surv * p_m).sum(axis=1) * p_l[:, s]
    risk = 1.0 - float((w * inner_total).sum() / w.sum())
    return CounterfactualRisk(a=0, a_star=1, t=float(t), risk=risk)
