"""Synthetic data generation, Monte Carlo ground truth, and the
RMSE/coverage experiment harness.

The generator produces four standard-normal covariates, an exposure with
logit -2 + sum(C), two binary post-exposure variables (the first a
structural zero of the surgery component), and a Weibull-type outcome
time driven by a shared per-subject exponential draw:

    Y(n, o) = [ scale * E / exp(0.25 sum(C) - 1.5 M1(n,o) - 1.5 M2(n,o)
                                 + 0.5 o + zeta n) ] ** exponent,  E ~ Exp(1)

All four counterfactual outcome times share one E per subject, and the
counterfactual mediator arms share one uniform per mediator, so arm
comparisons that should be exact are exact while every marginal law is
unchanged. A nonzero ``zeta`` adds a direct surgery-component effect on
the outcome; nonzero ``xi``/``tau`` shift the mediator logits by
``xi*o``/``tau*o``, giving an anesthesia-component effect on the
mediators. Observed data are censored by min(Exp(dropout), cutoff).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .bootstrap import bootstrap_effects
from .data_model import Dataset, MediatorSchema
from .exceptions import (
    BootstrapInstabilityError,
    DataValidationError,
    EstimationError,
    ModelFitError,
)
from .glm import expit

__all__ = [
    "DgpConfig",
    "LatentPanel",
    "SimulatedData",
    "TrueEffects",
    "ExperimentResult",
    "generate_dataset",
    "oracle_truths",
    "run_experiment",
]

ARMS = ((0, 0), (0, 1), (1, 1), (1, 0))

# logit intercepts of the exposure and mediator models; the mediator logit
# gains +n, so the structural mediator sits at -1 + sum(C) in the exposed arm
_EXPOSURE_INTERCEPT = -2.0
_MEDIATOR_INTERCEPT = -2.0


@dataclass(frozen=True)
class DgpConfig:
    """Generator parameters. ``tau`` defaults to ``xi`` so a single
    violation strength drives both mediators unless overridden."""

    n: int
    zeta: float = 0.0               # direct surgery-component effect on the outcome
    xi: float = 0.0                 # anesthesia-component effect on mediator 1
    tau: float | None = None        # anesthesia-component effect on mediator 2
    seed: int = 0
    weibull_exponent: float = 2.0
    weibull_scale: float = 2.0
    dropout_rate: float = 0.5
    admin_cutoff: float = 15.0
    hazard_covariate_coef: float = 0.25
    hazard_mediator_coefs: tuple[float, float] = (-1.5, -1.5)
    hazard_anesthesia_coef: float = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise DataValidationError("n must be >= 1")
        if self.dropout_rate <= 0 or self.admin_cutoff <= 0:
            raise DataValidationError("dropout rate and cutoff must be positive")
        if self.weibull_exponent <= 0 or self.weibull_scale <= 0:
            raise DataValidationError("Weibull transform parameters must be positive")

    @property
    def tau_effective(self) -> float:
        return self.xi if self.tau is None else self.tau


@dataclass
class LatentPanel:
    """Counterfactual mediators and outcome times for each (n, o) arm."""

    m: dict        # (n, o) -> (n_subjects, 2) int array
    y: dict        # (n, o) -> (n_subjects,) float array


@dataclass
class SimulatedData:
    observed: Dataset
    latent: LatentPanel
    config: DgpConfig


def _mediator_arm(cfg: DgpConfig, s_c, v1, v2, n_: int, o_: int):
    p1 = expit(_MEDIATOR_INTERCEPT + s_c + n_ + cfg.xi * o_)
    p2 = expit(_MEDIATOR_INTERCEPT + s_c + n_ + cfg.tau_effective * o_)
    m1 = n_ * (v1 < p1).astype(np.int64)
    m2 = (v2 < p2).astype(np.int64)
    return np.column_stack([m1, m2])


def _outcome(cfg: DgpConfig, s_c, e_draw, m, o_: int, n_: int):
    b_m1, b_m2 = cfg.hazard_mediator_coefs
    lp = (cfg.hazard_covariate_coef * s_c
          + b_m1 * m[:, 0] + b_m2 * m[:, 1]
          + cfg.hazard_anesthesia_coef * o_ + cfg.zeta * n_)
    return (cfg.weibull_scale * e_draw / np.exp(lp)) ** cfg.weibull_exponent


def _draw_panel(cfg: DgpConfig, rng: np.random.Generator, n: int):
    """Covariates plus the full counterfactual panel, in a fixed draw order:
    C, exposure uniform, mediator uniforms, outcome exponential, dropout."""
    c = rng.standard_normal((n, 4))
    s_c = c.sum(axis=1)
    u_a = rng.random(n)
    v1 = rng.random(n)
    v2 = rng.random(n)
    e_draw = rng.standard_exponential(n)
    s1 = rng.exponential(scale=1.0 / cfg.dropout_rate, size=n)
    a = (u_a < expit(_EXPOSURE_INTERCEPT + s_c)).astype(np.int64)
    m = {arm: _mediator_arm(cfg, s_c, v1, v2, *arm) for arm in ARMS}
    y = {arm: _outcome(cfg, s_c, e_draw, m[arm], o_=arm[1], n_=arm[0]) for arm in ARMS}
    return c, s_c, a, m, y, e_draw, s1, v1, v2


def generate_dataset(cfg: DgpConfig, rng: np.random.Generator | None = None) -> SimulatedData:
    """Draw one observed dataset together with its latent counterfactuals.

    The observed rows select the (A, A) arm; follow-up is
    min(Y, dropout, cutoff) with the event flag set when the outcome time
    comes first.
    """
    if rng is None:
        rng = np.random.default_rng([cfg.seed, 0])
    c, _, a, m, y, _, s1, _, _ = _draw_panel(cfg, rng, cfg.n)

    m_obs = np.where(a[:, None] == 1, m[(1, 1)], m[(0, 0)])
    y_raw = np.where(a == 1, y[(1, 1)], y[(0, 0)])
    censor = np.minimum(s1, cfg.admin_cutoff)
    time = np.minimum(y_raw, censor)
    event = (y_raw <= censor).astype(np.int64)

    schema = MediatorSchema(k=2, ell=1, names=("m_1", "m_2"))
    observed = Dataset(c=c, a=a, m=m_obs, time=time, event=event, schema=schema)
    return SimulatedData(observed=observed, latent=LatentPanel(m=m, y=y), config=cfg)


@dataclass
class TrueEffects:
    t: float
    joint: float
    anesthesia: float
    surgery: float
    gamma_true: float   # outcome-side bias ratio induced by zeta
    eta_true: float     # mediator-side bias ratio induced by xi/tau
    mc_size: int
    mc_se: dict         # per-quantity Monte Carlo standard errors


def _ratio_and_se(num_ind: np.ndarray, den_ind: np.ndarray):
    n = num_ind.size
    pn, pdn = num_ind.mean(), den_ind.mean()
    if pdn == 0 or pn == 0:
        raise EstimationError(
            "zero denominator CDF: the horizon t is too small for this mc_n"
        )
    ratio = pn / pdn
    vn = num_ind.var()
    vd = den_ind.var()
    cov = ((num_ind - pn) * (den_ind - pdn)).mean()
    var_ratio = (vn / pdn**2 + pn**2 * vd / pdn**4 - 2 * pn * cov / pdn**3) / n
    return float(ratio), float(math.sqrt(max(var_ratio, 0.0)))


def oracle_truths(cfg: DgpConfig, t: float, mc_n: int = 10**6) -> TrueEffects:
    """Monte Carlo ground truth at horizon t.

    Effect ratios come from empirical CDFs of the latent counterfactual
    outcomes. The bias ratios use controlled-mediator outcomes evaluated
    on shared exponential draws: gamma compares the surgery component on
    vs off with mediators frozen at their no-exposure law; eta compares
    mediators drawn with the anesthesia component off vs on, under the
    anesthesia-on outcome arm with surgery withheld. With no violation
    both equal 1 exactly under the shared-draw coupling.
    """
    rng = np.random.default_rng([cfg.seed, 1])
    _, s_c, _, m, y, e_draw, _, v1, v2 = _draw_panel(cfg, rng, int(mc_n))
    le = {arm: y[arm] <= t for arm in ARMS}

    joint, se_joint = _ratio_and_se(le[(1, 1)], le[(0, 0)])
    anesthesia, se_anesthesia = _ratio_and_se(le[(0, 1)], le[(0, 0)])
    surgery, se_surgery = _ratio_and_se(le[(1, 1)], le[(0, 1)])

    # gamma: mediators frozen at the a=0 law, outcome arm o=1, n toggled
    m_frozen = m[(0, 0)]
    y_n1 = _outcome(cfg, s_c, e_draw, m_frozen, o_=1, n_=1)
    y_n0 = _outcome(cfg, s_c, e_draw, m_frozen, o_=1, n_=0)
    gamma_true, se_gamma = _ratio_and_se(y_n1 <= t, y_n0 <= t)

    # eta: mediator arms (n=0, o=0) vs (n=0, o=1), outcome fixed at (n=0, o=1)
    y_m00 = _outcome(cfg, s_c, e_draw, m[(0, 0)], o_=1, n_=0)
    y_m01 = _outcome(cfg, s_c, e_draw, m[(0, 1)], o_=1, n_=0)
    eta_true, se_eta = _ratio_and_se(y_m00 <= t, y_m01 <= t)

    return TrueEffects(
        t=float(t), joint=joint, anesthesia=anesthesia, surgery=surgery,
        gamma_true=gamma_true, eta_true=eta_true, mc_size=int(mc_n),
        mc_se={"joint": se_joint, "anesthesia": se_anesthesia,
               "surgery": se_surgery, "gamma_true": se_gamma,
               "eta_true": se_eta},
    )


@dataclass
class ExperimentResult:
    truths: TrueEffects
    per_rep: pd.DataFrame    # one row per replication with estimates and CIs
    metrics: pd.DataFrame    # param, kind, rmse, coverage
    kind: str
    grid: np.ndarray
    n_failed_reps: int


def _one_replication(cfg: DgpConfig, t: float, boot_r: int, master_seed: int, r: int):
    rng = np.random.default_rng([master_seed, r, 0])
    sim = generate_dataset(cfg, rng=rng)
    try:
        boot = bootstrap_effects(sim.observed, t, boot_r, seed=(master_seed, r, 1))
    except (ModelFitError, BootstrapInstabilityError, EstimationError) as exc:
        return {"rep": r, "ok": False, "error": str(exc)}
    row = {"rep": r, "ok": True, "error": "",
           "joint": boot.point.joint, "anesthesia": boot.point.anesthesia,
           "surgery": boot.point.surgery, "boot_failed": boot.n_failed}
    for name in ("joint", "anesthesia", "surgery"):
        row[f"{name}_lo"], row[f"{name}_hi"] = boot.ci[name]
    return row


def run_experiment(cfg: DgpConfig, reps: int, t: float, grid, boot_r: int,
                   master_seed: int, kind: str = "gamma", mc_n: int = 10**6,
                   n_jobs: int = 1) -> ExperimentResult:
    """RMSE and coverage of the sensitivity-adjusted anesthesia effect.

    Replication r generates its own sample (stream (master_seed, r, 0))
    and bootstraps it (stream (master_seed, r, 1)); the adjusted estimate
    divides the anesthesia ratio and its CI by each grid value and is
    scored against the Monte Carlo truth. Deterministic given
    ``master_seed``; ``n_jobs`` never changes values.
    """
    if reps < 2:
        raise DataValidationError("reps must be >= 2")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or (grid <= 0).any():
        raise DataValidationError("sensitivity grid values must be positive")

    truths = oracle_truths(replace(cfg, seed=master_seed), t, mc_n=mc_n)

    if n_jobs == 1:
        rows = [_one_replication(cfg, t, boot_r, master_seed, r) for r in range(reps)]
    else:
        rows = Parallel(n_jobs=n_jobs)(
            delayed(_one_replication)(cfg, t, boot_r, master_seed, r)
            for r in range(reps)
        )
    rows.sort(key=lambda row: row["rep"])
    per_rep = pd.DataFrame(rows)

    n_failed = int((~per_rep["ok"]).sum())
    if n_failed > 0.10 * reps:
        raise BootstrapInstabilityError(
            f"{n_failed}/{reps} replications failed; first errors: "
            + "; ".join(per_rep.loc[~per_rep["ok"], "error"].astype(str).head(3))
        )

    good = per_rep[per_rep["ok"]]
    est = good["anesthesia"].to_numpy()
    lo = good["anesthesia_lo"].to_numpy()
    hi = good["anesthesia_hi"].to_numpy()
    truth = truths.anesthesia
    metrics = pd.DataFrame({
        "param": grid,
        "kind": kind,
        "rmse": [float(np.sqrt(np.mean((est / g - truth) ** 2))) for g in grid],
        "coverage": [float(np.mean((lo / g <= truth) & (truth <= hi / g))) for g in grid],
    })
    return ExperimentResult(truths=truths, per_rep=per_rep, metrics=metrics,
                            kind=kind, grid=grid, n_failed_reps=n_failed)
