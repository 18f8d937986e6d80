"""Bayesian-bootstrap inference for the effect ratios.

Each replicate reweights the observations with a flat-Dirichlet draw
(scaled to sum to n) and refits the entire pipeline: outcome model,
mediator model, baseline hazard, plug-in risks. Replicate r draws its
weights from a generator seeded by (seed, r), so results are a pure
function of the inputs and identical under any parallel schedule.

Confidence intervals are 2.5/97.5 percentile intervals of the replicate
ratios. Replicates whose refit fails to converge are excluded from the
percentiles and reported; more than 10% failures aborts, since wholesale
non-convergence under mild reweighting signals an unstable fit rather
than sampling noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .data_model import Dataset
from .estimator import EffectEstimates
from .exceptions import (
    BootstrapInstabilityError,
    DataValidationError,
    ModelFitError,
)
from .pipeline import EstimatorPipeline

__all__ = ["BootstrapResult", "draw_weights", "bootstrap_effects"]

EFFECT_COLUMNS = ("joint", "anesthesia", "surgery")


def draw_weights(n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. unit-exponential draws normalized to sum to n (a flat
    Dirichlet draw scaled by n). All entries strictly positive."""
    if n < 1:
        raise DataValidationError("n must be >= 1")
    e = rng.standard_exponential(n)
    return e * (n / e.sum())


def replicate_rng(seed, r: int) -> np.random.Generator:
    """Generator for replicate r under base seed ``seed`` (int or tuple)."""
    if isinstance(seed, (int, np.integer)):
        entropy = [int(seed)]
    else:
        entropy = [int(s) for s in seed]
    return np.random.default_rng(entropy + [int(r)])


@dataclass
class BootstrapResult:
    replicates: np.ndarray               # (R, 3): joint, anesthesia, surgery; NaN if failed
    converged: np.ndarray                # (R,) bool
    point: EffectEstimates               # unit-weight estimates
    ci: dict                             # effect name -> (lower, upper)
    seed: object
    R: int
    failure_messages: list = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return int((~self.converged).sum())

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.replicates, columns=list(EFFECT_COLUMNS))
        df.insert(0, "rep", np.arange(self.R))
        df["converged"] = self.converged
        return df


def _run_replicates(d: Dataset, t: float, seed, reps, warm_theta, warm_betas,
                    tol: float, max_iter: int):
    pipe = EstimatorPipeline(d, tol=tol, max_iter=max_iter)
    pipe._warm_theta = warm_theta
    pipe._warm_betas = warm_betas
    out = []
    for r in reps:
        w = draw_weights(d.n, replicate_rng(seed, r))
        try:
            eff = pipe.effects_at(w, t).effects
            out.append((r, (eff.joint, eff.anesthesia, eff.surgery), None))
        except ModelFitError as exc:
            out.append((r, None, f"replicate {r}: {exc}"))
    return out


def bootstrap_effects(d: Dataset, t: float, R: int, seed, n_jobs: int = 1,
                      tol: float = 1e-8, max_iter: int = 100) -> BootstrapResult:
    """Point estimates plus Bayesian-bootstrap percentile intervals at t.

    ``n_jobs`` only schedules replicates across processes; it never
    changes any numeric output.
    """
    if R < 2:
        raise DataValidationError("R must be >= 2")
    pipe = EstimatorPipeline(d, tol=tol, max_iter=max_iter)
    point = pipe.point_fit(t)

    if n_jobs == 1:
        results = _run_replicates(d, t, seed, range(R), point.theta, point.betas,
                                  tol, max_iter)
    else:
        n_chunks = max(1, min(R, n_jobs * 4))
        size = math.ceil(R / n_chunks)
        chunks = [range(i, min(i + size, R)) for i in range(0, R, size)]
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_run_replicates)(d, t, seed, chunk, point.theta, point.betas,
                                     tol, max_iter)
            for chunk in chunks
        )
        results = [item for part in parts for item in part]

    replicates = np.full((R, 3), np.nan)
    converged = np.zeros(R, dtype=bool)
    messages = []
    for r, values, err in results:
        if values is None:
            messages.append(err)
        else:
            replicates[r] = values
            converged[r] = True

    n_failed = R - int(converged.sum())
    if n_failed > 0.10 * R:
        raise BootstrapInstabilityError(
            f"{n_failed}/{R} bootstrap replicates failed to converge; "
            "the fit is unstable under reweighting. First failures: "
            + "; ".join(messages[:3])
        )

    good = replicates[converged]
    ci = {
        name: (float(np.percentile(good[:, i], 2.5)),
               float(np.percentile(good[:, i], 97.5)))
        for i, name in enumerate(EFFECT_COLUMNS)
    }
    return BootstrapResult(replicates=replicates, converged=converged,
                           point=point.effects, ci=ci, seed=seed, R=R,
                           failure_messages=messages)
