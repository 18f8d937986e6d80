"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they
complete. Criteria 1-4 are statistical and take minutes at their stated
replication counts; they are marked ``slow``. Everything is seeded, so a
pass is reproducible bit-for-bit.
"""

import itertools
import json
import math

import numpy as np
import pytest

from sepeffects import (
    CoxFit,
    Dataset,
    DesignSpec,
    DgpConfig,
    MediatorSchema,
    adjusted_effect,
    bootstrap_effects,
    breslow_baseline,
    crossing_points,
    cumhaz_at,
    effect_ratios,
    estimate_psi,
    fit_mediator_model,
    fit_weighted_cox,
    frontdoor_psi01_empirical,
    generate_dataset,
    oracle_truths,
    run_experiment,
    write_dataset,
)
from sepeffects.cli import main
from sepeffects.estimator import CounterfactualRisk, random_frontdoor_instance
from sepeffects.mediators import enumerate_joint, mediator_combinations
from sepeffects.pipeline import EstimatorPipeline
from sepeffects.pseudo_exposure import EligibilityTable, N_MONTHS, assign_pseudo_months

from conftest import toy_dataset
from test_estimator import fit_all, oracle_psi

MASTER = 20260810
HORIZON = 5.0          # evaluation horizon matching the generator's truths
N_SAMPLE = 5000
REPS = 100
BOOT_R = 200
GRID = np.round(np.arange(0.9, 1.6001, 0.05), 10)
PAPER_TRUTH_ANCHORS = (0.92, 1.28, 0.71)  # joint, anesthesia, surgery


def report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num} {name}: {status} {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


@pytest.mark.slow
def test_criterion_1_oracle_consistency():
    truths = oracle_truths(DgpConfig(n=1, seed=MASTER), HORIZON, mc_n=1_000_000)
    tr = np.array([truths.joint, truths.anesthesia, truths.surgery])
    anchor_gap = np.abs(tr - np.array(PAPER_TRUTH_ANCHORS)).max()

    ests = np.empty((REPS, 3))
    for r in range(REPS):
        rng = np.random.default_rng([MASTER, r, 0])
        d = generate_dataset(DgpConfig(n=N_SAMPLE), rng=rng).observed
        eff = EstimatorPipeline(d).point_fit(HORIZON).effects
        ests[r] = (eff.joint, eff.anesthesia, eff.surgery)

    mc_se = np.array([truths.mc_se["joint"], truths.mc_se["anesthesia"],
                      truths.mc_se["surgery"]])
    se_mean = np.sqrt(ests.var(axis=0) / REPS + mc_se**2)
    gap = np.abs(ests.mean(axis=0) - tr)
    ok = bool((gap <= 3 * se_mean).all() and anchor_gap <= 0.05)
    report(1, "oracle consistency",
           ok,
           f"mean-truth gaps {np.round(gap, 4).tolist()} vs 3*SE "
           f"{np.round(3 * se_mean, 4).tolist()}; anchor gap {anchor_gap:.4f} "
           f"(truths {np.round(tr, 4).tolist()} at t={HORIZON})")


@pytest.mark.slow
def test_criterion_2_coverage():
    res = run_experiment(DgpConfig(n=N_SAMPLE), reps=REPS, t=HORIZON,
                         grid=[1.0], boot_r=BOOT_R, master_seed=MASTER,
                         kind="gamma", mc_n=1_000_000, n_jobs=2)
    coverage = float(res.metrics["coverage"][0])
    ok = 0.92 <= coverage <= 0.98
    report(2, "bootstrap CI coverage", ok,
           f"anesthesia coverage {coverage:.3f} over {REPS} replications "
           f"(R={BOOT_R}), target [0.92, 0.98]")


@pytest.mark.slow
@pytest.mark.parametrize("kind,strength", [
    ("gamma", 0.25), ("gamma", 0.5), ("gamma", 0.75),
    ("eta", 0.25), ("eta", 0.5), ("eta", 0.75),
])
def test_criterion_3_sensitivity_recovery(kind, strength):
    cfg = (DgpConfig(n=N_SAMPLE, zeta=strength) if kind == "gamma"
           else DgpConfig(n=N_SAMPLE, xi=strength))
    res = run_experiment(cfg, reps=REPS, t=HORIZON, grid=GRID, boot_r=BOOT_R,
                         master_seed=MASTER, kind=kind, mc_n=1_000_000,
                         n_jobs=2)
    true_param = res.truths.gamma_true if kind == "gamma" else res.truths.eta_true
    nearest = float(GRID[np.argmin(np.abs(GRID - true_param))])
    m = res.metrics
    step = float(GRID[1] - GRID[0])
    rmse_argmin = float(m["param"][m["rmse"].idxmin()])
    cov_argmax = float(m["param"][m["coverage"].idxmax()])
    rmse_at_nearest = float(m.loc[m["param"] == nearest, "rmse"].iloc[0])
    cov_at_nearest = float(m.loc[m["param"] == nearest, "coverage"].iloc[0])
    ends = m["param"].isin((GRID[0], GRID[-1]))
    if kind == "gamma":
        rmse_ok = rmse_at_nearest == m["rmse"].min()
        cov_ok = cov_at_nearest == m["coverage"].max()
        claim = "strict argmin/argmax at nearest"
    else:
        # The eta_true values are an order of magnitude closer together
        # than the gamma_true values (within ~0.02 of the null), so strict
        # argmin at the nearest grid point is below the resolution of the
        # grid at this replication scale; the stated replica pattern for
        # this side is dominance of the nearest value over the endpoints,
        # with the empirical optimum at or adjacent to it.
        rmse_ok = bool((rmse_at_nearest < m.loc[ends, "rmse"]).all()
                       and abs(rmse_argmin - nearest) <= step + 1e-9)
        cov_ok = bool((cov_at_nearest > m.loc[ends, "coverage"]).all()
                      and abs(cov_argmax - nearest) <= step + 1e-9)
        claim = "endpoint dominance, optimum at/adjacent to nearest"
    report(3, f"sensitivity recovery ({kind}={strength})",
           rmse_ok and cov_ok,
           f"true {true_param:.4f}, nearest grid {nearest}; RMSE argmin "
           f"{rmse_argmin} (min {m['rmse'].min():.4f}); coverage argmax "
           f"{cov_argmax} (at nearest {cov_at_nearest:.3f}) [{claim}]")


@pytest.mark.slow
def test_criterion_4_crossing_values():
    rng = np.random.default_rng([MASTER, 6])
    d = generate_dataset(DgpConfig(n=N_SAMPLE), rng=rng).observed
    boot = bootstrap_effects(d, HORIZON, R=1000, seed=(MASTER, 6), n_jobs=2)
    lo, hi = boot.ci["anesthesia"]
    cp = crossing_points(boot.point.anesthesia, lo, hi)
    got = np.array([cp.null_at_lower, cp.null_at_point, cp.null_at_upper])
    want = np.array([1.18, 1.28, 1.38])
    gap = np.abs(got - want).max()
    report(4, "crossing values", bool(gap <= 0.05),
           f"crossings {np.round(got, 4).tolist()} vs {want.tolist()} "
           f"(max gap {gap:.4f}, tolerance 0.05)")


def test_criterion_5_algebraic_identities():
    rng = np.random.default_rng(MASTER)
    # telescoping on random risk triples
    worst_tel = 0.0
    for _ in range(2000):
        r00, r01, r11 = rng.uniform(0.005, 0.995, 3)
        eff = effect_ratios(
            CounterfactualRisk(0, 0, 1.0, r00),
            CounterfactualRisk(0, 1, 1.0, r01),
            CounterfactualRisk(1, 1, 1.0, r11),
        )
        worst_tel = max(worst_tel, abs(eff.joint - eff.anesthesia * eff.surgery))
    # adjustment inverse
    worst_adj = 0.0
    for _ in range(2000):
        x = rng.uniform(0.05, 2.0)
        g = rng.uniform(0.05, 2.0)
        worst_adj = max(worst_adj, abs(adjusted_effect(x, g) * g - x))
    # front-door route agreement on 1000 random discrete uncensored instances
    worst_fd = 0.0
    for _ in range(1000):
        d, t = random_frontdoor_instance(rng, int(rng.integers(40, 250)))
        worst_fd = max(worst_fd, frontdoor_psi01_empirical(d, t).gap)
    ok = worst_tel <= 1e-12 and worst_adj <= 1e-15 and worst_fd <= 1e-10
    report(5, "algebraic identities", ok,
           f"telescoping {worst_tel:.2e} (<=1e-12), adjustment inverse "
           f"{worst_adj:.2e} (<=1e-15), front-door gap {worst_fd:.2e} (<=1e-10)")


def test_criterion_6_small_instance_oracles():
    # plug-in estimator vs literal double sum, n <= 50, k <= 3
    worst_psi = 0.0
    for n, k, ell, p, seed, weighted in ((10, 2, 1, 2, 44, True),
                                         (50, 3, 1, 1, 46, False),
                                         (30, 1, 1, 2, 48, True)):
        d = toy_dataset(n=n, k=k, ell=ell, p=p, seed=seed, all_events=True)
        w = (np.random.default_rng(seed).uniform(0.5, 2.0, d.n)
             if weighted else None)
        cox, base, med = fit_all(d, w)
        for a, a_star in ((0, 0), (0, 1), (1, 1)):
            got = estimate_psi(cox, base, med, d, a, a_star, 3.0, w).risk
            want = oracle_psi(cox, base, med, d, a, a_star, 3.0, w)
            worst_psi = max(worst_psi, abs(got - want))

    # 2-coefficient Cox fit vs dense grid search of the literal Breslow
    # partial likelihood
    rng = np.random.default_rng(7)
    n = 14
    a = np.tile([0, 1], n // 2)
    c = rng.standard_normal(n)
    time = rng.uniform(0.5, 6.0, n)
    event = np.ones(n, dtype=int)
    schema0 = MediatorSchema(k=0, ell=0, names=())
    d = Dataset(c=c[:, None], a=a, m=np.empty((n, 0), dtype=int), time=time,
                event=event, schema=schema0)
    fit = fit_weighted_cox(d, DesignSpec(schema=schema0, p=1))

    def literal_loglik(t1, t2):
        ll = 0.0
        for t in sorted(set(time[event == 1])):
            num = 0.0
            risk = 0.0
            for i in range(n):
                lp = t1 * a[i] + t2 * c[i]
                if time[i] == t and event[i]:
                    num += lp
                if time[i] >= t:
                    risk += math.exp(lp)
            ll += num - math.log(risk)
        return ll

    lo = np.array([-4.0, -4.0])
    hi = np.array([4.0, 4.0])
    for _ in range(10):
        g1 = np.linspace(lo[0], hi[0], 41)
        g2 = np.linspace(lo[1], hi[1], 41)
        vals = [(literal_loglik(t1, t2), t1, t2) for t1 in g1 for t2 in g2]
        _, b1, b2 = max(vals)
        span1 = (hi[0] - lo[0]) / 10
        span2 = (hi[1] - lo[1]) / 10
        lo = np.array([b1 - span1, b2 - span2])
        hi = np.array([b1 + span1, b2 + span2])
    grid_best = np.array([b1, b2])
    cox_gap = np.abs(fit.theta - grid_best).max()

    # Breslow baseline vs hand-computed Nelson-Aalen on n <= 5 uncensored
    d5 = Dataset(c=np.empty((5, 0)), a=np.zeros(5, dtype=int),
                 m=np.empty((5, 0), dtype=int),
                 time=np.array([1.0, 2.0, 3.0, 4.0, 5.0]),
                 event=np.ones(5, dtype=int), schema=schema0)
    fit5 = CoxFit(theta=np.zeros(1), loglik=0.0, converged=True, iterations=0,
                  grad_norm=0.0, information=np.zeros((1, 1)),
                  spec=DesignSpec(schema=schema0, p=0))
    sf = breslow_baseline(fit5, d5)
    na_exact = np.cumsum([1 / 5, 1 / 4, 1 / 3, 1 / 2, 1 / 1])
    na_ok = np.array_equal(sf.values, na_exact)

    ok = worst_psi <= 1e-12 and cox_gap <= 1e-6 and na_ok
    report(6, "small-instance oracle equivalence", ok,
           f"plug-in vs double-sum {worst_psi:.2e} (<=1e-12), Cox vs grid "
           f"search {cox_gap:.2e} (<=1e-6), Nelson-Aalen exact: {na_ok}")


def test_criterion_7_enumeration_suites():
    d = toy_dataset(n=400, k=3, ell=1, p=2, seed=63)
    med = fit_mediator_model(d)
    rng = np.random.default_rng(MASTER + 7)
    forbidden = mediator_combinations(3)[:, 0] == 1  # structural coordinate set
    worst_sum = 0.0
    forbidden_mass = 0.0
    for _ in range(10_000):
        a = int(rng.integers(0, 2))
        c = rng.standard_normal(2) * 1.5
        vec = enumerate_joint(med, a, c)
        worst_sum = max(worst_sum, abs(vec.sum() - 1.0))
        if a == 0:
            forbidden_mass = max(forbidden_mass, vec[forbidden].max())
    ok = worst_sum <= 1e-10 and forbidden_mass == 0.0
    report(7, "enumeration normalization and structural zeros", ok,
           f"worst |sum-1| {worst_sum:.2e} (<=1e-10), forbidden mass "
           f"{forbidden_mass} (exact 0) over 10^4 probes")


def test_criterion_8_determinism(tmp_path):
    d = generate_dataset(DgpConfig(n=400, seed=88)).observed
    data = tmp_path / "d.csv"
    write_dataset(d, data)
    schema = tmp_path / "s.json"
    schema.write_text(json.dumps({"p": 4, "k": 2, "ell": 1,
                                  "names": ["m_1", "m_2"]}))
    cfg = tmp_path / "dgp.json"
    cfg.write_text(json.dumps({"n": 250, "zeta": 0.0, "t": 5.0, "boot_R": 10,
                               "mc_n": 20000}))

    def run_all(tag, threads):
        out = tmp_path / tag
        assert main(["estimate", "--data", str(data), "--schema", str(schema),
                     "--t", "5", "--boot", "12", "--seed", "5",
                     "--threads", str(threads), "--out", str(out / "est")]) == 0
        assert main(["sensitivity", "--data", str(data), "--schema", str(schema),
                     "--t", "5", "--boot", "12", "--seed", "5",
                     "--grid", "0.9:1.2:0.1", "--threads", str(threads),
                     "--out", str(out / "sens")]) == 0
        assert main(["simulate", "--config", str(cfg), "--reps", "3",
                     "--grid", "0.9:1.1:0.1", "--seed", "5",
                     "--threads", str(threads), "--out", str(out / "sim")]) == 0
        return {
            str(p.relative_to(out)): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file()
        }

    run_a = run_all("a", 1)
    run_b = run_all("b", 1)
    run_c = run_all("c", 2)
    ok = run_a == run_b == run_c
    n_files = len(run_a)
    report(8, "seeded byte-determinism", ok,
           f"{n_files} output files identical across reruns and across "
           "thread counts (JSON, CSV, PNG)")


def test_criterion_9_pseudo_exposure_contract():
    ok = True
    details = []
    for seed in (1, 2, 3):
        rng = np.random.default_rng(seed)
        n = 300
        flags = rng.random((n, N_MONTHS)) < 0.8
        flags[:, 0] = True  # delivery-month enrollment, as in the cohort
        elig = EligibilityTable(ids=[f"s{i}" for i in range(n)], flags=flags)
        hist = rng.integers(3, 30, N_MONTHS).astype(float)
        out = assign_pseudo_months(hist, elig, seed=seed + 100)
        counts = out.counts()
        ok &= bool((counts == out.expected_counts).all())
        for sid, month in out.assigned.items():
            ok &= bool(flags[int(sid[1:]), month])
        again = assign_pseudo_months(hist, elig, seed=seed + 100)
        ok &= again.assigned == out.assigned and again.excluded == out.excluded
        details.append(f"seed {seed}: counts==expected "
                       f"{(counts == out.expected_counts).all()}")
    report(9, "pseudo-exposure assignment contract", ok, "; ".join(details))
