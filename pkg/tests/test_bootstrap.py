import numpy as np
import pytest

from sepeffects import DgpConfig, bootstrap_effects, draw_weights, generate_dataset
from sepeffects.bootstrap import replicate_rng
from sepeffects.exceptions import (
    BootstrapInstabilityError,
    ModelFitError,
    MonotoneLikelihoodError,
)

from conftest import toy_dataset


@pytest.fixture(scope="module")
def boot_dataset():
    return generate_dataset(DgpConfig(n=800, seed=55)).observed


class TestDrawWeights:
    def test_n_one(self):
        w = draw_weights(1, np.random.default_rng(0))
        assert w.shape == (1,)
        assert w[0] == 1.0

    def test_moments(self):
        w = draw_weights(10_000, np.random.default_rng(42))
        assert w.mean() == pytest.approx(1.0, abs=1e-12)
        # flat-Dirichlet coordinate variance (n-1)/(n^2 (n+1)), scaled by n^2
        n = 10_000
        target_var = n**2 * (n - 1) / (n**2 * (n + 1))
        assert w.var() == pytest.approx(target_var, rel=0.05)

    def test_same_seed_identical(self):
        w1 = draw_weights(100, np.random.default_rng(7))
        w2 = draw_weights(100, np.random.default_rng(7))
        assert np.array_equal(w1, w2)

    def test_positive_and_normalized(self):
        for r in range(20):
            w = draw_weights(500, replicate_rng(3, r))
            assert (w > 0).all()
            assert abs(w.sum() - 500) < 1e-9


class TestBootstrapEffects:
    def test_determinism_and_thread_invariance(self, boot_dataset):
        b1 = bootstrap_effects(boot_dataset, 5.0, R=8, seed=31)
        b2 = bootstrap_effects(boot_dataset, 5.0, R=8, seed=31)
        b3 = bootstrap_effects(boot_dataset, 5.0, R=8, seed=31, n_jobs=2)
        for other in (b2, b3):
            assert np.array_equal(b1.replicates, other.replicates, equal_nan=True)
            assert np.array_equal(b1.converged, other.converged)
            assert b1.ci == other.ci
            assert b1.point == other.point

    def test_seed_changes_replicates(self, boot_dataset):
        b1 = bootstrap_effects(boot_dataset, 5.0, R=4, seed=1)
        b2 = bootstrap_effects(boot_dataset, 5.0, R=4, seed=2)
        assert not np.array_equal(b1.replicates, b2.replicates)
        assert b1.point == b2.point  # unit-weight point fit is seed-free

    def test_ci_ordered_and_within_range(self, boot_dataset):
        b = bootstrap_effects(boot_dataset, 5.0, R=40, seed=9)
        for name, col in zip(("joint", "anesthesia", "surgery"), b.replicates.T):
            lo, hi = b.ci[name]
            assert lo <= hi
            assert col.min() - 1e-12 <= lo and hi <= col.max() + 1e-12

    def test_replicate_table_schema(self, boot_dataset):
        b = bootstrap_effects(boot_dataset, 5.0, R=5, seed=2)
        df = b.to_frame()
        assert list(df.columns) == ["rep", "joint", "anesthesia", "surgery",
                                    "converged"]
        assert len(df) == 5
        assert df["converged"].all()

    def test_degenerate_dataset_error_surfaced(self):
        # monotone-likelihood data: the unit-weight fit already fails and
        # the error carries the model diagnostics
        n = 12
        time = np.arange(1.0, n + 1)
        c = -time[:, None] * 0.02
        d = toy_dataset(n=n, seed=1, k=0, ell=0, p=1)
        from sepeffects import Dataset

        d = Dataset(c=c, a=d.a, m=d.m, time=time,
                    event=np.ones(n, dtype=int), schema=d.schema)
        with pytest.raises(MonotoneLikelihoodError):
            bootstrap_effects(d, 5.0, R=4, seed=0)

    def test_failure_policy(self, boot_dataset, monkeypatch):
        # force >10% of replicates to fail: policy must abort with counts
        from sepeffects import pipeline as pipeline_mod

        real = pipeline_mod.EstimatorPipeline.effects_at
        calls = {"n": 0}

        def flaky(self, w, t):
            calls["n"] += 1
            if calls["n"] % 3 == 0:
                raise MonotoneLikelihoodError("synthetic failure")
            return real(self, w, t)

        monkeypatch.setattr(pipeline_mod.EstimatorPipeline, "effects_at", flaky)
        import sepeffects.bootstrap as boot_mod

        with pytest.raises(BootstrapInstabilityError, match="failed to converge"):
            boot_mod.bootstrap_effects(boot_dataset, 5.0, R=12, seed=5)

    def test_few_failures_excluded_and_reported(self, boot_dataset, monkeypatch):
        from sepeffects import pipeline as pipeline_mod

        real = pipeline_mod.EstimatorPipeline.effects_at
        calls = {"n": 0}

        def flaky(self, w, t):
            calls["n"] += 1
            if calls["n"] == 5:  # exactly one replicate fails (first call is the point fit)
                raise MonotoneLikelihoodError("synthetic failure")
            return real(self, w, t)

        monkeypatch.setattr(pipeline_mod.EstimatorPipeline, "effects_at", flaky)
        import sepeffects.bootstrap as boot_mod

        b = boot_mod.bootstrap_effects(boot_dataset, 5.0, R=12, seed=5)
        assert b.n_failed == 1
        assert np.isnan(b.replicates[~b.converged]).all()
        assert len(b.failure_messages) == 1

    def test_r_minimum(self, boot_dataset):
        with pytest.raises(ValueError):
            bootstrap_effects(boot_dataset, 5.0, R=1, seed=0)
