import numpy as np
import pytest

from sepeffects import Dataset, DgpConfig, MediatorSchema, generate_dataset


@pytest.fixture(scope="session")
def schema21():
    return MediatorSchema(k=2, ell=1, names=("m_1", "m_2"))


@pytest.fixture(scope="session")
def sim_small():
    """Moderate simulated dataset shared by estimator-level tests."""
    return generate_dataset(DgpConfig(n=2500, seed=97)).observed


def toy_dataset(n=40, k=2, ell=1, p=1, seed=5, all_events=False):
    """Small hand-rolled dataset with both arms, events in each arm, and
    the structural-zero constraint honored."""
    rng = np.random.default_rng(seed)
    while True:
        c = rng.standard_normal((n, p))
        a = rng.integers(0, 2, n)
        m = (rng.random((n, k)) < 0.45).astype(np.int64)
        for j in range(ell):
            m[:, j] *= a
        time = rng.uniform(0.2, 8.0, n)
        event = np.ones(n, dtype=np.int64) if all_events else rng.integers(0, 2, n)
        ok = (
            a.min() == 0 and a.max() == 1
            and (event[a == 0] == 1).any() and (event[a == 1] == 1).any()
            and all(m[a == 1, j].min() != m[a == 1, j].max() for j in range(ell))
            and all(m[:, j].min() != m[:, j].max() for j in range(k))
        )
        if ok:
            schema = MediatorSchema(k=k, ell=ell,
                                    names=tuple(f"m_{j+1}" for j in range(k)))
            return Dataset(c=c, a=a, m=m, time=time, event=event, schema=schema)
        seed += 1
        rng = np.random.default_rng(seed)
