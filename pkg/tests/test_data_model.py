import numpy as np
import pytest

from sepeffects import (
    Dataset,
    DgpConfig,
    MediatorSchema,
    generate_dataset,
    load_dataset,
    load_schema,
    validate_dataset,
    write_dataset,
)
from sepeffects.exceptions import DataValidationError

from conftest import toy_dataset


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


class TestSchema:
    def test_valid(self):
        s = MediatorSchema(k=3, ell=2, names=("x", "y", "z"))
        assert s.k == 3 and s.ell == 2

    def test_ell_bounds(self):
        with pytest.raises(DataValidationError):
            MediatorSchema(k=2, ell=3, names=("x", "y"))

    def test_unique_names(self):
        with pytest.raises(DataValidationError):
            MediatorSchema(k=2, ell=0, names=("x", "x"))

    def test_schema_file(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text('{"p": 1, "k": 2, "ell": 1, "names": ["m_1", "m_2"]}')
        schema, cov_dim = load_schema(p)
        assert schema == MediatorSchema(k=2, ell=1, names=("m_1", "m_2"))
        assert cov_dim == 1

    def test_schema_file_malformed(self, tmp_path):
        p = tmp_path / "s.json"
        p.write_text('{"p": 1')
        with pytest.raises(DataValidationError):
            load_schema(p)


class TestLoad:
    header = ["c_1", "a", "m_1", "m_2", "time", "event"]
    schema = MediatorSchema(k=2, ell=1, names=("m_1", "m_2"))

    def test_four_valid_rows(self, tmp_path):
        p = tmp_path / "d.csv"
        write_csv(p, self.header, [
            [0.1, 1, 1, 0, 2.5, 1],
            [-0.3, 0, 0, 1, 1.0, 0],
            [1.2, 1, 0, 0, 4.0, 1],
            [0.0, 0, 0, 0, 3.3, 1],
        ])
        d = load_dataset(p, self.schema)
        assert d.n == 4 and d.p == 1
        assert [r.a for r in d.records] == [1, 0, 1, 0]
        assert d.records[0].time == 2.5

    def test_structural_zero_violation_names_row(self, tmp_path):
        p = tmp_path / "d.csv"
        write_csv(p, self.header, [
            [0.1, 1, 1, 0, 2.5, 1],
            [-0.3, 0, 1, 0, 1.0, 0],
        ])
        with pytest.raises(DataValidationError, match="row 1"):
            load_dataset(p, self.schema)

    def test_missing_column(self, tmp_path):
        p = tmp_path / "d.csv"
        write_csv(p, ["c_1", "a", "m_1", "time", "event"], [[0.1, 1, 1, 2.5, 1]])
        with pytest.raises(DataValidationError, match="m_2"):
            load_dataset(p, self.schema)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("")
        with pytest.raises(DataValidationError, match="empty"):
            load_dataset(p, self.schema)

    def test_no_rows(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text(",".join(self.header) + "\n")
        with pytest.raises(DataValidationError, match="no data rows"):
            load_dataset(p, self.schema)

    def test_non_numeric(self, tmp_path):
        p = tmp_path / "d.csv"
        write_csv(p, self.header, [[0.1, 1, 1, 0, 2.5, 1], ["oops", 0, 0, 0, 1.0, 1]])
        with pytest.raises(DataValidationError, match="row 1"):
            load_dataset(p, self.schema)

    def test_out_of_range_indicator(self, tmp_path):
        p = tmp_path / "d.csv"
        write_csv(p, self.header, [[0.1, 2, 0, 0, 2.5, 1]])
        with pytest.raises(DataValidationError, match="out of range"):
            load_dataset(p, self.schema)

    def test_nonpositive_time(self, tmp_path):
        p = tmp_path / "d.csv"
        write_csv(p, self.header, [[0.1, 1, 0, 0, 0.0, 1]])
        with pytest.raises(DataValidationError, match="time"):
            load_dataset(p, self.schema)


class TestRoundTrip:
    def test_simulated_sample_bit_for_bit(self, tmp_path):
        sim = generate_dataset(DgpConfig(n=500, seed=12))
        d = sim.observed
        path = tmp_path / "sim.csv"
        write_dataset(d, path)
        d2 = load_dataset(path, d.schema)
        assert np.array_equal(d.c, d2.c)
        assert np.array_equal(d.a, d2.a)
        assert np.array_equal(d.m, d2.m)
        assert np.array_equal(d.time, d2.time)
        assert np.array_equal(d.event, d2.event)
        assert d == d2

    def test_toy_round_trip(self, tmp_path):
        d = toy_dataset(n=25, seed=3)
        path = tmp_path / "toy.csv"
        write_dataset(d, path)
        assert load_dataset(path, d.schema) == d


class TestValidate:
    def test_valid_dataset_zero_failures(self):
        d = toy_dataset(n=60, seed=8)
        report = validate_dataset(d)
        assert report.ok
        assert report.failures == []

    def test_single_arm_flagged(self, schema21):
        d = Dataset(
            c=np.zeros((3, 1)), a=np.ones(3, dtype=int),
            m=np.array([[1, 0], [0, 1], [0, 0]]),
            time=np.array([1.0, 2.0, 3.0]), event=np.array([1, 1, 0]),
            schema=schema21,
        )
        report = validate_dataset(d)
        assert not report.ok
        names = [c.name for c in report.failures]
        assert "both exposure levels present" in names

    def test_confounded_mediator_warning(self, schema21):
        # m_2 = 1 occurs, but only alongside a = 1, despite being
        # non-structural; cross-tab computed by brute force
        rng = np.random.default_rng(0)
        n = 50
        a = np.repeat([0, 1], n // 2)
        m2 = np.where(a == 1, rng.integers(0, 2, n), 0)
        m1 = np.where(a == 1, rng.integers(0, 2, n), 0)
        d = Dataset(c=rng.standard_normal((n, 1)), a=a,
                    m=np.column_stack([m1, m2]),
                    time=rng.uniform(1, 5, n), event=np.ones(n, dtype=int),
                    schema=schema21)
        crosstab = sum(1 for i in range(n) if d.m[i, 1] == 1 and d.a[i] == 0)
        assert crosstab == 0
        report = validate_dataset(d)
        assert report.ok  # warning, not failure
        assert any("m_2" in w.name for w in report.warnings)

    def test_no_event_in_arm_flagged(self, schema21):
        d = Dataset(
            c=np.zeros((4, 1)), a=np.array([0, 0, 1, 1]),
            m=np.array([[0, 0], [0, 1], [1, 0], [0, 0]]),
            time=np.array([1.0, 2.0, 3.0, 4.0]),
            event=np.array([1, 1, 0, 0]),
            schema=schema21,
        )
        report = validate_dataset(d)
        assert any(c.name == "at least one event with a=1" for c in report.failures)


class TestConstruction:
    def test_records_view(self):
        d = toy_dataset(n=10, seed=2)
        recs = d.records
        assert len(recs) == 10
        assert recs[3].time == d.time[3]

    def test_from_records_round_trip(self):
        d = toy_dataset(n=12, seed=4)
        d2 = Dataset.from_records(d.records, d.schema)
        assert d == d2

    def test_immutable(self):
        d = toy_dataset(n=10, seed=2)
        with pytest.raises(ValueError):
            d.time[0] = 99.0
