"""Subject-level dataset schema, CSV round-tripping, and invariant checks.

A dataset row is one mother-child pair: baseline covariates ``c`` (length
p), a binary exposure ``a``, a binary mediator vector ``m`` (length k, the
first ``ell`` of which are structural zeros: they can only be 1 when a=1),
a positive follow-up time, and an event indicator (1 = diagnosis observed,
0 = censored).

Row-level invariants (binary indicators, positive time, the structural-zero
constraint) are enforced hard at construction: the downstream identification
logic depends on them, so silently repairing a violation would be worse than
refusing the data. Dataset-level conditions (both exposure arms present,
events in each arm) are reported by :func:`validate_dataset` instead, so
that deliberately small or degenerate datasets can still be built for
diagnostics.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataValidationError

__all__ = [
    "MediatorSchema",
    "SubjectRecord",
    "Dataset",
    "InvariantCheck",
    "ValidationReport",
    "load_schema",
    "load_dataset",
    "write_dataset",
    "validate_dataset",
]


@dataclass(frozen=True)
class MediatorSchema:
    """Shape of the mediator block.

    The first ``ell`` mediators are structural zeros: a=0 forces m_j=0.
    Mediator ordering is part of the contract; structural-zero mediators
    occupy indices 1..ell (0..ell-1 zero-based).
    """

    k: int
    ell: int
    names: tuple[str, ...]

    def __post_init__(self):
        if self.k < 0:
            raise DataValidationError(f"k must be >= 0, got {self.k}")
        if not 0 <= self.ell <= self.k:
            raise DataValidationError(
                f"ell must satisfy 0 <= ell <= k, got ell={self.ell}, k={self.k}"
            )
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) != self.k:
            raise DataValidationError(
                f"expected {self.k} mediator names, got {len(self.names)}"
            )
        if len(set(self.names)) != self.k:
            raise DataValidationError("mediator names must be unique")


@dataclass(frozen=True)
class SubjectRecord:
    """One observation: covariates, exposure, mediators, follow-up."""

    c: np.ndarray       # float covariate vector, length p
    a: int              # exposure indicator
    m: np.ndarray       # binary mediator vector, length k
    time: float         # follow-up time, > 0
    event: int          # 1 = event observed, 0 = censored


class Dataset:
    """Immutable column store of subject records.

    Parameters
    ----------
    c : (n, p) float array
    a : (n,) 0/1 array
    m : (n, k) 0/1 array
    time : (n,) positive float array
    event : (n,) 0/1 array
    schema : MediatorSchema

    Row-level invariants are checked here and raise
    :class:`DataValidationError` naming the first offending rows.
    """

    def __init__(self, c, a, m, time, event, schema: MediatorSchema):
        self.schema = schema
        self.c = np.ascontiguousarray(c, dtype=float)
        self.a = np.ascontiguousarray(a, dtype=np.int64)
        self.m = np.ascontiguousarray(m, dtype=np.int64)
        self.time = np.ascontiguousarray(time, dtype=float)
        self.event = np.ascontiguousarray(event, dtype=np.int64)
        if self.c.ndim != 2:
            raise DataValidationError("c must be a 2-d array (n rows, p columns)")
        n = self.c.shape[0]
        if self.m.ndim != 2 or self.m.shape != (n, schema.k):
            raise DataValidationError(
                f"m must have shape (n, k)=({n}, {schema.k}), got {self.m.shape}"
            )
        for name, arr in (("a", self.a), ("time", self.time), ("event", self.event)):
            if arr.shape != (n,):
                raise DataValidationError(f"{name} must have shape ({n},)")
        self._check_rows()
        for arr in (self.c, self.a, self.m, self.time, self.event):
            arr.setflags(write=False)

    def _check_rows(self):
        bad = np.nonzero(~np.isfinite(self.c).all(axis=1))[0]
        if bad.size:
            raise DataValidationError(f"non-finite covariate in rows {bad[:5].tolist()}")
        bad = np.nonzero(~np.isin(self.a, (0, 1)))[0]
        if bad.size:
            raise DataValidationError(f"exposure not in {{0,1}} in rows {bad[:5].tolist()}")
        bad = np.nonzero(~np.isin(self.m, (0, 1)).all(axis=1))[0]
        if bad.size:
            raise DataValidationError(f"mediator not in {{0,1}} in rows {bad[:5].tolist()}")
        bad = np.nonzero(~(np.isfinite(self.time) & (self.time > 0)))[0]
        if bad.size:
            raise DataValidationError(f"non-positive follow-up time in rows {bad[:5].tolist()}")
        bad = np.nonzero(~np.isin(self.event, (0, 1)))[0]
        if bad.size:
            raise DataValidationError(f"event flag not in {{0,1}} in rows {bad[:5].tolist()}")
        ell = self.schema.ell
        if ell > 0:
            viol = (self.a[:, None] == 0) & (self.m[:, :ell] == 1)
            bad = np.nonzero(viol.any(axis=1))[0]
            if bad.size:
                j = int(np.nonzero(viol[bad[0]])[0][0])
                raise DataValidationError(
                    f"structural-zero violation: row {int(bad[0])} has a=0 but "
                    f"m_{j + 1}=1 (mediator '{self.schema.names[j]}'); "
                    f"{bad.size} offending row(s): {bad[:5].tolist()}"
                )

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def p(self) -> int:
        return self.c.shape[1]

    @property
    def records(self) -> list[SubjectRecord]:
        return [
            SubjectRecord(
                c=self.c[i], a=int(self.a[i]), m=self.m[i],
                time=float(self.time[i]), event=int(self.event[i]),
            )
            for i in range(self.n)
        ]

    @classmethod
    def from_records(cls, records, schema: MediatorSchema) -> "Dataset":
        records = list(records)
        if not records:
            raise DataValidationError("cannot build a Dataset from zero records")
        p = len(records[0].c)
        return cls(
            c=np.array([r.c for r in records], dtype=float).reshape(len(records), p),
            a=np.array([r.a for r in records]),
            m=np.array([r.m for r in records], dtype=np.int64).reshape(len(records), schema.k),
            time=np.array([r.time for r in records], dtype=float),
            event=np.array([r.event for r in records]),
            schema=schema,
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and self.c.shape == other.c.shape
            and np.array_equal(self.c, other.c)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.m, other.m)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
        )

    def __repr__(self):
        return (
            f"Dataset(n={self.n}, p={self.p}, k={self.schema.k}, "
            f"ell={self.schema.ell})"
        )


def expected_header(p: int, schema: MediatorSchema) -> list[str]:
    """CSV column layout: c_1..c_p, a, m_1..m_k, time, event."""
    return (
        [f"c_{i + 1}" for i in range(p)]
        + ["a"]
        + [f"m_{j + 1}" for j in range(schema.k)]
        + ["time", "event"]
    )


def load_schema(path) -> tuple[MediatorSchema, int]:
    """Read a schema JSON file ``{"p":int,"k":int,"ell":int,"names":[...]}``.

    Returns the mediator schema together with the covariate dimension p.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"malformed schema JSON in {path}: {exc}") from exc
    try:
        p = int(raw["p"])
        schema = MediatorSchema(k=int(raw["k"]), ell=int(raw["ell"]), names=tuple(raw["names"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataValidationError(f"invalid schema file {path}: {exc}") from exc
    if p < 0:
        raise DataValidationError(f"invalid schema file {path}: p must be >= 0")
    return schema, p


def load_dataset(path, schema: MediatorSchema) -> Dataset:
    """Load a CSV file into a validated :class:`Dataset`.

    The header must be exactly ``c_1,...,c_p,a,m_1,...,m_k,time,event``
    (p inferred from the header); decimal point ``.``; no quoting. Row
    order is preserved. Malformed rows raise with the 0-based row index.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        rows = list(reader)

    n_lead = 0
    while n_lead < len(header) and header[n_lead] == f"c_{n_lead + 1}":
        n_lead += 1
    p = n_lead
    want = expected_header(p, schema)
    if header != want:
        missing = [col for col in want if col not in header]
        detail = f"missing column(s) {missing}" if missing else "column order mismatch"
        raise DataValidationError(
            f"{path}: header {header!r} does not match expected {want!r} ({detail})"
        )
    if not rows:
        raise DataValidationError(f"{path}: no data rows")

    width = len(want)
    data = np.empty((len(rows), width), dtype=float)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataValidationError(
                f"{path}: row {i} has {len(row)} fields, expected {width}"
            )
        try:
            data[i] = [float(v) for v in row]
        except ValueError as exc:
            raise DataValidationError(f"{path}: row {i}: non-numeric field ({exc})") from exc

    k = schema.k
    a = data[:, p]
    m = data[:, p + 1 : p + 1 + k]
    event = data[:, -1]
    for name, col in (("a", a), ("m", m), ("event", event)):
        if not np.isin(col, (0.0, 1.0)).all():
            i = int(np.nonzero(~np.isin(col, (0.0, 1.0)).reshape(len(rows), -1).all(axis=1))[0][0])
            raise DataValidationError(
                f"{path}: row {i}: {name} indicator out of range (must be 0 or 1)"
            )
    return Dataset(
        c=data[:, :p],
        a=a.astype(np.int64),
        m=m.astype(np.int64),
        time=data[:, -2],
        event=event.astype(np.int64),
        schema=schema,
    )


def write_dataset(d: Dataset, path) -> None:
    """Write ``d`` as CSV so that :func:`load_dataset` restores it bit-for-bit.

    Floats are written with ``repr`` (shortest round-trip representation).
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(expected_header(d.p, d.schema))
        for i in range(d.n):
            writer.writerow(
                [repr(float(v)) for v in d.c[i]]
                + [int(d.a[i])]
                + [int(v) for v in d.m[i]]
                + [repr(float(d.time[i])), int(d.event[i])]
            )


@dataclass
class InvariantCheck:
    name: str
    passed: bool
    rows: list[int] = field(default_factory=list)  # offending row indices, if any
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[InvariantCheck]
    warnings: list[InvariantCheck]

    @property
    def failures(self) -> list[InvariantCheck]:
        return [c for c in self.checks if not c.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f" rows={c.rows[:10]}" if c.rows else ""
            lines.append(f"[{status}] {c.name}{extra}")
        for c in self.warnings:
            lines.append(f"[warn] {c.name}: {c.detail}")
        return "\n".join(lines)


def validate_dataset(d: Dataset) -> ValidationReport:
    """Re-scan every invariant and report pass/fail with offending rows.

    The report is empty of failures exactly when all record-level and
    dataset-level invariants hold. Mediators beyond the structural block
    that are empirically observed only under exposure are flagged as
    warnings (identifiability concern), not failures.
    """
    checks: list[InvariantCheck] = []

    def add(name, bad_rows):
        rows = [int(i) for i in bad_rows]
        checks.append(InvariantCheck(name=name, passed=not rows, rows=rows))

    add("time positive", np.nonzero(~(np.isfinite(d.time) & (d.time > 0)))[0])
    add("exposure binary", np.nonzero(~np.isin(d.a, (0, 1)))[0])
    add("mediators binary", np.nonzero(~np.isin(d.m, (0, 1)).all(axis=1))[0])
    add("event binary", np.nonzero(~np.isin(d.event, (0, 1)))[0])

    ell = d.schema.ell
    if ell > 0:
        viol = (d.a[:, None] == 0) & (d.m[:, :ell] == 1)
        add("structural zeros (a=0 implies m_j=0 for j<=ell)", np.nonzero(viol.any(axis=1))[0])
    else:
        checks.append(InvariantCheck("structural zeros (a=0 implies m_j=0 for j<=ell)", True))

    both_arms = bool((d.a == 0).any() and (d.a == 1).any())
    checks.append(InvariantCheck("both exposure levels present", both_arms))

    for arm in (0, 1):
        mask = d.a == arm
        has_event = bool((d.event[mask] == 1).any()) if mask.any() else False
        checks.append(InvariantCheck(f"at least one event with a={arm}", has_event))

    warnings: list[InvariantCheck] = []
    for j in range(ell, d.schema.k):
        ones = d.m[:, j] == 1
        if ones.any() and not (ones & (d.a == 0)).any():
            warnings.append(
                InvariantCheck(
                    name=f"mediator m_{j + 1} observed only under exposure",
                    passed=True,
                    detail=(
                        f"m_{j + 1} ('{d.schema.names[j]}') is never 1 with a=0 although "
                        f"j={j + 1} > ell={ell}; its conditional law given a=0 rests "
                        "entirely on the fitted model"
                    ),
                )
            )
    return ValidationReport(checks=checks, warnings=warnings)
