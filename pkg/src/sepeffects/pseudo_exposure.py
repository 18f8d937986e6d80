"""Pseudo-procedure month assignment for unexposed subjects.

Baseline covariates are observed up to the procedure date for exposed
subjects; unexposed subjects have no such date, so each is assigned a
pseudo-procedure month (9 = earliest, 0 = delivery month) so the
distribution of observation windows matches the exposed histogram.

Procedure:

1. Expected counts per month are the exposed month proportions times the
   number of unexposed subjects eligible in at least one month beyond
   month 0; subjects eligible only in month 0 are set aside for the last
   step. Expected counts are integerized by largest-remainder rounding
   (ties to the earlier month), so they sum exactly to the pool size.
2. Months 1..9 are processed in ascending order of eligible-share
   (eligible count for the month over the total number of unexposed
   subjects; ties to the earlier month). Within a month, subjects
   eligible in that month only are assigned first; the balance up to the
   expected count is drawn uniformly without replacement from the
   remaining eligible pool. A shortfall is an error naming the month.
   If forced subjects alone exceed the expected count they are all
   assigned anyway (they have nowhere else to go); the overshoot is
   visible in the per-month counts.
3. Whoever remains is pooled with the set-aside subjects: remaining
   multi-month subjects go to month 0 outright, then month-0-only
   subjects are sampled up to the month-0 expected count. Month-0-only
   subjects left over are excluded (reported, never silently dropped),
   as is the corner case of a remaining subject not eligible in month 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import AssignmentError, DataValidationError

__all__ = [
    "N_MONTHS",
    "EligibilityTable",
    "MonthAssignment",
    "assign_pseudo_months",
    "read_eligibility_csv",
    "read_exposed_hist_csv",
]

N_MONTHS = 10  # months 0 (delivery) through 9 (estimated conception)


@dataclass
class EligibilityTable:
    ids: list[str]
    flags: np.ndarray  # (n, 10) bool; column index = month

    def __post_init__(self):
        self.flags = np.asarray(self.flags, dtype=bool)
        if self.flags.ndim != 2 or self.flags.shape[1] != N_MONTHS:
            raise DataValidationError(f"flags must have shape (n, {N_MONTHS})")
        if len(self.ids) != self.flags.shape[0]:
            raise DataValidationError("ids and flags disagree on subject count")
        if len(set(self.ids)) != len(self.ids):
            raise DataValidationError("subject ids must be unique")
        none_eligible = np.flatnonzero(~self.flags.any(axis=1))
        if none_eligible.size:
            raise DataValidationError(
                f"subject(s) eligible in no month: rows {none_eligible[:5].tolist()}"
            )

    @property
    def n(self) -> int:
        return len(self.ids)


@dataclass
class MonthAssignment:
    assigned: dict            # id -> month
    excluded: list            # (id, reason)
    expected_counts: np.ndarray   # per-month expected counts after rounding

    def counts(self) -> np.ndarray:
        out = np.zeros(N_MONTHS, dtype=int)
        for month in self.assigned.values():
            out[month] += 1
        return out


def _largest_remainder(raw: np.ndarray, total: int) -> np.ndarray:
    """Round nonnegative reals to integers summing to ``total``; leftover
    units go to the largest fractional parts, ties to the earlier index."""
    floor = np.floor(raw).astype(int)
    short = total - int(floor.sum())
    order = np.argsort(-(raw - floor), kind="stable")
    out = floor.copy()
    out[order[:short]] += 1
    return out


def assign_pseudo_months(exposed_hist, elig: EligibilityTable, seed) -> MonthAssignment:
    """Deterministic (seeded) pseudo-month assignment matching the exposed
    month distribution. See the module docstring for the procedure."""
    hist = np.asarray(exposed_hist, dtype=float)
    if hist.shape != (N_MONTHS,):
        raise DataValidationError(f"exposed histogram must have {N_MONTHS} entries")
    if (hist < 0).any() or not hist.sum() > 0:
        raise DataValidationError("exposed histogram must be nonnegative with positive total")

    rng = np.random.default_rng(seed)
    flags = elig.flags
    n = elig.n
    beyond = flags[:, 1:].any(axis=1)           # eligible past month 0
    month0_only = ~beyond                        # only eligible in month 0
    n_beyond = int(beyond.sum())

    props = hist / hist.sum()
    expected = _largest_remainder(props * n_beyond, n_beyond)

    assigned = np.full(n, -1, dtype=int)
    eligible_counts = flags.sum(axis=0)
    order = sorted(range(1, N_MONTHS), key=lambda m: (eligible_counts[m] / n, m))
    singleton = flags.sum(axis=1) == 1

    for month in order:
        unassigned = assigned == -1
        forced = np.flatnonzero(unassigned & singleton & flags[:, month])
        assigned[forced] = month
        need = int(expected[month]) - forced.size
        if need > 0:
            pool = np.flatnonzero((assigned == -1) & flags[:, month])
            if pool.size < need:
                raise AssignmentError(
                    f"month {month}: expected count {int(expected[month])} exceeds "
                    f"the eligible pool ({forced.size} forced + {pool.size} available)"
                )
            take = rng.choice(pool, size=need, replace=False)
            assigned[take] = month

    excluded: list[tuple[str, str]] = []
    leftover = np.flatnonzero((assigned == -1) & beyond)
    for i in leftover:
        if flags[i, 0]:
            assigned[i] = 0
        else:
            excluded.append((elig.ids[i], "unsampled and not eligible in month 0"))

    gap = int(expected[0]) - int((assigned == 0).sum())
    pool0 = np.flatnonzero((assigned == -1) & month0_only)
    if gap > 0:
        if pool0.size < gap:
            raise AssignmentError(
                f"month 0: expected count {int(expected[0])} exceeds the eligible "
                f"pool ({int((assigned == 0).sum())} carried over + {pool0.size} "
                "month-0-only available)"
            )
        take = rng.choice(pool0, size=gap, replace=False)
        assigned[take] = 0
    for i in np.flatnonzero((assigned == -1) & month0_only):
        excluded.append((elig.ids[i], "month 0 overflow"))

    mapping = {elig.ids[i]: int(assigned[i]) for i in np.flatnonzero(assigned >= 0)}
    return MonthAssignment(assigned=mapping, excluded=excluded,
                           expected_counts=expected)


def read_eligibility_csv(path) -> EligibilityTable:
    """Header ``id,month_0,...,month_9``; flags are 0/1."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        want = ["id"] + [f"month_{m}" for m in range(N_MONTHS)]
        if header != want:
            raise DataValidationError(f"{path}: header must be {want}")
        ids, rows = [], []
        for i, row in enumerate(reader):
            if len(row) != len(want):
                raise DataValidationError(f"{path}: row {i} has {len(row)} fields")
            ids.append(row[0])
            try:
                vals = [int(v) for v in row[1:]]
            except ValueError as exc:
                raise DataValidationError(f"{path}: row {i}: {exc}") from exc
            if any(v not in (0, 1) for v in vals):
                raise DataValidationError(f"{path}: row {i}: flags must be 0/1")
            rows.append(vals)
    if not rows:
        raise DataValidationError(f"{path}: no data rows")
    return EligibilityTable(ids=ids, flags=np.array(rows, dtype=bool))


def read_exposed_hist_csv(path) -> np.ndarray:
    """Header ``month,count``; every month 0..9 exactly once."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        if header != ["month", "count"]:
            raise DataValidationError(f"{path}: header must be ['month', 'count']")
        counts = np.full(N_MONTHS, -1.0)
        for i, row in enumerate(reader):
            try:
                month, count = int(row[0]), float(row[1])
            except (ValueError, IndexError) as exc:
                raise DataValidationError(f"{path}: row {i}: {exc}") from exc
            if not 0 <= month < N_MONTHS or counts[month] >= 0:
                raise DataValidationError(
                    f"{path}: row {i}: month {month} out of range or duplicated"
                )
            counts[month] = count
    if (counts < 0).any():
        missing = np.flatnonzero(counts < 0).tolist()
        raise DataValidationError(f"{path}: missing month rows for {missing}")
    return counts
