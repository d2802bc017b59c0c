"""Columnar container for right-censored competing-risks samples."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ConfigError

__all__ = ["SubjectRecord", "Dataset"]


class SubjectRecord(NamedTuple):
    """One trial subject: observed time, event status, treatment arm."""

    id: int
    time: float
    status: int  # 0 censored, 1 type-1 event, 2 type-2 event
    x: int       # binary treatment


@dataclass(frozen=True)
class Dataset:
    """Immutable sample of subjects with a common administrative horizon.

    ``status == 0`` records with ``time >= tau`` are administrative
    censorings; with ``time < tau`` they are random loss to follow-up.
    """

    time: np.ndarray
    status: np.ndarray
    x: np.ndarray
    tau: float
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float)
        status = np.asarray(self.status, dtype=np.int8)
        x = np.asarray(self.x, dtype=np.int8)
        if not (len(time) == len(status) == len(x)):
            raise ConfigError("time, status and x must have equal length")
        if len(time) == 0:
            raise ConfigError("dataset is empty")
        if np.any(time <= 0):
            raise ConfigError("all observation times must be > 0")
        if not np.all(np.isin(status, (0, 1, 2))):
            raise ConfigError("status must be coded 0/1/2")
        if not np.all(np.isin(x, (0, 1))):
            raise ConfigError("x must be binary 0/1")
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        ids = self.ids if self.ids is not None else np.arange(len(time))
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "ids", np.asarray(ids))

    def __len__(self) -> int:
        return len(self.time)

    @property
    def randomly_censored(self) -> np.ndarray:
        return (self.status == 0) & (self.time < self.tau)

    def records(self) -> Iterator[SubjectRecord]:
        for i in range(len(self)):
            yield SubjectRecord(int(self.ids[i]), float(self.time[i]),
                                int(self.status[i]), int(self.x[i]))

    def subject(self, i: int) -> SubjectRecord:
        return SubjectRecord(int(self.ids[i]), float(self.time[i]),
                             int(self.status[i]), int(self.x[i]))

    def subset(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self.time[mask], self.status[mask], self.x[mask],
                       self.tau, ids=self.ids[mask])

    def to_csv(self, path) -> None:
        """Write ``id,time,status,x`` rows; times carry 17 significant digits."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "time", "status", "x"])
            for rec in self.records():
                writer.writerow([rec.id, format(rec.time, ".17g"), rec.status, rec.x])

    @classmethod
    def from_csv(cls, path, tau: float | None = None) -> "Dataset":
        """Read a dataset; when ``tau`` is omitted the largest time is used."""
        ids, times, statuses, xs = [], [], [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"id", "time", "status", "x"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ConfigError(f"{path}: expected header id,time,status,x")
            for row in reader:
                ids.append(int(row["id"]))
                times.append(float(row["time"]))
                statuses.append(int(row["status"]))
                xs.append(int(row["x"]))
        times = np.array(times)
        if tau is None:
            tau = float(times.max())
        return cls(times, np.array(statuses), np.array(xs), tau, ids=np.array(ids))
