"""Inspection plans on a regular planning grid.

Grid points are ``t_k = t_now + k * delta_t`` for ``k = 0..K``.  Inspections
may be scheduled at ``k = 1..K``; every compartment is inspected at ``K``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .fleet import format_time

PLAN_HEADER = ("ship_id", "compartment_id", "grid_index", "time_months")


class PlanError(ValueError):
    """A plan violates the final-inspection constraint or the grid."""


@dataclass(frozen=True)
class PlanningHorizon:
    t_now: float
    t_end: float
    delta_t: float
    K: int

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError("delta_t must be positive")
        if not 0 <= self.t_now < self.t_end:
            raise ValueError("need 0 <= t_now < t_end")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        object.__setattr__(self, "K", int(self.K))
        if not math.isclose(self.t_now + self.K * self.delta_t, self.t_end, rel_tol=1e-12, abs_tol=1e-9):
            raise ValueError(f"t_now + K*delta_t = {self.t_now + self.K * self.delta_t} != t_end = {self.t_end}")

    @classmethod
    def from_span(cls, t_now: float, t_end: float, delta_t: float = 3.0) -> "PlanningHorizon":
        k = (t_end - t_now) / delta_t
        K = int(round(k))
        if not math.isclose(k, K, abs_tol=1e-9):
            raise ValueError(f"horizon length {t_end - t_now} is not a multiple of delta_t={delta_t}")
        return cls(float(t_now), float(t_end), float(delta_t), K)

    @property
    def times(self) -> np.ndarray:
        """Grid times ``t_0 .. t_K``."""
        return self.t_now + self.delta_t * np.arange(self.K + 1)

    def time(self, k: int) -> float:
        return self.t_now + k * self.delta_t

    def to_dict(self) -> dict:
        return {"t_now": self.t_now, "t_end": self.t_end, "delta_t": self.delta_t, "K": self.K}


class SchedulePlan:
    """Binary inspection matrix; ``x[m, k - 1]`` is True when compartment ``m`` is inspected at ``t_k``."""

    def __init__(self, keys, x, horizon: PlanningHorizon, strict: bool = True):
        self.keys = tuple(tuple(k) for k in keys)
        x = np.array(x, dtype=bool)
        if x.shape != (len(self.keys), horizon.K):
            raise PlanError(f"plan matrix must be {len(self.keys)} x {horizon.K}, got {x.shape}")
        x.setflags(write=False)
        self.x = x
        self.horizon = horizon
        self._index = {k: i for i, k in enumerate(self.keys)}
        if strict:
            self.check()

    def check(self) -> None:
        missing = [self.keys[i] for i in np.flatnonzero(~self.x[:, -1])] if self.x.size else []
        if missing:
            raise PlanError(f"{len(missing)} compartment(s) lack the final inspection, e.g. {missing[0]}")

    @property
    def feasible(self) -> bool:
        return bool(self.x.size == 0 or self.x[:, -1].all())

    def with_final(self) -> "SchedulePlan":
        x = self.x.copy()
        if x.size:
            x[:, -1] = True
        return SchedulePlan(self.keys, x, self.horizon)

    def row(self, key) -> np.ndarray:
        return self.x[self._index[tuple(key)]]

    def inspection_indices(self, key) -> list:
        return (np.flatnonzero(self.row(key)) + 1).tolist()

    @property
    def ships(self) -> list:
        return sorted({k[0] for k in self.keys})

    def ship_events(self) -> dict:
        """Ship -> sorted grid indices at which that ship has any inspection."""
        out = {}
        for ship in self.ships:
            rows = [i for i, k in enumerate(self.keys) if k[0] == ship]
            any_k = self.x[rows].any(axis=0)
            out[ship] = (np.flatnonzero(any_k) + 1).tolist()
        return out

    @property
    def n_events(self) -> int:
        return sum(len(v) for v in self.ship_events().values())

    @property
    def n_inspections(self) -> int:
        return int(self.x.sum())

    def timeline(self) -> list:
        """Per grid index: time, compartments inspected, ships taken out of service."""
        ev = self.ship_events()
        rows = []
        for k in range(1, self.horizon.K + 1):
            rows.append({
                "grid_index": k,
                "time_months": self.horizon.time(k),
                "compartments": int(self.x[:, k - 1].sum()),
                "ships": sum(1 for v in ev.values() if k in v),
            })
        return rows

    def __eq__(self, other):
        return (isinstance(other, SchedulePlan) and self.keys == other.keys
                and self.horizon == other.horizon and np.array_equal(self.x, other.x))

    def __repr__(self):
        return f"SchedulePlan({len(self.keys)} compartments, K={self.horizon.K}, {self.n_inspections} inspections)"

    def to_csv(self, target=None, comments=()) -> str:
        buf = io.StringIO()
        for c in comments:
            for line in str(c).splitlines():
                buf.write(f"# {line}\n")
        buf.write(",".join(PLAN_HEADER) + "\n")
        for i, (ship, comp) in enumerate(self.keys):
            for k in np.flatnonzero(self.x[i]) + 1:
                buf.write(f"{ship},{comp},{k},{format_time(self.horizon.time(int(k)))}\n")
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, horizon: PlanningHorizon, keys=None) -> "SchedulePlan":
        if hasattr(source, "read"):
            text = source.read()
        else:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or tuple(f.strip() for f in lines[0].split(",")) != PLAN_HEADER:
            raise PlanError("plan CSV header mismatch")
        entries = []
        for ln in lines[1:]:
            ship, comp, k, _ = [f.strip() for f in ln.split(",")]
            entries.append(((ship, comp), int(k)))
        if keys is None:
            keys = sorted({e[0] for e in entries})
        index = {tuple(k): i for i, k in enumerate(keys)}
        x = np.zeros((len(keys), horizon.K), dtype=bool)
        for key, k in entries:
            if not 1 <= k <= horizon.K:
                raise PlanError(f"grid index {k} outside 1..{horizon.K}")
            x[index[key], k - 1] = True
        return cls(keys, x, horizon)


@dataclass(frozen=True)
class IntervalPolicy:
    """Inspection every ``y`` grid steps, per compartment key (or per group label)."""

    y: dict
    horizon: PlanningHorizon
    groups: dict | None = None  # label -> member keys, when y is per group

    def __post_init__(self):
        for label, v in self.y.items():
            if int(v) != v or not 1 <= v <= self.horizon.K:
                raise ValueError(f"interval for {label!r} must be an integer in 1..{self.horizon.K}, got {v}")

    def interval_for(self, key) -> int:
        key = tuple(key)
        if self.groups is None:
            return int(self.y[key])
        for label, members in self.groups.items():
            if key in {tuple(m) for m in members}:
                return int(self.y[label])
        raise KeyError(key)

    def to_dict(self) -> dict:
        if self.groups is None:
            return {"/".join(k): int(v) for k, v in self.y.items()}
        return {str(g): int(v) for g, v in self.y.items()}


def interval_row(y: int, K: int) -> np.ndarray:
    """Inspections at every multiple of ``y`` plus the forced final one."""
    k = np.arange(1, K + 1)
    row = (k % y) == 0
    row[-1] = True
    return row


def expand_interval_policy(policy: IntervalPolicy, keys=None) -> SchedulePlan:
    """Schedule with inspections where ``k % y == 0``, final inspection enforced."""
    K = policy.horizon.K
    if keys is None:
        if policy.groups is None:
            keys = sorted(policy.y)
        else:
            keys = sorted({tuple(m) for ms in policy.groups.values() for m in ms})
    x = np.stack([interval_row(policy.interval_for(k), K) for k in keys]) if keys else np.zeros((0, K), bool)
    return SchedulePlan(keys, x, policy.horizon)
