"""Run traces shared by every learner."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class TracePoint:
    timestep: int
    mean_error: float
    locked_fraction: float
    updates: int


@dataclass
class RunTrace:
    """Time-stamped record of one learner run.

    samples holds (timestep, mean_error, locked_fraction, cumulative updates)
    points; converged_at is the all-locked termination timestep for learners
    that have one, None when the budget ran out first.
    """

    samples: list = field(default_factory=list)
    converged_at: int | None = None
    config_snapshot: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def record(self, timestep, mean_error, locked_fraction, updates):
        self.samples.append(TracePoint(int(timestep), float(mean_error),
                                       float(locked_fraction), int(updates)))

    @property
    def final_mean_error(self) -> float:
        return self.samples[-1].mean_error

    @property
    def timesteps(self):
        return [p.timestep for p in self.samples]

    def to_csv(self) -> str:
        lines = ["timestep,mean_error,locked_fraction,updates"]
        for p in self.samples:
            lines.append(f"{p.timestep},{p.mean_error:.10g},"
                         f"{p.locked_fraction:.10g},{p.updates}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        """Write the trace CSV plus an adjacent .json config snapshot."""
        path = Path(path)
        path.write_text(self.to_csv())
        snapshot = dict(self.config_snapshot)
        snapshot["converged_at"] = self.converged_at
        snapshot["stats"] = self.stats
        path.with_suffix(".json").write_text(
            json.dumps(snapshot, sort_keys=True, separators=(",", ":")))

    @classmethod
    def from_csv(cls, text: str) -> "RunTrace":
        trace = cls()
        for line in text.strip().splitlines()[1:]:
            t, me, lf, u = line.split(",")
            trace.record(int(t), float(me), float(lf), int(u))
        return trace

    @classmethod
    def load(cls, path) -> "RunTrace":
        path = Path(path)
        trace = cls.from_csv(path.read_text())
        side = path.with_suffix(".json")
        if side.exists():
            snapshot = json.loads(side.read_text())
            trace.stats = snapshot.pop("stats", {})
            trace.converged_at = snapshot.pop("converged_at", None)
            trace.config_snapshot = snapshot
        return trace
