"""Closed-loop rollout, target-reach detection and controllable-set sampling.

Rollouts follow the discrete map exactly: reach events are evaluated on
arrival states only, and a state escaping every cell terminates the run with
the distinct 'left-domain' label (such starts count as uncontrollable in the
sampled maps).  Uniform sampling uses the counter-based Philox generator so
that maps are reproducible across platforms from the seed alone.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .controller import PiecewiseController
from .model import HybridSystem, OutOfDomainError

EXIT_REACHED = "reached"
EXIT_LEFT = "left-domain"
EXIT_CAP = "step-cap"

LABEL_CONTROLLABLE = "controllable"
LABEL_UNCONTROLLABLE = "uncontrollable"
LABEL_LEFT = "left-domain"


@dataclass
class Trajectory:
    states: list[np.ndarray]
    inputs: list[np.ndarray]
    modes: list[int]  # one per state; 0 marks a state outside every cell
    reached: bool
    reach_step: Optional[int]
    exit_reason: str

    def __len__(self) -> int:
        return len(self.states)

    def to_csv(self, path) -> None:
        n = len(self.states[0])
        m = len(self.inputs[0]) if self.inputs else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["t"]
                + [f"x{k + 1}" for k in range(n)]
                + [f"u{k + 1}" for k in range(m)]
                + ["mode"]
            )
            for t, x in enumerate(self.states):
                u = (
                    [repr(float(v)) for v in self.inputs[t]]
                    if t < len(self.inputs)
                    else [""] * m
                )
                w.writerow([t] + [repr(float(v)) for v in x] + u + [self.modes[t]])


def step(sys: HybridSystem, ctrl: PiecewiseController, x: Sequence[float]) -> np.ndarray:
    """One closed-loop step x+ = f_i(x) + g_i(x) u with i the active mode."""
    i = sys.mode_of(x)
    u = ctrl.evaluate(i, x)
    return sys.step_map(i, x, u)


def rollout(
    sys: HybridSystem,
    ctrl: PiecewiseController,
    x0: Sequence[float],
    t_max: int,
) -> Trajectory:
    """Iterate until the target is reached, the state leaves X, or t_max steps."""
    x = np.asarray(x0, dtype=float)
    states = [x.copy()]
    inputs: list[np.ndarray] = []
    modes: list[int] = []
    tol = sys.cell_tol
    reached = False
    reach_step = None
    exit_reason = EXIT_CAP
    for t in range(t_max + 1):
        if sys.target.contains(x, tol):
            modes.append(sys.mode_of(x))
            reached = True
            reach_step = t
            exit_reason = EXIT_REACHED
            break
        try:
            i = sys.mode_of(x)
        except OutOfDomainError:
            modes.append(0)
            exit_reason = EXIT_LEFT
            break
        modes.append(i)
        if t == t_max:
            break
        u = ctrl.evaluate(i, x)
        inputs.append(u)
        x = sys.step_map(i, x, u)
        states.append(x.copy())
    return Trajectory(states, inputs, modes, reached, reach_step, exit_reason)


@dataclass
class SampleSpec:
    """Grid ('grid') or uniform ('uniform') sampling, with optional fixed axes."""

    kind: str
    grid_shape: Optional[tuple[int, ...]] = None
    count: Optional[int] = None
    seed: Optional[int] = None
    section: dict[int, float] = field(default_factory=dict)  # 0-based axis -> value

    def __post_init__(self):
        if self.kind not in ("grid", "uniform"):
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        if self.kind == "grid" and not self.grid_shape:
            raise ValueError("grid sampling needs a grid shape")
        if self.kind == "uniform":
            if not self.count:
                raise ValueError("uniform sampling needs a sample count")
            if self.seed is None:
                raise ValueError("uniform sampling needs a seed")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.grid_shape:
            out["grid_shape"] = list(self.grid_shape)
        if self.count:
            out["count"] = self.count
        if self.seed is not None:
            out["seed"] = self.seed
        if self.section:
            out["section"] = {str(k + 1): v for k, v in self.section.items()}
        return out


@dataclass
class ControllabilityMap:
    points: np.ndarray
    labels: list[str]
    spec: SampleSpec
    t_max: int

    @property
    def counts(self) -> dict[str, int]:
        out = {LABEL_CONTROLLABLE: 0, LABEL_UNCONTROLLABLE: 0, LABEL_LEFT: 0}
        for lab in self.labels:
            out[lab] += 1
        return out

    @property
    def controllable_fraction(self) -> float:
        if not self.labels:
            return 0.0
        return self.counts[LABEL_CONTROLLABLE] / len(self.labels)

    def to_csv(self, path) -> None:
        n = self.points.shape[1] if len(self.points) else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k + 1}" for k in range(n)] + ["label"])
            for p, lab in zip(self.points, self.labels):
                w.writerow([repr(float(v)) for v in p] + [lab])

    def summary(self) -> dict:
        counts = self.counts
        total = len(self.labels)
        return {
            "total": total,
            "counts": counts,
            "fractions": {
                k: (v / total if total else 0.0) for k, v in counts.items()
            },
            "t_max": self.t_max,
            "spec": self.spec.to_dict(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _sample_points(sys: HybridSystem, spec: SampleSpec) -> np.ndarray:
    box = sys.state_box()
    n = sys.n
    free_axes = [k for k in range(n) if k not in spec.section]
    if spec.kind == "grid":
        shape = spec.grid_shape
        if len(shape) != len(free_axes):
            raise ValueError(
                f"grid shape has {len(shape)} axes but {len(free_axes)} coordinates are free"
            )
        axes = [
            np.linspace(box[k, 0], box[k, 1], c) for k, c in zip(free_axes, shape)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        free = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        rng = np.random.Generator(np.random.Philox(spec.seed))
        lo = np.array([box[k, 0] for k in free_axes])
        hi = np.array([box[k, 1] for k in free_axes])
        free = rng.uniform(lo, hi, size=(spec.count, len(free_axes)))
    pts = np.zeros((len(free), n))
    for col, k in enumerate(free_axes):
        pts[:, k] = free[:, col]
    for k, val in spec.section.items():
        pts[:, k] = val
    return pts


def sample_controllability(
    sys: HybridSystem,
    ctrl: PiecewiseController,
    spec: SampleSpec,
    t_max: int,
) -> ControllabilityMap:
    """Label each sampled start by rollout outcome; deterministic per seed."""
    pts = _sample_points(sys, spec)
    labels = []
    for p in pts:
        traj = rollout(sys, ctrl, p, t_max)
        if traj.exit_reason == EXIT_REACHED:
            labels.append(LABEL_CONTROLLABLE)
        elif traj.exit_reason == EXIT_LEFT:
            labels.append(LABEL_LEFT)
        else:
            labels.append(LABEL_UNCONTROLLABLE)
    return ControllabilityMap(pts, labels, spec, t_max)
