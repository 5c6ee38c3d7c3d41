"""Hybrid control-affine polynomial systems and their one-step transition sets.

A system consists of state cells with per-cell polynomial dynamics
x+ = f_i(x) + g_i(x) u, a shared input box, a target set around the origin,
and a list of declared mode switches (i, j).  Mode indices are 1-based
throughout the public API; ties at cell boundaries resolve to the smallest
index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .polyalg import Polynomial, default_names, format_poly, parse_poly

DEFAULT_CELL_TOL = 1e-9
DEFAULT_DEGREE_CAP = 64
BALL_SCALE = 1.05


class OutOfDomainError(ValueError):
    """A state fell outside every cell."""


@dataclass
class SemialgebraicSet:
    """Compact set {x : h_j(x) >= 0 for all j} with a declared bounding box.

    The box is an enclosure used for sampling and for Lebesgue reference
    moments; is_box marks sets whose h list is exactly the per-axis box
    quadratics (those have closed-form moments).  ball_index points at the
    norm-ball polynomial N - |x|^2 when one has been added.
    """

    var_count: int
    polys: list[Polynomial]
    box: np.ndarray
    is_box: bool = False
    ball_index: Optional[int] = None

    def __post_init__(self):
        self.box = np.asarray(self.box, dtype=float)
        if self.box.shape != (self.var_count, 2):
            raise ValueError(f"box must have shape ({self.var_count}, 2)")
        if np.any(self.box[:, 0] > self.box[:, 1]):
            raise ValueError("empty bounding box")
        for h in self.polys:
            if h.var_count != self.var_count:
                raise ValueError("defining polynomial has wrong variable count")

    def contains(self, x: Sequence[float], tol: float = DEFAULT_CELL_TOL) -> bool:
        return all(h(x) >= -tol for h in self.polys)

    def corner_radius_sq(self) -> float:
        """Largest squared norm over the box corners."""
        return float(np.sum(np.maximum(self.box[:, 0] ** 2, self.box[:, 1] ** 2)))

    def ball_poly(self, scale: float = BALL_SCALE) -> Polynomial:
        n_val = scale * self.corner_radius_sq()
        terms = {(0,) * self.var_count: n_val}
        for k in range(self.var_count):
            e = [0] * self.var_count
            e[k] = 2
            terms[tuple(e)] = -1.0
        return Polynomial(self.var_count, terms)

    def with_ball(self, scale: float = BALL_SCALE) -> "SemialgebraicSet":
        """Append N - |x|^2 unless already present."""
        if self.ball_index is not None:
            return self
        return SemialgebraicSet(
            self.var_count,
            self.polys + [self.ball_poly(scale)],
            self.box,
            is_box=self.is_box,
            ball_index=len(self.polys),
        )

    def sample(self, rng: np.random.Generator, count: int, max_tries: int = 200) -> np.ndarray:
        """Rejection-sample points of the set from its box; may return fewer."""
        out = []
        lo, hi = self.box[:, 0], self.box[:, 1]
        for _ in range(max_tries):
            pts = rng.uniform(lo, hi, size=(count, self.var_count))
            for p in pts:
                if self.contains(p):
                    out.append(p)
                    if len(out) == count:
                        return np.array(out)
        return np.array(out) if out else np.empty((0, self.var_count))


def box_set(box: Sequence[Sequence[float]]) -> SemialgebraicSet:
    """Box as a basic semialgebraic set via (x_k - lo)(hi - x_k) >= 0 per axis."""
    box = np.asarray(box, dtype=float)
    n = box.shape[0]
    polys = []
    for k, (lo, hi) in enumerate(box):
        xk = Polynomial.variable(n, k)
        polys.append((xk - lo) * (hi - xk))
    return SemialgebraicSet(n, polys, box, is_box=True)


@dataclass
class Mode:
    """One cell with its control-affine dynamics x+ = f(x) + g(x) u."""

    cell: SemialgebraicSet
    f: list[Polynomial]
    g: list[list[Polynomial]]
    cell_moments_csv: Optional[str] = None  # user-supplied moments for non-box cells


@dataclass
class TransitionSet:
    """States-and-inputs of mode `from_mode` whose image lands in cell `to_mode`."""

    from_mode: int
    to_mode: int
    set: SemialgebraicSet


@dataclass
class HybridSystem:
    n: int
    m: int
    modes: list[Mode]
    input_box: np.ndarray
    target: SemialgebraicSet
    switches: list[tuple[int, int]]
    cell_tol: float = DEFAULT_CELL_TOL

    def __post_init__(self):
        self.input_box = np.asarray(self.input_box, dtype=float)
        if self.input_box.shape != (self.m, 2):
            raise ValueError(f"input box must have shape ({self.m}, 2)")
        for mode in self.modes:
            if mode.cell.var_count != self.n:
                raise ValueError("cell variable count differs from state dimension")
            if len(mode.f) != self.n:
                raise ValueError("f must have one component per state")
            if len(mode.g) != self.n or any(len(row) != self.m for row in mode.g):
                raise ValueError("g must be an n-by-m array of polynomials")
        if self.target.var_count != self.n:
            raise ValueError("target variable count differs from state dimension")
        self.switches = [(int(i), int(j)) for i, j in self.switches]
        s = len(self.modes)
        for i, j in self.switches:
            if not (1 <= i <= s and 1 <= j <= s) or i == j:
                raise ValueError(f"bad switch pair ({i}, {j})")

    @property
    def mode_count(self) -> int:
        return len(self.modes)

    def state_box(self) -> np.ndarray:
        """Componentwise hull of the cell boxes (the declared X box)."""
        boxes = np.stack([mode.cell.box for mode in self.modes])
        return np.column_stack([boxes[:, :, 0].min(axis=0), boxes[:, :, 1].max(axis=0)])

    def mode_of(self, x: Sequence[float], tol: Optional[float] = None) -> int:
        """Smallest 1-based index of a cell containing x; raises outside all cells."""
        tol = self.cell_tol if tol is None else tol
        for i, mode in enumerate(self.modes, start=1):
            if mode.cell.contains(x, tol):
                return i
        raise OutOfDomainError(f"state {list(x)} lies outside every cell")

    def phi(self, i: int) -> list[Polynomial]:
        """Full map of mode i as polynomials over the joint variables (x, u)."""
        mode = self.modes[i - 1]
        nm = self.n + self.m
        comps = []
        for k in range(self.n):
            comp = mode.f[k].lift(nm, 0)
            for j in range(self.m):
                gkj = mode.g[k][j]
                if not gkj.is_zero():
                    comp = comp + gkj.lift(nm, 0) * Polynomial.variable(nm, self.n + j)
            comps.append(comp)
        return comps

    def phi_degree(self, i: int) -> int:
        return max(1, max(c.degree for c in self.phi(i)))

    def step_map(self, i: int, x: Sequence[float], u: Sequence[float]) -> np.ndarray:
        mode = self.modes[i - 1]
        out = np.empty(self.n)
        for k in range(self.n):
            v = mode.f[k](x)
            for j in range(self.m):
                v += mode.g[k][j](x) * u[j]
            out[k] = v
        return out


def build_transition_set(
    sys: HybridSystem,
    i: int,
    j: int,
    add_ball: bool = True,
    degree_cap: int = DEFAULT_DEGREE_CAP,
) -> TransitionSet:
    """Assemble Y_ij = {(x, u) : x in X_i, u in U, map_i(x, u) in X_j}.

    Defining polynomials are the lifted cell constraints of X_i, the lifted
    input-box constraints, and the X_j constraints composed with mode i's map.
    """
    if (i, j) not in sys.switches:
        raise ValueError(f"switch pair ({i}, {j}) is not declared")
    nm = sys.n + sys.m
    cell_i = sys.modes[i - 1].cell
    cell_j = sys.modes[j - 1].cell
    polys = [h.lift(nm, 0) for h in cell_i.polys]
    u_set = box_set(sys.input_box)
    polys += [h.lift(nm, sys.n) for h in u_set.polys]
    phi_i = sys.phi(i)
    for h in cell_j.polys:
        composed = h.compose(phi_i)
        if composed.degree > degree_cap:
            raise ValueError(
                f"composed constraint degree {composed.degree} exceeds cap {degree_cap}"
            )
        polys.append(composed)
    joint_box = np.vstack([cell_i.box, sys.input_box])
    out = SemialgebraicSet(nm, polys, joint_box, is_box=False)
    if add_ball:
        out = out.with_ball()
    return TransitionSet(i, j, out)


def build_all_transitions(sys: HybridSystem, add_ball: bool = True) -> dict:
    return {(i, j): build_transition_set(sys, i, j, add_ball) for i, j in sys.switches}


def normalize_input_box(sys: HybridSystem) -> HybridSystem:
    """Rescale inputs so the box becomes [-1, 1]^m; trajectories are preserved.

    With u_k = c_k + s_k * v_k (c the midpoint, s the half-width), each g
    column picks up the factor s_k and f absorbs g * c.
    """
    if np.all(sys.input_box[:, 0] == -1.0) and np.all(sys.input_box[:, 1] == 1.0):
        return sys
    lo, hi = sys.input_box[:, 0], sys.input_box[:, 1]
    if np.any(lo >= hi):
        raise ValueError("degenerate input interval")
    center = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    new_modes = []
    for mode in sys.modes:
        f_new = []
        for k in range(sys.n):
            comp = mode.f[k]
            for j in range(sys.m):
                if center[j] != 0.0 and not mode.g[k][j].is_zero():
                    comp = comp + mode.g[k][j] * center[j]
            f_new.append(comp)
        g_new = [
            [mode.g[k][j] * half[j] for j in range(sys.m)] for k in range(sys.n)
        ]
        new_modes.append(Mode(mode.cell, f_new, g_new, mode.cell_moments_csv))
    unit = np.column_stack([-np.ones(sys.m), np.ones(sys.m)])
    return HybridSystem(sys.n, sys.m, new_modes, unit, sys.target, list(sys.switches), sys.cell_tol)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    warning: bool = False


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed or c.warning for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "", warning: bool = False):
        self.checks.append(Check(name, passed, detail, warning))

    def __str__(self):
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else ("WARN" if c.warning else "FAIL")
            lines.append(f"[{mark}] {c.name}" + (f": {c.detail}" if c.detail else ""))
        return "\n".join(lines)


def validate(sys: HybridSystem, seed: int = 0, samples: int = 1000) -> ValidationReport:
    """Check the standing assumptions; sampling checks use a fixed seed."""
    rng = np.random.Generator(np.random.Philox(seed))
    report = ValidationReport()

    origin = np.zeros(sys.n)
    cell1 = sys.modes[0].cell
    strictly_inside = all(h(origin) > 0 for h in cell1.polys)
    report.add("origin interior to first cell", strictly_inside)

    z_pts = sys.target.sample(rng, min(samples, 200))
    if len(z_pts):
        bad = [p for p in z_pts if not cell1.contains(p, sys.cell_tol)]
        report.add(
            "target contained in first cell",
            not bad,
            f"{len(bad)}/{len(z_pts)} sampled target points escape" if bad else "",
        )
    else:
        report.add("target contained in first cell", False, "could not sample target set")

    normalized = bool(
        np.all(sys.input_box[:, 0] == -1.0) and np.all(sys.input_box[:, 1] == 1.0)
    )
    report.add("input box normalized to [-1, 1]^m", normalized)

    compact = all(np.all(np.isfinite(mode.cell.box)) for mode in sys.modes) and all(
        np.all(mode.cell.box[:, 0] < mode.cell.box[:, 1]) for mode in sys.modes
    )
    report.add("cells carry finite nonempty bounding boxes", compact)

    # Cover and overlap, sampled on the hull box.
    hull = sys.state_box()
    pts = rng.uniform(hull[:, 0], hull[:, 1], size=(samples, sys.n))
    uncovered = 0
    multi = 0
    for p in pts:
        members = [
            i
            for i, mode in enumerate(sys.modes)
            if mode.cell.contains(p, sys.cell_tol)
        ]
        if not members:
            uncovered += 1
        strict = [
            i
            for i, mode in enumerate(sys.modes)
            if all(h(p) > 1e-7 for h in mode.cell.polys)
        ]
        if len(strict) > 1:
            multi += 1
    report.add(
        "cells cover the state box",
        uncovered == 0,
        f"{uncovered}/{samples} sampled points uncovered" if uncovered else "",
    )
    report.add(
        "cell interiors do not overlap",
        multi == 0,
        f"{multi}/{samples} sampled points strictly inside several cells" if multi else "",
        warning=multi > 0,
    )

    for i, j in sys.switches:
        ts = build_transition_set(sys, i, j, add_ball=False)
        lo, hi = ts.set.box[:, 0], ts.set.box[:, 1]
        found = False
        for _ in range(20):
            draws = rng.uniform(lo, hi, size=(500, ts.set.var_count))
            if any(ts.set.contains(p) for p in draws):
                found = True
                break
        report.add(
            f"transition set {i}->{j} nonempty",
            found,
            "" if found else "no witness in 10^4 draws (declared switch may be spurious)",
            warning=not found,
        )

    missing = [
        idx + 1 for idx, mode in enumerate(sys.modes) if mode.cell.ball_index is None
    ]
    if sys.target.ball_index is None:
        missing.append(0)
    report.add(
        "norm-ball certificate polynomial present",
        not missing,
        "added automatically during relaxation assembly" if missing else "",
        warning=bool(missing),
    )
    return report


# ---------------------------------------------------------------------------
# JSON system description files
# ---------------------------------------------------------------------------


def _poly_list_to_json(polys: Sequence[Polynomial], names) -> list[str]:
    return [format_poly(p, names) for p in polys]


def _set_to_json(s: SemialgebraicSet, names) -> dict:
    out = {
        "h": _poly_list_to_json(s.polys, names),
        "box": [[float(lo), float(hi)] for lo, hi in s.box],
    }
    if s.is_box:
        out["is_box"] = True
    if s.ball_index is not None:
        out["ball_index"] = s.ball_index
    return out


def _set_from_json(d: dict, var_count: int, names) -> SemialgebraicSet:
    polys = [parse_poly(t, var_count, names) for t in d["h"]]
    return SemialgebraicSet(
        var_count,
        polys,
        np.asarray(d["box"], dtype=float),
        is_box=bool(d.get("is_box", False)),
        ball_index=d.get("ball_index"),
    )


def system_to_dict(sys: HybridSystem) -> dict:
    names = default_names(sys.n)
    return {
        "n": sys.n,
        "m": sys.m,
        "modes": [
            {
                "cell": _set_to_json(mode.cell, names),
                "f": _poly_list_to_json(mode.f, names),
                "g": [[format_poly(p, names) for p in row] for row in mode.g],
                **(
                    {"cell_moments_csv": mode.cell_moments_csv}
                    if mode.cell_moments_csv
                    else {}
                ),
            }
            for mode in sys.modes
        ],
        "input_box": [[float(lo), float(hi)] for lo, hi in sys.input_box],
        "target": _set_to_json(sys.target, names),
        "switches": [[i, j] for i, j in sys.switches],
    }


def system_from_dict(d: dict) -> HybridSystem:
    n = int(d["n"])
    m = int(d["m"])
    names = default_names(n)
    modes = []
    for md in d["modes"]:
        cell = _set_from_json(md["cell"], n, names)
        f = [parse_poly(t, n, names) for t in md["f"]]
        g = [[parse_poly(t, n, names) for t in row] for row in md["g"]]
        modes.append(Mode(cell, f, g, md.get("cell_moments_csv")))
    return HybridSystem(
        n,
        m,
        modes,
        np.asarray(d["input_box"], dtype=float),
        _set_from_json(d["target"], n, names),
        [tuple(p) for p in d["switches"]],
    )


def save_system(sys: HybridSystem, path) -> None:
    with open(path, "w") as fh:
        json.dump(system_to_dict(sys), fh, indent=2)
        fh.write("\n")


def load_system(path) -> HybridSystem:
    with open(path) as fh:
        return system_from_dict(json.load(fh))
