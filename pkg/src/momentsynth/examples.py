"""Registry of benchmark hybrid systems with printed reference controllers.

Derived dynamics carry a provenance note naming the derivation and the
simulation test that validates it; printed controller coefficients are stored
to full precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .controller import PiecewiseController
from .model import HybridSystem, Mode, SemialgebraicSet, box_set
from .polyalg import Polynomial


@dataclass
class ExampleEntry:
    name: str
    system: HybridSystem
    reference_controller: Optional[PiecewiseController]
    suggested_order: int
    suggested_degree: int
    t_max: int
    notes: str = ""
    validation_states: list = field(default_factory=list)


def _affine(n: int, const: float, linear) -> Polynomial:
    terms = {(0,) * n: const}
    for k, c in enumerate(linear):
        if c:
            e = [0] * n
            e[k] = 1
            terms[tuple(e)] = c
    return Polynomial(n, terms)


def _const(n: int, c: float) -> Polynomial:
    return Polynomial.constant(n, c)


def _pwa_mode(cell: SemialgebraicSet, A, B, a) -> Mode:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    a = np.asarray(a, dtype=float)
    n, m = B.shape
    f = [_affine(n, a[k], A[k]) for k in range(n)]
    g = [[_const(n, B[k, j]) for j in range(m)] for k in range(n)]
    return Mode(cell, f, g)


def _double_integrator() -> ExampleEntry:
    dt = 0.01
    cell1 = box_set([[-1.0, 0.5], [-1.0, 1.0]]).with_ball()
    cell2 = box_set([[0.5, 1.0], [-1.0, 1.0]]).with_ball()
    A = [[1.0, dt], [0.0, 1.0]]
    B = [[0.0], [dt]]
    modes = [_pwa_mode(cell1, A, B, [0.0, 0.0]), _pwa_mode(cell2, A, B, [0.0, 0.0])]
    target = box_set([[-0.1, 0.1], [-0.1, 0.1]]).with_ball()
    system = HybridSystem(2, 1, modes, [[-1.0, 1.0]], target, [(1, 2), (2, 1)])
    # Plotted trajectories require the raw printed law: at (-0.7, -0.8) it
    # commands u ~ 1.9, and saturating at 1 makes that start exit the box.
    ctrl = PiecewiseController(
        [
            [_affine(2, -0.079924, [-1.1147, -1.4952])],
            [_affine(2, -0.36197, [-0.53351, -0.6395])],
        ],
        clamp=False,
    )
    return ExampleEntry(
        "double_integrator",
        system,
        ctrl,
        suggested_order=1,
        suggested_degree=1,
        t_max=1000,
        notes=(
            "Euler-discretized double integrator (dt = 0.01) on the unit box, "
            "hybridized by splitting at x1 = 0.5; target is the 0.1 box."
        ),
        validation_states=[(0.8, -0.9), (0.4, 0.6), (-0.7, -0.8), (-0.5, 0.9)],
    )


def _pendulum_wall() -> ExampleEntry:
    # Linear inverted pendulum (m = l = 1, g = 10) with an elastic wall of
    # stiffness k = 1000 at x1 = d = 0.1; torque range [-4, 4] scaled to
    # [-1, 1]; explicit Euler with dt = 0.01.
    #   free:    thdd = 10 x1 + 4 u
    #   contact: thdd = 10 x1 - 1000 (x1 - 0.1) + 4 u
    # Validated by the five printed starts reaching the target under the
    # printed law (see the regression test suite).
    cell1 = box_set([[-0.12, 0.1], [-1.0, 1.0]]).with_ball()
    cell2 = box_set([[0.1, 0.12], [-1.0, 1.0]]).with_ball()
    modes = [
        _pwa_mode(cell1, [[1.0, 0.01], [0.1, 1.0]], [[0.0], [0.04]], [0.0, 0.0]),
        _pwa_mode(cell2, [[1.0, 0.01], [-9.9, 1.0]], [[0.0], [0.04]], [0.0, 1.0]),
    ]
    target = box_set([[-0.03, 0.03], [-0.1, 0.1]]).with_ball()
    system = HybridSystem(2, 1, modes, [[-1.0, 1.0]], target, [(1, 2), (2, 1)])
    ctrl = PiecewiseController(
        [
            [_affine(2, 0.10336, [-6.7202, -1.6978])],
            [_affine(2, -0.62962, [5.4774, -0.60315])],
        ],
        clamp=True,
    )
    return ExampleEntry(
        "pendulum_wall",
        system,
        ctrl,
        suggested_order=1,
        suggested_degree=1,
        t_max=2000,
        notes=(
            "PWA model of a linear inverted pendulum against an elastic wall; "
            "matrices derived from the physical parameters and validated by the "
            "printed-controller regression."
        ),
        validation_states=[(0.08, 0.2 + 0.1 * i) for i in range(5)],
    )


def _dubins() -> ExampleEntry:
    # Nonholonomic integrator x1' = u1, x2' = u2, x3' = x2 u1 - x1 u2,
    # Euler dt = 0.01, split at x2 = 0.5.
    dt = 0.01
    n, m = 3, 2
    x1 = Polynomial.variable(n, 0)
    x2 = Polynomial.variable(n, 1)
    x3 = Polynomial.variable(n, 2)
    f = [x1, x2, x3]
    g = [
        [_const(n, dt), _const(n, 0.0)],
        [_const(n, 0.0), _const(n, dt)],
        [x2 * dt, x1 * (-dt)],
    ]
    cell1 = box_set([[-1.0, 1.0], [-1.0, 0.5], [-1.0, 1.0]]).with_ball()
    cell2 = box_set([[-1.0, 1.0], [0.5, 1.0], [-1.0, 1.0]]).with_ball()
    modes = [Mode(cell1, f, g), Mode(cell2, [p for p in f], [list(r) for r in g])]
    target = box_set([[-0.1, 0.1]] * 3).with_ball()
    system = HybridSystem(
        n, m, modes, [[-1.0, 1.0], [-1.0, 1.0]], target, [(1, 2), (2, 1)]
    )
    return ExampleEntry(
        "dubins",
        system,
        None,
        suggested_order=2,
        suggested_degree=4,
        t_max=2000,
        notes=(
            "Hybridized Brockett integrator (Dubins car after coordinate change); "
            "degree-4 synthesis target, no printed controller. t_max = 2000 is an "
            "artifact choice."
        ),
        validation_states=[
            (-1, 1, 0.9),
            (1, 1, 0),
            (-0.2, 1, -0.7),
            (0.7, -1, 0.9),
            (1, -1, -0.6),
            (-1, -1, -0.6),
        ],
    )


def _variable_height_pendulum() -> ExampleEntry:
    # Point-mass pendulum of variable height: qdd = -g e_y + (q - b e_x) u with
    # force scale u in [0, 20] and center of pressure b per-mode in [-0.1, 0.1]
    # or [0.1, 0.3].  The bilinear pair (u, b*u) is taken as the two inputs and
    # boxed (a relaxation of the coupled constraint |b*u| <= 0.3 u), then both
    # are scaled to [-1, 1]: u = 10 + 10 v1, and b*u = c_i + s_i v2 with
    # (c, s) = (0, 2) in mode 1 and (3, 3) in mode 2.  States are
    # (qx, qy - 1, qx', qy'); Euler dt = 0.01; mode boundary qx = 0.1.
    dt = 0.01
    n = 4
    qx = Polynomial.variable(n, 0)
    qy = Polynomial.variable(n, 1)
    vx = Polynomial.variable(n, 2)
    vy = Polynomial.variable(n, 3)

    def mode(cell, c2, s2):
        f = [
            qx + dt * vx,
            qy + dt * vy,
            vx + 0.1 * qx - dt * c2,
            vy + 0.1 * qy,
        ]
        g = [
            [_const(n, 0.0), _const(n, 0.0)],
            [_const(n, 0.0), _const(n, 0.0)],
            [0.1 * qx, _const(n, -dt * s2)],
            [0.1 + 0.1 * qy, _const(n, 0.0)],
        ]
        return Mode(cell, f, g)

    cell1 = box_set([[-0.3, 0.1], [-0.3, 0.3], [-1.0, 1.0], [-1.0, 1.0]]).with_ball()
    cell2 = box_set([[0.1, 0.5], [-0.3, 0.3], [-1.0, 1.0], [-1.0, 1.0]]).with_ball()
    modes = [mode(cell1, 0.0, 2.0), mode(cell2, 3.0, 3.0)]
    target = box_set([[-0.05, 0.05]] * 4).with_ball()
    system = HybridSystem(
        n, 2, modes, [[-1.0, 1.0], [-1.0, 1.0]], target, [(1, 2), (2, 1)]
    )
    return ExampleEntry(
        "variable_height_pendulum",
        system,
        None,
        suggested_order=2,
        suggested_degree=3,
        t_max=2000,
        notes=(
            "Model-only entry: the force bound (20), the box relaxation of the "
            "bilinear input pair and the state box are artifact choices; "
            "excluded from synthesis acceptance."
        ),
        validation_states=[
            (0.2, 0.08, 0, 0),
            (0.08, 0.05, 0, 0),
            (0.04, -0.08, 0, 0),
        ],
    )


def _cart_pole_wall() -> ExampleEntry:
    # Cart pole (m_c = m_p = 1, l = 1, g = 10) with an elastic wall (k = 50) at
    # horizontal distance d = 0.5 from the pole tip x - l*theta.  Linearized
    # about upright, Euler dt = 0.01, force range [-20, 20] scaled to [-1, 1];
    # states scaled by diag(1.5, pi/6, 20, 5) onto the unit box.
    #   free:    xdd = u + 10 th,         thdd = u + 20 th
    #   contact: xdd = u + 10 th,         thdd = u + 50 x - 30 th + 25
    # The free region contains the origin and is listed first so the min-index
    # rule applies at the contact boundary.
    dt = 0.01
    umax = 20.0
    D = np.diag([1.5, np.pi / 6, 20.0, 5.0])
    Dinv = np.linalg.inv(D)

    def scaled(Ac, ac):
        Ac = np.asarray(Ac, dtype=float)
        ac = np.asarray(ac, dtype=float)
        A = np.eye(4) + dt * Ac
        B = dt * np.array([[0.0], [0.0], [1.0], [1.0]]) * umax
        a = dt * ac
        return Dinv @ A @ D, Dinv @ B, Dinv @ a

    A_free = [[0, 0, 1, 0], [0, 0, 0, 1], [0, 10, 0, 0], [0, 20, 0, 0]]
    A_contact = [[0, 0, 1, 0], [0, 0, 0, 1], [0, 10, 0, 0], [50, -30, 0, 0]]
    box = [[-1.0, 1.0]] * 4
    # Contact boundary x - l*theta = -d in scaled coordinates.
    guard = _affine(4, 0.5, [1.5, -np.pi / 6, 0.0, 0.0])
    cell_free = SemialgebraicSet(4, box_set(box).polys + [guard], np.asarray(box))
    cell_contact = SemialgebraicSet(4, box_set(box).polys + [-1.0 * guard], np.asarray(box))
    m1 = _pwa_mode(cell_free.with_ball(), *scaled(A_free, [0, 0, 0, 0]))
    m2 = _pwa_mode(cell_contact.with_ball(), *scaled(A_contact, [0, 0, 0, 25.0]))
    target = box_set([[-0.1, 0.1]] * 4).with_ball()
    system = HybridSystem(4, 1, [m1, m2], [[-1.0, 1.0]], target, [(1, 2), (2, 1)])
    return ExampleEntry(
        "cart_pole_wall",
        system,
        None,
        suggested_order=1,
        suggested_degree=1,
        t_max=2000,
        notes=(
            "Model-only entry with derived linearized matrices; the cells are "
            "box-and-halfspace sets, so synthesis additionally needs "
            "user-supplied cell moments. The force bound 20 is an artifact "
            "choice."
        ),
        validation_states=[
            (-0.5, -0.35, 0, 0),
            (-0.5, 0, 0, 0),
            (-0.75, -0.2, 0, 0),
            (1, -0.55, 0, 0),
        ],
    )


_BUILDERS = {
    "double_integrator": _double_integrator,
    "pendulum_wall": _pendulum_wall,
    "dubins": _dubins,
    "variable_height_pendulum": _variable_height_pendulum,
    "cart_pole_wall": _cart_pole_wall,
}


def names() -> list[str]:
    return sorted(_BUILDERS)


def get(name: str) -> ExampleEntry:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise KeyError(
            f"unknown example {name!r}; available: {', '.join(names())}"
        ) from None
    return builder()
