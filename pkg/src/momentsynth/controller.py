"""Per-mode polynomial feedback laws extracted from occupation-measure moments.

The mode-i law of degree k solves, for each input dimension j, the linear
system  M_k(y_x) c_j = b_j  where y_x is the state marginal of the mode's
occupation moments and (b_j)_alpha = l_z(u_j x^alpha).  When the occupation
measure sits on the graph of a polynomial feedback u = c(x), this regression
recovers c exactly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import HybridSystem
from .moments import MomentSequence, moment_matrix
from .polyalg import Polynomial, basis, default_names, format_poly, parse_poly

SPECTRAL_CUTOFF = 1e-10
MASS_CUTOFF = 1e-12


def extract(z: MomentSequence, n_states: int, degree: int) -> list[Polynomial]:
    """Moment regression of the input components against state monomials.

    z holds joint moments over (states, inputs).  Requires cross moments of
    degree `degree` + 1 and the order-`degree` state moment matrix; a mode with
    numerically zero occupation mass yields the zero law with a warning.
    """
    m_inputs = z.var_count - n_states
    if m_inputs < 1:
        raise ValueError("moment sequence has no input variables")
    need = max(2 * degree, degree + 1)
    if z.max_degree < need:
        raise ValueError(
            f"need joint moments up to degree {need}, have {z.max_degree}"
        )
    x_basis = basis(n_states, degree)
    tail = (0,) * m_inputs
    y_x = MomentSequence(
        n_states,
        2 * degree,
        np.array([z.value(a + tail) for a in basis(n_states, 2 * degree)]),
    )
    gram = moment_matrix(y_x, degree)
    smax = float(np.linalg.norm(gram, 2)) if gram.size else 0.0
    if smax <= MASS_CUTOFF:
        warnings.warn(
            "occupation mass is numerically zero; emitting the zero controller",
            RuntimeWarning,
        )
        return [Polynomial.zero(n_states) for _ in range(m_inputs)]
    laws = []
    for j in range(m_inputs):
        e_j = tuple(1 if t == j else 0 for t in range(m_inputs))
        rhs = np.array([z.value(a + e_j) for a in x_basis])
        coeff = np.linalg.pinv(gram, rcond=SPECTRAL_CUTOFF) @ rhs
        laws.append(
            Polynomial(n_states, {a: c for a, c in zip(x_basis, coeff)})
        )
    return laws


@dataclass
class PiecewiseController:
    """One polynomial law vector per mode; clamping keeps outputs in [-1, 1]^m."""

    laws: list[list[Polynomial]]
    clamp: bool = True

    def __post_init__(self):
        if not self.laws:
            raise ValueError("controller needs at least one mode")
        counts = {len(mode_laws) for mode_laws in self.laws}
        if len(counts) != 1:
            raise ValueError("all modes must share the input dimension")

    @property
    def m(self) -> int:
        return len(self.laws[0])

    def evaluate(self, mode: int, x: Sequence[float]) -> np.ndarray:
        u = np.array([law(x) for law in self.laws[mode - 1]])
        if self.clamp:
            u = np.clip(u, -1.0, 1.0)
        return u


def apply(ctrl: PiecewiseController, sys: HybridSystem, x: Sequence[float]) -> np.ndarray:
    """Evaluate the law of the active mode; propagates the out-of-domain error."""
    return ctrl.evaluate(sys.mode_of(x), x)


def extract_controller(
    moments: dict[str, MomentSequence],
    sys: HybridSystem,
    degree: int,
    clamp: bool = True,
) -> PiecewiseController:
    """Build the piecewise law from the solved per-mode occupation moments."""
    laws = []
    for i in range(1, sys.mode_count + 1):
        laws.append(extract(moments[f"z[{i}]"], sys.n, degree))
    return PiecewiseController(laws, clamp=clamp)


def controller_to_dict(ctrl: PiecewiseController, n_states: int) -> dict:
    names = default_names(n_states)
    return {
        "clamp": ctrl.clamp,
        "modes": [
            {"u": [format_poly(law, names) for law in mode_laws]}
            for mode_laws in ctrl.laws
        ],
    }


def controller_from_dict(d: dict, n_states: int) -> PiecewiseController:
    names = default_names(n_states)
    laws = [
        [parse_poly(t, n_states, names) for t in mode["u"]] for mode in d["modes"]
    ]
    return PiecewiseController(laws, clamp=bool(d.get("clamp", True)))


def save_controller(ctrl: PiecewiseController, n_states: int, path) -> None:
    with open(path, "w") as fh:
        json.dump(controller_to_dict(ctrl, n_states), fh, indent=2)
        fh.write("\n")


def load_controller(path, n_states: int) -> PiecewiseController:
    with open(path) as fh:
        return controller_from_dict(json.load(fh), n_states)
