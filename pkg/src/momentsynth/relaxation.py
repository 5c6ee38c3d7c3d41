"""Moment relaxation of the hybrid reach-control problem, and its dual certificate.

For a relaxation order r, the assembled program has one truncated moment
sequence per measure in the mass-transport balance of the hybrid system:

  * y0[i], y0hat[i] - initial-mass split against the Lebesgue reference on cell i,
  * z[i]            - occupation measure of mode i over states and inputs,
  * y[i,j]          - one-step transition measure on Y_ij,
  * y1              - final mass on the target set.

Equalities are the per-mode mass balance (one per monomial up to degree 2r)
and the Lebesgue domination rows; the cone constraints are the moment and
localizing matrices of every sequence.  The objective maximizes the total
initial mass, so the optimum bounds the Lebesgue volume of the controllable
set from above.

Lowering to the block-diagonal conic form eliminates the scalar moment
variables: each sequence is carried by the entries of its full moment matrix,
with structural equalities tying duplicated entries together.  Dual
multipliers of the mass-balance and domination rows are read back as the
polynomial pair (v_i, w_i) certifying the relaxation bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import (
    BALL_SCALE,
    HybridSystem,
    Mode,
    TransitionSet,
    box_set,
    build_all_transitions,
)
from .moments import MomentSequence, lebesgue_box_moments, monomial_count
from .polyalg import Polynomial, basis
from .solver import ConicProgram, Entry, SdpSolution, SolverOptions, solve


def augment_system(sys: HybridSystem, scale: float = BALL_SCALE) -> HybridSystem:
    """Add the norm-ball certificate polynomial to every cell and the target."""
    modes = [
        Mode(mode.cell.with_ball(scale), mode.f, mode.g, mode.cell_moments_csv)
        for mode in sys.modes
    ]
    return HybridSystem(
        sys.n,
        sys.m,
        modes,
        sys.input_box,
        sys.target.with_ball(scale),
        list(sys.switches),
        sys.cell_tol,
    )


def _half_deg(p: Polynomial) -> int:
    return (p.degree + 1) // 2


def relaxation_order_min(
    sys: HybridSystem, transitions: Optional[dict] = None
) -> int:
    """Smallest admissible relaxation order over all built constraint sets."""
    aug = augment_system(sys)
    if transitions is None:
        transitions = build_all_transitions(aug)
    rmin = 1
    for mode in aug.modes:
        for h in mode.cell.polys:
            rmin = max(rmin, _half_deg(h))
    for h in box_set(aug.input_box).polys:
        rmin = max(rmin, _half_deg(h))
    for h in aug.target.polys:
        rmin = max(rmin, _half_deg(h))
    for ts in transitions.values():
        for h in ts.set.polys:
            rmin = max(rmin, _half_deg(h))
    return rmin


@dataclass
class SequenceSpec:
    name: str
    var_count: int
    max_degree: int
    offset: int

    @property
    def length(self) -> int:
        return monomial_count(self.var_count, self.max_degree)


@dataclass
class BlockSpec:
    seq: str
    multiplier: Optional[Polynomial]  # None encodes the unit multiplier
    order: int
    var_count: int

    @property
    def dim(self) -> int:
        return monomial_count(self.var_count, self.order)


@dataclass
class EqRow:
    kind: str  # 'liouville' | 'domination'
    mode: int
    beta: tuple
    coeffs: dict[int, float]
    rhs: float
    scale: float = 1.0


@dataclass
class SdpProblem:
    system: HybridSystem  # augmented
    r: int
    d: dict[int, int]  # mode -> dynamics degree
    transitions: dict[tuple[int, int], TransitionSet]
    sequences: dict[str, SequenceSpec]
    rows: list[EqRow]
    blocks: list[BlockSpec]
    objective: dict[int, float]
    strict_blocks: bool = False

    @property
    def coord_count(self) -> int:
        return sum(s.length for s in self.sequences.values())

    def coord(self, seq: str, alpha) -> int:
        spec = self.sequences[seq]
        return spec.offset + basis(spec.var_count, spec.max_degree).index(alpha)


def _pushforward_polys(phi: list[Polynomial], n: int, beta_degree: int) -> dict:
    """phi^beta for all |beta| <= beta_degree, built by grlex recurrence."""
    nm = phi[0].var_count
    table: dict[tuple, Polynomial] = {}
    for beta in basis(n, beta_degree):
        if sum(beta) == 0:
            table[beta] = Polynomial.constant(nm, 1.0)
            continue
        k = next(idx for idx, e in enumerate(beta) if e)
        prev = list(beta)
        prev[k] -= 1
        table[beta] = table[tuple(prev)] * phi[k]
    return table


def _cell_reference_moments(mode: Mode, max_degree: int) -> MomentSequence:
    if mode.cell.is_box:
        return lebesgue_box_moments(mode.cell.box, max_degree)
    if mode.cell_moments_csv:
        seq = MomentSequence.from_csv(mode.cell_moments_csv)
        if seq.max_degree < max_degree:
            raise ValueError(
                f"supplied cell moments reach degree {seq.max_degree}, need {max_degree}"
            )
        if seq.max_degree > max_degree:
            trimmed = MomentSequence.zeros(seq.var_count, max_degree)
            for idx, alpha in enumerate(trimmed.basis):
                trimmed.values[idx] = seq.value(alpha)
            seq = trimmed
        return seq
    raise ValueError(
        "cell is not a box and no reference moments were supplied; "
        "set cell_moments_csv or use box cells"
    )


def assemble_primal(
    sys: HybridSystem,
    r: int,
    transitions: Optional[dict] = None,
    strict_blocks: bool = False,
    equilibrate: bool = True,
) -> SdpProblem:
    """Build the order-r moment program for a validated system."""
    aug = augment_system(sys)
    if transitions is None:
        transitions = build_all_transitions(aug)
    rmin = relaxation_order_min(sys, transitions)
    if r < rmin:
        raise ValueError(f"relaxation order {r} is below the minimum {rmin}")

    n, m = aug.n, aug.m
    s = aug.mode_count
    d = {i: aug.phi_degree(i) for i in range(1, s + 1)}

    sequences: dict[str, SequenceSpec] = {}
    offset = 0

    def add_seq(name: str, var_count: int, max_degree: int):
        nonlocal offset
        sequences[name] = SequenceSpec(name, var_count, max_degree, offset)
        offset += sequences[name].length

    for i in range(1, s + 1):
        add_seq(f"y0[{i}]", n, 2 * r)
        add_seq(f"y0hat[{i}]", n, 2 * r)
    add_seq("y1", n, 2 * r)
    for i in range(1, s + 1):
        add_seq(f"z[{i}]", n + m, 2 * r * d[i])
    for (i, j) in aug.switches:
        add_seq(f"y[{i},{j}]", n + m, 2 * r * d[i])

    phi = {i: aug.phi(i) for i in range(1, s + 1)}
    pf = {i: _pushforward_polys(phi[i], n, 2 * r) for i in range(1, s + 1)}
    state_basis = basis(n, 2 * r)
    joint_tail = (0,) * m

    problem = SdpProblem(
        system=aug,
        r=r,
        d=d,
        transitions=transitions,
        sequences=sequences,
        rows=[],
        blocks=[],
        objective={},
        strict_blocks=strict_blocks,
    )

    def joint_coord(seq: str, beta) -> int:
        return problem.coord(seq, tuple(beta) + joint_tail)

    def add_poly_coords(coeffs: dict, seq: str, poly: Polynomial, sign: float):
        spec = sequences[seq]
        idx = basis(spec.var_count, spec.max_degree)
        for alpha, c in poly.terms.items():
            key = spec.offset + idx.index(alpha)
            coeffs[key] = coeffs.get(key, 0.0) + sign * c

    incoming = {i: [j for (j, i2) in aug.switches if i2 == i] for i in range(1, s + 1)}
    outgoing = {i: [j for (i2, j) in aug.switches if i2 == i] for i in range(1, s + 1)}

    # Mass balance: outgoing + occupation = pushforward + fresh initial + incoming.
    for i in range(1, s + 1):
        for beta in state_basis:
            coeffs: dict[int, float] = {}
            if i == 1:
                coeffs[problem.coord("y1", beta)] = 1.0
            else:
                for j in outgoing[i]:
                    key = joint_coord(f"y[{i},{j}]", beta)
                    coeffs[key] = coeffs.get(key, 0.0) + 1.0
            key = joint_coord(f"z[{i}]", beta)
            coeffs[key] = coeffs.get(key, 0.0) + 1.0
            add_poly_coords(coeffs, f"z[{i}]", pf[i][beta], -1.0)
            key = problem.coord(f"y0[{i}]", beta)
            coeffs[key] = coeffs.get(key, 0.0) - 1.0
            for j in incoming[i]:
                add_poly_coords(coeffs, f"y[{j},{i}]", pf[j][beta], -1.0)
            problem.rows.append(EqRow("liouville", i, beta, coeffs, 0.0))

    for i in range(1, s + 1):
        ref = _cell_reference_moments(aug.modes[i - 1], 2 * r)
        for k, beta in enumerate(state_basis):
            coeffs = {
                problem.coord(f"y0[{i}]", beta): 1.0,
                problem.coord(f"y0hat[{i}]", beta): 1.0,
            }
            problem.rows.append(
                EqRow("domination", i, beta, coeffs, float(ref.values[k]))
            )

    # Cone blocks: full moment matrix (unit multiplier) plus one localizing
    # matrix per defining polynomial of the supporting set.
    u_lifted = [h.lift(n + m, n) for h in box_set(aug.input_box).polys]
    for i in range(1, s + 1):
        cell = aug.modes[i - 1].cell
        for name in (f"y0[{i}]", f"y0hat[{i}]"):
            if not strict_blocks:
                problem.blocks.append(BlockSpec(name, None, r, n))
            for h in cell.polys:
                problem.blocks.append(BlockSpec(name, h, r - _half_deg(h), n))
    if not strict_blocks:
        problem.blocks.append(BlockSpec("y1", None, r, n))
    for h in aug.target.polys:
        problem.blocks.append(BlockSpec("y1", h, r - _half_deg(h), n))
    for i in range(1, s + 1):
        name = f"z[{i}]"
        cell = aug.modes[i - 1].cell
        if not strict_blocks:
            problem.blocks.append(BlockSpec(name, None, r * d[i], n + m))
        for h in cell.polys:
            problem.blocks.append(
                BlockSpec(name, h.lift(n + m, 0), r * d[i] - _half_deg(h), n + m)
            )
        for h in u_lifted:
            problem.blocks.append(BlockSpec(name, h, r * d[i] - _half_deg(h), n + m))
    for (i, j) in aug.switches:
        name = f"y[{i},{j}]"
        if not strict_blocks:
            problem.blocks.append(BlockSpec(name, None, r * d[i], n + m))
        for h in transitions[(i, j)].set.polys:
            problem.blocks.append(
                BlockSpec(name, h, r * d[i] - _half_deg(h), n + m)
            )

    for spec in problem.blocks:
        if spec.order < 0:
            raise ValueError(
                f"block for {spec.seq} has negative order; raise the relaxation order"
            )

    for i in range(1, s + 1):
        problem.objective[problem.coord(f"y0[{i}]", (0,) * n)] = 1.0

    if equilibrate:
        for row in problem.rows:
            peak = max(abs(c) for c in row.coeffs.values())
            if peak > 0:
                f = 1.0 / peak
                row.coeffs = {k: c * f for k, c in row.coeffs.items()}
                row.rhs *= f
                row.scale = f
    return problem


# ---------------------------------------------------------------------------
# lowering to block conic form
# ---------------------------------------------------------------------------


@dataclass
class Lowering:
    program: ConicProgram
    coord_expr: list[list[tuple[int, int, int, float]]]
    eq_conic_scale: np.ndarray  # extra scaling applied to each moment-level row
    carrier: dict[str, Optional[int]]
    n_free: int = 0


def _expr_to_entries(expr: dict[tuple[int, int, int], float]) -> list[Entry]:
    out = []
    for (blk, i, j), c in sorted(expr.items()):
        if c != 0.0:
            out.append((blk, i, j, c if i == j else 0.5 * c))
    return out


def lower(problem: SdpProblem) -> Lowering:
    """Rewrite the moment program over matrix-entry variables only."""
    block_dims = [spec.dim for spec in problem.blocks]
    carrier: dict[str, Optional[int]] = {name: None for name in problem.sequences}
    for idx, spec in enumerate(problem.blocks):
        if spec.multiplier is None and carrier[spec.seq] is None:
            carrier[spec.seq] = idx

    coord_expr: list[Optional[list]] = [None] * problem.coord_count
    free_coords: list[int] = []
    for name, spec in problem.sequences.items():
        cb = carrier[name]
        seq_basis = basis(spec.var_count, spec.max_degree)
        if cb is None:
            for local in range(spec.length):
                free_coords.append(spec.offset + local)
            continue
        order = problem.blocks[cb].order
        rows = basis(spec.var_count, order)
        rep: dict[tuple, tuple[int, int]] = {}
        mono = rows.monomials
        for p in range(len(mono)):
            for q in range(p, len(mono)):
                alpha = tuple(a + b for a, b in zip(mono[p], mono[q]))
                if alpha not in rep:
                    rep[alpha] = (p, q)
        for local, alpha in enumerate(seq_basis):
            p, q = rep[alpha]
            coord_expr[spec.offset + local] = [(cb, p, q, 1.0)]

    n_free = len(free_coords)
    free_blk = None
    if n_free:
        free_blk = len(block_dims)
        block_dims.append(-2 * n_free)
        for t, coord in enumerate(free_coords):
            coord_expr[coord] = [
                (free_blk, 2 * t, 2 * t, 1.0),
                (free_blk, 2 * t + 1, 2 * t + 1, -1.0),
            ]

    conic_rows: list[list[Entry]] = []
    rhs: list[float] = []
    eq_scale = np.ones(len(problem.rows))

    def push(expr: dict, b: float) -> int:
        entries = _expr_to_entries(expr)
        peak = max((abs(v) for *_ign, v in entries), default=1.0)
        f = 1.0 / peak if peak > 0 else 1.0
        conic_rows.append([(blk, i, j, v * f) for blk, i, j, v in entries])
        rhs.append(b * f)
        return_scale = f
        return len(conic_rows) - 1, return_scale

    # 1. the moment-level equalities
    for k, row in enumerate(problem.rows):
        expr: dict[tuple[int, int, int], float] = {}
        for coord, c in row.coeffs.items():
            for blk, i, j, w in coord_expr[coord]:
                key = (blk, i, j)
                expr[key] = expr.get(key, 0.0) + c * w
        _, f = push(expr, row.rhs)
        eq_scale[k] = f

    # 2. duplicated entries inside each carrier moment matrix
    for name, spec in problem.sequences.items():
        cb = carrier[name]
        if cb is None:
            continue
        order = problem.blocks[cb].order
        mono = basis(spec.var_count, order).monomials
        rep: dict[tuple, tuple[int, int]] = {}
        for p in range(len(mono)):
            for q in range(p, len(mono)):
                alpha = tuple(a + b for a, b in zip(mono[p], mono[q]))
                if alpha not in rep:
                    rep[alpha] = (p, q)
                    continue
                rp, rq = rep[alpha]
                expr = {(cb, p, q): 1.0, (cb, rp, rq): -1.0}
                push(expr, 0.0)

    # 3. localizing-matrix entries defined from the carried moments
    for blk_idx, spec in enumerate(problem.blocks):
        if spec.multiplier is None:
            continue
        seq = problem.sequences[spec.seq]
        mono = basis(spec.var_count, spec.order).monomials
        for p in range(len(mono)):
            for q in range(p, len(mono)):
                expr = {(blk_idx, p, q): 1.0}
                base = tuple(a + b for a, b in zip(mono[p], mono[q]))
                for gamma, c in spec.multiplier.terms.items():
                    alpha = tuple(a + g for a, g in zip(base, gamma))
                    coord = seq.offset + basis(seq.var_count, seq.max_degree).index(alpha)
                    for cblk, ci, cj, w in coord_expr[coord]:
                        key = (cblk, ci, cj)
                        expr[key] = expr.get(key, 0.0) - c * w
                push(expr, 0.0)

    obj_expr: dict[tuple[int, int, int], float] = {}
    for coord, c in problem.objective.items():
        for blk, i, j, w in coord_expr[coord]:
            key = (blk, i, j)
            obj_expr[key] = obj_expr.get(key, 0.0) + c * w

    program = ConicProgram(
        block_dims,
        conic_rows,
        np.array(rhs),
        _expr_to_entries(obj_expr),
        maximize=True,
    )
    return Lowering(program, coord_expr, eq_scale, carrier, n_free)


def moments_from_solution(
    problem: SdpProblem, lowering: Lowering, sol: SdpSolution
) -> dict[str, MomentSequence]:
    """Evaluate every sequence's moment vector on the solved matrix blocks."""
    out = {}
    for name, spec in problem.sequences.items():
        vals = np.empty(spec.length)
        for local in range(spec.length):
            total = 0.0
            for blk, i, j, w in lowering.coord_expr[spec.offset + local]:
                mat = sol.blocks[blk]
                total += w * (mat[i] if mat.ndim == 1 else mat[i, j])
            vals[local] = total
        out[name] = MomentSequence(spec.var_count, spec.max_degree, vals)
    return out


def equality_residual(problem: SdpProblem, moments: dict[str, MomentSequence]) -> float:
    """Max violation of the (equilibrated) moment-level equalities."""
    flat = np.concatenate([moments[name].values for name in problem.sequences])
    worst = 0.0
    for row in problem.rows:
        acc = -row.rhs
        for coord, c in row.coeffs.items():
            acc += c * flat[coord]
        worst = max(worst, abs(acc))
    return worst


# ---------------------------------------------------------------------------
# dual certificate
# ---------------------------------------------------------------------------


@dataclass
class DualCertificate:
    v: dict[int, Polynomial]
    w: dict[int, Polynomial]
    dual_objective: float
    residuals: dict[str, float]
    grams: dict[str, list] = field(repr=False, default_factory=dict)


def _gram_polynomial(var_count: int, order: int, S: np.ndarray) -> Polynomial:
    mono = basis(var_count, order).monomials
    terms: dict[tuple, float] = {}
    for p in range(len(mono)):
        for q in range(len(mono)):
            alpha = tuple(a + b for a, b in zip(mono[p], mono[q]))
            terms[alpha] = terms.get(alpha, 0.0) + S[p, q]
    return Polynomial(var_count, terms)


def _module_residual(
    target: Polynomial, pieces: list[tuple[Optional[Polynomial], int, np.ndarray]]
) -> float:
    recon = Polynomial.zero(target.var_count)
    for mult, order, S in pieces:
        sigma = _gram_polynomial(target.var_count, order, S)
        recon = recon + (sigma if mult is None else mult * sigma)
    diff = target - recon
    return max((abs(c) for c in diff.terms.values()), default=0.0)


def read_dual(
    problem: SdpProblem, lowering: Lowering, sol: SdpSolution
) -> DualCertificate:
    """Map equality multipliers to the certificate polynomials (v_i, w_i)."""
    if sol.y is None or len(sol.y) != len(lowering.program.rows):
        raise ValueError("solution carries no usable dual vector")
    n = problem.system.n
    s = problem.system.mode_count
    v: dict[int, dict] = {i: {} for i in range(1, s + 1)}
    w: dict[int, dict] = {i: {} for i in range(1, s + 1)}
    for k, row in enumerate(problem.rows):
        lam = float(sol.y[k]) * float(lowering.eq_conic_scale[k]) * row.scale
        if row.kind == "liouville":
            v[row.mode][row.beta] = lam
        else:
            w[row.mode][row.beta] = lam
    v_poly = {i: Polynomial(n, v[i]) for i in v}
    w_poly = {i: Polynomial(n, w[i]) for i in w}

    grams: dict[str, list] = {name: [] for name in problem.sequences}
    for blk_idx, spec in enumerate(problem.blocks):
        grams[spec.seq].append((spec.multiplier, spec.order, sol.slack[blk_idx]))

    nm = problem.system.n + problem.system.m
    phi = {i: problem.system.phi(i) for i in range(1, s + 1)}
    residuals: dict[str, float] = {}
    for i in range(1, s + 1):
        residuals[f"w[{i}] in cell module"] = _module_residual(
            w_poly[i], grams[f"y0hat[{i}]"]
        )
        residuals[f"w[{i}]-v[{i}]-1 in cell module"] = _module_residual(
            w_poly[i] - v_poly[i] - 1.0, grams[f"y0[{i}]"]
        )
        residuals[f"v[{i}] decrease along mode {i}"] = _module_residual(
            v_poly[i].lift(nm, 0) - v_poly[i].compose(phi[i]), grams[f"z[{i}]"]
        )
    for (i, j) in problem.system.switches:
        if i == 1:
            target = -v_poly[j].compose(phi[i])
        else:
            target = v_poly[i].lift(nm, 0) - v_poly[j].compose(phi[i])
        residuals[f"transition {i}->{j}"] = _module_residual(
            target, grams[f"y[{i},{j}]"]
        )
    residuals["v[1] on target module"] = _module_residual(v_poly[1], grams["y1"])

    return DualCertificate(
        v=v_poly,
        w=w_poly,
        dual_objective=sol.dual_objective,
        residuals=residuals,
        grams=grams,
    )


@dataclass
class CertificateGridReport:
    min_w: dict[int, float]
    min_w_minus_v: dict[int, float]
    min_v1_on_target: float

    def passed(self, tol: float = 1e-5) -> bool:
        return (
            all(val >= -tol for val in self.min_w.values())
            and all(val >= -tol for val in self.min_w_minus_v.values())
            and self.min_v1_on_target >= -tol
        )


def _grid_points(set_, count: int) -> np.ndarray:
    n = set_.var_count
    per_dim = max(2, math.ceil(count ** (1.0 / n)))
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in set_.box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = [p for p in pts if set_.contains(p, 1e-9)]
    return np.array(keep) if keep else pts


def check_certificate(
    problem: SdpProblem, cert: DualCertificate, count: int = 100
) -> CertificateGridReport:
    """Evaluate the dual inequalities on membership-filtered grids."""
    sys = problem.system
    min_w = {}
    min_wv = {}
    for i in range(1, sys.mode_count + 1):
        pts = _grid_points(sys.modes[i - 1].cell, count)
        min_w[i] = min(cert.w[i](p) for p in pts)
        min_wv[i] = min(cert.w[i](p) - cert.v[i](p) - 1.0 for p in pts)
    zpts = _grid_points(sys.target, count)
    min_v1 = min(cert.v[1](p) for p in zpts)
    return CertificateGridReport(min_w, min_wv, min_v1)


# ---------------------------------------------------------------------------
# one-call pipeline
# ---------------------------------------------------------------------------


@dataclass
class RelaxationResult:
    problem: SdpProblem
    lowering: Lowering
    solution: SdpSolution
    moments: dict[str, MomentSequence]
    certificate: DualCertificate

    @property
    def bound(self) -> float:
        """The relaxation value p_r (primal objective at termination)."""
        return self.solution.primal_objective


def solve_relaxation(
    sys: HybridSystem,
    r: int,
    options: Optional[SolverOptions] = None,
    strict_blocks: bool = False,
) -> RelaxationResult:
    problem = assemble_primal(sys, r, strict_blocks=strict_blocks)
    lowering = lower(problem)
    sol = solve(lowering.program, options)
    moments = moments_from_solution(problem, lowering, sol)
    cert = read_dual(problem, lowering, sol)
    return RelaxationResult(problem, lowering, sol, moments, cert)
