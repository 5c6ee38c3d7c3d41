"""Dense primal-dual interior-point solver for block SDPs, plus SDPA file I/O.

Programs are kept in the standard conic form

    max <C, X>   s.t.   <A_k, X> = b_k  (k = 1..m),   X in K,

where K is a product of dense PSD blocks and optionally diagonal
(nonnegative-orthant) blocks; a `maximize` flag admits min problems.  The
method is path following with the HKM search direction and a Mehrotra
predictor-corrector step, solving the dense Schur complement system by
Cholesky factorization.  Solves are single-threaded and deterministic.

The sparse SDPA text format (".dat-s") is used for interchange with external
solvers; solutions can be re-imported either from CSDP-style solution files
or from SDPA-style output sections (xVec/xMat/yMat).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

Entry = tuple[int, int, int, float]  # block, row, col (0-based, row <= col), value

STATUS_OPTIMAL = "optimal"
STATUS_NEAR = "near-optimal"
STATUS_INFEASIBLE = "infeasible-detected"
STATUS_ITER = "iteration-limit"
STATUS_BREAKDOWN = "numerical-breakdown"


class SdpaFormatError(ValueError):
    """Malformed problem or solution file; message carries line diagnostics."""


@dataclass
class SolverOptions:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: int = 200
    step_frac: float = 0.98
    presolve_pivot_tol: float = 1e-10
    verbose: bool = False


@dataclass
class ConicProgram:
    """Block-structured SDP data.

    block_dims uses the SDPA convention: a positive entry is a dense PSD
    block, a negative entry a diagonal (componentwise nonnegative) block of
    that size.  Rows and the objective are sparse symmetric matrices given by
    upper-triangle entries; <A, X> sums over both triangles.
    """

    block_dims: list[int]
    rows: list[list[Entry]]
    rhs: np.ndarray
    objective: list[Entry]
    maximize: bool = True

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=float)
        if len(self.rows) != len(self.rhs):
            raise ValueError("rhs length must equal the number of rows")
        for dim in self.block_dims:
            if dim == 0:
                raise ValueError("zero block dimension")
        for entries in list(self.rows) + [self.objective]:
            for blk, i, j, _ in entries:
                if not 0 <= blk < len(self.block_dims):
                    raise ValueError(f"entry references unknown block {blk}")
                d = abs(self.block_dims[blk])
                if not (0 <= i <= j < d):
                    raise ValueError(f"bad entry index ({i}, {j}) in block of size {d}")
                if self.block_dims[blk] < 0 and i != j:
                    raise ValueError("diagonal blocks admit only diagonal entries")

    @property
    def n_constraints(self) -> int:
        return len(self.rows)

    def block_matrix(self, entries: list[Entry], blk: int) -> np.ndarray:
        """Dense symmetric matrix (or diagonal vector) of one block."""
        d = self.block_dims[blk]
        if d > 0:
            out = np.zeros((d, d))
            for b, i, j, v in entries:
                if b == blk:
                    out[i, j] += v
                    if i != j:
                        out[j, i] += v
            return out
        out = np.zeros(-d)
        for b, i, j, v in entries:
            if b == blk:
                out[i] += v
        return out


@dataclass
class SdpSolution:
    blocks: list[np.ndarray]
    y: np.ndarray
    slack: list[np.ndarray]
    status: str
    primal_objective: float
    dual_objective: float
    iterations: int
    residual_primal: float
    residual_dual: float
    rel_gap: float
    dropped_rows: list[int] = field(default_factory=list)
    message: str = ""


# ---------------------------------------------------------------------------
# block helpers
# ---------------------------------------------------------------------------


def _frob(entries_mat, X, diag: bool) -> float:
    if diag:
        return float(np.dot(entries_mat, X))
    return float(np.sum(entries_mat * X))


def _max_step(X: np.ndarray, dX: np.ndarray, diag: bool) -> float:
    """Largest alpha with X + alpha dX psd (X assumed pd)."""
    if diag:
        neg = dX < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-X[neg] / dX[neg]))
    d = X.shape[0]
    L = None
    for attempt in range(4):
        try:
            shift = 0.0 if attempt == 0 else (10.0**attempt) * 1e-13 * max(np.trace(X) / d, 1.0)
            L = np.linalg.cholesky(X + shift * np.eye(d))
            break
        except np.linalg.LinAlgError:
            continue
    if L is None:
        return 0.0
    W = sla.solve_triangular(L, dX, lower=True)
    W = sla.solve_triangular(L, W.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (W + W.T))
    lo = lam.min()
    if lo >= 0:
        return np.inf
    return float(-1.0 / lo)


def _min_eig(X: np.ndarray, diag: bool) -> float:
    if diag:
        return float(X.min()) if len(X) else 0.0
    return float(np.linalg.eigvalsh(X).min()) if len(X) else 0.0


class _BlockData:
    """Per-block dense constraint stack for fast A(X), A*(y) and Schur assembly."""

    def __init__(self, dim: int, local_rows: np.ndarray, a_stack: np.ndarray, c: np.ndarray):
        self.dim = dim
        self.diag = dim < 0
        self.size = abs(dim)
        self.local_rows = local_rows
        self.a_stack = a_stack  # (n_loc, d, d) dense or (n_loc, d) diag
        self.c = c


def _prepare_blocks(prog: ConicProgram, cmats: list[np.ndarray]) -> list[_BlockData]:
    per_block_rows: list[list[int]] = [[] for _ in prog.block_dims]
    for k, entries in enumerate(prog.rows):
        seen = set()
        for blk, _, _, _ in entries:
            if blk not in seen:
                per_block_rows[blk].append(k)
                seen.add(blk)
    data = []
    for blk, dim in enumerate(prog.block_dims):
        local = np.array(per_block_rows[blk], dtype=int)
        d = abs(dim)
        if dim > 0:
            stack = np.zeros((len(local), d, d))
        else:
            stack = np.zeros((len(local), d))
        pos = {k: t for t, k in enumerate(local)}
        for k in local:
            mat = prog.block_matrix(prog.rows[k], blk)
            stack[pos[k]] = mat
        data.append(_BlockData(dim, local, stack, cmats[blk]))
    return data


def _apply_A(blocks: list[_BlockData], X: list[np.ndarray], m: int) -> np.ndarray:
    out = np.zeros(m)
    for b, Xb in zip(blocks, X):
        if len(b.local_rows) == 0:
            continue
        if b.diag:
            out[b.local_rows] += b.a_stack @ Xb
        else:
            out[b.local_rows] += np.einsum("kij,ij->k", b.a_stack, Xb)
    return out


def _apply_At(blocks: list[_BlockData], y: np.ndarray) -> list[np.ndarray]:
    out = []
    for b in blocks:
        if len(b.local_rows) == 0:
            out.append(np.zeros(b.a_stack.shape[1:]))
            continue
        yl = y[b.local_rows]
        if b.diag:
            out.append(yl @ b.a_stack)
        else:
            out.append(np.einsum("k,kij->ij", yl, b.a_stack))
    return out


def solve(prog: ConicProgram, opts: Optional[SolverOptions] = None) -> SdpSolution:
    """Run the interior-point method; always returns the best iterate found."""
    opts = opts or SolverOptions()
    m_full = prog.n_constraints

    cmats = [prog.block_matrix(prog.objective, blk) for blk in range(len(prog.block_dims))]
    sign = 1.0 if prog.maximize else -1.0
    # Internal form: min <C', X> with C' = -sign * C_reported.
    cmats_int = [-sign * c for c in cmats]

    kept, dropped, gram = _presolve_rows(prog, opts.presolve_pivot_tol)
    sub = ConicProgram(
        prog.block_dims,
        [prog.rows[k] for k in kept],
        prog.rhs[kept],
        prog.objective,
        prog.maximize,
    )
    blocks = _prepare_blocks(sub, cmats_int)
    m = len(kept)
    b = sub.rhs

    gram_factor = None
    if m:
        gk = gram[np.ix_(kept, kept)]
        jitter = 1e-13 * max(float(np.max(np.diag(gk))), 1.0)
        for attempt in range(6):
            try:
                gram_factor = sla.cho_factor(gk + (jitter * 10**attempt) * np.eye(m), lower=True)
                break
            except np.linalg.LinAlgError:
                continue

    diag_flags = [bd.diag for bd in blocks]
    nu = sum(abs(d) for d in prog.block_dims)

    # Scaled-identity start (norm heuristic keeps the first iterates well inside the cone).
    X: list[np.ndarray] = []
    S: list[np.ndarray] = []
    for bd in blocks:
        d = bd.size
        anorms = (
            np.sqrt(np.sum(bd.a_stack**2, axis=tuple(range(1, bd.a_stack.ndim))))
            if len(bd.local_rows)
            else np.zeros(0)
        )
        bmax = np.max(np.abs(b[bd.local_rows]) / (1.0 + anorms)) if len(bd.local_rows) else 0.0
        xi = max(10.0, math.sqrt(d), d * bmax)
        eta = max(10.0, math.sqrt(d), float(np.linalg.norm(bd.c)))
        if len(anorms):
            eta = max(eta, float(anorms.max()))
        if bd.diag:
            X.append(np.full(d, xi))
            S.append(np.full(d, eta))
        else:
            X.append(xi * np.eye(d))
            S.append(eta * np.eye(d))
    y = np.zeros(m)

    bnorm = 1.0 + np.linalg.norm(b)
    cnorm = 1.0 + math.sqrt(sum(float(np.sum(c**2)) for c in cmats_int))

    def residuals(X, y, S):
        rp = b - _apply_A(blocks, X, m)
        aty = _apply_At(blocks, y)
        rd = [c - at - s for c, at, s in zip((bd.c for bd in blocks), aty, S)]
        return rp, rd

    def metrics(X, y, S, rp, rd):
        pobj = sum(_frob(bd.c, Xb, bd.diag) for bd, Xb in zip(blocks, X))
        dobj = float(np.dot(b, y))
        rel_p = float(np.linalg.norm(rp)) / bnorm
        rel_d = math.sqrt(sum(float(np.sum(r**2)) for r in rd)) / cnorm
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return pobj, dobj, rel_p, rel_d, gap

    best = None
    best_phi = np.inf
    status = STATUS_ITER
    message = ""
    it = 0
    stall = 0

    for it in range(1, opts.max_iter + 1):
        rp, rd = residuals(X, y, S)
        pobj, dobj, rel_p, rel_d, gap = metrics(X, y, S, rp, rd)
        mu = sum(_frob(Xb, Sb, bd.diag) for bd, Xb, Sb in zip(blocks, X, S)) / nu
        phi = max(rel_p, rel_d, gap)
        if phi < best_phi:
            best_phi = phi
            best = ([Xb.copy() for Xb in X], y.copy(), [Sb.copy() for Sb in S], pobj, dobj, rel_p, rel_d, gap)
            stall = 0
        else:
            stall += 1
        if opts.verbose:
            print(
                f"iter {it:3d}  pobj {pobj: .8e}  dobj {dobj: .8e}  "
                f"rp {rel_p:.2e}  rd {rel_d:.2e}  gap {gap:.2e}  mu {mu:.2e}"
            )
        if rel_p <= opts.tol_feas and rel_d <= opts.tol_feas and gap <= opts.tol_gap:
            status = STATUS_OPTIMAL
            break
        # On degenerate problems the Schur system eventually poisons the
        # iterates; stop at the recorded best once progress reverses.
        if stall >= 12 or (best_phi <= 1e-4 and phi > 100.0 * best_phi):
            message = "progress stalled; returning best iterate"
            break
        if max(np.max(np.abs(y)) if m else 0.0, max(float(np.max(np.abs(Xb))) for Xb in X)) > 1e13:
            status = STATUS_INFEASIBLE
            message = "iterates diverged; problem is likely primal or dual infeasible"
            break

        Sinv = []
        for bd, Sb in zip(blocks, S):
            if bd.diag:
                Sinv.append(1.0 / Sb)
            else:
                Sinv.append(np.linalg.inv(Sb))

        # Schur complement M[i, j] = tr(A_i X A_j S^{-1}).
        M = np.zeros((m, m))
        for bd, Xb, Sib in zip(blocks, X, Sinv):
            if len(bd.local_rows) == 0:
                continue
            ix = np.ix_(bd.local_rows, bd.local_rows)
            if bd.diag:
                w = Xb * Sib
                M[ix] += (bd.a_stack * w) @ bd.a_stack.T
            else:
                T = np.einsum("ab,kbc,cd->kad", Xb, bd.a_stack, Sib, optimize=True)
                M[ix] += np.einsum("iab,jba->ij", bd.a_stack, T, optimize=True)
        M = 0.5 * (M + M.T)

        factor = None
        reg = 0.0
        base = max(np.trace(M) / max(m, 1), 1.0) if m else 1.0
        for attempt in range(8):
            try:
                factor = sla.cho_factor(M + reg * np.eye(m), lower=True)
                break
            except np.linalg.LinAlgError:
                reg = base * (1e-14 * 10**attempt)
        if factor is None:
            status = STATUS_BREAKDOWN
            message = "Schur complement factorization failed"
            break

        def schur_solve(rhs):
            dy = sla.cho_solve(factor, rhs)
            for _ in range(2):  # refinement rescues ill-conditioned late iterations
                resid = rhs - M @ dy
                dy = dy + sla.cho_solve(factor, resid)
            return dy

        def direction(Kmats):
            rhs = b.copy()
            for bd, Xb, Sib, Rb, Kb in zip(blocks, X, Sinv, rd, Kmats):
                if len(bd.local_rows) == 0:
                    continue
                if bd.diag:
                    vec = Xb * Rb * Sib
                    if Kb is not None:
                        vec -= Kb * Sib
                    rhs[bd.local_rows] += bd.a_stack @ vec
                else:
                    mat = Xb @ Rb @ Sib
                    if Kb is not None:
                        mat -= Kb @ Sib
                    rhs[bd.local_rows] += np.einsum("kij,ij->k", bd.a_stack, mat)
            dy = schur_solve(rhs)
            atdy = _apply_At(blocks, dy)
            dS = [Rb - at for Rb, at in zip(rd, atdy)]
            dX = []
            for bd, Xb, Sib, dSb, Kb in zip(blocks, X, Sinv, dS, Kmats):
                if bd.diag:
                    v = -Xb - Xb * dSb * Sib
                    if Kb is not None:
                        v += Kb * Sib
                    dX.append(v)
                else:
                    mat = -Xb - Xb @ dSb @ Sib
                    if Kb is not None:
                        mat += Kb @ Sib
                    dX.append(0.5 * (mat + mat.T))
            return dy, dX, dS

        # Predictor (affine scaling).
        dy_a, dX_a, dS_a = direction([None] * len(blocks))
        ap = min(1.0, min(_max_step(Xb, dXb, f) for Xb, dXb, f in zip(X, dX_a, diag_flags)))
        ad = min(1.0, min(_max_step(Sb, dSb, f) for Sb, dSb, f in zip(S, dS_a, diag_flags)))
        mu_aff = (
            sum(
                _frob(Xb + ap * dXb, Sb + ad * dSb, bd.diag)
                for bd, Xb, dXb, Sb, dSb in zip(blocks, X, dX_a, S, dS_a)
            )
            / nu
        )
        sigma = min(1.0, max((mu_aff / mu) ** 3 if mu > 0 else 0.0, 1e-10))

        # Corrector with Mehrotra second-order term.
        Kmats = []
        for bd, dXb, dSb in zip(blocks, dX_a, dS_a):
            if bd.diag:
                Kmats.append(sigma * mu - dXb * dSb)
            else:
                Kmats.append(sigma * mu * np.eye(bd.size) - dXb @ dSb)
        dy, dX, dS = direction(Kmats)

        tau = opts.step_frac
        ap = min(1.0, tau * min(_max_step(Xb, dXb, f) for Xb, dXb, f in zip(X, dX, diag_flags)))
        ad = min(1.0, tau * min(_max_step(Sb, dSb, f) for Sb, dSb, f in zip(S, dS, diag_flags)))
        if ap < 1e-10 and ad < 1e-10:
            status = STATUS_BREAKDOWN
            message = "step length underflow"
            break
        X = [Xb + ap * dXb for Xb, dXb in zip(X, dX)]
        S = [Sb + ad * dSb for Sb, dSb in zip(S, dS)]
        y = y + ad * dy

    else:
        it = opts.max_iter

    # Evaluate the final iterate too.
    rp, rd = residuals(X, y, S)
    pobj, dobj, rel_p, rel_d, gap = metrics(X, y, S, rp, rd)
    phi = max(rel_p, rel_d, gap)
    if phi < best_phi:
        best_phi = phi
        best = (X, y, [Sb for Sb in S], pobj, dobj, rel_p, rel_d, gap)

    Xb_, yb_, Sb_, pobj, dobj, rel_p, rel_d, gap = best

    # Feasibility restoration: the least-norm correction onto A(X) = b costs
    # one back-solve and repairs the primal residual left by late-stage
    # Schur ill-conditioning.
    if gram_factor is not None and 0.0 < rel_p < 1e-3:
        rp = b - _apply_A(blocks, Xb_, m)
        corr = _apply_At(blocks, sla.cho_solve(gram_factor, rp))
        Xc = [Xb + cb for Xb, cb in zip(Xb_, corr)]
        rp2, rd2 = residuals(Xc, yb_, Sb_)
        p2, d2, relp2, reld2, gap2 = metrics(Xc, yb_, Sb_, rp2, rd2)
        if max(relp2, reld2, gap2) < max(rel_p, rel_d, gap):
            Xb_, pobj, dobj, rel_p, rel_d, gap = Xc, p2, d2, relp2, reld2, gap2
    if status not in (STATUS_INFEASIBLE, STATUS_BREAKDOWN):
        if rel_p <= opts.tol_feas and rel_d <= opts.tol_feas and gap <= opts.tol_gap:
            status = STATUS_OPTIMAL
        elif max(rel_p, rel_d, gap) <= 1e-6:
            status = STATUS_NEAR
        else:
            status = STATUS_ITER
    elif status == STATUS_BREAKDOWN and max(rel_p, rel_d, gap) <= 1e-6:
        status = STATUS_NEAR

    y_full = np.zeros(m_full)
    y_full[kept] = yb_
    # Report in the requested orientation: for max problems the dual satisfies
    # S = sum_k y_k A_k - C, for min problems S = C - sum_k y_k A_k.
    y_rep = -y_full if prog.maximize else y_full
    pobj_rep = -pobj if prog.maximize else pobj
    dobj_rep = -dobj if prog.maximize else dobj
    return SdpSolution(
        blocks=Xb_,
        y=y_rep,
        slack=Sb_,
        status=status,
        primal_objective=pobj_rep,
        dual_objective=dobj_rep,
        iterations=it,
        residual_primal=rel_p,
        residual_dual=rel_d,
        rel_gap=gap,
        dropped_rows=list(dropped),
        message=message,
    )


def _presolve_rows(
    prog: ConicProgram, pivot_tol: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Detect linearly dependent equality rows via pivoted Cholesky of A A^T."""
    m = prog.n_constraints
    if m == 0:
        return np.array([], dtype=int), np.array([], dtype=int), np.zeros((0, 0))
    # Gram matrix with Frobenius weights (off-diagonals count twice).
    gram = np.zeros((m, m))
    index: dict[tuple[int, int, int], list[tuple[int, float]]] = {}
    for k, entries in enumerate(prog.rows):
        acc: dict[tuple[int, int, int], float] = {}
        for blk, i, j, v in entries:
            acc[(blk, i, j)] = acc.get((blk, i, j), 0.0) + v
        for key, v in acc.items():
            index.setdefault(key, []).append((k, v))
    for (blk, i, j), hits in index.items():
        w = 1.0 if i == j else 2.0
        for a in range(len(hits)):
            ka, va = hits[a]
            for bqt in range(a, len(hits)):
                kb, vb = hits[bqt]
                gram[ka, kb] += w * va * vb
                if ka != kb:
                    gram[kb, ka] += w * va * vb
    scale = np.max(np.diag(gram)) if m else 1.0
    c, piv, rank, _ = lapack.dpstrf(gram, tol=pivot_tol * max(scale, 1.0), lower=1)
    kept = np.sort(piv[:rank] - 1)
    dropped = np.sort(piv[rank:] - 1)
    return kept, dropped, gram


# ---------------------------------------------------------------------------
# SDPA sparse problem format
# ---------------------------------------------------------------------------


def sdpa_dumps(prog: ConicProgram) -> str:
    """Serialize in max-form sparse SDPA text; entry order is deterministic."""
    sign = 1.0 if prog.maximize else -1.0
    lines = [
        str(prog.n_constraints),
        str(len(prog.block_dims)),
        " ".join(str(d) for d in prog.block_dims),
        " ".join(repr(float(v)) for v in prog.rhs),
    ]

    def emit(matno: int, entries: list[Entry], factor: float = 1.0):
        acc: dict[tuple[int, int, int], float] = {}
        for blk, i, j, v in entries:
            acc[(blk, i, j)] = acc.get((blk, i, j), 0.0) + factor * v
        for (blk, i, j) in sorted(acc):
            v = acc[(blk, i, j)]
            if v != 0.0:
                lines.append(f"{matno} {blk + 1} {i + 1} {j + 1} {repr(v)}")

    emit(0, prog.objective, sign)
    for k, entries in enumerate(prog.rows):
        emit(k + 1, entries)
    return "\n".join(lines) + "\n"


def write_sdpa(prog: ConicProgram, path) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(sdpa_dumps(prog))
    except OSError as exc:
        raise SdpaFormatError(f"cannot write {path}: {exc}") from exc


def _clean_tokens(line: str) -> list[str]:
    for ch in "{}(),":
        line = line.replace(ch, " ")
    return line.split()


def sdpa_loads(text: str) -> ConicProgram:
    lines = text.splitlines()
    tokens: list[tuple[str, int]] = []
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped[0] in '"*#':
            continue
        for tok in _clean_tokens(stripped):
            tokens.append((tok, lineno))
    pos = 0

    def take(count: int, what: str) -> list[tuple[str, int]]:
        nonlocal pos
        if pos + count > len(tokens):
            raise SdpaFormatError(f"unexpected end of file while reading {what}")
        out = tokens[pos : pos + count]
        pos += count
        return out

    try:
        m = int(take(1, "constraint count")[0][0])
        nblock = int(take(1, "block count")[0][0])
        dims = [int(t) for t, _ in take(nblock, "block sizes")]
        rhs = np.array([float(t) for t, _ in take(m, "rhs vector")])
    except ValueError as exc:
        raise SdpaFormatError(f"bad header token: {exc}") from exc

    objective: list[Entry] = []
    rows: list[list[Entry]] = [[] for _ in range(m)]
    while pos < len(tokens):
        chunk = take(5, "matrix entry")
        lineno = chunk[0][1]
        try:
            matno = int(chunk[0][0])
            blk = int(chunk[1][0]) - 1
            i = int(chunk[2][0]) - 1
            j = int(chunk[3][0]) - 1
            val = float(chunk[4][0])
        except ValueError as exc:
            raise SdpaFormatError(f"line {lineno}: bad entry: {exc}") from exc
        if not 0 <= blk < nblock:
            raise SdpaFormatError(f"line {lineno}: block {blk + 1} out of range")
        if i > j:
            i, j = j, i
        if not 0 <= matno <= m:
            raise SdpaFormatError(f"line {lineno}: matrix number {matno} out of range")
        entry = (blk, i, j, val)
        if matno == 0:
            objective.append(entry)
        else:
            rows[matno - 1].append(entry)
    return ConicProgram(dims, rows, rhs, objective, maximize=True)


def read_sdpa(path) -> ConicProgram:
    try:
        with open(path) as fh:
            return sdpa_loads(fh.read())
    except OSError as exc:
        raise SdpaFormatError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# solution interchange
# ---------------------------------------------------------------------------


def write_solution(sol: SdpSolution, prog: ConicProgram, path) -> None:
    """CSDP-style solution text: dual vector, then slack (1) and primal (2) entries."""
    with open(path, "w") as fh:
        fh.write(" ".join(repr(float(v)) for v in sol.y) + "\n")
        for code, mats in ((1, sol.slack), (2, sol.blocks)):
            for blk, mat in enumerate(mats):
                if mat.ndim == 1:
                    for i, v in enumerate(mat):
                        if v != 0.0:
                            fh.write(f"{code} {blk + 1} {i + 1} {i + 1} {repr(float(v))}\n")
                else:
                    d = mat.shape[0]
                    for i in range(d):
                        for j in range(i, d):
                            v = mat[i, j]
                            if v != 0.0:
                                fh.write(f"{code} {blk + 1} {i + 1} {j + 1} {repr(float(v))}\n")


def _empty_blocks(prog: ConicProgram) -> list[np.ndarray]:
    return [
        np.zeros(-d) if d < 0 else np.zeros((d, d))
        for d in prog.block_dims
    ]


def _finish_imported(prog, X, y, S) -> SdpSolution:
    cmats = [prog.block_matrix(prog.objective, blk) for blk in range(len(prog.block_dims))]
    diag = [d < 0 for d in prog.block_dims]
    pobj = sum(_frob(c, Xb, dg) for c, Xb, dg in zip(cmats, X, diag))
    dobj = float(np.dot(prog.rhs, y))
    ax = np.zeros(prog.n_constraints)
    for k, entries in enumerate(prog.rows):
        for blk in set(e[0] for e in entries):
            amat = prog.block_matrix(entries, blk)
            ax[k] += _frob(amat, X[blk], diag[blk])
    rel_p = float(np.linalg.norm(prog.rhs - ax)) / (1.0 + float(np.linalg.norm(prog.rhs)))
    sgn = 1.0 if prog.maximize else -1.0
    rd = 0.0
    cn = 1.0
    for blk in range(len(prog.block_dims)):
        aty = prog.block_matrix([], blk) * 0.0
        for k, entries in enumerate(prog.rows):
            amat = prog.block_matrix(entries, blk)
            aty = aty + (sgn * y[k]) * amat
        resid = aty - sgn * cmats[blk] - S[blk]
        rd += float(np.sum(np.asarray(resid) ** 2))
        cn += float(np.sum(cmats[blk] ** 2))
    rel_d = math.sqrt(rd) / math.sqrt(cn)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    status = STATUS_OPTIMAL if max(rel_p, rel_d, gap) <= 1e-6 else STATUS_NEAR
    return SdpSolution(
        blocks=X,
        y=y,
        slack=S,
        status=status,
        primal_objective=pobj,
        dual_objective=dobj,
        iterations=0,
        residual_primal=rel_p,
        residual_dual=rel_d,
        rel_gap=gap,
        message="imported",
    )


def _parse_csdp_solution(text: str, prog: ConicProgram) -> SdpSolution:
    lines = text.splitlines()
    body = [
        (ln, raw) for ln, raw in enumerate(lines, start=1) if raw.strip() and raw.strip()[0] not in '"*#'
    ]
    if not body:
        raise SdpaFormatError("empty solution file (missing dual vector line)")
    first_ln, first = body[0]
    try:
        y = np.array([float(t) for t in first.split()])
    except ValueError as exc:
        raise SdpaFormatError(f"line {first_ln}: bad dual vector: {exc}") from exc
    if len(y) != prog.n_constraints:
        raise SdpaFormatError(
            f"line {first_ln}: dual vector has {len(y)} entries, expected {prog.n_constraints}"
        )
    X = _empty_blocks(prog)
    S = _empty_blocks(prog)
    for ln, raw in body[1:]:
        parts = raw.split()
        if len(parts) != 5:
            raise SdpaFormatError(f"line {ln}: expected 'code blk i j value', got {raw!r}")
        try:
            code, blk, i, j = (int(p) for p in parts[:4])
            v = float(parts[4])
        except ValueError as exc:
            raise SdpaFormatError(f"line {ln}: bad entry: {exc}") from exc
        if code not in (1, 2):
            raise SdpaFormatError(f"line {ln}: matrix code must be 1 (slack) or 2 (primal)")
        if not 1 <= blk <= len(prog.block_dims):
            raise SdpaFormatError(f"line {ln}: block {blk} out of range")
        tgt = S if code == 1 else X
        mat = tgt[blk - 1]
        d = abs(prog.block_dims[blk - 1])
        if not (1 <= i <= j <= d):
            raise SdpaFormatError(f"line {ln}: entry ({i}, {j}) outside block of size {d}")
        if mat.ndim == 1:
            if i != j:
                raise SdpaFormatError(f"line {ln}: off-diagonal entry in diagonal block")
            mat[i - 1] = v
        else:
            mat[i - 1, j - 1] = v
            mat[j - 1, i - 1] = v
    return _finish_imported(prog, X, y, S)


def _extract_braced(text: str, marker: str) -> str:
    at = text.find(marker)
    if at < 0:
        raise SdpaFormatError(f"missing {marker.strip('= ')} section")
    start = text.find("{", at)
    if start < 0:
        raise SdpaFormatError(f"{marker.strip('= ')} section has no opening brace")
    depth = 0
    for pos in range(start, len(text)):
        if text[pos] == "{":
            depth += 1
        elif text[pos] == "}":
            depth -= 1
            if depth == 0:
                return text[start : pos + 1]
    raise SdpaFormatError(f"{marker.strip('= ')} section has unbalanced braces")


def _parse_nested(chunk: str):
    """Parse {..} nesting into nested lists of floats."""
    pos = 0

    def parse():
        nonlocal pos
        while pos < len(chunk) and chunk[pos] in " \t\r\n,+":
            pos += 1
        if pos >= len(chunk):
            raise SdpaFormatError("unexpected end of braced section")
        if chunk[pos] == "{":
            pos += 1
            items = []
            while True:
                while pos < len(chunk) and chunk[pos] in " \t\r\n,":
                    pos += 1
                if pos >= len(chunk):
                    raise SdpaFormatError("unbalanced braces in solution section")
                if chunk[pos] == "}":
                    pos += 1
                    return items
                items.append(parse())
        start = pos
        while pos < len(chunk) and chunk[pos] not in " \t\r\n,}{":
            pos += 1
        tok = chunk[start:pos]
        try:
            return float(tok)
        except ValueError as exc:
            raise SdpaFormatError(f"bad number {tok!r} in solution section") from exc

    return parse()


def _blocks_from_nested(nested, prog: ConicProgram, what: str) -> list[np.ndarray]:
    if not isinstance(nested, list):
        raise SdpaFormatError(f"{what}: expected a braced list of blocks")
    items = nested
    if len(prog.block_dims) == 1 and items and not isinstance(items[0], list):
        items = [items]
    if len(prog.block_dims) == 1 and items and isinstance(items[0], list) and items and all(
        isinstance(v, float) for v in items[0]
    ) and prog.block_dims[0] > 0 and len(items) == prog.block_dims[0]:
        items = [items]
    if len(items) != len(prog.block_dims):
        raise SdpaFormatError(
            f"{what}: found {len(items)} blocks, expected {len(prog.block_dims)}"
        )
    out = []
    for dim, item in zip(prog.block_dims, items):
        if dim < 0:
            flat = np.asarray(item, dtype=float).reshape(-1)
            if flat.shape != (-dim,):
                raise SdpaFormatError(f"{what}: diagonal block has wrong size")
            out.append(flat)
        else:
            arr = np.asarray(item, dtype=float)
            if arr.shape != (dim, dim):
                raise SdpaFormatError(
                    f"{what}: dense block has shape {arr.shape}, expected {(dim, dim)}"
                )
            out.append(0.5 * (arr + arr.T))
    return out


def _parse_sdpa_out(text: str, prog: ConicProgram) -> SdpSolution:
    xvec = _parse_nested(_extract_braced(text, "xVec"))
    if not isinstance(xvec, list) or not all(isinstance(v, float) for v in xvec):
        raise SdpaFormatError("xVec: expected a flat list of numbers")
    y = np.asarray(xvec, dtype=float)
    if len(y) != prog.n_constraints:
        raise SdpaFormatError(
            f"xVec has {len(y)} entries, expected {prog.n_constraints}"
        )
    S = _blocks_from_nested(_parse_nested(_extract_braced(text, "xMat")), prog, "xMat")
    X = _blocks_from_nested(_parse_nested(_extract_braced(text, "yMat")), prog, "yMat")
    return _finish_imported(prog, X, y, S)


def read_sdpa_solution(path, prog: ConicProgram) -> SdpSolution:
    """Import an external solver's solution (SDPA output sections or CSDP style)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise SdpaFormatError(f"cannot read {path}: {exc}") from exc
    if "xVec" in text or "yMat" in text:
        return _parse_sdpa_out(text, prog)
    return _parse_csdp_solution(text, prog)
