"""Truncated moment sequences, box Lebesgue moments, moment/localizing matrices.

A moment sequence stores the values l(x^alpha) of a linear functional on
monomials up to a truncation degree, laid out in the shared graded-lex order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .polyalg import Exponent, MonomialBasis, Polynomial, basis, monomial_count


@dataclass
class MomentSequence:
    """Moments up to max_degree of some (signed) measure on R^var_count."""

    var_count: int
    max_degree: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expect = monomial_count(self.var_count, self.max_degree)
        if self.values.shape != (expect,):
            raise ValueError(
                f"moment vector has length {self.values.shape}, expected ({expect},)"
            )

    @property
    def basis(self) -> MonomialBasis:
        return basis(self.var_count, self.max_degree)

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def value(self, alpha: Exponent) -> float:
        return float(self.values[self.basis.index(alpha)])

    @staticmethod
    def zeros(var_count: int, max_degree: int) -> "MomentSequence":
        return MomentSequence(
            var_count, max_degree, np.zeros(monomial_count(var_count, max_degree))
        )

    def integrate(self, p: Polynomial) -> float:
        """l_y(p) = sum of coefficients times stored moments."""
        if p.var_count != self.var_count:
            raise ValueError("variable count mismatch")
        total = 0.0
        for alpha, c in p.terms.items():
            total += c * self.value(alpha)
        return total

    def marginal_front(self, n_keep: int) -> "MomentSequence":
        """Moments of the projection onto the first n_keep coordinates."""
        if not 1 <= n_keep <= self.var_count:
            raise ValueError("bad marginal size")
        sub = basis(n_keep, self.max_degree)
        tail = (0,) * (self.var_count - n_keep)
        vals = np.array([self.value(alpha + tail) for alpha in sub])
        return MomentSequence(n_keep, self.max_degree, vals)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"a{k + 1}" for k in range(self.var_count)] + ["value"])
            for alpha, v in zip(self.basis, self.values):
                w.writerow(list(alpha) + [repr(float(v))])

    @staticmethod
    def from_csv(path) -> "MomentSequence":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or not rows[0] or rows[0][-1] != "value":
            raise ValueError(f"{path}: expected header 'a1,...,an,value'")
        n = len(rows[0]) - 1
        entries = {}
        for row in rows[1:]:
            if not row:
                continue
            alpha = tuple(int(t) for t in row[:n])
            entries[alpha] = float(row[n])
        degree = max(sum(a) for a in entries)
        seq = MomentSequence.zeros(n, degree)
        for alpha, v in entries.items():
            seq.values[seq.basis.index(alpha)] = v
        return seq


def lebesgue_box_moments(box: Sequence[Sequence[float]], max_degree: int) -> MomentSequence:
    """Exact monomial integrals of the Lebesgue measure on a product box.

    y_alpha = prod_k (hi_k^(a_k+1) - lo_k^(a_k+1)) / (a_k + 1).
    """
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise ValueError("box must be a sequence of [lo, hi] pairs")
    n = box.shape[0]
    if np.any(box[:, 0] >= box[:, 1]):
        raise ValueError("degenerate box: need lo < hi on every axis")
    b = basis(n, max_degree)
    vals = np.empty(len(b))
    for idx, alpha in enumerate(b):
        v = 1.0
        for (lo, hi), a in zip(box, alpha):
            v *= (hi ** (a + 1) - lo ** (a + 1)) / (a + 1)
        vals[idx] = v
    return MomentSequence(n, max_degree, vals)


def dirac_moments(point: Sequence[float], max_degree: int, mass: float = 1.0) -> MomentSequence:
    """Moments of mass * delta_point; moment matrices of these are rank one."""
    point = np.asarray(point, dtype=float)
    b = basis(len(point), max_degree)
    vals = np.empty(len(b))
    for idx, alpha in enumerate(b):
        v = mass
        for x, a in zip(point, alpha):
            if a:
                v *= x ** a
        vals[idx] = v
    return MomentSequence(len(point), max_degree, vals)


def moment_matrix(y: MomentSequence, r: int) -> np.ndarray:
    """Symmetric matrix with entry (alpha, beta) = y_{alpha+beta}, |alpha|,|beta| <= r."""
    if y.max_degree < 2 * r:
        raise ValueError(f"need moments up to degree {2 * r}, have {y.max_degree}")
    rows = basis(y.var_count, r)
    m = len(rows)
    out = np.empty((m, m))
    for i, a in enumerate(rows):
        for j in range(i, m):
            bnd = rows.monomials[j]
            v = y.value(tuple(x + z for x, z in zip(a, bnd)))
            out[i, j] = v
            out[j, i] = v
    return out


def localizing_matrix(y: MomentSequence, h: Polynomial, r_h: int) -> np.ndarray:
    """Entry (alpha, beta) = sum_gamma h_gamma * y_{gamma+alpha+beta}, |alpha|,|beta| <= r_h."""
    if h.var_count != y.var_count:
        raise ValueError("multiplier variable count mismatch")
    need = 2 * r_h + h.degree
    if y.max_degree < need:
        raise ValueError(f"need moments up to degree {need}, have {y.max_degree}")
    rows = basis(y.var_count, r_h)
    m = len(rows)
    out = np.zeros((m, m))
    for i, a in enumerate(rows):
        for j in range(i, m):
            bnd = rows.monomials[j]
            s = 0.0
            for gamma, c in h.terms.items():
                s += c * y.value(tuple(x + z + g for x, z, g in zip(a, bnd, gamma)))
            out[i, j] = s
            out[j, i] = s
    return out


def pushforward_row(
    phi: Sequence[Polynomial], beta: Exponent, z_degree: int
) -> np.ndarray:
    """Coefficient row so that l_z(phi^beta) = row . z.values.

    phi lists the map components (polynomials over the source variables);
    beta exponentiates them componentwise.  Raises if deg(phi^beta) exceeds
    the target truncation degree.
    """
    if len(beta) != len(phi):
        raise ValueError("beta length must match number of map components")
    if not phi:
        raise ValueError("empty map")
    n_src = phi[0].var_count
    prod = Polynomial.constant(n_src, 1.0)
    for comp, e in zip(phi, beta):
        if e:
            prod = prod * comp ** e
    if prod.degree > z_degree:
        raise ValueError(
            f"phi^beta has degree {prod.degree}, exceeding truncation {z_degree}"
        )
    b = basis(n_src, z_degree)
    row = np.zeros(len(b))
    for alpha, c in prod.terms.items():
        row[b.index(alpha)] = c
    return row
