"""Sparse multivariate polynomial arithmetic with graded-lex monomial indexing.

A polynomial over n variables is stored as a dict mapping exponent tuples
(one nonnegative int per variable) to float coefficients.  Zero coefficients
are never stored, so dict equality is polynomial equality.

All moment vectors, matrix rows and SDP variable layouts in this package are
indexed by the same graded lexicographic monomial order: lower total degree
first, and within a degree the monomial with the higher power of an earlier
variable comes first.  For two variables the sequence starts

    1, x1, x2, x1^2, x1*x2, x2^2, x1^3, ...
"""

from __future__ import annotations

import math
import re
from functools import lru_cache
from typing import Iterable, Sequence

Exponent = tuple[int, ...]


def grlex_key(alpha: Exponent) -> tuple:
    """Sort key realizing the package-wide graded-lex order."""
    return (sum(alpha), tuple(-a for a in alpha))


def monomial_count(n_vars: int, degree: int) -> int:
    """Number of monomials in n_vars variables of total degree <= degree."""
    return math.comb(n_vars + degree, degree)


def _exact_degree_monomials(n_vars: int, degree: int) -> list[Exponent]:
    if n_vars == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        for rest in _exact_degree_monomials(n_vars - 1, degree - first):
            out.append((first,) + rest)
    return out


def enumerate_monomials(n_vars: int, degree: int) -> list[Exponent]:
    """All exponent tuples with total degree <= degree, in graded-lex order."""
    if n_vars < 1:
        raise ValueError(f"need at least one variable, got {n_vars}")
    if degree < 0:
        raise ValueError(f"degree must be nonnegative, got {degree}")
    out: list[Exponent] = []
    for d in range(degree + 1):
        out.extend(_exact_degree_monomials(n_vars, d))
    return out


class MonomialBasis:
    """Immutable graded-lex monomial basis with O(1) index lookup."""

    def __init__(self, n_vars: int, degree: int):
        self.n_vars = n_vars
        self.degree = degree
        self.monomials = enumerate_monomials(n_vars, degree)
        self._index = {alpha: k for k, alpha in enumerate(self.monomials)}

    def __len__(self) -> int:
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def index(self, alpha: Exponent) -> int:
        try:
            return self._index[tuple(alpha)]
        except KeyError:
            raise KeyError(f"monomial {alpha} exceeds basis degree {self.degree}") from None

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self._index


@lru_cache(maxsize=None)
def basis(n_vars: int, degree: int) -> MonomialBasis:
    """Cached basis; all modules share instances so indices never drift."""
    return MonomialBasis(n_vars, degree)


class Polynomial:
    """Sparse real polynomial.  Immutable by convention; operations return new values."""

    __slots__ = ("var_count", "terms")

    def __init__(self, var_count: int, terms: dict[Exponent, float] | None = None):
        if var_count < 1:
            raise ValueError(f"var_count must be >= 1, got {var_count}")
        self.var_count = var_count
        clean: dict[Exponent, float] = {}
        if terms:
            for alpha, c in terms.items():
                alpha = tuple(alpha)
                if len(alpha) != var_count:
                    raise ValueError(f"exponent {alpha} has wrong length for {var_count} variables")
                c = float(c)
                if c != 0.0:
                    clean[alpha] = c
        self.terms = clean

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(var_count: int) -> "Polynomial":
        return Polynomial(var_count, {})

    @staticmethod
    def constant(var_count: int, value: float) -> "Polynomial":
        return Polynomial(var_count, {(0,) * var_count: value})

    @staticmethod
    def variable(var_count: int, index: int) -> "Polynomial":
        """The polynomial x_index (0-based index)."""
        if not 0 <= index < var_count:
            raise ValueError(f"variable index {index} out of range for {var_count} variables")
        e = [0] * var_count
        e[index] = 1
        return Polynomial(var_count, {tuple(e): 1.0})

    # -- basic queries -----------------------------------------------------

    @property
    def degree(self) -> int:
        """Total degree; 0 for the zero polynomial."""
        if not self.terms:
            return 0
        return max(sum(a) for a in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, alpha: Exponent) -> float:
        return self.terms.get(tuple(alpha), 0.0)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.var_count == other.var_count
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.var_count, frozenset(self.terms.items())))

    # -- arithmetic --------------------------------------------------------

    def _check_compatible(self, other: "Polynomial"):
        if self.var_count != other.var_count:
            raise ValueError(
                f"variable count mismatch: {self.var_count} vs {other.var_count}"
            )

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.var_count, other)
        self._check_compatible(other)
        out = dict(self.terms)
        for alpha, c in other.terms.items():
            out[alpha] = out.get(alpha, 0.0) + c
        return Polynomial(self.var_count, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.var_count, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.var_count, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial(self.var_count, {a: c * other for a, c in self.terms.items()})
        self._check_compatible(other)
        out: dict[Exponent, float] = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                key = tuple(x + y for x, y in zip(a1, a2))
                out[key] = out.get(key, 0.0) + c1 * c2
        return Polynomial(self.var_count, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        result = Polynomial.constant(self.var_count, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    # -- composition and evaluation ----------------------------------------

    def compose(self, subs: Sequence["Polynomial"]) -> "Polynomial":
        """Substitute subs[k] for variable k; all subs share one variable count."""
        if len(subs) != self.var_count:
            raise ValueError(
                f"need {self.var_count} substitution polynomials, got {len(subs)}"
            )
        if not subs:
            raise ValueError("empty substitution")
        target_n = subs[0].var_count
        for s in subs:
            if s.var_count != target_n:
                raise ValueError("substitution polynomials must share a variable count")
        # Per-variable power tables keep repeated exponents cheap.
        powers: list[dict[int, Polynomial]] = [
            {0: Polynomial.constant(target_n, 1.0)} for _ in subs
        ]

        def power(j: int, e: int) -> Polynomial:
            tab = powers[j]
            if e not in tab:
                tab[e] = power(j, e - 1) * subs[j]
            return tab[e]

        result = Polynomial.zero(target_n)
        for alpha, c in self.terms.items():
            term = Polynomial.constant(target_n, c)
            for j, e in enumerate(alpha):
                if e:
                    term = term * power(j, e)
            result = result + term
        return result

    def __call__(self, point: Sequence[float]) -> float:
        if len(point) != self.var_count:
            raise ValueError(f"expected point of length {self.var_count}, got {len(point)}")
        # Power tables per variable; exact up to float rounding.
        maxdeg = [0] * self.var_count
        for alpha in self.terms:
            for j, e in enumerate(alpha):
                if e > maxdeg[j]:
                    maxdeg[j] = e
        pows = []
        for j in range(self.var_count):
            tab = [1.0] * (maxdeg[j] + 1)
            for e in range(1, maxdeg[j] + 1):
                tab[e] = tab[e - 1] * point[j]
            pows.append(tab)
        total = 0.0
        for alpha, c in self.terms.items():
            v = c
            for j, e in enumerate(alpha):
                if e:
                    v *= pows[j][e]
            total += v
        return total

    # -- variable embedding --------------------------------------------------

    def lift(self, total_vars: int, offset: int = 0) -> "Polynomial":
        """Embed into a larger variable set, mapping variable k to k + offset."""
        if offset < 0 or offset + self.var_count > total_vars:
            raise ValueError("lift target does not fit")
        pre = (0,) * offset
        post = (0,) * (total_vars - offset - self.var_count)
        return Polynomial(
            total_vars, {pre + alpha + post: c for alpha, c in self.terms.items()}
        )

    # -- text form -----------------------------------------------------------

    def to_string(self, names: Sequence[str] | None = None) -> str:
        return format_poly(self, names)

    def __repr__(self):
        return f"Polynomial({self.to_string()!r})"


def default_names(n_vars: int) -> list[str]:
    return [f"x{k + 1}" for k in range(n_vars)]


def format_poly(p: Polynomial, names: Sequence[str] | None = None) -> str:
    """Render as e.g. '1 - 0.5*x1^2*x2 + x2^3'; zero renders as '0'."""
    if names is None:
        names = default_names(p.var_count)
    if not p.terms:
        return "0"
    parts = []
    for alpha in sorted(p.terms, key=grlex_key):
        c = p.terms[alpha]
        factors = []
        for name, e in zip(names, alpha):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        mag = abs(c)
        if factors and mag == 1.0:
            body = "*".join(factors)
        elif factors:
            body = f"{mag:.12g}*" + "*".join(factors)
        else:
            body = f"{mag:.12g}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    return " ".join(parts)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[\^*+-]))"
)


class PolyParseError(ValueError):
    pass


def parse_poly(text: str, var_count: int, names: Sequence[str] | None = None) -> Polynomial:
    """Parse the grammar produced by format_poly.

    Terms are joined by + or -; a term is a '*'-separated product of numbers
    and variable factors 'name' or 'name^int'.
    """
    if names is None:
        names = default_names(var_count)
    index = {name: k for k, name in enumerate(names)}
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise PolyParseError(f"unexpected character {text[pos]!r} at position {pos}")
            break
        pos = m.end()
        for kind in ("num", "name", "op"):
            if m.group(kind) is not None:
                tokens.append((kind, m.group(kind)))
                break
    if not tokens:
        raise PolyParseError("empty polynomial text")

    terms: dict[Exponent, float] = {}
    i = 0
    n_tok = len(tokens)
    while i < n_tok:
        sign = 1.0
        while i < n_tok and tokens[i] == ("op", "+") or i < n_tok and tokens[i] == ("op", "-"):
            if tokens[i][1] == "-":
                sign = -sign
            i += 1
        if i >= n_tok:
            raise PolyParseError("dangling sign at end of input")
        coeff = sign
        expo = [0] * var_count
        expect_factor = True
        while i < n_tok:
            kind, val = tokens[i]
            if kind == "op" and val in "+-":
                break
            if kind == "op" and val == "*":
                i += 1
                expect_factor = True
                continue
            if not expect_factor:
                raise PolyParseError(f"missing operator before {val!r}")
            if kind == "num":
                coeff *= float(val)
                i += 1
            elif kind == "name":
                if val not in index:
                    raise PolyParseError(f"unknown variable {val!r}; expected one of {list(names)}")
                j = index[val]
                i += 1
                power = 1
                if i < n_tok and tokens[i] == ("op", "^"):
                    i += 1
                    if i >= n_tok or tokens[i][0] != "num":
                        raise PolyParseError("expected integer exponent after '^'")
                    raw = tokens[i][1]
                    power = int(float(raw))
                    if float(raw) != power or power < 0:
                        raise PolyParseError(f"exponent must be a nonnegative integer, got {raw}")
                    i += 1
                expo[j] += power
            else:
                raise PolyParseError(f"unexpected token {val!r}")
            expect_factor = False
        key = tuple(expo)
        terms[key] = terms.get(key, 0.0) + coeff
    return Polynomial(var_count, terms)
