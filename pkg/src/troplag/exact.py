"""Exact Laurent polynomial arithmetic over the rationals.

Polynomials live in a *variable context*: an ordered tuple of variable
names.  The leading two slots are always lattice (torus or chart)
coordinates; any further slots are formal parameters that are treated as
ordinary Laurent variables.  Coefficients are :class:`fractions.Fraction`.

Example
-------
>>> ctx = ("w1", "w2")
>>> w1 = LaurentPolynomial.monomial((1, 0), ctx)
>>> str(w1 * w1.inverse() + 1)
'2'
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

__all__ = [
    "ContextError",
    "NotInvertibleError",
    "LaurentPolynomial",
    "LaurentMatrix",
    "MonomialMap",
    "is_regular_on_cone",
    "as_fraction",
]

Scalar = Union[int, Fraction]
Exponent = tuple


class ContextError(ValueError):
    """Operands live in different variable contexts."""


class NotInvertibleError(ArithmeticError):
    """Raised when an element or matrix is not a unit of the Laurent ring."""

    def __init__(self, message: str, determinant: "LaurentPolynomial | None" = None):
        super().__init__(message)
        self.determinant = determinant


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot use {type(value).__name__} as an exact scalar")


class LaurentPolynomial:
    """Immutable sparse Laurent polynomial with rational coefficients."""

    __slots__ = ("variables", "_terms", "_hash")

    def __init__(self, terms: Mapping[Sequence[int], Scalar] | None, variables: Sequence[str]):
        variables = tuple(variables)
        n = len(variables)
        acc: dict[tuple, Fraction] = {}
        for exp, coeff in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != n:
                raise ContextError(f"exponent {exp} does not fit context {variables}")
            c = as_fraction(coeff)
            if c:
                acc[exp] = acc.get(exp, Fraction(0)) + c
        self.variables = variables
        self._terms = {e: acc[e] for e in sorted(acc) if acc[e]}
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def _raw(cls, terms: dict, variables: tuple) -> "LaurentPolynomial":
        obj = cls.__new__(cls)
        obj.variables = variables
        obj._terms = {e: terms[e] for e in sorted(terms) if terms[e]}
        obj._hash = None
        return obj

    @classmethod
    def zero(cls, variables: Sequence[str]) -> "LaurentPolynomial":
        return cls({}, variables)

    @classmethod
    def constant(cls, value: Scalar, variables: Sequence[str]) -> "LaurentPolynomial":
        variables = tuple(variables)
        return cls({(0,) * len(variables): value}, variables)

    @classmethod
    def monomial(cls, exponent: Sequence[int], variables: Sequence[str], coeff: Scalar = 1) -> "LaurentPolynomial":
        return cls({tuple(exponent): coeff}, variables)

    @classmethod
    def variable(cls, name: str, variables: Sequence[str]) -> "LaurentPolynomial":
        variables = tuple(variables)
        exp = tuple(1 if v == name else 0 for v in variables)
        if name not in variables:
            raise ContextError(f"{name!r} not in context {variables}")
        return cls({exp: 1}, variables)

    # -- inspection ---------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[tuple, Fraction]]:
        return iter(self._terms.items())

    def exponents(self) -> list[tuple]:
        return list(self._terms)

    def coefficient(self, exponent: Sequence[int]) -> Fraction:
        return self._terms.get(tuple(exponent), Fraction(0))

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return self.is_zero() or (len(self._terms) == 1 and not any(next(iter(self._terms))))

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self._terms.get((0,) * len(self.variables), Fraction(0))

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    is_unit = is_monomial

    def leading(self) -> tuple[tuple, Fraction]:
        if len(self._terms) != 1:
            raise ValueError(f"{self} is not a single term")
        return next(iter(self._terms.items()))

    # -- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> "LaurentPolynomial":
        if isinstance(other, LaurentPolynomial):
            if other.variables != self.variables:
                raise ContextError(f"context mismatch: {self.variables} vs {other.variables}")
            return other
        if isinstance(other, (int, Fraction)):
            return LaurentPolynomial.constant(other, self.variables)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc = dict(self._terms)
        for e, c in other._terms.items():
            acc[e] = acc.get(e, 0) + c
        return LaurentPolynomial._raw(acc, self.variables)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPolynomial._raw({e: -c for e, c in self._terms.items()}, self.variables)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: dict[tuple, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, 0) + c1 * c2
        return LaurentPolynomial._raw(acc, self.variables)

    __rmul__ = __mul__

    def inverse(self) -> "LaurentPolynomial":
        if not self.is_monomial():
            raise NotInvertibleError(f"{self} is not a unit of the Laurent ring", self)
        e, c = self.leading()
        return LaurentPolynomial._raw({tuple(-x for x in e): 1 / c}, self.variables)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (1 / as_fraction(other))
        other = self._coerce(other)
        return self * other.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        result = LaurentPolynomial.constant(1, self.variables)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- comparison ---------------------------------------------------
    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return self.is_constant() and self.constant_value() == other
        if not isinstance(other, LaurentPolynomial):
            return NotImplemented
        return self.variables == other.variables and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.variables, tuple(self._terms.items())))
        return self._hash

    # -- change of variables ------------------------------------------
    def substitute(self, mapping: "MonomialMap") -> "LaurentPolynomial":
        """Apply a monomial change of variables (exponent row vector times matrix)."""
        if mapping.source != self.variables:
            raise ContextError(f"map source {mapping.source} does not match {self.variables}")
        acc: dict[tuple, Fraction] = {}
        for e, c in self._terms.items():
            new = mapping.apply_exponent(e)
            acc[new] = acc.get(new, 0) + c
        return LaurentPolynomial._raw(acc, mapping.target)

    def evaluate(self, values: Mapping[str, Scalar]) -> "LaurentPolynomial":
        """Specialise some variables to nonzero rationals; they leave the context."""
        keep = [i for i, v in enumerate(self.variables) if v not in values]
        drop = [(i, as_fraction(values[v])) for i, v in enumerate(self.variables) if v in values]
        for _, x in drop:
            if x == 0:
                raise ZeroDivisionError("Laurent variables cannot be specialised to 0")
        variables = tuple(self.variables[i] for i in keep)
        acc: dict[tuple, Fraction] = {}
        for e, c in self._terms.items():
            for i, x in drop:
                c = c * x ** e[i]
            key = tuple(e[i] for i in keep)
            acc[key] = acc.get(key, 0) + c
        return LaurentPolynomial._raw(acc, variables)

    def extend(self, variables: Sequence[str]) -> "LaurentPolynomial":
        """Embed into a larger context (new variables get exponent 0)."""
        variables = tuple(variables)
        idx = []
        for v in self.variables:
            if v not in variables:
                raise ContextError(f"{v!r} missing from {variables}")
            idx.append(variables.index(v))
        acc = {}
        for e, c in self._terms.items():
            new = [0] * len(variables)
            for i, k in enumerate(idx):
                new[k] = e[i]
            acc[tuple(new)] = c
        return LaurentPolynomial._raw(acc, variables)

    def rename(self, variables: Sequence[str]) -> "LaurentPolynomial":
        variables = tuple(variables)
        if len(variables) != len(self.variables):
            raise ContextError("rename must keep the number of variables")
        return LaurentPolynomial._raw(dict(self._terms), variables)

    # -- text ---------------------------------------------------------
    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for i, (e, c) in enumerate(self._terms.items()):
            factors = [f"{v}^{k}" for v, k in zip(self.variables, e) if k]
            mag = abs(c)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = str(mag) + "*" + "*".join(factors)
            if i == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append((" - " if c < 0 else " + ") + body)
        return "".join(parts)

    def __repr__(self) -> str:
        return f"LaurentPolynomial({str(self)!r}, variables={self.variables})"

    @classmethod
    def parse(cls, text: str, variables: Sequence[str]) -> "LaurentPolynomial":
        """Inverse of ``str``: accepts ``"-3/2*w1^-2*w2^1 + 1"``."""
        variables = tuple(variables)
        index = {v: i for i, v in enumerate(variables)}
        text = text.strip()
        if text == "0":
            return cls.zero(variables)
        terms: dict[tuple, Fraction] = {}
        # split on +/- that are not exponent signs
        tokens = re.split(r"(?<!\^)\s*([+-])\s*", text)
        sign = 1
        for tok in tokens:
            if tok == "":
                continue
            if tok in "+-":
                sign = -1 if tok == "-" else 1
                continue
            coeff = Fraction(sign)
            exp = [0] * len(variables)
            for factor in tok.split("*"):
                factor = factor.strip()
                if "^" in factor:
                    name, k = factor.split("^")
                    if name not in index:
                        raise ContextError(f"unknown variable {name!r} in {text!r}")
                    exp[index[name]] += int(k)
                elif factor in index:
                    exp[index[factor]] += 1
                else:
                    coeff *= Fraction(factor)
            key = tuple(exp)
            terms[key] = terms.get(key, Fraction(0)) + coeff
            sign = 1
        return cls(terms, variables)


def _torus_exponents(p: LaurentPolynomial, rank: int) -> Iterable[tuple]:
    return (e[:rank] for e in p.exponents())


def is_regular_on_cone(p: LaurentPolynomial, ray_generators: Sequence[Sequence[int]], rank: int = 2) -> bool:
    """True iff every monomial of ``p`` is a regular function on the chart of the cone.

    With ``w^m = exp(<m, xi>)`` the chart of a cone is where ``xi`` runs off to
    infinity inside the cone, so ``w^m`` stays bounded iff ``<m, v> <= 0`` for
    every generator ``v``.  Only the leading ``rank`` exponent slots are lattice
    coordinates; parameter slots are ignored.
    """
    for e in _torus_exponents(p, rank):
        for v in ray_generators:
            if sum(a * b for a, b in zip(e, v)) > 0:
                return False
    return True


class MonomialMap:
    """Monomial change of variables ``x_i -> y^{row_i}``.

    ``source`` and ``target`` are variable contexts of equal length; an
    exponent vector ``e`` in the source becomes ``e @ matrix`` in the target.
    """

    __slots__ = ("matrix", "source", "target")

    def __init__(self, matrix: Sequence[Sequence[int]], source: Sequence[str], target: Sequence[str]):
        m = tuple(tuple(int(x) for x in row) for row in matrix)
        n = len(m)
        if any(len(row) != n for row in m):
            raise ValueError("monomial map matrix must be square")
        if len(source) != n or len(target) != n:
            raise ContextError("matrix size does not match the contexts")
        self.matrix = m
        self.source = tuple(source)
        self.target = tuple(target)

    @classmethod
    def identity(cls, variables: Sequence[str]) -> "MonomialMap":
        n = len(variables)
        return cls([[int(i == j) for j in range(n)] for i in range(n)], variables, variables)

    @classmethod
    def block(cls, lattice_rows: Sequence[Sequence[int]], source: Sequence[str], target: Sequence[str]) -> "MonomialMap":
        """Lattice block on the leading slots, identity on parameter slots."""
        k = len(lattice_rows)
        n = len(source)
        rows = []
        for i in range(n):
            if i < k:
                rows.append(list(lattice_rows[i]) + [0] * (n - k))
            else:
                rows.append([int(i == j) for j in range(n)])
        return cls(rows, source, target)

    def apply_exponent(self, e: Sequence[int]) -> tuple:
        n = len(self.matrix)
        return tuple(sum(e[i] * self.matrix[i][j] for i in range(n)) for j in range(n))

    def determinant(self) -> int:
        return int(_det_fraction([[Fraction(x) for x in row] for row in self.matrix]))

    def compose(self, other: "MonomialMap") -> "MonomialMap":
        """``self`` followed by ``other``."""
        if self.target != other.source:
            raise ContextError("cannot compose: contexts do not chain")
        n = len(self.matrix)
        prod = [[sum(self.matrix[i][k] * other.matrix[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
        return MonomialMap(prod, self.source, other.target)

    def inverse(self) -> "MonomialMap":
        if abs(self.determinant()) != 1:
            raise NotInvertibleError("monomial map is not invertible over the integers")
        inv = _inverse_fraction([[Fraction(x) for x in row] for row in self.matrix])
        return MonomialMap([[int(x) for x in row] for row in inv], self.target, self.source)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MonomialMap)
            and self.matrix == other.matrix
            and self.source == other.source
            and self.target == other.target
        )

    def __hash__(self) -> int:
        return hash((self.matrix, self.source, self.target))

    def __repr__(self) -> str:
        return f"MonomialMap({self.source} -> {self.target}, {self.matrix})"


def _det_fraction(a: list[list[Fraction]]) -> Fraction:
    a = [row[:] for row in a]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            if f:
                for c in range(col, n):
                    a[r][c] -= f * a[col][c]
    return det


def _inverse_fraction(a: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(a)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise NotInvertibleError("singular matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


class LaurentMatrix:
    """Dense matrix of Laurent polynomials sharing one context."""

    __slots__ = ("rows", "cols", "variables", "_entries")

    def __init__(self, entries: Sequence[Sequence[LaurentPolynomial | Scalar]], variables: Sequence[str] | None = None):
        entries = [list(row) for row in entries]
        if not entries or not entries[0]:
            raise ValueError("matrix must be non-empty")
        if variables is None:
            for row in entries:
                for x in row:
                    if isinstance(x, LaurentPolynomial):
                        variables = x.variables
                        break
                if variables is not None:
                    break
        if variables is None:
            raise ContextError("cannot infer the variable context of a scalar matrix")
        variables = tuple(variables)
        cols = len(entries[0])
        grid = []
        for row in entries:
            if len(row) != cols:
                raise ValueError("ragged matrix")
            new_row = []
            for x in row:
                if isinstance(x, LaurentPolynomial):
                    if x.variables != variables:
                        raise ContextError("matrix entries from different contexts")
                    new_row.append(x)
                else:
                    new_row.append(LaurentPolynomial.constant(x, variables))
            grid.append(tuple(new_row))
        self.rows = len(grid)
        self.cols = cols
        self.variables = variables
        self._entries = tuple(grid)

    @classmethod
    def identity(cls, n: int, variables: Sequence[str]) -> "LaurentMatrix":
        return cls([[int(i == j) for j in range(n)] for i in range(n)], variables)

    @classmethod
    def zeros(cls, rows: int, cols: int, variables: Sequence[str]) -> "LaurentMatrix":
        return cls([[0] * cols for _ in range(rows)], variables)

    @classmethod
    def scalar(cls, entries: Sequence[Sequence[Scalar]], variables: Sequence[str]) -> "LaurentMatrix":
        return cls(entries, variables)

    def __getitem__(self, idx: tuple[int, int]) -> LaurentPolynomial:
        r, c = idx
        return self._entries[r][c]

    def entries(self) -> list[list[LaurentPolynomial]]:
        return [list(row) for row in self._entries]

    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def replace(self, r: int, c: int, value) -> "LaurentMatrix":
        grid = self.entries()
        grid[r][c] = value
        return LaurentMatrix(grid, self.variables)

    def _check(self, other: "LaurentMatrix"):
        if not isinstance(other, LaurentMatrix):
            raise TypeError("expected a LaurentMatrix")
        if other.variables != self.variables:
            raise ContextError(f"context mismatch: {self.variables} vs {other.variables}")

    def __add__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        self._check(other)
        if self.shape() != other.shape():
            raise ValueError("shape mismatch")
        return LaurentMatrix(
            [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self._entries, other._entries)], self.variables
        )

    def __sub__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        return self + (-other)

    def __neg__(self) -> "LaurentMatrix":
        return LaurentMatrix([[-a for a in row] for row in self._entries], self.variables)

    def __matmul__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        self._check(other)
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape()} by {other.shape()}")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = LaurentPolynomial.zero(self.variables)
                for k in range(self.cols):
                    a, b = self._entries[i][k], other._entries[k][j]
                    if a.is_zero() or b.is_zero():
                        continue
                    acc = acc + a * b
                row.append(acc)
            out.append(row)
        return LaurentMatrix(out, self.variables)

    def scale(self, s) -> "LaurentMatrix":
        return LaurentMatrix([[a * s for a in row] for row in self._entries], self.variables)

    def _minor(self, r: int, c: int) -> "LaurentMatrix":
        return LaurentMatrix(
            [[x for j, x in enumerate(row) if j != c] for i, row in enumerate(self._entries) if i != r],
            self.variables,
        )

    def determinant(self) -> LaurentPolynomial:
        if self.rows != self.cols:
            raise ValueError("determinant of a non-square matrix")
        n = self.rows
        if n == 1:
            return self._entries[0][0]
        if n == 2:
            (a, b), (c, d) = self._entries
            return a * d - b * c
        total = LaurentPolynomial.zero(self.variables)
        for j in range(n):
            a = self._entries[0][j]
            if a.is_zero():
                continue
            term = a * self._minor(0, j).determinant()
            total = total + term if j % 2 == 0 else total - term
        return total

    def adjugate(self) -> "LaurentMatrix":
        n = self.rows
        if n == 1:
            return LaurentMatrix([[1]], self.variables)
        if n == 2:
            (a, b), (c, d) = self._entries
            return LaurentMatrix([[d, -b], [-c, a]], self.variables)
        out = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                m = self._minor(i, j).determinant()
                out[j][i] = m if (i + j) % 2 == 0 else -m
        return LaurentMatrix(out, self.variables)

    def inverse(self) -> "LaurentMatrix":
        det = self.determinant()
        if not det.is_unit():
            raise NotInvertibleError(f"determinant {det} is not a unit", det)
        return self.adjugate().scale(det.inverse())

    def transpose(self) -> "LaurentMatrix":
        return LaurentMatrix([list(col) for col in zip(*self._entries)], self.variables)

    def substitute(self, mapping: MonomialMap) -> "LaurentMatrix":
        return LaurentMatrix([[a.substitute(mapping) for a in row] for row in self._entries], mapping.target)

    def evaluate(self, values: Mapping[str, Scalar]) -> "LaurentMatrix":
        grid = [[a.evaluate(values) for a in row] for row in self._entries]
        variables = tuple(v for v in self.variables if v not in values)
        return LaurentMatrix(grid, variables)

    def extend(self, variables: Sequence[str]) -> "LaurentMatrix":
        return LaurentMatrix([[a.extend(variables) for a in row] for row in self._entries], variables)

    def is_identity(self) -> bool:
        return self.rows == self.cols and all(
            self._entries[i][j] == int(i == j) for i in range(self.rows) for j in range(self.cols)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, LaurentMatrix):
            return NotImplemented
        return self.variables == other.variables and self._entries == other._entries

    def __hash__(self) -> int:
        return hash((self.variables, self._entries))

    def to_strings(self) -> list[list[str]]:
        return [[str(a) for a in row] for row in self._entries]

    @classmethod
    def from_strings(cls, rows: Sequence[Sequence[str]], variables: Sequence[str]) -> "LaurentMatrix":
        return cls([[LaurentPolynomial.parse(s, variables) for s in row] for row in rows], variables)

    def __str__(self) -> str:
        return "[" + ", ".join("[" + ", ".join(row) + "]" for row in self.to_strings()) + "]"

    def __repr__(self) -> str:
        return f"LaurentMatrix({self.to_strings()!r}, variables={self.variables})"
