"""Normal-form Hamiltonian in action variables.

The Hamiltonian near an index-1 saddle is stored as a sparse real polynomial
``H(I, J_1, ..., J_f)`` keyed by exponent tuples ``(n_I, n_J1, ..., n_Jf)``.
Derivatives are exact: each term is differentiated analytically.

Raw normal-form output is a polynomial in complex coordinates ``(x_k, xi_k)``
(a :class:`ComplexMonomialTable`).  With ``I = x_1 xi_1`` and
``J_k = i x_k xi_k`` only the resonant monomials ``alpha == beta`` survive and

    h * (x_1 xi_1)**n_1 * prod_k (x_k xi_k)**n_k  ->  h * (-i)**N * I**n_1 * prod_k J_k**n_k

with ``N = sum_{k>=2} n_k``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import ComplexResidue, DimensionMismatch, MalformedTable, NonResonantMonomial

DEFAULT_CONVERSION_TOL = 1e-10

# Synthetic (not measured) quadratic bath couplings c_jk (H contains 1/2 c_jj J_j^2).  Needed so
# that det(dOmega/dJ) != 0; the quoted Eckart-Morse coefficients have none.
SYNTHETIC_BATH_CURVATURE = (0.05, 0.05)


@dataclass(frozen=True)
class ComplexMonomialTable:
    """Coefficients ``h_{alpha beta}`` over ``d = f + 1`` degrees of freedom.

    Index 0 of every multi-index is the saddle mode, the rest are bath modes.
    """

    dof_count: int
    records: Mapping[tuple[tuple[int, ...], tuple[int, ...]], complex]

    def __post_init__(self):
        if self.dof_count < 2:
            raise MalformedTable("need at least one saddle and one bath mode")
        for alpha, beta in self.records:
            if len(alpha) != self.dof_count or len(beta) != self.dof_count:
                raise MalformedTable(f"multi-index length != {self.dof_count}: {alpha} {beta}")
            if any(int(n) != n or n < 0 for n in alpha + beta):
                raise MalformedTable(f"exponents must be non-negative integers: {alpha} {beta}")
        object.__setattr__(self, "records", MappingProxyType(dict(self.records)))

    @classmethod
    def from_records(cls, dof_count, records):
        """Build from an iterable of ``(alpha, beta, h)``; duplicate keys are an error."""
        table = {}
        for alpha, beta, h in records:
            key = (tuple(int(a) for a in alpha), tuple(int(b) for b in beta))
            if key in table:
                raise MalformedTable(f"duplicate monomial {key}")
            table[key] = complex(h)
        return cls(dof_count, table)


@dataclass(frozen=True)
class ActionPoint:
    """Reaction action ``I`` and bath actions ``J``."""

    I: float
    J: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        J = np.array(self.J, dtype=float).reshape(-1)
        J.setflags(write=False)
        object.__setattr__(self, "I", float(self.I))
        object.__setattr__(self, "J", J)

    @classmethod
    def on_nhim(cls, J):
        return cls(0.0, J)

    @property
    def is_physical(self):
        return bool(np.all(self.J >= 0.0))

    def as_array(self):
        return np.concatenate(([self.I], self.J))


class ActionPolynomial:
    """Sparse real polynomial in ``(I, J_1, ..., J_f)``.

    Parameters
    ----------
    terms : mapping
        Exponent tuple of length ``f + 1`` -> real coefficient.  Zero
        coefficients are dropped.
    f : int, optional
        Number of bath modes.  Inferred from the keys when omitted.
    """

    def __init__(self, terms: Mapping[tuple[int, ...], float], f: int | None = None):
        clean = {}
        for key, c in terms.items():
            key = tuple(int(n) for n in key)
            if any(n < 0 for n in key):
                raise ValueError(f"negative exponent in {key}")
            c = float(c)
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient for {key}")
            if c != 0.0:
                clean[key] = clean.get(key, 0.0) + c
        if f is None:
            lengths = {len(k) for k in clean}
            if len(lengths) != 1:
                raise DimensionMismatch("cannot infer f from exponent tuples")
            f = lengths.pop() - 1
        if f < 1:
            raise ValueError("f must be a positive integer")
        for key in clean:
            if len(key) != f + 1:
                raise DimensionMismatch(f"exponent tuple {key} does not have length {f + 1}")
        self._f = int(f)
        keys = sorted(clean)
        self._terms = MappingProxyType({k: clean[k] for k in keys})
        self._exps = np.array(keys, dtype=int).reshape(len(keys), f + 1)
        self._coef = np.array([clean[k] for k in keys], dtype=float)

    @property
    def f(self):
        return self._f

    @property
    def terms(self):
        return self._terms

    def coefficient(self, exps):
        return self._terms.get(tuple(exps), 0.0)

    @property
    def saddle_energy(self):
        return self.coefficient((0,) * (self._f + 1))

    @property
    def linear_exponent(self):
        return self.coefficient((1,) + (0,) * self._f)

    @property
    def linear_frequencies(self):
        out = np.zeros(self._f)
        for k in range(self._f):
            e = [0] * (self._f + 1)
            e[k + 1] = 1
            out[k] = self.coefficient(e)
        return out

    @property
    def degree(self):
        return int(self._exps.sum(axis=1).max()) if len(self._coef) else 0

    def __eq__(self, other):
        return isinstance(other, ActionPolynomial) and self._f == other._f and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash((self._f, tuple(self._terms.items())))

    def __repr__(self):
        return f"ActionPolynomial(f={self._f}, terms={dict(self._terms)!r})"

    def add_terms(self, extra: Mapping[tuple[int, ...], float]):
        """Return a new polynomial with ``extra`` added term by term."""
        merged = dict(self._terms)
        for k, c in extra.items():
            k = tuple(int(n) for n in k)
            merged[k] = merged.get(k, 0.0) + float(c)
        return ActionPolynomial(merged, f=self._f)

    def _coords(self, pt):
        if not isinstance(pt, ActionPoint):
            raise TypeError("expected an ActionPoint")
        if pt.J.shape != (self._f,):
            raise DimensionMismatch(f"point has {pt.J.size} bath actions, polynomial has f={self._f}")
        return pt.as_array()

    def derivative(self, pt: ActionPoint, orders) -> float:
        """Mixed partial derivative of order ``orders[i]`` in variable ``i`` (0 = I)."""
        x = self._coords(pt)
        d = np.asarray(orders, dtype=int)
        if d.shape != (self._f + 1,) or np.any(d < 0):
            raise DimensionMismatch("orders must have length f + 1 and be non-negative")
        if not len(self._coef):
            return 0.0
        n = self._exps
        alive = np.all(n >= d, axis=1)
        if not np.any(alive):
            return 0.0
        n = n[alive]
        rem = n - d
        factor = np.ones(len(n))
        for i in range(self._f + 1):
            for j in range(d[i]):
                factor *= n[:, i] - j
        # 0**0 == 1 in numpy, which is what an absent variable needs
        powers = np.prod(x[None, :] ** rem, axis=1)
        return math.fsum(self._coef[alive] * factor * powers)

    def _build_jet(self):
        # One flat table over (target derivative, term) pairs: value, the
        # f+1 first derivatives and the upper-triangle second derivatives.
        m = self._f + 1
        targets = [np.zeros(m, dtype=int)]
        for i in range(m):
            d = np.zeros(m, dtype=int)
            d[i] = 1
            targets.append(d)
        upper = [(i, j) for i in range(m) for j in range(i, m)]
        for i, j in upper:
            d = np.zeros(m, dtype=int)
            d[i] += 1
            d[j] += 1
            targets.append(d)
        coef, rem, idx = [], [], []
        for k, d in enumerate(targets):
            for n, c in zip(self._exps, self._coef):
                if np.any(n < d):
                    continue
                factor = 1.0
                for v in range(m):
                    for j in range(d[v]):
                        factor *= n[v] - j
                coef.append(c * factor)
                rem.append(n - d)
                idx.append(k)
        rem = np.array(rem, dtype=int).reshape(-1, m)
        self._jet = (
            np.array(coef, dtype=float),
            rem,
            np.array(idx, dtype=int),
            len(targets),
            upper,
            int(rem.max()) if rem.size else 0,
        )

    def jet(self, pt):
        """Value, gradient and Hessian in ``(I, J)`` from one vectorised pass."""
        x = self._coords(pt)
        m = self._f + 1
        if not len(self._coef):
            return 0.0, np.zeros(m), np.zeros((m, m))
        if not hasattr(self, "_jet"):
            self._build_jet()
        coef, rem, idx, ntargets, upper, pmax = self._jet
        table = x[:, None] ** np.arange(pmax + 1)[None, :]
        vals = coef * np.prod(table[np.arange(m)[None, :], rem], axis=1)
        out = np.bincount(idx, weights=vals, minlength=ntargets)
        H = np.empty((m, m))
        for k, (i, j) in enumerate(upper):
            H[i, j] = H[j, i] = out[1 + m + k]
        return float(out[0]), out[1 : 1 + m].copy(), H

    def gradient(self, pt):
        """``(dH/dI, dH/dJ_1, ..., dH/dJ_f)``."""
        return self.jet(pt)[1]

    def hessian(self, pt):
        """Full ``(f+1) x (f+1)`` Hessian in ``(I, J)``; symmetric by construction."""
        return self.jet(pt)[2]


def _check_point(poly, pt):
    if not isinstance(pt, ActionPoint):
        raise TypeError("expected an ActionPoint")
    if pt.J.shape != (poly.f,):
        raise DimensionMismatch(f"point has {pt.J.size} bath actions, polynomial has f={poly.f}")


def eval_hamiltonian(poly: ActionPolynomial, pt: ActionPoint) -> float:
    _check_point(poly, pt)
    return poly.derivative(pt, [0] * (poly.f + 1))


def lyapunov_exponent(poly: ActionPolynomial, pt: ActionPoint) -> float:
    """Local instability rate ``Lambda = dH/dI``."""
    _check_point(poly, pt)
    return poly.derivative(pt, [1] + [0] * poly.f)


def bath_frequencies(poly: ActionPolynomial, pt: ActionPoint) -> np.ndarray:
    """Nonlinear bath frequencies ``Omega_k = dH/dJ_k``."""
    _check_point(poly, pt)
    return poly.gradient(pt)[1:]


def frequency_jacobian(poly: ActionPolynomial, pt: ActionPoint) -> np.ndarray:
    """``dOmega/dJ``, the f x f bath block of the Hessian."""
    _check_point(poly, pt)
    return poly.hessian(pt)[1:, 1:]


def convert_to_action_polynomial(table: ComplexMonomialTable, tol: float = DEFAULT_CONVERSION_TOL) -> ActionPolynomial:
    """Map complex normal-form coefficients onto a polynomial in actions.

    Raises
    ------
    NonResonantMonomial
        A record with ``alpha != beta`` has ``|h| > tol``.
    ComplexResidue
        A converted coefficient has imaginary part larger than ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    terms = {}
    for (alpha, beta), h in table.records.items():
        if alpha != beta:
            if abs(h) > tol:
                raise NonResonantMonomial(f"alpha={alpha} beta={beta} h={h}")
            continue
        N = sum(alpha[1:])
        c = h * (-1j) ** N
        if abs(c.imag) > tol:
            raise ComplexResidue(f"alpha={alpha}: converted coefficient {c} is not real")
        terms[alpha] = terms.get(alpha, 0.0) + c.real
    return ActionPolynomial(terms, f=table.dof_count - 1)


def action_polynomial_to_table(poly: ActionPolynomial) -> ComplexMonomialTable:
    """Inverse of :func:`convert_to_action_polynomial` (resonant terms only)."""
    records = {}
    for exps, c in poly.terms.items():
        N = sum(exps[1:])
        records[(exps, exps)] = c * (1j) ** N
    return ComplexMonomialTable(poly.f + 1, records)


# ---------------------------------------------------------------- file formats

def _data_lines(text):
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_coefficient_table(text: str) -> ComplexMonomialTable:
    """Parse ``alpha_1 .. alpha_d beta_1 .. beta_d re im`` records."""
    records = []
    d = None
    for lineno, cols in _data_lines(text):
        if len(cols) < 4 or len(cols) % 2:
            raise MalformedTable(f"line {lineno}: expected 2d + 2 columns, got {len(cols)}")
        dd = (len(cols) - 2) // 2
        if d is None:
            d = dd
        elif dd != d:
            raise MalformedTable(f"line {lineno}: {dd} modes, earlier lines have {d}")
        try:
            ints = [int(c) for c in cols[:-2]]
            re_, im_ = float(cols[-2]), float(cols[-1])
        except ValueError as exc:
            raise MalformedTable(f"line {lineno}: {exc}") from None
        records.append((ints[:d], ints[d:], complex(re_, im_)))
    if d is None:
        raise MalformedTable("no records found")
    return ComplexMonomialTable.from_records(d, records)


def read_coefficient_table(path) -> ComplexMonomialTable:
    with open(path, encoding="utf-8") as fh:
        return parse_coefficient_table(fh.read())


def format_coefficient_table(table: ComplexMonomialTable, header: str = "") -> str:
    d = table.dof_count
    out = [f"# {line}".rstrip() for line in header.splitlines()]
    out.append("# " + " ".join([f"a{k + 1}" for k in range(d)] + [f"b{k + 1}" for k in range(d)] + ["re", "im"]))
    for (alpha, beta), h in sorted(table.records.items()):
        nums = " ".join(str(n) for n in alpha + beta)
        out.append(f"{nums} {h.real:.17g} {h.imag:.17g}")
    return "\n".join(out) + "\n"


def parse_action_polynomial(text: str) -> ActionPolynomial:
    """Parse ``n_I n_J1 .. n_Jf coeff`` records."""
    terms = {}
    width = None
    for lineno, cols in _data_lines(text):
        if len(cols) < 3:
            raise MalformedTable(f"line {lineno}: expected at least 3 columns")
        if width is None:
            width = len(cols)
        elif len(cols) != width:
            raise MalformedTable(f"line {lineno}: column count changed from {width} to {len(cols)}")
        try:
            key = tuple(int(c) for c in cols[:-1])
            c = float(cols[-1])
        except ValueError as exc:
            raise MalformedTable(f"line {lineno}: {exc}") from None
        if key in terms:
            raise MalformedTable(f"line {lineno}: duplicate exponent tuple {key}")
        terms[key] = c
    if width is None:
        raise MalformedTable("no records found")
    return ActionPolynomial(terms, f=width - 2)


def read_action_polynomial(path) -> ActionPolynomial:
    with open(path, encoding="utf-8") as fh:
        return parse_action_polynomial(fh.read())


def format_action_polynomial(poly: ActionPolynomial, header: str = "") -> str:
    out = [f"# {line}".rstrip() for line in header.splitlines()]
    out.append("# " + " ".join(["n_I"] + [f"n_J{k + 1}" for k in range(poly.f)] + ["coeff"]))
    for exps, c in poly.terms.items():
        out.append(" ".join(str(n) for n in exps) + f" {c:.17g}")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------------- presets

def eckart_morse_table() -> ComplexMonomialTable:
    """The quoted subset of the 3-DoF Eckart-Morse normal form (m=1, eps=0.3)."""
    text = resources.files("saddle_otoc").joinpath("data/eckart_morse_quoted.nf").read_text(encoding="utf-8")
    return parse_coefficient_table(text)


def add_bath_curvature(poly: ActionPolynomial, curvature: Iterable[float]) -> ActionPolynomial:
    """Add ``1/2 c_k J_k**2`` for each bath mode (``dOmega/dJ += diag(c)``)."""
    c = [float(v) for v in curvature]
    if len(c) != poly.f:
        raise DimensionMismatch(f"need {poly.f} curvature values, got {len(c)}")
    extra = {}
    for k, ck in enumerate(c):
        e = [0] * (poly.f + 1)
        e[k + 1] = 2
        extra[tuple(e)] = 0.5 * ck
    return poly.add_terms(extra)


def eckart_morse_polynomial(curvature: Iterable[float] | None = SYNTHETIC_BATH_CURVATURE) -> ActionPolynomial:
    """Eckart-Morse action polynomial plus diagonal bath curvature.

    ``curvature`` gives ``c_kk`` in ``1/2 c_kk J_k**2``.  Pass ``None`` for the
    quoted terms only (then ``dOmega/dJ`` vanishes identically).
    """
    poly = convert_to_action_polynomial(eckart_morse_table())
    if curvature is None:
        return poly
    return add_bath_curvature(poly, curvature)
