"""Graded commutative quotient rings over exact rationals.

A ring is a polynomial ring over Q in named generators with even
cohomological degrees, reduced modulo a fixed list of monomial rewrite
rules (leading monomial -> strictly lex-smaller element of equal degree)
and truncated above an optional top degree.  Everything is immutable and
exact; no floats.
"""

from __future__ import annotations

from fractions import Fraction


def rat(x) -> Fraction:
    """Parse an int, Fraction, or "p/q" string into a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"not a rational: {x!r}")


def rat_str(x) -> str:
    """Serialize exactly: "p/q", or "n" when the denominator is 1."""
    x = rat(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


class GeneratorSpec:
    __slots__ = ("name", "degree")

    def __init__(self, name: str, degree: int):
        if degree < 0:
            raise ValueError("generator degree must be nonnegative")
        self.name = name
        self.degree = degree

    def __repr__(self):
        return f"GeneratorSpec({self.name!r}, {self.degree})"


class RelationSystem:
    """Rewrite rules keyed by leading monomial, plus a top-degree cutoff.

    Rules must be degree-preserving and lex-decreasing on the ring's
    generator order; both are checked at construction.
    """

    def __init__(self, rules, top_degree=None):
        self.rules = list(rules)  # [(lhs exponent tuple, {rhs mono: Fraction})]
        self.top_degree = top_degree

    def find(self, mono):
        for lhs, rhs in self.rules:
            if all(l <= m for l, m in zip(lhs, mono)):
                return lhs, rhs
        return None


class Ring:
    """A graded quotient ring.  Generator order fixes the lex order."""

    def __init__(self, generators, relations=(), top_degree=None):
        self.generators = [
            g if isinstance(g, GeneratorSpec) else GeneratorSpec(*g) for g in generators
        ]
        names = [g.name for g in self.generators]
        if len(set(names)) != len(names):
            raise ValueError("generator names must be unique")
        self.index = {g.name: i for i, g in enumerate(self.generators)}
        self.n = len(self.generators)
        rules = []
        for lhs_spec, rhs_spec in relations:
            lhs = self._monomial(lhs_spec)
            rhs_items = rhs_spec.items() if isinstance(rhs_spec, dict) else rhs_spec
            rhs = {self._monomial(m): rat(c) for m, c in rhs_items}
            ldeg = self._degree(lhs)
            for m, _ in rhs.items():
                if self._degree(m) != ldeg:
                    raise ValueError("relation is not degree-preserving")
                if m >= lhs:
                    raise ValueError("relation must rewrite to lex-smaller monomials")
            rules.append((lhs, rhs))
        self.relations = RelationSystem(rules, top_degree)
        self.top_degree = top_degree

    def _monomial(self, spec):
        if isinstance(spec, tuple):
            if len(spec) != self.n:
                raise ValueError("bad exponent tuple length")
            return spec
        exps = [0] * self.n
        for name, e in spec.items():
            exps[self.index[name]] += e
        return tuple(exps)

    def _degree(self, mono):
        return sum(e * g.degree for e, g in zip(mono, self.generators))

    def reduce_terms(self, terms):
        """Rewrite a {monomial: coefficient} map to normal form."""
        out = {}
        stack = list(terms.items())
        while stack:
            mono, coeff = stack.pop()
            if not coeff:
                continue
            if self.top_degree is not None and self._degree(mono) > self.top_degree:
                continue
            hit = self.relations.find(mono)
            if hit is None:
                acc = out.get(mono)
                acc = coeff if acc is None else acc + coeff
                if acc:
                    out[mono] = acc
                else:
                    del out[mono]
                continue
            lhs, rhs = hit
            quot = tuple(m - l for m, l in zip(mono, lhs))
            for rmono, rcoef in rhs.items():
                stack.append((tuple(q + r for q, r in zip(quot, rmono)), coeff * rcoef))
        return out

    # -- element constructors -------------------------------------------

    def zero(self):
        return GradedElement(self, {})

    def one(self):
        return self.element({(0,) * self.n: 1})

    def gen(self, name):
        exps = [0] * self.n
        exps[self.index[name]] = 1
        return self.element({tuple(exps): 1})

    def gens(self):
        return {g.name: self.gen(g.name) for g in self.generators}

    def element(self, terms):
        items = terms.items() if isinstance(terms, dict) else terms
        norm = {}
        for m, c in items:
            mono = self._monomial(m)
            norm[mono] = norm.get(mono, Fraction(0)) + rat(c)
        return GradedElement(self, self.reduce_terms(norm))

    def scalar(self, c):
        return self.element({(0,) * self.n: rat(c)})


class GradedElement:
    """Immutable reduced element of a Ring; sparse {monomial: Fraction}."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring, terms):
        self.ring = ring
        self.terms = terms

    def _check(self, other):
        if self.ring is not other.ring:
            raise ValueError("ring mismatch")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.ring.scalar(other)
        self._check(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            acc = terms.get(m)
            acc = c if acc is None else acc + c
            if acc:
                terms[m] = acc
            else:
                del terms[m]
        return GradedElement(self.ring, terms)

    __radd__ = __add__

    def __neg__(self):
        return GradedElement(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.ring.scalar(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return self.ring.zero()
            return GradedElement(self.ring, {m: c * other for m, c in self.terms.items()})
        self._check(other)
        raw = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                acc = raw.get(m)
                raw[m] = c1 * c2 if acc is None else acc + c1 * c2
        return GradedElement(self.ring, self.ring.reduce_terms(raw))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (Fraction(1) / rat(c))

    def __pow__(self, k):
        if k < 0:
            raise ValueError("negative power")
        out = self.ring.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.ring.scalar(other)
        return self.ring is other.ring and self.terms == other.terms

    def __hash__(self):
        return hash((id(self.ring), tuple(sorted(self.terms.items()))))

    def is_zero(self):
        return not self.terms

    def constant_term(self):
        return self.terms.get((0,) * self.ring.n, Fraction(0))

    def degrees(self):
        return sorted({self.ring._degree(m) for m in self.terms})

    def coefficient(self, monospec):
        return self.terms.get(self.ring._monomial(monospec), Fraction(0))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for mono in sorted(self.terms, key=lambda m: (self.ring._degree(m), m)):
            c = self.terms[mono]
            names = [
                g.name if e == 1 else f"{g.name}^{e}"
                for e, g in zip(mono, self.ring.generators)
                if e
            ]
            body = "*".join(names) if names else "1"
            parts.append(f"({rat_str(c)})*{body}")
        return " + ".join(parts)


def ring_mul(a: GradedElement, b: GradedElement) -> GradedElement:
    return a * b


def graded_part(x: GradedElement, d: int) -> GradedElement:
    """The cohomological-degree-d homogeneous component of x."""
    if d < 0:
        raise ValueError("degree must be nonnegative")
    ring = x.ring
    return GradedElement(ring, {m: c for m, c in x.terms.items() if ring._degree(m) == d})


def series_inverse(x: GradedElement) -> GradedElement:
    """Inverse of an element with constant term 1, up to the top cutoff."""
    if x.constant_term() != 1:
        raise ValueError("series_inverse requires constant term 1")
    if x.ring.top_degree is None:
        raise ValueError("series_inverse requires a ring with a top-degree cutoff")
    n = (x - 1) * Fraction(-1)
    out = x.ring.one()
    power = x.ring.one()
    while True:
        power = power * n
        if power.is_zero():
            return out
        out = out + power
