"""Graded-commutative exterior algebra over an exact scalar ring.

The scalar ring is the fraction field of multivariate polynomials over Q in
declared symbols, undetermined functions of a single declared variable
(``f(r)`` with formal derivatives ``f'``, ``f''`` tied to ``d`` only through
the declared dependence), and atomic transcendental factors ``sin u``,
``cos u``, ``exp u`` of polynomial arguments.  The only trigonometric rewrite
the normalizer applies is ``sin^2 u + cos^2 u = 1`` (as a sin-power
reduction); everything else is plain polynomial normalization, so equality of
scalars inside this fragment is decidable.  Expressions that leave the
fragment (other special functions, floats, ...) make equality queries return
:data:`UNDECIDED` instead of guessing.

Forms are finite sums ``coeff * g_1 ^ ... ^ g_k`` over declared generators.
Monomials are kept strictly sorted in declaration order with exact sign
bookkeeping; odd-degree generators square to zero, even-degree generators may
repeat.  A relation set (the :class:`FormAlgebra`) fixes the generators, the
declared differentials, optional top-degree truncation and optional per-block
degree caps (forms pulled back from a factor of bounded dimension).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import sympy as sp
from sympy.core.function import AppliedUndef


class UnsupportedScalar(Exception):
    """Scalar expression falls outside the decidable fragment."""


class _Undecided:
    """Three-valued verdict for equality queries outside the fragment."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNDECIDED"

    def __bool__(self):
        raise TypeError("UNDECIDED verdict is neither True nor False; "
                        "compare with `is UNDECIDED` explicitly")


UNDECIDED = _Undecided()

_UNDECLARED = object()   # sentinel for generators with auto-created differential


# --------------------------------------------------------------------------
# scalar fragment
# --------------------------------------------------------------------------

_TRIG = (sp.sin, sp.cos)


def _check_fragment(expr):
    """Raise UnsupportedScalar if expr uses atoms outside the scalar ring."""
    for node in sp.preorder_traversal(expr):
        if isinstance(node, sp.Float):
            raise UnsupportedScalar(f"float literal {node} (ring is exact, over Q)")
        if isinstance(node, AppliedUndef):
            if len(node.args) != 1 or not node.args[0].is_Symbol:
                raise UnsupportedScalar(
                    f"undetermined function {node} must have a single symbol argument")
        elif isinstance(node, sp.Derivative):
            if not isinstance(node.expr, AppliedUndef):
                raise UnsupportedScalar(f"derivative of non-declared function: {node}")
        elif isinstance(node, sp.Function) and not isinstance(node, AppliedUndef):
            if node.func not in (sp.sin, sp.cos, sp.exp):
                raise UnsupportedScalar(f"function {node.func} outside sin/cos/exp fragment")
            arg = node.args[0]
            if not arg.free_symbols or not arg.is_polynomial(*arg.free_symbols):
                raise UnsupportedScalar(f"transcendental argument {arg} is not polynomial")
    return expr


def _reduce_sin_powers(e):
    # sin(u)**k -> (1-cos(u)**2)**(k//2) * sin(u)**(k%2); the single trig rewrite
    def bad(x):
        return (x.is_Pow and x.exp.is_Integer and x.exp >= 2
                and isinstance(x.base, sp.sin))

    while True:
        hits = [x for x in e.atoms(sp.Pow) if bad(x)]
        if not hits:
            return e
        sub = {}
        for x in hits:
            u = x.base.args[0]
            k = int(x.exp)
            sub[x] = (1 - sp.cos(u) ** 2) ** (k // 2) * sp.sin(u) ** (k % 2)
        e = sp.expand(e.subs(sub))


def _canon_num_den(expr):
    """Canonical (numerator, denominator) pair of a fragment scalar."""
    _check_fragment(expr)
    num, den = sp.fraction(sp.cancel(sp.together(expr)))
    num = _reduce_sin_powers(sp.expand(sp.powsimp(sp.expand(num), combine="exp")))
    den = _reduce_sin_powers(sp.expand(sp.powsimp(sp.expand(den), combine="exp")))
    return num, den


def _args_entangled(e):
    """True when two distinct transcendental arguments share a symbol.

    ``sin(2u) - 2 sin(u) cos(u)`` is zero by an identity the normalizer does
    not apply; a nonzero canonical form is then inconclusive.  Arguments with
    disjoint symbols (or equal arguments) are algebraically independent over
    the polynomial ring, so False verdicts stay sound there.
    """
    args = set()
    for f in e.atoms(sp.Function):
        if isinstance(f, AppliedUndef):
            continue
        args.add(sp.expand(f.args[0]))
    args = [a for a in args if a.free_symbols]
    for i in range(len(args)):
        for j in range(i + 1, len(args)):
            if args[i].free_symbols & args[j].free_symbols:
                return True
    return False


def scalar_is_zero(expr):
    """Decide expr == 0 inside the fragment (raises UnsupportedScalar outside)."""
    num, _ = _canon_num_den(sp.sympify(expr))
    if num == 0:
        return True
    if _args_entangled(num):
        raise UnsupportedScalar(
            f"nonzero canonical form with related transcendental arguments: {num}")
    return False


class ScalarExpr:
    """Immutable wrapper enforcing the exact scalar contract."""

    __slots__ = ("expr",)

    def __init__(self, expr):
        e = sp.sympify(expr)
        _check_fragment(e)
        object.__setattr__(self, "expr", e)

    def __setattr__(self, *a):
        raise AttributeError("ScalarExpr is immutable")

    # -- ring operations ---------------------------------------------------
    def _coerce(self, other):
        return other.expr if isinstance(other, ScalarExpr) else sp.sympify(other)

    def __add__(self, other):
        return ScalarExpr(self.expr + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarExpr(self.expr - self._coerce(other))

    def __rsub__(self, other):
        return ScalarExpr(self._coerce(other) - self.expr)

    def __mul__(self, other):
        return ScalarExpr(self.expr * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarExpr(-self.expr)

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are defined")
        return ScalarExpr(self.expr ** k)

    def div(self, other, *, nonzero=False):
        """Divide; the caller must assert the divisor nonzero unless it is a
        nonzero rational constant."""
        o = self._coerce(other)
        if not nonzero:
            if not (o.is_Rational and o != 0):
                raise ValueError(
                    "division requires nonzero=True (caller asserts the divisor "
                    "does not vanish) unless the divisor is a nonzero rational")
        elif scalar_is_zero(o):
            raise ZeroDivisionError("divisor is identically zero")
        return ScalarExpr(self.expr / o)

    def diff(self, x):
        return ScalarExpr(sp.diff(self.expr, x))

    def subs(self, mapping):
        return ScalarExpr(sp.sympify(self.expr).subs(mapping).doit())

    # -- queries -----------------------------------------------------------
    def is_zero(self):
        try:
            return scalar_is_zero(self.expr)
        except UnsupportedScalar:
            return UNDECIDED

    def equals(self, other):
        try:
            return scalar_is_zero(self.expr - self._coerce(other))
        except UnsupportedScalar:
            return UNDECIDED

    def canonical(self):
        num, den = _canon_num_den(self.expr)
        return num / den if den != 1 else num

    def __repr__(self):
        return f"ScalarExpr({self.expr})"

    def __str__(self):
        return str(self.canonical())


# --------------------------------------------------------------------------
# generators and the relation set
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FormGenerator:
    name: str
    degree: int
    index: int
    block: str | None = None

    def __repr__(self):
        return self.name


class FormAlgebra:
    """Ordered generators, declared differentials, and truncation rules.

    Generator order is declaration order; the canonical monomial order and all
    printed output follow it.  ``top_degree`` truncation is opt-in; block caps
    model forms pulled back from a bounded-dimension factor and always apply.
    """

    def __init__(self, top_degree=None, block_caps=None):
        self.top_degree = top_degree
        self.block_caps = dict(block_caps or {})
        self.gens: list[FormGenerator] = []
        self._diffs: dict[int, "FormExpr | None"] = {}
        self.scalar_diffs: list[tuple[sp.Symbol, "FormExpr"]] = []

    # -- declarations ------------------------------------------------------
    def generator(self, name, degree, d=_UNDECLARED, block=None):
        """Declare a generator, returning it as a one-term FormExpr.

        ``d`` may be a FormExpr (declared differential), 0/None (closed), or
        left out, in which case a fresh closed generator ``d<name>`` of degree
        ``degree+1`` is created to stand for the differential.
        """
        if any(g.name == name for g in self.gens):
            raise ValueError(f"duplicate generator name {name!r}")
        g = FormGenerator(name, degree, len(self.gens), block)
        self.gens.append(g)
        if d is _UNDECLARED:
            dg = FormGenerator("d" + name, degree + 1, len(self.gens), block)
            self.gens.append(dg)
            self._diffs[dg.index] = None
            self._diffs[g.index] = FormExpr(self, {(dg.index,): sp.Integer(1)})
        elif d is None or d == 0:
            self._diffs[g.index] = None
        else:
            if not isinstance(d, FormExpr):
                raise TypeError("declared differential must be a FormExpr")
            if d.degree() not in (degree + 1, None):
                raise ValueError(f"d({name}) must have degree {degree + 1}")
            self._diffs[g.index] = d
        return FormExpr(self, {(g.index,): sp.Integer(1)})

    def coordinate(self, name, block=None, **assumptions):
        """Declare a scalar coordinate with its differential one-form.

        Returns ``(symbol, d_symbol)`` where the second item is the FormExpr
        for the fresh closed generator ``d<name>``.
        """
        x = sp.Symbol(name, **assumptions)
        if any(s == x for s, _ in self.scalar_diffs):
            raise ValueError(f"duplicate coordinate {name}")
        dx = self.generator("d" + name, 1, d=None, block=block)
        self.scalar_diffs.append((x, dx))
        return x, dx

    def scalar_differential(self, sym, form):
        """Declare d(sym) = form for an already-built one-form (e.g. d(phi1)
        equal to an abstract closed generator)."""
        self.scalar_diffs.append((sp.sympify(sym), form))

    # -- lookups -----------------------------------------------------------
    def form(self, name):
        for g in self.gens:
            if g.name == name:
                return FormExpr(self, {(g.index,): sp.Integer(1)})
        raise KeyError(name)

    def gen_named(self, name):
        for g in self.gens:
            if g.name == name:
                return g
        raise KeyError(name)

    def zero(self):
        return FormExpr(self, {})

    def scalar_form(self, c):
        c = c.expr if isinstance(c, ScalarExpr) else sp.sympify(c)
        return FormExpr(self, {(): c})

    def d_of_gen(self, idx):
        return self._diffs.get(idx)

    # -- invariants --------------------------------------------------------
    def validate(self):
        """Check d(d(g)) == 0 for every generator under the relation set."""
        bad = []
        for g in self.gens:
            dd = FormExpr(self, {(g.index,): sp.Integer(1)}).d().d()
            z = dd.is_zero()
            if z is not True:
                bad.append((g.name, z))
        if bad:
            raise ValueError(f"d∘d does not vanish for: {bad}")
        return True

    def _monomial_ok(self, key):
        if self.top_degree is not None:
            if sum(self.gens[i].degree for i in key) > self.top_degree:
                return False
        if self.block_caps:
            per = {}
            for i in key:
                b = self.gens[i].block
                if b is not None:
                    per[b] = per.get(b, 0) + self.gens[i].degree
            for b, total in per.items():
                cap = self.block_caps.get(b)
                if cap is not None and total > cap:
                    return False
        return True

    def monomial_str(self, key):
        if not key:
            return "1"
        return "∧".join(self.gens[i].name for i in key)


# --------------------------------------------------------------------------
# form expressions
# --------------------------------------------------------------------------

class FormExpr:
    """Immutable sum of scalar-coefficient wedge monomials."""

    __slots__ = ("alg", "_terms")

    def __init__(self, alg, terms):
        clean = {}
        for key, c in terms.items():
            c = sp.expand(c)
            if c == 0 or not alg._monomial_ok(key):
                continue
            clean[key] = c
        object.__setattr__(self, "alg", alg)
        object.__setattr__(self, "_terms", clean)

    def __setattr__(self, *a):
        raise AttributeError("FormExpr is immutable")

    # -- structure ---------------------------------------------------------
    def terms(self):
        """Sorted (monomial-key, coefficient) pairs."""
        return sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))

    def degree(self):
        """Common degree of all monomials, or None if mixed/zero."""
        degs = {sum(self.alg.gens[i].degree for i in k) for k in self._terms}
        return degs.pop() if len(degs) == 1 else None

    def coefficient(self, key):
        if isinstance(key, FormExpr):
            (key, c), = key._terms.items()
            if c != 1:
                raise ValueError("coefficient() expects a bare monomial")
        return self._terms.get(tuple(key), sp.Integer(0))

    # -- linear operations -------------------------------------------------
    def _check_same(self, other):
        if not isinstance(other, FormExpr):
            raise TypeError("expected FormExpr")
        if other.alg is not self.alg:
            raise ValueError("forms live in different algebras")

    def __add__(self, other):
        self._check_same(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0) + c
        return FormExpr(self.alg, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return FormExpr(self.alg, {k: -c for k, c in self._terms.items()})

    def __mul__(self, c):
        c = c.expr if isinstance(c, ScalarExpr) else sp.sympify(c)
        return FormExpr(self.alg, {k: c * v for k, v in self._terms.items()})

    __rmul__ = __mul__

    def map_coeffs(self, fn):
        return FormExpr(self.alg, {k: fn(c) for k, c in self._terms.items()})

    def subs(self, mapping):
        """Substitute into every coefficient (stratum restriction, profile
        specialization, parameter pinning)."""
        return self.map_coeffs(lambda c: sp.sympify(c).subs(mapping).doit())

    # -- graded multiplication ---------------------------------------------
    def _merge_keys(self, k1, k2):
        """Merge two sorted monomials; return (key, sign) or (None, 0)."""
        degs = self.alg.gens
        out = []
        sign = 1
        i = j = 0
        # degree sum of the tail of k1 from position i onward
        tail = [0] * (len(k1) + 1)
        for t in range(len(k1) - 1, -1, -1):
            tail[t] = tail[t + 1] + degs[k1[t]].degree
        while i < len(k1) and j < len(k2):
            if k1[i] <= k2[j]:
                out.append(k1[i])
                i += 1
            else:
                g = k2[j]
                # g jumps over the remaining tail of k1
                if degs[g].degree % 2 and tail[i] % 2:
                    sign = -sign
                out.append(g)
                j += 1
        out.extend(k1[i:])
        out.extend(k2[j:])
        # odd generators may not repeat
        for a, b in itertools.pairwise(out):
            if a == b and degs[a].degree % 2:
                return None, 0
        return tuple(out), sign

    def wedge(self, other):
        self._check_same(other)
        out = {}
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                key, s = self._merge_keys(k1, k2)
                if s and self.alg._monomial_ok(key):
                    out[key] = out.get(key, 0) + s * c1 * c2
        return FormExpr(self.alg, out)

    __xor__ = wedge

    def wedge_power(self, n):
        if n < 0:
            raise ValueError("negative wedge power")
        r = self.alg.scalar_form(1)
        for _ in range(n):
            r = r.wedge(self)
        return r

    # -- exterior derivative -----------------------------------------------
    def d(self):
        alg = self.alg
        out = alg.zero()
        for key, c in self._terms.items():
            mono = FormExpr(alg, {key: sp.Integer(1)})
            # d(coeff) ∧ mono
            dc = alg.zero()
            for sym, df in alg.scalar_diffs:
                part = sp.diff(c, sym)
                if part != 0:
                    dc = dc + df * part
            out = out + dc.wedge(mono)
            # Leibniz over the generators of the monomial
            prefix_deg = 0
            for pos, gi in enumerate(key):
                dgi = alg.d_of_gen(gi)
                if dgi is not None:
                    left = FormExpr(alg, {key[:pos]: sp.Integer(1)})
                    right = FormExpr(alg, {key[pos + 1:]: sp.Integer(1)})
                    sign = -1 if prefix_deg % 2 else 1
                    out = out + (left.wedge(dgi).wedge(right)) * (sign * c)
                prefix_deg += alg.gens[gi].degree
        return out

    # -- contraction --------------------------------------------------------
    def contract(self, pairing):
        """Interior product with a vector described by a pairing table.

        ``pairing`` maps generator names to the value of the generator on the
        vector: a scalar for one-form generators, a FormExpr of degree k-1 for
        a degree-k generator.  Generators not listed pair to zero.
        """
        alg = self.alg
        table = {}
        for name, val in pairing.items():
            g = alg.gen_named(name)
            if isinstance(val, FormExpr):
                table[g.index] = val
            else:
                v = val.expr if isinstance(val, ScalarExpr) else sp.sympify(val)
                if g.degree == 1:
                    table[g.index] = alg.scalar_form(v)
                else:
                    raise TypeError(
                        f"pairing for degree-{g.degree} generator {name} "
                        "must be a FormExpr")
        out = alg.zero()
        for key, c in self._terms.items():
            prefix_deg = 0
            for pos, gi in enumerate(key):
                val = table.get(gi)
                if val is not None:
                    left = FormExpr(alg, {key[:pos]: sp.Integer(1)})
                    right = FormExpr(alg, {key[pos + 1:]: sp.Integer(1)})
                    sign = -1 if prefix_deg % 2 else 1
                    out = out + left.wedge(val).wedge(right) * (sign * c)
                prefix_deg += alg.gens[gi].degree
        return out

    # -- parameter expansion -------------------------------------------------
    def expand_in_param(self, p):
        """Group terms by powers of the parameter ``p`` (must enter every
        coefficient polynomially); returns ParamExpansion, lowest power first.
        """
        p = sp.sympify(p)
        buckets: dict[int, dict] = {}
        for key, c in self._terms.items():
            e = sp.expand(c)
            try:
                poly = sp.Poly(e, p)
            except sp.PolynomialError as exc:
                raise ValueError(
                    f"coefficient of {self.alg.monomial_str(key)} is not "
                    f"polynomial in {p}: {e}") from exc
            for (k,), coeff in zip(poly.monoms(), poly.coeffs()):
                bucket = buckets.setdefault(k, {})
                bucket[key] = bucket.get(key, 0) + coeff
        return ParamExpansion(p, {k: FormExpr(self.alg, t) for k, t in sorted(buckets.items())})

    # -- equality -----------------------------------------------------------
    def is_zero(self):
        verdict = True
        for c in self._terms.values():
            try:
                if not scalar_is_zero(c):
                    return False
            except UnsupportedScalar:
                verdict = UNDECIDED
        return verdict

    def equals(self, other):
        """Sound canonical equality: True/False inside the scalar fragment,
        UNDECIDED if any coefficient leaves it."""
        self._check_same(other)
        return (self - other).is_zero()

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for key, c in self.terms():
            cs = str(sp.expand(c))
            mono = self.alg.monomial_str(key)
            if mono == "1":
                parts.append(f"({cs})")
            else:
                parts.append(f"({cs})·{mono}")
        return " + ".join(parts)

    __repr__ = __str__


@dataclass(frozen=True)
class ParamExpansion:
    """Finite expansion of a form in powers of one parameter."""

    param: sp.Symbol
    by_power: dict = field(default_factory=dict)   # power -> FormExpr

    def powers(self):
        return sorted(self.by_power)

    def coefficient(self, k):
        for p, f in self.by_power.items():
            if p == k:
                return f
        raise KeyError(k)

    def lowest(self):
        """(power, coefficient form) of the lowest nonvanishing power."""
        for p in self.powers():
            f = self.by_power[p]
            if f.is_zero() is not True:
                return p, f
        raise ValueError("expansion is identically zero")


def wedge_all(*forms):
    it = iter(forms)
    out = next(it)
    for f in it:
        out = out.wedge(f)
    return out
