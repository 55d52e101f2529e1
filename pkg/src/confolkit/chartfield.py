"""Numeric differential forms on coordinate boxes.

Fields carry coefficient callables indexed by strictly sorted coordinate
subsets.  Everything here is pointwise plumbing for the verifiers: exact
coefficient evaluation, central-difference exterior derivative, pullbacks via
finite-difference Jacobians, short-time RK4 flows and seeded sample grids.
Symbolic sources (sympy expressions / ScalarExpr) are compiled with lambdify,
so the finite-difference routes can be cross-checked against the symbolic d.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from confolkit.grassmann import ScalarExpr

DEFAULT_TAU_RANK = 1e-7
DEFAULT_TAU_POS = 1e-9
H_FRACTION = 1e-4   # finite-difference step as a fraction of the box diameter


@dataclass(frozen=True)
class Chart:
    """Coordinate box, with optional periodic directions (circle factors)."""

    names: tuple
    box: tuple              # ((lo, hi), ...) per coordinate
    periodic: tuple = ()    # coordinate names evaluated via representative lifts

    def __post_init__(self):
        if len(self.names) != len(self.box) or not self.names:
            raise ValueError("need one (lo, hi) interval per coordinate")
        for lo, hi in self.box:
            if not hi > lo:
                raise ValueError("empty box interval")
        unknown = set(self.periodic) - set(self.names)
        if unknown:
            raise ValueError(f"periodic flags for unknown coordinates {unknown}")

    @property
    def dim(self):
        return len(self.names)

    def diameter(self):
        return math.hypot(*(hi - lo for lo, hi in self.box))

    def default_h(self):
        return H_FRACTION * self.diameter()

    def index(self, name):
        return self.names.index(name)

    def period(self, i):
        lo, hi = self.box[i]
        return hi - lo

    def lift(self, p):
        """Wrap periodic coordinates into the box; error on out-of-box rest."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise ValueError(f"point has shape {p.shape}, chart dim {self.dim}")
        q = p.copy()
        for i, name in enumerate(self.names):
            lo, hi = self.box[i]
            if name in self.periodic:
                q[i] = lo + (p[i] - lo) % (hi - lo)
            elif not (lo - 1e-12 <= p[i] <= hi + 1e-12):
                raise ValueError(f"coordinate {name}={p[i]} outside [{lo}, {hi}]")
        return q

    def symbols(self):
        return sp.symbols(self.names)


@dataclass(frozen=True)
class PointSample:
    point: np.ndarray
    tau_rank: float = DEFAULT_TAU_RANK
    tau_pos: float = DEFAULT_TAU_POS
    h: float = 1e-4
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.tau_rank > 0 and self.tau_pos > 0 and self.h > 0):
            raise ValueError("tolerances must be strictly positive")


def _sort_sign(idx):
    """Sort a coordinate-index tuple, tracking the permutation sign."""
    idx = list(idx)
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    for a, b in itertools.pairwise(idx):
        if a == b:
            return None, 0
    return tuple(idx), sign


class FormFieldNum:
    """Degree-p form with evaluable coefficients on a chart.

    ``coeffs`` maps strictly sorted index tuples to callables taking the full
    coordinate array.  Use :meth:`from_symbolic` for sympy-backed fields.
    """

    def __init__(self, chart, degree, coeffs):
        self.chart = chart
        self.degree = degree
        clean = {}
        for key, fn in coeffs.items():
            key = tuple(chart.index(k) if isinstance(k, str) else k for k in key)
            if len(key) != degree or list(key) != sorted(set(key)):
                raise ValueError(f"coefficient key {key} is not a sorted "
                                 f"{degree}-subset")
            clean[key] = fn
        self.coeffs = clean
        self.stats = {"one_sided": 0}

    @classmethod
    def from_symbolic(cls, chart, degree, table, params=None):
        """Compile sympy/ScalarExpr coefficients over the chart coordinates.

        ``params`` maps extra symbols (family parameters) to fixed numbers.
        """
        syms = chart.symbols()
        params = {sp.sympify(k): float(v) for k, v in (params or {}).items()}
        coeffs = {}
        for key, e in table.items():
            e = e.expr if isinstance(e, ScalarExpr) else sp.sympify(e)
            e = e.subs(params)
            fn = sp.lambdify(syms, e, "numpy")
            coeffs[key] = (lambda f: (lambda p: float(f(*p))))(fn)
        return cls(chart, degree, coeffs)

    # -- evaluation --------------------------------------------------------
    def eval_at(self, p):
        """Full alternating component array at p (scalar for degree 0)."""
        q = self.chart.lift(p)
        m = self.chart.dim
        if self.degree == 0:
            fn = self.coeffs.get((), None)
            return float(fn(q)) if fn else 0.0
        T = np.zeros((m,) * self.degree)
        for key, fn in self.coeffs.items():
            v = float(fn(q))
            if v == 0.0:
                continue
            for perm in itertools.permutations(key):
                _, s = _sort_sign(perm)
                # parity of perm relative to the sorted key
                T[perm] += s * v
        return T

    def components(self, p):
        """Sorted-key coefficient dict at p."""
        q = self.chart.lift(p)
        return {key: float(fn(q)) for key, fn in self.coeffs.items()}

    def restrict_at(self, p, B):
        """Components in a subspace: contract every slot with basis columns."""
        T = self.eval_at(p)
        B = np.asarray(B, dtype=float)
        for _ in range(self.degree):
            T = np.tensordot(T, B, axes=([0], [0]))
        return T

    # -- algebra -----------------------------------------------------------
    def __add__(self, other):
        if other.chart is not self.chart or other.degree != self.degree:
            raise ValueError("fields must share chart and degree")
        out = dict(self.coeffs)
        for k, fn in other.coeffs.items():
            if k in out:
                out[k] = (lambda f, g: lambda p: f(p) + g(p))(out[k], fn)
            else:
                out[k] = fn
        return FormFieldNum(self.chart, self.degree, out)

    def scale(self, c):
        if callable(c):
            return FormFieldNum(self.chart, self.degree, {
                k: (lambda f: lambda p: c(p) * f(p))(fn)
                for k, fn in self.coeffs.items()})
        return FormFieldNum(self.chart, self.degree, {
            k: (lambda f: lambda p: c * f(p))(fn)
            for k, fn in self.coeffs.items()})

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def wedge(self, other):
        if other.chart is not self.chart:
            raise ValueError("fields live on different charts")
        out = {}
        for k1, f1 in self.coeffs.items():
            for k2, f2 in other.coeffs.items():
                key, s = _sort_sign(k1 + k2)
                if s == 0:
                    continue
                term = (lambda a, b, sg: lambda p: sg * a(p) * b(p))(f1, f2, s)
                if key in out:
                    out[key] = (lambda f, g: lambda p: f(p) + g(p))(out[key], term)
                else:
                    out[key] = term
        return FormFieldNum(self.chart, self.degree + other.degree, out)

    __xor__ = wedge

    def wedge_power(self, n):
        out = FormFieldNum(self.chart, 0, {(): lambda p: 1.0})
        for _ in range(n):
            out = out.wedge(self)
        return out


def _partial(fn, p, i, h, box, stats=None):
    """Central-difference partial, one-sided (O(h)) against a box edge."""
    lo, hi = box[i]
    ok_plus = p[i] + h <= hi + 1e-15
    ok_minus = p[i] - h >= lo - 1e-15
    e = np.zeros(len(p))
    e[i] = h
    if ok_plus and ok_minus:
        return (fn(p + e) - fn(p - e)) / (2 * h)
    if stats is not None:
        stats["one_sided"] += 1
    if ok_plus:
        return (fn(p + e) - fn(p)) / h
    return (fn(p) - fn(p - e)) / h


def d_fd(f: FormFieldNum, h=None):
    """Finite-difference exterior derivative (central, O(h^2) inside the box)."""
    chart = f.chart
    h = chart.default_h() if h is None else h
    periodic_idx = {chart.index(n) for n in chart.periodic}
    out = {}
    box = chart.box

    def make_coeff(key_new):
        def coeff(p):
            total = 0.0
            for j, i in enumerate(key_new):
                rest = key_new[:j] + key_new[j + 1:]
                fn = f.coeffs.get(rest)
                if fn is None:
                    continue
                if i in periodic_idx:
                    e = np.zeros(len(p))
                    e[i] = h
                    dpart = (fn(chart.lift(p + e)) - fn(chart.lift(p - e))) / (2 * h)
                else:
                    dpart = _partial(fn, p, i, h, box, f.stats)
                total += (-1) ** j * dpart
            return total
        return coeff

    keys_new = set()
    for key in f.coeffs:
        for i in range(chart.dim):
            k2, s = _sort_sign((i,) + key)
            if s:
                keys_new.add(k2)
    for key_new in keys_new:
        out[key_new] = make_coeff(key_new)
    return FormFieldNum(chart, f.degree + 1, out)


def fd_jacobian(phi, p, h):
    p = np.asarray(p, dtype=float)
    cols = []
    for i in range(len(p)):
        e = np.zeros(len(p))
        e[i] = h
        cols.append((np.asarray(phi(p + e)) - np.asarray(phi(p - e))) / (2 * h))
    return np.stack(cols, axis=1)


def pullback(f: FormFieldNum, phi, source_chart, h=None):
    """(phi^* f) on source_chart for phi: source_chart -> f.chart.

    The Jacobian is finite-differenced; coefficients come out as sums of
    minor determinants against the target coefficients.
    """
    h = source_chart.default_h() if h is None else h
    p_deg = f.degree

    def make_coeff(key_src):
        def coeff(q):
            J = fd_jacobian(phi, q, h)
            x = np.asarray(phi(q))
            total = 0.0
            for key_tgt, fn in f.coeffs.items():
                v = fn(f.chart.lift(x))
                if v == 0.0:
                    continue
                minor = J[np.ix_(key_tgt, key_src)]
                total += v * np.linalg.det(minor)
            return total
        return coeff

    if p_deg == 0:
        fn0 = f.coeffs.get((), lambda p: 0.0)
        return FormFieldNum(source_chart, 0,
                            {(): lambda q: fn0(f.chart.lift(np.asarray(phi(q))))})
    out = {}
    for key_src in itertools.combinations(range(source_chart.dim), p_deg):
        out[key_src] = make_coeff(key_src)
    return FormFieldNum(source_chart, p_deg, out)


def flow_rk4(X, p0, t, step=None, chart=None):
    """Fixed-step RK4 flow of the vector field X from p0 for time t."""
    p = np.asarray(p0, dtype=float)
    if step is None:
        step = chart.default_h() if chart is not None else 1e-4
    n = max(1, math.ceil(abs(t) / step))
    dt = t / n
    for _ in range(n):
        k1 = np.asarray(X(p))
        k2 = np.asarray(X(p + 0.5 * dt * k1))
        k3 = np.asarray(X(p + 0.5 * dt * k2))
        k4 = np.asarray(X(p + dt * k3))
        p = p + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return p


def sample_grid(chart, density, seed, tau_rank=DEFAULT_TAU_RANK,
                tau_pos=DEFAULT_TAU_POS, margin=0.0):
    """Deterministic jittered grid: density points per axis, seeded jitter.

    Periodic coordinates sample the half-open fundamental interval so 0 and
    the period never both appear.  ``margin`` shrinks non-periodic intervals
    from both ends (as a fraction) to stay away from chart boundaries.
    """
    if density < 1:
        raise ValueError("density must be >= 1")
    rng = np.random.default_rng(seed)
    axes = []
    for i, name in enumerate(chart.names):
        lo, hi = chart.box[i]
        if name in chart.periodic:
            edges = np.linspace(lo, hi, density + 1)
        else:
            w = (hi - lo) * margin
            edges = np.linspace(lo + w, hi - w, density + 1)
        centers = 0.5 * (edges[:-1] + edges[1:])
        cell = edges[1] - edges[0]
        axes.append((centers, cell))
    h = chart.default_h()
    samples = []
    for combo in itertools.product(*(range(density) for _ in range(chart.dim))):
        p = np.array([axes[i][0][c] + 0.3 * axes[i][1] * rng.uniform(-1, 1)
                      for i, c in enumerate(combo)])
        samples.append(PointSample(chart.lift(p), tau_rank, tau_pos, h))
    return samples
