"""Pointwise skew-symmetric linear algebra for taming questions.

Everything operates on plain numpy matrices expressed in the basis of a
:class:`BasedSubspace`.  Conventions:

* a two-form is the skew matrix ``M`` with ``omega(v, w) = v^T M w``;
* the Pfaffian is normalized so ``Pf([[0, 1], [-1, 0]]) = +1`` and is computed
  by Parlett-Reid skew tridiagonalization with explicit sign tracking (a
  determinant square root would lose the orientation sign);
* strict inequalities are never certified through numerical noise: pencil
  roots within 1e-8 of the inspected ray and exhausted feasibility searches
  return UNDETERMINED rather than PASS/FAIL.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from confolkit.chartfield import DEFAULT_TAU_POS, DEFAULT_TAU_RANK

PASS = "PASS"
FAIL = "FAIL"
UNDETERMINED = "UNDETERMINED"

DEFAULT_TAU_ANGLE = 1e-6
_COEFF_TRUNC = 1e-12     # relative truncation of pencil polynomial coefficients
_RAY_TOL = 1e-8          # roots closer than this to the ray: UNDETERMINED


def _skew(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m - m.T)


@dataclass
class BasedSubspace:
    """Columns of ``basis`` span the subspace inside R^ambient_dim."""

    ambient_dim: int
    basis: np.ndarray
    orientation: int = +1

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=float)
        if self.basis.ndim == 1:
            self.basis = self.basis[:, None]
        if self.basis.shape[0] != self.ambient_dim:
            raise ValueError("basis rows must match ambient dimension")
        if self.basis.size:
            self.cond = np.linalg.cond(self.basis)
            if self.cond > 1e12:
                raise ValueError(f"basis columns nearly dependent (cond={self.cond:.2e})")
        else:
            self.cond = 1.0

    @property
    def dim(self):
        return self.basis.shape[1]

    def restrict(self, M):
        """Two-form (or metric) matrix in this basis: B^T M B."""
        return self.basis.T @ np.asarray(M, dtype=float) @ self.basis

    def orthonormalized(self):
        if self.dim == 0:
            return self
        q, _ = np.linalg.qr(self.basis)
        return BasedSubspace(self.ambient_dim, q, self.orientation)


@dataclass
class SkewPair:
    """Two alternating forms in a common basis (mu0 + t*mu1 pencils)."""

    mu0: np.ndarray
    mu1: np.ndarray
    labels: tuple = ("mu0", "mu1")

    def __post_init__(self):
        self.mu0 = _skew(self.mu0)
        self.mu1 = _skew(self.mu1)
        if self.mu0.shape != self.mu1.shape:
            raise ValueError("pencil forms must share a shape")


@dataclass
class ComplexStructureMatrix:
    J: np.ndarray
    tau_pos: float = DEFAULT_TAU_POS

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=float)
        dev = np.linalg.norm(self.J @ self.J + np.eye(len(self.J)))
        if dev > 1e3 * self.tau_pos:
            raise ValueError(f"not a complex structure: ||J^2+I|| = {dev:.2e}")


@dataclass
class TamingVerdict:
    status: str
    eigenvalues: np.ndarray = None
    null_basis: np.ndarray = None
    angles: np.ndarray = None
    witness: np.ndarray = None
    message: str = ""


@dataclass
class PencilVerdict:
    status: str
    coeffs: np.ndarray = None          # P(t) coefficients, ascending
    roots_on_ray: list = field(default_factory=list)
    message: str = ""


@dataclass
class KernelResult:
    status: str
    subspace: BasedSubspace = None
    rank: int = 0
    sigmas: np.ndarray = None


# ---------------------------------------------------------------------------
# kernels and Pfaffians
# ---------------------------------------------------------------------------

def kernel_with_tol(m, tau_rank=DEFAULT_TAU_RANK):
    """Orthonormal numerical kernel of a skew matrix; even rank enforced."""
    m = _skew(m)
    n = len(m)
    if n == 0:
        return KernelResult(PASS, BasedSubspace(0, np.zeros((0, 0))), 0,
                            np.zeros(0))
    U, s, Vt = np.linalg.svd(m)
    smax = s[0] if s.size else 0.0
    cut = tau_rank * max(smax, 1.0)
    rank = int(np.sum(s > cut))
    if rank % 2:
        return KernelResult(
            UNDETERMINED, rank=rank, sigmas=s,
            message=f"odd numerical rank {rank}: tolerance ambiguity "
                    f"(sigma around cut: {s[max(0, rank-1):rank+1]})")
    null = Vt[rank:].T
    return KernelResult(PASS, BasedSubspace(n, null), rank, s)


def pfaffian(m):
    """Pfaffian by Parlett-Reid reduction with permutation sign tracking."""
    A = _skew(m).copy()
    n = len(A)
    if n % 2:
        raise ValueError("Pfaffian needs even dimension")
    if n == 0:
        return 1.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        # pivot the largest entry of column k below the diagonal into (k+1, k)
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp]] = A[[kp, k + 1]]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        piv = A[k, k + 1]
        if piv == 0.0:
            return 0.0
        pf *= piv
        if k + 2 < n:
            tau = A[k, k + 2:] / piv
            col = A[k + 2:, k + 1]
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return pf


# ---------------------------------------------------------------------------
# pencil positivity on rays
# ---------------------------------------------------------------------------

def _pencil_poly(pair: SkewPair):
    """Pf(mu0 + t*mu1) as exact-degree coefficients via interpolation."""
    n2 = len(pair.mu0)
    deg = n2 // 2
    nodes = np.arange(deg + 1, dtype=float)
    vals = np.array([pfaffian(pair.mu0 + t * pair.mu1) for t in nodes])
    V = np.vander(nodes, deg + 1, increasing=True)
    return np.linalg.solve(V, vals)


def _ray_roots(coeffs, closed):
    """Real roots of sum c_k t^k classified against the ray.

    Coefficients are truncated (relative 1e-12) and rationalized, so the
    Sturm-based isolation downstream is exact.  Returns (poly, on, near):
    ``on`` are certain failures inside the ray, ``near`` are roots too close
    to its edge to certify either way.  An exact root at t = 0 lies off the
    open ray (the compatible-pair pencils always vanish there) but on the
    closed one.
    """
    import sympy as sp

    cmax = np.max(np.abs(coeffs)) if len(coeffs) else 0.0
    if cmax == 0.0:
        return None, [], []
    t = sp.Symbol("t")
    poly = sum(sp.Rational(c).limit_denominator(10**15) * t**k
               for k, c in enumerate(coeffs)
               if abs(c) > _COEFF_TRUNC * cmax)
    if poly == 0:
        return None, [], []
    on, near = [], []
    for r in sp.real_roots(sp.Poly(poly, t)):
        rf = float(r)
        if r == 0:
            if closed:
                on.append(0.0)
            continue
        if rf > _RAY_TOL:
            on.append(rf)
        elif (rf > 0) or (closed and abs(rf) <= _RAY_TOL):
            near.append(rf)
    return poly, on, near


def pencil_positive(pair: SkewPair, closed=False, orientation=+1):
    """Nondegeneracy of mu0 + t*mu1 on the ray t>0 (or t>=0 when closed).

    PASS means the Pfaffian polynomial has no roots meeting the ray and is
    positive there relative to ``orientation``.  Roots within 1e-8 of the
    ray's interior are reported UNDETERMINED, never silently passed.
    """
    coeffs = _pencil_poly(pair)
    poly, on, near = _ray_roots(coeffs, closed)
    if poly is None:
        return PencilVerdict(FAIL, coeffs, message="Pfaffian identically zero")
    if on:
        return PencilVerdict(FAIL, coeffs, roots_on_ray=on,
                             message=f"pencil degenerates at t={on[0]:.6g}")
    if near:
        return PencilVerdict(UNDETERMINED, coeffs, roots_on_ray=near,
                             message=f"root within {_RAY_TOL:g} of the ray "
                                     f"(t={near[0]:.3g})")
    if closed and abs(np.polyval(coeffs[::-1], 0.0)) <= _RAY_TOL * max(
            1.0, np.max(np.abs(coeffs))):
        return PencilVerdict(UNDETERMINED, coeffs,
                             message="value at t=0 below tolerance")
    val = orientation * np.polyval(coeffs[::-1], 1.0)
    if val <= 0:
        return PencilVerdict(FAIL, coeffs,
                             message=f"P(1) = {val:.3g} has the wrong sign "
                                     "for the orientation")
    return PencilVerdict(PASS, coeffs)


# ---------------------------------------------------------------------------
# taming
# ---------------------------------------------------------------------------

def taming_symmetrization(omega, J):
    """S(v, w) = (omega(v, Jw) + omega(w, Jv)) / 2 as a symmetric matrix."""
    omega = _skew(omega)
    J = J.J if isinstance(J, ComplexStructureMatrix) else np.asarray(J)
    OJ = omega @ J
    return 0.5 * (OJ + OJ.T)


def taming_check(omega, J, K_ref=None, tau_pos=DEFAULT_TAU_POS,
                 tau_angle=DEFAULT_TAU_ANGLE):
    """Is omega(v, Jv) >= 0 with equality exactly on K_ref?

    ``K_ref=None`` is the weak mode: only positive semidefiniteness of the
    symmetrized form is required.  With a reference subspace, the near-null
    eigenspace must match it (principal angles below tau_angle) and all other
    eigenvalues must clear tau_pos.
    """
    S = taming_symmetrization(omega, J)
    w, V = np.linalg.eigh(S)
    scale = max(np.max(np.abs(w)), 1.0)
    neg = w < -tau_pos * scale
    if np.any(neg):
        i = int(np.argmin(w))
        return TamingVerdict(FAIL, w, witness=V[:, i],
                             message=f"indefinite: eigenvalue {w[i]:.3e}")
    nullmask = np.abs(w) <= tau_pos * scale
    null = V[:, nullmask]
    if K_ref is None:
        return TamingVerdict(PASS, w, null_basis=null)
    K = K_ref.basis if isinstance(K_ref, BasedSubspace) else np.asarray(K_ref)
    if null.shape[1] != K.shape[1]:
        return TamingVerdict(FAIL, w, null_basis=null,
                             message=f"null dimension {null.shape[1]} != "
                                     f"reference {K.shape[1]}")
    if K.shape[1] == 0:
        return TamingVerdict(PASS, w, null_basis=null, angles=np.zeros(0))
    angles = scipy.linalg.subspace_angles(null, K)
    if np.max(angles) > tau_angle:
        return TamingVerdict(FAIL, w, null_basis=null, angles=angles,
                             message=f"null space misses reference subspace "
                                     f"(max angle {np.max(angles):.2e})")
    return TamingVerdict(PASS, w, null_basis=null, angles=angles)


def compatible_J(omega, g=None, tau_pos=DEFAULT_TAU_POS):
    """Polar compatible complex structure of a nondegenerate two-form.

    With metric g = L L^T, set W = L^{-1} omega L^{-T} and take the unitary
    polar factor of W; conjugating back gives J with J^2 = -I, taming and
    omega-compatibility.  Scale invariant in omega.
    """
    omega = _skew(omega)
    n = len(omega)
    if n == 0:
        return ComplexStructureMatrix(np.zeros((0, 0)), tau_pos)
    g = np.eye(n) if g is None else np.asarray(g, dtype=float)
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    W = Linv @ omega @ Linv.T
    # (-W^2) = W^T W symmetric positive definite iff omega nondegenerate
    P = W.T @ W
    w, U = np.linalg.eigh(P)
    if w[0] <= tau_pos * max(w[-1], 1.0):
        raise np.linalg.LinAlgError("two-form is numerically degenerate")
    inv_sqrt = U @ np.diag(w ** -0.5) @ U.T
    # omega(v, Jv) = v^T L (W^T W)^{1/2} L^T v > 0 needs the minus sign,
    # since W^2 = -W^T W
    J_hat = -W @ inv_sqrt
    J = Linv.T @ J_hat @ L.T
    return ComplexStructureMatrix(J, tau_pos)


def mu_from_J(J, dalpha, g=None, max_exponent=40, tau_pos=DEFAULT_TAU_POS):
    """Auxiliary-metric two-form mu_g(v,w) = (g(Jv,w) - g(v,Jw))/2 and the
    smallest power-of-two C with the pencil mu_g + C*dalpha positive against
    dalpha."""
    Jm = J.J if isinstance(J, ComplexStructureMatrix) else np.asarray(J)
    n = len(Jm)
    g = np.eye(n) if g is None else np.asarray(g, dtype=float)
    mu_g = 0.5 * (Jm.T @ g - g @ Jm)
    for k in range(-20, max_exponent + 1):
        C = 2.0 ** k
        pv = pencil_positive(SkewPair(mu_g + C * _skew(dalpha), _skew(dalpha)),
                             closed=True)
        if pv.status == PASS:
            return mu_g, C
    raise RuntimeError("no power-of-two C found up to the search cap")


def find_T_taming(J, omega_M, dalpha, tau_pos=DEFAULT_TAU_POS, max_exponent=40):
    """Doubling/halving search for T with omega_M + T*dalpha taming J.

    Returns (T, verdict); minimal within a factor of two.  UNDETERMINED when
    the doubling cap is exhausted.
    """
    def passes(T):
        v = taming_check(omega_M + T * _skew(dalpha), J, None, tau_pos)
        return v.status == PASS, v

    ok, v = passes(1.0)
    if ok:
        T = 1.0
        while T > 2.0 ** (-max_exponent):
            ok2, v2 = passes(T / 2)
            if not ok2:
                break
            T, v = T / 2, v2
        return T, v
    T = 2.0
    while T <= 2.0 ** max_exponent:
        ok, v = passes(T)
        if ok:
            return T, v
        T *= 2
    return None, TamingVerdict(UNDETERMINED,
                               message="doubling search cap exhausted")


# ---------------------------------------------------------------------------
# split cotamed construction with Cayley feasibility fallback
# ---------------------------------------------------------------------------

def cayley_coordinate(J, J0):
    """C(J) = (J + J0)^{-1} (J - J0); singular J+J0 contradicts cotaming."""
    J = J.J if isinstance(J, ComplexStructureMatrix) else np.asarray(J)
    J0 = J0.J if isinstance(J0, ComplexStructureMatrix) else np.asarray(J0)
    A = J + J0
    if abs(np.linalg.det(A)) < 1e-300:
        raise ValueError("J + J0 singular: inputs are not cotamed by a "
                         "common pair (input inconsistency)")
    return np.linalg.solve(A, J - J0)


def cayley_inverse(W, J0):
    J0 = J0.J if isinstance(J0, ComplexStructureMatrix) else np.asarray(J0)
    n = len(J0)
    return ComplexStructureMatrix(
        J0 @ (np.eye(n) + W) @ np.linalg.inv(np.eye(n) - W))


def cayley_interpolate(J0, J1, tau):
    """Straight segment in Cayley coordinates between two complex structures."""
    W1 = cayley_coordinate(J1, J0)
    return cayley_inverse(tau * W1, J0)


def _anticommuting_projection(G, J0):
    return 0.5 * (G + J0 @ G @ J0)


def _min_taming_margin(J, forms, tau_pos):
    if len(J) == 0:
        return np.inf       # zero-dimensional block: vacuously tamed
    vals = []
    for om in forms:
        S = taming_symmetrization(om, J)
        w = np.linalg.eigvalsh(S)
        scale = max(np.max(np.abs(w)), 1.0)
        # ignore the structural near-null directions only when margin asked
        vals.append(np.min(w) / scale)
    return min(vals)


def cotaming_search(forms, J_init, seed=0, budget=10_000, tau_pos=DEFAULT_TAU_POS):
    """Best-effort search for one J tamed by every form in ``forms``.

    Projected ascent in Cayley coordinates anchored at J_init (random
    directions in the J_init-anticommuting space, shrinking steps, seeded
    restarts).  Honest UNDETERMINED when the budget runs out: existence may
    hold even when the search fails.
    """
    J0 = J_init.J if isinstance(J_init, ComplexStructureMatrix) else np.asarray(J_init)
    n = len(J0)
    rng = np.random.default_rng(seed)
    best_J, best_margin = J0, _min_taming_margin(J0, forms, tau_pos)
    if best_margin > tau_pos:
        return ComplexStructureMatrix(best_J), PASS
    spent = 0
    for _restart in range(10):
        W = np.zeros((n, n))
        step = 0.3
        cur = best_margin
        while spent < budget // 10 * (_restart + 1):
            spent += 1
            G = rng.standard_normal((n, n)) * step
            Wc = _anticommuting_projection(W + G, J0)
            if np.linalg.norm(Wc, 2) >= 0.98:
                step *= 0.5
                continue
            Jc = J0 @ (np.eye(n) + Wc) @ np.linalg.inv(np.eye(n) - Wc)
            m = _min_taming_margin(Jc, forms, tau_pos)
            if m > cur:
                W, cur = Wc, m
                if cur > best_margin:
                    best_J, best_margin = Jc, cur
                if cur > tau_pos:
                    return ComplexStructureMatrix(best_J), PASS
            else:
                step *= 0.95
                if step < 1e-6:
                    break
    return (ComplexStructureMatrix(best_J) if best_margin > -1e-6 else None,
            UNDETERMINED)


def mu_orthogonal_complement(mu, K: BasedSubspace):
    """Basis of {v : mu(v, k) = 0 for all k in K} inside the ambient space."""
    mu = _skew(mu)
    if K.dim == 0:
        return BasedSubspace(len(mu), np.eye(len(mu)))
    C = (mu @ K.basis).T        # constraints: rows are mu(., k)
    null = scipy.linalg.null_space(C)
    return BasedSubspace(len(mu), null)


def split_cotamed_J(pair: SkewPair, K: BasedSubspace, g=None, seed=0,
                    tau_pos=DEFAULT_TAU_POS):
    """J = J_nu (+) J_K: J_K compatible with mu|_K, J_nu tamed by both
    dalpha|_nu and mu|_nu.

    ``pair.mu0`` is mu (nondegenerate on K), ``pair.mu1`` is dalpha (kernel
    K).  Returns (J, status); UNDETERMINED when the two-form feasibility
    search fails without witnessing impossibility.
    """
    mu, dalpha = pair.mu0, pair.mu1
    n = len(mu)
    nu = mu_orthogonal_complement(mu, K)
    if nu.dim + K.dim != n:
        # complement meets K; cannot split in this basis
        return None, UNDETERMINED
    mu_nu, da_nu = nu.restrict(mu), nu.restrict(dalpha)
    mu_K = K.restrict(mu)
    status = PASS
    try:
        J_nu = compatible_J(da_nu, None if g is None else nu.restrict(g))
    except np.linalg.LinAlgError:
        return None, FAIL
    if _min_taming_margin(J_nu.J, [mu_nu], tau_pos) <= tau_pos:
        J_try = compatible_J(mu_nu, None if g is None else nu.restrict(g))
        if _min_taming_margin(J_try.J, [da_nu], tau_pos) > tau_pos:
            J_nu = J_try
        else:
            J_nu, status = cotaming_search([da_nu, mu_nu], J_nu, seed=seed,
                                           tau_pos=tau_pos)
            if J_nu is None or status != PASS:
                return None, UNDETERMINED
    if K.dim:
        J_K = compatible_J(mu_K, None if g is None else K.restrict(g))
        blocks = scipy.linalg.block_diag(J_nu.J, J_K.J)
    else:
        blocks = J_nu.J
    B = np.hstack([nu.basis] + ([K.basis] if K.dim else []))
    Binv = np.linalg.inv(B)
    J = B @ blocks @ Binv
    return ComplexStructureMatrix(J), status
