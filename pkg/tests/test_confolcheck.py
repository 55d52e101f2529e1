"""Verifier-level tests: order/stratification, cone verdicts, SHS, collars,
the open-book collar model and the product blob."""

import dataclasses
import math

import numpy as np
import pytest
import sympy as sp

from confolkit.chartfield import Chart, FormFieldNum, PointSample, d_fd
from confolkit.conetame import (
    FAIL,
    PASS,
    UNDETERMINED,
    SkewPair,
    kernel_with_tol,
    split_cotamed_J,
    taming_symmetrization,
)
from confolkit.confolcheck import (
    BLobData,
    ConfoliationData,
    HyperplaneField,
    OpenBookProfiles,
    SKIPPED,
    StableHamiltonianPair,
    Verdict,
    blob_pointwise_check,
    char_dist_at,
    collar_extend,
    cone_membership,
    confoliation_check,
    default_profiles,
    deformation_collar,
    filling_boundary_check,
    flow_invariance_test,
    normal_form_verify,
    open_book_confoliation,
    open_book_samples,
    open_book_shs_residual,
    order_at,
    profile_constraints,
    rank_stratify,
    shs_check,
    transversely_exact_check,
)

R5 = Chart(("x1", "y1", "x2", "y2", "z"), tuple(((-1.0, 1.0),) * 5))
x1, y1, x2, y2, z = sp.symbols("x1 y1 x2 y2 z")


def darboux_field():
    return HyperplaneField.from_symbolic(R5, {"z": 1, "y1": x1, "y2": x2})


def cubic_field():
    return HyperplaneField.from_symbolic(R5, {"z": 1, "y1": x1**3, "y2": x2})


def flat_field():
    return HyperplaneField.from_symbolic(R5, {"z": 1})


def pts(*coords):
    return [PointSample(np.array(c, dtype=float)) for c in coords]


SAMPLES = pts((0.3, -0.2, 0.4, 0.1, 0.0), (-0.6, 0.5, -0.1, 0.7, 0.2),
              (0.0, 0.3, 0.6, -0.4, -0.3))


# ---------------------------------------------------------------------------
# order / characteristic distribution / strata
# ---------------------------------------------------------------------------

def test_order_at_basic_fields():
    h = darboux_field()
    for s in SAMPLES:
        res = order_at(h, s.point)
        assert res.status == PASS and res.k == 2
    h0 = flat_field()
    assert order_at(h0, SAMPLES[0].point).k == 0
    hc = cubic_field()
    assert order_at(hc, np.array([0.0, 0.2, 0.3, -0.1, 0.0])).k == 1
    assert order_at(hc, np.array([0.6, 0.2, 0.3, -0.1, 0.0])).k == 2


def test_char_dist_dimensions_and_cubic_kernel():
    assert char_dist_at(darboux_field(), SAMPLES[0].point).subspace.dim == 0
    K = char_dist_at(flat_field(), SAMPLES[0].point)
    assert K.subspace.dim == 4
    Kc = char_dist_at(cubic_field(), np.zeros(5))
    assert Kc.subspace.dim == 2
    # span{d/dx1, d/dy1}: projection onto the last three axes vanishes
    B = Kc.subspace.basis
    assert np.linalg.norm(B[2:, :]) < 1e-8


def test_corank_identity():
    # dim K + 2k + 1 = dim M at every decidable sample
    rng = np.random.default_rng(7)
    for h in (darboux_field(), cubic_field(), flat_field()):
        for _ in range(6):
            p = rng.uniform(-0.8, 0.8, size=5)
            res = order_at(h, p)
            if res.status != PASS:
                continue
            K = char_dist_at(h, p)
            if K.status != PASS:
                continue
            assert K.subspace.dim + 2 * res.k + 1 == 5


def test_rank_stratify_two_strata_and_product():
    grid = pts((0.0, 0.1, 0.2, 0.3, 0.0), (0.0, -0.5, 0.1, 0.2, 0.1),
               (0.5, 0.1, 0.2, 0.3, 0.0), (-0.7, -0.5, 0.1, 0.2, 0.1))
    strata, labels = rank_stratify(cubic_field(), grid)
    assert sorted(k for k in strata if k is not None) == [1, 2]
    assert all(lab.status == PASS for lab in labels)
    strata_c, _ = rank_stratify(darboux_field(), grid)
    assert set(strata_c) == {2}
    # product with a two-dimensional trivial factor: one stratum, rank 2
    hp = HyperplaneField.from_symbolic(R5, {"z": 1, "y1": x1})
    strata_p, _ = rank_stratify(hp, grid)
    assert set(strata_p) == {1}
    assert char_dist_at(hp, grid[0].point).subspace.dim == 2


# ---------------------------------------------------------------------------
# confoliation / cone membership / fillings
# ---------------------------------------------------------------------------

def mu_field(table):
    return FormFieldNum.from_symbolic(R5, 2, table)


def test_confoliation_cubic_pass():
    c = ConfoliationData(cubic_field(), mu_field({("x1", "y1"): 1}))
    v = confoliation_check(c, SAMPLES + pts((0.0, 0.1, 0.2, 0.3, 0.0)))
    assert v.status == PASS, v.message


def test_confoliation_flat_wrong_orientation_fails():
    # the (dx1^dx2 + dy1^dy2) pairing is negative against the orientation
    # induced by dz: its Pfaffian on ker dz is -1
    c = ConfoliationData(flat_field(),
                         mu_field({("x1", "x2"): 1, ("y1", "y2"): 1}))
    v = confoliation_check(c, SAMPLES)
    assert v.status == FAIL


def test_confoliation_contact_with_dalpha():
    h = darboux_field()
    c = ConfoliationData(h, mu_field({("x1", "y1"): 1, ("x2", "y2"): 1}))
    assert confoliation_check(c, SAMPLES).status == PASS


def test_cone_membership_recovers_coefficients():
    h = cubic_field()
    mu = mu_field({("x1", "y1"): 1})
    c = ConfoliationData(h, mu)
    # omega = 2 mu + 3 dalpha
    om = mu_field({("x1", "y1"): 2 + 3 * 3 * x1**2, ("x2", "y2"): 3})
    v = cone_membership(c, om, SAMPLES)
    assert v.status == PASS
    assert np.allclose(v.margins["f"], 2.0) and np.allclose(v.margins["g"], 3.0)
    bad = mu_field({("x1", "y1"): 1 - 3 * x1**2, ("x2", "y2"): -1})
    assert cone_membership(c, bad, SAMPLES).status == FAIL


def test_cone_membership_positive_function_fields():
    h = cubic_field()
    c = ConfoliationData(h, mu_field({("x1", "y1"): 1}))
    f, g = 1 + x1**2, 2 + y2**2
    om = mu_field({("x1", "y1"): f + g * 3 * x1**2, ("x2", "y2"): g})
    v = cone_membership(c, om, SAMPLES)
    assert v.status == PASS
    for s, fv, gv in zip(SAMPLES, v.margins["f"], v.margins["g"]):
        pf = 1 + s.point[0] ** 2
        pg = 2 + s.point[3] ** 2
        assert abs(fv - pf) <= 1e-6 * pf and abs(gv - pg) <= 1e-6 * pg


def test_cone_membership_rank_deficient_undetermined():
    h = darboux_field()
    c = ConfoliationData(h, mu_field({("x1", "y1"): 1, ("x2", "y2"): 1}))
    om = mu_field({("x1", "y1"): 2, ("x2", "y2"): 2})
    # mu is proportional to dalpha on xi: (f, g) not identifiable
    assert cone_membership(c, om, SAMPLES).status == UNDETERMINED


def test_status_invariant_under_conformal_rescaling():
    table = {"z": sp.exp(z), "y1": sp.exp(z) * x1**3, "y2": sp.exp(z) * x2}
    h = HyperplaneField.from_symbolic(R5, table)
    u = sp.exp(0.3 * x2)
    c = ConfoliationData(h, mu_field({("x1", "y1"): u}))
    assert confoliation_check(c, SAMPLES).status == PASS


def test_filling_modes():
    h = darboux_field()
    mu = mu_field({("x1", "y1"): 1, ("x2", "y2"): 1})
    c = ConfoliationData(h, mu)
    mu0 = mu_field({("x2", "y2"): 1})
    prim = FormFieldNum.from_symbolic(R5, 1, {("z",): 0, ("y1",): x1})
    Om = mu_field({("x1", "y1"): 1, ("x2", "y2"): 1})
    v = filling_boundary_check(c, Om, "strong", SAMPLES, mu0=mu0,
                               alpha_prim=prim)
    assert v.status == PASS, v.message
    bad_mu0 = mu_field({("x2", "y2"): 1 + x1})   # not closed
    v = filling_boundary_check(c, Om + mu_field({("x2", "y2"): x1}),
                               "strong", SAMPLES, mu0=bad_mu0,
                               alpha_prim=prim)
    assert v.status == FAIL
    # weak: cubic confoliation against its own completed form
    hc = cubic_field()
    cc = ConfoliationData(hc, mu_field({("x1", "y1"): 1}))
    Om2 = mu_field({("x1", "y1"): 1 + 3 * x1**2, ("x2", "y2"): 1})
    assert filling_boundary_check(cc, Om2, "weak", SAMPLES).status == PASS
    assert filling_boundary_check(cc, Om2, "quasi-strong", SAMPLES).status == PASS


# ---------------------------------------------------------------------------
# stable Hamiltonian pairs
# ---------------------------------------------------------------------------

def test_shs_standard_pass():
    lam = FormFieldNum.from_symbolic(R5, 1, {("z",): 1})
    om = mu_field({("x1", "y1"): 1, ("x2", "y2"): 1})
    v = shs_check(StableHamiltonianPair(lam, om, R5), SAMPLES)
    assert v.status == PASS, v.message


def test_shs_kernel_dimension_fail():
    lam = FormFieldNum.from_symbolic(R5, 1, {("z",): 1, ("y1",): x1})
    om = mu_field({("x2", "y2"): 1})
    assert shs_check(StableHamiltonianPair(lam, om, R5), SAMPLES).status == FAIL


def test_shs_reeb_not_in_ker_dlam_fails():
    lam = FormFieldNum.from_symbolic(R5, 1, {("z",): 1, ("y1",): z * x1})
    om = mu_field({("x1", "y1"): 1, ("x2", "y2"): 1})
    v = shs_check(StableHamiltonianPair(lam, om, R5), SAMPLES)
    assert v.status == FAIL
    assert "d lambda" in v.message


# ---------------------------------------------------------------------------
# flows / normal forms / collars
# ---------------------------------------------------------------------------

def test_flow_invariance_order_one_and_vacuous():
    h1 = HyperplaneField.from_symbolic(R5, {"z": 1, "y1": x1})
    v = flow_invariance_test(h1, np.array([0.1, 0.2, 0.0, 0.1, 0.0]))
    assert v.status == PASS, v.message
    hc = cubic_field()
    v = flow_invariance_test(hc, np.array([0.6, 0.2, 0.3, -0.1, 0.0]))
    assert v.status == PASS and "vacuous" in v.message


def test_normal_form_verify_darboux_and_conformal():
    h = darboux_field()
    ident = lambda p: p
    v = normal_form_verify(h, ident, 2, R5, SAMPLES)
    assert v.status == PASS
    tab = {"z": sp.exp(z), "y1": sp.exp(z) * x1, "y2": sp.exp(z) * x2}
    hconf = HyperplaneField.from_symbolic(R5, tab)
    assert normal_form_verify(hconf, ident, 2, R5, SAMPLES).status == PASS
    assert normal_form_verify(h, ident, 1, R5, SAMPLES).status == FAIL


def test_collar_extend_contact_boundary():
    h = darboux_field()
    Om = mu_field({("x1", "y1"): 1, ("x2", "y2"): 1})
    _, v = collar_extend(h, Om, 1.0, SAMPLES)
    assert v.status == PASS
    degenerate = mu_field({("x2", "y2"): 1})
    _, v = collar_extend(flat_field(), degenerate, 1.0, SAMPLES)
    assert v.status == FAIL


def test_deformation_collar_cases():
    hc = cubic_field()
    Om = mu_field({("x1", "y1"): 1, ("x2", "y2"): 1})
    zero = FormFieldNum.from_symbolic(R5, 1, {("z",): 0})
    _, v = deformation_collar(hc, Om, zero, 1.0, samples_M=SAMPLES)
    assert v.status == PASS
    # beta whose differential cancels Omega_M on K at s=1: rejected upfront
    beta_bad = FormFieldNum.from_symbolic(R5, 1, {("y1",): -x1})
    _, v = deformation_collar(hc, Om, beta_bad, 1.0, samples_M=SAMPLES)
    assert v.status == FAIL and "precondition" in v.message
    beta_ok = FormFieldNum.from_symbolic(R5, 1, {("y2",): sp.Rational(1, 10) * x2})
    Omega, v = deformation_collar(hc, Om, beta_ok, 1.0, samples_M=SAMPLES)
    assert v.status == PASS and Omega is not None


# ---------------------------------------------------------------------------
# open-book collar model
# ---------------------------------------------------------------------------

def test_profile_constraints_default_pass():
    pr = default_profiles()
    v = profile_constraints(pr)
    assert v.status == PASS, v.message
    assert v.margins["shs_residual"] < 1e-9


def test_open_book_rejects_flat_potential():
    pr = default_profiles()
    bad = OpenBookProfiles(pr.f, pr.g, pr.h, sp.Integer(0), pr.delta,
                           pr.stages)
    with pytest.raises(ValueError):
        open_book_confoliation(1, profiles=bad)


def test_open_book_n1_bundle():
    pair = open_book_confoliation(1)
    assert pair.profile_verdict.status == PASS
    assert open_book_shs_residual(pair) < 1e-9
    samples = open_book_samples(pair, count=25, seed=3)
    c = ConfoliationData(pair.h, pair.Omega)
    v = confoliation_check(c, samples)
    assert v.status == PASS, (v.message, v.witness)
    shs = shs_check(StableHamiltonianPair(pair.h.alpha, pair.Omega,
                                          pair.chart), samples)
    assert shs.status == PASS, shs.message
    # away from the collar the form is a pure angular form
    rim = np.array([1.0, 0.95, 2.0])
    comp = pair.h.alpha.components(rim)
    assert abs(comp[(0,)]) < 1e-12 and abs(comp[(2,)] - 1.0) < 1e-12


def test_open_book_n1_split_cotamed():
    pair = open_book_confoliation(1)
    for s in open_book_samples(pair, count=10, seed=11):
        xi = pair.h.xi_basis(s.point)
        mu_xi = xi.restrict(pair.Omega.eval_at(s.point))
        da_xi = xi.restrict(pair.h.dalpha.eval_at(s.point))
        K = kernel_with_tol(da_xi)
        assert K.status == PASS
        J, status = split_cotamed_J(SkewPair(mu_xi, da_xi), K.subspace)
        assert status == PASS
        for t in (0.0, 0.25, 1.0):
            S = taming_symmetrization(mu_xi + t * da_xi, J.J)
            assert np.linalg.eigvalsh(S).min() > -1e-9


def test_open_book_n2_confoliation():
    pair = open_book_confoliation(2)
    samples = open_book_samples(pair, count=12, seed=5)
    c = ConfoliationData(pair.h, pair.Omega)
    v = confoliation_check(c, samples)
    assert v.status == PASS, (v.message, v.witness)
    shs = shs_check(StableHamiltonianPair(pair.h.alpha, pair.Omega,
                                          pair.chart), samples[:6])
    assert shs.status == PASS, shs.message


# ---------------------------------------------------------------------------
# product blob
# ---------------------------------------------------------------------------

M7 = Chart(("r", "phi", "z", "w", "pw", "q", "pq"),
           ((1e-4, 3.3), (0.0, 2 * math.pi), (-1.0, 1.0),
            (0.0, 2 * math.pi), (-1.0, 1.0), (0.0, 2 * math.pi),
            (-1.0, 1.0)),
           periodic=("phi", "w", "q"))
N4 = Chart(("r", "phi", "w", "q"),
           ((1e-4, math.pi), (0.0, 2 * math.pi), (0.0, 2 * math.pi),
            (0.0, 2 * math.pi)),
           periodic=("phi", "w", "q"))
rr, pw = sp.Symbol("r"), sp.Symbol("pw")


def product_blob():
    alpha_tab = {"z": sp.cos(rr), "phi": rr * sp.sin(rr), "w": pw}
    h = HyperplaneField.from_symbolic(M7, alpha_tab)
    mu = FormFieldNum.from_symbolic(M7, 2, {("q", "pq"): -1})   # dpq ^ dq
    c = ConfoliationData(h, mu)

    def psi(p):
        r, phi, w, q = p
        return np.array([r, phi, 0.0, w, 0.0, q, 0.0])

    e = np.eye(7)
    blob = BLobData(
        N_chart=N4, psi=psi, radial_index=0, theta_index=1,
        KN_basis=lambda p: np.array([[0.0], [0.0], [0.0], [1.0]]),
        binding_normal_indices=(0, 1),
        FU_basis=lambda pM: e[:, [0, 1, 2, 3, 4]],
        gamma=FormFieldNum.from_symbolic(
            M7, 1, {("z",): sp.cos(rr), ("phi",): rr * sp.sin(rr),
                    ("w",): pw}),
        tangent_families={
            "binding": lambda p: e[:, [3, 5]],
            "boundary": lambda p: e[:, [1, 3, 5]],
            "fiber": lambda p: e[:, [0, 3, 5]],
        },
    )
    return c, blob


def blob_samples():
    rng = np.random.default_rng(2)
    out = []
    for r in (0.2, 0.25, 0.8, 1.5, 2.4, 3.0):
        p = np.array([r, rng.uniform(0, 6), rng.uniform(0, 6),
                      rng.uniform(0, 6)])
        out.append(PointSample(p))
    return out


def test_blob_product_model_passes():
    c, blob = product_blob()
    v = blob_pointwise_check(c, blob, blob_samples())
    assert v.status == PASS, {k: (s.status, s.message) for k, s in v.sub.items()}
    assert v.sub["item3c"].status == SKIPPED
    assert v.sub["item3d"].status == SKIPPED
    assert v.sub["item1"].margins["rank"] == 2


def test_blob_conformal_mu_same_statuses():
    c, blob = product_blob()
    w = sp.Symbol("w")
    c2 = ConfoliationData(
        c.h, FormFieldNum.from_symbolic(
            M7, 2, {("q", "pq"): -(1 + sp.Rational(3, 10) * sp.sin(w))}))
    v1 = blob_pointwise_check(c, blob, blob_samples())
    v2 = blob_pointwise_check(c2, blob, blob_samples())
    assert {k: s.status for k, s in v1.sub.items()} == \
        {k: s.status for k, s in v2.sub.items()}


def test_blob_non_lagrangian_KN_fails_3b():
    c, blob = product_blob()
    bad = dataclasses.replace(
        blob, KN_basis=lambda p: np.array([[0.0, 0.0], [0.0, 0.0],
                                           [0.0, 1.0], [1.0, 0.0]]))
    v = blob_pointwise_check(c, bad, blob_samples())
    assert v.sub["item3b"].status == FAIL


def test_transversely_exact_product_and_failures():
    c, blob = product_blob()
    mu = c.mu
    dgamma = d_fd(blob.gamma)
    Om = mu + dgamma
    v = transversely_exact_check(c, blob, Om, blob_samples())
    assert v.status == PASS, {k: (s.status, s.message) for k, s in v.sub.items()}
    # gamma leaking onto K_xi
    leak = blob.gamma + FormFieldNum.from_symbolic(M7, 1, {("q",): sp.Rational(1, 2)})
    v = transversely_exact_check(c, dataclasses.replace(blob, gamma=leak),
                                 Om, blob_samples())
    assert v.sub["exactness"].status == FAIL
    # non-exact term seen by F_U
    Om_bad = Om + FormFieldNum.from_symbolic(M7, 2, {("r", "w"): 1})
    v = transversely_exact_check(c, blob, Om_bad, blob_samples())
    assert v.sub["exactness"].status == FAIL
