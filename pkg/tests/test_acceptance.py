"""Acceptance gate: six end-to-end criteria, one printed verdict line each.

Each criterion prints ``acceptance <n> <name>: PASS/FAIL`` directly on the
terminal (pytest capture is bypassed) so the gate is auditable in any run.
Known display-variant identities are asserted in their derived form and
reported as notes, never silently repaired; see the per-criterion notes.
"""

import contextlib
import json
import random
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest
import sympy as sp

from confolkit import cli, gallery
from confolkit.chartfield import Chart, FormFieldNum, d_fd
from confolkit.conetame import (FAIL, PASS, UNDETERMINED, SkewPair,
                                cayley_interpolate, compatible_J,
                                kernel_with_tol, pencil_positive, pfaffian,
                                taming_check)
from confolkit.confolcheck import (SKIPPED, HyperplaneField,
                                   open_book_confoliation,
                                   open_book_shs_residual, order_at)
from confolkit.grassmann import FormAlgebra


@contextlib.contextmanager
def _criterion(capfd, label, budget=None):
    """Collect failures/notes, then print one PASS/FAIL line to the real
    terminal.  ``budget`` (seconds) is part of the criterion when given."""
    bad, notes = [], []
    t0 = time.perf_counter()
    ok = False
    try:
        yield bad, notes
        ok = not bad
    finally:
        dt = time.perf_counter() - t0
        in_budget = budget is None or dt < budget
        status = "PASS" if ok and in_budget else "FAIL"
        limit = f" / {budget:g}s" if budget is not None else ""
        with capfd.disabled():
            print(f"\nacceptance {label}: {status}  ({dt:.1f}s{limit})")
            for n in notes:
                print(f"    note: {n}")
    assert not bad, "; ".join(str(b) for b in bad)
    if budget is not None:
        assert dt < budget, f"{label} took {dt:.1f}s, budget {budget:g}s"


# ---------------------------------------------------------------------------
# 1. symbolic identity suite (exact canonical-form equality, < 10 s)
# ---------------------------------------------------------------------------

def test_criterion_1_symbolic_identities(capfd):
    with _criterion(capfd, "1 symbolic identity suite", 10.0) as (bad, notes):
        # (a) open-book contact volume identity
        for n in (2, 3):
            r = gallery.open_book_contact_identity(n)
            if r["derived"] is not True:
                bad.append(f"open-book contact identity fails at n={n}")
            if n == 2 and r["factorial_variant"] is not True:
                bad.append("n! variant should coincide at n=2")
            if n == 3 and r["factorial_variant"]:
                bad.append("n! variant unexpectedly true at n=3")
        notes.append(gallery.open_book_contact_identity(3)["note"])

        # (b) torus-cover volume identity
        for n in (1, 2):
            r = gallery.mnw_volume_identity(n)
            if r["derived"] is not True:
                bad.append(f"torus-cover volume identity fails at n={n}")
        notes.append(gallery.mnw_volume_identity(1)["note"])

        # (c) formal five-manifold expansion, term for term
        m = gallery.mori_identities()
        for key in ("dalpha", "mu_expansion", "top_expansion", "positivity"):
            if m[key] is not True:
                bad.append(f"formal expansion check '{key}' failed")
        if m["mu_defect_monomials"] != 6:
            bad.append(f"mu variant defect count changed: "
                       f"{m['mu_defect_monomials']} != 6")
        notes.append("the shorthand mu_t variant differs from the derived "
                     f"expansion in exactly {m['mu_defect_monomials']} "
                     "monomials; the expansions above use the derived form")

        # (d) open-book taming values
        t = gallery.open_book_taming_identity()
        if t["dalpha_derived"] is not True:
            bad.append("derived dalpha(X, JX) identity failed")
        if t["omega_exact"] is not True:
            bad.append("Omega(X, JX) identity failed")
        if t["dalpha_quoted"]:
            bad.append("quoted dalpha variant unexpectedly exact")
        notes.append(t["note"])


# ---------------------------------------------------------------------------
# 2. approximation verdicts (< 30 s)
# ---------------------------------------------------------------------------

def test_criterion_2_approx_verdicts(capfd):
    with _criterion(capfd, "2 approximation verdicts", 30.0) as (bad, notes):
        passing = [("r5-cubic", {}), ("bertelson-meigniez-r5", {}),
                   ("mnw-torus", {"n": 1}), ("openbook-deformation", {}),
                   ("branched-cover-r3", {})]
        for name, params in passing:
            v = gallery.build(name, **params).checks["approx"]()
            if v.status != PASS:
                bad.append(f"{name}: approx {v.status} ({v.message})")

        flat = gallery.build("r5-flat-negative")
        v = flat.checks["approx"]()
        if v.status != FAIL:
            bad.append(f"r5-flat-negative: approx {v.status}, want FAIL")
        if "item (c)" not in v.message:
            bad.append(f"failing clause not identified: {v.message!r}")
        if flat.checks["failing-item"]().status != PASS:
            bad.append("r5-flat-negative fails more than item (c)")
        notes.append("openbook-deformation covers both degenerate strata; "
                     "their factor weights are checked in criterion 3")


# ---------------------------------------------------------------------------
# 3. conformal factor recovery and exponent agreement
# ---------------------------------------------------------------------------

def test_criterion_3_conformal_factor(capfd):
    from confolkit.approx import approx_verdict

    with _criterion(capfd, "3 conformal factor recovery") as (bad, notes):
        cubic = gallery.build("r5-cubic")
        rep = approx_verdict(cubic.structures["family"],
                             cubic.structures["partition"])
        lim = rep.strata["C1"]
        if lim.exponent != 1:
            bad.append(f"cubic stratum exponent {lim.exponent} != 1")
        if lim.factor_coeff is None or \
                abs(lim.factor_coeff - 2.0) > 2.0 * 1e-9:
            bad.append(f"cubic factor 1/({lim.factor_coeff}*s), want 1/(2s) "
                       "to 1e-9 relative")
        notes.append(f"r5-cubic factor_coeff = {lim.factor_coeff!r}")

        # numeric leading exponents must equal the symbolic ones exactly
        with_rows = [("r5-cubic", {}), ("r5-flat-negative", {}),
                     ("bertelson-meigniez-r5", {}), ("mnw-torus", {"n": 1}),
                     ("openbook-deformation", {})]
        for name, params in with_rows:
            e = gallery.build(name, **params)
            va = gallery._exponent_agreement(e.structures["family"],
                                             e.structures["partition"])
            if va.status != PASS:
                bad.append(f"{name}: exponent agreement {va.status}")
            for lab, sv in va.sub.items():
                ms, mn = sv.margins["symbolic"], sv.margins["numeric"]
                if ms != mn:
                    bad.append(f"{name}/{lab}: numeric exponent {mn} != "
                               f"symbolic {ms}")
        v = gallery.build("branched-cover-r3").checks["conformal-limit"]()
        if v.status != PASS:
            bad.append(f"branched-cover-r3: conformal limit {v.status}")


# ---------------------------------------------------------------------------
# 4. structure-theory property suite (>= 10^4 randomized cases, < 60 s)
# ---------------------------------------------------------------------------

def test_criterion_4_property_suite(capfd):
    with _criterion(capfd, "4 structure-theory properties", 60.0) as (bad, notes):
        rng = np.random.default_rng(20250823)
        cases = 0

        # corank identity: dim ker(dalpha|xi) = dim M - 2k - 1
        x1, x2, r = sp.symbols("x1 x2 r")
        ch5 = Chart(("x1", "y1", "x2", "y2", "z"), ((-1, 1),) * 5)
        ch3 = Chart(("z", "r", "t"), ((-1, 1), (0.1, 1), (-1, 1)))
        fields = [
            HyperplaneField.from_symbolic(
                ch5, {"z": 1, "y1": x1 ** 3, "y2": x2}),
            HyperplaneField.from_symbolic(ch5, {"z": 1, "y1": x1}),
            HyperplaneField.from_symbolic(ch3, {"z": 1, "t": 2 * r ** 2}),
            HyperplaneField.from_symbolic(ch3, {"z": 1}),
        ]
        skipped = 0
        for h in fields:
            dim = h.chart.dim
            lo = np.array([b[0] for b in h.chart.box])
            hi = np.array([b[1] for b in h.chart.box])
            for i in range(350):
                p = lo + (hi - lo) * rng.random(dim)
                if dim == 5 and i % 2 == 0:
                    p[0] = 0.0          # land exactly on the cubic stratum
                res = order_at(h, p)
                if res.status == UNDETERMINED:
                    skipped += 1
                    continue
                M = h.xi_basis(p).restrict(h.dalpha.eval_at(p))
                kr = kernel_with_tol(M)
                if kr.status == UNDETERMINED:
                    skipped += 1
                    continue
                cases += 1
                if kr.subspace.dim != dim - 2 * res.k - 1:
                    bad.append(f"corank identity broken at {p} "
                               f"(k={res.k}, ker={kr.subspace.dim})")
                    break
        if skipped > 100:
            bad.append(f"too many tolerance-band skips: {skipped}")

        # d(d(.)) == 0, symbolically exact on random polynomial forms
        alg = FormAlgebra(top_degree=3)
        syms, diffs = zip(*[alg.coordinate(n) for n in ("u", "v", "w")])
        pool = [sp.Integer(1), syms[0], syms[1] ** 2, syms[0] * syms[2],
                syms[1] * syms[2] ** 2, syms[0] ** 3, sp.Rational(1, 3)]
        for _ in range(600):
            f = alg.zero()
            for dxi in diffs:
                if rng.random() < 0.7:
                    f = f + dxi * pool[int(rng.integers(len(pool)))]
            if rng.random() < 0.3:      # occasionally a random two-form
                f = f.wedge(diffs[int(rng.integers(3))])
            cases += 1
            if f.d().d().is_zero() is not True:
                bad.append(f"d(d(.)) != 0 on {f}")
                break

        # ... and numerically within 10*h through the finite-difference route
        u, v, w = sp.symbols("u v w")
        chuvw = Chart(("u", "v", "w"), ((-1, 1),) * 3)
        hstep = 1e-3
        for _ in range(150):
            a, b, c = rng.uniform(-1, 1, 3).round(3)
            tab = {("u",): a * sp.sin(v + 2 * w), ("v",): b * sp.exp(u * w),
                   ("w",): c * sp.cos(u - v)}
            f = FormFieldNum.from_symbolic(chuvw, 1, tab)
            dd = d_fd(d_fd(f, h=hstep), h=hstep)
            for p in rng.uniform(-0.8, 0.8, (5, 3)):
                cases += 1
                worst = max(abs(val) for val in dd.components(p).values())
                if worst > 10 * hstep:
                    bad.append(f"|dd| = {worst:.2e} > 10h at {p}")
                    break

        # conformal invariance of the taming status
        for _ in range(3600):
            n = int(rng.integers(1, 4))
            A = rng.standard_normal((2 * n, 2 * n))
            omega = A - A.T
            J = np.kron(np.eye(n), np.array([[0.0, -1.0], [1.0, 0.0]]))
            c = float(rng.uniform(1e-2, 1e2))
            cases += 1
            if taming_check(omega, J).status != taming_check(c * omega,
                                                             J).status:
                bad.append("taming status not conformally invariant")
                break

        # compatible_J output always tames its input
        built = 0
        while built < 2400:
            n = int(rng.integers(1, 4))
            A = rng.standard_normal((2 * n, 2 * n))
            omega = A - A.T
            if np.linalg.svd(omega, compute_uv=False)[-1] < 1e-3:
                continue
            G = rng.standard_normal((2 * n, 2 * n))
            g = G @ G.T + 2 * n * np.eye(2 * n)
            J = compatible_J(omega, g)
            built += 1
            cases += 1
            if taming_check(omega, J).status != PASS:
                bad.append("compatible_J output failed taming_check")
                break
            if np.linalg.norm(J.J.T @ omega @ J.J - omega) > 1e-8 * \
                    np.linalg.norm(omega):
                bad.append("compatible_J output not omega-compatible")
                break

        # Cayley interpolants stay tamed by both cotaming forms
        std = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
        pairs = 0
        while pairs < 100:
            Js = []
            for _ in range(2):
                G = rng.standard_normal((4, 4)) * 0.2
                Js.append(compatible_J(std, G @ G.T + np.eye(4)))
            R = rng.standard_normal((4, 4)) * 0.15
            mu = std + (R - R.T)
            if any(taming_check(mu, J).status != PASS for J in Js):
                continue
            pairs += 1
            for tau in np.linspace(0.0, 1.0, 10):
                Jt = cayley_interpolate(Js[0], Js[1], float(tau))
                cases += 1
                if taming_check(std, Jt).status != PASS or \
                        taming_check(mu, Jt).status != PASS:
                    bad.append(f"interpolant at tau={tau:.2f} lost taming")
                    break

        # pencil positivity vs a 200-point brute-force ray oracle
        ts = np.geomspace(1e-6, 1e6, 200)
        for _ in range(500):
            n = int(rng.integers(1, 4))
            A = rng.standard_normal((2 * n, 2 * n))
            B = rng.standard_normal((2 * n, 2 * n))
            pair = SkewPair(A - A.T, B - B.T)
            verdict = pencil_positive(pair)
            vals = np.array([pfaffian(pair.mu0 + t * pair.mu1) for t in ts])
            brute = PASS if np.all(vals > 0) else FAIL
            cases += 1
            if verdict.status == PASS and brute == FAIL:
                bad.append("pencil PASS contradicted by brute force")
                break
            if verdict.status == FAIL and brute == PASS:
                # the dip can fall between brute samples; confirm the
                # certified root by direct evaluation
                scale = max(float(np.max(np.abs(vals))), 1.0)
                if not any(abs(pfaffian(pair.mu0 + t * pair.mu1))
                           <= 1e-6 * scale for t in verdict.roots_on_ray):
                    bad.append("pencil FAIL not confirmed at its root")
                    break
            if verdict.status == UNDETERMINED and not verdict.roots_on_ray:
                bad.append("UNDETERMINED without a near-ray root")
                break

        notes.append(f"{cases} randomized cases")
        if cases < 10_000:
            bad.append(f"only {cases} randomized cases, need >= 10^4")


# ---------------------------------------------------------------------------
# 5. constructor suite (< 30 s)
# ---------------------------------------------------------------------------

def test_criterion_5_constructors(capfd):
    with _criterion(capfd, "5 constructor suite", 30.0) as (bad, notes):
        ob = gallery.build("openbook-solid-torus")
        rows = ob.run_verdicts()
        for key in ("profiles", "confoliation", "cotamed-J", "shs",
                    "shs-residual", "taming-identity"):
            if rows[key].status != PASS:
                bad.append(f"openbook-solid-torus {key}: {rows[key].status}")
        pair = open_book_confoliation(1)
        res = open_book_shs_residual(pair)
        if not res < 1e-9:
            bad.append(f"stabilizing residual -h f' - l' g' = {res:.2e}")
        notes.append(f"solid-torus stabilizing residual {res:.2e}")

        blob = gallery.build("product-blob").run_verdicts()
        for key in ("item1", "item2", "item3a", "item3b", "transversely-exact"):
            if blob[key].status != PASS:
                bad.append(f"product-blob {key}: {blob[key].status}")
        for key in ("item3c", "item3d"):
            if blob[key].status != SKIPPED:
                bad.append(f"product-blob {key}: {blob[key].status}, "
                           "want SKIPPED")
        notes.append("items 3c/3d are global conditions, reported SKIPPED "
                     "by design")


# ---------------------------------------------------------------------------
# 6. CLI contract: selftest, byte-identical reports, fuzzing
# ---------------------------------------------------------------------------

def test_criterion_6_cli_contract(capfd, tmp_path):
    with _criterion(capfd, "6 CLI contract") as (bad, notes):
        exe = shutil.which("confolkit")
        if exe is None:
            bad.append("console script 'confolkit' not on PATH")
            argv0 = [sys.executable, "-m", "confolkit.cli"]
        else:
            argv0 = [exe]

        r = subprocess.run(argv0 + ["--selftest"], capture_output=True,
                           text=True, timeout=300)
        if r.returncode != 0:
            bad.append(f"--selftest exit {r.returncode}: {r.stdout[-200:]}")
        reproduced = r.stdout.count("reproduced")
        if reproduced != len(gallery.names()):
            bad.append(f"selftest covered {reproduced} entries, "
                       f"want {len(gallery.names())}")

        doc = tmp_path / "doc.cfl"
        doc.write_text(
            "chart x1 y1 x2 y2 z\n"
            "param s\n"
            "form alpha = dz + (x1^3 + s * x1) * dy1 + x2 * dy2\n"
            "form omega = dx1 ^ dy1\n"
            "extend mu on stratum 1 = dx1 ^ dy1\n"
            "check approx alpha omega\n")
        outs = []
        for i in (1, 2):
            out = tmp_path / f"report{i}.json"
            r = subprocess.run(
                argv0 + [str(doc), "--seed", "11", "--format", "json",
                         "--out", str(out)],
                capture_output=True, text=True, timeout=300)
            if r.returncode != 0:
                bad.append(f"document run {i} exit {r.returncode}: "
                           f"{r.stderr[-200:]}")
            outs.append(out.read_bytes())
        if outs[0] != outs[1]:
            bad.append("JSON reports differ between identical runs")
        if json.loads(outs[0])["seed"] != 11:
            bad.append("seed flag not recorded in the report")

        # 10^5 malformed inputs: diagnostics only, never a crash
        rng = random.Random(606)
        vocab = ["chart", "symbol", "param", "gen", "form", "extend",
                 "check", "gallery", "approx", "confoliation", "shs",
                 "deg", "d", "on", "stratum", "x", "y", "dx", "dy",
                 "alpha", "mu", "=", "+", "-", "*", "/", "^", "(", ")",
                 "[", "]", ",", "0", "1", "2.5", "1e3", "r5", "cubic",
                 "\n", " ", "\t", "@", "\\", '"', "~", "é", "%"]
        short_doc = ("chart z r[0.05, 1] theta[0, 6.28]*\n"
                     "form alpha = dz + 2 * r^2 * dtheta\n"
                     "form W = 4 * r * dr ^ dtheta\n"
                     "check confoliation alpha W\n")
        attempts = crashes = 0
        for _ in range(96_000):
            soup = "".join(rng.choice(vocab)
                           for _ in range(rng.randrange(0, 24)))
            attempts += 1
            try:
                cli.parse(soup)
            except cli.CflError:
                pass
            except Exception as e:             # noqa: BLE001 - fuzz harness
                crashes += 1
                if crashes == 1:
                    bad.append(f"parser crash {type(e).__name__} on "
                               f"{soup!r:.80}")
        for _ in range(4_000):
            chars = list(short_doc)
            for _ in range(rng.randrange(1, 5)):
                chars[rng.randrange(len(chars))] = rng.choice(
                    "abc()^*=[]#\n @09.~")
            attempts += 1
            try:
                cli.parse("".join(chars))
            except cli.CflError:
                pass
            except Exception as e:             # noqa: BLE001 - fuzz harness
                crashes += 1
                if crashes == 1:
                    bad.append(f"parser crash {type(e).__name__} on mutation")
        if attempts != 100_000:
            bad.append(f"fuzz attempted {attempts} inputs, want 10^5")
        if crashes:
            bad.append(f"{crashes} parser crashes")
        notes.append(f"fuzzed {attempts} inputs, {crashes} crashes")
