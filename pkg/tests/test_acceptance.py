"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL ...`` line (shown even
under output capture) with the measured quantity, its tolerance and the
runtime against its budget, then asserts both.
"""

import time

import pytest

from tapalab.attention import AttentionConfig
from tapalab.checks import VerifyConfig, run_verify
from tapalab.cli import main
from tapalab.encodings import RoPEParams, TAPAParams
from tapalab.experiments import HistogramSpec, histogram_mean_oracle, run_bias_histogram
from tapalab.numeric import SamplerSpec

CFG = VerifyConfig(seed=0)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, elapsed, budget):
        ok = ok and elapsed < budget
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}; runtime {elapsed:.2f}s (< {budget}s)")
        return ok

    return emit


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def test_c01_rope_form_equivalence(report):
    (r,), dt = _timed(lambda: run_verify(CFG, ["rope_forms"]))
    ok = report(1, r.passed, f"max |complex - expanded| = {r.lhs:.3g} over {r.params['trials']} trials (tol 1e-12)", dt, 5)
    assert ok and r.rhs == 1e-12 and r.params["D"] == [2, 4, 64, 128]


def test_c02_shift_invariance(report):
    (r,), dt = _timed(lambda: run_verify(CFG, ["rope_shift"]))
    ok = report(2, r.passed, f"{int(r.lhs)} bitwise mismatches over {r.params['trials']} shifts (tol 0)", dt, 1)
    assert ok and r.params["trials"] == 1000


def test_c03_lemma_grid(report):
    reps, dt = _timed(lambda: run_verify(CFG, ["lemma1", "lemma2"]))
    n_pass = sum(r.passed for r in reps)
    ok = report(3, n_pass == len(reps) and len(reps) > 0,
                f"{n_pass}/{len(reps)} admissible lemma checks pass, min margin {min(r.margin for r in reps):.4g}", dt, 30)
    assert ok


def test_c04_theorem2_gap(report):
    reps, dt = _timed(lambda: run_verify(CFG, ["theorem2"]))
    regimes = {(r.params["grid_regime"], r.params["mu0"], r.params["nu0"]) for r in reps}
    ok = report(4, all(r.passed for r in reps) and len(regimes) == 8,
                f"{sum(r.passed for r in reps)}/8 gaps exceed |mu0|/8, min lhs {min(r.lhs for r in reps):.4g} (rhs 0.125)",
                dt, 120)
    assert ok
    strict = [r for r in reps if r.params["grid_regime"] == "strict"]
    assert all(r.params["theta0"] == 1e-30 and r.params["D"] == 4096 and r.params["lambda_far"] == 1e31 for r in strict)


def test_c05_theorem3_shrinkage(report):
    (r,), dt = _timed(lambda: run_verify(CFG, ["theorem3"]))
    ok = report(5, r.passed and r.params["steps"] <= 40,
                f"|gap| = {r.lhs:.6g} < {r.rhs} after {r.params['steps']} of 40 steps "
                f"(theta0={r.params['final_theta0']:.3g}, D={r.params['final_D']})", dt, 120)
    assert ok


def test_c06_theorem4_decay(report):
    reps, dt = _timed(lambda: run_verify(CFG, ["theorem4"]))
    agree = [r for r in reps if r.name == "theorem4_oracle_agreement"]
    (slope,) = [r for r in reps if r.name == "theorem4_slope"]
    s = slope.params["slope"]
    in_band = -0.6 <= s <= -0.2
    ok = report(6, all(r.passed for r in agree) and in_band,
                f"{sum(r.passed for r in agree)}/{len(agree)} distances within 4 CI of the oracle at "
                f"{agree[0].params['n']} samples; slope {s:.4f} in [-0.6, -0.2]", dt, 300)
    assert ok and [r.params["distance"] for r in agree] == [2.0**i for i in range(11)]


def test_c07_theorem5_variance(report):
    (r,), dt = _timed(lambda: run_verify(CFG, ["theorem5"]))
    ok = report(7, r.passed, f"Var = {r.lhs:.5f} >= 0.45 sigma0^2 = {r.rhs:.5f} at distance "
                             f"{r.params['distance']:g}, n = {r.params['n']}", dt, 60)
    assert ok and r.params["n"] == 10**6


def test_c08_gradient_check(report):
    (r,), dt = _timed(lambda: run_verify(CFG, ["gradcheck"]))
    ok = report(8, r.passed, f"max relative error {r.lhs:.3g} over {r.params['trials']} configurations "
                             f"(h={r.params['h']:g}, tol 1e-5)", dt, 30)
    assert ok and r.rhs == 1e-5


def test_c09_histogram_contrast(report):
    def run():
        sampler = SamplerSpec(128, 1.0, 0.0, 1.0, seed=0)
        out = {}
        for j, enc in enumerate([AttentionConfig("rope", rope=RoPEParams(128, 2e-6)),
                                 AttentionConfig("tapa", tapa=TAPAParams(128, 0.5, 0.1))]):
            spec = HistogramSpec((0, 100), (10_000, 10_100), 10_000, 50, enc, sampler)
            out[enc.method] = (run_bias_histogram(spec, stream_index=j), histogram_mean_oracle(spec))
        return out

    out, dt = _timed(run)
    (rope, rope_oracle), (tapa, _) = out["rope"], out["tapa"]
    contrast = abs(rope.mean) > 5 * abs(tapa.mean)
    agree = abs(rope.mean - rope_oracle) <= 4 * rope.ci95_half_width
    ok = report(9, contrast and agree,
                f"|RoPE mean| {abs(rope.mean):.4f} > 5 x |TAPA mean| {5 * abs(tapa.mean):.4f}; RoPE mean within "
                f"{abs(rope.mean - rope_oracle):.4f} of oracle {rope_oracle:.4f} (4 CI = {4 * rope.ci95_half_width:.4f})",
                dt, 60)
    assert ok


def test_c10_monte_carlo_vs_gamma(report):
    reps, dt = _timed(lambda: run_verify(CFG, ["rope_mc"]))
    points = [r for r in reps if r.name == "rope_mc_bias"]
    (ratio,) = [r for r in reps if r.name == "zeta_variance_ratio"]
    rho = ratio.params["ratio"]
    ok = report(10, len(points) == 12 and all(r.passed for r in points) and 0.3 <= rho <= 0.7,
                f"{sum(r.passed for r in points)}/{len(points)} grid points within 4 CI of gamma; "
                f"Var ratio on doubling D = {rho:.4f} in [0.3, 0.7]", dt, 120)
    assert ok


def test_c11_determinism(report, tmp_path, capsys):
    def run():
        codes = [main(["verify", "--seed", "0", "--workers", str(w), "--out", str(tmp_path / f"w{w}")])
                 for w in (1, 4)]
        capsys.readouterr()
        return codes

    codes, dt = _timed(run)
    names = ["report.json", "checks.csv"]
    same = all((tmp_path / "w1" / n).read_bytes() == (tmp_path / "w4" / n).read_bytes() for n in names)
    ok = report(11, same and codes == [0, 0], f"verify bundles byte-identical across 1 and 4 workers: {same}; "
                                               f"exit codes {codes}", dt, 600)
    assert ok
