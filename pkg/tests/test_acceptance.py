"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also collected in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from pmcoverage.cli import main as cli_main
from pmcoverage.coverage import CoverageAccumulator
from pmcoverage.diffusion import DiffusionParams, Hedac, PeronaMalik, Smc, diffuse, hedac_potential
from pmcoverage.oracles import brute_force_E
from pmcoverage.sim import SimConfig, derive_seed, experiment, run
from pmcoverage.spectral import Grid2D, fft, gradient, make_workspace

from conftest import STEP_HEIGHT, band_limited, peak_gradient, step_edge

# desk-scale protocol: 64 x 64 cells of unit size, 10 agents, 1000 steps
DESK = SimConfig()
METHODS = [PeronaMalik(), Hedac(), Smc()]
N_RUNS = 5

_experiments = {}


def desk_experiment(scenario):
    if scenario not in _experiments:
        t0 = time.perf_counter()
        s = experiment(DESK.replace(scenario=scenario), METHODS, N_RUNS, shared_initial_positions=True)
        _experiments[scenario] = (s, time.perf_counter() - t0)
    return _experiments[scenario]


@pytest.mark.criterion(1, "spectral gradient exactness")
def test_criterion_1_spectral_exactness(criterion):
    t0 = time.perf_counter()
    g = Grid2D(128, 128)
    ws = make_workspace(g)
    x, y = g.mesh()
    fx, fy = gradient(np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y), ws)
    ex = 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(4 * np.pi * y)
    ey = -4 * np.pi * np.sin(2 * np.pi * x) * np.sin(4 * np.pi * y)
    err = max(np.abs(fx - ex).max(), np.abs(fy - ey).max())
    dt = time.perf_counter() - t0
    criterion.check(err < 1e-10, f"max error {err:.2e} (< 1e-10)")
    criterion.check(dt < 1.0, f"{dt:.3f}s (< 1s)")


@pytest.mark.criterion(2, "conservation")
def test_criterion_2_conservation(criterion):
    t0 = time.perf_counter()
    r = np.random.default_rng(derive_seed(2, 0))
    g = Grid2D(64, 64, 64.0, 64.0)
    ws = make_workspace(g)
    worst = 0.0
    for _ in range(100):
        e = r.standard_normal(g.shape) * r.uniform(0.01, 10) + r.uniform(-5, 5)
        p = DiffusionParams(K=10 ** r.uniform(-3, 3), alpha=r.uniform(0, 2), dt=r.uniform(0.005, 0.1))
        p = DiffusionParams(p.K, p.alpha, p.dt, tau=p.dt * int(r.integers(1, 25)))
        out = diffuse(e, p, ws)
        worst = max(worst, abs(out.mean() - e.mean()) / np.abs(e).max())
    criterion.check(worst < 1e-12, f"mean drift {worst:.1e} relative (< 1e-12)")

    acc = CoverageAccumulator(g, 10)
    for _ in range(10_000):
        acc.deposit(r.random((10, 2)) * 64.0, 0.05)
    rel = abs(acc.visit_time.sum() - 10 * acc.total_time) / (10 * acc.total_time)
    criterion.check(rel < 1e-9, f"visit-time bookkeeping {rel:.1e} relative after 1e4 deposits (< 1e-9)")
    dt = time.perf_counter() - t0
    criterion.check(dt < 10.0, f"{dt:.2f}s (< 10s)")


@pytest.mark.criterion(3, "heat-equation reduction")
def test_criterion_3_heat_reduction(criterion):
    t0 = time.perf_counter()
    g = Grid2D(64, 64, 64.0, 64.0)
    ws = make_workspace(g)
    r = np.random.default_rng(derive_seed(3, 0))
    nyq = np.zeros(ws.k_sq.shape, dtype=bool)
    nyq[g.nx // 2, :] = True
    nyq[:, g.ny // 2] = True
    e_hat = fft(r.standard_normal(g.shape))
    e_hat[nyq] = 0
    from pmcoverage.spectral import ifft
    e = ifft(e_hat, ws)
    worst = 0.0
    for alpha in (0.0, 0.5):
        p = DiffusionParams(K=1e9, alpha=alpha, dt=0.05, tau=0.05)
        out_hat = fft(diffuse(e, p, ws))
        factor = (1 - p.dt * ws.k_sq) / (1 + p.dt * alpha * ws.k_sq)
        worst = max(worst, np.abs(out_hat - factor * fft(e))[~nyq].max() / np.abs(fft(e)).max())
    criterion.check(worst < 1e-10, f"per-mode amplification error {worst:.1e} (< 1e-10)")

    smooth = band_limited(g, r, 4)
    exact = hedac_potential(smooth, 1.0, DiffusionParams(), ws)
    errs = []
    for dt in (0.05, 0.025, 0.0125):
        out = diffuse(smooth, DiffusionParams(K=1e9, alpha=0.0, dt=dt, tau=0.9), ws)
        errs.append(np.abs(out - exact).max())
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    criterion.check(all(0.9 < o < 1.1 for o in orders) and errs[0] > errs[1] > errs[2],
                    "heat-kernel error " + ", ".join(f"{v:.2e}" for v in errs)
                    + " (orders " + ", ".join(f"{o:.3f}" for o in orders) + ")")
    dt = time.perf_counter() - t0
    criterion.check(dt < 5.0, f"{dt:.2f}s (< 5s)")


# calibrated from the run below at STEP_HEIGHT = 0.6 and pinned
EDGE_RATIO_PINNED = 1.5892


@pytest.mark.criterion(4, "edge preservation")
def test_criterion_4_edge_preservation(criterion):
    t0 = time.perf_counter()
    g = Grid2D(64, 64, 64.0, 64.0)
    ws = make_workspace(g)
    e = step_edge(g)
    Ks = (0.01, 0.1, 1.0, 10.0, 1e9)
    peaks = [peak_gradient(diffuse(e, DiffusionParams(K=K, alpha=0.5, dt=0.05, tau=0.9), ws), ws) for K in Ks]
    criterion.note(f"step height {STEP_HEIGHT}, peaks " + ", ".join(f"K={K:g}:{p:.4f}" for K, p in zip(Ks, peaks)))
    criterion.check(all(a > b for a, b in zip(peaks, peaks[1:])), "strictly decreasing in K")
    ratio = peaks[1] / peaks[-1]
    criterion.check(ratio >= 1.5, f"K=0.1 / linear = {ratio:.4f} (>= 1.5)")
    criterion.check(abs(ratio - EDGE_RATIO_PINNED) < 1e-3, f"pinned {EDGE_RATIO_PINNED}")
    dt = time.perf_counter() - t0
    criterion.check(dt < 10.0, f"{dt:.2f}s (< 10s)")


@pytest.mark.slow
@pytest.mark.criterion(5, "oracle equivalence")
def test_criterion_5_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    from test_oracles import evolve, smooth_field
    from pmcoverage.oracles import fd_stability_bound
    T = 2e-3
    gaps = []
    for n in (16, 32, 64):
        steps = int(math.ceil(T / (0.5 * fd_stability_bound(1.0 / n, 0.5))))
        sp, fd = evolve(smooth_field(n), n, T / steps, steps)
        gaps.append(np.abs(sp - fd).max())
    rates = [gaps[i] / gaps[i + 1] for i in range(2)]
    criterion.check(all(r > 3.0 for r in rates),
                    "spectral/FD gap " + ", ".join(f"{v:.2e}" for v in gaps)
                    + " shrinks x" + ", x".join(f"{v:.2f}" for v in rates))

    # ten full-length runs spread over methods and scenarios
    jobs = [(PeronaMalik(), "circle_square"), (PeronaMalik(), "bimodal_gaussian"), (PeronaMalik(), "gaussian_stripe"),
            (Hedac(), "circle_square"), (Hedac(), "bimodal_gaussian"), (Hedac(), "gaussian_stripe"),
            (Hedac(), "circle_square"), (Smc(), "circle_square"), (Smc(), "bimodal_gaussian"),
            (Smc(), "gaussian_stripe")]
    worst = 0.0
    for k, (m, scen) in enumerate(jobs):
        res = run(DESK.replace(method=m, scenario=scen, seed=derive_seed(5, k)))
        g = res.config.grid
        E = brute_force_E(res.trajectories, res.final_fields["mu"], g.nx, g.ny, g.lx, g.ly)
        worst = max(worst, abs(E - res.final_error))
    criterion.check(worst < 1e-9, f"brute-force vs incremental E(final) max diff {worst:.1e} over 10 runs (< 1e-9)")
    dt = time.perf_counter() - t0
    criterion.check(dt < 120.0, f"{dt:.1f}s (< 120s)")


@pytest.mark.slow
@pytest.mark.criterion(6, "circle-square ordering")
def test_criterion_6_circle_square_ordering(criterion):
    s, dt = desk_experiment("circle_square")
    fin = s.final_means()
    criterion.note("mean E(final) " + ", ".join(f"{m}={fin[m]:.5f}" for m in s.methods))
    criterion.check(fin["pm"] < fin["hedac"] < fin["smc"], "PM < HEDAC < SMC")
    half = DESK.n_steps // 2
    below = sum(bool(np.all(p.error_series[half:] < q.error_series[half:]))
                for p, q in zip(s.runs["pm"], s.runs["smc"]))
    criterion.check(below >= 4, f"PM below SMC over the final half in {below}/5 runs (>= 4)")
    criterion.check(dt < 300.0, f"{dt:.1f}s (< 300s)")


@pytest.mark.slow
@pytest.mark.criterion(7, "bimodal near-parity")
def test_criterion_7_bimodal_parity(criterion):
    s, dt = desk_experiment("bimodal_gaussian")
    fin = s.final_means()
    gap_h = abs(fin["pm"] - fin["hedac"])
    gap_s = abs(fin["pm"] - fin["smc"])
    criterion.note("mean E(final) " + ", ".join(f"{m}={fin[m]:.5f}" for m in s.methods))
    criterion.check(gap_h < gap_s, f"|PM-HEDAC|={gap_h:.5f} < |PM-SMC|={gap_s:.5f}")
    criterion.check(dt < 300.0, f"{dt:.1f}s (< 300s)")


@pytest.mark.slow
@pytest.mark.criterion(8, "stability on all scenarios")
def test_criterion_8_stability(criterion):
    total = 0.0
    bad = []
    for scen in ("circle_square", "bimodal_gaussian", "gaussian_stripe"):
        s, dt = desk_experiment(scen)
        total += dt
        for m in s.methods:
            for k, r in enumerate(s.runs[m]):
                if isinstance(r, str):
                    bad.append(f"{scen}/{m}/{k}: {r}")
                    continue
                finite = all(np.all(np.isfinite(v)) for v in (r.error_series, r.trajectories,
                                                              *r.final_fields.values()))
                if not finite or not r.final_error < r.error_series[0]:
                    bad.append(f"{scen}/{m}/{k}")
    criterion.check(not bad, f"45 runs finite with E(final) < E(0)" + (f"; failures: {bad}" if bad else ""))
    criterion.check(total < 300.0, f"{total:.1f}s (< 300s)")


@pytest.mark.criterion(9, "determinism of compare")
def test_criterion_9_determinism(criterion, tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"out{k}"
        code = cli_main(["compare", "--out-dir", str(d), "--seed", "11", "--runs", "2",
                         "--override", "run.n_steps=100"])
        assert code == 0
        outs.append((d / "summary.csv").read_bytes())
    criterion.check(outs[0] == outs[1], f"summary.csv byte-identical ({len(outs[0])} bytes)")
