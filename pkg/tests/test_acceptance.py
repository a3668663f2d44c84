"""Acceptance criteria, one test each.

Every test appends a PASS/FAIL line to the shared log (shown in the pytest
terminal summary and printed with ``-s``) before asserting.
"""
import json
import math
import time

import numpy as np
import pytest

from debtrank import RunConfig, cli, linear_fixed_point, run_contagion, run_original_debtrank, simulate_equity
from debtrank.reconstruction import (
    FitnessVectors,
    ReconstructionConfig,
    calibrate_z,
    density,
    prepare,
    ras_balance,
    reconstruct_ensemble,
    sample_rng,
    sample_topology,
)
from debtrank.errors import RASNotConverged, UnsupportedMargin
from debtrank.scenarios import alpha_sweep
from debtrank.spectral import Stability, spectral_radius

from helpers import (
    double_counting_map,
    random_system,
    random_tree_system,
    synthetic_records,
    true_radius,
    write_balance_csv,
)


def record(log, k, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {title} ({detail})"
    log.append(line)
    print(line)
    return ok


def test_1_equity_oracle_equivalence(acceptance_log):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst, unstable, length_gap = 0.0, 0, 0
    for _ in range(200):
        n = int(rng.integers(2, 51))
        s = random_system(rng, n, target_rho=float(rng.uniform(0.3, 2.5)))
        unstable += spectral_radius(s.leverage.lam).classification is Stability.UNSTABLE
        h1 = rng.random(n) * rng.choice([1e-3, 0.05, 0.5])
        traj = run_contagion(s, h1).trajectory
        implied = (s.equity0 - simulate_equity(s, h1)[1:]) / s.equity0
        k = min(len(traj), len(implied))
        length_gap = max(length_gap, abs(len(traj) - len(implied)))
        worst = max(worst, float(np.max(np.abs(traj[:k] - implied[:k]))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and length_gap <= 1 and 0 < unstable < 200
    record(acceptance_log, 1, "h vs equity-space losses per step", ok,
           f"max err {worst:.2e}, {unstable}/200 unstable, {elapsed:.1f}s")
    assert ok


def test_2_linear_fixed_point(acceptance_log, two_bank):
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 40))
        s = random_system(rng, n, target_rho=float(rng.uniform(0.05, 0.9)))
        lam = s.leverage.lam
        assert true_radius(lam) < 0.9
        h1 = rng.random(n)
        h1 *= 0.5 / linear_fixed_point(lam, h1).max()
        res = run_contagion(s, h1)
        assert res.converged and res.h_final.max() < 1
        worst = max(worst, float(np.max(np.abs(res.h_final - linear_fixed_point(lam, h1)))))
    fixture = run_contagion(two_bank, [0.1, 0.025]).h_final
    fixture_err = float(np.max(np.abs(fixture - [0.125, 0.05])))
    ok = worst < 1e-8 and fixture_err < 1e-10
    record(acceptance_log, 2, "converged h equals (I - lam)^-1 h(1)", ok,
           f"max err {worst:.2e} over 100 systems, two-bank err {fixture_err:.2e}")
    assert ok


def _tiny_shocks(rng, n, count):
    # strictly positive in every component, largest component 1e-4
    shocks = rng.uniform(0.05, 1.0, (count, n))
    return 1e-4 * shocks / shocks.max(axis=1, keepdims=True)


def test_3_stability_theorem(acceptance_log):
    rng = np.random.default_rng(303)
    cfg = RunConfig()
    start = time.perf_counter()
    missed, spurious, unconverged = 0, 0, 0
    for _ in range(50):
        n = int(rng.integers(2, 26))
        hot = random_system(rng, n, target_rho=float(rng.uniform(1.06, 3.0)))
        cold = random_system(rng, n, target_rho=float(rng.uniform(0.05, 0.94)))
        assert true_radius(hot.leverage.lam) > 1.05 and true_radius(cold.leverage.lam) < 0.95
        for h1 in _tiny_shocks(rng, n, 100):
            missed += not run_contagion(hot, h1, cfg).defaults
            res = run_contagion(cold, h1, cfg)
            spurious += bool(res.defaults)
            last_step = res.trajectory[-1] - res.trajectory[-2] if len(res.trajectory) > 1 else res.trajectory[-1]
            unconverged += not (res.converged and last_step.max() < cfg.tol)
    elapsed = time.perf_counter() - start
    ok = missed == 0 and spurious == 0 and unconverged == 0 and elapsed < 60
    record(acceptance_log, 3, "rho > 1 always defaults, rho < 1 never does", ok,
           f"{missed} unstable runs without default, {spurious} stable runs with default, "
           f"{unconverged} stable runs unconverged, {elapsed:.1f}s")
    assert ok


def test_4_lower_bound_and_tree_equality(acceptance_log):
    rng = np.random.default_rng(404)
    # run to machine precision so the generalized run is not truncated early
    cfg = RunConfig(tol=1e-15)
    worst_gap = -math.inf
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        s = random_system(rng, n, target_rho=float(rng.uniform(0.1, 3.0)),
                          link_density=float(rng.uniform(0.1, 0.6)))
        h1 = rng.random(n) * (rng.random(n) < 0.6) * rng.choice([1e-3, 0.1, 1.0])
        gap = run_original_debtrank(s, h1, cfg).h_final - run_contagion(s, h1, cfg).h_final
        worst_gap = max(worst_gap, float(gap.max()))
    tree_err = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 40))
        s = random_tree_system(rng, n)
        h1 = np.zeros(n)
        h1[rng.integers(n)] = rng.uniform(0.01, 1.0)
        diff = run_original_debtrank(s, h1, cfg).h_final - run_contagion(s, h1, cfg).h_final
        tree_err = max(tree_err, float(np.abs(diff).max()))
    ok = worst_gap <= 1e-12 and tree_err <= 1e-12
    record(acceptance_log, 4, "original DebtRank is a lower bound, equal on trees", ok,
           f"max(original - generalized) {worst_gap:.2e} over 1000, tree err {tree_err:.2e} over 200")
    assert ok


def test_5_double_counting(acceptance_log):
    rng = np.random.default_rng(505)
    exceeded, smallest_margin = 0, math.inf
    tested = 0
    while tested < 100:
        n = int(rng.integers(3, 30))
        s = random_system(rng, n, target_rho=float(rng.uniform(0.1, 0.9)))
        lam = s.leverage.lam
        two_hop = lam @ lam
        sources = np.flatnonzero(two_hop.sum(axis=0) > 0)
        if not sources.size:
            continue
        src = int(rng.choice(sources))
        h1 = np.zeros(n)
        h1[src] = 1e-3
        res = run_contagion(s, h1)
        dc = double_counting_map(lam, h1, res.steps_to_convergence)
        margin = float(np.max(dc - res.h_final))
        smallest_margin = min(smallest_margin, margin)
        exceeded += margin > 0
        tested += 1
    ok = exceeded == 100
    record(acceptance_log, 5, "(I + lam)^t h(1) double counts", ok,
           f"{exceeded}/100 systems exceed, smallest margin {smallest_margin:.2e}")
    assert ok


SYNTH_183 = synthetic_records(np.random.default_rng(606), 183)


def test_6_ras_margins_and_sparsity(acceptance_log):
    cfg = ReconstructionConfig(ensemble_size=100, seed=6)
    records, _, p = prepare(SYNTH_183, cfg)
    u = np.array([r.interbank_assets_total for r in records])
    v = np.array([r.interbank_liabilities_total for r in records])
    systems = reconstruct_ensemble(SYNTH_183, cfg)
    worst, pattern_mismatch, redraws = 0.0, 0, 0
    for k, system in enumerate(systems):
        # replay the slot's stream to recover the adjacency it settled on
        rng = sample_rng(cfg.seed, k)
        while True:
            adj = sample_topology(p, rng)
            try:
                ras_balance(adj, u, v, tol=cfg.ras_tol, max_iter=cfg.ras_max_iter)
                break
            except (UnsupportedMargin, RASNotConverged):
                redraws += 1
        a = system.exposures.a
        worst = max(worst,
                    float(np.max(np.abs(a.sum(axis=1) - u) / u)),
                    float(np.max(np.abs(a.sum(axis=0) - v) / v)))
        pattern_mismatch += not np.array_equal(a > 0, adj > 0)
    ok = worst <= 1e-6 and pattern_mismatch == 0
    record(acceptance_log, 6, "RAS margins and sparsity on 183 banks", ok,
           f"max relative margin err {worst:.2e}, {pattern_mismatch}/100 pattern mismatches, {redraws} redraws")
    assert ok


def test_7_density_calibration(acceptance_log):
    n, k, target = 183, 100, 0.05
    systems = reconstruct_ensemble(SYNTH_183, ReconstructionConfig(ensemble_size=k, seed=7, target_density=target))
    mean = float(np.mean([density(s.exposures.a) for s in systems]))
    # each of the k * n(n-1) ordered pairs is one Bernoulli trial at rate ~target
    sd = math.sqrt(target * (1 - target) / (k * n * (n - 1)))
    z = calibrate_z(FitnessVectors(np.array([0.5, 0.5]), np.array([0.5, 0.5])), 0.5)
    ok = abs(mean - target) <= 3 * sd and abs(z - 4.0) <= 1e-9
    record(acceptance_log, 7, "density calibration", ok,
           f"mean density {mean:.5f}, |diff| {abs(mean - target) * 100:.4f}pp <= 3 sd {3 * sd * 100:.4f}pp; "
           f"z fixture err {abs(z - 4):.1e}")
    assert ok


def _saturation(rows):
    return next((r["alpha"] for r in rows if r["final_loss_mean"] >= 0.999), math.inf)


def test_8_scenario_phenomenology(acceptance_log):
    alphas = [round(0.0025 * j, 4) for j in range(1, 101)]
    found = {}
    problems = []
    for label, equity_ratio in (("high", 0.03), ("low", 0.10)):
        records = synthetic_records(np.random.default_rng(808), 183, equity_ratio=equity_ratio)
        systems = reconstruct_ensemble(records, ReconstructionConfig(ensemble_size=10, seed=8))
        rows = alpha_sweep(systems, alphas)
        finals = [r["final_loss_mean"] for r in rows]
        amps = [r["amplification_min"] for r in rows]
        if any(b < a - 1e-12 for a, b in zip(finals, finals[1:])):
            problems.append(f"{label}: final loss decreases")
        if min(amps) < 1 - 1e-12:
            problems.append(f"{label}: amplification below 1")
        if abs(rows[-1]["amplification_max"] - 1) > 1e-12:
            problems.append(f"{label}: amplification {rows[-1]['amplification_max']} at alpha={alphas[-1]}")
        found[label] = (_saturation(rows), float(np.mean([spectral_radius(s.leverage.lam).spectral_radius
                                                          for s in systems])), max(amps))
    (sat_hi, rho_hi, amp_hi), (sat_lo, rho_lo, amp_lo) = found["high"], found["low"]
    if not sat_hi < sat_lo < math.inf:
        problems.append("high leverage does not saturate first")
    ok = not problems
    record(acceptance_log, 8, "sweep monotone, amplification >= 1 and -> 1, high leverage saturates first", ok,
           f"saturation alpha {sat_hi} (mean rho {rho_hi:.2f}) vs {sat_lo} (mean rho {rho_lo:.2f}); "
           + ("; ".join(problems) or "no violations"))
    assert ok


SUBCOMMANDS = {
    "reconstruct": [],
    "stability": [],
    "uniform": ["--alpha", "0.01", "--trace"],
    "impact": ["--alpha", "0.02"],
    "sweep": ["--alphas", "0.005,0.01,0.05"],
}


def _outputs(folder):
    return {
        p.relative_to(folder).as_posix(): p.read_bytes()
        for p in sorted(folder.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }


def test_9_manifest_determinism(acceptance_log, tmp_path, capsys, monkeypatch):
    bal = write_balance_csv(tmp_path / "banks.csv", synthetic_records(np.random.default_rng(909), 40))
    monkeypatch.chdir(tmp_path)
    failures = []
    for name, extra in SUBCOMMANDS.items():
        first = tmp_path / f"{name}-1"
        argv = [name, "--balance", "banks.csv", "--ensemble", "4", "--density", "0.15",
                "--seed", "11", "--threads", "1", "--out", str(first)] + extra
        codes = [cli.main(argv)]
        manifest = first / "manifest.json"
        replays = []
        for threads in ("1", "3"):
            out = tmp_path / f"{name}-replay-{threads}"
            codes.append(cli.main([name, "--config", str(manifest), "--threads", threads, "--out", str(out)]))
            replays.append(out)
        capsys.readouterr()
        if any(codes):
            failures.append(f"{name}: exit codes {codes}")
            continue
        base = _outputs(first)
        cfg = json.loads(manifest.read_text())["config"]
        for out in replays:
            if _outputs(out) != base:
                failures.append(f"{name}: {out.name} differs")
            replay_cfg = json.loads((out / "manifest.json").read_text())["config"]
            if {k: v for k, v in replay_cfg.items() if k not in ("out", "threads")} != \
                    {k: v for k, v in cfg.items() if k not in ("out", "threads")}:
                failures.append(f"{name}: manifest config drifted")
    ok = not failures
    record(acceptance_log, 9, "re-running from the manifest is byte-identical", ok,
           f"{len(SUBCOMMANDS)} subcommands, threads 1 and 3; " + ("; ".join(failures) or "all identical"))
    assert ok
