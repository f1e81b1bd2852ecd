"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (streamed to the real stdout so long
campaigns show progress).  The statistical criteria run desk-scale Monte
Carlo campaigns and take tens of minutes; deselect with -m "not slow" during
development.
"""

import json
import math
import statistics
import sys
import time

import numpy as np
import pytest
from scipy import stats as sps

from fiberpath.campaign import (
    AlgorithmArm,
    CampaignSpec,
    assign_targets_retry,
    campaign_to_csv,
    run_campaign,
)
from fiberpath.geometry import (
    AngularPose,
    Point2,
    SDSS_ARM,
    SDSS_PITCH,
    Segment2,
    fiber_position,
    safe_beta_threshold,
    segment_min_distance,
)
from fiberpath.grid import build_hex_grid, set_folded_destination
from fiberpath.pathgen import SolveConfig, solve, trajectory_to_dict
from fiberpath.postprocess import (
    default_window,
    lateral_uncertainty,
    simplify_rdp,
    smooth_velocity,
    verify_trajectory,
)
from fiberpath.resolver import efficiency, solve_with_replacement
from fiberpath.seeding import derive_seed

from _oracles import random_segment_pairs, safe_beta_oracle, segment_distance_oracle

FOLD = AngularPose(10.0, 170.0)
BASE_SEED = 20260810


def report(name, checks):
    """checks: list of (label, ok, detail); prints one line, then asserts."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{label} {'ok' if good else 'FAIL'} ({info})"
                       for label, good, info in checks)
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}\n"
    sys.__stdout__.write(line)
    sys.__stdout__.flush()
    print(line, end="")
    assert ok, line


# ---------------------------------------------------------------------------
# shared campaign data
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def c4_data():
    """19 robots, 3.5 mm buffer, 0.5 deg, 200 trials per direction."""
    lay = build_hex_grid(19, SDSS_PITCH, SDSS_ARM, 3.5)
    t0 = time.perf_counter()
    out = {"rev_sizes": [], "fwd_sizes": [], "rev_dl": 0, "fwd_dl": 0,
           "safety_events": 0, "max_step_delta": 0.0}
    for direction in ("rev", "fwd"):
        for trial in range(200):
            seed = derive_seed(BASE_SEED, "c4", direction, trial)
            config, _ = assign_targets_retry(lay, seed)
            set_folded_destination(config, FOLD)
            if direction == "fwd":
                config.swap_endpoints()
            sc = SolveConfig(step_deg=0.5, greed=1.0, phobia=0.0,
                             direction="reverse" if direction == "rev" else "forward",
                             rng_seed=seed)
            res = solve(config, sc)
            rep = verify_trajectory(res.trajectories, lay, lay.cbuff, sc.dt)
            out["safety_events"] += rep.total_proximity_events
            for rp in res.trajectories.robots:
                if rp.alpha.shape[0] > 1:
                    out["max_step_delta"] = max(
                        out["max_step_delta"],
                        float(np.abs(np.diff(rp.alpha[:, 1])).max()),
                        float(np.abs(np.diff(rp.beta[:, 1])).max()))
            if not res.converged:
                out[f"{direction}_dl"] += 1
                out[f"{direction}_sizes"].append(len(res.deadlocked_robots))
    out["runtime"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def c5_records(tmp_path_factory):
    """547 robots, 0.1 deg, 50 trials per cell; both algorithms."""
    sys.__stdout__.write("running efficiency campaign (547 robots, "
                        "5 cells x 50 trials); expect ~1 h\n")
    sys.__stdout__.flush()
    spec = CampaignSpec(
        grid_sizes=[547],
        cbuffs=[1.5, 2.5, 3.5],
        step_degs=[0.1],
        algorithms=[AlgorithmArm.gc(), AlgorithmArm.mc()],
        trials=50,
        base_seed=derive_seed(BASE_SEED, "c5"),
    )
    # GC at 3.5 mm is outside the criterion's cells; skip its trials
    skip = {
        (547, 3.5, 0.1, "GC", 1.0, 0.0, t) for t in range(spec.trials)
    }
    t0 = time.perf_counter()
    path = tmp_path_factory.mktemp("c5") / "trials.csv"
    done = []
    for rec in run_campaign(spec, workers=2, skip_keys=skip):
        done.append(rec)
        if len(done) % 25 == 0:
            sys.__stdout__.write(f"  {len(done)}/250 trials\n")
            sys.__stdout__.flush()
    runtime = time.perf_counter() - t0
    return {"records": done, "runtime": runtime}


@pytest.fixture(scope="module")
def c6_records():
    """Fold-time cells: both algorithms at 1.5 mm, 1.0 deg, 20 trials."""
    spec = CampaignSpec(
        grid_sizes=[547],
        cbuffs=[1.5],
        step_degs=[1.0],
        algorithms=[AlgorithmArm.gc(), AlgorithmArm.mc()],
        trials=20,
        base_seed=derive_seed(BASE_SEED, "c6"),
    )
    return list(run_campaign(spec, workers=2))


@pytest.fixture(scope="module")
def c10_records():
    """tau_pg scaling cells over grid size at fixed parameters."""
    spec = CampaignSpec(
        grid_sizes=[37, 169, 547, 1027],
        cbuffs=[2.5],
        step_degs=[0.5],
        algorithms=[AlgorithmArm.gc()],
        trials=6,
        base_seed=derive_seed(BASE_SEED, "c10"),
    )
    return list(run_campaign(spec, workers=2))


def cell_effs(records, algorithm, cbuff):
    return [r.efficiency for r in records
            if r.algorithm == algorithm and r.cbuff_mm == cbuff and not r.error]


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_c1_segment_distance_oracle_equivalence(rng):
    n = 10_000
    s1, s2 = random_segment_pairs(n, rng)
    # warm both compiled paths outside the timed window
    segment_distance_oracle(s1[:2], s2[:2])
    segment_min_distance(Segment2(Point2(0, 0), Point2(1, 0)),
                         Segment2(Point2(0, 1), Point2(1, 1)))
    t0 = time.perf_counter()
    # the ternary refinement is exact for this convex objective, so the
    # scan density only guards the refinement; 300 x 300 fits the stated
    # time budget on two cores (the 1000 x 1000 scan runs in test_geometry)
    expected = segment_distance_oracle(s1, s2, grid=300)
    worst = 0.0
    for k in range(n):
        got = segment_min_distance(
            Segment2(Point2(s1[k, 0], s1[k, 1]), Point2(s1[k, 2], s1[k, 3])),
            Segment2(Point2(s2[k, 0], s2[k, 1]), Point2(s2[k, 2], s2[k, 3])),
        )
        worst = max(worst, abs(got - expected[k]))
    elapsed = time.perf_counter() - t0
    report("C1 segment distance vs sampling oracle", [
        ("max |diff| <= 1e-6 mm", worst <= 1e-6, f"worst {worst:.2e}"),
        ("10k pairs under 10 s", elapsed < 10.0, f"{elapsed:.1f}s"),
    ])


def test_c2_kinematics_spot_values():
    p = fiber_position(Point2(0, 0), SDSS_ARM, AngularPose(1.50, 1.48))
    lat = lateral_uncertainty(SDSS_ARM, 1.50, 1.48)
    report("C2 toleranced-pose kinematics", [
        ("fiber x 22.38 +/- 0.005", abs(p.x - 22.38) <= 0.005, f"{p.x:.4f}"),
        ("fiber y 0.97 +/- 0.005", abs(p.y - 0.97) <= 0.005, f"{p.y:.4f}"),
        ("lateral 0.97 +/- 0.005", abs(lat - 0.97) <= 0.005, f"{lat:.4f}"),
    ])


def test_c3a_safe_fold_threshold_matches_oracle():
    got = safe_beta_threshold(SDSS_ARM, SDSS_PITCH, 1.5)
    want = safe_beta_oracle(SDSS_ARM, SDSS_PITCH, 1.5)
    report("C3a safe fold threshold vs geometric oracle", [
        ("within 0.05 deg of oracle", abs(got - want) <= 0.05,
         f"got {got:.3f}, oracle {want:.3f}"),
    ])


def test_c3b_safe_fold_threshold_reference_value():
    # Known red: the quoted ~155 deg guideline is not reproducible from the
    # stated fold-containment geometry at the 1.5 mm physical buffer, which
    # gives ~146.8 deg.  The guideline value emerges at the 2.5 mm
    # operational buffer (~156.8 deg, see C3c).  Tested as stated.
    got = safe_beta_threshold(SDSS_ARM, SDSS_PITCH, 1.5)
    report("C3b safe fold threshold near 155 deg at 1.5 mm buffer", [
        ("within +/- 2 deg of 155", abs(got - 155.0) <= 2.0, f"got {got:.3f}"),
    ])


def test_c3c_safe_fold_threshold_at_operational_buffer():
    got = safe_beta_threshold(SDSS_ARM, SDSS_PITCH, 2.5)
    report("C3c safe fold threshold near 155 deg at 2.5 mm buffer", [
        ("within +/- 2 deg of 155", abs(got - 155.0) <= 2.0, f"got {got:.3f}"),
    ])


@pytest.mark.slow
def test_c4_forward_reverse_asymmetry(c4_data):
    d = c4_data
    rev_rate = d["rev_dl"] / 200.0
    fwd_rate = d["fwd_dl"] / 200.0
    rev_median = statistics.median(d["rev_sizes"]) if d["rev_sizes"] else 0
    fwd_median = statistics.median(d["fwd_sizes"]) if d["fwd_sizes"] else 0
    report("C4 forward/reverse asymmetry (19 robots, 3.5 mm, 0.5 deg)", [
        ("forward deadlock rate >= 90%", fwd_rate >= 0.90, f"{fwd_rate:.1%}"),
        ("typical forward deadlock >= 5 robots", fwd_median >= 5, f"median {fwd_median}"),
        ("reverse deadlock rate <= 20%", rev_rate <= 0.20, f"{rev_rate:.1%}"),
        ("typical reverse deadlock <= 6 robots", rev_median <= 6,
         f"median {rev_median}, max {max(d['rev_sizes'], default=0)}"),
        ("runtime < 5 min", d["runtime"] < 300.0, f"{d['runtime']:.0f}s"),
    ])


@pytest.mark.slow
def test_c5_efficiency_reproduction(c5_records):
    recs = c5_records["records"]
    gc15 = np.mean(cell_effs(recs, "GC", 1.5))
    gc25 = np.mean(cell_effs(recs, "GC", 2.5))
    mc15 = np.mean(cell_effs(recs, "MC", 1.5))
    mc25 = np.mean(cell_effs(recs, "MC", 2.5))
    mc35 = np.mean(cell_effs(recs, "MC", 3.5))
    errors = [r for r in recs if r.error]
    report("C5 efficiency reproduction (547 robots, 0.1 deg, 50 trials/cell)", [
        ("GC @1.5 mean >= 0.995", gc15 >= 0.995, f"{gc15:.4f}"),
        ("GC @2.5 mean >= 0.985", gc25 >= 0.985, f"{gc25:.4f}"),
        ("MC @2.5 mean >= 0.995", mc25 >= 0.995, f"{mc25:.4f}"),
        ("MC @3.5 mean >= 0.985", mc35 >= 0.985, f"{mc35:.4f}"),
        ("MC >= GC @1.5", mc15 >= gc15, f"{mc15:.4f} vs {gc15:.4f}"),
        ("MC >= GC @2.5", mc25 >= gc25, f"{mc25:.4f} vs {gc25:.4f}"),
        ("no trial errors", not errors, f"{len(errors)} errors"),
        ("runtime < 2 h", c5_records["runtime"] < 7200.0,
         f"{c5_records['runtime']:.0f}s"),
    ])


@pytest.mark.slow
def test_c6_fold_time(c6_records):
    gc = [r.fold_time_s for r in c6_records if r.algorithm == "GC" and not r.error]
    mc = [r.fold_time_s for r in c6_records if r.algorithm == "MC" and not r.error]
    gc_mean = float(np.mean(gc))
    mc_mean = float(np.mean(mc))
    report("C6 fold time (547 robots, 1.5 mm, 1.0 deg, 20 trials)", [
        ("GC mean in [9.8, 14.8] s", 9.8 <= gc_mean <= 14.8, f"{gc_mean:.2f}s"),
        ("MC mean in [18, 28] s", 18.0 <= mc_mean <= 28.0, f"{mc_mean:.2f}s"),
    ])


@pytest.mark.slow
def test_c7_safety_invariants(c4_data, c5_records, c6_records, grid19):
    recs = c5_records["records"] + c6_records
    events = sum(r.safety_proximity_events for r in recs if not r.error)
    worst_delta = max((r.safety_max_step_delta_deg - r.step_deg)
                      for r in recs if not r.error)
    # reflected replay of a converged solve passes the same check
    config, _ = assign_targets_retry(grid19, derive_seed(BASE_SEED, "c7"))
    set_folded_destination(config, FOLD)
    sc = SolveConfig(step_deg=0.5, rng_seed=derive_seed(BASE_SEED, "c7"))
    res = solve(config, sc)
    reflected = res.trajectories.reflected()
    rep = verify_trajectory(reflected, grid19, grid19.cbuff, sc.dt)
    report("C7 safety invariant suite", [
        ("no recorded pair at or under 2*cbuff", events == 0 and
         c4_data["safety_events"] == 0,
         f"{events + c4_data['safety_events']} events"),
        ("per-axis step deltas <= step", worst_delta <= 1e-9,
         f"max excess {worst_delta:.2e} deg"),
        ("c4 per-axis deltas <= step", c4_data["max_step_delta"] <= 0.5 + 1e-9,
         f"{c4_data['max_step_delta']:.6f} deg"),
        ("time-reflected trajectory clean", rep.total_proximity_events == 0,
         f"{rep.total_proximity_events} events"),
    ])


@pytest.mark.slow
def test_c8_determinism(tmp_path, grid19):
    # identical seeds give byte-identical trajectory JSON
    blobs = []
    for _ in range(2):
        config, _ = assign_targets_retry(grid19, 5)
        set_folded_destination(config, FOLD)
        res = solve(config, SolveConfig(step_deg=0.5, rng_seed=5))
        blobs.append(json.dumps(trajectory_to_dict(res.trajectories)))
    # identical seeds give identical campaign CSVs up to wall-clock columns
    from test_campaign import small_spec, strip_timing

    spec = small_spec(trials=3, base_seed=BASE_SEED)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    campaign_to_csv(spec, p1, workers=1)
    campaign_to_csv(spec, p2, workers=2)
    report("C8 determinism under identical seeds", [
        ("trajectory JSON byte-identical", blobs[0] == blobs[1],
         f"{len(blobs[0])} bytes"),
        ("campaign CSV identical ex wall-clock columns",
         strip_timing(p1) == strip_timing(p2), "workers 1 vs 2"),
    ])


@pytest.mark.slow
def test_c9_postprocess_pipeline():
    lay = build_hex_grid(547, SDSS_PITCH, SDSS_ARM, 2.5)
    window = default_window(0.1, 30.0)
    worst_points = 0
    total_events = 0
    unresolved = 0
    for trial in range(20):
        seed = derive_seed(BASE_SEED, "c9", trial)
        config, _ = assign_targets_retry(lay, seed)
        set_folded_destination(config, FOLD)
        sc = SolveConfig(step_deg=0.1, rng_seed=seed)
        rep = solve_with_replacement(config, sc)
        if not rep.converged:
            unresolved += 1
            continue
        smoothed = smooth_velocity(rep.final_outcome.trajectories, window)
        simplified = simplify_rdp(smoothed, 0.05)
        check = verify_trajectory(simplified, lay, 2.5 - 0.03, sc.dt / 4.0)
        worst_points = max(worst_points, check.max_points_alpha,
                           check.max_points_beta)
        total_events += check.total_proximity_events
        total_events += len(check.limit_violations) + len(check.speed_violations)
        sys.__stdout__.write(f"  c9 trial {trial + 1}/20: "
                            f"{max(check.max_points_alpha, check.max_points_beta)} pts\n")
        sys.__stdout__.flush()
    report("C9 post-processing pipeline (20 x 547-grid, 2.5 mm, 0.1 deg)", [
        ("all solves resolved", unresolved == 0, f"{unresolved} unresolved"),
        ("points per axis <= 1024", worst_points <= 1024, f"max {worst_points}"),
        ("verification at 2.47 mm clean", total_events == 0,
         f"{total_events} findings"),
    ])


@pytest.mark.slow
def test_campaign_trend_properties(c5_records, c6_records):
    """Statistical trends: efficiency non-increasing in crowding (one
    CI-overlapping inversion allowed) and greedy fold times at or below the
    stochastic ones."""
    recs = c5_records["records"]

    def mean_ci(algorithm, cbuff):
        vals = np.array(cell_effs(recs, algorithm, cbuff))
        half = 1.96 * vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
        return float(vals.mean()), half

    checks = []
    for algorithm, cbuffs in (("GC", [1.5, 2.5]), ("MC", [1.5, 2.5, 3.5])):
        stats_ = [mean_ci(algorithm, cb) for cb in cbuffs]
        inversions = 0
        for (m0, h0), (m1, h1) in zip(stats_, stats_[1:]):
            if m1 > m0 and (m1 - h1) > (m0 + h0):
                inversions += 1
        checks.append((f"{algorithm} efficiency non-increasing in cbuff",
                       inversions == 0,
                       " -> ".join(f"{m:.4f}" for m, _ in stats_)))
    gc_fold = np.mean([r.fold_time_s for r in c6_records
                       if r.algorithm == "GC" and not r.error])
    mc_fold = np.mean([r.fold_time_s for r in c6_records
                       if r.algorithm == "MC" and not r.error])
    checks.append(("GC fold time <= MC fold time", gc_fold <= mc_fold,
                   f"{gc_fold:.2f}s vs {mc_fold:.2f}s"))
    report("campaign trend properties", checks)


@pytest.mark.slow
def test_c10_runtime_scaling(c10_records, c6_records):
    sizes = sorted({r.n_robots for r in c10_records})
    means = [np.mean([r.tau_pg_s for r in c10_records
                      if r.n_robots == n and not r.error]) for n in sizes]
    slope, intercept, rvalue, _, _ = sps.linregress(sizes, means)
    gc_taus = [r.tau_pg_s for r in c6_records if r.algorithm == "GC" and not r.error]
    tau_547 = float(np.mean(gc_taus))
    report("C10 path-generation runtime scaling", [
        ("tau_pg linear in robot count, R^2 > 0.9", rvalue**2 > 0.9,
         f"R^2 {rvalue**2:.3f} over {sizes}"),
        ("positive slope", slope > 0, f"{slope:.2e} s/robot"),
        ("547 robots, 1.0 deg, GC: tau_pg < 30 s", tau_547 < 30.0,
         f"{tau_547:.2f}s"),
    ])
