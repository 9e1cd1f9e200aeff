//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flatside_core::analysis::{
    collar_residuals, dual_fits, exponent_fit, holder_report, interface_kinematics, mu_distance,
    pinch_and_drift, Analysis, ConditionReport, MuPoint, SuiteOptions,
};
use flatside_core::io::{scenario_build, FrameSnapshot, ScenarioSpec, Snapshot};
use flatside_core::solver::{
    radial_speed, run_flow, sphere_exact_radius, GraphGrid, RadialProfile, RunOptions, State,
};
use flatside_core::transforms::{
    dual_rhs, from_pressure, hodograph_rhs, hodograph_solve, legendre_brute_force,
    legendre_transform, pressure_rhs, rescaled_zeta, residual_dual, residual_hodograph,
    residual_pressure, residual_zeta, to_pressure, zeta_rhs, HodographOptions, PolarGrid,
    RadialSampler, TransformFrame,
};
use flatside_core::{classify_g_regularity, classify_v_regularity, derive_exponents, FlowParams};

const T: f64 = 0.05;

struct Run {
    params: FlowParams,
    states: Vec<State>,
    seconds: f64,
}

impl Run {
    fn at(&self, t: f64) -> &State {
        self.states
            .iter()
            .find(|s| (s.time() - t).abs() <= 1e-12)
            .unwrap_or_else(|| panic!("no snapshot at {t}"))
    }

    fn triple(&self, opts: &SuiteOptions) -> [&State; 3] {
        [self.at(T - opts.delta), self.at(T), self.at(T + opts.delta)]
    }

    fn up_to(&self, t: f64) -> Vec<&State> {
        self.states
            .iter()
            .filter(|s| s.time() <= t + 1e-12)
            .collect()
    }
}

fn suite() -> SuiteOptions {
    SuiteOptions {
        seed: 1,
        ..SuiteOptions::default()
    }
}

fn reference_run(grid: usize) -> Run {
    let clock = Instant::now();
    let opts = suite();
    let analyses = [
        Analysis::Exponent,
        Analysis::Dual,
        Analysis::Residuals,
        Analysis::Pinch,
        Analysis::Kinematics,
        Analysis::Holder,
    ];
    let times = opts.required_times(&analyses, T);
    let (state, params) = scenario_build(&ScenarioSpec::radial_flat_disk(grid)).unwrap();
    let traj = run_flow(
        &state,
        &params,
        &RunOptions::new(T + opts.delta, times),
        None,
    )
    .map_err(|f| f.error)
    .unwrap();
    Run {
        params,
        states: traj.snapshots,
        seconds: clock.elapsed().as_secs_f64(),
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn worst(report: &ConditionReport) -> String {
    report
        .checks
        .iter()
        .map(|c| {
            let m: Vec<String> = c
                .measured
                .iter()
                .map(|(k, v)| format!("{k}={v:.4}"))
                .collect();
            format!("{} [{}]", c.name, m.join(" "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn sphere_rhs_identity() -> Outcome {
    let params = derive_exponents(2, 1.0).unwrap();
    let k = params.n as f64 * params.p;
    let mut err: f64 = 0.0;
    for t in [0.0, 0.05, 0.1, 0.2, 0.3] {
        let r = sphere_exact_radius(&params, 1.0, t).unwrap();
        let r_dot = -r.powf(-k);
        for i in 0..=1000 {
            let rho = 0.5 * r * i as f64 / 1000.0;
            let root = (r * r - rho * rho).sqrt();
            let v_t = -r * r_dot / root;
            let v_r = rho / root;
            let v_rr = r * r / root.powi(3);
            err = err.max((v_t - radial_speed(v_r, v_rr, rho, &params)).abs());
        }
    }
    outcome(
        err <= 1e-6,
        format!("max |V_t - rhs| = {err:.3e} (tol 1e-6)"),
    )
}

fn sphere_cap_evolution() -> Outcome {
    let (state, params) = scenario_build(&ScenarioSpec::cap_sphere(512)).unwrap();
    let times: Vec<f64> = (1..=10).map(|k| 0.01 * k as f64).collect();
    let mut opts = RunOptions::new(0.1, times.clone());
    opts.dt_policy.cfl = 0.4;
    let traj = run_flow(&state, &params, &opts, None)
        .map_err(|f| f.error)
        .unwrap();
    let mut rel: f64 = 0.0;
    for t in times {
        let s = traj.snapshots.iter().find(|s| s.time() == t).unwrap();
        let exact = 1.0 - sphere_exact_radius(&params, 1.0, t).unwrap();
        rel = rel.max((s.apex_height() - exact).abs() / exact);
    }
    outcome(
        rel <= 0.01,
        format!("max apex relative error up to t=0.1: {rel:.3e} (tol 1e-2)"),
    )
}

fn legendre_equivalence() -> Outcome {
    let params = derive_exponents(2, 1.0).unwrap();
    let collar = |[x, y]: [f64; 2]| ((x * x + y * y).sqrt() - 1.0).max(0.0).powi(2);
    let cap = |[x, y]: [f64; 2]| 2.5 - (6.25 - x * x - y * y).sqrt();
    let (perturbed, _) = scenario_build(&ScenarioSpec::perturbed_flat_disk(64)).unwrap();
    let profiles = [
        State::Graph(GraphGrid::from_fn(2.0, 65, 0.0, collar).unwrap()),
        State::Graph(GraphGrid::from_fn(1.5, 65, 0.0, cap).unwrap()),
        perturbed,
    ];
    let grid = PolarGrid::uniform(16, 33, 1.5).unwrap();
    let mut mismatched = 0;
    for s in &profiles {
        let fast = legendre_transform(s, &grid, &params).unwrap().values;
        let slow = legendre_brute_force(s, &grid);
        mismatched += fast
            .iter()
            .zip(&slow)
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count();
    }
    outcome(
        mismatched == 0,
        format!(
            "{mismatched} of {} values differ from the naive sup",
            3 * grid.n_theta() * grid.n_r()
        ),
    )
}

fn exponent_recovery(runs: &[&Run]) -> Outcome {
    let opts = suite();
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs {
        let fit = exponent_fit(run.at(T), &run.params, opts.fit_window).unwrap();
        ok &= fit.within(2.0, 0.10) && fit.r_squared >= 0.99;
        parts.push(format!(
            "m={}: {:.4} (r2 {:.5})",
            grid_of(run),
            fit.exponent,
            fit.r_squared
        ));
    }
    outcome(ok, format!("{} target 2 +/- 10%", parts.join(", ")))
}

fn grid_of(run: &Run) -> usize {
    (2.0 / run.states[0].step()).round() as usize
}

fn dual_asymptotics(runs: &[&Run]) -> Outcome {
    let opts = suite();
    let mut ok = true;
    let mut parts = Vec::new();
    for run in runs {
        let [speed, tangential] = dual_fits(run.triple(&opts), &run.params, &opts).unwrap();
        ok &= (speed.exponent - 1.0).abs() <= 0.15 && (tangential.exponent + 1.0).abs() <= 0.15;
        parts.push(format!(
            "m={}: -u_t {:.4}, u_xixi {:.4}",
            grid_of(run),
            speed.exponent,
            tangential.exponent
        ));
    }
    outcome(ok, format!("{} targets 1, -1 +/- 0.15", parts.join("; ")))
}

fn residual_convergence(coarse: &Run, fine: &Run) -> Outcome {
    let opts = suite();
    let a = collar_residuals(coarse.triple(&opts), &coarse.params, &opts).unwrap();
    let b = collar_residuals(fine.triple(&opts), &fine.params, &opts).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (x, y) in a.iter().zip(&b) {
        let ratio = x.sup / y.sup;
        ok &= ratio >= 1.5 && y.evaluated > 0;
        parts.push(format!(
            "{} {:.3e} -> {:.3e} (x{:.2})",
            x.name, x.sup, y.sup, ratio
        ));
    }
    outcome(ok, format!("{}; need x1.5", parts.join(", ")))
}

fn pinch_drift(run: &Run) -> Outcome {
    let opts = suite();
    let slices: Vec<&State> = (1..=opts.pinch_slices)
        .map(|k| run.at(T * k as f64 / opts.pinch_slices as f64))
        .collect();
    let report = pinch_and_drift(&slices, &run.params, &opts).unwrap();
    outcome(report.passed(), worst(&report))
}

fn kinematics(run: &Run) -> Outcome {
    let report = interface_kinematics(&run.up_to(T), run.params.n, &suite()).unwrap();
    outcome(report.passed(), worst(&report))
}

fn holder_stability(coarse: &Run, fine: &Run) -> Outcome {
    let opts = suite();
    let total = |run: &Run| {
        let slices: Vec<&State> = (0..3)
            .rev()
            .map(|k| run.at(T - k as f64 * opts.holder_spacing))
            .collect();
        holder_report(&slices, &run.params, &opts).unwrap().total
    };
    let (a, b) = (total(coarse), total(fine));
    let factor = a.max(b) / a.min(b);
    outcome(
        factor.is_finite() && factor <= 2.0,
        format!("total {a:.4} (256) vs {b:.4} (512), factor {factor:.3} (tol 2)"),
    )
}

fn classifier_table() -> Outcome {
    // (n, p, g smooth or (k, beta), v smooth or (k, alpha))
    type Entry = Option<(u32, f64)>;
    let table: [(usize, f64, Entry, Entry); 8] = [
        (2, 0.6, None, None),
        (2, 0.75, None, Some((2, 0.5))),
        (2, 1.0, None, None),
        (2, 2.0, Some((1, 2.0 / 3.0)), Some((1, 2.0 / 3.0))),
        (3, 0.6, Some((1, 1.0)), Some((1, 0.75))),
        (3, 0.75, Some((1, 0.4)), Some((1, 0.6))),
        (3, 1.0, None, Some((1, 0.5))),
        (3, 2.0, Some((0, 1.0)), Some((1, 0.4))),
    ];
    let agrees = |c: &flatside_core::RegularityClass, e: &Entry| match e {
        None => c.smooth,
        Some((k, a)) => !c.smooth && c.order == *k && (c.holder_exponent - a).abs() <= 1e-12,
    };
    let mut wrong = Vec::new();
    for (n, p, g, v) in &table {
        let params = derive_exponents(*n, *p).unwrap();
        let cg = classify_g_regularity(&params).unwrap();
        let cv = classify_v_regularity(&params).unwrap();
        if !agrees(&cg, g) || !agrees(&cv, v) {
            wrong.push(format!("(n={n}, p={p})"));
        }
    }
    let split = {
        let params = derive_exponents(2, 0.75).unwrap();
        classify_g_regularity(&params).unwrap().smooth
            && !classify_v_regularity(&params).unwrap().smooth
    };
    outcome(
        wrong.is_empty() && split,
        format!(
            "8 entries, mismatches {wrong:?}, split case n=2 p=3/4 {}",
            if split { "ok" } else { "wrong" }
        ),
    )
}

fn metric_and_evaluators() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let point = |rng: &mut ChaCha8Rng, n: usize| {
        let x: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        MuPoint::new(x, rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0)).unwrap()
    };
    let mut metric_bad = 0;
    for i in 0..10_000 {
        let n = 2 + i % 3;
        let (a, b, c) = (point(&mut rng, n), point(&mut rng, n), point(&mut rng, n));
        let d = |x: &MuPoint, y: &MuPoint| mu_distance(x, y).unwrap();
        let ab = d(&a, &b);
        let ok = d(&a, &a) == 0.0
            && ab >= 0.0
            && ab == d(&b, &a)
            && d(&a, &c) <= ab + d(&b, &c) + 1e-12 * (1.0 + ab);
        metric_bad += usize::from(!ok);
    }

    let params = derive_exponents(2, 1.0).unwrap();
    let profile =
        RadialProfile::from_fn(2.0, 257, 0.0, |rho| (rho - 0.8).max(0.0).powi(2)).unwrap();
    let s = State::Radial(profile);
    let mut residuals = Vec::new();

    let g = to_pressure(&s, &params).unwrap();
    let g_t: Vec<f64> = pressure_rhs(&g, &params, 0.02)
        .iter()
        .map(|f| f.unwrap_or(1.0))
        .collect();
    residuals.push(residual_pressure(&g, &g_t, &params, 0.02).unwrap());

    let u = legendre_transform(&s, &PolarGrid::uniform(1, 41, 1.0).unwrap(), &params).unwrap();
    let u_t: Vec<f64> = dual_rhs(&u, &params, 0.2, 0.8)
        .iter()
        .map(|f| f.unwrap_or(-1.0))
        .collect();
    residuals.push(residual_dual(&u, &u_t, &params, 0.2, 0.8).unwrap());

    let grid = PolarGrid::for_zeta(1, 0.2, 1.0, 41, params.sigma_p).unwrap();
    let z = rescaled_zeta(&legendre_transform(&s, &grid, &params).unwrap(), &params).unwrap();
    let z_t: Vec<f64> = zeta_rhs(&z, &params, 0.3, 0.9)
        .iter()
        .map(|f| f.unwrap_or(0.0))
        .collect();
    residuals.push(residual_zeta(&z, &z_t, &params, 0.3, 0.9).unwrap());

    let State::Radial(gp) = &g.field else {
        unreachable!()
    };
    let patch = hodograph_solve(
        &RadialSampler::new(gp, 2),
        &[0.0, 0.8],
        &[0.0, 1.0],
        &HodographOptions::new(0.1, gp.step),
    )
    .unwrap();
    let mut h_t = vec![0.0; patch.len()];
    for j in patch.jets() {
        h_t[j.node] = hodograph_rhs(&j, &params);
    }
    residuals.push(residual_hodograph(&patch, &h_t, &params, 0.0).unwrap());
    let nonzero = residuals
        .iter()
        .filter(|r| r.sup != 0.0 || r.evaluated == 0)
        .count();

    let back = from_pressure(&g, &params).unwrap();
    let pressure_rt = s
        .values()
        .iter()
        .zip(back.values())
        .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
        .fold(0.0, f64::max);
    let snap = Snapshot::new(&s, &params);
    let snap_rt = Snapshot::from_json(&snap.to_json().unwrap())
        .unwrap()
        .to_state()
        .unwrap()
        == s;
    let frame = FrameSnapshot::new(TransformFrame::Pressure(g.clone()), &params);
    let frame_rt =
        FrameSnapshot::from_json(&serde_json::to_string(&frame).unwrap()).unwrap() == frame;

    outcome(
        metric_bad == 0 && nonzero == 0 && pressure_rt <= 1e-12 && snap_rt && frame_rt,
        format!(
            "metric violations {metric_bad}/10000, nonzero self-consistent residuals {nonzero}/4, \
             pressure round trip {pressure_rt:.1e} (tol 1e-12), snapshot {snap_rt}, frame {frame_rt}"
        ),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |k: usize, budget: f64, clock: Instant, extra: f64, o: Outcome| {
        let secs = clock.elapsed().as_secs_f64() + extra;
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {k:>2}: {} [{secs:.2}s, budget {budget}s]",
            o.detail
        );
        all &= o.passed;
    };

    let c = Instant::now();
    report(1, 1.0, c, 0.0, sphere_rhs_identity());
    let c = Instant::now();
    report(2, 30.0, c, 0.0, sphere_cap_evolution());
    let c = Instant::now();
    report(3, 5.0, c, 0.0, legendre_equivalence());

    let coarse = reference_run(256);
    let fine = reference_run(512);
    let c = Instant::now();
    report(
        4,
        60.0,
        c,
        coarse.seconds + fine.seconds,
        exponent_recovery(&[&coarse, &fine]),
    );
    let c = Instant::now();
    report(
        5,
        60.0,
        c,
        coarse.seconds + fine.seconds,
        dual_asymptotics(&[&coarse, &fine]),
    );
    let c = Instant::now();
    report(
        6,
        300.0,
        c,
        coarse.seconds + fine.seconds,
        residual_convergence(&coarse, &fine),
    );
    let c = Instant::now();
    report(7, 60.0, c, coarse.seconds, pinch_drift(&coarse));
    let c = Instant::now();
    report(8, 60.0, c, coarse.seconds, kinematics(&coarse));
    let c = Instant::now();
    report(
        9,
        120.0,
        c,
        coarse.seconds + fine.seconds,
        holder_stability(&coarse, &fine),
    );
    let c = Instant::now();
    report(10, 1.0, c, 0.0, classifier_table());
    let c = Instant::now();
    report(11, 10.0, c, 0.0, metric_and_evaluators());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
