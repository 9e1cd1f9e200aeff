//! `flatside`: simulate the flow, transform snapshots, verify trajectories.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails,
//! 2 on any execution fault (bad input, I/O, numerical breakdown).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use flatside_core::analysis::{
    pressure_anchor, verify_trajectory, Analysis, SuiteOptions, VerificationReport,
};
use flatside_core::io::{
    load_config, read_trajectory, resume_snapshot, run_job, write_frame, FrameSnapshot, Geometry,
    RunConfig, ScenarioSpec, REPORT_FILE,
};
use flatside_core::solver::{
    run_flow, sphere_exact_radius, sphere_extinction_time, DtPolicy, RunOptions, State,
};
use flatside_core::transforms::{
    hodograph_solve, legendre_transform, rescaled_zeta, to_pressure, HodographOptions, PolarGrid,
    TransformFrame,
};
use flatside_core::{
    classify_g_regularity, classify_v_regularity, derive_exponents, FlowParams, RegularityClass,
};

#[derive(Parser)]
#[command(
    name = "flatside",
    version,
    about = "p-Gauss curvature flow with a flat side"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and run the analyses on it.
    Run(RunArgs),
    /// Regularity classes of g and v.
    Classify(ClassifyArgs),
    /// Emit a derived field of a stored snapshot.
    Transform(TransformArgs),
    /// Run the analyses on a stored trajectory.
    Verify(VerifyArgs),
    /// Closed-form shrinking sphere, optionally against the explicit scheme.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// radial_flat_disk, cap_sphere, perturbed_flat_disk, or a snapshot file.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Grid intervals.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Extra snapshot times, comma separated.
    #[arg(long, value_delimiter = ',')]
    samples: Option<Vec<f64>>,
    /// Analyses, comma separated; `all` or `none`.
    #[arg(long, value_delimiter = ',')]
    analyses: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Snapshot (.json) or trajectory (.jsonl) to continue from.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Also write the table as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameKind {
    Pressure,
    Legendre,
    Hodograph,
    Zeta,
}

#[derive(Args)]
struct TransformArgs {
    /// Snapshot (.json) or trajectory (.jsonl, last line).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "pressure")]
    frame: FrameKind,
    /// Legendre radii or zeta nodes.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    r_max: f64,
    /// Hodograph patch half-width.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trajectory (.jsonl). A `config.json` beside it supplies the defaults.
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    analyses: Option<Vec<String>>,
    /// Directory for the report; printed only when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long = "t-end", default_value_t = 0.1)]
    t_end: f64,
    #[arg(long, value_delimiter = ',')]
    samples: Option<Vec<f64>>,
    /// Also evolve the cap on this many radial intervals and compare apex heights.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    cfl: f64,
    /// Relative apex tolerance for the comparison.
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// CSV of the table.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Transform(a) => cmd_transform(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_analyses(names: &[String]) -> Result<Vec<Analysis>> {
    match names {
        [one] if one == "all" => Ok(Analysis::ALL.to_vec()),
        [one] if one == "none" => Ok(Vec::new()),
        _ => names
            .iter()
            .map(|s| {
                serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
                    .with_context(|| format!("unknown analysis `{s}`"))
            })
            .collect(),
    }
}

fn scenario_spec(name: &str, grid: usize) -> Result<ScenarioSpec> {
    Ok(match name {
        "radial_flat_disk" => ScenarioSpec::radial_flat_disk(grid),
        "cap_sphere" => ScenarioSpec::cap_sphere(grid),
        "perturbed_flat_disk" => ScenarioSpec::perturbed_flat_disk(grid),
        path if Path::new(path).is_file() => ScenarioSpec {
            name: Path::new(path).file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned()),
            geometry: Geometry::CustomFile { path: path.into() },
            grid,
            extent: None,
            n: 2,
            p: 1.0,
        },
        other => bail!("unknown scenario `{other}`; expected radial_flat_disk, cap_sphere, perturbed_flat_disk or a snapshot file"),
    })
}

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut c = match &a.config {
        Some(path) => load_config(path).with_context(|| format!("loading {}", path.display()))?,
        None => {
            let spec = scenario_spec(
                a.scenario.as_deref().unwrap_or("radial_flat_disk"),
                a.grid.unwrap_or(256),
            )?;
            let mut c = RunConfig::new(spec, 0.05, "flatside-out");
            if c.scenario.has_flat_side() {
                c.analyses = Analysis::ALL.to_vec();
            }
            c
        }
    };
    if let (Some(name), Some(_)) = (&a.scenario, &a.config) {
        let grid = a.grid.unwrap_or(c.scenario.grid);
        c.scenario = scenario_spec(name, grid)?;
    }
    if let Some(g) = a.grid {
        c.scenario.grid = g;
    }
    if let Some(n) = a.n {
        c.scenario.n = n;
    }
    if let Some(p) = a.p {
        c.scenario.p = p;
    }
    if let Some(cfl) = a.cfl {
        c.dt_policy = DtPolicy { cfl, ..c.dt_policy };
    }
    if let Some(t) = a.t_end {
        c.t_end = t;
    }
    if let Some(s) = &a.samples {
        c.sample_times = s.clone();
    }
    if let Some(names) = &a.analyses {
        c.analyses = parse_analyses(names)?;
    }
    if let Some(out) = &a.out {
        c.output.dir = out.clone();
    }
    if let Some(seed) = a.seed {
        c.seed = seed;
    }
    c.validate()?;
    Ok(c)
}

fn cmd_run(a: RunArgs) -> Result<bool> {
    let config = run_config(&a)?;
    let outcome = run_job(&config, a.resume.as_deref())?;
    println!("scenario {} -> {}", outcome.name, outcome.dir.display());
    println!("snapshots {}", outcome.snapshots);
    if let Some(t) = outcome.t_star {
        println!("flat side vanished at t* = {t:.6}");
    }
    print_report(&outcome.report);
    Ok(outcome.passed)
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn print_report(r: &VerificationReport) {
    for f in &r.fits {
        println!(
            "{} fit {}: exponent {:.4} (target {}, tol {}), r2 {:.4}",
            verdict(f.passed),
            f.name,
            f.fit.exponent,
            f.target,
            f.tolerance,
            f.fit.r_squared
        );
    }
    for c in &r.conditions {
        for k in &c.checks {
            let measured: Vec<String> = k
                .measured
                .iter()
                .map(|(key, v)| format!("{key}={v:.4e}"))
                .collect();
            println!(
                "{} {} / {}: {}",
                verdict(k.passed),
                c.name,
                k.name,
                measured.join(" ")
            );
        }
    }
    for res in &r.residuals {
        println!(
            "residual {}: sup {:.4e} over {} nodes",
            res.name, res.sup, res.evaluated
        );
    }
    for (name, v) in &r.statistics {
        println!("{name} = {v:.6}");
    }
}

fn describe(c: &RegularityClass) -> String {
    let var = match c.variable {
        flatside_core::Variable::G => "g",
        flatside_core::Variable::V => "v",
    };
    if c.smooth {
        format!("{var} smooth")
    } else if c.variable == flatside_core::Variable::G {
        format!("{var} in C_mu^{{{}, 2+{:.4}}}", c.order, c.holder_exponent)
    } else {
        format!("{var} in C^{{{}, {:.4}}}", c.order, c.holder_exponent)
    }
}

fn cmd_classify(a: ClassifyArgs) -> Result<bool> {
    let pairs: Vec<(usize, f64)> = match (a.n, a.p) {
        (Some(n), Some(p)) => vec![(n, p)],
        (n, p) => {
            let ns = n.map_or(vec![2, 3], |n| vec![n]);
            let ps = p.map_or(vec![0.6, 0.75, 1.0, 2.0], |p| vec![p]);
            ns.iter()
                .flat_map(|&n| ps.iter().map(move |&p| (n, p)))
                .collect()
        }
    };
    let mut rows = Vec::new();
    for (n, p) in pairs {
        let params = derive_exponents(n, p)?;
        let (g, v) = (
            classify_g_regularity(&params)?,
            classify_v_regularity(&params)?,
        );
        println!(
            "n={n} p={p} sigma_p={:.6}  {}  {}",
            params.sigma_p,
            describe(&g),
            describe(&v)
        );
        rows.push(serde_json::json!({ "n": n, "p": p, "sigma_p": params.sigma_p, "g": g, "v": v }));
    }
    if let Some(out) = a.out {
        std::fs::write(&out, serde_json::to_string_pretty(&rows)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(true)
}

fn frame_of(state: &State, params: &FlowParams, a: &TransformArgs) -> Result<TransformFrame> {
    let n_theta = if state.as_radial().is_some() { 1 } else { 16 };
    Ok(match a.frame {
        FrameKind::Pressure => TransformFrame::Pressure(to_pressure(state, params)?),
        FrameKind::Legendre => {
            let grid = PolarGrid::uniform(n_theta, a.grid.unwrap_or(401), a.r_max)?;
            TransformFrame::Legendre(legendre_transform(state, &grid, params)?)
        }
        FrameKind::Hodograph => {
            let g = to_pressure(state, params)?;
            let ext = SuiteOptions::default().extension_cells;
            let (sampler, anchor, normal) = pressure_anchor(&g, state, params, ext)?;
            let opts = HodographOptions::new(a.eta, state.step());
            TransformFrame::Hodograph(hodograph_solve(sampler.as_ref(), &anchor, &normal, &opts)?)
        }
        FrameKind::Zeta => {
            let s = SuiteOptions::default().zeta_s;
            let grid =
                PolarGrid::for_zeta(n_theta, s[0], s[1], a.grid.unwrap_or(41), params.sigma_p)?;
            TransformFrame::Zeta(rescaled_zeta(
                &legendre_transform(state, &grid, params)?,
                params,
            )?)
        }
    })
}

fn cmd_transform(a: TransformArgs) -> Result<bool> {
    let (state, params) =
        resume_snapshot(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let frame = FrameSnapshot::new(frame_of(&state, &params, &a)?, &params);
    match &a.out {
        Some(out) => {
            write_frame(out, &frame).with_context(|| format!("writing {}", out.display()))?
        }
        None => println!("{}", serde_json::to_string(&frame)?),
    }
    Ok(true)
}

fn cmd_verify(a: VerifyArgs) -> Result<bool> {
    let (states, params) =
        read_trajectory(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let beside = a.input.with_file_name("config.json");
    let stored = if beside.exists() {
        Some(load_config(&beside)?)
    } else {
        None
    };
    let Some(last) = states.last() else {
        bail!("trajectory is empty")
    };
    let t = a
        .t_end
        .or(stored.as_ref().map(|c| c.t_end))
        .unwrap_or(last.time());
    let analyses = match (&a.analyses, &stored) {
        (Some(names), _) => parse_analyses(names)?,
        (None, Some(c)) if !c.analyses.is_empty() => c.analyses.clone(),
        _ => Analysis::ALL.to_vec(),
    };
    let mut suite = stored
        .as_ref()
        .map_or_else(SuiteOptions::default, |c| c.suite.clone());
    suite.seed = a.seed.or(stored.as_ref().map(|c| c.seed)).unwrap_or(0);
    let report = verify_trajectory(&states, &params, t, &analyses, &suite)?;
    print_report(&report);
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        report.write(&dir.join(REPORT_FILE))?;
    }
    Ok(report.passed())
}

fn cmd_oracle(a: OracleArgs) -> Result<bool> {
    let params = FlowParams::derive(a.n, a.p, false)?.with_horizon(a.t_end)?;
    let extinction = sphere_extinction_time(&params, a.radius);
    if a.t_end > extinction {
        bail!("t_end = {} is past extinction at {extinction}", a.t_end);
    }
    let times = a
        .samples
        .clone()
        .unwrap_or_else(|| (0..=5).map(|k| a.t_end * k as f64 / 5.0).collect());
    println!("extinction time {extinction:.6}");

    let simulated = match a.grid {
        Some(grid) => {
            if a.n != 2 {
                bail!("the cap comparison runs the radial scheme for n = 2 only");
            }
            let mut spec = ScenarioSpec::cap_sphere(grid);
            spec.geometry = Geometry::CapSphere { radius: a.radius };
            spec.p = a.p;
            let (state, p) = flatside_core::io::scenario_build(&spec)?;
            let mut opts = RunOptions::new(a.t_end, times.clone());
            opts.dt_policy.cfl = a.cfl;
            Some(
                run_flow(&state, &p.with_horizon(a.t_end)?, &opts, None)
                    .map_err(|f| f.error)?
                    .snapshots,
            )
        }
        None => None,
    };

    let mut passed = true;
    let mut csv = String::from("t,radius,apex_exact,apex_simulated,relative_error\n");
    for &t in &times {
        let r = sphere_exact_radius(&params, a.radius, t)?;
        let exact = a.radius - r;
        let sim = simulated
            .as_ref()
            .and_then(|s| s.iter().find(|x| x.time() == t))
            .map(State::apex_height);
        match sim {
            Some(h) => {
                let rel = if exact > 0.0 {
                    (h - exact).abs() / exact
                } else {
                    (h - exact).abs()
                };
                let ok = rel <= a.tol;
                passed &= ok;
                println!(
                    "{} t={t:.4} R={r:.6} apex exact {exact:.6} simulated {h:.6} rel {rel:.3e}",
                    verdict(ok)
                );
                csv += &format!("{t},{r},{exact},{h},{rel}\n");
            }
            None => {
                println!("t={t:.4} R={r:.6} apex {exact:.6}");
                csv += &format!("{t},{r},{exact},,\n");
            }
        }
    }
    if let Some(out) = a.out {
        std::fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(passed)
}
