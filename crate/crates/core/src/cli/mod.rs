//! Command-line entry point: wires configs to the modules, validates inputs,
//! writes structured outputs plus reproduction manifests.
//!
//! Exit codes: 0 ok, 1 invariant/assertion/runtime failure, 2 usage.

mod check;
pub mod manifest;

pub use manifest::RunManifest;

use crate::coupling::{cpk_from_propagators, relaxation_bounds, tv_profile};
use crate::domain::{ExperimentConfig, GridSpec, InitialMeasure, SpatialField};
use crate::error::{Error, Result};
use crate::experiments::{
    ergodic_average, growth_rate, synchronization, tilt_support_experiment, Functional, MetricKind,
};
use crate::kernel::{eigensystem, kernel_eval, kernel_fact_checks, kernel_mc};
use crate::metrics::{d_x, d_x_bar, d_y, MetricConfig};
use crate::polymer::{sample_polymer, tilt_expectation, PolymerEnvironment};
use crate::solver::{propagator, solve, DiscreteGenerator, DriftField, Propagator};
use clap::{Args, Parser, Subcommand};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "okpz", version, about = "Open-boundary KPZ laboratory: Robin-boundary stochastic heat equation, kernels, coupling, polymers")]
struct Cli {
    /// JSON config {a, b, m, dt, t_horizon, seed, mollifier?}; flags override.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    a: Option<f64>,
    #[arg(long, global = true)]
    b: Option<f64>,
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long = "t-horizon", global = true)]
    t_horizon: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: physical cores; OKPZ_THREADS also respected).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Robin heat kernel operations.
    Kernel {
        #[command(subcommand)]
        cmd: KernelCmd,
    },
    /// Evolve initial data and write the terminal field as CSV.
    Solve(SolveArgs),
    /// Distances between two stored fields.
    Metric {
        #[command(subcommand)]
        cmd: MetricCmd,
    },
    /// Coupling kernel experiments.
    Couple {
        #[command(subcommand)]
        cmd: CoupleCmd,
    },
    /// Polymer path sampling and tilt functionals.
    Polymer {
        #[command(subcommand)]
        cmd: PolymerCmd,
    },
    /// Shared-noise synchronization experiment.
    Sync(SyncArgs),
    /// Ergodic time-average experiment.
    Ergodic(ErgodicArgs),
    /// Almost-sure growth rate of log z(N, 0).
    Growth(GrowthArgs),
    /// Tilted-noise support probe.
    Tilt(TiltArgs),
    /// Run the invariant battery; exit 1 on any violation.
    Check {
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Subcommand, Debug)]
enum KernelCmd {
    /// Eigen-expansion value p_t(x,y).
    Eval {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, default_value_t = 32)]
        modes: usize,
    },
    /// Feynman-Kac Monte Carlo estimate with standard error.
    Mc {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 64)]
        steps: usize,
    },
    /// Deterministic kernel facts; writes a JSON report.
    Check {
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.25, 1.0])]
        t_grid: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        modes: usize,
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// "delta:X" | "uniform" | "file:PATH".
    #[arg(long)]
    init: String,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long)]
    t1: f64,
    /// Optional drift: "const:C" | "cos" (cos(pi x)).
    #[arg(long)]
    drift: Option<String>,
    /// Disable the noise (deterministic heat flow).
    #[arg(long)]
    noise_off: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also dump the propagator over [t0, t1] to this path (binary).
    #[arg(long)]
    propagator_out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum MetricCmd {
    Dx {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
    },
    Dxbar {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
    },
    Dy {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long, default_value_t = 0.4)]
        kappa: f64,
    },
}

#[derive(Subcommand, Debug)]
enum CoupleCmd {
    /// TV profile of the propagator-derived kernels vs the relaxation bound.
    Profile {
        #[arg(long)]
        slabs: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum PolymerCmd {
    Sample {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = 100)]
        paths: usize,
        /// Mesh stride in lattice steps.
        #[arg(long, default_value_t = 1)]
        mesh_stride: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Tilt {
        /// "cos" | "const:C".
        #[arg(long)]
        h: String,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.5)]
        x: f64,
        #[arg(long, default_value_t = 2000)]
        paths: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SyncArgs {
    #[arg(long, default_value_t = 12)]
    nmax: usize,
    #[arg(long, default_value_t = 200)]
    seeds: usize,
    /// dx | dxbar | dy.
    #[arg(long, default_value = "dx")]
    metric: String,
    #[arg(long, default_value_t = 0.4)]
    kappa: f64,
    #[arg(long)]
    noise_off: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ErgodicArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    stride: usize,
    /// f1 (cosine moment) | f2 (d_x to uniform) | const:C.
    #[arg(long, default_value = "f1")]
    functional: String,
    /// "delta:X" | "uniform" | "file:PATH".
    #[arg(long, default_value = "uniform")]
    init: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GrowthArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value = "uniform")]
    init: String,
    #[arg(long)]
    noise_off: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TiltArgs {
    /// "cos" | "const:C".
    #[arg(long, default_value = "cos")]
    phi: String,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10, 20])]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Parse and execute; returns the process exit code.
pub fn dispatch<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Error::Config(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => {
            if !matches!(cli.cmd, Command::Check { .. }) {
                return Err(Error::Config(
                    "--config <path> is required (flags only override it)".to_string(),
                ));
            }
            ExperimentConfig::default()
        }
    };
    if let Some(v) = cli.a {
        cfg.a = v;
    }
    if let Some(v) = cli.b {
        cfg.b = v;
    }
    if let Some(v) = cli.m {
        cfg.m = v;
    }
    if let Some(v) = cli.dt {
        cfg.dt = v;
    }
    if let Some(v) = cli.t_horizon {
        cfg.t_horizon = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

fn init_threads(cli: &Cli) {
    let n = cli.threads.or_else(|| {
        std::env::var("OKPZ_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn parse_init(spec: &str, grid: GridSpec) -> Result<InitialMeasure> {
    if spec == "uniform" {
        return Ok(InitialMeasure::uniform(grid));
    }
    if let Some(x) = spec.strip_prefix("delta:") {
        let x: f64 = x
            .parse()
            .map_err(|_| Error::Config(format!("bad delta location in {spec:?}")))?;
        return InitialMeasure::dirac(x);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let field = read_field_csv(Path::new(path), grid)?;
        return InitialMeasure::density(field);
    }
    Err(Error::Config(format!(
        "init must be \"delta:X\", \"uniform\" or \"file:PATH\", got {spec:?}"
    )))
}

fn parse_profile(spec: &str) -> Result<(DriftField, String)> {
    if spec == "cos" {
        return Ok((
            DriftField::new(|_, x| (std::f64::consts::PI * x).cos(), 1.0)?,
            spec.to_string(),
        ));
    }
    if let Some(c) = spec.strip_prefix("const:") {
        let c: f64 = c
            .parse()
            .map_err(|_| Error::Config(format!("bad constant in {spec:?}")))?;
        return Ok((DriftField::constant(c), spec.to_string()));
    }
    Err(Error::Config(format!(
        "profile must be \"cos\" or \"const:C\", got {spec:?}"
    )))
}

fn write_field_csv(path: &Path, field: &SpatialField) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,value")?;
    for j in 0..field.len() {
        writeln!(out, "{},{}", field.grid.node_x(j), field.values[j])?;
    }
    Ok(())
}

fn read_field_csv(path: &Path, grid: GridSpec) -> Result<SpatialField> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with('x') {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cell = line
            .split(',')
            .nth(1)
            .ok_or_else(|| Error::Config(format!("{}: line {i} lacks a value column", path.display())))?;
        values.push(
            cell.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: line {i}: {e}", path.display())))?,
        );
    }
    if values.len() != grid.n_nodes() {
        return Err(Error::Config(format!(
            "{} has {} values but the grid has {} nodes",
            path.display(),
            values.len(),
            grid.n_nodes()
        )));
    }
    SpatialField::new(values, grid)
}

fn metric_kind(name: &str, kappa: f64) -> Result<MetricKind> {
    match name {
        "dx" => Ok(MetricKind::Dx),
        "dxbar" => Ok(MetricKind::DxBar),
        "dy" => Ok(MetricKind::Dy { kappa }),
        other => Err(Error::Config(format!("unknown metric {other:?}"))),
    }
}

fn run(cli: Cli) -> Result<i32> {
    init_threads(&cli);
    let cfg = effective_config(&cli)?;
    let started = Instant::now();

    match &cli.cmd {
        Command::Check { quick } => {
            let results = check::run_battery(*quick);
            let mut failures = 0;
            for (name, result) in &results {
                match result {
                    Ok(()) => println!("PASS {name}"),
                    Err(msg) => {
                        println!("FAIL {name}: {msg}");
                        failures += 1;
                    }
                }
            }
            if failures > 0 {
                eprintln!("{failures} invariant(s) violated");
                return Ok(1);
            }
            Ok(0)
        }

        Command::Kernel { cmd } => {
            let (params, _, _) = cfg.build()?;
            match cmd {
                KernelCmd::Eval { t, x, y, modes } => {
                    let sys = eigensystem(&params, *modes)?;
                    println!("{}", kernel_eval(&sys, *t, *x, *y)?);
                    Ok(0)
                }
                KernelCmd::Mc { t, x, y, paths, steps } => {
                    let est = kernel_mc(&params, *t, *x, *y, *paths, *steps, cfg.seed)?;
                    println!("{} {}", est.estimate, est.stderr);
                    Ok(0)
                }
                KernelCmd::Check { t_grid, modes, report } => {
                    let sys = eigensystem(&params, *modes)?;
                    let rep = kernel_fact_checks(&sys, t_grid, 64)?;
                    std::fs::write(report, serde_json::to_string_pretty(&rep)?)?;
                    RunManifest::emit(
                        "kernel check",
                        &cfg,
                        started.elapsed().as_millis(),
                        &[report.clone()],
                    )?;
                    println!(
                        "positivity_min {} semigroup_defect {} growth_constant_C {}",
                        rep.positivity_min, rep.semigroup_defect, rep.growth_constant_c
                    );
                    Ok(0)
                }
            }
        }

        Command::Solve(args) => {
            let (params, grid, plan) = cfg.build()?;
            let gen = DiscreteGenerator::new(&params, &grid)?;
            let init = parse_init(&args.init, grid)?;
            let drift = args
                .drift
                .as_deref()
                .map(parse_profile)
                .transpose()?
                .map(|(d, _)| d);
            let plan_ref = (!args.noise_off).then_some(&plan);
            let field = solve(&gen, &init, args.t0, args.t1, plan_ref, drift.as_ref())?;
            write_field_csv(&args.out, &field)?;
            let mut outputs = vec![args.out.clone()];
            if let Some(ppath) = &args.propagator_out {
                let prop = propagator(&gen, args.t0, args.t1, plan_ref)?;
                let mut file = std::fs::File::create(ppath)?;
                prop.write_binary(&mut file)?;
                outputs.push(ppath.clone());
            }
            RunManifest::emit("solve", &cfg, started.elapsed().as_millis(), &outputs)?;
            Ok(0)
        }

        Command::Metric { cmd } => {
            let (_, grid, _) = cfg.build()?;
            let value = match cmd {
                MetricCmd::Dx { left, right } => {
                    let f = read_field_csv(left, grid)?;
                    let g = read_field_csv(right, grid)?;
                    d_x(
                        &crate::domain::quotient_field(&f)?,
                        &crate::domain::quotient_field(&g)?,
                    )?
                }
                MetricCmd::Dxbar { left, right } => {
                    d_x_bar(&read_field_csv(left, grid)?, &read_field_csv(right, grid)?)?
                }
                MetricCmd::Dy { left, right, kappa } => d_y(
                    &read_field_csv(left, grid)?,
                    &read_field_csv(right, grid)?,
                    &MetricConfig::new(*kappa)?,
                )?,
            };
            println!("{value}");
            Ok(0)
        }

        Command::Couple { cmd } => {
            let CoupleCmd::Profile { slabs, delta, out } = cmd;
            let (params, grid, plan) = cfg.build()?;
            let gen = DiscreteGenerator::new(&params, &grid)?;
            let props: Vec<Propagator> = (0..*slabs)
                .map(|i| propagator(&gen, i as f64, (i + 1) as f64, Some(&plan)))
                .collect::<Result<_>>()?;
            let f = SpatialField::uniform(grid);
            let chain = cpk_from_propagators(&props, &f)?;
            let profile = tv_profile(&chain.kernels)?;
            let bounds = relaxation_bounds(&chain.kernels, *delta);
            let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
            writeln!(file, "N,tv_sup,bound")?;
            for (i, (p, b)) in profile.iter().zip(&bounds).enumerate() {
                writeln!(file, "{},{},{}", i + 1, p, b)?;
            }
            drop(file);
            RunManifest::emit("couple profile", &cfg, started.elapsed().as_millis(), &[out.clone()])?;
            Ok(0)
        }

        Command::Polymer { cmd } => {
            let (params, grid, plan) = cfg.build()?;
            let gen = DiscreteGenerator::new(&params, &grid)?;
            match cmd {
                PolymerCmd::Sample { t, x, paths, mesh_stride, out } => {
                    let f = SpatialField::uniform(grid);
                    let env = PolymerEnvironment::new(&gen, Some(&plan), &f, *t)?;
                    let mesh: Vec<f64> = (1..=env.n_steps() / mesh_stride)
                        .map(|k| (k * mesh_stride) as f64 * grid.dt)
                        .collect();
                    let node = grid.nearest_node(*x);
                    let mut file = std::io::BufWriter::new(std::fs::File::create(out)?);
                    writeln!(file, "path,s,x")?;
                    for p in 0..*paths {
                        let mut rng = crate::kernel::path_rng(cfg.seed, p as u64);
                        let path = sample_polymer(&env, node, &mesh, &mut rng)?;
                        for (s, pos) in path.times.iter().zip(&path.positions) {
                            writeln!(file, "{},{},{}", p, s, grid.node_x(*pos))?;
                        }
                    }
                    drop(file);
                    RunManifest::emit("polymer sample", &cfg, started.elapsed().as_millis(), &[out.clone()])?;
                    Ok(0)
                }
                PolymerCmd::Tilt { h, t, x, paths, out } => {
                    let (drift, _) = parse_profile(h)?;
                    let f = SpatialField::uniform(grid);
                    let node = grid.nearest_node(*x);
                    let result =
                        tilt_expectation(&gen, Some(&plan), &f, *t, node, &drift, *paths, cfg.seed)?;
                    std::fs::write(out, serde_json::to_string_pretty(&result)?)?;
                    RunManifest::emit("polymer tilt", &cfg, started.elapsed().as_millis(), &[out.clone()])?;
                    println!("v_mc {} v_exact {} stderr {}", result.v_mc, result.v_exact, result.stderr);
                    Ok(0)
                }
            }
        }

        Command::Sync(args) => {
            let (params, grid, _) = cfg.build()?;
            let gen = DiscreteGenerator::new(&params, &grid)?;
            let metric = metric_kind(&args.metric, args.kappa)?;
            let pairs = vec![
                (
                    InitialMeasure::dirac(0.0)?,
                    InitialMeasure::dirac(1.0)?,
                ),
                (
                    InitialMeasure::dirac(0.5)?,
                    InitialMeasure::uniform(grid),
                ),
            ];
            let result = synchronization(
                &gen,
                &pairs,
                args.nmax,
                args.seeds,
                metric,
                cfg.seed,
                !args.noise_off,
            )?;
            let mut file = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
            writeln!(file, "N,mean,stderr,max")?;
            for r in &result.rows {
                writeln!(file, "{},{},{},{}", r.n, r.mean, r.stderr, r.max)?;
            }
            drop(file);
            let summary_path = args.out.with_extension("summary.json");
            let fit = result.rows.len();
            let summary = serde_json::json!({
                "c_hat": result.fit.as_ref().map(|f| f.rate),
                "r2": result.fit.as_ref().map(|f| f.r2),
                "points": fit,
            });
            std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
            RunManifest::emit(
                "sync",
                &cfg,
                started.elapsed().as_millis(),
                &[args.out.clone(), summary_path],
            )?;
            Ok(0)
        }

        Command::Ergodic(args) => {
            let (params, grid, plan) = cfg.build()?;
            let gen = DiscreteGenerator::new(&params, &grid)?;
            let functional = match args.functional.as_str() {
                "f1" => Functional::CosineMoment,
                "f2" => Functional::DistanceToUniform,
                other => {
                    if let Some(c) = other.strip_prefix("const:") {
                        Functional::Constant(c.parse().map_err(|_| {
                            Error::Config(format!("bad constant functional {other:?}"))
                        })?)
                    } else {
                        return Err(Error::Config(format!("unknown functional {other:?}")));
                    }
                }
            };
            let init = parse_init(&args.init, grid)?;
            let result = ergodic_average(&gen, functional, &init, args.n, args.stride, &plan)?;
            let mut file = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
            writeln!(file, "n,value,running")?;
            for (i, (v, r)) in result.values.iter().zip(&result.running).enumerate() {
                writeln!(file, "{},{},{}", i + 1, v, r)?;
            }
            drop(file);
            RunManifest::emit("ergodic", &cfg, started.elapsed().as_millis(), &[args.out.clone()])?;
            println!("mean {} batch_stderr {}", result.mean, result.batch_stderr);
            Ok(0)
        }

        Command::Growth(args) => {
            let (params, grid, plan) = cfg.build()?;
            let gen = DiscreteGenerator::new(&params, &grid)?;
            let init = parse_init(&args.init, grid)?;
            let plan_ref = (!args.noise_off).then_some(&plan);
            let result = growth_rate(&gen, &init, args.n, plan_ref)?;
            std::fs::write(&args.out, serde_json::to_string_pretty(&result)?)?;
            RunManifest::emit("growth", &cfg, started.elapsed().as_millis(), &[args.out.clone()])?;
            println!("rate {} stderr {}", result.rate, result.stderr);
            Ok(0)
        }

        Command::Tilt(args) => {
            let (params, grid, _) = cfg.build()?;
            let gen = DiscreteGenerator::new(&params, &grid)?;
            let phi = match args.phi.as_str() {
                "cos" => SpatialField::from_fn(grid, |x| (std::f64::consts::PI * x).cos()),
                other => {
                    if let Some(c) = other.strip_prefix("const:") {
                        let c: f64 = c
                            .parse()
                            .map_err(|_| Error::Config(format!("bad profile {other:?}")))?;
                        SpatialField::new(vec![c; grid.n_nodes()], grid)?
                    } else {
                        return Err(Error::Config(format!("unknown profile {other:?}")));
                    }
                }
            };
            let rows = tilt_support_experiment(&gen, &phi, &args.n_list, args.seeds, cfg.seed)?;
            let mut file = std::io::BufWriter::new(std::fs::File::create(&args.out)?);
            writeln!(file, "n,mean_dx,stderr")?;
            for r in &rows {
                writeln!(file, "{},{},{}", r.n, r.mean_dx, r.stderr)?;
            }
            drop(file);
            RunManifest::emit("tilt", &cfg, started.elapsed().as_millis(), &[args.out.clone()])?;
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoundaryParams;

    #[test]
    fn parse_init_forms() {
        let g = GridSpec::new(16, 1e-3, 1.0, &BoundaryParams::neumann()).unwrap();
        assert!(parse_init("uniform", g).is_ok());
        assert!(parse_init("delta:0.5", g).is_ok());
        assert!(parse_init("nonsense", g).is_err());
    }

    #[test]
    fn missing_config_is_a_usage_error() {
        let code = dispatch(["okpz", "solve", "--init", "uniform", "--t1", "0.1", "--out", "/tmp/x.csv"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let code = dispatch(["okpz", "--definitely-not-a-flag"]);
        assert_eq!(code, 2);
    }
}
