//! Command-line front end: loads a JSON run configuration, dispatches one
//! subcommand, and writes CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure during
//! a run, 4 study completed but invalid (too many failed cells). The rayon
//! thread count (RAYON_NUM_THREADS) is honored for study parallelism and
//! never changes any emitted number.

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};
use unravel_cli::config::{OutputFormat, SimulationConfig};
use unravel_cli::output::{self, OutPaths};
use unravel_cli::CliError;
use unravel_core::experiments::{convergence_study, coupling_study, marginal_study};
use unravel_core::generators::solve_meanfield_reference;
use unravel_core::kernel::validate_kernel;
use unravel_core::trajectories::simulate;

#[derive(Parser)]
#[command(
    name = "unravel",
    version,
    about = "Interacting stochastic trajectories for nonlinear mean-field Lindblad dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the deterministic nonlinear mean-field equation (RK4).
    Reference(CommonArgs),
    /// Run one interacting trajectory ensemble and record its empirical mean.
    Simulate(CommonArgs),
    /// Measure the O(1/N) mean-square convergence rate across ensemble sizes.
    Converge(CommonArgs),
    /// Measure the synchronous-coupling distance to i.i.d. mean-field copies.
    Chaos(CommonArgs),
    /// Compare exact N-body single-site marginals against the mean-field
    /// solution for small N.
    Nbody(CommonArgs),
    /// Load and validate a configuration, printing the structural report.
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override run.N (particle count).
    #[arg(long = "N")]
    n: Option<usize>,
    /// Override run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override scheme.dt.
    #[arg(long)]
    dt: Option<f64>,
    /// Override scheme horizon T.
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Override output.directory.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}

fn load(args: &CommonArgs) -> Result<SimulationConfig, CliError> {
    let mut config = SimulationConfig::load(&args.config)?;
    if let Some(n) = args.n {
        config.run.n = Some(n);
    }
    if let Some(seed) = args.seed {
        config.run.seed = Some(seed);
    }
    if let Some(dt) = args.dt {
        config.scheme.dt = dt;
    }
    if let Some(t) = args.t_final {
        config.scheme.t_final = t;
    }
    if let Some(dir) = &args.out_dir {
        config.output.directory = dir.clone();
    }
    // Overrides can break what loading already checked (e.g. the grid), so
    // the merged config is validated again.
    config.validate()?;
    Ok(config)
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Reference(args) => cmd_reference(&load(&args)?),
        Command::Simulate(args) => cmd_simulate(&load(&args)?),
        Command::Converge(args) => cmd_converge(&load(&args)?),
        Command::Chaos(args) => cmd_chaos(&load(&args)?),
        Command::Nbody(args) => cmd_nbody(&load(&args)?),
        Command::Validate(args) => cmd_validate(&load(&args)?),
    }
}

fn cmd_reference(config: &SimulationConfig) -> Result<(), CliError> {
    let spec = config.build_model()?;
    let scheme = config.scheme.to_scheme();
    let start = Instant::now();
    let (series, report) = solve_meanfield_reference(&spec, scheme.dt, scheme.t_final)
        .map_err(CliError::from_core_run)?;
    let wall = start.elapsed().as_secs_f64();
    let paths = OutPaths::new(&config.output.directory);
    if config.output.wants(OutputFormat::Csv) {
        let path = paths.file("reference.csv");
        output::write_text(&path, &output::reference_csv(&series, spec.dim()))?;
        println!("wrote {}", path.display());
    }
    if config.output.wants(OutputFormat::Json) {
        let path = paths.file("reference_meta.json");
        output::write_json(
            &path,
            &json!({
                "schema_version": unravel_cli::config::SCHEMA_VERSION,
                "subcommand": "reference",
                "d": spec.dim(),
                "dt": scheme.dt,
                "t_final": scheme.t_final,
                "grid_points": series.len(),
                "checks": {
                    "max_trace_violation": report.max_trace_violation,
                    "max_hermiticity_violation": report.max_hermiticity_violation,
                    "min_eigenvalue": report.min_eigenvalue,
                },
                "wall_clock_seconds": wall,
                "timestamp_unix_seconds": timestamp(),
            }),
        )?;
        println!("wrote {}", path.display());
    }
    println!(
        "reference: {} grid points, min eigenvalue {:.3e}",
        series.len(),
        report.min_eigenvalue
    );
    Ok(())
}

fn cmd_simulate(config: &SimulationConfig) -> Result<(), CliError> {
    let spec = config.build_model()?;
    let scheme = config.scheme.to_scheme();
    let n = config
        .run
        .n
        .ok_or_else(|| CliError::config("[run-section] simulate needs run.N (or --N)".into()))?;
    let seed = config.run.seed.ok_or_else(|| {
        CliError::config("[run-section] simulate needs run.seed (or --seed)".into())
    })?;
    let start = Instant::now();
    let record = simulate(&spec, &scheme, n, seed).map_err(CliError::from_core_run)?;
    let wall = start.elapsed().as_secs_f64();
    let paths = OutPaths::new(&config.output.directory);
    if config.output.wants(OutputFormat::Csv) {
        let path = paths.file("trajectory.csv");
        output::write_text(&path, &output::trajectory_csv(&record, spec.dim()))?;
        println!("wrote {}", path.display());
    }
    if config.output.wants(OutputFormat::Json) {
        let path = paths.file("trajectory_meta.json");
        output::write_json(
            &path,
            &json!({
                "schema_version": unravel_cli::config::SCHEMA_VERSION,
                "subcommand": "simulate",
                "d": spec.dim(),
                "N": record.n_particles,
                "seed": record.seed,
                "dt": scheme.dt,
                "t_final": scheme.t_final,
                "mode": scheme.mode.as_str(),
                "diffusion_variant": scheme.diffusion_variant.as_str(),
                "renormalize_each_step": scheme.renormalize_each_step,
                "record_stride": scheme.record_stride,
                "recorded_rows": record.indices.len(),
                "checks": {
                    "max_mean_trace_deviation": record.max_mean_trace_deviation,
                    "max_mean_hermiticity_violation": record.max_mean_hermiticity_violation,
                },
                "wall_clock_seconds": wall,
                "timestamp_unix_seconds": timestamp(),
            }),
        )?;
        println!("wrote {}", path.display());
    }
    println!(
        "simulate: N={} seed={} rows={} final trace {:.6}",
        record.n_particles,
        record.seed,
        record.indices.len(),
        record.trace_re.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

/// The studies demand a grid that can actually exhibit a rate: at least four
/// sizes, strictly ascending, spanning a factor of 16, and at least eight
/// seeds for the expectation estimate.
fn study_grid(config: &SimulationConfig) -> Result<(Vec<usize>, Vec<u64>), CliError> {
    let n_values = config.run.n_values.clone().ok_or_else(|| {
        CliError::config("[study-grid] study subcommands need run.N_values".into())
    })?;
    let seeds =
        config.run.seeds.clone().ok_or_else(|| {
            CliError::config("[study-grid] study subcommands need run.seeds".into())
        })?;
    if n_values.len() < 4 {
        return Err(CliError::config(
            "[study-grid] need at least 4 ensemble sizes".into(),
        ));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::config(
            "[study-grid] N_values must be strictly ascending".into(),
        ));
    }
    let first = *n_values.first().unwrap() as f64;
    let last = *n_values.last().unwrap() as f64;
    if last < 16.0 * first {
        return Err(CliError::config(
            "[study-grid] N_values must span at least a factor of 16".into(),
        ));
    }
    if seeds.len() < 8 {
        return Err(CliError::config(
            "[study-grid] need at least 8 seeds".into(),
        ));
    }
    Ok((n_values, seeds))
}

fn cmd_converge(config: &SimulationConfig) -> Result<(), CliError> {
    let spec = config.build_model()?;
    let scheme = config.scheme.to_scheme();
    let (n_values, seeds) = study_grid(config)?;
    let start = Instant::now();
    let report =
        convergence_study(&spec, &scheme, &n_values, &seeds).map_err(CliError::from_core_run)?;
    let wall = start.elapsed().as_secs_f64();
    let paths = OutPaths::new(&config.output.directory);
    if config.output.wants(OutputFormat::Csv) {
        let path = paths.file("convergence.csv");
        output::write_text(
            &path,
            &output::study_csv(&report.n_values, &report.mean_sq_errors, &report.stderrs),
        )?;
        println!("wrote {}", path.display());
        let path = paths.file("convergence_cells.csv");
        output::write_text(
            &path,
            &output::long_csv(&report.n_values, &report.seeds, &report.per_seed_sups),
        )?;
        println!("wrote {}", path.display());
    }
    if config.output.wants(OutputFormat::Json) {
        let path = paths.file("convergence.json");
        output::write_json(
            &path,
            &json!({
                "schema_version": unravel_cli::config::SCHEMA_VERSION,
                "subcommand": "converge",
                "report": report,
                "wall_clock_seconds": wall,
                "timestamp_unix_seconds": timestamp(),
            }),
        )?;
        println!("wrote {}", path.display());
    }
    match &report.fit {
        Some(fit) => println!(
            "converge: slope {:.4}, r² {:.4}, excluded cells {}",
            fit.slope, fit.r_squared, report.excluded_cells
        ),
        None => println!("converge: no fit (degenerate errors)"),
    }
    if !report.valid {
        return Err(CliError::InvalidStudy(format!(
            "{} of {} cells excluded or fit degenerate",
            report.excluded_cells,
            report.n_values.len() * report.seeds.len()
        )));
    }
    Ok(())
}

fn cmd_chaos(config: &SimulationConfig) -> Result<(), CliError> {
    let spec = config.build_model()?;
    let scheme = config.scheme.to_scheme();
    let (n_values, seeds) = study_grid(config)?;
    let start = Instant::now();
    let report =
        coupling_study(&spec, &scheme, &n_values, &seeds).map_err(CliError::from_core_run)?;
    let wall = start.elapsed().as_secs_f64();
    let paths = OutPaths::new(&config.output.directory);
    if config.output.wants(OutputFormat::Csv) {
        let path = paths.file("coupling.csv");
        output::write_text(
            &path,
            &output::study_csv(&report.n_values, &report.mean_sq_distances, &report.stderrs),
        )?;
        println!("wrote {}", path.display());
        let path = paths.file("coupling_cells.csv");
        output::write_text(
            &path,
            &output::long_csv(&report.n_values, &report.seeds, &report.per_seed_sups),
        )?;
        println!("wrote {}", path.display());
    }
    if config.output.wants(OutputFormat::Json) {
        let path = paths.file("coupling.json");
        output::write_json(
            &path,
            &json!({
                "schema_version": unravel_cli::config::SCHEMA_VERSION,
                "subcommand": "chaos",
                "report": report,
                "wall_clock_seconds": wall,
                "timestamp_unix_seconds": timestamp(),
            }),
        )?;
        println!("wrote {}", path.display());
    }
    match &report.fit {
        Some(fit) => println!(
            "chaos: slope {:.4}, r² {:.4}, excluded cells {}",
            fit.slope, fit.r_squared, report.excluded_cells
        ),
        None => println!("chaos: no fit (distances identically zero or degenerate)"),
    }
    // A switched-off kernel makes every distance exactly zero; that is the
    // expected decoupled outcome, not a failed study.
    let all_zero = report.mean_sq_distances.iter().all(|&v| v == 0.0);
    if !report.valid && !all_zero {
        return Err(CliError::InvalidStudy(format!(
            "{} of {} cells excluded or fit degenerate",
            report.excluded_cells,
            report.n_values.len() * report.seeds.len()
        )));
    }
    Ok(())
}

fn cmd_nbody(config: &SimulationConfig) -> Result<(), CliError> {
    let spec = config.build_model()?;
    let scheme = config.scheme.to_scheme();
    let n_values = config.run.n_values.clone().unwrap_or_else(|| vec![2, 3]);
    let start = Instant::now();
    let report = marginal_study(&spec, &n_values, scheme.dt, scheme.t_final)
        .map_err(CliError::from_core_run)?;
    let wall = start.elapsed().as_secs_f64();
    let paths = OutPaths::new(&config.output.directory);
    if config.output.wants(OutputFormat::Csv) {
        let path = paths.file("nbody.csv");
        let mut body = String::from("N,sup_discrepancy,final_discrepancy\n");
        for (i, &n) in report.n_values.iter().enumerate() {
            body.push_str(&format!(
                "{n},{},{}\n",
                output::fmt_float(report.discrepancies[i]),
                output::fmt_float(report.final_discrepancies[i])
            ));
        }
        output::write_text(&path, &body)?;
        println!("wrote {}", path.display());
        let path = paths.file("nbody_curves.csv");
        output::write_text(
            &path,
            &output::marginal_csv(&report.n_values, report.dt, &report.curves),
        )?;
        println!("wrote {}", path.display());
    }
    if config.output.wants(OutputFormat::Json) {
        let path = paths.file("nbody.json");
        output::write_json(
            &path,
            &json!({
                "schema_version": unravel_cli::config::SCHEMA_VERSION,
                "subcommand": "nbody",
                "n_values": report.n_values,
                "sup_discrepancies": report.discrepancies,
                "final_discrepancies": report.final_discrepancies,
                "dt": report.dt,
                "t_final": report.t_final,
                "wall_clock_seconds": wall,
                "timestamp_unix_seconds": timestamp(),
            }),
        )?;
        println!("wrote {}", path.display());
    }
    for (i, &n) in report.n_values.iter().enumerate() {
        println!(
            "nbody: N={n} sup discrepancy {:.6e}, final {:.6e}",
            report.discrepancies[i], report.final_discrepancies[i]
        );
    }
    Ok(())
}

fn cmd_validate(config: &SimulationConfig) -> Result<(), CliError> {
    let spec = config.build_model()?;
    let scheme = config.scheme.to_scheme();
    let steps = scheme.steps().map_err(CliError::from_core_config)?;
    let kernel_report =
        validate_kernel(spec.dim(), spec.kernel().matrix()).map_err(CliError::from_core_config)?;
    println!("config ok: d={}", spec.dim());
    println!(
        "  scheme: mode={} variant={} dt={} T={} steps={steps} stride={}",
        scheme.mode.as_str(),
        scheme.diffusion_variant.as_str(),
        scheme.dt,
        scheme.t_final,
        scheme.record_stride
    );
    println!(
        "  kernel: hs_norm={:.6e} exchange={:.3e} self_adjoint={:.3e} probe_hermiticity={:.3e}",
        kernel_report.hs_norm,
        kernel_report.exchange_violation,
        kernel_report.self_adjoint_violation,
        kernel_report.probe_hermiticity_violation
    );
    Ok(())
}
