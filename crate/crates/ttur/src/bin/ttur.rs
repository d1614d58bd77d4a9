//! Command-line front end: single runs, batch-size sweeps, step-model fits,
//! critical-batch estimation, learning-rate grids, plotting, and CSV
//! verification.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ttur::error::{Error, Result};
use ttur::harness::config::example_config;
use ttur::harness::{csv_io, svg, sweep, SweepConfig};
use ttur::preconditioner::PreconditionerKind;
use ttur::theory;

#[derive(Parser)]
#[command(name = "ttur", version, about = "Two time-scale adaptive-optimizer experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single training cell and print its outcome.
    Run(RunArgs),
    /// Run the full (batch size x seed) sweep from a config file.
    Sweep(SweepArgs),
    /// Fit the step model to an aggregate CSV and report the critical batch.
    Fit(FitArgs),
    /// Evaluate the critical-batch lower bound, or invert it at a
    /// measurement.
    Estimate(EstimateArgs),
    /// Fixed-step learning-rate grid over (alpha_gen, alpha_disc).
    LrGrid(LrGridArgs),
    /// Re-plot SVG charts from an aggregate CSV.
    Plot(PlotArgs),
    /// Check that an aggregate CSV is recomputable from its raw CSV.
    Verify(VerifyArgs),
    /// Print a documented example config to stdout.
    Init,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Batch size; defaults to the first entry of the sweep grid.
    #[arg(long)]
    b: Option<usize>,
    /// Seed index within the sweep (picks the derived RNG seed).
    #[arg(long, default_value_t = 0)]
    seed_index: u32,
    /// Write per-step metrics CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Aggregate CSV produced by `sweep`.
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// rmsprop | adam | adabelief
    #[arg(long)]
    optimizer: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    /// Player model dimension.
    #[arg(long)]
    dim: usize,
    /// Dataset size |S|.
    #[arg(long)]
    pool_size: usize,
    /// Noise-to-accuracy ratio rho = sigma^2 / eps^3.
    #[arg(long, conflicts_with_all = ["sigma2", "eps", "from_measured"])]
    rho: Option<f64>,
    /// Gradient-noise variance sigma^2 (with --eps).
    #[arg(long, requires = "eps", conflicts_with = "from_measured")]
    sigma2: Option<f64>,
    /// Target accuracy eps (with --sigma2).
    #[arg(long, requires = "sigma2")]
    eps: Option<f64>,
    /// Invert the bound at this measured critical batch and report rho.
    #[arg(long)]
    from_measured: Option<f64>,
}

#[derive(Args)]
struct LrGridArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated generator learning rates.
    #[arg(long, value_delimiter = ',', required = true)]
    alphas_gen: Vec<f64>,
    /// Comma-separated discriminator learning rates.
    #[arg(long, value_delimiter = ',', required = true)]
    alphas_disc: Vec<f64>,
    /// Steps per grid cell.
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// Write the grid matrix CSV here (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Aggregate CSV produced by `sweep`.
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Mark this estimated critical batch with a square.
    #[arg(long)]
    estimated_b: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Directory holding raw.csv and aggregate.csv.
    #[arg(long)]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::LrGrid(a) => cmd_lr_grid(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Init => {
            print!("{}", example_config());
            Ok(())
        }
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = SweepConfig::load(&a.config)?;
    let b = a.b.unwrap_or(cfg.sweep.batch_sizes[0]);
    let cell = sweep::run_cell(&cfg, b, a.seed_index)?;
    let rec = &cell.record;
    println!(
        "b={} seed_index={} seed={} status={} steps={} wall_ms={}",
        cell.b,
        cell.seed_index,
        cell.seed,
        rec.status.name(),
        rec.steps.map_or("-".into(), |n| n.to_string()),
        rec.wall_ms
    );
    if let Some(last) = rec.metrics.records().last() {
        println!(
            "final: grad_norm=({:.6e}, {:.6e}) vi_avg=({:.6e}, {:.6e}) dist=({:.6e}, {:.6e})",
            last.grad_norm_gen, last.grad_norm_disc, last.vi_avg_gen, last.vi_avg_disc, last.dist_gen, last.dist_disc
        );
    }
    if let Some(out) = a.out {
        csv_io::write_metrics_csv(std::fs::File::create(&out)?, rec.metrics.records())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let cfg = SweepConfig::load(&a.config)?;
    let result = sweep::sweep_batches(&cfg)?;
    let dir = a.out_dir.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let files = csv_io::write_outputs(&cfg, &result, &dir)?;

    println!("b,n_seeds,mean_steps,sfo");
    for agg in &result.aggregates {
        println!("{},{},{:.2},{:.2}", agg.b, agg.n_seeds, agg.mean_steps, agg.sfo);
    }
    match result.measured_critical {
        Some((b, sfo)) => println!("measured critical batch: b={b} (sfo {sfo:.2})"),
        None => println!("measured critical batch: none (no finished runs)"),
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let aggs = csv_io::read_aggregate_csv(std::fs::File::open(&a.csv)?)?;
    let samples: Vec<(f64, f64)> = aggs.iter().map(|r| (r.b as f64, r.mean_steps)).collect();
    let fit = theory::fit_step_model(&samples)?;
    let cb = fit.model.critical_batch();
    println!(
        "step model (kappa normalized to 1): A={:.6e} B={:.6e} r_squared={:.6}",
        fit.model.a, fit.model.b, fit.r_squared
    );
    if cb.noiseless {
        println!("critical batch: 0 (no measurable noise term; smaller batches are always cheaper)");
    } else {
        println!(
            "critical batch: {:.3} (nearest power of two: {})",
            cb.batch,
            theory::nearest_power_of_two(cb.batch)?
        );
    }
    let (mb, msfo) = theory::measured_critical_batch(&samples)?;
    println!("measured critical batch: b={mb} (sfo {msfo:.2})");
    Ok(())
}

fn parse_kind(name: &str) -> Result<PreconditionerKind> {
    match name {
        "rmsprop" => Ok(PreconditionerKind::RmsProp),
        "adam" => Ok(PreconditionerKind::Adam),
        "amsgrad" => Ok(PreconditionerKind::AmsGrad),
        "adabelief" => Ok(PreconditionerKind::AdaBelief),
        other => Err(Error::UnsupportedKind(other.to_string())),
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let kind = parse_kind(&a.optimizer)?;
    println!(
        "inputs: optimizer={} alpha={} beta1={} beta2={} dim={} pool_size={}",
        kind.name(),
        a.alpha,
        a.beta1,
        a.beta2,
        a.dim,
        a.pool_size
    );
    if let Some(measured) = a.from_measured {
        let rho = theory::backcalc_ratio(kind, measured, a.alpha, a.beta1, a.beta2, a.dim, a.pool_size)?;
        println!("measured critical batch: {measured}");
        println!("implied rho = sigma^2 / eps^3: {rho:.4}");
        return Ok(());
    }
    let inputs = match (a.rho, a.sigma2, a.eps) {
        (Some(rho), None, None) => {
            println!("rho = sigma^2 / eps^3: {rho}");
            theory::EstimatorInputs::from_ratio(kind, rho, a.alpha, a.beta1, a.beta2, a.dim, a.pool_size)?
        }
        (None, Some(sigma2), Some(eps)) => {
            println!("sigma^2: {sigma2}  eps: {eps}  rho: {:.4}", sigma2 / (eps * eps * eps));
            theory::EstimatorInputs::from_sigma_eps(kind, sigma2, eps, a.alpha, a.beta1, a.beta2, a.dim, a.pool_size)?
        }
        _ => {
            return Err(Error::InvalidHyperparameter(
                "provide --rho, or --sigma2 with --eps, or --from-measured".into(),
            ))
        }
    };
    let bound = theory::prop4_lower_bound(&inputs)?;
    println!("critical batch lower bound: {bound:.4}");
    println!("nearest power of two: {}", theory::nearest_power_of_two(bound)?);
    Ok(())
}

fn cmd_lr_grid(a: LrGridArgs) -> Result<()> {
    let cfg = SweepConfig::load(&a.config)?;
    let grid = sweep::lr_grid(&cfg, &a.alphas_gen, &a.alphas_disc, a.steps)?;
    match a.out {
        Some(path) => {
            csv_io::write_lr_grid_csv(std::fs::File::create(&path)?, &grid)?;
            println!("wrote {}", path.display());
        }
        None => {
            let mut buf = Vec::new();
            csv_io::write_lr_grid_csv(&mut buf, &grid)?;
            print!("{}", String::from_utf8_lossy(&buf));
        }
    }
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let aggs = csv_io::read_aggregate_csv(std::fs::File::open(&a.csv)?)?;
    let aggregates: Vec<sweep::BatchAggregate> = aggs
        .iter()
        .map(|r| sweep::BatchAggregate {
            b: r.b,
            n_seeds: r.n_seeds,
            mean_steps: r.mean_steps,
            min_steps: r.min_steps,
            max_steps: r.max_steps,
            sfo: r.sfo,
        })
        .collect();
    let samples: Vec<(f64, f64)> = aggregates.iter().map(|x| (x.b as f64, x.mean_steps)).collect();
    let measured = theory::measured_critical_batch(&samples).ok();

    std::fs::create_dir_all(&a.out_dir)?;
    let steps_path = a.out_dir.join("steps_vs_batch.svg");
    std::fs::write(&steps_path, svg::steps_chart(&aggregates, measured, a.estimated_b)?)?;
    println!("wrote {}", steps_path.display());
    let sfo_path = a.out_dir.join("sfo_vs_batch.svg");
    std::fs::write(&sfo_path, svg::sfo_chart(&aggregates, measured, a.estimated_b)?)?;
    println!("wrote {}", sfo_path.display());
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let raw = csv_io::read_raw_csv(std::fs::File::open(a.dir.join("raw.csv"))?)?;
    let aggs = csv_io::read_aggregate_csv(std::fs::File::open(a.dir.join("aggregate.csv"))?)?;
    csv_io::verify_consistency(&raw, &aggs)?;
    println!(
        "ok: {} aggregate rows recomputed from {} raw rows",
        aggs.len(),
        raw.len()
    );
    Ok(())
}
