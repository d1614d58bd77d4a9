//! CSV emission and parsing for sweep results, plus the aggregate
//! consistency check behind the `verify` subcommand.
//!
//! A sweep writes three files into the output directory: `raw.csv` (one row
//! per (batch, seed) run), `aggregate.csv` (per-batch means over finished
//! runs), and `metadata.txt` (config fingerprint and measurement notes).
//! All numbers are decimal text with a `.` radix; every file ends with a
//! newline and starts with a header row.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::SweepConfig;
use crate::harness::run::RunStatus;
use crate::harness::sweep::{BatchAggregate, CellResult, SweepResult};
use crate::metrics::StepRecord;

/// One raw sweep row; mirrors the on-disk column order exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub run_id: String,
    pub b: usize,
    pub seed: u64,
    pub optimizer_gen: String,
    pub optimizer_disc: String,
    pub alpha_gen: f64,
    pub alpha_disc: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma2_gen: f64,
    pub sigma2_disc: f64,
    pub stop_mode: String,
    pub epsilon2: f64,
    /// Empty when the run did not finish.
    pub steps: Option<u64>,
    pub status: String,
    pub wall_ms: u64,
}

/// One aggregate row; same shape as [`BatchAggregate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggRow {
    pub b: usize,
    pub n_seeds: usize,
    pub mean_steps: f64,
    pub min_steps: u64,
    pub max_steps: u64,
    pub sfo: f64,
}

impl From<&BatchAggregate> for AggRow {
    fn from(a: &BatchAggregate) -> Self {
        AggRow {
            b: a.b,
            n_seeds: a.n_seeds,
            mean_steps: a.mean_steps,
            min_steps: a.min_steps,
            max_steps: a.max_steps,
            sfo: a.sfo,
        }
    }
}

pub fn raw_row(cfg: &SweepConfig, cell: &CellResult) -> RawRow {
    RawRow {
        run_id: format!("b{}-s{}", cell.b, cell.seed_index),
        b: cell.b,
        seed: cell.seed,
        optimizer_gen: cfg.generator.optimizer.name().to_string(),
        optimizer_disc: cfg.discriminator.optimizer.name().to_string(),
        alpha_gen: cfg.generator.alpha,
        alpha_disc: cfg.discriminator.alpha,
        beta1: cfg.generator.beta1,
        beta2: cfg.generator.beta2,
        sigma2_gen: cfg.problem.sigma2_gen,
        sigma2_disc: cfg.problem.sigma2_disc,
        stop_mode: cfg.sweep.stop_mode.name().to_string(),
        epsilon2: cfg.sweep.epsilon2_gen,
        steps: cell.record.steps,
        status: cell.record.status.name().to_string(),
        wall_ms: cell.record.wall_ms,
    }
}

pub fn write_raw_csv<W: Write>(out: W, cfg: &SweepConfig, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for cell in cells {
        w.serialize(raw_row(cfg, cell)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(out: W, aggregates: &[BatchAggregate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for agg in aggregates {
        w.serialize(AggRow::from(agg)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw_csv<R: std::io::Read>(input: R) -> Result<Vec<RawRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

pub fn read_aggregate_csv<R: std::io::Read>(input: R) -> Result<Vec<AggRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

/// Recomputes every aggregate column from the raw rows and checks the
/// stored aggregate block against it. Tolerance covers decimal round-trip
/// of the means only; counts must match exactly.
pub fn verify_consistency(raw: &[RawRow], aggregates: &[AggRow]) -> Result<()> {
    let mut batches: Vec<usize> = raw.iter().map(|r| r.b).collect();
    batches.sort_unstable();
    batches.dedup();

    let mut expected = Vec::new();
    for b in batches {
        let steps: Vec<u64> = raw
            .iter()
            .filter(|r| r.b == b && r.status == RunStatus::Finished.name())
            .filter_map(|r| r.steps)
            .collect();
        if steps.is_empty() {
            continue;
        }
        let mean = steps.iter().sum::<u64>() as f64 / steps.len() as f64;
        expected.push(AggRow {
            b,
            n_seeds: steps.len(),
            mean_steps: mean,
            min_steps: *steps.iter().min().unwrap(),
            max_steps: *steps.iter().max().unwrap(),
            sfo: mean * b as f64,
        });
    }

    if expected.len() != aggregates.len() {
        return Err(Error::Csv(format!(
            "aggregate block has {} rows, raw rows imply {}",
            aggregates.len(),
            expected.len()
        )));
    }
    for (got, want) in aggregates.iter().zip(&expected) {
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs().max(1.0);
        if got.b != want.b
            || got.n_seeds != want.n_seeds
            || got.min_steps != want.min_steps
            || got.max_steps != want.max_steps
            || !close(got.mean_steps, want.mean_steps)
            || !close(got.sfo, want.sfo)
        {
            return Err(Error::Csv(format!(
                "aggregate mismatch at b={}: stored {:?}, recomputed {:?}",
                want.b, got, want
            )));
        }
    }
    Ok(())
}

/// Per-step metrics of a single run, for the `run` subcommand.
pub fn write_metrics_csv<W: Write>(out: W, records: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "grad_norm_gen",
        "grad_norm_disc",
        "vi_avg_gen",
        "vi_avg_disc",
        "dist_gen",
        "dist_disc",
    ])
    .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            fmt(r.grad_norm_gen),
            fmt(r.grad_norm_disc),
            fmt(r.vi_avg_gen),
            fmt(r.vi_avg_disc),
            fmt(r.dist_gen),
            fmt(r.dist_disc),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Learning-rate grid matrix: first column is alpha_gen, one column per
/// discriminator learning rate.
pub fn write_lr_grid_csv<W: Write>(out: W, grid: &crate::harness::sweep::LrGridResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["alpha_gen".to_string()];
    header.extend(grid.alphas_disc.iter().map(|a| fmt(*a)));
    w.write_record(&header).map_err(csv_err)?;
    for (i, ag) in grid.alphas_gen.iter().enumerate() {
        let mut row = vec![fmt(*ag)];
        row.extend((0..grid.alphas_disc.len()).map(|j| fmt(grid.value(i, j))));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes raw.csv, aggregate.csv, metadata.txt, and (if requested) the two
/// SVG charts into `dir`. Overwrites existing files. Returns the paths
/// written.
pub fn write_outputs(cfg: &SweepConfig, result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    if cfg.output.formats.iter().any(|f| f == "csv") {
        let raw_path = dir.join("raw.csv");
        write_raw_csv(std::fs::File::create(&raw_path)?, cfg, &result.cells)?;
        written.push(raw_path);

        let agg_path = dir.join("aggregate.csv");
        write_aggregate_csv(std::fs::File::create(&agg_path)?, &result.aggregates)?;
        written.push(agg_path);
    }

    if cfg.output.formats.iter().any(|f| f == "svg") {
        let steps_path = dir.join("steps_vs_batch.svg");
        std::fs::write(
            &steps_path,
            crate::harness::svg::steps_chart(&result.aggregates, result.measured_critical, None)?,
        )?;
        written.push(steps_path);

        let sfo_path = dir.join("sfo_vs_batch.svg");
        std::fs::write(
            &sfo_path,
            crate::harness::svg::sfo_chart(&result.aggregates, result.measured_critical, None)?,
        )?;
        written.push(sfo_path);
    }

    let meta_path = dir.join("metadata.txt");
    std::fs::write(&meta_path, metadata_text(cfg, result)?)?;
    written.push(meta_path);
    Ok(written)
}

fn metadata_text(cfg: &SweepConfig, result: &SweepResult) -> Result<String> {
    let mut s = String::new();
    s.push_str(&format!("config_fingerprint: {}\n", cfg.fingerprint()?));
    s.push_str(&format!("stop_mode: {}\n", cfg.sweep.stop_mode.name()));
    s.push_str(&format!("epsilon2_gen: {}\n", fmt(cfg.sweep.epsilon2_gen)));
    s.push_str(&format!("epsilon2_disc: {}\n", fmt(cfg.sweep.epsilon2_disc)));
    s.push_str("stop_rule: first crossing (no hysteresis), both players at or below threshold\n");
    s.push_str("averaging: per-run trajectory averages, then mean over finished seeds per batch size\n");
    s.push_str("determinism: all columns reproducible for a fixed config and master seed except wall_ms\n");
    match result.measured_critical {
        Some((b, sfo)) => {
            s.push_str(&format!("measured_critical_batch: {}\n", fmt(b)));
            s.push_str(&format!("measured_min_sfo: {}\n", fmt(sfo)));
        }
        None => s.push_str("measured_critical_batch: none (no finished runs)\n"),
    }
    Ok(s)
}

fn fmt(x: f64) -> String {
    // Plain decimal for integral values, shortest round-trip otherwise.
    if x.is_finite() && x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::example_config;
    use crate::harness::sweep::{aggregate, sweep_batches};

    fn small_result() -> (SweepConfig, SweepResult) {
        let mut cfg = SweepConfig::from_toml(example_config()).unwrap();
        cfg.problem.theta_dim = 4;
        cfg.problem.w_dim = 4;
        cfg.problem.pool_size = 64;
        cfg.problem.sigma2_gen = 1.0;
        cfg.problem.sigma2_disc = 1.0;
        cfg.sweep.batch_sizes = vec![1, 4, 16];
        cfg.sweep.seeds = 3;
        cfg.sweep.epsilon2_gen = 0.5;
        cfg.sweep.epsilon2_disc = 0.5;
        cfg.sweep.max_steps = 20_000;
        let result = sweep_batches(&cfg).unwrap();
        (cfg, result)
    }

    #[test]
    fn raw_csv_round_trips() {
        let (cfg, result) = small_result();
        let mut buf = Vec::new();
        write_raw_csv(&mut buf, &cfg, &result.cells).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run_id,b,seed,optimizer_gen,optimizer_disc,alpha_gen,alpha_disc,beta1,beta2,sigma2_gen,sigma2_disc,stop_mode,epsilon2,steps,status,wall_ms\n"));
        assert!(text.ends_with('\n'));
        assert_eq!(text.lines().count(), 1 + result.cells.len());

        let rows = read_raw_csv(buf.as_slice()).unwrap();
        let expected: Vec<RawRow> = result.cells.iter().map(|c| raw_row(&cfg, c)).collect();
        assert_eq!(rows, expected);
    }

    #[test]
    fn aggregate_csv_round_trips_and_verifies() {
        let (cfg, result) = small_result();
        let mut raw_buf = Vec::new();
        write_raw_csv(&mut raw_buf, &cfg, &result.cells).unwrap();
        let mut agg_buf = Vec::new();
        write_aggregate_csv(&mut agg_buf, &result.aggregates).unwrap();
        let text = String::from_utf8(agg_buf.clone()).unwrap();
        assert!(text.starts_with("b,n_seeds,mean_steps,min_steps,max_steps,sfo\n"));

        let raw = read_raw_csv(raw_buf.as_slice()).unwrap();
        let aggs = read_aggregate_csv(agg_buf.as_slice()).unwrap();
        verify_consistency(&raw, &aggs).unwrap();
    }

    #[test]
    fn verify_catches_a_corrupted_mean() {
        let (cfg, result) = small_result();
        let mut raw_buf = Vec::new();
        write_raw_csv(&mut raw_buf, &cfg, &result.cells).unwrap();
        let raw = read_raw_csv(raw_buf.as_slice()).unwrap();
        let mut aggs: Vec<AggRow> = result.aggregates.iter().map(AggRow::from).collect();
        aggs[0].mean_steps += 1.0;
        assert!(verify_consistency(&raw, &aggs).is_err());
        aggs.pop();
        assert!(verify_consistency(&raw, &aggs).is_err());
    }

    #[test]
    fn rows_are_byte_identical_across_repeat_sweeps_modulo_wall_ms() {
        let (cfg, r1) = small_result();
        let r2 = sweep_batches(&cfg).unwrap();
        let strip = |cells: &[CellResult]| -> String {
            let mut buf = Vec::new();
            write_raw_csv(&mut buf, &cfg, cells).unwrap();
            String::from_utf8(buf)
                .unwrap()
                .lines()
                .map(|l| l.rsplit_once(',').unwrap().0.to_string())
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(&r1.cells), strip(&r2.cells));
        assert_eq!(aggregate(&r1.cells), aggregate(&r2.cells));
    }

    #[test]
    fn output_files_land_in_the_requested_directory() {
        let (cfg, result) = small_result();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&cfg, &result, dir.path()).unwrap();
        let names: Vec<_> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"raw.csv".to_string()));
        assert!(names.contains(&"aggregate.csv".to_string()));
        assert!(names.contains(&"steps_vs_batch.svg".to_string()));
        assert!(names.contains(&"sfo_vs_batch.svg".to_string()));
        assert!(names.contains(&"metadata.txt".to_string()));
        for f in &files {
            assert!(f.exists());
        }
        // Idempotent overwrite.
        write_outputs(&cfg, &result, dir.path()).unwrap();
    }

    #[test]
    fn metrics_and_lr_grid_csvs_have_the_documented_headers() {
        let (cfg, result) = small_result();
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, result.cells[0].record.metrics.records()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,grad_norm_gen,grad_norm_disc,vi_avg_gen,vi_avg_disc,dist_gen,dist_disc\n"));

        let grid = crate::harness::sweep::lr_grid(&cfg, &[0.01, 0.02], &[0.01], 50).unwrap();
        let mut buf = Vec::new();
        write_lr_grid_csv(&mut buf, &grid).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("alpha_gen,0.01\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
