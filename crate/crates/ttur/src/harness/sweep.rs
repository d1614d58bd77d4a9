//! Batch-size sweeps and learning-rate grids. Every cell (batch size, seed)
//! derives its own RNG seed from the master seed, so results are identical
//! whether cells run serially or across a thread pool.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::SweepConfig;
use crate::harness::run::{run_training, RunRecord, RunSettings, RunStatus, StopRule};
use crate::metrics::StopMode;
use crate::theory;

/// One (batch size, seed) training outcome.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub b: usize,
    pub seed_index: u32,
    pub seed: u64,
    pub record: RunRecord,
}

/// Per-batch-size aggregate over the seeds that finished.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchAggregate {
    pub b: usize,
    pub n_seeds: usize,
    pub mean_steps: f64,
    pub min_steps: u64,
    pub max_steps: u64,
    /// mean_steps * b: stochastic-gradient evaluations per player to stop.
    pub sfo: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Sorted by (b, seed_index).
    pub cells: Vec<CellResult>,
    /// Sorted by b; only batch sizes with at least one finished seed.
    pub aggregates: Vec<BatchAggregate>,
    /// (b, sfo) minimizing measured SFO complexity, if any run finished.
    pub measured_critical: Option<(f64, f64)>,
}

/// SplitMix64 finalizer over (master, b, seed index); decorrelates cells
/// whose inputs differ in a single bit.
pub fn cell_seed(master_seed: u64, b: usize, seed_index: u32) -> u64 {
    let mut z = master_seed
        .wrapping_add((b as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add((seed_index as u64 + 1).wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn cell_settings(cfg: &SweepConfig, b: usize, seed_index: u32) -> RunSettings {
    let s = &cfg.sweep;
    RunSettings {
        b,
        seed: cell_seed(s.master_seed, b, seed_index),
        stop: StopRule {
            mode: s.stop_mode,
            eps2_gen: s.epsilon2_gen,
            eps2_disc: s.epsilon2_disc,
        },
        max_steps: s.max_steps,
        disc_steps: s.disc_steps,
        replacement: s.replacement,
    }
}

/// Runs one cell of the sweep grid.
pub fn run_cell(cfg: &SweepConfig, b: usize, seed_index: u32) -> Result<CellResult> {
    let problem = cfg.build_problem()?;
    let hyper_gen = cfg.generator.build(problem.theta_dim())?;
    let hyper_disc = cfg.discriminator.build(problem.w_dim())?;
    let settings = cell_settings(cfg, b, seed_index);
    let seed = settings.seed;
    let record = run_training(&problem, &hyper_gen, &hyper_disc, &settings)?;
    Ok(CellResult {
        b,
        seed_index,
        seed,
        record,
    })
}

/// Runs the full (batch sizes x seeds) grid and aggregates the results.
/// `parallelism` in the config picks the worker count; 0 uses the rayon
/// default pool. Output is byte-for-byte independent of the worker count.
pub fn sweep_batches(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let hyper_gen = cfg.generator.build(problem.theta_dim())?;
    let hyper_disc = cfg.discriminator.build(problem.w_dim())?;

    let grid: Vec<(usize, u32)> = cfg
        .sweep
        .batch_sizes
        .iter()
        .flat_map(|&b| (0..cfg.sweep.seeds).map(move |s| (b, s)))
        .collect();

    let run_one = |&(b, seed_index): &(usize, u32)| -> Result<CellResult> {
        let settings = cell_settings(cfg, b, seed_index);
        let seed = settings.seed;
        let record = run_training(&problem, &hyper_gen, &hyper_disc, &settings)?;
        Ok(CellResult {
            b,
            seed_index,
            seed,
            record,
        })
    };

    let cells: Vec<CellResult> = if cfg.sweep.parallelism == 1 {
        grid.iter().map(run_one).collect::<Result<_>>()?
    } else if cfg.sweep.parallelism == 0 {
        grid.par_iter().map(run_one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.sweep.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| grid.par_iter().map(run_one).collect::<Result<_>>())?
    };
    // par_iter keeps input order, so cells are already (b, seed) sorted.

    let aggregates = aggregate(&cells);
    let measured_critical = theory::measured_critical_batch(
        &aggregates
            .iter()
            .map(|a| (a.b as f64, a.mean_steps))
            .collect::<Vec<_>>(),
    )
    .ok();

    Ok(SweepResult {
        cells,
        aggregates,
        measured_critical,
    })
}

/// Per-batch means over finished runs only; batch sizes where every seed
/// hit the cap or diverged produce no aggregate row.
pub fn aggregate(cells: &[CellResult]) -> Vec<BatchAggregate> {
    let mut batches: Vec<usize> = cells.iter().map(|c| c.b).collect();
    batches.sort_unstable();
    batches.dedup();

    let mut out = Vec::new();
    for b in batches {
        let steps: Vec<u64> = cells
            .iter()
            .filter(|c| c.b == b && c.record.status == RunStatus::Finished)
            .filter_map(|c| c.record.steps)
            .collect();
        if steps.is_empty() {
            continue;
        }
        let mean = steps.iter().sum::<u64>() as f64 / steps.len() as f64;
        out.push(BatchAggregate {
            b,
            n_seeds: steps.len(),
            mean_steps: mean,
            min_steps: *steps.iter().min().unwrap(),
            max_steps: *steps.iter().max().unwrap(),
            sfo: mean * b as f64,
        });
    }
    out
}

/// Learning-rate grid outcome. `values` is row-major over
/// (generator alpha, discriminator alpha); each entry is the larger of the
/// two players' stop-mode measures after a fixed number of steps, or NaN if
/// the run diverged.
#[derive(Debug, Clone)]
pub struct LrGridResult {
    pub alphas_gen: Vec<f64>,
    pub alphas_disc: Vec<f64>,
    pub stop_mode: StopMode,
    pub steps: u64,
    pub values: Vec<f64>,
}

impl LrGridResult {
    pub fn value(&self, i_gen: usize, i_disc: usize) -> f64 {
        self.values[i_gen * self.alphas_disc.len() + i_disc]
    }
}

/// Runs a fixed-step training for every (alpha^G, alpha^D) pair, holding
/// everything else from the config fixed and using the first configured
/// batch size and the master seed for every cell.
pub fn lr_grid(cfg: &SweepConfig, alphas_gen: &[f64], alphas_disc: &[f64], steps: u64) -> Result<LrGridResult> {
    cfg.validate()?;
    if alphas_gen.is_empty() || alphas_disc.is_empty() {
        return Err(Error::Config("learning-rate grid must be nonempty".into()));
    }
    if steps < 1 {
        return Err(Error::Config("grid runs need at least one step".into()));
    }
    let problem = cfg.build_problem()?;
    let b = cfg.sweep.batch_sizes[0];

    let pairs: Vec<(f64, f64)> = alphas_gen
        .iter()
        .flat_map(|&ag| alphas_disc.iter().map(move |&ad| (ag, ad)))
        .collect();

    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(ag, ad)| -> Result<f64> {
            let mut gen_cfg = cfg.generator.clone();
            gen_cfg.alpha = ag;
            let mut disc_cfg = cfg.discriminator.clone();
            disc_cfg.alpha = ad;
            let hyper_gen = gen_cfg.build(problem.theta_dim())?;
            let hyper_disc = disc_cfg.build(problem.w_dim())?;
            let settings = RunSettings {
                b,
                seed: cfg.sweep.master_seed,
                stop: StopRule {
                    mode: cfg.sweep.stop_mode,
                    // Unreachable thresholds: run the full step budget.
                    eps2_gen: f64::MIN_POSITIVE,
                    eps2_disc: f64::MIN_POSITIVE,
                },
                max_steps: steps,
                disc_steps: cfg.sweep.disc_steps,
                replacement: cfg.sweep.replacement,
            };
            let rec = run_training(&problem, &hyper_gen, &hyper_disc, &settings)?;
            if rec.status == RunStatus::Diverged {
                return Ok(f64::NAN);
            }
            let last = rec.metrics.records().last().ok_or(Error::EmptyTrajectory)?;
            Ok(match cfg.sweep.stop_mode {
                StopMode::ViAverage => last.vi_avg_gen.max(last.vi_avg_disc),
                StopMode::GradNorm => last.grad_norm_gen.max(last.grad_norm_disc),
                StopMode::Distance => last.dist_gen.max(last.dist_disc),
            })
        })
        .collect::<Result<_>>()?;

    Ok(LrGridResult {
        alphas_gen: alphas_gen.to_vec(),
        alphas_disc: alphas_disc.to_vec(),
        stop_mode: cfg.sweep.stop_mode,
        steps,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::example_config;

    fn small_config() -> SweepConfig {
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
        cfg
    }

    #[test]
    fn cell_seeds_are_distinct_across_the_grid() {
        let mut seen = std::collections::HashSet::new();
        for b in [1usize, 2, 4, 8, 16, 32, 64, 128, 256] {
            for s in 0..20 {
                assert!(seen.insert(cell_seed(42, b, s)), "collision at b={b} s={s}");
            }
        }
        assert_ne!(cell_seed(1, 2, 3), cell_seed(2, 2, 3));
    }

    #[test]
    fn serial_and_parallel_sweeps_agree() {
        let mut serial_cfg = small_config();
        serial_cfg.sweep.parallelism = 1;
        let mut par_cfg = small_config();
        par_cfg.sweep.parallelism = 3;

        let a = sweep_batches(&serial_cfg).unwrap();
        let b = sweep_batches(&par_cfg).unwrap();
        assert_eq!(a.cells.len(), b.cells.len());
        for (x, y) in a.cells.iter().zip(&b.cells) {
            assert_eq!((x.b, x.seed_index, x.seed), (y.b, y.seed_index, y.seed));
            assert_eq!(x.record.status, y.record.status);
            assert_eq!(x.record.steps, y.record.steps);
            assert_eq!(x.record.final_params, y.record.final_params);
        }
        assert_eq!(a.aggregates, b.aggregates);
    }

    #[test]
    fn aggregate_means_match_hand_computation() {
        let cfg = small_config();
        let result = sweep_batches(&cfg).unwrap();
        for agg in &result.aggregates {
            let steps: Vec<u64> = result
                .cells
                .iter()
                .filter(|c| c.b == agg.b && c.record.status == RunStatus::Finished)
                .map(|c| c.record.steps.unwrap())
                .collect();
            assert_eq!(agg.n_seeds, steps.len());
            let mean = steps.iter().sum::<u64>() as f64 / steps.len() as f64;
            assert!((agg.mean_steps - mean).abs() < 1e-12);
            assert!((agg.sfo - mean * agg.b as f64).abs() < 1e-9);
            assert_eq!(agg.min_steps, *steps.iter().min().unwrap());
            assert_eq!(agg.max_steps, *steps.iter().max().unwrap());
        }
    }

    #[test]
    fn all_dnf_batches_are_dropped_from_aggregates() {
        let mut cfg = small_config();
        cfg.sweep.epsilon2_gen = 1e-300;
        cfg.sweep.epsilon2_disc = 1e-300;
        cfg.sweep.max_steps = 20;
        let result = sweep_batches(&cfg).unwrap();
        assert!(result.aggregates.is_empty());
        assert!(result.measured_critical.is_none());
        assert_eq!(result.cells.len(), 9);
    }

    #[test]
    fn lr_grid_cells_depend_only_on_their_own_alphas() {
        // Each cell of the full grid equals the corresponding 1x1 grid.
        let cfg = small_config();
        let ag = [0.005, 0.02, 0.08];
        let ad = [0.01, 0.04];
        let full = lr_grid(&cfg, &ag, &ad, 300).unwrap();
        assert_eq!(full.values.len(), 6);
        for (i, &a_g) in ag.iter().enumerate() {
            for (j, &a_d) in ad.iter().enumerate() {
                let single = lr_grid(&cfg, &[a_g], &[a_d], 300).unwrap();
                assert_eq!(full.value(i, j).to_bits(), single.value(0, 0).to_bits());
            }
        }
    }
}
