//! A single deterministic training run: seeded trajectory, per-step metrics
//! against the analytic saddle, first-crossing stop detection, and NaN
//! handling (a diverged run is an outcome, not an error).

use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{StopMode, TrajectoryMetrics};
use crate::optimizer::{ttur_step_k, PlayerHyperparams, PlayerState};
use crate::problems::MinimaxProblem;
use crate::vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Finished,
    Dnf,
    Diverged,
}

impl RunStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RunStatus::Finished => "finished",
            RunStatus::Dnf => "dnf",
            RunStatus::Diverged => "diverged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "finished" => Some(RunStatus::Finished),
            "dnf" => Some(RunStatus::Dnf),
            "diverged" => Some(RunStatus::Diverged),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub mode: StopMode,
    pub eps2_gen: f64,
    pub eps2_disc: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub b: usize,
    pub seed: u64,
    /// First step at which both stop criteria held.
    pub steps: Option<u64>,
    pub status: RunStatus,
    pub wall_ms: u64,
    pub metrics: TrajectoryMetrics,
    /// Preconditioner-monotonicity violations (generator, discriminator);
    /// structurally zero for AMSGrad, diagnostic for the other variants.
    pub a1_violations: (u64, u64),
    pub final_params: (Vec<f64>, Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub b: usize,
    pub seed: u64,
    pub stop: StopRule,
    pub max_steps: u64,
    pub disc_steps: usize,
    pub replacement: bool,
}

/// Runs one training to first crossing of the stop rule, divergence, or the
/// step cap. Deterministic in (settings.seed, config).
pub fn run_training(
    problem: &MinimaxProblem,
    hyper_gen: &PlayerHyperparams,
    hyper_disc: &PlayerHyperparams,
    settings: &RunSettings,
) -> Result<RunRecord> {
    let start = Instant::now();
    let (theta_ref, w_ref) = problem.saddle_point();
    let mut metrics = TrajectoryMetrics::new(theta_ref.clone(), w_ref.clone());

    // Default start: all-ones, a fixed distance from the saddle.
    let mut gen = PlayerState::new(vec![1.0; problem.theta_dim()], hyper_gen.clone())?;
    let mut disc = PlayerState::new(vec![1.0; problem.w_dim()], hyper_disc.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let mut steps = None;
    let mut status = RunStatus::Dnf;
    for n in 1..=settings.max_steps {
        ttur_step_k(
            &mut gen,
            &mut disc,
            problem,
            settings.b,
            settings.disc_steps,
            &mut rng,
            settings.replacement,
        )?;
        if !vector::is_finite(&gen.params) || !vector::is_finite(&disc.params) {
            status = RunStatus::Diverged;
            break;
        }
        let grads = problem.exact_gradients(&gen.params, &disc.params)?;
        metrics.record(&gen.params, &disc.params, &grads)?;
        if steps.is_none()
            && metrics
                .steps_to_threshold(settings.stop.eps2_gen, settings.stop.eps2_disc, settings.stop.mode)
                == Some(n)
        {
            steps = Some(n);
            status = RunStatus::Finished;
            break;
        }
    }

    Ok(RunRecord {
        b: settings.b,
        seed: settings.seed,
        steps,
        status,
        wall_ms: start.elapsed().as_millis() as u64,
        metrics,
        a1_violations: (gen.monotonicity_violations(), disc.monotonicity_violations()),
        final_params: (gen.params, disc.params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preconditioner::PreconditionerKind;

    fn stop(eps2: f64) -> StopRule {
        StopRule {
            mode: StopMode::GradNorm,
            eps2_gen: eps2,
            eps2_disc: eps2,
        }
    }

    fn settings(b: usize, seed: u64, eps2: f64, max_steps: u64) -> RunSettings {
        RunSettings {
            b,
            seed,
            stop: stop(eps2),
            max_steps,
            disc_steps: 1,
            replacement: true,
        }
    }

    #[test]
    fn noiseless_quadratic_converges() {
        let p = MinimaxProblem::quadratic_saddle(4, 1.0, 1.0, 0.3, 8, 0.0, 0).unwrap();
        let hp = PlayerHyperparams::new(PreconditionerKind::RmsProp, 0.05, 0.0, 0.99).unwrap();
        let rec = run_training(&p, &hp, &hp, &settings(2, 1, 0.05, 50_000)).unwrap();
        assert_eq!(rec.status, RunStatus::Finished);
        let n = rec.steps.unwrap();
        assert!(n >= 1);
        let last = &rec.metrics.records()[n as usize - 1];
        assert!(last.grad_norm_gen <= 0.05 && last.grad_norm_disc <= 0.05);
    }

    #[test]
    fn unreachable_threshold_is_dnf_with_all_rows() {
        let p = MinimaxProblem::quadratic_saddle(2, 1.0, 1.0, 0.0, 8, 1.0, 0).unwrap();
        let hp = PlayerHyperparams::new(PreconditionerKind::Adam, 0.01, 0.5, 0.999).unwrap();
        let rec = run_training(&p, &hp, &hp, &settings(2, 1, 1e-30, 10)).unwrap();
        assert_eq!(rec.status, RunStatus::Dnf);
        assert_eq!(rec.steps, None);
        assert_eq!(rec.metrics.records().len(), 10);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = MinimaxProblem::bilinear(3, 1.0, 32, 1.0, 3).unwrap();
        let hp = PlayerHyperparams::new(PreconditionerKind::AdaBelief, 0.01, 0.5, 0.999).unwrap();
        let s = settings(4, 99, 1e-12, 50);
        let a = run_training(&p, &hp, &hp, &s).unwrap();
        let b = run_training(&p, &hp, &hp, &s).unwrap();
        assert_eq!(a.metrics.records(), b.metrics.records());
        assert_eq!(a.final_params, b.final_params);
    }

    #[test]
    fn non_finite_parameters_are_reported_as_diverged() {
        // A coupling so extreme the very first gradient overflows; the solve
        // then yields NaN and the run must be recorded as diverged, not
        // treated as an error or a dnf.
        let p = crate::problems::MinimaxProblem::new(
            "overflow",
            crate::problems::PayoffKind::Bilinear,
            vec![1e308; 4],
            2,
            2,
            8,
            0.0,
            0.0,
            0,
        )
        .unwrap();
        let hp = PlayerHyperparams::new(PreconditionerKind::Adam, 0.1, 0.5, 0.999).unwrap();
        let rec = run_training(&p, &hp, &hp, &settings(1, 0, 1e-9, 200)).unwrap();
        assert_eq!(rec.status, RunStatus::Diverged);
        assert_eq!(rec.steps, None);
    }
}
