//! Per-trajectory performance measures: stationarity norms, running
//! variational-inequality gap averages, distance to a reference pair, and
//! first-crossing detection of a stop threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::GradientPair;
use crate::vector::{self, ParamVector};

/// Which per-step quantity the stop threshold is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    ViAverage,
    GradNorm,
    Distance,
}

impl StopMode {
    pub fn name(&self) -> &'static str {
        match self {
            StopMode::ViAverage => "vi_average",
            StopMode::GradNorm => "grad_norm",
            StopMode::Distance => "distance",
        }
    }
}

/// One recorded step; `n` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub n: u64,
    pub grad_norm_gen: f64,
    pub grad_norm_disc: f64,
    pub vi_avg_gen: f64,
    pub vi_avg_disc: f64,
    pub dist_gen: f64,
    pub dist_disc: f64,
}

/// Accumulates per-step records against fixed reference points
/// (the analytic saddle by default).
#[derive(Debug, Clone)]
pub struct TrajectoryMetrics {
    theta_ref: ParamVector,
    w_ref: ParamVector,
    records: Vec<StepRecord>,
}

impl TrajectoryMetrics {
    pub fn new(theta_ref: ParamVector, w_ref: ParamVector) -> Self {
        Self {
            theta_ref,
            w_ref,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn theta_ref(&self) -> &[f64] {
        &self.theta_ref
    }

    pub fn w_ref(&self) -> &[f64] {
        &self.w_ref
    }

    /// Records one step from the current point and its EXACT gradients.
    /// The running VI averages follow the incremental mean recurrence.
    pub fn record(&mut self, theta: &[f64], w: &[f64], grads: &GradientPair) -> Result<&StepRecord> {
        let (gap_gen, gap_disc) = vi_gap_term(theta, w, &self.theta_ref, &self.w_ref, grads)?;
        let n = self.records.len() as u64 + 1;
        let (prev_gen, prev_disc) = self
            .records
            .last()
            .map(|r| (r.vi_avg_gen, r.vi_avg_disc))
            .unwrap_or((0.0, 0.0));
        let rec = StepRecord {
            n,
            grad_norm_gen: vector::norm(&grads.gen),
            grad_norm_disc: vector::norm(&grads.disc),
            vi_avg_gen: prev_gen + (gap_gen - prev_gen) / n as f64,
            vi_avg_disc: prev_disc + (gap_disc - prev_disc) / n as f64,
            dist_gen: vector::norm(&vector::sub(theta, &self.theta_ref)),
            dist_disc: vector::norm(&vector::sub(w, &self.w_ref)),
        };
        self.records.push(rec);
        Ok(self.records.last().unwrap())
    }

    /// Smallest 1-based N at which BOTH players' chosen criterion is at or
    /// below its threshold; `None` if never.
    pub fn steps_to_threshold(&self, eps2_gen: f64, eps2_disc: f64, mode: StopMode) -> Option<u64> {
        self.records
            .iter()
            .find(|r| {
                let (vg, vd) = mode_values(r, mode);
                vg <= eps2_gen && vd <= eps2_disc
            })
            .map(|r| r.n)
    }
}

fn mode_values(r: &StepRecord, mode: StopMode) -> (f64, f64) {
    match mode {
        StopMode::ViAverage => (r.vi_avg_gen, r.vi_avg_disc),
        StopMode::GradNorm => (r.grad_norm_gen, r.grad_norm_disc),
        StopMode::Distance => (r.dist_gen, r.dist_disc),
    }
}

/// The two VI gap terms <theta_n - theta_ref, g_gen> and
/// <w_n - w_ref, g_disc> at one point, from exact gradients.
pub fn vi_gap_term(
    theta: &[f64],
    w: &[f64],
    theta_ref: &[f64],
    w_ref: &[f64],
    grads: &GradientPair,
) -> Result<(f64, f64)> {
    Error::check_dim(theta.len(), theta_ref.len())?;
    Error::check_dim(w.len(), w_ref.len())?;
    Error::check_dim(theta.len(), grads.gen.len())?;
    Error::check_dim(w.len(), grads.disc.len())?;
    let gen = vector::dot(&vector::sub(theta, theta_ref), &grads.gen);
    let disc = vector::dot(&vector::sub(w, w_ref), &grads.disc);
    Ok((gen, disc))
}

/// Stationarity certificate: |grad|^2. Zero exactly at stationary points;
/// the VI test instance y = point - grad violates the inequality by exactly
/// the negated residual otherwise.
pub fn vi_certificate(point: &[f64], grad: &[f64]) -> Result<f64> {
    Error::check_dim(point.len(), grad.len())?;
    Ok(vector::norm_sq(grad))
}
