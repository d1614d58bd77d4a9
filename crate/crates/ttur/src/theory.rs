//! Closed-form objects of the batch-size theory: the per-player bound
//! constants, the hyperbolic step model N(b), SFO complexity N(b) * b, the
//! critical batch size 2B / kappa, the per-optimizer lower-bound estimators,
//! and least-squares fitting of the step model from sweep data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preconditioner::PreconditionerKind;

/// Constituent inputs of one player's bound constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Parameter dimension of this player.
    pub dim: usize,
    /// Squared-coordinate distance bound Dist.
    pub dist: f64,
    /// Upper bound H on the expected preconditioner diagonal.
    pub h_max: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub gamma: f64,
    /// Smallest initial diagonal entry h_{0,*}.
    pub h0_star: f64,
    pub sigma2: f64,
    /// Squared full-gradient norm bound M^2.
    pub m2: f64,
}

/// The constants (A, B, C) of the averaged-gap bound A/N + B/b + C.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub inputs: BoundInputs,
}

impl BoundConstants {
    pub fn from_inputs(inputs: BoundInputs) -> Result<Self> {
        if inputs.dim == 0 {
            return Err(Error::InvalidHyperparameter("dim must be positive".into()));
        }
        for (name, v) in [
            ("dist", inputs.dist),
            ("h_max", inputs.h_max),
            ("alpha", inputs.alpha),
            ("h0_star", inputs.h0_star),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidHyperparameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("beta1", inputs.beta1), ("gamma", inputs.gamma)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidHyperparameter(format!(
                    "{name} must lie in [0,1), got {v}"
                )));
            }
        }
        if inputs.sigma2 < 0.0 || inputs.m2 < 0.0 {
            return Err(Error::InvalidHyperparameter(
                "sigma2 and m2 must be nonnegative".into(),
            ));
        }
        let bt = 1.0 - inputs.beta1;
        let gt = 1.0 - inputs.gamma;
        let dim = inputs.dim as f64;
        let a = dim * inputs.dist * inputs.h_max / (2.0 * inputs.alpha * bt);
        let denom = 2.0 * bt * gt * gt * inputs.h0_star;
        let b = inputs.sigma2 * inputs.alpha / denom;
        let c = inputs.m2 * inputs.alpha / denom
            + (inputs.beta1 / bt) * (dim * inputs.dist * (inputs.sigma2 + inputs.m2)).sqrt();
        Ok(Self { a, b, c, inputs })
    }

    /// Evaluates the bound A/N + B/b + C.
    pub fn theorem1_bound(&self, n: f64, batch: f64) -> Result<f64> {
        if !(n >= 1.0) || !(batch >= 1.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "bound needs N >= 1 and b >= 1, got N = {n}, b = {batch}"
            )));
        }
        Ok(self.a / n + self.b / batch + self.c)
    }

    /// Limit of the bound as both N and b grow without bound: just C.
    pub fn asymptotic_floor(&self) -> f64 {
        self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelProvenance {
    Analytic,
    Fitted,
}

/// The hyperbola N(b) = A b / (kappa b - B) with kappa = eps^2 - C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepModel {
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
    pub provenance: ModelProvenance,
}

impl StepModel {
    pub fn new(a: f64, b: f64, kappa: f64, provenance: ModelProvenance) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::NonPositiveKappa(kappa));
        }
        if !(a > 0.0) || b < 0.0 {
            return Err(Error::InvalidHyperparameter(format!(
                "step model needs A > 0 and B >= 0, got A = {a}, B = {b}"
            )));
        }
        Ok(Self { a, b, kappa, provenance })
    }

    /// From explicit bound constants and a target accuracy eps.
    pub fn from_bound(c: &BoundConstants, eps: f64) -> Result<Self> {
        let kappa = eps * eps - c.c;
        if !(kappa > 0.0) {
            return Err(Error::NonPositiveKappa(kappa));
        }
        Self::new(c.a, c.b, kappa, ModelProvenance::Analytic)
    }

    /// Left edge of the domain of validity, B / kappa.
    pub fn domain_edge(&self) -> f64 {
        self.b / self.kappa
    }

    /// N(b) = A b / (kappa b - B).
    pub fn steps_needed(&self, batch: f64) -> Result<f64> {
        if batch <= self.domain_edge() {
            return Err(Error::OutsideModelDomain {
                batch,
                edge: self.domain_edge(),
            });
        }
        Ok(self.a * batch / (self.kappa * batch - self.b))
    }

    /// N(b) * b.
    pub fn sfo_complexity(&self, batch: f64) -> Result<f64> {
        Ok(self.steps_needed(batch)? * batch)
    }

    /// The SFO-minimizing batch size 2B / kappa. B = 0 degenerates to 0 and
    /// is reported with the noiseless flag set.
    pub fn critical_batch(&self) -> CriticalBatch {
        CriticalBatch {
            batch: 2.0 * self.b / self.kappa,
            noiseless: self.b == 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalBatch {
    pub batch: f64,
    pub noiseless: bool,
}

/// Result of fitting the step model against (b, mean steps) sweep data.
#[derive(Debug, Clone, PartialEq)]
pub struct StepModelFit {
    pub model: StepModel,
    /// R^2 of the linearized fit 1/N = kappa/A - (B/A) / b.
    pub r_squared: f64,
}

/// Least-squares fit of 1/N = kappa/A - (B/A)/b, linear in 1/b.
///
/// eps^2 and C are not separately identifiable from (b, N) pairs, so kappa
/// is normalized to 1; the ratios A/kappa and B/kappa — and therefore the
/// critical batch 2B/kappa — are recovered exactly on clean data.
pub fn fit_step_model(samples: &[(f64, f64)]) -> Result<StepModelFit> {
    let distinct = {
        let mut bs: Vec<f64> = samples.iter().map(|(b, _)| *b).collect();
        bs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        bs.dedup();
        bs.len()
    };
    if samples.len() < 3 || distinct < 3 {
        return Err(Error::FitFailed(format!(
            "need at least 3 samples with distinct batch sizes, got {} ({} distinct)",
            samples.len(),
            distinct
        )));
    }
    for &(b, n) in samples {
        if !(b > 0.0) || !(n > 0.0) {
            return Err(Error::FitFailed(format!("invalid sample (b = {b}, N = {n})")));
        }
    }
    // Ordinary least squares of y = c0 + c1 x with x = 1/b, y = 1/N.
    let m = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|(b, _)| 1.0 / b).collect();
    let ys: Vec<f64> = samples.iter().map(|(_, n)| 1.0 / n).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    if sxx <= 0.0 {
        return Err(Error::FitFailed("degenerate batch axis".into()));
    }
    let c1 = sxy / sxx;
    let c0 = y_mean - c1 * x_mean;
    if !(c0 > 0.0) {
        return Err(Error::FitFailed(format!(
            "fitted asymptote is nonpositive (kappa/A = {c0}); data does not plateau"
        )));
    }
    // Normalize kappa = 1: A = 1/c0, B = -c1/c0.
    let a = 1.0 / c0;
    let b = -c1 / c0;
    if b < 0.0 {
        return Err(Error::FitFailed(format!(
            "fitted B = {b} < 0; noise-dominated or non-decreasing data"
        )));
    }
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = c0 + c1 * x;
            (y - pred) * (y - pred)
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(StepModelFit {
        model: StepModel::new(a, b, 1.0, ModelProvenance::Fitted)?,
        r_squared,
    })
}

/// Inputs to the per-optimizer critical-batch lower bounds. The noise level
/// enters only through the ratio rho = sigma^2 / eps^3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorInputs {
    pub kind: PreconditionerKind,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Model dimension of the player (Theta or W).
    pub dim: usize,
    /// Dataset size |S|.
    pub pool_size: usize,
    /// rho = sigma^2 / eps^3.
    pub rho: f64,
}

impl EstimatorInputs {
    pub fn from_ratio(
        kind: PreconditionerKind,
        rho: f64,
        alpha: f64,
        beta1: f64,
        beta2: f64,
        dim: usize,
        pool_size: usize,
    ) -> Result<Self> {
        let e = Self { kind, alpha, beta1, beta2, dim, pool_size, rho };
        e.validate()?;
        Ok(e)
    }

    pub fn from_sigma_eps(
        kind: PreconditionerKind,
        sigma2: f64,
        eps: f64,
        alpha: f64,
        beta1: f64,
        beta2: f64,
        dim: usize,
        pool_size: usize,
    ) -> Result<Self> {
        if sigma2 < 0.0 || !(eps > 0.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "need sigma2 >= 0 and eps > 0, got sigma2 = {sigma2}, eps = {eps}"
            )));
        }
        Self::from_ratio(kind, sigma2 / (eps * eps * eps), alpha, beta1, beta2, dim, pool_size)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || self.rho < 0.0 {
            return Err(Error::InvalidHyperparameter(format!(
                "need alpha > 0 and rho >= 0, got alpha = {}, rho = {}",
                self.alpha, self.rho
            )));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidHyperparameter(format!(
                    "{name} must lie in [0,1), got {v}"
                )));
            }
        }
        if self.dim == 0 || self.pool_size == 0 {
            return Err(Error::InvalidHyperparameter(
                "dim and pool size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-optimizer lower bound on the critical batch size.
pub fn prop4_lower_bound(e: &EstimatorInputs) -> Result<f64> {
    e.validate()?;
    let dim = e.dim as f64;
    let pool = e.pool_size as f64;
    let bound = match e.kind {
        PreconditionerKind::Adam => {
            let root = (dim / (1.0 - e.beta2)).sqrt() / pool;
            e.rho * e.alpha / ((1.0 - e.beta1).powi(3) * root)
        }
        PreconditionerKind::AdaBelief => {
            let root = (4.0 * dim / (1.0 - e.beta2)).sqrt() / pool;
            e.rho * e.alpha / ((1.0 - e.beta1).powi(3) * root)
        }
        PreconditionerKind::RmsProp => {
            if e.beta1 != 0.0 {
                return Err(Error::InvalidHyperparameter(
                    "the rmsprop estimator assumes beta1 = 0".into(),
                ));
            }
            let root = dim.sqrt() / pool;
            e.rho * e.alpha / root
        }
        PreconditionerKind::AmsGrad => {
            return Err(Error::UnsupportedKind("amsgrad".into()));
        }
    };
    Ok(bound)
}

/// Inverts the lower bound at a measured critical batch size, returning the
/// ratio rho = sigma^2 / eps^3 that makes the bound hold with equality.
pub fn backcalc_ratio(
    kind: PreconditionerKind,
    measured_b_star: f64,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    dim: usize,
    pool_size: usize,
) -> Result<f64> {
    if !(measured_b_star > 0.0) {
        return Err(Error::InvalidHyperparameter(format!(
            "measured critical batch must be positive, got {measured_b_star}"
        )));
    }
    // The bound is linear in rho: bound(rho) = rho * bound(1).
    let unit = EstimatorInputs::from_ratio(kind, 1.0, alpha, beta1, beta2, dim, pool_size)?;
    let per_rho = prop4_lower_bound(&unit)?;
    Ok(measured_b_star / per_rho)
}

/// Nearest power of two (linear distance, ties toward the smaller power),
/// the reporting convention alongside the raw bound.
pub fn nearest_power_of_two(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidHyperparameter(format!(
            "nearest power of two needs x > 0, got {x}"
        )));
    }
    let lo = 2.0f64.powi(x.log2().floor() as i32);
    let hi = 2.0 * lo;
    Ok(if x - lo <= hi - x { lo } else { hi })
}

/// Argmin over swept batch sizes of mean-steps * b; ties break toward the
/// smaller batch. Input pairs are (b, mean steps) for batches whose runs
/// reached the threshold.
pub fn measured_critical_batch(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &(b, n) in samples {
        if !n.is_finite() || !(b > 0.0) {
            continue;
        }
        let sfo = n * b;
        best = match best {
            None => Some((b, sfo)),
            Some((bb, bs)) => {
                if sfo < bs || (sfo == bs && b < bb) {
                    Some((b, sfo))
                } else {
                    Some((bb, bs))
                }
            }
        };
    }
    best.ok_or(Error::NoFinishedRuns)
}
