//! Diagonal preconditioner update rules for the adaptive two-player method.
//!
//! Each variant maintains its own second-moment accumulators and emits a
//! positive diagonal used by the linear solve in the player step. A floor
//! `delta` keeps every emitted entry strictly positive even from a zero
//! initial state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    RmsProp,
    Adam,
    AmsGrad,
    AdaBelief,
}

impl PreconditionerKind {
    pub fn name(&self) -> &'static str {
        match self {
            PreconditionerKind::RmsProp => "rmsprop",
            PreconditionerKind::Adam => "adam",
            PreconditionerKind::AmsGrad => "amsgrad",
            PreconditionerKind::AdaBelief => "adabelief",
        }
    }
}

pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PreconditionerState {
    kind: PreconditionerKind,
    beta2: f64,
    floor: f64,
    /// 1-based update count after the latest `update` call.
    step_index: u64,
    /// Exponential second moment v (RMSProp / Adam / AMSGrad).
    second_moment: ParamVector,
    /// Coordinatewise running max of v (AMSGrad only).
    running_max: ParamVector,
    /// Exponential belief accumulator s (AdaBelief only).
    belief: ParamVector,
    /// Previously emitted diagonal, for the monotonicity diagnostic.
    prev_diag: Option<ParamVector>,
    /// Coordinates where the emitted diagonal decreased between steps.
    /// Structurally zero for AMSGrad; diagnostic for the other variants.
    monotonicity_violations: u64,
}

impl PreconditionerState {
    pub fn new(kind: PreconditionerKind, dim: usize, beta2: f64, floor: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta2) {
            return Err(Error::InvalidHyperparameter(format!(
                "beta2 must lie in [0,1), got {beta2}"
            )));
        }
        if !(floor > 0.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "floor must be positive, got {floor}"
            )));
        }
        Ok(Self {
            kind,
            beta2,
            floor,
            step_index: 0,
            second_moment: vec![0.0; dim],
            running_max: vec![0.0; dim],
            belief: vec![0.0; dim],
            prev_diag: None,
            monotonicity_violations: 0,
        })
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.second_moment.len()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn monotonicity_violations(&self) -> u64 {
        self.monotonicity_violations
    }

    /// Advances the accumulators with a new mini-batch gradient and returns
    /// the diagonal entries of the preconditioner.
    ///
    /// `momentum` is only read by the AdaBelief rule, which tracks the squared
    /// deviation of the gradient from the current momentum.
    pub fn update(&mut self, grad: &[f64], momentum: &[f64]) -> Result<ParamVector> {
        let dim = self.dim();
        Error::check_dim(dim, grad.len())?;
        if self.kind == PreconditionerKind::AdaBelief {
            Error::check_dim(dim, momentum.len())?;
        }
        self.step_index += 1;
        let n = self.step_index;
        let b2 = self.beta2;
        // 1 - beta2^n; equals 1 when beta2 = 0.
        let correction = 1.0 - b2.powi(n as i32);

        let mut diag = vec![0.0; dim];
        match self.kind {
            PreconditionerKind::RmsProp => {
                for i in 0..dim {
                    self.second_moment[i] = b2 * self.second_moment[i] + (1.0 - b2) * grad[i] * grad[i];
                    diag[i] = self.second_moment[i].sqrt();
                }
            }
            PreconditionerKind::Adam => {
                for i in 0..dim {
                    self.second_moment[i] = b2 * self.second_moment[i] + (1.0 - b2) * grad[i] * grad[i];
                    diag[i] = (self.second_moment[i] / correction).sqrt();
                }
            }
            PreconditionerKind::AmsGrad => {
                for i in 0..dim {
                    self.second_moment[i] = b2 * self.second_moment[i] + (1.0 - b2) * grad[i] * grad[i];
                    self.running_max[i] = self.running_max[i].max(self.second_moment[i]);
                    diag[i] = self.running_max[i].sqrt();
                }
            }
            PreconditionerKind::AdaBelief => {
                for i in 0..dim {
                    let dev = grad[i] - momentum[i];
                    self.belief[i] = b2 * self.belief[i] + (1.0 - b2) * dev * dev;
                    diag[i] = (self.belief[i] / correction).sqrt();
                }
            }
        }
        for d in diag.iter_mut() {
            *d = d.max(self.floor);
        }
        if let Some(prev) = &self.prev_diag {
            self.monotonicity_violations += diag
                .iter()
                .zip(prev)
                .filter(|(now, before)| *now < *before)
                .count() as u64;
        }
        self.prev_diag = Some(diag.clone());
        Ok(diag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DELTA: f64 = DEFAULT_FLOOR;

    #[test]
    fn rmsprop_single_step_from_zero() {
        let mut st = PreconditionerState::new(PreconditionerKind::RmsProp, 2, 0.99, DELTA).unwrap();
        let h = st.update(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((h[0] - 0.1).abs() < 1e-15);
        assert_eq!(h[1], DELTA);
    }

    #[test]
    fn adam_first_step_bias_correction_returns_abs_grad() {
        let mut st = PreconditionerState::new(PreconditionerKind::Adam, 1, 0.999, DELTA).unwrap();
        let h = st.update(&[2.0], &[0.0]).unwrap();
        assert!((h[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn amsgrad_keeps_running_max() {
        let mut st = PreconditionerState::new(PreconditionerKind::AmsGrad, 1, 0.0, DELTA).unwrap();
        let h1 = st.update(&[3.0], &[0.0]).unwrap();
        assert!((h1[0] - 3.0).abs() < 1e-15);
        // Hand-evaluated two-step recurrence: v_hat = max(9, 1) = 9.
        let h2 = st.update(&[1.0], &[0.0]).unwrap();
        assert!((h2[0] - 3.0).abs() < 1e-15);
        assert_eq!(st.monotonicity_violations(), 0);
    }

    #[test]
    fn adabelief_perfect_belief_hits_floor() {
        let mut st = PreconditionerState::new(PreconditionerKind::AdaBelief, 2, 0.999, DELTA).unwrap();
        let g = [0.7, -1.3];
        let h = st.update(&g, &g).unwrap();
        assert_eq!(h, vec![DELTA, DELTA]);
    }

    #[test]
    fn rmsprop_beta2_zero_is_abs_grad() {
        let mut st = PreconditionerState::new(PreconditionerKind::RmsProp, 3, 0.0, DELTA).unwrap();
        for g in [[1.0, -2.0, 0.0], [0.5, 4.0, -0.25]] {
            let h = st.update(&g, &[0.0; 3]).unwrap();
            for i in 0..3 {
                assert!((h[i] - g[i].abs().max(DELTA)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_bad_beta2_and_floor() {
        assert!(PreconditionerState::new(PreconditionerKind::Adam, 1, 1.0, DELTA).is_err());
        assert!(PreconditionerState::new(PreconditionerKind::Adam, 1, -0.1, DELTA).is_err());
        assert!(PreconditionerState::new(PreconditionerKind::Adam, 1, 0.9, 0.0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut st = PreconditionerState::new(PreconditionerKind::Adam, 2, 0.9, DELTA).unwrap();
        assert!(st.update(&[1.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn emitted_diagonal_is_always_at_least_the_floor(
            kind_idx in 0usize..4,
            beta2 in 0.0f64..0.9999,
            grads in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..12),
        ) {
            let kind = [
                PreconditionerKind::RmsProp,
                PreconditionerKind::Adam,
                PreconditionerKind::AmsGrad,
                PreconditionerKind::AdaBelief,
            ][kind_idx];
            let mut st = PreconditionerState::new(kind, 3, beta2, DELTA).unwrap();
            for g in &grads {
                let h = st.update(g, &[0.1, -0.1, 0.0]).unwrap();
                for &hi in &h {
                    prop_assert!(hi >= DELTA);
                }
            }
        }

        #[test]
        fn amsgrad_diagonal_is_coordinatewise_nondecreasing(
            beta2 in 0.0f64..0.9999,
            grads in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 2..20),
        ) {
            let mut st = PreconditionerState::new(PreconditionerKind::AmsGrad, 4, beta2, DELTA).unwrap();
            let mut prev: Option<Vec<f64>> = None;
            for g in &grads {
                let h = st.update(g, &[0.0; 4]).unwrap();
                if let Some(p) = prev {
                    for i in 0..4 {
                        prop_assert!(h[i] >= p[i]);
                    }
                }
                prev = Some(h);
            }
            prop_assert_eq!(st.monotonicity_violations(), 0);
        }

        #[test]
        fn bounded_gradients_bound_the_accumulators(
            beta2 in 0.0f64..0.9999,
            grads in prop::collection::vec(-5.0f64..5.0, 1..30),
        ) {
            let g_max = grads.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let mut adam = PreconditionerState::new(PreconditionerKind::Adam, 1, beta2, DELTA).unwrap();
            for (k, &g) in grads.iter().enumerate() {
                let h = adam.update(&[g], &[0.0]).unwrap();
                prop_assert!(adam.second_moment[0] <= g_max * g_max + 1e-12);
                let n = (k + 1) as i32;
                let cap = (g_max / (1.0 - beta2.powi(n)).sqrt()).max(DELTA);
                prop_assert!(h[0] <= cap + 1e-9);
            }
        }
    }
}
