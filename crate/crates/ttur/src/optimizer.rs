//! Alternating two-player adaptive update: momentum, bias correction,
//! diagonal solve, constant learning rates, and optional ball projection.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preconditioner::{PreconditionerKind, PreconditionerState, DEFAULT_FLOOR};
use crate::problems::{MinimaxProblem, Player};
use crate::vector::{self, ParamVector};

/// Euclidean ball the iterates are projected onto after each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub center: ParamVector,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlayerHyperparams {
    pub alpha: f64,
    pub beta1: f64,
    /// Bias-correction base; beta1 for RMSProp/Adam/AdaBelief, 0 for AMSGrad.
    pub gamma: f64,
    pub beta2: f64,
    pub floor: f64,
    pub kind: PreconditionerKind,
    pub projection: Option<Projection>,
}

impl PlayerHyperparams {
    /// Builds hyperparameters with gamma tied to the variant's convention.
    pub fn new(kind: PreconditionerKind, alpha: f64, beta1: f64, beta2: f64) -> Result<Self> {
        let gamma = match kind {
            PreconditionerKind::AmsGrad => 0.0,
            _ => beta1,
        };
        let hp = Self {
            alpha,
            beta1,
            gamma,
            beta2,
            floor: DEFAULT_FLOOR,
            kind,
            projection: None,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Plain-SGD preset: RMSProp whose accumulator never grows past the
    /// floor, so the solve divides by the constant `floor`. The caller's
    /// `alpha` is pre-divided by the floor so the step is alpha * gradient
    /// as long as |g_i| stays at or below the floor's scale. With floor 1
    /// this is exact SGD for gradients in [-1, 1].
    pub fn sgd(alpha: f64) -> Result<Self> {
        let mut hp = Self::new(PreconditionerKind::RmsProp, alpha, 0.0, 0.0)?;
        hp.floor = 1.0;
        Ok(hp)
    }

    pub fn with_floor(mut self, floor: f64) -> Result<Self> {
        self.floor = floor;
        self.validate()?;
        Ok(self)
    }

    pub fn with_projection(mut self, center: ParamVector, radius: f64) -> Result<Self> {
        if radius < 0.0 {
            return Err(Error::InvalidHyperparameter(format!(
                "projection radius must be nonnegative, got {radius}"
            )));
        }
        self.projection = Some(Projection { center, radius });
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        for (name, v) in [("beta1", self.beta1), ("gamma", self.gamma), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidHyperparameter(format!(
                    "{name} must lie in [0,1), got {v}"
                )));
            }
        }
        match self.kind {
            PreconditionerKind::AmsGrad => {
                if self.gamma != 0.0 {
                    return Err(Error::InvalidHyperparameter(
                        "amsgrad uses gamma = 0".into(),
                    ));
                }
            }
            _ => {
                if self.gamma != self.beta1 {
                    return Err(Error::InvalidHyperparameter(
                        "rmsprop/adam/adabelief tie gamma to beta1".into(),
                    ));
                }
            }
        }
        if !(self.floor > 0.0) {
            return Err(Error::InvalidHyperparameter(format!(
                "floor must be positive, got {}",
                self.floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlayerState {
    pub params: ParamVector,
    momentum: ParamVector,
    precond: PreconditionerState,
    /// 0-based iteration counter n; incremented once per step.
    step: u64,
    hyper: PlayerHyperparams,
    /// Largest mini-batch gradient norm seen so far (momentum-bound diagnostic).
    max_grad_norm: f64,
}

impl PlayerState {
    pub fn new(params: ParamVector, hyper: PlayerHyperparams) -> Result<Self> {
        hyper.validate()?;
        if let Some(p) = &hyper.projection {
            Error::check_dim(params.len(), p.center.len())?;
        }
        let dim = params.len();
        let precond = PreconditionerState::new(hyper.kind, dim, hyper.beta2, hyper.floor)?;
        Ok(Self {
            params,
            momentum: vector::zeros(dim),
            precond,
            step: 0,
            hyper,
            max_grad_norm: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn momentum(&self) -> &[f64] {
        &self.momentum
    }

    pub fn hyper(&self) -> &PlayerHyperparams {
        &self.hyper
    }

    pub fn max_grad_norm(&self) -> f64 {
        self.max_grad_norm
    }

    pub fn monotonicity_violations(&self) -> u64 {
        self.precond.monotonicity_violations()
    }

    /// One full player update from a mini-batch gradient evaluated at the
    /// current parameters: momentum, bias correction, preconditioner,
    /// diagonal solve, parameter step, optional projection.
    pub fn apply_step(&mut self, grad: &[f64]) -> Result<()> {
        Error::check_dim(self.dim(), grad.len())?;
        self.momentum = momentum_update(&self.momentum, grad, self.hyper.beta1)?;
        let corrected = bias_correct(&self.momentum, self.hyper.gamma, self.step);
        let diag = self.precond.update(grad, &self.momentum)?;
        let direction = solve_direction(&diag, &corrected)?;
        self.params = vector::axpy(&self.params, self.hyper.alpha, &direction);
        if let Some(p) = &self.hyper.projection {
            project_onto_ball(&mut self.params, &p.center, p.radius);
        }
        self.step += 1;
        self.max_grad_norm = self.max_grad_norm.max(vector::norm(grad));
        Ok(())
    }
}

/// beta1 * m + (1 - beta1) * grad
pub fn momentum_update(m: &[f64], grad: &[f64], beta1: f64) -> Result<ParamVector> {
    Error::check_dim(m.len(), grad.len())?;
    Ok(m.iter()
        .zip(grad)
        .map(|(mi, gi)| beta1 * mi + (1.0 - beta1) * gi)
        .collect())
}

/// m / (1 - gamma^{n+1}) with 0-based iteration counter n.
pub fn bias_correct(m: &[f64], gamma: f64, n: u64) -> ParamVector {
    if gamma == 0.0 {
        return m.to_vec();
    }
    let denom = 1.0 - gamma.powi(n as i32 + 1);
    vector::scale(m, 1.0 / denom)
}

/// Solves diag(h) d = -m_hat; requires a strictly positive diagonal.
pub fn solve_direction(diag: &[f64], m_hat: &[f64]) -> Result<ParamVector> {
    Error::check_dim(diag.len(), m_hat.len())?;
    for (i, &h) in diag.iter().enumerate() {
        if !(h > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: i, value: h });
        }
    }
    Ok(diag.iter().zip(m_hat).map(|(h, m)| -m / h).collect())
}

/// center + r * (x - center) / max(r, |x - center|); nonexpansive.
fn project_onto_ball(x: &mut ParamVector, center: &[f64], radius: f64) {
    let offset = vector::sub(x, center);
    let dist = vector::norm(&offset);
    if dist <= radius {
        return;
    }
    let scale = if dist > 0.0 { radius / dist } else { 0.0 };
    for (xi, (ci, oi)) in x.iter_mut().zip(center.iter().zip(&offset)) {
        *xi = ci + scale * oi;
    }
}

/// One outer step of the two-player loop: draws an independent mini-batch
/// for each player, evaluates both stochastic gradients at the current
/// (theta, w) pair, then updates generator and discriminator.
pub fn ttur_step(
    gen: &mut PlayerState,
    disc: &mut PlayerState,
    problem: &MinimaxProblem,
    b: usize,
    rng: &mut ChaCha8Rng,
    replacement: bool,
) -> Result<()> {
    let g_gen =
        problem.sample_minibatch_gradient(Player::Generator, &gen.params, &disc.params, b, rng, replacement)?;
    let g_disc =
        problem.sample_minibatch_gradient(Player::Discriminator, &gen.params, &disc.params, b, rng, replacement)?;
    gen.apply_step(&g_gen)?;
    disc.apply_step(&g_disc)?;
    Ok(())
}

/// `ttur_step` followed by `disc_steps - 1` extra discriminator updates,
/// each on a fresh mini-batch at the current pair.
pub fn ttur_step_k(
    gen: &mut PlayerState,
    disc: &mut PlayerState,
    problem: &MinimaxProblem,
    b: usize,
    disc_steps: usize,
    rng: &mut ChaCha8Rng,
    replacement: bool,
) -> Result<()> {
    ttur_step(gen, disc, problem, b, rng, replacement)?;
    for _ in 1..disc_steps.max(1) {
        let g_disc = problem.sample_minibatch_gradient(
            Player::Discriminator,
            &gen.params,
            &disc.params,
            b,
            rng,
            replacement,
        )?;
        disc.apply_step(&g_disc)?;
    }
    Ok(())
}
