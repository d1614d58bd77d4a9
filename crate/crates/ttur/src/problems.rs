//! Synthetic stochastic minimax problems with exact gradients, analytic
//! saddle points, and a finite pool of zero-sum per-sample gradient offsets.
//!
//! The noise model: at construction a pool of `pool_size` offset vectors is
//! drawn per player, recentered to sum exactly to zero, and rescaled so the
//! mean squared offset norm equals the configured sigma^2. A mini-batch
//! gradient is the exact gradient plus the mean of `b` sampled offsets, so
//! it is unbiased with trace variance sigma^2 / b under sampling with
//! replacement.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{self, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PayoffKind {
    /// L_G(theta, w) = theta' M w, L_D = -L_G.
    Bilinear,
    /// L_G = (a/2)|theta|^2 + theta' M w, L_D = -theta' M w + (c/2)|w|^2.
    QuadraticSaddle { a: f64, c: f64 },
    /// 1-D stress test: L_G(theta, w) = log(1 + e^{theta w}), L_D = -L_G.
    DiracGan,
}

/// Exact gradients of both players at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub gen: ParamVector,
    pub disc: ParamVector,
}

#[derive(Debug, Clone)]
pub struct MinimaxProblem {
    name: String,
    theta_dim: usize,
    w_dim: usize,
    pool_size: usize,
    sigma2_gen: f64,
    sigma2_disc: f64,
    payoff: PayoffKind,
    /// Row-major theta_dim x w_dim coupling matrix M.
    coupling: Vec<f64>,
    offsets_gen: Vec<ParamVector>,
    offsets_disc: Vec<ParamVector>,
}

/// Tolerance on the constructed pool's zero-sum and variance identities.
const POOL_TOL: f64 = 1e-9;

impl MinimaxProblem {
    pub fn new(
        name: impl Into<String>,
        payoff: PayoffKind,
        coupling: Vec<f64>,
        theta_dim: usize,
        w_dim: usize,
        pool_size: usize,
        sigma2_gen: f64,
        sigma2_disc: f64,
        pool_seed: u64,
    ) -> Result<Self> {
        if theta_dim == 0 || w_dim == 0 {
            return Err(Error::InvalidProblem("dimensions must be positive".into()));
        }
        if pool_size == 0 {
            return Err(Error::InvalidProblem("pool size must be at least 1".into()));
        }
        if sigma2_gen < 0.0 || sigma2_disc < 0.0 {
            return Err(Error::InvalidProblem("sigma^2 must be nonnegative".into()));
        }
        if let PayoffKind::DiracGan = payoff {
            if theta_dim != 1 || w_dim != 1 {
                return Err(Error::InvalidProblem("dirac_gan is one-dimensional".into()));
            }
        }
        match payoff {
            PayoffKind::DiracGan => {}
            _ => {
                if coupling.len() != theta_dim * w_dim {
                    return Err(Error::InvalidProblem(format!(
                        "coupling matrix must be {theta_dim}x{w_dim}, got {} entries",
                        coupling.len()
                    )));
                }
            }
        }
        if (sigma2_gen > 0.0 || sigma2_disc > 0.0) && pool_size < 2 {
            return Err(Error::InvalidProblem(
                "noise requires a pool of at least 2 samples".into(),
            ));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(pool_seed);
        let offsets_gen = build_offset_pool(&mut rng, pool_size, theta_dim, sigma2_gen)?;
        let offsets_disc = build_offset_pool(&mut rng, pool_size, w_dim, sigma2_disc)?;

        Ok(Self {
            name: name.into(),
            theta_dim,
            w_dim,
            pool_size,
            sigma2_gen,
            sigma2_disc,
            payoff,
            coupling,
            offsets_gen,
            offsets_disc,
        })
    }

    /// Bilinear game with M = scale * I (square dims).
    pub fn bilinear(
        dim: usize,
        scale: f64,
        pool_size: usize,
        sigma2: f64,
        pool_seed: u64,
    ) -> Result<Self> {
        Self::new(
            "bilinear",
            PayoffKind::Bilinear,
            identity_coupling(dim, dim, scale),
            dim,
            dim,
            pool_size,
            sigma2,
            sigma2,
            pool_seed,
        )
    }

    /// Strongly monotone quadratic saddle with M = scale * I (square dims).
    pub fn quadratic_saddle(
        dim: usize,
        a: f64,
        c: f64,
        scale: f64,
        pool_size: usize,
        sigma2: f64,
        pool_seed: u64,
    ) -> Result<Self> {
        Self::new(
            "quadratic_saddle",
            PayoffKind::QuadraticSaddle { a, c },
            identity_coupling(dim, dim, scale),
            dim,
            dim,
            pool_size,
            sigma2,
            sigma2,
            pool_seed,
        )
    }

    pub fn dirac_gan(pool_size: usize, sigma2: f64, pool_seed: u64) -> Result<Self> {
        Self::new(
            "dirac_gan",
            PayoffKind::DiracGan,
            Vec::new(),
            1,
            1,
            pool_size,
            sigma2,
            sigma2,
            pool_seed,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn theta_dim(&self) -> usize {
        self.theta_dim
    }

    pub fn w_dim(&self) -> usize {
        self.w_dim
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn sigma2(&self, player: Player) -> f64 {
        match player {
            Player::Generator => self.sigma2_gen,
            Player::Discriminator => self.sigma2_disc,
        }
    }

    pub fn payoff(&self) -> PayoffKind {
        self.payoff
    }

    /// Full-pool mean gradients of both players at (theta, w).
    pub fn exact_gradients(&self, theta: &[f64], w: &[f64]) -> Result<GradientPair> {
        Error::check_dim(self.theta_dim, theta.len())?;
        Error::check_dim(self.w_dim, w.len())?;
        let pair = match self.payoff {
            PayoffKind::Bilinear => GradientPair {
                gen: self.coupling_times(w),
                disc: vector::scale(&self.coupling_transpose_times(theta), -1.0),
            },
            PayoffKind::QuadraticSaddle { a, c } => GradientPair {
                gen: vector::axpy(&self.coupling_times(w), a, theta),
                disc: vector::axpy(&vector::scale(&self.coupling_transpose_times(theta), -1.0), c, w),
            },
            PayoffKind::DiracGan => {
                let s = sigmoid(theta[0] * w[0]);
                GradientPair {
                    gen: vec![w[0] * s],
                    disc: vec![-theta[0] * s],
                }
            }
        };
        Ok(pair)
    }

    /// Exact gradient of one player only.
    pub fn exact_gradient(&self, player: Player, theta: &[f64], w: &[f64]) -> Result<ParamVector> {
        let pair = self.exact_gradients(theta, w)?;
        Ok(match player {
            Player::Generator => pair.gen,
            Player::Discriminator => pair.disc,
        })
    }

    /// Mini-batch stochastic gradient: exact gradient plus the mean of `b`
    /// sampled pool offsets.
    pub fn sample_minibatch_gradient(
        &self,
        player: Player,
        theta: &[f64],
        w: &[f64],
        b: usize,
        rng: &mut ChaCha8Rng,
        replacement: bool,
    ) -> Result<ParamVector> {
        if b == 0 || (!replacement && b > self.pool_size) {
            return Err(Error::BatchOutOfRange {
                b,
                pool: self.pool_size,
            });
        }
        let mut grad = self.exact_gradient(player, theta, w)?;
        let offsets = match player {
            Player::Generator => &self.offsets_gen,
            Player::Discriminator => &self.offsets_disc,
        };
        let inv_b = 1.0 / b as f64;
        if replacement {
            for _ in 0..b {
                let idx = rng.gen_range(0..self.pool_size);
                for (g, o) in grad.iter_mut().zip(&offsets[idx]) {
                    *g += inv_b * o;
                }
            }
        } else {
            let picked = rand::seq::index::sample(rng, self.pool_size, b);
            for idx in picked {
                for (g, o) in grad.iter_mut().zip(&offsets[idx]) {
                    *g += inv_b * o;
                }
            }
        }
        Ok(grad)
    }

    /// Analytic stationary pair; the origin for every supported payoff.
    pub fn saddle_point(&self) -> (ParamVector, ParamVector) {
        (vector::zeros(self.theta_dim), vector::zeros(self.w_dim))
    }

    /// Running maxima of squared full-gradient norms along a trajectory;
    /// the empirical M^2 constants used by the bound evaluators.
    pub fn variance_bound_stats(&self, trajectory: &[(ParamVector, ParamVector)]) -> Result<(f64, f64)> {
        if trajectory.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let mut m2_gen = 0.0f64;
        let mut m2_disc = 0.0f64;
        for (theta, w) in trajectory {
            let g = self.exact_gradients(theta, w)?;
            m2_gen = m2_gen.max(vector::norm_sq(&g.gen));
            m2_disc = m2_disc.max(vector::norm_sq(&g.disc));
        }
        Ok((m2_gen, m2_disc))
    }

    fn coupling_times(&self, w: &[f64]) -> ParamVector {
        let mut out = vec![0.0; self.theta_dim];
        for i in 0..self.theta_dim {
            let row = &self.coupling[i * self.w_dim..(i + 1) * self.w_dim];
            out[i] = vector::dot(row, w);
        }
        out
    }

    fn coupling_transpose_times(&self, theta: &[f64]) -> ParamVector {
        let mut out = vec![0.0; self.w_dim];
        for i in 0..self.theta_dim {
            let row = &self.coupling[i * self.w_dim..(i + 1) * self.w_dim];
            for (j, m) in row.iter().enumerate() {
                out[j] += m * theta[i];
            }
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn offsets(&self, player: Player) -> &[ParamVector] {
        match player {
            Player::Generator => &self.offsets_gen,
            Player::Discriminator => &self.offsets_disc,
        }
    }
}

fn identity_coupling(rows: usize, cols: usize, scale: f64) -> Vec<f64> {
    let mut m = vec![0.0; rows * cols];
    for i in 0..rows.min(cols) {
        m[i * cols + i] = scale;
    }
    m
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draws a pool of offset vectors, recenters it to sum exactly to zero, and
/// rescales so the per-sample trace variance hits sigma2.
fn build_offset_pool(
    rng: &mut ChaCha8Rng,
    pool_size: usize,
    dim: usize,
    sigma2: f64,
) -> Result<Vec<ParamVector>> {
    if sigma2 == 0.0 {
        return Ok(vec![vec![0.0; dim]; pool_size]);
    }
    let mut pool: Vec<ParamVector> = (0..pool_size)
        .map(|_| (0..dim).map(|_| standard_normal(rng)).collect())
        .collect();
    // Recenter: subtract the pool mean coordinatewise.
    let mut mean = vec![0.0; dim];
    for o in &pool {
        for (m, x) in mean.iter_mut().zip(o) {
            *m += x / pool_size as f64;
        }
    }
    for o in pool.iter_mut() {
        for (x, m) in o.iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    let total_sq: f64 = pool.iter().map(|o| vector::norm_sq(o)).sum();
    if total_sq <= 0.0 {
        return Err(Error::InvalidProblem(
            "degenerate offset pool; cannot realize requested sigma^2".into(),
        ));
    }
    let scale = (sigma2 * pool_size as f64 / total_sq).sqrt();
    for o in pool.iter_mut() {
        for x in o.iter_mut() {
            *x *= scale;
        }
    }
    // Exact-recentering cleanup: force the residual mean (floating error)
    // onto the first sample so the zero-sum identity holds to tolerance.
    let mut resid = vec![0.0; dim];
    for o in &pool {
        for (r, x) in resid.iter_mut().zip(o) {
            *r += x;
        }
    }
    for (x, r) in pool[0].iter_mut().zip(&resid) {
        *x -= r;
    }
    // Construction-time checks of the zero-sum and variance identities.
    let mut sum = vec![0.0; dim];
    let mut var = 0.0;
    for o in &pool {
        for (s, x) in sum.iter_mut().zip(o) {
            *s += x;
        }
        var += vector::norm_sq(o) / pool_size as f64;
    }
    if sum.iter().any(|s| s.abs() > POOL_TOL) {
        return Err(Error::InvalidProblem("offset pool failed zero-sum check".into()));
    }
    if (var - sigma2).abs() > POOL_TOL * sigma2.max(1.0) {
        return Err(Error::InvalidProblem(format!(
            "offset pool variance {var} does not match sigma^2 {sigma2}"
        )));
    }
    Ok(pool)
}

/// Box-Muller; keeps the dependency surface to `rand`'s uniform sampling.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
