//! Sweep configuration: a TOML file with `problem`, `generator`,
//! `discriminator`, `sweep`, and `output` sections. Unknown keys are
//! rejected so typos fail loudly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::StopMode;
use crate::optimizer::PlayerHyperparams;
use crate::preconditioner::{PreconditionerKind, DEFAULT_FLOOR};
use crate::problems::{MinimaxProblem, PayoffKind};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: ProblemConfig,
    pub generator: PlayerConfig,
    pub discriminator: PlayerConfig,
    pub sweep: SweepSection,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// bilinear | quadratic_saddle | dirac_gan
    pub kind: String,
    pub theta_dim: usize,
    pub w_dim: usize,
    pub pool_size: usize,
    pub sigma2_gen: f64,
    pub sigma2_disc: f64,
    pub pool_seed: u64,
    /// Quadratic curvature of the generator loss (quadratic_saddle only).
    #[serde(default = "one")]
    pub a: f64,
    /// Quadratic curvature of the discriminator loss (quadratic_saddle only).
    #[serde(default = "one")]
    pub c: f64,
    /// Coupling strength: M = coupling * I.
    #[serde(default = "one")]
    pub coupling: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlayerConfig {
    pub optimizer: PreconditionerKind,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Ball projection around the saddle, if set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub batch_sizes: Vec<usize>,
    pub seeds: u32,
    pub master_seed: u64,
    pub stop_mode: StopMode,
    pub epsilon2_gen: f64,
    pub epsilon2_disc: f64,
    pub max_steps: u64,
    #[serde(default = "one_usize")]
    pub disc_steps: usize,
    #[serde(default = "yes")]
    pub replacement: bool,
    /// Worker threads; 0 means the library default.
    #[serde(default)]
    pub parallelism: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "svg".into()]
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if s.batch_sizes.is_empty() {
            return Err(Error::Config("batch grid must be nonempty".into()));
        }
        if !s.batch_sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("batch grid must be strictly increasing".into()));
        }
        if s.seeds < 1 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if s.max_steps < 1 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(s.epsilon2_gen > 0.0) || !(s.epsilon2_disc > 0.0) {
            return Err(Error::Config("stop thresholds must be positive".into()));
        }
        for f in &self.output.formats {
            if f != "csv" && f != "svg" {
                return Err(Error::Config(format!("unknown output format {f:?}")));
            }
        }
        self.build_problem()?;
        self.generator.build(self.problem.theta_dim)?;
        self.discriminator.build(self.problem.w_dim)?;
        Ok(())
    }

    pub fn build_problem(&self) -> Result<MinimaxProblem> {
        let p = &self.problem;
        match p.kind.as_str() {
            "bilinear" => {
                if p.theta_dim != p.w_dim {
                    return Err(Error::Config("bilinear preset needs theta_dim == w_dim".into()));
                }
                MinimaxProblem::new(
                    "bilinear",
                    PayoffKind::Bilinear,
                    scaled_identity(p.theta_dim, p.w_dim, p.coupling),
                    p.theta_dim,
                    p.w_dim,
                    p.pool_size,
                    p.sigma2_gen,
                    p.sigma2_disc,
                    p.pool_seed,
                )
            }
            "quadratic_saddle" => MinimaxProblem::new(
                "quadratic_saddle",
                PayoffKind::QuadraticSaddle { a: p.a, c: p.c },
                scaled_identity(p.theta_dim, p.w_dim, p.coupling),
                p.theta_dim,
                p.w_dim,
                p.pool_size,
                p.sigma2_gen,
                p.sigma2_disc,
                p.pool_seed,
            ),
            "dirac_gan" => MinimaxProblem::dirac_gan(p.pool_size, p.sigma2_gen, p.pool_seed),
            other => Err(Error::Config(format!("unknown problem kind {other:?}"))),
        }
    }

    /// FNV-1a over the canonical TOML text; ties outputs to their config.
    pub fn fingerprint(&self) -> Result<String> {
        let text = self.to_toml()?;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in text.bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        Ok(format!("{h:016x}"))
    }
}

impl PlayerConfig {
    pub fn build(&self, dim: usize) -> Result<PlayerHyperparams> {
        let mut hp = PlayerHyperparams::new(self.optimizer, self.alpha, self.beta1, self.beta2)?
            .with_floor(self.floor)?;
        if let Some(radius) = self.projection_radius {
            hp = hp.with_projection(vec![0.0; dim], radius)?;
        }
        Ok(hp)
    }
}

fn scaled_identity(rows: usize, cols: usize, scale: f64) -> Vec<f64> {
    let mut m = vec![0.0; rows * cols];
    for i in 0..rows.min(cols) {
        m[i * cols + i] = scale;
    }
    m
}

pub fn example_config() -> &'static str {
    r#"# Batch-size sweep on a synthetic quadratic saddle.
[problem]
kind = "quadratic_saddle"       # bilinear | quadratic_saddle | dirac_gan
theta_dim = 20
w_dim = 20
pool_size = 4096
sigma2_gen = 20.0
sigma2_disc = 20.0
pool_seed = 7
a = 1.0                          # generator curvature (quadratic_saddle)
c = 1.0                          # discriminator curvature (quadratic_saddle)
coupling = 0.5                   # M = coupling * I

[generator]
optimizer = "adam"               # rmsprop | adam | amsgrad | adabelief
alpha = 0.02
beta1 = 0.5
beta2 = 0.999
floor = 1e-8                     # positive floor on the preconditioner diagonal
# projection_radius = 100.0      # optional ball projection around the saddle

[discriminator]
optimizer = "adam"
alpha = 0.02
beta1 = 0.5
beta2 = 0.999

[sweep]
batch_sizes = [1, 2, 4, 8, 16, 32, 64, 128, 256]
seeds = 5
master_seed = 42
stop_mode = "grad_norm"          # vi_average | grad_norm | distance
epsilon2_gen = 0.5               # compared against the stop-mode quantity
epsilon2_disc = 0.5
max_steps = 100000
disc_steps = 1                   # discriminator updates per outer step
replacement = true               # mini-batch sampling with replacement
parallelism = 0                  # worker threads; 0 = library default

[output]
dir = "out"
formats = ["csv", "svg"]
"#
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_config_parses_and_validates() {
        let cfg = SweepConfig::from_toml(example_config()).unwrap();
        assert_eq!(cfg.sweep.batch_sizes.len(), 9);
        assert_eq!(cfg.sweep.disc_steps, 1);
        assert!(cfg.sweep.replacement);
        cfg.build_problem().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = example_config().replace("pool_seed = 7", "pool_seed = 7\nbogus_key = 1");
        assert!(SweepConfig::from_toml(&text).is_err());
    }

    #[test]
    fn bad_grids_are_rejected() {
        let text = example_config().replace(
            "batch_sizes = [1, 2, 4, 8, 16, 32, 64, 128, 256]",
            "batch_sizes = [4, 2]",
        );
        assert!(SweepConfig::from_toml(&text).is_err());
        let text = example_config().replace("batch_sizes = [1, 2, 4, 8, 16, 32, 64, 128, 256]", "batch_sizes = []");
        assert!(SweepConfig::from_toml(&text).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = SweepConfig::from_toml(example_config()).unwrap();
        let text = cfg.to_toml().unwrap();
        let again = SweepConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.fingerprint().unwrap(), again.fingerprint().unwrap());
    }
}
