use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gain-sequence parameters: `a_k = a / (k + A)^alpha`, `c_k = c / k^gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpsaHyperparams {
    pub alpha: f64,
    pub gamma: f64,
    /// Stability constant `A`.
    pub stability: f64,
    pub a: f64,
    pub c: f64,
    pub max_iter: usize,
}

impl Default for SpsaHyperparams {
    fn default() -> Self {
        SpsaHyperparams {
            alpha: 0.602,
            gamma: 0.101,
            stability: 10.0,
            a: 0.5,
            c: 0.1,
            max_iter: 200,
        }
    }
}

impl SpsaHyperparams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !(self.a > 0.0 && self.c > 0.0) {
            return Err(Error::invalid("SPSA gains a and c must be positive"));
        }
        if !unit(self.alpha) || !unit(self.gamma) {
            return Err(Error::invalid("SPSA exponents must lie in (0, 1]"));
        }
        if !(self.stability >= 0.0) {
            return Err(Error::invalid("SPSA stability constant must be >= 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("SPSA needs at least one iteration"));
        }
        Ok(())
    }

    pub fn step_gain(&self, k: usize) -> f64 {
        self.a / (k as f64 + self.stability).powf(self.alpha)
    }

    pub fn perturbation_gain(&self, k: usize) -> f64 {
        self.c / (k as f64).powf(self.gamma)
    }
}

/// Simultaneous-perturbation stochastic approximation, minimizing `f`.
///
/// Exactly two evaluations of `f` per iteration. Perturbations are Rademacher
/// vectors drawn from a ChaCha stream seeded by `seed`.
pub fn spsa<F>(f: F, theta0: &[f64], h: &SpsaHyperparams, seed: u64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    spsa_projected(f, theta0, h, seed, |_| {})
}

/// [`spsa`] with `project` applied to the iterate after every update.
pub fn spsa_projected<F, P>(
    mut f: F,
    theta0: &[f64],
    h: &SpsaHyperparams,
    seed: u64,
    mut project: P,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
    P: FnMut(&mut [f64]),
{
    h.validate()?;
    if theta0.is_empty() {
        return Err(Error::invalid("SPSA needs a non-empty starting point"));
    }
    let p = theta0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = theta0.to_vec();
    let mut delta = vec![0.0; p];
    let mut plus = vec![0.0; p];
    let mut minus = vec![0.0; p];
    for k in 1..=h.max_iter {
        let a_k = h.step_gain(k);
        let c_k = h.perturbation_gain(k);
        for d in delta.iter_mut() {
            *d = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        for i in 0..p {
            plus[i] = theta[i] + c_k * delta[i];
            minus[i] = theta[i] - c_k * delta[i];
        }
        let y_plus = f(&plus);
        let y_minus = f(&minus);
        for i in 0..p {
            let g = (y_plus - y_minus) / (2.0 * c_k * delta[i]);
            theta[i] -= a_k * g;
        }
        project(&mut theta);
    }
    Ok(theta)
}
