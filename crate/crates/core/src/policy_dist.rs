//! Diagonal Gaussian surrogate over stacked nominal input sequences.

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::{ControlInput, INPUT_DIM};
use crate::world::RngStream;
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Stacked nominal inputs `[u_0' u_1' ... u_{N-1}']'`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams(pub DVector<f64>);

impl PolicyParams {
    pub fn horizon(&self) -> usize {
        self.0.len() / INPUT_DIM
    }

    pub fn inputs(&self) -> Vec<ControlInput> {
        self.0
            .as_slice()
            .chunks_exact(INPUT_DIM)
            .map(|c| ControlInput::new(c[0], c[1]))
            .collect()
    }

    pub fn from_inputs(inputs: &[ControlInput]) -> Self {
        Self(DVector::from_iterator(
            inputs.len() * INPUT_DIM,
            inputs.iter().flat_map(|u| [u.accel(), u.steer_rate()]),
        ))
    }
}

/// `N(mu, diag(sigma2))`. The optimizer works in log-variances so it can step
/// without a positivity constraint; the exact variances are kept alongside so
/// that serialization round-trips bit for bit.
#[derive(Clone, Debug)]
pub struct PolicyDistribution {
    mu: DVector<f64>,
    log_sigma2: DVector<f64>,
    sigma2: DVector<f64>,
}

impl PartialEq for PolicyDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu && self.sigma2 == other.sigma2
    }
}

impl PolicyDistribution {
    pub fn new(mu: DVector<f64>, sigma2: DVector<f64>) -> Result<Self> {
        if mu.len() != sigma2.len() {
            return Err(Error::Dimension(format!("mu has {} entries, sigma2 has {}", mu.len(), sigma2.len())));
        }
        if let Some(bad) = sigma2.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::Dimension(format!("variance {bad} is not positive and finite")));
        }
        Ok(Self {
            mu,
            log_sigma2: sigma2.map(f64::ln),
            sigma2,
        })
    }

    pub fn from_log(mu: DVector<f64>, log_sigma2: DVector<f64>) -> Self {
        assert_eq!(mu.len(), log_sigma2.len());
        let sigma2 = log_sigma2.map(f64::exp);
        Self { mu, log_sigma2, sigma2 }
    }

    /// Zero-mean distribution over `horizon` inputs with a common variance.
    pub fn isotropic(horizon: usize, sigma2: f64) -> Self {
        let n = horizon * INPUT_DIM;
        Self {
            mu: DVector::zeros(n),
            log_sigma2: DVector::from_element(n, sigma2.ln()),
            sigma2: DVector::from_element(n, sigma2),
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn horizon(&self) -> usize {
        self.mu.len() / INPUT_DIM
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn mu_mut(&mut self) -> &mut DVector<f64> {
        &mut self.mu
    }

    pub fn log_sigma2(&self) -> &DVector<f64> {
        &self.log_sigma2
    }

    pub fn sigma2(&self) -> &DVector<f64> {
        &self.sigma2
    }

    pub fn mean_params(&self) -> PolicyParams {
        PolicyParams(self.mu.clone())
    }

    pub fn sample(&self, rng: &mut RngStream) -> PolicyParams {
        let xi = DVector::from_iterator(
            self.dim(),
            self.mu
                .iter()
                .zip(self.log_sigma2.iter())
                .zip(self.sigma2.iter())
                .map(|((m, _), s2)| m + s2.sqrt() * rng.standard_normal()),
        );
        PolicyParams(xi)
    }

    pub fn log_pdf(&self, xi: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.dim() {
            let d = xi[k] - self.mu[k];
            let ls = self.log_sigma2[k];
            acc += d * d * (-ls).exp() + ls + LN_2PI;
        }
        -0.5 * acc
    }

    /// Gradient of `log_pdf(xi)` with respect to `(mu, log sigma2)`.
    pub fn score(&self, xi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mut g_mu = DVector::zeros(self.dim());
        let mut g_ls = DVector::zeros(self.dim());
        for k in 0..self.dim() {
            let inv = (-self.log_sigma2[k]).exp();
            let d = xi[k] - self.mu[k];
            g_mu[k] = d * inv;
            g_ls[k] = 0.5 * (d * d * inv - 1.0);
        }
        (g_mu, g_ls)
    }

    /// Concatenates per-agent distributions into one stacked distribution.
    pub fn stack(parts: &[PolicyDistribution]) -> Self {
        let mu = DVector::from_iterator(parts.iter().map(|p| p.dim()).sum(), parts.iter().flat_map(|p| p.mu.iter().copied()));
        let ls = DVector::from_iterator(mu.len(), parts.iter().flat_map(|p| p.log_sigma2.iter().copied()));
        let s2 = DVector::from_iterator(mu.len(), parts.iter().flat_map(|p| p.sigma2.iter().copied()));
        Self { mu, log_sigma2: ls, sigma2: s2 }
    }

    /// Splits a stacked distribution into `count` equal blocks.
    pub fn split(&self, count: usize) -> Vec<PolicyDistribution> {
        let block = self.dim() / count;
        (0..count)
            .map(|i| Self {
                mu: self.mu.rows(i * block, block).into_owned(),
                log_sigma2: self.log_sigma2.rows(i * block, block).into_owned(),
                sigma2: self.sigma2.rows(i * block, block).into_owned(),
            })
            .collect()
    }
}

/// `p_target(xi) / p_sampling(xi)`.
pub fn importance_weight(target: &PolicyDistribution, sampling: &PolicyDistribution, xi: &DVector<f64>) -> f64 {
    (target.log_pdf(xi) - sampling.log_pdf(xi)).exp()
}

/// Closed-form Renyi divergence of order 2, `D2(nu1 || nu0)`, between
/// diagonal Gaussians. Requires `2 sigma0^2 > sigma1^2` in every dimension.
pub fn renyi2_divergence(nu1: &PolicyDistribution, nu0: &PolicyDistribution) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..nu1.dim() {
        let s1 = nu1.sigma2[k];
        let s0 = nu0.sigma2[k];
        let mix = 2.0 * s0 - s1;
        if !(mix > 0.0) {
            return Err(Error::DivergenceValidity { dim: k, margin: mix });
        }
        let dm = nu1.mu[k] - nu0.mu[k];
        // ln((2 s0 - s1) s1 / s0^2) written with logs for accuracy.
        let log_det = mix.ln() + nu1.log_sigma2[k] - 2.0 * nu0.log_sigma2[k];
        acc += dm * dm / mix - 0.5 * log_det;
    }
    Ok(acc.max(0.0))
}

/// Gradient of `D2(nu1 || nu0)` with respect to nu1's `(mu, log sigma2)`.
pub fn renyi2_gradient(nu1: &PolicyDistribution, nu0: &PolicyDistribution) -> (DVector<f64>, DVector<f64>) {
    let n = nu1.dim();
    let mut g_mu = DVector::zeros(n);
    let mut g_ls = DVector::zeros(n);
    for k in 0..n {
        let s1 = nu1.sigma2[k];
        let s0 = nu0.sigma2[k];
        let mix = 2.0 * s0 - s1;
        let dm = nu1.mu[k] - nu0.mu[k];
        g_mu[k] = 2.0 * dm / mix;
        g_ls[k] = dm * dm * s1 / (mix * mix) + 0.5 * s1 / mix - 0.5;
    }
    (g_mu, g_ls)
}

#[derive(Serialize, Deserialize)]
struct DistributionRecord {
    mu: Vec<f64>,
    sigma2: Vec<f64>,
}

impl Serialize for PolicyDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DistributionRecord {
            mu: self.mu.iter().copied().collect(),
            sigma2: self.sigma2().iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolicyDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = DistributionRecord::deserialize(d)?;
        PolicyDistribution::new(DVector::from_vec(r.mu), DVector::from_vec(r.sigma2)).map_err(serde::de::Error::custom)
    }
}
