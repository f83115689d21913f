//! PAC-bounded policy optimization.
//!
//! Each iteration draws `M` policies from the current Gaussian, rolls them out
//! in closed loop, and moves the Gaussian along the natural gradient of the
//! importance-weighted estimate of `J + gamma C` inside a Renyi-2 trust
//! region. The returned [`BoundReport`] evaluates the full high-confidence
//! bound `J+ = min_alpha J_alpha + alpha d + Phi_alpha` (and `C+`) on a fresh
//! batch drawn from the final distribution.

mod bound;
mod evaluator;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use bound::{bound_side, concentration, golden_section_ln, robust_estimate, AlphaSearch, BoundSide};
pub use evaluator::{
    rollout_closed_loop, rollout_closed_loop_from, AgentEvaluator, JointEvaluator, PlanContext, SampleEvaluator,
    SampleOutcome,
};

use crate::dynamics::INPUT_DIM;
use crate::policy_dist::{renyi2_divergence, renyi2_gradient, PolicyDistribution};
use crate::world::RngStream;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacConfig {
    pub sample_count: usize,
    pub iteration_count: usize,
    /// The bound holds with probability `1 - delta`.
    pub delta: f64,
    /// `b` in `l = min(J / b, 1)`.
    pub cost_scale: f64,
    /// Weight of the constraint bound.
    pub gamma: f64,
    pub alpha_bracket: [f64; 2],
    pub alpha_evaluations: usize,
    /// Largest `D2(next || current)` accepted by one update.
    pub trust_region_d2_max: f64,
    /// Step halvings tried before an update is abandoned.
    pub backtracking_steps: usize,
    pub sigma_init: f64,
    pub sigma_floor: f64,
    pub warm_start: bool,
    /// Variance inflation applied to retained entries on warm start.
    pub warm_inflation: f64,
}

impl Default for PacConfig {
    fn default() -> Self {
        Self {
            sample_count: 256,
            iteration_count: 50,
            delta: 0.05,
            cost_scale: 100.0,
            gamma: 100.0,
            alpha_bracket: [1e-3, 1e3],
            alpha_evaluations: 30,
            trust_region_d2_max: 0.5,
            backtracking_steps: 8,
            sigma_init: 0.25,
            sigma_floor: 1e-4,
            warm_start: true,
            warm_inflation: 1.5,
        }
    }
}

impl PacConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.sample_count < 2 {
            return Err("sample_count must be at least 2".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err("delta must lie in (0, 1)".into());
        }
        if !(self.cost_scale > 0.0 && self.trust_region_d2_max > 0.0) {
            return Err("cost_scale and trust_region_d2_max must be positive".into());
        }
        if !(self.sigma_floor > 0.0 && self.sigma_init >= self.sigma_floor) {
            return Err("need 0 < sigma_floor <= sigma_init".into());
        }
        if !(self.alpha_bracket[0] > 0.0 && self.alpha_bracket[1] > self.alpha_bracket[0]) {
            return Err("alpha_bracket must be an increasing positive pair".into());
        }
        Ok(())
    }

    pub fn alpha_search(&self) -> AlphaSearch {
        AlphaSearch {
            lo: self.alpha_bracket[0],
            hi: self.alpha_bracket[1],
            evaluations: self.alpha_evaluations,
            delta: self.delta,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub j_hat: f64,
    pub d_term: f64,
    pub phi_term: f64,
    pub j_plus: f64,
    pub c_hat: f64,
    pub c_plus: f64,
    pub alpha_star_cost: f64,
    pub alpha_star_constraint: f64,
}

/// One evaluated batch drawn from a single sampling distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub xis: Vec<DVector<f64>>,
    pub costs: Vec<f64>,
    pub constraints: Vec<f64>,
    pub log_pdf: Vec<f64>,
    /// Divisor applied to costs before `b` (number of summed agent costs).
    pub cost_normalizer: f64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.xis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xis.is_empty()
    }

    /// `l_m = min(J_m / b, 1)`.
    pub fn normalized_costs(&self, config: &PacConfig) -> Vec<f64> {
        let scale = config.cost_scale * self.cost_normalizer;
        self.costs.iter().map(|j| (j / scale).clamp(0.0, 1.0)).collect()
    }

    /// Importance weights of `candidate` against the stored sampling densities.
    pub fn weights(&self, candidate: &PolicyDistribution) -> Vec<f64> {
        self.xis
            .iter()
            .zip(&self.log_pdf)
            .map(|(xi, lp)| (candidate.log_pdf(xi) - lp).exp())
            .collect()
    }
}

/// Draws `M` policies from `sampling` and evaluates each one.
pub fn evaluate_batch<E: SampleEvaluator + ?Sized>(
    sampling: &PolicyDistribution,
    evaluator: &E,
    config: &PacConfig,
    rng: &mut RngStream,
) -> Result<SampleSet> {
    if sampling.dim() != evaluator.dim() {
        return Err(Error::Dimension(format!(
            "policy has {} entries, evaluator expects {}",
            sampling.dim(),
            evaluator.dim()
        )));
    }
    let m = config.sample_count;
    let mut set = SampleSet {
        xis: Vec::with_capacity(m),
        costs: Vec::with_capacity(m),
        constraints: Vec::with_capacity(m),
        log_pdf: Vec::with_capacity(m),
        cost_normalizer: evaluator.cost_normalizer(),
    };
    for index in 0..m {
        let xi = sampling.sample(rng).0;
        let out = evaluator.evaluate(&xi, index, rng)?;
        set.log_pdf.push(sampling.log_pdf(&xi));
        set.costs.push(out.cost);
        set.constraints.push(if out.violated { 1.0 } else { 0.0 });
        set.xis.push(xi);
    }
    Ok(set)
}

/// Which side of the bound to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Cost,
    Constraint,
}

/// One side of the bound for `candidate` using samples drawn from `sampling`.
pub fn pac_bound(
    samples: &SampleSet,
    candidate: &PolicyDistribution,
    sampling: &PolicyDistribution,
    config: &PacConfig,
    which: BoundKind,
) -> Result<BoundSide> {
    let d = 0.5 * renyi2_divergence(candidate, sampling)?.exp();
    let weights = samples.weights(candidate);
    let values = match which {
        BoundKind::Cost => samples.normalized_costs(config),
        BoundKind::Constraint => samples.constraints.clone(),
    };
    Ok(bound_side(&values, &weights, d, &config.alpha_search()))
}

/// Both sides of the bound.
pub fn bound_report(
    samples: &SampleSet,
    candidate: &PolicyDistribution,
    sampling: &PolicyDistribution,
    config: &PacConfig,
) -> Result<BoundReport> {
    let cost = pac_bound(samples, candidate, sampling, config, BoundKind::Cost)?;
    let con = pac_bound(samples, candidate, sampling, config, BoundKind::Constraint)?;
    Ok(BoundReport {
        j_hat: cost.hat,
        d_term: cost.d_term,
        phi_term: cost.phi_term,
        j_plus: cost.plus,
        c_hat: con.hat,
        c_plus: con.plus,
        alpha_star_cost: cost.alpha,
        alpha_star_constraint: con.alpha,
    })
}

/// Gradient of `J_alpha + alpha d` (importance weights against `sampling`)
/// with respect to the candidate's `(mu, log sigma2)`, at fixed alpha.
pub fn bound_gradient(
    samples: &SampleSet,
    values: &[f64],
    candidate: &PolicyDistribution,
    sampling: &PolicyDistribution,
    alpha: f64,
) -> (DVector<f64>, DVector<f64>) {
    let n = candidate.dim();
    let m = samples.len() as f64;
    let weights = samples.weights(candidate);
    let mut g_mu = DVector::zeros(n);
    let mut g_ls = DVector::zeros(n);
    for ((xi, l), w) in samples.xis.iter().zip(values).zip(&weights) {
        let coef = l * w / (1.0 + alpha * l * w) / m;
        if coef == 0.0 {
            continue;
        }
        let (s_mu, s_ls) = candidate.score(xi);
        g_mu.axpy(coef, &s_mu, 1.0);
        g_ls.axpy(coef, &s_ls, 1.0);
    }
    let d = 0.5 * renyi2_divergence(candidate, sampling).map(f64::exp).unwrap_or(f64::INFINITY);
    let (d_mu, d_ls) = renyi2_gradient(candidate, sampling);
    g_mu.axpy(alpha * d, &d_mu, 1.0);
    g_ls.axpy(alpha * d, &d_ls, 1.0);
    (g_mu, g_ls)
}

/// The quantity each update decreases: the self-normalized importance-weighted
/// estimate `J_alpha + gamma C_alpha`, with both alphas fixed at the bound
/// optimum of the sampling distribution.
#[derive(Clone, Debug)]
pub struct StepObjective<'a> {
    samples: &'a SampleSet,
    cost_values: Vec<f64>,
    alpha_cost: f64,
    alpha_constraint: f64,
    gamma: f64,
}

impl<'a> StepObjective<'a> {
    pub fn new(samples: &'a SampleSet, sampling: &PolicyDistribution, config: &PacConfig) -> Result<Self> {
        let report = bound_report(samples, sampling, sampling, config)?;
        Ok(Self {
            samples,
            cost_values: samples.normalized_costs(config),
            alpha_cost: report.alpha_star_cost,
            alpha_constraint: report.alpha_star_constraint,
            gamma: config.gamma,
        })
    }

    fn normalized_weights(&self, candidate: &PolicyDistribution) -> Vec<f64> {
        let mut w = self.samples.weights(candidate);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        if mean > 0.0 && mean.is_finite() {
            w.iter_mut().for_each(|x| *x /= mean);
        }
        w
    }

    pub fn value(&self, candidate: &PolicyDistribution) -> f64 {
        let w = self.normalized_weights(candidate);
        robust_estimate(&self.cost_values, &w, self.alpha_cost)
            + self.gamma * robust_estimate(&self.samples.constraints, &w, self.alpha_constraint)
    }

    /// Analytic score-function gradient with respect to `(mu, log sigma2)`.
    pub fn gradient(&self, candidate: &PolicyDistribution) -> (DVector<f64>, DVector<f64>) {
        let n = candidate.dim();
        let m = self.samples.len() as f64;
        let w = self.normalized_weights(candidate);
        let scores: Vec<_> = self.samples.xis.iter().map(|xi| candidate.score(xi)).collect();
        // Weighted mean score, the derivative of the normalizer.
        let mut bar_mu = DVector::zeros(n);
        let mut bar_ls = DVector::zeros(n);
        for ((s_mu, s_ls), wm) in scores.iter().zip(&w) {
            bar_mu.axpy(wm / m, s_mu, 1.0);
            bar_ls.axpy(wm / m, s_ls, 1.0);
        }
        let mut g_mu = DVector::zeros(n);
        let mut g_ls = DVector::zeros(n);
        for (k, ((s_mu, s_ls), wm)) in scores.iter().zip(&w).enumerate() {
            let l = self.cost_values[k];
            let c = self.samples.constraints[k];
            let coef = (l / (1.0 + self.alpha_cost * l * wm)
                + self.gamma * c / (1.0 + self.alpha_constraint * c * wm))
                * wm
                / m;
            if coef == 0.0 {
                continue;
            }
            g_mu.axpy(coef, s_mu, 1.0);
            g_mu.axpy(-coef, &bar_mu, 1.0);
            g_ls.axpy(coef, s_ls, 1.0);
            g_ls.axpy(-coef, &bar_ls, 1.0);
        }
        (g_mu, g_ls)
    }
}

/// Diagnostics of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateInfo {
    pub objective_before: f64,
    pub objective_after: f64,
    pub d2_step: f64,
    pub accepted: bool,
}

fn project_floor(mu: DVector<f64>, log_sigma2: DVector<f64>, floor: f64) -> PolicyDistribution {
    let lf = floor.ln();
    PolicyDistribution::from_log(mu, log_sigma2.map(|v| v.max(lf)))
}

/// One natural-gradient step on the [`StepObjective`] of `samples`, which must
/// have been drawn from `current`. The step length puts `D2(next || current)`
/// at the trust-region radius and is then halved until the objective does not
/// increase; if no halving succeeds `current` is returned (floor-projected).
pub fn update_distribution(
    current: &PolicyDistribution,
    samples: &SampleSet,
    config: &PacConfig,
) -> Result<(PolicyDistribution, UpdateInfo)> {
    let keep = project_floor(current.mu().clone(), current.log_sigma2().clone(), config.sigma_floor);
    if samples.is_empty() {
        return Ok((keep, UpdateInfo::default()));
    }
    let objective = StepObjective::new(samples, current, config)?;
    let before = objective.value(current);
    let (g_mu, g_ls) = objective.gradient(current);
    // Natural gradient: the Fisher metric is diag(1/sigma2) for mu, 1/2 for log sigma2.
    let dir_mu = -g_mu.component_mul(current.sigma2());
    let dir_ls = -g_ls * 2.0;
    let mut info = UpdateInfo {
        objective_before: before,
        objective_after: before,
        d2_step: 0.0,
        accepted: false,
    };
    if dir_mu.norm() + dir_ls.norm() < 1e-300 {
        return Ok((keep, info));
    }
    let candidate = |eta: f64| {
        project_floor(
            current.mu() + &dir_mu * eta,
            current.log_sigma2() + &dir_ls * eta,
            config.sigma_floor,
        )
    };
    let d2_at = |eta: f64| renyi2_divergence(&candidate(eta), current).unwrap_or(f64::INFINITY);

    // Bracket, then bisect, the step whose divergence hits the trust region.
    let radius = config.trust_region_d2_max;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut grow = 0;
    while d2_at(hi) < radius && grow < 200 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if d2_at(mid) <= radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut eta = lo;
    for _ in 0..=config.backtracking_steps {
        if eta <= 0.0 {
            break;
        }
        let next = candidate(eta);
        let after = objective.value(&next);
        if after <= before {
            info.objective_after = after;
            info.d2_step = d2_at(eta);
            info.accepted = true;
            return Ok((next, info));
        }
        eta *= 0.5;
    }
    Ok((keep, info))
}

/// Result of one call to [`plan`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    pub distribution: PolicyDistribution,
    pub report: BoundReport,
    pub accepted_steps: usize,
}

/// Runs `iteration_count` sample/update rounds from `warm`, then evaluates the
/// final distribution's bound on a fresh batch.
pub fn plan<E: SampleEvaluator + ?Sized>(
    warm: &PolicyDistribution,
    evaluator: &E,
    config: &PacConfig,
    rng: &mut RngStream,
) -> Result<PlanOutcome> {
    let mut nu = warm.clone();
    let mut accepted_steps = 0;
    for _ in 0..config.iteration_count {
        let samples = evaluate_batch(&nu, evaluator, config, rng)?;
        let (next, info) = update_distribution(&nu, &samples, config)?;
        if info.accepted {
            accepted_steps += 1;
        }
        nu = next;
    }
    let samples = evaluate_batch(&nu, evaluator, config, rng)?;
    let report = bound_report(&samples, &nu, &nu, config)?;
    Ok(PlanOutcome {
        distribution: nu,
        report,
        accepted_steps,
    })
}

/// Receding-horizon shift by `executed_steps` inputs. Shifted-in tail entries
/// get zero mean and `sigma_init`; retained variances are inflated and capped
/// at `sigma_init`.
pub fn warm_start(prev: &PolicyDistribution, executed_steps: usize, config: &PacConfig) -> PolicyDistribution {
    let n = prev.dim();
    let shift = (executed_steps * INPUT_DIM).min(n);
    let mut mu = DVector::zeros(n);
    let mut sigma2 = DVector::from_element(n, config.sigma_init);
    for k in 0..n - shift {
        mu[k] = prev.mu()[k + shift];
        sigma2[k] = (prev.sigma2()[k + shift] * config.warm_inflation).min(config.sigma_init);
    }
    PolicyDistribution::new(mu, sigma2).expect("warm start keeps variances positive")
}

#[cfg(test)]
mod tests;
