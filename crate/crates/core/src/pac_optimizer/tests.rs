use approx::assert_relative_eq;
use nalgebra::{DVector, Vector2};

use super::*;
use crate::coordinator::PredictionSet;
use crate::costs::{CostParams, GoalSpec, StateBounds};
use crate::dynamics::{rollout_nominal, AgentState, BicycleParams, ControlInput};
use crate::policy_dist::{renyi2_divergence, PolicyDistribution, PolicyParams};
use crate::tvlqr::LqrWeights;
use crate::world::{Circle, ObstacleField, Purpose, RngStream};

fn rng(k: u64) -> RngStream {
    RngStream::for_purpose(11, Purpose::Test, 0, k)
}

/// Deterministic quadratic cost around a target; violation when the first
/// coordinate exceeds a threshold.
struct Quadratic {
    target: DVector<f64>,
    threshold: f64,
}

impl SampleEvaluator for Quadratic {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn evaluate(&self, xi: &DVector<f64>, _index: usize, _rng: &mut RngStream) -> crate::Result<SampleOutcome> {
        Ok(SampleOutcome {
            cost: (xi - &self.target).norm_squared() * 10.0,
            violated: xi[0] > self.threshold,
        })
    }
}

fn quad() -> Quadratic {
    Quadratic {
        target: DVector::from_vec(vec![0.5, -0.3, 0.2, 0.1]),
        threshold: 0.2,
    }
}

fn config(m: usize) -> PacConfig {
    PacConfig {
        sample_count: m,
        ..PacConfig::default()
    }
}

fn perturbed(nu: &PolicyDistribution, k: usize, h: f64, on_mu: bool) -> PolicyDistribution {
    let mut mu = nu.mu().clone();
    let mut ls = nu.log_sigma2().clone();
    if on_mu {
        mu[k] += h;
    } else {
        ls[k] += h;
    }
    PolicyDistribution::from_log(mu, ls)
}

fn check_gradient<F: Fn(&PolicyDistribution) -> f64>(f: F, g: (DVector<f64>, DVector<f64>), at: &PolicyDistribution) {
    let h = 1e-5;
    for (on_mu, grad) in [(true, &g.0), (false, &g.1)] {
        for k in 0..at.dim() {
            let fd = (f(&perturbed(at, k, h, on_mu)) - f(&perturbed(at, k, -h, on_mu))) / (2.0 * h);
            let scale = grad.amax().max(1e-8);
            assert!(
                (fd - grad[k]).abs() <= 1e-3 * scale,
                "component {k} (mu: {on_mu}): analytic {} vs fd {fd}",
                grad[k]
            );
        }
    }
}

#[test]
fn step_objective_gradient_matches_finite_differences() {
    let cfg = config(2000);
    let sampling = PolicyDistribution::new(DVector::from_vec(vec![0.0, 0.1, -0.1, 0.0]), DVector::from_element(4, 0.09)).unwrap();
    let samples = evaluate_batch(&sampling, &quad(), &cfg, &mut rng(1)).unwrap();
    let obj = StepObjective::new(&samples, &sampling, &cfg).unwrap();
    let at = PolicyDistribution::new(DVector::from_vec(vec![0.05, 0.08, -0.05, 0.02]), DVector::from_vec(vec![0.08, 0.1, 0.09, 0.085])).unwrap();
    check_gradient(|c| obj.value(c), obj.gradient(&at), &at);
}

#[test]
fn bound_gradient_matches_finite_differences() {
    let cfg = config(2000);
    let sampling = PolicyDistribution::new(DVector::zeros(4), DVector::from_element(4, 0.09)).unwrap();
    let samples = evaluate_batch(&sampling, &quad(), &cfg, &mut rng(2)).unwrap();
    let values = samples.normalized_costs(&cfg);
    let alpha = 0.7;
    let f = |c: &PolicyDistribution| {
        let d = 0.5 * renyi2_divergence(c, &sampling).unwrap().exp();
        robust_estimate(&values, &samples.weights(c), alpha) + alpha * d
    };
    let at = PolicyDistribution::new(DVector::from_vec(vec![0.03, -0.02, 0.01, 0.04]), DVector::from_element(4, 0.1)).unwrap();
    check_gradient(f, bound_gradient(&samples, &values, &at, &sampling, alpha), &at);
}

#[test]
fn update_respects_trust_region_and_descends() {
    let cfg = config(256);
    let mut nu = PolicyDistribution::isotropic(2, 0.25);
    for it in 0..20 {
        let samples = evaluate_batch(&nu, &quad(), &cfg, &mut rng(100 + it)).unwrap();
        let (next, info) = update_distribution(&nu, &samples, &cfg).unwrap();
        let d2 = renyi2_divergence(&next, &nu).unwrap();
        assert!(d2 <= cfg.trust_region_d2_max + 1e-9, "d2 {d2}");
        let obj = StepObjective::new(&samples, &nu, &cfg).unwrap();
        assert!(obj.value(&next) <= obj.value(&nu) + 1e-9);
        assert!(info.objective_after <= info.objective_before + 1e-9);
        assert!(next.sigma2().iter().all(|s| *s >= cfg.sigma_floor * (1.0 - 1e-12)));
        nu = next;
    }
    // The mean moved toward the target.
    assert!((nu.mu() - &quad().target).norm() < (quad().target).norm());
}

struct Constant;

impl SampleEvaluator for Constant {
    fn dim(&self) -> usize {
        4
    }

    fn evaluate(&self, _xi: &DVector<f64>, _index: usize, _rng: &mut RngStream) -> crate::Result<SampleOutcome> {
        Ok(SampleOutcome {
            cost: 0.0,
            violated: false,
        })
    }
}

#[test]
fn zero_gradient_keeps_distribution() {
    let cfg = config(64);
    let nu = PolicyDistribution::isotropic(2, 0.2);
    let samples = evaluate_batch(&nu, &Constant, &cfg, &mut rng(3)).unwrap();
    let (next, info) = update_distribution(&nu, &samples, &cfg).unwrap();
    assert_eq!(next, nu);
    assert!(!info.accepted);
}

#[test]
fn zero_iterations_return_warm() {
    let cfg = PacConfig {
        iteration_count: 0,
        sample_count: 1024,
        ..PacConfig::default()
    };
    let warm = PolicyDistribution::isotropic(2, 0.2);
    let out = plan(&warm, &Constant, &cfg, &mut rng(4)).unwrap();
    assert_eq!(out.distribution, warm);
    assert_eq!(out.report.c_hat, 0.0);
    assert_relative_eq!(out.report.c_plus, 2.0 * (0.5 * 20f64.ln() / 1024.0).sqrt(), max_relative = 1e-4);
    assert!(out.report.j_plus >= out.report.j_hat);
}

#[test]
fn warm_start_shapes() {
    let cfg = PacConfig::default();
    let mu = DVector::from_fn(10, |i, _| i as f64);
    let prev = PolicyDistribution::new(mu.clone(), DVector::from_element(10, 0.1)).unwrap();
    assert_eq!(warm_start(&prev, 0, &cfg).mu(), &mu);

    let last = warm_start(&prev, 4, &cfg);
    assert_eq!(last.mu().as_slice(), &[8.0, 9.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_relative_eq!(last.sigma2()[0], 0.15);
    assert_relative_eq!(last.sigma2()[2], cfg.sigma_init);

    let twice = warm_start(&warm_start(&prev, 1, &cfg), 1, &cfg);
    assert_eq!(twice.mu(), warm_start(&prev, 2, &cfg).mu());
    let capped = warm_start(&PolicyDistribution::new(mu, DVector::from_element(10, 0.24)).unwrap(), 1, &cfg);
    assert!(capped.sigma2().iter().all(|s| *s <= cfg.sigma_init));
}

fn test_inputs(n: usize) -> Vec<ControlInput> {
    (0..n).map(|t| ControlInput::new(0.5, if t < n / 2 { 0.2 } else { -0.2 })).collect()
}

#[test]
fn closed_loop_without_noise_tracks_nominal() {
    let params = BicycleParams::default().noiseless();
    let x0 = AgentState::new(0.0, 0.0, 0.2, 0.5, 0.0);
    let inputs = test_inputs(20);
    let xi = PolicyParams::from_inputs(&inputs);
    let traj = rollout_closed_loop(&xi, &x0, &params, &LqrWeights::default(), &mut rng(5)).unwrap();
    let nominal = rollout_nominal(&x0, &inputs, &params);
    for (a, b) in traj.states.iter().zip(&nominal.states) {
        assert!((a.0 - b.0).norm() < 1e-12);
    }
}

fn terminal_spread(closed: bool) -> f64 {
    let params = BicycleParams::default();
    let x0 = AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0);
    let inputs = test_inputs(30);
    let xi = PolicyParams::from_inputs(&inputs);
    let mut r = rng(6);
    let ends: Vec<Vector2<f64>> = (0..200)
        .map(|_| {
            let traj = if closed {
                rollout_closed_loop(&xi, &x0, &params, &LqrWeights::default(), &mut r).unwrap()
            } else {
                let mut x = x0;
                for u in &inputs {
                    x = crate::dynamics::step_stochastic(&x, *u, &params, &mut r);
                }
                crate::dynamics::Trajectory {
                    states: vec![x],
                    inputs: vec![],
                }
            };
            traj.terminal().position()
        })
        .collect();
    let mean = ends.iter().sum::<Vector2<f64>>() / ends.len() as f64;
    (ends.iter().map(|p| (p - mean).norm_squared()).sum::<f64>() / ends.len() as f64).sqrt()
}

#[test]
fn closed_loop_spread_beats_open_loop() {
    let (c, o) = (terminal_spread(true), terminal_spread(false));
    assert!(c < o, "closed {c} open {o}");
}

fn context(horizon: usize, goal: Vector2<f64>, field: ObstacleField) -> PlanContext {
    PlanContext {
        x0: AgentState::new(0.0, 0.0, 0.0, 0.0, 0.0),
        goal: GoalSpec::at(goal),
        field,
        predictions: PredictionSet::default(),
        static_gyro: true,
        agent_gyro: true,
        cost: CostParams::default(),
        dynamics: BicycleParams::default(),
        lqr: LqrWeights::default(),
        bounds: StateBounds::default(),
        horizon,
    }
}

#[test]
fn single_sample_batch_matches_direct_rollout() {
    let ctx = context(10, Vector2::new(5.0, 0.0), ObstacleField::empty());
    let ev = AgentEvaluator::new(&ctx);
    let nu = PolicyDistribution::isotropic(10, 0.25);
    let cfg = config(1);
    let set = evaluate_batch(&nu, &ev, &cfg, &mut rng(7)).unwrap();
    let mut r = rng(7);
    let xi = nu.sample(&mut r);
    let direct = ev.evaluate(&xi.0, 0, &mut r).unwrap();
    assert_eq!(set.xis[0], xi.0);
    assert_eq!(set.costs[0], direct.cost);
    assert_eq!(set.constraints[0], 0.0);
    assert!(set.costs[0] >= 0.0);
}

fn mean_terminal(ctx: &PlanContext, nu: &PolicyDistribution) -> crate::dynamics::Trajectory {
    rollout_nominal(&ctx.x0, &nu.mean_params().inputs(), &ctx.dynamics)
}

#[test]
fn plan_improves_on_warm_start() {
    let goal = Vector2::new(5.0, 0.0);
    let ctx = context(20, goal, ObstacleField::empty());
    let ev = AgentEvaluator::new(&ctx);
    let cfg = config(256);
    let warm = PolicyDistribution::isotropic(20, cfg.sigma_init);
    let before = plan(&warm, &ev, &PacConfig { iteration_count: 0, ..cfg.clone() }, &mut rng(8)).unwrap();
    let out = plan(&warm, &ev, &cfg, &mut rng(8)).unwrap();
    assert!(out.report.j_plus < before.report.j_plus);
    assert!(out.report.j_hat < 0.5 * before.report.j_hat, "{} vs {}", out.report.j_hat, before.report.j_hat);
    // Full acceleration from rest covers 2 m in the 2 s horizon.
    let end = mean_terminal(&ctx, &out.distribution).terminal().position();
    assert!(end.x > 1.2 && end.y.abs() < 0.5, "ended at {end:?}");
}

#[test]
fn plan_clears_blocking_obstacle() {
    let goal = Vector2::new(6.0, 0.0);
    let field = ObstacleField::from_circles(vec![Circle::new(3.0, 0.0, 0.6)]);
    let ctx = context(40, goal, field.clone());
    let ev = AgentEvaluator::new(&ctx);
    let cfg = config(1024);
    let warm = PolicyDistribution::isotropic(40, cfg.sigma_init);
    let out = plan(&warm, &ev, &cfg, &mut rng(9)).unwrap();
    assert!(out.report.c_plus < 0.1, "c_plus {}", out.report.c_plus);
    let nominal = mean_terminal(&ctx, &out.distribution);
    assert!(nominal.states.iter().all(|x| !field.collides(&x.position())));
}

#[test]
fn plan_is_deterministic() {
    let ctx = context(10, Vector2::new(3.0, 1.0), ObstacleField::empty());
    let ev = AgentEvaluator::new(&ctx);
    let cfg = PacConfig {
        sample_count: 32,
        iteration_count: 3,
        ..PacConfig::default()
    };
    let warm = PolicyDistribution::isotropic(10, 0.25);
    let a = plan(&warm, &ev, &cfg, &mut rng(10)).unwrap();
    let b = plan(&warm, &ev, &cfg, &mut rng(10)).unwrap();
    assert_eq!(a, b);
}

