//! Robust estimator, golden-section search over alpha, and the bound terms.

use serde::{Deserialize, Serialize};

/// `(1 / (M alpha)) sum ln(1 + alpha l_m w_m)`.
pub fn robust_estimate(values: &[f64], weights: &[f64], alpha: f64) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    let m = values.len() as f64;
    let acc: f64 = values
        .iter()
        .zip(weights)
        .map(|(l, w)| (alpha * l * w).ln_1p())
        .sum();
    acc / (m * alpha)
}

/// Concentration term `ln(1/delta) / (M alpha)`.
pub fn concentration(delta: f64, sample_count: usize, alpha: f64) -> f64 {
    (1.0 / delta).ln() / (sample_count as f64 * alpha)
}

/// Golden-section minimization of `f` over `ln alpha in [ln lo, ln hi]` using
/// exactly `evaluations` function calls. Returns `(alpha, f(alpha))`.
pub fn golden_section_ln<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, evaluations: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    if evaluations < 2 {
        let x = (0.5 * (a + b)).exp();
        return (x, f(x));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c.exp());
    let mut fd = f(d.exp());
    for _ in 2..evaluations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d.exp());
        }
    }
    if fc <= fd {
        (c.exp(), fc)
    } else {
        (d.exp(), fd)
    }
}

/// One side (cost or constraint) of the bound at its optimal alpha.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundSide {
    pub hat: f64,
    pub d_term: f64,
    pub phi_term: f64,
    pub plus: f64,
    pub alpha: f64,
}

/// Search settings shared by both bound sides.
#[derive(Clone, Copy, Debug)]
pub struct AlphaSearch {
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
    pub delta: f64,
}

/// `min_alpha J_alpha + alpha d + Phi_alpha` for normalized `values`.
pub fn bound_side(values: &[f64], weights: &[f64], d_term: f64, search: &AlphaSearch) -> BoundSide {
    let m = values.len();
    let total = |alpha: f64| {
        robust_estimate(values, weights, alpha) + alpha * d_term + concentration(search.delta, m, alpha)
    };
    let (alpha, plus) = golden_section_ln(total, search.lo, search.hi, search.evaluations);
    BoundSide {
        hat: robust_estimate(values, weights, alpha),
        d_term,
        phi_term: concentration(search.delta, m, alpha),
        plus,
        alpha,
    }
}
