//! Finite-horizon time-varying LQR about a nominal trajectory.

use nalgebra::{Matrix2, Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::dynamics::{linearize, wrap_angle, AgentState, BicycleParams, ControlInput, GainMatrix, Trajectory};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LqrWeights {
    pub q: Matrix5<f64>,
    pub r: Matrix2<f64>,
    pub q_terminal: Matrix5<f64>,
}

impl Default for LqrWeights {
    fn default() -> Self {
        let q = Matrix5::from_diagonal(&Vector5::new(10.0, 10.0, 1.0, 1.0, 0.1));
        Self {
            q,
            r: Matrix2::identity(),
            q_terminal: q,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LqrWeightsDiag {
    q: [f64; 5],
    r: [f64; 2],
    q_terminal: [f64; 5],
}

impl Serialize for LqrWeights {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d5 = |m: &Matrix5<f64>| -> [f64; 5] { std::array::from_fn(|i| m[(i, i)]) };
        LqrWeightsDiag {
            q: d5(&self.q),
            r: [self.r[(0, 0)], self.r[(1, 1)]],
            q_terminal: d5(&self.q_terminal),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LqrWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = LqrWeightsDiag::deserialize(d)?;
        Ok(Self {
            q: Matrix5::from_diagonal(&Vector5::from(w.q)),
            r: Matrix2::new(w.r[0], 0.0, 0.0, w.r[1]),
            q_terminal: Matrix5::from_diagonal(&Vector5::from(w.q_terminal)),
        })
    }
}

/// One 2x5 feedback gain per nominal input.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSchedule {
    pub gains: Vec<GainMatrix>,
}

impl GainSchedule {
    pub fn zeros(horizon: usize) -> Self {
        Self {
            gains: vec![GainMatrix::zeros(); horizon],
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// Backward Riccati recursion. Returns the gains and the cost-to-go matrices
/// `P_0 .. P_N` (so `costs_to_go.len() == horizon + 1`).
pub fn riccati(
    nominal: &Trajectory,
    weights: &LqrWeights,
    params: &BicycleParams,
) -> Result<(GainSchedule, Vec<Matrix5<f64>>)> {
    let n = nominal.horizon();
    let mut gains = vec![GainMatrix::zeros(); n];
    let mut ps = vec![Matrix5::zeros(); n + 1];
    let mut p = weights.q_terminal;
    ps[n] = p;
    for t in (0..n).rev() {
        let (a, b) = linearize(&nominal.states[t], &nominal.inputs[t], params);
        let bt_p = b.transpose() * p;
        let s = weights.r + bt_p * b;
        let s_inv = s.try_inverse().ok_or(Error::SingularRiccati { step: t })?;
        let k = s_inv * (bt_p * a);
        let next = weights.q + a.transpose() * p * (a - b * k);
        p = (next + next.transpose()) * 0.5;
        gains[t] = k;
        ps[t] = p;
    }
    Ok((GainSchedule { gains }, ps))
}

/// TVLQR gains about `nominal`.
pub fn tvlqr_gains(nominal: &Trajectory, weights: &LqrWeights, params: &BicycleParams) -> Result<GainSchedule> {
    riccati(nominal, weights, params).map(|(g, _)| g)
}

/// `u = u_nom + K (x_nom - x)` with the heading error wrapped, then clamped.
pub fn apply_policy(
    gain: &GainMatrix,
    x_nominal: &AgentState,
    u_nominal: &ControlInput,
    x_actual: &AgentState,
    params: &BicycleParams,
) -> ControlInput {
    let mut err = x_nominal.0 - x_actual.0;
    err[2] = wrap_angle(err[2]);
    params.clamp_input(ControlInput(u_nominal.0 + gain * err))
}
