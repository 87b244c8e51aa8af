//! Constraint residuals computed from a rolled-out trajectory.
//!
//! Nothing here uses the linear maps of the assembled problem: states come from
//! exact trajectory rollout and each constraint is written in its physical form
//! (cross products for collinearity, distances for clearance).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cycle::{ConstraintId, ConstraintSet, CycleEnd, CycleSpec};
use crate::trajectory::{JerkTrajectory, Vec3};

/// One constraint instance. Equalities report `|residual|`; inequalities report
/// `g` with the margin included, satisfied when `g <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub id: ConstraintId,
    pub step: usize,
    pub time: f64,
    pub value: f64,
}

impl Residual {
    /// Amount by which the constraint is violated (zero when satisfied).
    pub fn violation(&self) -> f64 {
        if self.id.is_equality() {
            self.value
        } else {
            self.value.max(0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residuals: Vec<Residual>,
}

impl ResidualReport {
    pub fn max_violation(&self, id: ConstraintId) -> Option<f64> {
        self.residuals.iter().filter(|r| r.id == id).map(Residual::violation).reduce(f64::max)
    }

    pub fn max_equality_residual(&self) -> f64 {
        self.residuals.iter().filter(|r| r.id.is_equality()).map(|r| r.value).fold(0.0, f64::max)
    }

    pub fn max_inequality_violation(&self) -> f64 {
        self.residuals.iter().filter(|r| !r.id.is_equality()).map(Residual::violation).fold(0.0, f64::max)
    }

    /// Families with a violation above `tol`, with their worst value.
    pub fn violated(&self, tol: f64) -> BTreeMap<ConstraintId, f64> {
        let mut out = BTreeMap::new();
        for r in &self.residuals {
            let v = r.violation();
            if v > tol {
                let e = out.entry(r.id).or_insert(0.0f64);
                *e = e.max(v);
            }
        }
        out
    }
}

/// Residuals of every constraint family selected by `set`, on local time.
pub fn evaluate_constraints(traj: &JerkTrajectory, spec: &CycleSpec, set: &ConstraintSet) -> ResidualReport {
    let g = spec.gravity;
    let state = |tau: f64| traj.eval_local(tau);
    let mut out = Vec::new();
    let mut push = |id, step, time, value| out.push(Residual { id, step, time, value });

    let end = state(spec.duration);
    let n = spec.n_steps;
    match spec.end {
        CycleEnd::Throw { position, velocity } => {
            push(ConstraintId::ThrowPosition, n, spec.duration, (end.position - position).norm());
            push(ConstraintId::ThrowVelocity, n, spec.duration, (end.velocity - velocity).norm());
            push(ConstraintId::ThrowAcceleration, n, spec.duration, (end.acceleration - g).norm());
        }
        CycleEnd::Rest { position } => {
            push(ConstraintId::ThrowPosition, n, spec.duration, (end.position - position).norm());
            push(ConstraintId::ThrowVelocity, n, spec.duration, end.velocity.norm());
            push(ConstraintId::ThrowAcceleration, n, spec.duration, end.acceleration.norm());
        }
    }
    for k in spec.steps_for(ConstraintId::PostTakeoff, set) {
        let tau = spec.step_time(k);
        let s = state(tau);
        push(ConstraintId::PostTakeoff, k, tau, (s.acceleration - g).cross(&spec.normals.at(tau)).norm());
    }

    let sin_alpha = spec.slope_angle.sin();
    if let Some(ball) = spec.incoming_ball() {
        let td = ball.touchdown_time;
        push(ConstraintId::CatchPosition, 0, td, (state(td).position - ball.touchdown_position).norm());
        for k in spec.steps_for(ConstraintId::PreTouchdown, set) {
            let tau = spec.step_time(k);
            let v = state(tau).velocity;
            let r = if spec.exact_pre_touchdown {
                let (_, vb) = ball.state_at(tau, &g);
                (v - vb).cross(&spec.normals.at(tau)).norm()
            } else {
                v.cross(&ball.touchdown_velocity.normalize()).norm()
            };
            push(ConstraintId::PreTouchdown, k, tau, r);
        }
        for k in spec.steps_for(ConstraintId::CatchClosure, set) {
            let tau = spec.step_time(k);
            let (_, vb) = ball.state_at(tau, &g);
            let closing = spec.normals.at(tau).dot(&(state(tau).velocity - vb));
            push(ConstraintId::CatchClosure, k, tau, spec.catch_closing_speed + spec.margin - closing);
        }
        for k in spec.steps_for(ConstraintId::PrematureContact, set) {
            let tau = spec.step_time(k);
            let (pb, _) = ball.state_at(tau, &g);
            let x = state(tau).position;
            let mut d = (x - pb).norm();
            if spec.premature_probe_depth > 0.0 {
                d = d.min((x - spec.normals.at(tau) * spec.premature_probe_depth - pb).norm());
            }
            push(ConstraintId::PrematureContact, k, tau, spec.windows.premature.at(tau) + spec.margin - d);
        }
        for k in spec.steps_for(ConstraintId::VerticalDisplacement, set) {
            let tau = spec.step_time(k);
            let (pb, _) = ball.state_at(tau, &g);
            let x = state(tau).position;
            let bound = spec.windows.vertical.at(tau);
            push(ConstraintId::VerticalDisplacement, k, tau, x.z - pb.z - bound + spec.margin);
            let horiz = Vec3::new(x.x - pb.x, x.y - pb.y, 0.0).norm();
            push(ConstraintId::HorizontalDisplacement, k, tau, horiz - spec.windows.horizontal.at(tau) + spec.margin);
        }
    }
    for k in spec.steps_for(ConstraintId::RollOut, set) {
        let tau = spec.step_time(k);
        let u = g - state(tau).acceleration;
        let value = spec.normals.at(tau).dot(&u) + sin_alpha * u.norm() + spec.margin;
        push(ConstraintId::RollOut, k, tau, value);
    }
    if let Some(v0) = spec.released {
        for k in spec.steps_for(ConstraintId::ReleaseClearance, set) {
            let tau = spec.step_time(k);
            let pb = spec.start.position + v0 * tau + g * (0.5 * tau * tau);
            let lead = spec.normals.at(tau).dot(&(pb - state(tau).position));
            push(ConstraintId::ReleaseClearance, k, tau, spec.release_clearance + spec.margin - lead);
        }
    }
    ResidualReport { residuals: out }
}
