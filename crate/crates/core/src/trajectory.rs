//! Piecewise-constant-jerk hand trajectories.
//!
//! Position, velocity and acceleration are affine in the jerk sequence. The
//! coefficient rows computed here are shared by every axis, which is what the
//! optimizer exploits to build its linear maps.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("time {t} outside trajectory domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
}

/// Kinematic state of a point: position, velocity, acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KinematicState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JerkTrajectory {
    pub t0: f64,
    pub dt: f64,
    pub initial: KinematicState,
    pub jerks: Vec<Vec3>,
}

// Slack for evaluating exactly at the domain ends despite rounding.
const DOMAIN_EPS: f64 = 1e-9;

impl JerkTrajectory {
    pub fn new(t0: f64, dt: f64, initial: KinematicState, jerks: Vec<Vec3>) -> Self {
        Self { t0, dt, initial, jerks }
    }

    pub fn n_steps(&self) -> usize {
        self.jerks.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.jerks.len() as f64
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.duration()
    }

    /// Jerks as a flat vector `[j0x, j0y, j0z, j1x, ...]`.
    pub fn flat_jerks(&self) -> Vec<f64> {
        self.jerks.iter().flat_map(|j| [j.x, j.y, j.z]).collect()
    }

    pub fn set_flat_jerks(&mut self, z: &[f64]) {
        for (k, j) in self.jerks.iter_mut().enumerate() {
            *j = Vec3::new(z[3 * k], z[3 * k + 1], z[3 * k + 2]);
        }
    }

    /// Exact state at absolute time `t`.
    pub fn rollout(&self, t: f64) -> Result<KinematicState, TrajectoryError> {
        let end = self.end_time();
        if t < self.t0 - DOMAIN_EPS || t > end + DOMAIN_EPS {
            return Err(TrajectoryError::OutOfDomain { t, start: self.t0, end });
        }
        Ok(self.eval_local((t - self.t0).clamp(0.0, self.duration())))
    }

    /// State at local time `tau` in `[0, duration]`, without domain checks.
    pub fn eval_local(&self, tau: f64) -> KinematicState {
        let n = self.jerks.len();
        let mut p = self.initial.position;
        let mut v = self.initial.velocity;
        let mut a = self.initial.acceleration;
        if n == 0 {
            return integrate(p, v, a, Vec3::zeros(), tau);
        }
        let k = ((tau / self.dt).floor() as usize).min(n - 1);
        for j in &self.jerks[..k] {
            let s = integrate(p, v, a, *j, self.dt);
            p = s.position;
            v = s.velocity;
            a = s.acceleration;
        }
        integrate(p, v, a, self.jerks[k], tau - k as f64 * self.dt)
    }

    pub fn final_state(&self) -> KinematicState {
        self.eval_local(self.duration())
    }

    /// State at every step boundary, `n_steps + 1` entries.
    pub fn step_states(&self) -> Vec<KinematicState> {
        let mut out = Vec::with_capacity(self.jerks.len() + 1);
        let mut s = self.initial;
        out.push(s);
        for j in &self.jerks {
            s = integrate(s.position, s.velocity, s.acceleration, *j, self.dt);
            out.push(s);
        }
        out
    }
}

fn integrate(p: Vec3, v: Vec3, a: Vec3, j: Vec3, t: f64) -> KinematicState {
    let t2 = t * t;
    KinematicState {
        position: p + v * t + a * (t2 / 2.0) + j * (t2 * t / 6.0),
        velocity: v + a * t + j * (t2 / 2.0),
        acceleration: a + j * t,
    }
}

/// Which derivative of the position a linear map refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Position,
    Velocity,
    Acceleration,
}

/// Scalar sensitivity of a derivative at local time `tau` to each segment jerk.
///
/// The same row applies to the x, y and z axes independently.
pub fn jerk_coefficients(derivative: Derivative, tau: f64, dt: f64, n_steps: usize) -> Vec<f64> {
    (0..n_steps)
        .map(|k| {
            let start = k as f64 * dt;
            let s = (tau - start).clamp(0.0, dt);
            let rem = (tau - start - dt).max(0.0);
            match derivative {
                Derivative::Acceleration => s,
                Derivative::Velocity => s * s / 2.0 + s * rem,
                Derivative::Position => s * s * s / 6.0 + s * s / 2.0 * rem + s * rem * rem / 2.0,
            }
        })
        .collect()
}

/// Contribution of the initial state to a derivative at local time `tau`.
pub fn initial_contribution(derivative: Derivative, initial: &KinematicState, tau: f64) -> Vec3 {
    let (p, v, a) = (initial.position, initial.velocity, initial.acceleration);
    match derivative {
        Derivative::Acceleration => a,
        Derivative::Velocity => v + a * tau,
        Derivative::Position => p + v * tau + a * (tau * tau / 2.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest() -> KinematicState {
        KinematicState::default()
    }

    #[test]
    fn zero_jerk_holds_position() {
        let mut init = rest();
        init.position = Vec3::new(1.0, 2.0, 3.0);
        let tr = JerkTrajectory::new(0.0, 0.02, init, vec![Vec3::zeros(); 24]);
        for k in 0..=48 {
            let s = tr.rollout(k as f64 * 0.01).unwrap();
            assert_eq!(s.position, init.position);
        }
    }

    #[test]
    fn constant_jerk_closed_form() {
        let j = Vec3::new(3.0, -2.0, 7.0);
        let tr = JerkTrajectory::new(1.0, 0.02, rest(), vec![j; 24]);
        for k in 0..=100 {
            let t = k as f64 * 0.0048;
            let s = tr.rollout(1.0 + t).unwrap();
            let expected = j * t.powi(3) / 6.0;
            assert!((s.position - expected).norm() < 1e-14);
            assert!((s.velocity - j * t * t / 2.0).norm() < 1e-13);
        }
    }

    #[test]
    fn domain_checks() {
        let tr = JerkTrajectory::new(1.0, 0.02, rest(), vec![Vec3::zeros(); 24]);
        assert!(tr.rollout(0.99).is_err());
        assert!(tr.rollout(1.49).is_err());
        assert!(tr.rollout(1.48).is_ok());
    }

    #[test]
    fn coefficient_rows_reproduce_rollout() {
        let init = KinematicState {
            position: Vec3::new(0.1, 0.2, 0.3),
            velocity: Vec3::new(-1.0, 0.5, 2.0),
            acceleration: Vec3::new(0.0, 0.0, -9.81),
        };
        let jerks: Vec<Vec3> = (0..24)
            .map(|k| Vec3::new((k as f64).sin() * 100.0, (k as f64 * 0.7).cos() * 50.0, k as f64 * 3.0))
            .collect();
        let tr = JerkTrajectory::new(0.0, 0.02, init, jerks.clone());
        for &tau in &[0.0, 0.013, 0.02, 0.2371, 0.4, 0.48] {
            let s = tr.eval_local(tau);
            for (d, want) in [
                (Derivative::Position, s.position),
                (Derivative::Velocity, s.velocity),
                (Derivative::Acceleration, s.acceleration),
            ] {
                let row = jerk_coefficients(d, tau, 0.02, 24);
                let mut got = initial_contribution(d, &init, tau);
                for (c, j) in row.iter().zip(&jerks) {
                    got += j * *c;
                }
                assert!((got - want).norm() < 1e-11, "{d:?} at {tau}");
            }
        }
    }
}
