//! Ball physics against kinematic funnel hands.
//!
//! Balls are point-mass spheres. Hands are thin conical shells whose rest
//! point (the ball center when seated) follows a planned trajectory exactly.
//! Contacts use a penalty spring with implicit normal damping and a
//! regularized Coulomb friction impulse, both per step.

mod episode;

pub use episode::{
    initialize_from_ground_state, run_episode, BallStatus, DropCause, DropEvent, EpisodeConfig, EpisodeError,
    EpisodeEvent, EpisodeStats, EventKind, InitialWorld, ThrowSource,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{tangent_basis, HandNormalSchedule};
use crate::trajectory::{JerkTrajectory, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("step {h} s is not below the stability bound {bound} s")]
    UnstableStep { h: f64, bound: f64 },
    #[error("invalid contact parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite state of ball {ball} at t = {t}")]
    NonFinite { ball: usize, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactParams {
    /// N/m
    pub stiffness: f64,
    /// N s/m
    pub damping: f64,
    pub friction: f64,
    /// Integration step (s).
    pub step: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { stiffness: 1e5, damping: 1e3, friction: 0.5, step: 2e-4 }
    }
}

impl ContactParams {
    pub fn validate(&self, mass: f64) -> Result<(), SimError> {
        if !(self.stiffness > 0.0 && self.damping > 0.0 && self.friction >= 0.0 && mass > 0.0) {
            return Err(SimError::InvalidParams(format!("{self:?}, mass {mass}")));
        }
        if !(self.step > 0.0 && self.step <= 1e-3) {
            return Err(SimError::InvalidParams(format!("step {} outside (0, 1e-3]", self.step)));
        }
        let bound = 2.0 * (mass / self.stiffness).sqrt();
        if self.step >= bound {
            return Err(SimError::UnstableStep { h: self.step, bound });
        }
        Ok(())
    }
}

/// Funnel geometry shared by both hands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandBody {
    pub mouth_radius: f64,
    /// Half-angle between wall and axis (rad).
    pub slope_angle: f64,
}

impl Default for HandBody {
    fn default() -> Self {
        Self { mouth_radius: 0.05, slope_angle: 20f64.to_radians() }
    }
}

impl HandBody {
    /// Axial distance from the apex to the seated ball center.
    pub fn seat_height(&self, ball_radius: f64) -> f64 {
        ball_radius / self.slope_angle.sin()
    }

    /// Wall length from apex to rim.
    pub fn slant_length(&self) -> f64 {
        self.mouth_radius / self.slope_angle.sin()
    }

    /// Axial distance from the apex to the mouth plane.
    pub fn depth(&self) -> f64 {
        self.mouth_radius / self.slope_angle.tan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallBody {
    pub radius: f64,
    pub mass: f64,
}

impl Default for BallBody {
    fn default() -> Self {
        Self { radius: 0.0375, mass: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallState {
    pub position: Vec3,
    pub velocity: Vec3,
}

/// Kinematic hand pose: rest point, its velocity, axis and axis angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandPose {
    pub position: Vec3,
    pub velocity: Vec3,
    pub normal: Vec3,
    pub angular_velocity: Vec3,
}

impl HandPose {
    pub fn at_rest(position: Vec3, normal: Vec3) -> Self {
        Self { position, velocity: Vec3::zeros(), normal: normal.normalize(), angular_velocity: Vec3::zeros() }
    }

    pub fn surface_velocity(&self, point: &Vec3) -> Vec3 {
        self.velocity + self.angular_velocity.cross(&(point - self.position))
    }
}

/// Pose of a hand tracking `trajectory` exactly, at absolute time `t`.
///
/// Times outside the trajectory clamp to its ends. The axis angular velocity
/// comes from a central difference of the normal schedule.
pub fn planned_pose(trajectory: &JerkTrajectory, normals: &HandNormalSchedule, t: f64) -> HandPose {
    let tau = (t - trajectory.t0).clamp(0.0, trajectory.duration());
    let s = trajectory.eval_local(tau);
    let normal = normals.at(tau);
    let d = 1e-4;
    let dn = (normals.at(tau + d) - normals.at(tau - d)) / (2.0 * d);
    HandPose { position: s.position, velocity: s.velocity, normal, angular_velocity: normal.cross(&dn) }
}

/// Ball center expressed in a hand's cone frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeCoordinates {
    /// Distance from the axis.
    pub radial: f64,
    /// Height above the apex along the axis.
    pub axial: f64,
    /// Unit radial direction.
    pub radial_dir: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point: Vec3,
    /// Unit normal pointing from the surface toward the ball center.
    pub normal: Vec3,
    pub penetration: f64,
}

pub fn cone_coordinates(hand: &HandBody, ball: &BallBody, pose: &HandPose, center: &Vec3) -> ConeCoordinates {
    let apex = pose.position - pose.normal * hand.seat_height(ball.radius);
    let d = center - apex;
    let axial = d.dot(&pose.normal);
    let r = d - pose.normal * axial;
    let radial = r.norm();
    let radial_dir = if radial > 1e-12 { r / radial } else { tangent_basis(&pose.normal)[0] };
    ConeCoordinates { radial, axial, radial_dir }
}

/// Up to two contacts of a ball with the cone walls or rim.
///
/// Works in the meridian plane through the ball center: the near and far wall
/// generators are segments from the apex to the rim, so rim contact is the
/// segment endpoint and both faces of the shell are handled alike.
pub fn cone_contacts(hand: &HandBody, ball: &BallBody, pose: &HandPose, center: &Vec3) -> [Option<Contact>; 2] {
    let c = cone_coordinates(hand, ball, pose, center);
    // cheap rejection: beyond the rim sphere
    let reach = hand.slant_length() + ball.radius;
    if c.radial * c.radial + c.axial * c.axial > reach * reach {
        return [None, None];
    }
    let apex = pose.position - pose.normal * hand.seat_height(ball.radius);
    let (sin, cos) = hand.slope_angle.sin_cos();
    let len = hand.slant_length();
    let side = |sign: f64| -> Option<Contact> {
        // generator direction (radial, axial) = (sign * sin, cos)
        let gx = sign * sin;
        let gy = cos;
        let t = (c.radial * gx + c.axial * gy).clamp(0.0, len);
        let qx = t * gx;
        let qy = t * gy;
        let dx = c.radial - qx;
        let dy = c.axial - qy;
        let dist = (dx * dx + dy * dy).sqrt();
        if dist >= ball.radius || dist < 1e-12 {
            return None;
        }
        let point = apex + c.radial_dir * qx + pose.normal * qy;
        let normal = c.radial_dir * (dx / dist) + pose.normal * (dy / dist);
        Some(Contact { point, normal, penetration: ball.radius - dist })
    };
    [side(1.0), side(-1.0)]
}

/// Velocity change of a ball from one contact over one step.
pub fn contact_impulse(
    params: &ContactParams,
    ball: &BallBody,
    velocity: &Vec3,
    contact: &Contact,
    surface_velocity: &Vec3,
) -> Vec3 {
    let h = params.step;
    let m = ball.mass;
    let rel = velocity - surface_velocity;
    let vn = rel.dot(&contact.normal);
    // spring explicit, damping implicit; no adhesion
    let vn_new = (vn + h * params.stiffness * contact.penetration / m) / (1.0 + h * params.damping / m);
    let dvn = (vn_new - vn).max(0.0);
    let vt = rel - contact.normal * vn;
    let speed_t = vt.norm();
    let mut dv = contact.normal * dvn;
    if speed_t > 0.0 && params.friction > 0.0 {
        let viscous = speed_t - speed_t / (1.0 + h * params.damping / m);
        let cap = params.friction * dvn;
        dv -= vt * (viscous.min(cap) / speed_t);
    }
    dv
}

/// Advances one ball by one step against the given hand poses.
///
/// Free flight is integrated exactly; contact impulses enter the velocity
/// before the position update (semi-implicit).
pub fn step_ball(
    params: &ContactParams,
    hand: &HandBody,
    ball: &BallBody,
    state: &BallState,
    poses: &[HandPose],
    gravity: &Vec3,
) -> (BallState, bool) {
    let h = params.step;
    let mut dv = gravity * h;
    let mut touching = false;
    for pose in poses {
        for contact in cone_contacts(hand, ball, pose, &state.position).into_iter().flatten() {
            touching = true;
            dv += contact_impulse(params, ball, &state.velocity, &contact, &pose.surface_velocity(&contact.point));
        }
    }
    let velocity = state.velocity + dv;
    let position = state.position + velocity * h - gravity * (0.5 * h * h);
    (BallState { position, velocity }, touching)
}

/// Kinetic plus gravitational potential energy.
pub fn mechanical_energy(ball: &BallBody, state: &BallState, gravity: &Vec3) -> f64 {
    0.5 * ball.mass * state.velocity.norm_squared() - ball.mass * gravity.dot(&state.position)
}

/// Energy stored in the contact springs of a ball.
pub fn elastic_energy(
    params: &ContactParams,
    hand: &HandBody,
    ball: &BallBody,
    state: &BallState,
    poses: &[HandPose],
) -> f64 {
    poses
        .iter()
        .flat_map(|pose| cone_contacts(hand, ball, pose, &state.position))
        .flatten()
        .map(|c| 0.5 * params.stiffness * c.penetration * c.penetration)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upright() -> HandPose {
        HandPose::at_rest(Vec3::zeros(), Vec3::z())
    }

    #[test]
    fn seated_ball_touches_both_walls_lightly() {
        let hand = HandBody::default();
        let ball = BallBody::default();
        let contacts = cone_contacts(&hand, &ball, &upright(), &Vec3::new(0.0, 0.0, -1e-5));
        let [Some(a), Some(b)] = contacts else { panic!("two wall contacts expected") };
        assert!((a.penetration - 1e-5 * hand.slope_angle.sin()).abs() < 1e-9);
        assert!((a.normal.z - b.normal.z).abs() < 1e-12 && a.normal.z > 0.0);
    }

    #[test]
    fn rim_contact_from_outside() {
        let hand = HandBody::default();
        let ball = BallBody::default();
        let pose = upright();
        let rim_height = hand.depth() - hand.seat_height(ball.radius);
        let center = Vec3::new(hand.mouth_radius + 0.03, 0.0, rim_height + 0.01);
        let [Some(c), None] = cone_contacts(&hand, &ball, &pose, &center) else { panic!("one rim contact expected") };
        let rim = Vec3::new(hand.mouth_radius, 0.0, rim_height);
        assert!((c.point - rim).norm() < 1e-12);
        assert!((c.penetration - (ball.radius - (center - rim).norm())).abs() < 1e-12);
    }

    #[test]
    fn far_ball_has_no_contact() {
        let hand = HandBody::default();
        let ball = BallBody::default();
        assert_eq!(cone_contacts(&hand, &ball, &upright(), &Vec3::new(0.0, 0.0, 0.2)), [None, None]);
    }

    #[test]
    fn stability_bound_is_checked() {
        let p = ContactParams { stiffness: 1e8, ..ContactParams::default() };
        assert!(matches!(p.validate(0.1), Err(SimError::UnstableStep { .. })));
        assert!(ContactParams::default().validate(0.1).is_ok());
    }
}
