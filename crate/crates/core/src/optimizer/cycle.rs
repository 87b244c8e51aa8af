//! Everything one catch-and-throw optimization needs.
//!
//! A cycle runs from one takeoff of a hand to its next takeoff. Local time
//! `tau` is measured from the opening takeoff; the grid has `n_steps + 1`
//! points `k * dt`.

use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::siteswap::ThrowHeight;
use crate::trajectory::{KinematicState, Vec3};

/// Which of the optional constraint groups are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintSet {
    /// Minimum hand-ball distance during the vacant time.
    pub premature_contact: bool,
    /// Vertical and horizontal displacement bounds for low incoming throws.
    pub displacement: bool,
    /// Acceleration cone keeping the carried ball inside the hand.
    pub roll_out: bool,
}

impl ConstraintSet {
    pub const FULL: ConstraintSet = ConstraintSet { premature_contact: true, displacement: true, roll_out: true };
    /// Contact-switch constraints only.
    pub const BASELINE: ConstraintSet =
        ConstraintSet { premature_contact: false, displacement: false, roll_out: false };
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self::FULL
    }
}

/// Constraint families, in the order they are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintId {
    CatchPosition,
    ThrowPosition,
    ThrowVelocity,
    ThrowAcceleration,
    PostTakeoff,
    PreTouchdown,
    PrematureContact,
    VerticalDisplacement,
    HorizontalDisplacement,
    RollOut,
    ReleaseClearance,
    CatchClosure,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 12] = [
        ConstraintId::CatchPosition,
        ConstraintId::ThrowPosition,
        ConstraintId::ThrowVelocity,
        ConstraintId::ThrowAcceleration,
        ConstraintId::PostTakeoff,
        ConstraintId::PreTouchdown,
        ConstraintId::PrematureContact,
        ConstraintId::VerticalDisplacement,
        ConstraintId::HorizontalDisplacement,
        ConstraintId::RollOut,
        ConstraintId::ReleaseClearance,
        ConstraintId::CatchClosure,
    ];

    pub fn is_equality(self) -> bool {
        (self as usize) < ConstraintId::PrematureContact as usize
    }

    /// Short label, `C1` .. `C12`.
    pub fn label(self) -> &'static str {
        ["C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10", "C11", "C12"][self as usize]
    }
}

/// Tunable windows, distance schedules and margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    pub n_steps: usize,
    /// Post-takeoff collinearity duration (s).
    pub post_takeoff_window: f64,
    /// Axial lead of the released ball over the hand at the end of the
    /// post-takeoff window (m); 0 disables the clearance constraint.
    pub release_clearance: f64,
    /// Pre-touchdown collinearity duration (s).
    pub pre_touchdown_window: f64,
    /// Minimum speed at which the incoming ball closes on the hand along its
    /// axis during the pre-touchdown window (m/s); negative disables it.
    pub catch_closing_speed: f64,
    /// Peak of the minimum hand-ball distance schedule (m).
    pub premature_distance: f64,
    /// Depth below the rest point, along the hand axis, of a second probe that
    /// must also keep the premature-contact distance (m). Covers the funnel
    /// body under the rest point; 0 disables the probe.
    pub premature_probe_depth: f64,
    /// Vertical displacement bound at takeoff and at the pre-touchdown window (m).
    pub vertical_start: f64,
    pub vertical_end: f64,
    /// Horizontal displacement bound at takeoff and at the pre-touchdown window (m).
    pub horizontal_start: f64,
    pub horizontal_end: f64,
    /// Incoming throws from height 3 up to this height get the displacement schedules.
    pub displacement_max_height: u8,
    /// Hand cone slope angle (deg).
    pub slope_angle_deg: f64,
    /// Margin turning strict inequalities into non-strict ones.
    pub margin: f64,
    /// Use the exact relative-velocity pre-touchdown form instead of the approximation.
    pub exact_pre_touchdown: bool,
    pub constraints: ConstraintSet,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            n_steps: 24,
            post_takeoff_window: 0.04,
            release_clearance: 0.03,
            pre_touchdown_window: 0.05,
            catch_closing_speed: 0.1,
            premature_distance: 0.3,
            premature_probe_depth: 0.0375 / 20f64.to_radians().sin(),
            vertical_start: 0.2,
            vertical_end: 0.02,
            horizontal_start: 2.0,
            horizontal_end: 0.15,
            displacement_max_height: 4,
            slope_angle_deg: 20.0,
            margin: 1e-4,
            exact_pre_touchdown: false,
            constraints: ConstraintSet::FULL,
        }
    }
}

/// How a cycle ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CycleEnd {
    /// Release a ball at the given position and velocity.
    Throw { position: Vec3, velocity: Vec3 },
    /// Empty hand: come to rest at the given position.
    Rest { position: Vec3 },
}

impl CycleEnd {
    pub fn position(&self) -> Vec3 {
        match *self {
            CycleEnd::Throw { position, .. } | CycleEnd::Rest { position } => position,
        }
    }
}

/// Predicted flight of the ball this hand catches during the cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncomingBall {
    /// Touchdown time relative to the cycle start.
    pub touchdown_time: f64,
    pub touchdown_position: Vec3,
    pub touchdown_velocity: Vec3,
    pub height: ThrowHeight,
}

impl IncomingBall {
    /// Ballistic position and velocity at local time `tau`.
    pub fn state_at(&self, tau: f64, g: &Vec3) -> (Vec3, Vec3) {
        let dt = tau - self.touchdown_time;
        (self.touchdown_position + self.touchdown_velocity * dt + 0.5 * g * dt * dt, self.touchdown_velocity + g * dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Incoming {
    /// Nothing lands in this hand during the cycle.
    None,
    /// The hand already holds its ball when the cycle starts.
    Held,
    Flight(IncomingBall),
}

/// Hand symmetry axis as slerp keyframes over local time.
#[derive(Debug, Clone, PartialEq)]
pub struct HandNormalSchedule {
    keys: Vec<(f64, Vec3)>,
}

impl HandNormalSchedule {
    pub fn new(keys: Vec<(f64, Vec3)>) -> Self {
        debug_assert!(!keys.is_empty());
        let keys = keys.into_iter().map(|(t, n)| (t, n.normalize())).collect();
        Self { keys }
    }

    pub fn constant(n: Vec3) -> Self {
        Self::new(vec![(0.0, n)])
    }

    pub fn at(&self, tau: f64) -> Vec3 {
        let first = self.keys[0];
        if tau <= first.0 {
            return first.1;
        }
        for w in self.keys.windows(2) {
            let (t0, n0) = w[0];
            let (t1, n1) = w[1];
            if tau <= t1 {
                if t1 - t0 <= 0.0 {
                    return n1;
                }
                return slerp(&n0, &n1, (tau - t0) / (t1 - t0));
            }
        }
        self.keys[self.keys.len() - 1].1
    }

    pub fn per_step(&self, dt: f64, n_steps: usize) -> Vec<Vec3> {
        (0..=n_steps).map(|k| self.at(k as f64 * dt)).collect()
    }

    pub fn keys(&self) -> &[(f64, Vec3)] {
        &self.keys
    }
}

/// Spherical interpolation between unit vectors.
pub fn slerp(a: &Vec3, b: &Vec3, s: f64) -> Vec3 {
    let cos = a.dot(b).clamp(-1.0, 1.0);
    let theta = cos.acos();
    if theta < 1e-9 {
        return a.lerp(b, s).normalize();
    }
    if (std::f64::consts::PI - theta).abs() < 1e-6 {
        // antiparallel: rotate through any perpendicular
        let perp = a.cross(&Vec3::x()).try_normalize(1e-9).unwrap_or_else(|| a.cross(&Vec3::y()).normalize());
        let half = if s < 0.5 { slerp(a, &perp, 2.0 * s) } else { slerp(&perp, b, 2.0 * s - 1.0) };
        return half;
    }
    let sin = theta.sin();
    (a * ((1.0 - s) * theta).sin() / sin + b * (s * theta).sin() / sin).normalize()
}

/// Piecewise-linear scalar schedule over local time.
#[derive(Debug, Clone, PartialEq)]
pub struct Ramp {
    points: Vec<(f64, f64)>,
}

impl Ramp {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Self { points }
    }

    pub fn at(&self, tau: f64) -> f64 {
        let p = &self.points;
        if tau <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            if tau <= w[1].0 {
                let span = w[1].0 - w[0].0;
                if span <= 0.0 {
                    return w[1].1;
                }
                return w[0].1 + (w[1].1 - w[0].1) * (tau - w[0].0) / span;
            }
        }
        p[p.len() - 1].1
    }
}

/// Resolved windows and distance schedules of one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintWindows {
    pub post_takeoff: f64,
    pub pre_touchdown: f64,
    pub premature: Ramp,
    pub vertical: Ramp,
    pub horizontal: Ramp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleSpec {
    /// Absolute time of the opening takeoff.
    pub t0: f64,
    pub duration: f64,
    pub n_steps: usize,
    pub start: KinematicState,
    pub end: CycleEnd,
    pub incoming: Incoming,
    /// Takeoff velocity of the ball released at the cycle start, if any.
    pub released: Option<Vec3>,
    pub gravity: Vec3,
    pub slope_angle: f64,
    pub margin: f64,
    pub premature_probe_depth: f64,
    pub displacement_max_height: u8,
    pub release_clearance: f64,
    pub catch_closing_speed: f64,
    pub exact_pre_touchdown: bool,
    pub constraints: ConstraintSet,
    pub windows: ConstraintWindows,
    pub normals: HandNormalSchedule,
}

/// Inputs for [`CycleSpec::build`].
#[derive(Debug, Clone, Copy)]
pub struct CycleInputs {
    pub t0: f64,
    pub duration: f64,
    pub start: KinematicState,
    pub end: CycleEnd,
    pub incoming: Incoming,
    pub released: Option<Vec3>,
    pub gravity: Vec3,
}

impl CycleSpec {
    pub fn build(inputs: CycleInputs, config: &CycleConfig) -> Result<CycleSpec, OptimError> {
        let CycleInputs { t0, duration, start, end, incoming, released, gravity } = inputs;
        if config.n_steps < 2 || !duration.is_finite() || duration <= 0.0 {
            return Err(OptimError::InfeasibleSpec("cycle needs a positive duration and at least two steps".into()));
        }
        let dt = duration / config.n_steps as f64;
        let post = config.post_takeoff_window.max(dt);
        let pre = config.pre_touchdown_window.max(dt);
        let up = Vec3::z();
        let released_dir = released.and_then(|v| v.try_normalize(1e-12));
        let open_dir = released_dir.unwrap_or(up);
        let close_dir = match end {
            CycleEnd::Throw { velocity, .. } => velocity.try_normalize(1e-12).unwrap_or(up),
            CycleEnd::Rest { .. } => up,
        };

        let (normals, windows) = match incoming {
            Incoming::Flight(ball) => {
                let td = ball.touchdown_time;
                if !(td > dt && td < duration) {
                    return Err(OptimError::InfeasibleSpec(format!(
                        "touchdown at {td:.4} s outside the cycle (0, {duration:.4})"
                    )));
                }
                let approach_start = td - pre;
                let release_end = if released_dir.is_some() { post } else { 0.0 };
                if approach_start < release_end {
                    return Err(OptimError::WindowOverlap { release_end, approach_start });
                }
                let approach = (-ball.touchdown_velocity).try_normalize(1e-12).unwrap_or(up);
                let mid_vacant = 0.5 * (release_end + approach_start);
                let mid_dwell = 0.5 * (td + duration);
                let normals = HandNormalSchedule::new(vec![
                    (0.0, open_dir),
                    (release_end, open_dir),
                    (mid_vacant, up),
                    (approach_start, approach),
                    (td, approach),
                    (mid_dwell, up),
                    (duration, close_dir),
                ]);
                let windows = ConstraintWindows {
                    post_takeoff: post,
                    pre_touchdown: pre,
                    premature: Ramp::new(vec![
                        (release_end, 0.0),
                        (mid_vacant, config.premature_distance),
                        (approach_start, 0.0),
                    ]),
                    vertical: Ramp::new(vec![(0.0, config.vertical_start), (approach_start, config.vertical_end)]),
                    horizontal: Ramp::new(vec![
                        (0.0, config.horizontal_start),
                        (approach_start, config.horizontal_end),
                    ]),
                };
                (normals, windows)
            }
            Incoming::None | Incoming::Held => {
                let release_end = if released_dir.is_some() { post.min(0.5 * duration) } else { 0.0 };
                let normals = HandNormalSchedule::new(vec![
                    (0.0, open_dir),
                    (release_end, open_dir),
                    (0.5 * duration, up),
                    (duration, close_dir),
                ]);
                let windows = ConstraintWindows {
                    post_takeoff: post,
                    pre_touchdown: pre,
                    premature: Ramp::new(vec![(0.0, 0.0)]),
                    vertical: Ramp::new(vec![(0.0, config.vertical_start)]),
                    horizontal: Ramp::new(vec![(0.0, config.horizontal_start)]),
                };
                (normals, windows)
            }
        };

        Ok(CycleSpec {
            t0,
            duration,
            n_steps: config.n_steps,
            start,
            end,
            incoming,
            released: released_dir.and(released),
            gravity,
            slope_angle: config.slope_angle_deg.to_radians(),
            margin: config.margin,
            premature_probe_depth: config.premature_probe_depth,
            displacement_max_height: config.displacement_max_height,
            release_clearance: config.release_clearance,
            catch_closing_speed: config.catch_closing_speed,
            exact_pre_touchdown: config.exact_pre_touchdown,
            constraints: config.constraints,
            windows,
            normals,
        })
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.n_steps as f64
    }

    pub fn step_time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn incoming_ball(&self) -> Option<&IncomingBall> {
        match &self.incoming {
            Incoming::Flight(b) => Some(b),
            _ => None,
        }
    }

    /// Start of the dwell (carry) phase in local time, if the hand carries a ball.
    pub fn dwell_start(&self) -> Option<f64> {
        match (&self.incoming, &self.end) {
            (Incoming::Flight(b), _) => Some(b.touchdown_time),
            (Incoming::Held, _) => Some(0.0),
            (Incoming::None, _) => None,
        }
    }

    fn steps_where(&self, pred: impl Fn(f64) -> bool) -> Vec<usize> {
        (1..self.n_steps).filter(|&k| pred(self.step_time(k))).collect()
    }

    /// Grid steps at which each constraint family applies (constraint selection applied).
    pub fn active_steps(&self, id: ConstraintId) -> Vec<usize> {
        self.steps_for(id, &self.constraints)
    }

    /// Grid steps of a constraint family under an arbitrary constraint selection.
    pub fn steps_for(&self, id: ConstraintId, set: &ConstraintSet) -> Vec<usize> {
        const EPS: f64 = 1e-9;
        let n = self.n_steps;
        let ball = self.incoming_ball();
        match id {
            ConstraintId::CatchPosition => Vec::new(),
            ConstraintId::ThrowPosition | ConstraintId::ThrowVelocity | ConstraintId::ThrowAcceleration => vec![n],
            ConstraintId::PostTakeoff => {
                if self.released.is_none() {
                    return Vec::new();
                }
                let mut s = self.steps_where(|t| t <= self.windows.post_takeoff + EPS);
                if s.is_empty() {
                    s.push(1);
                }
                s
            }
            ConstraintId::ReleaseClearance => {
                if self.released.is_none() || self.release_clearance <= 0.0 {
                    return Vec::new();
                }
                let last = self.steps_where(|t| t <= self.windows.post_takeoff + EPS).last().copied();
                vec![last.unwrap_or(1)]
            }
            ConstraintId::CatchClosure => match ball {
                Some(b) if self.catch_closing_speed >= 0.0 => {
                    // the pre-touchdown window plus the first step at or after touchdown
                    let mut s = self.steps_for(ConstraintId::PreTouchdown, set);
                    let after = (b.touchdown_time / self.dt() - EPS).ceil() as usize;
                    if after < n && !s.contains(&after) {
                        s.push(after);
                    }
                    s
                }
                _ => Vec::new(),
            },
            ConstraintId::PreTouchdown => match ball {
                None => Vec::new(),
                Some(b) => {
                    let td = b.touchdown_time;
                    let mut s = self.steps_where(|t| t >= td - self.windows.pre_touchdown - EPS && t < td - EPS);
                    if s.is_empty() {
                        // round a short window up to the last step before touchdown
                        let k = ((td / self.dt()).ceil() as usize).saturating_sub(1).max(1);
                        s.push(k);
                    }
                    s
                }
            },
            ConstraintId::PrematureContact => match ball {
                Some(b) if set.premature_contact => {
                    self.steps_where(|t| t < b.touchdown_time && self.windows.premature.at(t) > 0.0)
                }
                _ => Vec::new(),
            },
            ConstraintId::VerticalDisplacement | ConstraintId::HorizontalDisplacement => match ball {
                Some(b) if set.displacement && (3..=self.displacement_max_height).contains(&b.height.0) => {
                    self.steps_where(|t| t < b.touchdown_time - EPS)
                }
                _ => Vec::new(),
            },
            ConstraintId::RollOut => match self.dwell_start() {
                Some(td) if set.roll_out => {
                    let mut s = self.steps_where(|t| t >= td - EPS);
                    if s.is_empty() {
                        s.push(n - 1);
                    }
                    s
                }
                _ => Vec::new(),
            },
        }
    }
}
