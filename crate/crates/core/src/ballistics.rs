//! Throw sequences to timed contact switches under constant gravity, no drag.

use std::collections::HashMap;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::siteswap::{step_state, SiteswapError, SiteswapState, ThrowHeight};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BallisticsError {
    #[error("throw height {height} has non-positive flight time at dwell ratio {dwell_ratio}")]
    NonPositiveFlightTime { height: u8, dwell_ratio: f64 },
    #[error("invalid timing: cycle time {cycle_time} s, dwell ratio {dwell_ratio}")]
    InvalidTiming { cycle_time: f64, dwell_ratio: f64 },
    #[error("ball never crosses the catch plane")]
    NeverCrosses,
    #[error(transparent)]
    Siteswap(#[from] SiteswapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    /// Time between two throws of the same hand.
    pub cycle_time: f64,
    /// Fraction of the cycle a hand holds its ball.
    pub dwell_ratio: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { cycle_time: 0.48, dwell_ratio: 0.5 }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<(), BallisticsError> {
        let ok =
            self.cycle_time > 0.0 && self.cycle_time.is_finite() && self.dwell_ratio > 0.0 && self.dwell_ratio < 1.0;
        if ok {
            Ok(())
        } else {
            Err(BallisticsError::InvalidTiming { cycle_time: self.cycle_time, dwell_ratio: self.dwell_ratio })
        }
    }

    pub fn beat_time(&self) -> f64 {
        self.cycle_time / 2.0
    }

    pub fn dwell_time(&self) -> f64 {
        self.dwell_ratio * self.cycle_time
    }

    pub fn vacant_time(&self) -> f64 {
        (1.0 - self.dwell_ratio) * self.cycle_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Right,
    Left,
}

impl Hand {
    /// Hand throwing on beat `beat`; even beats are right-handed.
    pub fn for_beat(beat: i64) -> Hand {
        if beat.rem_euclid(2) == 0 {
            Hand::Right
        } else {
            Hand::Left
        }
    }

    pub fn index(self) -> usize {
        match self {
            Hand::Right => 0,
            Hand::Left => 1,
        }
    }

    pub fn other(self) -> Hand {
        match self {
            Hand::Right => Hand::Left,
            Hand::Left => Hand::Right,
        }
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hand::Right => "right",
            Hand::Left => "left",
        })
    }
}

/// Desired contact-switch locations per hand, and gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandGeometryConfig {
    pub takeoff: [[f64; 3]; 2],
    pub touchdown: [[f64; 3]; 2],
    pub gravity: [f64; 3],
}

impl Default for HandGeometryConfig {
    fn default() -> Self {
        Self {
            takeoff: [[0.35, 0.0, 0.0], [-0.35, 0.0, 0.0]],
            touchdown: [[0.45, 0.0, 0.0], [-0.45, 0.0, 0.0]],
            gravity: [0.0, 0.0, -9.81],
        }
    }
}

impl HandGeometryConfig {
    pub fn takeoff_position(&self, hand: Hand) -> Vec3 {
        Vec3::from(self.takeoff[hand.index()])
    }

    pub fn touchdown_position(&self, hand: Hand) -> Vec3 {
        Vec3::from(self.touchdown[hand.index()])
    }

    pub fn gravity(&self) -> Vec3 {
        Vec3::from(self.gravity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchKind {
    Takeoff,
    Touchdown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSwitch {
    pub kind: SwitchKind,
    pub time: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub hand: Hand,
    pub ball_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallFlight {
    pub takeoff: ContactSwitch,
    pub touchdown: ContactSwitch,
    pub flight_time: f64,
    pub throw_height: ThrowHeight,
    /// Beat of the throw.
    pub beat: i64,
}

impl BallFlight {
    pub fn position_at(&self, t: f64, g: &Vec3) -> Vec3 {
        propagate(&self.takeoff.position, &self.takeoff.velocity, t - self.takeoff.time, g).0
    }

    pub fn state_at(&self, t: f64, g: &Vec3) -> (Vec3, Vec3) {
        propagate(&self.takeoff.position, &self.takeoff.velocity, t - self.takeoff.time, g)
    }

    /// Apex height above the takeoff point.
    pub fn apex_height(&self, g: &Vec3) -> f64 {
        let vz = self.takeoff.velocity.z;
        if vz <= 0.0 {
            0.0
        } else {
            vz * vz / (2.0 * g.z.abs())
        }
    }
}

/// Flight time `(a - 2r) * tau / 2` of an `a`-throw.
pub fn flight_time(a: ThrowHeight, timing: &TimingConfig) -> Result<f64, BallisticsError> {
    let t = (a.0 as f64 - 2.0 * timing.dwell_ratio) * timing.cycle_time / 2.0;
    if t > 0.0 {
        Ok(t)
    } else {
        Err(BallisticsError::NonPositiveFlightTime { height: a.0, dwell_ratio: timing.dwell_ratio })
    }
}

/// Takeoff velocity that lands a ball at `p_td` after `flight_time` seconds.
pub fn takeoff_velocity(p_to: &Vec3, p_td: &Vec3, flight_time: f64, g: &Vec3) -> Vec3 {
    debug_assert!(flight_time > 0.0);
    (p_td - p_to - 0.5 * g * flight_time * flight_time) / flight_time
}

/// Ballistic state after `t` seconds.
pub fn propagate(p: &Vec3, v: &Vec3, t: f64, g: &Vec3) -> (Vec3, Vec3) {
    (p + v * t + 0.5 * g * t * t, v + g * t)
}

/// Descending crossing of the plane `z = catch_height`: (time from now, position, velocity).
pub fn predict_touchdown(
    pos: &Vec3,
    vel: &Vec3,
    catch_height: f64,
    g: &Vec3,
) -> Result<(f64, Vec3, Vec3), BallisticsError> {
    let a = 0.5 * g.z;
    let b = vel.z;
    let c = pos.z - catch_height;
    if a >= 0.0 {
        return Err(BallisticsError::NeverCrosses);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(BallisticsError::NeverCrosses);
    }
    // Larger root of a t^2 + b t + c with a < 0, in a cancellation-free form.
    let sq = disc.sqrt();
    let t = if b >= 0.0 { (-b - sq) / (2.0 * a) } else { 2.0 * c / (-b + sq) };
    if t < 0.0 {
        return Err(BallisticsError::NeverCrosses);
    }
    let (p, v) = propagate(pos, vel, t, g);
    Ok((t, Vec3::new(p.x, p.y, catch_height), v))
}

/// What one beat of a schedule does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatEvent {
    pub beat: i64,
    pub time: f64,
    pub hand: Hand,
    pub throw: ThrowHeight,
    /// Ball thrown on this beat; `None` for 0-throws.
    pub ball: Option<usize>,
    /// Index into `Schedule::flights` of the throw made on this beat.
    pub flight: Option<usize>,
    /// Index of the flight that lands in this beat's hand before the throw.
    pub incoming: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Schedule {
    pub beats: Vec<BeatEvent>,
    pub flights: Vec<BallFlight>,
}

impl Schedule {
    pub fn switches(&self) -> Vec<(ContactSwitch, ThrowHeight)> {
        let mut out: Vec<_> =
            self.flights.iter().flat_map(|f| [(f.takeoff, f.throw_height), (f.touchdown, f.throw_height)]).collect();
        out.sort_by(|a, b| a.0.time.total_cmp(&b.0.time));
        out
    }

    /// JSON-lines export, one record per contact switch.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (s, h) in self.switches() {
            let rec = serde_json::json!({
                "t": s.time,
                "kind": s.kind,
                "hand": s.hand,
                "ball": s.ball_id,
                "p": [s.position.x, s.position.y, s.position.z],
                "v": [s.velocity.x, s.velocity.y, s.velocity.z],
                "height": h.0,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }
}

/// Nominal flight of an `a`-throw made on `beat` from its hand.
pub fn nominal_flight(
    beat: i64,
    a: ThrowHeight,
    ball_id: usize,
    timing: &TimingConfig,
    geometry: &HandGeometryConfig,
    start_time: f64,
) -> Result<BallFlight, BallisticsError> {
    let g = geometry.gravity();
    let hand = Hand::for_beat(beat);
    let dest = Hand::for_beat(beat + a.0 as i64);
    let tf = flight_time(a, timing)?;
    let t0 = start_time + beat as f64 * timing.beat_time();
    let p_to = geometry.takeoff_position(hand);
    let p_td = geometry.touchdown_position(dest);
    let v_to = takeoff_velocity(&p_to, &p_td, tf, &g);
    Ok(BallFlight {
        takeoff: ContactSwitch { kind: SwitchKind::Takeoff, time: t0, position: p_to, velocity: v_to, hand, ball_id },
        touchdown: ContactSwitch {
            kind: SwitchKind::Touchdown,
            time: t0 + tf,
            position: p_td,
            velocity: v_to + g * tf,
            hand: dest,
            ball_id,
        },
        flight_time: tf,
        throw_height: a,
        beat,
    })
}

/// Schedules `throws` starting at beat `first_beat` from `start` state.
///
/// Balls already in the air (set bits of `start`) get ids `0..B` in landing
/// order; `prior` may give the flights that bring them in.
pub fn schedule_sequence(
    start: SiteswapState,
    throws: &[ThrowHeight],
    timing: &TimingConfig,
    geometry: &HandGeometryConfig,
    start_time: f64,
) -> Result<Schedule, BallisticsError> {
    schedule_from(start, 0, throws, timing, geometry, start_time, &[])
}

/// General form of [`schedule_sequence`]: beat numbering starts at `first_beat`,
/// and `prior` lists already scheduled flights (their landings feed the first beats).
pub fn schedule_from(
    start: SiteswapState,
    first_beat: i64,
    throws: &[ThrowHeight],
    timing: &TimingConfig,
    geometry: &HandGeometryConfig,
    start_time: f64,
    prior: &[BallFlight],
) -> Result<Schedule, BallisticsError> {
    timing.validate()?;
    let mut schedule = Schedule { beats: Vec::with_capacity(throws.len()), flights: prior.to_vec() };
    // landing beat -> (ball id, flight index if known)
    let mut landing: HashMap<i64, (usize, Option<usize>)> = HashMap::new();
    let mut next_id = 0usize;
    for i in 0..start.width() {
        if start.is_set(i) {
            let beat = first_beat + i as i64;
            let known = prior.iter().position(|f| f.beat + f.throw_height.0 as i64 == beat);
            let id = known.map(|k| prior[k].takeoff.ball_id).unwrap_or(next_id);
            next_id = next_id.max(id + 1);
            landing.insert(beat, (id, known));
        }
    }
    let mut state = start;
    for (k, &a) in throws.iter().enumerate() {
        let beat = first_beat + k as i64;
        state = step_state(state, a)?;
        let time = start_time + beat as f64 * timing.beat_time();
        let hand = Hand::for_beat(beat);
        let arrived = landing.remove(&beat);
        let mut ev =
            BeatEvent { beat, time, hand, throw: a, ball: None, flight: None, incoming: arrived.and_then(|x| x.1) };
        if a.0 > 0 {
            let (id, _) = arrived.expect("state replay guarantees a held ball");
            let flight = nominal_flight(beat, a, id, timing, geometry, start_time)?;
            schedule.flights.push(flight);
            let fi = schedule.flights.len() - 1;
            landing.insert(beat + a.0 as i64, (id, Some(fi)));
            ev.ball = Some(id);
            ev.flight = Some(fi);
        }
        schedule.beats.push(ev);
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::siteswap::parse_pattern;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn flight_times() {
        let t = TimingConfig::default();
        assert!(close(flight_time(ThrowHeight(9), &t).unwrap(), 1.92, 1e-12));
        assert!(close(flight_time(ThrowHeight(2), &t).unwrap(), 0.24, 1e-12));
        assert!(close(flight_time(ThrowHeight(3), &t).unwrap(), 0.48, 1e-12));
        assert!(flight_time(ThrowHeight(1), &t).is_err());
        let at_boundary = TimingConfig { cycle_time: 0.48, dwell_ratio: 1.0 - 1e-12 };
        assert!(flight_time(ThrowHeight(2), &at_boundary).unwrap() > 0.0);
        let r1 = TimingConfig { cycle_time: 0.48, dwell_ratio: 1.0 };
        assert!(flight_time(ThrowHeight(2), &r1).is_err());
    }

    #[test]
    fn vertical_takeoff_speed_for_nine() {
        let g = Vec3::new(0.0, 0.0, -9.81);
        let v = takeoff_velocity(&Vec3::zeros(), &Vec3::zeros(), 1.92, &g);
        assert!(close(v.z, 9.4176, 1e-12));
        let drop = takeoff_velocity(&Vec3::zeros(), &(0.5 * g * 4.0), 2.0, &g);
        assert!(drop.norm() < 1e-15);
    }

    #[test]
    fn touchdown_prediction() {
        let g = Vec3::new(0.0, 0.0, -9.81);
        let (t, _, _) = predict_touchdown(&Vec3::new(0.0, 0.0, 4.52), &Vec3::zeros(), 0.0, &g).unwrap();
        assert!(close(t, (2.0 * 4.52 / 9.81f64).sqrt(), 1e-12));
        assert!(close(t, 0.96, 0.001));
        let (t0, _, _) = predict_touchdown(&Vec3::zeros(), &Vec3::new(0.0, 0.0, -1.0), 0.0, &g).unwrap();
        assert_eq!(t0, 0.0);
        assert_eq!(
            predict_touchdown(&Vec3::new(0.0, 0.0, -1.0), &Vec3::new(0.0, 0.0, -1.0), 0.0, &g),
            Err(BallisticsError::NeverCrosses)
        );
    }

    #[test]
    fn cascade_schedule() {
        let timing = TimingConfig::default();
        let geo = HandGeometryConfig::default();
        let p = parse_pattern("3").unwrap();
        let throws: Vec<_> = p.throws().iter().copied().cycle().take(10).collect();
        let s = schedule_sequence(SiteswapState::ground(3, 9), &throws, &timing, &geo, 0.0).unwrap();
        assert_eq!(s.flights.len(), 10);
        for (k, f) in s.flights.iter().enumerate() {
            assert!(close(f.flight_time, 0.48, 1e-12));
            assert_eq!(f.takeoff.hand, Hand::for_beat(k as i64));
            assert_ne!(f.takeoff.hand, f.touchdown.hand);
            // catch precedes the next throw of that ball by the dwell time
            assert!(close(f.touchdown.time, (k as f64 + 3.0) * 0.24 - 0.24, 1e-12));
        }
        // ball ids cycle through 0, 1, 2
        let ids: Vec<_> = s.beats.iter().map(|b| b.ball.unwrap()).collect();
        assert_eq!(&ids[..6], &[0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn two_throw_stays_in_hand() {
        let timing = TimingConfig::default();
        let geo = HandGeometryConfig::default();
        let throws = parse_pattern("423").unwrap().throws().to_vec();
        let s = schedule_sequence(SiteswapState::ground(3, 9), &throws, &timing, &geo, 0.0).unwrap();
        let two = s.flights.iter().find(|f| f.throw_height == ThrowHeight(2)).unwrap();
        assert_eq!(two.takeoff.hand, two.touchdown.hand);
        assert_eq!(two.touchdown.position, geo.touchdown_position(two.takeoff.hand));
        assert!(schedule_sequence(SiteswapState::ground(3, 9), &[], &timing, &geo, 0.0).unwrap().flights.is_empty());
    }
}
