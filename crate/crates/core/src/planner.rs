//! Bridges the throw schedule and the cycle optimizer.
//!
//! A hand's cycle ending at beat `i` opens with its takeoff at beat `i - 2`,
//! catches the ball landing at beat `i` (touchdown one dwell before `t_i`) and
//! closes with the throw of beat `i`.

use crate::ballistics::{flight_time, takeoff_velocity, BallisticsError, Hand, HandGeometryConfig, TimingConfig};
use crate::optimizer::{CycleEnd, CycleInputs, Incoming, IncomingBall};
use crate::siteswap::ThrowHeight;
use crate::trajectory::{KinematicState, Vec3};

/// Nominal release velocity of an `a`-throw made on `beat`; `None` for 0-throws.
pub fn nominal_release(
    beat: i64,
    a: ThrowHeight,
    timing: &TimingConfig,
    geometry: &HandGeometryConfig,
) -> Result<Option<Vec3>, BallisticsError> {
    if a.0 == 0 {
        return Ok(None);
    }
    let tf = flight_time(a, timing)?;
    let from = geometry.takeoff_position(Hand::for_beat(beat));
    let to = geometry.touchdown_position(Hand::for_beat(beat + a.0 as i64));
    Ok(Some(takeoff_velocity(&from, &to, tf, &geometry.gravity())))
}

/// Hand state right after a nominal throw (or at rest after a 0-throw).
pub fn state_after_release(
    beat: i64,
    a: Option<ThrowHeight>,
    timing: &TimingConfig,
    geometry: &HandGeometryConfig,
) -> Result<KinematicState, BallisticsError> {
    let position = geometry.takeoff_position(Hand::for_beat(beat));
    let released = match a {
        Some(a) => nominal_release(beat, a, timing, geometry)?,
        None => None,
    };
    Ok(match released {
        Some(v) => KinematicState { position, velocity: v, acceleration: geometry.gravity() },
        None => KinematicState { position, velocity: Vec3::zeros(), acceleration: Vec3::zeros() },
    })
}

/// Nominal incoming ball of the cycle ending at `beat`, caught `c` beats after its throw.
pub fn nominal_incoming(
    beat: i64,
    c: ThrowHeight,
    timing: &TimingConfig,
    geometry: &HandGeometryConfig,
) -> Result<Incoming, BallisticsError> {
    if c.0 == 0 {
        return Ok(Incoming::None);
    }
    let thrown = beat - c.0 as i64;
    let v0 = nominal_release(thrown, c, timing, geometry)?.expect("nonzero throw");
    let tf = flight_time(c, timing)?;
    Ok(Incoming::Flight(IncomingBall {
        touchdown_time: timing.cycle_time - timing.dwell_time(),
        touchdown_position: geometry.touchdown_position(Hand::for_beat(beat)),
        touchdown_velocity: v0 + geometry.gravity() * tf,
        height: c,
    }))
}

/// Cycle ending with the throw of `beat`, under nominal conditions.
///
/// `previous` is this hand's throw at `beat - 2` (`None` when the hand was idle
/// before), `incoming` the height of the ball landing at `beat` and `target` the
/// throw made at `beat`. `t0` is the absolute time of beat `beat - 2`.
pub fn nominal_cycle(
    beat: i64,
    previous: Option<ThrowHeight>,
    incoming: ThrowHeight,
    target: ThrowHeight,
    timing: &TimingConfig,
    geometry: &HandGeometryConfig,
    t0: f64,
) -> Result<CycleInputs, BallisticsError> {
    let start = state_after_release(beat - 2, previous, timing, geometry)?;
    let released = match previous {
        Some(a) => nominal_release(beat - 2, a, timing, geometry)?,
        None => None,
    };
    Ok(CycleInputs {
        t0,
        duration: timing.cycle_time,
        start,
        end: cycle_end(beat, target, timing, geometry)?,
        incoming: nominal_incoming(beat, incoming, timing, geometry)?,
        released,
        gravity: geometry.gravity(),
    })
}

pub fn cycle_end(
    beat: i64,
    target: ThrowHeight,
    timing: &TimingConfig,
    geometry: &HandGeometryConfig,
) -> Result<CycleEnd, BallisticsError> {
    let position = geometry.takeoff_position(Hand::for_beat(beat));
    Ok(match nominal_release(beat, target, timing, geometry)? {
        Some(velocity) => CycleEnd::Throw { position, velocity },
        None => CycleEnd::Rest { position },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cascade_cycle_is_symmetric_in_time() {
        let t = TimingConfig::default();
        let g = HandGeometryConfig::default();
        let c = nominal_cycle(4, Some(ThrowHeight(3)), ThrowHeight(3), ThrowHeight(3), &t, &g, 0.0).unwrap();
        let Incoming::Flight(ball) = c.incoming else { panic!("cascade catches a ball") };
        assert!((ball.touchdown_time - 0.24).abs() < 1e-12);
        assert!((ball.touchdown_velocity.z + 0.5 * 9.81 * 0.48).abs() < 1e-12);
        // the ball arrives from the left and leaves toward the left
        assert!(ball.touchdown_velocity.x > 0.0 && c.released.unwrap().x < 0.0);
    }

    #[test]
    fn two_throw_stays_in_hand() {
        let t = TimingConfig::default();
        let g = HandGeometryConfig::default();
        let Incoming::Flight(ball) = nominal_incoming(2, ThrowHeight(2), &t, &g).unwrap() else { panic!() };
        assert_eq!(ball.touchdown_position, g.touchdown_position(Hand::Right));
        let v = nominal_release(0, ThrowHeight(2), &t, &g).unwrap().unwrap();
        assert!(v.x > 0.0, "right hand hops outward to its own touchdown point");
    }
}
