//! Closed-loop juggling episodes: plan each hand cycle at its opening takeoff,
//! simulate the balls, and detect catches and drops.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{cone_coordinates, step_ball, BallBody, BallState, ContactParams, HandBody, HandPose, SimError};
use crate::ballistics::{nominal_flight, predict_touchdown, BallisticsError, Hand, HandGeometryConfig, TimingConfig};
use crate::optimizer::{
    plan_cycle, CycleConfig, CycleInputs, CycleSpec, HandNormalSchedule, Incoming, IncomingBall, OptimError,
    SolverOptions,
};
use crate::planner::{cycle_end, nominal_cycle, nominal_release, state_after_release};
use crate::siteswap::ThrowHeight;
use crate::trajectory::{JerkTrajectory, KinematicState, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpisodeError {
    #[error("no planned trajectory for the {hand} hand at t = {t:.4} s")]
    TrajectoryGap { hand: Hand, t: f64 },
    #[error("throw sequence is inconsistent at beat {beat}: {detail}")]
    InvalidSequence { beat: i64, detail: String },
    #[error("ball count {0} outside 1..=9")]
    BallCount(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Ballistics(#[from] BallisticsError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub timing: TimingConfig,
    pub geometry: HandGeometryConfig,
    pub cycle: CycleConfig,
    pub solver: SolverOptions,
    pub contact: ContactParams,
    pub hand: HandBody,
    pub ball: BallBody,
    /// Stop successfully after this many consecutive catches.
    pub target_catches: usize,
    /// Relative speed below which a ball in the cone counts as caught (m/s).
    pub catch_speed: f64,
    /// Catch requires the ball center within this fraction of the mouth radius of the axis.
    pub catch_radius_ratio: f64,
    /// A free ball this far below the catch plane is lost (m).
    pub fall_margin: f64,
    /// A carried ball whose center rises this far above the mouth plane is lost (m).
    pub escape_height: f64,
    /// Record a trace frame every this many steps (0 disables tracing).
    pub trace_decimation: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            timing: TimingConfig::default(),
            geometry: HandGeometryConfig::default(),
            cycle: CycleConfig::default(),
            solver: SolverOptions::default(),
            contact: ContactParams::default(),
            hand: HandBody::default(),
            ball: BallBody::default(),
            target_catches: 100,
            catch_speed: 0.2,
            catch_radius_ratio: 0.7,
            fall_margin: 0.5,
            escape_height: 0.05,
            trace_decimation: 0,
        }
    }
}

/// Throw heights from beat 0 on; earlier beats belong to the preceding cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrowSource {
    pub balls: usize,
    pub throws: Vec<ThrowHeight>,
}

impl ThrowSource {
    fn at(&self, beat: i64) -> Option<ThrowHeight> {
        usize::try_from(beat).ok().and_then(|b| self.throws.get(b).copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallStatus {
    /// In the air, next thrown on `landing_beat` by that beat's hand.
    Flight {
        landing_beat: i64,
    },
    /// Carried by a hand until the throw on `release_beat`.
    Held {
        hand: Hand,
        release_beat: i64,
    },
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropCause {
    /// Fell below the catch plane while free.
    Fell,
    /// Not caught within the catch window.
    Missed,
    /// Left the cone while being carried.
    RolledOut,
    /// The incoming ball could not be turned into a feasible cycle.
    Unplannable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropEvent {
    pub time: f64,
    pub ball: usize,
    pub cause: DropCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Throw,
    Catch,
    Drop(DropCause),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEvent {
    pub t: f64,
    pub kind: EventKind,
    pub ball: usize,
    pub hand: Hand,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    /// Consecutive catches before the first drop (or the end).
    pub catches: usize,
    pub drops: Vec<DropEvent>,
    /// (throw height, planar distance between actual and nominal touchdown).
    pub touchdown_errors: Vec<(u8, f64)>,
    pub peak_hand_speed: f64,
    pub peak_hand_acceleration: f64,
    /// Wall time per cycle solve (s).
    pub solve_times: Vec<f64>,
    pub unconverged_solves: usize,
    /// Onsets of two ball centers closer than one diameter (no forces applied).
    pub ball_proximity_events: usize,
    pub beats: usize,
    pub events: Vec<EpisodeEvent>,
    #[serde(skip)]
    pub trace_jsonl: Option<String>,
}

impl EpisodeStats {
    pub fn succeeded(&self, target: usize) -> bool {
        self.drops.is_empty() && self.catches >= target
    }

    /// Event log as CSV with columns t, type, ball, hand, detail.
    pub fn events_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "type", "ball", "hand", "detail"]).expect("in-memory write");
        for e in &self.events {
            let kind = match e.kind {
                EventKind::Throw => "throw".to_string(),
                EventKind::Catch => "catch".to_string(),
                EventKind::Drop(c) => format!("drop:{c:?}"),
            };
            w.write_record([format!("{:.6}", e.t), kind, e.ball.to_string(), e.hand.to_string(), e.detail.clone()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

#[derive(Debug, Clone)]
struct Segment {
    trajectory: JerkTrajectory,
    normals: HandNormalSchedule,
    states: Vec<KinematicState>,
}

impl Segment {
    fn new(trajectory: JerkTrajectory, normals: HandNormalSchedule) -> Self {
        let states = trajectory.step_states();
        Self { trajectory, normals, states }
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.trajectory.t0 - 1e-9 && t <= self.trajectory.end_time() + 1e-9
    }

    fn pose(&self, t: f64) -> HandPose {
        let tr = &self.trajectory;
        let tau = (t - tr.t0).clamp(0.0, tr.duration());
        let k = ((tau / tr.dt).floor() as usize).min(tr.n_steps() - 1);
        let s0 = self.states[k];
        let local = tau - k as f64 * tr.dt;
        let j = tr.jerks[k];
        let position =
            s0.position + s0.velocity * local + s0.acceleration * (local * local / 2.0) + j * (local.powi(3) / 6.0);
        let velocity = s0.velocity + s0.acceleration * local + j * (local * local / 2.0);
        let normal = self.normals.at(tau);
        let d = 1e-4;
        let dn = (self.normals.at(tau + d) - self.normals.at(tau - d)) / (2.0 * d);
        HandPose { position, velocity, normal, angular_velocity: normal.cross(&dn) }
    }
}

#[derive(Debug, Clone)]
struct HandTrack {
    segments: Vec<Segment>,
    end_state: KinematicState,
    last_release: Option<Vec3>,
    warm: Option<Vec<f64>>,
}

impl HandTrack {
    fn pose(&self, hand: Hand, t: f64) -> Result<HandPose, EpisodeError> {
        self.segments
            .iter()
            .rev()
            .find(|s| s.contains(t))
            .map(|s| s.pose(t))
            .ok_or(EpisodeError::TrajectoryGap { hand, t })
    }

    fn push(&mut self, seg: Segment) {
        self.end_state = seg.trajectory.final_state();
        self.segments.push(seg);
        if self.segments.len() > 3 {
            self.segments.remove(0);
        }
    }
}

/// Balls and hands at the opening takeoff of the first planned cycle (beat -2).
#[derive(Debug, Clone)]
pub struct InitialWorld {
    pub start_time: f64,
    pub balls: Vec<BallState>,
    pub status: Vec<BallStatus>,
    /// Beat of each ball's most recent throw.
    pub thrown_beat: Vec<i64>,
    hands: [HandTrack; 2],
    /// landing beat -> ball
    landing: BTreeMap<i64, usize>,
    /// beat -> (ball, height) of throws already committed
    throws: BTreeMap<i64, (usize, ThrowHeight)>,
}

fn beat_time(timing: &TimingConfig, beat: i64) -> f64 {
    beat as f64 * timing.beat_time()
}

/// World at beat -2 of a uniform `b`-ball cascade (the ground state from beat 0).
///
/// The right hand is releasing the ball thrown on beat -2, the left hand has
/// just caught the ball it throws on beat -1, and the rest are in flight. With
/// one ball it rests in the right hand.
pub fn initialize_from_ground_state(b: usize, config: &EpisodeConfig) -> Result<InitialWorld, EpisodeError> {
    if !(1..=9).contains(&b) {
        return Err(EpisodeError::BallCount(b));
    }
    let timing = &config.timing;
    let geometry = &config.geometry;
    let g = geometry.gravity();
    let start_time = beat_time(timing, -2);
    let mut balls = Vec::with_capacity(b);
    let mut status = Vec::with_capacity(b);
    let mut thrown_beat = Vec::with_capacity(b);
    let mut landing = BTreeMap::new();
    let mut throws = BTreeMap::new();

    let rest_segment = |hand: Hand, t0: f64| {
        let p = geometry.takeoff_position(hand);
        let init = KinematicState { position: p, ..KinematicState::default() };
        let n = config.cycle.n_steps;
        let tr = JerkTrajectory::new(t0, timing.cycle_time / n as f64, init, vec![Vec3::zeros(); n]);
        Segment::new(tr, HandNormalSchedule::constant(Vec3::z()))
    };

    if b == 1 {
        let right = HandTrack {
            segments: Vec::new(),
            end_state: state_after_release(-2, None, timing, geometry)?,
            last_release: None,
            warm: None,
        };
        let left_seg = rest_segment(Hand::Left, beat_time(timing, -3));
        let left = HandTrack {
            end_state: left_seg.trajectory.final_state(),
            segments: vec![left_seg],
            last_release: None,
            warm: None,
        };
        let p = geometry.takeoff_position(Hand::Right);
        balls.push(BallState { position: p, velocity: Vec3::zeros() });
        status.push(BallStatus::Held { hand: Hand::Right, release_beat: 0 });
        thrown_beat.push(-2);
        landing.insert(0, 0);
        return Ok(InitialWorld { start_time, balls, status, thrown_beat, hands: [right, left], landing, throws });
    }

    let height = ThrowHeight(b as u8);
    // left hand: nominal cascade cycle from beat -3 to its throw on beat -1
    let left_inputs = nominal_cycle(-1, Some(height), height, height, timing, geometry, beat_time(timing, -3))?;
    let left_spec = CycleSpec::build(left_inputs, &config.cycle)?;
    let left_plan = plan_cycle(&left_spec, None, &config.solver)?;
    let left_seg = Segment::new(left_plan.trajectory.clone(), left_spec.normals.clone());
    let left_pose = left_seg.pose(start_time);
    let left = HandTrack {
        end_state: left_seg.trajectory.final_state(),
        segments: vec![left_seg],
        last_release: left_inputs.released,
        warm: Some(left_plan.trajectory.flat_jerks()),
    };
    let right = HandTrack {
        segments: Vec::new(),
        end_state: state_after_release(-2, Some(height), timing, geometry)?,
        last_release: nominal_release(-2, height, timing, geometry)?,
        warm: Some(left_plan.trajectory.flat_jerks()),
    };

    // balls thrown on beats -b ..= -2 are airborne (the last one just released)
    for (id, j) in (-(b as i64)..=-2).enumerate() {
        let flight = nominal_flight(j, height, id, timing, geometry, 0.0)?;
        let (p, v) = flight.state_at(start_time, &g);
        balls.push(BallState { position: p, velocity: v });
        status.push(BallStatus::Flight { landing_beat: j + b as i64 });
        thrown_beat.push(j);
        landing.insert(j + b as i64, id);
    }
    let held = balls.len();
    balls.push(BallState { position: left_pose.position, velocity: left_pose.velocity });
    status.push(BallStatus::Held { hand: Hand::Left, release_beat: -1 });
    thrown_beat.push(-1 - b as i64);
    throws.insert(-1, (held, height));
    landing.insert(-1 + b as i64, held);
    Ok(InitialWorld { start_time, balls, status, thrown_beat, hands: [right, left], landing, throws })
}

struct Runner<'a> {
    config: &'a EpisodeConfig,
    source: &'a ThrowSource,
    world: InitialWorld,
    stats: EpisodeStats,
    trace: Option<String>,
    near: Vec<bool>,
}

/// Juggles `source` from the ground state until the target catch count, the
/// first drop, or the end of the throw sequence.
pub fn run_episode(source: &ThrowSource, config: &EpisodeConfig) -> Result<EpisodeStats, EpisodeError> {
    config.contact.validate(config.ball.mass)?;
    let world = initialize_from_ground_state(source.balls, config)?;
    let n = world.balls.len();
    let mut runner = Runner {
        config,
        source,
        world,
        stats: EpisodeStats::default(),
        trace: (config.trace_decimation > 0).then(String::new),
        near: vec![false; n * n],
    };
    runner.run()?;
    let mut stats = runner.stats;
    stats.trace_jsonl = runner.trace;
    Ok(stats)
}

impl Runner<'_> {
    fn run(&mut self) -> Result<(), EpisodeError> {
        let timing = self.config.timing;
        let h = self.config.contact.step;
        let steps_per_beat = (timing.beat_time() / h).round() as i64;
        let mut beat = -2i64;
        loop {
            if self.source.at(beat + 2).is_none() {
                return Ok(());
            }
            self.release(beat);
            self.plan(beat)?;
            if self.finished() {
                return Ok(());
            }
            let t_beat = beat_time(&timing, beat);
            for s in 0..steps_per_beat {
                let t = t_beat + s as f64 * h;
                self.step(t, s)?;
                if self.finished() {
                    return Ok(());
                }
            }
            self.stats.beats += 1;
            beat += 1;
        }
    }

    fn finished(&self) -> bool {
        !self.stats.drops.is_empty() || self.stats.catches >= self.config.target_catches
    }

    fn drop_ball(&mut self, t: f64, ball: usize, cause: DropCause, hand: Hand) {
        self.world.status[ball] = BallStatus::Lost;
        self.stats.drops.push(DropEvent { time: t, ball, cause });
        self.stats.events.push(EpisodeEvent { t, kind: EventKind::Drop(cause), ball, hand, detail: String::new() });
    }

    // Hands let go of the ball thrown on `beat`.
    fn release(&mut self, beat: i64) {
        if let Some((ball, height)) = self.world.throws.remove(&beat) {
            if let BallStatus::Held { .. } = self.world.status[ball] {
                self.world.status[ball] = BallStatus::Flight { landing_beat: beat + height.0 as i64 };
                self.world.thrown_beat[ball] = beat;
                self.stats.events.push(EpisodeEvent {
                    t: beat_time(&self.config.timing, beat),
                    kind: EventKind::Throw,
                    ball,
                    hand: Hand::for_beat(beat),
                    detail: format!("height {}", height.0),
                });
            }
        }
    }

    // Plans the cycle of `beat`'s hand that ends with the throw on `beat + 2`.
    fn plan(&mut self, beat: i64) -> Result<(), EpisodeError> {
        let config = self.config;
        let timing = &config.timing;
        let geometry = &config.geometry;
        let g = geometry.gravity();
        let end_beat = beat + 2;
        let hand = Hand::for_beat(beat);
        let t0 = beat_time(timing, beat);
        let target = self.source.at(end_beat).expect("checked by caller");
        let incoming_ball = self.world.landing.remove(&end_beat);
        match (incoming_ball, target.0) {
            (Some(_), 0) | (None, 1..) => {
                return Err(EpisodeError::InvalidSequence {
                    beat: end_beat,
                    detail: format!(
                        "throw {} with {} ball",
                        target.0,
                        if incoming_ball.is_some() { "a" } else { "no" }
                    ),
                });
            }
            _ => {}
        }
        if let Some(ball) = incoming_ball {
            self.world.landing.insert(end_beat + target.0 as i64, ball);
            self.world.throws.insert(end_beat, (ball, target));
        }

        let incoming = match incoming_ball {
            None => Incoming::None,
            Some(ball) => match self.world.status[ball] {
                BallStatus::Held { .. } => Incoming::Held,
                BallStatus::Lost => return Ok(()),
                BallStatus::Flight { .. } => {
                    let c = ThrowHeight((end_beat - self.world.thrown_beat[ball]) as u8);
                    let nominal = geometry.touchdown_position(hand);
                    if c.0 <= 2 {
                        // released this instant by this hand: use the nominal flight
                        crate::planner::nominal_incoming(end_beat, c, timing, geometry)?
                    } else {
                        let s = self.world.balls[ball];
                        match predict_touchdown(&s.position, &s.velocity, nominal.z, &g) {
                            Ok((dt, p, v)) => {
                                let err = ((p - nominal).xy()).norm();
                                self.stats.touchdown_errors.push((c.0, err));
                                Incoming::Flight(IncomingBall {
                                    touchdown_time: dt,
                                    touchdown_position: p,
                                    touchdown_velocity: v,
                                    height: c,
                                })
                            }
                            Err(_) => {
                                self.drop_ball(t0, ball, DropCause::Unplannable, hand);
                                return Ok(());
                            }
                        }
                    }
                }
            },
        };

        let track = &self.world.hands[hand.index()];
        let inputs = CycleInputs {
            t0,
            duration: timing.cycle_time,
            start: track.end_state,
            end: cycle_end(end_beat, target, timing, geometry)?,
            incoming,
            released: track.last_release,
            gravity: g,
        };
        let spec = match CycleSpec::build(inputs, &config.cycle) {
            Ok(spec) => spec,
            Err(_) => {
                let ball = incoming_ball.expect("nominal cycles always build");
                self.drop_ball(t0, ball, DropCause::Unplannable, hand);
                return Ok(());
            }
        };
        let started = Instant::now();
        let mut planned = plan_cycle(&spec, track.warm.as_deref(), &config.solver)?;
        if !planned.report.converged {
            let cold = plan_cycle(&spec, None, &config.solver)?;
            if cold.report.converged || cold.report.max_inequality_violation < planned.report.max_inequality_violation {
                planned = cold;
            }
        }
        self.stats.solve_times.push(started.elapsed().as_secs_f64());
        if !planned.report.converged {
            self.stats.unconverged_solves += 1;
        }
        for s in planned.trajectory.step_states() {
            self.stats.peak_hand_speed = self.stats.peak_hand_speed.max(s.velocity.norm());
            self.stats.peak_hand_acceleration = self.stats.peak_hand_acceleration.max(s.acceleration.norm());
        }
        let track = &mut self.world.hands[hand.index()];
        track.warm = Some(planned.trajectory.flat_jerks());
        track.last_release = match spec.end {
            crate::optimizer::CycleEnd::Throw { velocity, .. } => Some(velocity),
            crate::optimizer::CycleEnd::Rest { .. } => None,
        };
        track.push(Segment::new(planned.trajectory, spec.normals));
        Ok(())
    }

    fn step(&mut self, t: f64, step_index: i64) -> Result<(), EpisodeError> {
        let config = self.config;
        let poses = [self.world.hands[0].pose(Hand::Right, t)?, self.world.hands[1].pose(Hand::Left, t)?];
        let g = config.geometry.gravity();
        let t_next = t + config.contact.step;
        let catch_z = config.geometry.touchdown[0][2].min(config.geometry.touchdown[1][2]);
        let half_dwell = 0.5 * config.timing.dwell_time();

        if let Some(trace) = &mut self.trace {
            if step_index % config.trace_decimation as i64 == 0 {
                trace_frame(trace, t, &self.world.balls, &self.world.status, &poses);
            }
        }

        for b in 0..self.world.balls.len() {
            if self.world.status[b] == BallStatus::Lost {
                continue;
            }
            let (next, _) = step_ball(&config.contact, &config.hand, &config.ball, &self.world.balls[b], &poses, &g);
            if !next.position.iter().chain(next.velocity.iter()).all(|v| v.is_finite()) {
                return Err(SimError::NonFinite { ball: b, t }.into());
            }
            self.world.balls[b] = next;
            match self.world.status[b] {
                BallStatus::Flight { landing_beat } => {
                    let hand = Hand::for_beat(landing_beat);
                    let t_td = beat_time(&config.timing, landing_beat) - config.timing.dwell_time();
                    if next.position.z < catch_z - config.fall_margin {
                        self.drop_ball(t_next, b, DropCause::Fell, hand);
                    } else if t_next >= t_td - half_dwell {
                        let pose = poses[hand.index()];
                        let c = cone_coordinates(&config.hand, &config.ball, &pose, &next.position);
                        let rel = (next.velocity - pose.surface_velocity(&next.position)).norm();
                        let inside = c.axial >= 0.0 && c.axial <= config.hand.depth();
                        if inside
                            && c.radial < config.catch_radius_ratio * config.hand.mouth_radius
                            && rel < config.catch_speed
                        {
                            self.world.status[b] = BallStatus::Held { hand, release_beat: landing_beat };
                            self.stats.catches += 1;
                            self.stats.events.push(EpisodeEvent {
                                t: t_next,
                                kind: EventKind::Catch,
                                ball: b,
                                hand,
                                detail: format!("{:.4}", t_next - t_td),
                            });
                        } else if t_next > t_td + half_dwell {
                            self.drop_ball(t_next, b, DropCause::Missed, hand);
                        }
                    }
                }
                BallStatus::Held { hand, .. } => {
                    let pose = poses[hand.index()];
                    let c = cone_coordinates(&config.hand, &config.ball, &pose, &next.position);
                    // a ball hovering above the mouth may still settle back in
                    let escaped = c.axial > config.hand.depth() + config.escape_height;
                    if escaped || c.radial > config.hand.mouth_radius || c.axial < -config.ball.radius {
                        self.drop_ball(t_next, b, DropCause::RolledOut, hand);
                    }
                }
                BallStatus::Lost => {}
            }
        }

        if step_index % 10 == 0 {
            self.check_proximity();
        }
        Ok(())
    }

    fn check_proximity(&mut self) {
        let n = self.world.balls.len();
        let d = 2.0 * self.config.ball.radius;
        for i in 0..n {
            for j in i + 1..n {
                let close = (self.world.balls[i].position - self.world.balls[j].position).norm() < d;
                let was = &mut self.near[i * n + j];
                if close && !*was {
                    self.stats.ball_proximity_events += 1;
                }
                *was = close;
            }
        }
    }
}

fn trace_frame(out: &mut String, t: f64, balls: &[BallState], status: &[BallStatus], poses: &[HandPose; 2]) {
    let arr = |v: &Vec3| [v.x, v.y, v.z];
    let balls: Vec<_> = balls
        .iter()
        .zip(status)
        .enumerate()
        .map(|(id, (b, s))| serde_json::json!({"id": id, "p": arr(&b.position), "v": arr(&b.velocity), "status": s}))
        .collect();
    let hands: Vec<_> =
        poses.iter().map(|p| serde_json::json!({"p": arr(&p.position), "n_hat": arr(&p.normal)})).collect();
    let frame = serde_json::json!({"t": t, "balls": balls, "hands": hands, "events": []});
    out.push_str(&frame.to_string());
    out.push('\n');
}
