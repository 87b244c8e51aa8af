//! Experiment drivers: pattern and transition stability, random walks with
//! coverage, ablations and throw accuracy.
//!
//! Every report embeds the resolved [`ExperimentConfig`] so that its output
//! files describe how they were produced. Seeds run in parallel on a rayon pool
//! sized by `JUGGLE_WORKERS` (default: all cores); results are collected in seed
//! order, so reports do not depend on the worker count.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::simulator::{run_episode, DropEvent, EpisodeConfig, EpisodeError, EpisodeStats, ThrowSource};
use crate::siteswap::{
    build_graph, parse_pattern, plan_entry, plan_transition, random_walk, SiteswapError, SiteswapGraph,
    SiteswapPattern, SiteswapState, ThrowHeight, MAX_HEIGHT,
};

/// Environment variable holding the worker thread count.
pub const WORKERS_VAR: &str = "JUGGLE_WORKERS";

/// Reference stability table: patterns with their ball counts; `true`
/// marks patterns that are also stable without the contact constraints.
#[rustfmt::skip]
pub const TABLE_PATTERNS: &[(u32, &str, bool)] = &[
    (3, "3", true), (3, "42", false), (3, "423", false), (3, "504", false), (3, "522", false),
    (3, "603", false), (3, "630", false), (3, "720", false), (3, "900", false), (3, "5304", false),
    (3, "5340", false), (3, "5520", false), (3, "6024", false), (3, "6330", false), (3, "7023", false),
    (3, "7302", false), (3, "8040", false), (3, "9300", false),
    (4, "4", false), (4, "53", false), (4, "62", false), (4, "80", false), (4, "534", false),
    (4, "552", false), (4, "633", false), (4, "642", false), (4, "660", false), (4, "723", false),
    (4, "750", false), (4, "804", false), (4, "822", false), (4, "903", false), (4, "930", false),
    (4, "5524", false), (4, "6055", false), (4, "7333", false),
    (5, "5", true), (5, "64", true), (5, "73", false), (5, "82", true), (5, "645", false),
    (5, "663", false), (5, "726", false), (5, "744", false), (5, "753", false), (5, "807", true),
    (5, "825", false), (5, "834", false), (5, "852", true), (5, "906", false), (5, "933", false),
    (5, "942", false), (5, "960", false),
    (6, "6", false), (6, "75", false), (6, "84", false), (6, "93", false), (6, "756", false),
    (6, "774", false), (6, "783", false), (6, "837", false), (6, "855", false), (6, "864", false),
    (6, "882", false), (6, "936", false), (6, "945", false), (6, "963", false), (6, "972", false),
    (6, "990", false), (6, "7773", false),
    (7, "7", true), (7, "86", true), (7, "95", false), (7, "867", true), (7, "885", true),
    (7, "948", false), (7, "966", false), (7, "975", false), (7, "993", false), (7, "8884", false),
    (7, "9388", false), (7, "9568", false), (7, "9685", false), (7, "9748", false), (7, "9784", false),
    (7, "9955", false),
    (8, "8", false), (8, "97", false), (8, "978", false), (8, "996", false), (8, "9995", false),
    (8, "9968", false), (8, "99697", false), (8, "99994", false),
    (9, "9", false),
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Siteswap(#[from] SiteswapError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("invalid {WORKERS_VAR}: {0}")]
    Workers(String),
}

/// Runs `f` on a pool sized by [`WORKERS_VAR`], or on the global pool when unset.
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    match std::env::var(WORKERS_VAR) {
        Err(_) => Ok(f()),
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| HarnessError::Workers(v.clone()))?;
            if n == 0 {
                return Err(HarnessError::Workers(v));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Workers(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub pattern: String,
    pub valid: bool,
    pub balls: Option<u32>,
    /// Mean throw height; `None` when the text is not a digit string.
    pub average: Option<f64>,
    pub error: Option<String>,
}

impl fmt::Display for ValidateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.balls, &self.error) {
            (Some(b), _) => write!(f, "{}: valid, {b} balls", self.pattern),
            (None, Some(e)) => {
                write!(f, "{}: invalid ({e})", self.pattern)?;
                if let Some(avg) = self.average {
                    write!(f, ", average {avg}")?;
                }
                Ok(())
            }
            (None, None) => write!(f, "{}: invalid", self.pattern),
        }
    }
}

pub fn validate(text: &str) -> ValidateReport {
    let digits: Option<Vec<u32>> = text.chars().map(|c| c.to_digit(10)).collect();
    let average = digits.filter(|d| !d.is_empty()).map(|d| d.iter().sum::<u32>() as f64 / d.len() as f64);
    match parse_pattern(text) {
        Ok(p) => {
            ValidateReport { pattern: text.into(), valid: true, balls: Some(p.ball_count()), average, error: None }
        }
        Err(e) => {
            ValidateReport { pattern: text.into(), valid: false, balls: None, average, error: Some(e.to_string()) }
        }
    }
}

/// Throw heights of a juggling sequence: `prefix`, then `pattern` from `phase` on, repeated.
fn loop_throws(pattern: &SiteswapPattern, phase: usize, periods: usize) -> Vec<ThrowHeight> {
    let rotated = pattern.rotated(phase);
    rotated.throws().iter().copied().cycle().take(periods * pattern.period()).collect()
}

/// Catches an episode of `throws` can produce: one per nonzero throw.
fn catch_capacity(throws: &[ThrowHeight]) -> usize {
    throws.iter().filter(|t| t.0 > 0).count()
}

fn episode_config(config: &ExperimentConfig, target: usize) -> EpisodeConfig {
    EpisodeConfig { target_catches: target, ..config.episode }
}

/// Episode outcome without the bulky per-event data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub catches: usize,
    pub succeeded: bool,
    pub first_drop: Option<DropEvent>,
    pub beats: usize,
    pub peak_hand_speed: f64,
    pub peak_hand_acceleration: f64,
    pub median_solve_ms: f64,
    pub unconverged_solves: usize,
    pub ball_proximity_events: usize,
}

impl EpisodeSummary {
    pub fn new(stats: &EpisodeStats, target: usize) -> Self {
        Self {
            catches: stats.catches,
            succeeded: stats.succeeded(target),
            first_drop: stats.drops.first().copied(),
            beats: stats.beats,
            peak_hand_speed: stats.peak_hand_speed,
            peak_hand_acceleration: stats.peak_hand_acceleration,
            median_solve_ms: 1e3 * median(&stats.solve_times).unwrap_or(0.0),
            unconverged_solves: stats.unconverged_solves,
            ball_proximity_events: stats.ball_proximity_events,
        }
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Nearest-rank percentile, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

fn graph_for(config: &ExperimentConfig, balls: u32) -> Result<SiteswapGraph, HarnessError> {
    Ok(build_graph(config.experiment.max_height.max(balls as u8).min(MAX_HEIGHT), balls)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternReport {
    pub config: ExperimentConfig,
    pub pattern: String,
    pub balls: u32,
    pub entry: String,
    pub summary: EpisodeSummary,
    #[serde(skip)]
    pub stats: EpisodeStats,
}

/// Juggles `pattern` from the ground state until the target catch count or the first drop.
pub fn run_pattern(pattern: &SiteswapPattern, config: &ExperimentConfig) -> Result<PatternReport, HarnessError> {
    let target = config.experiment.catches;
    let graph = graph_for(config, pattern.ball_count())?;
    let entry = plan_entry(&graph, pattern)?;
    let mut throws = entry.throws.clone();
    while catch_capacity(&throws) < target + 2 * pattern.ball_count() as usize + 4 {
        throws.extend(loop_throws(pattern, entry.phase, 1));
    }
    let stats =
        run_episode(&ThrowSource { balls: pattern.ball_count() as usize, throws }, &episode_config(config, target))?;
    Ok(PatternReport {
        config: *config,
        pattern: pattern.to_string(),
        balls: pattern.ball_count(),
        entry: crate::siteswap::format_throws(&entry.throws),
        summary: EpisodeSummary::new(&stats, target),
        stats,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionReport {
    pub config: ExperimentConfig,
    pub from: String,
    pub to: String,
    /// Throws leaving `from` for `to`, and back.
    pub forward: String,
    pub backward: String,
    pub transitions: usize,
    pub summary: EpisodeSummary,
    #[serde(skip)]
    pub stats: EpisodeStats,
}

/// Alternates between two patterns of equal ball count, `segment_periods` full
/// periods of each between transitions, until the target catch count.
pub fn run_transition(
    a: &SiteswapPattern,
    b: &SiteswapPattern,
    config: &ExperimentConfig,
) -> Result<TransitionReport, HarnessError> {
    if a.ball_count() != b.ball_count() {
        return Err(SiteswapError::BallCountMismatch { pattern: b.ball_count(), graph: a.ball_count() }.into());
    }
    let target = config.experiment.catches;
    let graph = graph_for(config, a.ball_count())?;
    let entry = plan_entry(&graph, a)?;
    let there = plan_transition(&graph, a, b)?;
    let back = plan_transition(&graph, b, a)?;
    let periods = config.experiment.segment_periods;

    let mut throws = entry.throws.clone();
    let mut phase = entry.phase;
    let mut transitions = 0;
    let mut on_a = true;
    while catch_capacity(&throws) < target + 2 * a.ball_count() as usize + 4 {
        let (current, leg) = if on_a { (a, &there) } else { (b, &back) };
        throws.extend(loop_throws(current, phase, periods));
        if a == b {
            continue;
        }
        // finish the period up to the departure phase, then cross over
        let p = current.period();
        let lead = (leg.depart_phase + p - phase) % p;
        throws.extend(loop_throws(current, phase, 1).into_iter().take(lead));
        throws.extend(leg.throws.iter().copied());
        phase = leg.arrive_phase;
        on_a = !on_a;
        transitions += 1;
    }
    let stats = run_episode(&ThrowSource { balls: a.ball_count() as usize, throws }, &episode_config(config, target))?;
    Ok(TransitionReport {
        config: *config,
        from: a.to_string(),
        to: b.to_string(),
        forward: crate::siteswap::format_throws(&there.throws),
        backward: crate::siteswap::format_throws(&back.throws),
        transitions,
        summary: EpisodeSummary::new(&stats, target),
        stats,
    })
}

/// Ordered pairs of distinct, equal-ball patterns whose loops share no state,
/// so that moving between them needs transition throws.
pub fn nontrivial_pairs(patterns: &[SiteswapPattern], height: u8) -> Vec<(SiteswapPattern, SiteswapPattern)> {
    let loops: Vec<Vec<SiteswapState>> = patterns.iter().map(|p| p.loop_states(height)).collect();
    let mut out = Vec::new();
    for (i, a) in patterns.iter().enumerate() {
        for (j, b) in patterns.iter().enumerate() {
            if i != j && a.ball_count() == b.ball_count() && loops[i].iter().all(|s| !loops[j].contains(s)) {
                out.push((a.clone(), b.clone()));
            }
        }
    }
    out
}

/// (previous throw of the same hand, incoming ball height, target throw).
pub type Triple = (u8, u8, u8);

/// Throw counts by (previous throw of the same hand, incoming ball height, target throw).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageMatrix {
    pub counts: Vec<u64>,
}

const SIDE: usize = MAX_HEIGHT as usize + 1;

impl Default for CoverageMatrix {
    fn default() -> Self {
        Self { counts: vec![0; SIDE * SIDE * SIDE] }
    }
}

impl CoverageMatrix {
    fn index(previous: u8, incoming: u8, target: u8) -> usize {
        (previous as usize * SIDE + incoming as usize) * SIDE + target as usize
    }

    pub fn get(&self, previous: u8, incoming: u8, target: u8) -> u64 {
        self.counts[Self::index(previous, incoming, target)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &CoverageMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Records the first `executed` beats of a sequence started from the `balls`-ball ground state.
    pub fn record(&mut self, balls: u32, throws: &[ThrowHeight], executed: usize) {
        let b = balls as i64;
        let height_at = |beat: i64| -> u8 {
            if beat < 0 {
                balls as u8
            } else {
                throws[beat as usize].0
            }
        };
        // landing beat -> height of the throw landing there
        let mut landing = vec![0u8; throws.len() + SIDE];
        for beat in -b..0 {
            if beat + b >= 0 {
                landing[(beat + b) as usize] = balls as u8;
            }
        }
        for (i, t) in throws.iter().enumerate().take(executed) {
            let previous = height_at(i as i64 - 2);
            let incoming = landing[i];
            self.counts[Self::index(previous, incoming, t.0)] += 1;
            if t.0 > 0 {
                landing[i + t.0 as usize] = t.0;
            }
        }
    }

    /// Whether a triple can occur at all in a vanilla siteswap: a 2-throw is
    /// caught two beats later by the same hand, an empty hand throws nothing,
    /// the target may not land together with the previous throw, and 1-throws
    /// are excluded.
    pub fn structurally_possible(previous: u8, incoming: u8, target: u8) -> bool {
        let no_one = previous != 1 && incoming != 1 && target != 1;
        no_one
            && (previous == 2) == (incoming == 2)
            && (incoming == 0) == (target == 0)
            && target as i16 != previous as i16 - 2
    }

    /// Triples that contradict [`Self::structurally_possible`]: (possible but unseen, impossible but seen).
    pub fn structural_mismatches(&self, max_height: u8) -> (Vec<Triple>, Vec<Triple>) {
        let mut unseen = Vec::new();
        let mut impossible = Vec::new();
        for p in 0..SIDE as u8 {
            for c in 0..SIDE as u8 {
                for t in 0..SIDE as u8 {
                    let n = self.get(p, c, t);
                    let in_range = p <= max_height && c <= max_height && t <= max_height;
                    let possible = in_range && Self::structurally_possible(p, c, t);
                    if possible && n == 0 {
                        unseen.push((p, c, t));
                    } else if !possible && n > 0 {
                        impossible.push((p, c, t));
                    }
                }
            }
        }
        (unseen, impossible)
    }

    /// Long-format CSV with columns previous, incoming, target, count.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["previous", "incoming", "target", "count"]).expect("in-memory write");
        for p in 0..SIDE as u8 {
            for c in 0..SIDE as u8 {
                for t in 0..SIDE as u8 {
                    let n = self.get(p, c, t);
                    w.write_record([p.to_string(), c.to_string(), t.to_string(), n.to_string()])
                        .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// One block per incoming height: rows are previous throws, columns targets.
    /// Cells show a log-scaled shade, `.` for structural zeros and `!` for
    /// possible triples never seen.
    pub fn heatmap(&self, max_height: u8) -> String {
        const SHADES: &[u8] = b" -:=+*#%@";
        let heights: Vec<u8> = (0..=max_height).filter(|&h| h != 1).collect();
        let peak = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let mut out = String::new();
        for &c in &heights {
            let _ = writeln!(out, "incoming {c}");
            let _ = write!(out, "  prev\\target ");
            for &t in &heights {
                let _ = write!(out, "{t}");
            }
            out.push('\n');
            for &p in &heights {
                let _ = write!(out, "  {p:>11} ");
                for &t in &heights {
                    let n = self.get(p, c, t);
                    let ch = if !Self::structurally_possible(p, c, t) {
                        if n > 0 {
                            '?'
                        } else {
                            '.'
                        }
                    } else if n == 0 {
                        '!'
                    } else {
                        let level = ((n as f64).ln_1p() / peak.ln_1p() * (SHADES.len() - 2) as f64).round() as usize;
                        SHADES[(level + 1).min(SHADES.len() - 1)] as char
                    };
                    out.push(ch);
                }
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Consecutive catches until the first drop or the end of the walk.
    pub catches: usize,
    pub completed: bool,
    pub first_drop: Option<DropEvent>,
    pub median_solve_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedOutcome>,
    pub mean_catches: f64,
    pub median_catches: f64,
    pub drops: usize,
    #[serde(skip)]
    pub coverage: CoverageMatrix,
    /// Per-cycle solve times over all seeds (s).
    #[serde(skip)]
    pub solve_times: Vec<f64>,
}

/// Outcome, coverage and solve times of one walk seed.
type SeedRun = (SeedOutcome, CoverageMatrix, Vec<f64>);

/// Beats from 0 on that the episode played before stopping.
fn executed_beats(stats: &EpisodeStats, config: &EpisodeConfig, len: usize) -> usize {
    let played = stats.beats.saturating_sub(2);
    let until_drop = stats
        .drops
        .first()
        .map(|d| (d.time / config.timing.beat_time()).floor().max(0.0) as usize + 1)
        .unwrap_or(usize::MAX);
    played.min(until_drop).min(len)
}

/// Random walks on the `balls`-ball graph, one per seed, each run until its
/// first drop or the end of the walk.
pub fn run_walk(config: &ExperimentConfig) -> Result<WalkReport, HarnessError> {
    let x = &config.experiment;
    let graph = graph_for(config, x.balls)?;
    let episode = episode_config(config, usize::MAX);
    let seeds = x.seed_list();
    let runs: Vec<Result<SeedRun, HarnessError>> = with_workers(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let throws = random_walk(&graph, graph.ground(), x.walk_steps, seed);
                let stats = if throws.is_empty() {
                    EpisodeStats::default()
                } else {
                    run_episode(&ThrowSource { balls: x.balls as usize, throws: throws.clone() }, &episode)?
                };
                let mut coverage = CoverageMatrix::default();
                coverage.record(x.balls, &throws, executed_beats(&stats, &episode, throws.len()));
                let outcome = SeedOutcome {
                    seed,
                    catches: stats.catches,
                    completed: stats.drops.is_empty(),
                    first_drop: stats.drops.first().copied(),
                    median_solve_ms: 1e3 * median(&stats.solve_times).unwrap_or(0.0),
                };
                Ok((outcome, coverage, stats.solve_times))
            })
            .collect()
    })?;
    let mut coverage = CoverageMatrix::default();
    let mut outcomes = Vec::with_capacity(runs.len());
    let mut solve_times = Vec::new();
    for run in runs {
        let (outcome, c, times) = run?;
        coverage.merge(&c);
        solve_times.extend(times);
        outcomes.push(outcome);
    }
    let catches: Vec<f64> = outcomes.iter().map(|o| o.catches as f64).collect();
    Ok(WalkReport {
        config: *config,
        mean_catches: catches.iter().sum::<f64>() / catches.len().max(1) as f64,
        median_catches: median(&catches).unwrap_or(0.0),
        drops: outcomes.iter().filter(|o| !o.completed).count(),
        seeds: outcomes,
        coverage,
        solve_times,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeightAccuracy {
    pub height: u8,
    pub count: usize,
    /// Planar touchdown error (m).
    pub mean: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AccuracyReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub catches: usize,
    pub first_drop: Option<DropEvent>,
    pub heights: Vec<HeightAccuracy>,
}

impl AccuracyReport {
    pub fn mean_for(&self, height: u8) -> Option<f64> {
        self.heights.iter().find(|h| h.height == height).map(|h| h.mean)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["height", "count", "mean_m", "p95_m"]).expect("in-memory write");
        for h in &self.heights {
            w.write_record([
                h.height.to_string(),
                h.count.to_string(),
                format!("{:.6e}", h.mean),
                format!("{:.6e}", h.p95),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

/// Touchdown error by throw height over one random walk of `walk_steps` throws
/// (until its first drop). Heights below 3 are not measured: those balls never
/// leave the hand's neighborhood and are planned nominally.
pub fn run_accuracy(config: &ExperimentConfig, seed: u64) -> Result<AccuracyReport, HarnessError> {
    let x = &config.experiment;
    let graph = graph_for(config, x.balls)?;
    let throws = random_walk(&graph, graph.ground(), x.walk_steps, seed);
    let stats = if throws.is_empty() {
        EpisodeStats::default()
    } else {
        run_episode(&ThrowSource { balls: x.balls as usize, throws }, &episode_config(config, usize::MAX))?
    };
    let heights = (3..=MAX_HEIGHT)
        .filter_map(|h| {
            let errors: Vec<f64> = stats.touchdown_errors.iter().filter(|e| e.0 == h).map(|e| e.1).collect();
            (!errors.is_empty()).then(|| HeightAccuracy {
                height: h,
                count: errors.len(),
                mean: errors.iter().sum::<f64>() / errors.len() as f64,
                p95: percentile(&errors, 0.95).expect("non-empty"),
            })
        })
        .collect();
    Ok(AccuracyReport {
        config: *config,
        seed,
        catches: stats.catches,
        first_drop: stats.drops.first().copied(),
        heights,
    })
}
