//! Vanilla siteswap notation, juggling states and the siteswap graph.
//!
//! A state is a bit vector over the next `width` beats; bit `i` is set when a
//! ball is scheduled to land `i + 1` beats from now (bit 0 is the ball the
//! current hand must throw). Throwing an `a` shifts the vector by one beat and
//! sets bit `a - 1`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest throw height (and state width) supported.
pub const MAX_HEIGHT: u8 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SiteswapError {
    #[error("empty pattern")]
    Empty,
    #[error("invalid character {0:?} in pattern")]
    InvalidCharacter(char),
    #[error("throw height {0} is not allowed")]
    ForbiddenHeight(u8),
    #[error("throw height {height} exceeds the maximum height {max}")]
    HeightTooLarge { height: u8, max: u8 },
    #[error("throw sum {sum} is not divisible by the period {period}")]
    NonIntegerAverage { sum: u32, period: usize },
    #[error("throws at beats {0} and {1} land on the same beat")]
    CollisionAtBeat(usize, usize),
    #[error("throw {0} lands on an occupied slot")]
    SlotOccupied(u8),
    #[error("throw {0} requested but the hand is empty")]
    EmptyHandThrow(u8),
    #[error("0-throw requested but the hand holds a ball")]
    HeldBallIdle,
    #[error("pattern needs {pattern} balls, graph has {graph}")]
    BallCountMismatch { pattern: u32, graph: u32 },
    #[error("invalid graph parameters: height {height}, balls {balls}")]
    InvalidGraph { height: u8, balls: u32 },
    #[error("no path between the requested states")]
    Unreachable,
}

/// Number of beats until a thrown ball is thrown again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThrowHeight(pub u8);

impl ThrowHeight {
    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_idle(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for ThrowHeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Formats a throw sequence in siteswap notation, e.g. `"423"`.
pub fn format_throws(throws: &[ThrowHeight]) -> String {
    throws.iter().map(|t| t.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SiteswapPattern {
    throws: Vec<ThrowHeight>,
}

impl SiteswapPattern {
    pub fn throws(&self) -> &[ThrowHeight] {
        &self.throws
    }

    pub fn period(&self) -> usize {
        self.throws.len()
    }

    pub fn ball_count(&self) -> u32 {
        self.throws.iter().map(|t| t.0 as u32).sum::<u32>() / self.period() as u32
    }

    pub fn max_height(&self) -> u8 {
        self.throws.iter().map(|t| t.0).max().unwrap_or(0)
    }

    /// State before the throw at phase 0 when the pattern has been running forever.
    pub fn entry_state(&self, width: u8) -> SiteswapState {
        let p = self.period() as i64;
        let mut bits = 0u16;
        for k in -(MAX_HEIGHT as i64 + 1) * p..0 {
            let t = self.throws[k.rem_euclid(p) as usize].0 as i64;
            let land = k + t;
            if t > 0 && land >= 0 {
                bits |= 1 << land;
            }
        }
        SiteswapState::from_bits(bits, width)
    }

    /// States traversed by one period of the pattern; `states[i]` precedes `throws[i]`.
    pub fn loop_states(&self, width: u8) -> Vec<SiteswapState> {
        let mut s = self.entry_state(width);
        let mut out = Vec::with_capacity(self.period());
        for &t in &self.throws {
            out.push(s);
            s = step_state(s, t).expect("valid pattern replays on its own loop");
        }
        out
    }

    /// Pattern started at phase `phase`.
    pub fn rotated(&self, phase: usize) -> SiteswapPattern {
        let mut throws = self.throws.clone();
        throws.rotate_left(phase % self.period());
        SiteswapPattern { throws }
    }
}

impl fmt::Display for SiteswapPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_throws(&self.throws))
    }
}

impl std::str::FromStr for SiteswapPattern {
    type Err = SiteswapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_pattern(s)
    }
}

/// Parses a vanilla siteswap digit string such as `"423"`.
///
/// 1-throws are rejected since they need a non-positive flight time at the
/// supported dwell ratios.
pub fn parse_pattern(text: &str) -> Result<SiteswapPattern, SiteswapError> {
    if text.is_empty() {
        return Err(SiteswapError::Empty);
    }
    let mut throws = Vec::with_capacity(text.len());
    for c in text.chars() {
        let d = c.to_digit(10).ok_or(SiteswapError::InvalidCharacter(c))? as u8;
        if d == 1 {
            return Err(SiteswapError::ForbiddenHeight(1));
        }
        throws.push(ThrowHeight(d));
    }
    let period = throws.len();
    let mut landed_by: Vec<Option<usize>> = vec![None; period];
    for (i, t) in throws.iter().enumerate() {
        let slot = (i + t.0 as usize) % period;
        if let Some(j) = landed_by[slot] {
            return Err(SiteswapError::CollisionAtBeat(j, i));
        }
        landed_by[slot] = Some(i);
    }
    // Unreachable for collision-free sequences, kept as a contract check.
    let sum: u32 = throws.iter().map(|t| t.0 as u32).sum();
    if !sum.is_multiple_of(period as u32) {
        return Err(SiteswapError::NonIntegerAverage { sum, period });
    }
    Ok(SiteswapPattern { throws })
}

/// Juggling state: landing schedule of the next `width` beats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteswapState {
    bits: u16,
    width: u8,
}

impl SiteswapState {
    pub fn from_bits(bits: u16, width: u8) -> Self {
        debug_assert!(width <= 16);
        let mask = if width >= 16 { u16::MAX } else { (1u16 << width) - 1 };
        Self { bits: bits & mask, width }
    }

    /// Parses `"1101"` style vectors, bit 0 first.
    pub fn from_vector(v: &[u8]) -> Self {
        let bits = v.iter().enumerate().fold(0u16, |acc, (i, &b)| if b != 0 { acc | (1 << i) } else { acc });
        Self::from_bits(bits, v.len() as u8)
    }

    pub fn ground(balls: u32, width: u8) -> Self {
        Self::from_bits(((1u32 << balls) - 1) as u16, width)
    }

    pub fn bits(self) -> u16 {
        self.bits
    }

    pub fn width(self) -> u8 {
        self.width
    }

    pub fn ball_count(self) -> u32 {
        self.bits.count_ones()
    }

    /// Whether a ball lands `beats_ahead + 1` beats from now.
    pub fn is_set(self, beats_ahead: u8) -> bool {
        self.bits >> beats_ahead & 1 == 1
    }

    pub fn is_ground(self) -> bool {
        self == Self::ground(self.ball_count(), self.width)
    }

    pub fn to_vector(self) -> Vec<u8> {
        (0..self.width).map(|i| self.is_set(i) as u8).collect()
    }
}

impl fmt::Display for SiteswapState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.width {
            f.write_str(if self.is_set(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Applies one throw to a state.
pub fn step_state(s: SiteswapState, t: ThrowHeight) -> Result<SiteswapState, SiteswapError> {
    let holding = s.is_set(0);
    let shifted = s.bits >> 1;
    if t.0 == 0 {
        if holding {
            return Err(SiteswapError::HeldBallIdle);
        }
        return Ok(SiteswapState::from_bits(shifted, s.width));
    }
    if !holding {
        return Err(SiteswapError::EmptyHandThrow(t.0));
    }
    if t.0 > s.width {
        return Err(SiteswapError::HeightTooLarge { height: t.0, max: s.width });
    }
    let target = 1u16 << (t.0 - 1);
    if shifted & target != 0 {
        return Err(SiteswapError::SlotOccupied(t.0));
    }
    Ok(SiteswapState::from_bits(shifted | target, s.width))
}

/// Replays a throw sequence, returning every visited state (including `start`).
pub fn replay(start: SiteswapState, throws: &[ThrowHeight]) -> Result<Vec<SiteswapState>, SiteswapError> {
    let mut states = Vec::with_capacity(throws.len() + 1);
    let mut s = start;
    states.push(s);
    for &t in throws {
        s = step_state(s, t)?;
        states.push(s);
    }
    Ok(states)
}

/// Directed graph over all states of a fixed width and ball count.
#[derive(Debug, Clone)]
pub struct SiteswapGraph {
    height: u8,
    balls: u32,
    alphabet: Vec<ThrowHeight>,
    weights: [u32; MAX_HEIGHT as usize + 1],
    states: Vec<SiteswapState>,
    index: HashMap<SiteswapState, usize>,
    out_edges: Vec<Vec<(ThrowHeight, usize)>>,
}

/// Throw heights `{0, 2, ..., max}`, optionally including 1.
pub fn default_alphabet(max: u8, include_one: bool) -> Vec<ThrowHeight> {
    (0..=max).filter(|&h| include_one || h != 1).map(ThrowHeight).collect()
}

impl SiteswapGraph {
    pub fn height(&self) -> u8 {
        self.height
    }

    pub fn balls(&self) -> u32 {
        self.balls
    }

    pub fn alphabet(&self) -> &[ThrowHeight] {
        &self.alphabet
    }

    pub fn states(&self) -> &[SiteswapState] {
        &self.states
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn ground(&self) -> SiteswapState {
        SiteswapState::ground(self.balls, self.height)
    }

    pub fn contains(&self, s: SiteswapState) -> bool {
        self.index.contains_key(&s)
    }

    /// Legal throws from `s` with their successor states, ordered by height.
    pub fn successors(&self, s: SiteswapState) -> impl Iterator<Item = (ThrowHeight, SiteswapState)> + '_ {
        let idx = self.index.get(&s).copied();
        idx.into_iter().flat_map(move |i| self.out_edges[i].iter().map(move |&(t, j)| (t, self.states[j])))
    }

    /// Sets the path cost of throws of height `h` (default 1).
    pub fn set_weight(&mut self, h: ThrowHeight, weight: u32) {
        self.weights[h.0 as usize] = weight;
    }

    pub fn weight(&self, h: ThrowHeight) -> u32 {
        self.weights[h.0 as usize]
    }

    /// Text adjacency listing, one `state throw -> state` line per edge.
    pub fn export_adjacency(&self) -> String {
        let mut out = String::new();
        for (i, edges) in self.out_edges.iter().enumerate() {
            for &(t, j) in edges {
                out.push_str(&format!("{} {} -> {}\n", self.states[i], t, self.states[j]));
            }
        }
        out
    }

    fn check_pattern(&self, p: &SiteswapPattern) -> Result<(), SiteswapError> {
        if p.ball_count() != self.balls {
            return Err(SiteswapError::BallCountMismatch { pattern: p.ball_count(), graph: self.balls });
        }
        for &t in p.throws() {
            if !self.alphabet.contains(&t) {
                return if t.0 > self.height {
                    Err(SiteswapError::HeightTooLarge { height: t.0, max: self.height })
                } else {
                    Err(SiteswapError::ForbiddenHeight(t.0))
                };
            }
        }
        Ok(())
    }

    /// Least-cost path from any source to any target state.
    ///
    /// Ties between equal-cost paths go to the lexicographically smallest
    /// throw sequence, then to the smallest source state.
    pub fn shortest_path(&self, sources: &[SiteswapState], targets: &[SiteswapState]) -> Result<Path, SiteswapError> {
        let is_target: Vec<bool> = {
            let mut v = vec![false; self.states.len()];
            for t in targets {
                if let Some(&i) = self.index.get(t) {
                    v[i] = true;
                }
            }
            v
        };
        let mut heap = BinaryHeap::new();
        for s in sources {
            if let Some(&i) = self.index.get(s) {
                heap.push(Reverse((0u64, Vec::<u8>::new(), s.bits, i, i)));
            }
        }
        let mut settled = vec![false; self.states.len()];
        while let Some(Reverse((cost, seq, _, node, origin))) = heap.pop() {
            if settled[node] {
                continue;
            }
            settled[node] = true;
            if is_target[node] {
                return Ok(Path {
                    throws: seq.into_iter().map(ThrowHeight).collect(),
                    start: self.states[origin],
                    end: self.states[node],
                    cost,
                });
            }
            for &(t, next) in &self.out_edges[node] {
                if settled[next] {
                    continue;
                }
                let mut s2 = seq.clone();
                s2.push(t.0);
                let c2 = cost + self.weights[t.0 as usize] as u64;
                heap.push(Reverse((c2, s2, self.states[origin].bits, next, origin)));
            }
        }
        Err(SiteswapError::Unreachable)
    }
}

/// A throw sequence connecting two states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub throws: Vec<ThrowHeight>,
    pub start: SiteswapState,
    pub end: SiteswapState,
    pub cost: u64,
}

/// Builds the graph of all `balls`-ball states up to `height` over the default alphabet.
pub fn build_graph(height: u8, balls: u32) -> Result<SiteswapGraph, SiteswapError> {
    build_graph_with(height, balls, default_alphabet(height, false))
}

pub fn build_graph_with(height: u8, balls: u32, alphabet: Vec<ThrowHeight>) -> Result<SiteswapGraph, SiteswapError> {
    if balls == 0 || height == 0 || balls > height as u32 || height > MAX_HEIGHT {
        return Err(SiteswapError::InvalidGraph { height, balls });
    }
    let states: Vec<SiteswapState> = (0u16..(1u16 << height))
        .filter(|b| b.count_ones() == balls)
        .map(|b| SiteswapState::from_bits(b, height))
        .collect();
    let index: HashMap<_, _> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let out_edges = states
        .iter()
        .map(|&s| alphabet.iter().filter_map(|&t| step_state(s, t).ok().map(|n| (t, index[&n]))).collect())
        .collect();
    Ok(SiteswapGraph { height, balls, alphabet, weights: [1; MAX_HEIGHT as usize + 1], states, index, out_edges })
}

/// Entry into a pattern loop: throws to perform, then the pattern from `phase` on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryPlan {
    pub throws: Vec<ThrowHeight>,
    pub phase: usize,
}

fn phase_of(pattern: &SiteswapPattern, width: u8, s: SiteswapState) -> usize {
    pattern.loop_states(width).iter().position(|&x| x == s).expect("path ends on the pattern loop")
}

/// Shortest throw sequence from the ground state onto the pattern's loop.
pub fn plan_entry(graph: &SiteswapGraph, target: &SiteswapPattern) -> Result<EntryPlan, SiteswapError> {
    graph.check_pattern(target)?;
    let targets = target.loop_states(graph.height);
    let path = graph.shortest_path(&[graph.ground()], &targets)?;
    Ok(EntryPlan { phase: phase_of(target, graph.height, path.end), throws: path.throws })
}

/// Connection from one pattern loop to another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionPlan {
    /// Phase of `from` at which the transition departs.
    pub depart_phase: usize,
    pub throws: Vec<ThrowHeight>,
    /// Phase of `to` at which the transition arrives.
    pub arrive_phase: usize,
}

pub fn plan_transition(
    graph: &SiteswapGraph,
    from: &SiteswapPattern,
    to: &SiteswapPattern,
) -> Result<TransitionPlan, SiteswapError> {
    if from.ball_count() != to.ball_count() {
        return Err(SiteswapError::BallCountMismatch { pattern: to.ball_count(), graph: from.ball_count() });
    }
    graph.check_pattern(from)?;
    graph.check_pattern(to)?;
    let sources = from.loop_states(graph.height);
    let targets = to.loop_states(graph.height);
    let path = graph.shortest_path(&sources, &targets)?;
    Ok(TransitionPlan {
        depart_phase: phase_of(from, graph.height, path.start),
        throws: path.throws,
        arrive_phase: phase_of(to, graph.height, path.end),
    })
}

/// Uniform random walk over the legal throws; identical seeds give identical walks.
pub fn random_walk(graph: &SiteswapGraph, start: SiteswapState, n: usize, seed: u64) -> Vec<ThrowHeight> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = start;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let options: Vec<_> = graph.successors(s).collect();
        if options.is_empty() {
            break;
        }
        let (t, next) = options[rng.random_range(0..options.len())];
        out.push(t);
        s = next;
    }
    out
}
