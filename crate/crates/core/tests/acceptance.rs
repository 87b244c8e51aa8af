//! Acceptance suite: one PASS/FAIL line per criterion, checked against oracles
//! that are independent of the library code wherever one exists.
//!
//! Runs without the libtest harness so that every criterion reports even when
//! an earlier one fails; the process exits nonzero if any criterion fails.

use std::collections::{HashSet, VecDeque};
use std::time::Instant;

use juggle::ballistics::{nominal_flight, propagate, takeoff_velocity, HandGeometryConfig, TimingConfig};
use juggle::config::ExperimentConfig;
use juggle::harness::{median, run_accuracy, run_pattern, run_walk, CoverageMatrix, TABLE_PATTERNS};
use juggle::optimizer::*;
use juggle::planner::nominal_cycle;
use juggle::simulator::{cone_coordinates, step_ball, BallBody, BallState, ContactParams, HandBody, HandPose};
use juggle::siteswap::{build_graph, parse_pattern, plan_entry, plan_transition, SiteswapPattern, ThrowHeight};
use juggle::trajectory::Vec3;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- siteswap

/// Steady-state beat simulation of a repeated digit string.
fn oracle_valid(digits: &[u8]) -> Option<u32> {
    if digits.contains(&1) {
        return None;
    }
    let n = digits.len();
    let horizon = 40 * n;
    let mut landings = vec![0u32; horizon + 10];
    for beat in 0..horizon {
        let t = digits[beat % n] as usize;
        if t > 0 {
            landings[beat + t] += 1;
        }
    }
    // beats past the longest throw see every ball that can land on them
    for (beat, &count) in landings.iter().enumerate().take(horizon).skip(10) {
        let want = u32::from(digits[beat % n] > 0);
        if count != want {
            return None;
        }
    }
    Some(digits.iter().map(|&d| d as u32).sum::<u32>() / n as u32)
}

fn criterion_validity() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for len in 1..=4u32 {
        for code in 0..10u32.pow(len) {
            let text = format!("{code:0width$}", width = len as usize);
            let digits: Vec<u8> = text.bytes().map(|b| b - b'0').collect();
            let oracle = oracle_valid(&digits);
            let parsed = parse_pattern(&text).ok().map(|p| p.ball_count());
            if oracle != parsed {
                mismatches.push(text);
            }
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches.is_empty() && secs < 10.0,
        format!(
            "{checked} strings, {} mismatches {:?}, {secs:.2} s",
            mismatches.len(),
            &mismatches[..mismatches.len().min(5)]
        ),
    )
}

fn criterion_table() -> Outcome {
    let bad: Vec<&str> = TABLE_PATTERNS
        .iter()
        .filter(|(b, text, _)| parse_pattern(text).map(|p| p.ball_count()).ok() != Some(*b))
        .map(|e| e.1)
        .collect();
    let bold = TABLE_PATTERNS.iter().filter(|e| e.2).count();
    outcome(
        bad.is_empty(),
        format!("{} listed patterns ({bold} bold), {} with wrong ball count {bad:?}", TABLE_PATTERNS.len(), bad.len()),
    )
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn criterion_cardinality() -> Outcome {
    let mut wrong = Vec::new();
    for h in 1..=9u8 {
        for b in 1..=h as u32 {
            let got = build_graph(h, b).map(|g| g.states().len() as u64).unwrap_or(0);
            if got != binomial(h as u64, b as u64) {
                wrong.push((h, b, got));
            }
        }
    }
    let small = build_graph(4, 3).map(|g| g.states().len()).unwrap_or(0);
    outcome(wrong.is_empty() && small == 4, format!("45 (H, B) pairs, wrong {wrong:?}; H=4 B=3 has {small} states"))
}

/// Bit `j` set when a ball lands `j` beats from now, in steady state before throw `k`.
fn oracle_loop_states(digits: &[u8], width: u8) -> HashSet<u16> {
    let n = digits.len();
    (0..n)
        .map(|k| {
            let now = 20 * n + k;
            let mut bits = 0u16;
            for beat in 0..now {
                let land = beat + digits[beat % n] as usize;
                if digits[beat % n] > 0 && land >= now && land < now + width as usize {
                    bits |= 1 << (land - now);
                }
            }
            bits
        })
        .collect()
}

fn oracle_successors(bits: u16, width: u8) -> Vec<u16> {
    let rest = bits >> 1;
    if bits & 1 == 0 {
        return vec![rest];
    }
    (2..=width).filter(|&t| rest & (1 << (t - 1)) == 0).map(|t| rest | (1 << (t - 1))).collect()
}

fn bfs_distance(sources: &HashSet<u16>, targets: &HashSet<u16>, width: u8) -> Option<usize> {
    let mut seen: HashSet<u16> = sources.clone();
    let mut queue: VecDeque<(u16, usize)> = sources.iter().map(|&s| (s, 0)).collect();
    while let Some((s, d)) = queue.pop_front() {
        if targets.contains(&s) {
            return Some(d);
        }
        for next in oracle_successors(s, width) {
            if seen.insert(next) {
                queue.push_back((next, d + 1));
            }
        }
    }
    None
}

fn criterion_paths() -> Outcome {
    let graph = build_graph(9, 5).expect("5-ball graph");
    let patterns: Vec<(SiteswapPattern, Vec<u8>)> = TABLE_PATTERNS
        .iter()
        .filter(|e| e.0 == 5)
        .map(|e| (parse_pattern(e.1).unwrap(), e.1.bytes().map(|b| b - b'0').collect()))
        .collect();
    let ground: HashSet<u16> = [0b11111].into();
    let mut wrong = Vec::new();
    let mut compared = 0;
    for (p, d) in &patterns {
        let want = bfs_distance(&ground, &oracle_loop_states(d, 9), 9);
        let got = plan_entry(&graph, p).ok().map(|e| e.throws.len());
        compared += 1;
        if want != got {
            wrong.push(format!("entry {p}: {got:?} vs {want:?}"));
        }
    }
    for (a, da) in &patterns {
        for (b, db) in &patterns {
            let want = bfs_distance(&oracle_loop_states(da, 9), &oracle_loop_states(db, 9), 9);
            let got = plan_transition(&graph, a, b).ok().map(|t| t.throws.len());
            compared += 1;
            if want != got {
                wrong.push(format!("{a} -> {b}: {got:?} vs {want:?}"));
            }
        }
    }
    outcome(
        graph.states().len() == 126 && wrong.is_empty(),
        format!(
            "{} states, {compared} paths compared, {} mismatches {:?}",
            graph.states().len(),
            wrong.len(),
            &wrong[..wrong.len().min(3)]
        ),
    )
}

// ---------------------------------------------------------------- ballistics

fn criterion_ballistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = Vec3::new(0.0, 0.0, -9.81);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut point =
            || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (from, to) = (point(), point());
        let tf = rng.random_range(0.05..3.0);
        let v = takeoff_velocity(&from, &to, tf, &g);
        worst = worst.max((propagate(&from, &v, tf, &g).0 - to).norm());
    }
    let timing = TimingConfig { cycle_time: 0.48, dwell_ratio: 0.5 };
    let geometry = HandGeometryConfig::default();
    let apex = nominal_flight(0, ThrowHeight(9), 0, &timing, &geometry, 0.0)
        .map(|f| f.apex_height(&geometry.gravity()))
        .unwrap_or(f64::NAN);
    outcome(
        worst < 1e-9 && (apex - 4.52).abs() <= 0.02,
        format!("worst round-trip error {worst:.2e} m over 1000 cases; 9-throw apex {apex:.4} m"),
    )
}

// ---------------------------------------------------------------- optimizer

const HEIGHTS: [u8; 9] = [0, 2, 3, 4, 5, 6, 7, 8, 9];

fn possible_triples() -> Vec<(u8, u8, u8)> {
    let mut out = Vec::new();
    for &p in &HEIGHTS {
        for &c in &HEIGHTS {
            for &t in &HEIGHTS {
                if (p == 2) == (c == 2) && (t == 0) == (c == 0) && t as i16 != p as i16 - 2 {
                    out.push((p, c, t));
                }
            }
        }
    }
    out
}

fn random_spec(rng: &mut ChaCha8Rng, config: &CycleConfig) -> CycleSpec {
    let triples = possible_triples();
    let (p, c, t) = triples[rng.random_range(0..triples.len())];
    let mut inputs = nominal_cycle(
        10,
        Some(ThrowHeight(p)),
        ThrowHeight(c),
        ThrowHeight(t),
        &TimingConfig::default(),
        &HandGeometryConfig::default(),
        0.0,
    )
    .unwrap();
    if let Incoming::Flight(ball) = &mut inputs.incoming {
        ball.touchdown_time += rng.random_range(-0.01..0.01);
        ball.touchdown_position += Vec3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), 0.0);
    }
    inputs.start.position += Vec3::new(rng.random_range(-0.01..0.01), 0.0, rng.random_range(-0.01..0.01));
    CycleSpec::build(inputs, config).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12)
}

fn central_difference(f: impl Fn(&[f64]) -> f64, z: &[f64]) -> Vec<f64> {
    let mut zz = z.to_vec();
    (0..z.len())
        .map(|i| {
            let h = 1e-6 * z[i].abs().max(1.0);
            zz[i] = z[i] + h;
            let up = f(&zz);
            zz[i] = z[i] - h;
            let down = f(&zz);
            zz[i] = z[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn criterion_optimizer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let config = CycleConfig::default();
    let mut worst_gradient = 0.0f64;
    for _ in 0..100 {
        let problem = assemble_cycle(&random_spec(&mut rng, &config)).unwrap();
        let z: Vec<f64> = (0..problem.n_vars()).map(|_| rng.random_range(-300.0..300.0)).collect();
        worst_gradient = worst_gradient
            .max(rel_err(&problem.objective_gradient(&z), &central_difference(|z| problem.objective(z), &z)));
        for c in problem.inequalities.iter().step_by(5) {
            worst_gradient = worst_gradient.max(rel_err(&c.gradient(&z), &central_difference(|z| c.value(z), &z)));
        }
    }

    let equality_only = CycleConfig {
        constraints: ConstraintSet::BASELINE,
        release_clearance: 0.0,
        catch_closing_speed: -1.0,
        ..CycleConfig::default()
    };
    let mut worst_kkt = 0.0f64;
    for _ in 0..20 {
        let problem = assemble_cycle(&random_spec(&mut rng, &equality_only)).unwrap();
        let z = match solve(&problem, None, &SolverOptions::default()) {
            Ok((z, report)) if report.converged && problem.inequalities.is_empty() => z,
            _ => {
                worst_kkt = f64::INFINITY;
                continue;
            }
        };
        let n = problem.n_vars();
        let m = problem.eq_rhs.len();
        let mut kkt = DMatrix::zeros(n + m, n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(&problem.hessian);
        kkt.view_mut((0, n), (n, m)).copy_from(&problem.eq_matrix.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&problem.eq_matrix);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-&problem.linear));
        rhs.rows_mut(n, m).copy_from(&problem.eq_rhs);
        let oracle: Vec<f64> =
            kkt.lu().solve(&rhs).expect("nonsingular KKT system").rows(0, n).iter().copied().collect();
        worst_kkt = worst_kkt.max(rel_err(&z, &oracle));
    }

    let mut violating = Vec::new();
    let mut converged = 0;
    for (p, c, t) in possible_triples() {
        let inputs = nominal_cycle(
            10,
            Some(ThrowHeight(p)),
            ThrowHeight(c),
            ThrowHeight(t),
            &TimingConfig::default(),
            &HandGeometryConfig::default(),
            2.4,
        )
        .unwrap();
        let spec = CycleSpec::build(inputs, &config).unwrap();
        let Ok(planned) = plan_cycle(&spec, None, &SolverOptions::default()) else { continue };
        if !planned.report.converged {
            continue;
        }
        converged += 1;
        if !evaluate_constraints(&planned.trajectory, &spec, &ConstraintSet::FULL).violated(1e-6).is_empty() {
            violating.push((p, c, t));
        }
    }
    outcome(
        worst_gradient < 1e-5 && worst_kkt < 1e-8 && violating.is_empty() && converged > 0,
        format!(
            "gradient error {worst_gradient:.1e}, KKT deviation {worst_kkt:.1e}, {converged}/{} converged cycles, violating {violating:?}",
            possible_triples().len()
        ),
    )
}

// ---------------------------------------------------------------- episodes

fn config_with(f: impl FnOnce(&mut ExperimentConfig)) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    f(&mut c);
    c
}

fn catches_for(text: &str, config: &ExperimentConfig) -> (bool, usize) {
    match run_pattern(&parse_pattern(text).unwrap(), config) {
        Ok(r) => (r.summary.succeeded, r.summary.catches),
        Err(_) => (false, 0),
    }
}

fn criterion_patterns() -> Outcome {
    let start = Instant::now();
    let config = config_with(|c| c.experiment.catches = 100);
    let suite = ["3", "423", "522", "5", "645", "744", "6", "75", "7", "867", "8", "97", "9"];
    let failed: Vec<String> = suite
        .iter()
        .filter_map(|p| {
            let (ok, n) = catches_for(p, &config);
            (!ok).then(|| format!("{p} ({n})"))
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failed.is_empty() && secs < 600.0,
        format!("{} patterns to 100 catches in {secs:.0} s, failed {failed:?}", suite.len()),
    )
}

fn criterion_baseline() -> Outcome {
    let config = config_with(|c| {
        c.experiment.catches = 100;
        c.episode.cycle.constraints = ConstraintSet::BASELINE;
    });
    let mut bold_failed = Vec::new();
    let mut plain_failed = 0;
    let mut plain_tested = 0;
    for (_, text, bold) in TABLE_PATTERNS {
        let (ok, _) = catches_for(text, &config);
        if *bold {
            if !ok {
                bold_failed.push(*text);
            }
        } else {
            plain_tested += 1;
            plain_failed += usize::from(!ok);
        }
    }
    outcome(
        bold_failed.is_empty() && plain_failed >= 5,
        format!(
            "bold failures {bold_failed:?}; {plain_failed}/{plain_tested} non-bold patterns drop before 100 catches"
        ),
    )
}

fn criterion_walk_and_budget() -> (Outcome, Outcome) {
    let config = config_with(|c| {
        c.experiment.balls = 5;
        c.experiment.walk_steps = 20_000;
        c.experiment.seeds = 1;
        c.experiment.first_seed = 0;
    });
    let report = match run_walk(&config) {
        Ok(r) => r,
        Err(e) => return (outcome(false, e.to_string()), outcome(false, e.to_string())),
    };
    let (unseen, impossible_seen) = report.coverage.structural_mismatches(9);
    let oracle_unseen = structural_oracle_mismatches(&report.coverage);
    let seed = &report.seeds[0];
    let walk = outcome(
        report.drops == 0 && unseen.is_empty() && impossible_seen.is_empty() && oracle_unseen.is_empty(),
        format!(
            "{} catches, drops {}, first drop {:?}; {} triples seen; possible but unseen {unseen:?}; impossible but seen {impossible_seen:?}; disagreement with reachability oracle {oracle_unseen:?}",
            seed.catches,
            report.drops,
            seed.first_drop,
            (0..1000).filter(|&i| report.coverage.counts[i] > 0).count(),
        ),
    );
    let med = median(&report.solve_times).unwrap_or(f64::INFINITY) * 1e3;
    let budget =
        outcome(med <= 100.0, format!("median solve time {med:.2} ms over {} cycles", report.solve_times.len()));
    (walk, budget)
}

/// Triples reachable from the ground state, found by breadth-first search over
/// the last nine throws (which fix both the state and every incoming height).
fn reachable_triples(balls: usize) -> HashSet<(u8, u8, u8)> {
    let start = [balls as u8; 9];
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    let mut reachable = HashSet::new();
    while let Some(history) = queue.pop_front() {
        // history[9 - d] was thrown d beats ago
        let thrown = |d: usize| history[9 - d] as usize;
        let lands = |j: usize| (1..=9).any(|d| thrown(d) == d + j);
        let incoming = (1..=9).find(|&d| thrown(d) == d).unwrap_or(0) as u8;
        let options: Vec<u8> =
            if incoming == 0 { vec![0] } else { (2..=9u8).filter(|&t| !lands(t as usize)).collect() };
        for t in options {
            reachable.insert((thrown(2) as u8, incoming, t));
            let mut next = [0u8; 9];
            next[..8].copy_from_slice(&history[1..]);
            next[8] = t;
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    reachable
}

/// Triples on which the walk's coverage and the reachability oracle disagree.
fn structural_oracle_mismatches(coverage: &CoverageMatrix) -> Vec<(u8, u8, u8)> {
    let reachable = reachable_triples(5);
    let mut out = Vec::new();
    for p in 0..10u8 {
        for c in 0..10u8 {
            for t in 0..10u8 {
                if reachable.contains(&(p, c, t)) != (coverage.get(p, c, t) > 0) {
                    out.push((p, c, t));
                }
            }
        }
    }
    out
}

fn ablation_mean(f: impl FnOnce(&mut ConstraintSet)) -> Result<(f64, usize), String> {
    let config = config_with(|c| {
        c.experiment.balls = 5;
        c.experiment.walk_steps = 1000;
        c.experiment.seeds = 100;
        c.experiment.first_seed = 0;
        f(&mut c.episode.cycle.constraints);
    });
    run_walk(&config).map(|r| (r.mean_catches, r.drops)).map_err(|e| e.to_string())
}

fn criterion_ablation() -> Outcome {
    match (ablation_mean(|s| s.roll_out = false), ablation_mean(|s| s.premature_contact = false)) {
        (Ok((roll, rd)), Ok((prem, pd))) => outcome(
            (10.0..=300.0).contains(&roll) && (2.0..=30.0).contains(&prem),
            format!(
                "100 seeds: roll-out off mean {roll:.1} catches ({rd} dropped); premature-contact off mean {prem:.1} ({pd} dropped)"
            ),
        ),
        (a, b) => outcome(false, format!("{:?} {:?}", a.err(), b.err())),
    }
}

fn criterion_accuracy() -> Outcome {
    let base = config_with(|c| {
        c.experiment.balls = 5;
        c.experiment.walk_steps = 5000;
    });
    let stiff = config_with(|c| {
        *c = base;
        c.episode.contact.stiffness *= 10.0;
        c.episode.contact.damping *= 10.0;
        c.episode.contact.friction = 0.0;
    });
    let (Ok(a), Ok(s)) = (run_accuracy(&base, 0), run_accuracy(&stiff, 0)) else {
        return outcome(false, "accuracy run failed");
    };
    let means: Vec<f64> = [3, 5, 7, 9].iter().map(|&h| a.mean_for(h).unwrap_or(f64::NAN)).collect();
    let monotone = means.windows(2).all(|w| w[0] <= w[1]);
    let (m9, s9) = (a.mean_for(9).unwrap_or(f64::NAN), s.mean_for(9).unwrap_or(f64::NAN));
    outcome(
        monotone && s9 * 2.0 <= m9,
        format!(
            "mean error at heights 3/5/7/9: {:.4}/{:.4}/{:.4}/{:.4} m over {} catches; stiff contact height 9: {s9:.4} m over {} catches (first drop {:?})",
            means[0], means[1], means[2], means[3], a.catches, s.catches, s.first_drop.map(|d| d.time)
        ),
    )
}

// ---------------------------------------------------------------- physics

fn criterion_physics() -> Outcome {
    let g = Vec3::new(0.0, 0.0, -9.81);
    let hand = HandBody::default();
    let ball = BallBody::default();
    let run = |params: &ContactParams,
               start: BallState,
               poses: &[HandPose],
               seconds: f64,
               visit: &mut dyn FnMut(usize, &BallState)| {
        let mut s = start;
        for k in 1..=(seconds / params.step).round() as usize {
            s = step_ball(params, &hand, &ball, &s, poses, &g).0;
            visit(k, &s);
        }
        s
    };

    let fine = ContactParams { step: 1e-4, ..ContactParams::default() };
    let (p0, v0) = (Vec3::new(0.0, 0.1, 0.2), Vec3::new(1.0, -0.5, 5.0));
    let mut flight_error = 0.0f64;
    run(&fine, BallState { position: p0, velocity: v0 }, &[], 1.0, &mut |k, s| {
        flight_error = flight_error.max((s.position - propagate(&p0, &v0, k as f64 * 1e-4, &g).0).norm());
    });

    let upright = HandPose::at_rest(Vec3::zeros(), Vec3::z());
    let alpha = hand.slope_angle;
    let rho = 0.005;
    let speed = (9.81 * rho / alpha.tan()).sqrt();
    let axial = (rho + ball.radius / alpha.cos()) / alpha.tan() - hand.seat_height(ball.radius);
    let orbit = BallState { position: Vec3::new(rho, 0.0, axial), velocity: Vec3::new(0.0, speed, 0.0) };
    let slick = ContactParams { friction: 0.0, ..ContactParams::default() };
    let mut slowest = f64::INFINITY;
    let mut escaped = false;
    let end = run(&slick, orbit, &[upright], 3.0, &mut |_, s| {
        slowest = slowest.min(s.velocity.norm());
        let c = cone_coordinates(&hand, &ball, &upright, &s.position);
        escaped |= c.radial > hand.mouth_radius || c.axial > hand.depth();
    });
    let orbits = !escaped && slowest > 0.5 * speed && end.position.xy().norm() > 0.5 * rho;

    let rough = ContactParams::default();
    let settled = run(&rough, orbit, &[upright], 3.0, &mut |_, _| {});
    let mut drift = 0.0f64;
    let mut residual = 0.0f64;
    run(&rough, settled, &[upright], 5.0, &mut |_, s| {
        drift = drift.max(s.position.norm());
        residual = residual.max(s.velocity.norm());
    });
    let settles = drift < 1e-4 && residual < 1e-3;
    outcome(
        flight_error < 1e-6 && orbits && settles,
        format!(
            "free-flight error {flight_error:.1e} m over 1 s; frictionless orbit kept {:.0}% of its speed; settled ball drift {drift:.1e} m, speed {residual:.1e} m/s",
            100.0 * slowest / speed
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "siteswap validity oracle", criterion_validity());
    report(2, "stability table parse", criterion_table());
    report(3, "graph cardinality", criterion_cardinality());
    report(4, "path optimality", criterion_paths());
    report(5, "ballistic consistency", criterion_ballistics());
    report(6, "optimizer correctness", criterion_optimizer());
    report(7, "pattern stability", criterion_patterns());
    report(8, "constraint necessity", criterion_baseline());
    let (walk, budget) = criterion_walk_and_budget();
    report(9, "random-walk sufficiency", walk);
    report(10, "random-walk ablation", criterion_ablation());
    report(11, "throw accuracy trend", criterion_accuracy());
    report(12, "planner budget", budget);
    report(13, "physics sanity", criterion_physics());
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass; failing {failed:?}", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
