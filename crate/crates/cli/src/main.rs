//! `juggle`: siteswap validation, graph queries and simulated juggling experiments.
//!
//! Exit codes: 0 success, 1 task failure (drop or invalid pattern), 2 configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use juggle::config::{ConfigError, ExperimentConfig};
use juggle::harness::{self, HarnessError, TABLE_PATTERNS};
use juggle::optimizer::ConstraintSet;
use juggle::siteswap::{
    build_graph, format_throws, parse_pattern, plan_entry, plan_transition, SiteswapError, SiteswapPattern,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "juggle", version, about = "Siteswap juggling planner and simulator")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `episode.contact.friction=0.3` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Directory for report.json and CSV/JSON-lines artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the full JSON report to stdout instead of the text summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    /// Consecutive catches for pattern and transition runs.
    #[arg(long, global = true)]
    catches: Option<usize>,
    /// Number of walk seeds.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    #[arg(long, global = true)]
    first_seed: Option<u64>,
    /// Throws per random walk.
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    balls: Option<u32>,
    #[arg(long, global = true)]
    max_height: Option<u8>,
    /// Pattern periods between transitions.
    #[arg(long, global = true)]
    periods: Option<usize>,
    /// Contact stiffness (N/m).
    #[arg(long, global = true)]
    stiffness: Option<f64>,
    /// Contact damping (N s/m).
    #[arg(long, global = true)]
    damping: Option<f64>,
    /// Coulomb friction coefficient.
    #[arg(long, global = true)]
    friction: Option<f64>,
    /// Simulation step (s).
    #[arg(long, global = true)]
    sim_step: Option<f64>,
    /// Trace frame every this many steps (0 disables).
    #[arg(long, global = true)]
    trace_decimation: Option<usize>,
    /// Disable the roll-out constraint.
    #[arg(long, global = true)]
    no_roll_out: bool,
    /// Disable premature-contact avoidance.
    #[arg(long, global = true)]
    no_premature_contact: bool,
    /// Disable the displacement bounds for low incoming throws.
    #[arg(long, global = true)]
    no_displacement: bool,
    /// Contact-switch constraints only.
    #[arg(long, global = true)]
    baseline: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check siteswap patterns.
    Validate { patterns: Vec<String> },
    /// Size and adjacency of the siteswap graph for --balls and --max-height.
    Graph {
        /// Print the adjacency list.
        #[arg(long)]
        adjacency: bool,
    },
    /// Shortest entry into a pattern, or transition between two.
    Plan { from: String, to: Option<String> },
    /// Juggle one pattern from the ground state.
    Pattern { pattern: String },
    /// Alternate between two patterns; with --pairs, list the table's non-trivial pairs.
    Transition {
        #[arg(required_unless_present = "pairs")]
        from: Option<String>,
        #[arg(required_unless_present = "pairs")]
        to: Option<String>,
        #[arg(long)]
        pairs: bool,
    },
    /// Random walks with coverage matrix and catches-to-failure statistics.
    Walk,
    /// Touchdown error by throw height over one random walk.
    Accuracy {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Task(String),
    Config(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Workers(_) => Failure::Config(e.to_string()),
            other => Failure::Task(other.to_string()),
        }
    }
}

impl From<SiteswapError> for Failure {
    fn from(e: SiteswapError) -> Self {
        Failure::Task(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Config(format!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Task(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
    }
}

/// Sets a dotted key in a TOML table, parsing the value as TOML (bare words as strings).
fn set_key(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), ConfigError> {
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .map(|mut t| t.remove("v").expect("key present"))
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last =
        parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| ConfigError::Invalid(format!("empty key in {key}")))?;
    let mut node = table;
    for p in parts {
        node = node
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("{key}: {p} is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if !cli.sets.is_empty() {
        let mut table: toml::Table = toml::from_str(&config.to_toml())?;
        for s in &cli.sets {
            let (k, v) =
                s.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("--set {s}: expected KEY=VALUE")))?;
            set_key(&mut table, k.trim(), v.trim())?;
        }
        config = toml::from_str(&toml::to_string(&table).expect("table serializes"))?;
    }
    let o = &cli.overrides;
    let x = &mut config.experiment;
    let e = &mut config.episode;
    x.catches = o.catches.unwrap_or(x.catches);
    x.seeds = o.seeds.unwrap_or(x.seeds);
    x.first_seed = o.first_seed.unwrap_or(x.first_seed);
    x.walk_steps = o.steps.unwrap_or(x.walk_steps);
    x.balls = o.balls.unwrap_or(x.balls);
    x.max_height = o.max_height.unwrap_or(x.max_height);
    x.segment_periods = o.periods.unwrap_or(x.segment_periods);
    e.contact.stiffness = o.stiffness.unwrap_or(e.contact.stiffness);
    e.contact.damping = o.damping.unwrap_or(e.contact.damping);
    e.contact.friction = o.friction.unwrap_or(e.contact.friction);
    e.contact.step = o.sim_step.unwrap_or(e.contact.step);
    e.trace_decimation = o.trace_decimation.unwrap_or(e.trace_decimation);
    let c = &mut e.cycle.constraints;
    if o.baseline {
        *c = ConstraintSet::BASELINE;
    }
    c.roll_out &= !o.no_roll_out;
    c.premature_contact &= !o.no_premature_contact;
    c.displacement &= !o.no_displacement;
    config.validate()?;
    Ok(config)
}

struct Output<'a> {
    dir: Option<&'a Path>,
    json: bool,
}

impl Output<'_> {
    fn file(&self, name: &str, contents: &str) -> Result<(), Failure> {
        if let Some(dir) = self.dir {
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
        }
        Ok(())
    }

    /// Writes report.json and prints either the JSON or the text summary.
    fn report(&self, report: &impl Serialize, text: &str) -> Result<(), Failure> {
        let json = serde_json::to_string_pretty(report).expect("reports serialize");
        self.file("report.json", &json)?;
        if self.json {
            println!("{json}");
        } else {
            print!("{text}");
        }
        Ok(())
    }
}

fn parse(text: &str) -> Result<SiteswapPattern, Failure> {
    parse_pattern(text).map_err(|e| Failure::Task(format!("{text}: {e}")))
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let config = resolve_config(cli)?;
    let out = Output { dir: cli.out.as_deref(), json: cli.json };
    match &cli.command {
        Command::Validate { patterns } => {
            let reports: Vec<_> = patterns.iter().map(|p| harness::validate(p)).collect();
            let text: String = reports.iter().map(|r| format!("{r}\n")).collect();
            out.report(&reports, &text)?;
            Ok(reports.iter().all(|r| r.valid))
        }
        Command::Graph { adjacency } => {
            let (height, balls) = (config.experiment.max_height, config.experiment.balls);
            let graph = build_graph(height, balls)?;
            #[derive(Serialize)]
            struct GraphReport {
                height: u8,
                balls: u32,
                states: usize,
                edges: usize,
                ground: String,
            }
            let r = GraphReport {
                height,
                balls,
                states: graph.states().len(),
                edges: graph.edge_count(),
                ground: graph.ground().to_string(),
            };
            let adjacency_text = graph.export_adjacency();
            out.file("adjacency.txt", &adjacency_text)?;
            let mut text = format!(
                "height {} balls {}: {} states, {} edges, ground state {}\n",
                r.height, r.balls, r.states, r.edges, r.ground
            );
            if *adjacency {
                text.push_str(&adjacency_text);
            }
            out.report(&r, &text)?;
            Ok(true)
        }
        Command::Plan { from, to } => {
            let a = parse(from)?;
            let graph = build_graph(config.experiment.max_height.max(a.ball_count() as u8), a.ball_count())?;
            #[derive(Serialize)]
            struct PlanReport {
                from: String,
                to: Option<String>,
                throws: String,
                depart_phase: Option<usize>,
                arrive_phase: usize,
            }
            let r = match to {
                None => {
                    let e = plan_entry(&graph, &a)?;
                    PlanReport {
                        from: "ground".into(),
                        to: Some(from.clone()),
                        throws: format_throws(&e.throws),
                        depart_phase: None,
                        arrive_phase: e.phase,
                    }
                }
                Some(to) => {
                    let b = parse(to)?;
                    let t = plan_transition(&graph, &a, &b)?;
                    PlanReport {
                        from: from.clone(),
                        to: Some(to.clone()),
                        throws: format_throws(&t.throws),
                        depart_phase: Some(t.depart_phase),
                        arrive_phase: t.arrive_phase,
                    }
                }
            };
            let text = format!(
                "{} -> {}: throws [{}], leave at phase {}, arrive at phase {}\n",
                r.from,
                r.to.as_deref().unwrap_or("-"),
                r.throws,
                r.depart_phase.map_or("-".to_string(), |p| p.to_string()),
                r.arrive_phase
            );
            out.report(&r, &text)?;
            Ok(true)
        }
        Command::Pattern { pattern } => {
            let p = parse(pattern)?;
            let r = harness::run_pattern(&p, &config)?;
            write_episode_files(&out, &r.stats)?;
            let text = format!(
                "{} ({} balls, entry [{}]): {} catches, {}\n",
                r.pattern,
                r.balls,
                r.entry,
                r.summary.catches,
                outcome(r.summary.succeeded, &r.summary.first_drop)
            );
            out.report(&r, &text)?;
            Ok(r.summary.succeeded)
        }
        Command::Transition { pairs: true, .. } => {
            let patterns: Vec<SiteswapPattern> =
                TABLE_PATTERNS.iter().map(|e| parse_pattern(e.1).expect("table patterns are valid")).collect();
            let ordered = harness::nontrivial_pairs(&patterns, config.experiment.max_height);
            let list: Vec<(String, String)> = ordered
                .iter()
                .filter(|(a, b)| a.to_string() < b.to_string())
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
            #[derive(Serialize)]
            struct PairsReport {
                unordered_pairs: usize,
                pairs: Vec<(String, String)>,
            }
            let mut text = format!("{} non-trivial pattern pairs (disjoint loops)\n", list.len());
            for (a, b) in &list {
                text.push_str(&format!("{a} {b}\n"));
            }
            out.report(&PairsReport { unordered_pairs: list.len(), pairs: list }, &text)?;
            Ok(true)
        }
        Command::Transition { from, to, .. } => {
            let a = parse(from.as_deref().expect("required by clap"))?;
            let b = parse(to.as_deref().expect("required by clap"))?;
            let r = harness::run_transition(&a, &b, &config)?;
            write_episode_files(&out, &r.stats)?;
            let text = format!(
                "{} <-> {} (out [{}], back [{}], {} transitions): {} catches, {}\n",
                r.from,
                r.to,
                r.forward,
                r.backward,
                r.transitions,
                r.summary.catches,
                outcome(r.summary.succeeded, &r.summary.first_drop)
            );
            out.report(&r, &text)?;
            Ok(r.summary.succeeded)
        }
        Command::Walk => {
            let r = harness::run_walk(&config)?;
            let max = config.experiment.max_height;
            out.file("coverage.csv", &r.coverage.to_csv())?;
            let heatmap = r.coverage.heatmap(max);
            out.file("coverage.txt", &heatmap)?;
            let (unseen, impossible) = r.coverage.structural_mismatches(max);
            let mut text = String::new();
            for s in &r.seeds {
                let end = match &s.first_drop {
                    Some(d) => format!("drop ({:?}) at {:.3} s", d.cause, d.time),
                    None => "completed".to_string(),
                };
                text.push_str(&format!("seed {}: {} catches, {end}\n", s.seed, s.catches));
            }
            text.push_str(&format!(
                "mean {:.1} median {:.1} catches over {} seeds, {} with drops\n",
                r.mean_catches,
                r.median_catches,
                r.seeds.len(),
                r.drops
            ));
            text.push_str(&format!(
                "coverage: {} throws, {} possible triples unseen, {} impossible triples seen\n",
                r.coverage.total(),
                unseen.len(),
                impossible.len()
            ));
            text.push_str(&heatmap);
            out.report(&r, &text)?;
            Ok(r.drops == 0)
        }
        Command::Accuracy { seed } => {
            let r = harness::run_accuracy(&config, *seed)?;
            out.file("accuracy.csv", &r.to_csv())?;
            let mut text = format!("{} catches, {}\n", r.catches, outcome(r.first_drop.is_none(), &r.first_drop));
            for h in &r.heights {
                text.push_str(&format!(
                    "height {}: n {:>5} mean {:.2} mm p95 {:.2} mm\n",
                    h.height,
                    h.count,
                    1e3 * h.mean,
                    1e3 * h.p95
                ));
            }
            out.report(&r, &text)?;
            Ok(true)
        }
    }
}

fn outcome(succeeded: bool, drop: &Option<juggle::simulator::DropEvent>) -> String {
    match drop {
        Some(d) => format!("ball {} dropped ({:?}) at {:.3} s", d.ball, d.cause, d.time),
        None if succeeded => "no drops".to_string(),
        None => "sequence ended early".to_string(),
    }
}

fn write_episode_files(out: &Output, stats: &juggle::simulator::EpisodeStats) -> Result<(), Failure> {
    out.file("events.csv", &stats.events_csv())?;
    if let Some(trace) = &stats.trace_jsonl {
        out.file("trace.jsonl", trace)?;
    }
    Ok(())
}
