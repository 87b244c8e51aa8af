//! Experiment configuration read from TOML.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! are rejected so that typos do not silently fall back to a default.
//!
//! ```toml
//! [experiment]
//! catches = 100          # consecutive catches for pattern and transition runs
//! seeds = 20             # seeds first_seed .. first_seed + seeds for walks
//! first_seed = 0
//! walk_steps = 20000     # throws per random walk
//! balls = 5              # ball count for walks and accuracy runs
//! max_height = 9         # highest throw in the siteswap graph
//! segment_periods = 2    # pattern periods between transitions
//!
//! [episode]              # catch detection and loss criteria
//! catch_speed = 0.2
//! catch_radius_ratio = 0.7
//! fall_margin = 0.5
//! escape_height = 0.05
//! trace_decimation = 0   # 0 disables trace export
//!
//! [episode.timing]       # cycle_time, dwell_ratio
//! [episode.geometry]     # takeoff, touchdown ([[x, y, z], [x, y, z]], right hand first), gravity
//! [episode.cycle]        # optimizer grid, windows and constraint bounds
//! [episode.cycle.constraints]  # premature_contact, displacement, roll_out
//! [episode.solver]       # augmented Lagrangian iteration limits and tolerances
//! [episode.contact]      # stiffness, damping, friction, step
//! [episode.hand]         # mouth_radius, slope_angle (rad)
//! [episode.ball]         # radius, mass
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::EpisodeConfig;
use crate::siteswap::MAX_HEIGHT;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub catches: usize,
    pub seeds: usize,
    pub first_seed: u64,
    pub walk_steps: usize,
    pub balls: u32,
    pub max_height: u8,
    pub segment_periods: usize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self { catches: 100, seeds: 20, first_seed: 0, walk_steps: 20_000, balls: 5, max_height: 9, segment_periods: 2 }
    }
}

impl ExperimentParams {
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.first_seed + i).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentParams,
    pub episode: EpisodeConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are plain values")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let e = &self.episode;
        let x = &self.experiment;
        e.timing.validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;
        e.contact.validate(e.ball.mass).map_err(|err| ConfigError::Invalid(err.to_string()))?;
        if !(e.ball.radius > 0.0 && e.ball.radius < e.hand.mouth_radius) {
            return invalid(format!(
                "ball radius {} must lie in (0, mouth radius {})",
                e.ball.radius, e.hand.mouth_radius
            ));
        }
        if !(e.hand.slope_angle > 0.0 && e.hand.slope_angle < std::f64::consts::FRAC_PI_2) {
            return invalid(format!("slope angle {} rad outside (0, pi/2)", e.hand.slope_angle));
        }
        if e.cycle.n_steps < 8 {
            return invalid(format!("optimizer grid of {} steps is too coarse", e.cycle.n_steps));
        }
        if x.max_height < 2 || x.max_height > MAX_HEIGHT {
            return invalid(format!("max_height {} outside 2..={MAX_HEIGHT}", x.max_height));
        }
        if x.balls == 0 || x.balls > x.max_height as u32 {
            return invalid(format!("{} balls do not fit under height {}", x.balls, x.max_height));
        }
        if x.seeds == 0 {
            return invalid("seeds must be at least 1".into());
        }
        if x.segment_periods == 0 {
            return invalid("segment_periods must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn nested_keys_override() {
        let c = ExperimentConfig::from_toml(
            "[experiment]\nseeds = 3\n[episode.contact]\nfriction = 0.0\n[episode.cycle.constraints]\nroll_out = false\n",
        )
        .unwrap();
        assert_eq!(c.experiment.seeds, 3);
        assert_eq!(c.episode.contact.friction, 0.0);
        assert!(!c.episode.cycle.constraints.roll_out && c.episode.cycle.constraints.premature_contact);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_and_invalid_values() {
        assert!(matches!(ExperimentConfig::from_toml("[experiment]\nsedes = 3\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(ExperimentConfig::from_toml("[experiment]\nseeds = 0\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            ExperimentConfig::from_toml("[episode.contact]\nstiffness = 1e9\n"),
            Err(ConfigError::Invalid(_))
        ));
    }
}
