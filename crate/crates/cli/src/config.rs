//! Validated run configuration, saved next to the outputs for replay.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use topev_core::engine::DeliveryOrder;
use topev_core::scenario::{builtin, load_scenario, FireParams, ScenarioScript};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FireConfig {
    pub ignite: f64,
    pub spread: f64,
    pub extinguish: f64,
}

impl From<FireConfig> for FireParams {
    fn from(c: FireConfig) -> Self {
        FireParams {
            ignite_prob: c.ignite,
            spread_prob: c.spread,
            extinguish_prob: c.extinguish,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// `[rows, cols]` of a fire run; absent for scripted runs.
    pub grid: Option<[usize; 2]>,
    pub theta: f64,
    pub seed: u64,
    pub intervals: u64,
    /// Built-in scenario name or script path.
    pub scenario: Option<String>,
    pub fire: FireConfig,
    pub verify: bool,
    pub out: PathBuf,
    pub max_messages: u64,
    /// Seed of the shuffled delivery order; FIFO when absent.
    pub shuffle: Option<u64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.grid, &self.scenario) {
            (None, None) => return Err(usage("either --grid or --scenario is required")),
            (Some(_), Some(_)) => {
                return Err(usage("--grid and --scenario are mutually exclusive"))
            }
            (Some([r, c]), None) if *r < 2 || *c < 2 => {
                return Err(usage(format!("grid must be at least 2x2, got {r}x{c}")))
            }
            _ => {}
        }
        if !self.theta.is_finite() {
            return Err(usage("theta must be finite"));
        }
        for (name, p) in [
            ("ignite", self.fire.ignite),
            ("spread", self.fire.spread),
            ("extinguish", self.fire.extinguish),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(usage(format!("{name} probability {p} is outside [0, 1]")));
            }
        }
        if self.max_messages == 0 {
            return Err(usage("--max-messages must be positive"));
        }
        Ok(())
    }

    pub fn delivery(&self) -> DeliveryOrder {
        self.shuffle
            .map_or(DeliveryOrder::Fifo, DeliveryOrder::Shuffled)
    }

    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(self)? + "\n",
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

/// Resolves a built-in name first, then a script file.
pub fn resolve_scenario(source: &str) -> Result<ScenarioScript, CliError> {
    if let Some(s) = builtin(source) {
        return Ok(s);
    }
    let text = fs::read_to_string(source).map_err(|e| {
        usage(format!(
            "scenario `{source}` is neither built in nor readable: {e}"
        ))
    })?;
    load_scenario(&text).map_err(|e| usage(format!("{source}: {e}")))
}

/// Parses `RxC`.
pub fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or("expected RxC")?;
    Ok([
        r.trim().parse().map_err(|_| "bad row count")?,
        c.trim().parse().map_err(|_| "bad column count")?,
    ])
}

/// Parses `A..B` (end exclusive).
pub fn parse_seeds(s: &str) -> Result<std::ops::Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected A..B")?;
    let a: u64 = a.parse().map_err(|_| "bad start seed")?;
    let b: u64 = b.parse().map_err(|_| "bad end seed")?;
    if a >= b {
        return Err("empty seed range".into());
    }
    Ok(a..b)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
