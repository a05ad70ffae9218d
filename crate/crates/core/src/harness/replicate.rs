//! Canned experiments: each runs an attacked scenario and its attack-free baseline.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::config::{AttackConfig, NoiseConfig, PolicySource, RampConfig, ScenarioConfig, UnconstrainedConfig};
use super::export::export_run;
use super::{run_scenario_with, HarnessError, RunSummary};
use crate::attack::ConstrainedConfig;
use crate::geo::LocalPos;
use crate::policy::NavPolicy;
use crate::world::Obstacle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentId {
    #[serde(rename = "fig5")]
    Fig5,
    #[serde(rename = "fig7-envelope")]
    Fig7Envelope,
    #[serde(rename = "fig8a")]
    Fig8a,
    #[serde(rename = "fig8b")]
    Fig8b,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [ExperimentId::Fig5, ExperimentId::Fig7Envelope, ExperimentId::Fig8a, ExperimentId::Fig8b];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig7Envelope => "fig7-envelope",
            ExperimentId::Fig8a => "fig8a",
            ExperimentId::Fig8b => "fig8b",
        }
    }

    /// The attacked scenario; [`baseline`] strips its attack.
    pub fn scenario(&self) -> ScenarioConfig {
        match self {
            ExperimentId::Fig5 => fig5_scenario(),
            ExperimentId::Fig7Envelope => fig7_envelope_scenario(),
            ExperimentId::Fig8a => fig8_scenario(LocalPos::new(0.0, 150.0), 0),
            ExperimentId::Fig8b => fig8_scenario(LocalPos::new(30.0, 150.0), 0),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|e| e.name()).collect();
            HarnessError::Config(format!("unknown experiment '{s}'; expected one of {}", names.join(", ")))
        })
    }
}

pub const FIG8_OBSTACLE: Obstacle = Obstacle { center: LocalPos::new(0.0, 100.0), radius: 5.0 };

/// Start at the origin, obstacle at (0, 100), constrained attack on the surrogate
/// navigator. `seed` drives the GPS noise.
pub fn fig8_scenario(target: LocalPos, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(LocalPos::ORIGIN, target, vec![FIG8_OBSTACLE], 120.0);
    cfg.seed = seed;
    cfg.attack = AttackConfig::Constrained(ConstrainedConfig::default());
    cfg
}

/// Obstacle beside the straight route; the unconstrained attack engages within 20 m of it.
pub fn fig5_scenario() -> ScenarioConfig {
    let obstacle = Obstacle { center: LocalPos::new(8.0, 75.0), radius: 5.0 };
    let mut cfg = ScenarioConfig::new(LocalPos::ORIGIN, LocalPos::new(0.0, 150.0), vec![obstacle], 120.0);
    cfg.attack = AttackConfig::Unconstrained(UnconstrainedConfig::default());
    cfg
}

/// Hovering vehicle, noiseless GPS, 1.1 m/s northward drift from 15 s to 50 s.
pub fn fig7_envelope_scenario() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(LocalPos::ORIGIN, LocalPos::new(0.0, 150.0), vec![], 60.0);
    cfg.policy = PolicySource::Hover;
    cfg.noise = NoiseConfig { sigma: 0.0 };
    cfg.attack = AttackConfig::Ramp(RampConfig {
        rate_mps: 1.1,
        direction: LocalPos::new(0.0, 1.0),
        start_s: 15.0,
        stop_s: 50.0,
    });
    cfg
}

pub fn baseline(cfg: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig { attack: AttackConfig::None, ..cfg.clone() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateReport {
    pub experiment: ExperimentId,
    pub attack: RunSummary,
    pub baseline: RunSummary,
}

/// Runs the experiment with its configured policy, or with `policy` when given,
/// writing `attack/` and `baseline/` artifacts plus `summary.json` under `out_dir`.
pub fn replicate(id: ExperimentId, policy: Option<&dyn NavPolicy>, out_dir: &Path) -> Result<ReplicateReport, HarnessError> {
    let cfg = id.scenario();
    let owned;
    let policy = match policy {
        Some(p) => p,
        None => {
            owned = cfg.load_policy()?;
            owned.as_ref()
        }
    };
    let attacked = run_scenario_with(&cfg, policy)?;
    let clean = run_scenario_with(&baseline(&cfg), policy)?;
    std::fs::create_dir_all(out_dir)?;
    export_run(&attacked, &out_dir.join("attack"))?;
    export_run(&clean, &out_dir.join("baseline"))?;
    std::fs::write(out_dir.join("scenario.toml"), cfg.to_toml_string())?;
    let report = ReplicateReport { experiment: id, attack: attacked.summary(), baseline: clean.summary() };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(report)
}
