//! Scenario configuration: built-in presets, JSON files and flag overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use pram_core::optimizer::{PatternSummary, Strategy, DEFAULT_RESTARTS};
use pram_core::{CategoricalDistribution, PrivacyLevel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCENARIO_I: [f64; 10] = [0.3, 0.1, 0.2, 0.08, 0.02, 0.04, 0.06, 0.1, 0.01, 0.09];
pub const SCENARIO_II: [f64; 10] = [
    0.0336, 0.1059, 0.1697, 0.0962, 0.0180, 0.0062, 0.1097, 0.0005, 0.1233, 0.3369,
];
pub const DEFAULT_ALPHAS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

/// Scenario IV: `p_1 = 0.05`, the remaining 29 cells share `0.95` evenly.
pub fn scenario_iv() -> Vec<f64> {
    let mut p = vec![0.95 / 29.0; 30];
    p[0] = 0.05;
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioId {
    I,
    II,
    III,
    IV,
    #[serde(rename = "custom")]
    Custom,
}

impl FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(ScenarioId::I),
            "ii" | "2" => Ok(ScenarioId::II),
            "iii" | "3" => Ok(ScenarioId::III),
            "iv" | "4" => Ok(ScenarioId::IV),
            "custom" => Ok(ScenarioId::Custom),
            _ => Err(format!("unknown scenario `{s}` (expected I, II, III, IV or custom)")),
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioId::I => "I",
            ScenarioId::II => "II",
            ScenarioId::III => "III",
            ScenarioId::IV => "IV",
            ScenarioId::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Normalized independent Gamma draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub categories: usize,
    pub shape: f64,
    pub scale: f64,
    pub seed: u64,
}

impl GammaSpec {
    pub fn sample(&self) -> CliResult<Vec<f64>> {
        let gamma = Gamma::new(self.shape, self.scale)
            .map_err(|e| CliError::Config(format!("gamma generator: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let g: Vec<f64> = (0..self.categories).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = g.iter().sum();
        Ok(g.into_iter().map(|x| x / total).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PSource {
    Explicit(Vec<f64>),
    Gamma(GammaSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub categories: usize,
    pub p: PSource,
    pub alphas: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub restarts: usize,
    /// Size of the held population used for risk indices, when requested.
    pub population: Option<usize>,
}

/// Every field optional; used for JSON files and for flag overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub scenario: Option<ScenarioId>,
    #[serde(alias = "S")]
    pub categories: Option<usize>,
    pub p: Option<Vec<f64>>,
    pub gamma: Option<GammaSpec>,
    pub alphas: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub strategy: Option<Strategy>,
    pub restarts: Option<usize>,
    pub population: Option<usize>,
}

impl ConfigPatch {
    pub fn from_file(path: impl AsRef<Path>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CliError::Config(format!("{}: {e}", path.as_ref().display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: ConfigPatch) -> ConfigPatch {
        ConfigPatch {
            scenario: other.scenario.or(self.scenario),
            categories: other.categories.or(self.categories),
            p: other.p.or(self.p),
            gamma: other.gamma.or(self.gamma),
            alphas: other.alphas.or(self.alphas),
            n: other.n.or(self.n),
            replications: other.replications.or(self.replications),
            seed: other.seed.or(self.seed),
            strategy: other.strategy.or(self.strategy),
            restarts: other.restarts.or(self.restarts),
            population: other.population.or(self.population),
        }
    }
}

impl ScenarioConfig {
    /// Preset for a built-in scenario: four budgets, `n = 10^4`, 100 replications.
    pub fn builtin(id: ScenarioId, seed: u64) -> Self {
        let p = match id {
            ScenarioId::I => PSource::Explicit(SCENARIO_I.to_vec()),
            ScenarioId::II => PSource::Explicit(SCENARIO_II.to_vec()),
            ScenarioId::IV => PSource::Explicit(scenario_iv()),
            ScenarioId::III => PSource::Gamma(GammaSpec {
                categories: 30,
                shape: 1.0,
                scale: 5.0,
                seed,
            }),
            ScenarioId::Custom => PSource::Explicit(Vec::new()),
        };
        let categories = match id {
            ScenarioId::I | ScenarioId::II => 10,
            ScenarioId::III | ScenarioId::IV => 30,
            ScenarioId::Custom => 0,
        };
        ScenarioConfig {
            scenario: id,
            categories,
            p,
            alphas: DEFAULT_ALPHAS.to_vec(),
            n: 10_000,
            replications: 100,
            seed,
            strategy: Strategy::Auto,
            restarts: DEFAULT_RESTARTS,
            population: None,
        }
    }

    /// Applies `patch` on top of the preset it names (default `custom`).
    pub fn from_patch(patch: ConfigPatch) -> CliResult<Self> {
        let id = patch.scenario.unwrap_or(ScenarioId::Custom);
        let seed = patch.seed.unwrap_or(0);
        let mut cfg = Self::builtin(id, seed);
        if let Some(g) = patch.gamma {
            cfg.categories = g.categories;
            cfg.p = PSource::Gamma(g);
        }
        if let Some(p) = patch.p {
            cfg.categories = p.len();
            cfg.p = PSource::Explicit(p);
        }
        if let Some(s) = patch.categories {
            if cfg.categories != 0 && cfg.categories != s {
                return Err(CliError::Config(format!(
                    "S={s} conflicts with a probability vector of length {}",
                    cfg.categories
                )));
            }
            cfg.categories = s;
        }
        if let Some(a) = patch.alphas {
            cfg.alphas = a;
        }
        cfg.n = patch.n.unwrap_or(cfg.n);
        cfg.replications = patch.replications.unwrap_or(cfg.replications);
        cfg.strategy = patch.strategy.unwrap_or(cfg.strategy);
        cfg.restarts = patch.restarts.unwrap_or(cfg.restarts);
        cfg.population = patch.population.or(cfg.population);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.alphas.is_empty() {
            return Err(CliError::Config("alpha list is empty".into()));
        }
        for &a in &self.alphas {
            parse_alpha(a)?;
        }
        if self.n == 0 {
            return Err(CliError::Config("n must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(CliError::Config("replications must be at least 1".into()));
        }
        if let Some(pop) = self.population {
            if pop < self.n {
                return Err(CliError::Config(format!(
                    "population size {pop} is smaller than the sample size {}",
                    self.n
                )));
            }
        }
        self.distribution()?;
        Ok(())
    }

    pub fn distribution(&self) -> CliResult<CategoricalDistribution> {
        let p = match &self.p {
            PSource::Explicit(p) => p.clone(),
            PSource::Gamma(g) => g.sample()?,
        };
        CategoricalDistribution::new(p).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn privacy_levels(&self) -> CliResult<Vec<PrivacyLevel>> {
        self.alphas.iter().map(|&a| parse_alpha(a)).collect()
    }
}

pub fn parse_alpha(a: f64) -> CliResult<PrivacyLevel> {
    PrivacyLevel::new(a).map_err(|e| CliError::Config(e.to_string()))
}

/// Level counts reported for the built-in scenarios at `alpha` in
/// `{0.5, 1, 1.5, 2}`; `None` elsewhere and for Scenario III, whose
/// probability vector depends on an unpublished random draw.
pub fn reference_pattern(id: ScenarioId, alpha: f64) -> Option<PatternSummary> {
    let row = DEFAULT_ALPHAS.iter().position(|&a| a == alpha)?;
    let c = PatternSummary::counts;
    let table = match id {
        ScenarioId::I => [c(4, 6, 0, 0), c(5, 5, 0, 0), c(2, 8, 0, 0), c(0, 9, 0, 1)],
        ScenarioId::II => [c(7, 3, 0, 0), c(6, 4, 0, 0), c(6, 4, 0, 0), c(0, 9, 0, 1)],
        ScenarioId::IV => [c(0, 29, 0, 1), c(30, 0, 0, 0), c(30, 0, 0, 0), c(30, 0, 0, 0)],
        ScenarioId::III | ScenarioId::Custom => return None,
    };
    Some(table[row])
}
