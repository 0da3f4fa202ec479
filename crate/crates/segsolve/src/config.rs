//! Scenario configuration files.
//!
//! A configuration is a sectioned TOML document:
//!
//! ```toml
//! name = "two_strip"
//!
//! [domain]
//! rects = [[0.0, 0.0, 3.5, 1.5]]
//! resolution = 48          # nodes per unit length, h = 1/48
//!
//! [solver]
//! R = 1.0
//! kernel = "avg"
//! schedule = [0.2, 0.1, 0.05]
//!
//! [species.1]
//! kind = "region"
//! rect = [-1.5, -1.5, 0.0, 3.0]
//! ```
//!
//! Every omitted key takes the default shown by [`Config::to_toml`], which
//! is what reports embed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_name")]
    pub name: String,
    pub domain: DomainConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub perimeter: PerimeterConfig,
    /// Keyed by one-based species number.
    pub species: BTreeMap<String, SpeciesConfig>,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Open rectangles `[x0, y0, x1, y1]`.
    #[serde(default)]
    pub rects: Vec<[f64; 4]>,
    /// Open discs `[cx, cy, r]`.
    #[serde(default)]
    pub discs: Vec<[f64; 3]>,
    /// Grid nodes per unit length.
    pub resolution: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Avg,
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateChoice {
    Jacobi,
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    #[serde(rename = "R")]
    pub r: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    /// Frame width `W` of the wide stencil.
    pub frames: u32,
    pub kernel: KernelChoice,
    /// Exponent of the averaging kernel.
    pub p: f64,
    /// ε for `solve` and `analyze`.
    pub eps: f64,
    /// Strictly decreasing ε values for `sweep`.
    pub schedule: Vec<f64>,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub inner_max: usize,
    pub outer_max: usize,
    pub damping: f64,
    pub species_update: UpdateChoice,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            r: 1.0,
            lambda: 1.0,
            big_lambda: 2.0,
            frames: 3,
            kernel: KernelChoice::Avg,
            p: 1.0,
            eps: 0.1,
            schedule: vec![0.2, 0.1, 0.05],
            inner_tol: 1e-10,
            outer_tol: 1e-8,
            inner_max: 100,
            outer_max: 2000,
            damping: 0.8,
            species_update: UpdateChoice::Jacobi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Fixed support threshold. Absent means `max(2h·max f_i, ε^½)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub tau_fraction: f64,
    pub perimeter_t: Vec<f64>,
    pub exterior_ball: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            sigma: None,
            tau_fraction: 0.25,
            perimeter_t: vec![0.05, 0.1, 0.2],
            exterior_ball: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    /// Required fraction `c` of `B_r` covered by `supp f_i`.
    pub density_c: f64,
    pub density_r: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            density_c: 0.1,
            density_r: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerimeterConfig {
    pub resolution: u32,
    pub seed: u64,
    pub t: Vec<f64>,
}

impl Default for PerimeterConfig {
    fn default() -> Self {
        Self {
            resolution: 128,
            seed: 7,
            t: vec![0.05, 0.1, 0.2],
        }
    }
}

/// Boundary data of one species, placed in the exterior strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpeciesConfig {
    /// `peak` on a rectangle or disc, ramped to zero over `ramp` extra nodes.
    Region {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rect: Option<[f64; 4]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        disc: Option<[f64; 3]>,
        #[serde(default = "one")]
        peak: f64,
        #[serde(default = "one_node")]
        ramp: u32,
    },
    /// `peak · (1 − (ρ/radius)²)²` for `ρ < radius`.
    Bump {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "one")]
        peak: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn one_node() -> u32 {
    1
}

const TWO_STRIP: &str = include_str!("../scenarios/two_strip.toml");
const THREE_SPECIES: &str = include_str!("../scenarios/three_species.toml");
const ANNULUS_FREE: &str = include_str!("../scenarios/annulus_free.toml");

/// Names accepted by [`Config::bundled`].
pub const BUNDLED: [&str; 3] = ["two_strip", "three_species", "annulus_free"];

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.species_list()?;
        Ok(cfg)
    }

    /// One of the scenarios shipped with the crate.
    pub fn bundled(name: &str) -> Option<Self> {
        let text = match name {
            "two_strip" => TWO_STRIP,
            "three_species" => THREE_SPECIES,
            "annulus_free" => ANNULUS_FREE,
            _ => return None,
        };
        Some(Self::parse(text).expect("bundled scenarios parse"))
    }

    /// Loads a file, or a bundled scenario given as `bundled:<name>`.
    pub fn load(path: &str) -> Result<Self, CliError> {
        if let Some(name) = path.strip_prefix("bundled:") {
            return Self::bundled(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown bundled scenario {name:?}, expected one of {BUNDLED:?}"
                ))
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Species in order; keys must be exactly `1..=K`.
    pub fn species_list(&self) -> Result<Vec<&SpeciesConfig>, CliError> {
        let mut out = Vec::with_capacity(self.species.len());
        for n in 1..=self.species.len() {
            let s = self.species.get(&n.to_string()).ok_or_else(|| {
                CliError::Config(format!(
                    "species must be numbered 1..={}, missing {n}",
                    self.species.len()
                ))
            })?;
            out.push(s);
        }
        if out.is_empty() {
            return Err(CliError::Config("no species configured".into()));
        }
        Ok(out)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.domain.resolution as f64
    }

    /// Fully resolved configuration, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_round_trip() {
        for name in BUNDLED {
            let cfg = Config::bundled(name).unwrap();
            let again = Config::parse(&cfg.to_toml()).unwrap();
            assert_eq!(cfg, again, "{name}");
        }
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = Config::parse(
            "[domain]\nrects = [[0.0, 0.0, 1.0, 1.0]]\nresolution = 16\n\
             [species.1]\nkind = \"bump\"\ncenter = [1.5, 0.5]\nradius = 0.2\n",
        )
        .unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.h(), 1.0 / 16.0);
        let text = cfg.to_toml();
        assert!(text.contains("Lambda = 2.0"), "{text}");
        assert!(text.contains("density_c"), "{text}");
    }

    #[test]
    fn rejects_gaps_and_unknown_keys() {
        let base = "[domain]\nrects = [[0.0, 0.0, 1.0, 1.0]]\nresolution = 16\n";
        let gap = format!("{base}[species.2]\nkind = \"bump\"\ncenter = [1.5, 0.5]\nradius = 0.2\n");
        assert!(matches!(Config::parse(&gap), Err(CliError::Config(_))));
        let typo =
            format!("{base}[solver]\nepsilon = 0.1\n[species.1]\nkind = \"bump\"\ncenter = [1.5, 0.5]\nradius = 0.2\n");
        assert!(matches!(Config::parse(&typo), Err(CliError::Config(_))));
        assert!(Config::load("bundled:nope").is_err());
    }
}
