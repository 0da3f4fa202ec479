//! Checks a scenario's standing assumptions on the actual grid.

use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use segsolve_core::{distance_transform, BallStencil, GridSpec, NodeSet};

use crate::error::CliError;
use crate::scenario::Scenario;

/// Species numbers in errors are one-based, as in the configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("R = {r} is outside (0, 1]")]
    ROutOfRange { r: f64 },
    #[error("species {species}: boundary value {value} < 0 at node {node} ({x}, {y})")]
    NegativeBoundaryData {
        species: usize,
        node: usize,
        x: f64,
        y: f64,
        value: f64,
    },
    #[error("species {species}: boundary data vanish on every strip node")]
    ZeroBoundaryData { species: usize },
    #[error(
        "species {i} and {j}: supports are {distance} apart (need >= 1), closest node {node} ({x}, {y}) of species {i}"
    )]
    SeparationViolated {
        i: usize,
        j: usize,
        distance: f64,
        node: usize,
        x: f64,
        y: f64,
    },
    #[error("species {species}: only {ratio} of the ball around node {node} ({x}, {y}) lies in the support (need {required})")]
    DensityConditionFailed {
        species: usize,
        node: usize,
        x: f64,
        y: f64,
        ratio: f64,
        required: f64,
    },
}

impl ValidationError {
    pub fn kind(&self) -> &'static str {
        match self {
            ValidationError::ROutOfRange { .. } => "ROutOfRange",
            ValidationError::NegativeBoundaryData { .. } => "NegativeBoundaryData",
            ValidationError::ZeroBoundaryData { .. } => "ZeroBoundaryData",
            ValidationError::SeparationViolated { .. } => "SeparationViolated",
            ValidationError::DensityConditionFailed { .. } => "DensityConditionFailed",
        }
    }

    pub fn details(&self) -> Value {
        match *self {
            ValidationError::ROutOfRange { r } => json!({ "R": r }),
            ValidationError::NegativeBoundaryData {
                species,
                node,
                x,
                y,
                value,
            } => {
                json!({ "species": species, "node": node, "x": x, "y": y, "value": value })
            }
            ValidationError::ZeroBoundaryData { species } => json!({ "species": species }),
            ValidationError::SeparationViolated {
                i,
                j,
                distance,
                node,
                x,
                y,
            } => {
                json!({ "species": [i, j], "distance": distance, "node": node, "x": x, "y": y })
            }
            ValidationError::DensityConditionFailed {
                species,
                node,
                x,
                y,
                ratio,
                required,
            } => {
                json!({ "species": species, "node": node, "x": x, "y": y, "ratio": ratio, "required": required })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub h: f64,
    pub support_nodes: Vec<usize>,
    pub separations: Vec<Separation>,
    /// Smallest `|B_r ∩ supp f_i| / |B_r|` over the support boundary.
    pub min_density: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn min_separation(&self) -> Option<f64> {
        self.separations.iter().map(|s| s.distance).reduce(f64::min)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "h = {}", self.h)?;
        for (i, n) in self.support_nodes.iter().enumerate() {
            writeln!(
                f,
                "species {}: {n} support nodes, min density {:.4}",
                i + 1,
                self.min_density[i]
            )?;
        }
        for s in &self.separations {
            writeln!(f, "separation {}-{}: {:.6}", s.i, s.j, s.distance)?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Validation tolerance on the unit separation, relative.
const SEPARATION_SLACK: f64 = 1e-9;

pub fn validate(sc: &Scenario) -> Result<ValidationReport, CliError> {
    let spec = *sc.mask.spec();
    let h = spec.h();
    let r = sc.params.r;
    if !(r > 0.0 && r <= 1.0) {
        return Err(ValidationError::ROutOfRange { r }.into());
    }
    let strip = sc.mask.strip();
    let mut supports = Vec::with_capacity(sc.f.len());
    for (n, f) in sc.f.iter().enumerate() {
        let species = n + 1;
        // NaN counts as negative.
        if let Some(k) = strip.iter().find(|&k| f.at(k).is_nan() || f.at(k) < 0.0) {
            let (x, y) = spec.position_of(k);
            return Err(ValidationError::NegativeBoundaryData {
                species,
                node: k,
                x,
                y,
                value: f.at(k),
            }
            .into());
        }
        let supp = NodeSet::from_indices(spec, strip.iter().filter(|&k| f.at(k) > 0.0));
        if supp.is_empty() {
            return Err(ValidationError::ZeroBoundaryData { species }.into());
        }
        supports.push(supp);
    }

    let mut warnings = Vec::new();
    let mut separations = Vec::new();
    let dists = supports.iter().map(distance_transform).collect::<Result<Vec<_>, _>>()?;
    for (i, si) in supports.iter().enumerate() {
        for (j, dj) in dists.iter().enumerate().skip(i + 1) {
            let (node, distance) = si
                .iter()
                .map(|k| (k, dj.at(k)))
                .fold((usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            if distance < 1.0 - SEPARATION_SLACK {
                let (x, y) = spec.position_of(node);
                return Err(ValidationError::SeparationViolated {
                    i: i + 1,
                    j: j + 1,
                    distance,
                    node,
                    x,
                    y,
                }
                .into());
            }
            if distance <= 1.0 + 2.0 * h {
                warnings.push(format!(
                    "species {} and {} are only {distance:.6} apart, within 2h of the unit separation",
                    i + 1,
                    j + 1
                ));
            }
            separations.push(Separation {
                i: i + 1,
                j: j + 1,
                distance,
            });
        }
    }

    let vc = &sc.config.validation;
    let ball = BallStencil::new(vc.density_r, h).map_err(|e| CliError::Config(e.to_string()))?;
    let mut min_density = Vec::with_capacity(supports.len());
    for (n, supp) in supports.iter().enumerate() {
        let (node, ratio) = worst_density(supp, &ball, &spec);
        if ratio < vc.density_c {
            let (x, y) = spec.position_of(node);
            return Err(ValidationError::DensityConditionFailed {
                species: n + 1,
                node,
                x,
                y,
                ratio,
                required: vc.density_c,
            }
            .into());
        }
        min_density.push(ratio);
    }

    Ok(ValidationReport {
        h,
        support_nodes: supports.iter().map(NodeSet::count).collect(),
        separations,
        min_density,
        warnings,
    })
}

/// Boundary node of `supp` with the smallest covered fraction of its ball.
/// Offsets falling off the grid count as uncovered.
fn worst_density(supp: &NodeSet, ball: &BallStencil, spec: &GridSpec) -> (usize, f64) {
    let offsets: Vec<(i64, i64)> = ball.offsets().collect();
    let total = offsets.len() as f64;
    let mut worst = (usize::MAX, f64::INFINITY);
    for k in supp.boundary().iter() {
        let hits = offsets
            .iter()
            .filter(|&&(di, dj)| spec.offset(k, di, dj).is_some_and(|n| supp.contains(n)))
            .count();
        let ratio = hits as f64 / total;
        if ratio < worst.1 {
            worst = (k, ratio);
        }
    }
    worst
}
