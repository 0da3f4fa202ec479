use alloc::vec::Vec;

use super::AnalysisError;
use crate::grid::{distance_transform, NodeSet, RegionMask, ScalarField};

/// Values at or below this are excluded from log fits.
pub const DECAY_FLOOR: f64 = 1e-14;
pub const MIN_DECAY_SAMPLES: usize = 8;

/// Band of interior nodes facing the boundary patch where a species is fed.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayStrip {
    /// Species whose boundary data defines the patch.
    pub source: usize,
    pub nodes: NodeSet,
    /// `R − d(x, patch)`, so larger means closer to the patch's far edge of
    /// influence.
    pub depth: ScalarField,
    pub inner: f64,
    pub outer: f64,
}

/// Interior nodes at distance in `[τ, R − τ]` from the patch
/// `{f_j ≥ max f_j / 2}` of the strip, and at distance `≥ τ` from the rest
/// of the strip.
pub fn decay_strip(mask: &RegionMask, f_j: &ScalarField, source: usize, tau: f64) -> Result<DecayStrip, AnalysisError> {
    let spec = *mask.spec();
    if *f_j.spec() != spec {
        return Err(AnalysisError::GridMismatch);
    }
    let r = mask.strip_width();
    if !(tau > 0.0 && 2.0 * tau < r) {
        return Err(AnalysisError::InvalidThreshold(tau));
    }
    let strip = mask.strip();
    let fmax = f_j.max_over(&strip).unwrap_or(0.0);
    if !(fmax > 0.0) {
        return Err(AnalysisError::EmptySupport);
    }
    let patch = NodeSet::from_flags(
        spec,
        (0..spec.len())
            .map(|k| strip.contains(k) && f_j.at(k) >= 0.5 * fmax)
            .collect(),
    )?;
    let rest = strip.difference(&patch);
    let d_patch = distance_transform(&patch)?;
    let d_rest = if rest.is_empty() {
        ScalarField::constant(spec, f64::INFINITY)
    } else {
        distance_transform(&rest)?
    };
    let slack = 1e-9 * spec.h();
    let flags = (0..spec.len())
        .map(|k| {
            let d = d_patch.at(k);
            mask.is_interior(k) && d >= tau - slack && d <= r - tau + slack && d_rest.at(k) >= tau - slack
        })
        .collect();
    let depth = d_patch.map(|d| r - d)?;
    Ok(DecayStrip {
        source,
        nodes: NodeSet::from_flags(spec, flags)?,
        depth,
        inner: tau,
        outer: r - tau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Decay rate: minus the slope of `ln u` against depth.
    pub k: f64,
    pub intercept: f64,
    pub rms: f64,
    pub samples: usize,
    pub depth_min: f64,
    pub depth_max: f64,
}

/// Least-squares fit `ln u ≈ intercept − k · depth` over the strip.
pub fn fit_decay(u: &ScalarField, strip: &NodeSet, depth: &ScalarField) -> Result<DecayFit, AnalysisError> {
    if u.spec() != strip.spec() || u.spec() != depth.spec() {
        return Err(AnalysisError::GridMismatch);
    }
    let pts: Vec<(f64, f64)> = strip
        .iter()
        .filter(|&k| u.at(k) > DECAY_FLOOR)
        .map(|k| (depth.at(k), libm::log(u.at(k))))
        .collect();
    if pts.len() < MIN_DECAY_SAMPLES {
        return Err(AnalysisError::InsufficientSamples {
            found: pts.len(),
            needed: MIN_DECAY_SAMPLES,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|&(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    Ok(DecayFit {
        k: -slope,
        intercept,
        rms: libm::sqrt(sse / n),
        samples: pts.len(),
        depth_min: pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        depth_max: pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    })
}

/// `sup / inf` of `u` over the nodes of `B_{r/2}(center)`; every node of
/// `B_r(center)` must be interior.
pub fn harnack_ratio(u: &ScalarField, mask: &RegionMask, center: (f64, f64), r: f64) -> Result<f64, AnalysisError> {
    let spec = *mask.spec();
    if *u.spec() != spec {
        return Err(AnalysisError::GridMismatch);
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(AnalysisError::InvalidThreshold(r));
    }
    let (gx0, gy0, gx1, gy1) = spec.extent();
    let (cx, cy) = center;
    if cx - r < gx0 || cx + r > gx1 || cy - r < gy0 || cy + r > gy1 {
        return Err(AnalysisError::BallEscapesDomain(r));
    }
    let h = spec.h();
    let (ox, oy) = spec.origin();
    let i0 = libm::floor((cx - r - ox) / h).max(0.0) as usize;
    let j0 = libm::floor((cy - r - oy) / h).max(0.0) as usize;
    let i1 = (libm::ceil((cx + r - ox) / h) as usize).min(spec.nx() - 1);
    let j1 = (libm::ceil((cy + r - oy) / h) as usize).min(spec.ny() - 1);
    let tol = 1e-12 * (1.0 + r);
    let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
    for j in j0..=j1 {
        for i in i0..=i1 {
            let (x, y) = spec.position(i, j);
            let d = libm::hypot(x - cx, y - cy);
            if d > r + tol {
                continue;
            }
            let k = spec.index(i, j);
            if !mask.is_interior(k) {
                return Err(AnalysisError::BallEscapesDomain(r));
            }
            if d <= 0.5 * r + tol {
                sup = sup.max(u.at(k));
                inf = inf.min(u.at(k));
            }
        }
    }
    if sup == f64::NEG_INFINITY {
        return Err(AnalysisError::BallEscapesDomain(r));
    }
    Ok(sup / inf.max(1e-300))
}
