use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::decay::{decay_strip, fit_decay, harnack_ratio, DecayFit};
use super::perimeter::{perimeter_and_ratio, PerimeterRow};
use super::support::{
    containment_check, default_sigma, exterior_ball_check, far_and_near, support_gap, ContainmentReport,
    ExteriorBallReport, SupportGap, SupportSet,
};
use super::AnalysisError;
use crate::grid::{distance_transform, NodeSet, RegionMask, ScalarField};
use crate::nonlocal::{h_apply, BallStencil, KernelKind};
use crate::pucci::{discrete_pucci_minus, FrameSet};
use crate::solver::{SolveParams, SpeciesState};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    /// Support threshold; `None` uses [`default_sigma`] per species.
    pub sigma: Option<f64>,
    /// Proxy strip width as a fraction of `R`.
    pub tau_fraction: f64,
    /// Dilation radii; those below `4h` are skipped.
    pub perimeter_t: Vec<f64>,
    pub exterior_ball: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            sigma: None,
            tau_fraction: 0.25,
            perimeter_t: alloc::vec![0.05, 0.1, 0.2],
            exterior_ball: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackSample {
    pub center: (f64, f64),
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesGeometry {
    /// Zero-based species index.
    pub species: usize,
    pub sigma: f64,
    pub support_nodes: usize,
    pub far_empty: bool,
    pub ball_union_mismatches: usize,
    pub ball_union_outside_collar: usize,
    /// `None` when the support is empty.
    pub containment: Option<ContainmentReport>,
    pub exterior_ball: Option<ExteriorBallReport>,
    pub edge_perimeter: f64,
    pub perimeter: Vec<PerimeterRow>,
    /// Fits of this species' decay towards each other species' boundary patch.
    pub decay: Vec<(usize, Result<DecayFit, AnalysisError>)>,
    pub safe_nodes: usize,
    /// `max |M⁻_h u_i|` over the safe region.
    pub safe_residual: f64,
    /// Largest central-difference gradient over the safe region.
    pub max_gradient: f64,
    pub harnack: Option<HarnackSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGap {
    pub i: usize,
    pub j: usize,
    pub gap: SupportGap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub eps: f64,
    pub r: f64,
    pub h: f64,
    pub tau: f64,
    /// `max_{i≠j} max_x min(u_i, H_R(u_j))`.
    pub overlap: f64,
    pub species: Vec<SpeciesGeometry>,
    pub gaps: Vec<PairGap>,
}

impl GeometryReport {
    pub fn min_gap(&self) -> f64 {
        self.gaps.iter().map(|g| g.gap.value).fold(f64::INFINITY, f64::min)
    }

    /// Flat `(metric, species, value)` rows; species labels are one-based,
    /// `i-j` for pairs and `all` for global metrics.
    pub fn rows(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        let all = || String::from("all");
        out.push((String::from("eps"), all(), self.eps));
        out.push((String::from("R"), all(), self.r));
        out.push((String::from("h"), all(), self.h));
        out.push((String::from("tau"), all(), self.tau));
        out.push((String::from("overlap"), all(), self.overlap));
        for g in &self.gaps {
            let label = format!("{}-{}", g.i + 1, g.j + 1);
            out.push((String::from("support_gap"), label.clone(), g.gap.value));
            out.push((String::from("support_gap_flagged"), label, flag(g.gap.flagged)));
        }
        for s in &self.species {
            let label = format!("{}", s.species + 1);
            let mut push = |m: String, v: f64| out.push((m, label.clone(), v));
            push(String::from("sigma"), s.sigma);
            push(String::from("support_nodes"), s.support_nodes as f64);
            push(String::from("far_empty"), flag(s.far_empty));
            push(String::from("ball_union_mismatches"), s.ball_union_mismatches as f64);
            push(
                String::from("ball_union_outside_collar"),
                s.ball_union_outside_collar as f64,
            );
            if let Some(c) = &s.containment {
                push(String::from("containment_passed"), flag(c.passed));
                push(String::from("containment_uncovered"), c.uncovered as f64);
                push(String::from("containment_max_offset"), c.max_offset);
            }
            if let Some(e) = &s.exterior_ball {
                push(String::from("exterior_ball_checked"), e.checked as f64);
                push(String::from("exterior_ball_pass_rate"), e.pass_rate);
                push(String::from("exterior_ball_worst_shortfall"), e.worst_shortfall);
            }
            push(String::from("edge_perimeter"), s.edge_perimeter);
            for p in &s.perimeter {
                push(format!("ut_over_t@{}", p.t), p.ut_over_t);
                push(format!("edge_perimeter_t@{}", p.t), p.edge_perimeter);
                push(format!("perimeter_ratio@{}", p.t), p.ratio);
            }
            for (j, fit) in &s.decay {
                match fit {
                    Ok(fit) => {
                        push(format!("decay_k@{}", j + 1), fit.k);
                        push(format!("decay_rms@{}", j + 1), fit.rms);
                        push(format!("decay_samples@{}", j + 1), fit.samples as f64);
                    }
                    Err(_) => push(format!("decay_samples@{}", j + 1), 0.0),
                }
            }
            push(String::from("safe_nodes"), s.safe_nodes as f64);
            push(String::from("safe_residual"), s.safe_residual);
            push(String::from("max_gradient"), s.max_gradient);
            if let Some(hs) = &s.harnack {
                push(String::from("harnack_radius"), hs.radius);
                push(String::from("harnack_ratio"), hs.ratio);
            }
        }
        out
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl fmt::Display for GeometryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "geometry report: eps = {}, R = {}, h = {}, tau = {}",
            self.eps, self.r, self.h, self.tau
        )?;
        writeln!(f, "  overlap max min(u_i, H(u_j)) = {:.6e}", self.overlap)?;
        for g in &self.gaps {
            let note = if g.gap.flagged { " (empty support)" } else { "" };
            writeln!(f, "  gap({}, {}) = {:.6}{}", g.i + 1, g.j + 1, g.gap.value, note)?;
        }
        for s in &self.species {
            writeln!(
                f,
                "  species {} (sigma = {:.6e}, {} support nodes)",
                s.species + 1,
                s.sigma,
                s.support_nodes
            )?;
            match &s.containment {
                Some(c) => writeln!(
                    f,
                    "    containment: {} (uncovered {}, max offset {:.6})",
                    if c.passed { "pass" } else { "FAIL" },
                    c.uncovered,
                    c.max_offset
                )?,
                None => writeln!(f, "    containment: n/a")?,
            }
            if s.far_empty {
                writeln!(f, "    far set empty, near set taken empty")?;
            }
            if let Some(e) = &s.exterior_ball {
                writeln!(
                    f,
                    "    exterior ball: {}/{} (rate {:.4}, worst shortfall {:.6})",
                    e.passed, e.checked, e.pass_rate, e.worst_shortfall
                )?;
            }
            for p in &s.perimeter {
                writeln!(
                    f,
                    "    t = {}: |U_t|/t = {:.6}, edge perimeter {:.6}, ratio {:.4}",
                    p.t, p.ut_over_t, p.edge_perimeter, p.ratio
                )?;
            }
            for (j, fit) in &s.decay {
                match fit {
                    Ok(d) => writeln!(
                        f,
                        "    decay towards {}: k = {:.6}, rms {:.3e}, {} samples",
                        j + 1,
                        d.k,
                        d.rms,
                        d.samples
                    )?,
                    Err(e) => writeln!(f, "    decay towards {}: {}", j + 1, e)?,
                }
            }
            writeln!(
                f,
                "    safe region: {} nodes, max |M-u| = {:.6e}, max |grad u| = {:.6}",
                s.safe_nodes, s.safe_residual, s.max_gradient
            )?;
            if let Some(hs) = &s.harnack {
                writeln!(f, "    harnack ratio {:.6} (radius {:.4})", hs.ratio, hs.radius)?;
            }
        }
        Ok(())
    }
}

/// `max_{i≠j} max_x min(u_i(x), H_R(u_j)(x))` over interior nodes.
pub fn overlap_metric(
    u: &[ScalarField],
    kind: KernelKind,
    stencil: &BallStencil,
    mask: &RegionMask,
) -> Result<f64, AnalysisError> {
    let h: Vec<ScalarField> = u
        .iter()
        .map(|w| h_apply(w, kind, stencil, mask))
        .collect::<Result<_, _>>()?;
    let interior = mask.interior_indices();
    let mut best = 0.0f64;
    for (i, ui) in u.iter().enumerate() {
        for (j, hj) in h.iter().enumerate() {
            if i == j {
                continue;
            }
            for &k in &interior {
                best = best.max(ui.at(k).min(hj.at(k)));
            }
        }
    }
    Ok(best)
}

/// Interior nodes with `u > 0.1 · max u` lying further than `R` from
/// `others`.
pub fn safe_region(u: &ScalarField, others: &NodeSet, mask: &RegionMask) -> Result<NodeSet, AnalysisError> {
    let spec = *mask.spec();
    if *u.spec() != spec || *others.spec() != spec {
        return Err(AnalysisError::GridMismatch);
    }
    let interior = mask.interior();
    let umax = u.max_over(&interior).unwrap_or(0.0);
    let r = mask.strip_width();
    let d = if others.is_empty() {
        None
    } else {
        Some(distance_transform(others)?)
    };
    let flags = (0..spec.len())
        .map(|k| interior.contains(k) && u.at(k) > 0.1 * umax && d.as_ref().is_none_or(|d| d.at(k) > r * (1.0 + 1e-9)))
        .collect();
    Ok(NodeSet::from_flags(spec, flags)?)
}

fn max_gradient(u: &ScalarField, nodes: &NodeSet) -> f64 {
    let spec = *u.spec();
    let h2 = 2.0 * spec.h();
    let mut best = 0.0f64;
    for k in nodes.iter() {
        let diff = |di: i64, dj: i64| match (spec.offset(k, di, dj), spec.offset(k, -di, -dj)) {
            (Some(a), Some(b)) => (u.at(a) - u.at(b)) / h2,
            _ => 0.0,
        };
        best = best.max(libm::hypot(diff(1, 0), diff(0, 1)));
    }
    best
}

fn harnack_sample(u: &ScalarField, safe: &NodeSet, mask: &RegionMask) -> Result<Option<HarnackSample>, AnalysisError> {
    let spec = *mask.spec();
    let h = spec.h();
    let outside = mask.interior().complement();
    if outside.is_empty() || safe.is_empty() {
        return Ok(None);
    }
    let d_out = distance_transform(&outside)?;
    let mut best: Option<usize> = None;
    for k in safe.iter() {
        if best.is_none_or(|b| d_out.at(k) > d_out.at(b)) {
            best = Some(k);
        }
    }
    let Some(k) = best else { return Ok(None) };
    let radius = (d_out.at(k) - h).min(0.5 * mask.strip_width());
    if radius < 4.0 * h {
        return Ok(None);
    }
    let center = spec.position_of(k);
    match harnack_ratio(u, mask, center, radius) {
        Ok(ratio) => Ok(Some(HarnackSample { center, radius, ratio })),
        Err(AnalysisError::BallEscapesDomain(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Full geometric diagnostic of a computed state.
pub fn analyze_state(
    state: &SpeciesState,
    params: &SolveParams,
    mask: &RegionMask,
    frames: &FrameSet,
    stencil: &BallStencil,
    opts: &AnalysisOptions,
) -> Result<GeometryReport, AnalysisError> {
    let spec = *mask.spec();
    let h = spec.h();
    let r = mask.strip_width();
    let tau = opts.tau_fraction * r;
    let k = state.u.len();
    if state.f.len() != k || state.u.iter().chain(&state.f).any(|w| *w.spec() != spec) {
        return Err(AnalysisError::GridMismatch);
    }
    let strip = mask.strip();

    let mut supports = Vec::with_capacity(k);
    for i in 0..k {
        let fmax = state.f[i].max_over(&strip).unwrap_or(0.0);
        let sigma = opts.sigma.unwrap_or_else(|| default_sigma(h, fmax, params.eps));
        supports.push(SupportSet::from_field(&state.u[i], mask, sigma, i)?);
    }
    let mut all = NodeSet::empty(spec);
    for s in &supports {
        all = all.union(s.nodes());
    }

    let mut gaps = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            gaps.push(PairGap {
                i,
                j,
                gap: support_gap(&supports[i], &supports[j])?,
            });
        }
    }

    // Where each species is fed: boundary data above its threshold.
    let fed: Vec<NodeSet> = (0..k)
        .map(|i| {
            let sigma = supports[i].sigma();
            NodeSet::from_flags(
                spec,
                (0..spec.len())
                    .map(|n| strip.contains(n) && state.f[i].at(n) > sigma)
                    .collect(),
            )
        })
        .collect::<Result<_, _>>()?;
    let residual = state
        .u
        .iter()
        .map(|u| discrete_pucci_minus(u, mask, &params.ell, frames))
        .collect::<Result<Vec<_>, _>>()?;

    let mut species = Vec::with_capacity(k);
    for i in 0..k {
        let s = &supports[i];
        let mut geo = SpeciesGeometry {
            species: i,
            sigma: s.sigma(),
            support_nodes: s.nodes().count(),
            far_empty: false,
            ball_union_mismatches: 0,
            ball_union_outside_collar: 0,
            containment: None,
            exterior_ball: None,
            edge_perimeter: s.nodes().exposed_faces() as f64 * h,
            perimeter: Vec::new(),
            decay: Vec::new(),
            safe_nodes: 0,
            safe_residual: 0.0,
            max_gradient: 0.0,
            harnack: None,
        };
        if !s.is_empty() {
            let fan = far_and_near(s, r, mask)?;
            geo.far_empty = fan.far_empty;
            geo.ball_union_mismatches = fan.ball_union_mismatches;
            geo.ball_union_outside_collar = fan.ball_union_outside_collar;
            geo.containment = Some(containment_check(s.nodes(), &fan.near)?);
            if opts.exterior_ball {
                geo.exterior_ball = Some(exterior_ball_check(s, r, &all, mask)?);
            }
            let ts: Vec<f64> = opts.perimeter_t.iter().copied().filter(|&t| t >= 4.0 * h).collect();
            geo.perimeter = perimeter_and_ratio(s.nodes(), &ts)?;
        }
        for j in (0..k).filter(|&j| j != i) {
            let fit =
                decay_strip(mask, &state.f[j], j, tau).and_then(|ds| fit_decay(&state.u[i], &ds.nodes, &ds.depth));
            geo.decay.push((j, fit));
        }
        let mut others = NodeSet::empty(spec);
        for j in (0..k).filter(|&j| j != i) {
            others = others.union(supports[j].nodes()).union(&fed[j]);
        }
        let safe = safe_region(&state.u[i], &others, mask)?;
        geo.safe_nodes = safe.count();
        geo.safe_residual = residual[i].max_abs(Some(&safe));
        geo.max_gradient = max_gradient(&state.u[i], &safe);
        geo.harnack = harnack_sample(&state.u[i], &safe, mask)?;
        species.push(geo);
    }

    Ok(GeometryReport {
        eps: params.eps,
        r,
        h,
        tau,
        overlap: overlap_metric(&state.u, params.kind, stencil, mask)?,
        species,
        gaps,
    })
}
