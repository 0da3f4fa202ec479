use alloc::vec::Vec;

use super::AnalysisError;
use crate::grid::{distance_transform, squared_index_distance, NodeClass, NodeSet, RegionMask, ScalarField};
use crate::nonlocal::BallStencil;

/// Relative slack on distance comparisons against `R`; lattice distances hit
/// `R` exactly whenever `R/h` is an integer.
const DIST_TOL: f64 = 1e-9;

/// Interior nodes where a density exceeds its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    nodes: NodeSet,
    sigma: f64,
    species: usize,
}

impl SupportSet {
    pub fn from_field(u: &ScalarField, mask: &RegionMask, sigma: f64, species: usize) -> Result<Self, AnalysisError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(AnalysisError::InvalidThreshold(sigma));
        }
        if u.spec() != mask.spec() {
            return Err(AnalysisError::GridMismatch);
        }
        let flags = (0..u.values().len())
            .map(|k| mask.is_interior(k) && u.at(k) > sigma)
            .collect();
        Ok(Self {
            nodes: NodeSet::from_flags(*u.spec(), flags)?,
            sigma,
            species,
        })
    }

    /// Wraps an explicit node set (synthetic shapes).
    pub fn from_nodes(nodes: NodeSet, sigma: f64, species: usize) -> Self {
        Self { nodes, sigma, species }
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `max(2h · max f, √ε)`.
pub fn default_sigma(h: f64, f_max: f64, eps: f64) -> f64 {
    (2.0 * h * f_max).max(libm::sqrt(eps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportGap {
    /// `+∞` when either set is empty.
    pub value: f64,
    pub flagged: bool,
}

/// `min_{x ∈ Si} d(x, Sj)`.
pub fn support_gap(si: &SupportSet, sj: &SupportSet) -> Result<SupportGap, AnalysisError> {
    if si.nodes.spec() != sj.nodes.spec() {
        return Err(AnalysisError::GridMismatch);
    }
    if si.is_empty() || sj.is_empty() {
        return Ok(SupportGap {
            value: f64::INFINITY,
            flagged: true,
        });
    }
    let d = distance_transform(&sj.nodes)?;
    let value = si.nodes.iter().map(|k| d.at(k)).fold(f64::INFINITY, f64::min);
    Ok(SupportGap { value, flagged: false })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarNear {
    /// Nodes at distance `≥ R` from the support.
    pub far: NodeSet,
    /// Interior nodes at distance `≥ R` from `far`; empty when `far` is.
    pub near: NodeSet,
    pub far_empty: bool,
    /// Nodes where the complement of `far` and the union of open `R`-balls
    /// around support nodes disagree.
    pub ball_union_mismatches: usize,
    /// Mismatches further than one node from the level set `d = R`.
    pub ball_union_outside_collar: usize,
}

/// Far set `F = {d(·, S) ≥ R}` and near set `N = {x ∈ Ω : d(x, F) ≥ R}`.
pub fn far_and_near(s: &SupportSet, r: f64, mask: &RegionMask) -> Result<FarNear, AnalysisError> {
    if s.is_empty() {
        return Err(AnalysisError::EmptySupport);
    }
    let spec = *s.nodes.spec();
    if spec != *mask.spec() {
        return Err(AnalysisError::GridMismatch);
    }
    let h = spec.h();
    let ratio2 = (r / h) * (r / h);
    let d2 = squared_index_distance(&s.nodes)?;
    let far_flags: Vec<bool> = d2.iter().map(|&q| q >= ratio2 * (1.0 - DIST_TOL)).collect();
    let far = NodeSet::from_flags(spec, far_flags)?;

    // Union of open balls, stamped row by row.
    let open_ball = BallStencil::new(r * (1.0 - 2.0 * DIST_TOL), h)?;
    let mut covered = NodeSet::empty(spec);
    for k in s.nodes.iter() {
        let (i, j) = spec.coords(k);
        for &(b, a) in open_ball.rows() {
            let jj = j as i64 + b;
            if jj < 0 || jj >= spec.ny() as i64 {
                continue;
            }
            let lo = (i as i64 - a).max(0) as usize;
            let hi = (i as i64 + a).min(spec.nx() as i64 - 1) as usize;
            for ii in lo..=hi {
                covered.insert(spec.index(ii, jj as usize));
            }
        }
    }
    let collar = libm::sqrt(2.0) * h;
    let mut mismatches = 0;
    let mut outside_collar = 0;
    for k in 0..spec.len() {
        if covered.contains(k) == far.contains(k) {
            mismatches += 1;
            if libm::fabs(h * libm::sqrt(d2[k]) - r) > collar {
                outside_collar += 1;
            }
        }
    }

    let far_empty = far.is_empty();
    let near = if far_empty {
        NodeSet::empty(spec)
    } else {
        let df2 = squared_index_distance(&far)?;
        let flags = (0..spec.len())
            .map(|k| mask.class(k) == NodeClass::Interior && df2[k] >= ratio2 * (1.0 - DIST_TOL))
            .collect();
        NodeSet::from_flags(spec, flags)?
    };
    Ok(FarNear {
        far,
        near,
        far_empty,
        ball_union_mismatches: mismatches,
        ball_union_outside_collar: outside_collar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContainmentReport {
    pub subset: bool,
    /// Support nodes missing from the near set.
    pub uncovered: usize,
    /// Largest distance from a boundary node of `S` to the boundary of `N`.
    pub max_offset: f64,
    pub near_empty: bool,
    pub passed: bool,
}

/// Checks `S ⊆ N` and that every boundary node of `S` lies within `√2·h`
/// of the boundary of `N`.
pub fn containment_check(s: &NodeSet, n: &NodeSet) -> Result<ContainmentReport, AnalysisError> {
    if s.spec() != n.spec() {
        return Err(AnalysisError::GridMismatch);
    }
    let h = s.spec().h();
    let uncovered = s.difference(n).count();
    if n.is_empty() {
        return Ok(ContainmentReport {
            subset: uncovered == 0,
            uncovered,
            max_offset: f64::INFINITY,
            near_empty: true,
            passed: false,
        });
    }
    let dn = distance_transform(&n.boundary())?;
    let max_offset = s.boundary().iter().map(|k| dn.at(k)).fold(0.0, f64::max);
    let passed = uncovered == 0 && max_offset <= libm::sqrt(2.0) * h * (1.0 + DIST_TOL);
    Ok(ContainmentReport {
        subset: uncovered == 0,
        uncovered,
        max_offset,
        near_empty: false,
        passed,
    })
}

/// Support nodes with a 4-neighbour in the interior outside the support.
pub fn free_boundary(s: &NodeSet, mask: &RegionMask) -> NodeSet {
    let spec = *s.spec();
    let mut out = NodeSet::empty(spec);
    for k in s.iter() {
        let exposed = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(di, dj)| {
            spec.offset(k, di, dj)
                .is_some_and(|n| mask.is_interior(n) && !s.contains(n))
        });
        if exposed {
            out.insert(k);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExteriorBallReport {
    pub checked: usize,
    pub passed: usize,
    /// `passed / checked`, 1 when there is nothing to check.
    pub pass_rate: f64,
    /// Largest `(R − 2h) − best clearance` among failing nodes.
    pub worst_shortfall: f64,
    pub worst_node: Option<usize>,
}

/// For each free-boundary node `x₀` of `s`, looks for a centre `y` on the
/// discrete circle of radius `R` around `x₀` whose closed ball of radius
/// `R − 2h` holds no node of `all_supports`.
pub fn exterior_ball_check(
    s: &SupportSet,
    r: f64,
    all_supports: &NodeSet,
    mask: &RegionMask,
) -> Result<ExteriorBallReport, AnalysisError> {
    if s.is_empty() {
        return Err(AnalysisError::EmptySupport);
    }
    let spec = *s.nodes.spec();
    if spec != *all_supports.spec() || spec != *mask.spec() {
        return Err(AnalysisError::GridMismatch);
    }
    let h = spec.h();
    let clearance_needed = r - 2.0 * h;
    let d_all = distance_transform(all_supports)?;
    let steps = libm::ceil(2.0 * core::f64::consts::PI * r / h).max(8.0) as usize;
    let dirs: Vec<(f64, f64)> = (0..steps)
        .map(|m| {
            let th = 2.0 * core::f64::consts::PI * m as f64 / steps as f64;
            (r * libm::cos(th), r * libm::sin(th))
        })
        .collect();

    let boundary = free_boundary(&s.nodes, mask);
    let mut report = ExteriorBallReport {
        checked: 0,
        passed: 0,
        pass_rate: 1.0,
        worst_shortfall: 0.0,
        worst_node: None,
    };
    for k in boundary.iter() {
        let (x, y) = spec.position_of(k);
        let best = dirs
            .iter()
            .filter_map(|&(dx, dy)| spec.nearest_node(x + dx, y + dy))
            .map(|c| d_all.at(c))
            .fold(f64::NEG_INFINITY, f64::max);
        report.checked += 1;
        if best > clearance_needed {
            report.passed += 1;
        } else {
            let shortfall = clearance_needed - best;
            if report.worst_node.is_none() || shortfall > report.worst_shortfall {
                report.worst_shortfall = shortfall;
                report.worst_node = Some(k);
            }
        }
    }
    if report.checked > 0 {
        report.pass_rate = report.passed as f64 / report.checked as f64;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mask, DomainSpec, GridSpec};

    fn big_mask(h: f64) -> RegionMask {
        let dom = DomainSpec::rect(-2.0, -2.0, 2.0, 2.0).unwrap();
        build_mask(&dom, 0.5, dom.covering_grid(0.5, h).unwrap()).unwrap()
    }

    fn disc(spec: GridSpec, cx: f64, cy: f64, r: f64) -> NodeSet {
        NodeSet::from_positions(spec, |x, y| (x - cx).powi(2) + (y - cy).powi(2) <= r * r)
    }

    #[test]
    fn gap_between_rectangles_matches_brute_force() {
        let h = 1.0 / 32.0;
        let mask = big_mask(h);
        let spec = *mask.spec();
        let a = NodeSet::from_positions(spec, |x, y| (-1.5..=-0.5).contains(&x) && (-0.5..=0.5).contains(&y));
        let b = NodeSet::from_positions(spec, |x, y| (0.5..=1.5).contains(&x) && (-0.5..=0.5).contains(&y));
        let sa = SupportSet::from_nodes(a.clone(), 0.1, 1);
        let sb = SupportSet::from_nodes(b.clone(), 0.1, 2);
        let gap = support_gap(&sa, &sb).unwrap();
        let mut brute = f64::INFINITY;
        for p in a.iter() {
            let (px, py) = spec.position_of(p);
            for q in b.iter() {
                let (qx, qy) = spec.position_of(q);
                brute = brute.min(((px - qx).powi(2) + (py - qy).powi(2)).sqrt());
            }
        }
        assert!((gap.value - brute).abs() < 1e-12);
        assert!((1.0 - h..=1.0 + h).contains(&gap.value));
        assert_eq!(support_gap(&sa, &sa).unwrap().value, 0.0);
        let empty = SupportSet::from_nodes(NodeSet::empty(spec), 0.1, 3);
        let g = support_gap(&empty, &sb).unwrap();
        assert!(g.flagged && g.value.is_infinite());
    }

    #[test]
    fn disc_is_its_own_near_set() {
        let h = 0.02;
        let mask = big_mask(h);
        let spec = *mask.spec();
        let s = SupportSet::from_nodes(disc(spec, 0.0, 0.0, 0.6), 0.1, 1);
        let fan = far_and_near(&s, 0.5, &mask).unwrap();
        assert!(!fan.far_empty);
        assert_eq!(fan.ball_union_outside_collar, 0);
        assert!(s.nodes().is_subset(&fan.near));
        // Closing a disc adds at most a one-node collar.
        let extra = fan.near.difference(s.nodes());
        let ds = distance_transform(s.nodes()).unwrap();
        assert!(extra.iter().all(|k| ds.at(k) <= 2f64.sqrt() * h));
        let rep = containment_check(s.nodes(), &fan.near).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn distant_discs_close_separately() {
        let h = 0.02;
        let mask = big_mask(h);
        let spec = *mask.spec();
        let r = 0.3;
        let two = disc(spec, -1.0, 0.0, 0.4).union(&disc(spec, 1.0, 0.0, 0.4));
        let fan = far_and_near(&SupportSet::from_nodes(two.clone(), 0.1, 1), r, &mask).unwrap();
        // Gap 1.2 > 2R, so the midpoint is far and each half closes on its own.
        assert!(fan.far.contains(spec.nearest_node(0.0, 0.0).unwrap()));
        for (cx, half) in [(-1.0, disc(spec, -1.0, 0.0, 0.4)), (1.0, disc(spec, 1.0, 0.0, 0.4))] {
            let own = far_and_near(&SupportSet::from_nodes(half, 0.1, 1), r, &mask).unwrap();
            let side = NodeSet::from_positions(spec, |x, _| (x - cx).abs() < 0.9);
            assert_eq!(fan.near.intersection(&side), own.near.intersection(&side));
        }
    }

    #[test]
    fn covering_support_has_no_far_set() {
        let dom = DomainSpec::rect(0.0, 0.0, 0.2, 0.2).unwrap();
        let mask = build_mask(&dom, 1.0, dom.covering_grid(1.0, 0.05).unwrap()).unwrap();
        let s = SupportSet::from_nodes(NodeSet::full(*mask.spec()), 0.1, 1);
        let fan = far_and_near(&s, 1.0, &mask).unwrap();
        assert!(fan.far_empty);
        assert!(fan.near.is_empty());
        assert!(!containment_check(s.nodes(), &fan.near).unwrap().passed);
    }

    #[test]
    fn spike_fails_containment() {
        let h = 0.02;
        let mask = big_mask(h);
        let spec = *mask.spec();
        let mut s = disc(spec, 0.0, 0.0, 0.5);
        for i in 0..20 {
            s.insert(spec.nearest_node(0.5 + i as f64 * h, 0.0).unwrap());
        }
        let fan = far_and_near(&SupportSet::from_nodes(s.clone(), 0.1, 1), 0.5, &mask).unwrap();
        let rep = containment_check(&s, &fan.near).unwrap();
        assert!(rep.subset);
        assert!(!rep.passed);
    }

    #[test]
    fn flat_and_round_supports_have_exterior_balls() {
        let h = 0.02;
        let mask = big_mask(h);
        let spec = *mask.spec();
        let half = SupportSet::from_nodes(
            NodeSet::from_positions(spec, |x, _| x <= 0.0).intersection(&mask.interior()),
            0.1,
            1,
        );
        let rep = exterior_ball_check(&half, 0.5, half.nodes(), &mask).unwrap();
        assert!(rep.checked > 0);
        assert_eq!(rep.pass_rate, 1.0);
        let d = SupportSet::from_nodes(disc(spec, 0.0, 0.0, 0.5), 0.1, 1);
        let rep = exterior_ball_check(&d, 0.5, d.nodes(), &mask).unwrap();
        assert_eq!(rep.pass_rate, 1.0);
    }

    #[test]
    fn notch_fails_exterior_ball() {
        let h = 0.02;
        let mask = big_mask(h);
        let spec = *mask.spec();
        // A disc with a narrow slot has no room for an R-ball inside the slot.
        let nodes =
            disc(spec, 0.0, 0.0, 1.0).difference(&NodeSet::from_positions(spec, |x, y| x > 0.0 && y.abs() < 0.1));
        let s = SupportSet::from_nodes(nodes, 0.1, 1);
        let rep = exterior_ball_check(&s, 0.5, s.nodes(), &mask).unwrap();
        assert!(rep.pass_rate < 1.0);
        assert!(rep.worst_shortfall > 0.0);
    }
}
