use alloc::boxed::Box;
use alloc::vec::Vec;

use super::dirichlet::DirichletSolver;
use super::SolveError;
use crate::grid::{NodeClass, NodeSet, RegionMask, ScalarField};
use crate::nonlocal::{h_apply, BallStencil, KernelKind};
use crate::pucci::{discrete_pucci_minus, EllipticityPair, FrameSet};

/// Order in which species are refreshed within one fixed-point sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpeciesUpdate {
    /// All species use the previous iterate (the map `T^ε` itself).
    #[default]
    Jacobi,
    /// Species `i` sees the already updated species `j < i`.
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    pub ell: EllipticityPair,
    /// Interaction radius, also the strip width.
    pub r: f64,
    pub eps: f64,
    pub kind: KernelKind,
    pub species: usize,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub inner_max: usize,
    pub outer_max: usize,
    pub damping: f64,
    pub species_update: SpeciesUpdate,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            ell: EllipticityPair::default(),
            r: 1.0,
            eps: 0.1,
            kind: KernelKind::Avg { p: 1.0 },
            species: 2,
            inner_tol: 1e-10,
            outer_tol: 1e-8,
            inner_max: 100,
            outer_max: 2000,
            damping: 0.8,
            species_update: SpeciesUpdate::Jacobi,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(SolveError::InvalidParams("R must lie in (0, 1]"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(SolveError::InvalidParams("eps must be positive"));
        }
        if self.species == 0 {
            return Err(SolveError::InvalidParams("need at least one species"));
        }
        if !(self.inner_tol > 0.0 && self.outer_tol > 0.0) {
            return Err(SolveError::InvalidParams("tolerances must be positive"));
        }
        if self.inner_max == 0 || self.outer_max == 0 {
            return Err(SolveError::InvalidParams("iteration caps must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolveError::InvalidParams("damping must lie in (0, 1]"));
        }
        if let KernelKind::Avg { p } = self.kind {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(SolveError::InvalidParams("kernel exponent must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }
}

/// Densities, boundary data and barriers of all species.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesState {
    pub u: Vec<ScalarField>,
    pub f: Vec<ScalarField>,
    pub phi: Vec<ScalarField>,
}

impl SpeciesState {
    /// Computes the barriers `M⁻_h φ_i = 0`, `φ_i = f_i` on the strip, and
    /// starts from `u = φ`.
    pub fn with_barriers(
        f: Vec<ScalarField>,
        mask: &RegionMask,
        frames: &FrameSet,
        params: &SolveParams,
    ) -> Result<Self, SolveError> {
        params.validate()?;
        if f.len() != params.species {
            return Err(SolveError::SpeciesMismatch {
                expected: params.species,
                got: f.len(),
            });
        }
        let solver = DirichletSolver::new(mask, params.ell, frames)?;
        let zero = ScalarField::zeros(*mask.spec());
        let mut phi = Vec::with_capacity(f.len());
        for fi in &f {
            phi.push(solver.solve(&zero, fi, None, params.inner_tol, params.inner_max)?.0);
        }
        Ok(Self { u: phi.clone(), f, phi })
    }

    pub fn species(&self) -> usize {
        self.u.len()
    }

    /// Largest `u_i − φ_i` and smallest `u_i` over all species and nodes.
    pub fn containment(&self) -> (f64, f64) {
        let mut over = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for (u, phi) in self.u.iter().zip(&self.phi) {
            for (a, b) in u.values().iter().zip(phi.values()) {
                over = over.max(a - b);
                min = min.min(*a);
            }
        }
        (over, min)
    }

    /// `u_i = f_i` on the strip and `0 ≤ u_i ≤ φ_i + tol`.
    pub fn validate(&self, mask: &RegionMask, tol: f64) -> Result<(), SolveError> {
        if self.f.len() != self.u.len() || self.phi.len() != self.u.len() {
            return Err(SolveError::InvalidState("species vectors differ in length"));
        }
        for i in 0..self.u.len() {
            if self.u[i].spec() != mask.spec() || self.f[i].spec() != mask.spec() {
                return Err(SolveError::GridMismatch);
            }
            for k in 0..mask.spec().len() {
                if mask.class(k) == NodeClass::Strip && self.u[i].at(k) != self.f[i].at(k) {
                    return Err(SolveError::InvalidState("u differs from f on the strip"));
                }
            }
        }
        let (over, min) = self.containment();
        if over > tol || min < 0.0 {
            return Err(SolveError::InvalidState("u leaves [0, phi]"));
        }
        Ok(())
    }
}

/// Slack allowed above the barrier when validating converged states.
pub const CONTAINMENT_TOL: f64 = 1e-8;

/// Interior nodes where `u ≤ floor` although `u > floor` somewhere on the
/// same 4-connected interior component.
pub fn strong_minimum_flags(u: &ScalarField, mask: &RegionMask, floor: f64) -> Result<NodeSet, SolveError> {
    let spec = *mask.spec();
    if *u.spec() != spec {
        return Err(SolveError::GridMismatch);
    }
    let mut flagged = NodeSet::empty(spec);
    let mut seen = alloc::vec![false; spec.len()];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in mask.interior_indices() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        component.clear();
        while let Some(k) = stack.pop() {
            component.push(k);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(n) = spec.offset(k, di, dj) {
                    if !seen[n] && mask.is_interior(n) {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        if component.iter().any(|&k| u.at(k) > floor) {
            for &k in &component {
                if u.at(k) <= floor {
                    flagged.insert(k);
                }
            }
        }
    }
    Ok(flagged)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationReport {
    pub iterations: usize,
    /// Sup-norm change per outer iteration.
    pub deltas: Vec<f64>,
    /// System residual after each outer iteration.
    pub residuals: Vec<f64>,
    pub final_residual: f64,
    pub converged: bool,
    /// Largest `u_i − φ_i` seen over all iterates.
    pub max_barrier_excess: f64,
    /// Smallest `u_i` seen over all iterates.
    pub min_value: f64,
    pub policy_iterations: usize,
    pub krylov_iterations: usize,
}

fn check_state(state: &SpeciesState, params: &SolveParams, mask: &RegionMask) -> Result<(), SolveError> {
    params.validate()?;
    if state.species() != params.species {
        return Err(SolveError::SpeciesMismatch {
            expected: params.species,
            got: state.species(),
        });
    }
    if state
        .u
        .iter()
        .chain(&state.f)
        .chain(&state.phi)
        .any(|w| w.spec() != mask.spec())
    {
        return Err(SolveError::GridMismatch);
    }
    Ok(())
}

fn interactions(
    u: &[ScalarField],
    kind: KernelKind,
    stencil: &BallStencil,
    mask: &RegionMask,
) -> Result<Vec<ScalarField>, SolveError> {
    u.iter()
        .map(|w| h_apply(w, kind, stencil, mask).map_err(SolveError::from))
        .collect()
}

/// `c_i = (1/ε²) Σ_{j≠i} H_R(u_j)` given the precomputed `H_R(u_j)`.
fn coefficient(h: &[ScalarField], i: usize, eps: f64) -> Result<ScalarField, SolveError> {
    let spec = *h[0].spec();
    let inv = 1.0 / (eps * eps);
    let mut c = alloc::vec![0.0; spec.len()];
    for (j, hj) in h.iter().enumerate() {
        if j == i {
            continue;
        }
        for (ck, hk) in c.iter_mut().zip(hj.values()) {
            *ck += hk;
        }
    }
    c.iter_mut().for_each(|v| *v *= inv);
    Ok(ScalarField::from_values(spec, c)?)
}

/// Zero-order coefficients `c_i` of every species for the given densities.
pub fn coupling_coefficients(
    u: &[ScalarField],
    params: &SolveParams,
    mask: &RegionMask,
    stencil: &BallStencil,
) -> Result<Vec<ScalarField>, SolveError> {
    let h = interactions(u, params.kind, stencil, mask)?;
    (0..u.len()).map(|i| coefficient(&h, i, params.eps)).collect()
}

/// `max_i max |M⁻_h u_i − c_i u_i|` over fully evaluable interior nodes.
pub fn system_residual(
    u: &[ScalarField],
    params: &SolveParams,
    mask: &RegionMask,
    frames: &FrameSet,
    stencil: &BallStencil,
) -> Result<f64, SolveError> {
    let c = coupling_coefficients(u, params, mask, stencil)?;
    let mut m = 0.0f64;
    for (ui, ci) in u.iter().zip(&c) {
        let lhs = discrete_pucci_minus(ui, mask, &params.ell, frames)?;
        for k in lhs.evaluable.iter() {
            m = m.max(libm::fabs(lhs.values.at(k) - ci.at(k) * ui.at(k)));
        }
    }
    Ok(m)
}

struct MapStats {
    policy_iterations: usize,
    krylov_iterations: usize,
}

fn solve_species(
    solver: &DirichletSolver,
    c: &ScalarField,
    f: &ScalarField,
    warm: &ScalarField,
    params: &SolveParams,
) -> Result<(ScalarField, usize, usize), SolveError> {
    let (v, st) = solver.solve(c, f, Some(warm), params.inner_tol, params.inner_max)?;
    Ok((v, st.policy_iterations, st.krylov_iterations))
}

/// Jacobi application of the map: every species is solved against the
/// interaction coefficients of the input state.
fn apply_map(
    solver: &DirichletSolver,
    state: &SpeciesState,
    params: &SolveParams,
    stencil: &BallStencil,
) -> Result<(Vec<ScalarField>, MapStats), SolveError> {
    let mask = solver.mask();
    let h = interactions(&state.u, params.kind, stencil, mask)?;
    let k = state.species();
    let job = |i: usize| -> Result<(ScalarField, usize, usize), SolveError> {
        let c = coefficient(&h, i, params.eps)?;
        solve_species(solver, &c, &state.f[i], &state.u[i], params)
    };
    #[cfg(feature = "rayon")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        (0..k).into_par_iter().map(job).collect()
    };
    #[cfg(not(feature = "rayon"))]
    let results: Vec<_> = (0..k).map(job).collect();

    let mut out = Vec::with_capacity(k);
    let mut stats = MapStats {
        policy_iterations: 0,
        krylov_iterations: 0,
    };
    for r in results {
        let (v, p, q) = r?;
        stats.policy_iterations += p;
        stats.krylov_iterations += q;
        out.push(v);
    }
    Ok((out, stats))
}

/// The fixed-point map `T^ε(u)_i = v_i` with `M⁻_h v_i = c_i v_i`,
/// `c_i = (1/ε²) Σ_{j≠i} H_R(u_j)`, `v_i = f_i` on the strip.
pub fn schauder_map(
    state: &SpeciesState,
    params: &SolveParams,
    mask: &RegionMask,
    frames: &FrameSet,
    stencil: &BallStencil,
) -> Result<SpeciesState, SolveError> {
    check_state(state, params, mask)?;
    let solver = DirichletSolver::new(mask, params.ell, frames)?;
    let (u, _) = apply_map(&solver, state, params, stencil)?;
    Ok(SpeciesState {
        u,
        f: state.f.clone(),
        phi: state.phi.clone(),
    })
}

fn blend(old: &ScalarField, new: &ScalarField, damping: f64) -> Result<(ScalarField, f64), SolveError> {
    let mut delta = 0.0f64;
    let vals: Vec<f64> = old
        .values()
        .iter()
        .zip(new.values())
        .map(|(&a, &b)| {
            let v = if damping == 1.0 {
                b
            } else {
                (1.0 - damping) * a + damping * b
            };
            delta = delta.max(libm::fabs(v - a));
            v
        })
        .collect();
    Ok((ScalarField::from_values(*old.spec(), vals)?, delta))
}

/// Damped Picard iteration `u ← (1 − d)·u + d·T^ε(u)` until the sup-norm
/// change drops below `outer_tol`.
pub fn solve_system(
    init: SpeciesState,
    params: &SolveParams,
    mask: &RegionMask,
    frames: &FrameSet,
    stencil: &BallStencil,
) -> Result<(SpeciesState, IterationReport), SolveError> {
    solve_system_observed(init, params, mask, frames, stencil, |_, _| {})
}

/// [`solve_system`] with a callback invoked after every outer iteration.
pub fn solve_system_observed(
    init: SpeciesState,
    params: &SolveParams,
    mask: &RegionMask,
    frames: &FrameSet,
    stencil: &BallStencil,
    mut observer: impl FnMut(usize, &SpeciesState),
) -> Result<(SpeciesState, IterationReport), SolveError> {
    check_state(&init, params, mask)?;
    let solver = DirichletSolver::new(mask, params.ell, frames)?;
    let mut state = init;
    let (over0, min0) = state.containment();
    let mut report = IterationReport {
        max_barrier_excess: over0,
        min_value: min0,
        ..IterationReport::default()
    };

    for it in 1..=params.outer_max {
        let mut delta = 0.0f64;
        match params.species_update {
            SpeciesUpdate::Jacobi => {
                let (v, st) = apply_map(&solver, &state, params, stencil)?;
                report.policy_iterations += st.policy_iterations;
                report.krylov_iterations += st.krylov_iterations;
                for (ui, vi) in state.u.iter_mut().zip(&v) {
                    let (b, d) = blend(ui, vi, params.damping)?;
                    *ui = b;
                    delta = delta.max(d);
                }
            }
            SpeciesUpdate::GaussSeidel => {
                for i in 0..state.species() {
                    let h = interactions(&state.u, params.kind, stencil, mask)?;
                    let c = coefficient(&h, i, params.eps)?;
                    let (v, p, q) = solve_species(&solver, &c, &state.f[i], &state.u[i], params)?;
                    report.policy_iterations += p;
                    report.krylov_iterations += q;
                    let (b, d) = blend(&state.u[i], &v, params.damping)?;
                    state.u[i] = b;
                    delta = delta.max(d);
                }
            }
        }
        let residual = system_residual(&state.u, params, mask, frames, stencil)?;
        let (over, min) = state.containment();
        report.max_barrier_excess = report.max_barrier_excess.max(over);
        report.min_value = report.min_value.min(min);
        report.iterations = it;
        report.deltas.push(delta);
        report.residuals.push(residual);
        report.final_residual = residual;
        observer(it, &state);
        if delta <= params.outer_tol {
            report.converged = true;
            state.validate(mask, CONTAINMENT_TOL)?;
            return Ok((state, report));
        }
    }
    let last_delta = report.deltas.last().copied().unwrap_or(f64::INFINITY);
    Err(SolveError::NotConverged {
        iterations: params.outer_max,
        last_delta,
        state: Box::new(state),
        report: Box::new(report),
    })
}

#[derive(Debug, Clone)]
pub struct ContinuationStep {
    pub eps: f64,
    pub state: SpeciesState,
    pub report: IterationReport,
}

#[derive(Debug, Clone)]
pub struct Continuation {
    pub steps: Vec<ContinuationStep>,
    /// Set when the schedule stopped early because a step did not converge.
    pub aborted: Option<(f64, SolveError)>,
}

/// Solves along a strictly decreasing ε schedule, warm-starting each step
/// from the previous solution.
pub fn eps_continuation(
    schedule: &[f64],
    init: SpeciesState,
    params: &SolveParams,
    mask: &RegionMask,
    frames: &FrameSet,
    stencil: &BallStencil,
) -> Result<Continuation, SolveError> {
    if schedule.is_empty()
        || schedule.iter().any(|&e| !(e > 0.0 && e.is_finite()))
        || schedule.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(SolveError::InvalidSchedule);
    }
    let mut steps: Vec<ContinuationStep> = Vec::with_capacity(schedule.len());
    let mut current = init;
    for &eps in schedule {
        let p = params.with_eps(eps);
        match solve_system(current.clone(), &p, mask, frames, stencil) {
            Ok((state, report)) => {
                current = state.clone();
                steps.push(ContinuationStep { eps, state, report });
            }
            Err(e @ SolveError::NotConverged { .. }) => {
                return Ok(Continuation {
                    steps,
                    aborted: Some((eps, e)),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Continuation { steps, aborted: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mask, DomainSpec};

    struct Setup {
        mask: RegionMask,
        frames: FrameSet,
        stencil: BallStencil,
        f: Vec<ScalarField>,
    }

    /// Rectangle `[0, 3.5] × [0, 1.5]`, species 1 fed left, species 2 right.
    fn two_strip(h: f64) -> Setup {
        let dom = DomainSpec::rect(0.0, 0.0, 3.5, 1.5).unwrap();
        let mask = build_mask(&dom, 1.0, dom.covering_grid(1.0, h).unwrap()).unwrap();
        let spec = *mask.spec();
        let ramp = |d: f64| (1.0 - d.max(0.0) / (2.0 * h)).max(0.0);
        let f = alloc::vec![
            ScalarField::from_fn(spec, |x, _| ramp(x)).unwrap(),
            ScalarField::from_fn(spec, |x, _| ramp(3.5 - x)).unwrap(),
        ];
        Setup {
            mask,
            frames: FrameSet::default(),
            stencil: BallStencil::new(1.0, h).unwrap(),
            f,
        }
    }

    #[test]
    fn single_species_maps_to_barrier() {
        let s = two_strip(1.0 / 16.0);
        let params = SolveParams {
            species: 1,
            ..Default::default()
        };
        let mut state = SpeciesState::with_barriers(alloc::vec![s.f[0].clone()], &s.mask, &s.frames, &params).unwrap();
        let spec = *s.mask.spec();
        for k in s.mask.interior().iter() {
            state.u[0].set(k, 0.5 * ((k % 7) as f64) / 7.0);
        }
        let out = schauder_map(&state, &params, &s.mask, &s.frames, &s.stencil).unwrap();
        assert!(out.u[0].max_abs_diff(&state.phi[0], None) < 1e-10);
        assert_eq!(*out.u[0].spec(), spec);
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let s = two_strip(1.0 / 16.0);
        let spec = *s.mask.spec();
        let params = SolveParams::default();
        let zero = alloc::vec![ScalarField::zeros(spec), ScalarField::zeros(spec)];
        let state = SpeciesState::with_barriers(zero, &s.mask, &s.frames, &params).unwrap();
        let out = schauder_map(&state, &params, &s.mask, &s.frames, &s.stencil).unwrap();
        assert!(out.u.iter().all(|u| u.values().iter().all(|&v| v == 0.0)));
        let (st, rep) = solve_system(state, &params, &s.mask, &s.frames, &s.stencil).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(st.u.iter().all(|u| u.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn weak_competition_converges_and_is_fixed() {
        let s = two_strip(1.0 / 32.0);
        let params = SolveParams {
            eps: 0.5,
            damping: 1.0,
            outer_max: 30,
            ..Default::default()
        };
        let init = SpeciesState::with_barriers(s.f.clone(), &s.mask, &s.frames, &params).unwrap();
        let mut excess = 0.0f64;
        let (state, rep) = solve_system_observed(init, &params, &s.mask, &s.frames, &s.stencil, |_, st| {
            excess = excess.max(st.containment().0);
        })
        .unwrap();
        assert!(rep.converged && rep.iterations <= 30, "{} iterations", rep.iterations);
        assert!(excess <= CONTAINMENT_TOL);
        assert!(rep.deltas.iter().all(|&d| d >= 0.0));
        let again = schauder_map(&state, &params, &s.mask, &s.frames, &s.stencil).unwrap();
        for (a, b) in again.u.iter().zip(&state.u) {
            assert!(a.max_abs_diff(b, None) <= 2.0 * params.outer_tol);
        }
        for u in &state.u {
            assert!(strong_minimum_flags(u, &s.mask, 0.0).unwrap().is_empty());
        }
    }

    #[test]
    fn singleton_schedule_matches_direct_solve() {
        let s = two_strip(1.0 / 16.0);
        let params = SolveParams {
            eps: 0.3,
            ..Default::default()
        };
        let init = SpeciesState::with_barriers(s.f.clone(), &s.mask, &s.frames, &params).unwrap();
        let cont = eps_continuation(&[0.3], init.clone(), &params, &s.mask, &s.frames, &s.stencil).unwrap();
        let (direct, _) = solve_system(init, &params, &s.mask, &s.frames, &s.stencil).unwrap();
        assert!(cont.aborted.is_none());
        assert_eq!(cont.steps.len(), 1);
        assert_eq!(cont.steps[0].state, direct);
    }

    #[test]
    fn schedules_must_decrease() {
        let s = two_strip(1.0 / 16.0);
        let params = SolveParams::default();
        let init = SpeciesState::with_barriers(s.f.clone(), &s.mask, &s.frames, &params).unwrap();
        for bad in [&[0.1, 0.2][..], &[0.1, 0.1], &[], &[0.1, -0.05]] {
            assert!(matches!(
                eps_continuation(bad, init.clone(), &params, &s.mask, &s.frames, &s.stencil),
                Err(SolveError::InvalidSchedule)
            ));
        }
    }

    #[test]
    fn flags_isolated_zero() {
        let s = two_strip(1.0 / 16.0);
        let spec = *s.mask.spec();
        let mut u = ScalarField::constant(spec, 1.0);
        let k = spec.nearest_node(1.75, 0.75).unwrap();
        u.set(k, 0.0);
        let flags = strong_minimum_flags(&u, &s.mask, 1e-12).unwrap();
        assert_eq!(flags.iter().collect::<Vec<_>>(), alloc::vec![k]);
        assert!(strong_minimum_flags(&ScalarField::zeros(spec), &s.mask, 1e-12)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn params_are_validated() {
        for p in [
            SolveParams {
                r: 1.5,
                ..Default::default()
            },
            SolveParams {
                eps: 0.0,
                ..Default::default()
            },
            SolveParams {
                damping: 0.0,
                ..Default::default()
            },
            SolveParams {
                outer_max: 0,
                ..Default::default()
            },
            SolveParams {
                kind: KernelKind::Avg { p: 0.5 },
                ..Default::default()
            },
        ] {
            assert!(matches!(p.validate(), Err(SolveError::InvalidParams(_))));
        }
    }
}
