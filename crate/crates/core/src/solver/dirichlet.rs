//! Policy iteration for `M⁻_h v = c·v` with `v = f` on the strip.
//!
//! `M⁻_h` is the minimum over policies (a frame and a `λ`/`Λ` weight per
//! direction) of linear difference operators, so `c·v − M⁻_h v` is a maximum
//! of M-matrix operators. Each step freezes the policy attained at the
//! current iterate and solves the linear system exactly (ILU(0)+GMRES).

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{gmres, Csr, Ilu0};
use super::SolveError;
use crate::grid::{NodeClass, RegionMask, ScalarField};
use crate::pucci::{EllipticityPair, FrameSet, StencilPlan};

const TIE_TOL: f64 = 1e-12;
const KRYLOV_RTOL: f64 = 1e-14;
const KRYLOV_RESTART: usize = 40;
const KRYLOV_MAX: usize = 4000;
const NO_UNKNOWN: u32 = u32::MAX;

/// Per-node policy: frame index in the low byte, one bit per direction
/// (set = `Λ`, i.e. nonpositive second difference) in the high byte.
type Policy = u16;

fn frame_of(p: Policy) -> usize {
    (p & 0xff) as usize
}

fn weight_bit(p: Policy, d: usize) -> bool {
    p & (1 << (8 + d)) != 0
}

/// Reusable solver for one mask, ellipticity pair and frame set.
#[derive(Debug, Clone)]
pub struct DirichletSolver {
    plan: StencilPlan,
    ell: EllipticityPair,
    mask: RegionMask,
    unknown: Vec<u32>,
}

/// Diagnostics of one Dirichlet solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletStats {
    pub policy_iterations: usize,
    pub krylov_iterations: usize,
    pub last_update: f64,
    /// Largest relative linear-system residual left by any Krylov solve.
    pub krylov_residual: f64,
}

impl DirichletSolver {
    pub fn new(mask: &RegionMask, ell: EllipticityPair, frames: &FrameSet) -> Result<Self, SolveError> {
        let plan = StencilPlan::new(mask, frames)?;
        if plan.admissible.iter().any(|&b| b & 1 == 0) {
            return Err(SolveError::InvalidParams("axis stencil leaves the strip"));
        }
        let mut unknown = vec![NO_UNKNOWN; mask.spec().len()];
        for (n, &k) in plan.interior.iter().enumerate() {
            unknown[k] = n as u32;
        }
        Ok(Self {
            plan,
            ell,
            mask: mask.clone(),
            unknown,
        })
    }

    pub fn mask(&self) -> &RegionMask {
        &self.mask
    }

    pub fn ellipticity(&self) -> &EllipticityPair {
        &self.ell
    }

    /// Field equal to `f` on strip nodes, zero on far nodes and `interior`
    /// (or zero) inside.
    fn embed(&self, f: &ScalarField, interior: Option<&ScalarField>) -> Vec<f64> {
        let mut v = vec![0.0; f.values().len()];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = match self.mask.class(k) {
                NodeClass::Strip => f.at(k),
                NodeClass::Far => 0.0,
                NodeClass::Interior => interior.map_or(0.0, |w| w.at(k)),
            };
        }
        v
    }

    fn derive_policy(&self, u: &[f64], prev: Option<&[Policy]>) -> Vec<Policy> {
        let plan = &self.plan;
        let ell = &self.ell;
        let mut out = Vec::with_capacity(plan.interior.len());
        for (n, &k) in plan.interior.iter().enumerate() {
            let bits = plan.admissible[n];
            let mut best = f64::INFINITY;
            let mut best_scale = 0.0;
            let mut arg = 0usize;
            let mut prev_val = f64::INFINITY;
            let mut prev_scale = 0.0;
            let prev_p = prev.map(|p| p[n]);
            for (fi, pair) in plan.dirs.iter().enumerate() {
                if bits & (1 << fi) == 0 {
                    continue;
                }
                let r0 = ell.rho_minus(plan.second_difference(u, k, &pair[0]));
                let r1 = ell.rho_minus(plan.second_difference(u, k, &pair[1]));
                let val = r0 + r1;
                let scale = libm::fabs(r0) + libm::fabs(r1);
                if val < best {
                    best = val;
                    best_scale = scale;
                    arg = fi;
                }
                if prev_p.is_some_and(|p| frame_of(p) == fi) {
                    prev_val = val;
                    prev_scale = scale;
                }
            }
            let frame = match prev_p {
                Some(p) if prev_val <= best + TIE_TOL * (best_scale + prev_scale) => frame_of(p),
                _ => arg,
            };
            let same_frame = prev_p.is_some_and(|p| frame_of(p) == frame);
            let mut policy = frame as Policy;
            for (d, dir) in plan.dirs[frame].iter().enumerate() {
                let up = u[(k as isize + dir.offset) as usize];
                let um = u[(k as isize - dir.offset) as usize];
                let dd = (up - 2.0 * u[k] + um) * dir.inv_len2;
                let tol = TIE_TOL * (libm::fabs(up) + libm::fabs(um) + 2.0 * libm::fabs(u[k])) * dir.inv_len2;
                let big = if dd > tol {
                    false
                } else if dd < -tol {
                    true
                } else if same_frame {
                    weight_bit(prev_p.unwrap(), d)
                } else {
                    true
                };
                if big {
                    policy |= 1 << (8 + d);
                }
            }
            out.push(policy);
        }
        out
    }

    fn assemble(&self, policy: &[Policy], c: &ScalarField, u: &[f64]) -> (Csr, Vec<f64>) {
        let plan = &self.plan;
        let n = plan.interior.len();
        let mut a = Csr::with_capacity(n, 5 * n);
        let mut b = vec![0.0; n];
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(5);
        for (r, &k) in plan.interior.iter().enumerate() {
            let p = policy[r];
            let pair = &plan.dirs[frame_of(p)];
            let mut coefs = [0.0; 2];
            for d in 0..2 {
                let w = if weight_bit(p, d) {
                    self.ell.big_lambda()
                } else {
                    self.ell.lambda()
                };
                coefs[d] = w * pair[d].inv_len2;
            }
            let diag = c.at(k) + 2.0 * (coefs[0] + coefs[1]);
            row.clear();
            row.push((r, 1.0));
            let mut rhs = 0.0;
            for d in 0..2 {
                let cd = coefs[d] / diag;
                for nb in [k as isize + pair[d].offset, k as isize - pair[d].offset] {
                    let nb = nb as usize;
                    match self.unknown[nb] {
                        NO_UNKNOWN => rhs += cd * u[nb],
                        col => row.push((col as usize, -cd)),
                    }
                }
            }
            a.push_row(&mut row);
            b[r] = rhs;
        }
        (a, b)
    }

    /// `max |M⁻_h v − c·v|` over interior nodes whose full frame set fits.
    pub fn residual(&self, v: &ScalarField, c: &ScalarField) -> f64 {
        let plan = &self.plan;
        let u = v.values();
        let mut m = 0.0f64;
        for (n, &k) in plan.interior.iter().enumerate() {
            let bits = plan.admissible[n];
            if bits != plan.full_mask {
                continue;
            }
            let (val, _) = plan.pucci_minus_at(u, k, bits, &self.ell);
            m = m.max(libm::fabs(val - c.at(k) * u[k]));
        }
        m
    }

    /// Solves `M⁻_h v = c·v` in the interior with `v = f` on the strip and
    /// `v = 0` on far nodes.
    pub fn solve(
        &self,
        c: &ScalarField,
        f: &ScalarField,
        warm: Option<&ScalarField>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(ScalarField, DirichletStats), SolveError> {
        let spec = *self.mask.spec();
        if c.spec() != &spec || f.spec() != &spec || warm.is_some_and(|w| w.spec() != &spec) {
            return Err(SolveError::GridMismatch);
        }
        let mut fmax = 0.0f64;
        for k in 0..spec.len() {
            match self.mask.class(k) {
                NodeClass::Strip => {
                    if f.at(k) < 0.0 {
                        return Err(SolveError::InvalidBoundary {
                            node: k,
                            value: f.at(k),
                        });
                    }
                    fmax = fmax.max(f.at(k));
                }
                NodeClass::Interior => {
                    if c.at(k) < 0.0 {
                        return Err(SolveError::NegativeCoefficient {
                            node: k,
                            value: c.at(k),
                        });
                    }
                }
                NodeClass::Far => {}
            }
        }

        let mut u = self.embed(f, warm);
        let interior = &self.plan.interior;
        if fmax == 0.0 {
            interior.iter().for_each(|&k| u[k] = 0.0);
            let v = ScalarField::from_values(spec, u)?;
            return Ok((
                v,
                DirichletStats {
                    policy_iterations: 0,
                    krylov_iterations: 0,
                    last_update: 0.0,
                    krylov_residual: 0.0,
                },
            ));
        }
        for &k in interior {
            u[k] = u[k].clamp(0.0, fmax);
        }

        let mut policy = self.derive_policy(&u, None);
        let mut system: Option<(Csr, Ilu0, Vec<f64>)> = None;
        let mut stats = DirichletStats {
            policy_iterations: 0,
            krylov_iterations: 0,
            last_update: f64::INFINITY,
            krylov_residual: 0.0,
        };
        let mut x: Vec<f64> = interior.iter().map(|&k| u[k]).collect();
        let mut policy_stable = false;
        for _ in 0..max_iter {
            stats.policy_iterations += 1;
            if system.is_none() {
                let (a, b) = self.assemble(&policy, c, &u);
                let ilu = Ilu0::new(&a).ok_or(SolveError::InvalidParams("singular frozen system"))?;
                system = Some((a, ilu, b));
            }
            let (a, ilu, b) = system.as_ref().unwrap();
            let out = gmres(a, ilu, b, &mut x, KRYLOV_RTOL, KRYLOV_RESTART, KRYLOV_MAX);
            stats.krylov_iterations += out.iterations;
            stats.krylov_residual = stats.krylov_residual.max(out.rel_residual);

            let mut update = 0.0f64;
            for (n, &k) in interior.iter().enumerate() {
                let nv = x[n];
                update = update.max(libm::fabs(nv - u[k]));
                u[k] = nv;
            }
            stats.last_update = update;

            if policy_stable && update <= tol {
                return self.finish(u, fmax, stats);
            }
            let next = self.derive_policy(&u, Some(&policy));
            if next == policy {
                policy_stable = true;
                if update <= tol {
                    return self.finish(u, fmax, stats);
                }
            } else {
                policy_stable = false;
                policy = next;
                system = None;
            }
        }
        let best = self.finish(u, fmax, stats)?.0;
        Err(SolveError::DirichletNotConverged {
            iterations: max_iter,
            best: Box::new(best),
        })
    }

    fn finish(
        &self,
        mut u: Vec<f64>,
        fmax: f64,
        stats: DirichletStats,
    ) -> Result<(ScalarField, DirichletStats), SolveError> {
        for &k in &self.plan.interior {
            u[k] = u[k].clamp(0.0, fmax);
        }
        Ok((ScalarField::from_values(*self.mask.spec(), u)?, stats))
    }
}

/// One-shot Dirichlet solve; see [`DirichletSolver::solve`].
pub fn solve_dirichlet(
    c: &ScalarField,
    f: &ScalarField,
    mask: &RegionMask,
    ell: &EllipticityPair,
    frames: &FrameSet,
    params: &super::SolveParams,
) -> Result<ScalarField, SolveError> {
    let solver = DirichletSolver::new(mask, *ell, frames)?;
    Ok(solver.solve(c, f, None, params.inner_tol, params.inner_max)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_mask, distance_transform, DomainSpec};

    fn unit_square(r: f64, h: f64) -> RegionMask {
        let dom = DomainSpec::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        build_mask(&dom, r, dom.covering_grid(r, h).unwrap()).unwrap()
    }

    #[test]
    fn constants_are_solutions() {
        let mask = unit_square(0.25, 1.0 / 16.0);
        let spec = *mask.spec();
        let s = DirichletSolver::new(&mask, EllipticityPair::default(), &FrameSet::default()).unwrap();
        let (v, st) = s
            .solve(
                &ScalarField::zeros(spec),
                &ScalarField::constant(spec, 1.0),
                None,
                1e-10,
                50,
            )
            .unwrap();
        for k in mask.interior().iter() {
            assert!((v.at(k) - 1.0).abs() < 1e-12);
        }
        assert!(st.policy_iterations <= 3, "{st:?}");
    }

    #[test]
    fn harmonic_quadratic_is_reproduced() {
        let mask = unit_square(0.25, 1.0 / 32.0);
        let spec = *mask.spec();
        let ell = EllipticityPair::new(1.0, 1.0).unwrap();
        let poly = |x: f64, y: f64| x * x - y * y + 2.0;
        let f = ScalarField::from_fn(spec, poly).unwrap();
        let params = super::super::SolveParams {
            inner_tol: 1e-12,
            ..Default::default()
        };
        let v = solve_dirichlet(
            &ScalarField::zeros(spec),
            &f,
            &mask,
            &ell,
            &FrameSet::default(),
            &params,
        )
        .unwrap();
        for k in mask.interior().iter() {
            let (x, y) = spec.position_of(k);
            assert!((v.at(k) - poly(x, y)).abs() < 1e-8, "at ({x}, {y})");
        }
    }

    #[test]
    fn strong_absorption_decays_fast() {
        let mask = unit_square(0.25, 1.0 / 32.0);
        let spec = *mask.spec();
        let c = ScalarField::constant(spec, 1e4);
        let params = super::super::SolveParams::default();
        let f = ScalarField::constant(spec, 1.0);
        let v = solve_dirichlet(&c, &f, &mask, &params.ell, &FrameSet::default(), &params).unwrap();
        let d = distance_transform(&mask.strip()).unwrap();
        for k in mask.interior().iter() {
            assert!(v.at(k) <= 1.0);
            if d.at(k) > 0.2 {
                assert!(v.at(k) <= 0.01, "v = {} at distance {}", v.at(k), d.at(k));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mask = unit_square(0.25, 1.0 / 16.0);
        let spec = *mask.spec();
        let s = DirichletSolver::new(&mask, EllipticityPair::default(), &FrameSet::default()).unwrap();
        let bad_f = ScalarField::constant(spec, -0.5);
        assert!(matches!(
            s.solve(&ScalarField::zeros(spec), &bad_f, None, 1e-10, 10),
            Err(SolveError::InvalidBoundary { .. })
        ));
        let bad_c = ScalarField::constant(spec, -1.0);
        assert!(matches!(
            s.solve(&bad_c, &ScalarField::constant(spec, 1.0), None, 1e-10, 10),
            Err(SolveError::NegativeCoefficient { .. })
        ));
    }

    #[test]
    fn zero_data_gives_zero() {
        let mask = unit_square(0.25, 1.0 / 16.0);
        let spec = *mask.spec();
        let s = DirichletSolver::new(&mask, EllipticityPair::default(), &FrameSet::default()).unwrap();
        let (v, _) = s
            .solve(
                &ScalarField::constant(spec, 3.0),
                &ScalarField::zeros(spec),
                None,
                1e-10,
                10,
            )
            .unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }
}
