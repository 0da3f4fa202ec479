//! Ball interaction operators
//!
//! ```text
//! AVG_p:  H_R(w)(x) = (1/|B|) Σ_{y ∈ B_R(x)} w(y)^p
//! SUP:    H_R(w)(x) = max_{y ∈ B_R(x)} w(y)
//! ```
//!
//! over the closed discrete ball `{(a, b) : h²(a² + b²) ≤ R²}`. Far nodes read
//! as zero. Both kernels are evaluated row by row: each ball row is an index
//! interval, so AVG uses row prefix sums and SUP a per-row sparse table.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{GridError, GridSpec, NodeClass, RegionMask, ScalarField};

const NEGATIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NonlocalError {
    #[error("negative value {value} at node {node}")]
    NegativeInput { node: usize, value: f64 },
    #[error("exponent p = {0} must be finite and >= 1")]
    InvalidExponent(f64),
    #[error("radius and spacing must be positive (R = {0}, h = {1})")]
    InvalidRadius(f64, f64),
    #[error("field, mask and stencil do not share a grid")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Avg { p: f64 },
    Sup,
}

impl KernelKind {
    pub fn avg(p: f64) -> Result<Self, NonlocalError> {
        if p >= 1.0 && p.is_finite() {
            Ok(Self::Avg { p })
        } else {
            Err(NonlocalError::InvalidExponent(p))
        }
    }

    fn validate(&self) -> Result<(), NonlocalError> {
        match *self {
            KernelKind::Avg { p } if !(p >= 1.0 && p.is_finite()) => Err(NonlocalError::InvalidExponent(p)),
            _ => Ok(()),
        }
    }
}

/// Integer offsets of the closed discrete ball, stored as rows
/// `(b, A_b)` meaning `{(a, b) : |a| ≤ A_b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallStencil {
    radius: f64,
    h: f64,
    rows: Vec<(i64, i64)>,
    count: usize,
}

impl BallStencil {
    pub fn new(radius: f64, h: f64) -> Result<Self, NonlocalError> {
        if !(radius > 0.0 && h > 0.0 && radius.is_finite() && h.is_finite()) {
            return Err(NonlocalError::InvalidRadius(radius, h));
        }
        let ratio = radius / h;
        let lim = ratio * ratio * (1.0 + 1e-9);
        let bmax = libm::floor(libm::sqrt(lim)) as i64;
        let mut rows = Vec::with_capacity(2 * bmax as usize + 1);
        let mut count = 0;
        for b in -bmax..=bmax {
            let rem = lim - (b * b) as f64;
            if rem < 0.0 {
                continue;
            }
            let mut a = libm::floor(libm::sqrt(rem)) as i64;
            while ((a + 1) * (a + 1)) as f64 <= rem {
                a += 1;
            }
            while a > 0 && (a * a) as f64 > rem {
                a -= 1;
            }
            rows.push((b, a));
            count += 2 * a as usize + 1;
        }
        Ok(Self { radius, h, rows, count })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn rows(&self) -> &[(i64, i64)] {
        &self.rows
    }

    /// Largest integer reach in either coordinate.
    pub fn reach(&self) -> i64 {
        self.rows.iter().map(|&(_, a)| a).max().unwrap_or(0)
    }

    /// Offsets in row-major order (`b` ascending, then `a` ascending).
    pub fn offsets(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.rows
            .iter()
            .flat_map(|&(b, a_max)| (-a_max..=a_max).map(move |a| (a, b)))
    }
}

/// Values as read by the operators: far nodes are zero, tiny negative
/// roundoff is clamped.
fn effective_values(w: &ScalarField, mask: &RegionMask) -> Result<Vec<f64>, NonlocalError> {
    let mut out = Vec::with_capacity(w.values().len());
    for (k, &v) in w.values().iter().enumerate() {
        if mask.class(k) == NodeClass::Far {
            out.push(0.0);
            continue;
        }
        if v < -NEGATIVE_TOL {
            return Err(NonlocalError::NegativeInput { node: k, value: v });
        }
        out.push(v.max(0.0));
    }
    Ok(out)
}

fn clamp_range(i: i64, a: i64, nx: usize) -> Option<(usize, usize)> {
    let lo = (i - a).max(0);
    let hi = (i + a).min(nx as i64 - 1);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

fn apply_avg(vals: &[f64], p: f64, spec: &GridSpec, stencil: &BallStencil, mask: &RegionMask) -> Vec<f64> {
    let (nx, ny) = (spec.nx(), spec.ny());
    let powered: Vec<f64> = if p == 1.0 {
        vals.to_vec()
    } else {
        vals.iter().map(|&v| libm::pow(v, p)).collect()
    };
    let mut prefix = vec![0.0; (nx + 1) * ny];
    for j in 0..ny {
        let row = &mut prefix[j * (nx + 1)..(j + 1) * (nx + 1)];
        for i in 0..nx {
            row[i + 1] = row[i] + powered[j * nx + i];
        }
    }
    let inv = 1.0 / stencil.count() as f64;
    let mut out = vec![0.0; nx * ny];
    for (k, o) in out.iter_mut().enumerate() {
        if !mask.is_interior(k) {
            continue;
        }
        let (i, j) = spec.coords(k);
        let mut sum = 0.0;
        for &(b, a) in stencil.rows() {
            let jj = j as i64 + b;
            if jj < 0 || jj >= ny as i64 {
                continue;
            }
            if let Some((lo, hi)) = clamp_range(i as i64, a, nx) {
                let row = &prefix[jj as usize * (nx + 1)..];
                sum += row[hi + 1] - row[lo];
            }
        }
        *o = sum * inv;
    }
    out
}

/// Per-row sparse tables answering range-max queries in O(1).
struct RowMax {
    nx: usize,
    levels: usize,
    table: Vec<f64>,
}

impl RowMax {
    fn new(vals: &[f64], nx: usize, ny: usize) -> Self {
        let mut levels = 1;
        while (1usize << levels) <= nx {
            levels += 1;
        }
        let mut table = vec![0.0; levels * nx * ny];
        for j in 0..ny {
            let base = j * levels * nx;
            table[base..base + nx].copy_from_slice(&vals[j * nx..(j + 1) * nx]);
            for l in 1..levels {
                let half = 1 << (l - 1);
                for i in 0..nx {
                    let a = table[base + (l - 1) * nx + i];
                    let b = if i + half < nx {
                        table[base + (l - 1) * nx + i + half]
                    } else {
                        a
                    };
                    table[base + l * nx + i] = a.max(b);
                }
            }
        }
        Self { nx, levels, table }
    }

    fn query(&self, j: usize, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let l = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let base = j * self.levels * self.nx + l * self.nx;
        self.table[base + lo].max(self.table[base + hi + 1 - (1 << l)])
    }
}

fn apply_sup(vals: &[f64], spec: &GridSpec, stencil: &BallStencil, mask: &RegionMask) -> Vec<f64> {
    let (nx, ny) = (spec.nx(), spec.ny());
    let rm = RowMax::new(vals, nx, ny);
    let mut out = vec![0.0; nx * ny];
    for (k, o) in out.iter_mut().enumerate() {
        if !mask.is_interior(k) {
            continue;
        }
        let (i, j) = spec.coords(k);
        let mut m = 0.0f64;
        for &(b, a) in stencil.rows() {
            let jj = j as i64 + b;
            if jj < 0 || jj >= ny as i64 {
                continue;
            }
            if let Some((lo, hi)) = clamp_range(i as i64, a, nx) {
                m = m.max(rm.query(jj as usize, lo, hi));
            }
        }
        *o = m;
    }
    out
}

/// Applies `H_R` at every interior node; other nodes get 0.
pub fn h_apply(
    w: &ScalarField,
    kind: KernelKind,
    stencil: &BallStencil,
    mask: &RegionMask,
) -> Result<ScalarField, NonlocalError> {
    kind.validate()?;
    let spec = *w.spec();
    if spec != *mask.spec() || libm::fabs(stencil.h() - spec.h()) > 1e-12 * spec.h() {
        return Err(NonlocalError::GridMismatch);
    }
    let vals = effective_values(w, mask)?;
    let out = match kind {
        KernelKind::Avg { p } => apply_avg(&vals, p, &spec, stencil, mask),
        KernelKind::Sup => apply_sup(&vals, &spec, stencil, mask),
    };
    Ok(ScalarField::from_values(spec, out)?)
}

/// Compares `H_R(w)` with `H_1` of the same values placed on the grid scaled
/// by `1/R`. Returns the largest absolute difference over interior nodes.
pub fn scaling_check(w: &ScalarField, mask: &RegionMask, kind: KernelKind, radius: f64) -> Result<f64, NonlocalError> {
    let spec = *w.spec();
    if spec != *mask.spec() {
        return Err(NonlocalError::GridMismatch);
    }
    let h = spec.h();
    let direct = h_apply(w, kind, &BallStencil::new(radius, h)?, mask)?;

    let (ox, oy) = spec.origin();
    let scaled_spec = GridSpec::new(spec.nx(), spec.ny(), h / radius, (ox / radius, oy / radius))?;
    let scaled_mask = mask.rescaled(scaled_spec, mask.strip_width() / radius)?;
    let scaled_w = ScalarField::from_values(scaled_spec, w.values().to_vec())?;
    let scaled = h_apply(&scaled_w, kind, &BallStencil::new(1.0, h / radius)?, &scaled_mask)?;

    Ok(mask
        .interior_indices()
        .into_iter()
        .map(|k| libm::fabs(direct.at(k) - scaled.at(k)))
        .fold(0.0, f64::max))
}
