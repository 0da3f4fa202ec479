//! Pucci extremal operators.
//!
//! Pointwise on symmetric 2×2 matrices:
//!
//! ```text
//! M⁻(M) = λ Σ_{e>0} e + Λ Σ_{e<0} e        M⁺(M) = Λ Σ_{e>0} e + λ Σ_{e<0} e
//! ```
//!
//! and on grids through the monotone wide-stencil scheme
//!
//! ```text
//! M⁻_h u(x) = min_{(v,w) ∈ frames} ρ⁻(D_vv u) + ρ⁻(D_ww u)
//! D_vv u(x) = (u(x+hv) − 2u(x) + u(x−hv)) / (h²|v|²)
//! ρ⁻(z)     = λ z⁺ − Λ z⁻
//! ```
//!
//! Every term is nondecreasing in the neighbour values, so the scheme is
//! degenerate elliptic.

use alloc::vec::Vec;
use core::fmt;

use crate::grid::{GridSpec, NodeClass, NodeSet, RegionMask, ScalarField};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PucciError {
    #[error("ellipticity constants must satisfy 0 < lambda <= Lambda (got {0}, {1})")]
    InvalidEllipticity(f64, f64),
    #[error("invalid frame set: {0}")]
    InvalidFrames(&'static str),
    #[error("stencil reach {reach} exceeds strip width {strip_width}")]
    StencilEscape { reach: f64, strip_width: f64 },
    #[error("field and mask live on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityPair {
    lambda: f64,
    big_lambda: f64,
}

impl EllipticityPair {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self, PucciError> {
        if lambda > 0.0 && big_lambda >= lambda && big_lambda.is_finite() {
            Ok(Self { lambda, big_lambda })
        } else {
            Err(PucciError::InvalidEllipticity(lambda, big_lambda))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }

    /// `λ z⁺ − Λ z⁻`.
    #[inline]
    pub fn rho_minus(&self, z: f64) -> f64 {
        if z > 0.0 {
            self.lambda * z
        } else {
            self.big_lambda * z
        }
    }

    /// `Λ z⁺ − λ z⁻`.
    #[inline]
    pub fn rho_plus(&self, z: f64) -> f64 {
        if z > 0.0 {
            self.big_lambda * z
        } else {
            self.lambda * z
        }
    }
}

impl Default for EllipticityPair {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            big_lambda: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMatrix2 {
    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    /// Eigenvalues `(e_max, e_min)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.a11 + self.a22);
        let r = libm::hypot(0.5 * (self.a11 - self.a22), self.a12);
        (m + r, m - r)
    }

    pub fn scale(&self, t: f64) -> Self {
        Self::new(t * self.a11, t * self.a12, t * self.a22)
    }
}

impl core::ops::Add for SymMatrix2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }
}

impl core::ops::Neg for SymMatrix2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

pub fn pucci_minus_mat(m: &SymMatrix2, ell: &EllipticityPair) -> f64 {
    let (e1, e2) = m.eigenvalues();
    ell.rho_minus(e1) + ell.rho_minus(e2)
}

pub fn pucci_plus_mat(m: &SymMatrix2, ell: &EllipticityPair) -> f64 {
    let (e1, e2) = m.eigenvalues();
    ell.rho_plus(e1) + ell.rho_plus(e2)
}

/// Orthogonal pairs of integer directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSet {
    frames: Vec<[(i64, i64); 2]>,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Representative of `±v`: first nonzero coordinate positive.
fn sign_normalize(v: (i64, i64)) -> (i64, i64) {
    if v.0 < 0 || (v.0 == 0 && v.1 < 0) {
        (-v.0, -v.1)
    } else {
        v
    }
}

fn frame_key(f: &[(i64, i64); 2]) -> [(i64, i64); 2] {
    let a = sign_normalize(f[0]);
    let b = sign_normalize(f[1]);
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

impl FrameSet {
    /// All frames `((a, b), (−b, a))` with `(a, b)` primitive, `a ≥ 1`,
    /// `b ≥ 0`, `max(a, b) ≤ width`. The axis frame comes first.
    pub fn with_width(width: u32) -> Result<Self, PucciError> {
        if width == 0 || width > 32 {
            return Err(PucciError::InvalidFrames("width must be in 1..=32"));
        }
        let w = width as i64;
        let mut frames = Vec::new();
        for a in 1..=w {
            for b in 0..=w {
                if gcd(a, b) == 1 {
                    frames.push([(a, b), (-b, a)]);
                }
            }
        }
        frames.sort_by_key(|f| (f[0].0.max(f[0].1), f[0].0 * f[0].0 + f[0].1 * f[0].1, f[0]));
        Self::from_frames(frames)
    }

    pub fn axis() -> Self {
        Self {
            frames: alloc::vec![[(1, 0), (0, 1)]],
        }
    }

    /// Validated custom frame list. The axis frame must be present.
    pub fn from_frames(frames: Vec<[(i64, i64); 2]>) -> Result<Self, PucciError> {
        if frames.is_empty() {
            return Err(PucciError::InvalidFrames("no frames"));
        }
        if frames.len() > 64 {
            return Err(PucciError::InvalidFrames("at most 64 frames are supported"));
        }
        let mut keys: Vec<[(i64, i64); 2]> = Vec::with_capacity(frames.len());
        for f in &frames {
            let [v, w] = *f;
            if v == (0, 0) || w == (0, 0) {
                return Err(PucciError::InvalidFrames("zero direction"));
            }
            if v.0 * w.0 + v.1 * w.1 != 0 {
                return Err(PucciError::InvalidFrames("directions are not orthogonal"));
            }
            let key = frame_key(f);
            if keys.contains(&key) {
                return Err(PucciError::InvalidFrames("duplicate frame"));
            }
            keys.push(key);
        }
        if !keys.contains(&[(0, 1), (1, 0)]) {
            return Err(PucciError::InvalidFrames("axis frame missing"));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[[(i64, i64); 2]] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Largest coordinate magnitude over all directions.
    pub fn width(&self) -> i64 {
        self.frames
            .iter()
            .flat_map(|f| f.iter())
            .map(|v| v.0.abs().max(v.1.abs()))
            .max()
            .unwrap_or(0)
    }
}

impl Default for FrameSet {
    fn default() -> Self {
        Self::with_width(3).expect("width 3 is valid")
    }
}

impl fmt::Display for FrameSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, fr) in self.frames.iter().enumerate() {
            if n > 0 {
                f.write_str(" ")?;
            }
            write!(f, "[({},{}),({},{})]", fr[0].0, fr[0].1, fr[1].0, fr[1].1)?;
        }
        Ok(())
    }
}

/// Operator values on interior nodes plus the evaluability flag of each node.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilField {
    pub values: ScalarField,
    pub evaluable: NodeSet,
}

impl StencilField {
    /// Max `|value|` over evaluable nodes, optionally restricted further.
    pub fn max_abs(&self, within: Option<&NodeSet>) -> f64 {
        self.evaluable
            .iter()
            .filter(|&k| within.is_none_or(|s| s.contains(k)))
            .map(|k| libm::fabs(self.values.at(k)))
            .fold(0.0, f64::max)
    }
}

/// One stencil direction: flat index offset and `1 / (h²|v|²)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Direction {
    pub offset: isize,
    pub inv_len2: f64,
}

/// Precomputed stencil geometry for a mask and frame set.
#[derive(Debug, Clone)]
pub(crate) struct StencilPlan {
    pub spec: GridSpec,
    pub interior: Vec<usize>,
    /// Bit `f` set if frame `f` reads only interior/strip nodes.
    pub admissible: Vec<u64>,
    /// Two directions per frame.
    pub dirs: Vec<[Direction; 2]>,
    pub full_mask: u64,
}

impl StencilPlan {
    pub fn new(mask: &RegionMask, frames: &FrameSet) -> Result<Self, PucciError> {
        let spec = *mask.spec();
        let h = spec.h();
        let reach = frames.width() as f64 * h;
        if reach > mask.strip_width() * (1.0 + 1e-12) {
            return Err(PucciError::StencilEscape {
                reach,
                strip_width: mask.strip_width(),
            });
        }
        let nx = spec.nx() as isize;
        let dirs: Vec<[Direction; 2]> = frames
            .frames()
            .iter()
            .map(|f| {
                f.map(|(a, b)| Direction {
                    offset: a as isize + b as isize * nx,
                    inv_len2: 1.0 / (h * h * (a * a + b * b) as f64),
                })
            })
            .collect();
        let full_mask = if frames.len() == 64 {
            u64::MAX
        } else {
            (1u64 << frames.len()) - 1
        };
        let readable =
            |k: usize, di: i64, dj: i64| spec.offset(k, di, dj).is_some_and(|n| mask.class(n) != NodeClass::Far);
        let interior = mask.interior_indices();
        let admissible = interior
            .iter()
            .map(|&k| {
                let mut bits = 0u64;
                for (fi, f) in frames.frames().iter().enumerate() {
                    let ok = f.iter().all(|&(a, b)| readable(k, a, b) && readable(k, -a, -b));
                    if ok {
                        bits |= 1 << fi;
                    }
                }
                bits
            })
            .collect();
        Ok(Self {
            spec,
            interior,
            admissible,
            dirs,
            full_mask,
        })
    }

    #[inline]
    pub fn second_difference(&self, u: &[f64], k: usize, d: &Direction) -> f64 {
        let c = u[k];
        let p = u[(k as isize + d.offset) as usize];
        let m = u[(k as isize - d.offset) as usize];
        (p - 2.0 * c + m) * d.inv_len2
    }

    /// `M⁻_h u` at interior node `k` with admissible-frame bits `bits`.
    /// Returns the value and the index of the first minimizing frame.
    #[inline]
    pub fn pucci_minus_at(&self, u: &[f64], k: usize, bits: u64, ell: &EllipticityPair) -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (fi, pair) in self.dirs.iter().enumerate() {
            if bits & (1 << fi) == 0 {
                continue;
            }
            let val = ell.rho_minus(self.second_difference(u, k, &pair[0]))
                + ell.rho_minus(self.second_difference(u, k, &pair[1]));
            if val < best {
                best = val;
                arg = fi;
            }
        }
        (best, arg)
    }

    pub fn pucci_plus_at(&self, u: &[f64], k: usize, bits: u64, ell: &EllipticityPair) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for (fi, pair) in self.dirs.iter().enumerate() {
            if bits & (1 << fi) == 0 {
                continue;
            }
            let val = ell.rho_plus(self.second_difference(u, k, &pair[0]))
                + ell.rho_plus(self.second_difference(u, k, &pair[1]));
            best = best.max(val);
        }
        best
    }

    fn assemble(&self, mut eval: impl FnMut(usize, u64) -> f64) -> StencilField {
        let mut values = ScalarField::zeros(self.spec);
        let mut evaluable = NodeSet::empty(self.spec);
        for (n, &k) in self.interior.iter().enumerate() {
            let bits = self.admissible[n];
            if bits == self.full_mask {
                evaluable.insert(k);
            }
            if bits != 0 {
                values.values_mut()[k] = eval(k, bits);
            }
        }
        StencilField { values, evaluable }
    }
}

fn check_grid(u: &ScalarField, mask: &RegionMask) -> Result<(), PucciError> {
    if u.spec() != mask.spec() {
        Err(PucciError::GridMismatch)
    } else {
        Ok(())
    }
}

/// Wide-stencil `M⁻_h u`. Interior nodes where some frame would read a far
/// node are marked non-evaluable and carry the minimum over the frames that
/// fit.
pub fn discrete_pucci_minus(
    u: &ScalarField,
    mask: &RegionMask,
    ell: &EllipticityPair,
    frames: &FrameSet,
) -> Result<StencilField, PucciError> {
    check_grid(u, mask)?;
    let plan = StencilPlan::new(mask, frames)?;
    let v = u.values();
    Ok(plan.assemble(|k, bits| plan.pucci_minus_at(v, k, bits, ell).0))
}

/// Wide-stencil `M⁺_h u` (maximum over frames of `ρ⁺`).
pub fn discrete_pucci_plus(
    u: &ScalarField,
    mask: &RegionMask,
    ell: &EllipticityPair,
    frames: &FrameSet,
) -> Result<StencilField, PucciError> {
    check_grid(u, mask)?;
    let plan = StencilPlan::new(mask, frames)?;
    let v = u.values();
    Ok(plan.assemble(|k, bits| plan.pucci_plus_at(v, k, bits, ell)))
}

/// Five-point Laplacian.
pub fn discrete_laplacian(u: &ScalarField, mask: &RegionMask) -> Result<StencilField, PucciError> {
    check_grid(u, mask)?;
    let plan = StencilPlan::new(mask, &FrameSet::axis())?;
    let v = u.values();
    Ok(plan.assemble(|k, _| {
        plan.second_difference(v, k, &plan.dirs[0][0]) + plan.second_difference(v, k, &plan.dirs[0][1])
    }))
}
