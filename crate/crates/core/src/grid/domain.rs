use alloc::vec::Vec;

use super::{GridError, GridSpec, NodeClass, RegionMask};

const CLASSIFY_TOL: f64 = 1e-12;

/// Open primitive shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Open rectangle `(x0, x1) × (y0, y1)`.
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Open disc.
    Disc { cx: f64, cy: f64, r: f64 },
}

impl Primitive {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Primitive::Rect { x0, y0, x1, y1 } => x > x0 && x < x1 && y > y0 && y < y1,
            Primitive::Disc { cx, cy, r } => {
                let (dx, dy) = (x - cx, y - cy);
                dx * dx + dy * dy < r * r
            }
        }
    }

    /// Distance from `(x, y)` to the complement, negative outside.
    pub fn depth(&self, x: f64, y: f64) -> f64 {
        match *self {
            Primitive::Rect { x0, y0, x1, y1 } => (x - x0).min(x1 - x).min(y - y0).min(y1 - y),
            Primitive::Disc { cx, cy, r } => r - libm::hypot(x - cx, y - cy),
        }
    }

    /// Euclidean distance from `(x, y)` to the closure of the shape.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Primitive::Rect { x0, y0, x1, y1 } => {
                let dx = (x0 - x).max(0.0).max(x - x1);
                let dy = (y0 - y).max(0.0).max(y - y1);
                libm::hypot(dx, dy)
            }
            Primitive::Disc { cx, cy, r } => (libm::hypot(x - cx, y - cy) - r).max(0.0),
        }
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        match *self {
            Primitive::Rect { x0, y0, x1, y1 } => (x0, y0, x1, y1),
            Primitive::Disc { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Primitive::Rect { x0, y0, x1, y1 } => [x0, y0, x1, y1].iter().all(|v| v.is_finite()) && x1 > x0 && y1 > y0,
            Primitive::Disc { cx, cy, r } => cx.is_finite() && cy.is_finite() && r.is_finite() && r > 0.0,
        }
    }
}

/// Union of open primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    parts: Vec<Primitive>,
}

impl DomainSpec {
    pub fn new(parts: Vec<Primitive>) -> Result<Self, GridError> {
        if parts.is_empty() {
            return Err(GridError::InvalidGrid("domain needs at least one primitive"));
        }
        if !parts.iter().all(Primitive::is_valid) {
            return Err(GridError::InvalidGrid("degenerate domain primitive"));
        }
        Ok(Self { parts })
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GridError> {
        Self::new(alloc::vec![Primitive::Rect { x0, y0, x1, y1 }])
    }

    pub fn disc(cx: f64, cy: f64, r: f64) -> Result<Self, GridError> {
        Self::new(alloc::vec![Primitive::Disc { cx, cy, r }])
    }

    pub fn parts(&self) -> &[Primitive] {
        &self.parts
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.parts.iter().any(|p| p.contains(x, y))
    }

    pub fn depth(&self, x: f64, y: f64) -> f64 {
        self.parts
            .iter()
            .map(|p| p.depth(x, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distance to the closure of the domain (0 inside).
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        self.parts
            .iter()
            .map(|p| p.distance(x, y))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.parts.iter().map(Primitive::bbox).fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3)),
        )
    }

    /// Grid aligned to multiples of `h` covering the domain with a margin of
    /// `R + 3h` on every side.
    pub fn covering_grid(&self, r: f64, h: f64) -> Result<GridSpec, GridError> {
        let (x0, y0, x1, y1) = self.bbox();
        let m = r + 3.0 * h;
        GridSpec::covering(x0 - m, y0 - m, x1 + m, y1 + m, h)
    }
}

/// Classifies every node as interior, strip (`0 ≤ d(x, Ω) ≤ R` outside Ω)
/// or far.
pub fn build_mask(domain: &DomainSpec, r: f64, spec: GridSpec) -> Result<RegionMask, GridError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(GridError::StripWidthOutOfRange(r));
    }
    let (bx0, by0, bx1, by1) = domain.bbox();
    let (gx0, gy0, gx1, gy1) = spec.extent();
    let need = r + 2.0 * spec.h();
    let slack = CLASSIFY_TOL * (1.0 + need);
    for (ok, side) in [
        (bx0 - gx0 >= need - slack, "left"),
        (gx1 - bx1 >= need - slack, "right"),
        (by0 - gy0 >= need - slack, "bottom"),
        (gy1 - by1 >= need - slack, "top"),
    ] {
        if !ok {
            return Err(GridError::MarginTooSmall { required: need, side });
        }
    }

    // Nodes within roundoff of the boundary count as exterior.
    let on_boundary = 1e-9 * spec.h();
    let mut classes = Vec::with_capacity(spec.len());
    let mut any_interior = false;
    for k in 0..spec.len() {
        let (x, y) = spec.position_of(k);
        let class = if domain.depth(x, y) > on_boundary {
            any_interior = true;
            NodeClass::Interior
        } else if domain.distance(x, y) <= r * (1.0 + 1e-9) {
            NodeClass::Strip
        } else {
            NodeClass::Far
        };
        classes.push(class);
    }
    if !any_interior {
        return Err(GridError::EmptyInterior);
    }
    Ok(RegionMask::from_classes(spec, classes, r))
}
