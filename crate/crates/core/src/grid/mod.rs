//! Uniform 2-D node grids and the data that lives on them.

use alloc::vec;
use alloc::vec::Vec;

mod domain;
mod edt;
mod morphology;

pub use domain::{build_mask, DomainSpec, Primitive};
pub use edt::{distance_transform, squared_index_distance};
pub use morphology::{dilate, dilate_from_distance, newly_created};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("strip width R = {0} is outside (0, 1]")]
    StripWidthOutOfRange(f64),
    #[error("domain plus strip of width {required} does not fit inside the grid (side: {side})")]
    MarginTooSmall { required: f64, side: &'static str },
    #[error("no grid node falls inside the domain")]
    EmptyInterior,
    #[error("operation needs a nonempty node set")]
    EmptySet,
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("grids do not match")]
    GridMismatch,
    #[error("length {0} must be positive and finite")]
    InvalidLength(f64),
}

/// Uniform grid: node `(i, j)` sits at `origin + (i·h, j·h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    h: f64,
    origin: (f64, f64),
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, h: f64, origin: (f64, f64)) -> Result<Self, GridError> {
        if nx < 3 || ny < 3 {
            return Err(GridError::InvalidGrid("nx and ny must be at least 3"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(GridError::InvalidGrid("spacing must be positive and finite"));
        }
        if !origin.0.is_finite() || !origin.1.is_finite() {
            return Err(GridError::InvalidGrid("origin must be finite"));
        }
        Ok(Self { nx, ny, h, origin })
    }

    /// Smallest grid aligned to integer multiples of `h` that contains the box
    /// `[xmin, xmax] × [ymin, ymax]`.
    pub fn covering(xmin: f64, ymin: f64, xmax: f64, ymax: f64, h: f64) -> Result<Self, GridError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GridError::InvalidGrid("spacing must be positive and finite"));
        }
        if !(xmax > xmin) || !(ymax > ymin) {
            return Err(GridError::InvalidGrid("empty bounding box"));
        }
        let i0 = libm::floor(xmin / h + 1e-9);
        let j0 = libm::floor(ymin / h + 1e-9);
        let i1 = libm::ceil(xmax / h - 1e-9);
        let j1 = libm::ceil(ymax / h - 1e-9);
        let nx = (i1 - i0) as usize + 1;
        let ny = (j1 - j0) as usize + 1;
        Self::new(nx, ny, h, (i0 * h, j0 * h))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize) -> (f64, f64) {
        (self.origin.0 + i as f64 * self.h, self.origin.1 + j as f64 * self.h)
    }

    #[inline]
    pub fn position_of(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.coords(idx);
        self.position(i, j)
    }

    /// Index of `(i + di, j + dj)` if it lies on the grid.
    #[inline]
    pub fn offset(&self, idx: usize, di: i64, dj: i64) -> Option<usize> {
        let (i, j) = self.coords(idx);
        let ii = i as i64 + di;
        let jj = j as i64 + dj;
        if ii < 0 || jj < 0 || ii >= self.nx as i64 || jj >= self.ny as i64 {
            None
        } else {
            Some(jj as usize * self.nx + ii as usize)
        }
    }

    /// Nearest node to a physical point, if the point is within half a cell
    /// of the grid.
    pub fn nearest_node(&self, x: f64, y: f64) -> Option<usize> {
        let fi = libm::round((x - self.origin.0) / self.h);
        let fj = libm::round((y - self.origin.1) / self.h);
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some(self.index(fi as usize, fj as usize))
    }

    /// Extent `(xmin, ymin, xmax, ymax)` of the node positions.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let (x1, y1) = self.position(self.nx - 1, self.ny - 1);
        (self.origin.0, self.origin.1, x1, y1)
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(spec: GridSpec, value: f64) -> Self {
        assert!(value.is_finite(), "field values must be finite");
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != spec.len() {
            return Err(GridError::GridMismatch);
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(k));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f(x, y)` at every node position. Non-finite samples are
    /// rejected.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self, GridError> {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ny() {
            for i in 0..spec.nx() {
                let (x, y) = spec.position(i, j);
                values.push(f(x, y));
            }
        }
        Self::from_values(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn set(&mut self, idx: usize, value: f64) {
        assert!(value.is_finite(), "field values must be finite");
        self.values[idx] = value;
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self, GridError> {
        Self::from_values(self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Sup-norm of the difference, optionally restricted to `nodes`.
    pub fn max_abs_diff(&self, other: &ScalarField, nodes: Option<&NodeSet>) -> f64 {
        assert_eq!(self.spec, other.spec);
        let mut m = 0.0f64;
        for (k, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            if nodes.is_none_or(|s| s.contains(k)) {
                m = m.max(libm::fabs(a - b));
            }
        }
        m
    }

    pub fn max_over(&self, nodes: &NodeSet) -> Option<f64> {
        nodes.iter().map(|k| self.values[k]).reduce(f64::max)
    }
}

/// Membership flag per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    spec: GridSpec,
    members: Vec<bool>,
}

// GridSpec holds floats but is compared with exact equality throughout.
impl Eq for GridSpec {}

impl NodeSet {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            members: vec![false; spec.len()],
        }
    }

    pub fn full(spec: GridSpec) -> Self {
        Self {
            spec,
            members: vec![true; spec.len()],
        }
    }

    pub fn from_flags(spec: GridSpec, members: Vec<bool>) -> Result<Self, GridError> {
        if members.len() != spec.len() {
            return Err(GridError::GridMismatch);
        }
        Ok(Self { spec, members })
    }

    /// Membership decided by the physical position of each node.
    pub fn from_positions(spec: GridSpec, mut pred: impl FnMut(f64, f64) -> bool) -> Self {
        let members = (0..spec.len())
            .map(|k| {
                let (x, y) = spec.position_of(k);
                pred(x, y)
            })
            .collect();
        Self { spec, members }
    }

    pub fn from_indices(spec: GridSpec, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(spec);
        for k in indices {
            s.members[k] = true;
        }
        s
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.members[idx]
    }

    pub fn insert(&mut self, idx: usize) {
        self.members[idx] = true;
    }

    pub fn remove(&mut self, idx: usize) {
        self.members[idx] = false;
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    pub fn flags(&self) -> &[bool] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter_map(|(k, &m)| m.then_some(k))
    }

    fn zip_with(&self, other: &NodeSet, op: impl Fn(bool, bool) -> bool) -> NodeSet {
        assert_eq!(self.spec, other.spec, "node sets live on different grids");
        NodeSet {
            spec: self.spec,
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &NodeSet) -> NodeSet {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> NodeSet {
        NodeSet {
            spec: self.spec,
            members: self.members.iter().map(|&m| !m).collect(),
        }
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        assert_eq!(self.spec, other.spec);
        self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    /// Members with at least one 4-neighbour outside the set. Nodes on the
    /// edge of the grid count as exposed.
    pub fn boundary(&self) -> NodeSet {
        let spec = self.spec;
        let mut out = NodeSet::empty(spec);
        for k in self.iter() {
            let exposed = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(di, dj)| spec.offset(k, di, dj).is_none_or(|n| !self.members[n]));
            if exposed {
                out.members[k] = true;
            }
        }
        out
    }

    /// Number of member/non-member 4-neighbour faces (grid edge counts as
    /// non-member).
    pub fn exposed_faces(&self) -> usize {
        let spec = self.spec;
        let mut faces = 0;
        for k in self.iter() {
            for &(di, dj) in &[(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if spec.offset(k, di, dj).is_none_or(|n| !self.members[n]) {
                    faces += 1;
                }
            }
        }
        faces
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    /// Node inside the open domain.
    Interior,
    /// Exterior node within the strip width of the domain, carries boundary data.
    Strip,
    /// Everything else.
    Far,
}

/// Three-way classification of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    spec: GridSpec,
    classes: Vec<NodeClass>,
    strip_width: f64,
}

impl RegionMask {
    pub(crate) fn from_classes(spec: GridSpec, classes: Vec<NodeClass>, strip_width: f64) -> Self {
        debug_assert_eq!(classes.len(), spec.len());
        Self {
            spec,
            classes,
            strip_width,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn strip_width(&self) -> f64 {
        self.strip_width
    }

    #[inline]
    pub fn class(&self, idx: usize) -> NodeClass {
        self.classes[idx]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    #[inline]
    pub fn is_interior(&self, idx: usize) -> bool {
        self.classes[idx] == NodeClass::Interior
    }

    pub fn of_class(&self, class: NodeClass) -> NodeSet {
        NodeSet {
            spec: self.spec,
            members: self.classes.iter().map(|&c| c == class).collect(),
        }
    }

    pub fn interior(&self) -> NodeSet {
        self.of_class(NodeClass::Interior)
    }

    pub fn strip(&self) -> NodeSet {
        self.of_class(NodeClass::Strip)
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&k| self.classes[k] == NodeClass::Interior)
            .collect()
    }

    /// Same classification viewed on a rescaled grid with strip width scaled
    /// accordingly.
    pub fn rescaled(&self, spec: GridSpec, strip_width: f64) -> Result<Self, GridError> {
        if spec.nx() != self.spec.nx() || spec.ny() != self.spec.ny() {
            return Err(GridError::GridMismatch);
        }
        Ok(Self {
            spec,
            classes: self.classes.clone(),
            strip_width,
        })
    }
}
