//! Diagnostics of computed densities: thresholded supports and their gaps,
//! far/near sets, exterior tangent balls, dilation perimeter ratios,
//! exponential decay fits and Harnack ratios, collected into a
//! [`GeometryReport`].

mod decay;
mod perimeter;
mod report;
mod support;

pub use decay::{decay_strip, fit_decay, harnack_ratio, DecayFit, DecayStrip, DECAY_FLOOR, MIN_DECAY_SAMPLES};
pub use perimeter::{perimeter_and_ratio, PerimeterRow};
pub use report::{
    analyze_state, overlap_metric, safe_region, AnalysisOptions, GeometryReport, PairGap, SpeciesGeometry,
};
pub use support::{
    containment_check, default_sigma, exterior_ball_check, far_and_near, free_boundary, support_gap, ContainmentReport,
    ExteriorBallReport, FarNear, SupportGap, SupportSet,
};

use crate::grid::GridError;
use crate::nonlocal::NonlocalError;
use crate::pucci::PucciError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("support set is empty")]
    EmptySupport,
    #[error("dilation radius {t} is below 4h = {min}")]
    TTooSmall { t: f64, min: f64 },
    #[error("only {found} usable samples in the decay strip (need {needed})")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("ball of radius {0} leaves the interior")]
    BallEscapesDomain(f64),
    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),
    #[error("inputs live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Pucci(#[from] PucciError),
    #[error(transparent)]
    Nonlocal(#[from] NonlocalError),
}
