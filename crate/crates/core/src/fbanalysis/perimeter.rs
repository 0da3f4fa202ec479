use alloc::vec::Vec;

use super::AnalysisError;
use crate::grid::{dilate_from_distance, distance_transform, NodeSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerimeterRow {
    pub t: f64,
    /// Exposed faces of `E_t` times `h`.
    pub edge_perimeter: f64,
    /// `|U_t|` as node count times `h²`.
    pub ut_area: f64,
    pub ut_over_t: f64,
    /// `edge_perimeter / (|U_t| / t)`, `+∞` when `U_t` is empty.
    pub ratio: f64,
}

/// Perimeter of each dilation `E_t` against the mean width `|U_t|/t` of the
/// newly created layer `U_t = E_t \ E`.
pub fn perimeter_and_ratio(e: &NodeSet, t_list: &[f64]) -> Result<Vec<PerimeterRow>, AnalysisError> {
    if e.is_empty() {
        return Err(AnalysisError::EmptySupport);
    }
    let h = e.spec().h();
    let min = 4.0 * h;
    if let Some(&t) = t_list.iter().find(|&&t| !(t >= min * (1.0 - 1e-12))) {
        return Err(AnalysisError::TTooSmall { t, min });
    }
    let d = distance_transform(e)?;
    t_list
        .iter()
        .map(|&t| {
            let et = dilate_from_distance(&d, t)?;
            let ut = et.difference(e);
            let edge_perimeter = et.exposed_faces() as f64 * h;
            let ut_area = ut.count() as f64 * h * h;
            let ut_over_t = ut_area / t;
            let ratio = if ut_over_t > 0.0 {
                edge_perimeter / ut_over_t
            } else {
                f64::INFINITY
            };
            Ok(PerimeterRow {
                t,
                edge_perimeter,
                ut_area,
                ut_over_t,
                ratio,
            })
        })
        .collect()
}
