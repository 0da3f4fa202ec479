use super::{distance_transform, GridError, NodeSet, ScalarField};

fn check_radius(t: f64) -> Result<(), GridError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(GridError::InvalidLength(t))
    }
}

/// `{x : d(x) ≤ t}` for a precomputed distance field.
pub fn dilate_from_distance(d: &ScalarField, t: f64) -> Result<NodeSet, GridError> {
    check_radius(t)?;
    let spec = *d.spec();
    let cut = t * (1.0 + 1e-9);
    NodeSet::from_flags(spec, d.values().iter().map(|&v| v <= cut).collect())
}

/// Closed `t`-neighbourhood `E_t = {x : d(x, s) ≤ t}`. Closing it makes a
/// lattice-aligned `t` count the full outer layer, so node areas track the
/// continuum dilation.
pub fn dilate(s: &NodeSet, t: f64) -> Result<NodeSet, GridError> {
    check_radius(t)?;
    dilate_from_distance(&distance_transform(s)?, t)
}

/// `U_t = E_t \ s`.
pub fn newly_created(s: &NodeSet, t: f64) -> Result<NodeSet, GridError> {
    Ok(dilate(s, t)?.difference(s))
}
