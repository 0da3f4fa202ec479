//! Exact Euclidean distance transform (lower envelope of parabolas, one pass
//! per axis).

use alloc::vec;
use alloc::vec::Vec;

use super::{GridError, NodeSet, ScalarField};

/// 1-D squared distance transform of `f` (entries may be `+∞`), written to
/// `out`. `v` and `z` are scratch buffers.
fn envelope_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
            continue;
        }
        let qf = q as f64;
        loop {
            let p = *v.last().unwrap();
            let pf = p as f64;
            let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
                if v.is_empty() {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
            } else {
                v.push(q);
                z.push(s);
                break;
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance to the nearest member, in index units. Every entry is an
/// exact integer.
pub fn squared_index_distance(s: &NodeSet) -> Result<Vec<f64>, GridError> {
    if s.is_empty() {
        return Err(GridError::EmptySet);
    }
    let spec = *s.spec();
    let (nx, ny) = (spec.nx(), spec.ny());
    let mut d: Vec<f64> = s.flags().iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();

    let mut v = Vec::new();
    let mut z = Vec::new();
    let mut col = vec![0.0; ny];
    let mut col_out = vec![0.0; ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = d[j * nx + i];
        }
        envelope_1d(&col, &mut col_out, &mut v, &mut z);
        for j in 0..ny {
            d[j * nx + i] = col_out[j];
        }
    }
    let mut row_out = vec![0.0; nx];
    for j in 0..ny {
        let row = &mut d[j * nx..(j + 1) * nx];
        envelope_1d(row, &mut row_out, &mut v, &mut z);
        row.copy_from_slice(&row_out);
    }
    Ok(d)
}

/// Exact Euclidean distance (physical units) from every node to the nearest
/// node of `s`.
pub fn distance_transform(s: &NodeSet) -> Result<ScalarField, GridError> {
    let spec = *s.spec();
    let h = spec.h();
    let d = squared_index_distance(s)?;
    ScalarField::from_values(spec, d.into_iter().map(|q| h * libm::sqrt(q)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn brute(s: &NodeSet) -> Vec<f64> {
        let spec = *s.spec();
        let members: Vec<_> = s.iter().map(|k| spec.coords(k)).collect();
        (0..spec.len())
            .map(|k| {
                let (i, j) = spec.coords(k);
                members
                    .iter()
                    .map(|&(a, b)| {
                        let (di, dj) = (i as f64 - a as f64, j as f64 - b as f64);
                        di * di + dj * dj
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn singleton_is_exact() {
        let spec = GridSpec::new(20, 13, 0.3, (1.0, -2.0)).unwrap();
        let p = spec.index(7, 4);
        let d = distance_transform(&NodeSet::from_indices(spec, [p])).unwrap();
        for k in 0..spec.len() {
            let (i, j) = spec.coords(k);
            let (di, dj) = (i as f64 - 7.0, j as f64 - 4.0);
            assert_eq!(d.at(k), 0.3 * (di * di + dj * dj).sqrt());
        }
    }

    #[test]
    fn two_points_match_brute_force() {
        let spec = GridSpec::new(32, 32, 1.0 / 32.0, (0.0, 0.0)).unwrap();
        let s = NodeSet::from_indices(spec, [spec.index(3, 28), spec.index(25, 9)]);
        assert_eq!(squared_index_distance(&s).unwrap(), brute(&s));
    }

    #[test]
    fn scattered_sets_match_brute_force() {
        let spec = GridSpec::new(37, 23, 1.0, (0.0, 0.0)).unwrap();
        let mut state = 12345u64;
        for _ in 0..20 {
            let s = NodeSet::from_indices(
                spec,
                (0..spec.len()).filter(|_| {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    (state >> 33).is_multiple_of(29)
                }),
            );
            if s.is_empty() {
                continue;
            }
            assert_eq!(squared_index_distance(&s).unwrap(), brute(&s));
        }
    }

    #[test]
    fn full_set_is_zero_and_empty_errors() {
        let spec = GridSpec::new(5, 6, 0.5, (0.0, 0.0)).unwrap();
        let d = distance_transform(&NodeSet::full(spec)).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
        assert_eq!(distance_transform(&NodeSet::empty(spec)), Err(GridError::EmptySet));
    }
}
