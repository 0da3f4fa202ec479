//! CSV artifacts. All numbers use `%.17g`, lines end in LF, rows of grid
//! fields are row-major.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use segsolve_core::fbanalysis::{GeometryReport, PerimeterRow};
use segsolve_core::{GridSpec, IterationReport, ScalarField};

use crate::error::CliError;
use crate::format::g17;

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// `i,j,x,y,value` for every node.
pub fn field_csv(u: &ScalarField) -> String {
    let spec = u.spec();
    let mut s = String::with_capacity(spec.len() * 64);
    s.push_str("i,j,x,y,value\n");
    for k in 0..spec.len() {
        let (i, j) = spec.coords(k);
        let (x, y) = spec.position(i, j);
        let _ = writeln!(s, "{i},{j},{},{},{}", g17(x), g17(y), g17(u.at(k)));
    }
    s
}

/// Reads a field written by [`field_csv`], checking it against `spec`.
pub fn read_field_csv(path: &Path, spec: GridSpec) -> Result<ScalarField, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |reason: String| CliError::FieldFormat {
        path: path.display().to_string(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some("i,j,x,y,value") {
        return Err(bad("missing header i,j,x,y,value".into()));
    }
    let mut vals = vec![f64::NAN; spec.len()];
    let mut seen = 0usize;
    for (n, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad(format!("line {}: expected 5 columns", n + 2)));
        }
        let parse_idx = |c: &str| {
            c.parse::<usize>()
                .map_err(|_| bad(format!("line {}: bad index {c:?}", n + 2)))
        };
        let (i, j) = (parse_idx(cols[0])?, parse_idx(cols[1])?);
        if i >= spec.nx() || j >= spec.ny() {
            return Err(bad(format!("line {}: node ({i}, {j}) is off the grid", n + 2)));
        }
        let v: f64 = cols[4]
            .parse()
            .map_err(|_| bad(format!("line {}: bad value {:?}", n + 2, cols[4])))?;
        let k = spec.index(i, j);
        if !vals[k].is_nan() {
            return Err(bad(format!("line {}: duplicate node ({i}, {j})", n + 2)));
        }
        vals[k] = v;
        seen += 1;
    }
    if seen != spec.len() {
        return Err(bad(format!("{seen} nodes, grid has {}", spec.len())));
    }
    Ok(ScalarField::from_values(spec, vals)?)
}

/// `iter,delta,residual`, one-based iterations.
pub fn convergence_csv(rep: &IterationReport) -> String {
    let mut s = String::from("iter,delta,residual\n");
    for (n, (d, r)) in rep.deltas.iter().zip(&rep.residuals).enumerate() {
        let _ = writeln!(s, "{},{},{}", n + 1, g17(*d), g17(*r));
    }
    s
}

/// `metric,species,value`.
pub fn geometry_csv(rep: &GeometryReport) -> String {
    let mut s = String::from("metric,species,value\n");
    for (metric, species, value) in rep.rows() {
        let _ = writeln!(s, "{metric},{species},{}", g17(value));
    }
    s
}

/// `shape,t,ut_over_t,edge_perimeter,ratio`.
pub fn perimeter_csv(rows: &[(String, PerimeterRow)]) -> String {
    let mut s = String::from("shape,t,ut_over_t,edge_perimeter,ratio\n");
    for (shape, r) in rows {
        let _ = writeln!(
            s,
            "{shape},{},{},{},{}",
            g17(r.t),
            g17(r.ut_over_t),
            g17(r.edge_perimeter),
            g17(r.ratio)
        );
    }
    s
}

/// Generic numeric table with a fixed header.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| g17(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
