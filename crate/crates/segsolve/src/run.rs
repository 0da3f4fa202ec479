//! Subcommand orchestration and artifact layout.
//!
//! ```text
//! solve      <out>/u_<i>.csv, convergence.csv, run_metadata.toml
//! sweep      <out>/eps_<ε>/{u_<i>.csv, convergence.csv, geometry.csv,
//!                           geometry.txt, decay.csv}
//!            <out>/summary.csv, run_metadata.toml
//! analyze    reads <out>/u_<i>.csv, writes geometry.csv, geometry.txt
//! perimeter  <out>/perimeter.csv, run_metadata.toml
//! validate   nothing; prints the report
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use segsolve_core::fbanalysis::{
    analyze_state, decay_strip, perimeter_and_ratio, GeometryReport, PerimeterRow, DECAY_FLOOR,
};
use segsolve_core::{eps_continuation, solve_system, GridSpec, IterationReport, NodeSet, SolveError, SpeciesState};

use crate::config::Config;
use crate::error::CliError;
use crate::format::g17;
use crate::io::{convergence_csv, field_csv, geometry_csv, perimeter_csv, read_field_csv, table_csv, write_text};
use crate::scenario::Scenario;
use crate::validate::validate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    Analyze,
    Perimeter,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Analyze => "analyze",
            Command::Perimeter => "perimeter",
            Command::Validate => "validate",
        }
    }
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub frames: Option<u32>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut Config) {
        if let Some(w) = self.frames {
            cfg.solver.frames = w;
        }
        if let Some(s) = self.seed {
            cfg.perimeter.seed = s;
        }
    }
}

/// Runs one subcommand and returns the text to print on stdout.
pub fn run(cmd: Command, cfg: Config, out: &Path) -> Result<String, CliError> {
    match cmd {
        Command::Validate => {
            let sc = Scenario::build(cfg)?;
            let rep = validate(&sc)?;
            Ok(format!("{}: valid\n{rep}", sc.config.name))
        }
        Command::Solve => solve(cfg, out),
        Command::Sweep => sweep(cfg, out).map(|s| s.text),
        Command::Analyze => analyze(cfg, out),
        Command::Perimeter => perimeter(cfg, out),
    }
}

#[derive(Serialize)]
struct RunInfo {
    command: &'static str,
    version: &'static str,
    grid: [usize; 2],
    h: f64,
    interior_nodes: usize,
    strip_nodes: usize,
    frame_width: i64,
    frame_count: usize,
    frames: String,
    stencil_nodes: usize,
    threads: usize,
    results: BTreeMap<String, f64>,
    /// Wall-clock seconds per phase.
    timings: BTreeMap<String, f64>,
}

impl RunInfo {
    fn new(command: Command, sc: &Scenario) -> Self {
        let spec = sc.mask.spec();
        Self {
            command: command.name(),
            version: env!("CARGO_PKG_VERSION"),
            grid: [spec.nx(), spec.ny()],
            h: spec.h(),
            interior_nodes: sc.mask.interior().count(),
            strip_nodes: sc.mask.strip().count(),
            frame_width: sc.frames.width(),
            frame_count: sc.frames.len(),
            frames: sc.frames.to_string(),
            stencil_nodes: sc.stencil.count(),
            threads: rayon::current_num_threads(),
            results: BTreeMap::new(),
            timings: BTreeMap::new(),
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    run: RunInfo,
    config: &'a Config,
}

fn write_metadata(out: &Path, run: RunInfo, cfg: &Config) -> Result<(), CliError> {
    let text = toml::to_string(&Metadata { run, config: cfg }).expect("metadata serializes");
    write_text(
        &out.join("run_metadata.toml"),
        &format!("# segsolve run metadata\n{text}"),
    )
}

fn write_fields(dir: &Path, u: &[segsolve_core::ScalarField]) -> Result<(), CliError> {
    for (i, ui) in u.iter().enumerate() {
        write_text(&dir.join(format!("u_{}.csv", i + 1)), &field_csv(ui))?;
    }
    Ok(())
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Builds and validates the scenario, then computes the barriers, which
/// also serve as the initial state. The third value is the barrier time.
pub fn prepare(cfg: Config) -> Result<(Scenario, SpeciesState, f64), CliError> {
    let sc = Scenario::build(cfg)?;
    validate(&sc)?;
    let t = Instant::now();
    let init = SpeciesState::with_barriers(sc.f.clone(), &sc.mask, &sc.frames, &sc.params)?;
    Ok((sc, init, secs(t)))
}

fn solve(cfg: Config, out: &Path) -> Result<String, CliError> {
    let (sc, init, t_barrier) = prepare(cfg)?;
    let mut info = RunInfo::new(Command::Solve, &sc);
    info.timings.insert("barriers".into(), t_barrier);
    let t = Instant::now();
    let eps = sc.params.eps;
    let (state, rep, failure) = match solve_system(init, &sc.params, &sc.mask, &sc.frames, &sc.stencil) {
        Ok((state, rep)) => (state, rep, None),
        Err(SolveError::NotConverged {
            state,
            report,
            iterations,
            last_delta,
        }) => {
            let err = CliError::NotConverged {
                eps,
                iterations,
                last_delta,
            };
            (*state, *report, Some(err))
        }
        Err(e) => return Err(e.into()),
    };
    info.timings.insert("solve".into(), secs(t));
    write_fields(out, &state.u)?;
    write_text(&out.join("convergence.csv"), &convergence_csv(&rep))?;
    record_iteration(&mut info.results, &rep);
    info.results.insert("eps".into(), eps);
    write_metadata(out, info, &sc.config)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(format!(
            "{}: converged in {} iterations at eps = {eps}, residual {}\n",
            sc.config.name,
            rep.iterations,
            g17(rep.final_residual)
        )),
    }
}

fn record_iteration(results: &mut BTreeMap<String, f64>, rep: &IterationReport) {
    results.insert("iterations".into(), rep.iterations as f64);
    results.insert("final_residual".into(), rep.final_residual);
    results.insert("converged".into(), if rep.converged { 1.0 } else { 0.0 });
    results.insert("max_barrier_excess".into(), rep.max_barrier_excess);
    results.insert("min_value".into(), rep.min_value);
}

/// Directory name of one sweep step, e.g. `eps_0.05`.
pub fn step_dir(eps: f64) -> String {
    format!("eps_{eps}")
}

/// One converged sweep step.
#[derive(Debug, Clone)]
pub struct SweepStep {
    pub eps: f64,
    pub state: SpeciesState,
    pub report: IterationReport,
    pub geometry: GeometryReport,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub steps: Vec<SweepStep>,
    pub text: String,
}

/// Solves along the ε schedule and analyses every converged step, without
/// touching the file system.
pub fn sweep_states(sc: &Scenario, init: SpeciesState) -> Result<(Vec<SweepStep>, Option<CliError>), CliError> {
    let cont = eps_continuation(
        &sc.config.solver.schedule,
        init,
        &sc.params,
        &sc.mask,
        &sc.frames,
        &sc.stencil,
    )
    .map_err(|e| match e {
        SolveError::InvalidSchedule => CliError::Config(e.to_string()),
        e => e.into(),
    })?;
    let opts = sc.analysis_options();
    let mut steps = Vec::with_capacity(cont.steps.len());
    for step in cont.steps {
        let p = sc.params.with_eps(step.eps);
        let geometry = analyze_state(&step.state, &p, &sc.mask, &sc.frames, &sc.stencil, &opts)?;
        steps.push(SweepStep {
            eps: step.eps,
            state: step.state,
            report: step.report,
            geometry,
        });
    }
    let failure = cont.aborted.map(|(eps, e)| CliError::not_converged(eps, e));
    Ok((steps, failure))
}

pub fn sweep(cfg: Config, out: &Path) -> Result<SweepOutput, CliError> {
    let (sc, init, t_barrier) = prepare(cfg)?;
    let mut info = RunInfo::new(Command::Sweep, &sc);
    info.timings.insert("barriers".into(), t_barrier);
    let t = Instant::now();
    let (steps, failure) = sweep_states(&sc, init)?;
    info.timings.insert("sweep".into(), secs(t));

    let mut summary = Vec::with_capacity(steps.len());
    let mut text = String::new();
    for s in &steps {
        let dir = out.join(step_dir(s.eps));
        write_fields(&dir, &s.state.u)?;
        write_text(&dir.join("convergence.csv"), &convergence_csv(&s.report))?;
        write_text(&dir.join("geometry.csv"), &geometry_csv(&s.geometry))?;
        write_text(&dir.join("geometry.txt"), &geometry_text(&s.geometry, &sc.config))?;
        write_text(&dir.join("decay.csv"), &decay_csv(&sc, &s.state)?)?;
        let row = summary_row(s);
        let _ = writeln!(
            text,
            "eps = {}: {} iterations, overlap {:.3e}, min gap {:.4}",
            s.eps, s.report.iterations, row[3], row[4]
        );
        summary.push(row);
    }
    write_text(&out.join("summary.csv"), &table_csv(&SUMMARY_HEADER, &summary))?;
    info.results.insert("steps".into(), steps.len() as f64);
    write_metadata(out, info, &sc.config)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(SweepOutput { steps, text }),
    }
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "eps",
    "iterations",
    "final_residual",
    "overlap",
    "min_gap",
    "max_safe_residual",
    "min_decay_k",
    "max_exterior_ball_failure",
];

fn summary_row(s: &SweepStep) -> Vec<f64> {
    let g = &s.geometry;
    let safe = g.species.iter().map(|x| x.safe_residual).fold(0.0, f64::max);
    let k = g
        .species
        .iter()
        .flat_map(|x| x.decay.iter().filter_map(|(_, f)| f.as_ref().ok().map(|f| f.k)))
        .fold(f64::NAN, f64::min);
    let ball = g
        .species
        .iter()
        .filter_map(|x| x.exterior_ball.as_ref().map(|e| 1.0 - e.pass_rate))
        .fold(0.0, f64::max);
    vec![
        s.eps,
        s.report.iterations as f64,
        s.report.final_residual,
        g.overlap,
        g.min_gap(),
        safe,
        k,
        ball,
    ]
}

/// Samples behind each decay fit: `species,source,depth,value`.
pub fn decay_csv(sc: &Scenario, state: &SpeciesState) -> Result<String, CliError> {
    let tau = sc.config.analysis.tau_fraction * sc.params.r;
    let mut s = String::from("species,source,depth,value\n");
    let k = state.u.len();
    for j in 0..k {
        let strip = decay_strip(&sc.mask, &state.f[j], j, tau)?;
        for i in (0..k).filter(|&i| i != j) {
            for n in strip.nodes.iter() {
                let v = state.u[i].at(n);
                if v > DECAY_FLOOR {
                    let _ = writeln!(s, "{},{},{},{}", i + 1, j + 1, g17(strip.depth.at(n)), g17(v));
                }
            }
        }
    }
    Ok(s)
}

fn geometry_text(g: &GeometryReport, cfg: &Config) -> String {
    format!("{g}\n# resolved configuration\n{}", cfg.to_toml())
}

fn analyze(cfg: Config, out: &Path) -> Result<String, CliError> {
    let sc = Scenario::build(cfg)?;
    validate(&sc)?;
    let spec = *sc.mask.spec();
    let u = (1..=sc.params.species)
        .map(|i| read_field_csv(&out.join(format!("u_{i}.csv")), spec))
        .collect::<Result<Vec<_>, _>>()?;
    // The report does not read the barriers.
    let state = SpeciesState {
        phi: u.clone(),
        u,
        f: sc.f.clone(),
    };
    let geometry = analyze_state(
        &state,
        &sc.params,
        &sc.mask,
        &sc.frames,
        &sc.stencil,
        &sc.analysis_options(),
    )?;
    write_text(&out.join("geometry.csv"), &geometry_csv(&geometry))?;
    write_text(&out.join("geometry.txt"), &geometry_text(&geometry, &sc.config))?;
    Ok(geometry.to_string())
}

/// The synthetic shapes of the perimeter demonstrator on `[-1.25, 1.25]²`.
pub fn perimeter_shapes(resolution: u32, seed: u64) -> Result<(GridSpec, Vec<(String, NodeSet)>), CliError> {
    let h = 1.0 / resolution as f64;
    let spec = GridSpec::covering(-1.25, -1.25, 1.25, 1.25, h)?;
    let disc = NodeSet::from_positions(spec, |x, y| x * x + y * y <= 0.25);
    let square = NodeSet::from_positions(spec, |x, y| x.abs() <= 0.5 && y.abs() <= 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let discs: Vec<(f64, f64, f64)> = (0..5)
        .map(|_| {
            (
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(0.1..0.3),
            )
        })
        .collect();
    let union = NodeSet::from_positions(spec, |x, y| {
        discs
            .iter()
            .any(|&(a, b, r)| (x - a).powi(2) + (y - b).powi(2) <= r * r)
    });
    Ok((
        spec,
        vec![
            ("disc".into(), disc),
            ("square".into(), square),
            ("random_union".into(), union),
        ],
    ))
}

pub fn perimeter_rows(cfg: &Config) -> Result<Vec<(String, PerimeterRow)>, CliError> {
    let pc = &cfg.perimeter;
    if pc.resolution == 0 {
        return Err(CliError::Config("perimeter.resolution must be positive".into()));
    }
    let (_, shapes) = perimeter_shapes(pc.resolution, pc.seed)?;
    let mut rows = Vec::new();
    for (name, set) in shapes {
        for r in perimeter_and_ratio(&set, &pc.t)? {
            rows.push((name.clone(), r));
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct PerimeterInfo {
    command: &'static str,
    version: &'static str,
    shapes: usize,
    timings: BTreeMap<String, f64>,
}

fn perimeter(cfg: Config, out: &Path) -> Result<String, CliError> {
    let t = Instant::now();
    let rows = perimeter_rows(&cfg)?;
    let csv = perimeter_csv(&rows);
    write_text(&out.join("perimeter.csv"), &csv)?;
    let info = PerimeterInfo {
        command: Command::Perimeter.name(),
        version: env!("CARGO_PKG_VERSION"),
        shapes: 3,
        timings: BTreeMap::from([("perimeter".to_string(), secs(t))]),
    };
    #[derive(Serialize)]
    struct Meta<'a> {
        run: PerimeterInfo,
        config: &'a Config,
    }
    let text = toml::to_string(&Meta {
        run: info,
        config: &cfg,
    })
    .expect("metadata serializes");
    write_text(
        &out.join("run_metadata.toml"),
        &format!("# segsolve run metadata\n{text}"),
    )?;
    Ok(csv)
}

/// Default output directory for a config: `out/<name>`.
pub fn default_out(cfg: &Config) -> PathBuf {
    PathBuf::from("out").join(&cfg.name)
}
