//! Acceptance criteria A1–A10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion ids (e.g. `A5 A6`) as
//! arguments to run a subset.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use segsolve::config::KernelChoice;
use segsolve::run::{perimeter_shapes, prepare, sweep, sweep_states, SweepStep};
use segsolve::Config;
use segsolve_core::fbanalysis::perimeter_and_ratio;
use segsolve_core::solver::{solve_system_observed, CONTAINMENT_TOL};
use segsolve_core::*;
use segsolve_verify::{Checks, Verdict};

type Criterion = fn(&mut Checks);

const CRITERIA: [(&str, &str, Criterion); 10] = [
    ("A1", "Pucci algebra", a1_pucci_algebra),
    ("A2", "scheme exactness", a2_scheme_exactness),
    ("A3", "scaling law", a3_scaling_law),
    ("A4", "comparison and containment", a4_comparison),
    ("A5", "segregation limit", a5_segregation),
    ("A6", "decay rate scaling", a6_decay),
    ("A7", "residual vanishing", a7_residual),
    ("A8", "free-boundary geometry", a8_geometry),
    ("A9", "perimeter bound", a9_perimeter),
    ("A10", "determinism", a10_determinism),
];

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with('A')).collect();
    let mut verdicts = Vec::new();
    for (id, title, run) in CRITERIA {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let t = Instant::now();
        let mut checks = Checks::new();
        run(&mut checks);
        let v = Verdict {
            id,
            title,
            pass: checks.pass(),
            detail: checks.detail(),
            elapsed: t.elapsed(),
        };
        println!("{v}");
        verdicts.push(v);
    }
    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    println!(
        "\nacceptance: {} passed, {} failed{}",
        verdicts.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({})", failed.join(", "))
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

fn a1_pucci_algebra(c: &mut Checks) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let mat = |rng: &mut ChaCha8Rng| {
        SymMatrix2::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
    };
    let tol = 1e-12;
    let mut worst = [0.0f64; 5];
    for _ in 0..1000 {
        let (m, n) = (mat(&mut rng), mat(&mut rng));
        let l = rng.gen_range(0.1..2.0);
        let ell = EllipticityPair::new(l, l * rng.gen_range(1.0..4.0)).unwrap();
        let t = rng.gen_range(0.0..4.0);
        let minus = |x: &SymMatrix2| pucci_minus_mat(x, &ell);
        let plus = |x: &SymMatrix2| pucci_plus_mat(x, &ell);
        let sum = m + n;
        // Violation amounts; non-positive means the relation holds exactly.
        let v = [
            (minus(&m) + plus(&-m)).abs(),
            (minus(&m.scale(t)) - t * minus(&m))
                .abs()
                .max((plus(&m.scale(t)) - t * plus(&m)).abs()),
            (minus(&m) - ell.lambda() * m.trace()).max(ell.big_lambda() * m.trace() - plus(&m)),
            (minus(&m) + minus(&n) - minus(&sum)).max(minus(&sum) - minus(&m) - plus(&n)),
            (plus(&m) + minus(&n) - plus(&sum)).max(plus(&sum) - plus(&m) - plus(&n)),
        ];
        for (w, x) in worst.iter_mut().zip(v) {
            *w = w.max(x);
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    for (k, w) in worst.iter().enumerate() {
        c.check(*w <= tol, format!("property {} worst violation {w:.1e}", k + 1));
    }
    c.check(elapsed < 1.0, format!("{elapsed:.3}s for 1000 cases"));
}

/// Strip-shaped test region away from the origin for `|x|^{-1}`.
fn radial_residual(h: f64, width: u32) -> f64 {
    let dom = DomainSpec::rect(1.5, -0.5, 2.5, 0.5).unwrap();
    let mask = build_mask(&dom, 0.3, dom.covering_grid(0.3, h).unwrap()).unwrap();
    let u = ScalarField::from_fn(*mask.spec(), |x, y| 1.0 / x.hypot(y)).unwrap();
    let ell = EllipticityPair::new(1.0, 2.0).unwrap();
    let m = discrete_pucci_minus(&u, &mask, &ell, &FrameSet::with_width(width).unwrap()).unwrap();
    // The exact value is (2λ − Λ)/|x|³ = 0.
    m.max_abs(Some(&m.evaluable))
}

fn a2_radial_reference() -> f64 {
    static REF: OnceLock<f64> = OnceLock::new();
    *REF.get_or_init(|| radial_residual(1.0 / 64.0, 3))
}

fn a2_scheme_exactness(c: &mut Checks) {
    let dom = DomainSpec::rect(0.0, 0.0, 1.0, 1.0).unwrap();
    let h = 1.0 / 64.0;
    let mask = build_mask(&dom, 0.3, dom.covering_grid(0.3, h).unwrap()).unwrap();
    let u = ScalarField::from_fn(*mask.spec(), |x, y| 0.5 * (x * x + y * y)).unwrap();
    let mut quad_err = 0.0f64;
    for lambda in [0.5, 1.0, 2.0] {
        let ell = EllipticityPair::new(lambda, 2.0 * lambda).unwrap();
        let m = discrete_pucci_minus(&u, &mask, &ell, &FrameSet::default()).unwrap();
        for k in m.evaluable.iter() {
            quad_err = quad_err.max((m.values.at(k) - 2.0 * lambda).abs());
        }
    }
    c.check(quad_err <= 1e-10, format!("quadratic max error {quad_err:.1e}"));

    let r64 = a2_radial_reference();
    let r128 = radial_residual(1.0 / 128.0, 3);
    let w4 = radial_residual(1.0 / 64.0, 4);
    c.check(r64 < 0.05, format!("radial residual {r64:.4e} at h=1/64, W=3"));
    c.check(r128 < r64, format!("{r128:.4e} at h=1/128"));
    c.check(w4 < r64, format!("{w4:.4e} at W=4"));
}

fn a3_scaling_law(c: &mut Checks) {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for radius in [0.5, 1.0] {
        let dom = DomainSpec::rect(0.0, 0.0, 1.0, 1.0).unwrap();
        let mask = build_mask(&dom, radius, dom.covering_grid(radius, 1.0 / 16.0).unwrap()).unwrap();
        let spec = *mask.spec();
        for seed in 0..8u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = ScalarField::from_values(spec, (0..spec.len()).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
            for kind in [KernelKind::Sup, KernelKind::Avg { p: 1.0 }, KernelKind::Avg { p: 3.0 }] {
                worst = worst.max(scaling_check(&w, &mask, kind, radius).unwrap());
                cases += 1;
            }
        }
    }
    c.check(
        worst <= 1e-12,
        format!("worst discrepancy {worst:.1e} over {cases} cases"),
    );
}

fn strip_config(resolution: u32, kernel: KernelChoice) -> Config {
    let mut cfg = Config::bundled("two_strip").unwrap();
    cfg.domain.resolution = resolution;
    cfg.solver.kernel = kernel;
    cfg
}

fn a4_comparison(c: &mut Checks) {
    let dom = DomainSpec::rect(0.0, 0.0, 1.0, 1.0).unwrap();
    let mask = build_mask(&dom, 0.25, dom.covering_grid(0.25, 1.0 / 16.0).unwrap()).unwrap();
    let spec = *mask.spec();
    let solver = DirichletSolver::new(&mask, EllipticityPair::default(), &FrameSet::default()).unwrap();
    let mut worst = f64::INFINITY;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..spec.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f: Vec<f64> = g.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect();
        let scale = rng.gen_range(0.0..50.0);
        let cc: Vec<f64> = (0..spec.len()).map(|_| scale * rng.gen_range(0.0..1.0)).collect();
        let cc = ScalarField::from_values(spec, cc).unwrap();
        let (vf, _) = solver
            .solve(&cc, &ScalarField::from_values(spec, f).unwrap(), None, 1e-12, 100)
            .unwrap();
        let (vg, _) = solver
            .solve(&cc, &ScalarField::from_values(spec, g).unwrap(), None, 1e-12, 100)
            .unwrap();
        for k in 0..spec.len() {
            worst = worst.min(vf.at(k) - vg.at(k));
        }
    }
    c.check(
        worst >= -1e-9,
        format!("ordered solutions, min(v_f - v_g) = {worst:.1e}"),
    );

    for kernel in [KernelChoice::Sup, KernelChoice::Avg] {
        let mut cfg = strip_config(24, kernel);
        cfg.solver.eps = 0.2;
        let (sc, init, _) = prepare(cfg).unwrap();
        let (mut over, mut min, mut iterates) = (f64::NEG_INFINITY, f64::INFINITY, 0);
        let res = solve_system_observed(init, &sc.params, &sc.mask, &sc.frames, &sc.stencil, |_, st| {
            let (o, m) = st.containment();
            over = over.max(o);
            min = min.min(m);
            iterates += 1;
        });
        let ok = res.is_ok() && over <= CONTAINMENT_TOL && min >= 0.0;
        c.check(
            ok,
            format!("{kernel:?}: {iterates} iterates, max u-phi {over:.1e}, min u {min:.1e}"),
        );
    }
}

/// Two-strip sweeps at h = 1/48 for both kernels, shared by A5–A8.
struct StripRun {
    kernel: KernelChoice,
    h: f64,
    r: f64,
    steps: Vec<SweepStep>,
    failure: Option<String>,
    seconds: f64,
}

fn strip_runs() -> &'static [StripRun] {
    static RUNS: OnceLock<Vec<StripRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [KernelChoice::Sup, KernelChoice::Avg]
            .into_iter()
            .map(|kernel| {
                let t = Instant::now();
                let cfg = strip_config(48, kernel);
                assert_eq!(cfg.solver.schedule, vec![0.2, 0.1, 0.05]);
                let (sc, init, _) = prepare(cfg).unwrap();
                let (steps, failure) = sweep_states(&sc, init).unwrap();
                StripRun {
                    kernel,
                    h: sc.h(),
                    r: sc.params.r,
                    steps,
                    failure: failure.map(|e| e.to_string()),
                    seconds: t.elapsed().as_secs_f64(),
                }
            })
            .collect()
    })
}

fn complete(c: &mut Checks, run: &StripRun) -> bool {
    let ok = run.failure.is_none() && run.steps.len() == 3;
    if !ok {
        c.check(false, format!("{:?}: sweep incomplete: {:?}", run.kernel, run.failure));
    }
    ok
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn a5_segregation(c: &mut Checks) {
    for run in strip_runs() {
        if !complete(c, run) {
            continue;
        }
        let overlap: Vec<f64> = run.steps.iter().map(|s| s.geometry.overlap).collect();
        let gaps: Vec<f64> = run.steps.iter().map(|s| s.geometry.min_gap()).collect();
        let k = run.kernel;
        c.check(
            nonincreasing(&overlap),
            format!("{k:?} overlap {} nonincreasing", fmt_list(&overlap)),
        );
        c.check(
            overlap[2] <= 1e-3,
            format!("{k:?} overlap at 0.05 is {:.3e} <= 1e-3", overlap[2]),
        );
        let need = run.r - 4.0 * run.h;
        c.check(
            gaps.iter().all(|&g| g >= need),
            format!("{k:?} gaps {} >= {need:.4}", fmt_list(&gaps)),
        );
        c.check(run.seconds <= 300.0, format!("{k:?} {:.1}s", run.seconds));
    }
}

fn a6_decay(c: &mut Checks) {
    for run in strip_runs() {
        if !complete(c, run) {
            continue;
        }
        for i in 0..2 {
            let ks: Result<Vec<f64>, String> = run
                .steps
                .iter()
                .map(|s| match &s.geometry.species[i].decay[0].1 {
                    Ok(fit) => Ok(fit.k),
                    Err(e) => Err(e.to_string()),
                })
                .collect();
            let ks = match ks {
                Ok(ks) => ks,
                Err(e) => {
                    c.check(false, format!("{:?} species {}: fit failed: {e}", run.kernel, i + 1));
                    continue;
                }
            };
            let (r1, r2) = (ks[1] / ks[0], ks[2] / ks[1]);
            let inside = |r: f64| (1.6..=2.4).contains(&r);
            c.check(
                inside(r1) && inside(r2),
                format!(
                    "{:?} species {} k = {} ratios {r1:.3}, {r2:.3}",
                    run.kernel,
                    i + 1,
                    fmt_list(&ks)
                ),
            );
        }
    }
}

fn a7_residual(c: &mut Checks) {
    let bound = 10.0 * a2_radial_reference();
    for run in strip_runs() {
        if !complete(c, run) {
            continue;
        }
        let res: Vec<f64> = run
            .steps
            .iter()
            .map(|s| s.geometry.species.iter().map(|g| g.safe_residual).fold(0.0, f64::max))
            .collect();
        let k = run.kernel;
        c.check(
            nonincreasing(&res),
            format!("{k:?} safe residual {} nonincreasing", fmt_list(&res)),
        );
        c.check(res[2] <= bound, format!("{k:?} {:.3e} <= {bound:.3e} at 0.05", res[2]));
    }
}

fn a8_geometry(c: &mut Checks) {
    for run in strip_runs() {
        if !complete(c, run) {
            continue;
        }
        let last = &run.steps[2];
        assert_eq!(last.eps, 0.05);
        for g in &last.geometry.species {
            let contained = g.containment.as_ref().is_some_and(|r| r.passed);
            let rate = g.exterior_ball.as_ref().map_or(0.0, |e| e.pass_rate);
            c.check(
                contained,
                format!("{:?} species {} containment", run.kernel, g.species + 1),
            );
            c.check(
                rate >= 0.95,
                format!(
                    "{:?} species {} exterior ball rate {rate:.3}",
                    run.kernel,
                    g.species + 1
                ),
            );
        }
    }
}

fn a9_perimeter(c: &mut Checks) {
    let ts = [0.05, 0.1, 0.2];
    let (_, shapes) = perimeter_shapes(128, 7).unwrap();
    let mut worst_ratio = 0.0f64;
    for (name, set) in &shapes {
        for row in perimeter_and_ratio(set, &ts).unwrap() {
            worst_ratio = worst_ratio.max(row.ratio);
            if name == "disc" {
                let r = 0.5;
                let exact = std::f64::consts::PI * ((r + row.t).powi(2) - r * r) / row.t;
                let rel = (row.ut_over_t - exact) / exact;
                c.check(
                    rel.abs() <= 0.05,
                    format!("disc |U_t|/t at t={} off by {:+.2}%", row.t, 100.0 * rel),
                );
            }
        }
    }
    c.check(
        worst_ratio <= 8.0,
        format!("max ratio {worst_ratio:.4} over {} shapes", shapes.len()),
    );
}

fn csv_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let bytes = fs::read(&p).unwrap();
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn a10_determinism(c: &mut Checks) {
    let dir = tempfile::tempdir().unwrap();
    let trees: Vec<_> = (0..2)
        .map(|n| {
            let out = dir.path().join(format!("run{n}"));
            sweep(strip_config(24, KernelChoice::Avg), &out).unwrap();
            csv_tree(&out)
        })
        .collect();
    let differing: Vec<String> = trees[0]
        .iter()
        .zip(&trees[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.display().to_string())
        .collect();
    c.check(
        trees[0].len() == trees[1].len() && differing.is_empty(),
        format!("{} CSV files compared, {} differ", trees[0].len(), differing.len()),
    );
}
