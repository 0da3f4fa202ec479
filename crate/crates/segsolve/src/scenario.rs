//! Turns a [`Config`] into grids, masks, operators and boundary data.

use segsolve_core::fbanalysis::AnalysisOptions;
use segsolve_core::{
    build_mask, BallStencil, DomainSpec, EllipticityPair, FrameSet, KernelKind, Primitive, RegionMask, ScalarField,
    SolveParams, SpeciesUpdate,
};

use crate::config::{Config, KernelChoice, SpeciesConfig, UpdateChoice};
use crate::error::CliError;
use crate::validate::ValidationError;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub domain: DomainSpec,
    pub mask: RegionMask,
    pub frames: FrameSet,
    pub stencil: BallStencil,
    /// Parameters at `solver.eps`.
    pub params: SolveParams,
    /// Boundary data, zero off the strip.
    pub f: Vec<ScalarField>,
}

impl Scenario {
    pub fn build(config: Config) -> Result<Self, CliError> {
        let sc = &config.solver;
        if !(sc.r > 0.0 && sc.r <= 1.0) {
            return Err(ValidationError::ROutOfRange { r: sc.r }.into());
        }
        if config.domain.resolution == 0 {
            return Err(CliError::Config("domain.resolution must be positive".into()));
        }
        let mut parts: Vec<Primitive> = config
            .domain
            .rects
            .iter()
            .map(|&[x0, y0, x1, y1]| Primitive::Rect { x0, y0, x1, y1 })
            .collect();
        parts.extend(
            config
                .domain
                .discs
                .iter()
                .map(|&[cx, cy, r]| Primitive::Disc { cx, cy, r }),
        );
        let domain = DomainSpec::new(parts)?;
        let h = config.h();
        let mask = build_mask(&domain, sc.r, domain.covering_grid(sc.r, h)?)?;
        let frames = FrameSet::with_width(sc.frames).map_err(invalid)?;
        let stencil = BallStencil::new(sc.r, h)?;
        let kind = match sc.kernel {
            KernelChoice::Avg => KernelKind::avg(sc.p).map_err(invalid)?,
            KernelChoice::Sup => KernelKind::Sup,
        };
        let species = config.species_list()?;
        let params = SolveParams {
            ell: EllipticityPair::new(sc.lambda, sc.big_lambda).map_err(invalid)?,
            r: sc.r,
            eps: sc.eps,
            kind,
            species: species.len(),
            inner_tol: sc.inner_tol,
            outer_tol: sc.outer_tol,
            inner_max: sc.inner_max,
            outer_max: sc.outer_max,
            damping: sc.damping,
            species_update: match sc.species_update {
                UpdateChoice::Jacobi => SpeciesUpdate::Jacobi,
                UpdateChoice::GaussSeidel => SpeciesUpdate::GaussSeidel,
            },
        };
        params.validate().map_err(invalid)?;
        let f = species
            .iter()
            .map(|s| boundary_data(s, &mask))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            config,
            domain,
            mask,
            frames,
            stencil,
            params,
            f,
        })
    }

    pub fn h(&self) -> f64 {
        self.mask.spec().h()
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        let a = &self.config.analysis;
        AnalysisOptions {
            sigma: a.sigma,
            tau_fraction: a.tau_fraction,
            perimeter_t: a.perimeter_t.clone(),
            exterior_ball: a.exterior_ball,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Samples one species' boundary data on the strip nodes.
pub fn boundary_data(s: &SpeciesConfig, mask: &RegionMask) -> Result<ScalarField, CliError> {
    let spec = *mask.spec();
    let h = spec.h();
    let profile: Box<dyn Fn(f64, f64) -> f64> = match *s {
        SpeciesConfig::Region { rect, disc, peak, ramp } => {
            let shape = match (rect, disc) {
                (Some([x0, y0, x1, y1]), None) => Primitive::Rect { x0, y0, x1, y1 },
                (None, Some([cx, cy, r])) => Primitive::Disc { cx, cy, r },
                _ => {
                    return Err(CliError::Config(
                        "a region species needs exactly one of `rect` or `disc`".into(),
                    ))
                }
            };
            let width = (ramp as f64 + 1.0) * h;
            Box::new(move |x, y| {
                let t = shape.distance(x, y) / width;
                // Nodes a whole ramp away must not pick up roundoff.
                if t >= 1.0 - 1e-9 {
                    0.0
                } else {
                    peak * (1.0 - t)
                }
            })
        }
        SpeciesConfig::Bump { center, radius, peak } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(CliError::Config(format!("bump radius must be positive, got {radius}")));
            }
            Box::new(move |x, y| {
                let q = ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / (radius * radius);
                if q < 1.0 {
                    peak * (1.0 - q).powi(2)
                } else {
                    0.0
                }
            })
        }
    };
    let strip = mask.strip();
    let vals = (0..spec.len())
        .map(|k| {
            if strip.contains(k) {
                let (x, y) = spec.position_of(k);
                profile(x, y)
            } else {
                0.0
            }
        })
        .collect();
    Ok(ScalarField::from_values(spec, vals)?)
}
