//! Heteroclinic bifurcation curve of the smooth system by bisection on the
//! section gap, region classification of the (xe, F) plane, and limit-cycle
//! amplitude/period sweeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{self, IntegratorConfig};
use crate::error::{Error, Result};
use crate::params::SmoothParams;

/// The two vegetation-only saddles; everything in this module is solved for
/// one fixed pair while xe and F vary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddlePair {
    x0: f64,
    x1: f64,
}

impl SaddlePair {
    pub fn new(x0: f64, x1: f64) -> Result<Self> {
        if x0.is_finite() && x1.is_finite() && 0.0 < x0 && x0 < x1 {
            Ok(Self { x0, x1 })
        } else {
            Err(Error::Domain {
                what: "saddle pair",
                constraint: "0 < x0 < x1",
            })
        }
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn x_hopf(&self) -> f64 {
        0.5 * (self.x0 + self.x1)
    }
    pub fn x_collapse(&self) -> f64 {
        2.0 * self.x0 * self.x1 / (self.x0 + self.x1)
    }

    pub fn params(&self, xe: f64, f: f64) -> Result<SmoothParams> {
        SmoothParams::new(self.x0, self.x1, xe, f)
    }
}

/// Margin kept between the bisection bracket and the theoretical interval
/// ends [x_c, x_H).
const BRACKET_MARGIN: f64 = 1e-4;
/// Bisection tolerance in xe; below the shooting reproducibility floor.
pub const TOL_HET: f64 = 1e-6;

/// One solved point of the heteroclinic curve with solver diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HeteroclinicPoint {
    pub f: f64,
    pub xe: f64,
    pub gap_residual: f64,
    pub iterations: u32,
    pub bracket_width: f64,
}

/// Shooting horizon: slow drift is O(F), so small F needs a longer window.
fn effective_config(cfg: &IntegratorConfig, f: f64) -> IntegratorConfig {
    let mut c = cfg.clone();
    c.t_max = c.t_max.max(10.0 / f);
    c.record = false;
    c
}

/// Solves the heteroclinic abscissa xe_h(F) by bisection on the sign of the
/// section gap over [x_c, x_H). The rotated-field monotonicity makes the
/// root unique; both bracket gaps are reported if their signs agree.
pub fn heteroclinic_xe(
    pair: &SaddlePair,
    f: f64,
    cfg: &IntegratorConfig,
) -> Result<HeteroclinicPoint> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::Domain {
            what: "heteroclinic solve",
            constraint: "F > 0",
        });
    }
    let cfg = effective_config(cfg, f);
    let mut lo = pair.x_collapse() + BRACKET_MARGIN * (pair.x1 - pair.x0);
    let mut hi = pair.x_hopf() - BRACKET_MARGIN * (pair.x1 - pair.x0);
    let gap_at =
        |xe: f64| -> Result<f64> { Ok(dynamics::section_gap(&pair.params(xe, f)?, &cfg)?.gap) };
    let g_lo = gap_at(lo)?;
    let g_hi = gap_at(hi)?;
    if g_lo == 0.0 {
        return Ok(HeteroclinicPoint {
            f,
            xe: lo,
            gap_residual: 0.0,
            iterations: 0,
            bracket_width: hi - lo,
        });
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::BracketFailure {
            lo,
            hi,
            gap_lo: g_lo,
            gap_hi: g_hi,
        });
    }
    let mut iterations = 0u32;
    let mut g_mid = g_hi;
    while hi - lo > TOL_HET {
        let mid = 0.5 * (lo + hi);
        g_mid = gap_at(mid)?;
        iterations += 1;
        if g_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(HeteroclinicPoint {
        f,
        xe: 0.5 * (lo + hi),
        gap_residual: g_mid,
        iterations,
        bracket_width: hi - lo,
    })
}

/// A sampled one-parameter bifurcation locus with per-point diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct BifurcationCurve {
    /// Name of the swept parameter ("F" here).
    pub parameter: &'static str,
    pub points: Vec<HeteroclinicPoint>,
    /// (parameter value, error message) for points that failed to solve.
    pub failures: Vec<(f64, String)>,
}

impl BifurcationCurve {
    /// Strict monotone decrease of xe_h along ascending F.
    pub fn is_strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].xe < w[0].xe)
    }

    /// All solved points confined to [x_c, x_H).
    pub fn within_bounds(&self, pair: &SaddlePair) -> bool {
        self.points
            .iter()
            .all(|p| p.xe >= pair.x_collapse() && p.xe < pair.x_hopf())
    }
}

/// Solves the curve over an ascending positive F grid. Points are
/// independent solves run as a parallel map with deterministic ordering;
/// failures are recorded and the remaining curve is still returned.
pub fn heteroclinic_curve(
    pair: &SaddlePair,
    f_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<BifurcationCurve> {
    if f_grid.windows(2).any(|w| w[1] <= w[0]) || f_grid.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::Domain {
            what: "heteroclinic curve",
            constraint: "a positive, strictly ascending F grid",
        });
    }
    let solved: Vec<(f64, Result<HeteroclinicPoint>)> = f_grid
        .par_iter()
        .map(|&f| (f, heteroclinic_xe(pair, f, cfg)))
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (f, r) in solved {
        match r {
            Ok(p) => points.push(p),
            Err(e) => failures.push((f, e.to_string())),
        }
    }
    Ok(BifurcationCurve {
        parameter: "F",
        points,
        failures,
    })
}

/// Dynamical regime of a smooth-model parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SmoothRegion {
    /// Static coexistence: xe at or right of the Hopf abscissa.
    Omega1Static,
    /// Unique stable limit cycle.
    Omega2Oscillation,
    /// On the heteroclinic curve (within the solver tolerance).
    Omega3Heteroclinic,
    /// Collapse to extinction.
    Omega4Collapse,
}

impl SmoothRegion {
    pub fn as_str(&self) -> &'static str {
        match self {
            SmoothRegion::Omega1Static => "Omega1-static",
            SmoothRegion::Omega2Oscillation => "Omega2-oscillation",
            SmoothRegion::Omega3Heteroclinic => "Omega3-heteroclinic",
            SmoothRegion::Omega4Collapse => "Omega4-collapse",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegionLabel {
    pub region: SmoothRegion,
    /// Distance in xe to the nearest boundary of the assigned region.
    pub margin: f64,
}

/// Classifies (xe, F) into the four smooth regimes. Requires x0 < xe < x1;
/// below the Hopf abscissa the heteroclinic abscissa is solved by shooting.
pub fn classify_region(p: &SmoothParams, cfg: &IntegratorConfig) -> Result<RegionLabel> {
    let pair = SaddlePair::new(p.x0(), p.x1())?;
    classify_region_with(p, cfg, &pair, None)
}

/// Classification with an optional pre-solved heteroclinic abscissa for the
/// same F (used by grid sweeps to avoid re-solving per cell).
pub fn classify_region_with(
    p: &SmoothParams,
    cfg: &IntegratorConfig,
    pair: &SaddlePair,
    solved_xe_h: Option<f64>,
) -> Result<RegionLabel> {
    if !p.is_generic() {
        return Err(Error::Domain {
            what: "region classification",
            constraint: "x0 < xe < x1",
        });
    }
    let x_h = pair.x_hopf();
    if p.xe() >= x_h {
        return Ok(RegionLabel {
            region: SmoothRegion::Omega1Static,
            margin: (p.xe() - x_h).min(p.x1() - p.xe()),
        });
    }
    let xe_h = match solved_xe_h {
        Some(v) => v,
        None => heteroclinic_xe(pair, p.f(), cfg)?.xe,
    };
    let d = p.xe() - xe_h;
    let label = if d.abs() < TOL_HET {
        RegionLabel {
            region: SmoothRegion::Omega3Heteroclinic,
            margin: d.abs(),
        }
    } else if d > 0.0 {
        RegionLabel {
            region: SmoothRegion::Omega2Oscillation,
            margin: d.min(x_h - p.xe()),
        }
    } else {
        RegionLabel {
            region: SmoothRegion::Omega4Collapse,
            margin: (-d).min(p.xe() - p.x0()),
        }
    };
    Ok(label)
}

/// Outcome of one cycle-sweep grid point.
#[derive(Debug, Clone, Serialize)]
pub enum SweepOutcome {
    Cycle {
        period: f64,
        amplitude: (f64, f64, f64, f64),
    },
    Static,
    Collapse,
    Inconclusive(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub xe: f64,
    pub outcome: SweepOutcome,
}

/// Limit-cycle amplitude and period over an xe grid at fixed F. Grid points
/// must lie inside (x_c, x_H); absent cycles are labelled static or collapse
/// via the region classification, inconclusive solves are flagged.
pub fn cycle_sweep(
    pair: &SaddlePair,
    xe_grid: &[f64],
    f: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<SweepRow>> {
    let (x_c, x_h) = (pair.x_collapse(), pair.x_hopf());
    if xe_grid.iter().any(|&xe| xe <= x_c || xe >= x_h) {
        return Err(Error::Domain {
            what: "cycle sweep grid",
            constraint: "all xe inside (x_c, x_H)",
        });
    }
    let xe_h = heteroclinic_xe(pair, f, cfg)?.xe;
    let rows: Vec<SweepRow> = xe_grid
        .par_iter()
        .map(|&xe| {
            let p = match pair.params(xe, f) {
                Ok(p) => p,
                Err(e) => {
                    return SweepRow {
                        xe,
                        outcome: SweepOutcome::Inconclusive(e.to_string()),
                    }
                }
            };
            match dynamics::find_limit_cycle(&p, cfg) {
                Ok(Some(c)) => SweepRow {
                    xe,
                    outcome: SweepOutcome::Cycle {
                        period: c.period,
                        amplitude: c.amplitude,
                    },
                },
                Ok(None) => {
                    let region = classify_region_with(&p, cfg, pair, Some(xe_h)).map(|l| l.region);
                    let outcome = match region {
                        Ok(SmoothRegion::Omega4Collapse) | Ok(SmoothRegion::Omega3Heteroclinic) => {
                            SweepOutcome::Collapse
                        }
                        Ok(_) => SweepOutcome::Static,
                        Err(e) => SweepOutcome::Inconclusive(e.to_string()),
                    };
                    SweepRow { xe, outcome }
                }
                Err(e) => SweepRow {
                    xe,
                    outcome: SweepOutcome::Inconclusive(e.to_string()),
                },
            }
        })
        .collect();
    Ok(rows)
}
