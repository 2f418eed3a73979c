//! Piecewise-linear analogue of the smooth model: two affine region fields
//! glued along the switching line x = xe, preserving both saddles with their
//! exact eigenstructure. Trajectories are propagated by the closed-form
//! solutions of the affine systems, which is the whole point of the PWL
//! construction: switching times are located by root-finding on exact
//! expressions, the invariant manifolds are straight eigenlines, and every
//! bifurcation curve is available in closed form.

use serde::Serialize;

use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::params::SmoothParams;
use crate::smooth::{self, State};

/// Parameters of the PWL model; unlike [`SmoothParams`], the switching line
/// must lie strictly between the saddles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PwlParams {
    x0: f64,
    x1: f64,
    xe: f64,
    f: f64,
}

impl PwlParams {
    pub fn new(x0: f64, x1: f64, xe: f64, f: f64) -> Result<Self> {
        let ok = x0.is_finite()
            && x1.is_finite()
            && xe.is_finite()
            && f.is_finite()
            && 0.0 < x0
            && x0 < xe
            && xe < x1
            && f > 0.0;
        if ok {
            Ok(Self { x0, x1, xe, f })
        } else {
            Err(Error::Domain {
                what: "PWL parameters",
                constraint: "0 < x0 < xe < x1 and F > 0",
            })
        }
    }

    pub fn from_smooth(p: &SmoothParams) -> Result<Self> {
        Self::new(p.x0(), p.x1(), p.xe(), p.f())
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn xe(&self) -> f64 {
        self.xe
    }
    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn x_hopf(&self) -> f64 {
        0.5 * (self.x0 + self.x1)
    }

    /// Offset of the switching line from the pseudo-Hopf abscissa.
    pub fn lambda(&self) -> f64 {
        self.xe - self.x_hopf()
    }

    /// Height of the fold point on the switching line (where the two region
    /// nullclines would meet at lambda = 0); the translated frame used by
    /// the sliding formulas puts the origin here.
    pub fn fold_height(&self) -> f64 {
        (self.x1 - self.x0).powi(2) / (2.0 * self.x0 * self.x1)
    }

    /// Tangency heights of the two region fields on the switching line, in
    /// absolute coordinates.
    pub fn tangency_heights(&self) -> (f64, f64) {
        let s = (self.x1 - self.x0) / (self.x0 * self.x1);
        (s * (self.xe - self.x0), s * (self.x1 - self.xe))
    }

    /// Height at which the straight stable eigenline of (x0, 0) meets the
    /// switching line.
    pub fn stable_eigenline_height(&self) -> f64 {
        let r = region(self, Side::One);
        (self.xe - self.x0) * (r.a - r.c) / self.x0
    }

    /// Height at which the straight unstable eigenline of (x1, 0) meets the
    /// switching line.
    pub fn unstable_eigenline_height(&self) -> f64 {
        let r = region(self, Side::Two);
        (self.x1 - self.xe) * (r.c - r.a) / self.x1
    }
}

/// Which affine field governs a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PwlMode {
    /// x0 < x < xe
    Region1,
    /// xe < x < x1
    Region2,
    /// on the switching line
    Sliding,
}

const MODE_TOL: f64 = 1e-12;

/// Planar state tagged with its Filippov mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PwlState {
    pub x: f64,
    pub y: f64,
    pub mode: PwlMode,
}

impl PwlState {
    pub fn new(x: f64, y: f64, mode: PwlMode, p: &PwlParams) -> Result<Self> {
        let consistent = match mode {
            PwlMode::Region1 => x <= p.xe + MODE_TOL,
            PwlMode::Region2 => x >= p.xe - MODE_TOL,
            PwlMode::Sliding => (x - p.xe).abs() <= MODE_TOL,
        };
        if x.is_finite() && y.is_finite() && y >= 0.0 && consistent {
            Ok(Self { x, y, mode })
        } else {
            Err(Error::Domain {
                what: "PWL state",
                constraint: "finite, y >= 0, mode consistent with x vs xe",
            })
        }
    }

    /// Tags an off-switching-line state with its region.
    pub fn auto(x: f64, y: f64, p: &PwlParams) -> Result<Self> {
        let mode = if (x - p.xe).abs() <= MODE_TOL {
            PwlMode::Sliding
        } else if x < p.xe {
            PwlMode::Region1
        } else {
            PwlMode::Region2
        };
        Self::new(x, y, mode, p)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Side {
    One,
    Two,
}

/// Affine region data: dx/dt = a (x - saddle) - b y, dy/dt = c y.
pub(crate) struct RegionField {
    pub saddle: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub(crate) fn region(p: &PwlParams, side: Side) -> RegionField {
    match side {
        Side::One => RegionField {
            saddle: p.x0,
            a: (p.x1 - p.x0) / p.x1,
            b: p.x0,
            c: p.f * (p.x0 - p.xe),
        },
        Side::Two => RegionField {
            saddle: p.x1,
            a: (p.x0 - p.x1) / p.x0,
            b: p.x1,
            c: p.f * (p.x1 - p.xe),
        },
    }
}

/// Velocity of the PWL field in a region; sliding states must use
/// [`sliding_velocity`].
pub fn pwl_field(p: &PwlParams, s: &PwlState) -> Result<(f64, f64)> {
    let side = match s.mode {
        PwlMode::Region1 => Side::One,
        PwlMode::Region2 => Side::Two,
        PwlMode::Sliding => {
            return Err(Error::Domain {
                what: "pwl_field",
                constraint: "a region mode (sliding states use the sliding field)",
            })
        }
    };
    let r = region(p, side);
    Ok((r.a * (s.x - r.saddle) - r.b * s.y, r.c * s.y))
}

fn dx1_on_sigma(p: &PwlParams, y: f64) -> f64 {
    let r = region(p, Side::One);
    r.a * (p.xe - r.saddle) - r.b * y
}

fn dx2_on_sigma(p: &PwlParams, y: f64) -> f64 {
    let r = region(p, Side::Two);
    r.a * (p.xe - r.saddle) - r.b * y
}

/// Filippov sliding velocity on the switching line at absolute height y:
/// the convex combination of the two region fields with zero x-component.
pub fn sliding_velocity(p: &PwlParams, y: f64) -> f64 {
    let f1 = dx1_on_sigma(p, y);
    let f2 = dx2_on_sigma(p, y);
    let r1 = region(p, Side::One);
    let r2 = region(p, Side::Two);
    (f2 * r1.c * y - f1 * r2.c * y) / (f2 - f1)
}

/// The sliding field in the translated ordinate (fold point at the origin);
/// equal to [`sliding_velocity`] after the frame shift.
pub fn sliding_velocity_translated(p: &PwlParams, y_t: f64) -> f64 {
    let (x0, x1, f) = (p.x0, p.x1, p.f);
    let l = p.lambda();
    let c = (x0 * x0 + x1 * x1) / 2.0 + x1 * (y_t - 1.0) * x0;
    let num = ((x1 * y_t + l) * x0 * x0
        + (x1 * x1 * y_t + 2.0 * l * (y_t - 1.0) * x1 + 2.0 * l * l) * x0
        + x1 * l * (2.0 * l + x1))
        * c
        * f;
    let den = 2.0 * x1 * x0 * ((x1 * y_t + l) * x0 + x1 * l);
    -num / den
}

/// Comparison of the PWL saddle eigenstructure against the smooth model's.
/// Both are evaluated from their own linearizations; the expressions agree
/// exactly, so the differences are at the level of floating-point noise.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SaddleMatch {
    pub lower_pwl: [f64; 2],
    pub lower_smooth: [f64; 2],
    pub upper_pwl: [f64; 2],
    pub upper_smooth: [f64; 2],
    pub max_abs_diff: f64,
}

pub fn saddle_eigenstructure_match(p: &PwlParams) -> Result<SaddleMatch> {
    let sp = SmoothParams::new(p.x0, p.x1, p.xe, p.f)?;
    let r1 = region(p, Side::One);
    let r2 = region(p, Side::Two);
    // Upper-triangular Jacobians: eigenvalues are the diagonal entries.
    let lower_pwl = [r1.a, r1.c];
    let upper_pwl = [r2.c, r2.a];
    let low = smooth::lower_saddle(&sp);
    let up = smooth::upper_saddle(&sp);
    let lower_smooth = [low.unstable_value, low.stable_value];
    let upper_smooth = [up.unstable_value, up.stable_value];
    let max_abs_diff = lower_pwl
        .iter()
        .zip(lower_smooth.iter())
        .chain(upper_pwl.iter().zip(upper_smooth.iter()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(SaddleMatch {
        lower_pwl,
        lower_smooth,
        upper_pwl,
        upper_smooth,
        max_abs_diff,
    })
}

/// First integral of one region field, evaluated in the translated frame
/// (state given in absolute coordinates). Constant along flows of the
/// matching side; errors if the fractional-power base is nonpositive (which
/// happens exactly at or below the extinction axis).
pub fn first_integral(p: &PwlParams, side: u8, s: &State) -> Result<f64> {
    let (x0, x1, f) = (p.x0, p.x1, p.f);
    let l = p.lambda();
    let x = s.x - p.xe;
    let y = s.y - p.fold_height();
    let base = x0 * x0 + 2.0 * x1 * (y - 1.0) * x0 + x1 * x1;
    if base <= 0.0 {
        return Err(Error::Domain {
            what: "first integral",
            constraint: "a positive fractional-power base (state above the extinction axis)",
        });
    }
    match side {
        1 => {
            if s.x > p.xe + 1e-9 {
                return Err(Error::Domain {
                    what: "first integral H1",
                    constraint: "a state in the closure of region 1",
                });
            }
            let a = base.powf(2.0 * (x0 - x1) / ((x0 - 2.0 * l - x1) * f * x1));
            let num = (-f * x1.powi(3) / 2.0 - f * (x - x0 + 2.0 * l) * x1 * x1
                + ((-x0 / 2.0 + x + l) * (x0 - 2.0 * l) * f + 2.0 * x0 * y - 2.0 * x - 2.0 * l)
                    * x1
                + 2.0 * x0 * (x + l))
                * a;
            let den = -x1 * x1 * f + (-2.0 + (x0 - 2.0 * l) * f) * x1 + 2.0 * x0;
            Ok(num / den)
        }
        2 => {
            if s.x < p.xe - 1e-9 {
                return Err(Error::Domain {
                    what: "first integral H2",
                    constraint: "a state in the closure of region 2",
                });
            }
            let b = base.powf(2.0 * (x0 - x1) / ((-x1 + 2.0 * l + x0) * f * x0));
            let num = (x0.powi(3) * f / 2.0
                + f * (x - x1 + 2.0 * l) * x0 * x0
                + (-(-x1 / 2.0 + x + l) * (x1 - 2.0 * l) * f - 2.0 * x1 * y + 2.0 * x + 2.0 * l)
                    * x0
                - 2.0 * x1 * (x + l))
                * b;
            let den = x0 * x0 * f + (2.0 + (2.0 * l - x1) * f) * x0 - 2.0 * x1;
            Ok(num / den)
        }
        _ => Err(Error::Domain {
            what: "first integral",
            constraint: "side 1 or 2",
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SlidingStability {
    /// lambda < 0: the sliding segment repels, the pseudo-equilibrium is
    /// unstable and a stable crossing cycle surrounds it.
    Unstable,
    /// lambda > 0: attracting segment with a stable pseudo-equilibrium.
    Stable,
}

/// Tangency heights (translated frame), pseudo-equilibrium height
/// (translated frame) and its stability.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlidingData {
    pub t1: f64,
    pub t2: f64,
    pub p_lambda: f64,
    pub stability: SlidingStability,
}

pub fn sliding_data(p: &PwlParams) -> Result<SlidingData> {
    let l = p.lambda();
    if l == 0.0 {
        return Err(Error::DegenerateSliding);
    }
    let (x0, x1) = (p.x0, p.x1);
    let t1 = (x1 - x0) * l / (x0 * x1);
    let p_lambda = -l * (2.0 * l * (x0 + x1) + (x1 - x0).powi(2)) / (x0 * x1 * (2.0 * l + x0 + x1));
    Ok(SlidingData {
        t1,
        t2: -t1,
        p_lambda,
        stability: if l < 0.0 {
            SlidingStability::Unstable
        } else {
            SlidingStability::Stable
        },
    })
}

/// Closed-form bifurcation loci of the PWL model for one saddle pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PwlLoci {
    x0: f64,
    x1: f64,
}

impl PwlLoci {
    pub fn new(x0: f64, x1: f64) -> Result<Self> {
        if x0.is_finite() && x1.is_finite() && 0.0 < x0 && x0 < x1 {
            Ok(Self { x0, x1 })
        } else {
            Err(Error::Domain {
                what: "PWL loci",
                constraint: "0 < x0 < x1",
            })
        }
    }

    pub fn x_hopf(&self) -> f64 {
        0.5 * (self.x0 + self.x1)
    }

    /// Geometric mean: vertical asymptote of the heteroclinic curve.
    pub fn x_geo(&self) -> f64 {
        (self.x0 * self.x1).sqrt()
    }

    /// Heteroclinic curve F_het(xe) = 2(xe - x_H)/(x0 x1 - xe^2), defined and
    /// positive exactly on (sqrt(x0 x1), x_H) and vanishing at x_H.
    pub fn f_het(&self, xe: f64) -> Result<f64> {
        if !(self.x_geo() < xe && xe <= self.x_hopf()) {
            return Err(Error::Domain {
                what: "F_het",
                constraint: "sqrt(x0 x1) < xe <= (x0+x1)/2",
            });
        }
        Ok(2.0 * (xe - self.x_hopf()) / (self.x0 * self.x1 - xe * xe))
    }

    /// Closed inverse xe_het(F) = (-1 + sqrt(1 + F^2 x0 x1 + 2 F x_H))/F.
    pub fn xe_het(&self, f: f64) -> Result<f64> {
        if !(f > 0.0) {
            return Err(Error::Domain {
                what: "xe_het",
                constraint: "F > 0",
            });
        }
        Ok((-1.0 + (1.0 + f * f * self.x0 * self.x1 + 2.0 * f * self.x_hopf()).sqrt()) / f)
    }

    /// Slope of F_het at the pseudo-Hopf point: -8/(x1-x0)^2.
    pub fn f_het_slope_at_hopf(&self) -> f64 {
        -8.0 / (self.x1 - self.x0).powi(2)
    }

    /// First Lyapunov constant of the pseudo-Hopf: V1 = -8/(3 F (x1-x0)).
    pub fn v1(&self, f: f64) -> f64 {
        -8.0 / (3.0 * f * (self.x1 - self.x0))
    }

    /// No-return boundary on the collapse side (xe < x_H): the stable
    /// eigenline of (x0, 0) meets the opposing region's x-nullcline on the
    /// switching line. Defined geometrically with |xe - x_H|; the signed
    /// textbook expression has the same magnitude.
    pub fn f_b1(&self, xe: f64) -> Result<f64> {
        if !(self.x0 < xe && xe < self.x1) {
            return Err(Error::Domain {
                what: "F_B1",
                constraint: "x0 < xe < x1",
            });
        }
        Ok(2.0 * (self.x1 - self.x0) * (xe - self.x_hopf()).abs()
            / (self.x1 * (xe - self.x0).powi(2)))
    }

    /// No-return boundary on the static side (xe > x_H), defined like
    /// [`Self::f_b1`] from the unstable eigenline of (x1, 0).
    pub fn f_b2(&self, xe: f64) -> Result<f64> {
        if !(self.x0 < xe && xe < self.x1) {
            return Err(Error::Domain {
                what: "F_B2",
                constraint: "x0 < xe < x1",
            });
        }
        Ok(2.0 * (self.x1 - self.x0) * (xe - self.x_hopf()).abs()
            / (self.x0 * (self.x1 - xe).powi(2)))
    }

    /// Height at which the heteroclinic connection crosses the switching
    /// line (both eigenlines meet there when F = F_het(xe)).
    pub fn connection_height(&self, xe: f64) -> Result<f64> {
        let f = self.f_het(xe)?;
        let p = PwlParams::new(self.x0, self.x1, xe, f)?;
        Ok(p.stable_eigenline_height())
    }
}

/// Event markers recorded along a PWL trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PwlEventKind {
    /// Transversal crossing of the switching line into a region.
    SigmaCross,
    SlideStart,
    SlideEnd,
    PseudoEquilibrium,
    Collapse,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PwlEvent {
    pub t: f64,
    pub state: PwlState,
    pub kind: PwlEventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PwlTermination {
    TimeLimit,
    /// Left the strip through x = x0 with positive consumer density.
    Collapse,
    PseudoEquilibrium,
}

#[derive(Debug, Clone, Serialize)]
pub struct PwlTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<PwlState>,
    pub events: Vec<PwlEvent>,
    pub termination: PwlTermination,
}

const CHATTER_LIMIT: usize = 10_000;
const SLIDE_EXIT_TOL: f64 = 1e-10;
const PSEUDO_EQ_TOL: f64 = 1e-9;

/// Closed-form position along a region flow after time tau.
fn flow_at(r: &RegionField, u0: f64, y0: f64, tau: f64) -> (f64, f64) {
    let k = r.b / (r.a - r.c);
    let amp = u0 - k * y0;
    let u = amp * (r.a * tau).exp() + k * y0 * (r.c * tau).exp();
    (u, y0 * (r.c * tau).exp())
}

enum SegmentEnd {
    /// Reached the switching line at height y after tau.
    Sigma { tau: f64, y: f64 },
    /// Crossed x = x0 leftward (collapse escape) at tau.
    LeftExit { tau: f64, y: f64 },
    /// Ran out of time budget; final offset/height returned.
    Budget { u: f64, y: f64 },
}

/// Propagates one region segment until the switching line, the left escape
/// line x = x0 (region 1 only), or the time budget. Root-finding marches the
/// exact solution and bisects each bracketed sign change.
fn region_segment(
    p: &PwlParams,
    side: Side,
    u0: f64,
    y0: f64,
    budget: f64,
    mut sample: Option<&mut dyn FnMut(f64, f64, f64)>,
) -> SegmentEnd {
    let r = region(p, side);
    let u_sigma = p.xe - r.saddle;
    let u_left = match side {
        Side::One => Some(0.0),
        Side::Two => None,
    };
    let rate = r.a.abs().max(r.c.abs()).max(0.2);
    let dt = (0.02 / rate).min(budget.max(1e-9));
    let g_sigma = |tau: f64| -> f64 {
        let (u, _) = flow_at(&r, u0, y0, tau);
        u - u_sigma
    };
    let g_left = |tau: f64| -> f64 {
        let (u, _) = flow_at(&r, u0, y0, tau);
        u
    };
    let bisect = |g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64| -> f64 {
        let s_lo = g(lo).signum();
        for _ in 0..100 {
            if hi - lo < 1e-13 * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if g(mid).signum() == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    // Reference signs taken just after departure, so crossings inside the
    // first march step are still bracketed (segments often start exactly on
    // the switching line).
    let t_eps = (1e-9 * dt).min(budget);
    let mut t_prev = t_eps;
    let mut gs_prev = g_sigma(t_prev);
    let mut gl_prev = u_left.map(|_| g_left(t_prev));
    let mut t = t_prev;
    while t < budget {
        t = (t + dt).min(budget);
        let gs = g_sigma(t);
        if gs.signum() != gs_prev.signum() {
            let tau = bisect(&g_sigma, t_prev, t);
            let (_, y) = flow_at(&r, u0, y0, tau);
            return SegmentEnd::Sigma { tau, y };
        }
        if let (Some(glp), Some(_)) = (gl_prev, u_left) {
            let gl = g_left(t);
            if gl.signum() != glp.signum() {
                let tau = bisect(&g_left, t_prev, t);
                let (_, y) = flow_at(&r, u0, y0, tau);
                return SegmentEnd::LeftExit { tau, y };
            }
            gl_prev = Some(gl);
        }
        if let Some(cb) = sample.as_deref_mut() {
            let (u, y) = flow_at(&r, u0, y0, t);
            cb(t, u + r.saddle, y);
        }
        t_prev = t;
        gs_prev = gs;
    }
    let (u, y) = flow_at(&r, u0, y0, budget);
    SegmentEnd::Budget { u, y }
}

/// Integrates the Filippov system by exact region propagation with event
/// detection on the switching line. On reaching the line, the Filippov test
/// either crosses (both fields push the same way) or enters the sliding mode
/// (both fields point inward), which then follows the sliding field until a
/// tangency hand-off or the pseudo-equilibrium.
pub fn pwl_integrate(p: &PwlParams, s0: PwlState, cfg: &IntegratorConfig) -> Result<PwlTrajectory> {
    cfg.validate()?;
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![s0];
    let mut events: Vec<PwlEvent> = Vec::new();
    let mut sigma_events = 0usize;

    let (y_t1, y_t2) = p.tangency_heights();
    let p_eq_abs = sliding_data(p).ok().map(|d| d.p_lambda + p.fold_height());

    let mut mode = s0.mode;
    let mut x = s0.x;
    let mut y = s0.y;

    let push_state = |t: f64,
                      x: f64,
                      y: f64,
                      mode: PwlMode,
                      times: &mut Vec<f64>,
                      states: &mut Vec<PwlState>| {
        if times.last().is_none_or(|&last| t > last) {
            times.push(t);
            states.push(PwlState { x, y, mode });
        }
    };

    loop {
        if t >= cfg.t_max {
            return Ok(PwlTrajectory {
                times,
                states,
                events,
                termination: PwlTermination::TimeLimit,
            });
        }
        if sigma_events >= CHATTER_LIMIT {
            return Err(Error::Chattering {
                events: sigma_events,
            });
        }
        match mode {
            PwlMode::Region1 | PwlMode::Region2 => {
                let side = if mode == PwlMode::Region1 {
                    Side::One
                } else {
                    Side::Two
                };
                let r = region(p, side);
                let u0 = x - r.saddle;
                let budget = cfg.t_max - t;
                let t_seg_start = t;
                let mut recorder = |tau: f64, xs: f64, ys: f64| {
                    if cfg.record {
                        times.push(t_seg_start + tau);
                        states.push(PwlState { x: xs, y: ys, mode });
                    }
                };
                let end = region_segment(p, side, u0, y, budget, Some(&mut recorder));
                match end {
                    SegmentEnd::Budget { u, y: ys } => {
                        push_state(cfg.t_max, u + r.saddle, ys, mode, &mut times, &mut states);
                        return Ok(PwlTrajectory {
                            times,
                            states,
                            events,
                            termination: PwlTermination::TimeLimit,
                        });
                    }
                    SegmentEnd::LeftExit { tau, y: ys } => {
                        t += tau;
                        let s = PwlState {
                            x: p.x0(),
                            y: ys,
                            mode,
                        };
                        events.push(PwlEvent {
                            t,
                            state: s,
                            kind: PwlEventKind::Collapse,
                        });
                        times.push(t);
                        states.push(s);
                        return Ok(PwlTrajectory {
                            times,
                            states,
                            events,
                            termination: PwlTermination::Collapse,
                        });
                    }
                    SegmentEnd::Sigma { tau, y: ys } => {
                        t += tau;
                        sigma_events += 1;
                        let f1 = dx1_on_sigma(p, ys);
                        let f2 = dx2_on_sigma(p, ys);
                        let attracting = f1 > 0.0 && f2 < 0.0;
                        if attracting {
                            mode = PwlMode::Sliding;
                            x = p.xe;
                            y = ys;
                            let s = PwlState { x, y, mode };
                            events.push(PwlEvent {
                                t,
                                state: s,
                                kind: PwlEventKind::SlideStart,
                            });
                            times.push(t);
                            states.push(s);
                        } else {
                            mode = match side {
                                Side::One => PwlMode::Region2,
                                Side::Two => PwlMode::Region1,
                            };
                            x = p.xe;
                            y = ys;
                            let s = PwlState { x, y, mode };
                            events.push(PwlEvent {
                                t,
                                state: s,
                                kind: PwlEventKind::SigmaCross,
                            });
                            times.push(t);
                            states.push(s);
                        }
                    }
                }
            }
            PwlMode::Sliding => {
                // 1-D flow on the switching line; RK4 with tangency and
                // pseudo-equilibrium stopping.
                let rate = (p.f * (p.x1 - p.x0)).max(0.2);
                let h = 0.01 / rate;
                let mut exited = false;
                while t < cfg.t_max {
                    if let Some(pe) = p_eq_abs {
                        if (y - pe).abs() < PSEUDO_EQ_TOL {
                            let s = PwlState {
                                x: p.xe,
                                y: pe,
                                mode: PwlMode::Sliding,
                            };
                            events.push(PwlEvent {
                                t,
                                state: s,
                                kind: PwlEventKind::PseudoEquilibrium,
                            });
                            push_state(t, s.x, s.y, s.mode, &mut times, &mut states);
                            return Ok(PwlTrajectory {
                                times,
                                states,
                                events,
                                termination: PwlTermination::PseudoEquilibrium,
                            });
                        }
                    }
                    let h = h.min(cfg.t_max - t);
                    let k1 = sliding_velocity(p, y);
                    let k2 = sliding_velocity(p, y + 0.5 * h * k1);
                    let k3 = sliding_velocity(p, y + 0.5 * h * k2);
                    let k4 = sliding_velocity(p, y + h * k3);
                    let mut y_next = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    let lo = y_t1.min(y_t2);
                    let hi = y_t1.max(y_t2);
                    if y_next <= lo + SLIDE_EXIT_TOL || y_next >= hi - SLIDE_EXIT_TOL {
                        y_next = y_next.clamp(lo, hi);
                        t += h;
                        y = y_next;
                        exited = true;
                        break;
                    }
                    t += h;
                    y = y_next;
                    if cfg.record {
                        times.push(t);
                        states.push(PwlState {
                            x: p.xe,
                            y,
                            mode: PwlMode::Sliding,
                        });
                    }
                }
                if !exited {
                    push_state(cfg.t_max, p.xe, y, mode, &mut times, &mut states);
                    return Ok(PwlTrajectory {
                        times,
                        states,
                        events,
                        termination: PwlTermination::TimeLimit,
                    });
                }
                // Hand off to the region whose field points away from the
                // switching line at the exit height.
                let f1 = dx1_on_sigma(p, y);
                let f2 = dx2_on_sigma(p, y);
                mode = if f1 < 0.0 {
                    PwlMode::Region1
                } else if f2 > 0.0 {
                    PwlMode::Region2
                } else {
                    return Err(Error::Chattering {
                        events: sigma_events,
                    });
                };
                x = p.xe;
                let s = PwlState { x, y, mode };
                events.push(PwlEvent {
                    t,
                    state: s,
                    kind: PwlEventKind::SlideEnd,
                });
                times.push(t);
                states.push(s);
            }
        }
    }
}

/// One full turn of the crossing return map on the switching line, starting
/// from a downward crossing into region 1 at height `y_top`.
enum SigmaReturn {
    Returned { y: f64, period: f64 },
    Collapse,
    Sliding,
    NoReturn,
}

fn sigma_return(p: &PwlParams, y_top: f64, budget: f64) -> SigmaReturn {
    // Region-1 arc down to the switching line.
    let r1 = region(p, Side::One);
    let end1 = region_segment(p, Side::One, p.xe - r1.saddle, y_top, budget, None);
    let (tau1, y_bottom) = match end1 {
        SegmentEnd::Sigma { tau, y } => (tau, y),
        SegmentEnd::LeftExit { .. } => return SigmaReturn::Collapse,
        SegmentEnd::Budget { .. } => return SigmaReturn::NoReturn,
    };
    let f1 = dx1_on_sigma(p, y_bottom);
    let f2 = dx2_on_sigma(p, y_bottom);
    if f1 > 0.0 && f2 < 0.0 {
        return SigmaReturn::Sliding;
    }
    if !(f1 > 0.0 && f2 > 0.0) {
        return SigmaReturn::NoReturn;
    }
    // Region-2 arc back up.
    let r2 = region(p, Side::Two);
    let end2 = region_segment(
        p,
        Side::Two,
        p.xe - r2.saddle,
        y_bottom,
        budget - tau1,
        None,
    );
    match end2 {
        SegmentEnd::Sigma { tau, y } => SigmaReturn::Returned {
            y,
            period: tau1 + tau,
        },
        SegmentEnd::LeftExit { .. } => SigmaReturn::Collapse,
        SegmentEnd::Budget { .. } => SigmaReturn::NoReturn,
    }
}

/// A crossing limit cycle of the PWL system.
#[derive(Debug, Clone, Serialize)]
pub struct PwlLimitCycle {
    pub section_height: f64,
    pub period: f64,
    pub samples: PwlTrajectory,
    pub amplitude: (f64, f64, f64, f64),
    pub converged_heights: Vec<f64>,
}

const PWL_FIXED_POINT_TOL: f64 = 1e-11;

/// Return-map search for the crossing limit cycle, from three seeds on the
/// downward-crossing branch of the switching line (above both tangencies).
/// Iterates converging onto the heteroclinic corner height are reported as
/// absent: the polycycle is not a periodic orbit.
pub fn pwl_find_limit_cycle(
    p: &PwlParams,
    cfg: &IntegratorConfig,
) -> Result<Option<PwlLimitCycle>> {
    let (y_t1, y_t2) = p.tangency_heights();
    let floor = y_t1.max(y_t2);
    let h_s = p.stable_eigenline_height();
    if h_s <= floor {
        return Ok(None);
    }
    let budget = cfg.t_max;
    let seeds = [0.25, 0.5, 0.75].map(|frac| floor + frac * (h_s - floor));

    let mut heights = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut inconclusive = false;

    for seed in seeds {
        let mut y_a = seed;
        let mut g_a = match sigma_return(p, y_a, budget) {
            SigmaReturn::Returned { y, .. } => y - y_a,
            SigmaReturn::Collapse | SigmaReturn::NoReturn => continue,
            SigmaReturn::Sliding => continue,
        };
        let mut y_b = y_a + g_a;
        let mut converged = None;
        for _ in 0..200 {
            if y_b <= floor {
                break;
            }
            let (g_b, period) = match sigma_return(p, y_b, budget) {
                SigmaReturn::Returned { y, period } => (y - y_b, period),
                SigmaReturn::Collapse | SigmaReturn::NoReturn | SigmaReturn::Sliding => break,
            };
            if g_b.abs() < PWL_FIXED_POINT_TOL {
                converged = Some((y_b, period));
                break;
            }
            let denom = g_b - g_a;
            let mut y_next = if denom.abs() > 1e-300 {
                y_b - g_b * (y_b - y_a) / denom
            } else {
                y_b + g_b
            };
            if !y_next.is_finite() || y_next <= floor {
                y_next = 0.5 * (y_b + floor.max(y_b + g_b));
                if y_next <= floor {
                    break;
                }
            }
            y_a = y_b;
            g_a = g_b;
            y_b = y_next;
            if y_a == y_b {
                inconclusive = true;
                break;
            }
        }
        if let Some((y_star, period)) = converged {
            if (y_star - h_s).abs() < 1e-9 {
                // Iterates piled up on the polycycle corner height.
                continue;
            }
            heights.push(y_star);
            if best.is_none() {
                best = Some((y_star, period));
            }
        }
    }

    let Some((y_star, period)) = best else {
        if inconclusive {
            return Err(Error::Inconclusive {
                detail: "PWL return-map iteration stalled",
            });
        }
        return Ok(None);
    };

    // One recorded loop for the samples.
    let mut c = cfg.clone();
    c.record = true;
    c.t_max = (2.5 * period).max(1.0);
    let start = PwlState {
        x: p.xe,
        y: y_star,
        mode: PwlMode::Region1,
    };
    let mut traj = pwl_integrate(p, start, &c)?;
    // Truncate at the completed loop: second SigmaCross (region 2 -> 1).
    if let Some(end_ev) = traj
        .events
        .iter()
        .find(|e| e.kind == PwlEventKind::SigmaCross && e.state.mode == PwlMode::Region1)
    {
        let t_end = end_ev.t;
        let keep = traj.times.iter().take_while(|&&tt| tt <= t_end).count();
        traj.times.truncate(keep);
        traj.states.truncate(keep);
    }
    let mut amp = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for s in &traj.states {
        amp.0 = amp.0.min(s.x);
        amp.1 = amp.1.max(s.x);
        amp.2 = amp.2.min(s.y);
        amp.3 = amp.3.max(s.y);
    }
    Ok(Some(PwlLimitCycle {
        section_height: y_star,
        period,
        samples: traj,
        amplitude: amp,
        converged_heights: heights,
    }))
}

/// The seven PWL parameter-space regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PwlRegion {
    /// Static side, below the no-return curve: monotone convergence.
    Omega1,
    /// Static side, above it: damped oscillatory convergence.
    Omega2,
    /// On the pseudo-Hopf line xe = x_H.
    Omega3,
    /// Crossing limit cycle.
    Omega4,
    /// On the heteroclinic curve.
    Omega5,
    /// Collapse with oscillatory transients.
    Omega6,
    /// Collapse without return (below the no-return curve).
    Omega7,
}

impl PwlRegion {
    pub fn as_str(&self) -> &'static str {
        match self {
            PwlRegion::Omega1 => "Omega1",
            PwlRegion::Omega2 => "Omega2",
            PwlRegion::Omega3 => "Omega3",
            PwlRegion::Omega4 => "Omega4",
            PwlRegion::Omega5 => "Omega5",
            PwlRegion::Omega6 => "Omega6",
            PwlRegion::Omega7 => "Omega7",
        }
    }
}

/// Classifies (xe, F) into the seven PWL regimes using the closed-form loci
/// only (no shooting).
pub fn pwl_classify_region(p: &PwlParams) -> Result<PwlRegion> {
    let loci = PwlLoci::new(p.x0, p.x1)?;
    let x_h = loci.x_hopf();
    let scale = (p.x1 - p.x0).max(1.0);
    if (p.xe - x_h).abs() < 1e-12 * scale {
        return Ok(PwlRegion::Omega3);
    }
    if p.xe > x_h {
        let b2 = loci.f_b2(p.xe)?;
        return Ok(if p.f > b2 {
            PwlRegion::Omega2
        } else {
            PwlRegion::Omega1
        });
    }
    // Collapse half-plane: compare against the heteroclinic curve where it
    // exists (xe above the geometric mean).
    if p.xe > loci.x_geo() {
        let xe_h = loci.xe_het(p.f)?;
        if (p.xe - xe_h).abs() < 1e-12 * scale {
            return Ok(PwlRegion::Omega5);
        }
        if p.xe > xe_h {
            return Ok(PwlRegion::Omega4);
        }
    }
    let b1 = loci.f_b1(p.xe)?;
    Ok(if p.f > b1 {
        PwlRegion::Omega6
    } else {
        PwlRegion::Omega7
    })
}

/// Shortest parameter-space distance from (xe, F) to the heteroclinic curve,
/// the PWL resilience measure. Defined on the one-limit-cycle region (and on
/// the curve itself, where it is zero).
pub fn resilience_distance(p: &PwlParams) -> Result<f64> {
    let regime = pwl_classify_region(p)?;
    if !matches!(regime, PwlRegion::Omega4 | PwlRegion::Omega5) {
        return Err(Error::NotInCycleRegion { xe: p.xe, f: p.f });
    }
    let loci = PwlLoci::new(p.x0, p.x1)?;
    let lo = loci.x_geo() + 1e-12;
    let hi = loci.x_hopf();
    let d2 = |xe_star: f64| -> f64 {
        let f_star = 2.0 * (xe_star - loci.x_hopf()) / (loci.x0 * loci.x1 - xe_star * xe_star);
        (p.xe - xe_star).powi(2) + (p.f - f_star).powi(2)
    };
    // Coarse scan, then golden-section refinement around the best cell.
    let n = 600usize;
    let mut best_i = 0usize;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let xe_star = lo + (hi - lo) * i as f64 / n as f64;
        let v = d2(xe_star);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let mut a = lo + (hi - lo) * best_i.saturating_sub(1) as f64 / n as f64;
    let mut b = (lo + (hi - lo) * (best_i + 1).min(n) as f64 / n as f64).min(hi);
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1p = b - phi * (b - a);
    let mut x2p = a + phi * (b - a);
    let mut f1 = d2(x1p);
    let mut f2 = d2(x2p);
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if f1 < f2 {
            b = x2p;
            x2p = x1p;
            f2 = f1;
            x1p = b - phi * (b - a);
            f1 = d2(x1p);
        } else {
            a = x1p;
            x1p = x2p;
            f1 = f2;
            x2p = a + phi * (b - a);
            f2 = d2(x2p);
        }
    }
    Ok(d2(0.5 * (a + b)).sqrt().min(best.sqrt()))
}

/// Habitat-destruction analysis of the PWL heteroclinic curve in original
/// rates: position of the curve, the pseudo-Hopf abscissa, their horizontal
/// distance and both D-derivatives (closed forms).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HabitatEffect {
    pub xe_het: f64,
    pub x_h: f64,
    /// Oscillatory window width x_H - xe_het.
    pub d_o: f64,
    /// d(xe_het)/dD < 0: the curve moves left under habitat destruction.
    pub dxe_het_dd: f64,
    /// d(d_o)/dD < 0: the window shrinks.
    pub do_dd: f64,
}

pub fn habitat_effect(p_orig: &crate::params::OriginalParams, f: f64) -> Result<HabitatEffect> {
    let s = p_orig.to_smooth()?;
    if !(f > 0.0) {
        return Err(Error::Domain {
            what: "habitat effect",
            constraint: "F > 0",
        });
    }
    let x0x1 = s.x0() * s.x1();
    let x_h = 0.5 * (1.0 - p_orig.habitat_loss());
    let root = (1.0 + f * f * x0x1 + 2.0 * f * x_h).sqrt();
    let xe_het = (-1.0 + root) / f;
    let dxe = -1.0 / (2.0 * root);
    Ok(HabitatEffect {
        xe_het,
        x_h,
        d_o: x_h - xe_het,
        dxe_het_dd: dxe,
        do_dd: -0.5 - dxe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn p13(xe: f64, f: f64) -> PwlParams {
        PwlParams::new(1.0, 3.0, xe, f).unwrap()
    }

    #[test]
    fn field_hand_values() {
        let p = p13(1.8, 1.0);
        let s = PwlState::new(1.5, 0.5, PwlMode::Region1, &p).unwrap();
        let (dx, dy) = pwl_field(&p, &s).unwrap();
        assert_relative_eq!(dx, -1.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(dy, -0.4, max_relative = 1e-14);
        // Saddles preserved.
        let s0 = PwlState::new(1.0, 0.0, PwlMode::Region1, &p).unwrap();
        assert_eq!(pwl_field(&p, &s0).unwrap(), (0.0, 0.0));
        let s1 = PwlState::new(3.0, 0.0, PwlMode::Region2, &p).unwrap();
        assert_eq!(pwl_field(&p, &s1).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn sliding_state_needs_sliding_field() {
        let p = p13(1.8, 1.0);
        let s = PwlState::new(1.8, 0.7, PwlMode::Sliding, &p).unwrap();
        assert!(pwl_field(&p, &s).is_err());
    }

    #[test]
    fn mode_consistency_enforced() {
        let p = p13(1.8, 1.0);
        assert!(PwlState::new(2.5, 0.1, PwlMode::Region1, &p).is_err());
        assert!(PwlState::new(1.2, 0.1, PwlMode::Sliding, &p).is_err());
        assert!(PwlState::new(1.2, -0.1, PwlMode::Region1, &p).is_err());
    }

    #[test]
    fn saddle_eigenstructure_matches_smooth() {
        let p = p13(2.0, 1.0);
        let m = saddle_eigenstructure_match(&p).unwrap();
        assert_eq!(m.lower_pwl, [2.0 / 3.0, -1.0]);
        assert_eq!(m.upper_pwl, [1.0, -2.0]);
        assert_eq!(m.max_abs_diff, 0.0);
    }

    #[test]
    fn hyperbolicity_ratio_agrees_with_smooth() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let x0 = rng.gen_range(0.3..1.5);
            let x1 = x0 + rng.gen_range(0.2..2.5);
            let xe = rng.gen_range(x0 * 1.001..x1 * 0.999);
            let f = rng.gen_range(0.05..5.0);
            let (Ok(p), Ok(sp)) = (
                PwlParams::new(x0, x1, xe, f),
                SmoothParams::new(x0, x1, xe, f),
            ) else {
                continue;
            };
            let r1 = region(&p, Side::One);
            let r2 = region(&p, Side::Two);
            let pwl_ratio = (-r1.c / r1.a) * (-r2.a / r2.c);
            assert_relative_eq!(
                pwl_ratio,
                sp.hyperbolicity_ratio().unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn first_integrals_conserved_along_flows() {
        let p = p13(1.8, 2.0);
        let cfg = IntegratorConfig {
            t_max: 2.0,
            ..Default::default()
        };
        let traj = pwl_integrate(
            &p,
            PwlState::new(1.3, 0.4, PwlMode::Region1, &p).unwrap(),
            &cfg,
        )
        .unwrap();
        let mut h_vals = Vec::new();
        for (s, _t) in traj.states.iter().zip(traj.times.iter()) {
            if s.mode == PwlMode::Region1 && s.x < p.xe() - 1e-9 {
                h_vals.push(first_integral(&p, 1, &State { x: s.x, y: s.y }).unwrap());
            }
        }
        assert!(h_vals.len() > 20);
        let h0 = h_vals[0];
        for h in &h_vals {
            assert!(((h - h0) / h0).abs() < 1e-6, "H1 drift: {h} vs {h0}");
        }

        let cfg2 = IntegratorConfig {
            t_max: 0.5,
            ..Default::default()
        };
        let traj2 = pwl_integrate(
            &p,
            PwlState::new(2.5, 0.3, PwlMode::Region2, &p).unwrap(),
            &cfg2,
        )
        .unwrap();
        let mut h2_vals = Vec::new();
        for s in traj2.states.iter() {
            if s.mode == PwlMode::Region2 && s.x > p.xe() + 1e-9 {
                h2_vals.push(first_integral(&p, 2, &State { x: s.x, y: s.y }).unwrap());
            }
        }
        assert!(h2_vals.len() > 20);
        let h0 = h2_vals[0];
        for h in &h2_vals {
            assert!(((h - h0) / h0).abs() < 1e-6, "H2 drift: {h} vs {h0}");
        }
    }

    #[test]
    fn first_integral_domain_error_below_axis() {
        let p = p13(1.8, 1.0);
        assert!(first_integral(&p, 1, &State { x: 1.4, y: 0.0 }).is_err());
    }

    #[test]
    fn sliding_data_hand_values() {
        let d = sliding_data(&p13(1.8, 1.0)).unwrap();
        assert_relative_eq!(d.t1, -2.0 / 15.0, max_relative = 1e-13);
        assert_relative_eq!(d.t2, 2.0 / 15.0, max_relative = 1e-13);
        assert_relative_eq!(d.p_lambda, 2.0 / 45.0, max_relative = 1e-12);
        assert_eq!(d.stability, SlidingStability::Unstable);
        assert!(sliding_data(&p13(2.0, 1.0)).is_err());
        assert_eq!(
            sliding_data(&p13(2.2, 1.0)).unwrap().stability,
            SlidingStability::Stable
        );
    }

    #[test]
    fn pseudo_equilibrium_sign_flips_with_lambda() {
        for l in [-0.3, -0.15, -0.05, 0.05, 0.15, 0.3] {
            let d = sliding_data(&p13(2.0 + l, 1.0)).unwrap();
            assert_eq!(d.p_lambda.signum(), -l.signum(), "lambda = {l}");
        }
    }

    #[test]
    fn sliding_field_matches_translated_form() {
        let p = p13(1.8, 1.0);
        for y_t in [-0.1, 0.0, 0.05, 0.1] {
            let direct = sliding_velocity(&p, y_t + p.fold_height());
            let translated = sliding_velocity_translated(&p, y_t);
            assert_relative_eq!(direct, translated, max_relative = 1e-10);
        }
        let q = p13(2.2, 1.0);
        for y_t in [-0.2, -0.05, 0.05, 0.2] {
            assert_relative_eq!(
                sliding_velocity(&q, y_t + q.fold_height()),
                sliding_velocity_translated(&q, y_t),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn loci_hand_values() {
        let loci = PwlLoci::new(1.0, 3.0).unwrap();
        assert_relative_eq!(loci.f_het(1.8).unwrap(), 5.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(loci.xe_het(5.0 / 3.0).unwrap(), 1.8, max_relative = 1e-13);
        assert_relative_eq!(loci.f_het_slope_at_hopf(), -2.0, max_relative = 1e-14);
        assert_relative_eq!(loci.v1(1.0), -4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(loci.f_b2(2.5).unwrap(), 8.0, max_relative = 1e-13);
        assert!(loci.f_het(1.7).is_err());
        assert!(loci.f_het(2.1).is_err());
    }

    #[test]
    fn f_het_inverse_consistency() {
        let loci = PwlLoci::new(1.0, 3.0).unwrap();
        for f in [0.1, 1.0, 10.0] {
            let xe = loci.xe_het(f).unwrap();
            assert_relative_eq!(loci.f_het(xe).unwrap(), f, max_relative = 1e-12);
        }
    }

    #[test]
    fn f_het_slope_matches_finite_difference() {
        let loci = PwlLoci::new(1.0, 3.0).unwrap();
        let h = 1e-4;
        let x_h = loci.x_hopf();
        let fd = (loci.f_het(x_h).unwrap() - loci.f_het(x_h - h).unwrap()) / h;
        assert_relative_eq!(fd, loci.f_het_slope_at_hopf(), max_relative = 1e-3);
    }

    #[test]
    fn no_return_curves_match_signed_magnitude() {
        let loci = PwlLoci::new(1.0, 3.0).unwrap();
        for xe in [1.3, 1.7, 2.3, 2.8] {
            let signed_b1 = 2.0 * (3.0 - 1.0) * (xe - 2.0) / (3.0 * (xe - 1.0f64).powi(2));
            let signed_b2 = 2.0 * (3.0 - 1.0) * (xe - 2.0) / (1.0 * (xe - 3.0f64).powi(2));
            assert_relative_eq!(
                loci.f_b1(xe).unwrap(),
                signed_b1.abs(),
                max_relative = 1e-13
            );
            assert_relative_eq!(
                loci.f_b2(xe).unwrap(),
                signed_b2.abs(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn connection_height_matches_closed_form() {
        // Independent closed form for the connection ordinate on the
        // switching line.
        let loci = PwlLoci::new(1.0, 3.0).unwrap();
        let xe = 1.8;
        let (x0, x1) = (1.0, 3.0);
        let y_h = -2.0 * (x1 - xe) * ((x1 - xe / 2.0) * x0 - x1 * xe / 2.0) * (x0 - xe)
            / (x1 * x0 * (x0 * x1 - xe * xe));
        assert_relative_eq!(
            loci.connection_height(xe).unwrap(),
            y_h,
            max_relative = 1e-12
        );
        assert_relative_eq!(y_h, 1.6, max_relative = 1e-12);
        // And both eigenlines meet there at F = F_het.
        let p = p13(xe, loci.f_het(xe).unwrap());
        assert_relative_eq!(
            p.stable_eigenline_height(),
            p.unstable_eigenline_height(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn axis_start_flows_toward_upper_saddle() {
        let p = p13(1.8, 1.0);
        let cfg = IntegratorConfig {
            t_max: 60.0,
            ..Default::default()
        };
        let traj = pwl_integrate(
            &p,
            PwlState::new(1.2, 0.0, PwlMode::Region1, &p).unwrap(),
            &cfg,
        )
        .unwrap();
        let xs: Vec<f64> = traj.states.iter().map(|s| s.x).collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert!((traj.states.last().unwrap().x - 3.0).abs() < 1e-6);
        for s in &traj.states {
            assert_eq!(s.y, 0.0);
        }
    }

    #[test]
    fn sliding_converges_to_stable_pseudo_equilibrium() {
        // lambda > 0: attracting segment, stable pseudo-equilibrium.
        let p = p13(2.2, 1.0);
        let d = sliding_data(&p).unwrap();
        let target = d.p_lambda + p.fold_height();
        let (y_t1, y_t2) = p.tangency_heights();
        let start = 0.5 * (target + y_t1.max(y_t2));
        let cfg = IntegratorConfig {
            t_max: 200.0,
            ..Default::default()
        };
        let traj = pwl_integrate(
            &p,
            PwlState::new(p.xe(), start, PwlMode::Sliding, &p).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(traj.termination, PwlTermination::PseudoEquilibrium);
        assert!((traj.states.last().unwrap().y - target).abs() < 1e-8);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn calibration_cycle_side_is_large_f() {
        // Fixed once by simulation: at xe = 1.8 the heteroclinic value is
        // F_het = 5/3; F = 1 collapses, F = 2 sustains a crossing cycle.
        let cfg = IntegratorConfig {
            t_max: 300.0,
            ..Default::default()
        };
        let collapse = pwl_integrate(
            &p13(1.8, 1.0),
            PwlState::new(1.5, 0.3, PwlMode::Region1, &p13(1.8, 1.0)).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(collapse.termination, PwlTermination::Collapse);

        let cycle = pwl_find_limit_cycle(&p13(1.8, 2.0), &cfg).unwrap();
        let cycle = cycle.expect("crossing cycle expected at F = 2");
        assert!(cycle.amplitude.0 > 1.0 && cycle.amplitude.1 < 3.0);
    }

    #[test]
    fn pwl_cycle_uniqueness_from_seeds() {
        let cfg = IntegratorConfig::default();
        let c = pwl_find_limit_cycle(&p13(1.8, 2.0), &cfg).unwrap().unwrap();
        assert!(c.converged_heights.len() >= 2);
        for h in &c.converged_heights {
            assert!((h - c.section_height).abs() < 1e-6);
        }
    }

    #[test]
    fn pwl_cycle_absent_cases() {
        let cfg = IntegratorConfig::default();
        // Small cycle just past the pseudo-Hopf.
        let small = pwl_find_limit_cycle(&p13(1.99, 1.0), &cfg).unwrap();
        assert!(small.is_some());
        // On the heteroclinic curve: iterates approach the polycycle.
        let loci = PwlLoci::new(1.0, 3.0).unwrap();
        let on_curve = pwl_find_limit_cycle(&p13(1.8, loci.f_het(1.8).unwrap()), &cfg).unwrap();
        assert!(on_curve.is_none());
        // lambda > 0: no crossing cycle.
        let stat = pwl_find_limit_cycle(&p13(2.2, 1.0), &cfg).unwrap();
        assert!(stat.is_none());
    }

    #[test]
    fn classify_region_examples() {
        assert_eq!(
            pwl_classify_region(&p13(2.5, 10.0)).unwrap(),
            PwlRegion::Omega2
        );
        assert_eq!(
            pwl_classify_region(&p13(2.5, 5.0)).unwrap(),
            PwlRegion::Omega1
        );
        assert_eq!(
            pwl_classify_region(&p13(1.8, 5.0)).unwrap(),
            PwlRegion::Omega4
        );
        assert_eq!(
            pwl_classify_region(&p13(2.0, 1.0)).unwrap(),
            PwlRegion::Omega3
        );
        assert_eq!(
            pwl_classify_region(&p13(1.8, 1.0)).unwrap(),
            PwlRegion::Omega6
        );
        assert_eq!(
            pwl_classify_region(&p13(1.6, 0.05)).unwrap(),
            PwlRegion::Omega7
        );
    }

    #[test]
    fn resilience_distance_properties() {
        let loci = PwlLoci::new(1.0, 3.0).unwrap();
        let on_curve = p13(1.8, loci.f_het(1.8).unwrap());
        assert!(resilience_distance(&on_curve).unwrap() < 1e-6);

        let p = p13(1.9, 2.0);
        let d0 = resilience_distance(&p).unwrap();
        let d1 = resilience_distance(&p13(1.9 + 1e-6, 2.0)).unwrap();
        assert!((d0 - d1).abs() < 1e-5);

        // Distance shrinks approaching the curve at fixed F.
        let mut prev = f64::INFINITY;
        for xe in [1.95, 1.9, 1.85, 1.82] {
            let d = resilience_distance(&p13(xe, 2.0)).unwrap();
            assert!(d < prev, "xe = {xe}: {d} !< {prev}");
            prev = d;
        }

        assert!(matches!(
            resilience_distance(&p13(1.7, 1.0)),
            Err(Error::NotInCycleRegion { .. })
        ));
    }

    #[test]
    fn habitat_effect_derivatives() {
        let p = crate::params::OriginalParams::new(10.0, 0.2, 1.0, 0.5, 0.5, 0.3).unwrap();
        let f = 1.0;
        let h = habitat_effect(&p, f).unwrap();
        assert!(h.dxe_het_dd < 0.0);
        assert!(h.do_dd < 0.0);
        // Finite-difference check of the closed-form derivative.
        let dd = 1e-6;
        let p_hi = crate::params::OriginalParams::new(10.0, 0.2 + dd, 1.0, 0.5, 0.5, 0.3).unwrap();
        let fd = (habitat_effect(&p_hi, f).unwrap().xe_het - h.xe_het) / dd;
        assert_relative_eq!(fd, h.dxe_het_dd, max_relative = 1e-5);
        // d_o'(D) < 0 over a grid.
        let mut prev = f64::INFINITY;
        for i in 0..10 {
            let d = 0.05 + 0.03 * i as f64;
            let q = crate::params::OriginalParams::new(10.0, d, 1.0, 0.5, 0.5, 0.3).unwrap();
            let eff = habitat_effect(&q, f).unwrap();
            assert!(eff.d_o < prev);
            prev = eff.d_o;
        }
    }

    #[test]
    fn pseudo_hopf_amplitude_grows_linearly() {
        // Crossing-cycle amplitude near the pseudo-Hopf: the measured
        // exponent in |lambda| is ~1 (linear), unlike the square-root law of
        // the smooth Hopf.
        let cfg = IntegratorConfig::default();
        let mut amps = Vec::new();
        for lambda in [-0.01, -0.02, -0.04] {
            let p = p13(2.0 + lambda, 1.0);
            let c = pwl_find_limit_cycle(&p, &cfg)
                .unwrap()
                .expect("crossing cycle");
            amps.push(c.amplitude.1 - c.amplitude.0);
        }
        let e1 = (amps[1] / amps[0]).ln() / 2.0f64.ln();
        let e2 = (amps[2] / amps[1]).ln() / 2.0f64.ln();
        assert!(
            (e1 - 1.0).abs() <= 0.25 && (e2 - 1.0).abs() <= 0.25,
            "measured exponents {e1:.3}, {e2:.3} (amplitudes {amps:?})"
        );
    }

    #[test]
    fn xe_het_approaches_hopf_at_small_f() {
        let loci = PwlLoci::new(1.0, 3.0).unwrap();
        assert!((loci.xe_het(1e-8).unwrap() - 2.0).abs() < 1e-7);
    }
}
