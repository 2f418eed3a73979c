//! Adaptive integration of the smooth system with event detection, plus the
//! shooting machinery built on it: separatrix tracing from the saddle
//! eigendirections, the signed section gap between the two interior
//! manifolds, and Poincaré-section limit-cycle detection.
//!
//! The integrator is a classical embedded Dormand-Prince 5(4) pair with
//! proportional step control. Events are located by bisection to 1e-10 in
//! time, re-integrating a single trial step from the left endpoint at each
//! probe so event states carry the method's own accuracy.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::SmoothParams;
use crate::smooth::{self, field, State};

/// Tolerances, step bounds, horizon and event set for one integration.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub t_max: f64,
    pub max_steps: usize,
    pub events: Vec<EventSpec>,
    /// When false, only the endpoints and event states are stored.
    pub record: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            min_step: 1e-13,
            t_max: 1000.0,
            max_steps: 5_000_000,
            events: Vec::new(),
            record: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.min_step > 0.0
            && self.min_step <= self.max_step
            && self.t_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "integrator config",
                constraint: "positive tolerances and 0 < min_step <= max_step, t_max > 0",
            })
        }
    }
}

/// Which direction of the event function's sign change fires the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CrossDirection {
    Decreasing,
    Increasing,
    Either,
}

/// Scalar event functions g(state); an event fires when g changes sign in
/// the configured direction across an accepted step.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum EventFn {
    /// g = x - value (oriented crossing of a vertical line).
    VerticalCross { x: f64, direction: CrossDirection },
    /// g = y - value.
    HorizontalCross { y: f64, direction: CrossDirection },
    /// g = max(x - x_below, y - y_below); fires when both drop below.
    BoxEntry { x_below: f64, y_below: f64 },
    /// g = dist((x, y), center) - radius; fires on entry.
    Proximity { x: f64, y: f64, radius: f64 },
}

impl EventFn {
    fn value(&self, s: &State) -> f64 {
        match *self {
            EventFn::VerticalCross { x, .. } => s.x - x,
            EventFn::HorizontalCross { y, .. } => s.y - y,
            EventFn::BoxEntry { x_below, y_below } => (s.x - x_below).max(s.y - y_below),
            EventFn::Proximity { x, y, radius } => (s.x - x).hypot(s.y - y) - radius,
        }
    }

    fn direction(&self) -> CrossDirection {
        match *self {
            EventFn::VerticalCross { direction, .. } => direction,
            EventFn::HorizontalCross { direction, .. } => direction,
            EventFn::BoxEntry { .. } | EventFn::Proximity { .. } => CrossDirection::Decreasing,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EventSpec {
    pub event: EventFn,
    pub terminal: bool,
    pub label: String,
}

impl EventSpec {
    pub fn new(event: EventFn, terminal: bool, label: &str) -> Self {
        Self {
            event,
            terminal,
            label: label.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Event {
    pub t: f64,
    pub state: State,
    pub label: String,
}

/// Why an integration stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    TimeLimit,
    Event { label: String },
}

/// Time-stamped solution samples with event annotations. Times are the
/// integration clock: reversed-time traces (stable manifolds) also report
/// increasing times.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub events: Vec<Event>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last_state(&self) -> State {
        *self.states.last().expect("trajectory is never empty")
    }
    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy)]
struct StepResult {
    y: State,
    err: f64,
    k_last: (f64, f64),
}

fn dp_step<F: Fn(&State) -> (f64, f64)>(
    rhs: &F,
    y: &State,
    k1: (f64, f64),
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> StepResult {
    let mut k = [(0.0, 0.0); 7];
    k[0] = k1;
    for i in 0..6 {
        let mut ax = 0.0;
        let mut ay = 0.0;
        for (j, kj) in k.iter().enumerate().take(i + 1) {
            ax += A[i][j] * kj.0;
            ay += A[i][j] * kj.1;
        }
        let probe = State {
            x: y.x + h * ax,
            y: y.y + h * ay,
        };
        k[i + 1] = rhs(&probe);
    }
    // Row 6 of A holds the 5th-order weights (FSAL: k[6] = f at the new point).
    let ynew = State {
        x: y.x
            + h * (A[5][0] * k[0].0
                + A[5][2] * k[2].0
                + A[5][3] * k[3].0
                + A[5][4] * k[4].0
                + A[5][5] * k[5].0),
        y: y.y
            + h * (A[5][0] * k[0].1
                + A[5][2] * k[2].1
                + A[5][3] * k[3].1
                + A[5][4] * k[4].1
                + A[5][5] * k[5].1),
    };
    k[6] = rhs(&ynew);
    let ex = h * (0..7).map(|i| E[i] * k[i].0).sum::<f64>();
    let ey = h * (0..7).map(|i| E[i] * k[i].1).sum::<f64>();
    let sx = abs_tol + rel_tol * y.x.abs().max(ynew.x.abs());
    let sy = abs_tol + rel_tol * y.y.abs().max(ynew.y.abs());
    let err = (0.5 * ((ex / sx).powi(2) + (ey / sy).powi(2))).sqrt();
    StepResult {
        y: ynew,
        err,
        k_last: k[6],
    }
}

/// State at `t0 + dt` obtained from a single trial step; used by the event
/// bisection so probe states carry one-step accuracy.
fn probe<F: Fn(&State) -> (f64, f64)>(
    rhs: &F,
    y: &State,
    k1: (f64, f64),
    dt: f64,
    cfg: &IntegratorConfig,
) -> State {
    dp_step(rhs, y, k1, dt, cfg.rel_tol, cfg.abs_tol).y
}

fn initial_step<F: Fn(&State) -> (f64, f64)>(rhs: &F, y: &State, cfg: &IntegratorConfig) -> f64 {
    let (fx, fy) = rhs(y);
    let scale = fx.hypot(fy).max(1e-8);
    (0.01 * (y.x.hypot(y.y).max(1e-3)) / scale)
        .min(cfg.max_step)
        .max(cfg.min_step)
}

/// Core integration loop over an arbitrary planar right-hand side.
pub(crate) fn integrate_rhs<F: Fn(&State) -> (f64, f64)>(
    rhs: F,
    s0: State,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut t = 0.0;
    let mut y = s0;
    let mut k1 = rhs(&y);
    let mut h = initial_step(&rhs, &y, cfg);
    let mut g_prev: Vec<f64> = cfg.events.iter().map(|e| e.event.value(&y)).collect();

    let mut times = vec![0.0];
    let mut states = vec![y];
    let mut events = Vec::new();

    let record_point = |t: f64, s: State, times: &mut Vec<f64>, states: &mut Vec<State>| {
        if cfg.record {
            times.push(t);
            states.push(s);
        }
    };

    let mut steps = 0usize;
    loop {
        if t >= cfg.t_max {
            break;
        }
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Error::Inconclusive {
                detail: "step budget exhausted",
            });
        }
        h = h.min(cfg.t_max - t).min(cfg.max_step);
        let step = dp_step(&rhs, &y, k1, h, cfg.rel_tol, cfg.abs_tol);
        if !step.y.x.is_finite() || !step.y.y.is_finite() || !step.err.is_finite() {
            h *= 0.25;
            if h < cfg.min_step {
                return Err(Error::StepUnderflow { t, x: y.x, y: y.y });
            }
            continue;
        }
        if step.err > 1.0 {
            h *= (0.9 * step.err.powf(-0.2)).max(0.2);
            if h < cfg.min_step {
                return Err(Error::StepUnderflow { t, x: y.x, y: y.y });
            }
            continue;
        }

        // Accepted: check events over [t, t+h] before committing.
        let t_new = t + h;
        let mut fired: Vec<(f64, State, usize)> = Vec::new();
        for (idx, spec) in cfg.events.iter().enumerate() {
            let g0 = g_prev[idx];
            let g1 = spec.event.value(&step.y);
            let dir = spec.event.direction();
            let crossed = match dir {
                CrossDirection::Decreasing => g0 > 0.0 && g1 <= 0.0,
                CrossDirection::Increasing => g0 < 0.0 && g1 >= 0.0,
                CrossDirection::Either => {
                    (g0 > 0.0 && g1 <= 0.0) || (g0 < 0.0 && g1 >= 0.0)
                }
            };
            if crossed {
                // Bisection on the trial-step state to 1e-10 in time.
                let mut lo = 0.0f64;
                let mut hi = h;
                let mut s_hi = step.y;
                for _ in 0..60 {
                    if hi - lo < 1e-10 {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    let s_mid = probe(&rhs, &y, k1, mid, cfg);
                    let g_mid = spec.event.value(&s_mid);
                    let hit = match dir {
                        CrossDirection::Decreasing => g_mid <= 0.0,
                        CrossDirection::Increasing => g_mid >= 0.0,
                        CrossDirection::Either => g_mid.signum() != g0.signum(),
                    };
                    if hit {
                        hi = mid;
                        s_hi = s_mid;
                    } else {
                        lo = mid;
                    }
                }
                fired.push((t + hi, s_hi, idx));
            }
        }
        fired.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut terminated = None;
        for (te, se, idx) in fired {
            let spec = &cfg.events[idx];
            events.push(Event {
                t: te,
                state: se,
                label: spec.label.clone(),
            });
            if spec.terminal {
                terminated = Some((te, se, spec.label.clone()));
                break;
            }
        }
        if let Some((te, se, label)) = terminated {
            times.push(te);
            states.push(se);
            return Ok(Trajectory {
                times,
                states,
                events,
                termination: Termination::Event { label },
            });
        }

        t = t_new;
        y = step.y;
        k1 = step.k_last;
        for (idx, spec) in cfg.events.iter().enumerate() {
            g_prev[idx] = spec.event.value(&y);
        }
        record_point(t, y, &mut times, &mut states);
        h *= (0.9 * step.err.powf(-0.2)).clamp(0.2, 5.0);
        h = h.max(cfg.min_step);
    }

    if !cfg.record {
        times.push(t);
        states.push(y);
    }
    Ok(Trajectory {
        times,
        states,
        events,
        termination: Termination::TimeLimit,
    })
}

/// Integrates the smooth system forward in time.
pub fn integrate(p: &SmoothParams, s0: State, cfg: &IntegratorConfig) -> Result<Trajectory> {
    integrate_rhs(|s| field(p, s), s0, cfg)
}

/// The four separatrix branches relevant to the saddle loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeparatrixBranch {
    /// Axis branch leaving (x0, 0) toward larger x.
    UnstableOfX0,
    /// Interior branch of W^s(x0, 0), traced in reversed time.
    StableOfX0,
    /// Interior branch of W^u(x1, 0) entering the first quadrant.
    UnstableOfX1,
    /// Axis branch of W^s(x1, 0), traced in reversed time toward smaller x.
    StableOfX1,
}

impl SeparatrixBranch {
    pub fn reversed_time(self) -> bool {
        matches!(
            self,
            SeparatrixBranch::StableOfX0 | SeparatrixBranch::StableOfX1
        )
    }
}

fn branch_start(p: &SmoothParams, branch: SeparatrixBranch, offset: f64) -> State {
    let (x0, x1) = (p.x0(), p.x1());
    match branch {
        SeparatrixBranch::UnstableOfX0 => State {
            x: x0 + offset,
            y: 0.0,
        },
        SeparatrixBranch::StableOfX0 => {
            let d = smooth::lower_saddle(p).stable_dir;
            State {
                x: x0 + offset * d[0],
                y: offset * d[1],
            }
        }
        SeparatrixBranch::UnstableOfX1 => {
            let d = smooth::upper_saddle(p).unstable_dir;
            State {
                x: x1 + offset * d[0],
                y: offset * d[1],
            }
        }
        SeparatrixBranch::StableOfX1 => State {
            x: x1 - offset,
            y: 0.0,
        },
    }
}

fn section_direction(branch: SeparatrixBranch) -> CrossDirection {
    match branch {
        // Forward branches approach the section from the saddle's side.
        SeparatrixBranch::UnstableOfX0 => CrossDirection::Increasing,
        SeparatrixBranch::UnstableOfX1 => CrossDirection::Decreasing,
        // Reversed-time branches move away from their saddle.
        SeparatrixBranch::StableOfX0 => CrossDirection::Increasing,
        SeparatrixBranch::StableOfX1 => CrossDirection::Decreasing,
    }
}

/// Traces one separatrix branch from `saddle + offset * eigvec` (eigvec
/// oriented into the open first quadrant for the interior branches, along
/// the axis toward the section otherwise). Stable branches run in reversed
/// time. The trace stops at the first crossing of the section x = xe or at
/// t_max.
pub fn trace_separatrix(
    p: &SmoothParams,
    branch: SeparatrixBranch,
    offset: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !(offset > 0.0) || offset >= p.x1() - p.x0() {
        return Err(Error::Domain {
            what: "separatrix offset",
            constraint: "0 < offset << x1 - x0",
        });
    }
    let mut cfg = cfg.clone();
    cfg.events.push(EventSpec::new(
        EventFn::VerticalCross {
            x: p.xe(),
            direction: section_direction(branch),
        },
        true,
        "section",
    ));
    let s0 = branch_start(p, branch, offset);
    if branch.reversed_time() {
        integrate_rhs(
            |s| {
                let (dx, dy) = field(p, s);
                (-dx, -dy)
            },
            s0,
            &cfg,
        )
    } else {
        integrate_rhs(|s| field(p, s), s0, &cfg)
    }
}

/// How a manifold met the section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CrossKind {
    Transversal,
    /// The trace converged to the coexistence equilibrium, which sits on the
    /// section; the crossing height limits to ye. Happens in the nodal
    /// regime where the manifold spirals nowhere.
    EquilibriumLimit,
}

const PROXIMITY_RADIUS: f64 = 1e-4;

fn manifold_name(branch: SeparatrixBranch) -> &'static str {
    match branch {
        SeparatrixBranch::UnstableOfX0 => "unstable manifold of (x0, 0)",
        SeparatrixBranch::StableOfX0 => "stable manifold of (x0, 0)",
        SeparatrixBranch::UnstableOfX1 => "unstable manifold of (x1, 0)",
        SeparatrixBranch::StableOfX1 => "stable manifold of (x1, 0)",
    }
}

fn crossing_once(
    p: &SmoothParams,
    branch: SeparatrixBranch,
    offset: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, CrossKind)> {
    let mut cfg = cfg.clone();
    cfg.record = false;
    cfg.events.push(EventSpec::new(
        EventFn::Proximity {
            x: p.xe(),
            y: p.ye(),
            radius: PROXIMITY_RADIUS,
        },
        true,
        "equilibrium",
    ));
    let traj = trace_separatrix(p, branch, offset, &cfg)?;
    match &traj.termination {
        Termination::Event { label } if label == "section" => {
            Ok((traj.last_state().y, CrossKind::Transversal))
        }
        Termination::Event { .. } => Ok((p.ye(), CrossKind::EquilibriumLimit)),
        Termination::TimeLimit => Err(Error::NoSectionCrossing {
            manifold: manifold_name(branch),
            section: p.xe(),
        }),
    }
}

/// First-crossing height of a separatrix on the section x = xe, with the
/// offset Richardson check: the offset is halved until the height moves by
/// less than 1e-4 between consecutive halvings.
pub fn section_crossing_height(
    p: &SmoothParams,
    branch: SeparatrixBranch,
    cfg: &IntegratorConfig,
) -> Result<(f64, CrossKind)> {
    let mut offset = 1e-6 * (p.x1() - p.x0());
    let (mut h_prev, _) = crossing_once(p, branch, offset, cfg)?;
    let mut delta = f64::INFINITY;
    for _ in 0..10 {
        offset *= 0.5;
        let (h, kind) = crossing_once(p, branch, offset, cfg)?;
        delta = (h - h_prev).abs();
        if delta < 1e-4 {
            return Ok((h, kind));
        }
        h_prev = h;
    }
    Err(Error::OffsetUnstable { delta })
}

/// Signed distance between the interior manifolds on the section x = xe.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SectionGap {
    /// h_unstable - h_stable; positive on the collapse side, negative on the
    /// cycle side, zero on the heteroclinic connection.
    pub gap: f64,
    pub h_unstable: f64,
    pub h_stable: f64,
    pub unstable_kind: CrossKind,
    pub stable_kind: CrossKind,
}

/// Gap between the first crossings of W^u(x1, 0) and W^s(x0, 0) on x = xe.
/// Requires x_c-free interior placement x0 < xe < x_H.
pub fn section_gap(p: &SmoothParams, cfg: &IntegratorConfig) -> Result<SectionGap> {
    if !(p.x0() < p.xe() && p.xe() < p.x_hopf()) {
        return Err(Error::Domain {
            what: "section gap",
            constraint: "x0 < xe < (x0+x1)/2",
        });
    }
    let (h_u, ku) = section_crossing_height(p, SeparatrixBranch::UnstableOfX1, cfg)?;
    let (h_s, ks) = section_crossing_height(p, SeparatrixBranch::StableOfX0, cfg)?;
    Ok(SectionGap {
        gap: h_u - h_s,
        h_unstable: h_u,
        h_stable: h_s,
        unstable_kind: ku,
        stable_kind: ks,
    })
}

/// A detected periodic orbit.
#[derive(Debug, Clone, Serialize)]
pub struct LimitCycle {
    /// Downward crossing of the section x = xe on the cycle.
    pub section_point: State,
    pub period: f64,
    /// One full loop sampled at the accepted steps.
    pub samples: Trajectory,
    /// (x_min, x_max, y_min, y_max) over the loop.
    pub amplitude: (f64, f64, f64, f64),
    /// Section fixed points reached from each converged seed; used for
    /// uniqueness checks.
    pub converged_heights: Vec<f64>,
}

enum ReturnOutcome {
    Returned { y: f64, period: f64 },
    Collapse,
    EquilibriumBound,
    NoReturn,
}

fn return_map(
    p: &SmoothParams,
    y_height: f64,
    cfg: &IntegratorConfig,
    record: bool,
) -> Result<(ReturnOutcome, Option<Trajectory>)> {
    let mut c = cfg.clone();
    c.record = record;
    c.events = vec![
        EventSpec::new(
            EventFn::VerticalCross {
                x: p.xe(),
                direction: CrossDirection::Decreasing,
            },
            true,
            "section",
        ),
        EventSpec::new(
            EventFn::BoxEntry {
                x_below: 0.5 * p.x0(),
                y_below: 1e-6,
            },
            true,
            "collapse",
        ),
    ];
    let s0 = State {
        x: p.xe(),
        y: y_height,
    };
    let traj = integrate(p, s0, &c)?;
    let out = match &traj.termination {
        Termination::Event { label } if label == "section" => ReturnOutcome::Returned {
            y: traj.last_state().y,
            period: traj.last_time(),
        },
        Termination::Event { .. } => ReturnOutcome::Collapse,
        Termination::TimeLimit => {
            let eq = State {
                x: p.xe(),
                y: p.ye(),
            };
            if traj.last_state().dist(&eq) < 1e-2 {
                ReturnOutcome::EquilibriumBound
            } else {
                ReturnOutcome::NoReturn
            }
        }
    };
    Ok((out, if record { Some(traj) } else { None }))
}

const CYCLE_FIXED_POINT_TOL: f64 = 1e-9;
const CYCLE_EQUILIBRIUM_TOL: f64 = 1e-5;

enum SeedOutcome {
    Cycle { y: f64, period: f64 },
    Equilibrium,
    Collapse,
    Inconclusive,
}

fn solve_seed(
    p: &SmoothParams,
    seed: f64,
    y_hi: f64,
    cfg: &IntegratorConfig,
) -> Result<SeedOutcome> {
    let ye = p.ye();
    let eval = |y: f64| -> Result<Option<(f64, f64)>> {
        match return_map(p, y, cfg, false)?.0 {
            ReturnOutcome::Returned { y, period } => Ok(Some((y, period))),
            ReturnOutcome::Collapse => Ok(None),
            ReturnOutcome::EquilibriumBound => Ok(Some((ye, 0.0))),
            ReturnOutcome::NoReturn => Err(Error::Inconclusive {
                detail: "return map did not close within t_max",
            }),
        }
    };

    // Plain iteration until the residual is small or a secant pair is ready.
    let mut y_a = seed;
    let mut p_a = match eval(y_a)? {
        Some((v, _)) => v,
        None => return Ok(SeedOutcome::Collapse),
    };
    for _ in 0..3 {
        if (p_a - y_a).abs() < CYCLE_FIXED_POINT_TOL {
            break;
        }
        y_a = p_a;
        match eval(y_a)? {
            Some((v, _)) => p_a = v,
            None => return Ok(SeedOutcome::Collapse),
        }
    }
    let mut g_a = p_a - y_a;
    let mut y_b = p_a;
    let mut g_b;
    let mut period;
    match eval(y_b)? {
        Some((v, t)) => {
            g_b = v - y_b;
            period = t;
        }
        None => return Ok(SeedOutcome::Collapse),
    }

    let mut upper_clamps = 0u32;
    for _ in 0..80 {
        if g_b.abs() < CYCLE_FIXED_POINT_TOL {
            let y_star = y_b;
            if (y_star - ye).abs() < CYCLE_EQUILIBRIUM_TOL {
                return Ok(SeedOutcome::Equilibrium);
            }
            // Near a weak focus the return map is tangent to the identity
            // and the residual test alone can stall at a spurious height.
            // A genuine stable cycle repels the interior midpoint outward.
            let mid = 0.5 * (y_star + ye);
            if let Some((p_mid, _)) = eval(mid)? {
                if p_mid - mid < CYCLE_FIXED_POINT_TOL {
                    return Ok(SeedOutcome::Equilibrium);
                }
            }
            return Ok(SeedOutcome::Cycle { y: y_star, period });
        }
        let denom = g_b - g_a;
        let mut y_next = if denom.abs() > 1e-300 {
            y_b - g_b * (y_b - y_a) / denom
        } else {
            y_b + g_b
        };
        // Secant can overshoot: keep iterates on the section's upper branch
        // and inside the seed bracket (above it lies the collapse basin).
        if !y_next.is_finite() || y_next <= ye + 1e-12 {
            y_next = 0.5 * (y_b + ye.max(y_b + g_b));
            if y_next <= ye + 1e-12 {
                return Ok(SeedOutcome::Equilibrium);
            }
        }
        if y_next >= y_hi {
            // Iterates repeatedly pushed against the basin boundary with an
            // outward residual: no fixed point below it, the polycycle side
            // is broken outward and the orbit family is collapse-bound.
            upper_clamps += 1;
            if upper_clamps >= 3 && g_b > 0.0 {
                return Ok(SeedOutcome::Collapse);
            }
            y_next = 0.5 * (y_b + y_hi);
        } else {
            upper_clamps = 0;
        }
        y_a = y_b;
        g_a = g_b;
        y_b = y_next;
        match eval(y_b)? {
            Some((v, t)) => {
                g_b = v - y_b;
                period = t;
            }
            None => return Ok(SeedOutcome::Collapse),
        }
    }
    Ok(SeedOutcome::Inconclusive)
}

/// Searches for the unique stable limit cycle by iterating the return map on
/// the downward-crossing branch of the section x = xe from three seeds.
/// Returns `None` when the iterates settle on the equilibrium or leave for
/// the collapse basin; an inconclusive iteration cap is an error distinct
/// from absence.
pub fn find_limit_cycle(p: &SmoothParams, cfg: &IntegratorConfig) -> Result<Option<LimitCycle>> {
    if !p.is_generic() {
        return Err(Error::Domain {
            what: "limit-cycle search",
            constraint: "x0 < xe < x1",
        });
    }
    let ye = p.ye();
    let (upper, y_hi) = match section_crossing_height(p, SeparatrixBranch::StableOfX0, cfg) {
        Ok((h, CrossKind::Transversal)) if h > ye => (h, h),
        _ => (ye + ye.max(0.3), f64::INFINITY),
    };
    let seeds = [0.2, 0.45, 0.7].map(|f| ye + f * (upper - ye));

    let mut heights = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut inconclusive = false;
    for seed in seeds {
        match solve_seed(p, seed, y_hi, cfg)? {
            SeedOutcome::Cycle { y, period } => {
                heights.push(y);
                if best.is_none() {
                    best = Some((y, period));
                }
            }
            SeedOutcome::Inconclusive => inconclusive = true,
            SeedOutcome::Equilibrium | SeedOutcome::Collapse => {}
        }
    }

    let Some((y_star, _)) = best else {
        if inconclusive {
            return Err(Error::Inconclusive {
                detail: "return-map iteration cap reached without convergence",
            });
        }
        return Ok(None);
    };

    // One recorded loop from the converged point for samples and period.
    let (out, samples) = return_map(p, y_star, cfg, true)?;
    let (period, samples) = match (out, samples) {
        (ReturnOutcome::Returned { period, .. }, Some(tr)) => (period, tr),
        _ => {
            return Err(Error::Inconclusive {
                detail: "converged section point failed to produce a closed loop",
            })
        }
    };
    let mut amp = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for s in &samples.states {
        amp.0 = amp.0.min(s.x);
        amp.1 = amp.1.max(s.x);
        amp.2 = amp.2.min(s.y);
        amp.3 = amp.3.max(s.y);
    }
    Ok(Some(LimitCycle {
        section_point: State {
            x: p.xe(),
            y: y_star,
        },
        period,
        samples,
        amplitude: amp,
        converged_heights: heights,
    }))
}

/// Forward return-map multiplier at the cycle's section point, from a
/// one-sided difference. The reversed-time map has the reciprocal slope, so
/// a stable cycle (|slope| < 1 here) is repelling backwards in time.
pub fn return_map_slope(
    p: &SmoothParams,
    cycle: &LimitCycle,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let y0 = cycle.section_point.y;
    let d = 1e-5 * y0.max(1.0);
    let f0 = match return_map(p, y0, cfg, false)?.0 {
        ReturnOutcome::Returned { y, .. } => y,
        _ => {
            return Err(Error::Inconclusive {
                detail: "slope probe left the section",
            })
        }
    };
    let f1 = match return_map(p, y0 + d, cfg, false)?.0 {
        ReturnOutcome::Returned { y, .. } => y,
        _ => {
            return Err(Error::Inconclusive {
                detail: "slope probe left the section",
            })
        }
    };
    Ok((f1 - f0) / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p13(xe: f64, f: f64) -> SmoothParams {
        SmoothParams::new(1.0, 3.0, xe, f).unwrap()
    }

    #[test]
    fn axis_flow_converges_to_upper_equilibrium() {
        let p = p13(2.0, 1.0);
        let cfg = IntegratorConfig {
            t_max: 100.0,
            ..Default::default()
        };
        let traj = integrate(&p, State { x: 1.5, y: 0.0 }, &cfg).unwrap();
        for s in &traj.states {
            assert_eq!(s.y, 0.0);
        }
        assert!((traj.last_state().x - 3.0).abs() < 1e-8);
    }

    #[test]
    fn equilibrium_is_fixed() {
        let p = p13(2.0, 1.0);
        let cfg = IntegratorConfig {
            t_max: 50.0,
            ..Default::default()
        };
        let s0 = State {
            x: 2.0,
            y: 1.0 / 3.0,
        };
        let traj = integrate(&p, s0, &cfg).unwrap();
        assert!(traj.last_state().dist(&s0) < 1e-9);
    }

    #[test]
    fn interior_orbit_converges_to_stable_point() {
        // Static-coexistence parameters: the basin point (1.5, 0.3) spirals
        // into (2.5, 0.25).
        let p = p13(2.5, 1.0);
        let cfg = IntegratorConfig {
            t_max: 200.0,
            ..Default::default()
        };
        let traj = integrate(&p, State { x: 1.5, y: 0.3 }, &cfg).unwrap();
        let eq = State { x: 2.5, y: 0.25 };
        assert!(traj.last_state().dist(&eq) < 1e-6);
    }

    #[test]
    fn event_location_precision() {
        let p = p13(2.5, 1.0);
        let mut cfg = IntegratorConfig {
            t_max: 50.0,
            ..Default::default()
        };
        cfg.events.push(EventSpec::new(
            EventFn::VerticalCross {
                x: 2.0,
                direction: CrossDirection::Increasing,
            },
            true,
            "probe",
        ));
        let traj = integrate(&p, State { x: 1.2, y: 0.1 }, &cfg).unwrap();
        assert!(matches!(traj.termination, Termination::Event { .. }));
        assert!((traj.last_state().x - 2.0).abs() < 1e-8);
    }

    #[test]
    fn times_strictly_increasing() {
        let p = p13(1.9, 1.0);
        let cfg = IntegratorConfig {
            t_max: 60.0,
            ..Default::default()
        };
        let traj = integrate(&p, State { x: 1.5, y: 0.3 }, &cfg).unwrap();
        for w in traj.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn zero_offset_rejected() {
        let p = p13(1.9, 1.0);
        assert!(matches!(
            trace_separatrix(&p, SeparatrixBranch::UnstableOfX1, 0.0, &Default::default()),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn axis_separatrix_crosses_at_zero_height() {
        let p = p13(1.9, 1.0);
        let traj = trace_separatrix(
            &p,
            SeparatrixBranch::UnstableOfX0,
            1e-6,
            &Default::default(),
        )
        .unwrap();
        assert!(matches!(traj.termination, Termination::Event { .. }));
        assert_eq!(traj.last_state().y, 0.0);
        assert!((traj.last_state().x - 1.9).abs() < 1e-8);
    }

    #[test]
    fn stable_manifold_backward_grows_in_y() {
        // xe < x_H: the backward-stable trace climbs out of any compact set.
        let p = p13(1.7, 1.0);
        let cfg = IntegratorConfig {
            t_max: 40.0,
            ..Default::default()
        };
        let traj = trace_separatrix(&p, SeparatrixBranch::StableOfX0, 1e-6, &cfg).unwrap();
        let max_y = traj.states.iter().map(|s| s.y).fold(0.0, f64::max);
        assert!(max_y > 0.2, "max y along backward trace: {max_y}");
    }

    #[test]
    fn section_gap_signs_match_calibration() {
        // Calibrated against the phase portraits: positive gap on the
        // collapse side, negative on the cycle side.
        let cfg = IntegratorConfig::default();
        let low = section_gap(&p13(1.55, 1.0), &cfg).unwrap();
        assert!(low.gap > 0.0);
        assert_relative_eq!(low.gap, 0.5361, max_relative = 2e-2);
        let high = section_gap(&p13(1.99, 1.0), &cfg).unwrap();
        assert!(high.gap < 0.0);
        assert_relative_eq!(high.gap, -0.13414, max_relative = 2e-2);
    }

    #[test]
    fn section_gap_rejects_static_side() {
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            section_gap(&p13(2.2, 1.0), &cfg),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn limit_cycle_found_and_contained() {
        let p = p13(1.95, 1.0);
        let cfg = IntegratorConfig::default();
        let cycle = find_limit_cycle(&p, &cfg).unwrap().expect("cycle expected");
        let (xmin, xmax, ymin, ymax) = cycle.amplitude;
        assert!(1.0 < xmin && xmax < 3.0, "box ({xmin}, {xmax})");
        assert!(ymin > 0.0 && ymax < 3.0);
        assert_eq!(cycle.converged_heights.len(), 3);
        for h in &cycle.converged_heights {
            assert!((h - cycle.section_point.y).abs() < 1e-6);
        }
        assert!(cycle.period > 5.0 && cycle.period < 30.0);
        // Stability: forward multiplier inside the unit circle, so the
        // reversed-time map is repelling.
        let slope = return_map_slope(&p, &cycle, &cfg).unwrap();
        assert!(slope.abs() < 1.0, "multiplier {slope}");
    }

    #[test]
    fn no_cycle_on_static_side() {
        let cfg = IntegratorConfig::default();
        assert!(find_limit_cycle(&p13(2.5, 1.0), &cfg).unwrap().is_none());
        assert!(find_limit_cycle(&p13(2.0 + 1e-9, 1.0), &cfg)
            .unwrap()
            .is_none());
    }

    #[test]
    fn no_cycle_in_collapse_region() {
        let cfg = IntegratorConfig::default();
        assert!(find_limit_cycle(&p13(1.45, 1.0), &cfg).unwrap().is_none());
    }
}
