//! The smooth cubic vector field, its linearization, equilibrium
//! classification, the rotated-field determinant, and the three local charts
//! of the Poincaré compactification.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::SmoothParams;

/// Planar state. `new` enforces finite, nonnegative coordinates; integrator
/// output may carry a tiny negative slack from roundoff and is constructed
/// directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0) {
            return Err(Error::Domain {
                what: "state",
                constraint: "finite nonnegative coordinates",
            });
        }
        Ok(Self { x, y })
    }

    pub fn dist(&self, other: &State) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Right-hand side of the smooth system, in the factored form
/// x*(...) , y*(...), which keeps both axes invariant to the last bit.
pub fn field(p: &SmoothParams, s: &State) -> (f64, f64) {
    let (x0, x1) = (p.x0(), p.x1());
    let q = x0 * x1;
    let dx = s.x * (-s.x * s.x / q + (x0 + x1) * s.x / q - s.y - 1.0);
    let dy = p.f() * s.y * (s.x - p.xe());
    (dx, dy)
}

/// Jacobian matrix of the field at an arbitrary state, row-major.
pub fn jacobian(p: &SmoothParams, s: &State) -> [[f64; 2]; 2] {
    let (x0, x1) = (p.x0(), p.x1());
    let q = x0 * x1;
    [
        [
            -3.0 * s.x * s.x / q + 2.0 * (x0 + x1) * s.x / q - s.y - 1.0,
            -s.x,
        ],
        [p.f() * s.y, p.f() * (s.x - p.xe())],
    ]
}

/// Rotated-vector-field determinant Theta_xe = -F y P(x, y), where P is the
/// x-component of the field. Strictly positive on the region above the prey
/// nullcline with y > 0, so increasing xe rotates the field counter-clockwise
/// there.
pub fn rotation_determinant(p: &SmoothParams, s: &State) -> f64 {
    let (px, _) = field(p, s);
    -p.f() * s.y * px
}

/// Prey nullcline y = -(x-x0)(x-x1)/(x0 x1).
pub fn prey_nullcline(p: &SmoothParams, x: f64) -> f64 {
    -(x - p.x0()) * (x - p.x1()) / (p.x0() * p.x1())
}

/// True when a state lies in the rotation region: first quadrant, above the
/// prey nullcline.
pub fn in_rotation_region(p: &SmoothParams, s: &State) -> bool {
    s.x > 0.0 && s.y > 0.0 && s.y > prey_nullcline(p, s.x)
}

/// Linear type of an equilibrium. `Center` is the degenerate zero-trace case
/// with positive determinant (only reachable on the Hopf locus itself).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumKind {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    Center,
}

/// Sense of rotation around a focus, from the sign of the lower-left
/// Jacobian entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rotation {
    Counterclockwise,
    Clockwise,
}

/// Non-generic features of an equilibrium configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Degeneracy {
    /// xe < x0: coexistence point left of the lower saddle (negative ye).
    CoexistenceBelowInterval,
    /// xe > x1: coexistence point right of the upper saddle (negative ye).
    CoexistenceAboveInterval,
    /// Zero trace at the coexistence point (Hopf locus).
    HopfTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub point: State,
    pub kind: EquilibriumKind,
    pub trace: f64,
    pub det: f64,
    pub discriminant: f64,
    pub eigenvalues: [Complex64; 2],
    /// Present only when the eigenvalues are real; aligned with `eigenvalues`.
    pub eigenvectors: Option<[[f64; 2]; 2]>,
    /// Present instead of eigenvectors for complex pairs.
    pub rotation: Option<Rotation>,
}

/// Equilibria of the smooth system with full linear classification.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriaReport {
    pub reports: Vec<EquilibriumReport>,
    pub degeneracies: Vec<Degeneracy>,
}

pub fn classify(trace: f64, det: f64) -> EquilibriumKind {
    let disc = trace * trace - 4.0 * det;
    if det < 0.0 {
        EquilibriumKind::Saddle
    } else if trace == 0.0 {
        EquilibriumKind::Center
    } else if disc >= 0.0 {
        if trace < 0.0 {
            EquilibriumKind::StableNode
        } else {
            EquilibriumKind::UnstableNode
        }
    } else if trace < 0.0 {
        EquilibriumKind::StableFocus
    } else {
        EquilibriumKind::UnstableFocus
    }
}

fn report_at(p: &SmoothParams, point: State, closed_form: Option<(f64, f64)>) -> EquilibriumReport {
    let j = jacobian(p, &point);
    let (trace, det) =
        closed_form.unwrap_or_else(|| (j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0]));
    let disc = trace * trace - 4.0 * det;
    let kind = classify(trace, det);
    let (eigenvalues, eigenvectors, rotation) = if disc >= 0.0 {
        let r = disc.sqrt();
        let l1 = 0.5 * (trace - r);
        let l2 = 0.5 * (trace + r);
        let v = |l: f64| -> [f64; 2] {
            // (J - l I) v = 0 for a 2x2 matrix; pick the better-conditioned row.
            let r1 = [j[0][0] - l, j[0][1]];
            let r2 = [j[1][0], j[1][1] - l];
            let row = if r1[0].abs() + r1[1].abs() >= r2[0].abs() + r2[1].abs() {
                r1
            } else {
                r2
            };
            let (a, b) = (row[0], row[1]);
            let (vx, vy) = if a.abs() >= b.abs() && a != 0.0 {
                (-b / a, 1.0)
            } else if b != 0.0 {
                (1.0, -a / b)
            } else {
                (1.0, 0.0)
            };
            let n = vx.hypot(vy);
            [vx / n, vy / n]
        };
        (
            [Complex64::new(l1, 0.0), Complex64::new(l2, 0.0)],
            Some([v(l1), v(l2)]),
            None,
        )
    } else {
        let im = (-disc).sqrt() * 0.5;
        let rot = if j[1][0] > 0.0 {
            Rotation::Counterclockwise
        } else {
            Rotation::Clockwise
        };
        (
            [
                Complex64::new(0.5 * trace, -im),
                Complex64::new(0.5 * trace, im),
            ],
            None,
            Some(rot),
        )
    };
    EquilibriumReport {
        point,
        kind,
        trace,
        det,
        discriminant: disc,
        eigenvalues,
        eigenvectors,
        rotation,
    }
}

/// The four equilibria: extinction origin, the two vegetation-only saddles,
/// and the coexistence point classified by trace/determinant. Non-generic
/// orderings of xe are reported with degeneracy flags rather than errors.
pub fn equilibria(p: &SmoothParams) -> EquilibriaReport {
    let origin = State { x: 0.0, y: 0.0 };
    let lower = State { x: p.x0(), y: 0.0 };
    let upper = State { x: p.x1(), y: 0.0 };
    let coex = State {
        x: p.xe(),
        y: p.ye(),
    };
    // Trace and determinant of the coexistence point from the factored
    // closed forms, so the Hopf locus xe = (x0+x1)/2 has an exactly zero
    // trace.
    let q = p.x0() * p.x1();
    let coex_trace = p.xe() * (p.x0() + p.x1() - 2.0 * p.xe()) / q;
    let coex_det = p.f() * p.xe() * (p.x1() - p.xe()) * (p.xe() - p.x0()) / q;
    let reports = vec![
        report_at(p, origin, None),
        report_at(p, lower, None),
        report_at(p, upper, None),
        report_at(p, coex, Some((coex_trace, coex_det))),
    ];
    let mut degeneracies = Vec::new();
    if p.xe() < p.x0() {
        degeneracies.push(Degeneracy::CoexistenceBelowInterval);
    }
    if p.xe() > p.x1() {
        degeneracies.push(Degeneracy::CoexistenceAboveInterval);
    }
    if reports[3].trace == 0.0 {
        degeneracies.push(Degeneracy::HopfTrace);
    }
    EquilibriaReport {
        reports,
        degeneracies,
    }
}

/// Saddle eigenpairs used by the separatrix tracer. For the lower saddle the
/// unstable direction is the axis and the stable one points into the first
/// quadrant; the upper saddle is the mirror case.
pub struct SaddleData {
    pub unstable_value: f64,
    pub unstable_dir: [f64; 2],
    pub stable_value: f64,
    pub stable_dir: [f64; 2],
}

pub fn lower_saddle(p: &SmoothParams) -> SaddleData {
    let (x0, x1, xe, f) = (p.x0(), p.x1(), p.xe(), p.f());
    let vx = x0 * x1 / (f * x1 * (xe - x0) + x1 - x0);
    let n = vx.hypot(1.0);
    SaddleData {
        unstable_value: (x1 - x0) / x1,
        unstable_dir: [1.0, 0.0],
        stable_value: f * (x0 - xe),
        stable_dir: [vx / n, 1.0 / n],
    }
}

pub fn upper_saddle(p: &SmoothParams) -> SaddleData {
    let (x0, x1, xe, f) = (p.x0(), p.x1(), p.xe(), p.f());
    let vx = -x0 * x1 / (f * x0 * (x1 - xe) + x1 - x0);
    let n = vx.hypot(1.0);
    SaddleData {
        unstable_value: f * (x1 - xe),
        unstable_dir: [vx / n, 1.0 / n],
        stable_value: (x0 - x1) / x0,
        stable_dir: [1.0, 0.0],
    }
}

/// Local charts of the Poincaré compactification. `U1` blows up the
/// horizontal direction at infinity, `U2` the vertical one, `U3` is the
/// original plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Chart {
    U1,
    U2,
    U3,
}

impl std::str::FromStr for Chart {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "U1" | "u1" => Ok(Chart::U1),
            "U2" | "u2" => Ok(Chart::U2),
            "U3" | "u3" => Ok(Chart::U3),
            other => Err(format!("unknown chart `{other}` (expected U1, U2 or U3)")),
        }
    }
}

/// Compactified vector field in one local chart.
#[derive(Debug, Clone, Copy)]
pub struct ChartField {
    pub chart: Chart,
    params: SmoothParams,
}

pub fn chart_field(p: &SmoothParams, chart: Chart) -> ChartField {
    ChartField { chart, params: *p }
}

impl ChartField {
    pub fn eval(&self, u: f64, v: f64) -> (f64, f64) {
        let p = &self.params;
        let (x0, x1, xe, f) = (p.x0(), p.x1(), p.xe(), p.f());
        let q = x0 * x1;
        match self.chart {
            Chart::U1 => {
                let du = -u * (v * (1.0 + (f * v * xe - f - u - v) * x1) * x0 + x1 * v - 1.0) / q;
                let dv = (1.0 + v * v * q + (u * q - x0 - x1) * v) * v / q;
                (du, dv)
            }
            Chart::U2 => {
                let du = -u
                    * (v * ((1.0 + v + f * u - f * v * xe) * x1 - u) * x0 + u * (u - x1 * v))
                    / q;
                let dv = -v * v * f * (-xe * v + u);
                (du, dv)
            }
            Chart::U3 => field(p, &State { x: u, y: v }),
        }
    }

    /// Central-difference Jacobian, used by the tests on the chart origins.
    pub fn jacobian_fd(&self, u: f64, v: f64, h: f64) -> [[f64; 2]; 2] {
        let (fup, _) = self.eval(u + h, v);
        let (fum, _) = self.eval(u - h, v);
        let (fvp, _) = self.eval(u, v + h);
        let (fvm, _) = self.eval(u, v - h);
        let (_, gup) = self.eval(u + h, v);
        let (_, gum) = self.eval(u - h, v);
        let (_, gvp) = self.eval(u, v + h);
        let (_, gvm) = self.eval(u, v - h);
        [
            [(fup - fum) / (2.0 * h), (fvp - fvm) / (2.0 * h)],
            [(gup - gum) / (2.0 * h), (gvp - gvm) / (2.0 * h)],
        ]
    }
}

/// Directional blow-up u = v w of the degenerate origin of chart U2. Exposed
/// for the sector-sampling test of the saddle-node there.
pub fn u2_blowup(p: &SmoothParams, w: f64, v: f64) -> (f64, f64) {
    let (x0, x1, xe, f) = (p.x0(), p.x1(), p.xe(), p.f());
    let dw = -(((v + 1.0) * x1 - v * w) * x0 + v * w * (w - x1)) * w / (x0 * x1);
    let dv = -v * v * f * (w - xe);
    (dw, dv)
}
