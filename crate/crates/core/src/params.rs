//! Model parameterizations and every closed-form locus of the smooth system.
//!
//! Two equivalent parameter sets are supported: the original ecological rates
//! `(alpha, D, eps, epsS, mu, delta)` and the equilibrium-based form
//! `(x0, x1, xe, F)` in which the three vegetation equilibria appear as
//! explicit coordinates. All conversions and loci are closed forms evaluated
//! in double precision; validation happens at construction so downstream code
//! can assume the invariants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn require(name: &'static str, value: f64, constraint: &'static str, ok: bool) -> Result<()> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            constraint,
            value,
        })
    }
}

/// Rates of the unscaled model: growth `alpha`, habitat-loss fraction `D`,
/// resource mortality `eps`, consumption `epsS`, efficiency `mu`, consumer
/// mortality `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOriginal", into = "RawOriginal")]
pub struct OriginalParams {
    alpha: f64,
    d: f64,
    eps: f64,
    eps_s: f64,
    mu: f64,
    delta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOriginal {
    alpha: f64,
    #[serde(rename = "D")]
    d: f64,
    eps: f64,
    #[serde(rename = "epsS")]
    eps_s: f64,
    mu: f64,
    delta: f64,
}

impl TryFrom<RawOriginal> for OriginalParams {
    type Error = Error;
    fn try_from(r: RawOriginal) -> Result<Self> {
        OriginalParams::new(r.alpha, r.d, r.eps, r.eps_s, r.mu, r.delta)
    }
}

impl From<OriginalParams> for RawOriginal {
    fn from(p: OriginalParams) -> Self {
        RawOriginal {
            alpha: p.alpha,
            d: p.d,
            eps: p.eps,
            eps_s: p.eps_s,
            mu: p.mu,
            delta: p.delta,
        }
    }
}

impl OriginalParams {
    pub fn new(alpha: f64, d: f64, eps: f64, eps_s: f64, mu: f64, delta: f64) -> Result<Self> {
        require("alpha", alpha, ">= 0", alpha >= 0.0)?;
        require("D", d, "in [0, 1)", (0.0..1.0).contains(&d))?;
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidParameter {
                name: "eps",
                constraint: "> 0",
                value: eps,
            });
        }
        if eps == 0.0 {
            return Err(Error::ZeroMortality);
        }
        require("epsS", eps_s, ">= 0", eps_s >= 0.0)?;
        require("mu", mu, "in [0, 1]", (0.0..=1.0).contains(&mu))?;
        require("delta", delta, ">= 0", delta >= 0.0)?;
        Ok(Self {
            alpha,
            d,
            eps,
            eps_s,
            mu,
            delta,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn habitat_loss(&self) -> f64 {
        self.d
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn eps_s(&self) -> f64 {
        self.eps_s
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Dimensionless rescaling: A = alpha/eps, B = alpha(1-D)/eps,
    /// F = epsS*mu/eps, G = delta/eps.
    pub fn rescale(&self) -> RescaledParams {
        RescaledParams {
            a: self.alpha / self.eps,
            b: self.alpha * (1.0 - self.d) / self.eps,
            f: self.eps_s * self.mu / self.eps,
            g: self.delta / self.eps,
        }
    }

    /// Discriminant (1-D)^2 - 4 eps/alpha of the vegetation-only quadratic.
    pub fn discriminant(&self) -> f64 {
        (1.0 - self.d).powi(2) - 4.0 * self.eps / self.alpha
    }

    /// Habitat-loss threshold D_SN = 1 - 2 sqrt(eps/alpha) at which the two
    /// vegetation equilibria collide.
    pub fn d_saddle_node(&self) -> f64 {
        1.0 - 2.0 * (self.eps / self.alpha).sqrt()
    }

    /// Converts to the equilibrium parameterization. Requires the generic
    /// regime (positive discriminant) and a coupled consumer (epsS*mu > 0);
    /// the transcritical boundaries xe = x0 and xe = x1 are rejected with a
    /// distinct error so callers can branch on degeneracy.
    pub fn to_smooth(&self) -> Result<SmoothParams> {
        let disc = self.discriminant();
        if !(disc > 0.0) {
            return Err(Error::NonGenericRegime { discriminant: disc });
        }
        if self.eps_s * self.mu == 0.0 {
            return Err(Error::ConsumerDecoupled);
        }
        let root = disc.sqrt();
        let x0 = (1.0 - self.d - root) / 2.0;
        let x1 = (1.0 - self.d + root) / 2.0;
        let xe = self.delta / (self.eps_s * self.mu);
        let f = self.eps_s * self.mu / self.eps;
        SmoothParams::new(x0, x1, xe, f)
    }

    /// Loci of the smooth model, with the saddle-node habitat threshold
    /// filled in from the original rates.
    pub fn loci(&self) -> Result<LocusSet> {
        let mut set = self.to_smooth()?.loci();
        set.d_sn = Some(self.d_saddle_node());
        Ok(set)
    }

    pub fn habitat_ratios(&self) -> Result<HabitatRatios> {
        Ok(self.to_smooth()?.habitat_ratios())
    }
}

/// Dimensionless rates of the rescaled cubic system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescaledParams {
    pub a: f64,
    pub b: f64,
    pub f: f64,
    pub g: f64,
}

impl RescaledParams {
    /// Generic regime: B^2 - 4A > 0 (two distinct vegetation equilibria).
    pub fn is_generic(&self) -> bool {
        self.b * self.b - 4.0 * self.a > 0.0
    }
}

/// Equilibrium parameterization: vegetation equilibria `x0 < x1`, coexistence
/// abscissa `xe`, consumption/mortality ratio `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSmooth", into = "RawSmooth")]
pub struct SmoothParams {
    x0: f64,
    x1: f64,
    xe: f64,
    f: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSmooth {
    x0: f64,
    x1: f64,
    xe: f64,
    #[serde(rename = "F")]
    f: f64,
}

impl TryFrom<RawSmooth> for SmoothParams {
    type Error = Error;
    fn try_from(r: RawSmooth) -> Result<Self> {
        SmoothParams::new(r.x0, r.x1, r.xe, r.f)
    }
}

impl From<SmoothParams> for RawSmooth {
    fn from(p: SmoothParams) -> Self {
        RawSmooth {
            x0: p.x0,
            x1: p.x1,
            xe: p.xe,
            f: p.f,
        }
    }
}

impl SmoothParams {
    /// Validates 0 < x0 < x1, xe > 0, F > 0. `xe` may lie outside (x0, x1)
    /// (the non-generic orderings are handled downstream with flags), but the
    /// exact transcritical collisions xe = x0 and xe = x1 are rejected.
    pub fn new(x0: f64, x1: f64, xe: f64, f: f64) -> Result<Self> {
        require("x0", x0, "> 0", x0 > 0.0)?;
        require("x1", x1, "> x0", x1 > x0)?;
        require("xe", xe, "> 0", xe > 0.0)?;
        require("F", f, "> 0", f > 0.0)?;
        if xe == x0 {
            return Err(Error::TranscriticalBoundary { which: "x0" });
        }
        if xe == x1 {
            return Err(Error::TranscriticalBoundary { which: "x1" });
        }
        Ok(Self { x0, x1, xe, f })
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

    /// Same saddle interval, different section abscissa.
    pub fn with_xe(&self, xe: f64) -> Result<Self> {
        Self::new(self.x0, self.x1, xe, self.f)
    }

    /// Same saddle interval and section, different F.
    pub fn with_f(&self, f: f64) -> Result<Self> {
        Self::new(self.x0, self.x1, self.xe, f)
    }

    /// Generic coexistence configuration x0 < xe < x1.
    pub fn is_generic(&self) -> bool {
        self.x0 < self.xe && self.xe < self.x1
    }

    /// Consumer ordinate of the coexistence equilibrium.
    pub fn ye(&self) -> f64 {
        (self.x1 - self.xe) * (self.xe - self.x0) / (self.x0 * self.x1)
    }

    /// Round-trip to the rescaled rates: A = 1/(x0 x1), B = (x0+x1)/(x0 x1),
    /// G = xe * F.
    pub fn rescaled(&self) -> RescaledParams {
        RescaledParams {
            a: 1.0 / (self.x0 * self.x1),
            b: (self.x0 + self.x1) / (self.x0 * self.x1),
            f: self.f,
            g: self.xe * self.f,
        }
    }

    /// Hopf abscissa (arithmetic mean of the saddles).
    pub fn x_hopf(&self) -> f64 {
        0.5 * (self.x0 + self.x1)
    }

    /// Harmonic-mean abscissa where the hyperbolicity ratio equals one.
    pub fn x_collapse(&self) -> f64 {
        2.0 * self.x0 * self.x1 / (self.x0 + self.x1)
    }

    /// Closed-form loci of the smooth model (no original rates available, so
    /// the saddle-node habitat threshold is absent).
    pub fn loci(&self) -> LocusSet {
        LocusSet {
            x_c: self.x_collapse(),
            x_h: self.x_hopf(),
            x_geo: (self.x0 * self.x1).sqrt(),
            d_sn: None,
            x0: self.x0,
            x1: self.x1,
        }
    }

    /// Hyperbolicity ratio f_lambda = (xe-x0) x1 / ((x1-xe) x0) of the
    /// saddle loop; equals 1 exactly at xe = x_c and is strictly increasing
    /// in xe. Only defined for x0 < xe < x1.
    pub fn hyperbolicity_ratio(&self) -> Result<f64> {
        if !self.is_generic() {
            return Err(Error::Domain {
                what: "hyperbolicity ratio",
                constraint: "x0 < xe < x1",
            });
        }
        Ok((self.xe - self.x0) * self.x1 / ((self.x1 - self.xe) * self.x0))
    }

    /// Relative sizes of the collapse / oscillatory / static windows of the
    /// coexistence interval. The three ratios sum to one.
    pub fn habitat_ratios(&self) -> HabitatRatios {
        HabitatRatios {
            r_c: self.x0 / (self.x0 + self.x1),
            r_o: (self.x1 - self.x0) / (2.0 * (self.x0 + self.x1)),
            r_s: 0.5,
        }
    }

    /// First Lyapunov constant, leading period and linear period coefficient
    /// of the Hopf bifurcation at xe = (x0+x1)/2.
    pub fn hopf_constants(&self) -> HopfConstants {
        let (x0, x1, f) = (self.x0, self.x1, self.f);
        let l1 = -f * (x1 - x0).powi(2) / (6.0 * x0 * x0 * x1 * x1);
        let t0 =
            4.0 * std::f64::consts::PI * (2.0 * (x0 + x1) * x0 * x1 * f * (x0 - x1).powi(2)).sqrt()
                / (f * (x0 + x1) * (x0 - x1).powi(2));
        HopfConstants {
            l1,
            t0,
            dt: -t0 / (x0 + x1),
        }
    }

    /// First-order coefficient of the canard curve lambda_c(sqrt(F)):
    /// -1/((x1-x0)^2 x0 x1).
    pub fn canard_slope(&self) -> f64 {
        -1.0 / ((self.x1 - self.x0).powi(2) * self.x0 * self.x1)
    }
}

/// Closed-form bifurcation abscissas of the smooth model for a fixed saddle
/// pair. `d_sn` is present only when original rates were supplied.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocusSet {
    pub x_c: f64,
    pub x_h: f64,
    pub x_geo: f64,
    pub d_sn: Option<f64>,
    x0: f64,
    x1: f64,
}

impl LocusSet {
    /// Focus-node boundary F_FN(xe) = xe (x0+x1-2xe)^2 / (4 x0 x1 (x1-xe)(xe-x0)).
    /// Diverges at both ends of (x0, x1) and vanishes at the Hopf abscissa.
    pub fn f_fn(&self, xe: f64) -> f64 {
        let (x0, x1) = (self.x0, self.x1);
        xe * (x0 + x1 - 2.0 * xe).powi(2) / (4.0 * x0 * x1 * (x1 - xe) * (xe - x0))
    }
}

/// Relative widths R_c, R_o, R_s of the three dynamical windows in (x0, x1).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HabitatRatios {
    pub r_c: f64,
    pub r_o: f64,
    pub r_s: f64,
}

/// Hopf data: first Lyapunov constant `l1` (< 0, supercritical), leading
/// cycle period `t0`, and the linear coefficient `dt` of the period in
/// lambda = xe - (x0+x1)/2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HopfConstants {
    pub l1: f64,
    pub t0: f64,
    pub dt: f64,
}

/// A parameter set read from JSON; the form is autodetected from the key set
/// (`x0/x1/xe/F` versus `alpha/D/eps/epsS/mu/delta`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Smooth(SmoothParams),
    Original(OriginalParams),
}

impl ParamSpec {
    /// Resolves either form to the equilibrium parameterization.
    pub fn to_smooth(&self) -> Result<SmoothParams> {
        match self {
            ParamSpec::Smooth(p) => Ok(*p),
            ParamSpec::Original(p) => p.to_smooth(),
        }
    }
}
