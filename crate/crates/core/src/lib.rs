//! Dynamics of a resource-consumer system with facilitation under habitat
//! loss, in two parallel formulations:
//!
//! * the smooth cubic planar model, with equilibria, Poincaré
//!   compactification charts, adaptive integration, separatrix shooting, a
//!   numerically solved heteroclinic bifurcation curve and limit-cycle
//!   detection ([`smooth`], [`dynamics`], [`bifurcation`]);
//! * its piecewise-linear Filippov analogue, where trajectories, first
//!   integrals and every bifurcation curve are available in closed form
//!   ([`pwl`]);
//!
//! plus Euler-Maruyama ensembles quantifying how extrinsic noise on the
//! resource anticipates the collapse ([`stochastic`]).
//!
//! Parameters come in two equivalent forms (ecological rates and the
//! equilibrium-based form), converted and validated in [`params`].

pub mod bifurcation;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod params;
pub mod pwl;
pub mod smooth;
pub mod stochastic;

pub use error::{Error, Result};
pub use params::{
    HabitatRatios, HopfConstants, LocusSet, OriginalParams, ParamSpec, RescaledParams, SmoothParams,
};
pub use smooth::State;
