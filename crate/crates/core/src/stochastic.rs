//! Euler-Maruyama ensembles for the noise-perturbed smooth system, survival
//! probability grids over (sigma, xe), and extinction-time statistics.
//!
//! Noise is additive on the resource equation only. Reproducibility scheme:
//! every realization draws from its own ChaCha8 stream whose 64-bit seed is
//! a SplitMix64 hash of (base_seed, cell_index, realization_index), so grid
//! results are independent of scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::SmoothParams;
use crate::smooth::{field, State};

/// Noise intensity, step, horizon, seed and extinction thresholds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Consumer collapse threshold: the realization is extinct when y drops
    /// below this.
    pub y_extinct: f64,
    /// Resource threshold recorded separately as a diagnostic.
    pub x_extinct: f64,
    /// Initial condition of every realization.
    pub x_init: f64,
    pub y_init: f64,
    /// |state| beyond this counts as a numeric blow-up.
    pub blow_up: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            dt: 0.01,
            t_max: 300.0,
            seed: 0x5eed_f00d,
            y_extinct: 1e-4,
            x_extinct: 1e-4,
            x_init: 1.5,
            y_init: 0.3,
            blow_up: 1e3,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt > 0.0 && self.t_max > 0.0 && self.sigma >= 0.0 {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "noise config",
                constraint: "dt > 0, t_max > 0, sigma >= 0",
            })
        }
    }
}

/// One Euler-Maruyama step; `noise_draw` must be sampled with variance dt.
/// Negative coordinates are clamped to zero (the noise is additive and can
/// push the resource below the invariant axis).
pub fn em_step(p: &SmoothParams, s: &State, cfg: &NoiseConfig, noise_draw: f64) -> State {
    let (fx, fy) = field(p, s);
    State {
        x: (s.x + fx * cfg.dt + cfg.sigma * noise_draw).max(0.0),
        y: (s.y + fy * cfg.dt).max(0.0),
    }
}

/// Outcome of a single stochastic realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Realization {
    pub survived: bool,
    pub extinction_time: Option<f64>,
    /// First time the resource dipped below its diagnostic threshold.
    pub x_extinction_time: Option<f64>,
    pub blew_up: bool,
    /// Whether the nonnegativity clamp ever fired.
    pub clamped: bool,
}

fn run_realization<R: Rng>(p: &SmoothParams, cfg: &NoiseConfig, rng: &mut R) -> Realization {
    let sqrt_dt = cfg.dt.sqrt();
    let mut s = State {
        x: cfg.x_init,
        y: cfg.y_init,
    };
    let steps = (cfg.t_max / cfg.dt).round() as u64;
    let mut x_ext = None;
    let mut clamped = false;
    for k in 0..steps {
        let draw: f64 = if cfg.sigma > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            z * sqrt_dt
        } else {
            0.0
        };
        let (fx, fy) = field(p, &s);
        let x_raw = s.x + fx * cfg.dt + cfg.sigma * draw;
        let y_raw = s.y + fy * cfg.dt;
        if x_raw < 0.0 || y_raw < 0.0 {
            clamped = true;
        }
        s = State {
            x: x_raw.max(0.0),
            y: y_raw.max(0.0),
        };
        let t = (k + 1) as f64 * cfg.dt;
        if x_ext.is_none() && s.x < cfg.x_extinct {
            x_ext = Some(t);
        }
        if s.x.abs() > cfg.blow_up || s.y.abs() > cfg.blow_up || !s.x.is_finite() {
            return Realization {
                survived: false,
                extinction_time: Some(t),
                x_extinction_time: x_ext,
                blew_up: true,
                clamped,
            };
        }
        if s.y < cfg.y_extinct {
            return Realization {
                survived: false,
                extinction_time: Some(t),
                x_extinction_time: x_ext,
                blew_up: false,
                clamped,
            };
        }
    }
    Realization {
        survived: true,
        extinction_time: None,
        x_extinction_time: x_ext,
        blew_up: false,
        clamped,
    }
}

/// Runs one realization from the configured initial condition with the
/// configured seed.
pub fn simulate_realization(p: &SmoothParams, cfg: &NoiseConfig) -> Result<Realization> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(run_realization(p, cfg, &mut rng))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Substream seed for (cell, realization) under a base seed.
pub fn derive_seed(base: u64, cell: u64, realization: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(cell)).wrapping_add(realization))
}

/// Statistics of one (sigma, xe) grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellStats {
    pub sigma: f64,
    pub xe: f64,
    pub survival: f64,
    pub n: u32,
    pub mean_ext_time: Option<f64>,
    pub std_ext_time: Option<f64>,
    pub n_extinct: u32,
    pub n_blowup: u32,
    pub n_clamped: u32,
}

/// Ensemble results over a (sigma, xe) grid at fixed F.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub f: f64,
    pub sigma_values: Vec<f64>,
    pub xe_values: Vec<f64>,
    pub n: u32,
    pub base_seed: u64,
    /// Row-major over (sigma, xe): cell index = si * xe_values.len() + xi.
    pub cells: Vec<CellStats>,
}

impl EnsembleResult {
    pub fn cell(&self, si: usize, xi: usize) -> &CellStats {
        &self.cells[si * self.xe_values.len() + xi]
    }
}

#[allow(clippy::too_many_arguments)]
fn cell_stats(
    x0: f64,
    x1: f64,
    f: f64,
    sigma: f64,
    xe: f64,
    n: u32,
    cell_idx: u64,
    cfg: &NoiseConfig,
) -> Result<CellStats> {
    let p = SmoothParams::new(x0, x1, xe, f)?;
    let mut survivors = 0u32;
    let mut blowups = 0u32;
    let mut clamps = 0u32;
    let mut ext_times = Vec::new();
    for r in 0..n {
        let seed = derive_seed(cfg.seed, cell_idx, r as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = *cfg;
        c.sigma = sigma;
        let out = run_realization(&p, &c, &mut rng);
        if out.survived {
            survivors += 1;
        } else {
            ext_times.push(
                out.extinction_time
                    .expect("extinct realizations carry a time"),
            );
        }
        if out.blew_up {
            blowups += 1;
        }
        if out.clamped {
            clamps += 1;
        }
    }
    let n_extinct = ext_times.len() as u32;
    let (mean, std) = if n_extinct > 0 {
        let m = ext_times.iter().sum::<f64>() / n_extinct as f64;
        let std = if n_extinct > 1 {
            let v =
                ext_times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n_extinct as f64 - 1.0);
            Some(v.sqrt())
        } else {
            Some(0.0)
        };
        (Some(m), std)
    } else {
        (None, None)
    };
    Ok(CellStats {
        sigma,
        xe,
        survival: survivors as f64 / n as f64,
        n,
        mean_ext_time: mean,
        std_ext_time: std,
        n_extinct,
        n_blowup: blowups,
        n_clamped: clamps,
    })
}

/// Survival-probability grid over (sigma, xe) at fixed F for the saddle pair
/// (x0, x1). Cells are processed as a parallel map with per-cell derived
/// seeds, so identical inputs give bit-identical results.
pub fn survival_grid(
    x0: f64,
    x1: f64,
    f: f64,
    sigma_grid: &[f64],
    xe_grid: &[f64],
    n: u32,
    cfg: &NoiseConfig,
) -> Result<EnsembleResult> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Domain {
            what: "ensemble",
            constraint: "n >= 1",
        });
    }
    let n_xe = xe_grid.len();
    let indices: Vec<(usize, usize)> = (0..sigma_grid.len())
        .flat_map(|si| (0..n_xe).map(move |xi| (si, xi)))
        .collect();
    let cells: Vec<Result<CellStats>> = indices
        .par_iter()
        .map(|&(si, xi)| {
            let cell_idx = (si * n_xe + xi) as u64;
            cell_stats(x0, x1, f, sigma_grid[si], xe_grid[xi], n, cell_idx, cfg)
        })
        .collect();
    let mut out = Vec::with_capacity(cells.len());
    for c in cells {
        out.push(c?);
    }
    Ok(EnsembleResult {
        f,
        sigma_values: sigma_grid.to_vec(),
        xe_values: xe_grid.to_vec(),
        n,
        base_seed: cfg.seed,
        cells: out,
    })
}

/// Extinction-time table over (xe, sigma): same ensemble machinery with the
/// statistics read per cell; survivors are excluded from the mean/std and
/// counted via `n - n_extinct`.
pub fn extinction_times(
    x0: f64,
    x1: f64,
    f: f64,
    xe_grid: &[f64],
    sigma_list: &[f64],
    n: u32,
    cfg: &NoiseConfig,
) -> Result<EnsembleResult> {
    survival_grid(x0, x1, f, sigma_list, xe_grid, n, cfg)
}
