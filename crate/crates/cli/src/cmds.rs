//! The five subcommands: equilibria report, phase-portrait bundle,
//! heteroclinic curves, region grids and stochastic ensembles.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use serde_json::{json, Value};

use facdyn::bifurcation::{classify_region_with, heteroclinic_curve, heteroclinic_xe, SaddlePair};
use facdyn::dynamics::{find_limit_cycle, trace_separatrix, IntegratorConfig, SeparatrixBranch};
use facdyn::export;
use facdyn::pwl::{
    pwl_classify_region, pwl_field, pwl_find_limit_cycle, sliding_data, PwlLoci, PwlParams,
    PwlState,
};
use facdyn::smooth::{chart_field, equilibria, field, prey_nullcline, Chart};
use facdyn::stochastic::{survival_grid, NoiseConfig};
use facdyn::{ParamSpec, SmoothParams, State};

use crate::config::{config_f64, config_hash, resolve_axis, write_atomic, PairFlags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Smooth,
    Pwl,
}

impl std::str::FromStr for Model {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "smooth" => Ok(Model::Smooth),
            "pwl" => Ok(Model::Pwl),
            other => Err(format!("unknown model `{other}` (smooth or pwl)")),
        }
    }
}

pub fn resolve_model(flag: Option<Model>, config: &Value) -> Result<Model> {
    if let Some(m) = flag {
        return Ok(m);
    }
    match config.get("model").and_then(Value::as_str) {
        None => Ok(Model::Smooth),
        Some("smooth") => Ok(Model::Smooth),
        Some("pwl") => Ok(Model::Pwl),
        Some(other) => bail!("config model `{other}` is not smooth|pwl"),
    }
}

fn integrator_from(config: &Value) -> IntegratorConfig {
    let mut cfg = IntegratorConfig::default();
    if let Some(v) = config_f64(config, "rel_tol") {
        cfg.rel_tol = v;
    }
    if let Some(v) = config_f64(config, "abs_tol") {
        cfg.abs_tol = v;
    }
    if let Some(v) = config_f64(config, "max_step") {
        cfg.max_step = v;
    }
    if let Some(v) = config_f64(config, "t_max") {
        cfg.t_max = v;
    }
    cfg
}

pub fn cmd_equilibria(params: ParamSpec) -> Result<()> {
    let smooth = params.to_smooth()?;
    let report = equilibria(&smooth);
    let out = json!({
        "params": { "x0": smooth.x0(), "x1": smooth.x1(), "xe": smooth.xe(), "F": smooth.f() },
        "input": params,
        "equilibria": report.reports,
        "degeneracies": report.degeneracies,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

pub struct PortraitOpts {
    pub model: Model,
    pub chart: Option<Chart>,
    pub grid_n: usize,
    pub out: PathBuf,
}

pub fn cmd_portrait(params: ParamSpec, opts: &PortraitOpts, config: &Value) -> Result<()> {
    let p = params.to_smooth()?;
    let icfg = integrator_from(config);
    let resolved = json!({
        "command": "portrait",
        "model": opts.model,
        "params": { "x0": p.x0(), "x1": p.x1(), "xe": p.xe(), "F": p.f() },
        "chart": opts.chart.map(|c| format!("{c:?}")),
        "grid_n": opts.grid_n,
    });
    let hash = config_hash(&resolved);
    let dir = &opts.out;

    if let Some(chart) = opts.chart {
        let cf = chart_field(&p, chart);
        write_atomic(dir, "chart_field.csv", &hash, |w| {
            use std::io::Write;
            writeln!(w, "u,v,du,dv")?;
            let n = opts.grid_n;
            for i in 0..n {
                for j in 0..n {
                    let u = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                    let v = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
                    let (du, dv) = cf.eval(u, v);
                    writeln!(w, "{u},{v},{du},{dv}")?;
                }
            }
            Ok(())
        })?;
        return Ok(());
    }

    let x_max = 1.2 * p.x1();
    let y_max = (3.0 * p.ye().abs()).max(2.0);

    // Sampled direction field.
    write_atomic(dir, "field_grid.csv", &hash, |w| {
        use std::io::Write;
        writeln!(w, "x,y,dx,dy")?;
        let n = opts.grid_n;
        for i in 0..n {
            for j in 0..n {
                let x = x_max * i as f64 / (n - 1) as f64;
                let y = y_max * j as f64 / (n - 1) as f64;
                let (dx, dy) = match opts.model {
                    Model::Smooth => field(&p, &State { x, y }),
                    Model::Pwl => {
                        let q = PwlParams::from_smooth(&p)?;
                        match PwlState::auto(x, y, &q) {
                            Ok(s) if s.mode != facdyn::pwl::PwlMode::Sliding => pwl_field(&q, &s)?,
                            _ => continue,
                        }
                    }
                };
                writeln!(w, "{x},{y},{dx},{dy}")?;
            }
        }
        Ok(())
    })?;

    // Nullcline polylines: the prey parabola (smooth) or the two region
    // nullclines (PWL), plus the consumer nullcline x = xe.
    write_atomic(dir, "nullclines.csv", &hash, |w| {
        use std::io::Write;
        writeln!(w, "curve,x,y")?;
        let n = 200;
        match opts.model {
            Model::Smooth => {
                for i in 0..=n {
                    let x = x_max * i as f64 / n as f64;
                    let y = prey_nullcline(&p, x);
                    if y >= 0.0 {
                        writeln!(w, "x_nullcline,{x},{y}")?;
                    }
                }
            }
            Model::Pwl => {
                let q = PwlParams::from_smooth(&p)?;
                for i in 0..=n {
                    let x = p.x0() + (p.xe() - p.x0()) * i as f64 / n as f64;
                    let y = (p.x1() - p.x0()) * (x - p.x0()) / (p.x0() * p.x1());
                    writeln!(w, "x_nullcline_region1,{x},{y}")?;
                }
                for i in 0..=n {
                    let x = p.xe() + (p.x1() - p.xe()) * i as f64 / n as f64;
                    let y = (p.x1() - p.x0()) * (p.x1() - x) / (p.x0() * p.x1());
                    writeln!(w, "x_nullcline_region2,{x},{y}")?;
                }
                let _ = q;
            }
        }
        for i in 0..=n {
            let y = y_max * i as f64 / n as f64;
            writeln!(w, "y_nullcline,{},{y}", p.xe())?;
        }
        Ok(())
    })?;

    match opts.model {
        Model::Smooth => {
            let offset = 1e-6 * (p.x1() - p.x0());
            let branches = [
                (SeparatrixBranch::UnstableOfX0, "separatrix_unstable_x0.csv"),
                (SeparatrixBranch::StableOfX0, "separatrix_stable_x0.csv"),
                (SeparatrixBranch::UnstableOfX1, "separatrix_unstable_x1.csv"),
                (SeparatrixBranch::StableOfX1, "separatrix_stable_x1.csv"),
            ];
            for (branch, name) in branches {
                let mut cfg = icfg.clone();
                cfg.t_max = cfg.t_max.min(400.0);
                let traj = trace_separatrix(&p, branch, offset, &cfg)?;
                write_atomic(dir, name, &hash, |w| {
                    export::write_trajectory_csv(w, &traj).map_err(Into::into)
                })?;
            }
            if p.is_generic() {
                if let Some(cycle) = find_limit_cycle(&p, &icfg)? {
                    write_atomic(dir, "limit_cycle.csv", &hash, |w| {
                        export::write_trajectory_csv(w, &cycle.samples).map_err(Into::into)
                    })?;
                }
            }
        }
        Model::Pwl => {
            let q = PwlParams::from_smooth(&p)?;
            // Straight eigenline separatrices from each saddle to the
            // switching line.
            write_atomic(dir, "eigenlines.csv", &hash, |w| {
                use std::io::Write;
                writeln!(w, "curve,x,y")?;
                let hs = q.stable_eigenline_height();
                let hu = q.unstable_eigenline_height();
                for i in 0..=100 {
                    let t = i as f64 / 100.0;
                    let x = q.x0() + (q.xe() - q.x0()) * t;
                    writeln!(w, "stable_x0,{x},{}", hs * t)?;
                }
                for i in 0..=100 {
                    let t = i as f64 / 100.0;
                    let x = q.x1() - (q.x1() - q.xe()) * t;
                    writeln!(w, "unstable_x1,{x},{}", hu * t)?;
                }
                Ok(())
            })?;
            if let Ok(d) = sliding_data(&q) {
                write_atomic(dir, "sliding_segment.csv", &hash, |w| {
                    use std::io::Write;
                    writeln!(w, "t1,t2,p_lambda,y_t1,y_t2,p_abs,stability")?;
                    let (y_t1, y_t2) = q.tangency_heights();
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{:?}",
                        d.t1,
                        d.t2,
                        d.p_lambda,
                        y_t1,
                        y_t2,
                        d.p_lambda + q.fold_height(),
                        d.stability
                    )?;
                    Ok(())
                })?;
            }
            if let Some(cycle) = pwl_find_limit_cycle(&q, &icfg)? {
                write_atomic(dir, "limit_cycle.csv", &hash, |w| {
                    export::write_pwl_trajectory_csv(w, &cycle.samples).map_err(Into::into)
                })?;
            }
        }
    }
    Ok(())
}

pub struct HeteroclinicOpts {
    pub model: Model,
    pub f_grid: Option<String>,
    pub compare: bool,
    pub out: PathBuf,
}

pub fn cmd_heteroclinic(flags: &PairFlags, opts: &HeteroclinicOpts, config: &Value) -> Result<()> {
    let (x0, x1) = flags.resolve(config)?;
    let pair = SaddlePair::new(x0, x1)?;
    let f_grid = resolve_axis(opts.f_grid.as_ref(), config, "f_grid")?
        .ok_or_else(|| anyhow!("missing required flag --F-grid"))?;
    if f_grid.is_empty() {
        bail!("--F-grid is empty");
    }
    let icfg = integrator_from(config);
    let resolved = json!({
        "command": "heteroclinic",
        "model": opts.model,
        "x0": x0, "x1": x1,
        "f_grid": f_grid,
        "compare": opts.compare,
    });
    let hash = config_hash(&resolved);
    let loci = PwlLoci::new(x0, x1)?;

    if opts.compare {
        let smooth = heteroclinic_curve(&pair, &f_grid, &icfg)?;
        let slope = SmoothParams::new(x0, x1, 0.5 * (x0 + x1), 1.0)?.canard_slope();
        write_atomic(&opts.out, "heteroclinic_compare.csv", &hash, |w| {
            use std::io::Write;
            writeln!(w, "F,xe_smooth,xe_pwl,xe_canard")?;
            for pt in &smooth.points {
                let pwl = loci.xe_het(pt.f)?;
                let canard = pair.x_hopf() + slope * pt.f;
                writeln!(w, "{},{},{},{}", pt.f, pt.xe, pwl, canard)?;
            }
            Ok(())
        })?;
        return Ok(());
    }

    match opts.model {
        Model::Smooth => {
            let curve = heteroclinic_curve(&pair, &f_grid, &icfg)?;
            write_atomic(&opts.out, "heteroclinic_smooth.csv", &hash, |w| {
                export::write_curve_csv(w, &curve).map_err(Into::into)
            })?;
        }
        Model::Pwl => {
            write_atomic(&opts.out, "heteroclinic_pwl.csv", &hash, |w| {
                use std::io::Write;
                writeln!(w, "F,xe_h,gap_residual,iterations")?;
                for &f in &f_grid {
                    writeln!(w, "{},{},0,0", f, loci.xe_het(f)?)?;
                }
                Ok(())
            })?;
        }
    }
    Ok(())
}

pub struct RegionsOpts {
    pub model: Model,
    pub xe_grid: Option<String>,
    pub f_grid: Option<String>,
    pub out: PathBuf,
}

pub fn cmd_regions(flags: &PairFlags, opts: &RegionsOpts, config: &Value) -> Result<()> {
    let (x0, x1) = flags.resolve(config)?;
    let pair = SaddlePair::new(x0, x1)?;
    let xe_grid = resolve_axis(opts.xe_grid.as_ref(), config, "xe_grid")?
        .ok_or_else(|| anyhow!("missing required flag --xe-grid"))?;
    let f_grid = resolve_axis(opts.f_grid.as_ref(), config, "f_grid")?
        .ok_or_else(|| anyhow!("missing required flag --F-grid"))?;
    if xe_grid.is_empty() || f_grid.is_empty() {
        bail!("region grids must be non-empty");
    }
    let icfg = integrator_from(config);
    let resolved = json!({
        "command": "regions", "model": opts.model,
        "x0": x0, "x1": x1, "xe_grid": xe_grid, "f_grid": f_grid,
    });
    let hash = config_hash(&resolved);
    let ratios = SmoothParams::new(x0, x1, 0.5 * (x0 + x1), 1.0)?.habitat_ratios();

    let mut rows: Vec<(f64, f64, String, f64)> = Vec::new();
    match opts.model {
        Model::Smooth => {
            use rayon::prelude::*;
            let solved: Vec<(f64, f64)> = f_grid
                .par_iter()
                .map(|&f| heteroclinic_xe(&pair, f, &icfg).map(|p| (f, p.xe)))
                .collect::<facdyn::Result<_>>()?;
            for &(f, xe_h) in &solved {
                for &xe in &xe_grid {
                    let p = pair.params(xe, f)?;
                    let label = classify_region_with(&p, &icfg, &pair, Some(xe_h))?;
                    rows.push((xe, f, label.region.as_str().to_string(), label.margin));
                }
            }
        }
        Model::Pwl => {
            let loci = PwlLoci::new(x0, x1)?;
            for &f in &f_grid {
                let xe_h = loci.xe_het(f)?;
                for &xe in &xe_grid {
                    let p = PwlParams::new(x0, x1, xe, f)?;
                    let region = pwl_classify_region(&p)?;
                    let margin = (xe - pair.x_hopf()).abs().min((xe - xe_h).abs());
                    rows.push((xe, f, region.as_str().to_string(), margin));
                }
            }
        }
    }
    write_atomic(&opts.out, "regions.csv", &hash, |w| {
        use std::io::Write;
        writeln!(w, "# R_c: {}", ratios.r_c)?;
        writeln!(w, "# R_o: {}", ratios.r_o)?;
        writeln!(w, "# R_s: {}", ratios.r_s)?;
        export::write_region_grid_csv(w, &rows).map_err(Into::into)
    })?;
    Ok(())
}

pub struct StochasticOpts {
    pub f_values: Option<String>,
    pub sigma: Option<String>,
    pub xe_grid: Option<String>,
    pub n: Option<u32>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub out: PathBuf,
}

pub fn cmd_stochastic(flags: &PairFlags, opts: &StochasticOpts, config: &Value) -> Result<()> {
    let (x0, x1) = flags.resolve(config)?;
    let f_values = resolve_axis(opts.f_values.as_ref(), config, "f_values")?
        .ok_or_else(|| anyhow!("missing required flag --F"))?;
    let sigma = resolve_axis(opts.sigma.as_ref(), config, "sigma")?
        .ok_or_else(|| anyhow!("missing required flag --sigma"))?;
    let xe_grid = resolve_axis(opts.xe_grid.as_ref(), config, "xe_grid")?
        .ok_or_else(|| anyhow!("missing required flag --xe-grid"))?;
    let n = opts
        .n
        .or_else(|| config.get("n").and_then(Value::as_u64).map(|v| v as u32))
        .unwrap_or(90);
    if n == 0 {
        bail!("--n must be at least 1");
    }
    if f_values.is_empty() || sigma.is_empty() || xe_grid.is_empty() {
        bail!("stochastic grids must be non-empty");
    }
    let mut ncfg = NoiseConfig::default();
    if let Some(seed) = opts
        .seed
        .or_else(|| config.get("seed").and_then(Value::as_u64))
    {
        ncfg.seed = seed;
    }
    if let Some(dt) = opts.dt.or_else(|| config_f64(config, "dt")) {
        ncfg.dt = dt;
    }
    if let Some(tm) = opts.t_max.or_else(|| config_f64(config, "t_max")) {
        ncfg.t_max = tm;
    }

    let resolved = json!({
        "command": "stochastic",
        "x0": x0, "x1": x1,
        "f_values": f_values, "sigma": sigma, "xe_grid": xe_grid,
        "n": n, "seed": ncfg.seed, "dt": ncfg.dt, "t_max": ncfg.t_max,
        "y_extinct": ncfg.y_extinct, "x_extinct": ncfg.x_extinct,
        "x_init": ncfg.x_init, "y_init": ncfg.y_init,
    });
    let hash = config_hash(&resolved);
    let mut outputs = Vec::new();
    for &f in &f_values {
        let res = survival_grid(x0, x1, f, &sigma, &xe_grid, n, &ncfg)?;
        let name = format!("survival_F{f}.csv");
        write_atomic(&opts.out, &name, &hash, |w| {
            export::write_ensemble_csv(w, &res).map_err(Into::into)
        })?;
        outputs.push(name);
    }
    let manifest = json!({
        "command": "stochastic",
        "config": resolved,
        "config_hash": hash,
        "outputs": outputs,
    });
    write_manifest(&opts.out, &manifest)?;
    Ok(())
}

fn write_manifest(dir: &Path, manifest: &Value) -> Result<()> {
    use std::fs;
    fs::create_dir_all(dir)?;
    let tmp = dir.join(".manifest.json.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(manifest)?)?;
    fs::rename(tmp, dir.join("manifest.json"))?;
    Ok(())
}
