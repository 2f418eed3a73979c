//! CSV serialization of trajectories, curves, region grids and ensembles.
//! Time values are printed with 17 significant digits so runs can be
//! reproduced bit-exactly from the files.

use std::io::{self, Write};

use crate::bifurcation::{BifurcationCurve, SweepOutcome, SweepRow};
use crate::dynamics::Trajectory;
use crate::pwl::{PwlMode, PwlTrajectory};
use crate::stochastic::EnsembleResult;

fn fmt_t(t: f64) -> String {
    format!("{t:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `t,x,y,event`, samples merged with event rows in time order.
pub fn write_trajectory_csv<W: Write>(w: &mut W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "t,x,y,event")?;
    let mut ev = traj.events.iter().peekable();
    for (t, s) in traj.times.iter().zip(traj.states.iter()) {
        while let Some(e) = ev.peek() {
            if e.t < *t {
                writeln!(w, "{},{},{},{}", fmt_t(e.t), e.state.x, e.state.y, e.label)?;
                ev.next();
            } else {
                break;
            }
        }
        writeln!(w, "{},{},{},", fmt_t(*t), s.x, s.y)?;
    }
    for e in ev {
        writeln!(w, "{},{},{},{}", fmt_t(e.t), e.state.x, e.state.y, e.label)?;
    }
    Ok(())
}

fn mode_str(m: PwlMode) -> &'static str {
    match m {
        PwlMode::Region1 => "region1",
        PwlMode::Region2 => "region2",
        PwlMode::Sliding => "sliding",
    }
}

/// `t,x,y,mode,event` for Filippov trajectories.
pub fn write_pwl_trajectory_csv<W: Write>(w: &mut W, traj: &PwlTrajectory) -> io::Result<()> {
    writeln!(w, "t,x,y,mode,event")?;
    let mut ev = traj.events.iter().peekable();
    for (t, s) in traj.times.iter().zip(traj.states.iter()) {
        while let Some(e) = ev.peek() {
            if e.t < *t {
                writeln!(
                    w,
                    "{},{},{},{},{:?}",
                    fmt_t(e.t),
                    e.state.x,
                    e.state.y,
                    mode_str(e.state.mode),
                    e.kind
                )?;
                ev.next();
            } else {
                break;
            }
        }
        writeln!(w, "{},{},{},{},", fmt_t(*t), s.x, s.y, mode_str(s.mode))?;
    }
    for e in ev {
        writeln!(
            w,
            "{},{},{},{},{:?}",
            fmt_t(e.t),
            e.state.x,
            e.state.y,
            mode_str(e.state.mode),
            e.kind
        )?;
    }
    Ok(())
}

/// `F,xe_h,gap_residual,iterations`; failed points appended as comments.
pub fn write_curve_csv<W: Write>(w: &mut W, curve: &BifurcationCurve) -> io::Result<()> {
    writeln!(w, "F,xe_h,gap_residual,iterations")?;
    for p in &curve.points {
        writeln!(w, "{},{},{},{}", p.f, p.xe, p.gap_residual, p.iterations)?;
    }
    for (f, msg) in &curve.failures {
        writeln!(w, "# failed F={f}: {msg}")?;
    }
    Ok(())
}

/// `xe,F,label,margin` region grids (rows supplied by the caller).
pub fn write_region_grid_csv<W: Write>(
    w: &mut W,
    rows: &[(f64, f64, String, f64)],
) -> io::Result<()> {
    writeln!(w, "xe,F,label,margin")?;
    for (xe, f, label, margin) in rows {
        writeln!(w, "{xe},{f},{label},{margin}")?;
    }
    Ok(())
}

/// `xe,status,period,x_min,x_max,y_min,y_max` for cycle sweeps.
pub fn write_cycle_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "xe,status,period,x_min,x_max,y_min,y_max")?;
    for r in rows {
        match &r.outcome {
            SweepOutcome::Cycle { period, amplitude } => writeln!(
                w,
                "{},cycle,{},{},{},{},{}",
                r.xe, period, amplitude.0, amplitude.1, amplitude.2, amplitude.3
            )?,
            SweepOutcome::Static => writeln!(w, "{},static,,,,,", r.xe)?,
            SweepOutcome::Collapse => writeln!(w, "{},collapse,,,,,", r.xe)?,
            SweepOutcome::Inconclusive(msg) => {
                writeln!(w, "{},inconclusive({}),,,,,", r.xe, msg.replace(',', ";"))?
            }
        }
    }
    Ok(())
}

/// `sigma,xe,survival,n,mean_ext_time,std_ext_time,n_extinct,n_blowup`.
pub fn write_ensemble_csv<W: Write>(w: &mut W, res: &EnsembleResult) -> io::Result<()> {
    writeln!(
        w,
        "sigma,xe,survival,n,mean_ext_time,std_ext_time,n_extinct,n_blowup"
    )?;
    for c in &res.cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            c.sigma,
            c.xe,
            c.survival,
            c.n,
            fmt_opt(c.mean_ext_time),
            fmt_opt(c.std_ext_time),
            c.n_extinct,
            c.n_blowup
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, IntegratorConfig};
    use crate::params::SmoothParams;
    use crate::smooth::State;

    #[test]
    fn trajectory_csv_shape() {
        let p = SmoothParams::new(1.0, 3.0, 1.9, 1.0).unwrap();
        let cfg = IntegratorConfig {
            t_max: 1.0,
            ..Default::default()
        };
        let traj = integrate(&p, State { x: 1.5, y: 0.3 }, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x,y,event");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.0000000000000000e0,"));
        assert_eq!(text.lines().count(), traj.times.len() + 1);
    }
}
