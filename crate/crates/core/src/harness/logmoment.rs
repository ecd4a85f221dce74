use rayon::prelude::*;

use super::{describe_run, Check, Report};
use crate::control::FeedbackControl;
use crate::cost::{CostSpec, Estimate};
use crate::error::{Error, Result};
use crate::integrator::{simulate_path, SimConfig};
use crate::noise::NoiseModel;
use crate::table::{Cell, Table};

const REL_TOL: f64 = 0.05;

/// Integer ratio `coarse / fine`, or an error when it is not one.
fn refinement(coarse: f64, fine: f64) -> Result<u32> {
    let r = (coarse / fine).round();
    if r < 1.0 || ((coarse / fine) - r).abs() > 1e-9 * r {
        return Err(Error::InvalidParameter(format!(
            "dt {coarse} is not an integer multiple of the finest dt {fine}"
        )));
    }
    Ok(r as u32)
}

/// `E[sup_{[0,T]} log(1 + ‖u‖_V²)]` for every `(dt, T)` pair.
///
/// All step sizes are driven by one fine Brownian path (step `min dt_list`),
/// and every horizon reuses the same increments, so rows differ only by
/// discretization and window length.
///
/// Columns: `dt, t_final, value, ci_half, rel_change, blowups`, where
/// `rel_change` compares with the row at `2 dt` and the same `T`.
pub fn log_moment_experiment(
    cfg: &SimConfig,
    phi: &FeedbackControl,
    g: &NoiseModel,
    dt_list: &[f64],
    t_list: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Report> {
    if dt_list.is_empty() || t_list.is_empty() {
        return Err(Error::InvalidParameter("dt_list and t_list must be nonempty".into()));
    }
    if n_paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    if let Some(&t) = t_list.iter().find(|&&t| t > phi.horizon() + 1e-12) {
        return Err(Error::OutsideHorizon {
            t,
            horizon: phi.horizon(),
        });
    }
    let fine = dt_list.iter().copied().fold(f64::INFINITY, f64::min);
    let spec = CostSpec::vorticity(0.5)?;
    let mut table = Table::new(["dt", "t_final", "value", "ci_half", "rel_change", "blowups"]);
    table.meta("experiment", "logmoment").meta("fine_dt", fine);
    describe_run(&mut table, cfg, phi, g, n_paths, seed);

    let mut rows: Vec<(f64, f64, Estimate)> = Vec::new();
    for &dt in dt_list {
        let refine = refinement(dt, fine)?;
        for &t in t_list {
            let mut c = cfg.clone();
            c.dt = dt;
            c.t_final = t;
            c.refine = refine;
            c.validate()?;
            let samples: Vec<Option<f64>> = (0..n_paths as u64)
                .into_par_iter()
                .map(|p| {
                    let tr = simulate_path(&c, phi, g, &spec, seed, p)?;
                    Ok((!tr.blowup).then(|| tr.vnorm2.iter().map(|v| v.ln_1p()).fold(0.0, f64::max)))
                })
                .collect::<Result<_>>()?;
            let kept: Vec<f64> = samples.iter().flatten().copied().collect();
            rows.push((dt, t, Estimate::from_samples(&kept, n_paths - kept.len())));
        }
    }

    let mut checks = Vec::new();
    let mut worst_rel = 0.0f64;
    let mut all_finite = true;
    for &(dt, t, est) in &rows {
        let coarse = rows
            .iter()
            .find(|(d, tt, _)| (d / dt - 2.0).abs() < 1e-9 && (tt - t).abs() < 1e-12);
        let rel = coarse.map_or(f64::NAN, |(_, _, e)| (est.mean - e.mean).abs() / e.mean.abs());
        if rel.is_finite() {
            worst_rel = worst_rel.max(rel);
        }
        all_finite &= est.mean.is_finite() && est.blowups == 0;
        table.push(vec![
            dt.into(),
            t.into(),
            est.mean.into(),
            est.ci_half.into(),
            rel.into(),
            Cell::from(est.blowups),
        ]);
    }
    checks.push(Check::new("finite", all_finite, "every estimate finite, no blow-ups"));
    checks.push(Check::new(
        "dt_halving_stable",
        worst_rel <= REL_TOL,
        format!("largest relative change {worst_rel:.3e} (tolerance {REL_TOL})"),
    ));
    let mut monotone = true;
    for &dt in dt_list {
        let mut by_t: Vec<(f64, f64)> = rows
            .iter()
            .filter(|(d, _, _)| *d == dt)
            .map(|(_, t, e)| (*t, e.mean))
            .collect();
        by_t.sort_by(|a, b| a.0.total_cmp(&b.0));
        monotone &= by_t.windows(2).all(|w| w[1].1 >= w[0].1);
    }
    checks.push(Check::new(
        "nondecreasing_in_t",
        monotone,
        "value nondecreasing in T at every dt",
    ));
    Ok(Report { table, checks })
}
