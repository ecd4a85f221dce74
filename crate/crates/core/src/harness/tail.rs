use rayon::prelude::*;

use super::{describe_run, proportion_ci, trend_check, Check, Report};
use crate::control::FeedbackControl;
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::integrator::{simulate_path, SimConfig, Trajectory};
use crate::noise::NoiseModel;
use crate::table::{Cell, Table};

/// `sup_{[0,τ∧S]} ‖u‖_V² + ∫₀^{τ∧S} ‖Au‖²`, `τ` being the last grid index
/// inside the stopping ball.
fn stopped_functional(tr: &Trajectory, s: f64) -> f64 {
    let last_inside = match tr.exit_index {
        Some(e) => e.saturating_sub(1),
        None => tr.len() - 1,
    };
    let upto_s = tr.times.iter().rposition(|&t| t <= s + 1e-12).unwrap_or(0);
    let k = last_inside.min(upto_s).min(tr.len() - 1);
    let sup = tr.vnorm2[..=k].iter().copied().fold(0.0, f64::max);
    sup + tr.anorm2_int[k]
}

fn tail_probabilities(
    cfg: &SimConfig,
    phi: &FeedbackControl,
    g: &NoiseModel,
    s_list: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let m = cfg.stop_m;
    let mt = cfg.stop_mtilde;
    let threshold = mt * mt + (m - 1.0) * (m - 1.0);
    let mut run_cfg = cfg.clone();
    run_cfg.t_final = s_list.iter().copied().fold(0.0, f64::max).max(cfg.dt);
    let spec = CostSpec::vorticity(0.5)?;
    let exceed: Vec<Vec<bool>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let tr = simulate_path(&run_cfg, phi, g, &spec, seed, p)?;
            Ok(s_list.iter().map(|&s| stopped_functional(&tr, s) > threshold).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..s_list.len())
        .map(|j| exceed.iter().filter(|e| e[j]).count())
        .collect())
}

/// Small-time tail `P(sup_{[0,τ∧S]}‖u‖_V² + ∫₀^{τ∧S}‖Au‖² > M̃² + (M−1)²)`
/// for each `S` in the decreasing list. `M` and `M̃` are the stopping
/// parameters of `cfg`.
///
/// Columns: `s, prob, ci_half, exceed_count`.
pub fn tail_experiment(
    cfg: &SimConfig,
    phi: &FeedbackControl,
    g: &NoiseModel,
    s_list: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Report> {
    cfg.require_initial_ball()?;
    if s_list.is_empty() {
        return Err(Error::InvalidParameter("s_list is empty".into()));
    }
    if s_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidParameter("s_list must be decreasing".into()));
    }
    if let Some(&s) = s_list.iter().find(|&&s| s > cfg.t_final || s <= 0.0) {
        return Err(Error::OutsideHorizon {
            t: s,
            horizon: cfg.t_final,
        });
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    let counts = tail_probabilities(cfg, phi, g, s_list, n_paths, seed)?;
    let m = cfg.stop_m;
    let mt = cfg.stop_mtilde;
    let mut table = Table::new(["s", "prob", "ci_half", "exceed_count"]);
    table
        .meta("experiment", "tail")
        .meta("threshold", mt * mt + (m - 1.0) * (m - 1.0));
    describe_run(&mut table, cfg, phi, g, n_paths, seed);
    let mut probs = Vec::new();
    let mut cis = Vec::new();
    for (&s, &c) in s_list.iter().zip(&counts) {
        let p = c as f64 / n_paths as f64;
        let ci = proportion_ci(p, n_paths);
        table.push(vec![s.into(), p.into(), ci.into(), Cell::from(c)]);
        probs.push(p);
        cis.push(ci);
    }
    let (first, last) = (probs[0], *probs.last().unwrap());
    let checks = vec![
        trend_check("prob_nonincreasing_as_s_decreases", &probs, &cis),
        Check::new(
            "final_at_most_half_initial",
            last <= 0.5 * first,
            format!("final {last} vs initial {first}"),
        ),
    ];
    Ok(Report { table, checks })
}

/// First `M` in `candidates` whose tail probability at `s` falls inside
/// `(lo, hi)`, together with that probability.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_stop_m(
    cfg: &SimConfig,
    phi: &FeedbackControl,
    g: &NoiseModel,
    s: f64,
    candidates: &[f64],
    (lo, hi): (f64, f64),
    n_paths: usize,
    seed: u64,
) -> Result<Option<(f64, f64)>> {
    for &m in candidates {
        let mut c = cfg.clone();
        c.stop_m = m;
        c.validate()?;
        let count = tail_probabilities(&c, phi, g, &[s], n_paths, seed)?[0];
        let p = count as f64 / n_paths as f64;
        if p > lo && p < hi {
            return Ok(Some((m, p)));
        }
    }
    Ok(None)
}
