use rayon::prelude::*;

use super::{describe_run, mean_ci, proportion_ci, trend_check, Report};
use crate::control::{control_sequence, lv_operator_distance, FeedbackControl, SequenceScheme};
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::integrator::{simulate_coupled, SimConfig};
use crate::noise::NoiseModel;
use crate::table::{Cell, Table};

#[derive(Copy, Clone)]
struct PairStats {
    int_v: f64,
    /// `sup ‖Δu‖_V² + ∫‖AΔu‖²` when neither path exits.
    inside: Option<f64>,
    sup_v: f64,
}

/// Distance between `u_φ` and `u_{φ_n}` on common increments.
///
/// Columns: `n, lv_distance, int_diff_v, ci_int, sup_diss, ci_sup_diss,
/// inside_fraction, prob_exceed, ci_prob`:
/// - `int_diff_v`: mean of `∫₀^{τ∧T} ‖u_φ − u_{φ_n}‖_V² dt`, `τ` the first
///   exit of either path;
/// - `sup_diss`: mean of `sup ‖Δu‖_V² + ∫‖AΔu‖²` over paths where neither
///   control exits, `inside_fraction` being their share;
/// - `prob_exceed`: share of paths with `sup ‖Δu‖_V² > delta` on the recorded
///   window.
#[allow(clippy::too_many_arguments)]
pub fn solution_convergence_experiment(
    cfg: &SimConfig,
    phi: &FeedbackControl,
    g: &NoiseModel,
    scheme: SequenceScheme,
    n_list: &[u32],
    n_paths: usize,
    delta: f64,
    seed: u64,
) -> Result<Report> {
    cfg.require_initial_ball()?;
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("n_list is empty".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("n_list must be increasing".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if n_paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let mut controls = vec![phi.clone()];
    for &n in n_list {
        controls.push(control_sequence(phi, n, scheme)?);
    }
    // The running cost is not used here; any valid spec will do.
    let spec = CostSpec::vorticity(0.5)?;
    let times = cfg.grid();
    let per_path: Vec<Vec<PairStats>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let run = simulate_coupled(cfg, &controls, g, &spec, seed, p)?;
            let reference = &run.trajectories[0];
            Ok(run
                .diffs
                .iter()
                .zip(&run.trajectories[1..])
                .map(|(d, other)| {
                    let both_inside = !reference.truncated() && !other.truncated();
                    let sup_v = d.sup_vnorm2();
                    PairStats {
                        int_v: d.int_vnorm2(&times),
                        inside: both_inside
                            .then(|| sup_v + d.anorm2_int.last().copied().unwrap_or(0.0)),
                        sup_v,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new([
        "n",
        "lv_distance",
        "int_diff_v",
        "ci_int",
        "sup_diss",
        "ci_sup_diss",
        "inside_fraction",
        "prob_exceed",
        "ci_prob",
    ]);
    table
        .meta("experiment", "convergence")
        .meta("scheme", scheme.name())
        .meta("delta", delta);
    describe_run(&mut table, cfg, phi, g, n_paths, seed);

    let (mut ints, mut ci_ints) = (Vec::new(), Vec::new());
    let (mut sups, mut ci_sups) = (Vec::new(), Vec::new());
    let (mut probs, mut ci_probs) = (Vec::new(), Vec::new());
    for (j, &n) in n_list.iter().enumerate() {
        let col: Vec<PairStats> = per_path.iter().map(|v| v[j]).collect();
        let (int_mean, int_ci) = mean_ci(&col.iter().map(|s| s.int_v).collect::<Vec<_>>());
        let inside: Vec<f64> = col.iter().filter_map(|s| s.inside).collect();
        let inside_fraction = inside.len() as f64 / n_paths as f64;
        let (sup_mean, sup_ci) = if inside.is_empty() {
            (f64::NAN, f64::INFINITY)
        } else {
            mean_ci(&inside)
        };
        let exceed = col.iter().filter(|s| s.sup_v > delta).count();
        let prob = exceed as f64 / n_paths as f64;
        let prob_ci = proportion_ci(prob, n_paths);
        let dist = lv_operator_distance(phi, &controls[j + 1])?;
        table.push(vec![
            Cell::from(n),
            dist.operator.into(),
            int_mean.into(),
            int_ci.into(),
            sup_mean.into(),
            sup_ci.into(),
            inside_fraction.into(),
            prob.into(),
            prob_ci.into(),
        ]);
        ints.push(int_mean);
        ci_ints.push(int_ci);
        sups.push(sup_mean);
        ci_sups.push(sup_ci);
        probs.push(prob);
        ci_probs.push(prob_ci);
    }
    let checks = vec![
        trend_check("int_diff_nonincreasing", &ints, &ci_ints),
        trend_check("sup_diss_nonincreasing", &sups, &ci_sups),
        trend_check("prob_exceed_nonincreasing", &probs, &ci_probs),
    ];
    Ok(Report { table, checks })
}
