use rayon::prelude::*;

use super::{describe_cost, describe_run, mean_ci, trend_check, Check, Report};
use crate::control::{control_sequence, lv_operator_distance, FeedbackControl, SequenceScheme};
use crate::cost::{concave_transform, path_cost, CostSpec, Estimate};
use crate::error::{Error, Result};
use crate::integrator::{simulate_coupled, simulate_path, SimConfig, Trajectory};
use crate::noise::NoiseModel;
use crate::table::{Cell, Table};

struct PathStats {
    costs: Vec<Option<f64>>,
    sup_diff: Vec<Option<f64>>,
}

fn sup_transformed_diff(a: &Trajectory, b: &Trajectory, eps: f64) -> Result<f64> {
    let mut best = 0.0f64;
    for (&x, &y) in a.cost_raw.iter().zip(&b.cost_raw) {
        best = best.max((concave_transform(x, eps)? - concave_transform(y, eps)?).abs());
    }
    Ok(best)
}

/// `Ĵ(φ_n)` against `Ĵ(φ)` along a control sequence, all controls driven by
/// the same increments on every path.
///
/// Columns: `n, lv_distance, base_distance, j_n, ci_half, j_ref, ci_half_ref,
/// abs_diff, paired_ci, e_sup_cost_diff, ci_sup_cost_diff, blowups`.
/// `paired_ci` is the half-width of the per-path difference
/// `cost(φ_n) − cost(φ)`; `e_sup_cost_diff` averages
/// `sup_t |ψ(L(φ_n)) − ψ(L(φ))|` with `ψ` the concave transform.
#[allow(clippy::too_many_arguments)]
pub fn continuity_experiment(
    cfg: &SimConfig,
    phi: &FeedbackControl,
    g: &NoiseModel,
    spec: &CostSpec,
    scheme: SequenceScheme,
    n_list: &[u32],
    n_paths: usize,
    seed: u64,
) -> Result<Report> {
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("n_list is empty".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("n_list must be increasing".into()));
    }
    if n_paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let mut controls = vec![phi.clone()];
    for &n in n_list {
        controls.push(control_sequence(phi, n, scheme)?);
    }
    let eps = spec.eps();
    let stats: Vec<PathStats> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let run = simulate_coupled(cfg, &controls, g, spec, seed, p)?;
            let trajs = &run.trajectories;
            let costs = trajs
                .iter()
                .map(|t| if t.blowup { Ok(None) } else { path_cost(t, spec).map(Some) })
                .collect::<Result<Vec<_>>>()?;
            let sup_diff = trajs[1..]
                .iter()
                .map(|t| {
                    if t.blowup || trajs[0].blowup {
                        Ok(None)
                    } else {
                        sup_transformed_diff(&trajs[0], t, eps).map(Some)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PathStats { costs, sup_diff })
        })
        .collect::<Result<_>>()?;

    let column = |j: usize| -> Vec<Option<f64>> { stats.iter().map(|s| s.costs[j]).collect() };
    let estimate = |c: &[Option<f64>]| {
        let kept: Vec<f64> = c.iter().flatten().copied().collect();
        Estimate::from_samples(&kept, c.len() - kept.len())
    };
    let ref_costs = column(0);
    let j_ref = estimate(&ref_costs);

    let mut table = Table::new([
        "n",
        "lv_distance",
        "base_distance",
        "j_n",
        "ci_half",
        "j_ref",
        "ci_half_ref",
        "abs_diff",
        "paired_ci",
        "e_sup_cost_diff",
        "ci_sup_cost_diff",
        "blowups",
    ]);
    table.meta("experiment", "continuity").meta("scheme", scheme.name());
    describe_run(&mut table, cfg, phi, g, n_paths, seed);
    describe_cost(&mut table, spec);

    let mut abs_diffs = Vec::new();
    let mut paired_cis = Vec::new();
    let mut sup_means = Vec::new();
    let mut sup_cis = Vec::new();
    for (j, &n) in n_list.iter().enumerate() {
        let costs = column(j + 1);
        let jn = estimate(&costs);
        let dist = lv_operator_distance(phi, &controls[j + 1])?;
        let paired: Vec<f64> = costs
            .iter()
            .zip(&ref_costs)
            .filter_map(|(a, b)| Some((*a)? - (*b)?))
            .collect();
        let (_, paired_ci) = mean_ci(&paired);
        let sups: Vec<f64> = stats.iter().filter_map(|s| s.sup_diff[j]).collect();
        let (sup_mean, sup_ci) = mean_ci(&sups);
        let abs_diff = (jn.mean - j_ref.mean).abs();
        abs_diffs.push(abs_diff);
        paired_cis.push(paired_ci);
        sup_means.push(sup_mean);
        sup_cis.push(sup_ci);
        table.push(vec![
            Cell::from(n),
            dist.operator.into(),
            dist.base.into(),
            jn.mean.into(),
            jn.ci_half.into(),
            j_ref.mean.into(),
            j_ref.ci_half.into(),
            abs_diff.into(),
            paired_ci.into(),
            sup_mean.into(),
            sup_ci.into(),
            Cell::from(jn.blowups),
        ]);
    }

    let mut checks = vec![
        trend_check("abs_diff_nonincreasing", &abs_diffs, &paired_cis),
        trend_check("sup_cost_diff_nonincreasing", &sup_means, &sup_cis),
    ];
    // Common random numbers: path 0 of the coupled run replays the stand-alone path.
    let solo = simulate_path(cfg, phi, g, spec, seed, 0)?;
    let coupled = simulate_coupled(cfg, &controls, g, spec, seed, 0)?;
    checks.push(Check::new(
        "crn_replay",
        solo == coupled.trajectories[0],
        "stand-alone and coupled reference paths identical",
    ));
    Ok(Report { table, checks })
}
