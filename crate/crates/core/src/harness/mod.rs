//! Executable experiments for the qualitative statements about controlled
//! SNSE dynamics: continuity of the cost, solution convergence, small-time
//! tails, log-moment stability, subadditivity and a stochastic Gronwall bound.
//!
//! Each experiment returns a [`Report`]: a [`Table`] with its full
//! parameterization in the metadata plus named pass/fail checks.

mod continuity;
mod convergence;
mod gronwall;
mod logmoment;
mod subadd;
mod tail;

pub use continuity::continuity_experiment;
pub use convergence::solution_convergence_experiment;
pub use gronwall::{gronwall_check, gronwall_experiment, GronwallInstance, GronwallVerdict};
pub use logmoment::log_moment_experiment;
pub use subadd::{subadditivity_check, subadditivity_experiment, SubaddSummary};
pub use tail::{calibrate_stop_m, tail_experiment};

use crate::control::FeedbackControl;
use crate::cost::CostSpec;
use crate::integrator::SimConfig;
use crate::noise::{NoiseKind, NoiseModel};
use crate::table::Table;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub table: Table,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Indices `i` where `values[i+1]` exceeds `values[i]` with disjoint
/// confidence intervals, i.e. `values[i+1] - ci[i+1] > values[i] + ci[i]`.
pub fn increase_violations(values: &[f64], ci: &[f64]) -> Vec<usize> {
    assert_eq!(values.len(), ci.len());
    (0..values.len().saturating_sub(1))
        .filter(|&i| values[i + 1] - ci[i + 1] > values[i] + ci[i])
        .collect()
}

pub(crate) fn trend_check(name: &str, values: &[f64], ci: &[f64]) -> Check {
    let bad = increase_violations(values, ci);
    let detail = if bad.is_empty() {
        format!("nonincreasing within CI over {} rows", values.len())
    } else {
        format!("increase with disjoint CIs after rows {bad:?}")
    };
    Check::new(name, bad.is_empty(), detail)
}

/// Normal-approximation 95% half-width for a proportion.
pub(crate) fn proportion_ci(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

pub(crate) fn mean_ci(samples: &[f64]) -> (f64, f64) {
    let e = crate::cost::Estimate::from_samples(samples, 0);
    (e.mean, e.ci_half)
}

pub(crate) fn describe_run(
    table: &mut Table,
    cfg: &SimConfig,
    phi: &FeedbackControl,
    g: &NoiseModel,
    n_paths: usize,
    seed: u64,
) {
    let kind = match g.kind() {
        NoiseKind::Off => "off",
        NoiseKind::Additive => "additive",
        NoiseKind::DiagonalMultiplicative => "diagonal-multiplicative",
    };
    table
        .meta("grid_n", cfg.trunc)
        .meta("nu", cfg.nu)
        .meta("dt", cfg.dt)
        .meta("t_final", cfg.t_final)
        .meta("stop_m", cfg.stop_m)
        .meta("stop_mtilde", cfg.stop_mtilde)
        .meta("advection", cfg.advection)
        .meta("noise", kind)
        .meta("sigma", g.sigma())
        .meta("alpha", g.alpha())
        .meta("forced_modes", g.forced_modes().len())
        .meta("cap_k", phi.cap())
        .meta("c1", phi.c1())
        .meta("c2", phi.c2())
        .meta("paths", n_paths)
        .meta("seed", seed);
}

pub(crate) fn describe_cost(table: &mut Table, spec: &CostSpec) {
    table
        .meta("cost", spec.kind().name())
        .meta("eps", spec.eps())
        .meta("lip_l", spec.lip_l());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violations_need_disjoint_intervals() {
        assert!(increase_violations(&[1.0, 1.1, 0.5], &[0.1, 0.1, 0.1]).is_empty());
        assert_eq!(increase_violations(&[1.0, 1.3, 0.5], &[0.1, 0.1, 0.1]), vec![0]);
        assert!(increase_violations(&[], &[]).is_empty());
    }
}
