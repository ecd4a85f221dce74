use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Check, Report};
use crate::cost::concave_transform;
use crate::error::{Error, Result};
use crate::table::{Cell, Table};

const TOL: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SubaddSummary {
    pub samples: usize,
    /// Largest `|ψ(x₁) − ψ(x₂)| − ψ(|x₁ − x₂|)`; nonpositive when the
    /// inequality holds everywhere.
    pub max_slack: f64,
    pub violations: usize,
}

/// Samples pairs log-uniformly on `[1e-6, 1e6]²` and checks
/// `|ψ(x₁) − ψ(x₂)| <= ψ(|x₁ − x₂|)` for `ψ(x) = ln(1+x)^{1-ε}`.
pub fn subadditivity_check(eps: f64, n_samples: usize, seed: u64) -> Result<SubaddSummary> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must be in (0,1), got {eps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_slack = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..n_samples {
        let x1 = 10f64.powf(rng.random_range(-6.0..=6.0));
        let x2 = 10f64.powf(rng.random_range(-6.0..=6.0));
        let lhs = (concave_transform(x1, eps)? - concave_transform(x2, eps)?).abs();
        let rhs = concave_transform((x1 - x2).abs(), eps)?;
        let slack = lhs - rhs;
        max_slack = max_slack.max(slack);
        violations += usize::from(slack > TOL);
    }
    Ok(SubaddSummary {
        samples: n_samples,
        max_slack,
        violations,
    })
}

/// Table form of [`subadditivity_check`] with columns
/// `eps, samples, max_slack, violations`.
pub fn subadditivity_experiment(eps: f64, n_samples: usize, seed: u64) -> Result<Report> {
    let s = subadditivity_check(eps, n_samples, seed)?;
    let mut table = Table::new(["eps", "samples", "max_slack", "violations"]);
    table
        .meta("experiment", "subadd")
        .meta("eps", eps)
        .meta("samples", n_samples)
        .meta("seed", seed)
        .meta("tolerance", TOL);
    table.push(vec![eps.into(), Cell::from(s.samples), s.max_slack.into(), Cell::from(s.violations)]);
    let checks = vec![Check::new(
        "no_violations",
        s.violations == 0 && s.max_slack <= TOL,
        format!("{} violations, max slack {:.3e}", s.violations, s.max_slack),
    )];
    Ok(Report { table, checks })
}
