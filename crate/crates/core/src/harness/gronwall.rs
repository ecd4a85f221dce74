//! Discrete stochastic Gronwall bound on realized sample paths.
//!
//! Sums over a grid window `[a, b]` are left-endpoint Riemann sums over steps
//! `a..b`; maxima run over indices `a..=b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Check, Report};
use crate::error::{Error, Result};
use crate::table::{Cell, Table};

const REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GronwallInstance {
    pub grid: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub c0: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GronwallVerdict {
    pub c_effective: f64,
    pub holds: bool,
    /// Block boundaries as grid index pairs `(start, end)`.
    pub blocks: Vec<(usize, usize)>,
    /// `max x + Σ y Δt`.
    pub lhs: f64,
    /// `x(0) + Σ z Δt`.
    pub rhs: f64,
}

impl GronwallVerdict {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

struct Prefix(Vec<f64>);

impl Prefix {
    fn new(values: &[f64], grid: &[f64]) -> Self {
        let mut acc = vec![0.0];
        for i in 0..grid.len() - 1 {
            let last = acc[i];
            acc.push(last + values[i] * (grid[i + 1] - grid[i]));
        }
        Prefix(acc)
    }

    /// Sum over steps `a..b`.
    fn window(&self, a: usize, b: usize) -> f64 {
        self.0[b] - self.0[a]
    }
}

impl GronwallInstance {
    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    /// Checks shape, signs, `Σ r Δt < κ` and the local inequality on every
    /// window `[a, b]`.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        let bad = |m: String| Err(Error::Precondition(m));
        if n < 2 {
            return bad("grid needs at least two points".into());
        }
        if [&self.x, &self.y, &self.z, &self.r].iter().any(|s| s.len() != n) {
            return bad("sequences must match the grid length".into());
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) || self.grid[0] != 0.0 {
            return bad("grid must start at 0 and increase".into());
        }
        if !(self.c0 >= 1.0) {
            return bad(format!("c0 = {} must be >= 1", self.c0));
        }
        for s in [&self.x, &self.y, &self.z, &self.r] {
            if let Some(v) = s.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return bad(format!("sequence entry {v} is not a finite nonnegative number"));
            }
        }
        let mass = Prefix::new(&self.r, &self.grid).window(0, n - 1);
        if !(mass < self.kappa) {
            return bad(format!("r-mass {mass} is not below kappa {}", self.kappa));
        }
        let rx: Vec<f64> = self.r.iter().zip(&self.x).map(|(r, x)| r * x).collect();
        let py = Prefix::new(&self.y, &self.grid);
        let prx = Prefix::new(&rx, &self.grid);
        let pz = Prefix::new(&self.z, &self.grid);
        for a in 0..n {
            let mut max_x = 0.0f64;
            for b in a..n {
                max_x = max_x.max(self.x[b]);
                let lhs = max_x + py.window(a, b);
                let rhs = self.c0 * (self.x[a] + prx.window(a, b) + pz.window(a, b));
                if lhs > rhs * (1.0 + REL_TOL) + 1e-300 {
                    return bad(format!("local inequality fails on [{a}, {b}]: {lhs} > {rhs}"));
                }
            }
        }
        Ok(())
    }

    /// `r ≡ 1`, `c0 = 1`, `κ = 1.01` on eight steps of `[0, 1]`, with
    /// `x ≡ 1, y ≡ 1, z ≡ 0` so that every local inequality is an equality.
    /// Two blocks of r-mass 1/2 each; the constant is `2 · (1 + 2) = 6`.
    pub fn hand_two_block() -> Self {
        let n = 9;
        Self {
            grid: (0..n).map(|i| i as f64 * 0.125).collect(),
            x: vec![1.0; n],
            y: vec![1.0; n],
            z: vec![0.0; n],
            r: vec![1.0; n],
            c0: 1.0,
            kappa: 1.01,
        }
    }

    /// Random instance satisfying the local inequality by construction:
    /// `x_{i+1} <= x_i + (r_i x_i + z_i) Δt_i` and `y_i <= (c0 − 1)(r_i x_i + z_i)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let steps = rng.random_range(5..=120);
        let horizon = rng.random_range(0.25..2.0);
        let c0 = if rng.random_bool(0.2) { 1.0 } else { rng.random_range(1.0..4.0) };
        let kappa = rng.random_range(0.2..5.0);
        // Cut the grid at sorted uniform points for uneven steps.
        let mut cuts: Vec<f64> = (0..steps - 1).map(|_| rng.random_range(0.0..horizon)).collect();
        cuts.sort_by(f64::total_cmp);
        let mut grid = vec![0.0];
        grid.extend(cuts);
        grid.push(horizon);
        grid.dedup();
        let n = grid.len();
        let mass = rng.random_range(0.0..0.99) * kappa;
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0f64).powi(2)).collect();
        let raw_mass: f64 = (0..n - 1).map(|i| raw[i] * (grid[i + 1] - grid[i])).sum();
        let scale = if raw_mass > 0.0 { mass / raw_mass } else { 0.0 };
        let mut r: Vec<f64> = raw.iter().map(|v| v * scale).collect();
        // Keep each single step well inside one block.
        for i in 0..n - 1 {
            let cap = 0.45 / (c0 * (grid[i + 1] - grid[i]));
            r[i] = r[i].min(cap);
        }
        let z: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..2.0) })
            .collect();
        let mut x = vec![rng.random_range(0.01..3.0)];
        let mut y = Vec::with_capacity(n);
        for i in 0..n - 1 {
            let drive = r[i] * x[i] + z[i];
            let top = x[i] + drive * (grid[i + 1] - grid[i]);
            let next = if rng.random_bool(0.5) { top } else { rng.random_range(0.0..=top) };
            x.push(next);
            let frac = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.0..1.0) };
            y.push(frac * (c0 - 1.0) * drive);
        }
        y.push(rng.random_range(0.0..1.0));
        Self {
            grid,
            x,
            y,
            z,
            r,
            c0,
            kappa,
        }
    }
}

/// Greedy block partition, the induction constant, and the global verdict.
///
/// Blocks grow while their r-mass stays at most `1/(2 c0)`. On a block of
/// mass `ρ` the local inequality gives `max x + Σ y <= c0/(1 − c0 ρ) · (x_start + Σ z)`,
/// and chaining blocks yields `C = c_1 · Π_{b>=2} (1 + c_b)`.
pub fn gronwall_check(inst: &GronwallInstance) -> Result<GronwallVerdict> {
    inst.validate()?;
    let n = inst.grid.len();
    let pr = Prefix::new(&inst.r, &inst.grid);
    let limit = 1.0 / (2.0 * inst.c0) * (1.0 + REL_TOL);
    let mut blocks = Vec::new();
    let mut constant = 0.0;
    let mut a = 0;
    while a < n - 1 {
        let mut b = a + 1;
        while b < n - 1 && pr.window(a, b + 1) <= limit {
            b += 1;
        }
        let rho = pr.window(a, b);
        if inst.c0 * rho >= 1.0 {
            return Err(Error::Precondition(format!(
                "step {a} alone carries r-mass {rho}, too coarse for a block"
            )));
        }
        let cb = inst.c0 / (1.0 - inst.c0 * rho);
        constant = if blocks.is_empty() { cb } else { constant * (1.0 + cb) };
        blocks.push((a, b));
        a = b;
    }
    let lhs = inst.x.iter().copied().fold(0.0, f64::max) + Prefix::new(&inst.y, &inst.grid).window(0, n - 1);
    let rhs = inst.x[0] + Prefix::new(&inst.z, &inst.grid).window(0, n - 1);
    let holds = lhs <= constant * rhs * (1.0 + REL_TOL);
    Ok(GronwallVerdict {
        c_effective: constant,
        holds,
        blocks,
        lhs,
        rhs,
    })
}

/// Hand instance plus `instances` random ones.
///
/// Columns: `instance, steps, c0, kappa, blocks, c_effective, lhs, rhs, ratio, holds`.
pub fn gronwall_experiment(instances: usize, seed: u64) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = Table::new([
        "instance",
        "steps",
        "c0",
        "kappa",
        "blocks",
        "c_effective",
        "lhs",
        "rhs",
        "ratio",
        "holds",
    ]);
    table
        .meta("experiment", "gronwall")
        .meta("instances", instances)
        .meta("seed", seed);
    let mut all = vec![GronwallInstance::hand_two_block()];
    all.extend((0..instances).map(|_| GronwallInstance::random(&mut rng)));
    let mut failures = 0;
    let mut hand_c = f64::NAN;
    for (i, inst) in all.iter().enumerate() {
        let v = gronwall_check(inst)?;
        if i == 0 {
            hand_c = v.c_effective;
        }
        failures += usize::from(!v.holds);
        let label = if i == 0 { "hand".to_string() } else { format!("random-{i}") };
        table.push(vec![
            label.into(),
            Cell::from(inst.steps()),
            inst.c0.into(),
            inst.kappa.into(),
            Cell::from(v.blocks.len()),
            v.c_effective.into(),
            v.lhs.into(),
            v.rhs.into(),
            v.ratio().into(),
            v.holds.into(),
        ]);
    }
    let checks = vec![
        Check::new("all_hold", failures == 0, format!("{failures} of {} instances fail", all.len())),
        Check::new(
            "hand_constant",
            (hand_c - 6.0).abs() <= 1e-12,
            format!("hand instance constant {hand_c}, expected 6"),
        ),
    ];
    Ok(Report { table, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block_constant_is_c0() {
        let n = 6;
        let inst = GronwallInstance {
            grid: (0..n).map(|i| i as f64 * 0.2).collect(),
            x: vec![2.0; n],
            y: vec![0.0; n],
            z: vec![0.0; n],
            r: vec![0.0; n],
            c0: 1.5,
            kappa: 0.1,
        };
        let v = gronwall_check(&inst).unwrap();
        assert_eq!(v.blocks, vec![(0, 5)]);
        assert_eq!(v.c_effective, 1.5);
        assert!(v.holds);
    }

    #[test]
    fn hand_instance_two_blocks() {
        let inst = GronwallInstance::hand_two_block();
        let v = gronwall_check(&inst).unwrap();
        assert_eq!(v.blocks, vec![(0, 4), (4, 8)]);
        assert!((v.c_effective - 6.0).abs() <= 1e-12);
        assert_eq!((v.lhs, v.rhs), (2.0, 1.0));
        assert!(v.holds);
    }

    #[test]
    fn invalid_instances_are_errors() {
        let mut inst = GronwallInstance::hand_two_block();
        inst.kappa = 1.0;
        assert!(matches!(gronwall_check(&inst), Err(Error::Precondition(_))));
        let mut inst = GronwallInstance::hand_two_block();
        inst.x[3] = 5.0;
        assert!(matches!(gronwall_check(&inst), Err(Error::Precondition(_))));
        let mut inst = GronwallInstance::hand_two_block();
        inst.y[0] = -1.0;
        assert!(gronwall_check(&inst).is_err());
    }

    #[test]
    fn random_instances_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let inst = GronwallInstance::random(&mut rng);
            let v = gronwall_check(&inst).unwrap();
            assert!(v.holds, "ratio {} > C {}", v.ratio(), v.c_effective);
        }
    }
}
