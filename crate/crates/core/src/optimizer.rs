//! Sample-average minimization of the cost over a box of control parameters.
//!
//! The objective fixes the seed set for every `θ`, so it is a deterministic,
//! continuous function of `θ`. A low-discrepancy grid scan picks a start for
//! a box-clamped Nelder–Mead simplex.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::control::{FeedbackControl, Profile};
use crate::cost::{estimate_j, CostSpec};
use crate::error::{Error, Result};
use crate::integrator::SimConfig;
use crate::noise::NoiseModel;
use crate::spectral::Mode;
use crate::table::{Cell, Table};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Constant gain on a mode.
    Gain(Mode),
    /// Real part of a constant base amplitude.
    BaseRe(Mode),
    /// Imaginary part of a constant base amplitude.
    BaseIm(Mode),
}

impl Slot {
    pub fn parse(s: &str) -> Option<Self> {
        let (kind, rest) = s.split_once(':')?;
        let (kx, ky) = rest.split_once(':')?;
        let m = Mode::new(kx.trim().parse().ok()?, ky.trim().parse().ok()?).ok()?;
        match kind.trim() {
            "gain" => Some(Self::Gain(m)),
            "base_re" => Some(Self::BaseRe(m)),
            "base_im" => Some(Self::BaseIm(m)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Gain(m) => format!("gain:{}:{}", m.kx(), m.ky()),
            Self::BaseRe(m) => format!("base_re:{}:{}", m.kx(), m.ky()),
            Self::BaseIm(m) => format!("base_im:{}:{}", m.kx(), m.ky()),
        }
    }
}

/// Compact box `Θ = Π [lower_i, upper_i]` and its affine embedding into
/// controls. Coordinates override the matching entries of `template`; cap
/// and state radius are those of the template for every `θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    slots: Vec<Slot>,
    template: FeedbackControl,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, slots: Vec<Slot>, template: FeedbackControl) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != slots.len() {
            return Err(Error::InvalidParameter(format!(
                "box needs matching nonempty bounds and slots, got {}, {}, {}",
                lower.len(),
                upper.len(),
                slots.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i]) || !lower[i].is_finite() || !upper[i].is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "box bounds invalid in dimension {i}: [{}, {}]",
                lower[i], upper[i]
            )));
        }
        for (i, s) in slots.iter().enumerate() {
            if let Slot::BaseRe(m) | Slot::BaseIm(m) = s {
                if !m.is_canonical() {
                    return Err(Error::InvalidParameter(format!(
                        "base slot {} must use a canonical mode",
                        s.label()
                    )));
                }
            }
            if slots[..i].contains(s) {
                return Err(Error::InvalidParameter(format!("slot {} repeated", s.label())));
            }
        }
        Ok(Self {
            lower,
            upper,
            slots,
            template,
        })
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dims()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (lo, hi))| *t >= *lo && *t <= *hi)
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for (t, (lo, hi)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *t = t.clamp(*lo, *hi);
        }
    }

    pub fn embed(&self, theta: &[f64]) -> Result<FeedbackControl> {
        if !self.contains(theta) {
            return Err(Error::InvalidParameter(format!("theta {theta:?} outside the box")));
        }
        let mut phi = self.template.clone();
        for (slot, &v) in self.slots.iter().zip(theta) {
            match *slot {
                Slot::Gain(m) => phi.set_gain(m, Profile::constant(v)),
                Slot::BaseRe(m) | Slot::BaseIm(m) => {
                    let current = phi
                        .base()
                        .iter()
                        .find(|(k, _)| *k == m)
                        .map_or(Complex64::new(0.0, 0.0), |(_, p)| p.eval(0.0));
                    let next = match *slot {
                        Slot::BaseRe(_) => Complex64::new(v, current.im),
                        _ => Complex64::new(current.re, v),
                    };
                    phi.set_base(m, Profile::constant(next));
                }
            }
        }
        Ok(phi)
    }
}

/// `Ĵ(embed(θ))` on the fixed seed set `(seed, 0..n_paths)`.
#[allow(clippy::too_many_arguments)]
pub fn saa_objective(
    theta: &[f64],
    bx: &ParamBox,
    cfg: &SimConfig,
    g: &NoiseModel,
    spec: &CostSpec,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    let phi = bx.embed(theta)?;
    Ok(estimate_j(cfg, &phi, g, spec, n_paths, seed)?.mean)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Phase {
    Grid,
    Simplex,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Self::Grid => "grid",
            Self::Simplex => "simplex",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub theta: Vec<f64>,
    pub value: f64,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeResult {
    pub theta_star: Vec<f64>,
    pub j_star: f64,
    pub evals: usize,
    pub trace: Vec<TraceEntry>,
}

impl OptimizeResult {
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(f64::INFINITY, |b, e| {
                *b = b.min(e.value);
                Some(*b)
            })
            .collect()
    }

    /// Columns: `eval_index, theta_0.., objective, best_so_far, phase`.
    pub fn to_table(&self, bx: &ParamBox) -> Table {
        let mut cols = vec!["eval_index".to_string()];
        cols.extend((0..bx.dims()).map(|i| format!("theta_{i}")));
        cols.extend(["objective", "best_so_far", "phase"].map(String::from));
        let mut t = Table::new(cols);
        t.meta("experiment", "optimize");
        for (i, s) in bx.slots().iter().enumerate() {
            t.meta(format!("theta_{i}"), format!("{} in [{}, {}]", s.label(), bx.lower[i], bx.upper[i]));
        }
        t.meta("j_star", crate::table::format_float(self.j_star));
        t.meta(
            "theta_star",
            self.theta_star.iter().map(|v| crate::table::format_float(*v)).collect::<Vec<_>>().join(";"),
        );
        for (k, (e, b)) in self.trace.iter().zip(self.best_so_far()).enumerate() {
            let mut row = vec![Cell::from(k)];
            row.extend(e.theta.iter().map(|&v| Cell::from(v)));
            row.push(e.value.into());
            row.push(b.into());
            row.push(e.phase.name().into());
            t.push(row);
        }
        t
    }
}

/// Rank-1 lattice in `[0,1]^d` with Korobov generator `(1, a, a², …) mod n`.
fn korobov(n: usize, d: usize) -> Vec<Vec<f64>> {
    // Generator chosen by the golden ratio rule, refined to be coprime to n.
    let mut a = ((n as f64) / 1.618_033_988_749_895).round().max(1.0) as usize;
    while gcd(a, n) != 1 {
        a += 1;
    }
    let mut gen = vec![1usize; d];
    for j in 1..d {
        gen[j] = gen[j - 1] * a % n;
    }
    (0..n)
        .map(|i| gen.iter().map(|&g| ((i * g) % n) as f64 / n as f64 + 0.5 / n as f64).collect())
        .collect()
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn grid_points(bx: &ParamBox, count: usize) -> Vec<Vec<f64>> {
    let d = bx.dims();
    let unit: Vec<Vec<f64>> = if d == 1 {
        if count == 1 {
            vec![vec![0.5]]
        } else {
            (0..count).map(|i| vec![i as f64 / (count - 1) as f64]).collect()
        }
    } else {
        korobov(count, d)
    };
    unit.into_iter()
        .map(|u| {
            u.iter()
                .enumerate()
                .map(|(i, s)| bx.lower[i] + s * (bx.upper[i] - bx.lower[i]))
                .collect()
        })
        .collect()
}

const SPREAD_TOL: f64 = 1e-6;

/// Grid scan over `⌈budget/3⌉` points followed by Nelder–Mead from the best
/// grid point, clamped to the box, until the simplex value spread drops
/// below `1e-6` or the budget runs out.
#[allow(clippy::too_many_arguments)]
pub fn minimize(
    bx: &ParamBox,
    cfg: &SimConfig,
    g: &NoiseModel,
    spec: &CostSpec,
    n_paths: usize,
    seed: u64,
    budget: usize,
) -> Result<OptimizeResult> {
    let d = bx.dims();
    if budget < 3 * (d + 1) {
        return Err(Error::InvalidParameter(format!(
            "budget {budget} below the minimum {} for {d} parameters",
            3 * (d + 1)
        )));
    }
    let f = |theta: &[f64]| saa_objective(theta, bx, cfg, g, spec, n_paths, seed);
    let n_grid = budget.div_ceil(3);
    let points = grid_points(bx, n_grid);
    let values: Vec<f64> = points.par_iter().map(|p| f(p)).collect::<Result<_>>()?;
    let mut trace: Vec<TraceEntry> = points
        .iter()
        .zip(&values)
        .map(|(p, &v)| TraceEntry {
            theta: p.clone(),
            value: v,
            phase: Phase::Grid,
        })
        .collect();
    let best = (0..values.len())
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("grid is nonempty");

    // Initial simplex: best grid point plus one step of 10% of the box width
    // per axis, reflected inward at the boundary.
    let x0 = points[best].clone();
    let mut simplex = vec![(x0.clone(), values[best])];
    let mut remaining = budget - trace.len();
    let eval = |theta: Vec<f64>, trace: &mut Vec<TraceEntry>, remaining: &mut usize| -> Result<f64> {
        let v = f(&theta)?;
        trace.push(TraceEntry {
            theta,
            value: v,
            phase: Phase::Simplex,
        });
        *remaining -= 1;
        Ok(v)
    };
    for i in 0..d {
        if remaining == 0 {
            break;
        }
        let mut p = x0.clone();
        let width = bx.upper[i] - bx.lower[i];
        let step = 0.1 * width;
        p[i] = if p[i] + step <= bx.upper[i] { p[i] + step } else { p[i] - step };
        bx.clamp(&mut p);
        let v = eval(p.clone(), &mut trace, &mut remaining)?;
        simplex.push((p, v));
    }

    if simplex.len() == d + 1 {
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[d].1 - simplex[0].1;
            if spread < SPREAD_TOL || remaining == 0 {
                break;
            }
            let centroid: Vec<f64> = (0..d)
                .map(|i| simplex[..d].iter().map(|(p, _)| p[i]).sum::<f64>() / d as f64)
                .collect();
            let along = |s: f64| -> Vec<f64> {
                let mut p: Vec<f64> = (0..d).map(|i| centroid[i] + s * (simplex[d].0[i] - centroid[i])).collect();
                bx.clamp(&mut p);
                p
            };
            let xr = along(-1.0);
            let fr = eval(xr.clone(), &mut trace, &mut remaining)?;
            if fr < simplex[0].1 {
                if remaining == 0 {
                    simplex[d] = (xr, fr);
                    continue;
                }
                let xe = along(-2.0);
                let fe = eval(xe.clone(), &mut trace, &mut remaining)?;
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[d - 1].1 {
                simplex[d] = (xr, fr);
            } else {
                if remaining == 0 {
                    break;
                }
                let (xc, fc) = if fr < simplex[d].1 {
                    let xc = along(-0.5);
                    let fc = eval(xc.clone(), &mut trace, &mut remaining)?;
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = eval(xc.clone(), &mut trace, &mut remaining)?;
                    (xc, fc)
                };
                if fc < simplex[d].1.min(fr) {
                    simplex[d] = (xc, fc);
                } else {
                    // Shrink toward the best vertex.
                    let best = simplex[0].0.clone();
                    for k in 1..=d {
                        if remaining == 0 {
                            break;
                        }
                        let mut p: Vec<f64> =
                            (0..d).map(|i| best[i] + 0.5 * (simplex[k].0[i] - best[i])).collect();
                        bx.clamp(&mut p);
                        let v = eval(p.clone(), &mut trace, &mut remaining)?;
                        simplex[k] = (p, v);
                    }
                }
            }
        }
    }

    let best = trace
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("trace is nonempty");
    Ok(OptimizeResult {
        theta_star: best.theta.clone(),
        j_star: best.value,
        evals: trace.len(),
        trace,
    })
}
