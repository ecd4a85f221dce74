//! Concave cost functional `J(φ) = E[ sup_t ln(1 + L(t, u, φ(t,u)))^{1-ε} ]`.

use rayon::prelude::*;

use crate::control::FeedbackControl;
use crate::error::{Error, Result};
use crate::integrator::{simulate_path, SimConfig, Trajectory};
use crate::noise::NoiseModel;
use crate::spectral::SpectralField;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum CostKind {
    /// `L = ‖∇ × u‖_H`.
    Vorticity,
    /// `L = ‖u − target‖_V + ‖φ‖_H`.
    VTracking,
}

impl CostKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Vorticity => "vorticity",
            Self::VTracking => "v-tracking",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vorticity" => Some(Self::Vorticity),
            "v-tracking" | "v_tracking" => Some(Self::VTracking),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec {
    kind: CostKind,
    eps: f64,
    lip_l: f64,
    target: Option<SpectralField>,
}

impl CostSpec {
    /// `lip_l` is the constant in `|L(t,x1,y1) − L(t,x2,y2)|² <= lip_l (‖Δx‖_V² + ‖Δy‖_H²)`
    /// and is checked against the built-in bound for the kind.
    pub fn new(kind: CostKind, eps: f64, lip_l: Option<f64>, target: Option<SpectralField>) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("cost.eps must be in (0,1), got {eps}")));
        }
        let natural = match kind {
            CostKind::Vorticity => 1.0,
            CostKind::VTracking => 2.0,
        };
        let lip_l = lip_l.unwrap_or(natural);
        if lip_l < natural {
            return Err(Error::InvalidParameter(format!(
                "cost.lip_l = {lip_l} is below the valid constant {natural} for {}",
                kind.name()
            )));
        }
        match (kind, &target) {
            (CostKind::VTracking, None) => {
                return Err(Error::InvalidParameter("v-tracking cost needs a target field".into()))
            }
            (CostKind::Vorticity, Some(_)) => {
                return Err(Error::InvalidParameter("vorticity cost takes no target".into()))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            eps,
            lip_l,
            target,
        })
    }

    pub fn vorticity(eps: f64) -> Result<Self> {
        Self::new(CostKind::Vorticity, eps, None, None)
    }

    pub fn v_tracking(eps: f64, target: SpectralField) -> Result<Self> {
        Self::new(CostKind::VTracking, eps, None, Some(target))
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn lip_l(&self) -> f64 {
        self.lip_l
    }

    pub fn target(&self) -> Option<&SpectralField> {
        self.target.as_ref()
    }
}

/// `(ln(1 + x))^{1-ε}` for `x >= 0`.
pub fn concave_transform(x: f64, eps: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Negative(x));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must be in (0,1), got {eps}")));
    }
    Ok(x.ln_1p().powf(1.0 - eps))
}

/// Running cost `L(t, u, φ)`. Nonnegative by construction.
pub fn running_cost(spec: &CostSpec, _t: f64, u: &SpectralField, phi_val: &SpectralField) -> Result<f64> {
    match spec.kind {
        // ‖∇ × u‖_H coincides with ‖u‖_V on divergence-free fields.
        CostKind::Vorticity => Ok(u.norm_v2().sqrt()),
        CostKind::VTracking => {
            let target = spec.target.as_ref().expect("validated at construction");
            u.check_same_trunc(target)?;
            let dv: f64 = u
                .iter()
                .zip(target.amps())
                .map(|((k, a), b)| k.lambda() * (a - b).norm_sqr())
                .sum();
            Ok(dv.sqrt() + phi_val.norm_h2().sqrt())
        }
    }
}

/// `sup_i ln(1 + L_i)^{1-ε}` over the recorded grid.
pub fn path_cost(traj: &Trajectory, spec: &CostSpec) -> Result<f64> {
    if traj.cost_raw.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let mut best = 0.0f64;
    for &x in &traj.cost_raw {
        best = best.max(concave_transform(x, spec.eps)?);
    }
    Ok(best)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Half-width of the normal 95% interval, `1.96 s / sqrt(n)`.
    pub ci_half: f64,
    pub n: usize,
    pub blowups: usize,
}

impl Estimate {
    /// Sample statistics; `blowups` is carried through unchanged.
    pub fn from_samples(samples: &[f64], blowups: usize) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                ci_half: f64::INFINITY,
                n,
                blowups,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let ci_half = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            mean,
            ci_half,
            n,
            blowups,
        }
    }
}

/// Per-path costs of paths `0..n_paths`, in path order. Blown-up paths give `None`.
pub fn path_costs(
    cfg: &SimConfig,
    phi: &FeedbackControl,
    g: &NoiseModel,
    spec: &CostSpec,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let tr = simulate_path(cfg, phi, g, spec, seed, p)?;
            if tr.blowup {
                Ok(None)
            } else {
                path_cost(&tr, spec).map(Some)
            }
        })
        .collect()
}

/// Monte Carlo estimate of `J(φ)`. Paths run in parallel; the reduction is
/// sequential in path order, so the result does not depend on thread count.
pub fn estimate_j(
    cfg: &SimConfig,
    phi: &FeedbackControl,
    g: &NoiseModel,
    spec: &CostSpec,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    let costs = path_costs(cfg, phi, g, spec, n_paths, seed)?;
    let kept: Vec<f64> = costs.iter().flatten().copied().collect();
    Ok(Estimate::from_samples(&kept, n_paths - kept.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;
    use crate::spectral::Mode;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mode(kx: i32, ky: i32) -> Mode {
        Mode::new(kx, ky).unwrap()
    }

    #[test]
    fn transform_values() {
        assert_eq!(concave_transform(0.0, 0.25).unwrap(), 0.0);
        let v = concave_transform(1.0, 0.25).unwrap();
        assert!((v - 2f64.ln().powf(0.75)).abs() < 1e-15);
        assert!(concave_transform(-1e-3, 0.25).is_err());
        assert!(concave_transform(1.0, 0.0).is_err());
        assert!(concave_transform(1.0, 1.0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(CostSpec::vorticity(1.0).is_err());
        let err = CostSpec::vorticity(0.0).unwrap_err().to_string();
        assert!(err.contains("cost.eps must be in (0,1)"), "{err}");
        assert!(CostSpec::new(CostKind::VTracking, 0.5, None, None).is_err());
        assert!(CostSpec::new(CostKind::Vorticity, 0.5, Some(0.5), None).is_err());
    }

    #[test]
    fn transform_is_concave_increasing_subadditive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100_000 {
            let eps = rng.random_range(0.01..0.99);
            let x = 10f64.powf(rng.random_range(-6.0..6.0));
            let y = 10f64.powf(rng.random_range(-6.0..6.0));
            let lam: f64 = rng.random();
            let f = |v: f64| concave_transform(v, eps).unwrap();
            let (a, b) = (x.min(y), x.max(y));
            assert!(f(a) <= f(b));
            let mid = f(lam * x + (1.0 - lam) * y);
            let chord = lam * f(x) + (1.0 - lam) * f(y);
            assert!(mid >= chord - 1e-12 * (1.0 + chord.abs()));
            assert!(f(x + y) <= f(x) + f(y) + 1e-12);
        }
    }

    #[test]
    fn decay_path_cost() {
        let u0 = SpectralField::single(1, mode(1, 0), Complex64::new(2.0, 0.0)).unwrap();
        let cfg = SimConfig::new(1, 1.0, 0.01, 1.0, u0).unwrap();
        let phi = FeedbackControl::new(1.0, 10.0, 1.0).unwrap();
        let spec = CostSpec::vorticity(0.5).unwrap();
        let tr = simulate_path(&cfg, &phi, &NoiseModel::off(), &spec, 0, 0).unwrap();
        // The sup sits at t = 0 where ‖u‖_V = 2.
        assert!((path_cost(&tr, &spec).unwrap() - 3f64.ln().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn running_cost_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = SpectralField::random(3, 1.0, &mut rng);
        let specs = [
            CostSpec::vorticity(0.3).unwrap(),
            CostSpec::v_tracking(0.3, target).unwrap(),
        ];
        for spec in &specs {
            for _ in 0..1000 {
                let x1 = SpectralField::random(3, 2.0, &mut rng);
                let x2 = SpectralField::random(3, 2.0, &mut rng);
                let y1 = SpectralField::random(3, 2.0, &mut rng);
                let y2 = SpectralField::random(3, 2.0, &mut rng);
                let l1 = running_cost(spec, 0.0, &x1, &y1).unwrap();
                let l2 = running_cost(spec, 0.0, &x2, &y2).unwrap();
                assert!(l1 >= 0.0);
                let dx = (&x1 - &x2).norm_v2();
                let dy = match spec.kind() {
                    CostKind::Vorticity => 0.0,
                    CostKind::VTracking => (&y1 - &y2).norm_h2(),
                };
                assert!((l1 - l2).powi(2) <= spec.lip_l() * (dx + dy) * (1.0 + 1e-12) + 1e-15);
            }
        }
    }

    #[test]
    fn confidence_interval_shrinks() {
        let u0 = SpectralField::single(2, mode(1, 0), Complex64::new(0.5, 0.0)).unwrap();
        let g = NoiseModel::new(NoiseKind::Additive, 1.0, 2.0, vec![mode(1, 0), mode(0, 1)]).unwrap();
        let cfg = SimConfig::new(2, 0.5, 0.02, 0.5, u0).unwrap();
        let phi = FeedbackControl::new(0.5, 10.0, 1.0).unwrap();
        let spec = CostSpec::vorticity(0.25).unwrap();
        let a = estimate_j(&cfg, &phi, &g, &spec, 500, 3).unwrap();
        let b = estimate_j(&cfg, &phi, &g, &spec, 1000, 3).unwrap();
        let ratio = b.ci_half / a.ci_half;
        assert!((ratio - 1.0 / 2f64.sqrt()).abs() < 0.1, "ratio {ratio}");
        assert_eq!(a.blowups, 0);
    }

    #[test]
    fn scalar_ou_oracle() {
        // One additive mode, no advection: the amplitude is a discrete OU
        // process whose terminal law is Gaussian with a closed-form variance.
        let (nu, dt, t_final, sigma) = (0.5, 0.01, 1.0, 0.8);
        let k = mode(1, 0);
        let u0 = SpectralField::zeros(1);
        let mut cfg = SimConfig::new(1, nu, dt, t_final, u0).unwrap();
        cfg.advection = false;
        let g = NoiseModel::new(NoiseKind::Additive, sigma, 2.0, vec![k]).unwrap();
        let phi = FeedbackControl::new(t_final, 10.0, 1.0).unwrap();
        let spec = CostSpec::vorticity(0.5).unwrap();
        let n = 4000;
        let mut sum2 = 0.0;
        for p in 0..n {
            let tr = simulate_path(&cfg, &phi, &g, &spec, 17, p).unwrap();
            sum2 += tr.final_state.get(k).unwrap().norm_sqr();
        }
        let q = 1.0; // λ = 1
        let r = 1.0 / (1.0 + nu * dt);
        let steps = cfg.steps();
        let var: f64 = (1..=steps).map(|j| (sigma * q).powi(2) * dt * r.powi(2 * j as i32)).sum();
        let got = sum2 / n as f64;
        // Sample variance of a chi-square(1) scaled: sd ≈ var * sqrt(2/n).
        assert!((got - var).abs() < 4.0 * var * (2.0 / n as f64).sqrt(), "{got} vs {var}");
    }
}
