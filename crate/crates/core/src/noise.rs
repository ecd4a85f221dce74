//! Truncated cylindrical noise `g(u) dW = Σ_k g_k(u) dW_k`, one Brownian
//! direction per forced mode, with mode weights `q_k = λ(k)^(-α/2)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::NormalStream;
use crate::spectral::{mode_index, Mode, SpectralField};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Off,
    /// `g_k = σ q_k e_k`
    Additive,
    /// `g_k(u) = σ q_k ⟨u, e_k⟩ e_k`
    DiagonalMultiplicative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    sigma: f64,
    alpha: f64,
    forced: Vec<Mode>,
    weights: Vec<f64>,
    k1: f64,
    k2: f64,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct HsNorms {
    pub in_h: f64,
    pub in_v: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64, alpha: f64, forced: Vec<Mode>) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise alpha must be > 1, got {alpha}"
            )));
        }
        let mut canonical: Vec<Mode> = Vec::with_capacity(forced.len());
        for m in forced {
            let m = m.canonical();
            if canonical.contains(&m) {
                return Err(Error::DuplicateMode(m));
            }
            canonical.push(m);
        }
        let weights: Vec<f64> = canonical
            .iter()
            .map(|m| m.lambda().powf(-alpha / 2.0))
            .collect();
        let (k1, k2) = if kind == NoiseKind::Off {
            (0.0, 0.0)
        } else {
            let sum_sq: f64 = weights.iter().map(|q| q * q).sum();
            let max_q = weights.iter().copied().fold(0.0, f64::max);
            (sigma * sum_sq.sqrt(), sigma * max_q)
        };
        Ok(Self {
            kind,
            sigma,
            alpha,
            forced: canonical,
            weights,
            k1,
            k2,
        })
    }

    pub fn off() -> Self {
        Self {
            kind: NoiseKind::Off,
            sigma: 0.0,
            alpha: 2.0,
            forced: Vec::new(),
            weights: Vec::new(),
            k1: 0.0,
            k2: 0.0,
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn forced_modes(&self) -> &[Mode] {
        &self.forced
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of independent Brownian directions.
    pub fn directions(&self) -> usize {
        self.forced.len()
    }

    /// Sublinearity and H-Lipschitz constant.
    pub fn k1(&self) -> f64 {
        self.k1
    }

    /// V-Lipschitz constant.
    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn is_active(&self) -> bool {
        self.kind != NoiseKind::Off && self.sigma > 0.0 && !self.forced.is_empty()
    }

    /// Storage positions of the forced modes at truncation `trunc`.
    pub fn indices(&self, trunc: usize) -> Result<Vec<usize>> {
        self.forced
            .iter()
            .map(|&m| {
                mode_index(trunc, m).ok_or(Error::ModeOutOfRange {
                    kx: m.kx(),
                    ky: m.ky(),
                    trunc,
                })
            })
            .collect()
    }

    /// `g(t, u) dW`. The model is time-independent, `t` is accepted for
    /// signature parity with the time-dependent form.
    pub fn apply(&self, _t: f64, u: &SpectralField, dw: &[f64]) -> Result<SpectralField> {
        let mut out = SpectralField::zeros(u.trunc());
        let idx = self.indices(u.trunc())?;
        self.accumulate(&idx, u, dw, &mut out)?;
        Ok(out)
    }

    /// `out += g(u) dW` given precomputed storage indices.
    pub(crate) fn accumulate(
        &self,
        idx: &[usize],
        u: &SpectralField,
        dw: &[f64],
        out: &mut SpectralField,
    ) -> Result<()> {
        if dw.len() != self.directions() {
            return Err(Error::IncrementLength {
                got: dw.len(),
                expected: self.directions(),
            });
        }
        let amps = out.amps_mut();
        match self.kind {
            NoiseKind::Off => {}
            NoiseKind::Additive => {
                for ((&i, &q), &w) in idx.iter().zip(&self.weights).zip(dw) {
                    amps[i] += Complex64::new(self.sigma * q * w, 0.0);
                }
            }
            NoiseKind::DiagonalMultiplicative => {
                let ua = u.amps();
                for ((&i, &q), &w) in idx.iter().zip(&self.weights).zip(dw) {
                    amps[i] += ua[i] * (self.sigma * q * w);
                }
            }
        }
        Ok(())
    }

    /// Hilbert–Schmidt norms `‖g(t,u)‖_{L₂(U,H)}` and `‖g(t,u)‖_{L₂(U,V)}`.
    pub fn hs_norms(&self, _t: f64, u: &SpectralField) -> Result<HsNorms> {
        let idx = self.indices(u.trunc())?;
        let (mut h2, mut v2) = (0.0, 0.0);
        for ((&i, &q), m) in idx.iter().zip(&self.weights).zip(&self.forced) {
            let coef2 = match self.kind {
                NoiseKind::Off => 0.0,
                NoiseKind::Additive => (self.sigma * q).powi(2),
                NoiseKind::DiagonalMultiplicative => {
                    (self.sigma * q).powi(2) * u.amps()[i].norm_sqr()
                }
            };
            h2 += coef2;
            v2 += coef2 * m.lambda();
        }
        Ok(HsNorms {
            in_h: h2.sqrt(),
            in_v: v2.sqrt(),
        })
    }
}

/// Brownian increments for one path. Step `i` at refinement `r` is the sum
/// of `r` fine standard normals (fine steps `r*i .. r*i + r`) scaled by
/// `sqrt(dt / r)`, so coarse and fine discretizations with matching `dt * r`
/// products are driven by the same Brownian path.
#[derive(Clone, Debug)]
pub struct IncrementSource {
    stream: NormalStream,
    refine: u32,
    buf: Vec<f64>,
}

impl IncrementSource {
    pub fn new(seed: u64, path: u64, directions: usize, refine: u32) -> Self {
        Self {
            stream: NormalStream::new(seed, path, directions),
            refine: refine.max(1),
            buf: vec![0.0; directions],
        }
    }

    pub fn directions(&self) -> usize {
        self.stream.directions()
    }

    pub fn fill(&mut self, step: u64, dt: f64, out: &mut [f64]) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::NonPositiveStep(dt));
        }
        if out.len() != self.directions() {
            return Err(Error::IncrementLength {
                got: out.len(),
                expected: self.directions(),
            });
        }
        let r = u64::from(self.refine);
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..r {
            self.stream.fill_standard(step * r + j, &mut self.buf);
            for (o, z) in out.iter_mut().zip(&self.buf) {
                *o += z;
            }
        }
        let scale = (dt / r as f64).sqrt();
        out.iter_mut().for_each(|x| *x *= scale);
        Ok(())
    }
}

/// Gaussian increments with variance `dt` at address `(seed, path, step, ·)`.
pub fn sample_increments(
    seed: u64,
    path: u64,
    step: u64,
    directions: usize,
    dt: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; directions];
    IncrementSource::new(seed, path, directions, 1).fill(step, dt, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mode(kx: i32, ky: i32) -> Mode {
        Mode::new(kx, ky).unwrap()
    }

    fn forced() -> Vec<Mode> {
        vec![mode(1, 0), mode(0, 1), mode(1, 1), mode(2, -1)]
    }

    #[test]
    fn rejects_bad_step() {
        assert_eq!(
            sample_increments(1, 0, 0, 3, 0.0),
            Err(Error::NonPositiveStep(0.0))
        );
        assert!(sample_increments(1, 0, 0, 3, -1.0).is_err());
    }

    #[test]
    fn increments_are_deterministic() {
        let a = sample_increments(9, 4, 17, 5, 0.01).unwrap();
        let b = sample_increments(9, 4, 17, 5, 0.01).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_increments(9, 4, 18, 5, 0.01).unwrap());
    }

    #[test]
    fn increment_moments() {
        let dt = 0.01;
        let n = 100_000u64;
        let mut src = IncrementSource::new(5, 0, 1, 1);
        let mut buf = [0.0];
        let (mut s1, mut s2) = (0.0, 0.0);
        for step in 0..n {
            src.fill(step, dt, &mut buf).unwrap();
            s1 += buf[0];
            s2 += buf[0] * buf[0];
        }
        let nf = n as f64;
        let mean = s1 / nf;
        let var = s2 / nf - mean * mean;
        assert!(mean.abs() <= 4.0 * (dt / nf).sqrt(), "mean {mean}");
        assert!((var / dt - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn refined_increments_sum_fine_ones() {
        let dt = 0.02;
        let mut coarse = IncrementSource::new(3, 2, 2, 4);
        let mut fine = IncrementSource::new(3, 2, 2, 1);
        let mut c = [0.0; 2];
        let mut f = [0.0; 2];
        coarse.fill(5, dt, &mut c).unwrap();
        let mut sum = [0.0; 2];
        for j in 0..4 {
            fine.fill(20 + j, dt / 4.0, &mut f).unwrap();
            sum[0] += f[0];
            sum[1] += f[1];
        }
        assert!((c[0] - sum[0]).abs() < 1e-15 && (c[1] - sum[1]).abs() < 1e-15);
    }

    #[test]
    fn off_returns_zero() {
        let g = NoiseModel::new(NoiseKind::Off, 0.5, 2.0, forced()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = SpectralField::random(3, 1.0, &mut rng);
        assert!(g.apply(0.0, &u, &[1.0, 2.0, 3.0, 4.0]).unwrap().is_zero());
        let hs = g.hs_norms(0.0, &u).unwrap();
        assert_eq!((hs.in_h, hs.in_v), (0.0, 0.0));
    }

    #[test]
    fn additive_single_direction() {
        let g = NoiseModel::new(NoiseKind::Additive, 0.3, 2.0, forced()).unwrap();
        let u = SpectralField::zeros(3);
        let out = g.apply(0.0, &u, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        let q = 2f64.powf(-1.0);
        assert_eq!(out.get(mode(1, 1)).unwrap(), Complex64::new(0.3 * q, 0.0));
        assert!((out.norm_h2().sqrt() - 0.3 * q).abs() < 1e-15);
    }

    #[test]
    fn multiplicative_vanishes_at_origin() {
        let g = NoiseModel::new(NoiseKind::DiagonalMultiplicative, 0.3, 2.0, forced()).unwrap();
        let out = g
            .apply(0.0, &SpectralField::zeros(3), &[0.5, -1.0, 2.0, 0.1])
            .unwrap();
        assert!(out.is_zero());
    }

    #[test]
    fn increment_length_checked() {
        let g = NoiseModel::new(NoiseKind::Additive, 0.3, 2.0, forced()).unwrap();
        assert_eq!(
            g.apply(0.0, &SpectralField::zeros(3), &[1.0]),
            Err(Error::IncrementLength {
                got: 1,
                expected: 4
            })
        );
    }

    #[test]
    fn forced_mode_outside_truncation() {
        let g = NoiseModel::new(NoiseKind::Additive, 0.3, 2.0, vec![mode(3, 0)]).unwrap();
        assert!(matches!(
            g.apply(0.0, &SpectralField::zeros(2), &[1.0]),
            Err(Error::ModeOutOfRange { .. })
        ));
    }

    #[test]
    fn additive_hs_norms_by_direct_sum() {
        let (sigma, alpha) = (0.7, 2.5);
        let g = NoiseModel::new(NoiseKind::Additive, sigma, alpha, forced()).unwrap();
        let mut h2 = 0.0;
        let mut v2 = 0.0;
        for m in forced() {
            let lam = f64::from(m.kx() * m.kx() + m.ky() * m.ky());
            let q = lam.powf(-alpha / 2.0);
            h2 += q * q;
            v2 += lam * q * q;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..3 {
            let u = SpectralField::random(3, 5.0, &mut rng);
            let hs = g.hs_norms(0.3, &u).unwrap();
            assert!((hs.in_h - sigma * h2.sqrt()).abs() < 1e-14);
            assert!((hs.in_v - sigma * v2.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn multiplicative_hs_single_term() {
        let (sigma, alpha) = (0.7, 2.0);
        let g = NoiseModel::new(NoiseKind::DiagonalMultiplicative, sigma, alpha, forced()).unwrap();
        let j = mode(2, -1);
        let u = SpectralField::single(3, j, Complex64::new(1.0, 0.0)).unwrap();
        let hs = g.hs_norms(0.0, &u).unwrap();
        let q = 5f64.powf(-1.0);
        assert!((hs.in_h - sigma * q).abs() < 1e-15);
        assert!((hs.in_v - sigma * q * 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sublinearity_and_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [NoiseKind::Additive, NoiseKind::DiagonalMultiplicative] {
            let g = NoiseModel::new(kind, 1.3, 2.2, forced()).unwrap();
            let idx = g.indices(3).unwrap();
            for _ in 0..1000 {
                let scale = 10f64.powf(rng.random_range(-2.0..2.0));
                let x = SpectralField::random(3, scale, &mut rng);
                let y = SpectralField::random(3, scale, &mut rng);
                let t = rng.random_range(0.0..1.0);
                let hs = g.hs_norms(t, &x).unwrap();
                assert!(hs.in_h <= g.k1() * (1.0 + x.norm_h2().sqrt()) + 1e-12);
                // Column-wise differences g_k(x) - g_k(y), summed in H and V.
                let (mut dh, mut dv) = (0.0, 0.0);
                for (d, (&i, m)) in idx.iter().zip(g.forced_modes()).enumerate() {
                    let mut e = vec![0.0; g.directions()];
                    e[d] = 1.0;
                    let diff = &g.apply(t, &x, &e).unwrap() - &g.apply(t, &y, &e).unwrap();
                    let c = diff.amps()[i].norm_sqr();
                    dh += c;
                    dv += c * m.lambda();
                }
                let dxy = &x - &y;
                assert!(dh.sqrt() <= g.k1() * dxy.norm_h2().sqrt() + 1e-12);
                assert!(dv.sqrt() <= g.k2() * dxy.norm_v2().sqrt() + 1e-12);
                if kind == NoiseKind::Additive {
                    assert_eq!((dh, dv), (0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn linear_in_increment() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = NoiseModel::new(NoiseKind::DiagonalMultiplicative, 0.9, 2.0, forced()).unwrap();
        let u = SpectralField::random(3, 1.0, &mut rng);
        let w1 = [0.5, -0.25, 1.0, 2.0];
        let w2 = [-1.0, 0.75, 0.5, 0.125];
        let (a, b) = (2.0, -0.5);
        let combo: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| a * x + b * y).collect();
        let lhs = g.apply(0.0, &u, &combo).unwrap();
        let mut rhs = g.apply(0.0, &u, &w1).unwrap().scaled(a);
        rhs.axpy(b, &g.apply(0.0, &u, &w2).unwrap());
        for (l, r) in lhs.amps().iter().zip(rhs.amps()) {
            assert!((l - r).norm() <= 1e-15 * (1.0 + l.norm()));
        }
    }
}
