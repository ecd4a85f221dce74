//! Divergence-free Fourier basis on the 2π-periodic torus.
//!
//! A field is stored as one complex amplitude per canonical wavevector
//! (`kx > 0`, or `kx == 0 && ky > 0`) with `|kx|, |ky| <= N`. The amplitude
//! `a_k` parametrizes the real velocity field
//!
//! ```text
//! u(x) = (1/2π) Σ_{k canonical} [ û(k) e^{ik·x} + conj(û(k)) e^{-ik·x} ],
//! û(k) = a_k · k⊥/(|k|·√2),   k⊥ = (-ky, kx),
//! ```
//!
//! so the real and imaginary parts of `a_k` are coordinates along two
//! H-orthonormal real basis functions and `‖u‖_H² = Σ |a_k|²`. Every stored
//! field is divergence-free and real-valued by construction. The Stokes
//! operator is diagonal with eigenvalue `|k|²`, so the Poincaré constant is 1.

mod pseudo;

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub use pseudo::PseudoSpectral;

/// Integer wavevector of a Fourier mode. Never the zero vector.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    kx: i32,
    ky: i32,
}

impl Mode {
    pub fn new(kx: i32, ky: i32) -> Result<Self> {
        if kx == 0 && ky == 0 {
            return Err(Error::ZeroMode);
        }
        Ok(Self { kx, ky })
    }

    pub fn kx(self) -> i32 {
        self.kx
    }

    pub fn ky(self) -> i32 {
        self.ky
    }

    /// Stokes eigenvalue `|k|²`.
    pub fn lambda(self) -> f64 {
        f64::from(self.kx * self.kx + self.ky * self.ky)
    }

    pub fn linf(self) -> usize {
        self.kx.unsigned_abs().max(self.ky.unsigned_abs()) as usize
    }

    pub fn is_canonical(self) -> bool {
        self.kx > 0 || (self.kx == 0 && self.ky > 0)
    }

    pub fn neg(self) -> Self {
        Self {
            kx: -self.kx,
            ky: -self.ky,
        }
    }

    /// Representative of `{k, -k}` in the stored half plane.
    pub fn canonical(self) -> Self {
        if self.is_canonical() {
            self
        } else {
            self.neg()
        }
    }

    /// Unit divergence-free direction `k⊥/|k|`.
    pub fn perp_unit(self) -> [f64; 2] {
        let norm = self.lambda().sqrt();
        [-f64::from(self.ky) / norm, f64::from(self.kx) / norm]
    }

    fn fits(self, trunc: usize) -> bool {
        self.linf() <= trunc
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.kx, self.ky)
    }
}

/// Number of canonical modes at truncation level `trunc`.
pub fn mode_count(trunc: usize) -> usize {
    let side = 2 * trunc + 1;
    (side * side - 1) / 2
}

/// Position of a canonical mode in the storage order, if it fits the truncation.
pub fn mode_index(trunc: usize, mode: Mode) -> Option<usize> {
    if !mode.is_canonical() || !mode.fits(trunc) {
        return None;
    }
    let n = trunc as i32;
    let idx = if mode.kx == 0 {
        mode.ky - 1
    } else {
        n + (mode.kx - 1) * (2 * n + 1) + (mode.ky + n)
    };
    Some(idx as usize)
}

/// Canonical modes in storage order.
pub fn modes(trunc: usize) -> Vec<Mode> {
    let n = trunc as i32;
    let mut out = Vec::with_capacity(mode_count(trunc));
    for ky in 1..=n {
        out.push(Mode { kx: 0, ky });
    }
    for kx in 1..=n {
        for ky in -n..=n {
            out.push(Mode { kx, ky });
        }
    }
    out
}

/// Divergence-free velocity field on the truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    trunc: usize,
    amps: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(trunc: usize) -> Self {
        Self {
            trunc,
            amps: vec![Complex64::new(0.0, 0.0); mode_count(trunc)],
        }
    }

    /// Builds a field from `(mode, amplitude)` pairs. A non-canonical mode `-k`
    /// with amplitude `b` describes the same real field as `k` with `-conj(b)`.
    pub fn from_modes<I>(trunc: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Mode, Complex64)>,
    {
        let mut field = Self::zeros(trunc);
        let mut seen = vec![false; field.amps.len()];
        for (mode, amp) in entries {
            let idx = field.index_of(mode)?;
            if seen[idx] {
                return Err(Error::DuplicateMode(mode.canonical()));
            }
            seen[idx] = true;
            field.amps[idx] = if mode.is_canonical() { amp } else { -amp.conj() };
        }
        Ok(field)
    }

    pub fn single(trunc: usize, mode: Mode, amp: Complex64) -> Result<Self> {
        Self::from_modes(trunc, [(mode, amp)])
    }

    /// Random field with Gaussian amplitudes damped like `scale / λ(k)`.
    pub fn random<R: Rng + ?Sized>(trunc: usize, scale: f64, rng: &mut R) -> Self {
        let amps = modes(trunc)
            .into_iter()
            .map(|m| {
                let (re, im) = (gauss(rng), gauss(rng));
                Complex64::new(re, im) * (scale / m.lambda())
            })
            .collect();
        Self { trunc, amps }
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub(crate) fn from_amps(trunc: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), mode_count(trunc));
        Self { trunc, amps }
    }

    fn index_of(&self, mode: Mode) -> Result<usize> {
        mode_index(self.trunc, mode.canonical()).ok_or(Error::ModeOutOfRange {
            kx: mode.kx,
            ky: mode.ky,
            trunc: self.trunc,
        })
    }

    /// Amplitude seen from `mode` (conjugate rule applied for `-k`).
    pub fn get(&self, mode: Mode) -> Result<Complex64> {
        let a = self.amps[self.index_of(mode)?];
        Ok(if mode.is_canonical() { a } else { -a.conj() })
    }

    pub fn set(&mut self, mode: Mode, amp: Complex64) -> Result<()> {
        let idx = self.index_of(mode)?;
        self.amps[idx] = if mode.is_canonical() { amp } else { -amp.conj() };
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (Mode, Complex64)> + '_ {
        modes(self.trunc).into_iter().zip(self.amps.iter().copied())
    }

    pub fn is_zero(&self) -> bool {
        self.amps.iter().all(|a| a.norm_sqr() == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn check_same_trunc(&self, other: &Self) -> Result<()> {
        if self.trunc != other.trunc {
            return Err(Error::TruncationMismatch {
                left: self.trunc,
                right: other.trunc,
            });
        }
        Ok(())
    }

    /// Real H inner product `∫ u·v dx`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    /// V inner product `∫ ∇u:∇v dx`.
    pub fn inner_v(&self, other: &Self) -> f64 {
        modes(self.trunc)
            .iter()
            .zip(self.amps.iter().zip(&other.amps))
            .map(|(m, (a, b))| m.lambda() * (a * b.conj()).re)
            .sum()
    }

    pub fn norm_h2(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm_v2(&self) -> f64 {
        modes(self.trunc)
            .iter()
            .zip(&self.amps)
            .map(|(m, a)| m.lambda() * a.norm_sqr())
            .sum()
    }

    pub fn norm_a2(&self) -> f64 {
        modes(self.trunc)
            .iter()
            .zip(&self.amps)
            .map(|(m, a)| m.lambda() * m.lambda() * a.norm_sqr())
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            trunc: self.trunc,
            amps: self.amps.iter().map(|a| a * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        debug_assert_eq!(self.trunc, other.trunc);
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += b * s;
        }
    }

    /// Vector coefficients `a_k k⊥/|k|` keyed by canonical mode.
    pub fn to_raw(&self) -> RawField {
        self.iter()
            .map(|(m, a)| {
                let e = m.perp_unit();
                (m, [a * e[0], a * e[1]])
            })
            .collect()
    }

    /// Full Fourier coefficients `û(k)` for every `k` in `[-N, N]²`, laid out
    /// row-major with index `(kx + N) * (2N + 1) + (ky + N)`.
    pub(crate) fn full_coeffs(&self) -> Vec<[Complex64; 2]> {
        let n = self.trunc as i32;
        let side = (2 * n + 1) as usize;
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![[zero, zero]; side * side];
        for (m, a) in self.iter() {
            let e = m.perp_unit();
            let c = a / SQRT_2;
            let coeff = [c * e[0], c * e[1]];
            out[full_index(n, m.kx, m.ky)] = coeff;
            out[full_index(n, -m.kx, -m.ky)] = [coeff[0].conj(), coeff[1].conj()];
        }
        out
    }

    /// Samples both velocity components on an `m × m` grid of `[0, 2π)²`,
    /// indexed `ix * m + iy`. The values are returned complex so callers can
    /// check that the imaginary parts vanish.
    pub fn to_physical(&self, m: usize) -> Result<[Vec<Complex64>; 2]> {
        if m < 2 * self.trunc + 1 {
            return Err(Error::InvalidParameter(format!(
                "grid {m} too coarse for truncation {}",
                self.trunc
            )));
        }
        let mut plan = pseudo::Fft2::new(m);
        let n = self.trunc as i32;
        let full = self.full_coeffs();
        let mut comps = [
            vec![Complex64::new(0.0, 0.0); m * m],
            vec![Complex64::new(0.0, 0.0); m * m],
        ];
        for kx in -n..=n {
            for ky in -n..=n {
                let c = full[full_index(n, kx, ky)];
                let slot = wrap(kx, m) * m + wrap(ky, m);
                comps[0][slot] = c[0] / (2.0 * PI);
                comps[1][slot] = c[1] / (2.0 * PI);
            }
        }
        for comp in comps.iter_mut() {
            plan.inverse(comp);
        }
        Ok(comps)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;

    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;

    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

pub(crate) fn full_index(n: i32, kx: i32, ky: i32) -> usize {
    ((kx + n) * (2 * n + 1) + (ky + n)) as usize
}

pub(crate) fn wrap(k: i32, m: usize) -> usize {
    k.rem_euclid(m as i32) as usize
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Vector-valued Fourier coefficients before projection, keyed by mode.
/// Entries follow the same `√2` scaling as [`SpectralField::to_raw`].
pub type RawField = BTreeMap<Mode, [Complex64; 2]>;

fn canonical_raw(raw: &RawField) -> Result<RawField> {
    let mut out = RawField::new();
    for (&mode, v) in raw {
        let (key, val) = if mode.is_canonical() {
            (mode, *v)
        } else {
            (mode.neg(), [v[0].conj(), v[1].conj()])
        };
        if out.insert(key, val).is_some() {
            return Err(Error::DuplicateMode(key));
        }
    }
    Ok(out)
}

/// Real L² inner product of two raw vector fields.
pub fn raw_inner(a: &RawField, b: &RawField) -> Result<f64> {
    let (a, b) = (canonical_raw(a)?, canonical_raw(b)?);
    Ok(a.iter()
        .filter_map(|(m, va)| {
            b.get(m)
                .map(|vb| (va[0] * vb[0].conj() + va[1] * vb[1].conj()).re)
        })
        .sum())
}

/// Applies `I - k kᵀ/|k|²` to every coefficient, keeping the keys.
pub fn project_leray_raw(raw: &RawField) -> Result<RawField> {
    raw.iter()
        .map(|(&mode, v)| {
            if mode.kx == 0 && mode.ky == 0 {
                return Err(Error::ZeroMode);
            }
            let (kx, ky) = (f64::from(mode.kx), f64::from(mode.ky));
            let kv = (v[0] * kx + v[1] * ky) / mode.lambda();
            Ok((mode, [v[0] - kv * kx, v[1] - kv * ky]))
        })
        .collect()
}

/// Leray projection onto divergence-free fields, expressed on the basis.
pub fn project_leray(trunc: usize, raw: &RawField) -> Result<SpectralField> {
    let raw = canonical_raw(raw)?;
    let mut field = SpectralField::zeros(trunc);
    for (mode, v) in raw {
        let e = mode.perp_unit();
        field.set(mode, v[0] * e[0] + v[1] * e[1])?;
    }
    Ok(field)
}

/// Stokes operator `A = -P_H Δ`.
pub fn apply_stokes(u: &SpectralField) -> SpectralField {
    let amps = modes(u.trunc)
        .iter()
        .zip(&u.amps)
        .map(|(m, a)| a * m.lambda())
        .collect();
    SpectralField::from_amps(u.trunc, amps)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Norms {
    pub h: f64,
    pub v: f64,
    pub a: f64,
}

pub fn sobolev_norms(u: &SpectralField) -> Norms {
    Norms {
        h: u.norm_h2().sqrt(),
        v: u.norm_v2().sqrt(),
        a: u.norm_a2().sqrt(),
    }
}

/// `‖∇×u‖_H`, summed from the scalar vorticity coefficients `i k × û(k)`.
pub fn vorticity_norm(u: &SpectralField) -> f64 {
    let n = u.trunc as i32;
    let full = u.full_coeffs();
    let mut sum = 0.0;
    for kx in -n..=n {
        for ky in -n..=n {
            let c = full[full_index(n, kx, ky)];
            let omega = Complex64::i() * (c[1] * f64::from(kx) - c[0] * f64::from(ky));
            sum += omega.norm_sqr();
        }
    }
    sum.sqrt()
}

/// Galerkin-truncated `B(u, v) = P_H (u·∇)v` by exact convolution over the
/// stored modes.
pub fn nonlinear_b(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.check_same_trunc(v)?;
    let n = u.trunc as i32;
    let uf = u.full_coeffs();
    let vf = v.full_coeffs();
    let scale = SQRT_2 / (2.0 * PI);
    let amps = modes(u.trunc)
        .into_iter()
        .map(|k| {
            let mut w = [Complex64::new(0.0, 0.0); 2];
            for qx in (k.kx - n).max(-n)..=(k.kx + n).min(n) {
                for qy in (k.ky - n).max(-n)..=(k.ky + n).min(n) {
                    let p = uf[full_index(n, k.kx - qx, k.ky - qy)];
                    let q = vf[full_index(n, qx, qy)];
                    let s = Complex64::i() * (p[0] * f64::from(qx) + p[1] * f64::from(qy));
                    w[0] += s * q[0];
                    w[1] += s * q[1];
                }
            }
            let e = k.perp_unit();
            (w[0] * e[0] + w[1] * e[1]) * scale
        })
        .collect();
    Ok(SpectralField::from_amps(u.trunc, amps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn mode(kx: i32, ky: i32) -> Mode {
        Mode::new(kx, ky).unwrap()
    }

    #[test]
    fn storage_order_matches_index() {
        for n in 1..6 {
            let all = modes(n);
            assert_eq!(all.len(), mode_count(n));
            for (i, m) in all.iter().enumerate() {
                assert_eq!(mode_index(n, *m), Some(i));
            }
        }
        assert_eq!(mode_index(2, mode(-1, 0)), None);
        assert_eq!(mode_index(2, mode(3, 0)), None);
    }

    #[test]
    fn zero_mode_rejected() {
        assert_eq!(Mode::new(0, 0), Err(Error::ZeroMode));
        let mut raw = RawField::new();
        raw.insert(Mode { kx: 0, ky: 0 }, [c(1.0), c(0.0)]);
        assert_eq!(project_leray_raw(&raw), Err(Error::ZeroMode));
    }

    #[test]
    fn gradients_are_annihilated() {
        let raw: RawField = modes(3)
            .into_iter()
            .map(|m| (m, [c(f64::from(m.kx)), c(f64::from(m.ky))]))
            .collect();
        assert!(project_leray(3, &raw).unwrap().is_zero());
    }

    #[test]
    fn divergence_free_input_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = SpectralField::random(3, 1.0, &mut rng);
        let back = project_leray(3, &u.to_raw()).unwrap();
        for (a, b) in u.amps().iter().zip(back.amps()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn projector_matches_hand_matrix() {
        // k = (1, 2): I - kkᵀ/5 applied to (1, 0) gives (4/5, -2/5), whose
        // component along k⊥/|k| = (-2, 1)/√5 is -2/√5.
        let k = mode(1, 2);
        let mut raw = RawField::new();
        raw.insert(k, [c(1.0), c(0.0)]);
        let p = project_leray_raw(&raw).unwrap()[&k];
        assert!((p[0].re - 0.8).abs() < 1e-15 && (p[1].re + 0.4).abs() < 1e-15);
        let f = project_leray(2, &raw).unwrap();
        assert!((f.get(k).unwrap().re + 2.0 / 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn conjugate_key_is_folded() {
        let mut raw = RawField::new();
        raw.insert(mode(-1, 0), [c(0.0), Complex64::new(1.0, 2.0)]);
        let f = project_leray(1, &raw).unwrap();
        // (-1,0)⊥/1 = (0,-1): amplitude on -k is -(1+2i); canonical is -conj of that.
        assert_eq!(f.get(mode(1, 0)).unwrap(), Complex64::new(1.0, -2.0));
        raw.insert(mode(1, 0), [c(0.0), c(1.0)]);
        assert!(matches!(
            project_leray(1, &raw),
            Err(Error::DuplicateMode(_))
        ));
    }

    #[test]
    fn stokes_examples() {
        let u = SpectralField::single(3, mode(1, 0), c(2.0)).unwrap();
        assert_eq!(apply_stokes(&u).get(mode(1, 0)).unwrap(), c(2.0));
        let u = SpectralField::single(3, mode(2, 1), c(1.0)).unwrap();
        let au = apply_stokes(&u);
        assert_eq!(au.get(mode(2, 1)).unwrap(), c(5.0));
        assert_eq!(au.trunc(), 3);
    }

    #[test]
    fn stokes_quadratic_form_is_v_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let u = SpectralField::random(4, 1.0, &mut rng);
            let lhs = apply_stokes(&u).inner(&u);
            let mut direct = 0.0;
            for (m, a) in u.iter() {
                direct += f64::from(m.kx * m.kx + m.ky * m.ky) * (a.re * a.re + a.im * a.im);
            }
            assert!((lhs - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn norm_examples() {
        let z = sobolev_norms(&SpectralField::zeros(2));
        assert_eq!((z.h, z.v, z.a), (0.0, 0.0, 0.0));
        let n = sobolev_norms(&SpectralField::single(2, mode(1, 0), c(2.0)).unwrap());
        assert_eq!((n.h, n.v, n.a), (2.0, 2.0, 2.0));
        let n = sobolev_norms(&SpectralField::single(4, mode(3, 4), c(1.0)).unwrap());
        assert_eq!((n.h, n.v, n.a), (1.0, 5.0, 25.0));
    }

    #[test]
    fn vorticity_examples() {
        assert_eq!(vorticity_norm(&SpectralField::zeros(3)), 0.0);
        let u = SpectralField::single(3, mode(1, 0), c(2.0)).unwrap();
        assert!((vorticity_norm(&u) - 2.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u = SpectralField::random(5, 3.0, &mut rng);
            let v = sobolev_norms(&u).v;
            assert!((vorticity_norm(&u) - v).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn shear_flow_is_steady() {
        let u = SpectralField::single(3, mode(1, 0), Complex64::new(0.7, -0.2)).unwrap();
        let b = nonlinear_b(&u, &u).unwrap();
        assert!(b.amps().iter().all(|a| a.norm() < 1e-15));
    }

    #[test]
    fn truncation_mismatch() {
        let u = SpectralField::zeros(2);
        let v = SpectralField::zeros(3);
        assert!(matches!(
            nonlinear_b(&u, &v),
            Err(Error::TruncationMismatch { .. })
        ));
    }

    #[test]
    fn cross_shear_matches_hand_convolution() {
        // u = (0, √2 cos x)/2π and v = (-√2 Re(b e^{iy}), 0)/2π with b = 0.5+0.25i.
        // By hand, (u·∇)v = (cos x sin y + 0.5 cos x cos y, 0)/(2π)², whose
        // projections onto the (1,1) and (1,-1) directions are read off directly.
        let u = SpectralField::single(2, mode(1, 0), c(1.0)).unwrap();
        let v = SpectralField::single(2, mode(0, 1), Complex64::new(0.5, 0.25)).unwrap();
        let b = nonlinear_b(&u, &v).unwrap();
        let expect_pp = Complex64::new(-0.125, 0.25) / (2.0 * PI);
        let expect_pm = Complex64::new(0.125, 0.25) / (2.0 * PI);
        for (m, got) in b.iter() {
            let expect = match (m.kx, m.ky) {
                (1, 1) => expect_pp,
                (1, -1) => expect_pm,
                _ => c(0.0),
            };
            assert!((got - expect).norm() < 1e-15, "{m}: {got} vs {expect}");
        }
    }

    #[test]
    fn physical_field_is_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = SpectralField::random(8, 1.0, &mut rng);
        let [ux, uy] = u.to_physical(32).unwrap();
        let max_re = ux.iter().chain(&uy).map(|z| z.re.abs()).fold(0.0, f64::max);
        let max_im = ux.iter().chain(&uy).map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(max_im <= 1e-12 * max_re);
        // Parseval: mean of |u|² over the grid times area equals ‖u‖_H².
        let energy: f64 = ux.iter().chain(&uy).map(|z| z.re * z.re).sum::<f64>()
            * (2.0 * PI / 32.0).powi(2);
        assert!((energy - u.norm_h2()).abs() < 1e-12 * u.norm_h2());
    }
}
