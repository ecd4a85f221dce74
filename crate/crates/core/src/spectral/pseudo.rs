//! Transform-based evaluation of `B(u, v)` on a dealiased grid.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{full_index, modes, wrap, Mode, SpectralField};
use crate::error::Result;

/// Unnormalized 2D complex FFT on an `m × m` row-major grid.
pub(crate) struct Fft2 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    column: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub(crate) fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            m,
            fwd,
            inv,
            column: vec![Complex64::new(0.0, 0.0); m],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub(crate) fn forward(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.fwd);
        self.run(plan.as_ref(), data);
    }

    pub(crate) fn inverse(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.inv);
        self.run(plan.as_ref(), data);
    }

    fn run(&mut self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        let m = self.m;
        debug_assert_eq!(data.len(), m * m);
        for row in data.chunks_exact_mut(m) {
            plan.process_with_scratch(row, &mut self.scratch);
        }
        for iy in 0..m {
            for ix in 0..m {
                self.column[ix] = data[ix * m + iy];
            }
            plan.process_with_scratch(&mut self.column, &mut self.scratch);
            for ix in 0..m {
                data[ix * m + iy] = self.column[ix];
            }
        }
    }
}

/// Reusable workspace for the pseudo-spectral product. The grid has
/// `3N + 1` points per side, so every product of two truncated modes lands
/// on a distinct grid wavenumber and the Galerkin projection is exact.
pub struct PseudoSpectral {
    trunc: usize,
    m: usize,
    fft: Fft2,
    modes: Vec<Mode>,
    bufs: [Vec<Complex64>; 6],
}

impl PseudoSpectral {
    pub fn new(trunc: usize) -> Self {
        let m = 3 * trunc + 1;
        let zero = vec![Complex64::new(0.0, 0.0); m * m];
        Self {
            trunc,
            m,
            fft: Fft2::new(m),
            modes: modes(trunc),
            bufs: std::array::from_fn(|_| zero.clone()),
        }
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    /// Same result as [`super::nonlinear_b`] up to rounding.
    pub fn nonlinear_b(&mut self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        u.check_same_trunc(v)?;
        let mut out = SpectralField::zeros(u.trunc());
        self.nonlinear_b_into(u, v, &mut out)?;
        Ok(out)
    }

    pub(crate) fn nonlinear_b_into(
        &mut self,
        u: &SpectralField,
        v: &SpectralField,
        out: &mut SpectralField,
    ) -> Result<()> {
        u.check_same_trunc(v)?;
        if u.trunc() != self.trunc {
            return Err(crate::error::Error::TruncationMismatch {
                left: u.trunc(),
                right: self.trunc,
            });
        }
        let n = self.trunc as i32;
        let m = self.m;
        let uf = u.full_coeffs();
        let vf = v.full_coeffs();
        for buf in self.bufs.iter_mut() {
            buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        }
        let norm = 1.0 / (2.0 * PI);
        for kx in -n..=n {
            for ky in -n..=n {
                let idx = full_index(n, kx, ky);
                let slot = wrap(kx, m) * m + wrap(ky, m);
                let (uc, vc) = (uf[idx], vf[idx]);
                let ikx = Complex64::new(0.0, f64::from(kx)) * norm;
                let iky = Complex64::new(0.0, f64::from(ky)) * norm;
                self.bufs[0][slot] = uc[0] * norm;
                self.bufs[1][slot] = uc[1] * norm;
                self.bufs[2][slot] = vc[0] * ikx;
                self.bufs[3][slot] = vc[0] * iky;
                self.bufs[4][slot] = vc[1] * ikx;
                self.bufs[5][slot] = vc[1] * iky;
            }
        }
        for buf in self.bufs.iter_mut() {
            self.fft.inverse(buf);
        }
        // Products are real up to rounding; drop the imaginary residue.
        let [ux, uy, dxvx, dyvx, dxvy, dyvy] = &mut self.bufs;
        for i in 0..m * m {
            let (a, b) = (ux[i].re, uy[i].re);
            let wx = a * dxvx[i].re + b * dyvx[i].re;
            let wy = a * dxvy[i].re + b * dyvy[i].re;
            dxvx[i] = Complex64::new(wx, 0.0);
            dxvy[i] = Complex64::new(wy, 0.0);
        }
        self.fft.forward(&mut self.bufs[2]);
        self.fft.forward(&mut self.bufs[4]);
        let scale = SQRT_2 * 2.0 * PI / (m * m) as f64;
        for (k, amp) in self.modes.iter().zip(out.amps_mut()) {
            let slot = wrap(k.kx(), m) * m + wrap(k.ky(), m);
            let e = k.perp_unit();
            *amp = (self.bufs[2][slot] * e[0] + self.bufs[4][slot] * e[1]) * scale;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::nonlinear_b;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_with_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 4, 8] {
            let mut fast = PseudoSpectral::new(n);
            for _ in 0..5 {
                let u = SpectralField::random(n, 2.0, &mut rng);
                let v = SpectralField::random(n, 2.0, &mut rng);
                let exact = nonlinear_b(&u, &v).unwrap();
                let quick = fast.nonlinear_b(&u, &v).unwrap();
                let diff = (&exact - &quick).norm_h2().sqrt();
                assert!(diff <= 1e-10 * exact.norm_h2().sqrt(), "N={n}: {diff}");
            }
        }
    }
}
