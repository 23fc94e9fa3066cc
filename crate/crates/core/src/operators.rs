//! Spectral grid and differential operators.
//!
//! Axes are stored slowest first, so a 2D array has shape `[ny, nx]` and a
//! 3D array `[nz, ny, nx]`. Vector fields are ordered by component
//! (`x`, `y`, `z`); component `c` differentiates along array axis
//! `dims - 1 - c`.
//!
//! Sign conventions: `ω = ∂x uy − ∂y ux` and `u = (∂y ψ, −∂x ψ)`, hence
//! `ω̂ = |k|² ψ̂`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::{self, FftPlan};

pub type SpectField = Vec<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct SpectralGrid {
    shape: Vec<usize>,
    lengths: Vec<f64>,
    dealias_coef: f64,
    plan: Arc<FftPlan>,
    k_axis: Vec<Vec<f64>>,
    // wavenumber component per spectral mode, indexed by vector component
    k_comp: Vec<Vec<f64>>,
    k_sq: Vec<f64>,
    mask: Vec<bool>,
    weights: Vec<f64>,
    nyquist: Vec<bool>,
}

/// Builds the grid for physical extents `shape` and domain `lengths`, both
/// in array-axis order.
pub fn make_grid(shape: &[usize], lengths: &[f64], dealias_coef: f64) -> Result<SpectralGrid> {
    fft::check_shape(shape).map_err(|e| Error::Config(e.to_string()))?;
    if lengths.len() != shape.len() {
        return Err(Error::Config(format!(
            "{} extents but {} lengths",
            shape.len(),
            lengths.len()
        )));
    }
    if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::Config(format!("domain length must be positive, got {l}")));
    }
    if !(dealias_coef > 0.0 && dealias_coef <= 1.0) {
        return Err(Error::Config(format!(
            "dealiasing coefficient must lie in (0, 1], got {dealias_coef}"
        )));
    }
    let plan = fft::plan(shape)?;
    let dims = shape.len();
    let spect_shape = plan.spect_shape().to_vec();

    let k_axis: Vec<Vec<f64>> = (0..dims)
        .map(|a| {
            let dk = 2.0 * PI / lengths[a];
            let n = shape[a] as i64;
            (0..spect_shape[a] as i64)
                .map(|i| {
                    let signed = if a == dims - 1 || i < n / 2 { i } else { i - n };
                    signed as f64 * dk
                })
                .collect()
        })
        .collect();
    let k_max: Vec<f64> = (0..dims)
        .map(|a| (shape[a] / 2) as f64 * 2.0 * PI / lengths[a])
        .collect();

    let len = plan.spect_len();
    let mut k_comp = vec![vec![0.0; len]; dims];
    let mut k_sq = vec![0.0; len];
    let mut mask = vec![true; len];
    let mut weights = vec![2.0; len];
    let mut nyquist = vec![false; len];
    let mut idx = vec![0usize; dims];
    for flat in 0..len {
        let mut rem = flat;
        for a in (0..dims).rev() {
            idx[a] = rem % spect_shape[a];
            rem /= spect_shape[a];
        }
        for a in 0..dims {
            let k = k_axis[a][idx[a]];
            k_comp[dims - 1 - a][flat] = k;
            k_sq[flat] += k * k;
            if k.abs() > dealias_coef * k_max[a] * (1.0 + 1e-12) {
                mask[flat] = false;
            }
            if idx[a] == shape[a] / 2 {
                nyquist[flat] = true;
            }
        }
        let last = idx[dims - 1];
        if last == 0 || last == shape[dims - 1] / 2 {
            weights[flat] = 1.0;
        }
    }

    Ok(SpectralGrid {
        shape: shape.to_vec(),
        lengths: lengths.to_vec(),
        dealias_coef,
        plan,
        k_axis,
        k_comp,
        k_sq,
        mask,
        weights,
        nyquist,
    })
}

impl SpectralGrid {
    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spect_shape(&self) -> &[usize] {
        self.plan.spect_shape()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn dealias_coef(&self) -> f64 {
        self.dealias_coef
    }

    pub fn plan(&self) -> &FftPlan {
        &self.plan
    }

    pub fn phys_len(&self) -> usize {
        self.plan.phys_len()
    }

    pub fn spect_len(&self) -> usize {
        self.plan.spect_len()
    }

    /// Signed wavenumbers along array axis `axis` (stored half on the last axis).
    pub fn k_axis(&self, axis: usize) -> &[f64] {
        &self.k_axis[axis]
    }

    /// Wavenumber component `c` (0 = x) for every spectral mode.
    pub fn k_component(&self, c: usize) -> &[f64] {
        &self.k_comp[c]
    }

    pub fn k_sq(&self) -> &[f64] {
        &self.k_sq
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.mask
    }

    /// Hermitian multiplicity of each stored mode (1 on the self-conjugate
    /// planes of the last axis, 2 elsewhere).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Grid spacing along vector component `c`.
    pub fn dx(&self, c: usize) -> f64 {
        let a = self.dims() - 1 - c;
        self.lengths[a] / self.shape[a] as f64
    }

    /// Physical coordinate of every grid point along component `c`.
    pub fn coords(&self, c: usize) -> Vec<f64> {
        let dims = self.dims();
        let a = dims - 1 - c;
        let stride: usize = self.shape[a + 1..].iter().product();
        let dx = self.dx(c);
        (0..self.phys_len())
            .map(|flat| ((flat / stride) % self.shape[a]) as f64 * dx)
            .collect()
    }

    /// Width of the shells used for isotropic spectra.
    pub fn shell_width(&self) -> f64 {
        2.0 * PI / self.lengths.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn shell_index(&self, mode: usize) -> usize {
        (self.k_sq[mode].sqrt() / self.shell_width()).round() as usize
    }

    pub fn n_shells(&self) -> usize {
        (0..self.spect_len()).map(|m| self.shell_index(m)).max().unwrap_or(0) + 1
    }

    pub fn forward(&self, field: &[f64]) -> Result<SpectField> {
        self.plan.forward_vec(field)
    }

    pub fn inverse(&self, coefs: &[Complex64]) -> Result<Vec<f64>> {
        self.plan.inverse_vec(coefs)
    }

    fn check(&self, field: &[Complex64]) -> Result<()> {
        if field.len() != self.spect_len() {
            return Err(Error::Shape(format!(
                "spectral field has {} values, grid {:?} expects {}",
                field.len(),
                self.shape,
                self.spect_len()
            )));
        }
        Ok(())
    }

    fn check_vector(&self, field: &[SpectField]) -> Result<()> {
        if field.len() != self.dims() {
            return Err(Error::Shape(format!(
                "vector field has {} components on a {}D grid",
                field.len(),
                self.dims()
            )));
        }
        field.iter().try_for_each(|c| self.check(c))
    }

    pub fn dealias(&self, field: &mut [Complex64]) -> Result<()> {
        self.check(field)?;
        for (c, &keep) in field.iter_mut().zip(&self.mask) {
            if !keep {
                *c = ZERO;
            }
        }
        Ok(())
    }

    /// `Σ w |f|²`, the mean square of the physical field.
    pub fn mean_square(&self, field: &[Complex64]) -> f64 {
        field
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * c.norm_sqr())
            .sum()
    }

    /// `Σ w Re(a* b)`, the mean of the product of the physical fields.
    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| w * (x.conj() * y).re)
            .sum()
    }

    pub fn gradient(&self, field: &[Complex64]) -> Result<Vec<SpectField>> {
        self.check(field)?;
        Ok((0..self.dims())
            .map(|c| {
                field
                    .iter()
                    .zip(&self.k_comp[c])
                    .map(|(f, k)| I * k * f)
                    .collect()
            })
            .collect())
    }

    pub fn divergence(&self, field: &[SpectField]) -> Result<SpectField> {
        self.check_vector(field)?;
        let mut out = vec![ZERO; self.spect_len()];
        for (c, comp) in field.iter().enumerate() {
            for ((o, f), k) in out.iter_mut().zip(comp).zip(&self.k_comp[c]) {
                *o += I * k * f;
            }
        }
        Ok(out)
    }

    pub fn curl2d(&self, ux: &[Complex64], uy: &[Complex64]) -> Result<SpectField> {
        if self.dims() != 2 {
            return Err(Error::Shape(format!("curl2d on a {}D grid", self.dims())));
        }
        self.check(ux)?;
        self.check(uy)?;
        let (kx, ky) = (&self.k_comp[0], &self.k_comp[1]);
        Ok((0..self.spect_len())
            .map(|m| I * (kx[m] * uy[m] - ky[m] * ux[m]))
            .collect())
    }

    pub fn curl3d(&self, u: &[SpectField]) -> Result<Vec<SpectField>> {
        if self.dims() != 3 {
            return Err(Error::Shape(format!("curl3d on a {}D grid", self.dims())));
        }
        self.check_vector(u)?;
        let k = &self.k_comp;
        let n = self.spect_len();
        let mut out = vec![vec![ZERO; n]; 3];
        for m in 0..n {
            let (ux, uy, uz) = (u[0][m], u[1][m], u[2][m]);
            let (kx, ky, kz) = (k[0][m], k[1][m], k[2][m]);
            out[0][m] = I * (ky * uz - kz * uy);
            out[1][m] = I * (kz * ux - kx * uz);
            out[2][m] = I * (kx * uy - ky * ux);
        }
        Ok(out)
    }

    /// Leray projection: removes the component of `u` parallel to `k`.
    pub fn project_divfree(&self, u: &mut [SpectField]) -> Result<()> {
        if self.dims() < 2 {
            return Err(Error::Shape("projection needs a 2D or 3D grid".into()));
        }
        self.check_vector(u)?;
        let dims = self.dims();
        for m in 0..self.spect_len() {
            let k2 = self.k_sq[m];
            if k2 == 0.0 {
                continue;
            }
            let mut k_dot_u = ZERO;
            for c in 0..dims {
                k_dot_u += self.k_comp[c][m] * u[c][m];
            }
            let coef = k_dot_u / k2;
            for c in 0..dims {
                u[c][m] -= self.k_comp[c][m] * coef;
            }
        }
        Ok(())
    }

    /// Stream-function inversion; the mean flow (k = 0) is set to zero.
    pub fn velocity_from_vorticity2d(&self, rot: &[Complex64]) -> Result<(SpectField, SpectField)> {
        if self.dims() != 2 {
            return Err(Error::Shape(format!(
                "velocity from vorticity needs a 2D grid, got {}D",
                self.dims()
            )));
        }
        self.check(rot)?;
        let n = self.spect_len();
        let mut ux = vec![ZERO; n];
        let mut uy = vec![ZERO; n];
        let (kx, ky) = (&self.k_comp[0], &self.k_comp[1]);
        for m in 0..n {
            let k2 = self.k_sq[m];
            if k2 == 0.0 {
                continue;
            }
            let psi = rot[m] / k2;
            ux[m] = I * ky[m] * psi;
            uy[m] = -I * kx[m] * psi;
        }
        Ok((ux, uy))
    }

    /// Random real field supported on `k_lo ≤ |k| ≤ k_hi`, normalized to
    /// unit mean square. Phases are uniform, magnitudes start equal.
    pub fn random_field(&self, seed: u64, band: [f64; 2]) -> Result<SpectField> {
        let [k_lo, k_hi] = band;
        if !(k_lo >= 0.0 && k_lo < k_hi) {
            return Err(Error::Config(format!("empty wavenumber band [{k_lo}, {k_hi}]")));
        }
        let in_band = |m: usize| {
            let k = self.k_sq[m].sqrt();
            !self.nyquist[m] && k > 0.0 && k >= k_lo && k <= k_hi
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coefs: SpectField = (0..self.spect_len())
            .map(|m| {
                let phase: f64 = rng.random_range(0.0..2.0 * PI);
                if in_band(m) {
                    Complex64::from_polar(1.0, phase)
                } else {
                    ZERO
                }
            })
            .collect();
        // restore Hermitian symmetry on the self-conjugate planes
        coefs = self.forward(&self.inverse(&coefs)?)?;
        for (m, c) in coefs.iter_mut().enumerate() {
            if !in_band(m) {
                *c = ZERO;
            }
        }
        let ms = self.mean_square(&coefs);
        if ms == 0.0 {
            return Err(Error::Config(format!(
                "no resolved modes in band [{k_lo}, {k_hi}]"
            )));
        }
        let scale = ms.sqrt().recip();
        coefs.iter_mut().for_each(|c| *c *= scale);
        Ok(coefs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn one_dimensional_wavenumbers_and_mask() {
        let g = make_grid(&[8], &[2.0 * PI], 2.0 / 3.0).unwrap();
        let k: Vec<f64> = g.k_axis(0).to_vec();
        for (got, want) in k.iter().zip([0.0, 1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert_eq!(g.dealias_mask(), &[true, true, true, false, false]);

        let mut f = vec![Complex64::new(1.0, 0.0); 5];
        g.dealias(&mut f).unwrap();
        assert_eq!(f[2], Complex64::new(1.0, 0.0));
        assert_eq!(f[3], ZERO);
        assert_eq!(f[4], ZERO);
        let once = f.clone();
        g.dealias(&mut f).unwrap();
        assert_eq!(f, once);
    }

    #[test]
    fn coefficient_one_disables_truncation() {
        let g = make_grid(&[4, 4], &[2.0 * PI, 2.0 * PI], 1.0).unwrap();
        assert!(g.dealias_mask().iter().all(|&m| m));
        assert_eq!(g.k_axis(0), &[0.0, 1.0, -2.0, -1.0]);
    }

    #[test]
    fn spacing_follows_domain_length() {
        let g = make_grid(&[8], &[PI], 2.0 / 3.0).unwrap();
        assert!((g.k_axis(0)[1] - 2.0).abs() < 1e-15);
        assert_eq!(g.k_sq()[0], 0.0);
    }

    #[test]
    fn invalid_grids_are_configuration_errors() {
        assert!(matches!(make_grid(&[7], &[1.0], 0.5), Err(Error::Config(_))));
        assert!(matches!(make_grid(&[8], &[0.0], 0.5), Err(Error::Config(_))));
        assert!(matches!(make_grid(&[8], &[1.0], 0.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(&[8], &[1.0, 1.0], 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn gradient_of_sine_is_cosine() {
        let g = make_grid(&[32], &[2.0 * PI], 2.0 / 3.0).unwrap();
        let x = g.coords(0);
        let s = g.forward(&x.iter().map(|v| v.sin()).collect::<Vec<_>>()).unwrap();
        let c = g.forward(&x.iter().map(|v| v.cos()).collect::<Vec<_>>()).unwrap();
        let grad = g.gradient(&s).unwrap();
        assert!(max_abs_diff(&grad[0], &c) < 1e-14);
    }

    #[test]
    fn velocity_of_taylor_green_vorticity() {
        let n = 16;
        let g = make_grid(&[n, n], &[2.0 * PI, 2.0 * PI], 2.0 / 3.0).unwrap();
        let (x, y) = (g.coords(0), g.coords(1));
        let rot: Vec<f64> = x.iter().zip(&y).map(|(x, y)| 2.0 * x.sin() * y.sin()).collect();
        let (ux, uy) = g.velocity_from_vorticity2d(&g.forward(&rot).unwrap()).unwrap();
        let ux = g.inverse(&ux).unwrap();
        let uy = g.inverse(&uy).unwrap();
        for i in 0..g.phys_len() {
            assert!((ux[i] - x[i].sin() * y[i].cos()).abs() < 1e-14);
            assert!((uy[i] + x[i].cos() * y[i].sin()).abs() < 1e-14);
        }
        let zero = vec![ZERO; g.spect_len()];
        let (ux, uy) = g.velocity_from_vorticity2d(&zero).unwrap();
        assert!(ux.iter().chain(&uy).all(|c| *c == ZERO));
    }

    #[test]
    fn curl_of_abc_field() {
        let n = 8;
        let g = make_grid(&[n, n, n], &[2.0 * PI; 3], 2.0 / 3.0).unwrap();
        let (x, y, z) = (g.coords(0), g.coords(1), g.coords(2));
        let phys = |f: &dyn Fn(usize) -> f64| -> SpectField {
            g.forward(&(0..g.phys_len()).map(f).collect::<Vec<_>>()).unwrap()
        };
        let u = vec![
            phys(&|i| z[i].sin()),
            phys(&|i| x[i].sin()),
            phys(&|i| y[i].sin()),
        ];
        let expected = [
            phys(&|i| y[i].cos()),
            phys(&|i| z[i].cos()),
            phys(&|i| x[i].cos()),
        ];
        let curl = g.curl3d(&u).unwrap();
        for c in 0..3 {
            assert!(max_abs_diff(&curl[c], &expected[c]) < 1e-14);
        }
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let g = make_grid(&[16, 16], &[2.0 * PI, 3.0], 2.0 / 3.0).unwrap();
        let psi = g.random_field(3, [0.5, 6.0]).unwrap();
        let grad = g.gradient(&psi).unwrap();
        let curl = g.curl2d(&grad[0], &grad[1]).unwrap();
        assert!(curl.iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn projection_removes_gradients_and_keeps_solenoidal_fields() {
        let g = make_grid(&[8, 8, 8], &[2.0 * PI; 3], 2.0 / 3.0).unwrap();
        let phi = g.random_field(1, [0.5, 4.0]).unwrap();
        let mut grad = g.gradient(&phi).unwrap();
        g.project_divfree(&mut grad).unwrap();
        assert!(grad.iter().flatten().all(|c| c.norm() < 1e-15));

        let mut u: Vec<SpectField> = (0..3).map(|s| g.random_field(10 + s, [0.5, 4.0]).unwrap()).collect();
        g.project_divfree(&mut u).unwrap();
        let once = u.clone();
        g.project_divfree(&mut u).unwrap();
        for c in 0..3 {
            assert!(max_abs_diff(&u[c], &once[c]) < 1e-15);
        }
    }

    #[test]
    fn random_field_is_deterministic_and_banded() {
        let g = make_grid(&[32, 32], &[2.0 * PI, 2.0 * PI], 2.0 / 3.0).unwrap();
        let a = g.random_field(7, [2.0, 4.0]).unwrap();
        let b = g.random_field(7, [2.0, 4.0]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, g.random_field(8, [2.0, 4.0]).unwrap());
        for (m, c) in a.iter().enumerate() {
            let k = g.k_sq()[m].sqrt();
            if !(2.0..=4.0).contains(&k) {
                assert_eq!(*c, ZERO);
            }
        }
        assert!((g.mean_square(&a) - 1.0).abs() < 1e-12);
        assert!(g.random_field(7, [4.0, 2.0]).is_err());
        assert!(g.random_field(7, [0.2, 0.4]).is_err());
    }

    #[test]
    fn dimension_mismatches_are_errors() {
        let g = make_grid(&[8, 8], &[1.0, 1.0], 2.0 / 3.0).unwrap();
        let f = vec![ZERO; g.spect_len()];
        assert!(g.curl3d(&[f.clone(), f.clone(), f.clone()]).is_err());
        assert!(g.divergence(std::slice::from_ref(&f)).is_err());
        assert!(g.gradient(&f[1..]).is_err());
        let g1 = make_grid(&[8], &[1.0], 2.0 / 3.0).unwrap();
        assert!(g1.velocity_from_vorticity2d(&[ZERO; 5]).is_err());
    }
}
