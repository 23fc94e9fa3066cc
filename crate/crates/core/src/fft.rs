//! Real-to-complex transforms in one, two and three dimensions.
//!
//! Arrays are row-major. The last axis is stored in Hermitian form
//! (`n/2 + 1` complex values), the other axes in full FFT ordering.
//! The forward transform carries the `1/N` factor, so coefficients are mode
//! amplitudes: `cos(2πj/8)` sampled on 8 points has coefficient `0.5` at
//! index 1. The inverse is the plain (unnormalized) synthesis.
//!
//! Both directions are out of place; inputs are never modified.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub struct FftPlan {
    phys_shape: Vec<usize>,
    spect_shape: Vec<usize>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    // c2c transforms for every axis but the last
    forward_axes: Vec<Arc<dyn Fft<f64>>>,
    inverse_axes: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftPlan")
            .field("phys_shape", &self.phys_shape)
            .field("spect_shape", &self.spect_shape)
            .finish()
    }
}

fn plan_cache() -> &'static Mutex<HashMap<Vec<usize>, Arc<FftPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<Vec<usize>, Arc<FftPlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub fn check_shape(phys_shape: &[usize]) -> Result<()> {
    if phys_shape.is_empty() || phys_shape.len() > 3 {
        return Err(Error::Shape(format!(
            "expected 1 to 3 axes, got {}",
            phys_shape.len()
        )));
    }
    if let Some(&n) = phys_shape.iter().find(|&&n| n < 4 || n % 2 != 0) {
        return Err(Error::Shape(format!(
            "every extent must be even and at least 4, got {n} in {phys_shape:?}"
        )));
    }
    Ok(())
}

/// Returns the plan for `phys_shape`, building it on first request.
/// Repeated requests for the same shape return the same `Arc`.
pub fn plan(phys_shape: &[usize]) -> Result<Arc<FftPlan>> {
    check_shape(phys_shape)?;
    let mut cache = plan_cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(p) = cache.get(phys_shape) {
        return Ok(Arc::clone(p));
    }
    let p = Arc::new(FftPlan::build(phys_shape));
    cache.insert(phys_shape.to_vec(), Arc::clone(&p));
    Ok(p)
}

impl FftPlan {
    fn build(phys_shape: &[usize]) -> Self {
        let last = *phys_shape.last().expect("checked non-empty");
        let mut spect_shape = phys_shape.to_vec();
        *spect_shape.last_mut().expect("non-empty") = last / 2 + 1;

        let mut real_planner = RealFftPlanner::<f64>::new();
        let mut planner = FftPlanner::<f64>::new();
        let head = &phys_shape[..phys_shape.len() - 1];
        FftPlan {
            phys_shape: phys_shape.to_vec(),
            spect_shape,
            r2c: real_planner.plan_fft_forward(last),
            c2r: real_planner.plan_fft_inverse(last),
            forward_axes: head.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse_axes: head.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn phys_shape(&self) -> &[usize] {
        &self.phys_shape
    }

    pub fn spect_shape(&self) -> &[usize] {
        &self.spect_shape
    }

    pub fn phys_len(&self) -> usize {
        self.phys_shape.iter().product()
    }

    pub fn spect_len(&self) -> usize {
        self.spect_shape.iter().product()
    }

    pub fn forward(&self, field: &[f64], out: &mut [Complex64]) -> Result<()> {
        self.check_len("forward input", field.len(), self.phys_len())?;
        self.check_len("forward output", out.len(), self.spect_len())?;

        let n_last = *self.phys_shape.last().expect("non-empty");
        let h = n_last / 2 + 1;
        let r2c = &self.r2c;
        out.par_chunks_mut(h)
            .zip(field.par_chunks(n_last))
            .for_each_init(
                || (r2c.make_input_vec(), r2c.make_scratch_vec()),
                |(buf, scratch), (row_out, row_in)| {
                    buf.copy_from_slice(row_in);
                    r2c.process_with_scratch(buf, row_out, scratch)
                        .expect("buffer lengths match the plan");
                },
            );

        for (axis, fft) in self.forward_axes.iter().enumerate() {
            self.c2c_axis(out, axis, fft);
        }

        let norm = 1.0 / self.phys_len() as f64;
        out.par_iter_mut().for_each(|c| *c *= norm);
        Ok(())
    }

    pub fn inverse(&self, coefs: &[Complex64], out: &mut [f64]) -> Result<()> {
        self.check_len("inverse input", coefs.len(), self.spect_len())?;
        self.check_len("inverse output", out.len(), self.phys_len())?;

        let mut work = coefs.to_vec();
        for (axis, fft) in self.inverse_axes.iter().enumerate() {
            self.c2c_axis(&mut work, axis, fft);
        }

        let n_last = *self.phys_shape.last().expect("non-empty");
        let h = n_last / 2 + 1;
        let c2r = &self.c2r;
        out.par_chunks_mut(n_last)
            .zip(work.par_chunks_mut(h))
            .for_each_init(
                || c2r.make_scratch_vec(),
                |scratch, (row_out, row_in)| {
                    // the mean and Nyquist coefficients of a real row are real
                    row_in[0].im = 0.0;
                    row_in[h - 1].im = 0.0;
                    c2r.process_with_scratch(row_in, row_out, scratch)
                        .expect("buffer lengths match the plan");
                },
            );
        Ok(())
    }

    pub fn forward_vec(&self, field: &[f64]) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.spect_len()];
        self.forward(field, &mut out)?;
        Ok(out)
    }

    pub fn inverse_vec(&self, coefs: &[Complex64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.phys_len()];
        self.inverse(coefs, &mut out)?;
        Ok(out)
    }

    fn check_len(&self, what: &str, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(Error::Shape(format!(
                "{what} has {got} values, plan {:?} expects {expected}",
                self.phys_shape
            )));
        }
        Ok(())
    }

    /// In-place complex transform along a non-last axis of a spectral array.
    fn c2c_axis(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let outer: usize = self.spect_shape[..axis].iter().product();
        let mid = self.spect_shape[axis];
        let inner: usize = self.spect_shape[axis + 1..].iter().product();
        let mut lines = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose_mid(data, &mut lines, outer, mid, inner);
        lines.par_chunks_mut(mid).for_each_init(
            || vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
            |scratch, line| fft.process_with_scratch(line, scratch),
        );
        transpose_mid(&lines, data, outer, inner, mid);
    }
}

/// `dst[o][i][m] = src[o][m][i]` for a `[outer, mid, inner]` source.
fn transpose_mid(src: &[Complex64], dst: &mut [Complex64], outer: usize, mid: usize, inner: usize) {
    debug_assert_eq!(src.len(), outer * mid * inner);
    const BLOCK: usize = 16;
    dst.par_chunks_mut(inner * mid)
        .enumerate()
        .for_each(|(o, slab_out)| {
            let slab_in = &src[o * mid * inner..(o + 1) * mid * inner];
            for ib in (0..inner).step_by(BLOCK) {
                for mb in (0..mid).step_by(BLOCK) {
                    for i in ib..(ib + BLOCK).min(inner) {
                        for m in mb..(mb + BLOCK).min(mid) {
                            slab_out[i * mid + m] = slab_in[m * inner + i];
                        }
                    }
                }
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spect_shapes() {
        assert_eq!(plan(&[64, 64]).unwrap().spect_shape(), &[64, 33]);
        assert_eq!(plan(&[8]).unwrap().spect_shape(), &[5]);
        assert_eq!(plan(&[4, 6, 8]).unwrap().spect_shape(), &[4, 6, 5]);
    }

    #[test]
    fn odd_or_tiny_extents_are_rejected() {
        assert!(matches!(plan(&[7]), Err(Error::Shape(_))));
        assert!(matches!(plan(&[2, 8]), Err(Error::Shape(_))));
        assert!(matches!(plan(&[]), Err(Error::Shape(_))));
        assert!(matches!(plan(&[4, 4, 4, 4]), Err(Error::Shape(_))));
    }

    #[test]
    fn plans_are_cached() {
        let a = plan(&[16, 12]).unwrap();
        let b = plan(&[16, 12]).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn mismatched_lengths_are_errors() {
        let p = plan(&[8]).unwrap();
        assert!(p.forward_vec(&[0.0; 7]).is_err());
        assert!(p.inverse_vec(&[Complex64::new(0.0, 0.0); 4]).is_err());
    }

    #[test]
    fn constant_field_is_the_mean_mode() {
        let p = plan(&[8, 8]).unwrap();
        let c = p.forward_vec(&[3.0; 64]).unwrap();
        assert!((c[0].re - 3.0).abs() < 1e-15 && c[0].im.abs() < 1e-15);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-15));

        let mut coefs = vec![Complex64::new(0.0, 0.0); p.spect_len()];
        coefs[0] = Complex64::new(1.0, 0.0);
        assert!(p.inverse_vec(&coefs).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn input_is_not_clobbered() {
        let p = plan(&[8, 8]).unwrap();
        let field: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let copy = field.clone();
        let coefs = p.forward_vec(&field).unwrap();
        assert_eq!(field, copy);
        let coefs_copy = coefs.clone();
        p.inverse_vec(&coefs).unwrap();
        assert_eq!(coefs, coefs_copy);
    }

    #[test]
    fn unit_cosine_has_half_amplitude() {
        let p = plan(&[8]).unwrap();
        let u: Vec<f64> = (0..8).map(|j| (2.0 * PI * j as f64 / 8.0).cos()).collect();
        let c = p.forward_vec(&u).unwrap();
        for (i, z) in c.iter().enumerate() {
            let expected = if i == 1 { 0.5 } else { 0.0 };
            assert!((z.re - expected).abs() < 1e-15 && z.im.abs() < 1e-15, "mode {i}: {z}");
        }
    }
}
