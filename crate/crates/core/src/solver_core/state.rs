use super::{Equation, SolverInfo};
use crate::error::{Error, Result};
use crate::operators::{SpectField, SpectralGrid};

/// Physical state variables and their spectral counterparts.
///
/// The spectral fields are authoritative; physical fields are recomputed
/// lazily whenever the spectral state has changed.
#[derive(Debug, Clone)]
pub struct StateSet {
    pub keys_state_spect: Vec<String>,
    pub keys_state_phys: Vec<String>,
    pub keys_computable: Vec<String>,
    spect: Vec<SpectField>,
    phys: Vec<Vec<f64>>,
    phys_fresh: bool,
}

impl StateSet {
    pub fn new(info: &SolverInfo, grid: &SpectralGrid) -> Self {
        let n = info.keys_state_spect.len();
        StateSet {
            keys_state_spect: info.keys_state_spect.clone(),
            keys_state_phys: info.keys_state_phys.clone(),
            keys_computable: info.keys_computable.clone(),
            spect: vec![vec![num_complex::Complex64::new(0.0, 0.0); grid.spect_len()]; n],
            phys: vec![vec![0.0; grid.phys_len()]; n],
            phys_fresh: true,
        }
    }

    pub fn spect(&self) -> &[SpectField] {
        &self.spect
    }

    /// Mutable access to the spectral state; physical fields become stale.
    pub fn spect_mut(&mut self) -> &mut [SpectField] {
        self.phys_fresh = false;
        &mut self.spect
    }

    pub fn set_spect(&mut self, spect: Vec<SpectField>) -> Result<()> {
        if spect.len() != self.spect.len() || spect.iter().zip(&self.spect).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Shape("spectral state layout mismatch".into()));
        }
        self.spect = spect;
        self.phys_fresh = false;
        Ok(())
    }

    /// Physical state, transformed from the spectral state if stale.
    pub fn phys(&mut self, grid: &SpectralGrid) -> Result<&[Vec<f64>]> {
        if !self.phys_fresh {
            for (p, s) in self.phys.iter_mut().zip(&self.spect) {
                grid.plan().inverse(s, p)?;
            }
            self.phys_fresh = true;
        }
        Ok(&self.phys)
    }

    /// Sets the state from physical fields.
    pub fn set_phys(&mut self, grid: &SpectralGrid, phys: Vec<Vec<f64>>) -> Result<()> {
        if phys.len() != self.phys.len() {
            return Err(Error::Shape(format!(
                "expected {} physical fields, got {}",
                self.phys.len(),
                phys.len()
            )));
        }
        for (s, p) in self.spect.iter_mut().zip(&phys) {
            grid.plan().forward(p, s)?;
        }
        self.phys = phys;
        self.phys_fresh = true;
        Ok(())
    }

    /// A state or computable variable by name. Spectral keys return the
    /// physical counterpart.
    pub fn get_var(&mut self, name: &str, grid: &SpectralGrid, equation: &dyn Equation) -> Result<Vec<f64>> {
        if let Some(i) = self.keys_state_phys.iter().position(|k| k == name) {
            return Ok(self.phys(grid)?[i].clone());
        }
        if self.keys_computable.iter().any(|k| k == name) {
            if let Some(v) = equation.computable(grid, &self.spect, name)? {
                return Ok(v);
            }
        }
        Err(Error::Config(format!(
            "unknown variable `{name}` (state: {}; computable: {})",
            self.keys_state_phys.join(", "),
            self.keys_computable.join(", ")
        )))
    }

    /// First state variable holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.spect
            .iter()
            .position(|f| f.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())))
            .map(|i| self.keys_state_spect[i].as_str())
    }
}
