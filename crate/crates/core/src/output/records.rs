use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{SpectField, SpectralGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialMeansRecord {
    pub t: f64,
    pub it: usize,
    pub dt: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "Z", default, skip_serializing_if = "Option::is_none")]
    pub enstrophy: Option<f64>,
    pub eps_visc: f64,
    #[serde(rename = "P_forcing")]
    pub p_forcing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub t: f64,
    pub k: Vec<f64>,
    #[serde(rename = "E")]
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRecord {
    pub t: f64,
    pub k: Vec<f64>,
    #[serde(rename = "T")]
    pub transfer: Vec<f64>,
    #[serde(rename = "D")]
    pub dissipation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementsRecord {
    pub t: f64,
    /// Vector component, and direction of the separation.
    pub direction: usize,
    pub r: Vec<f64>,
    pub orders: Vec<u32>,
    /// `S[i][j]` is the structure function of order `orders[i]` at `r[j]`.
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
}

/// `½ Σ_c Σ_k w_k |û_c,k|²`.
pub fn energy(grid: &SpectralGrid, velocity: &[SpectField]) -> f64 {
    0.5 * velocity.iter().map(|c| grid.mean_square(c)).sum::<f64>()
}

/// Rate of energy change due to the linear term, `Σ_c Σ_k w_k σ_k |û_c,k|²`.
fn linear_rate_per_mode(grid: &SpectralGrid, velocity: &[SpectField], sigma: &[f64]) -> Vec<f64> {
    let w = grid.weights();
    (0..grid.spect_len())
        .map(|m| {
            let amp: f64 = velocity.iter().map(|c| c[m].norm_sqr()).sum();
            w[m] * sigma[m] * amp
        })
        .collect()
}

pub struct MeansInput<'a> {
    pub velocity: &'a [SpectField],
    pub vorticity: Option<&'a [num_complex::Complex64]>,
    pub sigma: Option<&'a [f64]>,
    pub p_forcing: f64,
    pub t: f64,
    pub it: usize,
    pub dt: f64,
}

pub fn record_spatial_means(grid: &SpectralGrid, input: MeansInput<'_>) -> SpatialMeansRecord {
    let eps_visc = input
        .sigma
        .map(|s| -linear_rate_per_mode(grid, input.velocity, s).iter().sum::<f64>())
        .unwrap_or(0.0);
    SpatialMeansRecord {
        t: input.t,
        it: input.it,
        dt: input.dt,
        energy: energy(grid, input.velocity),
        enstrophy: input.vorticity.map(|w| 0.5 * grid.mean_square(w)),
        eps_visc,
        p_forcing: input.p_forcing,
    }
}

fn shell_centers(grid: &SpectralGrid) -> Vec<f64> {
    let dk = grid.shell_width();
    (0..grid.n_shells()).map(|s| s as f64 * dk).collect()
}

fn shell_sum(grid: &SpectralGrid, per_mode: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.n_shells()];
    for m in 0..grid.spect_len() {
        out[grid.shell_index(m)] += per_mode(m);
    }
    out
}

/// Shell-summed energy density: `E(k_s) = ½ Σ_{k∈s} w_k |û_k|² / Δk`.
pub fn compute_spectrum(grid: &SpectralGrid, velocity: &[SpectField], t: f64) -> SpectrumRecord {
    let w = grid.weights();
    let dk = grid.shell_width();
    let energy = shell_sum(grid, |m| {
        0.5 * w[m] * velocity.iter().map(|c| c[m].norm_sqr()).sum::<f64>() / dk
    });
    SpectrumRecord {
        t,
        k: shell_centers(grid),
        energy,
    }
}

/// Transfer `T(k_s) = Σ w Re(û*·N̂)` and dissipation `D(k_s) = Σ w σ |û|²`,
/// both in velocity space.
pub fn compute_spectral_energy_budget(
    grid: &SpectralGrid,
    velocity: &[SpectField],
    velocity_tendency: &[SpectField],
    sigma: Option<&[f64]>,
    t: f64,
) -> BudgetRecord {
    let w = grid.weights();
    let transfer = shell_sum(grid, |m| {
        w[m] * velocity
            .iter()
            .zip(velocity_tendency)
            .map(|(u, n)| (u[m].conj() * n[m]).re)
            .sum::<f64>()
    });
    let dissipation = match sigma {
        Some(s) => {
            let rate = linear_rate_per_mode(grid, velocity, s);
            shell_sum(grid, |m| rate[m])
        }
        None => vec![0.0; grid.n_shells()],
    };
    BudgetRecord {
        t,
        k: shell_centers(grid),
        transfer,
        dissipation,
    }
}

/// Separations, in grid steps, from 0 to half the extent.
pub fn separations(n: usize, n_separations: usize) -> Vec<usize> {
    let half = n / 2;
    let count = n_separations.max(1);
    let mut out: Vec<usize> = (0..=count)
        .map(|i| ((i * half) as f64 / count as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Structure functions `S_p(r) = ⟨(u(x + r ê) − u(x))^p⟩` of velocity
/// component `direction` along the same direction, for integer `p ≥ 1`.
pub fn compute_increments(
    grid: &SpectralGrid,
    velocity_phys: &[Vec<f64>],
    direction: usize,
    orders: &[f64],
    n_separations: usize,
    t: f64,
) -> Result<IncrementsRecord> {
    let dims = grid.dims();
    if direction >= dims {
        return Err(Error::Config(format!("direction {direction} on a {dims}D grid")));
    }
    let orders: Vec<u32> = orders
        .iter()
        .map(|&p| {
            if p >= 1.0 && p.fract() == 0.0 && p <= 64.0 {
                Ok(p as u32)
            } else {
                Err(Error::Config(format!("structure function order must be an integer >= 1, got {p}")))
            }
        })
        .collect::<Result<_>>()?;
    let u = if velocity_phys.len() == 1 {
        &velocity_phys[0]
    } else {
        velocity_phys
            .get(direction)
            .ok_or_else(|| Error::Shape(format!("no velocity component {direction}")))?
    };
    if u.len() != grid.phys_len() {
        return Err(Error::Shape(format!(
            "physical field has {} values, grid expects {}",
            u.len(),
            grid.phys_len()
        )));
    }
    let axis = dims - 1 - direction;
    let shape = grid.shape();
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let seps = separations(n, n_separations);
    let mut s = vec![vec![0.0; seps.len()]; orders.len()];
    let inv = 1.0 / u.len() as f64;
    for (j, &sep) in seps.iter().enumerate() {
        let mut sums = vec![0.0; orders.len()];
        for (idx, &v) in u.iter().enumerate() {
            let i_axis = (idx / stride) % n;
            let shifted = idx - i_axis * stride + ((i_axis + sep) % n) * stride;
            let du = u[shifted] - v;
            for (acc, &p) in sums.iter_mut().zip(&orders) {
                *acc += du.powi(p as i32);
            }
        }
        for (row, acc) in s.iter_mut().zip(sums) {
            row[j] = acc * inv;
        }
    }
    let dx = grid.dx(direction);
    Ok(IncrementsRecord {
        t,
        direction,
        r: seps.iter().map(|&j| j as f64 * dx).collect(),
        orders,
        s,
    })
}
