//! Closed-form temperature models: cubic D(T), phonon-line shift, Mott-Seitz
//! photoluminescence quenching, and lattice thermal-expansion lookup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::K_B_EV_PER_K;

/// Cubic polynomial coefficients for D(T), in Hz, Hz/K, Hz/K^2, Hz/K^3.
///
/// The literature fit this mirrors is published as a power series whose
/// coefficients are configuration here; [`DPolyParams::anchored_default`]
/// ships coefficients chosen to reproduce three measured anchors:
/// D(0) = 2.88 GHz, D(500 K) - D(0) = -32 MHz, and a normalized slope of
/// -4.3e-5 / K near 480 K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DPolyParams {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl DPolyParams {
    pub fn anchored_default() -> Self {
        Self { a0: 2.88e9, a1: 0.0, a2: -128.73, a3: 1.4603e-3 }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.a0 > 0.0) {
            return Err(ThermalError::InvalidParams(format!(
                "zero-temperature D must be positive, got {} Hz",
                self.a0
            )));
        }
        Ok(())
    }
}

/// Phonon-shift model parameters, both in meV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhononShiftParams {
    pub a_mev: f64,
    pub hbar_omega0_mev: f64,
}

impl PhononShiftParams {
    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.a_mev > 0.0) || !(self.hbar_omega0_mev > 0.0) {
            return Err(ThermalError::InvalidParams(format!(
                "phonon-shift parameters must be positive, got A = {} meV, hbar_omega0 = {} meV",
                self.a_mev, self.hbar_omega0_mev
            )));
        }
        Ok(())
    }
}

/// Mott-Seitz quenching parameters: zero-temperature intensity, prefactor,
/// activation energy in eV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MottSeitzParams {
    pub i0: f64,
    pub c: f64,
    pub u_b_ev: f64,
}

impl MottSeitzParams {
    pub fn validate(&self) -> Result<(), ThermalError> {
        if !(self.i0 > 0.0) || !(self.c >= 0.0) || !(self.u_b_ev > 0.0) {
            return Err(ThermalError::InvalidParams(format!(
                "Mott-Seitz parameters out of range: I0 = {}, C = {}, U_b = {} eV",
                self.i0, self.c, self.u_b_ev
            )));
        }
        Ok(())
    }
}

/// Unit-cell length vs temperature, strictly increasing in T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeTable {
    rows: Vec<(f64, f64)>,
}

impl LatticeTable {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self, ThermalError> {
        if rows.len() < 2 {
            return Err(ThermalError::InvalidTable("need at least two rows".into()));
        }
        for window in rows.windows(2) {
            if !(window[1].0 > window[0].0) {
                return Err(ThermalError::InvalidTable(format!(
                    "temperatures must be strictly increasing, got {} then {}",
                    window[0].0, window[1].0
                )));
            }
            if !(window[1].1 >= window[0].1) {
                return Err(ThermalError::InvalidTable(format!(
                    "lattice length must be non-decreasing, got {} then {}",
                    window[0].1, window[1].1
                )));
            }
        }
        if rows.iter().any(|&(_, a)| !(a > 0.0)) {
            return Err(ThermalError::InvalidTable("lattice lengths must be positive".into()));
        }
        Ok(Self { rows })
    }

    /// Diamond unit-cell lengths at 298 K and 506 K.
    pub fn diamond_default() -> Self {
        Self { rows: vec![(298.0, 3.5668), (506.0, 3.5680)] }
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    fn range(&self) -> (f64, f64) {
        (self.rows[0].0, self.rows[self.rows.len() - 1].0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ThermalError {
    #[error("temperature must be non-negative, got {0} K")]
    NegativeTemperature(f64),
    #[error("D(T) is zero at T = {0} K; normalized slope undefined")]
    ZeroD(f64),
    #[error("temperature {t} K outside table range [{min}, {max}] K; no extrapolation")]
    OutOfRange { t: f64, min: f64, max: f64 },
    #[error("temperature order invalid: T1 = {0} K must be below T2 = {1} K")]
    BadOrder(f64, f64),
    #[error("invalid lattice table: {0}")]
    InvalidTable(String),
    #[error("invalid thermal parameters: {0}")]
    InvalidParams(String),
}

/// D(T) = a0 + a1 T + a2 T^2 + a3 T^3 in Hz.
pub fn d_of_t(params: &DPolyParams, t_k: f64) -> Result<f64, ThermalError> {
    if t_k < 0.0 {
        return Err(ThermalError::NegativeTemperature(t_k));
    }
    Ok(params.a0 + t_k * (params.a1 + t_k * (params.a2 + t_k * params.a3)))
}

/// D(T) - D(0) in Hz.
pub fn delta_d(params: &DPolyParams, t_k: f64) -> Result<f64, ThermalError> {
    Ok(d_of_t(params, t_k)? - params.a0)
}

/// dD/(D dT) in 1/K, from the analytic derivative.
pub fn normalized_slope(params: &DPolyParams, t_k: f64) -> Result<f64, ThermalError> {
    let d = d_of_t(params, t_k)?;
    if d == 0.0 {
        return Err(ThermalError::ZeroD(t_k));
    }
    let slope = params.a1 + t_k * (2.0 * params.a2 + 3.0 * params.a3 * t_k);
    Ok(slope / d)
}

/// Phonon line shift Delta E_v(T) = -2A / (exp(hbar omega0 / 2 k_B T) - 1)
/// in meV; the T -> 0 limit is 0.
pub fn phonon_shift(params: &PhononShiftParams, t_k: f64) -> f64 {
    if t_k <= 0.0 {
        return 0.0;
    }
    let x = params.hbar_omega0_mev * 1e-3 / (2.0 * K_B_EV_PER_K * t_k);
    -2.0 * params.a_mev / (x.exp() - 1.0)
}

/// Mott-Seitz PL intensity I0 / (1 + C exp(-U_b / k_B T)); the T -> 0
/// limit is I0.
pub fn mott_seitz_intensity(params: &MottSeitzParams, t_k: f64) -> f64 {
    if t_k <= 0.0 {
        return params.i0;
    }
    params.i0 / (1.0 + params.c * (-params.u_b_ev / (K_B_EV_PER_K * t_k)).exp())
}

/// Piecewise-linear lattice length in Angstrom; no extrapolation.
pub fn lattice_parameter(table: &LatticeTable, t_k: f64) -> Result<f64, ThermalError> {
    let (min, max) = table.range();
    if t_k < min || t_k > max {
        return Err(ThermalError::OutOfRange { t: t_k, min, max });
    }
    let rows = table.rows();
    let idx = rows.partition_point(|&(t, _)| t <= t_k);
    if idx == 0 {
        return Ok(rows[0].1);
    }
    if idx == rows.len() {
        return Ok(rows[rows.len() - 1].1);
    }
    let (t0, a0) = rows[idx - 1];
    let (t1, a1) = rows[idx];
    let w = (t_k - t0) / (t1 - t0);
    Ok(a0 + w * (a1 - a0))
}

/// da/(a dT) between two in-range temperatures, in 1/K.
pub fn normalized_expansion_rate(
    table: &LatticeTable,
    t1_k: f64,
    t2_k: f64,
) -> Result<f64, ThermalError> {
    if !(t1_k < t2_k) {
        return Err(ThermalError::BadOrder(t1_k, t2_k));
    }
    let a1 = lattice_parameter(table, t1_k)?;
    let a2 = lattice_parameter(table, t2_k)?;
    Ok((a2 - a1) / (a1 * (t2_k - t1_k)))
}
