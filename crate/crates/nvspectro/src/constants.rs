//! Physical constants and the unit conversions shared by every module.
//!
//! Values follow CODATA-2018, with one exception: the electron gyromagnetic
//! ratio is 28.03 GHz/T, the ensemble value all resonance frequencies in this
//! crate are referenced to. Frequencies are ordinary frequencies in Hz (not
//! angular), energies in eV, wavelengths in nm, fields in Tesla,
//! temperatures in K.

use thiserror::Error;

/// Boltzmann constant (eV/K), exact in the 2019 SI.
pub const K_B_EV_PER_K: f64 = 8.617_333_262e-5;

/// Planck constant (eV·s).
pub const H_EV_S: f64 = 4.135_667_696e-15;

/// Planck constant (J·s), exact in the 2019 SI.
pub const H_J_S: f64 = 6.626_070_15e-34;

/// Planck constant times speed of light (eV·nm).
pub const HC_EV_NM: f64 = 1239.841_984;

/// Reduced Planck constant (eV·s).
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;

/// mu_0 / 4pi (T^2·m^3/J).
pub const MU0_OVER_4PI: f64 = 1.000_000_000_55e-7;

/// Electron spin gyromagnetic ratio (Hz/T), ordinary frequency.
pub const GAMMA_E_HZ_PER_T: f64 = 28.03e9;

/// Bundle of the constants above, for configs and FFI consumers that want a
/// single record instead of individual items.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Boltzmann constant (eV/K).
    pub k_b: f64,
    /// Planck constant (eV·s).
    pub h: f64,
    /// Planck constant times speed of light (eV·nm).
    pub hc: f64,
    /// Reduced Planck constant (eV·s).
    pub hbar: f64,
    /// mu_0 / 4pi (T^2·m^3/J).
    pub mu0_over_4pi: f64,
    /// Electron gyromagnetic ratio (Hz/T).
    pub gamma_e: f64,
}

impl PhysicalConstants {
    pub const fn codata() -> Self {
        Self {
            k_b: K_B_EV_PER_K,
            h: H_EV_S,
            hc: HC_EV_NM,
            hbar: HBAR_EV_S,
            mu0_over_4pi: MU0_OVER_4PI,
            gamma_e: GAMMA_E_HZ_PER_T,
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum UnitsError {
    #[error("wavelength must be positive, got {0} nm")]
    NonPositiveWavelength(f64),
    #[error("energy must be positive, got {0} eV")]
    NonPositiveEnergy(f64),
}

/// Photon wavelength (nm) to energy (eV).
pub fn wavelength_to_energy(lambda_nm: f64) -> Result<f64, UnitsError> {
    if !(lambda_nm > 0.0) {
        return Err(UnitsError::NonPositiveWavelength(lambda_nm));
    }
    Ok(HC_EV_NM / lambda_nm)
}

/// Photon energy (eV) to wavelength (nm).
pub fn energy_to_wavelength(e_ev: f64) -> Result<f64, UnitsError> {
    if !(e_ev > 0.0) {
        return Err(UnitsError::NonPositiveEnergy(e_ev));
    }
    Ok(HC_EV_NM / e_ev)
}
