//! NV- center spin physics and thermal spectroscopy.
//!
//! The crate models the spin-triplet ground state of the negatively charged
//! nitrogen-vacancy center in diamond and the thermal behaviour of its
//! optical emission:
//!
//! - [`spin`]: ground-state Hamiltonian, ODMR transition frequencies for
//!   the four <111> orientations, magnetic-field sweeps, synthetic ODMR
//!   lineshapes.
//! - [`zfs`]: the spin-spin dipolar zero-field-splitting tensor evaluated
//!   on discretized pair densities, with an analytic point-dipole oracle.
//! - [`thermal`]: cubic D(T), phonon-line shift, Mott-Seitz quenching, and
//!   lattice-expansion lookup.
//! - [`fit`]: damped least-squares fitting of the thermal models with
//!   covariance-based uncertainties.
//! - [`spectra`]: spectrum/data-series CSV formats, peak and dip
//!   extraction.
//! - [`constants`]: the single home of physical constants and unit
//!   conversions.
//! - [`config`]: the JSON run configuration consumed by the CLI.

pub mod config;
pub mod constants;
pub mod eigen;
pub mod fit;
pub mod spectra;
pub mod spin;
pub mod thermal;
pub mod zfs;
