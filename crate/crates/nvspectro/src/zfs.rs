//! Spin-spin dipolar zero-field-splitting tensor on discretized pair
//! densities, with an analytic point-dipole limit.
//!
//! A pair density is represented by two real single-orbital grids and a
//! spin-alignment sign; the antisymmetrized pair determinant is expanded
//! internally, so the double sum only ever touches the orbital densities
//! rho = psi^2 and the overlap product s = psi_i psi_j. The quadrature is a
//! direct O(N^2) sum over grid points with the singular r = r' term
//! excluded; grids are open-boundary (no periodic images).

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{GAMMA_E_HZ_PER_T, H_J_S, MU0_OVER_4PI};
use crate::eigen::hermitian_eigen_3x3;

/// Magic string and version of the orbital grid file format.
pub const GRID_MAGIC: &str = "NVGRID 1";

/// Cartesian axis index for kernel components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

/// Relative spin alignment of an orbital pair: chi = +1 parallel,
/// -1 anti-parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinAlignment {
    Parallel,
    AntiParallel,
}

impl SpinAlignment {
    pub fn sign(self) -> f64 {
        match self {
            SpinAlignment::Parallel => 1.0,
            SpinAlignment::AntiParallel => -1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Result<Self, ZfsError> {
        match sign {
            1 => Ok(SpinAlignment::Parallel),
            -1 => Ok(SpinAlignment::AntiParallel),
            other => Err(ZfsError::InvalidGrid(format!(
                "spin alignment must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// Real orbital samples on a regular grid. Lengths in Angstrom; values are
/// row-major with x slowest: index = (ix * ny + iy) * nz + iz.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalGrid {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

const NORMALIZATION_TOL: f64 = 1e-6;

impl OrbitalGrid {
    pub fn new(
        origin: [f64; 3],
        spacing: [f64; 3],
        dims: [usize; 3],
        values: Vec<f64>,
    ) -> Result<Self, ZfsError> {
        if dims.iter().any(|&d| d < 2) {
            return Err(ZfsError::InvalidGrid(format!(
                "need at least 2 points per axis, got {dims:?}"
            )));
        }
        if spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(ZfsError::InvalidGrid(format!(
                "spacing must be positive, got {spacing:?}"
            )));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if values.len() != expected {
            return Err(ZfsError::InvalidGrid(format!(
                "value count {} does not match dims {:?} ({expected})",
                values.len(),
                dims
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ZfsError::InvalidGrid("grid contains non-finite samples".into()));
        }
        Ok(Self { origin, spacing, dims, values })
    }

    /// A normalized Gaussian orbital exp(-|r - center|^2 / (2 sigma^2)),
    /// L2-normalized on the grid.
    pub fn gaussian(
        origin: [f64; 3],
        spacing: [f64; 3],
        dims: [usize; 3],
        center: [f64; 3],
        sigma: f64,
    ) -> Result<Self, ZfsError> {
        if !(sigma > 0.0) {
            return Err(ZfsError::InvalidGrid(format!("sigma must be positive, got {sigma}")));
        }
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for ix in 0..dims[0] {
            let x = origin[0] + spacing[0] * ix as f64 - center[0];
            for iy in 0..dims[1] {
                let y = origin[1] + spacing[1] * iy as f64 - center[1];
                for iz in 0..dims[2] {
                    let z = origin[2] + spacing[2] * iz as f64 - center[2];
                    let r2 = x * x + y * y + z * z;
                    values.push((-r2 / (2.0 * sigma * sigma)).exp());
                }
            }
        }
        let mut grid = Self::new(origin, spacing, dims, values)?;
        grid.normalize()?;
        Ok(grid)
    }

    pub fn volume_element(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Discrete L2 norm squared, sum |psi|^2 dV.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.volume_element()
    }

    pub fn normalize(&mut self) -> Result<(), ZfsError> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0) {
            return Err(ZfsError::InvalidGrid("cannot normalize an all-zero grid".into()));
        }
        let scale = 1.0 / n2.sqrt();
        for v in &mut self.values {
            *v *= scale;
        }
        Ok(())
    }

    fn check_normalized(&self) -> Result<(), ZfsError> {
        let n2 = self.norm_squared();
        if (n2 - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ZfsError::NotNormalized { norm_squared: n2 });
        }
        Ok(())
    }

    fn same_geometry(&self, other: &Self) -> bool {
        self.origin == other.origin && self.spacing == other.spacing && self.dims == other.dims
    }

    pub fn point(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [
            self.origin[0] + self.spacing[0] * ix as f64,
            self.origin[1] + self.spacing[1] * iy as f64,
            self.origin[2] + self.spacing[2] * iz as f64,
        ]
    }

    /// Parse the `NVGRID 1` text format: magic line, optional `#` comments,
    /// origin/spacing/dims header lines, then whitespace-separated samples.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, ZfsError> {
        let mut origin = None;
        let mut spacing = None;
        let mut dims: Option<[usize; 3]> = None;
        let mut values: Vec<f64> = Vec::new();
        let mut saw_magic = false;

        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if !saw_magic {
                if trimmed != GRID_MAGIC {
                    return Err(ZfsError::Parse {
                        line: lineno,
                        message: format!("expected magic '{GRID_MAGIC}', got '{trimmed}'"),
                    });
                }
                saw_magic = true;
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            let head = tokens.next().unwrap();
            match head {
                "origin" | "spacing" => {
                    let vals = parse_three_f64(tokens, lineno)?;
                    if head == "origin" {
                        origin = Some(vals);
                    } else {
                        spacing = Some(vals);
                    }
                }
                "dims" => {
                    let mut out = [0usize; 3];
                    for slot in &mut out {
                        let tok = tokens.next().ok_or_else(|| ZfsError::Parse {
                            line: lineno,
                            message: "dims needs three integers".into(),
                        })?;
                        *slot = tok.parse().map_err(|_| ZfsError::Parse {
                            line: lineno,
                            message: format!("bad dimension '{tok}'"),
                        })?;
                    }
                    dims = Some(out);
                }
                _ => {
                    if dims.is_none() {
                        return Err(ZfsError::Parse {
                            line: lineno,
                            message: format!("unexpected header line '{trimmed}'"),
                        });
                    }
                    for tok in trimmed.split_whitespace() {
                        values.push(tok.parse().map_err(|_| ZfsError::Parse {
                            line: lineno,
                            message: format!("bad sample value '{tok}'"),
                        })?);
                    }
                }
            }
        }
        let origin = origin.ok_or(ZfsError::MissingHeader("origin"))?;
        let spacing = spacing.ok_or(ZfsError::MissingHeader("spacing"))?;
        let dims = dims.ok_or(ZfsError::MissingHeader("dims"))?;
        Self::new(origin, spacing, dims, values)
    }

    pub fn load(path: &Path) -> Result<Self, ZfsError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), ZfsError> {
        writeln!(w, "{GRID_MAGIC}")?;
        writeln!(
            w,
            "origin {:.16e} {:.16e} {:.16e}",
            self.origin[0], self.origin[1], self.origin[2]
        )?;
        writeln!(
            w,
            "spacing {:.16e} {:.16e} {:.16e}",
            self.spacing[0], self.spacing[1], self.spacing[2]
        )?;
        writeln!(w, "dims {} {} {}", self.dims[0], self.dims[1], self.dims[2])?;
        let mut line = String::new();
        for chunk in self.values.chunks(4) {
            line.clear();
            for (k, v) in chunk.iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{v:.16e}");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ZfsError> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))
    }
}

fn parse_three_f64<'a, I: Iterator<Item = &'a str>>(
    mut tokens: I,
    lineno: usize,
) -> Result<[f64; 3], ZfsError> {
    let mut out = [0.0; 3];
    for slot in &mut out {
        let tok = tokens.next().ok_or_else(|| ZfsError::Parse {
            line: lineno,
            message: "expected three numbers".into(),
        })?;
        *slot = tok.parse().map_err(|_| ZfsError::Parse {
            line: lineno,
            message: format!("bad number '{tok}'"),
        })?;
    }
    Ok(out)
}

/// Two single-orbital grids plus the spin-alignment sign; the pair density
/// |psi_ij|^2 is assembled from these internally.
#[derive(Debug, Clone)]
pub struct PairDensityGrid {
    pub psi_i: OrbitalGrid,
    pub psi_j: OrbitalGrid,
    pub chi: SpinAlignment,
}

/// Symmetric traceless coupling tensor in Hz with derived scalars.
/// Principal values are sorted by magnitude, largest first; D carries the
/// sign of the dominant principal value, E is half the spread of the
/// remaining two (non-negative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZfsTensor {
    pub components_hz: [[f64; 3]; 3],
    pub principal_values_hz: [f64; 3],
    pub d_scalar_hz: f64,
    pub e_scalar_hz: f64,
}

impl ZfsTensor {
    pub fn from_components(components_hz: [[f64; 3]; 3]) -> Self {
        let mut m = nalgebra::Matrix3::<num_complex::Complex64>::zeros();
        for r in 0..3 {
            for c in 0..3 {
                m[(r, c)] = num_complex::Complex64::new(components_hz[r][c], 0.0);
            }
        }
        let (vals, _) = hermitian_eigen_3x3(&m);
        let mut principal = [vals[0], vals[1], vals[2]];
        principal.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
        let d_scalar_hz = 1.5 * principal[0];
        let e_scalar_hz = (principal[1] - principal[2]).abs() / 2.0;
        Self { components_hz, principal_values_hz: principal, d_scalar_hz, e_scalar_hz }
    }

    pub fn trace(&self) -> f64 {
        self.components_hz[0][0] + self.components_hz[1][1] + self.components_hz[2][2]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.components_hz
            .iter()
            .flatten()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

}

#[derive(Debug, Error)]
pub enum ZfsError {
    #[error("dipolar kernel is singular at zero separation")]
    Singularity,
    #[error("orbital grids do not share origin/spacing/dims")]
    GridMismatch,
    #[error("orbital grid is not L2-normalized: |psi|^2 dV = {norm_squared}")]
    NotNormalized { norm_squared: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("spin number must satisfy 2S(2S-1) > 0, got S = {0}")]
    InvalidSpin(f64),
    #[error("empty pair list")]
    EmptyPairList,
    #[error("grid file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("grid file is missing the '{0}' header")]
    MissingHeader(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// (r^2 delta_ab - 3 r_a r_b) / r^5 in 1/Angstrom^3.
pub fn dipolar_kernel(r: [f64; 3], a: Axis, b: Axis) -> Result<f64, ZfsError> {
    let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    if r2 == 0.0 {
        return Err(ZfsError::Singularity);
    }
    let r5 = r2 * r2 * r2.sqrt();
    let delta = if a == b { r2 } else { 0.0 };
    Ok((delta - 3.0 * r[a as usize] * r[b as usize]) / r5)
}

/// Eq. prefactor in Hz.Angstrom^3: (gamma_e h)^2 mu0/4pi / (2S(2S-1)),
/// divided by h to express the energy as a frequency, with the kernel's
/// 1/m^3 converted to 1/Angstrom^3.
pub fn zfs_prefactor_hz_a3(spin: f64) -> Result<f64, ZfsError> {
    let denom = 2.0 * spin * (2.0 * spin - 1.0);
    if !(denom > 0.0) {
        return Err(ZfsError::InvalidSpin(spin));
    }
    Ok(GAMMA_E_HZ_PER_T * GAMMA_E_HZ_PER_T * H_J_S * MU0_OVER_4PI * 1e30 / denom)
}

/// Delta-density limit of the pair tensor: two point spins separated by
/// `r12_angstrom`. Serves as the analytic oracle for the grid quadrature.
pub fn zfs_point_dipole(
    r12_angstrom: [f64; 3],
    chi: SpinAlignment,
    spin: f64,
) -> Result<ZfsTensor, ZfsError> {
    let pref = zfs_prefactor_hz_a3(spin)? * chi.sign();
    let axes = [Axis::X, Axis::Y, Axis::Z];
    let mut components = [[0.0; 3]; 3];
    for (i, &a) in axes.iter().enumerate() {
        for (j, &b) in axes.iter().enumerate().skip(i) {
            let k = dipolar_kernel(r12_angstrom, a, b)? * pref;
            components[i][j] = k;
            components[j][i] = k;
        }
    }
    Ok(ZfsTensor::from_components(components))
}

/// Relative threshold below which a grid point cannot contribute above
/// roundoff and is skipped.
const PRUNE_REL: f64 = 1e-14;

/// Single-pair tensor <psi_ij| kernel |psi_ij> with the determinant
/// expanded: sum over ordered point pairs (r != r') of
/// [rho_i(r) rho_j(r') - s(r) s(r')] K(r - r') dV^2, times the prefactor
/// and chi. Accumulation is blockwise with compensated sums and a fixed
/// reduction order, so results are identical for any worker count.
pub fn zfs_from_orbitals(
    psi_i: &OrbitalGrid,
    psi_j: &OrbitalGrid,
    chi: SpinAlignment,
    spin: f64,
) -> Result<ZfsTensor, ZfsError> {
    if !psi_i.same_geometry(psi_j) {
        return Err(ZfsError::GridMismatch);
    }
    psi_i.check_normalized()?;
    psi_j.check_normalized()?;
    let pref = zfs_prefactor_hz_a3(spin)? * chi.sign();

    let n = psi_i.values.len();
    let mut positions = Vec::with_capacity(n);
    for ix in 0..psi_i.dims[0] {
        for iy in 0..psi_i.dims[1] {
            for iz in 0..psi_i.dims[2] {
                positions.push(psi_i.point(ix, iy, iz));
            }
        }
    }
    let rho_i: Vec<f64> = psi_i.values.iter().map(|v| v * v).collect();
    let rho_j: Vec<f64> = psi_j.values.iter().map(|v| v * v).collect();
    let overlap: Vec<f64> = psi_i
        .values
        .iter()
        .zip(&psi_j.values)
        .map(|(a, b)| a * b)
        .collect();

    let rho_i_max = rho_i.iter().cloned().fold(0.0f64, f64::max);
    let rho_j_max = rho_j.iter().cloned().fold(0.0f64, f64::max);
    let s_max = overlap.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let active: Vec<u32> = (0..n)
        .filter(|&k| {
            rho_i[k] > PRUNE_REL * rho_i_max
                || rho_j[k] > PRUNE_REL * rho_j_max
                || overlap[k].abs() > PRUNE_REL * s_max
        })
        .map(|k| k as u32)
        .collect();

    const BLOCK: usize = 512;
    let partials: Vec<[f64; 6]> = active
        .par_chunks(BLOCK)
        .map(|block| {
            let mut sum = [0.0f64; 6];
            let mut comp = [0.0f64; 6];
            for &pu in block {
                let p = pu as usize;
                let rp = positions[p];
                let rip = rho_i[p];
                let sp = overlap[p];
                for &qu in &active {
                    let q = qu as usize;
                    if p == q {
                        continue;
                    }
                    let w = rip * rho_j[q] - sp * overlap[q];
                    if w == 0.0 {
                        continue;
                    }
                    let rq = positions[q];
                    let dx = rp[0] - rq[0];
                    let dy = rp[1] - rq[1];
                    let dz = rp[2] - rq[2];
                    let r2 = dx * dx + dy * dy + dz * dz;
                    let inv_r5 = 1.0 / (r2 * r2 * r2.sqrt());
                    let terms = [
                        (r2 - 3.0 * dx * dx) * inv_r5,
                        (r2 - 3.0 * dy * dy) * inv_r5,
                        (r2 - 3.0 * dz * dz) * inv_r5,
                        -3.0 * dx * dy * inv_r5,
                        -3.0 * dx * dz * inv_r5,
                        -3.0 * dy * dz * inv_r5,
                    ];
                    for (k, t) in terms.iter().enumerate() {
                        // Kahan update keeps the block sum stable.
                        let y = w * t - comp[k];
                        let s = sum[k] + y;
                        comp[k] = (s - sum[k]) - y;
                        sum[k] = s;
                    }
                }
            }
            sum
        })
        .collect();

    let mut totals = [0.0f64; 6];
    for part in &partials {
        for k in 0..6 {
            totals[k] += part[k];
        }
    }
    let dv2 = psi_i.volume_element() * psi_i.volume_element();
    for t in &mut totals {
        *t *= dv2 * pref;
    }
    let components = [
        [totals[0], totals[3], totals[4]],
        [totals[3], totals[1], totals[5]],
        [totals[4], totals[5], totals[2]],
    ];
    Ok(ZfsTensor::from_components(components))
}

/// Component-wise sum over pairs; derived scalars recomputed from the sum.
pub fn zfs_sum_pairs(pairs: &[PairDensityGrid], spin: f64) -> Result<ZfsTensor, ZfsError> {
    if pairs.is_empty() {
        return Err(ZfsError::EmptyPairList);
    }
    let first = &pairs[0];
    let mut components = [[0.0; 3]; 3];
    for pair in pairs {
        if !pair.psi_i.same_geometry(&first.psi_i) {
            return Err(ZfsError::GridMismatch);
        }
        let tensor = zfs_from_orbitals(&pair.psi_i, &pair.psi_j, pair.chi, spin)?;
        for r in 0..3 {
            for c in 0..3 {
                components[r][c] += tensor.components_hz[r][c];
            }
        }
    }
    Ok(ZfsTensor::from_components(components))
}
