//! NV- ground-state spin triplet: Hamiltonian construction, transition
//! frequencies for the four crystallographic orientations, field sweeps,
//! and a phenomenological ODMR lineshape.
//!
//! Everything is expressed in ordinary frequency units: the matrix returned
//! by [`build_hamiltonian`] is H/h in Hz. The working basis is |+1>, |0>,
//! |-1> of Sz in the NV local frame, with z' along the orientation axis.

use nalgebra::{Matrix3, Unit, Vector3};
use num_complex::Complex64;
use thiserror::Error;

use crate::constants::GAMMA_E_HZ_PER_T;
use crate::eigen::{frobenius, hermitian_eigen_3x3};

/// Spin-1 operators in units of hbar, |+1>, |0>, |-1> basis.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub sx: Matrix3<Complex64>,
    pub sy: Matrix3<Complex64>,
    pub sz: Matrix3<Complex64>,
    pub splus: Matrix3<Complex64>,
    pub sminus: Matrix3<Complex64>,
}

impl SpinOperators {
    pub fn spin1() -> Self {
        let r = |x: f64| Complex64::new(x, 0.0);
        let i = |x: f64| Complex64::new(0.0, x);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let sx = Matrix3::new(
            r(0.0), r(inv_sqrt2), r(0.0),
            r(inv_sqrt2), r(0.0), r(inv_sqrt2),
            r(0.0), r(inv_sqrt2), r(0.0),
        );
        let sy = Matrix3::new(
            r(0.0), i(-inv_sqrt2), r(0.0),
            i(inv_sqrt2), r(0.0), i(-inv_sqrt2),
            r(0.0), i(inv_sqrt2), r(0.0),
        );
        let sz = Matrix3::new(
            r(1.0), r(0.0), r(0.0),
            r(0.0), r(0.0), r(0.0),
            r(0.0), r(0.0), r(-1.0),
        );
        let i_unit = Complex64::new(0.0, 1.0);
        let splus = sx + sy * i_unit;
        let sminus = sx - sy * i_unit;
        Self { sx, sy, sz, splus, sminus }
    }
}

/// Zero-field splitting D, transverse splitting E, gyromagnetic ratio.
/// All in Hz (per Tesla for gamma).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HamiltonianParams {
    pub d_hz: f64,
    pub e_nv_hz: f64,
    pub gamma_e_hz_per_t: f64,
}

impl HamiltonianParams {
    /// Ensemble values: D = 2.88 GHz, E = 10 MHz.
    pub fn nv_defaults() -> Self {
        Self {
            d_hz: 2.88e9,
            e_nv_hz: 10.0e6,
            gamma_e_hz_per_t: GAMMA_E_HZ_PER_T,
        }
    }

    /// Hard invariants reject; the soft E << D condition only warns.
    pub fn validate(&self) -> Result<Vec<String>, SpinError> {
        if !self.d_hz.is_finite() || self.d_hz <= 0.0 {
            return Err(SpinError::InvalidParams(format!(
                "D must be positive and finite, got {} Hz",
                self.d_hz
            )));
        }
        if !self.e_nv_hz.is_finite() || self.e_nv_hz < 0.0 {
            return Err(SpinError::InvalidParams(format!(
                "E_NV must be non-negative and finite, got {} Hz",
                self.e_nv_hz
            )));
        }
        if !self.gamma_e_hz_per_t.is_finite() || self.gamma_e_hz_per_t <= 0.0 {
            return Err(SpinError::InvalidParams(format!(
                "gamma_e must be positive and finite, got {} Hz/T",
                self.gamma_e_hz_per_t
            )));
        }
        let mut warnings = Vec::new();
        if self.e_nv_hz > 0.1 * self.d_hz {
            warnings.push(format!(
                "E_NV = {:.3e} Hz is not small against D = {:.3e} Hz",
                self.e_nv_hz, self.d_hz
            ));
        }
        Ok(warnings)
    }
}

/// One of the four <111> NV axes, unit-normalized, labelled 1..4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NvOrientation {
    axis: Unit<Vector3<f64>>,
    label: u8,
}

impl NvOrientation {
    pub fn from_axis(axis: Vector3<f64>, label: u8) -> Result<Self, SpinError> {
        if !(1..=4).contains(&label) {
            return Err(SpinError::InvalidParams(format!(
                "orientation label must be 1..4, got {label}"
            )));
        }
        let norm = axis.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(SpinError::InvalidParams(
                "orientation axis must be a nonzero finite vector".into(),
            ));
        }
        Ok(Self { axis: Unit::new_normalize(axis), label })
    }

    /// The four body-diagonal directions of the diamond cubic lattice.
    pub fn all_four() -> [NvOrientation; 4] {
        let axes = [
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, -1.0, -1.0),
            Vector3::new(-1.0, 1.0, -1.0),
            Vector3::new(-1.0, -1.0, 1.0),
        ];
        std::array::from_fn(|k| NvOrientation {
            axis: Unit::new_normalize(axes[k]),
            label: (k + 1) as u8,
        })
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis.into_inner()
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}

/// Magnetic field vector in Tesla, crystal cubic frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticField(pub Vector3<f64>);

impl MagneticField {
    pub fn magnitude(&self) -> f64 {
        self.0.norm()
    }
}

/// One ODMR resonance: frequency, the orientation it belongs to, which of
/// the two branches, and how many orientation-branches were merged into it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransitionLine {
    pub frequency_hz: f64,
    pub orientation: u8,
    pub branch: i8,
    pub multiplicity: u32,
}

/// ODMR lines sorted ascending in frequency.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransitionSet {
    pub lines: Vec<TransitionLine>,
}

impl TransitionSet {
    pub fn total_multiplicity(&self) -> u32 {
        self.lines.iter().map(|l| l.multiplicity).sum()
    }
}

/// Per-orientation lower/upper transition frequencies of a sweep step,
/// before degeneracy merging. Index 0 is orientation 1.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepPoint {
    pub field_t: f64,
    pub branch_frequencies_hz: [[f64; 2]; 4],
    pub lines: TransitionSet,
}

#[derive(Debug, Error)]
pub enum SpinError {
    #[error("invalid spin parameters: {0}")]
    InvalidParams(String),
    #[error("matrix is not Hermitian within {tolerance:.1e} relative (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64, tolerance: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("invalid lineshape parameters: {0}")]
    InvalidLineshape(String),
}

/// Orthonormal local frame (x', y', z') with z' along the orientation axis.
/// x' is the normalized projection of lab z onto the plane normal to the
/// axis; lab x is used when the axis is (anti)parallel to lab z. With this
/// choice a [110] field lands along the local y' of the two perpendicular
/// <111> orientations, where the E term and the second-order Zeeman shift
/// partially cancel and the inner line pair stays nearly degenerate, as
/// observed in field-swept ODMR.
pub fn local_frame(axis: &Unit<Vector3<f64>>) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let z = axis.into_inner();
    let candidate = Vector3::new(0.0, 0.0, 1.0);
    let mut x = candidate - z * candidate.dot(&z);
    if x.norm() < 1e-9 {
        let fallback = Vector3::new(1.0, 0.0, 0.0);
        x = fallback - z * fallback.dot(&z);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    (x, y, z)
}

/// H/h in Hz for Eq.-of-motion parameters `params`, lab-frame field `field`,
/// and the given NV orientation:
/// D Sz'^2 - gamma B'.S' + (E/2)(S'+^2 + S'-^2) in the NV local frame.
pub fn build_hamiltonian(
    params: &HamiltonianParams,
    field: &MagneticField,
    orientation: &NvOrientation,
) -> Matrix3<Complex64> {
    let ops = SpinOperators::spin1();
    let (x, y, z) = local_frame(&orientation.axis);
    let bx = field.0.dot(&x);
    let by = field.0.dot(&y);
    let bz = field.0.dot(&z);
    let g = params.gamma_e_hz_per_t;

    let c = |v: f64| Complex64::new(v, 0.0);
    let sz2 = ops.sz * ops.sz;
    let e_term = (ops.splus * ops.splus + ops.sminus * ops.sminus) * c(params.e_nv_hz / 2.0);
    sz2 * c(params.d_hz) - (ops.sx * c(g * bx) + ops.sy * c(g * by) + ops.sz * c(g * bz)) + e_term
}

const HERMITICITY_TOL: f64 = 1e-9;

fn check_hermitian(h: &Matrix3<Complex64>) -> Result<(), SpinError> {
    let scale = frobenius(h).max(f64::MIN_POSITIVE);
    let deviation = frobenius(&(h - h.adjoint())) / scale;
    if deviation > HERMITICITY_TOL {
        return Err(SpinError::NotHermitian { deviation, tolerance: HERMITICITY_TOL });
    }
    Ok(())
}

/// Real eigenvalues of a Hermitian matrix in Hz, ascending.
pub fn eigenfrequencies(h: &Matrix3<Complex64>) -> Result<[f64; 3], SpinError> {
    check_hermitian(h)?;
    let (vals, _) = hermitian_eigen_3x3(h);
    Ok(vals)
}

/// Eigenvalues and eigenvectors; the vectors identify the m_s = 0-like state.
pub fn eigen_system(
    h: &Matrix3<Complex64>,
) -> Result<([f64; 3], Matrix3<Complex64>), SpinError> {
    check_hermitian(h)?;
    Ok(hermitian_eigen_3x3(h))
}

/// Lower/upper transition frequencies for one orientation. The reference
/// state is the eigenvector with the largest |<0|v>|^2, not the lowest
/// eigenvalue; at large transverse fields ordering alone mislabels branches.
pub fn orientation_transitions(
    params: &HamiltonianParams,
    field: &MagneticField,
    orientation: &NvOrientation,
) -> Result<[f64; 2], SpinError> {
    let h = build_hamiltonian(params, field, orientation);
    let (vals, vecs) = eigen_system(&h)?;
    let mut zero_like = 0;
    let mut best = -1.0;
    for k in 0..3 {
        let overlap = vecs[(1, k)].norm_sqr();
        if overlap > best {
            best = overlap;
            zero_like = k;
        }
    }
    let others: Vec<f64> = (0..3)
        .filter(|&k| k != zero_like)
        .map(|k| vals[k] - vals[zero_like])
        .collect();
    let (lo, hi) = if others[0] <= others[1] {
        (others[0], others[1])
    } else {
        (others[1], others[0])
    };
    Ok([lo, hi])
}

/// ODMR lines for all four orientations, with lines closer than
/// `degeneracy_tol_hz` merged into one entry of summed multiplicity.
pub fn odmr_lines(
    params: &HamiltonianParams,
    field: &MagneticField,
    degeneracy_tol_hz: f64,
) -> Result<TransitionSet, SpinError> {
    if !(degeneracy_tol_hz > 0.0) {
        return Err(SpinError::InvalidParams(format!(
            "degeneracy tolerance must be positive, got {degeneracy_tol_hz}"
        )));
    }
    params.validate()?;
    let mut raw: Vec<TransitionLine> = Vec::with_capacity(8);
    for orientation in NvOrientation::all_four() {
        let [lo, hi] = orientation_transitions(params, field, &orientation)?;
        raw.push(TransitionLine {
            frequency_hz: lo,
            orientation: orientation.label(),
            branch: -1,
            multiplicity: 1,
        });
        raw.push(TransitionLine {
            frequency_hz: hi,
            orientation: orientation.label(),
            branch: 1,
            multiplicity: 1,
        });
    }
    raw.sort_by(|a, b| a.frequency_hz.partial_cmp(&b.frequency_hz).unwrap());

    let mut lines: Vec<TransitionLine> = Vec::new();
    let mut cluster: Vec<TransitionLine> = Vec::new();
    for line in raw {
        if let Some(last) = cluster.last() {
            if line.frequency_hz - last.frequency_hz > degeneracy_tol_hz {
                lines.push(merge_cluster(&cluster));
                cluster.clear();
            }
        }
        cluster.push(line);
    }
    if !cluster.is_empty() {
        lines.push(merge_cluster(&cluster));
    }
    Ok(TransitionSet { lines })
}

fn merge_cluster(cluster: &[TransitionLine]) -> TransitionLine {
    let n = cluster.len() as f64;
    let mean = cluster.iter().map(|l| l.frequency_hz).sum::<f64>() / n;
    let representative = cluster
        .iter()
        .min_by_key(|l| (l.orientation, l.branch))
        .expect("cluster is non-empty");
    TransitionLine {
        frequency_hz: mean,
        orientation: representative.orientation,
        branch: representative.branch,
        multiplicity: cluster.iter().map(|l| l.multiplicity).sum(),
    }
}

/// ODMR lines on a uniform grid of field magnitudes along `direction`.
pub fn field_sweep(
    params: &HamiltonianParams,
    direction: Vector3<f64>,
    b_min_t: f64,
    b_max_t: f64,
    steps: usize,
    degeneracy_tol_hz: f64,
) -> Result<Vec<SweepPoint>, SpinError> {
    if steps < 2 {
        return Err(SpinError::InvalidSweep(format!("steps must be >= 2, got {steps}")));
    }
    if !(b_min_t <= b_max_t) {
        return Err(SpinError::InvalidSweep(format!(
            "B range is inverted: {b_min_t} > {b_max_t}"
        )));
    }
    let norm = direction.norm();
    if !norm.is_finite() || norm == 0.0 {
        return Err(SpinError::InvalidSweep("sweep direction must be nonzero".into()));
    }
    let unit = direction / norm;
    let orientations = NvOrientation::all_four();
    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        let b = b_min_t + (b_max_t - b_min_t) * (k as f64) / ((steps - 1) as f64);
        let field = MagneticField(unit * b);
        let mut branch_frequencies_hz = [[0.0; 2]; 4];
        for (idx, orientation) in orientations.iter().enumerate() {
            branch_frequencies_hz[idx] = orientation_transitions(params, &field, orientation)?;
        }
        let lines = odmr_lines(params, &field, degeneracy_tol_hz)?;
        rows.push(SweepPoint { field_t: b, branch_frequencies_hz, lines });
    }
    Ok(rows)
}

/// Sum of Lorentzian dips: signal(f) = sum_l m_l c G^2 / ((f - f_l)^2 + G^2).
/// An isolated line peaks at multiplicity x contrast.
pub fn synthesize_odmr_spectrum(
    lines: &TransitionSet,
    linewidth_hz: f64,
    contrast: f64,
    f_grid_hz: &[f64],
) -> Result<Vec<f64>, SpinError> {
    if !(linewidth_hz > 0.0) {
        return Err(SpinError::InvalidLineshape(format!(
            "linewidth must be positive, got {linewidth_hz}"
        )));
    }
    if !(contrast > 0.0 && contrast < 1.0) {
        return Err(SpinError::InvalidLineshape(format!(
            "contrast must lie in (0, 1), got {contrast}"
        )));
    }
    let g2 = linewidth_hz * linewidth_hz;
    Ok(f_grid_hz
        .iter()
        .map(|&f| {
            lines
                .lines
                .iter()
                .map(|l| {
                    let df = f - l.frequency_hz;
                    l.multiplicity as f64 * contrast * g2 / (df * df + g2)
                })
                .sum()
        })
        .collect())
}
