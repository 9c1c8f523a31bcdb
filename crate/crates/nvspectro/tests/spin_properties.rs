//! Property tests for the spin Hamiltonian invariants: Hermiticity, the
//! trace identity, the axial closed form, rotational covariance, and
//! branch continuity across field sweeps.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;

use nvspectro::constants::{energy_to_wavelength, wavelength_to_energy};
use nvspectro::spin::{
    build_hamiltonian, eigen_system, field_sweep, orientation_transitions, HamiltonianParams,
    MagneticField, NvOrientation,
};

fn frobenius(m: &Matrix3<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn params_strategy() -> impl Strategy<Value = HamiltonianParams> {
    (1.0e9..5.0e9, 0.0..5.0e7).prop_map(|(d_hz, e_nv_hz)| HamiltonianParams {
        d_hz,
        e_nv_hz,
        gamma_e_hz_per_t: 28.03e9,
    })
}

fn field_strategy() -> impl Strategy<Value = Vector3<f64>> {
    (-0.05..0.05f64, -0.05..0.05f64, -0.05..0.05f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn axis_strategy() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero axis", |(x, y, z)| (x * x + y * y + z * z) > 1e-2)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

proptest! {
    #[test]
    fn hamiltonian_is_hermitian(
        params in params_strategy(),
        b in field_strategy(),
        axis in axis_strategy(),
    ) {
        let orientation = NvOrientation::from_axis(axis, 1).unwrap();
        let h = build_hamiltonian(&params, &MagneticField(b), &orientation);
        let deviation = frobenius(&(h - h.adjoint()));
        prop_assert!(deviation <= 1e-12 * frobenius(&h));
    }

    #[test]
    fn trace_is_twice_d(
        params in params_strategy(),
        b in field_strategy(),
        axis in axis_strategy(),
    ) {
        let orientation = NvOrientation::from_axis(axis, 1).unwrap();
        let h = build_hamiltonian(&params, &MagneticField(b), &orientation);
        let trace = (h[(0, 0)] + h[(1, 1)] + h[(2, 2)]).re;
        prop_assert!((trace - 2.0 * params.d_hz).abs() <= 1e-9 * params.d_hz.max(1.0));
    }

    #[test]
    fn axial_field_matches_closed_form(
        params in params_strategy(),
        b_mag in 0.0..0.1f64,
        orientation_idx in 0usize..4,
    ) {
        let orientation = NvOrientation::all_four()[orientation_idx];
        let field = MagneticField(orientation.axis() * b_mag);
        let [lo, hi] = orientation_transitions(&params, &field, &orientation).unwrap();
        let zeeman = params.gamma_e_hz_per_t * b_mag;
        let split = (zeeman * zeeman + params.e_nv_hz * params.e_nv_hz).sqrt();
        prop_assert!((lo - (params.d_hz - split)).abs() <= 1e-9 * params.d_hz);
        prop_assert!((hi - (params.d_hz + split)).abs() <= 1e-9 * params.d_hz);
    }

    #[test]
    fn eigensystem_residuals_within_bound(
        params in params_strategy(),
        b in field_strategy(),
        axis in axis_strategy(),
    ) {
        let orientation = NvOrientation::from_axis(axis, 1).unwrap();
        let h = build_hamiltonian(&params, &MagneticField(b), &orientation);
        let (vals, vecs) = eigen_system(&h).unwrap();
        let scale = frobenius(&h);
        for k in 0..3 {
            let v = vecs.column(k);
            let residual = (h * v - v * Complex64::new(vals[k], 0.0)).norm();
            prop_assert!(residual <= 1e-9 * scale);
        }
    }

    /// With E = 0 the Hamiltonian is azimuthally symmetric about the NV
    /// axis, so co-rotating field and axis by any rotation preserves the
    /// transitions.
    #[test]
    fn rotational_covariance_without_transverse_term(
        d in 1.0e9..5.0e9f64,
        b in field_strategy(),
        axis in axis_strategy(),
        rot_axis in axis_strategy(),
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let params = HamiltonianParams { d_hz: d, e_nv_hz: 0.0, gamma_e_hz_per_t: 28.03e9 };
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(rot_axis), angle);
        let orientation = NvOrientation::from_axis(axis, 1).unwrap();
        let rotated = NvOrientation::from_axis(rotation * axis, 1).unwrap();
        let before =
            orientation_transitions(&params, &MagneticField(b), &orientation).unwrap();
        let after =
            orientation_transitions(&params, &MagneticField(rotation * b), &rotated).unwrap();
        for k in 0..2 {
            prop_assert!((before[k] - after[k]).abs() <= 1e-9 * params.d_hz);
        }
    }

    /// With E != 0 the transverse axes matter; rotations that keep the
    /// lab x reference (and with it the local-frame convention) covariant
    /// still preserve the spectrum exactly.
    #[test]
    fn rotational_covariance_about_frame_reference(
        params in params_strategy(),
        b in field_strategy(),
        axis in axis_strategy(),
        angle in 0.0..std::f64::consts::TAU,
    ) {
        let rotation = Rotation3::from_axis_angle(&Vector3::x_axis(), angle);
        let orientation = NvOrientation::from_axis(axis, 1).unwrap();
        let rotated = NvOrientation::from_axis(rotation * axis, 1).unwrap();
        let before =
            orientation_transitions(&params, &MagneticField(b), &orientation).unwrap();
        let after =
            orientation_transitions(&params, &MagneticField(rotation * b), &rotated).unwrap();
        for k in 0..2 {
            prop_assert!((before[k] - after[k]).abs() <= 1e-9 * params.d_hz);
        }
    }

    #[test]
    fn wavelength_energy_round_trip(e in 0.1..10.0f64) {
        let back = wavelength_to_energy(energy_to_wavelength(e).unwrap()).unwrap();
        prop_assert!((back - e).abs() <= 1e-12 * e);
    }

    /// At fixed |B| with the Zeeman projection dominating E, orientations
    /// with a larger |cos theta| split more.
    #[test]
    fn splitting_grows_with_projection(direction in axis_strategy()) {
        let params = HamiltonianParams {
            d_hz: 2.88e9,
            e_nv_hz: 2.0e6,
            gamma_e_hz_per_t: 28.03e9,
        };
        let b_mag = 0.02;
        let unit = direction.normalize();
        let field = MagneticField(unit * b_mag);
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for orientation in NvOrientation::all_four() {
            let cos = orientation.axis().dot(&unit).abs();
            let [lo, hi] = orientation_transitions(&params, &field, &orientation).unwrap();
            rows.push((cos, hi - lo));
        }
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for pair in rows.windows(2) {
            // Only order pairs whose projections are clearly separated.
            if pair[1].0 - pair[0].0 > 0.05 {
                prop_assert!(pair[1].1 > pair[0].1);
            }
        }
    }
}

#[test]
fn sweep_branches_are_continuous() {
    let params = HamiltonianParams::nv_defaults();
    for direction in [
        Vector3::new(1.0, 1.0, 0.0),
        Vector3::new(1.0, 1.0, 1.0),
        Vector3::new(0.3, -0.2, 0.9),
    ] {
        let rows = field_sweep(&params, direction, 0.0, 0.05, 101, 1e6).unwrap();
        let step_t = 0.05 / 100.0;
        for orientation in 0..4 {
            for branch in 0..2 {
                let series: Vec<f64> = rows
                    .iter()
                    .map(|r| r.branch_frequencies_hz[orientation][branch])
                    .collect();
                for k in 1..series.len() - 1 {
                    let slope = (series[k + 1] - series[k - 1]) / (2.0 * step_t);
                    let predicted = slope.abs() * step_t + 1.0;
                    let jump = (series[k + 1] - series[k]).abs();
                    assert!(
                        jump < 10.0 * predicted,
                        "branch jump {jump} vs predicted {predicted} at row {k}"
                    );
                }
            }
        }
    }
}
