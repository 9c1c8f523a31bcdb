//! Acceptance suite. Each test checks one release criterion at its stated
//! tolerance and prints a PASS line; run with `--nocapture` to see them.

use std::process::Command;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nvspectro::config::RunConfig;
use nvspectro::constants::HC_EV_NM;
use nvspectro::fit::{
    fit_mott_seitz, fit_phonon_shift, numeric_jacobian, DataPoint, DataSeries, FitModel,
    MottSeitzModel, PhononShiftModel, PolyModel, StepPolicy,
};
use nvspectro::spectra::{peak_shift_series, AxisKind, Spectrum};
use nvspectro::spin::{
    build_hamiltonian, eigen_system, odmr_lines, orientation_transitions, HamiltonianParams,
    MagneticField, NvOrientation,
};
use nvspectro::thermal::{
    delta_d, mott_seitz_intensity, normalized_expansion_rate, normalized_slope, phonon_shift,
    LatticeTable, MottSeitzParams, PhononShiftParams,
};
use nvspectro::zfs::{zfs_from_orbitals, zfs_point_dipole, OrbitalGrid, SpinAlignment};

fn pass(n: u32, what: &str) {
    println!("ACCEPTANCE {n} PASS: {what}");
}

/// 1. Zero-field ODMR doublet at 2870/2890 MHz within 1 kHz, under 1 s.
#[test]
fn acceptance_01_zero_field_doublet() {
    let start = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_nvspectro"))
        .env_remove("NV_CONFIG")
        .args(["lines", "--field", "0,0,0"])
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let json: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let lines = json["lines"].as_array().unwrap();
    assert_eq!(lines.len(), 2);
    let f0 = lines[0]["frequency_hz"].as_f64().unwrap();
    let f1 = lines[1]["frequency_hz"].as_f64().unwrap();
    assert!((f0 - 2.870e9).abs() <= 1e3, "lower line {f0} Hz");
    assert!((f1 - 2.890e9).abs() <= 1e3, "upper line {f1} Hz");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(1, "zero-field doublet at 2870/2890 MHz within 1 kHz");
}

/// 2. Field along [110] at 10 mT: 4 distinct lines of multiplicity 2;
///    the perpendicular pair splits < 15 MHz, the projected pair
///    > 400 MHz; every branch agrees with an independent dense
///    eigensolver within 1 MHz.
#[test]
fn acceptance_02_degeneracy_pattern() {
    let params = HamiltonianParams::nv_defaults();
    let field = MagneticField(Vector3::new(1.0, 1.0, 0.0).normalize() * 10e-3);
    let set = odmr_lines(&params, &field, 1e6).unwrap();
    assert_eq!(set.lines.len(), 4, "expected 4 distinct lines");
    for line in &set.lines {
        assert_eq!(line.multiplicity, 2);
    }
    let f: Vec<f64> = set.lines.iter().map(|l| l.frequency_hz).collect();
    let inner_split = f[2] - f[1];
    let outer_split = f[3] - f[0];
    assert!(inner_split < 15e6, "inner pair split {inner_split} Hz");
    assert!(outer_split > 400e6, "outer pair split {outer_split} Hz");

    // Independent oracle: nalgebra's dense Hermitian eigensolver on the
    // same Hamiltonians, transitions identified the same way.
    for orientation in NvOrientation::all_four() {
        let h = build_hamiltonian(&params, &field, &orientation);
        let dense = nalgebra::SymmetricEigen::new(h);
        let mut best = 0;
        let mut best_overlap = -1.0;
        for k in 0..3 {
            let overlap = dense.eigenvectors[(1, k)].norm_sqr();
            if overlap > best_overlap {
                best_overlap = overlap;
                best = k;
            }
        }
        let mut oracle: Vec<f64> = (0..3)
            .filter(|&k| k != best)
            .map(|k| dense.eigenvalues[k] - dense.eigenvalues[best])
            .collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ours = orientation_transitions(&params, &field, &orientation).unwrap();
        for k in 0..2 {
            assert!(
                (ours[k] - oracle[k]).abs() <= 1e6,
                "orientation {}: {} vs oracle {}",
                orientation.label(),
                ours[k],
                oracle[k]
            );
        }
    }
    pass(2, "[110] 10 mT: 4 lines x2, splits <15 / >400 MHz, dense-oracle match within 1 MHz");
}

/// 3. Shipped D(T) anchors: shift -32.0 +/- 0.5 MHz at 500 K and
///    normalized slope -4.3e-5 /K +/- 15% near 480 K.
#[test]
fn acceptance_03_temperature_shift_anchor() {
    let config = RunConfig::defaults();
    let shift = delta_d(&config.thermal.d_poly, 500.0).unwrap();
    assert!((shift + 32.0e6).abs() <= 0.5e6, "shift {shift} Hz");
    let slope = normalized_slope(&config.thermal.d_poly, 480.0).unwrap();
    assert!(
        (slope + 4.3e-5).abs() <= 0.15 * 4.3e-5,
        "normalized slope {slope} /K"
    );
    pass(3, "anchored D(T): shift(500 K) = -32.0 MHz, slope(480 K) = -4.3e-5 /K");
}

/// 4. Mott-Seitz round trip: exact on noise-free data to 1e-6 relative,
///    and with 1% noise >= 90% of 20 seeds land U_b inside [0.17, 0.27] eV,
///    all in under 10 s.
#[test]
fn acceptance_04_mott_seitz_round_trip() {
    let start = Instant::now();
    let truth = MottSeitzParams { i0: 1.0, c: 200.0, u_b_ev: 0.22 };
    let xs: Vec<f64> = (0..50).map(|k| 300.0 + 400.0 * k as f64 / 49.0).collect();
    let clean: Vec<f64> = xs.iter().map(|&t| mott_seitz_intensity(&truth, t)).collect();

    let result = fit_mott_seitz(&DataSeries::from_xy(&xs, &clean)).unwrap();
    assert!(result.converged);
    for (got, want) in result.params.iter().zip([1.0, 200.0, 0.22]) {
        assert!((got - want).abs() <= 1e-6 * want, "noise-free: {got} vs {want}");
    }

    let mut inside = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<f64> = clean
            .iter()
            .map(|&y| y * (1.0 + 0.01 * standard_normal(&mut rng)))
            .collect();
        let fit = fit_mott_seitz(&DataSeries::from_xy(&xs, &noisy)).unwrap();
        let u_b = fit.params[2];
        if (0.17..=0.27).contains(&u_b) {
            inside += 1;
        }
    }
    assert!(inside >= 18, "only {inside}/20 seeds inside [0.17, 0.27] eV");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    pass(4, "Mott-Seitz round trip exact; 20-seed Monte Carlo within the quoted U_b range");
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// 5. Phonon-shift round trip: exact recovery of (A, hbar_omega0) and the
///    500 K minus 300 K shift equals -58.4 +/- 1 meV.
#[test]
fn acceptance_05_phonon_shift_round_trip() {
    let truth = PhononShiftParams { a_mev: 246.0, hbar_omega0_mev: 173.0 };
    let xs: Vec<f64> = (0..12).map(|k| 300.0 + 20.0 * k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&t| phonon_shift(&truth, t)).collect();
    let result = fit_phonon_shift(&DataSeries::from_xy(&xs, &ys)).unwrap();
    assert!(result.converged);
    assert!((result.params[0] - 246.0).abs() <= 1e-6 * 246.0);
    assert!((result.params[1] - 173.0).abs() <= 1e-6 * 173.0);

    let delta = phonon_shift(&truth, 500.0) - phonon_shift(&truth, 300.0);
    assert!((delta + 58.4).abs() <= 1.0, "delta {delta} meV");
    pass(5, "phonon-shift round trip exact; 300->500 K shift at the ~60 meV scale");
}

/// 6. Lattice expansion: normalized rate over 298-506 K equals
///    1.6e-6 /K +/- 5%, an order of magnitude below the normalized D slope.
#[test]
fn acceptance_06_lattice_expansion() {
    let table = LatticeTable::diamond_default();
    let rate = normalized_expansion_rate(&table, 298.0, 506.0).unwrap();
    assert!((rate - 1.6e-6).abs() <= 0.05 * 1.6e-6, "rate {rate} /K");
    assert!(4.3e-5 / rate > 10.0, "expansion must be far below the D slope");
    pass(6, "lattice expansion 1.6e-6 /K, too small to explain the D shift");
}

/// 7. ZFS quadrature against the analytic point dipole: 2% per component
///    on a 32^3 narrow-Gaussian pair at 2 Angstrom, traceless to 1e-6,
///    inverse-cube scaling to quadrature error, under 60 s.
#[test]
fn acceptance_07_zfs_oracle_equivalence() {
    let start = Instant::now();
    let dims = [32, 32, 32];
    let spacing = [1.0 / 31.0, 1.0 / 31.0, 3.0 / 31.0];
    let origin = [-0.5, -0.5, -1.5];
    let sigma = 0.12;
    let make = |z: f64| OrbitalGrid::gaussian(origin, spacing, dims, [0.0, 0.0, z], sigma);

    let psi_i = make(-1.0).unwrap();
    let psi_j = make(1.0).unwrap();
    let grid = zfs_from_orbitals(&psi_i, &psi_j, SpinAlignment::Parallel, 1.0).unwrap();
    let oracle = zfs_point_dipole([0.0, 0.0, 2.0], SpinAlignment::Parallel, 1.0).unwrap();
    let scale = oracle.frobenius_norm();
    for r in 0..3 {
        for c in 0..3 {
            assert!(
                (grid.components_hz[r][c] - oracle.components_hz[r][c]).abs() <= 0.02 * scale,
                "component ({r},{c}): {} vs {}",
                grid.components_hz[r][c],
                oracle.components_hz[r][c]
            );
        }
    }
    assert!(grid.trace().abs() <= 1e-6 * grid.frobenius_norm());

    // Inverse-cube scaling between two grid-evaluated separations.
    let near = zfs_from_orbitals(&make(-0.75).unwrap(), &make(0.75).unwrap(),
        SpinAlignment::Parallel, 1.0).unwrap();
    let expected_ratio = (2.0f64 / 1.5).powi(3);
    let ratio = near.components_hz[2][2] / grid.components_hz[2][2];
    assert!(
        (ratio - expected_ratio).abs() <= 0.04 * expected_ratio,
        "scaling ratio {ratio} vs {expected_ratio}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    pass(7, "ZFS grid quadrature matches the point-dipole oracle (2%, traceless, 1/r^3)");
}

/// 8. Pipeline round trip: phonon-shifted Gaussian spectra at six
///    temperatures -> peak shifts -> fit recovers the generator within 3%.
#[test]
fn acceptance_08_pipeline_round_trip() {
    let truth = PhononShiftParams { a_mev: 246.0, hbar_omega0_mev: 173.0 };
    let temperatures = [77.0, 300.0, 350.0, 400.0, 450.0, 500.0];
    let spectra: Vec<Spectrum> = temperatures
        .iter()
        .map(|&t| {
            let e0 = HC_EV_NM / 700.0;
            let center_nm = HC_EV_NM / (e0 + phonon_shift(&truth, t) * 1e-3);
            let samples: Vec<(f64, f64)> = (0..=800)
                .map(|k| {
                    let x = 650.0 + 0.25 * k as f64;
                    let d = (x - center_nm) / 25.0;
                    (x, (-0.5 * d * d).exp())
                })
                .collect();
            Spectrum::new(AxisKind::WavelengthNm, samples, Some(t)).unwrap()
        })
        .collect();
    let series = peak_shift_series(&spectra, 77.0, (650.0, 850.0)).unwrap();
    let result = fit_phonon_shift(&series).unwrap();
    assert!(result.converged);
    assert!(
        (result.params[0] - truth.a_mev).abs() <= 0.03 * truth.a_mev,
        "A = {}",
        result.params[0]
    );
    assert!(
        (result.params[1] - truth.hbar_omega0_mev).abs() <= 0.03 * truth.hbar_omega0_mev,
        "hbar_omega0 = {}",
        result.params[1]
    );
    pass(8, "synthesized spectra -> peak shifts -> phonon fit within 3%");
}

/// 9. Invariant spot-checks that must stay green on every commit:
///    Hermiticity and the trace identity, eigen residuals, tensor
///    symmetry/tracelessness, fit descent monotonicity, and
///    numeric-vs-analytic Jacobian agreement at 1e-6.
#[test]
fn acceptance_09_invariant_suite() {
    // Hamiltonian invariants over a deterministic parameter grid.
    let fields = [
        Vector3::zeros(),
        Vector3::new(5e-3, 0.0, 0.0),
        Vector3::new(3e-3, -4e-3, 7e-3),
        Vector3::new(-20e-3, 11e-3, 2e-3),
    ];
    for params in [
        HamiltonianParams::nv_defaults(),
        HamiltonianParams { d_hz: 1.9e9, e_nv_hz: 0.0, gamma_e_hz_per_t: 28.03e9 },
        HamiltonianParams { d_hz: 3.1e9, e_nv_hz: 4.5e7, gamma_e_hz_per_t: 28.03e9 },
    ] {
        for b in fields {
            for orientation in NvOrientation::all_four() {
                let h = build_hamiltonian(&params, &MagneticField(b), &orientation);
                let herm = (h - h.adjoint()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let scale = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                assert!(herm <= 1e-12 * scale);
                let trace = (h[(0, 0)] + h[(1, 1)] + h[(2, 2)]).re;
                assert!((trace - 2.0 * params.d_hz).abs() <= 1e-9 * params.d_hz);
                let (vals, vecs) = eigen_system(&h).unwrap();
                for k in 0..3 {
                    let v = vecs.column(k);
                    let r = (h * v - v * num_complex::Complex64::new(vals[k], 0.0)).norm();
                    assert!(r <= 1e-9 * scale);
                }
            }
        }
    }

    // Tensor symmetry and tracelessness on a coarse grid pair.
    let origin = [-0.5, -0.5, -1.2];
    let spacing = [1.0 / 15.0, 1.0 / 15.0, 2.4 / 15.0];
    let psi_i =
        OrbitalGrid::gaussian(origin, spacing, [16, 16, 16], [0.0, 0.0, -0.8], 0.15).unwrap();
    let psi_j =
        OrbitalGrid::gaussian(origin, spacing, [16, 16, 16], [0.1, 0.0, 0.8], 0.15).unwrap();
    let tensor = zfs_from_orbitals(&psi_i, &psi_j, SpinAlignment::Parallel, 1.0).unwrap();
    for r in 0..3 {
        for c in 0..3 {
            assert_eq!(tensor.components_hz[r][c], tensor.components_hz[c][r]);
        }
    }
    assert!(tensor.trace().abs() <= 1e-6 * tensor.frobenius_norm());

    // Monotone descent on a deliberately distant start.
    let truth = MottSeitzParams { i0: 1.0, c: 200.0, u_b_ev: 0.22 };
    let xs: Vec<f64> = (0..40).map(|k| 300.0 + 10.0 * k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&t| mott_seitz_intensity(&truth, t)).collect();
    let fit = fit_mott_seitz(&DataSeries::from_xy(&xs, &ys)).unwrap();
    for w in fit.descent_log.windows(2) {
        assert!(w[1] <= w[0]);
    }

    // Numeric vs analytic Jacobians for the three built-in models at five
    // deterministic pseudo-random points each.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let xs = [310.0, 405.0, 480.0, 555.0, 650.0];
    for _ in 0..5 {
        let mott = [
            rng.random_range(0.5..2.0),
            rng.random_range(50.0..400.0),
            rng.random_range(0.1..0.4),
        ];
        check_jacobian(&MottSeitzModel, &xs, &mott);
        let phonon = [rng.random_range(100.0..400.0), rng.random_range(120.0..220.0)];
        check_jacobian(&PhononShiftModel, &xs, &phonon);
        let poly = [
            rng.random_range(-2.0..2.0) * 1e9,
            rng.random_range(-1.0..1.0) * 1e5,
            rng.random_range(-1.0..1.0) * 1e2,
            rng.random_range(-1.0..1.0) * 1e-2,
        ];
        check_jacobian(&PolyModel { degree: 3 }, &xs, &poly);
    }

    // Data-series invariants on a representative fit result.
    let series = DataSeries {
        points: xs
            .iter()
            .map(|&x| DataPoint { x, y: mott_seitz_intensity(&truth, x), sigma: Some(0.01) })
            .collect(),
    };
    let weighted = fit_mott_seitz(&series).unwrap();
    for i in 0..3 {
        assert!(weighted.covariance[i][i] >= 0.0);
        for j in 0..3 {
            let denom = weighted.covariance[i][j].abs().max(1e-300);
            assert!((weighted.covariance[i][j] - weighted.covariance[j][i]).abs() / denom < 1e-10);
        }
    }

    pass(9, "invariant suite: Hermiticity, trace, residuals, tensor symmetry, descent, Jacobians");
}

fn check_jacobian(model: &dyn FitModel, xs: &[f64], theta: &[f64]) {
    let numeric = numeric_jacobian(model, xs, theta, &StepPolicy::default()).unwrap();
    let scale: f64 = numeric
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(1e-12);
    for (i, &x) in xs.iter().enumerate() {
        let mut analytic = vec![0.0; theta.len()];
        assert!(model.gradient(x, theta, &mut analytic));
        for k in 0..theta.len() {
            let tol = 1e-6 * analytic[k].abs().max(1e-9 * scale);
            assert!(
                (numeric[i][k] - analytic[k]).abs() <= tol,
                "jacobian mismatch at x={x}, param {k}: {} vs {}",
                numeric[i][k],
                analytic[k]
            );
        }
    }
}
