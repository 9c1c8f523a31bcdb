//! Damped least-squares fitting of the thermal models to (x, y) series,
//! with covariance-based parameter uncertainties.
//!
//! The solver is a Levenberg-style damped Gauss-Newton: the damping factor
//! grows tenfold on a rejected step and shrinks tenfold on an accepted one.
//! Positivity bounds are enforced by fitting the logarithm of the bounded
//! parameter, which keeps the inner solver unconstrained. Unweighted fits
//! assume unit sigma and scale the covariance by SSR/(n - p).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::K_B_EV_PER_K;

/// One measured point; `sigma` is an optional 1-sigma standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: Option<f64>,
}

/// A measured series, e.g. (T in K, intensity) or (T in K, shift in meV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSeries {
    pub points: Vec<DataPoint>,
}

impl DataSeries {
    pub fn from_xy(xs: &[f64], ys: &[f64]) -> Self {
        Self {
            points: xs
                .iter()
                .zip(ys)
                .map(|(&x, &y)| DataPoint { x, y, sigma: None })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        for (i, p) in self.points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(FitError::InvalidData(format!(
                    "non-finite value at point {i}: ({}, {})",
                    p.x, p.y
                )));
            }
            if let Some(s) = p.sigma {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(FitError::InvalidData(format!(
                        "sigma must be positive and finite at point {i}, got {s}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A parametric curve y = f(x; theta) with named parameters and an optional
/// analytic gradient.
pub trait FitModel {
    fn eval(&self, x: f64, theta: &[f64]) -> f64;
    fn param_names(&self) -> Vec<String>;
    /// Fill `out` with df/dtheta at (x, theta) and return true, or return
    /// false to fall back to numeric differentiation.
    fn gradient(&self, _x: f64, _theta: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// Step policy for numeric differentiation: relative central-difference
/// step per parameter, h_k = relative_step * max(|theta_k|, 1).
#[derive(Debug, Clone, Copy)]
pub struct StepPolicy {
    pub relative_step: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { relative_step: 1e-6 }
    }
}

/// Bound handling per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamTransform {
    Identity,
    /// Parameter constrained positive; the solver works on its logarithm.
    LogPositive,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub gtol: f64,
    pub xtol: f64,
    pub max_iterations: usize,
    pub lambda0: f64,
    pub transforms: Option<Vec<ParamTransform>>,
    pub step_policy: StepPolicy,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-10,
            xtol: 1e-10,
            max_iterations: 200,
            lambda0: 1e-3,
            transforms: None,
            step_policy: StepPolicy::default(),
        }
    }
}

/// Best-fit parameters with covariance-based 1-sigma uncertainties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub uncertainties: Vec<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
    /// Weighted SSR after every accepted step, starting from theta0.
    pub descent_log: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("too few points: {got} supplied, {needed} needed")]
    TooFewPoints { got: usize, needed: usize },
    #[error("normal matrix is rank deficient; unidentifiable parameter(s): {}", params.join(", "))]
    RankDeficient { params: Vec<String> },
    #[error("model evaluation produced a non-finite value at x = {x}")]
    EvalFailed { x: f64 },
    #[error("invalid start: {0}")]
    InvalidStart(String),
}

fn to_internal(theta: &[f64], transforms: &[ParamTransform]) -> Result<Vec<f64>, FitError> {
    theta
        .iter()
        .zip(transforms)
        .map(|(&t, tr)| match tr {
            ParamTransform::Identity => Ok(t),
            ParamTransform::LogPositive => {
                if t > 0.0 {
                    Ok(t.ln())
                } else {
                    Err(FitError::InvalidStart(format!(
                        "log-positive parameter must start positive, got {t}"
                    )))
                }
            }
        })
        .collect()
}

fn to_external(u: &[f64], transforms: &[ParamTransform]) -> Vec<f64> {
    u.iter()
        .zip(transforms)
        .map(|(&v, tr)| match tr {
            ParamTransform::Identity => v,
            ParamTransform::LogPositive => v.exp(),
        })
        .collect()
}

/// Central-difference Jacobian, rows = data points, columns = parameters.
pub fn numeric_jacobian(
    model: &dyn FitModel,
    xs: &[f64],
    theta: &[f64],
    policy: &StepPolicy,
) -> Result<Vec<Vec<f64>>, FitError> {
    let p = theta.len();
    let mut jac = vec![vec![0.0; p]; xs.len()];
    let mut probe = theta.to_vec();
    for k in 0..p {
        let h = policy.relative_step * theta[k].abs().max(1.0);
        probe[k] = theta[k] + h;
        let plus: Vec<f64> = xs.iter().map(|&x| model.eval(x, &probe)).collect();
        probe[k] = theta[k] - h;
        let minus: Vec<f64> = xs.iter().map(|&x| model.eval(x, &probe)).collect();
        probe[k] = theta[k];
        for (i, (&fp, &fm)) in plus.iter().zip(&minus).enumerate() {
            if !fp.is_finite() || !fm.is_finite() {
                return Err(FitError::EvalFailed { x: xs[i] });
            }
            jac[i][k] = (fp - fm) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Weighted residuals (y - f)/sigma; None when the model goes non-finite.
fn residuals(model: &dyn FitModel, data: &DataSeries, theta: &[f64]) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(data.points.len());
    for p in &data.points {
        let f = model.eval(p.x, theta);
        if !f.is_finite() {
            return None;
        }
        out.push((p.y - f) / p.sigma.unwrap_or(1.0));
    }
    Some(out)
}

fn ssr(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Jacobian of the weighted model in internal (transformed) coordinates.
fn internal_jacobian(
    model: &dyn FitModel,
    data: &DataSeries,
    u: &[f64],
    transforms: &[ParamTransform],
    policy: &StepPolicy,
) -> Result<Vec<Vec<f64>>, FitError> {
    let theta = to_external(u, transforms);
    let p = theta.len();
    let xs: Vec<f64> = data.points.iter().map(|d| d.x).collect();

    let mut grad = vec![0.0; p];
    let analytic = model.gradient(xs[0], &theta, &mut grad);
    let mut jac = if analytic {
        let mut jac = Vec::with_capacity(xs.len());
        for &x in &xs {
            let mut row = vec![0.0; p];
            model.gradient(x, &theta, &mut row);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(FitError::EvalFailed { x });
            }
            jac.push(row);
        }
        jac
    } else {
        numeric_jacobian(model, &xs, &theta, policy)?
    };

    // Chain rule for the transform, then the per-point weight.
    for (i, point) in data.points.iter().enumerate() {
        let w = 1.0 / point.sigma.unwrap_or(1.0);
        for k in 0..p {
            let dtheta_du = match transforms[k] {
                ParamTransform::Identity => 1.0,
                ParamTransform::LogPositive => theta[k],
            };
            jac[i][k] *= w * dtheta_du;
        }
    }
    Ok(jac)
}

/// Lower Cholesky in place; Err(k) on a non-positive pivot at column k.
fn cholesky(a: &mut [Vec<f64>], pivot_tol: f64) -> Result<(), usize> {
    let p = a.len();
    for j in 0..p {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > pivot_tol) {
            return Err(j);
        }
        let l = d.sqrt();
        a[j][j] = l;
        for i in (j + 1)..p {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / l;
        }
    }
    // Zero the strict upper triangle so the factor is unambiguous.
    for i in 0..p {
        for j in (i + 1)..p {
            a[i][j] = 0.0;
        }
    }
    Ok(())
}

fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let p = b.len();
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

fn chol_inverse(l: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = l.len();
    let mut inv = vec![vec![0.0; p]; p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let col = chol_solve(l, &e);
        for i in 0..p {
            inv[i][j] = col[i];
        }
    }
    // Symmetrize away the last-ulp asymmetry from the column solves.
    for i in 0..p {
        for j in (i + 1)..p {
            let m = 0.5 * (inv[i][j] + inv[j][i]);
            inv[i][j] = m;
            inv[j][i] = m;
        }
    }
    inv
}

struct NormalSystem {
    /// Column-equilibrated J^T J (unit diagonal for identifiable columns).
    a: Vec<Vec<f64>>,
    /// Column scales |J_k|.
    scales: Vec<f64>,
    /// J^T r in the equilibrated coordinates.
    g_scaled: Vec<f64>,
    /// J^T r in the raw internal coordinates.
    g_raw: Vec<f64>,
}

fn build_normal_system(
    jac: &[Vec<f64>],
    r: &[f64],
    names: &[String],
) -> Result<NormalSystem, FitError> {
    let p = jac[0].len();
    let mut scales = vec![0.0; p];
    for row in jac {
        for k in 0..p {
            scales[k] += row[k] * row[k];
        }
    }
    let dead: Vec<String> = (0..p)
        .filter(|&k| !(scales[k] > 0.0) || !scales[k].is_finite())
        .map(|k| names[k].clone())
        .collect();
    if !dead.is_empty() {
        return Err(FitError::RankDeficient { params: dead });
    }
    for s in &mut scales {
        *s = s.sqrt();
    }

    let mut a = vec![vec![0.0; p]; p];
    let mut g_scaled = vec![0.0; p];
    let mut g_raw = vec![0.0; p];
    for (row, &ri) in jac.iter().zip(r) {
        for k in 0..p {
            let jk = row[k] / scales[k];
            g_scaled[k] += jk * ri;
            g_raw[k] += row[k] * ri;
            for m in k..p {
                a[k][m] += jk * row[m] / scales[m];
            }
        }
    }
    for k in 0..p {
        for m in 0..k {
            a[k][m] = a[m][k];
        }
    }
    Ok(NormalSystem { a, scales, g_scaled, g_raw })
}

const LAMBDA_MAX: f64 = 1e12;
const PIVOT_TOL: f64 = 1e-12;

/// Damped least squares on `model` against `data` from `theta0`.
///
/// Returns a stationary point of the weighted SSR (gradient or step below
/// tolerance). Running out of iterations is reported through
/// `converged = false`, not an error.
pub fn least_squares(
    model: &dyn FitModel,
    data: &DataSeries,
    theta0: &[f64],
    options: &FitOptions,
) -> Result<FitResult, FitError> {
    data.validate()?;
    let names = model.param_names();
    let p = theta0.len();
    if names.len() != p {
        return Err(FitError::InvalidStart(format!(
            "model has {} parameters, theta0 has {p}",
            names.len()
        )));
    }
    let n = data.points.len();
    let needed = p.max(3);
    if n < needed {
        return Err(FitError::TooFewPoints { got: n, needed });
    }
    let transforms = options
        .transforms
        .clone()
        .unwrap_or_else(|| vec![ParamTransform::Identity; p]);
    if transforms.len() != p {
        return Err(FitError::InvalidStart(format!(
            "{} transforms supplied for {p} parameters",
            transforms.len()
        )));
    }

    let mut u = to_internal(theta0, &transforms)?;
    let mut r = residuals(model, data, &to_external(&u, &transforms))
        .ok_or(FitError::EvalFailed { x: f64::NAN })?;
    let mut current_ssr = ssr(&r);
    let mut descent_log = vec![current_ssr];
    let mut lambda = options.lambda0;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=options.max_iterations {
        iterations = iter;
        let jac = internal_jacobian(model, data, &u, &transforms, &options.step_policy)?;
        let sys = build_normal_system(&jac, &r, &names)?;

        let grad_inf = sys.g_raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if grad_inf <= options.gtol * current_ssr.max(1.0) {
            converged = true;
            break;
        }

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = sys.a.clone();
            for k in 0..p {
                damped[k][k] += lambda;
            }
            match cholesky(&mut damped, PIVOT_TOL) {
                Ok(()) => {
                    let step_scaled = chol_solve(&damped, &sys.g_scaled);
                    let step: Vec<f64> = step_scaled
                        .iter()
                        .zip(&sys.scales)
                        .map(|(&s, &d)| s / d)
                        .collect();
                    let u_trial: Vec<f64> = u.iter().zip(&step).map(|(&a, &b)| a + b).collect();
                    let trial_theta = to_external(&u_trial, &transforms);
                    if let Some(r_trial) = residuals(model, data, &trial_theta) {
                        let trial_ssr = ssr(&r_trial);
                        if trial_ssr.is_finite() && trial_ssr <= current_ssr {
                            let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
                            let u_norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                            u = u_trial;
                            r = r_trial;
                            current_ssr = trial_ssr;
                            descent_log.push(current_ssr);
                            lambda = (lambda / 10.0).max(1e-15);
                            accepted = true;
                            if step_norm <= options.xtol * (u_norm + options.xtol) {
                                converged = true;
                            }
                            break;
                        }
                    }
                    lambda *= 10.0;
                }
                Err(pivot) => {
                    // With lambda on the diagonal the equilibrated system
                    // is positive definite unless a column collapsed.
                    if lambda >= 1.0 {
                        return Err(FitError::RankDeficient {
                            params: vec![names[pivot].clone()],
                        });
                    }
                    lambda *= 10.0;
                }
            }
        }
        if converged {
            break;
        }
        if !accepted {
            break;
        }
    }

    let theta = to_external(&u, &transforms);
    // Final gradient check so a step-size stop still reports stationarity.
    if !converged {
        let jac = internal_jacobian(model, data, &u, &transforms, &options.step_policy)?;
        let sys = build_normal_system(&jac, &r, &names)?;
        let grad_inf = sys.g_raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if grad_inf <= options.gtol * current_ssr.max(1.0) {
            converged = true;
        }
    }

    let jac = internal_jacobian(model, data, &u, &transforms, &options.step_policy)?;
    let sys = build_normal_system(&jac, &r, &names)?;
    let mut damped = sys.a.clone();
    for k in 0..p {
        damped[k][k] += lambda.min(options.lambda0);
    }
    cholesky(&mut damped, PIVOT_TOL).map_err(|pivot| FitError::RankDeficient {
        params: vec![names[pivot].clone()],
    })?;
    let cov_scaled = chol_inverse(&damped);

    let has_sigmas = data.points.iter().any(|pt| pt.sigma.is_some());
    let variance_scale = if has_sigmas {
        1.0
    } else if n > p {
        current_ssr / ((n - p) as f64)
    } else {
        1.0
    };

    // Undo the column equilibration, then map internal covariance to the
    // external parameters (delta method for the log transform).
    let mut covariance = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let dtheta_i = match transforms[i] {
                ParamTransform::Identity => 1.0,
                ParamTransform::LogPositive => theta[i],
            };
            let dtheta_j = match transforms[j] {
                ParamTransform::Identity => 1.0,
                ParamTransform::LogPositive => theta[j],
            };
            covariance[i][j] = cov_scaled[i][j] / (sys.scales[i] * sys.scales[j])
                * dtheta_i
                * dtheta_j
                * variance_scale;
        }
    }
    let uncertainties = (0..p).map(|k| covariance[k][k].max(0.0).sqrt()).collect();

    Ok(FitResult {
        param_names: names,
        params: theta,
        covariance,
        uncertainties,
        residual_norm: current_ssr,
        converged,
        iterations,
        warnings: Vec::new(),
        descent_log,
    })
}

/// Mott-Seitz PL intensity model over (I0, C, U_b).
pub struct MottSeitzModel;

impl FitModel for MottSeitzModel {
    fn eval(&self, x: f64, theta: &[f64]) -> f64 {
        let (i0, c, u_b) = (theta[0], theta[1], theta[2]);
        i0 / (1.0 + c * (-u_b / (K_B_EV_PER_K * x)).exp())
    }

    fn param_names(&self) -> Vec<String> {
        vec!["i0".into(), "c".into(), "u_b_ev".into()]
    }

    fn gradient(&self, x: f64, theta: &[f64], out: &mut [f64]) -> bool {
        let (i0, c, u_b) = (theta[0], theta[1], theta[2]);
        let kt = K_B_EV_PER_K * x;
        let e = (-u_b / kt).exp();
        let den = 1.0 + c * e;
        out[0] = 1.0 / den;
        out[1] = -i0 * e / (den * den);
        out[2] = i0 * c * e / (kt * den * den);
        true
    }
}

/// Phonon-shift model over (A, hbar_omega0), both in meV.
pub struct PhononShiftModel;

impl FitModel for PhononShiftModel {
    fn eval(&self, x: f64, theta: &[f64]) -> f64 {
        let (a, omega) = (theta[0], theta[1]);
        let arg = omega * 1e-3 / (2.0 * K_B_EV_PER_K * x);
        -2.0 * a / (arg.exp() - 1.0)
    }

    fn param_names(&self) -> Vec<String> {
        vec!["a_mev".into(), "hbar_omega0_mev".into()]
    }

    fn gradient(&self, x: f64, theta: &[f64], out: &mut [f64]) -> bool {
        let (a, omega) = (theta[0], theta[1]);
        let c1 = 1e-3 / (2.0 * K_B_EV_PER_K * x);
        let q = (omega * c1).exp();
        let den = q - 1.0;
        out[0] = -2.0 / den;
        out[1] = 2.0 * a * q * c1 / (den * den);
        true
    }
}

/// Polynomial in x, coefficients lowest order first.
pub struct PolyModel {
    pub degree: usize,
}

impl FitModel for PolyModel {
    fn eval(&self, x: f64, theta: &[f64]) -> f64 {
        theta.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    fn param_names(&self) -> Vec<String> {
        (0..=self.degree).map(|k| format!("a{k}")).collect()
    }

    fn gradient(&self, x: f64, theta: &[f64], out: &mut [f64]) -> bool {
        debug_assert_eq!(theta.len(), out.len());
        let mut pow = 1.0;
        for slot in out.iter_mut() {
            *slot = pow;
            pow *= x;
        }
        true
    }
}

/// Fit the Mott-Seitz model with positivity bounds and a data-driven
/// initializer (I0 from the plateau, U_b/C from the Arrhenius line of
/// ln(I0/y - 1) against 1/k_B T).
pub fn fit_mott_seitz(data: &DataSeries) -> Result<FitResult, FitError> {
    fit_mott_seitz_with(data, &FitOptions::default())
}

/// [`fit_mott_seitz`] with caller-supplied solver tolerances; the
/// positivity transforms are still applied.
pub fn fit_mott_seitz_with(
    data: &DataSeries,
    base_options: &FitOptions,
) -> Result<FitResult, FitError> {
    data.validate()?;
    if data.points.len() < 3 {
        return Err(FitError::TooFewPoints { got: data.points.len(), needed: 3 });
    }
    if data.points.iter().any(|p| !(p.x > 0.0)) {
        return Err(FitError::InvalidData("temperatures must be positive".into()));
    }
    let y_max = data.points.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let y_min = data.points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    if !(y_max > 0.0) {
        return Err(FitError::InvalidData("intensities must include positive values".into()));
    }
    if y_max - y_min <= 1e-12 * y_max.abs() {
        // Constant intensity: the quenching term is indistinguishable
        // from zero and its two parameters cannot be identified.
        return Err(FitError::RankDeficient { params: vec!["c".into(), "u_b_ev".into()] });
    }

    let (mut u_b0, mut c0) = (0.2, 100.0);
    let mut zs = Vec::new();
    for p in &data.points {
        let arg = y_max / p.y - 1.0;
        if p.y > 0.0 && arg > 1e-9 {
            zs.push((1.0 / (K_B_EV_PER_K * p.x), arg.ln()));
        }
    }
    if zs.len() >= 2 {
        if let Some((slope, intercept)) = line_fit(&zs) {
            if slope < 0.0 && intercept.is_finite() {
                u_b0 = -slope;
                c0 = intercept.exp().clamp(1e-6, 1e12);
            }
        }
    }

    let options = FitOptions {
        transforms: Some(vec![ParamTransform::LogPositive; 3]),
        ..base_options.clone()
    };
    let mut result = least_squares(&MottSeitzModel, data, &[y_max, c0, u_b0], &options)?;

    let t_min = data.points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let t_max = data.points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    if t_max - t_min < 150.0 {
        result.warnings.push(format!(
            "temperature span {:.1} K is below 150 K; U_b and C may be poorly identified",
            t_max - t_min
        ));
    }
    Ok(result)
}

/// Fit the phonon-shift model over (A, hbar_omega0), bounded positive.
/// The initializer anchors hbar_omega0 at the 165 meV zone-center Raman
/// energy and inverts the model at the hottest point for A.
pub fn fit_phonon_shift(data: &DataSeries) -> Result<FitResult, FitError> {
    fit_phonon_shift_with(data, &FitOptions::default())
}

/// [`fit_phonon_shift`] with caller-supplied solver tolerances.
pub fn fit_phonon_shift_with(
    data: &DataSeries,
    base_options: &FitOptions,
) -> Result<FitResult, FitError> {
    data.validate()?;
    if data.points.len() < 3 {
        return Err(FitError::TooFewPoints { got: data.points.len(), needed: 3 });
    }
    if data.points.iter().any(|p| !(p.x > 0.0)) {
        return Err(FitError::InvalidData("temperatures must be positive".into()));
    }
    let y_scale = data.points.iter().map(|p| p.y.abs()).fold(0.0f64, f64::max);
    if y_scale == 0.0 {
        // All-zero shifts force A to zero, leaving the phonon energy free.
        return Err(FitError::RankDeficient {
            params: vec!["a_mev".into(), "hbar_omega0_mev".into()],
        });
    }

    let omega0 = 165.0;
    let hottest = data
        .points
        .iter()
        .max_by(|a, b| a.x.partial_cmp(&b.x).unwrap())
        .expect("non-empty");
    let arg = omega0 * 1e-3 / (2.0 * K_B_EV_PER_K * hottest.x);
    let mut a0 = -hottest.y * (arg.exp() - 1.0) / 2.0;
    if !(a0 > 0.0) || !a0.is_finite() {
        a0 = y_scale;
    }

    let options = FitOptions {
        transforms: Some(vec![ParamTransform::LogPositive; 2]),
        ..base_options.clone()
    };
    least_squares(&PhononShiftModel, data, &[a0, omega0], &options)
}

/// Exact linear least squares for the D(T) polynomial; no iteration.
/// Solved by Householder QR on the column-equilibrated Vandermonde, which
/// keeps the coefficients accurate at the wide dynamic range of D-in-Hz
/// against T-in-K powers.
pub fn fit_d_poly(data: &DataSeries, degree: usize) -> Result<FitResult, FitError> {
    data.validate()?;
    if degree > 3 {
        return Err(FitError::InvalidData(format!(
            "polynomial degree must be <= 3, got {degree}"
        )));
    }
    let p = degree + 1;
    let n = data.points.len();
    let needed = p.max(3);
    if n < needed {
        return Err(FitError::TooFewPoints { got: n, needed });
    }
    let model = PolyModel { degree };
    let names = model.param_names();

    let mut design = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for point in &data.points {
        let w = 1.0 / point.sigma.unwrap_or(1.0);
        let mut row = vec![0.0; p];
        model.gradient(point.x, &vec![0.0; p], &mut row);
        for v in &mut row {
            *v *= w;
        }
        design.push(row);
        rhs.push(point.y * w);
    }
    let mut scales = vec![0.0; p];
    for row in &design {
        for k in 0..p {
            scales[k] += row[k] * row[k];
        }
    }
    for (k, s) in scales.iter_mut().enumerate() {
        if !(*s > 0.0) {
            return Err(FitError::RankDeficient { params: vec![names[k].clone()] });
        }
        *s = s.sqrt();
    }
    for row in &mut design {
        for k in 0..p {
            row[k] /= scales[k];
        }
    }

    let (coeff_scaled, rinv) = qr_solve(&mut design, &mut rhs)
        .map_err(|k| FitError::RankDeficient { params: vec![names[k].clone()] })?;
    let params: Vec<f64> = coeff_scaled
        .iter()
        .zip(&scales)
        .map(|(&c, &s)| c / s)
        .collect();

    let residual_norm: f64 = data
        .points
        .iter()
        .map(|pt| {
            let f = model.eval(pt.x, &params);
            let r = (pt.y - f) / pt.sigma.unwrap_or(1.0);
            r * r
        })
        .sum();

    let has_sigmas = data.points.iter().any(|pt| pt.sigma.is_some());
    let variance_scale = if has_sigmas {
        1.0
    } else if n > p {
        residual_norm / ((n - p) as f64)
    } else {
        1.0
    };
    // Covariance (X^T X)^-1 = R^-1 R^-T in the equilibrated basis.
    let mut covariance = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += rinv[i][k] * rinv[j][k];
            }
            covariance[i][j] = acc / (scales[i] * scales[j]) * variance_scale;
        }
    }
    let uncertainties = (0..p).map(|k| covariance[k][k].max(0.0).sqrt()).collect();

    Ok(FitResult {
        param_names: names,
        params,
        covariance,
        uncertainties,
        residual_norm,
        converged: true,
        iterations: 0,
        warnings: Vec::new(),
        descent_log: vec![residual_norm],
    })
}

/// Householder QR least squares on an n x p system (n >= p) that has been
/// column-equilibrated to unit norms. Returns the solution and R^-1;
/// Err(k) marks a numerically dependent column k.
fn qr_solve(a: &mut [Vec<f64>], y: &mut [f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>), usize> {
    let n = a.len();
    let p = a[0].len();
    const RANK_TOL: f64 = 1e-10;

    for k in 0..p {
        let mut norm = 0.0;
        for row in a.iter().take(n).skip(k) {
            norm += row[k] * row[k];
        }
        let norm = norm.sqrt();
        if norm <= RANK_TOL {
            return Err(k);
        }
        let alpha = if a[k][k] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - k];
        v[0] = a[k][k] - alpha;
        for i in (k + 1)..n {
            v[i - k] = a[i][k];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        a[k][k] = alpha;
        for row in a.iter_mut().take(n).skip(k + 1) {
            row[k] = 0.0;
        }
        if vtv > 0.0 {
            for j in (k + 1)..p {
                let mut dot = 0.0;
                for i in k..n {
                    dot += v[i - k] * a[i][j];
                }
                let f = 2.0 * dot / vtv;
                for i in k..n {
                    a[i][j] -= f * v[i - k];
                }
            }
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i - k] * y[i];
            }
            let f = 2.0 * dot / vtv;
            for i in k..n {
                y[i] -= f * v[i - k];
            }
        }
    }

    // Back-substitute R x = Q^T y.
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for j in (i + 1)..p {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    // R^-1 column by column.
    let mut rinv = vec![vec![0.0; p]; p];
    for col in 0..p {
        let mut e = vec![0.0; p];
        e[col] = 1.0;
        for i in (0..=col).rev() {
            let mut s = e[i];
            for j in (i + 1)..p {
                s -= a[i][j] * rinv[j][col];
            }
            rinv[i][col] = s / a[i][i];
        }
    }
    Ok((x, rinv))
}

/// Ordinary least squares line through (x, y) pairs: (slope, intercept).
fn line_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    Some((slope, intercept))
}
