//! Excitation, gain-bound and Lyapunov diagnostics over traces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{CertificateP, Scenario};
use crate::observer::ObserverVariant;
use crate::sim::{rk4_step, Trace, TraceRow};

/// Worst admissible eigenvalue of `P Lambda + Lambda' P + C'C`.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;
/// Largest per-step increase of `V0` still read as non-increasing.
pub const LYAPUNOV_TOLERANCE: f64 = 1e-8;
/// Tail slopes at or below this are reported as flat.
pub const TAIL_SLOPE_FLOOR: f64 = 1e-9;

fn trapezoid_prefix(delta: &[f64], dt: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(delta.len());
    out.push(0.0);
    for w in delta.windows(2) {
        acc += 0.5 * dt * (w[0] * w[0] + w[1] * w[1]);
        out.push(acc);
    }
    out
}

/// Minimum over start times of the trapezoidal integral of `delta^2` over a
/// window of length `window`, for a series sampled every `dt`.
pub fn pe_window_metric(delta: &[f64], dt: f64, window: f64) -> Result<f64> {
    if !(dt > 0.0 && window > 0.0) {
        return Err(Error::Config(format!(
            "dt and window must be positive (dt = {dt}, window = {window})"
        )));
    }
    let m = (window / dt).round() as usize;
    let span = delta.len().saturating_sub(1);
    if m == 0 || span < m {
        return Err(Error::InsufficientData(format!(
            "series spans {} s, shorter than the window {window} s",
            span as f64 * dt
        )));
    }
    let cum = trapezoid_prefix(delta, dt);
    Ok((0..=span - m).map(|i| cum[i + m] - cum[i]).fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeExcitation {
    /// Running trapezoidal integral of `delta^2` from the first sample.
    pub integral: Vec<f64>,
    /// Least-squares slope of `integral` over the final 20% of samples.
    pub tail_slope: f64,
}

impl CumulativeExcitation {
    pub fn total(&self) -> f64 {
        self.integral.last().copied().unwrap_or(0.0)
    }

    /// A growing integral is consistent with non-square-integrability of
    /// `delta`; a finite trace can never prove it.
    pub fn consistent_with_non_square_integrable(&self) -> bool {
        self.tail_slope > TAIL_SLOPE_FLOOR
    }
}

pub fn cumulative_excitation(delta: &[f64], dt: f64) -> CumulativeExcitation {
    let integral = trapezoid_prefix(delta, dt);
    let n = integral.len();
    let start = n - (n / 5).max(2).min(n);
    let times: Vec<f64> = (start..n).map(|i| i as f64 * dt).collect();
    let tail_slope = least_squares_slope(&times, &integral[start..]).unwrap_or(0.0);
    CumulativeExcitation { integral, tail_slope }
}

/// Slope of the least-squares line through `(x, y)`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Slope of a least-squares fit of `ln |(zbar, theta_tilde)|` against `t`
/// over rows with `t` in `[t_start, t_end]`. Negative means exponential decay.
pub fn log_error_decay_rate(rows: &[TraceRow], t_start: f64, t_end: f64) -> Option<f64> {
    let (t, logs): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.t >= t_start && r.t <= t_end)
        .map(|r| (r.t, (r.z_bar.norm_squared() + r.theta_tilde.norm_squared()).sqrt()))
        .filter(|(_, n)| *n > 0.0)
        .map(|(t, n)| (t, n.ln()))
        .unzip();
    least_squares_slope(&t, &logs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationReport {
    pub pe_window_t: f64,
    /// Required minimum of every window integral.
    pub pe_level: f64,
    pub min_window_integral: f64,
    pub cumulative: CumulativeExcitation,
    pub pe_satisfied: bool,
}

pub fn excitation_report(delta: &[f64], dt: f64, pe_window_t: f64, pe_level: f64) -> Result<ExcitationReport> {
    let min_window_integral = pe_window_metric(delta, dt, pe_window_t)?;
    Ok(ExcitationReport {
        pe_window_t,
        pe_level,
        min_window_integral,
        cumulative: cumulative_excitation(delta, dt),
        pe_satisfied: min_window_integral >= pe_level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaBound {
    pub pass: bool,
    /// `kappa - rho (p / 4) psi_sup^2`
    pub margin: f64,
}

/// Forgetting-rate condition for the redesigned filter to stay bounded:
/// `kappa > rho (p / 4) psi_sup^2`.
pub fn kappa_bound_check(kappa: f64, rho_gain: f64, p: usize, psi_sup: f64) -> KappaBound {
    let margin = kappa - rho_gain * (p as f64 / 4.0) * psi_sup * psi_sup;
    KappaBound {
        pass: margin > 0.0,
        margin,
    }
}

/// `V0 = 1/2 zbar' P zbar + rho/2 |eps|^2`
pub fn lyapunov_value(row: &TraceRow, certificate: &CertificateP, rho_gain: f64) -> f64 {
    certificate.energy(&row.z_bar) + 0.5 * rho_gain * row.eps.norm_squared()
}

/// Largest increase of `V0` between consecutive stored rows. Values at or
/// below [`LYAPUNOV_TOLERANCE`] certify a non-increasing `V0` at the trace's
/// resolution.
pub fn lyapunov_monitor(rows: &[TraceRow], certificate: &CertificateP, rho_gain: f64) -> f64 {
    let values: Vec<f64> = rows.iter().map(|r| lyapunov_value(r, certificate, rho_gain)).collect();
    values.windows(2).map(|w| w[1] - w[0]).reduce(f64::max).unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    pub pass: bool,
    /// Largest eigenvalue of `P Lambda + Lambda' P + C'C` over all samples.
    pub worst_eigenvalue: f64,
    pub samples: usize,
}

/// Checks the quadratic sufficient condition `P Lambda + Lambda' P + C'C <= 0`
/// at `(u, y)` samples taken along an open-loop run of the plant. A constant
/// `Lambda` and `C` need a single sample.
pub fn certificate_check(scenario: &Scenario) -> CertificateReport {
    const SAMPLES: f64 = 10_000.0;
    let dt = (scenario.t_final / SAMPLES).min(1e-2);
    let n = (scenario.t_final / dt).round() as usize;
    let p = scenario.certificate.p();
    let theta = &scenario.theta_true;
    let model = &scenario.model;

    let mut worst = f64::NEG_INFINITY;
    let mut samples = 0;
    let mut x = scenario.x0.clone();
    let mut record = |t: f64, x: &DVector<f64>| -> bool {
        let u = scenario.input_at(t);
        let Ok(y) = model.output(x, theta, &u) else {
            return false;
        };
        let lam = model.lambda_map(&u, &y);
        let c = model.c(&u);
        let m: DMatrix<f64> = p * &lam + lam.transpose() * p + c.transpose() * &c;
        let m = (&m + m.transpose()) * 0.5;
        let top = if m.nrows() == 1 {
            m[(0, 0)]
        } else {
            SymmetricEigen::new(m).eigenvalues.max()
        };
        if !top.is_finite() {
            return false;
        }
        worst = worst.max(top);
        samples += 1;
        true
    };
    if record(0.0, &x) && !model.error_matrix_is_constant() {
        for k in 1..=n {
            let t0 = (k - 1) as f64 * dt;
            let Ok(next) = rk4_step(
                |t, s| model.plant_rhs(t, &DVector::from_column_slice(s), theta, &scenario.input_at(t)),
                &x,
                t0,
                dt,
            ) else {
                break;
            };
            x = next;
            if !record(k as f64 * dt, &x) {
                break;
            }
        }
    }
    CertificateReport {
        pass: samples > 0 && worst <= CERTIFICATE_TOLERANCE,
        worst_eigenvalue: worst,
        samples,
    }
}

/// Condensed view of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_t: f64,
    pub final_theta_tilde: f64,
    pub final_z_bar: f64,
    pub final_x_error: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_mean: f64,
    /// `None` when the trace is shorter than the window.
    pub excitation: Option<ExcitationReport>,
    pub lyapunov_max_increment: f64,
    pub kappa_bound: KappaBound,
    pub max_swap_residual: f64,
    pub min_eig_phi: f64,
    pub decay_rate: Option<f64>,
}

pub fn summarize(trace: &Trace, certificate: &CertificateP, psi_sup: f64, pe_window_t: f64, pe_level: f64) -> RunSummary {
    let rows = &trace.rows;
    let last = rows.last();
    let delta = trace.delta_series();
    let n = delta.len().max(1) as f64;
    let rho = match trace.variant {
        ObserverVariant::Prop1 => 0.0,
        ObserverVariant::Prop2 => trace.gains.rho_gain,
    };
    let horizon = last.map_or(0.0, |r| r.t);
    RunSummary {
        final_t: horizon,
        final_theta_tilde: last.map_or(f64::NAN, |r| r.theta_tilde.norm()),
        final_z_bar: last.map_or(f64::NAN, |r| r.z_bar.norm()),
        final_x_error: last.map_or(f64::NAN, |r| (&r.x_hat - &r.x).norm()),
        delta_min: delta.iter().copied().fold(f64::INFINITY, f64::min),
        delta_max: delta.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        delta_mean: delta.iter().sum::<f64>() / n,
        excitation: excitation_report(&delta, trace.sample_interval(), pe_window_t, pe_level).ok(),
        lyapunov_max_increment: lyapunov_monitor(rows, certificate, rho),
        kappa_bound: kappa_bound_check(trace.gains.kappa, rho, trace.dims.p, psi_sup),
        max_swap_residual: rows.iter().map(|r| r.swap_residual).fold(0.0, f64::max),
        min_eig_phi: rows.iter().map(|r| r.min_eig_phi).fold(f64::INFINITY, f64::min),
        decay_rate: log_error_decay_rate(rows, 0.2 * horizon, 0.8 * horizon),
    }
}
