//! Fixed-step co-simulation of plant, observer and the estimation-error
//! oracle.
//!
//! The augmented state is `[x, observer, eps]` where `eps` obeys
//! `d eps/dt = -kappa eps + Xi' C zbar`. It needs the true `zbar`, so it can
//! only exist in simulation; it is what makes `ext_output - eps = Phi theta`
//! and the parameter error dynamics directly checkable.

use std::fmt;
use std::thread;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::diagnostics::certificate_check;
use crate::error::{Error, Result};
use crate::mixing::{self, relative_asymmetry, SYMMETRY_TOLERANCE};
use crate::model::{spectral_norm, Dimensions, Scenario};
use crate::observer::{observer_rhs, reconstruct_x, ObserverGains, ObserverState, ObserverVariant};

pub const MAX_DT: f64 = 1e-2;
pub const DIVERGENCE_LIMIT: f64 = 1e9;
const MAX_STEPS: f64 = 1e12;

/// Per-field overrides of the default all-zero observer initial condition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitialOverrides {
    pub z_hat: Option<DVector<f64>>,
    pub theta_hat: Option<DVector<f64>>,
    pub filter: Option<DMatrix<f64>>,
    pub ext_output: Option<DVector<f64>>,
    pub ext_regressor: Option<DMatrix<f64>>,
}

impl InitialOverrides {
    pub fn apply(&self, dims: Dimensions) -> Result<ObserverState> {
        let mut st = ObserverState::zeros(dims);
        if let Some(v) = &self.z_hat {
            st.z_hat = v.clone();
        }
        if let Some(v) = &self.theta_hat {
            st.theta_hat = v.clone();
        }
        if let Some(v) = &self.filter {
            st.filter = v.clone();
        }
        if let Some(v) = &self.ext_output {
            st.ext_output = v.clone();
        }
        if let Some(v) = &self.ext_regressor {
            st.ext_regressor = v.clone();
        }
        st.check_dims(dims)?;
        let phi = &st.ext_regressor;
        if relative_asymmetry(phi) > 0.0 {
            return Err(Error::Config("initial extended regressor must be symmetric".into()));
        }
        if SymmetricEigen::new(phi.clone()).eigenvalues.min() < 0.0 {
            return Err(Error::Config(
                "initial extended regressor must be positive semi-definite".into(),
            ));
        }
        Ok(st)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub variant: ObserverVariant,
    pub gains: ObserverGains,
    pub dt: f64,
    pub record_every: usize,
    pub initial_overrides: InitialOverrides,
}

impl SimConfig {
    pub fn new(scenario: Scenario, variant: ObserverVariant, gains: ObserverGains) -> Self {
        SimConfig {
            scenario,
            variant,
            gains,
            dt: 1e-3,
            record_every: 1,
            initial_overrides: InitialOverrides::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.gains.validate()?;
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::Config(format!("dt must lie in (0, {MAX_DT}], got {}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be >= 1".into()));
        }
        let steps = self.scenario.t_final / self.dt;
        if !(steps.is_finite() && steps < MAX_STEPS) {
            return Err(Error::Config(format!("t_final / dt = {steps} does not fit the step counter")));
        }
        self.initial_overrides.apply(self.scenario.model.dims())?;
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        ((self.scenario.t_final / self.dt).round() as u64).max(1)
    }
}

/// Plant state, observer state and the `eps` oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub x: DVector<f64>,
    pub observer: ObserverState,
    pub eps: DVector<f64>,
}

impl AugmentedState {
    pub fn flat_len(dims: Dimensions) -> usize {
        dims.n_x + ObserverState::flat_len(dims) + dims.p
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.x.len() * 4 + self.eps.len() * 8);
        v.extend_from_slice(self.x.as_slice());
        self.observer.write_flat(&mut v);
        v.extend_from_slice(self.eps.as_slice());
        DVector::from_vec(v)
    }

    pub fn from_flat(dims: Dimensions, flat: &[f64]) -> Self {
        let obs_len = ObserverState::flat_len(dims);
        let (x, rest) = flat.split_at(dims.n_x);
        let (obs, eps) = rest.split_at(obs_len);
        AugmentedState {
            x: DVector::from_column_slice(x),
            observer: ObserverState::read_flat(dims, obs),
            eps: DVector::from_column_slice(eps),
        }
    }

    /// `zbar = x - Y theta - z_hat`
    pub fn z_bar(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.x - &self.observer.filter * theta - &self.observer.z_hat
    }
}

/// The right-hand side of the augmented system.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedSystem<'a> {
    pub scenario: &'a Scenario,
    pub variant: ObserverVariant,
    pub gains: &'a ObserverGains,
}

impl AugmentedSystem<'_> {
    pub fn derivative(&self, t: f64, flat: &[f64]) -> Result<DVector<f64>> {
        let s = self.scenario;
        let dims = s.model.dims();
        let state = AugmentedState::from_flat(dims, flat);
        let theta = &s.theta_true;
        let u = s.input_at(t);
        let y = s.model.output(&state.x, theta, &u)?;
        let dx = s.model.plant_rhs(t, &state.x, theta, &u)?;
        let dobs = observer_rhs(self.variant, &s.model, &s.certificate, self.gains, &state.observer, &u, &y, t)?;
        let c = s.model.c(&u);
        let xi = s.model.xi_map(&u, &state.observer.filter);
        let deps = xi.transpose() * (&c * state.z_bar(theta)) - &state.eps * self.gains.kappa;
        Ok(AugmentedState {
            x: dx,
            observer: dobs,
            eps: deps,
        }
        .to_flat())
    }
}

/// A failed Runge-Kutta stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFault {
    pub t: f64,
    /// 1-based stage index.
    pub stage: usize,
    pub message: String,
}

impl fmt::Display for StageFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RK4 stage {} at t = {}: {}", self.stage, self.t, self.message)
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(f: F, s: &DVector<f64>, t: f64, dt: f64) -> std::result::Result<DVector<f64>, StageFault>
where
    F: Fn(f64, &[f64]) -> Result<DVector<f64>>,
{
    let stage = |k: usize, tk: f64, sk: &DVector<f64>| -> std::result::Result<DVector<f64>, StageFault> {
        let fault = |message: String| StageFault {
            t: tk,
            stage: k,
            message,
        };
        let d = f(tk, sk.as_slice()).map_err(|e| fault(e.to_string()))?;
        if d.iter().any(|v| !v.is_finite()) {
            return Err(fault("non-finite derivative".into()));
        }
        Ok(d)
    };
    let half = 0.5 * dt;
    let k1 = stage(1, t, s)?;
    let k2 = stage(2, t + half, &(s + &k1 * half))?;
    let k3 = stage(3, t + half, &(s + &k2 * half))?;
    let k4 = stage(4, t + dt, &(s + &k3 * dt))?;
    Ok(s + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

/// One stored sample. The fields are exactly the columns of the CSV trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub z_bar: DVector<f64>,
    pub theta_hat: DVector<f64>,
    pub theta_tilde: DVector<f64>,
    pub delta: f64,
    pub det_phi: f64,
    pub min_eig_phi: f64,
    /// Oracle-only: unavailable outside simulation.
    pub eps: DVector<f64>,
    /// `|ext_output - eps - Phi theta|`
    pub swap_residual: f64,
    /// `1/2 zbar' P zbar + rho/2 |eps|^2`
    pub v0: f64,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// Some state exceeded [`DIVERGENCE_LIMIT`] in magnitude.
    Diverged {
        t: f64,
        magnitude: f64,
    },
    /// Integration stage failure or extended-regressor integrity loss.
    Fault {
        t: f64,
        stage: Option<usize>,
        message: String,
    },
    /// `|Psi(u(t))|` exceeded the model's declared bound.
    PsiBoundViolated {
        t: f64,
        norm: f64,
        psi_sup: f64,
    },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Completed => write!(f, "completed"),
            Termination::Diverged { t, magnitude } => write!(f, "diverged at t = {t} (|state| = {magnitude:e})"),
            Termination::Fault {
                t,
                stage: Some(k),
                message,
            } => write!(f, "fault at t = {t}, stage {k}: {message}"),
            Termination::Fault { t, stage: None, message } => write!(f, "fault at t = {t}: {message}"),
            Termination::PsiBoundViolated { t, norm, psi_sup } => {
                write!(f, "|Psi(u)| = {norm} exceeds declared psi_sup = {psi_sup} at t = {t}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario: String,
    pub dims: Dimensions,
    pub variant: ObserverVariant,
    pub gains: ObserverGains,
    pub dt: f64,
    pub record_every: usize,
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    /// Running maxima over every integration step, not only stored rows.
    pub max_phi_asymmetry: f64,
    pub max_filter_abs: f64,
    pub max_regressor_abs: f64,
    pub max_psi_norm: f64,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Spacing of the stored grid.
    pub fn sample_interval(&self) -> f64 {
        self.dt * self.record_every as f64
    }

    pub fn delta_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn make_row(config: &SimConfig, t: f64, state: &AugmentedState) -> Result<TraceRow> {
    let s = &config.scenario;
    let obs = &state.observer;
    let phi = &obs.ext_regressor;
    let z_bar = state.z_bar(&s.theta_true);
    let swap = &obs.ext_output - &state.eps - phi * &s.theta_true;
    let mut v0 = s.certificate.energy(&z_bar);
    if config.variant == ObserverVariant::Prop2 && config.gains.rho_gain != 0.0 {
        v0 += 0.5 * config.gains.rho_gain * state.eps.norm_squared();
    }
    Ok(TraceRow {
        t,
        x: state.x.clone(),
        x_hat: reconstruct_x(obs),
        z_bar,
        theta_hat: obs.theta_hat.clone(),
        theta_tilde: &s.theta_true - &obs.theta_hat,
        delta: mixing::delta(phi)?,
        det_phi: mixing::determinant(phi),
        min_eig_phi: min_eigenvalue(phi),
        eps: state.eps.clone(),
        swap_residual: swap.norm(),
        v0,
    })
}

/// Integrates plant, observer and oracle from `t = 0` to `t_final`.
///
/// Configuration problems are errors. Numerical trouble during the run ends
/// it early and is reported in [`Trace::termination`].
pub fn run(config: &SimConfig) -> Result<Trace> {
    config.validate()?;
    let scenario = &config.scenario;
    let cert = certificate_check(scenario);
    if !cert.pass {
        return Err(Error::Certificate(format!(
            "P Lambda + Lambda' P + C'C has eigenvalue {:e} > {:e} along the nominal run",
            cert.worst_eigenvalue,
            crate::diagnostics::CERTIFICATE_TOLERANCE
        )));
    }

    let dims = scenario.model.dims();
    let observer = config.initial_overrides.apply(dims)?;
    let mut state = AugmentedState {
        x: scenario.x0.clone(),
        eps: &observer.ext_output - &observer.ext_regressor * &scenario.theta_true,
        observer,
    };
    let system = AugmentedSystem {
        scenario,
        variant: config.variant,
        gains: &config.gains,
    };
    let n_steps = config.n_steps();
    let psi_sup = scenario.model.psi_sup();
    let psi_bound = psi_sup * (1.0 + 1e-12) + 1e-15;
    let constant_psi_norm = scenario
        .model
        .psi_is_constant()
        .then(|| spectral_norm(&scenario.model.psi(&scenario.input_at(0.0))));

    let mut trace = Trace {
        scenario: scenario.name.clone(),
        dims,
        variant: config.variant,
        gains: config.gains,
        dt: config.dt,
        record_every: config.record_every,
        rows: Vec::with_capacity((n_steps / config.record_every as u64 + 1) as usize),
        termination: Termination::Completed,
        max_phi_asymmetry: 0.0,
        max_filter_abs: 0.0,
        max_regressor_abs: 0.0,
        max_psi_norm: 0.0,
    };

    let mut flat = state.to_flat();
    for k in 0..=n_steps {
        let t = k as f64 * config.dt;
        if k > 0 {
            match rk4_step(|tt, s| system.derivative(tt, s), &flat, t - config.dt, config.dt) {
                Ok(next) => flat = next,
                Err(fault) => {
                    trace.termination = Termination::Fault {
                        t: fault.t,
                        stage: Some(fault.stage),
                        message: fault.message,
                    };
                    return Ok(trace);
                }
            }
            let magnitude = flat.amax();
            if magnitude > DIVERGENCE_LIMIT {
                trace.termination = Termination::Diverged { t, magnitude };
                return Ok(trace);
            }
            state = AugmentedState::from_flat(dims, flat.as_slice());
        }

        let psi_norm = constant_psi_norm.unwrap_or_else(|| spectral_norm(&scenario.model.psi(&scenario.input_at(t))));
        trace.max_psi_norm = trace.max_psi_norm.max(psi_norm);
        if psi_norm > psi_bound {
            trace.termination = Termination::PsiBoundViolated {
                t,
                norm: psi_norm,
                psi_sup,
            };
            return Ok(trace);
        }
        let asym = relative_asymmetry(&state.observer.ext_regressor);
        trace.max_phi_asymmetry = trace.max_phi_asymmetry.max(asym);
        if asym > SYMMETRY_TOLERANCE {
            trace.termination = Termination::Fault {
                t,
                stage: None,
                message: format!("extended regressor asymmetry {asym:e}"),
            };
            return Ok(trace);
        }
        trace.max_filter_abs = trace.max_filter_abs.max(state.observer.filter.amax());
        trace.max_regressor_abs = trace.max_regressor_abs.max(state.observer.ext_regressor.amax());

        if k % config.record_every as u64 == 0 {
            match make_row(config, t, &state) {
                Ok(row) => trace.rows.push(row),
                Err(e) => {
                    trace.termination = Termination::Fault {
                        t,
                        stage: None,
                        message: e.to_string(),
                    };
                    return Ok(trace);
                }
            }
        }
    }
    Ok(trace)
}

/// Summary of one entry of a feedback-gain sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoSweepEntry {
    pub rho: f64,
    /// `sup_t |eps(t)|`
    pub sup_eps: f64,
    /// `sup_t |theta_tilde(t)|`
    pub sup_theta_tilde: f64,
    pub final_theta_tilde: f64,
    pub trace: Trace,
}

/// Runs the redesigned observer once per feedback gain, everything else
/// fixed. Runs execute concurrently; results come back in input order.
pub fn compare_rho_sweep(config: &SimConfig, rho_values: &[f64]) -> Result<Vec<RhoSweepEntry>> {
    if config.variant != ObserverVariant::Prop2 {
        return Err(Error::Config("a rho sweep requires the prop2 observer".into()));
    }
    if rho_values.is_empty() {
        return Err(Error::Config("rho list is empty".into()));
    }
    let configs: Vec<SimConfig> = rho_values
        .iter()
        .map(|&rho| {
            let mut c = config.clone();
            c.gains.rho_gain = rho;
            c
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let traces: Vec<Result<Trace>> = thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || run(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    rho_values
        .iter()
        .zip(traces)
        .map(|(&rho, trace)| {
            let trace = trace?;
            let sup_eps = trace.rows.iter().map(|r| r.eps.norm()).fold(0.0, f64::max);
            let sup_theta_tilde = trace.rows.iter().map(|r| r.theta_tilde.norm()).fold(0.0, f64::max);
            let final_theta_tilde = trace.last().map_or(f64::NAN, |r| r.theta_tilde.norm());
            Ok(RhoSweepEntry {
                rho,
                sup_eps,
                sup_theta_tilde,
                final_theta_tilde,
                trace,
            })
        })
        .collect()
}
