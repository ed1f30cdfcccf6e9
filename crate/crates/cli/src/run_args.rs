//! Run options shared by `simulate` and `sweep-rho`: a scenario source plus
//! flag overrides, layered as flags > config file > defaults.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args};
use drem_core::{builtin_scenario, MixingMode, ObserverGains, ObserverVariant, SimConfig};
use nalgebra::DVector;

use crate::config;
use crate::CliError;

/// PE window as a fraction of the horizon when not given.
const DEFAULT_PE_WINDOW_FRACTION: f64 = 0.1;
const DEFAULT_PE_LEVEL: f64 = 1e-6;

/// Comma-separated numbers, e.g. `-1` or `0.5,2`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<f64>);

impl FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|item| item.trim().parse::<f64>().map_err(|e| format!("`{item}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(NumList)
    }
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "scenario"])))]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in scenario name (see `list-scenarios`).
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// adj, delta-adj or identity.
    #[arg(long)]
    pub mode: Option<MixingMode>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    /// Store every k-th integration step.
    #[arg(long = "record-every")]
    pub record_every: Option<usize>,
    /// Initial state-estimator value, one entry per state.
    #[arg(long, allow_hyphen_values = true)]
    pub zhat0: Option<NumList>,
    /// Initial parameter estimate, one entry per parameter.
    #[arg(long, allow_hyphen_values = true)]
    pub thetahat0: Option<NumList>,
    /// Window length for the persistent-excitation metric.
    #[arg(long = "pe-window")]
    pub pe_window: Option<f64>,
    /// Required excitation per window.
    #[arg(long = "pe-level")]
    pub pe_level: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub sim: SimConfig,
    pub pe_window_t: f64,
    pub pe_level: f64,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let (scenario, file) = match (&self.config, &self.scenario) {
            (Some(path), _) => {
                let file = config::load(path)?;
                (file.scenario()?.build()?, Some(file))
            }
            (None, Some(name)) => (builtin_scenario(name)?, None),
            (None, None) => return Err(CliError::config("either --config or --scenario is required")),
        };

        let defaults = ObserverGains::default();
        let obs = file.as_ref().map(|f| &f.observer);
        let sim_section = file.as_ref().map(|f| &f.sim);
        let diag = file.as_ref().map(|f| &f.diagnostics);

        let gains = ObserverGains {
            lambda: self.lambda.or(obs.and_then(|o| o.lambda)).unwrap_or(defaults.lambda),
            kappa: self.kappa.or(obs.and_then(|o| o.kappa)).unwrap_or(defaults.kappa),
            rho_gain: obs.and_then(|o| o.rho_gain).unwrap_or(defaults.rho_gain),
            mode: self.mode.or(obs.and_then(|o| o.mode)).unwrap_or(defaults.mode),
        };
        let variant = obs.and_then(|o| o.variant).unwrap_or(ObserverVariant::default());

        let mut sim = SimConfig::new(scenario, variant, gains);
        if let Some(t) = self.tfinal {
            sim.scenario.t_final = t;
        }
        if let Some(dt) = self.dt.or(sim_section.and_then(|s| s.dt)) {
            sim.dt = dt;
        }
        if let Some(k) = self.record_every.or(sim_section.and_then(|s| s.record_every)) {
            sim.record_every = k;
        }
        if let Some(s) = sim_section {
            sim.initial_overrides = s.initial_overrides.to_overrides()?;
        }
        if let Some(v) = &self.zhat0 {
            sim.initial_overrides.z_hat = Some(DVector::from_column_slice(&v.0));
        }
        if let Some(v) = &self.thetahat0 {
            sim.initial_overrides.theta_hat = Some(DVector::from_column_slice(&v.0));
        }

        let horizon = sim.scenario.t_final;
        let pe_window_t = self
            .pe_window
            .or(diag.and_then(|d| d.pe_window_t))
            .unwrap_or(DEFAULT_PE_WINDOW_FRACTION * horizon);
        let pe_level = self.pe_level.or(diag.and_then(|d| d.pe_level)).unwrap_or(DEFAULT_PE_LEVEL);
        if !(pe_window_t > 0.0 && pe_window_t.is_finite()) {
            return Err(CliError::config(format!("PE window must be positive, got {pe_window_t}")));
        }
        if !(pe_level >= 0.0 && pe_level.is_finite()) {
            return Err(CliError::config(format!("PE level must be non-negative, got {pe_level}")));
        }
        sim.validate()?;
        Ok(Resolved {
            sim,
            pe_window_t,
            pe_level,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn num_list() {
        assert_eq!("-1".parse::<NumList>().unwrap(), NumList(vec![-1.0]));
        assert_eq!("0.5, 2".parse::<NumList>().unwrap(), NumList(vec![0.5, 2.0]));
        assert!("1,x".parse::<NumList>().is_err());
    }
}
