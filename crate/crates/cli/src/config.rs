//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//! scenario = "S1"            # or an inline [scenario] table
//!
//! [observer]
//! variant = "prop2"
//! lambda = 1.0
//! kappa = 1.0
//! rho_gain = 10.0
//! mode = "adj"
//!
//! [sim]
//! dt = 1e-3
//! record_every = 10
//! initial_overrides = { z_hat = [-1.0] }
//!
//! [diagnostics]
//! pe_window_T = 5.0
//! pe_level = 1e-6
//! ```
//!
//! An inline scenario gives `dims = { n_x, n_u, n_y, p }`, the mappings `A`,
//! `Omega`, `C` (required) and `L`, `Psi`, `Gamma` (zero when omitted) as
//! row lists whose entries are numbers or expression strings such as
//! `"sin(u1) * y1"`, plus `P`, `theta_true`, `x0`, `input` and `t_final`.

use std::path::Path;

use drem_core::model::{Expr, InputSignal, Mappings, MatrixMapping, Signal};
use drem_core::sim::InitialOverrides;
use drem_core::{builtin_scenario, CertificateP, Dimensions, MixingMode, ObserverVariant, Scenario, SystemModel};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema_version: u32,
    /// A built-in name or an inline table; see [`RunConfigFile::scenario`].
    #[serde(rename = "scenario")]
    pub scenario_value: toml::Value,
    #[serde(default)]
    pub observer: ObserverSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

#[derive(Debug)]
pub enum ScenarioSource {
    Builtin(String),
    Inline(Box<InlineScenario>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Expression(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsSection {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub p: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineScenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub dims: DimsSection,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Entry>>,
    #[serde(rename = "Omega")]
    pub omega: Vec<Vec<Entry>>,
    /// One entry per state.
    #[serde(rename = "L", default)]
    pub drift: Option<Vec<Entry>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<Entry>>,
    #[serde(rename = "Psi", default)]
    pub psi: Option<Vec<Vec<Entry>>>,
    #[serde(rename = "Gamma", default)]
    pub gamma: Option<Vec<Vec<Entry>>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    /// Required when `Psi` depends on the input.
    pub psi_sup: Option<f64>,
    pub theta_true: Vec<f64>,
    pub x0: Vec<f64>,
    pub input: Vec<Signal>,
    pub t_final: f64,
}

fn default_name() -> String {
    "inline".into()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub variant: Option<ObserverVariant>,
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
    pub rho_gain: Option<f64>,
    pub mode: Option<MixingMode>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: Option<f64>,
    pub record_every: Option<usize>,
    #[serde(default)]
    pub initial_overrides: OverridesSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridesSection {
    pub z_hat: Option<Vec<f64>>,
    pub theta_hat: Option<Vec<f64>>,
    pub filter: Option<Vec<Vec<f64>>>,
    pub ext_output: Option<Vec<f64>>,
    pub ext_regressor: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(rename = "pe_window_T")]
    pub pe_window_t: Option<f64>,
    pub pe_level: Option<f64>,
}

pub fn load(path: &Path) -> Result<RunConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
}

pub fn parse(text: &str) -> Result<RunConfigFile, CliError> {
    let file: RunConfigFile = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    Ok(file)
}

impl RunConfigFile {
    pub fn scenario(&self) -> Result<ScenarioSource, CliError> {
        match &self.scenario_value {
            toml::Value::String(name) => Ok(ScenarioSource::Builtin(name.clone())),
            toml::Value::Table(_) => {
                let inline: InlineScenario = self
                    .scenario_value
                    .clone()
                    .try_into()
                    .map_err(|e: toml::de::Error| CliError::config(format!("scenario: {}", e.message())))?;
                Ok(ScenarioSource::Inline(Box::new(inline)))
            }
            other => Err(CliError::config(format!(
                "scenario must be a name or a table, got {}",
                other.type_str()
            ))),
        }
    }
}

impl ScenarioSource {
    pub fn build(&self) -> Result<Scenario, CliError> {
        match self {
            ScenarioSource::Builtin(name) => Ok(builtin_scenario(name)?),
            ScenarioSource::Inline(s) => s.build(),
        }
    }
}

fn entry_expr(e: &Entry) -> Result<Expr, CliError> {
    match e {
        Entry::Number(v) => Ok(Expr::Const(*v)),
        Entry::Expression(s) => Ok(Expr::parse(s)?),
    }
}

fn mapping(rows: &[Vec<Entry>]) -> Result<MatrixMapping, CliError> {
    let rows = rows
        .iter()
        .map(|r| r.iter().map(entry_expr).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MatrixMapping::from_rows(rows)?)
}

pub fn matrix(what: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::config(format!(
            "{what} must be a non-empty rectangular list of rows"
        )));
    }
    Ok(DMatrix::from_row_iterator(n, m, rows.iter().flatten().copied()))
}

impl InlineScenario {
    fn build(&self) -> Result<Scenario, CliError> {
        let d = &self.dims;
        let dims = Dimensions::new(d.n_x, d.n_u, d.n_y, d.p)?;
        let psi = match &self.psi {
            Some(rows) => mapping(rows)?,
            None => MatrixMapping::zeros(d.n_y, d.p),
        };
        let psi_sup = match (self.psi_sup, psi.is_constant()) {
            (Some(v), _) => v,
            (None, true) => drem_core::model::spectral_norm(&psi.eval(&vec![0.0; d.n_u], &[])),
            (None, false) => return Err(CliError::config("psi_sup is required when Psi depends on the input")),
        };
        let drift = match &self.drift {
            Some(col) => mapping(&col.iter().map(|e| vec![e.clone()]).collect::<Vec<_>>())?,
            None => MatrixMapping::zeros(d.n_x, 1),
        };
        let maps = Mappings {
            a: mapping(&self.a)?,
            omega: mapping(&self.omega)?,
            drift,
            c: mapping(&self.c)?,
            psi,
            gamma: match &self.gamma {
                Some(rows) => mapping(rows)?,
                None => MatrixMapping::zeros(d.n_x, d.n_y),
            },
        };
        let scenario = Scenario {
            name: self.name.clone(),
            model: SystemModel::new(dims, maps, psi_sup)?,
            theta_true: DVector::from_column_slice(&self.theta_true),
            x0: DVector::from_column_slice(&self.x0),
            input: InputSignal(self.input.clone()),
            certificate: CertificateP::new(matrix("P", &self.p)?)?,
            t_final: self.t_final,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

impl OverridesSection {
    pub fn to_overrides(&self) -> Result<InitialOverrides, CliError> {
        let vector = |v: &Option<Vec<f64>>| v.as_ref().map(|v| DVector::from_column_slice(v));
        let mat = |what: &str, m: &Option<Vec<Vec<f64>>>| m.as_ref().map(|rows| matrix(what, rows)).transpose();
        Ok(InitialOverrides {
            z_hat: vector(&self.z_hat),
            theta_hat: vector(&self.theta_hat),
            filter: mat("filter", &self.filter)?,
            ext_output: vector(&self.ext_output),
            ext_regressor: mat("ext_regressor", &self.ext_regressor)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INLINE: &str = r#"
schema_version = 1

[scenario]
name = "damped"
dims = { n_x = 1, n_u = 1, n_y = 1, p = 1 }
A = [[-2.0]]
Omega = [["u1"]]
C = [[1.0]]
Psi = [["0.25 * sin(u1)"]]
psi_sup = 0.25
P = [[1.0]]
theta_true = [0.5]
x0 = [0.0]
input = [{ kind = "sinusoid", amplitude = 1.0, omega = 2.0 }]
t_final = 5.0

[observer]
variant = "prop2"
rho_gain = 2.0
mode = "delta-adj"
"#;

    #[test]
    fn builtin_by_name() {
        let f = parse("schema_version = 1\nscenario = \"S3\"\n").unwrap();
        assert_eq!(f.scenario().unwrap().build().unwrap().name, "S3");
        assert!(f.observer.variant.is_none());
    }

    #[test]
    fn inline_scenario() {
        let f = parse(INLINE).unwrap();
        let s = f.scenario().unwrap().build().unwrap();
        assert_eq!(s.name, "damped");
        assert_eq!(s.model.psi_sup(), 0.25);
        assert!(!s.model.psi_is_constant());
        assert_eq!(f.observer.variant, Some(ObserverVariant::Prop2));
        assert_eq!(f.observer.mode, Some(MixingMode::DeltaAdjugate));
    }

    #[test]
    fn rejections() {
        assert!(parse("schema_version = 2\nscenario = \"S1\"\n").is_err());
        assert!(parse("schema_version = 1\nscenario = \"S1\"\ntypo = 3\n").is_err());
        let bogus = parse("schema_version = 1\nscenario = \"bogus\"\n").unwrap();
        let err = bogus.scenario().unwrap().build().unwrap_err();
        assert!(err.message.contains("S1") && err.message.contains("W1"), "{}", err.message);
        let no_sup = INLINE.replace("psi_sup = 0.25\n", "");
        assert!(parse(&no_sup).unwrap().scenario().unwrap().build().is_err());
        let bad_expr = INLINE.replace("\"u1\"", "\"u1 +\"");
        assert!(parse(&bad_expr).unwrap().scenario().unwrap().build().is_err());
    }
}
