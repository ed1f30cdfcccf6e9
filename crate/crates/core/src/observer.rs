//! Adaptive observer right-hand sides.
//!
//! Both variants share the parameter update, the Kreisselmeier extension
//! (`ext_output`, `ext_regressor`) and the filtered transformation
//! `x = z + Y theta`. The redesigned variant additionally feeds the extension
//! back into the filter `Y` and the state estimate through
//! `T(u, Y) = P^-1 C' Xi`, with gain `rho_gain`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::{theta_dot, MixingMode};
use crate::model::{CertificateP, Dimensions, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObserverVariant {
    /// Plain filter `Y` and state estimator.
    #[default]
    Prop1,
    /// Filter and state estimator with feedback from the extension.
    Prop2,
}

impl ObserverVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ObserverVariant::Prop1 => "prop1",
            ObserverVariant::Prop2 => "prop2",
        }
    }
}

impl fmt::Display for ObserverVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObserverVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prop1" => Ok(ObserverVariant::Prop1),
            "prop2" => Ok(ObserverVariant::Prop2),
            other => Err(Error::Config(format!(
                "unknown observer variant `{other}` (expected prop1 or prop2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    /// Adaptation gain of the parameter update.
    pub lambda: f64,
    /// Forgetting rate of the regressor extension.
    pub kappa: f64,
    /// Feedback gain of the redesigned filter; zero recovers the plain observer.
    pub rho_gain: f64,
    pub mode: MixingMode,
}

impl Default for ObserverGains {
    fn default() -> Self {
        ObserverGains {
            lambda: 1.0,
            kappa: 1.0,
            rho_gain: 0.0,
            mode: MixingMode::Adjugate,
        }
    }
}

impl ObserverGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.rho_gain >= 0.0 && self.rho_gain.is_finite()) {
            return Err(Error::Config(format!("rho must be >= 0, got {}", self.rho_gain)));
        }
        Ok(())
    }
}

/// The observer integrators. Also used for their time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub z_hat: DVector<f64>,
    pub theta_hat: DVector<f64>,
    /// Auxiliary filter `Y` (`n_x x p`).
    pub filter: DMatrix<f64>,
    /// Extended output (`p`).
    pub ext_output: DVector<f64>,
    /// Extended regressor `Phi` (`p x p`, symmetric positive semi-definite).
    pub ext_regressor: DMatrix<f64>,
}

impl ObserverState {
    pub fn zeros(dims: Dimensions) -> Self {
        ObserverState {
            z_hat: DVector::zeros(dims.n_x),
            theta_hat: DVector::zeros(dims.p),
            filter: DMatrix::zeros(dims.n_x, dims.p),
            ext_output: DVector::zeros(dims.p),
            ext_regressor: DMatrix::zeros(dims.p, dims.p),
        }
    }

    /// Number of scalars in the flat layout.
    pub fn flat_len(dims: Dimensions) -> usize {
        dims.n_x + dims.p + dims.n_x * dims.p + dims.p + dims.p * dims.p
    }

    /// Appends the state in the order `z_hat, theta_hat, Y, ext_output, Phi`
    /// (matrices column-major).
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.z_hat.as_slice());
        out.extend_from_slice(self.theta_hat.as_slice());
        out.extend_from_slice(self.filter.as_slice());
        out.extend_from_slice(self.ext_output.as_slice());
        out.extend_from_slice(self.ext_regressor.as_slice());
    }

    pub fn read_flat(dims: Dimensions, flat: &[f64]) -> Self {
        let Dimensions { n_x, p, .. } = dims;
        let mut at = 0;
        let mut take = |n: usize| {
            let s = &flat[at..at + n];
            at += n;
            s
        };
        ObserverState {
            z_hat: DVector::from_column_slice(take(n_x)),
            theta_hat: DVector::from_column_slice(take(p)),
            filter: DMatrix::from_column_slice(n_x, p, take(n_x * p)),
            ext_output: DVector::from_column_slice(take(p)),
            ext_regressor: DMatrix::from_column_slice(p, p, take(p * p)),
        }
    }

    pub fn check_dims(&self, dims: Dimensions) -> Result<()> {
        let Dimensions { n_x, p, .. } = dims;
        let checks = [
            ("z_hat", (n_x, 1), self.z_hat.shape()),
            ("theta_hat", (p, 1), self.theta_hat.shape()),
            ("filter Y", (n_x, p), self.filter.shape()),
            ("extended output", (p, 1), self.ext_output.shape()),
            ("extended regressor", (p, p), self.ext_regressor.shape()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::dims(what, format!("{expected:?}"), format!("{got:?}")));
            }
        }
        Ok(())
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        let fields: [(&'static str, &[f64]); 5] = [
            ("z_hat", self.z_hat.as_slice()),
            ("theta_hat", self.theta_hat.as_slice()),
            ("filter Y", self.filter.as_slice()),
            ("extended output", self.ext_output.as_slice()),
            ("extended regressor", self.ext_regressor.as_slice()),
        ];
        fields
            .into_iter()
            .find(|(_, v)| v.iter().any(|x| !x.is_finite()))
            .map(|(name, _)| name)
    }
}

/// `T(u, Y) = P^-1 C(u)' Xi(u, Y)`
pub fn t_matrix(model: &SystemModel, certificate: &CertificateP, u: &DVector<f64>, filter: &DMatrix<f64>) -> DMatrix<f64> {
    let c = model.c(u);
    let xi = &c * filter + model.psi(u);
    certificate.p_inv() * c.transpose() * xi
}

/// `Xi' Xi`, filled so that the result is exactly symmetric.
fn gram(xi: &DMatrix<f64>) -> DMatrix<f64> {
    let p = xi.ncols();
    let mut g = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = xi.column(i).dot(&xi.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Time derivative of every observer integrator.
#[allow(clippy::too_many_arguments)]
pub fn observer_rhs(
    variant: ObserverVariant,
    model: &SystemModel,
    certificate: &CertificateP,
    gains: &ObserverGains,
    state: &ObserverState,
    u: &DVector<f64>,
    y: &DVector<f64>,
    t: f64,
) -> Result<ObserverState> {
    let a = model.a(u, y);
    let gamma = model.gamma(u, y);
    let c = model.c(u);
    let psi = model.psi(u);
    let lambda = &a - &gamma * &c;
    let xi = &c * &state.filter + &psi;

    let mut dz = &lambda * &state.z_hat + &gamma * y + model.drift(u, y);
    let mut dfilter = &lambda * &state.filter + model.omega(u, y) - &gamma * &psi;
    if variant == ObserverVariant::Prop2 && gains.rho_gain != 0.0 {
        let t_mat = certificate.p_inv() * c.transpose() * &xi;
        dz += &t_mat * &state.ext_output * gains.rho_gain;
        dfilter -= &t_mat * &state.ext_regressor * gains.rho_gain;
    }

    let dtheta = theta_dot(
        &state.ext_regressor,
        &state.ext_output,
        &state.theta_hat,
        gains.lambda,
        gains.mode,
    )?;
    let innovation = y - &c * &state.z_hat;
    let dext_output = xi.transpose() * innovation - &state.ext_output * gains.kappa;
    let dext_regressor = gram(&xi) - &state.ext_regressor * gains.kappa;

    let derivative = ObserverState {
        z_hat: dz,
        theta_hat: dtheta,
        filter: dfilter,
        ext_output: dext_output,
        ext_regressor: dext_regressor,
    };
    if let Some(field) = derivative.first_non_finite() {
        return Err(Error::NonFinite {
            field: format!("d/dt {field}"),
            t,
        });
    }
    Ok(derivative)
}

/// State estimate `x_hat = z_hat + Y theta_hat`.
pub fn reconstruct_x(state: &ObserverState) -> DVector<f64> {
    &state.z_hat + &state.filter * &state.theta_hat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_scenario;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    #[test]
    fn t_matrix_examples() {
        let s1 = builtin_scenario("S1").unwrap();
        let u = dvector![0.3];
        assert_eq!(t_matrix(&s1.model, &s1.certificate, &u, &dmatrix![0.0]), dmatrix![0.0]);
        assert_eq!(t_matrix(&s1.model, &s1.certificate, &u, &dmatrix![0.4]), dmatrix![0.4]);

        // S2 with Y = [1; 0]: C Y = 1, so T = P^-1 [1; 0], the first column of
        // P^-1. With P = [[0.3, -0.05], [-0.05, 0.4]], det P = 0.1175.
        let s2 = builtin_scenario("S2").unwrap();
        let t = t_matrix(&s2.model, &s2.certificate, &u, &dmatrix![1.0; 0.0]);
        let expected = dmatrix![0.4 / 0.1175; 0.05 / 0.1175];
        assert!((t - expected).amax() < 1e-12);
    }

    #[test]
    fn s1_zero_state_fixture() {
        // S1 at t = 0: all observer states zero, u = sin 0 = 0, y = x0 = 1.
        // Lambda = -1, Gamma = 0, L = 0, Omega = u = 0, Xi = C Y + Psi = 0.
        let s = builtin_scenario("S1").unwrap();
        let state = ObserverState::zeros(s.model.dims());
        let u = s.input_at(0.0);
        let y = s.model.output(&s.x0, &s.theta_true, &u).unwrap();
        assert_eq!(y, dvector![1.0]);
        for variant in [ObserverVariant::Prop1, ObserverVariant::Prop2] {
            let gains = ObserverGains {
                rho_gain: 1.0,
                ..Default::default()
            };
            let d = observer_rhs(variant, &s.model, &s.certificate, &gains, &state, &u, &y, 0.0).unwrap();
            assert_eq!(d, ObserverState::zeros(s.model.dims()));
        }
    }

    #[test]
    fn zero_equilibrium() {
        // z_hat = z, theta_hat = theta, ext_output = Phi theta
        for name in ["S1", "S2", "S3", "S4"] {
            let s = builtin_scenario(name).unwrap();
            let d = s.model.dims();
            let filter = DMatrix::from_fn(d.n_x, d.p, |i, j| 0.1 * (i + 2 * j + 1) as f64);
            let phi = DMatrix::from_fn(d.p, d.p, |i, j| if i == j { 1.0 } else { 0.2 });
            let x = s.x0.clone();
            let z = &x - &filter * &s.theta_true;
            let state = ObserverState {
                z_hat: z.clone(),
                theta_hat: s.theta_true.clone(),
                filter: filter.clone(),
                ext_output: &phi * &s.theta_true,
                ext_regressor: phi,
            };
            let u = s.input_at(0.7);
            let y = s.model.output(&x, &s.theta_true, &u).unwrap();
            for variant in [ObserverVariant::Prop1, ObserverVariant::Prop2] {
                let gains = ObserverGains {
                    rho_gain: 2.0,
                    ..Default::default()
                };
                let dobs = observer_rhs(variant, &s.model, &s.certificate, &gains, &state, &u, &y, 0.7).unwrap();
                assert!(dobs.theta_hat.amax() < 1e-12, "{name}");
                let dx = s.model.plant_rhs(0.7, &x, &s.theta_true, &u).unwrap();
                let dz = dx - &dobs.filter * &s.theta_true;
                assert!((dz - &dobs.z_hat).amax() < 1e-12, "{name} {variant}");
            }
        }
    }

    #[test]
    fn prop2_with_zero_rho_is_prop1() {
        let s = builtin_scenario("S3").unwrap();
        let state = ObserverState {
            z_hat: dvector![-0.3],
            theta_hat: dvector![0.7],
            filter: dmatrix![0.4],
            ext_output: dvector![0.2],
            ext_regressor: dmatrix![0.9],
        };
        let u = s.input_at(1.3);
        let y = dvector![0.8];
        let gains = ObserverGains::default();
        let d1 = observer_rhs(ObserverVariant::Prop1, &s.model, &s.certificate, &gains, &state, &u, &y, 1.3).unwrap();
        let d2 = observer_rhs(ObserverVariant::Prop2, &s.model, &s.certificate, &gains, &state, &u, &y, 1.3).unwrap();
        let (mut f1, mut f2) = (Vec::new(), Vec::new());
        d1.write_flat(&mut f1);
        d2.write_flat(&mut f2);
        assert!(f1.iter().zip(&f2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn non_finite_derivative_names_field() {
        let s = builtin_scenario("S1").unwrap();
        let mut state = ObserverState::zeros(s.model.dims());
        state.ext_output = dvector![f64::INFINITY];
        let err = observer_rhs(
            ObserverVariant::Prop1,
            &s.model,
            &s.certificate,
            &ObserverGains::default(),
            &state,
            &dvector![0.0],
            &dvector![0.0],
            4.0,
        )
        .unwrap_err();
        match err {
            Error::NonFinite { field, t } => {
                assert_eq!(t, 4.0);
                assert!(field.contains("theta_hat") || field.contains("extended output"), "{field}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reconstruct_examples() {
        let dims = Dimensions::new(2, 1, 1, 1).unwrap();
        let mut st = ObserverState::zeros(dims);
        st.z_hat = dvector![0.5, -1.0];
        assert_eq!(reconstruct_x(&st), dvector![0.5, -1.0]);
        st.z_hat = dvector![0.0, 0.0];
        st.filter = dmatrix![1.0; 2.0];
        st.theta_hat = dvector![3.0];
        assert_eq!(reconstruct_x(&st), dvector![3.0, 6.0]);
    }

    #[test]
    fn gains_validation() {
        assert!(ObserverGains::default().validate().is_ok());
        for bad in [
            ObserverGains {
                lambda: 0.0,
                ..Default::default()
            },
            ObserverGains {
                kappa: -1.0,
                ..Default::default()
            },
            ObserverGains {
                rho_gain: -0.1,
                ..Default::default()
            },
            ObserverGains {
                lambda: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn flat_layout_round_trips() {
        let dims = Dimensions::new(2, 1, 1, 2).unwrap();
        let st = ObserverState {
            z_hat: dvector![1.0, 2.0],
            theta_hat: dvector![3.0, 4.0],
            filter: dmatrix![5.0, 6.0; 7.0, 8.0],
            ext_output: dvector![9.0, 10.0],
            ext_regressor: dmatrix![11.0, 12.0; 12.0, 13.0],
        };
        let mut flat = Vec::new();
        st.write_flat(&mut flat);
        assert_eq!(flat.len(), ObserverState::flat_len(dims));
        assert_eq!(ObserverState::read_flat(dims, &flat), st);
    }

    proptest! {
        #[test]
        fn regressor_derivative_symmetric(y11 in -3.0..3.0f64, y12 in -3.0..3.0f64, a in 0.0..2.0f64, b in -1.0..1.0f64, c in 0.0..2.0f64, u1 in -1.0..1.0f64, u2 in -1.0..1.0f64) {
            let s = builtin_scenario("S4").unwrap();
            let state = ObserverState {
                z_hat: dvector![0.1],
                theta_hat: dvector![0.0, 0.0],
                filter: dmatrix![y11, y12],
                ext_output: dvector![0.0, 0.0],
                ext_regressor: dmatrix![a, b; b, c],
            };
            let d = observer_rhs(ObserverVariant::Prop2, &s.model, &s.certificate, &ObserverGains { rho_gain: 3.0, ..Default::default() }, &state, &dvector![u1, u2], &dvector![0.5], 0.0).unwrap();
            prop_assert_eq!(d.ext_regressor[(0, 1)].to_bits(), d.ext_regressor[(1, 0)].to_bits());
        }

        /// d/dt (z - z_hat) from plant and observer derivatives equals
        /// Lambda zbar (plain) or Lambda zbar - rho T eps (redesigned), with
        /// eps = ext_output - Phi theta.
        #[test]
        fn error_dynamics_identity(zh in -2.0..2.0f64, zh2 in -2.0..2.0f64, th in -2.0..2.0f64, f1 in -2.0..2.0f64, f2 in -2.0..2.0f64, eo in -2.0..2.0f64, phi in 0.0..3.0f64, t in 0.0..10.0f64, rho in 0.0..5.0f64) {
            let s = builtin_scenario("S2").unwrap();
            let state = ObserverState {
                z_hat: dvector![zh, zh2],
                theta_hat: dvector![th],
                filter: dmatrix![f1; f2],
                ext_output: dvector![eo],
                ext_regressor: dmatrix![phi],
            };
            let x = dvector![0.4, -0.9];
            let u = s.input_at(t);
            let y = s.model.output(&x, &s.theta_true, &u).unwrap();
            let dx = s.model.plant_rhs(t, &x, &s.theta_true, &u).unwrap();
            let zbar = &x - &state.filter * &s.theta_true - &state.z_hat;
            let lam = s.model.lambda_map(&u, &y);
            let eps = &state.ext_output - &state.ext_regressor * &s.theta_true;
            for variant in [ObserverVariant::Prop1, ObserverVariant::Prop2] {
                let gains = ObserverGains { rho_gain: rho, ..Default::default() };
                let d = observer_rhs(variant, &s.model, &s.certificate, &gains, &state, &u, &y, t).unwrap();
                let dzbar = &dx - &d.filter * &s.theta_true - &d.z_hat;
                let mut expected = &lam * &zbar;
                if variant == ObserverVariant::Prop2 {
                    expected -= t_matrix(&s.model, &s.certificate, &u, &state.filter) * &eps * rho;
                }
                prop_assert!((dzbar - expected).amax() < 1e-11);
            }
        }
    }
}
