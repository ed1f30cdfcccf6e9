//! Fixtures shared by the benchmarks.

use drem_core::{builtin_scenario, ObserverGains, ObserverState, ObserverVariant, SimConfig};
use nalgebra::{DMatrix, DVector};

/// A well-conditioned, deterministic `p x p` test matrix.
pub fn test_matrix(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            2.0 + i as f64
        } else {
            1.0 / (1.0 + i as f64 + 2.0 * j as f64)
        }
    })
}

/// Observer state with every field non-zero, sized for `config`.
pub fn busy_state(config: &SimConfig) -> ObserverState {
    let dims = config.scenario.model.dims();
    let mut st = ObserverState::zeros(dims);
    st.z_hat = DVector::from_element(dims.n_x, 0.3);
    st.theta_hat = DVector::from_element(dims.p, -0.2);
    st.filter = DMatrix::from_element(dims.n_x, dims.p, 0.1);
    st.ext_output = DVector::from_element(dims.p, 0.4);
    st.ext_regressor = test_matrix(dims.p) * test_matrix(dims.p).transpose();
    st
}

/// Redesigned observer on a built-in scenario with the horizon cut to `t_final`.
pub fn short_config(name: &str, t_final: f64) -> SimConfig {
    let mut scenario = builtin_scenario(name).expect("built-in scenario");
    scenario.t_final = t_final;
    let gains = ObserverGains {
        rho_gain: 1.0,
        ..ObserverGains::default()
    };
    SimConfig::new(scenario, ObserverVariant::Prop2, gains)
}
