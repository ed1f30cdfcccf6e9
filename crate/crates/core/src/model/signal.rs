//! Closed algebra of input signals `u(t)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Constant {
        value: f64,
    },
    /// `amplitude * sin(omega * t + phase)`
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude * exp(-decay * t) * sin(omega * t + phase)`
    DecayingSinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
        decay: f64,
    },
    /// `inner(t)` for `t < t_off`, zero afterwards.
    SwitchOff {
        t_off: f64,
        inner: Box<Signal>,
    },
    Sum {
        terms: Vec<Signal>,
    },
}

impl Signal {
    pub fn constant(value: f64) -> Self {
        Signal::Constant { value }
    }

    pub fn sin(omega: f64) -> Self {
        Signal::Sinusoid {
            amplitude: 1.0,
            omega,
            phase: 0.0,
        }
    }

    pub fn cos(omega: f64) -> Self {
        Signal::Sinusoid {
            amplitude: 1.0,
            omega,
            phase: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn switch_off(self, t_off: f64) -> Self {
        Signal::SwitchOff {
            t_off,
            inner: Box::new(self),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Signal::Constant { value } => *value,
            Signal::Sinusoid { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
            Signal::DecayingSinusoid {
                amplitude,
                omega,
                phase,
                decay,
            } => amplitude * (-decay * t).exp() * (omega * t + phase).sin(),
            Signal::SwitchOff { t_off, inner } => {
                if t < *t_off {
                    inner.eval(t)
                } else {
                    0.0
                }
            }
            Signal::Sum { terms } => terms.iter().map(|s| s.eval(t)).sum(),
        }
    }

    /// True when every parameter is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            Signal::Constant { value } => value.is_finite(),
            Signal::Sinusoid { amplitude, omega, phase } => amplitude.is_finite() && omega.is_finite() && phase.is_finite(),
            Signal::DecayingSinusoid {
                amplitude,
                omega,
                phase,
                decay,
            } => amplitude.is_finite() && omega.is_finite() && phase.is_finite() && decay.is_finite(),
            Signal::SwitchOff { t_off, inner } => t_off.is_finite() && inner.is_finite(),
            Signal::Sum { terms } => terms.iter().all(Signal::is_finite),
        }
    }
}

/// Vector-valued input, one signal per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputSignal(pub Vec<Signal>);

impl InputSignal {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.0.iter().map(|s| s.eval(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_algebra() {
        assert_eq!(Signal::constant(2.5).eval(7.0), 2.5);
        assert!((Signal::sin(1.0).eval(0.5) - 0.5f64.sin()).abs() < 1e-15);
        assert!((Signal::cos(2.0).eval(0.3) - 0.6f64.cos()).abs() < 1e-15);
        let d = Signal::DecayingSinusoid {
            amplitude: 2.0,
            omega: 1.0,
            phase: 0.0,
            decay: 0.5,
        };
        assert!((d.eval(1.0) - 2.0 * (-0.5f64).exp() * 1f64.sin()).abs() < 1e-15);
        let w = Signal::sin(1.0).switch_off(20.0);
        assert_eq!(w.eval(19.0), 19f64.sin());
        assert_eq!(w.eval(20.0), 0.0);
        let s = Signal::Sum {
            terms: vec![Signal::constant(1.0), Signal::constant(2.0)],
        };
        assert_eq!(s.eval(0.0), 3.0);
    }

    #[test]
    fn non_finite_parameters_detected() {
        assert!(!Signal::constant(f64::NAN).is_finite());
        assert!(!Signal::sin(f64::INFINITY).switch_off(1.0).is_finite());
        assert!(Signal::sin(1.0).is_finite());
    }
}
