//! Built-in benchmark plants. Each one is constructed so that the quadratic
//! certificate `P` satisfies `P Lambda + Lambda' P + C'C <= 0` for every input.

use nalgebra::{dmatrix, dvector, DMatrix};

use super::{
    solve_lyapunov, CertificateP, Dimensions, Expr, InputSignal, Mappings, MatrixMapping, Scenario, Signal, SystemModel,
};
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: [&str; 5] = ["S1", "S2", "S3", "S4", "W1"];

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let scenario = match name {
        "S1" => scalar("S1", 0.0, Signal::sin(1.0)),
        "S2" => second_order(),
        "S3" => scalar("S3", 0.5, Signal::sin(1.0)),
        "S4" => two_parameter(),
        "W1" => {
            let mut s = scalar("W1", 0.0, Signal::sin(1.0).switch_off(20.0));
            // long enough for the excitation scalar to decay well below 1e-8
            s.t_final = 100.0;
            s
        }
        _ => {
            return Err(Error::UnknownScenario {
                name: name.to_string(),
                valid: BUILTIN_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    scenario.validate()?;
    Ok(scenario)
}

fn constant(m: DMatrix<f64>) -> MatrixMapping {
    MatrixMapping::constant(&m)
}

/// dx = -x + u theta, y = x + psi theta
fn scalar(name: &str, psi: f64, input: Signal) -> Scenario {
    let dims = Dimensions::new(1, 1, 1, 1).expect("static dims");
    let maps = Mappings {
        a: constant(dmatrix![-1.0]),
        omega: MatrixMapping::from_rows(vec![vec![Expr::input(0)]]).expect("static mapping"),
        drift: MatrixMapping::zeros(1, 1),
        c: constant(dmatrix![1.0]),
        psi: constant(dmatrix![psi]),
        gamma: MatrixMapping::zeros(1, 1),
    };
    Scenario {
        name: name.to_string(),
        model: SystemModel::new(dims, maps, psi.abs()).expect("static model"),
        theta_true: dvector![2.0],
        x0: dvector![1.0],
        input: InputSignal(vec![input]),
        certificate: CertificateP::scalar(1.0).expect("static certificate"),
        t_final: 50.0,
    }
}

/// Double integrator with the parameter entering the acceleration.
fn second_order() -> Scenario {
    let dims = Dimensions::new(2, 1, 1, 1).expect("static dims");
    let a = dmatrix![0.0, 1.0; 0.0, 0.0];
    let c = dmatrix![1.0, 0.0];
    let gamma = dmatrix![2.0; 1.0];
    let lambda = &a - &gamma * &c;
    let q = c.transpose() * &c + DMatrix::identity(2, 2) * 0.1;
    let p = solve_lyapunov(&lambda, &q).expect("Lambda is Hurwitz");
    let maps = Mappings {
        a: constant(a),
        omega: MatrixMapping::from_rows(vec![vec![Expr::Const(0.0)], vec![Expr::input(0)]]).expect("static mapping"),
        drift: MatrixMapping::zeros(2, 1),
        c: constant(c),
        psi: MatrixMapping::zeros(1, 1),
        gamma: constant(gamma),
    };
    Scenario {
        name: "S2".into(),
        model: SystemModel::new(dims, maps, 0.0).expect("static model"),
        theta_true: dvector![1.5],
        x0: dvector![1.0, 0.0],
        input: InputSignal(vec![Signal::sin(1.0)]),
        certificate: CertificateP::new(p).expect("P is positive definite"),
        t_final: 50.0,
    }
}

fn two_parameter() -> Scenario {
    let dims = Dimensions::new(1, 2, 1, 2).expect("static dims");
    let maps = Mappings {
        a: constant(dmatrix![-1.0]),
        omega: MatrixMapping::from_rows(vec![vec![Expr::input(0), Expr::input(1)]]).expect("static mapping"),
        drift: MatrixMapping::zeros(1, 1),
        c: constant(dmatrix![1.0]),
        psi: MatrixMapping::zeros(1, 2),
        gamma: MatrixMapping::zeros(1, 1),
    };
    Scenario {
        name: "S4".into(),
        model: SystemModel::new(dims, maps, 0.0).expect("static model"),
        theta_true: dvector![2.0, -1.0],
        x0: dvector![1.0],
        input: InputSignal(vec![Signal::sin(1.0), Signal::cos(2.0)]),
        certificate: CertificateP::scalar(1.0).expect("static certificate"),
        t_final: 50.0,
    }
}
