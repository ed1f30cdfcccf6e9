//! Affine plant description.
//!
//! A plant is
//!
//! ```text
//! dx/dt = A(u, y) x + Omega(u, y) theta + L(u, y)
//!     y = C(u) x + Psi(u) theta
//! ```
//!
//! together with an output-injection gain `Gamma(u, y)` that defines the
//! observer's error matrix `Lambda = A - Gamma C`. Every mapping entry is an
//! [`Expr`] over the measured signals, which keeps scenarios reproducible from
//! a configuration file alone.

mod catalog;
mod expr;
mod lyapunov;
mod signal;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub use catalog::{builtin_scenario, BUILTIN_NAMES};
pub use expr::{Expr, Func};
pub use lyapunov::solve_lyapunov;
pub use signal::{InputSignal, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub p: usize,
}

/// Largest parameter dimension the cofactor adjugate supports.
pub const MAX_PARAMS: usize = 5;

impl Dimensions {
    pub fn new(n_x: usize, n_u: usize, n_y: usize, p: usize) -> Result<Self> {
        let dims = Dimensions { n_x, n_u, n_y, p };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_u == 0 || self.n_y == 0 || self.p == 0 {
            return Err(Error::Config(format!("all dimensions must be >= 1, got {self:?}")));
        }
        if self.p > MAX_PARAMS {
            return Err(Error::Config(format!(
                "parameter dimension {} exceeds the supported maximum {MAX_PARAMS}",
                self.p
            )));
        }
        Ok(())
    }
}

/// A matrix-valued mapping whose entries are expressions in `u` and `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMapping {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
    constant: Option<DMatrix<f64>>,
}

impl MatrixMapping {
    /// Builds a mapping from row-major entries.
    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Config("mapping must have at least one entry".into()));
        }
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Config("ragged mapping rows".into()));
        }
        let entries: Vec<Expr> = rows.into_iter().flatten().collect();
        let constant = entries
            .iter()
            .map(Expr::as_constant)
            .collect::<Option<Vec<f64>>>()
            .map(|vals| DMatrix::from_row_slice(n_rows, n_cols, &vals));
        Ok(MatrixMapping {
            rows: n_rows,
            cols: n_cols,
            entries,
            constant,
        })
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        MatrixMapping {
            rows: m.nrows(),
            cols: m.ncols(),
            entries: m.transpose().iter().map(|&v| Expr::Const(v)).collect(),
            constant: Some(m.clone()),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(&DMatrix::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    pub fn max_input(&self) -> Option<usize> {
        self.entries.iter().filter_map(Expr::max_input).max()
    }

    pub fn max_output(&self) -> Option<usize> {
        self.entries.iter().filter_map(Expr::max_output).max()
    }

    pub fn eval(&self, u: &[f64], y: &[f64]) -> DMatrix<f64> {
        if let Some(c) = &self.constant {
            return c.clone();
        }
        DMatrix::from_row_iterator(self.rows, self.cols, self.entries.iter().map(|e| e.eval(u, y)))
    }

    fn check(&self, name: &str, rows: usize, cols: usize, dims: &Dimensions, allow_output: bool) -> Result<()> {
        if self.shape() != (rows, cols) {
            return Err(Error::dims(
                name,
                format!("{rows}x{cols}"),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        if let Some(i) = self.max_input() {
            if i >= dims.n_u {
                return Err(Error::Config(format!("{name} references u{} but n_u = {}", i + 1, dims.n_u)));
            }
        }
        if let Some(i) = self.max_output() {
            if !allow_output {
                return Err(Error::Config(format!("{name} may depend on u only, found y{}", i + 1)));
            }
            if i >= dims.n_y {
                return Err(Error::Config(format!("{name} references y{} but n_y = {}", i + 1, dims.n_y)));
            }
        }
        Ok(())
    }
}

/// The affine plant together with its output-injection gain.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    dims: Dimensions,
    a: MatrixMapping,
    omega: MatrixMapping,
    drift: MatrixMapping,
    c: MatrixMapping,
    psi: MatrixMapping,
    gamma: MatrixMapping,
    psi_sup: f64,
}

/// Builder-style argument bundle for [`SystemModel::new`].
#[derive(Debug, Clone)]
pub struct Mappings {
    pub a: MatrixMapping,
    pub omega: MatrixMapping,
    /// `L(u, y)` as an `n_x x 1` mapping.
    pub drift: MatrixMapping,
    pub c: MatrixMapping,
    pub psi: MatrixMapping,
    pub gamma: MatrixMapping,
}

impl SystemModel {
    pub fn new(dims: Dimensions, maps: Mappings, psi_sup: f64) -> Result<Self> {
        dims.validate()?;
        let Dimensions { n_x, n_y, p, .. } = dims;
        maps.a.check("A", n_x, n_x, &dims, true)?;
        maps.omega.check("Omega", n_x, p, &dims, true)?;
        maps.drift.check("L", n_x, 1, &dims, true)?;
        maps.c.check("C", n_y, n_x, &dims, false)?;
        maps.psi.check("Psi", n_y, p, &dims, false)?;
        maps.gamma.check("Gamma", n_x, n_y, &dims, true)?;
        if !(psi_sup >= 0.0 && psi_sup.is_finite()) {
            return Err(Error::Config(format!("psi_sup must be finite and >= 0, got {psi_sup}")));
        }
        Ok(SystemModel {
            dims,
            a: maps.a,
            omega: maps.omega,
            drift: maps.drift,
            c: maps.c,
            psi: maps.psi,
            gamma: maps.gamma,
            psi_sup,
        })
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn psi_sup(&self) -> f64 {
        self.psi_sup
    }

    pub fn psi_is_constant(&self) -> bool {
        self.psi.is_constant()
    }

    /// True when neither `Lambda = A - Gamma C` nor `C` depends on the signals.
    pub fn error_matrix_is_constant(&self) -> bool {
        self.a.is_constant() && self.gamma.is_constant() && self.c.is_constant()
    }

    pub fn a(&self, u: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        self.a.eval(u.as_slice(), y.as_slice())
    }

    pub fn omega(&self, u: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        self.omega.eval(u.as_slice(), y.as_slice())
    }

    pub fn drift(&self, u: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let m = self.drift.eval(u.as_slice(), y.as_slice());
        DVector::from_column_slice(m.as_slice())
    }

    pub fn c(&self, u: &DVector<f64>) -> DMatrix<f64> {
        self.c.eval(u.as_slice(), &[])
    }

    pub fn psi(&self, u: &DVector<f64>) -> DMatrix<f64> {
        self.psi.eval(u.as_slice(), &[])
    }

    pub fn gamma(&self, u: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        self.gamma.eval(u.as_slice(), y.as_slice())
    }

    fn check_vec(&self, what: &str, v: &DVector<f64>, expected: usize) -> Result<()> {
        if v.len() != expected {
            return Err(Error::dims(what, expected, v.len()));
        }
        Ok(())
    }

    /// `y = C(u) x + Psi(u) theta`
    pub fn output(&self, x: &DVector<f64>, theta: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vec("x", x, self.dims.n_x)?;
        self.check_vec("theta", theta, self.dims.p)?;
        self.check_vec("u", u, self.dims.n_u)?;
        Ok(self.c(u) * x + self.psi(u) * theta)
    }

    /// Plant state derivative. The output is computed first and then fed to
    /// the `(u, y)`-dependent mappings.
    pub fn plant_rhs(&self, t: f64, x: &DVector<f64>, theta: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.output(x, theta, u)?;
        let dx = self.a(u, &y) * x + self.omega(u, &y) * theta + self.drift(u, &y);
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                field: "plant state derivative".into(),
                t,
            });
        }
        Ok(dx)
    }

    /// `Lambda(u, y) = A(u, y) - Gamma(u, y) C(u)`
    pub fn lambda_map(&self, u: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        self.a(u, y) - self.gamma(u, y) * self.c(u)
    }

    /// `Xi(u, Y) = C(u) Y + Psi(u)`
    pub fn xi_map(&self, u: &DVector<f64>, filter: &DMatrix<f64>) -> DMatrix<f64> {
        self.c(u) * filter + self.psi(u)
    }
}

/// Constant quadratic Lyapunov certificate `V(e) = 1/2 e' P e`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateP {
    p: DMatrix<f64>,
    p_inv: DMatrix<f64>,
}

impl CertificateP {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() || p.nrows() == 0 {
            return Err(Error::Certificate(format!(
                "P must be square, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Certificate("P has non-finite entries".into()));
        }
        let scale = p.amax().max(f64::MIN_POSITIVE);
        if (&p - p.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Certificate("P is not symmetric".into()));
        }
        let min_eig = SymmetricEigen::new(p.clone()).eigenvalues.min();
        if min_eig <= 0.0 {
            return Err(Error::Certificate(format!(
                "P is not positive definite (min eigenvalue {min_eig:e})"
            )));
        }
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Certificate("P is singular".into()))?;
        let n = p.nrows();
        let residual = (&p * &p_inv - DMatrix::identity(n, n)).amax();
        if residual > 1e-12 {
            return Err(Error::Certificate(format!("P * P^-1 deviates from I by {residual:e}")));
        }
        Ok(CertificateP { p, p_inv })
    }

    pub fn scalar(p: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, p))
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn p_inv(&self) -> &DMatrix<f64> {
        &self.p_inv
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// `1/2 e' P e`
    pub fn energy(&self, e: &DVector<f64>) -> f64 {
        0.5 * e.dot(&(&self.p * e))
    }
}

/// A model bound to a true parameter, an initial state, an input and a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: SystemModel,
    pub theta_true: DVector<f64>,
    pub x0: DVector<f64>,
    pub input: InputSignal,
    pub certificate: CertificateP,
    pub t_final: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let d = self.model.dims();
        if self.theta_true.len() != d.p {
            return Err(Error::dims("theta_true", d.p, self.theta_true.len()));
        }
        if self.x0.len() != d.n_x {
            return Err(Error::dims("x0", d.n_x, self.x0.len()));
        }
        if self.input.dim() != d.n_u {
            return Err(Error::dims("input signal", d.n_u, self.input.dim()));
        }
        if self.certificate.dim() != d.n_x {
            return Err(Error::dims("certificate P", d.n_x, self.certificate.dim()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.theta_true.iter().chain(self.x0.iter()).any(|v| !v.is_finite()) || !self.input.0.iter().all(Signal::is_finite) {
            return Err(Error::Config("scenario contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn input_at(&self, t: f64) -> DVector<f64> {
        DVector::from_vec(self.input.eval(t))
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone().svd(false, false).singular_values.max()
}
