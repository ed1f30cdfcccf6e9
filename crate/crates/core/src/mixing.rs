//! Regressor mixing: cofactor determinant and adjugate, the excitation scalar
//! `delta = sqrt(det Phi)`, and the three gain shapes of the parameter update.
//!
//! Cofactor expansion is exact and branch-free for the supported sizes
//! (`p <= 5`); the adjugate is needed anyway, so no LU is involved.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gain shape applied to the extended residual `ext_output - Phi theta_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum MixingMode {
    /// `lambda adj(Phi)`
    #[default]
    #[serde(rename = "adj")]
    Adjugate,
    /// `lambda delta adj(Phi)`: stops updating completely when `det Phi = 0`.
    #[serde(rename = "delta-adj")]
    DeltaAdjugate,
    /// `lambda I`: converges along the excited directions of `Phi` only.
    #[serde(rename = "identity")]
    Identity,
}

impl MixingMode {
    pub const ALL: [MixingMode; 3] = [MixingMode::Adjugate, MixingMode::DeltaAdjugate, MixingMode::Identity];

    pub fn as_str(self) -> &'static str {
        match self {
            MixingMode::Adjugate => "adj",
            MixingMode::DeltaAdjugate => "delta-adj",
            MixingMode::Identity => "identity",
        }
    }
}

impl fmt::Display for MixingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MixingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adj" => Ok(MixingMode::Adjugate),
            "delta-adj" => Ok(MixingMode::DeltaAdjugate),
            "identity" => Ok(MixingMode::Identity),
            other => Err(Error::Config(format!(
                "unknown mixing mode `{other}` (expected adj, delta-adj or identity)"
            ))),
        }
    }
}

fn minor(m: &DMatrix<f64>, skip_row: usize, skip_col: usize) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n - 1, n - 1, |i, j| {
        let r = if i < skip_row { i } else { i + 1 };
        let c = if j < skip_col { j } else { j + 1 };
        m[(r, c)]
    })
}

/// Determinant by Laplace expansion along the first row.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    match m.nrows() {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        n => (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * determinant(&minor(m, 0, j))
            })
            .sum(),
    }
}

/// Transpose of the cofactor matrix. The adjugate of a 1x1 matrix is `[1]`,
/// so `adj(M) M = det(M) I` holds in every dimension.
pub fn adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "adjugate of a non-square matrix");
    let n = m.nrows();
    match n {
        0 => DMatrix::zeros(0, 0),
        1 => DMatrix::from_element(1, 1, 1.0),
        _ => DMatrix::from_fn(n, n, |i, j| {
            // adj[i][j] = cofactor[j][i]
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * determinant(&minor(m, j, i))
        }),
    }
}

/// Largest entrywise asymmetry of `m`, relative to its largest entry.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// `sqrt(max(det Phi, 0))`. Slightly negative determinants are floating-point
/// leakage of positive semi-definiteness and clamp to zero.
pub fn delta(phi: &DMatrix<f64>) -> Result<f64> {
    let asymmetry = relative_asymmetry(phi);
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(Error::Integrity {
            asymmetry,
            tolerance: SYMMETRY_TOLERANCE,
        });
    }
    Ok(determinant(phi).max(0.0).sqrt())
}

/// Parameter update `d theta_hat / dt` for the given gain shape.
///
/// A singular `Phi` is a legal stall in the adjugate modes, not an error.
pub fn theta_dot(
    phi: &DMatrix<f64>,
    ext_output: &DVector<f64>,
    theta_hat: &DVector<f64>,
    lambda: f64,
    mode: MixingMode,
) -> Result<DVector<f64>> {
    let residual = ext_output - phi * theta_hat;
    Ok(match mode {
        MixingMode::Adjugate => adjugate(phi) * residual * lambda,
        MixingMode::DeltaAdjugate => adjugate(phi) * residual * (lambda * delta(phi)?),
        MixingMode::Identity => residual * lambda,
    })
}
