//! Hermitian eigen-kernels: PSD/trace projection and energy-beam recovery.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harvest::{hermitian_deviation, EnergyBeamMatrix, HERMITIAN_TOL};

/// Eigenvalues (ascending) and unit eigenvectors (columns) of a Hermitian
/// matrix. Only the Hermitian part of `m` is used.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Euclidean projection of `values` onto `{λ ≥ 0, Σλ ≤ budget}`:
/// `λ_i = max(a_i − μ, 0)` with the smallest `μ ≥ 0` meeting the budget.
pub fn project_eigenvalues(values: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // largest j such that the water level stays below sorted[j]
    let mut prefix = 0.0;
    let mut mu = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        prefix += v;
        let level = (prefix - budget) / (j + 1) as f64;
        if v > level {
            mu = level;
        } else {
            break;
        }
    }
    let mu = mu.max(0.0);
    let mut out: Vec<f64> = values.iter().map(|v| (v - mu).max(0.0)).collect();
    let total: f64 = out.iter().sum();
    if total > budget {
        out.iter_mut().for_each(|v| *v *= budget / total);
    }
    out
}

fn rebuild(values: &[f64], vectors: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = vectors.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (i, &lam) in values.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let u = vectors.column(i);
        out += (u * u.adjoint()) * Complex64::new(lam, 0.0);
    }
    (&out + out.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Frobenius-nearest matrix in `{Q ⪰ 0, tr Q ≤ budget}`.
pub fn project_psd_trace(m: &DMatrix<Complex64>, budget: f64) -> Result<EnergyBeamMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(project_hermitian(m, budget))
}

pub(crate) fn project_hermitian(m: &DMatrix<Complex64>, budget: f64) -> EnergyBeamMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let projected = project_eigenvalues(&values, budget);
    EnergyBeamMatrix::from_matrix_unchecked(rebuild(&projected, &vectors))
}

/// One energy beam: unit direction and power (watts).
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBeam {
    pub direction: DVector<Complex64>,
    pub power: f64,
}

impl EnergyBeam {
    /// Beamforming vector `√power · direction`.
    pub fn weights(&self) -> DVector<Complex64> {
        &self.direction * Complex64::new(self.power.sqrt(), 0.0)
    }
}

/// Eigen-decomposes `Q` into independent energy beams, keeping eigenvalues
/// above `1e-9 · tr Q`, strongest first.
pub fn recover_beams(q: &EnergyBeamMatrix) -> Vec<EnergyBeam> {
    let (values, vectors) = hermitian_eigen(q.matrix());
    let floor = 1e-9 * q.trace().max(0.0);
    let mut beams: Vec<EnergyBeam> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > floor)
        .map(|(i, &v)| EnergyBeam {
            direction: vectors.column(i).into_owned(),
            power: v,
        })
        .collect();
    beams.sort_by(|a, b| b.power.total_cmp(&a.power));
    beams
}
