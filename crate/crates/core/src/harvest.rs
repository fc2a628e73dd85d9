//! Non-linear (sigmoid) energy-harvesting model and received RF power.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelVector;
use crate::error::{Error, Result};

/// Circuit constants of the sigmoid harvester.
///
/// `x_const` and `y_const` are derived from the other three so that the
/// harvested power is exactly zero at zero input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EhParams {
    pub m_sat: f64,
    pub a: f64,
    pub b: f64,
    pub x_const: f64,
    pub y_const: f64,
}

pub fn eh_constants(m_sat: f64, a: f64, b: f64) -> Result<EhParams> {
    if !(m_sat > 0.0 && a > 0.0 && b > 0.0) {
        return Err(Error::invalid(format!(
            "EH constants must be positive, got m_sat={m_sat}, a={a}, b={b}"
        )));
    }
    let eab = (a * b).exp();
    Ok(EhParams {
        m_sat,
        a,
        b,
        x_const: m_sat * (1.0 + eab) / eab,
        y_const: m_sat / eab,
    })
}

impl EhParams {
    /// Sigmoid exponent `z = exp(-a (p_in - b))`.
    pub fn z(&self, p_in: f64) -> f64 {
        (-self.a * (p_in - self.b)).exp()
    }

    pub fn harvest(&self, p_in: f64) -> f64 {
        harvested_power(p_in, self)
    }
}

/// Power delivered to the load for RF input `p_in` (watts).
pub fn harvested_power(p_in: f64, eh: &EhParams) -> f64 {
    let out = eh.x_const / (1.0 + eh.z(p_in)) - eh.y_const;
    out.max(0.0)
}

/// Energy beamforming matrix `Q` (watts): Hermitian, PSD, trace-bounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBeamMatrix(DMatrix<Complex64>);

pub(crate) const HERMITIAN_TOL: f64 = 1e-9;

impl EnergyBeamMatrix {
    /// Wraps `q` after checking the Hermitian, PSD and trace invariants.
    pub fn new(q: DMatrix<Complex64>, p_max: f64) -> Result<Self> {
        let m = Self(q);
        m.validate(p_max)?;
        Ok(m)
    }

    /// Wraps `q` without the PSD/trace checks; callers guarantee the
    /// invariants (used for projection outputs).
    pub(crate) fn from_matrix_unchecked(q: DMatrix<Complex64>) -> Self {
        Self(q)
    }

    /// `(p / m) · I`.
    pub fn isotropic(m: usize, p: f64) -> Self {
        Self(DMatrix::identity(m, m) * Complex64::new(p / m as f64, 0.0))
    }

    pub fn zeros(m: usize) -> Self {
        Self(DMatrix::zeros(m, m))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        crate::subsolvers::psd::hermitian_eigen(&self.0)
            .0
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self, p_max: f64) -> Result<()> {
        if self.0.nrows() != self.0.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.0.nrows(),
                got: self.0.ncols(),
            });
        }
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "energy beam matrix is not PSD (min eigenvalue {min_eig:e})"
            )));
        }
        if self.trace() > p_max + HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "trace {} exceeds power budget {p_max}",
                self.trace()
            )));
        }
        Ok(())
    }
}

pub(crate) fn hermitian_deviation(q: &DMatrix<Complex64>) -> f64 {
    (q - q.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Quadratic form `hᵀ Q (hᵀ)ᴴ`: RF power received by a WD with channel `h`.
pub fn received_rf_power(h: &ChannelVector, q: &EnergyBeamMatrix) -> Result<f64> {
    if h.len() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: h.len(),
        });
    }
    Ok(quad_form(&h.downlink(), q.matrix()))
}

/// `vᴴ Q v`, clamped to zero below `-1e-12`.
pub(crate) fn quad_form(v: &nalgebra::DVector<Complex64>, q: &DMatrix<Complex64>) -> f64 {
    let val = v.dotc(&(q * v)).re;
    if val < -1e-12 {
        0.0
    } else {
        val.max(0.0)
    }
}
