//! Maximum-ratio combining.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::ChannelVector;
use crate::error::{Error, Result};

/// MRC receive combiner `w = √p · h / σ0²`.
pub fn mrc_combiner(h: &ChannelVector, p_k: f64, noise: f64) -> Result<DVector<Complex64>> {
    if h.norm_sqr() == 0.0 {
        return Err(Error::ZeroVector("channel"));
    }
    Ok(h.as_vector() * Complex64::new(p_k.max(0.0).sqrt() / noise, 0.0))
}

/// Gain attained by MRC: `‖h‖² / σ0²`.
pub fn mrc_gain(h: &ChannelVector, noise: f64) -> f64 {
    h.norm_sqr() / noise
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::combining_gain;

    #[test]
    fn unit_basis_scaling() {
        let sigma2 = 1e-3;
        let h = ChannelVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let w = mrc_combiner(&h, sigma2 * sigma2, sigma2).unwrap();
        assert!((w[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(w[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn attains_matched_gain() {
        let h = ChannelVector::from_vec(vec![Complex64::new(0.2, -0.4), Complex64::new(0.7, 0.1)]);
        let w = mrc_combiner(&h, 0.3, 0.01).unwrap();
        let g = combining_gain(w.as_slice(), &h, 0.01).unwrap();
        assert!((g - mrc_gain(&h, 0.01)).abs() / g < 1e-12);
        let zero = ChannelVector::from_vec(vec![Complex64::new(0.0, 0.0); 2]);
        assert!(mrc_combiner(&zero, 1.0, 0.01).is_err());
    }
}
