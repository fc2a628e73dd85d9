//! Unit conversions shared by configuration files, sweeps and the CLI.

/// `x` dBm in watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn ghz_to_hz(ghz: f64) -> f64 {
    ghz * 1e9
}

pub fn khz_to_hz(khz: f64) -> f64 {
    khz * 1e3
}

/// Multiples of the wavelength in meters.
pub fn wavelengths_to_m(n: f64, lambda: f64) -> f64 {
    n * lambda
}

pub fn m_to_wavelengths(m: f64, lambda: f64) -> f64 {
    m / lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_levels() {
        assert!((dbm_to_watt(40.0) - 10.0).abs() < 1e-12);
        assert!((dbm_to_watt(-80.0) - 1e-11).abs() < 1e-24);
        assert!((dbm_to_watt(30.0) - 1.0).abs() < 1e-15);
        assert!((watt_to_dbm(1e-3)).abs() < 1e-12);
        assert_eq!(ghz_to_hz(0.4), 0.4e9);
        assert_eq!(khz_to_hz(50.0), 50e3);
        assert!((wavelengths_to_m(3.0, 0.1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_watts_is_minus_infinity_dbm() {
        assert_eq!(watt_to_dbm(0.0), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn dbm_round_trip(x in -150.0f64..80.0) {
            prop_assert!((watt_to_dbm(dbm_to_watt(x)) - x).abs() < 1e-9);
        }

        #[test]
        fn db_round_trip(x in -100.0f64..100.0) {
            prop_assert!((linear_to_db(db_to_linear(x)) - x).abs() < 1e-9);
        }

        #[test]
        fn wavelength_round_trip(n in 0.0f64..50.0, lambda in 1e-3f64..1.0) {
            prop_assert!((m_to_wavelengths(wavelengths_to_m(n, lambda), lambda) - n).abs() < 1e-9);
        }
    }
}
