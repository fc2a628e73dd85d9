//! Declarative TOML configuration.
//!
//! Every key is optional; missing keys take the reference defaults. Powers are
//! given in dBm and the region size and minimum antenna distance in carrier
//! wavelengths, as in the usual parameter tables. Example:
//!
//! ```toml
//! seed = 7
//!
//! [system]
//! m_antennas = 8
//! k_wds = 6
//! p_max_dbm = 40.0
//! noise_dbm = -80.0
//! f_edge_hz = 0.4e9
//!
//! [pso]
//! n_particles = 50
//! max_iters = 200
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::units::{dbm_to_watt, wavelengths_to_m};
use crate::error::{Error, Result};
use crate::harvest::eh_constants;
use crate::pso::PsoConfig;
use crate::rates::SystemParams;

/// System constants. `None` keeps the reference value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub t_block_s: Option<f64>,
    pub bandwidth_hz: Option<f64>,
    pub lambda_m: Option<f64>,
    /// Side of the square antenna region, in wavelengths.
    pub region_wavelengths: Option<f64>,
    /// Minimum antenna distance, in wavelengths.
    pub min_dist_wavelengths: Option<f64>,
    pub m_antennas: Option<usize>,
    pub k_wds: Option<usize>,
    pub paths_per_wd: Option<usize>,
    pub p_max_dbm: Option<f64>,
    pub noise_dbm: Option<f64>,
    /// Effective switched capacitance (W/Hz³).
    pub kappa: Option<f64>,
    pub f_edge_hz: Option<f64>,
    pub phi_cycles_per_bit: Option<f64>,
    pub eh_saturation_w: Option<f64>,
    pub eh_a: Option<f64>,
    pub eh_b: Option<f64>,
    /// Path-loss constant; defaults to `(λ / 4π)²` at the configured λ.
    pub c0: Option<f64>,
    pub path_loss_exponent: Option<f64>,
    pub distance_min_m: Option<f64>,
    pub distance_max_m: Option<f64>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field; } )+
    };
}

impl SystemConfig {
    /// Overwrites every field that `other` sets.
    pub fn merge(&mut self, other: &SystemConfig) {
        overlay!(
            self,
            other,
            t_block_s,
            bandwidth_hz,
            lambda_m,
            region_wavelengths,
            min_dist_wavelengths,
            m_antennas,
            k_wds,
            paths_per_wd,
            p_max_dbm,
            noise_dbm,
            kappa,
            f_edge_hz,
            phi_cycles_per_bit,
            eh_saturation_w,
            eh_a,
            eh_b,
            c0,
            path_loss_exponent,
            distance_min_m,
            distance_max_m
        );
    }

    pub fn resolve(&self) -> Result<SystemParams> {
        let d = SystemParams::default();
        let lambda = self.lambda_m.unwrap_or(d.lambda);
        let k = self.k_wds.unwrap_or(d.k_wds);
        let reference_eh = d.eh[0];
        let eh = eh_constants(
            self.eh_saturation_w.unwrap_or(reference_eh.m_sat),
            self.eh_a.unwrap_or(reference_eh.a),
            self.eh_b.unwrap_or(reference_eh.b),
        )?;
        let params = SystemParams {
            t_block: self.t_block_s.unwrap_or(d.t_block),
            bandwidth: self.bandwidth_hz.unwrap_or(d.bandwidth),
            lambda,
            region_a: self
                .region_wavelengths
                .map_or(d.region_a / d.lambda * lambda, |n| wavelengths_to_m(n, lambda)),
            min_dist: self
                .min_dist_wavelengths
                .map_or(d.min_dist / d.lambda * lambda, |n| wavelengths_to_m(n, lambda)),
            m_antennas: self.m_antennas.unwrap_or(d.m_antennas),
            k_wds: k,
            paths_per_wd: self.paths_per_wd.unwrap_or(d.paths_per_wd),
            p_max: self.p_max_dbm.map_or(d.p_max, dbm_to_watt),
            noise: self.noise_dbm.map_or(d.noise, dbm_to_watt),
            kappa: self.kappa.unwrap_or(d.kappa),
            f_edge: self.f_edge_hz.unwrap_or(d.f_edge),
            phi: vec![self.phi_cycles_per_bit.unwrap_or(d.phi[0]); k],
            eh: vec![eh; k],
            c0: self.c0.unwrap_or((lambda / (4.0 * std::f64::consts::PI)).powi(2)),
            alpha: self.path_loss_exponent.unwrap_or(d.alpha),
            distance_range: [
                self.distance_min_m.unwrap_or(d.distance_range[0]),
                self.distance_max_m.unwrap_or(d.distance_range[1]),
            ],
        };
        params.validate()?;
        Ok(params)
    }
}

/// Swarm settings. Velocity bounds are symmetric, in wavelengths.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoSection {
    pub n_particles: Option<usize>,
    pub max_iters: Option<usize>,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub v_max_wavelengths: Option<f64>,
    pub nbh_growth: Option<usize>,
}

impl PsoSection {
    pub fn merge(&mut self, other: &PsoSection) {
        overlay!(
            self,
            other,
            n_particles,
            max_iters,
            omega_min,
            omega_max,
            c1,
            c2,
            v_max_wavelengths,
            nbh_growth
        );
    }

    pub fn resolve(&self, lambda: f64) -> Result<PsoConfig> {
        let mut c = PsoConfig::reference(lambda);
        if let Some(v) = self.n_particles {
            c.n_particles = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.omega_min {
            c.omega_min = v;
        }
        if let Some(v) = self.omega_max {
            c.omega_max = v;
        }
        if let Some(v) = self.c1 {
            c.c1 = v;
        }
        if let Some(v) = self.c2 {
            c.c2 = v;
        }
        if let Some(v) = self.v_max_wavelengths {
            c.v_max = wavelengths_to_m(v, lambda);
            c.v_min = -c.v_max;
        }
        if let Some(v) = self.nbh_growth {
            c.nbh_growth = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn is_empty(&self) -> bool {
        *self == PsoSection::default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub pso: PsoSection,
}

impl ConfigFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn merge(&mut self, other: &ConfigFile) {
        if other.seed.is_some() {
            self.seed = other.seed;
        }
        self.system.merge(&other.system);
        self.pso.merge(&other.pso);
    }

    pub fn params(&self) -> Result<SystemParams> {
        self.system.resolve()
    }

    /// `None` when no swarm key is set, so schemes use the reference swarm.
    pub fn pso_config(&self, lambda: f64) -> Result<Option<PsoConfig>> {
        if self.pso.is_empty() {
            return Ok(None);
        }
        self.pso.resolve(lambda).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = ConfigFile::from_toml_str("").unwrap();
        assert_eq!(c.params().unwrap(), SystemParams::default());
        assert!(c.pso_config(0.1).unwrap().is_none());
    }

    #[test]
    fn dbm_and_wavelength_fields() {
        let c = ConfigFile::from_toml_str(
            "seed = 3\n[system]\np_max_dbm = 40.0\nnoise_dbm = -80.0\nlambda_m = 0.05\nregion_wavelengths = 4.0\nk_wds = 2\n",
        )
        .unwrap();
        let p = c.params().unwrap();
        assert_eq!(c.seed, Some(3));
        assert!((p.p_max - 10.0).abs() < 1e-12);
        assert!((p.noise - 1e-11).abs() < 1e-24);
        assert!((p.region_a - 0.2).abs() < 1e-15);
        assert!((p.min_dist - 0.025).abs() < 1e-15);
        assert_eq!(p.phi.len(), 2);
        assert!((p.c0 - (0.05 / (4.0 * std::f64::consts::PI)).powi(2)).abs() < 1e-18);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(ConfigFile::from_toml_str("[system]\nfoo = 1\n").is_err());
        let c = ConfigFile::from_toml_str("[system]\nbandwidth_hz = -1.0\n").unwrap();
        assert!(c.params().is_err());
        let c = ConfigFile::from_toml_str("[pso]\nn_particles = 0\n").unwrap();
        assert!(c.pso_config(0.1).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut base = ConfigFile::from_toml_str("seed = 1\n[system]\nm_antennas = 4\nk_wds = 3\n").unwrap();
        let over = ConfigFile::from_toml_str("[system]\nm_antennas = 6\n[pso]\nmax_iters = 20\n").unwrap();
        base.merge(&over);
        let p = base.params().unwrap();
        assert_eq!((p.m_antennas, p.k_wds), (6, 3));
        assert_eq!(base.seed, Some(1));
        let pso = base.pso_config(p.lambda).unwrap().unwrap();
        assert_eq!(pso.max_iters, 20);
        assert_eq!(pso.n_particles, 50);
    }
}
