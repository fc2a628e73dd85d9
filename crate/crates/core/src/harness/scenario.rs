//! Random network realizations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_wd_channel, Steering, WdChannel};
use crate::error::Result;
use crate::rates::SystemParams;

/// One realization: system constants plus the channel of every WD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: SystemParams,
    pub wd_channels: Vec<WdChannel>,
    pub seed: u64,
}

impl Scenario {
    pub fn k(&self) -> usize {
        self.wd_channels.len()
    }

    pub fn steering(&self) -> Vec<Steering> {
        self.wd_channels
            .iter()
            .map(|c| c.steering(self.params.lambda))
            .collect()
    }
}

/// Draws WD distances uniformly from `params.distance_range` and samples
/// every channel from a single stream seeded by `seed`.
pub fn build_scenario(params: &SystemParams, seed: u64) -> Result<Scenario> {
    params.validate()?;
    let mut rng = super::seeds::scenario_rng(seed);
    let [lo, hi] = params.distance_range;
    let wd_channels = (0..params.k_wds)
        .map(|_| {
            let d = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            sample_wd_channel(&mut rng, params.paths_per_wd, d, params.c0, params.alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario {
        params: params.clone(),
        wd_channels,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_reproducibility() {
        let p = SystemParams::default();
        let a = build_scenario(&p, 11).unwrap();
        assert_eq!(a.k(), 6);
        assert!(a.wd_channels.iter().all(|c| c.n_paths() == 10));
        assert!(a.wd_channels.iter().all(|c| (7.0..=8.0).contains(&c.distance_m())));
        assert_eq!(a, build_scenario(&p, 11).unwrap());
        assert_ne!(a, build_scenario(&p, 12).unwrap());
    }
}
