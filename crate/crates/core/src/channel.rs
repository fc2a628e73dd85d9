//! Field-response channel model.
//!
//! Each wireless device (WD) reaches the access point over `L_k` far-field
//! paths. Moving an antenna only rotates the phase of every path, so the
//! channel seen by an antenna at `(x, y)` is the path gains weighted by the
//! conjugated field response at that point. Coordinates are in meters and the
//! reference point is the origin of the movable region.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar antenna coordinate `[x, y]` in meters.
pub type Point = [f64; 2];

/// Elevation and azimuth angles of departure of one propagation path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathAngles {
    theta: f64,
    phi: f64,
}

impl PathAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        let ok = |v: f64| (0.0..=PI).contains(&v);
        if !ok(theta) || !ok(phi) {
            return Err(Error::invalid(format!(
                "path angles must lie in [0, pi], got theta={theta}, phi={phi}"
            )));
        }
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Direction cosines `(sin θ cos φ, cos θ)` projected on the antenna plane.
    fn direction(&self) -> [f64; 2] {
        [self.theta.sin() * self.phi.cos(), self.theta.cos()]
    }
}

/// Path set between the access point and one WD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WdChannel {
    paths: Vec<PathAngles>,
    prv: Vec<Complex64>,
    distance_m: f64,
}

impl WdChannel {
    pub fn new(paths: Vec<PathAngles>, prv: Vec<Complex64>, distance_m: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("a WD channel needs at least one path"));
        }
        if paths.len() != prv.len() {
            return Err(Error::DimensionMismatch {
                expected: paths.len(),
                got: prv.len(),
            });
        }
        if !(distance_m > 0.0) {
            return Err(Error::invalid(format!("distance must be positive, got {distance_m}")));
        }
        Ok(Self { paths, prv, distance_m })
    }

    pub fn paths(&self) -> &[PathAngles] {
        &self.paths
    }

    /// Path response vector (complex path gains).
    pub fn prv(&self) -> &[Complex64] {
        &self.prv
    }

    pub fn distance_m(&self) -> f64 {
        self.distance_m
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Precomputes per-path wave vectors for repeated evaluation at many
    /// antenna positions.
    pub fn steering(&self, lambda: f64) -> Steering {
        let k = 2.0 * PI / lambda;
        Steering {
            wave: self
                .paths
                .iter()
                .map(|p| {
                    let [dx, dy] = p.direction();
                    [k * dx, k * dy]
                })
                .collect(),
            gains: self.prv.clone(),
        }
    }
}

/// Cached wave vectors and path gains of one WD channel.
#[derive(Clone, Debug)]
pub struct Steering {
    wave: Vec<[f64; 2]>,
    gains: Vec<Complex64>,
}

impl Steering {
    /// Channel coefficient of a single antenna at `pos`.
    pub fn coefficient(&self, pos: Point) -> Complex64 {
        self.wave
            .iter()
            .zip(&self.gains)
            .map(|(w, g)| {
                let phase = w[0] * pos[0] + w[1] * pos[1];
                // conj(e^{j phase}) * g
                let (s, c) = phase.sin_cos();
                Complex64::new(c, -s) * g
            })
            .sum()
    }

    pub fn response(&self, apv: &Apv) -> ChannelVector {
        ChannelVector(DVector::from_iterator(
            apv.len(),
            apv.positions().iter().map(|&p| self.coefficient(p)),
        ))
    }

    /// `‖h‖²` at the given flattened position vector.
    pub fn gain_flat(&self, flat: &[f64]) -> f64 {
        flat.chunks_exact(2)
            .map(|c| self.coefficient([c[0], c[1]]).norm_sqr())
            .sum()
    }
}

/// Antenna position vector: one planar coordinate per antenna.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Apv {
    positions: Vec<Point>,
}

impl Apv {
    pub fn new(positions: Vec<Point>) -> Self {
        Self { positions }
    }

    /// Rebuilds an APV from `[x1, y1, x2, y2, ...]`.
    pub fn from_flat(flat: &[f64]) -> Self {
        assert!(flat.len().is_multiple_of(2), "flattened APV must have even length");
        Self {
            positions: flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.positions.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Whether every coordinate lies in the square `[-A/2, A/2]²`.
    pub fn in_region(&self, region_a: f64) -> bool {
        let half = region_a / 2.0;
        self.positions
            .iter()
            .all(|p| p.iter().all(|c| (-half..=half).contains(c)))
    }

    /// Smallest pairwise antenna distance; infinite for fewer than two antennas.
    pub fn min_pairwise_distance(&self) -> f64 {
        min_pairwise_distance_flat(&self.flatten())
    }
}

pub(crate) fn min_pairwise_distance_flat(flat: &[f64]) -> f64 {
    let n = flat.len() / 2;
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = flat[2 * i] - flat[2 * j];
            let dy = flat[2 * i + 1] - flat[2 * j + 1];
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

/// Per-antenna complex channel `h = Fᴴ g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelVector(pub DVector<Complex64>);

impl ChannelVector {
    pub fn from_vec(v: Vec<Complex64>) -> Self {
        Self(DVector::from_vec(v))
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    /// Downlink (transmit-side) vector `conj(h)`: the access point radiates
    /// through `hᵀ`, so the received power is `conj(h)ᴴ Q conj(h)`.
    pub fn downlink(&self) -> DVector<Complex64> {
        self.0.map(|c| c.conj())
    }
}

/// Propagation distance difference of a path between `pos` and the origin.
pub fn propagation_difference(pos: Point, angles: &PathAngles) -> f64 {
    let [dx, dy] = angles.direction();
    pos[0] * dx + pos[1] * dy
}

/// Field response vector of one antenna position across all paths.
pub fn field_response_vector(pos: Point, paths: &[PathAngles], lambda: f64) -> DVector<Complex64> {
    let k = 2.0 * PI / lambda;
    DVector::from_iterator(
        paths.len(),
        paths
            .iter()
            .map(|a| Complex64::from_polar(1.0, k * propagation_difference(pos, a))),
    )
}

/// Channel response vector for all antennas of `apv`.
pub fn channel_response(apv: &Apv, ch: &WdChannel, lambda: f64) -> ChannelVector {
    let g = DVector::from_column_slice(ch.prv());
    ChannelVector(DVector::from_iterator(
        apv.len(),
        apv.positions()
            .iter()
            .map(|&p| field_response_vector(p, ch.paths(), lambda).dotc(&g)),
    ))
}

/// Draws a WD channel: angles uniform on `[0, π]²`, path gains
/// `CN(0, c0 · d^-alpha)`.
pub fn sample_wd_channel<R: Rng + ?Sized>(
    rng: &mut R,
    n_paths: usize,
    distance_m: f64,
    c0: f64,
    alpha: f64,
) -> Result<WdChannel> {
    if n_paths == 0 {
        return Err(Error::invalid("number of paths must be at least 1"));
    }
    if !(distance_m > 0.0) {
        return Err(Error::invalid(format!("distance must be positive, got {distance_m}")));
    }
    let variance = c0 * distance_m.powf(-alpha);
    let normal =
        Normal::new(0.0, (variance / 2.0).sqrt()).map_err(|e| Error::invalid(format!("path gain variance: {e}")))?;
    let mut paths = Vec::with_capacity(n_paths);
    let mut prv = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let theta = rng.gen_range(0.0..=PI);
        let phi = rng.gen_range(0.0..=PI);
        paths.push(PathAngles { theta, phi });
        prv.push(Complex64::new(normal.sample(rng), normal.sample(rng)));
    }
    WdChannel::new(paths, prv, distance_m)
}
