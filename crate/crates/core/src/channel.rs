//! Far-field multipath channel between two movable-antenna regions.
//!
//! Lengths are in wavelengths throughout, so a phase is simply
//! `2π (x φ + y ϑ)` for a position `(x, y)` and virtual angles `(φ, ϑ)`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::grid::AngleGrid;

/// Antenna location inside a square region, in wavelength units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// True if inside the `region x region` square centred on the origin.
    pub fn in_region(&self, region: f64) -> bool {
        let half = region / 2.0 + 1e-12;
        self.x.abs() <= half && self.y.abs() <= half
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Virtual azimuth `cosθ sinφ` and virtual elevation `sinθ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualAngles {
    pub phi: f64,
    pub theta: f64,
}

impl VirtualAngles {
    pub fn new(phi: f64, theta: f64) -> Result<Self> {
        if !(phi.is_finite() && theta.is_finite()) || phi.abs() > 1.0 || theta.abs() > 1.0 {
            return invalid(format!("virtual angles ({phi}, {theta}) outside [-1, 1]^2"));
        }
        Ok(Self { phi, theta })
    }

    /// Converts physical elevation/azimuth (radians) to virtual angles.
    pub fn from_physical(elevation: f64, azimuth: f64) -> Self {
        Self { phi: (elevation.cos() * azimuth.sin()).clamp(-1.0, 1.0), theta: elevation.sin().clamp(-1.0, 1.0) }
    }

    /// Snaps both components to the nearest lattice value.
    pub fn quantized(&self, grid: &AngleGrid) -> Result<Self> {
        Ok(Self {
            phi: grid.value_unchecked(grid.quantize(self.phi)?),
            theta: grid.value_unchecked(grid.quantize(self.theta)?),
        })
    }
}

impl Serialize for VirtualAngles {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.phi, self.theta].serialize(s)
    }
}

impl<'de> Deserialize<'de> for VirtualAngles {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [phi, theta] = <[f64; 2]>::deserialize(d)?;
        VirtualAngles::new(phi, theta).map_err(serde::de::Error::custom)
    }
}

/// Serializes a complex number as `[re, im]`.
pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

/// One propagation path: departure angles, arrival angles and gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub aod: VirtualAngles,
    pub aoa: VirtualAngles,
    #[serde(with = "complex_pair")]
    pub coeff: Complex64,
}

/// `exp(j 2π (x φ + y ϑ))`.
#[inline]
pub fn field_response_phase(pos: Position, angles: VirtualAngles) -> Complex64 {
    Complex64::cis(2.0 * PI * (pos.x * angles.phi + pos.y * angles.theta))
}

/// Evaluates `Σ conj(f_l(r)) σ_l g_l(t)` over a set of paths.
pub fn response_of_paths(paths: &[PathComponent], t: Position, r: Position) -> Complex64 {
    paths.iter().map(|p| field_response_phase(r, p.aoa).conj() * p.coeff * field_response_phase(t, p.aod)).sum()
}

/// Anything that can report a channel response between two positions.
pub trait ChannelEvaluator {
    fn paths(&self) -> &[PathComponent];

    fn response(&self, t: Position, r: Position) -> Complex64 {
        response_of_paths(self.paths(), t, r)
    }
}

/// A set of true paths defining `h(t, r)` everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub seed: u64,
    pub paths: Vec<PathComponent>,
}

impl ChannelRealization {
    pub fn new(paths: Vec<PathComponent>, seed: u64) -> Result<Self> {
        if paths.is_empty() {
            return invalid("a channel needs at least one path");
        }
        if paths.iter().any(|p| !(p.coeff.re.is_finite() && p.coeff.im.is_finite())) {
            return invalid("path coefficients must be finite");
        }
        Ok(Self { seed, paths })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ch: Self = serde_json::from_str(s)?;
        Self::new(ch.paths, ch.seed)
    }

    /// `Σ |σ_l|^2`.
    pub fn energy(&self) -> f64 {
        self.paths.iter().map(|p| p.coeff.norm_sqr()).sum()
    }
}

impl ChannelEvaluator for ChannelRealization {
    fn paths(&self) -> &[PathComponent] {
        &self.paths
    }
}

pub fn channel_response(ch: &ChannelRealization, t: Position, r: Position) -> Complex64 {
    ch.response(t, r)
}

/// Transmit power and receiver noise power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub transmit_power: f64,
    pub noise_power: f64,
}

impl NoiseModel {
    pub fn new(transmit_power: f64, noise_power: f64) -> Result<Self> {
        if !(transmit_power > 0.0 && transmit_power.is_finite()) {
            return invalid(format!("transmit power must be positive, got {transmit_power}"));
        }
        if !(noise_power >= 0.0 && noise_power.is_finite()) {
            return invalid(format!("noise power must be non-negative, got {noise_power}"));
        }
        Ok(Self { transmit_power, noise_power })
    }

    /// Unit transmit power with noise set by `p_t / δ² = snr_db`.
    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        Self::new(1.0, 10f64.powf(-snr_db / 10.0))
    }

    pub fn noiseless(transmit_power: f64) -> Result<Self> {
        Self::new(transmit_power, 0.0)
    }

    /// `p_t / δ²`; infinite for a noiseless model.
    pub fn snr(&self) -> f64 {
        self.transmit_power / self.noise_power
    }

    /// Receive SNR `|h|^2 p_t / δ²` for a given channel gain.
    pub fn receive_snr(&self, h: Complex64) -> f64 {
        h.norm_sqr() * self.snr()
    }
}

/// Draws circularly-symmetric complex Gaussian noise of the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    Complex64::new(g1, g2) * (variance / 2.0).sqrt()
}

/// One pilot measurement `√p_t h(t, r) + z` with unit pilot.
pub fn measure<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    t: Position,
    r: Position,
    noise: &NoiseModel,
    rng: &mut R,
) -> Complex64 {
    let clean = ch.response(t, r) * noise.transmit_power.sqrt();
    if noise.noise_power == 0.0 {
        clean
    } else {
        clean + complex_gaussian(rng, noise.noise_power)
    }
}

/// Physical angles with density `cosθ / 2π` over the front half-space.
fn sample_direction<R: Rng + ?Sized>(rng: &mut R) -> VirtualAngles {
    let u: f64 = rng.random();
    let elevation = (2.0 * u - 1.0).asin();
    let azimuth = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
    VirtualAngles::from_physical(elevation, azimuth)
}

/// Geometry channel: `l` one-to-one paths, independent uniform half-space
/// departure and arrival directions, gains `CN(0, 1/L)`.
pub fn random_channel<R: Rng + ?Sized>(l: usize, seed: u64, rng: &mut R) -> Result<ChannelRealization> {
    if l < 1 {
        return invalid("number of paths must be >= 1");
    }
    let paths = (0..l)
        .map(|_| {
            let aod = sample_direction(rng);
            let aoa = sample_direction(rng);
            let coeff = complex_gaussian(rng, 1.0 / l as f64);
            PathComponent { aod, aoa, coeff }
        })
        .collect();
    ChannelRealization::new(paths, seed)
}

/// Like [`random_channel`] but with every angle snapped onto `grid`; paths
/// that would collide on the same atom are redrawn.
pub fn random_on_grid_channel<R: Rng + ?Sized>(
    l: usize,
    grid: &AngleGrid,
    seed: u64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if l < 1 {
        return invalid("number of paths must be >= 1");
    }
    if l > grid.atoms() {
        return invalid("more paths than grid atoms");
    }
    let mut paths: Vec<PathComponent> = Vec::with_capacity(l);
    while paths.len() < l {
        let aod = sample_direction(rng).quantized(grid)?;
        let aoa = sample_direction(rng).quantized(grid)?;
        let coeff = complex_gaussian(rng, 1.0 / l as f64);
        if paths.iter().any(|p| p.aod == aod && p.aoa == aoa) {
            continue;
        }
        paths.push(PathComponent { aod, aoa, coeff });
    }
    ChannelRealization::new(paths, seed)
}
