use std::fmt;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::mesh::Point;

pub type SpaceTimeFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;

/// Kind of observation point. Keys number the points within a kind, so the
/// same key under different kinds refers to unrelated points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Site {
    /// Quadrature points of `ω × I`, where `q`, `∂ₜq`, `r` and `∂ₜr` live.
    Window = 0,
    /// Quadrature points of `Ω` at `t₀`, where `p` lives.
    Trace = 1,
}

/// Largest quadrature point key accepted by [`Noise::multiplier`].
pub const MAX_KEY: u64 = (1 << 48) - 1;

/// Multiplicative noise `1 + δξ` with `ξ ~ N(0, 1)` drawn independently for
/// every observation point. All fields observed at one point share its
/// multiplier. Each point owns a ChaCha stream, so any single multiplier can
/// be regenerated without replaying the others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub delta: f64,
    pub seed: u64,
}

impl Noise {
    pub const NONE: Noise = Noise { delta: 0.0, seed: 0 };

    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(invalid(format!("noise level must be a finite nonnegative number, got {delta}")));
        }
        Ok(Self { delta, seed })
    }

    pub fn xi(&self, site: Site, key: u64) -> f64 {
        assert!(key <= MAX_KEY, "noise key {key} out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((site as u64) << 48) | key);
        rng.sample(StandardNormal)
    }

    pub fn multiplier(&self, site: Site, key: u64) -> f64 {
        if self.delta == 0.0 {
            1.0
        } else {
            1.0 + self.delta * self.xi(site, key)
        }
    }

    /// Applies the multiplier to an exact value.
    pub fn apply(&self, site: Site, key: u64, value: f64) -> f64 {
        if self.delta == 0.0 {
            value
        } else {
            value * self.multiplier(site, key)
        }
    }
}

/// Observations `q = u|ω×I`, `∂ₜq`, `p = Au(t₀)` and optionally the interior
/// gradient `r = ∇u|ω×I` with its time derivative. Callbacks return exact
/// values; noise is applied at quadrature points by [`Noise`].
#[derive(Clone)]
pub struct ObservationData {
    pub q: SpaceTimeFn,
    pub dtq: SpaceTimeFn,
    pub p: SpaceFn,
    pub r: Option<GradientFn>,
    pub dtr: Option<GradientFn>,
    pub noise: Noise,
}

impl fmt::Debug for ObservationData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObservationData")
            .field("has_gradient", &self.r.is_some())
            .field("noise", &self.noise)
            .finish_non_exhaustive()
    }
}

impl ObservationData {
    pub fn zero() -> Self {
        Self {
            q: Arc::new(|_, _| 0.0),
            dtq: Arc::new(|_, _| 0.0),
            p: Arc::new(|_| 0.0),
            r: Some(Arc::new(|_, _| [0.0; 2])),
            dtr: Some(Arc::new(|_, _| [0.0; 2])),
            noise: Noise::NONE,
        }
    }

    pub fn has_gradient(&self) -> bool {
        self.r.is_some() && self.dtr.is_some()
    }

    pub fn q_at(&self, x: Point, t: f64, key: u64) -> f64 {
        self.noise.apply(Site::Window, key, (self.q)(x, t))
    }

    pub fn dtq_at(&self, x: Point, t: f64, key: u64) -> f64 {
        self.noise.apply(Site::Window, key, (self.dtq)(x, t))
    }

    pub fn p_at(&self, x: Point, key: u64) -> f64 {
        self.noise.apply(Site::Trace, key, (self.p)(x))
    }

    /// Noisy gradient observation; zero when no gradient data is attached.
    pub fn r_at(&self, x: Point, t: f64, key: u64) -> [f64; 2] {
        let g = self.r.as_ref().map_or([0.0; 2], |r| r(x, t));
        let m = self.noise.multiplier(Site::Window, key);
        if self.noise.delta == 0.0 {
            g
        } else {
            [g[0] * m, g[1] * m]
        }
    }

    pub fn dtr_at(&self, x: Point, t: f64, key: u64) -> [f64; 2] {
        let g = self.dtr.as_ref().map_or([0.0; 2], |r| r(x, t));
        let m = self.noise.multiplier(Site::Window, key);
        if self.noise.delta == 0.0 {
            g
        } else {
            [g[0] * m, g[1] * m]
        }
    }
}

/// Returns `data` with the noise realization replaced.
pub fn inject_noise(data: &ObservationData, delta: f64, seed: u64) -> Result<ObservationData> {
    Ok(ObservationData { noise: Noise::new(delta, seed)?, ..data.clone() })
}
