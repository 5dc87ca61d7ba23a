//! Synthetic labeled corpora: part-based objects rendered under controllable
//! viewpoint and scale distributions.

mod corpus;
mod render;

pub use corpus::{generate_corpus, CorpusConfig, DistributionEntry, ObjectEntry};
pub use render::render_view;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Cuboid,
    Ellipsoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub shape: Shape,
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub albedo: f64,
}

impl Part {
    pub fn cuboid(center: [f64; 3], half_extents: [f64; 3], albedo: f64) -> Self {
        Part {
            shape: Shape::Cuboid,
            center,
            half_extents,
            albedo,
        }
    }

    pub fn ellipsoid(center: [f64; 3], half_extents: [f64; 3], albedo: f64) -> Self {
        Part {
            shape: Shape::Ellipsoid,
            center,
            half_extents,
            albedo,
        }
    }
}

/// A class of synthetic object: a union of untextured parts in a y-up frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub parts: Vec<Part>,
}

impl ObjectSpec {
    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::Validation(format!("object `{}` has no parts", self.name)));
        }
        for (i, p) in self.parts.iter().enumerate() {
            if p.half_extents.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
                return Err(Error::Validation(format!(
                    "object `{}` part {i}: half extents must be positive",
                    self.name
                )));
            }
            if !(0.0..=1.0).contains(&p.albedo) {
                return Err(Error::Validation(format!(
                    "object `{}` part {i}: albedo {} outside [0, 1]",
                    self.name, p.albedo
                )));
            }
        }
        Ok(())
    }

    /// Multi-part vehicle: body, cabin and four wheels.
    pub fn car() -> Self {
        let mut parts = vec![
            Part::cuboid([0.0, 0.05, 0.0], [1.0, 0.28, 0.5], 0.85),
            Part::cuboid([-0.15, 0.55, 0.0], [0.5, 0.24, 0.44], 0.5),
        ];
        for x in [-0.62, 0.62] {
            for z in [-0.5, 0.5] {
                parts.push(Part::ellipsoid([x, -0.25, z], [0.24, 0.24, 0.1], 0.25));
            }
        }
        ObjectSpec {
            name: "car".into(),
            parts,
        }
    }

    /// Single near-spherical ellipsoid; looks alike from every direction.
    pub fn ball() -> Self {
        ObjectSpec {
            name: "ball".into(),
            parts: vec![Part::ellipsoid([0.0, 0.0, 0.0], [0.55, 0.5, 0.5], 0.9)],
        }
    }

    pub fn table() -> Self {
        let mut parts = vec![Part::cuboid([0.0, 0.45, 0.0], [0.8, 0.06, 0.5], 0.7)];
        for x in [-0.7, 0.7] {
            for z in [-0.4, 0.4] {
                parts.push(Part::cuboid([x, -0.05, z], [0.06, 0.45, 0.06], 0.45));
            }
        }
        ObjectSpec {
            name: "table".into(),
            parts,
        }
    }

    pub fn airplane() -> Self {
        ObjectSpec {
            name: "airplane".into(),
            parts: vec![
                Part::ellipsoid([0.0, 0.0, 0.0], [1.1, 0.18, 0.18], 0.8),
                Part::cuboid([0.1, 0.0, 0.0], [0.22, 0.03, 0.95], 0.6),
                Part::cuboid([-0.9, 0.05, 0.0], [0.1, 0.02, 0.35], 0.6),
                Part::cuboid([-0.92, 0.28, 0.0], [0.1, 0.22, 0.02], 0.4),
            ],
        }
    }

    pub fn bottle() -> Self {
        ObjectSpec {
            name: "bottle".into(),
            parts: vec![
                Part::ellipsoid([0.0, -0.2, 0.0], [0.3, 0.6, 0.3], 0.6),
                Part::cuboid([0.0, 0.55, 0.0], [0.09, 0.2, 0.09], 0.35),
            ],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "car" => Some(Self::car()),
            "ball" => Some(Self::ball()),
            "table" => Some(Self::table()),
            "airplane" => Some(Self::airplane()),
            "bottle" => Some(Self::bottle()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 5] = ["car", "ball", "table", "airplane", "bottle"];
}

/// Two-component view distribution: a von Mises "core" around the mean view
/// plus a uniform outlier component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDistribution {
    pub azimuth_mean: f64,
    pub elevation_mean: f64,
    /// von Mises concentration; 0 is uniform.
    pub concentration: f64,
    pub outlier_fraction: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl ViewDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = self.concentration >= 0.0
            && self.concentration.is_finite()
            && (0.0..=1.0).contains(&self.outlier_fraction)
            && self.scale_min > 0.0
            && self.scale_min <= self.scale_max
            && self.scale_max <= 1.0
            && self.azimuth_mean.is_finite()
            && self.elevation_mean.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid view distribution {self:?}")))
        }
    }

    /// Diffuse views with large objects and a uniform outlier tail.
    pub fn child_like() -> Self {
        ViewDistribution {
            azimuth_mean: 0.0,
            elevation_mean: 0.3,
            concentration: 4.0,
            outlier_fraction: 0.3,
            scale_min: 0.4,
            scale_max: 0.9,
        }
    }

    /// Concentrated views with small objects.
    pub fn parent_like() -> Self {
        ViewDistribution {
            azimuth_mean: 0.0,
            elevation_mean: 0.3,
            concentration: 30.0,
            outlier_fraction: 0.0,
            scale_min: 0.1,
            scale_max: 0.4,
        }
    }

    /// Near-constant end-on view (a quarter turn from the child core) at a
    /// fixed scale, used for test splits.
    pub fn canonical() -> Self {
        ViewDistribution {
            azimuth_mean: std::f64::consts::FRAC_PI_2,
            elevation_mean: 0.35,
            concentration: 400.0,
            outlier_fraction: 0.0,
            scale_min: 0.6,
            scale_max: 0.6,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "child" | "child_like" => Some(Self::child_like()),
            "parent" | "parent_like" => Some(Self::parent_like()),
            "canonical" => Some(Self::canonical()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub azimuth: f64,
    pub elevation: f64,
    pub scale: f64,
}

/// Draws a von Mises deviate centered at `mu` (Best & Fisher rejection sampler).
pub fn von_mises<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return mu + rng.random_range(-PI..PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return if u3 < 0.5 { mu - theta } else { mu + theta };
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Folds an (azimuth, elevation) pair so that elevation lies in [-π/2, π/2];
/// passing over a pole flips the azimuth by π.
fn fold_elevation(azimuth: f64, elevation: f64) -> (f64, f64) {
    let e = (elevation + PI).rem_euclid(TAU) - PI;
    if e > FRAC_PI_2 {
        (wrap_angle(azimuth + PI), PI - e)
    } else if e < -FRAC_PI_2 {
        (wrap_angle(azimuth + PI), -PI - e)
    } else {
        (wrap_angle(azimuth), e)
    }
}

/// Samples `count` viewpoints; draw `i` depends only on `(seed, i)`.
pub fn sample_viewpoints(dist: &ViewDistribution, count: usize, seed: u64) -> Vec<Viewpoint> {
    (0..count)
        .map(|i| {
            let mut r = rng::stream(seed, &[rng::TAG_VIEWS, i as u64]);
            let outlier = r.random::<f64>() < dist.outlier_fraction;
            let (azimuth, elevation) = if outlier {
                (r.random_range(0.0..TAU), r.random_range(-FRAC_PI_2..=FRAC_PI_2))
            } else {
                let a = von_mises(&mut r, dist.azimuth_mean, dist.concentration);
                let e = von_mises(&mut r, dist.elevation_mean, dist.concentration);
                fold_elevation(a, e)
            };
            let scale = if dist.scale_max > dist.scale_min {
                r.random_range(dist.scale_min..=dist.scale_max)
            } else {
                dist.scale_min
            };
            Viewpoint {
                azimuth,
                elevation,
                scale,
            }
        })
        .collect()
}
