use serde::{Deserialize, Serialize};

use crate::model::{Sign, Vec2};

/// Bumped whenever the family below changes, so stored distances stay comparable.
pub const FAMILY_VERSION: &str = "family-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// `exp(−|x−c|²/(2w²))`
    Gaussian { center: Vec2, width: f64 },
    /// `(1 − |x−c|²/a²)³` inside the disc of radius `a`, zero outside.
    Bump { center: Vec2, radius: f64 },
    /// `cos(kx)·cos(ky)`
    CosProduct { k: f64 },
    /// `sin(kx)`
    Sine { k: f64 },
}

impl Profile {
    pub fn value(&self, x: Vec2) -> f64 {
        match *self {
            Profile::Gaussian { center, width } => (-(x - center).norm_sq() / (2.0 * width * width)).exp(),
            Profile::Bump { center, radius } => {
                let s = (x - center).norm_sq() / (radius * radius);
                if s < 1.0 {
                    (1.0 - s).powi(3)
                } else {
                    0.0
                }
            }
            Profile::CosProduct { k } => (k * x.x).cos() * (k * x.y).cos(),
            Profile::Sine { k } => (k * x.x).sin(),
        }
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        match *self {
            Profile::Gaussian { center, width } => {
                let d = x - center;
                d * (-self.value(x) / (width * width))
            }
            Profile::Bump { center, radius } => {
                let d = x - center;
                let a2 = radius * radius;
                let s = d.norm_sq() / a2;
                if s < 1.0 {
                    d * (-6.0 * (1.0 - s).powi(2) / a2)
                } else {
                    Vec2::ZERO
                }
            }
            Profile::CosProduct { k } => {
                let (sx, cx) = (k * x.x).sin_cos();
                let (sy, cy) = (k * x.y).sin_cos();
                Vec2::new(-k * sx * cy, -k * cx * sy)
            }
            Profile::Sine { k } => Vec2::new(k * (k * x.x).cos(), 0.0),
        }
    }

    pub fn laplacian(&self, x: Vec2) -> f64 {
        match *self {
            Profile::Gaussian { center, width } => {
                let w2 = width * width;
                ((x - center).norm_sq() / (w2 * w2) - 2.0 / w2) * self.value(x)
            }
            Profile::Bump { center, radius } => {
                let a2 = radius * radius;
                let s = (x - center).norm_sq() / a2;
                if s < 1.0 {
                    (1.0 - s) * (36.0 * s - 12.0) / a2
                } else {
                    0.0
                }
            }
            Profile::CosProduct { k } => -2.0 * k * k * self.value(x),
            Profile::Sine { k } => -k * k * self.value(x),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        1.0
    }

    /// `sup |∇φ|`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Profile::Gaussian { width, .. } => (-0.5f64).exp() / width,
            Profile::Bump { radius, .. } => 96.0 / (25.0 * 5f64.sqrt() * radius),
            Profile::CosProduct { k } | Profile::Sine { k } => k.abs(),
        }
    }
}

/// `φ(x, b) = w_b · profile(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    pub profile: Profile,
    pub weight_plus: f64,
    pub weight_minus: f64,
}

impl TestFunction {
    pub fn new(id: &str, profile: Profile, weight_plus: f64, weight_minus: f64) -> Self {
        Self { id: id.to_string(), profile, weight_plus, weight_minus }
    }

    #[inline]
    pub fn weight(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Plus => self.weight_plus,
            Sign::Minus => self.weight_minus,
        }
    }

    pub fn value(&self, x: Vec2, sign: Sign) -> f64 {
        self.weight(sign) * self.profile.value(x)
    }

    pub fn gradient(&self, x: Vec2, sign: Sign) -> Vec2 {
        self.profile.gradient(x) * self.weight(sign)
    }

    pub fn laplacian(&self, x: Vec2, sign: Sign) -> f64 {
        self.weight(sign) * self.profile.laplacian(x)
    }

    /// Factor making `‖φ‖_∞ + Lip(φ) ≤ 1` on each species.
    pub fn bl_scale(&self) -> f64 {
        let w = self.weight_plus.abs().max(self.weight_minus.abs());
        1.0 / (w * (self.profile.sup_norm() + self.profile.lipschitz()))
    }
}

pub fn standard_family() -> Vec<TestFunction> {
    let c = Vec2::new;
    vec![
        TestFunction::new("g0", Profile::Gaussian { center: c(0.0, 0.0), width: 1.0 }, 1.0, 1.0),
        TestFunction::new("g1", Profile::Gaussian { center: c(0.5, 0.0), width: 0.75 }, 1.0, -1.0),
        TestFunction::new("g2", Profile::Gaussian { center: c(-0.5, 0.5), width: 0.75 }, 1.0, 0.0),
        TestFunction::new("g3", Profile::Gaussian { center: c(0.0, -0.5), width: 0.75 }, 0.0, 1.0),
        TestFunction::new("b0", Profile::Bump { center: c(0.0, 0.0), radius: 2.0 }, 1.0, 1.0),
        TestFunction::new("b1", Profile::Bump { center: c(0.75, 0.0), radius: 1.5 }, 1.0, -1.0),
        TestFunction::new("c0", Profile::CosProduct { k: 0.5 }, 1.0, -1.0),
        TestFunction::new("s0", Profile::Sine { k: 0.5 }, 1.0, 1.0),
    ]
}
