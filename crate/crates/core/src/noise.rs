//! Seeded synthetic noise for grayscale images.
//!
//! Every injector works on `[0, 1]` pixels and clips its output back into
//! that range. Pixel draws come from [`PixelStreams`], so the noise at a pixel
//! depends only on the seed, the image index and the pixel's row-major
//! position in the full image.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::GrayImage;
use crate::rng::{PixelStreams, Seed};

/// Intensity levels per unit of pixel value for the photon-count model.
pub const PHOTON_LEVELS: f64 = 255.0;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("invalid {kind} parameter: {reason}")]
    InvalidParameter { kind: &'static str, reason: String },
}

fn invalid(kind: &'static str, reason: impl Into<String>) -> NoiseError {
    NoiseError::InvalidParameter {
        kind,
        reason: reason.into(),
    }
}

/// One noise family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian {
        mu: f64,
        sigma: f64,
    },
    SaltPepper {
        salt_prob: f64,
        pepper_prob: f64,
    },
    Poisson {
        scale: f64,
    },
    /// `scale` is the standard deviation of the multiplicative factor.
    Speckle {
        scale: f64,
    },
    /// `scale` is the half-width of the zero-mean additive range.
    Uniform {
        scale: f64,
    },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), NoiseError> {
        match *self {
            NoiseSpec::Gaussian { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(invalid("gaussian", "mu must be finite"));
                }
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(invalid("gaussian", "sigma must be >= 0"));
                }
            }
            NoiseSpec::SaltPepper {
                salt_prob,
                pepper_prob,
            } => {
                let unit = 0.0..=1.0;
                if !unit.contains(&salt_prob) || !unit.contains(&pepper_prob) {
                    return Err(invalid("salt_pepper", "probabilities must lie in [0, 1]"));
                }
                if salt_prob + pepper_prob > 1.0 {
                    return Err(invalid(
                        "salt_pepper",
                        "salt_prob + pepper_prob must be <= 1",
                    ));
                }
            }
            NoiseSpec::Poisson { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(invalid("poisson", "scale must be > 0"));
                }
            }
            NoiseSpec::Speckle { scale } => {
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(invalid("speckle", "scale must be >= 0"));
                }
            }
            NoiseSpec::Uniform { scale } => {
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(invalid("uniform", "scale must be >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            NoiseSpec::Gaussian { .. } => "gaussian",
            NoiseSpec::SaltPepper { .. } => "salt_pepper",
            NoiseSpec::Poisson { .. } => "poisson",
            NoiseSpec::Speckle { .. } => "speckle",
            NoiseSpec::Uniform { .. } => "uniform",
        }
    }

    /// Injects noise into image `image_index` of a batch seeded by `seed`.
    pub fn apply(&self, img: &GrayImage, seed: Seed, image_index: u64) -> GrayImage {
        let streams = PixelStreams::new(seed, image_index);
        self.apply_at(img, &streams, |i| i as u64)
    }

    /// Injects noise where pixel `i` of `img` draws from stream position
    /// `position(i)`; used to process crops consistently with the full image.
    pub fn apply_at(
        &self,
        img: &GrayImage,
        streams: &PixelStreams,
        position: impl Fn(usize) -> u64,
    ) -> GrayImage {
        debug_assert!(self.validate().is_ok(), "{self:?}");
        let draw = |i: usize, p: f64| -> f64 {
            let mut rng = streams.at(position(i));
            match *self {
                NoiseSpec::Gaussian { mu, sigma } => {
                    let normal = Normal::new(mu, sigma).expect("validated sigma");
                    p + normal.sample(&mut rng)
                }
                NoiseSpec::SaltPepper {
                    salt_prob,
                    pepper_prob,
                } => {
                    let u: f64 = rng.random();
                    if u < salt_prob {
                        1.0
                    } else if u < salt_prob + pepper_prob {
                        0.0
                    } else {
                        p
                    }
                }
                NoiseSpec::Poisson { scale } => {
                    let lambda = p * PHOTON_LEVELS * scale;
                    if lambda > 0.0 {
                        let count = Poisson::new(lambda)
                            .expect("positive rate")
                            .sample(&mut rng);
                        count / (PHOTON_LEVELS * scale)
                    } else {
                        0.0
                    }
                }
                NoiseSpec::Speckle { scale } => {
                    let normal = Normal::new(0.0, scale).expect("validated scale");
                    p * (1.0 + normal.sample(&mut rng))
                }
                NoiseSpec::Uniform { scale } => {
                    let u: f64 = rng.random();
                    p + scale * (2.0 * u - 1.0)
                }
            }
        };
        let pixels = img
            .pixels()
            .iter()
            .enumerate()
            .map(|(i, &p)| draw(i, p).clamp(0.0, 1.0))
            .collect();
        GrayImage::from_clamped(img.width(), img.height(), pixels)
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NoiseSpec::Gaussian { mu, sigma } => write!(f, "Gaussian mu={mu} sigma={sigma}"),
            NoiseSpec::SaltPepper {
                salt_prob,
                pepper_prob,
            } => write!(f, "Salt&Pepper salt={salt_prob} pepper={pepper_prob}"),
            NoiseSpec::Poisson { scale } => write!(f, "Poisson scale={scale}"),
            NoiseSpec::Speckle { scale } => write!(f, "Speckle scale={scale}"),
            NoiseSpec::Uniform { scale } => write!(f, "Uniform scale={scale}"),
        }
    }
}

/// `clip(img + N(mu, sigma^2), 0, 1)` per pixel.
pub fn inject_gaussian(img: &GrayImage, mu: f64, sigma: f64, seed: Seed, index: u64) -> GrayImage {
    NoiseSpec::Gaussian { mu, sigma }.apply(img, seed, index)
}

/// Sets a pixel to 1 with probability `salt_prob`, else to 0 with
/// probability `pepper_prob`, from a single uniform draw.
pub fn inject_salt_pepper(
    img: &GrayImage,
    salt_prob: f64,
    pepper_prob: f64,
    seed: Seed,
    index: u64,
) -> GrayImage {
    NoiseSpec::SaltPepper {
        salt_prob,
        pepper_prob,
    }
    .apply(img, seed, index)
}

/// Photon-count noise: `Poisson(p * 255 * scale) / (255 * scale)`.
/// Larger `scale` means more photons and less relative noise. There is no
/// parameter value that leaves the image unchanged.
pub fn inject_poisson(img: &GrayImage, scale: f64, seed: Seed, index: u64) -> GrayImage {
    NoiseSpec::Poisson { scale }.apply(img, seed, index)
}

/// `clip(img * (1 + N(0, scale^2)), 0, 1)` per pixel.
pub fn inject_speckle(img: &GrayImage, scale: f64, seed: Seed, index: u64) -> GrayImage {
    NoiseSpec::Speckle { scale }.apply(img, seed, index)
}

/// `clip(img + U[-scale, scale], 0, 1)` per pixel.
pub fn inject_uniform(img: &GrayImage, scale: f64, seed: Seed, index: u64) -> GrayImage {
    NoiseSpec::Uniform { scale }.apply(img, seed, index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> GrayImage {
        let pixels = (0..64).map(|i| i as f64 / 63.0).collect();
        GrayImage::new(8, 8, pixels).unwrap()
    }

    fn all_specs() -> Vec<NoiseSpec> {
        vec![
            NoiseSpec::Gaussian {
                mu: 0.1,
                sigma: 0.3,
            },
            NoiseSpec::SaltPepper {
                salt_prob: 0.2,
                pepper_prob: 0.2,
            },
            NoiseSpec::Poisson { scale: 0.5 },
            NoiseSpec::Speckle { scale: 0.5 },
            NoiseSpec::Uniform { scale: 0.5 },
        ]
    }

    #[test]
    fn zero_noise_is_identity() {
        let img = ramp();
        let s = Seed(9);
        assert_eq!(inject_gaussian(&img, 0.0, 0.0, s, 0), img);
        assert_eq!(inject_salt_pepper(&img, 0.0, 0.0, s, 0), img);
        assert_eq!(inject_speckle(&img, 0.0, s, 0), img);
        assert_eq!(inject_uniform(&img, 0.0, s, 0), img);
    }

    #[test]
    fn clipping_edge_cases() {
        let black = GrayImage::filled(16, 16, 0.0);
        let s = Seed(1);
        assert!(inject_gaussian(&black, -1.0, 0.001, s, 0)
            .pixels()
            .iter()
            .all(|&p| p == 0.0));
        assert!(inject_speckle(&black, 0.5, s, 0)
            .pixels()
            .iter()
            .all(|&p| p == 0.0));
        assert!(inject_poisson(&black, 2.0, s, 0)
            .pixels()
            .iter()
            .all(|&p| p == 0.0));
        let u = inject_uniform(&black, 0.1, s, 0);
        assert!(u.pixels().iter().all(|&p| (0.0..=0.1).contains(&p)));
        assert!(u.pixels().iter().any(|&p| p > 0.0));
        let white = inject_salt_pepper(&ramp(), 1.0, 0.0, s, 0);
        assert!(white.pixels().iter().all(|&p| p == 1.0));
        let black = inject_salt_pepper(&ramp(), 0.0, 1.0, s, 0);
        assert!(black.pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn deterministic_and_index_sensitive() {
        let img = GrayImage::filled(8, 8, 0.5);
        for spec in all_specs() {
            let a = spec.apply(&img, Seed(5), 3);
            assert_eq!(a, spec.apply(&img, Seed(5), 3), "{spec}");
            assert_ne!(a, spec.apply(&img, Seed(5), 4), "{spec}");
            assert_ne!(a, spec.apply(&img, Seed(6), 3), "{spec}");
            assert!(a.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn validation() {
        assert!(NoiseSpec::Poisson { scale: -1.0 }.validate().is_err());
        assert!(NoiseSpec::Poisson { scale: 0.0 }.validate().is_err());
        assert!(NoiseSpec::Gaussian {
            mu: 0.0,
            sigma: -0.1
        }
        .validate()
        .is_err());
        assert!(NoiseSpec::SaltPepper {
            salt_prob: 0.6,
            pepper_prob: 0.6
        }
        .validate()
        .is_err());
        assert!(NoiseSpec::SaltPepper {
            salt_prob: -0.1,
            pepper_prob: 0.0
        }
        .validate()
        .is_err());
        assert!(NoiseSpec::Speckle { scale: f64::NAN }.validate().is_err());
        assert!(NoiseSpec::Uniform { scale: -0.1 }.validate().is_err());
        for spec in all_specs() {
            spec.validate().unwrap();
        }
    }

    #[test]
    fn spec_json_shape() {
        let json = serde_json::to_string(&NoiseSpec::SaltPepper {
            salt_prob: 0.1,
            pepper_prob: 0.1,
        })
        .unwrap();
        assert_eq!(
            json,
            r#"{"kind":"salt_pepper","salt_prob":0.1,"pepper_prob":0.1}"#
        );
    }
}
