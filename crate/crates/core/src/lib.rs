//! Hand-geometry biometrics: silhouette normalization, landmark location,
//! 26 geometric features, template matching and evaluation protocols, plus a
//! synthetic hand generator with analytic ground truth.

pub mod error;
pub mod eval;
pub mod features;
pub mod imaging;
pub mod landmarks;
pub mod matching;
pub mod normalize;
pub mod pnm;
pub mod synth;

pub use error::{Error, Result};
pub use features::{extract_features, FeatureVector, FEATURE_COUNT};
pub use imaging::{BinaryImage, GrayImage, Point, PointF, RgbImage};
pub use landmarks::{extract_landmarks, Finger, LandmarkConfig, LandmarkSet};
pub use matching::{identify, verify, Decision, Distance, HandScope, MatchResult, TemplateDb, TemplateRow};
pub use normalize::{normalize, HandType, NormalizeConfig, NormalizedHand};

/// Normalizes a grayscale scan and extracts its feature vector.
pub fn process(image: &GrayImage, config: &NormalizeConfig) -> Result<(NormalizedHand, LandmarkSet, FeatureVector)> {
    let hand = normalize(image, config)?;
    let marks = extract_landmarks(&hand, &LandmarkConfig::default())?;
    let features = features::features_from_landmarks(&hand, &marks)?;
    Ok((hand, marks, features))
}
