//! Collection metrics over joint embeddings.
//!
//! * `clip_s(x, l) = max_i v(x_i) . g(l)`: best view-to-text similarity.
//! * `clip_d(X) = -2 / (N (N - 1)) * sum_{i<j} m(x_i) . m(x_j)`, where `m`
//!   is the spherical mean of an asset's view embeddings. Higher is more
//!   diverse.
//! * `clip_ds(X, L) = clip_d(X) + mean over (x, l) of clip_s(x, l)`.
//!
//! All sums go through [`stable_sum`], so results are bit-identical under
//! any reordering of the assets, views or utterances.

mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, spherical_mean, Embedder, EmbeddingError, UnitVector};
use crate::numeric::stable_sum;
use crate::retrieval::{top_k, AssetIndex, RankedCandidate, RetrievalError, RetrievalParams};
use crate::shoplist::{QueryString, SceneDescription};

pub use report::{AssetScore, ClassificationReport, CollectionMetrics, MetricsReport, Prediction, ReportFormat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("diversity needs at least 2 assets, got {n}")]
    TooFewAssets { n: usize },
    #[error("asset {asset_id:?} has no views")]
    NoViews { asset_id: String },
    #[error("no utterances given")]
    NoUtterances,
    #[error("no candidate scenes given")]
    NoScenes,
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("score lists differ in length: {orig} vs {new}")]
    LengthMismatch { orig: usize, new: usize },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// The rendered views of one asset, as embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetViews {
    pub asset_id: String,
    pub view_embeddings: Vec<UnitVector>,
}

impl AssetViews {
    pub fn new(asset_id: impl Into<String>, view_embeddings: Vec<UnitVector>) -> Result<Self, MetricsError> {
        let asset_id = asset_id.into();
        if view_embeddings.is_empty() {
            return Err(MetricsError::NoViews { asset_id });
        }
        Ok(Self { asset_id, view_embeddings })
    }

    pub fn mean(&self) -> Result<UnitVector, MetricsError> {
        if self.view_embeddings.is_empty() {
            return Err(MetricsError::NoViews {
                asset_id: self.asset_id.clone(),
            });
        }
        Ok(spherical_mean(&self.view_embeddings)?)
    }
}

pub fn clip_s(views: &AssetViews, l: &UnitVector) -> Result<f64, MetricsError> {
    if views.view_embeddings.is_empty() {
        return Err(MetricsError::NoViews {
            asset_id: views.asset_id.clone(),
        });
    }
    let mut best = f64::NEG_INFINITY;
    for v in &views.view_embeddings {
        best = best.max(cosine(v, l)?);
    }
    Ok(best)
}

/// Sum of `m_i . m_j` over unordered pairs, from precomputed means.
fn pairwise_sum(means: &[UnitVector]) -> Result<f64, MetricsError> {
    let mut sims = Vec::with_capacity(means.len() * means.len().saturating_sub(1) / 2);
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            sims.push(cosine(&means[i], &means[j])?);
        }
    }
    Ok(stable_sum(sims))
}

pub fn clip_d(collection: &[AssetViews]) -> Result<f64, MetricsError> {
    let n = collection.len();
    if n < 2 {
        return Err(MetricsError::TooFewAssets { n });
    }
    let means = collection.iter().map(AssetViews::mean).collect::<Result<Vec<_>, _>>()?;
    let n = n as f64;
    Ok(-2.0 * pairwise_sum(&means)? / (n * (n - 1.0)))
}

/// Mean of `clip_s` over every (asset, utterance) pair.
pub fn mean_clip_s(collection: &[AssetViews], utterances: &[UnitVector]) -> Result<f64, MetricsError> {
    if collection.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if utterances.is_empty() {
        return Err(MetricsError::NoUtterances);
    }
    let mut scores = Vec::with_capacity(collection.len() * utterances.len());
    for asset in collection {
        for l in utterances {
            scores.push(clip_s(asset, l)?);
        }
    }
    Ok(stable_sum(scores.iter().copied()) / scores.len() as f64)
}

pub fn clip_ds(collection: &[AssetViews], utterances: &[UnitVector]) -> Result<f64, MetricsError> {
    Ok(clip_d(collection)? + mean_clip_s(collection, utterances)?)
}

/// Wording of the third augmentation template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationStyle {
    /// "a picture of an object form {S}", as originally published.
    #[default]
    Verbatim,
    /// "a picture of an object from {S}".
    Corrected,
}

pub const AUGMENTATION_COUNT: usize = 5;

/// The five utterances used to score a collection against its scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationSet {
    utterances: Vec<String>,
}

impl AugmentationSet {
    pub fn utterances(&self) -> &[String] {
        &self.utterances
    }

    pub fn embed(&self, embedder: &Embedder) -> Result<Vec<UnitVector>, EmbeddingError> {
        self.utterances.iter().map(|u| embedder.embed_text(u)).collect()
    }
}

pub fn augmentations(scene: &SceneDescription, style: AugmentationStyle) -> AugmentationSet {
    let s = scene.as_str();
    let third = match style {
        AugmentationStyle::Verbatim => format!("a picture of an object form {s}"),
        AugmentationStyle::Corrected => format!("a picture of an object from {s}"),
    };
    AugmentationSet {
        utterances: vec![
            format!("an element in a scene of {s}"),
            format!("an object from a scene of {s}"),
            third,
            format!("a rendering of an asset from a 3D scene of {s}"),
            s.to_string(),
        ],
    }
}

/// Mean `clip_s` of `views` against each scene's utterance embeddings.
pub fn scene_scores(views: &AssetViews, scenes: &[Vec<UnitVector>]) -> Result<Vec<f64>, MetricsError> {
    scenes
        .iter()
        .map(|utterances| {
            if utterances.is_empty() {
                return Err(MetricsError::NoUtterances);
            }
            let s = utterances.iter().map(|l| clip_s(views, l)).collect::<Result<Vec<_>, _>>()?;
            Ok(stable_sum(s.iter().copied()) / s.len() as f64)
        })
        .collect()
}

/// Index of the scene with the highest mean `clip_s`; ties go to the
/// earlier scene.
pub fn classify(views: &AssetViews, scenes: &[Vec<UnitVector>]) -> Result<usize, MetricsError> {
    if scenes.is_empty() {
        return Err(MetricsError::NoScenes);
    }
    let scores = scene_scores(views, scenes)?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Embeds each scene's augmentation set.
pub fn embed_scene_augmentations(
    scenes: &[SceneDescription],
    embedder: &Embedder,
    style: AugmentationStyle,
) -> Result<Vec<Vec<UnitVector>>, EmbeddingError> {
    scenes.iter().map(|s| augmentations(s, style).embed(embedder)).collect()
}

/// Zero-shot scene classification of one asset.
pub fn classify_asset<'a>(
    views: &AssetViews,
    scenes: &'a [SceneDescription],
    embedder: &Embedder,
    style: AugmentationStyle,
) -> Result<&'a SceneDescription, MetricsError> {
    let embedded = embed_scene_augmentations(scenes, embedder, style)?;
    Ok(&scenes[classify(views, &embedded)?])
}

/// Fraction of assets whose predicted scene index equals the label.
pub fn classification_accuracy(labeled: &[(AssetViews, usize)], scenes: &[Vec<UnitVector>]) -> Result<f64, MetricsError> {
    if labeled.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut correct = 0usize;
    for (views, truth) in labeled {
        if classify(views, scenes)? == *truth {
            correct += 1;
        }
    }
    Ok(correct as f64 / labeled.len() as f64)
}

/// The no-upsampling comparison: the top `k` assets for the bare scene.
pub fn baseline_select(
    index: &AssetIndex,
    embedder: &Embedder,
    scene: &SceneDescription,
    k: usize,
    w: f64,
) -> Result<Vec<RankedCandidate>, RetrievalError> {
    top_k(index, embedder, &QueryString::bare(scene), RetrievalParams { k, w })
}

/// Effect of retexturing on per-asset `clip_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetextureReport {
    pub mean_orig: f64,
    pub mean_new: f64,
    /// Percentage of assets whose score strictly increased.
    pub pct_improved: f64,
}

pub fn retexture_report(orig_s: &[f64], new_s: &[f64]) -> Result<RetextureReport, MetricsError> {
    if orig_s.len() != new_s.len() {
        return Err(MetricsError::LengthMismatch {
            orig: orig_s.len(),
            new: new_s.len(),
        });
    }
    if orig_s.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = orig_s.len() as f64;
    let improved = orig_s.iter().zip(new_s).filter(|(o, n)| n > o).count();
    Ok(RetextureReport {
        mean_orig: stable_sum(orig_s.iter().copied()) / n,
        mean_new: stable_sum(new_s.iter().copied()) / n,
        pct_improved: 100.0 * improved as f64 / n,
    })
}
