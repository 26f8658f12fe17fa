use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{clip_d, clip_s, AssetViews, MetricsError, RetextureReport};
use crate::embedding::UnitVector;
use crate::numeric::stable_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetScore {
    pub asset_id: String,
    /// Mean `clip_s` over the augmentation utterances.
    pub clip_s: f64,
}

/// Scores for one asset collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionMetrics {
    pub label: String,
    pub scene: String,
    pub n_assets: usize,
    /// Absent for collections of fewer than two assets.
    pub clip_d: Option<f64>,
    pub mean_clip_s: f64,
    pub clip_ds: Option<f64>,
    pub per_asset: Vec<AssetScore>,
}

impl CollectionMetrics {
    pub fn compute(
        label: impl Into<String>,
        scene: impl Into<String>,
        collection: &[AssetViews],
        utterances: &[UnitVector],
    ) -> Result<Self, MetricsError> {
        if collection.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        if utterances.is_empty() {
            return Err(MetricsError::NoUtterances);
        }
        let mut all = Vec::with_capacity(collection.len() * utterances.len());
        let mut per_asset = Vec::with_capacity(collection.len());
        for asset in collection {
            let scores = utterances.iter().map(|l| clip_s(asset, l)).collect::<Result<Vec<_>, _>>()?;
            per_asset.push(AssetScore {
                asset_id: asset.asset_id.clone(),
                clip_s: stable_sum(scores.iter().copied()) / scores.len() as f64,
            });
            all.extend(scores);
        }
        let mean_clip_s = stable_sum(all.iter().copied()) / all.len() as f64;
        let clip_d = match clip_d(collection) {
            Ok(d) => Some(d),
            Err(MetricsError::TooFewAssets { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            label: label.into(),
            scene: scene.into(),
            n_assets: collection.len(),
            clip_d,
            mean_clip_s,
            clip_ds: clip_d.map(|d| d + mean_clip_s),
            per_asset,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub asset_id: String,
    pub true_scene: String,
    pub predicted_scene: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub predictions: Vec<Prediction>,
    pub accuracy: f64,
}

impl ClassificationReport {
    pub fn from_predictions(predictions: Vec<Prediction>) -> Self {
        let correct = predictions.iter().filter(|p| p.true_scene == p.predicted_scene).count();
        let accuracy = if predictions.is_empty() {
            0.0
        } else {
            correct as f64 / predictions.len() as f64
        };
        Self { predictions, accuracy }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub collections: Vec<CollectionMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retexture: Option<RetextureReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format {other:?} (text, json, csv)")),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl MetricsReport {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Text => self.to_table(),
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::from("label,scene,n_assets,clip_d,mean_clip_s,clip_ds\n");
        let quote = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.collections {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                quote(&c.label),
                quote(&c.scene),
                c.n_assets,
                num(c.clip_d),
                c.mean_clip_s,
                num(c.clip_ds)
            );
        }
        out
    }

    fn to_table(&self) -> String {
        let width = self.collections.iter().map(|c| c.label.chars().count()).max().unwrap_or(0).max(10);
        let mut out = format!("{:<width$}  {:>4}  {:>8}  {:>8}  {:>8}\n", "collection", "N", "CLIP-D", "CLIP-S", "CLIP-D/S");
        for c in &self.collections {
            let _ = writeln!(
                out,
                "{:<width$}  {:>4}  {:>8}  {:>8}  {:>8}",
                c.label,
                c.n_assets,
                cell(c.clip_d),
                cell(Some(c.mean_clip_s)),
                cell(c.clip_ds)
            );
        }
        if let Some(cls) = &self.classification {
            let _ = writeln!(out, "\nscene classification accuracy: {:.2}% ({} assets)", 100.0 * cls.accuracy, cls.predictions.len());
        }
        if let Some(r) = &self.retexture {
            let _ = writeln!(
                out,
                "\nretexture: orig CLIP-S {:.2}  new CLIP-S {:.2}  improved {:.2}%",
                r.mean_orig, r.mean_new, r.pct_improved
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uv(c: &[f64]) -> UnitVector {
        UnitVector::normalize(c.to_vec()).unwrap()
    }

    #[test]
    fn collection_metrics_decompose() {
        let coll = [
            AssetViews::new("a", vec![uv(&[1.0, 0.0])]).unwrap(),
            AssetViews::new("b", vec![uv(&[0.0, 1.0])]).unwrap(),
        ];
        let m = CollectionMetrics::compute("ours", "s", &coll, &[uv(&[1.0, 1.0])]).unwrap();
        assert_eq!(m.clip_d, Some(0.0));
        assert_eq!(m.clip_ds, Some(m.clip_d.unwrap() + m.mean_clip_s));
        assert_eq!(m.per_asset.len(), 2);
        let single = CollectionMetrics::compute("one", "s", &coll[..1], &[uv(&[1.0, 0.0])]).unwrap();
        assert_eq!(single.clip_d, None);
        assert_eq!(single.mean_clip_s, 1.0);
    }

    #[test]
    fn renders_all_formats() {
        let report = MetricsReport {
            collections: vec![CollectionMetrics {
                label: "poseidon".into(),
                scene: "Poseidon's living room".into(),
                n_assets: 2,
                clip_d: Some(-0.5),
                mean_clip_s: 0.25,
                clip_ds: Some(-0.25),
                per_asset: vec![],
            }],
            classification: None,
            retexture: None,
        };
        let text = report.render(ReportFormat::Text);
        assert!(text.contains("CLIP-D/S"));
        assert!(text.contains("-0.5000"));
        let csv = report.render(ReportFormat::Csv);
        assert_eq!(csv.lines().nth(1).unwrap(), "\"poseidon\",\"Poseidon's living room\",2,-0.5,0.25,-0.25");
        let back: MetricsReport = serde_json::from_str(&report.render(ReportFormat::Json)).unwrap();
        assert_eq!(back, report);
        assert_eq!("csv".parse::<ReportFormat>(), Ok(ReportFormat::Csv));
    }
}
