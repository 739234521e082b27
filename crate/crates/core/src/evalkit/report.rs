use super::FoldSpec;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub held_out_subject: u32,
    pub frames: usize,
    pub detection_failures: usize,
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub mean_oks: f64,
    pub per_threshold: [f64; 10],
}

/// Mean and population standard deviation across folds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub ap: MeanStd,
    pub ap50: MeanStd,
    pub ap75: MeanStd,
    pub mean_oks: MeanStd,
    /// Table-style strings such as `0.861 ± 0.071`.
    pub formatted: std::collections::BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub folds: Vec<FoldMetrics>,
    pub fold_specs: Vec<FoldSpec>,
    pub summary: MetricsSummary,
}

impl MetricsReport {
    pub fn new(folds: Vec<FoldMetrics>, fold_specs: Vec<FoldSpec>) -> Self {
        let col = |f: fn(&FoldMetrics) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
        let (ap, ap50, ap75, mean_oks) = (col(|m| m.ap), col(|m| m.ap50), col(|m| m.ap75), col(|m| m.mean_oks));
        let formatted = [("AP", ap), ("AP50", ap50), ("AP75", ap75), ("OKS", mean_oks)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { folds, fold_specs, summary: MetricsSummary { ap, ap50, ap75, mean_oks, formatted } }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    /// Flat `fold,metric,value` rows; summary rows use folds `mean` and `std`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,metric,value\n");
        for m in &self.folds {
            let s = m.held_out_subject;
            for (k, v) in [("AP", m.ap), ("AP50", m.ap50), ("AP75", m.ap75), ("OKS", m.mean_oks)] {
                out += &format!("{s},{k},{v}\n");
            }
            out += &format!("{s},detection_failures,{}\n", m.detection_failures);
        }
        let s = &self.summary;
        for (k, v) in [("AP", s.ap), ("AP50", s.ap50), ("AP75", s.ap75), ("OKS", s.mean_oks)] {
            out += &format!("mean,{k},{}\nstd,{k},{}\n", v.mean, v.std);
        }
        out
    }
}
