//! Evaluation reports: a JSON record plus a one-line human summary.

use std::path::Path;

use lomt_core::metrics::Report;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub bleu: f64,
    pub sentences: usize,
    pub mode: String,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub model: String,
}

impl ReportRecord {
    pub fn new(report: &Report, model_hash: &str) -> Self {
        ReportRecord {
            bleu: report.bleu,
            sentences: report.sentences,
            mode: report.mode.to_string(),
            lambda1: report.lambdas.map(|l| l.0),
            lambda2: report.lambdas.map(|l| l.1),
            model: model_hash.to_string(),
        }
    }

    pub fn summary(&self) -> String {
        let lambdas = match (self.lambda1, self.lambda2) {
            (Some(a), Some(b)) => format!(" lambda=({a:.3}, {b:.3})"),
            _ => String::new(),
        };
        format!("BLEU {:.2} on {} sentences, {} decoding{lambdas}, model {}", self.bleu, self.sentences, self.mode, short(&self.model))
    }
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

pub fn save(path: &Path, record: &ReportRecord) -> Result<()> {
    super::write_json(path, record)
}
