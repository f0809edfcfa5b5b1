//! End-to-end runs in two evidence tiers: exact sequence diagnostics at large
//! depth and grid norm estimates at small depth.
//!
//! Every verdict is a pure function of the recorded rows, see
//! [`report::recompute_verdicts`].

mod config;
mod lemma;
mod pathology;
pub mod report;
mod sequence;

pub use config::{equispaced_probes, ExperimentConfig, GridSettings, LemmaSettings, Thresholds};
pub use lemma::{run_lemma_le, Exceedance, LemmaReport, LemmaRow, LemmaVerdict};
pub use pathology::{run_pathology, PathologyReport};
pub use report::{
    emit_lemma_table, emit_report, load_report, read_verdicts, recompute_verdicts, ControlVerdicts,
    PathologyVerdicts, Verdicts,
};
pub use sequence::{run_sequence_experiment, sequence_rows, SequenceReport};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One long-format table row. `y` is empty for depth-level quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub tier: String,
    #[serde(rename = "J")]
    pub depth: u64,
    pub y: Option<f64>,
    pub quantity: String,
    pub value: f64,
}

impl Row {
    pub fn new(tier: &str, depth: u64, y: Option<f64>, quantity: &str, value: f64) -> Self {
        Self {
            tier: tier.into(),
            depth,
            y,
            quantity: quantity.into(),
            value,
        }
    }
}

/// Everything one flagship invocation produces.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub lemma: LemmaReport,
    pub sequence: SequenceReport,
    pub pathology: PathologyReport,
    pub verdicts: Verdicts,
}

impl ExperimentReport {
    pub fn empty(config: &ExperimentConfig) -> Self {
        let lemma = LemmaReport::default();
        let sequence = SequenceReport::default();
        let pathology = PathologyReport::default();
        let verdicts = Verdicts::from_rows(config, &lemma.rows, &sequence.rows, &pathology.rows);
        Self {
            lemma,
            sequence,
            pathology,
            verdicts,
        }
    }
}

/// Lemma suite, sequence experiment and pathology run.
pub fn run_all(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let lemma = run_lemma_le(&config.lemma, |_| 1.0)?;
    let sequence = run_sequence_experiment(config)?;
    let pathology = run_pathology(config)?;
    let verdicts = Verdicts::from_rows(config, &lemma.rows, &sequence.rows, &pathology.rows);
    Ok(ExperimentReport {
        lemma,
        sequence,
        pathology,
        verdicts,
    })
}

/// `(v_last - v_prev) / v_prev`, or 0 when both vanish.
pub(crate) fn relative_increase(prev: f64, last: f64) -> f64 {
    if prev == 0.0 && last == 0.0 {
        0.0
    } else {
        (last - prev) / prev.abs()
    }
}
