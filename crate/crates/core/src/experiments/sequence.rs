use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::Row;
use crate::error::{invalid, Result};
use crate::params::Params;
use crate::psi::{classify_condition, Classification, PsiDescriptor};
use crate::sequences::{build_rearranged, build_s, BlockSequence};

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceReport {
    pub rows: Vec<Row>,
    pub classification: Classification,
    pub control_classification: Classification,
}

impl Default for SequenceReport {
    fn default() -> Self {
        Self {
            rows: Vec::new(),
            classification: Classification::Inconclusive,
            control_classification: Classification::Inconclusive,
        }
    }
}

/// Exact-tier rows of `blocks` at each depth: `mixed_norm`, `window_mass`,
/// `forced_bound` (`S_J^{L/p}`), and per probe `coverage_count` and
/// `sup_diagnostic`.
pub fn sequence_rows(
    tier: &str,
    blocks: &BlockSequence,
    desc: &PsiDescriptor,
    params: &Params,
    depths: &[u64],
    probes: &[f64],
) -> Result<Vec<Row>> {
    let deepest = *depths.iter().max().unwrap_or(&0);
    if deepest > blocks.depth() {
        return invalid(format!(
            "depth {deepest} exceeds the sequence depth {}",
            blocks.depth()
        ));
    }
    let (p, q, l) = (params.p(), params.q(), params.l());
    let s = build_s(desc, params.kappa(), deepest);
    let prefix = blocks.truncated(deepest);
    let per_probe: Vec<(Vec<f64>, Vec<u64>)> = probes
        .par_iter()
        .map(|&x| {
            Ok((
                prefix.sup_diagnostic_profile(desc, p, x)?,
                blocks.covered_levels(x, deepest)?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &depth in depths {
        rows.push(Row::new(
            tier,
            depth,
            None,
            "mixed_norm",
            blocks.mixed_norm(p, q, depth),
        ));
        rows.push(Row::new(
            tier,
            depth,
            None,
            "window_mass",
            blocks.truncated(depth).window_mass(),
        ));
        let forced = s.get(depth as usize - 1).map_or(0.0, |v| v.powf(l / p));
        rows.push(Row::new(tier, depth, None, "forced_bound", forced));
        for (&x, (profile, covered)) in probes.iter().zip(&per_probe) {
            let count = covered.iter().filter(|&&j| j <= depth).count();
            rows.push(Row::new(
                tier,
                depth,
                Some(x),
                "coverage_count",
                count as f64,
            ));
            rows.push(Row::new(
                tier,
                depth,
                Some(x),
                "sup_diagnostic",
                profile[depth as usize],
            ));
        }
    }
    Ok(rows)
}

/// The deep exact tier for `psi` and for the control `Psi`.
pub fn run_sequence_experiment(config: &ExperimentConfig) -> Result<SequenceReport> {
    config.validate()?;
    let params = &config.params;
    let depth = *config.j_diag.last().expect("validated");
    let blocks = build_rearranged(&config.psi, params, depth)?;
    let mut rows = sequence_rows(
        "exact",
        &blocks,
        &config.psi,
        params,
        &config.j_diag,
        &config.x_samples,
    )?;
    let control = build_rearranged(&config.control_psi, params, depth)?;
    rows.extend(sequence_rows(
        "control",
        &control,
        &config.control_psi,
        params,
        &config.j_diag,
        &config.x_samples,
    )?);
    Ok(SequenceReport {
        rows,
        classification: classify_condition(&config.psi, params.kappa()),
        control_classification: classify_condition(&config.control_psi, params.kappa()),
    })
}
