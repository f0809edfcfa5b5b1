use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::Row;
use crate::atoms::AtomicField;
use crate::error::{invalid, Result};
use crate::norms::{
    lp_quasinorm, modulus_profile, seminorm, seminorm_from_moduli, HSampling, SeminormSettings,
};
use crate::psi::PsiDescriptor;
use crate::sequences::build_rearranged;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathologyReport {
    pub rows: Vec<Row>,
}

/// Grid tier at the depths `J`: the 2-D classical norm of `f_J`, the exact
/// mixed norm, and the generalized `q = inf` seminorm of every partial map;
/// exact tier at `J_diag`: the diagnostic at every partial-map probe.
pub fn run_pathology(config: &ExperimentConfig) -> Result<PathologyReport> {
    config.validate()?;
    let params = &config.params;
    if params.n() != 2 || params.d() != 1 {
        return invalid(format!(
            "the pathology run needs N = 2, d = 1, got N = {}, d = {}",
            params.n(),
            params.d()
        ));
    }
    let (p, q, s, m) = (params.p(), params.q(), params.s(), params.m());
    let j_max = config.norm_j_max();
    let plane = SeminormSettings {
        s,
        p,
        q,
        m,
        j_max,
        sampling: HSampling::default_for(2),
    };
    let line = SeminormSettings {
        s,
        p,
        q: f64::INFINITY,
        m,
        j_max,
        sampling: HSampling::default_for(1),
    };
    plane.validate()?;

    let grid_depth = *config.j_list.last().expect("validated");
    let blocks = build_rearranged(&config.psi, params, grid_depth)?;
    let classical = PsiDescriptor::constant(1.0);
    let mut rows = Vec::new();
    for &depth in &config.j_list {
        let field = AtomicField::new(params.clone(), blocks.truncated(depth))?;
        let domain = field.support_boxes(config.grid.refine);
        let moduli = modulus_profile(&field, m, p, &domain, j_max, &plane.sampling)?;
        let semi = seminorm_from_moduli(&moduli, &classical, s, q);
        let lp = lp_quasinorm(&field, p, &domain)?;
        rows.push(Row::new("grid", depth, None, "lp_norm_2d", lp));
        rows.push(Row::new("grid", depth, None, "seminorm_2d", semi));
        rows.push(Row::new("grid", depth, None, "besov_norm_2d", lp + semi));
        rows.push(Row::new(
            "exact",
            depth,
            None,
            "mixed_norm",
            blocks.mixed_norm(p, q, depth),
        ));
        let partial: Vec<f64> = config
            .y_samples
            .par_iter()
            .map(|&y| {
                let g = field.partial_map(y)?;
                Ok(seminorm(&g, &config.psi, &line, &g.support_boxes(config.grid.refine))?.value)
            })
            .collect::<Result<_>>()?;
        for (&y, v) in config.y_samples.iter().zip(partial) {
            rows.push(Row::new("grid", depth, Some(y), "partial_seminorm", v));
        }
    }

    let deep = *config.j_diag.last().expect("validated");
    let deep_blocks = build_rearranged(&config.psi, params, deep)?;
    let profiles: Vec<Vec<f64>> = config
        .y_samples
        .par_iter()
        .map(|&y| deep_blocks.sup_diagnostic_profile(&config.psi, p, y))
        .collect::<Result<_>>()?;
    for &depth in &config.j_diag {
        for (&y, profile) in config.y_samples.iter().zip(&profiles) {
            rows.push(Row::new(
                "exact",
                depth,
                Some(y),
                "sup_diagnostic",
                profile[depth as usize],
            ));
        }
    }
    Ok(PathologyReport { rows })
}
