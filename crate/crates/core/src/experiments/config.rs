use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{invalid, Error, Result};
use crate::params::Params;
use crate::psi::PsiDescriptor;

/// `count` probes `1 + 1/128 + i/count`, `i < count`, in `[1, 2)`.
pub fn equispaced_probes(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| 1.0 + 1.0 / 128.0 + i as f64 / count as f64)
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    /// Extra halvings of the box-local grid spacing `2^{-(l+3)}`.
    #[serde(default)]
    pub refine: u32,
    /// Deepest dyadic `t`-level; defaults to `max(J) + 3`.
    #[serde(default)]
    pub j_max: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSettings {
    #[serde(default = "LemmaSettings::default_m")]
    pub m_values: Vec<f64>,
    #[serde(default = "LemmaSettings::default_n_max")]
    pub n_max: u64,
    /// `n` of the tail test `(P_2n - P_n) / P_2n`.
    #[serde(default = "LemmaSettings::default_tail_n")]
    pub tail_n: u64,
    #[serde(default = "LemmaSettings::default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "LemmaSettings::default_thresholds")]
    pub thresholds: Vec<f64>,
}

impl LemmaSettings {
    fn default_m() -> Vec<f64> {
        vec![0.5, 1.0, 1.5, 2.0, 3.0]
    }
    fn default_n_max() -> u64 {
        1_000_000
    }
    fn default_tail_n() -> u64 {
        100_000
    }
    fn default_tail_tol() -> f64 {
        1e-3
    }
    fn default_thresholds() -> Vec<f64> {
        vec![5.0, 10.0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() || self.m_values.iter().any(|m| !m.is_finite()) {
            return invalid("lemma_le.m_values must be a nonempty list of finite exponents");
        }
        if self.tail_n == 0 || 2 * self.tail_n > self.n_max {
            return invalid(format!(
                "lemma_le.tail_n must satisfy 1 <= 2 tail_n <= n_max, got tail_n={} n_max={}",
                self.tail_n, self.n_max
            ));
        }
        Ok(())
    }
}

impl Default for LemmaSettings {
    fn default() -> Self {
        Self {
            m_values: Self::default_m(),
            n_max: Self::default_n_max(),
            tail_n: Self::default_tail_n(),
            tail_tol: Self::default_tail_tol(),
            thresholds: Self::default_thresholds(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// The minimum exact diagnostic at the deepest depth must exceed this.
    #[serde(default = "Thresholds::default_divergence")]
    pub divergence: f64,
    /// Largest relative increase of the 2-D norm over the last depth step.
    #[serde(default = "Thresholds::default_saturation")]
    pub saturation: f64,
    /// Largest relative change of the mixed norm over the last depth step.
    #[serde(default = "Thresholds::default_cauchy")]
    pub cauchy: f64,
    /// Largest relative increase of the control's forced bound.
    #[serde(default = "Thresholds::default_plateau")]
    pub plateau: f64,
}

impl Thresholds {
    fn default_divergence() -> f64 {
        2.5
    }
    fn default_saturation() -> f64 {
        0.1
    }
    fn default_cauchy() -> f64 {
        0.05
    }
    fn default_plateau() -> f64 {
        0.05
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            divergence: Self::default_divergence(),
            saturation: Self::default_saturation(),
            cauchy: Self::default_cauchy(),
            plateau: Self::default_plateau(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(u64),
    Many(Vec<u64>),
}

fn exponent<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    match Raw::deserialize(de)? {
        Raw::Number(v) => Ok(v),
        Raw::Text(s) if matches!(s.as_str(), "inf" | "Inf" | "infinity" | "Infinity") => {
            Ok(f64::INFINITY)
        }
        Raw::Text(s) => Err(serde::de::Error::custom(format!(
            "expected a number or \"inf\", got {s:?}"
        ))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "N")]
    n: usize,
    d: usize,
    p: f64,
    #[serde(deserialize_with = "exponent")]
    q: f64,
    s: f64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "L", default)]
    l: Option<f64>,
    #[serde(default)]
    psi: Option<PsiDescriptor>,
    #[serde(rename = "J", default)]
    j: Option<OneOrMany>,
    #[serde(rename = "J_diag", default)]
    j_diag: Option<Vec<u64>>,
    #[serde(default)]
    grid: GridSettings,
    #[serde(default)]
    probes: Option<usize>,
    #[serde(default)]
    x_samples: Option<Vec<f64>>,
    #[serde(default)]
    y_samples: Option<Vec<f64>>,
    #[serde(default)]
    lemma_le: LemmaSettings,
    #[serde(default)]
    control_psi: Option<PsiDescriptor>,
    #[serde(default)]
    thresholds: Thresholds,
    #[serde(default = "default_true")]
    emit_svg: bool,
    #[serde(default)]
    output: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub params: Params,
    pub psi: PsiDescriptor,
    /// A `Psi` satisfying the summability condition, run for contrast.
    pub control_psi: PsiDescriptor,
    /// Depths of the grid tier.
    pub j_list: Vec<u64>,
    /// Depths of the exact tier.
    pub j_diag: Vec<u64>,
    /// Probes of the sequence experiment.
    pub x_samples: Vec<f64>,
    /// Probes of the partial maps.
    pub y_samples: Vec<f64>,
    pub grid: GridSettings,
    pub lemma: LemmaSettings,
    pub thresholds: Thresholds,
    pub emit_svg: bool,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// `N=2, d=1, p=1, q=2, s=1.5, M=2, L=0.25`, `Psi == 1`.
    pub fn flagship() -> Self {
        Self {
            params: Params::new(2, 1, 1.0, 2.0, 1.5, 2, Some(0.25)),
            psi: PsiDescriptor::constant(1.0),
            control_psi: PsiDescriptor::log_power(1.0),
            j_list: vec![6, 8, 10],
            j_diag: vec![64, 512, 4096],
            x_samples: equispaced_probes(64),
            y_samples: equispaced_probes(16),
            grid: GridSettings::default(),
            lemma: LemmaSettings::default(),
            thresholds: Thresholds::default(),
            emit_svg: true,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let params = Params::new(raw.n, raw.d, raw.p, raw.q, raw.s, raw.m, raw.l);
        let flagship = Self::flagship();
        let j_list = match raw.j {
            None => flagship.j_list,
            Some(OneOrMany::One(j)) => vec![j],
            Some(OneOrMany::Many(v)) => v,
        };
        let x_samples = raw
            .x_samples
            .unwrap_or_else(|| equispaced_probes(raw.probes.unwrap_or(64)));
        let config = Self {
            params,
            psi: raw.psi.unwrap_or(flagship.psi),
            control_psi: raw.control_psi.unwrap_or(flagship.control_psi),
            j_list,
            j_diag: raw.j_diag.unwrap_or(flagship.j_diag),
            x_samples,
            y_samples: raw.y_samples.unwrap_or(flagship.y_samples),
            grid: raw.grid,
            lemma: raw.lemma_le,
            thresholds: raw.thresholds,
            emit_svg: raw.emit_svg,
            output: raw.output,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input {
            path: path.to_owned(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// Parameter violations first, then the configuration's own invariants.
    pub fn validate(&self) -> Result<()> {
        let violations = self.params.validate();
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        if self.params.p().is_infinite() {
            return invalid("p = inf is not supported by the experiments");
        }
        self.psi.validate()?;
        self.control_psi.validate()?;
        for (name, list) in [("J", &self.j_list), ("J_diag", &self.j_diag)] {
            if list.is_empty() || list.windows(2).any(|w| w[0] >= w[1]) {
                return invalid(format!(
                    "{name} must be a nonempty strictly increasing list, got {list:?}"
                ));
            }
            if list[0] < 1 {
                return invalid(format!("{name} depths must be >= 1"));
            }
        }
        for (name, probes) in [
            ("x_samples", &self.x_samples),
            ("y_samples", &self.y_samples),
        ] {
            if let Some(bad) = probes.iter().find(|y| !(1.0..2.0).contains(*y)) {
                return invalid(format!("{name} must lie in [1, 2), got {bad}"));
            }
        }
        self.lemma.validate()
    }

    /// `grid.j_max`, or `max(J) + 3`.
    pub fn norm_j_max(&self) -> u32 {
        self.grid
            .j_max
            .unwrap_or_else(|| *self.j_list.last().expect("validated") as u32 + 3)
    }
}
