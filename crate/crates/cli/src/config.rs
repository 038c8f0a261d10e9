//! Run configuration: TOML file plus flag overrides over documented
//! defaults. Precedence is flags > file > defaults; the fully resolved
//! config is echoed into every run directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use centerdepth_core::bev::GridSpec;
use centerdepth_core::crf::CrfConfig;
use centerdepth_core::metrics::DeltaRatio;
use centerdepth_core::scene::SceneConfig;

use crate::error::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeSection {
    /// Minimum heatmap score for a peak.
    pub score_threshold: f64,
    /// Odd non-maximum-suppression window in cells.
    pub window: u16,
    /// Region sizes from ground-truth boxes instead of the size map.
    pub use_gt_sizes: bool,
}

impl Default for DecodeSection {
    fn default() -> Self {
        Self {
            score_threshold: 0.5,
            window: 3,
            use_gt_sizes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineSection {
    /// Unary corruption: zero-mean Gaussian with std
    /// `unary_noise_coeff * depth` per pixel. 0 disables it.
    pub unary_noise_coeff: f64,
}

impl Default for RefineSection {
    fn default() -> Self {
        Self {
            unary_noise_coeff: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub threshold: f64,
    pub bin_edges: Vec<f64>,
    pub ratio: DeltaRatio,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            threshold: 1.10,
            bin_edges: vec![0.0, 50.0, 100.0, 150.0, 200.0],
            ratio: DeltaRatio::Symmetric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSection {
    pub resolution: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub inflation_m: f64,
    /// Ego start and goal in ground coordinates (x lateral, z forward).
    pub start_xz: [f64; 2],
    pub goal_xz: [f64; 2],
}

impl Default for PlanSection {
    fn default() -> Self {
        Self {
            resolution: 0.5,
            x_min: -30.0,
            x_max: 30.0,
            z_min: 0.0,
            z_max: 60.0,
            inflation_m: 0.5,
            start_xz: [0.0, 0.25],
            goal_xz: [0.0, 59.75],
        }
    }
}

impl PlanSection {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            resolution: self.resolution,
            x_min: self.x_min,
            x_max: self.x_max,
            z_min: self.z_min,
            z_max: self.z_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; copied into the scene section at resolution time.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses all cores. `CENTERDEPTH_THREADS` caps it.
    pub threads: usize,
    /// Frames generated by `gen` / `demo`.
    pub frames: usize,
    pub scene: SceneConfig,
    pub crf: CrfConfig,
    pub decode: DecodeSection,
    pub refine: RefineSection,
    pub eval: EvalSection,
    pub plan: PlanSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs"),
            threads: 0,
            frames: 8,
            scene: SceneConfig::default(),
            crf: CrfConfig::default(),
            decode: DecodeSection::default(),
            refine: RefineSection::default(),
            eval: EvalSection::default(),
            plan: PlanSection::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |s: &str| Err(PipelineError::ValidationFailure(s.to_string()));
        if self.frames == 0 {
            return fail("frames >= 1");
        }
        self.scene
            .validate()
            .map_err(|e| PipelineError::ValidationFailure(e.to_string()))?;
        self.crf
            .validate()
            .map_err(|e| PipelineError::ValidationFailure(e.to_string()))?;
        if self.decode.window < 3 || self.decode.window % 2 == 0 {
            return fail("decode.window odd and >= 3");
        }
        if !(0.0..=1.0).contains(&self.decode.score_threshold) {
            return fail("decode.score_threshold in [0, 1]");
        }
        if self.refine.unary_noise_coeff < 0.0 {
            return fail("refine.unary_noise_coeff >= 0");
        }
        if !(self.eval.threshold > 1.0) {
            return fail("eval.threshold > 1");
        }
        if self.eval.bin_edges.len() < 2
            || self.eval.bin_edges.windows(2).any(|w| w[0] >= w[1])
        {
            return fail("eval.bin_edges strictly increasing");
        }
        self.plan
            .grid_spec()
            .validate()
            .map_err(|e| PipelineError::ValidationFailure(e.to_string()))?;
        if self.plan.inflation_m < 0.0 {
            return fail("plan.inflation_m >= 0");
        }
        Ok(())
    }

    /// Scene config with the global seed applied.
    pub fn scene_resolved(&self) -> SceneConfig {
        SceneConfig {
            seed: self.seed,
            ..self.scene.clone()
        }
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses one `key=value` override into a single-entry nested table.
fn override_table(spec: &str) -> Result<toml::Table, PipelineError> {
    let (path, value) = spec
        .split_once('=')
        .ok_or_else(|| PipelineError::ValidationFailure(format!("override '{spec}' is not key=value")))?;
    // lean on the TOML parser for typing; fall back to a quoted string
    let doc = format!("v = {value}");
    let parsed: toml::Table = toml::from_str(&doc)
        .or_else(|_| toml::from_str(&format!("v = \"{value}\"")))
        .map_err(|e| PipelineError::ValidationFailure(format!("override '{spec}': {e}")))?;
    let mut v = parsed["v"].clone();
    for key in path.split('.').rev() {
        let mut t = toml::Table::new();
        t.insert(key.trim().to_string(), v);
        v = toml::Value::Table(t);
    }
    match v {
        toml::Value::Table(t) => Ok(t),
        _ => unreachable!("loop always wraps in a table"),
    }
}

/// Resolves the run configuration: documented defaults, then the file,
/// then `--override` flags in order, then `--seed` / `--out`.
pub fn parse_config(
    file: Option<&Path>,
    overrides: &[String],
    seed_flag: Option<u64>,
    out_flag: Option<&Path>,
) -> Result<RunConfig, PipelineError> {
    let mut table = toml::Table::try_from(RunConfig::default())
        .expect("defaults serialize to a table");
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|_| PipelineError::MissingInput(path.into()))?;
        let file_table: toml::Table =
            toml::from_str(&text).map_err(|e| PipelineError::MalformedConfig {
                path: path.into(),
                why: e.to_string(),
            })?;
        merge(&mut table, file_table);
    }
    for spec in overrides {
        merge(&mut table, override_table(spec)?);
    }
    let mut cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
        let msg = e.to_string();
        if msg.contains("unknown field") {
            PipelineError::UnknownField(msg)
        } else {
            PipelineError::MalformedConfig {
                path: file.map(PathBuf::from).unwrap_or_else(|| "<flags>".into()),
                why: msg,
            }
        }
    })?;
    if let Some(s) = seed_flag {
        cfg.seed = s;
    }
    if let Some(o) = out_flag {
        cfg.out_dir = o.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// TOML echo of the resolved config, written into each run directory.
pub fn echo(cfg: &RunConfig) -> String {
    toml::to_string_pretty(cfg).expect("config serializes")
}
