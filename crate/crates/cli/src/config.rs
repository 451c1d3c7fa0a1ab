//! TOML run configuration. Every key is optional; missing keys take the
//! defaults below.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use wavefield::autodiff::GateMode;
use wavefield::train::EarlyStop;
use wavefield::{ModelKind, ModelSpec, TrainConfig};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scene: SceneSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub heatmap: HeatmapSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub num_paths: usize,
    pub extent_m: f64,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub density_locs_per_lambda2: f64,
    /// Overrides the density when set.
    pub train_count: Option<usize>,
    pub grid_spacing_lambda: f64,
    /// External `x_m,y_m,h_re,h_im` CSV to ingest instead of synthesizing.
    pub import_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    pub t1: Option<usize>,
    pub t2: Option<usize>,
    pub d: usize,
    pub gate: String,
    pub output_scale: bool,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub early_stop_patience: Option<usize>,
    pub early_stop_min_delta: f64,
    /// Print an epoch line to stderr every this many epochs (0 = never).
    pub log_every: usize,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lp_values: Vec<usize>,
    pub densities: Vec<f64>,
    pub n_seeds: usize,
    pub models: Vec<String>,
    pub extent_m: f64,
    pub baseline_t1: usize,
    pub baseline_t2: usize,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapSection {
    pub origin_x_m: f64,
    pub origin_y_m: f64,
    /// Zone side; defaults to the whole scene.
    pub side_m: Option<f64>,
    pub spacing_lambda: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub scene: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub model: PathBuf,
    pub sweep: PathBuf,
    pub heatmap: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            scene: SceneSection::default(),
            data: DataSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
            heatmap: HeatmapSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl Default for SceneSection {
    fn default() -> Self {
        SceneSection {
            num_paths: 1,
            extent_m: 2.5,
            frequency_hz: 3.5e9,
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            density_locs_per_lambda2: 1.0,
            train_count: None,
            grid_spacing_lambda: 0.25,
            import_csv: None,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "mb".into(),
            t1: None,
            t2: None,
            d: 500,
            gate: "phase".into(),
            output_scale: true,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            early_stop_patience: None,
            early_stop_min_delta: 0.0,
            log_every: 50,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            lp_values: vec![2, 4],
            densities: vec![0.1, 0.7, 2.0],
            n_seeds: 10,
            models: ModelKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            extent_m: 2.5,
            baseline_t1: 512,
            baseline_t2: 256,
        }
    }
}

impl Default for HeatmapSection {
    fn default() -> Self {
        HeatmapSection {
            origin_x_m: 0.0,
            origin_y_m: 0.0,
            side_m: None,
            spacing_lambda: 0.25,
        }
    }
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            scene: "scene.txt".into(),
            train: "train.chds".into(),
            test: "test.chds".into(),
            model: "model.ckpt".into(),
            sweep: "sweep.csv".into(),
            heatmap: "heatmap.csv".into(),
        }
    }
}

fn parse_kind(name: &str) -> Result<ModelKind, String> {
    ModelKind::parse(name).ok_or_else(|| format!("unknown model kind {name:?} (expected mb, mlp, rff or rff-lin)"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    /// Resolves every artifact path against `dir`.
    pub fn rebase_paths(&mut self, dir: &Path) {
        let p = &mut self.paths;
        for path in [&mut p.scene, &mut p.train, &mut p.test, &mut p.model, &mut p.sweep, &mut p.heatmap] {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let s = &self.scene;
        if s.num_paths < 1 {
            return Err("scene.num_paths must be at least 1".into());
        }
        if !(s.extent_m.is_finite() && s.extent_m > 0.0) {
            return Err("scene.extent_m must be positive".into());
        }
        if !(s.frequency_hz.is_finite() && s.frequency_hz > 0.0) {
            return Err("scene.frequency_hz must be positive".into());
        }
        if !(self.data.density_locs_per_lambda2 > 0.0) {
            return Err("data.density_locs_per_lambda2 must be positive".into());
        }
        if self.data.train_count == Some(0) {
            return Err("data.train_count must be at least 1".into());
        }
        if !(self.data.grid_spacing_lambda > 0.0) {
            return Err("data.grid_spacing_lambda must be positive".into());
        }
        if !(self.heatmap.spacing_lambda > 0.0) {
            return Err("heatmap.spacing_lambda must be positive".into());
        }
        self.model_spec()?;
        self.train_config()?;
        self.sweep_models()?;
        let p = &self.paths;
        let all = [&p.scene, &p.train, &p.test, &p.model, &p.sweep, &p.heatmap];
        for (i, a) in all.iter().enumerate() {
            if all[i + 1..].contains(a) {
                return Err(format!("artifact path {} is used twice", a.display()));
            }
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec, String> {
        let m = &self.model;
        let kind = parse_kind(&m.kind)?;
        let gate = GateMode::parse(&m.gate)
            .ok_or_else(|| format!("unknown gate {:?} (expected phase, scaled or magnitude)", m.gate))?;
        let base = ModelSpec::paper(kind);
        let spec = ModelSpec {
            t1: m.t1.unwrap_or(base.t1),
            t2: m.t2.unwrap_or(base.t2),
            d: m.d,
            gate,
            output_scale: kind == ModelKind::Mb && m.output_scale,
            ..base
        };
        spec.validate().map_err(|e| format!("model: {e}"))?;
        Ok(spec)
    }

    pub fn train_config(&self) -> Result<TrainConfig, String> {
        let t = &self.train;
        let cfg = TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            rng_seed: 0,
            early_stop: t.early_stop_patience.map(|patience| EarlyStop {
                patience,
                min_delta: t.early_stop_min_delta,
            }),
        };
        cfg.validate().map_err(|e| format!("train: {e}"))?;
        Ok(cfg)
    }

    /// Specs for the sweep: MB uses the `[model]` section, the baselines use
    /// the sweep widths.
    pub fn sweep_models(&self) -> Result<Vec<ModelSpec>, String> {
        let sw = &self.sweep;
        if sw.models.is_empty() {
            return Err("sweep.models must not be empty".into());
        }
        let mb = ModelSpec {
            kind: ModelKind::Mb,
            ..self.model_spec_for_mb()?
        };
        sw.models
            .iter()
            .map(|name| {
                let kind = parse_kind(name)?;
                let spec = match kind {
                    ModelKind::Mb => mb,
                    other => ModelSpec::baseline(other)
                        .with_widths(sw.baseline_t1, sw.baseline_t2)
                        .with_dictionary(self.model.d),
                };
                spec.validate().map_err(|e| format!("sweep: {e}"))?;
                Ok(spec)
            })
            .collect()
    }

    fn model_spec_for_mb(&self) -> Result<ModelSpec, String> {
        let m = &self.model;
        let gate = GateMode::parse(&m.gate).ok_or_else(|| format!("unknown gate {:?}", m.gate))?;
        let base = ModelSpec::mb();
        let uses_mb_widths = parse_kind(&m.kind)? == ModelKind::Mb;
        Ok(ModelSpec {
            t1: if uses_mb_widths { m.t1.unwrap_or(base.t1) } else { base.t1 },
            t2: if uses_mb_widths { m.t2.unwrap_or(base.t2) } else { base.t2 },
            d: m.d,
            gate,
            output_scale: m.output_scale,
            ..base
        })
    }
}
