mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavefield::autodiff::{make_circle_bank, CircleSampling};
use wavefield::dataset::{generate_test_grid, generate_training_set, import_csv, ChannelDataset};
use wavefield::scene::{sample_random_scene, Extent, Point, Scene, SceneConfig};
use wavefield::train::{
    derive_seed, export_heatmap, nmse_for_output, run_sweep_with_progress, samples_for_density, train_with_progress,
    SweepConfig,
};
use wavefield::{build_model, evaluate, Model};

use config::RunConfig;

const SEED_SCENE: u64 = 0;
const SEED_DATA: u64 = 1;
const SEED_MODEL: u64 = 2;
const SEED_SHUFFLE: u64 = 3;

#[derive(Parser, Debug)]
#[command(name = "wavefield", version, about = "Channel field synthesis and location-to-channel learning")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = machine parallelism).
    #[arg(long, global = true, env = "WAVEFIELD_THREADS")]
    threads: Option<usize>,
    /// Directory that relative artifact paths resolve against.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a random scene.
    GenScene {
        #[arg(long)]
        num_paths: Option<usize>,
    },
    /// Synthesize the training set and the test grid from a scene.
    GenData {
        #[arg(long, value_name = "PATH")]
        scene: Option<PathBuf>,
        /// Ingest an external CSV as the training set instead.
        #[arg(long, value_name = "PATH")]
        import: Option<PathBuf>,
    },
    /// Train a model on a training set and write a checkpoint.
    Train {
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// NMSE of a checkpoint on a dataset (the test grid by default).
    Eval {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Path-count / density sweep over fresh scenes.
    Sweep {
        #[arg(long)]
        n_seeds: Option<usize>,
    },
    /// Ground truth and prediction over a zone, as CSV.
    ExportHeatmap {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        scene: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Stage(String),
}

fn stage_err(stage: &str, path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Stage(format!("{stage} failed on {}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(common: &Common, command: &Command) -> Result<RunConfig, String> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    match command {
        Command::GenScene { num_paths: Some(n) } => cfg.scene.num_paths = *n,
        Command::Train { model, epochs, .. } => {
            if let Some(m) = model {
                cfg.model.kind = m.clone();
            }
            if let Some(e) = epochs {
                cfg.train.epochs = *e;
            }
        }
        Command::Sweep { n_seeds: Some(n) } => cfg.sweep.n_seeds = *n,
        _ => {}
    }
    if let Some(dir) = &common.out {
        cfg.rebase_paths(dir);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, Failure> {
    let cfg = load_config(&cli.common, &cli.command).map_err(Failure::Config)?;
    if let Some(n) = cli.common.threads {
        wavefield::par::configure_threads(n).map_err(Failure::Config)?;
    }
    if let Some(dir) = &cli.common.out {
        std::fs::create_dir_all(dir).map_err(|e| stage_err("setup", dir, e))?;
    }
    match cli.command {
        Command::GenScene { .. } => gen_scene(&cfg),
        Command::GenData { scene, import } => gen_data(&cfg, scene, import),
        Command::Train { data, .. } => train_cmd(&cfg, data),
        Command::Eval { checkpoint, data } => eval_cmd(&cfg, checkpoint, data),
        Command::Sweep { .. } => sweep_cmd(&cfg),
        Command::ExportHeatmap { checkpoint, scene } => heatmap_cmd(&cfg, checkpoint, scene),
    }
}

fn gen_scene(cfg: &RunConfig) -> Result<String, Failure> {
    let path = &cfg.paths.scene;
    let sc = SceneConfig::new(cfg.scene.num_paths, Extent::square(cfg.scene.extent_m), cfg.scene.frequency_hz);
    let scene = sample_random_scene(derive_seed(cfg.seed, SEED_SCENE), &sc).map_err(|e| stage_err("gen-scene", path, e))?;
    scene.save(path).map_err(|e| stage_err("gen-scene", path, e))?;
    Ok(format!(
        "stage=gen-scene num_paths={} extent_m={:?} frequency_hz={:?} wavelength_m={:?} out={}",
        scene.num_paths(),
        scene.extent().side,
        scene.frequency_hz(),
        scene.wavelength(),
        path.display()
    ))
}

fn load_scene(stage: &str, path: &Path) -> Result<Scene, Failure> {
    Scene::load(path).map_err(|e| stage_err(stage, path, e))
}

fn gen_data(cfg: &RunConfig, scene_path: Option<PathBuf>, import: Option<PathBuf>) -> Result<String, Failure> {
    let scene_path = scene_path.unwrap_or_else(|| cfg.paths.scene.clone());
    let scene = load_scene("gen-data", &scene_path)?;
    let import = import.or_else(|| cfg.data.import_csv.clone());
    let train = match &import {
        Some(csv) => import_csv(csv, scene.frequency_hz(), scene.extent()).map_err(|e| stage_err("gen-data", csv, e))?,
        None => {
            let count = cfg.data.train_count.unwrap_or_else(|| {
                samples_for_density(cfg.data.density_locs_per_lambda2, scene.extent().side, scene.wavelength())
            });
            generate_training_set(&scene, count, derive_seed(cfg.seed, SEED_DATA))
                .map_err(|e| stage_err("gen-data", &scene_path, e))?
        }
    };
    let test = generate_test_grid(&scene, cfg.data.grid_spacing_lambda * scene.wavelength())
        .map_err(|e| stage_err("gen-data", &scene_path, e))?;
    train.write(&cfg.paths.train).map_err(|e| stage_err("gen-data", &cfg.paths.train, e))?;
    test.write(&cfg.paths.test).map_err(|e| stage_err("gen-data", &cfg.paths.test, e))?;
    Ok(format!(
        "stage=gen-data train_kind={} train_samples={} test_samples={} train={} test={}",
        train.kind.name(),
        train.len(),
        test.len(),
        cfg.paths.train.display(),
        cfg.paths.test.display()
    ))
}

fn read_dataset(stage: &str, path: &Path) -> Result<ChannelDataset, Failure> {
    ChannelDataset::read(path).map_err(|e| stage_err(stage, path, e))
}

fn train_cmd(cfg: &RunConfig, data: Option<PathBuf>) -> Result<String, Failure> {
    let data_path = data.unwrap_or_else(|| cfg.paths.train.clone());
    let ds = read_dataset("train", &data_path)?;
    let spec = cfg.model_spec().map_err(Failure::Config)?;
    let bank = if spec.kind.uses_bank() {
        Some(make_circle_bank(spec.d, ds.wavelength(), CircleSampling::Equiangular).map_err(|e| stage_err("train", &data_path, e))?)
    } else {
        None
    };
    let model = build_model(&spec, bank.as_ref(), derive_seed(cfg.seed, SEED_MODEL)).map_err(|e| stage_err("train", &data_path, e))?;
    let mut tc = cfg.train_config().map_err(Failure::Config)?;
    tc.rng_seed = derive_seed(cfg.seed, SEED_SHUFFLE);
    let log_every = cfg.train.log_every;
    let (model, report) = train_with_progress(model, &ds, &tc, |epoch, loss, _| {
        if log_every > 0 && (epoch + 1) % log_every == 0 {
            eprintln!("epoch {} loss {loss:.6e}", epoch + 1);
        }
    })
    .map_err(|e| stage_err("train", &data_path, e))?;
    model.save(&cfg.paths.model).map_err(|e| stage_err("train", &cfg.paths.model, e))?;
    Ok(format!(
        "stage=train model={} param_count={} epochs={} final_loss={:?} train_nmse_db={:?} wall_time_s={:.3} out={}",
        spec.kind,
        report.param_count,
        report.loss_history.len(),
        report.loss_history.last().copied().unwrap_or(f64::NAN),
        nmse_for_output(report.nmse_db),
        report.wall_time_s,
        cfg.paths.model.display()
    ))
}

fn load_model(stage: &str, path: &Path) -> Result<Model, Failure> {
    Model::load(path).map_err(|e| stage_err(stage, path, e))
}

fn eval_cmd(cfg: &RunConfig, checkpoint: Option<PathBuf>, data: Option<PathBuf>) -> Result<String, Failure> {
    let ckpt = checkpoint.unwrap_or_else(|| cfg.paths.model.clone());
    let data_path = data.unwrap_or_else(|| cfg.paths.test.clone());
    let model = load_model("eval", &ckpt)?;
    let ds = read_dataset("eval", &data_path)?;
    let nmse = evaluate(&model, &ds).map_err(|e| stage_err("eval", &data_path, e))?;
    Ok(format!(
        "stage=eval model={} samples={} nmse_db={:?} data={}",
        model.kind(),
        ds.len(),
        nmse_for_output(nmse),
        data_path.display()
    ))
}

fn sweep_cmd(cfg: &RunConfig) -> Result<String, Failure> {
    let sw = &cfg.sweep;
    let mut train = cfg.train_config().map_err(Failure::Config)?;
    train.rng_seed = 0;
    let sweep_cfg = SweepConfig {
        lp_values: sw.lp_values.clone(),
        densities: sw.densities.clone(),
        n_seeds: sw.n_seeds,
        models: cfg.sweep_models().map_err(Failure::Config)?,
        train,
        frequency_hz: cfg.scene.frequency_hz,
        extent_m: sw.extent_m,
        grid_spacing_lambda: cfg.data.grid_spacing_lambda,
        master_seed: cfg.seed,
    };
    sweep_cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let path = &cfg.paths.sweep;
    let table = run_sweep_with_progress(&sweep_cfg, |row| match (&row.nmse_db, &row.error) {
        (Some(v), _) => eprintln!(
            "model={} lp={} density={} seed={} nmse_db={v:.3} wall_time_s={:.1}",
            row.model, row.lp, row.density, row.seed, row.wall_time_s
        ),
        (None, err) => eprintln!(
            "model={} lp={} density={} seed={} failed: {}",
            row.model,
            row.lp,
            row.density,
            row.seed,
            err.as_deref().unwrap_or("unknown error")
        ),
    })
    .map_err(|e| stage_err("sweep", path, e))?;
    table.write_csv(path).map_err(|e| stage_err("sweep", path, e))?;
    for cell in table.summary() {
        eprintln!(
            "cell model={} lp={} density={} mean_db={:.3} std_db={:.3} runs={} failed={}",
            cell.model, cell.lp, cell.density, cell.mean_db, cell.std_db, cell.runs, cell.failed
        );
    }
    let failed = table.rows.iter().filter(|r| r.nmse_db.is_none()).count();
    Ok(format!(
        "stage=sweep rows={} failed={} out={}",
        table.rows.len(),
        failed,
        path.display()
    ))
}

fn heatmap_cmd(cfg: &RunConfig, checkpoint: Option<PathBuf>, scene: Option<PathBuf>) -> Result<String, Failure> {
    let ckpt = checkpoint.unwrap_or_else(|| cfg.paths.model.clone());
    let scene_path = scene.unwrap_or_else(|| cfg.paths.scene.clone());
    let model = load_model("export-heatmap", &ckpt)?;
    let scene = load_scene("export-heatmap", &scene_path)?;
    let ext = scene.extent();
    let hm = &cfg.heatmap;
    let origin = Point::new(hm.origin_x_m, hm.origin_y_m);
    let side = hm.side_m.unwrap_or(ext.side - (origin.x - ext.origin.x).max(origin.y - ext.origin.y));
    let zone = Extent::new(origin, side);
    let path = &cfg.paths.heatmap;
    let rows = export_heatmap(&model, &scene, zone, hm.spacing_lambda * scene.wavelength(), path)
        .map_err(|e| stage_err("export-heatmap", path, e))?;
    Ok(format!("stage=export-heatmap rows={rows} out={}", path.display()))
}
