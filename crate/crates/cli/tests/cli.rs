use std::path::Path;
use std::process::{Command, Output};

fn wavefield(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavefield"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("WAVEFIELD_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn field(line: &str, key: &str) -> String {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
        .to_string()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = wavefield(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1, "{text}");
    text
}

const QUICK: &str = "seed = 3\n[scene]\nnum_paths = 2\nextent_m = 0.5\n[model]\nt1 = 16\nt2 = 8\nd = 32\n[train]\nepochs = 3\nlog_every = 0\n";

#[test]
fn pipeline_stages_chain_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, QUICK).unwrap();
    let c = cfg.to_str().unwrap();

    let line = ok(&["gen-scene", "--config", c], dir.path());
    assert_eq!(field(&line, "stage"), "gen-scene");
    assert_eq!(field(&line, "num_paths"), "2");
    assert!(dir.path().join("scene.txt").exists());

    let line = ok(&["gen-data", "--config", c], dir.path());
    assert_eq!(field(&line, "train_kind"), "train");
    assert_eq!(field(&line, "train_samples"), "34");

    let line = ok(&["train", "--config", c], dir.path());
    assert_eq!(field(&line, "epochs"), "3");
    assert!(dir.path().join("model.ckpt").exists());

    let line = ok(&["eval", "--config", c], dir.path());
    assert!(field(&line, "nmse_db").parse::<f64>().unwrap().is_finite());

    let line = ok(&["export-heatmap", "--config", c], dir.path());
    let rows: usize = field(&line, "rows").parse().unwrap();
    let csv = std::fs::read_to_string(dir.path().join("heatmap.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x_m,y_m,h_re,h_im,hhat_re,hhat_im");
    assert_eq!(csv.lines().count(), rows + 1);
}

#[test]
fn import_ingests_external_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, QUICK).unwrap();
    let c = cfg.to_str().unwrap();
    ok(&["gen-scene", "--config", c], dir.path());
    let csv = dir.path().join("ext.csv");
    std::fs::write(&csv, "x_m,y_m,h_re,h_im\n0.1,0.1,0.5,-0.25\n0.2,0.4,0.125,0.5\n").unwrap();
    let line = ok(&["gen-data", "--config", c, "--import", csv.to_str().unwrap()], dir.path());
    assert_eq!(field(&line, "train_kind"), "imported");
    assert_eq!(field(&line, "train_samples"), "2");
    ok(&["train", "--config", c], dir.path());
}

#[test]
fn sweep_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!("{QUICK}[sweep]\nlp_values = [1]\ndensities = [0.5]\nn_seeds = 1\nextent_m = 0.4\nbaseline_t1 = 8\nbaseline_t2 = 4\n"),
    )
    .unwrap();
    let line = ok(&["sweep", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(field(&line, "rows"), "4");
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,lp,density_locs_per_lambda2,seed,nmse_db,param_count,wall_time_s"
    );
    let models: Vec<_> = lines.map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(models, ["mb", "mlp", "rff", "rff-lin"]);
}

#[test]
fn missing_dataset_exits_1_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere").join("train.chds");
    let out = wavefield(&["train", "--data", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains(missing.to_str().unwrap()), "{err}");
    assert!(err.contains("train"), "{err}");
}

#[test]
fn configuration_errors_exit_2_without_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("artifacts");
    let cases = [
        "[scene]\nnum_paths = 0\n",
        "[model]\nkind = \"transformer\"\n",
        "[train]\nlr = -1.0\n",
        "[scene]\nunknown_key = 1\n",
        "[paths]\ntrain = \"same\"\ntest = \"same\"\n",
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("bad{i}.toml"));
        std::fs::write(&cfg, body).unwrap();
        let out = wavefield(&["gen-scene", "--config", cfg.to_str().unwrap()], &out_dir);
        assert_eq!(out.status.code(), Some(2), "{body}: {}", stderr(&out));
        assert!(!out_dir.exists(), "{body} created outputs");
    }
    let out = wavefield(&["gen-scene", "--config", "/no/such/config.toml"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let out = wavefield(&["gen-scene", "--threads", "lots"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let run = |dir: &Path| {
        let cfg = dir.join("run.toml");
        std::fs::write(&cfg, QUICK).unwrap();
        let c = cfg.to_str().unwrap();
        ok(&["gen-scene", "--config", c, "--seed", "11"], dir);
        ok(&["gen-data", "--config", c, "--seed", "11"], dir);
        ok(&["train", "--config", c, "--seed", "11"], dir);
        field(&ok(&["eval", "--config", c, "--seed", "11"], dir), "nmse_db")
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (na, nb) = (run(a.path()), run(b.path()));
    assert_eq!(na, nb);
    for file in ["scene.txt", "train.chds", "test.chds", "model.ckpt"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
    let before = std::fs::read(a.path().join("train.chds")).unwrap();
    ok(&["gen-data", "--config", a.path().join("run.toml").to_str().unwrap(), "--seed", "11"], a.path());
    assert_eq!(before, std::fs::read(a.path().join("train.chds")).unwrap());
}

#[test]
fn thread_flag_and_environment_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wavefield"))
        .args(["gen-scene", "--out"])
        .arg(dir.path())
        .env("WAVEFIELD_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let out = wavefield(&["gen-scene", "--threads", "1"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
}

/// The LoS sanity pipeline through the binary, with default training settings.
#[test]
fn los_pipeline_reaches_minus_20_db() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("los.toml");
    std::fs::write(&cfg, "seed = 1\n[scene]\nnum_paths = 1\nextent_m = 2.5\n[train]\nlog_every = 0\n").unwrap();
    let c = cfg.to_str().unwrap();
    ok(&["gen-scene", "--config", c], dir.path());
    ok(&["gen-data", "--config", c], dir.path());
    ok(&["train", "--config", c], dir.path());
    let nmse: f64 = field(&ok(&["eval", "--config", c], dir.path()), "nmse_db").parse().unwrap();
    assert!(nmse < -20.0, "nmse_db = {nmse}");
}
