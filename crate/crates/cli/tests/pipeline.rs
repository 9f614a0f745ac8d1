//! End-to-end pipeline behavior: stage decomposition, reproducibility,
//! artifact stamping, locking, and the command-line surface.

use std::fs;
use std::path::Path;
use std::process::Command;

use stormcast::features::{build_schema, SchemaVariant};
use stormcast::ingest::{load_matrix, store_frame, write_lightning_csv};
use stormcast::models::TrainConfig;
use stormcast::raster::{GeoBounds, GridGeometry, Timestamp};
use stormcast::synth::{generate_scene, SceneConfig};

use stormcast_cli::stages::{FeaturesIndex, StagePaths};
use stormcast_cli::{
    run_experiment, stage_evaluate, stage_featurize, stage_flow, stage_ingest, stage_split,
    stage_train, DataSource, ExperimentConfig, FoldConfig, PipelineError,
};

fn small_scene(seed: u64) -> SceneConfig {
    SceneConfig {
        geometry: GridGeometry::new(
            32,
            32,
            GeoBounds { lat_min: 46.0, lat_max: 49.2, lon_min: 0.0, lon_max: 3.2 },
        )
        .unwrap(),
        frames: 12,
        start: Timestamp::parse("2017-06-01T12:00:00Z").unwrap(),
        wind: (0.3, 0.1),
        cloud_count: (4, 6),
        cloud_sigma: (2.0, 3.5),
        cloud_intensity: (30.0, 70.0),
        convection_rate: 0.8,
        growth_rate: (3.0, 9.0),
        lightning_rate: 3.0,
        diurnal_amplitude: 0.0,
        seed,
    }
}

fn small_config(seed: u64, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        data: DataSource::Synthetic { scene: small_scene(seed) },
        schema: SchemaVariant::ErrorOnly153,
        offset_minutes: 0,
        folds: FoldConfig { k: 2, margin_minutes: 30 },
        model: TrainConfig { max_depth: 8, ..TrainConfig::decision_tree(seed) },
        seed,
        out: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn stage_decomposition_matches_the_monolithic_run() {
    let dir = tempfile::tempdir().unwrap();
    let run_out = dir.path().join("run");
    let staged_out = dir.path().join("staged");

    let report = run_experiment(&small_config(5, &run_out)).unwrap();
    assert!(report.overall.accuracy.is_some());

    let config = small_config(5, &staged_out);
    let paths = StagePaths::new(&staged_out);
    stage_ingest(&config, &paths).unwrap();
    stage_flow(&config, &paths).unwrap();
    stage_featurize(&config, &paths).unwrap();
    stage_split(&config, &paths).unwrap();
    stage_train(&config, &paths).unwrap();
    stage_evaluate(&config, &paths).unwrap();

    for artifact in [
        "frames/index.json",
        "flow/index.json",
        "features/matrix.bin",
        "features/matrix.bin.schema.json",
        "features/matrix.bin.keys.bin",
        "features/labels.bin",
        "features/index.json",
        "folds.json",
        "model.json",
        "model.meta.json",
        "report.json",
        "roc.csv",
        "importance.csv",
        "report.txt",
    ] {
        assert_eq!(
            read(&run_out.join(artifact)),
            read(&staged_out.join(artifact)),
            "{artifact} differs between run and staged execution"
        );
    }
}

#[test]
fn identical_seeds_reproduce_byte_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_experiment(&small_config(9, &a)).unwrap();
    run_experiment(&small_config(9, &b)).unwrap();
    for artifact in ["features/matrix.bin", "features/labels.bin", "model.json", "report.json"] {
        assert_eq!(read(&a.join(artifact)), read(&b.join(artifact)), "{artifact} differs");
    }

    let c = dir.path().join("c");
    run_experiment(&small_config(10, &c)).unwrap();
    assert_ne!(read(&a.join("model.json")), read(&c.join("model.json")));
}

#[test]
fn rerunning_in_the_same_directory_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = small_config(7, &out);
    run_experiment(&config).unwrap();
    let first = read(&out.join("report.json"));
    run_experiment(&config).unwrap();
    assert_eq!(first, read(&out.join("report.json")));
}

#[test]
fn lockfile_allows_one_experiment_per_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".lock"), b"").unwrap();
    let err = run_experiment(&small_config(1, &out)).unwrap_err();
    assert!(matches!(err, PipelineError::Locked { .. }), "{err}");

    // The lock is released once a run finishes, so the next one proceeds.
    fs::remove_file(out.join(".lock")).unwrap();
    run_experiment(&small_config(1, &out)).unwrap();
    assert!(!out.join(".lock").exists());
    run_experiment(&small_config(1, &out)).unwrap();
}

#[test]
fn artifacts_from_a_different_config_abort_with_hash_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_experiment(&small_config(3, &out)).unwrap();

    let other = small_config(4, &out);
    let paths = StagePaths::new(&out);
    let err = stage_train(&other, &paths).unwrap_err();
    match err {
        PipelineError::HashMismatch { found, expected, .. } => {
            assert_ne!(found, expected);
            assert_eq!(expected, other.hash());
        }
        other => panic!("expected hash mismatch, got {other}"),
    }
}

#[test]
fn missing_artifacts_name_the_expected_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    let config = small_config(2, &out);
    let paths = StagePaths::new(&out);
    let err = stage_train(&config, &paths).unwrap_err();
    match err {
        PipelineError::MissingArtifact { path } => {
            assert_eq!(path, paths.features_index());
        }
        other => panic!("expected missing artifact, got {other}"),
    }
}

#[test]
fn schema_variants_write_their_exact_column_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (variant, expected) in
        [(SchemaVariant::ErrorOnly153, 153), (SchemaVariant::Extended129, 129)]
    {
        let out = dir.path().join(format!("{expected}"));
        let config =
            ExperimentConfig { schema: variant, ..small_config(6, &out) };
        let paths = StagePaths::new(&out);
        stage_ingest(&config, &paths).unwrap();
        stage_flow(&config, &paths).unwrap();
        stage_featurize(&config, &paths).unwrap();

        let matrix = load_matrix(&paths.matrix()).unwrap();
        assert_eq!(matrix.n_features(), expected);
        assert_eq!(matrix.schema().names(), build_schema(variant).names());
        let index: FeaturesIndex =
            serde_json::from_str(&fs::read_to_string(paths.features_index()).unwrap()).unwrap();
        assert_eq!(index.n_rows, matrix.n_rows());
        assert_eq!(index.n_positive + index.n_negative, index.n_rows);
        assert!(index.n_positive > 0, "scene produced positives");
    }
}

#[test]
fn train_alone_reproduces_the_run_model_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = small_config(8, &out);
    run_experiment(&config).unwrap();
    let paths = StagePaths::new(&out);
    let original = read(&paths.model());
    fs::remove_file(paths.model()).unwrap();
    stage_train(&config, &paths).unwrap();
    assert_eq!(original, read(&paths.model()));
}

#[test]
fn stored_files_source_reproduces_the_synthetic_source() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    fs::create_dir_all(&raw).unwrap();

    // Export a scene to loose frame files plus a CSV, then ingest it back
    // through the files source. Same data, same seeds, same matrix bytes.
    let scene = small_scene(5);
    let rendered = generate_scene(&scene).unwrap();
    for (i, frame) in rendered.frames.iter().enumerate() {
        for grid in &frame.channels {
            let name = format!("{i:03}_{}.bin", grid.tag().as_str().replace(':', "_"));
            store_frame(grid, &raw.join(name)).unwrap();
        }
    }
    let csv = dir.path().join("strikes.csv");
    write_lightning_csv(&rendered.records, &csv).unwrap();

    let synth_out = dir.path().join("synth");
    run_experiment(&small_config(5, &synth_out)).unwrap();

    let files_out = dir.path().join("files");
    let mut config = small_config(5, &files_out);
    config.data = DataSource::Files {
        frames_dir: raw,
        lightning_csv: csv,
        bounds: scene.geometry.bounds(),
        coverage_start: scene.start,
        coverage_end: scene.start.plus_minutes(scene.frames as i64 * 15),
    };
    run_experiment(&config).unwrap();

    for artifact in ["features/matrix.bin", "features/labels.bin", "model.json"] {
        assert_eq!(
            read(&synth_out.join(artifact)),
            read(&files_out.join(artifact)),
            "{artifact} differs between synthetic and files sources"
        );
    }
}

#[test]
fn positive_offsets_shrink_the_usable_frame_range() {
    let dir = tempfile::tempdir().unwrap();
    let base_out = dir.path().join("base");
    run_experiment(&small_config(5, &base_out)).unwrap();
    let offset_out = dir.path().join("offset");
    let config = ExperimentConfig { offset_minutes: 60, ..small_config(5, &offset_out) };
    run_experiment(&config).unwrap();

    let load = |p: &Path| -> FeaturesIndex {
        serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
    };
    let base = load(&base_out.join("features/index.json"));
    let offset = load(&offset_out.join("features/index.json"));
    assert!(offset.frames_used < base.frames_used);

    // No row may ask for labels beyond the lightning coverage.
    let matrix = load_matrix(&offset_out.join("features/matrix.bin")).unwrap();
    let coverage_end = small_scene(5).start.plus_minutes(12 * 15);
    for key in matrix.keys() {
        assert!(key.timestamp.plus_minutes(60 + 15).unix_minutes() <= coverage_end.unix_minutes());
    }
}

// ---------------------------------------------------------------------------
// Binary surface
// ---------------------------------------------------------------------------

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stormcast"))
}

#[test]
fn report_counts_echo_the_published_gradient_boosting_rates() {
    let output = binary().args(["report", "--counts", "9286,714,1062,8938"]).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    for rate in ["89.74%", "92.86%", "10.62%"] {
        assert!(stdout.contains(rate), "missing {rate} in: {stdout}");
    }
}

#[test]
fn invalid_offset_is_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let output = binary()
        .args(["run", "--offset", "00:07", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("15"), "error should mention the 15-minute grid: {stderr}");
    assert!(!out.exists(), "no artifacts may be written for an invalid config");
}

#[test]
fn unknown_set_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["run", "--set", "model.depth=3", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("model.depth"), "{stderr}");
}

#[test]
fn full_binary_run_then_report_renders_the_stored_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config_path = dir.path().join("config.json");
    let config = small_config(5, &out);
    fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let run = binary().arg("run").arg("--config").arg(&config_path).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let run_stdout = String::from_utf8(run.stdout).unwrap();
    assert!(run_stdout.contains("overall"), "{run_stdout}");

    let report = binary().arg("report").arg("--out").arg(&out).output().unwrap();
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    let report_stdout = String::from_utf8(report.stdout).unwrap();
    assert_eq!(report_stdout, fs::read_to_string(out.join("report.txt")).unwrap());
    assert_eq!(run_stdout, report_stdout);
}

#[test]
fn cli_flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config_path = dir.path().join("config.json");
    fs::write(
        &config_path,
        serde_json::to_string_pretty(&small_config(5, &out)).unwrap(),
    )
    .unwrap();

    let output = binary()
        .arg("ingest")
        .arg("--config")
        .arg(&config_path)
        .args(["--seed", "42", "--model", "gb", "--schema", "extended_129"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    let config = &resolved["config"];
    assert_eq!(config["seed"], 42);
    assert_eq!(config["model"]["seed"], 42);
    assert_eq!(config["model"]["kind"], "gradient_boosting");
    assert_eq!(config["schema"], "ext129");
}
