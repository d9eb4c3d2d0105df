use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use asal::commands::quantify::QuantifySummary;
use asal::commands::{atlas, enumerate, illuminate, quantify, target};
use asal::config::GenomeSource;
use asal::imageio::{read_png, write_png};
use asal::rundir::RunDir;
use asal::{AppError, CommandKind, Preset, RunConfig, RunOptions};
use asal_core::{AnySubstrate, RolloutSpec, SubstrateConfig, SubstrateKind};
use serde_json::{json, Value};
use tempfile::TempDir;

fn config(kind: CommandKind, mut user: Value, out: &Path) -> RunConfig {
    user["output_dir"] = json!(out);
    RunConfig::resolve(kind, Some(Preset::Desk), &user).unwrap()
}

fn opts(workers: usize) -> RunOptions {
    RunOptions { workers, ..RunOptions::default() }
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn csv_rows(p: impl AsRef<Path>) -> Vec<Vec<String>> {
    read(p).lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

/// Final Lenia frame of a random genome, used as a reachable target.
fn lenia_target_png(dir: &Path, steps: usize) -> PathBuf {
    let sub = AnySubstrate::from_config(&SubstrateConfig::desk_default(SubstrateKind::Lenia)).unwrap();
    let theta = GenomeSource::Random { seed: 9, scale: 0.05 }.resolve(&sub).unwrap();
    let traj = sub.rollout(&theta, &RolloutSpec::final_only(steps, 0)).unwrap();
    let path = dir.join("target.png");
    write_png(&path, traj.final_frame()).unwrap();
    path
}

fn target_user(image: &Path) -> Value {
    json!({
        "substrate": {"kind": "lenia"},
        "target": {
            "steps": 8, "target_image": image, "population": 4,
            "generations": 6, "checkpoint_every": 3, "frames": 3
        }
    })
}

#[test]
fn target_run_writes_directory_and_improves_monotonically() {
    let tmp = TempDir::new().unwrap();
    let image = lenia_target_png(tmp.path(), 8);
    let out = tmp.path().join("run");
    let cfg = config(CommandKind::Target, target_user(&image), &out);
    let summary = target::run(&cfg, &opts(1)).unwrap();
    assert_eq!(summary.generations, 6);
    assert_eq!(summary.evals, 24);

    let run = RunDir::open(&out);
    for p in [run.config(), run.scores(), run.summary(), run.best_genome(), run.report("score_curve.png")] {
        assert!(p.exists(), "{}", p.display());
    }
    assert!(run.checkpoint(3).exists() && run.checkpoint(6).exists());
    for step in [0, 4, 8] {
        assert!(read_png(&run.frame(step)).is_ok(), "frame {step}");
    }
    let rows = csv_rows(run.scores());
    assert_eq!(rows.len(), 6);
    let best: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] >= w[0]), "{best:?}");
    assert_eq!(*best.last().unwrap(), summary.best_score);

    let saved = RunConfig::from_json_str(CommandKind::Target, None, &read(run.config())).unwrap();
    assert_eq!(saved, cfg);
}

#[test]
fn target_resume_reproduces_uninterrupted_run() {
    let tmp = TempDir::new().unwrap();
    let image = lenia_target_png(tmp.path(), 8);
    let full = tmp.path().join("full");
    target::run(&config(CommandKind::Target, target_user(&image), &full), &opts(1)).unwrap();

    let resumed = tmp.path().join("resumed");
    let ck = RunDir::open(&full).checkpoint(3);
    let o = RunOptions { resume: Some(ck), ..opts(2) };
    target::run(&config(CommandKind::Target, target_user(&image), &resumed), &o).unwrap();

    let (a, b) = (RunDir::open(&full), RunDir::open(&resumed));
    assert_eq!(read(a.scores()), read(b.scores()));
    assert_eq!(read(a.best_genome()), read(b.best_genome()));
}

#[test]
fn target_rejects_foreign_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let image = lenia_target_png(tmp.path(), 8);
    let first = tmp.path().join("first");
    target::run(&config(CommandKind::Target, target_user(&image), &first), &opts(1)).unwrap();
    let mut user = target_user(&image);
    user["seed"] = json!(5);
    let o = RunOptions { resume: Some(RunDir::open(&first).checkpoint(3)), ..opts(1) };
    let err = target::run(&config(CommandKind::Target, user, &tmp.path().join("b")), &o).unwrap_err();
    assert!(err.to_string().contains("different configuration"), "{err}");
}

#[test]
fn config_errors_name_the_field() {
    let missing = RunConfig::resolve(CommandKind::Target, Some(Preset::Desk), &json!({})).unwrap_err();
    assert!(matches!(&missing, AppError::Config { path, .. } if path == "target.prompts"), "{missing}");

    let both = json!({"target": {"prompts": [{"step": 4, "text": "a cell"}], "target_image": "x.png"}});
    assert!(RunConfig::resolve(CommandKind::Target, Some(Preset::Desk), &both).is_err());

    let pixel_prompts = json!({"target": {"prompts": [{"step": 4, "text": "a cell"}]}});
    let err = RunConfig::resolve(CommandKind::Target, Some(Preset::Desk), &pixel_prompts).unwrap_err();
    assert!(err.to_string().contains("embedder"), "{err}");

    let typo = json!({"substrate": {"kind": "lenia", "grid": 16, "gird": 3}});
    let err = RunConfig::resolve(CommandKind::Illuminate, Some(Preset::Desk), &typo).unwrap_err();
    assert!(err.to_string().contains("substrate"), "{err}");

    let bad_rule = json!({"enumerate": {"rules": ["B3/S23", "B9/S"]}});
    let err = RunConfig::resolve(CommandKind::Enumerate, Some(Preset::Desk), &bad_rule).unwrap_err();
    assert!(matches!(&err, AppError::Config { path, .. } if path == "enumerate.rules[1]"), "{err}");
}

fn enumerate_user() -> Value {
    json!({
        "enumerate": {
            "steps": 16, "seeds": 2, "subsample": 4, "top_k": 3, "strip_frames": 4,
            "rules": ["B3/S23", "B36/S23", "B/S", "B2/S", "B1357/S1357", "B3678/S34678", "B012345678/S012345678"],
            "chunk": 2, "checkpoint_every": 1
        }
    })
}

#[test]
fn enumerate_is_deterministic_across_workers_and_resume() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let summary = enumerate::run(&config(CommandKind::Enumerate, enumerate_user(), &a), &opts(1)).unwrap();
    assert_eq!(summary.rules, 7);
    assert_eq!(summary.top.len(), 3);
    let b = tmp.path().join("b");
    enumerate::run(&config(CommandKind::Enumerate, enumerate_user(), &b), &opts(3)).unwrap();
    let c = tmp.path().join("c");
    let o = RunOptions { resume: Some(RunDir::open(&a).checkpoint(2)), ..opts(2) };
    enumerate::run(&config(CommandKind::Enumerate, enumerate_user(), &c), &o).unwrap();

    let (ra, rb, rc) = (RunDir::open(&a), RunDir::open(&b), RunDir::open(&c));
    let csv = fs::read(ra.scores()).unwrap();
    assert_eq!(csv, fs::read(rb.scores()).unwrap());
    assert_eq!(csv, fs::read(rc.scores()).unwrap());

    let rows = csv_rows(ra.scores());
    assert_eq!(rows.len(), 7);
    let scores: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]), "{scores:?}");
    for k in 0..3 {
        let strip = read_png(&ra.report(&format!("top_{k:02}.png"))).unwrap();
        assert_eq!(strip.width(), 4 * strip.height());
    }
    assert!(!ra.report("top_03.png").exists());
    let hist = csv_rows(ra.report("oe_histogram.csv"));
    assert_eq!(hist.iter().map(|r| r[2].parse::<usize>().unwrap()).sum::<usize>(), 7);
    assert!(ra.best_genome().exists());
}

fn illuminate_user() -> Value {
    json!({
        "substrate": {"kind": "boids", "boids": 12, "render_size": 24},
        "illuminate": {
            "capacity": 6, "iterations": 12, "batch": 3, "steps": 6,
            "init": {"random": {"scale": 0.5}},
            "log_every": 3, "checkpoint_every": 6, "atlas_grid": [3, 2], "atlas_tile": 8
        }
    })
}

#[test]
fn illuminate_then_atlas() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ill");
    let summary = illuminate::run(&config(CommandKind::Illuminate, illuminate_user(), &out), &opts(2)).unwrap();
    assert_eq!(summary.iterations, 12);
    assert_eq!(summary.capacity, 6);
    let run = RunDir::open(&out);
    let rows = csv_rows(run.scores());
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["3", "6", "9", "12"]);
    let mosaic = read_png(&run.report("atlas.png")).unwrap();
    assert_eq!((mosaic.width(), mosaic.height()), (24, 16));
    let layout = read(out.join("layout.csv"));
    assert!(layout.starts_with("# projector: pca\ngenome_id,x,y,tile_row,tile_col\n"));
    assert_eq!(layout.lines().count(), 2 + 6);
    assert!(run.report("diversity.png").exists());

    let resumed = tmp.path().join("resumed");
    let o = RunOptions { resume: Some(run.checkpoint(6)), ..opts(1) };
    illuminate::run(&config(CommandKind::Illuminate, illuminate_user(), &resumed), &o).unwrap();
    let r2 = RunDir::open(&resumed);
    assert_eq!(read(run.scores()), read(r2.scores()));
    assert_eq!(fs::read(out.join("archive.bin")).unwrap(), fs::read(resumed.join("archive.bin")).unwrap());

    let atlas_out = tmp.path().join("atlas");
    let user = json!({"atlas": {"run_dir": out, "grid_w": 2, "grid_h": 2, "tile": 10}});
    let s = atlas::run(&config(CommandKind::Atlas, user, &atlas_out), &opts(1)).unwrap();
    assert_eq!(s.members, 6);
    assert!((1..=4).contains(&s.occupied_tiles));
    let mosaic = read_png(&RunDir::open(&atlas_out).report("atlas.png")).unwrap();
    assert_eq!((mosaic.width(), mosaic.height()), (20, 20));
}

#[test]
fn atlas_needs_a_run_dir() {
    let err = RunConfig::resolve(CommandKind::Atlas, Some(Preset::Desk), &json!({})).unwrap_err();
    assert!(err.to_string().contains("atlas.run_dir"), "{err}");
}

/// First step whose state equals the next one.
fn freeze_step(rule: &str, steps: usize) -> Option<usize> {
    let cfg = SubstrateConfig::desk_default(SubstrateKind::LifelikeCa);
    let sub = AnySubstrate::from_config(&cfg).unwrap();
    let theta = GenomeSource::Rule(rule.into()).resolve(&sub).unwrap();
    let traj = sub.rollout(&theta, &RolloutSpec::every_step(steps, 0)).unwrap();
    traj.frames.windows(2).position(|w| w[0].pixels() == w[1].pixels())
}

fn plateau(rule: &str, out: &Path) -> (Option<usize>, Option<usize>) {
    let user = json!({"quantify": {"analysis": "plateau", "theta": {"rule": rule}, "steps": 64}});
    match quantify::run(&config(CommandKind::Quantify, user, out), &opts(1)).unwrap() {
        QuantifySummary::Plateau { plateau_index, plateau_step, captures } => {
            assert_eq!(captures, 65);
            (plateau_index, plateau_step)
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn plateau_detection() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(plateau("B/S012345678", &tmp.path().join("still")).0, Some(0));

    let truth = freeze_step("B3/S012345678", 64).expect("freezes");
    assert!(truth > 0);
    let (index, step) = plateau("B3/S012345678", &tmp.path().join("grow"));
    let index = index.expect("plateau found");
    assert!(index.abs_diff(truth) <= 4, "detected {index}, froze at {truth}");
    assert_eq!(step, Some(index + 1));
    assert_eq!(csv_rows(tmp.path().join("grow/scores.csv")).len(), 64);
}

#[test]
fn interpolation_endpoints_score_one() {
    let tmp = TempDir::new().unwrap();
    let user = json!({
        "substrate": {"kind": "particle_life", "particles": 24},
        "quantify": {
            "analysis": "interpolate",
            "a": {"random": {"seed": 1, "scale": 0.5}},
            "b": {"random": {"seed": 2, "scale": 0.5}},
            "points": 5, "reference": "a", "steps": 10
        }
    });
    let s = quantify::run(&config(CommandKind::Quantify, user, tmp.path()), &opts(1)).unwrap();
    let QuantifySummary::Interpolate { scores } = s else { panic!("{s:?}") };
    assert_eq!(scores.len(), 5);
    assert!((scores[0] - 1.0).abs() < 1e-12, "{scores:?}");
    assert!(scores.iter().all(|s| (-1.0 - 1e-12..=1.0 + 1e-12).contains(s)));
}

#[test]
fn importance_is_ranked() {
    let tmp = TempDir::new().unwrap();
    let image = lenia_target_png(tmp.path(), 6);
    let user = json!({
        "substrate": {"kind": "nca"},
        "quantify": {
            "analysis": "importance", "theta": {"random": {"seed": 3, "scale": 0.1}},
            "target_image": image, "steps": 6, "deltas": [-0.5, 0.5], "dims": [0, 1, 2, 3, 4]
        }
    });
    let s = quantify::run(&config(CommandKind::Quantify, user, &tmp.path().join("q")), &opts(1)).unwrap();
    let QuantifySummary::Importance { ranked } = s else { panic!("{s:?}") };
    assert_eq!(ranked.len(), 5);
    assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    let mut dims: Vec<usize> = ranked.iter().map(|r| r.0).collect();
    dims.sort_unstable();
    assert_eq!(dims, [0, 1, 2, 3, 4]);
}

#[test]
fn binary_runs_from_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg_path = tmp.path().join("config.json");
    let mut user = enumerate_user();
    user["enumerate"]["rules"] = json!(["B3/S23", "B/S"]);
    fs::write(&cfg_path, user.to_string()).unwrap();
    let out = tmp.path().join("out");
    let bin = env!("CARGO_BIN_EXE_asal");

    let status = Command::new(bin)
        .args(["enumerate", "--quiet", "--workers", "2", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let summary: Value = serde_json::from_slice(&status.stdout).unwrap();
    assert_eq!(summary["rules"], 2);
    assert!(out.join("scores.csv").exists());

    let printed = Command::new(bin).args(["illuminate", "--print-config"]).output().unwrap();
    assert!(printed.status.success());
    let v: Value = serde_json::from_slice(&printed.stdout).unwrap();
    assert_eq!(v["illuminate"]["capacity"], 256);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"illuminate": {"sigmaa": 1}}"#).unwrap();
    let failed = Command::new(bin).args(["illuminate", "--config"]).arg(&bad).output().unwrap();
    assert!(!failed.status.success());
    assert!(String::from_utf8_lossy(&failed.stderr).contains("illuminate.sigmaa"));
}
