// Copyright (c) The swarm-consensus Authors.
// SPDX-License-Identifier: Apache-2.0

//! End-to-end tests of the `swarm` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const SAMPLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/ten_agents.json");

/// Pinned SHA-256 of `transcripts.jsonl` for the sample scenario (seed 42,
/// 10 agents, 10 rounds). A change here means the transcript format or the
/// simulated behaviour changed.
const GOLDEN_TRANSCRIPTS: &str = "944a671f19b709604f899d43aa363daea3816ca0bbecb5a85029451ef95d724e";

fn swarm(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_swarm"));
    cmd.args(args).env_remove("SWARM_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn out_dir(tmp: &tempfile::TempDir, name: &str) -> PathBuf {
    tmp.path().join(name)
}

#[test]
fn round_writes_one_transcript_per_round_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "r");
    ok(&swarm(
        &["round", "--config", SAMPLE, "--out", dir.to_str().unwrap()],
        &[],
    ));

    let lines: Vec<String> = read(&dir.join("transcripts.jsonl"))
        .lines()
        .map(str::to_string)
        .collect();
    assert_eq!(lines.len(), 10);
    for (i, line) in lines.iter().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["round_id"], i as u64);
    }
    let ratings = read(&dir.join("ratings.csv"));
    assert!(ratings.starts_with("round,agent_id,rating\n"));
    assert_eq!(ratings.lines().count(), 1 + 10 * 10);
    assert!(!ratings.contains('\r'));
    let ledger = read(&dir.join("ledger.csv"));
    assert!(ledger.starts_with("round,agent_id,delta,balance\n"));

    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.join("manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "round");
    assert_eq!(manifest["seed"], 42);
    let artifacts = manifest["artifacts"].as_object().unwrap();
    assert_eq!(artifacts.len(), 3);
    for (name, digest) in artifacts {
        assert_eq!(digest.as_str().unwrap(), sha(&dir.join(name)), "{name}");
    }
}

#[test]
fn golden_transcript_for_the_sample_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "g");
    ok(&swarm(
        &["round", "--config", SAMPLE, "--out", dir.to_str().unwrap()],
        &[],
    ));
    assert_eq!(sha(&dir.join("transcripts.jsonl")), GOLDEN_TRANSCRIPTS);
}

#[test]
fn seed_precedence_is_flag_then_env_then_file() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str], envs: &[(&str, &str)]| {
        let dir = out_dir(&tmp, name);
        let mut args = vec![
            "round",
            "--config",
            SAMPLE,
            "--rounds",
            "3",
            "--out",
            dir.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        ok(&swarm(&args, envs));
        sha(&dir.join("transcripts.jsonl"))
    };
    let file = run("file", &[], &[]);
    let env7 = run("env7", &[], &[("SWARM_SEED", "7")]);
    let flag7 = run("flag7", &["--seed", "7"], &[]);
    let both = run("both", &["--seed", "7"], &[("SWARM_SEED", "8")]);
    assert_ne!(file, env7);
    assert_eq!(env7, flag7);
    assert_eq!(both, flag7);
}

#[test]
fn config_errors_exit_with_code_1_and_name_the_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "e");
    let missing = tmp.path().join("absent.json");
    let out = swarm(
        &[
            "round",
            "--config",
            missing.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));

    let bad = tmp.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"seed":1,"rounds":2,"agents":[{"id":0,"ranking_nois":0.1},{"id":1}]}"#,
    )
    .unwrap();
    let out = swarm(
        &[
            "round",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ranking_nois"));

    let invalid = tmp.path().join("invalid.json");
    std::fs::write(
        &invalid,
        r#"{"seed":1,"rounds":2,"agents":[{"id":0},{"id":1,"ranking_noise":-1}]}"#,
    )
    .unwrap();
    let out = swarm(
        &[
            "round",
            "--config",
            invalid.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ranking_noise"));

    let out = swarm(&["sybil-sweep", "--cells", "0x3", "--out", dir.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_break_even_agrees_with_the_profit_surface() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "s");
    ok(&swarm(
        &[
            "sybil-sweep",
            "--n-range",
            "10:150",
            "--cells",
            "4x11",
            "--rounds-per-cell",
            "40",
            "--jobs",
            "2",
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    ));
    let mut surface = csv::Reader::from_path(dir.join("profit_surface.csv")).unwrap();
    assert_eq!(
        surface.headers().unwrap().iter().collect::<Vec<_>>(),
        ["N", "deposit", "mean_profit", "ci95_low", "ci95_high", "rounds"]
    );
    let mut first_unprofitable: BTreeMap<usize, Option<f64>> = BTreeMap::new();
    let mut rows = 0;
    for rec in surface.records() {
        let rec = rec.unwrap();
        let n: usize = rec[0].parse().unwrap();
        let d: f64 = rec[1].parse().unwrap();
        let mean: f64 = rec[2].parse().unwrap();
        let (lo, hi): (f64, f64) = (rec[3].parse().unwrap(), rec[4].parse().unwrap());
        assert!(lo <= mean && mean <= hi);
        assert_eq!(&rec[5], "40");
        let slot = first_unprofitable.entry(n).or_insert(None);
        if slot.is_none() && mean <= 0.0 {
            *slot = Some(d);
        }
        rows += 1;
    }
    assert_eq!(rows, 4 * 11);

    let mut curve = csv::Reader::from_path(dir.join("break_even.csv")).unwrap();
    assert_eq!(
        curve.headers().unwrap().iter().collect::<Vec<_>>(),
        ["N", "break_even_deposit"]
    );
    let mut seen = 0;
    for rec in curve.records() {
        let rec = rec.unwrap();
        let n: usize = rec[0].parse().unwrap();
        let expected = first_unprofitable[&n].map_or_else(|| "NA".to_string(), |d| d.to_string());
        assert_eq!(rec[1].to_string(), expected, "N={n}");
        seen += 1;
    }
    assert_eq!(seen, 4);
}

#[test]
fn sweep_output_does_not_depend_on_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let digest = |jobs: &str| {
        let dir = out_dir(&tmp, &format!("j{jobs}"));
        ok(&swarm(
            &[
                "sybil-sweep",
                "--n-range",
                "10:60",
                "--cells",
                "3x4",
                "--rounds-per-cell",
                "20",
                "--jobs",
                jobs,
                "--out",
                dir.to_str().unwrap(),
            ],
            &[],
        ));
        sha(&dir.join("profit_surface.csv"))
    };
    assert_eq!(digest("1"), digest("3"));
}

#[test]
fn rating_experiment_writes_ratings_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "re");
    ok(&swarm(
        &[
            "rating-experiment",
            "--rounds-list",
            "10,50",
            "--seed",
            "3",
            "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    ));
    let table = read(&dir.join("rating_estimation.csv"));
    assert!(table.starts_with("agent_id,true_eta,rating_10,rating_50\n"));
    assert_eq!(table.lines().count(), 11);
    let summary = read(&dir.join("rating_summary.csv"));
    assert!(summary.starts_with("rounds,spearman\n"));
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn latency_reports_phases_and_total() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "l");
    ok(&swarm(&["latency", "--out", dir.to_str().unwrap()], &[]));
    let text = read(&dir.join("latency.csv"));
    assert!(text.starts_with("phase,ms\n"));
    assert!(text.lines().any(|l| l == "total,106"), "{text}");
}
