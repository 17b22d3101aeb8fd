mod common;

use std::path::Path;

use chrono::{TimeZone, Utc};
use serde_json::{json, Value};
use stancebench_core::annotation::{AnnotationRecord, Round};
use stancebench_core::corpus::read_instances;
use stancebench_core::StanceLabel;

use common::*;

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn thread_line(id: &str, target: &str, relevance: [bool; 2], images: &[&str], replies: usize) -> String {
    let mut utterances = vec![json!({"id": "p", "author": "op", "text": "a fairly long post about the thing", "parent_id": null})];
    let mut parent = "p".to_string();
    for k in 0..replies {
        let cid = format!("c{k}");
        utterances.push(json!({"id": cid, "author": format!("u{k}"), "text": format!("reply number {k}"), "parent_id": parent}));
        parent = cid;
    }
    json!({
        "thread_id": id,
        "target_hint": target,
        "upvotes": 3,
        "reviewer_relevance": relevance,
        "image_refs": images,
        "utterances": utterances,
    })
    .to_string()
}

#[test]
fn invalid_config_exits_one_with_category() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"model": {"d_v": 8, "heads": 2, "lora_rank": 16}}"#).unwrap();
    let out = stancebench(&["--config", arg(&bad), "train", "--in", "x.jsonl", "--out", "y.ckpt", "--target", "tesla"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error[ConfigInvalid]: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(stancebench(&["eval"]).status.code(), Some(2));
    assert_eq!(stancebench(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(stancebench(&["eval", "--dest", "x", "--ablation", "no-images"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_categorised_error() {
    let out = stancebench(&["stats", "--in", "/nonexistent/instances.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[Io]: "), "{}", stderr(&out));
}

#[test]
fn data_dir_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    stancebench_core::corpus::write_instances(dir.path().join("corpus.jsonl"), &synthetic_corpus(12)).unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_stancebench"))
        .args(["split", "--in", "corpus.jsonl", "--out", "split.jsonl"])
        .env("STANCEBENCH_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("split.jsonl").is_file());
    assert!(dir.path().join("split.jsonl.manifest.json").is_file());
}

/// ingest → split → aggregate → stats → prompts on a small thread dump.
#[test]
fn corpus_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut lines = Vec::new();
    for t in 0..4 {
        let image = format!("img/t{t}.png");
        write_png(&root.join("raw").join(&image), 8, t);
        lines.push(thread_line(&format!("t{t}"), "Tesla", [true, true], &[&image], 2));
    }
    lines.push(thread_line("off-topic", "Tesla", [true, false], &["img/t0.png"], 2));
    lines.push(thread_line("no-image", "Tesla", [true, true], &[], 2));
    lines.push(thread_line("b0", "Bitcoin", [true, true], &["img/t1.png"], 1));
    let threads = root.join("raw/threads.jsonl");
    std::fs::write(&threads, lines.join("\n")).unwrap();
    let config = root.join("config.json");
    std::fs::write(&config, r#"{"filters": {"min_comments": 1, "min_post_words": 2, "max_post_words": 50}}"#).unwrap();

    let corpus = root.join("corpus");
    let out = stancebench(&[
        "--config", arg(&config), "ingest", "--in", arg(&threads), "--out", arg(&corpus), "--target", "tesla",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(corpus.join("ingest_report.json")).unwrap()).unwrap();
    assert_eq!(report["threads"], 7);
    assert_eq!(report["kept"], 4);
    assert_eq!(report["drop_reasons"]["Relevance"], 1);
    assert_eq!(report["drop_reasons"]["NoImage"], 1);
    assert_eq!(report["instances"], 12);
    assert!(corpus.join("images/img/t3.png").is_file());
    assert!(corpus.join("instances.jsonl.manifest.json").is_file());

    let split = corpus.join("split.jsonl");
    let out = stancebench(&["--seed", "4", "split", "--in", arg(&corpus.join("instances.jsonl")), "--out", arg(&split)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("Tesla: train"), "{}", stdout(&out));
    let instances = read_instances(&split).unwrap();
    assert!(instances.iter().all(|i| i.split.is_some()));

    // unlabeled corpora have no statistics yet
    let out = stancebench(&["stats", "--in", arg(&split)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[MissingGold]"), "{}", stderr(&out));

    let log = corpus.join("annotations.jsonl");
    let mut records = Vec::new();
    for (n, inst) in instances.iter().enumerate() {
        let label = StanceLabel::ALL[n % 3];
        for (who, round) in [("ann-1", Round::First), ("ann-2", Round::Second)] {
            records.push(AnnotationRecord {
                instance_id: inst.instance_id.clone(),
                annotator_id: who.into(),
                label,
                vision_related: n % 2 == 0,
                submitted_at: Utc.timestamp_opt(1_700_000_000, 0).unwrap(),
                round,
            });
        }
    }
    let text: String = records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    std::fs::write(&log, text).unwrap();
    let gold = corpus.join("gold.jsonl");
    let out = stancebench(&["aggregate", "--in", arg(&split), "--annotations", arg(&log), "--out", arg(&gold)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let labeled = read_instances(&gold).unwrap();
    assert!(labeled.iter().all(|i| i.gold.is_some() && i.vision_related.is_some()));
    assert_eq!(
        labeled.iter().map(|i| i.split).collect::<Vec<_>>(),
        instances.iter().map(|i| i.split).collect::<Vec<_>>()
    );

    let stats_path = corpus.join("stats.json");
    let reported = root.join("reported.json");
    std::fs::write(&reported, r#"{"Tesla": 10.0}"#).unwrap();
    let out = stancebench(&[
        "stats", "--in", arg(&gold), "--out", arg(&stats_path), "--reported-vision", arg(&reported),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("warning: Tesla vision-related"), "{}", stderr(&out));
    let stats: Value = serde_json::from_str(&std::fs::read_to_string(&stats_path).unwrap()).unwrap();
    assert_eq!(stats["stats"]["total"], 12);
    assert_eq!(stats["stats"]["per_target"]["Tesla"]["label_counts"], json!([4, 4, 4]));
    assert_eq!(stats["vision_discrepancies"].as_array().unwrap().len(), 1);

    let prompts = corpus.join("prompts.jsonl");
    let out = stancebench(&[
        "prompts", "--in", arg(&gold), "--out", arg(&prompts), "--images", arg(&corpus.join("images")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let first: Value = serde_json::from_str(std::fs::read_to_string(&prompts).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["caption"], "image:t0.png");
    assert!(first["gamma_t"].as_str().unwrap().contains("Caption: image:t0.png\n"));

    let ablated = corpus.join("prompts-ablated.jsonl");
    let out = stancebench(&["prompts", "--in", arg(&gold), "--out", arg(&ablated), "--ablation", "no-caption,no-cot"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let first: Value = serde_json::from_str(std::fs::read_to_string(&ablated).unwrap().lines().next().unwrap()).unwrap();
    assert!(!first["gamma_t"].as_str().unwrap().contains("Caption:"));
    assert!(!first["gamma_t"].as_str().unwrap().contains("Case:"));
}

#[test]
fn custom_target_requires_a_name() {
    let dir = tempfile::tempdir().unwrap();
    let threads = dir.path().join("threads.jsonl");
    std::fs::write(&threads, thread_line("t0", "Acme", [true, true], &[], 1)).unwrap();
    let out = stancebench(&["ingest", "--in", arg(&threads), "--out", arg(&dir.path().join("o")), "--target", "custom"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[ConfigInvalid]"), "{}", stderr(&out));

    let out = stancebench(&[
        "ingest", "--in", arg(&threads), "--out", arg(&dir.path().join("o")), "--filters", "none", "--target", "custom",
        "--target-name", "Acme",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let instances = read_instances(dir.path().join("o/instances.jsonl")).unwrap();
    assert_eq!(instances.len(), 2);
    assert!(instances.iter().all(|i| i.target_group == "Acme" && i.split.is_none()));
}

#[test]
fn train_writes_a_loadable_checkpoint() {
    let toy = toy_workspace(3);
    let ckpt = toy.dir.path().join("tesla.ckpt");
    let out = stancebench(&[
        "--config", arg(&toy.config), "train", "--in", arg(&toy.instances), "--out", arg(&ckpt), "--target", "TESLA",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("trained 3 steps on 8 Tesla instances"), "{}", stdout(&out));
    let (params, meta) = stancebench_model::checkpoint::load_checkpoint(&ckpt).unwrap();
    assert_eq!(meta["target"], "Tesla");
    assert_eq!(meta["steps"], 3);
    let model = stancebench_model::MultimodalModel::new(toy_config(3).model, toy_config(3).vision).unwrap();
    assert_eq!(params.frozen_hash(), model.frozen_hash());
    assert!(toy.dir.path().join("tesla.ckpt.manifest.json").is_file());
}
