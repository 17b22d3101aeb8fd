//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p stancebench-cli --test acceptance`. Extra
//! arguments filter criteria by substring.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stancebench_cli::pipeline::{predict, prepare, prompt_hash, MediaSource};
use stancebench_core::annotation::{aggregate_gold, cohen_kappa, AnnotationError, AnnotationRecord, GoldOutcome, Round};
use stancebench_core::corpus::{compute_corpus_stats, read_instances, write_instances, Instance, Split};
use stancebench_core::eval::{f1_avg, paired_bootstrap, PredictionRecord};
use stancebench_core::prompt::{build_prompt_bundle, AblationFlags, CAPTION_HEADER};
use stancebench_core::util::round2;
use stancebench_core::StanceLabel;
use stancebench_model::autograd::Mat;
use stancebench_model::lora::{lora_apply, lora_apply_dense, LoraAdapter};
use stancebench_model::train::{batch_loss, train_step, OptimizerConfig, TrainExample, TrainState};
use stancebench_model::vision::{patchify, Image, PROJECTION};
use stancebench_model::{assemble_input, ModelConfig, MultimodalModel, VisionConfig};

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

const fn criterion(name: &'static str, secs: u64, check: fn() -> Outcome) -> Criterion {
    Criterion {
        name,
        budget: Duration::from_secs(secs),
        check,
    }
}

const CRITERIA: [Criterion; 13] = [
    criterion("metric-arithmetic", 1, metric_arithmetic),
    criterion("corpus-stats", 1, corpus_stats),
    criterion("split", 5, split),
    criterion("kappa-oracle", 5, kappa_oracle),
    criterion("majority-vote", 1, majority_vote),
    criterion("patch-and-fusion-structure", 5, fusion_structure),
    criterion("lora", 10, lora),
    criterion("gradient-check", 60, gradient_check),
    criterion("frozen-conservation", 60, frozen_conservation),
    criterion("overfit", 120, overfit),
    criterion("ablation-locality", 10, ablation_locality),
    criterion("protocol-determinism", 120, protocol_determinism),
    criterion("bootstrap", 10, bootstrap),
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<&Criterion> = CRITERIA
        .iter()
        .filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str())))
        .collect();
    let mut failed = 0;
    for c in &selected {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > c.budget => Err(format!("over budget ({:.1}s allowed)", c.budget.as_secs_f64())),
            other => other,
        };
        let (status, detail) = match &outcome {
            Ok(detail) => ("PASS", detail.as_str()),
            Err(detail) => ("FAIL", detail.as_str()),
        };
        failed += usize::from(outcome.is_err());
        println!("{status} {:<28} {:>7.2}s  {detail}", c.name, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", selected.len() - failed, selected.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn metric_arithmetic() -> Outcome {
    let rows = [(62.64, 67.13, 64.89), (65.21, 77.35, 71.28), (79.56, 79.23, 79.40)];
    for (against, favor, reported) in rows {
        let got = round2(f1_avg(against, favor));
        ensure!((got - reported).abs() <= 0.005, "({against}, {favor}) gave {got}, expected {reported}");
    }
    Ok(format!("{} table rows reproduced", rows.len()))
}

fn corpus_stats() -> Outcome {
    let counts = table_counts();
    let instances = table_instances(&counts);
    let stats = compute_corpus_stats(&instances).map_err(|e| e.to_string())?;
    for t in &counts.targets {
        let s = &stats.per_target[&t.name];
        for label in StanceLabel::ALL {
            let (got, want) = (s.percent(label), t.percent.get(label));
            ensure!((got - want).abs() <= 0.01, "{} {label}: {got:.4} vs {want}", t.name);
        }
    }
    for label in StanceLabel::ALL {
        let (got, want) = (stats.overall.percent(label), counts.total.percent.get(label));
        ensure!((got - want).abs() <= 0.01, "overall {label}: {got:.4} vs {want}");
    }
    ensure!(
        (stats.overall.vision_percent - counts.total.vision_percent).abs() <= 0.01,
        "overall vision {:.4}",
        stats.overall.vision_percent
    );
    let depth_total: usize = stats.per_depth.values().map(|d| d.count).sum();
    ensure!(depth_total == counts.total.count, "depth counts sum to {depth_total}");
    let per_depth: Vec<usize> = stats.per_depth.values().map(|d| d.count).collect();
    ensure!(per_depth == counts.depth_counts, "depth counts {per_depth:?}");

    let reported: BTreeMap<String, f64> = counts
        .targets
        .iter()
        .map(|t| (t.name.clone(), t.reported_vision_percent))
        .collect();
    let flagged: BTreeSet<String> = stats
        .vision_discrepancies(&reported, 0.01)
        .into_iter()
        .map(|d| d.target)
        .collect();
    let expected: BTreeSet<String> = ["Bitcoin", "Tesla"].map(String::from).into();
    ensure!(flagged == expected, "flagged {flagged:?}");
    Ok(format!("{} instances; vision discrepancy flagged for {flagged:?}", stats.total))
}

fn split() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("corpus.jsonl");
    let corpus = synthetic_corpus(200);
    write_instances(&input, &corpus).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = dir.path().join(name);
        let run = stancebench(&["--seed", "7", "split", "--in", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        ensure!(run.status.success(), "split failed: {}", stderr(&run));
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure!(outputs[0] == outputs[1], "reruns with the same seed differ");

    let split = read_instances(dir.path().join("a.jsonl")).map_err(|e| e.to_string())?;
    ensure!(split.len() == corpus.len(), "instance count changed");
    let mut counts = [0usize; 3];
    let mut thread_split: BTreeMap<&str, Split> = BTreeMap::new();
    for inst in &split {
        let s = inst.split.ok_or_else(|| format!("{} has no split", inst.instance_id))?;
        counts[s.index()] += 1;
        if let Some(prev) = thread_split.insert(&inst.thread_id, s) {
            ensure!(prev == s, "thread {} spans {prev:?} and {s:?}", inst.thread_id);
        }
    }
    let total = split.len() as f64;
    for (count, ratio) in counts.iter().zip([0.70, 0.15, 0.15]) {
        let share = *count as f64 / total;
        ensure!((share - ratio).abs() <= 0.02, "split shares {counts:?} of {total}");
    }
    Ok(format!("train/val/test = {counts:?} of {total}"))
}

fn kappa_direct(ff: f64, fa: f64, af: f64, aa: f64) -> Option<f64> {
    let n = ff + fa + af + aa;
    if n == 0.0 {
        return None;
    }
    let po = (ff + aa) / n;
    let pe = ((ff + fa) * (ff + af) + (af + aa) * (fa + aa)) / (n * n);
    (pe < 1.0).then(|| (po - pe) / (1.0 - pe))
}

fn kappa_oracle() -> Outcome {
    use StanceLabel::{Against, Favor};
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut compared = 0;
    for _ in 0..1000 {
        let mut counts = [[0usize; 3]; 3];
        let mut pairs = Vec::new();
        for (i, row) in counts.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = rng.gen_range(0..15);
                pairs.extend(std::iter::repeat((StanceLabel::ALL[i], StanceLabel::ALL[j])).take(*cell));
            }
        }
        let c = |a: StanceLabel, b: StanceLabel| counts[a.index()][b.index()] as f64;
        let expected = kappa_direct(c(Favor, Favor), c(Favor, Against), c(Against, Favor), c(Against, Against));
        match (cohen_kappa(&pairs), expected) {
            (Ok(k), Some(e)) => {
                ensure!((k - e).abs() < 1e-9, "kappa {k} vs oracle {e}");
                compared += 1;
            }
            (Err(AnnotationError::NoEligiblePairs | AnnotationError::DegenerateMarginals), None) => {}
            (got, want) => return Err(format!("{got:?} vs oracle {want:?}")),
        }
    }
    let mut hand = Vec::new();
    for (pair, n) in [((Favor, Favor), 40), ((Favor, Against), 10), ((Against, Favor), 10), ((Against, Against), 40)] {
        hand.extend(std::iter::repeat(pair).take(n));
    }
    let k = cohen_kappa(&hand).map_err(|e| e.to_string())?;
    ensure!((k - 0.6).abs() < 1e-9, "hand table gave {k}");
    Ok(format!("{compared} tables agree; hand table kappa {k:.3}"))
}

fn record(label: StanceLabel, round: Round, who: &str) -> AnnotationRecord {
    AnnotationRecord {
        instance_id: "t/u".into(),
        annotator_id: who.into(),
        label,
        vision_related: false,
        submitted_at: Utc.timestamp_opt(0, 0).unwrap(),
        round,
    }
}

fn brute_majority(labels: &[StanceLabel]) -> GoldOutcome {
    let (n, label) = StanceLabel::ALL
        .iter()
        .map(|l| (labels.iter().filter(|x| *x == l).count(), *l))
        .max_by_key(|(n, _)| *n)
        .unwrap();
    if 2 * n > labels.len() {
        GoldOutcome::Gold(label)
    } else if labels.len() == 2 {
        GoldOutcome::AwaitingTieBreak
    } else {
        GoldOutcome::Unresolved
    }
}

fn majority_vote() -> Outcome {
    let mut checked = 0;
    for a in StanceLabel::ALL {
        for b in StanceLabel::ALL {
            let two = [record(a, Round::First, "x"), record(b, Round::Second, "y")];
            let got = aggregate_gold(&two).map_err(|e| e.to_string())?;
            ensure!(got == brute_majority(&[a, b]), "{a} {b}: {got:?}");
            checked += 1;
            for c in StanceLabel::ALL {
                let mut three = two.to_vec();
                three.push(record(c, Round::TieBreak, "z"));
                let got = aggregate_gold(&three).map_err(|e| e.to_string())?;
                ensure!(got == brute_majority(&[a, b, c]), "{a} {b} {c}: {got:?}");
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} label combinations"))
}

fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    let n = Normal::new(0.0, 1.0).unwrap();
    Mat::from_shape_fn((r, c), |_| n.sample(rng))
}

fn fusion_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let p = rng.gen_range(1..=8);
        let (h, w) = (p * rng.gen_range(1..=6), p * rng.gen_range(1..=6));
        let img = Image::new(Array3::from_elem((h, w, 3), 0.25)).map_err(|e| e.to_string())?;
        let seq = patchify(&img, p).map_err(|e| e.to_string())?;
        ensure!(seq.len() == h * w / (p * p), "{h}x{w}/{p}: {} patches", seq.len());
    }
    let cfg = ModelConfig {
        d_v: 8,
        heads: 2,
        ..Default::default()
    };
    for _ in 0..100 {
        let p_v: Vec<u32> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0..262)).collect();
        let gamma_t: Vec<u32> = (0..rng.gen_range(0..16)).map(|_| rng.gen_range(0..262)).collect();
        let m = rng.gen_range(0..8);
        let gamma_v = randn(&mut rng, m, 8);
        let input = assemble_input(&p_v, &gamma_v, &gamma_t, &cfg).map_err(|e| e.to_string())?;
        let (a, b, c) = input.reconstruct();
        ensure!(a == p_v && b == gamma_v && c == gamma_t, "segment map does not round-trip");
        ensure!(input.len() == p_v.len() + gamma_v.nrows() + gamma_t.len() + 4, "length {}", input.len());
    }
    let example = assemble_input(&[1, 2], &Mat::zeros((5, 8)), &[3; 10], &cfg).map_err(|e| e.to_string())?;
    ensure!(example.len() == 21, "2+5+10 layout has length {}", example.len());
    ensure!(example.segments.gamma_v == (4..9), "visual span {:?}", example.segments.gamma_v);
    Ok("100 patch shapes, 100 layouts".into())
}

fn lora() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.gen_range(1..=24);
        let r = rng.gen_range(1..=d);
        let w = randn(&mut rng, d, d);
        let adapter = LoraAdapter {
            a: randn(&mut rng, r, d),
            b: randn(&mut rng, d, r),
            scale: rng.gen_range(0.1..4.0),
        };
        let rows = rng.gen_range(1..=4);
        let x = randn(&mut rng, rows, d);
        let low = lora_apply(&w, &adapter, &x).map_err(|e| e.to_string())?;
        let dense = lora_apply_dense(&w, &adapter, &x).map_err(|e| e.to_string())?;
        worst = low.iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    ensure!(worst < 1e-10, "low-rank vs dense max diff {worst:e}");

    let model = MultimodalModel::new(
        ModelConfig {
            d_v: 16,
            heads: 4,
            max_len: 96,
            seed: 1,
            ..Default::default()
        },
        VisionConfig {
            image_size: 8,
            patch_size: 4,
            width: 8,
            layers: 1,
            heads: 2,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let gamma_v = model.project(&randn(&mut rng, 5, 8)).map_err(|e| e.to_string())?;
    let input = assemble_input(&[1, 2, 3], &gamma_v, &[72, 105, 33], &model.config).map_err(|e| e.to_string())?;
    let on = model.forward(&input, &[97, 98], true).map_err(|e| e.to_string())?;
    let off = model.forward(&input, &[97, 98], false).map_err(|e| e.to_string())?;
    let bits = |m: &Mat| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure!(bits(&on) == bits(&off), "fresh adapters change the logits");
    Ok(format!("max low-rank/dense diff {worst:.1e}; zero-init logits bit-identical"))
}

fn gradient_check() -> Outcome {
    const EPS: f64 = 1e-5;
    let mut model = MultimodalModel::new(
        ModelConfig {
            d_v: 16,
            layers: 2,
            heads: 2,
            max_len: 64,
            lora_rank: 2,
            seed: 13,
            ..Default::default()
        },
        VisionConfig {
            image_size: 8,
            patch_size: 4,
            width: 8,
            layers: 1,
            heads: 2,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    ensure!(model.vision.num_patches() == 4, "N = {}", model.vision.num_patches());
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, 0.3).unwrap();
    // zero B would make every A gradient vanish
    for name in model.params.trainable_names() {
        if name.ends_with(".b") {
            model.params.get_mut(&name).unwrap().mapv_inplace(|_| noise.sample(&mut rng));
        }
    }
    let examples: Vec<TrainExample> = [("ab: yes", StanceLabel::Favor), ("cd: no", StanceLabel::Against)]
        .iter()
        .map(|(text, label)| {
            let pixels = Array3::from_shape_fn((8, 8, 3), |_| rng.gen::<f64>());
            let features = model.image_features(&[Image::new(pixels).unwrap()]).unwrap();
            TrainExample::new(vec![105, 58], features, text.bytes().map(u32::from).collect(), *label)
        })
        .collect();
    let (_, grads) = batch_loss(&model, &examples, true).map_err(|e| e.to_string())?;
    let names: Vec<String> = model
        .params
        .trainable_names()
        .into_iter()
        .filter(|n| n.ends_with(".a") || n.ends_with(".b") || n == PROJECTION)
        .collect();
    ensure!(names.iter().any(|n| n == PROJECTION), "projection is not trainable");
    let mut worst = 0.0f64;
    let mut checked = 0;
    for name in &names {
        let analytic = grads.get(name).ok_or_else(|| format!("no gradient for {name}"))?;
        let (rows, cols) = analytic.dim();
        for r in 0..rows {
            for c in 0..cols {
                let original = model.params.get(name).unwrap()[[r, c]];
                model.params.get_mut(name).unwrap()[[r, c]] = original + EPS;
                let plus = batch_loss(&model, &examples, false).map_err(|e| e.to_string())?.0;
                model.params.get_mut(name).unwrap()[[r, c]] = original - EPS;
                let minus = batch_loss(&model, &examples, false).map_err(|e| e.to_string())?.0;
                model.params.get_mut(name).unwrap()[[r, c]] = original;
                let numeric = (plus - minus) / (2.0 * EPS);
                let a = analytic[[r, c]];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                ensure!(rel < 1e-4, "{name}[{r},{c}]: analytic {a:e} numeric {numeric:e}");
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} entries, worst relative error {worst:.2e}"))
}

fn frozen_conservation() -> Outcome {
    let mut model = MultimodalModel::new(
        ModelConfig {
            d_v: 16,
            heads: 4,
            max_len: 64,
            seed: 3,
            ..Default::default()
        },
        VisionConfig {
            image_size: 8,
            patch_size: 4,
            width: 8,
            layers: 1,
            heads: 2,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let before = model.frozen_hash();
    let projection = model.params.get(PROJECTION).unwrap().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pixels = Array3::from_shape_fn((8, 8, 3), |_| rng.gen::<f64>());
    let features = model.image_features(&[Image::new(pixels).unwrap()]).map_err(|e| e.to_string())?;
    let batch = [TrainExample::new(vec![1], features, vec![104, 105], StanceLabel::Favor)];
    let mut state = TrainState::new(OptimizerConfig::default());
    for _ in 0..200 {
        train_step(&mut model, &batch, &mut state).map_err(|e| e.to_string())?;
    }
    let after = model.frozen_hash();
    ensure!(before == after, "frozen hash changed: {before} -> {after}");
    ensure!(model.params.get(PROJECTION).unwrap() != &projection, "projection did not train");
    Ok(format!("frozen hash {}… unchanged after 200 steps", &after[..12]))
}

fn overfit() -> Outcome {
    let toy = toy_workspace(0);
    let config = toy_config(0);
    let instances = read_instances(&toy.instances).map_err(|e| e.to_string())?;
    let train: Vec<Instance> = instances
        .into_iter()
        .filter(|i| i.target_group == "Tesla" && i.split == Some(Split::Train))
        .collect();
    ensure!(train.len() == 8, "toy train set has {} instances", train.len());
    let mut model = MultimodalModel::new(config.model.clone(), config.vision.clone()).map_err(|e| e.to_string())?;
    let media = MediaSource::new(toy.dir.path().join("images"));
    let prepared = prepare(&model, &train, &media, &config.prompt).map_err(|e| e.to_string())?;
    let examples: Vec<TrainExample> = prepared.iter().map(|p| p.example.clone()).collect();
    let mut state = TrainState::new(OptimizerConfig::default());
    for step in 1..=500 {
        train_step(&mut model, &examples, &mut state).map_err(|e| e.to_string())?;
        if step % 25 == 0 {
            let predictions = predict(&model, &prepared, config.eval.max_new_tokens).map_err(|e| e.to_string())?;
            if predictions.iter().all(|p| Some(p.matched) == p.gold) {
                return Ok(format!("8/8 matched at step {step}"));
            }
        }
    }
    let predictions = predict(&model, &prepared, config.eval.max_new_tokens).map_err(|e| e.to_string())?;
    let correct = predictions.iter().filter(|p| Some(p.matched) == p.gold).count();
    Err(format!("{correct}/8 after 500 steps"))
}

fn ablation_locality() -> Outcome {
    let config = toy_config(0);
    let caption = "a red car parked outside";
    let flags = |omit_caption, omit_case, single_sentence| AblationFlags {
        omit_caption,
        omit_case,
        single_sentence,
    };
    let mut full_bundles = Vec::new();
    let mut ablated_bundles = Vec::new();
    for inst in toy_instances() {
        let render = |f: AblationFlags| {
            let mut template = config.prompt.clone();
            template.ablation = f;
            build_prompt_bundle(&inst, caption, &template).map_err(|e| e.to_string())
        };
        let full = render(flags(false, false, false))?;
        let no_caption = render(flags(true, false, false))?;
        let no_case = render(flags(false, true, false))?;
        let single = render(flags(false, false, true))?;

        let caption_segment = format!("{CAPTION_HEADER}{caption}\n");
        ensure!(
            full.gamma_t.replacen(&caption_segment, "", 1) == no_caption.gamma_t,
            "w/o caption differs outside the caption segment"
        );
        ensure!(
            full.gamma_t.strip_suffix(&format!("\n{}", config.prompt.case_text)) == Some(no_case.gamma_t.as_str()),
            "w/o CoT differs outside the case segment"
        );
        ensure!(!single.conversation_block.contains('\n'), "single-sentence rendered several lines");
        let focus = inst.focus();
        ensure!(
            single.conversation_block == format!("{}: {}", focus.author, focus.text),
            "single-sentence line is {:?}",
            single.conversation_block
        );
        full_bundles.push(full);
        ablated_bundles.push(no_caption);
    }
    let mut ablated = config.clone();
    ablated.prompt.ablation.omit_caption = true;
    ensure!(config.hash() == ablated.hash(), "ablation changes the config hash");
    let p_v = &config.prompt.p_v_text;
    ensure!(
        prompt_hash(p_v, &full_bundles) != prompt_hash(p_v, &ablated_bundles),
        "ablation leaves the prompt hash unchanged"
    );
    Ok(format!("{} instances; only the prompt hash moves", full_bundles.len()))
}

fn protocol_determinism() -> Outcome {
    let toy = toy_workspace(60);
    let (instances, config) = (toy.instances.to_str().unwrap(), toy.config.to_str().unwrap());
    let mut reports = Vec::new();
    for run in ["run1", "run2"] {
        let out = toy.dir.path().join(run);
        let args = [
            "--config", config, "--seed", "3", "eval", "--in", instances, "--mode", "in", "--dest", "tesla", "--out",
            out.to_str().unwrap(),
        ];
        let result = stancebench(&args);
        ensure!(result.status.success(), "eval failed: {}", stderr(&result));
        let read = |f: &str| std::fs::read(out.join(f)).map_err(|e| e.to_string());
        reports.push((read("report.json")?, read("predictions.jsonl")?));
    }
    ensure!(reports[0].0 == reports[1].0, "report.json differs between identical runs");
    ensure!(reports[0].1 == reports[1].1, "predictions differ between identical runs");

    let rejected = stancebench(&[
        "--config", config, "eval", "--in", instances, "--mode", "cross", "--source", "tesla", "--dest", "Tesla",
    ]);
    ensure!(rejected.status.code() == Some(1), "X->X exited with {:?}", rejected.status.code());
    ensure!(stderr(&rejected).contains("error[ProtocolError]"), "X->X stderr: {}", stderr(&rejected));
    Ok("reports byte-identical; Tesla->Tesla rejected".into())
}

fn prediction(inst: &Instance, label: StanceLabel) -> PredictionRecord {
    PredictionRecord {
        instance_id: inst.instance_id.clone(),
        generated_text: label.as_str().into(),
        matched: label,
        gold: inst.gold,
    }
}

fn bootstrap() -> Outcome {
    let gold: Vec<Instance> = synthetic_corpus(40).into_iter().take(100).collect();
    ensure!(gold.len() == 100, "fixture has {} instances", gold.len());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noisy: Vec<PredictionRecord> = gold
        .iter()
        .map(|i| prediction(i, StanceLabel::ALL[rng.gen_range(0..3)]))
        .collect();
    let same = paired_bootstrap(&noisy, &noisy, &gold, 1000, 1).map_err(|e| e.to_string())?;
    ensure!(same.p_value >= 0.95, "identical sets gave p = {}", same.p_value);

    let perfect: Vec<PredictionRecord> = gold.iter().map(|i| prediction(i, i.gold.unwrap())).collect();
    let wrong: Vec<PredictionRecord> = gold
        .iter()
        .map(|i| {
            let g = i.gold.unwrap();
            prediction(i, if g == StanceLabel::Favor { StanceLabel::Against } else { StanceLabel::Favor })
        })
        .collect();
    let separated = paired_bootstrap(&perfect, &wrong, &gold, 1000, 1).map_err(|e| e.to_string())?;
    ensure!(separated.p_value < 0.01, "perfect vs wrong gave p = {}", separated.p_value);
    Ok(format!("p(identical) = {:.3}, p(perfect vs wrong) = {:.3}", same.p_value, separated.p_value))
}
