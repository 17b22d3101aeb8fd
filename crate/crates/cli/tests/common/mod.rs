#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use stancebench_cli::config::RunConfig;
use stancebench_core::corpus::{write_instances, Instance, Split, Utterance, POST_TARGET_GROUP};
use stancebench_core::StanceLabel;

/// Post text, reply text and the reply author's stance.
pub const TOY: [(&str, &str, StanceLabel); 8] = [
    ("love the new car", "great range", StanceLabel::Favor),
    ("the car is ugly", "agreed, awful", StanceLabel::Against),
    ("what time is it", "noon", StanceLabel::None),
    ("best buy of my life", "so fast", StanceLabel::Favor),
    ("recall again, lol", "junk", StanceLabel::Against),
    ("nice weather today", "yes", StanceLabel::None),
    ("charging is a breeze", "true", StanceLabel::Favor),
    ("it broke in a week", "refund it", StanceLabel::Against),
];

pub const TOY_TARGETS: [&str; 2] = ["Tesla", "Bitcoin"];

pub fn utterance(id: &str, author: &str, text: &str, depth: usize, parent: Option<&str>) -> Utterance {
    Utterance {
        id: id.into(),
        author: author.into(),
        text: text.into(),
        parent_id: parent.map(str::to_string),
        depth,
    }
}

/// Writes a `size × size` PNG of seeded uniform noise.
pub fn write_png(path: &Path, size: u32, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = RgbImage::from_fn(size, size, |_, _| Rgb([rng.gen(), rng.gen(), rng.gen()]));
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    img.save(path).unwrap();
}

fn toy_instance(target: &str, split: Split, k: usize) -> Instance {
    let (post, reply, label) = TOY[k];
    let thread_id = format!("{}-{:?}-{k}", target.to_lowercase(), split).to_lowercase();
    Instance {
        instance_id: format!("{thread_id}/c"),
        thread_id,
        target_group: target.into(),
        target: target.into(),
        path: vec![utterance("p", "a", post, 1, None), utterance("c", "b", reply, 2, Some("p"))],
        image_refs: vec![format!("{}{k}.png", target.to_lowercase())],
        gold: Some(label),
        vision_related: Some(k % 2 == 0),
        depth: 2,
        split: Some(split),
    }
}

/// Per target: the eight toy texts in train and again in test, two in val.
///
/// Test instances repeat the train inputs exactly, so a memorising model
/// scores perfectly on them.
pub fn toy_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for target in TOY_TARGETS {
        for k in 0..TOY.len() {
            out.push(toy_instance(target, Split::Train, k));
            out.push(toy_instance(target, Split::Test, k));
        }
        for k in 0..2 {
            out.push(toy_instance(target, Split::Val, k));
        }
    }
    out
}

/// Small model and compact prompt template that memorise the toy corpus quickly.
pub fn toy_config(steps: usize) -> RunConfig {
    let mut c = RunConfig::default();
    c.model.d_v = 64;
    c.model.max_len = 256;
    c.vision.image_size = 16;
    c.vision.patch_size = 8;
    c.train.lr = 1e-2;
    c.train.steps = steps;
    c.train.batch = 8;
    c.prompt.task_tag = "[sd]".into();
    c.prompt.p_t_template = "{name} on {target}?".into();
    c.prompt.case_text = "eg: favor".into();
    c.prompt.p_v_text = "img:".into();
    c.eval.max_new_tokens = 10;
    c
}

pub struct Toy {
    pub dir: tempfile::TempDir,
    pub instances: PathBuf,
    pub config: PathBuf,
}

/// Writes the toy corpus, its images and a run configuration into a temp dir.
pub fn toy_workspace(steps: usize) -> Toy {
    let dir = tempfile::tempdir().unwrap();
    let instances = dir.path().join("instances.jsonl");
    write_instances(&instances, &toy_instances()).unwrap();
    for (t, target) in TOY_TARGETS.iter().enumerate() {
        for k in 0..TOY.len() {
            let path = dir.path().join("images").join(format!("{}{k}.png", target.to_lowercase()));
            write_png(&path, 16, (t * 100 + k) as u64);
        }
    }
    let config = dir.path().join("config.json");
    std::fs::write(&config, serde_json::to_string_pretty(&toy_config(steps)).unwrap()).unwrap();
    Toy { dir, instances, config }
}

/// `threads` synthetic Tesla threads of 1 to 8 instances each.
pub fn synthetic_corpus(threads: usize) -> Vec<Instance> {
    let mut out = Vec::new();
    for t in 0..threads {
        let thread_id = format!("t{t:03}");
        let size = 1 + (t * 7) % 8;
        for k in 0..size {
            let path = vec![
                utterance("p", "op", "post text", 1, None),
                utterance(&format!("c{k}"), "u", "reply", 2, Some("p")),
            ];
            out.push(Instance {
                instance_id: format!("{thread_id}/c{k}"),
                thread_id: thread_id.clone(),
                target_group: "Tesla".into(),
                target: "Tesla".into(),
                path,
                image_refs: vec![],
                gold: Some(StanceLabel::ALL[(t + k) % 3]),
                vision_related: Some(false),
                depth: 2,
                split: None,
            });
        }
    }
    out
}

#[derive(Deserialize)]
pub struct LabelPercent {
    pub against: f64,
    pub favor: f64,
    pub none: f64,
}

impl LabelPercent {
    pub fn get(&self, label: StanceLabel) -> f64 {
        match label {
            StanceLabel::Against => self.against,
            StanceLabel::Favor => self.favor,
            StanceLabel::None => self.none,
        }
    }
}

#[derive(Deserialize)]
pub struct TargetCounts {
    pub name: String,
    pub against: usize,
    pub favor: usize,
    pub none: usize,
    pub vision: usize,
    pub percent: LabelPercent,
    pub reported_vision_percent: f64,
}

#[derive(Deserialize)]
pub struct TotalCounts {
    pub count: usize,
    pub vision: usize,
    pub percent: LabelPercent,
    pub vision_percent: f64,
}

#[derive(Deserialize)]
pub struct TableCounts {
    pub targets: Vec<TargetCounts>,
    pub total: TotalCounts,
    pub depth_counts: Vec<usize>,
}

pub fn table_counts() -> TableCounts {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/table_counts.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// One instance per row of the label and depth count fixture.
///
/// Depths are dealt in ascending order over the targets in fixture order,
/// which leaves the post-as-target group with depths of two or more.
pub fn table_instances(counts: &TableCounts) -> Vec<Instance> {
    let mut depths = counts
        .depth_counts
        .iter()
        .enumerate()
        .flat_map(|(d, &n)| std::iter::repeat(d + 1).take(n));
    let mut out = Vec::new();
    for t in &counts.targets {
        let labels = [
            (StanceLabel::Against, t.against),
            (StanceLabel::Favor, t.favor),
            (StanceLabel::None, t.none),
        ];
        let mut i = 0;
        for (label, n) in labels {
            for _ in 0..n {
                let depth = depths.next().expect("depth counts cover every row");
                let thread_id = format!("{}-{i}", t.name);
                let path: Vec<Utterance> = (1..=depth)
                    .map(|d| utterance(&format!("u{d}"), "a", "one two three", d, None))
                    .collect();
                out.push(Instance {
                    instance_id: format!("{thread_id}/u{depth}"),
                    thread_id,
                    target_group: t.name.clone(),
                    target: t.name.clone(),
                    path,
                    image_refs: vec![],
                    gold: Some(label),
                    vision_related: Some(i < t.vision),
                    depth,
                    split: None,
                });
                i += 1;
            }
        }
    }
    debug_assert!(out
        .iter()
        .filter(|i| i.target_group == POST_TARGET_GROUP)
        .all(|i| i.depth >= 2));
    out
}

pub fn stancebench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stancebench"))
        .args(args)
        .env_remove("STANCEBENCH_DATA_DIR")
        .output()
        .expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}
