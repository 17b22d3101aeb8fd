use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use stancebench_cli::config::RunConfig;
use stancebench_cli::manifest::{corpus_hash, manifest_path_for, write_json, RunManifest};
use stancebench_cli::pipeline::{prepare, prompt_bundle, prompt_hash, train, MediaSource};
use stancebench_cli::protocol::{resolve_target, run_protocol, Mode, ProtocolReport, ProtocolSpec};
use stancebench_cli::WorkbenchError;
use stancebench_core::annotation::{AnnotationStore, SystemClock};
use stancebench_core::corpus::{
    apply_preprocess_filters, compute_corpus_stats, flatten_to_instances, parse_thread_file, read_instances,
    split_corpus, write_instances, DropReason, FilterConfig, Instance, Split, SplitRatios, TargetSpec,
};
use stancebench_core::eval::{paired_bootstrap, read_predictions, render_depth_table, render_report_table, write_predictions};
use stancebench_core::prompt::{load_captions, AblationFlags};
use stancebench_model::checkpoint::save_checkpoint;
use stancebench_model::MultimodalModel;

#[derive(Parser)]
#[command(name = "stancebench", version, about = "Multimodal conversational stance-detection workbench")]
struct Cli {
    /// Root for relative paths.
    #[arg(long, global = true, env = "STANCEBENCH_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Run configuration (JSON); absent keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `model.seed`; also seeds splitting and resampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Tesla,
    Bitcoin,
    #[value(name = "post-t")]
    PostT,
    Custom,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AblationArg {
    NoCaption,
    NoCot,
    SingleSentence,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterPreset {
    Default,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    In,
    Cross,
}

#[derive(clap::Args)]
struct MediaArgs {
    /// Image root (default: `images/` next to the instance file).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Stored captions, JSONL of {image_ref, caption} (default: `captions.jsonl` next to the instance file, if present).
    #[arg(long)]
    captions: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Filter raw threads and flatten them into stance instances.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "default")]
        filters: FilterPreset,
        #[arg(long, value_enum)]
        target: Option<TargetArg>,
        /// Target name for `--target custom`.
        #[arg(long)]
        target_name: Option<String>,
        /// Where thread image refs resolve (default: the input file's directory).
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Assign thread-disjoint train/val/test splits.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Train,val,test fractions.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        ratios: Option<Vec<f64>>,
    },
    /// Label, vision and depth statistics.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON object mapping target to an externally reported vision-related percentage.
        #[arg(long)]
        reported_vision: Option<PathBuf>,
    },
    /// Serve the annotation API.
    AnnotateServe {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[command(flatten)]
        media: MediaArgs,
        /// Append-only record log (default: `annotations.jsonl` next to the instance file).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Merge an annotation log into gold labels.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the textual model input of every instance.
    Prompts {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',')]
        ablation: Vec<AblationArg>,
        #[command(flatten)]
        media: MediaArgs,
    },
    /// Fine-tune adapters on one target's train split and save a checkpoint.
    Train {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, value_enum, value_delimiter = ',')]
        ablation: Vec<AblationArg>,
        #[command(flatten)]
        media: MediaArgs,
    },
    /// Train and score under the in-target or cross-target protocol.
    Eval {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Output directory; the JSON report goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "in")]
        mode: ModeArg,
        #[arg(long)]
        source: Option<String>,
        /// Destination target (`--target` is an alias).
        #[arg(long, alias = "target")]
        dest: String,
        #[arg(long, value_enum, value_delimiter = ',')]
        ablation: Vec<AblationArg>,
        #[command(flatten)]
        media: MediaArgs,
    },
    /// Paired bootstrap test that system A beats system B.
    Significance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Gold instances.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        resamples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the tables of a saved evaluation report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

struct Ctx {
    data_dir: Option<PathBuf>,
    seed: Option<u64>,
    config: RunConfig,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn instances_path(&self, input: Option<&PathBuf>) -> PathBuf {
        self.path(input.map(PathBuf::as_path).unwrap_or(Path::new("instances.jsonl")))
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.config.model.seed)
    }

    fn media(&self, instances_file: &Path, args: &MediaArgs) -> Result<MediaSource> {
        let dir = instances_file.parent().unwrap_or(Path::new("."));
        let mut media = MediaSource::new(args.images.as_ref().map(|p| self.path(p)).unwrap_or_else(|| dir.join("images")));
        let captions = match &args.captions {
            Some(p) => Some(self.path(p)),
            None => Some(dir.join("captions.jsonl")).filter(|p| p.exists()),
        };
        if let Some(path) = captions {
            media.captions = load_captions(&path).map_err(WorkbenchError::from)?;
        }
        Ok(media)
    }
}

fn ablation_flags(args: &[AblationArg]) -> AblationFlags {
    AblationFlags {
        omit_caption: args.contains(&AblationArg::NoCaption),
        omit_case: args.contains(&AblationArg::NoCot),
        single_sentence: args.contains(&AblationArg::SingleSentence),
    }
}

fn load_instances(path: &Path) -> Result<Vec<Instance>> {
    Ok(read_instances(path).map_err(WorkbenchError::from)?)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(WorkbenchError::io(parent))?;
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serialises"));
}

#[derive(Serialize)]
struct IngestReport {
    threads: usize,
    kept: usize,
    dropped: usize,
    drop_reasons: BTreeMap<DropReason, usize>,
    instances: usize,
    missing_images: Vec<String>,
}

fn permissive_filters() -> FilterConfig {
    FilterConfig {
        min_comments: 0,
        min_post_words: 0,
        max_post_words: usize::MAX,
        min_latin_ratio: 0.0,
        require_reviewer_agreement: false,
        require_image: false,
    }
}

fn ingest(
    ctx: &Ctx,
    input: &Path,
    out: &Path,
    filters: FilterPreset,
    target: Option<TargetArg>,
    target_name: Option<&str>,
    images: Option<&Path>,
) -> Result<()> {
    let mut manifest = RunManifest::begin("ingest");
    let threads = parse_thread_file(input).map_err(WorkbenchError::from)?;
    let rules = match filters {
        FilterPreset::Default => ctx.config.filters.clone(),
        FilterPreset::None => permissive_filters(),
    };
    let wanted: Option<String> = match target {
        Some(TargetArg::Tesla) => Some("Tesla".into()),
        Some(TargetArg::Bitcoin) => Some("Bitcoin".into()),
        Some(TargetArg::Custom) => Some(
            target_name
                .ok_or_else(|| WorkbenchError::Config("--target custom needs --target-name".into()))?
                .to_string(),
        ),
        Some(TargetArg::PostT) | None => None,
    };
    let image_src = images
        .map(Path::to_path_buf)
        .unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(out.join("images")).map_err(WorkbenchError::io(out))?;

    let mut report = IngestReport {
        threads: threads.len(),
        kept: 0,
        dropped: 0,
        drop_reasons: BTreeMap::new(),
        instances: 0,
        missing_images: Vec::new(),
    };
    let mut instances = Vec::new();
    for thread in &threads {
        if let Some(w) = &wanted {
            if !thread.target_hint.eq_ignore_ascii_case(w) {
                continue;
            }
        }
        let decision = apply_preprocess_filters(thread, &rules);
        if !decision.keep {
            report.dropped += 1;
            for r in decision.reasons {
                *report.drop_reasons.entry(r).or_default() += 1;
            }
            continue;
        }
        report.kept += 1;
        let spec = match (target, &wanted) {
            (Some(TargetArg::PostT), _) => TargetSpec::PostT,
            (_, Some(name)) => TargetSpec::Named(name.clone()),
            (_, None) => TargetSpec::Named(thread.target_hint.clone()),
        };
        instances.extend(flatten_to_instances(thread, &spec));
        for r in &thread.image_refs {
            let (src, dst) = (image_src.join(r), out.join("images").join(r));
            if src.is_file() {
                create_parent(&dst)?;
                fs::copy(&src, &dst).map_err(WorkbenchError::io(&src))?;
            } else {
                log::warn!("image {} not found", src.display());
                report.missing_images.push(r.clone());
            }
        }
    }
    instances.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    report.instances = instances.len();
    let path = out.join("instances.jsonl");
    write_instances(&path, &instances).map_err(WorkbenchError::from)?;
    write_json(&out.join("ingest_report.json"), &report)?;
    println!(
        "kept {} of {} threads ({} instances); dropped {}",
        report.kept, report.threads, report.instances, report.dropped
    );
    for (reason, n) in &report.drop_reasons {
        println!("  {reason:?}: {n}");
    }
    manifest.corpus_hash = Some(corpus_hash(&instances));
    manifest.outputs = vec![path.display().to_string(), out.join("ingest_report.json").display().to_string()];
    manifest.finish(&manifest_path_for(&path))?;
    Ok(())
}

fn split(ctx: &Ctx, input: &Path, out: &Path, ratios: Option<Vec<f64>>) -> Result<()> {
    let mut manifest = RunManifest::begin("split");
    let mut instances = load_instances(input)?;
    let ratios = match ratios.as_deref() {
        Some([train, val, test]) => SplitRatios {
            train: *train,
            val: *val,
            test: *test,
        },
        _ => SplitRatios::default(),
    };
    let seed = ctx.seed();
    let assignment = split_corpus(&instances, ratios, seed).map_err(WorkbenchError::from)?;
    assignment.apply(&mut instances);
    create_parent(out)?;
    write_instances(out, &instances).map_err(WorkbenchError::from)?;
    let mut per_target: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    for inst in &instances {
        if let Some(s) = inst.split {
            per_target.entry(&inst.target_group).or_default()[s.index()] += 1;
        }
    }
    for (target, [tr, va, te]) in per_target {
        println!("{target}: train {tr}, val {va}, test {te}");
    }
    manifest.seed = Some(seed);
    manifest.corpus_hash = Some(corpus_hash(&instances));
    manifest.outputs = vec![out.display().to_string()];
    manifest.finish(&manifest_path_for(out))?;
    Ok(())
}

fn stats(input: &Path, out: Option<&Path>, reported: Option<&Path>) -> Result<()> {
    let instances = load_instances(input)?;
    let stats = compute_corpus_stats(&instances).map_err(WorkbenchError::from)?;
    let discrepancies = match reported {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(WorkbenchError::io(p))?;
            let map: BTreeMap<String, f64> = serde_json::from_str(&text)
                .map_err(|e| WorkbenchError::Config(format!("{}: {e}", p.display())))?;
            stats.vision_discrepancies(&map, 0.01)
        }
        None => Vec::new(),
    };
    let value = serde_json::json!({ "stats": stats, "vision_discrepancies": discrepancies });
    match out {
        Some(path) => {
            create_parent(path)?;
            write_json(path, &value)?;
        }
        None => print_json(&value),
    }
    for d in &discrepancies {
        eprintln!(
            "warning: {} vision-related {} / {} = {:.2}% but reported {:.2}%",
            d.target, d.count, d.total, d.computed_percent, d.reported_percent
        );
    }
    Ok(())
}

fn annotate_serve(ctx: &Ctx, input: &Path, port: u16, media: &MediaArgs, log: Option<&Path>) -> Result<()> {
    let instances = load_instances(input)?;
    let media = ctx.media(input, media)?;
    let log_path = log
        .map(Path::to_path_buf)
        .unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).join("annotations.jsonl"));
    let store = AnnotationStore::open(instances, &log_path, Arc::new(SystemClock))
        .map_err(WorkbenchError::from)?
        .with_captions(media.captions.clone());
    let state = stancebench_server::AppState {
        store: Arc::new(store),
        image_root: media.image_root,
    };
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime
        .block_on(stancebench_server::serve(addr, state))
        .map_err(|e| anyhow!(WorkbenchError::Io { path: log_path, source: e }))
}

fn aggregate(input: &Path, annotations: &Path, out: &Path) -> Result<()> {
    let mut manifest = RunManifest::begin("aggregate");
    let mut instances = load_instances(input)?;
    if !annotations.is_file() {
        return Err(WorkbenchError::Io {
            path: annotations.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "annotation log not found"),
        }
        .into());
    }
    let store = AnnotationStore::open(instances.clone(), annotations, Arc::new(SystemClock)).map_err(WorkbenchError::from)?;
    let gold = store.gold_labels();
    for inst in &mut instances {
        if let Some(&(label, vision)) = gold.get(&inst.instance_id) {
            inst.gold = Some(label);
            inst.vision_related = Some(vision);
        }
    }
    create_parent(out)?;
    write_instances(out, &instances).map_err(WorkbenchError::from)?;
    let progress = store.progress();
    println!(
        "gold labels: {} of {} instances; awaiting tie-break {}; unresolved {}",
        gold.len(),
        instances.len(),
        progress.awaiting_tie_break.len(),
        progress.unresolved.len()
    );
    manifest.corpus_hash = Some(corpus_hash(&instances));
    manifest.outputs = vec![out.display().to_string()];
    manifest.finish(&manifest_path_for(out))?;
    Ok(())
}

#[derive(Serialize)]
struct PromptLine<'a> {
    instance_id: &'a str,
    p_v: &'a str,
    caption: &'a str,
    gamma_t: &'a str,
}

fn prompts(ctx: &Ctx, input: &Path, out: &Path, ablation: &[AblationArg], media: &MediaArgs) -> Result<()> {
    let mut manifest = RunManifest::begin("prompts");
    let instances = load_instances(input)?;
    let media = ctx.media(input, media)?;
    let mut template = ctx.config.prompt.clone();
    template.ablation = ablation_flags(ablation);
    let bundles = instances
        .iter()
        .map(|i| prompt_bundle(i, &media, &template))
        .collect::<Result<Vec<_>, _>>()?;
    create_parent(out)?;
    let mut w = std::io::BufWriter::new(fs::File::create(out).map_err(WorkbenchError::io(out))?);
    for (inst, b) in instances.iter().zip(&bundles) {
        let line = PromptLine {
            instance_id: &inst.instance_id,
            p_v: &template.p_v_text,
            caption: &b.caption,
            gamma_t: &b.gamma_t,
        };
        writeln!(w, "{}", serde_json::to_string(&line).expect("line serialises")).map_err(WorkbenchError::io(out))?;
    }
    w.flush().map_err(WorkbenchError::io(out))?;
    let hash = prompt_hash(&template.p_v_text, &bundles);
    println!("{} prompts, prompt hash {hash}", bundles.len());
    manifest.config_hash = Some(ctx.config.hash());
    manifest.corpus_hash = Some(corpus_hash(&instances));
    manifest.outputs = vec![out.display().to_string()];
    manifest.finish(&manifest_path_for(out))?;
    Ok(())
}

fn train_cmd(ctx: &Ctx, input: &Path, out: &Path, target: &str, ablation: &[AblationArg], media: &MediaArgs) -> Result<()> {
    let mut manifest = RunManifest::begin("train");
    let instances = load_instances(input)?;
    let media = ctx.media(input, media)?;
    let mut config = ctx.config.clone();
    config.model.seed = ctx.seed();
    config.prompt.ablation = ablation_flags(ablation);
    let group = resolve_target(&instances, target)?;
    let train_set: Vec<Instance> = instances
        .iter()
        .filter(|i| i.target_group == group && i.split == Some(Split::Train) && i.gold.is_some())
        .cloned()
        .collect();
    if train_set.is_empty() {
        return Err(WorkbenchError::EmptySelection {
            target: group,
            scope: "the train split".into(),
        }
        .into());
    }
    let mut model = MultimodalModel::new(config.model.clone(), config.vision.clone()).map_err(WorkbenchError::from)?;
    let prepared = prepare(&model, &train_set, &media, &config.prompt)?;
    let examples: Vec<_> = prepared.into_iter().map(|p| p.example).collect();
    let state = train(&mut model, &examples, &config.train, config.model.seed)?;
    let final_loss = state.loss_history.last().copied();
    create_parent(out)?;
    let meta = serde_json::json!({ "config": config, "target": group, "steps": state.step, "final_loss": final_loss });
    save_checkpoint(out, &model.params, meta).map_err(WorkbenchError::from)?;
    println!(
        "trained {} steps on {} {} instances; final loss {}",
        state.step,
        examples.len(),
        group,
        final_loss.map(|l| format!("{l:.4}")).unwrap_or_else(|| "n/a".into())
    );
    manifest.seed = Some(config.model.seed);
    manifest.config_hash = Some(config.hash());
    manifest.corpus_hash = Some(corpus_hash(&instances));
    manifest.outputs = vec![out.display().to_string()];
    manifest.finish(&manifest_path_for(out))?;
    Ok(())
}

fn report_text(report: &ProtocolReport) -> String {
    let m = &report.manifest;
    let title = match m.mode {
        Mode::InTarget => format!("in-target {} (seed {})", m.dest, m.seed),
        Mode::CrossTarget => format!("cross-target {} -> {} (seed {})", m.source, m.dest, m.seed),
    };
    format!(
        "{}\n{}",
        render_report_table(&title, &report.scores),
        render_depth_table(&report.depth)
    )
}

#[allow(clippy::too_many_arguments)]
fn eval_cmd(
    ctx: &Ctx,
    input: &Path,
    out: Option<&Path>,
    mode: ModeArg,
    source: Option<String>,
    dest: String,
    ablation: &[AblationArg],
    media: &MediaArgs,
) -> Result<()> {
    let mut manifest = RunManifest::begin("eval");
    let instances = load_instances(input)?;
    let media = ctx.media(input, media)?;
    let mut config = ctx.config.clone();
    config.model.seed = ctx.seed();
    config.prompt.ablation = ablation_flags(ablation);
    let spec = ProtocolSpec {
        mode: match mode {
            ModeArg::In => Mode::InTarget,
            ModeArg::Cross => Mode::CrossTarget,
        },
        source,
        dest,
    };
    let run = run_protocol(&instances, &media, &config, &spec)?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(WorkbenchError::io(dir))?;
            let files = [
                dir.join("report.json"),
                dir.join("report.txt"),
                dir.join("predictions.jsonl"),
            ];
            write_json(&files[0], &run.report)?;
            fs::write(&files[1], report_text(&run.report)).map_err(WorkbenchError::io(&files[1]))?;
            write_predictions(&files[2], &run.predictions).map_err(WorkbenchError::from)?;
            print!("{}", report_text(&run.report));
            manifest.seed = Some(config.model.seed);
            manifest.config_hash = Some(run.report.manifest.config_hash.clone());
            manifest.corpus_hash = Some(run.report.manifest.corpus_hash.clone());
            manifest.outputs = files.iter().map(|p| p.display().to_string()).collect();
            manifest.finish(&dir.join("manifest.json"))?;
        }
        None => print_json(&run.report),
    }
    Ok(())
}

fn significance(ctx: &Ctx, a: &Path, b: &Path, input: &Path, resamples: Option<usize>, out: Option<&Path>) -> Result<()> {
    let preds_a = read_predictions(a).map_err(WorkbenchError::from)?;
    let preds_b = read_predictions(b).map_err(WorkbenchError::from)?;
    let ids: std::collections::BTreeSet<&str> = preds_a.iter().map(|p| p.instance_id.as_str()).collect();
    let gold: Vec<Instance> = load_instances(input)?
        .into_iter()
        .filter(|i| ids.contains(i.instance_id.as_str()))
        .collect();
    let resamples = resamples.unwrap_or(ctx.config.eval.resamples);
    let result = paired_bootstrap(&preds_a, &preds_b, &gold, resamples, ctx.seed()).map_err(WorkbenchError::from)?;
    match out {
        Some(path) => {
            create_parent(path)?;
            write_json(path, &result)?;
        }
        None => print_json(&result),
    }
    Ok(())
}

fn report(input: &Path) -> Result<()> {
    let text = fs::read_to_string(input).map_err(WorkbenchError::io(input))?;
    let report: ProtocolReport =
        serde_json::from_str(&text).map_err(|e| WorkbenchError::Config(format!("{}: {e}", input.display())))?;
    print!("{}", report_text(&report));
    let m = &report.manifest;
    println!("config {} corpus {} prompts {}", m.config_hash, m.corpus_hash, m.prompt_hash);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => {
            let path = match &cli.data_dir {
                Some(root) if p.is_relative() => root.join(p),
                _ => p.clone(),
            };
            RunConfig::load(&path)?
        }
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        data_dir: cli.data_dir,
        seed: cli.seed,
        config,
    };
    match cli.command {
        Command::Ingest {
            input,
            out,
            filters,
            target,
            target_name,
            images,
        } => ingest(
            &ctx,
            &ctx.path(&input),
            &ctx.path(&out),
            filters,
            target,
            target_name.as_deref(),
            images.map(|p| ctx.path(&p)).as_deref(),
        ),
        Command::Split { input, out, ratios } => split(&ctx, &ctx.path(&input), &ctx.path(&out), ratios),
        Command::Stats {
            input,
            out,
            reported_vision,
        } => stats(
            &ctx.path(&input),
            out.map(|p| ctx.path(&p)).as_deref(),
            reported_vision.map(|p| ctx.path(&p)).as_deref(),
        ),
        Command::AnnotateServe { input, port, media, log } => {
            annotate_serve(&ctx, &ctx.path(&input), port, &media, log.map(|p| ctx.path(&p)).as_deref())
        }
        Command::Aggregate { input, annotations, out } => {
            aggregate(&ctx.path(&input), &ctx.path(&annotations), &ctx.path(&out))
        }
        Command::Prompts {
            input,
            out,
            ablation,
            media,
        } => prompts(&ctx, &ctx.path(&input), &ctx.path(&out), &ablation, &media),
        Command::Train {
            input,
            out,
            target,
            ablation,
            media,
        } => train_cmd(&ctx, &ctx.instances_path(input.as_ref()), &ctx.path(&out), &target, &ablation, &media),
        Command::Eval {
            input,
            out,
            mode,
            source,
            dest,
            ablation,
            media,
        } => eval_cmd(
            &ctx,
            &ctx.instances_path(input.as_ref()),
            out.map(|p| ctx.path(&p)).as_deref(),
            mode,
            source,
            dest,
            &ablation,
            &media,
        ),
        Command::Significance {
            a,
            b,
            input,
            resamples,
            out,
        } => significance(
            &ctx,
            &ctx.path(&a),
            &ctx.path(&b),
            &ctx.path(&input),
            resamples,
            out.map(|p| ctx.path(&p)).as_deref(),
        ),
        Command::Report { input } => report(&ctx.path(&input)),
    }
}

/// Category of the first workbench error in the chain.
fn category(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| e.downcast_ref::<WorkbenchError>())
        .map(WorkbenchError::name)
        .unwrap_or("Internal")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}").split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("error[{}]: {message}", category(&err));
            ExitCode::from(1)
        }
    }
}
