mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use lingprobe::classify::{ModelSetting, Sources};
use lingprobe::corpus::load_corpus;
use lingprobe::embio::read_embeddings;
use lingprobe::features::{read_feature_csv, FeatureTable, IcuLexicon};
use lingprobe::pipeline::{
    classify_settings, feature_csv, prepare_corpus, probe_layers, probe_results_csv,
    LayerSelection, PipelineConfig, ProbeStores,
};
use lingprobe::probing::{bigram_shift_corpus, build_probing_dataset, probe_report, ProbingTask};
use serde::Deserialize;

use manifest::RunRecord;

const PROBE_RESULTS: &str = "probe_results.csv";
const PROBE_REPORT_TXT: &str = "probe_report.txt";
const PROBE_REPORT_CSV: &str = "probe_report.csv";
const CLASSIFIER_REPORT_TXT: &str = "classifier_report.txt";
const CLASSIFIER_REPORT_CSV: &str = "classifier_report.csv";
const CLASSIFIER_OUTCOMES: &str = "classifier_outcomes.json";
const BIGRAM_CORPUS: &str = "bigram_shift_corpus.jsonl";

/// Probing and AD classification on exported sentence embeddings.
#[derive(Debug, Parser)]
#[command(name = "lingprobe", version)]
struct Cli {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with pipeline settings and any of the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes the 119 features of every utterance as CSV.
    ExtractFeatures {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Word list, one per line; the bundled list otherwise.
        #[arg(long)]
        icu_words: Option<PathBuf>,
    },
    /// Writes a probing dataset as JSON Lines.
    BuildProbe {
        /// Task name or `all`.
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Trains probes and writes per-layer results and the summary table.
    TrainProbe {
        /// Task name or `all`.
        #[arg(long)]
        task: Option<String>,
        /// 1-based layer or `all`.
        #[arg(long)]
        layer: Option<String>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Embeddings of the BiGramShift corpus written by build-probe.
        #[arg(long)]
        bigram_embeddings: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Trains and evaluates AD classifiers.
    TrainClassifier {
        /// Setting name or `all`.
        #[arg(long)]
        setting: Option<String>,
        /// 1-based embedding layer; the last one otherwise.
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Prints the report tables found in an output directory.
    Report {
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Config file contents: pipeline settings plus defaults for flags.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    #[serde(flatten)]
    pipeline: PipelineConfig,
    corpus: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    bigram_embeddings: Option<PathBuf>,
    features: Option<PathBuf>,
    icu_words: Option<PathBuf>,
    out: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    task: Option<String>,
    layer: Option<String>,
    setting: Option<String>,
}

const FLAG_KEYS: [&str; 10] = [
    "corpus",
    "embeddings",
    "bigram_embeddings",
    "features",
    "icu_words",
    "out",
    "out_dir",
    "task",
    "layer",
    "setting",
];

fn load_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("config file {} not readable", path.display()))?;
    let table: toml::Table =
        toml::from_str(&text).with_context(|| format!("config file {}", path.display()))?;
    let known = serde_json::to_value(PipelineConfig::default())?;
    let known = known.as_object().expect("config is an object");
    if let Some(key) = table
        .keys()
        .find(|k| !known.contains_key(*k) && !FLAG_KEYS.contains(&k.as_str()))
    {
        bail!("config file {}: unknown key {key:?}", path.display());
    }
    let mut cfg: FileConfig =
        toml::from_str(&text).with_context(|| format!("config file {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [
        &mut cfg.corpus,
        &mut cfg.embeddings,
        &mut cfg.bigram_embeddings,
        &mut cfg.features,
        &mut cfg.icu_words,
        &mut cfg.out,
        &mut cfg.out_dir,
    ] {
        if let Some(rel) = p.as_mut().filter(|p| p.is_relative()) {
            *rel = base.join(&*rel);
        }
    }
    cfg.pipeline.split_ratios.validate()?;
    Ok(cfg)
}

fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| anyhow!("missing --{name} (flag or config key {:?})", name.replace('-', "_")))
}

fn existing(path: PathBuf, role: &str) -> Result<PathBuf> {
    if !path.is_file() {
        bail!("{role} file not found: {}", path.display());
    }
    Ok(path)
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating output directory {}", path.display()))
}

fn parse_tasks(arg: &str) -> Result<Vec<ProbingTask>> {
    if arg.eq_ignore_ascii_case("all") {
        return Ok(ProbingTask::ALL.to_vec());
    }
    Ok(vec![arg.parse::<ProbingTask>()?])
}

fn parse_settings(arg: &str) -> Result<Vec<ModelSetting>> {
    if arg == "all" {
        return Ok(ModelSetting::ALL.to_vec());
    }
    Ok(vec![arg.parse::<ModelSetting>()?])
}

fn probe_file_name(task: ProbingTask) -> String {
    format!("probe_{}.jsonl", task.name())
}

fn extract_features(
    cfg: &PipelineConfig,
    corpus: PathBuf,
    out: PathBuf,
    icu_words: Option<PathBuf>,
) -> Result<()> {
    let corpus_path = existing(corpus, "corpus")?;
    let icu_path = icu_words.map(|p| existing(p, "ICU word list")).transpose()?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }

    let mut run = RunRecord::new("extract-features", cfg);
    run.input("corpus", &corpus_path)?;
    let lexicon = match &icu_path {
        Some(p) => {
            run.input("icu_words", p)?;
            IcuLexicon::from_file(p)?
        }
        None => IcuLexicon::bundled(),
    };
    let corpus = prepare_corpus(&load_corpus(&corpus_path)?, cfg)?;
    let (table, _) = FeatureTable::from_corpus(&corpus, lexicon)?;
    run.write_artifact(&out, feature_csv(&table)?.as_bytes())
}

fn build_probe(cfg: &PipelineConfig, task: String, corpus: PathBuf, out_dir: PathBuf) -> Result<()> {
    let tasks = parse_tasks(&task)?;
    let corpus_path = existing(corpus, "corpus")?;
    ensure_dir(&out_dir)?;

    let mut run = RunRecord::new("build-probe", cfg);
    run.arg("task", &task);
    run.input("corpus", &corpus_path)?;
    let corpus = prepare_corpus(&load_corpus(&corpus_path)?, cfg)?;
    let probe_cfg = cfg.probe_config();
    for task in tasks {
        let dataset = build_probing_dataset(task, &corpus, &probe_cfg)?;
        let mut buf = Vec::new();
        dataset.write_jsonl(&mut buf)?;
        run.write_artifact(&out_dir.join(probe_file_name(task)), &buf)?;
        if task == ProbingTask::BiGramShift {
            let derived = bigram_shift_corpus(&corpus, &dataset)?;
            let mut buf = Vec::new();
            lingprobe::corpus::write_corpus(&derived, &mut buf)?;
            run.write_artifact(&out_dir.join(BIGRAM_CORPUS), &buf)?;
        }
    }
    Ok(())
}

struct ProbeArgs {
    task: String,
    layer: String,
    corpus: PathBuf,
    embeddings: PathBuf,
    bigram_embeddings: Option<PathBuf>,
    out_dir: PathBuf,
}

fn train_probe(cfg: &PipelineConfig, args: ProbeArgs) -> Result<()> {
    let mut tasks = parse_tasks(&args.task)?;
    let layers: LayerSelection = args.layer.parse()?;
    let corpus_path = existing(args.corpus, "corpus")?;
    let emb_path = existing(args.embeddings, "embeddings")?;
    let bigram_path = args
        .bigram_embeddings
        .map(|p| existing(p, "bigram embeddings"))
        .transpose()?;
    if bigram_path.is_none() {
        if tasks == [ProbingTask::BiGramShift] {
            bail!("task BiGramShift needs --bigram-embeddings");
        }
        if tasks.contains(&ProbingTask::BiGramShift) {
            eprintln!("note: skipping BiGramShift without --bigram-embeddings");
            tasks.retain(|&t| t != ProbingTask::BiGramShift);
        }
    }
    ensure_dir(&args.out_dir)?;

    let mut run = RunRecord::new("train-probe", cfg);
    run.arg("task", &args.task);
    run.arg("layer", &args.layer);
    run.input("corpus", &corpus_path)?;
    run.input("embeddings", &emb_path)?;
    if let Some(p) = &bigram_path {
        run.input("bigram_embeddings", p)?;
    }
    let corpus = prepare_corpus(&load_corpus(&corpus_path)?, cfg)?;
    let store = read_embeddings(&emb_path)?;
    let bigram = bigram_path.as_ref().map(read_embeddings).transpose()?;
    let stores = ProbeStores {
        main: &store,
        bigram: bigram.as_ref(),
    };
    let results = probe_layers(&corpus, stores, &tasks, layers, cfg)?;
    let report = probe_report(&results);

    run.write_artifact(&args.out_dir.join(PROBE_RESULTS), probe_results_csv(&results)?.as_bytes())?;
    let text = report.render_text();
    run.write_artifact(&args.out_dir.join(PROBE_REPORT_TXT), text.as_bytes())?;
    run.write_artifact(&args.out_dir.join(PROBE_REPORT_CSV), report.render_csv()?.as_bytes())?;
    print!("{text}");
    Ok(())
}

struct ClassifierArgs {
    setting: String,
    layer: Option<usize>,
    corpus: PathBuf,
    features: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    out_dir: PathBuf,
}

fn train_classifier(cfg: &PipelineConfig, args: ClassifierArgs) -> Result<()> {
    let settings = parse_settings(&args.setting)?;
    let corpus_path = existing(args.corpus, "corpus")?;
    let need_features = settings.iter().any(|s| s.needs_features());
    let need_embeddings = settings.iter().any(|s| s.needs_embeddings());
    let features_path = match (need_features, args.features) {
        (true, Some(p)) => Some(existing(p, "features")?),
        (true, None) => bail!("setting {} needs --features", args.setting),
        (false, _) => None,
    };
    let emb_path = match (need_embeddings, args.embeddings) {
        (true, Some(p)) => Some(existing(p, "embeddings")?),
        (true, None) => bail!("setting {} needs --embeddings", args.setting),
        (false, _) => None,
    };
    ensure_dir(&args.out_dir)?;

    let mut run = RunRecord::new("train-classifier", cfg);
    run.arg("setting", &args.setting);
    if let Some(layer) = args.layer {
        run.arg("layer", layer);
    }
    run.input("corpus", &corpus_path)?;
    if let Some(p) = &features_path {
        run.input("features", p)?;
    }
    if let Some(p) = &emb_path {
        run.input("embeddings", p)?;
    }
    let corpus = prepare_corpus(&load_corpus(&corpus_path)?, cfg)?;
    let table = features_path.as_ref().map(read_feature_csv).transpose()?;
    let store = emb_path.as_ref().map(read_embeddings).transpose()?;
    let sources = Sources {
        features: table.as_ref(),
        embeddings: store.as_ref(),
        layer: args.layer,
    };
    let (outcomes, report) = classify_settings(&corpus, sources, &settings, cfg)?;

    let mut outcomes_json = serde_json::to_string_pretty(&outcomes)?;
    outcomes_json.push('\n');
    run.write_artifact(&args.out_dir.join(CLASSIFIER_OUTCOMES), outcomes_json.as_bytes())?;
    let text = report.render_text();
    run.write_artifact(&args.out_dir.join(CLASSIFIER_REPORT_TXT), text.as_bytes())?;
    run.write_artifact(&args.out_dir.join(CLASSIFIER_REPORT_CSV), report.render_csv()?.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn report(out_dir: PathBuf) -> Result<()> {
    let found: Vec<(&str, String)> = [PROBE_REPORT_TXT, CLASSIFIER_REPORT_TXT]
        .into_iter()
        .filter_map(|name| fs::read_to_string(out_dir.join(name)).ok().map(|t| (name, t)))
        .collect();
    if found.is_empty() {
        bail!(
            "no artifacts in {}: run train-probe or train-classifier first",
            out_dir.display()
        );
    }
    for (i, (name, text)) in found.iter().enumerate() {
        if i > 0 {
            println!();
        }
        println!("== {name}");
        print!("{text}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => FileConfig::default(),
    };
    let mut cfg = file.pipeline.clone();
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::ExtractFeatures {
            corpus,
            out,
            icu_words,
        } => extract_features(
            &cfg,
            required(corpus, file.corpus, "corpus")?,
            required(out, file.out, "out")?,
            icu_words.or(file.icu_words),
        ),
        Command::BuildProbe {
            task,
            corpus,
            out_dir,
        } => build_probe(
            &cfg,
            required(task, file.task, "task")?,
            required(corpus, file.corpus, "corpus")?,
            required(out_dir, file.out_dir, "out-dir")?,
        ),
        Command::TrainProbe {
            task,
            layer,
            corpus,
            embeddings,
            bigram_embeddings,
            out_dir,
        } => train_probe(
            &cfg,
            ProbeArgs {
                task: required(task, file.task, "task")?,
                layer: required(layer, file.layer, "layer")?,
                corpus: required(corpus, file.corpus, "corpus")?,
                embeddings: required(embeddings, file.embeddings, "embeddings")?,
                bigram_embeddings: bigram_embeddings.or(file.bigram_embeddings),
                out_dir: required(out_dir, file.out_dir, "out-dir")?,
            },
        ),
        Command::TrainClassifier {
            setting,
            layer,
            corpus,
            features,
            embeddings,
            out_dir,
        } => {
            let layer = match (layer, file.layer) {
                (Some(k), _) => Some(k),
                (None, Some(s)) => Some(s.parse().with_context(|| format!("config layer {s:?}"))?),
                (None, None) => None,
            };
            train_classifier(
                &cfg,
                ClassifierArgs {
                    setting: required(setting, file.setting, "setting")?,
                    layer,
                    corpus: required(corpus, file.corpus, "corpus")?,
                    features: features.or(file.features),
                    embeddings: embeddings.or(file.embeddings),
                    out_dir: required(out_dir, file.out_dir, "out-dir")?,
                },
            )
        }
        Command::Report { out_dir } => report(required(out_dir, file.out_dir, "out-dir")?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
