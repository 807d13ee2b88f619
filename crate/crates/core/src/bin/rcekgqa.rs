use std::fmt::Write as _;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rcekgqa::checkpoint::Checkpoint;
use rcekgqa::dataset::{resolve, QaExample};
use rcekgqa::embedding::train_embeddings;
use rcekgqa::filter::train_filter;
use rcekgqa::pipeline::{
    build_pairs, evaluate, fit_reasoner, prepare_graph, run_half_ablation, run_topn_sweep, sweep_table,
    EvaluationReport, PipelineConfig, PipelineData, TrainingSummary, SWEEP_VALUES,
};
use rcekgqa::reasoner::{read_pairs, write_pairs};
use rcekgqa::synth::{generate_synthetic_benchmark, SynthSpec};

#[derive(Debug, Parser)]
#[command(
    name = "rcekgqa",
    version,
    about = "Multi-hop KGQA: ComplEx answer filter plus relational-chain reasoner"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base values when no config file is given: `desk` or `full`.
    #[arg(long, global = true, default_value = "desk")]
    preset: String,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    kg: Option<PathBuf>,
    #[arg(long = "qa-train", global = true)]
    qa_train: Option<PathBuf>,
    #[arg(long = "qa-dev", global = true)]
    qa_dev: Option<PathBuf>,
    #[arg(long = "qa-test", global = true)]
    qa_test: Option<PathBuf>,
    #[arg(long = "top-n", global = true)]
    top_n: Option<usize>,
    #[arg(long = "no-reasoner", global = true)]
    no_reasoner: bool,
    #[arg(long = "no-attention", global = true)]
    no_attention: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train ComplEx embeddings on the (augmented) graph.
    TrainKge,
    /// Train the answer filter on top of stored embeddings.
    TrainFilter,
    /// Write reasoner pairs from the filter's top-N candidates.
    BuildPairs,
    /// Train the chain reasoner from stored pairs.
    TrainReasoner,
    /// Answer one question; the topic is the bracketed span.
    Answer { question: String },
    /// Evaluate on the test split.
    Eval,
    /// Write the synthetic movie benchmark.
    Synth {
        #[arg(long, default_value = "data/synth")]
        out: PathBuf,
        /// Hop counts to include, comma separated.
        #[arg(long, default_value = "2", value_delimiter = ',')]
        hops: Vec<usize>,
    },
    /// Train and evaluate on the full graph and on a pruned graph.
    AblateHalf {
        #[arg(long)]
        keep: Option<f64>,
    },
    /// Retrain the reasoner and evaluate for several top-N values.
    SweepTopn {
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
}

fn resolve_config(g: &Global) -> Result<PipelineConfig> {
    let mut c = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::preset(&g.preset)?,
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if g.checkpoint.is_some() {
        c.checkpoint = g.checkpoint.clone();
    }
    if g.kg.is_some() {
        c.kg = g.kg.clone();
    }
    if g.qa_train.is_some() {
        c.qa_train = g.qa_train.clone();
    }
    if g.qa_dev.is_some() {
        c.qa_dev = g.qa_dev.clone();
    }
    if g.qa_test.is_some() {
        c.qa_test = g.qa_test.clone();
    }
    if let Some(n) = g.top_n {
        c.top_n = n;
    }
    c.no_reasoner |= g.no_reasoner;
    c.no_attention |= g.no_attention;
    c.validate()?;
    Ok(c)
}

fn checkpoint_path(c: &PipelineConfig) -> Result<&Path> {
    c.checkpoint.as_deref().context("--checkpoint is required")
}

fn sibling(ckpt: &Path, suffix: &str) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Later stages keep the graph-shaping settings the embeddings were trained
/// with.
fn load_stage(c: &PipelineConfig) -> Result<(Checkpoint, PipelineConfig)> {
    let path = checkpoint_path(c)?;
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    let merged = PipelineConfig {
        dim: ckpt.config.dim,
        half: ckpt.config.half,
        keep_probability: ckpt.config.keep_probability,
        seed: ckpt.config.seed,
        ..c.clone()
    };
    Ok((ckpt, merged))
}

fn emit(report_path: &Path, text: &str) -> Result<()> {
    print!("{text}");
    std::fs::write(report_path, text).with_context(|| format!("writing {}", report_path.display()))?;
    eprintln!("report written to {}", report_path.display());
    Ok(())
}

fn curve(title: &str, losses: &[f64], dev: &[(usize, f64)]) -> String {
    let mut s = format!("epoch\t{title}_loss\tdev\n");
    for (i, l) in losses.iter().enumerate() {
        let d = dev
            .iter()
            .find(|(e, _)| *e == i + 1)
            .map_or("-".to_string(), |(_, v)| format!("{v:.4}"));
        let _ = writeln!(s, "{}\t{l:.6}\t{d}", i + 1);
    }
    s
}

fn pair_files(ckpt: &Path) -> (PathBuf, PathBuf) {
    (sibling(ckpt, ".pairs.train.tsv"), sibling(ckpt, ".pairs.dev.tsv"))
}

fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli.global)?;
    match cli.command {
        Command::Synth { out, hops } => {
            let defaults = SynthSpec::default();
            let spec = SynthSpec {
                hops,
                seed: cli.global.seed.unwrap_or(defaults.seed),
                ..defaults
            };
            let bench = generate_synthetic_benchmark(&spec)?;
            bench.write(&out)?;
            println!("file\trecords");
            println!("kb.txt\t{}", bench.kg.triple_count());
            println!("qa_train.txt\t{}", bench.train.len());
            println!("qa_dev.txt\t{}", bench.dev.len());
            println!("qa_test.txt\t{}", bench.test.len());
        }
        Command::TrainKge => {
            let path = checkpoint_path(&config)?;
            let data = PipelineData::load(&config)?;
            let kg = prepare_graph(&data.kg, &config)?;
            let trained = train_embeddings(&kg, &config.embedding())?;
            Checkpoint::new(config.clone(), Arc::new(trained.table)).save(path)?;
            emit(
                &sibling(path, ".train-kge.tsv"),
                &curve("kge", &trained.epoch_losses, &[]),
            )?;
        }
        Command::TrainFilter => {
            let (ckpt, config) = load_stage(&config)?;
            let path = checkpoint_path(&config)?;
            let data = PipelineData::load(&config)?;
            let kg = ckpt.graph(&data.kg)?;
            let trained = train_filter(&kg, ckpt.table.clone(), &data.train, &data.dev, &config.filter())?;
            let mut next = Checkpoint::new(config.clone(), ckpt.table.clone());
            next.filter = Some(trained.model);
            next.save(path)?;
            emit(
                &sibling(path, ".train-filter.tsv"),
                &curve("filter", &trained.epoch_losses, &trained.dev_history),
            )?;
        }
        Command::BuildPairs => {
            let (ckpt, config) = load_stage(&config)?;
            let path = checkpoint_path(&config)?;
            let data = PipelineData::load(&config)?;
            let kg = ckpt.graph(&data.kg)?;
            let filter = ckpt
                .filter
                .as_ref()
                .context("checkpoint has no filter; run train-filter first")?;
            let (train_file, dev_file) = pair_files(path);
            let mut text = String::from("split\tpairs\tpositives\tnegatives\tunreachable\tdropped_examples\n");
            for (split, examples, file) in [("train", &data.train, &train_file), ("dev", &data.dev, &dev_file)] {
                let resolved = resolve(&kg, examples).examples;
                let built = build_pairs(&kg, filter, &resolved, config.top_n, config.max_chain_len)?;
                let mut buf = Vec::new();
                write_pairs(&mut buf, &built.pairs)?;
                std::fs::write(file, buf).with_context(|| format!("writing {}", file.display()))?;
                let _ = writeln!(
                    text,
                    "{split}\t{}\t{}\t{}\t{}\t{}",
                    built.pairs.len(),
                    built.positives,
                    built.negatives,
                    built.unreachable,
                    built.dropped_examples
                );
            }
            emit(&sibling(path, ".build-pairs.tsv"), &text)?;
        }
        Command::TrainReasoner => {
            let (ckpt, config) = load_stage(&config)?;
            let path = checkpoint_path(&config)?;
            let data = PipelineData::load(&config)?;
            let kg = ckpt.graph(&data.kg)?;
            let (train_file, dev_file) = pair_files(path);
            let load = |f: &Path| -> Result<Vec<_>> {
                let file = std::fs::File::open(f).with_context(|| format!("{}: run build-pairs first", f.display()))?;
                Ok(read_pairs(BufReader::new(file))?)
            };
            let (train_pairs, dev_pairs) = (load(&train_file)?, load(&dev_file)?);
            let train = resolve(&kg, &data.train).examples;
            let dev = resolve(&kg, &data.dev).examples;
            let mut summary = TrainingSummary::default();
            let reasoner = fit_reasoner(
                ckpt.table.clone(),
                &train,
                &train_pairs,
                &dev,
                &dev_pairs,
                &config,
                &mut summary,
            )?;
            let Some(reasoner) = reasoner else {
                bail!("pairs carry a single label; nothing for the reasoner to learn");
            };
            let mut next = Checkpoint::new(config.clone(), ckpt.table.clone());
            next.filter = ckpt.filter.clone();
            next.reasoner = Some(reasoner);
            next.save(path)?;
            emit(
                &sibling(path, ".train-reasoner.tsv"),
                &curve("reasoner", &summary.reasoner_losses, &summary.reasoner_dev),
            )?;
        }
        Command::Answer { question } => {
            let (ckpt, config) = load_stage(&config)?;
            let data = PipelineData::load(&PipelineConfig {
                qa_train: None,
                qa_dev: None,
                qa_test: None,
                ..config.clone()
            })?;
            let mut pipeline = ckpt.pipeline(&data.kg)?.with_top_n(config.top_n);
            pipeline.use_reasoner &= !config.no_reasoner;
            let parsed = QaExample::new(question.clone(), vec!["?".into()])?;
            let answer = pipeline.answer_question(&question, &parsed.topic)?;
            println!("answer\t{}", answer.trace.answer_label);
            println!("candidate\tfilter_score\tchain\tsimilarity");
            for c in &answer.trace.candidates {
                println!(
                    "{}\t{:.6}\t{}\t{}",
                    c.label,
                    c.filter_score,
                    c.chain.as_deref().unwrap_or("-"),
                    c.similarity.map_or("-".to_string(), |v| format!("{v:.6}"))
                );
            }
        }
        Command::Eval => {
            let (ckpt, config) = load_stage(&config)?;
            let path = checkpoint_path(&config)?;
            let data = PipelineData::load(&config)?;
            if data.test.is_empty() {
                bail!("--qa-test is required for eval");
            }
            let mut pipeline = ckpt.pipeline(&data.kg)?.with_top_n(config.top_n);
            pipeline.use_reasoner &= !config.no_reasoner;
            let report = evaluate(&pipeline, &data.test)?;
            let setting = if pipeline.use_reasoner { "full" } else { "no-reasoner" };
            println!("{}", EvaluationReport::tsv_header());
            println!("{}", report.tsv_row(setting));
            let file = sibling(path, ".eval.txt");
            std::fs::write(&file, report.to_text(setting)).with_context(|| format!("writing {}", file.display()))?;
            eprintln!("report written to {}", file.display());
        }
        Command::AblateHalf { keep } => {
            let mut config = config;
            if let Some(k) = keep {
                config.keep_probability = k;
                config.validate()?;
            }
            let data = PipelineData::load(&config)?;
            let result = run_half_ablation(&config, &data)?;
            let mut text = result.table();
            let _ = writeln!(
                text,
                "triples_full\t{}\ntriples_half\t{}",
                result.full_triples, result.half_triples
            );
            match &config.checkpoint {
                Some(p) => emit(&sibling(p, ".ablate-half.tsv"), &text)?,
                None => print!("{text}"),
            }
        }
        Command::SweepTopn { values } => {
            let (ckpt, config) = load_stage(&config)?;
            let path = checkpoint_path(&config)?;
            let data = PipelineData::load(&config)?;
            let stage_one = ckpt.pipeline(&data.kg)?;
            let values = values.unwrap_or_else(|| SWEEP_VALUES.to_vec());
            let rows = run_topn_sweep(&config, &data, &stage_one, &values)?;
            emit(&sibling(path, ".sweep-topn.tsv"), &sweep_table(&rows))?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("rcekgqa: {e:#}");
        std::process::exit(1);
    }
}
