//! End-to-end orchestration: embeddings, answer filter, chain reasoner,
//! evaluation and ablations.

mod config;
mod report;

use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;

pub use config::PipelineConfig;
pub use report::{sweep_table, CandidateTrace, EvaluationReport, SweepRow, Trace};

use crate::dataset::{load_qa_dataset, resolve, QaExample, ResolvedExample};
use crate::embedding::{train_embeddings, ComplexEmbeddingTable};
use crate::error::{Error, Result};
use crate::filter::{score_all_entities, train_filter, FilterModel, ScoredCandidate};
use crate::kg::{shortest_chains_from, EntityId, KnowledgeGraph, DEFAULT_DELIMITER};
use crate::reasoner::{
    build_training_pairs, rank_candidates, train_reasoner, PairBuild, PairSet, ReasonerModel, TrainingPair,
};
use crate::synth::SynthBenchmark;

/// The raw forward graph plus the three question splits.
#[derive(Debug, Clone)]
pub struct PipelineData {
    pub kg: KnowledgeGraph,
    pub train: Vec<QaExample>,
    pub dev: Vec<QaExample>,
    pub test: Vec<QaExample>,
}

impl PipelineData {
    /// Reads the files named in `config`. A missing dev or test path gives an
    /// empty split.
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let kg_path = config
            .kg
            .as_ref()
            .ok_or_else(|| Error::Config("no knowledge graph path (kg)".into()))?;
        let kg = KnowledgeGraph::load_triples(kg_path, DEFAULT_DELIMITER)?;
        let split = |p: &Option<std::path::PathBuf>| -> Result<Vec<QaExample>> {
            p.as_ref().map_or(Ok(Vec::new()), load_qa_dataset)
        };
        Ok(Self {
            kg,
            train: split(&config.qa_train)?,
            dev: split(&config.qa_dev)?,
            test: split(&config.qa_test)?,
        })
    }
}

impl From<SynthBenchmark> for PipelineData {
    fn from(b: SynthBenchmark) -> Self {
        Self {
            kg: b.kg,
            train: b.train,
            dev: b.dev,
            test: b.test,
        }
    }
}

/// The graph every stage works on: optionally pruned, then reverse-augmented.
pub fn prepare_graph(raw: &KnowledgeGraph, config: &PipelineConfig) -> Result<KnowledgeGraph> {
    let base = if config.half {
        raw.prune_half(config.keep_probability, config.seed)?
    } else {
        raw.clone()
    };
    Ok(base.augment_reverse()?)
}

/// Trained models over one graph.
#[derive(Debug, Clone)]
pub struct Pipeline {
    /// Reverse-augmented graph used for chain retrieval.
    pub kg: KnowledgeGraph,
    pub table: Arc<ComplexEmbeddingTable>,
    pub filter: FilterModel,
    pub reasoner: Option<ReasonerModel>,
    pub top_n: usize,
    pub max_chain_len: usize,
    /// False gives the filter-only ablation even when a reasoner is loaded.
    pub use_reasoner: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub entity: EntityId,
    pub trace: Trace,
    /// Every non-topic entity, best first.
    pub ranking: Vec<EntityId>,
    /// The filter's own ordering, for filter-only metrics.
    pub filter_ranking: Vec<EntityId>,
}

impl Pipeline {
    pub fn new(
        kg: KnowledgeGraph,
        filter: FilterModel,
        reasoner: Option<ReasonerModel>,
        top_n: usize,
        max_chain_len: usize,
    ) -> Result<Self> {
        if kg.entity_count() == 0 {
            return Err(Error::InvalidInput("empty knowledge graph".into()));
        }
        if top_n == 0 {
            return Err(Error::InvalidInput("top-n needs n ≥ 1".into()));
        }
        let table = filter.table.clone();
        if table.entity_count() != kg.entity_count() || table.relation_count() != kg.relation_count() {
            return Err(Error::Dimension {
                expected: kg.entity_count(),
                actual: table.entity_count(),
            });
        }
        if let Some(r) = &reasoner {
            if r.table.fingerprint() != table.fingerprint() {
                return Err(Error::InvalidInput(
                    "filter and reasoner use different embedding tables".into(),
                ));
            }
        }
        Ok(Self {
            use_reasoner: reasoner.is_some(),
            kg,
            table,
            filter,
            reasoner,
            top_n,
            max_chain_len,
        })
    }

    pub fn with_top_n(&self, top_n: usize) -> Self {
        Self {
            top_n: top_n.max(1),
            ..self.clone()
        }
    }

    pub fn without_reasoner(&self) -> Self {
        Self {
            use_reasoner: false,
            ..self.clone()
        }
    }

    fn label(&self, e: EntityId) -> String {
        self.kg.entity_label(e).unwrap_or("?").to_string()
    }

    /// Scores every entity, keeps the top N, retrieves the shortest chain to
    /// each and re-scores reachable ones with the reasoner.
    pub fn answer_question(&self, question: &str, topic: &str) -> Result<Answer> {
        if self.kg.entity_count() == 0 {
            return Err(Error::InvalidInput("empty knowledge graph".into()));
        }
        let topic_id = self
            .kg
            .entity_id(topic)
            .ok_or_else(|| Error::InvalidInput(format!("unknown topic entity '{topic}'")))?;
        let tokens = self.filter.tokenize(question, topic)?;
        let ranked = score_all_entities(&self.filter, topic_id, &tokens)?;
        let filter_ranking: Vec<EntityId> = ranked.iter().map(|c| c.entity).collect();
        let top: Vec<ScoredCandidate> = ranked.iter().take(self.top_n).copied().collect();
        if top.is_empty() {
            return Err(Error::InvalidInput("no candidate entities besides the topic".into()));
        }
        let chains = shortest_chains_from(&self.kg, topic_id, self.max_chain_len)?;
        let lookups: Vec<_> = top.iter().map(|c| (*c, chains[c.entity.index()].clone())).collect();

        let reasoner = self.reasoner.as_ref().filter(|_| self.use_reasoner);
        let (similarities, fell_back) = match reasoner {
            Some(r) => {
                let choice = rank_candidates(r, &r.tokenize(question, topic)?, &lookups)?;
                (choice.similarities, choice.fell_back)
            }
            None => (vec![None; top.len()], false),
        };

        let ranking = match reasoner {
            Some(_) => final_ranking(&top, &similarities, &filter_ranking),
            None => filter_ranking.clone(),
        };
        let entity = ranking[0];
        let candidates = lookups
            .iter()
            .zip(&similarities)
            .map(|((c, lookup), s)| CandidateTrace {
                entity: c.entity,
                label: self.label(c.entity),
                filter_score: c.score,
                chain: lookup.chain().map(|ch| ch.describe(&self.kg)),
                similarity: *s,
            })
            .collect();
        Ok(Answer {
            entity,
            trace: Trace {
                question: question.to_string(),
                topic: topic.to_string(),
                candidates,
                answer: entity,
                answer_label: self.label(entity),
                fell_back,
                gold: Vec::new(),
            },
            ranking,
            filter_ranking,
        })
    }
}

/// Reachable candidates by similarity (then filter score, then id), then
/// unreachable candidates in filter order, then the rest of the filter
/// ranking.
pub fn final_ranking(
    top: &[ScoredCandidate],
    similarities: &[Option<f64>],
    filter_ranking: &[EntityId],
) -> Vec<EntityId> {
    let mut reachable: Vec<(ScoredCandidate, f64)> = top
        .iter()
        .zip(similarities)
        .filter_map(|(c, s)| s.map(|s| (*c, s)))
        .collect();
    reachable.sort_by(|(a, sa), (b, sb)| {
        sb.total_cmp(sa)
            .then(b.score.total_cmp(&a.score))
            .then(a.entity.cmp(&b.entity))
    });
    let mut out: Vec<EntityId> = reachable.iter().map(|(c, _)| c.entity).collect();
    out.extend(
        top.iter()
            .zip(similarities)
            .filter(|(_, s)| s.is_none())
            .map(|(c, _)| c.entity),
    );
    out.extend(filter_ranking.iter().skip(top.len()));
    out
}

fn hit(ranking: &[EntityId], ex: &ResolvedExample, k: usize) -> bool {
    ranking.iter().take(k).any(|&e| ex.is_answer(e))
}

/// Hit@1/5/10 of the final ranking alongside the filter's own hits.
/// Examples naming unknown entities are excluded and counted.
pub fn evaluate(pipeline: &Pipeline, eval_set: &[QaExample]) -> Result<EvaluationReport> {
    if eval_set.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let start = Instant::now();
    let resolved = resolve(&pipeline.kg, eval_set);
    if resolved.skipped > 0 {
        warn!("{} evaluation examples excluded", resolved.skipped);
    }
    let answers: Vec<Answer> = resolved
        .examples
        .par_iter()
        .map(|ex| pipeline.answer_question(&ex.question, &ex.mention))
        .collect::<Result<_>>()?;

    let mut report = EvaluationReport {
        top_n: pipeline.top_n,
        evaluated: resolved.examples.len(),
        skipped: resolved.skipped,
        ..Default::default()
    };
    let mut counts = [0usize; 7];
    for (ex, mut a) in resolved.examples.iter().zip(answers) {
        let flags = [
            hit(&a.ranking, ex, 1),
            hit(&a.ranking, ex, 5),
            hit(&a.ranking, ex, 10),
            hit(&a.filter_ranking, ex, 1),
            hit(&a.filter_ranking, ex, 5),
            hit(&a.filter_ranking, ex, 10),
            hit(&a.filter_ranking, ex, pipeline.top_n),
        ];
        for (c, f) in counts.iter_mut().zip(flags) {
            *c += usize::from(f);
        }
        report.unreachable += a.trace.candidates.iter().filter(|c| c.chain.is_none()).count();
        report.fallbacks += usize::from(a.trace.fell_back);
        a.trace.gold = ex.answers.iter().map(|&e| pipeline.label(e)).collect();
        report.traces.push(a.trace);
    }
    let n = resolved.examples.len().max(1) as f64;
    let rate = |c: usize| c as f64 / n;
    report.hit_at_1 = rate(counts[0]);
    report.hit_at_5 = rate(counts[1]);
    report.hit_at_10 = rate(counts[2]);
    report.filter_hit_at_1 = rate(counts[3]);
    report.filter_hit_at_5 = rate(counts[4]);
    report.filter_hit_at_10 = rate(counts[5]);
    report.filter_hit_at_n = rate(counts[6]);
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Losses, dev curves and counts gathered while training.
#[derive(Debug, Clone, Default)]
pub struct TrainingSummary {
    pub kge_losses: Vec<f64>,
    pub filter_losses: Vec<f64>,
    pub filter_dev: Vec<(usize, f64)>,
    pub train_pairs: PairStats,
    pub dev_pairs: PairStats,
    pub reasoner_losses: Vec<f64>,
    pub reasoner_dev: Vec<(usize, f64)>,
    pub triples: usize,
    pub stage_times: Vec<(&'static str, Duration)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairStats {
    pub pairs: usize,
    pub positives: usize,
    pub negatives: usize,
    pub unreachable: usize,
    pub dropped_examples: usize,
}

impl From<&PairBuild> for PairStats {
    fn from(b: &PairBuild) -> Self {
        Self {
            pairs: b.pairs.len(),
            positives: b.positives,
            negatives: b.negatives,
            unreachable: b.unreachable,
            dropped_examples: b.dropped_examples,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub pipeline: Pipeline,
    pub summary: TrainingSummary,
}

/// Filter rankings of `examples` and the reasoner pairs drawn from their top N.
pub fn build_pairs(
    pipeline_kg: &KnowledgeGraph,
    filter: &FilterModel,
    examples: &[ResolvedExample],
    top_n: usize,
    max_chain_len: usize,
) -> Result<PairBuild> {
    let ranked: Vec<Vec<ScoredCandidate>> = examples
        .par_iter()
        .map(|ex| {
            let mut r = filter.rank(ex)?;
            r.truncate(top_n);
            Ok(r)
        })
        .collect::<Result<_>>()?;
    build_training_pairs(examples, &ranked, pipeline_kg, top_n, max_chain_len)
}

/// Trains the reasoner on train-split pairs with dev pairs for early
/// stopping. Returns `None` when the pairs hold only one label.
pub fn train_reasoner_stage(
    kg: &KnowledgeGraph,
    filter: &FilterModel,
    data: &PipelineData,
    config: &PipelineConfig,
    summary: &mut TrainingSummary,
) -> Result<Option<ReasonerModel>> {
    let train = resolve(kg, &data.train).examples;
    let dev = resolve(kg, &data.dev).examples;
    let train_pairs = build_pairs(kg, filter, &train, config.top_n, config.max_chain_len)?;
    let dev_pairs = build_pairs(kg, filter, &dev, config.top_n, config.max_chain_len)?;
    summary.train_pairs = PairStats::from(&train_pairs);
    summary.dev_pairs = PairStats::from(&dev_pairs);
    fit_reasoner(
        filter.table.clone(),
        &train,
        &train_pairs.pairs,
        &dev,
        &dev_pairs.pairs,
        config,
        summary,
    )
}

pub fn fit_reasoner(
    table: Arc<ComplexEmbeddingTable>,
    train: &[ResolvedExample],
    train_pairs: &[TrainingPair],
    dev: &[ResolvedExample],
    dev_pairs: &[TrainingPair],
    config: &PipelineConfig,
    summary: &mut TrainingSummary,
) -> Result<Option<ReasonerModel>> {
    let positives = train_pairs.iter().filter(|p| p.label == 1).count();
    if positives == 0 || positives == train_pairs.len() {
        warn!("reasoner pairs carry a single label; the reasoner is skipped");
        return Ok(None);
    }
    let dev_set = PairSet {
        pairs: dev_pairs,
        examples: dev,
    };
    let trained = train_reasoner(
        table,
        &PairSet {
            pairs: train_pairs,
            examples: train,
        },
        Some(&dev_set),
        &config.reasoner(),
    )?;
    summary.reasoner_losses = trained.epoch_losses;
    summary.reasoner_dev = trained.dev_history;
    Ok(Some(trained.model))
}

/// Embeddings, then filter, then reasoner pairs and reasoner.
pub fn train_pipeline(config: &PipelineConfig, data: &PipelineData) -> Result<TrainedPipeline> {
    config.validate()?;
    let mut summary = TrainingSummary::default();
    let kg = prepare_graph(&data.kg, config)?;
    summary.triples = kg.triple_count();

    let t = Instant::now();
    let kge = train_embeddings(&kg, &config.embedding())?;
    summary.kge_losses = kge.epoch_losses;
    summary.stage_times.push(("embeddings", t.elapsed()));
    info!("embeddings trained in {:.1?}", t.elapsed());
    let table = Arc::new(kge.table);

    let t = Instant::now();
    let filter = train_filter(&kg, table, &data.train, &data.dev, &config.filter())?;
    summary.filter_losses = filter.epoch_losses;
    summary.filter_dev = filter.dev_history;
    summary.stage_times.push(("filter", t.elapsed()));
    info!("filter trained in {:.1?}", t.elapsed());
    let filter = filter.model;

    let reasoner = if config.no_reasoner {
        None
    } else {
        let t = Instant::now();
        let r = train_reasoner_stage(&kg, &filter, data, config, &mut summary)?;
        summary.stage_times.push(("reasoner", t.elapsed()));
        info!("reasoner trained in {:.1?}", t.elapsed());
        r
    };
    let pipeline = Pipeline::new(kg, filter, reasoner, config.top_n, config.max_chain_len)?;
    Ok(TrainedPipeline { pipeline, summary })
}

#[derive(Debug, Clone)]
pub struct HalfAblation {
    pub full: EvaluationReport,
    pub half: EvaluationReport,
    /// Reverse-augmented triple counts of each graph.
    pub full_triples: usize,
    pub half_triples: usize,
}

impl HalfAblation {
    pub fn table(&self) -> String {
        format!(
            "{}\n{}\n{}\n",
            EvaluationReport::tsv_header(),
            self.full.tsv_row("full"),
            self.half.tsv_row("half")
        )
    }
}

/// Trains and evaluates on the full graph and on the pruned graph with the
/// same seeds.
pub fn run_half_ablation(config: &PipelineConfig, data: &PipelineData) -> Result<HalfAblation> {
    let full_config = PipelineConfig {
        half: false,
        ..config.clone()
    };
    let half_config = PipelineConfig {
        half: true,
        ..config.clone()
    };
    let full = train_pipeline(&full_config, data)?;
    let half = train_pipeline(&half_config, data)?;
    Ok(HalfAblation {
        full: evaluate(&full.pipeline, &data.test)?,
        half: evaluate(&half.pipeline, &data.test)?,
        full_triples: full.summary.triples,
        half_triples: half.summary.triples,
    })
}

pub const SWEEP_VALUES: [usize; 4] = [5, 10, 15, 20];

/// Rebuilds reasoner pairs, retrains the reasoner and evaluates for each N,
/// reusing the trained embeddings and filter of `stage_one`.
pub fn run_topn_sweep(
    config: &PipelineConfig,
    data: &PipelineData,
    stage_one: &Pipeline,
    n_values: &[usize],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let c = PipelineConfig {
            top_n: n,
            ..config.clone()
        };
        c.validate()?;
        let mut summary = TrainingSummary::default();
        let reasoner = if c.no_reasoner {
            None
        } else {
            train_reasoner_stage(&stage_one.kg, &stage_one.filter, data, &c, &mut summary)?
        };
        let pipeline = Pipeline::new(
            stage_one.kg.clone(),
            stage_one.filter.clone(),
            reasoner,
            n,
            c.max_chain_len,
        )?;
        let report = evaluate(&pipeline, &data.test)?;
        info!(
            "top-{n}: hit@1 {:.4}, filter hit@{n} {:.4}",
            report.hit_at_1, report.filter_hit_at_n
        );
        rows.push(SweepRow { top_n: n, report });
    }
    Ok(rows)
}
