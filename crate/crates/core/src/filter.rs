//! Stage one: score every entity as the answer to (topic, question) with
//! `φ(v_topic, ℓ̂, v_t)` and keep the best N.

use std::sync::Arc;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{resolve, QaExample, ResolvedExample};
use crate::embedding::{ComplexEmbeddingTable, ComplexVars, ComplexVector};
use crate::encoder::{
    encode_question, project_rows, project_to_relation, tokenize, EncoderParams, EncoderVars, Pooling, TokenSequence,
    Vocabulary, ENCODER_TENSORS,
};
use crate::error::{Error, Result};
use crate::kg::EntityId;
use crate::numerics::{xavier_init_with, NumericsError, Optimizer, OptimizerSettings, Parameters, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub entity: EntityId,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
    /// Loss weight of each non-answer relative to an answer.
    pub negative_weight: f64,
    pub mask_topic: bool,
    pub pooling: Pooling,
    /// Dev hit@1 is checked every this many epochs.
    pub eval_every: usize,
    /// Checks without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            epochs: 200,
            batch_size: 128,
            optimizer: OptimizerSettings::adam(1e-3),
            negative_weight: 1.0,
            mask_topic: false,
            pooling: Pooling::Attention,
            eval_every: 10,
            patience: 3,
            seed: 0,
        }
    }
}

/// Question encoder and projection head over a frozen embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel {
    pub table: Arc<ComplexEmbeddingTable>,
    pub vocab: Vocabulary,
    pub encoder: EncoderParams,
    /// `[2h, 2d]`.
    pub projection: Tensor,
    pub mask_topic: bool,
}

impl Parameters for FilterModel {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.encoder.tensors();
        v.push(&self.projection);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.encoder.tensors_mut();
        v.push(&mut self.projection);
        v
    }
}

impl FilterModel {
    pub fn new(
        table: Arc<ComplexEmbeddingTable>,
        vocab: Vocabulary,
        hidden: usize,
        pooling: Pooling,
        mask_topic: bool,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = EncoderParams::new(vocab.len(), hidden, pooling, &mut rng)?;
        let projection = xavier_init_with(&[2 * hidden, 2 * table.dim()], &mut rng)?;
        Ok(Self {
            table,
            vocab,
            encoder,
            projection,
            mask_topic,
        })
    }

    pub fn tokenize(&self, question: &str, mention: &str) -> Result<TokenSequence> {
        tokenize(question, mention, &self.vocab, self.mask_topic)
    }

    /// The predicted complex relation `ℓ̂` of a question.
    pub fn relation_query(&self, tokens: &TokenSequence) -> Result<ComplexVector> {
        project_to_relation(&encode_question(&self.encoder, tokens)?, &self.projection)
    }

    pub fn rank(&self, example: &ResolvedExample) -> Result<Vec<ScoredCandidate>> {
        score_all_entities(
            self,
            example.topic,
            &self.tokenize(&example.question, &example.mention)?,
        )
    }
}

/// Every entity except the topic, by descending score then ascending id.
pub fn score_all_entities(
    model: &FilterModel,
    topic: EntityId,
    tokens: &TokenSequence,
) -> Result<Vec<ScoredCandidate>> {
    let head = model
        .table
        .entity(topic)
        .map_err(|_| Error::InvalidInput(format!("unknown topic entity {topic}")))?;
    let rel = model.relation_query(tokens)?;
    let scores = model.table.tail_scores(&head.hadamard(&rel)?)?;
    let mut out: Vec<ScoredCandidate> = scores
        .into_iter()
        .enumerate()
        .filter(|&(e, _)| e != topic.index())
        .map(|(e, score)| ScoredCandidate {
            entity: EntityId(e as u32),
            score,
        })
        .collect();
    if out.iter().any(|c| !c.score.is_finite()) {
        return Err(NumericsError::NonFinite("filter scores").into());
    }
    sort_candidates(&mut out);
    Ok(out)
}

pub fn sort_candidates(c: &mut [ScoredCandidate]) {
    c.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.entity.cmp(&b.entity)));
}

pub fn top_n(ranked: &[ScoredCandidate], n: usize) -> Result<Vec<ScoredCandidate>> {
    if n == 0 {
        return Err(Error::InvalidInput("top-n needs n ≥ 1".into()));
    }
    Ok(ranked[..n.min(ranked.len())].to_vec())
}

/// Fraction of examples whose top `k` candidates contain a gold answer.
pub fn filter_hit_at_k(model: &FilterModel, eval_set: &[ResolvedExample], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("hit@k needs k ≥ 1".into()));
    }
    if eval_set.is_empty() {
        return Err(Error::InvalidInput("evaluation set is empty".into()));
    }
    let hits = eval_set
        .par_iter()
        .map(|ex| {
            let ranked = model.rank(ex)?;
            Ok(ranked.iter().take(k).any(|c| ex.is_answer(c.entity)))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / eval_set.len() as f64)
}

/// A tokenized training example.
#[derive(Debug, Clone)]
pub struct FilterItem {
    pub tokens: TokenSequence,
    pub topic: EntityId,
    pub answers: Vec<EntityId>,
}

/// The embedding table bound as constants, with transposed entity blocks
/// for all-entity scoring.
#[derive(Debug, Clone, Copy)]
pub struct FrozenTable<'t> {
    pub entity_re: Var<'t>,
    pub entity_im: Var<'t>,
    pub entity_re_t: Var<'t>,
    pub entity_im_t: Var<'t>,
}

impl<'t> FrozenTable<'t> {
    pub fn bind(tape: &'t Tape, table: &ComplexEmbeddingTable) -> Result<Self, NumericsError> {
        Ok(Self {
            entity_re: tape.constant(table.entity_re.clone()),
            entity_im: tape.constant(table.entity_im.clone()),
            entity_re_t: tape.constant(table.entity_re.transpose()?),
            entity_im_t: tape.constant(table.entity_im.transpose()?),
        })
    }
}

/// Weighted binary cross-entropy of `σ(φ(v_topic, ℓ̂, v_t))` over every
/// entity `t`, normalised by the total weight. The topic itself has weight 0.
pub fn filter_loss<'t>(
    enc: EncoderVars<'t>,
    projection: Var<'t>,
    table: FrozenTable<'t>,
    batch: &[&FilterItem],
    negative_weight: f64,
) -> Result<Var<'t>, NumericsError> {
    let tape = projection.tape();
    let encoded = batch
        .iter()
        .map(|item| enc.encode(&item.tokens.ids))
        .collect::<Result<Vec<_>, _>>()?;
    let (rel_re, rel_im) = project_rows(tape.stack_rows(&encoded)?, projection)?;
    let topics: Vec<usize> = batch.iter().map(|i| i.topic.index()).collect();
    let head = ComplexVars {
        re: table.entity_re.gather_rows(&topics)?,
        im: table.entity_im.gather_rows(&topics)?,
    };
    let rel = ComplexVars { re: rel_re, im: rel_im };
    let q = head.hadamard(rel)?;
    let scores = q.re.matmul(table.entity_re_t)?.add(q.im.matmul(table.entity_im_t)?)?;

    let n = table.entity_re.value().rows();
    let mut targets = Tensor::zeros(&[batch.len(), n]);
    let mut weights = Tensor::filled(&[batch.len(), n], negative_weight);
    for (b, item) in batch.iter().enumerate() {
        for a in &item.answers {
            targets.data_mut()[b * n + a.index()] = 1.0;
            weights.data_mut()[b * n + a.index()] = 1.0;
        }
        weights.data_mut()[b * n + item.topic.index()] = 0.0;
    }
    let total: f64 = weights.data().iter().sum();
    if total <= 0.0 {
        return Err(NumericsError::Empty("filter loss weights"));
    }
    let targets = tape.constant(targets);
    let weights = tape.constant(weights);
    let bce = scores.softplus()?.sub(targets.mul(scores)?)?;
    Ok(bce.mul(weights)?.sum().scale(1.0 / total))
}

#[derive(Debug, Clone)]
pub struct FilterTraining {
    pub model: FilterModel,
    pub epoch_losses: Vec<f64>,
    /// `(epoch, dev hit@1)` at every check.
    pub dev_history: Vec<(usize, f64)>,
    pub skipped: usize,
}

pub fn prepare_items(vocab: &Vocabulary, mask_topic: bool, examples: &[ResolvedExample]) -> Result<Vec<FilterItem>> {
    examples
        .iter()
        .map(|ex| {
            Ok(FilterItem {
                tokens: tokenize(&ex.question, &ex.mention, vocab, mask_topic)?,
                topic: ex.topic,
                answers: ex.answers.clone(),
            })
        })
        .collect()
}

/// Trains the encoder and projection; the embedding table is only read.
/// With a non-empty `dev` set the best checkpoint by dev hit@1 is returned.
pub fn train_filter(
    kg: &crate::kg::KnowledgeGraph,
    table: Arc<ComplexEmbeddingTable>,
    train: &[QaExample],
    dev: &[QaExample],
    config: &FilterConfig,
) -> Result<FilterTraining> {
    if config.batch_size == 0 || config.hidden == 0 {
        return Err(Error::InvalidInput(
            "filter batch size and hidden size must be positive".into(),
        ));
    }
    if table.entity_count() != kg.entity_count() {
        return Err(Error::Dimension {
            expected: kg.entity_count(),
            actual: table.entity_count(),
        });
    }
    let resolved = resolve(kg, train);
    if resolved.examples.is_empty() {
        return Err(Error::InvalidInput(
            "no training example resolves to KG entities".into(),
        ));
    }
    let dev = resolve(kg, dev).examples;
    let vocab = Vocabulary::build(resolved.examples.iter().map(|e| e.question.as_str()));
    let items = prepare_items(&vocab, config.mask_topic, &resolved.examples)?;
    let mut model = FilterModel::new(
        table,
        vocab,
        config.hidden,
        config.pooling,
        config.mask_topic,
        config.seed,
    )?;
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED);
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut epoch_losses = Vec::new();
    let mut dev_history = Vec::new();
    let mut best: Option<(f64, FilterModel)> = None;
    let mut stale = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&FilterItem> = chunk.iter().map(|&i| &items[i]).collect();
            let loss = filter_step(&mut model, &mut optimizer, &batch, config.negative_weight)
                .map_err(|e| with_position(e, epoch, b))?;
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        debug!("filter epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);

        let check = config.eval_every > 0 && (epoch + 1) % config.eval_every == 0;
        if check && !dev.is_empty() {
            let hit = filter_hit_at_k(&model, &dev, 1)?;
            dev_history.push((epoch + 1, hit));
            info!("filter epoch {}: loss {mean:.4}, dev hit@1 {hit:.4}", epoch + 1);
            if best.as_ref().is_none_or(|(b, _)| hit > *b) {
                best = Some((hit, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok(FilterTraining {
        model,
        epoch_losses,
        dev_history,
        skipped: resolved.skipped,
    })
}

fn with_position(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Diverged { loss, .. } => Error::Diverged { epoch, batch, loss },
        other => other,
    }
}

/// One optimizer step on `batch`; returns the loss before the step.
pub fn filter_step(
    model: &mut FilterModel,
    optimizer: &mut Optimizer,
    batch: &[&FilterItem],
    negative_weight: f64,
) -> Result<f64> {
    let tape = Tape::new();
    let vars = model.bind(&tape);
    let enc = EncoderVars::new(&vars[..ENCODER_TENSORS], model.encoder.sequence.pooling);
    let frozen = FrozenTable::bind(&tape, &model.table)?;
    let loss = filter_loss(enc, vars[ENCODER_TENSORS], frozen, batch, negative_weight)?;
    let value = loss.scalar();
    if !value.is_finite() {
        return Err(Error::Diverged {
            epoch: 0,
            batch: 0,
            loss: value,
        });
    }
    let grads = tape.backward(loss)?;
    optimizer.apply(model, &vars, &grads)?;
    Ok(value)
}

/// Mean 1-based rank of answers and of non-answers (topic excluded) under
/// the filter's ordering.
pub fn rank_census(model: &FilterModel, examples: &[ResolvedExample]) -> Result<(f64, f64)> {
    let (mut gold, mut gold_n, mut other, mut other_n) = (0.0, 0usize, 0.0, 0usize);
    for ex in examples {
        for (r, c) in model.rank(ex)?.iter().enumerate() {
            if ex.is_answer(c.entity) {
                gold += (r + 1) as f64;
                gold_n += 1;
            } else {
                other += (r + 1) as f64;
                other_n += 1;
            }
        }
    }
    Ok((gold / gold_n.max(1) as f64, other / other_n.max(1) as f64))
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::embedding::complex_score;
    use crate::kg::{GraphBuilder, KnowledgeGraph};
    use crate::numerics::gradcheck;

    fn table_with(n: usize, d: usize, seed: u64) -> Arc<ComplexEmbeddingTable> {
        Arc::new(ComplexEmbeddingTable::random(n, 3, d, seed).unwrap())
    }

    fn model(table: Arc<ComplexEmbeddingTable>, hidden: usize) -> FilterModel {
        let vocab = Vocabulary::build(["who directed the film x ?"]);
        FilterModel::new(table, vocab, hidden, Pooling::Attention, false, 1).unwrap()
    }

    #[test]
    fn zero_projection_ties_sort_by_id() {
        let mut m = model(table_with(6, 4, 2), 3);
        m.projection = Tensor::zeros(&[6, 8]);
        let tokens = m.tokenize("who directed [x]", "x").unwrap();
        let ranked = score_all_entities(&m, EntityId(2), &tokens).unwrap();
        assert_eq!(ranked.len(), 5);
        assert!(ranked.iter().all(|c| c.score == 0.0));
        let ids: Vec<u32> = ranked.iter().map(|c| c.entity.0).collect();
        assert_eq!(ids, vec![0, 1, 3, 4, 5]);
        assert!(score_all_entities(&m, EntityId(6), &tokens).is_err());
    }

    #[test]
    fn constructed_table_ranks_entity_two_first() {
        // ℓ̂ is forced to 1 + 0i by the projection; entity 2 aligns with the topic
        let d = 2;
        let e_re = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.2, 0.1], vec![0.9, 0.0], vec![-1.0, 0.0]]).unwrap();
        let e_im = Tensor::zeros(&[4, d]);
        let table = Arc::new(
            ComplexEmbeddingTable::from_parts(e_re, e_im, Tensor::zeros(&[1, d]), Tensor::zeros(&[1, d])).unwrap(),
        );
        let mut m = model(table.clone(), 2);
        let tokens = m.tokenize("who directed [x]", "x").unwrap();
        let enc = encode_question(&m.encoder, &tokens).unwrap();
        // projection mapping the encoding to re = (1, 0), im = 0 exactly: put
        // 1/s on the first row for the largest-magnitude component s
        let (k, s) = enc
            .vector
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(k, s)| (k, *s))
            .unwrap();
        let mut p = Tensor::zeros(&[4, 4]);
        p.data_mut()[k * 4] = 1.0 / s;
        m.projection = p;
        let ranked = score_all_entities(&m, EntityId(0), &tokens).unwrap();
        assert_eq!(ranked[0].entity, EntityId(2));
        let h = table.entity(EntityId(0)).unwrap();
        let r = m.relation_query(&tokens).unwrap();
        for c in &ranked {
            let direct = complex_score(&h, &r, &table.entity(c.entity).unwrap()).unwrap();
            assert!((direct - c.score).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn ranking_is_sorted_and_matches_direct_scores() {
        let table = table_with(30, 5, 3);
        let m = model(table.clone(), 4);
        let tokens = m.tokenize("who directed the film [x] ?", "x").unwrap();
        let ranked = score_all_entities(&m, EntityId(7), &tokens).unwrap();
        assert_eq!(ranked.len(), 29);
        assert!(ranked
            .windows(2)
            .all(|w| w[0].score > w[1].score || (w[0].score == w[1].score && w[0].entity < w[1].entity)));
        let h = table.entity(EntityId(7)).unwrap();
        let r = m.relation_query(&tokens).unwrap();
        for c in &ranked {
            let direct = complex_score(&h, &r, &table.entity(c.entity).unwrap()).unwrap();
            assert!((direct - c.score).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn top_n_cases() {
        let ranked: Vec<ScoredCandidate> = (0..10)
            .map(|i| ScoredCandidate {
                entity: EntityId(i),
                score: -(i as f64),
            })
            .collect();
        assert_eq!(top_n(&ranked, 5).unwrap(), ranked[..5]);
        assert_eq!(top_n(&ranked, 50).unwrap(), ranked);
        for n in [5, 10, 15, 20] {
            assert_eq!(top_n(&ranked, n).unwrap().len(), n.min(10));
        }
        assert!(top_n(&ranked, 0).is_err());
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let table = table_with(5, 2, 4);
        let mut m = model(table.clone(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in m.tensors_mut() {
            for v in t.data_mut() {
                *v = rng.gen_range(-0.7..0.7);
            }
        }
        let items = [
            FilterItem {
                tokens: m.tokenize("who directed the film [x] ?", "x").unwrap(),
                topic: EntityId(1),
                answers: vec![EntityId(3)],
            },
            FilterItem {
                tokens: m.tokenize("who directed [x]", "x").unwrap(),
                topic: EntityId(0),
                answers: vec![EntityId(2), EntityId(4)],
            },
        ];
        let batch: Vec<&FilterItem> = items.iter().collect();
        let inputs: Vec<Tensor> = m.tensors().into_iter().cloned().collect();
        let pooling = m.encoder.sequence.pooling;
        let report = gradcheck::check(&inputs, 1e-5, |tape, v| {
            let enc = EncoderVars::new(&v[..ENCODER_TENSORS], pooling);
            filter_loss(enc, v[ENCODER_TENSORS], FrozenTable::bind(tape, &table)?, &batch, 0.5)
        })
        .unwrap();
        assert!(report.passes(1e-4), "{report:?}");
    }

    /// Each person directed one film and starred in another; questions ask
    /// for the director of a film or the films of an actor.
    fn toy_task() -> (KnowledgeGraph, Vec<QaExample>) {
        let mut b = GraphBuilder::new();
        let mut qa = Vec::new();
        for i in 0..12 {
            let film = format!("film{i}");
            let director = format!("person{i}");
            let actor = format!("person{}", (i + 5) % 12);
            b.add(&film, "directed_by", &director);
            b.add(&film, "starred_actors", &actor);
            qa.push(QaExample::new(format!("who directed [{film}]"), vec![director]).unwrap());
            qa.push(QaExample::new(format!("which films starred [{actor}]"), vec![film.clone()]).unwrap());
        }
        (b.build().augment_reverse().unwrap(), qa)
    }

    fn trained_table(kg: &KnowledgeGraph) -> Arc<ComplexEmbeddingTable> {
        let config = crate::embedding::EmbeddingTrainConfig {
            dim: 8,
            negatives_per_positive: 10,
            epochs: 150,
            batch_size: 16,
            seed: 1,
            ..Default::default()
        };
        Arc::new(crate::embedding::train_embeddings(kg, &config).unwrap().table)
    }

    #[test]
    fn training_keeps_table_frozen_and_ranks_gold_higher() {
        let (kg, qa) = toy_task();
        let table = trained_table(&kg);
        let before = table.fingerprint();
        let config = FilterConfig {
            hidden: 8,
            epochs: 60,
            batch_size: 8,
            optimizer: OptimizerSettings::adam(1e-2),
            seed: 2,
            ..Default::default()
        };
        let trained = train_filter(&kg, table.clone(), &qa, &[], &config).unwrap();
        assert_eq!(trained.model.table.fingerprint(), before);
        assert_eq!(table.fingerprint(), before);
        let resolved = resolve(&kg, &qa).examples;
        let (gold, other) = rank_census(&trained.model, &resolved).unwrap();
        assert!(gold < other, "gold {gold} other {other}");
        let hits: Vec<f64> = [1, 5, 10]
            .iter()
            .map(|&k| filter_hit_at_k(&trained.model, &resolved, k).unwrap())
            .collect();
        assert!(hits[0] <= hits[1] && hits[1] <= hits[2]);
        assert!(filter_hit_at_k(&trained.model, &resolved, 0).is_err());
        assert!(filter_hit_at_k(&trained.model, &[], 1).is_err());
    }

    #[test]
    fn one_step_lowers_the_first_batch_loss() {
        let (kg, qa) = toy_task();
        let table = trained_table(&kg);
        let resolved = resolve(&kg, &qa).examples;
        let vocab = Vocabulary::build(resolved.iter().map(|e| e.question.as_str()));
        let items = prepare_items(&vocab, false, &resolved).unwrap();
        let batch: Vec<&FilterItem> = items.iter().take(8).collect();
        let mut m = FilterModel::new(table, vocab, 8, Pooling::Attention, false, 3).unwrap();
        let mut opt = Optimizer::new(OptimizerSettings::adam(1e-3));
        let first = filter_step(&mut m, &mut opt, &batch, 1.0).unwrap();
        let second = filter_step(&mut m, &mut opt, &batch, 1.0).unwrap();
        assert!(second < first, "{first} -> {second}");
    }

    #[test]
    fn gold_at_rank_three_counts_from_k_five() {
        // scores fall with entity id, so entity 3 is third after excluding topic 0
        let d = 1;
        let e_re = Tensor::column((0..6).map(|i| 10.0 - i as f64).collect());
        let table = Arc::new(
            ComplexEmbeddingTable::from_parts(
                e_re,
                Tensor::zeros(&[6, d]),
                Tensor::zeros(&[1, d]),
                Tensor::zeros(&[1, d]),
            )
            .unwrap(),
        );
        let mut m = model(table, 2);
        let tokens = m.tokenize("who directed [x]", "x").unwrap();
        let enc = encode_question(&m.encoder, &tokens).unwrap();
        let k = enc.vector.iter().position(|v| v.abs() > 1e-6).unwrap();
        let mut p = Tensor::zeros(&[4, 2]);
        p.data_mut()[k * 2] = 1.0 / enc.vector[k];
        m.projection = p;
        let ex = ResolvedExample {
            index: 0,
            question: "who directed [x]".into(),
            mention: "x".into(),
            topic: EntityId(0),
            answers: vec![EntityId(3)],
        };
        let ranked = m.rank(&ex).unwrap();
        assert_eq!(ranked[2].entity, EntityId(3));
        let eval = [ex];
        assert_eq!(filter_hit_at_k(&m, &eval, 1).unwrap(), 0.0);
        assert_eq!(filter_hit_at_k(&m, &eval, 5).unwrap(), 1.0);
        assert_eq!(filter_hit_at_k(&m, &eval, 10).unwrap(), 1.0);
    }
}
