//! Stage two: a Siamese scorer between a question and the relational chain
//! from the topic to each candidate answer.
//!
//! The question side is `fc2(dropout(relu(fc1(enc(q)))))` over a masked
//! question; the chain side runs a BiLSTM with attention pooling over the
//! frozen `2d`-real relation embeddings. Relatedness is `exp(-‖V_q - V_r‖₂)`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::ResolvedExample;
use crate::embedding::ComplexEmbeddingTable;
use crate::encoder::{
    tokenize, EncoderParams, EncoderVars, Pooling, SequenceEncoder, SequenceVars, TokenSequence, Vocabulary,
    ENCODER_TENSORS, SEQUENCE_TENSORS,
};
use crate::error::{Error, Result};
use crate::filter::ScoredCandidate;
use crate::kg::{shortest_chains_from, ChainLookup, EntityId, KnowledgeGraph, RelationId, RelationalChain};
use crate::numerics::{
    dropout, xavier_init_with, NumericsError, Optimizer, OptimizerSettings, Parameters, Tape, Tensor, Var,
};

#[derive(Debug, Clone)]
pub struct ReasonerConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
    pub dropout: f64,
    pub mask_topic: bool,
    pub pooling: Pooling,
    pub eval_every: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            epochs: 120,
            batch_size: 32,
            optimizer: OptimizerSettings::adam(1e-3),
            dropout: 0.3,
            mask_topic: true,
            pooling: Pooling::Attention,
            eval_every: 10,
            patience: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasonerModel {
    pub table: Arc<ComplexEmbeddingTable>,
    pub vocab: Vocabulary,
    pub question: EncoderParams,
    pub fc1_w: Tensor,
    pub fc1_b: Tensor,
    pub fc2_w: Tensor,
    pub fc2_b: Tensor,
    pub chain: SequenceEncoder,
    pub dropout: f64,
    pub mask_topic: bool,
}

impl Parameters for ReasonerModel {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.question.tensors();
        v.extend([&self.fc1_w, &self.fc1_b, &self.fc2_w, &self.fc2_b]);
        v.extend(self.chain.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.question.tensors_mut();
        v.extend([&mut self.fc1_w, &mut self.fc1_b, &mut self.fc2_w, &mut self.fc2_b]);
        v.extend(self.chain.tensors_mut());
        v
    }
}

impl ReasonerModel {
    pub fn new(
        table: Arc<ComplexEmbeddingTable>,
        vocab: Vocabulary,
        hidden: usize,
        pooling: Pooling,
        dropout: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = 2 * hidden;
        Ok(Self {
            question: EncoderParams::new(vocab.len(), hidden, pooling, &mut rng)?,
            fc1_w: xavier_init_with(&[width, width], &mut rng)?,
            fc1_b: Tensor::zeros(&[1, width]),
            fc2_w: xavier_init_with(&[width, width], &mut rng)?,
            fc2_b: Tensor::zeros(&[1, width]),
            chain: SequenceEncoder::new(2 * table.dim(), hidden, pooling, &mut rng)?,
            table,
            vocab,
            dropout,
            mask_topic: true,
        })
    }

    pub fn width(&self) -> usize {
        self.fc2_w.cols()
    }

    pub fn tokenize(&self, question: &str, mention: &str) -> Result<TokenSequence> {
        tokenize(question, mention, &self.vocab, self.mask_topic)
    }

    /// `[M, 2d]` frozen features of a chain.
    pub fn chain_features(&self, chain: &RelationalChain) -> Result<Tensor> {
        if chain.is_empty() {
            return Err(Error::InvalidInput("empty relational chain".into()));
        }
        let rows = chain
            .relations
            .iter()
            .map(|&r| self.table.relation_features(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tensor::from_rows(&rows)?)
    }

    fn vars<'t>(&self, tape: &'t Tape, trainable: bool) -> (Vec<Var<'t>>, ReasonerVars<'t>) {
        let vars = if trainable {
            self.bind(tape)
        } else {
            self.bind_frozen(tape)
        };
        let view = ReasonerVars::new(&vars, self.question.sequence.pooling, self.chain.pooling, self.dropout);
        (vars, view)
    }
}

/// Tape view of a [`ReasonerModel`], in `tensors()` order.
#[derive(Debug, Clone, Copy)]
pub struct ReasonerVars<'t> {
    pub question: EncoderVars<'t>,
    pub fc1: [Var<'t>; 2],
    pub fc2: [Var<'t>; 2],
    pub chain: SequenceVars<'t>,
    pub dropout: f64,
}

pub const REASONER_TENSORS: usize = ENCODER_TENSORS + 4 + SEQUENCE_TENSORS;

impl<'t> ReasonerVars<'t> {
    pub fn new(vars: &[Var<'t>], question_pooling: Pooling, chain_pooling: Pooling, dropout: f64) -> Self {
        assert_eq!(
            vars.len(),
            REASONER_TENSORS,
            "reasoner binds {REASONER_TENSORS} tensors"
        );
        let e = ENCODER_TENSORS;
        Self {
            question: EncoderVars::new(&vars[..e], question_pooling),
            fc1: [vars[e], vars[e + 1]],
            fc2: [vars[e + 2], vars[e + 3]],
            chain: SequenceVars::new(&vars[e + 4..], chain_pooling),
            dropout,
        }
    }

    /// `V_q` as `[1, 2h]`. Dropout applies only when `training`.
    pub fn question_side(&self, ids: &[u32], training: bool, seed: u64) -> Result<Var<'t>, NumericsError> {
        let s = self.question.encode(ids)?;
        let hidden = s.matmul(self.fc1[0])?.add_row(self.fc1[1])?.relu()?;
        let hidden = dropout(hidden, self.dropout, training, seed)?;
        hidden.matmul(self.fc2[0])?.add_row(self.fc2[1])
    }

    /// `V_r` as `[1, 2h]` from `[M, 2d]` chain features.
    pub fn chain_side(&self, features: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.chain.encode(features)
    }
}

/// `exp(-‖a - b‖₂)` on the tape.
pub fn similarity_var<'t>(a: Var<'t>, b: Var<'t>) -> Result<Var<'t>, NumericsError> {
    let diff = a.sub(b)?;
    diff.mul(diff)?.sum().sqrt()?.neg()?.exp()
}

pub fn encode_question_side(model: &ReasonerModel, tokens: &TokenSequence) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let (_, v) = model.vars(&tape, false);
    Ok(v.question_side(&tokens.ids, false, 0)?.value().data().to_vec())
}

pub fn encode_chain_side(model: &ReasonerModel, chain: &RelationalChain) -> Result<Vec<f64>> {
    let features = model.chain_features(chain)?;
    let tape = Tape::new();
    let (_, v) = model.vars(&tape, false);
    Ok(v.chain_side(tape.constant(features))?.value().data().to_vec())
}

pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((-sq.sqrt()).exp())
}

/// A (question, chain) pair labelled by whether the chain's endpoint is a
/// gold answer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainingPair {
    /// Index into the example list the pairs were built from.
    pub example: usize,
    pub candidate: EntityId,
    pub chain: RelationalChain,
    pub label: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairBuild {
    pub pairs: Vec<TrainingPair>,
    pub positives: usize,
    pub negatives: usize,
    /// Candidates without a chain of at most `max_len` relations.
    pub unreachable: usize,
    /// Examples that contributed no pair.
    pub dropped_examples: usize,
}

/// Pairs from the top `n` filter candidates of each example.
/// `ranked[i]` is the filter ranking of `examples[i]`.
pub fn build_training_pairs(
    examples: &[ResolvedExample],
    ranked: &[Vec<ScoredCandidate>],
    kg: &KnowledgeGraph,
    n: usize,
    max_len: usize,
) -> Result<PairBuild> {
    if examples.len() != ranked.len() {
        return Err(Error::Dimension {
            expected: examples.len(),
            actual: ranked.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidInput("top-n needs n ≥ 1".into()));
    }
    let mut out = PairBuild::default();
    for (i, (ex, cands)) in examples.iter().zip(ranked).enumerate() {
        let chains = shortest_chains_from(kg, ex.topic, max_len)?;
        let before = out.pairs.len();
        for c in cands.iter().take(n) {
            match &chains[c.entity.index()] {
                ChainLookup::Found(chain) if !chain.is_empty() => {
                    let label = u8::from(ex.is_answer(c.entity));
                    if label == 1 {
                        out.positives += 1;
                    } else {
                        out.negatives += 1;
                    }
                    out.pairs.push(TrainingPair {
                        example: i,
                        candidate: c.entity,
                        chain: chain.clone(),
                        label,
                    });
                }
                _ => out.unreachable += 1,
            }
        }
        if out.pairs.len() == before {
            out.dropped_examples += 1;
        }
    }
    info!(
        "built {} pairs ({} positive, {} negative), {} unreachable candidates, {} examples dropped",
        out.pairs.len(),
        out.positives,
        out.negatives,
        out.unreachable,
        out.dropped_examples
    );
    Ok(out)
}

pub const PAIR_HEADER: &str = "# example\tcandidate\tchain\tlabel";

/// One pair per line: example id, candidate id, comma-separated relation
/// ids, label.
pub fn write_pairs(mut out: impl Write, pairs: &[TrainingPair]) -> std::io::Result<()> {
    writeln!(out, "{PAIR_HEADER}")?;
    for p in pairs {
        let chain: Vec<String> = p.chain.relations.iter().map(|r| r.0.to_string()).collect();
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            p.example,
            p.candidate.0,
            chain.join(","),
            p.label
        )?;
    }
    Ok(())
}

pub fn read_pairs(reader: impl BufRead) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Dataset {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let err = |m: &str| Error::Dataset {
            line: i + 1,
            message: m.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(err("expected 4 tab-separated fields"));
        }
        let num = |s: &str| s.trim().parse::<u32>().map_err(|_| err("invalid number"));
        let relations = fields[2]
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| num(s).map(RelationId))
            .collect::<Result<Vec<_>>>()?;
        let label = num(fields[3])?;
        if label > 1 {
            return Err(err("label must be 0 or 1"));
        }
        pairs.push(TrainingPair {
            example: num(fields[0])? as usize,
            candidate: EntityId(num(fields[1])?),
            chain: RelationalChain::new(relations),
            label: label as u8,
        });
    }
    Ok(pairs)
}

#[derive(Debug, Clone)]
pub struct ReasonerTraining {
    pub model: ReasonerModel,
    pub epoch_losses: Vec<f64>,
    /// `(epoch, dev loss)` at every check.
    pub dev_history: Vec<(usize, f64)>,
}

/// Pairs plus the tokenized questions they refer to.
pub struct PairSet<'a> {
    pub pairs: &'a [TrainingPair],
    pub examples: &'a [ResolvedExample],
}

/// Mean squared error between similarity and label over `pairs`. Question
/// and chain encodings are shared within the batch.
pub fn reasoner_loss<'t>(
    model: &ReasonerModel,
    vars: &ReasonerVars<'t>,
    tokens: &HashMap<usize, TokenSequence>,
    pairs: &[&TrainingPair],
    training: bool,
    seed: u64,
) -> Result<Var<'t>> {
    let tape = vars.fc1[0].tape();
    let mut questions: HashMap<usize, Var<'t>> = HashMap::new();
    let mut chains: HashMap<&RelationalChain, Var<'t>> = HashMap::new();
    let mut sims = Vec::with_capacity(pairs.len());
    for p in pairs {
        let q = match questions.get(&p.example) {
            Some(&q) => q,
            None => {
                let ids = &tokens
                    .get(&p.example)
                    .ok_or_else(|| Error::InvalidInput(format!("pair refers to unknown example {}", p.example)))?
                    .ids;
                let q = vars.question_side(ids, training, seed ^ (p.example as u64).wrapping_mul(0x9E37_79B9))?;
                questions.insert(p.example, q);
                q
            }
        };
        let r = match chains.get(&p.chain) {
            Some(&r) => r,
            None => {
                let r = vars.chain_side(tape.constant(model.chain_features(&p.chain)?))?;
                chains.insert(&p.chain, r);
                r
            }
        };
        sims.push(similarity_var(q, r)?);
    }
    let sims = tape.concat_cols(&sims)?;
    let labels = tape.constant(Tensor::row(pairs.iter().map(|p| p.label as f64).collect()));
    let err = sims.sub(labels)?;
    Ok(err.mul(err)?.mean())
}

fn tokenize_examples(
    model: &ReasonerModel,
    examples: &[ResolvedExample],
    pairs: &[TrainingPair],
) -> Result<HashMap<usize, TokenSequence>> {
    let mut out = HashMap::new();
    for p in pairs {
        if out.contains_key(&p.example) {
            continue;
        }
        let ex = examples
            .get(p.example)
            .ok_or_else(|| Error::InvalidInput(format!("pair refers to unknown example {}", p.example)))?;
        out.insert(p.example, model.tokenize(&ex.question, &ex.mention)?);
    }
    Ok(out)
}

/// Mean pair loss with dropout off.
pub fn evaluate_pairs(model: &ReasonerModel, set: &PairSet<'_>) -> Result<f64> {
    if set.pairs.is_empty() {
        return Err(Error::InvalidInput("no pairs to evaluate".into()));
    }
    let tokens = tokenize_examples(model, set.examples, set.pairs)?;
    let mut total = 0.0;
    for chunk in set.pairs.chunks(256) {
        let tape = Tape::new();
        let (_, vars) = model.vars(&tape, false);
        let batch: Vec<&TrainingPair> = chunk.iter().collect();
        total += reasoner_loss(model, &vars, &tokens, &batch, false, 0)?.scalar() * chunk.len() as f64;
    }
    Ok(total / set.pairs.len() as f64)
}

/// Trains on `train` pairs. With `dev` pairs, the parameters with the lowest
/// dev loss seen at a check are returned.
pub fn train_reasoner(
    table: Arc<ComplexEmbeddingTable>,
    train: &PairSet<'_>,
    dev: Option<&PairSet<'_>>,
    config: &ReasonerConfig,
) -> Result<ReasonerTraining> {
    let positives = train.pairs.iter().filter(|p| p.label == 1).count();
    if positives == 0 || positives == train.pairs.len() {
        return Err(Error::InvalidInput(
            "reasoner training needs both positive and negative pairs".into(),
        ));
    }
    if config.batch_size == 0 || config.hidden == 0 {
        return Err(Error::InvalidInput(
            "reasoner batch size and hidden size must be positive".into(),
        ));
    }
    let vocab = Vocabulary::build(train.examples.iter().map(|e| e.question.as_str()));
    let mut model = ReasonerModel::new(table, vocab, config.hidden, config.pooling, config.dropout, config.seed)?;
    model.mask_topic = config.mask_topic;
    let tokens = tokenize_examples(&model, train.examples, train.pairs)?;
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xC4A1);
    let mut order: Vec<usize> = (0..train.pairs.len()).collect();
    let mut epoch_losses = Vec::new();
    let mut dev_history = Vec::new();
    let mut best: Option<(f64, ReasonerModel)> = None;
    let mut stale = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&TrainingPair> = chunk.iter().map(|&i| &train.pairs[i]).collect();
            let tape = Tape::new();
            let (leaves, vars) = model.vars(&tape, true);
            let loss = reasoner_loss(&model, &vars, &tokens, &batch, true, rng.gen())?;
            let value = loss.scalar();
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: value,
                });
            }
            let grads = tape.backward(loss)?;
            optimizer.apply(&mut model, &leaves, &grads)?;
            total += value;
            batches += 1;
        }
        let mean = total / batches as f64;
        debug!("reasoner epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);

        let check = config.eval_every > 0 && (epoch + 1) % config.eval_every == 0;
        if let (true, Some(dev)) = (check, dev.filter(|d| !d.pairs.is_empty())) {
            let loss = evaluate_pairs(&model, dev)?;
            dev_history.push((epoch + 1, loss));
            info!("reasoner epoch {}: loss {mean:.4}, dev loss {loss:.4}", epoch + 1);
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                best = Some((loss, model.clone()));
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
    Ok(ReasonerTraining {
        model,
        epoch_losses,
        dev_history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedChoice {
    pub answer: EntityId,
    /// Similarity per candidate, `None` where no chain exists.
    pub similarities: Vec<Option<f64>>,
    /// True when no candidate had a chain and the filter decided.
    pub fell_back: bool,
}

/// Highest similarity among reachable candidates; ties go to the higher
/// filter score, then the lower entity id. Without any reachable candidate
/// the best filter score wins.
pub fn select_answer(candidates: &[ScoredCandidate], similarities: &[Option<f64>]) -> Result<(EntityId, bool)> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidates to rank".into()));
    }
    if candidates.len() != similarities.len() {
        return Err(Error::Dimension {
            expected: candidates.len(),
            actual: similarities.len(),
        });
    }
    let by_filter =
        |a: &ScoredCandidate, b: &ScoredCandidate| a.score.total_cmp(&b.score).then(b.entity.cmp(&a.entity));
    let reachable = candidates
        .iter()
        .zip(similarities)
        .filter_map(|(c, s)| s.map(|s| (c, s)))
        .max_by(|(a, sa), (b, sb)| sa.total_cmp(sb).then_with(|| by_filter(a, b)));
    match reachable {
        Some((c, _)) => Ok((c.entity, false)),
        None => {
            let best = candidates.iter().max_by(|a, b| by_filter(a, b)).expect("non-empty");
            Ok((best.entity, true))
        }
    }
}

pub fn rank_candidates(
    model: &ReasonerModel,
    tokens: &TokenSequence,
    candidates: &[(ScoredCandidate, ChainLookup)],
) -> Result<RankedChoice> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidates to rank".into()));
    }
    let tape = Tape::new();
    let (_, vars) = model.vars(&tape, false);
    let q = vars.question_side(&tokens.ids, false, 0)?;
    let mut similarities = Vec::with_capacity(candidates.len());
    for (_, lookup) in candidates {
        let s = match lookup {
            ChainLookup::Found(chain) if !chain.is_empty() => {
                let r = vars.chain_side(tape.constant(model.chain_features(chain)?))?;
                Some(similarity_var(q, r)?.scalar())
            }
            _ => None,
        };
        similarities.push(s);
    }
    let scored: Vec<ScoredCandidate> = candidates.iter().map(|(c, _)| *c).collect();
    let (answer, fell_back) = select_answer(&scored, &similarities)?;
    Ok(RankedChoice {
        answer,
        similarities,
        fell_back,
    })
}
