//! ComplEx knowledge graph embeddings.
//!
//! Entities and relations live in `ℂᵈ`, stored as parallel real and
//! imaginary blocks. A fact `(h, r, t)` scores `Re(Σₖ hₖ rₖ conj(tₖ))`,
//! which expands to four real products per component:
//!
//! ```text
//! (h_re r_re - h_im r_im) t_re + (h_re r_im + h_im r_re) t_im
//! ```

use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::numerics::{xavier_init_with, NumericsError, Optimizer, OptimizerSettings, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::Dimension {
                expected: re.len(),
                actual: im.len(),
            });
        }
        Ok(Self { re, im })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            re: vec![0.0; d],
            im: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.re.len()
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.iter().map(|v| -v).collect(),
        }
    }

    /// Componentwise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        let (re, im) = self
            .re
            .iter()
            .zip(&self.im)
            .zip(other.re.iter().zip(&other.im))
            .map(|((a, b), (c, d))| (a * c - b * d, a * d + b * c))
            .unzip();
        Ok(Self { re, im })
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension { expected, actual });
    }
    Ok(())
}

/// `Re(⟨h, r, conj(t)⟩)`.
pub fn complex_score(h: &ComplexVector, r: &ComplexVector, t: &ComplexVector) -> Result<f64> {
    check_dim(h.dim(), r.dim())?;
    check_dim(h.dim(), t.dim())?;
    let mut s = 0.0;
    for k in 0..h.dim() {
        let (hr, hi, rr, ri, tr, ti) = (h.re[k], h.im[k], r.re[k], r.im[k], t.re[k], t.im[k]);
        s += (hr * rr - hi * ri) * tr + (hr * ri + hi * rr) * ti;
    }
    Ok(s)
}

/// Complex values on a tape as real and imaginary blocks of equal shape.
#[derive(Debug, Clone, Copy)]
pub struct ComplexVars<'t> {
    pub re: Var<'t>,
    pub im: Var<'t>,
}

impl<'t> ComplexVars<'t> {
    pub fn hadamard(self, other: ComplexVars<'t>) -> Result<ComplexVars<'t>, NumericsError> {
        let re = self.re.mul(other.re)?.sub(self.im.mul(other.im)?)?;
        let im = self.re.mul(other.im)?.add(self.im.mul(other.re)?)?;
        Ok(ComplexVars { re, im })
    }
}

/// Row-aligned scores of `[B, d]` blocks, returned as `[B, 1]`.
pub fn complex_score_rows<'t>(
    h: ComplexVars<'t>,
    r: ComplexVars<'t>,
    t: ComplexVars<'t>,
) -> Result<Var<'t>, NumericsError> {
    let hr = h.hadamard(r)?;
    hr.re.mul(t.re)?.add(hr.im.mul(t.im)?)?.row_sum()
}

/// Scores of one `[1, d]` query `h∘r` against every row of the `[n, d]`
/// candidate blocks, as `[n, 1]`.
pub fn complex_score_against<'t>(
    query: ComplexVars<'t>,
    candidates: ComplexVars<'t>,
) -> Result<Var<'t>, NumericsError> {
    let a = candidates.re.matmul(query.re.transpose()?)?;
    let b = candidates.im.matmul(query.im.transpose()?)?;
    a.add(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEmbeddingTable {
    pub entity_re: Tensor,
    pub entity_im: Tensor,
    pub relation_re: Tensor,
    pub relation_im: Tensor,
}

impl ComplexEmbeddingTable {
    pub fn random(entities: usize, relations: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            entity_re: xavier_init_with(&[entities, dim], &mut rng)?,
            entity_im: xavier_init_with(&[entities, dim], &mut rng)?,
            relation_re: xavier_init_with(&[relations, dim], &mut rng)?,
            relation_im: xavier_init_with(&[relations, dim], &mut rng)?,
        })
    }

    pub fn from_parts(entity_re: Tensor, entity_im: Tensor, relation_re: Tensor, relation_im: Tensor) -> Result<Self> {
        let d = entity_re.cols();
        for t in [&entity_re, &entity_im, &relation_re, &relation_im] {
            t.dims2()?;
            check_dim(d, t.cols())?;
        }
        check_dim(entity_re.rows(), entity_im.rows())?;
        check_dim(relation_re.rows(), relation_im.rows())?;
        Ok(Self {
            entity_re,
            entity_im,
            relation_re,
            relation_im,
        })
    }

    pub fn dim(&self) -> usize {
        self.entity_re.cols()
    }

    pub fn entity_count(&self) -> usize {
        self.entity_re.rows()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_re.rows()
    }

    pub fn entity(&self, e: EntityId) -> Result<ComplexVector> {
        if e.index() >= self.entity_count() {
            return Err(Error::InvalidInput(format!("entity {e} has no embedding")));
        }
        Ok(ComplexVector {
            re: self.entity_re.row_slice(e.index()).to_vec(),
            im: self.entity_im.row_slice(e.index()).to_vec(),
        })
    }

    pub fn relation(&self, r: RelationId) -> Result<ComplexVector> {
        if r.index() >= self.relation_count() {
            return Err(Error::InvalidInput(format!("relation {r} has no embedding")));
        }
        Ok(ComplexVector {
            re: self.relation_re.row_slice(r.index()).to_vec(),
            im: self.relation_im.row_slice(r.index()).to_vec(),
        })
    }

    /// The `2d` real feature row `[re; im]` of a relation.
    pub fn relation_features(&self, r: RelationId) -> Result<Vec<f64>> {
        let v = self.relation(r)?;
        let mut out = v.re;
        out.extend(v.im);
        Ok(out)
    }

    pub fn score(&self, t: &Triple) -> Result<f64> {
        complex_score(
            &self.entity(t.head)?,
            &self.relation(t.relation)?,
            &self.entity(t.tail)?,
        )
    }

    /// Scores `Re(⟨q, conj(t)⟩)` of a query `q = h∘r` against every entity.
    pub fn tail_scores(&self, query: &ComplexVector) -> Result<Vec<f64>> {
        check_dim(self.dim(), query.dim())?;
        let n = self.entity_count();
        Ok((0..n)
            .map(|e| {
                let re = self.entity_re.row_slice(e);
                let im = self.entity_im.row_slice(e);
                re.iter().zip(&query.re).map(|(a, b)| a * b).sum::<f64>()
                    + im.iter().zip(&query.im).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect())
    }

    /// Hash of every stored bit, for freeze checks.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for t in [&self.entity_re, &self.entity_im, &self.relation_re, &self.relation_im] {
            t.shape().hash(&mut h);
            for v in t.data() {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingTrainConfig {
    pub dim: usize,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
    pub l2_weight: f64,
    pub corrupt_heads: bool,
    pub seed: u64,
}

impl Default for EmbeddingTrainConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            negatives_per_positive: 50,
            epochs: 100,
            batch_size: 128,
            optimizer: OptimizerSettings::adam(3e-2),
            l2_weight: 1e-3,
            corrupt_heads: false,
            seed: 0,
        }
    }
}

/// Which slot of a fact was replaced to build a negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    Tail,
    Relation,
    Head,
}

pub fn corruption_kind(source: &Triple, negative: &Triple) -> Corruption {
    if negative.tail != source.tail {
        Corruption::Tail
    } else if negative.relation != source.relation {
        Corruption::Relation
    } else {
        Corruption::Head
    }
}

pub fn sample_negatives(triple: &Triple, kg: &KnowledgeGraph, k: usize, seed: u64) -> Result<Vec<Triple>> {
    sample_negatives_with(triple, kg, k, false, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Draws `k` distinct corruptions of `triple` (tail or relation replaced,
/// optionally head) none of which is a true fact in `kg`.
pub fn sample_negatives_with<R: Rng + ?Sized>(
    triple: &Triple,
    kg: &KnowledgeGraph,
    k: usize,
    corrupt_heads: bool,
    rng: &mut R,
) -> Result<Vec<Triple>> {
    if k == 0 {
        return Err(Error::InvalidInput("negatives per positive must be at least 1".into()));
    }
    let n = kg.entity_count() as u32;
    let m = kg.relation_count() as u32;
    let kinds = if corrupt_heads { 3 } else { 2 };
    let mut chosen: Vec<Triple> = Vec::with_capacity(k);
    let mut seen: HashSet<Triple> = HashSet::with_capacity(k);

    for _ in 0..k * 20 {
        if chosen.len() == k {
            return Ok(chosen);
        }
        let candidate = match rng.gen_range(0..kinds) {
            0 if n > 1 => Triple::new(triple.head, triple.relation, EntityId(rng.gen_range(0..n))),
            1 if m > 1 => Triple::new(triple.head, RelationId(rng.gen_range(0..m)), triple.tail),
            2 if n > 1 => Triple::new(EntityId(rng.gen_range(0..n)), triple.relation, triple.tail),
            _ => continue,
        };
        if candidate != *triple && !kg.contains(&candidate) && seen.insert(candidate) {
            chosen.push(candidate);
        }
    }
    if chosen.len() == k {
        return Ok(chosen);
    }

    // Rejection stalled: enumerate what is left and draw from it.
    let mut pool: Vec<Triple> = (0..n)
        .map(|e| Triple::new(triple.head, triple.relation, EntityId(e)))
        .chain((0..m).map(|r| Triple::new(triple.head, RelationId(r), triple.tail)))
        .chain(
            (0..n)
                .filter(|_| corrupt_heads)
                .map(|e| Triple::new(EntityId(e), triple.relation, triple.tail)),
        )
        .filter(|c| c != triple && !kg.contains(c) && !seen.contains(c))
        .collect();
    pool.sort_unstable();
    pool.dedup();
    let needed = k - chosen.len();
    if pool.len() < needed {
        return Err(Error::NegativesExhausted {
            requested: k,
            available: chosen.len() + pool.len(),
        });
    }
    pool.shuffle(rng);
    chosen.extend(pool.into_iter().take(needed));
    Ok(chosen)
}

#[derive(Debug, Clone)]
pub struct EmbeddingTraining {
    pub table: ComplexEmbeddingTable,
    /// Mean loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minimises `mean softplus(-y·φ)` over facts (`y = +1`) and their filtered
/// negatives (`y = -1`), plus `l2_weight` times the mean squared norm of the
/// embeddings touched by each batch.
pub fn train_embeddings(kg: &KnowledgeGraph, config: &EmbeddingTrainConfig) -> Result<EmbeddingTraining> {
    if kg.triple_count() == 0 {
        return Err(Error::Kg(crate::kg::KgError::Empty));
    }
    if !kg.is_augmented() {
        return Err(Error::InvalidInput(
            "embeddings train on a reverse-augmented graph".into(),
        ));
    }
    if config.negatives_per_positive == 0 || config.batch_size == 0 || config.dim == 0 {
        return Err(Error::InvalidInput(
            "embedding dim, batch size and negatives per positive must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut table = ComplexEmbeddingTable::random(kg.entity_count(), kg.relation_count(), config.dim, rng.gen())?;
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut order: Vec<usize> = (0..kg.triple_count()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut heads = Vec::new();
            let mut rels = Vec::new();
            let mut tails = Vec::new();
            let mut signs = Vec::new();
            for &i in chunk {
                let pos = kg.triples()[i];
                let negs =
                    sample_negatives_with(&pos, kg, config.negatives_per_positive, config.corrupt_heads, &mut rng)?;
                for (t, y) in std::iter::once((pos, 1.0)).chain(negs.into_iter().map(|t| (t, -1.0))) {
                    heads.push(t.head.index());
                    rels.push(t.relation.index());
                    tails.push(t.tail.index());
                    signs.push(y);
                }
            }
            let tape = Tape::new();
            let params = [
                tape.var(table.entity_re.clone()),
                tape.var(table.entity_im.clone()),
                tape.var(table.relation_re.clone()),
                tape.var(table.relation_im.clone()),
            ];
            let loss = logistic_loss(&tape, params, &heads, &rels, &tails, &signs, config.l2_weight)?;
            let value = loss.scalar();
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: value,
                });
            }
            let grads = tape.backward(loss)?;
            let grads: Vec<Tensor> = params.iter().map(|&p| grads.get_or_zeros(p)).collect();
            optimizer.step(
                &mut [
                    &mut table.entity_re,
                    &mut table.entity_im,
                    &mut table.relation_re,
                    &mut table.relation_im,
                ],
                &grads,
            )?;
            total += value;
            batches += 1;
        }
        let mean = total / batches.max(1) as f64;
        debug!("kge epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);
    }
    if let Some(last) = epoch_losses.last() {
        info!("kge trained {} epochs, final loss {last:.5}", config.epochs);
    }
    Ok(EmbeddingTraining { table, epoch_losses })
}

/// The embedding objective as a tape expression over the four parameter
/// blocks `[entity_re, entity_im, relation_re, relation_im]`.
pub fn logistic_loss<'t>(
    tape: &'t Tape,
    params: [Var<'t>; 4],
    heads: &[usize],
    rels: &[usize],
    tails: &[usize],
    signs: &[f64],
    l2_weight: f64,
) -> Result<Var<'t>, NumericsError> {
    let [e_re, e_im, r_re, r_im] = params;
    let h = ComplexVars {
        re: e_re.gather_rows(heads)?,
        im: e_im.gather_rows(heads)?,
    };
    let r = ComplexVars {
        re: r_re.gather_rows(rels)?,
        im: r_im.gather_rows(rels)?,
    };
    let t = ComplexVars {
        re: e_re.gather_rows(tails)?,
        im: e_im.gather_rows(tails)?,
    };
    let scores = complex_score_rows(h, r, t)?;
    let neg_signs = tape.constant(Tensor::column(signs.iter().map(|y| -y).collect()));
    let data = scores.mul(neg_signs)?.softplus()?.mean();
    if l2_weight == 0.0 {
        return Ok(data);
    }
    let sq = |v: Var<'t>| -> Result<Var<'t>, NumericsError> { Ok(v.mul(v)?.sum()) };
    let norms = sq(h.re)?
        .add(sq(h.im)?)?
        .add(sq(r.re)?)?
        .add(sq(r.im)?)?
        .add(sq(t.re)?)?
        .add(sq(t.im)?)?;
    data.add(norms.scale(l2_weight / signs.len().max(1) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPredictionMetrics {
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
    pub mean_reciprocal_rank: f64,
    pub queries: usize,
}

/// Filtered tail ranking: each held-out `(h, r, t)` ranks `t` among all
/// entities, ignoring other tails known true in `kg` or `held_out`. Ties
/// count against the true tail.
pub fn link_prediction_eval(
    table: &ComplexEmbeddingTable,
    kg: &KnowledgeGraph,
    held_out: &[Triple],
) -> Result<LinkPredictionMetrics> {
    if held_out.is_empty() {
        return Err(Error::InvalidInput("held-out set is empty".into()));
    }
    if let Some(t) = held_out.iter().find(|t| kg.contains(t)) {
        return Err(Error::InvalidInput(format!(
            "held-out triple ({}, {}, {}) is also a training triple",
            t.head, t.relation, t.tail
        )));
    }
    let held: HashSet<Triple> = held_out.iter().copied().collect();
    let (mut h1, mut h3, mut h10, mut rr) = (0usize, 0usize, 0usize, 0.0);
    for t in held_out {
        let query = table.entity(t.head)?.hadamard(&table.relation(t.relation)?)?;
        let scores = table.tail_scores(&query)?;
        let target = scores[t.tail.index()];
        let mut rank = 1;
        for (e, &s) in scores.iter().enumerate() {
            if e == t.tail.index() || s < target {
                continue;
            }
            let other = Triple::new(t.head, t.relation, EntityId(e as u32));
            if kg.contains(&other) || held.contains(&other) {
                continue;
            }
            rank += 1;
        }
        h1 += usize::from(rank <= 1);
        h3 += usize::from(rank <= 3);
        h10 += usize::from(rank <= 10);
        rr += 1.0 / rank as f64;
    }
    let q = held_out.len() as f64;
    Ok(LinkPredictionMetrics {
        hits_at_1: h1 as f64 / q,
        hits_at_3: h3 as f64 / q,
        hits_at_10: h10 as f64 / q,
        mean_reciprocal_rank: rr / q,
        queries: held_out.len(),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::kg::GraphBuilder;
    use crate::numerics::gradcheck;

    /// Direct complex arithmetic, independent of the real expansion above.
    fn oracle(h: &ComplexVector, r: &ComplexVector, t: &ComplexVector) -> f64 {
        #[derive(Clone, Copy)]
        struct C(f64, f64);
        let mul = |a: C, b: C| C(a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
        let mut acc = C(0.0, 0.0);
        for k in 0..h.dim() {
            let p = mul(mul(C(h.re[k], h.im[k]), C(r.re[k], r.im[k])), C(t.re[k], -t.im[k]));
            acc = C(acc.0 + p.0, acc.1 + p.1);
        }
        acc.0
    }

    fn cv(re: &[f64], im: &[f64]) -> ComplexVector {
        ComplexVector::new(re.to_vec(), im.to_vec()).unwrap()
    }

    fn arb_cv(d: usize) -> impl Strategy<Value = ComplexVector> {
        (
            proptest::collection::vec(-2.0f64..2.0, d),
            proptest::collection::vec(-2.0f64..2.0, d),
        )
            .prop_map(|(re, im)| ComplexVector { re, im })
    }

    #[test]
    fn unit_and_imaginary_cases() {
        let one = cv(&[1.0], &[0.0]);
        assert_eq!(complex_score(&one, &one, &one).unwrap(), 1.0);
        let i = cv(&[0.0], &[1.0]);
        assert_eq!(complex_score(&i, &i, &i).unwrap(), 0.0);
        assert!(matches!(
            complex_score(&one, &cv(&[1.0, 2.0], &[0.0, 0.0]), &one),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn matches_direct_complex_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [1usize, 2, 8] {
            for _ in 0..1000 {
                let mut draw = || ComplexVector {
                    re: (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                    im: (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                };
                let (h, r, t) = (draw(), draw(), draw());
                let got = complex_score(&h, &r, &t).unwrap();
                let want = oracle(&h, &r, &t);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn conjugation_symmetry(h in arb_cv(4), r in arb_cv(4), t in arb_cv(4)) {
            let a = complex_score(&h, &r, &t).unwrap();
            let b = complex_score(&t, &r.conj(), &h).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn linear_in_relation(h in arb_cv(3), r1 in arb_cv(3), r2 in arb_cv(3), t in arb_cv(3)) {
            let sum = ComplexVector {
                re: r1.re.iter().zip(&r2.re).map(|(a, b)| a + b).collect(),
                im: r1.im.iter().zip(&r2.im).map(|(a, b)| a + b).collect(),
            };
            let lhs = complex_score(&h, &sum, &t).unwrap();
            let rhs = complex_score(&h, &r1, &t).unwrap() + complex_score(&h, &r2, &t).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn score_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inputs: Vec<Tensor> = (0..6)
            .map(|_| Tensor::row((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let r = gradcheck::check(&inputs, 1e-5, |_, v| {
            let s = complex_score_rows(
                ComplexVars { re: v[0], im: v[1] },
                ComplexVars { re: v[2], im: v[3] },
                ComplexVars { re: v[4], im: v[5] },
            )?;
            Ok(s.sum())
        })
        .unwrap();
        assert!(r.passes(1e-4), "{r:?}");
    }

    #[test]
    fn logistic_loss_gradient_matches_finite_differences() {
        let table = ComplexEmbeddingTable::random(5, 3, 3, 4).unwrap();
        let inputs = vec![table.entity_re, table.entity_im, table.relation_re, table.relation_im];
        let heads = [0, 1, 2, 4, 0];
        let rels = [0, 1, 2, 0, 2];
        let tails = [1, 2, 3, 0, 0];
        let signs = [1.0, -1.0, -1.0, 1.0, -1.0];
        let r = gradcheck::check(&inputs, 1e-5, |tape, v| {
            logistic_loss(tape, [v[0], v[1], v[2], v[3]], &heads, &rels, &tails, &signs, 0.01)
        })
        .unwrap();
        assert!(r.passes(1e-4), "{r:?}");
    }

    fn toy_graph() -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        b.add("a", "likes", "b");
        b.add("b", "likes", "c");
        b.add("c", "knows", "a");
        b.add("d", "knows", "b");
        b.add("e", "likes", "d");
        for i in 0..60 {
            b.entity(&format!("pad{i}"));
        }
        b.build().augment_reverse().unwrap()
    }

    #[test]
    fn negatives_are_filtered_distinct_and_mixed() {
        let kg = toy_graph();
        let t = kg.triples()[0];
        let negs = sample_negatives(&t, &kg, 50, 1).unwrap();
        assert_eq!(negs.len(), 50);
        assert!(negs.iter().all(|n| !kg.contains(n)));
        let distinct: HashSet<_> = negs.iter().collect();
        assert_eq!(distinct.len(), 50);
        assert_eq!(negs, sample_negatives(&t, &kg, 50, 1).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut tails, mut rels) = (0, 0);
        for _ in 0..10_000 {
            let n = sample_negatives_with(&t, &kg, 1, false, &mut rng).unwrap()[0];
            match corruption_kind(&t, &n) {
                Corruption::Tail => tails += 1,
                Corruption::Relation => rels += 1,
                Corruption::Head => unreachable!(),
            }
        }
        assert!(tails > 0 && rels > 0, "tails {tails} rels {rels}");
    }

    #[test]
    fn exhausted_pool_is_an_error() {
        let mut b = GraphBuilder::new();
        b.add("x", "r", "y");
        b.add("x", "r", "x");
        let kg = b.build();
        let err = sample_negatives(&kg.triples()[0], &kg, 1, 0).unwrap_err();
        assert!(matches!(err, Error::NegativesExhausted { available: 0, .. }), "{err}");
    }

    #[test]
    fn trained_toy_graph_separates_facts_from_corruptions() {
        let kg = toy_graph();
        let config = EmbeddingTrainConfig {
            dim: 8,
            epochs: 200,
            batch_size: 10,
            seed: 3,
            ..Default::default()
        };
        let trained = train_embeddings(&kg, &config).unwrap();
        let losses = &trained.epoch_losses;
        assert!(losses[..10].windows(2).all(|w| w[1] < w[0]), "{:?}", &losses[..10]);
        let table = &trained.table;
        for t in kg.triples() {
            let s = table.score(t).unwrap();
            assert!(s > 0.0, "fact scored {s}");
            // exhaustive: every tail and relation corruption that is not itself a fact
            for e in kg.entities() {
                let c = Triple::new(t.head, t.relation, e);
                if !kg.contains(&c) {
                    assert!(s > table.score(&c).unwrap());
                }
            }
            for r in 0..kg.relation_count() as u32 {
                let c = Triple::new(t.head, RelationId(r), t.tail);
                if !kg.contains(&c) {
                    assert!(s > table.score(&c).unwrap());
                }
            }
        }
    }

    #[test]
    fn untrained_table_shows_no_separation() {
        let kg = toy_graph();
        let table = ComplexEmbeddingTable::random(kg.entity_count(), kg.relation_count(), 8, 5).unwrap();
        let facts: f64 = kg.triples().iter().map(|t| table.score(t).unwrap()).sum::<f64>() / kg.triple_count() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let random: f64 = (0..2000)
            .map(|_| {
                let t = Triple::new(
                    EntityId(rng.gen_range(0..kg.entity_count() as u32)),
                    RelationId(rng.gen_range(0..kg.relation_count() as u32)),
                    EntityId(rng.gen_range(0..kg.entity_count() as u32)),
                );
                table.score(&t).unwrap()
            })
            .sum::<f64>()
            / 2000.0;
        assert!((facts - random).abs() < 0.5, "facts {facts} random {random}");
    }

    #[test]
    fn perfect_ranker_has_unit_hits() {
        // one relation, tail i+1 for head i; embeddings encode the successor exactly
        let n = 12;
        let mut b = GraphBuilder::new();
        for i in 0..n {
            b.entity(&format!("e{i}"));
        }
        let mut triples = Vec::new();
        for i in 0..n - 1 {
            b.add(&format!("e{i}"), "next", &format!("e{}", i + 1));
        }
        let full = b.build();
        triples.extend_from_slice(full.triples());
        let held = vec![triples.pop().unwrap()];
        let mut b = GraphBuilder::new();
        for i in 0..n {
            b.entity(&format!("e{i}"));
        }
        for t in &triples {
            b.add(
                full.entity_label(t.head).unwrap(),
                "next",
                full.entity_label(t.tail).unwrap(),
            );
        }
        let train = b.build();
        // tail embedding of e(i+1) equals the query of e(i): rotate by a fixed angle
        let theta = std::f64::consts::PI / n as f64;
        let mut e_re = Tensor::zeros(&[n, 1]);
        let mut e_im = Tensor::zeros(&[n, 1]);
        for i in 0..n {
            e_re.data_mut()[i] = (theta * i as f64).cos();
            e_im.data_mut()[i] = (theta * i as f64).sin();
        }
        let table =
            ComplexEmbeddingTable::from_parts(e_re, e_im, Tensor::scalar(theta.cos()), Tensor::scalar(theta.sin()))
                .unwrap();
        let m = link_prediction_eval(&table, &train, &held).unwrap();
        assert_eq!(m.hits_at_1, 1.0);
        assert_eq!(m.mean_reciprocal_rank, 1.0);
        assert!(link_prediction_eval(&table, &train, &[]).is_err());
        assert!(link_prediction_eval(&table, &train, &triples[..1]).is_err());
    }

    #[test]
    fn random_table_hits_at_10_is_near_uniform() {
        let n = 200;
        let mut b = GraphBuilder::new();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut held = Vec::new();
        for i in 0..n {
            b.entity(&format!("e{i}"));
        }
        let kg_labels: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
        b.relation("r");
        for _ in 0..400 {
            let h = rng.gen_range(0..n);
            let t = rng.gen_range(0..n);
            b.add(&kg_labels[h], "r", &kg_labels[t]);
        }
        let kg = b.build();
        while held.len() < 1000 {
            let t = Triple::new(
                EntityId(rng.gen_range(0..n as u32)),
                RelationId(0),
                EntityId(rng.gen_range(0..n as u32)),
            );
            if !kg.contains(&t) {
                held.push(t);
            }
        }
        held.sort();
        held.dedup();
        let table = ComplexEmbeddingTable::random(n, 1, 16, 11).unwrap();
        let m = link_prediction_eval(&table, &kg, &held).unwrap();
        // ~10 / n with a few filtered tails per query; binomial sd ≈ 0.007
        let expected = 10.0 / n as f64;
        assert!(
            (m.hits_at_10 - expected).abs() < 0.03,
            "hits@10 {} vs {expected}",
            m.hits_at_10
        );
    }
}
