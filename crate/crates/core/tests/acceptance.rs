//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 5 to 9 share two full training runs on the synthetic movie
//! benchmark plus one run on the pruned graph.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcekgqa::checkpoint::Checkpoint;
use rcekgqa::dataset::resolve;
use rcekgqa::embedding::{
    complex_score, link_prediction_eval, logistic_loss, train_embeddings, ComplexEmbeddingTable, ComplexVector,
    EmbeddingTrainConfig,
};
use rcekgqa::encoder::{EncoderVars, Pooling, Vocabulary, ENCODER_TENSORS};
use rcekgqa::filter::{filter_loss, FilterItem, FilterModel, FrozenTable};
use rcekgqa::kg::{shortest_relational_chain, ChainLookup, EntityId, GraphBuilder, RelationalChain};
use rcekgqa::numerics::{dropout, gradcheck, NumericsError, OptimizerSettings, Parameters, Tape, Tensor, Var};
use rcekgqa::pipeline::{evaluate, prepare_graph, train_pipeline, EvaluationReport, PipelineConfig, PipelineData};
use rcekgqa::reasoner::{
    encode_chain_side, encode_question_side, reasoner_loss, similarity, ReasonerModel, ReasonerVars, TrainingPair,
};
use rcekgqa::synth::{compositional_kg, generate_synthetic_benchmark, hold_out, SynthSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, elapsed: Duration, outcome: Result<Outcome, String>) -> bool {
    let (pass, detail) = match outcome {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} {id}. {name}: {detail} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1 -------------------------------------------------------------------------

fn complex_oracle() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for d in [1usize, 2, 8] {
        for _ in 0..1000 {
            let draw = |rng: &mut ChaCha8Rng| -> (ComplexVector, Vec<Complex64>) {
                let re: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let im: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let c = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
                (ComplexVector::new(re, im).expect("equal lengths"), c)
            };
            let (h, hc) = draw(&mut rng);
            let (r, rc) = draw(&mut rng);
            let (t, tc) = draw(&mut rng);
            let got = complex_score(&h, &r, &t).map_err(err)?;
            let want: Complex64 = (0..d).map(|k| hc[k] * rc[k] * tc[k].conj()).sum();
            let rel = (got - want.re).abs() / want.re.abs().max(1e-300);
            worst = worst.max(if want.re.abs() < 1e-12 {
                (got - want.re).abs()
            } else {
                rel
            });
            count += 1;
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-12,
        detail: format!("{count} triples, max relative error {worst:.2e}"),
    })
}

// 2 -------------------------------------------------------------------------

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).expect("shape")
}

type Case = (
    &'static str,
    Vec<Tensor>,
    Box<dyn for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, NumericsError>>,
);

fn primitive_cases(rng: &mut ChaCha8Rng) -> Vec<Case> {
    let a = random_tensor(rng, &[3, 4], -1.0, 1.0);
    let b = random_tensor(rng, &[3, 4], -1.0, 1.0);
    let m = random_tensor(rng, &[4, 2], -1.0, 1.0);
    let row = random_tensor(rng, &[1, 4], -1.0, 1.0);
    let pos = random_tensor(rng, &[3, 4], 0.2, 2.0);
    // keep relu inputs away from the kink
    let away: Tensor = a.map(|v| if v.abs() < 0.1 { v + 0.3 } else { v });
    vec![
        (
            "add",
            vec![a.clone(), b.clone()],
            Box::new(|_, v| Ok(v[0].add(v[1])?.mul(v[0])?.sum())),
        ),
        (
            "sub",
            vec![a.clone(), b.clone()],
            Box::new(|_, v| Ok(v[0].sub(v[1])?.mul(v[1])?.sum())),
        ),
        (
            "mul",
            vec![a.clone(), b.clone()],
            Box::new(|_, v| Ok(v[0].mul(v[1])?.sum())),
        ),
        (
            "scale",
            vec![a.clone()],
            Box::new(|_, v| Ok(v[0].scale(-2.5).mul(v[0])?.sum())),
        ),
        (
            "add_row",
            vec![a.clone(), row.clone()],
            Box::new(|_, v| Ok(v[0].add_row(v[1])?.tanh()?.sum())),
        ),
        (
            "matmul",
            vec![a.clone(), m.clone()],
            Box::new(|_, v| Ok(v[0].matmul(v[1])?.tanh()?.sum())),
        ),
        (
            "transpose",
            vec![a.clone(), m.clone()],
            Box::new(|_, v| Ok(v[1].transpose()?.matmul(v[0].transpose()?)?.exp()?.sum())),
        ),
        (
            "sigmoid",
            vec![a.clone()],
            Box::new(|_, v| Ok(v[0].sigmoid()?.mul(v[0])?.sum())),
        ),
        (
            "tanh",
            vec![a.clone()],
            Box::new(|_, v| Ok(v[0].tanh()?.mul(v[0])?.sum())),
        ),
        ("relu", vec![away], Box::new(|_, v| Ok(v[0].relu()?.mul(v[0])?.sum()))),
        ("exp", vec![a.clone()], Box::new(|_, v| Ok(v[0].exp()?.sum()))),
        (
            "neg",
            vec![a.clone()],
            Box::new(|_, v| Ok(v[0].neg()?.mul(v[0])?.exp()?.sum())),
        ),
        ("sqrt", vec![pos], Box::new(|_, v| Ok(v[0].sqrt()?.sum()))),
        (
            "softplus",
            vec![a.clone()],
            Box::new(|_, v| Ok(v[0].softplus()?.mul(v[0])?.sum())),
        ),
        (
            "softmax",
            vec![row.clone()],
            Box::new(|_, v| Ok(v[0].softmax()?.mul(v[0])?.sum())),
        ),
        ("mean", vec![a.clone()], Box::new(|_, v| Ok(v[0].mul(v[0])?.mean()))),
        (
            "row_sum",
            vec![a.clone()],
            Box::new(|_, v| Ok(v[0].row_sum()?.tanh()?.sum())),
        ),
        (
            "slice_cols",
            vec![a.clone()],
            Box::new(|_, v| Ok(v[0].slice_cols(1, 3)?.exp()?.sum())),
        ),
        (
            "gather_rows",
            vec![a.clone()],
            Box::new(|_, v| Ok(v[0].gather_rows(&[2, 0, 2])?.tanh()?.sum())),
        ),
        (
            "reshape",
            vec![a.clone()],
            Box::new(|_, v| Ok(v[0].reshape(vec![2, 6])?.matmul(v[0].reshape(vec![6, 2])?)?.sum())),
        ),
        (
            "concat_cols",
            vec![a.clone(), b.clone()],
            Box::new(|t, v| Ok(t.concat_cols(&[v[0], v[1]])?.tanh()?.sum())),
        ),
        (
            "stack_rows",
            vec![row.clone(), row],
            Box::new(|t, v| Ok(t.stack_rows(&[v[0], v[1].exp()?])?.sigmoid()?.sum())),
        ),
        (
            "dropout",
            vec![b],
            Box::new(|_, v| Ok(dropout(v[0], 0.4, true, 17)?.exp()?.sum())),
        ),
    ]
}

fn gradient_suite() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut results: Vec<(String, f64)> = Vec::new();
    for (name, inputs, f) in primitive_cases(&mut rng) {
        let r = gradcheck::check(&inputs, 1e-5, |t, v| f(t, v)).map_err(err)?;
        results.push((name.to_string(), r.max_relative_error));
    }

    // embedding objective
    let params: Vec<Tensor> = [[6, 3], [6, 3], [2, 3], [2, 3]]
        .iter()
        .map(|s| random_tensor(&mut rng, s, -0.8, 0.8))
        .collect();
    let r = gradcheck::check(&params, 1e-5, |tape, v| {
        logistic_loss(
            tape,
            [v[0], v[1], v[2], v[3]],
            &[0, 1, 2, 0],
            &[0, 1, 0, 1],
            &[3, 4, 5, 5],
            &[1.0, -1.0, 1.0, -1.0],
            0.05,
        )
    })
    .map_err(err)?;
    results.push(("logistic loss".into(), r.max_relative_error));

    // filter BCE
    let table = Arc::new(ComplexEmbeddingTable::random(5, 2, 2, 3).map_err(err)?);
    let vocab = Vocabulary::build(["who directed the film [x] ?"]);
    let mut filter = FilterModel::new(table.clone(), vocab, 2, Pooling::Attention, false, 4).map_err(err)?;
    for t in filter.tensors_mut() {
        for v in t.data_mut() {
            *v = rng.gen_range(-0.7..0.7);
        }
    }
    let items = [
        FilterItem {
            tokens: filter.tokenize("who directed the film [x] ?", "x").map_err(err)?,
            topic: EntityId(1),
            answers: vec![EntityId(3)],
        },
        FilterItem {
            tokens: filter.tokenize("who directed [x]", "x").map_err(err)?,
            topic: EntityId(0),
            answers: vec![EntityId(2), EntityId(4)],
        },
    ];
    let batch: Vec<&FilterItem> = items.iter().collect();
    let inputs: Vec<Tensor> = filter.tensors().into_iter().cloned().collect();
    let r = gradcheck::check(&inputs, 1e-5, |tape, v| {
        let enc = EncoderVars::new(&v[..ENCODER_TENSORS], Pooling::Attention);
        filter_loss(enc, v[ENCODER_TENSORS], FrozenTable::bind(tape, &table)?, &batch, 0.5)
    })
    .map_err(err)?;
    results.push(("filter BCE".into(), r.max_relative_error));

    // reasoner MSE
    let vocab = Vocabulary::build(["who directed the movies starring [x] ?"]);
    let mut reasoner = ReasonerModel::new(table.clone(), vocab, 2, Pooling::Attention, 0.0, 5).map_err(err)?;
    for t in reasoner.tensors_mut() {
        for v in t.data_mut() {
            *v = rng.gen_range(-0.7..0.7);
        }
    }
    let chain = |ids: &[u32]| RelationalChain::new(ids.iter().map(|&r| rcekgqa::kg::RelationId(r)).collect());
    let pairs = [
        TrainingPair {
            example: 0,
            candidate: EntityId(1),
            chain: chain(&[0, 1]),
            label: 1,
        },
        TrainingPair {
            example: 0,
            candidate: EntityId(2),
            chain: chain(&[1, 0]),
            label: 0,
        },
        TrainingPair {
            example: 1,
            candidate: EntityId(3),
            chain: chain(&[1]),
            label: 1,
        },
    ];
    let mut tokens = std::collections::HashMap::new();
    tokens.insert(
        0,
        reasoner
            .tokenize("who directed the movies starring [x] ?", "x")
            .map_err(err)?,
    );
    tokens.insert(1, reasoner.tokenize("who directed [x]", "x").map_err(err)?);
    let batch: Vec<&TrainingPair> = pairs.iter().collect();
    let inputs: Vec<Tensor> = reasoner.tensors().into_iter().cloned().collect();
    let r = gradcheck::check(&inputs, 1e-5, |_, v| {
        let vars = ReasonerVars::new(v, Pooling::Attention, Pooling::Attention, 0.0);
        reasoner_loss(&reasoner, &vars, &tokens, &batch, false, 0).map_err(|e| match e {
            rcekgqa::Error::Numerics(n) => n,
            _ => NumericsError::Empty("reasoner loss inputs"),
        })
    })
    .map_err(err)?;
    results.push(("reasoner MSE".into(), r.max_relative_error));

    let failing: Vec<String> = results
        .iter()
        .filter(|(_, e)| *e > 1e-4)
        .map(|(n, e)| format!("{n} ({e:.1e})"))
        .collect();
    let worst = results.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(Outcome {
        pass: failing.is_empty(),
        detail: if failing.is_empty() {
            format!("{} paths, max relative error {worst:.2e}", results.len())
        } else {
            format!("over tolerance: {}", failing.join(", "))
        },
    })
}

// 3 -------------------------------------------------------------------------

/// Length of the shortest walk by exhaustive enumeration of every walk of at
/// most `max_len` edges.
fn brute_force_length(edges: &[(usize, usize, usize)], s: usize, t: usize, max_len: usize) -> Option<usize> {
    fn walk(
        edges: &[(usize, usize, usize)],
        at: usize,
        t: usize,
        depth: usize,
        max_len: usize,
        best: &mut Option<usize>,
    ) {
        if at == t {
            *best = Some(best.map_or(depth, |b| b.min(depth)));
        }
        if depth == max_len {
            return;
        }
        for &(h, _, tail) in edges {
            if h == at {
                walk(edges, tail, t, depth + 1, max_len, best);
            }
        }
    }
    let mut best = None;
    walk(edges, s, t, 0, max_len, &mut best);
    best
}

fn chain_follows(
    edges: &[(usize, usize, usize)],
    s: usize,
    t: usize,
    chain: &RelationalChain,
    rel_ids: &[usize],
) -> bool {
    let mut frontier: BTreeSet<usize> = [s].into();
    for r in &chain.relations {
        frontier = edges
            .iter()
            .filter(|(h, rel, _)| frontier.contains(h) && rel_ids[*rel] == r.0 as usize)
            .map(|&(_, _, tail)| tail)
            .collect();
    }
    frontier.contains(&t)
}

fn chain_oracle() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut pairs, mut reachable) = (0usize, 0usize);
    for g in 0..100 {
        let n = rng.gen_range(2..=12);
        let m = rng.gen_range(0..=40);
        let edges: Vec<(usize, usize, usize)> = (0..m)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..3), rng.gen_range(0..n)))
            .collect();
        let mut b = GraphBuilder::new();
        for r in 0..3 {
            b.relation(&format!("r{r}"));
        }
        for e in 0..n {
            b.entity(&format!("e{e}"));
        }
        for &(h, r, t) in &edges {
            b.add(&format!("e{h}"), &format!("r{r}"), &format!("e{t}"));
        }
        let kg = b.build();
        let rel_ids: Vec<usize> = (0..3)
            .map(|r| kg.relation_id(&format!("r{r}")).expect("relation").0 as usize)
            .collect();
        let id = |e: usize| kg.entity_id(&format!("e{e}")).expect("entity");
        for s in 0..n {
            for t in 0..n {
                let want = brute_force_length(&edges, s, t, 4);
                let got = shortest_relational_chain(&kg, id(s), id(t), 4).map_err(err)?;
                let ok = match (&got, want) {
                    (ChainLookup::Found(c), Some(len)) => c.len() == len && chain_follows(&edges, s, t, c, &rel_ids),
                    (ChainLookup::Unreachable, None) => true,
                    _ => false,
                };
                if !ok {
                    return Ok(Outcome {
                        pass: false,
                        detail: format!("graph {g}: e{s} -> e{t} gives {got:?}, enumeration gives {want:?}"),
                    });
                }
                pairs += 1;
                reachable += usize::from(want.is_some());
            }
        }
    }
    Ok(Outcome {
        pass: true,
        detail: format!("{pairs} ordered pairs on 100 graphs agree ({reachable} reachable)"),
    })
}

// 4 -------------------------------------------------------------------------

fn link_prediction() -> Result<Outcome, String> {
    let kg = compositional_kg(20, 10).map_err(err)?;
    let (kept, held) = hold_out(&kg, 0.1, 7).map_err(err)?;
    let train_graph = kept.augment_reverse().map_err(err)?;
    let config = EmbeddingTrainConfig {
        dim: 16,
        negatives_per_positive: 20,
        epochs: 150,
        batch_size: 128,
        optimizer: OptimizerSettings::adam(3e-2),
        l2_weight: 1e-3,
        corrupt_heads: false,
        seed: 1,
    };
    let trained = train_embeddings(&train_graph, &config).map_err(err)?;
    let m = link_prediction_eval(&trained.table, &train_graph, &held).map_err(err)?;
    Ok(Outcome {
        pass: m.hits_at_10 >= 0.8,
        detail: format!(
            "{} entities, {} held-out facts, filtered hits@10 {:.3} (mrr {:.3})",
            kg.entity_count(),
            m.queries,
            m.hits_at_10,
            m.mean_reciprocal_rank
        ),
    })
}

// 5 to 9 --------------------------------------------------------------------

fn without_timing(r: &EvaluationReport) -> EvaluationReport {
    EvaluationReport {
        elapsed: Duration::ZERO,
        ..r.clone()
    }
}

fn monotone(r: &EvaluationReport) -> bool {
    r.hit_at_1 <= r.hit_at_5
        && r.hit_at_5 <= r.hit_at_10
        && r.filter_hit_at_1 <= r.filter_hit_at_5
        && r.filter_hit_at_5 <= r.filter_hit_at_10
        && r.hit_at_1 <= r.filter_hit_at_n
}

struct Run {
    trained: rcekgqa::pipeline::TrainedPipeline,
    full: EvaluationReport,
    filter_only: EvaluationReport,
    checkpoint: Checkpoint,
    elapsed: Duration,
}

fn full_run(config: &PipelineConfig, data: &PipelineData) -> Result<Run, String> {
    let start = Instant::now();
    let trained = train_pipeline(config, data).map_err(err)?;
    let full = evaluate(&trained.pipeline, &data.test).map_err(err)?;
    let filter_only = evaluate(&trained.pipeline.without_reasoner(), &data.test).map_err(err)?;
    let checkpoint = Checkpoint::of_pipeline(config, &trained.pipeline);
    Ok(Run {
        trained,
        full,
        filter_only,
        checkpoint,
        elapsed: start.elapsed(),
    })
}

fn end_to_end(run: &Run) -> Outcome {
    let gap = run.full.hit_at_1 - run.filter_only.hit_at_1;
    let fast = run.elapsed < Duration::from_secs(15 * 60);
    Outcome {
        pass: run.full.hit_at_1 >= 0.85 && gap >= 0.05 && fast,
        detail: format!(
            "hit@1 {:.3} full vs {:.3} without reasoner (gap {:+.1} points) on {} questions, {:.0}s training and evaluation",
            run.full.hit_at_1,
            run.filter_only.hit_at_1,
            100.0 * gap,
            run.full.evaluated,
            run.elapsed.as_secs_f64()
        ),
    }
}

fn order_sensitivity(run: &Run, data: &PipelineData) -> Result<Outcome, String> {
    let pipeline = &run.trained.pipeline;
    let reasoner = pipeline.reasoner.as_ref().ok_or("no reasoner was trained")?;
    let resolved = resolve(&pipeline.kg, &data.test).examples;
    let (mut checked, mut ordered) = (0usize, 0usize);
    for ex in &resolved {
        let gold_chain = ex.answers.iter().find_map(|&a| {
            match shortest_relational_chain(&pipeline.kg, ex.topic, a, pipeline.max_chain_len) {
                Ok(ChainLookup::Found(c)) if c.relations != c.reversed().relations => Some(c),
                _ => None,
            }
        });
        let Some(chain) = gold_chain else { continue };
        let q =
            encode_question_side(reasoner, &reasoner.tokenize(&ex.question, &ex.mention).map_err(err)?).map_err(err)?;
        let forward = similarity(&q, &encode_chain_side(reasoner, &chain).map_err(err)?).map_err(err)?;
        let backward = similarity(&q, &encode_chain_side(reasoner, &chain.reversed()).map_err(err)?).map_err(err)?;
        checked += 1;
        ordered += usize::from(forward > backward);
    }
    let rate = ordered as f64 / checked.max(1) as f64;
    Ok(Outcome {
        pass: checked > 0 && rate >= 0.9,
        detail: format!(
            "gold order preferred in {ordered}/{checked} non-palindromic chains ({:.1}%)",
            100.0 * rate
        ),
    })
}

fn half_direction(
    run: &Run,
    config: &PipelineConfig,
    data: &PipelineData,
) -> Result<(Outcome, EvaluationReport), String> {
    let half_config = PipelineConfig {
        half: true,
        keep_probability: 0.5,
        ..config.clone()
    };
    let half = train_pipeline(&half_config, data).map_err(err)?;
    let report = evaluate(&half.pipeline, &data.test).map_err(err)?;
    let degrades = report.hit_at_1 < run.full.hit_at_1;
    let holds = report.hit_at_1 >= report.filter_hit_at_1;
    Ok((
        Outcome {
            pass: degrades && holds && half.summary.triples < run.trained.summary.triples,
            detail: format!(
                "full {:.3} > half {:.3} >= half filter-only {:.3}; {} vs {} facts",
                run.full.hit_at_1,
                report.hit_at_1,
                report.filter_hit_at_1,
                run.trained.summary.triples,
                half.summary.triples
            ),
        },
        report,
    ))
}

fn structural(
    run: &Run,
    half: Option<&EvaluationReport>,
    config: &PipelineConfig,
    data: &PipelineData,
) -> Result<Outcome, String> {
    let mut problems = Vec::new();
    let reports: Vec<&EvaluationReport> = [Some(&run.full), Some(&run.filter_only), half]
        .into_iter()
        .flatten()
        .collect();
    if !reports.iter().all(|r| monotone(r)) {
        problems.push("hit@k monotonicity or top-N bound".to_string());
    }
    if !run
        .filter_only
        .traces
        .iter()
        .all(|t| t.candidates.first().map(|c| c.entity) == Some(t.answer))
    {
        problems.push("filter-only answers differ from filter top-1".to_string());
    }

    // the embeddings downstream stages saw are the ones stage one produced
    let kg = prepare_graph(&data.kg, config).map_err(err)?;
    let fresh = train_embeddings(&kg, &config.embedding()).map_err(err)?.table;
    let p = &run.trained.pipeline;
    let bits = |t: &ComplexEmbeddingTable| -> Vec<u64> {
        [&t.entity_re, &t.entity_im, &t.relation_re, &t.relation_im]
            .iter()
            .flat_map(|x| x.data().iter().map(|v| v.to_bits()))
            .collect()
    };
    let reference = bits(&fresh);
    let reasoner_table = p.reasoner.as_ref().map(|r| bits(&r.table));
    if bits(&p.table) != reference
        || bits(&p.filter.table) != reference
        || reasoner_table.is_some_and(|b| b != reference)
    {
        problems.push("embedding table changed during downstream training".to_string());
    }

    let dir = tempfile::tempdir().map_err(err)?;
    let (a, b) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    run.checkpoint.save(&a).map_err(err)?;
    let loaded = Checkpoint::load(&a).map_err(err)?;
    loaded.save(&b).map_err(err)?;
    let same = |x: &std::path::Path, y: &std::path::Path| std::fs::read(x).ok() == std::fs::read(y).ok();
    if !same(&a, &b) || !same(&Checkpoint::sidecar_path(&a), &Checkpoint::sidecar_path(&b)) {
        problems.push("checkpoint round trip not bit-identical".to_string());
    }
    let reloaded = evaluate(&loaded.pipeline(&data.kg).map_err(err)?, &data.test).map_err(err)?;
    if without_timing(&reloaded) != without_timing(&run.full) {
        problems.push("reloaded checkpoint evaluates differently".to_string());
    }
    Ok(Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!(
                "{} reports monotone and bounded (hit@1 {:.3} <= filter hit@{} {:.3}), tables frozen, checkpoint round trip identical",
                reports.len(),
                run.full.hit_at_1,
                run.full.top_n,
                run.full.filter_hit_at_n
            )
        } else {
            problems.join("; ")
        },
    })
}

fn determinism(a: &Run, b: &Run) -> Outcome {
    let metrics = without_timing(&a.full) == without_timing(&b.full)
        && without_timing(&a.filter_only) == without_timing(&b.filter_only);
    let bytes = a.checkpoint.to_bytes() == b.checkpoint.to_bytes();
    let sidecar = a.checkpoint.sidecar_text() == b.checkpoint.sidecar_text();
    Outcome {
        pass: metrics && bytes && sidecar,
        detail: format!(
            "metrics and traces identical: {metrics}; checkpoint bytes identical: {bytes} ({} bytes); sidecar identical: {sidecar}",
            a.checkpoint.to_bytes().len()
        ),
    }
}

fn main() {
    let mut all = true;
    let (o, t) = timed(complex_oracle);
    let o = o.map(|o| Outcome {
        pass: o.pass && t < Duration::from_secs(1),
        ..o
    });
    all &= report(1, "ComplEx oracle equivalence", t, o);

    let (o, t) = timed(gradient_suite);
    let o = o.map(|o| Outcome {
        pass: o.pass && t < Duration::from_secs(60),
        ..o
    });
    all &= report(2, "Gradient suite", t, o);

    let (o, t) = timed(chain_oracle);
    let o = o.map(|o| Outcome {
        pass: o.pass && t < Duration::from_secs(10),
        ..o
    });
    all &= report(3, "Chain-retrieval oracle", t, o);

    let (o, t) = timed(link_prediction);
    let o = o.map(|o| Outcome {
        pass: o.pass && t < Duration::from_secs(300),
        ..o
    });
    all &= report(4, "Link-prediction sanity", t, o);

    let config = PipelineConfig::desk();
    let data = match generate_synthetic_benchmark(&SynthSpec::default()) {
        Ok(b) => PipelineData::from(b),
        Err(e) => {
            for (i, name) in [
                (5, "End-to-end synthetic QA"),
                (6, "Order sensitivity"),
                (7, "Half-KG direction"),
                (8, "Structural invariants"),
                (9, "Determinism"),
            ] {
                report(i, name, Duration::ZERO, Err(e.to_string()));
            }
            std::process::exit(1);
        }
    };

    let (first, t) = timed(|| full_run(&config, &data));
    match &first {
        Ok(run) => all &= report(5, "End-to-end synthetic QA", t, Ok(end_to_end(run))),
        Err(e) => all &= report(5, "End-to-end synthetic QA", t, Err(e.clone())),
    }
    let Ok(first) = first else {
        for (i, name) in [
            (6, "Order sensitivity"),
            (7, "Half-KG direction"),
            (8, "Structural invariants"),
            (9, "Determinism"),
        ] {
            report(i, name, Duration::ZERO, Err("no trained pipeline".into()));
        }
        std::process::exit(1);
    };

    let (o, t) = timed(|| order_sensitivity(&first, &data));
    all &= report(6, "Order sensitivity", t, o);

    let (half, t) = timed(|| half_direction(&first, &config, &data));
    let half_report = half.as_ref().ok().map(|(_, r)| r.clone());
    all &= report(7, "Half-KG direction", t, half.map(|(o, _)| o));

    let (o, t) = timed(|| structural(&first, half_report.as_ref(), &config, &data));
    all &= report(8, "Structural invariants", t, o);

    let (second, t) = timed(|| full_run(&config, &data));
    let o = second.map(|second| determinism(&first, &second));
    all &= report(9, "Determinism", t, o);

    if !all {
        std::process::exit(1);
    }
}
