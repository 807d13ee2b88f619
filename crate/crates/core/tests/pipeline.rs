use std::sync::{Arc, OnceLock};
use std::time::Duration;

use rcekgqa::checkpoint::Checkpoint;
use rcekgqa::dataset::QaExample;
use rcekgqa::embedding::ComplexEmbeddingTable;
use rcekgqa::encoder::{Pooling, Vocabulary};
use rcekgqa::filter::FilterModel;
use rcekgqa::kg::{shortest_relational_chain, GraphBuilder, KnowledgeGraph};
use rcekgqa::numerics::Tensor;
use rcekgqa::pipeline::{
    evaluate, prepare_graph, run_topn_sweep, train_pipeline, EvaluationReport, Pipeline, PipelineConfig, PipelineData,
    TrainedPipeline, SWEEP_VALUES,
};
use rcekgqa::reasoner::{encode_chain_side, ReasonerModel};
use rcekgqa::synth::{generate_synthetic_benchmark, SynthSpec};

fn tiny_config() -> PipelineConfig {
    PipelineConfig {
        dim: 8,
        hidden: 8,
        kge_epochs: 15,
        filter_epochs: 6,
        reasoner_epochs: 2,
        eval_every: 3,
        ..PipelineConfig::desk()
    }
}

fn tiny_data() -> &'static PipelineData {
    static DATA: OnceLock<PipelineData> = OnceLock::new();
    DATA.get_or_init(|| {
        let spec = SynthSpec {
            train: 300,
            dev: 50,
            test: 100,
            ..SynthSpec::default()
        };
        generate_synthetic_benchmark(&spec).expect("synthetic benchmark").into()
    })
}

fn trained() -> &'static TrainedPipeline {
    static TRAINED: OnceLock<TrainedPipeline> = OnceLock::new();
    TRAINED.get_or_init(|| train_pipeline(&tiny_config(), tiny_data()).expect("training"))
}

fn untimed(r: &EvaluationReport) -> EvaluationReport {
    EvaluationReport {
        elapsed: Duration::ZERO,
        ..r.clone()
    }
}

/// `t -r0-> a -r1-> g` and `t -r1-> b`. The filter scores every entity zero,
/// so it ranks `a`, `b`, `g` by id.
fn toy() -> (KnowledgeGraph, FilterModel, ReasonerModel) {
    let mut b = GraphBuilder::new();
    for e in ["t", "a", "b", "g"] {
        b.entity(e);
    }
    b.add("t", "r0", "a");
    b.add("a", "r1", "g");
    b.add("t", "r1", "b");
    let kg = b.build().augment_reverse().unwrap();
    let table = Arc::new(ComplexEmbeddingTable::random(4, kg.relation_count(), 2, 1).unwrap());
    let vocab = Vocabulary::build(["what about [t] ?"]);
    let mut filter = FilterModel::new(table.clone(), vocab.clone(), 2, Pooling::Attention, false, 2).unwrap();
    filter.projection = Tensor::zeros(filter.projection.shape());

    let mut reasoner = ReasonerModel::new(table, vocab, 2, Pooling::Attention, 0.0, 3).unwrap();
    let gold = shortest_relational_chain(&kg, kg.entity_id("t").unwrap(), kg.entity_id("g").unwrap(), 4)
        .unwrap()
        .chain()
        .cloned()
        .unwrap();
    reasoner.fc2_w = Tensor::zeros(reasoner.fc2_w.shape());
    reasoner.fc2_b = Tensor::row(encode_chain_side(&reasoner, &gold).unwrap());
    (kg, filter, reasoner)
}

fn question(answer: &str) -> QaExample {
    QaExample::new("what about [t] ?", vec![answer.to_string()]).unwrap()
}

#[test]
fn reasoner_promotes_third_filter_candidate() {
    let (kg, filter, reasoner) = toy();
    let full = Pipeline::new(kg.clone(), filter.clone(), Some(reasoner), 3, 4).unwrap();
    let answer = full.answer_question("what about [t] ?", "t").unwrap();
    assert_eq!(kg.entity_label(answer.entity), Some("g"));
    assert_eq!(kg.entity_label(answer.filter_ranking[2]), Some("g"));
    assert!((answer.trace.candidates[2].similarity.unwrap() - 1.0).abs() < 1e-12);

    let filter_only = full
        .without_reasoner()
        .answer_question("what about [t] ?", "t")
        .unwrap();
    assert_eq!(kg.entity_label(filter_only.entity), Some("a"));
}

#[test]
fn evaluate_counts_hits_by_rank() {
    let (kg, filter, reasoner) = toy();
    let full = Pipeline::new(kg, filter, Some(reasoner), 3, 4).unwrap();
    let r = evaluate(&full, &[question("g")]).unwrap();
    assert_eq!((r.hit_at_1, r.filter_hit_at_1, r.filter_hit_at_n), (1.0, 0.0, 1.0));

    let second = evaluate(&full.without_reasoner(), &[question("b")]).unwrap();
    assert_eq!((second.hit_at_1, second.hit_at_5, second.hit_at_10), (0.0, 1.0, 1.0));

    let skipped = evaluate(&full, &[question("g"), question("nobody")]).unwrap();
    assert_eq!((skipped.evaluated, skipped.skipped), (1, 1));
}

#[test]
fn top_one_reduces_to_the_filter() {
    let (kg, filter, reasoner) = toy();
    let p = Pipeline::new(kg, filter, Some(reasoner), 1, 4).unwrap();
    let a = p.answer_question("what about [t] ?", "t").unwrap();
    assert_eq!(a.entity, a.filter_ranking[0]);
    assert_eq!(a.ranking, a.filter_ranking);
}

#[test]
fn bad_inputs_are_rejected() {
    let (kg, filter, reasoner) = toy();
    let p = Pipeline::new(kg, filter.clone(), Some(reasoner.clone()), 3, 4).unwrap();
    assert!(p.answer_question("what about [zed] ?", "zed").is_err());
    assert!(evaluate(&p, &[]).is_err());
    assert!(Pipeline::new(GraphBuilder::new().build(), filter.clone(), None, 3, 4).is_err());
    assert!(Pipeline::new(p.kg.clone(), filter, None, 0, 4).is_err());
}

#[test]
fn trained_pipeline_respects_report_bounds() {
    let t = trained();
    let r = evaluate(&t.pipeline, &tiny_data().test).unwrap();
    assert_eq!(r.evaluated, 100);
    assert!(r.hit_at_1 <= r.hit_at_5 && r.hit_at_5 <= r.hit_at_10);
    assert!(r.hit_at_1 <= r.filter_hit_at_n);
    let one = evaluate(&t.pipeline.with_top_n(1), &tiny_data().test).unwrap();
    assert_eq!(one.hit_at_1, one.filter_hit_at_1);
    assert!(t.summary.kge_losses.last() < t.summary.kge_losses.first());
}

#[test]
fn training_is_deterministic() {
    let again = train_pipeline(&tiny_config(), tiny_data()).unwrap();
    let a = Checkpoint::of_pipeline(&tiny_config(), &trained().pipeline);
    let b = Checkpoint::of_pipeline(&tiny_config(), &again.pipeline);
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(a.sidecar_text(), b.sidecar_text());
}

#[test]
fn reloaded_checkpoint_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    Checkpoint::of_pipeline(&tiny_config(), &trained().pipeline)
        .save(&path)
        .unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.config.dim, 8);
    let p = loaded.pipeline(&tiny_data().kg).unwrap();
    let before = evaluate(&trained().pipeline, &tiny_data().test).unwrap();
    let after = evaluate(&p, &tiny_data().test).unwrap();
    assert_eq!(untimed(&before), untimed(&after));
}

#[test]
fn keeping_every_fact_matches_the_full_run() {
    let config = PipelineConfig {
        half: true,
        keep_probability: 1.0,
        ..tiny_config()
    };
    let kept = train_pipeline(&config, tiny_data()).unwrap();
    let a = evaluate(&kept.pipeline, &tiny_data().test).unwrap();
    let b = evaluate(&trained().pipeline, &tiny_data().test).unwrap();
    assert_eq!(untimed(&a), untimed(&b));
}

#[test]
fn half_graph_has_fewer_facts() {
    let half = PipelineConfig {
        half: true,
        ..tiny_config()
    };
    let full = prepare_graph(&tiny_data().kg, &tiny_config()).unwrap();
    let pruned = prepare_graph(&tiny_data().kg, &half).unwrap();
    assert_eq!(full.entity_count(), pruned.entity_count());
    assert!(pruned.triple_count() < full.triple_count());
    assert!(pruned.triple_count() * 3 > full.triple_count());
}

#[test]
fn sweep_reports_each_n_within_its_bound() {
    let rows = run_topn_sweep(&tiny_config(), tiny_data(), &trained().pipeline, &SWEEP_VALUES).unwrap();
    assert_eq!(rows.iter().map(|r| r.top_n).collect::<Vec<_>>(), SWEEP_VALUES);
    for row in &rows {
        assert_eq!(row.report.top_n, row.top_n);
        assert!(row.report.hit_at_1 <= row.report.filter_hit_at_n);
    }
    assert!(rows
        .windows(2)
        .all(|w| w[0].report.filter_hit_at_n <= w[1].report.filter_hit_at_n));
}

#[test]
fn files_on_disk_train_like_the_in_memory_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        train: 300,
        dev: 50,
        test: 100,
        ..SynthSpec::default()
    };
    generate_synthetic_benchmark(&spec).unwrap().write(dir.path()).unwrap();
    let mut config = tiny_config();
    for (key, file) in [
        ("kg", "kb.txt"),
        ("qa_train", "qa_train.txt"),
        ("qa_dev", "qa_dev.txt"),
        ("qa_test", "qa_test.txt"),
    ] {
        config.set(key, dir.path().join(file).to_str().unwrap()).unwrap();
    }
    let loaded = PipelineData::load(&config).unwrap();
    assert_eq!(loaded.kg.triple_count(), tiny_data().kg.triple_count());
    assert_eq!(loaded.test, tiny_data().test);
}
