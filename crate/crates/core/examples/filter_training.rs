//! Trains embeddings and the answer filter on a small synthetic benchmark
//! and reports filter hit@k on the test split.

use std::sync::Arc;

use rcekgqa::dataset::resolve;
use rcekgqa::embedding::train_embeddings;
use rcekgqa::filter::{filter_hit_at_k, train_filter};
use rcekgqa::pipeline::{prepare_graph, PipelineConfig, PipelineData};
use rcekgqa::synth::{generate_synthetic_benchmark, SynthSpec};

fn main() -> anyhow::Result<()> {
    let spec = SynthSpec {
        train: 600,
        dev: 100,
        test: 200,
        ..SynthSpec::default()
    };
    let data = PipelineData::from(generate_synthetic_benchmark(&spec)?);
    let config = PipelineConfig {
        filter_epochs: 20,
        ..PipelineConfig::desk()
    };
    let kg = prepare_graph(&data.kg, &config)?;
    let table = Arc::new(train_embeddings(&kg, &config.embedding())?.table);
    let trained = train_filter(&kg, table, &data.train, &data.dev, &config.filter())?;
    for (epoch, hit) in &trained.dev_history {
        println!("epoch {epoch}: dev hit@1 {hit:.3}");
    }
    let test = resolve(&kg, &data.test).examples;
    for k in [1, 5, 10] {
        println!("test filter hit@{k}: {:.3}", filter_hit_at_k(&trained.model, &test, k)?);
    }
    Ok(())
}
