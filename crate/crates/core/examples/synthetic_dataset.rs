//! Generates the synthetic movie benchmark, writes it in the on-disk formats
//! and reads it back.

use rcekgqa::dataset::load_qa_dataset;
use rcekgqa::kg::{KnowledgeGraph, DEFAULT_DELIMITER};
use rcekgqa::synth::{generate_synthetic_benchmark, SynthSpec};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "data/synth".to_string());
    let spec = SynthSpec {
        hops: vec![1, 2, 3],
        ..SynthSpec::default()
    };
    let bench = generate_synthetic_benchmark(&spec)?;
    bench.write(&out)?;

    let kg = KnowledgeGraph::load_triples(format!("{out}/kb.txt"), DEFAULT_DELIMITER)?;
    let test = load_qa_dataset(format!("{out}/qa_test.txt"))?;
    println!(
        "{out}: {} entities, {} relations, {} facts, {} test questions",
        kg.entity_count(),
        kg.relation_count(),
        kg.triple_count(),
        test.len()
    );
    for ex in test.iter().take(5) {
        println!("  {} -> {}", ex.question, ex.answers.join(" | "));
    }
    Ok(())
}
