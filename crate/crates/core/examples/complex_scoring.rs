//! Scores facts with ComplEx and shows that swapping head and tail changes
//! the score unless the relation is purely real.

use rcekgqa::embedding::{complex_score, ComplexEmbeddingTable, ComplexVector};
use rcekgqa::kg::GraphBuilder;

fn main() -> rcekgqa::Result<()> {
    let h = ComplexVector::new(vec![0.9, -0.2], vec![0.1, 0.4])?;
    let t = ComplexVector::new(vec![0.3, 0.8], vec![-0.5, 0.2])?;
    let symmetric = ComplexVector::new(vec![1.0, 0.5], vec![0.0, 0.0])?;
    let directed = ComplexVector::new(vec![0.2, 0.1], vec![0.9, -0.7])?;

    for (name, r) in [("real relation", &symmetric), ("complex relation", &directed)] {
        println!(
            "{name}: phi(h, r, t) = {:+.4}, phi(t, r, h) = {:+.4}",
            complex_score(&h, r, &t)?,
            complex_score(&t, r, &h)?
        );
    }

    let mut b = GraphBuilder::new();
    b.add("heat", "directed_by", "michael_mann");
    b.add("collateral", "directed_by", "michael_mann");
    let kg = b.build().augment_reverse()?;
    let table = ComplexEmbeddingTable::random(kg.entity_count(), kg.relation_count(), 4, 11)?;
    println!("untrained scores of every fact:");
    for fact in kg.triples() {
        println!(
            "  {} {} {}: {:+.4}",
            kg.entity_label(fact.head).unwrap_or("?"),
            kg.relation_label(fact.relation).unwrap_or("?"),
            kg.entity_label(fact.tail).unwrap_or("?"),
            table.score(fact)?
        );
    }
    Ok(())
}
