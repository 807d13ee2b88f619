//! Finds the shortest relational chain between a topic and candidate
//! answers over a reverse-augmented graph.

use rcekgqa::kg::{shortest_chains_from, shortest_relational_chain, ChainLookup, GraphBuilder};

fn main() -> anyhow::Result<()> {
    let mut b = GraphBuilder::new();
    b.add("heat", "starred_actors", "al_pacino");
    b.add("heat", "directed_by", "michael_mann");
    b.add("the_insider", "starred_actors", "al_pacino");
    b.add("the_insider", "directed_by", "michael_mann");
    b.add("scarface", "starred_actors", "al_pacino");
    b.add("scarface", "directed_by", "brian_de_palma");
    b.add("scarface", "release_year", "1983");
    b.entity("an_unconnected_film");
    let kg = b.build().augment_reverse()?;

    let topic = kg.entity_id("al_pacino").expect("topic exists");
    for target in ["michael_mann", "brian_de_palma", "1983", "an_unconnected_film"] {
        let id = kg.entity_id(target).expect("entity exists");
        match shortest_relational_chain(&kg, topic, id, 4)? {
            ChainLookup::Found(chain) => println!("al_pacino => {target}: {}", chain.describe(&kg)),
            ChainLookup::Unreachable => println!("al_pacino => {target}: unreachable within 4 hops"),
        }
    }

    let reachable = shortest_chains_from(&kg, topic, 2)?
        .iter()
        .filter(|c| c.is_reachable())
        .count();
    println!("{reachable} entities lie within two hops of al_pacino");
    Ok(())
}
