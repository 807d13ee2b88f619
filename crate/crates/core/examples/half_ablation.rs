//! Trains on the full graph and on a graph with half its facts removed, then
//! prints both evaluation rows.

use rcekgqa::pipeline::{run_half_ablation, PipelineConfig, PipelineData};
use rcekgqa::synth::{generate_synthetic_benchmark, SynthSpec};

fn main() -> anyhow::Result<()> {
    let spec = SynthSpec {
        train: 800,
        dev: 100,
        test: 200,
        ..SynthSpec::default()
    };
    let data = PipelineData::from(generate_synthetic_benchmark(&spec)?);
    let config = PipelineConfig {
        reasoner_epochs: 8,
        ..PipelineConfig::desk()
    };
    let result = run_half_ablation(&config, &data)?;
    println!(
        "facts after augmentation: full {}, half {}",
        result.full_triples, result.half_triples
    );
    print!("{}", result.table());
    Ok(())
}
