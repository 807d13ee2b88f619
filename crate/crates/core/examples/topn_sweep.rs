//! Reuses one trained filter and retrains the reasoner for several values of
//! N, printing hit@1 next to the filter's hit@N ceiling.

use rcekgqa::pipeline::{run_topn_sweep, sweep_table, train_pipeline, PipelineConfig, PipelineData};
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
        no_reasoner: true,
        ..PipelineConfig::desk()
    };
    let stage_one = train_pipeline(&config, &data)?;
    let sweep_config = PipelineConfig {
        no_reasoner: false,
        reasoner_epochs: 5,
        ..config
    };
    let rows = run_topn_sweep(&sweep_config, &data, &stage_one.pipeline, &[1, 3, 5, 10])?;
    print!("{}", sweep_table(&rows));
    Ok(())
}
