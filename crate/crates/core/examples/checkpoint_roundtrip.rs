//! Trains a small pipeline, saves it, loads it back and answers a question
//! with the reloaded models.

use rcekgqa::checkpoint::Checkpoint;
use rcekgqa::pipeline::{train_pipeline, PipelineConfig, PipelineData};
use rcekgqa::synth::{generate_synthetic_benchmark, SynthSpec};

fn main() -> anyhow::Result<()> {
    let spec = SynthSpec {
        train: 400,
        dev: 60,
        test: 60,
        ..SynthSpec::default()
    };
    let data = PipelineData::from(generate_synthetic_benchmark(&spec)?);
    let config = PipelineConfig {
        dim: 16,
        hidden: 16,
        kge_epochs: 30,
        filter_epochs: 10,
        reasoner_epochs: 3,
        ..PipelineConfig::desk()
    };
    let trained = train_pipeline(&config, &data)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.ckpt");
    let saved = Checkpoint::of_pipeline(&config, &trained.pipeline);
    saved.save(&path)?;
    println!(
        "saved {} bytes plus {}",
        saved.to_bytes().len(),
        Checkpoint::sidecar_path(&path).display()
    );

    let loaded = Checkpoint::load(&path)?;
    assert_eq!(loaded.to_bytes(), saved.to_bytes());
    let pipeline = loaded.pipeline(&data.kg)?;
    let example = &data.test[0];
    let answer = pipeline.answer_question(&example.question, &example.topic)?;
    println!("{}", example.question);
    for c in &answer.trace.candidates {
        println!(
            "  {:<24} filter {:+.3}  chain {:<40} sim {}",
            c.label,
            c.filter_score,
            c.chain.as_deref().unwrap_or("-"),
            c.similarity.map_or("-".into(), |s| format!("{s:.3}"))
        );
    }
    println!(
        "answer: {} (gold: {})",
        answer.trace.answer_label,
        example.answers.join(", ")
    );
    Ok(())
}
