//! Tokenizes a question, runs the BiLSTM encoder and prints where the
//! attention pooling puts its weight.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcekgqa::encoder::{
    attention_weights, bilstm_forward, encode_question, tokenize, EncoderParams, Pooling, Vocabulary,
};

fn main() -> rcekgqa::Result<()> {
    let question = "who directed the films starring [al pacino] ?";
    let vocab = Vocabulary::build([question]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = EncoderParams::new(vocab.len(), 8, Pooling::Attention, &mut rng)?;

    for mask in [false, true] {
        let tokens = tokenize(question, "al pacino", &vocab, mask)?;
        println!("mask_topic={mask}: {}", vocab.detokenize(&tokens.ids));
    }

    let tokens = tokenize(question, "al pacino", &vocab, true)?;
    let embedded = params
        .word_embeddings
        .gather_rows(&tokens.ids.iter().map(|&i| i as usize).collect::<Vec<_>>())?;
    let hiddens = bilstm_forward(&params.sequence, &embedded)?;
    let alpha = attention_weights(&hiddens, &params.sequence.attention)?;
    for (id, a) in tokens.ids.iter().zip(&alpha) {
        println!("  {:>10} {a:.3}", vocab.token(*id).unwrap_or("?"));
    }
    let encoding = encode_question(&params, &tokens)?;
    println!("encoding has {} values (2h)", encoding.vector.len());
    Ok(())
}
