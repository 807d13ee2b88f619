//! Question encoding: word embeddings, a single-layer bidirectional LSTM and
//! self-attention pooling, plus the linear head into relation space.

use std::collections::HashMap;

use rand::Rng;

use crate::embedding::ComplexVector;
use crate::error::{Error, Result};
use crate::numerics::{xavier_init_with, NumericsError, Parameters, Tape, Tensor, Var};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const MASK_TOKEN: &str = "NE";
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const MASK_ID: u32 = 2;

/// Token ↔ id bijection. Ids 0, 1 and 2 are always padding, unknown and
/// the topic mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in [PAD_TOKEN, UNK_TOKEN, MASK_TOKEN] {
            v.insert(t);
        }
        v
    }

    /// Rebuilds a vocabulary from its ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN || tokens[2] != MASK_TOKEN {
            return Err(Error::InvalidInput(
                "vocabulary must start with the reserved tokens".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary token '{t}'")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Vocabulary over every token of `texts`, in first-appearance order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Self::new();
        for text in texts {
            for t in normalize(text) {
                v.insert(&t);
            }
        }
        v
    }

    pub fn insert(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or the unknown id.
    pub fn id(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn detokenize(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK_TOKEN))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Lowercased tokens: runs of alphanumerics, with every other
/// non-whitespace character as its own token. Square brackets mark the
/// topic mention in raw questions and are dropped.
pub fn normalize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() && ch != '[' && ch != ']' {
            out.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// Half-open token range of the topic mention, when located.
    pub topic_span: Option<(usize, usize)>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn tokenize(question: &str, topic_mention: &str, vocab: &Vocabulary, mask_topic: bool) -> Result<TokenSequence> {
    let words = normalize(question);
    if words.is_empty() {
        return Err(Error::InvalidInput("question has no tokens".into()));
    }
    let mention = normalize(topic_mention);
    let found = if mention.is_empty() {
        None
    } else {
        words.windows(mention.len()).position(|w| w == mention.as_slice())
    };
    match (found, mask_topic) {
        (None, true) => Err(Error::InvalidInput(format!(
            "topic mention '{topic_mention}' not found in question '{question}'"
        ))),
        (Some(start), true) => {
            let mut ids: Vec<u32> = words[..start].iter().map(|w| vocab.id(w)).collect();
            ids.push(MASK_ID);
            ids.extend(words[start + mention.len()..].iter().map(|w| vocab.id(w)));
            Ok(TokenSequence {
                ids,
                topic_span: Some((start, start + 1)),
            })
        }
        (span, false) => Ok(TokenSequence {
            ids: words.iter().map(|w| vocab.id(w)).collect(),
            topic_span: span.map(|s| (s, s + mention.len())),
        }),
    }
}

/// LSTM gate. Fused parameter blocks store the gates in this column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Output = 2,
    Cell = 3,
}

/// One LSTM direction with the four gates fused column-wise:
/// `w_x: [input, 4h]`, `w_h: [h, 4h]`, `b: [1, 4h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

impl LstmParams {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let mut w_x = Tensor::zeros(&[input, 4 * hidden]);
        let mut w_h = Tensor::zeros(&[hidden, 4 * hidden]);
        // each gate block gets its own Xavier draw
        for g in 0..4 {
            let bx = xavier_init_with(&[input, hidden], rng)?;
            let bh = xavier_init_with(&[hidden, hidden], rng)?;
            write_block(&mut w_x, g, hidden, &bx);
            write_block(&mut w_h, g, hidden, &bh);
        }
        Ok(Self {
            w_x,
            w_h,
            b: Tensor::zeros(&[1, 4 * hidden]),
        })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Tensor::zeros(&[input, 4 * hidden]),
            w_h: Tensor::zeros(&[hidden, 4 * hidden]),
            b: Tensor::zeros(&[1, 4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.rows()
    }

    pub fn input(&self) -> usize {
        self.w_x.rows()
    }

    /// `(W_x, W_h, b)` of a single gate.
    pub fn gate(&self, gate: Gate) -> (Tensor, Tensor, Tensor) {
        let h = self.hidden();
        (
            read_block(&self.w_x, gate as usize, h),
            read_block(&self.w_h, gate as usize, h),
            read_block(&self.b, gate as usize, h),
        )
    }

    pub fn set_gate(&mut self, gate: Gate, w_x: &Tensor, w_h: &Tensor, b: &Tensor) {
        let h = self.hidden();
        write_block(&mut self.w_x, gate as usize, h, w_x);
        write_block(&mut self.w_h, gate as usize, h, w_h);
        write_block(&mut self.b, gate as usize, h, b);
    }
}

fn read_block(m: &Tensor, g: usize, h: usize) -> Tensor {
    let rows = m.rows();
    let mut data = Vec::with_capacity(rows * h);
    for r in 0..rows {
        data.extend_from_slice(&m.row_slice(r)[g * h..(g + 1) * h]);
    }
    Tensor::new(vec![rows, h], data).expect("block shape")
}

fn write_block(m: &mut Tensor, g: usize, h: usize, block: &Tensor) {
    for r in 0..m.rows() {
        m.row_slice_mut(r)[g * h..(g + 1) * h].copy_from_slice(block.row_slice(r));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    #[default]
    Attention,
    /// Uniform average over positions.
    Mean,
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(Pooling::Attention),
            "mean" => Ok(Pooling::Mean),
            other => Err(Error::Config(format!("unknown pooling '{other}'"))),
        }
    }
}

impl std::fmt::Display for Pooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pooling::Attention => "attention",
            Pooling::Mean => "mean",
        })
    }
}

/// `a = tanh(H w + b)` scoring for attention pooling; `w: [2h, 1]`, `b: [1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w: Tensor,
    pub b: Tensor,
}

/// BiLSTM followed by pooling: maps `[L, input]` to `[1, 2h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEncoder {
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub attention: AttentionParams,
    pub pooling: Pooling,
}

impl SequenceEncoder {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, pooling: Pooling, rng: &mut R) -> Result<Self> {
        Ok(Self {
            forward: LstmParams::new(input, hidden, rng)?,
            backward: LstmParams::new(input, hidden, rng)?,
            attention: AttentionParams {
                w: xavier_init_with(&[2 * hidden, 1], rng)?,
                b: Tensor::zeros(&[1, 1]),
            },
            pooling,
        })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forward: LstmParams::zeros(input, hidden),
            backward: LstmParams::zeros(input, hidden),
            attention: AttentionParams {
                w: Tensor::zeros(&[2 * hidden, 1]),
                b: Tensor::zeros(&[1, 1]),
            },
            pooling: Pooling::Attention,
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden()
    }
}

impl Parameters for SequenceEncoder {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.forward.w_x,
            &self.forward.w_h,
            &self.forward.b,
            &self.backward.w_x,
            &self.backward.w_h,
            &self.backward.b,
            &self.attention.w,
            &self.attention.b,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.forward.w_x,
            &mut self.forward.w_h,
            &mut self.forward.b,
            &mut self.backward.w_x,
            &mut self.backward.w_h,
            &mut self.backward.b,
            &mut self.attention.w,
            &mut self.attention.b,
        ]
    }
}

pub const SEQUENCE_TENSORS: usize = 8;

/// Tape view of a [`SequenceEncoder`], in `tensors()` order.
#[derive(Debug, Clone, Copy)]
pub struct SequenceVars<'t> {
    forward: [Var<'t>; 3],
    backward: [Var<'t>; 3],
    attention: [Var<'t>; 2],
    pooling: Pooling,
}

impl<'t> SequenceVars<'t> {
    pub fn new(vars: &[Var<'t>], pooling: Pooling) -> Self {
        assert_eq!(
            vars.len(),
            SEQUENCE_TENSORS,
            "sequence encoder binds {SEQUENCE_TENSORS} tensors"
        );
        Self {
            forward: [vars[0], vars[1], vars[2]],
            backward: [vars[3], vars[4], vars[5]],
            attention: [vars[6], vars[7]],
            pooling,
        }
    }

    /// `[L, input]` → `[L, 2h]`, forward states then backward states.
    pub fn bilstm(&self, input: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let len = input.value().rows();
        if len == 0 {
            return Err(NumericsError::Empty("bilstm"));
        }
        let fwd = run_direction(self.forward, input, (0..len).collect())?;
        let bwd = run_direction(self.backward, input, (0..len).rev().collect())?;
        input.tape().concat_cols(&[fwd, bwd])
    }

    /// Attention weights `α` as `[L, 1]`.
    pub fn attention_weights(&self, hiddens: Var<'t>) -> Result<Var<'t>, NumericsError> {
        let [w, b] = self.attention;
        hiddens.matmul(w)?.add_row(b)?.tanh()?.softmax()
    }

    /// `[L, 2h]` → `[1, 2h]`.
    pub fn pool(&self, hiddens: Var<'t>) -> Result<Var<'t>, NumericsError> {
        match self.pooling {
            Pooling::Attention => self.attention_weights(hiddens)?.transpose()?.matmul(hiddens),
            Pooling::Mean => {
                let len = hiddens.value().rows();
                if len == 0 {
                    return Err(NumericsError::Empty("pool"));
                }
                let avg = hiddens.tape().constant(Tensor::filled(&[1, len], 1.0 / len as f64));
                avg.matmul(hiddens)
            }
        }
    }

    pub fn encode(&self, input: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.pool(self.bilstm(input)?)
    }
}

/// Runs one LSTM direction over the rows of `input` in `order`; row `j` of the
/// result is the state after consuming input row `j`.
fn run_direction<'t>(params: [Var<'t>; 3], input: Var<'t>, order: Vec<usize>) -> Result<Var<'t>, NumericsError> {
    let [w_x, w_h, b] = params;
    let tape = input.tape();
    let h = w_h.value().rows();
    let projected = input.matmul(w_x)?.add_row(b)?;
    let mut state = tape.constant(Tensor::zeros(&[1, h]));
    let mut cell = tape.constant(Tensor::zeros(&[1, h]));
    let mut outputs: Vec<Option<Var<'t>>> = vec![None; order.len()];
    for &j in &order {
        let pre = projected.gather_rows(&[j])?.add(state.matmul(w_h)?)?;
        let f = pre.slice_cols(0, h)?.sigmoid()?;
        let i = pre.slice_cols(h, 2 * h)?.sigmoid()?;
        let o = pre.slice_cols(2 * h, 3 * h)?.sigmoid()?;
        let candidate = pre.slice_cols(3 * h, 4 * h)?.tanh()?;
        cell = f.mul(cell)?.add(i.mul(candidate)?)?;
        state = o.mul(cell.tanh()?)?;
        outputs[j] = Some(state);
    }
    let rows: Vec<Var<'t>> = outputs
        .into_iter()
        .map(|v| v.expect("every position visited"))
        .collect();
    tape.stack_rows(&rows)
}

/// Word embeddings (`[vocab, h]`) feeding a [`SequenceEncoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub word_embeddings: Tensor,
    pub sequence: SequenceEncoder,
}

impl EncoderParams {
    pub fn new<R: Rng + ?Sized>(vocab_size: usize, hidden: usize, pooling: Pooling, rng: &mut R) -> Result<Self> {
        Ok(Self {
            word_embeddings: xavier_init_with(&[vocab_size, hidden], rng)?,
            sequence: SequenceEncoder::new(hidden, hidden, pooling, rng)?,
        })
    }

    pub fn zeros(vocab_size: usize, hidden: usize) -> Self {
        Self {
            word_embeddings: Tensor::zeros(&[vocab_size, hidden]),
            sequence: SequenceEncoder::zeros(hidden, hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.sequence.hidden()
    }

    pub fn output_dim(&self) -> usize {
        self.sequence.output_dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.word_embeddings.rows()
    }
}

impl Parameters for EncoderParams {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.word_embeddings];
        v.extend(self.sequence.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.word_embeddings];
        v.extend(self.sequence.tensors_mut());
        v
    }
}

pub const ENCODER_TENSORS: usize = SEQUENCE_TENSORS + 1;

#[derive(Debug, Clone, Copy)]
pub struct EncoderVars<'t> {
    pub word_embeddings: Var<'t>,
    pub sequence: SequenceVars<'t>,
}

impl<'t> EncoderVars<'t> {
    pub fn new(vars: &[Var<'t>], pooling: Pooling) -> Self {
        assert_eq!(
            vars.len(),
            ENCODER_TENSORS,
            "question encoder binds {ENCODER_TENSORS} tensors"
        );
        Self {
            word_embeddings: vars[0],
            sequence: SequenceVars::new(&vars[1..], pooling),
        }
    }

    pub fn embed(&self, ids: &[u32]) -> Result<Var<'t>, NumericsError> {
        if ids.is_empty() {
            return Err(NumericsError::Empty("question"));
        }
        let rows: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        self.word_embeddings.gather_rows(&rows)
    }

    /// The pooled question vector `[1, 2h]`.
    pub fn encode(&self, ids: &[u32]) -> Result<Var<'t>, NumericsError> {
        self.sequence.encode(self.embed(ids)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionEncoding {
    pub vector: Vec<f64>,
}

fn sequence_vars<'t>(tape: &'t Tape, params: &SequenceEncoder) -> SequenceVars<'t> {
    SequenceVars::new(&params.bind_frozen(tape), params.pooling)
}

/// `[L, input]` → `[L, 2h]`.
pub fn bilstm_forward(params: &SequenceEncoder, embedded: &Tensor) -> Result<Tensor> {
    check_cols(params.forward.input(), embedded)?;
    let tape = Tape::new();
    let vars = sequence_vars(&tape, params);
    let out = vars.bilstm(tape.constant(embedded.clone()))?;
    Ok(out.value().as_ref().clone())
}

/// Attention weights over the rows of `hiddens`.
pub fn attention_weights(hiddens: &Tensor, params: &AttentionParams) -> Result<Vec<f64>> {
    check_cols(params.w.rows(), hiddens)?;
    let tape = Tape::new();
    let h = tape.constant(hiddens.clone());
    let a = h
        .matmul(tape.constant(params.w.clone()))?
        .add_row(tape.constant(params.b.clone()))?
        .tanh()?
        .softmax()?;
    Ok(a.value().data().to_vec())
}

/// `Σⱼ αⱼ hⱼ` over the rows of `hiddens`.
pub fn self_attention(hiddens: &Tensor, params: &AttentionParams) -> Result<Vec<f64>> {
    check_cols(params.w.rows(), hiddens)?;
    let scores = hiddens.matmul(&params.w)?;
    let b = params.b.data()[0];
    let scores: Vec<f64> = scores.data().iter().map(|s| (s + b).tanh()).collect();
    attention_pool(hiddens, &scores)
}

/// `softmax(scores)ᵀ H` for precomputed per-row scores.
pub fn attention_pool(hiddens: &Tensor, scores: &[f64]) -> Result<Vec<f64>> {
    if scores.len() != hiddens.rows() || scores.is_empty() {
        return Err(Error::Dimension {
            expected: hiddens.rows(),
            actual: scores.len(),
        });
    }
    let alpha = crate::numerics::softmax_values(&Tensor::column(scores.to_vec()))?;
    let mut out = vec![0.0; hiddens.cols()];
    for (j, a) in alpha.data().iter().enumerate() {
        for (o, h) in out.iter_mut().zip(hiddens.row_slice(j)) {
            *o += a * h;
        }
    }
    Ok(out)
}

fn check_cols(expected: usize, t: &Tensor) -> Result<()> {
    let (_, cols) = t.dims2()?;
    if cols != expected {
        return Err(Error::Dimension { expected, actual: cols });
    }
    Ok(())
}

pub fn encode_question(params: &EncoderParams, tokens: &TokenSequence) -> Result<QuestionEncoding> {
    if let Some(&bad) = tokens.ids.iter().find(|&&i| i as usize >= params.vocab_size()) {
        return Err(Error::InvalidInput(format!(
            "token id {bad} outside vocabulary of {}",
            params.vocab_size()
        )));
    }
    let tape = Tape::new();
    let vars = EncoderVars::new(&params.bind_frozen(&tape), params.sequence.pooling);
    let v = vars.encode(&tokens.ids)?;
    Ok(QuestionEncoding {
        vector: v.value().data().to_vec(),
    })
}

/// Applies a `[2h, 2d]` linear map; the first `d` outputs are the real part.
pub fn project_to_relation(encoding: &QuestionEncoding, projection: &Tensor) -> Result<ComplexVector> {
    let (rows, cols) = projection.dims2()?;
    if rows != encoding.vector.len() {
        return Err(Error::Dimension {
            expected: rows,
            actual: encoding.vector.len(),
        });
    }
    if cols % 2 != 0 {
        return Err(Error::InvalidInput(format!("projection width {cols} is not even")));
    }
    let row = Tensor::row(encoding.vector.clone());
    let out = row.matmul(projection)?;
    let d = cols / 2;
    ComplexVector::new(out.data()[..d].to_vec(), out.data()[d..].to_vec())
}

/// Tape counterpart of [`project_to_relation`] for a `[B, 2h]` batch.
pub fn project_rows<'t>(encoded: Var<'t>, projection: Var<'t>) -> Result<(Var<'t>, Var<'t>), NumericsError> {
    let out = encoded.matmul(projection)?;
    let d = out.value().cols() / 2;
    Ok((out.slice_cols(0, d)?, out.slice_cols(d, 2 * d)?))
}
