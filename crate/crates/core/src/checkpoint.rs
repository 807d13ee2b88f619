//! Binary model file plus a text sidecar.
//!
//! Layout: the magic `RCEKGQA1`, a `u32` format version, a `u32` section
//! count, then one `(tag, offset, length)` entry per section followed by the
//! section payloads. All integers are little-endian. Sections:
//!
//! - `CONF`: the config echo as UTF-8.
//! - `EMBD`: entity re/im and relation re/im tensors.
//! - `FILT`: filter header and tensors (optional).
//! - `REAS`: reasoner header and tensors (optional).
//!
//! The sidecar holds the config echo and both vocabularies, one token per
//! line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::embedding::ComplexEmbeddingTable;
use crate::encoder::{Pooling, Vocabulary};
use crate::error::{Error, Result};
use crate::filter::FilterModel;
use crate::kg::KnowledgeGraph;
use crate::numerics::{Parameters, Tensor};
use crate::pipeline::{prepare_graph, Pipeline, PipelineConfig};
use crate::reasoner::ReasonerModel;

pub const MAGIC: &[u8; 8] = b"RCEKGQA1";
pub const VERSION: u32 = 1;

const CONF: &[u8; 4] = b"CONF";
const EMBD: &[u8; 4] = b"EMBD";
const FILT: &[u8; 4] = b"FILT";
const REAS: &[u8; 4] = b"REAS";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: PipelineConfig,
    pub table: Arc<ComplexEmbeddingTable>,
    pub filter: Option<FilterModel>,
    pub reasoner: Option<ReasonerModel>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn pooling_byte(p: Pooling) -> u8 {
    match p {
        Pooling::Attention => 0,
        Pooling::Mean => 1,
    }
}

fn pooling_from(b: u8) -> Result<Pooling> {
    match b {
        0 => Ok(Pooling::Attention),
        1 => Ok(Pooling::Mean),
        other => Err(bad(format!("unknown pooling code {other}"))),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| bad("truncated"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        Tensor::from_le_bytes(self.bytes, &mut self.at).map_err(|e| bad(format!("tensor: {e}")))
    }

    fn finish(&self) -> Result<()> {
        if self.at == self.bytes.len() {
            Ok(())
        } else {
            Err(bad("trailing bytes in section"))
        }
    }
}

fn write_tensors(out: &mut Vec<u8>, tensors: &[&Tensor]) {
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        t.to_le_bytes(out);
    }
}

/// Overwrites every tensor of `target` from `r`, checking shapes.
fn read_tensors_into<P: Parameters>(r: &mut Reader<'_>, target: &mut P, what: &str) -> Result<()> {
    let count = r.u32()? as usize;
    let mut slots = target.tensors_mut();
    if count != slots.len() {
        return Err(bad(format!("{what}: {count} tensors, expected {}", slots.len())));
    }
    for (i, slot) in slots.iter_mut().enumerate() {
        let t = r.tensor()?;
        if t.shape() != slot.shape() {
            return Err(bad(format!(
                "{what}: tensor {i} has shape {:?}, expected {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        **slot = t;
    }
    Ok(())
}

impl Checkpoint {
    pub fn new(config: PipelineConfig, table: Arc<ComplexEmbeddingTable>) -> Self {
        Self {
            config,
            table,
            filter: None,
            reasoner: None,
        }
    }

    /// The checkpoint of a trained pipeline.
    pub fn of_pipeline(config: &PipelineConfig, pipeline: &Pipeline) -> Self {
        Self {
            config: config.clone(),
            table: pipeline.table.clone(),
            filter: Some(pipeline.filter.clone()),
            reasoner: pipeline.reasoner.clone(),
        }
    }

    /// The config as stored: without its own checkpoint path, so copies of a
    /// model compare equal.
    fn stored_config(&self) -> PipelineConfig {
        PipelineConfig {
            checkpoint: None,
            ..self.config.clone()
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut sections: Vec<(&[u8; 4], Vec<u8>)> = Vec::new();
        sections.push((CONF, self.stored_config().to_text().into_bytes()));

        let mut embd = Vec::new();
        let t = &self.table;
        write_tensors(&mut embd, &[&t.entity_re, &t.entity_im, &t.relation_re, &t.relation_im]);
        sections.push((EMBD, embd));

        if let Some(f) = &self.filter {
            let mut b = Vec::new();
            b.extend_from_slice(&(f.encoder.hidden() as u32).to_le_bytes());
            b.push(pooling_byte(f.encoder.sequence.pooling));
            b.push(u8::from(f.mask_topic));
            b.extend_from_slice(&(f.vocab.len() as u32).to_le_bytes());
            write_tensors(&mut b, &f.tensors());
            sections.push((FILT, b));
        }
        if let Some(r) = &self.reasoner {
            let mut b = Vec::new();
            b.extend_from_slice(&(r.question.hidden() as u32).to_le_bytes());
            b.push(pooling_byte(r.question.sequence.pooling));
            b.push(pooling_byte(r.chain.pooling));
            b.push(u8::from(r.mask_topic));
            b.extend_from_slice(&r.dropout.to_bits().to_le_bytes());
            b.extend_from_slice(&(r.vocab.len() as u32).to_le_bytes());
            write_tensors(&mut b, &r.tensors());
            sections.push((REAS, b));
        }

        let header = MAGIC.len() + 8 + sections.len() * 20;
        let mut out = Vec::with_capacity(header + sections.iter().map(|(_, b)| b.len()).sum::<usize>());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        let mut offset = header as u64;
        for (tag, body) in &sections {
            out.extend_from_slice(*tag);
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            offset += body.len() as u64;
        }
        for (_, body) in &sections {
            out.extend_from_slice(body);
        }
        out
    }

    pub fn sidecar_text(&self) -> String {
        let mut s = String::from("[config]\n");
        s.push_str(&self.stored_config().to_text());
        let mut vocab = |name: &str, v: Option<&Vocabulary>| {
            if let Some(v) = v {
                let _ = writeln!(s, "[{name}]");
                for t in v.tokens() {
                    let _ = writeln!(s, "{t}");
                }
            }
        };
        vocab("filter_vocabulary", self.filter.as_ref().map(|f| &f.vocab));
        vocab("reasoner_vocabulary", self.reasoner.as_ref().map(|r| &r.vocab));
        s
    }

    pub fn from_parts(bytes: &[u8], sidecar: &str) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}, expected {VERSION}")));
        }
        let count = r.u32()? as usize;
        if count > 16 {
            return Err(bad(format!("implausible section count {count}")));
        }
        let mut sections: Vec<([u8; 4], &[u8])> = Vec::with_capacity(count);
        for _ in 0..count {
            let tag: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
            let offset = usize::try_from(r.u64()?).map_err(|_| bad("offset overflow"))?;
            let len = usize::try_from(r.u64()?).map_err(|_| bad("length overflow"))?;
            let body = offset
                .checked_add(len)
                .and_then(|end| bytes.get(offset..end))
                .ok_or_else(|| bad(format!("section {} out of bounds", String::from_utf8_lossy(&tag))))?;
            sections.push((tag, body));
        }
        let find = |tag: &[u8; 4]| sections.iter().find(|(t, _)| t == tag).map(|(_, b)| *b);

        let side = Sidecar::parse(sidecar)?;
        let conf = std::str::from_utf8(find(CONF).ok_or_else(|| bad("missing CONF section"))?)
            .map_err(|_| bad("config section is not UTF-8"))?;
        let config = PipelineConfig::parse(conf)?;
        if side.config.trim() != conf.trim() {
            return Err(bad("sidecar config differs from the binary"));
        }

        let mut er = Reader {
            bytes: find(EMBD).ok_or_else(|| bad("missing EMBD section"))?,
            at: 0,
        };
        let count = er.u32()?;
        if count != 4 {
            return Err(bad(format!("embedding section holds {count} tensors")));
        }
        let parts = [er.tensor()?, er.tensor()?, er.tensor()?, er.tensor()?];
        er.finish()?;
        let [ere, eim, rre, rim] = parts;
        let table = Arc::new(ComplexEmbeddingTable::from_parts(ere, eim, rre, rim)?);

        let filter = match find(FILT) {
            None => None,
            Some(body) => {
                let mut fr = Reader { bytes: body, at: 0 };
                let hidden = fr.u32()? as usize;
                let pooling = pooling_from(fr.u8()?)?;
                let mask_topic = fr.u8()? != 0;
                let vocab = side.vocabulary("filter_vocabulary", fr.u32()? as usize)?;
                let mut model = FilterModel::new(table.clone(), vocab, hidden, pooling, mask_topic, 0)?;
                read_tensors_into(&mut fr, &mut model, "filter")?;
                fr.finish()?;
                Some(model)
            }
        };
        let reasoner = match find(REAS) {
            None => None,
            Some(body) => {
                let mut rr = Reader { bytes: body, at: 0 };
                let hidden = rr.u32()? as usize;
                let question_pooling = pooling_from(rr.u8()?)?;
                let chain_pooling = pooling_from(rr.u8()?)?;
                let mask_topic = rr.u8()? != 0;
                let dropout = f64::from_bits(rr.u64()?);
                let vocab = side.vocabulary("reasoner_vocabulary", rr.u32()? as usize)?;
                let mut model = ReasonerModel::new(table.clone(), vocab, hidden, question_pooling, dropout, 0)?;
                model.chain.pooling = chain_pooling;
                model.mask_topic = mask_topic;
                read_tensors_into(&mut rr, &mut model, "reasoner")?;
                rr.finish()?;
                Some(model)
            }
        };
        Ok(Self {
            config,
            table,
            filter,
            reasoner,
        })
    }

    pub fn sidecar_path(path: impl AsRef<Path>) -> PathBuf {
        let mut p = path.as_ref().as_os_str().to_owned();
        p.push(".meta.txt");
        PathBuf::from(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let side = Self::sidecar_path(path);
        std::fs::write(&side, self.sidecar_text()).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let side = Self::sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        Self::from_parts(&bytes, &text)
    }

    /// The stage graph rebuilt from the raw graph with the stored settings,
    /// checked against the embedding table.
    pub fn graph(&self, raw: &KnowledgeGraph) -> Result<KnowledgeGraph> {
        let kg = prepare_graph(raw, &self.config)?;
        if kg.entity_count() != self.table.entity_count() || kg.relation_count() != self.table.relation_count() {
            return Err(bad(format!(
                "graph has {} entities and {} relations, embeddings cover {} and {}",
                kg.entity_count(),
                kg.relation_count(),
                self.table.entity_count(),
                self.table.relation_count()
            )));
        }
        Ok(kg)
    }

    pub fn pipeline(&self, raw: &KnowledgeGraph) -> Result<Pipeline> {
        let filter = self
            .filter
            .clone()
            .ok_or_else(|| bad("no filter section; train the filter first"))?;
        Pipeline::new(
            self.graph(raw)?,
            filter,
            self.reasoner.clone(),
            self.config.top_n,
            self.config.max_chain_len,
        )
    }
}

struct Sidecar {
    config: String,
    blocks: Vec<(String, Vec<String>)>,
}

impl Sidecar {
    fn parse(text: &str) -> Result<Self> {
        let mut config = String::new();
        let mut blocks: Vec<(String, Vec<String>)> = Vec::new();
        let mut current: Option<String> = None;
        for line in text.lines() {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if name != "config" {
                    blocks.push((name.to_string(), Vec::new()));
                }
                current = Some(name.to_string());
                continue;
            }
            match current.as_deref() {
                Some("config") => {
                    config.push_str(line);
                    config.push('\n');
                }
                Some(_) => blocks.last_mut().expect("open block").1.push(line.to_string()),
                None if line.trim().is_empty() => {}
                None => return Err(bad("sidecar content before the first section")),
            }
        }
        Ok(Self { config, blocks })
    }

    fn vocabulary(&self, name: &str, expected: usize) -> Result<Vocabulary> {
        let tokens = self
            .blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.clone())
            .ok_or_else(|| bad(format!("sidecar lacks [{name}]")))?;
        if tokens.len() != expected {
            return Err(bad(format!(
                "[{name}] has {} tokens, binary expects {expected}",
                tokens.len()
            )));
        }
        Vocabulary::from_tokens(tokens)
    }
}
