//! Binary checkpoint format.
//!
//! All integers little-endian.
//!
//! ```text
//! "TRLCKPT1"
//! per tensor:  u32 name length, UTF-8 name, u32 rank, u32 dims..., f32 payload
//! u32 0        end of tensors
//! u32 length, UTF-8 metadata: the training config as `key = value` lines
//!              plus `coverage = true|false`
//! u64          vocabulary content hash
//! u32 words,   then per word: u32 length, UTF-8 word, u64 count
//! ```

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::model::{ModelConfig, PointerGenerator};
use crate::tensor::{ParamStore, Tensor};
use crate::train::TrainConfig;
use crate::vocab::Vocab;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TRLCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: PointerGenerator,
    pub config: TrainConfig,
    pub vocab: Vocab,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(a))
    }

    fn str_of(&mut self, n: usize) -> Result<String> {
        let b = self.take(n)?;
        core::str::from_utf8(b)
            .map(String::from)
            .map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

impl Checkpoint {
    pub fn model_config(&self) -> &ModelConfig {
        self.model.config()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for t in self.model.params().tensors() {
            put_str(&mut out, &t.name);
            put_u32(&mut out, 2);
            put_u32(&mut out, t.rows);
            put_u32(&mut out, t.cols);
            for x in &t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        put_u32(&mut out, 0);
        let mut meta = self.config.serialize();
        meta.push_str(&format!("coverage = {}\n", self.model.config().coverage));
        put_str(&mut out, &meta);
        out.extend_from_slice(&self.vocab.content_hash().to_le_bytes());
        let words: Vec<(&str, u64)> = self.vocab.words().collect();
        put_u32(&mut out, words.len());
        for (w, c) in words {
            put_str(&mut out, w);
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let mut params = ParamStore::new();
        loop {
            let n = r.u32()?;
            if n == 0 {
                break;
            }
            let name = r.str_of(n)?;
            let (rows, cols) = match r.u32()? {
                1 => (r.u32()?, 1),
                2 => (r.u32()?, r.u32()?),
                rank => return Err(Error::Checkpoint(format!("{name}: rank {rank}"))),
            };
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Checkpoint(format!("{name}: dims overflow")))?;
            let payload = r.take(
                len.checked_mul(4)
                    .ok_or_else(|| Error::Checkpoint("size overflow".into()))?,
            )?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            params.add(Tensor::new(name, rows, cols, data)?)?;
        }
        let n = r.u32()?;
        let meta = r.str_of(n)?;
        let mut coverage = None;
        let mut rest = String::new();
        for line in meta.lines() {
            match line.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                Some(("coverage", v)) => {
                    coverage = Some(
                        v.parse::<bool>()
                            .map_err(|_| Error::Checkpoint(format!("coverage `{v}`")))?,
                    )
                }
                _ => {
                    rest.push_str(line);
                    rest.push('\n');
                }
            }
        }
        let coverage =
            coverage.ok_or_else(|| Error::Checkpoint("metadata lacks `coverage`".into()))?;
        let config =
            TrainConfig::parse(&rest).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        let hash = r.u64()?;
        let count = r.u32()?;
        let mut entries = Vec::new();
        for _ in 0..count {
            let n = r.u32()?;
            let w = r.str_of(n)?;
            entries.push((w, r.u64()?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let vocab = Vocab::from_ranked(entries).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if vocab.content_hash() != hash {
            return Err(Error::VocabMismatch {
                expected: hash,
                found: vocab.content_hash(),
            });
        }
        let emb = params.find("embedding").map(|id| params.get(id).cols);
        let hidden = params.find("attn_wh").map(|id| params.get(id).rows);
        let (Some(emb), Some(hidden)) = (emb, hidden) else {
            return Err(Error::Checkpoint(
                "missing embedding or attention tensors".into(),
            ));
        };
        let mc = ModelConfig {
            vocab_size: vocab.size(),
            emb,
            hidden,
            coverage,
            pointer: config.pointer,
        };
        let model = PointerGenerator::from_params(mc, params)?;
        Ok(Checkpoint {
            model,
            config,
            vocab,
        })
    }
}
