//! Toy-scale recurrent encoder-decoder with additive attention.
//!
//! Character input (the windowed token with its context), word output. One
//! bidirectional gated-recurrent encoder layer, additive attention, a
//! stacked gated-recurrent decoder, all in 64-bit floats with hand-written
//! backpropagation verified by finite differences.

mod model;
mod scorer;

pub use model::{
    attention_weights, forward, gradient_check, gradient_check_with, greedy_decode, sequence_loss,
    train, TrainOptions,
};
pub use scorer::NeuralScorer;

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use thiserror::Error;

/// Unknown symbol, id 0 in both vocabularies.
pub const NN_UNK: &str = "<unk>";
/// End-of-sequence output word, id 1 in the word vocabulary.
pub const NN_EOS: &str = "</s>";

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("empty training data")]
    EmptyTrainingData,
    #[error("parameter vector has {got} values, manifest expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("training loss became non-finite at epoch {epoch}, example {example}")]
    NanLoss { epoch: usize, example: usize },
    #[error("checkpoint parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub char_vocab_cap: usize,
    pub word_vocab_cap: usize,
    pub char_embed_dim: usize,
    pub word_embed_dim: usize,
    pub encoder_state_dim: usize,
    pub attention_dim: usize,
    pub decoder_layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            char_vocab_cap: 250,
            word_vocab_cap: 1000,
            char_embed_dim: 32,
            word_embed_dim: 32,
            encoder_state_dim: 64,
            attention_dim: 64,
            decoder_layers: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) {
        for (name, v) in [
            ("char_vocab_cap", self.char_vocab_cap),
            ("word_vocab_cap", self.word_vocab_cap),
            ("char_embed_dim", self.char_embed_dim),
            ("word_embed_dim", self.word_embed_dim),
            ("encoder_state_dim", self.encoder_state_dim),
            ("attention_dim", self.attention_dim),
            ("decoder_layers", self.decoder_layers),
        ] {
            assert!(v > 0, "{name} must be positive");
        }
    }

    /// `key=value` text form.
    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "char_vocab_cap={}", self.char_vocab_cap)?;
        writeln!(w, "word_vocab_cap={}", self.word_vocab_cap)?;
        writeln!(w, "char_embed_dim={}", self.char_embed_dim)?;
        writeln!(w, "word_embed_dim={}", self.word_embed_dim)?;
        writeln!(w, "encoder_state_dim={}", self.encoder_state_dim)?;
        writeln!(w, "attention_dim={}", self.attention_dim)?;
        writeln!(w, "decoder_layers={}", self.decoder_layers)?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<ModelConfig, NeuralError> {
        let mut cfg = ModelConfig::default();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = || NeuralError::Parse {
                line: lineno + 1,
                msg: format!("bad config line `{line}`"),
            };
            let (key, value) = line.split_once('=').ok_or_else(err)?;
            let value: usize = value.parse().map_err(|_| err())?;
            match key {
                "char_vocab_cap" => cfg.char_vocab_cap = value,
                "word_vocab_cap" => cfg.word_vocab_cap = value,
                "char_embed_dim" => cfg.char_embed_dim = value,
                "word_embed_dim" => cfg.word_embed_dim = value,
                "encoder_state_dim" => cfg.encoder_state_dim = value,
                "attention_dim" => cfg.attention_dim = value,
                "decoder_layers" => cfg.decoder_layers = value,
                _ => return Err(err()),
            }
        }
        cfg.validate();
        Ok(cfg)
    }
}

/// Frequency-capped symbol inventory with `<unk>` at id 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_counts(counts: &HashMap<String, u64>, cap: usize, reserved: &[&str]) -> Vocab {
        let mut items: Vec<String> = reserved.iter().map(|s| s.to_string()).collect();
        let mut ranked: Vec<(&String, u64)> = counts
            .iter()
            .filter(|(s, _)| !reserved.contains(&s.as_str()))
            .map(|(s, c)| (s, *c))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        for (s, _) in ranked {
            if items.len() >= cap {
                break;
            }
            items.push(s.clone());
        }
        let index = items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Vocab { items, index }
    }

    /// Id of a symbol, `<unk>`'s id when unseen or beyond the cap.
    pub fn id(&self, s: &str) -> usize {
        self.index.get(s).copied().unwrap_or(0)
    }

    pub fn contains(&self, s: &str) -> bool {
        self.index.contains_key(s)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

/// All model weights in one flat vector, addressed through a named-tensor
/// manifest. The checkpoint format is this manifest plus the raw values.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    specs: Vec<TensorSpec>,
    index: HashMap<String, usize>,
    pub data: Vec<f64>,
}

impl Parameters {
    pub fn build(shapes: &[(String, usize, usize)]) -> Parameters {
        let mut specs = Vec::new();
        let mut offset = 0;
        for (name, rows, cols) in shapes {
            specs.push(TensorSpec {
                name: name.clone(),
                rows: *rows,
                cols: *cols,
                offset,
            });
            offset += rows * cols;
        }
        let index = specs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), i))
            .collect();
        Parameters {
            specs,
            index,
            data: vec![0.0; offset],
        }
    }

    pub fn spec(&self, name: &str) -> &TensorSpec {
        &self.specs[*self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown tensor `{name}`"))]
    }

    pub fn range(&self, name: &str) -> std::ops::Range<usize> {
        let s = self.spec(name);
        s.offset..s.offset + s.rows * s.cols
    }

    pub fn slice(&self, name: &str) -> &[f64] {
        &self.data[self.range(name)]
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let want: usize = self.specs.iter().map(|s| s.rows * s.cols).sum();
        if want != self.data.len() {
            return Err(NeuralError::DimensionMismatch {
                got: self.data.len(),
                want,
            });
        }
        Ok(())
    }
}

/// A trained model: configuration, vocabularies, and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub config: ModelConfig,
    pub chars: Vocab,
    pub words: Vocab,
    pub params: Parameters,
}

impl NeuralModel {
    /// Write `base.manifest` (config, vocabularies, tensor table) and
    /// `base.bin` (little-endian 64-bit values).
    pub fn save(&self, base: &Path) -> Result<(), NeuralError> {
        let mut manifest = Vec::new();
        writeln!(manifest, "#config")?;
        self.config.write(&mut manifest)?;
        writeln!(manifest, "#chars")?;
        for s in self.chars.items() {
            writeln!(manifest, "{s}")?;
        }
        writeln!(manifest, "#words")?;
        for s in self.words.items() {
            writeln!(manifest, "{s}")?;
        }
        writeln!(manifest, "#tensors")?;
        for t in self.params.specs() {
            writeln!(manifest, "{}\t{}\t{}\t{}", t.name, t.rows, t.cols, t.offset)?;
        }
        std::fs::write(base.with_extension("manifest"), manifest)?;
        let mut bin = Vec::with_capacity(self.params.len() * 8);
        for v in &self.params.data {
            bin.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(base.with_extension("bin"), bin)?;
        Ok(())
    }

    pub fn load(base: &Path) -> Result<NeuralModel, NeuralError> {
        let manifest = std::fs::read_to_string(base.with_extension("manifest"))?;
        let mut config_lines = String::new();
        let mut chars = Vec::new();
        let mut words = Vec::new();
        let mut shapes: Vec<(String, usize, usize)> = Vec::new();
        let mut section = "";
        for (lineno, line) in manifest.lines().enumerate() {
            let err = |msg: &str| NeuralError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            match line {
                "#config" | "#chars" | "#words" | "#tensors" => section = line,
                _ => match section {
                    "#config" => {
                        config_lines.push_str(line);
                        config_lines.push('\n');
                    }
                    "#chars" => chars.push(line.to_string()),
                    "#words" => words.push(line.to_string()),
                    "#tensors" => {
                        let cols: Vec<&str> = line.split('\t').collect();
                        if cols.len() != 4 {
                            return Err(err("expected 4 tensor columns"));
                        }
                        let rows = cols[1].parse().map_err(|_| err("bad rows"))?;
                        let ncols = cols[2].parse().map_err(|_| err("bad cols"))?;
                        shapes.push((cols[0].to_string(), rows, ncols));
                    }
                    _ => return Err(err("line before any section header")),
                },
            }
        }
        let config = ModelConfig::read(config_lines.as_bytes())?;
        let mut params = Parameters::build(&shapes);
        let mut bin = Vec::new();
        std::fs::File::open(base.with_extension("bin"))?.read_to_end(&mut bin)?;
        if bin.len() != params.len() * 8 {
            return Err(NeuralError::DimensionMismatch {
                got: bin.len() / 8,
                want: params.len(),
            });
        }
        for (i, chunk) in bin.chunks_exact(8).enumerate() {
            params.data[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        let vocab = |items: Vec<String>| {
            let index = items
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i))
                .collect();
            Vocab { items, index }
        };
        Ok(NeuralModel {
            config,
            chars: vocab(chars),
            words: vocab(words),
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_caps_and_unknowns() {
        let counts: HashMap<String, u64> =
            [("a", 5u64), ("b", 3), ("c", 1)].map(|(s, c)| (s.to_string(), c)).into();
        let v = Vocab::from_counts(&counts, 3, &[NN_UNK]);
        assert_eq!(v.len(), 3); // <unk>, a, b
        assert_eq!(v.id(NN_UNK), 0);
        assert_eq!(v.name(v.id("a")), "a");
        assert_eq!(v.id("c"), 0);
        assert_eq!(v.id("zebra"), 0);
    }

    #[test]
    fn parameters_manifest_offsets() {
        let p = Parameters::build(&[
            ("a".to_string(), 2, 3),
            ("b".to_string(), 4, 1),
        ]);
        assert_eq!(p.len(), 10);
        assert_eq!(p.range("a"), 0..6);
        assert_eq!(p.range("b"), 6..10);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn config_roundtrip() {
        let cfg = ModelConfig {
            decoder_layers: 2,
            ..ModelConfig::default()
        };
        let mut buf = Vec::new();
        cfg.write(&mut buf).unwrap();
        assert_eq!(ModelConfig::read(&buf[..]).unwrap(), cfg);
    }
}
