//! Text-encoder baseline: the final-layer vector of each character.

use std::io::Write;
use std::process::{Command, Stdio};

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::baseline::{BaselineKind, BaselineVector, TEXT_DIM};
use crate::error::{Error, Result};
use crate::hash::seed_for;

/// Output of one forward pass over a character sequence: final-layer
/// vectors per token piece, plus the pieces each character was split into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEncoding {
    pub pieces: Vec<Vec<f32>>,
    pub char_pieces: Vec<Vec<usize>>,
}

pub trait TextEncoder: Send + Sync {
    fn model_id(&self) -> &str;

    fn encode(&self, chars: &[String]) -> Result<TextEncoding>;
}

/// Vector for the character at `position`; the mean over its pieces when
/// the tokenizer split it.
pub fn extract_text_embedding(
    encoder: &dyn TextEncoder,
    chars: &[String],
    position: usize,
) -> Result<BaselineVector> {
    let enc = encoder.encode(chars)?;
    embedding_at(&enc, position)
}

/// One vector per character of the sequence.
pub fn text_embeddings(encoder: &dyn TextEncoder, chars: &[String]) -> Result<Vec<BaselineVector>> {
    let enc = encoder.encode(chars)?;
    if enc.char_pieces.len() != chars.len() {
        return Err(Error::Adapter(format!(
            "text encoder mapped {} of {} characters",
            enc.char_pieces.len(),
            chars.len()
        )));
    }
    (0..chars.len()).map(|i| embedding_at(&enc, i)).collect()
}

fn embedding_at(enc: &TextEncoding, position: usize) -> Result<BaselineVector> {
    let pieces = enc
        .char_pieces
        .get(position)
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Error::Adapter(format!("no token pieces for character {position}")))?;
    let mut acc = vec![0.0f64; TEXT_DIM];
    for &p in pieces {
        let v = enc
            .pieces
            .get(p)
            .ok_or_else(|| Error::Adapter(format!("piece index {p} out of range")))?;
        if v.len() != TEXT_DIM {
            return Err(Error::Dimension {
                what: "text embedding",
                expected: TEXT_DIM,
                actual: v.len(),
            });
        }
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x as f64;
        }
    }
    let n = pieces.len() as f64;
    BaselineVector::new(BaselineKind::Text, acc.into_iter().map(|a| (a / n) as f32).collect())
}

/// Deterministic stand-in for a pretrained character encoder: a seeded
/// Gaussian vector per character mixed with its neighbours. Multi-character
/// strings (e.g. romanised fallbacks) are split into one piece per char.
#[derive(Debug, Clone)]
pub struct StubTextEncoder {
    pub model_id: String,
    pub seed: u64,
}

impl StubTextEncoder {
    pub fn new(seed: u64) -> Self {
        StubTextEncoder {
            model_id: "stub-text".into(),
            seed,
        }
    }

    fn piece_vector(&self, piece: char) -> Vec<f32> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed_for(self.seed, &piece.to_string()));
        (0..TEXT_DIM)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }
}

impl TextEncoder for StubTextEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn encode(&self, chars: &[String]) -> Result<TextEncoding> {
        let mut raw = Vec::new();
        let mut char_pieces = Vec::with_capacity(chars.len());
        for c in chars {
            let start = raw.len();
            raw.extend(c.chars().map(|p| self.piece_vector(p)));
            char_pieces.push((start..raw.len()).collect());
        }
        let pieces = (0..raw.len())
            .map(|i| {
                let mut v = raw[i].clone();
                for j in [i.wrapping_sub(1), i + 1] {
                    if let Some(n) = raw.get(j) {
                        for (a, b) in v.iter_mut().zip(n) {
                            *a += 0.25 * b;
                        }
                    }
                }
                v
            })
            .collect();
        Ok(TextEncoding {
            pieces,
            char_pieces,
        })
    }
}

/// Runs an external program for each sentence. The program reads
/// `{"chars": [...]}` as JSON on stdin and writes a [`TextEncoding`] as JSON
/// on stdout.
#[derive(Debug, Clone)]
pub struct CommandTextEncoder {
    pub model_id: String,
    pub program: String,
    pub args: Vec<String>,
    pub offline: bool,
}

impl TextEncoder for CommandTextEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn encode(&self, chars: &[String]) -> Result<TextEncoding> {
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        if self.offline {
            cmd.env("HF_HUB_OFFLINE", "1").env("TRANSFORMERS_OFFLINE", "1");
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| Error::Adapter(format!("spawning {}: {e}", self.program)))?;
        let request = serde_json::to_vec(&serde_json::json!({ "chars": chars }))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(&request)
            .map_err(|e| Error::Adapter(format!("writing to {}: {e}", self.program)))?;
        let out = child
            .wait_with_output()
            .map_err(|e| Error::Adapter(format!("waiting for {}: {e}", self.program)))?;
        if !out.status.success() {
            return Err(Error::Adapter(format!("{} exited with {}", self.program, out.status)));
        }
        Ok(serde_json::from_slice(&out.stdout)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<String> {
        s.chars().map(|c| c.to_string()).collect()
    }

    #[test]
    fn single_character_shape() {
        let enc = StubTextEncoder::new(1);
        let v = extract_text_embedding(&enc, &chars("好"), 0).unwrap();
        assert_eq!(v.as_slice().len(), 768);
    }

    #[test]
    fn deterministic() {
        let enc = StubTextEncoder::new(1);
        let s = chars("今天天气很好");
        assert_eq!(text_embeddings(&enc, &s).unwrap(), text_embeddings(&enc, &s).unwrap());
    }

    #[test]
    fn split_characters_average_their_pieces() {
        let enc = TextEncoding {
            pieces: vec![vec![1.0; TEXT_DIM], vec![3.0; TEXT_DIM]],
            char_pieces: vec![vec![0, 1]],
        };
        let v = embedding_at(&enc, 0).unwrap();
        assert!(v.as_slice().iter().all(|&x| x == 2.0));
    }

    #[test]
    fn multi_char_surface_is_pieced() {
        let enc = StubTextEncoder::new(2);
        let e = enc.encode(&["hao".to_string(), "好".to_string()]).unwrap();
        assert_eq!(e.char_pieces, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn command_encoder_roundtrip() {
        if Command::new("sh").arg("-c").arg("true").status().is_err() {
            return;
        }
        let dir = tempfile::tempdir().unwrap();
        let reply = TextEncoding {
            pieces: vec![vec![0.5; TEXT_DIM]],
            char_pieces: vec![vec![0]],
        };
        let path = dir.path().join("reply.json");
        std::fs::write(&path, serde_json::to_vec(&reply).unwrap()).unwrap();
        let enc = CommandTextEncoder {
            model_id: "cmd".into(),
            program: "sh".into(),
            args: vec!["-c".into(), format!("cat > /dev/null; cat {}", path.display())],
            offline: true,
        };
        let v = extract_text_embedding(&enc, &chars("好"), 0).unwrap();
        assert!(v.as_slice().iter().all(|&x| x == 0.5));
    }
}
