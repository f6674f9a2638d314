//! Per-layer sentence embeddings aligned to utterance ids.
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! magic    "LPEM"
//! version  u32 = 1
//! n_layers u32
//! n_rows   u32
//! dim      u32
//! ids      n_rows x (u16 byte length, UTF-8 bytes)
//! payload  n_layers x n_rows x dim f32, layer-major, row-major within a layer
//! ```

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LPEM";
const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    /// One `ids.len() x dim` row-major matrix per layer.
    layers: Vec<Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(ids: Vec<String>, dim: usize, layers: Vec<Vec<f32>>) -> Result<Self> {
        let store = EmbeddingStore { dim, ids, layers };
        store.validate()?;
        Ok(store)
    }

    /// Builds a store from per-layer row lists.
    pub fn from_rows(ids: Vec<String>, layers: Vec<Vec<Vec<f32>>>) -> Result<Self> {
        let dim = layers
            .first()
            .and_then(|l| l.first())
            .map(Vec::len)
            .unwrap_or(0);
        let mut flat = Vec::with_capacity(layers.len());
        for (li, rows) in layers.into_iter().enumerate() {
            if rows.len() != ids.len() {
                return Err(Error::Validation(format!(
                    "layer {} has {} rows for {} ids",
                    li + 1,
                    rows.len(),
                    ids.len()
                )));
            }
            let mut m = Vec::with_capacity(rows.len() * dim);
            for r in rows {
                if r.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: r.len(),
                    });
                }
                m.extend(r);
            }
            flat.push(m);
        }
        EmbeddingStore::new(ids, dim, flat)
    }

    fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Validation("embedding store has no layers".into()));
        }
        if self.dim == 0 && !self.ids.is_empty() {
            return Err(Error::Validation("embedding dimension is 0".into()));
        }
        let mut seen = HashSet::new();
        for id in &self.ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate id {id:?} in embedding store")));
            }
            if id.len() > u16::MAX as usize {
                return Err(Error::Validation(format!("id longer than {} bytes", u16::MAX)));
            }
        }
        let expected = self.ids.len() * self.dim;
        for (li, m) in self.layers.iter().enumerate() {
            if m.len() != expected {
                return Err(Error::Validation(format!(
                    "layer {} holds {} values, expected {} rows x {} dims",
                    li + 1,
                    m.len(),
                    self.ids.len(),
                    self.dim
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "layer {} contains non-finite values",
                    li + 1
                )));
            }
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row `row` of layer `layer` (1-based, as in probing reports).
    pub fn row(&self, layer: usize, row: usize) -> &[f32] {
        assert!((1..=self.n_layers()).contains(&layer), "layer {layer} out of range");
        let m = &self.layers[layer - 1];
        &m[row * self.dim..(row + 1) * self.dim]
    }

    /// Row widened to `f64`.
    pub fn row_f64(&self, layer: usize, row: usize) -> Vec<f64> {
        self.row(layer, row).iter().map(|&v| v as f64).collect()
    }

    /// Exact size in bytes of the serialized store.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + self.ids.iter().map(|s| 2 + s.len()).sum::<usize>()
            + self.n_layers() * self.n_rows() * self.dim * 4
    }
}

pub fn write_embeddings_to<W: Write>(store: &EmbeddingStore, mut w: W) -> Result<()> {
    store.validate()?;
    let io = |e| Error::io("<embeddings>", e);
    w.write_all(MAGIC).map_err(io)?;
    for v in [VERSION, store.n_layers() as u32, store.n_rows() as u32, store.dim as u32] {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    for id in &store.ids {
        w.write_all(&(id.len() as u16).to_le_bytes()).map_err(io)?;
        w.write_all(id.as_bytes()).map_err(io)?;
    }
    for m in &store.layers {
        let mut buf = Vec::with_capacity(m.len() * 4);
        for v in m {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_embeddings(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    store.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_embeddings_to(store, BufWriter::new(file))
}

fn length_error(what: &str) -> Error {
    Error::Format(format!("embedding file truncated while reading {what}"))
}

/// Parses a complete embedding file image.
pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingStore> {
    if bytes.len() < HEADER_LEN {
        return Err(length_error("header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("not an embedding file (bad magic)".into()));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported embedding file version {version}")));
    }
    let n_layers = u32_at(8) as usize;
    let n_rows = u32_at(12) as usize;
    let dim = u32_at(16) as usize;

    let mut at = HEADER_LEN;
    let mut ids = Vec::with_capacity(n_rows.min(bytes.len()));
    for _ in 0..n_rows {
        let len_bytes = bytes.get(at..at + 2).ok_or_else(|| length_error("id block"))?;
        let len = u16::from_le_bytes([len_bytes[0], len_bytes[1]]) as usize;
        at += 2;
        let raw = bytes.get(at..at + len).ok_or_else(|| length_error("id block"))?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| Error::Format("id is not valid UTF-8".into()))?;
        ids.push(id.to_string());
        at += len;
    }

    let layer_len = n_rows
        .checked_mul(dim)
        .ok_or_else(|| Error::Format("declared sizes overflow".into()))?;
    let payload = layer_len
        .checked_mul(n_layers)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("declared sizes overflow".into()))?;
    let remaining = bytes.len() - at;
    if remaining != payload {
        return Err(Error::Format(format!(
            "payload is {remaining} bytes but header declares {payload} ({n_layers} layers x {n_rows} rows x {dim} dims)"
        )));
    }
    let values: Vec<f32> = bytes[at..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let layers = if layer_len == 0 {
        vec![Vec::new(); n_layers]
    } else {
        values.chunks(layer_len).map(<[f32]>::to_vec).collect()
    };
    EmbeddingStore::new(ids, dim, layers)
}

pub fn read_embeddings_from<R: Read>(mut r: R) -> Result<EmbeddingStore> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::io("<embeddings>", e))?;
    decode_embeddings(&bytes)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings_from(BufReader::new(file))
}

/// Store row for every corpus utterance, in corpus order. Extra store rows
/// are ignored.
pub fn align(store: &EmbeddingStore, corpus: &Corpus) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = store
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut rows = Vec::with_capacity(corpus.len());
    let mut missing = Vec::new();
    for u in corpus.utterances() {
        match index.get(u.id.as_str()) {
            Some(&r) => rows.push(r),
            None => missing.push(u.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingIds {
            what: "utterances absent from the embedding store".into(),
            ids: missing,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Utterance};
    use proptest::prelude::*;

    fn store(n_layers: usize, n_rows: usize, dim: usize) -> EmbeddingStore {
        let ids = (0..n_rows).map(|i| format!("u{i}")).collect();
        let layers = (0..n_layers)
            .map(|l| (0..n_rows * dim).map(|i| (l * 1000 + i) as f32 * 0.5).collect())
            .collect();
        EmbeddingStore::new(ids, dim, layers).unwrap()
    }

    fn encode(s: &EmbeddingStore) -> Vec<u8> {
        let mut buf = Vec::new();
        write_embeddings_to(s, &mut buf).unwrap();
        buf
    }

    #[test]
    fn file_size_matches_layout() {
        let s = store(2, 3, 4);
        let bytes = encode(&s);
        let id_block = 3 * (2 + 2);
        assert_eq!(bytes.len(), 20 + id_block + 2 * 3 * 4 * 4);
        assert_eq!(bytes.len(), s.encoded_len());
        assert_eq!(&bytes[..4], b"LPEM");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(decode_embeddings(&bytes).unwrap(), s);
    }

    #[test]
    fn payload_is_layer_major() {
        let s = store(2, 2, 1);
        let bytes = encode(&s);
        let payload = &bytes[bytes.len() - 16..];
        let vals: Vec<f32> = payload
            .chunks(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(vals, [0.0, 0.5, 500.0, 500.5]);
        assert_eq!(s.row(2, 1), &[500.5]);
    }

    #[test]
    fn mismatched_layers_are_refused() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(EmbeddingStore::new(ids.clone(), 2, vec![vec![0.0; 4], vec![0.0; 2]]).is_err());
        assert!(EmbeddingStore::from_rows(ids, vec![vec![vec![0.0; 2]]]).is_err());
    }

    #[test]
    fn bad_magic_version_and_lengths() {
        let good = encode(&store(1, 2, 3));
        let mut bad = good.clone();
        bad[1] = b'X';
        assert!(matches!(decode_embeddings(&bad), Err(Error::Format(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_embeddings(&bad), Err(Error::Format(_))));
        assert!(matches!(decode_embeddings(&good[..good.len() - 1]), Err(Error::Format(_))));
        let mut long = good.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(decode_embeddings(&long), Err(Error::Format(_))));
        assert!(decode_embeddings(&good[..10]).is_err());
    }

    #[test]
    fn non_finite_payload_is_rejected() {
        let mut bytes = encode(&store(1, 1, 2));
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_embeddings(&bytes), Err(Error::Validation(_))));
        bytes[n - 4..].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode_embeddings(&bytes), Err(Error::Validation(_))));
    }

    fn corpus(ids: &[&str]) -> Corpus {
        Corpus::new(ids.iter().map(|i| Utterance::new(*i, "s", "x", Label::Ad)).collect()).unwrap()
    }

    #[test]
    fn alignment() {
        let s = store(1, 3, 2);
        assert_eq!(align(&s, &corpus(&["u0", "u1", "u2"])).unwrap(), vec![0, 1, 2]);
        assert_eq!(align(&s, &corpus(&["u2", "u0"])).unwrap(), vec![2, 0]);
        let err = align(&s, &corpus(&["u0", "u9"])).unwrap_err();
        assert!(err.to_string().contains("u9"), "{err}");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.lpem");
        let s = store(3, 4, 5);
        write_embeddings(&s, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, s.encoded_len());
        assert_eq!(read_embeddings(&path).unwrap(), s);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            n_layers in 1usize..4,
            ids in prop::collection::hash_set("[a-z0-9_é]{1,12}", 0..6),
            dim in 1usize..5,
            seed in any::<u64>(),
        ) {
            let ids: Vec<String> = ids.into_iter().collect();
            let mut r = crate::seed::rng(seed);
            let layers = (0..n_layers)
                .map(|_| (0..ids.len() * dim).map(|_| rand::Rng::gen_range(&mut r, -1e6f32..1e6)).collect())
                .collect();
            let s = EmbeddingStore::new(ids, dim, layers).unwrap();
            let bytes = encode(&s);
            prop_assert_eq!(bytes.len(), s.encoded_len());
            let back = decode_embeddings(&bytes).unwrap();
            prop_assert_eq!(encode(&back), bytes);
            prop_assert_eq!(back, s);
        }
    }
}
