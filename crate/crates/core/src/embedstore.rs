//! The `EMBV1` embedding container and JSONL sense-label files.
//!
//! `EMBV1` layout, all integers little-endian:
//!
//! ```text
//! b"EMBV1\n"                      6 bytes magic
//! header_len: u32                 4 bytes
//! header: UTF-8 JSON              header_len bytes
//!   {"word", "dim", "count", "dtype": "f32le", "context_ids"}
//! payload: f32 x count x dim      row-major IEEE-754 binary32
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAGIC: &[u8; 6] = b"EMBV1\n";
pub const DTYPE: &str = "f32le";
/// Reserved label meaning "none of the offered senses".
pub const OTHER_LABEL: &str = "other";
pub const AUTO_SOURCE: &str = "auto-translation";

/// Contextual embeddings of one target word, one row per context.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    word: String,
    dim: usize,
    context_ids: Vec<String>,
    vectors: Vec<f32>,
}

impl EmbeddingSet {
    pub fn new(
        word: impl Into<String>,
        dim: usize,
        context_ids: Vec<String>,
        vectors: Vec<f32>,
    ) -> Result<Self> {
        let set = Self {
            word: word.into(),
            dim,
            context_ids,
            vectors,
        };
        set.validate()?;
        Ok(set)
    }

    /// Builds a set from `f64` rows, narrowing to `f32` storage.
    pub fn from_rows<R: AsRef<[f64]>>(
        word: impl Into<String>,
        context_ids: Vec<String>,
        rows: &[R],
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Shape(format!("row {i} has dim {}, expected {dim}", r.len())));
            }
            vectors.extend(r.iter().map(|&v| v as f32));
        }
        Self::new(word, dim, context_ids, vectors)
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("dim must be positive".into()));
        }
        if self.context_ids.is_empty() {
            return Err(Error::Validation("count must be positive".into()));
        }
        if self.vectors.len() != self.context_ids.len() * self.dim {
            return Err(Error::Shape(format!(
                "{} values for {} rows of dim {}",
                self.vectors.len(),
                self.context_ids.len(),
                self.dim
            )));
        }
        let mut seen = HashSet::with_capacity(self.context_ids.len());
        for id in &self.context_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate context id {id:?}")));
            }
        }
        if let Some(pos) = self.vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value in row {} (context {:?})",
                pos / self.dim,
                self.context_ids[pos / self.dim]
            )));
        }
        Ok(())
    }

    pub fn word(&self) -> &str {
        &self.word
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.context_ids.len()
    }

    pub fn context_ids(&self) -> &[String] {
        &self.context_ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.vectors.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.vectors
    }

    /// Rows promoted to `f64`.
    pub fn to_matrix(&self) -> crate::Matrix {
        let data = self.vectors.iter().map(|&v| f64::from(v)).collect();
        crate::Matrix::from_vec(self.count(), self.dim, data).expect("validated shape")
    }

    fn subset(&self, indices: &[usize]) -> Self {
        let mut vectors = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            vectors.extend_from_slice(self.row(i));
        }
        Self {
            word: self.word.clone(),
            dim: self.dim,
            context_ids: indices.iter().map(|&i| self.context_ids[i].clone()).collect(),
            vectors,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    word: String,
    dim: usize,
    count: usize,
    dtype: String,
    context_ids: Vec<String>,
}

/// Writes `set` as EMBV1 and returns the number of bytes written.
pub fn write_embv1<W: Write>(set: &EmbeddingSet, mut sink: W) -> Result<u64> {
    set.validate()?;
    let header = serde_json::to_vec(&Header {
        word: set.word.clone(),
        dim: set.dim,
        count: set.count(),
        dtype: DTYPE.into(),
        context_ids: set.context_ids.clone(),
    })?;
    let header_len = u32::try_from(header.len())
        .map_err(|_| Error::Format("header exceeds 4 GiB".into()))?;
    sink.write_all(MAGIC)?;
    sink.write_all(&header_len.to_le_bytes())?;
    sink.write_all(&header)?;
    let mut payload = Vec::with_capacity(set.vectors.len() * 4);
    for v in &set.vectors {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&payload)?;
    sink.flush()?;
    Ok((MAGIC.len() + 4 + header.len() + payload.len()) as u64)
}

pub fn read_embv1<R: Read>(mut source: R) -> Result<EmbeddingSet> {
    let mut magic = [0u8; 6];
    source
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("file shorter than the EMBV1 magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", String::from_utf8_lossy(&magic))));
    }
    let mut len = [0u8; 4];
    source
        .read_exact(&mut len)
        .map_err(|_| Error::Format("missing header length".into()))?;
    let header_len = u32::from_le_bytes(len) as usize;
    let mut header = vec![0u8; header_len];
    source
        .read_exact(&mut header)
        .map_err(|_| Error::Format("header shorter than declared length".into()))?;
    let header: Header = serde_json::from_slice(&header)
        .map_err(|e| Error::Format(format!("invalid header JSON: {e}")))?;
    if header.dtype != DTYPE {
        return Err(Error::Format(format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.context_ids.len() != header.count {
        return Err(Error::Format(format!(
            "header count {} but {} context ids",
            header.count,
            header.context_ids.len()
        )));
    }
    let expected = header
        .count
        .checked_mul(header.dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("declared payload size overflows".into()))?;
    let mut payload = Vec::with_capacity(expected);
    source.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(Error::Truncated {
            expected: expected as u64,
            found: payload.len() as u64,
        });
    }
    let vectors = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    EmbeddingSet::new(header.word, header.dim, header.context_ids, vectors)
}

pub fn write_embv1_file(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<u64> {
    write_embv1(set, BufWriter::new(File::create(path)?))
}

pub fn read_embv1_file(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    read_embv1(BufReader::new(File::open(path)?))
}

/// Per-context sense labels from one source: `"auto-translation"` or
/// `"rater:<id>"`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SenseLabeling {
    pub target: String,
    pub source: String,
    pub entries: BTreeMap<String, String>,
}

/// One line of a label file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub context_id: String,
    pub target: String,
    pub source: String,
    pub label: String,
}

impl SenseLabeling {
    pub fn new(target: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            source: source.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, context_id: impl Into<String>, label: impl Into<String>) -> Result<()> {
        let (context_id, label) = (context_id.into(), label.into());
        if label.trim().is_empty() {
            return Err(Error::Validation(format!("empty label for context {context_id:?}")));
        }
        if self.entries.contains_key(&context_id) {
            return Err(Error::Validation(format!("context {context_id:?} labeled twice")));
        }
        self.entries.insert(context_id, label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = LabelRecord> + '_ {
        self.entries.iter().map(|(c, l)| LabelRecord {
            context_id: c.clone(),
            target: self.target.clone(),
            source: self.source.clone(),
            label: l.clone(),
        })
    }

    /// Parses label JSONL. Every line must share one target and one source.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut labeling: Option<SenseLabeling> = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LabelRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("label line {}: {e}", n + 1)))?;
            let l = labeling.get_or_insert_with(|| SenseLabeling::new(&rec.target, &rec.source));
            if rec.target != l.target || rec.source != l.source {
                return Err(Error::Format(format!(
                    "label line {}: expected target {:?} / source {:?}",
                    n + 1,
                    l.target,
                    l.source
                )));
            }
            l.insert(rec.context_id, rec.label)?;
        }
        labeling.ok_or_else(|| Error::Format("label file is empty".into()))
    }

    pub fn write_jsonl<W: Write>(&self, mut sink: W) -> Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut sink, &rec)?;
            sink.write_all(b"\n")?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_jsonl(BufWriter::new(File::create(path)?))
    }
}

/// Embedding rows paired with their sense labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddingSet {
    set: EmbeddingSet,
    labels: Vec<String>,
}

impl LabeledEmbeddingSet {
    pub fn new(set: EmbeddingSet, labels: Vec<String>) -> Result<Self> {
        if labels.len() != set.count() {
            return Err(Error::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                set.count()
            )));
        }
        if let Some(i) = labels.iter().position(|l| l.trim().is_empty()) {
            return Err(Error::Validation(format!("empty label on row {i}")));
        }
        Ok(Self { set, labels })
    }

    pub fn set(&self) -> &EmbeddingSet {
        &self.set
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct labels in order of first appearance.
    pub fn label_alphabet(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for l in &self.labels {
            if !seen.contains(&l.as_str()) {
                seen.push(l.as_str());
            }
        }
        seen
    }
}

/// Keeps the rows whose context id is labeled, in their original order.
pub fn attach_labels(set: &EmbeddingSet, labeling: &SenseLabeling) -> Result<LabeledEmbeddingSet> {
    let (keep, labels): (Vec<usize>, Vec<String>) = set
        .context_ids
        .iter()
        .enumerate()
        .filter_map(|(i, id)| labeling.entries.get(id).map(|l| (i, l.clone())))
        .unzip();
    if keep.is_empty() {
        return Err(Error::EmptyDataset);
    }
    LabeledEmbeddingSet::new(set.subset(&keep), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn bytes(set: &EmbeddingSet) -> Vec<u8> {
        let mut buf = Vec::new();
        write_embv1(set, &mut buf).unwrap();
        buf
    }

    #[test]
    fn size_formula() {
        let set = EmbeddingSet::new("w", 2, ids(1), vec![1.0, 0.0]).unwrap();
        let buf = bytes(&set);
        let header_len = u32::from_le_bytes(buf[6..10].try_into().unwrap()) as usize;
        assert_eq!(buf.len(), 6 + 4 + header_len + 8);
        assert_eq!(&buf[..6], b"EMBV1\n");
        let header: serde_json::Value = serde_json::from_slice(&buf[10..10 + header_len]).unwrap();
        assert_eq!(header["dtype"], "f32le");
        assert_eq!(header["count"], 1);
        assert_eq!(&buf[10 + header_len..10 + header_len + 4], &1.0f32.to_le_bytes());
    }

    #[test]
    fn header_key_order() {
        let set = EmbeddingSet::new("w", 1, ids(1), vec![0.5]).unwrap();
        let buf = bytes(&set);
        let text = String::from_utf8_lossy(&buf[10..]);
        assert!(text.starts_with(r#"{"word":"w","dim":1,"count":1,"dtype":"f32le","context_ids":["c0"]}"#));
    }

    #[test]
    fn refuses_non_finite() {
        assert!(matches!(
            EmbeddingSet::new("w", 2, ids(1), vec![f32::NAN, 0.0]),
            Err(Error::Validation(_))
        ));
        assert!(EmbeddingSet::new("w", 1, ids(1), vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn rejects_duplicate_ids() {
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(EmbeddingSet::new("w", 1, dup, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn bad_magic() {
        let set = EmbeddingSet::new("w", 1, ids(2), vec![1.0, 2.0]).unwrap();
        let mut buf = bytes(&set);
        buf[4] = b'2';
        assert!(matches!(read_embv1(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload() {
        let set = EmbeddingSet::new("w", 2, ids(2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let buf = bytes(&set);
        assert!(matches!(
            read_embv1(&buf[..buf.len() - 4]),
            Err(Error::Truncated { expected: 16, found: 12 })
        ));
        let mut long = buf.clone();
        long.extend_from_slice(&[0; 4]);
        assert!(matches!(read_embv1(&long[..]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn nan_payload_is_a_validation_error() {
        let set = EmbeddingSet::new("w", 1, ids(1), vec![1.0]).unwrap();
        let mut buf = bytes(&set);
        let n = buf.len();
        buf[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_embv1(&buf[..]), Err(Error::Validation(_))));
    }

    #[test]
    fn inconsistent_header() {
        let header = br#"{"word":"w","dim":1,"count":2,"dtype":"f32le","context_ids":["a"]}"#;
        let mut buf = MAGIC.to_vec();
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(header);
        buf.extend_from_slice(&[0; 8]);
        assert!(matches!(read_embv1(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn attach_keeps_labeled_rows_in_order() {
        let set = EmbeddingSet::new("w", 1, ids(3), vec![1.0, 2.0, 3.0]).unwrap();
        let mut all = SenseLabeling::new("w", AUTO_SOURCE);
        for (c, l) in [("c2", "b"), ("c0", "a"), ("c1", "a")] {
            all.insert(c, l).unwrap();
        }
        let full = attach_labels(&set, &all).unwrap();
        assert_eq!(full.len(), 3);
        assert_eq!(full.labels(), ["a", "a", "b"]);

        let mut some = SenseLabeling::new("w", AUTO_SOURCE);
        some.insert("c2", "b").unwrap();
        some.insert("c0", "a").unwrap();
        let part = attach_labels(&set, &some).unwrap();
        assert_eq!(part.set().context_ids(), ["c0", "c2"]);
        assert_eq!(part.set().row(1), [3.0]);

        let mut none = SenseLabeling::new("w", AUTO_SOURCE);
        none.insert("zzz", "a").unwrap();
        assert!(matches!(attach_labels(&set, &none), Err(Error::EmptyDataset)));
    }

    #[test]
    fn label_jsonl_round_trip() {
        let mut l = SenseLabeling::new("bark", "rater:1");
        l.insert("d:0", "corteccia").unwrap();
        l.insert("d:1", OTHER_LABEL).unwrap();
        let mut buf = Vec::new();
        l.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"context_id":"d:0","target":"bark","source":"rater:1","label":"corteccia"}"#
        );
        assert_eq!(SenseLabeling::read_jsonl(&buf[..]).unwrap(), l);
    }

    #[test]
    fn label_file_rejects_mixed_sources_and_empty_labels() {
        let mixed = "{\"context_id\":\"a\",\"target\":\"t\",\"source\":\"x\",\"label\":\"l\"}\n{\"context_id\":\"b\",\"target\":\"t\",\"source\":\"y\",\"label\":\"l\"}\n";
        assert!(SenseLabeling::read_jsonl(mixed.as_bytes()).is_err());
        let empty = "{\"context_id\":\"a\",\"target\":\"t\",\"source\":\"x\",\"label\":\" \"}\n";
        assert!(SenseLabeling::read_jsonl(empty.as_bytes()).is_err());
    }

    fn arb_set() -> impl Strategy<Value = EmbeddingSet> {
        (1usize..=64, 1usize..=32).prop_flat_map(|(n, d)| {
            prop::collection::vec(prop::num::f32::NORMAL | prop::num::f32::ZERO | prop::num::f32::SUBNORMAL, n * d)
                .prop_map(move |v| EmbeddingSet::new("word", d, ids(n), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(set in arb_set()) {
            let buf = bytes(&set);
            let back = read_embv1(&buf[..]).unwrap();
            prop_assert_eq!(bytes(&back), buf);
            let a: Vec<u32> = set.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back.context_ids(), set.context_ids());
        }

        #[test]
        fn attach_never_reorders(mask in prop::collection::vec(any::<bool>(), 1..40)) {
            let n = mask.len();
            let set = EmbeddingSet::new("w", 1, ids(n), (0..n).map(|i| i as f32).collect()).unwrap();
            let mut l = SenseLabeling::new("w", AUTO_SOURCE);
            for (i, &m) in mask.iter().enumerate().rev() {
                if m { l.insert(format!("c{i}"), "x").unwrap(); }
            }
            match attach_labels(&set, &l) {
                Ok(d) => {
                    let rows: Vec<f32> = d.set().rows().map(|r| r[0]).collect();
                    let mut sorted = rows.clone();
                    sorted.sort_by(f32::total_cmp);
                    prop_assert_eq!(rows, sorted);
                    prop_assert_eq!(d.len(), mask.iter().filter(|&&m| m).count());
                }
                Err(Error::EmptyDataset) => prop_assert!(mask.iter().all(|&m| !m)),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}
