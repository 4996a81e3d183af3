//! Immutable inverted index with bounded edit-distance token matching.
//!
//! Scoring for a segment `s` and query tokens `q`:
//!
//! ```text
//! score(s) = Σ_q Σ_{v ∈ match(q)} tf(v, s) · ln(1 + N / df(v)) · δ^dist(q, v)
//! ```
//!
//! where `N` is the number of documents of the queried category and `δ` is
//! the policy's fuzz discount.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Category, SegmentDocument};
use crate::query::ScoredResult;
use crate::text;

pub const INDEX_MAGIC: &[u8; 4] = b"SGIX";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate document for segment {segment_id:?} in category {category}")]
    DuplicateDocument { segment_id: String, category: Category },
    #[error("query is empty after tokenization")]
    EmptyQuery,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("invalid match policy: {0}")]
    Policy(String),
    #[error("index i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("index format version {found} does not match supported version {expected}; rebuild the index")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt index: {0}")]
    Corrupt(String),
}

/// Per-category fuzzy matching rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPolicy {
    pub category: Category,
    /// 0, 1 or 2.
    pub max_edits: u8,
    /// Query tokens with fewer characters than this match exactly only.
    pub min_token_len_for_fuzzy: usize,
    /// Multiplier applied once per edit, in `(0, 1]`.
    pub fuzz_discount: f64,
}

impl MatchPolicy {
    /// asr and ocr tolerate one edit; labels match exactly.
    pub fn default_for(category: Category) -> Self {
        Self {
            category,
            max_edits: match category {
                Category::Asr | Category::Ocr => 1,
                Category::Label => 0,
            },
            min_token_len_for_fuzzy: 4,
            fuzz_discount: 0.5,
        }
    }

    pub fn with_max_edits(mut self, max_edits: u8) -> Self {
        self.max_edits = max_edits;
        self
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        if self.max_edits > 2 {
            return Err(IndexError::Policy(format!("max_edits {} exceeds 2", self.max_edits)));
        }
        if !(self.fuzz_discount > 0.0 && self.fuzz_discount <= 1.0) {
            return Err(IndexError::Policy(format!(
                "fuzz_discount {} outside (0, 1]",
                self.fuzz_discount
            )));
        }
        Ok(())
    }

    /// Edit bound applied to a particular query token.
    pub fn edits_for(&self, query_token: &str) -> usize {
        if query_token.chars().count() < self.min_token_len_for_fuzzy {
            0
        } else {
            self.max_edits as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TokenMatch {
    pub edit_distance: usize,
    pub token: String,
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = sub.min(diag + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

/// Levenshtein distance if it is at most `bound`, else `None`.
fn bounded_levenshtein(a: &[char], b: &[char], bound: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > bound {
        return None;
    }
    if bound == 0 {
        return (a == b).then_some(0);
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        let mut row_min = row[0];
        for (j, cb) in b.iter().enumerate() {
            let sub = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = sub.min(diag + 1).min(row[j] + 1);
            row_min = row_min.min(row[j + 1]);
        }
        if row_min > bound {
            return None;
        }
    }
    let d = row[b.len()];
    (d <= bound).then_some(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct CategoryIndex {
    vocabulary: Vec<String>,
    vocab_chars: Vec<Vec<char>>,
    postings: Vec<Vec<Posting>>,
    /// (doc, token count), sorted by doc.
    doc_lengths: Vec<(u32, u32)>,
}

impl CategoryIndex {
    fn n_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    fn lookup(&self, token: &str) -> Option<usize> {
        self.vocabulary.binary_search_by(|v| v.as_str().cmp(token)).ok()
    }
}

/// Inverted index over segment documents, one sub-index per category.
#[derive(Debug, Clone, PartialEq)]
pub struct PostingIndex {
    /// Sorted, unique segment ids; posting doc numbers index into this.
    segments: Vec<String>,
    categories: [CategoryIndex; 3],
}

impl PostingIndex {
    pub fn build(docs: &[SegmentDocument]) -> Result<Self, IndexError> {
        let mut seen = HashSet::new();
        for d in docs {
            if !seen.insert((d.segment_id.as_str(), d.category)) {
                return Err(IndexError::DuplicateDocument {
                    segment_id: d.segment_id.clone(),
                    category: d.category,
                });
            }
        }
        let mut segments: Vec<String> = docs.iter().map(|d| d.segment_id.clone()).collect();
        segments.sort();
        segments.dedup();

        let mut categories: [CategoryIndex; 3] = Default::default();
        for category in Category::ALL {
            let mut terms: BTreeMap<&str, BTreeMap<u32, u32>> = BTreeMap::new();
            let mut doc_lengths = Vec::new();
            for d in docs.iter().filter(|d| d.category == category) {
                let doc = segments.binary_search(&d.segment_id).expect("segment table") as u32;
                doc_lengths.push((doc, d.tokens.len() as u32));
                for t in &d.tokens {
                    *terms.entry(t.as_str()).or_default().entry(doc).or_default() += 1;
                }
            }
            doc_lengths.sort_unstable();
            let ci = &mut categories[category.index()];
            ci.vocabulary = terms.keys().map(|t| t.to_string()).collect();
            ci.vocab_chars = ci.vocabulary.iter().map(|t| t.chars().collect()).collect();
            ci.postings = terms
                .into_values()
                .map(|p| p.into_iter().map(|(doc, tf)| Posting { doc, tf }).collect())
                .collect();
            ci.doc_lengths = doc_lengths;
        }
        Ok(Self { segments, categories })
    }

    pub fn n_docs(&self, category: Category) -> usize {
        self.categories[category.index()].n_docs()
    }

    pub fn vocabulary(&self, category: Category) -> &[String] {
        &self.categories[category.index()].vocabulary
    }

    /// `(segment_id, term_frequency)` pairs for a token, sorted by segment id.
    pub fn postings(&self, category: Category, token: &str) -> Vec<(&str, u32)> {
        let ci = &self.categories[category.index()];
        ci.lookup(token)
            .map(|t| {
                ci.postings[t]
                    .iter()
                    .map(|p| (self.segments[p.doc as usize].as_str(), p.tf))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Number of documents of `category` containing `token`.
    pub fn document_frequency(&self, category: Category, token: &str) -> usize {
        let ci = &self.categories[category.index()];
        ci.lookup(token).map_or(0, |t| ci.postings[t].len())
    }

    /// Token count of a segment's document in `category` (0 if absent).
    pub fn document_length(&self, category: Category, segment_id: &str) -> u32 {
        let Ok(doc) = self.segments.binary_search_by(|s| s.as_str().cmp(segment_id)) else {
            return 0;
        };
        let ci = &self.categories[category.index()];
        ci.doc_lengths
            .binary_search_by_key(&(doc as u32), |&(d, _)| d)
            .map_or(0, |i| ci.doc_lengths[i].1)
    }

    /// Segment ids with at least one document.
    pub fn segment_ids(&self) -> &[String] {
        &self.segments
    }

    /// Vocabulary tokens of the policy's category within the policy's edit
    /// bound, sorted by `(edit_distance, token)`.
    pub fn match_tokens(&self, query_token: &str, policy: &MatchPolicy) -> Vec<TokenMatch> {
        self.match_indices(query_token, policy)
            .into_iter()
            .map(|(edit_distance, t)| TokenMatch {
                edit_distance,
                token: self.categories[policy.category.index()].vocabulary[t].clone(),
            })
            .collect()
    }

    fn match_indices(&self, query_token: &str, policy: &MatchPolicy) -> Vec<(usize, usize)> {
        let ci = &self.categories[policy.category.index()];
        let bound = policy.edits_for(query_token);
        if bound == 0 {
            return ci.lookup(query_token).map(|t| vec![(0, t)]).unwrap_or_default();
        }
        let q: Vec<char> = query_token.chars().collect();
        let mut out: Vec<(usize, usize)> = ci
            .vocab_chars
            .iter()
            .enumerate()
            .filter_map(|(t, v)| bounded_levenshtein(&q, v, bound).map(|d| (d, t)))
            .collect();
        // vocabulary is sorted, so index order is token order
        out.sort_unstable();
        out
    }

    /// Top-`k` segments for free text under `policy`. Ties are broken by
    /// ascending segment id.
    pub fn search_text(
        &self,
        query_text: &str,
        policy: &MatchPolicy,
        k: usize,
    ) -> Result<Vec<ScoredResult>, IndexError> {
        policy.validate()?;
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        let query = text::tokenize(query_text);
        if query.is_empty() {
            return Err(IndexError::EmptyQuery);
        }
        let ci = &self.categories[policy.category.index()];
        let n_docs = ci.n_docs() as f64;
        let mut scores = vec![0.0f64; self.segments.len()];
        let mut touched = vec![false; self.segments.len()];
        for q in &query {
            for (dist, t) in self.match_indices(q, policy) {
                let postings = &ci.postings[t];
                let idf = (1.0 + n_docs / postings.len() as f64).ln();
                let weight = idf * policy.fuzz_discount.powi(dist as i32);
                for p in postings {
                    scores[p.doc as usize] += p.tf as f64 * weight;
                    touched[p.doc as usize] = true;
                }
            }
        }
        let mut hits: Vec<(usize, f64)> = scores.into_iter().enumerate().filter(|&(d, _)| touched[d]).collect();
        // doc order is segment-id order, so a stable sort on score alone
        // leaves ties by ascending segment id
        hits.sort_by(|a, b| b.1.total_cmp(&a.1));
        hits.truncate(k);
        Ok(hits
            .into_iter()
            .map(|(d, s)| ScoredResult::single(self.segments[d].clone(), s))
            .collect())
    }

    // -- binary format -----------------------------------------------------

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut segs = Vec::new();
        put_u32(&mut segs, self.segments.len() as u32);
        for s in &self.segments {
            put_str(&mut segs, s);
        }
        let mut vocab = Vec::new();
        let mut post = Vec::new();
        let mut stat = Vec::new();
        for ci in &self.categories {
            put_u32(&mut vocab, ci.vocabulary.len() as u32);
            for v in &ci.vocabulary {
                put_str(&mut vocab, v);
            }
            for plist in &ci.postings {
                put_u32(&mut post, plist.len() as u32);
                for p in plist {
                    put_u32(&mut post, p.doc);
                    put_u32(&mut post, p.tf);
                }
            }
            put_u32(&mut stat, ci.doc_lengths.len() as u32);
            for &(doc, len) in &ci.doc_lengths {
                put_u32(&mut stat, doc);
                put_u32(&mut stat, len);
            }
        }

        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        put_u32(&mut out, INDEX_VERSION);
        let sections: [(&[u8; 4], Vec<u8>); 4] = [(b"SEGS", segs), (b"VOCB", vocab), (b"POST", post), (b"STAT", stat)];
        put_u32(&mut out, sections.len() as u32);
        for (tag, body) in sections {
            out.extend_from_slice(tag);
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            out.extend_from_slice(&body);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != INDEX_MAGIC {
            return Err(IndexError::BadMagic);
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(IndexError::VersionMismatch {
                found: version,
                expected: INDEX_VERSION,
            });
        }
        let n_sections = r.u32()?;
        let mut sections: BTreeMap<[u8; 4], &[u8]> = BTreeMap::new();
        for _ in 0..n_sections {
            let tag: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
            let len = r.u64()?;
            let len = usize::try_from(len).map_err(|_| corrupt("section length"))?;
            sections.insert(tag, r.take(len)?);
        }
        if !r.is_done() {
            return Err(corrupt("trailing bytes after sections"));
        }
        let section = |tag: &[u8; 4]| {
            sections
                .get(tag)
                .map(|b| Reader::new(b))
                .ok_or_else(|| corrupt(&format!("missing section {}", String::from_utf8_lossy(tag))))
        };

        let mut segs = section(b"SEGS")?;
        let n = segs.u32()? as usize;
        let segments = (0..n).map(|_| segs.string()).collect::<Result<Vec<_>, _>>()?;
        segs.finish("SEGS")?;
        if !segments.windows(2).all(|w| w[0] < w[1]) {
            return Err(corrupt("segment table not strictly sorted"));
        }

        let mut vocab = section(b"VOCB")?;
        let mut post = section(b"POST")?;
        let mut stat = section(b"STAT")?;
        let mut categories: [CategoryIndex; 3] = Default::default();
        for ci in categories.iter_mut() {
            let nv = vocab.u32()? as usize;
            ci.vocabulary = (0..nv).map(|_| vocab.string()).collect::<Result<_, _>>()?;
            if !ci.vocabulary.windows(2).all(|w| w[0] < w[1]) {
                return Err(corrupt("vocabulary not strictly sorted"));
            }
            ci.vocab_chars = ci.vocabulary.iter().map(|t| t.chars().collect()).collect();
            for _ in 0..nv {
                let np = post.u32()? as usize;
                if np == 0 {
                    return Err(corrupt("vocabulary token without postings"));
                }
                let mut plist = Vec::with_capacity(np);
                for _ in 0..np {
                    let doc = post.u32()?;
                    let tf = post.u32()?;
                    if doc as usize >= segments.len() || tf == 0 {
                        return Err(corrupt("posting out of range"));
                    }
                    plist.push(Posting { doc, tf });
                }
                if !plist.windows(2).all(|w| w[0].doc < w[1].doc) {
                    return Err(corrupt("postings not sorted"));
                }
                ci.postings.push(plist);
            }
            let nd = stat.u32()? as usize;
            for _ in 0..nd {
                let doc = stat.u32()?;
                let len = stat.u32()?;
                if doc as usize >= segments.len() {
                    return Err(corrupt("document statistic out of range"));
                }
                ci.doc_lengths.push((doc, len));
            }
        }
        vocab.finish("VOCB")?;
        post.finish("POST")?;
        stat.finish("STAT")?;
        Ok(Self { segments, categories })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), IndexError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self, IndexError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub fn build_index(docs: &[SegmentDocument]) -> Result<PostingIndex, IndexError> {
    PostingIndex::build(docs)
}

fn corrupt(msg: &str) -> IndexError {
    IndexError::Corrupt(msg.to_string())
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt("unexpected end of data"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, IndexError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("invalid utf-8"))
    }

    fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }

    fn finish(&self, tag: &str) -> Result<(), IndexError> {
        if self.is_done() {
            Ok(())
        } else {
            Err(corrupt(&format!("unread bytes in section {tag}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(seg: &str, category: Category, tokens: &[&str]) -> SegmentDocument {
        SegmentDocument {
            segment_id: seg.into(),
            category,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn empty_index() {
        let idx = build_index(&[]).unwrap();
        for c in Category::ALL {
            assert_eq!(idx.n_docs(c), 0);
            assert!(idx.vocabulary(c).is_empty());
        }
    }

    #[test]
    fn counts_term_frequency() {
        let idx = build_index(&[doc("s1", Category::Asr, &["a", "a", "b"])]).unwrap();
        assert_eq!(idx.postings(Category::Asr, "a"), vec![("s1", 2)]);
        assert_eq!(idx.postings(Category::Asr, "b"), vec![("s1", 1)]);
        assert_eq!(idx.document_length(Category::Asr, "s1"), 3);
        assert_eq!(idx.n_docs(Category::Asr), 1);
        assert_eq!(idx.n_docs(Category::Label), 0);
    }

    #[test]
    fn rejects_duplicate_documents() {
        let err = build_index(&[doc("s1", Category::Asr, &["a"]), doc("s1", Category::Asr, &["b"])]).unwrap_err();
        assert!(matches!(err, IndexError::DuplicateDocument { .. }));
        // same segment, different category is fine
        build_index(&[doc("s1", Category::Asr, &["a"]), doc("s1", Category::Ocr, &["b"])]).unwrap();
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance("toast", "coast"), 1);
        assert_eq!(edit_distance("x", "x"), 0);
        assert_eq!(edit_distance("tost", "toast"), 1);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("ab", "ba"), 2);
    }

    #[test]
    fn bounded_agrees_with_full() {
        let words = ["", "a", "ab", "abc", "abd", "xbc", "abcd", "bcd", "dcba"];
        for a in words {
            for b in words {
                let ac: Vec<char> = a.chars().collect();
                let bc: Vec<char> = b.chars().collect();
                let d = edit_distance(a, b);
                for bound in 0..=3 {
                    let expected = (d <= bound).then_some(d);
                    assert_eq!(bounded_levenshtein(&ac, &bc, bound), expected, "{a} {b} {bound}");
                }
            }
        }
    }

    #[test]
    fn toast_and_coast() {
        let idx = build_index(&[
            doc("s1", Category::Label, &["toast"]),
            doc("s2", Category::Label, &["coast"]),
        ])
        .unwrap();
        let exact = MatchPolicy::default_for(Category::Label);
        let m = idx.match_tokens("toast", &exact);
        assert_eq!(
            m,
            vec![TokenMatch {
                edit_distance: 0,
                token: "toast".into()
            }]
        );

        let fuzzy = exact.with_max_edits(1);
        let m = idx.match_tokens("toast", &fuzzy);
        assert_eq!(
            m,
            vec![
                TokenMatch {
                    edit_distance: 0,
                    token: "toast".into()
                },
                TokenMatch {
                    edit_distance: 1,
                    token: "coast".into()
                },
            ]
        );
    }

    #[test]
    fn short_tokens_match_exactly() {
        let idx = build_index(&[doc("s1", Category::Asr, &["cat", "cut"])]).unwrap();
        let p = MatchPolicy::default_for(Category::Asr).with_max_edits(2);
        assert_eq!(idx.match_tokens("cat", &p).len(), 1);
        assert!(idx.match_tokens("cot", &p).is_empty());
    }

    #[test]
    fn single_doc_score() {
        let idx = build_index(&[doc("s1", Category::Label, &["boat"])]).unwrap();
        let p = MatchPolicy::default_for(Category::Label);
        let r = idx.search_text("boat", &p, 5).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].segment_id, "s1");
        assert_eq!(r[0].score, 2f64.ln());
    }

    #[test]
    fn search_errors_and_absent() {
        let idx = build_index(&[doc("s1", Category::Asr, &["boat"])]).unwrap();
        let p = MatchPolicy::default_for(Category::Asr).with_max_edits(0);
        assert!(idx.search_text("plane", &p, 5).unwrap().is_empty());
        assert!(matches!(idx.search_text(" ,. ", &p, 5), Err(IndexError::EmptyQuery)));
        assert!(matches!(idx.search_text("boat", &p, 0), Err(IndexError::ZeroK)));
        let bad = p.with_max_edits(3);
        assert!(matches!(idx.search_text("boat", &bad, 1), Err(IndexError::Policy(_))));
    }

    #[test]
    fn ties_break_by_segment_id() {
        let idx = build_index(&[
            doc("b", Category::Asr, &["boat"]),
            doc("a", Category::Asr, &["boat"]),
            doc("c", Category::Asr, &["boat", "boat"]),
        ])
        .unwrap();
        let p = MatchPolicy::default_for(Category::Asr);
        let ids: Vec<_> = idx
            .search_text("boat", &p, 10)
            .unwrap()
            .into_iter()
            .map(|r| r.segment_id)
            .collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn binary_roundtrip_and_corruption() {
        let idx = build_index(&[
            doc("s1", Category::Asr, &["hello", "world", "hello"]),
            doc("s2", Category::Label, &["boat"]),
            doc("s2", Category::Ocr, &["exit"]),
        ])
        .unwrap();
        let bytes = idx.to_bytes();
        assert_eq!(&bytes[..4], b"SGIX");
        assert_eq!(PostingIndex::from_bytes(&bytes).unwrap(), idx);

        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(
            PostingIndex::from_bytes(&wrong_version),
            Err(IndexError::VersionMismatch { found: 9, .. })
        ));
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            PostingIndex::from_bytes(&bad_magic),
            Err(IndexError::BadMagic)
        ));
        assert!(matches!(
            PostingIndex::from_bytes(&bytes[..bytes.len() - 3]),
            Err(IndexError::Corrupt(_))
        ));
    }
}
