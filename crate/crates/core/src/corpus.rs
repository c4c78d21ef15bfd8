//! Sentence segmentation, target-word lookup and context-window construction.
//!
//! A context window is grown symmetrically from the sentence holding a
//! target occurrence: at each step the window gains one sentence before and
//! one after (only the side that exists at a document edge), and the larger
//! window is kept only while its word count is strictly closer to the target
//! size than the current one.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default number of words a context window aims for.
pub const DEFAULT_WINDOW_SIZE: usize = 100;

/// Tokens whose trailing period never ends a sentence. Compared
/// case-insensitively against the whole whitespace-delimited token.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "vs.", "e.g.", "i.e.", "etc.",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub word_count: usize,
}

impl Sentence {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let word_count = text.split_whitespace().count();
        Self { text, word_count }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self> {
        let doc_id = doc_id.into();
        if sentences.is_empty() {
            return Err(Error::Validation(format!(
                "document {doc_id:?} has no sentences"
            )));
        }
        Ok(Self { doc_id, sentences })
    }

    /// Segments raw text with [`segment_sentences`].
    pub fn from_text(doc_id: impl Into<String>, raw: &str) -> Result<Self> {
        Self::new(doc_id, segment_sentences(raw))
    }

    /// One sentence per non-blank line; bypasses the heuristic segmenter.
    pub fn from_lines(doc_id: impl Into<String>, raw: &str) -> Result<Self> {
        let sentences = raw
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(Sentence::new)
            .collect();
        Self::new(doc_id, sentences)
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }
}

/// A target-word hit. `ordinal` numbers the hits for one target within one
/// document and becomes part of the window's context id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub doc_id: String,
    pub target: String,
    pub ordinal: usize,
    pub sentence_index: usize,
    pub token_index: usize,
    pub surface_form: String,
}

/// Serialized field order is the windows JSONL key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub context_id: String,
    pub target: String,
    pub doc_id: String,
    pub sentence_span: (usize, usize),
    pub text: String,
    pub word_count: usize,
    pub target_char_offset: usize,
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201D}' | '\u{2019}')
}

fn is_abbreviation(token: &str) -> bool {
    let lower = token.to_lowercase();
    let lower = lower.trim_start_matches(['"', '\'', '(', '[']);
    ABBREVIATIONS.contains(&lower)
}

/// Splits raw text into trimmed sentences.
///
/// A boundary follows a run of `.`, `!` or `?` (plus any closing quotes or
/// brackets) when the next non-whitespace character is uppercase or the text
/// ends. A period closing one of the known abbreviations never splits.
pub fn segment_sentences(raw: &str) -> Vec<Sentence> {
    let chars: Vec<(usize, char)> = raw.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminal(chars[j].1) || is_closing(chars[j].1)) {
            j += 1;
        }
        let end_byte = chars.get(j).map_or(raw.len(), |&(b, _)| b);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let at_end = k == chars.len();
        let boundary = at_end || (k > j && chars[k].1.is_uppercase());
        if boundary {
            let token_start = raw[start..end_byte]
                .rfind(char::is_whitespace)
                .map_or(start, |p| start + p + 1);
            let token = &raw[token_start..end_byte];
            let abbreviated = c == '.' && j == i + 1 && is_abbreviation(token);
            if !abbreviated || at_end {
                push_trimmed(&mut sentences, &raw[start..end_byte]);
                start = end_byte;
            }
        }
        i = j;
    }
    push_trimmed(&mut sentences, &raw[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<Sentence>, text: &str) {
    let t = text.trim();
    if !t.is_empty() {
        out.push(Sentence::new(t));
    }
}

/// Byte ranges of the whitespace-delimited tokens of `text`.
fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (b, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, b));
                start = None;
            }
            (false, None) => start = Some(b),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Byte range of `token` with leading and trailing punctuation removed,
/// relative to the token start.
fn core_range(token: &str) -> (usize, usize) {
    let trimmed_start = token.len() - token.trim_start_matches(|c: char| !c.is_alphanumeric()).len();
    let rest = &token[trimmed_start..];
    let core_len = rest.trim_end_matches(|c: char| !c.is_alphanumeric()).len();
    (trimmed_start, trimmed_start + core_len)
}

fn fold(word: &str) -> String {
    let (a, b) = core_range(word);
    word[a..b].to_lowercase()
}

/// Every token whose case-folded, punctuation-stripped form equals the
/// folded target, in document order. Inflected forms do not match.
pub fn find_occurrences(doc: &Document, target: &str) -> Vec<Occurrence> {
    let folded = fold(target);
    if folded.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (si, sentence) in doc.sentences.iter().enumerate() {
        for (ti, &(s, e)) in token_spans(&sentence.text).iter().enumerate() {
            let token = &sentence.text[s..e];
            let (a, b) = core_range(token);
            if token[a..b].to_lowercase() == folded {
                out.push(Occurrence {
                    doc_id: doc.doc_id.clone(),
                    target: folded.clone(),
                    ordinal: out.len(),
                    sentence_index: si,
                    token_index: ti,
                    surface_form: token[a..b].to_string(),
                });
            }
        }
    }
    out
}

/// Successive sentence spans visited by the expansion loop, starting from the
/// single occurrence sentence and ending once the document is exhausted.
pub fn expansion_steps(sentence_count: usize, seed: usize) -> Vec<(usize, usize)> {
    let mut steps = vec![(seed, seed)];
    let (mut start, mut end) = (seed, seed);
    while start > 0 || end + 1 < sentence_count {
        start = start.saturating_sub(1);
        end = (end + 1).min(sentence_count - 1);
        steps.push((start, end));
    }
    steps
}

fn span_words(doc: &Document, (start, end): (usize, usize)) -> usize {
    doc.sentences[start..=end].iter().map(|s| s.word_count).sum()
}

/// Inclusive sentence span chosen for an occurrence in `sentence_index`.
pub fn choose_span(doc: &Document, sentence_index: usize, target_size: usize) -> (usize, usize) {
    let distance = |span| span_words(doc, span).abs_diff(target_size);
    let steps = expansion_steps(doc.sentences.len(), sentence_index);
    let mut current = steps[0];
    for &broader in &steps[1..] {
        if distance(broader) < distance(current) {
            current = broader;
        } else {
            break;
        }
    }
    current
}

/// Builds the context window seeded by `occ`.
pub fn build_window(doc: &Document, occ: &Occurrence, target_size: usize) -> Result<ContextWindow> {
    if occ.doc_id != doc.doc_id || occ.sentence_index >= doc.sentences.len() {
        return Err(Error::Precondition(format!(
            "occurrence {}#{} does not belong to document {:?}",
            occ.doc_id, occ.ordinal, doc.doc_id
        )));
    }
    let seed_sentence = &doc.sentences[occ.sentence_index].text;
    let spans = token_spans(seed_sentence);
    let &(ts, te) = spans.get(occ.token_index).ok_or_else(|| {
        Error::Precondition(format!(
            "token {} out of range in sentence {}",
            occ.token_index, occ.sentence_index
        ))
    })?;
    let (cs, _) = core_range(&seed_sentence[ts..te]);

    let span = choose_span(doc, occ.sentence_index, target_size);
    let members = &doc.sentences[span.0..=span.1];
    let offset_before: usize = doc.sentences[span.0..occ.sentence_index]
        .iter()
        .map(|s| s.text.len() + 1)
        .sum();
    let text = members
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(ContextWindow {
        context_id: format!("{}:{}", doc.doc_id, occ.ordinal),
        target: occ.target.clone(),
        doc_id: doc.doc_id.clone(),
        sentence_span: span,
        text,
        word_count: members.iter().map(|s| s.word_count).sum(),
        target_char_offset: offset_before + ts + cs,
    })
}

/// All windows for `target` in `doc`, one per occurrence.
pub fn windows_for(doc: &Document, target: &str, target_size: usize) -> Result<Vec<ContextWindow>> {
    find_occurrences(doc, target)
        .iter()
        .map(|occ| build_window(doc, occ, target_size))
        .collect()
}
