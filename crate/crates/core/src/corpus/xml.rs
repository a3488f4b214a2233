use std::path::Path;

use log::warn;

use super::tokenize::{align_span, tokenize};
use super::{AspectSpan, CorpusError, Polarity, SentenceRecord, Split};

/// Counters for everything dropped while parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseWarnings {
    pub conflict_dropped: usize,
    pub unknown_polarity: usize,
    /// `from`/`to` offsets that do not reproduce the `term` attribute.
    pub offset_mismatch: usize,
    /// Spans that cover no token.
    pub unaligned: usize,
    pub duplicate_spans: usize,
    /// Sentences that had aspect terms but none survived filtering.
    pub discarded_sentences: usize,
    /// Sentences without any aspect term annotation.
    pub sentences_without_aspects: usize,
}

impl ParseWarnings {
    pub fn skipped_aspects(&self) -> usize {
        self.offset_mismatch + self.unaligned + self.unknown_polarity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSplit {
    pub split: Split,
    pub records: Vec<SentenceRecord>,
    pub warnings: ParseWarnings,
}

pub fn parse_semeval_xml(path: &Path, split: Split) -> Result<ParsedSplit, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    parse_semeval_str(&text, &path.display().to_string(), split)
}

/// Parses SemEval-2014 task 4 XML held in memory. `origin` only labels error
/// messages.
pub fn parse_semeval_str(xml: &str, origin: &str, split: Split) -> Result<ParsedSplit, CorpusError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| {
        let pos = e.pos();
        CorpusError::Xml { origin: origin.to_string(), line: pos.row, column: pos.col, message: e.to_string() }
    })?;
    let malformed = |node: roxmltree::Node, message: String| {
        let pos = doc.text_pos_at(node.range().start);
        CorpusError::Xml { origin: origin.to_string(), line: pos.row, column: pos.col, message }
    };

    let mut warnings = ParseWarnings::default();
    let mut records = Vec::new();
    for sentence in doc.descendants().filter(|n| n.has_tag_name("sentence")) {
        let id = sentence.attribute("id").unwrap_or_default().to_string();
        let text_node = sentence
            .children()
            .find(|n| n.has_tag_name("text"))
            .ok_or_else(|| malformed(sentence, format!("sentence `{id}` has no <text>")))?;
        let text = text_node.text().unwrap_or_default().to_string();
        let chars: Vec<char> = text.chars().collect();
        let tokens = tokenize(&text);

        let terms: Vec<_> = sentence
            .descendants()
            .filter(|n| n.has_tag_name("aspectTerm"))
            .collect();
        if terms.is_empty() {
            warnings.sentences_without_aspects += 1;
            continue;
        }

        let mut aspects = Vec::new();
        for term_node in terms {
            let attr = |name: &str| {
                term_node
                    .attribute(name)
                    .ok_or_else(|| malformed(term_node, format!("aspectTerm in sentence `{id}` lacks `{name}`")))
            };
            let term = attr("term")?;
            let polarity = match attr("polarity")? {
                "positive" => Polarity::Positive,
                "negative" => Polarity::Negative,
                "neutral" => Polarity::Neutral,
                "conflict" => {
                    warnings.conflict_dropped += 1;
                    continue;
                }
                other => {
                    warn!("{origin}: sentence {id}: unknown polarity `{other}`, aspect skipped");
                    warnings.unknown_polarity += 1;
                    continue;
                }
            };
            let offset = |name: &str| -> Result<usize, CorpusError> {
                let raw = attr(name)?;
                raw.trim()
                    .parse()
                    .map_err(|_| malformed(term_node, format!("aspectTerm `{name}` is not an offset: `{raw}`")))
            };
            let (from, to) = (offset("from")?, offset("to")?);
            let matches = from < to && to <= chars.len() && chars[from..to].iter().copied().eq(term.chars());
            if !matches {
                warn!("{origin}: sentence {id}: offsets {from}..{to} do not match term `{term}`, skipped");
                warnings.offset_mismatch += 1;
                continue;
            }
            let Some((tok_start, tok_len)) = align_span(&tokens, from, to) else {
                warn!("{origin}: sentence {id}: term `{term}` covers no token, skipped");
                warnings.unaligned += 1;
                continue;
            };
            aspects.push(AspectSpan {
                term: term.to_string(),
                char_start: from,
                char_end: to,
                tok_start,
                tok_len,
                polarity,
            });
        }

        aspects.sort_by_key(|a| (a.char_start, a.char_end));
        let before = aspects.len();
        aspects.dedup_by_key(|a| (a.char_start, a.char_end));
        warnings.duplicate_spans += before - aspects.len();

        if aspects.is_empty() {
            warnings.discarded_sentences += 1;
            continue;
        }
        records.push(SentenceRecord {
            id,
            text,
            tokens: tokens.into_iter().map(|t| t.text).collect(),
            aspects,
        });
    }
    Ok(ParsedSplit { split, records, warnings })
}
