//! Accuracy breakdown by single/multi-aspect scope and gold class.

use std::fmt::Write;

use rayon::prelude::*;

use crate::autodiff::Scalar;
use crate::corpus::Polarity;
use crate::model::{argmax, predict_sentence, EncodedSentence, ForwardOptions, ModelError, ModelParams};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cell {
    pub correct: usize,
    pub count: usize,
}

impl Cell {
    /// `None` for an empty bucket.
    pub fn accuracy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.correct as f64 / self.count as f64)
    }

    fn record(&mut self, hit: bool) {
        self.count += 1;
        self.correct += usize::from(hit);
    }

    fn merge(&mut self, other: Cell) {
        self.correct += other.correct;
        self.count += other.count;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalReport {
    pub domain: String,
    pub variant: String,
    pub sa: Cell,
    pub ma: Cell,
    /// Recall per gold class, in [`Polarity`] index order.
    pub per_class: [Cell; 3],
}

impl EvalReport {
    pub fn new(domain: impl Into<String>, variant: impl Into<String>) -> Self {
        Self { domain: domain.into(), variant: variant.into(), ..Self::default() }
    }

    pub fn record(&mut self, gold: Polarity, predicted: Polarity, multi_aspect: bool) {
        let hit = gold == predicted;
        if multi_aspect { &mut self.ma } else { &mut self.sa }.record(hit);
        self.per_class[gold.index()].record(hit);
    }

    pub fn total(&self) -> Cell {
        Cell { correct: self.sa.correct + self.ma.correct, count: self.sa.count + self.ma.count }
    }

    pub fn class(&self, p: Polarity) -> Cell {
        self.per_class[p.index()]
    }

    /// Adds another report's counts, e.g. the same test set under another seed.
    pub fn merge(&mut self, other: &EvalReport) {
        self.sa.merge(other.sa);
        self.ma.merge(other.ma);
        for (a, b) in self.per_class.iter_mut().zip(other.per_class) {
            a.merge(b);
        }
    }

    /// Cells in column order: Total, SA, MA, Neu, Neg, Pos.
    pub fn columns(&self) -> [Cell; 6] {
        [self.total(), self.sa, self.ma, self.class(Polarity::Neutral), self.class(Polarity::Negative), self.class(Polarity::Positive)]
    }
}

/// Per-aspect predictions for every sentence, in input order.
pub fn predict_all<T: Scalar>(
    model: &ModelParams<T>,
    opts: ForwardOptions,
    sentences: &[EncodedSentence],
) -> Result<Vec<Vec<Polarity>>, ModelError> {
    sentences
        .par_iter()
        .map(|s| Ok(predict_sentence(model, opts, s)?.iter().map(|p| argmax(p)).collect()))
        .collect()
}

pub fn evaluate<T: Scalar>(
    model: &ModelParams<T>,
    opts: ForwardOptions,
    sentences: &[EncodedSentence],
    domain: &str,
    variant: &str,
) -> Result<EvalReport, ModelError> {
    let predictions = predict_all(model, opts, sentences)?;
    report_from_predictions(sentences, &predictions, domain, variant)
}

pub fn report_from_predictions(
    sentences: &[EncodedSentence],
    predictions: &[Vec<Polarity>],
    domain: &str,
    variant: &str,
) -> Result<EvalReport, ModelError> {
    if predictions.len() != sentences.len() {
        return Err(ModelError::LengthMismatch { what: "prediction sentences", expected: sentences.len(), got: predictions.len() });
    }
    let mut report = EvalReport::new(domain, variant);
    for (s, preds) in sentences.iter().zip(predictions) {
        let gold = s.labels()?;
        if preds.len() != gold.len() {
            return Err(ModelError::LengthMismatch { what: "predictions", expected: gold.len(), got: preds.len() });
        }
        for (&g, &p) in gold.iter().zip(preds) {
            report.record(g, p, s.is_multi_aspect());
        }
    }
    Ok(report)
}

const HEADERS: [&str; 6] = ["Total", "SA", "MA", "Neu", "Neg", "Pos"];

fn percent(c: Cell) -> String {
    c.accuracy().map_or_else(|| "-".to_string(), |a| format!("{:.1}", a * 100.0))
}

/// Aligned text table: one row per report, percentages with one decimal,
/// `-` for empty buckets.
pub fn render_report(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<12} {:<10}", "Domain", "Variant");
    for h in HEADERS {
        let _ = write!(out, " {h:>6}");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:<12} {:<10}", r.domain, r.variant);
        for c in r.columns() {
            let _ = write!(out, " {:>6}", percent(c));
        }
        out.push('\n');
    }
    out
}

/// CSV mirror of [`render_report`] followed by the raw counts; empty buckets
/// leave their percentage field blank.
pub fn render_report_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("domain,variant,total,sa,ma,neu,neg,pos");
    for h in ["total", "sa", "ma", "neu", "neg", "pos"] {
        let _ = write!(out, ",{h}_correct,{h}_count");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{},{}", r.domain, r.variant);
        for c in r.columns() {
            let _ = write!(out, ",{}", c.accuracy().map_or_else(String::new, |a| format!("{:.1}", a * 100.0)));
        }
        for c in r.columns() {
            let _ = write!(out, ",{},{}", c.correct, c.count);
        }
        out.push('\n');
    }
    out
}
