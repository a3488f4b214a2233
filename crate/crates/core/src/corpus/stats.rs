use std::fmt::Write;

use super::{Domain, Polarity, SentenceRecord, Split};

/// Aspect counts by class and single/multi-aspect sentence membership.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    /// `[class][0 = SA, 1 = MA]`, class in [`Polarity`] index order.
    pub cells: [[usize; 2]; 3],
}

impl ClassCounts {
    pub fn sa(&self, p: Polarity) -> usize {
        self.cells[p.index()][0]
    }

    pub fn ma(&self, p: Polarity) -> usize {
        self.cells[p.index()][1]
    }

    pub fn total(&self) -> usize {
        self.cells.iter().flatten().sum()
    }

    pub fn class_total(&self, p: Polarity) -> usize {
        self.sa(p) + self.ma(p)
    }

    /// Cells that differ from `expected`, in Positive/Negative/Neutral order.
    pub fn diff(&self, expected: &ClassCounts) -> Vec<CountMismatch> {
        let mut out = Vec::new();
        for p in [Polarity::Positive, Polarity::Negative, Polarity::Neutral] {
            for (k, scope) in ["SA", "MA"].into_iter().enumerate() {
                let (got, want) = (self.cells[p.index()][k], expected.cells[p.index()][k]);
                if got != want {
                    out.push(CountMismatch { polarity: p, scope, got, expected: want });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMismatch {
    pub polarity: Polarity,
    pub scope: &'static str,
    pub got: usize,
    pub expected: usize,
}

impl std::fmt::Display for CountMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let delta = self.got as i64 - self.expected as i64;
        write!(f, "{} {}: got {}, expected {} ({delta:+})", self.polarity, self.scope, self.got, self.expected)
    }
}

pub fn dataset_stats(records: &[SentenceRecord]) -> ClassCounts {
    let mut counts = ClassCounts::default();
    for r in records {
        let scope = usize::from(r.is_multi_aspect());
        for a in &r.aspects {
            counts.cells[a.polarity.index()][scope] += 1;
        }
    }
    counts
}

/// Published per-class SA/MA counts for the SemEval-2014 splits with
/// conflict aspects removed.
pub fn reference_counts(domain: Domain, split: Split) -> ClassCounts {
    // (positive, negative, neutral) x (SA, MA)
    let (pos, neg, neu) = match (domain, split) {
        (Domain::Laptop, Split::Train) => ([349, 638], [442, 424], [126, 334]),
        (Domain::Laptop, Split::Test) => ([137, 204], [69, 59], [53, 116]),
        (Domain::Restaurant, Split::Train) => ([609, 1555], [226, 579], [173, 460]),
        (Domain::Restaurant, Split::Test) => ([182, 546], [62, 134], [41, 155]),
    };
    let mut cells = [[0; 2]; 3];
    cells[Polarity::Positive.index()] = pos;
    cells[Polarity::Negative.index()] = neg;
    cells[Polarity::Neutral.index()] = neu;
    ClassCounts { cells }
}

const ORDER: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

/// Aligned plain-text table, one row per `(label, split, counts)` entry.
pub fn render_stats_table(rows: &[(String, Split, ClassCounts)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:<6} | {:>13} | {:>13} | {:>13}", "", "", "Positive", "Negative", "Neutral");
    let _ = writeln!(out, "{:<12} {:<6} | {:>6} {:>6} | {:>6} {:>6} | {:>6} {:>6}", "", "", "SA", "MA", "SA", "MA", "SA", "MA");
    for (label, split, c) in rows {
        let _ = write!(out, "{:<12} {:<6}", label, split.as_str());
        for p in ORDER {
            let _ = write!(out, " | {:>6} {:>6}", c.sa(p), c.ma(p));
        }
        out.push('\n');
    }
    out
}

/// CSV with header `class,split,sa,ma`.
pub fn render_stats_csv(rows: &[(Split, ClassCounts)]) -> String {
    let mut out = String::from("class,split,sa,ma\n");
    for (split, c) in rows {
        for p in ORDER {
            let _ = writeln!(out, "{},{},{},{}", p, split, c.sa(p), c.ma(p));
        }
    }
    out
}
