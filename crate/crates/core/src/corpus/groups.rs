use super::{Polarity, SentenceRecord};

/// One prediction instance: a target aspect and its neighbors in textual
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AspectGroup<'a> {
    pub sentence: &'a SentenceRecord,
    pub target_index: usize,
}

impl<'a> AspectGroup<'a> {
    pub fn neighbor_indices(&self) -> impl Iterator<Item = usize> + 'a {
        let t = self.target_index;
        (0..self.sentence.aspects.len()).filter(move |&i| i != t)
    }

    /// Number of neighbors `m`.
    pub fn num_neighbors(&self) -> usize {
        self.sentence.aspects.len() - 1
    }

    pub fn target_label(&self) -> Polarity {
        self.sentence.aspects[self.target_index].polarity
    }

    pub fn neighbor_labels(&self) -> Vec<Polarity> {
        self.neighbor_indices().map(|i| self.sentence.aspects[i].polarity).collect()
    }

    pub fn is_multi_aspect(&self) -> bool {
        self.sentence.is_multi_aspect()
    }
}

/// One group per aspect occurrence.
pub fn make_aspect_groups(records: &[SentenceRecord]) -> Vec<AspectGroup<'_>> {
    records
        .iter()
        .flat_map(|s| (0..s.aspects.len()).map(move |t| AspectGroup { sentence: s, target_index: t }))
        .collect()
}
