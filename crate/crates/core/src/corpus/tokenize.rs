/// A lowercased token with its character span `[char_start, char_end)` in
/// the raw sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// Splits on whitespace and punctuation. Runs of alphanumeric characters form
/// one token; every other non-space character is a token of its own.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let flush = |current: &mut Option<(usize, String)>, end: usize, tokens: &mut Vec<Token>| {
        if let Some((start, word)) = current.take() {
            tokens.push(Token { text: word, char_start: start, char_end: end });
        }
    };
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_alphanumeric() {
            match &mut current {
                Some((_, word)) => word.extend(c.to_lowercase()),
                None => current = Some((i, c.to_lowercase().collect())),
            }
        } else {
            flush(&mut current, i, &mut tokens);
            if !c.is_whitespace() {
                tokens.push(Token { text: c.to_lowercase().collect(), char_start: i, char_end: i + 1 });
            }
        }
    }
    flush(&mut current, n, &mut tokens);
    tokens
}

/// Minimal contiguous token range `(start, len)` covering the character span
/// `[char_start, char_end)`. A token partially inside the span is included
/// whole. Returns `None` if no token overlaps the span.
pub fn align_span(tokens: &[Token], char_start: usize, char_end: usize) -> Option<(usize, usize)> {
    if char_end <= char_start {
        return None;
    }
    let first = tokens.iter().position(|t| t.char_end > char_start && t.char_start < char_end)?;
    let last = tokens.iter().rposition(|t| t.char_end > char_start && t.char_start < char_end)?;
    Some((first, last - first + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn splits_punctuation_and_lowercases() {
        let toks = tokenize("Great beer selection too, something like 50 beers.");
        assert_eq!(
            texts(&toks),
            ["great", "beer", "selection", "too", ",", "something", "like", "50", "beers", "."]
        );
        assert_eq!((toks[4].char_start, toks[4].char_end), (24, 25));
    }

    #[test]
    fn case_sentence_alignment() {
        let text = "Great beer selection too, something like 50 beers.";
        let toks = tokenize(text);
        let start = text.find("beer selection").unwrap();
        assert_eq!(align_span(&toks, start, start + "beer selection".len()), Some((1, 2)));
        let beers = text.find("beers").unwrap();
        assert_eq!(align_span(&toks, beers, beers + 5), Some((8, 1)));
    }

    #[test]
    fn sentence_initial_single_word() {
        let toks = tokenize("Service was good.");
        assert_eq!(align_span(&toks, 0, 7), Some((0, 1)));
    }

    #[test]
    fn apostrophes_and_hyphens_are_split() {
        assert_eq!(texts(&tokenize("I'm a dim-sum fan")), ["i", "'", "m", "a", "dim", "-", "sum", "fan"]);
    }

    #[test]
    fn non_ascii_offsets_are_characters() {
        let text = "La crème brûlée was fine";
        let toks = tokenize(text);
        assert_eq!(texts(&toks), ["la", "crème", "brûlée", "was", "fine"]);
        // chars 3..15 is "crème brûlée"
        let chars: Vec<char> = text.chars().collect();
        assert_eq!(chars[3..15].iter().collect::<String>(), "crème brûlée");
        assert_eq!(align_span(&toks, 3, 15), Some((1, 2)));
    }

    #[test]
    fn span_in_whitespace_covers_nothing() {
        let toks = tokenize("a  b");
        assert_eq!(align_span(&toks, 1, 3), None);
        assert_eq!(align_span(&toks, 2, 2), None);
    }

    /// Brute force: among all (start, len) ranges whose characters cover the
    /// overlapping part of the span, pick the shortest, ties to the left.
    fn brute_force(tokens: &[Token], cs: usize, ce: usize) -> Option<(usize, usize)> {
        let overlaps = |t: &Token| t.char_end > cs && t.char_start < ce;
        let needed: Vec<usize> = (0..tokens.len()).filter(|&i| overlaps(&tokens[i])).collect();
        if needed.is_empty() {
            return None;
        }
        let mut best: Option<(usize, usize)> = None;
        for start in 0..tokens.len() {
            for len in 1..=tokens.len() - start {
                let covers = needed.iter().all(|&i| i >= start && i < start + len);
                if covers && best.is_none_or(|(_, l)| len < l) {
                    best = Some((start, len));
                }
            }
        }
        best
    }

    #[test]
    fn minimal_cover_matches_enumeration() {
        let text = "ab cd, efg hi jk";
        let toks = tokenize(text);
        assert_eq!(toks.len(), 6);
        let n = text.chars().count();
        for cs in 0..n {
            for ce in cs + 1..=n {
                assert_eq!(align_span(&toks, cs, ce), brute_force(&toks, cs, ce), "span {cs}..{ce}");
            }
        }
        // ends mid-token: "ab c" extends to the whole "cd"
        assert_eq!(align_span(&toks, 0, 4), Some((0, 2)));
    }
}
