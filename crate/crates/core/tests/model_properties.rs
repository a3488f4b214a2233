mod common;

use miad_core::autodiff::{ParamStore, Tape};
use miad_core::corpus::Polarity;
use miad_core::evaluation::EvalReport;
use miad_core::inter_aspect::fuse;
use miad_core::model::{forward_variant, EncodedAspect, EncodedSentence, ModelParams, Variant};
use proptest::prelude::*;

const VOCAB: usize = 16;

fn target_probs(model: &ModelParams<f64>, v: Variant, s: &EncodedSentence, t: usize) -> Vec<f64> {
    let mut tape = Tape::new(&model.store);
    let out = forward_variant(&mut tape, model, v.into(), s, t).unwrap();
    tape.value(out.target).to_vec()
}

fn sentence_strategy() -> impl Strategy<Value = EncodedSentence> {
    (4usize..9)
        .prop_flat_map(|n| (prop::collection::vec(2..VOCAB, n), prop::collection::vec((0..n, 1usize..3, 0usize..3), 1..4)))
        .prop_map(|(words, spans)| {
            let n = words.len();
            let aspects = spans
                .into_iter()
                .map(|(s, l, y)| EncodedAspect { tok_start: s.min(n - 1), tok_len: l.min(n - s.min(n - 1)), label: Polarity::from_index(y) })
                .collect();
            EncodedSentence { words, aspects }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gru_ignores_other_aspects(s in sentence_strategy(), seed in 0u64..1000) {
        let model = common::toy_model(VOCAB, 5, 4, seed, 0.5);
        let alone = EncodedSentence { words: s.words.clone(), aspects: vec![s.aspects[0].clone()] };
        prop_assert_eq!(target_probs(&model, Variant::Gru, &s, 0), target_probs(&model, Variant::Gru, &alone, 0));
        prop_assert_eq!(target_probs(&model, Variant::GruFl, &s, 0), target_probs(&model, Variant::Gru, &alone, 0));
    }

    #[test]
    fn gated_without_neighbors_is_gru(s in sentence_strategy(), seed in 0u64..1000) {
        let model = common::toy_model(VOCAB, 5, 4, seed, 0.5);
        let alone = EncodedSentence { words: s.words.clone(), aspects: vec![s.aspects[0].clone()] };
        prop_assert_eq!(target_probs(&model, Variant::GruNoTm, &alone, 0), target_probs(&model, Variant::Gru, &alone, 0));
        prop_assert_eq!(target_probs(&model, Variant::Miad, &alone, 0), target_probs(&model, Variant::Gru, &alone, 0));
    }

    #[test]
    fn gated_fusion_ignores_neighbor_order(s in sentence_strategy(), seed in 0u64..1000) {
        prop_assume!(s.aspects.len() == 3);
        let model = common::toy_model(VOCAB, 5, 4, seed, 0.5);
        let mut swapped = s.clone();
        swapped.aspects.swap(1, 2);
        let a = target_probs(&model, Variant::GruNoTm, &s, 0);
        let b = target_probs(&model, Variant::GruNoTm, &swapped, 0);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fuse_is_permutation_equivariant(
        ct in prop::collection::vec(-1.0f64..1.0, 4),
        reps in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 2..5),
        logits in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 5),
        rot in 1usize..4,
    ) {
        let store = ParamStore::<f64>::new();
        let m = reps.len();
        let run = |order: &[usize]| {
            let mut t = Tape::new(&store);
            let c = t.input(vec![4], ct.clone());
            let ns: Vec<_> = order.iter().map(|&i| t.input(vec![4], reps[i].clone())).collect();
            let ls: Vec<_> = order.iter().map(|&i| t.input(vec![4], logits[i].clone())).collect();
            let g = miad_core::inter_aspect::normalize_gates(&mut t, &ls).unwrap();
            let f = fuse(&mut t, c, &ns, &g).unwrap();
            t.value(f).to_vec()
        };
        let base: Vec<usize> = (0..m).collect();
        let mut perm = base.clone();
        perm.rotate_left(rot % m);
        for (x, y) in run(&base).iter().zip(&run(&perm)) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_is_shift_invariant(x in prop::collection::vec(-5.0f64..5.0, 1..6), c in -50.0f64..50.0) {
        let store = ParamStore::<f64>::new();
        let mut t = Tape::new(&store);
        let a = t.input(vec![x.len()], x.clone());
        let b = t.input(vec![x.len()], x.iter().map(|v| v + c).collect());
        let (sa, sb) = (t.softmax(a).unwrap(), t.softmax(b).unwrap());
        for (p, q) in t.value(sa).iter().zip(t.value(sb)) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn max_pool_is_permutation_invariant(xs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..6), rot in 0usize..6) {
        let store = ParamStore::<f64>::new();
        let mut t = Tape::new(&store);
        let ids: Vec<_> = xs.iter().map(|x| t.input(vec![3], x.clone())).collect();
        let mut rotated = ids.clone();
        rotated.rotate_left(rot % ids.len());
        let (a, b) = (t.max_pool(&ids).unwrap(), t.max_pool(&rotated).unwrap());
        prop_assert_eq!(t.value(a), t.value(b));
    }

    #[test]
    fn report_invariants(rows in prop::collection::vec((0usize..3, 0usize..3, any::<bool>()), 0..60), seed in any::<u64>()) {
        let build = |rows: &[(usize, usize, bool)]| {
            let mut r = EvalReport::new("d", "v");
            for &(g, p, ma) in rows {
                r.record(Polarity::from_index(g).unwrap(), Polarity::from_index(p).unwrap(), ma);
            }
            r
        };
        let report = build(&rows);
        let total = report.total();
        prop_assert_eq!(total.count, rows.len());
        prop_assert_eq!(report.per_class.iter().map(|c| c.count).sum::<usize>(), total.count);
        prop_assert_eq!(report.per_class.iter().map(|c| c.correct).sum::<usize>(), total.correct);
        if let Some(acc) = total.accuracy() {
            let recombined: f64 = report.per_class.iter().filter_map(|c| c.accuracy().map(|a| a * c.count as f64)).sum::<f64>() / total.count as f64;
            prop_assert!((recombined - acc).abs() < 1e-12);
        }
        let mut shuffled = rows.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(build(&shuffled), report);
    }
}

#[test]
fn gated_target_reacts_to_neighbor_content() {
    let model = common::toy_model(VOCAB, 5, 4, 3, 0.5);
    let s = EncodedSentence {
        words: vec![2, 3, 4, 5, 6, 7],
        aspects: vec![
            EncodedAspect { tok_start: 0, tok_len: 1, label: Some(Polarity::Positive) },
            EncodedAspect { tok_start: 4, tok_len: 2, label: Some(Polarity::Negative) },
        ],
    };
    let mut moved = s.clone();
    moved.aspects[1].tok_start = 3;
    moved.aspects[1].tok_len = 1;
    assert_ne!(target_probs(&model, Variant::GruNoTm, &s, 0), target_probs(&model, Variant::GruNoTm, &moved, 0));
    // the temporal GRU only carries information forward in text order
    assert_eq!(target_probs(&model, Variant::GruTm, &s, 0), target_probs(&model, Variant::GruTm, &moved, 0));
    let mut early = s.clone();
    early.aspects[0].tok_len = 2;
    assert_ne!(target_probs(&model, Variant::GruTm, &s, 1), target_probs(&model, Variant::GruTm, &early, 1));
}
