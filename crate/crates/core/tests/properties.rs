//! Invariants as property tests.

mod common;

use std::path::Path;

use common::*;
use distill_core::data::{Batch, Vocabulary};
use distill_core::distill::{
    cross_entropy_soft, ensemble, ClassDistribution, Classifier, Provenance, StudentConfig, StudentModel,
    TeacherConfig, TeacherModel,
};
use distill_core::nn::{dropout, Checkpoint, EmbeddingTable, Mode};
use distill_core::tensor::{Eval, Graph, Tensor};
use distill_core::train::{rng_for, TeacherCache};
use proptest::prelude::*;
use rand::Rng;

fn models(seed: u64, vocab: usize) -> (TeacherModel, StudentModel) {
    let emb = EmbeddingTable::random(vocab, 6, 0, &mut rng_for(seed, 4)).unwrap();
    let t = TeacherModel::new(
        &TeacherConfig {
            embedding_dim: 6,
            hidden: 5,
            ..Default::default()
        },
        emb.clone(),
        4,
        &mut rng_for(seed, 0),
    )
    .unwrap();
    let s = StudentModel::new(
        &StudentConfig {
            embedding_dim: 6,
            filter_count: 4,
            ..Default::default()
        },
        emb,
        4,
        &mut rng_for(seed, 1),
    )
    .unwrap();
    (t, s)
}

fn rows(seed: u64, vocab: usize, n: usize) -> Vec<Vec<usize>> {
    let r = &mut rng_for(seed, 8);
    (0..n)
        .map(|_| (0..r.gen_range(1..12)).map(|_| r.gen_range(1..vocab)).collect())
        .collect()
}

fn prob_bits(d: &[ClassDistribution]) -> Vec<Vec<u64>> {
    d.iter().map(|d| d.probs().iter().map(|p| p.to_bits()).collect()).collect()
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..1.0, k).prop_filter_map("nonzero mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn padding_never_changes_predictions(seed in any::<u64>(), extra in 1usize..20) {
        let (t, s) = models(seed, 30);
        let b = Batch::from_rows(&rows(seed, 30, 4), &[0; 4], s.min_len());
        let wide = b.padded_to(b.max_len + extra);
        prop_assert_eq!(prob_bits(&t.predict(&b).unwrap()), prob_bits(&t.predict(&wide).unwrap()));
        prop_assert_eq!(prob_bits(&s.predict(&b).unwrap()), prob_bits(&s.predict(&wide).unwrap()));
    }

    #[test]
    fn batch_neighbours_never_change_predictions(seed in any::<u64>()) {
        let (t, s) = models(seed, 30);
        let rs = rows(seed, 30, 5);
        let joint = Batch::from_rows(&rs, &[0; 5], s.min_len());
        let (tj, sj) = (t.predict(&joint).unwrap(), s.predict(&joint).unwrap());
        for (i, r) in rs.iter().enumerate() {
            let alone = Batch::from_rows(std::slice::from_ref(r), &[0], s.min_len());
            prop_assert_eq!(prob_bits(&t.predict(&alone).unwrap()), prob_bits(&tj[i..=i]));
            prop_assert_eq!(prob_bits(&s.predict(&alone).unwrap()), prob_bits(&sj[i..=i]));
        }
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(seed in any::<u64>()) {
        let (t, s) = models(seed, 20);
        let text = t.to_checkpoint().render();
        let back = TeacherModel::from_checkpoint(Checkpoint::parse(&text, Path::new("t")).unwrap()).unwrap();
        prop_assert_eq!(back.to_checkpoint().render(), text);
        let text = s.to_checkpoint().render();
        let back = StudentModel::from_checkpoint(Checkpoint::parse(&text, Path::new("s")).unwrap()).unwrap();
        prop_assert_eq!(back.to_checkpoint().render(), text);
    }

    #[test]
    fn cache_round_trips(dists in proptest::collection::vec(simplex(3), 1..20)) {
        let mut c = TeacherCache::new("abc", 3);
        for (i, p) in dists.iter().enumerate() {
            c.insert(format!("train:{i}"), ClassDistribution::new(p.clone(), Provenance::Teacher).unwrap()).unwrap();
        }
        let text = c.render();
        let back = TeacherCache::parse(&text, Path::new("c")).unwrap();
        prop_assert_eq!(back.render(), text);
        for (i, p) in dists.iter().enumerate() {
            prop_assert_eq!(back.get(&format!("train:{i}")).unwrap().probs(), p.as_slice());
        }
    }

    #[test]
    fn softmax_is_a_distribution(z in proptest::collection::vec(-50.0f64..50.0, 1..10), shift in -100.0f64..100.0) {
        let k = z.len();
        let mut g = Eval;
        let a = g.constant(Tensor::new(vec![1, k], z.clone()).unwrap());
        let b = g.constant(Tensor::new(vec![1, k], z.iter().map(|x| x + shift).collect()).unwrap());
        let (pa, pb) = (g.softmax(&a).unwrap(), g.softmax(&b).unwrap());
        prop_assert!((pa.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pa.data().iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(pa.max_abs_diff(&pb) < 1e-12);
    }

    #[test]
    fn ensemble_stays_between_operands(t in simplex(5), s in simplex(5), gamma in 0.0f64..=1.0) {
        let td = ClassDistribution::new(t.clone(), Provenance::Teacher).unwrap();
        let sd = ClassDistribution::new(s.clone(), Provenance::Student).unwrap();
        let e = ensemble(&td, &sd, gamma).unwrap();
        prop_assert!((e.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for ((x, a), b) in e.probs().iter().zip(&t).zip(&s) {
            prop_assert!(*x >= a.min(*b) - 1e-15 && *x <= a.max(*b) + 1e-15);
        }
    }

    #[test]
    fn soft_cross_entropy_bounds_entropy(p in simplex(6), z in proptest::collection::vec(-10.0f64..10.0, 6)) {
        let d = ClassDistribution::new(p, Provenance::Teacher).unwrap();
        prop_assert!(cross_entropy_soft(&d, &z).unwrap() >= d.entropy() - 1e-12);
    }

    #[test]
    fn dropout_zeroes_or_scales(seed in any::<u64>(), rate in 0.0f64..0.9) {
        let x = Tensor::full(&[8, 8], 2.0);
        let mut g = Eval;
        let v = g.constant(x.clone());
        let mut rng = rng_for(seed, 3);
        let y = dropout(&mut g, &v, rate, &mut Mode::Train(&mut rng)).unwrap();
        let keep = 2.0 / (1.0 - rate);
        prop_assert!(y.data().iter().all(|&a| a == 0.0 || (a - keep).abs() < 1e-12));
        let e = dropout(&mut g, &v, rate, &mut Mode::Eval).unwrap();
        prop_assert_eq!(e.data(), x.data());
    }

    #[test]
    fn vocabulary_round_trips(words in proptest::collection::vec("[a-z]{1,6}", 1..30)) {
        let v = Vocabulary::build(std::iter::once(words.as_slice()), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v.save(&path).unwrap();
        let back = Vocabulary::load(&path).unwrap();
        prop_assert_eq!(back.tokens(), v.tokens());
        for w in &words {
            prop_assert_eq!(back.id(w), v.id(w));
            prop_assert!(v.contains(w));
        }
    }
}

#[test]
fn fresh_teacher_predictions_are_normalized() {
    let s = synth_setup(200, 1);
    let t = s.teacher(1);
    let b = Batch::from_examples(&s.splits.test.iter().collect::<Vec<_>>(), 1);
    for d in t.predict(&b).unwrap() {
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(d.provenance, Provenance::Teacher);
    }
}
