//! Skeleton attention and the two question representations.
//!
//! Each question word gets a raw score `ω_m = q_mᵀ W_s s̄`, where `s̄` is
//! the answer-averaged embedding (per-answer mean, then mean over
//! answers). Words whose softmax-normalized score is at least uniform form
//! the skeleton set; `u` is the ω-weighted mean of their hidden states and
//! `v` is an attention pool over all words keyed by `u`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{softmax, Axis, Graph, Var};
use crate::corpus::IndexedSample;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct SkeletonWeights {
    /// Raw scores `ω`, `1 × M`.
    pub raw: Var,
    /// Softmax of the raw scores over question words.
    pub normalized: Vec<f64>,
    /// Skeleton membership per word.
    pub members: Vec<bool>,
}

/// Mean over answers of each answer's mean embedding (`emb_dim × 1`).
pub fn answer_centroid(g: &mut Graph<'_>, answers: &[Var]) -> Result<Var> {
    let Some((&first, rest)) = answers.split_first() else {
        return Err(Error::Config("skeleton attention needs at least one answer".into()));
    };
    let mut total = g.mean_cols(first);
    for &a in rest {
        let m = g.mean_cols(a);
        total = g.add(total, m)?;
    }
    Ok(g.scale(total, 1.0 / answers.len() as f64))
}

/// Skeleton scores from question embeddings (`emb_dim × M`) and the
/// embeddings of the question's answers.
pub fn skeleton_scores(
    g: &mut Graph<'_>,
    question: Var,
    answers: &[Var],
    w_s: Var,
) -> Result<SkeletonWeights> {
    let centroid = answer_centroid(g, answers)?;
    skeleton_scores_from_centroid(g, question, centroid, w_s)
}

pub fn skeleton_scores_from_centroid(
    g: &mut Graph<'_>,
    question: Var,
    centroid: Var,
    w_s: Var,
) -> Result<SkeletonWeights> {
    let projected = g.matmul(w_s, centroid)?;
    let qt = g.transpose(question);
    let scores = g.matmul(qt, projected)?;
    let raw = g.transpose(scores);
    let normalized = softmax(g.value(raw), Axis::Col).into_vec();
    let uniform = 1.0 / normalized.len() as f64;
    let mut members: Vec<bool> = normalized.iter().map(|&p| p >= uniform).collect();
    if !members.iter().any(|&m| m) {
        let best = normalized
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > normalized[best] { i } else { best });
        members[best] = true;
    }
    Ok(SkeletonWeights { raw, normalized, members })
}

/// `u = Σ_{m∈Sk} ω_m h_m / Σ_{m∈Sk} ω_m`. A single skeleton word returns
/// its hidden state as is; a vanishing denominator falls back to a
/// uniform average over the skeleton set.
pub fn skeleton_repr(g: &mut Graph<'_>, hidden: Var, weights: &SkeletonWeights) -> Result<Var> {
    let m = g.shape(hidden).1;
    if weights.members.len() != m {
        return Err(Error::Shape {
            op: "skeleton_repr",
            left: g.shape(hidden),
            right: (1, weights.members.len()),
        });
    }
    let members: Vec<usize> = (0..m).filter(|&i| weights.members[i]).collect();
    if let [only] = members[..] {
        return g.slice_cols(hidden, only, only + 1);
    }
    let mask: Vec<f64> = weights.members.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let raw = g.value(weights.raw).data();
    let denom: f64 = members.iter().map(|&i| raw[i]).sum();
    if denom.abs() < 1e-12 {
        let k = members.len() as f64;
        let w = g.constant(Tensor::column(&mask.iter().map(|x| x / k).collect::<Vec<_>>()));
        return g.matmul(hidden, w);
    }
    let mask = g.constant(Tensor::row(&mask));
    let masked = g.mul(weights.raw, mask)?;
    let col = g.transpose(masked);
    let num = g.matmul(hidden, col)?;
    let den = g.sum(masked);
    g.div(num, den)
}

/// `a_m = h_mᵀ W_a u`, `att = softmax(a)`, `v = Σ att_m h_m`.
/// Returns `(v, att)` with `att` as an `M × 1` column.
pub fn full_repr(g: &mut Graph<'_>, hidden: Var, u: Var, w_a: Var) -> Result<(Var, Var)> {
    let key = g.matmul(w_a, u)?;
    let ht = g.transpose(hidden);
    let scores = g.matmul(ht, key)?;
    let att = g.softmax(scores, Axis::Row)?;
    let v = g.matmul(hidden, att)?;
    Ok((v, att))
}

/// Sparse weights over vocabulary indices whose weighted embedding sum is
/// the answer centroid.
pub type AnswerBag = Vec<(usize, f64)>;

/// Per-answer token mean, then mean over answers, merged by index.
pub fn answer_bag<'s>(answers: impl IntoIterator<Item = &'s [usize]>) -> AnswerBag {
    let answers: Vec<&[usize]> = answers.into_iter().filter(|a| !a.is_empty()).collect();
    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    let j = answers.len() as f64;
    for a in &answers {
        let n = a.len() as f64;
        for &tok in *a {
            *merged.entry(tok).or_insert(0.0) += 1.0 / (n * j);
        }
    }
    merged.into_iter().collect()
}

/// Answer bags per question, built from training samples only. Questions
/// not in the cache (unseen at training time) use the single answer at hand.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SkeletonCache {
    bags: BTreeMap<String, AnswerBag>,
}

impl SkeletonCache {
    pub fn build(train: &[IndexedSample]) -> Self {
        let mut answers: BTreeMap<&str, BTreeMap<&str, &[usize]>> = BTreeMap::new();
        for s in train {
            answers
                .entry(&s.question_key)
                .or_default()
                .entry(&s.answer_id)
                .or_insert(&s.answer);
        }
        let bags = answers
            .into_iter()
            .map(|(key, by_id)| (key.to_string(), answer_bag(by_id.into_values())))
            .collect();
        SkeletonCache { bags }
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn contains(&self, question_key: &str) -> bool {
        self.bags.contains_key(question_key)
    }

    pub fn bag_for(&self, sample: &IndexedSample) -> AnswerBag {
        self.bags
            .get(&sample.question_key)
            .cloned()
            .unwrap_or_else(|| answer_bag([sample.answer.as_slice()]))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn basis(n: usize, i: usize) -> Vec<f64> {
        (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
    }

    fn cols(columns: &[Vec<f64>]) -> Tensor {
        let refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
        Tensor::from_rows(&refs).transpose()
    }

    #[test]
    fn identity_similarity_by_hand() {
        let mut g = Graph::new(0);
        let q = g.constant(cols(&[basis(2, 0), basis(2, 1)]));
        let a = g.constant(cols(&[basis(2, 0), basis(2, 0)]));
        let w = g.constant(Tensor::identity(2));
        let sk = skeleton_scores(&mut g, q, &[a], w).unwrap();
        assert_eq!(g.value(sk.raw).data(), &[1.0, 0.0]);
        assert_eq!(sk.members, vec![true, false]);
    }

    #[test]
    fn zero_similarity_is_uniform() {
        let mut g = Graph::new(0);
        let q = g.constant(cols(&[basis(3, 0), basis(3, 1), basis(3, 2)]));
        let a = g.constant(cols(&[basis(3, 1)]));
        let w = g.constant(Tensor::zeros(3, 3));
        let sk = skeleton_scores(&mut g, q, &[a], w).unwrap();
        assert!(g.value(sk.raw).data().iter().all(|&x| x == 0.0));
        assert!(sk.normalized.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!(sk.members.iter().all(|&m| m));
    }

    #[test]
    fn duplicating_the_answer_set_keeps_scores() {
        let mut g = Graph::new(0);
        let q = g.constant(cols(&[vec![0.3, -0.2], vec![1.0, 0.5]]));
        let a1 = g.constant(cols(&[vec![0.1, 0.4], vec![-0.3, 0.2], vec![0.0, 1.0]]));
        let a2 = g.constant(cols(&[vec![0.7, 0.1]]));
        let w = g.constant(Tensor::from_rows(&[&[0.5, -1.0], &[2.0, 0.25]]));
        let once = skeleton_scores(&mut g, q, &[a1, a2], w).unwrap();
        let twice = skeleton_scores(&mut g, q, &[a1, a2, a1, a2], w).unwrap();
        let (x, y) = (g.value(once.raw).data(), g.value(twice.raw).data());
        for (a, b) in x.iter().zip(y) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_answer_set_errors() {
        let mut g = Graph::new(0);
        let q = g.constant(Tensor::zeros(2, 2));
        let w = g.constant(Tensor::identity(2));
        assert!(skeleton_scores(&mut g, q, &[], w).is_err());
    }

    fn weights(g: &mut Graph<'_>, raw: &[f64], members: &[bool]) -> SkeletonWeights {
        let r = g.constant(Tensor::row(raw));
        SkeletonWeights {
            raw: r,
            normalized: softmax(&Tensor::row(raw), Axis::Col).into_vec(),
            members: members.to_vec(),
        }
    }

    #[test]
    fn skeleton_repr_cases() {
        let mut g = Graph::new(0);
        let h = g.constant(cols(&[vec![1.0, 2.0], vec![3.0, -4.0], vec![0.1, 0.7]]));

        let single = weights(&mut g, &[0.3, 0.9, -0.1], &[false, true, false]);
        let u = skeleton_repr(&mut g, h, &single).unwrap();
        assert_eq!(g.value(u).data(), &[3.0, -4.0]);

        let equal = weights(&mut g, &[0.5, 0.5, -0.1], &[true, true, false]);
        let u = skeleton_repr(&mut g, h, &equal).unwrap();
        assert_eq!(g.value(u).data(), &[2.0, -1.0]);

        let two_one = weights(&mut g, &[2.0, 1.0, -3.0], &[true, true, false]);
        let u = skeleton_repr(&mut g, h, &two_one).unwrap();
        let expect = [(2.0 * 1.0 + 3.0) / 3.0, (2.0 * 2.0 - 4.0) / 3.0];
        for (a, b) in g.value(u).data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }

        let zeros = weights(&mut g, &[0.0, 0.0, 0.0], &[true, true, true]);
        let u = skeleton_repr(&mut g, h, &zeros).unwrap();
        let mean = [(1.0 + 3.0 + 0.1) / 3.0, (2.0 - 4.0 + 0.7) / 3.0];
        for (a, b) in g.value(u).data().iter().zip(mean) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn full_repr_cases() {
        let mut g = Graph::new(0);
        let h = g.constant(cols(&[vec![1.0, 2.0], vec![3.0, -4.0]]));
        let u = g.constant(Tensor::column(&[0.2, 0.1]));
        let zero = g.constant(Tensor::zeros(2, 2));
        let (v, att) = full_repr(&mut g, h, u, zero).unwrap();
        assert_eq!(g.value(att).data(), &[0.5, 0.5]);
        assert_eq!(g.value(v).data(), &[2.0, -1.0]);

        let one = g.constant(Tensor::column(&[0.4, -0.9]));
        let w = g.constant(Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let (v, att) = full_repr(&mut g, one, u, w).unwrap();
        assert_eq!(g.value(att).data(), &[1.0]);
        assert_eq!(g.value(v).data(), &[0.4, -0.9]);

        let same = g.constant(cols(&vec![vec![0.25, -0.5]; 4]));
        let (v, _) = full_repr(&mut g, same, u, w).unwrap();
        for (a, b) in g.value(v).data().iter().zip([0.25, -0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn answer_bag_matches_centroid() {
        let answers: [&[usize]; 2] = [&[1, 2, 2], &[3]];
        let bag = answer_bag(answers);
        let expect = [(1, 1.0 / 6.0), (2, 2.0 / 6.0), (3, 0.5)];
        for ((i, w), (j, x)) in bag.iter().zip(expect) {
            assert_eq!(*i, j);
            assert!((w - x).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn u_invariant_to_positive_scaling(
            raw in prop::collection::vec(0.1f64..3.0, 2..6),
            scale in 0.1f64..10.0,
            seed in 0u64..1000,
        ) {
            let m = raw.len();
            let hidden: Vec<Vec<f64>> = (0..m)
                .map(|i| vec![((seed + i as u64) as f64).sin(), ((seed * 3 + i as u64) as f64).cos()])
                .collect();
            let members = vec![true; m];
            let mut g = Graph::new(0);
            let h = g.constant(cols(&hidden));
            let w1 = weights(&mut g, &raw, &members);
            let scaled: Vec<f64> = raw.iter().map(|x| x * scale).collect();
            let w2 = weights(&mut g, &scaled, &members);
            let u1 = skeleton_repr(&mut g, h, &w1).unwrap();
            let u2 = skeleton_repr(&mut g, h, &w2).unwrap();
            for (a, b) in g.value(u1).data().iter().zip(g.value(u2).data()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn v_in_convex_hull(
            entries in prop::collection::vec(-2.0f64..2.0, 12),
            key in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            let hidden: Vec<Vec<f64>> = entries.chunks(3).map(|c| c.to_vec()).collect();
            let mut g = Graph::new(0);
            let h = g.constant(cols(&hidden));
            let u = g.constant(Tensor::column(&key));
            let w = g.constant(Tensor::identity(3));
            let (v, att) = full_repr(&mut g, h, u, w).unwrap();
            prop_assert!((g.value(att).sum() - 1.0).abs() < 1e-9);
            for r in 0..3 {
                let lo = hidden.iter().map(|c| c[r]).fold(f64::INFINITY, f64::min);
                let hi = hidden.iter().map(|c| c[r]).fold(f64::NEG_INFINITY, f64::max);
                let x = g.value(v).get(r, 0);
                prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
            }
        }
    }
}
