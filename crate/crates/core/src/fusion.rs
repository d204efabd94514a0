//! Multi-hop fusion of question state with augmented answer states, and
//! the three-way classifier on top.
//!
//! One hop: `m_n = W_m tanh(W_h h'_n + W_x F + b)`, `a = softmax(m)`,
//! `x' = Σ a_n h'_n`, `F ← tanh(W_f1 x' + b_f) + W_f2 F`. The full stack
//! starts from `v`, the skeleton stack from `u`; both run `T` hops with
//! separate weights and the results are concatenated.

use rand::Rng;

use crate::autodiff::{softmax, Axis, Graph, Var};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::params::{glorot, Forward, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Parameter ids of one hop.
#[derive(Clone, Copy, Debug)]
pub struct HopIds {
    pub w_m: ParamId,
    pub w_h: ParamId,
    pub w_x: ParamId,
    pub b: ParamId,
    pub w_f1: ParamId,
    pub w_f2: ParamId,
    pub b_f: ParamId,
}

/// A hop's parameters bound into a graph.
#[derive(Clone, Copy, Debug)]
pub struct HopVars {
    pub w_m: Var,
    pub w_h: Var,
    pub w_x: Var,
    pub b: Var,
    pub w_f1: Var,
    pub w_f2: Var,
    pub b_f: Var,
}

impl HopIds {
    /// `d`: state width, `input`: width of `h'` (d + N_e, or d without
    /// relevance), `r`: projection width.
    pub fn register(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        prefix: &str,
        d: usize,
        input: usize,
        r: usize,
    ) -> Self {
        let mut add = |name: &str, t: Tensor| store.add(format!("{prefix}.{name}"), t, true);
        HopIds {
            w_m: add("w_m", glorot(rng, 1, r)),
            w_h: add("w_h", glorot(rng, r, input)),
            w_x: add("w_x", glorot(rng, r, d)),
            b: add("b", Tensor::zeros(r, 1)),
            w_f1: add("w_f1", glorot(rng, d, input)),
            w_f2: add("w_f2", glorot(rng, d, d)),
            b_f: add("b_f", Tensor::zeros(d, 1)),
        }
    }

    pub fn bind(&self, f: &mut Forward<'_>) -> HopVars {
        HopVars {
            w_m: f.param(self.w_m),
            w_h: f.param(self.w_h),
            w_x: f.param(self.w_x),
            b: f.param(self.b),
            w_f1: f.param(self.w_f1),
            w_f2: f.param(self.w_f2),
            b_f: f.param(self.b_f),
        }
    }

    /// Scalar count of one hop.
    pub fn count(d: usize, input: usize, r: usize) -> usize {
        r + r * input + r * d + r + d * input + d * d + d
    }
}

/// One hop. Returns the next state and the attention over answer
/// positions as a `1 × N` row.
pub fn hop(g: &mut Graph<'_>, prev: Var, states: Var, p: &HopVars) -> Result<(Var, Var)> {
    let n = g.shape(states).1;
    if n == 0 {
        return Err(Error::Shape { op: "hop", left: g.shape(states), right: g.shape(prev) });
    }
    let proj = g.matmul(p.w_h, states)?;
    let query = g.matmul(p.w_x, prev)?;
    let query = g.add(query, p.b)?;
    let pre = g.add(proj, query)?;
    let act = g.tanh(pre)?;
    let m = g.matmul(p.w_m, act)?;
    let a = g.softmax(m, Axis::Col)?;
    let at = g.transpose(a);
    let x = g.matmul(states, at)?;
    let z = g.matmul(p.w_f1, x)?;
    let z = g.add(z, p.b_f)?;
    let z = g.tanh(z)?;
    let skip = g.matmul(p.w_f2, prev)?;
    Ok((g.add(z, skip)?, a))
}

/// Output of [`fuse`]: `[F(T); S(T)]` plus the per-hop attentions of each
/// stack.
#[derive(Clone, Debug)]
pub struct Fused {
    pub output: Var,
    pub full_attention: Vec<Var>,
    pub skeleton_attention: Vec<Var>,
}

/// Runs the full stack from `v` and the skeleton stack from `u` over
/// `states`. Empty hop lists give `[v; u]`.
pub fn fuse(
    g: &mut Graph<'_>,
    v: Var,
    u: Var,
    states: Var,
    full: &[HopVars],
    skeleton: &[HopVars],
) -> Result<Fused> {
    if full.len() != skeleton.len() {
        return Err(Error::Config(format!(
            "fusion stacks differ in depth: {} vs {}",
            full.len(),
            skeleton.len()
        )));
    }
    let (mut f, mut s) = (v, u);
    let mut full_attention = Vec::with_capacity(full.len());
    let mut skeleton_attention = Vec::with_capacity(full.len());
    for (pf, ps) in full.iter().zip(skeleton) {
        let (next, a) = hop(g, f, states, pf)?;
        f = next;
        full_attention.push(a);
        let (next, a) = hop(g, s, states, ps)?;
        s = next;
        skeleton_attention.push(a);
    }
    let output = g.concat(f, s, Axis::Row)?;
    Ok(Fused { output, full_attention, skeleton_attention })
}

/// Final linear layer; returns the `3 × 1` logits. Probabilities are their
/// softmax.
pub fn classify_logits(g: &mut Graph<'_>, input: Var, w: Var, b: Var) -> Result<Var> {
    let z = g.matmul(w, input)?;
    g.add(z, b)
}

/// `softmax(W·x + b)`.
pub fn classify(g: &mut Graph<'_>, input: Var, w: Var, b: Var) -> Result<Var> {
    let z = classify_logits(g, input, w, b)?;
    g.softmax(z, Axis::Row)
}

/// Negative log-likelihood of the gold label through log-softmax.
pub fn loss(g: &mut Graph<'_>, logits: Var, gold: Label) -> Result<Var> {
    g.cross_entropy(logits, gold.index())
}

/// `-ln p[gold]` for an already normalized probability vector.
pub fn loss_from_probs(probs: &[f64], gold: Label) -> f64 {
    -probs[gold.index()].ln()
}

/// Argmax; ties go to the earliest label in true < false < uncertain.
pub fn predicted_label(probs: &[f64]) -> Label {
    let best = probs
        .iter()
        .enumerate()
        .fold(0, |best, (i, &p)| if p > probs[best] { i } else { best });
    Label::from_index(best).expect("three classes")
}

/// Probabilities from logits outside a graph.
pub fn probabilities(logits: &Tensor) -> Vec<f64> {
    softmax(logits, Axis::Row).into_vec()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn zero_hop(g: &mut Graph<'_>, d: usize, input: usize, r: usize) -> HopVars {
        let mut z = |rows, cols| g.constant(Tensor::zeros(rows, cols));
        HopVars {
            w_m: z(1, r),
            w_h: z(r, input),
            w_x: z(r, d),
            b: z(r, 1),
            w_f1: z(d, input),
            w_f2: z(d, d),
            b_f: z(d, 1),
        }
    }

    #[test]
    fn zero_weights_pool_uniformly() {
        let mut g = Graph::new(0);
        let states = g.constant(Tensor::from_rows(&[&[1.0, 3.0], &[2.0, -2.0]]));
        let prev = g.constant(Tensor::column(&[0.5, 0.5]));
        let p = zero_hop(&mut g, 2, 2, 3);
        let (next, a) = hop(&mut g, prev, states, &p).unwrap();
        assert_eq!(g.value(a).data(), &[0.5, 0.5]);
        assert_eq!(g.value(next).data(), &[0.0, 0.0]);
    }

    #[test]
    fn single_word_answer_attends_fully() {
        let mut g = Graph::new(0);
        let states = g.constant(Tensor::column(&[0.3, -0.7]));
        let prev = g.constant(Tensor::column(&[0.5, 0.5]));
        let mut p = zero_hop(&mut g, 2, 2, 3);
        p.w_f1 = g.constant(Tensor::identity(2));
        let (next, a) = hop(&mut g, prev, states, &p).unwrap();
        assert_eq!(g.value(a).data(), &[1.0]);
        assert_eq!(g.value(next).data(), &[0.3f64.tanh(), (-0.7f64).tanh()]);
    }

    #[test]
    fn identity_skip_path() {
        let mut g = Graph::new(0);
        let states = g.constant(Tensor::from_rows(&[&[1.0, 3.0, 0.0], &[2.0, -2.0, 1.0]]));
        let prev = g.constant(Tensor::column(&[0.25, -1.5]));
        let mut p = zero_hop(&mut g, 2, 2, 3);
        p.w_f2 = g.constant(Tensor::identity(2));
        p.w_h = g.constant(Tensor::filled(3, 2, 0.4));
        p.w_m = g.constant(Tensor::row(&[1.0, -2.0, 0.5]));
        let (next, _) = hop(&mut g, prev, states, &p).unwrap();
        assert_eq!(g.value(next).data(), &[0.25, -1.5]);
    }

    #[test]
    fn zero_hops_concatenate_inputs() {
        let mut g = Graph::new(0);
        let v = g.constant(Tensor::column(&[1.0, 2.0]));
        let u = g.constant(Tensor::column(&[3.0, 4.0]));
        let states = g.constant(Tensor::zeros(2, 3));
        let out = fuse(&mut g, v, u, states, &[], &[]).unwrap();
        assert_eq!(g.value(out.output).data(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(out.full_attention.is_empty());
    }

    #[test]
    fn classifier_examples() {
        let mut g = Graph::new(0);
        let x = g.constant(Tensor::column(&[0.3, -0.1, 2.0, 0.5]));
        let w = g.constant(Tensor::zeros(3, 4));
        let b = g.constant(Tensor::zeros(3, 1));
        let p = classify(&mut g, x, w, b).unwrap();
        assert!(g.value(p).data().iter().all(|&q| (q - 1.0 / 3.0).abs() < 1e-15));

        let b = g.constant(Tensor::column(&[10.0, 0.0, 0.0]));
        let p = classify(&mut g, x, w, b).unwrap();
        assert!(g.value(p).data()[0] > 0.9999);
    }

    #[test]
    fn loss_examples() {
        let ln3 = loss_from_probs(&[1.0 / 3.0; 3], Label::False);
        assert!((ln3 - 3f64.ln()).abs() < 1e-12);
        assert_eq!(loss_from_probs(&[1.0, 0.0, 0.0], Label::True), 0.0);
        assert!((loss_from_probs(&[0.25, 0.5, 0.25], Label::False) - 2f64.ln()).abs() < 1e-15);

        let mut g = Graph::new(0);
        let z = g.constant(Tensor::column(&[0.7, 0.7, 0.7]));
        let l = loss(&mut g, z, Label::Uncertain).unwrap();
        assert!((g.value(l).item() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_follow_label_order() {
        assert_eq!(predicted_label(&[0.4, 0.4, 0.2]), Label::True);
        assert_eq!(predicted_label(&[0.2, 0.4, 0.4]), Label::False);
        assert_eq!(predicted_label(&[0.1, 0.2, 0.7]), Label::Uncertain);
    }

    #[test]
    fn parameter_count_matches_shapes() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (d, input, r) = (8, 11, 6);
        HopIds::register(&mut store, &mut rng, "h", d, input, r);
        assert_eq!(store.trainable_count(), HopIds::count(d, input, r));
        assert_eq!(HopIds::count(d, input, r), 6 + 66 + 48 + 6 + 88 + 64 + 8);
    }

    proptest! {
        #[test]
        fn hop_attention_is_a_distribution(seed in 0u64..500, n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = ParamStore::new();
            let ids = HopIds::register(&mut store, &mut rng, "h", 3, 5, 4);
            let states = crate::params::uniform(&mut rng, 5, n, 2.0);
            let prev = crate::params::uniform(&mut rng, 3, 1, 2.0);
            let mut f = Forward::new(&store, 0);
            let p = ids.bind(&mut f);
            let s = f.g.constant(states.clone());
            let pv = f.g.constant(prev);
            let (_, a) = hop(&mut f.g, pv, s, &p).unwrap();
            prop_assert!((f.g.value(a).sum() - 1.0).abs() < 1e-9);
            // x' is a convex combination of the states
            let at = f.g.transpose(a);
            let x = f.g.matmul(s, at).unwrap();
            for r in 0..5 {
                let row: Vec<f64> = (0..n).map(|c| states.get(r, c)).collect();
                let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let v = f.g.value(x).get(r, 0);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
