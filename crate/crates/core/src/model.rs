//! Network assembly: hyperparameters, the variant registry, and the
//! per-sample forward pass for AntNet, its ablations and the two BiLSTM
//! baselines.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::answer::{augment, enlarge, relevance_scores};
use crate::autodiff::Var;
use crate::corpus::{IndexedSample, Label, Vocab, DEFAULT_MAX_LEN};
use crate::encoders::{encode_answer, encode_question, BiLstm, EmbeddingTable};
use crate::error::{Error, Result};
use crate::fusion::{classify_logits, fuse, predicted_label, probabilities, HopIds};
use crate::params::{glorot, Forward, Gradients, ParamId, ParamStore};
use crate::question::{full_repr, skeleton_repr, skeleton_scores_from_centroid, SkeletonCache};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub emb_dim: usize,
    /// BiLSTM output width `d` (both directions together).
    pub hidden_dim: usize,
    /// Enlargement length `N_e`.
    pub ne: usize,
    /// Hop count `T`.
    pub hops: usize,
    /// Hop projection width `r`; `None` means `d`.
    pub hop_width: Option<usize>,
    /// One hop's weights reused for every hop of a stack.
    pub share_hops: bool,
    pub max_len: usize,
    pub freeze_embeddings: bool,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            emb_dim: 256,
            hidden_dim: 256,
            ne: 13,
            hops: 3,
            hop_width: None,
            share_hops: false,
            max_len: DEFAULT_MAX_LEN,
            freeze_embeddings: true,
        }
    }
}

impl Hyper {
    pub fn hop_width(&self) -> usize {
        self.hop_width.unwrap_or(self.hidden_dim)
    }
}

/// Which network to build. AntNet flags say which components are kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VariantSpec {
    AntNet { sa: bool, rr: bool, mf: bool },
    BiLstmA,
    BiLstmQa,
}

impl VariantSpec {
    pub const FULL: VariantSpec = VariantSpec::AntNet { sa: true, rr: true, mf: true };

    /// The seven AntNet variants in ablation-table order.
    pub fn ablations() -> Vec<VariantSpec> {
        let v = |sa, rr, mf| VariantSpec::AntNet { sa, rr, mf };
        vec![
            v(true, true, true),
            v(false, true, true),
            v(true, false, true),
            v(true, true, false),
            v(false, false, true),
            v(false, true, false),
            v(true, false, false),
        ]
    }

    pub fn all() -> Vec<VariantSpec> {
        let mut all = Self::ablations();
        all.extend([VariantSpec::BiLstmA, VariantSpec::BiLstmQa]);
        all
    }

    pub fn name(self) -> String {
        match self {
            VariantSpec::AntNet { sa, rr, mf } => {
                let mut name = String::from("antnet");
                for (kept, tag) in [(sa, "-sa"), (rr, "-rr"), (mf, "-mf")] {
                    if !kept {
                        name.push_str(tag);
                    }
                }
                name
            }
            VariantSpec::BiLstmA => "bilstm-a".into(),
            VariantSpec::BiLstmQa => "bilstm-qa".into(),
        }
    }

    /// Rejects specs that contradict themselves or the hyperparameters.
    pub fn validate(self, hyper: &Hyper) -> Result<()> {
        if hyper.hidden_dim == 0 || hyper.emb_dim == 0 || hyper.max_len == 0 {
            return Err(Error::Config("dimensions and max length must be positive".into()));
        }
        if let VariantSpec::AntNet { sa, rr, mf } = self {
            if !sa && !rr && !mf {
                return Err(Error::Config(
                    "removing all three components leaves no AntNet; use a baseline".into(),
                ));
            }
            if mf && hyper.hops == 0 {
                return Err(Error::Config(format!(
                    "{} keeps multi-hop fusion but hops is 0",
                    self.name()
                )));
            }
            if rr && hyper.ne == 0 {
                return Err(Error::Config(format!(
                    "{} keeps relevance scoring but ne is 0",
                    self.name()
                )));
            }
            if hyper.hop_width() == 0 {
                return Err(Error::Config("hop width must be positive".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for VariantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for VariantSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "bilstm-a" => return Ok(VariantSpec::BiLstmA),
            "bilstm-qa" => return Ok(VariantSpec::BiLstmQa),
            _ => {}
        }
        let rest = lower
            .strip_prefix("antnet")
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))?;
        let (mut sa, mut rr, mut mf) = (true, true, true);
        for tag in rest.split('-').skip(1) {
            let flag = match tag {
                "sa" => &mut sa,
                "rr" => &mut rr,
                "mf" => &mut mf,
                _ => return Err(Error::Config(format!("unknown variant {s:?}"))),
            };
            if !*flag {
                return Err(Error::Config(format!("variant {s:?} removes {tag} twice")));
            }
            *flag = false;
        }
        if !rest.is_empty() && !rest.starts_with('-') {
            return Err(Error::Config(format!("unknown variant {s:?}")));
        }
        if !sa && !rr && !mf {
            return Err(Error::Config(format!(
                "variant {s:?} removes every component; use a baseline"
            )));
        }
        Ok(VariantSpec::AntNet { sa, rr, mf })
    }
}

impl Serialize for VariantSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for VariantSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where dropout is applied during training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub rate: f64,
    /// On BiLSTM outputs.
    pub encoder: bool,
    /// On the fused vector before the classifier.
    pub classifier: bool,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        Dropout { rate, encoder: true, classifier: true }
    }
}

#[derive(Clone, Debug)]
struct AntNetIds {
    emb: EmbeddingTable,
    question_lstm: BiLstm,
    answer_lstm: BiLstm,
    w_s: Option<ParamId>,
    w_a: ParamId,
    relevance: Option<(ParamId, ParamId)>,
    full_hops: Vec<HopIds>,
    skeleton_hops: Vec<HopIds>,
    cls_w: ParamId,
    cls_b: ParamId,
}

#[derive(Clone, Debug)]
struct BaselineIds {
    emb: EmbeddingTable,
    lstm: BiLstm,
    cls_w: ParamId,
    cls_b: ParamId,
}

#[derive(Clone, Debug)]
enum Arch {
    AntNet(AntNetIds),
    BiLstmA(BaselineIds),
    BiLstmQa(BaselineIds),
}

/// The parameter layout of one variant. Stateless with respect to
/// parameter values, which live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Network {
    pub hyper: Hyper,
    pub variant: VariantSpec,
    arch: Arch,
    /// Perturbs the backward pass of activations; a negative control for
    /// gradient checks.
    #[doc(hidden)]
    pub backward_fault: bool,
}

/// Graph nodes worth reading after a forward pass.
struct Nodes {
    logits: Var,
    skeleton: Option<(Vec<f64>, Vec<bool>)>,
    question_attention: Option<Var>,
    relevance: Option<Var>,
    full_hops: Vec<Var>,
    skeleton_hops: Vec<Var>,
}

/// Attention, relevance and hop weights for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inspection {
    pub question: Vec<String>,
    pub answer: Vec<String>,
    pub skeleton_scores: Option<Vec<f64>>,
    pub skeleton_members: Option<Vec<bool>>,
    pub question_attention: Option<Vec<f64>>,
    pub relevance: Option<Vec<f64>>,
    pub full_hop_attention: Vec<Vec<f64>>,
    pub skeleton_hop_attention: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub predicted: Label,
    pub gold: Label,
}

impl Network {
    /// Registers every parameter of `variant` into `store`, initialized
    /// from `seed`.
    pub fn build(
        hyper: Hyper,
        variant: VariantSpec,
        vocab_size: usize,
        store: &mut ParamStore,
        seed: u64,
    ) -> Result<Self> {
        variant.validate(&hyper)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = hyper.hidden_dim;
        let emb =
            EmbeddingTable::register(store, &mut rng, vocab_size, hyper.emb_dim, hyper.freeze_embeddings);
        let arch = match variant {
            VariantSpec::AntNet { sa, rr, mf } => {
                let question_lstm =
                    BiLstm::register(store, &mut rng, "question.lstm", hyper.emb_dim + 1, d)?;
                let answer_lstm = BiLstm::register(store, &mut rng, "answer.lstm", hyper.emb_dim, d)?;
                let w_s = sa.then(|| {
                    store.add("skeleton.w_s", glorot(&mut rng, hyper.emb_dim, hyper.emb_dim), true)
                });
                let w_a = store.add("question.w_a", glorot(&mut rng, d, d), true);
                let relevance = rr.then(|| {
                    let w = store.add("relevance.w_p", glorot(&mut rng, 1, 2 * d), true);
                    let b = store.add("relevance.b_p", Tensor::zeros(1, 1), true);
                    (w, b)
                });
                let hops = if mf { hyper.hops } else { 0 };
                let input = if rr { d + hyper.ne } else { d };
                let r = hyper.hop_width();
                let mut stack = |name: &str| -> Vec<HopIds> {
                    if hops == 0 {
                        return Vec::new();
                    }
                    if hyper.share_hops {
                        let id = HopIds::register(store, &mut rng, &format!("fusion.{name}"), d, input, r);
                        return vec![id; hops];
                    }
                    (0..hops)
                        .map(|t| {
                            HopIds::register(store, &mut rng, &format!("fusion.{name}.{t}"), d, input, r)
                        })
                        .collect()
                };
                let full_hops = stack("full");
                let skeleton_hops = stack("skeleton");
                let cls_w = store.add("classifier.w", glorot(&mut rng, 3, 2 * d), true);
                let cls_b = store.add("classifier.b", Tensor::zeros(3, 1), true);
                Arch::AntNet(AntNetIds {
                    emb,
                    question_lstm,
                    answer_lstm,
                    w_s,
                    w_a,
                    relevance,
                    full_hops,
                    skeleton_hops,
                    cls_w,
                    cls_b,
                })
            }
            VariantSpec::BiLstmA | VariantSpec::BiLstmQa => {
                let lstm = BiLstm::register(store, &mut rng, "encoder.lstm", hyper.emb_dim, d)?;
                let cls_w = store.add("classifier.w", glorot(&mut rng, 3, d), true);
                let cls_b = store.add("classifier.b", Tensor::zeros(3, 1), true);
                let ids = BaselineIds { emb, lstm, cls_w, cls_b };
                if variant == VariantSpec::BiLstmA {
                    Arch::BiLstmA(ids)
                } else {
                    Arch::BiLstmQa(ids)
                }
            }
        };
        Ok(Network { hyper, variant, arch, backward_fault: false })
    }

    pub fn embedding(&self) -> &EmbeddingTable {
        match &self.arch {
            Arch::AntNet(ids) => &ids.emb,
            Arch::BiLstmA(ids) | Arch::BiLstmQa(ids) => &ids.emb,
        }
    }

    /// Trainable scalar count from the shape formulas alone.
    pub fn analytic_trainable_count(hyper: &Hyper, variant: VariantSpec, vocab_size: usize) -> usize {
        let d = hyper.hidden_dim;
        let e = hyper.emb_dim;
        let lstm = |input: usize| {
            let h = d / 2;
            2 * (4 * h * input + 4 * h * h + 4 * h)
        };
        let emb = if hyper.freeze_embeddings { 0 } else { e * vocab_size };
        match variant {
            VariantSpec::AntNet { sa, rr, mf } => {
                let hops = if mf { hyper.hops } else { 0 };
                let per_stack = if hyper.share_hops { hops.min(1) } else { hops };
                let input = if rr { d + hyper.ne } else { d };
                emb + lstm(e + 1)
                    + lstm(e)
                    + if sa { e * e } else { 0 }
                    + d * d
                    + if rr { 2 * d + 1 } else { 0 }
                    + 2 * per_stack * HopIds::count(d, input, hyper.hop_width())
                    + 3 * 2 * d
                    + 3
            }
            VariantSpec::BiLstmA | VariantSpec::BiLstmQa => emb + lstm(e) + 3 * d + 3,
        }
    }

    fn encoder_dropout(f: &mut Forward<'_>, x: Var, dropout: Option<&Dropout>) -> Result<Var> {
        match dropout {
            Some(dr) if dr.encoder => f.g.dropout(x, dr.rate),
            _ => Ok(x),
        }
    }

    fn classifier_dropout(f: &mut Forward<'_>, x: Var, dropout: Option<&Dropout>) -> Result<Var> {
        match dropout {
            Some(dr) if dr.classifier => f.g.dropout(x, dr.rate),
            _ => Ok(x),
        }
    }

    fn forward(
        &self,
        f: &mut Forward<'_>,
        cache: &SkeletonCache,
        s: &IndexedSample,
        dropout: Option<&Dropout>,
    ) -> Result<Nodes> {
        match &self.arch {
            Arch::AntNet(ids) => self.forward_antnet(f, ids, cache, s, dropout),
            Arch::BiLstmA(ids) => {
                let a = encode_answer(f, &ids.emb, &ids.lstm, &s.answer)?;
                self.forward_pooled(f, ids, a.hidden, dropout)
            }
            Arch::BiLstmQa(ids) => {
                let tokens: Vec<usize> = s.question.iter().chain(&s.answer).copied().collect();
                let qa = encode_answer(f, &ids.emb, &ids.lstm, &tokens)?;
                self.forward_pooled(f, ids, qa.hidden, dropout)
            }
        }
    }

    fn forward_pooled(
        &self,
        f: &mut Forward<'_>,
        ids: &BaselineIds,
        hidden: Var,
        dropout: Option<&Dropout>,
    ) -> Result<Nodes> {
        let hidden = Self::encoder_dropout(f, hidden, dropout)?;
        let pooled = f.g.mean_cols(hidden);
        let pooled = Self::classifier_dropout(f, pooled, dropout)?;
        let (w, b) = (f.param(ids.cls_w), f.param(ids.cls_b));
        let logits = classify_logits(&mut f.g, pooled, w, b)?;
        Ok(Nodes {
            logits,
            skeleton: None,
            question_attention: None,
            relevance: None,
            full_hops: Vec::new(),
            skeleton_hops: Vec::new(),
        })
    }

    fn forward_antnet(
        &self,
        f: &mut Forward<'_>,
        ids: &AntNetIds,
        cache: &SkeletonCache,
        s: &IndexedSample,
        dropout: Option<&Dropout>,
    ) -> Result<Nodes> {
        let q = encode_question(f, &ids.emb, &ids.question_lstm, &s.question, &s.indicator)?;
        let a = encode_answer(f, &ids.emb, &ids.answer_lstm, &s.answer)?;
        let hq = Self::encoder_dropout(f, q.hidden, dropout)?;
        let ha = Self::encoder_dropout(f, a.hidden, dropout)?;

        let (u, skeleton) = match ids.w_s {
            Some(w_s) => {
                let w_s = f.param(w_s);
                let centroid = ids.emb.bag(f, &cache.bag_for(s))?;
                let sk = skeleton_scores_from_centroid(&mut f.g, q.embeddings, centroid, w_s)?;
                let u = skeleton_repr(&mut f.g, hq, &sk)?;
                (u, Some((sk.normalized, sk.members)))
            }
            None => (f.g.mean_cols(hq), None),
        };
        let w_a = f.param(ids.w_a);
        let (v, att) = full_repr(&mut f.g, hq, u, w_a)?;

        let (states, relevance) = match ids.relevance {
            Some((w_p, b_p)) => {
                let (w_p, b_p) = (f.param(w_p), f.param(b_p));
                let p = relevance_scores(&mut f.g, ha, u, w_p, b_p)?;
                let e = enlarge(&mut f.g, p, self.hyper.ne)?;
                (augment(&mut f.g, ha, e)?, Some(p))
            }
            None => (ha, None),
        };

        let full: Vec<_> = ids.full_hops.iter().map(|h| h.bind(f)).collect();
        let skel: Vec<_> = ids.skeleton_hops.iter().map(|h| h.bind(f)).collect();
        let fused = fuse(&mut f.g, v, u, states, &full, &skel)?;
        let out = Self::classifier_dropout(f, fused.output, dropout)?;
        let (w, b) = (f.param(ids.cls_w), f.param(ids.cls_b));
        let logits = classify_logits(&mut f.g, out, w, b)?;
        Ok(Nodes {
            logits,
            skeleton,
            question_attention: Some(att),
            relevance,
            full_hops: fused.full_attention,
            skeleton_hops: fused.skeleton_attention,
        })
    }

    /// Logits for one sample, no dropout.
    pub fn logits(&self, store: &ParamStore, cache: &SkeletonCache, s: &IndexedSample) -> Result<Tensor> {
        let mut f = Forward::new(store, 0);
        let nodes = self.forward(&mut f, cache, s, None)?;
        Ok(f.g.value(nodes.logits).clone())
    }

    pub fn probabilities(
        &self,
        store: &ParamStore,
        cache: &SkeletonCache,
        s: &IndexedSample,
    ) -> Result<Vec<f64>> {
        let logits = self.logits(store, cache, s)?;
        if !logits.all_finite() {
            return Err(Error::NonFinite { op: "classifier" });
        }
        Ok(probabilities(&logits))
    }

    /// Cross-entropy and parameter gradients for one sample.
    pub fn sample_loss_and_grad(
        &self,
        store: &ParamStore,
        cache: &SkeletonCache,
        s: &IndexedSample,
        dropout: Option<&Dropout>,
        seed: u64,
    ) -> Result<(f64, Gradients)> {
        let mut f = Forward::new(store, seed);
        if self.backward_fault {
            f.g.inject_backward_fault();
        }
        let nodes = self.forward(&mut f, cache, s, dropout)?;
        let loss = f.g.cross_entropy(nodes.logits, s.label.index())?;
        f.g.backward(loss)?;
        Ok((f.g.value(loss).item(), f.gradients()))
    }

    /// Mean loss and mean gradients over `samples`. Samples run in
    /// parallel and are summed in order, so the result does not depend on
    /// thread scheduling. Sample `i` draws dropout masks from
    /// `mix(seed, i)`.
    pub fn loss_and_grad(
        &self,
        store: &ParamStore,
        cache: &SkeletonCache,
        samples: &[IndexedSample],
        dropout: Option<&Dropout>,
        seed: u64,
    ) -> Result<(f64, Gradients)> {
        if samples.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let parts: Vec<Result<(f64, Gradients)>> = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| self.sample_loss_and_grad(store, cache, s, dropout, mix(seed, i as u64)))
            .collect();
        let mut total = 0.0;
        let mut grads = Gradients::empty(store.len());
        for part in parts {
            let (l, g) = part?;
            total += l;
            grads.add_assign(&g);
        }
        let n = samples.len() as f64;
        grads.scale(1.0 / n);
        Ok((total / n, grads))
    }

    pub fn inspect(
        &self,
        store: &ParamStore,
        cache: &SkeletonCache,
        s: &IndexedSample,
    ) -> Result<Inspection> {
        let mut f = Forward::new(store, 0);
        let nodes = self.forward(&mut f, cache, s, None)?;
        let row = |v: Var| f.g.value(v).data().to_vec();
        let probs = probabilities(f.g.value(nodes.logits));
        let (skeleton_scores, skeleton_members) = match nodes.skeleton {
            Some((n, m)) => (Some(n), Some(m)),
            None => (None, None),
        };
        Ok(Inspection {
            question: s.question_tokens.clone(),
            answer: s.answer_tokens.clone(),
            skeleton_scores,
            skeleton_members,
            question_attention: nodes.question_attention.map(row),
            relevance: nodes.relevance.map(row),
            full_hop_attention: nodes.full_hops.iter().map(|&v| row(v)).collect(),
            skeleton_hop_attention: nodes.skeleton_hops.iter().map(|&v| row(v)).collect(),
            predicted: predicted_label(&probs),
            probabilities: probs,
            gold: s.label,
        })
    }
}

/// SplitMix64-style mixing of a seed with a stream index.
pub fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A network together with its parameters, vocabulary and skeleton cache.
#[derive(Clone, Debug)]
pub struct Model {
    pub network: Network,
    pub store: ParamStore,
    pub vocab: Vocab,
    pub cache: SkeletonCache,
}

impl Model {
    pub fn new(hyper: Hyper, variant: VariantSpec, vocab: Vocab, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let network = Network::build(hyper, variant, vocab.len(), &mut store, seed)?;
        Ok(Model { network, store, vocab, cache: SkeletonCache::default() })
    }

    pub fn hyper(&self) -> &Hyper {
        &self.network.hyper
    }

    pub fn variant(&self) -> VariantSpec {
        self.network.variant
    }

    pub fn probabilities(&self, s: &IndexedSample) -> Result<Vec<f64>> {
        self.network.probabilities(&self.store, &self.cache, s)
    }

    pub fn predict(&self, s: &IndexedSample) -> Result<Label> {
        Ok(predicted_label(&self.probabilities(s)?))
    }

    pub fn inspect(&self, s: &IndexedSample) -> Result<Inspection> {
        self.network.inspect(&self.store, &self.cache, s)
    }

    pub fn loss_and_grad(
        &self,
        samples: &[IndexedSample],
        dropout: Option<&Dropout>,
        seed: u64,
    ) -> Result<(f64, Gradients)> {
        self.network.loss_and_grad(&self.store, &self.cache, samples, dropout, seed)
    }

    /// Mean loss without dropout or gradients.
    pub fn mean_loss(&self, samples: &[IndexedSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let losses: Vec<Result<f64>> = samples
            .par_iter()
            .map(|s| {
                let logits = self.network.logits(&self.store, &self.cache, s)?;
                let data = logits.data();
                Ok(crate::autodiff::log_sum_exp(data) - data[s.label.index()])
            })
            .collect();
        let mut total = 0.0;
        for l in losses {
            total += l?;
        }
        Ok(total / samples.len() as f64)
    }

    /// Index of the embedding table in the parameter store.
    pub fn embedding_table(&mut self) -> &mut Tensor {
        let id = self.network.embedding().table;
        self.store.value_mut(id)
    }
}

/// Small network and samples for gradient checks and tests: vocabulary 20,
/// embeddings 8, `d` 8, `N_e` 3, `T` 2, `r` 6, sequences of at most 5.
pub mod toy {
    use rand::Rng;

    use super::*;
    use crate::corpus::QuestionType;

    pub const VOCAB: usize = 20;

    pub fn hyper() -> Hyper {
        Hyper {
            emb_dim: 8,
            hidden_dim: 8,
            ne: 3,
            hops: 2,
            hop_width: Some(6),
            share_hops: false,
            max_len: 5,
            freeze_embeddings: false,
        }
    }

    pub fn vocab() -> Vocab {
        let mut tokens = vec![crate::corpus::UNK.to_string()];
        tokens.extend((1..VOCAB).map(|i| format!("w{i}")));
        Vocab::from(tokens)
    }

    /// Redraws every parameter uniformly in `[-scale, scale]`, moving the
    /// check away from the small-weight regime of initialization where many
    /// gradients sit near finite-difference noise.
    pub fn randomize(store: &mut ParamStore, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let (r, c) = store.value(id).shape();
            *store.value_mut(id) = crate::params::uniform(&mut rng, r, c, scale);
        }
    }

    /// Random samples sharing a few questions so the skeleton cache has
    /// several answers per question.
    pub fn samples(seed: u64, n: usize) -> Vec<IndexedSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let questions: Vec<Vec<usize>> =
            (0..3).map(|_| (0..rng.gen_range(2..=5)).map(|_| rng.gen_range(0..VOCAB)).collect()).collect();
        (0..n)
            .map(|i| {
                let qi = i % questions.len();
                let question = questions[qi].clone();
                let answer: Vec<usize> =
                    (0..rng.gen_range(1..=5)).map(|_| rng.gen_range(0..VOCAB)).collect();
                let mut indicator = vec![0.0; question.len()];
                let mc = qi > 0;
                if mc {
                    indicator[rng.gen_range(0..question.len())] = 1.0;
                }
                IndexedSample {
                    question_key: format!("q{qi}"),
                    answer_id: format!("a{i}"),
                    question_tokens: question.iter().map(|t| format!("w{t}")).collect(),
                    answer_tokens: answer.iter().map(|t| format!("w{t}")).collect(),
                    question,
                    answer,
                    indicator,
                    label: Label::from_index(rng.gen_range(0..3)).expect("three classes"),
                    question_type: if mc { QuestionType::MC } else { QuestionType::TF },
                    option_truncated: false,
                }
            })
            .collect()
    }
}
