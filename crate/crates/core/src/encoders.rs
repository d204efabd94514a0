//! Word embeddings and bidirectional LSTM encoders.
//!
//! The question encoder sees `[embedding; indicator]` per word, where the
//! indicator flags the words of the option term under consideration. The
//! answer encoder sees embeddings only and has its own weights.

use std::io::BufRead;

use rand::Rng;

use crate::autodiff::{Axis, Var};
use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::params::{glorot, uniform, Forward, ParamId, ParamStore};
use crate::tensor::Tensor;

/// `emb_dim × vocab` lookup table; one column per token.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    pub table: ParamId,
    pub dim: usize,
    pub frozen: bool,
}

impl EmbeddingTable {
    /// Registers a table initialized uniformly in (−0.1, 0.1).
    pub fn register(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        vocab_size: usize,
        dim: usize,
        frozen: bool,
    ) -> Self {
        let table = store.add("embedding", uniform(rng, dim, vocab_size, 0.1), !frozen);
        EmbeddingTable { table, dim, frozen }
    }

    pub fn lookup(&self, f: &mut Forward<'_>, tokens: &[usize]) -> Result<Var> {
        let t = f.param(self.table);
        f.g.gather_cols(t, tokens)
    }

    /// Weighted sum of embedding columns, `dim × 1`.
    pub fn bag(&self, f: &mut Forward<'_>, bag: &[(usize, f64)]) -> Result<Var> {
        let indices: Vec<usize> = bag.iter().map(|&(i, _)| i).collect();
        let weights: Vec<f64> = bag.iter().map(|&(_, w)| w).collect();
        let cols = self.lookup(f, &indices)?;
        let w = f.g.constant(Tensor::column(&weights));
        f.g.matmul(cols, w)
    }
}

/// Reads `token v1 … vD` lines into the columns of `table` for tokens in
/// `vocab`. Returns how many vocabulary tokens were filled.
pub fn load_pretrained(reader: impl BufRead, vocab: &Vocab, table: &mut Tensor) -> Result<usize> {
    let dim = table.rows();
    let mut filled = vec![false; vocab.len()];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(tok) = parts.next() else { continue };
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        if values.len() != dim {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        if vocab.contains(tok) {
            let col = vocab.get(tok);
            for (r, v) in values.into_iter().enumerate() {
                table.set(r, col, v);
            }
            filled[col] = true;
        }
    }
    Ok(filled.into_iter().filter(|&f| f).count())
}

/// Gate weights of one LSTM direction. Rows are stacked as
/// input, forget, cell, output gates (`h` rows each).
#[derive(Clone, Debug)]
pub struct LstmDirection {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
    pub in_dim: usize,
    /// Hidden size per direction; outputs are `2 * hidden` wide.
    pub hidden: usize,
}

impl BiLstm {
    /// Registers a BiLSTM with total output width `out_dim` (must be even).
    /// Forget-gate biases start at 1.
    pub fn register(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Result<Self> {
        if out_dim == 0 || !out_dim.is_multiple_of(2) {
            return Err(Error::Config(format!("BiLSTM width {out_dim} must be even and positive")));
        }
        let h = out_dim / 2;
        let mut direction = |name: &str| {
            let mut b = Tensor::zeros(4 * h, 1);
            for r in h..2 * h {
                b.set(r, 0, 1.0);
            }
            LstmDirection {
                w: store.add(format!("{prefix}.{name}.w"), glorot(rng, 4 * h, in_dim), true),
                u: store.add(format!("{prefix}.{name}.u"), glorot(rng, 4 * h, h), true),
                b: store.add(format!("{prefix}.{name}.b"), b, true),
            }
        };
        let forward = direction("fwd");
        let backward = direction("bwd");
        Ok(BiLstm { forward, backward, in_dim, hidden: h })
    }

    pub fn out_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Encodes an `in_dim × n` sequence into `2h × n` states: forward
    /// states stacked over backward states at each position.
    pub fn encode(&self, f: &mut Forward<'_>, x: Var) -> Result<Var> {
        let (rows, n) = f.g.shape(x);
        if rows != self.in_dim {
            return Err(Error::Shape { op: "bilstm", left: (self.in_dim, n), right: (rows, n) });
        }
        let fwd = self.run(f, &self.forward, x, false)?;
        let bwd = self.run(f, &self.backward, x, true)?;
        let fwd = f.g.concat_all(&fwd, Axis::Col)?;
        let bwd = f.g.concat_all(&bwd, Axis::Col)?;
        f.g.concat(fwd, bwd, Axis::Row)
    }

    fn run(&self, f: &mut Forward<'_>, p: &LstmDirection, x: Var, reverse: bool) -> Result<Vec<Var>> {
        let h = self.hidden;
        let n = f.g.shape(x).1;
        let (w, u, b) = (f.param(p.w), f.param(p.u), f.param(p.b));
        let wx = f.g.matmul(w, x)?;
        let pre = f.g.add(wx, b)?;
        let mut states = vec![None; n];
        let mut prev: Option<(Var, Var)> = None;
        let steps: Box<dyn Iterator<Item = usize>> =
            if reverse { Box::new((0..n).rev()) } else { Box::new(0..n) };
        for t in steps {
            let mut z = f.g.slice_cols(pre, t, t + 1)?;
            if let Some((h_prev, _)) = prev {
                let uh = f.g.matmul(u, h_prev)?;
                z = f.g.add(z, uh)?;
            }
            let gates = f.g.sigmoid(z)?;
            let i = f.g.slice_rows(gates, 0, h)?;
            let fg = f.g.slice_rows(gates, h, 2 * h)?;
            let o = f.g.slice_rows(gates, 3 * h, 4 * h)?;
            let cand = f.g.slice_rows(z, 2 * h, 3 * h)?;
            let cand = f.g.tanh(cand)?;
            let mut c = f.g.mul(i, cand)?;
            if let Some((_, c_prev)) = prev {
                let kept = f.g.mul(fg, c_prev)?;
                c = f.g.add(kept, c)?;
            }
            let tc = f.g.tanh(c)?;
            let h_t = f.g.mul(o, tc)?;
            states[t] = Some(h_t);
            prev = Some((h_t, c));
        }
        Ok(states.into_iter().map(|s| s.expect("every step visited")).collect())
    }
}

/// Embeddings and hidden states of an encoded sequence.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    /// `emb_dim × n`
    pub embeddings: Var,
    /// `d × n`
    pub hidden: Var,
}

/// Question encoder: `[embedding(q_m); I_m]` through the question BiLSTM.
pub fn encode_question(
    f: &mut Forward<'_>,
    emb: &EmbeddingTable,
    lstm: &BiLstm,
    tokens: &[usize],
    indicator: &[f64],
) -> Result<Encoded> {
    if tokens.is_empty() || tokens.len() != indicator.len() {
        return Err(Error::Shape {
            op: "encode_question",
            left: (tokens.len(), 1),
            right: (indicator.len(), 1),
        });
    }
    let embeddings = emb.lookup(f, tokens)?;
    let flags = f.g.constant(Tensor::row(indicator));
    let x = f.g.concat(embeddings, flags, Axis::Row)?;
    let hidden = lstm.encode(f, x)?;
    Ok(Encoded { embeddings, hidden })
}

/// Answer encoder: embeddings through the answer BiLSTM.
pub fn encode_answer(
    f: &mut Forward<'_>,
    emb: &EmbeddingTable,
    lstm: &BiLstm,
    tokens: &[usize],
) -> Result<Encoded> {
    if tokens.is_empty() {
        return Err(Error::Shape { op: "encode_answer", left: (0, 1), right: (1, 1) });
    }
    let embeddings = emb.lookup(f, tokens)?;
    let hidden = lstm.encode(f, embeddings)?;
    Ok(Encoded { embeddings, hidden })
}

#[cfg(test)]
mod tests {
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    struct Fixture {
        store: ParamStore,
        emb: EmbeddingTable,
        q: BiLstm,
        a: BiLstm,
    }

    fn fixture(vocab: usize, emb_dim: usize, d: usize) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let emb = EmbeddingTable::register(&mut store, &mut rng, vocab, emb_dim, true);
        let q = BiLstm::register(&mut store, &mut rng, "lstm_q", emb_dim + 1, d).unwrap();
        let a = BiLstm::register(&mut store, &mut rng, "lstm_a", emb_dim, d).unwrap();
        Fixture { store, emb, q, a }
    }

    fn zero_lstms(store: &mut ParamStore) {
        let ids: Vec<_> = store.ids().filter(|&id| store.get(id).name.starts_with("lstm")).collect();
        for id in ids {
            store.value_mut(id).data_mut().fill(0.0);
        }
    }

    #[test]
    fn output_length_and_width() {
        let fx = fixture(40, 6, 8);
        let mut f = Forward::new(&fx.store, 0);
        let tokens: Vec<usize> = (0..33).map(|i| i % 40).collect();
        let enc = encode_answer(&mut f, &fx.emb, &fx.a, &tokens).unwrap();
        assert_eq!(f.g.shape(enc.hidden), (8, 33));
        let one = encode_question(&mut f, &fx.emb, &fx.q, &[3], &[0.0]).unwrap();
        assert_eq!(f.g.shape(one.hidden), (8, 1));
    }

    #[test]
    fn zero_weights_give_zero_states() {
        let mut fx = fixture(10, 4, 6);
        zero_lstms(&mut fx.store);
        let mut f = Forward::new(&fx.store, 0);
        let q = encode_question(&mut f, &fx.emb, &fx.q, &[1, 2, 3], &[0.0, 1.0, 0.0]).unwrap();
        let a = encode_answer(&mut f, &fx.emb, &fx.a, &[4, 5]).unwrap();
        assert!(f.g.value(q.hidden).data().iter().all(|&x| x == 0.0));
        assert!(f.g.value(a.hidden).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tf_indicator_is_the_zero_indicator() {
        let fx = fixture(10, 4, 6);
        let run = |ind: &[f64]| {
            let mut f = Forward::new(&fx.store, 0);
            let enc = encode_question(&mut f, &fx.emb, &fx.q, &[1, 2, 3], ind).unwrap();
            f.g.value(enc.hidden).clone()
        };
        assert_eq!(run(&[0.0; 3]), run(&[0.0; 3]));
        assert_ne!(run(&[0.0; 3]), run(&[0.0, 1.0, 0.0]));
    }

    #[test]
    fn palindromic_weights_reverse_the_sequence() {
        let mut fx = fixture(10, 4, 6);
        for part in ["w", "u", "b"] {
            let src = fx.store.id(&format!("lstm_a.fwd.{part}")).unwrap();
            let dst = fx.store.id(&format!("lstm_a.bwd.{part}")).unwrap();
            let v = fx.store.value(src).clone();
            *fx.store.value_mut(dst) = v;
        }
        let encode = |tokens: &[usize]| {
            let mut f = Forward::new(&fx.store, 0);
            let enc = encode_answer(&mut f, &fx.emb, &fx.a, tokens).unwrap();
            f.g.value(enc.hidden).clone()
        };
        let out = encode(&[1, 5, 7]);
        let rev = encode(&[7, 5, 1]);
        let h = 3;
        for t in 0..3 {
            for r in 0..h {
                // forward half of rev at t equals backward half of out at 2-t
                assert_eq!(rev.get(r, t), out.get(h + r, 2 - t));
                assert_eq!(rev.get(h + r, t), out.get(r, 2 - t));
            }
        }
    }

    #[test]
    fn out_of_range_token_errors() {
        let fx = fixture(5, 4, 6);
        let mut f = Forward::new(&fx.store, 0);
        assert!(matches!(
            encode_answer(&mut f, &fx.emb, &fx.a, &[1, 9]),
            Err(Error::IndexOutOfRange { index: 9, len: 5 })
        ));
        assert!(encode_question(&mut f, &fx.emb, &fx.q, &[1, 2], &[0.0]).is_err());
    }

    #[test]
    fn odd_width_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        assert!(BiLstm::register(&mut store, &mut rng, "x", 4, 7).is_err());
    }

    #[test]
    fn pretrained_vectors_fill_known_tokens() {
        let vocab = Vocab::from(vec!["<unk>".to_string(), "tea".into(), "milk".into()]);
        let mut table = Tensor::zeros(3, 3);
        let text = "tea 1 2 3\ncoffee 4 5 6\n";
        let n = load_pretrained(text.as_bytes(), &vocab, &mut table).unwrap();
        assert_eq!(n, 1);
        assert_eq!(table.col_vec(1), vec![1.0, 2.0, 3.0]);
        assert!(load_pretrained("tea 1 2\n".as_bytes(), &vocab, &mut table).is_err());
    }
}
