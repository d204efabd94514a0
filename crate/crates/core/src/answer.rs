//! Relevance scoring and dimension enlarging of answer states.

use crate::autodiff::{Axis, Graph, Var};
use crate::error::{Error, Result};

/// `p_n = sigmoid(W_p·[h_n; u] + b_p)` for every answer position, as a
/// `1 × N` row.
pub fn relevance_scores(g: &mut Graph<'_>, hidden: Var, u: Var, w_p: Var, b_p: Var) -> Result<Var> {
    let (d, n) = g.shape(hidden);
    if g.shape(u) != (d, 1) {
        return Err(Error::Shape { op: "relevance_scores", left: (d, n), right: g.shape(u) });
    }
    let tiled = g.expand(u, d, n)?;
    let joined = g.concat(hidden, tiled, Axis::Row)?;
    let z = g.matmul(w_p, joined)?;
    let z = g.add(z, b_p)?;
    g.sigmoid(z)
}

/// Replicates each score `ne` times: `1 × N` → `ne × N`.
pub fn enlarge(g: &mut Graph<'_>, p: Var, ne: usize) -> Result<Var> {
    if ne == 0 {
        return Err(Error::Config("enlargement length must be at least 1".into()));
    }
    let n = g.shape(p).1;
    g.expand(p, ne, n)
}

/// `h'_n = [h_n; E_n]`.
pub fn augment(g: &mut Graph<'_>, hidden: Var, enlarged: Var) -> Result<Var> {
    let (hs, es) = (g.shape(hidden), g.shape(enlarged));
    if hs.1 != es.1 {
        return Err(Error::Shape { op: "augment", left: hs, right: es });
    }
    g.concat(hidden, enlarged, Axis::Row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::sigmoid;
    use crate::tensor::Tensor;

    fn setup(g: &mut Graph<'_>) -> (Var, Var) {
        let h = g.constant(Tensor::from_rows(&[&[2.0, -1.0, 0.5], &[0.3, 0.0, 4.0]]));
        let u = g.constant(Tensor::column(&[0.7, -0.2]));
        (h, u)
    }

    #[test]
    fn zero_weights_give_one_half() {
        let mut g = Graph::new(0);
        let (h, u) = setup(&mut g);
        let w = g.constant(Tensor::zeros(1, 4));
        let b = g.constant(Tensor::scalar(0.0));
        let p = relevance_scores(&mut g, h, u, w, b).unwrap();
        assert_eq!(g.value(p).data(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn large_bias_saturates() {
        let mut g = Graph::new(0);
        let (h, u) = setup(&mut g);
        let w = g.constant(Tensor::zeros(1, 4));
        let b = g.constant(Tensor::scalar(20.0));
        let p = relevance_scores(&mut g, h, u, w, b).unwrap();
        assert!(g.value(p).data().iter().all(|&x| x > 0.999999 && x < 1.0));
    }

    #[test]
    fn selecting_one_coordinate() {
        let mut g = Graph::new(0);
        let (h, u) = setup(&mut g);
        let w = g.constant(Tensor::row(&[1.0, 0.0, 0.0, 0.0]));
        let b = g.constant(Tensor::scalar(0.0));
        let p = relevance_scores(&mut g, h, u, w, b).unwrap();
        // first position has h[0] = 2
        assert!((g.value(p).data()[0] - 0.8807970779778823).abs() < 1e-15);
        assert_eq!(g.value(p).data()[0], sigmoid(2.0));
    }

    #[test]
    fn dimension_mismatch_errors() {
        let mut g = Graph::new(0);
        let (h, u) = setup(&mut g);
        let w = g.constant(Tensor::zeros(1, 3));
        let b = g.constant(Tensor::scalar(0.0));
        assert!(relevance_scores(&mut g, h, u, w, b).is_err());
    }

    #[test]
    fn enlarge_replicates_and_sums_back() {
        let mut g = Graph::new(0);
        let p = g.variable(Tensor::row(&[0.25]));
        let e = enlarge(&mut g, p, 4).unwrap();
        assert_eq!(g.value(e).data(), &[0.25; 4]);
        let one = enlarge(&mut g, p, 1).unwrap();
        assert_eq!(g.value(one).data(), &[0.25]);
        assert!(enlarge(&mut g, p, 0).is_err());

        let e13 = enlarge(&mut g, p, 13).unwrap();
        let s = g.sum(e13);
        g.backward(s).unwrap();
        assert_eq!(g.grad(p).unwrap().item(), 13.0);
    }

    #[test]
    fn augment_by_definition() {
        let mut g = Graph::new(0);
        let h = g.constant(Tensor::column(&[1.0, 2.0]));
        let p = g.constant(Tensor::row(&[0.5]));
        let e = enlarge(&mut g, p, 3).unwrap();
        let out = augment(&mut g, h, e).unwrap();
        assert_eq!(g.value(out).data(), &[1.0, 2.0, 0.5, 0.5, 0.5]);

        let wrong = g.constant(Tensor::zeros(3, 2));
        assert!(augment(&mut g, h, wrong).is_err());
    }
}
