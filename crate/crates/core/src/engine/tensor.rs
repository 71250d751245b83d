//! Contractions of a conditional probability tensor against message vectors.

use crate::model::Cpt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semiring {
    /// Marginal beliefs.
    SumProduct,
    /// Belief revision (most probable explanation).
    MaxProduct,
}

impl Semiring {
    #[inline]
    fn combine(self, acc: f64, x: f64) -> f64 {
        match self {
            Semiring::SumProduct => acc + x,
            Semiring::MaxProduct => acc.max(x),
        }
    }
}

/// Eliminates `axis` by weighting it with `weights` and folding with the semiring.
pub(crate) fn contract_axis(
    shape: &[usize],
    data: &[f64],
    axis: usize,
    weights: &[f64],
    ring: Semiring,
) -> (Vec<usize>, Vec<f64>) {
    let outer: usize = shape[..axis].iter().product();
    let width = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    debug_assert_eq!(weights.len(), width);
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        let dst = &mut out[o * inner..(o + 1) * inner];
        for (k, &w) in weights.iter().enumerate() {
            let src = &data[(o * width + k) * inner..(o * width + k + 1) * inner];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = ring.combine(*d, s * w);
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape.remove(axis);
    (new_shape, out)
}

/// `pi(x) = (+)_u P(x|u) * prod_i pi_i(u_i)`, parent axes eliminated in declaration order.
pub(crate) fn pi_contract(cpt: &Cpt, incoming: &[&[f64]], ring: Semiring) -> Vec<f64> {
    let mut shape = cpt.shape().to_vec();
    let mut data = cpt.data().to_vec();
    for msg in incoming {
        let (s, d) = contract_axis(&shape, &data, 0, msg, ring);
        shape = s;
        data = d;
    }
    data
}

/// `lambda_X(u_i) = (+)_x lambda(x) (+)_{u \ u_i} P(x|u) prod_{k != i} pi_k(u_k)`.
pub(crate) fn lambda_contract(cpt: &Cpt, incoming: &[&[f64]], lambda: &[f64], target: usize, ring: Semiring) -> Vec<f64> {
    let n = incoming.len();
    let (mut shape, mut data) = contract_axis(cpt.shape(), cpt.data(), n, lambda, ring);
    for (k, msg) in incoming.iter().enumerate() {
        if k == target {
            continue;
        }
        let axis = usize::from(k > target);
        let (s, d) = contract_axis(&shape, &data, axis, msg, ring);
        shape = s;
        data = d;
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_matches_direct_sum() {
        // P(x | u1, u2) with shape 2x3x2
        let data: Vec<f64> = (0..12).map(|i| (i as f64 + 1.0) / 100.0).collect();
        let cpt = Cpt::new(vec![2, 3, 2], data).unwrap();
        let p1 = [0.3, 0.7];
        let p2 = [0.2, 0.5, 0.3];
        let lam = [0.9, 0.4];
        let pi = pi_contract(&cpt, &[&p1, &p2], Semiring::SumProduct);
        for x in 0..2 {
            let mut direct = 0.0;
            for a in 0..2 {
                for b in 0..3 {
                    direct += cpt.get(&[a, b], x) * p1[a] * p2[b];
                }
            }
            assert!((pi[x] - direct).abs() < 1e-15);
        }
        let to_second = lambda_contract(&cpt, &[&p1, &p2], &lam, 1, Semiring::SumProduct);
        for b in 0..3 {
            let mut direct = 0.0;
            for a in 0..2 {
                for x in 0..2 {
                    direct += lam[x] * cpt.get(&[a, b], x) * p1[a];
                }
            }
            assert!((to_second[b] - direct).abs() < 1e-15);
        }
        let to_first = lambda_contract(&cpt, &[&p1, &p2], &lam, 0, Semiring::MaxProduct);
        for a in 0..2 {
            let mut direct: f64 = 0.0;
            for b in 0..3 {
                for x in 0..2 {
                    direct = direct.max(lam[x] * cpt.get(&[a, b], x) * p2[b]);
                }
            }
            assert!((to_first[a] - direct).abs() < 1e-15);
        }
    }
}
