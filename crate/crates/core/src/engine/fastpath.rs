//! Closed-form messages for canonical gates.
//!
//! For noisy-OR/AND the messages are products of per-parent inhibitor terms;
//! for noisy-MAX/MIN they factor through the child's cumulative distribution.
//! Both avoid contracting the full `prod |U_i| x |X|` tensor. Products that
//! exclude one parent are built from prefix/suffix products, never by division.

use super::tensor::{lambda_contract, pi_contract, Semiring};
use crate::gate::{cdf, GateSpec};
use crate::model::Cpt;

/// Unnormalized outgoing messages of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMessages {
    /// `pi(x)` over the node's own values.
    pub pi: Vec<f64>,
    /// `lambda_X(u_i)` for each parent, in parent order.
    pub lambda_to_parents: Vec<Vec<f64>>,
}

/// Reference messages by tensor contraction.
pub fn tensor_messages(cpt: &Cpt, incoming_pi: &[Vec<f64>], lambda: &[f64]) -> NodeMessages {
    let refs: Vec<&[f64]> = incoming_pi.iter().map(Vec::as_slice).collect();
    NodeMessages {
        pi: pi_contract(cpt, &refs, Semiring::SumProduct),
        lambda_to_parents: (0..refs.len())
            .map(|i| lambda_contract(cpt, &refs, lambda, i, Semiring::SumProduct))
            .collect(),
    }
}

/// `out[i] = prod_{j != i} factors[j]` for each position.
fn products_excluding(factors: &[f64]) -> Vec<f64> {
    let n = factors.len();
    let mut out = vec![1.0; n];
    let mut acc = 1.0;
    for i in 0..n {
        out[i] = acc;
        acc *= factors[i];
    }
    acc = 1.0;
    for i in (0..n).rev() {
        out[i] *= acc;
        acc *= factors[i];
    }
    out
}

/// Closed-form messages for a canonical gate. Returns `None` when the gate
/// has no closed form here (Boolean gates) or the message shapes do not fit
/// its parameters; callers then fall back to the tensor path.
pub fn fast_path_messages(gate: &GateSpec, incoming_pi: &[Vec<f64>], lambda: &[f64]) -> Option<NodeMessages> {
    match gate {
        GateSpec::NoisyOr { strengths, leak } => {
            binary_fits(strengths.len(), incoming_pi, lambda)?;
            Some(noisy_or(strengths, *leak, incoming_pi, lambda))
        }
        GateSpec::NoisyAnd { strengths, leak } => {
            binary_fits(strengths.len(), incoming_pi, lambda)?;
            Some(noisy_and(strengths, *leak, incoming_pi, lambda))
        }
        GateSpec::NoisyMax { tables, leak } => {
            graded_fits(tables, leak.as_deref(), incoming_pi, lambda)?;
            Some(noisy_max(tables, leak.as_deref(), incoming_pi, lambda))
        }
        GateSpec::NoisyMin { tables, leak } => {
            graded_fits(tables, leak.as_deref(), incoming_pi, lambda)?;
            // min over the dominance order is max over the reversed order
            let reversed: Vec<Vec<Vec<f64>>> = tables
                .iter()
                .map(|t| t.iter().map(|row| row.iter().rev().copied().collect()).collect())
                .collect();
            let leak_rev: Option<Vec<f64>> = leak.as_ref().map(|l| l.iter().rev().copied().collect());
            let lambda_rev: Vec<f64> = lambda.iter().rev().copied().collect();
            let mut m = noisy_max(&reversed, leak_rev.as_deref(), incoming_pi, &lambda_rev);
            m.pi.reverse();
            Some(m)
        }
        GateSpec::Bool { .. } => None,
    }
}

fn binary_fits(n: usize, incoming: &[Vec<f64>], lambda: &[f64]) -> Option<()> {
    (incoming.len() == n && incoming.iter().all(|m| m.len() == 2) && lambda.len() == 2).then_some(())
}

fn graded_fits(tables: &[Vec<Vec<f64>>], leak: Option<&[f64]>, incoming: &[Vec<f64>], lambda: &[f64]) -> Option<()> {
    let k = lambda.len();
    let ok = incoming.len() == tables.len()
        && tables
            .iter()
            .zip(incoming)
            .all(|(t, m)| t.len() == m.len() && t.iter().all(|row| row.len() == k))
        && leak.is_none_or(|l| l.len() == k);
    ok.then_some(())
}

fn noisy_or(strengths: &[f64], leak: f64, incoming: &[Vec<f64>], lambda: &[f64]) -> NodeMessages {
    let q_leak = 1.0 - leak;
    let q: Vec<f64> = strengths.iter().map(|c| 1.0 - c).collect();
    // s_i: total incoming mass; t_i: mass that leaves the effect absent
    let s: Vec<f64> = incoming.iter().map(|m| m[0] + m[1]).collect();
    let t: Vec<f64> = incoming.iter().zip(&q).map(|(m, qi)| m[0] + qi * m[1]).collect();
    let absent = q_leak * t.iter().product::<f64>();
    let present = s.iter().product::<f64>() - absent;
    let s_ex = products_excluding(&s);
    let t_ex = products_excluding(&t);
    let lambda_to_parents = (0..incoming.len())
        .map(|i| {
            let base = lambda[1] * s_ex[i];
            let delta = (lambda[0] - lambda[1]) * q_leak * t_ex[i];
            vec![base + delta, base + delta * q[i]]
        })
        .collect();
    NodeMessages {
        pi: vec![absent, present.max(0.0)],
        lambda_to_parents,
    }
}

fn noisy_and(strengths: &[f64], leak: f64, incoming: &[Vec<f64>], lambda: &[f64]) -> NodeMessages {
    let q_leak = 1.0 - leak;
    let q: Vec<f64> = strengths.iter().map(|c| 1.0 - c).collect();
    let s: Vec<f64> = incoming.iter().map(|m| m[0] + m[1]).collect();
    // r_i: mass that lets the effect through
    let r: Vec<f64> = incoming.iter().zip(&q).map(|(m, qi)| qi * m[0] + m[1]).collect();
    let present = q_leak * r.iter().product::<f64>();
    let absent = s.iter().product::<f64>() - present;
    let s_ex = products_excluding(&s);
    let r_ex = products_excluding(&r);
    let lambda_to_parents = (0..incoming.len())
        .map(|i| {
            let base = lambda[0] * s_ex[i];
            let delta = (lambda[1] - lambda[0]) * q_leak * r_ex[i];
            vec![base + delta * q[i], base + delta]
        })
        .collect();
    NodeMessages {
        pi: vec![absent.max(0.0), present],
        lambda_to_parents,
    }
}

fn noisy_max(tables: &[Vec<Vec<f64>>], leak: Option<&[f64]>, incoming: &[Vec<f64>], lambda: &[f64]) -> NodeMessages {
    let k = lambda.len();
    let leak_cdf = leak.map_or_else(|| vec![1.0; k], cdf);
    let cdfs: Vec<Vec<Vec<f64>>> = tables
        .iter()
        .map(|t| t.iter().map(|row| cdf(row)).collect())
        .collect();
    // g[i][level] = sum_s pi_i(s) F_i(level | s)
    let g: Vec<Vec<f64>> = cdfs
        .iter()
        .zip(incoming)
        .map(|(rows, msg)| {
            (0..k)
                .map(|level| rows.iter().zip(msg).map(|(f, p)| p * f[level]).sum())
                .collect()
        })
        .collect();
    let below: Vec<f64> = (0..k)
        .map(|level| leak_cdf[level] * g.iter().map(|gi| gi[level]).product::<f64>())
        .collect();
    let pi = (0..k)
        .map(|x| if x == 0 { below[0] } else { (below[x] - below[x - 1]).max(0.0) })
        .collect();
    // excl[level][i] = prod_{j != i} g_j(level)
    let excl: Vec<Vec<f64>> = (0..k)
        .map(|level| products_excluding(&g.iter().map(|gi| gi[level]).collect::<Vec<_>>()))
        .collect();
    let lambda_to_parents = cdfs
        .iter()
        .enumerate()
        .map(|(i, rows)| {
            rows.iter()
                .map(|f| {
                    let mut prev = 0.0;
                    let mut acc = 0.0;
                    for level in 0..k {
                        let c = leak_cdf[level] * f[level] * excl[level][i];
                        acc += lambda[level] * (c - prev);
                        prev = c;
                    }
                    acc
                })
                .collect()
        })
        .collect();
    NodeMessages { pi, lambda_to_parents }
}

/// Messages for a node, via the gate's closed form when available.
pub(crate) fn node_messages(cpt: &Cpt, gate: Option<&GateSpec>, incoming_pi: &[Vec<f64>], lambda: &[f64]) -> NodeMessages {
    gate.and_then(|g| fast_path_messages(g, incoming_pi, lambda))
        .unwrap_or_else(|| tensor_messages(cpt, incoming_pi, lambda))
}
