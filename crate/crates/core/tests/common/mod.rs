//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use verbspace::model::LossKind;
use verbspace::Mlp;

/// Eq. 3 by counting: verb `j` is in the top-k of `p` iff fewer than `k`
/// verbs beat it (higher score, or equal score and lower index).
pub fn brute_accuracy(preds: &[Vec<f64>], gts: &[BTreeSet<usize>]) -> Option<f64> {
    let mut total = 0.0;
    let mut counted = 0;
    for (p, gt) in preds.iter().zip(gts) {
        if gt.is_empty() {
            continue;
        }
        let k = gt.len();
        let mut hits = 0;
        for j in 0..p.len() {
            let beaten_by = (0..p.len())
                .filter(|&i| p[i] > p[j] || (p[i] == p[j] && i < j))
                .count();
            if beaten_by < k && gt.contains(&j) {
                hits += 1;
            }
        }
        total += hits as f64 / k as f64;
        counted += 1;
    }
    (counted > 0).then(|| total / counted as f64)
}

/// Average precision from its definition: mean over relevant items of the
/// precision of the prefix ending at that item.
pub fn brute_ap<Id: Eq + std::hash::Hash>(ranking: &[Id], relevant: &HashSet<Id>) -> f64 {
    let mut precisions = Vec::new();
    for (pos, id) in ranking.iter().enumerate() {
        if relevant.contains(id) {
            let hits = ranking[..=pos].iter().filter(|r| relevant.contains(r)).count();
            precisions.push(hits as f64 / (pos + 1) as f64);
        }
    }
    precisions.iter().sum::<f64>() / relevant.len() as f64
}

/// Forward pass written out layer by layer without the library's helpers.
pub fn straight_line_logits(model: &Mlp, x: &[f64]) -> Vec<f64> {
    let layers = model.layers();
    let mut a = x.to_vec();
    for (k, layer) in layers.iter().enumerate() {
        let mut z = vec![0.0; layer.outputs];
        for o in 0..layer.outputs {
            let mut s = layer.bias[o];
            for i in 0..layer.inputs {
                s += layer.weights[o * layer.inputs + i] * a[i];
            }
            z[o] = s;
        }
        a = if k + 1 < layers.len() {
            z.iter().map(|v| v.tanh()).collect()
        } else {
            z
        };
    }
    a
}

/// Loss written directly from its textbook form.
pub fn textbook_loss(loss: LossKind, z: &[f64], t: &[f64]) -> f64 {
    match loss {
        LossKind::SingleLabel => {
            let denom: f64 = z.iter().map(|v| v.exp()).sum();
            -z.iter()
                .zip(t)
                .map(|(zj, tj)| tj * (zj.exp() / denom).ln())
                .sum::<f64>()
        }
        LossKind::MultiLabel => z
            .iter()
            .zip(t)
            .map(|(zj, tj)| {
                let s = 1.0 / (1.0 + (-zj).exp());
                -(tj * s.ln() + (1.0 - tj) * (1.0 - s).ln())
            })
            .sum(),
    }
}

fn batch_loss(model: &Mlp, batch: &[(Vec<f64>, Vec<f64>)], loss: LossKind) -> f64 {
    batch
        .iter()
        .map(|(x, t)| textbook_loss(loss, &straight_line_logits(model, x), t))
        .sum::<f64>()
        / batch.len() as f64
}

/// Central finite differences of the mean batch loss w.r.t. every parameter,
/// in the order of `Mlp::flatten`.
pub fn numeric_gradient(
    model: &Mlp,
    batch: &[(Vec<f64>, Vec<f64>)],
    loss: LossKind,
    step: f64,
) -> Vec<f64> {
    let mut probe = model.clone();
    (0..model.param_count())
        .map(|i| {
            let orig = *probe.param_mut(i);
            *probe.param_mut(i) = orig + step;
            let up = batch_loss(&probe, batch, loss);
            *probe.param_mut(i) = orig - step;
            let down = batch_loss(&probe, batch, loss);
            *probe.param_mut(i) = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Largest relative error between two gradients; entries where both are
/// below `floor` in magnitude are compared against `floor`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Borrowed view of owned `(input, target)` pairs.
pub fn as_batch(batch: &[(Vec<f64>, Vec<f64>)]) -> Vec<(&[f64], &[f64])> {
    batch.iter().map(|(x, t)| (x.as_slice(), t.as_slice())).collect()
}
