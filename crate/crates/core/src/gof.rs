//! Chi-squared goodness-of-fit helpers for sampler checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn p_value(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64).expect("dof > 0").sf(stat)
}

/// Counts of each value in `0..=max(values)`.
pub fn histogram(values: &[u64]) -> Vec<u64> {
    let top = values.iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0u64; top + 1];
    for &v in values {
        h[v as usize] += 1;
    }
    h
}

/// Merges consecutive bins until each group reaches `min_weight` according
/// to `weight`; a short final group joins its predecessor.
fn group_bins(
    n_bins: usize,
    min_weight: f64,
    weight: impl Fn(usize) -> f64,
) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for i in 0..n_bins {
        acc += weight(i);
        if acc >= min_weight {
            groups.push((start, i + 1));
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < n_bins {
        match groups.last_mut() {
            Some(last) => last.1 = n_bins,
            None => groups.push((0, n_bins)),
        }
    }
    groups
}

/// One-sample test of `observed` counts against `probs`; any probability
/// missing from `probs` is lumped into the last bin.
pub fn chi2_gof(observed: &[u64], probs: &[f64]) -> GofResult {
    let n_bins = observed.len().max(probs.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let prob = |i: usize| probs.get(i).copied().unwrap_or(0.0);
    let count = |i: usize| observed.get(i).copied().unwrap_or(0) as f64;
    let mut p: Vec<f64> = (0..n_bins).map(prob).collect();
    let rest = (1.0 - p.iter().sum::<f64>()).max(0.0);
    if let Some(last) = p.last_mut() {
        *last += rest;
    }
    let groups = group_bins(n_bins, 5.0, |i| n * p[i]);
    let mut stat = 0.0;
    for &(a, b) in &groups {
        let e: f64 = n * p[a..b].iter().sum::<f64>();
        let o: f64 = (a..b).map(count).sum();
        if e > 0.0 {
            stat += (o - e).powi(2) / e;
        }
    }
    let dof = groups.len().saturating_sub(1);
    GofResult {
        statistic: stat,
        dof,
        p_value: p_value(stat, dof),
    }
}

/// Two-sample homogeneity test on count vectors over the same bins.
pub fn chi2_two_sample(a: &[u64], b: &[u64]) -> GofResult {
    let n_bins = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0) as f64;
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let groups = group_bins(n_bins, 10.0, |i| get(a, i) + get(b, i));
    let mut stat = 0.0;
    for &(lo, hi) in &groups {
        let oa: f64 = (lo..hi).map(|i| get(a, i)).sum();
        let ob: f64 = (lo..hi).map(|i| get(b, i)).sum();
        let pooled = (oa + ob) / (na + nb);
        let (ea, eb) = (na * pooled, nb * pooled);
        if ea > 0.0 {
            stat += (oa - ea).powi(2) / ea;
        }
        if eb > 0.0 {
            stat += (ob - eb).powi(2) / eb;
        }
    }
    let dof = groups.len().saturating_sub(1);
    GofResult {
        statistic: stat,
        dof,
        p_value: p_value(stat, dof),
    }
}

/// Tests samples against Exponential(`rate`) using `bins` equiprobable cells.
pub fn exponential_gof(samples: &[f64], rate: f64, bins: usize) -> GofResult {
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let u = 1.0 - (-rate * x).exp();
        let idx = ((u * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    chi2_gof(&counts, &vec![1.0 / bins as f64; bins])
}
