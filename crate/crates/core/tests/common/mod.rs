//! Independent reference implementations used only by tests.
//!
//! None of these call into the library's metric, edit-distance or fitting
//! code; they recompute everything the slow, obvious way.

#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bin of `p` by scanning the explicit edges `[m/M, (m+1)/M)`, last bin closed.
pub fn oracle_bin_of(p: f64, bins: usize) -> usize {
    for m in 0..bins {
        let lo = m as f64 / bins as f64;
        let hi = (m + 1) as f64 / bins as f64;
        if p >= lo && (p < hi || m == bins - 1) {
            return m;
        }
    }
    unreachable!("p outside [0, 1]")
}

/// Per-bin (members' predictions, members' outcomes).
fn oracle_groups(preds: &[f64], outcomes: &[u8], bins: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut groups = vec![(Vec::new(), Vec::new()); bins];
    for (i, &p) in preds.iter().enumerate() {
        let m = oracle_bin_of(p, bins);
        groups[m].0.push(p);
        groups[m].1.push(f64::from(outcomes[i]));
    }
    groups
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn oracle_ece(preds: &[f64], outcomes: &[u8], bins: usize) -> f64 {
    let n = preds.len() as f64;
    oracle_groups(preds, outcomes, bins)
        .iter()
        .filter(|(p, _)| !p.is_empty())
        .map(|(p, y)| p.len() as f64 / n * (mean(y) - mean(p)).abs())
        .sum()
}

pub fn oracle_mce(preds: &[f64], outcomes: &[u8], bins: usize) -> f64 {
    oracle_groups(preds, outcomes, bins)
        .iter()
        .filter(|(p, _)| !p.is_empty())
        .map(|(p, y)| (mean(y) - mean(p)).abs())
        .fold(0.0, f64::max)
}

pub fn oracle_brier(preds: &[f64], outcomes: &[u8]) -> f64 {
    let mut total = 0.0;
    for i in 0..preds.len() {
        let d = preds[i] - f64::from(outcomes[i]);
        total += d * d;
    }
    total / preds.len() as f64
}

pub fn oracle_bss(preds: &[f64], outcomes: &[u8], reference: f64) -> f64 {
    let constant = vec![reference; preds.len()];
    1.0 - oracle_brier(preds, outcomes) / oracle_brier(&constant, outcomes)
}

/// Random instance with `n <= max_n` predictions, some snapped to bin edges.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_bins: usize) -> (Vec<f64>, Vec<u8>, usize) {
    let n = rng.random_range(1..=max_n);
    let bins = rng.random_range(1..=max_bins);
    let preds = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => rng.random_range(0..=bins) as f64 / bins as f64,
            _ => rng.random::<f64>(),
        })
        .collect();
    let outcomes = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    (preds, outcomes, bins)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Breadth-first search over single-character edits from `a` until `b` is
/// reached. Intermediate strings are bounded to `max(|a|, |b|) + 1` chars
/// over the given alphabet.
pub fn oracle_edit_distance(a: &str, b: &str, alphabet: &[char]) -> usize {
    let limit = a.chars().count().max(b.chars().count()) + 1;
    let mut seen = HashSet::from([a.to_string()]);
    let mut queue = VecDeque::from([(a.to_string(), 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if s == b {
            return d;
        }
        let chars: Vec<char> = s.chars().collect();
        let mut next = Vec::new();
        for i in 0..chars.len() {
            let mut del = chars.clone();
            del.remove(i);
            next.push(del);
            for &c in alphabet {
                if c != chars[i] {
                    let mut sub = chars.clone();
                    sub[i] = c;
                    next.push(sub);
                }
            }
        }
        if chars.len() < limit {
            for i in 0..=chars.len() {
                for &c in alphabet {
                    let mut ins = chars.clone();
                    ins.insert(i, c);
                    next.push(ins);
                }
            }
        }
        for n in next {
            let n: String = n.into_iter().collect();
            if seen.insert(n.clone()) {
                queue.push_back((n, d + 1));
            }
        }
    }
    unreachable!("target always reachable")
}

/// Every string over `alphabet` with length `0..=max_len`.
pub fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        let mut grown = Vec::new();
        for s in &frontier {
            for &c in alphabet {
                let mut t = s.clone();
                t.push(c);
                grown.push(t);
            }
        }
        out.extend(grown.iter().cloned());
        frontier = grown;
    }
    out
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draws `n` samples with latent `z ~ N(0, 1)`, `conf = sigmoid(z)` and
/// labels from `Bernoulli(sigmoid(a z + b))`.
pub fn platt_samples(seed: u64, n: usize, a: f64, b: f64) -> Vec<(f64, u8)> {
    platt_samples_with_std(seed, n, a, b, 1.0)
}

/// As [`platt_samples`] with `z ~ N(0, std)`.
pub fn platt_samples_with_std(seed: u64, n: usize, a: f64, b: f64, std: f64) -> Vec<(f64, u8)> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| {
            let unit: f64 = StandardNormal.sample(&mut rng);
            let z = std * unit;
            let y = u8::from(rng.random::<f64>() < sigmoid(a * z + b));
            (sigmoid(z), y)
        })
        .collect()
}

/// `E[sigmoid(a Z + b)]` for `Z ~ N(mean, std)` by composite Simpson
/// quadrature over `mean +/- 10 std`.
pub fn expected_rate(a: f64, b: f64, mean: f64, std: f64) -> f64 {
    let steps = 20_000;
    let (lo, hi) = (mean - 10.0 * std, mean + 10.0 * std);
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| {
        let density = (-(z - mean).powi(2) / (2.0 * std * std)).exp() / (std * (2.0 * std::f64::consts::PI).sqrt());
        sigmoid(a * z + b) * density
    };
    let mut total = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * f(lo + i as f64 * h);
    }
    total * h / 3.0
}

/// Central finite-difference gradient of `f` at `(a, b)`.
pub fn finite_difference(f: impl Fn(f64, f64) -> f64, a: f64, b: f64, h: f64) -> [f64; 2] {
    [
        (f(a + h, b) - f(a - h, b)) / (2.0 * h),
        (f(a, b + h) - f(a, b - h)) / (2.0 * h),
    ]
}
