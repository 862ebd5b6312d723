//! Neighbor-graph embedding in the style of UMAP, driven by an explicit k-nearest
//! neighbor graph so any dissimilarity can be used.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::distance::{both_set, hamming};
use super::JobControl;
use crate::error::{Error, Result};

const NEGATIVE_SAMPLE_RATE: f64 = 5.0;
const SMOOTH_KNN_TOLERANCE: f64 = 1e-5;
const MIN_K_DIST_SCALE: f64 = 1e-3;
const GRADIENT_CLIP: f64 = 4.0;
const INIT_RANGE: f64 = 10.0;

/// Neighbors of one point: `(index, distance)` sorted nearest first.
pub type Neighbors = Vec<(usize, f64)>;

/// Exact k-nearest neighbors under Russel-Rao over packed rows.
///
/// Neighbors at equal dissimilarity are ordered by Hamming distance, then index,
/// so that rows sharing the exact same missing set stay adjacent even where
/// Russel-Rao ties (e.g. a row and its supersets).
pub fn russel_rao_knn(rows: &[&[u64]], n_bits: usize, k: usize) -> Vec<Neighbors> {
    let n = rows.len();
    let k = k.min(n.saturating_sub(1));
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut keys: Vec<(u32, u32, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (n_bits as u32 - both_set(rows[i], rows[j]), hamming(rows[i], rows[j]), j))
                .collect();
            if k < keys.len() {
                keys.select_nth_unstable(k);
                keys.truncate(k);
            }
            keys.sort_unstable();
            keys.into_iter().map(|(d, _, j)| (j, d as f64 / n_bits as f64)).collect()
        })
        .collect()
}

/// Per-point `(rho, sigma)` calibrated so that the neighbor memberships of every
/// point sum to `log2(k + 1)`.
fn smooth_knn(knn: &[Neighbors]) -> Vec<(f64, f64)> {
    let mean_all = {
        let (sum, count) = knn.iter().flatten().fold((0.0, 0usize), |(s, c), (_, d)| (s + d, c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    };
    knn.iter()
        .map(|neighbors| {
            if neighbors.is_empty() {
                return (0.0, 1.0);
            }
            let target = ((neighbors.len() + 1) as f64).log2();
            let rho = neighbors.iter().map(|(_, d)| *d).find(|d| *d > 0.0).unwrap_or(0.0);
            let (mut lo, mut hi, mut mid) = (0.0_f64, f64::INFINITY, 1.0_f64);
            for _ in 0..64 {
                let psum: f64 = neighbors
                    .iter()
                    .map(|(_, d)| {
                        let d = d - rho;
                        if d > 0.0 {
                            (-d / mid).exp()
                        } else {
                            1.0
                        }
                    })
                    .sum();
                if (psum - target).abs() < SMOOTH_KNN_TOLERANCE {
                    break;
                }
                if psum > target {
                    hi = mid;
                    mid = (lo + hi) / 2.0;
                } else {
                    lo = mid;
                    mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
                }
            }
            let mean_i = neighbors.iter().map(|(_, d)| d).sum::<f64>() / neighbors.len() as f64;
            let floor = MIN_K_DIST_SCALE * if rho > 0.0 { mean_i } else { mean_all };
            (rho, mid.max(floor))
        })
        .collect()
}

/// Symmetric fuzzy union of the directed membership graph, as a directed edge list
/// holding both orientations of every undirected edge.
pub fn fuzzy_graph(knn: &[Neighbors]) -> Vec<(usize, usize, f64)> {
    let calib = smooth_knn(knn);
    let mut directed: HashMap<(usize, usize), f64> = HashMap::new();
    for (i, neighbors) in knn.iter().enumerate() {
        let (rho, sigma) = calib[i];
        for &(j, d) in neighbors {
            let w = if d - rho <= 0.0 || sigma == 0.0 { 1.0 } else { (-(d - rho) / sigma).exp() };
            directed.insert((i, j), w);
        }
    }
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (&(i, j), &w) in &directed {
        let back = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let sym = w + back - w * back;
        edges.push((i, j, sym));
        if back == 0.0 {
            edges.push((j, i, sym));
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    edges
}

/// Fits `1 / (1 + a x^(2b))` to the target membership curve defined by `min_dist`
/// and `spread` by Levenberg-Marquardt least squares.
pub fn fit_ab(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() }).collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter().zip(&ys).map(|(&x, &y)| (1.0 / (1.0 + a * x.powf(2.0 * b)) - y).powi(2)).sum()
    };
    let (mut a, mut b) = (1.0_f64, 1.0_f64);
    let mut lambda = 1e-3;
    let mut current = sse(a, b);
    for _ in 0..500 {
        // Normal equations J^T J and J^T r.
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let x2b = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let denom = 1.0 + a * x2b;
            let f = 1.0 / denom;
            let r = f - y;
            let da = -x2b / (denom * denom);
            let db = if x > 0.0 { -a * x2b * 2.0 * x.ln() / (denom * denom) } else { 0.0 };
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let (maa, mbb) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
        let det = maa * mbb - jab * jab;
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = -(mbb * ga - jab * gb) / det;
        let step_b = -(maa * gb - jab * ga) / det;
        let (na, nb) = (a + step_a, b + step_b);
        let candidate = if na > 0.0 && nb > 0.0 { sse(na, nb) } else { f64::INFINITY };
        if candidate < current {
            let improvement = current - candidate;
            a = na;
            b = nb;
            current = candidate;
            lambda = (lambda / 10.0).max(1e-12);
            if improvement < 1e-15 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

pub struct LayoutParams {
    pub min_dist: f64,
    pub n_epochs: usize,
    pub seed: u64,
}

/// Optimises a 2D layout of `n` points for the weighted edge list by stochastic
/// gradient descent with negative sampling.
pub fn optimize_layout(
    n: usize,
    edges: &[(usize, usize, f64)],
    params: &LayoutParams,
    control: &JobControl,
) -> Result<Vec<[f64; 2]>> {
    let (a, b) = fit_ab(1.0, params.min_dist);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut emb: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(-INIT_RANGE..INIT_RANGE), rng.random_range(-INIT_RANGE..INIT_RANGE)])
        .collect();
    if n < 2 || edges.is_empty() {
        return Ok(emb);
    }

    let n_epochs = params.n_epochs.max(1);
    let max_w = edges.iter().map(|e| e.2).fold(0.0_f64, f64::max);
    // Edges too weak to be sampled even once are dropped.
    let edges: Vec<&(usize, usize, f64)> = edges.iter().filter(|e| e.2 >= max_w / n_epochs as f64).collect();
    let eps: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let eps_neg: Vec<f64> = eps.iter().map(|e| e / NEGATIVE_SAMPLE_RATE).collect();
    let mut next_sample = eps.clone();
    let mut next_negative = eps_neg.clone();

    for epoch in 0..n_epochs {
        if control.is_cancelled() {
            return Err(Error::Cancelled);
        }
        let alpha = 1.0 - epoch as f64 / n_epochs as f64;
        let now = epoch as f64;
        for (e, &&(head, tail, _)) in edges.iter().enumerate() {
            if next_sample[e] > now {
                continue;
            }
            let (cur, other) = (emb[head], emb[tail]);
            let d2 = sq_dist(cur, other);
            let coeff = if d2 > 0.0 { -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0) } else { 0.0 };
            for d in 0..2 {
                let g = clip(coeff * (cur[d] - other[d])) * alpha;
                emb[head][d] += g;
                emb[tail][d] -= g;
            }
            next_sample[e] += eps[e];

            let n_neg = ((now - next_negative[e]) / eps_neg[e]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.random_range(0..n);
                if k == head {
                    continue;
                }
                let (cur, other) = (emb[head], emb[k]);
                let d2 = sq_dist(cur, other);
                let coeff = if d2 > 0.0 { 2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0)) } else { 0.0 };
                for d in 0..2 {
                    let g = if coeff > 0.0 { clip(coeff * (cur[d] - other[d])) } else { GRADIENT_CLIP };
                    emb[head][d] += g * alpha;
                }
            }
            next_negative[e] += n_neg as f64 * eps_neg[e];
        }
        control.set_progress((epoch + 1) as f64 / n_epochs as f64);
    }
    Ok(emb)
}

#[inline]
fn sq_dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
}

#[inline]
fn clip(v: f64) -> f64 {
    v.clamp(-GRADIENT_CLIP, GRADIENT_CLIP)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_parameters_match_least_squares_reference() {
        // Reference values from an independent least-squares fit of the same curve.
        for (min_dist, ea, eb) in
            [(0.1, 1.57694346, 0.89506088), (0.0, 1.9328084, 0.79049497), (0.5, 0.58303002, 1.33416699)]
        {
            let (a, b) = fit_ab(1.0, min_dist);
            assert!((a - ea).abs() < 1e-3, "a={a} expected {ea} for min_dist {min_dist}");
            assert!((b - eb).abs() < 1e-3, "b={b} expected {eb} for min_dist {min_dist}");
        }
    }

    #[test]
    fn knn_prefers_identical_rows_on_ties() {
        // Row 0 = {0}, row 1 = {0,1} (superset, same Russel-Rao), row 2 = {0} copy.
        let rows = [[0b01u64], [0b11u64], [0b01u64]];
        let refs: Vec<&[u64]> = rows.iter().map(|r| &r[..]).collect();
        let knn = russel_rao_knn(&refs, 2, 2);
        assert_eq!(knn[0][0].0, 2);
        assert_eq!(knn[0][0].1, 0.5);
        assert_eq!(knn[0][1].0, 1);
    }

    #[test]
    fn fuzzy_graph_is_symmetric() {
        let knn = vec![vec![(1, 0.2), (2, 0.5)], vec![(0, 0.2), (2, 0.3)], vec![(1, 0.3), (0, 0.5)]];
        let edges = fuzzy_graph(&knn);
        let map: HashMap<(usize, usize), f64> = edges.iter().map(|&(i, j, w)| ((i, j), w)).collect();
        for (&(i, j), &w) in &map {
            assert_eq!(map[&(j, i)], w);
            assert!(w > 0.0 && w <= 1.0);
        }
    }
}
