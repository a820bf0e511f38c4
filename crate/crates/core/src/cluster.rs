//! Flat clustering over feature vectors: kMeans with repeated or seeded
//! initialization, flat-kernel mean shift with bandwidth estimation, and
//! silhouette validation. Used for contour class derivation and for the
//! bootstrap classifiers of the automatic annotation.

use crate::config::ClstSetCfg;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONV_EPS: f64 = 1e-9;

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn mean_row(x: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let dim = x[idx[0]].len();
    let mut m = vec![0.0; dim];
    for &i in idx {
        for (s, v) in m.iter_mut().zip(&x[i]) {
            *s += v;
        }
    }
    for s in &mut m {
        *s /= idx.len() as f64;
    }
    m
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    /// Inertia after each assignment pass; non-increasing.
    pub history: Vec<f64>,
}

/// Lloyd iterations from explicit initial centroids. A cluster that loses
/// all members is re-seeded at the point farthest from its assigned
/// centroid; iteration stops when no centroid moves more than 1e-9.
pub fn kmeans_seeded(x: &[Vec<f64>], init: &[Vec<f64>], max_iter: usize) -> KMeansFit {
    assert!(!x.is_empty() && !init.is_empty());
    let k = init.len().min(x.len());
    let mut cntr: Vec<Vec<f64>> = init[..k].to_vec();
    let mut labels = vec![0usize; x.len()];
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut inertia = 0.0;
        for (i, row) in x.iter().enumerate() {
            let (best, d) = nearest(row, &cntr);
            labels[i] = best;
            inertia += d;
        }
        history.push(inertia);
        let mut next = Vec::with_capacity(k);
        for c in 0..k {
            let members: Vec<usize> =
                (0..x.len()).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                let far = (0..x.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(&x[a], &cntr[labels[a]]);
                        let db = sq_dist(&x[b], &cntr[labels[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                next.push(x[far].clone());
            } else {
                next.push(mean_row(x, &members));
            }
        }
        let moved = cntr
            .iter()
            .zip(&next)
            .map(|(a, b)| dist(a, b))
            .fold(0.0f64, f64::max);
        cntr = next;
        if moved < CONV_EPS {
            break;
        }
    }
    let mut inertia = 0.0;
    for (i, row) in x.iter().enumerate() {
        let (best, d) = nearest(row, &cntr);
        labels[i] = best;
        inertia += d;
    }
    history.push(inertia);
    KMeansFit { centroids: cntr, labels, inertia, history }
}

fn nearest(row: &[f64], cntr: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (c, cen) in cntr.iter().enumerate() {
        let d = sq_dist(row, cen);
        if d < bd {
            bd = d;
            best = c;
        }
    }
    (best, bd)
}

/// kMeans with `n_init` random restarts (centroids drawn from distinct data
/// rows); the run with the lowest inertia wins.
pub fn kmeans(
    x: &[Vec<f64>],
    k: usize,
    n_init: usize,
    max_iter: usize,
    rng: &mut ChaCha8Rng,
) -> KMeansFit {
    assert!(!x.is_empty());
    let k = k.clamp(1, x.len());
    let mut best: Option<KMeansFit> = None;
    for _ in 0..n_init.max(1) {
        let init = sample_rows(x, k, rng);
        let fit = kmeans_seeded(x, &init, max_iter);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    best.unwrap()
}

/// `n` distinct rows by partial Fisher-Yates.
fn sample_rows(x: &[Vec<f64>], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    for i in 0..n.min(x.len()) {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    idx[..n.min(x.len())].iter().map(|&i| x[i].clone()).collect()
}

/// Mean over sampled rows of the distance to their k-th nearest neighbour
/// (k = quantile fraction of the data size, self included).
pub fn estimate_bandwidth(
    x: &[Vec<f64>],
    quantile: f64,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    assert!(!x.is_empty());
    let k = ((x.len() as f64 * quantile) as usize).max(1);
    let picked: Vec<usize> = if n_samples > 0 && n_samples < x.len() {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        for i in 0..n_samples {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        idx.truncate(n_samples);
        idx
    } else {
        (0..x.len()).collect()
    };
    let mut total = 0.0;
    for &i in &picked {
        let mut d: Vec<f64> = x.iter().map(|row| dist(&x[i], row)).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        total += d[k.min(d.len()) - 1];
    }
    total / picked.len() as f64
}

#[derive(Debug, Clone)]
pub struct MeanShiftFit {
    /// Cluster modes, strongest first.
    pub modes: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// Flat-kernel mean shift. Seeds are either all points or, with
/// `bin_seeding`, the centers of bandwidth-sized grid bins holding at least
/// `min_bin_freq` points. Converged seeds within one bandwidth of a
/// stronger mode are merged; every point joins its nearest mode.
pub fn mean_shift(
    x: &[Vec<f64>],
    bandwidth: f64,
    bin_seeding: bool,
    min_bin_freq: usize,
    max_iter: usize,
) -> MeanShiftFit {
    assert!(!x.is_empty());
    if bandwidth <= 0.0 {
        log::warn!("mean shift: degenerate bandwidth; single cluster");
        return MeanShiftFit { modes: vec![mean_row(x, &(0..x.len()).collect::<Vec<_>>())], labels: vec![0; x.len()] };
    }
    let seeds: Vec<Vec<f64>> = if bin_seeding {
        bin_seeds(x, bandwidth, min_bin_freq)
    } else {
        x.to_vec()
    };
    let stop = 1e-3 * bandwidth;
    // (population within bandwidth at convergence, mode position)
    let mut found: Vec<(usize, Vec<f64>)> = Vec::new();
    for seed in seeds {
        let mut m = seed;
        let mut members = 0usize;
        for _ in 0..max_iter.max(1) {
            let idx: Vec<usize> = x
                .iter()
                .enumerate()
                .filter(|(_, row)| dist(&m, row) <= bandwidth)
                .map(|(i, _)| i)
                .collect();
            if idx.is_empty() {
                break;
            }
            members = idx.len();
            let next = mean_row(x, &idx);
            let shift = dist(&m, &next);
            m = next;
            if shift < stop {
                break;
            }
        }
        if members > 0 {
            found.push((members, m));
        }
    }
    if found.is_empty() {
        return MeanShiftFit { modes: vec![x[0].clone()], labels: vec![0; x.len()] };
    }
    found.sort_by(|a, b| {
        b.0.cmp(&a.0).then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .find_map(|(u, v)| u.partial_cmp(v).filter(|o| o.is_ne()))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut modes: Vec<Vec<f64>> = Vec::new();
    for (_, m) in found {
        if modes.iter().all(|kept| dist(kept, &m) > bandwidth) {
            modes.push(m);
        }
    }
    let labels = x.iter().map(|row| nearest(row, &modes).0).collect();
    MeanShiftFit { modes, labels }
}

/// Grid-bin seeds: points snapped to a bandwidth lattice; bins with at
/// least `min_bin_freq` members are returned as seed positions.
fn bin_seeds(x: &[Vec<f64>], bandwidth: f64, min_bin_freq: usize) -> Vec<Vec<f64>> {
    use std::collections::HashMap;
    let mut bins: HashMap<Vec<i64>, usize> = HashMap::new();
    for row in x {
        let key: Vec<i64> = row.iter().map(|v| (v / bandwidth).round() as i64).collect();
        *bins.entry(key).or_insert(0) += 1;
    }
    let mut keys: Vec<(Vec<i64>, usize)> =
        bins.into_iter().filter(|(_, n)| *n >= min_bin_freq).collect();
    if keys.is_empty() {
        log::warn!("mean shift: no bin holds {min_bin_freq} points; seeding from all rows");
        return x.to_vec();
    }
    keys.sort();
    keys.into_iter()
        .map(|(k, _)| k.into_iter().map(|v| v as f64 * bandwidth).collect())
        .collect()
}

/// Per-point silhouette values. Points in singleton clusters score 0.
pub fn silhouette_samples(x: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
    let n = x.len();
    let classes: Vec<usize> = {
        let mut c = labels.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut out = vec![0.0; n];
    if classes.len() < 2 {
        return out;
    }
    for i in 0..n {
        let own = labels[i];
        let mut same = 0.0;
        let mut n_same = 0usize;
        let mut other_means: Vec<(usize, f64, usize)> =
            classes.iter().filter(|&&c| c != own).map(|&c| (c, 0.0, 0)).collect();
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = dist(&x[i], &x[j]);
            if labels[j] == own {
                same += d;
                n_same += 1;
            } else if let Some(slot) =
                other_means.iter_mut().find(|(c, _, _)| *c == labels[j])
            {
                slot.1 += d;
                slot.2 += 1;
            }
        }
        if n_same == 0 {
            out[i] = 0.0;
            continue;
        }
        let a = same / n_same as f64;
        let b = other_means
            .iter()
            .filter(|(_, _, cnt)| *cnt > 0)
            .map(|(_, s, cnt)| s / *cnt as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        out[i] = if denom > 0.0 { (b - a) / denom } else { 0.0 };
    }
    out
}

/// Mean silhouette; NaN when fewer than two clusters are populated.
pub fn silhouette_mean(x: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return f64::NAN;
    }
    let s = silhouette_samples(x, labels);
    s.iter().sum::<f64>() / s.len() as f64
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Mean silhouette; NaN for a single cluster.
    pub val: f64,
}

/// Clustering entry point driven by a `clst` config subtree. For
/// `mtd=kmeans` with `init=meanShift` the mean shift modes become the
/// initial centroids; plain `random` init uses repeated random restarts.
pub fn cluster(x: &[Vec<f64>], cfg: &ClstSetCfg, seed: u64) -> ClusterOutcome {
    assert!(!x.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bw = |rng: &mut ChaCha8Rng| {
        if cfg.mean_shift.bandwidth > 0.0 {
            cfg.mean_shift.bandwidth
        } else {
            estimate_bandwidth(
                x,
                cfg.estimate_bandwidth.quantile,
                cfg.estimate_bandwidth.n_samples,
                rng,
            )
        }
    };
    let (labels, centroids) = if cfg.mtd == "kmeans" {
        let fit = if cfg.k_means.init == "meanShift" {
            let b = bw(&mut rng);
            let ms = mean_shift(
                x,
                b,
                cfg.mean_shift.bin_seeding,
                cfg.mean_shift.min_bin_freq,
                cfg.k_means.max_iter,
            );
            kmeans_seeded(x, &ms.modes, cfg.k_means.max_iter)
        } else {
            kmeans(x, cfg.k_means.n_cluster, cfg.k_means.n_init, cfg.k_means.max_iter, &mut rng)
        };
        (fit.labels, fit.centroids)
    } else {
        let b = bw(&mut rng);
        let ms = mean_shift(
            x,
            b,
            cfg.mean_shift.bin_seeding,
            cfg.mean_shift.min_bin_freq,
            cfg.k_means.max_iter,
        );
        (ms.labels, ms.modes)
    };
    let val = silhouette_mean(x, &labels);
    ClusterOutcome { labels, centroids, val }
}
