//! Lloyd's k-means with k-means++ seeding and restarts.

use log::warn;
use rand::Rng;

use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Vec<Vec<f64>>,
    /// Cluster of each point.
    pub labels: Vec<usize>,
    /// Sum of squared distances to the assigned centers.
    pub inertia: f64,
}

impl Clustering {
    pub fn n_clusters(&self) -> usize {
        self.centers.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.centers.len()];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, dist2(p, c)))
        .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b })
}

fn seed_centers<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            // every point already sits on a center
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = d.len() - 1;
        for (i, &w) in d.iter().enumerate() {
            if u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        centers.push(points[pick].clone());
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize) -> Clustering {
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (p, l) in points.iter().zip(labels.iter_mut()) {
            let (c, _) = nearest(p, &centers);
            if *l != c {
                *l = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for ((c, s), &n) in centers.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|x| x / n as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| dist2(p, &centers[l]))
        .sum();
    Clustering {
        centers,
        labels,
        inertia,
    }
}

/// Drops empty clusters and merges clusters with identical centers.
fn compact(c: Clustering) -> Clustering {
    let sizes = c.sizes();
    let mut remap = vec![usize::MAX; c.centers.len()];
    let mut centers: Vec<Vec<f64>> = Vec::new();
    for (i, center) in c.centers.iter().enumerate() {
        if sizes[i] == 0 {
            continue;
        }
        match centers.iter().position(|x| x == center) {
            Some(j) => remap[i] = j,
            None => {
                remap[i] = centers.len();
                centers.push(center.clone());
            }
        }
    }
    if centers.len() < c.centers.len() {
        warn!(
            "k-means: {} of {} clusters were empty or duplicated and have been merged",
            c.centers.len() - centers.len(),
            c.centers.len()
        );
    }
    Clustering {
        labels: c.labels.iter().map(|&l| remap[l]).collect(),
        centers,
        inertia: c.inertia,
    }
}

/// Best of `restarts` runs by inertia; deterministic in `seed`.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Clustering {
    assert!(
        !points.is_empty() && k >= 1,
        "k-means needs points and k >= 1"
    );
    let mut best: Option<Clustering> = None;
    for r in 0..restarts.max(1) {
        let mut rng = stream(seed, r as u64);
        let centers = seed_centers(points, k.min(points.len()), &mut rng);
        let c = lloyd(points, centers, 300);
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    }
    compact(best.expect("at least one restart"))
}
