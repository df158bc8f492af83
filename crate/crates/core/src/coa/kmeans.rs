use rand::seq::index::sample;
use rand::Rng;

/// Lloyd's algorithm with `iterations` fixed rounds. Initial centroids are
/// distinct points drawn from `rng`. Returns the cluster label of every
/// point.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, iterations: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let k = k.clamp(1, n);
    let mut centroids: Vec<Vec<f64>> = sample(rng, n, k).into_iter().map(|i| points[i].clone()).collect();
    let mut labels = vec![0; n];
    for _ in 0..iterations {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = nearest(p, &centroids);
            if best != labels[i] {
                labels[i] = best;
                changed = true;
            }
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            // empty clusters keep their centroid
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        labels[i] = nearest(p, &centroids);
    }
    labels
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, m) in centroids.iter().enumerate() {
        let d: f64 = p.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}
