//! Seeded k-means, used to build data-driven EM starting points.
//!
//! Standard k-means++ seeding followed by Lloyd iterations, fully
//! deterministic for a given seed: ties break toward lower indices and
//! empty clusters are repaired by a fixed rule, so the partition is a pure
//! function of (points, k, seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_ITER: usize = 100;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Partition `points` into `k` clusters; returns one cluster index per
/// point. Requires 1 <= k <= points.len().
pub fn assign(points: &[&[f64]], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n, got k={k}, n={n}");
    if k == 1 {
        return vec![0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding: next centroid drawn with probability proportional
    // to squared distance from the chosen set.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].to_vec());
    let mut best: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = best.iter().sum();
        let idx = if total > 0.0 {
            let r = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in best.iter().enumerate() {
                acc += d;
                if r < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with some centroid; any pick works.
            rng.gen_range(0..n)
        };
        centroids.push(points[idx].to_vec());
        for (b, p) in best.iter_mut().zip(points) {
            let d = dist2(p, centroids.last().unwrap());
            if d < *b {
                *b = d;
            }
        }
    }

    let dim = points[0].len();
    let mut assignment = vec![0usize; n];
    for _ in 0..MAX_ITER {
        // Assignment step; ties go to the lower cluster index.
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best_c = 0;
            let mut best_d = dist2(p, &centroids[0]);
            for (c, cent) in centroids.iter().enumerate().skip(1) {
                let d = dist2(p, cent);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            if assignment[i] != best_c {
                assignment[i] = best_c;
                changed = true;
            }
        }

        // Empty-cluster repair: hand over the point currently farthest
        // from its centroid (lowest index on ties), one cluster at a time.
        let mut counts = vec![0usize; k];
        for &c in &assignment {
            counts[c] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let mut far_i = usize::MAX;
            let mut far_d = -1.0;
            for (i, p) in points.iter().enumerate() {
                if counts[assignment[i]] <= 1 {
                    continue;
                }
                let d = dist2(p, &centroids[assignment[i]]);
                if d > far_d {
                    far_d = d;
                    far_i = i;
                }
            }
            if far_i != usize::MAX {
                counts[assignment[far_i]] -= 1;
                assignment[far_i] = empty;
                counts[empty] = 1;
                changed = true;
            }
        }

        // Update step.
        let mut sums = vec![vec![0.0; dim]; k];
        for (i, p) in points.iter().enumerate() {
            for (s, &v) in sums[assignment[i]].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (cent, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *cent = s / counts[c] as f64;
                }
            }
        }

        if !changed {
            break;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::DirichletParams;

    fn blobs() -> (Vec<Vec<f64>>, Vec<usize>) {
        // Three tight Dirichlet clusters near distinct corners.
        let specs = [
            vec![80.0, 5.0, 5.0],
            vec![5.0, 80.0, 5.0],
            vec![5.0, 5.0, 80.0],
        ];
        let mut points = Vec::new();
        let mut truth = Vec::new();
        for (c, alpha) in specs.iter().enumerate() {
            let p = DirichletParams::new(alpha.clone()).unwrap();
            for y in p.sample_n(40 + c as u64, 50) {
                points.push(y.into_inner());
                truth.push(c);
            }
        }
        (points, truth)
    }

    fn pair_agreement(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let mut same = 0usize;
        let mut total = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                total += 1;
                if (a[i] == a[j]) == (b[i] == b[j]) {
                    same += 1;
                }
            }
        }
        same as f64 / total as f64
    }

    #[test]
    fn recovers_separated_clusters() {
        let (points, truth) = blobs();
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        let got = assign(&refs, 3, 99);
        assert!(pair_agreement(&got, &truth) > 0.99);
    }

    #[test]
    fn deterministic_per_seed() {
        let (points, _) = blobs();
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        assert_eq!(assign(&refs, 3, 7), assign(&refs, 3, 7));
    }

    #[test]
    fn single_cluster_fast_path() {
        let (points, _) = blobs();
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
        assert!(assign(&refs, 1, 0).iter().all(|&c| c == 0));
    }

    #[test]
    fn splits_two_obvious_groups() {
        let pts = [
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![10.0, 10.0],
            vec![10.1, 10.0],
        ];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let a = assign(&refs, 2, 3);
        assert_eq!(a[0], a[1]);
        assert_eq!(a[2], a[3]);
        assert_ne!(a[0], a[2]);
    }
}
