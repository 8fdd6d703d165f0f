//! Linear-solve oracle for personalized PageRank.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Stationary vector from `(I − (1−α) W') s = α e` by Gaussian elimination,
/// where `W'` sends the mass of neighborless nodes to the anchor.
pub fn direct_solve(neighbors: &[Vec<usize>], anchor: usize, alpha: f64) -> Vec<f64> {
    let n = neighbors.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for (r, row) in a.iter_mut().enumerate() {
        row[r] = 1.0;
    }
    for (w, nbrs) in neighbors.iter().enumerate() {
        if nbrs.is_empty() {
            a[anchor][w] -= 1.0 - alpha;
        }
        for &v in nbrs {
            a[v][w] -= (1.0 - alpha) / nbrs.len() as f64;
        }
    }
    a[anchor][n] = alpha;
    for p in 0..n {
        let pivot = (p..n).max_by(|&i, &j| a[i][p].abs().total_cmp(&a[j][p].abs())).unwrap();
        a.swap(p, pivot);
        for r in 0..n {
            if r != p {
                let f = a[r][p] / a[p][p];
                let pivot_row = a[p].clone();
                for (x, y) in a[r][p..].iter_mut().zip(&pivot_row[p..]) {
                    *x -= f * y;
                }
            }
        }
    }
    (0..n).map(|r| a[r][n] / a[r][r]).collect()
}

pub fn random_neighbors(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<usize>> {
    let mut nbrs = vec![Vec::new(); n];
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.5) {
                nbrs[a].push(b);
                nbrs[b].push(a);
            }
        }
    }
    nbrs
}
