mod common;

use cfrec_core::data::{gen_synthetic, split_train_test, SyntheticConfig};
use cfrec_core::recommender::train_lightgcn;
use cfrec_core::surrogate::{fit_surrogate, train_surrogate};
use cfrec_core::{l_hop_subgraph, symmetrize, BipartiteGraph, BlackBox, Error, SurrogateConfig, TrainConfig};
use common::{gaussian, naive_forward, random_instance};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn forward_matches_edge_by_edge_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let inst = random_instance(&mut rng, 3, 4, 9, (3, 5, 2), 0, 1);
        let s = &inst.scorer;
        let mut masks = vec![s.surrogate().full_mask(), vec![0.0; s.subgraph().num_edges()]];
        masks.push((0..s.subgraph().num_edges()).map(|_| rng.random::<f64>()).collect());
        for mask in masks {
            let ours = s.surrogate().forward(&mask, s.features()).unwrap();
            let theirs = naive_forward(s, &mask);
            let diff = (&ours - &theirs).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            assert!(diff < 1e-12, "{diff}");
        }
    }
}

/// Solves `min_w ‖X w − t‖²` column by column from the normal equations.
fn least_squares(x: &Array2<f64>, t: &Array2<f64>) -> Array2<f64> {
    let xtx = x.t().dot(x);
    let xtt = x.t().dot(t);
    let n = xtx.nrows();
    let mut out = Array2::zeros((n, t.ncols()));
    for c in 0..t.ncols() {
        let mut a = xtx.clone();
        let mut b: Array1<f64> = xtt.column(c).to_owned();
        for p in 0..n {
            let pivot = (p..n)
                .max_by(|&i, &j| a[[i, p]].abs().total_cmp(&a[[j, p]].abs()))
                .unwrap();
            for j in 0..n {
                a.swap([p, j], [pivot, j]);
            }
            b.swap(p, pivot);
            for r in p + 1..n {
                let f = a[[r, p]] / a[[p, p]];
                for j in p..n {
                    a[[r, j]] -= f * a[[p, j]];
                }
                b[r] -= f * b[p];
            }
        }
        for p in (0..n).rev() {
            let tail: f64 = (p + 1..n).map(|j| a[[p, j]] * out[[j, c]]).sum();
            out[[p, c]] = (b[p] - tail) / a[[p, p]];
        }
    }
    out
}

#[test]
fn fits_a_linear_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let graph = BipartiteGraph::from_index_edges(2, 3, [(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap();
    let sg = l_hop_subgraph(&graph, 0, 2, 2).unwrap();
    let x = gaussian(&mut rng, sg.num_nodes(), 6, 1.0);
    let w = gaussian(&mut rng, 6, 3, 0.05);
    let targets = x.dot(&w);

    // the target is exactly reachable by a linear self map
    let fitted = least_squares(&x, &targets);
    let residual = (x.dot(&fitted) - &targets).mapv(|d| d * d).sum();
    assert!(residual < 1e-20, "{residual}");

    let cfg = SurrogateConfig {
        hidden_dim: 16,
        epochs: 3000,
        ..SurrogateConfig::default()
    };
    let (_, summary) = fit_surrogate(symmetrize(&sg), &x, &targets, &cfg).unwrap();
    let per_node = summary.final_loss / sg.num_nodes() as f64;
    assert!(per_node < 1e-4, "{per_node}");
    assert!(summary.losses.last().unwrap() < summary.losses.first().unwrap());
}

#[test]
fn same_seed_same_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let graph = BipartiteGraph::from_index_edges(2, 2, [(0, 0), (1, 0), (1, 1)]).unwrap();
    let sg = l_hop_subgraph(&graph, 0, 1, 2).unwrap();
    let x = gaussian(&mut rng, 4, 3, 1.0);
    let t = gaussian(&mut rng, 4, 2, 0.3);
    let cfg = SurrogateConfig {
        epochs: 50,
        ..SurrogateConfig::default()
    };
    let (a, _) = fit_surrogate(symmetrize(&sg), &x, &t, &cfg).unwrap();
    let (b, _) = fit_surrogate(symmetrize(&sg), &x, &t, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trained_surrogate_tracks_black_box() {
    let xs = gen_synthetic(&SyntheticConfig {
        num_users: 40,
        num_items: 60,
        intra_prob: 0.2,
        noise_prob: 0.01,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let ds = split_train_test("tiny", &xs, 0.8, 0).unwrap();
    let model = train_lightgcn(
        &ds.train,
        &TrainConfig {
            epochs: 100,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let bb = BlackBox::new(model, ds.train).unwrap();
    let item = bb.top_k(0, 5).unwrap().items[0].0;
    let sg = l_hop_subgraph(bb.graph(), 0, item, 2).unwrap();
    let cfg = SurrogateConfig {
        k: 5,
        ..SurrogateConfig::default()
    };
    match train_surrogate(&bb, &sg, &cfg) {
        Ok((_, report)) => assert!(report.mean_mse <= cfg.max_mean_mse && report.topk_overlap >= 0.8),
        Err(Error::SurrogateRejected(report)) => panic!("rejected: {report:?}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn empty_views_and_bad_shapes_are_errors() {
    let graph = BipartiteGraph::from_index_edges(1, 1, [(0, 0)]).unwrap();
    let sg = l_hop_subgraph(&graph, 0, 0, 1).unwrap();
    let x = Array2::zeros((2, 2));
    let t = Array2::zeros((3, 2));
    assert!(fit_surrogate(symmetrize(&sg), &x, &t, &SurrogateConfig::default()).is_err());
}
