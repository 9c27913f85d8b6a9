mod common;

use common::graph_oracle::{compare, sweep, weighted};

#[test]
fn library_matches_brute_force_on_all_small_graphs() {
    let (checked, failure) = sweep(2024);
    assert!(failure.is_none(), "{}", failure.unwrap());
    // 1 + 2 + 8 + 64 + 1024 topologies, three weightings each
    assert_eq!(checked, 3 * 1099);
}

#[test]
fn dense_random_graphs_match() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let edges: Vec<(usize, usize)> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        let ws: Vec<f64> = (0..edges.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let w = weighted(5, &edges, |k| ws[k]);
        assert_eq!(compare(&w), None);
    }
}
