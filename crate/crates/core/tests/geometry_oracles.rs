mod common;

use common::{random_graph, random_hull_point, random_table};
use proptest::prelude::*;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use spectrum_bandit_core::divergence::relative_entropy;
use spectrum_bandit_core::geometry::{
    compute_mu0, constraint_violation, covariance, decompose, kl_project, sample_configuration, PolytopePoint,
    ProjectionOptions, VertexMixture, DEFAULT_RANK_TOL,
};
use spectrum_bandit_core::linalg::symmetric_eigen;
use spectrum_bandit_core::model::enumerate_configurations;
use spectrum_bandit_core::{Configuration, Instance, Table};

/// Classical Sinkhorn scaling of a positive square matrix to unit row and
/// column sums.
fn sinkhorn(t: &Table) -> Table {
    let mut x = t.clone();
    for _ in 0..100_000 {
        for i in 0..x.rows() {
            let s = x.row_sum(i);
            for j in 0..x.cols() {
                x[(i, j)] /= s;
            }
        }
        let mut worst: f64 = 0.0;
        for j in 0..x.cols() {
            let s = x.col_sum(j);
            worst = worst.max((s - 1.0).abs());
            for i in 0..x.rows() {
                x[(i, j)] /= s;
            }
        }
        if worst < 1e-15 {
            break;
        }
    }
    x
}

#[test]
fn two_by_two_sinkhorn_example() {
    let inst = Instance::full_interference(2, 2).unwrap();
    let target = Table::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap().scaled(1.0 / 6.0);
    let p = kl_project(&target, &inst, ProjectionOptions::default()).unwrap();
    let x = p.point.scaled();
    for k in 0..2 {
        assert!((x.row_sum(k) - 1.0).abs() < 1e-8);
        assert!((x.col_sum(k) - 1.0).abs() < 1e-8);
    }
    assert!(x.max_abs_diff(&sinkhorn(&target)) < 1e-9);
}

#[test]
fn square_full_interference_is_sinkhorn() {
    let mut rng = SmallRng::seed_from_u64(11);
    for n in 2..6 {
        for _ in 0..20 {
            let inst = Instance::full_interference(n, n).unwrap();
            let target = random_table(n, n, &mut rng).map(|v| v + 0.01);
            let p = kl_project(&target, &inst, ProjectionOptions::default()).unwrap();
            assert!(p.point.scaled().max_abs_diff(&sinkhorn(&target)) < 1e-9);
        }
    }
}

/// On 2x2 full interference the hull is `[[a, 1-a], [1-a, a]]`, `a in [0, 1]`.
fn grid_minimizer(target: &Table) -> Table {
    let z = target.sum();
    let mut best = (f64::INFINITY, Table::zeros(2, 2));
    for k in 0..=1000 {
        let a = k as f64 / 1000.0;
        let q = Table::from_rows(&[[a, 1.0 - a], [1.0 - a, a]]).unwrap().scaled(0.5);
        let kl = relative_entropy(&q, &target.scaled(1.0 / z));
        if kl < best.0 {
            best = (kl, q);
        }
    }
    best.1
}

#[test]
fn two_by_two_matches_grid_search() {
    let inst = Instance::full_interference(2, 2).unwrap();
    let mut rng = SmallRng::seed_from_u64(2);
    for _ in 0..50 {
        let target = random_table(2, 2, &mut rng).map(|v| v + 1e-3);
        let p = kl_project(&target, &inst, ProjectionOptions::default()).unwrap();
        assert!(p.point.table().max_abs_diff(&grid_minimizer(&target)) < 2e-3);
    }
}

fn instances() -> Vec<Instance> {
    let mut rng = SmallRng::seed_from_u64(17);
    vec![
        Instance::full_interference(3, 3).unwrap(),
        Instance::full_interference(2, 3).unwrap(),
        Instance::full_interference(3, 2).unwrap(),
        Instance::new(random_graph(4, 0.5, &mut rng), 2).unwrap(),
        Instance::new(random_graph(5, 0.4, &mut rng), 3).unwrap(),
    ]
}

#[test]
fn generalized_pythagorean_inequality() {
    let mut rng = SmallRng::seed_from_u64(3);
    for inst in instances() {
        let n = inst.links() as f64;
        for _ in 0..50 {
            let q = random_hull_point(&inst, &mut rng).scaled(1.0 / n);
            let raw = random_table(inst.links(), inst.width(), &mut rng).map(|v| v + 1e-3);
            let target = raw.scaled(1.0 / raw.sum());
            let p = kl_project(&target, &inst, ProjectionOptions::default()).unwrap();
            let proj = p.point.table();
            let lhs = relative_entropy(&q, proj) + relative_entropy(proj, &target);
            assert!(lhs <= relative_entropy(&q, &target) + 1e-6);
        }
    }
}

#[test]
fn projection_lands_in_polytope_and_is_idempotent() {
    let mut rng = SmallRng::seed_from_u64(4);
    for inst in instances() {
        for _ in 0..20 {
            let target = random_table(inst.links(), inst.width(), &mut rng).map(|v| v * v + 1e-4);
            let p = kl_project(&target, &inst, ProjectionOptions::default()).unwrap();
            let point = PolytopePoint::new(&inst, p.point.table().clone()).unwrap();
            assert!(constraint_violation(&inst, &point.scaled()) < 1e-8);
            let again = kl_project(point.table(), &inst, ProjectionOptions::default()).unwrap();
            assert!(again.point.table().max_abs_diff(point.table()) < 1e-9);
        }
    }
}

#[test]
fn baseline_properties() {
    for inst in instances() {
        let base = compute_mu0(&inst).unwrap();
        let count = enumerate_configurations(&inst).unwrap().len() as f64;
        assert!(base.mu_min() >= 1.0 / count - 1e-15);
        assert!((base.mu0().table().sum() - 1.0).abs() < 1e-12);
    }
    // padded full interference: each link sits on each of max(n, c) channels
    // in the same number of configurations
    for (n, c) in [(2, 2), (3, 3), (2, 4), (4, 2)] {
        let base = compute_mu0(&Instance::full_interference(n, c).unwrap()).unwrap();
        assert!((1.0 / base.mu_min() - n.max(c) as f64).abs() < 1e-12);
    }
}

/// Random doubly stochastic matrix as a mixture of random permutations.
fn random_doubly_stochastic<R: Rng>(n: usize, rng: &mut R) -> Table {
    let inst = Instance::full_interference(n, n).unwrap();
    let perms = enumerate_configurations(&inst).unwrap();
    let mut t = Table::zeros(n, n);
    let k = rng.gen_range(1..=2 * n);
    let weights: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let m = &perms[rng.gen_range(0..perms.len())];
        t = t.add(&m.to_table(n).scaled(w / total));
    }
    t
}

#[test]
fn decomposition_reconstructs() {
    let mut rng = SmallRng::seed_from_u64(6);
    for n in [3, 4] {
        let inst = Instance::full_interference(n, n).unwrap();
        for _ in 0..100 {
            let point = random_doubly_stochastic(n, &mut rng);
            let mix = decompose(&point, &inst).unwrap();
            assert!(mix.marginal(n).max_abs_diff(&point) < 1e-9);
            assert!(mix.parts().len() <= n * n - n + 1);
            assert!(mix.parts().iter().all(|(_, w)| *w > 0.0));
        }
    }
}

#[test]
fn decomposition_on_general_graphs() {
    let mut rng = SmallRng::seed_from_u64(8);
    for inst in instances() {
        for _ in 0..20 {
            let point = random_hull_point(&inst, &mut rng);
            let mix = decompose(&point, &inst).unwrap();
            assert!(mix.marginal(inst.width()).max_abs_diff(&point) < 1e-8);
        }
    }
}

#[test]
fn sampling_frequencies() {
    let a = Configuration::from_channels(&[0, 1]);
    let b = Configuration::from_channels(&[1, 0]);
    let mix = VertexMixture::new(vec![(a.clone(), 0.5), (b, 0.5)]).unwrap();
    let single = VertexMixture::single(a.clone());
    let mut rng = SmallRng::seed_from_u64(9);
    let draws = 100_000;
    let hits = (0..draws).filter(|_| sample_configuration(&mix, &mut rng) == a).count();
    let sigma = (0.25 / draws as f64).sqrt();
    assert!((hits as f64 / draws as f64 - 0.5).abs() < 3.0 * sigma);
    assert!((0..100).all(|_| sample_configuration(&single, &mut rng) == a));
}

/// Three-sigma family-wise level (0.27%) split over nine cells.
const Z_NINE_CELLS: f64 = 3.9;

#[test]
fn sampled_cell_marginal() {
    let inst = Instance::full_interference(3, 3).unwrap();
    let mut rng = SmallRng::seed_from_u64(10);
    let point = random_doubly_stochastic(3, &mut rng);
    let mix = decompose(&point, &inst).unwrap();
    let draws = 100_000;
    let mut counts = Table::zeros(3, 3);
    for _ in 0..draws {
        for (i, j) in sample_configuration(&mix, &mut rng).pairs() {
            counts[(i, j)] += 1.0;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let p = point[(i, j)];
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((counts[(i, j)] / draws as f64 - p).abs() <= Z_NINE_CELLS * sigma + 1e-12);
        }
    }
}

/// Orthogonal projection onto the span of the configuration vectors by
/// Gram-Schmidt.
fn span_projection(configs: &[Configuration], cols: usize, x: &[f64]) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for m in configs {
        let mut v = m.to_table(cols).into_vec();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(p, q)| p * q).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= d * bi;
                }
            }
        }
        let norm = v.iter().map(|p| p * p).sum::<f64>().sqrt();
        if norm > 1e-9 {
            basis.push(v.into_iter().map(|p| p / norm).collect());
        }
    }
    let mut out = vec![0.0; x.len()];
    for b in &basis {
        let d: f64 = x.iter().zip(b).map(|(p, q)| p * q).sum();
        for (o, bi) in out.iter_mut().zip(b) {
            *o += d * bi;
        }
    }
    out
}

#[test]
fn pseudo_inverse_projects_onto_span() {
    let mut rng = SmallRng::seed_from_u64(12);
    for inst in instances() {
        let w = inst.width();
        let base = compute_mu0(&inst).unwrap();
        let cov = covariance(&base.uniform(), w, DEFAULT_RANK_TOL);
        let dim = inst.links() * w;
        for _ in 0..50 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let got = cov.apply_pinv(&cov.apply_sigma(&x));
            let want = span_projection(base.configurations(), w, &x);
            for (g, e) in got.iter().zip(&want) {
                assert!((g - e).abs() < 1e-7);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_psd_with_marginal_diagonal(seed in any::<u64>()) {
        let mut rng = SmallRng::seed_from_u64(seed);
        let inst = Instance::full_interference(3, 3).unwrap();
        let point = random_hull_point(&inst, &mut rng);
        let mix = decompose(&point, &inst).unwrap();
        let cov = covariance(&mix, 3, DEFAULT_RANK_TOL);
        let dim = cov.dim();
        let sigma = cov.sigma();
        let marginal = mix.marginal(3);
        for a in 0..dim {
            prop_assert!((sigma[a * dim + a] - marginal.as_slice()[a]).abs() < 1e-12);
            for b in 0..dim {
                prop_assert!((sigma[a * dim + b] - sigma[b * dim + a]).abs() < 1e-10);
            }
        }
        let eig = symmetric_eigen(sigma, dim);
        prop_assert!(eig.values.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn projection_never_increases_divergence_to_hull_points(seed in any::<u64>()) {
        let mut rng = SmallRng::seed_from_u64(seed);
        let inst = Instance::full_interference(3, 3).unwrap();
        let target = random_table(3, 3, &mut rng).map(|v| v + 1e-2);
        let target = target.scaled(1.0 / target.sum());
        let proj = kl_project(&target, &inst, ProjectionOptions::default()).unwrap();
        let q = random_hull_point(&inst, &mut rng).scaled(1.0 / 3.0);
        prop_assert!(relative_entropy(&q, proj.point.table()) <= relative_entropy(&q, &target) + 1e-9);
    }
}
