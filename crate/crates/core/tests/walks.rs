use hyperwalk::estimate::{distribution_entropy, tree_depth_law, tree_entropy};
use hyperwalk::geom::{self, Isometry};
use hyperwalk::walks::matrix::{matrix_walk, MatrixDistribution};
use hyperwalk::walks::{pq_distributions, pq_walk, right_angled_walk, tree_step, Frame, TessellationSpec};
use hyperwalk::{Mobius, Point};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn step() -> impl Strategy<Value = Mobius> {
    (0.0..std::f64::consts::TAU, 0.0..4.0f64)
        .prop_map(|(phi, t)| Isometry::rotation(phi).compose(&Isometry::translation(t)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frames_track_short_products(moves in prop::collection::vec(step(), 1..6)) {
        let mut f = Frame::identity();
        let mut g = Mobius::identity();
        for m in &moves {
            f = f.then(m);
            g = g.compose(m);
        }
        let d = geom::dist(Point::origin(), g.apply(Point::origin()));
        prop_assert!((f.displacement() - d).abs() < 1e-6 * d.max(1.0));
        if d > 1e-3 {
            prop_assert!(geom::angular_distance(f.angle(), g.apply(Point::origin()).angle()) < 1e-6);
        }
    }

    #[test]
    fn walk_distances_obey_the_triangle_inequality(seed in any::<u64>(), r in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = right_angled_walk(r, 60, 0, &mut rng).unwrap();
        prop_assert!(t.satisfies_triangle_inequality(1e-8));
        prop_assert!(t.steps.iter().all(|s| s.d_ambient <= s.k as f64 * r + 1e-9));
    }

    #[test]
    fn composition_with_inverse_is_identity(moves in prop::collection::vec(step(), 1..20)) {
        let f = moves.iter().fold(Frame::identity(), |f, m| f.then(m));
        prop_assert!(f.compose(&f.inverse()).displacement() < 1e-6);
    }
}

#[test]
fn tree_entropy_approaches_half_log_three() {
    // exact depth law of the 4-regular tree walk
    let law = tree_depth_law(4, 50);
    assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let inc = tree_entropy(4, 400) - tree_entropy(4, 399);
    assert!((inc - 0.5 * 3f64.ln()).abs() < 1e-2, "{inc}");
}

#[test]
fn tessellation_laws_are_probability_vectors() {
    let spec = TessellationSpec::new(4, 5).unwrap();
    for law in pq_distributions(&spec, 4) {
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    // one step: q equally likely vertices
    let laws = pq_distributions(&spec, 1);
    assert!((distribution_entropy(laws[1].iter().copied()) - 5f64.ln()).abs() < 1e-12);
}

#[test]
fn tessellation_steps_have_the_side_length() {
    let spec = TessellationSpec::new(3, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = pq_walk(&spec, 4, 0, &mut rng);
    assert!((t.steps[1].d_ambient - spec.side()).abs() < 1e-9);
}

#[test]
fn tree_regime_walk_has_tree_depth_speed() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 400;
    let speeds: Vec<f64> = (0..200).map(|_| right_angled_walk(tree_step(), n, 0, &mut rng).unwrap().last().d_graph / n as f64).collect();
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    assert!((mean - 0.5).abs() < 0.01, "{mean}");
}

#[test]
fn matrix_products_have_unit_determinant_by_construction() {
    let d = MatrixDistribution::test_pair();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = matrix_walk(&d, 2000, &mut rng);
    let (s1, s2) = t.last.log_singular_values();
    assert_eq!(s1 + s2, 0.0);
    assert!(t.log_norms.windows(2).all(|w| w[1].is_finite() && (w[1] - w[0]).abs() < 2.0));
}
