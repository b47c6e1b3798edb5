use proptest::prelude::*;
use rand::Rng;
use torsionscope_core::homology::pairing;
use torsionscope_core::metrics::{
    bottleneck, bottleneck_intervals, entropy_of, entropy_substitution, wasserstein1_intervals,
};
use torsionscope_core::pointcloud::{
    generate_loop_band, generate_projective_plane, generate_random_cloud, perturb_gaussian,
    projective_plane_embedding, projective_plane_preimages, LoopBand,
};
use torsionscope_core::rips::sublevel_restriction;
use torsionscope_core::rng::seeded;
use torsionscope_core::torsion::snf_torsion_scan;
use torsionscope_core::{
    build_rips, euler_characteristic, reduce, torsion_check, Coefficients, Filtration, MaxRadius, PointCloud,
    RipsOptions, Selection,
};

const FIELDS: [Coefficients; 4] =
    [Coefficients::Rational, Coefficients::Prime(2), Coefficients::Prime(3), Coefficients::Prime(5)];

fn cloud_strategy(max_n: usize, dims: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = PointCloud> {
    (3..=max_n, dims).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n)
            .prop_map(move |pts| PointCloud::new(d, pts).unwrap())
    })
}

fn rips(cloud: &PointCloud, max_dim: usize) -> Filtration {
    build_rips(cloud, &RipsOptions::new(max_dim, MaxRadius::Infinite)).unwrap()
}

fn diameter(cloud: &PointCloud, v: &[usize]) -> f64 {
    let mut d = 0.0f64;
    for (k, &a) in v.iter().enumerate() {
        for &b in &v[k + 1..] {
            d = d.max(cloud.distance(a, b));
        }
    }
    d
}

fn bars() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..10.0, 1..30)
}

fn diagram() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..2.0, 0.01f64..2.0).prop_map(|(b, l)| (b, b + l)), 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn faces_precede_cofaces_and_boundary_squares_to_zero(cloud in cloud_strategy(8, 2..=4)) {
        let f = rips(&cloud, 3);
        prop_assume!(f.len() <= 500);
        for j in 0..f.len() {
            let s = f.simplex(j);
            let facets = f.facets(j);
            prop_assert_eq!(facets.len(), if s.dim() == 0 { 0 } else { s.dim() + 1 });
            let mut chain = std::collections::BTreeMap::<usize, i64>::new();
            for (i, sign) in facets {
                prop_assert!(i < j);
                prop_assert!(f.simplex(i).birth() <= s.birth());
                for (k, inner) in f.facets(i) {
                    *chain.entry(k).or_default() += (sign as i64) * (inner as i64);
                }
            }
            prop_assert!(chain.values().all(|&c| c == 0));
        }
    }

    #[test]
    fn births_are_diameters(cloud in cloud_strategy(10, 1..=5)) {
        let f = rips(&cloud, 3);
        for s in f.simplices() {
            prop_assert!((s.birth() - diameter(&cloud, s.vertices())).abs() <= 1e-12);
        }
    }

    #[test]
    fn sublevel_counts_are_monotone(cloud in cloud_strategy(9, 2..=3), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let f = rips(&cloud, 2);
        let (lo, hi) = (a.min(b), a.max(b));
        let small = sublevel_restriction(&f, lo).unwrap();
        let large = sublevel_restriction(&f, hi).unwrap();
        prop_assert!(small.len() <= large.len());
        prop_assert_eq!(sublevel_restriction(&f, 0.0).unwrap().len(), cloud.len());
        prop_assert_eq!(sublevel_restriction(&f, f64::INFINITY).unwrap().len(), f.len());
        prop_assert!(small.simplices().iter().all(|s| s.birth() <= lo));
    }

    #[test]
    fn zero_noise_is_identity(cloud in cloud_strategy(12, 2..=4), seed in any::<u64>()) {
        let (out, rec) = perturb_gaussian(&cloud, &Selection::All, 0.0, seed).unwrap();
        prop_assert_eq!(&out, &cloud);
        prop_assert_eq!(rec.mse, 0.0);
    }

    #[test]
    fn noise_touches_only_selected_points(cloud in cloud_strategy(12, 2..=4), seed in any::<u64>(), pick in 0usize..12) {
        let i = pick % cloud.len();
        let (out, rec) = perturb_gaussian(&cloud, &Selection::Indices(vec![i, i]), 0.1, seed).unwrap();
        for k in 0..cloud.len() {
            if k != i {
                prop_assert_eq!(out.point(k), cloud.point(k));
            }
        }
        prop_assert_eq!(rec.shifted_indices, vec![i]);
        prop_assert!((rec.mse - cloud.mean_squared_displacement(&out).unwrap()).abs() <= 1e-15);
    }

    #[test]
    fn noise_scales_linearly_with_sigma(cloud in cloud_strategy(10, 2..=3), seed in any::<u64>(), sigma in 0.01f64..1.0) {
        let (one, _) = perturb_gaussian(&cloud, &Selection::All, 1.0, seed).unwrap();
        let (s, _) = perturb_gaussian(&cloud, &Selection::All, sigma, seed).unwrap();
        for (k, (a, b)) in one.as_flat().iter().zip(s.as_flat()).enumerate() {
            let base = cloud.as_flat()[k];
            prop_assert!(((a - base) * sigma - (b - base)).abs() <= 1e-12);
        }
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), n in 20usize..80) {
        prop_assert_eq!(generate_projective_plane(n, seed).unwrap(), generate_projective_plane(n, seed).unwrap());
        prop_assert_eq!(generate_random_cloud(n, 3, seed).unwrap(), generate_random_cloud(n, 3, seed).unwrap());
        let band = LoopBand::triple(n, seed);
        prop_assert_eq!(generate_loop_band(&band).unwrap(), generate_loop_band(&band).unwrap());
    }

    #[test]
    fn projective_embedding_identifies_antipodes(seed in any::<u64>()) {
        for (x, y, z) in projective_plane_preimages(25, seed) {
            let p = projective_plane_embedding(x, y, z);
            let q = projective_plane_embedding(-x, -y, -z);
            prop_assert_eq!(p, q);
        }
    }

    #[test]
    fn entropy_lies_between_zero_and_log_n(lengths in bars()) {
        let e = entropy_of(&lengths);
        let n = lengths.len() as f64;
        prop_assert!(e >= -1e-12 && e <= n.ln() + 1e-12);
        let equal = vec![lengths[0]; lengths.len()];
        prop_assert!((entropy_of(&equal) - n.ln()).abs() <= 1e-12);
        let spread = lengths.iter().cloned().fold(f64::MIN, f64::max) - lengths.iter().cloned().fold(f64::MAX, f64::min);
        if spread > 1e-6 {
            prop_assert!(e < n.ln() - 1e-12);
        }
    }

    #[test]
    fn substitution_never_lowers_entropy(lengths in bars()) {
        let mut sorted = lengths.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let e = entropy_of(&sorted);
        for i in 1..sorted.len() {
            prop_assert!(e <= entropy_of(&entropy_substitution(&sorted, i)) + 1e-12, "i = {}", i);
        }
    }

    #[test]
    fn diagram_distances_are_metrics(a in diagram(), b in diagram(), c in diagram()) {
        for dist in [bottleneck_intervals as fn(&[(f64, f64)], &[(f64, f64)]) -> f64, wasserstein1_intervals] {
            let (ab, ba) = (dist(&a, &b), dist(&b, &a));
            prop_assert!((ab - ba).abs() <= 1e-9);
            prop_assert!(dist(&a, &a).abs() <= 1e-12);
            prop_assert!(dist(&a, &c) <= ab + dist(&b, &c) + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dimension_zero_is_field_independent(cloud in cloud_strategy(12, 2..=4)) {
        let f = rips(&cloud, 2);
        let reference = reduce(&f, Coefficients::Rational, 1).unwrap();
        for k in FIELDS {
            let d = reduce(&f, k, 1).unwrap();
            prop_assert!(d.same_intervals_in_dim(&reference, 0));
        }
    }

    #[test]
    fn planar_dimension_one_is_prime_independent(cloud in cloud_strategy(12, 2..=2)) {
        let f = rips(&cloud, 2);
        let reference = reduce(&f, Coefficients::Prime(2), 1).unwrap();
        for k in FIELDS {
            prop_assert!(reduce(&f, k, 1).unwrap().same_intervals_in_dim(&reference, 1));
        }
    }

    #[test]
    fn euler_characteristic_is_field_independent(cloud in cloud_strategy(10, 2..=4), r in 0.0f64..3.0) {
        let f = rips(&cloud, 3);
        let chis: Vec<i64> = FIELDS.iter().map(|&k| euler_characteristic(&reduce(&f, k, 3).unwrap(), r)).collect();
        prop_assert!(chis.windows(2).all(|w| w[0] == w[1]), "{:?}", chis);
        // with every dimension of the complex included, χ is the alternating simplex count
        let sub = sublevel_restriction(&f, r).unwrap();
        let direct: i64 = sub.count_by_dim().iter().enumerate().map(|(d, &c)| if d % 2 == 0 { c as i64 } else { -(c as i64) }).sum();
        prop_assert_eq!(chis[0], direct);
    }

    #[test]
    fn every_simplex_is_paired_or_essential(cloud in cloud_strategy(10, 2..=3)) {
        let f = rips(&cloud, 2);
        let d = reduce(&f, Coefficients::Prime(3), 2).unwrap();
        let mut seen = vec![0usize; f.len()];
        for p in d.all_pairs() {
            seen[p.birth_index] += 1;
            if let Some(j) = p.death_index {
                seen[j] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let p = pairing(&f, Coefficients::Rational, 2).unwrap();
        prop_assert_eq!(p.len(), f.len());
    }

    #[test]
    fn bottleneck_moves_at_most_twice_the_displacement(cloud in cloud_strategy(10, 2..=3), seed in any::<u64>(), sigma in 0.001f64..0.05) {
        let (moved, _) = perturb_gaussian(&cloud, &Selection::All, sigma, seed).unwrap();
        let eps = (0..cloud.len())
            .map(|i| cloud.point(i).iter().zip(moved.point(i)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let a = reduce(&rips(&cloud, 2), Coefficients::Prime(2), 1).unwrap();
        let b = reduce(&rips(&moved, 2), Coefficients::Prime(2), 1).unwrap();
        for dim in 0..=1 {
            prop_assert!(bottleneck(&a, &b, dim).unwrap() <= 2.0 * eps + 1e-9);
        }
    }

    #[test]
    fn no_torsion_at_or_above_ambient_codimension_one(cloud in cloud_strategy(9, 2..=3)) {
        let lambda = cloud.dim();
        let f = rips(&cloud, lambda + 1);
        let report = torsion_check(&f, &[2, 3, 5], lambda).unwrap();
        prop_assert!(report.findings.iter().all(|x| x.hom_dim < lambda - 1), "{:?}", report);
    }
}

/// Rips prefixes of random clouds kept small enough for an exhaustive scan.
fn small_filtrations(count: usize, seed: u64) -> Vec<Filtration> {
    let mut rng = seeded(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(4..=12);
            let d = rng.random_range(2..=4);
            let max_dim = rng.random_range(1..=3);
            let cloud = generate_random_cloud(n, d, rng.random()).unwrap();
            let f = rips(&cloud, max_dim);
            let cap = rng.random_range(20..=70).min(f.len());
            f.prefix(cap)
        })
        .collect()
}

#[test]
fn detector_agrees_with_relative_homology_scan() {
    for (k, f) in small_filtrations(200, 17).iter().enumerate() {
        let max_hom_dim = f.max_dim().saturating_sub(1);
        let fast = torsion_check(f, &[2, 3, 5], max_hom_dim).unwrap();
        let slow = snf_torsion_scan(f, &[2, 3, 5], max_hom_dim).unwrap();
        assert_eq!(fast.has_torsion, slow.has_torsion, "case {k}");
        assert_eq!(fast.primes(), slow.primes(), "case {k}");
        for (a, b) in fast.findings.iter().zip(&slow.findings) {
            assert_eq!(a.first_index, b.first_index, "case {k}");
        }
    }
}
