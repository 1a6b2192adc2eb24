//! Randomised invariants across module boundaries.

use proptest::prelude::*;

use covrecon::covariogram::{covariogram_at, covariogram_grid};
use covrecon::geometry::{
    blaschke_body, difference_body, hausdorff_distance, intersect_convex, minkowski_reconstruct,
    minkowski_sum,
};
use covrecon::io::{body_from_json, body_to_json, measurement_from_json, measurement_to_json};
use covrecon::lsq::{polygon_from_facets, project_to_balanced_cone, FacetVariables};
use covrecon::measurement::{gen_cov_grid, gen_mod2, NoiseModel};
use covrecon::shapes::random_polygon;
use covrecon::spectral::squared_modulus;
use covrecon::{Direction, Polygon, Vec2};

fn body() -> impl Strategy<Value = Polygon> {
    (3usize..12, any::<u64>()).prop_map(|(n, seed)| random_polygon(n, seed).unwrap())
}

fn point(r: f64) -> impl Strategy<Value = Vec2> {
    (-r..r, -r..r).prop_map(|(x, y)| Vec2::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariogram_is_even_and_bounded(p in body(), x in point(1.0)) {
        let g = covariogram_at(&p, x);
        prop_assert!((g - covariogram_at(&p, -x)).abs() <= 1e-12);
        prop_assert!(g >= 0.0 && g <= p.area() + 1e-12);
    }

    #[test]
    fn covariogram_ignores_translation(p in body(), x in point(1.0), t in point(0.3)) {
        let moved = p.translate(t);
        prop_assert!((covariogram_at(&p, x) - covariogram_at(&moved, x)).abs() <= 1e-12);
    }

    #[test]
    fn covariogram_vanishes_off_the_difference_body(p in body(), x in point(1.0)) {
        if !difference_body(&p).contains(x, 1e-12) {
            prop_assert_eq!(covariogram_at(&p, x), 0.0);
        }
    }

    #[test]
    fn modulus_ignores_translation_and_reflection(p in body(), xi in point(25.0), t in point(0.2)) {
        let m = squared_modulus(&p, xi);
        let tol = 1e-10 * (1.0 + m);
        prop_assert!((m - squared_modulus(&p.translate(t), xi)).abs() <= tol);
        prop_assert!((m - squared_modulus(&p.reflect(), xi)).abs() <= tol);
    }

    #[test]
    fn hausdorff_is_a_metric(p in body(), q in body(), r in body()) {
        let d = |a: &Polygon, b: &Polygon| hausdorff_distance(a, b).unwrap();
        prop_assert!(d(&p, &p) <= 1e-12);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() <= 1e-12);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 2e-9);
    }

    #[test]
    fn intersection_area_is_bounded(p in body(), q in body(), t in point(0.5)) {
        let q = q.translate(t);
        let i = intersect_convex(&p, &q);
        prop_assert!(i.area() <= p.area().min(q.area()) + 1e-12);
    }

    #[test]
    fn difference_body_is_sum_with_reflection(p in body()) {
        let sum = minkowski_sum(&p, &p.reflect());
        prop_assert!(hausdorff_distance(&difference_body(&p), &sum).unwrap() <= 1e-12);
    }

    #[test]
    fn blaschke_body_is_symmetric_with_equal_perimeter(p in body()) {
        let nb = blaschke_body(&p).unwrap();
        prop_assert!(hausdorff_distance(&nb, &nb.reflect()).unwrap() <= 1e-10);
        // mixed-area inequality: the Blaschke body is never smaller
        prop_assert!(nb.area() >= p.area() - 1e-12);
        prop_assert!((nb.perimeter() - p.perimeter()).abs() <= 1e-10);
    }

    #[test]
    fn minkowski_round_trip(p in body()) {
        let back = minkowski_reconstruct(&p.surface_area_measure().unwrap()).unwrap();
        prop_assert!(hausdorff_distance(&p.centered().unwrap(), &back).unwrap() <= 1e-9);
    }

    #[test]
    fn projection_lands_in_the_cone(masses in prop::collection::vec(-1.0f64..2.0, 10)) {
        let normals: Vec<Direction> = (0..5).map(|j| Direction::from_angle(0.6 * j as f64 + 0.1)).collect();
        let a = FacetVariables::new(normals, masses[..5].to_vec(), masses[5..].to_vec()).unwrap();
        let proj = project_to_balanced_cone(&a).unwrap();
        prop_assert!(proj.to_vector().iter().all(|&v| v >= 0.0));
        prop_assert!(proj.balance_residual().norm() <= 1e-9);
        // idempotent
        let again = project_to_balanced_cone(&proj).unwrap();
        let moved: f64 = again.to_vector().iter().zip(proj.to_vector()).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(moved <= 1e-9);
        if proj.to_vector().iter().sum::<f64>() > 1e-6 {
            let _ = polygon_from_facets(&proj);
        }
    }

    #[test]
    fn bodies_survive_json(p in body()) {
        let back = body_from_json(&body_to_json(&p)).unwrap();
        prop_assert_eq!(back.vertices(), p.vertices());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn measurements_survive_json(p in body(), seed in any::<u64>(), k in 2usize..6) {
        for ms in [
            gen_cov_grid(&p, k, NoiseModel::Gaussian { sigma: 0.01 }, seed).unwrap(),
            gen_mod2(&p, k, 0.75, NoiseModel::Poisson { scale: 50.0 }, seed).unwrap(),
        ] {
            let back = measurement_from_json(&measurement_to_json(&ms)).unwrap();
            prop_assert_eq!(back, ms);
        }
    }

    #[test]
    fn grids_match_pointwise(p in body(), k in 1usize..8) {
        let grid = covariogram_grid(&p, k).unwrap();
        for i in 0..grid.len() {
            prop_assert_eq!(grid.values[i], grid.values[grid.neg_index(i)]);
            prop_assert!((grid.values[i] - covariogram_at(&p, grid.site(i))).abs() <= 1e-15);
        }
    }
}
