mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tree_carleman::tree::{five_edge_example, random_tree};
use tree_carleman::weights::*;
use tree_carleman::{GraphDocument, TreeGraph, WeightFamily};

/// Floating-point re-check of the vertex matching and sign conditions by
/// sampling, independent of the exact validator.
fn sampled_conditions(tree: &TreeGraph, family: &WeightFamily) -> Result<(), String> {
    for &k in tree.inner_vertices() {
        let x = tree.coordinate(k);
        let fan = tree.starting_at(k).len() as f64;
        for &i in tree.ending_at(k) {
            for &j in tree.starting_at(k) {
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs());
                if !close(family.psi(i, x, 0), family.psi(j, x, 0)) {
                    return Err(format!("value at vertex {k}"));
                }
                if !close(family.psi(i, x, 1), fan * family.psi(j, x, 1)) {
                    return Err(format!("slope at vertex {k}"));
                }
                if !close(family.psi(i, x, 2), fan * fan * family.psi(j, x, 2)) {
                    return Err(format!("curvature at vertex {k}"));
                }
            }
        }
    }
    for e in tree.edges() {
        let (a, b) = tree.interval(e.id);
        for s in 0..=20 {
            let x = a + (b - a) * s as f64 / 20.0;
            if !(family.psi(e.id, x, 0) < 0.0 && family.psi(e.id, x, 1) > 0.0 && family.psi(e.id, x, 2) > 0.0) {
                return Err(format!("sign on edge {} at {x}", e.id));
            }
        }
    }
    Ok(())
}

#[test]
fn worked_example_coefficients() {
    let family = common::reference_family();
    let expect = [
        EdgePoly::from_ints((1, 1), (2, 1), (-7, 1)),
        EdgePoly::from_ints((1, 4), (3, 2), (-23, 4)),
        EdgePoly::from_ints((1, 4), (3, 2), (-23, 4)),
        EdgePoly::from_ints((1, 16), (1, 1), (-4, 1)),
        EdgePoly::from_ints((1, 16), (1, 1), (-4, 1)),
    ];
    assert_eq!(family.polys(), &expect);
    assert!(validate_conditions(&family).passes());
    assert_eq!(family.max_psi(), -7.0 / 16.0);
}

#[test]
fn margin_shifts_constants_only() {
    let tree = five_edge_example();
    let base = common::reference_family();
    let shifted = construct_weights(&tree, &default_root_poly(), &ratio(3, 2), 2.0).unwrap();
    for (p, q) in base.polys().iter().zip(shifted.polys()) {
        assert_eq!((&p.a, &p.b), (&q.a, &q.b));
    }
    assert!(shifted.max_psi() <= -1.5);
    assert!(validate_conditions(&shifted).passes());
}

#[test]
fn weight_document_round_trip() {
    let tree = five_edge_example();
    let family = common::reference_family();
    let text = serde_json::to_string(&family.to_document()).unwrap();
    let back: WeightDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(back.into_family(&tree).unwrap().polys(), family.polys());
}

#[test]
fn perturbed_family_is_caught() {
    let tree = five_edge_example();
    let mut polys = common::reference_family().polys().to_vec();
    polys[3].b = ratio(9, 8);
    let family = WeightFamily::from_polys(&tree, 2.0, polys).unwrap();
    let report = validate_conditions(&family);
    assert!(!report.passes());
    assert!(sampled_conditions(&tree, &family).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_trees_get_valid_weights(seed in any::<u64>(), n in 1usize..=20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, n, (0.5, 2.0)).unwrap();
        let family = construct_weights(&tree, &default_root_poly(), &ratio(1, 1), 2.0).unwrap();
        let report = validate_conditions(&family);
        prop_assert!(report.passes(), "{:?}", report.violations);
        prop_assert!(sampled_conditions(&tree, &family).is_ok());
        prop_assert!(family.max_psi() <= -1.0 + 1e-12, "{}", family.max_psi());
    }

    #[test]
    fn graph_document_round_trip(seed in any::<u64>(), n in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, n, (0.5, 2.0)).unwrap();
        let text = serde_json::to_string(&tree.to_document(1.5)).unwrap();
        let doc = GraphDocument::from_json(&text).unwrap();
        prop_assert_eq!(doc.horizon, 1.5);
        let back = doc.build().unwrap();
        prop_assert_eq!(back.edge_specs(), tree.edge_specs());
        prop_assert_eq!(back.boundary_vertices(), tree.boundary_vertices());
    }
}
