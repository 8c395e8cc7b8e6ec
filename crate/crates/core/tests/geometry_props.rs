use proptest::prelude::*;
use sidlab::geometry::{check_sublevel, Aabb, DomainSpec, LevelFunction};
use sidlab::landscape::Landscape;

fn domains() -> Vec<DomainSpec> {
    vec![
        DomainSpec::interval(-1.0, 0.7),
        DomainSpec::ball(vec![0.1, -0.2], 1.1),
        DomainSpec::Box { lo: vec![-1.0, -0.5], hi: vec![0.8, 1.2] },
        DomainSpec::implicit(
            LevelFunction::Quartic { center: vec![0.0, 0.0], radius: 1.0 },
            Aabb::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap(),
        )
        .unwrap(),
        DomainSpec::implicit(
            LevelFunction::Ellipsoid { center: vec![0.0, 0.0], semi_axes: vec![1.5, 0.7] },
            Aabb::new(vec![-2.0, -1.0], vec![2.0, 1.0]).unwrap(),
        )
        .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn crossing_separates_inside_from_outside(idx in 0usize..5, dir in prop::collection::vec(-1.0..1.0f64, 2), len in 2.5..4.0f64) {
        let g = &domains()[idx];
        let d = g.dim();
        let p = vec![0.0; d];
        let n = dir[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(n > 1e-3);
        let q: Vec<f64> = dir[..d].iter().map(|v| v / n * len).collect();
        let c = g.detect_crossing(&p, &q).unwrap().expect("segment leaves the domain");
        prop_assert!((0.0..=1.0).contains(&c.lambda));
        let inner = g.inner_normal(&c.point).unwrap();
        let eps = 1e-6;
        let inside: Vec<f64> = c.point.iter().zip(&inner).map(|(z, v)| z + eps * v).collect();
        let outside: Vec<f64> = c.point.iter().zip(&inner).map(|(z, v)| z - eps * v).collect();
        prop_assert!(g.contains(&inside));
        prop_assert!(!g.contains(&outside));
    }

    #[test]
    fn sublevel_sets_grow_with_the_level(h1 in 0.05..0.4f64, dh in 0.01..0.3f64) {
        let l = Landscape::preset("ou", 2).unwrap();
        let g = DomainSpec::ball(vec![0.0, 0.0], 1.0);
        let a = [0.0, 0.0];
        let s1 = check_sublevel(&l, &a, h1, &g, 0.05, None).unwrap();
        let s2 = check_sublevel(&l, &a, h1 + dh, &g, 0.05, None).unwrap();
        prop_assert!(s1.component_nodes <= s2.component_nodes);
        let e1 = &s1.extent;
        let e2 = &s2.extent;
        for k in 0..2 {
            prop_assert!(e2.lo[k] <= e1.lo[k] && e1.hi[k] <= e2.hi[k]);
        }
    }
}

#[test]
fn sublevel_verdicts_are_resolution_consistent() {
    let cases: Vec<(&str, usize, DomainSpec, Vec<f64>, f64)> = vec![
        ("ou", 1, DomainSpec::interval(-1.0, 1.0), vec![0.0], 0.5),
        ("quad-attract(1)", 1, DomainSpec::interval(-1.0, 1.0), vec![0.0], 1.0),
        ("dw", 1, DomainSpec::interval(-2.0, -0.05), vec![-1.0], 0.2488),
        ("ou", 2, DomainSpec::ball(vec![0.0, 0.0], 1.0), vec![0.0, 0.0], 0.5),
        ("dw", 1, DomainSpec::interval(-2.0, 2.0), vec![-1.0], 0.3),
    ];
    for (name, dim, g, a, h) in cases {
        let l = Landscape::preset(name, dim).unwrap();
        let coarse = check_sublevel(&l, &a, h, &g, 0.02, None).unwrap();
        let fine = check_sublevel(&l, &a, h, &g, 0.01, None).unwrap();
        assert_eq!(coarse.bounded, fine.bounded, "{name}");
        assert_eq!(coarse.connected, fine.connected, "{name}");
    }
}
