use proptest::prelude::*;
use sidlab::landscape::{check_strong_attraction, Landscape};

const PRESETS: [&str; 8] = [
    "ou",
    "free",
    "dw",
    "quad-attract(1)",
    "gauss-attract(1)",
    "gauss-repel(1)",
    "dw+gauss-repel(0.5)",
    "ou+quad-attract(2)",
];

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.5..2.5f64, dim)
}

fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let h = 1e-5;
    (0..x.len())
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += h;
            m[k] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gradients_match_finite_differences(idx in 0..PRESETS.len(), dim in 1usize..4, seed in any::<u64>()) {
        let l = Landscape::preset(PRESETS[idx], dim).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let x: Vec<f64> = (0..dim).map(|_| rand::Rng::random_range(&mut rng, -2.5..2.5)).collect();
        let (_, gv) = l.potential_eval(&x).unwrap();
        prop_assert!(rel_err(&fd_gradient(|y| l.v_value(y), &x), &gv) < 1e-6);
        let (_, gf) = l.interaction_eval(&x).unwrap();
        prop_assert!(rel_err(&fd_gradient(|y| l.f_value(y), &x), &gf) < 1e-6);
    }

    #[test]
    fn hessian_products_match_finite_differences(idx in 0..PRESETS.len(), x in point(2), v in point(2)) {
        let l = Landscape::preset(PRESETS[idx], 2).unwrap();
        let h = 1e-6;
        let shifted = |s: f64| -> Vec<f64> { x.iter().zip(&v).map(|(a, b)| a + s * b).collect() };
        let gv = |y: &[f64]| l.potential_eval(y).unwrap().1;
        let gf = |y: &[f64]| l.interaction_eval(y).unwrap().1;
        let fd = |g: &dyn Fn(&[f64]) -> Vec<f64>| -> Vec<f64> {
            g(&shifted(h)).iter().zip(g(&shifted(-h))).map(|(p, m)| (p - m) / (2.0 * h)).collect()
        };
        let mut hv = vec![0.0; 2];
        l.add_hess_v_vec(&x, &v, 1.0, &mut hv);
        prop_assert!(rel_err(&fd(&gv), &hv) < 1e-6);
        let mut hf = vec![0.0; 2];
        l.add_hess_f_vec(&x, &v, 1.0, &mut hf);
        prop_assert!(rel_err(&fd(&gf), &hf) < 1e-6);
    }

    #[test]
    fn effective_potential_ignores_confinement_offset(idx in 0..PRESETS.len(), a in point(2), x in point(2), c in -1e3..1e3f64) {
        let l = Landscape::preset(PRESETS[idx], 2).unwrap();
        let shifted = l.with_confinement_offset(c);
        let (w, g) = l.effective_potential(&a, &x).unwrap();
        let (ws, gs) = shifted.effective_potential(&a, &x).unwrap();
        prop_assert_eq!(g, gs);
        prop_assert!((w - ws).abs() <= 1e-12 * (1.0 + c.abs()));
        prop_assert_eq!(l.potential_eval(&x).unwrap().1, shifted.potential_eval(&x).unwrap().1);
    }
}

#[test]
fn interaction_vanishes_at_origin() {
    for name in PRESETS {
        for dim in 1..4 {
            let l = Landscape::preset(name, dim).unwrap();
            let (v, g) = l.interaction_eval(&vec![0.0; dim]).unwrap();
            assert_eq!(v, 0.0, "{name}");
            assert!(g.iter().all(|x| *x == 0.0), "{name}");
        }
    }
}

#[test]
fn strong_attraction_is_a_pure_function_of_the_seed() {
    let l = Landscape::preset("quad-attract(1)", 2).unwrap();
    let a = [0.0, 0.0];
    let serial = check_strong_attraction(&l, &a, 0.1, 0.1, 500, 42).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let pooled: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        (0..4).into_par_iter().map(|_| check_strong_attraction(&l, &a, 0.1, 0.1, 500, 42).unwrap()).collect()
    });
    assert!(pooled.iter().all(|r| *r == serial));
}
