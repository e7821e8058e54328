use std::sync::Arc;

use leastbias::grids::{
    cochain_inner, codifferential, derham_laplacian, exterior_derivative, Axis, Cochain, PeriodicMesh, UniformGrid,
};
use leastbias::probkit::{apply_mixing, DiscreteDistribution, EnergyLevels, MixingMap};
use leastbias::spinor::{matadd, matscale};
use leastbias::surfaces::WireFrame;
use leastbias::variational::{DenseSymmetric, SolverConfig};
use leastbias::{build_gamma, dirac_slash, entropy, minimize_quadratic_form, solve_film, solve_maxent, ExactFourVector};
use num_rational::Rational64;
use proptest::prelude::*;

fn masses(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 2..=n)
}

fn dense(n: usize, raw: &[f64]) -> DenseSymmetric<f64> {
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = raw[i * n + j];
            e[i * n + j] = v;
            e[j * n + i] = v;
        }
    }
    DenseSymmetric::new(n, e).unwrap()
}

fn mesh_2d(a: usize, b: usize) -> Arc<PeriodicMesh<f64>> {
    Arc::new(PeriodicMesh::new_2d([a, b], [1.0, 1.5]).unwrap())
}

fn random_cochain(mesh: &Arc<PeriodicMesh<f64>>, degree: usize, raw: &[f64]) -> Cochain<f64> {
    let n = mesh.cell_count(degree);
    let c = (0..n).map(|i| raw[i % raw.len()] * (1.0 + i as f64 * 0.013).sin()).collect();
    Cochain::new(Arc::clone(mesh), degree, c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn maxent_weights_are_boltzmann(levels in prop::collection::vec(-3.0f64..3.0, 3..8), t in 0.05f64..0.95) {
        let lv = EnergyLevels::new(levels.clone()).unwrap();
        prop_assume!(lv.max() - lv.min() > 0.1);
        let mean = lv.min() + t * (lv.max() - lv.min());
        let sol = solve_maxent(&lv, mean).unwrap();
        let w = sol.distribution.weights();
        let got: f64 = w.iter().zip(&levels).map(|(p, e)| p * e).sum();
        prop_assert!((got - mean).abs() < 1e-9);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (p, e) in w.iter().zip(&levels) {
            let boltz = (-sol.log_normalizer - sol.beta * e).exp();
            prop_assert!((p - boltz).abs() < 1e-10, "{p} vs {boltz}");
        }
        // any other distribution with the same mean has lower entropy; nudge
        // along a direction that keeps both constraints
        let h = entropy(&sol.distribution);
        let (a, b, c) = (levels[0], levels[1], levels[2]);
        let dir = [b - c, c - a, a - b];
        let step = 1e-3 * w[..3].iter().cloned().fold(f64::INFINITY, f64::min);
        let mut q = w.to_vec();
        for k in 0..3 {
            q[k] += step * dir[k];
        }
        if let Ok(other) = DiscreteDistribution::new(q) {
            prop_assert!(entropy(&other) <= h + 1e-14);
        }
    }

    #[test]
    fn mixing_never_lowers_entropy(m in masses(6), lambda in prop::collection::vec(0.0f64..1.0, 3)) {
        let n = m.len();
        let p = DiscreteDistribution::from_masses(&m).unwrap();
        let shift: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        let swap: Vec<usize> = (0..n).map(|i| if i < 2 { 1 - i } else { i }).collect();
        let id: Vec<usize> = (0..n).collect();
        let total: f64 = lambda.iter().sum::<f64>() + 1e-9;
        let w: Vec<f64> = lambda.iter().map(|l| (l + 1e-9 / 3.0) / total).collect();
        let map = MixingMap::from_permutations(&[shift, swap, id], &w).unwrap();
        let q = apply_mixing(&p, &map).unwrap();
        prop_assert!(entropy(&q) >= entropy(&p) - 1e-12);
    }

    #[test]
    fn d_squared_vanishes_and_codifferential_is_adjoint(
        a in 3usize..7, b in 3usize..7, raw in prop::collection::vec(-1.0f64..1.0, 8..20)
    ) {
        let mesh = mesh_2d(a, b);
        let f = random_cochain(&mesh, 0, &raw);
        let ddf = exterior_derivative(&exterior_derivative(&f).unwrap()).unwrap();
        prop_assert!(ddf.coefficients().iter().all(|c| c.abs() < 1e-14));

        let w = random_cochain(&mesh, 1, &raw[1..]);
        let lhs = cochain_inner(&exterior_derivative(&f).unwrap(), &w).unwrap();
        let rhs = cochain_inner(&f, &codifferential(&w).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));

        for degree in 0..=2 {
            let c = random_cochain(&mesh, degree, &raw);
            let q = cochain_inner(&c, &derham_laplacian(&c).unwrap()).unwrap();
            prop_assert!(q >= -1e-12);
        }
    }

    #[test]
    fn ground_value_bounds_every_trial(raw in prop::collection::vec(-1.0f64..1.0, 36), seed in 0u64..1000) {
        let n = 6;
        let op = dense(n, &raw);
        let cfg = SolverConfig { tolerance: 1e-10, max_iterations: 500, shift: None, seed };
        let sol = minimize_quadratic_form(&op, &cfg).unwrap();
        for pair in sol.rayleigh_history.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
        for k in 0..8 {
            let v: Vec<f64> = (0..n).map(|i| ((i * 7 + k * 3) as f64 + seed as f64).sin()).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum();
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    q += v[i] * op.entry(i, j) * v[j];
                }
            }
            prop_assert!(sol.value <= q / norm + 1e-9);
        }
    }

    #[test]
    fn film_respects_maximum_principle(raw in prop::collection::vec(-2.0f64..2.0, 4..12), n in 5usize..12) {
        let grid = UniformGrid::new(vec![Axis::dirichlet(0.0, 1.0, n), Axis::dirichlet(0.0, 1.0, n)]).unwrap();
        let frame = WireFrame::from_fn(grid, |x| {
            let k = ((x[0] * 7.0 + x[1] * 13.0) * 10.0) as usize;
            raw[k % raw.len()]
        })
        .unwrap();
        let (lo, hi) = frame
            .boundary_values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        let cfg = SolverConfig { tolerance: 1e-11, max_iterations: 20000, shift: None, seed: 0 };
        let film = solve_film(&frame, &cfg).unwrap();
        prop_assert!(film.height.values().iter().all(|h| *h >= lo - 1e-9 && *h <= hi + 1e-9));
    }

    #[test]
    fn slash_is_linear(k in prop::array::uniform4(-20i64..20), p in prop::array::uniform4(-20i64..20), s in -5i64..5) {
        let g = build_gamma::<Rational64>();
        let kv = ExactFourVector::new(k.map(Rational64::from_integer));
        let pv = ExactFourVector::new(p.map(Rational64::from_integer));
        let scaled = ExactFourVector::new(k.map(|c| Rational64::from_integer(c * s)));
        prop_assert_eq!(dirac_slash(&g, &kv.add(&pv)), matadd(&dirac_slash(&g, &kv), &dirac_slash(&g, &pv)));
        prop_assert_eq!(dirac_slash(&g, &scaled), matscale(Rational64::from_integer(s), &dirac_slash(&g, &kv)));
    }
}

#[test]
fn single_precision_ground_state() {
    let op = DenseSymmetric::<f32>::diagonal(&[3.0, 1.0, 2.0, 5.0]);
    let cfg = SolverConfig { tolerance: 1e-4f32, max_iterations: 200, shift: None, seed: 1 };
    let sol = minimize_quadratic_form(&op, &cfg).unwrap();
    assert!((sol.value - 1.0).abs() < 1e-4);
    let lv = EnergyLevels::<f32>::new(vec![0.0, 1.0]).unwrap();
    let me = solve_maxent(&lv, 0.25).unwrap();
    assert!((me.beta - 3f32.ln()).abs() < 1e-4);
}
