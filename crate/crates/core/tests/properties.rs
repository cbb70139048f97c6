use depreg::autograd::Tape;
use depreg::hsic::{hsic_biased, hsic_from_grams, hsic_unbiased, relative_hsic, Estimator, RelKernels};
use depreg::kernels::{gaussian_gram_matrix, median_heuristic, KernelConfig};
use depreg::knowledge::{KnowledgeSet, KnowledgeTriple};
use depreg::models::{bind, FaModel, Model};
use depreg::regularizer::{calibrate_nu_alpha, hinge_mean, r_k, rho_values, BandwidthTable, RegConfig};
use depreg::{Error, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Tensor<f64>> {
    (rows, cols).prop_flat_map(|(m, d)| {
        proptest::collection::vec(-3.0..3.0f64, m * d).prop_map(move |v| Tensor::from_vec(m, d, v).unwrap())
    })
}

/// Two row-paired matrices with `m` rows.
fn paired(m: std::ops::Range<usize>) -> impl Strategy<Value = (Tensor<f64>, Tensor<f64>)> {
    (m, 1..4usize, 1..4usize).prop_flat_map(|(m, dx, dy)| {
        (
            proptest::collection::vec(-3.0..3.0f64, m * dx),
            proptest::collection::vec(-3.0..3.0f64, m * dy),
        )
            .prop_map(move |(a, b)| (Tensor::from_vec(m, dx, a).unwrap(), Tensor::from_vec(m, dy, b).unwrap()))
    })
}

fn kc(s: f64) -> KernelConfig {
    KernelConfig::fixed(s).unwrap()
}

fn permutation(m: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..m).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_is_linear(x in matrix(2..5, 2..5), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let grad = |wa: f64, wb: f64| {
            let tape = Tape::new();
            let v = tape.leaf(x.clone());
            let f = v.tanh().mul(v).unwrap().sum();
            let g = v.matmul(v.transpose()).unwrap().scale(0.1).exp().mean();
            let root = f.scale(wa).add(g.scale(wb)).unwrap();
            tape.backward(root).unwrap().wrt(v)
        };
        let (gf, gg, gc) = (grad(1.0, 0.0), grad(0.0, 1.0), grad(a, b));
        for i in 0..gc.numel() {
            let want = a * gf.data()[i] + b * gg.data()[i];
            prop_assert!((gc.data()[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn gram_is_symmetric_bounded_and_translation_invariant(x in matrix(2..12, 1..4), s in 0.2..3.0f64, c in -5.0..5.0f64) {
        let k = gaussian_gram_matrix(&x, &kc(s)).unwrap();
        let m = x.rows();
        for i in 0..m {
            prop_assert_eq!(k.get(i, i), 1.0);
            for j in 0..m {
                prop_assert_eq!(k.get(i, j), k.get(j, i));
                prop_assert!(k.get(i, j) > 0.0 && k.get(i, j) <= 1.0);
            }
        }
        let shifted = gaussian_gram_matrix(&x.map(|v| v + c), &kc(s)).unwrap();
        for (a, b) in shifted.data().iter().zip(k.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn median_heuristic_is_a_pair_distance(x in matrix(2..9, 1..3)) {
        let mut dists = Vec::new();
        for i in 0..x.rows() {
            for j in i + 1..x.rows() {
                dists.push(x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
            }
        }
        dists.sort_by(f64::total_cmp);
        let n = dists.len();
        let want = if n % 2 == 1 { dists[n / 2] } else { 0.5 * (dists[n / 2 - 1] + dists[n / 2]) };
        match median_heuristic(&x) {
            Ok(got) => prop_assert!((got - want).abs() < 1e-12),
            Err(e) => {
                prop_assert_eq!(want, 0.0);
                prop_assert!(matches!(e, Error::DegenerateBandwidth(_)), "{:?}", e);
            }
        }
    }

    #[test]
    fn hsic_is_symmetric_and_biased_is_nonnegative((x, y) in paired(4..14), sx in 0.3..3.0f64, sy in 0.3..3.0f64) {
        for est in [Estimator::Biased, Estimator::Unbiased] {
            let f = if est == Estimator::Biased { hsic_biased::<f64> } else { hsic_unbiased::<f64> };
            let a = f(&x, &y, &kc(sx), &kc(sy)).unwrap().value;
            let b = f(&y, &x, &kc(sy), &kc(sx)).unwrap().value;
            prop_assert!((a - b).abs() < 1e-12, "{:?}: {} vs {}", est, a, b);
        }
        prop_assert!(hsic_biased(&x, &y, &kc(sx), &kc(sy)).unwrap().value >= -1e-12);
    }

    #[test]
    fn hsic_ignores_row_order((x, y) in paired(4..14), seed in any::<u64>()) {
        let p = permutation(x.rows(), seed);
        let (xp, yp) = (x.select_rows(&p), y.select_rows(&p));
        for f in [hsic_biased::<f64>, hsic_unbiased::<f64>] {
            let a = f(&x, &y, &kc(1.0), &kc(0.7)).unwrap().value;
            let b = f(&xp, &yp, &kc(1.0), &kc(0.7)).unwrap().value;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hsic_scales_with_the_gram((x, y) in paired(4..12), c in 0.1..10.0f64) {
        let k = gaussian_gram_matrix(&x, &kc(1.0)).unwrap();
        let l = gaussian_gram_matrix(&y, &kc(1.0)).unwrap();
        for est in [Estimator::Biased, Estimator::Unbiased] {
            let tape = Tape::new();
            let base = hsic_from_grams(tape.constant(k.clone()), tape.constant(l.clone()), est).unwrap().item();
            let scaled = hsic_from_grams(tape.constant(k.map(|v| c * v)), tape.constant(l.clone()), est).unwrap().item();
            prop_assert!((scaled - c * base).abs() <= 1e-12 * (c * base).abs().max(1e-3), "{:?}", est);
        }
    }

    #[test]
    fn hsic_of_a_constant_marginal_is_zero(x in matrix(4..12, 1..3), v in -3.0..3.0f64) {
        let y = Tensor::from_vec(x.rows(), 1, vec![v; x.rows()]).unwrap();
        for f in [hsic_biased::<f64>, hsic_unbiased::<f64>] {
            prop_assert!(f(&x, &y, &kc(1.0), &kc(1.0)).unwrap().value.abs() < 1e-12);
        }
    }

    #[test]
    fn relative_hsic_is_antisymmetric(r in matrix(6..7, 1..2), p in matrix(6..7, 1..2), q in matrix(6..7, 2..3)) {
        let k = RelKernels { reference: kc(1.0), plus: kc(0.5), minus: kc(2.0) };
        let swapped = RelKernels { reference: kc(1.0), plus: kc(2.0), minus: kc(0.5) };
        for est in [Estimator::Biased, Estimator::Unbiased] {
            let a = relative_hsic(&r, &p, &q, &k, est).unwrap();
            let b = relative_hsic(&r, &q, &p, &swapped, est).unwrap();
            prop_assert_eq!(a, -b);
        }
    }

    #[test]
    fn hinge_mean_bounds_and_zero_set(rhos in proptest::collection::vec(-0.5..0.5f64, 1..8), nu in 0.0..0.2f64) {
        let r = hinge_mean(&rhos, nu);
        let max_abs = rhos.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!(r >= 0.0 && r <= nu + max_abs);
        let min = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r == 0.0, min >= nu);
    }

    #[test]
    fn hinge_mean_never_increases_when_one_rho_grows(
        rhos in proptest::collection::vec(-0.5..0.5f64, 1..8),
        i in any::<prop::sample::Index>(),
        up in 0.0..0.3f64,
        nu in 0.0..0.2f64,
    ) {
        let mut raised = rhos.clone();
        raised[i.index(rhos.len())] += up;
        prop_assert!(hinge_mean(&raised, nu) <= hinge_mean(&rhos, nu));
    }

    #[test]
    fn r_k_agrees_with_hinge_on_its_rhos(x in matrix(8..16, 4..5), nu in 0.0..0.1f64) {
        let ks = KnowledgeSet::new(4, vec![
            KnowledgeTriple::new([0], [1], [2]),
            KnowledgeTriple::new([3], [0, 1], [2]),
        ]);
        let cfg = RegConfig { lambda: 1.0, nu_alpha: nu, m: x.rows(), bandwidths: BandwidthTable::uniform(&ks, 1.0).unwrap(), ..RegConfig::default() };
        let tape = Tape::new();
        let rk = r_k(tape.constant(x.clone()), &ks, &cfg).unwrap().item();
        let rhos = rho_values(&x, &ks, &cfg).unwrap();
        prop_assert!((rk - hinge_mean(&rhos, nu)).abs() < 1e-15);
        let min = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(rk == 0.0, min >= nu);
    }

    #[test]
    fn nu_calibration_is_decreasing_in_alpha_and_linear_in_tau(a in 0.001..0.49f64, gap in 0.001..0.5f64, tau in 0.01..2.0f64, c in 0.1..5.0f64) {
        let lo = calibrate_nu_alpha(a, tau).unwrap();
        let hi = calibrate_nu_alpha(a + gap, tau).unwrap();
        prop_assert!(hi < lo);
        let scaled = calibrate_nu_alpha(a, c * tau).unwrap();
        prop_assert!((scaled - c * lo).abs() <= 1e-12 * lo.abs().max(1.0));
    }

    #[test]
    fn fa_loss_ignores_rotations_of_the_loadings(seed in any::<u64>(), t in 0.0..std::f64::consts::TAU) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = FaModel::<f64>::new(4, 2, &mut rng).unwrap();
        model.mu.value = Tensor::randn(1, 4, &mut rng);
        let x = Tensor::randn(7, 4, &mut rng);
        let loss = |m: &FaModel<f64>| {
            let tape = Tape::new();
            let p = bind(&tape, &m.params(), false);
            m.loss(&p, tape.constant(x.clone())).unwrap().item()
        };
        let base = loss(&model);
        let rot = Tensor::from_f64(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]).unwrap();
        model.w.value = model.w.value.matmul(&rot).unwrap();
        prop_assert!((loss(&model) - base).abs() < 1e-10);
    }
}

/// Random valid triple over `d` features: every feature gets one of the
/// three roles.
fn triple(d: usize) -> impl Strategy<Value = KnowledgeTriple> {
    (proptest::collection::vec(0..3usize, d), proptest::option::of("[a-z ]{1,8}")).prop_filter_map(
        "every role needs a feature",
        |(roles, label)| {
            let pick = |r: usize| roles.iter().enumerate().filter(|(_, &x)| x == r).map(|(i, _)| i).collect::<Vec<_>>();
            let (a, b, c) = (pick(0), pick(1), pick(2));
            if a.is_empty() || b.is_empty() || c.is_empty() {
                return None;
            }
            let t = KnowledgeTriple::new(a, b, c);
            Some(match label {
                Some(l) => t.with_label(l),
                None => t,
            })
        },
    )
}

fn knowledge_set() -> impl Strategy<Value = KnowledgeSet> {
    (3..9usize).prop_flat_map(|d| proptest::collection::vec(triple(d), 1..6).prop_map(move |t| KnowledgeSet::new(d, t)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn knowledge_json_round_trips(ks in knowledge_set()) {
        ks.validate(ks.d).unwrap();
        let back = KnowledgeSet::from_json(&ks.to_json(), "generated").unwrap();
        prop_assert_eq!(back, ks);
    }

    #[test]
    fn validation_blames_the_first_bad_triple(
        d in 2..6usize,
        raw in proptest::collection::vec(
            (proptest::collection::vec(0..7usize, 0..3), proptest::collection::vec(0..7usize, 0..3), proptest::collection::vec(0..7usize, 0..3)),
            1..5,
        ),
    ) {
        let triples: Vec<_> = raw.iter().map(|(a, b, c)| KnowledgeTriple::new(a.clone(), b.clone(), c.clone())).collect();
        let ok = |t: &KnowledgeTriple| {
            let sets = [t.reference(), t.plus(), t.minus()];
            sets.iter().all(|s| !s.is_empty() && s.iter().all(|&i| i < d))
                && sets.iter().enumerate().all(|(i, a)| sets[i + 1..].iter().all(|b| a.iter().all(|x| !b.contains(x))))
        };
        let first_bad = triples.iter().position(|t| !ok(t));
        match (KnowledgeSet::new(d, triples).validate(d), first_bad) {
            (Ok(()), None) => {}
            (Err(Error::Validation { triple, .. }), Some(pos)) => prop_assert_eq!(triple, Some(pos)),
            (other, want) => prop_assert!(false, "got {:?}, expected failure at {:?}", other, want),
        }
    }
}
