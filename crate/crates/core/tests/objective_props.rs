mod support;

use proptest::prelude::*;
use stsim::objective::{
    batch_loss, batch_loss_gradient, expected_score, gold_distribution, pcc_score_gradient, pearson, Batch, LossKind,
    CLASSES,
};
use support::*;

fn group(k: usize) -> Batch<f64> {
    Batch::from_probs(&WORKED_PROBS[3 * k..3 * k + 3], &WORKED_GOLDS).unwrap()
}

#[test]
fn worked_example_expected_scores() {
    for (p, want) in WORKED_PROBS.iter().zip(WORKED_EXPECTED) {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(
            (expected_score(p) - want).abs() < 5e-3,
            "{} vs {want}",
            expected_score(p)
        );
    }
}

#[test]
fn worked_example_losses() {
    for k in 0..2 {
        let b = group(k);
        let mse = batch_loss(LossKind::Mse, &b).unwrap();
        let kld = batch_loss(LossKind::Kld, &b).unwrap();
        let pcc = -batch_loss(LossKind::Pcc, &b).unwrap();
        assert!((mse - WORKED_MSE[k]).abs() < 5e-3, "group {k} mse {mse}");
        assert!((kld - WORKED_KLD[k]).abs() < 1e-2, "group {k} kld {kld}");
        assert!((pcc - WORKED_PCC[k]).abs() < 1e-3, "group {k} pcc {pcc}");
    }
}

#[test]
fn lower_mse_and_kld_need_not_mean_higher_correlation() {
    let (a, b) = (group(0), group(1));
    assert!(batch_loss(LossKind::Mse, &a).unwrap() < batch_loss(LossKind::Mse, &b).unwrap());
    assert!(batch_loss(LossKind::Kld, &a).unwrap() < batch_loss(LossKind::Kld, &b).unwrap());
    assert!(-batch_loss(LossKind::Pcc, &a).unwrap() < -batch_loss(LossKind::Pcc, &b).unwrap());
}

#[test]
fn pearson_matches_reference() {
    let y = [2.95, 3.15, 4.2];
    assert!((pearson(&y, &WORKED_GOLDS).unwrap() - reference_pearson(&y, &WORKED_GOLDS)).abs() < 1e-12);
    assert!((pearson(&y, &WORKED_GOLDS).unwrap() - 0.931).abs() < 1e-3);
}

#[test]
fn kld_equals_nll_for_integer_golds() {
    let golds = [0.0, 1.0, 3.0, 5.0, 2.0, 4.0];
    let b = Batch::from_probs(&WORKED_PROBS, &golds).unwrap();
    let kld = batch_loss(LossKind::Kld, &b).unwrap();
    let nll = batch_loss(LossKind::Nll, &b).unwrap();
    assert_eq!(kld, nll);
}

#[test]
fn pcc_gradient_vanishes_at_affine_optimum() {
    let gold = [0.5, 1.7, 2.2, 3.9, 4.4];
    for (a, b) in [(1.0, 0.0), (0.3, 1.1), (2.0, -3.0)] {
        let y: Vec<f64> = gold.iter().map(|g| a * g + b).collect();
        let g = pcc_score_gradient(&y, &gold);
        assert!(g.iter().all(|v| v.abs() < 1e-8), "{g:?}");
    }
}

fn simplex(raw: &[f64]) -> [f64; CLASSES] {
    let t: f64 = raw.iter().sum();
    std::array::from_fn(|i| raw[i] / t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gold_distribution_is_minimal_support(y in 0.0f64..=5.0) {
        let p = gold_distribution(y).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        let nz: Vec<usize> = (0..CLASSES).filter(|&i| p[i] > 0.0).collect();
        prop_assert!(nz.len() <= 2);
        if nz.len() == 2 {
            prop_assert_eq!(nz[1], nz[0] + 1);
        }
        prop_assert!((expected_score(&p) - y).abs() < 1e-12);
    }

    #[test]
    fn pcc_loss_is_affine_invariant(
        y in prop::collection::vec(0.0f64..5.0, 3..12),
        seed in any::<u64>(),
        a in 0.01f64..=10.0,
        b in -5.0f64..=5.0,
    ) {
        let mut rng = stsim::numkit::SeededRng::new(seed);
        let gold: Vec<f64> = y.iter().map(|_| rng.uniform(0.0, 5.0)).collect();
        let base = pearson(&y, &gold).unwrap();
        let moved: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        prop_assert!((pearson(&moved, &gold).unwrap() - base).abs() < 1e-9);
        let flipped: Vec<f64> = y.iter().map(|v| -a * v + b).collect();
        prop_assert!((pearson(&flipped, &gold).unwrap() + base).abs() < 1e-9);
    }

    #[test]
    fn mse_gradient_has_closed_form(
        raw in prop::collection::vec(prop::collection::vec(0.01f64..1.0, CLASSES), 2..6),
        gold_seed in any::<u64>(),
    ) {
        let mut rng = stsim::numkit::SeededRng::new(gold_seed);
        let probs: Vec<[f64; CLASSES]> = raw.iter().map(|r| simplex(r)).collect();
        let golds: Vec<f64> = probs.iter().map(|_| rng.uniform(0.0, 5.0)).collect();
        let batch = Batch::from_probs(&probs, &golds).unwrap();
        let grads = batch_loss_gradient(LossKind::Mse, &batch).unwrap();
        let n = probs.len() as f64;
        for (k, g) in grads.iter().enumerate() {
            let dy = 2.0 * (expected_score(&probs[k]) - golds[k]) / n;
            for (i, gi) in g.iter().enumerate() {
                prop_assert!((gi - dy * i as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pcc_gradient_matches_finite_differences(
        y in prop::collection::vec(0.0f64..5.0, 3..8),
        seed in any::<u64>(),
    ) {
        let mut rng = stsim::numkit::SeededRng::new(seed);
        let gold: Vec<f64> = y.iter().map(|_| rng.uniform(0.0, 5.0)).collect();
        let spread = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 0.1);
        let g = pcc_score_gradient(&y, &gold);
        let h = 1e-6;
        for k in 0..y.len() {
            let mut up = y.clone();
            let mut down = y.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (-reference_pearson(&up, &gold) + reference_pearson(&down, &gold)) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() < 1e-6, "k={} analytic {} fd {}", k, g[k], fd);
        }
    }
}
