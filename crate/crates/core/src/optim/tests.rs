use super::*;
use crate::params::init_state;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar(name: &str, rank2: bool, x: f64) -> ParamTensor {
    let shape = if rank2 { vec![1, 1] } else { vec![1] };
    ParamTensor::new(name, shape, vec![x]).unwrap()
}

fn vector(values: &[f64]) -> ParamTensor {
    ParamTensor::new("w", vec![values.len()], values.to_vec()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn sgdw_examples() {
    let mut p = vec![scalar("x", false, 1.0)];
    let mut s = init_state(&p).unwrap();
    sgdw_step(&mut p, &mut s, &[vec![1.0]], 0.1, 0.9, 0.0).unwrap();
    assert_eq!(s.slots[0].m[0], 1.0);
    assert!(close(p[0].values()[0], 0.9, 1e-15));
    sgdw_step(&mut p, &mut s, &[vec![1.0]], 0.1, 0.9, 0.0).unwrap();
    assert!(close(s.slots[0].m[0], 1.9, 1e-15));
    assert!(close(p[0].values()[0], 0.71, 1e-15));
    assert_eq!(s.t, 2);

    let mut p = vec![scalar("w", true, 1.0)];
    let mut s = init_state(&p).unwrap();
    sgdw_step(&mut p, &mut s, &[vec![0.0]], 0.1, 0.9, 0.01).unwrap();
    assert!(close(p[0].values()[0], 0.999, 1e-15));
}

#[test]
fn adamw_first_step_is_signed_lr() {
    let hp = HyperParams::default();
    let mut p = vec![scalar("x", false, 0.0)];
    let mut s = init_state(&p).unwrap();
    let r = adamw_step(&mut p, &mut s, &[vec![0.5]], 0.001, &hp).unwrap();
    assert!(close(r.tensors[0].update[0], 0.5 / (1e-12 + 0.5), 1e-15));
    assert!(close(p[0].values()[0], -0.001, 1e-9));

    let mut p = vec![vector(&[0.3, -0.2])];
    let mut s = init_state(&p).unwrap();
    adamw_step(&mut p, &mut s, &[vec![0.0, 0.0]], 0.001, &hp).unwrap();
    assert_eq!(p[0].values(), &[0.3, -0.2]);
}

#[test]
fn ada2ms_alpha_one_first_step() {
    let hp = HyperParams::default();
    let mut p = vec![scalar("x", false, 0.0)];
    let mut s = init_state(&p).unwrap();
    ada2ms_step(&mut p, &mut s, &[vec![0.5]], 0.001, 1.0, &hp).unwrap();
    assert!(close(p[0].values()[0], -0.001, 1e-9));
}

// Direct evaluation of the first-step formulas: at t = 1 the stored
// moments equal g, g^2 and |g|^2.
fn first_step_oracle(g: &[f64], alpha: f64) -> Vec<f64> {
    let d = g.len() as f64;
    let n: f64 = g.iter().map(|x| x * x).sum();
    g.iter()
        .map(|&gi| {
            let s = (gi * gi).powf(alpha) * (n / d).powf(1.0 - alpha);
            gi / s.sqrt()
        })
        .collect()
}

#[test]
fn ada2ms_first_step_oracles() {
    let hp = HyperParams::default();
    let g = vec![3.0, 4.0];

    let expected0 = first_step_oracle(&g, 0.0);
    assert!(close(expected0[0], 0.848_528_137_423_857, 1e-12));
    assert!(close(expected0[1], 1.131_370_849_898_476, 1e-12));
    let expected_half = first_step_oracle(&g, 0.5);
    assert!((expected_half[0] - 0.921_155_870_319_381).abs() < 1e-12);
    assert!((expected_half[1] - 1.063_659_179_388_998).abs() < 1e-12);

    for (alpha, expected) in [(0.0, &expected0), (0.5, &expected_half)] {
        let mut p = vec![vector(&[0.0, 0.0])];
        let mut s = init_state(&p).unwrap();
        let r = ada2ms_step(&mut p, &mut s, std::slice::from_ref(&g), 1e-3, alpha, &hp).unwrap();
        assert_eq!(s.slots[0].n, 25.0);
        for (u, e) in r.tensors[0].update.iter().zip(expected.iter()) {
            assert!(close(*u, *e, 1e-10), "alpha={alpha}: {u} vs {e}");
        }
    }

    let mut p = vec![vector(&[0.0, 0.0])];
    let mut s = init_state(&p).unwrap();
    let r =
        ada2ms_alpha0_reference_step(&mut p, &mut s, std::slice::from_ref(&g), 1e-3, &hp).unwrap();
    for (u, e) in r.tensors[0].update.iter().zip(&expected0) {
        assert!(close(*u, *e, 1e-10));
    }
}

#[test]
fn reference_symmetric_gradient_gives_unit_update() {
    let hp = HyperParams::default();
    for c in [1e-3, 0.7, 42.0] {
        let mut p = vec![vector(&[1.0, 1.0])];
        let mut s = init_state(&p).unwrap();
        let r = ada2ms_alpha0_reference_step(&mut p, &mut s, &[vec![c, c]], 1e-2, &hp).unwrap();
        for u in &r.tensors[0].update {
            assert!(close(*u, 1.0, 1e-9));
        }
    }
}

#[test]
fn rejects_bad_gradients() {
    let hp = HyperParams::default();
    let mut p = vec![vector(&[1.0, 2.0])];
    let mut s = init_state(&p).unwrap();
    let err = adamw_step(&mut p, &mut s, &[vec![1.0, f64::NAN]], 0.1, &hp).unwrap_err();
    assert!(matches!(err, Error::NonFiniteGradient { ref name, index: 1 } if name == "w"));
    assert!(err.to_string().contains("`w`"));
    assert!(matches!(
        sgdw_step(&mut p, &mut s, &[vec![1.0]], 0.1, 0.9, 0.0),
        Err(Error::ShapeMismatch { .. })
    ));
    assert!(matches!(
        ada2ms_step(&mut p, &mut s, &[vec![1.0, 1.0]], 0.1, 1.5, &hp),
        Err(Error::AlphaOutOfRange(_))
    ));
    // nothing moved
    assert_eq!(s.t, 0);
    assert_eq!(p[0].values(), &[1.0, 2.0]);
}

#[test]
fn zero_gradient_with_zero_moments_is_finite_for_all_alpha() {
    let hp = HyperParams::default();
    for alpha in [0.0, 0.3, 1.0] {
        let mut p = vec![vector(&[1.0, -1.0])];
        let mut s = init_state(&p).unwrap();
        let r = ada2ms_step(&mut p, &mut s, &[vec![0.0, 0.0]], 0.1, alpha, &hp).unwrap();
        assert!(r.tensors[0].update.iter().all(|u| *u == 0.0));
    }
}

#[test]
fn reformulated_ema_matches_bias_corrected_ema() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for beta in [0.9, 0.99] {
        let (mut fast, mut plain) = (123.0_f64, 0.0_f64);
        for t in 1..=10_000u64 {
            let g: f64 = 1.0 + 0.3 * rng.gen::<f64>();
            let b = reformulated_rate(beta, t);
            fast = b * fast + (1.0 - b) * g;
            plain = beta * plain + (1.0 - beta) * g;
            let corrected = plain / (1.0 - beta_pow(beta, t));
            assert!(close(fast, corrected, 1e-12), "beta={beta} t={t}");
        }
    }
    assert_eq!(reformulated_rate(0.9, 1), 0.0);
}

#[test]
fn decoupled_decay_difference() {
    let hp = HyperParams::default();
    let eta = 0.05;
    let lambda = 0.1;
    let g = vec![0.3, -0.7, 1.1, 0.2];
    for (shape, decayed) in [(vec![2, 2], true), (vec![4], false)] {
        let theta = vec![1.0, -2.0, 0.5, 3.0];
        let run = |lam: f64| {
            let mut p = vec![ParamTensor::new("p", shape.clone(), theta.clone()).unwrap()];
            let mut s = init_state(&p).unwrap();
            ada2ms_step(
                &mut p,
                &mut s,
                std::slice::from_ref(&g),
                eta,
                0.4,
                &hp.with_lambda(lam),
            )
            .unwrap();
            p[0].values().to_vec()
        };
        let (with, without) = (run(lambda), run(0.0));
        for i in 0..4 {
            let diff = with[i] - without[i];
            let expected = if decayed {
                -eta * lambda * theta[i]
            } else {
                0.0
            };
            assert!((diff - expected).abs() <= 4.0 * f64::EPSILON * theta[i].abs().max(1.0));
        }
    }
}

#[test]
fn update_rms_is_l2_over_sqrt_len() {
    let hp = HyperParams::default();
    let mut p = vec![
        vector(&[0.0; 5]),
        ParamTensor::zeros("m", vec![2, 3]).unwrap(),
    ];
    let mut s = init_state(&p).unwrap();
    let grads = vec![vec![0.1, -0.2, 0.3, 0.0, 5.0], vec![1.0; 6]];
    let r = ada2ms_step(&mut p, &mut s, &grads, 0.01, 0.5, &hp).unwrap();
    for u in &r.tensors {
        assert_eq!(u.rms, u.l2 / (u.update.len() as f64).sqrt());
    }
}

proptest! {
    #[test]
    fn mixed_power_is_continuous_at_endpoints(
        g in prop::collection::vec(0.05f64..3.0, 2..8),
        signs in prop::collection::vec(any::<bool>(), 8),
        warm in 1usize..5,
    ) {
        let g: Vec<f64> = g.iter().zip(&signs).map(|(x, s)| if *s { *x } else { -*x }).collect();
        let hp = HyperParams::default();
        let run = |alpha: f64| {
            let mut p = vec![vector(&vec![0.0; g.len()])];
            let mut s = init_state(&p).unwrap();
            for _ in 0..warm {
                ada2ms_step(&mut p, &mut s, std::slice::from_ref(&g), 0.0, 1.0, &hp).unwrap();
            }
            ada2ms_step(&mut p, &mut s, std::slice::from_ref(&g), 0.0, alpha, &hp).unwrap().tensors[0].update.clone()
        };
        let (u0, u1) = (run(0.0), run(1.0));
        let (n0, n1) = (run(1e-12), run(1.0 - 1e-12));
        for i in 0..g.len() {
            prop_assert!(close(u0[i], n0[i], 1e-9));
            prop_assert!(close(u1[i], n1[i], 1e-9));
        }
    }
}
