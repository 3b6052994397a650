use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::certify::{CertifyConfig, FKKT, GS2_2};

fn desk(n: usize) -> GanSaaInstance {
    GanSaaInstance::build(&GanConfig::desk(7, n)).unwrap()
}

fn random_in(rng: &mut ChaCha8Rng, len: usize, b: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-b..b)).collect()
}

/// Central-difference gradient of `f` in the block selected by `x_block`.
fn fd_block(inst: &GanSaaInstance, x: &[f64], y: &[f64], x_block: bool, h: f64) -> Vec<f64> {
    let len = if x_block { x.len() } else { y.len() };
    (0..len)
        .map(|k| {
            let (mut xp, mut yp, mut xm, mut ym) = (x.to_vec(), y.to_vec(), x.to_vec(), y.to_vec());
            if x_block {
                xp[k] += h;
                xm[k] -= h;
            } else {
                yp[k] += h;
                ym[k] -= h;
            }
            (inst.objective(&xp, &yp).unwrap() - inst.objective(&xm, &ym).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let s: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    d / s.max(1e-300)
}

/// Relative error against a central difference at step `h`, with the
/// difference's own roundoff `√len·4ε(1+|f|)/h` added to the allowance.
fn fd_agrees(g: &[f64], fd: &[f64], f: f64, h: f64, rel: f64) -> bool {
    let d: f64 = g.iter().zip(fd).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let s: f64 = fd.iter().map(|q| q * q).sum::<f64>().sqrt();
    let noise = (fd.len() as f64).sqrt() * 4.0 * f64::EPSILON * (1.0 + f.abs()) / h;
    d <= rel * s + noise
}

#[test]
fn generator_forward_kills_negative_coordinate() {
    let shape = GanShape::new(2, 2, 2).unwrap();
    let p = GeneratorParams { w1: vec![1.0, 0.0, 0.0, 1.0], w2: vec![1.0, 0.0, 0.0, 1.0], b1: vec![0.0; 2], b2: vec![0.0; 2] };
    let x = shape.pack(&p).unwrap();
    assert_eq!(generator_forward(&shape, &x, &[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
}

#[test]
fn discriminator_values() {
    assert_eq!(discriminator_forward(&[0.0, 0.0], &[0.3, -0.2]).unwrap(), 0.5);
    let d = discriminator_forward(&[40.0], &[1.0]).unwrap();
    let e = (-40.0f64).exp();
    let want = e / (1.0 + e);
    assert!((d - want).abs() <= 1e-12 * want, "{d:e}");
    assert!(discriminator_forward(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn objective_at_zero_discriminator() {
    let inst = desk(64);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let x = random_in(&mut rng, inst.n(), 3.0);
        let v = inst.objective(&x, &[0.0, 0.0]).unwrap();
        assert!((v + 2.0 * std::f64::consts::LN_2).abs() <= 1e-12, "{v}");
    }
}

#[test]
fn single_sample_identity_and_naive_agreement() {
    let mut inst = desk(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        inst.samples.xi1 = random_in(&mut rng, 2, 1.0);
        let x = random_in(&mut rng, inst.n(), 3.0);
        let y = random_in(&mut rng, 2, 5.0);
        let g = generator_forward(&inst.shape, &x, inst.samples.xi2(0, 2)).unwrap();
        let u1: f64 = y.iter().zip(&inst.samples.xi1).map(|(a, b)| a * b).sum();
        let u2: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let v = inst.objective(&x, &y).unwrap();
        let identity = -softplus(u1) + u2 - softplus(u2);
        assert!((v - identity).abs() <= 1e-12 * (1.0 + v.abs()));
        if u1.abs() <= 30.0 && u2.abs() <= 30.0 {
            // 1 − D written as e^u/(1+e^u) so the oracle itself has no cancellation.
            let d1 = 1.0 / (1.0 + u1.exp());
            let not_d2 = u2.exp() / (1.0 + u2.exp());
            let naive = d1.ln() + not_d2.ln();
            assert!((v - naive).abs() <= 1e-12 * naive.abs(), "{v} vs {naive}");
        }
        if u2.abs() <= 5.0 {
            let literal = (1.0 / (1.0 + u1.exp())).ln() + (1.0 - 1.0 / (1.0 + u2.exp())).ln();
            assert!((v - literal).abs() <= 1e-12 * literal.abs());
        }
        assert!(v < 0.0);
    }
}

#[test]
fn objective_strictly_negative() {
    let inst = desk(128);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = random_in(&mut rng, inst.n(), 3.0);
        let y = random_in(&mut rng, inst.m(), 5.0);
        assert!(inst.objective(&x, &y).unwrap() < 0.0);
    }
}

#[test]
fn gradients_match_central_differences() {
    let inst = desk(256);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    while checked < 50 {
        let x = random_in(&mut rng, inst.n(), 3.0);
        let y = random_in(&mut rng, inst.m(), 5.0);
        // Keep the difference stencil on one smooth piece.
        if inst.kink_certificate(&x).unwrap() < 1e-4 {
            continue;
        }
        let (gx, gy) = inst.gradients(&x, &y).unwrap();
        let f = inst.objective(&x, &y).unwrap();
        assert!(fd_agrees(&gx, &fd_block(&inst, &x, &y, true, 1e-6), f, 1e-6, 1e-5));
        assert!(fd_agrees(&gy, &fd_block(&inst, &x, &y, false, 1e-6), f, 1e-6, 1e-5));
        // An unsaturated discriminator keeps the gradients well above the difference noise.
        let y_small: Vec<f64> = y.iter().map(|v| v / 5.0).collect();
        let (gx, gy) = inst.gradients(&x, &y_small).unwrap();
        assert!(rel_err(&gx, &fd_block(&inst, &x, &y_small, true, 1e-6)) < 1e-5);
        assert!(rel_err(&gy, &fd_block(&inst, &x, &y_small, false, 1e-6)) < 1e-5);
        checked += 1;
    }
}

#[test]
fn grad_y_at_zero_is_half_difference_of_means() {
    let inst = desk(64);
    let x = inst.x_ref.clone();
    let (_, gy) = inst.gradients(&x, &[0.0, 0.0]).unwrap();
    let outs = inst.generator_outputs(&x).unwrap();
    for l in 0..2 {
        let want: f64 = (0..64).map(|j| -0.5 * inst.samples.xi1(j, 2)[l] + 0.5 * outs[j][l]).sum::<f64>() / 64.0;
        assert!((gy[l] - want).abs() <= 1e-14, "{} vs {want}", gy[l]);
    }
}

#[test]
fn output_weight_gradient_with_zero_weights() {
    let inst = desk(32);
    let sh = inst.shape;
    let p = GeneratorParams { w1: vec![0.0; 8], w2: vec![0.0; 8], b1: vec![0.2, 0.3, 0.4, 0.5], b2: vec![0.0; 2] };
    let x = sh.pack(&p).unwrap();
    let y = [0.7, -1.1];
    let (gx, _) = inst.gradients(&x, &y).unwrap();
    let got = sh.unpack(&gx).unwrap();
    // G = 0 so the output logit is 0 and the weight is σ(0) = ½.
    for i in 0..4 {
        for (l, yl) in y.iter().enumerate() {
            let want = 0.5 * yl * p.b1[i];
            assert!((got.w2[i * 2 + l] - want).abs() <= 1e-14);
        }
    }
    assert!(rel_err(&gx, &fd_block(&inst, &x, &y, true, 1e-6)) < 1e-5);
}

#[test]
fn hessian_yy_closed_form_at_zero() {
    let inst = desk(256);
    let x = inst.x_ref.clone();
    let (_, hyy) = inst.hessian_blocks(&x, &[0.0, 0.0]).unwrap();
    let outs = inst.generator_outputs(&x).unwrap();
    for a in 0..2 {
        for b in 0..2 {
            let want: f64 = -(0..256)
                .map(|j| {
                    let xi = inst.samples.xi1(j, 2);
                    0.25 * (xi[a] * xi[b] + outs[j][a] * outs[j][b])
                })
                .sum::<f64>()
                / 256.0;
            assert!((hyy[(a, b)] - want).abs() <= 1e-6, "({a},{b}) {} vs {want}", hyy[(a, b)]);
        }
    }
}

#[test]
fn hessians_symmetric_and_consistent_with_gradient_differences() {
    let inst = desk(128);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = inst.x_ref.clone();
    let y = random_in(&mut rng, 2, 2.0);
    let (hxx, hyy) = inst.hessian_blocks(&x, &y).unwrap();
    assert_eq!(hxx, hxx.transpose());
    assert_eq!(hyy, hyy.transpose());
    let h = 1e-5;
    for _ in 0..5 {
        let v = random_in(&mut rng, inst.n(), 1.0);
        let hv = &hxx * nalgebra::DVector::from_column_slice(&v);
        let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let (gp, _) = inst.gradients(&xp, &y).unwrap();
        let (gm, _) = inst.gradients(&xm, &y).unwrap();
        let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        assert!(rel_err(hv.as_slice(), &fd) < 1e-4);

        let w = random_in(&mut rng, 2, 1.0);
        let hw = &hyy * nalgebra::DVector::from_column_slice(&w);
        let yp: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a + h * b).collect();
        let ym: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a - h * b).collect();
        let (_, gp) = inst.gradients(&x, &yp).unwrap();
        let (_, gm) = inst.gradients(&x, &ym).unwrap();
        let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        assert!(rel_err(hw.as_slice(), &fd) < 1e-4);
    }
}

#[test]
fn objective_matches_registered_problem() {
    let params = serde_json::json!({"s": 4, "s1": 2, "s2": 2, "seed": 7, "n_samples": 64});
    let problem = crate::problem::build_example(crate::problem::ExampleId::GanSaa, Some(&params)).unwrap();
    let inst = desk(64);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let x = random_in(&mut rng, inst.n(), 3.0);
        let y = random_in(&mut rng, inst.m(), 5.0);
        assert_eq!(problem.eval(&x, &y).to_bits(), inst.objective(&x, &y).unwrap().to_bits());
    }
}

#[test]
fn kink_proximity_is_an_error() {
    let inst = desk(16);
    let mut x = inst.x_ref.clone();
    let (_, ob1, _) = inst.shape.offsets();
    let xi2 = inst.samples.xi2(0, 2).to_vec();
    // Put hidden unit 0 exactly at its kink for the first sample.
    x[ob1] = -(x[0] * xi2[0] + x[4] * xi2[1]);
    assert!(matches!(inst.gradients(&x, &[0.0, 0.0]), Err(Error::KinkProximity(_))));
    assert!(matches!(inst.hessian_blocks(&x, &[0.0, 0.0]), Err(Error::KinkProximity(_))));
    assert!(inst.kink_certificate(&x).unwrap() <= 1e-15);
}

#[test]
fn sampling_redraws_near_kinks() {
    let mut cfg = GanConfig::desk(11, 200);
    cfg.kink_tol = 0.05;
    let shape = cfg.shape().unwrap();
    let mut x = reference_parameters(&shape, 3, cfg.x_box);
    let (_, ob1, _) = shape.offsets();
    // Hidden unit 0 has pre-activation ξ₂[0], so about 5% of draws land inside the band.
    x[0] = 1.0;
    x[4] = 0.0;
    x[ob1] = 0.0;
    let inst = GanSaaInstance::with_reference(&cfg, x.clone(), 9).unwrap();
    assert!(inst.kink_certificate(&x).unwrap() > 0.05);

    cfg.kink_tol = 10.0;
    assert!(matches!(GanSaaInstance::with_reference(&cfg, x, 9), Err(Error::Sampling(_))));
}

#[test]
fn degenerate_rows_rejected() {
    let inst = desk(16);
    let sh = inst.shape;
    let mut p = sh.unpack(&inst.x_ref).unwrap();
    p.w1[1] = 0.0;
    p.w1[5] = 0.0;
    p.b1[1] = 0.0;
    let x = sh.pack(&p).unwrap();
    assert!(sh.has_degenerate_row(&x));
    let point = Point::new(x, vec![0.0, 0.0]);
    assert!(certify_gan_point(&inst, &point, &CertifyConfig::default()).is_err());
}

#[test]
fn config_validation() {
    assert!(GanSaaInstance::from_params(&serde_json::json!({"s": 4, "s1": 2})).is_err());
    assert!(GanSaaInstance::from_params(&serde_json::json!({"s": 4, "s1": 2, "s2": 2, "seed": 1, "bogus": 1})).is_err());
    assert!(GanSaaInstance::from_params(&serde_json::json!({"s": 0, "s1": 2, "s2": 2, "seed": 1})).is_err());
    let ok = GanSaaInstance::from_params(&serde_json::json!({"s": 4, "s1": 2, "s2": 2, "seed": 1, "n_samples": 8})).unwrap();
    assert_eq!(ok.samples.count, 8);
    let mut cfg = GanConfig::desk(1, 8);
    cfg.law = SampleLaw::TruncatedNormal;
    let inst = GanSaaInstance::build(&cfg).unwrap();
    assert!(inst.samples.xi1.iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn instance_round_trip() {
    let inst = desk(32);
    let mut buf = Vec::new();
    write_instance(&inst, &mut buf).unwrap();
    let back = read_instance(buf.as_slice()).unwrap();
    assert_eq!(back, inst);
    assert!(read_instance(&buf[..buf.len() - 3]).is_err());
    let mut extra = buf.clone();
    extra.push(0);
    assert!(read_instance(extra.as_slice()).is_err());
}

#[test]
fn gda_point_passes_first_order_kkt() {
    let inst = desk(32);
    let start = Point::new(inst.x_ref.clone(), vec![0.0, 0.0]);
    // The solver must stop below the KKT acceptance tolerance.
    let out = solve_gda(&inst, &start, &GdaConfig { tol: 1e-9, ..GdaConfig::default() });
    assert!(out.converged, "residual {}", out.residual);
    let report = certify_gan_point(&inst, &out.point, &CertifyConfig::default()).unwrap();
    assert!(report.passed(FKKT), "{:?}", report.outcome(FKKT));
    assert!(report.extras["kink_certificate"] > inst.config.kink_tol);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let random = Point::new(random_in(&mut rng, inst.n(), 1.0), random_in(&mut rng, 2, 1.0));
    let report = certify_gan_point(&inst, &random, &CertifyConfig::default()).unwrap();
    assert!(report.outcome(FKKT).unwrap().is_fail());
    assert!(report.residuals[FKKT] > 1e-3);
}

#[test]
fn symmetric_samples_cancel_discriminator_gradient() {
    let mut inst = desk(4);
    let sh = inst.shape;
    inst.samples.xi1 = vec![0.3, -0.8, -0.3, 0.8, 0.5, 0.1, -0.5, -0.1];
    // Output weights zero: every generated sample is b₂ = 0.
    let p = GeneratorParams { w1: vec![1.0; 8], w2: vec![0.0; 8], b1: vec![0.9, 0.8, 0.7, 0.6], b2: vec![0.0; 2] };
    let x = sh.pack(&p).unwrap();
    let (_, gy) = inst.gradients(&x, &[0.0, 0.0]).unwrap();
    assert!(gy.iter().all(|g| g.abs() <= 1e-15));
    let report = certify_gan_point(&inst, &Point::new(x, vec![0.0, 0.0]), &CertifyConfig::default()).unwrap();
    assert!(report.passed(GS2_2));
}

#[test]
fn chord_quotients_stabilize() {
    let inst = desk(64);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = [0.0f64; 2];
    for _ in 0..200 {
        let x = random_in(&mut rng, inst.n(), 3.0);
        let y = random_in(&mut rng, inst.m(), 5.0);
        let dx = random_in(&mut rng, inst.n(), 1.0);
        let dy = random_in(&mut rng, inst.m(), 1.0);
        let len = (dx.iter().chain(&dy).map(|v| v * v).sum::<f64>()).sqrt();
        for (slot, h) in [1e-2, 1e-4].into_iter().enumerate() {
            let xp: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + h * b).collect();
            let yp: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + h * b).collect();
            let q = (inst.objective(&xp, &yp).unwrap() - inst.objective(&x, &y).unwrap()).abs() / (h * len);
            worst[slot] = worst[slot].max(q);
        }
    }
    assert!(worst[0].is_finite() && worst[1] <= 2.0 * worst[0] + 1e-9, "{worst:?}");
}

proptest! {
    #[test]
    fn pack_round_trip(v in proptest::collection::vec(-3.0f64..3.0, 22)) {
        let sh = GanShape::new(4, 2, 2).unwrap();
        prop_assert_eq!(sh.pack(&sh.unpack(&v).unwrap()).unwrap(), v);
    }
}
