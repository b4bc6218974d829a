//! Every certified verdict must be reproducible from the quantities stored in
//! its result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semcert_core::aliasing::{aliasing_bound, AliasKind, IntervalGrid};
use semcert_core::classifiers::SyntheticClassifier;
use semcert_core::pipeline::{
    bc_chain, certify_bc_rectangle, certify_diff_resolvable, certify_resolvable, region_admitted, ParameterSet, Verdict,
};
use semcert_core::radii::{closed_form_radius, ConfidencePair, DistributionSpec};
use semcert_core::smoothing::{progressive_certify, radius_for, ProgressiveStatus, SmoothedQuery};
use semcert_core::statfn::{clopper_pearson_lower, ConfidenceParams};
use semcert_core::tensor::ImageTensor;
use semcert_core::transforms::{rotate, TransformKind, TransformSpec};

fn smooth_image(seed: u64, mean: f64) -> ImageTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c) = (rng.random_range(0.2..0.9), rng.random_range(0.2..0.9), rng.random_range(0.0..0.15));
    ImageTensor::from_fn(1, 9, 9, |_, i, j| (mean + c * (a * i as f64).sin() * (b * j as f64).cos()).clamp(0.0, 1.0))
        .unwrap()
}

#[test]
fn blur_verdicts_reproduce_from_stored_radius() {
    let h = SyntheticClassifier::mean_threshold(0.5).unwrap();
    let noise = DistributionSpec::exponential(0.5, 1).unwrap();
    let conf = ConfidenceParams::new(0.001, 500, 50).unwrap();
    let q = SmoothedQuery::new(&h, TransformSpec::new(TransformKind::GaussianBlur), noise.clone(), conf, 3).unwrap();
    let mut seen = [0usize; 3];
    for s in 0..12 {
        let x = smooth_image(s, 0.3 + 0.04 * s as f64);
        let label = usize::from(x.mean() > 0.5);
        for alpha_max in [0.5, 4.0, 12.0] {
            let region = ParameterSet::BlurInterval { alpha_max };
            let r = certify_resolvable(&x, label, &q, &region).unwrap();
            seen[r.verdict as usize] += 1;
            if r.verdict == Verdict::Certified {
                let radius = r.radius.as_ref().unwrap();
                assert!(r.p_a_lower > 0.5);
                assert_eq!(
                    *radius,
                    closed_form_radius(&noise, ConfidencePair::two_class(r.p_a_lower).unwrap()).unwrap()
                );
                assert!(region_admitted(radius, &region));
                assert!(alpha_max < radius.value);
                assert_eq!(r.predicted_class, Some(label));
            }
        }
    }
    assert!(seen[Verdict::Certified as usize] > 0 && seen[Verdict::NotCertified as usize] > 0);
}

#[test]
fn bc_verdicts_reproduce_from_stored_chain() {
    let h = SyntheticClassifier::mean_threshold(0.5).unwrap();
    let (sigma, tau) = (0.2, 0.1);
    let noise = DistributionSpec::gaussian(vec![sigma, tau]).unwrap();
    let conf = ConfidenceParams::new(0.001, 1000, 100).unwrap();
    let q = SmoothedQuery::new(&h, TransformSpec::new(TransformKind::BrightnessContrast), noise, conf, 11).unwrap();
    let rect = ParameterSet::BcRectangle { k_min: -0.05, k_max: 0.05, b_min: -0.02, b_max: 0.02 };
    let mut certified = 0;
    for s in 0..16 {
        let x = smooth_image(100 + s, 0.3 + 0.025 * s as f64);
        let label = usize::from(x.mean() > 0.5);
        let r = certify_bc_rectangle(&x, label, &q, &rect).unwrap();
        if r.verdict == Verdict::Certified {
            certified += 1;
            let chain = r.bc.unwrap();
            assert_eq!(chain, bc_chain(r.p_a_lower, sigma, tau, &rect).unwrap());
            assert!(chain.p_shifted > 0.5 && chain.lhs_max < chain.rhs);
        }
    }
    assert!(certified > 0);
}

#[test]
fn translation_reflect_verdicts_reproduce() {
    let h = SyntheticClassifier::mean_threshold(0.5).unwrap();
    let noise = DistributionSpec::gaussian(vec![2.0, 3.0]).unwrap();
    let conf = ConfidenceParams::new(0.001, 200, 20).unwrap();
    let q = SmoothedQuery::new(&h, TransformSpec::new(TransformKind::TranslationReflect), noise, conf, 5).unwrap();
    let x = smooth_image(9, 0.7);
    for rho in [1.0, 3.0, 7.0] {
        let region = ParameterSet::TranslationDisk { rho };
        let r = certify_resolvable(&x, 1, &q, &region).unwrap();
        let radius = r.radius.unwrap();
        let expected = if rho / 2.0 < radius.value / 2.0 { Verdict::Certified } else { Verdict::NotCertified };
        assert_eq!(r.verdict, expected, "rho={rho}");
    }
}

#[test]
fn rotation_verdict_reproduces_from_anchor_summary() {
    let x = smooth_image(21, 0.5);
    // Rotation zeroes pixels outside the disk, so the ball is centered on the masked image.
    let h = SyntheticClassifier::l2_ball(rotate(&x, 0.0), 3.0).unwrap();
    let noise = DistributionSpec::gaussian_iso(0.2, 1).unwrap();
    let conf = ConfidenceParams::new(0.001, 800, 50).unwrap();
    let q = SmoothedQuery::new(&h, TransformSpec::new(TransformKind::Rotation), noise, conf, 1).unwrap();
    let grid = IntervalGrid::new(-0.02, 0.02, 20, 20, AliasKind::Rotation).unwrap();
    let region = ParameterSet::Interval { a: -0.02, b: 0.02 };
    let r = certify_diff_resolvable(&x, 1, &q, &region, &grid, 200).unwrap();
    assert_eq!(r.verdict, Verdict::Certified, "{r:?}");
    let bound = r.aliasing.as_ref().unwrap();
    assert_eq!(bound, &aliasing_bound(&x, &grid).unwrap());
    let anchors = r.anchors.unwrap();
    assert_eq!(anchors.anchors, 20);
    assert_eq!(anchors.evaluated, 20);
    assert!(anchors.min_radius > bound.sqrt_m);
    assert!((anchors.joint_alpha - 0.02).abs() < 1e-15);
}

#[test]
fn progressive_early_stops_clear_the_target() {
    let h = SyntheticClassifier::mean_threshold(0.5).unwrap();
    let noise = DistributionSpec::gaussian_iso(0.5, 1).unwrap();
    let conf = ConfidenceParams::new(0.01, 4000, 100).unwrap();
    let q = SmoothedQuery::new(&h, TransformSpec::new(TransformKind::Rotation), noise.clone(), conf, 2).unwrap();
    for (s, target) in [(0u64, 0.1), (1, 0.3), (2, 0.6), (3, 1.0)] {
        let x = smooth_image(200 + s, 0.58);
        let o = progressive_certify(&q, &x, target, 400).unwrap();
        if o.status == ProgressiveStatus::Certified {
            // The same counts with the split error rate reproduce the radius.
            let p = clopper_pearson_lower(o.hits, o.estimation_samples, o.alpha_per_check).unwrap();
            assert_eq!(p, o.p_a_lower);
            assert!(radius_for(&noise, p).unwrap() > target);
            // Never looser than a single-shot bound at the same cumulative n.
            assert!(p <= clopper_pearson_lower(o.hits, o.estimation_samples, 0.01).unwrap());
        }
        assert_eq!(o.alpha_per_check, 0.01 / 10.0);
    }
}
