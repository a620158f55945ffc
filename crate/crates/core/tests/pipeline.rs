use approx::{assert_abs_diff_eq, assert_relative_eq};

use mlsmooth::analysis::{low_freq_ratio, max_rate, psd_of};
use mlsmooth::io::{read_motion, read_noise, synth_motion, write_motion, write_noise, Dtype};
use mlsmooth::metrics::evaluate;
use mlsmooth::noise::{amplitude_bound, gradient_bound, measure_gradient_constant, sk_perlin};
use mlsmooth::smoothing::{temporal_gaussian_smooth, Smoothing, SmoothingStrategy};
use mlsmooth::{MotionSequence, PerlinParams, SkeletonConfig};

#[test]
fn smoothed_and_reprojected_labels_stay_close_to_the_original() {
    let sk = SkeletonConfig::smpl();
    let m = synth_motion(300, 24, 60.0, 12, 2.0, 0.5).unwrap();
    let mut sm = Smoothing::new(SmoothingStrategy::SkPerlin(PerlinParams::default()), 0.1);
    sm.reproject = true;
    let out = sm.apply(&m, &sk, 3).unwrap();
    out.validate_rotations().unwrap();
    let err = evaluate(&out, &m, &sk).unwrap();
    // Labels move a few degrees, not tens of degrees.
    assert!(err.angular_deg > 0.1 && err.angular_deg < 10.0, "{err:?}");
    assert!(err.positional_cm < 10.0, "{err:?}");
}

#[test]
fn different_seeds_give_different_fields() {
    let sk = SkeletonConfig::smpl();
    let a = sk_perlin(&PerlinParams::default().with_seed(1), &sk, 100, 60.0).unwrap();
    let b = sk_perlin(&PerlinParams::default().with_seed(2), &sk, 100, 60.0).unwrap();
    assert_ne!(a.values(), b.values());
}

#[test]
fn fields_respect_bounds_across_frame_rates_and_scales() {
    let sk = SkeletonConfig::smpl();
    let g = measure_gradient_constant(200_000, 1e-6, 1);
    for (fps, base_scale, time_scale) in [(30.0, 0.07, 0.5), (120.0, 0.2, 1.0), (60.0, 0.05, 2.0)] {
        let pp = PerlinParams {
            base_scale,
            time_scale,
            ..PerlinParams::default()
        };
        let f = sk_perlin(&pp, &sk, 900, fps).unwrap();
        assert!(f.max_joint_norm() <= amplitude_bound(&pp, 6));
        // The finite-difference rate undershoots the continuous slope.
        assert!(max_rate(&f).unwrap() <= 1.05 * gradient_bound(&pp, g));
    }
}

#[test]
fn temporal_filter_preserves_channel_means_and_lowers_high_frequencies() {
    let m = synth_motion(600, 24, 60.0, 2, 8.0, 0.5).unwrap();
    let f = temporal_gaussian_smooth(&m, 3.0).unwrap();
    let mean = |s: &MotionSequence, j: usize, c: usize| {
        (0..s.frames()).map(|t| s.joint(t, j)[c]).sum::<f64>() / s.frames() as f64
    };
    for j in [0, 7, 23] {
        for c in 0..6 {
            assert_abs_diff_eq!(mean(&m, j, c), mean(&f, j, c), epsilon = 1e-12);
        }
    }
    let before = low_freq_ratio(&psd_of(&m).unwrap(), 2.0).unwrap();
    let after = low_freq_ratio(&psd_of(&f).unwrap(), 2.0).unwrap();
    assert!(after > before);
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth_motion(40, 24, 25.0, 8, 2.0, 0.5).unwrap();
    let path = dir.path().join("m.bin");
    write_motion(&path, &m).unwrap();
    assert_eq!(read_motion(&path).unwrap(), m);

    let sk = SkeletonConfig::smpl();
    let field = sk_perlin(&PerlinParams::default(), &sk, 40, 25.0).unwrap();
    let npath = dir.path().join("n.bin");
    write_noise(&npath, &field, Dtype::F32).unwrap();
    let back = read_noise(&npath).unwrap();
    for (a, b) in back.values().iter().zip(field.values()) {
        assert_relative_eq!(*a, *b, max_relative = 1e-6);
    }
    assert!(read_motion(&npath).is_err());
    assert!(read_motion(dir.path().join("missing.bin")).is_err());
}

#[test]
fn custom_skeleton_from_toml() {
    let sk = SkeletonConfig::smpl();
    let text = sk.scaled(0.5).to_toml_string();
    let parsed = SkeletonConfig::parse(&text).unwrap();
    assert_eq!(parsed.joint_count(), 24);
    for j in 0..24 {
        for a in 0..3 {
            assert_abs_diff_eq!(parsed.offset(j)[a], 0.5 * sk.offset(j)[a], epsilon = 1e-15);
        }
    }
    let f = sk_perlin(&PerlinParams::default(), &parsed, 60, 60.0).unwrap();
    assert_eq!(f.joints(), 24);
}
