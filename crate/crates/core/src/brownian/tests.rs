use std::f64::consts::PI;
use std::ops::ControlFlow;

use super::*;
use crate::lattice::modular_torus;
use crate::moebius::{distance_h2, MoebiusElement};
use crate::seed::derive_seed;
use crate::stats::{angle_uniformity_test, ks_two_sample, mean, stderr};

fn endpoint_distances(n: usize, t: f64, dt: f64, tag: &str) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let p = sample_path(HPoint::base(), t, dt, derive_seed(7, &format!("{tag}/{k}"))).unwrap();
            distance_h2(HPoint::base(), *p.points.last().unwrap()).unwrap()
        })
        .collect()
}

#[test]
fn paths_are_deterministic() {
    let a = sample_path(HPoint::base(), 2.0, 5e-3, 42).unwrap();
    let b = sample_path(HPoint::base(), 2.0, 5e-3, 42).unwrap();
    assert_eq!(a, b);
    let c = sample_path(HPoint::base(), 2.0, 5e-3, 43).unwrap();
    assert_ne!(a.points, c.points);
}

#[test]
fn consecutive_points_respect_cap() {
    let p = sample_path(HPoint::from_xy(0.3, 2.0).unwrap(), 5.0, 1e-2, 1).unwrap();
    assert_eq!(p.times[0], 0.0);
    assert!(p.times.windows(2).all(|w| w[0] < w[1]));
    assert!((p.duration() - 5.0).abs() < 1e-9);
    for w in p.points.windows(2) {
        assert!(distance_h2(w[0], w[1]).unwrap() <= DEFAULT_STEP_CAP + 1e-9);
    }
}

#[test]
fn invalid_configurations_rejected() {
    assert!(sample_path(HPoint::base(), 1.0, 0.0, 1).is_err());
    assert!(sample_path(HPoint::base(), 1e9, 1e-2, 1).is_err());
    let cfg = BrownianConfig { max_depth: 0, step_cap: 1e-4, ..BrownianConfig::default() };
    assert!(matches!(sample_path_with(HPoint::base(), 1.0, &cfg, 1), Err(Error::Sampler(_))));
}

#[test]
fn small_time_continuity() {
    let d = endpoint_distances(500, 1e-3, 1e-3, "small");
    assert!(mean(&d) <= 0.1, "{}", mean(&d));
}

#[test]
fn exact_density_is_normalised() {
    let m = HeatKernelModel::new(5.0).unwrap();
    let mass = simpson(|r| if r == 0.0 { 0.0 } else { m.exact_radial_density(r) }, 0.0, 40.0, 800);
    assert!((mass - 1.0).abs() < 2e-3, "{mass}");
}

#[test]
fn mean_distance_matches_exact_heat_kernel() {
    let t = 5.0;
    let m = HeatKernelModel::new(t).unwrap();
    let exact = simpson(|r| if r == 0.0 { 0.0 } else { r * m.exact_radial_density(r) }, 0.0, 40.0, 800);
    let d = endpoint_distances(2000, t, 5e-3, "mean");
    let (mu, se) = (mean(&d), stderr(&d));
    assert!((mu - exact).abs() < 3.0 * se, "sampled {mu} ± {se}, exact {exact}");
}

#[test]
fn heat_kernel_slope_of_exact_density_is_one() {
    // Feed the exact density through the same regression as the sampler.
    let t = 20.0;
    let m = HeatKernelModel::new(t).unwrap();
    let rs: Vec<f64> = (0..41).map(|k| 10.0 + 0.5 * k as f64).collect();
    let xs: Vec<f64> = rs.iter().map(|&r| m.gaussian_exponent(r)).collect();
    let ys: Vec<f64> = rs.iter().map(|&r| (m.exact_radial_density(r) / m.prefactor(r)).ln()).collect();
    let fit = crate::stats::linear_fit(&xs, &ys);
    assert!((fit.slope - 1.0).abs() < 0.02, "{}", fit.slope);
}

#[test]
fn exit_angles_from_ball_are_uniform() {
    let mut angles = Vec::new();
    let cfg = BrownianConfig::with_dt(1e-3);
    for k in 0..10_000u64 {
        let mut sampler = StepSampler::new(derive_seed(3, &format!("exit/{k}")), cfg.max_depth);
        let mut frame = Real2::identity();
        let mut done = false;
        while !done {
            let _ = sampler
                .step(cfg.dt, 0.05, &mut |_, h| {
                    frame = frame * h;
                    if frame.frob_sq() / 2.0 >= 1f64.cosh() {
                        done = true;
                        ControlFlow::Break(())
                    } else {
                        ControlFlow::Continue(())
                    }
                })
                .unwrap();
        }
        angles.push(frame.apply_base().angle_from_base());
    }
    let (_, p) = angle_uniformity_test(&angles, 20);
    assert!(p >= 0.01, "p = {p}");
}

#[test]
fn markov_restart() {
    let n = 600;
    let mut continued = Vec::new();
    let mut fresh = Vec::new();
    for k in 0..n {
        let p = sample_path(HPoint::base(), 3.0, 5e-3, derive_seed(9, &format!("a/{k}"))).unwrap();
        let j = p.index_near(1.0);
        continued.push(distance_h2(p.points[j], *p.points.last().unwrap()).unwrap());
        let q = sample_path(HPoint::base(), 2.0, 5e-3, derive_seed(9, &format!("b/{k}"))).unwrap();
        fresh.push(distance_h2(HPoint::base(), *q.points.last().unwrap()).unwrap());
    }
    let (_, p) = ks_two_sample(&continued, &fresh);
    assert!(p >= 0.01, "p = {p}");
}

#[test]
fn halving_dt_is_within_noise() {
    let a = endpoint_distances(800, 20.0, 5e-3, "dt1");
    let b = endpoint_distances(800, 20.0, 2.5e-3, "dt2");
    let (_, p) = ks_two_sample(&a, &b);
    assert!(p >= 0.01, "p = {p}");
}

#[test]
fn drift_is_one() {
    let d = endpoint_distances(100, 20.0, 5e-3, "drift");
    let v = mean(&d) / 20.0;
    assert!((0.95..=1.08).contains(&v), "{v}");
}

#[test]
fn constant_path_keeps_empty_word() {
    let s = modular_torus();
    let p = sample_path(HPoint::base(), 0.0, 5e-3, 1).unwrap();
    let t = track_word(&s, &p).unwrap();
    assert!(closed_loop_element(&s, &t, 0.0).unwrap().is_empty());
    assert_eq!(t.word_trace.unwrap().len(), 1);
}

#[test]
fn path_along_axis_of_x_ends_at_x() {
    let s = modular_torus();
    let x = s.eval(&Word::parse("X").unwrap());
    let theta = x.apply_base().angle_from_base();
    let len = crate::moebius::translation_length(&x).unwrap();
    let n = 1000;
    let step = Real2::from_element(&MoebiusElement::vertical_translation(len / n as f64));
    let mut tracker = WordTracker::new(&s, Real2::from_element(&MoebiusElement::rotation(theta)), 64, false).unwrap();
    for _ in 0..n {
        tracker.apply_step(step).unwrap();
    }
    assert_eq!(tracker.word().to_string(), "X");
    assert!(distance_h2(tracker.lifted_point(), x.apply_base()).unwrap() < 1e-9);
}

#[test]
fn streaming_matches_sample_then_track() {
    let s = modular_torus();
    let cfg = BrownianConfig::default();
    for k in 0..5 {
        let seed = derive_seed(1, &format!("stream/{k}"));
        let p = track_word(&s, &sample_path_with(HPoint::base(), 10.0, &cfg, seed).unwrap()).unwrap();
        let trace = p.word_trace.clone().unwrap();
        let mut words = vec![Word::identity()];
        let mut lifted = vec![HPoint::base()];
        simulate_tracked(&s, Real2::identity(), 10.0, &cfg, seed, |_, tr| {
            words.push(tr.word().clone());
            lifted.push(tr.lifted_point());
            Ok(())
        })
        .unwrap();
        assert_eq!(words.len(), p.len());
        trace.for_each_word(|j, w| assert_eq!(w, &words[j]));
        // Tracked lift agrees with the untracked product of steps.
        let last = p.len() - 1;
        let d = distance_h2(lifted[last], p.points[last]).unwrap();
        assert!(d < 1e-6, "{d}");
    }
}

#[test]
fn incremental_and_full_reduction_agree() {
    let s = modular_torus();
    let cfg = BrownianConfig { full_reduce_every: 1, ..BrownianConfig::default() };
    for k in 0..200 {
        simulate_tracked(&s, Real2::identity(), 20.0, &cfg, derive_seed(2, &format!("full/{k}")), |_, _| Ok(())).unwrap();
    }
}

#[test]
fn tracked_points_reduce_into_the_domain() {
    let s = modular_torus();
    let p = track_word(&s, &sample_path(HPoint::base(), 8.0, 5e-3, 77).unwrap()).unwrap();
    let trace = p.word_trace.as_ref().unwrap();
    trace.for_each_word(|j, w| {
        if j % 50 == 0 {
            let z0 = s.eval(&w.inverse()).apply(p.points[j]);
            let (_, extra) = s.reduce_point(z0).unwrap();
            assert!(extra.is_empty() || extra.len() <= 2, "{extra}");
        }
    });
}

#[test]
fn closing_word_norm_tracks_half_distance() {
    let s = modular_torus();
    let t = 40.0;
    let mut gaps = Vec::new();
    for k in 0..40 {
        let p = track_word(&s, &sample_path(HPoint::base(), t, 5e-3, derive_seed(4, &format!("close/{k}"))).unwrap()).unwrap();
        let w = closed_loop_element(&s, &p, t).unwrap();
        let norm = s.eval(&w).op_norm().ln();
        let d = distance_h2(HPoint::base(), *p.points.last().unwrap()).unwrap();
        gaps.push((norm - d / 2.0).abs() / t);
    }
    assert!(mean(&gaps) <= 0.05, "{}", mean(&gaps));
}

#[test]
fn exit_angle_oracle_uses_full_circle() {
    // Sanity check on the angle convention used by the exit test above.
    let z = HPoint::from_polar(1.0, -0.5 * PI);
    assert!((z.angle_from_base() + 0.5 * PI).abs() < 1e-12);
}
