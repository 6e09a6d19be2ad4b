use std::f64::consts::PI;

use rand::Rng as _;

use super::*;
use crate::lattice::{modular_torus, Letter, Word};
use crate::lyapunov::{PathParams, Representation, Schedule};
use crate::moebius::{Complex, MoebiusElement};
use crate::seed::rng_from_seed;
use crate::stats::chi_square_test;

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

fn w(s: &str) -> Word {
    Word::parse(s).unwrap()
}

/// `X = [[λ, −1], [1, 0]]`, `Y` fixed: `tr² X − t = λ² − t` has zeros at `±√t`.
fn trace_family(rect: Rect) -> ParameterFamily {
    ParameterFamily::new("trace", rect, vec![], |l| {
        Ok(vec![MoebiusElement::new(l, c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))?, MoebiusElement::from_real(2.0, 1.0, 1.0, 1.0)?])
    })
    .unwrap()
}

fn random_word(rng: &mut impl rand::Rng, min: usize, max: usize) -> Word {
    loop {
        let len = rng.random_range(min..=max);
        let v = Word::from_letters((0..len).map(|_| Letter(rng.random_range(0..4u8)))).cyclic_reduce();
        if v.len() >= min {
            return v;
        }
    }
}

#[test]
fn maskit_commutator_is_parabolic() {
    // Hand-multiplied commutator of [[a, b], [b, 0]] (b = −i) and [[1, 2], [0, 1]].
    let oracle = |mu: Complex| {
        let (a, b) = (c(0.0, -1.0) * mu, c(0.0, -1.0));
        let x = [a, b, b, c(0.0, 0.0)];
        let xi = [c(0.0, 0.0), -b, -b, a];
        let y = [c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let yi = [c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let m = |p: [Complex; 4], q: [Complex; 4]| [p[0] * q[0] + p[1] * q[2], p[0] * q[1] + p[1] * q[3], p[2] * q[0] + p[3] * q[2], p[2] * q[1] + p[3] * q[3]];
        let k = m(m(m(x, y), xi), yi);
        (k[0] + k[3]) * (k[0] + k[3])
    };
    let fam = maskit_family();
    for mu in [c(0.0, 1.9), c(0.5, 1.8), c(0.0, 2.0)] {
        assert!((oracle(mu) - 4.0).norm() < 1e-9);
        assert!(fam.constraint_defect(mu).unwrap() < 1e-9);
        let [x, y]: [MoebiusElement; 2] = fam.images(mu).unwrap().try_into().unwrap();
        assert!((x.det() - 1.0).norm() < 1e-12 && (y.det() - 1.0).norm() < 1e-12);
        assert_eq!(y.trace_sq(), c(4.0, 0.0));
        assert!(fam.representation(mu).unwrap().parabolic_ok());
    }
}

#[test]
fn constraint_holds_on_every_grid_node() {
    let s = modular_torus();
    for fam in [maskit_family(), trace_triple_family(3.0).unwrap()] {
        let spec = GridSpec::new(fam.rect(), 41, 41).unwrap();
        let worst = spec.nodes().iter().map(|&l| fam.constraint_defect(l).unwrap()).fold(0.0, f64::max);
        assert!(worst <= 1e-9, "{}: {worst}", fam.name());
    }
    // At λ = 3 the trace-triple family has the traces of the modular torus.
    let tt = trace_triple_family(3.0).unwrap();
    for word in ["X", "Y", "XY", "Xy", "XXYxY", "XYxy"] {
        let a = tt.trace_sq(c(3.0, 0.0), &w(word)).unwrap();
        let b = s.eval(&w(word)).trace_sq();
        assert!((a - b).norm() < 1e-9 * b.norm().max(1.0), "{word}: {a} vs {b}");
    }
    assert!(trace_triple_family(1.0).is_err());
}

#[test]
fn constant_family_gives_flat_grid() {
    let s = modular_torus();
    let can = Representation::canonical(&s);
    let fam = constant_family(&can, maskit_family().rect()).unwrap();
    let spec = GridSpec::new(fam.rect(), 9, 7).unwrap();
    let est = GridEstimator::LatticeTrace { schedule: Schedule::default(), n_draws: 300 };
    let g = lyapunov_grid(&s, &fam, &spec, &est, 3).unwrap();
    assert!(g.chi.iter().all(|&v| v == g.chi[0]));
    assert!(g.ddc.iter().filter(|v| v.is_finite()).all(|&v| v == 0.0));
    assert_eq!(g.ddc.iter().filter(|v| v.is_finite()).count(), 7 * 5);
}

#[test]
fn lattice_grid_is_deterministic_and_refines_exactly() {
    let s = modular_torus();
    let fam = maskit_family();
    let est = GridEstimator::LatticeTrace { schedule: Schedule::default(), n_draws: 800 };
    let coarse = lyapunov_grid(&s, &fam, &GridSpec::new(fam.rect(), 41, 41).unwrap(), &est, 11).unwrap();
    let fine = lyapunov_grid(&s, &fam, &GridSpec::new(fam.rect(), 81, 81).unwrap(), &est, 11).unwrap();
    for j in 0..41 {
        for i in 0..41 {
            assert_eq!(coarse.spec.node(i, j), fine.spec.node(2 * i, 2 * j));
            assert_eq!(coarse.chi_at(i, j).to_bits(), fine.chi_at(2 * i, 2 * j).to_bits());
        }
    }
    assert!(coarse.chi.iter().all(|&v| v >= 0.0));
    let again = lyapunov_grid(&s, &fam, &GridSpec::new(fam.rect(), 41, 41).unwrap(), &est, 11).unwrap();
    assert_eq!(coarse.to_text(), again.to_text());
}

#[test]
fn brownian_grid_reuses_one_ensemble() {
    let s = modular_torus();
    let fam = maskit_family();
    let spec = GridSpec::new(fam.rect(), 4, 3).unwrap();
    let est = GridEstimator::Brown { params: PathParams::brownian(6.0, 12, 1e-2) };
    let a = lyapunov_grid(&s, &fam, &spec, &est, 5).unwrap();
    let b = lyapunov_grid(&s, &fam, &spec, &est, 5).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    assert!(a.chi.iter().all(|&v| v >= 0.0) && a.stderr.iter().all(|&v| v > 0.0));
    let big = GridSpec::new(fam.rect(), 42, 42).unwrap();
    assert!(matches!(lyapunov_grid(&s, &fam, &big, &est, 5), Err(crate::Error::Resource(_))));
}

#[test]
fn grid_text_round_trip() {
    let spec = GridSpec::new(Rect::new(-1.0, 1.0, 0.5, 2.0).unwrap(), 5, 4).unwrap();
    let vals: Vec<f64> = (0..20).map(|k| if k == 7 { f64::NAN } else { (k as f64 * 0.37).sin() / 3.0 }).collect();
    let mut g = CurrentGrid::from_values(spec, vals, serde_json::json!({ "seed": 4 })).unwrap();
    g.compute_ddc();
    let back = CurrentGrid::parse(&g.to_text()).unwrap();
    assert_eq!(back.to_text(), g.to_text());
    assert!(back.chi[7].is_nan() && back.chi[3] == g.chi[3]);
    assert_eq!(back.holes(), 1);
    assert!(CurrentGrid::parse("rect 0 1 0 1\nsize 3\n").is_err());
}

fn field(spec: &GridSpec, f: impl Fn(Complex) -> f64) -> Vec<f64> {
    spec.nodes().into_iter().map(f).collect()
}

#[test]
fn ddc_of_harmonic_and_quadratic_potentials() {
    let spec = GridSpec::new(Rect::new(0.5, 2.0, 0.5, 2.0).unwrap(), 61, 61).unwrap();
    let d = ddc_field(&spec, &field(&spec, |l| l.norm().ln()));
    assert!(d.iter().filter(|v| v.is_finite()).all(|v| v.abs() < 1e-6));
    let q = ddc_field(&spec, &field(&spec, |l| l.norm_sqr()));
    let expected = 4.0 * spec.cell_area() / (2.0 * PI);
    assert!(q.iter().filter(|v| v.is_finite()).all(|v| (v - expected).abs() < 1e-6));
    // Boundary nodes carry no value.
    assert!(q[spec.index(0, 3)].is_nan() && q[spec.index(60, 60)].is_nan());
}

#[test]
fn ddc_unit_mass_conventions() {
    let spec = GridSpec::new(Rect::new(-2.0, 2.0, -2.0, 2.0).unwrap(), 201, 201).unwrap();
    let eq = ddc_field(&spec, &field(&spec, |l| l.norm().ln().max(0.0)));
    assert!((total_mass(&eq) - 1.0).abs() < 0.05, "{}", total_mass(&eq));
    // All the mass sits near the unit circle.
    let off: f64 = (0..spec.len())
        .filter(|&k| eq[k].is_finite() && (spec.nodes()[k].norm() - 1.0).abs() > 0.1)
        .map(|k| eq[k].abs())
        .sum();
    assert!(off < 1e-3, "{off}");
    let pt = ddc_field(&spec, &field(&spec, |l| (l - c(0.33, -0.21)).norm().ln().max(-40.0)));
    assert!((total_mass(&pt) - 1.0).abs() < 0.01);
}

#[test]
fn ddc_is_linear_and_skips_holes() {
    let spec = GridSpec::new(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 21, 21).unwrap();
    let a = field(&spec, |l| (3.0 * l.re).sin() * l.im.cosh());
    let b = field(&spec, |l| l.norm_sqr().sqrt());
    let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.5 * x - 0.75 * y).collect();
    let (da, db, dc) = (ddc_field(&spec, &a), ddc_field(&spec, &b), ddc_field(&spec, &comb));
    for k in 0..spec.len() {
        if dc[k].is_finite() {
            assert!((dc[k] - (2.5 * da[k] - 0.75 * db[k])).abs() < 1e-12);
        }
    }
    let mut holed = a.clone();
    holed[spec.index(10, 10)] = f64::NAN;
    let dh = ddc_field(&spec, &holed);
    for (i, j) in [(10, 10), (9, 10), (11, 10), (10, 9), (10, 11)] {
        assert!(dh[spec.index(i, j)].is_nan());
    }
    assert_eq!(dh[spec.index(9, 9)], da[spec.index(9, 9)]);
}

#[test]
fn smoothed_current_is_nonnegative() {
    let spec = GridSpec::new(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 31, 31).unwrap();
    let mut rng = rng_from_seed(2);
    let noisy: Vec<f64> = field(&spec, |l| l.norm_sqr()).into_iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
    let d = ddc_field(&spec, &noisy);
    assert!(d.iter().any(|&v| v < 0.0));
    let s = smooth_nonnegative(&spec, &d);
    assert!(s.iter().filter(|v| v.is_finite()).all(|&v| v >= 0.0));
    assert_eq!(s.iter().filter(|v| v.is_finite()).count(), d.iter().filter(|v| v.is_finite()).count());
}

#[test]
fn divisor_of_known_polynomial() {
    let rect = Rect::new(-2.0, 2.0, -1.0, 1.0).unwrap();
    let fam = trace_family(rect);
    let spec = GridSpec::new(rect, 41, 21).unwrap();
    let r = divisor_zeros(&fam, &w("X"), c(1.0, 0.0), &spec, 1.0).unwrap();
    assert_eq!(r.total_zeros, 2);
    let mut cells: Vec<Complex> = r.cells.iter().map(|k| spec.node(k.i, k.j)).collect();
    cells.sort_by(|a, b| a.re.total_cmp(&b.re));
    assert!((cells[0] - c(-1.0, 0.0)).norm() < 1e-9 && (cells[1] - c(1.0, 0.0)).norm() < 1e-9);
    assert!((r.total_mass() - 1.0).abs() < 1e-12);
    // λ² has a double zero at the origin.
    let d = divisor_zeros(&fam, &w("X"), c(0.0, 0.0), &spec, 2.0).unwrap();
    assert_eq!(d.cells, vec![DivisorCell { i: 20, j: 10, multiplicity: 2 }]);
    assert!((d.total_mass() - 0.5).abs() < 1e-12);
}

#[test]
fn divisor_shifts_off_exact_hits() {
    let rect = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
    let spec = GridSpec::new(rect, 21, 21).unwrap();
    // Zeros at ±0.05 lie on the dual edges x = ±0.05.
    let r = divisor_zeros(&trace_family(rect), &w("X"), c(0.0025, 0.0), &spec, 1.0).unwrap();
    assert_eq!(r.total_zeros, 2);
    assert!(r.t != c(0.0025, 0.0) && (r.t.re - 0.0025).abs() < 1e-8);
}

#[test]
fn divisor_conventions_for_constant_traces() {
    let fam = maskit_family();
    let spec = GridSpec::new(fam.rect(), 21, 21).unwrap();
    let r = divisor_zeros(&fam, &w("XYxy"), c(5.0, 0.0), &spec, 3.0).unwrap();
    assert_eq!(r.total_zeros, 0);
    assert!(!r.whole_space && r.total_mass() == 0.0);
    let z = divisor_zeros(&fam, &w("XYxy"), c(4.0, 0.0), &spec, 3.0).unwrap();
    assert!(z.whole_space && z.cells.is_empty() && z.total_mass() == 0.0);
    assert!(divisor_zeros(&fam, &w("X"), c(4.0, 0.0), &spec, 0.0).is_err());
}

#[test]
fn cell_windings_add_up_to_the_outer_winding() {
    let s = modular_torus();
    let fam = maskit_family();
    let spec = GridSpec::new(fam.rect(), 15, 13).unwrap();
    let (hx, hy) = (spec.hx() / 2.0, spec.hy() / 2.0);
    let r = fam.rect();
    let outer = [
        c(r.re_min + hx, r.im_min + hy),
        c(r.re_max - hx, r.im_min + hy),
        c(r.re_max - hx, r.im_max - hy),
        c(r.re_min + hx, r.im_max - hy),
    ];
    let mut rng = rng_from_seed(8);
    let t = c(4.0, 0.0);
    let mut nonzero = 0;
    for _ in 0..100 {
        let word = random_word(&mut rng, 1, 8);
        let d = divisor_zeros(&fam, &word, t, &spec, displacement_normalizer(&s, &word).max(1.0)).unwrap();
        if d.whole_space {
            continue;
        }
        assert!(d.ambiguous.is_empty(), "{word}");
        let total = winding_number(|l| fam.trace_sq(l, &word).unwrap() - d.t, &outer).unwrap();
        assert_eq!(d.total_zeros, total, "{word}");
        nonzero += usize::from(total != 0);
    }
    assert!(nonzero >= 5, "only {nonzero} words had zeros");
}

#[test]
fn winding_number_rejects_zeros_on_the_boundary() {
    let square = [c(-1.0, -1.0), c(1.0, -1.0), c(1.0, 1.0), c(-1.0, 1.0)];
    assert_eq!(winding_number(|z| z * z * z, &square).unwrap(), 3);
    assert_eq!(winding_number(|z| z.inv(), &square).unwrap(), -1);
    assert_eq!(winding_number(|z| z - c(3.0, 0.0), &square).unwrap(), 0);
    assert!(winding_number(|z| z - c(1.0, 0.0), &square).is_err());
    assert!(winding_number(|z| z, &square[..2]).is_err());
}

#[test]
fn poincare_lelong_on_a_grid() {
    let s = modular_torus();
    let fam = maskit_family();
    let spec = GridSpec::new(fam.rect(), 61, 61).unwrap();
    let mut rng = rng_from_seed(21);
    for word in [w("XX"), w("xYxx")].into_iter().chain((0..4).map(|_| random_word(&mut rng, 3, 8))) {
        let cmp = lelong_comparison(&fam, &word, c(4.0, 0.0), &spec, displacement_normalizer(&s, &word), 3).unwrap();
        assert!(cmp.relative_error() <= 0.1, "{word}: {cmp:?}");
    }
    let one = lelong_comparison(&fam, &w("XX"), c(4.0, 0.0), &spec, 2.0, 3).unwrap();
    assert!((one.divisor_mass - 0.25).abs() < 1e-12, "{one:?}");
}

#[test]
fn shortest_classes_are_drawn_uniformly() {
    let s = modular_torus();
    let sampler = GeodesicSampler::new(&s, GeodesicModel::LengthBased, s.systole() + 0.01).unwrap();
    let classes = sampler.classes();
    assert_eq!(classes.len(), 6);
    let mut counts = vec![0u64; classes.len()];
    for k in 0..6000 {
        let g = sampler.sample(k).unwrap();
        assert!(g.length <= g.t);
        counts[classes.iter().position(|c| c.cyclic_word == g.word).unwrap()] += 1;
    }
    let (_, p) = chi_square_test(&counts, &[1000.0; 6]);
    assert!(p > 0.001, "{counts:?}");
    assert!(GeodesicSampler::new(&s, GeodesicModel::LengthBased, 1.0).is_err());
    assert!(GeodesicSampler::new(&s, GeodesicModel::LengthBased, 20.0).is_err());
}

#[test]
fn thurston_closures_keep_their_length() {
    let s = modular_torus();
    let sampler = GeodesicSampler::new(&s, GeodesicModel::Thurston, 15.0).unwrap();
    let samples: Vec<GeodesicSample> = (0..200).map(|k| sampler.sample(k).unwrap()).collect();
    let mean = samples.iter().map(|g| g.length / 15.0).sum::<f64>() / 200.0;
    assert!((0.9..=1.05).contains(&mean), "{mean}");
    for g in &samples {
        assert_eq!(g.word, g.word.conjugacy_representative());
    }
    assert_eq!(sampler.sample(3).unwrap(), random_geodesic(&s, GeodesicModel::Thurston, 15.0, 3).unwrap());
}

#[test]
fn closures_are_mostly_primitive() {
    let s = modular_torus();
    for model in [GeodesicModel::Thurston, GeodesicModel::Brownian] {
        let sampler = GeodesicSampler::new(&s, model, 12.0).unwrap();
        let n = if model == GeodesicModel::Thurston { 400 } else { 100 };
        let powers = (0..n).filter(|&k| sampler.sample(k).unwrap().word.is_proper_power()).count();
        assert!(powers as f64 / n as f64 <= 0.05, "{model:?}: {powers}/{n}");
    }
}

#[test]
fn equidistribution_for_a_constant_family() {
    let s = modular_torus();
    let can = Representation::canonical(&s);
    let fam = constant_family(&can, maskit_family().rect()).unwrap();
    let spec = GridSpec::new(fam.rect(), 11, 11).unwrap();
    let grid = lyapunov_grid(&s, &fam, &spec, &GridEstimator::LatticeTrace { schedule: Schedule::default(), n_draws: 500 }, 1).unwrap();
    let cfg = EquidistConfig { model: GeodesicModel::LengthBased, radii: vec![6.0, 8.0], t: c(5.0, 0.3), bin: 3, beta_radius: None };
    let rep = equidist_experiment(&s, &fam, &grid, &cfg, 2).unwrap();
    for (st, u) in rep.steps.iter().zip(&rep.potentials) {
        assert_eq!(st.divisor_mass, 0.0);
        assert!(st.potential_mass.abs() < 1e-12 && st.mass_distance < 1e-12);
        assert!(u.iter().all(|&v| v == u[0]));
        assert!(st.max_excess.is_nan());
    }
}

#[test]
fn equidistribution_potentials_stay_below_the_comparison_bound() {
    let s = modular_torus();
    let fam = maskit_family();
    let spec = GridSpec::new(fam.rect(), 9, 9).unwrap();
    let grid = lyapunov_grid(&s, &fam, &spec, &GridEstimator::LatticeTrace { schedule: Schedule::default(), n_draws: 500 }, 1).unwrap();
    let cfg = EquidistConfig { model: GeodesicModel::LengthBased, radii: vec![6.0, 8.0, 10.0], t: c(4.0, 0.0), bin: 2, beta_radius: Some(8.0) };
    let rep = equidist_experiment(&s, &fam, &grid, &cfg, 9).unwrap();
    assert_eq!(rep.steps.len(), 3);
    assert_eq!(rep.beta.len(), spec.len());
    for st in &rep.steps {
        assert!(st.max_excess <= 0.5, "{st:?}");
        assert!(st.l1_distance.is_finite() && st.length <= st.radius);
    }
    assert_eq!(rep, equidist_experiment(&s, &fam, &grid, &cfg, 9).unwrap());
}

#[test]
fn jorgensen_heuristic() {
    let s = modular_torus();
    let can = Representation::canonical(&s);
    let score = discreteness_heuristic(&can, 4).unwrap();
    assert!(score >= 1.0, "{score}");
    let conj = MoebiusElement::new(c(2.0, 0.5), c(1.0, 0.0), c(1.0, 0.0), (c(1.0, 0.0) + 1.0) / c(2.0, 0.5)).unwrap();
    let moved = discreteness_heuristic(&can.conjugated(&conj), 4).unwrap();
    assert!((moved - score).abs() < 1e-9 * score.max(1.0));
    // An irrational rotation has powers close to the identity.
    let theta = 2.0 * PI / (1.0 + 5f64.sqrt()) * 0.5;
    let ell = MoebiusElement::from_real(theta.cos(), -theta.sin(), theta.sin(), theta.cos()).unwrap();
    let bad = Representation::new("elliptic", vec![ell, s.generators()[1]], vec![w("XYxy")]).unwrap();
    assert!(discreteness_heuristic(&bad, 8).unwrap() < 1.0);
    assert!(discreteness_heuristic(&can, 0).is_err() && discreteness_heuristic(&can, 9).is_err());
}
