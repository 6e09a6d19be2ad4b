use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::moebius::distance_h2;
use crate::stats::chi_square_test;

fn w(s: &str) -> Word {
    Word::parse(s).unwrap()
}

/// All reduced words of length at most `n` (oracle, independent of the DFS).
fn words_up_to(n: usize) -> Vec<Word> {
    let mut all = vec![Word::identity()];
    let mut layer = vec![Word::identity()];
    for _ in 0..n {
        let mut next = Vec::new();
        for u in &layer {
            for k in 0..4u8 {
                let mut v = u.clone();
                if v.push(Letter(k)) {
                    next.push(v);
                }
            }
        }
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

/// Every reduced word up to `max_len` letters, filtered by displacement, with
/// no pruning at all.
fn exhaustive_ball(s: &FuchsianSurface, r: f64, max_len: usize) -> HashSet<Word> {
    fn go(s: &FuchsianSurface, m: Real2, word: &mut Word, left: usize, bound: f64, out: &mut HashSet<Word>) {
        if m.frob_sq() / 2.0 <= bound {
            out.insert(word.clone());
        }
        if left == 0 {
            return;
        }
        for l in s.all_letters() {
            if word.letters().last() == Some(&l.inverse()) {
                continue;
            }
            word.push(l);
            go(s, m * s.letter_matrix(l), word, left - 1, bound, out);
            word.pop();
        }
    }
    let mut out = HashSet::new();
    go(s, Real2::identity(), &mut Word::identity(), max_len, r.cosh() * (1.0 + 1e-15), &mut out);
    out
}

fn int_matrix(s: &FuchsianSurface, word: &str) -> [i64; 4] {
    let m = s.eval_real(&w(word));
    [m.a as i64, m.b as i64, m.c as i64, m.d as i64]
}

#[test]
fn modular_torus_traces_and_markov_identity() {
    let s = modular_torus();
    let tr = |x: &str| s.eval_real(&w(x)).trace();
    assert_eq!(tr("X"), 3.0);
    assert_eq!(tr("Y"), 3.0);
    assert_eq!(tr("XY"), 6.0);
    assert_eq!(tr("X").powi(2) + tr("Y").powi(2) + tr("XY").powi(2), tr("X") * tr("Y") * tr("XY"));
    assert_eq!(tr("XYxy"), -2.0);
    assert_eq!(int_matrix(&s, "XYxy"), [-7, 6, -6, 5]);
    assert_eq!(int_matrix(&s, "Xy"), [3, -1, 1, 0]);
    assert_eq!(int_matrix(&s, "XY"), [3, 4, 2, 3]);
}

#[test]
fn modular_torus_area_and_systole() {
    let s = modular_torus();
    assert!((s.area() - 2.0 * PI).abs() < 1e-6, "area {}", s.area());
    assert!((s.systole() - 2.0 * 1.5f64.acosh()).abs() < 1e-12);
    assert!((s.systole() - 1.924847).abs() < 1e-6);
    assert!((s.max_generator_displacement() - 3.5f64.acosh()).abs() < 1e-12);
}

#[test]
fn side_pairings_are_closed_under_inverse() {
    let s = modular_torus();
    let words: Vec<String> = s.side_pairings().iter().map(|p| p.word.to_string()).collect();
    assert_eq!(words, ["X", "x", "Y", "y", "Xy", "xY", "Yx", "yX"]);
    for p in s.side_pairings() {
        assert!(s.side_pairings().iter().any(|q| q.word == p.inverse_word));
    }
}

#[test]
fn non_lattice_generators_rejected() {
    let x = MoebiusElement::from_real(2.0, 1.0, 1.0, 1.0).unwrap();
    let rot = MoebiusElement::rotation(1.0);
    assert!(FuchsianSurface::new("bad", vec![x, rot], vec![]).is_err());
    let y = MoebiusElement::from_real(1.0, 1.0, 1.0, 2.0).unwrap();
    assert!(FuchsianSurface::new("bad", vec![x, y], vec![w("XY")]).is_err());
}

#[test]
fn reduce_point_examples() {
    let s = modular_torus();
    let (z0, word) = s.reduce_point(HPoint::base()).unwrap();
    assert_eq!(z0, HPoint::base());
    assert!(word.is_empty());
    let z = s.eval(&w("Xy")).apply_base();
    let (z0, word) = s.reduce_point(z).unwrap();
    assert!(distance_h2(z0, HPoint::base()).unwrap() < 1e-9);
    assert_eq!(word, w("Xy"));
}

fn q(z: HPoint) -> f64 {
    z.cosh_dist_to_base()
}

#[test]
fn reduce_point_random_points() {
    let s = modular_torus();
    let mut rng = crate::seed::rng_from_seed(11);
    for _ in 0..10_000 {
        let d = 12.0 * rng.random::<f64>().sqrt();
        let z = HPoint::from_polar(d, rng.random_range(0.0..2.0 * PI));
        let (z0, word) = s.reduce_point(z).unwrap();
        assert!(q(z0) <= q(z) * (1.0 + 1e-12));
        // z = ρ(word)·z0
        let back = s.eval(&word).apply(z0);
        assert!(distance_h2(back, z).unwrap() < 1e-6 * (1.0 + d.exp() * 1e-3));
        for l in s.all_letters() {
            let gz = s.letter_matrix(l).apply(z0.z());
            assert!(q(z0) <= q(HPoint::new(gz).unwrap()) + 1e-9);
        }
        let (z1, again) = s.reduce_point(z0).unwrap();
        assert!(again.is_empty(), "{again}");
        assert_eq!(z1, z0);
    }
}

#[test]
fn reduce_point_is_equivariant() {
    let s = modular_torus();
    let ball = enumerate_ball(&s, 8.0).unwrap();
    let mut rng = crate::seed::rng_from_seed(5);
    let mut checked = 0;
    for _ in 0..2000 {
        let g = &ball.elements[rng.random_range(0..ball.len())];
        let z = HPoint::from_polar(3.0 * rng.random::<f64>(), rng.random_range(0.0..2.0 * PI));
        let (z0, wz) = s.reduce_point(z).unwrap();
        // Skip points near a face, where ties make the word ambiguous.
        let margin = s
            .side_pairings()
            .iter()
            .map(|p| (q(HPoint::new(p.matrix.apply(z0.z())).unwrap()) - q(z0)) / q(z0))
            .fold(f64::INFINITY, f64::min);
        if margin < 1e-6 {
            continue;
        }
        let (_, wgz) = s.reduce_point(g.element.apply(z)).unwrap();
        assert_eq!(wgz, g.word.concat(&wz));
        checked += 1;
    }
    assert!(checked > 1500);
}

#[test]
fn frame_reduction_matches_point_reduction() {
    let s = modular_torus();
    let mut rng = crate::seed::rng_from_seed(3);
    for _ in 0..1000 {
        let z = HPoint::from_polar(10.0 * rng.random::<f64>(), rng.random_range(0.0..2.0 * PI));
        let (_, wp) = s.reduce_point(z).unwrap();
        let mut frame = Real2::from_point(z) * Real2::from_element(&MoebiusElement::rotation(rng.random::<f64>() * 6.0));
        let mut wf = Word::identity();
        s.reduce_frame(&mut frame, &mut wf).unwrap();
        assert_eq!(wp, wf);
        let (wu, p) = s.full_reduce(s.eval_real(&wf), frame).unwrap();
        assert_eq!(wu, wf);
        assert_eq!(p, Real2::identity());
    }
}

#[test]
fn ball_small_radii() {
    let s = modular_torus();
    let b0 = enumerate_ball(&s, 0.0).unwrap();
    assert_eq!(b0.len(), 1);
    assert!(b0.elements[0].word.is_empty());
    // r = 2: identity and the four letters (d = arccosh 3.5 ≈ 1.9248); Xy has d = arccosh 5.5.
    let b2 = enumerate_ball(&s, 2.0).unwrap();
    let oracle: HashSet<Word> = words_up_to(3).into_iter().filter(|u| s.eval_real(u).frob_sq() / 2.0 <= 2f64.cosh()).collect();
    let got: HashSet<Word> = b2.elements.iter().map(|e| e.word.clone()).collect();
    assert_eq!(got, oracle);
    assert_eq!(got.len(), 5);
    assert!(enumerate_ball(&s, 15.0).is_err());
}

#[test]
fn ball_matches_exhaustive_words() {
    let s = modular_torus();
    const MAX_LEN: usize = 15;
    for r in [3.0, 4.5, 6.0] {
        let ball = enumerate_ball(&s, r).unwrap();
        let got: HashSet<Word> = ball.elements.iter().map(|e| e.word.clone()).collect();
        assert_eq!(got.len(), ball.len());
        let longest = got.iter().map(Word::len).max().unwrap();
        assert!(longest < MAX_LEN, "oracle too short for r = {r}: {longest}");
        let oracle = exhaustive_ball(&s, r, MAX_LEN);
        assert_eq!(got, oracle, "r = {r}");
        assert!(ball.elements.windows(2).all(|p| p[0].distance <= p[1].distance));
        assert_eq!(ball.duplicates_removed, 0);
    }
}

#[test]
fn balls_are_nested() {
    let s = modular_torus();
    let small: HashSet<Word> = enumerate_ball(&s, 5.0).unwrap().elements.into_iter().map(|e| e.word).collect();
    let large: HashSet<Word> = enumerate_ball(&s, 7.0).unwrap().elements.into_iter().map(|e| e.word).collect();
    assert!(small.is_subset(&large));
}

#[test]
fn ball_counts_follow_hyperbolic_area() {
    // #B(r) ≈ Area(B_H(r)) / Area(X) = 2π(cosh r − 1) / 2π.
    let s = modular_torus();
    let ball = enumerate_ball(&s, 12.0).unwrap();
    let mut prev_gap = f64::INFINITY;
    for r in [8.0, 10.0, 12.0] {
        let n = ball.count_within(r) as f64;
        let ratio = n / (r.cosh() - 1.0);
        let gap = (ratio - 1.0).abs();
        assert!(gap < 0.15, "r = {r}: ratio {ratio}");
        assert!(gap < prev_gap + 0.02);
        prev_gap = gap;
    }
}

#[test]
fn cache_roundtrip() {
    let s = modular_torus();
    let dir = tempfile::tempdir().unwrap();
    let ball = enumerate_ball(&s, 5.0).unwrap();
    let path = store_ball(dir.path(), &s, &ball).unwrap();
    let back = load_ball(&path, &s, 5.0).unwrap().unwrap();
    assert_eq!(back.len(), ball.len());
    for (a, b) in back.elements.iter().zip(&ball.elements) {
        assert_eq!(a.word, b.word);
        assert_eq!(a.distance, b.distance);
        assert!(a.element.approx_eq(&b.element, 0.0));
    }
    assert!(load_ball(&dir.path().join("missing"), &s, 5.0).unwrap().is_none());
}

#[test]
fn uniform_ball_sampling() {
    let s = modular_torus();
    assert!(s.sample_ball_uniform(0.0, 1).unwrap().is_empty());
    let ball = ball_cached(&s, 6.0).unwrap();
    let index: HashMap<Word, usize> = ball.elements.iter().enumerate().map(|(k, e)| (e.word.clone(), k)).collect();
    let mut counts = vec![0u64; ball.len()];
    let mut rng = crate::seed::rng_from_seed(99);
    for _ in 0..100_000 {
        counts[index[&ball.sample(6.0, &mut rng).word]] += 1;
    }
    let expected = vec![100_000.0 / ball.len() as f64; ball.len()];
    let (_, p) = chi_square_test(&counts, &expected);
    assert!(p >= 0.01, "p = {p}");
    assert_eq!(s.sample_ball_uniform(6.0, 7).unwrap(), s.sample_ball_uniform(6.0, 7).unwrap());
}

#[test]
fn shortest_geodesics() {
    let s = modular_torus();
    let sys = s.systole();
    let classes = enumerate_geodesics(&s, sys + 1e-6, false).unwrap();
    // Oracle: conjugacy classes of words up to length 4 with |tr| = 3.
    let oracle: HashSet<Word> = words_up_to(4)
        .into_iter()
        .filter(|u| !u.is_empty() && (s.eval_real(u).trace().abs() - 3.0).abs() < 1e-9)
        .map(|u| u.conjugacy_representative())
        .collect();
    let got: HashSet<Word> = classes.iter().map(|c| c.cyclic_word.clone()).collect();
    assert_eq!(got, oracle);
    assert!(classes.iter().all(|c| (c.length - sys).abs() < 1e-12));
}

#[test]
fn geodesic_margin_is_sufficient() {
    let s = modular_torus();
    let a = enumerate_geodesics_with(&s, 7.0, false, GEODESIC_SEARCH_MARGIN, 11.0).unwrap();
    let b = enumerate_geodesics_with(&s, 7.0, false, GEODESIC_SEARCH_MARGIN + 2.5, 11.0).unwrap();
    assert_eq!(a.len(), b.len());
    assert_eq!(a, b);
}

#[test]
fn geodesics_are_loxodromic_and_conjugation_invariant() {
    let s = modular_torus();
    let classes = enumerate_geodesics(&s, 6.0, false).unwrap();
    assert!(!classes.is_empty());
    for c in &classes {
        let g = s.eval(&c.cyclic_word);
        assert_eq!(classify(&g, DEFAULT_TOL), Classification::Loxodromic);
        let u = w("XyY");
        let conj = u.concat(&c.cyclic_word).concat(&u.inverse());
        assert_eq!(conj.conjugacy_representative(), c.cyclic_word);
        assert!((translation_length(&s.eval(&conj)).unwrap() - c.length).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn eval_is_homomorphism(a in "[XxYy]{0,8}", b in "[XxYy]{0,8}") {
        let s = modular_torus();
        let (wa, wb) = (w(&a), w(&b));
        let lhs = s.eval_real(&wa.concat(&wb));
        let rhs = s.eval_real(&wa) * s.eval_real(&wb);
        prop_assert_eq!(lhs, rhs);
    }
}
