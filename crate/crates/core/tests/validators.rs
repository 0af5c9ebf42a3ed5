mod common;

use common::*;
use cxval::counterexample::parse_counterexample;
use cxval::fixed_point::{OverflowMode, RoundingMode};
use cxval::polynomial::roots_of_coeffs;
use cxval::system::{DigitalSystem, RealizationKind};
use cxval::validators::{
    bauer_lco_free, check_limit_cycle, check_minimum_phase, check_overflow, check_stability,
    extract_oscillation, BauerResult, Evidence,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bauer_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut decided = 0;
    let mut cycles = 0;
    while decided < 40 {
        let order = rng.gen_range(1..=2);
        let s = random_stable_system(&mut rng, order, 0.99);
        let f = if order == 1 {
            fmt(rng.gen_range(2..=4), rng.gen_range(2..=8))
        } else {
            fmt(rng.gen_range(2..=3), rng.gen_range(2..=5))
        };
        let realization = SIMULABLE[rng.gen_range(0..3)];
        let (r, o) = random_modes(&mut rng);
        let got = bauer_lco_free(&s, f, r, o, realization, 1 << 16);
        let want = match &got {
            BauerResult::Undecided(_) => continue,
            _ => brute_force_has_cycle(&s, f, realization, r, o),
        };
        decided += 1;
        cycles += want as usize;
        assert_eq!(
            matches!(got, BauerResult::LcoPossible(_)),
            want,
            "{s:?} {f} {realization} {r:?} {o:?}"
        );
    }
    assert!(cycles > 0, "sample never produced a limit cycle");
}

#[test]
fn bauer_witness_is_a_real_cycle() {
    let s = DigitalSystem::new(vec![1.0], vec![1.0, -0.75], None).unwrap();
    let BauerResult::LcoPossible(w) = bauer_lco_free(
        &s,
        fmt(4, 4),
        RoundingMode::Round,
        OverflowMode::WrapAround,
        RealizationKind::DFI,
        1 << 16,
    ) else {
        panic!("dead band should sustain a constant output");
    };
    assert!(w.cycle.iter().all(|st| st.iter().any(|&v| v != 0.0)));
    assert!(w.outputs.iter().all(|&y| y != 0.0));
}

#[test]
fn bauer_declines_unstable_and_huge_problems() {
    let unstable = DigitalSystem::new(vec![1.0], vec![1.0, -1.5], None).unwrap();
    let r = bauer_lco_free(
        &unstable,
        fmt(4, 4),
        RoundingMode::Round,
        OverflowMode::Saturate,
        RealizationKind::DFI,
        1 << 16,
    );
    assert_eq!(r, BauerResult::Undecided("not linearly stable".into()));
    let big = DigitalSystem::new(vec![1.0], vec![1.0, -0.5, 0.1], None).unwrap();
    let r = bauer_lco_free(
        &big,
        fmt(8, 8),
        RoundingMode::Round,
        OverflowMode::Saturate,
        RealizationKind::DFI,
        1 << 16,
    );
    assert_eq!(r, BauerResult::Undecided("state space too large".into()));
}

#[test]
fn recovers_planted_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let order = rng.gen_range(1..=6);
        let (real, pairs) = random_roots(&mut rng, order, 0.95);
        let p = poly_from_roots(&real, &pairs);
        let found = roots_of_coeffs(&p).unwrap();
        let mut planted: Vec<num_complex::Complex64> = real
            .iter()
            .map(|&r| num_complex::Complex64::new(r, 0.0))
            .collect();
        for &(re, im) in &pairs {
            planted.push(num_complex::Complex64::new(re, im));
            planted.push(num_complex::Complex64::new(re, -im));
        }
        assert_eq!(found.roots.len(), planted.len());
        // Every planted root has a computed root nearby; clusters tolerate more.
        for z in &planted {
            let d = found
                .roots
                .iter()
                .map(|w| (w - z).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-5, "root {z} missed by {d}");
        }
    }
}

#[test]
fn stability_follows_the_quantized_poles() {
    let den = [1.0, 1.8, 1.14, 0.272];
    let s = DigitalSystem::new(vec![1.0], den.to_vec(), None).unwrap();
    let v = check_stability(
        &s,
        fmt(3, 13),
        RoundingMode::Round,
        RealizationKind::DFI,
        None,
    )
    .unwrap();
    assert!(!v.violated);
    let Evidence::Roots { max_modulus, .. } = v.evidence else {
        panic!()
    };
    assert!((max_modulus - 0.8).abs() < 1e-3);
    let u = DigitalSystem::new(vec![1.0], vec![1.0, -1.01], None).unwrap();
    assert!(
        check_stability(
            &u,
            fmt(3, 13),
            RoundingMode::Round,
            RealizationKind::DFI,
            None
        )
        .unwrap()
        .violated
    );
}

#[test]
fn minimum_phase_with_and_without_the_leading_coefficient() {
    let den = vec![1.0, 1.8, 1.14, 0.272];
    let five = DigitalSystem::new(vec![0.1, 1.0, -0.3, 0.3, -0.1], den.clone(), None).unwrap();
    let four = DigitalSystem::new(vec![1.0, -0.3, 0.3, -0.1], den, None).unwrap();
    let f = fmt(3, 13);
    let v5 =
        check_minimum_phase(&five, f, RoundingMode::Round, RealizationKind::DFI, None).unwrap();
    let v4 =
        check_minimum_phase(&four, f, RoundingMode::Round, RealizationKind::DFI, None).unwrap();
    assert!(v5.violated);
    assert!(!v4.violated);
}

#[test]
fn delta_realizations_map_roots_back() {
    let s = DigitalSystem::new(vec![1.0], vec![1.0, -0.5], None).unwrap();
    let v = check_stability(
        &s,
        fmt(4, 12),
        RoundingMode::Round,
        RealizationKind::DDFI,
        Some(0.5),
    )
    .unwrap();
    let Evidence::Roots { roots, .. } = v.evidence else {
        panic!()
    };
    assert!((roots[0].re - 0.5).abs() < 1e-3);
}

#[test]
fn fixture_limit_cycles_are_detected() {
    for name in [
        "second_order_DFI",
        "second_order_DFII",
        "second_order_TDFII",
    ] {
        let text = std::fs::read(fixture_dir("limit_cycle").join(format!("{name}.out"))).unwrap();
        let ce = parse_counterexample(&text).unwrap();
        let v = check_limit_cycle(&ce, RoundingMode::Round, OverflowMode::WrapAround).unwrap();
        assert!(v.violated, "{name}");
        let Evidence::Lco {
            period,
            amplitude,
            kind,
            ..
        } = v.evidence
        else {
            panic!()
        };
        assert_eq!(period, Some(2), "{name}");
        assert!(amplitude.unwrap() > 0.0);
        assert!(kind.is_some());
    }
}

#[test]
fn fixture_overflow_is_detected() {
    let ce = parse_counterexample(OVERFLOW_FIXTURE.as_bytes()).unwrap();
    let v = check_overflow(&ce, RoundingMode::Round, OverflowMode::WrapAround).unwrap();
    assert!(v.violated);
    let Evidence::Overflow { events, .. } = v.evidence else {
        panic!()
    };
    assert!(events.iter().any(|e| e.step == 6 && e.raw == 512.0));
}

#[test]
fn oscillation_extraction() {
    assert_eq!(
        extract_oscillation(&[0.0, 3.0, 1.0, 2.0, 1.0, 2.0]),
        Some((2, 1.0))
    );
    assert_eq!(extract_oscillation(&[5.0, 5.0]), Some((1, 0.0)));
    assert_eq!(extract_oscillation(&[1.0, 2.0, 3.0]), None);
}
