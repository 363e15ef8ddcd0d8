use gmoea::common::{dominates, Dominance, FeCounter, RngStream};
use gmoea::{evaluate_population, rescale, BoxBounds, Individual, Population, ScaleDirection};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rescale_round_trips(
        boxes in prop::collection::vec((-1e3f64..1e3, 1e-6f64..1e3, 0.0f64..=1.0), 1..20)
    ) {
        let lower: Vec<f64> = boxes.iter().map(|s| s.0).collect();
        let upper: Vec<f64> = boxes.iter().map(|s| s.0 + s.1).collect();
        let bounds = BoxBounds::new(lower.clone(), upper.clone()).unwrap();
        let x: Vec<f64> = boxes.iter().map(|s| (s.0 + s.2 * s.1).min(s.0 + s.1)).collect();
        let unit = rescale(&x, &bounds, ScaleDirection::ToUnit).unwrap();
        prop_assert!(unit.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = rescale(&unit, &bounds, ScaleDirection::FromUnit).unwrap();
        for i in 0..x.len() {
            let scale = 1.0f64.max(lower[i].abs()).max(upper[i].abs());
            prop_assert!((back[i] - x[i]).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn dominance_is_antisymmetric(
        a in prop::collection::vec(0u8..4, 3), b in prop::collection::vec(0u8..4, 3)
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = dominates(&a, &b).unwrap();
        let ba = dominates(&b, &a).unwrap();
        let flipped = match ab {
            Dominance::ADominatesB => Dominance::BDominatesA,
            Dominance::BDominatesA => Dominance::ADominatesB,
            other => other,
        };
        prop_assert_eq!(ba, flipped);
        prop_assert_eq!(dominates(&a, &a).unwrap(), Dominance::Equal);
    }
}

#[test]
fn dominance_is_transitive() {
    let mut rng = RngStream::new(1, 0);
    let mut checked = 0;
    while checked < 1000 {
        let mut draw = || -> Vec<f64> { (0..3).map(|_| rng.random_range(0..4) as f64).collect() };
        let (a, b, c) = (draw(), draw(), draw());
        if dominates(&a, &b).unwrap() == Dominance::ADominatesB && dominates(&b, &c).unwrap() == Dominance::ADominatesB {
            assert_eq!(dominates(&a, &c).unwrap(), Dominance::ADominatesB);
            checked += 1;
        }
    }
}

#[test]
fn fe_counter_charges_every_evaluation_once() {
    let p = gmoea::problems::make_problem("IMF2", 6).unwrap();
    let mut rng = RngStream::new(2, 0);
    let mut fe = FeCounter::new(25);
    let mut spent = 0;
    for n in [10, 7, 8] {
        let mut pop = Population::new((0..n).map(|_| Individual::new(p.bounds().sample_uniform(&mut rng))).collect()).unwrap();
        let before = fe.remaining();
        evaluate_population(&p, &mut pop, &mut fe).unwrap();
        spent += before - fe.remaining();
        assert!(pop.iter().all(|m| m.is_evaluated()));
    }
    assert_eq!(spent, 25);
    assert_eq!(fe.used(), 25);
    let mut extra = Population::new(vec![Individual::new(p.bounds().midpoint())]).unwrap();
    assert!(evaluate_population(&p, &mut extra, &mut fe).is_err());
    assert_eq!(fe.used(), 25);
}
