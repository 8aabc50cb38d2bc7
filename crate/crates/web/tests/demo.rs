use hedge_core::pricing::{bs_price_delta, OptionKind};
use hedge_web::{histogram, price_curves_demo, simulate_demo, Demo};

#[test]
fn simulated_paths_have_grid_shape() {
    let p = simulate_demo("mjd", 7, 12, 3).unwrap();
    assert_eq!(p.times.len(), 121);
    assert_eq!(p.spots.len(), 7);
    assert!(p.spots.iter().all(|s| s.len() == 121 && s[0] == 100.0));
    assert!((p.times[120] - 10.0).abs() < 1e-12);
    for (k, z) in p.running_max.iter().enumerate() {
        // the maximum ignores the maturity date
        let max = (0..10).map(|y| p.spots[k][12 * y]).fold(f64::MIN, f64::max);
        assert_eq!(z[120], max);
        assert_eq!(p.payoffs[k], (max - p.spots[k][120]).max(0.0));
    }
    assert_eq!(simulate_demo("mjd", 7, 12, 3).unwrap(), p);
    assert!(simulate_demo("heston", 7, 12, 3).is_err());
    assert!(simulate_demo("bsm", 0, 1, 3).is_err());
}

#[test]
fn price_curves_match_closed_forms() {
    let c = price_curves_demo(80.0, 120.0, 5, 1.0, 0.0).unwrap();
    assert_eq!(c.strikes, vec![80.0, 90.0, 100.0, 110.0, 120.0]);
    assert_eq!(c.merton_intensity, 0.0);
    for i in 0..5 {
        let q = bs_price_delta(100.0, c.strikes[i], 0.03, 0.15, 1.0, OptionKind::Call).unwrap();
        assert!((c.bs_call[i] - q.price).abs() < 1e-12);
        assert!((c.merton_call[i] - c.bs_call[i]).abs() < 1e-10);
        assert!((c.merton_put[i] - c.bs_put[i]).abs() < 1e-10);
        let parity = c.bs_call[i] - c.bs_put[i] - (100.0 - c.strikes[i] * (-0.03f64).exp());
        assert!(parity.abs() < 1e-10);
    }
    let jumps = price_curves_demo(80.0, 120.0, 5, 1.0, 0.1).unwrap();
    assert!((jumps.merton_intensity - 0.176_882).abs() < 1e-6);
    // downward jumps make out-of-the-money puts dearer
    assert!(jumps.merton_put[0] > jumps.bs_put[0]);
    assert!(price_curves_demo(120.0, 80.0, 5, 1.0, 0.1).is_err());
}

#[test]
fn demo_training_beats_bank_account() {
    let mut d = Demo::new("bsm", "six-options", "mse", 1000, 11).unwrap();
    let initial = d.records()[0].valid_loss;
    for _ in 0..4 {
        d.train_epoch().unwrap();
    }
    let best = d.records().iter().map(|r| r.valid_loss).fold(f64::INFINITY, f64::min);
    assert!(best <= initial);
    let ev = d.evaluate(20).unwrap();
    assert_eq!(ev.epoch, 4);
    assert!(ev.policy.rmse < ev.bank_only.rmse, "{} vs {}", ev.policy.rmse, ev.bank_only.rmse);
    assert_eq!(ev.histogram.policy.iter().sum::<usize>(), 2000);
    assert_eq!(ev.histogram.edges.len(), 21);
    assert_eq!(d.config().key(), "bsm-six-options-qdh");
}

#[test]
fn demo_rejects_bad_settings() {
    assert!(Demo::new("bsm", "six-options", "mse", 1001, 1).is_err());
    assert!(Demo::new("bsm", "ten-options", "mse", 1000, 1).is_err());
    assert!(Demo::new("bsm", "six-options", "cvar", 1000, 1).is_err());
}

#[test]
fn histogram_counts_everything() {
    let a: Vec<f64> = (0..100).map(f64::from).collect();
    let b = vec![50.0; 10];
    let h = histogram(&a, &b, 10);
    assert_eq!(h.policy.iter().sum::<usize>(), 100);
    assert_eq!(h.bank_only.iter().sum::<usize>(), 10);
    let flat = histogram(&[1.0, 1.0], &[1.0], 5);
    assert_eq!(flat.policy.iter().sum::<usize>(), 2);
}
