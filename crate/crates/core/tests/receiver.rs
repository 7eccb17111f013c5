//! Behaviour of the multichannel receiver against its oracles.

use coherent_rx::feedforward::optimize_plan_sequence;
use coherent_rx::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bpsk(m: f64, p1: f64) -> BinaryEnsemble {
    BinaryEnsemble::bpsk(m, p1).unwrap()
}

#[test]
fn parity_rule_matches_map_chain() {
    for &m in &[0.1, 0.25, 1.0, 3.0] {
        let e = bpsk(m, 0.5);
        for n in 1..=12usize {
            let plan = ChannelPlan::asymptotic(n, m, DetectorModel::on_off()).unwrap();
            for bits in 0u32..(1 << n) {
                let outcomes: Vec<u64> = (0..n).map(|k| u64::from(bits >> k & 1)).collect();
                let run = run_chain(&plan, &e, &outcomes).unwrap();
                let ons = outcomes.iter().filter(|&&o| o > 0).count();
                assert_eq!(
                    run.decision,
                    parity_decision(ons),
                    "m={m} N={n} outcomes={outcomes:?}"
                );
                // the displacement sign follows parity at every step too
                for s in &run.trace[..n] {
                    let favours_first = s.posterior_p1 > 0.5;
                    assert_eq!(favours_first, s.on_count % 2 == 1);
                }
            }
        }
    }
}

#[test]
fn optimized_error_improves_with_channels() {
    for &m in &[0.1, 0.25, 0.5, 1.0] {
        let e = bpsk(m, 0.5);
        let h = helstrom_bound(&e);
        let seq = optimize_plan_sequence(8, &e, true, DetectorModel::on_off()).unwrap();
        let pick: Vec<f64> = [1, 2, 3, 4, 8].iter().map(|&n| seq[n - 1].error_rate).collect();
        for w in pick.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "m={m}: {pick:?}");
        }
        assert!(pick.iter().all(|&v| v >= h - 1e-10));
        assert!(pick[4] - h < pick[0] - h);
    }
}

#[test]
fn inhomogeneous_split_never_loses() {
    let e = bpsk(0.25, 0.5);
    let hom = optimize_plan_sequence(4, &e, true, DetectorModel::on_off()).unwrap();
    let free = optimize_plan_sequence(4, &e, false, DetectorModel::on_off()).unwrap();
    for (a, b) in hom.iter().zip(&free) {
        assert!(b.error_rate <= a.error_rate + 1e-9);
    }
    for w in free.windows(2) {
        assert!(w[1].error_rate <= w[0].error_rate + 1e-9);
    }
    let fractions = free[3].plan.energy_fractions();
    assert!((fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn biased_priors_optimize_numerically() {
    let e = bpsk(0.5, 0.2);
    let seq = optimize_plan_sequence(3, &e, true, DetectorModel::on_off()).unwrap();
    let k = kennedy_error(0.5, 0.2).unwrap();
    assert!(seq[0].error_rate <= k);
    assert!(seq[2].error_rate <= seq[0].error_rate);
    assert!(seq[2].error_rate >= helstrom_bound(&e));
}

/// Photon-number resolution changes nothing for one channel, where the
/// optimal threshold is a single photon, and can only help once later
/// channels condition on the exact count.
#[test]
fn number_resolution_versus_on_off() {
    let e = bpsk(0.25, 0.5);
    let on = optimize_plan_sequence(2, &e, true, DetectorModel::on_off()).unwrap();
    let pnr = optimize_plan_sequence(2, &e, true, DetectorModel::pnr()).unwrap();
    assert!((on[0].error_rate - pnr[0].error_rate).abs() < 1e-9);
    assert!(pnr[1].error_rate <= on[1].error_rate + 1e-9);
    assert!(pnr[1].error_rate > helstrom_bound(&e));
}

fn random_plan(rng: &mut ChaCha8Rng) -> (ChannelPlan, BinaryEnsemble) {
    let n = rng.random_range(1..=8usize);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut fractions: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let head: f64 = fractions[..n - 1].iter().sum();
    fractions[n - 1] = 1.0 - head;
    let betas = (0..n).map(|_| rng.random_range(0.0..0.8)).collect();
    let plan = ChannelPlan::new(fractions, betas, DetectorModel::on_off()).unwrap();
    let e = bpsk(rng.random_range(0.05..1.5), rng.random_range(0.2..0.8));
    (plan, e)
}

#[test]
fn monte_carlo_agrees_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut agree = 0;
    for i in 0..10 {
        let (plan, e) = random_plan(&mut rng);
        let exact = exact_error(&plan, &e).unwrap();
        let r = simulate(&plan, &e, &SimConfig::new(200_000, 100 + i)).unwrap();
        if (r.error_rate - exact).abs() < 4.0 * r.std_error {
            agree += 1;
        }
    }
    assert!(agree >= 9, "{agree}/10");
}

#[test]
fn detector_imperfections_hurt() {
    let e = bpsk(0.5, 0.5);
    let plan = ChannelPlan::asymptotic(4, 0.5, DetectorModel::on_off()).unwrap();
    let run = |det: DetectorModel| {
        let plan = plan.clone().with_detector(det);
        (
            simulate(&plan, &e, &SimConfig::new(400_000, 8)).unwrap(),
            exact_error(&plan, &e).unwrap(),
        )
    };
    let ideal = DetectorModel::on_off();
    let mut prev = run(ideal);
    for eta in [0.9, 0.7, 0.5] {
        let cur = run(ideal.with_efficiency(eta).unwrap());
        let sigma = (cur.0.std_error.powi(2) + prev.0.std_error.powi(2)).sqrt();
        assert!(cur.0.error_rate >= prev.0.error_rate - 3.0 * sigma, "eta={eta}");
        assert!(cur.1 >= prev.1, "eta={eta}");
        prev = cur;
    }
    let mut prev = run(ideal);
    for dark in [0.01, 0.05, 0.2] {
        let cur = run(ideal.with_dark_mean(dark).unwrap());
        let sigma = (cur.0.std_error.powi(2) + prev.0.std_error.powi(2)).sqrt();
        assert!(cur.0.error_rate >= prev.0.error_rate - 3.0 * sigma, "dark={dark}");
        assert!(cur.1 >= prev.1, "dark={dark}");
        prev = cur;
    }
}
