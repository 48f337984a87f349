use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyjo_core::bots::{BotKind, BotPolicy};
use skyjo_core::fixtures::Scenario;
use skyjo_core::Rules;
use skyjo_eval::probe::*;
use skyjo_muzero::agent::Player;
use skyjo_muzero::nets::Nets;
use skyjo_muzero::NetConfig;

fn random_latents(n: usize, d: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn realizable_feature_is_recovered() {
    let x = random_latents(2000, 16, 1);
    let y: Vec<f64> = x.iter().map(|r| r.iter().enumerate().map(|(i, &v)| (i as f64 - 7.5) * v as f64).sum::<f64>() + 3.0).collect();
    let fit = linear_probe(&x, &y, RIDGE, FOLDS).unwrap();
    assert!(fit.r2 > 0.999, "{}", fit.r2);
    assert_eq!(fit.fold_r2.len(), 5);
    assert!(!fit.degenerate);
}

#[test]
fn independent_feature_is_not_decodable() {
    let x = random_latents(10_000, 64, 2);
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<f64> = (0..10_000).map(|_| r.random_range(0.0..1.0)).collect();
    let fit = linear_probe(&x, &y, RIDGE, FOLDS).unwrap();
    assert!(fit.r2 <= 0.05, "{}", fit.r2);
    assert!(fit.fold_r2.iter().all(|&v| v <= 1.0));
}

#[test]
fn constant_feature_is_flagged() {
    let x = random_latents(50, 4, 4);
    let fit = linear_probe(&x, &[2.0; 50], RIDGE, FOLDS).unwrap();
    assert!(fit.degenerate);
    assert_eq!(fit.r2, 0.0);
}

#[test]
fn input_errors() {
    let x = random_latents(9, 3, 5);
    assert_eq!(linear_probe(&x, &[0.0; 9], RIDGE, FOLDS), Err(ProbeError::TooFewRows(9)));
    assert_eq!(linear_probe(&x, &[0.0; 8], RIDGE, FOLDS), Err(ProbeError::Mismatch { latents: 9, feature: 8 }));
}

#[test]
fn features_of_a_known_state() {
    const T: bool = true;
    const F: bool = false;
    let s = Scenario::new(2, 8)
        .grid(0, [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12], [T, T, F, F, T, T, T, T, T, T, T, T])
        .grid(1, [0, 0, -1, -2, 4, 4, 4, 4, 6, 6, 6, 6], [F, F, F, F, T, T, T, T, T, T, T, T])
        .cumulative(&[30, 40])
        .build();
    let f = features(&s, 0);
    let visible_0 = 1 + 2 + 5 + 6 + 7 + 8 + 9 + 10 + 11 + 12;
    let visible_1 = 16 + 24;
    // Player 0 totals 30 + 78, player 1 totals 40 + 37.
    assert_eq!(f, [2.0, s.deck().len() as f64, (visible_0 + visible_1) as f64, 7.0, -3.0, 77.0 - 108.0, 4.0]);
    assert_eq!(s.deck().len(), 150 - 24 - s.discard().len());
    let g = features(&s, 1);
    assert_eq!(g[0], 4.0);
    assert_eq!(g[3], -3.0);
    assert_eq!(g[4], 7.0);
    assert_eq!(g[5], 31.0);
    assert_eq!(g[6], 2.0);
}

#[test]
fn suite_reports_three_variants() {
    let baseline = Nets::new(NetConfig::toy(), 1);
    let belief = Nets::new(NetConfig::toy(), 2);
    let bots = [Player::Bot(BotPolicy::new(BotKind::GreedyValue)), Player::Bot(BotPolicy::new(BotKind::InfoFirst))];
    let seats: Vec<&Player> = bots.iter().collect();
    let samples = collect_samples(&seats, 2, 9, Rules::default());
    assert!(samples.iter().all(|s| !s.state.is_over() && s.ego == s.state.current_player()));
    let report = probe_suite(&baseline, &belief, &samples, 2).unwrap();
    assert_eq!(report.variants.len(), 3);
    assert_eq!(report.fits.len(), 3);
    assert!(report.fits.iter().all(|row| row.len() == FEATURES.len()));
    assert_eq!(report.steps, samples.len());
    assert_eq!((report.folds, report.ridge), (5, 1.0));
    for row in &report.fits {
        for fit in row {
            assert!(fit.r2 <= 1.0 && fit.r2.is_finite());
        }
    }
    let text = report.to_string();
    assert!(text.contains("belief_post_ego") && text.contains("opponent_face_down_count"));
}

#[test]
fn conditioned_latents_differ_from_raw() {
    let nets = Nets::new(NetConfig::toy(), 3);
    let bots = [Player::Bot(BotPolicy::new(BotKind::Random)), Player::Bot(BotPolicy::new(BotKind::Random))];
    let seats: Vec<&Player> = bots.iter().collect();
    let samples = collect_samples(&seats, 1, 4, Rules::default());
    let raw = latents(&nets, &samples[..5], false);
    let cond = latents(&nets, &samples[..5], true);
    assert_eq!(raw.len(), 5);
    assert_eq!(raw[0].len(), nets.config.latent_dim);
    assert_ne!(raw, cond);
    let single = nets.represent(&skyjo_core::encoding::encode_observation(&samples[2].state, samples[2].ego));
    for (a, b) in single.0.iter().zip(&raw[2]) {
        assert!((a - b).abs() < 1e-5);
    }
}
