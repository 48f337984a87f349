mod common;

use common::synthetic;
use proptest::prelude::*;
use skyjo_core::encoding::encode_observation;
use skyjo_core::Ranking;
use skyjo_muzero::episode::{make_targets, target_streams, terminal_rewards, value_target, Outcome, RewardMode, TargetConfig};

const CFG: TargetConfig = TargetConfig { unroll_steps: 8, td_steps: 10, discount: 0.997 };

#[test]
fn three_step_episode_discounts_terminal_reward() {
    let ep = synthetic(1, 2, 3, |t, _| if t == 2 { 10.0 } else { 0.0 }, |_, _| 0.0);
    assert_eq!(ep.len(), 3);
    let v = value_target(&ep, 0, 0, &CFG);
    assert!((v - 9.94009).abs() < 1e-5, "{v}");
    assert!((v - 10.0 * 0.997f64.powi(2)).abs() < 1e-9);
}

#[test]
fn terminal_step_value_is_the_terminal_reward() {
    let ep = synthetic(2, 2, 6, |t, p| if t == 5 { [37.0, -37.0][p] } else { 0.0 }, |_, _| 99.0);
    assert_eq!(value_target(&ep, 5, 0, &CFG), 37.0);
    assert_eq!(value_target(&ep, 5, 1, &CFG), -37.0);
}

#[test]
fn bootstraps_from_stored_value_n_steps_ahead() {
    let ep = synthetic(3, 2, 30, |_, _| 0.0, |t, p| if p == 1 { t as f32 } else { 0.0 });
    let v = value_target(&ep, 4, 1, &CFG);
    assert!((v - 0.997f64.powi(10) * 14.0).abs() < 1e-9, "{v}");
    assert_eq!(value_target(&ep, 4, 0, &CFG), 0.0);
}

fn brute_force(rewards: &[f64], values: &[f64], t: usize, n: usize, gamma: f64) -> f64 {
    let mut g = 0.0;
    for i in 0..n {
        if t + i < rewards.len() {
            g += gamma.powi(i as i32) * rewards[t + i];
        }
    }
    if t + n < rewards.len() {
        g += gamma.powi(n as i32) * values[t + n];
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn value_target_matches_brute_force(
        seed in 0u64..1000,
        len in 1usize..40,
        td in 1usize..15,
        gamma in 0.9f64..1.0,
        scale in 0.1f32..50.0,
    ) {
        let rew = move |t: usize, p: usize| ((t * 7 + p * 3 + seed as usize) % 11) as f32 * scale - 5.0 * scale;
        let val = move |t: usize, p: usize| ((t * 5 + p + seed as usize) % 13) as f32 * scale - 6.0 * scale;
        let ep = synthetic(seed, 2, len, rew, val);
        let cfg = TargetConfig { unroll_steps: 8, td_steps: td, discount: gamma };
        for ego in 0..2 {
            let rs: Vec<f64> = ep.steps.iter().map(|s| s.rewards[ego] as f64).collect();
            let vs: Vec<f64> = ep.steps.iter().map(|s| s.values[ego] as f64).collect();
            for t in 0..ep.len() {
                let want = brute_force(&rs, &vs, t, td, gamma);
                let got = value_target(&ep, t, ego, &cfg);
                prop_assert!((got - want).abs() <= 1e-6, "t {} want {} got {}", t, want, got);
            }
        }
    }
}

#[test]
fn two_players_give_two_streams() {
    let ep = synthetic(4, 2, 12, |_, _| 0.0, |_, _| 0.0);
    for t in 0..ep.len() {
        let streams = target_streams(&ep, t, &CFG);
        assert_eq!(streams.len(), 2);
        assert_eq!(streams[0].ego, 0);
        assert_eq!(streams[1].ego, 1);
        assert_ne!(streams[0].observation, streams[1].observation);
    }
    let three = synthetic(4, 3, 5, |_, _| 0.0, |_, _| 0.0);
    assert_eq!(target_streams(&three, 0, &CFG).len(), 3);
}

#[test]
fn unroll_pads_past_the_end() {
    let ep = synthetic(5, 2, 5, |t, _| t as f32, |_, _| 1.0);
    let x = make_targets(&ep, 2, 0, &CFG);
    assert_eq!(x.actions.len(), 8);
    assert_eq!(x.policy.len(), 9);
    assert_eq!(x.value.len(), 9);
    assert_eq!(x.reward.len(), 8);
    assert_eq!(x.seats.len(), 9);
    assert_eq!(x.policy_weight, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(&x.reward[..3], &[2.0, 3.0, 4.0]);
    assert!(x.reward[3..].iter().all(|&r| r == 0.0));
    assert!(x.value[3..].iter().all(|&v| v == 0.0));
    assert_eq!(x.actions[..3], [ep.steps[2].action, ep.steps[3].action, ep.steps[4].action]);
    for (k, s) in x.seats.iter().take(3).enumerate() {
        assert_eq!(s.current, ep.steps[2 + k].actor);
        assert_eq!(s.ego, 0);
    }
}

#[test]
fn observation_is_the_state_before_the_step() {
    let ep = synthetic(6, 2, 20, |_, _| 0.0, |_, _| 0.0);
    let x = make_targets(&ep, 13, 1, &CFG);
    assert_eq!(x.observation, encode_observation(&ep.state_at(13), 1));
    assert_eq!(x.phase, ep.steps[13].phase);
    assert_eq!(x.policy[0], ep.steps[13].policy);
    assert_eq!(x.policy_mask[0], ep.steps[13].legal);
}

#[test]
fn outcome_targets_are_ego_relative() {
    let mut ep = synthetic(7, 3, 4, |_, _| 0.0, |_, _| 0.0);
    ep.outcome = Outcome::from(&Ranking::from_scores(&[40, 12, 12]));
    let x = make_targets(&ep, 0, 1, &CFG);
    // seats relative to ego 1: [1, 2, 0]
    assert_eq!(x.winner, vec![0.5, 0.5, 0.0]);
    assert_eq!(x.rank, vec![0, 0, 2]);
    let y = make_targets(&ep, 0, 0, &CFG);
    assert_eq!(y.winner, vec![0.0, 0.5, 0.5]);
    assert_eq!(y.rank, vec![2, 0, 0]);
}

#[test]
fn terminal_reward_modes() {
    assert_eq!(terminal_rewards(&[30, 50, 45], RewardMode::ScoreDiff), vec![15.0, -20.0, -15.0]);
    assert_eq!(terminal_rewards(&[0, 400], RewardMode::ScoreDiff), vec![200.0, -200.0]);
    assert_eq!(terminal_rewards(&[30, 30, 45], RewardMode::WinLoss), vec![1.0, 1.0, -1.0]);
    assert_eq!(terminal_rewards(&[30, 30], RewardMode::ScoreDiff), vec![0.0, 0.0]);
}

#[test]
fn episode_record_replays_to_final_state() {
    let ep = synthetic(8, 2, 40, |_, _| 0.0, |_, _| 0.0);
    let replayed = ep.record().replay().unwrap();
    assert_eq!(replayed.state_hash(), ep.state_at(ep.len()).state_hash());
}
