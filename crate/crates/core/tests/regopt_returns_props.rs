use klent::games::LegalMask;
use klent::regopt::{entropy, improved_policy, kl_divergence, objective, ActionDistribution, QValues, RegWeights};
use klent::returns::{lambda_returns, monte_carlo_returns, one_step_returns, StepSignal};
use proptest::prelude::*;

/// Random legal mask with at least one legal action, plus q and a positive prior on it.
fn instance() -> impl Strategy<Value = (LegalMask, Vec<f64>, Vec<f64>)> {
    (2usize..9)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(any::<bool>(), n),
                0..n,
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(0.01f64..1.0, n),
            )
        })
        .prop_map(|(mut bits, forced, q, raw)| {
            bits[forced] = true;
            let z: f64 = raw.iter().zip(&bits).filter(|(_, &b)| b).map(|(x, _)| x).sum();
            let prior = raw
                .iter()
                .zip(&bits)
                .map(|(&x, &b)| if b { x / z } else { 0.0 })
                .collect();
            (LegalMask::from_bits(bits), q, prior)
        })
}

fn weights() -> impl Strategy<Value = RegWeights> {
    (0.01f64..1.0, 0.01f64..1.0).prop_map(|(a, b)| RegWeights::new(a, b).unwrap())
}

fn dist(probs: Vec<f64>, mask: &LegalMask) -> ActionDistribution {
    ActionDistribution::new(probs, mask.clone()).unwrap()
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn improved_policy_beats_random_candidates(
        (mask, q, prior) in instance(),
        w in weights(),
        raw in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        let qv = QValues::new(q, mask.clone()).unwrap();
        let prior = dist(prior, &mask);
        let best = improved_policy(&qv, &prior, w).unwrap();
        let top = objective(&best, &qv, &prior, w).unwrap();
        let mut cand = vec![0.0; mask.len()];
        let mut z = 0.0;
        for &a in mask.legal() {
            cand[a] = raw[a % raw.len()] + 1e-3;
            z += cand[a];
        }
        cand.iter_mut().for_each(|x| *x /= z);
        let other = objective(&dist(cand, &mask), &qv, &prior, w).unwrap();
        prop_assert!(top >= other - 1e-9, "{top} < {other}");
    }

    #[test]
    fn shifting_q_changes_nothing((mask, q, prior) in instance(), w in weights(), c in -5.0f64..5.0) {
        let prior = dist(prior, &mask);
        let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
        let a = improved_policy(&QValues::new(q, mask.clone()).unwrap(), &prior, w).unwrap();
        let b = improved_policy(&QValues::new(shifted, mask.clone()).unwrap(), &prior, w).unwrap();
        // Log-space evaluation subtracts the max, so the shift cancels up to rounding of q + c.
        prop_assert!(linf(a.probs(), b.probs()) <= 1e-12);
    }

    #[test]
    fn limits_and_support((mask, q, prior) in instance(), alpha in 0.01f64..1.0) {
        let qv = QValues::new(q, mask.clone()).unwrap();
        let prior_d = dist(prior.clone(), &mask);
        let anchored = improved_policy(&qv, &prior_d, RegWeights::new(alpha, 1e6).unwrap()).unwrap();
        prop_assert!(linf(anchored.probs(), &prior) <= 1e-3);
        let flat = improved_policy(&qv, &prior_d, RegWeights::new(1e6, alpha).unwrap()).unwrap();
        prop_assert!(linf(flat.probs(), ActionDistribution::uniform(&mask).probs()) <= 1e-3);
        let p = improved_policy(&qv, &prior_d, RegWeights::new(alpha, alpha).unwrap()).unwrap();
        for a in 0..mask.len() {
            prop_assert_eq!(p.prob(a) > 0.0, mask.is_legal(a));
        }
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn divergence_and_entropy_fixed_points((mask, _q, prior) in instance()) {
        let p = dist(prior, &mask);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let one = ActionDistribution::one_hot(&mask, mask.legal()[0]).unwrap();
        prop_assert_eq!(entropy(&one), 0.0);
        prop_assert!(entropy(&p) <= (mask.count() as f64).ln() + 1e-12);
    }
}

fn trajectory() -> impl Strategy<Value = Vec<StepSignal>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0u8..2), 1..25).prop_map(|v| {
        v.into_iter()
            .map(|(reward, vhat, mover)| StepSignal { reward, vhat, mover })
            .collect()
    })
}

/// Alternating movers with a single +-1 reward on the last ply.
fn board_trajectory() -> impl Strategy<Value = Vec<StepSignal>> {
    (prop::collection::vec(-1.0f64..=1.0, 1..25), prop::bool::ANY).prop_map(|(vhats, won)| {
        let n = vhats.len();
        vhats
            .into_iter()
            .enumerate()
            .map(|(t, vhat)| StepSignal {
                reward: if t + 1 == n {
                    if won {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                },
                vhat,
                mover: (t % 2) as u8,
            })
            .collect()
    })
}

fn n_step(steps: &[StepSignal], t: usize, n: usize, gamma: f64) -> f64 {
    let sign = |a: u8, b: u8| if a == b { 1.0 } else { -1.0 };
    let end = steps.len();
    let mut g = 0.0;
    for k in 0..n.min(end - t) {
        g += gamma.powi(k as i32) * sign(steps[t].mover, steps[t + k].mover) * steps[t + k].reward;
    }
    if t + n < end {
        g += gamma.powi(n as i32) * sign(steps[t].mover, steps[t + n].mover) * steps[t + n].vhat;
    }
    g
}

proptest! {
    #[test]
    fn lambda_return_is_a_convex_combination(steps in trajectory(), lambda in 0.0f64..=1.0, gamma in 0.5f64..=1.0) {
        let g = lambda_returns(&steps, lambda, gamma).unwrap().g_lambda;
        for (t, &gt) in g.iter().enumerate() {
            let candidates: Vec<f64> = (1..=steps.len() - t).map(|n| n_step(&steps, t, n, gamma)).collect();
            let lo = candidates.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(gt >= lo - 1e-12 && gt <= hi + 1e-12, "t={t}: {gt} not in [{lo}, {hi}]");
        }
    }

    #[test]
    fn endpoints_match_dedicated_returns(steps in trajectory(), gamma in 0.5f64..=1.0) {
        let zero = lambda_returns(&steps, 0.0, gamma).unwrap().g_lambda;
        let one = lambda_returns(&steps, 1.0, gamma).unwrap().g_lambda;
        prop_assert!(linf(&zero, &one_step_returns(&steps, gamma).unwrap()) <= 1e-12);
        prop_assert!(linf(&one, &monte_carlo_returns(&steps, gamma).unwrap()) <= 1e-12);
    }

    #[test]
    fn negating_the_frame_negates_returns(steps in trajectory(), lambda in 0.0f64..=1.0) {
        let flipped: Vec<StepSignal> = steps
            .iter()
            .map(|s| StepSignal { reward: -s.reward, vhat: -s.vhat, ..*s })
            .collect();
        let a = lambda_returns(&steps, lambda, 1.0).unwrap().g_lambda;
        let b = lambda_returns(&flipped, lambda, 1.0).unwrap().g_lambda;
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn board_game_returns_stay_in_range(steps in board_trajectory(), lambda in 0.0f64..=1.0) {
        for g in lambda_returns(&steps, lambda, 1.0).unwrap().g_lambda {
            prop_assert!((-1.0..=1.0).contains(&g), "{g}");
        }
    }
}
