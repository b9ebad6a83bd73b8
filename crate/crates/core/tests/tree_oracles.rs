//! Brute-force enumeration of every branch of small random MDPs, checked
//! against the Q-table machinery: branch criticality, TD training, and the
//! tree sampler's likelihood ratios.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tslg_core::exposure::MdpExposure;
use tslg_core::mdp::{Next, TabularMdp, Zone};
use tslg_core::rl::{backward_induction_q, branch_criticality, root_normalizer, td_train, TdParams};
use tslg_core::sampler::TreeSampler;
use tslg_core::space::{Dim, ScenarioSpace};

fn line(n: usize) -> ScenarioSpace {
    ScenarioSpace::new(vec![Dim::half_open("i", -1.0, (n - 1) as f64, 1.0, "").unwrap()]).unwrap()
}

struct Toy {
    mdp: TabularMdp,
    exposure: MdpExposure,
}

/// At most 4 states, 3 actions, and 3 epochs. Dangerous states only move
/// forward in a random order, so every branch ends within the horizon.
fn random_toy(rng: &mut ChaCha8Rng) -> Toy {
    loop {
        let ns = rng.random_range(2..=4);
        let na = rng.random_range(1..=3);
        let zones: Vec<Zone> = (0..ns)
            .map(|_| match rng.random_range(0..6) {
                0 => Zone::Collision,
                1 => Zone::Safe,
                _ => Zone::Dangerous,
            })
            .collect();
        let nd = zones.iter().filter(|&&z| z == Zone::Dangerous).count();
        if nd == 0 || nd > 3 {
            continue;
        }
        // random topological rank among the dangerous states
        let mut rank: Vec<usize> = (0..ns).collect();
        for i in (1..ns).rev() {
            let j = rng.random_range(0..=i);
            rank.swap(i, j);
        }
        let mut table = HashMap::new();
        for s in 0..ns {
            for u in 0..na {
                let choices: Vec<Next> = (0..ns)
                    .filter(|&j| zones[j] != Zone::Dangerous || rank[j] > rank[s])
                    .map(|j| Next::State(j as u32))
                    .chain([Next::Collision, Next::Safe])
                    .collect();
                table.insert((s, u), choices[rng.random_range(0..choices.len())]);
            }
        }
        let mdp = TabularMdp::new(zones.clone(), na, 3, |s, u| table[&(s, u)]).unwrap();
        let sw: Vec<f64> = (0..ns).map(|_| rng.random_range(0.05..1.0)).collect();
        let aw: Vec<f64> = (0..ns * na)
            .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.05..1.0) })
            .collect();
        let exposure = MdpExposure::from_weights(line(ns), line(na), sw, aw).unwrap();
        let q = backward_induction_q(&mdp, &exposure).unwrap();
        if root_normalizer(&q, &exposure) > 0.0 {
            return Toy { mdp, exposure };
        }
    }
}

/// One complete branch: naturalistic probability and whether it crashes.
struct Branch {
    root: usize,
    actions: Vec<usize>,
    p: f64,
    accident: bool,
}

fn enumerate(toy: &Toy) -> Vec<Branch> {
    fn walk(toy: &Toy, root: usize, s: usize, actions: &mut Vec<usize>, p: f64, out: &mut Vec<Branch>) {
        for u in 0..toy.mdp.n_actions {
            let pu = p * toy.exposure.action_prob(s, u);
            actions.push(u);
            let next = toy.mdp.step(s, u);
            match next {
                Next::State(j) if actions.len() < toy.mdp.horizon => walk(toy, root, j as usize, actions, pu, out),
                _ => out.push(Branch {
                    root,
                    actions: actions.clone(),
                    p: pu,
                    accident: next == Next::Collision,
                }),
            }
            actions.pop();
        }
    }
    let mut out = Vec::new();
    for s in 0..toy.mdp.n_states {
        let p = toy.exposure.state_prob(s);
        match toy.mdp.zones[s] {
            Zone::Dangerous => walk(toy, s, s, &mut Vec::new(), p, &mut out),
            z => out.push(Branch {
                root: s,
                actions: Vec::new(),
                p,
                accident: z == Zone::Collision,
            }),
        }
    }
    out
}

fn toys() -> Vec<Toy> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..100).map(|_| random_toy(&mut rng)).collect()
}

#[test]
fn enumeration_is_a_distribution() {
    for toy in toys() {
        let total: f64 = enumerate(&toy).iter().map(|b| b.p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn branch_criticality_is_joint_probability_up_to_one_constant() {
    for (k, toy) in toys().iter().enumerate() {
        let q = backward_induction_q(&toy.mdp, &toy.exposure).unwrap();
        let z = root_normalizer(&q, &toy.exposure);
        let branches = enumerate(toy);
        let p_s: f64 = branches.iter().filter(|b| b.accident).map(|b| b.p).sum();
        let mut constant: Option<f64> = None;
        for b in branches.iter().filter(|b| !b.actions.is_empty()) {
            let v = branch_criticality(&q, &toy.mdp, &toy.exposure, b.root, &b.actions, p_s, z).unwrap();
            if !b.accident || b.p == 0.0 {
                assert_eq!(v, 0.0, "toy {} branch {:?}", k, b.actions);
                continue;
            }
            let c = v / b.p;
            match constant {
                None => constant = Some(c),
                Some(c0) => assert!((c - c0).abs() <= 1e-9 * c0, "toy {}: {} vs {}", k, c, c0),
            }
        }
        if let Some(c) = constant {
            assert!((c - p_s / z).abs() <= 1e-9 * c);
        }
    }
}

#[test]
fn q_sums_equal_enumerated_accident_probability() {
    for toy in toys() {
        let q = backward_induction_q(&toy.mdp, &toy.exposure).unwrap();
        let branches = enumerate(&toy);
        for &s in toy.mdp.dangerous() {
            let s = s as usize;
            let by_enum: f64 = branches
                .iter()
                .filter(|b| b.root == s && b.accident)
                .map(|b| b.p / toy.exposure.state_prob(s))
                .sum();
            assert!((q.state_sum(s) - by_enum).abs() < 1e-12);
        }
    }
}

#[test]
fn td_training_reaches_the_fixed_point() {
    for (k, toy) in toys().iter().enumerate() {
        let exact = backward_induction_q(&toy.mdp, &toy.exposure).unwrap();
        let p = TdParams {
            alpha_lr: 0.5,
            delta0: 1e-12,
            max_updates: 10_000_000,
            horizon: 3,
            seed: k as u64,
        };
        let trained = td_train(&toy.mdp, &toy.exposure, &p).unwrap();
        assert!(trained.max_abs_diff(&exact) < 1e-10);
    }
}

#[test]
fn sampled_ratios_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for toy in toys() {
        let q = backward_induction_q(&toy.mdp, &toy.exposure).unwrap();
        let sampler = TreeSampler::new(&q, &toy.exposure, 0.1).unwrap();
        let branches = enumerate(&toy);
        let mut table = HashMap::new();
        let mut total_bar = 0.0;
        let mut expect_ratio_indicator = 0.0;
        for b in &branches {
            let mut s = b.root;
            let mut p_bar = sampler.root_prob(s);
            for &u in &b.actions {
                p_bar *= sampler.action_prob(s, u);
                if let Next::State(j) = toy.mdp.step(s, u) {
                    s = j as usize;
                }
            }
            total_bar += p_bar;
            if b.accident && p_bar > 0.0 {
                expect_ratio_indicator += p_bar * (b.p / p_bar);
            }
            table.insert((b.root, b.actions.clone()), (b.p, p_bar, b.accident));
        }
        assert!((total_bar - 1.0).abs() < 1e-12);
        let p_s: f64 = branches.iter().filter(|b| b.accident).map(|b| b.p).sum();
        assert!((expect_ratio_indicator - p_s).abs() < 1e-12);
        for _ in 0..500 {
            let ep = sampler.sample_tabular_branch(&toy.mdp, &mut rng);
            let &(p, p_bar, accident) = table.get(&(ep.root, ep.actions.clone())).expect("sampled branch enumerated");
            assert_eq!(ep.accident, accident);
            assert!((ep.ratio - p / p_bar).abs() <= 1e-12 * (p / p_bar));
        }
    }
}
