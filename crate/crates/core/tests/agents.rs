use diffac::agents::{
    advantage_a2c, advantage_siac, centralised_gradients, local_gradients, run_diffusion_round,
    run_parallel, ActorCritic, AgentConfig, Algorithm, EventLog, NetworkConfig, Role, System,
    Trajectory, Transition,
};
use diffac::envs::{sample_task_grid, EnvKind, EnvParams, GridSpec};
use diffac::network::{build_topology, ConnectivityMatrix, TopologyKind};
use diffac::nn::{
    sample_action, ActionSample, Activation, Network, NetworkSpec, Objective, ParamVector,
};
use diffac::optim::OptimiserConfig;
use diffac::rng::rng_from;
use proptest::prelude::*;
use rand::Rng as _;

fn tasks(n: usize) -> Vec<EnvParams> {
    let mut t = sample_task_grid(EnvKind::Pendulum, &GridSpec::Grid(vec![n, 1])).unwrap();
    for p in &mut t {
        p.episode_max_steps = 20;
    }
    t
}

fn small_net() -> NetworkConfig {
    NetworkConfig {
        hidden: vec![8],
        activation: Activation::Tanh,
    }
}

fn mc_oracle(r: &[f64], v: &[f64], gamma: f64, tail: f64) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|t| {
            let mut g = 0.0;
            for j in t..n {
                g += gamma.powi((j - t) as i32) * r[j];
            }
            g + gamma.powi((n - t) as i32) * tail - v[t]
        })
        .collect()
}

fn segment(r: &[f64], terminal: bool, bootstrap: Option<f64>) -> Trajectory<f64> {
    let n = r.len();
    let tr = r
        .iter()
        .enumerate()
        .map(|(i, &x)| Transition {
            state: vec![i as f64],
            action: ActionSample::Discrete(0),
            reward: x,
            next_state: vec![i as f64 + 1.0],
            terminal: terminal && i + 1 == n,
        })
        .collect();
    Trajectory::new(tr, bootstrap).unwrap()
}

proptest! {
    #[test]
    fn estimators_match_double_loop(
        r in prop::collection::vec(-5.0f64..5.0, 1..25),
        seed in any::<u64>(),
        gamma in 0.0f64..1.0,
        boot in -10.0f64..10.0,
    ) {
        let mut rng = rng_from(seed);
        let v: Vec<f64> = r.iter().map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let siac = advantage_siac(&r, &v, gamma).unwrap();
        for (a, b) in siac.iter().zip(mc_oracle(&r, &v, gamma, 0.0)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let a2c = advantage_a2c(&segment(&r, false, Some(boot)), &v, gamma).unwrap();
        for (a, b) in a2c.iter().zip(mc_oracle(&r, &v, gamma, boot)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

struct Nets {
    actor: Network,
    critic: Network,
    ap: ParamVector<f64>,
    cp: ParamVector<f64>,
}

impl Nets {
    fn new(seed: u64) -> Self {
        let actor = Network::new(NetworkSpec::gaussian(
            3,
            vec![6],
            Activation::Tanh,
            vec![-2.0],
            vec![2.0],
        ))
        .unwrap();
        let critic = Network::new(NetworkSpec::value(3, vec![6], Activation::Tanh)).unwrap();
        let mut rng = rng_from(seed);
        let ap = actor.init_params(&mut rng);
        let cp = critic.init_params(&mut rng);
        Self {
            actor,
            critic,
            ap,
            cp,
        }
    }

    fn ac(&self) -> ActorCritic<'_, f64> {
        ActorCritic {
            actor: &self.actor,
            actor_params: &self.ap,
            critic: &self.critic,
            critic_params: &self.cp,
        }
    }

    fn transitions(&self, n: usize, seed: u64) -> Vec<Transition<f64>> {
        let mut rng = rng_from(seed);
        (0..n)
            .map(|_| {
                let s: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let f = self.actor.forward(&self.ap, &s).unwrap();
                let (a, _) = sample_action(&f.head, &mut rng).unwrap();
                Transition {
                    state: s.clone(),
                    action: a,
                    reward: rng.random(),
                    next_state: s,
                    terminal: false,
                }
            })
            .collect()
    }
}

#[test]
fn zero_advantage_zero_gradients() {
    let nets = Nets::new(1);
    let tr = nets.transitions(7, 2);
    let refs: Vec<_> = tr.iter().collect();
    let (c, a) = local_gradients(nets.ac(), &refs, &[0.0; 7], 0.0).unwrap();
    assert!(c.values().iter().chain(a.values()).all(|&x| x == 0.0));
}

#[test]
fn single_transition_gradient_is_the_sample_term() {
    let nets = Nets::new(3);
    let tr = nets.transitions(1, 4);
    let (c, a) = local_gradients(nets.ac(), &[&tr[0]], &[0.8], 0.01).unwrap();
    let (_, gv) = nets
        .critic
        .gradient(&nets.cp, &tr[0].state, &Objective::Value)
        .unwrap();
    let obj = Objective::ActorLoss {
        action: tr[0].action.clone(),
        advantage: 0.8,
        entropy_coef: 0.01,
    };
    let (_, ga) = nets.actor.gradient(&nets.ap, &tr[0].state, &obj).unwrap();
    for (x, y) in c.values().iter().zip(gv.values()) {
        assert!((x + 0.8 * y).abs() < 1e-15);
    }
    assert_eq!(a, ga);
}

#[test]
fn critic_gradient_matches_frozen_target_loss() {
    let nets = Nets::new(5);
    let tr = nets.transitions(6, 6);
    let refs: Vec<_> = tr.iter().collect();
    let adv: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 0.7).collect();
    let (c, _) = local_gradients(nets.ac(), &refs, &adv, 0.0).unwrap();
    let value = |p: &ParamVector<f64>, s: &[f64]| nets.critic.forward(p, s).unwrap().z[0];
    let targets: Vec<f64> = tr
        .iter()
        .zip(&adv)
        .map(|(t, a)| value(&nets.cp, &t.state) + a)
        .collect();
    let loss = |p: &ParamVector<f64>| {
        tr.iter()
            .zip(&targets)
            .map(|(t, y)| 0.5 * (value(p, &t.state) - y).powi(2))
            .sum::<f64>()
            / 6.0
    };
    let h = 1e-6;
    for i in 0..nets.cp.len() {
        let mut plus = nets.cp.clone();
        plus.values_mut()[i] += h;
        let mut minus = nets.cp.clone();
        minus.values_mut()[i] -= h;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
        let g = c.values()[i];
        assert!(
            (fd - g).abs() <= 1e-4 * fd.abs().max(g.abs()).max(1e-6),
            "{i}: {fd} vs {g}"
        );
    }
}

#[test]
fn centralised_pooling_is_sample_weighted() {
    let nets = Nets::new(7);
    let t1 = nets.transitions(1, 8);
    let t3 = nets.transitions(3, 9);
    let a1 = vec![0.4];
    let a3 = vec![-0.2, 1.1, 0.5];
    let r1: Vec<_> = t1.iter().collect();
    let r3: Vec<_> = t3.iter().collect();
    let (c1, g1) = local_gradients(nets.ac(), &r1, &a1, 0.01).unwrap();
    let (c3, g3) = local_gradients(nets.ac(), &r3, &a3, 0.01).unwrap();
    let (cc, gc) = centralised_gradients(
        nets.ac(),
        &[(r1.clone(), a1.clone()), (r3.clone(), a3.clone())],
        0.01,
    )
    .unwrap();
    for (pooled, (x, y)) in [(&cc, (&c1, &c3)), (&gc, (&g1, &g3))] {
        for i in 0..pooled.len() {
            let expected = (x.values()[i] + 3.0 * y.values()[i]) / 4.0;
            assert!((pooled.values()[i] - expected).abs() < 1e-12);
        }
    }
    let (single, _) = centralised_gradients(nets.ac(), &[(r3.clone(), a3.clone())], 0.01).unwrap();
    assert_eq!(single, c3);
    let (dup, _) =
        centralised_gradients(nets.ac(), &[(r3.clone(), a3.clone()), (r3, a3)], 0.01).unwrap();
    for (a, b) in dup.values().iter().zip(c3.values()) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(centralised_gradients(nets.ac(), &[(vec![], vec![])], 0.01).is_err());
}

#[test]
fn score_has_zero_mean() {
    let nets = Nets::new(11);
    let s = [0.3, -0.5, 0.9];
    let fwd = nets.actor.forward(&nets.ap, &s).unwrap();
    let mut rng = rng_from(12);
    let n = 100_000;
    let dim = nets.ap.len();
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    for _ in 0..n {
        let (a, _) = sample_action(&fwd.head, &mut rng).unwrap();
        let (_, g) = nets
            .actor
            .gradient(&nets.ap, &s, &Objective::LogProb(a))
            .unwrap();
        for (i, &x) in g.values().iter().enumerate() {
            sum[i] += x;
            sq[i] += x * x;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|x| x / n as f64).collect();
    let var: f64 = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| s / n as f64 - m * m)
        .sum::<f64>()
        / dim as f64;
    let norm = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
    assert!(
        norm < 3.0 * (var.sqrt() / (n as f64).sqrt()) * (dim as f64).sqrt(),
        "{norm}"
    );
}

fn siac(role: Role) -> AgentConfig {
    AgentConfig {
        episodes_per_update: 1,
        ..AgentConfig::siac(role)
    }
}

#[test]
fn single_agent_network_is_a_plain_step() {
    let cfg = siac(Role::Diffusion);
    let mut sys = System::new(tasks(1), cfg.clone(), &small_net(), None, None, 3).unwrap();
    let mut solo = sys.agents[0].clone();
    sys.step_round(&mut EventLog::disabled()).unwrap();
    solo.adapt_round(&cfg).unwrap();
    assert_eq!(
        sys.agents[0].learner.actor_params,
        solo.learner.actor_params
    );
    assert_eq!(
        sys.agents[0].learner.critic_params,
        solo.learner.critic_params
    );
}

#[test]
fn zero_learning_rate_is_pure_consensus() {
    let cfg = AgentConfig {
        actor_optimiser: OptimiserConfig::sgd(0.0),
        critic_optimiser: OptimiserConfig::sgd(0.0),
        shared_init: false,
        ..siac(Role::Diffusion)
    };
    let t = build_topology(TopologyKind::Ring, 5, 0.0, 0).unwrap();
    let mut sys = System::new(tasks(5), cfg, &small_net(), Some(t), None, 4).unwrap();
    let mut d = sys.disagreement().unwrap();
    assert!(d > 0.0);
    for _ in 0..5 {
        sys.step_round(&mut EventLog::disabled()).unwrap();
        let next = sys.disagreement().unwrap();
        assert!(next < d);
        d = next;
    }
}

#[test]
fn complete_graph_round_matches_scripted_mean() {
    let cfg = AgentConfig {
        shared_init: false,
        ..siac(Role::Diffusion)
    };
    let t = build_topology(TopologyKind::Complete, 3, 0.0, 0).unwrap();
    let sys = System::new(tasks(3), cfg.clone(), &small_net(), Some(t), None, 5).unwrap();
    let mut scripted = sys.agents.clone();
    for a in &mut scripted {
        a.adapt_round(&cfg).unwrap();
    }
    let mut agents = sys.agents.clone();
    run_diffusion_round(&mut agents, &sys.weights, None, &cfg).unwrap();
    for k in 0..3 {
        for i in 0..scripted[0].learner.actor_params.len() {
            let mean = scripted
                .iter()
                .map(|a| a.learner.actor_params.values()[i])
                .sum::<f64>()
                / 3.0;
            assert!((agents[k].learner.actor_params.values()[i] - mean).abs() < 1e-12);
        }
    }
}

fn run_sync(cfg: &AgentConfig, seed: u64, rounds: usize, p: f64) -> System {
    let t = build_topology(TopologyKind::Ring, 4, 0.0, 0).unwrap();
    let f = diffac::network::LinkFailureModel::new(p).unwrap();
    let mut sys = System::new(tasks(4), cfg.clone(), &small_net(), Some(t), Some(f), seed).unwrap();
    sys.run_rounds(rounds, &mut EventLog::disabled()).unwrap();
    sys
}

#[test]
fn sync_runs_are_deterministic() {
    let cfg = AgentConfig::a2c(Role::Diffusion);
    let a = run_sync(&cfg, 9, 6, 0.3);
    let b = run_sync(&cfg, 9, 6, 0.3);
    assert_eq!(a.stacked_params(), b.stacked_params());
}

#[test]
fn parallel_without_staleness_matches_sync() {
    for cfg in [
        AgentConfig {
            staleness_limit: 0,
            ..siac(Role::Diffusion)
        },
        AgentConfig {
            staleness_limit: 0,
            steps_per_update: 7,
            ..AgentConfig::a2c(Role::Diffusion)
        },
    ] {
        let reference = run_sync(&cfg, 10, 6, 0.4);
        let t = build_topology(TopologyKind::Ring, 4, 0.0, 0).unwrap();
        let f = diffac::network::LinkFailureModel::new(0.4).unwrap();
        let sys = System::new(tasks(4), cfg.clone(), &small_net(), Some(t), Some(f), 10).unwrap();
        let mut seen = 0;
        let done = run_parallel(sys, 3, 2, |_, agents, _| {
            seen += 1;
            assert_eq!(agents.len(), 4);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, 3);
        assert_eq!(done.round, 6);
        assert!(
            done.stacked_params() == reference.stacked_params(),
            "parallel run diverged from sync"
        );
    }
}

#[test]
fn parallel_with_staleness_reaches_agreement() {
    let cfg = AgentConfig {
        actor_optimiser: OptimiserConfig::sgd(0.0),
        critic_optimiser: OptimiserConfig::sgd(0.0),
        shared_init: false,
        ..siac(Role::Diffusion)
    };
    let t = build_topology(TopologyKind::Ring, 6, 0.0, 0).unwrap();
    let sys = System::new(tasks(6), cfg, &small_net(), Some(t), None, 2).unwrap();
    let d0 = sys.disagreement().unwrap();
    let done = run_parallel(sys, 10, 10, |_, _, _| Ok(())).unwrap();
    assert!(done.disagreement().unwrap() < 1e-3 * d0);
}

#[test]
fn parallel_callback_error_stops_run() {
    let t = build_topology(TopologyKind::Ring, 3, 0.0, 0).unwrap();
    let sys = System::new(
        tasks(3),
        siac(Role::Diffusion),
        &small_net(),
        Some(t),
        None,
        2,
    )
    .unwrap();
    let res = run_parallel(sys, 50, 1, |e, _, _| {
        if e == 2 {
            Err(diffac::Error::Config("stop".into()))
        } else {
            Ok(())
        }
    });
    assert!(matches!(res, Err(diffac::Error::Config(_))));
}

#[test]
fn roles_consume_equal_episode_budgets() {
    let n = 3;
    let t = build_topology(TopologyKind::Ring, n, 0.0, 0).unwrap();
    let mut diff = System::new(
        tasks(n),
        AgentConfig::siac(Role::Diffusion),
        &small_net(),
        Some(t),
        None,
        1,
    )
    .unwrap();
    let mut cent = System::new(
        tasks(n),
        AgentConfig::siac(Role::Centralised),
        &small_net(),
        None,
        None,
        1,
    )
    .unwrap();
    diff.run_rounds(2, &mut EventLog::disabled()).unwrap();
    cent.run_rounds(2, &mut EventLog::disabled()).unwrap();
    assert_eq!(diff.total_episodes(), 2 * 5 * n as u64);
    assert_eq!(cent.total_episodes(), diff.total_episodes());
    assert_eq!(cent.agents.len(), 1);
    assert_eq!(AgentConfig::a2c(Role::Diffusion).rounds_per_epoch(1000), 17);
    assert_eq!(
        AgentConfig::siac(Role::Diffusion).algorithm,
        Algorithm::Siac
    );
}

#[test]
fn identity_weights_never_mix() {
    let cfg = siac(Role::Specialised);
    let mut sys = System::new(tasks(2), cfg, &small_net(), None, None, 1).unwrap();
    assert_eq!(sys.weights, ConnectivityMatrix::identity(2));
    sys.run_rounds(1, &mut EventLog::disabled()).unwrap();
}
