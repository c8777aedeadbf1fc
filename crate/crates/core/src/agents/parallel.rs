use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crossbeam_channel::{unbounded, Receiver, Sender};

use crate::error::{Error, Result};
use crate::network::combine_agent;
use crate::nn::ParamVector;

use super::events::RoundEvent;
use super::system::{Agent, System};

enum Msg {
    Snapshot {
        from: usize,
        version: u64,
        actor: Arc<ParamVector<f64>>,
        critic: Arc<ParamVector<f64>>,
    },
    Failed,
}

enum Report {
    Epoch(Box<EpochSnapshot>),
    Failed(Error),
}

/// State of one agent at the end of an epoch in parallel mode.
pub struct EpochSnapshot {
    pub epoch: usize,
    pub agent: Agent,
    pub events: Vec<RoundEvent>,
}

struct Latest {
    actor: Arc<ParamVector<f64>>,
    critic: Arc<ParamVector<f64>>,
}

/// Neighbour id with its actor and critic parameters.
type Snapshot = (usize, Arc<ParamVector<f64>>, Arc<ParamVector<f64>>);

struct Link<'a> {
    k: usize,
    system: &'a System,
    inbox: Receiver<Msg>,
    outboxes: Vec<Sender<Msg>>,
    neighbours: Vec<usize>,
    /// Per neighbour, snapshots by version. Neighbours can run ahead, so
    /// more than one may be buffered.
    buffered: BTreeMap<usize, BTreeMap<u64, Latest>>,
}

impl Link<'_> {
    fn absorb(&mut self, msg: Msg) -> Result<()> {
        match msg {
            Msg::Snapshot {
                from,
                version,
                actor,
                critic,
            } => {
                self.buffered
                    .entry(from)
                    .or_default()
                    .insert(version, Latest { actor, critic });
                Ok(())
            }
            Msg::Failed => Err(Error::Numerical {
                agent: self.k,
                what: "a neighbour stopped".into(),
            }),
        }
    }

    /// Newest buffered version of `l` not newer than `round`.
    fn usable(&self, l: usize, round: u64) -> Option<u64> {
        self.buffered
            .get(&l)?
            .range(..=round)
            .next_back()
            .map(|(v, _)| *v)
    }

    /// Blocks until every neighbour has a snapshot with version in
    /// `[need, round]`, then returns the newest such snapshot of each and
    /// drops older ones.
    fn gather(&mut self, need: u64, round: u64) -> Result<Vec<Snapshot>> {
        while let Ok(msg) = self.inbox.try_recv() {
            self.absorb(msg)?;
        }
        while self
            .neighbours
            .iter()
            .any(|&l| self.usable(l, round).is_none_or(|v| v < need))
        {
            let msg = self.inbox.recv().map_err(|_| Error::Numerical {
                agent: self.k,
                what: "neighbour channel closed".into(),
            })?;
            self.absorb(msg)?;
        }
        let mut out = Vec::with_capacity(self.neighbours.len());
        for &l in &self.neighbours {
            let v = self.usable(l, round).expect("waited above");
            let buf = self.buffered.get_mut(&l).expect("waited above");
            *buf = buf.split_off(&v);
            let s = &buf[&v];
            out.push((l, s.actor.clone(), s.critic.clone()));
        }
        Ok(out)
    }

    fn publish(&self, msg: impl Fn() -> Msg) {
        for out in &self.outboxes {
            let _ = out.send(msg());
        }
    }
}

fn agent_loop(
    mut agent: Agent,
    mut link: Link<'_>,
    epochs: usize,
    rounds_per_epoch: usize,
    report: &Sender<Report>,
    stop: &AtomicBool,
) -> Result<()> {
    let system = link.system;
    let cfg = &system.cfg;
    let mut round = system.round;
    for epoch in 1..=epochs {
        let mut events = Vec::with_capacity(rounds_per_epoch);
        for _ in 0..rounds_per_epoch {
            if stop.load(Ordering::Relaxed) {
                return Err(Error::Numerical {
                    agent: link.k,
                    what: "run stopped".into(),
                });
            }
            round += 1;
            let stats = agent.adapt_round(cfg)?;
            let actor = Arc::new(agent.learner.actor_params.clone());
            let critic = Arc::new(agent.learner.critic_params.clone());
            link.publish(|| Msg::Snapshot {
                from: link.k,
                version: round,
                actor: actor.clone(),
                critic: critic.clone(),
            });
            let snaps = link.gather(round.saturating_sub(cfg.staleness_limit as u64), round)?;
            let mask = system.mask_for(round);
            let snaps_a: Vec<(usize, &ParamVector<f64>)> =
                snaps.iter().map(|(l, a, _)| (*l, a.as_ref())).collect();
            let snaps_c: Vec<(usize, &ParamVector<f64>)> =
                snaps.iter().map(|(l, _, c)| (*l, c.as_ref())).collect();
            agent.learner.actor_params =
                combine_agent(link.k, &actor, &snaps_a, &system.weights, mask.as_ref())?;
            agent.learner.critic_params =
                combine_agent(link.k, &critic, &snaps_c, &system.weights, mask.as_ref())?;
            events.push(RoundEvent {
                round,
                actor_grad_norms: vec![stats.actor_grad_norm],
                critic_grad_norms: vec![stats.critic_grad_norm],
                disagreement: None,
                dropped_links: match (&mask, &system.topology) {
                    (Some(m), Some(t)) => m
                        .dropped(t)
                        .into_iter()
                        .filter(|&(a, b)| a == link.k || b == link.k)
                        .collect(),
                    _ => Vec::new(),
                },
            });
        }
        let snapshot = EpochSnapshot {
            epoch,
            agent: agent.clone(),
            events,
        };
        if report.send(Report::Epoch(Box::new(snapshot))).is_err() {
            return Err(Error::Numerical {
                agent: link.k,
                what: "coordinator went away".into(),
            });
        }
    }
    Ok(())
}

/// Runs `epochs` epochs with one thread per agent. Agents exchange adapted
/// snapshots by message and combine using the newest snapshot of each
/// neighbour, waiting whenever one is more than `staleness_limit` rounds
/// old. `on_epoch` sees every agent's state at the end of each epoch.
pub fn run_parallel<F>(
    system: System,
    epochs: usize,
    rounds_per_epoch: usize,
    mut on_epoch: F,
) -> Result<System>
where
    F: FnMut(usize, &[Agent], &[RoundEvent]) -> Result<()>,
{
    if system.cfg.average_moments {
        return Err(Error::Config(
            "moment averaging is only available in sync mode".into(),
        ));
    }
    let n = system.agents.len();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|k| match &system.topology {
            Some(t) => t.neighbourhood(k).into_iter().filter(|&l| l != k).collect(),
            None => Vec::new(),
        })
        .collect();
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..n).map(|_| unbounded::<Msg>()).unzip();
    let (report_tx, report_rx) = unbounded::<Report>();
    let stop = AtomicBool::new(false);
    let mut final_agents: Vec<Option<Agent>> = vec![None; n];
    let mut first_error = None;

    std::thread::scope(|scope| {
        for (k, (agent, inbox)) in system.agents.iter().cloned().zip(receivers).enumerate() {
            let link = Link {
                k,
                system: &system,
                inbox,
                outboxes: neighbours[k].iter().map(|&l| senders[l].clone()).collect(),
                neighbours: neighbours[k].clone(),
                buffered: BTreeMap::new(),
            };
            let report = report_tx.clone();
            let stop = &stop;
            scope.spawn(move || {
                let outboxes = link.outboxes.clone();
                if let Err(e) = agent_loop(agent, link, epochs, rounds_per_epoch, &report, stop) {
                    for out in outboxes {
                        let _ = out.send(Msg::Failed);
                    }
                    let _ = report.send(Report::Failed(e));
                }
            });
        }
        drop(report_tx);

        let mut pending: BTreeMap<usize, Vec<Option<EpochSnapshot>>> = BTreeMap::new();
        let mut next_epoch = 1;
        for report in report_rx.iter() {
            match report {
                Report::Failed(e) => {
                    stop.store(true, Ordering::Relaxed);
                    let is_cascade = matches!(&e, Error::Numerical { what, .. }
                        if what == "a neighbour stopped" || what == "run stopped" || what == "neighbour channel closed");
                    if first_error.is_none()
                        || (!is_cascade && matches!(first_error, Some((true, _))))
                    {
                        first_error = Some((is_cascade, e));
                    }
                }
                Report::Epoch(snap) => {
                    let slot = pending
                        .entry(snap.epoch)
                        .or_insert_with(|| (0..n).map(|_| None).collect());
                    let k = snap.agent.id;
                    slot[k] = Some(*snap);
                    while pending
                        .get(&next_epoch)
                        .is_some_and(|s| s.iter().all(Option::is_some))
                    {
                        let snaps: Vec<EpochSnapshot> = pending
                            .remove(&next_epoch)
                            .expect("present")
                            .into_iter()
                            .map(|s| s.expect("full"))
                            .collect();
                        let events: Vec<RoundEvent> = snaps
                            .iter()
                            .flat_map(|s| s.events.iter().cloned())
                            .collect();
                        let agents: Vec<Agent> = snaps.into_iter().map(|s| s.agent).collect();
                        if first_error.is_none() {
                            if let Err(e) = on_epoch(next_epoch, &agents, &events) {
                                stop.store(true, Ordering::Relaxed);
                                first_error = Some((false, e));
                            }
                        }
                        if next_epoch == epochs {
                            final_agents = agents.into_iter().map(Some).collect();
                        }
                        next_epoch += 1;
                    }
                }
            }
        }
    });
    drop(senders);

    if let Some((_, e)) = first_error {
        return Err(e);
    }
    let mut system = system;
    if epochs > 0 {
        system.agents = final_agents
            .into_iter()
            .map(|a| a.expect("every agent reported"))
            .collect();
        system.round += (epochs * rounds_per_epoch) as u64;
    }
    Ok(system)
}
