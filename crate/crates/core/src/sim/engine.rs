//! The event loop of one simulated exchange platform.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::Serialize;

use crate::compat::MedicalRecord;
use crate::matching::pape_conradt_lists;

use super::config::{Backend, SimConfig};
use super::generator::CompactRecord;
use super::runtime::{split_pool, RuntimeModel};
use super::SimError;

const STREAM_ARRIVALS: u64 = 1;
const STREAM_MATCHING: u64 = 2;
const STREAM_OFFERS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairState {
    InPool,
    InMatchRun,
    Reentering,
    Departed,
    Transplanted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub id: u64,
    pub entry_time: f64,
    pub medical: MedicalRecord,
    pub sensitized: bool,
    pub state: PairState,
    pub departure_time: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StateCounts {
    pub in_pool: u64,
    pub in_match_run: u64,
    pub reentering: u64,
    pub departed: u64,
    pub transplanted: u64,
}

impl StateCounts {
    pub fn total(&self) -> u64 {
        self.in_pool + self.in_match_run + self.reentering + self.departed + self.transplanted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchRunLog {
    pub time: f64,
    pub pool_size: usize,
    pub sub_pools: Vec<usize>,
    pub matched_pairs: usize,
    /// Latest completion time among the sub-pools.
    pub completion: f64,
    /// No sub-pool size fits into the match run interval.
    pub infeasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub arrivals: u64,
    /// Patients transplanted over the horizon; always even.
    pub transplants: u64,
    /// Mean of transplant time minus entry time over transplanted patients; 0 when none.
    pub avg_waiting_days: f64,
    /// Match runs whose pool was split into more than one sub-pool.
    pub sub_pool_splits: u64,
    pub refusals: u64,
    pub crossmatch_failures: u64,
    /// Offers dropped because a partner departed during the protocol run.
    pub voided_offers: u64,
    pub final_states: StateCounts,
    pub match_runs: Vec<MatchRunLog>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfferOutcome {
    Refused,
    CrossmatchFailed,
    Transplanted,
}

/// One refusal roll for the match, then one crossmatch roll per recipient.
pub fn resolve_offer<R: Rng + ?Sized>(cfg: &SimConfig, a_sensitized: bool, b_sensitized: bool, rng: &mut R) -> OfferOutcome {
    if rng.gen_bool(cfg.refusal_prob) {
        return OfferOutcome::Refused;
    }
    let fail = |sensitized: bool| if sensitized { cfg.crossmatch_fail_sensitized } else { cfg.crossmatch_fail_other };
    let a_fails = rng.gen_bool(fail(a_sensitized));
    let b_fails = rng.gen_bool(fail(b_sensitized));
    if a_fails || b_fails {
        OfferOutcome::CrossmatchFailed
    } else {
        OfferOutcome::Transplanted
    }
}

#[derive(Debug, Clone, PartialEq)]
enum EventKind {
    Departure(usize),
    Reenter(usize),
    Arrival,
    MatchComplete(usize),
    MatchRun,
}

impl EventKind {
    fn priority(&self) -> u8 {
        match self {
            EventKind::Departure(_) => 0,
            EventKind::Reenter(_) => 1,
            EventKind::Arrival => 2,
            EventKind::MatchComplete(_) => 3,
            EventKind::MatchRun => 4,
        }
    }
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind.priority(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, pa, sa) = self.key();
        let (tb, pb, sb) = other.key();
        tb.total_cmp(&ta).then(pb.cmp(&pa)).then(sb.cmp(&sa))
    }
}

struct PendingRun {
    members: Vec<usize>,
    offers: Vec<(usize, usize)>,
}

/// Where arriving pairs come from.
enum Source<'a> {
    Generated,
    Fixed(&'a [MedicalRecord]),
}

struct Simulation<'a> {
    cfg: &'a SimConfig,
    model: &'a RuntimeModel,
    source: Source<'a>,
    now: f64,
    seq: u64,
    events: BinaryHeap<Event>,
    pairs: Vec<PairRecord>,
    compact: Vec<CompactRecord>,
    /// Mutually compatible partners, pruned lazily of pairs that left.
    neighbors: Vec<Vec<u32>>,
    present: Vec<usize>,
    present_pos: Vec<usize>,
    pending: Vec<Option<PendingRun>>,
    local: Vec<u32>,
    arrival_rng: ChaCha8Rng,
    matching_rng: ChaCha8Rng,
    offer_rng: ChaCha8Rng,
    departure: Geometric,
    next_arrival: u64,
    next_run: u64,
    wait_sum: f64,
    metrics: Metrics,
}

pub fn run_simulation(cfg: &SimConfig, model: &RuntimeModel, seed: u64) -> Result<Metrics, SimError> {
    Simulation::new(cfg, model, seed, Source::Generated)?.run()
}

/// Same event loop, but the arriving pairs are `records` in order and
/// arrivals stop once they run out.
pub fn run_simulation_with_records(
    cfg: &SimConfig,
    model: &RuntimeModel,
    seed: u64,
    records: &[MedicalRecord],
) -> Result<Metrics, SimError> {
    Simulation::new(cfg, model, seed, Source::Fixed(records))?.run()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a SimConfig, model: &'a RuntimeModel, seed: u64, source: Source<'a>) -> Result<Self, SimError> {
        cfg.validate()?;
        if cfg.backend == Backend::PrivacyPreserving {
            model.factor(cfg.latency_ms)?;
        }
        let departure = Geometric::new(1.0 / cfg.mean_stay_days).map_err(|e| SimError::Config(e.to_string()))?;
        Ok(Self {
            cfg,
            model,
            source,
            now: 0.0,
            seq: 0,
            events: BinaryHeap::new(),
            pairs: Vec::new(),
            compact: Vec::new(),
            neighbors: Vec::new(),
            present: Vec::new(),
            present_pos: Vec::new(),
            pending: Vec::new(),
            local: Vec::new(),
            arrival_rng: stream(seed, STREAM_ARRIVALS),
            matching_rng: stream(seed, STREAM_MATCHING),
            offer_rng: stream(seed, STREAM_OFFERS),
            departure,
            next_arrival: 1,
            next_run: 1,
            wait_sum: 0.0,
            metrics: Metrics {
                arrivals: 0,
                transplants: 0,
                avg_waiting_days: 0.0,
                sub_pool_splits: 0,
                refusals: 0,
                crossmatch_failures: 0,
                voided_offers: 0,
                final_states: StateCounts::default(),
                match_runs: Vec::new(),
            },
        })
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        if time <= self.cfg.horizon_days {
            self.seq += 1;
            self.events.push(Event { time, seq: self.seq, kind });
        }
    }

    fn schedule_next_arrival(&mut self, last: f64) {
        let time = if self.cfg.poisson_arrivals {
            let exp = Exp::new(1.0 / self.cfg.arrival_interval_days).expect("positive rate");
            last + exp.sample(&mut self.arrival_rng)
        } else {
            self.next_arrival as f64 * self.cfg.arrival_interval_days
        };
        self.next_arrival += 1;
        self.schedule(time, EventKind::Arrival);
    }

    fn schedule_next_run(&mut self) {
        let time = self.next_run as f64 * self.cfg.match_run_interval_days;
        self.next_run += 1;
        self.schedule(time, EventKind::MatchRun);
    }

    fn run(mut self) -> Result<Metrics, SimError> {
        self.schedule_next_arrival(0.0);
        self.schedule_next_run();
        while let Some(ev) = self.events.pop() {
            self.now = ev.time;
            match ev.kind {
                EventKind::Arrival => self.arrival(),
                EventKind::Departure(id) => self.depart(id),
                EventKind::Reenter(id) => {
                    if self.pairs[id].state == PairState::Reentering {
                        self.pairs[id].state = PairState::InPool;
                    }
                }
                EventKind::MatchRun => {
                    self.match_run()?;
                    self.schedule_next_run();
                }
                EventKind::MatchComplete(run) => self.complete(run),
            }
        }
        let mut counts = StateCounts::default();
        for p in &self.pairs {
            match p.state {
                PairState::InPool => counts.in_pool += 1,
                PairState::InMatchRun => counts.in_match_run += 1,
                PairState::Reentering => counts.reentering += 1,
                PairState::Departed => counts.departed += 1,
                PairState::Transplanted => counts.transplanted += 1,
            }
        }
        self.metrics.final_states = counts;
        if self.metrics.transplants > 0 {
            self.metrics.avg_waiting_days = self.wait_sum / self.metrics.transplants as f64;
        }
        Ok(self.metrics)
    }

    fn arrival(&mut self) {
        let id = self.pairs.len();
        let medical = match &self.source {
            Source::Generated => self.cfg.generator.sample(id as u64, &mut self.arrival_rng),
            Source::Fixed(records) => match records.get(id) {
                Some(r) => r.clone(),
                None => return,
            },
        };
        let stay = self.departure.sample(&mut self.arrival_rng) as f64 + 1.0;
        let compact = CompactRecord::new(&medical);
        let mut mine = Vec::new();
        for &other in &self.present {
            let c = &self.compact[other];
            if compact.donates_to(c) && c.donates_to(&compact) {
                mine.push(other as u32);
                self.neighbors[other].push(id as u32);
            }
        }
        self.pairs.push(PairRecord {
            id: id as u64,
            entry_time: self.now,
            sensitized: medical.sensitized,
            medical,
            state: PairState::InPool,
            departure_time: self.now + stay,
        });
        self.compact.push(compact);
        self.neighbors.push(mine);
        self.present_pos.push(self.present.len());
        self.present.push(id);
        self.local.push(0);
        self.metrics.arrivals += 1;
        self.schedule(self.now + stay, EventKind::Departure(id));
        self.schedule_next_arrival(self.now);
    }

    fn leave(&mut self, id: usize, state: PairState) {
        self.pairs[id].state = state;
        let pos = self.present_pos[id];
        self.present.swap_remove(pos);
        if let Some(&moved) = self.present.get(pos) {
            self.present_pos[moved] = pos;
        }
        self.present_pos[id] = usize::MAX;
    }

    fn depart(&mut self, id: usize) {
        if self.pairs[id].state != PairState::Transplanted && self.pairs[id].state != PairState::Departed {
            self.leave(id, PairState::Departed);
        }
    }

    fn match_run(&mut self) -> Result<(), SimError> {
        let mut pool: Vec<usize> = self
            .present
            .iter()
            .copied()
            .filter(|&id| self.pairs[id].state == PairState::InPool)
            .collect();
        pool.sort_unstable();
        pool.shuffle(&mut self.matching_rng);
        let mut log = MatchRunLog {
            time: self.now,
            pool_size: pool.len(),
            sub_pools: Vec::new(),
            matched_pairs: 0,
            completion: self.now,
            infeasible: false,
        };
        if pool.is_empty() {
            self.metrics.match_runs.push(log);
            return Ok(());
        }
        match self.cfg.backend {
            Backend::Conventional => {
                log.sub_pools.push(pool.len());
                let offers = self.solve(&pool);
                log.matched_pairs = 2 * offers.len();
                for (a, b) in offers {
                    self.offer(a, b);
                }
            }
            Backend::PrivacyPreserving => {
                let cap = self.model.cap(self.cfg.latency_ms, self.cfg.match_run_interval_days)?;
                if cap == 0 {
                    tracing::warn!(time = self.now, pool = pool.len(), "no sub-pool size fits the match run interval");
                    log.infeasible = true;
                    self.metrics.match_runs.push(log);
                    return Ok(());
                }
                let sizes = split_pool(pool.len(), cap);
                if sizes.len() > 1 {
                    self.metrics.sub_pool_splits += 1;
                }
                let mut start = 0;
                for &size in &sizes {
                    let members = pool[start..start + size].to_vec();
                    start += size;
                    let hours = self
                        .model
                        .runtime_hours(self.cfg.latency_ms, size)?
                        .expect("sizes within cap are feasible");
                    let offers = self.solve(&members);
                    log.matched_pairs += 2 * offers.len();
                    for &id in &members {
                        self.pairs[id].state = PairState::InMatchRun;
                    }
                    let done = self.now + hours / 24.0;
                    log.completion = log.completion.max(done);
                    let run = self.pending.len();
                    self.pending.push(Some(PendingRun { members, offers }));
                    if done <= self.cfg.horizon_days {
                        self.schedule(done, EventKind::MatchComplete(run));
                    }
                }
                log.sub_pools = sizes;
            }
        }
        self.metrics.match_runs.push(log);
        Ok(())
    }

    /// Maximum matching on the compatibility graph induced by `members`, in their order.
    fn solve(&mut self, members: &[usize]) -> Vec<(usize, usize)> {
        for (i, &id) in members.iter().enumerate() {
            self.local[id] = i as u32 + 1;
        }
        let mut lists = Vec::with_capacity(members.len());
        for &id in members {
            let pairs = &self.pairs;
            self.neighbors[id].retain(|&u| !matches!(pairs[u as usize].state, PairState::Departed | PairState::Transplanted));
            let mut list: Vec<usize> = self.neighbors[id]
                .iter()
                .map(|&u| self.local[u as usize] as usize)
                .filter(|&l| l != 0)
                .collect();
            list.sort_unstable();
            lists.push(list);
        }
        let mut mate = vec![0; members.len()];
        pape_conradt_lists(&lists, &mut mate);
        for &id in members {
            self.local[id] = 0;
        }
        mate.iter()
            .enumerate()
            .filter(|&(i, &m)| m > i + 1)
            .map(|(i, &m)| (members[i], members[m - 1]))
            .collect()
    }

    fn offer(&mut self, a: usize, b: usize) {
        let outcome = resolve_offer(self.cfg, self.pairs[a].sensitized, self.pairs[b].sensitized, &mut self.offer_rng);
        match outcome {
            OfferOutcome::Transplanted => {
                for id in [a, b] {
                    self.wait_sum += self.now - self.pairs[id].entry_time;
                    self.leave(id, PairState::Transplanted);
                }
                self.metrics.transplants += 2;
            }
            OfferOutcome::Refused => {
                self.metrics.refusals += 1;
                self.reenter(a, b, self.cfg.reentry_refusal_days);
            }
            OfferOutcome::CrossmatchFailed => {
                self.metrics.crossmatch_failures += 1;
                self.reenter(a, b, self.cfg.reentry_crossmatch_days);
            }
        }
    }

    fn reenter(&mut self, a: usize, b: usize, delay: f64) {
        for id in [a, b] {
            self.pairs[id].state = PairState::Reentering;
            self.schedule(self.now + delay, EventKind::Reenter(id));
        }
    }

    fn complete(&mut self, run: usize) {
        let Some(PendingRun { members, offers }) = self.pending[run].take() else {
            return;
        };
        for (a, b) in offers {
            let a_here = self.pairs[a].state == PairState::InMatchRun;
            let b_here = self.pairs[b].state == PairState::InMatchRun;
            if a_here && b_here {
                self.offer(a, b);
            } else if a_here || b_here {
                self.metrics.voided_offers += 1;
            }
        }
        for id in members {
            if self.pairs[id].state == PairState::InMatchRun {
                self.pairs[id].state = PairState::InPool;
            }
        }
    }
}
