use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use mec_core::queueing::QueueLoad;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{stream, Family};

/// One departure. Times are in slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub server_id: u64,
    pub tier: usize,
    pub user_type: usize,
    pub arrival: f64,
    pub start: f64,
    pub departure: f64,
}

impl TraceRecord {
    pub fn wait(&self) -> f64 {
        self.start - self.arrival
    }

    pub fn sojourn(&self) -> f64 {
        self.departure - self.arrival
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueSimOptions {
    /// Arrivals stop at this time; queued tasks are then served out.
    pub horizon_slots: f64,
    /// Tasks arriving earlier are simulated but not reported.
    pub warmup_slots: f64,
}

impl Default for QueueSimOptions {
    fn default() -> Self {
        Self { horizon_slots: 1e6, warmup_slots: 1e5 }
    }
}

/// Counters of one run over the observation window [warmup, horizon].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QueueRun {
    /// Tasks that arrived inside the window.
    pub tasks: u64,
    /// ∫ (number in system) dt over the window.
    pub area_in_system: f64,
    pub window: f64,
    pub sum_wait: f64,
    pub sum_sojourn: f64,
    /// Tasks still in the system when arrivals stopped.
    pub backlog_at_horizon: u64,
}

impl QueueRun {
    pub fn mean_in_system(&self) -> f64 {
        self.area_in_system / self.window
    }

    pub fn arrival_rate(&self) -> f64 {
        self.tasks as f64 / self.window
    }

    pub fn mean_wait(&self) -> f64 {
        self.sum_wait / self.tasks as f64
    }

    pub fn mean_sojourn(&self) -> f64 {
        self.sum_sojourn / self.tasks as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Arrival,
    Departure,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Event {
    // reversed so the max-heap pops the earliest (time, seq)
    fn cmp(&self, o: &Self) -> Ordering {
        o.time.total_cmp(&self.time).then(o.seq.cmp(&self.seq))
    }
}

struct Waiting {
    user_type: usize,
    arrival: f64,
}

fn erlang<R: Rng>(d: u32, mu: f64, rng: &mut R) -> f64 {
    (0..d).map(|_| -> f64 { Exp1.sample(rng) }).sum::<f64>() / mu
}

fn exp<R: Rng>(rate: f64, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Single-server FIFO queue with Poisson arrivals per type and
/// Erlang(d_i, μ) service. `sink` sees every departure of a task that
/// arrived inside the observation window, in departure order.
pub fn run_queue<R: Rng, F: FnMut(&TraceRecord)>(load: &QueueLoad, opts: &QueueSimOptions, server_id: u64, rng: &mut R, mut sink: F) -> QueueRun {
    let (t0, t1) = (opts.warmup_slots, opts.horizon_slots);
    let mut run = QueueRun { window: (t1 - t0).max(0.0), ..Default::default() };
    let total = load.total_rate;
    if !(total > 0.0) || t1 <= 0.0 {
        return run;
    }
    let cumulative: Vec<f64> = load
        .rates
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    let pick_type = |u: f64| cumulative.iter().position(|&c| u * total < c).unwrap_or(cumulative.len() - 1);

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Event>, time: f64, kind: Kind| {
        heap.push(Event { time, seq, kind });
        seq += 1;
    };
    push(&mut heap, exp(total, rng), Kind::Arrival);

    let mut queue: VecDeque<Waiting> = VecDeque::new();
    // the task in service: (type, arrival, start)
    let mut serving: Option<(usize, f64, f64)> = None;
    let mut in_system = 0u64;
    let mut last = 0.0f64;

    while let Some(ev) = heap.pop() {
        // accumulate the number in system over the part of [last, now] inside the window
        let (a, b) = (last.max(t0), ev.time.min(t1));
        if b > a {
            run.area_in_system += in_system as f64 * (b - a);
        }
        last = ev.time;
        match ev.kind {
            Kind::Arrival => {
                if ev.time >= t1 {
                    run.backlog_at_horizon = in_system;
                    continue;
                }
                let user_type = pick_type(rng.random::<f64>());
                in_system += 1;
                if serving.is_none() {
                    let d = load.sizes[user_type];
                    serving = Some((user_type, ev.time, ev.time));
                    push(&mut heap, ev.time + erlang(d, load.service_rate, rng), Kind::Departure);
                } else {
                    queue.push_back(Waiting { user_type, arrival: ev.time });
                }
                push(&mut heap, ev.time + exp(total, rng), Kind::Arrival);
            }
            Kind::Departure => {
                let (user_type, arrival, start) = serving.take().expect("departure without a task in service");
                in_system -= 1;
                if arrival >= t0 && arrival < t1 {
                    let rec = TraceRecord { server_id, tier: load.tier, user_type, arrival, start, departure: ev.time };
                    run.tasks += 1;
                    run.sum_wait += rec.wait();
                    run.sum_sojourn += rec.sojourn();
                    sink(&rec);
                }
                if let Some(next) = queue.pop_front() {
                    let d = load.sizes[next.user_type];
                    serving = Some((next.user_type, next.arrival, ev.time));
                    push(&mut heap, ev.time + erlang(d, load.service_rate, rng), Kind::Departure);
                }
            }
        }
    }
    run
}

/// Departure log of one simulated server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueTrace {
    pub tier: usize,
    pub seed: u64,
    pub utilization: f64,
    /// Utilization at or above one: the queue grows without bound and only
    /// the horizon keeps the run finite.
    pub unstable: bool,
    pub records: Vec<TraceRecord>,
    pub run: QueueRun,
}

impl QueueTrace {
    pub fn waits(&self) -> Vec<f64> {
        self.records.iter().map(TraceRecord::wait).collect()
    }

    pub fn sojourns_of(&self, user_type: usize) -> Vec<f64> {
        self.records.iter().filter(|r| r.user_type == user_type).map(TraceRecord::sojourn).collect()
    }
}

/// Full departure log of one tier-k server (server id 0, stream `seed`).
pub fn simulate_queue(load: &QueueLoad, opts: &QueueSimOptions, seed: u64) -> QueueTrace {
    let mut rng = stream(seed, Family::Queue, load.tier as u64);
    let mut records = Vec::new();
    let run = run_queue(load, opts, 0, &mut rng, |r| records.push(*r));
    QueueTrace { tier: load.tier, seed, utilization: load.utilization, unstable: !load.is_stable(), records, run }
}
