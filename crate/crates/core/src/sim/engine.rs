//! Event loop, channel and age bookkeeping shared by every policy.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::delay::{DelayDistribution, SystemConfig};
use crate::error::{Error, Result};
use crate::trace::{EventKind, TraceSink};

const Y_STREAM: u64 = 1;
const X_STREAM: u64 = 2;

/// Events at equal times are processed deliveries first, then ACKs, then
/// timers. A sample taken at the delivery instant therefore finds the channel
/// free, and an ACK arriving exactly when a state-1 timer is due wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    ServiceEnd,
    Ack,
    Timer,
}

#[derive(Debug, Clone, Copy)]
enum EventKindInner {
    ServiceEnd { tx: u64 },
    Ack { sample: u64, delivered: f64 },
    Timer { token: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    class: Class,
    seq: u64,
    kind: EventKindInner,
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
    // reversed so that BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.class.cmp(&self.class))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct Transmission {
    tx: u64,
    sample: u64,
    gen: f64,
    start: f64,
    corrupted: bool,
}

#[derive(Debug, Clone, Copy)]
struct Stored {
    sample: u64,
    gen: f64,
}

/// Per-cycle totals of a post-warmup cycle.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CycleRecord {
    pub area: f64,
    pub len: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct CycleAcc {
    start: f64,
    area: f64,
    samples: u64,
    corrupted: u64,
    preemptions: u64,
    trials: u64,
    stays: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Totals {
    pub corrupted: u64,
    pub preemptions: u64,
    pub trials: u64,
    pub stays: u64,
}

pub(crate) trait Controller {
    fn start(&mut self, core: &mut Core<'_>) -> Result<()>;
    fn on_ack(&mut self, core: &mut Core<'_>, sample: u64, delivered: f64) -> Result<()>;
    fn on_timer(&mut self, core: &mut Core<'_>, token: u64) -> Result<()>;
}

pub(crate) struct Core<'t> {
    sys: SystemConfig,
    rng_y: ChaCha8Rng,
    rng_x: ChaCha8Rng,
    pub now: f64,
    queue: BinaryHeap<Event>,
    seq: u64,
    events: u64,
    max_events: u64,

    serving: Option<Transmission>,
    stored: Option<Stored>,
    next_tx: u64,
    next_sample: u64,
    next_token: u64,

    fresh_gen: f64,
    last_t: f64,
    last_ack: f64,

    acc: CycleAcc,
    cycles_closed: u64,
    warmup: u64,
    pub records: Vec<CycleRecord>,
    pub totals: Totals,

    trace: Option<&'t mut dyn TraceSink>,
}

impl<'t> Core<'t> {
    pub fn new(
        sys: &SystemConfig,
        seed: u64,
        warmup: u64,
        cycles: u64,
        max_events: u64,
        trace: Option<&'t mut dyn TraceSink>,
    ) -> Self {
        let mut rng_y = ChaCha8Rng::seed_from_u64(seed);
        rng_y.set_stream(Y_STREAM);
        let mut rng_x = ChaCha8Rng::seed_from_u64(seed);
        rng_x.set_stream(X_STREAM);
        Core {
            sys: *sys,
            rng_y,
            rng_x,
            now: 0.0,
            queue: BinaryHeap::new(),
            seq: 0,
            events: 0,
            max_events,
            serving: None,
            stored: None,
            next_tx: 0,
            next_sample: 0,
            next_token: 0,
            fresh_gen: 0.0,
            last_t: 0.0,
            last_ack: f64::NEG_INFINITY,
            acc: CycleAcc::default(),
            cycles_closed: 0,
            warmup,
            records: Vec::with_capacity(cycles.saturating_sub(warmup).min(1 << 24) as usize),
            totals: Totals::default(),
            trace,
        }
    }

    pub fn cycles_closed(&self) -> u64 {
        self.cycles_closed
    }

    /// Samples taken since the current cycle started.
    pub fn cycle_samples(&self) -> u64 {
        self.acc.samples
    }

    fn push(&mut self, time: f64, class: Class, kind: EventKindInner) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            class,
            seq: self.seq,
            kind,
        });
    }

    fn emit(&mut self, kind: EventKind, detail: impl FnOnce() -> String) -> Result<()> {
        if let Some(t) = self.trace.as_deref_mut() {
            t.record(self.now, kind, &detail())
                .map_err(|e| Error::TraceIo(e.to_string()))?;
        }
        Ok(())
    }

    pub fn trace_state(&mut self, kind: EventKind, detail: impl FnOnce() -> String) -> Result<()> {
        self.emit(kind, detail)
    }

    /// Schedules a controller timer and returns its token.
    pub fn schedule_timer(&mut self, at: f64) -> u64 {
        self.next_token += 1;
        let token = self.next_token;
        self.push(at, Class::Timer, EventKindInner::Timer { token });
        token
    }

    pub fn record_trial(&mut self, stayed: bool) {
        self.acc.trials += 1;
        if stayed {
            self.acc.stays += 1;
        }
    }

    /// Integrates the age up to `t`.
    fn advance(&mut self, t: f64) {
        let dt = t - self.last_t;
        if dt > 0.0 {
            let a0 = self.last_t - self.fresh_gen;
            let a1 = t - self.fresh_gen;
            self.acc.area += 0.5 * (a0 + a1) * dt;
        }
        self.last_t = t;
        self.now = t;
    }

    /// Ends the current cycle at the current time and starts a new one.
    pub fn close_cycle(&mut self) {
        let acc = std::mem::take(&mut self.acc);
        self.acc.start = self.now;
        if self.cycles_closed >= self.warmup {
            self.records.push(CycleRecord {
                area: acc.area,
                len: self.now - acc.start,
                samples: acc.samples,
            });
            self.totals.corrupted += acc.corrupted;
            self.totals.preemptions += acc.preemptions;
            self.totals.trials += acc.trials;
            self.totals.stays += acc.stays;
        }
        self.cycles_closed += 1;
    }

    fn start_tx(&mut self, sample: u64, gen: f64, corrupted: bool) {
        let y = self.sys.y.sample(&mut self.rng_y);
        self.next_tx += 1;
        let tx = self.next_tx;
        self.serving = Some(Transmission {
            tx,
            sample,
            gen,
            start: self.now,
            corrupted,
        });
        self.push(self.now + y, Class::ServiceEnd, EventKindInner::ServiceEnd { tx });
    }

    /// Takes a sample now and hands it to the channel. With `preempt` the
    /// storage is flushed and any transmission in progress is cancelled first.
    pub fn take_sample(&mut self, preempt: bool) -> Result<u64> {
        let id = self.next_sample;
        self.next_sample += 1;
        self.acc.samples += 1;
        self.emit(EventKind::Sample, || format!("id={id}"))?;
        if preempt {
            self.stored = None;
            if let Some(tx) = self.serving.take() {
                self.acc.preemptions += 1;
                self.emit(EventKind::Preempt, || format!("dropped={};by={id}", tx.sample))?;
            }
        }
        if self.serving.is_none() {
            self.start_tx(id, self.now, false);
        } else {
            self.acc.corrupted += 1;
            let fate = if self.stored.is_none() {
                self.stored = Some(Stored {
                    sample: id,
                    gen: self.now,
                });
                "stored"
            } else {
                "lost"
            };
            self.emit(EventKind::Corrupt, || format!("id={id};fate={fate}"))?;
        }
        Ok(id)
    }

    fn on_service_end(&mut self, tx: u64) -> Result<()> {
        let Some(t) = self.serving.filter(|s| s.tx == tx) else {
            // transmission was preempted
            return Ok(());
        };
        self.serving = None;
        self.emit(EventKind::Deliver, || {
            format!(
                "id={};gen={};start={};corrupted={}",
                t.sample,
                t.gen,
                t.start,
                u8::from(t.corrupted)
            )
        })?;
        if !t.corrupted {
            if t.gen > self.fresh_gen {
                self.fresh_gen = t.gen;
            }
            let x = self.sys.x.sample(&mut self.rng_x);
            self.push(
                self.now + x,
                Class::Ack,
                EventKindInner::Ack {
                    sample: t.sample,
                    delivered: self.now,
                },
            );
        }
        if let Some(s) = self.stored.take() {
            self.start_tx(s.sample, s.gen, true);
        }
        Ok(())
    }

    /// Runs until `target` cycles have been closed.
    pub fn run<C: Controller>(&mut self, ctrl: &mut C, target: u64) -> Result<()> {
        ctrl.start(self)?;
        while self.cycles_closed < target {
            let Some(ev) = self.queue.pop() else {
                return Err(Error::InvalidSimConfig("event queue ran dry".into()));
            };
            self.events += 1;
            if self.events > self.max_events {
                return Err(Error::EventCapExceeded(self.max_events));
            }
            self.advance(ev.time);
            match ev.kind {
                EventKindInner::ServiceEnd { tx } => self.on_service_end(tx)?,
                EventKindInner::Ack { sample, delivered } => {
                    if self.now <= self.last_ack {
                        return Err(Error::AckOrderViolation {
                            time: self.now,
                            previous: self.last_ack,
                        });
                    }
                    self.last_ack = self.now;
                    self.emit(EventKind::Ack, || format!("id={sample};delivered={delivered}"))?;
                    ctrl.on_ack(self, sample, delivered)?;
                }
                EventKindInner::Timer { token } => ctrl.on_timer(self, token)?,
            }
        }
        Ok(())
    }
}
