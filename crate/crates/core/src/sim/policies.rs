use std::collections::VecDeque;

use super::engine::{Controller, Core};
use crate::error::Result;
use crate::trace::EventKind;

#[derive(Debug, Clone, Copy)]
enum EarlyState {
    /// Waiting on the ACK of the reference sample taken at `gen`, with the
    /// sample scheduled at `gen + k` possibly already taken.
    One {
        reference: u64,
        gen: f64,
        early: Option<(u64, f64)>,
    },
    /// Channel known free (or known to carry a corrupted sample when
    /// `preempt` is set); the next sample starts a new cycle.
    Two { preempt: bool },
}

pub(crate) struct Early {
    k: f64,
    beta: f64,
    batch: u64,
    state: EarlyState,
    timer: Option<u64>,
    stays: u64,
}

impl Early {
    pub fn new(k: f64, beta: f64, batch: u64) -> Self {
        Early {
            k,
            beta,
            batch,
            state: EarlyState::Two { preempt: false },
            timer: None,
            stays: 0,
        }
    }

    fn enter_one(&mut self, core: &mut Core<'_>, reference: u64, gen: f64) -> Result<()> {
        self.state = EarlyState::One {
            reference,
            gen,
            early: None,
        };
        self.timer = Some(core.schedule_timer(gen + self.k));
        core.trace_state(EventKind::State1, || format!("id={reference}"))
    }

    fn enter_two(&mut self, core: &mut Core<'_>, y: f64, x: f64, preempt: bool) -> Result<()> {
        let wait = (self.beta - (y + x)).max(0.0);
        self.state = EarlyState::Two { preempt };
        self.timer = Some(core.schedule_timer(core.now + wait));
        self.stays = 0;
        core.trace_state(EventKind::State2, || format!("wait={wait}"))
    }
}

impl Controller for Early {
    fn start(&mut self, core: &mut Core<'_>) -> Result<()> {
        let id = core.take_sample(false)?;
        self.enter_one(core, id, core.now)
    }

    fn on_ack(&mut self, core: &mut Core<'_>, sample: u64, delivered: f64) -> Result<()> {
        let EarlyState::One {
            reference,
            gen,
            early,
        } = self.state
        else {
            return Ok(());
        };
        if sample != reference {
            return Ok(());
        }
        let (y, x) = (delivered - gen, core.now - delivered);
        match early {
            None => {
                // ACK beat the state-1 timer
                self.timer = None;
                core.record_trial(false);
                self.enter_two(core, y, x, false)
            }
            Some((id, at)) if at >= delivered => {
                core.record_trial(true);
                self.stays += 1;
                if self.stays >= self.batch {
                    // state 2 is (almost) never reached; cut a batch here
                    core.close_cycle();
                    self.stays = 0;
                }
                self.enter_one(core, id, at)
            }
            Some(_) => {
                core.record_trial(false);
                self.enter_two(core, y, x, true)
            }
        }
    }

    fn on_timer(&mut self, core: &mut Core<'_>, token: u64) -> Result<()> {
        if self.timer != Some(token) {
            return Ok(());
        }
        self.timer = None;
        match self.state {
            EarlyState::One {
                reference,
                gen,
                early: None,
            } => {
                let id = core.take_sample(false)?;
                self.state = EarlyState::One {
                    reference,
                    gen,
                    early: Some((id, core.now)),
                };
                Ok(())
            }
            EarlyState::One { .. } => Ok(()),
            EarlyState::Two { preempt } => {
                core.close_cycle();
                let id = core.take_sample(preempt)?;
                self.enter_one(core, id, core.now)
            }
        }
    }
}

pub(crate) struct WaitForAck {
    beta: f64,
    gen: f64,
    timer: Option<u64>,
}

impl WaitForAck {
    pub fn new(beta: f64) -> Self {
        WaitForAck {
            beta,
            gen: 0.0,
            timer: None,
        }
    }

    fn sample(&mut self, core: &mut Core<'_>) -> Result<()> {
        let id = core.take_sample(false)?;
        self.gen = core.now;
        core.trace_state(EventKind::State1, || format!("id={id}"))
    }
}

impl Controller for WaitForAck {
    fn start(&mut self, core: &mut Core<'_>) -> Result<()> {
        self.sample(core)
    }

    fn on_ack(&mut self, core: &mut Core<'_>, _sample: u64, _delivered: f64) -> Result<()> {
        let u = core.now - self.gen;
        let wait = (self.beta - u).max(0.0);
        self.timer = Some(core.schedule_timer(core.now + wait));
        core.trace_state(EventKind::State2, || format!("wait={wait}"))
    }

    fn on_timer(&mut self, core: &mut Core<'_>, token: u64) -> Result<()> {
        if self.timer != Some(token) {
            return Ok(());
        }
        self.timer = None;
        core.close_cycle();
        self.sample(core)
    }
}

pub(crate) struct Periodic {
    period: f64,
    batch: u64,
    ticks: u64,
    /// Samples taken and not yet known to be delivered, oldest first.
    outstanding: VecDeque<(u64, f64)>,
}

impl Periodic {
    pub fn new(period: f64, batch: u64) -> Self {
        Periodic {
            period,
            batch,
            ticks: 0,
            outstanding: VecDeque::new(),
        }
    }

    fn sample(&mut self, core: &mut Core<'_>, preempt: bool) -> Result<()> {
        let id = core.take_sample(preempt)?;
        self.outstanding.push_back((id, core.now));
        Ok(())
    }
}

impl Controller for Periodic {
    fn start(&mut self, core: &mut Core<'_>) -> Result<()> {
        self.sample(core, false)?;
        self.ticks = 1;
        core.schedule_timer(self.period);
        Ok(())
    }

    fn on_ack(&mut self, core: &mut Core<'_>, sample: u64, delivered: f64) -> Result<()> {
        while self.outstanding.front().is_some_and(|&(id, _)| id <= sample) {
            self.outstanding.pop_front();
        }
        // anything sampled before the reported delivery was enqueued behind
        // the acknowledged sample and is corrupted
        let corrupted = self.outstanding.front().is_some_and(|&(_, gen)| gen < delivered);
        core.record_trial(!corrupted);
        if corrupted {
            self.outstanding.clear();
            self.sample(core, true)?;
        }
        Ok(())
    }

    fn on_timer(&mut self, core: &mut Core<'_>, _token: u64) -> Result<()> {
        if core.cycle_samples() >= self.batch {
            core.close_cycle();
        }
        self.sample(core, false)?;
        self.ticks += 1;
        core.schedule_timer(self.ticks as f64 * self.period);
        Ok(())
    }
}
