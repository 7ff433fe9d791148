//! Event traces of a simulation run and an offline audit of them.
//!
//! Trace format, one event per line after a `time,event_kind,detail` header:
//!
//! | kind      | detail                                             |
//! |-----------|----------------------------------------------------|
//! | `SAMPLE`  | `id=N`                                             |
//! | `CORRUPT` | `id=N;fate=stored` or `id=N;fate=lost`             |
//! | `DELIVER` | `id=N;gen=T;start=T;corrupted=0\|1`                |
//! | `ACK`     | `id=N;delivered=T`                                 |
//! | `PREEMPT` | `dropped=N;by=M`                                   |
//! | `STATE1`  | `id=N` (sample that starts the state-1 stretch)    |
//! | `STATE2`  | `wait=T`                                           |
//!
//! Times are printed with Rust's shortest round-trip `f64` formatting, so a
//! parsed trace reproduces the simulator's values exactly.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Sample,
    Corrupt,
    Deliver,
    Ack,
    Preempt,
    State1,
    State2,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Sample => "SAMPLE",
            EventKind::Corrupt => "CORRUPT",
            EventKind::Deliver => "DELIVER",
            EventKind::Ack => "ACK",
            EventKind::Preempt => "PREEMPT",
            EventKind::State1 => "STATE1",
            EventKind::State2 => "STATE2",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "SAMPLE" => EventKind::Sample,
            "CORRUPT" => EventKind::Corrupt,
            "DELIVER" => EventKind::Deliver,
            "ACK" => EventKind::Ack,
            "PREEMPT" => EventKind::Preempt,
            "STATE1" => EventKind::State1,
            "STATE2" => EventKind::State2,
            other => return Err(format!("unknown event kind {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: EventKind,
    pub detail: String,
}

impl TraceRecord {
    /// Looks up `key=value` in the detail field.
    pub fn field(&self, key: &str) -> Option<&str> {
        self.detail
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    fn num<T: FromStr>(&self, key: &str) -> Option<T> {
        self.field(key).and_then(|v| v.parse().ok())
    }
}

pub trait TraceSink {
    fn record(&mut self, time: f64, kind: EventKind, detail: &str) -> io::Result<()>;
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, time: f64, kind: EventKind, detail: &str) -> io::Result<()> {
        self.push(TraceRecord {
            time,
            kind,
            detail: detail.to_string(),
        });
        Ok(())
    }
}

/// Writes the documented CSV trace format.
pub struct CsvTraceWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "time,event_kind,detail")?;
        Ok(CsvTraceWriter { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TraceSink for CsvTraceWriter<W> {
    fn record(&mut self, time: f64, kind: EventKind, detail: &str) -> io::Result<()> {
        writeln!(self.out, "{time},{kind},{detail}")
    }
}

pub fn parse_trace<R: BufRead>(input: R) -> io::Result<Vec<TraceRecord>> {
    let invalid = |line: usize, msg: String| io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"));
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 || line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (t, k, d) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(k), Some(d)) => (t, k, d),
            _ => return Err(invalid(i + 1, "expected 3 columns".into())),
        };
        out.push(TraceRecord {
            time: t.parse().map_err(|e| invalid(i + 1, format!("{e}")))?,
            kind: k.parse().map_err(|e| invalid(i + 1, e))?,
            detail: d.to_string(),
        });
    }
    Ok(out)
}

/// Result of [`audit`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceAudit {
    /// ACKs at which more than one later sample had already been taken.
    pub extra_early_samples: usize,
    /// Uncorrupted deliveries whose age drop is inconsistent with a sawtooth.
    pub sawtooth_violations: usize,
    /// ACKs not strictly later than the previous ACK.
    pub ack_order_violations: usize,
    /// Records whose detail field is missing or malformed.
    pub malformed: usize,
    /// Age integral over `[0, horizon]`.
    pub integral: f64,
    /// The same integral with every corrupted delivery removed from the trace.
    pub integral_without_corrupted: f64,
    pub deliveries: usize,
    pub acks: usize,
}

impl TraceAudit {
    pub fn clean(&self) -> bool {
        self.extra_early_samples == 0
            && self.sawtooth_violations == 0
            && self.ack_order_violations == 0
            && self.malformed == 0
    }
}

/// Age integral of the receiver over `[0, horizon]`, replayed from the
/// uncorrupted deliveries in `records`. Age starts at 0 at time 0.
fn replay_integral<'a, I: Iterator<Item = &'a TraceRecord>>(records: I, horizon: f64) -> f64 {
    let mut fresh = 0.0_f64;
    let mut last = 0.0_f64;
    let mut area = 0.0_f64;
    for r in records {
        if r.time > horizon {
            break;
        }
        if r.kind != EventKind::Deliver || r.field("corrupted") != Some("0") {
            continue;
        }
        let Some(gen) = r.num::<f64>("gen") else { continue };
        area += 0.5 * ((last - fresh) + (r.time - fresh)) * (r.time - last);
        last = r.time;
        if gen > fresh {
            fresh = gen;
        }
    }
    area + 0.5 * ((last - fresh) + (horizon - fresh)) * (horizon - last)
}

/// Checks a trace for the structural invariants of the delayed-ACK model.
///
/// `single_early` enables the at-most-one-sample-before-ACK check, which
/// applies to early sampling and wait-for-ACK but not to periodic sampling.
pub fn audit(records: &[TraceRecord], horizon: f64, single_early: bool) -> TraceAudit {
    let mut a = TraceAudit::default();
    let mut sample_time: HashMap<u64, f64> = HashMap::new();
    let mut max_sample_id: Option<u64> = None;
    let mut count_after: u64 = 0;
    let mut last_ack = f64::NEG_INFINITY;
    let mut fresh = 0.0_f64;

    for r in records {
        match r.kind {
            EventKind::Sample => match r.num::<u64>("id") {
                Some(id) => {
                    sample_time.insert(id, r.time);
                    max_sample_id = Some(max_sample_id.map_or(id, |m| m.max(id)));
                    count_after += 1;
                }
                None => a.malformed += 1,
            },
            EventKind::Ack => {
                a.acks += 1;
                if r.time <= last_ack {
                    a.ack_order_violations += 1;
                }
                last_ack = r.time;
                match (r.num::<u64>("id"), max_sample_id) {
                    (Some(id), Some(max)) => {
                        // samples taken after the acknowledged one; ids are sequential
                        count_after = max.saturating_sub(id);
                        if single_early && count_after > 1 {
                            a.extra_early_samples += 1;
                        }
                    }
                    _ => a.malformed += 1,
                }
            }
            EventKind::Deliver => {
                let (Some(id), Some(gen), Some(start), Some(c)) = (
                    r.num::<u64>("id"),
                    r.num::<f64>("gen"),
                    r.num::<f64>("start"),
                    r.field("corrupted"),
                ) else {
                    a.malformed += 1;
                    continue;
                };
                if c == "1" {
                    continue;
                }
                a.deliveries += 1;
                let sampled_at = sample_time.get(&id).copied();
                let age_before = r.time - fresh;
                let age_after = r.time - gen;
                let ok = sampled_at == Some(gen)
                    && start == gen
                    && gen >= fresh
                    && age_after > 0.0
                    && age_after <= age_before;
                if !ok {
                    a.sawtooth_violations += 1;
                }
                fresh = fresh.max(gen);
            }
            _ => {}
        }
    }
    let _ = count_after;
    a.integral = replay_integral(records.iter(), horizon);
    a.integral_without_corrupted = replay_integral(
        records
            .iter()
            .filter(|r| !(r.kind == EventKind::Deliver && r.field("corrupted") == Some("1"))),
        horizon,
    );
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut w = CsvTraceWriter::new(Vec::new()).unwrap();
        w.record(0.1 + 0.2, EventKind::Deliver, "id=3;gen=0.1;start=0.1;corrupted=0").unwrap();
        w.record(12.0, EventKind::Ack, "id=3;delivered=0.30000000000000004").unwrap();
        let bytes = w.into_inner();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("time,event_kind,detail\n0.30000000000000004,DELIVER,id=3;"));
        let recs = parse_trace(&bytes[..]).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].time, 0.1 + 0.2);
        assert_eq!(recs[1].kind, EventKind::Ack);
        assert_eq!(recs[1].field("delivered"), Some("0.30000000000000004"));
    }

    #[test]
    fn rejects_unknown_kind() {
        let input = "time,event_kind,detail\n1,BOGUS,x\n";
        assert!(parse_trace(input.as_bytes()).is_err());
    }

    fn rec(time: f64, kind: EventKind, detail: &str) -> TraceRecord {
        TraceRecord { time, kind, detail: detail.into() }
    }

    #[test]
    fn audit_flags_two_early_samples() {
        let recs = vec![
            rec(0.0, EventKind::Sample, "id=0"),
            rec(1.0, EventKind::Sample, "id=1"),
            rec(2.0, EventKind::Sample, "id=2"),
            rec(3.0, EventKind::Deliver, "id=0;gen=0;start=0;corrupted=0"),
            rec(4.0, EventKind::Ack, "id=0;delivered=3"),
        ];
        let a = audit(&recs, 4.0, true);
        assert_eq!(a.extra_early_samples, 1);
        assert_eq!(audit(&recs, 4.0, false).extra_early_samples, 0);
    }

    #[test]
    fn audit_sawtooth_integral() {
        let recs = vec![
            rec(0.0, EventKind::Sample, "id=0"),
            rec(2.0, EventKind::Deliver, "id=0;gen=0;start=0;corrupted=0"),
            rec(3.0, EventKind::Sample, "id=1"),
            rec(5.0, EventKind::Deliver, "id=1;gen=3;start=3;corrupted=0"),
        ];
        let a = audit(&recs, 6.0, true);
        assert!(a.clean(), "{a:?}");
        // 0..2: age t (area 2); 2..5: age t (area 10.5); 5..6: age 2..3 (area 2.5)
        assert!((a.integral - 15.0).abs() < 1e-12);
    }

    #[test]
    fn audit_flags_late_start() {
        let recs = vec![
            rec(0.0, EventKind::Sample, "id=0"),
            rec(2.0, EventKind::Deliver, "id=0;gen=0;start=0.5;corrupted=0"),
            rec(3.0, EventKind::Ack, "id=0;delivered=2"),
            rec(2.5, EventKind::Ack, "id=0;delivered=2"),
        ];
        let a = audit(&recs, 3.0, true);
        assert_eq!(a.sawtooth_violations, 1);
        assert_eq!(a.ack_order_violations, 1);
    }
}
