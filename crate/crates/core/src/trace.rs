//! Flip-only observation traces: storage, temporal queries, serialization.
//!
//! A [`FlipTrace`] is the only thing learners see — the initial configuration
//! plus the times at which spins actually changed. The configuration at any
//! time is a pure function of the trace (parity of flip counts); spin values
//! are never stored per event.
//!
//! All flip counting uses the half-open convention (t1, t2].

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spins::SpinConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlipEvent {
    pub time: f64,
    pub site: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlipTrace {
    n: usize,
    horizon: f64,
    initial: SpinConfig,
    events: Vec<FlipEvent>,
    per_site: Vec<Vec<f64>>,
}

impl FlipTrace {
    pub fn new(
        n: usize,
        horizon: f64,
        initial: SpinConfig,
        events: Vec<FlipEvent>,
    ) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::NonpositiveHorizon(horizon));
        }
        if initial.n() != n {
            return Err(Error::InvalidConfig(format!(
                "initial configuration has {} sites, expected {n}",
                initial.n()
            )));
        }
        let mut per_site = vec![Vec::new(); n];
        let mut last = 0.0f64;
        for (k, e) in events.iter().enumerate() {
            if !(e.time > 0.0 && e.time <= horizon) {
                return Err(Error::TimeOutOfRange {
                    t: e.time,
                    horizon,
                });
            }
            if k > 0 && e.time <= last {
                return Err(Error::InvalidConfig(format!(
                    "events not strictly increasing at index {k} (t = {})",
                    e.time
                )));
            }
            last = e.time;
            let site = e.site as usize;
            if site >= n {
                return Err(Error::IndexOutOfRange { index: site, n });
            }
            per_site[site].push(e.time);
        }
        Ok(FlipTrace {
            n,
            horizon,
            initial,
            events,
            per_site,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial(&self) -> &SpinConfig {
        &self.initial
    }

    pub fn events(&self) -> &[FlipEvent] {
        &self.events
    }

    /// Sorted flip times of one site.
    pub fn site_events(&self, i: usize) -> &[f64] {
        &self.per_site[i]
    }

    /// Number of flips of `site` in (t1, t2].
    pub fn flip_count(&self, site: usize, t1: f64, t2: f64) -> Result<usize> {
        if site >= self.n {
            return Err(Error::IndexOutOfRange {
                index: site,
                n: self.n,
            });
        }
        if !(0.0 <= t1 && t1 <= t2 && t2 <= self.horizon) {
            return Err(Error::InvalidInterval { t1, t2 });
        }
        let times = &self.per_site[site];
        Ok(times.partition_point(|&t| t <= t2) - times.partition_point(|&t| t <= t1))
    }

    /// Spin of `i` at time `t` (right-continuous: a flip at exactly `t` has
    /// already been applied). No bounds check; internal hot path.
    #[inline]
    pub(crate) fn spin_at_unchecked(&self, i: usize, t: f64) -> i8 {
        let flips = self.per_site[i].partition_point(|&s| s <= t);
        if flips % 2 == 0 {
            self.initial.spin(i)
        } else {
            -self.initial.spin(i)
        }
    }

    /// Right-continuous configuration at time `t`.
    pub fn config_at(&self, t: f64) -> Result<SpinConfig> {
        if !(0.0 <= t && t <= self.horizon) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let mut c = self.initial.clone();
        for i in 0..self.n {
            if self.spin_at_unchecked(i, t) != self.initial.spin(i) {
                c.flip(i);
            }
        }
        Ok(c)
    }

    /// Occupation fractions of the pair (i,j) over [0, T], ordered
    /// (++, +-, -+, --). Exact piecewise integration over the merged flip
    /// times of the two sites; the entries sum to 1.
    pub fn occupation_time(&self, i: usize, j: usize, t_end: f64) -> Result<[f64; 4]> {
        self.occupation_time_window(i, j, 0.0, t_end)
    }

    /// Occupation fractions over the window (t0, t1].
    pub fn occupation_time_window(
        &self,
        i: usize,
        j: usize,
        t0: f64,
        t1: f64,
    ) -> Result<[f64; 4]> {
        if i >= self.n || j >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                n: self.n,
            });
        }
        if !(0.0 <= t0 && t0 < t1 && t1 <= self.horizon) {
            return Err(Error::InvalidInterval { t1: t0, t2: t1 });
        }
        let mut acc = [0.0f64; 4];
        let mut si = self.spin_at_unchecked(i, t0);
        let mut sj = self.spin_at_unchecked(j, t0);
        let ti = &self.per_site[i];
        let tj = &self.per_site[j];
        let mut ki = ti.partition_point(|&t| t <= t0);
        let mut kj = tj.partition_point(|&t| t <= t0);
        let mut t = t0;
        loop {
            let next_i = ti.get(ki).copied().unwrap_or(f64::INFINITY);
            let next_j = tj.get(kj).copied().unwrap_or(f64::INFINITY);
            let next = next_i.min(next_j).min(t1);
            let idx = (usize::from(si < 0)) * 2 + usize::from(sj < 0);
            acc[idx] += next - t;
            if next >= t1 {
                break;
            }
            // i and j are distinct sites of a strictly ordered event stream,
            // but guard equality anyway so both advance.
            if next_i <= next {
                si = -si;
                ki += 1;
            }
            if next_j <= next {
                sj = -sj;
                kj += 1;
            }
            t = next;
        }
        let span = t1 - t0;
        for v in &mut acc {
            *v /= span;
        }
        Ok(acc)
    }
}

// --- serialization ---------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    n: usize,
    horizon: f64,
    initial: Vec<i8>,
}

#[derive(Serialize, Deserialize)]
struct JsonlEvent {
    t: f64,
    s: u32,
}

const BINARY_MAGIC: &[u8; 4] = b"FLT1";

impl FlipTrace {
    /// JSON Lines: header {n, horizon, initial} then {"t":..,"s":..} per
    /// event. Times round-trip exactly via shortest-decimal serialization.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(
            &mut w,
            &JsonlHeader {
                n: self.n,
                horizon: self.horizon,
                initial: self.initial.to_spins(),
            },
        )?;
        w.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut w, &JsonlEvent { t: e.time, s: e.site })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header_line = lines.next().ok_or_else(|| Error::Parse {
            at: "line 1".into(),
            msg: "empty trace file".into(),
        })??;
        let header: JsonlHeader =
            serde_json::from_str(&header_line).map_err(|e| Error::Parse {
                at: "line 1".into(),
                msg: e.to_string(),
            })?;
        let mut events = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: JsonlEvent = serde_json::from_str(&line).map_err(|e| Error::Parse {
                at: format!("line {}", k + 2),
                msg: e.to_string(),
            })?;
            events.push(FlipEvent {
                time: ev.t,
                site: ev.s,
            });
        }
        FlipTrace::new(
            header.n,
            header.horizon,
            SpinConfig::from_spins(&header.initial)?,
            events,
        )
    }

    /// Binary format: magic "FLT1", little-endian u32 n, f64 horizon,
    /// ceil(n/8) packed spin bytes (bit set = +1), u64 event count, then
    /// (f64 time, u32 site) records.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.initial.to_packed_bytes())?;
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        for e in &self.events {
            w.write_all(&e.time.to_le_bytes())?;
            w.write_all(&e.site.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], at: &str) -> Result<()> {
            r.read_exact(buf).map_err(|e| Error::Parse {
                at: at.to_string(),
                msg: e.to_string(),
            })
        }
        let mut magic = [0u8; 4];
        read_exact_at(&mut r, &mut magic, "magic")?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Parse {
                at: "magic".into(),
                msg: format!("bad magic bytes {magic:?}"),
            });
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        read_exact_at(&mut r, &mut b4, "n")?;
        let n = u32::from_le_bytes(b4) as usize;
        read_exact_at(&mut r, &mut b8, "horizon")?;
        let horizon = f64::from_le_bytes(b8);
        let mut packed = vec![0u8; n.div_ceil(8)];
        read_exact_at(&mut r, &mut packed, "initial configuration")?;
        let initial = SpinConfig::from_packed_bytes(n, &packed)?;
        read_exact_at(&mut r, &mut b8, "event count")?;
        let count = u64::from_le_bytes(b8);
        let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
        for k in 0..count {
            read_exact_at(&mut r, &mut b8, &format!("event {k} time"))?;
            let time = f64::from_le_bytes(b8);
            read_exact_at(&mut r, &mut b4, &format!("event {k} site"))?;
            events.push(FlipEvent {
                time,
                site: u32::from_le_bytes(b4),
            });
        }
        FlipTrace::new(n, horizon, initial, events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trace(n: usize, horizon: f64, initial: &[i8], events: &[(f64, u32)]) -> FlipTrace {
        FlipTrace::new(
            n,
            horizon,
            SpinConfig::from_spins(initial).unwrap(),
            events
                .iter()
                .map(|&(time, site)| FlipEvent { time, site })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn config_at_examples() {
        let empty = trace(2, 1.0, &[1, -1], &[]);
        assert_eq!(empty.config_at(0.7).unwrap().to_spins(), vec![1, -1]);

        let one = trace(1, 1.0, &[1], &[(0.5, 0)]);
        assert_eq!(one.config_at(0.4).unwrap().spin(0), 1);
        // right-continuity: event at exactly t already applied
        assert_eq!(one.config_at(0.5).unwrap().spin(0), -1);

        let two = trace(1, 1.0, &[1], &[(0.3, 0), (0.6, 0)]);
        assert_eq!(two.config_at(1.0).unwrap().spin(0), 1);
    }

    #[test]
    fn flip_count_examples() {
        let empty = trace(1, 1.0, &[1], &[]);
        assert_eq!(empty.flip_count(0, 0.0, 1.0).unwrap(), 0);

        let t = trace(1, 1.0, &[1], &[(0.1, 0), (0.2, 0), (0.9, 0)]);
        assert_eq!(t.flip_count(0, 0.0, 0.5).unwrap(), 2);
        assert_eq!(t.flip_count(0, 0.2, 0.2).unwrap(), 0);
        // half-open (t1, t2]: left endpoint excluded, right included
        assert_eq!(t.flip_count(0, 0.1, 0.2).unwrap(), 1);
        assert_eq!(t.flip_count(0, 0.0, t.horizon()).unwrap(), 3);
    }

    #[test]
    fn occupation_time_examples() {
        let idle = trace(2, 4.0, &[1, 1], &[]);
        assert_eq!(
            idle.occupation_time(0, 1, 4.0).unwrap(),
            [1.0, 0.0, 0.0, 0.0]
        );

        let one = trace(2, 4.0, &[1, 1], &[(2.0, 0)]);
        let p = one.occupation_time(0, 1, 4.0).unwrap();
        assert_abs_diff_eq!(p[0], 0.5);
        assert_abs_diff_eq!(p[2], 0.5);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[3], 0.0);

        let busy = trace(2, 2.0, &[1, -1], &[(0.5, 1), (1.0, 0), (1.5, 1)]);
        let q = busy.occupation_time(0, 1, 2.0).unwrap();
        assert_abs_diff_eq!(q.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[1], 0.25); // (+,-) on [0,0.5)
        assert_abs_diff_eq!(q[0], 0.25); // (+,+) on [0.5,1.0)
        assert_abs_diff_eq!(q[2], 0.25); // (-,+) on [1.0,1.5)
        assert_abs_diff_eq!(q[3], 0.25); // (-,-) on [1.5,2.0)
    }

    #[test]
    fn rejects_unsorted_or_out_of_range_events() {
        let initial = SpinConfig::all_plus(2);
        assert!(FlipTrace::new(
            2,
            1.0,
            initial.clone(),
            vec![
                FlipEvent { time: 0.5, site: 0 },
                FlipEvent { time: 0.5, site: 1 }
            ]
        )
        .is_err());
        assert!(FlipTrace::new(
            2,
            1.0,
            initial,
            vec![FlipEvent { time: 1.5, site: 0 }]
        )
        .is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let t = trace(
            3,
            2.5,
            &[1, -1, 1],
            &[(0.1 + 0.2, 2), (1.0 / 3.0 + 0.5, 0), (2.4999999999, 1)],
        );
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let back = FlipTrace::read_jsonl(&buf[..]).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn binary_round_trip_and_truncation() {
        let t = trace(10, 3.0, &[1, -1, 1, 1, -1, -1, 1, -1, 1, 1], &[(0.25, 7), (1.125, 0)]);
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(FlipTrace::read_binary(&buf[..]).unwrap(), t);

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(
            FlipTrace::read_binary(truncated),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn empty_trace_round_trips_both_formats() {
        let t = trace(2, 1.0, &[-1, 1], &[]);
        let mut jl = Vec::new();
        t.write_jsonl(&mut jl).unwrap();
        assert_eq!(FlipTrace::read_jsonl(&jl[..]).unwrap(), t);
        let mut bin = Vec::new();
        t.write_binary(&mut bin).unwrap();
        assert_eq!(FlipTrace::read_binary(&bin[..]).unwrap(), t);
    }
}
