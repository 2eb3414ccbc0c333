//! Event logs and their CSV form.
//!
//! ```text
//! time,component,mark_1,...,mark_d'
//! 0.417022004703,2,0.21,0.33,0.46
//! ```
//!
//! Components are 1-based on disk and 0-based in memory. Numbers are written
//! as plain decimals with the shortest representation that parses back to
//! the same `f64`, right-padded with zeros to at least 12 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::marks::check_simplex;

const MIN_SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    /// 0-based component index.
    pub component: usize,
    pub mark: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    horizon: f64,
    dim: usize,
    mark_dim: usize,
    events: Vec<Event>,
}

impl EventLog {
    pub fn new(horizon: f64, dim: usize, mark_dim: usize, events: Vec<Event>) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::EventLog(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        if dim == 0 {
            return Err(Error::EventLog("dimension must be positive".into()));
        }
        let mut prev = 0.0;
        for (n, ev) in events.iter().enumerate() {
            if !(ev.time > prev && ev.time <= horizon) {
                return Err(Error::EventLog(format!(
                    "event #{} at t = {} is not strictly increasing within (0, {horizon}]",
                    n + 1,
                    ev.time
                )));
            }
            if ev.component >= dim {
                return Err(Error::ComponentOutOfRange { component: ev.component, dim });
            }
            match (&ev.mark, mark_dim) {
                (None, 0) => {}
                (Some(x), m) if m > 0 => check_simplex(x, m)?,
                (x, m) => {
                    return Err(Error::MarkDimension { expected: m, got: x.as_ref().map_or(0, Vec::len) })
                }
            }
            prev = ev.time;
        }
        Ok(Self { horizon, dim, mark_dim, events })
    }

    pub fn empty(horizon: f64, dim: usize, mark_dim: usize) -> Result<Self> {
        Self::new(horizon, dim, mark_dim, Vec::new())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `N^i_T` for each component.
    pub fn counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for ev in &self.events {
            out[ev.component] += 1;
        }
        out
    }

    /// Events in `(0, s]` as a log over the horizon `s`.
    pub fn truncate(&self, s: f64) -> Result<Self> {
        let events = self.events.iter().filter(|e| e.time <= s).cloned().collect();
        Self::new(s, self.dim, self.mark_dim, events)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("time,component");
        for l in 1..=self.mark_dim {
            header.push_str(&format!(",mark_{l}"));
        }
        writeln!(out, "{header}")?;
        for ev in &self.events {
            let mut line = format!("{},{}", format_decimal(ev.time), ev.component + 1);
            if let Some(x) = &ev.mark {
                for v in x {
                    line.push(',');
                    line.push_str(&format_decimal(*v));
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parse a CSV log. The horizon is not stored in the file and must be
    /// supplied; the mark dimension is read from the header.
    pub fn read_csv<R: BufRead>(input: R, horizon: f64, dim: usize) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::EventLog("missing header".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols[0] != "time" || cols[1] != "component" {
            return Err(Error::EventLog(format!("unexpected header {header:?}")));
        }
        let mark_dim = cols.len() - 2;
        for (l, c) in cols[2..].iter().enumerate() {
            if *c != format!("mark_{}", l + 1) {
                return Err(Error::EventLog(format!("unexpected column {c:?}")));
            }
        }
        let mut events = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::EventLog(format!("row {} has {} fields", n + 2, fields.len())));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|_| Error::EventLog(format!("row {}: bad number {s:?}", n + 2)))
            };
            let time = parse(fields[0])?;
            let component: usize = fields[1]
                .trim()
                .parse()
                .map_err(|_| Error::EventLog(format!("row {}: bad component {:?}", n + 2, fields[1])))?;
            if component == 0 {
                return Err(Error::EventLog(format!("row {}: components are 1-based", n + 2)));
            }
            let mark = if mark_dim > 0 {
                Some(fields[2..].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?)
            } else {
                None
            };
            events.push(Event { time, component: component - 1, mark });
        }
        Self::new(horizon, dim, mark_dim, events)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, horizon: f64, dim: usize) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?), horizon, dim)
    }
}

/// Shortest round-trip decimal, zero-padded to at least 12 significant digits.
pub fn format_decimal(v: f64) -> String {
    let mut s = format!("{v}");
    if !v.is_finite() {
        return s;
    }
    let digits: String = s.chars().filter(char::is_ascii_digit).collect();
    let significant = match digits.trim_start_matches('0').len() {
        0 => 1,
        n => n,
    };
    if significant < MIN_SIGNIFICANT_DIGITS {
        if !s.contains('.') {
            s.push('.');
        }
        s.extend(std::iter::repeat_n('0', MIN_SIGNIFICANT_DIGITS - significant));
    }
    s
}
