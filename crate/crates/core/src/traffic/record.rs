//! Line-oriented text form of a [`Scenario`]. See `docs/FORMATS.md`.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{Activation, Replica, Scenario};
use crate::channel::LinkBudget;
use crate::config::FrameConfig;
use crate::error::{Error, Result};

const MAGIC: &str = "gfra-scenario 1";
const KIND: &str = "scenario";

pub fn dump_scenario(s: &Scenario) -> String {
    let f = s.frame();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(
        out,
        "frame {} {} {} {} {} {} {} {} {}",
        f.l_pre, f.l_code, f.l_tail, f.k, f.iota_max, f.n_slot, f.n_rep, f.t_sf, f.i_max
    );
    let _ = writeln!(out, "activations {}", s.activations().len());
    for a in s.activations() {
        let b = &a.budget;
        let _ = writeln!(
            out,
            "a {} {} {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
            a.tau, a.iota, b.d, b.gamma, b.p_rx, b.mu.re, b.mu.im, b.sigma2, b.k
        );
        let bits: String = a.payload.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect();
        let _ = writeln!(out, "p {bits}");
        for r in &a.replicas {
            let _ = write!(out, "r {} {} {}", r.slot, r.offset, r.channel.len());
            for h in &r.channel {
                let _ = write!(out, " {:?} {:?}", h.re, h.im);
            }
            out.push('\n');
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tagged(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        loop {
            let Some((i, raw)) = self.inner.next() else {
                return Err(Error::format(
                    KIND,
                    format!("expected `{tag}` record, found end of input"),
                ));
            };
            self.line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let mut parts = l.split_whitespace();
            if parts.next() != Some(tag) {
                return Err(self.err(format!("expected `{tag}` record")));
            }
            return Ok(parts.collect());
        }
    }

    fn err(&self, reason: impl std::fmt::Display) -> Error {
        Error::format(KIND, format!("line {}: {reason}", self.line))
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        s.parse().map_err(|e| self.err(format!("`{s}`: {e}")))
    }

    fn fields<T: std::str::FromStr>(&self, parts: &[&str], n: usize) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        if parts.len() != n {
            return Err(self.err(format!("expected {n} fields, found {}", parts.len())));
        }
        parts.iter().map(|p| self.parse(p)).collect()
    }
}

/// Parses [`dump_scenario`] output and re-checks every placement invariant.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = lines.next_tagged("gfra-scenario")?;
    if header != ["1"] {
        return Err(lines.err("unsupported version"));
    }
    let parts = lines.next_tagged("frame")?;
    let fr: Vec<usize> = lines.fields(&parts, 9)?;
    let frame = FrameConfig {
        l_pre: fr[0],
        l_code: fr[1],
        l_tail: fr[2],
        k: fr[3],
        iota_max: fr[4],
        n_slot: fr[5],
        n_rep: fr[6],
        t_sf: fr[7],
        i_max: fr[8],
    };
    let parts = lines.next_tagged("activations")?;
    let count: usize = lines.fields::<usize>(&parts, 1)?[0];
    let mut activations = Vec::with_capacity(count);
    for _ in 0..count {
        let parts = lines.next_tagged("a")?;
        if parts.len() != 9 {
            return Err(lines.err("activation record needs 9 fields"));
        }
        let tau: usize = lines.parse(parts[0])?;
        let iota: usize = lines.parse(parts[1])?;
        let v: Vec<f64> = lines.fields(&parts[2..], 7)?;
        let budget = LinkBudget {
            d: v[0],
            gamma: v[1],
            p_rx: v[2],
            mu: Complex64::new(v[3], v[4]),
            sigma2: v[5],
            k: v[6],
        };
        let bits = lines.next_tagged("p")?;
        let payload = match bits[..] {
            [s] => s
                .bytes()
                .map(|c| match c {
                    b'0' => Ok(0),
                    b'1' => Ok(1),
                    _ => Err(lines.err("payload must be a 0/1 string")),
                })
                .collect::<Result<Vec<u8>>>()?,
            [] => Vec::new(),
            _ => return Err(lines.err("payload must be a single token")),
        };
        let mut replicas = Vec::with_capacity(frame.n_rep);
        for _ in 0..frame.n_rep {
            let parts = lines.next_tagged("r")?;
            if parts.len() < 3 {
                return Err(lines.err("replica record too short"));
            }
            let slot: usize = lines.parse(parts[0])?;
            let offset: usize = lines.parse(parts[1])?;
            let antennas: usize = lines.parse(parts[2])?;
            let h: Vec<f64> = lines.fields(&parts[3..], 2 * antennas)?;
            replicas.push(Replica {
                slot,
                offset,
                channel: h.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect(),
            });
        }
        activations.push(Activation {
            tau,
            iota,
            payload,
            replicas,
            budget,
        });
    }
    Scenario::new(frame, activations)
}
