use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::autodiff::{NodeRef, Tape};
use crate::error::{invalid, Error, Result};
use crate::tensor::{numel, Tensor};

const MAGIC: &str = "wgangp-params v1";

/// Named, insertion-ordered trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(invalid(format!("duplicate parameter `{name}`")));
        }
        self.entries.push((name, value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Every entry of every tensor in order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().flat_map(|(_, t)| t.data().iter().copied())
    }

    pub fn filter(&self, keep: impl Fn(&str) -> bool) -> ParamSet {
        ParamSet { entries: self.entries.iter().filter(|(n, _)| keep(n)).cloned().collect() }
    }

    /// Weight matrices and kernels only (names ending in `.w`).
    pub fn weights_only(&self) -> ParamSet {
        self.filter(|n| n.ends_with(".w"))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values().collect()
    }

    /// A copy with entries replaced from a flat vector in [`ParamSet::flatten`] order.
    pub fn with_flat(&self, flat: &[f64]) -> Result<ParamSet> {
        if flat.len() != self.num_scalars() {
            return Err(invalid(format!("{} values for {} parameters", flat.len(), self.num_scalars())));
        }
        let mut out = self.clone();
        let mut off = 0;
        for (_, t) in out.entries.iter_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(out)
    }

    /// Binds every tensor as a named leaf of `tape`.
    pub fn bind(&self, tape: &mut Tape) -> ParamNodes {
        ParamNodes { entries: self.entries.iter().map(|(n, t)| (n.clone(), tape.leaf(n.clone(), t.clone()))).collect() }
    }

    /// Binds every tensor as an unnamed constant.
    pub fn bind_constant(&self, tape: &mut Tape) -> ParamNodes {
        ParamNodes { entries: self.entries.iter().map(|(n, t)| (n.clone(), tape.constant(t.clone()))).collect() }
    }

    /// Views slices of a flat vector node as this set's parameters, so a
    /// function of all parameters becomes a function of one tensor.
    pub fn bind_flat(&self, tape: &mut Tape, flat: NodeRef) -> Result<ParamNodes> {
        if tape.shape(flat) != [self.num_scalars()] {
            return Err(Error::ShapeMismatch {
                op: "bind_flat",
                detail: format!("flat node {:?} for {} scalars", tape.shape(flat), self.num_scalars()),
            });
        }
        let mut entries = Vec::with_capacity(self.entries.len());
        let mut off = 0;
        for (n, t) in &self.entries {
            let s = tape.slice(flat, 0, off, t.len())?;
            entries.push((n.clone(), tape.reshape(s, t.shape())?));
            off += t.len();
        }
        Ok(ParamNodes { entries })
    }

    /// Text container: `#` comment lines, a magic line, then per tensor a
    /// `param <name> <rank> <dims...>` line and a line of IEEE-754 bit
    /// patterns in hex. Round-trips bit-exactly.
    pub fn to_text(&self, header: &str) -> String {
        let mut s = String::new();
        for line in header.lines() {
            let _ = writeln!(s, "# {line}");
        }
        let _ = writeln!(s, "{MAGIC}");
        for (name, t) in &self.entries {
            let _ = write!(s, "param {} {}", name, t.rank());
            for d in t.shape() {
                let _ = write!(s, " {d}");
            }
            s.push('\n');
            let mut first = true;
            for v in t.data() {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{:016x}", v.to_bits());
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<ParamSet> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            Some((n, _)) => return Err(perr(n, "missing parameter file header")),
            None => return Err(perr(0, "empty parameter file")),
        }
        let mut out = ParamSet::new();
        while let Some((n, line)) = lines.next() {
            let mut parts = line.split_whitespace();
            if parts.next() != Some("param") {
                return Err(perr(n, "expected `param`"));
            }
            let name = parts.next().ok_or_else(|| perr(n, "missing name"))?;
            let rank: usize = parts.next().and_then(|r| r.parse().ok()).ok_or_else(|| perr(n, "bad rank"))?;
            let shape: Vec<usize> =
                parts.map(|d| d.parse().map_err(|_| perr(n, "bad extent"))).collect::<Result<_>>()?;
            if shape.len() != rank {
                return Err(perr(n, "rank does not match extents"));
            }
            let count = numel(&shape);
            let data: Vec<f64> = match if count == 0 { None } else { lines.next() } {
                Some((dn, dl)) => dl
                    .split_whitespace()
                    .map(|h| u64::from_str_radix(h, 16).map(f64::from_bits).map_err(|_| perr(dn, "bad value")))
                    .collect::<Result<_>>()?,
                None if count == 0 => Vec::new(),
                None => return Err(perr(n, "missing values")),
            };
            if data.len() != count {
                return Err(perr(n, "value count does not match shape"));
            }
            out.insert(name, Tensor::new(shape, data)?).map_err(|_| perr(n, "duplicate parameter"))?;
        }
        Ok(out)
    }
}

/// Tape nodes standing in for a [`ParamSet`].
#[derive(Clone, Debug, Default)]
pub struct ParamNodes {
    entries: Vec<(String, NodeRef)>,
}

impl ParamNodes {
    pub fn get(&self, name: &str) -> Result<NodeRef> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| *r)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn nodes(&self) -> Vec<NodeRef> {
        self.entries.iter().map(|(_, r)| *r).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
