//! Plain-text hierarchy snapshots.
//!
//! ```text
//! raddiff-snapshot 1
//! time 1.25e-2
//! domain 0 0 0 1 1 1
//! fields E T
//! levels 2
//! level 0 ratio 1 spacing 6.25e-2 6.25e-2 6.25e-2 patches 1
//! patch 0 0 0 15 15 15
//! E <n values, x fastest>
//! T <n values, x fastest>
//! level 1 ratio 2 spacing ...
//! ...
//! ```
//!
//! Boxes are inclusive cell-index bounds in the level's own index space.
//! Values are written in shortest round-trip form, so reading a snapshot back
//! reproduces the fields bitwise. Covered cells are included; a reader that
//! only wants the composite solution should skip cells overlaid by a finer
//! level.

use std::io::{BufRead, Write};

use super::hierarchy::{Domain, PatchHierarchy};
use super::index_box::IndexBox;
use crate::error::{Error, Result};

const MAGIC: &str = "raddiff-snapshot 1";

/// A snapshot read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub domain: Domain,
    pub field_names: Vec<String>,
    /// Patch boxes per level.
    pub level_boxes: Vec<Vec<IndexBox>>,
    /// Per field, the flat composite array in hierarchy order.
    pub fields: Vec<Vec<f64>>,
}

impl Snapshot {
    /// Rebuilds the hierarchy the snapshot was written from.
    pub fn hierarchy(&self) -> Result<PatchHierarchy> {
        let base = self.level_boxes[0]
            .iter()
            .fold(IndexBox::new([0; 3], [0; 3]), |acc, b| IndexBox {
                lo: [0; 3],
                hi: [
                    acc.hi[0].max(b.hi[0]),
                    acc.hi[1].max(b.hi[1]),
                    acc.hi[2].max(b.hi[2]),
                ],
            })
            .extent();
        PatchHierarchy::from_level_boxes(self.domain, base, self.level_boxes.clone())
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.field_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.fields[i].as_slice())
    }
}

fn join<T: std::fmt::Display>(values: impl IntoIterator<Item = T>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes the hierarchy and named flat fields to `w`.
pub fn write_snapshot<W: Write>(
    mut w: W,
    h: &PatchHierarchy,
    time: f64,
    fields: &[(&str, &[f64])],
) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "time {time:e}")?;
    writeln!(w, "domain {} {}", join(h.domain.lo), join(h.domain.hi))?;
    writeln!(w, "fields {}", join(fields.iter().map(|(n, _)| n)))?;
    writeln!(w, "levels {}", h.nlevels())?;
    for (l, level) in h.levels().iter().enumerate() {
        writeln!(
            w,
            "level {l} ratio {} spacing {:e} {:e} {:e} patches {}",
            level.ratio_to_coarser,
            level.spacing[0],
            level.spacing[1],
            level.spacing[2],
            level.patches.len()
        )?;
        for p in &level.patches {
            writeln!(w, "patch {} {}", join(p.bx.lo), join(p.bx.hi))?;
            let range = p.offset..p.offset + p.ncells();
            for (name, data) in fields {
                write!(w, "{name}")?;
                for v in &data[range.clone()] {
                    write!(w, " {v:e}")?;
                }
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Snapshot {
            line: self.line,
            msg: msg.into(),
        }
    }

    /// Reads a line starting with `key` and returns the remaining tokens.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let l = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(it.map(str::to_owned).collect())
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.err(format!("cannot parse `{s}`")))
    }

    fn parse_all<T: std::str::FromStr>(&self, toks: &[String], n: usize) -> Result<Vec<T>> {
        if toks.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", toks.len())));
        }
        toks.iter().map(|t| self.parse(t)).collect()
    }
}

/// Parses a snapshot written by [`write_snapshot`].
pub fn read_snapshot<R: BufRead>(r: R) -> Result<Snapshot> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    if lines.next()?.trim() != MAGIC {
        return Err(lines.err("missing snapshot header"));
    }
    let t = lines.keyed("time")?;
    let time: f64 = lines.parse_all(&t, 1)?[0];
    let d: Vec<f64> = {
        let toks = lines.keyed("domain")?;
        lines.parse_all(&toks, 6)?
    };
    let domain = Domain {
        lo: [d[0], d[1], d[2]],
        hi: [d[3], d[4], d[5]],
    };
    let field_names = lines.keyed("fields")?;
    let toks = lines.keyed("levels")?;
    let nlevels: usize = lines.parse_all(&toks, 1)?[0];
    let mut level_boxes = Vec::with_capacity(nlevels);
    let mut fields = vec![Vec::new(); field_names.len()];
    for l in 0..nlevels {
        let toks = lines.keyed("level")?;
        if toks.len() != 9 || lines.parse::<usize>(&toks[0])? != l {
            return Err(lines.err(format!("malformed header for level {l}")));
        }
        let npatches: usize = lines.parse(&toks[8])?;
        let mut boxes = Vec::with_capacity(npatches);
        for _ in 0..npatches {
            let toks = lines.keyed("patch")?;
            let b: Vec<i32> = lines.parse_all(&toks, 6)?;
            let bx = IndexBox {
                lo: [b[0], b[1], b[2]],
                hi: [b[3], b[4], b[5]],
            };
            if (0..3).any(|a| bx.lo[a] > bx.hi[a]) {
                return Err(lines.err(format!("empty box {bx}")));
            }
            for (name, data) in field_names.iter().zip(fields.iter_mut()) {
                let toks = lines.keyed(name)?;
                let values: Vec<f64> = lines.parse_all(&toks, bx.volume())?;
                data.extend(values);
            }
            boxes.push(bx);
        }
        level_boxes.push(boxes);
    }
    Ok(Snapshot {
        time,
        domain,
        field_names,
        level_boxes,
        fields,
    })
}
