//! Versioned text format for [`UnitGraph`]:
//!
//! ```text
//! unit-graph 1
//! meta <key>=<value>          (zero or more, sorted by key)
//! warning <text>              (zero or more)
//! inputs <id> <id> ...
//! outputs <id> <id> ...
//! units <count>
//! <id> <kind> <bias> <src:coeff,src:coeff,...|-> <layer>
//! ```
//!
//! Floats use the shortest representation that round-trips exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::graph::{Unit, UnitGraph, UnitKind};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub fn write_graph(w: &mut impl Write, g: &UnitGraph) -> Result<()> {
    writeln!(w, "unit-graph {FORMAT_VERSION}")?;
    for (k, v) in &g.meta {
        writeln!(w, "meta {k}={v}")?;
    }
    for msg in &g.warnings {
        writeln!(w, "warning {}", msg.replace('\n', " "))?;
    }
    let ids = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    writeln!(w, "inputs {}", ids(&g.inputs))?;
    writeln!(w, "outputs {}", ids(&g.outputs))?;
    writeln!(w, "units {}", g.units.len())?;
    for (id, u) in g.units.iter().enumerate() {
        let edges = if u.edges.is_empty() {
            "-".to_string()
        } else {
            u.edges.iter().map(|(s, c)| format!("{s}:{c:?}")).collect::<Vec<_>>().join(",")
        };
        writeln!(w, "{id} {} {:?} {edges} {}", u.kind.name(), u.bias, u.layer)?;
    }
    Ok(())
}

fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::parse(format!("line {line}: bad number {s:?}")))
}

fn ids(rest: &str, line: usize) -> Result<Vec<usize>> {
    rest.split_whitespace().map(|t| num(t, line)).collect()
}

/// Parses and validates a graph.
pub fn read_graph(r: impl Read) -> Result<UnitGraph> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((i, l)) => Ok(Some((i + 1, l?))),
            None => Ok(None),
        }
    };
    let (_, header) = next()?.ok_or_else(|| Error::parse("empty graph file"))?;
    match header.split_once(' ') {
        Some(("unit-graph", v)) if v.trim() == FORMAT_VERSION.to_string() => {}
        _ => return Err(Error::parse(format!("unsupported graph header {header:?}"))),
    }
    let mut g = UnitGraph::default();
    let mut expected_units = None;
    while let Some((ln, line)) = next()? {
        let (tag, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        match tag {
            "meta" => {
                let (k, v) =
                    rest.split_once('=').ok_or_else(|| Error::parse(format!("line {ln}: meta without '='")))?;
                g.meta.insert(k.to_string(), v.to_string());
            }
            "warning" => g.warnings.push(rest.to_string()),
            "inputs" => g.inputs = ids(rest, ln)?,
            "outputs" => g.outputs = ids(rest, ln)?,
            "units" => {
                expected_units = Some(num::<usize>(rest.trim(), ln)?);
                break;
            }
            _ => return Err(Error::parse(format!("line {ln}: unexpected {tag:?}"))),
        }
    }
    let count = expected_units.ok_or_else(|| Error::parse("missing units section"))?;
    for id in 0..count {
        let (ln, line) = next()?.ok_or_else(|| Error::parse(format!("expected {count} units, found {id}")))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::parse(format!("line {ln}: expected 5 fields, found {}", f.len())));
        }
        if num::<usize>(f[0], ln)? != id {
            return Err(Error::parse(format!("line {ln}: unit ids must be consecutive")));
        }
        let kind =
            UnitKind::from_name(f[1]).ok_or_else(|| Error::parse(format!("line {ln}: unknown kind {:?}", f[1])))?;
        let edges = if f[3] == "-" {
            Vec::new()
        } else {
            f[3].split(',')
                .map(|e| {
                    let (s, c) = e.split_once(':').ok_or_else(|| Error::parse(format!("line {ln}: bad edge {e:?}")))?;
                    Ok((num(s, ln)?, num(c, ln)?))
                })
                .collect::<Result<_>>()?
        };
        g.units.push(Unit { kind, bias: num(f[2], ln)?, edges, layer: num(f[4], ln)? });
    }
    if let Some((ln, extra)) = next()? {
        if !extra.trim().is_empty() {
            return Err(Error::parse(format!("line {ln}: trailing content")));
        }
    }
    g.validate().map_err(|e| Error::parse(format!("inconsistent graph: {e}")))?;
    Ok(g)
}

pub fn save_graph(path: &Path, g: &UnitGraph) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_graph(&mut w, g)?;
    w.flush()?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<UnitGraph> {
    read_graph(File::open(path)?)
}
