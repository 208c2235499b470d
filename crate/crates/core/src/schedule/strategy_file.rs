//! Strategy files.
//!
//! ```text
//! strategy SEQFIX
//! edge 0:0
//! edge 1:0
//! ```
//!
//! `CUSTOM` strategies list `before <f>:<s> <f>:<s>` pairs instead.

use super::Strategy;
use crate::error::{Error, Result};
use crate::graph::fastfg::significant_lines;
use crate::graph::EdgeId;

fn parse_edge(line: usize, token: &str) -> Result<EdgeId> {
    let bad = || Error::parse(line, format!("expected <factor>:<slot>, found {token:?}"));
    let (f, s) = token.split_once(':').ok_or_else(bad)?;
    Ok(EdgeId {
        factor: f.parse().map_err(|_| bad())?,
        slot: s.parse().map_err(|_| bad())?,
    })
}

pub fn parse_strategy(text: &str) -> Result<Strategy> {
    let mut lines = significant_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty strategy file"))?;
    let name = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["strategy", name] => name,
        _ => {
            return Err(Error::parse(
                ln,
                format!("expected `strategy <NAME>`, found {header:?}"),
            ))
        }
    };
    match name {
        "PARALL" | "TOPO" => {
            if let Some((ln, line)) = lines.next() {
                return Err(Error::parse(ln, format!("{name} takes no body, found {line:?}")));
            }
            Ok(Strategy::from_name(name).unwrap())
        }
        "SEQFIX" => {
            let mut order = Vec::new();
            for (ln, line) in lines {
                match line.split_whitespace().collect::<Vec<_>>()[..] {
                    ["edge", e] => order.push(parse_edge(ln, e)?),
                    _ => return Err(Error::parse(ln, format!("expected `edge <f>:<s>`, found {line:?}"))),
                }
            }
            Ok(Strategy::SeqFix((!order.is_empty()).then_some(order)))
        }
        "CUSTOM" => {
            let mut pairs = Vec::new();
            for (ln, line) in lines {
                match line.split_whitespace().collect::<Vec<_>>()[..] {
                    ["before", a, b] => pairs.push((parse_edge(ln, a)?, parse_edge(ln, b)?)),
                    _ => {
                        return Err(Error::parse(
                            ln,
                            format!("expected `before <f>:<s> <f>:<s>`, found {line:?}"),
                        ))
                    }
                }
            }
            Ok(Strategy::Custom(pairs))
        }
        other => Err(Error::parse(ln, format!("unknown strategy {other:?}"))),
    }
}

/// Renders a strategy in the file format.
pub fn write_strategy(strategy: &Strategy) -> String {
    let mut out = format!("strategy {}\n", strategy.name());
    match strategy {
        Strategy::SeqFix(Some(order)) => {
            for e in order {
                out.push_str(&format!("edge {e}\n"));
            }
        }
        Strategy::Custom(pairs) => {
            for (a, b) in pairs {
                out.push_str(&format!("before {a} {b}\n"));
            }
        }
        _ => {}
    }
    out
}
