//! FASTFG: a line-oriented text format for AND/OR factor graphs.
//!
//! ```text
//! FASTFG 1
//! vars 3
//! factor AND 0.999 0.999 head=0 body=
//! factor AND 0.999 0.0 head=2 body=0,1
//! ```
//!
//! `#` starts a comment; blank lines are ignored.

use std::fmt::Write as _;

use super::{Factor, FactorGraph, FactorKind, VariableId};
use crate::error::{Error, Result};

/// Lines with comments stripped, paired with 1-based line numbers.
pub(crate) fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

pub(crate) fn parse_probability(line: usize, name: &str, token: Option<&str>) -> Result<f64> {
    let token = token.ok_or_else(|| Error::parse(line, format!("missing {name}")))?;
    let p: f64 = token
        .parse()
        .map_err(|_| Error::parse(line, format!("{name} is not a number: {token:?}")))?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::parse(line, format!("{name} = {p} is outside [0, 1]")));
    }
    Ok(p)
}

fn parse_var(line: usize, token: &str) -> Result<VariableId> {
    token
        .parse::<u32>()
        .map(VariableId)
        .map_err(|_| Error::parse(line, format!("bad variable index {token:?}")))
}

fn keyed<'a>(line: usize, key: &str, token: Option<&'a str>) -> Result<&'a str> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| Error::parse(line, format!("expected {key}=...")))
}

/// Parses and validates a FASTFG document. Factor and body order are kept.
pub fn parse_factor_graph(text: &str) -> Result<FactorGraph> {
    let mut lines = significant_lines(text);

    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty input, expected `FASTFG 1`"))?;
    if header.split_whitespace().collect::<Vec<_>>() != ["FASTFG", "1"] {
        return Err(Error::parse(ln, format!("expected `FASTFG 1`, found {header:?}")));
    }

    let (ln, vars) = lines
        .next()
        .ok_or_else(|| Error::parse(ln + 1, "missing `vars <N>` line"))?;
    let num_variables = match vars.split_whitespace().collect::<Vec<_>>()[..] {
        ["vars", n] => n
            .parse::<usize>()
            .map_err(|_| Error::parse(ln, format!("bad variable count {n:?}")))?,
        _ => return Err(Error::parse(ln, format!("expected `vars <N>`, found {vars:?}"))),
    };

    let mut factors = Vec::new();
    for (ln, line) in lines {
        let mut tok = line.split_whitespace();
        if tok.next() != Some("factor") {
            return Err(Error::parse(ln, format!("expected a factor line, found {line:?}")));
        }
        let kind = match tok.next() {
            Some("AND") => FactorKind::And,
            Some("OR") => FactorKind::Or,
            other => {
                return Err(Error::parse(
                    ln,
                    format!("factor kind must be AND or OR, found {other:?}"),
                ))
            }
        };
        let p1 = parse_probability(ln, "p1", tok.next())?;
        let p2 = parse_probability(ln, "p2", tok.next())?;
        let head = parse_var(ln, keyed(ln, "head", tok.next())?)?;
        let body_list = keyed(ln, "body", tok.next())?;
        let body = if body_list.is_empty() {
            Vec::new()
        } else {
            body_list
                .split(',')
                .map(|t| parse_var(ln, t))
                .collect::<Result<Vec<_>>>()?
        };
        if let Some(extra) = tok.next() {
            return Err(Error::parse(ln, format!("unexpected trailing token {extra:?}")));
        }
        let factor = Factor {
            kind,
            head,
            body,
            p1,
            p2,
        };
        factor.validate(num_variables).map_err(|m| Error::parse(ln, m))?;
        factors.push(factor);
    }

    FactorGraph::new(num_variables, factors)
}

pub(crate) fn write(graph: &FactorGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "FASTFG 1");
    let _ = writeln!(out, "vars {}", graph.num_variables());
    for f in graph.factors() {
        let body: Vec<String> = f.body.iter().map(|v| v.0.to_string()).collect();
        let _ = writeln!(
            out,
            "factor {} {} {} head={} body={}",
            f.kind,
            f.p1,
            f.p2,
            f.head.0,
            body.join(",")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_and() {
        let g = parse_factor_graph(
            "FASTFG 1\nvars 3\nfactor AND 0.999 0.0 head=2 body=0,1\n\
             factor AND 0.5 0.5 head=0 body=\nfactor AND 0.5 0.5 head=1 body=\n",
        )
        .unwrap();
        assert_eq!(g.num_variables(), 3);
        assert_eq!(g.factor(0).kind, FactorKind::And);
        assert_eq!(g.factor(0).body, vec![VariableId(0), VariableId(1)]);
        assert_eq!(g.num_edges(), 5);
    }

    #[test]
    fn prior_line() {
        let g = parse_factor_graph("FASTFG 1\nvars 1\nfactor AND 0.999 0.999 head=0 body=").unwrap();
        let f = g.factor(0);
        assert!(f.body.is_empty());
        assert_eq!(f.p1, 0.999);
    }

    #[test]
    fn comments_and_blank_lines() {
        let g =
            parse_factor_graph("# header comment\nFASTFG 1\n\nvars 1 # one\nfactor AND 1 1 head=0 body= # evidence\n")
                .unwrap();
        assert_eq!(g.num_factors(), 1);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_factor_graph("FASTFG 1\nvars 3\nfactor AND 0.9 0 head=5 body=0,1\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("out of range"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
        let cases = [
            ("FASTFG 2\nvars 1\n", 1),
            ("FASTFG 1\nvariables 1\n", 2),
            ("FASTFG 1\nvars 2\nfactor AND 0.9 0 head=0 body=1,1\n", 3),
            ("FASTFG 1\nvars 2\nfactor AND 1.2 0 head=0 body=1\n", 3),
            ("FASTFG 1\nvars 2\nfactor XOR 1 0 head=0 body=1\n", 3),
            ("FASTFG 1\nvars 2\nfactor AND 1 0 head=0\n", 3),
            ("FASTFG 1\nvars 2\n\nfactor OR 1 0 head=0 body=\n", 4),
        ];
        for (text, want) in cases {
            match parse_factor_graph(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn round_trip() {
        let text = "FASTFG 1\nvars 4\nfactor AND 0.999 0 head=2 body=0,1\n\
                    factor OR 1 0 head=3 body=2,0\nfactor AND 0.7 0.7 head=0 body=\n\
                    factor AND 0.123456789 0.123456789 head=1 body=\n";
        let g = parse_factor_graph(text).unwrap();
        let back = parse_factor_graph(&g.to_fastfg()).unwrap();
        assert_eq!(g, back);
    }
}
