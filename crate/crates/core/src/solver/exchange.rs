//! Plain-text exchange format for [`ConicProgram`].
//!
//! ```text
//! conic-program 1
//! vars <n>
//! obj <var> <coeff>                       (repeated; omitted entries are 0)
//! block <size>                            (starts a PSD block)
//! const <i> <j> <value>                   (entry of F0 in the last block)
//! term <var> <i> <j> <coeff>              (entry of F_var in the last block)
//! nonneg <constant> <var>:<coeff> ...     (row >= 0)
//! eq <constant> <var>:<coeff> ...         (row = 0)
//! ```
//!
//! Indices are 0-based, `i <= j`. Lines starting with `#` are comments.
//! Reals are written in shortest round-trip form, so write → read is exact.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{AffineRow, ConicProgram, PsdBlock};
use crate::{Error, Result};

const MAGIC: &str = "conic-program 1";

pub fn write_program(p: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "vars {}", p.n_vars);
    for (i, &c) in p.objective.iter().enumerate() {
        if c != 0.0 {
            let _ = writeln!(out, "obj {i} {c:?}");
        }
    }
    for b in &p.psd_blocks {
        let _ = writeln!(out, "block {}", b.size);
        for &(i, j, v) in &b.constant {
            let _ = writeln!(out, "const {i} {j} {v:?}");
        }
        for &(var, i, j, c) in &b.terms {
            let _ = writeln!(out, "term {var} {i} {j} {c:?}");
        }
    }
    for (tag, rows) in [("nonneg", &p.nonneg_rows), ("eq", &p.eq_rows)] {
        for r in rows {
            let _ = write!(out, "{tag} {:?}", r.constant);
            for &(j, c) in &r.coeffs {
                let _ = write!(out, " {j}:{c:?}");
            }
            out.push('\n');
        }
    }
    out
}

fn parse<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Exchange {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Exchange {
        line,
        msg: format!("bad {what} {tok:?}"),
    })
}

fn parse_row<'a>(mut toks: impl Iterator<Item = &'a str>, line: usize) -> Result<AffineRow> {
    let constant = parse(toks.next(), line, "constant")?;
    let mut coeffs = Vec::new();
    for t in toks {
        let (j, c) = t.split_once(':').ok_or_else(|| Error::Exchange {
            line,
            msg: format!("expected var:coeff, got {t:?}"),
        })?;
        coeffs.push((parse(Some(j), line, "variable")?, parse(Some(c), line, "coefficient")?));
    }
    Ok(AffineRow { constant, coeffs })
}

pub fn read_program(text: &str) -> Result<ConicProgram> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((k, _)) => {
            return Err(Error::Exchange {
                line: k,
                msg: format!("expected header {MAGIC:?}"),
            })
        }
        None => return Err(Error::Exchange { line: 0, msg: "empty input".into() }),
    }
    let mut p: Option<ConicProgram> = None;
    for (k, l) in lines {
        let mut toks = l.split_whitespace();
        let key = toks.next().unwrap_or_default();
        if key == "vars" {
            if p.is_some() {
                return Err(Error::Exchange { line: k, msg: "duplicate vars".into() });
            }
            p = Some(ConicProgram::new(parse(toks.next(), k, "variable count")?));
            continue;
        }
        let prog = p.as_mut().ok_or_else(|| Error::Exchange {
            line: k,
            msg: "vars must precede other records".into(),
        })?;
        match key {
            "obj" => {
                let i: usize = parse(toks.next(), k, "variable")?;
                let c: f64 = parse(toks.next(), k, "coefficient")?;
                let slot = prog.objective.get_mut(i).ok_or_else(|| Error::Exchange {
                    line: k,
                    msg: format!("variable {i} out of range"),
                })?;
                *slot = c;
            }
            "block" => prog.psd_blocks.push(PsdBlock::new(parse(toks.next(), k, "block size")?)),
            "const" | "term" => {
                let b = prog.psd_blocks.last_mut().ok_or_else(|| Error::Exchange {
                    line: k,
                    msg: format!("{key} before any block"),
                })?;
                if key == "const" {
                    let i = parse(toks.next(), k, "row")?;
                    let j = parse(toks.next(), k, "column")?;
                    b.add_constant(i, j, parse(toks.next(), k, "value")?);
                } else {
                    let var = parse(toks.next(), k, "variable")?;
                    let i = parse(toks.next(), k, "row")?;
                    let j = parse(toks.next(), k, "column")?;
                    b.add_term(var, i, j, parse(toks.next(), k, "coefficient")?);
                }
            }
            "nonneg" => prog.nonneg_rows.push(parse_row(toks, k)?),
            "eq" => prog.eq_rows.push(parse_row(toks, k)?),
            other => {
                return Err(Error::Exchange {
                    line: k,
                    msg: format!("unknown record {other:?}"),
                })
            }
        }
    }
    let p = p.ok_or_else(|| Error::Exchange { line: 0, msg: "missing vars record".into() })?;
    p.validate().map_err(|msg| Error::Exchange { line: 0, msg })?;
    Ok(p)
}
