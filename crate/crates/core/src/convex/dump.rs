//! Line-oriented text form of a [`ConvexProgram`].
//!
//! ```text
//! convex-program 1
//! variables <n>
//! <name> <lower> <upper> <objective>      (n lines)
//! constraints <m>
//! affine <b> <a_0> .. <a_{n-1}>
//! quadratic <b> <g_0> .. <g_{n-1}>
//! <Q row 0>                                (n lines)
//! exp2 <i> <j>
//! end
//! ```
//!
//! Numbers are written in shortest round-trip exponent form so parsing gives
//! back identical values.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{Constraint, ConvexProgram};
use crate::error::{Error, Result};

const HEADER: &str = "convex-program 1";

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:e}");
    }
    s
}

pub fn write_program(p: &ConvexProgram) -> String {
    let n = p.num_variables();
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "variables {n}");
    for i in 0..n {
        let _ = writeln!(
            out,
            "{} {:e} {:e} {:e}",
            p.names[i], p.lower[i], p.upper[i], p.objective[i]
        );
    }
    let _ = writeln!(out, "constraints {}", p.constraints.len());
    for c in &p.constraints {
        match c {
            Constraint::Affine { a, b } => {
                let _ = writeln!(out, "affine {b:e} {}", join(a));
            }
            Constraint::Quadratic { q, g, b } => {
                let _ = writeln!(out, "quadratic {b:e} {}", join(g));
                for r in 0..n {
                    let row: Vec<f64> = q.row(r).iter().copied().collect();
                    let _ = writeln!(out, "{}", join(&row));
                }
            }
            Constraint::Exp2 { i, j } => {
                let _ = writeln!(out, "exp2 {i} {j}");
            }
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<Vec<&'a str>> {
        loop {
            let (i, l) = self
                .inner
                .next()
                .ok_or_else(|| Error::Parse("unexpected end of program".into()))?;
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok(l.split_whitespace().collect());
            }
        }
    }

    fn err(&self, m: impl std::fmt::Display) -> Error {
        Error::Parse(format!("line {}: {m}", self.line))
    }

    fn num(&self, s: &str) -> Result<f64> {
        s.parse().map_err(|_| self.err(format!("bad number {s:?}")))
    }

    fn int(&self, s: &str) -> Result<usize> {
        s.parse().map_err(|_| self.err(format!("bad integer {s:?}")))
    }

    fn nums(&self, s: &[&str], n: usize) -> Result<Vec<f64>> {
        if s.len() != n {
            return Err(self.err(format!("expected {n} values, got {}", s.len())));
        }
        s.iter().map(|v| self.num(v)).collect()
    }

    fn keyed(&mut self, key: &str) -> Result<usize> {
        let t = self.next()?;
        match t.as_slice() {
            [k, v] if *k == key => self.int(v),
            _ => Err(self.err(format!("expected `{key} <count>`"))),
        }
    }
}

/// Parses the text form and validates the result.
pub fn parse_program(text: &str) -> Result<ConvexProgram> {
    let mut it = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if it.next()?.join(" ") != HEADER {
        return Err(it.err(format!("expected `{HEADER}`")));
    }
    let n = it.keyed("variables")?;
    let mut p = ConvexProgram::new(vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let t = it.next()?;
        if t.len() != 4 {
            return Err(it.err("expected `<name> <lower> <upper> <objective>`"));
        }
        p.names[i] = t[0].to_string();
        p.lower[i] = it.num(t[1])?;
        p.upper[i] = it.num(t[2])?;
        p.objective[i] = it.num(t[3])?;
    }
    let m = it.keyed("constraints")?;
    for _ in 0..m {
        let t = it.next()?;
        let c = match t.first().copied() {
            Some("affine") if t.len() >= 2 => Constraint::Affine {
                b: it.num(t[1])?,
                a: it.nums(&t[2..], n)?,
            },
            Some("quadratic") if t.len() >= 2 => {
                let b = it.num(t[1])?;
                let g = it.nums(&t[2..], n)?;
                let mut q = DMatrix::zeros(n, n);
                for r in 0..n {
                    let row = it.next()?;
                    for (c, v) in it.nums(&row, n)?.into_iter().enumerate() {
                        q[(r, c)] = v;
                    }
                }
                Constraint::Quadratic { q, g, b }
            }
            Some("exp2") if t.len() == 3 => Constraint::Exp2 {
                i: it.int(t[1])?,
                j: it.int(t[2])?,
            },
            _ => return Err(it.err(format!("unknown constraint {:?}", t.join(" ")))),
        };
        p.constraints.push(c);
    }
    if it.next()? != ["end"] {
        return Err(it.err("expected `end`"));
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConvexProgram {
        let mut p = ConvexProgram::new(vec![-1.0, 0.0, 1e-9], vec![1.0, 2.5, 7.0]);
        p.names = vec!["alpha_0".into(), "t_dl".into(), "T_dl".into()];
        p.objective = vec![0.1, -1.0 / 3.0, 0.0];
        p.constraints.push(Constraint::Affine {
            a: vec![1.0, 2.0, -3.0],
            b: 0.25,
        });
        let mut q = DMatrix::zeros(3, 3);
        q[(0, 0)] = std::f64::consts::PI;
        p.constraints.push(Constraint::Quadratic {
            q,
            g: vec![0.0, -1.0, 1e-300],
            b: 1.0,
        });
        p.constraints.push(Constraint::Exp2 { i: 1, j: 2 });
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let p = sample();
        let q = parse_program(&write_program(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_malformed_input() {
        let text = write_program(&sample());
        assert!(parse_program(&text.replace("exp2 1 2", "exp2 1")).is_err());
        assert!(parse_program(&text.replace("end\n", "")).is_err());
        assert!(parse_program(&text.replace("convex-program 1", "convex-program 2")).is_err());
        assert!(parse_program(&text.replace("affine 2.5e-1", "affine x")).is_err());
    }
}
