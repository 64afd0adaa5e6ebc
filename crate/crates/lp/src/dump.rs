//! Plain-text dump of a problem for cross-checking with external solvers.
//!
//! ```text
//! # esskit-lp dump
//! vars 3
//! max 0:1 2:-0.5
//! bound 0 0 inf
//! bound 1 -inf inf
//! name 0 p_cap
//! 0:1 1:2 <= 4
//! 1:1 2:-1 = 0
//! ```
//!
//! Every line after the header that does not start with a keyword is one
//! constraint: `index:value` pairs, the relation and the right-hand side.

use std::fmt::Write as _;

use crate::error::LpError;
use crate::problem::{LpProblem, Relation};

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

pub fn write_dump(p: &LpProblem) -> String {
    let mut out = String::new();
    out.push_str("# esskit-lp dump\n");
    let _ = writeln!(out, "vars {}", p.num_vars);
    out.push_str("max");
    for (j, &c) in p.objective.iter().enumerate() {
        if c != 0.0 {
            let _ = write!(out, " {j}:{}", fmt_num(c));
        }
    }
    out.push('\n');
    for (j, &(lo, hi)) in p.var_bounds.iter().enumerate() {
        let _ = writeln!(out, "bound {j} {} {}", fmt_num(lo), fmt_num(hi));
    }
    if let Some(names) = &p.names {
        for (j, name) in names.iter().enumerate() {
            let _ = writeln!(out, "name {j} {name}");
        }
    }
    for c in &p.constraints {
        for &(j, a) in &c.row {
            let _ = write!(out, "{j}:{} ", fmt_num(a));
        }
        let _ = writeln!(out, "{} {}", c.relation.symbol(), fmt_num(c.rhs));
    }
    out
}

fn parse_num(s: &str, line: usize) -> Result<f64, LpError> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| LpError::Parse {
            line,
            msg: format!("bad number `{s}`"),
        }),
    }
}

fn parse_pair(s: &str, line: usize) -> Result<(usize, f64), LpError> {
    let (j, v) = s.split_once(':').ok_or_else(|| LpError::Parse {
        line,
        msg: format!("expected index:value, got `{s}`"),
    })?;
    let j = j.parse().map_err(|_| LpError::Parse {
        line,
        msg: format!("bad index `{j}`"),
    })?;
    Ok((j, parse_num(v, line)?))
}

pub fn parse_dump(text: &str) -> Result<LpProblem, LpError> {
    let mut p = LpProblem::new();
    let mut names: Vec<Option<String>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split_whitespace();
        let head = parts.next().unwrap_or_default();
        match head {
            "vars" => {
                let n: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| LpError::Parse {
                        line,
                        msg: "bad vars line".into(),
                    })?;
                p.num_vars = n;
                p.objective = vec![0.0; n];
                p.var_bounds = vec![(0.0, f64::INFINITY); n];
                names = vec![None; n];
            }
            "max" => {
                for s in parts {
                    let (j, v) = parse_pair(s, line)?;
                    *p.objective.get_mut(j).ok_or_else(|| LpError::Parse {
                        line,
                        msg: format!("objective index {j} out of range"),
                    })? = v;
                }
            }
            "bound" => {
                let f: Vec<&str> = parts.collect();
                if f.len() != 3 {
                    return Err(LpError::Parse {
                        line,
                        msg: "bound needs index, lower, upper".into(),
                    });
                }
                let j: usize = f[0].parse().map_err(|_| LpError::Parse {
                    line,
                    msg: "bad bound index".into(),
                })?;
                let b = (parse_num(f[1], line)?, parse_num(f[2], line)?);
                *p.var_bounds.get_mut(j).ok_or_else(|| LpError::Parse {
                    line,
                    msg: format!("bound index {j} out of range"),
                })? = b;
            }
            "name" => {
                let j: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| {
                    LpError::Parse {
                        line,
                        msg: "bad name index".into(),
                    }
                })?;
                let name = parts.collect::<Vec<_>>().join(" ");
                *names.get_mut(j).ok_or_else(|| LpError::Parse {
                    line,
                    msg: format!("name index {j} out of range"),
                })? = Some(name);
            }
            _ => {
                let f: Vec<&str> = t.split_whitespace().collect();
                if f.len() < 2 {
                    return Err(LpError::Parse {
                        line,
                        msg: "constraint needs relation and rhs".into(),
                    });
                }
                let rhs = parse_num(f[f.len() - 1], line)?;
                let relation = match f[f.len() - 2] {
                    "<=" => Relation::Le,
                    "=" => Relation::Eq,
                    ">=" => Relation::Ge,
                    other => {
                        return Err(LpError::Parse {
                            line,
                            msg: format!("unknown relation `{other}`"),
                        })
                    }
                };
                let row = f[..f.len() - 2]
                    .iter()
                    .map(|s| parse_pair(s, line))
                    .collect::<Result<Vec<_>, _>>()?;
                p.add_constraint(row, relation, rhs);
            }
        }
    }
    if names.iter().any(Option::is_some) {
        p.names = Some(
            names
                .into_iter()
                .enumerate()
                .map(|(j, n)| n.unwrap_or_else(|| format!("x{j}")))
                .collect(),
        );
    }
    p.validate()?;
    Ok(p)
}
