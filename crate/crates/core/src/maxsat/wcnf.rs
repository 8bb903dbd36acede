//! DIMACS WCNF interchange.
//!
//! Output uses the classic header `p wcnf <nvars> <nclauses> <top>`. Real
//! weights are multiplied by 10^6 and rounded (never below 1); `top` is the
//! integer total plus one, so no exported clause is hard. DIMACS variable
//! `i + 1` is engine variable `i`; node ids and clause origins travel in a
//! JSON sidecar next to the `.wcnf` file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ClauseOrigin, Literal, NodeId, Var, WeightedClause, WeightedCnf};

pub const WEIGHT_SCALE: f64 = 1e6;

#[derive(Debug, Error)]
pub enum WcnfError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("weight {0} does not fit an integer WCNF weight")]
    WeightOverflow(f64),
    #[error("hard clause on line {0} cannot be represented as a soft constraint")]
    HardClause(usize),
    #[error("sidecar does not match instance: {0}")]
    Sidecar(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> WcnfError {
    WcnfError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WcnfClause {
    pub weight: u64,
    /// Non-zero DIMACS literals.
    pub literals: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WcnfInstance {
    pub num_vars: usize,
    pub top: u64,
    pub clauses: Vec<WcnfClause>,
}

impl WcnfInstance {
    pub fn is_hard(&self, clause: &WcnfClause) -> bool {
        clause.weight >= self.top
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!(
            "p wcnf {} {} {}\n",
            self.num_vars,
            self.clauses.len(),
            self.top
        );
        for c in &self.clauses {
            write!(out, "{}", c.weight).unwrap();
            for l in &c.literals {
                write!(out, " {l}").unwrap();
            }
            out.push_str(" 0\n");
        }
        out
    }

    /// Parses a WCNF document. Comment lines (`c ...`) and blank lines are
    /// skipped; each clause must sit on one line terminated by `0`. When the
    /// header omits `top`, every clause is soft.
    pub fn parse(text: &str) -> Result<Self, WcnfError> {
        let mut header: Option<(usize, usize, u64)> = None;
        let mut clauses = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if line.starts_with('p') {
                if header.is_some() {
                    return Err(parse_err(line_no, "duplicate header"));
                }
                header = Some(parse_header(line, line_no)?);
                continue;
            }
            let Some((num_vars, _, _)) = header else {
                return Err(parse_err(line_no, "clause before header"));
            };
            clauses.push(parse_clause(line, line_no, num_vars)?);
        }
        let (num_vars, declared, top) =
            header.ok_or_else(|| parse_err(last_line.max(1), "missing header"))?;
        if declared != clauses.len() {
            return Err(parse_err(
                last_line,
                format!(
                    "header declares {declared} clauses, found {}",
                    clauses.len()
                ),
            ));
        }
        Ok(WcnfInstance {
            num_vars,
            top,
            clauses,
        })
    }
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize, u64), WcnfError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 4 || fields.len() > 5 || fields[0] != "p" || fields[1] != "wcnf" {
        return Err(parse_err(line_no, format!("malformed header {line:?}")));
    }
    let num = |s: &str, what: &str| {
        s.parse::<u64>()
            .map_err(|_| parse_err(line_no, format!("bad {what} {s:?}")))
    };
    let vars = num(fields[2], "variable count")? as usize;
    let clauses = num(fields[3], "clause count")? as usize;
    let top = match fields.get(4) {
        Some(t) => num(t, "top weight")?,
        None => u64::MAX,
    };
    Ok((vars, clauses, top))
}

fn parse_clause(line: &str, line_no: usize, num_vars: usize) -> Result<WcnfClause, WcnfError> {
    let mut tokens = line.split_whitespace();
    let weight: u64 = tokens
        .next()
        .and_then(|w| w.parse().ok())
        .ok_or_else(|| parse_err(line_no, "missing or invalid weight"))?;
    if weight == 0 {
        return Err(parse_err(line_no, "zero weight"));
    }
    let mut literals = Vec::new();
    let mut terminated = false;
    for tok in tokens {
        if terminated {
            return Err(parse_err(line_no, "tokens after clause terminator"));
        }
        let lit: i64 = tok
            .parse()
            .map_err(|_| parse_err(line_no, format!("invalid literal {tok:?}")))?;
        if lit == 0 {
            terminated = true;
            continue;
        }
        if lit.unsigned_abs() as usize > num_vars {
            return Err(parse_err(
                line_no,
                format!("literal {lit} exceeds {num_vars} variables"),
            ));
        }
        literals.push(lit);
    }
    if !terminated {
        return Err(parse_err(line_no, "clause not terminated by 0"));
    }
    if literals.is_empty() {
        return Err(parse_err(line_no, "empty clause"));
    }
    Ok(WcnfClause { weight, literals })
}

/// Node ids and clause origins for a WCNF file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    /// `variables[i]` is DIMACS variable `i + 1`.
    pub variables: Vec<NodeId>,
    pub origins: Vec<ClauseOrigin>,
}

pub fn scale_weight(weight: f64) -> Result<u64, WcnfError> {
    let scaled = (weight * WEIGHT_SCALE).round();
    // Stay within the range where every integer is an exact f64.
    if !scaled.is_finite() || weight <= 0.0 || scaled > (1u64 << 53) as f64 {
        return Err(WcnfError::WeightOverflow(weight));
    }
    Ok((scaled as u64).max(1))
}

pub fn to_wcnf(cnf: &WeightedCnf) -> Result<(WcnfInstance, Sidecar), WcnfError> {
    let mut clauses = Vec::with_capacity(cnf.clauses.len());
    let mut total: u64 = 0;
    for c in &cnf.clauses {
        let weight = scale_weight(c.weight)?;
        total = total
            .checked_add(weight)
            .ok_or(WcnfError::WeightOverflow(c.weight))?;
        clauses.push(WcnfClause {
            weight,
            literals: c
                .literals
                .iter()
                .map(|l| {
                    let v = l.var.0 as i64 + 1;
                    if l.positive {
                        v
                    } else {
                        -v
                    }
                })
                .collect(),
        });
    }
    let top = total
        .checked_add(1)
        .ok_or(WcnfError::WeightOverflow(cnf.total_weight()))?;
    let sidecar = Sidecar {
        variables: cnf.variables.clone(),
        origins: cnf.clauses.iter().map(|c| c.origin).collect(),
    };
    Ok((
        WcnfInstance {
            num_vars: cnf.num_vars(),
            top,
            clauses,
        },
        sidecar,
    ))
}

/// Rebuilds a [`WeightedCnf`]. Without a sidecar, variables are named
/// `x1..xn` and clauses are tagged as verifier clauses.
pub fn from_wcnf(
    instance: &WcnfInstance,
    sidecar: Option<&Sidecar>,
) -> Result<WeightedCnf, WcnfError> {
    let variables = match sidecar {
        Some(s) if s.variables.len() != instance.num_vars => {
            return Err(WcnfError::Sidecar(format!(
                "{} variable names for {} variables",
                s.variables.len(),
                instance.num_vars
            )))
        }
        Some(s) if s.origins.len() != instance.clauses.len() => {
            return Err(WcnfError::Sidecar(format!(
                "{} origins for {} clauses",
                s.origins.len(),
                instance.clauses.len()
            )))
        }
        Some(s) => s.variables.clone(),
        None => (1..=instance.num_vars)
            .map(|i| NodeId::from(format!("x{i}").as_str()))
            .collect(),
    };
    let mut clauses = Vec::with_capacity(instance.clauses.len());
    for (i, c) in instance.clauses.iter().enumerate() {
        if instance.is_hard(c) {
            return Err(WcnfError::HardClause(i + 1));
        }
        let literals = c
            .literals
            .iter()
            .map(|&l| Literal {
                var: Var((l.unsigned_abs() - 1) as u32),
                positive: l > 0,
            })
            .collect();
        let origin = sidecar.map_or(ClauseOrigin::Nli, |s| s.origins[i]);
        let clause = WeightedClause::new(literals, c.weight as f64 / WEIGHT_SCALE, origin)
            .map_err(|e| WcnfError::Sidecar(format!("clause {}: {e}", i + 1)))?;
        clauses.push(clause);
    }
    WeightedCnf::new(variables, clauses).map_err(|e| WcnfError::Sidecar(e.to_string()))
}

/// `x.wcnf` → `x.vars.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("instance");
    path.with_file_name(format!("{stem}.vars.json"))
}

pub fn export_wcnf(cnf: &WeightedCnf, path: &Path) -> Result<(), WcnfError> {
    let (instance, sidecar) = to_wcnf(cnf)?;
    std::fs::write(path, instance.to_dimacs())?;
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

/// Reads a WCNF file and, when present, its sidecar.
pub fn import_wcnf(path: &Path) -> Result<WeightedCnf, WcnfError> {
    let instance = WcnfInstance::parse(&std::fs::read_to_string(path)?)?;
    let side = sidecar_path(path);
    let sidecar = if side.exists() {
        let raw = std::fs::read_to_string(&side)?;
        Some(serde_json::from_str::<Sidecar>(&raw).map_err(|e| WcnfError::Sidecar(e.to_string()))?)
    } else {
        None
    };
    from_wcnf(&instance, sidecar.as_ref())
}
