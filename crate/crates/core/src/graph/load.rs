//! Text ingestion: whitespace-separated edge lists and seed-label files.

use std::io::{BufRead, Write};

use super::{Graph, GraphBuilder, GraphError, SeedLabels, VertexId};
use crate::scalar::Scalar;

/// Maximum deviation of a seed-label row's sum from 1 before normalization.
pub const SEED_SUM_TOLERANCE: f64 = 1e-6;

fn parse_id(token: &str, line: usize) -> Result<VertexId, GraphError> {
    if token.starts_with('-') {
        return Err(GraphError::Parse {
            line,
            message: format!("negative vertex id {token:?}"),
        });
    }
    token.parse().map_err(|_| GraphError::Parse {
        line,
        message: format!("invalid vertex id {token:?}"),
    })
}

fn parse_real<S: Scalar>(token: &str, line: usize, what: &str) -> Result<S, GraphError> {
    token
        .parse::<S>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| GraphError::Parse {
            line,
            message: format!("invalid {what} {token:?}"),
        })
}

/// Yields `(line_number, tokens)` for every non-blank, non-comment line.
fn data_lines<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<(usize, String), GraphError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(GraphError::Io(e))),
            Ok(text) => {
                let trimmed = text.trim();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    None
                } else {
                    Some(Ok((i + 1, trimmed.to_owned())))
                }
            }
        })
}

/// Reads `src dst [weight]` lines into a graph.
///
/// Lines starting with `#` are comments. A missing weight column uses
/// `default_weight`; repeated `(src, dst)` pairs keep the last weight.
pub fn load_edge_list<S: Scalar, R: BufRead>(
    reader: R,
    default_weight: S,
) -> Result<Graph<S>, GraphError> {
    if default_weight < S::zero() || !default_weight.is_finite() {
        return Err(GraphError::InvalidParameter(format!(
            "default weight {default_weight} must be finite and non-negative"
        )));
    }
    let mut builder = GraphBuilder::new();
    let mut any = false;
    for item in data_lines(reader) {
        let (line, text) = item?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if !(2..=3).contains(&tokens.len()) {
            return Err(GraphError::Parse {
                line,
                message: format!("expected 2 or 3 columns, found {}", tokens.len()),
            });
        }
        let src = parse_id(tokens[0], line)?;
        let dst = parse_id(tokens[1], line)?;
        let weight = match tokens.get(2) {
            Some(tok) => parse_real::<S>(tok, line, "weight")?,
            None => default_weight,
        };
        if weight < S::zero() {
            return Err(GraphError::Parse {
                line,
                message: format!("negative weight {weight}"),
            });
        }
        builder.add_edge(src, dst, weight);
        any = true;
    }
    if !any {
        return Err(GraphError::Empty);
    }
    Ok(builder.build())
}

/// Reads `vertexId p_0 ... p_{C-1}` lines; each row is normalized to sum to 1.
pub fn load_seed_labels<S: Scalar, R: BufRead>(
    reader: R,
    num_classes: usize,
) -> Result<SeedLabels<S>, GraphError> {
    if num_classes < 2 {
        return Err(GraphError::InvalidParameter(format!(
            "num_classes must be at least 2, got {num_classes}"
        )));
    }
    let mut seeds = SeedLabels::new();
    for item in data_lines(reader) {
        let (line, text) = item?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != num_classes + 1 {
            return Err(GraphError::Parse {
                line,
                message: format!(
                    "expected vertex id and {num_classes} likelihoods, found {} columns",
                    tokens.len()
                ),
            });
        }
        let id = parse_id(tokens[0], line)?;
        let mut label = Vec::with_capacity(num_classes);
        for tok in &tokens[1..] {
            let p = parse_real::<S>(tok, line, "likelihood")?;
            if p < S::zero() || p > S::one() {
                return Err(GraphError::Parse {
                    line,
                    message: format!("likelihood {p} outside [0, 1]"),
                });
            }
            label.push(p);
        }
        let sum = label.iter().fold(S::zero(), |acc, &p| acc + p);
        let deviation = (sum - S::one()).abs().to_f64().unwrap_or(f64::INFINITY);
        if deviation > SEED_SUM_TOLERANCE {
            return Err(GraphError::Parse {
                line,
                message: format!("likelihoods sum to {sum}, expected 1"),
            });
        }
        for p in &mut label {
            *p = *p / sum;
        }
        seeds.insert(id, label);
    }
    Ok(seeds)
}

pub fn write_edge_list<S: Scalar, W: Write>(graph: &Graph<S>, mut out: W) -> std::io::Result<()> {
    for (src, edges) in graph.iter() {
        for e in edges {
            writeln!(out, "{src} {} {}", e.target, e.weight)?;
        }
    }
    out.flush()
}

pub fn write_seed_labels<S: Scalar, W: Write>(seeds: &SeedLabels<S>, mut out: W) -> std::io::Result<()> {
    for (id, label) in seeds {
        write!(out, "{id}")?;
        for p in label {
            write!(out, " {p}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}
