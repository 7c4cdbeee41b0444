//! Plain-text simplicial mesh files.
//!
//! ```text
//! # anything after '#' is ignored
//! glueflow-mesh
//! dim 2
//! vertices 4
//! 0 0          # 1 to 3 coordinates per row, missing ones are 0
//! 1 0
//! 1 1
//! 0 1
//! cells 2
//! 0 1 2        # dim + 1 vertex indices, 0-based
//! 0 2 3
//! boundary     # optional: one 0/1 flag per vertex
//! 1 1 1 1
//! ```
//!
//! Without a `boundary` section the flags are derived from the cells.
use std::fmt::Write as _;
use std::path::Path;

use glueflow_core::geometry::{PieceMesh, PieceMetric, Point};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MeshFileError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

fn syntax(line: usize, msg: impl Into<String>) -> MeshFileError {
    MeshFileError::Syntax { line, msg: msg.into() }
}

/// Non-empty lines with comments stripped, keeping 1-based line numbers.
fn content_lines(text: &str) -> Vec<(usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("");
            let toks: Vec<&str> = l.split_whitespace().collect();
            (!toks.is_empty()).then_some((i + 1, toks))
        })
        .collect()
}

fn header<'a>(lines: &[(usize, Vec<&'a str>)], at: usize, key: &str) -> Result<(usize, Vec<&'a str>), MeshFileError> {
    let (line, toks) = lines.get(at).ok_or_else(|| syntax(0, format!("missing '{key}' section")))?;
    if toks[0] != key {
        return Err(syntax(*line, format!("expected '{key}', found '{}'", toks[0])));
    }
    Ok((*line, toks[1..].to_vec()))
}

fn count(line: usize, toks: &[&str], key: &str) -> Result<usize, MeshFileError> {
    match toks {
        [n] => n.parse().map_err(|_| syntax(line, format!("'{key}' count is not an integer"))),
        _ => Err(syntax(line, format!("'{key}' takes one count"))),
    }
}

pub fn parse_mesh(text: &str, id: usize) -> Result<PieceMesh, MeshFileError> {
    let lines = content_lines(text);
    let mut at = 0;
    let (line, rest) = header(&lines, at, "glueflow-mesh")?;
    if !rest.is_empty() {
        return Err(syntax(line, "unexpected tokens after magic"));
    }
    at += 1;
    let (line, rest) = header(&lines, at, "dim")?;
    let dim = count(line, &rest, "dim")?;
    at += 1;
    let (line, rest) = header(&lines, at, "vertices")?;
    let nv = count(line, &rest, "vertices")?;
    at += 1;
    let mut vertices: Vec<Point> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, toks) = lines.get(at).ok_or_else(|| syntax(0, format!("expected {nv} vertex rows")))?;
        if toks.is_empty() || toks.len() > 3 {
            return Err(syntax(*line, "vertex rows take 1 to 3 coordinates"));
        }
        let mut p = [0.0; 3];
        for (k, t) in toks.iter().enumerate() {
            p[k] = t.parse::<f64>().map_err(|_| syntax(*line, format!("bad coordinate '{t}'")))?;
            if !p[k].is_finite() {
                return Err(syntax(*line, "coordinates must be finite"));
            }
        }
        vertices.push(p);
        at += 1;
    }
    let (line, rest) = header(&lines, at, "cells")?;
    let nc = count(line, &rest, "cells")?;
    at += 1;
    let mut cells = Vec::with_capacity(nc * (dim + 1));
    for _ in 0..nc {
        let (line, toks) = lines.get(at).ok_or_else(|| syntax(0, format!("expected {nc} cell rows")))?;
        if toks.len() != dim + 1 {
            return Err(syntax(*line, format!("cell rows take {} indices", dim + 1)));
        }
        for t in toks {
            cells.push(t.parse::<usize>().map_err(|_| syntax(*line, format!("bad vertex index '{t}'")))?);
        }
        at += 1;
    }
    let boundary = match lines.get(at) {
        None => None,
        Some((line, toks)) if toks[0] == "boundary" => {
            if toks.len() > 1 {
                return Err(syntax(*line, "'boundary' takes no count"));
            }
            let flags: Vec<bool> = lines[at + 1..]
                .iter()
                .flat_map(|(line, toks)| toks.iter().map(move |t| (*line, *t)))
                .map(|(line, t)| match t {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    _ => Err(syntax(line, format!("boundary flag '{t}' is not 0 or 1"))),
                })
                .collect::<Result<_, _>>()?;
            if flags.len() != nv {
                return Err(MeshFileError::Invalid(format!("{} boundary flags for {nv} vertices", flags.len())));
            }
            at = lines.len();
            Some(flags)
        }
        Some((line, toks)) => return Err(syntax(*line, format!("unexpected '{}'", toks[0]))),
    };
    debug_assert!(at <= lines.len());
    PieceMesh::new(id, dim, vertices, cells, boundary, PieceMetric::EdgeGraph)
        .map_err(|e| MeshFileError::Invalid(e.to_string()))
}

pub fn read_mesh(path: &Path, id: usize) -> Result<PieceMesh, MeshFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| MeshFileError::Io(format!("{}: {e}", path.display())))?;
    parse_mesh(&text, id)
}

/// Inverse of [`parse_mesh`], with explicit boundary flags and full
/// precision coordinates.
pub fn write_mesh(mesh: &PieceMesh) -> String {
    let mut s = String::new();
    writeln!(s, "glueflow-mesh").unwrap();
    writeln!(s, "dim {}", mesh.dim).unwrap();
    writeln!(s, "vertices {}", mesh.n_vertices()).unwrap();
    for p in &mesh.vertices {
        writeln!(s, "{} {} {}", p[0], p[1], p[2]).unwrap();
    }
    writeln!(s, "cells {}", mesh.n_cells()).unwrap();
    for c in mesh.cells.chunks(mesh.dim + 1) {
        let row: Vec<String> = c.iter().map(|v| v.to_string()).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    writeln!(s, "boundary").unwrap();
    let flags: Vec<&str> = mesh.boundary.iter().map(|&b| if b { "1" } else { "0" }).collect();
    writeln!(s, "{}", flags.join(" ")).unwrap();
    s
}
