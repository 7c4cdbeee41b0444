use glueflow_core::geometry::PieceMetric;
use glueflow_core::measure::ResolvedWeight;
use serde_json::{json, Value};

use super::Context;
use crate::error::RunError;
use crate::report::{jnum, num};

fn weight_summary(w: &ResolvedWeight) -> Value {
    match w {
        ResolvedWeight::Constant(c) => json!({ "kind": "constant", "value": jnum(*c) }),
        ResolvedWeight::Power { alpha, n, k, vertices, .. } => {
            json!({ "kind": "power", "alpha": jnum(*alpha), "n": n, "k": k, "anchor_vertices": vertices.len() })
        }
        ResolvedWeight::Tabulated(v) => json!({ "kind": "tabulated", "values": v.len() }),
    }
}

pub fn run(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let task = ctx.config.build.clone().expect("filled by config");
    let (wc, system) = ctx.assemble(task.level)?;
    let c = &wc.complex;
    let pieces: Vec<Value> = c
        .pieces
        .iter()
        .enumerate()
        .map(|(i, p)| {
            json!({
                "id": i,
                "dim": p.dim,
                "vertices": p.n_vertices(),
                "cells": p.n_cells(),
                "boundary_vertices": p.boundary.iter().filter(|&&b| b).count(),
                "volume": jnum(p.volume()),
                "mass": jnum(wc.piece_mass(i)),
                "metric": match p.metric { PieceMetric::Euclidean => "euclidean", PieceMetric::EdgeGraph => "edge-graph" },
                "weight": weight_summary(&wc.weights[i]),
                "max_cell_diameter": jnum(p.max_cell_diameter()),
            })
        })
        .collect();
    let intersections: Vec<Value> = c
        .glue_maps
        .iter()
        .map(|m| json!({ "id": m.intersection_id, "pieces": [m.piece_a, m.piece_b], "k": m.k, "dofs": m.dofs.len() }))
        .collect();
    ctx.out.csv(
        "dofs.csv",
        &["dof", "x", "y", "z", "mass", "pieces"],
        (0..c.dof_count()).map(|x| {
            let p = c.position(x);
            let owners: Vec<String> = c.pieces_of(x).map(|i| i.to_string()).collect();
            vec![x.to_string(), num(p[0]), num(p[1]), num(p[2]), num(system.mass[x]), owners.join(" ")]
        }),
    )?;
    if task.export_matrices {
        ctx.out.triplets("stiffness.triplets", &system.stiffness)?;
        ctx.out.diagonal_triplets("mass.triplets", &system.mass)?;
    }
    let results = json!({
        "level": task.level,
        "dofs": c.dof_count(),
        "components": c.n_components,
        "connected": c.is_connected(),
        "glue_tolerance": jnum(c.tolerance),
        "total_mass": jnum(wc.total_mass()),
        "pieces": pieces,
        "intersections": intersections,
        "stiffness_nnz": system.stiffness.nnz(),
        "m_matrix": system.is_m_matrix(),
        "positive_off_diagonals": system.violations.len(),
    });
    ctx.finish(results)
}
