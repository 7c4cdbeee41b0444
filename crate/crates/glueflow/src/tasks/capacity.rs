use glueflow_core::capacity::{
    capacity_bounds, capacity_equivalence_check, classify_equivalence, relative_capacity, tube_model, BoundOptions,
    BoundVerdict, PieceCapacity, TubeModel,
};
use glueflow_core::geometry::GluedComplex;
use serde_json::{json, Value};

use super::{euclidean, nearest_dof, par_map, Context};
use crate::config::{BoundsConfig, CondenserConfig, EquivalenceConfig, Region};
use crate::error::RunError;
use crate::report::{jnum, num};

/// Relative slack on region radii, so that vertices placed exactly on a
/// radius fall on the intended side.
const SLACK: f64 = 1e-12;

/// Distance of every DOF from the region's centre set.
fn region_distance(complex: &GluedComplex, region: &Region) -> Result<Vec<f64>, RunError> {
    match (region.intersection, region.center) {
        (Some(id), _) => Ok(complex.distances_from_set(&complex.intersection(id)?.dofs)),
        (None, Some(c)) => Ok((0..complex.dof_count()).map(|x| euclidean(complex.position(x), c)).collect()),
        (None, None) => unreachable!("checked by config"),
    }
}

/// Closed plate; a point centre with zero radius is its nearest DOF.
fn plate(complex: &GluedComplex, region: &Region) -> Result<Vec<usize>, RunError> {
    if let (Some(c), true) = (region.center, region.radius == 0.0) {
        return Ok(vec![nearest_dof(complex, c)]);
    }
    let d = region_distance(complex, region)?;
    let r = region.radius * (1.0 + SLACK);
    Ok((0..d.len()).filter(|&x| d[x] <= r).collect())
}

/// Open domain.
fn domain(complex: &GluedComplex, region: &Region) -> Result<Vec<usize>, RunError> {
    let d = region_distance(complex, region)?;
    let r = region.radius * (1.0 - SLACK);
    Ok((0..d.len()).filter(|&x| d[x] < r).collect())
}

fn condenser(ctx: &mut Context<'_>, level: usize, k: &CondenserConfig) -> Result<Value, RunError> {
    let (wc, system) = ctx.assemble(level)?;
    let complex = &wc.complex;
    let k_set = plate(complex, &k.k)?;
    let omega = domain(complex, &k.omega)?;
    let res = relative_capacity(&system, &k_set, &omega)?;
    if k.export_potential {
        ctx.out.csv(
            "potential.csv",
            &["dof", "x", "y", "z", "u"],
            res.potential.iter().enumerate().map(|(x, &u)| {
                let p = complex.position(x);
                vec![x.to_string(), num(p[0]), num(p[1]), num(p[2]), num(u)]
            }),
        )?;
    }
    Ok(json!({
        "value": jnum(res.value),
        "certified": res.certified(),
        "k_dofs": res.k_set.len(),
        "omega_dofs": res.omega.len(),
        "dofs": complex.dof_count(),
        "residual": jnum(res.residual),
        "iterations": res.iterations,
        "harmonic_defect": jnum(res.harmonic_defect),
    }))
}

fn bounds(ctx: &mut Context<'_>, level: usize, b: &BoundsConfig) -> Result<Value, RunError> {
    let wc = ctx.instantiate(level)?;
    let model = tube_model(&wc, b.intersection, b.piece, b.radius, b.samples)?;
    let opts = BoundOptions { levels: b.levels, nodes: b.nodes, c: b.c, divergence_ratio: b.divergence_ratio };
    let ev = capacity_bounds(&model, b.radius, opts)?;
    ctx.out.csv(
        "bounds_integrand.csv",
        &["rho", "n", "mu", "integrand"],
        ev.integrand_table.iter().map(|r| vec![num(r.rho), num(r.n), num(r.mu), num(r.n * r.rho / r.mu)]),
    )?;
    let model_out = match &model {
        TubeModel::Power { codim, alpha, scale } => {
            json!({ "kind": "power", "codim": codim, "alpha": jnum(*alpha), "scale": jnum(*scale) })
        }
        TubeModel::Sampled(rows) => {
            ctx.out.csv("tube_samples.csv", &["rho", "mu"], rows.iter().map(|&(r, m)| vec![num(r), num(m)]))?;
            json!({ "kind": "sampled", "samples": rows.len() })
        }
    };
    Ok(json!({
        "model": model_out,
        "verdict": match ev.verdict { BoundVerdict::Finite => "finite", BoundVerdict::Divergent => "divergent" },
        "lower": jnum(ev.lower),
        "upper": jnum(ev.upper),
        "boundary_term": jnum(ev.boundary_term),
        "integral": jnum(ev.integral),
        "chain_sum": jnum(ev.chain_sum),
        "decay_ratio": jnum(ev.decay_ratio),
        "divergence_ratio": jnum(b.divergence_ratio),
        "c": jnum(ev.c),
        "note": "bounds hold up to unestimated comparability constants",
    }))
}

fn equivalence(ctx: &mut Context<'_>, q: &EquivalenceConfig) -> Result<Value, RunError> {
    let c: &Context<'_> = ctx;
    let rows = par_map(c.threads, &q.levels, |&level| -> Result<Vec<PieceCapacity>, RunError> {
        let (wc, system) = c.assemble(level)?;
        Ok(capacity_equivalence_check(&wc.complex, &system, q.intersection, q.radius)?)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<([usize; 2], [f64; 2], bool)> = rows
        .iter()
        .map(|c| ([c[0].piece, c[1].piece], [c[0].value, c[1].value], c[0].certified && c[1].certified))
        .collect();
    let pieces = rows[0].0;
    ctx.out.csv(
        "equivalence.csv",
        &["level", "side_a", "side_b"],
        q.levels.iter().zip(&rows).map(|(l, r)| vec![l.to_string(), num(r.1[0]), num(r.1[1])]),
    )?;
    let certified = rows.iter().all(|r| r.2);
    let ladder = classify_equivalence(q.levels.clone(), pieces, rows.into_iter().map(|r| r.1).collect(), q.ratio);
    Ok(json!({
        "pieces": ladder.pieces,
        "levels": ladder.levels,
        "values": ladder.values.iter().map(|v| [jnum(v[0]), jnum(v[1])]).collect::<Vec<_>>(),
        "stable": ladder.stable,
        "ratio": jnum(ladder.ratio),
        "mismatch": ladder.mismatch,
        "certified": certified,
    }))
}

pub fn run(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let task = ctx.config.capacity.clone().expect("checked by config");
    let mut results = json!({ "level": task.level });
    if let Some(k) = &task.condenser {
        results["condenser"] = condenser(ctx, task.level, k)?;
    }
    if let Some(b) = &task.bounds {
        results["bounds"] = bounds(ctx, task.level, b)?;
    }
    if let Some(q) = &task.equivalence {
        results["equivalence"] = equivalence(ctx, q)?;
    }
    ctx.finish(results)
}
