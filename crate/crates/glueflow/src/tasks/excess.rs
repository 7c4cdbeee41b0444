use glueflow_core::excess::{
    convention_note, discrete_perimeter, gamma_probe, ExcessConvention, ExcessCurve, ProbeOptions,
};
use glueflow_core::geometry::GluedComplex;
use serde_json::{json, Value};

use super::{par_map, Context};
use crate::config::{ConventionName, SetConfig};
use crate::error::RunError;
use crate::report::{jnum, num};

fn indicator(complex: &GluedComplex, set: &SetConfig) -> Vec<bool> {
    let n = set.normal;
    // vertices placed exactly on the cut belong to U
    let tol = 1e-12 * (1.0 + set.offset.abs());
    (0..complex.dof_count())
        .map(|x| {
            let p = complex.position(x);
            let inside = (0..3).map(|k| n[k] * p[k]).sum::<f64>() <= set.offset + tol;
            let owned = set.pieces.as_ref().is_none_or(|ps| complex.pieces_of(x).any(|q| ps.contains(&q)));
            inside && owned
        })
        .collect()
}

fn verdict(curve: &ExcessCurve, glued: bool, tolerance: f64) -> &'static str {
    if glued {
        return "reported";
    }
    match curve.deviation {
        None if curve.samples.iter().all(|s| s.symmetric == 0.0) => "exact",
        None => "fail",
        Some(d) if d <= tolerance => "pass",
        Some(_) => "fail",
    }
}

pub fn run(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let task = ctx.config.excess.clone().expect("checked by config");
    let (wc, system) = ctx.assemble(task.level)?;
    let convention = match task.convention {
        ConventionName::Symmetric => ExcessConvention::Symmetric,
        ConventionName::OneSided => ExcessConvention::OneSided,
    };
    let opts = ProbeOptions { substeps: task.substeps, min_resolution: task.min_resolution, convention };
    let glued = !wc.complex.glue_maps.is_empty();
    let masks: Vec<Vec<bool>> = task.sets.iter().map(|s| indicator(&wc.complex, s)).collect();
    let curves = par_map(ctx.threads, &masks, |m| gamma_probe(&wc, &system, m, &task.h, opts))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut sets_out: Vec<Value> = Vec::with_capacity(curves.len());
    for ((set, mask), curve) in task.sets.iter().zip(&masks).zip(&curves) {
        let name = format!("curve_{}.csv", set.name);
        ctx.out.csv(
            &name,
            &["h", "excess", "excess_over_sqrt_h", "normalized", "symmetric", "one_sided"],
            curve.samples.iter().map(|s| {
                vec![
                    num(s.h),
                    num(s.ratio * s.h.sqrt()),
                    num(s.ratio),
                    num(s.normalized),
                    num(s.symmetric),
                    num(s.one_sided),
                ]
            }),
        )?;
        let perimeter = discrete_perimeter(&wc, mask)?;
        sets_out.push(json!({
            "name": set.name,
            "dofs": mask.iter().filter(|&&b| b).count(),
            "extrapolated_limit": jnum(curve.extrapolated_limit),
            "normalized_limit": jnum(curve.extrapolated_limit / curve.normalization),
            "slope": jnum(curve.slope),
            "fit_residual": jnum(curve.fit_residual),
            "reference_perimeter": jnum(curve.reference_perimeter),
            "perimeter_per_piece": perimeter.per_piece.iter().map(|&v| jnum(v)).collect::<Vec<_>>(),
            "snapped_dofs": perimeter.snapped,
            "deviation": curve.deviation.map(jnum),
            "verdict": verdict(curve, glued, task.tolerance),
            "table": name,
        }));
    }
    ctx.finish(json!({
        "level": task.level,
        "convention": convention.name(),
        "normalization": jnum(curves[0].normalization),
        "convention_note": convention_note(convention),
        "glued": glued,
        "tolerance": jnum(task.tolerance),
        "sets": sets_out,
    }))
}
