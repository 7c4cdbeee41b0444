use glueflow_core::spectral::{ergodicity_verdict, gap_point, ErgodicityClass, ErgodicityThresholds, GapPoint};
use serde_json::json;

use super::{par_map, Context};
use crate::error::RunError;
use crate::report::{jnum, num};

pub fn run(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let task = ctx.config.ergodicity.clone().expect("filled by config");
    let c: &Context<'_> = ctx;
    let gaps = par_map(c.threads, &task.levels, |&level| -> Result<GapPoint, RunError> {
        let (_wc, system) = c.assemble(level)?;
        Ok(gap_point(level, &system)?)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    ctx.out.csv(
        "gap_curve.csv",
        &["level", "dofs", "lambda1", "kernel_dim", "tol"],
        gaps.iter().map(|g| {
            vec![g.level.to_string(), g.dofs.to_string(), num(g.lambda1), g.kernel_dim.to_string(), num(g.tol)]
        }),
    )?;
    let thresholds =
        ErgodicityThresholds { ergodic_ratio: task.ergodic_ratio, degenerate_ratio: task.degenerate_ratio };
    let v = ergodicity_verdict(gaps, thresholds);
    ctx.finish(json!({
        "verdict": match v.class {
            ErgodicityClass::Ergodic => "ergodic",
            ErgodicityClass::Degenerate => "degenerate",
            ErgodicityClass::Inconclusive => "inconclusive",
        },
        "ratio": jnum(v.ratio),
        "monotone_decay": v.monotone_decay,
        "thresholds": { "ergodic_ratio": jnum(v.thresholds.ergodic_ratio), "degenerate_ratio": jnum(v.thresholds.degenerate_ratio) },
        "levels": task.levels,
        "lambda1": v.gaps.iter().map(|g| jnum(g.lambda1)).collect::<Vec<_>>(),
        "kernel_dims": v.gaps.iter().map(|g| g.kernel_dim).collect::<Vec<_>>(),
    }))
}
