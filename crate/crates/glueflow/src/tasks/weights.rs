use glueflow_core::measure::{
    admissible_range, check_a2, check_l_muckenhoupt, check_n_doubling, ResolvedWeight, Verdict, WeightKind, WeightSpec,
};
use glueflow_core::space::SpaceSpec;
use serde_json::{json, Value};

use super::{nearest_dof, nearest_vertex, Context};
use crate::error::RunError;
use crate::report::{jnum, num};

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Satisfied => "satisfied",
        Verdict::Integrable => "integrable",
        Verdict::DivergentLooking => "divergent-looking",
        Verdict::Violated => "violated",
    }
}

/// The configured weight of `piece`, the last one winning; unit weight
/// when none is declared.
fn weight_of(space: &SpaceSpec, piece: usize) -> WeightSpec {
    space.weights.iter().rev().find(|w| w.piece == piece).cloned().unwrap_or_else(|| WeightSpec::constant(piece, 1.0))
}

pub fn run(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let task = ctx.config.check_weights.clone().expect("filled by config");
    // diagnostics of A2 and tube type need not see an admissible weight
    let bare = SpaceSpec { weights: Vec::new(), ..ctx.space.clone() }.instantiate(task.level)?;
    let complex = &bare.complex;

    let mut a2_out = Vec::new();
    for (i, probe) in task.a2.iter().enumerate() {
        let spec = weight_of(&ctx.space, probe.piece);
        let centers: Vec<usize> = probe.centers.iter().map(|&p| nearest_vertex(complex, probe.piece, p)).collect();
        let sample: Vec<(usize, f64)> =
            centers.iter().flat_map(|&c| probe.radii.iter().map(move |&r| (c, r))).collect();
        let rep = check_a2(complex, &spec, &sample)?;
        let name = format!("a2_{i}.csv");
        ctx.out.csv(
            &name,
            &["center", "r", "mean_weight", "mean_inverse", "value"],
            rep.samples
                .iter()
                .map(|s| vec![s.center.to_string(), num(s.r), num(s.mean_weight), num(s.mean_inverse), num(s.value)]),
        )?;
        a2_out.push(json!({
            "piece": probe.piece,
            "center_vertices": centers,
            "estimate": jnum(rep.estimate),
            "flagged": rep.flagged,
            "flagged_centers": rep.flagged_centers,
            "table": name,
        }));
    }

    let mut tube_out = Vec::new();
    for (i, probe) in task.tube.iter().enumerate() {
        let spec = weight_of(&ctx.space, probe.piece);
        let rep = check_l_muckenhoupt(complex, &spec, probe.intersection, &probe.radii)?;
        let name = format!("tube_{i}.csv");
        ctx.out.csv(
            &name,
            &["r", "weight_integral", "inverse_integral", "ratio"],
            rep.rows.iter().map(|r| vec![num(r.r), num(r.weight_integral), num(r.inverse_integral), num(r.ratio)]),
        )?;
        tube_out.push(json!({
            "piece": probe.piece,
            "intersection": probe.intersection,
            "spread": jnum(rep.spread),
            "verdict": verdict_name(rep.verdict),
            "table": name,
        }));
    }

    let ranges: Vec<Value> = ctx
        .space
        .weights
        .iter()
        .map(|w| {
            let n = complex.pieces[w.piece].dim;
            let k = match (&w.kind, ResolvedWeight::resolve(complex, w)) {
                (WeightKind::Power { .. }, Ok(ResolvedWeight::Power { k, .. })) => Some(k),
                _ => None,
            };
            match k {
                Some(k) => {
                    let (lo, hi) = admissible_range(n, k);
                    json!({ "piece": w.piece, "n": n, "k": k, "alpha_range": [jnum(lo), jnum(hi)] })
                }
                None => json!({ "piece": w.piece, "n": n }),
            }
        })
        .collect();

    let weighted = ctx.instantiate(task.level);
    let admissibility = match &weighted {
        Ok(_) => json!({ "admissible": true }),
        Err(e) => json!({ "admissible": false, "error": e.to_string() }),
    };

    let mut doubling_out = Value::Null;
    if let (Some(probe), Ok(wc)) = (&task.doubling, &weighted) {
        let centers: Vec<usize> = probe.centers.iter().map(|&p| nearest_dof(&wc.complex, p)).collect();
        let prof = check_n_doubling(wc, &centers, &probe.radii)?;
        ctx.out.csv(
            "doubling.csv",
            &["center", "r", "mu_r", "mu_3r", "ratio"],
            prof.doubling_table
                .iter()
                .map(|d| vec![d.center.to_string(), num(d.r), num(d.mu_r), num(d.mu_3r), num(d.ratio)]),
        )?;
        ctx.out.csv("n_fit.csv", &["rho", "n"], prof.n_fit.iter().map(|&(r, n)| vec![num(r), num(n)]))?;
        ctx.out.csv(
            "comparison.csv",
            &["center", "r", "ratio"],
            prof.comparison.iter().map(|c| vec![c.center.to_string(), num(c.r), num(c.ratio)]),
        )?;
        doubling_out = json!({
            "center_dofs": centers,
            "n_integral": jnum(prof.n_integral),
            "small_radius_slope": jnum(prof.small_radius_slope),
            "verdict": verdict_name(prof.verdict),
            "comparison_degenerate": prof.comparison_degenerate,
        });
    }

    ctx.finish(json!({
        "level": task.level,
        "heuristic": "verdicts are empirical envelopes over the sampled balls, not proofs",
        "weights": ranges,
        "admissibility": admissibility,
        "a2": a2_out,
        "tube": tube_out,
        "doubling": doubling_out,
    }))?;
    weighted.map(|_| ())
}
