use glueflow_core::stochastic::{
    build_chain, crossing_statistics, flow_asymmetry, occupation_tv, path_rng, piece_partition, sample_path,
    sample_stationary, stationarity_test, CrossingRule, CrossingStatistics, JumpChain, TraceOptions, WalkTrace,
};
use serde_json::{json, Value};

use super::{nearest_dof, par_map, Context};
use crate::config::WalkTask;
use crate::error::RunError;
use crate::report::{jnum, num};

/// Master seed of ladder level `level`.
fn level_seed(seed: u64, level: usize) -> u64 {
    seed ^ (level as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

struct Sample {
    chain: JumpChain,
    start: Option<usize>,
    traces: Vec<WalkTrace>,
}

fn simulate(ctx: &Context<'_>, task: &WalkTask, level: usize, seed: u64, keep: usize) -> Result<Sample, RunError> {
    let (wc, system) = ctx.assemble(level)?;
    let chain = build_chain(&system, seed)?;
    let complex = &wc.complex;
    let rule = if task.exclusion > 0.0 {
        let all: Vec<usize> = complex.glue_maps.iter().flat_map(|m| m.dofs.iter().copied()).collect();
        CrossingRule { distance: Some(complex.distances_from_set(&all)), exclusion: task.exclusion }
    } else {
        CrossingRule::default()
    };
    let start = task.start.map(|p| nearest_dof(complex, p));
    let ids: Vec<usize> = (0..task.paths).collect();
    let traces = par_map(ctx.threads, &ids, |&i| {
        let mut rng = path_rng(seed, i as u64);
        let x0 = start.unwrap_or_else(|| sample_stationary(&chain, &mut rng));
        let opts = TraceOptions { keep_path: i < keep, keep_transitions: true };
        sample_path(&chain, x0, task.horizon, &mut rng, &rule, opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(Sample { chain, start, traces })
}

fn stats_json(s: &CrossingStatistics) -> Value {
    json!({
        "rate": jnum(s.rate),
        "ci": [jnum(s.ci.0), jnum(s.ci.1)],
        "level": jnum(s.level),
        "crossings": s.crossings,
        "time": jnum(s.time),
        "paths": s.paths,
    })
}

pub fn run(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let task = ctx.config.walk.clone().expect("checked by config");
    let seed = ctx.seed;
    let Sample { chain, start, traces } = simulate(ctx, &task, task.level, seed, task.export_traces)?;
    for (i, t) in traces.iter().take(task.export_traces).enumerate() {
        ctx.out.csv(
            &format!("trace_{i}.csv"),
            &["time", "dof", "piece"],
            t.path.iter().map(|&(time, x)| {
                let piece = chain.piece[x].map_or_else(|| "shared".to_string(), |p| p.to_string());
                vec![num(time), x.to_string(), piece]
            }),
        )?;
    }
    let crossings = crossing_statistics(&traces, task.resamples, task.confidence, seed)?;
    let partition = piece_partition(&chain);
    let tv = occupation_tv(&chain, &traces, &partition)?;
    let endpoints: Vec<usize> = traces.iter().map(|t| t.end).collect();
    let chi2 = stationarity_test(&chain, &endpoints, &partition, task.chi2_level)?;
    let classes = partition.iter().max().map_or(0, |m| m + 1);

    let mut ladder_out = Value::Null;
    if let Some(levels) = &task.levels {
        let c: &Context<'_> = ctx;
        let mut rows = Vec::with_capacity(levels.len());
        for &level in levels {
            let s = simulate(c, &task, level, level_seed(seed, level), 0)?;
            let st = crossing_statistics(&s.traces, task.resamples, task.confidence, level_seed(seed, level))?;
            rows.push((level, s.chain.len(), st));
        }
        ctx.out.csv(
            "crossing_ladder.csv",
            &["level", "dofs", "rate", "ci_low", "ci_high", "crossings"],
            rows.iter().map(|(l, n, s)| {
                vec![l.to_string(), n.to_string(), num(s.rate), num(s.ci.0), num(s.ci.1), s.crossings.to_string()]
            }),
        )?;
        let first = rows[0].2.rate;
        let last = rows[rows.len() - 1].2.rate;
        let ratio = if first > 0.0 { last / first } else { f64::NAN };
        let monotone = rows.windows(2).all(|w| w[1].2.rate < w[0].2.rate);
        let verdict = if ratio > task.stable_ratio {
            "stable"
        } else if monotone && ratio < task.decay_ratio {
            "decaying"
        } else {
            "inconclusive"
        };
        ladder_out = json!({
            "levels": levels,
            "rates": rows.iter().map(|r| jnum(r.2.rate)).collect::<Vec<_>>(),
            "ratio": jnum(ratio),
            "monotone_decay": monotone,
            "verdict": verdict,
            "stable_ratio": jnum(task.stable_ratio),
            "decay_ratio": jnum(task.decay_ratio),
        });
    }

    ctx.finish(json!({
        "level": task.level,
        "dofs": chain.len(),
        "paths": traces.len(),
        "horizon": jnum(task.horizon),
        "start": match start { Some(x) => json!(x), None => json!("stationary") },
        "detailed_balance_defect": jnum(chain.detailed_balance_defect()),
        "jumps": traces.iter().map(|t| t.jumps).sum::<usize>(),
        "crossings": stats_json(&crossings),
        "occupation_tv": jnum(tv),
        "partition": { "kind": "piece", "classes": classes },
        "stationarity": {
            "statistic": jnum(chi2.statistic),
            "dof": chi2.dof,
            "critical": jnum(chi2.critical),
            "level": jnum(chi2.level),
            "accepted": chi2.accepted,
        },
        "flow_asymmetry": jnum(flow_asymmetry(&traces)),
        "ladder": ladder_out,
    }))
}
