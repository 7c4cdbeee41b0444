use glueflow_core::dirichlet::uniform_schedule;
use glueflow_core::spectral::{decay_fit, eigen, EigenMethod, EigenOptions};
use serde_json::{json, Value};

use super::Context;
use crate::config::InitialDatum;
use crate::error::RunError;
use crate::report::{jnum, jnums, num};

pub fn run(ctx: &mut Context<'_>) -> Result<(), RunError> {
    let task = ctx.config.spectrum.clone().expect("filled by config");
    let (_wc, system) = ctx.assemble(task.level)?;
    let n = system.dof_count();
    if n < 2 {
        return Err(RunError::Config("spectrum needs at least two DOFs".into()));
    }
    let rep = eigen(&system, EigenOptions::new(task.count.min(n - 1)))?;
    ctx.out.csv(
        "eigenvalues.csv",
        &["index", "eigenvalue", "residual"],
        rep.eigenvalues.iter().zip(&rep.residuals).enumerate().map(|(i, (&l, &r))| vec![i.to_string(), num(l), num(r)]),
    )?;
    if task.export_matrices {
        ctx.out.triplets("stiffness.triplets", &system.stiffness)?;
        ctx.out.diagonal_triplets("mass.triplets", &system.mass)?;
    }

    let mut flow_out = Value::Null;
    if let Some(flow) = &task.flow {
        let (f0, lambda) = match flow.initial {
            InitialDatum::Phi1 => {
                let i = rep.kernel_dim;
                if i >= rep.eigenvalues.len() {
                    return Err(RunError::Config(format!(
                        "no nonconstant eigenvector among {} computed pairs; raise spectrum.count",
                        rep.eigenvalues.len()
                    )));
                }
                (rep.eigenvectors[i].clone(), Some(rep.eigenvalues[i]))
            }
            InitialDatum::Coordinate => (system.positions.iter().map(|p| p[flow.axis]).collect::<Vec<f64>>(), None),
        };
        let steps = (flow.horizon / flow.tau).round().max(1.0) as usize;
        let traj = system.evolve(&f0, flow.horizon, &uniform_schedule(flow.horizon, steps), false)?;
        ctx.out.csv(
            "trajectory.csv",
            &["time", "mass", "energy", "min", "max", "deviation"],
            traj.rows
                .iter()
                .map(|r| vec![num(r.time), num(r.mass), num(r.energy), num(r.min), num(r.max), num(r.deviation)]),
        )?;
        // mass drift is measured against the total variation of f0 so that
        // mean-zero data get a meaningful scale
        let scale: f64 = f0.iter().zip(&system.mass).map(|(f, m)| f.abs() * m).sum();
        let mass_error = traj.rows.windows(2).map(|w| (w[1].mass - w[0].mass).abs() / scale).fold(0.0, f64::max);
        let energy_monotone = traj.rows.windows(2).all(|w| w[1].energy <= w[0].energy * (1.0 + 1e-12) + 1e-300);
        let fit = decay_fit(&system, &f0, flow.horizon, flow.tau)?;
        flow_out = json!({
            "steps": steps,
            "max_step_mass_error": jnum(mass_error),
            "energy_monotone": energy_monotone,
            "decay_rate": jnum(fit.rate),
            "fit_window": [jnum(fit.window.0), jnum(fit.window.1)],
            "early_stop": fit.early_stop,
            "reference_eigenvalue": lambda.map(jnum),
            "relative_deviation": lambda.map(|l| jnum((fit.rate - l).abs() / l)),
        });
    }

    ctx.finish(json!({
        "level": task.level,
        "dofs": n,
        "eigenvalues": jnums(&rep.eigenvalues),
        "residuals": jnums(&rep.residuals),
        "kernel_dim": rep.kernel_dim,
        "kernel_tolerance": jnum(rep.tol),
        "gap": rep.gap.map(jnum),
        "method": match rep.method { EigenMethod::Dense => "dense", EigenMethod::BlockKrylov => "block-krylov" },
        "linear_solves": rep.solves,
        "flow": flow_out,
    }))
}
