//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if
//! any criterion fails. Reference values come from closed forms or from
//! oracles computed here, never from the code under test.
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use glueflow::tasks::par_map;
use glueflow_core::capacity::{
    capacity_bounds, capacity_equivalence_check, relative_capacity, tube_model, BoundOptions, BoundVerdict, TubeModel,
};
use glueflow_core::dirichlet::{assemble, uniform_schedule, DirichletSystem};
use glueflow_core::excess::{gamma_probe, ExcessConvention, ProbeOptions};
use glueflow_core::geometry::{GluedComplex, Placement};
use glueflow_core::measure::{admissible_range, Anchor, WeightSpec};
use glueflow_core::space::{PieceKind, PieceSpec, SpaceSpec};
use glueflow_core::spectral::{
    decay_fit, eigen, ergodicity_verdict, gap_point, kernel_dimension, EigenOptions, ErgodicityClass,
    ErgodicityThresholds,
};
use glueflow_core::stochastic::{
    build_chain, crossing_statistics, occupation_tv, path_rng, sample_endpoint, sample_path, sample_stationary,
    CrossingRule, TraceOptions,
};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

const LADDER: [usize; 4] = [16, 32, 64, 128];

fn threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn system(spec: &SpaceSpec, level: usize) -> Result<DirichletSystem, String> {
    let wc = spec.instantiate(level).map_err(|e| e.to_string())?;
    assemble(&wc).map_err(|e| e.to_string())
}

fn nearest(s: &DirichletSystem, p: [f64; 3]) -> usize {
    let d = |x: usize| (0..3).map(|k| (s.positions[x][k] - p[k]).powi(2)).sum::<f64>();
    (0..s.dof_count()).min_by(|&a, &b| d(a).total_cmp(&d(b))).unwrap()
}

fn c1_interval_spectrum() -> Outcome {
    let s = system(&SpaceSpec::interval(1.0), 256)?;
    let rep = eigen(&s, EigenOptions::new(3)).map_err(|e| e.to_string())?;
    let (l0, l1) = (rep.eigenvalues[0], rep.eigenvalues[1]);
    let dev = rel(l1, PI * PI);
    Ok((l0.abs() < 1e-9 && dev < 5e-3, format!("lambda0={l0:.3e} lambda1={l1:.6} rel.dev={dev:.2e}")))
}

/// Components of the edge graph, by union-find over cell vertices.
fn oracle_components(c: &GluedComplex) -> usize {
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let n = p[y];
            p[y] = r;
            y = n;
        }
        r
    }
    let n = c.dof_count();
    let mut parent: Vec<usize> = (0..n).collect();
    for (i, piece) in c.pieces.iter().enumerate() {
        let g = &c.global_dof[i];
        for cell in piece.cells.chunks(piece.dim + 1) {
            for w in cell.windows(2) {
                let (a, b) = (find(&mut parent, g[w[0]]), find(&mut parent, g[w[1]]));
                parent[a] = b;
            }
        }
    }
    (0..n).filter(|&x| find(&mut parent, x) == x).count()
}

/// A few clusters far apart; each is connected, glued, or split in two.
/// Returns the space and `(piece, alpha)` power weights around the glued
/// disk centres.
fn random_space(rng: &mut ChaCha8Rng) -> (SpaceSpec, Vec<(usize, f64)>) {
    let mut pieces = Vec::new();
    let mut weights = Vec::new();
    let clusters = 1 + rng.next_u64() % 4;
    for j in 0..clusters {
        let c = [6.0 * j as f64, 0.0, 0.0];
        let at = |dx: f64, dy: f64, dz: f64| [c[0] + dx, c[1] + dy, c[2] + dz];
        let seg = |o: [f64; 3], d: [f64; 3]| {
            PieceSpec::new(PieceKind::Segment { length: 2.0 }, Placement::along(o, d).unwrap())
        };
        match rng.next_u64() % 6 {
            0 => pieces.push(seg(at(-1.0, 0.0, 0.0), [1.0, 0.0, 0.0])),
            1 => pieces.push(PieceSpec::new(PieceKind::Disk { radius: 1.0 }, Placement::translation(c))),
            2 => {
                let alpha = ((rng.next_u64() % 13) as f64 - 6.0) * 0.25;
                weights.push((pieces.len(), alpha));
                pieces.push(PieceSpec::new(PieceKind::Disk { radius: 1.0 }, Placement::translation(c)));
                pieces.push(seg(at(0.0, 0.0, -1.0), [0.0, 0.0, 1.0]));
            }
            3 => {
                pieces.push(seg(at(-1.0, 0.0, 0.0), [1.0, 0.0, 0.0]));
                pieces.push(seg(at(0.0, -1.0, 0.0), [0.0, 1.0, 0.0]));
            }
            4 => pieces.push(PieceSpec::new(
                PieceKind::Rectangle { width: 2.0, height: 1.0 },
                Placement::translation(at(-1.0, -0.5, 0.0)),
            )),
            _ => {
                // segment beside the disk, not touching it
                pieces.push(PieceSpec::new(PieceKind::Disk { radius: 1.0 }, Placement::translation(c)));
                pieces.push(seg(at(2.0, 0.0, -1.0), [0.0, 0.0, 1.0]));
            }
        }
    }
    (SpaceSpec { pieces, weights: vec![], tolerance: None }, weights)
}

fn c2_kernel_connectivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let cases: Vec<_> = (0..20).map(|_| (random_space(&mut rng), 2 + (rng.next_u64() % 5) as usize)).collect();
    let results = par_map(threads(), &cases, |((spec, alphas), level)| -> Result<(usize, usize), String> {
        // weights are anchored on the intersection through their disk
        let bare = spec.instantiate(*level).map_err(|e| e.to_string())?;
        let mut spec = spec.clone();
        for &(piece, alpha) in alphas {
            let id = bare
                .complex
                .glue_maps
                .iter()
                .find(|g| g.piece_a == piece || g.piece_b == piece)
                .unwrap()
                .intersection_id;
            spec.weights.push(WeightSpec::power(piece, Anchor::Intersection(id), alpha));
        }
        let wc = spec.instantiate(*level).map_err(|e| e.to_string())?;
        let comps = oracle_components(&wc.complex);
        let s = assemble(&wc).map_err(|e| e.to_string())?;
        let k = kernel_dimension(&s).map_err(|e| e.to_string())?.kernel_dim;
        Ok((k, comps))
    });
    let mut bad = Vec::new();
    let mut seen = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (k, comps) = r?;
        seen.push(comps);
        if k != comps {
            bad.push(format!("case {i}: kernel {k} vs {comps} components"));
        }
    }
    let disconnected = seen.iter().filter(|&&c| c > 1).count();
    let detail = format!("20 configs, {disconnected} disconnected, components {seen:?}");
    Ok((bad.is_empty() && disconnected > 0 && disconnected < 20, if bad.is_empty() { detail } else { bad.join("; ") }))
}

fn c3_ergodicity() -> Outcome {
    let th = ErgodicityThresholds { ergodic_ratio: 0.5, degenerate_ratio: 0.2 };
    let jobs: Vec<(bool, usize)> = [true, false].iter().flat_map(|&w| LADDER.iter().map(move |&l| (w, l))).collect();
    let pts = par_map(threads(), &jobs, |&(weighted, level)| {
        let s = system(&SpaceSpec::disk_with_segment(weighted.then_some(1.0)), level)?;
        gap_point(level, &s).map_err(|e| e.to_string())
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let (w, u) = pts.split_at(LADDER.len());
    let vw = ergodicity_verdict(w.to_vec(), th);
    let vu = ergodicity_verdict(u.to_vec(), th);
    let lam = |v: &[glueflow_core::spectral::GapPoint]| {
        v.iter().map(|g| format!("{:.4}", g.lambda1)).collect::<Vec<_>>().join(",")
    };
    let ok = vw.class == ErgodicityClass::Ergodic
        && vw.ratio > 0.5
        && vu.class == ErgodicityClass::Degenerate
        && vu.ratio < 0.2;
    Ok((
        ok,
        format!(
            "weighted {:?} ratio={:.3} [{}]; unweighted {:?} ratio={:.3} [{}]",
            vw.class,
            vw.ratio,
            lam(w),
            vu.class,
            vu.ratio,
            lam(u)
        ),
    ))
}

fn c4_capacity() -> Outcome {
    let annulus = SpaceSpec {
        pieces: vec![PieceSpec::new(PieceKind::Annulus { inner: 0.1, outer: 1.0 }, Placement::identity())],
        weights: vec![],
        tolerance: None,
    };
    let s = system(&annulus, 128)?;
    let r = |x: usize| (s.positions[x][0].powi(2) + s.positions[x][1].powi(2)).sqrt();
    let k: Vec<usize> = (0..s.dof_count()).filter(|&x| r(x) <= 0.1 * (1.0 + 1e-12)).collect();
    let omega: Vec<usize> = (0..s.dof_count()).filter(|&x| r(x) < 1.0 - 1e-12).collect();
    let cap = relative_capacity(&s, &k, &omega).map_err(|e| e.to_string())?.value;
    let want = 2.0 * PI / 10f64.ln();
    let dev_annulus = rel(cap, want);

    let radius = 0.5;
    let jobs: Vec<(bool, usize)> = [true, false].iter().flat_map(|&w| LADDER.iter().map(move |&l| (w, l))).collect();
    let caps = par_map(threads(), &jobs, |&(weighted, level)| -> Result<f64, String> {
        let wc = SpaceSpec::disk_with_segment(weighted.then_some(1.0)).instantiate(level).map_err(|e| e.to_string())?;
        let s = assemble(&wc).map_err(|e| e.to_string())?;
        let c = capacity_equivalence_check(&wc.complex, &s, 0, radius).map_err(|e| e.to_string())?;
        Ok(c.iter().find(|p| p.piece == 0).unwrap().value)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let (w, u) = caps.split_at(LADDER.len());
    let dev_point = rel(w[w.len() - 1], 2.0 * PI / radius);
    let decays = u.windows(2).all(|p| p[1] < p[0]) && u.iter().all(|&v| v > 0.0);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",");
    Ok((
        dev_annulus < 0.03 && dev_point < 0.05 && decays,
        format!(
            "annulus {cap:.5} vs {want:.5} ({dev_annulus:.2e}); weighted point [{}] vs {:.4} ({dev_point:.2e}); unweighted [{}] monotone={decays}",
            fmt(w),
            2.0 * PI / radius,
            fmt(u)
        ),
    ))
}

fn c5_bound_thresholds() -> Outcome {
    let opts = BoundOptions::default();
    let mut bad = Vec::new();
    let mut checked = 0;
    for codim in [1usize, 2] {
        let threshold = codim as f64 - 2.0;
        // closed-form tube measures on the whole grid below codim
        let mut alpha = codim as f64 - 3.0;
        while alpha < codim as f64 - 1e-9 {
            let model = TubeModel::power(codim, alpha, 1.0).map_err(|e| e.to_string())?;
            let v = capacity_bounds(&model, 0.5, opts).map_err(|e| e.to_string())?.verdict;
            let want = if alpha > threshold { BoundVerdict::Finite } else { BoundVerdict::Divergent };
            checked += 1;
            if v != want {
                bad.push(format!("codim {codim} alpha {alpha}: {v:?}"));
            }
            alpha += 0.25;
        }
    }
    // tube measures taken from meshes: crossing segments (codim 1), disk + segment (codim 2)
    let crossing = |a: f64| SpaceSpec {
        pieces: vec![
            PieceSpec::new(
                PieceKind::Segment { length: 2.0 },
                Placement::along([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap(),
            ),
            PieceSpec::new(
                PieceKind::Segment { length: 2.0 },
                Placement::along([0.0, -1.0, 0.0], [0.0, 1.0, 0.0]).unwrap(),
            ),
        ],
        weights: vec![WeightSpec::power(0, Anchor::Intersection(0), a)],
        tolerance: None,
    };
    for (codim, n) in [(1usize, 1usize), (2, 2)] {
        let (lo, hi) = admissible_range(n, 0);
        let mut alpha = lo + 0.25;
        while alpha < hi - 1e-9 {
            let mut spec = if codim == 1 { crossing(alpha) } else { SpaceSpec::disk_with_segment(None) };
            spec.weights = vec![WeightSpec::power(0, Anchor::Intersection(0), alpha)];
            let wc = spec.instantiate(16).map_err(|e| e.to_string())?;
            let model = tube_model(&wc, 0, 0, 0.5, 24).map_err(|e| e.to_string())?;
            let v = capacity_bounds(&model, 0.5, opts).map_err(|e| e.to_string())?.verdict;
            let want = if alpha > codim as f64 - 2.0 { BoundVerdict::Finite } else { BoundVerdict::Divergent };
            checked += 1;
            if v != want {
                bad.push(format!("mesh codim {codim} alpha {alpha}: {v:?}"));
            }
            alpha += 0.25;
        }
    }
    Ok((
        bad.is_empty(),
        if bad.is_empty() { format!("{checked} grid points, flips at alpha = n-k-2") } else { bad.join("; ") },
    ))
}

fn c6_heat_structure() -> Outcome {
    let s = system(&SpaceSpec::interval(1.0), 256)?;
    let rep = eigen(&s, EigenOptions::new(2)).map_err(|e| e.to_string())?;
    let (phi1, lambda1) = (rep.eigenvectors[1].clone(), rep.eigenvalues[1]);
    let fit = decay_fit(&s, &phi1, 0.2, 1e-3).map_err(|e| e.to_string())?;
    let dev = rel(fit.rate, lambda1);

    // trajectories on the interval and on the weighted glued space
    let glued = system(&SpaceSpec::disk_with_segment(Some(1.0)), 16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noise: Vec<f64> = (0..glued.dof_count()).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64).collect();
    let mut worst_mass = 0.0f64;
    let mut monotone = true;
    for (sys, f0) in
        [(&s, phi1.clone()), (&s, s.positions.iter().map(|p| (p[0] < 0.3) as u8 as f64).collect()), (&glued, noise)]
    {
        let scale: f64 = sys.mass.iter().zip(&f0).map(|(m, v)| m * v.abs()).sum();
        let traj = sys.evolve(&f0, 0.2, &uniform_schedule(0.2, 200), false).map_err(|e| e.to_string())?;
        for w in traj.rows.windows(2) {
            worst_mass = worst_mass.max((w[1].mass - w[0].mass).abs() / scale);
            monotone &= w[1].energy <= w[0].energy * (1.0 + 1e-12) + 1e-300;
        }
    }
    Ok((
        worst_mass < 1e-10 && monotone && dev < 0.05,
        format!("max step mass error {worst_mass:.2e}, energy monotone {monotone}, decay rate {:.4} vs lambda1 {lambda1:.4} ({dev:.2e})", fit.rate),
    ))
}

fn c7_feynman_kac() -> Outcome {
    let s = system(&SpaceSpec::interval(1.0), 256)?;
    let f: Vec<f64> = s.positions.iter().map(|p| (PI * p[0]).cos() + 0.5 * p[0]).collect();
    let (horizon, paths) = (0.02, 100_000u64);
    let x0 = nearest(&s, [0.25, 0.0, 0.0]);
    let traj = s.evolve(&f, horizon, &uniform_schedule(horizon, 4000), false).map_err(|e| e.to_string())?;
    let want = traj.last().values[x0];
    let chain = build_chain(&s, 7).map_err(|e| e.to_string())?;
    let ids: Vec<u64> = (0..paths).collect();
    let vals = par_map(threads(), &ids, |&i| {
        let x = sample_endpoint(&chain, x0, horizon, &mut path_rng(7, i)).unwrap();
        f[x]
    });
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let z = (mean - want).abs() / se;
    Ok((z < 3.0, format!("MC {mean:.6} vs evolve {want:.6}, SE {se:.2e}, |z|={z:.2}")))
}

fn c8_occupation_crossing() -> Outcome {
    let level = 4;
    let s = system(&SpaceSpec::disk_with_segment(Some(1.0)), level)?;
    let lambda1 = gap_point(level, &s).map_err(|e| e.to_string())?.lambda1;
    let horizon = 10.0 / lambda1;
    let chain = build_chain(&s, 8).map_err(|e| e.to_string())?;
    let ids: Vec<u64> = (0..4000).collect();
    let traces = par_map(threads(), &ids, |&i| {
        let mut rng = path_rng(8, i);
        let x0 = sample_stationary(&chain, &mut rng);
        sample_path(&chain, x0, horizon, &mut rng, &CrossingRule::default(), TraceOptions::default()).unwrap()
    });
    let dofs: Vec<usize> = (0..chain.len()).collect();
    let tv = occupation_tv(&chain, &traces, &dofs).map_err(|e| e.to_string())?;

    let rates = par_map(threads(), &LADDER, |&level| -> Result<f64, String> {
        let s = system(&SpaceSpec::disk_with_segment(None), level)?;
        let seed = 80 ^ (level as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let chain = build_chain(&s, seed).map_err(|e| e.to_string())?;
        let traces: Vec<_> = (0..200)
            .map(|i| {
                let mut rng = path_rng(seed, i);
                let x0 = sample_stationary(&chain, &mut rng);
                sample_path(&chain, x0, 1.0, &mut rng, &CrossingRule::default(), TraceOptions::default()).unwrap()
            })
            .collect();
        Ok(crossing_statistics(&traces, 200, 0.95, seed).map_err(|e| e.to_string())?.rate)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let ratio = rates[rates.len() - 1] / rates[0];
    let rs = rates.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(",");
    Ok((
        tv < 0.05 && ratio < 0.2,
        format!("occupation TV {tv:.4} at T={horizon:.3}; unweighted crossing rates [{rs}] ratio={ratio:.3}"),
    ))
}

fn c9_heat_excess() -> Outcome {
    let hs = [1e-4, 4e-4, 1e-3, 4e-3, 1e-2];
    let opts = ProbeOptions { convention: ExcessConvention::Symmetric, ..ProbeOptions::default() };
    let one = |spec: SpaceSpec| -> Result<f64, String> {
        let wc = spec.instantiate(512).map_err(|e| e.to_string())?;
        let s = assemble(&wc).map_err(|e| e.to_string())?;
        let set: Vec<bool> = s.positions.iter().map(|p| p[0] <= 0.5 + 1e-12).collect();
        Ok(gamma_probe(&wc, &s, &set, &hs, opts).map_err(|e| e.to_string())?.extrapolated_limit)
    };
    let flat = 2.0 / PI.sqrt();
    let a1 = one(SpaceSpec::interval(1.0))?;
    let square = SpaceSpec {
        pieces: vec![PieceSpec::new(PieceKind::Rectangle { width: 1.0, height: 1.0 }, Placement::identity())],
        weights: vec![],
        tolerance: None,
    };
    // interface x = 1/2 has length 1
    let a2 = one(square)? / flat;
    let (d1, d2) = (rel(a1, flat), rel(a2, 1.0));
    Ok((
        d1 < 0.03 && d2 < 0.05,
        format!("1D limit {a1:.5} vs {flat:.5} ({d1:.2e}); 2D normalized {a2:.5} vs 1 ({d2:.2e})"),
    ))
}

fn run_config(config: &Path, out: &Path, threads: usize) -> Result<i32, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_glueflow"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    o.status.code().ok_or_else(|| "killed".into())
}

fn body_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map(|r| r.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| !p.ends_with("metadata.json")).collect())
        .unwrap_or_default();
    v.sort();
    v
}

fn c10_reproducible() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut configs: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    configs.sort();
    let mut bad = Vec::new();
    for c in &configs {
        let name = c.file_stem().unwrap().to_string_lossy().to_string();
        let (a, b) = (tmp.path().join(format!("{name}-a")), tmp.path().join(format!("{name}-b")));
        let ca = run_config(c, &a, 1)?;
        let cb = run_config(c, &b, threads().max(2))?;
        let (fa, fb) = (body_files(&a), body_files(&b));
        let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
        if ca != cb || fa.is_empty() || names(&fa) != names(&fb) {
            bad.push(format!("{name}: exit {ca}/{cb}, files differ"));
            continue;
        }
        if fa.iter().zip(&fb).any(|(x, y)| fs::read(x).ok() != fs::read(y).ok()) {
            bad.push(format!("{name}: bodies differ"));
        }
    }
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} configs, 1 vs {} threads", configs.len(), threads().max(2))
        } else {
            bad.join("; ")
        },
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("interval spectrum", c1_interval_spectrum),
        ("kernel dimension equals components", c2_kernel_connectivity),
        ("ergodicity dichotomy", c3_ergodicity),
        ("capacity oracles", c4_capacity),
        ("bound integral thresholds", c5_bound_thresholds),
        ("heat flow structure", c6_heat_structure),
        ("Feynman-Kac consistency", c7_feynman_kac),
        ("occupation and crossing dichotomy", c8_occupation_crossing),
        ("heat excess oracle", c9_heat_excess),
        ("reproducible reports", c10_reproducible),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
