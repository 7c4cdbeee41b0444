use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dirichlet::assemble;
use crate::geometry::{
    build_disk_piece, build_segment_piece, default_tolerance, glue, GluedComplex, PieceMesh, Placement,
};
use crate::measure::{attach_weight, Anchor, WeightSpec, WeightedComplex};

fn complex_of(pieces: Vec<PieceMesh>) -> GluedComplex {
    let tol = default_tolerance(&pieces);
    glue(pieces, tol).unwrap()
}

fn system(pieces: Vec<PieceMesh>) -> DirichletSystem {
    assemble(&WeightedComplex::unweighted(complex_of(pieces))).unwrap()
}

fn interval(n: usize) -> DirichletSystem {
    system(vec![build_segment_piece(0, 1.0, n, Placement::identity()).unwrap()])
}

fn disk_with_segment(refinement: usize, alpha: Option<f64>) -> DirichletSystem {
    let disk = build_disk_piece(0, 1.0, refinement, Placement::identity()).unwrap();
    let seg = build_segment_piece(1, 2.0, 2 * refinement, Placement::along([0.0, 0.0, -1.0], [0.0, 0.0, 1.0]).unwrap())
        .unwrap();
    let c = complex_of(vec![disk, seg]);
    let wc = match alpha {
        Some(a) => attach_weight(&c, &WeightSpec::power(0, Anchor::Intersection(0), a)).unwrap(),
        None => WeightedComplex::unweighted(c),
    };
    assemble(&wc).unwrap()
}

/// Generalised eigenvalues through nalgebra on `M^{-1/2} K M^{-1/2}`.
fn oracle_values(s: &DirichletSystem) -> Vec<f64> {
    let n = s.dof_count();
    let k = s.stiffness.to_dense();
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| k[i][j] / (s.mass[i] * s.mass[j]).sqrt());
    let mut v: Vec<f64> = nalgebra::SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn krylov(count: usize) -> EigenOptions {
    EigenOptions { dense_limit: 0, ..EigenOptions::new(count) }
}

#[test]
fn neumann_interval_spectrum() {
    let s = interval(256);
    let rep = eigen(&s, EigenOptions::new(3)).unwrap();
    assert_eq!(rep.method, EigenMethod::Dense);
    assert!(rep.eigenvalues[0].abs() < 1e-9);
    assert!((rep.eigenvalues[1] - PI * PI).abs() < 5e-3 * PI * PI);
    assert_eq!(rep.kernel_dim, 1);
    assert_eq!(rep.gap, Some(rep.eigenvalues[1]));
}

#[test]
fn krylov_matches_dense_on_interval() {
    let s = interval(256);
    let d = eigen(&s, EigenOptions::new(5)).unwrap();
    let k = eigen(&s, krylov(5)).unwrap();
    assert_eq!(k.method, EigenMethod::BlockKrylov);
    for (a, b) in d.eigenvalues.iter().zip(&k.eigenvalues) {
        assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn krylov_resolves_double_eigenvalues_on_disk() {
    let s = disk_with_segment(6, Some(1.0));
    let oracle = oracle_values(&s);
    let rep = eigen(&s, krylov(8)).unwrap();
    for (j, (a, b)) in rep.eigenvalues.iter().zip(&oracle).enumerate() {
        assert!((a - b).abs() < 1e-7 * b.abs().max(1.0), "pair {j}: {a} vs {b}");
    }
    // rotational symmetry of the disk produces repeated values
    assert!(oracle[..8].windows(2).any(|w| (w[1] - w[0]).abs() < 1e-8 * w[1]));
}

#[test]
fn eigenvectors_are_orthonormal_with_small_residuals() {
    let s = disk_with_segment(8, None);
    for opts in [EigenOptions::new(6), krylov(6)] {
        let rep = eigen(&s, opts).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let g = s.inner_mu(&rep.eigenvectors[i], &rep.eigenvectors[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-8, "{:?} ({i},{j}): {g}", rep.method);
            }
            let knorm = norm2(&s.stiffness.mul_vec(&rep.eigenvectors[i]));
            assert!(rep.residuals[i] <= 1e-8 * knorm + rep.tol, "{:?} {i}", rep.method);
        }
    }
}

#[test]
fn disjoint_segments_have_two_dimensional_kernel() {
    let a = build_segment_piece(0, 1.0, 50, Placement::identity()).unwrap();
    let b = build_segment_piece(1, 1.0, 70, Placement::translation([0.0, 1.0, 0.0])).unwrap();
    let s = system(vec![a, b]);
    for opts in [EigenOptions::new(4), krylov(4)] {
        let rep = eigen(&s, opts).unwrap();
        assert_eq!(rep.kernel_dim, 2, "{:?}", rep.method);
        for v in &rep.eigenvectors[..2] {
            // constant on each component
            let (first, second) = v.split_at(51);
            assert!(first.iter().all(|x| (x - first[0]).abs() < 1e-8));
            assert!(second.iter().all(|x| (x - second[0]).abs() < 1e-8));
        }
    }
}

#[test]
fn kernel_dimension_counts_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..6 {
        let n_pieces = 2 + (rng.next_u64() % 3) as usize;
        let mut pieces = Vec::new();
        for p in 0..n_pieces {
            // segments along x at heights 0, 1, 2, ...; odd trials link
            // them with a vertical segment through x = 0.5
            let cells = 4 + (rng.next_u64() % 4) as usize * 2;
            let seg = build_segment_piece(p, 1.0, cells, Placement::translation([0.0, p as f64, 0.0])).unwrap();
            pieces.push(seg);
        }
        let linked = trial % 2 == 1;
        if linked {
            let id = pieces.len();
            let len = n_pieces as f64;
            let v = build_segment_piece(
                id,
                len,
                2 * n_pieces,
                Placement::along([0.5, -0.5, 0.0], [0.0, 1.0, 0.0]).unwrap(),
            )
            .unwrap();
            pieces.push(v);
        }
        let c = complex_of(pieces);
        let s = assemble(&WeightedComplex::unweighted(c.clone())).unwrap();
        let rep = kernel_dimension(&s).unwrap();
        assert_eq!(rep.kernel_dim, c.n_components, "trial {trial}");
        assert_eq!(c.n_components, if linked { 1 } else { n_pieces });
    }
}

#[test]
fn gap_inequality_on_zero_mean_vectors() {
    let s = disk_with_segment(6, Some(1.0));
    let rep = eigen(&s, EigenOptions::new(3)).unwrap();
    let l1 = rep.gap.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let mut u: Vec<f64> = (0..s.dof_count()).map(|_| (rng.next_u64() % 1000) as f64 / 1000.0).collect();
        let m = s.mean(&u);
        u.iter_mut().for_each(|x| *x -= m);
        assert!(s.energy(&u) >= l1 * s.inner_mu(&u, &u) * (1.0 - 1e-8));
    }
}

fn curve(values: &[f64]) -> Vec<GapPoint> {
    values
        .iter()
        .enumerate()
        .map(|(i, &l)| GapPoint { level: 16 << i, dofs: 0, lambda1: l, kernel_dim: 1, tol: 1e-9 })
        .collect()
}

#[test]
fn verdict_classes_on_synthetic_curves() {
    let t = ErgodicityThresholds::default();
    assert_eq!(ergodicity_verdict(curve(&[1.0, 0.9, 0.85, 0.84]), t).class, ErgodicityClass::Ergodic);
    assert_eq!(ergodicity_verdict(curve(&[1.0, 0.5, 0.25, 0.12]), t).class, ErgodicityClass::Degenerate);
    assert_eq!(ergodicity_verdict(curve(&[1.0, 0.6, 0.45]), t).class, ErgodicityClass::Inconclusive);
    // non-monotone collapse is not a consistent decay
    assert_eq!(ergodicity_verdict(curve(&[1.0, 0.05, 0.1]), t).class, ErgodicityClass::Inconclusive);
    assert_eq!(ergodicity_verdict(curve(&[1.0, 0.9]), t).class, ErgodicityClass::Inconclusive);
    let mut split = curve(&[1.0, 0.9, 0.8]);
    split[2].kernel_dim = 2;
    assert_ne!(ergodicity_verdict(split, t).class, ErgodicityClass::Ergodic);
    let strict = ErgodicityThresholds { ergodic_ratio: 0.9, degenerate_ratio: 0.2 };
    assert_eq!(ergodicity_verdict(curve(&[1.0, 0.9, 0.85]), strict).class, ErgodicityClass::Inconclusive);
}

#[test]
fn single_piece_ladder_is_ergodic() {
    let gaps: Vec<GapPoint> = [8, 16, 32].iter().map(|&r| gap_point(r, &interval(r)).unwrap()).collect();
    let v = ergodicity_verdict(gaps, ErgodicityThresholds::default());
    assert_eq!(v.class, ErgodicityClass::Ergodic);
    assert!((v.ratio - 1.0).abs() < 0.02);
}

#[test]
fn decay_rate_of_eigenvectors() {
    let s = interval(64);
    let rep = eigen(&s, EigenOptions::new(3)).unwrap();
    let tau = 1e-3;
    for j in [1, 2] {
        let fit = decay_fit(&s, &rep.eigenvectors[j], 0.2, tau).unwrap();
        // implicit Euler damps an eigenvector by 1 / (1 + lambda tau) per step
        let discrete = (1.0 + rep.eigenvalues[j] * tau).ln() / tau;
        assert!((fit.rate - discrete).abs() < 1e-6 * discrete, "j={j}: {} vs {discrete}", fit.rate);
        assert!((fit.rate - rep.eigenvalues[j]).abs() < 0.5 * rep.eigenvalues[j] * rep.eigenvalues[j] * tau + 1e-9);
    }
    assert!(decay_fit(&s, &vec![3.0; s.dof_count()], 0.1, tau).is_err());
}

#[test]
fn generic_datum_decays_no_slower_than_gap() {
    let s = interval(64);
    let rep = eigen(&s, EigenOptions::new(2)).unwrap();
    let f: Vec<f64> = (0..=64).map(|i| if i < 20 { 1.0 } else { 0.0 }).collect();
    let fit = decay_fit(&s, &f, 0.5, 1e-3).unwrap();
    let tau = 1e-3;
    let discrete = (1.0 + rep.eigenvalues[1] * tau).ln() / tau;
    assert!(fit.rate >= discrete * (1.0 - 1e-3));
}

#[test]
fn support_spreading() {
    let s = disk_with_segment(8, Some(1.0));
    let n = s.dof_count();
    let all: Vec<usize> = (0..n).collect();
    assert_eq!(support_spread(&s, &all, 0.3, 5).unwrap(), all);
    let rim = (0..n).find(|&x| (s.positions[x][0] - 1.0).abs() < 1e-12 && s.positions[x][2] == 0.0).unwrap();
    let early = support_spread(&s, &[rim], 0.01, 2).unwrap();
    let late = support_spread(&s, &[rim], 4.0, 20).unwrap();
    assert_eq!(late, all);
    assert!(early.iter().all(|x| late.contains(x)));

    let a = build_segment_piece(0, 1.0, 10, Placement::identity()).unwrap();
    let b = build_segment_piece(1, 1.0, 10, Placement::translation([0.0, 1.0, 0.0])).unwrap();
    let two = system(vec![a, b]);
    let spread = support_spread(&two, &[3], 10.0, 10).unwrap();
    assert_eq!(spread, (0..11).collect::<Vec<_>>());
}
