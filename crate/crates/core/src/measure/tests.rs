use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{
    build_disk_piece, build_rectangle_piece, build_segment_piece, default_tolerance, glue, PieceMetric, Placement,
};

fn complex_of(pieces: Vec<PieceMesh>) -> GluedComplex {
    let tol = default_tolerance(&pieces);
    glue(pieces, tol).unwrap()
}

fn disk_alone(refinement: usize) -> GluedComplex {
    complex_of(vec![build_disk_piece(0, 1.0, refinement, Placement::identity()).unwrap()])
}

fn disk_with_axis_segment(refinement: usize) -> GluedComplex {
    let disk = build_disk_piece(0, 1.0, refinement, Placement::identity()).unwrap();
    let seg = build_segment_piece(1, 2.0, 2 * refinement, Placement::along([0.0, 0.0, -1.0], [0.0, 0.0, 1.0]).unwrap())
        .unwrap();
    complex_of(vec![disk, seg])
}

/// Flat square `[-1,1]^2` with a vertical tube glued along the loop
/// `max(|x|,|y|) = 1/2`, a one-dimensional intersection. Two corners of
/// the loop are cut along mesh diagonals so the loop bounds no triangle.
fn square_with_tube(per_side: usize) -> (GluedComplex, f64) {
    let n = 2 * per_side;
    let rect = build_rectangle_piece(0, 2.0, 2.0, n, n, Placement::translation([-1.0, -1.0, 0.0])).unwrap();
    let h = 1.0 / per_side as f64;
    let mut ring: Vec<[f64; 2]> = Vec::new();
    for side in 0..4 {
        for i in 0..per_side {
            let t = i as f64 * h;
            let p = match side {
                0 => [-0.5 + t, -0.5],
                1 => [0.5, -0.5 + t],
                2 => [0.5 - t, 0.5],
                _ => [-0.5, 0.5 - t],
            };
            if !(i == 0 && (side == 1 || side == 3)) {
                ring.push(p);
            }
        }
    }
    let m = ring.len();
    let loop_length: f64 = (0..m)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % m]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        })
        .sum();
    let layers = per_side;
    let mut vertices = Vec::new();
    for l in 0..=layers {
        for p in &ring {
            vertices.push([p[0], p[1], -0.5 + l as f64 * h]);
        }
    }
    let id = |i: usize, l: usize| l * m + (i % m);
    let mut cells = Vec::new();
    for l in 0..layers {
        for i in 0..m {
            cells.extend_from_slice(&[id(i, l), id(i + 1, l), id(i + 1, l + 1)]);
            cells.extend_from_slice(&[id(i, l), id(i + 1, l + 1), id(i, l + 1)]);
        }
    }
    let tube = PieceMesh::new(1, 2, vertices, cells, None, PieceMetric::Euclidean).unwrap();
    (complex_of(vec![rect, tube]), loop_length)
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn unit_weight_disk_total_is_polygon_area() {
    let r = 64;
    let wc = WeightedComplex::unweighted(disk_alone(r));
    let m = (8 * r) as f64;
    let polygon = 0.5 * m * (2.0 * PI / m).sin();
    assert!((wc.total_mass() - polygon).abs() < 1e-12);
    assert!((wc.total_mass() - PI).abs() < 1e-3 * PI);
}

#[test]
fn inverse_distance_ball_at_anchor_is_linear() {
    let c = disk_alone(64);
    let wc = attach_weight(&c, &WeightSpec::power(0, Anchor::Vertices(vec![0]), 1.0)).unwrap();
    for r in [0.1, 0.25, 0.5, 0.9] {
        let mu = mu_ball(&wc, 0, r).unwrap();
        let exact = 2.0 * PI * r;
        assert!((mu - exact).abs() < 0.02 * exact, "r={r}: {mu} vs {exact}");
    }
}

#[test]
fn power_weight_balls_match_radial_integral() {
    let c = disk_alone(64);
    for alpha in [-1.5, -0.5, 0.5, 1.5] {
        let wc = attach_weight(&c, &WeightSpec::power(0, Anchor::Vertices(vec![0]), alpha)).unwrap();
        for r in [0.2, 0.6] {
            let exact = 2.0 * PI * Float::powf(r, 2.0 - alpha) / (2.0 - alpha);
            let mu = mu_ball(&wc, 0, r).unwrap();
            assert!((mu - exact).abs() < 0.02 * exact, "alpha={alpha} r={r}: {mu} vs {exact}");
        }
    }
}

#[test]
fn exponent_at_codimension_is_rejected() {
    let c = disk_alone(8);
    for alpha in [2.0, -2.0, 3.0] {
        let err = attach_weight(&c, &WeightSpec::power(0, Anchor::Vertices(vec![0]), alpha)).unwrap_err();
        assert_eq!(err, Error::NonIntegrableWeight { alpha, lo: -2.0, hi: 2.0 });
    }
}

#[test]
fn invalid_weights_are_rejected() {
    let c = disk_alone(2);
    assert!(attach_weight(&c, &WeightSpec::constant(0, 0.0)).is_err());
    assert!(attach_weight(&c, &WeightSpec::constant(3, 1.0)).is_err());
    assert!(attach_weight(&c, &WeightSpec::tabulated(0, vec![1.0; 3])).is_err());
    let n = c.pieces[0].n_vertices();
    let mut t = vec![1.0; n];
    t[1] = -1.0;
    assert!(attach_weight(&c, &WeightSpec::tabulated(0, t)).is_err());
    assert!(attach_weight(&c, &WeightSpec::power(0, Anchor::Intersection(0), 1.0)).is_err());
}

#[test]
fn segment_ball_at_midpoint() {
    let c = complex_of(vec![build_segment_piece(0, 2.0, 8, Placement::identity()).unwrap()]);
    let wc = WeightedComplex::unweighted(c);
    assert!((mu_ball(&wc, 4, 0.5).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn junction_ball_with_singular_disk_weight() {
    let c = disk_with_axis_segment(64);
    let wc = attach_weight(&c, &WeightSpec::power(0, Anchor::Intersection(0), 1.0)).unwrap();
    let junction = c.glue_maps[0].dofs[0];
    let mu = mu_ball(&wc, junction, 0.25).unwrap();
    let exact = 2.0 * PI * 0.25 + 2.0 * 0.25;
    assert!((mu - exact).abs() < 0.02 * exact, "{mu} vs {exact}");
}

#[test]
fn large_ball_is_total_mass() {
    let c = disk_with_axis_segment(8);
    let wc = attach_weight(&c, &WeightSpec::power(0, Anchor::Intersection(0), 0.5)).unwrap();
    let total = wc.piece_mass(0) + wc.piece_mass(1);
    assert!((mu_ball(&wc, 5, 10.0).unwrap() - total).abs() < 1e-12 * total);
    assert!((mu_ball(&wc, 5, f64::INFINITY).unwrap() - total).abs() < 1e-12 * total);
    let lumped: f64 = wc.lumped_mass().iter().sum();
    assert!((lumped - total).abs() < 1e-12 * total);
}

#[test]
fn ball_measure_is_monotone() {
    let c = disk_with_axis_segment(8);
    let wc = attach_weight(&c, &WeightSpec::power(0, Anchor::Intersection(0), 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let x = (rng.next_u64() % c.dof_count() as u64) as usize;
        let r1 = 2.0 * uniform(&mut rng) + 1e-3;
        let r2 = r1 + uniform(&mut rng);
        assert!(mu_ball(&wc, x, r1).unwrap() <= mu_ball(&wc, x, r2).unwrap());
    }
}

#[test]
fn covered_fraction_matches_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let d = [uniform(&mut rng), uniform(&mut rng), uniform(&mut rng)];
        let r = uniform(&mut rng);
        let exact = covered_fraction(&mut d.clone(), r);
        // midpoint grid over the reference triangle
        let n = 400;
        let (mut hit, mut all) = (0usize, 0usize);
        for i in 0..n {
            for j in 0..n - i {
                let s = (i as f64 + 1.0 / 3.0) / n as f64;
                let t = (j as f64 + 1.0 / 3.0) / n as f64;
                let v = (1.0 - s - t) * d[0] + s * d[1] + t * d[2];
                all += 1;
                if v <= r {
                    hit += 1;
                }
            }
        }
        assert!((exact - hit as f64 / all as f64).abs() < 1e-2, "{d:?} r={r}");
    }
}

#[test]
fn unit_weight_a2_is_one() {
    let c = disk_alone(8);
    let sample: Vec<(usize, f64)> = [0usize, 3, 40].iter().flat_map(|&v| [(v, 0.2), (v, 0.6)]).collect();
    let rep = check_a2(&c, &WeightSpec::constant(0, 1.0), &sample).unwrap();
    assert_eq!(rep.estimate, 1.0);
    assert!(rep.samples.iter().all(|s| s.value == 1.0));
    assert!(!rep.flagged);
}

#[test]
fn linear_growth_weight_has_bounded_a2() {
    // omega = |x|: (mean |x|)(mean 1/|x|) = (2r/3)(2/r) = 4/3 on centred balls
    let c = disk_alone(32);
    let sample: Vec<(usize, f64)> = [0.8, 0.4, 0.2, 0.1].iter().map(|&r| (0, r)).collect();
    let rep = check_a2(&c, &WeightSpec::power(0, Anchor::Vertices(vec![0]), -1.0), &sample).unwrap();
    for s in &rep.samples {
        assert!((s.value - 4.0 / 3.0).abs() < 0.03, "r={}: {}", s.r, s.value);
    }
    assert!(!rep.flagged);
}

#[test]
fn codimension_power_weight_is_flagged() {
    let c = disk_alone(16);
    let sample: Vec<(usize, f64)> = [0.8, 0.4, 0.2].iter().map(|&r| (0, r)).collect();
    for alpha in [-2.0, -2.5] {
        let rep = check_a2(&c, &WeightSpec::power(0, Anchor::Vertices(vec![0]), alpha), &sample).unwrap();
        assert!(rep.flagged, "alpha={alpha}");
        assert_eq!(rep.flagged_centers, vec![0]);
    }
}

#[test]
fn a2_of_weight_and_inverse_is_at_least_one() {
    let c = disk_alone(8);
    let n = c.pieces[0].n_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sample: Vec<(usize, f64)> =
        (0..30).map(|_| ((rng.next_u64() % n as u64) as usize, 0.05 + uniform(&mut rng))).collect();
    for trial in 0..4 {
        let t: Vec<f64> = (0..n).map(|_| 0.01 + 10.0 * uniform(&mut rng)).collect();
        let inv: Vec<f64> = t.iter().map(|x| 1.0 / x).collect();
        let a = check_a2(&c, &WeightSpec::tabulated(0, t), &sample).unwrap();
        let b = check_a2(&c, &WeightSpec::tabulated(0, inv), &sample).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!(x.value >= 1.0 && y.value >= 1.0, "trial {trial}: {} {}", x.value, y.value);
            assert!(x.value * y.value >= 1.0);
        }
        let alpha = 3.8 * uniform(&mut rng) - 1.9;
        let p = check_a2(&c, &WeightSpec::power(0, Anchor::Vertices(vec![0]), alpha), &sample).unwrap();
        let q = check_a2(&c, &WeightSpec::power(0, Anchor::Vertices(vec![0]), -alpha), &sample).unwrap();
        for (x, y) in p.samples.iter().zip(&q.samples) {
            assert!(x.value * y.value >= 1.0, "alpha={alpha}: {} {}", x.value, y.value);
        }
    }
}

#[test]
fn segment_doubling_is_lebesgue() {
    let c = complex_of(vec![build_segment_piece(0, 4.0, 64, Placement::identity()).unwrap()]);
    let wc = WeightedComplex::unweighted(c);
    let prof = check_n_doubling(&wc, &[8, 32, 60], &[0.05, 0.1, 0.2, 0.4]).unwrap();
    for row in &prof.doubling_table {
        assert!(row.ratio >= 1.0 && row.ratio <= 3.0 + 1e-12, "{row:?}");
    }
    assert_eq!(prof.verdict, Verdict::Integrable);
    assert!(prof.n_integral.is_finite());
    assert!(prof.comparison.is_empty());
    assert!(prof.ball_table.windows(2).all(|w| w[0].1 <= w[1].1));
}

#[test]
fn singular_disk_with_segment_doubles_with_constant_three() {
    let c = disk_with_axis_segment(64);
    let wc = attach_weight(&c, &WeightSpec::power(0, Anchor::Intersection(0), 1.0)).unwrap();
    let junction = c.glue_maps[0].dofs[0];
    let prof = check_n_doubling(&wc, &[junction], &[0.05, 0.1, 0.2]).unwrap();
    for row in &prof.doubling_table {
        assert!((row.ratio - 3.0).abs() < 0.1, "{row:?}");
    }
    assert!(!prof.comparison_degenerate);
    for row in &prof.comparison {
        // 2 pi r against 2 r
        assert!((row.ratio - 1.0 / PI).abs() < 0.02, "{row:?}");
    }
}

#[test]
fn unweighted_disk_with_segment_comparison_degenerates() {
    let c = disk_with_axis_segment(64);
    let wc = WeightedComplex::unweighted(c.clone());
    let junction = c.glue_maps[0].dofs[0];
    let radii = [0.05, 0.1, 0.2, 0.3];
    let prof = check_n_doubling(&wc, &[junction], &radii).unwrap();
    for row in &prof.doubling_table {
        let r = row.r;
        let oracle = (9.0 * PI * r * r + 6.0 * r) / (PI * r * r + 2.0 * r);
        assert!((row.ratio - oracle).abs() < 0.03 * oracle, "{row:?} vs {oracle}");
    }
    assert!(prof.comparison_degenerate);
    for row in &prof.comparison {
        assert!((row.ratio - PI * row.r / 2.0).abs() < 0.03 * row.ratio, "{row:?}");
    }
}

#[test]
fn more_centres_never_lower_the_envelope() {
    let c = disk_with_axis_segment(8);
    let wc = WeightedComplex::unweighted(c);
    let radii = [0.1, 0.2, 0.4];
    let a = check_n_doubling(&wc, &[0, 10], &radii).unwrap();
    let b = check_n_doubling(&wc, &[0, 10, 50, 120], &radii).unwrap();
    for (x, y) in a.n_fit.iter().zip(&b.n_fit) {
        assert_eq!(x.0, y.0);
        assert!(y.1 >= x.1);
    }
}

#[test]
fn tube_ratio_point_anchor() {
    let c = disk_with_axis_segment(64);
    let sweep = [0.1, 0.2, 0.4];
    let flat = check_l_muckenhoupt(&c, &WeightSpec::constant(0, 1.0), 0, &sweep).unwrap();
    assert_eq!(flat.verdict, Verdict::Satisfied);
    for row in &flat.rows {
        assert!((row.ratio - PI * PI).abs() < 0.05 * PI * PI, "{row:?}");
    }
    // omega = 1/|x|: (2 pi R)(2 pi R^3 / 3) / R^4
    let sing = check_l_muckenhoupt(&c, &WeightSpec::power(0, Anchor::Intersection(0), 1.0), 0, &sweep).unwrap();
    assert_eq!(sing.verdict, Verdict::Satisfied);
    for row in &sing.rows {
        let oracle = 4.0 * PI * PI / 3.0;
        assert!((row.ratio - oracle).abs() < 0.05 * oracle, "{row:?}");
    }
    for alpha in [2.0, -2.0] {
        let edge = check_l_muckenhoupt(&c, &WeightSpec::power(0, Anchor::Intersection(0), alpha), 0, &sweep).unwrap();
        assert_eq!(edge.verdict, Verdict::Violated, "alpha={alpha}");
    }
}

#[test]
fn tube_ratio_line_anchor() {
    let (c, _) = square_with_tube(4);
    assert_eq!(c.glue_maps.len(), 1);
    assert_eq!(c.glue_maps[0].k, 1);
    let sweep = [0.0625, 0.125, 0.25];
    let flat = check_l_muckenhoupt(&c, &WeightSpec::constant(0, 1.0), 0, &sweep).unwrap();
    assert_eq!(flat.verdict, Verdict::Satisfied);
    let half = check_l_muckenhoupt(&c, &WeightSpec::power(0, Anchor::Intersection(0), 0.5), 0, &sweep).unwrap();
    assert_eq!(half.verdict, Verdict::Satisfied);
    let edge = check_l_muckenhoupt(&c, &WeightSpec::power(0, Anchor::Intersection(0), 1.0), 0, &sweep).unwrap();
    assert_eq!(edge.verdict, Verdict::Violated);
    // line anchors are admissible only below codimension one
    assert!(attach_weight(&c, &WeightSpec::power(1, Anchor::Intersection(0), 0.9)).is_ok());
    assert!(attach_weight(&c, &WeightSpec::power(1, Anchor::Intersection(0), 1.0)).is_err());
}

#[test]
fn line_anchor_mass_matches_strip_integral() {
    // tube piece: the anchor is its middle loop, dist = |z|; the loop has
    // length l, so mu = 2 l int_0^0.5 z^-a dz
    let (c, l) = square_with_tube(8);
    for alpha in [-0.5, 0.5, 0.9] {
        let wc = attach_weight(&c, &WeightSpec::power(1, Anchor::Intersection(0), alpha)).unwrap();
        let exact = 2.0 * l * Float::powf(0.5, 1.0 - alpha) / (1.0 - alpha);
        let got = wc.piece_mass(1);
        assert!((got - exact).abs() < 1e-2 * exact, "alpha={alpha}: {got} vs {exact}");
    }
}
