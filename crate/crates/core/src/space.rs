//! Level-parameterised descriptions of glued weighted spaces, so one
//! description can be instantiated along a refinement ladder.
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{
    build_annulus_piece, build_disk_piece, build_rectangle_piece, build_segment_piece, default_tolerance, glue,
    PieceMesh, PieceMetric, Placement,
};
use crate::measure::{Anchor, WeightSpec, WeightedComplex};

#[derive(Debug, Clone, PartialEq)]
pub enum PieceKind {
    /// `round(resolution * length * level)` cells.
    Segment { length: f64 },
    /// Ring refinement `round(resolution * radius * level)`.
    Disk { radius: f64 },
    /// Log-polar annulus with refinement `round(resolution * outer * level)`.
    Annulus { inner: f64, outer: f64 },
    /// `round(resolution * extent * level)` cells per side.
    Rectangle { width: f64, height: f64 },
    /// A fixed mesh, identical at every level.
    Mesh(PieceMesh),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PieceSpec {
    pub kind: PieceKind,
    pub placement: Placement,
    pub resolution: f64,
    pub metric: PieceMetric,
}

impl PieceSpec {
    pub fn new(kind: PieceKind, placement: Placement) -> Self {
        PieceSpec { kind, placement, resolution: 1.0, metric: PieceMetric::Euclidean }
    }

    fn count(&self, extent: f64, level: usize) -> usize {
        (self.resolution * extent * level as f64).round().max(1.0) as usize
    }

    pub fn build(&self, id: usize, level: usize) -> Result<PieceMesh> {
        let mut piece = match &self.kind {
            PieceKind::Segment { length } => {
                build_segment_piece(id, *length, self.count(*length, level), self.placement)?
            }
            PieceKind::Disk { radius } => build_disk_piece(id, *radius, self.count(*radius, level), self.placement)?,
            PieceKind::Annulus { inner, outer } => {
                build_annulus_piece(id, *inner, *outer, self.count(*outer, level), self.placement)?
            }
            PieceKind::Rectangle { width, height } => build_rectangle_piece(
                id,
                *width,
                *height,
                self.count(*width, level),
                self.count(*height, level),
                self.placement,
            )?,
            PieceKind::Mesh(mesh) => {
                let mut m = mesh.clone();
                m.vertices = m.vertices.iter().map(|&p| self.placement.apply(p)).collect();
                m.id = id;
                m
            }
        };
        piece.metric = self.metric;
        Ok(piece)
    }
}

/// Pieces, weights and glue tolerance of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    pub pieces: Vec<PieceSpec>,
    pub weights: Vec<WeightSpec>,
    /// Defaults to [`default_tolerance`].
    pub tolerance: Option<f64>,
}

impl SpaceSpec {
    /// Builds, glues and weights the space at refinement `level`.
    pub fn instantiate(&self, level: usize) -> Result<WeightedComplex> {
        if level == 0 {
            return Err(Error::invalid("refinement level must be positive"));
        }
        if self.pieces.is_empty() {
            return Err(Error::invalid("space has no pieces"));
        }
        let pieces = self.pieces.iter().enumerate().map(|(i, p)| p.build(i, level)).collect::<Result<Vec<_>>>()?;
        let tol = self.tolerance.unwrap_or_else(|| default_tolerance(&pieces));
        let complex = glue(pieces, tol)?;
        let mut wc = WeightedComplex::unweighted(complex);
        for w in &self.weights {
            if w.piece >= self.pieces.len() {
                return Err(Error::input(format!("weight refers to unknown piece {}", w.piece)));
            }
            wc = wc.attach(w)?;
        }
        Ok(wc)
    }

    /// `[0, length]` on the x axis.
    pub fn interval(length: f64) -> Self {
        SpaceSpec {
            pieces: alloc::vec![PieceSpec::new(PieceKind::Segment { length }, Placement::identity())],
            weights: Vec::new(),
            tolerance: None,
        }
    }

    /// Unit disk in the xy plane with the segment from `(0,0,-1)` to
    /// `(0,0,1)` glued at its centre; `alpha` puts `|x|^(-alpha)` on the
    /// disk.
    pub fn disk_with_segment(alpha: Option<f64>) -> Self {
        let disk = PieceSpec::new(PieceKind::Disk { radius: 1.0 }, Placement::identity());
        let seg = PieceSpec::new(
            PieceKind::Segment { length: 2.0 },
            Placement::along([0.0, 0.0, -1.0], [0.0, 0.0, 1.0]).expect("axis is nonzero"),
        );
        let weights = match alpha {
            Some(a) if a != 0.0 => alloc::vec![WeightSpec::power(0, Anchor::Intersection(0), a)],
            _ => Vec::new(),
        };
        SpaceSpec { pieces: alloc::vec![disk, seg], weights, tolerance: None }
    }

    /// Mesh size scale `1 / level` times the largest resolution factor.
    pub fn nominal_h(&self, level: usize) -> f64 {
        let res = self.pieces.iter().map(|p| p.resolution).fold(0.0, f64::max);
        1.0 / (res * level as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist3;

    #[test]
    fn canonical_example_at_two_levels() {
        let spec = SpaceSpec::disk_with_segment(Some(1.0));
        for level in [4, 8] {
            let wc = spec.instantiate(level).unwrap();
            let c = &wc.complex;
            assert_eq!(c.glue_maps.len(), 1);
            assert_eq!(c.glue_maps[0].k, 0);
            assert_eq!(c.pieces[1].n_cells(), 2 * level);
            assert_eq!(c.pieces[0].n_vertices(), 1 + 4 * level * (level + 1));
            let j = c.glue_maps[0].dofs[0];
            assert!(dist3(c.position(j), [0.0; 3]) < 1e-15);
        }
    }

    #[test]
    fn unweighted_variant_has_unit_weights() {
        let wc = SpaceSpec::disk_with_segment(None).instantiate(4).unwrap();
        assert!((wc.piece_mass(1) - 2.0).abs() < 1e-12);
        let w = SpaceSpec::disk_with_segment(Some(0.0)).instantiate(4).unwrap();
        assert_eq!(w.total_mass(), wc.total_mass());
    }

    #[test]
    fn resolution_scales_cell_counts() {
        let mut spec = SpaceSpec::interval(2.0);
        spec.pieces[0].resolution = 1.5;
        let wc = spec.instantiate(10).unwrap();
        assert_eq!(wc.complex.pieces[0].n_cells(), 30);
        assert!((spec.nominal_h(10) - 1.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn bad_levels_and_weights_are_rejected() {
        let spec = SpaceSpec::interval(1.0);
        assert!(spec.instantiate(0).is_err());
        let mut bad = spec.clone();
        bad.weights.push(WeightSpec::constant(4, 1.0));
        assert!(bad.instantiate(3).is_err());
        let mut nonint = SpaceSpec::disk_with_segment(Some(2.0));
        assert!(matches!(nonint.instantiate(3), Err(Error::NonIntegrableWeight { .. })));
        nonint.weights.clear();
        assert!(nonint.instantiate(3).is_ok());
    }

    #[test]
    fn fixed_mesh_is_placed() {
        let m = build_segment_piece(0, 1.0, 3, Placement::identity()).unwrap();
        let spec = SpaceSpec {
            pieces: alloc::vec![PieceSpec::new(PieceKind::Mesh(m), Placement::translation([0.0, 2.0, 0.0]))],
            weights: Vec::new(),
            tolerance: None,
        };
        let wc = spec.instantiate(50).unwrap();
        assert_eq!(wc.complex.pieces[0].n_cells(), 3);
        assert_eq!(wc.complex.position(3), [1.0, 2.0, 0.0]);
    }
}
