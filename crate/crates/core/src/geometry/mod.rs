//! Simplicial pieces, gluing along shared vertices, and the glued metric.
mod distance;
mod glue;
mod mesh;

pub(crate) use distance::piece_field;
pub use glue::{default_tolerance, glue, GlueMap, GluedComplex};
pub use mesh::{
    build_annulus_piece, build_disk_piece, build_rectangle_piece, build_segment_piece, simplex_geometry, PieceMesh,
    PieceMetric, Placement, Point, SimplexGeom, DISK_DIAMETER_CONSTANT,
};
pub(crate) use mesh::{dist3, dot3, sub};
