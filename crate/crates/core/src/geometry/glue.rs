use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::mesh::{dist3, PieceMesh, UnionFind};
use crate::error::{Error, Result};

/// One connected intersection `L` between two pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueMap {
    pub intersection_id: usize,
    pub piece_a: usize,
    pub piece_b: usize,
    /// `(piece_a, vertex_a, piece_b, vertex_b)` identifications.
    pub pairs: Vec<(usize, usize, usize, usize)>,
    /// Intrinsic dimension of the identified subcomplex.
    pub k: usize,
    /// Global DOFs of `L`, ascending.
    pub dofs: Vec<usize>,
}

impl GlueMap {
    /// Local vertex indices of `L` inside `piece`.
    pub fn local_vertices(&self, piece: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .pairs
            .iter()
            .filter_map(|&(pa, va, pb, vb)| {
                if pa == piece {
                    Some(va)
                } else if pb == piece {
                    Some(vb)
                } else {
                    None
                }
            })
            .collect();
        v.sort_unstable();
        v
    }
}

/// Pieces glued along interior vertex sets, with global DOF numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct GluedComplex {
    pub pieces: Vec<PieceMesh>,
    pub glue_maps: Vec<GlueMap>,
    /// `global_dof[piece][local] -> global`.
    pub global_dof: Vec<Vec<usize>>,
    /// Owners `(piece, local)` of each global DOF, ordered by piece.
    pub dof_owners: Vec<Vec<(usize, usize)>>,
    /// Unique edges `(a, b, length)` with `a < b` over global DOFs.
    pub edges: Vec<(usize, usize, f64)>,
    pub(crate) adjacency: Vec<Vec<(usize, f64)>>,
    /// Connected component id per DOF, numbered by first DOF.
    pub component: Vec<usize>,
    pub n_components: usize,
    pub tolerance: f64,
    /// Per piece: local vertices of that piece shared with another piece.
    pub(crate) portals: Vec<Vec<usize>>,
}

/// `1e-9` times the diameter of the bounding box of all vertices.
pub fn default_tolerance(pieces: &[PieceMesh]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pieces {
        for v in &p.vertices {
            for c in 0..3 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
    }
    let diag = dist3(lo, hi);
    1e-9 * if diag.is_finite() && diag > 0.0 { diag } else { 1.0 }
}

/// Matches between the vertices of two pieces within `tol`.
fn coincident_pairs(a: &PieceMesh, b: &PieceMesh, tol: f64) -> Result<Vec<(usize, usize)>> {
    let mut order: Vec<usize> = (0..b.n_vertices()).collect();
    order.sort_by(|&i, &j| b.vertices[i][0].partial_cmp(&b.vertices[j][0]).unwrap());
    let xs: Vec<f64> = order.iter().map(|&i| b.vertices[i][0]).collect();
    let mut pairs = Vec::new();
    for (va, p) in a.vertices.iter().enumerate() {
        let start = xs.partition_point(|&x| x < p[0] - tol);
        let mut hits = Vec::new();
        for &vb in order[start..].iter().take_while(|&&vb| b.vertices[vb][0] <= p[0] + tol) {
            if dist3(*p, b.vertices[vb]) <= tol {
                hits.push(vb);
            }
        }
        if hits.len() > 1 {
            return Err(Error::Ambiguity(format!(
                "vertex {va} of piece {} matches {} vertices of piece {}",
                a.id,
                hits.len(),
                b.id
            )));
        }
        if let Some(&vb) = hits.first() {
            pairs.push((va, vb));
        }
    }
    let mut seen = BTreeSet::new();
    for &(_, vb) in &pairs {
        if !seen.insert(vb) {
            return Err(Error::Ambiguity(format!(
                "vertex {vb} of piece {} matches several vertices of piece {}",
                b.id, a.id
            )));
        }
    }
    Ok(pairs)
}

/// Dimension of a connected identified vertex set inside `piece`: 0 for a
/// vertex, 1 when it spans edges, 2 when it spans a triangle, and so on.
fn subcomplex_dim(piece: &PieceMesh, set: &BTreeSet<usize>) -> usize {
    if set.len() <= 1 {
        return 0;
    }
    let mut best = 0;
    for c in 0..piece.n_cells() {
        let cell = piece.cell(c);
        let inside = cell.iter().filter(|v| set.contains(v)).count();
        if inside >= 2 {
            best = best.max(inside - 1);
        }
    }
    best
}

/// Identifies coincident vertices of different pieces into shared DOFs.
///
/// Each connected component of identified vertices between two pieces
/// becomes one [`GlueMap`]. Intersections must be interior to both pieces,
/// have the same dimension `k` in both, satisfy `k < dim` in both, and be
/// pairwise disjoint.
pub fn glue(pieces: Vec<PieceMesh>, tolerance: f64) -> Result<GluedComplex> {
    if !(tolerance > 0.0) {
        return Err(Error::invalid("glue tolerance must be positive"));
    }
    for (i, p) in pieces.iter().enumerate() {
        if p.id != i {
            return Err(Error::input(format!("piece at position {i} has id {}", p.id)));
        }
    }
    let offsets: Vec<usize> = pieces
        .iter()
        .scan(0, |acc, p| {
            let o = *acc;
            *acc += p.n_vertices();
            Some(o)
        })
        .collect();
    let total: usize = pieces.iter().map(|p| p.n_vertices()).sum();
    let mut uf = UnionFind::new(total);
    let mut glue_maps = Vec::new();
    for ia in 0..pieces.len() {
        for ib in (ia + 1)..pieces.len() {
            let (a, b) = (&pieces[ia], &pieces[ib]);
            let pairs = coincident_pairs(a, b, tolerance)?;
            if pairs.is_empty() {
                continue;
            }
            for &(va, vb) in &pairs {
                if a.boundary[va] || b.boundary[vb] {
                    return Err(Error::hypothesis(format!(
                        "intersection of pieces {ia} and {ib} touches the boundary (vertices {va}, {vb})"
                    )));
                }
                uf.union(offsets[ia] + va, offsets[ib] + vb);
            }
            // connected components of the identified set, via edges of piece a
            let map_ab: BTreeMap<usize, usize> = pairs.iter().copied().collect();
            let mut comp_uf = UnionFind::new(a.n_vertices());
            for (x, y) in a.edges() {
                if map_ab.contains_key(&x) && map_ab.contains_key(&y) {
                    comp_uf.union(x, y);
                }
            }
            let mut comps: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
            for &(va, vb) in &pairs {
                comps.entry(comp_uf.find(va)).or_default().push((va, vb));
            }
            for comp in comps.into_values() {
                let set_a: BTreeSet<usize> = comp.iter().map(|p| p.0).collect();
                let set_b: BTreeSet<usize> = comp.iter().map(|p| p.1).collect();
                let (ka, kb) = (subcomplex_dim(a, &set_a), subcomplex_dim(b, &set_b));
                if ka != kb {
                    return Err(Error::hypothesis(format!(
                        "intersection of pieces {ia} and {ib} has dimension {ka} in one and {kb} in the other"
                    )));
                }
                if ka >= a.dim || ka >= b.dim {
                    return Err(Error::hypothesis(format!(
                        "intersection of pieces {ia} and {ib} has nonempty interior (k = {ka})"
                    )));
                }
                glue_maps.push(GlueMap {
                    intersection_id: glue_maps.len(),
                    piece_a: ia,
                    piece_b: ib,
                    pairs: comp.iter().map(|&(va, vb)| (ia, va, ib, vb)).collect(),
                    k: ka,
                    dofs: Vec::new(),
                });
            }
        }
    }

    // global numbering in (piece, local) order
    let mut root_to_global: BTreeMap<usize, usize> = BTreeMap::new();
    let mut global_dof = Vec::with_capacity(pieces.len());
    let mut dof_owners: Vec<Vec<(usize, usize)>> = Vec::new();
    for (ip, p) in pieces.iter().enumerate() {
        let mut map = Vec::with_capacity(p.n_vertices());
        for v in 0..p.n_vertices() {
            let root = uf.find(offsets[ip] + v);
            let next = root_to_global.len();
            let g = *root_to_global.entry(root).or_insert(next);
            if g == dof_owners.len() {
                dof_owners.push(Vec::new());
            }
            dof_owners[g].push((ip, v));
            map.push(g);
        }
        global_dof.push(map);
    }
    let n_dof = dof_owners.len();

    for gm in glue_maps.iter_mut() {
        let mut dofs: Vec<usize> = gm.pairs.iter().map(|&(pa, va, _, _)| global_dof[pa][va]).collect();
        dofs.sort_unstable();
        dofs.dedup();
        gm.dofs = dofs;
    }
    let mut owner_map = vec![usize::MAX; n_dof];
    for gm in &glue_maps {
        for &d in &gm.dofs {
            if owner_map[d] != usize::MAX {
                return Err(Error::hypothesis(format!(
                    "intersections {} and {} share DOF {d}",
                    owner_map[d], gm.intersection_id
                )));
            }
            owner_map[d] = gm.intersection_id;
        }
    }

    let mut edge_set: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (ip, p) in pieces.iter().enumerate() {
        for (x, y) in p.edges() {
            let (gx, gy) = (global_dof[ip][x], global_dof[ip][y]);
            let len = dist3(p.vertices[x], p.vertices[y]);
            edge_set.entry((gx.min(gy), gx.max(gy))).or_insert(len);
        }
    }
    let edges: Vec<(usize, usize, f64)> = edge_set.into_iter().map(|((a, b), l)| (a, b, l)).collect();
    let mut adjacency = vec![Vec::new(); n_dof];
    let mut cuf = UnionFind::new(n_dof);
    for &(a, b, l) in &edges {
        adjacency[a].push((b, l));
        adjacency[b].push((a, l));
        cuf.union(a, b);
    }
    let mut comp_ids: BTreeMap<usize, usize> = BTreeMap::new();
    let component: Vec<usize> = (0..n_dof)
        .map(|d| {
            let r = cuf.find(d);
            let next = comp_ids.len();
            *comp_ids.entry(r).or_insert(next)
        })
        .collect();
    let n_components = comp_ids.len();

    let portals = pieces
        .iter()
        .enumerate()
        .map(|(ip, p)| (0..p.n_vertices()).filter(|&v| dof_owners[global_dof[ip][v]].len() > 1).collect())
        .collect();

    Ok(GluedComplex {
        pieces,
        glue_maps,
        global_dof,
        dof_owners,
        edges,
        adjacency,
        component,
        n_components,
        tolerance,
        portals,
    })
}

impl GluedComplex {
    pub fn dof_count(&self) -> usize {
        self.dof_owners.len()
    }

    pub fn is_connected(&self) -> bool {
        self.n_components == 1
    }

    pub fn intersection(&self, id: usize) -> Result<&GlueMap> {
        self.glue_maps.get(id).ok_or_else(|| Error::input(format!("no intersection with id {id}")))
    }

    /// Ambient coordinates of a DOF.
    pub fn position(&self, dof: usize) -> [f64; 3] {
        let (p, v) = self.dof_owners[dof][0];
        self.pieces[p].vertices[v]
    }

    /// Pieces owning `dof`.
    pub fn pieces_of(&self, dof: usize) -> impl Iterator<Item = usize> + '_ {
        self.dof_owners[dof].iter().map(|&(p, _)| p)
    }

    /// True when `dof` lies on an intersection.
    pub fn is_shared(&self, dof: usize) -> bool {
        self.dof_owners[dof].len() > 1
    }

    /// Global DOFs of one piece, in local order.
    pub fn piece_dofs(&self, piece: usize) -> &[usize] {
        &self.global_dof[piece]
    }

    /// Re-glues the pieces with the given tolerance.
    pub fn reglue(&self, tolerance: f64) -> Result<GluedComplex> {
        glue(self.pieces.clone(), tolerance)
    }
}
