//! Tetrahedral mesh data model with labeled boundary surfaces and
//! per-cell ventricle regions.
//!
//! Meshes are immutable after construction; every solver reads them
//! concurrently. Node coordinates are in meters.

mod generate;
pub mod vtk;

pub use generate::{generate_idealized_biventricle, structured_box, BiventricleParams, BoxLabels};

use crate::math::{cross3, dot3, norm3, sub3, Vec3};
use thiserror::Error;

/// Boundary surface tags of the biventricular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceLabel {
    Epi,
    EndoLv,
    EndoRv,
    Base,
    Apex,
}

impl SurfaceLabel {
    pub const ALL: [SurfaceLabel; 5] = [
        SurfaceLabel::Epi,
        SurfaceLabel::EndoLv,
        SurfaceLabel::EndoRv,
        SurfaceLabel::Base,
        SurfaceLabel::Apex,
    ];

    pub fn as_int(self) -> i32 {
        match self {
            SurfaceLabel::Epi => 0,
            SurfaceLabel::EndoLv => 1,
            SurfaceLabel::EndoRv => 2,
            SurfaceLabel::Base => 3,
            SurfaceLabel::Apex => 4,
        }
    }

    pub fn from_int(v: i32) -> Option<SurfaceLabel> {
        Some(match v {
            0 => SurfaceLabel::Epi,
            1 => SurfaceLabel::EndoLv,
            2 => SurfaceLabel::EndoRv,
            3 => SurfaceLabel::Base,
            4 => SurfaceLabel::Apex,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SurfaceLabel::Epi => "epi",
            SurfaceLabel::EndoLv => "endo_lv",
            SurfaceLabel::EndoRv => "endo_rv",
            SurfaceLabel::Base => "base",
            SurfaceLabel::Apex => "apex",
        }
    }

    pub fn parse(s: &str) -> Option<SurfaceLabel> {
        Some(match s.to_ascii_lowercase().as_str() {
            "epi" | "epicardium" => SurfaceLabel::Epi,
            "endo_lv" | "endolv" | "endo-lv" => SurfaceLabel::EndoLv,
            "endo_rv" | "endorv" | "endo-rv" => SurfaceLabel::EndoRv,
            "base" => SurfaceLabel::Base,
            "apex" => SurfaceLabel::Apex,
            _ => return None,
        })
    }
}

/// Ventricle a cell belongs to. The septum counts as LV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    Lv,
    Rv,
}

impl RegionLabel {
    pub fn as_int(self) -> i32 {
        match self {
            RegionLabel::Lv => 0,
            RegionLabel::Rv => 1,
        }
    }

    pub fn from_int(v: i32) -> Option<RegionLabel> {
        match v {
            0 => Some(RegionLabel::Lv),
            1 => Some(RegionLabel::Rv),
            _ => None,
        }
    }
}

/// Oriented boundary triangle; node order gives an outward normal.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFacet {
    pub nodes: [u32; 3],
    pub label: SurfaceLabel,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("tet {tet} references node {node} out of range (node count {nodes})")]
    NodeIndexOutOfRange { tet: usize, node: u32, nodes: usize },
    #[error("tet {tet} has non-positive volume {volume:.3e}")]
    NonPositiveVolume { tet: usize, volume: f64 },
    #[error("boundary facet {facet} does not belong to exactly one tet")]
    DanglingFacet { facet: usize },
    #[error("boundary is not fully labeled: {missing} facets without label")]
    UnlabeledBoundary { missing: usize },
    #[error("mesh quality gate failed: min dihedral {min_dihedral_deg:.2} deg, max aspect {max_aspect:.2}")]
    QualityGate { min_dihedral_deg: f64, max_aspect: f64 },
    #[error("degenerate geometry parameters: {0}")]
    DegenerateParams(String),
    #[error("surface label {0:?} missing from generated mesh")]
    MissingLabel(SurfaceLabel),
}

/// Unstructured tetrahedral mesh.
#[derive(Debug, Clone)]
pub struct TetMesh {
    pub nodes: Vec<Vec3>,
    pub tets: Vec<[u32; 4]>,
    pub boundary_facets: Vec<BoundaryFacet>,
    pub cell_regions: Vec<RegionLabel>,
}

/// CSR-style node -> incident cell adjacency.
pub struct VertexCells {
    offsets: Vec<usize>,
    cells: Vec<u32>,
}

impl VertexCells {
    pub fn cells_of(&self, node: usize) -> &[u32] {
        &self.cells[self.offsets[node]..self.offsets[node + 1]]
    }
}

/// Quality summary produced by [`TetMesh::validate`].
#[derive(Debug, Clone, Copy)]
pub struct MeshQuality {
    pub min_dihedral_deg: f64,
    pub max_aspect: f64,
    pub min_volume: f64,
}

/// Gate below which downstream solvers are not trusted.
pub const MIN_DIHEDRAL_DEG: f64 = 5.0;
pub const MAX_ASPECT: f64 = 30.0;

impl TetMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn tet_count(&self) -> usize {
        self.tets.len()
    }

    #[inline]
    pub fn tet_nodes(&self, t: usize) -> [Vec3; 4] {
        let [a, b, c, d] = self.tets[t];
        [
            self.nodes[a as usize],
            self.nodes[b as usize],
            self.nodes[c as usize],
            self.nodes[d as usize],
        ]
    }

    /// Signed volume of tet `t` under the stored node ordering.
    #[inline]
    pub fn tet_volume(&self, t: usize) -> f64 {
        let [p0, p1, p2, p3] = self.tet_nodes(t);
        signed_volume(p0, p1, p2, p3)
    }

    pub fn tet_centroid(&self, t: usize) -> Vec3 {
        let [p0, p1, p2, p3] = self.tet_nodes(t);
        [
            (p0[0] + p1[0] + p2[0] + p3[0]) * 0.25,
            (p0[1] + p1[1] + p2[1] + p3[1]) * 0.25,
            (p0[2] + p1[2] + p2[2] + p3[2]) * 0.25,
        ]
    }

    pub fn total_volume(&self) -> f64 {
        crate::par::sum_indexed(self.tet_count(), |t| self.tet_volume(t))
    }

    /// Volume enclosed by the boundary facets via the divergence theorem.
    pub fn boundary_volume(&self) -> f64 {
        crate::par::sum_indexed(self.boundary_facets.len(), |i| {
            let f = &self.boundary_facets[i];
            let a = self.nodes[f.nodes[0] as usize];
            let b = self.nodes[f.nodes[1] as usize];
            let c = self.nodes[f.nodes[2] as usize];
            dot3(a, cross3(b, c)) / 6.0
        })
    }

    /// Nodes lying on facets with the given label, sorted and deduplicated.
    pub fn boundary_nodes(&self, label: SurfaceLabel) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .boundary_facets
            .iter()
            .filter(|f| f.label == label)
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Outward facet normal scaled by facet area.
    pub fn facet_area_normal(&self, f: &BoundaryFacet) -> Vec3 {
        let a = self.nodes[f.nodes[0] as usize];
        let b = self.nodes[f.nodes[1] as usize];
        let c = self.nodes[f.nodes[2] as usize];
        crate::math::scale3(cross3(sub3(b, a), sub3(c, a)), 0.5)
    }

    pub fn vertex_cells(&self) -> VertexCells {
        let n = self.node_count();
        let mut counts = vec![0usize; n + 1];
        for tet in &self.tets {
            for &v in tet {
                counts[v as usize + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cells = vec![0u32; counts[n]];
        let mut cursor = counts.clone();
        for (t, tet) in self.tets.iter().enumerate() {
            for &v in tet {
                cells[cursor[v as usize]] = t as u32;
                cursor[v as usize] += 1;
            }
        }
        VertexCells {
            offsets: counts,
            cells,
        }
    }

    /// Node -> node edge adjacency (sorted neighbor lists).
    pub fn node_neighbors(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for tet in &self.tets {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        adj[tet[i] as usize].push(tet[j]);
                    }
                }
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Lumped nodal volumes (a quarter of each incident tet).
    pub fn lumped_node_volumes(&self) -> Vec<f64> {
        let mut vols = vec![0.0; self.node_count()];
        for t in 0..self.tet_count() {
            let share = self.tet_volume(t) * 0.25;
            for &v in &self.tets[t] {
                vols[v as usize] += share;
            }
        }
        vols
    }

    /// Consistency and quality validation.
    pub fn validate(&self) -> Result<MeshQuality, MeshError> {
        let n = self.node_count();
        for (t, tet) in self.tets.iter().enumerate() {
            for &v in tet {
                if v as usize >= n {
                    return Err(MeshError::NodeIndexOutOfRange {
                        tet: t,
                        node: v,
                        nodes: n,
                    });
                }
            }
        }
        let mut min_vol = f64::INFINITY;
        let mut min_dihedral = f64::INFINITY;
        let mut max_aspect: f64 = 0.0;
        for t in 0..self.tet_count() {
            let vol = self.tet_volume(t);
            if vol <= 0.0 {
                return Err(MeshError::NonPositiveVolume { tet: t, volume: vol });
            }
            min_vol = min_vol.min(vol);
            let q = tet_quality(self.tet_nodes(t));
            min_dihedral = min_dihedral.min(q.0);
            max_aspect = max_aspect.max(q.1);
        }
        // Every boundary facet must be a face of exactly one tet.
        let face_counts = boundary_face_counts(&self.tets);
        for (i, f) in self.boundary_facets.iter().enumerate() {
            let key = sorted_face(f.nodes);
            if face_counts.get(&key).copied().unwrap_or(0) != 1 {
                return Err(MeshError::DanglingFacet { facet: i });
            }
        }
        let boundary_count = face_counts.values().filter(|&&c| c == 1).count();
        if boundary_count != self.boundary_facets.len() {
            return Err(MeshError::UnlabeledBoundary {
                missing: boundary_count.saturating_sub(self.boundary_facets.len()),
            });
        }
        let quality = MeshQuality {
            min_dihedral_deg: min_dihedral,
            max_aspect,
            min_volume: min_vol,
        };
        if min_dihedral < MIN_DIHEDRAL_DEG || max_aspect > MAX_ASPECT {
            return Err(MeshError::QualityGate {
                min_dihedral_deg: min_dihedral,
                max_aspect,
            });
        }
        Ok(quality)
    }

    /// Applies a node permutation: node `i` becomes `perm[i]`.
    pub fn renumbered(&self, perm: &[u32]) -> TetMesh {
        assert_eq!(perm.len(), self.node_count());
        let mut nodes = vec![[0.0; 3]; self.node_count()];
        for (i, &p) in perm.iter().enumerate() {
            nodes[p as usize] = self.nodes[i];
        }
        let tets = self
            .tets
            .iter()
            .map(|t| [perm[t[0] as usize], perm[t[1] as usize], perm[t[2] as usize], perm[t[3] as usize]])
            .collect();
        let boundary_facets = self
            .boundary_facets
            .iter()
            .map(|f| BoundaryFacet {
                nodes: [
                    perm[f.nodes[0] as usize],
                    perm[f.nodes[1] as usize],
                    perm[f.nodes[2] as usize],
                ],
                label: f.label,
            })
            .collect();
        TetMesh {
            nodes,
            tets,
            boundary_facets,
            cell_regions: self.cell_regions.clone(),
        }
    }
}

#[inline]
pub fn signed_volume(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3) -> f64 {
    dot3(sub3(p1, p0), cross3(sub3(p2, p0), sub3(p3, p0))) / 6.0
}

pub(crate) fn sorted_face(mut f: [u32; 3]) -> [u32; 3] {
    f.sort_unstable();
    f
}

pub(crate) fn boundary_face_counts(
    tets: &[[u32; 4]],
) -> std::collections::HashMap<[u32; 3], u32> {
    let mut counts = std::collections::HashMap::with_capacity(tets.len() * 2);
    for tet in tets {
        for f in tet_faces(*tet) {
            *counts.entry(sorted_face(f)).or_insert(0) += 1;
        }
    }
    counts
}

#[inline]
pub(crate) fn tet_faces(t: [u32; 4]) -> [[u32; 3]; 4] {
    [
        [t[1], t[2], t[3]],
        [t[0], t[2], t[3]],
        [t[0], t[1], t[3]],
        [t[0], t[1], t[2]],
    ]
}

/// (min dihedral angle in degrees, aspect ratio = longest edge / shortest altitude).
fn tet_quality(p: [Vec3; 4]) -> (f64, f64) {
    let vol = signed_volume(p[0], p[1], p[2], p[3]).abs();
    // Face normals opposite each vertex.
    let faces = [
        (p[1], p[2], p[3]),
        (p[0], p[3], p[2]),
        (p[0], p[1], p[3]),
        (p[0], p[2], p[1]),
    ];
    let normals: Vec<Vec3> = faces
        .iter()
        .map(|&(a, b, c)| cross3(sub3(b, a), sub3(c, a)))
        .collect();
    let areas: Vec<f64> = normals.iter().map(|n| 0.5 * norm3(*n)).collect();
    let mut min_dihedral = f64::INFINITY;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let cosang = -dot3(normals[i], normals[j]) / (4.0 * areas[i] * areas[j]);
            let ang = cosang.clamp(-1.0, 1.0).acos().to_degrees();
            min_dihedral = min_dihedral.min(ang);
        }
    }
    let mut longest_edge: f64 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            longest_edge = longest_edge.max(norm3(sub3(p[i], p[j])));
        }
    }
    let max_area = areas.iter().cloned().fold(0.0, f64::max);
    let min_altitude = 3.0 * vol / max_area;
    (min_dihedral, longest_edge / min_altitude)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tet_mesh() -> TetMesh {
        // Two tets sharing a face.
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
        ];
        let tets = vec![[0u32, 1, 2, 3], [1, 2, 3, 4]];
        let mut boundary_facets = Vec::new();
        let counts = boundary_face_counts(&tets);
        for (t, tet) in tets.iter().enumerate() {
            for (fi, f) in tet_faces(*tet).iter().enumerate() {
                if counts[&sorted_face(*f)] == 1 {
                    // orient outward: opposite vertex is tet[fi]
                    let opp = tet[fi] as usize;
                    let mut tri = *f;
                    let a = nodes[tri[0] as usize];
                    let b = nodes[tri[1] as usize];
                    let c = nodes[tri[2] as usize];
                    let d = nodes[opp];
                    if dot3(cross3(sub3(b, a), sub3(c, a)), sub3(d, a)) > 0.0 {
                        tri.swap(1, 2);
                    }
                    boundary_facets.push(BoundaryFacet {
                        nodes: tri,
                        label: SurfaceLabel::Epi,
                    });
                    let _ = t;
                }
            }
        }
        let mut m = TetMesh {
            nodes,
            tets,
            boundary_facets,
            cell_regions: vec![RegionLabel::Lv, RegionLabel::Lv],
        };
        // fix orientations
        for t in 0..m.tets.len() {
            if m.tet_volume(t) < 0.0 {
                m.tets[t].swap(2, 3);
            }
        }
        m
    }

    #[test]
    fn volume_identity_holds_for_watertight_mesh() {
        let m = two_tet_mesh();
        let v_sum = m.total_volume();
        let v_div = m.boundary_volume();
        assert!((v_sum - v_div).abs() / v_sum < 1e-12, "{v_sum} vs {v_div}");
    }

    #[test]
    fn renumbering_roundtrip_is_identity() {
        let m = two_tet_mesh();
        let n = m.node_count() as u32;
        let perm: Vec<u32> = (0..n).map(|i| (i + 2) % n).collect();
        let mut inv = vec![0u32; n as usize];
        for (i, &p) in perm.iter().enumerate() {
            inv[p as usize] = i as u32;
        }
        let back = m.renumbered(&perm).renumbered(&inv);
        assert_eq!(back.tets, m.tets);
        for (a, b) in back.nodes.iter().zip(&m.nodes) {
            assert_eq!(a, b);
        }
        assert_eq!(back.cell_regions.len(), m.cell_regions.len());
    }

    #[test]
    fn validate_rejects_inverted_tet() {
        let mut m = two_tet_mesh();
        m.tets[0].swap(0, 1);
        assert!(matches!(
            m.validate(),
            Err(MeshError::NonPositiveVolume { .. })
        ));
    }
}
