//! Mesh generation: structured boxes for verification problems and the
//! idealized biventricular geometry (two nested truncated ellipsoids with a
//! thin right-ventricular crescent grafted onto the left free wall).

use super::{
    boundary_face_counts, signed_volume, sorted_face, tet_faces, BoundaryFacet, MeshError,
    RegionLabel, SurfaceLabel, TetMesh,
};
use crate::math::{norm3, sub3, Vec3};
use std::collections::HashMap;

/// Face labels for [`structured_box`], in the order
/// `[x-, x+, y-, y+, z-, z+]`.
#[derive(Debug, Clone, Copy)]
pub struct BoxLabels(pub [SurfaceLabel; 6]);

impl Default for BoxLabels {
    fn default() -> Self {
        BoxLabels([
            SurfaceLabel::Epi,
            SurfaceLabel::EndoLv,
            SurfaceLabel::EndoRv,
            SurfaceLabel::Base,
            SurfaceLabel::Apex,
            SurfaceLabel::Apex,
        ])
    }
}

/// Structured box `[0, size] x ...` subdivided into `nx*ny*nz` cubes of six
/// tets each (Kuhn subdivision, conforming across cube faces).
pub fn structured_box(size: Vec3, divisions: [usize; 3], labels: BoxLabels) -> TetMesh {
    let [nx, ny, nz] = divisions;
    assert!(nx >= 1 && ny >= 1 && nz >= 1);
    let idx = |i: usize, j: usize, k: usize| -> u32 {
        (i + (nx + 1) * (j + (ny + 1) * k)) as u32
    };
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    size[0] * i as f64 / nx as f64,
                    size[1] * j as f64 / ny as f64,
                    size[2] * k as f64 / nz as f64,
                ]);
            }
        }
    }
    // Reorder loop above filled nodes in k-major order; idx must match.
    let idx = |i: usize, j: usize, k: usize| -> u32 {
        (i + (nx + 1) * (j + (ny + 1) * k)) as u32
    };
    let mut tets = Vec::with_capacity(nx * ny * nz * 6);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let corner = |dx: usize, dy: usize, dz: usize| idx(i + dx, j + dy, k + dz);
                push_kuhn_tets(&mut tets, &nodes, corner);
            }
        }
    }
    let boundary_facets = extract_boundary(&nodes, &tets, |centroid, normal| {
        classify_box_facet(centroid, normal, size, labels)
    });
    TetMesh {
        cell_regions: vec![RegionLabel::Lv; tets.len()],
        nodes,
        tets,
        boundary_facets,
    }
}

fn classify_box_facet(c: Vec3, n: Vec3, size: Vec3, labels: BoxLabels) -> SurfaceLabel {
    // Boundary facets of a box are axis-aligned; pick the dominant normal axis.
    let ax = if n[0].abs() >= n[1].abs() && n[0].abs() >= n[2].abs() {
        0
    } else if n[1].abs() >= n[2].abs() {
        1
    } else {
        2
    };
    let neg = n[ax] < 0.0;
    let _ = (c, size);
    labels.0[2 * ax + if neg { 0 } else { 1 }]
}

/// Emits the six Kuhn tets of one cube, positively oriented.
fn push_kuhn_tets<F: Fn(usize, usize, usize) -> u32>(
    tets: &mut Vec<[u32; 4]>,
    nodes: &[Vec3],
    corner: F,
) {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for perm in PERMS {
        let mut d = [0usize; 3];
        let v0 = corner(0, 0, 0);
        d[perm[0]] = 1;
        let v1 = corner(d[0], d[1], d[2]);
        d[perm[1]] = 1;
        let v2 = corner(d[0], d[1], d[2]);
        let v3 = corner(1, 1, 1);
        let mut tet = [v0, v1, v2, v3];
        let vol = signed_volume(
            nodes[tet[0] as usize],
            nodes[tet[1] as usize],
            nodes[tet[2] as usize],
            nodes[tet[3] as usize],
        );
        if vol < 0.0 {
            tet.swap(2, 3);
        }
        tets.push(tet);
    }
}

/// Finds boundary faces (faces owned by exactly one tet), orients them
/// outward and labels them with `classify(centroid, outward_normal)`.
fn extract_boundary<F: Fn(Vec3, Vec3) -> SurfaceLabel>(
    nodes: &[Vec3],
    tets: &[[u32; 4]],
    classify: F,
) -> Vec<BoundaryFacet> {
    let counts = boundary_face_counts(tets);
    let mut owner: HashMap<[u32; 3], ([u32; 3], u32)> = HashMap::new();
    for tet in tets {
        for (fi, f) in tet_faces(*tet).iter().enumerate() {
            let key = sorted_face(*f);
            if counts[&key] == 1 {
                owner.insert(key, (*f, tet[fi]));
            }
        }
    }
    let mut keys: Vec<[u32; 3]> = owner.keys().copied().collect();
    keys.sort_unstable();
    let mut facets = Vec::with_capacity(keys.len());
    for key in keys {
        let (mut tri, opp) = owner[&key];
        let a = nodes[tri[0] as usize];
        let b = nodes[tri[1] as usize];
        let c = nodes[tri[2] as usize];
        let d = nodes[opp as usize];
        let n = crate::math::cross3(sub3(b, a), sub3(c, a));
        if crate::math::dot3(n, sub3(d, a)) > 0.0 {
            tri.swap(1, 2);
        }
        let a = nodes[tri[0] as usize];
        let b = nodes[tri[1] as usize];
        let c = nodes[tri[2] as usize];
        let normal = crate::math::cross3(sub3(b, a), sub3(c, a));
        let centroid = [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
            (a[2] + b[2] + c[2]) / 3.0,
        ];
        facets.push(BoundaryFacet {
            nodes: tri,
            label: classify(centroid, normal),
        });
    }
    facets
}

/// Parameters of the idealized biventricular geometry. Lengths in meters.
#[derive(Debug, Clone)]
pub struct BiventricleParams {
    /// Outer semi-axes of the LV ellipsoid.
    pub lv_radii: Vec3,
    /// Outer semi-axes of the RV ellipsoid.
    pub rv_radii: Vec3,
    /// LV wall thickness (subtracted per axis for the cavity).
    pub lv_wall: f64,
    /// RV free-wall thickness.
    pub rv_wall: f64,
    /// Height of the base cut plane above the LV center.
    pub base_cut_height: f64,
    /// Target edge length of the structured lattice.
    pub target_edge_length: f64,
    /// Offset of the RV ellipsoid center from the LV center.
    pub rv_center: Vec3,
    /// Geodesic radius of the apical patch on the epicardium.
    pub apex_radius: f64,
}

impl Default for BiventricleParams {
    fn default() -> Self {
        // Murine scale: base bounding extent close to 8 mm.
        BiventricleParams {
            lv_radii: [2.75e-3, 2.75e-3, 4.5e-3],
            rv_radii: [3.9e-3, 2.5e-3, 3.7e-3],
            lv_wall: 1.0e-3,
            rv_wall: 0.5e-3,
            base_cut_height: 1.2e-3,
            target_edge_length: 2.0e-4,
            rv_center: [1.35e-3, 0.0, -0.2e-3],
            apex_radius: 0.7e-3,
        }
    }
}

struct ImplicitHeart {
    p: BiventricleParams,
    lv_inner: Vec3,
    rv_inner: Vec3,
}

impl ImplicitHeart {
    fn new(p: &BiventricleParams) -> Result<ImplicitHeart, MeshError> {
        for (i, &r) in p.lv_radii.iter().enumerate() {
            if r <= 0.0 || p.rv_radii[i] <= 0.0 {
                return Err(MeshError::DegenerateParams("radii must be positive".into()));
            }
        }
        if p.target_edge_length <= 0.0 {
            return Err(MeshError::DegenerateParams("edge length must be positive".into()));
        }
        let lv_inner = [
            p.lv_radii[0] - p.lv_wall,
            p.lv_radii[1] - p.lv_wall,
            p.lv_radii[2] - p.lv_wall,
        ];
        let rv_inner = [
            p.rv_radii[0] - p.rv_wall,
            p.rv_radii[1] - p.rv_wall,
            p.rv_radii[2] - p.rv_wall,
        ];
        if lv_inner.iter().any(|&r| r <= 0.0) {
            return Err(MeshError::DegenerateParams(
                "LV wall thickness leaves no cavity".into(),
            ));
        }
        if rv_inner.iter().any(|&r| r <= 0.0) {
            return Err(MeshError::DegenerateParams(
                "RV wall thickness leaves no cavity".into(),
            ));
        }
        Ok(ImplicitHeart {
            p: p.clone(),
            lv_inner,
            rv_inner,
        })
    }

    fn quad(x: Vec3, center: Vec3, radii: Vec3) -> f64 {
        let mut q = 0.0;
        for i in 0..3 {
            let d = (x[i] - center[i]) / radii[i];
            q += d * d;
        }
        q
    }

    fn q_lv_out(&self, x: Vec3) -> f64 {
        Self::quad(x, [0.0; 3], self.p.lv_radii)
    }
    fn q_lv_in(&self, x: Vec3) -> f64 {
        Self::quad(x, [0.0; 3], self.lv_inner)
    }
    fn q_rv_out(&self, x: Vec3) -> f64 {
        Self::quad(x, self.p.rv_center, self.p.rv_radii)
    }
    fn q_rv_in(&self, x: Vec3) -> f64 {
        Self::quad(x, self.p.rv_center, self.rv_inner)
    }

    fn in_myocardium(&self, x: Vec3) -> bool {
        if x[2] > self.p.base_cut_height {
            return false;
        }
        let lv_solid = self.q_lv_out(x) <= 1.0;
        let lv_wall = lv_solid && self.q_lv_in(x) >= 1.0;
        let rv_wall = self.q_rv_out(x) <= 1.0 && self.q_rv_in(x) >= 1.0 && !lv_solid;
        lv_wall || rv_wall
    }

    fn region(&self, x: Vec3) -> RegionLabel {
        if self.q_lv_out(x) <= 1.0 {
            RegionLabel::Lv
        } else {
            RegionLabel::Rv
        }
    }

    /// Label for a boundary facet, decided at its centroid.
    fn classify(&self, c: Vec3, base_z: f64, h: f64) -> SurfaceLabel {
        if (c[2] - base_z).abs() < 0.25 * h {
            return SurfaceLabel::Base;
        }
        // Normalized distances to the four candidate surfaces.
        let surf = [
            (self.q_lv_out(c), self.p.lv_radii),
            (self.q_lv_in(c), self.lv_inner),
            (self.q_rv_out(c), self.p.rv_radii),
            (self.q_rv_in(c), self.rv_inner),
        ];
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, (q, radii)) in surf.iter().enumerate() {
            // |q - 1| / |grad q| estimates the distance to the level set q = 1.
            let rmin = radii.iter().cloned().fold(f64::INFINITY, f64::min);
            let d = (q - 1.0).abs() * rmin / 2.0_f64.max(2.0 * q.sqrt());
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        match best {
            0 => {
                // LV outer wall: endocardial where it lines the RV cavity.
                if self.q_rv_in(c) < 1.0 {
                    SurfaceLabel::EndoRv
                } else {
                    SurfaceLabel::Epi
                }
            }
            1 => SurfaceLabel::EndoLv,
            2 => SurfaceLabel::Epi,
            _ => SurfaceLabel::EndoRv,
        }
    }
}

/// Generates the idealized biventricular mesh on a structured lattice:
/// cubes whose centroid falls inside the implicit myocardium are kept and
/// split into six tets. The grid is aligned so a node plane coincides with
/// the base cut, giving an exactly flat base.
pub fn generate_idealized_biventricle(params: &BiventricleParams) -> Result<TetMesh, MeshError> {
    let heart = ImplicitHeart::new(params)?;
    let h = params.target_edge_length;
    let base_z = params.base_cut_height;

    // Lattice extents with one cell of margin.
    let x_min = (-params.lv_radii[0]).min(params.rv_center[0] - params.rv_radii[0]) - h;
    let x_max = (params.lv_radii[0]).max(params.rv_center[0] + params.rv_radii[0]) + h;
    let y_min = (-params.lv_radii[1]).min(params.rv_center[1] - params.rv_radii[1]) - h;
    let y_max = (params.lv_radii[1]).max(params.rv_center[1] + params.rv_radii[1]) + h;
    let z_min = (-params.lv_radii[2]).min(params.rv_center[2] - params.rv_radii[2]) - h;

    let nx = ((x_max - x_min) / h).ceil() as usize;
    let ny = ((y_max - y_min) / h).ceil() as usize;
    let nz = ((base_z - z_min) / h).ceil() as usize;
    if nx * ny * nz > 80_000_000 {
        return Err(MeshError::DegenerateParams(format!(
            "lattice of {}x{}x{} cells is too large; increase target_edge_length",
            nx, ny, nz
        )));
    }
    // Anchor the top node plane exactly at the base cut.
    let origin = [x_min, y_min, base_z - nz as f64 * h];

    let node_id = |i: usize, j: usize, k: usize| -> u64 {
        (i as u64) + (nx as u64 + 1) * ((j as u64) + (ny as u64 + 1) * (k as u64))
    };
    let mut lattice_to_node: HashMap<u64, u32> = HashMap::new();
    let mut nodes: Vec<Vec3> = Vec::new();
    let mut tets: Vec<[u32; 4]> = Vec::new();
    let mut regions: Vec<RegionLabel> = Vec::new();

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let centroid = [
                    origin[0] + (i as f64 + 0.5) * h,
                    origin[1] + (j as f64 + 0.5) * h,
                    origin[2] + (k as f64 + 0.5) * h,
                ];
                if !heart.in_myocardium(centroid) {
                    continue;
                }
                let region = heart.region(centroid);
                let mut corner_ids = [[[0u32; 2]; 2]; 2];
                for dz in 0..2 {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let key = node_id(i + dx, j + dy, k + dz);
                            let id = *lattice_to_node.entry(key).or_insert_with(|| {
                                nodes.push([
                                    origin[0] + (i + dx) as f64 * h,
                                    origin[1] + (j + dy) as f64 * h,
                                    origin[2] + (k + dz) as f64 * h,
                                ]);
                                (nodes.len() - 1) as u32
                            });
                            corner_ids[dx][dy][dz] = id;
                        }
                    }
                }
                let before = tets.len();
                push_kuhn_tets(&mut tets, &nodes, |dx, dy, dz| corner_ids[dx][dy][dz]);
                for _ in before..tets.len() {
                    regions.push(region);
                }
            }
        }
    }
    if tets.is_empty() {
        return Err(MeshError::DegenerateParams(
            "no cells inside the myocardium; check radii vs edge length".into(),
        ));
    }

    let mut boundary_facets = extract_boundary(&nodes, &tets, |centroid, _normal| {
        heart.classify(centroid, base_z, h)
    });
    relabel_apex(&nodes, &mut boundary_facets, params.apex_radius);

    let mesh = TetMesh {
        nodes,
        tets,
        boundary_facets,
        cell_regions: regions,
    };
    for label in SurfaceLabel::ALL {
        if !mesh.boundary_facets.iter().any(|f| f.label == label) {
            return Err(MeshError::MissingLabel(label));
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Relabels the epicardial patch within a geodesic radius of the lowest
/// epicardial point as the apex. Geodesic distance is measured by Dijkstra
/// over the facet adjacency graph with centroid-to-centroid weights.
fn relabel_apex(nodes: &[Vec3], facets: &mut [BoundaryFacet], radius: f64) {
    let epi: Vec<usize> = facets
        .iter()
        .enumerate()
        .filter(|(_, f)| f.label == SurfaceLabel::Epi)
        .map(|(i, _)| i)
        .collect();
    if epi.is_empty() {
        return;
    }
    let centroid = |f: &BoundaryFacet| -> Vec3 {
        let a = nodes[f.nodes[0] as usize];
        let b = nodes[f.nodes[1] as usize];
        let c = nodes[f.nodes[2] as usize];
        [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
            (a[2] + b[2] + c[2]) / 3.0,
        ]
    };
    let centroids: Vec<Vec3> = epi.iter().map(|&i| centroid(&facets[i])).collect();
    // Start facet: lowest epicardial centroid.
    let start = centroids
        .iter()
        .enumerate()
        .min_by(|a, b| a.1[2].partial_cmp(&b.1[2]).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    // Edge adjacency among epi facets.
    let mut edge_map: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (local, &fi) in epi.iter().enumerate() {
        let n = facets[fi].nodes;
        for (a, b) in [(n[0], n[1]), (n[1], n[2]), (n[2], n[0])] {
            let key = (a.min(b), a.max(b));
            edge_map.entry(key).or_default().push(local);
        }
    }
    let mut dist = vec![f64::INFINITY; epi.len()];
    dist[start] = 0.0;
    let mut heap = std::collections::BinaryHeap::new();
    heap.push((std::cmp::Reverse(ordered(0.0)), start));
    while let Some((std::cmp::Reverse(d), u)) = heap.pop() {
        let d = d.0;
        if d > dist[u] {
            continue;
        }
        if d > radius {
            continue;
        }
        let n = facets[epi[u]].nodes;
        for (a, b) in [(n[0], n[1]), (n[1], n[2]), (n[2], n[0])] {
            let key = (a.min(b), a.max(b));
            for &v in &edge_map[&key] {
                if v == u {
                    continue;
                }
                let w = norm3(sub3(centroids[u], centroids[v]));
                if d + w < dist[v] {
                    dist[v] = d + w;
                    heap.push((std::cmp::Reverse(ordered(d + w)), v));
                }
            }
        }
    }
    for (local, &fi) in epi.iter().enumerate() {
        if dist[local] <= radius {
            facets[fi].label = SurfaceLabel::Apex;
        }
    }
}

#[derive(PartialEq)]
struct Ordered(f64);
impl Eq for Ordered {}
impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.partial_cmp(&other.0).unwrap()
    }
}
fn ordered(v: f64) -> Ordered {
    Ordered(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_mesh_is_valid_and_has_expected_counts() {
        let m = structured_box([1.0, 1.0, 1.0], [4, 4, 4], BoxLabels::default());
        assert_eq!(m.node_count(), 125);
        assert_eq!(m.tet_count(), 4 * 4 * 4 * 6);
        let q = m.validate().unwrap();
        assert!(q.min_dihedral_deg > 30.0);
        let v = m.total_volume();
        assert!((v - 1.0).abs() < 1e-12);
        assert!((m.boundary_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_labels_cover_all_faces() {
        let m = structured_box([2.0, 1.0, 1.0], [4, 2, 2], BoxLabels::default());
        let total_area: f64 = m
            .boundary_facets
            .iter()
            .map(|f| norm3(m.facet_area_normal(f)))
            .sum();
        assert!((total_area - (2.0 * (2.0 + 2.0 + 1.0))).abs() < 1e-12);
        let epi = m.boundary_nodes(SurfaceLabel::Epi);
        assert!(epi.iter().all(|&n| m.nodes[n as usize][0].abs() < 1e-12));
        let lv = m.boundary_nodes(SurfaceLabel::EndoLv);
        assert!(lv.iter().all(|&n| (m.nodes[n as usize][0] - 2.0).abs() < 1e-12));
    }

    fn coarse_params() -> BiventricleParams {
        BiventricleParams {
            target_edge_length: 4.0e-4,
            ..BiventricleParams::default()
        }
    }

    #[test]
    fn biventricle_has_all_labels_and_positive_volumes() {
        let m = generate_idealized_biventricle(&coarse_params()).unwrap();
        m.validate().unwrap();
        for label in SurfaceLabel::ALL {
            assert!(
                !m.boundary_nodes(label).is_empty(),
                "missing label {label:?}"
            );
        }
        // watertight volume identity
        let vs = m.total_volume();
        let vb = m.boundary_volume();
        assert!((vs - vb).abs() / vs < 1e-10);
        // both ventricles present
        assert!(m.cell_regions.iter().any(|&r| r == RegionLabel::Lv));
        assert!(m.cell_regions.iter().any(|&r| r == RegionLabel::Rv));
    }

    #[test]
    fn biventricle_base_extent_matches_target() {
        let p = BiventricleParams {
            target_edge_length: 5.0e-4,
            ..BiventricleParams::default()
        };
        let m = generate_idealized_biventricle(&p).unwrap();
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for n in &m.nodes {
            xmin = xmin.min(n[0]);
            xmax = xmax.max(n[0]);
        }
        let extent = xmax - xmin;
        assert!(
            (extent - 8.0e-3).abs() <= p.target_edge_length + 1e-12,
            "extent {extent}"
        );
    }

    #[test]
    fn halving_edge_length_scales_tet_count_by_six_to_ten() {
        let coarse = generate_idealized_biventricle(&BiventricleParams {
            target_edge_length: 8.0e-4,
            ..BiventricleParams::default()
        })
        .unwrap();
        let fine = generate_idealized_biventricle(&BiventricleParams {
            target_edge_length: 4.0e-4,
            ..BiventricleParams::default()
        })
        .unwrap();
        let factor = fine.tet_count() as f64 / coarse.tet_count() as f64;
        assert!((6.0..=10.0).contains(&factor), "factor {factor}");
    }

    #[test]
    fn rv_wall_thicker_than_radius_is_rejected() {
        let p = BiventricleParams {
            rv_wall: 5.0e-3,
            ..BiventricleParams::default()
        };
        assert!(matches!(
            generate_idealized_biventricle(&p),
            Err(MeshError::DegenerateParams(_))
        ));
    }

    #[test]
    fn apex_patch_is_near_lowest_point_and_disjoint_from_base() {
        let m = generate_idealized_biventricle(&coarse_params()).unwrap();
        let apex = m.boundary_nodes(SurfaceLabel::Apex);
        assert!(!apex.is_empty());
        let zmin = m.nodes.iter().map(|n| n[2]).fold(f64::INFINITY, f64::min);
        for &n in &apex {
            assert!(m.nodes[n as usize][2] < zmin + 2.0e-3);
        }
        let base: std::collections::HashSet<u32> =
            m.boundary_nodes(SurfaceLabel::Base).into_iter().collect();
        let apex_facets: Vec<_> = m
            .boundary_facets
            .iter()
            .filter(|f| f.label == SurfaceLabel::Apex)
            .collect();
        for f in apex_facets {
            for n in f.nodes {
                assert!(!base.contains(&n));
            }
        }
    }
}
