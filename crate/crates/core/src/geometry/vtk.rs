//! Legacy ASCII VTK UNSTRUCTURED_GRID reader/writer.
//!
//! The file holds POINTS/CELLS/CELL_TYPES, a CELL_DATA `region` array,
//! optional POINT_DATA scalar/vector arrays, and a trailing `surface_labels`
//! sidecar section (one `i j k label` line per boundary facet). Floats are
//! written with shortest round-trip formatting, so write followed by read is
//! bitwise exact on the data model.

use super::{BoundaryFacet, RegionLabel, SurfaceLabel, TetMesh};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VtkError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
}

fn perr(line: usize, message: impl Into<String>) -> VtkError {
    VtkError::Parse {
        line,
        message: message.into(),
    }
}

/// Node- or cell-attached named arrays carried alongside a mesh.
#[derive(Debug, Clone, Default)]
pub struct FieldData {
    pub point_scalars: BTreeMap<String, Vec<f64>>,
    pub point_vectors: BTreeMap<String, Vec<[f64; 3]>>,
}

/// Outcome of a read: the mesh, any attached fields, and repair notes.
#[derive(Debug)]
pub struct MeshFile {
    pub mesh: TetMesh,
    pub fields: FieldData,
    /// Tets whose orientation was repaired by a vertex swap.
    pub repaired_tets: usize,
}

/// Writes a mesh (and optional fields) to `path`. The `title` line carries
/// caller-supplied provenance.
pub fn write_mesh(
    path: &Path,
    mesh: &TetMesh,
    fields: &FieldData,
    title: &str,
) -> Result<(), VtkError> {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let clean: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    out.push_str(&clean);
    out.push('\n');
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");

    writeln!(out, "POINTS {} double", mesh.node_count()).unwrap();
    for n in &mesh.nodes {
        writeln!(out, "{} {} {}", n[0], n[1], n[2]).unwrap();
    }
    writeln!(out, "CELLS {} {}", mesh.tet_count(), mesh.tet_count() * 5).unwrap();
    for t in &mesh.tets {
        writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]).unwrap();
    }
    writeln!(out, "CELL_TYPES {}", mesh.tet_count()).unwrap();
    for _ in 0..mesh.tet_count() {
        out.push_str("10\n");
    }
    writeln!(out, "CELL_DATA {}", mesh.tet_count()).unwrap();
    out.push_str("SCALARS region int 1\nLOOKUP_TABLE default\n");
    for r in &mesh.cell_regions {
        writeln!(out, "{}", r.as_int()).unwrap();
    }
    if !fields.point_scalars.is_empty() || !fields.point_vectors.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.node_count()).unwrap();
        for (name, values) in &fields.point_scalars {
            if values.len() != mesh.node_count() {
                return Err(VtkError::Validation(format!(
                    "field {name} has {} values for {} nodes",
                    values.len(),
                    mesh.node_count()
                )));
            }
            writeln!(out, "SCALARS {name} double 1").unwrap();
            out.push_str("LOOKUP_TABLE default\n");
            for v in values {
                writeln!(out, "{v}").unwrap();
            }
        }
        for (name, values) in &fields.point_vectors {
            if values.len() != mesh.node_count() {
                return Err(VtkError::Validation(format!(
                    "field {name} has {} values for {} nodes",
                    values.len(),
                    mesh.node_count()
                )));
            }
            writeln!(out, "VECTORS {name} double").unwrap();
            for v in values {
                writeln!(out, "{} {} {}", v[0], v[1], v[2]).unwrap();
            }
        }
    }
    writeln!(out, "surface_labels {}", mesh.boundary_facets.len()).unwrap();
    for f in &mesh.boundary_facets {
        writeln!(
            out,
            "{} {} {} {}",
            f.nodes[0],
            f.nodes[1],
            f.nodes[2],
            f.label.as_int()
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|source| VtkError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn next_nonempty(&mut self) -> Option<(usize, &'a str)> {
        for line in self.iter.by_ref() {
            self.line_no += 1;
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                return Some((self.line_no, trimmed));
            }
        }
        None
    }
}

/// Reads a mesh file written by [`write_mesh`]. Negatively oriented tets are
/// repaired by a vertex swap and counted in the result.
pub fn read_mesh(path: &Path) -> Result<MeshFile, VtkError> {
    let text = std::fs::read_to_string(path).map_err(|source| VtkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<MeshFile, VtkError> {
    let mut lines = Lines {
        iter: text.lines(),
        line_no: 0,
    };
    let (l, header) = lines.next_nonempty().ok_or_else(|| perr(0, "empty file"))?;
    if !header.starts_with("# vtk DataFile") {
        return Err(perr(l, "missing VTK header"));
    }
    lines.next_nonempty(); // title
    let (l, fmt) = lines.next_nonempty().ok_or_else(|| perr(l, "truncated"))?;
    if fmt != "ASCII" {
        return Err(perr(l, format!("expected ASCII, got {fmt}")));
    }
    let (l, ds) = lines.next_nonempty().ok_or_else(|| perr(l, "truncated"))?;
    if ds != "DATASET UNSTRUCTURED_GRID" {
        return Err(perr(l, format!("expected DATASET UNSTRUCTURED_GRID, got {ds}")));
    }

    let mut nodes: Vec<[f64; 3]> = Vec::new();
    let mut tets: Vec<[u32; 4]> = Vec::new();
    let mut regions: Vec<RegionLabel> = Vec::new();
    let mut facets: Vec<BoundaryFacet> = Vec::new();
    let mut fields = FieldData::default();
    let mut in_point_data = false;

    while let Some((l, line)) = lines.next_nonempty() {
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap();
        match keyword {
            "POINTS" => {
                let n: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| perr(l, "bad POINTS count"))?;
                nodes.reserve(n);
                for _ in 0..n {
                    let (l2, row) = lines
                        .next_nonempty()
                        .ok_or_else(|| perr(l, "truncated POINTS"))?;
                    let mut it = row.split_whitespace();
                    let mut p = [0.0; 3];
                    for c in p.iter_mut() {
                        *c = it
                            .next()
                            .and_then(|w| w.parse().ok())
                            .ok_or_else(|| perr(l2, "bad coordinate"))?;
                    }
                    nodes.push(p);
                }
            }
            "CELLS" => {
                let m: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| perr(l, "bad CELLS count"))?;
                tets.reserve(m);
                for _ in 0..m {
                    let (l2, row) = lines
                        .next_nonempty()
                        .ok_or_else(|| perr(l, "truncated CELLS"))?;
                    let mut it = row.split_whitespace();
                    let k: usize = it
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| perr(l2, "bad cell size"))?;
                    if k != 4 {
                        return Err(perr(l2, format!("only tetra cells supported, got size {k}")));
                    }
                    let mut t = [0u32; 4];
                    for v in t.iter_mut() {
                        let idx: u64 = it
                            .next()
                            .and_then(|w| w.parse().ok())
                            .ok_or_else(|| perr(l2, "bad node index"))?;
                        if idx as usize >= nodes.len() {
                            return Err(perr(
                                l2,
                                format!("node index {idx} out of range ({} nodes)", nodes.len()),
                            ));
                        }
                        *v = idx as u32;
                    }
                    tets.push(t);
                }
            }
            "CELL_TYPES" => {
                let m: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| perr(l, "bad CELL_TYPES count"))?;
                for _ in 0..m {
                    let (l2, row) = lines
                        .next_nonempty()
                        .ok_or_else(|| perr(l, "truncated CELL_TYPES"))?;
                    if row != "10" {
                        return Err(perr(l2, format!("unsupported cell type {row}")));
                    }
                }
            }
            "CELL_DATA" => {
                in_point_data = false;
            }
            "POINT_DATA" => {
                in_point_data = true;
            }
            "SCALARS" => {
                let name = words
                    .next()
                    .ok_or_else(|| perr(l, "SCALARS without name"))?
                    .to_string();
                let (l2, lut) = lines.next_nonempty().ok_or_else(|| perr(l, "truncated"))?;
                if !lut.starts_with("LOOKUP_TABLE") {
                    return Err(perr(l2, "expected LOOKUP_TABLE"));
                }
                let count = if in_point_data { nodes.len() } else { tets.len() };
                let mut values = Vec::with_capacity(count);
                for _ in 0..count {
                    let (l3, row) = lines
                        .next_nonempty()
                        .ok_or_else(|| perr(l2, "truncated SCALARS"))?;
                    let v: f64 = row
                        .split_whitespace()
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| perr(l3, "bad scalar value"))?;
                    values.push(v);
                }
                if in_point_data {
                    fields.point_scalars.insert(name, values);
                } else if name == "region" {
                    regions = values
                        .iter()
                        .map(|&v| {
                            RegionLabel::from_int(v as i32).ok_or_else(|| {
                                VtkError::Validation(format!("unknown region label {v}"))
                            })
                        })
                        .collect::<Result<_, _>>()?;
                }
            }
            "VECTORS" => {
                let name = words
                    .next()
                    .ok_or_else(|| perr(l, "VECTORS without name"))?
                    .to_string();
                let count = if in_point_data { nodes.len() } else { tets.len() };
                let mut values = Vec::with_capacity(count);
                for _ in 0..count {
                    let (l2, row) = lines
                        .next_nonempty()
                        .ok_or_else(|| perr(l, "truncated VECTORS"))?;
                    let mut it = row.split_whitespace();
                    let mut v = [0.0; 3];
                    for c in v.iter_mut() {
                        *c = it
                            .next()
                            .and_then(|w| w.parse().ok())
                            .ok_or_else(|| perr(l2, "bad vector component"))?;
                    }
                    values.push(v);
                }
                if in_point_data {
                    fields.point_vectors.insert(name, values);
                }
            }
            "surface_labels" => {
                let m: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| perr(l, "bad surface_labels count"))?;
                facets.reserve(m);
                for _ in 0..m {
                    let (l2, row) = lines
                        .next_nonempty()
                        .ok_or_else(|| perr(l, "truncated surface_labels"))?;
                    let mut it = row.split_whitespace();
                    let mut tri = [0u32; 3];
                    for v in tri.iter_mut() {
                        let idx: u64 = it
                            .next()
                            .and_then(|w| w.parse().ok())
                            .ok_or_else(|| perr(l2, "bad facet index"))?;
                        if idx as usize >= nodes.len() {
                            return Err(perr(
                                l2,
                                format!("facet node index {idx} out of range ({} nodes)", nodes.len()),
                            ));
                        }
                        *v = idx as u32;
                    }
                    let label_int: i32 = it
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| perr(l2, "bad facet label"))?;
                    let label = SurfaceLabel::from_int(label_int)
                        .ok_or_else(|| VtkError::Validation(format!("unknown surface label {label_int}")))?;
                    facets.push(BoundaryFacet { nodes: tri, label });
                }
            }
            "LOOKUP_TABLE" | "FIELD" => {}
            other => {
                return Err(perr(l, format!("unknown section keyword {other}")));
            }
        }
    }
    if nodes.is_empty() || tets.is_empty() {
        return Err(perr(lines.line_no, "file has no POINTS/CELLS"));
    }
    if regions.len() != tets.len() {
        regions = vec![RegionLabel::Lv; tets.len()];
    }
    let mut mesh = TetMesh {
        nodes,
        tets,
        boundary_facets: facets,
        cell_regions: regions,
    };
    // Orientation repair: swap last two vertices of inverted tets.
    let mut repaired = 0;
    for t in 0..mesh.tet_count() {
        if mesh.tet_volume(t) < 0.0 {
            mesh.tets[t].swap(2, 3);
            repaired += 1;
        }
    }
    Ok(MeshFile {
        mesh,
        fields,
        repaired_tets: repaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{structured_box, BoxLabels};

    #[test]
    fn write_read_roundtrip_is_bitwise_identical() {
        let mesh = structured_box([1.0, 0.5, 0.25], [2, 1, 1], BoxLabels::default());
        let mut fields = FieldData::default();
        fields.point_scalars.insert(
            "phi".into(),
            (0..mesh.node_count()).map(|i| (i as f64).sin()).collect(),
        );
        let dir = std::env::temp_dir().join("fiberkit_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.vtk");
        write_mesh(&path, &mesh, &fields, "roundtrip test").unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.repaired_tets, 0);
        assert_eq!(back.mesh.tets, mesh.tets);
        for (a, b) in back.mesh.nodes.iter().zip(&mesh.nodes) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
            assert_eq!(a[2].to_bits(), b[2].to_bits());
        }
        assert_eq!(back.mesh.boundary_facets.len(), mesh.boundary_facets.len());
        let phi = &back.fields.point_scalars["phi"];
        for (i, v) in phi.iter().enumerate() {
            assert_eq!(v.to_bits(), (i as f64).sin().to_bits());
        }
    }

    #[test]
    fn out_of_range_facet_index_is_a_parse_error() {
        let text = "# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\n\
POINTS 4 double\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n\
CELLS 1 5\n4 0 1 2 3\nCELL_TYPES 1\n10\n\
surface_labels 1\n0 1 9 0\n";
        let err = parse_mesh(text).unwrap_err();
        match err {
            VtkError::Parse { line, message } => {
                assert!(message.contains("out of range"), "{message}");
                assert!(line > 0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn inverted_tet_is_repaired_with_count() {
        let text = "# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\n\
POINTS 4 double\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n\
CELLS 1 5\n4 1 0 2 3\nCELL_TYPES 1\n10\n";
        let out = parse_mesh(text).unwrap();
        assert_eq!(out.repaired_tets, 1);
        assert!(out.mesh.tet_volume(0) > 0.0);
    }
}
