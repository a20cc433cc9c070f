//! P1 finite-element Laplace/Helmholtz machinery on tetrahedral meshes:
//! sparse assembly, symmetric Dirichlet elimination, Jacobi-preconditioned
//! conjugate gradients, and volume-weighted gradient recovery.
//!
//! All reductions go through [`crate::par`], so solves are deterministic
//! regardless of thread count.

use crate::geometry::{SurfaceLabel, TetMesh};
use crate::math::{cross3, dot3, scale3, sub3, Vec3};
use crate::par;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("ill-posed problem: no Dirichlet-constrained nodes")]
    NoConstraints,
    #[error("conjugate gradient did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("field length {found} does not match node count {expected}")]
    FieldLength { found: usize, expected: usize },
    #[error("non-finite value in field at node {0}")]
    NonFinite(usize),
}

/// One real value per mesh node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> ScalarField {
        ScalarField { values }
    }

    pub fn validate(&self, mesh: &TetMesh) -> Result<(), SolveError> {
        if self.values.len() != mesh.node_count() {
            return Err(SolveError::FieldLength {
                found: self.values.len(),
                expected: mesh.node_count(),
            });
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite(i));
        }
        Ok(())
    }
}

/// Constant Dirichlet data per surface label; everything else gets the
/// natural zero-flux condition.
#[derive(Debug, Clone)]
pub struct DirichletSpec {
    pub entries: Vec<(SurfaceLabel, f64)>,
}

impl DirichletSpec {
    pub fn new(entries: Vec<(SurfaceLabel, f64)>) -> DirichletSpec {
        DirichletSpec { entries }
    }
}

/// Compressed sparse row matrix (square, symmetric usage only).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from unsorted triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(u32, u32, f64)>) -> CsrMatrix {
        triplets.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &(r, c, v) in triplets.iter() {
            if let (Some(&last_c), true) = (col_idx.last(), row_ptr[r as usize + 1] > 0) {
                // same row as previous entry?
                let in_same_row = col_idx.len() > row_ptr[r as usize];
                if in_same_row && last_c == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            // close out rows up to r
            while row_ptr[r as usize] == 0 && r > 0 && row_ptr.iter().take(r as usize + 1).any(|_| true) {
                break;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r as usize + 1] = col_idx.len();
        }
        // make row_ptr monotone (rows may be empty)
        for i in 0..n {
            if row_ptr[i + 1] < row_ptr[i] {
                row_ptr[i + 1] = row_ptr[i];
            }
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        par::map_indexed(self.n, |r| {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            acc
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] as usize == r {
                    d[r] += self.values[k];
                }
            }
        }
        d
    }
}

/// Gradients of the four P1 shape functions on a tet, plus its volume.
pub fn shape_gradients(p: [Vec3; 4]) -> ([Vec3; 4], f64) {
    let e1 = sub3(p[1], p[0]);
    let e2 = sub3(p[2], p[0]);
    let e3 = sub3(p[3], p[0]);
    let vol6 = dot3(e1, cross3(e2, e3));
    let inv = 1.0 / vol6;
    let g1 = scale3(cross3(e2, e3), inv);
    let g2 = scale3(cross3(e3, e1), inv);
    let g3 = scale3(cross3(e1, e2), inv);
    let g0 = [-g1[0] - g2[0] - g3[0], -g1[1] - g2[1] - g3[1], -g1[2] - g2[2] - g3[2]];
    ([g0, g1, g2, g3], vol6 / 6.0)
}

/// Assembles the P1 stiffness matrix `K_ij = sum_T V_T grad phi_i . grad phi_j`.
///
/// Element matrices are computed in parallel; the scatter into CSR storage is
/// sequential, keeping the result independent of scheduling.
pub fn assemble_stiffness(mesh: &TetMesh) -> CsrMatrix {
    let n = mesh.node_count();
    let elements: Vec<([u32; 4], [[f64; 4]; 4])> = par::map_indexed(mesh.tet_count(), |t| {
        let (grads, vol) = shape_gradients(mesh.tet_nodes(t));
        let mut ke = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                ke[i][j] = vol * dot3(grads[i], grads[j]);
            }
        }
        (mesh.tets[t], ke)
    });
    let mut triplets = Vec::with_capacity(mesh.tet_count() * 16);
    for (tet, ke) in &elements {
        for i in 0..4 {
            for j in 0..4 {
                triplets.push((tet[i], tet[j], ke[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, &mut triplets)
}

/// Lumped mass vector `M_i = sum_T V_T / 4`.
pub fn lumped_mass(mesh: &TetMesh) -> Vec<f64> {
    mesh.lumped_node_volumes()
}

/// Options for the conjugate-gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// Iteration cap as a multiple of the unknown count.
    pub max_iter_factor: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rel_tol: 1e-12,
            max_iter_factor: 10,
        }
    }
}

/// Jacobi-preconditioned CG for SPD systems.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    opts: CgOptions,
) -> Result<Vec<f64>, SolveError> {
    let n = a.n;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 0.0 })
        .collect();
    let norm_b = par::dot(b, b).sqrt();
    if norm_b == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = par::map_indexed(n, |i| inv_diag[i] * r[i]);
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    let max_iter = opts.max_iter_factor.saturating_mul(n).max(100);
    for _ in 0..max_iter {
        let ap = a.matvec(&p);
        let pap = par::dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolveError::NoConvergence {
                residual: par::dot(&r, &r).sqrt() / norm_b,
                iterations: 0,
            });
        }
        let alpha = rz / pap;
        par::update_in_place(&mut x, |i, v| v + alpha * p[i]);
        par::update_in_place(&mut r, |i, v| v - alpha * ap[i]);
        let res = par::dot(&r, &r).sqrt();
        if res <= opts.rel_tol * norm_b {
            return Ok(x);
        }
        z = par::map_indexed(n, |i| inv_diag[i] * r[i]);
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        par::update_in_place(&mut p, |i, v| z[i] + beta * v);
    }
    Err(SolveError::NoConvergence {
        residual: par::dot(&r, &r).sqrt() / norm_b,
        iterations: max_iter,
    })
}

/// Solves `A u = f` subject to prescribed nodal values, by symmetric
/// row/column elimination onto the free unknowns.
pub fn solve_constrained(
    a: &CsrMatrix,
    rhs: &[f64],
    fixed: &[(u32, f64)],
    opts: CgOptions,
) -> Result<Vec<f64>, SolveError> {
    let n = a.n;
    if fixed.is_empty() {
        return Err(SolveError::NoConstraints);
    }
    let mut fixed_value = vec![f64::NAN; n];
    for &(node, value) in fixed {
        fixed_value[node as usize] = value;
    }
    let free_index: Vec<i64> = {
        let mut idx = vec![-1i64; n];
        let mut next = 0i64;
        for i in 0..n {
            if fixed_value[i].is_nan() {
                idx[i] = next;
                next += 1;
            }
        }
        idx
    };
    let n_free = free_index.iter().filter(|&&i| i >= 0).count();
    if n_free == 0 {
        // fully constrained
        return Ok((0..n).map(|i| fixed_value[i]).collect());
    }
    // Reduced matrix and right-hand side.
    let mut row_ptr = Vec::with_capacity(n_free + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut b = vec![0.0; n_free];
    row_ptr.push(0);
    for i in 0..n {
        let fi = free_index[i];
        if fi < 0 {
            continue;
        }
        b[fi as usize] += rhs[i];
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.col_idx[k] as usize;
            let fj = free_index[j];
            if fj >= 0 {
                col_idx.push(fj as u32);
                values.push(a.values[k]);
            } else {
                b[fi as usize] -= a.values[k] * fixed_value[j];
            }
        }
        row_ptr.push(col_idx.len());
    }
    let reduced = CsrMatrix {
        n: n_free,
        row_ptr,
        col_idx,
        values,
    };
    let u_free = conjugate_gradient(&reduced, &b, opts)?;
    let mut u = vec![0.0; n];
    for i in 0..n {
        let fi = free_index[i];
        u[i] = if fi >= 0 {
            u_free[fi as usize]
        } else {
            fixed_value[i]
        };
    }
    Ok(u)
}

/// Expands a [`DirichletSpec`] into nodal constraints. Later entries win on
/// nodes shared between labeled patches.
pub fn dirichlet_nodes(mesh: &TetMesh, bcs: &DirichletSpec) -> Vec<(u32, f64)> {
    let mut out: Vec<(u32, f64)> = Vec::new();
    for &(label, value) in &bcs.entries {
        for node in mesh.boundary_nodes(label) {
            out.push((node, value));
        }
    }
    // Deduplicate, keeping the last assignment per node.
    let mut map = std::collections::BTreeMap::new();
    for (node, value) in out {
        map.insert(node, value);
    }
    map.into_iter().collect()
}

/// Solves the Laplace-Dirichlet problem with constant data per surface label
/// and natural conditions elsewhere.
pub fn solve_laplace(mesh: &TetMesh, bcs: &DirichletSpec) -> Result<ScalarField, SolveError> {
    let fixed = dirichlet_nodes(mesh, bcs);
    if fixed.is_empty() {
        return Err(SolveError::NoConstraints);
    }
    let k = assemble_stiffness(mesh);
    let rhs = vec![0.0; mesh.node_count()];
    let values = solve_constrained(&k, &rhs, &fixed, CgOptions::default())?;
    Ok(ScalarField::new(values))
}

/// Laplace solve with arbitrary per-node Dirichlet data. Used for
/// manufactured-solution verification.
pub fn solve_laplace_nodal(
    mesh: &TetMesh,
    fixed: &[(u32, f64)],
) -> Result<ScalarField, SolveError> {
    let k = assemble_stiffness(mesh);
    let rhs = vec![0.0; mesh.node_count()];
    let values = solve_constrained(&k, &rhs, fixed, CgOptions::default())?;
    Ok(ScalarField::new(values))
}

/// Per-node gradient: tet-constant P1 gradients averaged with tet-volume
/// weights over each node's incident cells.
pub fn recover_gradient(mesh: &TetMesh, field: &ScalarField) -> Result<Vec<Vec3>, SolveError> {
    field.validate(mesh)?;
    let cell_grads: Vec<(Vec3, f64)> = par::map_indexed(mesh.tet_count(), |t| {
        let (grads, vol) = shape_gradients(mesh.tet_nodes(t));
        let mut g = [0.0; 3];
        for (i, &node) in mesh.tets[t].iter().enumerate() {
            let u = field.values[node as usize];
            g[0] += u * grads[i][0];
            g[1] += u * grads[i][1];
            g[2] += u * grads[i][2];
        }
        (g, vol)
    });
    let vertex_cells = mesh.vertex_cells();
    Ok(par::map_indexed(mesh.node_count(), |v| {
        let mut acc = [0.0; 3];
        let mut w = 0.0;
        for &c in vertex_cells.cells_of(v) {
            let (g, vol) = cell_grads[c as usize];
            acc = crate::math::add3(acc, scale3(g, vol));
            w += vol;
        }
        if w > 0.0 {
            scale3(acc, 1.0 / w)
        } else {
            acc
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{structured_box, BoxLabels};
    use approx::assert_relative_eq;

    fn unit_cube(n: usize) -> TetMesh {
        structured_box([1.0, 1.0, 1.0], [n, n, n], BoxLabels::default())
    }

    #[test]
    fn linear_solution_is_exact() {
        // x=0 face is Epi, x=1 face is EndoLv under the default box labels.
        let mesh = unit_cube(5);
        let field = solve_laplace(
            &mesh,
            &DirichletSpec::new(vec![(SurfaceLabel::Epi, 0.0), (SurfaceLabel::EndoLv, 1.0)]),
        )
        .unwrap();
        for (i, node) in mesh.nodes.iter().enumerate() {
            assert_relative_eq!(field.values[i], node[0], epsilon = 1e-10);
        }
    }

    #[test]
    fn constant_dirichlet_gives_constant_field() {
        let mesh = unit_cube(4);
        let c = 0.7;
        let field = solve_laplace(
            &mesh,
            &DirichletSpec::new(vec![
                (SurfaceLabel::Epi, c),
                (SurfaceLabel::EndoLv, c),
                (SurfaceLabel::EndoRv, c),
                (SurfaceLabel::Base, c),
                (SurfaceLabel::Apex, c),
            ]),
        )
        .unwrap();
        for v in &field.values {
            assert_relative_eq!(*v, c, epsilon = 1e-10);
        }
    }

    #[test]
    fn no_dirichlet_is_rejected() {
        let mesh = unit_cube(2);
        let err = solve_laplace(&mesh, &DirichletSpec::new(vec![])).unwrap_err();
        assert!(matches!(err, SolveError::NoConstraints));
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let mesh = unit_cube(4);
        let field = ScalarField::new(
            mesh.nodes
                .iter()
                .map(|n| n[0] + 2.0 * n[1] - n[2])
                .collect(),
        );
        let grads = recover_gradient(&mesh, &field).unwrap();
        for g in &grads {
            assert_relative_eq!(g[0], 1.0, epsilon = 1e-10);
            assert_relative_eq!(g[1], 2.0, epsilon = 1e-10);
            assert_relative_eq!(g[2], -1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn gradient_of_constant_field_is_zero() {
        let mesh = unit_cube(3);
        let field = ScalarField::new(vec![4.2; mesh.node_count()]);
        let grads = recover_gradient(&mesh, &field).unwrap();
        for g in &grads {
            assert!(crate::math::norm3(*g) < 1e-12);
        }
    }

    /// Dense-matrix Gaussian elimination oracle on a coarse mesh.
    #[test]
    fn cg_matches_dense_factorization_oracle() {
        let mesh = unit_cube(3);
        let bcs = DirichletSpec::new(vec![
            (SurfaceLabel::Epi, 0.0),
            (SurfaceLabel::EndoRv, -1.0),
            (SurfaceLabel::EndoLv, 2.0),
        ]);
        let solved = solve_laplace(&mesh, &bcs).unwrap();

        // Independent dense assembly + LU solve.
        let n = mesh.node_count();
        let mut a = vec![vec![0.0; n]; n];
        for t in 0..mesh.tet_count() {
            let (grads, vol) = shape_gradients(mesh.tet_nodes(t));
            for i in 0..4 {
                for j in 0..4 {
                    a[mesh.tets[t][i] as usize][mesh.tets[t][j] as usize] +=
                        vol * dot3(grads[i], grads[j]);
                }
            }
        }
        let fixed = dirichlet_nodes(&mesh, &bcs);
        let mut b = vec![0.0; n];
        for &(node, value) in &fixed {
            let i = node as usize;
            for j in 0..n {
                if j != i {
                    b[j] -= a[j][i] * value;
                    a[j][i] = 0.0;
                    a[i][j] = 0.0;
                }
            }
            a[i][i] = 1.0;
            b[i] = value;
        }
        // Gaussian elimination with partial pivoting.
        let mut aug: Vec<Vec<f64>> = a
            .into_iter()
            .zip(b.iter())
            .map(|(mut row, &rhs)| {
                row.push(rhs);
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, pivot);
            let p = aug[col][col];
            for r in (col + 1)..n {
                let f = aug[r][col] / p;
                for c in col..=n {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let mut acc = aug[r][n];
            for c in (r + 1)..n {
                acc -= aug[r][c] * x[c];
            }
            x[r] = acc / aug[r][r];
        }
        let mut max_err: f64 = 0.0;
        for i in 0..n {
            max_err = max_err.max((x[i] - solved.values[i]).abs());
            assert!(solved.values[i] >= -1.0 - 1e-9 && solved.values[i] <= 2.0 + 1e-9);
        }
        assert!(max_err < 1e-9, "max deviation {max_err}");
    }

    #[test]
    fn extrema_occur_on_dirichlet_boundary() {
        let mesh = unit_cube(6);
        let bcs = DirichletSpec::new(vec![
            (SurfaceLabel::Epi, 0.0),
            (SurfaceLabel::EndoLv, 2.0),
            (SurfaceLabel::EndoRv, -1.0),
        ]);
        let field = solve_laplace(&mesh, &bcs).unwrap();
        let lo = field.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = field
            .values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(lo >= -1.0 - 1e-8);
        assert!(hi <= 2.0 + 1e-8);
    }
}
