//! Global assembly, static condensation and the sparse direct solve.
//!
//! The full unknown vector stores all cell blocks first (element order), then
//! the blocks of every face (face order). Boundary faces carry the homogeneous
//! Dirichlet condition, so their blocks stay zero and are left out of the
//! linear systems. The condensed system couples interior face unknowns only.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Point};
use crate::hho::{LocalOperators, MeshSpaces};
use crate::spaces::l2_project_cell;

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub cell_offsets: Vec<usize>,
    pub face_offsets: Vec<usize>,
    pub face_dims: Vec<usize>,
    pub boundary: Vec<bool>,
    /// Offset of each interior face block in the condensed system.
    pub condensed: Vec<Option<usize>>,
    pub n_cell: usize,
    pub n_face: usize,
    pub n_condensed: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, spaces: &MeshSpaces) -> Self {
        let nk = spaces.cell_dim();
        let cell_offsets: Vec<usize> = (0..mesh.num_elements()).map(|e| e * nk).collect();
        let n_cell = nk * mesh.num_elements();
        let face_dims: Vec<usize> = spaces.face_spaces.iter().map(|f| f.dim()).collect();
        let boundary: Vec<bool> = mesh.faces.iter().map(|f| f.is_boundary()).collect();
        let mut face_offsets = Vec::with_capacity(face_dims.len());
        let mut condensed = Vec::with_capacity(face_dims.len());
        let (mut off, mut coff) = (n_cell, 0);
        for (d, b) in face_dims.iter().zip(&boundary) {
            face_offsets.push(off);
            off += d;
            if *b {
                condensed.push(None);
            } else {
                condensed.push(Some(coff));
                coff += d;
            }
        }
        Self {
            cell_offsets,
            face_offsets,
            face_dims,
            boundary,
            condensed,
            n_cell,
            n_face: off - n_cell,
            n_condensed: coff,
        }
    }

    pub fn total(&self) -> usize {
        self.n_cell + self.n_face
    }

    /// Full-vector index of every local unknown of `elem`.
    pub fn local_indices(&self, mesh: &Mesh, elem: usize) -> Vec<usize> {
        let nk = self.n_cell / mesh.num_elements().max(1);
        let mut idx: Vec<usize> = (0..nk).map(|j| self.cell_offsets[elem] + j).collect();
        for r in &mesh.elements[elem].faces {
            idx.extend((0..self.face_dims[r.face]).map(|l| self.face_offsets[r.face] + l));
        }
        idx
    }

    /// Condensed-system index of each local face unknown (`None` on boundary faces).
    pub fn local_condensed(&self, mesh: &Mesh, elem: usize) -> Vec<Option<usize>> {
        let mut idx = Vec::new();
        for r in &mesh.elements[elem].faces {
            let d = self.face_dims[r.face];
            match self.condensed[r.face] {
                Some(o) => idx.extend((0..d).map(|l| Some(o + l))),
                None => idx.extend(std::iter::repeat_n(None, d)),
            }
        }
        idx
    }

    /// Index in the uncondensed reduced system (cells, then interior faces).
    fn reduced(&self, full: usize) -> Option<usize> {
        if full < self.n_cell {
            return Some(full);
        }
        let f = self.face_offsets.partition_point(|&o| o <= full) - 1;
        self.condensed[f].map(|c| self.n_cell + c + (full - self.face_offsets[f]))
    }

    pub fn extract_local(&self, mesh: &Mesh, elem: usize, full: &DVector<f64>) -> DVector<f64> {
        let idx = self.local_indices(mesh, elem);
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| full[i]))
    }
}

/// Symmetric sparse matrix as sorted, deduplicated `(row, col, value)` triplets.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    fn from_unsorted(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)).then(a.2.total_cmp(&b.2)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        Self { n, entries: out }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let d = self.to_dense();
        (&d - d.transpose()).amax() / d.amax().max(f64::MIN_POSITIVE)
    }

    /// Sparse Cholesky solve; fails when a pivot is not positive.
    pub fn cholesky_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let trips: Vec<Triplet<usize, usize, f64>> = self
            .entries
            .iter()
            .filter(|(r, c, _)| r >= c)
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &trips)
            .map_err(|e| Error::conditioning("global system", format!("{e:?}")))?;
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::conditioning("global system", format!("Cholesky factorisation failed: {e:?}")))?;
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = llt.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::conditioning("global system", "non-finite solution"));
        }
        Ok(out)
    }
}

/// Per-element data needed to recover cell unknowns from face unknowns.
#[derive(Clone, Debug)]
pub struct CellRecovery {
    factor: Cholesky<f64, Dyn>,
    a_tf: DMatrix<f64>,
    b_t: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub dofmap: DofMap,
    pub matrix: SparseSym,
    pub rhs: Vec<f64>,
    pub recovery: Vec<CellRecovery>,
}

/// `int_T f phi_j` for the cell basis of every element.
pub fn load_vectors(
    mesh: &Mesh,
    spaces: &MeshSpaces,
    f: &(impl Fn(&Point) -> f64 + Sync),
) -> Result<Vec<DVector<f64>>> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let rule = &spaces.elem_rules[e];
            let tab = spaces.cell_bases[e].tabulate(&rule.points);
            l2_project_cell(f, &tab.values, rule, spaces.cell_dim())
        })
        .collect()
}

/// Condensed global system.
pub fn assemble(
    mesh: &Mesh,
    spaces: &MeshSpaces,
    ops: &[LocalOperators],
    f: &(impl Fn(&Point) -> f64 + Sync),
) -> Result<GlobalSystem> {
    let dofmap = DofMap::new(mesh, spaces);
    let loads = load_vectors(mesh, spaces, f)?;
    let nk = spaces.cell_dim();
    let parts = ops
        .par_iter()
        .zip(loads.par_iter())
        .map(|(op, b_t)| {
            let e = op.element;
            let a = &op.stiffness;
            let nf = a.nrows() - nk;
            let a_tt = a.view((0, 0), (nk, nk)).into_owned();
            let a_tf = a.view((0, nk), (nk, nf)).into_owned();
            let a_ff = a.view((nk, nk), (nf, nf));
            let factor = Cholesky::new(a_tt).ok_or_else(|| Error::Assembly {
                element: e,
                detail: "cell block is not positive definite".into(),
            })?;
            let x = factor.solve(&a_tf);
            let schur = a_ff - a_tf.transpose() * &x;
            let g = -(a_tf.transpose() * factor.solve(b_t));
            let idx = dofmap.local_condensed(mesh, e);
            let mut trips = Vec::new();
            let mut rhs = Vec::new();
            for (i, ri) in idx.iter().enumerate() {
                let Some(ri) = ri else { continue };
                rhs.push((*ri, g[i]));
                for (j, cj) in idx.iter().enumerate() {
                    if let Some(cj) = cj {
                        trips.push((*ri, *cj, 0.5 * (schur[(i, j)] + schur[(j, i)])));
                    }
                }
            }
            Ok((
                trips,
                rhs,
                CellRecovery {
                    factor,
                    a_tf,
                    b_t: b_t.clone(),
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trips = Vec::new();
    let mut rhs = vec![0.0; dofmap.n_condensed];
    let mut recovery = Vec::with_capacity(parts.len());
    for (t, r, rec) in parts {
        trips.extend(t);
        for (i, v) in r {
            rhs[i] += v;
        }
        recovery.push(rec);
    }
    Ok(GlobalSystem {
        matrix: SparseSym::from_unsorted(dofmap.n_condensed, trips),
        rhs,
        recovery,
        dofmap,
    })
}

#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub dofmap: DofMap,
    /// Full unknown vector: cells, then all faces (boundary blocks are zero).
    pub dofs: DVector<f64>,
    /// Reconstruction coefficients on the degree `k+1` cell basis, per element.
    pub potentials: Vec<DVector<f64>>,
    /// `|A x - b| / |b|` of the system actually solved.
    pub relative_residual: f64,
}

impl DiscreteSolution {
    pub fn local(&self, mesh: &Mesh, elem: usize) -> DVector<f64> {
        self.dofmap.extract_local(mesh, elem, &self.dofs)
    }
}

fn relative_residual(m: &SparseSym, x: &[f64], b: &[f64]) -> f64 {
    let ax = m.mul(x);
    let r: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

fn finish(mesh: &Mesh, ops: &[LocalOperators], dofmap: DofMap, dofs: DVector<f64>, res: f64) -> DiscreteSolution {
    let potentials = ops
        .par_iter()
        .map(|op| &op.reconstruction * dofmap.extract_local(mesh, op.element, &dofs))
        .collect();
    DiscreteSolution {
        dofmap,
        dofs,
        potentials,
        relative_residual: res,
    }
}

/// Solves the condensed system and recovers the cell unknowns.
pub fn solve(mesh: &Mesh, ops: &[LocalOperators], system: &GlobalSystem) -> Result<DiscreteSolution> {
    let xf = system.matrix.cholesky_solve(&system.rhs)?;
    let res = relative_residual(&system.matrix, &xf, &system.rhs);
    let dm = &system.dofmap;
    let mut dofs = DVector::zeros(dm.total());
    for (f, c) in dm.condensed.iter().enumerate() {
        if let Some(c) = c {
            for l in 0..dm.face_dims[f] {
                dofs[dm.face_offsets[f] + l] = xf[c + l];
            }
        }
    }
    let cells: Vec<DVector<f64>> = system
        .recovery
        .par_iter()
        .enumerate()
        .map(|(e, rec)| {
            let idx = dm.local_condensed(mesh, e);
            let uf = DVector::from_iterator(idx.len(), idx.iter().map(|i| i.map_or(0.0, |i| xf[i])));
            rec.factor.solve(&(&rec.b_t - &rec.a_tf * uf))
        })
        .collect();
    for (e, u) in cells.iter().enumerate() {
        dofs.rows_mut(dm.cell_offsets[e], u.len()).copy_from(u);
    }
    Ok(finish(mesh, ops, system.dofmap.clone(), dofs, res))
}

/// Uncondensed reduced system over cells and interior faces, with its right-hand side.
pub fn assemble_uncondensed(
    mesh: &Mesh,
    spaces: &MeshSpaces,
    ops: &[LocalOperators],
    f: &(impl Fn(&Point) -> f64 + Sync),
) -> Result<(DofMap, SparseSym, Vec<f64>)> {
    let dm = DofMap::new(mesh, spaces);
    let loads = load_vectors(mesh, spaces, f)?;
    let n = dm.n_cell + dm.n_condensed;
    let mut trips = Vec::new();
    let mut rhs = vec![0.0; n];
    for op in ops {
        let e = op.element;
        let idx: Vec<Option<usize>> = dm.local_indices(mesh, e).iter().map(|&i| dm.reduced(i)).collect();
        for (i, ri) in idx.iter().enumerate() {
            let Some(ri) = ri else { continue };
            for (j, cj) in idx.iter().enumerate() {
                if let Some(cj) = cj {
                    trips.push((*ri, *cj, op.stiffness[(i, j)]));
                }
            }
        }
        for (j, v) in loads[e].iter().enumerate() {
            rhs[dm.cell_offsets[e] + j] += v;
        }
    }
    Ok((dm, SparseSym::from_unsorted(n, trips), rhs))
}

/// Debug path: solves the uncondensed system directly.
pub fn solve_uncondensed(
    mesh: &Mesh,
    spaces: &MeshSpaces,
    ops: &[LocalOperators],
    f: &(impl Fn(&Point) -> f64 + Sync),
) -> Result<DiscreteSolution> {
    let (dm, m, rhs) = assemble_uncondensed(mesh, spaces, ops, f)?;
    let x = m.cholesky_solve(&rhs)?;
    let res = relative_residual(&m, &x, &rhs);
    let mut dofs = DVector::zeros(dm.total());
    for i in 0..dm.total() {
        if let Some(r) = dm.reduced(i) {
            dofs[i] = x[r];
        }
    }
    Ok(finish(mesh, ops, dm, dofs, res))
}

/// `(sum_T a_T(v_T, v_T))^{1/2}` for a full unknown vector.
pub fn energy_norm(mesh: &Mesh, dofmap: &DofMap, ops: &[LocalOperators], dofs: &DVector<f64>) -> f64 {
    ops.iter()
        .map(|op| op.energy(&dofmap.extract_local(mesh, op.element, dofs)))
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// Global bilinear form `a_h(u, v)`.
pub fn bilinear(mesh: &Mesh, dofmap: &DofMap, ops: &[LocalOperators], u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    ops.iter()
        .map(|op| {
            let ul = dofmap.extract_local(mesh, op.element, u);
            let vl = dofmap.extract_local(mesh, op.element, v);
            vl.dot(&(&op.stiffness * ul))
        })
        .sum()
}

/// Per-element reconstruction coefficients with the basis metadata needed to evaluate them.
///
/// Each element block lists the centroid, scale, monomial exponents, the
/// basis-to-monomial coefficient matrix and the reconstruction coefficients.
pub fn solution_to_string(spaces: &MeshSpaces, sol: &DiscreteSolution) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# k {} elements {}", spaces.k, sol.potentials.len());
    for (e, (b, p)) in spaces.cell_bases.iter().zip(&sol.potentials).enumerate() {
        let m = &b.monomials;
        let _ = writeln!(
            s,
            "element {e} center {:.16e} {:.16e} scale {:.16e}",
            m.center.x, m.center.y, m.scale
        );
        let ex: Vec<String> = m.exponents.iter().map(|(a, b)| format!("{a},{b}")).collect();
        let _ = writeln!(s, "exponents {}", ex.join(" "));
        let mono = b.to_monomials(p);
        let c: Vec<String> = mono.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(s, "monomial_coefficients {}", c.join(" "));
    }
    s
}
