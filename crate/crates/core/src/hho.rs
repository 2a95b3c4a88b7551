//! Element-local HHO operators.
//!
//! Local unknowns of an element are stored as one vector: the cell block
//! (`dim P^k(T)` coefficients on the orthonormal cell basis) followed by one
//! block per entry of the element's face loop (coefficients on the orthonormal
//! face basis). The potential reconstruction maps this vector to coefficients
//! on the degree `k+1` cell basis.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Point};
use crate::quadrature::choose_base_vertex;
use crate::quadrature::{edge_rules, element_rule, gauss_legendre, EdgeRule, ElemRule, Rule1D};
use crate::spaces::{
    basis_means, build_cell_basis, build_face_space, gradient_gram, l2_project_cell, l2_project_face, poly_dim,
    solve_bordered, CellBasis, FaceSpace, Tabulation, RANK_THRESHOLD,
};

/// Constant diffusion tensor per region tag.
#[derive(Clone, Debug, PartialEq)]
pub struct Diffusion {
    tensors: Vec<(u32, Matrix2<f64>)>,
}

impl Diffusion {
    pub fn isotropic() -> Self {
        Self::uniform(Matrix2::identity()).expect("identity is SPD")
    }

    pub fn uniform(k: Matrix2<f64>) -> Result<Self> {
        Self::by_region(vec![(u32::MAX, k)])
    }

    /// Tensors keyed by region tag; the tag `u32::MAX` acts as the default.
    pub fn by_region(tensors: Vec<(u32, Matrix2<f64>)>) -> Result<Self> {
        for (tag, k) in &tensors {
            if (k[(0, 1)] - k[(1, 0)]).abs() > 1e-14 * k.amax() {
                return Err(Error::InvalidArgument(format!(
                    "tensor of region {tag} is not symmetric"
                )));
            }
            if !(eigen_range(k).0 > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "tensor of region {tag} is not positive definite"
                )));
            }
        }
        Ok(Self { tensors })
    }

    pub fn tensor(&self, region: u32) -> Result<Matrix2<f64>> {
        self.tensors
            .iter()
            .find(|(t, _)| *t == region)
            .or_else(|| self.tensors.iter().find(|(t, _)| *t == u32::MAX))
            .map(|(_, k)| *k)
            .ok_or_else(|| Error::InvalidArgument(format!("no diffusion tensor for region {region}")))
    }

    pub fn lambda_min(&self, region: u32) -> Result<f64> {
        Ok(eigen_range(&self.tensor(region)?).0)
    }

    pub fn lambda_max(&self, region: u32) -> Result<f64> {
        Ok(eigen_range(&self.tensor(region)?).1)
    }

    pub fn anisotropy(&self, region: u32) -> Result<f64> {
        let (lo, hi) = eigen_range(&self.tensor(region)?);
        Ok(hi / lo)
    }
}

fn eigen_range(k: &Matrix2<f64>) -> (f64, f64) {
    let tr = 0.5 * (k[(0, 0)] + k[(1, 1)]);
    let d = (0.25 * (k[(0, 0)] - k[(1, 1)]).powi(2) + k[(0, 1)] * k[(1, 0)])
        .max(0.0)
        .sqrt();
    (tr - d, tr + d)
}

/// Quadrature rules and bases of a whole mesh for a given face degree `k`.
#[derive(Clone, Debug)]
pub struct MeshSpaces {
    pub k: usize,
    pub base_rule: Rule1D,
    pub edge_rules: Vec<EdgeRule>,
    pub elem_rules: Vec<ElemRule>,
    /// Degree `k+1` orthonormal bases; the leading `dim P^k` functions span `P^k(T)`.
    pub cell_bases: Vec<CellBasis>,
    pub face_spaces: Vec<FaceSpace>,
}

impl MeshSpaces {
    pub fn build(mesh: &Mesh, k: usize, quad_points: usize) -> Result<Self> {
        Self::build_with_threshold(mesh, k, quad_points, RANK_THRESHOLD)
    }

    pub fn build_with_threshold(mesh: &Mesh, k: usize, quad_points: usize, threshold: f64) -> Result<Self> {
        let base_rule = gauss_legendre(quad_points)?;
        let edge_rules = edge_rules(mesh, &base_rule);
        let elem_rules = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| {
                let (_, base) = choose_base_vertex(mesh, e);
                element_rule(mesh, e, |f| &edge_rules[f], &base_rule, base)
            })
            .collect::<Result<Vec<_>>>()?;
        let cell_bases = mesh
            .elements
            .par_iter()
            .enumerate()
            .map(|(e, el)| build_cell_basis(e, el.centroid, el.diameter, k + 1, &elem_rules[e]))
            .collect::<Result<Vec<_>>>()?;
        let face_spaces = mesh
            .faces
            .par_iter()
            .enumerate()
            .map(|(f, face)| build_face_space(face, k, &edge_rules[f], threshold))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            base_rule,
            edge_rules,
            elem_rules,
            cell_bases,
            face_spaces,
        })
    }

    pub fn cell_dim(&self) -> usize {
        poly_dim(self.k)
    }

    /// Offsets of the cell block and each face block in the local vector of `elem`.
    pub fn local_layout(&self, mesh: &Mesh, elem: usize) -> Vec<usize> {
        let mut off = vec![0, self.cell_dim()];
        for r in &mesh.elements[elem].faces {
            let last = *off.last().expect("non-empty");
            off.push(last + self.face_spaces[r.face].dim());
        }
        off
    }

    /// One line per face: id, kind, `D_F`, then dropped spanning indices with their pivots.
    pub fn face_space_report(&self, mesh: &Mesh) -> String {
        let mut s = String::from("# face kind D_F dropped(index:relative_pivot)...\n");
        for (f, fs) in self.face_spaces.iter().enumerate() {
            let kind = if mesh.faces[f].curve.is_straight() {
                "straight"
            } else {
                "curved"
            };
            let _ = write!(s, "{f} {kind} {}", fs.dim());
            for d in &fs.dropped {
                let _ = write!(s, " {}:{:.3e}", d.index, d.relative_pivot);
            }
            s.push('\n');
        }
        s
    }
}

/// Cell and face coefficients of one element.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalDofs {
    pub cell: DVector<f64>,
    pub faces: Vec<DVector<f64>>,
}

impl LocalDofs {
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.cell.len() + self.faces.iter().map(|f| f.len()).sum::<usize>();
        let mut v = DVector::zeros(n);
        v.rows_mut(0, self.cell.len()).copy_from(&self.cell);
        let mut o = self.cell.len();
        for f in &self.faces {
            v.rows_mut(o, f.len()).copy_from(f);
            o += f.len();
        }
        v
    }

    pub fn from_vector(v: &DVector<f64>, layout: &[usize]) -> Self {
        Self {
            cell: v.rows(0, layout[1]).into_owned(),
            faces: layout[1..]
                .windows(2)
                .map(|w| v.rows(w[0], w[1] - w[0]).into_owned())
                .collect(),
        }
    }
}

/// Interpolant: cell and face L2 projections of `v`.
pub fn interpolate(
    v: impl Fn(&Point) -> f64 + Copy,
    mesh: &Mesh,
    spaces: &MeshSpaces,
    elem: usize,
) -> Result<LocalDofs> {
    let rule = &spaces.elem_rules[elem];
    let tab = spaces.cell_bases[elem].tabulate(&rule.points);
    let cell = l2_project_cell(v, &tab.values, rule, spaces.cell_dim())?;
    let faces = mesh.elements[elem]
        .faces
        .iter()
        .map(|r| l2_project_face(v, &spaces.face_spaces[r.face], &spaces.edge_rules[r.face]))
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalDofs { cell, faces })
}

/// Per-face data of an element: outward normals and cell-basis traces at the edge nodes.
struct FaceTrace<'a> {
    rule: &'a EdgeRule,
    space: &'a FaceSpace,
    normals: Vec<Vector2<f64>>,
    tab: Tabulation,
    offset: usize,
}

/// Element matrices shared by the reconstruction, stabilisation and seminorm.
struct ElementData<'a> {
    k_tensor: Matrix2<f64>,
    nk: usize,
    n1: usize,
    nloc: usize,
    h: f64,
    rule: &'a ElemRule,
    tab: Tabulation,
    gram: DMatrix<f64>,
    faces: Vec<FaceTrace<'a>>,
}

fn element_data<'a>(
    mesh: &Mesh,
    spaces: &'a MeshSpaces,
    diffusion: &Diffusion,
    elem: usize,
) -> Result<ElementData<'a>> {
    let el = &mesh.elements[elem];
    let k_tensor = diffusion.tensor(el.region)?;
    let basis = &spaces.cell_bases[elem];
    let rule = &spaces.elem_rules[elem];
    let tab = basis.tabulate(&rule.points);
    let gram = gradient_gram(&tab, rule, &k_tensor);
    let layout = spaces.local_layout(mesh, elem);
    let faces = el
        .faces
        .iter()
        .zip(&layout[1..])
        .map(|(r, &offset)| {
            let erule = &spaces.edge_rules[r.face];
            let sign = mesh.faces[r.face].outward_sign(r);
            FaceTrace {
                rule: erule,
                space: &spaces.face_spaces[r.face],
                normals: erule.normals.iter().map(|n| n * sign).collect(),
                tab: basis.tabulate(&erule.points),
                offset,
            }
        })
        .collect();
    Ok(ElementData {
        k_tensor,
        nk: poly_dim(spaces.k),
        n1: basis.dim(),
        nloc: *layout.last().expect("non-empty"),
        h: el.diameter,
        rule,
        tab,
        gram,
        faces,
    })
}

fn reconstruction(d: &ElementData, location: &str, basis: &CellBasis) -> Result<DMatrix<f64>> {
    let (nk, n1, nloc) = (d.nk, d.n1, d.nloc);
    let mut rhs = DMatrix::zeros(n1, nloc);

    // cell part: -(v_T, div(K grad w))
    let lap = basis.tabulate_k_laplacians(&d.rule.points, &d.k_tensor);
    let w = DVector::from_column_slice(&d.rule.weights);
    let wv = DMatrix::from_fn(d.rule.points.len(), nk, |q, j| w[q] * d.tab.values[(q, j)]);
    rhs.view_mut((0, 0), (n1, nk)).copy_from(&(-lap.tr_mul(&wv)));

    // face parts: (v_F, K grad w . n_TF)
    for ft in &d.faces {
        let np = ft.rule.points.len();
        let flux = DMatrix::from_fn(np, n1, |q, i| {
            let g = d.k_tensor * Vector2::new(ft.tab.grad_x[(q, i)], ft.tab.grad_y[(q, i)]);
            ft.rule.weights[q] * g.dot(&ft.normals[q])
        });
        let block = flux.tr_mul(&ft.space.table);
        let mut dst = rhs.view_mut((0, ft.offset), (n1, block.ncols()));
        dst += block;
    }

    let means = basis_means(&d.tab, d.rule);
    let mut closure = DMatrix::zeros(1, nloc);
    for j in 0..nk {
        closure[(0, j)] = means[j];
    }
    solve_bordered(&d.gram, &means, &rhs, &closure, location)
}

/// `[K n.n]`-weighted face mass matrix and cell-to-face projection `M_F` (`int_F chi_l phi_m`).
fn face_matrices(d: &ElementData, ft: &FaceTrace) -> (DMatrix<f64>, DMatrix<f64>) {
    let np = ft.rule.points.len();
    let kw: Vec<f64> = (0..np)
        .map(|q| {
            let n = ft.normals[q];
            ft.rule.weights[q] * (d.k_tensor * n).dot(&n)
        })
        .collect();
    let t = &ft.space.table;
    let wt = DMatrix::from_fn(np, t.ncols(), |q, l| kw[q] * t[(q, l)]);
    let mass_k = t.tr_mul(&wt);
    let plain = DMatrix::from_fn(np, t.ncols(), |q, l| ft.rule.weights[q] * t[(q, l)]);
    let proj = plain.tr_mul(&ft.tab.values);
    ((&mass_k + mass_k.transpose()) * 0.5, proj)
}

/// Dense local operators of one element.
#[derive(Clone, Debug)]
pub struct LocalOperators {
    pub element: usize,
    pub layout: Vec<usize>,
    /// `dim P^{k+1} x nloc`: local unknowns to reconstruction coefficients.
    pub reconstruction: DMatrix<f64>,
    /// `K`-weighted gradient Gram matrix of the degree `k+1` basis.
    pub gram: DMatrix<f64>,
    pub stabilisation: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

impl LocalOperators {
    pub fn local_dim(&self) -> usize {
        *self.layout.last().expect("non-empty")
    }

    pub fn cell_dim(&self) -> usize {
        self.layout[1]
    }

    pub fn energy(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.stiffness * v))
    }
}

pub fn potential_reconstruction(
    mesh: &Mesh,
    spaces: &MeshSpaces,
    diffusion: &Diffusion,
    elem: usize,
) -> Result<DMatrix<f64>> {
    let d = element_data(mesh, spaces, diffusion, elem)?;
    reconstruction(&d, &format!("element {elem}"), &spaces.cell_bases[elem])
}

fn stabilisation_from(d: &ElementData, p: &DMatrix<f64>) -> DMatrix<f64> {
    let (nk, nloc) = (d.nk, d.nloc);
    let mut dt = -p.rows(0, nk).into_owned();
    for j in 0..nk {
        dt[(j, j)] += 1.0;
    }
    let gk = d.gram.view((0, 0), (nk, nk));
    let mut s = dt.transpose() * gk * &dt;
    for ft in &d.faces {
        let (mass_k, proj) = face_matrices(d, ft);
        let df_dim = ft.space.dim();
        let mut df = -(proj * p);
        for l in 0..df_dim {
            df[(l, ft.offset + l)] += 1.0;
        }
        s += df.transpose() * mass_k * df / d.h;
    }
    debug_assert_eq!(s.nrows(), nloc);
    (&s + s.transpose()) * 0.5
}

pub fn stabilisation(
    mesh: &Mesh,
    spaces: &MeshSpaces,
    diffusion: &Diffusion,
    elem: usize,
    reconstruction: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = element_data(mesh, spaces, diffusion, elem)?;
    Ok(stabilisation_from(&d, reconstruction))
}

pub fn local_stiffness(mesh: &Mesh, spaces: &MeshSpaces, diffusion: &Diffusion, elem: usize) -> Result<LocalOperators> {
    let d = element_data(mesh, spaces, diffusion, elem)?;
    let p = reconstruction(&d, &format!("element {elem}"), &spaces.cell_bases[elem])?;
    let s = stabilisation_from(&d, &p);
    let a = p.transpose() * &d.gram * &p + &s;
    Ok(LocalOperators {
        element: elem,
        layout: spaces.local_layout(mesh, elem),
        reconstruction: p,
        gram: d.gram,
        stabilisation: s,
        stiffness: (&a + a.transpose()) * 0.5,
    })
}

/// Local operators of every element, computed in parallel.
pub fn all_local_operators(mesh: &Mesh, spaces: &MeshSpaces, diffusion: &Diffusion) -> Result<Vec<LocalOperators>> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| local_stiffness(mesh, spaces, diffusion, e))
        .collect()
}

/// Matrix of the discrete seminorm `|v_T|^2_{K,H1} + h^{-1} |v_F - v_T|^2_{K,dT}`.
pub fn seminorm_matrix(mesh: &Mesh, spaces: &MeshSpaces, diffusion: &Diffusion, elem: usize) -> Result<DMatrix<f64>> {
    let d = element_data(mesh, spaces, diffusion, elem)?;
    let nk = d.nk;
    let mut n = DMatrix::zeros(d.nloc, d.nloc);
    n.view_mut((0, 0), (nk, nk)).copy_from(&d.gram.view((0, 0), (nk, nk)));
    for ft in &d.faces {
        let np = ft.rule.points.len();
        // jump at the nodes as a linear map of the local vector
        let mut jump = DMatrix::zeros(np, d.nloc);
        for q in 0..np {
            for j in 0..nk {
                jump[(q, j)] = -ft.tab.values[(q, j)];
            }
            for l in 0..ft.space.dim() {
                jump[(q, ft.offset + l)] += ft.space.table[(q, l)];
            }
        }
        let wj = DMatrix::from_fn(np, d.nloc, |q, c| {
            let nq = ft.normals[q];
            ft.rule.weights[q] * (d.k_tensor * nq).dot(&nq) * jump[(q, c)]
        });
        n += jump.tr_mul(&wj) / d.h;
    }
    Ok((&n + n.transpose()) * 0.5)
}

pub fn local_seminorm(
    mesh: &Mesh,
    spaces: &MeshSpaces,
    diffusion: &Diffusion,
    elem: usize,
    dofs: &LocalDofs,
) -> Result<f64> {
    let n = seminorm_matrix(mesh, spaces, diffusion, elem)?;
    let v = dofs.to_vector();
    Ok(v.dot(&(n * &v)).max(0.0).sqrt())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Text dump of the local operators of one element.
pub fn operators_to_string(ops: &LocalOperators) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# element {}", ops.element);
    let _ = writeln!(s, "layout {:?}", ops.layout);
    for (name, m) in [
        ("reconstruction", &ops.reconstruction),
        ("stabilisation", &ops.stabilisation),
        ("stiffness", &ops.stiffness),
    ] {
        let _ = writeln!(s, "{name} {} {}", m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::{disc_mesh, quarter_disc, unit_square};
    use crate::spaces::elliptic_project;

    fn ell(x: &Point) -> f64 {
        0.64 - (x.x * x.x + x.x * x.y + x.y * x.y)
    }

    fn sin_l(x: &Point) -> f64 {
        ell(x).sin()
    }

    fn grad_sin_l(x: &Point) -> Vector2<f64> {
        Vector2::new(-2.0 * x.x - x.y, -x.x - 2.0 * x.y) * ell(x).cos()
    }

    fn aniso() -> Diffusion {
        Diffusion::uniform(Matrix2::new(1.0, 0.4, 0.4, 0.7)).unwrap()
    }

    #[test]
    fn diffusion_eigenvalues() {
        let d = Diffusion::uniform(Matrix2::new(1.0, 1.0 - 1e-6, 1.0 - 1e-6, 1.0)).unwrap();
        assert!((d.lambda_min(0).unwrap() - 1e-6).abs() < 1e-15);
        assert!((d.anisotropy(0).unwrap() - (2.0 - 1e-6) / 1e-6).abs() < 1e-3);
        assert!(Diffusion::uniform(Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn constant_interpolant_is_constant() {
        let m = quarter_disc();
        let sp = MeshSpaces::build(&m, 2, 30).unwrap();
        let i = interpolate(|_| 1.0, &m, &sp, 0).unwrap();
        let x = Point::new(0.3, 0.3);
        assert!((sp.cell_bases[0].eval(&i.cell, &x) - 1.0).abs() < 1e-12);
        for (r, c) in m.elements[0].faces.iter().zip(&i.faces) {
            let vals = sp.face_spaces[r.face].eval_at_nodes(c);
            assert!(vals.add_scalar(-1.0).amax() < 1e-11);
        }
    }

    #[test]
    fn commutation_on_curved_element() {
        let m = quarter_disc();
        for k in 0..=3 {
            let sp = MeshSpaces::build(&m, k, 30).unwrap();
            for diff in [Diffusion::isotropic(), aniso()] {
                let p = potential_reconstruction(&m, &sp, &diff, 0).unwrap();
                let i = interpolate(sin_l, &m, &sp, 0).unwrap().to_vector();
                let rule = &sp.elem_rules[0];
                let tab = sp.cell_bases[0].tabulate(&rule.points);
                let kt = diff.tensor(0).unwrap();
                let pi = elliptic_project(sin_l, grad_sin_l, &tab, rule, &kt, "test").unwrap();
                let err = (p * i - pi).amax();
                assert!(err < 1e-9, "k = {k}: {err:e}");
            }
        }
    }

    #[test]
    fn stabilisation_is_polynomially_consistent_and_psd() {
        let m = disc_mesh(3);
        let k = 2;
        let sp = MeshSpaces::build(&m, k, 30).unwrap();
        let diff = aniso();
        for e in 0..m.num_elements() {
            let ops = local_stiffness(&m, &sp, &diff, e).unwrap();
            let norm = ops.stabilisation.amax();
            let c = m.elements[e].centroid;
            for (a, b) in crate::spaces::monomial_exponents(k + 1) {
                let w = move |x: &Point| (x.x - c.x).powi(a as i32) * (x.y - c.y).powi(b as i32);
                let i = interpolate(w, &m, &sp, e).unwrap().to_vector();
                assert!((&ops.stabilisation * &i).amax() <= 1e-9 * norm * i.amax().max(1.0));
            }
            let ev = sorted_eigenvalues(&ops.stabilisation);
            assert!(ev[0] >= -1e-11 * ev.last().unwrap());
            let ev = sorted_eigenvalues(&ops.stiffness);
            assert!(ev[0].abs() <= 1e-10 * ev.last().unwrap());
            assert!(ev[1] > 1e-8 * ev.last().unwrap());
        }
    }

    #[test]
    fn stiffness_on_unit_square() {
        let m = unit_square();
        let sp = MeshSpaces::build(&m, 1, 30).unwrap();
        let ops = local_stiffness(&m, &sp, &Diffusion::isotropic(), 0).unwrap();
        let ix = interpolate(|x| x.x, &m, &sp, 0).unwrap().to_vector();
        assert!((ops.energy(&ix) - 1.0).abs() < 1e-10);
        let one = interpolate(|_| 1.0, &m, &sp, 0).unwrap().to_vector();
        assert!((&ops.stiffness * one).amax() < 1e-10);
    }

    #[test]
    fn stabilisation_scales_with_tensor() {
        let m = quarter_disc();
        let sp = MeshSpaces::build(&m, 1, 30).unwrap();
        let a = local_stiffness(&m, &sp, &aniso(), 0).unwrap();
        let b = local_stiffness(
            &m,
            &sp,
            &Diffusion::uniform(Matrix2::new(3.0, 1.2, 1.2, 2.1)).unwrap(),
            0,
        )
        .unwrap();
        assert!((a.stabilisation * 3.0 - b.stabilisation).amax() < 1e-11 * b.stiffness.amax());
    }

    #[test]
    fn seminorm_examples() {
        let m = unit_square();
        let sp = MeshSpaces::build(&m, 1, 30).unwrap();
        let diff = Diffusion::isotropic();
        let i = interpolate(|x| x.x, &m, &sp, 0).unwrap();
        let v = local_seminorm(&m, &sp, &diff, 0, &i).unwrap();
        assert!((v * v - 1.0).abs() < 1e-10);
        let c = interpolate(|_| 2.0, &m, &sp, 0).unwrap();
        assert!(local_seminorm(&m, &sp, &diff, 0, &c).unwrap() < 1e-7);

        // v_T = 0, v_F = 1 on the first face only
        let qd = quarter_disc();
        let sp = MeshSpaces::build(&qd, 1, 30).unwrap();
        let d = aniso();
        let mut dofs = interpolate(|_| 0.0, &qd, &sp, 0).unwrap();
        let one = interpolate(|_| 1.0, &qd, &sp, 0).unwrap();
        dofs.faces[0] = one.faces[0].clone();
        let r = qd.elements[0].faces[0];
        let kt = d.tensor(0).unwrap();
        let erule = &sp.edge_rules[r.face];
        let oracle: f64 = erule
            .weights
            .iter()
            .zip(&erule.normals)
            .map(|(w, n)| w * (kt * n).dot(n))
            .sum::<f64>()
            / qd.elements[0].diameter;
        let v = local_seminorm(&qd, &sp, &d, 0, &dofs).unwrap();
        assert!((v * v - oracle).abs() < 1e-11 * oracle);
    }

    #[test]
    fn report_lists_every_face() {
        let m = quarter_disc();
        let sp = MeshSpaces::build(&m, 1, 30).unwrap();
        let rep = sp.face_space_report(&m);
        assert_eq!(rep.lines().count(), 1 + m.faces.len());
        assert!(
            operators_to_string(&local_stiffness(&m, &sp, &Diffusion::isotropic(), 0).unwrap()).contains("stiffness")
        );
    }
}
