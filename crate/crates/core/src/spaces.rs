//! Orthonormal cell bases, the curved-face spaces and the L2 / elliptic projectors.
//!
//! Cell spaces are polynomials in scaled monomials `((x - x_T)/h_T)^a ((y - y_T)/h_T)^b`,
//! orthonormalised in graded order. Because every function only involves monomials
//! of lower or equal index, the leading `dim P^l` functions of a degree-`k+1` basis
//! form an orthonormal basis of `P^l(T)` for every `l <= k+1`.
//!
//! The face space on `F` is spanned by `1` and the normal components `m n_F` of
//! vector monomials of degree `<= k`. On curved faces these functions are not
//! polynomial along the face, and many of them are (numerically) dependent; a
//! column-pivoted Gram-Schmidt keeps the columns whose Gram pivot exceeds a
//! relative threshold.

use log::debug;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{Face, Point};
use crate::quadrature::{EdgeRule, ElemRule};

/// Relative Gram pivot below which a spanning function is dropped.
pub const RANK_THRESHOLD: f64 = 1e-15;
/// Relative residual norm below which a cell monomial is considered dependent.
pub const CELL_PIVOT_TOL: f64 = 1e-13;

pub fn poly_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Exponents `(a, b)` of bivariate monomials of total degree `<= degree`, graded order.
pub fn monomial_exponents(degree: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(poly_dim(degree));
    for d in 0..=degree as u32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

fn powers(x: f64, n: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    let mut v = 1.0;
    for _ in 0..=n {
        p.push(v);
        v *= x;
    }
    p
}

/// Scaled monomials around `center` with length `scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMonomials {
    pub center: Point,
    pub scale: f64,
    pub degree: usize,
    pub exponents: Vec<(u32, u32)>,
}

impl ScaledMonomials {
    pub fn new(center: Point, scale: f64, degree: usize) -> Self {
        Self {
            center,
            scale,
            degree,
            exponents: monomial_exponents(degree),
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    fn local(&self, x: &Point) -> (Vec<f64>, Vec<f64>) {
        let u = (x - self.center) / self.scale;
        (powers(u.x, self.degree), powers(u.y, self.degree))
    }

    pub fn values_into(&self, x: &Point, out: &mut [f64]) {
        let (px, py) = self.local(x);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            *o = px[a as usize] * py[b as usize];
        }
    }

    pub fn values(&self, x: &Point) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.values_into(x, &mut v);
        v
    }

    pub fn gradients(&self, x: &Point) -> Vec<Vector2<f64>> {
        let (px, py) = self.local(x);
        let s = 1.0 / self.scale;
        self.exponents
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (a as usize, b as usize);
                let dx = if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 };
                let dy = if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 };
                Vector2::new(dx, dy) * s
            })
            .collect()
    }

    pub fn hessians(&self, x: &Point) -> Vec<Matrix2<f64>> {
        let (px, py) = self.local(x);
        let s2 = 1.0 / (self.scale * self.scale);
        self.exponents
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (a as usize, b as usize);
                let (af, bf) = (a as f64, b as f64);
                let xx = if a > 1 {
                    af * (af - 1.0) * px[a - 2] * py[b]
                } else {
                    0.0
                };
                let yy = if b > 1 {
                    bf * (bf - 1.0) * px[a] * py[b - 2]
                } else {
                    0.0
                };
                let xy = if a > 0 && b > 0 {
                    af * bf * px[a - 1] * py[b - 1]
                } else {
                    0.0
                };
                Matrix2::new(xx, xy, xy, yy) * s2
            })
            .collect()
    }
}

/// Orthonormal basis of `P^degree(T)`: row `m` holds the monomial coefficients of `phi_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellBasis {
    pub element: usize,
    pub degree: usize,
    pub monomials: ScaledMonomials,
    pub coeffs: DMatrix<f64>,
}

/// Values and derivatives of basis functions at a set of points (one row per point).
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub values: DMatrix<f64>,
    pub grad_x: DMatrix<f64>,
    pub grad_y: DMatrix<f64>,
}

impl CellBasis {
    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    /// The nested basis of `P^degree(T)`, `degree <= self.degree`.
    pub fn truncated(&self, degree: usize) -> CellBasis {
        let n = poly_dim(degree.min(self.degree));
        CellBasis {
            element: self.element,
            degree,
            monomials: ScaledMonomials::new(self.monomials.center, self.monomials.scale, degree),
            coeffs: self.coeffs.view((0, 0), (n, n)).into_owned(),
        }
    }

    pub fn values(&self, x: &Point) -> DVector<f64> {
        &self.coeffs * DVector::from_vec(self.monomials.values(x))
    }

    pub fn gradients(&self, x: &Point) -> Vec<Vector2<f64>> {
        let g = self.monomials.gradients(x);
        (0..self.dim())
            .map(|m| {
                g.iter()
                    .enumerate()
                    .fold(Vector2::zeros(), |acc, (j, gj)| acc + gj * self.coeffs[(m, j)])
            })
            .collect()
    }

    /// `K : Hess(phi_m)`, i.e. `div(K grad phi_m)` for constant `K`.
    pub fn k_laplacians(&self, x: &Point, k: &Matrix2<f64>) -> DVector<f64> {
        let h: Vec<f64> = self
            .monomials
            .hessians(x)
            .iter()
            .map(|hm| hm.component_mul(k).sum())
            .collect();
        &self.coeffs * DVector::from_vec(h)
    }

    /// Value of `sum_m c_m phi_m` at `x`.
    pub fn eval(&self, c: &DVector<f64>, x: &Point) -> f64 {
        self.values(x).rows(0, c.len()).dot(c)
    }

    pub fn eval_gradient(&self, c: &DVector<f64>, x: &Point) -> Vector2<f64> {
        self.gradients(x)
            .iter()
            .zip(c.iter())
            .fold(Vector2::zeros(), |acc, (g, ci)| acc + g * *ci)
    }

    /// Monomial coefficients of `sum_m c_m phi_m`.
    pub fn to_monomials(&self, c: &DVector<f64>) -> DVector<f64> {
        let n = c.len();
        self.coeffs.view((0, 0), (n, self.coeffs.ncols())).transpose() * c
    }

    pub fn tabulate(&self, points: &[Point]) -> Tabulation {
        let nm = self.monomials.len();
        let np = points.len();
        let mut v = DMatrix::zeros(np, nm);
        let mut gx = DMatrix::zeros(np, nm);
        let mut gy = DMatrix::zeros(np, nm);
        let mut row = vec![0.0; nm];
        for (i, x) in points.iter().enumerate() {
            self.monomials.values_into(x, &mut row);
            for (j, r) in row.iter().enumerate() {
                v[(i, j)] = *r;
            }
            for (j, g) in self.monomials.gradients(x).iter().enumerate() {
                gx[(i, j)] = g.x;
                gy[(i, j)] = g.y;
            }
        }
        let ct = self.coeffs.transpose();
        Tabulation {
            values: v * &ct,
            grad_x: gx * &ct,
            grad_y: gy * &ct,
        }
    }

    /// `div(K grad phi_m)` at each point (rows) for each basis function (columns).
    pub fn tabulate_k_laplacians(&self, points: &[Point], k: &Matrix2<f64>) -> DMatrix<f64> {
        let nm = self.monomials.len();
        let mut h = DMatrix::zeros(points.len(), nm);
        for (i, x) in points.iter().enumerate() {
            for (j, hm) in self.monomials.hessians(x).iter().enumerate() {
                h[(i, j)] = hm.component_mul(k).sum();
            }
        }
        h * self.coeffs.transpose()
    }
}

/// Modified Gram-Schmidt (with one reorthogonalisation pass) of the scaled monomials
/// of degree `<= degree` under the element rule.
pub fn build_cell_basis(
    element: usize,
    centroid: Point,
    diameter: f64,
    degree: usize,
    rule: &ElemRule,
) -> Result<CellBasis> {
    let monomials = ScaledMonomials::new(centroid, diameter, degree);
    let n = monomials.len();
    let np = rule.points.len();
    let mut vals = DMatrix::zeros(np, n);
    let mut row = vec![0.0; n];
    for (i, x) in rule.points.iter().enumerate() {
        monomials.values_into(x, &mut row);
        for (j, r) in row.iter().enumerate() {
            vals[(i, j)] = *r;
        }
    }
    let w = DVector::from_column_slice(&rule.weights);
    let inner = |a: &DVector<f64>, b: &DVector<f64>| a.component_mul(&w).dot(b);

    let mut coeffs = DMatrix::<f64>::zeros(n, n);
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(n);
    for m in 0..n {
        let mut u = vals.column(m).into_owned();
        let mut c = DVector::<f64>::zeros(n);
        c[m] = 1.0;
        let norm0 = inner(&u, &u);
        for _pass in 0..2 {
            for (j, qj) in q.iter().enumerate() {
                let p = inner(qj, &u);
                u.axpy(-p, qj, 1.0);
                let cj = coeffs.row(j).transpose();
                c.axpy(-p, &cj, 1.0);
            }
        }
        let norm2 = inner(&u, &u);
        if !(norm2 > 0.0) || norm2.sqrt() < CELL_PIVOT_TOL * norm0.sqrt() {
            return Err(Error::conditioning(
                format!("element {element}"),
                format!(
                    "cell basis degree {degree}: monomial {m} is numerically dependent (relative pivot {:e})",
                    (norm2.max(0.0) / norm0).sqrt()
                ),
            ));
        }
        let s = 1.0 / norm2.sqrt();
        u *= s;
        c *= s;
        coeffs.set_row(m, &c.transpose());
        q.push(u);
    }
    Ok(CellBasis {
        element,
        degree,
        monomials,
        coeffs,
    })
}

/// A spanning function dropped during rank reduction.
#[derive(Clone, Debug, PartialEq)]
pub struct DroppedPivot {
    pub index: usize,
    /// Gram pivot relative to the largest one.
    pub relative_pivot: f64,
}

/// Orthonormal basis of the face space, expressed on the spanning set
/// `{1} u {m n_x} u {m n_y}`, and tabulated at the edge-rule nodes.
#[derive(Clone, Debug)]
pub struct FaceSpace {
    pub face: usize,
    pub degree: usize,
    pub monomials: ScaledMonomials,
    /// `dim x spanning_len`; row `l` gives basis function `l` on the spanning set.
    pub coeffs: DMatrix<f64>,
    /// Basis values at the edge-rule nodes: one row per node, one column per function.
    pub table: DMatrix<f64>,
    pub dropped: Vec<DroppedPivot>,
}

impl FaceSpace {
    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn spanning_len(&self) -> usize {
        1 + 2 * self.monomials.len()
    }

    /// Spanning-set values at `x` with face normal `n`.
    pub fn spanning_values(&self, x: &Point, n: &Vector2<f64>) -> DVector<f64> {
        spanning_values(&self.monomials, x, n)
    }

    /// Basis values at `x` with face normal `n` (the normal stored in the edge rule).
    pub fn values(&self, x: &Point, n: &Vector2<f64>) -> DVector<f64> {
        &self.coeffs * self.spanning_values(x, n)
    }

    /// Function with coefficients `c` at the edge-rule nodes.
    pub fn eval_at_nodes(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.table * c
    }
}

fn spanning_values(mono: &ScaledMonomials, x: &Point, n: &Vector2<f64>) -> DVector<f64> {
    let m = mono.values(x);
    let nm = m.len();
    let mut s = DVector::zeros(1 + 2 * nm);
    s[0] = 1.0;
    for (j, mj) in m.iter().enumerate() {
        s[1 + j] = mj * n.x;
        s[1 + nm + j] = mj * n.y;
    }
    s
}

/// Builds the face space of degree `k` on `face` using `rule` for inner products.
///
/// The rank decision uses the pivots of the Gram matrix obtained by a
/// column-pivoted Gram-Schmidt on the `sqrt(w)`-weighted values, which equal
/// the pivots of a fully pivoted factorisation of the Gram matrix.
pub fn build_face_space(face: &Face, k: usize, rule: &EdgeRule, threshold: f64) -> Result<FaceSpace> {
    let (t0, t1) = face.curve.param_range();
    let center = face.curve.point(0.5 * (t0 + t1));
    let scale = rule
        .points
        .iter()
        .chain([face.curve.start(), face.curve.end()].iter())
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Structural(format!("face {} has zero extent", rule.face)));
    }
    let monomials = ScaledMonomials::new(center, scale, k);
    let ns = 1 + 2 * monomials.len();
    let np = rule.points.len();

    // sqrt(w)-weighted spanning values, one column per spanning function
    let mut cols: Vec<DVector<f64>> = vec![DVector::zeros(np); ns];
    for (i, (x, n)) in rule.points.iter().zip(&rule.normals).enumerate() {
        let sw = rule.weights[i].sqrt();
        let s = spanning_values(&monomials, x, n);
        for (j, col) in cols.iter_mut().enumerate() {
            col[i] = s[j] * sw;
        }
    }
    let mut trans: Vec<DVector<f64>> = (0..ns)
        .map(|j| {
            let mut e = DVector::zeros(ns);
            e[j] = 1.0;
            e
        })
        .collect();

    let mut remaining: Vec<usize> = (0..ns).collect();
    let mut q: Vec<DVector<f64>> = Vec::new();
    let mut basis_coeffs: Vec<DVector<f64>> = Vec::new();
    let mut max_pivot = 0.0f64;
    let mut dropped = Vec::new();
    while !remaining.is_empty() {
        let (pos, pivot) = remaining
            .iter()
            .enumerate()
            .map(|(p, &j)| (p, cols[j].norm_squared()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        if q.is_empty() {
            max_pivot = pivot;
        }
        if !(pivot > threshold * max_pivot) || max_pivot == 0.0 {
            for &j in &remaining {
                let rel = if max_pivot > 0.0 {
                    cols[j].norm_squared() / max_pivot
                } else {
                    0.0
                };
                dropped.push(DroppedPivot {
                    index: j,
                    relative_pivot: rel,
                });
            }
            break;
        }
        let j = remaining.swap_remove(pos);
        let mut v = cols[j].clone();
        let mut t = trans[j].clone();
        // second pass against the accepted vectors
        for (qi, ci) in q.iter().zip(&basis_coeffs) {
            let b = qi.dot(&v);
            v.axpy(-b, qi, 1.0);
            t.axpy(-b, ci, 1.0);
        }
        let nrm = v.norm();
        v /= nrm;
        t /= nrm;
        for &r in &remaining {
            let a = v.dot(&cols[r]);
            cols[r].axpy(-a, &v, 1.0);
            trans[r].axpy(-a, &t, 1.0);
        }
        q.push(v);
        basis_coeffs.push(t);
    }
    if q.is_empty() {
        return Err(Error::Structural(format!(
            "face {}: no spanning function survived rank reduction",
            rule.face
        )));
    }
    dropped.sort_by_key(|d| d.index);
    for d in &dropped {
        debug!(
            "face {}: dropped spanning function {} (relative pivot {:e})",
            rule.face, d.index, d.relative_pivot
        );
    }
    let dim = q.len();
    let coeffs = DMatrix::from_fn(dim, ns, |l, j| basis_coeffs[l][j]);
    // node values come from the orthonormal vectors themselves
    let table = DMatrix::from_fn(np, dim, |i, l| q[l][i] / rule.weights[i].sqrt());
    Ok(FaceSpace {
        face: rule.face,
        degree: k,
        monomials,
        coeffs,
        table,
        dropped,
    })
}

/// `c_m = int_T f phi_m` for an orthonormal cell basis tabulated at the rule points.
pub fn l2_project_cell(
    f: impl Fn(&Point) -> f64,
    values: &DMatrix<f64>,
    rule: &ElemRule,
    dim: usize,
) -> Result<DVector<f64>> {
    let fw = weighted_samples(&f, &rule.points, &rule.weights)?;
    Ok(values.columns(0, dim).tr_mul(&fw))
}

/// `c_l = int_F f chi_l` for the orthonormal face basis.
pub fn l2_project_face(f: impl Fn(&Point) -> f64, space: &FaceSpace, rule: &EdgeRule) -> Result<DVector<f64>> {
    let fw = weighted_samples(&f, &rule.points, &rule.weights)?;
    Ok(space.table.tr_mul(&fw))
}

/// Face projection of values already sampled at the edge-rule nodes.
pub fn l2_project_face_samples(samples: &DVector<f64>, space: &FaceSpace, rule: &EdgeRule) -> DVector<f64> {
    let w = DVector::from_column_slice(&rule.weights);
    space.table.tr_mul(&samples.component_mul(&w))
}

fn weighted_samples(f: &impl Fn(&Point) -> f64, points: &[Point], weights: &[f64]) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(points.len());
    for (i, (x, w)) in points.iter().zip(weights).enumerate() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                value: v,
                x: x.x,
                y: x.y,
            });
        }
        out[i] = v * w;
    }
    Ok(out)
}

/// `K`-weighted gradient Gram matrix `G_ij = int_T K grad psi_j . grad psi_i`.
pub fn gradient_gram(tab: &Tabulation, rule: &ElemRule, k: &Matrix2<f64>) -> DMatrix<f64> {
    let w = DVector::from_column_slice(&rule.weights);
    let wx = DMatrix::from_fn(tab.grad_x.nrows(), tab.grad_x.ncols(), |i, j| {
        w[i] * (k[(0, 0)] * tab.grad_x[(i, j)] + k[(0, 1)] * tab.grad_y[(i, j)])
    });
    let wy = DMatrix::from_fn(tab.grad_y.nrows(), tab.grad_y.ncols(), |i, j| {
        w[i] * (k[(1, 0)] * tab.grad_x[(i, j)] + k[(1, 1)] * tab.grad_y[(i, j)])
    });
    let g = tab.grad_x.tr_mul(&wx) + tab.grad_y.tr_mul(&wy);
    (&g + g.transpose()) * 0.5
}

/// `int_T psi_i` for each basis function.
pub fn basis_means(tab: &Tabulation, rule: &ElemRule) -> DVector<f64> {
    tab.values.tr_mul(&DVector::from_column_slice(&rule.weights))
}

/// Solves the bordered system `[G m; m^T 0] [X; l] = [B; r]` for `X`.
pub fn solve_bordered(
    gram: &DMatrix<f64>,
    means: &DVector<f64>,
    rhs: &DMatrix<f64>,
    closure: &DMatrix<f64>,
    location: &str,
) -> Result<DMatrix<f64>> {
    let n = gram.nrows();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(gram);
    for i in 0..n {
        a[(i, n)] = means[i];
        a[(n, i)] = means[i];
    }
    let mut b = DMatrix::zeros(n + 1, rhs.ncols());
    b.view_mut((0, 0), (n, rhs.ncols())).copy_from(rhs);
    b.view_mut((n, 0), (1, rhs.ncols())).copy_from(closure);
    let lu = a.full_piv_lu();
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::conditioning(location, "singular bordered system"))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::conditioning(location, "non-finite bordered solution"));
    }
    Ok(x.rows(0, n).into_owned())
}

/// Oblique elliptic projection onto `P^{k+1}(T)`: coefficients on the tabulated basis.
pub fn elliptic_project(
    f: impl Fn(&Point) -> f64,
    grad_f: impl Fn(&Point) -> Vector2<f64>,
    tab: &Tabulation,
    rule: &ElemRule,
    k: &Matrix2<f64>,
    location: &str,
) -> Result<DVector<f64>> {
    let gram = gradient_gram(tab, rule, k);
    let means = basis_means(tab, rule);
    let n = gram.nrows();
    let mut rhs = DMatrix::zeros(n, 1);
    let mut mean_f = 0.0;
    for (q, (x, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let g = k * grad_f(x);
        let v = f(x);
        if !(v.is_finite() && g.x.is_finite() && g.y.is_finite()) {
            return Err(Error::Evaluation {
                value: v,
                x: x.x,
                y: x.y,
            });
        }
        mean_f += w * v;
        for i in 0..n {
            rhs[(i, 0)] += w * (g.x * tab.grad_x[(q, i)] + g.y * tab.grad_y[(q, i)]);
        }
    }
    let x = solve_bordered(&gram, &means, &rhs, &DMatrix::from_element(1, 1, mean_f), location)?;
    Ok(x.column(0).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::{quarter_disc, unit_square};
    use crate::geometry::{Curve, Mesh};
    use crate::quadrature::{edge_rule, element_rule_default, gauss_legendre, DEFAULT_POINTS};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cell_setup(mesh: &Mesh, degree: usize) -> (ElemRule, CellBasis, Tabulation) {
        let rule = element_rule_default(mesh, 0).unwrap();
        let el = &mesh.elements[0];
        let basis = build_cell_basis(0, el.centroid, el.diameter, degree, &rule).unwrap();
        let tab = basis.tabulate(&rule.points);
        (rule, basis, tab)
    }

    #[test]
    fn exponents_are_graded() {
        assert_eq!(
            monomial_exponents(2),
            vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        );
        assert_eq!(poly_dim(2), 6);
    }

    #[test]
    fn monomial_derivatives_match_finite_differences() {
        let m = ScaledMonomials::new(Point::new(0.2, -0.1), 0.7, 4);
        let x = Point::new(0.45, 0.3);
        let eps = 1e-6;
        let g = m.gradients(&x);
        let h = m.hessians(&x);
        for j in 0..m.len() {
            let dx =
                (m.values(&(x + Vector2::new(eps, 0.0)))[j] - m.values(&(x - Vector2::new(eps, 0.0)))[j]) / (2.0 * eps);
            let dy =
                (m.values(&(x + Vector2::new(0.0, eps)))[j] - m.values(&(x - Vector2::new(0.0, eps)))[j]) / (2.0 * eps);
            assert!((dx - g[j].x).abs() < 1e-7 && (dy - g[j].y).abs() < 1e-7);
            let gxx = (m.gradients(&(x + Vector2::new(eps, 0.0)))[j].x
                - m.gradients(&(x - Vector2::new(eps, 0.0)))[j].x)
                / (2.0 * eps);
            let gxy = (m.gradients(&(x + Vector2::new(0.0, eps)))[j].x
                - m.gradients(&(x - Vector2::new(0.0, eps)))[j].x)
                / (2.0 * eps);
            assert!((gxx - h[j][(0, 0)]).abs() < 1e-6 && (gxy - h[j][(0, 1)]).abs() < 1e-6);
        }
    }

    #[test]
    fn degree_zero_basis_is_normalised_constant() {
        let m = quarter_disc();
        let (_, basis, _) = cell_setup(&m, 0);
        let v = basis.values(&Point::new(0.3, 0.2))[0];
        assert_relative_eq!(v, 1.0 / (PI / 4.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn cell_basis_is_orthonormal_and_nested() {
        let m = quarter_disc();
        let (rule, basis, tab) = cell_setup(&m, 4);
        assert_eq!(basis.dim(), 15);
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(&rule.weights));
        let gram = tab.values.transpose() * w * &tab.values;
        assert!((gram - DMatrix::identity(15, 15)).amax() < 1e-10);
        let sub = basis.truncated(2);
        assert_eq!(sub.dim(), 6);
        let x = Point::new(0.4, 0.1);
        assert!((sub.values(&x) - basis.values(&x).rows(0, 6)).amax() < 1e-14);
    }

    #[test]
    fn square_projection_reproduces_x() {
        let m = unit_square();
        let (rule, basis, tab) = cell_setup(&m, 1);
        let c = l2_project_cell(|x| x.x, &tab.values, &rule, basis.dim()).unwrap();
        for x in &rule.points {
            assert!((basis.eval(&c, x) - x.x).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_projection_has_single_coefficient() {
        let m = quarter_disc();
        let (rule, basis, tab) = cell_setup(&m, 3);
        let c = l2_project_cell(|_| 2.5, &tab.values, &rule, basis.dim()).unwrap();
        assert_relative_eq!(c[0], 2.5 * (PI / 4.0).sqrt(), max_relative = 1e-12);
        assert!(c.rows(1, c.len() - 1).amax() < 1e-12);
    }

    #[test]
    fn elliptic_projector_reproduces_quadratic() {
        let m = unit_square();
        let (rule, basis, tab) = cell_setup(&m, 2);
        let c = elliptic_project(
            |x| x.x * x.x,
            |x| Vector2::new(2.0 * x.x, 0.0),
            &tab,
            &rule,
            &Matrix2::identity(),
            "test",
        )
        .unwrap();
        for x in rule.points.iter().step_by(37) {
            assert!((basis.eval(&c, x) - x.x * x.x).abs() < 1e-11);
        }
    }

    fn segment_face() -> (Face, EdgeRule) {
        let face = Face {
            curve: Curve::segment(Point::new(0.1, 0.2), Point::new(0.7, -0.3)),
            vertices: [0, 1],
            elem_left: Some(0),
            elem_right: None,
            orientation: 1.0,
        };
        let rule = edge_rule(0, &face, &gauss_legendre(DEFAULT_POINTS).unwrap());
        (face, rule)
    }

    fn quarter_arc(orientation: f64) -> (Face, EdgeRule) {
        let face = Face {
            curve: Curve::circle(Point::zeros(), 1.0).restrict(0.0, PI / 2.0),
            vertices: [0, 1],
            elem_left: Some(0),
            elem_right: None,
            orientation,
        };
        let rule = edge_rule(0, &face, &gauss_legendre(DEFAULT_POINTS).unwrap());
        (face, rule)
    }

    #[test]
    fn segment_face_space_is_polynomial() {
        let (face, rule) = segment_face();
        for k in 0..=6 {
            let fs = build_face_space(&face, k, &rule, RANK_THRESHOLD).unwrap();
            assert_eq!(fs.dim(), k + 1, "k = {k}");
            // 1D monomials in the arc-length coordinate are reproduced
            for p in 0..=k as i32 {
                let f = |x: &Point| ((x - Point::new(0.1, 0.2)).norm()).powi(p);
                let c = l2_project_face(f, &fs, &rule).unwrap();
                let back = fs.eval_at_nodes(&c);
                for (i, x) in rule.points.iter().enumerate() {
                    assert!((back[i] - f(x)).abs() < 1e-10, "k = {k}, p = {p}");
                }
            }
        }
    }

    #[test]
    fn quarter_arc_degree_zero_has_three_functions() {
        let (face, rule) = quarter_arc(1.0);
        let fs = build_face_space(&face, 0, &rule, RANK_THRESHOLD).unwrap();
        assert_eq!(fs.dim(), 3);
    }

    #[test]
    fn face_space_dimension_bounds_and_constants() {
        let (face, rule) = quarter_arc(1.0);
        let mut last = 0;
        for k in 0..=6 {
            let fs = build_face_space(&face, k, &rule, RANK_THRESHOLD).unwrap();
            assert!(fs.dim() > k && fs.dim() <= 1 + (k + 1) * (k + 2));
            assert!(fs.dim() >= last);
            last = fs.dim();
            let c = l2_project_face(|_| 1.0, &fs, &rule).unwrap();
            let err = (fs.eval_at_nodes(&c).add_scalar(-1.0)).amax();
            assert!(err < 1e-12, "k = {k}: {err:e}");
        }
    }

    #[test]
    fn face_space_is_orientation_invariant() {
        let (face, rule) = quarter_arc(1.0);
        let (face_m, rule_m) = quarter_arc(-1.0);
        let f = |x: &Point| (3.0 * x.x).sin() + x.y * x.y;
        for k in 0..=4 {
            let a = build_face_space(&face, k, &rule, RANK_THRESHOLD).unwrap();
            let b = build_face_space(&face_m, k, &rule_m, RANK_THRESHOLD).unwrap();
            assert_eq!(a.dim(), b.dim());
            let pa = a.eval_at_nodes(&l2_project_face(f, &a, &rule).unwrap());
            let pb = b.eval_at_nodes(&l2_project_face(f, &b, &rule_m).unwrap());
            assert!((pa - pb).amax() < 1e-11);
        }
    }

    #[test]
    fn neumann_traces_lie_in_face_space() {
        let (face, rule) = quarter_arc(1.0);
        let k = 2;
        let fs = build_face_space(&face, k, &rule, RANK_THRESHOLD).unwrap();
        let kt = Matrix2::new(2.0, 0.5, 0.5, 1.0);
        let mono = ScaledMonomials::new(Point::new(0.3, 0.3), 0.8, k + 1);
        for j in 0..mono.len() {
            let samples = DVector::from_iterator(
                rule.points.len(),
                rule.points
                    .iter()
                    .zip(&rule.normals)
                    .map(|(x, n)| (kt * mono.gradients(x)[j]).dot(n)),
            );
            let c = l2_project_face_samples(&samples, &fs, &rule);
            let back = fs.eval_at_nodes(&c);
            assert!((back - &samples).amax() < 1e-10 * samples.amax().max(1.0), "j = {j}");
        }
    }
}
