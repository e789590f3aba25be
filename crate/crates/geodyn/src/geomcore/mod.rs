//! Shared geometric substrate: metric fields, distinguished tensor fields,
//! Christoffel symbols, curvature, and discrete map grids with their
//! finite-difference partials.
//!
//! Metric entries are symbolic; derivatives of metric components are exact.
//! Metric inversion is numeric (LU with partial pivoting, per evaluation
//! point), so expressions stay small and only pointwise values are computed.

mod grid;

use nalgebra::DMatrix;

use crate::error::Error;
use crate::exprdsl::{ScalarExpr, VarSet};
use crate::Result;

pub use grid::{
    grid_partials, GridPartials, GridSpec, MapGrid, Provenance, TabulatedMetric,
};
pub(crate) use grid::{axis_first_derivative_interior, interior_partials};

/// 3-index numeric table. Index meaning is documented per producer:
/// [`ChristoffelSecond`] yields `get(k, i, j)` = Γ^k_{ij}, while
/// [`FirstKindF`] yields `get(i, j, k)` = F_{jk|i}.
#[derive(Debug, Clone)]
pub struct Tensor3 {
    pub dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.dim + b) * self.dim + c] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// 4-index numeric table; `get(i, j, k, l)` = R^i_{jkl} for curvature.
#[derive(Debug, Clone)]
pub struct Tensor4 {
    pub dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Tensor4 {
            dim,
            data: vec![0.0; dim * dim * dim * dim],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((a * self.dim + b) * self.dim + c) * self.dim + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        self.data[((a * self.dim + b) * self.dim + c) * self.dim + d] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Riemannian,
    /// Symmetric, possibly degenerate; never inverted.
    SymmetricDegenerate,
}

/// Symmetric matrix of scalar expressions over one variable block.
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    kind: MetricKind,
    vars: VarSet,
    entries: Vec<ScalarExpr>, // dim*dim, mirrored from the upper triangle
}

impl MetricField {
    /// Build from the upper triangle, row-major: (0,0), (0,1), .., (1,1), ..
    /// The lower triangle is mirrored, so symmetry holds structurally.
    pub fn from_upper(
        dim: usize,
        kind: MetricKind,
        vars: VarSet,
        upper: Vec<ScalarExpr>,
    ) -> Result<Self> {
        if upper.len() != dim * (dim + 1) / 2 {
            return Err(Error::Dimension(format!(
                "metric of dim {dim} needs {} upper-triangle entries, got {}",
                dim * (dim + 1) / 2,
                upper.len()
            )));
        }
        let mut entries = vec![ScalarExpr::zero(); dim * dim];
        let mut it = upper.into_iter();
        for i in 0..dim {
            for j in i..dim {
                let e = it.next().unwrap();
                entries[i * dim + j] = e.clone();
                entries[j * dim + i] = e;
            }
        }
        Ok(MetricField {
            dim,
            kind,
            vars,
            entries,
        })
    }

    pub fn identity(dim: usize, vars: VarSet) -> Self {
        let mut entries = vec![ScalarExpr::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ScalarExpr::one();
        }
        MetricField {
            dim,
            kind: MetricKind::Riemannian,
            vars,
            entries,
        }
    }

    pub fn diagonal(kind: MetricKind, vars: VarSet, diag: Vec<ScalarExpr>) -> Self {
        let dim = diag.len();
        let mut entries = vec![ScalarExpr::zero(); dim * dim];
        for (i, e) in diag.into_iter().enumerate() {
            entries[i * dim + i] = e;
        }
        MetricField {
            dim,
            kind,
            vars,
            entries,
        }
    }

    /// Constant diagonal metric (handy for flat scenarios and jet metrics).
    pub fn const_diagonal(vars: VarSet, diag: &[f64]) -> Self {
        MetricField::diagonal(
            MetricKind::Riemannian,
            vars,
            diag.iter().map(|&v| ScalarExpr::num(v)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn is_riemannian(&self) -> bool {
        self.kind == MetricKind::Riemannian
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarExpr {
        &self.entries[i * self.dim + j]
    }

    pub fn eval_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.entry(i, j).eval(p)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    pub fn inverse_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.eval_at(p)?;
        m.lu().try_inverse().ok_or(Error::SingularMetric {
            point: p.to_vec(),
        })
    }

    pub fn det_at(&self, p: &[f64]) -> Result<f64> {
        Ok(self.eval_at(p)?.lu().determinant())
    }

    pub fn sqrt_abs_det_at(&self, p: &[f64]) -> Result<f64> {
        Ok(self.det_at(p)?.abs().sqrt())
    }

    /// ∂_k g_{ij} as exact symbolic expressions, flat layout
    /// `[k * dim * dim + i * dim + j]`.
    pub fn partials(&self) -> Vec<ScalarExpr> {
        let d = self.dim;
        let nv = self.vars.len();
        let mut out = Vec::with_capacity(nv * d * d);
        for k in 0..nv {
            for i in 0..d {
                for j in 0..d {
                    out.push(self.entry(i, j).diff(k));
                }
            }
        }
        out
    }
}

/// Report from sampling a metric for positive definiteness.
#[derive(Debug, Clone)]
pub struct PositiveDefiniteReport {
    pub samples: usize,
    pub failures: Vec<Vec<f64>>,
}

impl PositiveDefiniteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Attempt a Cholesky factorization at every sample point; points where the
/// metric fails to be positive definite (or fails to evaluate) are reported.
pub fn check_positive_definite(
    g: &MetricField,
    samples: &[Vec<f64>],
) -> PositiveDefiniteReport {
    let mut failures = Vec::new();
    for p in samples {
        match g.eval_at(p) {
            Ok(m) => {
                if nalgebra::Cholesky::new(m).is_none() {
                    failures.push(p.clone());
                }
            }
            Err(_) => failures.push(p.clone()),
        }
    }
    PositiveDefiniteReport {
        samples: samples.len(),
        failures,
    }
}

/// Christoffel symbols of the second kind, Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} +
/// ∂_j g_{il} − ∂_l g_{ij}): exact symbolic metric derivatives contracted
/// with the numerically inverted metric at evaluation time.
#[derive(Debug, Clone)]
pub struct ChristoffelSecond {
    metric: MetricField,
    dg: Vec<ScalarExpr>, // [l][i][j] = ∂_l g_{ij}
}

pub fn christoffel_second(g: &MetricField) -> Result<ChristoffelSecond> {
    if !g.is_riemannian() {
        return Err(Error::ShapeMismatch(
            "christoffel_second needs a riemannian metric".to_string(),
        ));
    }
    Ok(ChristoffelSecond {
        metric: g.clone(),
        dg: g.partials(),
    })
}

impl ChristoffelSecond {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    fn dg_at(&self, l: usize, i: usize, j: usize, p: &[f64]) -> Result<f64> {
        let d = self.metric.dim();
        Ok(self.dg[(l * d + i) * d + j].eval(p)?)
    }

    /// Γ^k_{ij} at a point; `get(k, i, j)`.
    pub fn eval_at(&self, p: &[f64]) -> Result<Tensor3> {
        let d = self.metric.dim();
        let inv = self.metric.inverse_at(p)?;
        let mut dg = Tensor3::zeros(d);
        for l in 0..d {
            for i in 0..d {
                for j in 0..d {
                    dg.set(l, i, j, self.dg_at(l, i, j, p)?);
                }
            }
        }
        let mut out = Tensor3::zeros(d);
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += inv[(k, l)] * (dg.get(i, j, l) + dg.get(j, i, l) - dg.get(l, i, j));
                    }
                    let v = 0.5 * s;
                    out.set(k, i, j, v);
                    out.set(k, j, i, v);
                }
            }
        }
        Ok(out)
    }

    /// Contracted symbols H^γ_{γα}, one value per α. This equals
    /// ∂_α log √|g| and carries the volume factor through Euler-Lagrange
    /// reductions.
    pub fn trace_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        let d = self.metric.dim();
        let gamma = self.eval_at(p)?;
        Ok((0..d)
            .map(|a| (0..d).map(|g| gamma.get(g, g, a)).sum())
            .collect())
    }
}

/// Christoffel symbols of the first kind attached to a symmetric (possibly
/// degenerate) tensor f: F_{jk|i} = ½(∂f_{ij}/∂x^k + ∂f_{ik}/∂x^j −
/// ∂f_{jk}/∂x^i). No inversion is used, so degenerate f is fine.
#[derive(Debug, Clone)]
pub struct FirstKindF {
    dim: usize,
    entries: Vec<ScalarExpr>, // [i][j][k] = F_{jk|i}
}

pub fn christoffel_first_f(f: &MetricField) -> FirstKindF {
    let d = f.dim();
    let mut entries = Vec::with_capacity(d * d * d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let df_ij_k = f.entry(i, j).diff(k);
                let df_ik_j = f.entry(i, k).diff(j);
                let df_jk_i = f.entry(j, k).diff(i);
                entries.push(crate::exprdsl::mul(
                    ScalarExpr::num(0.5),
                    crate::exprdsl::sub(crate::exprdsl::add(df_ij_k, df_ik_j), df_jk_i),
                ));
            }
        }
    }
    FirstKindF { dim: d, entries }
}

impl FirstKindF {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// F_{jk|i} at a point; `get(i, j, k)`.
    pub fn eval_at(&self, p: &[f64]) -> Result<Tensor3> {
        let d = self.dim;
        let mut out = Tensor3::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    out.set(i, j, k, self.entries[(i * d + j) * d + k].eval(p)?);
                }
            }
        }
        Ok(out)
    }
}

/// Riemann curvature R^i_{jkl} = ∂_k Γ^i_{jl} − ∂_l Γ^i_{jk} +
/// Γ^i_{ks}Γ^s_{jl} − Γ^i_{ls}Γ^s_{jk}, with ∂Γ evaluated exactly through
/// second symbolic metric derivatives and the derivative of the numeric
/// inverse (∂_k g^{is} = −g^{ia} ∂_k g_{ab} g^{bs}).
#[derive(Debug, Clone)]
pub struct RiemannField {
    metric: MetricField,
    dg: Vec<ScalarExpr>,  // [k][i][j]
    ddg: Vec<ScalarExpr>, // [k][l][i][j] = ∂_k ∂_l g_{ij}
}

pub fn riemann_curvature(g: &MetricField) -> Result<RiemannField> {
    if !g.is_riemannian() {
        return Err(Error::ShapeMismatch(
            "riemann_curvature needs a riemannian metric".to_string(),
        ));
    }
    let d = g.dim();
    let dg = g.partials();
    let mut ddg = Vec::with_capacity(d * d * d * d);
    for k in 0..d {
        for l in 0..d {
            for i in 0..d {
                for j in 0..d {
                    ddg.push(dg[(l * d + i) * d + j].diff(k));
                }
            }
        }
    }
    Ok(RiemannField {
        metric: g.clone(),
        dg,
        ddg,
    })
}

impl RiemannField {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// R^i_{jkl} at a point; `get(i, j, k, l)`.
    pub fn eval_at(&self, p: &[f64]) -> Result<Tensor4> {
        let d = self.metric.dim();
        let inv = self.metric.inverse_at(p)?;

        let mut dg = Tensor3::zeros(d);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    dg.set(k, i, j, self.dg[(k * d + i) * d + j].eval(p)?);
                }
            }
        }
        let mut ddg = Tensor4::zeros(d);
        for k in 0..d {
            for l in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        ddg.set(k, l, i, j, self.ddg[((k * d + l) * d + i) * d + j].eval(p)?);
                    }
                }
            }
        }

        // C_{s|jl} and its partials ∂_k C_{s|jl}
        let c = |s: usize, j: usize, l: usize, dg: &Tensor3| -> f64 {
            dg.get(j, l, s) + dg.get(l, j, s) - dg.get(s, j, l)
        };
        let dc = |k: usize, s: usize, j: usize, l: usize, ddg: &Tensor4| -> f64 {
            ddg.get(k, j, l, s) + ddg.get(k, l, j, s) - ddg.get(k, s, j, l)
        };

        // ∂_k g^{is} = −g^{ia} (∂_k g_{ab}) g^{bs}
        let mut dinv = Tensor3::zeros(d);
        for k in 0..d {
            for i in 0..d {
                for s in 0..d {
                    let mut v = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            v -= inv[(i, a)] * dg.get(k, a, b) * inv[(b, s)];
                        }
                    }
                    dinv.set(k, i, s, v);
                }
            }
        }

        // Γ^i_{jl} and ∂_k Γ^i_{jl}
        let mut gamma = Tensor3::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    let mut v = 0.0;
                    for s in 0..d {
                        v += inv[(i, s)] * c(s, j, l, &dg);
                    }
                    gamma.set(i, j, l, 0.5 * v);
                }
            }
        }
        let mut dgamma = Tensor4::zeros(d);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for l in 0..d {
                        let mut v = 0.0;
                        for s in 0..d {
                            v += dinv.get(k, i, s) * c(s, j, l, &dg)
                                + inv[(i, s)] * dc(k, s, j, l, &ddg);
                        }
                        dgamma.set(k, i, j, l, 0.5 * v);
                    }
                }
            }
        }

        let mut r = Tensor4::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut v = dgamma.get(k, i, j, l) - dgamma.get(l, i, j, k);
                        for s in 0..d {
                            v += gamma.get(i, k, s) * gamma.get(s, j, l)
                                - gamma.get(i, l, s) * gamma.get(s, j, k);
                        }
                        r.set(i, j, k, l, v);
                    }
                }
            }
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorShape {
    /// X^i_α(t, x) on N×M
    Mixed,
    /// T^i_α(t) on N
    Sheet,
    /// Y^i_j(x) on M
    Endo,
}

/// Distinguished tensor field: an n×cols matrix of expressions with declared
/// variable dependence fixed by its shape.
#[derive(Debug, Clone)]
pub struct DistTensor {
    shape: TensorShape,
    n: usize,
    m: usize,
    cols: usize,
    vars: VarSet,
    entries: Vec<ScalarExpr>, // row-major [i*cols + a]
}

impl DistTensor {
    pub fn mixed(n: usize, m: usize, entries: Vec<ScalarExpr>) -> Result<Self> {
        Self::build(TensorShape::Mixed, n, m, m, VarSet::tx_vars(m, n), entries)
    }

    pub fn sheet(n: usize, m: usize, entries: Vec<ScalarExpr>) -> Result<Self> {
        Self::build(TensorShape::Sheet, n, m, m, VarSet::t_vars(m), entries)
    }

    pub fn endo(n: usize, entries: Vec<ScalarExpr>) -> Result<Self> {
        Self::build(TensorShape::Endo, n, 0, n, VarSet::x_vars(n), entries)
    }

    fn build(
        shape: TensorShape,
        n: usize,
        m: usize,
        cols: usize,
        vars: VarSet,
        entries: Vec<ScalarExpr>,
    ) -> Result<Self> {
        if entries.len() != n * cols {
            return Err(Error::Dimension(format!(
                "tensor needs {}x{} = {} entries, got {}",
                n,
                cols,
                n * cols,
                entries.len()
            )));
        }
        Ok(DistTensor {
            shape,
            n,
            m,
            cols,
            vars,
            entries,
        })
    }

    pub fn zero_mixed(n: usize, m: usize) -> Self {
        DistTensor::mixed(n, m, vec![ScalarExpr::zero(); n * m]).unwrap()
    }

    pub fn zero_sheet(n: usize, m: usize) -> Self {
        DistTensor::sheet(n, m, vec![ScalarExpr::zero(); n * m]).unwrap()
    }

    pub fn identity_endo(n: usize) -> Self {
        let mut entries = vec![ScalarExpr::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = ScalarExpr::one();
        }
        DistTensor::endo(n, entries).unwrap()
    }

    pub fn shape(&self) -> TensorShape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn entry(&self, i: usize, a: usize) -> &ScalarExpr {
        &self.entries[i * self.cols + a]
    }

    /// Variable slot of t^beta inside this tensor's expressions, if t is in
    /// scope for its shape.
    pub fn t_var(&self, beta: usize) -> Option<usize> {
        match self.shape {
            TensorShape::Mixed | TensorShape::Sheet => Some(beta),
            TensorShape::Endo => None,
        }
    }

    /// Variable slot of x^j inside this tensor's expressions.
    pub fn x_var(&self, j: usize) -> Option<usize> {
        match self.shape {
            TensorShape::Mixed => Some(self.m + j),
            TensorShape::Endo => Some(j),
            TensorShape::Sheet => None,
        }
    }

    /// Assemble the evaluation point for this tensor's variable block.
    pub fn point(&self, t: &[f64], x: &[f64]) -> Vec<f64> {
        match self.shape {
            TensorShape::Mixed => {
                let mut p = Vec::with_capacity(t.len() + x.len());
                p.extend_from_slice(t);
                p.extend_from_slice(x);
                p
            }
            TensorShape::Sheet => t.to_vec(),
            TensorShape::Endo => x.to_vec(),
        }
    }

    /// Evaluate the whole matrix at (t, x); rows × cols.
    pub fn eval_at(&self, t: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
        let p = self.point(t, x);
        let mut out = DMatrix::zeros(self.n, self.cols);
        for i in 0..self.n {
            for a in 0..self.cols {
                out[(i, a)] = self.entry(i, a).eval(&p)?;
            }
        }
        Ok(out)
    }
}
