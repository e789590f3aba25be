//! Rectangular parameter grids and finite-difference partials.
//!
//! All stencils are second order: central differences in the interior,
//! one-sided three/four point stencils on the boundary layers, mixed partials
//! by nesting the one-dimensional first-derivative operator. Residual
//! convergence studies therefore see a uniform O(h^2).

use nalgebra::DMatrix;

use crate::error::Error;
use crate::exprdsl::ScalarExpr;
use crate::Result;

pub const MIN_POINTS: usize = 5;

/// Uniform rectangular grid over a box in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    bounds: Vec<(f64, f64)>,
    points: Vec<usize>,
    strides: Vec<usize>,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, points: Vec<usize>) -> Result<Self> {
        if bounds.len() != points.len() || bounds.is_empty() {
            return Err(Error::Dimension(format!(
                "grid needs matching, non-empty bounds ({}) and points ({})",
                bounds.len(),
                points.len()
            )));
        }
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Dimension(format!(
                    "grid axis {axis}: bounds [{lo}, {hi}] must satisfy low < high"
                )));
            }
        }
        for (axis, &p) in points.iter().enumerate() {
            if p < MIN_POINTS {
                return Err(Error::GridTooSmall {
                    axis,
                    got: p,
                    needed: MIN_POINTS,
                });
            }
        }
        let mut strides = vec![0usize; points.len()];
        let mut s = 1;
        for axis in (0..points.len()).rev() {
            strides[axis] = s;
            s *= points[axis];
        }
        Ok(GridSpec {
            bounds,
            points,
            strides,
        })
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.points[axis] - 1) as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.m()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.points.iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Index of this node along `axis`.
    pub fn axis_position(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.points[axis]
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.m()).map(|a| self.axis_position(node, a)).collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .map(|(q, s)| q * s)
            .sum()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.m())
            .map(|a| self.bounds[a].0 + self.axis_position(node, a) as f64 * self.spacing(a))
            .collect()
    }

    pub fn is_interior(&self, node: usize) -> bool {
        (0..self.m()).all(|a| {
            let q = self.axis_position(node, a);
            q > 0 && q + 1 < self.points[a]
        })
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&n| self.is_interior(n))
            .collect()
    }

    /// Halved spacing: 2p − 1 points per axis over the same box.
    pub fn refined(&self) -> GridSpec {
        GridSpec::new(
            self.bounds.clone(),
            self.points.iter().map(|&p| 2 * p - 1).collect(),
        )
        .expect("refinement preserves validity")
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.m()).map(|a| self.spacing(a)).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Integrated,
    UserSupplied,
}

/// Discrete map x: grid ⊂ R^m → R^n. When built from analytic expressions the
/// expressions are kept, so exact partials remain available.
#[derive(Debug, Clone)]
pub struct MapGrid {
    pub spec: GridSpec,
    pub n: usize,
    pub provenance: Provenance,
    values: Vec<f64>, // [node * n + i]
    exprs: Option<Vec<ScalarExpr>>,
}

impl MapGrid {
    pub fn from_exprs(spec: GridSpec, exprs: Vec<ScalarExpr>) -> Result<Self> {
        let n = exprs.len();
        if n == 0 {
            return Err(Error::Dimension("map needs at least one component".into()));
        }
        let mut values = Vec::with_capacity(spec.node_count() * n);
        for node in 0..spec.node_count() {
            let t = spec.coords(node);
            for e in &exprs {
                values.push(e.eval(&t)?);
            }
        }
        Ok(MapGrid {
            spec,
            n,
            provenance: Provenance::Analytic,
            values,
            exprs: Some(exprs),
        })
    }

    pub fn from_values(
        spec: GridSpec,
        n: usize,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if values.len() != spec.node_count() * n {
            return Err(Error::Dimension(format!(
                "map grid needs {} values, got {}",
                spec.node_count() * n,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!(
                "map grid value {pos} is not finite"
            )));
        }
        Ok(MapGrid {
            spec,
            n,
            provenance,
            values,
            exprs: None,
        })
    }

    #[inline]
    pub fn value(&self, node: usize, i: usize) -> f64 {
        self.values[node * self.n + i]
    }

    pub fn values_at(&self, node: usize) -> &[f64] {
        &self.values[node * self.n..(node + 1) * self.n]
    }

    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn exprs(&self) -> Option<&[ScalarExpr]> {
        self.exprs.as_deref()
    }

    /// Finite-difference first and second partials at every node.
    pub fn fd_partials(&self) -> Result<GridPartials> {
        grid_partials(self)
    }

    /// Exact partials from the stored expressions, when the map is analytic.
    pub fn analytic_partials(&self) -> Result<Option<GridPartials>> {
        let Some(exprs) = &self.exprs else {
            return Ok(None);
        };
        let (m, n) = (self.spec.m(), self.n);
        let nodes = self.spec.node_count();
        let d1: Vec<ScalarExpr> = exprs
            .iter()
            .flat_map(|e| (0..m).map(move |a| e.diff(a)))
            .collect();
        let d2: Vec<ScalarExpr> = d1
            .iter()
            .flat_map(|e| (0..m).map(move |b| e.diff(b)))
            .collect();
        let mut first = vec![0.0; nodes * n * m];
        let mut second = vec![0.0; nodes * n * m * m];
        for node in 0..nodes {
            let t = self.spec.coords(node);
            for i in 0..n {
                for a in 0..m {
                    first[(node * n + i) * m + a] = d1[i * m + a].eval(&t)?;
                    for b in 0..m {
                        second[((node * n + i) * m + a) * m + b] =
                            d2[(i * m + a) * m + b].eval(&t)?;
                    }
                }
            }
        }
        Ok(Some(GridPartials {
            n,
            m,
            first,
            second,
        }))
    }
}

/// First partials x^i_α and second partials ∂²x^i/∂t^α∂t^β at every node.
#[derive(Debug, Clone)]
pub struct GridPartials {
    pub n: usize,
    pub m: usize,
    first: Vec<f64>,  // [(node*n + i)*m + a]
    second: Vec<f64>, // [((node*n + i)*m + a)*m + b]
}

impl GridPartials {
    #[inline]
    pub fn first(&self, node: usize, i: usize, a: usize) -> f64 {
        self.first[(node * self.n + i) * self.m + a]
    }

    #[inline]
    pub fn second(&self, node: usize, i: usize, a: usize, b: usize) -> f64 {
        self.second[((node * self.n + i) * self.m + a) * self.m + b]
    }

    /// Jacobian at a node as an n×m matrix (columns are x_α).
    pub fn jacobian(&self, node: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.m, |i, a| self.first(node, i, a))
    }
}

/// Second-order one-dimensional first derivative of a `comps`-component grid
/// field along `axis`.
pub(crate) fn axis_first_derivative(
    spec: &GridSpec,
    values: &[f64],
    comps: usize,
    axis: usize,
) -> Vec<f64> {
    let nodes = spec.node_count();
    let h = spec.spacing(axis);
    let s = spec.stride(axis) * comps;
    let p = spec.points()[axis];
    let mut out = vec![0.0; values.len()];
    for node in 0..nodes {
        let q = spec.axis_position(node, axis);
        let base = node * comps;
        for c in 0..comps {
            let k = base + c;
            out[k] = if q == 0 {
                (-3.0 * values[k] + 4.0 * values[k + s] - values[k + 2 * s]) / (2.0 * h)
            } else if q + 1 == p {
                (3.0 * values[k] - 4.0 * values[k - s] + values[k - 2 * s]) / (2.0 * h)
            } else {
                (values[k + s] - values[k - s]) / (2.0 * h)
            };
        }
    }
    out
}

/// Second-order first derivative along `axis` that never reads boundary
/// nodes: central in the deep interior, inward one-sided on the innermost
/// layer. Output is only meaningful at positions 1..points-2; boundary
/// positions are left zero. Fields whose boundary values carry a different
/// stencil error (e.g. conjugate momenta built from one-sided map partials)
/// must be differenced this way or the error seam costs an order.
pub(crate) fn axis_first_derivative_interior(
    spec: &GridSpec,
    values: &[f64],
    comps: usize,
    axis: usize,
) -> Vec<f64> {
    let nodes = spec.node_count();
    let h = spec.spacing(axis);
    let s = spec.stride(axis) * comps;
    let p = spec.points()[axis];
    let mut out = vec![0.0; values.len()];
    for node in 0..nodes {
        let q = spec.axis_position(node, axis);
        if q == 0 || q + 1 == p {
            continue;
        }
        let base = node * comps;
        for c in 0..comps {
            let k = base + c;
            out[k] = if q == 1 {
                (-3.0 * values[k] + 4.0 * values[k + s] - values[k + 2 * s]) / (2.0 * h)
            } else if q + 2 == p {
                (3.0 * values[k] - 4.0 * values[k - s] + values[k - 2 * s]) / (2.0 * h)
            } else {
                (values[k + s] - values[k - s]) / (2.0 * h)
            };
        }
    }
    out
}

/// Second-order pure second derivative along `axis` that never reads
/// boundary nodes when the axis has at least 7 points (falls back to the
/// boundary-touching stencil on very small axes). Only interior positions
/// are meaningful.
fn axis_second_derivative_interior(
    spec: &GridSpec,
    values: &[f64],
    comps: usize,
    axis: usize,
) -> Vec<f64> {
    let nodes = spec.node_count();
    let h2 = spec.spacing(axis).powi(2);
    let s = spec.stride(axis) * comps;
    let p = spec.points()[axis];
    let mut out = vec![0.0; values.len()];
    for node in 0..nodes {
        let q = spec.axis_position(node, axis);
        if q == 0 || q + 1 == p {
            continue;
        }
        let base = node * comps;
        for c in 0..comps {
            let k = base + c;
            out[k] = if q >= 2 && q + 2 < p {
                (values[k + s] - 2.0 * values[k] + values[k - s]) / h2
            } else if q == 1 && p >= 7 {
                (2.0 * values[k] - 5.0 * values[k + s] + 4.0 * values[k + 2 * s]
                    - values[k + 3 * s])
                    / h2
            } else if q + 2 == p && p >= 7 {
                (2.0 * values[k] - 5.0 * values[k - s] + 4.0 * values[k - 2 * s]
                    - values[k - 3 * s])
                    / h2
            } else {
                (values[k + s] - 2.0 * values[k] + values[k - s]) / h2
            };
        }
    }
    out
}

/// Finite-difference partials of a grid field whose values are themselves
/// derived data (e.g. a tabulated jet lift): every stencil reads interior
/// nodes only, so a different truncation-error profile on the boundary
/// cannot leak into the interior derivatives. Boundary entries of the
/// result are zero.
pub(crate) fn interior_partials(x: &MapGrid) -> GridPartials {
    let spec = &x.spec;
    let (m, n) = (spec.m(), x.n);
    let nodes = spec.node_count();

    let d1: Vec<Vec<f64>> = (0..m)
        .map(|a| axis_first_derivative_interior(spec, x.raw_values(), n, a))
        .collect();
    let d2_pure: Vec<Vec<f64>> = (0..m)
        .map(|a| axis_second_derivative_interior(spec, x.raw_values(), n, a))
        .collect();

    let mut first = vec![0.0; nodes * n * m];
    let mut second = vec![0.0; nodes * n * m * m];
    for node in 0..nodes {
        for i in 0..n {
            for a in 0..m {
                first[(node * n + i) * m + a] = d1[a][node * n + i];
                second[((node * n + i) * m + a) * m + a] = d2_pure[a][node * n + i];
            }
        }
    }
    for a in 0..m {
        for b in (a + 1)..m {
            let mixed = axis_first_derivative_interior(spec, &d1[b], n, a);
            for node in 0..nodes {
                for i in 0..n {
                    let v = mixed[node * n + i];
                    second[((node * n + i) * m + a) * m + b] = v;
                    second[((node * n + i) * m + b) * m + a] = v;
                }
            }
        }
    }
    GridPartials {
        n,
        m,
        first,
        second,
    }
}

/// Second-order pure second derivative along `axis`.
fn axis_second_derivative(
    spec: &GridSpec,
    values: &[f64],
    comps: usize,
    axis: usize,
) -> Vec<f64> {
    let nodes = spec.node_count();
    let h2 = spec.spacing(axis).powi(2);
    let s = spec.stride(axis) * comps;
    let p = spec.points()[axis];
    let mut out = vec![0.0; values.len()];
    for node in 0..nodes {
        let q = spec.axis_position(node, axis);
        let base = node * comps;
        for c in 0..comps {
            let k = base + c;
            out[k] = if q == 0 {
                (2.0 * values[k] - 5.0 * values[k + s] + 4.0 * values[k + 2 * s]
                    - values[k + 3 * s])
                    / h2
            } else if q + 1 == p {
                (2.0 * values[k] - 5.0 * values[k - s] + 4.0 * values[k - 2 * s]
                    - values[k - 3 * s])
                    / h2
            } else {
                (values[k + s] - 2.0 * values[k] + values[k - s]) / h2
            };
        }
    }
    out
}

/// Finite-difference partials of a map grid. Mixed partials are computed as
/// D_a(D_b x) for a < b and mirrored, so the stored table is symmetric.
pub fn grid_partials(x: &MapGrid) -> Result<GridPartials> {
    let spec = &x.spec;
    let (m, n) = (spec.m(), x.n);
    let nodes = spec.node_count();

    let d1: Vec<Vec<f64>> = (0..m)
        .map(|a| axis_first_derivative(spec, &x.raw_values(), n, a))
        .collect();
    let d2_pure: Vec<Vec<f64>> = (0..m)
        .map(|a| axis_second_derivative(spec, &x.raw_values(), n, a))
        .collect();

    let mut first = vec![0.0; nodes * n * m];
    let mut second = vec![0.0; nodes * n * m * m];
    for node in 0..nodes {
        for i in 0..n {
            for a in 0..m {
                first[(node * n + i) * m + a] = d1[a][node * n + i];
                second[((node * n + i) * m + a) * m + a] = d2_pure[a][node * n + i];
            }
        }
    }
    for a in 0..m {
        for b in (a + 1)..m {
            let mixed = axis_first_derivative(spec, &d1[b], n, a);
            for node in 0..nodes {
                for i in 0..n {
                    let v = mixed[node * n + i];
                    second[((node * n + i) * m + a) * m + b] = v;
                    second[((node * n + i) * m + b) * m + a] = v;
                }
            }
        }
    }
    Ok(GridPartials {
        n,
        m,
        first,
        second,
    })
}

/// Symmetric matrix field tabulated per node (e.g. an induced metric), with
/// grid-differenced Christoffel symbols.
#[derive(Debug, Clone)]
pub struct TabulatedMetric {
    pub spec: GridSpec,
    pub dim: usize,
    values: Vec<f64>, // [node * dim * dim + i * dim + j]
}

impl TabulatedMetric {
    pub fn new(spec: GridSpec, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.node_count() * dim * dim {
            return Err(Error::Dimension(format!(
                "tabulated metric needs {} values, got {}",
                spec.node_count() * dim * dim,
                values.len()
            )));
        }
        Ok(TabulatedMetric { spec, dim, values })
    }

    #[inline]
    pub fn get(&self, node: usize, i: usize, j: usize) -> f64 {
        self.values[node * self.dim * self.dim + i * self.dim + j]
    }

    pub fn matrix_at(&self, node: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(node, i, j))
    }

    /// Γ^γ_{αβ} per node from grid-differenced metric derivatives; the metric
    /// dimension must equal the grid dimension.
    pub fn christoffel_fd(&self) -> Result<Vec<super::Tensor3>> {
        let d = self.dim;
        if d != self.spec.m() {
            return Err(Error::Dimension(format!(
                "tabulated metric dim {d} must match grid dim {}",
                self.spec.m()
            )));
        }
        let comps = d * d;
        let deta: Vec<Vec<f64>> = (0..d)
            .map(|a| axis_first_derivative(&self.spec, &self.values, comps, a))
            .collect();
        let mut out = Vec::with_capacity(self.spec.node_count());
        for node in 0..self.spec.node_count() {
            let inv = self
                .matrix_at(node)
                .lu()
                .try_inverse()
                .ok_or(Error::SingularMetric {
                    point: self.spec.coords(node),
                })?;
            let dg = |g: usize, a: usize, b: usize| deta[g][node * comps + a * d + b];
            let mut t = super::Tensor3::zeros(d);
            for g in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        let mut v = 0.0;
                        for s in 0..d {
                            v += inv[(g, s)] * (dg(a, b, s) + dg(b, a, s) - dg(s, a, b));
                        }
                        t.set(g, a, b, 0.5 * v);
                    }
                }
            }
            out.push(t);
        }
        Ok(out)
    }
}
