//! Euler-Lagrange residual operators: a generic discrete EL operator for
//! arbitrary densities, and direct evaluators for every named second-order
//! system.
//!
//! Sign convention, fixed once: the generic operator returns
//! ∂E/∂x^k − ∂_α(∂E/∂x^k_α) − H^γ_{γα} ∂E/∂x^k_α, which is −∂²x/∂t² for the
//! kinetic density of a flat 1-D scenario. Every named residual R below
//! satisfies R = −(transform) · generic(E) for its density E, where the
//! transform is the identity for lowered-index systems and g^{ik} for the
//! raised-index ones.
//!
//! Residuals are evaluated at interior nodes only; boundary stencils would
//! pollute convergence ratios.

use crate::energies::CScalar;
use crate::error::Error;
use crate::exprdsl::ScalarExpr;
use crate::geomcore::{
    christoffel_first_f, christoffel_second, grid_partials, DistTensor, GridPartials, GridSpec,
    MapGrid, MetricField, MetricKind, TensorShape,
};
use crate::verify::{omega_decomposition, OmegaKind};
use crate::Result;

/// Residual vectors at the interior nodes of a grid, with max/mean norms
/// over the per-node Euclidean norms.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub spec: GridSpec,
    pub comps: usize,
    pub interior: Vec<usize>,
    pub values: Vec<f64>, // interior.len() * comps
    pub max_norm: f64,
    pub mean_norm: f64,
}

impl ResidualReport {
    pub fn from_values(
        spec: GridSpec,
        comps: usize,
        interior: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(values.len(), interior.len() * comps);
        let mut max_norm = 0.0f64;
        let mut sum = 0.0f64;
        for k in 0..interior.len() {
            let norm = values[k * comps..(k + 1) * comps]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            max_norm = max_norm.max(norm);
            sum += norm;
        }
        let mean_norm = if interior.is_empty() {
            0.0
        } else {
            sum / interior.len() as f64
        };
        ResidualReport {
            spec,
            comps,
            interior,
            values,
            max_norm,
            mean_norm,
        }
    }

    #[inline]
    pub fn value(&self, k: usize, c: usize) -> f64 {
        self.values[k * self.comps + c]
    }

    pub fn node_norm(&self, k: usize) -> f64 {
        self.values[k * self.comps..(k + 1) * self.comps]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Entry-wise difference with another report over the same grid.
    pub fn difference(&self, other: &ResidualReport) -> Result<ResidualReport> {
        if self.comps != other.comps || self.interior != other.interior {
            return Err(Error::ShapeMismatch(
                "residual reports cover different nodes or components".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ResidualReport::from_values(
            self.spec.clone(),
            self.comps,
            self.interior.clone(),
            values,
        ))
    }
}

/// Ratio of max norms under grid refinement; ≈4 for O(h²) convergence.
pub fn convergence_ratio(coarse: &ResidualReport, fine: &ResidualReport) -> f64 {
    coarse.max_norm / fine.max_norm
}

struct NodeContext {
    parts: GridPartials,
}

impl NodeContext {
    fn new(x: &MapGrid) -> Result<Self> {
        Ok(NodeContext {
            parts: grid_partials(x)?,
        })
    }

    fn d1(&self, node: usize, i: usize, a: usize) -> f64 {
        self.parts.first(node, i, a)
    }

    fn d2(&self, node: usize, i: usize, a: usize, b: usize) -> f64 {
        self.parts.second(node, i, a, b)
    }

    fn gradient(&self, node: usize) -> Vec<f64> {
        crate::energies::gradient_at(&self.parts, node)
    }
}

fn interior_report<F>(x: &MapGrid, comps: usize, mut residual_at: F) -> Result<ResidualReport>
where
    F: FnMut(usize, &mut [f64]) -> Result<()>,
{
    let interior = x.spec.interior_nodes();
    let mut values = vec![0.0; interior.len() * comps];
    for (k, &node) in interior.iter().enumerate() {
        residual_at(node, &mut values[k * comps..(k + 1) * comps])?;
    }
    Ok(ResidualReport::from_values(
        x.spec.clone(),
        comps,
        interior,
        values,
    ))
}

/// Generic discrete Euler-Lagrange residual of a density E(t, x, ∂x):
/// ∂E/∂x^k − ∂_α(∂E/∂x^k_α) − H^γ_{γα} ∂E/∂x^k_α at each interior node.
/// Derivatives of E in x and x_α are central perturbations (step
/// 1e-6·(1+|value|)); the outer ∂_α is a grid difference of the nodewise
/// ∂E/∂x^k_α field, restricted to interior nodes where the map partials all
/// come from central stencils. Momenta at boundary nodes carry a different
/// stencil error and differencing across that seam would cost an order.
pub fn el_residual_generic<F>(x: &MapGrid, h: &MetricField, density: F) -> Result<ResidualReport>
where
    F: Fn(&[f64], &[f64], &[f64]) -> Result<f64>,
{
    let ctx = NodeContext::new(x)?;
    let (n, m) = (x.n, x.spec.m());
    let nodes = x.spec.node_count();
    let christ_h = christoffel_second(h)?;

    // conjugate momenta P^k_α = ∂E/∂x^k_α at interior nodes
    let mut momenta = vec![0.0; nodes * n * m];
    let mut de_dx = vec![0.0; nodes * n];
    let mut xbuf = vec![0.0; n];
    let mut dxbuf = vec![0.0; n * m];
    for node in 0..nodes {
        if !x.spec.is_interior(node) {
            continue;
        }
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        let dx = ctx.gradient(node);
        for k in 0..n {
            for a in 0..m {
                let step = 1e-6 * (1.0 + dx[k * m + a].abs());
                dxbuf.copy_from_slice(&dx);
                dxbuf[k * m + a] = dx[k * m + a] + step;
                let hi = density(&t, xv, &dxbuf)?;
                dxbuf[k * m + a] = dx[k * m + a] - step;
                let lo = density(&t, xv, &dxbuf)?;
                momenta[(node * n + k) * m + a] = (hi - lo) / (2.0 * step);
            }
            let step = 1e-6 * (1.0 + xv[k].abs());
            xbuf.copy_from_slice(xv);
            xbuf[k] = xv[k] + step;
            let hi = density(&t, &xbuf, &dx)?;
            xbuf[k] = xv[k] - step;
            let lo = density(&t, &xbuf, &dx)?;
            de_dx[node * n + k] = (hi - lo) / (2.0 * step);
        }
    }

    // ∂_α of the momentum field, one interior-only grid pass per axis
    let divergence: Vec<Vec<f64>> = (0..m)
        .map(|a| crate::geomcore::axis_first_derivative_interior(&x.spec, &momenta, n * m, a))
        .collect();

    interior_report(x, n, |node, out| {
        let t = x.spec.coords(node);
        let htr = christ_h.trace_at(&t)?;
        for k in 0..n {
            let mut v = de_dx[node * n + k];
            for a in 0..m {
                let p_ka = momenta[(node * n + k) * m + a];
                v -= divergence[a][(node * n + k) * m + a] + htr[a] * p_ka;
            }
            out[k] = v;
        }
        Ok(())
    })
}

/// Raised-index harmonic residual h^{αβ} x^i_{αβ} with
/// x^i_{αβ} = ∂²x^i − H^γ_{αβ} x^i_γ + G^i_{jk} x^j_α x^k_β.
pub fn harmonic_residual(x: &MapGrid, h: &MetricField, g: &MetricField) -> Result<ResidualReport> {
    let ctx = NodeContext::new(x)?;
    let (n, m) = (x.n, x.spec.m());
    let christ_h = christoffel_second(h)?;
    let christ_g = christoffel_second(g)?;
    interior_report(x, n, |node, out| {
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        let hinv = h.inverse_at(&t)?;
        let hh = christ_h.eval_at(&t)?;
        let gg = christ_g.eval_at(xv)?;
        for i in 0..n {
            let mut v = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let hab = hinv[(a, b)];
                    if hab == 0.0 {
                        continue;
                    }
                    let mut second = ctx.d2(node, i, a, b);
                    for gma in 0..m {
                        second -= hh.get(gma, a, b) * ctx.d1(node, i, gma);
                    }
                    for j in 0..n {
                        for k in 0..n {
                            second += gg.get(i, j, k) * ctx.d1(node, j, a) * ctx.d1(node, k, b);
                        }
                    }
                    v += hab * second;
                }
            }
            out[i] = v;
        }
        Ok(())
    })
}

/// Lowered-index f-ultra-harmonic residual h^{αβ} x_{iαβ} with
/// x_{iαβ} = f_{ij}∂²x^j − H^γ_{αβ} f_{ij} x^j_γ + F_{jk|i} x^j_α x^k_β.
/// f may be degenerate; nothing is inverted.
pub fn ultra_harmonic_residual(
    x: &MapGrid,
    h: &MetricField,
    f: &MetricField,
) -> Result<ResidualReport> {
    let ctx = NodeContext::new(x)?;
    let (n, m) = (x.n, x.spec.m());
    let christ_h = christoffel_second(h)?;
    let first_kind = christoffel_first_f(f);
    interior_report(x, n, |node, out| {
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        let hinv = h.inverse_at(&t)?;
        let hh = christ_h.eval_at(&t)?;
        let fm = f.eval_at(xv)?;
        let ff = first_kind.eval_at(xv)?;
        for i in 0..n {
            let mut v = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let hab = hinv[(a, b)];
                    if hab == 0.0 {
                        continue;
                    }
                    let mut term = 0.0;
                    for j in 0..n {
                        let mut covariant = ctx.d2(node, j, a, b);
                        for gma in 0..m {
                            covariant -= hh.get(gma, a, b) * ctx.d1(node, j, gma);
                        }
                        term += fm[(i, j)] * covariant;
                    }
                    for j in 0..n {
                        for k in 0..n {
                            term += ff.get(i, j, k) * ctx.d1(node, j, a) * ctx.d1(node, k, b);
                        }
                    }
                    v += hab * term;
                }
            }
            out[i] = v;
        }
        Ok(())
    })
}

/// Entry-wise sum f + g as a symbolic field; the deviated energy's
/// second-order operator acts through this combined tensor.
pub fn metric_sum(f: &MetricField, g: &MetricField) -> Result<MetricField> {
    if f.dim() != g.dim() {
        return Err(Error::Dimension(format!(
            "cannot add metrics of dims {} and {}",
            f.dim(),
            g.dim()
        )));
    }
    let n = f.dim();
    let mut upper = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            upper.push(crate::exprdsl::add(
                f.entry(i, j).clone(),
                g.entry(i, j).clone(),
            ));
        }
    }
    MetricField::from_upper(n, MetricKind::SymmetricDegenerate, f.vars().clone(), upper)
}

/// Lowered-index f-ultra-potential residual: LHS − RHS of the deviated
/// system. The left side is the ultra-harmonic operator of the combined
/// tensor f + g (the deviated energy contributes both parts); the right side
/// carries the T-source terms, all contracted with h^{αβ}.
pub fn ultra_potential_residual(
    x: &MapGrid,
    h: &MetricField,
    g: &MetricField,
    f: &MetricField,
    t_field: &DistTensor,
) -> Result<ResidualReport> {
    if t_field.shape() != TensorShape::Sheet {
        return Err(Error::ShapeMismatch("T must be sheet-shaped".into()));
    }
    let (n, m) = (x.n, x.spec.m());
    let combined = metric_sum(f, g)?;
    let lhs = ultra_harmonic_residual(x, h, &combined)?;

    let ctx = NodeContext::new(x)?;
    let christ_h = christoffel_second(h)?;
    let christ_g = christoffel_second(g)?;
    // ∂T^i_α/∂t^β, symbolic
    let dt: Vec<ScalarExpr> = (0..n)
        .flat_map(|i| {
            (0..m).flat_map(move |a| (0..m).map(move |b| t_field.entry(i, a).diff(b)))
        })
        .collect();
    let dg = g.partials();

    let rhs = interior_report(x, n, |node, out| {
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        let hinv = h.inverse_at(&t)?;
        let hh = christ_h.eval_at(&t)?;
        let gm = g.eval_at(xv)?;
        let gg = christ_g.eval_at(xv)?;
        let tv = t_field.eval_at(&t, xv)?;
        for i in 0..n {
            let mut v = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let hab = hinv[(a, b)];
                    if hab == 0.0 {
                        continue;
                    }
                    let mut term = 0.0;
                    // g_{ij}[∂T^j_α/∂t^β − T^j_γ H^γ_{αβ}]
                    for j in 0..n {
                        let mut cov = dt[(j * m + a) * m + b].eval(&t)?;
                        for gma in 0..m {
                            cov -= tv[(j, gma)] * hh.get(gma, a, b);
                        }
                        term += gm[(i, j)] * cov;
                    }
                    // x^j_α T^k_β [g_{si}G^s_{jk} − g_{sj}G^s_{ki}]
                    for j in 0..n {
                        for k in 0..n {
                            let mut bracket = 0.0;
                            for s in 0..n {
                                bracket += gm[(s, i)] * gg.get(s, j, k)
                                    - gm[(s, j)] * gg.get(s, k, i);
                            }
                            term += ctx.d1(node, j, a) * tv[(k, b)] * bracket;
                        }
                    }
                    // ½ T^j_α T^k_β ∂g_{jk}/∂x^i
                    for j in 0..n {
                        for k in 0..n {
                            term += 0.5
                                * tv[(j, a)]
                                * tv[(k, b)]
                                * dg[(i * n + j) * n + k].eval(xv)?;
                        }
                    }
                    v += hab * term;
                }
            }
            out[i] = v;
        }
        Ok(())
    })?;

    lhs.difference(&rhs)
}

/// Covariant derivative pieces of a mixed tensor field at one point:
/// ∇_j X^i_α, D_β X^i_α, and F_j{}^i{}_α.
#[derive(Debug, Clone)]
pub struct CovariantPieces {
    pub n: usize,
    pub m: usize,
    /// [(j*n + i)*m + a] = ∇_j X^i_α
    pub nabla: Vec<f64>,
    /// [(b*n + i)*m + a] = D_β X^i_α
    pub dcov: Vec<f64>,
    /// [(j*n + i)*m + a] = F_j{}^i{}_α = ∇_j X^i_α − g_{hj} g^{ik} ∇_k X^h_α
    pub f_mixed: Vec<f64>,
}

pub fn covariant_pieces(
    x_field: &DistTensor,
    h: &MetricField,
    g: &MetricField,
    t: &[f64],
    x: &[f64],
) -> Result<CovariantPieces> {
    if x_field.shape() != TensorShape::Mixed {
        return Err(Error::ShapeMismatch("X must be mixed-shaped".into()));
    }
    let (n, m) = (g.dim(), h.dim());
    let p = x_field.point(t, x);
    let xv = x_field.eval_at(t, x)?;
    let gg = christoffel_second(g)?.eval_at(x)?;
    let hh = christoffel_second(h)?.eval_at(t)?;
    let gm = g.eval_at(x)?;
    let ginv = g.inverse_at(x)?;

    let mut nabla = vec![0.0; n * n * m];
    for j in 0..n {
        let xj = x_field.x_var(j).expect("mixed tensor has x variables");
        for i in 0..n {
            for a in 0..m {
                let mut v = x_field.entry(i, a).diff(xj).eval(&p)?;
                for k in 0..n {
                    v += gg.get(i, j, k) * xv[(k, a)];
                }
                nabla[(j * n + i) * m + a] = v;
            }
        }
    }

    let mut dcov = vec![0.0; m * n * m];
    for b in 0..m {
        let tb = x_field.t_var(b).expect("mixed tensor has t variables");
        for i in 0..n {
            for a in 0..m {
                let mut v = x_field.entry(i, a).diff(tb).eval(&p)?;
                for gma in 0..m {
                    v -= hh.get(gma, b, a) * xv[(i, gma)];
                }
                dcov[(b * n + i) * m + a] = v;
            }
        }
    }

    let mut f_mixed = vec![0.0; n * n * m];
    for j in 0..n {
        for i in 0..n {
            for a in 0..m {
                let mut v = nabla[(j * n + i) * m + a];
                for hidx in 0..n {
                    for k in 0..n {
                        v -= gm[(hidx, j)] * ginv[(i, k)] * nabla[(k * n + hidx) * m + a];
                    }
                }
                f_mixed[(j * n + i) * m + a] = v;
            }
        }
    }

    Ok(CovariantPieces {
        n,
        m,
        nabla,
        dcov,
        f_mixed,
    })
}

/// Raised-index potential residual: h^{αβ}x^i_{αβ} − g^{ij}∂c/∂x^j
/// − h^{αβ}F_k{}^i{}_β x^k_α − h^{αβ}D_α X^i_β.
pub fn potential_residual(
    x: &MapGrid,
    h: &MetricField,
    g: &MetricField,
    x_field: &DistTensor,
    c: &CScalar,
) -> Result<ResidualReport> {
    if x_field.shape() != TensorShape::Mixed {
        return Err(Error::ShapeMismatch("X must be mixed-shaped".into()));
    }
    let (n, m) = (x.n, x.spec.m());
    let lhs = harmonic_residual(x, h, g)?;
    let ctx = NodeContext::new(x)?;
    let rhs = interior_report(x, n, |node, out| {
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        let hinv = h.inverse_at(&t)?;
        let ginv = g.inverse_at(xv)?;
        let pieces = covariant_pieces(x_field, h, g, &t, xv)?;
        let grad_c = c.grad_x(&t, xv, m, n)?;
        for i in 0..n {
            let mut v = 0.0;
            for j in 0..n {
                v += ginv[(i, j)] * grad_c[j];
            }
            for a in 0..m {
                for b in 0..m {
                    let hab = hinv[(a, b)];
                    if hab == 0.0 {
                        continue;
                    }
                    let mut term = 0.0;
                    for k in 0..n {
                        term += pieces.f_mixed[(k * n + i) * m + b] * ctx.d1(node, k, a);
                    }
                    term += pieces.dcov[(a * n + i) * m + b];
                    v += hab * term;
                }
            }
            out[i] = v;
        }
        Ok(())
    })?;
    lhs.difference(&rhs)
}

/// Lowered-index residual of the non-homogeneous dynamics system:
/// h^{αβ}g_{ip}Y^i_j[∂²x^j − x^j_γH^γ_{αβ}] + h^{αβ}x^j_αx^k_βS_{jk|p}
/// minus the T-source right side.
pub fn nonhomogeneous_dynamics_residual(
    x: &MapGrid,
    h: &MetricField,
    g: &MetricField,
    y: &DistTensor,
    t_field: &DistTensor,
) -> Result<ResidualReport> {
    if y.shape() != TensorShape::Endo {
        return Err(Error::ShapeMismatch("Y must be endomorphism-shaped".into()));
    }
    if t_field.shape() != TensorShape::Sheet {
        return Err(Error::ShapeMismatch("T must be sheet-shaped".into()));
    }
    let ctx = NodeContext::new(x)?;
    let (n, m) = (x.n, x.spec.m());
    let christ_h = christoffel_second(h)?;
    let christ_g = christoffel_second(g)?;
    let dt: Vec<ScalarExpr> = (0..n)
        .flat_map(|i| {
            (0..m).flat_map(move |a| (0..m).map(move |b| t_field.entry(i, a).diff(b)))
        })
        .collect();
    let dg = g.partials();

    interior_report(x, n, |node, out| {
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        let hinv = h.inverse_at(&t)?;
        let hh = christ_h.eval_at(&t)?;
        let gm = g.eval_at(xv)?;
        let gg = christ_g.eval_at(xv)?;
        let yv = y.eval_at(&[], xv)?;
        let tv = t_field.eval_at(&t, xv)?;
        let s_table = omega_decomposition(OmegaKind::Dynamics, g, y, xv)?.s;
        for p in 0..n {
            let mut v = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let hab = hinv[(a, b)];
                    if hab == 0.0 {
                        continue;
                    }
                    let mut lhs = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let mut cov = ctx.d2(node, j, a, b);
                            for gma in 0..m {
                                cov -= ctx.d1(node, j, gma) * hh.get(gma, a, b);
                            }
                            lhs += gm[(i, p)] * yv[(i, j)] * cov;
                        }
                    }
                    for j in 0..n {
                        for k in 0..n {
                            lhs += ctx.d1(node, j, a) * ctx.d1(node, k, b) * s_table.get(j, k, p);
                        }
                    }

                    let mut rhs = 0.0;
                    for i in 0..n {
                        let mut cov = dt[(i * m + a) * m + b].eval(&t)?;
                        for gma in 0..m {
                            cov -= tv[(i, gma)] * hh.get(gma, a, b);
                        }
                        rhs += gm[(i, p)] * cov;
                    }
                    for j in 0..n {
                        for k in 0..n {
                            let mut bracket = 0.0;
                            for s in 0..n {
                                bracket += gm[(s, p)] * gg.get(s, j, k)
                                    - gm[(s, j)] * gg.get(s, k, p);
                            }
                            rhs += ctx.d1(node, j, a) * tv[(k, b)] * bracket;
                            rhs += 0.5
                                * tv[(j, a)]
                                * tv[(k, b)]
                                * dg[(p * n + j) * n + k].eval(xv)?;
                        }
                    }
                    v += hab * (lhs - rhs);
                }
            }
            out[p] = v;
        }
        Ok(())
    })
}

/// Lowered-index residual of the homogeneous dynamics system:
/// h^{αβ}g_{ik}Y^i_j x^j_{αβ} + h^{αβ}g_{ik}x^j_α x^p_β (∇_pY)^i_j.
pub fn homogeneous_dynamics_residual(
    x: &MapGrid,
    h: &MetricField,
    g: &MetricField,
    y: &DistTensor,
) -> Result<ResidualReport> {
    if y.shape() != TensorShape::Endo {
        return Err(Error::ShapeMismatch("Y must be endomorphism-shaped".into()));
    }
    let ctx = NodeContext::new(x)?;
    let (n, m) = (x.n, x.spec.m());
    let christ_h = christoffel_second(h)?;
    let christ_g = christoffel_second(g)?;
    interior_report(x, n, |node, out| {
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        let hinv = h.inverse_at(&t)?;
        let hh = christ_h.eval_at(&t)?;
        let gm = g.eval_at(xv)?;
        let gg = christ_g.eval_at(xv)?;
        let yv = y.eval_at(&[], xv)?;
        let ny = crate::verify::nabla_y(g, y, xv)?;
        for k in 0..n {
            let mut v = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let hab = hinv[(a, b)];
                    if hab == 0.0 {
                        continue;
                    }
                    let mut term = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            // full covariant second form of the map
                            let mut cov = ctx.d2(node, j, a, b);
                            for gma in 0..m {
                                cov -= ctx.d1(node, j, gma) * hh.get(gma, a, b);
                            }
                            for l in 0..n {
                                for q in 0..n {
                                    cov += gg.get(j, l, q)
                                        * ctx.d1(node, l, a)
                                        * ctx.d1(node, q, b);
                                }
                            }
                            term += gm[(i, k)] * yv[(i, j)] * cov;
                        }
                    }
                    for j in 0..n {
                        for p in 0..n {
                            let mut low = 0.0;
                            for i in 0..n {
                                low += gm[(i, k)] * ny.get(p, i, j);
                            }
                            term += ctx.d1(node, j, a) * ctx.d1(node, p, b) * low;
                        }
                    }
                    v += hab * term;
                }
            }
            out[k] = v;
        }
        Ok(())
    })
}

/// Lowered-index residual of the h⁰ general-harmonicity system:
/// h^{0αβ}(g_{is}Y^s_j + g_{js}Y^s_i)[∂²x^j − x^j_γH^{0γ}_{αβ}]
/// + h^{0αβ}x^p_α x^k_β S_{pk|i}, with the Ω decomposition of the
/// harmonicity kind. h0 is user-supplied; nothing solves for it.
pub fn h0_dynamics_residual(
    x: &MapGrid,
    h0: &MetricField,
    g: &MetricField,
    y: &DistTensor,
) -> Result<ResidualReport> {
    if y.shape() != TensorShape::Endo {
        return Err(Error::ShapeMismatch("Y must be endomorphism-shaped".into()));
    }
    let ctx = NodeContext::new(x)?;
    let (n, m) = (x.n, x.spec.m());
    let christ_h0 = christoffel_second(h0)?;
    interior_report(x, n, |node, out| {
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        let hinv = h0.inverse_at(&t)?;
        let hh = christ_h0.eval_at(&t)?;
        let gm = g.eval_at(xv)?;
        let yv = y.eval_at(&[], xv)?;
        let s_table = omega_decomposition(OmegaKind::Harmonic, g, y, xv)?.s;
        // f_{ij} = g_{is}Y^s_j + g_{js}Y^s_i
        let gy = &gm * &yv;
        let f = &gy + gy.transpose();
        for i in 0..n {
            let mut v = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let hab = hinv[(a, b)];
                    if hab == 0.0 {
                        continue;
                    }
                    let mut term = 0.0;
                    for j in 0..n {
                        let mut cov = ctx.d2(node, j, a, b);
                        for gma in 0..m {
                            cov -= ctx.d1(node, j, gma) * hh.get(gma, a, b);
                        }
                        term += f[(i, j)] * cov;
                    }
                    for p in 0..n {
                        for k in 0..n {
                            term += ctx.d1(node, p, a) * ctx.d1(node, k, b) * s_table.get(p, k, i);
                        }
                    }
                    v += hab * term;
                }
            }
            out[i] = v;
        }
        Ok(())
    })
}

/// Difference between a named residual and −generic(E), the match every
/// theorem asserts. `raise` supplies (g, x) when the named residual carries a
/// raised index and the generic one must be raised by g^{ik} before
/// comparing.
pub fn el_match_difference(
    named: &ResidualReport,
    generic: &ResidualReport,
    raise: Option<(&MetricField, &MapGrid)>,
) -> Result<ResidualReport> {
    if named.comps != generic.comps || named.interior != generic.interior {
        return Err(Error::ShapeMismatch(
            "named and generic residual reports are not aligned".into(),
        ));
    }
    let comps = named.comps;
    let mut values = Vec::with_capacity(named.values.len());
    match raise {
        None => {
            for (a, b) in named.values.iter().zip(&generic.values) {
                values.push(a + b);
            }
        }
        Some((g, x)) => {
            for (k, &node) in named.interior.iter().enumerate() {
                let ginv = g.inverse_at(x.values_at(node))?;
                for i in 0..comps {
                    let mut raised = 0.0;
                    for j in 0..comps {
                        raised += ginv[(i, j)] * generic.value(k, j);
                    }
                    values.push(named.value(k, i) + raised);
                }
            }
        }
    }
    Ok(ResidualReport::from_values(
        named.spec.clone(),
        comps,
        named.interior.clone(),
        values,
    ))
}
