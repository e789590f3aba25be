//! Gauss equations of integral submanifolds — induced metric, normal frames,
//! Tzitzeica connection, fundamental forms — and the first-order jet-bundle
//! lift with its potential-map residual.
//!
//! Jet coordinates are ordered alpha-major: 𝔵^{(i,0)} = x^i first, then the
//! derivative blocks 𝔵^{(i,α)} = x^i_α; slot of (i, α) is α·n + i.

use nalgebra::DMatrix;

use crate::elresidual::ResidualReport;
use crate::error::Error;
use crate::exprdsl::{ScalarExpr, VarSet};
use crate::geomcore::{
    christoffel_second, DistTensor, GridPartials, MapGrid, MetricField,
    MetricKind, Provenance, TabulatedMetric, Tensor3, TensorShape,
};
use crate::Result;

/// Jet-block dimension (m+1)·n.
pub fn jet_dim(n: usize, m: usize) -> usize {
    (m + 1) * n
}

/// Slot of 𝔵^{(i,α)} inside a jet point, α = 0..m.
pub fn jet_slot(n: usize, i: usize, alpha: usize) -> usize {
    alpha * n + i
}

/// Orthonormal family of vectors normal to the mapped sheet at every node:
/// g(N_a, N_b) = δ_ab and g(N_a, x_β) = 0.
#[derive(Debug, Clone)]
pub struct NormalFrame {
    pub n: usize,
    pub m: usize,
    vectors: Vec<f64>, // [node * (n-m) * n + a * n + i]
}

impl NormalFrame {
    pub fn count(&self) -> usize {
        self.n - self.m
    }

    pub fn normal(&self, node: usize, a: usize) -> &[f64] {
        let base = node * self.count() * self.n + a * self.n;
        &self.vectors[base..base + self.n]
    }
}

fn g_dot(gm: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += gm[(i, j)] * u[i] * v[j];
        }
    }
    s
}

/// Gram-Schmidt frame completion at one point: orthonormalize the tangents,
/// then greedily extend with coordinate basis vectors (largest g-norm after
/// projection wins; ties break on the lower index), re-orthogonalizing every
/// accepted vector. Signs are fixed by making the first nonzero component
/// positive.
fn complete_frame_at(
    gm: &DMatrix<f64>,
    tangents: &[Vec<f64>],
    n: usize,
) -> Option<Vec<Vec<f64>>> {
    let m = tangents.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    for u in tangents {
        let mut v = u.clone();
        for _ in 0..2 {
            for q in &basis {
                let d = g_dot(gm, &v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= d * qi;
                }
            }
        }
        let norm = g_dot(gm, &v, &v).sqrt();
        if !(norm > 1e-10) {
            return None; // rank-deficient tangent set
        }
        for vi in &mut v {
            *vi /= norm;
        }
        basis.push(v);
    }

    let mut normals: Vec<Vec<f64>> = Vec::with_capacity(n - m);
    while basis.len() < n {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..n {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            for q in &basis {
                let d = g_dot(gm, &v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= d * qi;
                }
            }
            let norm2 = g_dot(gm, &v, &v);
            if best.as_ref().map_or(true, |(bn, _)| norm2 > *bn) {
                best = Some((norm2, v));
            }
        }
        let (norm2, mut v) = best?;
        if !(norm2 > 1e-12) {
            return None;
        }
        // re-orthogonalize to keep the frame tight at rounding level
        for _ in 0..2 {
            for q in &basis {
                let d = g_dot(gm, &v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= d * qi;
                }
            }
        }
        let norm = g_dot(gm, &v, &v).sqrt();
        for vi in &mut v {
            *vi /= norm;
        }
        if let Some(first) = v.iter().find(|a| a.abs() > 1e-10) {
            if *first < 0.0 {
                for vi in &mut v {
                    *vi = -*vi;
                }
            }
        }
        basis.push(v.clone());
        normals.push(v);
    }
    Some(normals)
}

/// Construct the normal frame at every node from the given partials source.
pub fn normal_frame(
    x: &MapGrid,
    g: &MetricField,
    parts: &GridPartials,
) -> Result<NormalFrame> {
    let (n, m) = (x.n, x.spec.m());
    if n < m {
        return Err(Error::Dimension(format!(
            "map into {n} components cannot immerse a {m}-dimensional domain"
        )));
    }
    let mut vectors = vec![0.0; x.spec.node_count() * (n - m) * n];
    for node in 0..x.spec.node_count() {
        let gm = g.eval_at(x.values_at(node))?;
        let tangents: Vec<Vec<f64>> = (0..m)
            .map(|a| (0..n).map(|i| parts.first(node, i, a)).collect())
            .collect();
        let normals = complete_frame_at(&gm, &tangents, n).ok_or(Error::RankDeficient {
            node: x.spec.multi_index(node),
        })?;
        for (a, v) in normals.iter().enumerate() {
            let base = node * (n - m) * n + a * n;
            vectors[base..base + n].copy_from_slice(v);
        }
    }
    Ok(NormalFrame { n, m, vectors })
}

/// Induced metric η_{αβ} = g_{ij} x^i_α x^j_β tabulated per node, checked
/// positive definite (immersion).
pub fn induced_metric(
    x: &MapGrid,
    g: &MetricField,
    parts: &GridPartials,
) -> Result<TabulatedMetric> {
    let (n, m) = (x.n, x.spec.m());
    let mut values = Vec::with_capacity(x.spec.node_count() * m * m);
    for node in 0..x.spec.node_count() {
        let gm = g.eval_at(x.values_at(node))?;
        let mut eta = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += gm[(i, j)] * parts.first(node, i, a) * parts.first(node, j, b);
                    }
                }
                eta[(a, b)] = s;
            }
        }
        if nalgebra::Cholesky::new(eta.clone()).is_none() {
            return Err(Error::RankDeficient {
                node: x.spec.multi_index(node),
            });
        }
        for a in 0..m {
            for b in 0..m {
                values.push(eta[(a, b)]);
            }
        }
    }
    TabulatedMetric::new(x.spec.clone(), m, values)
}

/// Symbolic induced metric over the t-variables, available when the map is
/// analytic: g entries composed with the map expressions.
pub fn induced_metric_symbolic(x: &MapGrid, g: &MetricField) -> Result<Option<MetricField>> {
    let Some(exprs) = x.exprs() else {
        return Ok(None);
    };
    let (n, m) = (x.n, x.spec.m());
    let d1: Vec<ScalarExpr> = exprs
        .iter()
        .flat_map(|e| (0..m).map(move |a| e.diff(a)))
        .collect();
    let mut upper = Vec::with_capacity(m * (m + 1) / 2);
    for a in 0..m {
        for b in a..m {
            let mut sum = ScalarExpr::zero();
            for i in 0..n {
                for j in 0..n {
                    let gij = g.entry(i, j).substitute(exprs);
                    sum = crate::exprdsl::add(
                        sum,
                        crate::exprdsl::mul(
                            gij,
                            crate::exprdsl::mul(d1[i * m + a].clone(), d1[j * m + b].clone()),
                        ),
                    );
                }
            }
            upper.push(sum);
        }
    }
    Ok(Some(MetricField::from_upper(
        m,
        MetricKind::Riemannian,
        VarSet::t_vars(m),
        upper,
    )?))
}

/// Tzitzeica connection from the tensor field: Λ^γ_{αβ} = h^{γσ} g_{ik}
/// X^k_σ [∂X^i_α/∂x^j X^j_β + ∂X^i_α/∂t^β] with h the induced metric of X.
/// Returned table: `get(γ, α, β)`.
pub fn tzitzeica_connection(
    x_field: &DistTensor,
    g: &MetricField,
    t: &[f64],
    x: &[f64],
) -> Result<Tensor3> {
    if x_field.shape() != TensorShape::Mixed {
        return Err(Error::ShapeMismatch("X must be mixed-shaped".into()));
    }
    let n = x_field.rows();
    let m = x_field.cols();
    let p = x_field.point(t, x);
    let xv = x_field.eval_at(t, x)?;
    let gm = g.eval_at(x)?;

    // bracket B^i_{αβ} = ∂X^i_α/∂x^j X^j_β + ∂X^i_α/∂t^β
    let mut bracket = vec![0.0; n * m * m];
    for i in 0..n {
        for a in 0..m {
            for b in 0..m {
                let mut v = x_field
                    .entry(i, a)
                    .diff(x_field.t_var(b).unwrap())
                    .eval(&p)?;
                for j in 0..n {
                    v += x_field
                        .entry(i, a)
                        .diff(x_field.x_var(j).unwrap())
                        .eval(&p)?
                        * xv[(j, b)];
                }
                bracket[(i * m + a) * m + b] = v;
            }
        }
    }

    let mut eta = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += gm[(i, k)] * xv[(i, a)] * xv[(k, b)];
                }
            }
            eta[(a, b)] = s;
        }
    }
    let eta_inv = eta.lu().try_inverse().ok_or(Error::SingularMetric {
        point: t.to_vec(),
    })?;

    let mut out = Tensor3::zeros(m);
    for gamma in 0..m {
        for a in 0..m {
            for b in 0..m {
                let mut v = 0.0;
                for sigma in 0..m {
                    let mut proj = 0.0;
                    for i in 0..n {
                        for k in 0..n {
                            proj += gm[(i, k)] * xv[(k, sigma)] * bracket[(i * m + a) * m + b];
                        }
                    }
                    v += eta_inv[(gamma, sigma)] * proj;
                }
                out.set(gamma, a, b, v);
            }
        }
    }
    Ok(out)
}

/// Grid version of the Tzitzeica connection at one node: the bracket is the
/// second-derivative table of the map, projected tangentially through the
/// induced metric.
pub fn tzitzeica_from_grid(
    x: &MapGrid,
    g: &MetricField,
    parts: &GridPartials,
    node: usize,
) -> Result<Tensor3> {
    let (n, m) = (x.n, x.spec.m());
    let gm = g.eval_at(x.values_at(node))?;
    let mut eta = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += gm[(i, j)] * parts.first(node, i, a) * parts.first(node, j, b);
                }
            }
            eta[(a, b)] = s;
        }
    }
    let eta_inv = eta.lu().try_inverse().ok_or(Error::RankDeficient {
        node: x.spec.multi_index(node),
    })?;
    let mut out = Tensor3::zeros(m);
    for gamma in 0..m {
        for a in 0..m {
            for b in 0..m {
                let mut v = 0.0;
                for sigma in 0..m {
                    let mut proj = 0.0;
                    for i in 0..n {
                        for k in 0..n {
                            proj += gm[(i, k)]
                                * parts.first(node, k, sigma)
                                * parts.second(node, i, a, b);
                        }
                    }
                    v += eta_inv[(gamma, sigma)] * proj;
                }
                out.set(gamma, a, b, v);
            }
        }
    }
    Ok(out)
}

/// Fundamental forms per node: Λ^a_{αβ} = δ^{ab} g_{ij} B^i_{αβ} N^j_b with
/// B the second-derivative table from the partials source.
#[derive(Debug, Clone)]
pub struct FundamentalForms {
    pub count: usize,
    pub m: usize,
    values: Vec<f64>, // [node * count * m * m + (a * m + α) * m + β]
}

impl FundamentalForms {
    pub fn get(&self, node: usize, a: usize, alpha: usize, beta: usize) -> f64 {
        self.values[node * self.count * self.m * self.m + (a * self.m + alpha) * self.m + beta]
    }

    /// Maximum |Λ^a_{αβ} − Λ^a_{βα}| over nodes; nonzero asymmetry signals a
    /// non-integrable source.
    pub fn asymmetry_defect(&self, nodes: usize) -> f64 {
        let mut worst = 0.0f64;
        for node in 0..nodes {
            for a in 0..self.count {
                for alpha in 0..self.m {
                    for beta in 0..self.m {
                        worst = worst
                            .max((self.get(node, a, alpha, beta) - self.get(node, a, beta, alpha)).abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn fundamental_forms(
    x: &MapGrid,
    g: &MetricField,
    parts: &GridPartials,
    frame: &NormalFrame,
) -> Result<FundamentalForms> {
    let (n, m) = (x.n, x.spec.m());
    let count = frame.count();
    let mut values = vec![0.0; x.spec.node_count() * count * m * m];
    for node in 0..x.spec.node_count() {
        let gm = g.eval_at(x.values_at(node))?;
        for a in 0..count {
            let normal = frame.normal(node, a);
            for alpha in 0..m {
                for beta in 0..m {
                    let mut v = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            v += gm[(i, j)] * parts.second(node, i, alpha, beta) * normal[j];
                        }
                    }
                    values[node * count * m * m + (a * m + alpha) * m + beta] = v;
                }
            }
        }
    }
    Ok(FundamentalForms { count, m, values })
}

/// Residual of the Gauss equation ∂²x^i = Λ^γ_{αβ} x^i_γ + Λ^a_{αβ} N^i_a
/// per interior node, components flattened over (i, α ≤ β).
///
/// The tangential coefficients come from the Christoffel symbols of the
/// induced metric (symbolically when the map is analytic, grid-differenced
/// otherwise); the normal coefficients are frame projections of the
/// second-derivative table. With exact partials the two sides agree to
/// rounding; with finite differences the residual measures discretization
/// error and shrinks at O(h²).
pub fn gauss_residual(
    x: &MapGrid,
    g: &MetricField,
    parts: &GridPartials,
    frame: &NormalFrame,
) -> Result<ResidualReport> {
    let (n, m) = (x.n, x.spec.m());
    let forms = fundamental_forms(x, g, parts, frame)?;

    enum EtaRoute {
        Symbolic(crate::geomcore::ChristoffelSecond),
        Tabulated(Vec<Tensor3>),
    }
    let route = match induced_metric_symbolic(x, g)? {
        Some(eta) => EtaRoute::Symbolic(christoffel_second(&eta)?),
        None => EtaRoute::Tabulated(induced_metric(x, g, parts)?.christoffel_fd()?),
    };

    let interior = x.spec.interior_nodes();
    let comps = n * m * (m + 1) / 2;
    let mut values = vec![0.0; interior.len() * comps];
    for (k, &node) in interior.iter().enumerate() {
        let lambda_t = match &route {
            EtaRoute::Symbolic(christ) => christ.eval_at(&x.spec.coords(node))?,
            EtaRoute::Tabulated(per_node) => per_node[node].clone(),
        };
        let mut c = 0;
        for i in 0..n {
            for alpha in 0..m {
                for beta in alpha..m {
                    let mut v = parts.second(node, i, alpha, beta);
                    for gamma in 0..m {
                        v -= lambda_t.get(gamma, alpha, beta) * parts.first(node, i, gamma);
                    }
                    for a in 0..frame.count() {
                        v -= forms.get(node, a, alpha, beta) * frame.normal(node, a)[i];
                    }
                    values[k * comps + c] = v;
                    c += 1;
                }
            }
        }
    }
    Ok(ResidualReport::from_values(
        x.spec.clone(),
        comps,
        interior,
        values,
    ))
}

/// Jet lift of a map: the jet coordinates 𝔵^I(t) and the tabulated jet
/// tensor field X^I_μ, together with everything needed to re-evaluate the
/// field at perturbed jet points (the second-derivative table stays pinned
/// to the grid; base point, tangents and frame are rebuilt per evaluation).
#[derive(Debug)]
pub struct JetLift {
    pub jet_map: MapGrid,
    pub n: usize,
    pub m: usize,
    g: MetricField,
    field: Vec<f64>,  // [node * jd * m + i_jet * m + mu] = X^I_μ
    second: Vec<f64>, // [node * n * m * m + (i * m + mu) * m + alpha] = B^i_{μα}
}

impl JetLift {
    pub fn field_value(&self, node: usize, jet_index: usize, mu: usize) -> f64 {
        let jd = jet_dim(self.n, self.m);
        self.field[(node * jd + jet_index) * self.m + mu]
    }

    fn bracket(&self, node: usize, i: usize, mu: usize, alpha: usize) -> f64 {
        self.second[node * self.n * self.m * self.m + (i * self.m + mu) * self.m + alpha]
    }

    /// Evaluate the jet tensor field at an arbitrary jet point over the
    /// given node: X^{(i,0)}_μ reads the jet coordinates directly;
    /// X^{(i,α)}_μ re-runs the tangential/normal decomposition of the pinned
    /// second-derivative table through the perturbed base point and tangents.
    pub fn field_at(&self, node: usize, xi: &[f64], out: &mut [f64]) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let jd = jet_dim(n, m);
        debug_assert_eq!(xi.len(), jd);
        debug_assert_eq!(out.len(), jd * m);

        let base = &xi[0..n];
        let gm = self.g.eval_at(base)?;
        let tangents: Vec<Vec<f64>> = (1..=m)
            .map(|gamma| xi[gamma * n..(gamma + 1) * n].to_vec())
            .collect();

        for i in 0..n {
            for mu in 0..m {
                out[jet_slot(n, i, 0) * m + mu] = xi[jet_slot(n, i, mu + 1)];
            }
        }

        let mut eta = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                eta[(a, b)] = g_dot(&gm, &tangents[a], &tangents[b]);
            }
        }
        let eta_inv = eta.lu().try_inverse().ok_or(Error::RankDeficient {
            node: self.jet_map.spec.multi_index(node),
        })?;
        let normals = complete_frame_at(&gm, &tangents, n).ok_or(Error::RankDeficient {
            node: self.jet_map.spec.multi_index(node),
        })?;

        for alpha in 0..m {
            for mu in 0..m {
                // tangential and normal coefficients of B_{μα}
                let bracket: Vec<f64> = (0..n).map(|i| self.bracket(node, i, mu, alpha)).collect();
                let mut lambda_t = vec![0.0; m];
                for gamma in 0..m {
                    let mut v = 0.0;
                    for sigma in 0..m {
                        v += eta_inv[(gamma, sigma)] * g_dot(&gm, &tangents[sigma], &bracket);
                    }
                    lambda_t[gamma] = v;
                }
                let lambda_n: Vec<f64> = normals
                    .iter()
                    .map(|nv| g_dot(&gm, nv, &bracket))
                    .collect();
                for i in 0..n {
                    let mut v = 0.0;
                    for gamma in 0..m {
                        v += lambda_t[gamma] * tangents[gamma][i];
                    }
                    for (a, nv) in normals.iter().enumerate() {
                        v += lambda_n[a] * nv[i];
                    }
                    out[jet_slot(n, i, alpha + 1) * m + mu] = v;
                }
            }
        }
        Ok(())
    }

    /// Residual of the first-order jet system ∂𝔵^I/∂t^μ − X^I_μ, components
    /// flattened over (I, μ). The jet coordinates are derived data, so their
    /// grid derivative uses interior-only stencils.
    pub fn first_order_residual(&self) -> Result<ResidualReport> {
        let jd = jet_dim(self.n, self.m);
        let m = self.m;
        let jet_parts = crate::geomcore::interior_partials(&self.jet_map);
        let interior = self.jet_map.spec.interior_nodes();
        let comps = jd * m;
        let mut values = vec![0.0; interior.len() * comps];
        for (k, &node) in interior.iter().enumerate() {
            for idx in 0..jd {
                for mu in 0..m {
                    values[k * comps + idx * m + mu] =
                        jet_parts.first(node, idx, mu) - self.field_value(node, idx, mu);
                }
            }
        }
        Ok(ResidualReport::from_values(
            self.jet_map.spec.clone(),
            comps,
            interior,
            values,
        ))
    }
}

/// Build the jet lift from a map, an ambient metric, a frame, and a partials
/// source.
pub fn jet_lift(
    x: &MapGrid,
    g: &MetricField,
    parts: &GridPartials,
    frame: &NormalFrame,
) -> Result<JetLift> {
    let (n, m) = (x.n, x.spec.m());
    let jd = jet_dim(n, m);
    let nodes = x.spec.node_count();

    let mut jet_values = Vec::with_capacity(nodes * jd);
    for node in 0..nodes {
        for i in 0..n {
            jet_values.push(x.value(node, i));
        }
        for alpha in 0..m {
            for i in 0..n {
                jet_values.push(parts.first(node, i, alpha));
            }
        }
    }
    let jet_map = MapGrid::from_values(x.spec.clone(), jd, jet_values, Provenance::UserSupplied)?;

    let mut second = vec![0.0; nodes * n * m * m];
    for node in 0..nodes {
        for i in 0..n {
            for mu in 0..m {
                for alpha in 0..m {
                    second[node * n * m * m + (i * m + mu) * m + alpha] =
                        parts.second(node, i, mu, alpha);
                }
            }
        }
    }

    let forms = fundamental_forms(x, g, parts, frame)?;
    let mut field = vec![0.0; nodes * jd * m];
    for node in 0..nodes {
        let lambda_t = tzitzeica_from_grid(x, g, parts, node)?;
        for mu in 0..m {
            for i in 0..n {
                field[(node * jd + jet_slot(n, i, 0)) * m + mu] = parts.first(node, i, mu);
            }
            for alpha in 0..m {
                for i in 0..n {
                    let mut v = 0.0;
                    for gamma in 0..m {
                        v += lambda_t.get(gamma, mu, alpha) * parts.first(node, i, gamma);
                    }
                    for a in 0..frame.count() {
                        v += forms.get(node, a, mu, alpha) * frame.normal(node, a)[i];
                    }
                    field[(node * jd + jet_slot(n, i, alpha + 1)) * m + mu] = v;
                }
            }
        }
    }

    Ok(JetLift {
        jet_map,
        n,
        m,
        g: g.clone(),
        field,
        second,
    })
}

/// Euler-Lagrange residual of the lifted least-squares Lagrangian on the jet
/// bundle:
/// h^{μν}𝔵^I_{μν} − γ^{IL}h^{μν}γ_{KJ}(∇_L X^K_μ)X^J_ν − h^{μν}F_J{}^I{}_μ 𝔵^J_ν
/// − h^{μν}D_ν X^I_μ, with 𝔵^I_{μν} the γ-covariant second form and
/// ∇_L X^K_μ = ∂X^K_μ/∂𝔵^L + Γ^K_{LS}X^S_μ (the 𝔵-derivative is a central
/// difference of the re-evaluated field, step 1e-4 scaled).
///
/// D carries the full covariant t-derivative
/// D_ν X^I_μ = ∂X^I_μ/∂t^ν − H^γ_{μν}X^I_γ: the derivative-block components
/// of the jet field depend on t explicitly through the pinned
/// second-derivative table, and without the ∂t term the residual of an exact
/// lift stalls at the size of the third derivatives instead of vanishing.
pub fn jet_potential_residual(
    lift: &JetLift,
    h: &MetricField,
    gamma: &MetricField,
) -> Result<ResidualReport> {
    let (n, m) = (lift.n, lift.m);
    let jd = jet_dim(n, m);
    if gamma.dim() != jd {
        return Err(Error::Dimension(format!(
            "jet metric has dim {}, jet block has dim {jd}",
            gamma.dim()
        )));
    }
    let jet_parts = crate::geomcore::interior_partials(&lift.jet_map);
    let christ_h = christoffel_second(h)?;
    let christ_gamma = christoffel_second(gamma)?;

    // explicit t-variation of the pinned bracket table, interior stencils
    let db_dt: Vec<Vec<f64>> = (0..m)
        .map(|nu| {
            crate::geomcore::axis_first_derivative_interior(
                &lift.jet_map.spec,
                &lift.second,
                n * m * m,
                nu,
            )
        })
        .collect();

    let interior = lift.jet_map.spec.interior_nodes();
    let mut values = vec![0.0; interior.len() * jd];

    let mut xi_lo = vec![0.0; jd];
    let mut xi_hi = vec![0.0; jd];
    let mut f_lo = vec![0.0; jd * m];
    let mut f_hi = vec![0.0; jd * m];
    let mut nabla = vec![0.0; jd * jd * m]; // [(l*jd + k)*m + mu] = ∇_L X^K_μ

    for (knode, &node) in interior.iter().enumerate() {
        let t = lift.jet_map.spec.coords(node);
        let xi = lift.jet_map.values_at(node);
        let hinv = h.inverse_at(&t)?;
        let hh = christ_h.eval_at(&t)?;
        let gm = gamma.eval_at(xi)?;
        let ginv = gamma.inverse_at(xi)?;
        let gg = christ_gamma.eval_at(xi)?;

        // ∂X^K_μ/∂𝔵^L by differencing the re-evaluated field
        for l in 0..jd {
            let step = 1e-4 * (1.0 + xi[l].abs());
            xi_hi.copy_from_slice(xi);
            xi_lo.copy_from_slice(xi);
            xi_hi[l] += step;
            xi_lo[l] -= step;
            lift.field_at(node, &xi_hi, &mut f_hi)?;
            lift.field_at(node, &xi_lo, &mut f_lo)?;
            for k in 0..jd {
                for mu in 0..m {
                    nabla[(l * jd + k) * m + mu] =
                        (f_hi[k * m + mu] - f_lo[k * m + mu]) / (2.0 * step);
                }
            }
        }
        // + Γ^K_{LS} X^S_μ
        for l in 0..jd {
            for k in 0..jd {
                for mu in 0..m {
                    let mut v = 0.0;
                    for s in 0..jd {
                        v += gg.get(k, l, s) * lift.field_value(node, s, mu);
                    }
                    nabla[(l * jd + k) * m + mu] += v;
                }
            }
        }

        for i_jet in 0..jd {
            let mut res = 0.0;
            for mu in 0..m {
                for nu in 0..m {
                    let hmn = hinv[(mu, nu)];
                    if hmn == 0.0 {
                        continue;
                    }
                    // γ-covariant second form of the lift
                    let mut cov = jet_parts.second(node, i_jet, mu, nu);
                    for gma in 0..m {
                        cov -= hh.get(gma, mu, nu) * jet_parts.first(node, i_jet, gma);
                    }
                    for j in 0..jd {
                        for k in 0..jd {
                            cov += gg.get(i_jet, j, k)
                                * jet_parts.first(node, j, mu)
                                * jet_parts.first(node, k, nu);
                        }
                    }
                    res += hmn * cov;

                    // γ^{IL} γ_{KJ} (∇_L X^K_μ) X^J_ν
                    let mut source = 0.0;
                    for l in 0..jd {
                        let gil = ginv[(i_jet, l)];
                        if gil == 0.0 {
                            continue;
                        }
                        for k in 0..jd {
                            for j in 0..jd {
                                source += gil
                                    * gm[(k, j)]
                                    * nabla[(l * jd + k) * m + mu]
                                    * lift.field_value(node, j, nu);
                            }
                        }
                    }
                    res -= hmn * source;

                    // F_J{}^I{}_μ 𝔵^J_ν with F = ∇_J X^I_μ − γ^{IL}γ_{KJ}∇_L X^K_μ
                    let mut skew = 0.0;
                    for j in 0..jd {
                        let mut f_ji = nabla[(j * jd + i_jet) * m + mu];
                        for l in 0..jd {
                            let gil = ginv[(i_jet, l)];
                            if gil == 0.0 {
                                continue;
                            }
                            for k in 0..jd {
                                f_ji -= gil * gm[(k, j)] * nabla[(l * jd + k) * m + mu];
                            }
                        }
                        skew += f_ji * jet_parts.first(node, j, nu);
                    }
                    res -= hmn * skew;

                    // D_ν X^I_μ = ∂X^I_μ/∂t^ν − H^γ_{μν} X^I_γ; the explicit
                    // t-derivative only touches the derivative-block
                    // components, through the bracket table
                    let mut dcov = 0.0;
                    let (alpha_i, base_i) = (i_jet / n, i_jet % n);
                    if alpha_i >= 1 {
                        dcov += db_dt[nu]
                            [node * n * m * m + (base_i * m + mu) * m + (alpha_i - 1)];
                    }
                    for gma in 0..m {
                        dcov -= hh.get(gma, mu, nu) * lift.field_value(node, i_jet, gma);
                    }
                    res -= hmn * dcov;
                }
            }
            values[knode * jd + i_jet] = res;
        }
    }

    Ok(ResidualReport::from_values(
        lift.jet_map.spec.clone(),
        jd,
        interior,
        values,
    ))
}

/// Connection coefficients Λ^{0σ}_{αβ}(t) given as expressions over the
/// t-variables; used by the Ricci-compatibility checker.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    pub m: usize,
    entries: Vec<ScalarExpr>, // [(sigma * m + alpha) * m + beta]
}

impl ConnectionField {
    pub fn new(m: usize, entries: Vec<ScalarExpr>) -> Result<Self> {
        if entries.len() != m * m * m {
            return Err(Error::Dimension(format!(
                "connection needs {} entries, got {}",
                m * m * m,
                entries.len()
            )));
        }
        Ok(ConnectionField { m, entries })
    }

    pub fn zero(m: usize) -> Self {
        ConnectionField {
            m,
            entries: vec![ScalarExpr::zero(); m * m * m],
        }
    }

    pub fn entry(&self, sigma: usize, alpha: usize, beta: usize) -> &ScalarExpr {
        &self.entries[(sigma * self.m + alpha) * self.m + beta]
    }

    pub fn eval_at(&self, t: &[f64]) -> Result<Tensor3> {
        let mut out = Tensor3::zeros(self.m);
        for s in 0..self.m {
            for a in 0..self.m {
                for b in 0..self.m {
                    out.set(s, a, b, self.entry(s, a, b).eval(t)?);
                }
            }
        }
        Ok(out)
    }
}

/// Max violation of the Ricci compatibility system
/// ∂h⁰_{αβ}/∂t^γ = h⁰_{ασ}Λ^{0σ}_{βγ} + h⁰_{βσ}Λ^{0σ}_{αγ} over t-samples.
/// Checker only; h⁰ and Λ⁰ are user-supplied.
pub fn verify_h0_ricci(
    h0: &MetricField,
    lambda0: &ConnectionField,
    samples: &[Vec<f64>],
) -> Result<f64> {
    let m = h0.dim();
    if lambda0.m != m {
        return Err(Error::Dimension(format!(
            "connection dim {} vs metric dim {m}",
            lambda0.m
        )));
    }
    let mut worst = 0.0f64;
    for t in samples {
        let hm = h0.eval_at(t)?;
        let lam = lambda0.eval_at(t)?;
        for a in 0..m {
            for b in 0..m {
                for gm_ in 0..m {
                    let lhs = h0.entry(a, b).diff(gm_).eval(t)?;
                    let mut rhs = 0.0;
                    for s in 0..m {
                        rhs += hm[(a, s)] * lam.get(s, b, gm_) + hm[(b, s)] * lam.get(s, a, gm_);
                    }
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Defect of the purely-tangential second-derivative display
/// ∂²x^i/∂t^α∂t^β = Λ^{0γ}_{αβ} x^i_γ for a user-supplied Λ⁰: zero only in
/// totally-geodesic-like situations, reported rather than assumed.
pub fn lambda0_tangency_defect(
    x: &MapGrid,
    parts: &GridPartials,
    lambda0: &ConnectionField,
) -> Result<f64> {
    let (n, m) = (x.n, x.spec.m());
    let mut worst = 0.0f64;
    for node in x.spec.interior_nodes() {
        let t = x.spec.coords(node);
        let lam = lambda0.eval_at(&t)?;
        for i in 0..n {
            for a in 0..m {
                for b in 0..m {
                    let mut v = parts.second(node, i, a, b);
                    for gm_ in 0..m {
                        v -= lam.get(gm_, a, b) * parts.first(node, i, gm_);
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
