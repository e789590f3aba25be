//! Energy densities and Lagrangians, evaluated at grid nodes, plus total
//! energies by iterated trapezoidal quadrature.
//!
//! Every density has a pointwise evaluator taking (t, x, x_α); the grid
//! versions loop over nodes. The pointwise evaluators are what the generic
//! Euler-Lagrange operator perturbs, so they must stay pure functions of
//! their arguments.

use crate::error::Error;
use crate::exprdsl::ScalarExpr;
use crate::geomcore::{DistTensor, GridPartials, MapGrid, MetricField, TensorShape};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    EnergyF,
    EnergyDeviated,
    EnergyGeneral,
    LeastSquares,
    L5,
    L6,
    L7,
    L8,
    L9,
}

/// Nodewise density values; with `includes_volume` the values already carry
/// the √|h| factor.
#[derive(Debug, Clone)]
pub struct DensityField {
    pub kind: DensityKind,
    pub includes_volume: bool,
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean_abs(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
        }
    }
}

/// Scalar source term c(t, x): either a parsed expression over (t, x) or the
/// perfect-square completion ½ h^{αβ} g_{ij} X^i_α X^j_β, which has no closed
/// expression form because h is inverted numerically.
#[derive(Debug, Clone)]
pub enum CScalar {
    Expr(ScalarExpr),
    PerfectSquare {
        h: MetricField,
        g: MetricField,
        x_field: DistTensor,
    },
}

impl CScalar {
    pub fn zero() -> Self {
        CScalar::Expr(ScalarExpr::zero())
    }

    pub fn eval(&self, t: &[f64], x: &[f64]) -> Result<f64> {
        match self {
            CScalar::Expr(e) => {
                let mut p = Vec::with_capacity(t.len() + x.len());
                p.extend_from_slice(t);
                p.extend_from_slice(x);
                Ok(e.eval(&p)?)
            }
            CScalar::PerfectSquare { h, g, x_field } => {
                let hinv = h.inverse_at(t)?;
                let gm = g.eval_at(x)?;
                let xv = x_field.eval_at(t, x)?;
                let (m, n) = (h.dim(), g.dim());
                let mut c = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        for i in 0..n {
                            for j in 0..n {
                                c += 0.5 * hinv[(a, b)] * gm[(i, j)] * xv[(i, a)] * xv[(j, b)];
                            }
                        }
                    }
                }
                Ok(c)
            }
        }
    }

    /// Exact gradient ∂c/∂x^k. For the perfect square this expands to
    /// ½ h^{αβ} [∂_k g_{ij} X^i_α X^j_β + 2 g_{ij} ∂_k X^i_α X^j_β].
    pub fn grad_x(&self, t: &[f64], x: &[f64], m: usize, n: usize) -> Result<Vec<f64>> {
        match self {
            CScalar::Expr(e) => {
                let mut p = Vec::with_capacity(t.len() + x.len());
                p.extend_from_slice(t);
                p.extend_from_slice(x);
                (0..n).map(|k| Ok(e.diff(m + k).eval(&p)?)).collect()
            }
            CScalar::PerfectSquare { h, g, x_field } => {
                let hinv = h.inverse_at(t)?;
                let gm = g.eval_at(x)?;
                let xv = x_field.eval_at(t, x)?;
                let p = x_field.point(t, x);
                let mut out = vec![0.0; n];
                for k in 0..n {
                    let xk = x_field
                        .x_var(k)
                        .ok_or_else(|| Error::ShapeMismatch("X must be mixed-shaped".into()))?;
                    let mut v = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            for i in 0..n {
                                for j in 0..n {
                                    v += 0.5
                                        * hinv[(a, b)]
                                        * g.entry(i, j).diff(k).eval(x)?
                                        * xv[(i, a)]
                                        * xv[(j, b)];
                                    v += hinv[(a, b)]
                                        * gm[(i, j)]
                                        * x_field.entry(i, a).diff(xk).eval(&p)?
                                        * xv[(j, b)];
                                }
                            }
                        }
                    }
                    out[k] = v;
                }
                Ok(out)
            }
        }
    }
}

/// The perfect-square completion that turns the general energy density into
/// ½ h^{αβ} g_{ij}(x^i_α − X^i_α)(x^j_β − X^j_β).
pub fn perfect_square_c(h: &MetricField, g: &MetricField, x_field: &DistTensor) -> CScalar {
    CScalar::PerfectSquare {
        h: h.clone(),
        g: g.clone(),
        x_field: x_field.clone(),
    }
}

fn quad_form(
    hinv: &nalgebra::DMatrix<f64>,
    metric: &nalgebra::DMatrix<f64>,
    u: &dyn Fn(usize, usize) -> f64,
    v: &dyn Fn(usize, usize) -> f64,
) -> f64 {
    let m = hinv.nrows();
    let n = metric.nrows();
    let mut s = 0.0;
    for a in 0..m {
        for b in 0..m {
            let hab = hinv[(a, b)];
            if hab == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    s += hab * metric[(i, j)] * u(i, a) * v(j, b);
                }
            }
        }
    }
    s
}

/// Pointwise f-energy density ½ h^{αβ} f_{ij} x^i_α x^j_β.
pub fn energy_f_at(
    h: &MetricField,
    f: &MetricField,
    t: &[f64],
    x: &[f64],
    dx: &[f64], // n*m, [i*m + a]
) -> Result<f64> {
    let m = h.dim();
    let hinv = h.inverse_at(t)?;
    let fm = f.eval_at(x)?;
    Ok(0.5 * quad_form(&hinv, &fm, &|i, a| dx[i * m + a], &|j, b| dx[j * m + b]))
}

/// Pointwise deviated f-energy density: E_f plus
/// ½ h^{αβ} g_{ij}(x^i_α − T^i_α)(x^j_β − T^j_β).
pub fn energy_deviated_at(
    h: &MetricField,
    g: &MetricField,
    f: &MetricField,
    t_field: &DistTensor,
    t: &[f64],
    x: &[f64],
    dx: &[f64],
) -> Result<f64> {
    if t_field.shape() != TensorShape::Sheet {
        return Err(Error::ShapeMismatch("T must be sheet-shaped".into()));
    }
    let m = h.dim();
    let hinv = h.inverse_at(t)?;
    let gm = g.eval_at(x)?;
    let tv = t_field.eval_at(t, x)?;
    let dev = |i: usize, a: usize| dx[i * m + a] - tv[(i, a)];
    Ok(energy_f_at(h, f, t, x, dx)? + 0.5 * quad_form(&hinv, &gm, &dev, &dev))
}

/// Pointwise general energy density
/// ½ h^{αβ} g_{ij} x^i_α x^j_β − h^{αβ} g_{ij} x^i_α X^j_β + c(t, x).
pub fn energy_general_at(
    h: &MetricField,
    g: &MetricField,
    x_field: &DistTensor,
    c: &CScalar,
    t: &[f64],
    x: &[f64],
    dx: &[f64],
) -> Result<f64> {
    if x_field.shape() != TensorShape::Mixed {
        return Err(Error::ShapeMismatch("X must be mixed-shaped".into()));
    }
    let m = h.dim();
    let hinv = h.inverse_at(t)?;
    let gm = g.eval_at(x)?;
    let xv = x_field.eval_at(t, x)?;
    let kinetic = 0.5 * quad_form(&hinv, &gm, &|i, a| dx[i * m + a], &|j, b| dx[j * m + b]);
    let cross = quad_form(&hinv, &gm, &|i, a| dx[i * m + a], &|j, b| xv[(j, b)]);
    Ok(kinetic - cross + c.eval(t, x)?)
}

/// Pointwise least-squares density ½ h^{αβ} metric_{IJ}(x^I_α − X^I_α)(x^J_β − X^J_β).
/// Serves the least-squares Lagrangian on M and its jet-bundle analogue.
pub fn least_squares_at(
    h: &MetricField,
    target: &MetricField,
    x_field: &DistTensor,
    t: &[f64],
    x: &[f64],
    dx: &[f64],
) -> Result<f64> {
    let m = h.dim();
    let hinv = h.inverse_at(t)?;
    let gm = target.eval_at(x)?;
    let xv = x_field.eval_at(t, x)?;
    let dev = |i: usize, a: usize| dx[i * m + a] - xv[(i, a)];
    Ok(0.5 * quad_form(&hinv, &gm, &dev, &dev))
}

/// L5 energy part: h^{αβ}(g_{ij} x^i_α T^j_β − ½ g_{ij} T^i_α T^j_β).
/// Exposed for the L7 = L6 − L5 decomposition check; not a CLI density.
pub fn l5_at(
    h: &MetricField,
    g: &MetricField,
    t_field: &DistTensor,
    t: &[f64],
    x: &[f64],
    dx: &[f64],
) -> Result<f64> {
    let m = h.dim();
    let hinv = h.inverse_at(t)?;
    let gm = g.eval_at(x)?;
    let tv = t_field.eval_at(t, x)?;
    let cross = quad_form(&hinv, &gm, &|i, a| dx[i * m + a], &|j, b| tv[(j, b)]);
    let tt = quad_form(&hinv, &gm, &|i, a| tv[(i, a)], &|j, b| tv[(j, b)]);
    Ok(cross - 0.5 * tt)
}

/// ½(g_{is}Y^s_j + g_{js}Y^s_i) as a numeric matrix at x.
fn symmetrized_gy(
    g: &MetricField,
    y: &DistTensor,
    t: &[f64],
    x: &[f64],
) -> Result<nalgebra::DMatrix<f64>> {
    let gm = g.eval_at(x)?;
    let yv = y.eval_at(t, x)?;
    let gy = &gm * &yv;
    Ok(0.5 * (&gy + gy.transpose()))
}

/// L6 energy part: ¼ h^{αβ}(g_{is}Y^s_j + g_{js}Y^s_i) x^i_α x^j_β.
pub fn l6_at(
    h: &MetricField,
    g: &MetricField,
    y: &DistTensor,
    t: &[f64],
    x: &[f64],
    dx: &[f64],
) -> Result<f64> {
    let m = h.dim();
    let hinv = h.inverse_at(t)?;
    let sym = symmetrized_gy(g, y, t, x)?;
    Ok(0.5 * quad_form(&hinv, &sym, &|i, a| dx[i * m + a], &|j, b| dx[j * m + b]))
}

/// L7 energy part: ½ h^{αβ}[f_{ij} x^i_α x^j_β + g_{ij}(x^i_α − T^i_α)(x^j_β − T^j_β)].
pub fn l7_at(
    h: &MetricField,
    g: &MetricField,
    f: &MetricField,
    t_field: &DistTensor,
    t: &[f64],
    x: &[f64],
    dx: &[f64],
) -> Result<f64> {
    energy_deviated_at(h, g, f, t_field, t, x, dx)
}

/// L8 energy part with f_{ij} = g_{is}Y^s_j assembled internally:
/// ½ h^{αβ} f_{ij} x^i_α x^j_β.
pub fn l8_at(
    h: &MetricField,
    g: &MetricField,
    y: &DistTensor,
    t: &[f64],
    x: &[f64],
    dx: &[f64],
) -> Result<f64> {
    let m = h.dim();
    let hinv = h.inverse_at(t)?;
    let gm = g.eval_at(x)?;
    let yv = y.eval_at(t, x)?;
    let f = &gm * &yv;
    Ok(0.5 * quad_form(&hinv, &f, &|i, a| dx[i * m + a], &|j, b| dx[j * m + b]))
}

/// L9 energy part with f_{ij} = g_{is}Y^s_j + g_{js}Y^s_i, measured against a
/// user-supplied metric h0 on the parameter manifold.
pub fn l9_at(
    h0: &MetricField,
    g: &MetricField,
    y: &DistTensor,
    t: &[f64],
    x: &[f64],
    dx: &[f64],
) -> Result<f64> {
    let m = h0.dim();
    let hinv = h0.inverse_at(t)?;
    let sym = symmetrized_gy(g, y, t, x)?;
    // f = 2 * symmetrized(gY), so the ½ cancels
    Ok(quad_form(&hinv, &sym, &|i, a| dx[i * m + a], &|j, b| {
        dx[j * m + b]
    }))
}

fn grid_density<F>(
    x: &MapGrid,
    h: &MetricField,
    kind: DensityKind,
    with_volume: bool,
    f: F,
) -> Result<DensityField>
where
    F: Fn(&[f64], &[f64], &[f64]) -> Result<f64>,
{
    let parts = x.fd_partials()?;
    let (m, n) = (x.spec.m(), x.n);
    let mut values = Vec::with_capacity(x.spec.node_count());
    let mut dx = vec![0.0; n * m];
    for node in 0..x.spec.node_count() {
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        for i in 0..n {
            for a in 0..m {
                dx[i * m + a] = parts.first(node, i, a);
            }
        }
        let mut v = f(&t, xv, &dx)?;
        if with_volume {
            v *= h.sqrt_abs_det_at(&t)?;
        }
        values.push(v);
    }
    Ok(DensityField {
        kind,
        includes_volume: with_volume,
        values,
    })
}

pub fn energy_f(x: &MapGrid, h: &MetricField, f: &MetricField) -> Result<DensityField> {
    check_dims(x, h, Some(f), None)?;
    grid_density(x, h, DensityKind::EnergyF, false, |t, xv, dx| {
        energy_f_at(h, f, t, xv, dx)
    })
}

pub fn energy_deviated(
    x: &MapGrid,
    h: &MetricField,
    g: &MetricField,
    f: &MetricField,
    t_field: &DistTensor,
) -> Result<DensityField> {
    check_dims(x, h, Some(g), Some(t_field))?;
    grid_density(x, h, DensityKind::EnergyDeviated, false, |t, xv, dx| {
        energy_deviated_at(h, g, f, t_field, t, xv, dx)
    })
}

pub fn energy_general(
    x: &MapGrid,
    h: &MetricField,
    g: &MetricField,
    x_field: &DistTensor,
    c: &CScalar,
) -> Result<DensityField> {
    check_dims(x, h, Some(g), Some(x_field))?;
    grid_density(x, h, DensityKind::EnergyGeneral, false, |t, xv, dx| {
        energy_general_at(h, g, x_field, c, t, xv, dx)
    })
}

/// Least-squares Lagrangian density, volume factor included.
pub fn least_squares_density(
    x: &MapGrid,
    h: &MetricField,
    target: &MetricField,
    x_field: &DistTensor,
) -> Result<DensityField> {
    check_dims(x, h, Some(target), Some(x_field))?;
    grid_density(x, h, DensityKind::LeastSquares, true, |t, xv, dx| {
        least_squares_at(h, target, x_field, t, xv, dx)
    })
}

pub enum CompositeKind<'a> {
    L7 {
        g: &'a MetricField,
        f: &'a MetricField,
        t_field: &'a DistTensor,
    },
    L8 {
        g: &'a MetricField,
        y: &'a DistTensor,
    },
    L9 {
        g: &'a MetricField,
        y: &'a DistTensor,
    },
}

/// Composite theorem Lagrangians L7/L8/L9, volume factor included. For L9
/// the metric argument is h0.
pub fn composite_density(
    x: &MapGrid,
    h: &MetricField,
    kind: CompositeKind<'_>,
) -> Result<DensityField> {
    match kind {
        CompositeKind::L7 { g, f, t_field } => {
            check_dims(x, h, Some(g), Some(t_field))?;
            grid_density(x, h, DensityKind::L7, true, |t, xv, dx| {
                l7_at(h, g, f, t_field, t, xv, dx)
            })
        }
        CompositeKind::L8 { g, y } => {
            check_dims(x, h, Some(g), Some(y))?;
            grid_density(x, h, DensityKind::L8, true, |t, xv, dx| {
                l8_at(h, g, y, t, xv, dx)
            })
        }
        CompositeKind::L9 { g, y } => {
            check_dims(x, h, Some(g), Some(y))?;
            grid_density(x, h, DensityKind::L9, true, |t, xv, dx| {
                l9_at(h, g, y, t, xv, dx)
            })
        }
    }
}

fn check_dims(
    x: &MapGrid,
    h: &MetricField,
    target: Option<&MetricField>,
    tensor: Option<&DistTensor>,
) -> Result<()> {
    if h.dim() != x.spec.m() {
        return Err(Error::Dimension(format!(
            "metric h has dim {}, grid has dim {}",
            h.dim(),
            x.spec.m()
        )));
    }
    if let Some(g) = target {
        if g.dim() != x.n {
            return Err(Error::Dimension(format!(
                "target metric has dim {}, map has {} components",
                g.dim(),
                x.n
            )));
        }
    }
    if let Some(t) = tensor {
        if t.rows() != x.n {
            return Err(Error::ShapeMismatch(format!(
                "tensor has {} rows, map has {} components",
                t.rows(),
                x.n
            )));
        }
    }
    Ok(())
}

/// Iterated trapezoidal quadrature over the grid; matches the O(h^2)
/// accuracy of the difference stencils.
pub fn total_energy(d: &DensityField, spec: &crate::geomcore::GridSpec) -> f64 {
    let cell = spec.cell_volume();
    let mut total = 0.0;
    for (node, v) in d.values.iter().enumerate() {
        let mut w = 1.0;
        for a in 0..spec.m() {
            let q = spec.axis_position(node, a);
            if q == 0 || q + 1 == spec.points()[a] {
                w *= 0.5;
            }
        }
        total += w * v;
    }
    total * cell
}

/// Volume factor √|h| per node, for callers assembling densities manually.
pub fn volume_factors(spec: &crate::geomcore::GridSpec, h: &MetricField) -> Result<Vec<f64>> {
    (0..spec.node_count())
        .map(|node| h.sqrt_abs_det_at(&spec.coords(node)))
        .collect()
}

/// Gradient slice for one node in the [i*m + a] layout the density
/// evaluators expect.
pub fn gradient_at(parts: &GridPartials, node: usize) -> Vec<f64> {
    let (n, m) = (parts.n, parts.m);
    let mut dx = vec![0.0; n * m];
    for i in 0..n {
        for a in 0..m {
            dx[i * m + a] = parts.first(node, i, a);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprdsl::{parse_expr, VarSet};
    use crate::geomcore::{GridSpec, MetricKind};

    fn unit_square(points: usize) -> GridSpec {
        GridSpec::new(vec![(0.0, 1.0), (0.0, 1.0)], vec![points, points]).unwrap()
    }

    fn map2(spec: &GridSpec, srcs: &[&str]) -> MapGrid {
        let vars = VarSet::t_vars(spec.m());
        MapGrid::from_exprs(
            spec.clone(),
            srcs.iter().map(|s| parse_expr(s, &vars).unwrap()).collect(),
        )
        .unwrap()
    }

    fn zero_f(n: usize) -> MetricField {
        MetricField::diagonal(
            MetricKind::SymmetricDegenerate,
            VarSet::x_vars(n),
            vec![ScalarExpr::zero(); n],
        )
    }

    #[test]
    fn identity_map_kinetic_energy_is_half_n() {
        let spec = unit_square(9);
        let x = map2(&spec, &["t1", "t2"]);
        let h = MetricField::identity(2, VarSet::t_vars(2));
        let g = MetricField::identity(2, VarSet::x_vars(2));
        let d = energy_f(&x, &h, &g).unwrap();
        for v in &d.values {
            assert!((v - 1.0).abs() <= 1e-12);
        }
        // total over the unit square: n/2 * area = 1
        assert!((total_energy(&d, &spec) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_f_gives_zero_density() {
        let spec = unit_square(7);
        let x = map2(&spec, &["sin(t1)", "t2^2"]);
        let h = MetricField::identity(2, VarSet::t_vars(2));
        let d = energy_f(&x, &h, &zero_f(2)).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn stretched_map_energy() {
        let spec = unit_square(9);
        let x = map2(&spec, &["2*t1", "t2"]);
        let h = MetricField::identity(2, VarSet::t_vars(2));
        let g = MetricField::identity(2, VarSet::x_vars(2));
        let d = energy_f(&x, &h, &g).unwrap();
        for v in &d.values {
            assert!((v - 2.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn deviated_energy_vanishes_when_t_matches_gradient() {
        let spec = unit_square(9);
        let x = map2(&spec, &["3*t1 + t2", "t2"]);
        let h = MetricField::identity(2, VarSet::t_vars(2));
        let g = MetricField::identity(2, VarSet::x_vars(2));
        let tv = VarSet::t_vars(2);
        let t_field = DistTensor::sheet(
            2,
            2,
            vec![
                parse_expr("3", &tv).unwrap(),
                parse_expr("1", &tv).unwrap(),
                parse_expr("0", &tv).unwrap(),
                parse_expr("1", &tv).unwrap(),
            ],
        )
        .unwrap();
        let d = energy_deviated(&x, &h, &g, &zero_f(2), &t_field).unwrap();
        assert!(d.max_abs() <= 1e-24);
    }

    #[test]
    fn deviated_energy_reduces_and_hand_value() {
        // m = n = 1, x = t1, T = 2: density ½(1-2)² = 0.5
        let spec = GridSpec::new(vec![(0.0, 1.0)], vec![9]).unwrap();
        let vars = VarSet::t_vars(1);
        let x = MapGrid::from_exprs(spec.clone(), vec![parse_expr("t1", &vars).unwrap()]).unwrap();
        let h = MetricField::identity(1, VarSet::t_vars(1));
        let g = MetricField::identity(1, VarSet::x_vars(1));
        let t_field = DistTensor::sheet(1, 1, vec![ScalarExpr::num(2.0)]).unwrap();
        let d = energy_deviated(&x, &h, &g, &zero_f(1), &t_field).unwrap();
        for v in &d.values {
            assert!((v - 0.5).abs() <= 1e-13);
        }

        // T = 0 reduces to E_f + E_g
        let t0 = DistTensor::zero_sheet(1, 1);
        let d0 = energy_deviated(&x, &h, &g, &zero_f(1), &t0).unwrap();
        let eg = energy_f(&x, &h, &g).unwrap();
        for (a, b) in d0.values.iter().zip(&eg.values) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn general_energy_hand_value_and_perfect_square() {
        // m = n = 1, x = t1, X = x1, c = ½ x1²; at x1 = 0.5: ½ − 0.5 + 0.125
        let spec = GridSpec::new(vec![(0.0, 1.0)], vec![9]).unwrap();
        let tv = VarSet::t_vars(1);
        let x = MapGrid::from_exprs(spec.clone(), vec![parse_expr("t1", &tv).unwrap()]).unwrap();
        let h = MetricField::identity(1, VarSet::t_vars(1));
        let g = MetricField::identity(1, VarSet::x_vars(1));
        let xf = DistTensor::mixed(1, 1, vec![parse_expr("x1", &VarSet::tx_vars(1, 1)).unwrap()])
            .unwrap();
        let c = CScalar::Expr(parse_expr("0.5*x1^2", &VarSet::tx_vars(1, 1)).unwrap());
        let d = energy_general(&x, &h, &g, &xf, &c).unwrap();
        let node = spec.flat_index(&[4]); // t1 = 0.5, so x1 = 0.5
        assert!((d.values[node] - 0.125).abs() <= 1e-13);

        // the same c through the perfect-square constructor
        let cps = perfect_square_c(&h, &g, &xf);
        let d2 = energy_general(&x, &h, &g, &xf, &cps).unwrap();
        for (a, b) in d.values.iter().zip(&d2.values) {
            assert!((a - b).abs() <= 1e-14);
        }

        // X = 0, c = 0 reduces to the kinetic energy
        let x0 = DistTensor::zero_mixed(1, 1);
        let d0 = energy_general(&x, &h, &g, &x0, &CScalar::zero()).unwrap();
        let eg = energy_f(&x, &h, &g).unwrap();
        for (a, b) in d0.values.iter().zip(&eg.values) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn perfect_square_c_values() {
        let tx = VarSet::tx_vars(1, 1);
        let g = MetricField::identity(1, VarSet::x_vars(1));
        let xf = DistTensor::mixed(1, 1, vec![parse_expr("1", &tx).unwrap()]).unwrap();

        let x0 = DistTensor::zero_mixed(1, 1);
        let h = MetricField::identity(1, VarSet::t_vars(1));
        assert_eq!(
            perfect_square_c(&h, &g, &x0).eval(&[0.3], &[0.7]).unwrap(),
            0.0
        );

        assert!(
            (perfect_square_c(&h, &g, &xf).eval(&[0.3], &[0.7]).unwrap() - 0.5).abs() <= 1e-15
        );

        // h = δ/4 so h^{αβ} = 4δ: c = 2
        let h4 = MetricField::const_diagonal(VarSet::t_vars(1), &[0.25]);
        assert!(
            (perfect_square_c(&h4, &g, &xf).eval(&[0.3], &[0.7]).unwrap() - 2.0).abs() <= 1e-15
        );
    }

    #[test]
    fn completing_the_square_identity() {
        // E_{g,c,X} with c = perfect_square_c equals the least-squares density
        let spec = unit_square(7);
        let x = map2(&spec, &["sin(t1) + t2", "t1*t2"]);
        let h = MetricField::identity(2, VarSet::t_vars(2));
        let xvars = VarSet::x_vars(2);
        let g = MetricField::from_upper(
            2,
            MetricKind::Riemannian,
            xvars.clone(),
            vec![
                parse_expr("2 + 0.2*sin(x1)", &xvars).unwrap(),
                parse_expr("0.1*x2", &xvars).unwrap(),
                parse_expr("2 + 0.2*cos(x2)", &xvars).unwrap(),
            ],
        )
        .unwrap();
        let tx = VarSet::tx_vars(2, 2);
        let xf = DistTensor::mixed(
            2,
            2,
            vec![
                parse_expr("x2", &tx).unwrap(),
                parse_expr("t1", &tx).unwrap(),
                parse_expr("0.5*x1", &tx).unwrap(),
                parse_expr("t2", &tx).unwrap(),
            ],
        )
        .unwrap();
        let c = perfect_square_c(&h, &g, &xf);
        let general = energy_general(&x, &h, &g, &xf, &c).unwrap();
        // least_squares_density includes √|h| = 1 here
        let ls = least_squares_density(&x, &h, &g, &xf).unwrap();
        for (a, b) in general.values.iter().zip(&ls.values) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn least_squares_hand_value_and_x_zero_reduction() {
        let spec = GridSpec::new(vec![(0.0, 1.0)], vec![9]).unwrap();
        let tv = VarSet::t_vars(1);
        let x = MapGrid::from_exprs(spec.clone(), vec![parse_expr("t1", &tv).unwrap()]).unwrap();
        let h = MetricField::identity(1, VarSet::t_vars(1));
        let g = MetricField::identity(1, VarSet::x_vars(1));
        let xf = DistTensor::mixed(1, 1, vec![ScalarExpr::num(0.5)]).unwrap();
        let d = least_squares_density(&x, &h, &g, &xf).unwrap();
        for v in &d.values {
            assert!((v - 0.125).abs() <= 1e-13);
        }

        let x0 = DistTensor::zero_mixed(1, 1);
        let d0 = least_squares_density(&x, &h, &g, &x0).unwrap();
        let eg = energy_f(&x, &h, &g).unwrap();
        for (a, b) in d0.values.iter().zip(&eg.values) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn composite_densities_reduce_to_kinetic_energy() {
        let spec = unit_square(7);
        let x = map2(&spec, &["sin(t1)", "t1 + t2^2"]);
        let h = MetricField::identity(2, VarSet::t_vars(2));
        let g = MetricField::identity(2, VarSet::x_vars(2));
        let eg = energy_f(&x, &h, &g).unwrap();

        // L8 with Y = identity equals E_g (√|h| = 1)
        let y = DistTensor::identity_endo(2);
        let l8 = composite_density(&x, &h, CompositeKind::L8 { g: &g, y: &y }).unwrap();
        for (a, b) in l8.values.iter().zip(&eg.values) {
            assert!((a - b).abs() <= 1e-13);
        }

        // L9 with Y = identity equals twice E_g
        let l9 = composite_density(&x, &h, CompositeKind::L9 { g: &g, y: &y }).unwrap();
        for (a, b) in l9.values.iter().zip(&eg.values) {
            assert!((a - 2.0 * b).abs() <= 1e-13);
        }

        // L7 with f = 0, T = 0 equals E_g
        let f0 = zero_f(2);
        let t0 = DistTensor::zero_sheet(2, 2);
        let l7 = composite_density(
            &x,
            &h,
            CompositeKind::L7 {
                g: &g,
                f: &f0,
                t_field: &t0,
            },
        )
        .unwrap();
        for (a, b) in l7.values.iter().zip(&eg.values) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn l7_decomposes_as_l6_minus_l5() {
        // under conditions (flat g, Y symmetric constant, f = g(Y - I))
        let spec = unit_square(7);
        let x = map2(&spec, &["sin(t1)*cos(t2)", "t1 + 0.3*t2^2"]);
        let h = MetricField::identity(2, VarSet::t_vars(2));
        let g = MetricField::identity(2, VarSet::x_vars(2));
        let y = DistTensor::endo(
            2,
            vec![
                ScalarExpr::num(2.0),
                ScalarExpr::num(0.5),
                ScalarExpr::num(0.5),
                ScalarExpr::num(3.0),
            ],
        )
        .unwrap();
        let f = MetricField::from_upper(
            2,
            MetricKind::SymmetricDegenerate,
            VarSet::x_vars(2),
            vec![
                ScalarExpr::num(1.0),
                ScalarExpr::num(0.5),
                ScalarExpr::num(2.0),
            ],
        )
        .unwrap();
        let tv = VarSet::t_vars(2);
        let t_field = DistTensor::sheet(
            2,
            2,
            vec![
                parse_expr("sin(t1)", &tv).unwrap(),
                parse_expr("t2", &tv).unwrap(),
                parse_expr("1", &tv).unwrap(),
                parse_expr("t1*t2", &tv).unwrap(),
            ],
        )
        .unwrap();

        let parts = x.fd_partials().unwrap();
        for node in 0..x.spec.node_count() {
            let t = x.spec.coords(node);
            let xvals = x.values_at(node);
            let dx = gradient_at(&parts, node);
            let l7 = l7_at(&h, &g, &f, &t_field, &t, xvals, &dx).unwrap();
            let l6 = l6_at(&h, &g, &y, &t, xvals, &dx).unwrap();
            let l5 = l5_at(&h, &g, &t_field, &t, xvals, &dx).unwrap();
            assert!(
                (l7 - (l6 - l5)).abs() <= 1e-12,
                "node {node}: {l7} vs {}",
                l6 - l5
            );
        }
    }

    #[test]
    fn densities_nonnegative_for_psd_forms() {
        let spec = unit_square(9);
        let x = map2(&spec, &["sin(3*t1)", "cos(2*t2)"]);
        let h = MetricField::identity(2, VarSet::t_vars(2));
        let g = MetricField::identity(2, VarSet::x_vars(2));
        let eg = energy_f(&x, &h, &g).unwrap();
        assert!(eg.values.iter().all(|&v| v >= 0.0));
        let xf = DistTensor::mixed(
            2,
            2,
            vec![
                ScalarExpr::num(0.3),
                ScalarExpr::num(-0.2),
                ScalarExpr::num(0.1),
                ScalarExpr::num(0.4),
            ],
        )
        .unwrap();
        let l4 = least_squares_density(&x, &h, &g, &xf).unwrap();
        assert!(l4.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn trapezoid_integrates_sine_closed_form() {
        let spec = GridSpec::new(vec![(0.0, 1.0)], vec![65]).unwrap();
        let vars = VarSet::t_vars(1);
        let e = parse_expr("sin(pi*t1)", &vars).unwrap();
        let values: Vec<f64> = (0..spec.node_count())
            .map(|n| e.eval(&spec.coords(n)).unwrap())
            .collect();
        let d = DensityField {
            kind: DensityKind::EnergyF,
            includes_volume: true,
            values,
        };
        let total = total_energy(&d, &spec);
        assert!((total - 2.0 / std::f64::consts::PI).abs() <= 1e-3);
    }

    #[test]
    fn constant_density_integrates_to_area() {
        let spec = unit_square(9);
        let d = DensityField {
            kind: DensityKind::EnergyF,
            includes_volume: true,
            values: vec![1.0; spec.node_count()],
        };
        assert!((total_energy(&d, &spec) - 1.0).abs() <= 1e-14);
    }
}
