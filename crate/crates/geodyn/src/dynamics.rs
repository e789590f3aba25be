//! First-order geometric dynamics: integrating normal PDE systems on
//! parameter grids, integrability diagnostics, first-order system residuals,
//! and kernel fields built from a map's Jacobian.
//!
//! The integrator is a classical 4-stage one-step method swept axis by axis
//! in lexicographic order. For non-integrable fields the sweep order matters;
//! the consistency defect (re-integration in reversed axis order) quantifies
//! that instead of hiding it.

use nalgebra::DMatrix;

use crate::elresidual::ResidualReport;
use crate::error::Error;
use crate::geomcore::{grid_partials, DistTensor, GridSpec, MapGrid, Provenance, TensorShape};
use crate::Result;

/// Any computed value beyond this magnitude aborts integration.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// Closure defect of a mixed tensor field X^i_α(t, x): the full condition
/// ∂X^i_α/∂t^β + ∂X^i_α/∂x^j X^j_β must be symmetric in (α, β). The t-part
/// and x-part are also reported separately.
#[derive(Debug, Clone)]
pub struct IntegrabilityReport {
    pub max_defect: f64,
    pub t_part: f64,
    pub x_part: f64,
    pub worst_point: Vec<f64>,
    pub samples: usize,
}

/// Evaluate the closure defect at the given (t, x) sample points
/// (concatenated per sample: t first, then x).
pub fn integrability_check(
    x_field: &DistTensor,
    samples: &[(Vec<f64>, Vec<f64>)],
) -> Result<IntegrabilityReport> {
    if x_field.shape() != TensorShape::Mixed {
        return Err(Error::ShapeMismatch("X must be mixed-shaped".into()));
    }
    let n = x_field.rows();
    let m = x_field.cols();
    let mut max_defect = 0.0f64;
    let mut t_part = 0.0f64;
    let mut x_part = 0.0f64;
    let mut worst_point = Vec::new();
    for (t, x) in samples {
        let p = x_field.point(t, x);
        let xv = x_field.eval_at(t, x)?;
        for i in 0..n {
            for a in 0..m {
                for b in (a + 1)..m {
                    let dt_ab = x_field
                        .entry(i, a)
                        .diff(x_field.t_var(b).unwrap())
                        .eval(&p)?;
                    let dt_ba = x_field
                        .entry(i, b)
                        .diff(x_field.t_var(a).unwrap())
                        .eval(&p)?;
                    let mut dx_ab = 0.0;
                    let mut dx_ba = 0.0;
                    for j in 0..n {
                        let xj = x_field.x_var(j).unwrap();
                        dx_ab += x_field.entry(i, a).diff(xj).eval(&p)? * xv[(j, b)];
                        dx_ba += x_field.entry(i, b).diff(xj).eval(&p)? * xv[(j, a)];
                    }
                    let defect = ((dt_ab + dx_ab) - (dt_ba + dx_ba)).abs();
                    t_part = t_part.max((dt_ab - dt_ba).abs());
                    x_part = x_part.max((dx_ab - dx_ba).abs());
                    if defect > max_defect {
                        max_defect = defect;
                        worst_point = p.clone();
                    }
                }
            }
        }
    }
    Ok(IntegrabilityReport {
        max_defect,
        t_part,
        x_part,
        worst_point,
        samples: samples.len(),
    })
}

/// Outcome of integrating a first-order normal system over a grid.
#[derive(Debug, Clone)]
pub struct IntegrationResult {
    pub map: MapGrid,
    /// Max disagreement against a reversed-axis-order sweep, interior nodes.
    pub consistency_defect: f64,
    /// Max closure-condition violation along the integrated map.
    pub integrability_defect: f64,
}

fn rk4_step(
    x_field: &DistTensor,
    t: &[f64],
    axis: usize,
    h: f64,
    state: &[f64],
) -> Result<Vec<f64>> {
    let n = state.len();
    let eval = |t_axis: f64, s: &[f64]| -> Result<Vec<f64>> {
        let mut tt = t.to_vec();
        tt[axis] = t_axis;
        let xm = x_field.eval_at(&tt, s)?;
        Ok((0..n).map(|i| xm[(i, axis)]).collect())
    };
    let t0 = t[axis];
    let k1 = eval(t0, state)?;
    let s2: Vec<f64> = (0..n).map(|i| state[i] + 0.5 * h * k1[i]).collect();
    let k2 = eval(t0 + 0.5 * h, &s2)?;
    let s3: Vec<f64> = (0..n).map(|i| state[i] + 0.5 * h * k2[i]).collect();
    let k3 = eval(t0 + 0.5 * h, &s3)?;
    let s4: Vec<f64> = (0..n).map(|i| state[i] + h * k3[i]).collect();
    let k4 = eval(t0 + h, &s4)?;
    Ok((0..n)
        .map(|i| state[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Fill the grid by sweeping the axes in the given order from the low
/// corner.
fn sweep(
    x_field: &DistTensor,
    x0: &[f64],
    spec: &GridSpec,
    axis_order: &[usize],
) -> Result<Vec<f64>> {
    let n = x0.len();
    let nodes = spec.node_count();
    let mut values = vec![f64::NAN; nodes * n];
    values[..n].copy_from_slice(x0); // low corner is flat index 0

    for (phase, &axis) in axis_order.iter().enumerate() {
        let h = spec.spacing(axis);
        let stride = spec.stride(axis);
        // starting nodes: position 0 along `axis` and along every axis not
        // yet swept; arbitrary along already-swept axes
        for start in 0..nodes {
            if spec.axis_position(start, axis) != 0 {
                continue;
            }
            if axis_order[phase + 1..]
                .iter()
                .any(|&later| spec.axis_position(start, later) != 0)
            {
                continue;
            }
            let mut state: Vec<f64> = values[start * n..start * n + n].to_vec();
            debug_assert!(state.iter().all(|v| v.is_finite()));
            let mut t = spec.coords(start);
            for q in 1..spec.points()[axis] {
                state = rk4_step(x_field, &t, axis, h, &state)?;
                let node = start + q * stride;
                if state.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_LIMIT) {
                    return Err(Error::BlowUp {
                        node: spec.multi_index(node),
                        limit: BLOWUP_LIMIT,
                    });
                }
                values[node * n..node * n + n].copy_from_slice(&state);
                t[axis] += h;
            }
        }
    }
    Ok(values)
}

/// Integrate ∂x^i/∂t^α = X^i_α(t, x) from an initial value at the low
/// corner of the grid. Integrability below tolerance is the caller's
/// lookout; the consistency defect reports how much the sweep order
/// mattered.
pub fn integrate_normal_system(
    x_field: &DistTensor,
    x0: &[f64],
    spec: &GridSpec,
) -> Result<IntegrationResult> {
    if x_field.shape() != TensorShape::Mixed {
        return Err(Error::ShapeMismatch("X must be mixed-shaped".into()));
    }
    if x0.len() != x_field.rows() {
        return Err(Error::Dimension(format!(
            "initial value has {} components, X has {} rows",
            x0.len(),
            x_field.rows()
        )));
    }
    let m = spec.m();
    if x_field.cols() != m {
        return Err(Error::Dimension(format!(
            "X has {} columns, grid has {} axes",
            x_field.cols(),
            m
        )));
    }

    let forward_order: Vec<usize> = (0..m).collect();
    let values = sweep(x_field, x0, spec, &forward_order)?;

    let mut consistency_defect = 0.0f64;
    if m > 1 {
        let reversed: Vec<usize> = (0..m).rev().collect();
        let rev_values = sweep(x_field, x0, spec, &reversed)?;
        let n = x0.len();
        for node in spec.interior_nodes() {
            for i in 0..n {
                consistency_defect = consistency_defect
                    .max((values[node * n + i] - rev_values[node * n + i]).abs());
            }
        }
    }

    let map = MapGrid::from_values(spec.clone(), x0.len(), values, Provenance::Integrated)?;

    let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..spec.node_count())
        .map(|node| (spec.coords(node), map.values_at(node).to_vec()))
        .collect();
    let integrability_defect = if m > 1 {
        integrability_check(x_field, &samples)?.max_defect
    } else {
        0.0
    };

    Ok(IntegrationResult {
        map,
        consistency_defect,
        integrability_defect,
    })
}

/// Nodewise residual x^j_α Y^i_j(x) − T^i_α(t) of the implicit first-order
/// system; components are flattened as (i, α).
pub fn implicit_system_residual(
    x: &MapGrid,
    y: &DistTensor,
    t_field: &DistTensor,
) -> Result<ResidualReport> {
    if y.shape() != TensorShape::Endo {
        return Err(Error::ShapeMismatch("Y must be endomorphism-shaped".into()));
    }
    if t_field.shape() != TensorShape::Sheet {
        return Err(Error::ShapeMismatch("T must be sheet-shaped".into()));
    }
    let (n, m) = (x.n, x.spec.m());
    let parts = grid_partials(x)?;
    let interior = x.spec.interior_nodes();
    let mut values = vec![0.0; interior.len() * n * m];
    for (k, &node) in interior.iter().enumerate() {
        let t = x.spec.coords(node);
        let xv = x.values_at(node);
        let yv = y.eval_at(&[], xv)?;
        let tv = t_field.eval_at(&t, xv)?;
        for i in 0..n {
            for a in 0..m {
                let mut v = -tv[(i, a)];
                for j in 0..n {
                    v += parts.first(node, j, a) * yv[(i, j)];
                }
                values[(k * n + i) * m + a] = v;
            }
        }
    }
    Ok(ResidualReport::from_values(
        x.spec.clone(),
        n * m,
        interior,
        values,
    ))
}

/// T ≡ 0 case of the implicit system residual.
pub fn homogeneous_system_residual(x: &MapGrid, y: &DistTensor) -> Result<ResidualReport> {
    let t0 = DistTensor::zero_sheet(x.n, x.spec.m());
    implicit_system_residual(x, y, &t0)
}

/// Per-node kernel matrices ξ^i_j with x^j_α ξ^i_j = 0.
#[derive(Debug, Clone)]
pub struct KernelField {
    pub n: usize,
    pub spec: GridSpec,
    values: Vec<f64>, // [node * n * n + i * n + j]
}

impl KernelField {
    pub fn matrix_at(&self, node: usize) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| self.values[node * n * n + i * n + j])
    }
}

/// Deterministic kernel construction: project the coordinate basis onto the
/// orthogonal complement of the Jacobian columns, accept directions in pivot
/// order, orthonormalize with re-orthogonalization, fix signs by making the
/// first nonzero entry of each row positive, pad with zero rows.
pub fn kernel_field_from_map(x: &MapGrid) -> Result<KernelField> {
    let (n, m) = (x.n, x.spec.m());
    let parts = grid_partials(x)?;
    let nodes = x.spec.node_count();
    let mut values = vec![0.0; nodes * n * n];
    for node in 0..nodes {
        let jac = parts.jacobian(node); // n×m, columns span the tangent
        let jtj = jac.transpose() * &jac;
        let jtj_inv = jtj.lu().try_inverse().ok_or(Error::RankDeficient {
            node: x.spec.multi_index(node),
        })?;
        let projector = DMatrix::identity(n, n) - &jac * jtj_inv * jac.transpose();

        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n - m);
        for pivot in 0..n {
            if rows.len() == n - m {
                break;
            }
            let mut v: Vec<f64> = (0..n).map(|i| projector[(i, pivot)]).collect();
            for r in &rows {
                let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= dot * ri;
                }
            }
            // second pass keeps the rows orthonormal to rounding
            for r in &rows {
                let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= dot * ri;
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm <= 1e-8 {
                continue;
            }
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
            rows.push(v);
        }
        if rows.len() != n - m {
            return Err(Error::RankDeficient {
                node: x.spec.multi_index(node),
            });
        }
        for (r, row) in rows.iter().enumerate() {
            for j in 0..n {
                values[node * n * n + r * n + j] = row[j];
            }
        }
    }
    Ok(KernelField {
        n,
        spec: x.spec.clone(),
        values,
    })
}
