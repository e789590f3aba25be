//! Hypothesis condition checkers for the dynamics theorems, and the
//! Ω / S / A decompositions their proofs run on.
//!
//! Conditions are evaluated on user-given sample sets; nothing is solved.
//! The expanded S display in the source material carries colliding dummy
//! indices, so S is implemented as the literal symmetrization of Ω, which is
//! unambiguous.

use rand::Rng;

use crate::error::Error;
use crate::exprdsl::ScalarExpr;
use crate::geomcore::{christoffel_second, riemann_curvature, DistTensor, MetricField, Tensor3};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionId {
    C16,
    C17a,
    C17b,
    C22,
    C23,
    C24,
    C36,
}

impl ConditionId {
    pub fn label(self) -> &'static str {
        match self {
            ConditionId::C16 => "16",
            ConditionId::C17a => "17a",
            ConditionId::C17b => "17b",
            ConditionId::C22 => "22",
            ConditionId::C23 => "23",
            ConditionId::C24 => "24",
            ConditionId::C36 => "36",
        }
    }
}

/// Worst violation of one hypothesis condition over a sample set.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub id: ConditionId,
    pub max_violation: f64,
    pub worst_point: Vec<f64>,
    pub samples: usize,
}

impl ConditionReport {
    fn collect<F>(id: ConditionId, samples: &[Vec<f64>], mut violation: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let mut max_violation = 0.0;
        let mut worst_point = samples.first().cloned().unwrap_or_default();
        for p in samples {
            let v = violation(p)?;
            if v > max_violation {
                max_violation = v;
                worst_point = p.clone();
            }
        }
        Ok(ConditionReport {
            id,
            max_violation,
            worst_point,
            samples: samples.len(),
        })
    }
}

/// Uniform random points in a box, for the default condition sample sets.
pub fn sample_points<R: Rng>(rng: &mut R, bounds: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect()
        })
        .collect()
}

fn require_endo(y: &DistTensor) -> Result<()> {
    if y.shape() != crate::geomcore::TensorShape::Endo {
        return Err(Error::ShapeMismatch("Y must be endomorphism-shaped".into()));
    }
    Ok(())
}

/// Y^s_i ∂f_{sj}/∂x^k = ∂Y^s_j/∂x^k f_{si}
pub fn check_condition_16(
    f: &MetricField,
    y: &DistTensor,
    samples: &[Vec<f64>],
) -> Result<ConditionReport> {
    require_endo(y)?;
    let n = f.dim();
    ConditionReport::collect(ConditionId::C16, samples, |x| {
        let yv = y.eval_at(&[], x)?;
        let fm = f.eval_at(x)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut lhs = 0.0;
                    let mut rhs = 0.0;
                    for s in 0..n {
                        lhs += yv[(s, i)] * f.entry(s, j).diff(k).eval(x)?;
                        rhs += y.entry(s, j).diff(k).eval(x)? * fm[(s, i)];
                    }
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
        Ok(worst)
    })
}

/// 17a: f_{ij} = g_{is}(Y^s_j − δ^s_j); 17b: g_{is}Y^s_j = g_{js}Y^s_i.
pub fn check_condition_17(
    f: &MetricField,
    g: &MetricField,
    y: &DistTensor,
    samples: &[Vec<f64>],
) -> Result<(ConditionReport, ConditionReport)> {
    require_endo(y)?;
    let n = g.dim();
    let a = ConditionReport::collect(ConditionId::C17a, samples, |x| {
        let yv = y.eval_at(&[], x)?;
        let gm = g.eval_at(x)?;
        let fm = f.eval_at(x)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut rhs = 0.0;
                for s in 0..n {
                    let delta = if s == j { 1.0 } else { 0.0 };
                    rhs += gm[(i, s)] * (yv[(s, j)] - delta);
                }
                worst = worst.max((fm[(i, j)] - rhs).abs());
            }
        }
        Ok(worst)
    })?;
    let b = ConditionReport::collect(ConditionId::C17b, samples, |x| {
        Ok(gy_asymmetry(g, y, x)?)
    })?;
    Ok((a, b))
}

fn gy_asymmetry(g: &MetricField, y: &DistTensor, x: &[f64]) -> Result<f64> {
    let n = g.dim();
    let gm = g.eval_at(x)?;
    let yv = y.eval_at(&[], x)?;
    let gy = &gm * &yv;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((gy[(i, j)] - gy[(j, i)]).abs());
        }
    }
    Ok(worst)
}

/// (∇_k Y)^i_j = ∂Y^i_j/∂x^k + G^i_{ks}Y^s_j − G^s_{kj}Y^i_s at a point.
pub fn nabla_y(
    g: &MetricField,
    y: &DistTensor,
    x: &[f64],
) -> Result<Tensor3> {
    let n = g.dim();
    let gamma = christoffel_second(g)?.eval_at(x)?;
    let yv = y.eval_at(&[], x)?;
    let mut out = Tensor3::zeros(n); // get(k, i, j) = (∇_k Y)^i_j
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = y.entry(i, j).diff(k).eval(x)?;
                for s in 0..n {
                    v += gamma.get(i, k, s) * yv[(s, j)] - gamma.get(s, k, j) * yv[(i, s)];
                }
                out.set(k, i, j, v);
            }
        }
    }
    Ok(out)
}

/// (22): parallelism (∇Y = 0); (23): g_{is}Y^s_j symmetric.
pub fn check_condition_22_23(
    g: &MetricField,
    y: &DistTensor,
    samples: &[Vec<f64>],
) -> Result<(ConditionReport, ConditionReport)> {
    require_endo(y)?;
    let parallel = ConditionReport::collect(ConditionId::C22, samples, |x| {
        Ok(nabla_y(g, y, x)?.max_abs())
    })?;
    let sym = ConditionReport::collect(ConditionId::C23, samples, |x| gy_asymmetry(g, y, x))?;
    Ok((parallel, sym))
}

/// (24): Y^i_s R^s_{jkl} = Y^s_j R^i_{skl}.
pub fn check_condition_24(
    g: &MetricField,
    y: &DistTensor,
    samples: &[Vec<f64>],
) -> Result<ConditionReport> {
    require_endo(y)?;
    let n = g.dim();
    let riem = riemann_curvature(g)?;
    ConditionReport::collect(ConditionId::C24, samples, |x| {
        let yv = y.eval_at(&[], x)?;
        let r = riem.eval_at(x)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut lhs = 0.0;
                        let mut rhs = 0.0;
                        for s in 0..n {
                            lhs += yv[(i, s)] * r.get(s, j, k, l);
                            rhs += yv[(s, j)] * r.get(i, s, k, l);
                        }
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
        }
        Ok(worst)
    })
}

/// (36): g_{is}[(∇_kY)^s_j − (∇_jY)^s_k] + g_{js}[(∇_kY)^s_i − (∇_iY)^s_k]
///       = 2 g_{sp} G^p_{ij} Y^s_k.
pub fn check_condition_36(
    g: &MetricField,
    y: &DistTensor,
    samples: &[Vec<f64>],
) -> Result<ConditionReport> {
    require_endo(y)?;
    let n = g.dim();
    let christ = christoffel_second(g)?;
    ConditionReport::collect(ConditionId::C36, samples, |x| {
        let gm = g.eval_at(x)?;
        let yv = y.eval_at(&[], x)?;
        let ny = nabla_y(g, y, x)?;
        let gamma = christ.eval_at(x)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut lhs = 0.0;
                    let mut rhs = 0.0;
                    for s in 0..n {
                        lhs += gm[(i, s)] * (ny.get(k, s, j) - ny.get(j, s, k))
                            + gm[(j, s)] * (ny.get(k, s, i) - ny.get(i, s, k));
                        for p in 0..n {
                            rhs += 2.0 * gm[(s, p)] * gamma.get(p, i, j) * yv[(s, k)];
                        }
                    }
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
        Ok(worst)
    })
}

/// Which Ω decomposition: the non-homogeneous dynamics one or the general
/// harmonicity one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaKind {
    Dynamics,
    Harmonic,
}

/// Ω and its symmetric/antisymmetric parts at one point. All tables are
/// indexed `get(a, b, c)` = T_{ab|c}.
#[derive(Debug, Clone)]
pub struct OmegaTables {
    pub omega: Tensor3,
    pub s: Tensor3,
    pub a: Tensor3,
}

/// The Ω table at one point.
///
/// Dynamics kind: Ω_{jk|p} = g_{ip}∂Y^i_j/∂x^k + g_{ip}G^i_{ks}Y^s_j
///                − g_{sj}Y^i_kG^s_{ip} + ½Y^s_jY^i_k ∂g_{is}/∂x^p.
/// Harmonic kind: Ω_{pk|i} = g_{is}[∂Y^s_p/∂x^k + Y^j_pG^s_{jk}].
pub fn omega_decomposition(
    kind: OmegaKind,
    g: &MetricField,
    y: &DistTensor,
    x: &[f64],
) -> Result<OmegaTables> {
    require_endo(y)?;
    let n = g.dim();
    let gm = g.eval_at(x)?;
    let yv = y.eval_at(&[], x)?;
    let gamma = christoffel_second(g)?.eval_at(x)?;
    let mut omega = Tensor3::zeros(n);
    match kind {
        OmegaKind::Dynamics => {
            for j in 0..n {
                for k in 0..n {
                    for p in 0..n {
                        let mut v = 0.0;
                        for i in 0..n {
                            v += gm[(i, p)] * y.entry(i, j).diff(k).eval(x)?;
                            for s in 0..n {
                                v += gm[(i, p)] * gamma.get(i, k, s) * yv[(s, j)]
                                    - gm[(s, j)] * yv[(i, k)] * gamma.get(s, i, p);
                            }
                        }
                        for s in 0..n {
                            for i in 0..n {
                                v += 0.5
                                    * yv[(s, j)]
                                    * yv[(i, k)]
                                    * g.entry(i, s).diff(p).eval(x)?;
                            }
                        }
                        omega.set(j, k, p, v);
                    }
                }
            }
        }
        OmegaKind::Harmonic => {
            for p in 0..n {
                for k in 0..n {
                    for i in 0..n {
                        let mut v = 0.0;
                        for s in 0..n {
                            let mut bracket = y.entry(s, p).diff(k).eval(x)?;
                            for j in 0..n {
                                bracket += yv[(j, p)] * gamma.get(s, j, k);
                            }
                            v += gm[(i, s)] * bracket;
                        }
                        omega.set(p, k, i, v);
                    }
                }
            }
        }
    }
    let mut s_part = Tensor3::zeros(n);
    let mut a_part = Tensor3::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                s_part.set(a, b, c, 0.5 * (omega.get(a, b, c) + omega.get(b, a, c)));
                a_part.set(a, b, c, 0.5 * (omega.get(a, b, c) - omega.get(b, a, c)));
            }
        }
    }
    Ok(OmegaTables {
        omega,
        s: s_part,
        a: a_part,
    })
}

/// Σ_{ij|k} from the first variation of the symmetrized-Y kinetic
/// Lagrangian; appears in the non-homogeneous dynamics proof. `get(i, j, k)`.
pub fn sigma_dynamics(g: &MetricField, y: &DistTensor, x: &[f64]) -> Result<Tensor3> {
    require_endo(y)?;
    let n = g.dim();
    let gm = g.eval_at(x)?;
    let yv = y.eval_at(&[], x)?;
    let dg = |i: usize, s: usize, k: usize| g.entry(i, s).diff(k).eval(x);
    let dy = |s: usize, i: usize, k: usize| y.entry(s, i).diff(k).eval(x);
    let mut out = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = 0.0;
                for s in 0..n {
                    v += yv[(s, j)] * (dg(i, s, k)? - dg(k, s, i)?);
                    v += yv[(s, i)] * (dg(j, s, k)? - dg(k, s, j)?);
                    v -= gm[(s, k)] * (dy(s, i, j)? + dy(s, j, i)?);
                    v -= yv[(s, k)] * (dg(j, s, i)? + dg(i, s, j)?);
                    v += gm[(s, j)] * (dy(s, i, k)? - dy(s, k, i)?);
                    v += gm[(s, i)] * (dy(s, j, k)? - dy(s, k, j)?);
                }
                out.set(i, j, k, 0.25 * v);
            }
        }
    }
    Ok(out)
}

/// Right side of the Σ + S identity: ½(Y^s_i ∂f_{sj}/∂x^k − ∂Y^s_j/∂x^k f_{si}).
pub fn sigma_plus_s_rhs(
    f: &MetricField,
    y: &DistTensor,
    x: &[f64],
) -> Result<Tensor3> {
    let n = f.dim();
    let yv = y.eval_at(&[], x)?;
    let fm = f.eval_at(x)?;
    let mut out = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = 0.0;
                for s in 0..n {
                    v += yv[(s, i)] * f.entry(s, j).diff(k).eval(x)?;
                    v -= y.entry(s, j).diff(k).eval(x)? * fm[(s, i)];
                }
                out.set(i, j, k, 0.5 * v);
            }
        }
    }
    Ok(out)
}

/// f_{ij} = g_{is}Y^s_j as a symbolic metric-like field (possibly
/// non-symmetric is the caller's concern; the theorems assume (23)).
pub fn lowered_y(g: &MetricField, y: &DistTensor) -> MetricField {
    let n = g.dim();
    let mut upper = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut sum = ScalarExpr::zero();
            for s in 0..n {
                sum = crate::exprdsl::add(
                    sum,
                    crate::exprdsl::mul(g.entry(i, s).clone(), y.entry(s, j).clone()),
                );
            }
            upper.push(sum);
        }
    }
    MetricField::from_upper(
        n,
        crate::geomcore::MetricKind::SymmetricDegenerate,
        g.vars().clone(),
        upper,
    )
    .expect("dimensions are consistent by construction")
}

/// f_{ij} = g_{is}Y^s_j + g_{js}Y^s_i symbolically.
pub fn symmetrized_lowered_y(g: &MetricField, y: &DistTensor) -> MetricField {
    let n = g.dim();
    let mut upper = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut sum = ScalarExpr::zero();
            for s in 0..n {
                sum = crate::exprdsl::add(
                    sum,
                    crate::exprdsl::add(
                        crate::exprdsl::mul(g.entry(i, s).clone(), y.entry(s, j).clone()),
                        crate::exprdsl::mul(g.entry(j, s).clone(), y.entry(s, i).clone()),
                    ),
                );
            }
            upper.push(sum);
        }
    }
    MetricField::from_upper(
        n,
        crate::geomcore::MetricKind::SymmetricDegenerate,
        g.vars().clone(),
        upper,
    )
    .expect("dimensions are consistent by construction")
}
