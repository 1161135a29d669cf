//! The kinetic almost-exponential map and the induced mollification
//! `S_r f(p) = c_χ^{-1} ∫ f(γ^m(r; p)) χ_σ(m₁, m₂) dm`, together with the
//! numeric verification of its L² → L^q scaling behaviour.

use crate::geometry::PhasePoint;
use crate::numerics::{self, gauss_legendre_on};
use crate::trajectory::ForcingPair;
use crate::{KineticError, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::sync::{Arc, OnceLock, RwLock};

/// Tangent parameters `m = (m0, m1, m2)` of the almost-exponential map.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentData {
    pub m0: f64,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

impl TangentData {
    pub fn new(m0: f64, m1: Vec<f64>, m2: Vec<f64>) -> Result<Self> {
        if m0 == 0.0 || !m0.is_finite() {
            return Err(KineticError::InvalidArgument(
                "tangent time direction m0 must be nonzero".into(),
            ));
        }
        if m1.len() != m2.len() {
            return Err(KineticError::DimensionMismatch(format!(
                "m1 has length {} but m2 has length {}",
                m1.len(),
                m2.len()
            )));
        }
        Ok(Self { m0, m1, m2 })
    }

    pub fn dim(&self) -> usize {
        self.m1.len()
    }
}

/// Regularity tag carried by a sampled field (plumbing only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    Smooth,
    Lipschitz,
    Rough,
}

type FieldFn = dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync;

/// A scalar field on `R^{1+2n}` with a declared support box.
#[derive(Clone)]
pub struct SampledField {
    eval: Arc<FieldFn>,
    pub dim: usize,
    pub t_range: (f64, f64),
    pub x_half_width: f64,
    pub v_half_width: f64,
    pub smoothness: Smoothness,
}

impl fmt::Debug for SampledField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledField")
            .field("dim", &self.dim)
            .field("t_range", &self.t_range)
            .field("x_half_width", &self.x_half_width)
            .field("v_half_width", &self.v_half_width)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl SampledField {
    /// Field defined on all of `R^{1+2n}`.
    pub fn everywhere<F>(dim: usize, smoothness: Smoothness, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            dim,
            t_range: (f64::NEG_INFINITY, f64::INFINITY),
            x_half_width: f64::INFINITY,
            v_half_width: f64::INFINITY,
            smoothness,
        }
    }

    /// Restricts the declared support box.
    pub fn with_support(mut self, t_range: (f64, f64), x_half_width: f64, v_half_width: f64) -> Self {
        self.t_range = t_range;
        self.x_half_width = x_half_width;
        self.v_half_width = v_half_width;
        self
    }

    pub fn contains(&self, p: &PhasePoint) -> bool {
        p.t >= self.t_range.0
            && p.t <= self.t_range.1
            && p.x.iter().all(|&a| a.abs() <= self.x_half_width)
            && p.v.iter().all(|&a| a.abs() <= self.v_half_width)
    }

    pub fn value(&self, p: &PhasePoint) -> Result<f64> {
        if !self.contains(p) {
            return Err(KineticError::OutOfSupport(format!(
                "point (t={}, |x|≤{:?}, |v|≤{:?}) leaves the declared support box",
                p.t,
                p.x.iter().map(|a| a.abs()).fold(0.0, f64::max),
                p.v.iter().map(|a| a.abs()).fold(0.0, f64::max),
            )));
        }
        Ok((self.eval)(p.t, &p.x, &p.v))
    }
}

/// Compactly supported mollification kernel `χ_σ(m) = χ̃(m/σ)` built from the
/// standard bump `exp(−1/(1−u²))` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpKernel {
    pub sigma: f64,
    /// Replace `χ̃` by `χ̃²` per axis (the proof-side kernel variant).
    pub squared_profile: bool,
}

pub const DEFAULT_QUAD_NODES: usize = 24;

fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Dense reference rule for `∫_{-1}^{1} · du`: trapezoid under the tanh-sinh
/// substitution, which tames the bump's flat edges.
fn de_reference_rule() -> &'static Vec<(f64, f64)> {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = 4001usize;
        let a = 1.5;
        let h = 2.0 * a / (n - 1) as f64;
        (0..n)
            .map(|i| {
                let t = -a + i as f64 * h;
                let s = 0.5 * std::f64::consts::PI * t.sinh();
                let u = s.tanh();
                let w = h * 0.5 * std::f64::consts::PI * t.cosh() / s.cosh().powi(2);
                (u, w)
            })
            .collect()
    })
}

/// Nodes and weights of the `n`-point Gauss rule for the measure `χ̃(u) du`
/// (or `χ̃² du`) on `[−1, 1]`, cached per `(n, squared)`.
fn weighted_gauss_unit(n: usize, squared: bool) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<RwLock<HashMap<(usize, bool), Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(rule) = cache.read().expect("quadrature cache poisoned").get(&(n, squared)) {
        return rule.clone();
    }
    let rule = Arc::new(build_weighted_gauss(n, squared));
    cache
        .write()
        .expect("quadrature cache poisoned")
        .insert((n, squared), rule.clone());
    rule
}

/// Stieltjes procedure on the dense reference grid followed by Golub–Welsch.
fn build_weighted_gauss(n: usize, squared: bool) -> Vec<(f64, f64)> {
    let reference = de_reference_rule();
    let grid: Vec<f64> = reference.iter().map(|&(u, _)| u).collect();
    let measure: Vec<f64> = reference
        .iter()
        .map(|&(u, w)| {
            let b = bump(u);
            w * if squared { b * b } else { b }
        })
        .collect();
    let total: f64 = measure.iter().sum();
    let m = grid.len();
    let mut p_prev = vec![0.0; m];
    let mut p: Vec<f64> = vec![total.sqrt().recip(); m];
    let mut alphas = Vec::with_capacity(n);
    let mut sqrt_betas = Vec::with_capacity(n);
    for k in 0..n {
        let alpha: f64 = (0..m).map(|i| measure[i] * grid[i] * p[i] * p[i]).sum();
        alphas.push(alpha);
        let prev_coeff = if k > 0 { sqrt_betas[k - 1] } else { 0.0 };
        let q: Vec<f64> = (0..m)
            .map(|i| (grid[i] - alpha) * p[i] - prev_coeff * p_prev[i])
            .collect();
        let beta: f64 = (0..m).map(|i| measure[i] * q[i] * q[i]).sum();
        let sb = beta.sqrt();
        sqrt_betas.push(sb);
        p_prev = p;
        p = q.into_iter().map(|v| v / sb).collect();
    }
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = alphas[k];
        if k + 1 < n {
            jacobi[(k, k + 1)] = sqrt_betas[k];
            jacobi[(k + 1, k)] = sqrt_betas[k];
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let first = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], total * first * first)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

impl BumpKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(KineticError::InvalidArgument(format!(
                "kernel scale must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma, squared_profile: false })
    }

    pub fn with_squared_profile(mut self) -> Self {
        self.squared_profile = true;
        self
    }

    /// Kernel value at a single axis coordinate.
    pub fn axis_value(&self, m: f64) -> f64 {
        let b = bump(m / self.sigma);
        if self.squared_profile {
            b * b
        } else {
            b
        }
    }

    /// Full kernel value `χ_σ(m1, m2)` (product over all axes).
    pub fn value(&self, m1: &[f64], m2: &[f64]) -> f64 {
        m1.iter()
            .chain(m2)
            .map(|&u| self.axis_value(u))
            .product()
    }

    /// Gaussian quadrature on `[−σ, σ]` for the measure `χ_σ(m) dm`: nodes
    /// paired with weights that already carry the kernel factor.
    ///
    /// The rule is Gauss with respect to the kernel weight itself
    /// (Golub–Welsch on Stieltjes recurrence coefficients), so the bump's
    /// flat-edge singularity never degrades convergence; only the smooth
    /// integrand factor contributes error.
    pub fn axis_rule(&self, nodes: usize) -> Vec<(f64, f64)> {
        let unit = weighted_gauss_unit(nodes, self.squared_profile);
        unit.iter().map(|&(u, w)| (self.sigma * u, self.sigma * w)).collect()
    }

    /// Numeric `∫ χ_σ` over `R^{2n}` (per-axis factorization).
    pub fn c_chi(&self, dim: usize, nodes: usize) -> f64 {
        let axis: f64 = self.axis_rule(nodes).iter().map(|(_, w)| w).sum();
        axis.powi(2 * dim as i32)
    }

    /// Second moment `⟨m²⟩` of one normalized axis.
    pub fn axis_second_moment(&self, nodes: usize) -> f64 {
        let rule = self.axis_rule(nodes);
        let mass: f64 = rule.iter().map(|(_, w)| w).sum();
        rule.iter().map(|(x, w)| x * x * w).sum::<f64>() / mass
    }
}

/// The almost-exponential map `γ^m(r; p)`.
///
/// `γ_t = t + m0 r` and, per coordinate,
/// `γ_x = x + m0 r v + g1 m1 + m0 g2 m2`, `γ_v = v + (g1'/m0) m1 + g2' m2`,
/// which is the base point composed on the right with `(m0 r, c1, c2)`.
pub fn exp_map(base: &PhasePoint, m: &TangentData, r: f64) -> Result<PhasePoint> {
    if m.m0 == 0.0 {
        return Err(KineticError::InvalidArgument(
            "exp_map needs a nonzero time direction m0".into(),
        ));
    }
    if r < 0.0 {
        return Err(KineticError::InvalidArgument(format!("exp_map needs r ≥ 0, got {r}")));
    }
    if m.dim() != base.dim() {
        return Err(KineticError::DimensionMismatch(format!(
            "tangent dimension {} vs point dimension {}",
            m.dim(),
            base.dim()
        )));
    }
    if r == 0.0 {
        return Ok(base.clone());
    }
    let fv = ForcingPair::CriticalLogOscillation.eval(r)?;
    let n = base.dim();
    let mut x = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        x.push(base.x[i] + m.m0 * r * base.v[i] + fv.g1 * m.m1[i] + m.m0 * fv.g2 * m.m2[i]);
        v.push(base.v[i] + fv.dg1 / m.m0 * m.m1[i] + fv.dg2 * m.m2[i]);
    }
    Ok(PhasePoint { t: base.t + m.m0 * r, x, v })
}

/// One scalar block of `D_{m0} W(r) D_{m0}^{-1}` (identical per coordinate).
pub fn exp_map_block(m0: f64, r: f64) -> Result<[[f64; 2]; 2]> {
    let fv = ForcingPair::CriticalLogOscillation.eval(r)?;
    Ok([[fv.g1, m0 * fv.g2], [fv.dg1 / m0, fv.dg2]])
}

/// Mollification `S_r^χ f(p)` with the default node count.
pub fn mollify(f: &SampledField, kernel: &BumpKernel, r: f64, m0: f64, p: &PhasePoint) -> Result<f64> {
    mollify_with_nodes(f, kernel, r, m0, p, DEFAULT_QUAD_NODES)
}

/// Mollification by tensor Gauss–Legendre quadrature with `nodes` per axis.
///
/// Weights are normalized per axis by the quadrature's own kernel mass, so
/// constants are reproduced exactly.
pub fn mollify_with_nodes(
    f: &SampledField,
    kernel: &BumpKernel,
    r: f64,
    m0: f64,
    p: &PhasePoint,
    nodes: usize,
) -> Result<f64> {
    if m0 != 1.0 && m0 != -1.0 {
        return Err(KineticError::InvalidArgument(format!(
            "mollification requires m0 = ±1, got {m0}"
        )));
    }
    if r < 0.0 {
        return Err(KineticError::InvalidArgument(format!("mollify needs r ≥ 0, got {r}")));
    }
    let n = p.dim();
    if f.dim != n {
        return Err(KineticError::DimensionMismatch(format!(
            "field dimension {} vs point dimension {}",
            f.dim, n
        )));
    }
    let rule = kernel.axis_rule(nodes);
    let mass: f64 = rule.iter().map(|(_, w)| w).sum();
    if mass <= 0.0 {
        return Err(KineticError::Numerical("kernel quadrature mass vanished".into()));
    }
    let axis: Vec<(f64, f64)> = rule.into_iter().map(|(x, w)| (x, w / mass)).collect();
    let axes = 2 * n;
    let mut idx = vec![0usize; axes];
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut acc = 0.0;
    loop {
        let mut weight = 1.0;
        for (a, &i) in idx.iter().enumerate() {
            let (x, w) = axis[i];
            weight *= w;
            if a < n {
                m1[a] = x;
            } else {
                m2[a - n] = x;
            }
        }
        let tangent = TangentData { m0, m1: m1.clone(), m2: m2.clone() };
        let gamma = exp_map(p, &tangent, r)?;
        acc += weight * f.value(&gamma)?;
        // odometer increment over the tensor grid
        let mut a = 0;
        loop {
            if a == axes {
                return Ok(acc);
            }
            idx[a] += 1;
            if idx[a] < axis.len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Finite-difference residual of the free-transport commutation claim:
/// `|(∂t + v·∇x)(S_r f)(p) − S_r((∂t + v·∇x) f)(p)|` with centered step `h`
/// and time direction `m0 = +1`.
pub fn transport_commutation_check(
    f: &SampledField,
    kernel: &BumpKernel,
    r: f64,
    p: &PhasePoint,
    h: f64,
) -> Result<f64> {
    if h <= 0.0 {
        return Err(KineticError::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let m0 = 1.0;
    let n = p.dim();
    let nodes = DEFAULT_QUAD_NODES;
    let s = |q: &PhasePoint| mollify_with_nodes(f, kernel, r, m0, q, nodes);

    let mut pt = p.clone();
    pt.t = p.t + h;
    let mut pm = p.clone();
    pm.t = p.t - h;
    let mut lhs = (s(&pt)? - s(&pm)?) / (2.0 * h);
    for i in 0..n {
        let mut qp = p.clone();
        qp.x[i] += h;
        let mut qm = p.clone();
        qm.x[i] -= h;
        lhs += p.v[i] * (s(&qp)? - s(&qm)?) / (2.0 * h);
    }

    let inner = f.clone();
    let transported = SampledField {
        eval: Arc::new(move |t: f64, x: &[f64], v: &[f64]| {
            let xp = PhasePoint { t: t + h, x: x.to_vec(), v: v.to_vec() };
            let xm = PhasePoint { t: t - h, x: x.to_vec(), v: v.to_vec() };
            let mut d = ((inner.eval)(xp.t, &xp.x, &xp.v) - (inner.eval)(xm.t, &xm.x, &xm.v))
                / (2.0 * h);
            for i in 0..x.len() {
                let mut xa = x.to_vec();
                xa[i] += h;
                let mut xb = x.to_vec();
                xb[i] -= h;
                d += v[i] * ((inner.eval)(t, &xa, v) - (inner.eval)(t, &xb, v)) / (2.0 * h);
            }
            m0 * d
        }),
        dim: f.dim,
        t_range: (f.t_range.0 + h, f.t_range.1 - h),
        x_half_width: f.x_half_width - h,
        v_half_width: f.v_half_width,
        smoothness: f.smoothness,
    };
    let rhs = mollify_with_nodes(&transported, kernel, r, m0, p, nodes)?;
    Ok((lhs - rhs).abs())
}

/// Analytic commutation defect `−⟨c2 · ∇x f(γ^m(r; p))⟩` (normalized kernel
/// average), the exact gap between the two sides compared by
/// [`transport_commutation_check`]. The inner gradient uses a fixed small
/// centered step.
pub fn transport_commutation_defect(
    f: &SampledField,
    kernel: &BumpKernel,
    r: f64,
    p: &PhasePoint,
) -> Result<f64> {
    let m0 = 1.0;
    let n = p.dim();
    let fv = ForcingPair::CriticalLogOscillation.eval(r)?;
    let rule = kernel.axis_rule(DEFAULT_QUAD_NODES);
    let mass: f64 = rule.iter().map(|(_, w)| w).sum();
    let axis: Vec<(f64, f64)> = rule.into_iter().map(|(x, w)| (x, w / mass)).collect();
    let axes = 2 * n;
    let hg = 1e-5;
    let mut idx = vec![0usize; axes];
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut acc = 0.0;
    loop {
        let mut weight = 1.0;
        for (a, &i) in idx.iter().enumerate() {
            let (x, w) = axis[i];
            weight *= w;
            if a < n {
                m1[a] = x;
            } else {
                m2[a - n] = x;
            }
        }
        let tangent = TangentData { m0, m1: m1.clone(), m2: m2.clone() };
        let gamma = exp_map(p, &tangent, r)?;
        for i in 0..n {
            let c2 = fv.dg1 / m0 * m1[i] + fv.dg2 * m2[i];
            let mut gp = gamma.clone();
            gp.x[i] += hg;
            let mut gm = gamma.clone();
            gm.x[i] -= hg;
            let grad = (f.value(&gp)? - f.value(&gm)?) / (2.0 * hg);
            acc -= weight * c2 * grad;
        }
        let mut a = 0;
        loop {
            if a == axes {
                return Ok(acc);
            }
            idx[a] += 1;
            if idx[a] < axis.len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Result of the L² → L^q slope measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormScalingReport {
    pub q: f64,
    pub expected_slope: f64,
    pub fitted_slope: f64,
    /// `(r, ‖S_r f_r‖_{L^q})` pairs.
    pub table: Vec<(f64, f64)>,
}

impl NormScalingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,lq_norm\n");
        for (r, v) in &self.table {
            let _ = writeln!(out, "{r},{v}");
        }
        out
    }
}

/// Expected L² → L^q slope `2n(1/θ − 1)` with `1/2 + 1/θ = 1/q + 1`.
pub fn expected_norm_scaling_slope(n: usize, q: f64) -> Result<f64> {
    if q <= 2.0 {
        return Err(KineticError::InvalidArgument(format!(
            "norm scaling needs q > 2, got {q}"
        )));
    }
    let theta_inv = 1.0 / q + 0.5;
    Ok(2.0 * n as f64 * (theta_inv - 1.0))
}

/// Measures `r ↦ ‖S_r f_r‖_{L^q}` with `f_r` the L²-normalized Gaussian
/// adapted to the kinetic scales (widths `∝ r^{3/2}` in `x` and `r^{1/2}` in
/// `v`), the profile family that saturates the operator bound, and fits the
/// log-log slope (dimension 1).
pub fn mollifier_norm_scaling(
    kernel: &BumpKernel,
    q: f64,
    r_grid: &[f64],
    grid_points: usize,
    profile_scale: f64,
) -> Result<NormScalingReport> {
    let expected = expected_norm_scaling_slope(1, q)?;
    if r_grid.len() < 2 || r_grid.iter().any(|&r| r <= 0.0) {
        return Err(KineticError::InvalidArgument(
            "need at least two positive r values".into(),
        ));
    }
    let table: Vec<(f64, f64)> = r_grid
        .par_iter()
        .map(|&r| {
            let wx = profile_scale * r.powf(1.5);
            let wv = profile_scale * r.sqrt();
            let amp = (std::f64::consts::PI * wx * wv).sqrt().recip();
            let field = SampledField::everywhere(1, Smoothness::Smooth, move |_t, x, v| {
                amp * (-(x[0] * x[0]) / (2.0 * wx * wx) - (v[0] * v[0]) / (2.0 * wv * wv)).exp()
            });
            let span_v = 6.0 * wv + 3.0 * kernel.sigma * r.sqrt();
            let span_x = 6.0 * wx + 3.0 * kernel.sigma * r.powf(1.5) + r * span_v;
            let hx = 2.0 * span_x / grid_points as f64;
            let hv = 2.0 * span_v / grid_points as f64;
            let mut acc = 0.0;
            for ix in 0..grid_points {
                let x = -span_x + (ix as f64 + 0.5) * hx;
                for iv in 0..grid_points {
                    let v = -span_v + (iv as f64 + 0.5) * hv;
                    let p = PhasePoint { t: 0.0, x: vec![x], v: vec![v] };
                    let s = mollify_with_nodes(&field, kernel, r, 1.0, &p, 16)?;
                    acc += s.abs().powf(q) * hx * hv;
                }
            }
            Ok((r, acc.powf(1.0 / q)))
        })
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = table.iter().map(|&(r, _)| r.ln()).collect();
    let ly: Vec<f64> = table.iter().map(|&(_, v)| v.max(1e-300).ln()).collect();
    let fitted = numerics::ls_slope(&lx, &ly);
    Ok(NormScalingReport { q, expected_slope: expected, fitted_slope: fitted, table })
}

/// One τ entry of the integrated-operator comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratedBoundReport {
    pub tau: f64,
    pub lhs_norm: f64,
    pub rhs_bound: f64,
    pub ratio: f64,
}

/// Right-hand side `σ^{2n(1/θ−1)} τ^{k + 2n(1/θ−1) + 1/h} ‖f‖₂` of the
/// integrated bound.
pub fn integrated_rhs_bound(sigma: f64, n: usize, k: f64, theta: f64, h: f64, tau: f64, f_l2: f64) -> f64 {
    let a = 2.0 * n as f64 * (1.0 / theta - 1.0);
    sigma.powf(a) * tau.powf(k + a + 1.0 / h) * f_l2
}

/// Evaluates `‖∫_0^τ r^k S_r f dr‖_{L^q}` on an `(x, v)` grid against the
/// scaling bound, for each requested τ.
///
/// The exponents θ and h are derived from `q` and `p` via `1/2 + 1/θ = 1/q + 1`
/// and `1/2 + 1/h = 1/p + 1`; the integrability condition
/// `k + 2n(1/θ − 1) ≥ −1/h` is enforced. The `r` integral uses the
/// substitution `r = u²` so the admissible endpoint `k = −1/2` stays regular.
pub fn integrated_mollifier_bound(
    f: &SampledField,
    kernel: &BumpKernel,
    k: f64,
    p_exp: f64,
    q_exp: f64,
    taus: &[f64],
    grid_points: usize,
    span: (f64, f64),
) -> Result<Vec<IntegratedBoundReport>> {
    if f.dim != 1 {
        return Err(KineticError::InvalidArgument(
            "integrated bound measurement is implemented for dimension 1".into(),
        ));
    }
    if q_exp <= 2.0 || p_exp <= 2.0 {
        return Err(KineticError::InvalidExponents(format!(
            "need p, q > 2, got p = {p_exp}, q = {q_exp}"
        )));
    }
    if k < -0.5 {
        return Err(KineticError::InvalidExponents(format!("need k ≥ −1/2, got {k}")));
    }
    let theta = 1.0 / (1.0 / q_exp + 0.5);
    let h = 1.0 / (1.0 / p_exp + 0.5);
    let n = 1usize;
    let a = 2.0 * n as f64 * (1.0 / theta - 1.0);
    if k + a < -1.0 / h - 1e-12 {
        return Err(KineticError::InvalidExponents(format!(
            "integrability fails: k + 2n(1/θ−1) = {} < −1/h = {}",
            k + a,
            -1.0 / h
        )));
    }
    let (span_x, span_v) = span;
    let hx = 2.0 * span_x / grid_points as f64;
    let hv = 2.0 * span_v / grid_points as f64;

    // slice L² norm of f at t = 0 on the same grid
    let mut l2 = 0.0;
    for ix in 0..grid_points {
        let x = -span_x + (ix as f64 + 0.5) * hx;
        for iv in 0..grid_points {
            let v = -span_v + (iv as f64 + 0.5) * hv;
            let val = f.value(&PhasePoint { t: 0.0, x: vec![x], v: vec![v] })?;
            l2 += val * val * hx * hv;
        }
    }
    let l2 = l2.sqrt();

    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        if tau <= 0.0 {
            return Err(KineticError::InvalidArgument(format!("τ must be positive, got {tau}")));
        }
        let (us, ws) = gauss_legendre_on(0.0, tau.sqrt(), 12);
        let cells: Vec<(usize, usize)> = (0..grid_points)
            .flat_map(|ix| (0..grid_points).map(move |iv| (ix, iv)))
            .collect();
        let acc: f64 = cells
            .par_iter()
            .map(|&(ix, iv)| {
                let x = -span_x + (ix as f64 + 0.5) * hx;
                let v = -span_v + (iv as f64 + 0.5) * hv;
                let p = PhasePoint { t: 0.0, x: vec![x], v: vec![v] };
                let mut integral = 0.0;
                for (&u, &w) in us.iter().zip(&ws) {
                    if u == 0.0 {
                        continue;
                    }
                    let r = u * u;
                    let s = mollify_with_nodes(f, kernel, r, 1.0, &p, 16)?;
                    integral += w * 2.0 * u * r.powf(k) * s;
                }
                Ok(integral.abs().powf(q_exp) * hx * hv)
            })
            .sum::<Result<f64>>()?;
        let lhs = acc.powf(1.0 / q_exp);
        let rhs = integrated_rhs_bound(kernel.sigma, n, k, theta, h, tau, l2);
        out.push(IntegratedBoundReport { tau, lhs_norm: lhs, rhs_bound: rhs, ratio: lhs / rhs });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_field() -> SampledField {
        SampledField::everywhere(1, Smoothness::Smooth, |t, x, v| {
            (-(t * t) - x[0] * x[0] - 2.0 * v[0] * v[0]).exp()
        })
    }

    #[test]
    fn exp_map_pure_transport() {
        let base = PhasePoint::scalar(0.2, -1.0, 3.0);
        let m = TangentData::new(1.0, vec![0.0], vec![0.0]).unwrap();
        let out = exp_map(&base, &m, 0.7).unwrap();
        assert_relative_eq!(out.t, 0.9);
        assert_relative_eq!(out.x[0], -1.0 + 0.7 * 3.0);
        assert_relative_eq!(out.v[0], 3.0);
    }

    #[test]
    fn exp_map_column_selection() {
        let base = PhasePoint::origin(1);
        let m = TangentData::new(1.0, vec![0.0], vec![1.0]).unwrap();
        for r in [0.1, 0.45, 0.9] {
            let fv = ForcingPair::CriticalLogOscillation.eval(r).unwrap();
            let out = exp_map(&base, &m, r).unwrap();
            assert_relative_eq!(out.x[0], fv.g2, epsilon = 1e-14);
            assert_relative_eq!(out.v[0], fv.dg2, epsilon = 1e-14);
        }
    }

    #[test]
    fn exp_map_kinetic_relation() {
        let base = PhasePoint::new(0.1, vec![0.3, -0.2], vec![1.1, 0.4]).unwrap();
        let m = TangentData::new(-1.0, vec![0.2, -0.7], vec![0.5, 0.3]).unwrap();
        let h = 1e-6;
        for r in [0.2, 0.6, 0.95] {
            let plus = exp_map(&base, &m, r + h).unwrap();
            let minus = exp_map(&base, &m, r - h).unwrap();
            let mid = exp_map(&base, &m, r).unwrap();
            for i in 0..2 {
                let dx = (plus.x[i] - minus.x[i]) / (2.0 * h);
                assert_relative_eq!(dx, m.m0 * mid.v[i], max_relative = 1e-6, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn exp_map_rejects_zero_direction() {
        assert!(TangentData::new(0.0, vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn block_determinant_is_r_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m0 = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.5..2.0);
            let r = rng.random_range(1e-6..1.0f64);
            let b = exp_map_block(m0, r).unwrap();
            let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
            assert_relative_eq!(det, r * r, max_relative = 1e-12);
        }
    }

    #[test]
    fn block_inverse_second_column_rate() {
        for m0 in [1.0, -1.0, 0.5, 2.0] {
            let mut sup = 0.0f64;
            for r in numerics::logspace(1e-8, 1.0, 400) {
                let b = exp_map_block(m0, r).unwrap();
                let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
                let inv_12 = -b[0][1] / det;
                let inv_22 = b[0][0] / det;
                sup = sup.max(r.sqrt() * inv_12.abs().max(inv_22.abs()));
            }
            assert!(
                sup <= 1.01 * (1.0 + m0.abs()),
                "m0 = {m0}: sup r^1/2 |col 2| = {sup}"
            );
        }
    }

    #[test]
    fn velocity_displacement_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let c = 3.25f64.sqrt();
        for _ in 0..300 {
            let base = PhasePoint::scalar(0.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let m0 = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.4..2.5);
            let m = TangentData::new(
                m0,
                vec![rng.random_range(-1.0..1.0)],
                vec![rng.random_range(-1.0..1.0)],
            )
            .unwrap();
            let r = rng.random_range(1e-8..1.0f64);
            let out = exp_map(&base, &m, r).unwrap();
            let bound = c * (m.m1[0].abs() / m0.abs() + m.m2[0].abs()) * r.sqrt();
            assert!(
                (out.v[0] - base.v[0]).abs() <= bound * (1.0 + 1e-12),
                "displacement {} vs bound {bound}",
                (out.v[0] - base.v[0]).abs()
            );
        }
    }

    #[test]
    fn mollify_constant_exact() {
        let f = SampledField::everywhere(1, Smoothness::Smooth, |_, _, _| 2.5);
        let kernel = BumpKernel::new(0.8).unwrap();
        let p = PhasePoint::scalar(0.3, -0.4, 0.9);
        for r in [0.05, 0.4, 1.0] {
            let s = mollify(&f, &kernel, r, 1.0, &p).unwrap();
            assert_relative_eq!(s, 2.5, epsilon = 1e-13);
        }
        let sq = mollify(&f, &kernel.clone().with_squared_profile(), 0.4, -1.0, &p).unwrap();
        assert_relative_eq!(sq, 2.5, epsilon = 1e-13);
    }

    #[test]
    fn mollify_linear_velocity_exact() {
        let f = SampledField::everywhere(1, Smoothness::Smooth, |_, _, v| v[0]);
        let kernel = BumpKernel::new(0.6).unwrap();
        let p = PhasePoint::scalar(0.1, 0.2, 0.7);
        for m0 in [1.0, -1.0] {
            for r in [0.1, 0.5, 0.9] {
                let s = mollify(&f, &kernel, r, m0, &p).unwrap();
                assert_relative_eq!(s, 0.7, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mollify_quadrature_node_invariance() {
        let f = gaussian_field();
        let kernel = BumpKernel::new(0.7).unwrap();
        let p = PhasePoint::scalar(0.2, 0.1, -0.3);
        for r in [0.2, 0.8] {
            let a = mollify_with_nodes(&f, &kernel, r, 1.0, &p, 16).unwrap();
            let b = mollify_with_nodes(&f, &kernel, r, 1.0, &p, 32).unwrap();
            assert!((a - b).abs() <= 1e-8, "nodes 16 vs 32: {a} vs {b}");
        }
    }

    #[test]
    fn mollify_small_r_limit_rate() {
        let f = gaussian_field();
        let kernel = BumpKernel::new(0.5).unwrap();
        let p = PhasePoint::scalar(0.1, 0.3, 0.4);
        let f_at_p = f.value(&p).unwrap();
        let rs = numerics::logspace(1e-6, 1e-2, 9);
        let gaps: Vec<f64> = rs
            .iter()
            .map(|&r| {
                let s = mollify(&f, &kernel, r, 1.0, &p).unwrap();
                (s - f_at_p).abs().max(1e-300).ln()
            })
            .collect();
        let lx: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
        let slope = numerics::ls_slope(&lx, &gaps);
        let last = (mollify(&f, &kernel, 1e-6, 1.0, &p).unwrap() - f_at_p).abs();
        assert!(last < 1e-5, "S_r f should approach f, gap {last}");
        assert!(slope >= 0.45, "convergence order {slope} below the r^1/2 guarantee");
    }

    #[test]
    fn mollify_out_of_support() {
        let f = gaussian_field().with_support((-1.0, 1.0), 0.5, 0.5);
        let kernel = BumpKernel::new(0.9).unwrap();
        let p = PhasePoint::scalar(0.0, 0.45, 0.45);
        match mollify(&f, &kernel, 0.9, 1.0, &p) {
            Err(KineticError::OutOfSupport(_)) => {}
            other => panic!("expected OutOfSupport, got {other:?}"),
        }
    }

    #[test]
    fn change_of_variables_identity() {
        // ∫ f(γ^m(r;p)) χ dm = r^{-2} ∫ f(t+m0 r, y, w) χ(Φ^{-1}(y,w)) dy dw
        let f = gaussian_field();
        let kernel = BumpKernel::new(0.8).unwrap();
        let p = PhasePoint::scalar(0.05, 0.2, -0.1);
        let r = 0.6;
        let m0 = 1.0;
        let fv = ForcingPair::CriticalLogOscillation.eval(r).unwrap();

        let rule = kernel.axis_rule(48);
        let mut lhs = 0.0;
        for &(a, wa) in &rule {
            for &(b, wb) in &rule {
                let gamma = exp_map(&p, &TangentData::new(m0, vec![a], vec![b]).unwrap(), r).unwrap();
                lhs += wa * wb * f.value(&gamma).unwrap();
            }
        }

        // affine image coordinates: (y, w) = center + M (m1, m2)
        let center_x = p.x[0] + m0 * r * p.v[0];
        let center_v = p.v[0];
        let m11 = fv.g1;
        let m12 = m0 * fv.g2;
        let m21 = fv.dg1 / m0;
        let m22 = fv.dg2;
        let det = m11 * m22 - m12 * m21;
        let reach_x = kernel.sigma * (m11.abs() + m12.abs());
        let reach_v = kernel.sigma * (m21.abs() + m22.abs());
        let n_grid = 600;
        let hx = 2.0 * reach_x / n_grid as f64;
        let hv = 2.0 * reach_v / n_grid as f64;
        let mut rhs = 0.0;
        for iy in 0..n_grid {
            let dy = -reach_x + (iy as f64 + 0.5) * hx;
            for iw in 0..n_grid {
                let dw = -reach_v + (iw as f64 + 0.5) * hv;
                let m1 = (m22 * dy - m12 * dw) / det;
                let m2 = (-m21 * dy + m11 * dw) / det;
                let chi = kernel.value(&[m1], &[m2]);
                if chi == 0.0 {
                    continue;
                }
                let q = PhasePoint::scalar(p.t + m0 * r, center_x + dy, center_v + dw);
                rhs += f.value(&q).unwrap() * chi * hx * hv;
            }
        }
        rhs /= r * r;
        assert_relative_eq!(lhs, rhs, max_relative = 2e-3);
        assert_relative_eq!(det, r * r, max_relative = 1e-12);
    }

    #[test]
    fn commutation_constant_and_time_fields() {
        let kernel = BumpKernel::new(0.6).unwrap();
        let p = PhasePoint::scalar(0.1, -0.2, 0.5);
        let c = SampledField::everywhere(1, Smoothness::Smooth, |_, _, _| 1.7);
        let res = transport_commutation_check(&c, &kernel, 0.5, &p, 1e-2).unwrap();
        assert!(res <= 1e-12, "constant field residual {res}");
        let t_field = SampledField::everywhere(1, Smoothness::Smooth, |t, _, _| t);
        let res_t = transport_commutation_check(&t_field, &kernel, 0.5, &p, 1e-2).unwrap();
        assert!(res_t <= 1e-10, "linear-time residual {res_t}");
    }

    #[test]
    fn commutation_defect_closed_form_for_xv() {
        // f = x v at r = 1: defect = −(g1'(1)² ⟨m1²⟩ + g2'(1)² ⟨m2²⟩)
        let kernel = BumpKernel::new(0.7).unwrap();
        let f = SampledField::everywhere(1, Smoothness::Smooth, |_, x, v| x[0] * v[0]);
        let p = PhasePoint::scalar(0.0, 0.3, -0.2);
        let defect = transport_commutation_defect(&f, &kernel, 1.0, &p).unwrap();
        let mom = kernel.axis_second_moment(DEFAULT_QUAD_NODES);
        let want = -(2.25 * mom + mom);
        assert_relative_eq!(defect, want, max_relative = 1e-6);
    }

    #[test]
    fn commutation_residual_converges_to_defect_at_order_two() {
        let kernel = BumpKernel::new(0.6).unwrap();
        let f = gaussian_field();
        let p = PhasePoint::scalar(0.1, 0.25, 0.4);
        let r = 0.5;
        let defect = transport_commutation_defect(&f, &kernel, r, &p).unwrap().abs();
        let hs = [1e-2, 5e-3, 2.5e-3];
        let gaps: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let res = transport_commutation_check(&f, &kernel, r, &p, h).unwrap();
                (res - defect).abs()
            })
            .collect();
        let r1 = gaps[0] / gaps[1];
        let r2 = gaps[1] / gaps[2];
        assert!(
            (2.8..5.6).contains(&r1) && (2.8..5.6).contains(&r2),
            "defect-corrected halving ratios {r1:.2}, {r2:.2} (gaps {gaps:?})"
        );
    }

    #[test]
    fn norm_scaling_exponent_arithmetic() {
        assert_relative_eq!(expected_norm_scaling_slope(1, 6.0).unwrap(), -2.0 / 3.0);
        assert!(expected_norm_scaling_slope(1, 2.0).is_err());
        let near = expected_norm_scaling_slope(1, 2.0 + 1e-9).unwrap();
        assert!(near.abs() < 1e-9, "slope must vanish as q → 2⁺, got {near}");
        assert_relative_eq!(expected_norm_scaling_slope(2, 6.0).unwrap(), -4.0 / 3.0);
    }

    #[test]
    fn norm_scaling_slope_matches_lemma() {
        let kernel = BumpKernel::new(1.0).unwrap();
        let rs = numerics::logspace(1e-3, 1e-1, 6);
        let report = mollifier_norm_scaling(&kernel, 6.0, &rs, 96, 1.0).unwrap();
        assert_relative_eq!(report.expected_slope, -2.0 / 3.0);
        assert!(
            (report.fitted_slope - report.expected_slope).abs() <= 0.1,
            "fitted {} vs expected {}",
            report.fitted_slope,
            report.expected_slope
        );
        let csv = report.to_csv();
        assert!(csv.starts_with("r,lq_norm\n"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn integrated_bound_zero_field() {
        let f = SampledField::everywhere(1, Smoothness::Smooth, |_, _, _| 0.0);
        let kernel = BumpKernel::new(0.5).unwrap();
        let reports =
            integrated_mollifier_bound(&f, &kernel, -0.5, 3.0, 3.0, &[0.1], 24, (2.0, 2.0)).unwrap();
        assert_eq!(reports.len(), 1);
        assert!(reports[0].lhs_norm.abs() <= 1e-14);
    }

    #[test]
    fn integrated_bound_exponent_validation() {
        let f = gaussian_field();
        let kernel = BumpKernel::new(0.5).unwrap();
        assert!(matches!(
            integrated_mollifier_bound(&f, &kernel, -0.5, 3.0, 2.0, &[0.1], 16, (2.0, 2.0)),
            Err(KineticError::InvalidExponents(_))
        ));
        assert!(matches!(
            integrated_mollifier_bound(&f, &kernel, -0.6, 3.0, 3.0, &[0.1], 16, (2.0, 2.0)),
            Err(KineticError::InvalidExponents(_))
        ));
        // q just over the admissible edge keeps the integrability condition
        // with equality at k = −1/2, p = q = 3
        let theta = 1.0 / (1.0 / 3.0 + 0.5);
        let h = theta;
        assert_relative_eq!(-0.5 + 2.0 * (1.0 / theta - 1.0), -1.0 / h, epsilon = 1e-12);
    }

    #[test]
    fn integrated_bound_ratio_bounded_across_tau() {
        let f = gaussian_field();
        let kernel = BumpKernel::new(0.5).unwrap();
        let reports = integrated_mollifier_bound(
            &f,
            &kernel,
            -0.5,
            3.0,
            3.0,
            &[0.1, 0.2, 0.4],
            48,
            (3.0, 3.0),
        )
        .unwrap();
        let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max.is_finite() && min > 0.0);
        assert!(max / min <= 3.0, "ratios {ratios:?} spread too far");
        // at these exponents the τ power vanishes, so rhs is τ-independent
        assert_relative_eq!(reports[0].rhs_bound, reports[2].rhs_bound, max_relative = 1e-12);
    }

    #[test]
    fn integrated_bound_doubling_law() {
        let k = 0.0;
        let theta = 1.0 / (1.0 / 3.0 + 0.5);
        let h = theta;
        let r1 = integrated_rhs_bound(0.5, 1, k, theta, h, 0.1, 1.0);
        let r2 = integrated_rhs_bound(0.5, 1, k, theta, h, 0.2, 1.0);
        let expo = k + 2.0 * (1.0 / theta - 1.0) + 1.0 / h;
        assert_relative_eq!(r2 / r1, 2.0f64.powf(expo), max_relative = 1e-12);
    }
}
