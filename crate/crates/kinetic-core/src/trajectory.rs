//! Two-point kinetic trajectories driven by a pair of forcing functions:
//! structured matrices, the connection formula, and criticality diagnostics.
//!
//! The distinguished family is the logarithmic oscillation pair
//! `g1 = r^{3/2} cos(log r)`, `g2 = r^{3/2} sin(log r)`, whose Wronskian
//! determinant is exactly `r²` and whose inverse column scales like
//! `r^{-1/2}` — the critical rate. The energy-minimizing cubic family and
//! pure power pairs are provided for comparison; both miss criticality.

use crate::geometry::PhasePoint;
use crate::numerics::{leading_exponent, logspace};
use crate::{KineticError, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Values of both forcings and their first two derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingValues {
    pub g1: f64,
    pub dg1: f64,
    pub ddg1: f64,
    pub g2: f64,
    pub dg2: f64,
    pub ddg2: f64,
}

/// A forcing family `(g1, g2)` on `(0, ∞)`.
#[derive(Clone)]
pub enum ForcingPair {
    /// `r^{3/2} cos(log r)` and `r^{3/2} sin(log r)` — the critical family.
    CriticalLogOscillation,
    /// `g1 = r³/3`, `g2 = r²/2` — the action-functional minimizer.
    ActionMinimizer,
    /// Pure powers `g1 = r^{e1}`, `g2 = r^{e2}`.
    PowerPair { e1: f64, e2: f64 },
    /// Arbitrary user-supplied evaluator.
    Custom(Arc<dyn Fn(f64) -> ForcingValues + Send + Sync>),
}

impl std::fmt::Debug for ForcingPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl ForcingPair {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::CriticalLogOscillation => "critical-log-oscillation",
            Self::ActionMinimizer => "action-minimizer",
            Self::PowerPair { .. } => "power-pair",
            Self::Custom(_) => "custom",
        }
    }

    /// Closed-form evaluation of `(g1, g1', g1'', g2, g2', g2'')`.
    pub fn eval(&self, r: f64) -> Result<ForcingValues> {
        if r <= 0.0 {
            return Err(KineticError::InvalidArgument(format!(
                "forcings are defined for r > 0, got {r}"
            )));
        }
        Ok(match self {
            Self::CriticalLogOscillation => {
                let l = r.ln();
                let (s, c) = l.sin_cos();
                let r12 = r.sqrt();
                let r32 = r * r12;
                ForcingValues {
                    g1: r32 * c,
                    dg1: r12 * (1.5 * c - s),
                    ddg1: (-0.25 * c - 2.0 * s) / r12,
                    g2: r32 * s,
                    dg2: r12 * (1.5 * s + c),
                    ddg2: (2.0 * c - 0.25 * s) / r12,
                }
            }
            Self::ActionMinimizer => ForcingValues {
                g1: r * r * r / 3.0,
                dg1: r * r,
                ddg1: 2.0 * r,
                g2: r * r / 2.0,
                dg2: r,
                ddg2: 1.0,
            },
            Self::PowerPair { e1, e2 } => ForcingValues {
                g1: r.powf(*e1),
                dg1: e1 * r.powf(e1 - 1.0),
                ddg1: e1 * (e1 - 1.0) * r.powf(e1 - 2.0),
                g2: r.powf(*e2),
                dg2: e2 * r.powf(e2 - 1.0),
                ddg2: e2 * (e2 - 1.0) * r.powf(e2 - 2.0),
            },
            Self::Custom(f) => f(r),
        })
    }
}

/// A structured 2×2 matrix whose entries stand for `scalar · Id_n` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrix {
    /// Row-major scalar entries `[[a, b], [c, d]]`.
    pub entries: [[f64; 2]; 2],
    /// Block dimension: the full matrix is `2n × 2n`.
    pub dim_n: usize,
}

impl BlockMatrix {
    pub fn new(entries: [[f64; 2]; 2], dim_n: usize) -> Self {
        Self { entries, dim_n }
    }

    pub fn identity(dim_n: usize) -> Self {
        Self::new([[1.0, 0.0], [0.0, 1.0]], dim_n)
    }

    pub fn zero(dim_n: usize) -> Self {
        Self::new([[0.0, 0.0], [0.0, 0.0]], dim_n)
    }

    /// Determinant of the scalar 2×2 representative.
    pub fn det_scalar(&self) -> f64 {
        let [[a, b], [c, d]] = self.entries;
        a * d - b * c
    }

    /// Determinant of the full `2n × 2n` matrix: `(det_scalar)^n`.
    pub fn det_full(&self) -> f64 {
        self.det_scalar().powi(self.dim_n as i32)
    }

    pub fn mul(&self, rhs: &BlockMatrix) -> BlockMatrix {
        let a = &self.entries;
        let b = &rhs.entries;
        BlockMatrix::new(
            [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
            self.dim_n,
        )
    }

    pub fn sub(&self, rhs: &BlockMatrix) -> BlockMatrix {
        let a = &self.entries;
        let b = &rhs.entries;
        BlockMatrix::new(
            [
                [a[0][0] - b[0][0], a[0][1] - b[0][1]],
                [a[1][0] - b[1][0], a[1][1] - b[1][1]],
            ],
            self.dim_n,
        )
    }

    pub fn inverse(&self) -> Result<BlockMatrix> {
        let det = self.det_scalar();
        if det == 0.0 || !det.is_finite() {
            return Err(KineticError::Numerical(format!(
                "singular block matrix, det = {det}"
            )));
        }
        let [[a, b], [c, d]] = self.entries;
        Ok(BlockMatrix::new(
            [[d / det, -b / det], [-c / det, a / det]],
            self.dim_n,
        ))
    }

    /// Block action on a stacked pair `(x, v)` of length-`n` vectors.
    pub fn apply(&self, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let [[a, b], [c, d]] = self.entries;
        let xs = x.iter().zip(v).map(|(xi, vi)| a * xi + b * vi).collect();
        let vs = x.iter().zip(v).map(|(xi, vi)| c * xi + d * vi).collect();
        (xs, vs)
    }

    /// Euclidean norm of the second scalar column `(b, d)`.
    pub fn column2_norm(&self) -> f64 {
        let [[_, b], [_, d]] = self.entries;
        (b * b + d * d).sqrt()
    }
}

/// Wronskian `W(r) = [[g1, g2], [g1', g2']]` as a block matrix.
pub fn wronskian(forcing: &ForcingPair, r: f64, n: usize) -> Result<BlockMatrix> {
    let g = forcing.eval(r)?;
    Ok(BlockMatrix::new([[g.g1, g.g2], [g.dg1, g.dg2]], n))
}

/// Closed-form inverse of the critical-family Wronskian.
///
/// With `L = log r`: row one `(r^{-3/2}(3/2·sin L + cos L), −r^{-1/2} sin L)`,
/// row two `(−r^{-3/2}(3/2·cos L − sin L), r^{-1/2} cos L)`.
pub fn wronskian_inverse(r: f64, n: usize) -> Result<BlockMatrix> {
    if r <= 0.0 {
        return Err(KineticError::InvalidArgument(format!(
            "wronskian_inverse needs r > 0, got {r}"
        )));
    }
    let l = r.ln();
    let (s, c) = l.sin_cos();
    let rm12 = 1.0 / r.sqrt();
    let rm32 = rm12 / r;
    Ok(BlockMatrix::new(
        [
            [rm32 * (1.5 * s + c), -rm12 * s],
            [-rm32 * (1.5 * c - s), rm12 * c],
        ],
        n,
    ))
}

/// Scaling matrix `D_δ = diag(δ·Id, Id)`.
pub fn scaling_matrix(delta: f64, n: usize) -> Result<BlockMatrix> {
    if delta == 0.0 {
        return Err(KineticError::InvalidArgument(
            "scaling matrix is singular at δ = 0".into(),
        ));
    }
    Ok(BlockMatrix::new([[delta, 0.0], [0.0, 1.0]], n))
}

/// Galilean shear `E_δ(r) = [[Id, δr·Id], [0, Id]]`.
pub fn galilean_matrix(delta: f64, r: f64, n: usize) -> BlockMatrix {
    BlockMatrix::new([[1.0, delta * r], [0.0, 1.0]], n)
}

/// A two-point trajectory with parameters solved from the endpoints.
#[derive(Debug, Clone)]
pub struct TrajectoryK2 {
    pub p0: PhasePoint,
    pub p1: PhasePoint,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub forcing: ForcingPair,
}

impl TrajectoryK2 {
    pub fn delta(&self) -> f64 {
        self.p1.t - self.p0.t
    }

    pub fn dim(&self) -> usize {
        self.p0.dim()
    }
}

/// Point and tangent data returned by [`eval_trajectory`].
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub point: PhasePoint,
    /// `(γ̇_t, γ̇_v)`; absent at `r = 0` where the tangent limit does not exist.
    pub tangent: Option<(f64, Vec<f64>)>,
}

/// Solves the connection problem for the critical family.
pub fn connect(p0: &PhasePoint, p1: &PhasePoint) -> Result<TrajectoryK2> {
    connect_with(ForcingPair::CriticalLogOscillation, p0, p1)
}

/// Solves `(m1, m2) = W(1)^{-1} D_δ^{-1} [(x1, v1) − E_δ(1)(x0, v0)]` for an
/// arbitrary forcing family with invertible `W(1)`.
pub fn connect_with(
    forcing: ForcingPair,
    p0: &PhasePoint,
    p1: &PhasePoint,
) -> Result<TrajectoryK2> {
    if p0.dim() != p1.dim() {
        return Err(KineticError::DimensionMismatch(format!(
            "{} vs {}",
            p0.dim(),
            p1.dim()
        )));
    }
    let delta = p1.t - p0.t;
    if delta == 0.0 {
        return Err(KineticError::ConnectionImpossible);
    }
    let n = p0.dim();
    let w1 = wronskian(&forcing, 1.0, n)?;
    let w1_inv = w1.inverse().map_err(|_| {
        KineticError::NoTrajectoryFamily("W(1) is singular for this forcing pair".into())
    })?;
    let (ex, ev) = galilean_matrix(delta, 1.0, n).apply(&p0.x, &p0.v);
    let rx: Vec<f64> = p1.x.iter().zip(&ex).map(|(a, b)| a - b).collect();
    let rv: Vec<f64> = p1.v.iter().zip(&ev).map(|(a, b)| a - b).collect();
    // D_δ^{-1} then W(1)^{-1}
    let rx: Vec<f64> = rx.iter().map(|a| a / delta).collect();
    let (m1, m2) = w1_inv.apply(&rx, &rv);
    Ok(TrajectoryK2 {
        p0: p0.clone(),
        p1: p1.clone(),
        m1,
        m2,
        forcing,
    })
}

/// Evaluates the trajectory and its tangent at `r ∈ [0, 1]`.
///
/// `γ_t(r) = t0 + rδ`, `γ_x(r) = x0 + δr·v0 + δ(g1 m1 + g2 m2)`,
/// `γ_v(r) = v0 + g1' m1 + g2' m2`; endpoints are returned exactly.
pub fn eval_trajectory(traj: &TrajectoryK2, r: f64) -> Result<TrajectorySample> {
    if !(0.0..=1.0).contains(&r) {
        return Err(KineticError::InvalidArgument(format!(
            "trajectory parameter must lie in [0, 1], got {r}"
        )));
    }
    if r == 0.0 {
        return Ok(TrajectorySample {
            point: traj.p0.clone(),
            tangent: None,
        });
    }
    let delta = traj.delta();
    let g = traj.forcing.eval(r)?;
    let point = if r == 1.0 {
        traj.p1.clone()
    } else {
        let t = traj.p0.t + r * delta;
        let x = traj
            .p0
            .x
            .iter()
            .zip(&traj.p0.v)
            .zip(traj.m1.iter().zip(&traj.m2))
            .map(|((x0, v0), (m1, m2))| x0 + delta * r * v0 + delta * (g.g1 * m1 + g.g2 * m2))
            .collect();
        let v = traj
            .p0
            .v
            .iter()
            .zip(traj.m1.iter().zip(&traj.m2))
            .map(|(v0, (m1, m2))| v0 + g.dg1 * m1 + g.dg2 * m2)
            .collect();
        PhasePoint { t, x, v }
    };
    let dv = traj
        .m1
        .iter()
        .zip(&traj.m2)
        .map(|(m1, m2)| g.ddg1 * m1 + g.ddg2 * m2)
        .collect();
    Ok(TrajectorySample {
        point,
        tangent: Some((delta, dv)),
    })
}

/// Residual of the kinetic relation `γ̇_x − γ̇_t·γ_v` at `r`, with both sides
/// assembled from closed-form derivatives.
pub fn kinetic_relation_residual(traj: &TrajectoryK2, r: f64) -> Result<f64> {
    let g = traj.forcing.eval(r)?;
    let delta = traj.delta();
    let mut worst = 0.0f64;
    for i in 0..traj.dim() {
        let dx = delta * traj.p0.v[i] + delta * (g.dg1 * traj.m1[i] + g.dg2 * traj.m2[i]);
        let gv = traj.p0.v[i] + g.dg1 * traj.m1[i] + g.dg2 * traj.m2[i];
        worst = worst.max((dx - delta * gv).abs());
    }
    Ok(worst)
}

/// The normalized endpoint matrices `A_δ(r) = D_δ W(r) W(1)^{-1} D_δ^{-1}`
/// and `B_δ(r) = E_δ(r) − A_δ(r) E_δ(1)`; endpoint values are exact.
pub fn matrices_ab(
    forcing: &ForcingPair,
    delta: f64,
    r: f64,
    n: usize,
) -> Result<(BlockMatrix, BlockMatrix)> {
    if delta == 0.0 {
        return Err(KineticError::InvalidArgument("δ must be nonzero".into()));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(KineticError::InvalidArgument(format!(
            "r must lie in [0, 1], got {r}"
        )));
    }
    if r == 0.0 {
        return Ok((BlockMatrix::zero(n), BlockMatrix::identity(n)));
    }
    if r == 1.0 {
        return Ok((BlockMatrix::identity(n), BlockMatrix::zero(n)));
    }
    let d = scaling_matrix(delta, n)?;
    let d_inv = d.inverse()?;
    let w_r = wronskian(forcing, r, n)?;
    let w1_inv = wronskian(forcing, 1.0, n)?.inverse().map_err(|_| {
        KineticError::NoTrajectoryFamily("W(1) is singular for this forcing pair".into())
    })?;
    let a = d.mul(&w_r).mul(&w1_inv).mul(&d_inv);
    let b = galilean_matrix(delta, r, n).sub(&a.mul(&galilean_matrix(delta, 1.0, n)));
    Ok((a, b))
}

/// Inverse of `A_δ(r)` assembled blockwise as `D W(1) W(r)^{-1} D^{-1}`.
pub fn matrix_a_inverse(
    forcing: &ForcingPair,
    delta: f64,
    r: f64,
    n: usize,
) -> Result<BlockMatrix> {
    let d = scaling_matrix(delta, n)?;
    let d_inv = d.inverse()?;
    let w1 = wronskian(forcing, 1.0, n)?;
    let wr_inv = wronskian(forcing, r, n)?.inverse()?;
    Ok(d.mul(&w1).mul(&wr_inv).mul(&d_inv))
}

/// The endpoint-normalized comparison matrix `D W(r)^{-1} W(1) D^{-1}`
/// displayed for the action family (entries `(3r−2)/r³`, …).
pub fn endpoint_map_matrix(
    forcing: &ForcingPair,
    delta: f64,
    r: f64,
    n: usize,
) -> Result<BlockMatrix> {
    let d = scaling_matrix(delta, n)?;
    let d_inv = d.inverse()?;
    let w1 = wronskian(forcing, 1.0, n)?;
    let wr_inv = wronskian(forcing, r, n)?.inverse()?;
    Ok(d.mul(&wr_inv).mul(&w1).mul(&d_inv))
}

/// Numeric floor for criticality sups; below this radius the log amplifies
/// rounding in the oscillation argument without changing any verdict.
pub const CRITICALITY_R_FLOOR: f64 = 1e-8;

/// Verdict cap: the sup of `r^{1/2}|(A^{-1})_{·;2}|` must stay below
/// `100·(1+|δ|)` for a family to be declared critical.
pub fn criticality_cap(delta: f64) -> f64 {
    100.0 * (1.0 + delta.abs())
}

/// Report of the criticality diagnostics for one forcing family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub family: String,
    pub delta: f64,
    pub dim_n: usize,
    /// Fitted log-log slope of `det A(r)`; `2n` for a critical family.
    pub det_exponent_fit: f64,
    /// Sup over `r ∈ [1e−8, 1]` of `r^{1/2}·max_i |(A^{-1})_{i;2}|`.
    pub inverse_column_sup: f64,
    /// Fitted leading exponent of `|(A(r)^{-1})_{·;2}|` (criticality: −1/2).
    pub inverse_column_exponent: f64,
    /// Fitted leading exponent of the second column of `D W(r)^{-1} W(1) D^{-1}`.
    pub endpoint_map_exponent: f64,
    /// Largest `r0` with `det B ≥ 1/2` on `(0, r0]` (no analytic interval is
    /// available; the value is recorded per δ).
    pub det_b_half_radius: f64,
    pub verdict_critical: bool,
}

/// Runs the full criticality diagnostic suite for one family.
pub fn criticality_profile(
    forcing: &ForcingPair,
    delta: f64,
    n: usize,
) -> Result<CriticalityReport> {
    if delta == 0.0 {
        return Err(KineticError::InvalidArgument("δ must be nonzero".into()));
    }
    let det_exponent_fit = leading_exponent(|r| {
        matrices_ab(forcing, delta, r, n)
            .map(|(a, _)| a.det_full())
            .unwrap_or(f64::NAN)
    });
    let inverse_column_exponent = leading_exponent(|r| {
        matrix_a_inverse(forcing, delta, r, n)
            .map(|m| m.column2_norm())
            .unwrap_or(f64::NAN)
    });
    let endpoint_map_exponent = leading_exponent(|r| {
        endpoint_map_matrix(forcing, delta, r, n)
            .map(|m| m.column2_norm())
            .unwrap_or(f64::NAN)
    });
    let mut sup = 0.0f64;
    for r in logspace(CRITICALITY_R_FLOOR, 1.0, 2000) {
        let inv = matrix_a_inverse(forcing, delta, r, n)?;
        let [[_, b], [_, d]] = inv.entries;
        sup = sup.max(r.sqrt() * b.abs().max(d.abs()));
    }
    let mut det_b_half_radius = 0.0;
    for r in logspace(CRITICALITY_R_FLOOR, 1.0, 2000) {
        let (_, bm) = matrices_ab(forcing, delta, r, n)?;
        if bm.det_scalar().powi(n as i32) >= 0.5 {
            det_b_half_radius = r;
        } else {
            break;
        }
    }
    let expected = 2.0 * n as f64;
    let verdict_critical = (det_exponent_fit - expected).abs() <= 0.01 * expected
        && sup.is_finite()
        && sup <= criticality_cap(delta);
    Ok(CriticalityReport {
        family: forcing.tag().to_string(),
        delta,
        dim_n: n,
        det_exponent_fit,
        inverse_column_sup: sup,
        inverse_column_exponent,
        endpoint_map_exponent,
        det_b_half_radius,
        verdict_critical,
    })
}

/// CSV rows `(r, t, x…, v…, dv…)` sampled along a trajectory.
pub fn trajectory_csv(traj: &TrajectoryK2, samples: usize) -> Result<String> {
    let n = traj.dim();
    let mut out = String::from("r,t");
    for i in 0..n {
        out.push_str(&format!(",x{i}"));
    }
    for i in 0..n {
        out.push_str(&format!(",v{i}"));
    }
    for i in 0..n {
        out.push_str(&format!(",dv{i}"));
    }
    out.push('\n');
    for k in 0..samples {
        let r = k as f64 / (samples as f64 - 1.0);
        let s = eval_trajectory(traj, r)?;
        out.push_str(&format!("{r},{}", s.point.t));
        for x in &s.point.x {
            out.push_str(&format!(",{x}"));
        }
        for v in &s.point.v {
            out.push_str(&format!(",{v}"));
        }
        match &s.tangent {
            Some((_, dv)) => {
                for d in dv {
                    out.push_str(&format!(",{d}"));
                }
            }
            None => {
                for _ in 0..n {
                    out.push_str(",");
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}
