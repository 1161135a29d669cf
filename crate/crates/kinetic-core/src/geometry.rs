//! Kinetic group structure on `R^{1+2n}`: composition, inversion, dilations,
//! anisotropic cylinders, and the kinetic Hölder seminorm estimator.

use crate::{KineticError, Result};
use serde::{Deserialize, Serialize};

/// A point `(t, x, v)` of the kinetic phase space `R^{1+2n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhasePoint {
    pub fn new(t: f64, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() || x.is_empty() {
            return Err(KineticError::DimensionMismatch(format!(
                "x has length {}, v has length {}",
                x.len(),
                v.len()
            )));
        }
        Ok(Self { t, x, v })
    }

    /// Scalar shorthand for `n = 1`.
    pub fn scalar(t: f64, x: f64, v: f64) -> Self {
        Self { t, x: vec![x], v: vec![v] }
    }

    pub fn origin(n: usize) -> Self {
        Self { t: 0.0, x: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Group law `(t1,x1,v1) ∘ (t2,x2,v2) = (t1+t2, x1+x2+t2·v1, v1+v2)`.
pub fn group_compose(p: &PhasePoint, q: &PhasePoint) -> Result<PhasePoint> {
    if p.dim() != q.dim() {
        return Err(KineticError::DimensionMismatch(format!(
            "{} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    let x = p
        .x
        .iter()
        .zip(&q.x)
        .zip(&p.v)
        .map(|((a, b), v)| a + b + q.t * v)
        .collect();
    let v = p.v.iter().zip(&q.v).map(|(a, b)| a + b).collect();
    Ok(PhasePoint { t: p.t + q.t, x, v })
}

/// Group inverse `(t,x,v)^{-1} = (−t, −x + t·v, −v)`.
pub fn group_inverse(p: &PhasePoint) -> PhasePoint {
    PhasePoint {
        t: -p.t,
        x: p.x.iter().zip(&p.v).map(|(x, v)| -x + p.t * v).collect(),
        v: p.v.iter().map(|v| -v).collect(),
    }
}

/// Kinetic dilation `δ_r(t,x,v) = (r²t, r³x, rv)`.
pub fn dilate(r: f64, p: &PhasePoint) -> Result<PhasePoint> {
    if r <= 0.0 {
        return Err(KineticError::InvalidArgument(format!(
            "dilation ratio must be positive, got {r}"
        )));
    }
    Ok(PhasePoint {
        t: r * r * p.t,
        x: p.x.iter().map(|x| r.powi(3) * x).collect(),
        v: p.v.iter().map(|v| r * v).collect(),
    })
}

/// Time orientation of a kinetic cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CylinderKind {
    Backward,
    Forward,
    TwoSided,
}

/// Anisotropic cylinder with time radius `r1²`, slanted position radius
/// `r2³`, and velocity radius `r3` around its center.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KineticCylinder {
    pub center: PhasePoint,
    pub radii: (f64, f64, f64),
    pub kind: CylinderKind,
}

impl KineticCylinder {
    pub fn new(center: PhasePoint, radii: (f64, f64, f64), kind: CylinderKind) -> Result<Self> {
        if radii.0 <= 0.0 || radii.1 <= 0.0 || radii.2 <= 0.0 {
            return Err(KineticError::InvalidArgument(
                "cylinder radii must be strictly positive".into(),
            ));
        }
        Ok(Self { center, radii, kind })
    }

    /// Uniform radius `r` in all three slots.
    pub fn uniform(center: PhasePoint, r: f64, kind: CylinderKind) -> Result<Self> {
        Self::new(center, (r, r, r), kind)
    }

    /// Lebesgue volume of the cylinder in `R^{1+2n}` (boxes in x and v use
    /// the Euclidean ball only through the membership test; the volume here
    /// is the product of the time extent and the ball volumes).
    pub fn volume(&self) -> f64 {
        let n = self.center.dim();
        let time = match self.kind {
            CylinderKind::TwoSided => 2.0 * self.radii.0 * self.radii.0,
            _ => self.radii.0 * self.radii.0,
        };
        time * ball_volume(n, self.radii.1.powi(3)) * ball_volume(n, self.radii.2)
    }
}

/// Volume of the Euclidean ball of radius `r` in `R^n`.
pub fn ball_volume(n: usize, r: f64) -> f64 {
    let unit = match n {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => {
            let k = n as f64;
            std::f64::consts::PI.powf(k / 2.0) / gamma_half_int(n)
        }
    };
    unit * r.powi(n as i32)
}

/// Γ(n/2 + 1) for integer n ≥ 1.
fn gamma_half_int(n: usize) -> f64 {
    let mut z = n as f64 / 2.0 + 1.0;
    let mut acc = 1.0;
    while z > 1.5 {
        z -= 1.0;
        acc *= z;
    }
    if (z - 1.0).abs() < 1e-12 {
        acc
    } else {
        acc * 0.5 * std::f64::consts::PI.sqrt()
    }
}

/// Strict-inequality membership test following the cylinder definitions.
pub fn cylinder_contains(c: &KineticCylinder, p: &PhasePoint) -> bool {
    if c.center.dim() != p.dim() {
        return false;
    }
    let dt = p.t - c.center.t;
    let (r1, r2, r3) = c.radii;
    let time_ok = match c.kind {
        CylinderKind::Backward => -r1 * r1 < dt && dt < 0.0,
        CylinderKind::Forward => 0.0 < dt && dt < r1 * r1,
        CylinderKind::TwoSided => dt.abs() < r1 * r1,
    };
    if !time_ok {
        return false;
    }
    let slant: Vec<f64> = p
        .x
        .iter()
        .zip(&c.center.x)
        .zip(&c.center.v)
        .map(|((x, x0), v0)| x - x0 - dt * v0)
        .collect();
    let dv: Vec<f64> = p.v.iter().zip(&c.center.v).map(|(v, v0)| v - v0).collect();
    norm(&slant) < r2.powi(3) && norm(&dv) < r3
}

/// Sample of function values used by the kinetic Hölder estimator.
#[derive(Debug, Clone)]
pub struct HolderSample {
    pub points: Vec<PhasePoint>,
    pub values: Vec<f64>,
    pub alpha: f64,
}

impl HolderSample {
    pub fn new(points: Vec<PhasePoint>, values: Vec<f64>, alpha: f64) -> Result<Self> {
        if points.len() != values.len() {
            return Err(KineticError::DimensionMismatch(
                "points and values must have equal length".into(),
            ));
        }
        if !(0.0 < alpha && alpha <= 1.0) {
            return Err(KineticError::InvalidArgument(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(Self { points, values, alpha })
    }
}

/// Kinetic quasi-distance `|x−y−(t−s)v|^{1/3} + |v−w| + |t−s|^{1/2}` for the
/// ordered pair `(p, q)`; the slant direction uses `v` of the first point.
pub fn kinetic_distance(p: &PhasePoint, q: &PhasePoint) -> f64 {
    let dt = p.t - q.t;
    let slant: Vec<f64> = p
        .x
        .iter()
        .zip(&q.x)
        .zip(&p.v)
        .map(|((x, y), v)| x - y - dt * v)
        .collect();
    let dv: Vec<f64> = p.v.iter().zip(&q.v).map(|(a, b)| a - b).collect();
    norm(&slant).powf(1.0 / 3.0) + norm(&dv) + dt.abs().sqrt()
}

/// Default cap on the number of sample points the seminorm estimator visits.
pub const HOLDER_POINT_CAP: usize = 5000;

/// Max over ordered pairs of `|f(p) − f(q)| / d(p,q)^α`.
pub fn kinetic_holder_seminorm(sample: &HolderSample) -> Result<f64> {
    kinetic_holder_seminorm_capped(sample, HOLDER_POINT_CAP)
}

/// Seminorm over the first `cap` points of the sample.
pub fn kinetic_holder_seminorm_capped(sample: &HolderSample, cap: usize) -> Result<f64> {
    let m = sample.points.len().min(cap);
    if m < 2 {
        return Err(KineticError::InvalidArgument(
            "at least two sample points required".into(),
        ));
    }
    let mut best = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let d = kinetic_distance(&sample.points[i], &sample.points[j]);
            let df = (sample.values[i] - sample.values[j]).abs();
            if d == 0.0 {
                if df > 0.0 {
                    return Err(KineticError::Numerical(
                        "coincident points with distinct values: seminorm infinite".into(),
                    ));
                }
                continue;
            }
            best = best.max(df / d.powf(sample.alpha));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn compose_hand_example() {
        let p = PhasePoint::scalar(1.0, 2.0, 3.0);
        let q = PhasePoint::scalar(4.0, 5.0, 6.0);
        let r = group_compose(&p, &q).unwrap();
        assert_eq!(r, PhasePoint::scalar(5.0, 19.0, 9.0));
    }

    #[test]
    fn identity_and_inverse() {
        let p = PhasePoint::scalar(1.3, -0.4, 2.2);
        let id = PhasePoint::origin(1);
        assert_eq!(group_compose(&p, &id).unwrap(), p);
        let inv = group_inverse(&p);
        let z = group_compose(&p, &inv).unwrap();
        assert!(z.t.abs() < 1e-14 && z.x[0].abs() < 1e-14 && z.v[0].abs() < 1e-14);
    }

    #[test]
    fn inverse_hand_example() {
        let p = PhasePoint::scalar(1.0, 0.0, 1.0);
        assert_eq!(group_inverse(&p), PhasePoint::scalar(-1.0, 1.0, -1.0));
    }

    #[test]
    fn dilation_examples() {
        let p = PhasePoint::scalar(1.0, 1.0, 1.0);
        let d = dilate(2.0, &p).unwrap();
        assert_eq!(d, PhasePoint::scalar(4.0, 8.0, 2.0));
        assert_eq!(dilate(1.0, &p).unwrap(), p);
        assert!(dilate(0.0, &p).is_err());
    }

    #[test]
    fn backward_cylinder_membership() {
        let q = KineticCylinder::uniform(PhasePoint::origin(1), 1.0, CylinderKind::Backward)
            .unwrap();
        assert!(cylinder_contains(&q, &PhasePoint::scalar(-0.5, 0.0, 0.0)));
        assert!(!cylinder_contains(&q, &PhasePoint::scalar(0.5, 0.0, 0.0)));
        assert!(cylinder_contains(&q, &PhasePoint::scalar(-0.5, 0.9, 0.0)));
        assert!(!cylinder_contains(&q, &PhasePoint::scalar(-0.5, 1.1, 0.0)));
        // boundary excluded
        assert!(!cylinder_contains(&q, &PhasePoint::scalar(0.0, 0.0, 0.0)));
    }

    #[test]
    fn forward_and_two_sided_membership() {
        let f =
            KineticCylinder::uniform(PhasePoint::origin(1), 1.0, CylinderKind::Forward).unwrap();
        assert!(cylinder_contains(&f, &PhasePoint::scalar(0.5, 0.0, 0.0)));
        assert!(!cylinder_contains(&f, &PhasePoint::scalar(-0.5, 0.0, 0.0)));
        let b =
            KineticCylinder::uniform(PhasePoint::origin(1), 1.0, CylinderKind::TwoSided).unwrap();
        assert!(cylinder_contains(&b, &PhasePoint::scalar(0.5, 0.0, 0.0)));
        assert!(cylinder_contains(&b, &PhasePoint::scalar(-0.5, 0.0, 0.0)));
    }

    #[test]
    fn slanted_membership_follows_center_velocity() {
        let c = KineticCylinder::uniform(
            PhasePoint::scalar(0.0, 0.0, 2.0),
            0.5,
            CylinderKind::Backward,
        )
        .unwrap();
        // at t = -0.2 the slanted center sits at x = -0.4
        assert!(cylinder_contains(&c, &PhasePoint::scalar(-0.2, -0.4, 2.0)));
        assert!(!cylinder_contains(&c, &PhasePoint::scalar(-0.2, -0.2, 2.0)));
    }

    #[test]
    fn holder_constant_is_zero() {
        let pts = vec![
            PhasePoint::scalar(0.0, 0.0, 0.0),
            PhasePoint::scalar(0.5, 0.2, -0.3),
            PhasePoint::scalar(-1.0, 1.0, 2.0),
        ];
        let s = HolderSample::new(pts, vec![7.0, 7.0, 7.0], 0.5).unwrap();
        assert_eq!(kinetic_holder_seminorm(&s).unwrap(), 0.0);
    }

    #[test]
    fn holder_single_pair() {
        let s = HolderSample::new(
            vec![PhasePoint::scalar(0.0, 0.0, 0.0), PhasePoint::scalar(1.0, 0.0, 0.0)],
            vec![0.0, 2.0],
            1.0,
        )
        .unwrap();
        assert_relative_eq!(kinetic_holder_seminorm(&s).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn holder_velocity_slice_ratio_is_one() {
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        for i in 0..40 {
            let v = -1.0 + 2.0 * i as f64 / 39.0;
            pts.push(PhasePoint::scalar(0.3, 0.7, v));
            vals.push(v);
        }
        let s = HolderSample::new(pts, vals, 1.0).unwrap();
        assert_relative_eq!(kinetic_holder_seminorm(&s).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn holder_coincident_points_flagged() {
        let s = HolderSample::new(
            vec![PhasePoint::scalar(0.0, 0.0, 0.0), PhasePoint::scalar(0.0, 0.0, 0.0)],
            vec![0.0, 1.0],
            1.0,
        )
        .unwrap();
        assert!(kinetic_holder_seminorm(&s).is_err());
    }

    #[test]
    fn distance_is_asymmetric() {
        let p = PhasePoint::scalar(1.0, 0.0, 3.0);
        let q = PhasePoint::scalar(0.0, 1.0, 0.0);
        assert!((kinetic_distance(&p, &q) - kinetic_distance(&q, &p)).abs() > 1e-6);
    }
}
