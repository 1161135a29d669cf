//! Higher-order kinetic trajectories: the length-`k` commutator cascade
//! `ẋ^j = δ·x^{j+1}` driven by `k` logarithmic trigonometric forcings, with
//! coordinate normalization and the building decomposition for unequal block
//! dimensions.

use crate::{KineticError, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Cascade model: `k` levels with nondecreasing dimensions `d1 ≤ … ≤ dk`
/// and full-rank coupling matrices `b_j` of shape `d_j × d_{j+1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub k: usize,
    pub dims: Vec<usize>,
    /// Row-major `d_j × d_{j+1}` matrices, `j = 1..k-1`.
    pub b_matrices: Vec<Vec<Vec<f64>>>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.dims.len() != self.k {
            return Err(KineticError::InvalidArgument(format!(
                "expected {} dimension entries",
                self.k
            )));
        }
        if self.dims.windows(2).any(|w| w[0] > w[1]) || self.dims.iter().any(|&d| d == 0) {
            return Err(KineticError::InvalidArgument(
                "dimensions must be positive and nondecreasing".into(),
            ));
        }
        if self.b_matrices.len() + 1 != self.k {
            return Err(KineticError::InvalidArgument(format!(
                "expected {} coupling matrices",
                self.k - 1
            )));
        }
        for (j, b) in self.b_matrices.iter().enumerate() {
            if b.len() != self.dims[j] || b.iter().any(|row| row.len() != self.dims[j + 1]) {
                return Err(KineticError::DimensionMismatch(format!(
                    "b_{} must be {}×{}",
                    j + 1,
                    self.dims[j],
                    self.dims[j + 1]
                )));
            }
        }
        Ok(())
    }

    /// Equal-dimension model with `b_j = Id` (the canonical cascade).
    pub fn canonical(k: usize, n: usize) -> Self {
        let dims = vec![n; k];
        let b = (0..k.saturating_sub(1))
            .map(|_| {
                (0..n)
                    .map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        Self { k, dims, b_matrices: b }
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    fn b_matrix(&self, j: usize) -> DMatrix<f64> {
        let rows = self.dims[j];
        let cols = self.dims[j + 1];
        DMatrix::from_fn(rows, cols, |r, c| self.b_matrices[j][r][c])
    }
}

/// `Q = 2 + Σ_j d_j (1 + 2(k−j))`; reduces to `2 + k²n` for equal dims.
pub fn homogeneous_dimension(spec: &ModelSpec) -> Result<usize> {
    spec.validate()?;
    let k = spec.k;
    Ok(2 + spec
        .dims
        .iter()
        .enumerate()
        .map(|(idx, d)| d * (1 + 2 * (k - (idx + 1))))
        .sum::<usize>())
}

/// Change-of-basis matrices `A_1,…,A_k` with `A_j^{-1} b_j A_{j+1} = [Id | 0]`.
///
/// `A_1 = Id`; each `A_{j+1}` stacks the right inverse `b_jᵀ(b_j b_jᵀ)^{-1} A_j`
/// (mapping onto the orthogonal complement of `ker b_j`) next to an
/// orthonormal kernel basis.
pub fn normalize_coordinates(spec: &ModelSpec) -> Result<Vec<DMatrix<f64>>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.k);
    out.push(DMatrix::identity(spec.dims[0], spec.dims[0]));
    for j in 0..spec.k - 1 {
        let b = spec.b_matrix(j);
        let gram = &b * b.transpose();
        let gram_inv = gram.clone().try_inverse().ok_or_else(|| {
            KineticError::NormalizationImpossible(format!("b_{} is rank deficient", j + 1))
        })?;
        let right_inv = b.transpose() * gram_inv;
        let range_part = &right_inv * &out[j];
        let kernel = kernel_basis(&b);
        let dj1 = spec.dims[j + 1];
        let mut a_next = DMatrix::zeros(dj1, dj1);
        a_next.view_mut((0, 0), (dj1, spec.dims[j])).copy_from(&range_part);
        for (c, kv) in kernel.iter().enumerate() {
            a_next.set_column(spec.dims[j] + c, kv);
        }
        if a_next.clone().try_inverse().is_none() {
            return Err(KineticError::NormalizationImpossible(format!(
                "assembled A_{} is singular",
                j + 2
            )));
        }
        out.push(a_next);
    }
    Ok(out)
}

/// Orthonormal basis of `ker b` via Gram–Schmidt on the kernel projector.
fn kernel_basis(b: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let n = b.ncols();
    let gram = b * b.transpose();
    let gram_inv = match gram.try_inverse() {
        Some(g) => g,
        None => return Vec::new(),
    };
    let projector = DMatrix::identity(n, n) - b.transpose() * gram_inv * b;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let want = n - b.nrows();
    for c in 0..n {
        if basis.len() == want {
            break;
        }
        let mut v = projector.column(c).into_owned();
        for u in &basis {
            let d = v.dot(u);
            v -= u * d;
        }
        let norm = v.norm();
        if norm > 1e-10 {
            basis.push(v / norm);
        }
    }
    basis
}

/// A finite combination `r^p Σ_q (a_q cos(q·log r) + b_q sin(q·log r))` with
/// exact term-by-term differentiation.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTrigPoly {
    pub power: f64,
    /// `(frequency, cos coefficient, sin coefficient)` triples.
    pub terms: Vec<(f64, f64, f64)>,
}

impl LogTrigPoly {
    pub fn eval(&self, r: f64) -> f64 {
        let l = r.ln();
        let osc: f64 = self
            .terms
            .iter()
            .map(|(q, a, b)| a * (q * l).cos() + b * (q * l).sin())
            .sum();
        r.powf(self.power) * osc
    }

    /// `d/dr [r^p (a cos qL + b sin qL)] = r^{p−1}[(pa+qb) cos qL + (pb−qa) sin qL]`.
    pub fn derivative(&self) -> LogTrigPoly {
        let p = self.power;
        LogTrigPoly {
            power: p - 1.0,
            terms: self
                .terms
                .iter()
                .map(|(q, a, b)| (*q, p * a + q * b, p * b - q * a))
                .collect(),
        }
    }
}

/// The `k` trigonometric forcings `g_i(r) = r^{k−1/2} g̃_i(log r)` with
/// `g̃` drawn from `{1} ∪ {cos(qs), sin(qs) : q ≤ ℓ}`, `ℓ = ⌊k/2⌋`.
pub fn trig_family(k: usize) -> Vec<LogTrigPoly> {
    assert!(k >= 1);
    let power = k as f64 - 0.5;
    let ell = k / 2;
    let mut fam = Vec::with_capacity(k);
    if k % 2 == 1 {
        fam.push(LogTrigPoly { power, terms: vec![(0.0, 1.0, 0.0)] });
    }
    for q in 1..=ell {
        fam.push(LogTrigPoly { power, terms: vec![(q as f64, 1.0, 0.0)] });
    }
    for q in 1..=ell {
        fam.push(LogTrigPoly { power, terms: vec![(q as f64, 0.0, 1.0)] });
    }
    fam
}

/// Derivative table `table[i][j] = g_i^{(j)}` for `j = 0..k-1` (plus one more
/// order for tangents).
fn derivative_table(k: usize) -> Vec<Vec<LogTrigPoly>> {
    trig_family(k)
        .into_iter()
        .map(|g| {
            let mut chain = vec![g];
            for _ in 0..k {
                chain.push(chain.last().unwrap().derivative());
            }
            chain
        })
        .collect()
}

/// The `k×k` Wronskian `W(r)_{j,i} = g_i^{(j−1)}(r)` of the trig family.
pub fn wronskian_k_matrix(k: usize, r: f64) -> Result<DMatrix<f64>> {
    if r <= 0.0 {
        return Err(KineticError::InvalidArgument(format!(
            "Wronskian needs r > 0, got {r}"
        )));
    }
    let table = derivative_table(k);
    Ok(DMatrix::from_fn(k, k, |row, col| table[col][row].eval(r)))
}

/// Closed form for `|det W(r)|` with `d_k` blocks: `C(k)^{d_k} · r^{d_k k²/2}`
/// where `C = (1!·3!···(2ℓ−1)!)²/ℓ!` for even `k = 2ℓ`.
///
/// For odd `k = 2ℓ+1` the Laplace expansion in the constant column leaves the
/// once-differentiated pair family, whose Wronskian carries an extra `∏ q² =
/// (ℓ!)²`, so the odd constant is `(1!·3!···(2ℓ−1)!)²·ℓ!`. The two parities
/// share the constant only for ℓ ≤ 1.
pub fn wronskian_det_closed_form(k: usize, d_k: usize, r: f64) -> f64 {
    let constant = wronskian_constant(k);
    (constant.powi(d_k as i32)) * r.powf(d_k as f64 * (k * k) as f64 / 2.0)
}

/// The `r`-free constant in the Wronskian determinant of the trig family.
pub fn wronskian_constant(k: usize) -> f64 {
    let ell = k / 2;
    let mut odd_fact_prod = 1.0f64;
    let mut acc = 1.0f64;
    for m in 1..=ell {
        // (2m−1)! built incrementally
        acc *= ((2 * m - 2).max(1) as f64) * ((2 * m - 1) as f64);
        odd_fact_prod *= acc;
    }
    let mut ell_fact = 1.0f64;
    for m in 1..=ell {
        ell_fact *= m as f64;
    }
    let even_constant = odd_fact_prod * odd_fact_prod / ell_fact;
    if k % 2 == 0 {
        even_constant
    } else {
        even_constant * ell_fact * ell_fact
    }
}

/// Wronskian matrix together with its determinant for `d_k` blocks.
pub fn wronskian_k(k: usize, r: f64, d_k: usize) -> Result<(DMatrix<f64>, f64)> {
    let w = wronskian_k_matrix(k, r)?;
    let det = w.determinant().powi(d_k as i32);
    Ok((w, det))
}

/// A point of `R^{1+D}` split into per-level blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadePoint {
    pub t: f64,
    /// `blocks[j]` is the level-`j+1` coordinate block.
    pub blocks: Vec<Vec<f64>>,
}

impl CascadePoint {
    pub fn origin(k: usize, n: usize) -> Self {
        Self { t: 0.0, blocks: vec![vec![0.0; n]; k] }
    }
}

/// A solved higher-order two-point trajectory (equal block dimensions).
#[derive(Debug, Clone)]
pub struct CascadeTrajectory {
    pub k: usize,
    pub n: usize,
    pub p0: CascadePoint,
    pub p1: CascadePoint,
    /// `params[i]` is the length-`n` weight of forcing `g_{i+1}`.
    pub params: Vec<Vec<f64>>,
    table: Vec<Vec<LogTrigPoly>>,
}

/// Applies `E_δ(r) = exp(δ r N)`: `(E x)^j = Σ_{s≥j} (δr)^{s−j}/(s−j)!·x^s`.
fn galilean_k(blocks: &[Vec<f64>], delta: f64, r: f64) -> Vec<Vec<f64>> {
    let k = blocks.len();
    let n = blocks[0].len();
    let z = delta * r;
    (0..k)
        .map(|j| {
            (0..n)
                .map(|c| {
                    let mut acc = 0.0;
                    let mut coeff = 1.0;
                    for (steps, b) in blocks.iter().enumerate().skip(j) {
                        if steps > j {
                            coeff *= z / (steps - j) as f64;
                        }
                        acc += coeff * b[c];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Solves the two-point problem for the equal-dimension cascade.
///
/// Block `j` of the trajectory is
/// `(E_δ(r) x0)^j + Σ_i δ^{k−j} g_i^{(j−1)}(r)·m_i`, and the parameters come
/// from the `k×k` endpoint system `W(1) m = D_δ^{-1}[x1 − E_δ(1) x0]` solved
/// per coordinate.
pub fn connect_k(spec: &ModelSpec, p0: &CascadePoint, p1: &CascadePoint) -> Result<CascadeTrajectory> {
    spec.validate()?;
    let k = spec.k;
    let n = spec.dims[0];
    if spec.dims.iter().any(|&d| d != n) {
        return Err(KineticError::InvalidArgument(
            "connect_k needs equal block dimensions; decompose into buildings first".into(),
        ));
    }
    if p0.blocks.len() != k || p1.blocks.len() != k
        || p0.blocks.iter().chain(&p1.blocks).any(|b| b.len() != n)
    {
        return Err(KineticError::DimensionMismatch("endpoint block shape".into()));
    }
    let delta = p1.t - p0.t;
    if delta == 0.0 {
        return Err(KineticError::ConnectionImpossible);
    }
    let w1 = wronskian_k_matrix(k, 1.0)?;
    let lu = w1.lu();
    let free_end = galilean_k(&p0.blocks, delta, 1.0);
    let mut params = vec![vec![0.0; n]; k];
    for c in 0..n {
        let rhs = DVector::from_fn(k, |j, _| {
            (p1.blocks[j][c] - free_end[j][c]) / delta.powi((k - 1 - j) as i32)
        });
        let sol = lu.solve(&rhs).ok_or_else(|| {
            KineticError::NoTrajectoryFamily("W(1) is singular for this k".into())
        })?;
        for i in 0..k {
            params[i][c] = sol[i];
        }
    }
    Ok(CascadeTrajectory {
        k,
        n,
        p0: p0.clone(),
        p1: p1.clone(),
        params,
        table: derivative_table(k),
    })
}

impl CascadeTrajectory {
    pub fn delta(&self) -> f64 {
        self.p1.t - self.p0.t
    }

    /// Point at `r ∈ [0, 1]`; endpoints are exact.
    pub fn eval(&self, r: f64) -> Result<CascadePoint> {
        if !(0.0..=1.0).contains(&r) {
            return Err(KineticError::InvalidArgument(format!("r = {r} outside [0, 1]")));
        }
        if r == 0.0 {
            return Ok(self.p0.clone());
        }
        if r == 1.0 {
            return Ok(self.p1.clone());
        }
        let delta = self.delta();
        let mut blocks = galilean_k(&self.p0.blocks, delta, r);
        for (j, block) in blocks.iter_mut().enumerate() {
            let scale = delta.powi((self.k - 1 - j) as i32);
            for i in 0..self.k {
                let g = self.table[i][j].eval(r);
                for (c, entry) in block.iter_mut().enumerate() {
                    *entry += scale * g * self.params[i][c];
                }
            }
        }
        Ok(CascadePoint { t: self.p0.t + r * delta, blocks })
    }

    /// Analytic `d/dr` of every block at `r > 0`.
    pub fn eval_tangent(&self, r: f64) -> Result<Vec<Vec<f64>>> {
        if r <= 0.0 || r > 1.0 {
            return Err(KineticError::InvalidArgument(format!("tangent needs r ∈ (0, 1], got {r}")));
        }
        let delta = self.delta();
        let k = self.k;
        let n = self.n;
        // free part: d/dr E_δ(r) x0 = δ N E_δ(r) x0 (shift the block index up)
        let free = galilean_k(&self.p0.blocks, delta, r);
        let mut out = vec![vec![0.0; n]; k];
        for j in 0..k {
            for c in 0..n {
                let mut d = if j + 1 < k { delta * free[j + 1][c] } else { 0.0 };
                let scale = delta.powi((k - 1 - j) as i32);
                for i in 0..k {
                    d += scale * self.table[i][j + 1].eval(r) * self.params[i][c];
                }
                out[j][c] = d;
            }
        }
        Ok(out)
    }

    /// Max over blocks `j ≥ 2` and coordinates of `|γ̇^{j−1} − δ·γ^j|`.
    pub fn cascade_residual(&self, r: f64) -> Result<f64> {
        let p = self.eval(r)?;
        let tang = self.eval_tangent(r)?;
        let delta = self.delta();
        let mut worst = 0.0f64;
        for j in 0..self.k - 1 {
            for c in 0..self.n {
                worst = worst.max((tang[j][c] - delta * p.blocks[j + 1][c]).abs());
            }
        }
        Ok(worst)
    }
}

/// One building: a depth-`(k−j+1)` independent cascade of equal width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub depth: usize,
    pub width: usize,
    /// `(level, coordinate index)` pairs of the variables in this building.
    pub variables: Vec<(usize, usize)>,
}

/// Relabeling of the cascade variables into independent buildings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildingDecomposition {
    pub buildings: Vec<Building>,
    pub total_variables: usize,
}

/// Splits a normalized model (`b_j = [Id | 0]`) into buildings: coordinates
/// entering at level `j` form a building of depth `k−j+1` and width
/// `d_j − d_{j−1}`.
pub fn building_decompose(spec: &ModelSpec) -> Result<BuildingDecomposition> {
    spec.validate()?;
    for (j, _) in spec.b_matrices.iter().enumerate() {
        let b = spec.b_matrix(j);
        for r in 0..b.nrows() {
            for c in 0..b.ncols() {
                let want = if r == c { 1.0 } else { 0.0 };
                if (b[(r, c)] - want).abs() > 1e-12 {
                    return Err(KineticError::InvalidArgument(
                        "model is not normalized; run normalize_coordinates first".into(),
                    ));
                }
            }
        }
    }
    let k = spec.k;
    let mut buildings = Vec::new();
    let mut prev = 0usize;
    for (idx, &d) in spec.dims.iter().enumerate() {
        let level = idx + 1;
        let width = d - prev;
        if width > 0 {
            let mut variables = Vec::new();
            for coord in prev..d {
                for lvl in level..=k {
                    variables.push((lvl, coord));
                }
            }
            buildings.push(Building { depth: k - level + 1, width, variables });
        }
        prev = d;
    }
    let total_variables = buildings.iter().map(|b| b.variables.len()).sum();
    Ok(BuildingDecomposition { buildings, total_variables })
}
