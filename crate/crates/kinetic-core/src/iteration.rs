//! Abstract De Giorgi–Moser iteration constants and the Bombieri–Giusti
//! crossover combiner.
//!
//! Everything here lives on an abstract finite measure space carrying a
//! shrinking family of sets `U_σ`, `0 < σ ≤ 1`, with `U_σ ⊆ U_σ'` for
//! `σ ≤ σ'`. A reverse-Hölder hypothesis of the form
//!
//! ```text
//! ‖f‖_{ακ, U_σ} ≤ ( C (1 + μ h(α))^{γ1} / (σ' − σ)^{γ2} )^{1/α} ‖f‖_{α, U_σ'}
//! ```
//!
//! is bootstrapped along a geometric exponent ladder `α κ^j`. Three variants
//! are provided: the unbounded chain reaching the essential sup, the variant
//! valid for small starting exponents `p < 1/μ` whose constant does not
//! depend on `μ`, and the stopped chain ending at a fixed exponent `p0`.
//! Each closed-form constant is paired with a direct numeric execution of the
//! underlying product so the formulas can be checked to dominate it. The
//! combiner takes a sampled [`NestedFamily`], verifies both of its hypotheses
//! on discrete grids, and produces an explicit constant by running the
//! exponential-decomposition recursion.

use serde::{Deserialize, Serialize};

use crate::error::KineticError;
use crate::Result;

/// Parameters shared by the iteration lemmas: the reverse-Hölder constant
/// `C ≥ 1`, the two blow-up exponents `γ1, γ2 > 0`, the Lebesgue-exponent
/// ratio `κ > 1`, the ellipticity aggregate `μ ≥ 1`, the starting exponent
/// `p > 0`, and for the stopped chain the target exponent `p0 ∈ (0, κ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationParams {
    pub c: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub kappa: f64,
    pub mu: f64,
    pub p: f64,
    pub p0: Option<f64>,
}

impl IterationParams {
    fn validate_base(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c >= 1.0) {
            return Err(KineticError::InvalidArgument(format!(
                "the reverse-Hölder constant must satisfy C >= 1, got {}",
                self.c
            )));
        }
        if !(self.gamma1.is_finite() && self.gamma1 > 0.0)
            || !(self.gamma2.is_finite() && self.gamma2 > 0.0)
        {
            return Err(KineticError::InvalidArgument(format!(
                "the exponents gamma1, gamma2 must be positive, got ({}, {})",
                self.gamma1, self.gamma2
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 1.0) {
            return Err(KineticError::InvalidArgument(format!(
                "the exponent ratio must satisfy kappa > 1, got {}",
                self.kappa
            )));
        }
        if !(self.mu.is_finite() && self.mu >= 1.0) {
            return Err(KineticError::InvalidArgument(format!(
                "the ellipticity aggregate must satisfy mu >= 1, got {}",
                self.mu
            )));
        }
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(KineticError::InvalidArgument(format!(
                "the starting exponent must be positive, got {}",
                self.p
            )));
        }
        Ok(())
    }

    fn validated_p0(&self) -> Result<f64> {
        let p0 = self.p0.ok_or_else(|| {
            KineticError::InvalidArgument(
                "the stopped chain needs the target exponent p0".into(),
            )
        })?;
        if !(p0.is_finite() && p0 > 0.0 && p0 < self.kappa) {
            return Err(KineticError::InvalidArgument(format!(
                "the target exponent must satisfy 0 < p0 < kappa, got p0 = {p0}, kappa = {}",
                self.kappa
            )));
        }
        Ok(p0)
    }
}

/// Interpretation of the `(1 − δ)` exponent returned by the stopped chain.
/// The plain exponent reading is the default; the displayed reading
/// substitutes the gap into the exponent expression itself and therefore
/// needs the concrete `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gamma0Reading {
    #[default]
    Exponent,
    Displayed {
        delta: f64,
    },
}

fn finite_or_overflow(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(KineticError::Numerical(format!(
            "{what} overflows f64 for these parameters"
        )))
    }
}

/// Constant `(M, γ̃)` of the unbounded chain: a function satisfying the
/// reverse-Hölder hypothesis with factor `(1 + μα)^{γ1}` for every
/// `α ∈ [p, ∞)` obeys `sup_{U_δ} |f| ≤ (M / (1 − δ)^{γ̃})^{1/p} ‖f‖_{L^p(U_1)}`.
///
/// ```
/// use kinetic_core::iteration::{moser_constant_unbounded, IterationParams};
/// let params = IterationParams {
///     c: 1.0, gamma1: 1.0, gamma2: 1.0, kappa: 2.0, mu: 1.0, p: 1.0, p0: None,
/// };
/// let (m, gamma) = moser_constant_unbounded(&params).unwrap();
/// assert!((m - 256.0).abs() < 1e-9);
/// assert!((gamma - 2.0).abs() < 1e-12);
/// ```
pub fn moser_constant_unbounded(params: &IterationParams) -> Result<(f64, f64)> {
    params.validate_base()?;
    let k = params.kappa;
    let a = k / (k - 1.0);
    let ln_m = a * params.c.ln()
        + params.gamma1 * a * (params.mu * params.p).ln_1p()
        + params.gamma2 * a * a * std::f64::consts::LN_2
        + params.gamma1 * a / (k - 1.0) * k.ln();
    let m = finite_or_overflow(ln_m.exp(), "the iteration constant")?;
    Ok((m, params.gamma2 * a))
}

/// Direct numeric execution of the unbounded chain: the exponent ladder
/// `α_j = p κ^j` with the geometric gap budget `Δσ_j = (1 − δ) 2^{−(j+1)}`
/// yields the product whose `p`-th power this returns, normalized so that it
/// is comparable with [`moser_constant_unbounded`] (which is an upper bound
/// for it).
pub fn moser_recursion_unbounded(params: &IterationParams) -> Result<f64> {
    params.validate_base()?;
    let k = params.kappa;
    let mut acc = 0.0f64;
    for j in 0..40_000 {
        let weight = k.powi(-j);
        let alpha = params.p * k.powi(j);
        let term = weight
            * (params.c.ln()
                + params.gamma1 * (params.mu * alpha).ln_1p()
                + params.gamma2 * (j + 1) as f64 * std::f64::consts::LN_2);
        acc += term;
        if term < 1e-16 * (1.0 + acc) && j > 4 {
            break;
        }
    }
    finite_or_overflow(acc.exp(), "the chained product")
}

/// Constant `(M, γ0)` of the stopped chain: under the hypothesis with factor
/// `(1 + μ α/(1 − α))^{γ1}` for `0 < α ≤ p0/κ` on a family normalized to
/// `ν(U_1) ≤ 1`, the `L^{p0}(U_δ)` norm is bounded by
/// `(M / (1 − δ)^{γ0})^{1/p − 1/p0} ‖f‖_{L^p(U_1)}` for every `p ∈ (0, p0/κ]`.
pub fn moser_constant_stopped(
    params: &IterationParams,
    reading: Gamma0Reading,
) -> Result<(f64, f64)> {
    params.validate_base()?;
    let p0 = params.validated_p0()?;
    let k = params.kappa;
    let a = k / (k - 1.0) * (1.0 + k);
    let ln_m = params.gamma2 * k.powi(3) * (1.0 + k) / (k - 1.0).powi(3)
        * std::f64::consts::LN_2
        + a * params.c.ln()
        + params.gamma1 * a * (params.mu * p0 / (k - p0)).ln_1p();
    let m = finite_or_overflow(ln_m.exp(), "the stopped-chain constant")?;
    let exponent = params.gamma2 * k * (1.0 + k) / (k - 1.0);
    let gamma0 = match reading {
        Gamma0Reading::Exponent => exponent,
        Gamma0Reading::Displayed { delta } => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(KineticError::InvalidArgument(format!(
                    "the displayed reading needs delta in (0, 1), got {delta}"
                )));
            }
            (1.0 - delta).powf(exponent)
        }
    };
    Ok((m, gamma0))
}

/// Direct numeric execution of the stopped chain for the concrete `p` in
/// `params`: exponents descend from `p0` as `p0 κ^{−m}` until they fall at or
/// below `p`, the gap budget grows toward the heavy end of the chain, and the
/// normalization `ν(U_1) ≤ 1` bridges the final exponent down to `p`. Returns
/// `(M, γ0)` in the same convention as [`moser_constant_stopped`], which
/// dominates both components.
pub fn moser_recursion_stopped(params: &IterationParams) -> Result<(f64, f64)> {
    params.validate_base()?;
    let p0 = params.validated_p0()?;
    let k = params.kappa;
    if params.p > p0 / k * (1.0 + 1e-12) {
        return Err(KineticError::InvalidArgument(format!(
            "the stopped chain needs p <= p0/kappa, got p = {}, p0/kappa = {}",
            params.p,
            p0 / k
        )));
    }
    let mut steps = 1usize;
    while p0 * k.powi(-(steps as i32)) > params.p && steps < 40_000 {
        steps += 1;
    }
    let mut weighted = 0.0f64;
    let mut measure_weight = 0.0f64;
    for m in 1..=steps {
        let alpha = p0 * k.powi(-(m as i32));
        let w = 1.0 / alpha;
        weighted += w
            * (params.c.ln()
                + params.gamma1 * (params.mu * alpha / (1.0 - alpha)).ln_1p()
                + params.gamma2 * (steps + 1 - m) as f64 * std::f64::consts::LN_2);
        measure_weight += w;
    }
    let denom = 1.0 / params.p - 1.0 / p0;
    let m = finite_or_overflow((weighted / denom).exp(), "the stopped product")?;
    Ok((m, params.gamma2 * measure_weight / denom))
}

fn smallp_ladder_sum(kappa: f64, max_terms: usize) -> f64 {
    let c = kappa.sqrt() / (kappa.sqrt() - 1.0);
    let mut acc = 0.0f64;
    for j in 0..max_terms {
        let term = kappa.powi(-(j as i32)) * (c * kappa.powi(j as i32)).ln_1p();
        acc += term;
        if term < 1e-14 * acc && j > 4 {
            break;
        }
    }
    acc
}

/// Constant `(M, γ0)` of the small-exponent chain: with the hypothesis factor
/// `(1 + μ |α/(α − 1)|)^{γ1}` for all `α > 0`, `α ≠ 1`, and a family
/// normalized to `ν(U_1) ≤ 1`, every `p ∈ (0, 1/μ)` obeys
/// `sup_{U_δ} |f| ≤ (M / (1 − δ)^{γ0})^{1/p} ‖f‖_{L^p(U_1)}`.
///
/// No closed form exists; the constant is the numeric supremum of the chained
/// product over all admissible `(p, μ)`. The exponent ladder is pinned to the
/// rungs `κ^{1/2 + Z}` so that every rung keeps a ratio gap of at least `√κ`
/// from the singular exponent 1, which caps `μ |α/(α − 1)|` by
/// `√κ/(√κ − 1) · μα`, and `μα ≤ κ^j` along the ladder because `μp < 1`. The
/// result therefore depends only on `(C, γ1, γ2, κ)`; `p` and `μ` enter the
/// precondition but not the value.
pub fn moser_smallp(params: &IterationParams) -> Result<(f64, f64)> {
    params.validate_base()?;
    if params.p * params.mu >= 1.0 {
        return Err(KineticError::InvalidArgument(format!(
            "the small-exponent chain needs p < 1/mu, got p = {}, mu = {}",
            params.p, params.mu
        )));
    }
    let k = params.kappa;
    let a = k / (k - 1.0);
    let ln_m = k
        * (a * params.c.ln()
            + params.gamma2 * a * a * std::f64::consts::LN_2
            + params.gamma1 * smallp_ladder_sum(k, 4000));
    let m = finite_or_overflow(ln_m.exp(), "the small-exponent constant")?;
    Ok((m, params.gamma2 * k * k / (k - 1.0)))
}

/// One atom of a sampled nested family: a quadrature weight, the sampled
/// function value, and the smallest `σ` whose set `U_σ` contains the atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedPoint {
    pub weight: f64,
    pub value: f64,
    pub entry: f64,
}

/// A discrete measure space with a monotone family of sets `U_σ`, `σ ∈ (0, 1]`,
/// realized through per-atom entry levels: an atom belongs to `U_σ` exactly
/// when its entry level is at most `σ`, so `U_σ ⊆ U_σ'` for `σ ≤ σ'` holds by
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedFamily {
    points: Vec<NestedPoint>,
}

impl NestedFamily {
    pub fn new(points: Vec<NestedPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(KineticError::InvalidArgument(
                "a nested family needs at least one atom".into(),
            ));
        }
        for (i, pt) in points.iter().enumerate() {
            if !(pt.weight.is_finite() && pt.weight > 0.0) {
                return Err(KineticError::InvalidArgument(format!(
                    "atom {i} has non-positive weight {}",
                    pt.weight
                )));
            }
            if !pt.value.is_finite() {
                return Err(KineticError::InvalidArgument(format!(
                    "atom {i} has non-finite value {}",
                    pt.value
                )));
            }
            if !(pt.entry > 0.0 && pt.entry <= 1.0) {
                return Err(KineticError::InvalidArgument(format!(
                    "atom {i} has entry level {} outside (0, 1]",
                    pt.entry
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Measure of `U_σ`.
    pub fn measure(&self, sigma: f64) -> f64 {
        self.points
            .iter()
            .filter(|pt| pt.entry <= sigma)
            .map(|pt| pt.weight)
            .sum()
    }

    /// `L^β(U_σ)` norm of the sampled values; `β = ∞` returns the sup of the
    /// absolute value.
    pub fn norm(&self, beta: f64, sigma: f64) -> Result<f64> {
        if beta.is_infinite() && beta > 0.0 {
            return Ok(self.sup_abs(sigma));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(KineticError::InvalidArgument(format!(
                "norm exponent must be positive or infinite, got {beta}"
            )));
        }
        let total: f64 = self
            .points
            .iter()
            .filter(|pt| pt.entry <= sigma)
            .map(|pt| pt.weight * pt.value.abs().powf(beta))
            .sum();
        Ok(total.powf(1.0 / beta))
    }

    /// Essential sup of `|f|` over `U_σ`.
    pub fn sup_abs(&self, sigma: f64) -> f64 {
        self.points
            .iter()
            .filter(|pt| pt.entry <= sigma)
            .map(|pt| pt.value.abs())
            .fold(0.0, f64::max)
    }

    /// Measure of the super-level set `{log f > s}` inside `U_1`. Atoms with
    /// non-positive values never qualify.
    pub fn log_level_measure(&self, s: f64) -> f64 {
        self.points
            .iter()
            .filter(|pt| pt.value > 0.0 && pt.value.ln() > s)
            .map(|pt| pt.weight)
            .sum()
    }
}

/// Result of the crossover combiner: the constant produced by the
/// exponential-decomposition recursion and whether the concluded bound holds
/// on the sampled family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BombieriGiustiOutcome {
    pub m: f64,
    pub holds: bool,
}

const SIGMA_LEVELS: usize = 32;

/// Verifies the two crossover hypotheses on discrete grids and, when both
/// hold, bounds `‖f‖_{L^{β0}(U_δ)} ≤ M ν(U_1)^{1/β0}` with an `M` computed by
/// the exponential-decomposition recursion.
///
/// Hypothesis (1) is the reverse-Hölder family
/// `‖f‖_{β0, U_σ'} ≤ (C1 / ((σ − σ')^γ ν(U_1)))^{1/β − 1/β0} ‖f‖_{β, U_σ}`
/// for `δ ≤ σ' < σ ≤ 1` and `0 < β ≤ min(1, η β0)`, checked on 32 geometric
/// `σ` levels and 8 geometric `β` levels. Hypothesis (2) is the weak log
/// bound `ν({log f > s}) ≤ C2 ν(U_1) / s`, checked on 32 geometric `s`
/// levels. A violated hypothesis is an error naming the violating `(σ', σ, β)`
/// or `s`.
///
/// The recursion climbs a `σ` ladder from `δ` toward 1 with gap budget
/// `Δσ_m = (1 − δ) 2^{−(m+1)}`. Splitting `f` at a level `e^s` and applying
/// both hypotheses gives, for `φ(σ) = log(‖f‖_{β0, U_σ} / ν(U_1)^{1/β0})` and
/// any admissible `(β, s)`,
///
/// ```text
/// φ(σ̂_m) ≤ (1/β − 1/β0) log(C1/Δσ_m^γ)
///         + (1/β) log(e^{βs} + e^{β φ(σ̂_{m+1})} (C2/s)^{1 − β/β0}),
/// ```
///
/// which is marched top-down from the measured norm on the outermost rung,
/// minimizing over a candidate grid of `(β, s)` at every step; the
/// geometrically shrinking gaps contract the seed's influence away, so the
/// resulting `M` is governed by the hypothesis constants.
pub fn bombieri_giusti_check(
    family: &NestedFamily,
    beta0: f64,
    c1: f64,
    c2: f64,
    delta: f64,
    eta: f64,
    gamma: f64,
) -> Result<BombieriGiustiOutcome> {
    if !(beta0 > 0.0) || (beta0.is_infinite() && beta0 < 0.0) {
        return Err(KineticError::InvalidArgument(format!(
            "beta0 must be positive (possibly infinite), got {beta0}"
        )));
    }
    if !(c1.is_finite() && c1 > 0.0 && c2.is_finite() && c2 > 0.0) {
        return Err(KineticError::InvalidArgument(format!(
            "the hypothesis constants must be positive, got C1 = {c1}, C2 = {c2}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0 && eta > 0.0 && eta < 1.0) {
        return Err(KineticError::InvalidArgument(format!(
            "delta and eta must lie in (0, 1), got ({delta}, {eta})"
        )));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(KineticError::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if family.points.iter().any(|pt| pt.value <= 0.0) {
        return Err(KineticError::InvalidArgument(
            "the crossover combiner needs f > 0 on U_1".into(),
        ));
    }
    let nu1 = family.measure(1.0);
    if family.measure(delta) <= 0.0 {
        return Err(KineticError::EmptyIntersection(format!(
            "the innermost set U_{delta} holds no atoms"
        )));
    }
    let inv_b0 = if beta0.is_infinite() { 0.0 } else { 1.0 / beta0 };
    let beta_cap = 1f64.min(eta * beta0);

    let mut sigmas = [0.0f64; SIGMA_LEVELS];
    for (i, s) in sigmas.iter_mut().enumerate() {
        *s = delta * (1.0 / delta).powf(i as f64 / (SIGMA_LEVELS - 1) as f64);
    }
    sigmas[SIGMA_LEVELS - 1] = 1.0;
    let betas: Vec<f64> = (0..8).map(|l| beta_cap * 0.5f64.powi(l)).collect();

    let b0_norms: Vec<f64> = sigmas
        .iter()
        .map(|&s| family.norm(beta0, s))
        .collect::<Result<_>>()?;
    for (i, &sp) in sigmas.iter().enumerate() {
        for &sb in sigmas.iter().skip(i + 1) {
            let gap = sb - sp;
            for &beta in &betas {
                let rhs = (c1 / (gap.powf(gamma) * nu1)).powf(1.0 / beta - inv_b0)
                    * family.norm(beta, sb)?;
                if b0_norms[i] > rhs * (1.0 + 1e-9) {
                    return Err(KineticError::InvalidArgument(format!(
                        "reverse-Hölder hypothesis fails at (σ' = {sp:.6}, σ = {sb:.6}, β = {beta:.6}): {:.6e} > {rhs:.6e}",
                        b0_norms[i]
                    )));
                }
            }
        }
    }

    let smax = family
        .points
        .iter()
        .map(|pt| pt.value.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    if smax > 0.0 {
        for i in 0..SIGMA_LEVELS {
            let s = smax * 1e-4 * 1e4f64.powf(i as f64 / (SIGMA_LEVELS - 1) as f64);
            let level = family.log_level_measure(s);
            if level > c2 * nu1 / s * (1.0 + 1e-9) {
                return Err(KineticError::InvalidArgument(format!(
                    "weak log hypothesis fails at s = {s:.6}: level measure {level:.6e} exceeds {:.6e}",
                    c2 * nu1 / s
                )));
            }
        }
    }

    let log_sum_exp = |a: f64, b: f64| -> f64 {
        let hi = a.max(b);
        hi + (a.min(b) - hi).exp().ln_1p()
    };
    // Top-down recursion in phi = log(‖f‖_{β0, U_σ} / ν(U_1)^{1/β0}) along the
    // ladder σ̂_0 = δ, σ̂_{m+1} = σ̂_m + Δσ_m. Every candidate (β, s) produces a
    // true bound, so the running minimum stays a bound; the geometric gaps
    // contract away the seed taken from the measured top-level norm.
    let ladder_steps = 120usize;
    let mut phi = (b0_norms[SIGMA_LEVELS - 1].ln() - inv_b0 * nu1.ln()).max(0.0);
    for m in (0..ladder_steps).rev() {
        let gap = (1.0 - delta) * 0.5f64.powi(m as i32 + 1);
        let d = c1.ln() + gamma * (1.0 / gap).ln();
        let mut beta_candidates: Vec<f64> = (0..16)
            .map(|l| beta_cap * 1e-8f64.powf(l as f64 / 15.0))
            .collect();
        for l in 0..16 {
            let c = 0.05 * 2000f64.powf(l as f64 / 15.0);
            beta_candidates.push((c / phi.max(1.0)).min(beta_cap));
        }
        let mut s_candidates: Vec<f64> = [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|t| (t * phi).max(1e-8))
            .collect();
        for l in 0..8 {
            s_candidates.push(1e-3 * (1.0 + c2) * 1e6f64.powf(l as f64 / 7.0));
        }
        // U_{σ̂_m} ⊆ U_{σ̂_{m+1}} gives the free pass-through bound φ, so a
        // rung only applies the hypothesis when that improves on monotonicity
        let mut best = phi;
        for &beta in &beta_candidates {
            if !(beta > 0.0) {
                continue;
            }
            for &s in &s_candidates {
                let tail = beta * phi + (1.0 - beta * inv_b0) * (c2 / s).ln();
                let t =
                    (1.0 / beta - inv_b0) * d + (1.0 / beta) * log_sum_exp(beta * s, tail);
                best = best.min(t);
            }
        }
        phi = best;
    }
    let m = finite_or_overflow(phi.exp(), "the crossover constant")?;

    let holds = b0_norms[0] <= m * nu1.powf(inv_b0) * (1.0 + 1e-9);
    Ok(BombieriGiustiOutcome { m, holds })
}
