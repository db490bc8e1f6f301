//! Conjugation transforms f -> f^c -> f^cc and the a priori growth
//! machinery for the dual iterates: moment-constant conversions, growth
//! certificates per cost kind, and modulus-of-continuity propagation.
//!
//! The conjugation kernels here are the single code path for all
//! log-sum-exp sweeps: the solver calls them for its half-steps, so
//! re-conjugating a trace iterate reproduces the trace bit-for-bit.
//! Each output element is an independent sequential reduction, which makes
//! the parallel kernel bit-identical to the sequential one for any thread
//! count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{CostMatrix, CostModel, Omega};
use crate::divergence::{lse_terms, log_sum_exp};
use crate::measures::DiscreteMeasure;
use crate::{Error, Result};

/// Matrices below this many entries are conjugated sequentially even when
/// the parallel feature is on; thread handoff dominates at small sizes.
pub const PARALLEL_THRESHOLD: usize = 4096;

#[inline]
fn conj_col(f: &[f64], cost: &CostMatrix, log_mu: &[f64], j: usize) -> f64 {
    -lse_terms((0..f.len()).map(|i| f[i] - cost.at(i, j) + log_mu[i]))
}

#[inline]
fn conj_row(g: &[f64], cost: &CostMatrix, log_nu: &[f64], i: usize) -> f64 {
    -lse_terms(
        cost.row(i)
            .iter()
            .zip(g)
            .zip(log_nu)
            .map(|((c, gj), lw)| gj - c + lw),
    )
}

/// Sequential kernel for f^c(y_j) = -log Σ_i μ_i e^{f_i - c_ij}.
pub fn conjugate_seq(f: &[f64], cost: &CostMatrix, log_mu: &[f64]) -> Vec<f64> {
    (0..cost.ny()).map(|j| conj_col(f, cost, log_mu, j)).collect()
}

/// Parallel kernel; bit-identical to [`conjugate_seq`].
#[cfg(feature = "parallel")]
pub fn conjugate_par(f: &[f64], cost: &CostMatrix, log_mu: &[f64]) -> Vec<f64> {
    (0..cost.ny())
        .into_par_iter()
        .map(|j| conj_col(f, cost, log_mu, j))
        .collect()
}

/// Sequential kernel for the reverse direction g^c(x_i) over the Y-side
/// weights: -log Σ_j ν_j e^{g_j - c_ij}.
pub fn conjugate_rev_seq(g: &[f64], cost: &CostMatrix, log_nu: &[f64]) -> Vec<f64> {
    (0..cost.nx()).map(|i| conj_row(g, cost, log_nu, i)).collect()
}

/// Parallel kernel; bit-identical to [`conjugate_rev_seq`].
#[cfg(feature = "parallel")]
pub fn conjugate_rev_par(g: &[f64], cost: &CostMatrix, log_nu: &[f64]) -> Vec<f64> {
    (0..cost.nx())
        .into_par_iter()
        .map(|i| conj_row(g, cost, log_nu, i))
        .collect()
}

/// Conjugate f^c: Y-support vector of -log ∫ e^{f(x)-c(x,y)} dμ.
pub fn conjugate(f: &[f64], cost: &CostMatrix, mx: &DiscreteMeasure) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if cost.nx() * cost.ny() >= PARALLEL_THRESHOLD {
        return conjugate_par(f, cost, mx.log_weights());
    }
    conjugate_seq(f, cost, mx.log_weights())
}

/// Reverse conjugate over the Y-side measure: X-support vector of
/// -log ∫ e^{g(y)-c(x,y)} dν.
pub fn conjugate_rev(g: &[f64], cost: &CostMatrix, my: &DiscreteMeasure) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if cost.nx() * cost.ny() >= PARALLEL_THRESHOLD {
        return conjugate_rev_par(g, cost, my.log_weights());
    }
    conjugate_rev_seq(g, cost, my.log_weights())
}

/// Biconjugate f^cc = reverse conjugate of f^c. One Sinkhorn full step.
pub fn biconjugate(f: &[f64], cost: &CostMatrix, mx: &DiscreteMeasure, my: &DiscreteMeasure) -> Vec<f64> {
    conjugate_rev(&conjugate(f, cost, mx), cost, my)
}

/// Constants (C0, C) such that ∫ e^{t|y|^q} dν ≤ C0 e^{C t^{p/(p-q)}} for
/// all t ≥ 0, given Kexp = ∫ e^{λ|y|^p} dν: C0 = sqrt(Kexp) and
/// C = (2q/(λp))^{q/(p-q)} (1 - q/p).
pub fn mgf_constants(lambda: f64, kexp: f64, p: f64, q: f64) -> Result<(f64, f64)> {
    if !(q > 0.0 && q < p) {
        return Err(Error::Invalid(format!("mgf_constants needs 0 < q < p, got q={q}, p={p}")));
    }
    if !(lambda > 0.0) || !(kexp >= 1.0) {
        return Err(Error::Invalid(format!(
            "mgf_constants needs lambda > 0 and Kexp >= 1, got lambda={lambda}, Kexp={kexp}"
        )));
    }
    let c0 = kexp.sqrt();
    let c = (2.0 * q / (lambda * p)).powf(q / (p - q)) * (1.0 - q / p);
    Ok((c0, c))
}

/// Numeric oracle for sup_{ξ≥0} (2tξ^q - λξ^p) by ternary search around the
/// stationary point; the closed form is 2C t^{p/(p-q)} with C as in
/// [`mgf_constants`].
pub fn mgf_sup_oracle(lambda: f64, p: f64, q: f64, t: f64) -> f64 {
    let g = |xi: f64| 2.0 * t * xi.powf(q) - lambda * xi.powf(p);
    if t <= 0.0 {
        return 0.0;
    }
    // stationary point of the concave (in ξ^q-coordinates unimodal) objective
    let xi_star = (2.0 * t * q / (lambda * p)).powf(1.0 / (p - q));
    let (mut lo, mut hi) = (0.0f64, 2.0 * xi_star + 1.0);
    for _ in 0..300 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    g(0.5 * (lo + hi)).max(g(0.0))
}

/// Max violation of log ∫ e^{t r^q} dν ≤ log C0 + C t^{p/(p-q)} over a
/// t-grid, with r the distances of ν's atoms from its reference point.
pub fn mgf_forward_check(
    c0: f64,
    c: f64,
    p: f64,
    q: f64,
    radii: &[f64],
    log_weights: &[f64],
    t_grid: &[f64],
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for &t in t_grid {
        let vals: Vec<f64> = radii.iter().map(|r| t * r.powf(q)).collect();
        let lhs = log_sum_exp(&vals, log_weights)?;
        let rhs = c0.ln() + c * t.powf(p / (p - q));
        worst = worst.max(lhs - rhs);
    }
    Ok(worst)
}

/// Max violation of the tail bound P{|Y| ≥ s} ≤ C0 e^{-C' s^p} over an
/// s-grid, with C' = (q/p)((p-q)/(Cp))^{(p-q)/q} from optimizing the
/// Chernoff exponent: inf_{t≥0} (C t^{p/(p-q)} - t s^q) = -C' s^p.
pub fn mgf_tail_check(
    c0: f64,
    c: f64,
    p: f64,
    q: f64,
    radii: &[f64],
    weights: &[f64],
    s_grid: &[f64],
) -> f64 {
    let c_prime = (q / p) * ((p - q) / (c * p)).powf((p - q) / q);
    let mut worst = f64::NEG_INFINITY;
    for &s in s_grid {
        let tail: f64 = radii
            .iter()
            .zip(weights)
            .filter(|(r, _)| **r >= s)
            .map(|(_, w)| w)
            .sum();
        let rhs = c0 * (-c_prime * s.powf(p)).exp();
        worst = worst.max(tail - rhs);
    }
    worst
}

/// One cross term of a certified cost split, with its realized moments and
/// moment-generating-function constant.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthTerm {
    pub k_plus: f64,
    pub k_minus: f64,
    pub alpha: f64,
    pub beta: f64,
    /// α̃ = p - β, the exponent governing the MGF bound for this term.
    pub alpha_tilde: f64,
    /// A_α = ∫|x|^α dμ.
    pub a_alpha: f64,
    /// B_β = ∫|y|^β dν.
    pub b_beta: f64,
    /// MGF constant C for q = β (shared C0 lives on the certificate).
    pub c: f64,
}

/// Everything needed to evaluate the a priori growth bounds for conjugates
/// and biconjugates of a certified cost kind.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthCertificate {
    pub p: f64,
    pub lambda: f64,
    /// Kexp = ∫ e^{λ|y|^p} dν.
    pub kexp: f64,
    pub c0: f64,
    /// A_+ = ∫ a_+ dμ.
    pub a_plus_mean: f64,
    pub mu_c1: f64,
    pub nu_c2: f64,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    pub terms: Vec<GrowthTerm>,
    pub radius_x: Vec<f64>,
    pub radius_y: Vec<f64>,
}

/// Builds the growth certificate for a cost kind with an explicit split;
/// `None` when the kind is not certified (custom matrices, sublinear kinds).
pub fn build_growth_certificate(
    model: &CostModel,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
    lambda: f64,
) -> Result<Option<GrowthCertificate>> {
    if !(lambda > 0.0) {
        return Err(Error::Invalid(format!("lambda must be positive, got {lambda}")));
    }
    let d = match model.decomposition(mx, my) {
        Some(d) => d,
        None => return Ok(None),
    };
    let kexp: f64 = my
        .weights()
        .iter()
        .zip(&d.radius_y)
        .map(|(w, r)| w * (lambda * r.powf(d.p)).exp())
        .sum();
    if !kexp.is_finite() {
        return Err(Error::Invalid(
            "exponential moment overflows; use a smaller lambda".into(),
        ));
    }
    let c0 = kexp.sqrt();
    let mut terms = Vec::with_capacity(d.cross.len());
    for ct in &d.cross {
        let (_, c) = mgf_constants(lambda, kexp, d.p, ct.beta)?;
        terms.push(GrowthTerm {
            k_plus: ct.k_plus,
            k_minus: ct.k_minus,
            alpha: ct.alpha,
            beta: ct.beta,
            alpha_tilde: d.p - ct.beta,
            a_alpha: mx
                .weights()
                .iter()
                .zip(&d.radius_x)
                .map(|(w, r)| w * r.powf(ct.alpha))
                .sum(),
            b_beta: my
                .weights()
                .iter()
                .zip(&d.radius_y)
                .map(|(w, r)| w * r.powf(ct.beta))
                .sum(),
            c,
        });
    }
    Ok(Some(GrowthCertificate {
        p: d.p,
        lambda,
        kexp,
        c0,
        a_plus_mean: mx.integrate(&d.a_plus),
        mu_c1: mx.integrate(&d.c1),
        nu_c2: my.integrate(&d.c2),
        c1: d.c1,
        c2: d.c2,
        a_plus: d.a_plus,
        a_minus: d.a_minus,
        terms,
        radius_x: d.radius_x,
        radius_y: d.radius_y,
    }))
}

impl GrowthCertificate {
    /// Σ_i C N^{p/α̃_i - 1} (K_+^i A_{α_i} + K_-^i |x|^{α_i})^{p/α̃_i}
    /// evaluated at |x| = rx.
    fn cross_penalty(&self, rx: f64) -> f64 {
        let n = self.terms.len() as f64;
        self.terms
            .iter()
            .map(|t| {
                let e = self.p / t.alpha_tilde;
                t.c * n.powf(e - 1.0) * (t.k_plus * t.a_alpha + t.k_minus * rx.powf(t.alpha)).powf(e)
            })
            .sum()
    }
}

/// Pointwise growth bounds for a single conjugation round, plus the uniform
/// constant for the dual iterates.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthBound {
    /// Pointwise upper bound for f^c - c2 over the Y-support.
    pub upper_fc: Vec<f64>,
    /// Pointwise lower bound for f^cc - c1 over the X-support.
    pub lower_fcc: Vec<f64>,
    /// Uniform K with |φ_t(x)| ≤ K (1 + |x|^p) for all iterates t and the
    /// limit potential.
    pub k: f64,
}

/// Evaluates the growth bounds for a function with mean `mu_f` = μ(f), and
/// the f-independent iterate constant using the a priori mean bounds
/// μ(φ_t) ≥ 0 and ν(ψ_t) ≥ -log ξ.
pub fn growth_bound(cert: &GrowthCertificate, mu_f: f64, log_xi: f64) -> GrowthBound {
    let shift = mu_f - cert.mu_c1;
    let upper_fc: Vec<f64> = cert
        .radius_y
        .iter()
        .map(|ry| {
            cert.a_plus_mean - shift
                + cert
                    .terms
                    .iter()
                    .map(|t| t.k_plus * t.a_alpha * ry.powf(t.beta))
                    .sum::<f64>()
        })
        .collect();
    let lower_fcc: Vec<f64> = cert
        .radius_x
        .iter()
        .zip(&cert.a_minus)
        .map(|(rx, am)| shift - cert.a_plus_mean - cert.c0.ln() - am - cert.cross_penalty(*rx))
        .collect();

    // Uniform bounds for φ_{t+1}(x), t ≥ 0 (and φ_0 = 0 trivially):
    // lower from the biconjugate bound with μ(φ_t - c1) ≥ -μ(c1);
    // upper from Jensen on the reverse conjugation with ν(ψ_t) ≥ -log ξ.
    let mut k: f64 = 0.0;
    for (i, rx) in cert.radius_x.iter().enumerate() {
        let low = cert.c1[i] - cert.mu_c1
            - cert.a_plus_mean
            - cert.c0.ln()
            - cert.a_minus[i]
            - cert.cross_penalty(*rx);
        let up = cert.c1[i]
            + cert.nu_c2
            + log_xi
            + cert.a_plus[i]
            + cert
                .terms
                .iter()
                .map(|t| t.k_plus * t.b_beta * rx.powf(t.alpha))
                .sum::<f64>();
        let denom = 1.0 + rx.powf(cert.p);
        k = k.max(low.abs() / denom).max(up.abs() / denom);
    }
    GrowthBound { upper_fc, lower_fcc, k }
}

/// Certificate for costs known only through a modulus of continuity
/// ω(s) = a + b s^q: |c(x,y1) - c(x,y2)| ≤ ω(d(y1,y2)) and symmetrically
/// in x.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusCertificate {
    pub omega: Omega,
    /// A1 = ∫ d(x, x0) dμ.
    pub a1: f64,
    /// B1 = ∫ d(y, y0) dν.
    pub b1: f64,
    /// Uniform K with |φ_t(x)| ≤ K + ω(|x|) for all iterates t.
    pub k: f64,
}

/// Builds the modulus certificate; `None` when the cost kind declares no
/// modulus. Needs the realized matrix for the oscillation bound of custom
/// matrices and for the product-mean term of K.
pub fn build_modulus_certificate(
    model: &CostModel,
    matrix: &CostMatrix,
    log_xi: f64,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
) -> Result<Option<ModulusCertificate>> {
    let omega = match model.modulus(Some(matrix)) {
        Some(w) => w,
        None => return Ok(None),
    };
    let a1 = mx.integrate(&mx.radii());
    let b1 = my.integrate(&my.radii());
    // ∫ c/ε d(μ⊗ν): upper bound for the transport cost, hence for the
    // means μ(φ_t) - log ξ of the iterates.
    let mut u = 0.0;
    for (i, wx) in mx.weights().iter().enumerate() {
        for (j, wy) in my.weights().iter().enumerate() {
            u += wx * wy * matrix.at(i, j);
        }
    }
    let k = omega.eval(a1) + (u + log_xi).max(0.0);
    Ok(Some(ModulusCertificate { omega, a1, b1, k }))
}

/// Violations of the modulus propagation inequalities for a conjugate
/// function, expected ≤ 0.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusReport {
    /// max over pairs of |f^c(y1) - f^c(y2)| - ω(d(y1, y2)).
    pub max_violation_pairwise: f64,
    /// max over y of |f^c(y) - ν(f^c)| - ω(B1 + |y|).
    pub max_violation_centered: f64,
}

/// Checks that a conjugate inherits the declared modulus of continuity and
/// the centered bound |f^c(y) - ν(f^c)| ≤ ω(B1 + |y|).
pub fn modulus_conjugate_check(
    cert: &ModulusCertificate,
    fc: &[f64],
    my: &DiscreteMeasure,
) -> ModulusReport {
    let mut pairwise = f64::NEG_INFINITY;
    for j1 in 0..my.len() {
        for j2 in 0..my.len() {
            let d: f64 = my
                .point(j1)
                .iter()
                .zip(my.point(j2))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            pairwise = pairwise.max((fc[j1] - fc[j2]).abs() - cert.omega.eval(d));
        }
    }
    let mean = my.integrate(fc);
    let radii = my.radii();
    let mut centered = f64::NEG_INFINITY;
    for (v, r) in fc.iter().zip(&radii) {
        centered = centered.max((v - mean).abs() - cert.omega.eval(cert.b1 + r));
    }
    ModulusReport {
        max_violation_pairwise: pairwise,
        max_violation_centered: centered,
    }
}
