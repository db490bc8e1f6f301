//! Certified constants and non-asymptotic bound curves for Sinkhorn runs:
//! weighted-CKP constants C(F), the rate constants (kappa, t0..t3), the
//! per-iteration bound curves, marginal-stability bounds, and dominance
//! verification of every bound against a measured trace.
//!
//! All infima over the CKP parameter alpha are evaluated on a log-spaced
//! grid and locally refined; the result is an upper bound for the true
//! infimum, which keeps every inequality valid.

use serde::Serialize;

use crate::cost::CostModel;
use crate::divergence::{kl, log_sum_exp};
use crate::measures::DiscreteMeasure;
use crate::sinkhorn::{solve_reference, Coupling, Potentials, SinkhornTrace};
use crate::{Error, Result};

/// Default number of alpha-grid points (log-spaced over 2^-20 .. 2^20).
pub const DEFAULT_ALPHA_GRID_POINTS: usize = 161;

/// Positive, log-spaced grid for minimizing the CKP objective over alpha.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaGrid {
    values: Vec<f64>,
}

impl AlphaGrid {
    pub fn log_spaced(lo_exp2: f64, hi_exp2: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo_exp2 < hi_exp2) {
            return Err(Error::Invalid(format!(
                "alpha grid needs n >= 2 and lo < hi, got n={n}, lo={lo_exp2}, hi={hi_exp2}"
            )));
        }
        let step = (hi_exp2 - lo_exp2) / (n - 1) as f64;
        let values = (0..n)
            .map(|k| (lo_exp2 + k as f64 * step).exp2())
            .collect();
        Ok(Self { values })
    }

    /// The default grid 2^-20 .. 2^20 with `n` points.
    pub fn standard(n: usize) -> Self {
        Self::log_spaced(-20.0, 20.0, n.max(2)).expect("valid standard grid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid with every point multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|a| a * s).collect(),
        }
    }
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self::standard(DEFAULT_ALPHA_GRID_POINTS)
    }
}

/// A grid-minimized CKP constant together with the attaining alpha.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CfResult {
    pub value: f64,
    pub alpha: f64,
}

/// C(F) = inf_{alpha > 0} (2/alpha)(3/2 + log ∫ e^{alpha |F|} dμ),
/// minimized over the grid and refined by trisection between the
/// neighbors of the grid argmin. Always an upper bound of the infimum.
pub fn cf_constant(f: &[f64], m: &DiscreteMeasure, grid: &AlphaGrid) -> Result<CfResult> {
    if f.len() != m.len() {
        return Err(Error::Invalid(format!(
            "cf_constant: function has {} entries on a support of {}",
            f.len(),
            m.len()
        )));
    }
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    let objective = |alpha: f64| -> f64 {
        let scaled: Vec<f64> = abs.iter().map(|v| alpha * v).collect();
        let lse = log_sum_exp(&scaled, m.log_weights()).expect("nonempty support");
        (2.0 / alpha) * (1.5 + lse)
    };
    let vals = grid.values();
    let mut best_k = 0;
    let mut best = f64::INFINITY;
    for (k, &a) in vals.iter().enumerate() {
        let v = objective(a);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    // local trisection between the argmin's grid neighbors
    let mut lo = vals[best_k.saturating_sub(1)];
    let mut hi = vals[(best_k + 1).min(vals.len() - 1)];
    for _ in 0..120 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if objective(m1) < objective(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mid = 0.5 * (lo + hi);
    let refined = objective(mid);
    if refined < best {
        Ok(CfResult {
            value: refined,
            alpha: mid,
        })
    } else {
        Ok(CfResult {
            value: best,
            alpha: vals[best_k],
        })
    }
}

/// One verification of |∫F d(μ'-μ)| ≤ C(F)(√H(μ'|μ) + ½H(μ'|μ)).
#[derive(Debug, Clone, Serialize)]
pub struct BvReport {
    pub lhs: f64,
    pub c_f: f64,
    pub h: f64,
    pub rhs: f64,
    /// rhs - lhs, expected ≥ 0.
    pub slack: f64,
}

pub fn bolley_villani_check(
    f: &[f64],
    m: &DiscreteMeasure,
    m_prime: &DiscreteMeasure,
    grid: &AlphaGrid,
) -> Result<BvReport> {
    if !m.same_support(m_prime) {
        return Err(Error::SupportMismatch(
            "weighted-CKP check needs identical supports".into(),
        ));
    }
    let lhs = (m_prime.integrate(f) - m.integrate(f)).abs();
    let c_f = cf_constant(f, m, grid)?.value;
    let h = kl(m_prime.weights(), m.weights())?;
    let rhs = c_f * (h.sqrt() + 0.5 * h);
    Ok(BvReport {
        lhs,
        c_f,
        h,
        rhs,
        slack: rhs - lhs,
    })
}

/// The two trace-sup CKP constants with the iterates attaining them.
#[derive(Debug, Clone, Serialize)]
pub struct C1Constants {
    /// sup_t C(φ_t - φ*).
    pub c1: f64,
    pub c1_attained_t: usize,
    /// sup_t C(φ_t).
    pub c1_tilde: f64,
    pub c1_tilde_attained_t: usize,
}

pub fn c1_constants(
    trace: &SinkhornTrace,
    pot_star: &Potentials,
    mx: &DiscreteMeasure,
    grid: &AlphaGrid,
) -> Result<C1Constants> {
    if trace.is_empty() {
        return Err(Error::Invalid("empty trace".into()));
    }
    let mut c1 = f64::NEG_INFINITY;
    let mut c1_t = 0;
    let mut c1_tilde = f64::NEG_INFINITY;
    let mut c1_tilde_t = 0;
    for t in 0..trace.len() {
        let diff: Vec<f64> = trace.phis[t]
            .iter()
            .zip(&pot_star.phi)
            .map(|(a, b)| a - b)
            .collect();
        let v = cf_constant(&diff, mx, grid)?.value;
        if v > c1 {
            c1 = v;
            c1_t = t;
        }
        let w = cf_constant(&trace.phis[t], mx, grid)?.value;
        if w > c1_tilde {
            c1_tilde = w;
            c1_tilde_t = t;
        }
    }
    Ok(C1Constants {
        c1,
        c1_attained_t: c1_t,
        c1_tilde,
        c1_tilde_attained_t: c1_tilde_t,
    })
}

/// kappa = (3/2 C1)^{-1} ∧ (2 H(π*|R))^{-1/2}.
pub fn kappa_constant(c1: f64, h_star_r: f64) -> f64 {
    (1.0 / (1.5 * c1)).min(1.0 / (2.0 * h_star_r).sqrt())
}

/// Forward scan for t3 = inf{t ≥ 1: ⌊t/2⌋ log(1+kappa) + log t ≥
/// log(2 H(π*|π_0))}, guarding the log against an already-converged start.
pub fn scan_t3(kappa: f64, h_star_pi0: f64) -> Result<usize> {
    let target = (2.0 * h_star_pi0.max(1e-300)).ln();
    let lk = (1.0 + kappa).ln();
    for t in 1..=100_000_000usize {
        if (t / 2) as f64 * lk + (t as f64).ln() >= target {
            return Ok(t);
        }
    }
    Err(Error::Invalid("t3 scan did not terminate".into()))
}

/// All scalar constants of the rate theorem for one run.
#[derive(Debug, Clone, Serialize)]
pub struct RateConstants {
    pub c1: f64,
    pub c1_tilde: f64,
    pub kappa: f64,
    pub h_star_r: f64,
    pub h_star_pi0: f64,
    /// genuine H(π_0|R) = ν(ψ_0) + log ξ (φ_0 = 0).
    pub h_pi0_r: f64,
    pub t0: usize,
    pub t1: usize,
    pub t2: usize,
    pub t3: usize,
    /// ((t2 ∧ t3) - 1)^+, the certified upper bound for t1.
    pub t1_bound: usize,
    pub t1_bound_ok: bool,
}

/// Reads t0 off the trace, computes kappa and t1..t3, and asserts the
/// theorem's claim t1 ≤ ((t2 ∧ t3) - 1)^+.
pub fn rate_constants(trace: &SinkhornTrace, c1: f64, c1_tilde: f64) -> Result<RateConstants> {
    if !trace.reference_attached {
        return Err(Error::Invalid("rate constants need a reference-attached trace".into()));
    }
    let h_star_r = trace.initial().h_star_pit;
    if !h_star_r.is_finite() {
        return Err(Error::Invalid(format!("H(pi*|R) = {h_star_r} is not finite")));
    }
    let t0 = (0..trace.len())
        .find(|&t| trace.at(t).h_mu2t_mu <= 1.0)
        .ok_or_else(|| {
            Error::Invalid("no iterate reached marginal entropy <= 1; extend max_t".into())
        })?;
    let t1 = t0.saturating_sub(1);
    let kappa = kappa_constant(c1, h_star_r);
    let h_star_pi0 = trace.at(0).h_star_pit;
    let h_pi0_r = trace.at(0).nu_psi + trace.log_xi;
    let t2 = (h_star_r - h_pi0_r).ceil().max(0.0) as usize;
    let t3 = scan_t3(kappa, h_star_pi0)?;
    let t1_bound = t2.min(t3).saturating_sub(1);
    Ok(RateConstants {
        c1,
        c1_tilde,
        kappa,
        h_star_r,
        h_star_pi0,
        h_pi0_r,
        t0,
        t1,
        t2,
        t3,
        t1_bound,
        t1_bound_ok: t1 <= t1_bound,
    })
}

/// Per-t values of the rate theorem's bound forms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThmBound {
    /// Regime-(a) geometric bound; NaN for t ≥ t1 (empty regime).
    pub geometric: f64,
    /// 1/(H(π*|π_{2t1})^{-1} + ½kappa²(t-t1)); NaN for t < t1.
    pub b1: f64,
    /// Same with H(π*|R)^{-1}.
    pub b2: f64,
    /// 5(C1² ∨ H(π*|R))/(t-t1); +inf at t = t1 (strict range).
    pub b3: f64,
    /// The regime-appropriate tightest bound.
    pub effective: f64,
}

/// Evaluates the theorem's bound at iterate `t`; `h_t1` is the measured
/// H(π*|π_{2t1}).
pub fn theorem_bound_curve(rc: &RateConstants, h_t1: f64, t: usize) -> ThmBound {
    if t < rc.t1 {
        let g = rc.h_star_pi0 * (1.0 + rc.kappa).powi(-(t as i32));
        return ThmBound {
            geometric: g,
            b1: f64::NAN,
            b2: f64::NAN,
            b3: f64::NAN,
            effective: g,
        };
    }
    let dt = (t - rc.t1) as f64;
    let quad = 0.5 * rc.kappa * rc.kappa * dt;
    let b1 = 1.0 / (1.0 / h_t1.max(1e-300) + quad);
    let b2 = 1.0 / (1.0 / rc.h_star_r + quad);
    let b3 = if t > rc.t1 {
        5.0 * (rc.c1 * rc.c1).max(rc.h_star_r) / dt
    } else {
        f64::INFINITY
    };
    ThmBound {
        geometric: f64::NAN,
        b1,
        b2,
        b3,
        effective: b1.min(b2).min(b3),
    }
}

/// Marginal-entropy bounds at iterate t: the trace-based proposition form
/// 2H(π*|π_{2⌊t/2⌋})/t and the closed corollary form
/// 10(C1² ∨ H(π*|R))/((⌊t/2⌋-t1)t).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MarginalBound {
    pub proposition: f64,
    pub corollary: f64,
}

pub fn marginal_bound(rc: &RateConstants, trace: &SinkhornTrace, t: usize) -> MarginalBound {
    let proposition = if t >= 1 {
        2.0 * trace.at(t / 2).h_star_pit / t as f64
    } else {
        f64::INFINITY
    };
    let corollary = if t >= 1 && t / 2 > rc.t1 {
        10.0 * (rc.c1 * rc.c1).max(rc.h_star_r) / ((t / 2 - rc.t1) as f64 * t as f64)
    } else {
        f64::INFINITY
    };
    MarginalBound {
        proposition,
        corollary,
    }
}

/// Bounds for the symmetric coupling entropy H(π_2t|π*) + H(π*|π_2t): the
/// intermediate form C1(√h + ½h) with h = H(μ_2t|μ), and the closed form
/// 5(C1² ∨ √H(π*|R) C1)/√((⌊t/2⌋-t1)t).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoSidedBound {
    pub intermediate: f64,
    pub closed: f64,
}

pub fn coupling_entropy_bound(rc: &RateConstants, trace: &SinkhornTrace, t: usize) -> TwoSidedBound {
    let h = trace.at(t).h_mu2t_mu;
    let intermediate = rc.c1 * (h.sqrt() + 0.5 * h);
    let closed = if t >= 1 && t / 2 > rc.t1 {
        5.0 * (rc.c1 * rc.c1).max(rc.h_star_r.sqrt() * rc.c1)
            / (((t / 2 - rc.t1) as f64 * t as f64).sqrt())
    } else {
        f64::INFINITY
    };
    TwoSidedBound {
        intermediate,
        closed,
    }
}

/// Bounds for the dual suboptimality gap: the intermediate form
/// (C1+C̃1)(√h + ½h) and the closed form
/// 5(C1 C̄1 ∧ √H(π*|R) C̄1)/√((⌊t/2⌋-t1)t) with C̄1 = C1 + C̃1.
pub fn suboptimality_bound(rc: &RateConstants, trace: &SinkhornTrace, t: usize) -> TwoSidedBound {
    let cbar = rc.c1 + rc.c1_tilde;
    let h = trace.at(t).h_mu2t_mu;
    let intermediate = cbar * (h.sqrt() + 0.5 * h);
    let closed = if t >= 1 && t / 2 > rc.t1 {
        5.0 * (rc.c1 * cbar).min(rc.h_star_r.sqrt() * cbar)
            / (((t / 2 - rc.t1) as f64 * t as f64).sqrt())
    } else {
        f64::INFINITY
    };
    TwoSidedBound {
        intermediate,
        closed,
    }
}

/// Least-squares slope of log(y) against log(x) over points with positive,
/// finite coordinates. `None` with fewer than 2 usable points.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Fitted log-log slopes over the final decade of a trace.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFits {
    /// slope of H(π*|π_2t) + H(π_2t|π*) vs t.
    pub coupling_entropy: Option<f64>,
    /// slope of H(μ_2t|μ) + H(μ|μ_2t) vs t.
    pub marginal_entropy: Option<f64>,
    /// slope of the dual gap vs t.
    pub dual_gap: Option<f64>,
}

pub fn slope_fits(trace: &SinkhornTrace) -> SlopeFits {
    let t_last = trace.len().saturating_sub(1);
    let t_from = (t_last / 10).max(1);
    let mut ts = Vec::new();
    let mut coupling = Vec::new();
    let mut marginal = Vec::new();
    let mut gap = Vec::new();
    for t in t_from..=t_last {
        let r = trace.at(t);
        ts.push(t as f64);
        coupling.push(r.h_star_pit + r.h_pit_star);
        marginal.push(r.h_mu2t_mu + r.h_mu_mu2t);
        gap.push(r.dual_gap);
    }
    SlopeFits {
        coupling_entropy: fit_loglog_slope(&ts, &coupling),
        marginal_entropy: fit_loglog_slope(&ts, &marginal),
        dual_gap: fit_loglog_slope(&ts, &gap),
    }
}

/// Worst-case slacks of every trace-level inequality; each is expected to
/// be ≥ 0 up to the stated tolerances.
#[derive(Debug, Clone, Serialize)]
pub struct DominanceReport {
    /// max relative error of the per-iteration identity
    /// H(π*|π_2t) - H(π*|π_{2t+2}) = H(μ|μ_2t) + H(ν|ν_{2t+1}).
    pub identity_max_rel_err: f64,
    /// min slack over the monotonicity chains.
    pub monotonicity_min_slack: f64,
    /// min over t of (theorem bound - measured H(π*|π_2t)).
    pub theorem_min_slack: f64,
    /// min slack of the difference-inequality chain.
    pub diff_ineq_min_slack: f64,
    /// min over t ≥ 1 of (proposition marginal bound - measured).
    pub marginal_prop_min_slack: f64,
    /// min over valid t of (corollary marginal bound - measured).
    pub marginal_cor_min_slack: f64,
    /// min over t of (intermediate coupling bound - measured sum).
    pub coupling_intermediate_min_slack: f64,
    /// min over valid t of (closed coupling bound - measured sum).
    pub coupling_closed_min_slack: f64,
    /// min over t of (intermediate suboptimality bound - gap).
    pub subopt_intermediate_min_slack: f64,
    /// min over valid t of (closed suboptimality bound - gap).
    pub subopt_closed_min_slack: f64,
    /// min over t of the dual gap itself (≥ -1e-10 by optimality).
    pub gap_min: f64,
    pub t1_bound_ok: bool,
}

/// Per-t bound curves aligned with the trace rows (t = 0 .. T).
#[derive(Debug, Clone, Serialize)]
pub struct BoundCurves {
    pub t: Vec<usize>,
    pub theorem_effective: Vec<f64>,
    pub theorem_geometric: Vec<f64>,
    pub theorem_b1: Vec<f64>,
    pub theorem_b2: Vec<f64>,
    pub theorem_b3: Vec<f64>,
    pub marginal_proposition: Vec<f64>,
    pub marginal_corollary: Vec<f64>,
    pub coupling_intermediate: Vec<f64>,
    pub coupling_closed: Vec<f64>,
    pub subopt_intermediate: Vec<f64>,
    pub subopt_closed: Vec<f64>,
}

/// Full certified report for one run.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub constants: RateConstants,
    pub c1_attained_t: usize,
    pub c1_tilde_attained_t: usize,
    pub alpha_grid_points: usize,
    pub curves: BoundCurves,
    pub dominance: DominanceReport,
    pub slopes: SlopeFits,
}

/// Evaluates every bound curve over the trace and verifies dominance.
pub fn build_bound_report(
    trace: &SinkhornTrace,
    c1c: &C1Constants,
    grid: &AlphaGrid,
) -> Result<BoundReport> {
    let rc = rate_constants(trace, c1c.c1, c1c.c1_tilde)?;
    let h_t1 = trace.at(rc.t1).h_star_pit;
    let n = trace.len();
    let mut curves = BoundCurves {
        t: Vec::with_capacity(n),
        theorem_effective: Vec::with_capacity(n),
        theorem_geometric: Vec::with_capacity(n),
        theorem_b1: Vec::with_capacity(n),
        theorem_b2: Vec::with_capacity(n),
        theorem_b3: Vec::with_capacity(n),
        marginal_proposition: Vec::with_capacity(n),
        marginal_corollary: Vec::with_capacity(n),
        coupling_intermediate: Vec::with_capacity(n),
        coupling_closed: Vec::with_capacity(n),
        subopt_intermediate: Vec::with_capacity(n),
        subopt_closed: Vec::with_capacity(n),
    };
    let mut dom = DominanceReport {
        identity_max_rel_err: 0.0,
        monotonicity_min_slack: f64::INFINITY,
        theorem_min_slack: f64::INFINITY,
        diff_ineq_min_slack: f64::INFINITY,
        marginal_prop_min_slack: f64::INFINITY,
        marginal_cor_min_slack: f64::INFINITY,
        coupling_intermediate_min_slack: f64::INFINITY,
        coupling_closed_min_slack: f64::INFINITY,
        subopt_intermediate_min_slack: f64::INFINITY,
        subopt_closed_min_slack: f64::INFINITY,
        gap_min: f64::INFINITY,
        t1_bound_ok: rc.t1_bound_ok,
    };
    for t in 0..n {
        let r = trace.at(t);
        let thm = theorem_bound_curve(&rc, h_t1, t);
        let mb = marginal_bound(&rc, trace, t);
        let cb = coupling_entropy_bound(&rc, trace, t);
        let sb = suboptimality_bound(&rc, trace, t);
        curves.t.push(t);
        curves.theorem_effective.push(thm.effective);
        curves.theorem_geometric.push(thm.geometric);
        curves.theorem_b1.push(thm.b1);
        curves.theorem_b2.push(thm.b2);
        curves.theorem_b3.push(thm.b3);
        curves.marginal_proposition.push(mb.proposition);
        curves.marginal_corollary.push(mb.corollary);
        curves.coupling_intermediate.push(cb.intermediate);
        curves.coupling_closed.push(cb.closed);
        curves.subopt_intermediate.push(sb.intermediate);
        curves.subopt_closed.push(sb.closed);

        dom.theorem_min_slack = dom.theorem_min_slack.min(thm.effective - r.h_star_pit);
        let marg = r.h_mu2t_mu + r.h_mu_mu2t;
        if t >= 1 {
            dom.marginal_prop_min_slack = dom.marginal_prop_min_slack.min(mb.proposition - marg);
        }
        let sym = r.h_star_pit + r.h_pit_star;
        dom.coupling_intermediate_min_slack =
            dom.coupling_intermediate_min_slack.min(cb.intermediate - sym);
        dom.subopt_intermediate_min_slack =
            dom.subopt_intermediate_min_slack.min(sb.intermediate - r.dual_gap);
        dom.gap_min = dom.gap_min.min(r.dual_gap);
        // corollaries hold on their stated strict ranges
        if t >= 2 * rc.t1 && t / 2 > rc.t1 {
            dom.marginal_cor_min_slack = dom.marginal_cor_min_slack.min(mb.corollary - marg);
            dom.coupling_closed_min_slack = dom.coupling_closed_min_slack.min(cb.closed - sym);
            dom.subopt_closed_min_slack =
                dom.subopt_closed_min_slack.min(sb.closed - r.dual_gap);
        }
    }
    // identity, monotonicity, and the difference inequality need successive
    // records
    for t in 0..n.saturating_sub(1) {
        let r = trace.at(t);
        let rn = trace.at(t + 1);
        let lhs = r.h_star_pit - rn.h_star_pit;
        let rhs = r.h_mu_mu2t + r.h_nu_nu2t1;
        dom.identity_max_rel_err = dom
            .identity_max_rel_err
            .max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        for slack in [
            r.h_mu2t_mu - r.h_nu_nu2t1,
            r.h_nu_nu2t1 - rn.h_mu2t_mu,
            r.h_mu_mu2t - r.h_nu2t1_nu,
            r.h_nu2t1_nu - rn.h_mu_mu2t,
            r.h_star_pit - rn.h_star_pit,
        ] {
            dom.monotonicity_min_slack = dom.monotonicity_min_slack.min(slack);
        }
        let decay = if t < rc.t1 {
            rc.kappa * rn.h_star_pit
        } else {
            rc.kappa * rc.kappa * rn.h_star_pit * rn.h_star_pit
        };
        dom.diff_ineq_min_slack = dom.diff_ineq_min_slack.min(lhs - decay);
    }
    dom.monotonicity_min_slack = dom
        .monotonicity_min_slack
        .min(trace.initial().h_star_pit - trace.at(0).h_star_pit);
    Ok(BoundReport {
        constants: rc,
        c1_attained_t: c1c.c1_attained_t,
        c1_tilde_attained_t: c1c.c1_tilde_attained_t,
        alpha_grid_points: grid.values().len(),
        curves,
        dominance: dom,
        slopes: slope_fits(trace),
    })
}

/// Outcome of a marginal-stability comparison between two solved problems.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// measured H(π'|π) + H(π|π').
    pub measured: f64,
    /// theorem bound from the potential-difference constants.
    pub bound: f64,
    /// bound from the same-base-coupling variant (both couplings expressed
    /// over μ⊗ν); also an upper bound for `measured`.
    pub same_base_bound: f64,
    pub c1: f64,
    /// None when ν = ν' (the C2 terms are dropped).
    pub c2: Option<f64>,
    pub h_mu_prime_mu: f64,
    pub h_mu_mu_prime: f64,
    pub h_nu_prime_nu: f64,
    pub h_nu_nu_prime: f64,
}

fn weights_equal(a: &DiscreteMeasure, b: &DiscreteMeasure) -> bool {
    a.same_support(b) && a.weights() == b.weights()
}

/// Solves both problems to reference tolerance and verifies the stability
/// theorem: the symmetric coupling entropy is controlled by the marginal
/// entropies with CKP constants of the potential differences.
#[allow(clippy::too_many_arguments)]
pub fn stability_bound(
    model: &CostModel,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
    mx_prime: &DiscreteMeasure,
    my_prime: &DiscreteMeasure,
    grid: &AlphaGrid,
    ref_tol: f64,
    cap: usize,
) -> Result<StabilityReport> {
    if !mx.same_support(mx_prime) {
        return Err(Error::SupportMismatch(
            "X supports differ; the relative entropies H(μ'|μ), H(μ|μ') are infinite".into(),
        ));
    }
    if !my.same_support(my_prime) {
        return Err(Error::SupportMismatch(
            "Y supports differ; the relative entropies H(ν'|ν), H(ν|ν') are infinite".into(),
        ));
    }
    let cost = crate::cost::build_cost_matrix(model, mx, my)?;
    let (pi, pots) = solve_reference(&cost, mx, my, ref_tol, cap)?;
    let (pi_prime, pots_prime) = solve_reference(&cost, mx_prime, my_prime, ref_tol, cap)?;

    let measured = pi_prime.relative_entropy(&pi)? + pi.relative_entropy(&pi_prime)?;
    let h_mu_prime_mu = kl(mx_prime.weights(), mx.weights())?;
    let h_mu_mu_prime = kl(mx.weights(), mx_prime.weights())?;
    let h_nu_prime_nu = kl(my_prime.weights(), my.weights())?;
    let h_nu_nu_prime = kl(my.weights(), my_prime.weights())?;

    let dphi: Vec<f64> = pots_prime
        .phi
        .iter()
        .zip(&pots.phi)
        .map(|(a, b)| a - b)
        .collect();
    let c1 = cf_constant(&dphi, mx, grid)?.value;
    let nu_equal = weights_equal(my, my_prime);
    let mut bound =
        c1 * h_mu_prime_mu.sqrt() + (1.0 + c1 / 2.0) * h_mu_prime_mu + h_mu_mu_prime;
    let c2 = if nu_equal {
        None
    } else {
        let dpsi: Vec<f64> = pots_prime
            .psi
            .iter()
            .zip(&pots.psi)
            .map(|(a, b)| a - b)
            .collect();
        let c2 = cf_constant(&dpsi, my, grid)?.value;
        bound += c2 * h_nu_prime_nu.sqrt() + (1.0 + c2 / 2.0) * h_nu_prime_nu + h_nu_nu_prime;
        Some(c2)
    };

    // Same-base variant: express π' over μ⊗ν via f' = φ' + log(dμ'/dμ),
    // g' = ψ' + log(dν'/dν); then the mixed entropy terms vanish.
    let f_prime: Vec<f64> = pots_prime
        .phi
        .iter()
        .zip(mx_prime.log_weights().iter().zip(mx.log_weights()))
        .map(|(p, (lp, l))| p + lp - l)
        .collect();
    let df: Vec<f64> = f_prime.iter().zip(&pots.phi).map(|(a, b)| a - b).collect();
    let c1b = cf_constant(&df, mx, grid)?.value;
    let mut same_base_bound = c1b * (h_mu_prime_mu.sqrt() + 0.5 * h_mu_prime_mu);
    if !nu_equal {
        let g_prime: Vec<f64> = pots_prime
            .psi
            .iter()
            .zip(my_prime.log_weights().iter().zip(my.log_weights()))
            .map(|(p, (lp, l))| p + lp - l)
            .collect();
        let dg: Vec<f64> = g_prime.iter().zip(&pots.psi).map(|(a, b)| a - b).collect();
        let c2b = cf_constant(&dg, my, grid)?.value;
        same_base_bound += c2b * (h_nu_prime_nu.sqrt() + 0.5 * h_nu_prime_nu);
    }

    Ok(StabilityReport {
        measured,
        bound,
        same_base_bound,
        c1,
        c2,
        h_mu_prime_mu,
        h_mu_mu_prime,
        h_nu_prime_nu,
        h_nu_nu_prime,
    })
}

/// Verification of the value-function estimate
/// H(π|R) - H(π'|R) ≤ H(π|π') + C̃1(√H(μ'|μ)+½H) + C̃2(√H(ν'|ν)+½H)
/// for two potential-form couplings over the same base μ⊗ν.
#[derive(Debug, Clone, Serialize)]
pub struct ValueFunReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub c1_tilde: f64,
    pub c2_tilde: Option<f64>,
    pub h_pi_r: f64,
    pub h_pi_prime_r: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn value_function_bound(
    pi: &Coupling,
    pi_prime: &Coupling,
    pots: &Potentials,
    pots_prime: &Potentials,
    log_xi: f64,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
    grid: &AlphaGrid,
) -> Result<ValueFunReport> {
    let value = |c: &Coupling, p: &Potentials| -> f64 {
        let fx: f64 = c.row_marginal().iter().zip(&p.phi).map(|(w, v)| w * v).sum();
        let gy: f64 = c.col_marginal().iter().zip(&p.psi).map(|(w, v)| w * v).sum();
        fx + gy + log_xi
    };
    let h_pi_r = value(pi, pots);
    let h_pi_prime_r = value(pi_prime, pots_prime);
    let lhs = h_pi_r - h_pi_prime_r;

    let h_mu = kl(pi_prime.row_marginal(), mx.weights())?;
    let h_nu = kl(pi_prime.col_marginal(), my.weights())?;
    let c1_tilde = cf_constant(&pots_prime.phi, mx, grid)?.value;
    let mut rhs = pi.relative_entropy(pi_prime)? + c1_tilde * (h_mu.sqrt() + 0.5 * h_mu);
    let nu_equal = pi_prime
        .col_marginal()
        .iter()
        .zip(my.weights())
        .all(|(a, b)| (a - b).abs() <= 1e-12);
    let c2_tilde = if nu_equal {
        None
    } else {
        let c2 = cf_constant(&pots_prime.psi, my, grid)?.value;
        rhs += c2 * (h_nu.sqrt() + 0.5 * h_nu);
        Some(c2)
    };
    Ok(ValueFunReport {
        lhs,
        rhs,
        slack: rhs - lhs,
        c1_tilde,
        c2_tilde,
        h_pi_r,
        h_pi_prime_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{build_cost_matrix, CostKind, CostMatrix};
    use crate::sinkhorn::{attach_reference, primal_coupling, run};
    use crate::measures::{discretize_subexp_family, perturb, PerturbKind, SubexpFamily};
    use proptest::prelude::*;

    fn uniform(xs: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(xs.iter().map(|&x| vec![x]).collect(), vec![1.0; xs.len()]).unwrap()
    }

    #[test]
    fn cf_zero_function_hits_grid_cap() {
        let m = uniform(&[0.0, 1.0]);
        let grid = AlphaGrid::default();
        let r = cf_constant(&[0.0, 0.0], &m, &grid).unwrap();
        let expect = 3.0 * 2.0f64.powi(-20);
        assert!((r.value - expect).abs() <= 1e-12 * expect, "{}", r.value);
    }

    #[test]
    fn cf_unit_function_closed_form() {
        let m = uniform(&[0.0, 1.0]);
        let grid = AlphaGrid::default();
        let r = cf_constant(&[1.0, 1.0], &m, &grid).unwrap();
        let expect = 2.0 + 3.0 * 2.0f64.powi(-20);
        assert!((r.value - expect).abs() <= 1e-9, "{}", r.value);
    }

    #[test]
    fn cf_scaling_substitution() {
        let m = uniform(&[0.0, 1.0, 2.0]);
        let f = [0.5, -1.25, 2.0];
        let grid = AlphaGrid::standard(101);
        let s = 3.0;
        let scaled_f: Vec<f64> = f.iter().map(|v| s * v).collect();
        let base = cf_constant(&f, &m, &grid).unwrap().value;
        let scaled = cf_constant(&scaled_f, &m, &grid.scaled(1.0 / s)).unwrap().value;
        assert!((scaled - s * base).abs() <= 1e-9 * (1.0 + s * base));
    }

    #[test]
    fn bv_identical_measures() {
        let m = uniform(&[0.0, 1.0]);
        let r = bolley_villani_check(&[0.7, -0.3], &m, &m, &AlphaGrid::default()).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.h, 0.0);
        assert!(r.slack >= 0.0);
    }

    #[test]
    fn bv_constant_function_zero_lhs() {
        let m = uniform(&[0.0, 1.0]);
        let mp = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap();
        let r = bolley_villani_check(&[2.0, 2.0], &m, &mp, &AlphaGrid::default()).unwrap();
        assert!(r.lhs <= 1e-15);
        assert!(r.slack >= -1e-9);
    }

    #[test]
    fn kappa_example() {
        assert!((kappa_constant(2.0, 2.0) - 1.0 / 3.0).abs() <= 1e-15);
    }

    #[test]
    fn t3_forward_scan_example() {
        // kappa = 1/3, H(π*|π_0) = 1: t=1 gives 0 + 0 < ln 2; t=2 gives
        // ln(4/3) + ln 2 ≥ ln 2.
        assert_eq!(scan_t3(1.0 / 3.0, 1.0).unwrap(), 2);
    }

    #[test]
    fn theorem_bound_examples() {
        let rc = RateConstants {
            c1: 1.0,
            c1_tilde: 1.0,
            kappa: 1.0 / 3.0,
            h_star_r: 2.0,
            h_star_pi0: 1.0,
            h_pi0_r: 0.0,
            t0: 1,
            t1: 0,
            t2: 2,
            t3: 2,
            t1_bound: 1,
            t1_bound_ok: true,
        };
        // t = t1: first regime-(b) form equals the measured value at t1
        let b = theorem_bound_curve(&rc, 0.7, 0);
        assert!((b.b1 - 0.7).abs() <= 1e-15);
        assert!(b.b3.is_infinite());
        // second form at t = 18: 1/(1/2 + (1/9)(18)/2) = 2/3
        let b = theorem_bound_curve(&rc, 0.7, 18);
        assert!((b.b2 - 2.0 / 3.0).abs() <= 1e-12);
        // geometric regime
        let rc_geo = RateConstants { t1: 3, ..rc };
        let b = theorem_bound_curve(&rc_geo, 0.7, 1);
        assert!((b.geometric - 0.75).abs() <= 1e-12);
        assert!((b.effective - 0.75).abs() <= 1e-12);
    }

    fn bench() -> (DiscreteMeasure, DiscreteMeasure, CostMatrix) {
        let mx = discretize_subexp_family(SubexpFamily::Gaussian, &[0.0], 1.0, 18, 3.0).unwrap();
        let my = discretize_subexp_family(SubexpFamily::Gaussian, &[0.5], 0.8, 15, 3.0).unwrap();
        let model = CostModel::new(CostKind::SqDistance, 0.5).unwrap();
        let c = build_cost_matrix(&model, &mx, &my).unwrap();
        (mx, my, c)
    }

    fn solved_trace() -> (SinkhornTrace, Potentials, DiscreteMeasure, DiscreteMeasure, CostMatrix)
    {
        let (mx, my, c) = bench();
        let mut trace = run(&c, &mx, &my, 400, 1e-11).unwrap();
        let (_, pots) = solve_reference(&c, &mx, &my, 1e-14, 100_000).unwrap();
        attach_reference(&mut trace, &pots, &c, &mx, &my).unwrap();
        (trace, pots, mx, my, c)
    }

    #[test]
    fn full_report_dominates_benchmark() {
        let (trace, pots, mx, _, _) = solved_trace();
        let grid = AlphaGrid::default();
        let c1c = c1_constants(&trace, &pots, &mx, &grid).unwrap();
        let report = build_bound_report(&trace, &c1c, &grid).unwrap();
        let d = &report.dominance;
        assert!(d.identity_max_rel_err <= 1e-9, "{}", d.identity_max_rel_err);
        assert!(d.monotonicity_min_slack >= -1e-10, "{}", d.monotonicity_min_slack);
        assert!(d.theorem_min_slack >= -1e-9, "{}", d.theorem_min_slack);
        assert!(d.diff_ineq_min_slack >= -1e-9, "{}", d.diff_ineq_min_slack);
        assert!(d.marginal_prop_min_slack >= -1e-9);
        assert!(d.marginal_cor_min_slack >= -1e-9);
        assert!(d.coupling_intermediate_min_slack >= -1e-9);
        assert!(d.coupling_closed_min_slack >= -1e-9);
        assert!(d.subopt_intermediate_min_slack >= -1e-9);
        assert!(d.subopt_closed_min_slack >= -1e-9);
        assert!(d.gap_min >= -1e-10);
        assert!(d.t1_bound_ok);
        assert!(report.constants.kappa > 0.0);
        // O(1/t) and O(1/t^2) rates show up in the fitted slopes
        assert!(report.slopes.coupling_entropy.unwrap() <= -0.9);
        assert!(report.slopes.marginal_entropy.unwrap() <= -1.8);
    }

    #[test]
    fn c1_deterministic_across_runs() {
        let (trace, pots, mx, _, _) = solved_trace();
        let grid = AlphaGrid::default();
        let a = c1_constants(&trace, &pots, &mx, &grid).unwrap();
        let b = c1_constants(&trace, &pots, &mx, &grid).unwrap();
        assert_eq!(a.c1.to_bits(), b.c1.to_bits());
        assert_eq!(a.c1_tilde.to_bits(), b.c1_tilde.to_bits());
    }

    #[test]
    fn marginal_bound_trivial_forms() {
        let (trace, pots, mx, _, _) = solved_trace();
        let grid = AlphaGrid::default();
        let c1c = c1_constants(&trace, &pots, &mx, &grid).unwrap();
        let rc = rate_constants(&trace, c1c.c1, c1c.c1_tilde).unwrap();
        let mb1 = marginal_bound(&rc, &trace, 1);
        assert!((mb1.proposition - 2.0 * trace.at(0).h_star_pit).abs() <= 1e-15);
        let mb4 = marginal_bound(&rc, &trace, 4);
        assert!((mb4.proposition - 2.0 * trace.at(2).h_star_pit / 4.0).abs() <= 1e-15);
        assert!(marginal_bound(&rc, &trace, 0).proposition.is_infinite());
    }

    #[test]
    fn stability_identical_problems() {
        let mx = discretize_subexp_family(SubexpFamily::Gaussian, &[0.0], 1.0, 8, 2.5).unwrap();
        let my = discretize_subexp_family(SubexpFamily::Gaussian, &[0.3], 0.9, 7, 2.5).unwrap();
        let model = CostModel::new(CostKind::SqDistance, 1.0).unwrap();
        let r = stability_bound(&model, &mx, &my, &mx, &my, &AlphaGrid::default(), 1e-14, 50_000)
            .unwrap();
        assert!(r.measured.abs() <= 1e-10, "{}", r.measured);
        assert_eq!(r.bound, 0.0);
        assert!(r.c2.is_none());
    }

    #[test]
    fn stability_reweight_dominated() {
        let mx = discretize_subexp_family(SubexpFamily::Gaussian, &[0.0], 1.0, 10, 2.5).unwrap();
        let my = discretize_subexp_family(SubexpFamily::Gaussian, &[0.3], 0.9, 9, 2.5).unwrap();
        let model = CostModel::new(CostKind::SqDistance, 1.0).unwrap();
        for seed in 0..3u64 {
            let mxp = perturb(&mx, PerturbKind::Reweight, 0.05, seed).unwrap();
            let myp = perturb(&my, PerturbKind::Reweight, 0.05, seed + 100).unwrap();
            let r = stability_bound(
                &model,
                &mx,
                &my,
                &mxp,
                &myp,
                &AlphaGrid::default(),
                1e-14,
                50_000,
            )
            .unwrap();
            assert!(r.measured <= r.bound + 1e-9, "{} > {}", r.measured, r.bound);
            assert!(
                r.measured <= r.same_base_bound + 1e-9,
                "{} > {}",
                r.measured,
                r.same_base_bound
            );
            assert!(r.c2.is_some());
            // ν' = ν drops the C2 terms
            let r2 = stability_bound(
                &model,
                &mx,
                &my,
                &mxp,
                &my,
                &AlphaGrid::default(),
                1e-14,
                50_000,
            )
            .unwrap();
            assert!(r2.c2.is_none());
            assert!(r2.measured <= r2.bound + 1e-9);
        }
    }

    #[test]
    fn stability_support_mismatch_is_error() {
        let mx = uniform(&[0.0, 1.0]);
        let mx2 = uniform(&[0.0, 1.5]);
        let my = uniform(&[0.0, 1.0]);
        let model = CostModel::new(CostKind::SqDistance, 1.0).unwrap();
        let err = stability_bound(&model, &mx, &my, &mx2, &my, &AlphaGrid::default(), 1e-12, 1000);
        assert!(matches!(err, Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn value_function_identical_couplings() {
        let (trace, pots, mx, my, c) = solved_trace();
        let pi = primal_coupling(&trace.phis[3], &trace.psis[3], &c, &mx, &my).unwrap();
        let p3 = Potentials {
            phi: trace.phis[3].clone(),
            psi: trace.psis[3].clone(),
        };
        let r =
            value_function_bound(&pi, &pi, &p3, &p3, trace.log_xi, &mx, &my, &AlphaGrid::default())
                .unwrap();
        assert!(r.lhs.abs() <= 1e-12);
        assert!(r.rhs >= -1e-12);
        let _ = pots;
    }

    #[test]
    fn value_function_cross_checks_suboptimality_chain() {
        let (trace, pots, mx, my, c) = solved_trace();
        let pi_star = primal_coupling(&pots.phi, &pots.psi, &c, &mx, &my).unwrap();
        for t in [0usize, 2, 6] {
            let pi_t = primal_coupling(&trace.phis[t], &trace.psis[t], &c, &mx, &my).unwrap();
            let p_t = Potentials {
                phi: trace.phis[t].clone(),
                psi: trace.psis[t].clone(),
            };
            // π = π*, π' = π_2t: lhs = H(π*|R) - H(π_2t|R) with genuine values
            let r = value_function_bound(
                &pi_star,
                &pi_t,
                &pots,
                &p_t,
                trace.log_xi,
                &mx,
                &my,
                &AlphaGrid::default(),
            )
            .unwrap();
            assert!(r.slack >= -1e-9, "t={t}: slack {}", r.slack);
            assert!((r.h_pi_r - trace.initial().h_star_pit).abs() <= 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn bv_randomized_slack_nonnegative(
            (f, w, wp) in (2usize..8).prop_flat_map(|n| (
                proptest::collection::vec(-4.0f64..4.0, n),
                proptest::collection::vec(0.05f64..1.0, n),
                proptest::collection::vec(0.05f64..1.0, n),
            )),
        ) {
            let pts: Vec<Vec<f64>> = (0..f.len()).map(|i| vec![i as f64]).collect();
            let m = DiscreteMeasure::new(pts.clone(), w).unwrap();
            let mp = DiscreteMeasure::new(pts, wp).unwrap();
            let r = bolley_villani_check(&f, &m, &mp, &AlphaGrid::standard(81)).unwrap();
            prop_assert!(r.slack >= -1e-9, "slack {}", r.slack);
        }

        #[test]
        fn value_function_random_potentials(
            (f, g) in (0u8..1).prop_flat_map(|_| (
                proptest::collection::vec(-1.5f64..1.5, 3),
                proptest::collection::vec(-1.5f64..1.5, 3),
            )),
        ) {
            let m = uniform(&[0.0, 1.0, 2.0]);
            let model = CostModel::new(CostKind::SqDistance, 1.0).unwrap();
            let c = build_cost_matrix(&model, &m, &m).unwrap();
            let lxi = crate::sinkhorn::log_xi(&c, &m, &m);
            // normalize the random potentials so both couplings have mass 1
            let normalize = |f: &[f64], g: &[f64]| -> Potentials {
                let terms: Vec<f64> = (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .map(|(i, j)| f[i] + g[j] - c.at(i, j))
                    .collect();
                let lw: Vec<f64> = (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .map(|(i, j)| m.log_weights()[i] + m.log_weights()[j])
                    .collect();
                let mass = log_sum_exp(&terms, &lw).unwrap();
                Potentials {
                    phi: f.to_vec(),
                    psi: g.iter().map(|v| v - mass).collect(),
                }
            };
            let (pots, pots_prime) = (normalize(&f, &g), normalize(&g, &f));
            let pi = primal_coupling(&pots.phi, &pots.psi, &c, &m, &m).unwrap();
            let pi_prime = primal_coupling(&pots_prime.phi, &pots_prime.psi, &c, &m, &m).unwrap();
            let r = value_function_bound(
                &pi, &pi_prime, &pots, &pots_prime, lxi, &m, &m, &AlphaGrid::standard(81),
            ).unwrap();
            prop_assert!(r.slack >= -1e-9, "slack {}", r.slack);
        }
    }
}
