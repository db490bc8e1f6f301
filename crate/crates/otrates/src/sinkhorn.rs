//! Log-domain Sinkhorn iteration with full per-iteration diagnostics, plus
//! the high-precision reference solve for the optimal coupling and
//! potentials.
//!
//! All iteration happens in the log domain; no kernel matrix is ever
//! exponentiated wholesale. Both half-steps go through the conjugation
//! kernels of the `conjugate` module, so re-conjugating trace iterates
//! reproduces them bit-for-bit.
//!
//! Entropy diagnostics use the closed forms implied by the marginal
//! densities dμ_2t/dμ = e^{φ_t - φ_{t+1}} and dν_{2t+1}/dν =
//! e^{ψ_t - ψ_{t+1}}, avoiding any linear-domain cancellation.

use crate::conjugate::{conjugate, conjugate_rev};
use crate::cost::CostMatrix;
use crate::divergence::lse_terms;
use crate::measures::DiscreteMeasure;
use crate::{Error, Result};

/// Additional convergence requirement for the reference solve: the last
/// φ-update must be below this sup-norm so that the Schrödinger residual of
/// the returned potentials is at the 1e-10 level.
const REF_SUP_TOL: f64 = 1e-12;

/// Dual variables over the two supports (nats).
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Joint probability matrix on X-support × Y-support with cached
/// log-density relative to the product of its base marginals.
#[derive(Debug, Clone)]
pub struct Coupling {
    /// log(dπ/d(base_x ⊗ base_y)), flat row-major.
    log_density: Vec<f64>,
    /// π_ij, flat row-major.
    joint: Vec<f64>,
    /// log base weights: log base_x_i + log base_y_j is the log reference
    /// mass of cell (i, j).
    log_base_x: Vec<f64>,
    log_base_y: Vec<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
    nx: usize,
    ny: usize,
}

impl Coupling {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn joint_at(&self, i: usize, j: usize) -> f64 {
        self.joint[i * self.ny + j]
    }

    #[inline]
    pub fn log_density_at(&self, i: usize, j: usize) -> f64 {
        self.log_density[i * self.ny + j]
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    pub fn total_mass(&self) -> f64 {
        self.joint.iter().sum()
    }

    /// H(self | other) in nats, accumulated from log-densities and log base
    /// weights to avoid cancellation. Both couplings must live on the same
    /// support grid (their base measures may differ).
    pub fn relative_entropy(&self, other: &Coupling) -> Result<f64> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(Error::Invalid(format!(
                "coupling shapes differ: {}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )));
        }
        let mut acc = 0.0;
        for i in 0..self.nx {
            for j in 0..self.ny {
                let p = self.joint_at(i, j);
                if p == 0.0 {
                    continue;
                }
                let lp = self.log_density_at(i, j) + self.log_base_x[i] + self.log_base_y[j];
                let lq = other.log_density_at(i, j) + other.log_base_x[i] + other.log_base_y[j];
                acc += p * (lp - lq);
            }
        }
        Ok(acc)
    }
}

/// Builds the potential-form coupling π_ij = μ_i ν_j e^{φ_i + ψ_j - c_ij}.
/// Fails when the total mass strays from 1 by more than 1e-8, which signals
/// potentials that do not come from a completed half-step.
pub fn primal_coupling(
    phi: &[f64],
    psi: &[f64],
    cost: &CostMatrix,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
) -> Result<Coupling> {
    let (nx, ny) = (cost.nx(), cost.ny());
    if phi.len() != nx || psi.len() != ny {
        return Err(Error::Invalid(format!(
            "potential lengths ({}, {}) do not match cost shape {}x{}",
            phi.len(),
            psi.len(),
            nx,
            ny
        )));
    }
    let (lmu, lnu) = (mx.log_weights(), my.log_weights());
    let mut log_density = Vec::with_capacity(nx * ny);
    let mut joint = Vec::with_capacity(nx * ny);
    let mut row_marginal = vec![0.0; nx];
    let mut col_marginal = vec![0.0; ny];
    for i in 0..nx {
        for j in 0..ny {
            let ld = phi[i] + psi[j] - cost.at(i, j);
            let mass = (ld + lmu[i] + lnu[j]).exp();
            if !mass.is_finite() {
                return Err(Error::Invalid(format!(
                    "non-finite coupling mass at ({i}, {j})"
                )));
            }
            log_density.push(ld);
            joint.push(mass);
            row_marginal[i] += mass;
            col_marginal[j] += mass;
        }
    }
    let mass: f64 = joint.iter().sum();
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::Invalid(format!(
            "coupling mass {mass} deviates from 1 beyond 1e-8; potentials are not a completed half-step"
        )));
    }
    Ok(Coupling {
        log_density,
        joint,
        log_base_x: lmu.to_vec(),
        log_base_y: lnu.to_vec(),
        row_marginal,
        col_marginal,
        nx,
        ny,
    })
}

/// log ξ = log ∫ e^{-c} d(μ⊗ν), the normalizer of the reference measure R.
pub fn log_xi(cost: &CostMatrix, mx: &DiscreteMeasure, my: &DiscreteMeasure) -> f64 {
    let (lmu, lnu) = (mx.log_weights(), my.log_weights());
    lse_terms(
        (0..cost.nx())
            .flat_map(|i| (0..cost.ny()).map(move |j| (i, j)))
            .map(|(i, j)| -cost.at(i, j) + lmu[i] + lnu[j]),
    )
}

/// The reference coupling R ∝ e^{-c} μ⊗ν, i.e. the potential form with
/// φ ≡ 0, ψ ≡ -log ξ.
pub fn reference_coupling(
    cost: &CostMatrix,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
    lxi: f64,
) -> Result<Coupling> {
    primal_coupling(
        &vec![0.0; cost.nx()],
        &vec![-lxi; cost.ny()],
        cost,
        mx,
        my,
    )
}

/// One full Sinkhorn step from φ_t: returns (ψ_t, φ_{t+1}).
pub fn sinkhorn_step(
    phi: &[f64],
    cost: &CostMatrix,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
) -> (Vec<f64>, Vec<f64>) {
    let psi = conjugate(phi, cost, mx);
    let phi_next = conjugate_rev(&psi, cost, my);
    (psi, phi_next)
}

/// Per-iteration diagnostics. The record at `t = -1` describes the
/// initialization π_{-1} = R. Reference-dependent fields are NaN until
/// [`attach_reference`] fills them.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub t: i64,
    /// μ(φ_t); 0 at t = -1.
    pub mu_phi: f64,
    /// ν(ψ_t); -log ξ at t = -1.
    pub nu_psi: f64,
    /// H(μ_2t|μ) (for t = -1: first marginal of R vs μ).
    pub h_mu2t_mu: f64,
    pub h_mu_mu2t: f64,
    /// H(ν|ν_{2t+1}) (for t = -1: ν vs second marginal of R).
    pub h_nu_nu2t1: f64,
    pub h_nu2t1_nu: f64,
    /// H(π*|π_2t); H(π*|R) at t = -1.
    pub h_star_pit: f64,
    /// H(π_2t|π*); H(R|π*) at t = -1.
    pub h_pit_star: f64,
    /// μ(φ*) + ν(ψ*) - μ(φ_t) - ν(ψ_t).
    pub dual_gap: f64,
}

/// Full iterate history of a run.
#[derive(Debug, Clone)]
pub struct SinkhornTrace {
    pub log_xi: f64,
    /// records[0] is the t = -1 entry; records[t + 1] belongs to iterate t.
    pub records: Vec<TraceRecord>,
    /// φ_0 .. φ_{T+1} (one past the last recorded iterate).
    pub phis: Vec<Vec<f64>>,
    /// ψ_0 .. ψ_{T+1}.
    pub psis: Vec<Vec<f64>>,
    pub reference_attached: bool,
}

impl SinkhornTrace {
    /// Number of recorded iterates T + 1 (excluding the t = -1 record).
    pub fn len(&self) -> usize {
        self.records.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Record of iterate t ≥ 0.
    pub fn at(&self, t: usize) -> &TraceRecord {
        &self.records[t + 1]
    }

    /// The t = -1 record (initialization at R).
    pub fn initial(&self) -> &TraceRecord {
        &self.records[0]
    }

    /// Weights of μ_2t, the first marginal of π_2t.
    pub fn mu_2t(&self, t: usize, mx: &DiscreteMeasure) -> Vec<f64> {
        mx.weights()
            .iter()
            .zip(self.phis[t].iter().zip(&self.phis[t + 1]))
            .map(|(w, (a, b))| w * (a - b).exp())
            .collect()
    }
}

fn check_finite(v: &[f64], iter: usize, what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver {
            iter,
            msg: format!("{what} has non-finite entries"),
        });
    }
    Ok(())
}

/// H(μ_2t|μ) and H(μ|μ_2t) from successive φ iterates:
/// dμ_2t/dμ = e^{φ_t - φ_{t+1}}.
fn marginal_entropies(m: &DiscreteMeasure, cur: &[f64], next: &[f64]) -> (f64, f64) {
    let mut forward = 0.0; // H(μ_2t|μ) = Σ μ e^{φ_t-φ_{t+1}} (φ_t-φ_{t+1})
    let mut reverse = 0.0; // H(μ|μ_2t)  = μ(φ_{t+1}-φ_t)
    for ((w, a), b) in m.weights().iter().zip(cur).zip(next) {
        let d = a - b;
        forward += w * d.exp() * d;
        reverse += w * (b - a);
    }
    (forward, reverse)
}

/// Runs Sinkhorn from φ_0 = 0 until `t = max_t - 1` or until
/// H(μ_2t|μ) + H(μ|μ_2t) ≤ stop_tol, recording every iterate.
pub fn run(
    cost: &CostMatrix,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
    max_t: usize,
    stop_tol: f64,
) -> Result<SinkhornTrace> {
    if max_t < 1 {
        return Err(Error::Invalid("max_t must be at least 1".into()));
    }
    let lxi = log_xi(cost, mx, my);
    let r = reference_coupling(cost, mx, my, lxi)?;
    let mut records = Vec::with_capacity(max_t + 1);
    records.push(TraceRecord {
        t: -1,
        mu_phi: 0.0,
        nu_psi: -lxi,
        h_mu2t_mu: crate::divergence::kl(r.row_marginal(), mx.weights())?,
        h_mu_mu2t: crate::divergence::kl(mx.weights(), r.row_marginal())?,
        h_nu_nu2t1: crate::divergence::kl(my.weights(), r.col_marginal())?,
        h_nu2t1_nu: crate::divergence::kl(r.col_marginal(), my.weights())?,
        h_star_pit: f64::NAN,
        h_pit_star: f64::NAN,
        dual_gap: f64::NAN,
    });

    let mut phis = vec![vec![0.0; cost.nx()]];
    let mut psis: Vec<Vec<f64>> = Vec::new();
    let mut marginal_pairs = Vec::new();
    for t in 0..max_t {
        let (psi, phi_next) = sinkhorn_step(&phis[t], cost, mx, my);
        check_finite(&psi, t, "psi")?;
        check_finite(&phi_next, t, "phi")?;
        let (h_fwd, h_rev) = marginal_entropies(mx, &phis[t], &phi_next);
        psis.push(psi);
        phis.push(phi_next);
        marginal_pairs.push((h_fwd, h_rev));
        if h_fwd + h_rev <= stop_tol {
            break;
        }
    }
    // One extra ψ half-step so the last recorded iterate's ν-entropies
    // (which need ψ_{T+1}) are computable.
    let last_t = psis.len() - 1;
    if psis.len() == phis.len() - 1 {
        psis.push(conjugate(&phis[last_t + 1], cost, mx));
    }

    for t in 0..=last_t {
        let (h_mu2t_mu, h_mu_mu2t) = marginal_pairs[t];
        let (h_nu2t1_nu, h_nu_nu2t1) = {
            let mut forward = 0.0;
            let mut reverse = 0.0;
            for ((w, a), b) in my.weights().iter().zip(&psis[t]).zip(&psis[t + 1]) {
                let d = a - b;
                forward += w * d.exp() * d;
                reverse += w * (b - a);
            }
            (forward, reverse)
        };
        records.push(TraceRecord {
            t: t as i64,
            mu_phi: mx.integrate(&phis[t]),
            nu_psi: my.integrate(&psis[t]),
            h_mu2t_mu,
            h_mu_mu2t,
            h_nu_nu2t1,
            h_nu2t1_nu,
            h_star_pit: f64::NAN,
            h_pit_star: f64::NAN,
            dual_gap: f64::NAN,
        });
    }
    Ok(SinkhornTrace {
        log_xi: lxi,
        records,
        phis,
        psis,
        reference_attached: false,
    })
}

/// Dual suboptimality μ(φ*) + ν(ψ*) - μ(φ_t) - ν(ψ_t).
pub fn dual_gap(
    pot_t: &Potentials,
    pot_star: &Potentials,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
) -> f64 {
    mx.integrate(&pot_star.phi) + my.integrate(&pot_star.psi)
        - mx.integrate(&pot_t.phi)
        - my.integrate(&pot_t.psi)
}

/// Fills the reference-dependent trace fields using the closed forms
/// H(π*|π_2t) = μ(φ*-φ_t) + ν(ψ*-ψ_t) and
/// H(π_2t|π*) = μ_2t(φ_t-φ*) + ν(ψ_t-ψ*).
pub fn attach_reference(
    trace: &mut SinkhornTrace,
    pot_star: &Potentials,
    cost: &CostMatrix,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
) -> Result<()> {
    let mu_phi_star = mx.integrate(&pot_star.phi);
    let nu_psi_star = my.integrate(&pot_star.psi);
    let h_star_r = mu_phi_star + nu_psi_star + trace.log_xi;

    // t = -1: genuine entropies of R against π*.
    let r = reference_coupling(cost, mx, my, trace.log_xi)?;
    let mut h_r_star = 0.0;
    for i in 0..r.nx() {
        for j in 0..r.ny() {
            h_r_star += r.joint_at(i, j) * (-trace.log_xi - pot_star.phi[i] - pot_star.psi[j]);
        }
    }
    {
        let rec = &mut trace.records[0];
        rec.h_star_pit = h_star_r;
        rec.h_pit_star = h_r_star;
        rec.dual_gap = h_star_r;
    }

    for t in 0..trace.len() {
        let mu2t = trace.mu_2t(t, mx);
        let h_star: f64 = mx
            .weights()
            .iter()
            .zip(pot_star.phi.iter().zip(&trace.phis[t]))
            .map(|(w, (s, p))| w * (s - p))
            .sum::<f64>()
            + my.weights()
                .iter()
                .zip(pot_star.psi.iter().zip(&trace.psis[t]))
                .map(|(w, (s, p))| w * (s - p))
                .sum::<f64>();
        let h_pit: f64 = mu2t
            .iter()
            .zip(trace.phis[t].iter().zip(&pot_star.phi))
            .map(|(w, (p, s))| w * (p - s))
            .sum::<f64>()
            + my.weights()
                .iter()
                .zip(trace.psis[t].iter().zip(&pot_star.psi))
                .map(|(w, (p, s))| w * (p - s))
                .sum::<f64>();
        let rec = &mut trace.records[t + 1];
        rec.h_star_pit = h_star;
        rec.h_pit_star = h_pit;
        rec.dual_gap = mu_phi_star + nu_psi_star - rec.mu_phi - rec.nu_psi;
    }
    trace.reference_attached = true;
    Ok(())
}

/// Solves for (π*, φ*, ψ*): iterates until both marginal entropies are
/// below `ref_tol` and the φ-update is below 1e-12 in sup norm, then takes
/// one final ψ and φ half-step so the returned coupling has exact first
/// marginal. The normalization μ(φ*) = lim μ(φ_t) is automatic because φ*
/// is itself a Sinkhorn iterate.
pub fn solve_reference(
    cost: &CostMatrix,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
    ref_tol: f64,
    cap: usize,
) -> Result<(Coupling, Potentials)> {
    if !(ref_tol > 0.0) {
        return Err(Error::Invalid(format!("ref_tol must be positive, got {ref_tol}")));
    }
    let mut phi = vec![0.0; cost.nx()];
    let mut converged = false;
    for t in 0..cap {
        let (psi, phi_next) = sinkhorn_step(&phi, cost, mx, my);
        check_finite(&psi, t, "psi")?;
        check_finite(&phi_next, t, "phi")?;
        let (h_fwd, h_rev) = marginal_entropies(mx, &phi, &phi_next);
        let sup: f64 = phi
            .iter()
            .zip(&phi_next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        phi = phi_next;
        if h_fwd.max(h_rev) <= ref_tol && sup <= REF_SUP_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ReferenceTolerance { tol: ref_tol, cap });
    }
    let psi_star = conjugate(&phi, cost, mx);
    let phi_star = conjugate_rev(&psi_star, cost, my);
    let pots = Potentials {
        phi: phi_star,
        psi: psi_star,
    };
    let pi_star = primal_coupling(&pots.phi, &pots.psi, cost, mx, my)?;
    Ok((pi_star, pots))
}
