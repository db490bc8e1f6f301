//! Scenario ingestion, orchestration of the solve + bound pipeline, and
//! deterministic export of rate tables and dominance reports.
//!
//! A batch config is a single JSON document listing scenarios. Each
//! scenario writes its own output directory: `trace.csv`, `bounds.csv`
//! (t-aligned with the trace), `report.json`, and `stability.csv` when a
//! perturbation sweep is configured. All files are UTF-8 with LF endings
//! and shortest-round-trip float formatting, so repeated runs are
//! byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{
    build_bound_report, c1_constants, fit_loglog_slope, stability_bound, AlphaGrid, BoundReport,
    StabilityReport,
};
use crate::conjugate::{
    build_growth_certificate, build_modulus_certificate, growth_bound, modulus_conjugate_check,
};
use crate::cost::{build_cost_matrix, read_matrix_csv, CostKind, CostModel};
use crate::measures::{perturb, MeasureSpec, PerturbKind};
use crate::sinkhorn::{attach_reference, run, solve_reference, TraceRecord};
use crate::{Error, Result};

/// Iteration cap for reference solves.
const REF_CAP: usize = 1_000_000;
/// Slack tolerance for inequality verdicts.
const SLACK_TOL: f64 = 1e-9;
/// Tighter tolerance for the exact monotonicity chains and the dual gap.
const MONO_TOL: f64 = 1e-10;
/// Exponential-moment parameter for growth certificates.
const DEFAULT_LAMBDA: f64 = 1.0;

/// Perturbation sweep: every magnitude is run with every seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kind: PerturbKind,
    pub magnitudes: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// One solve + bound pipeline instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mu: MeasureSpec,
    pub nu: MeasureSpec,
    pub cost: CostModel,
    /// Loads custom-matrix entries from a headerless row-major CSV; the
    /// cost kind must be `custom_matrix` (its inline entries are replaced).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_matrix_csv: Option<PathBuf>,
    pub max_t: usize,
    pub ref_tol: f64,
    pub stop_tol: f64,
    /// Overrides the CLI/env default alpha-grid size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid_points: Option<usize>,
    /// Exponential-moment parameter λ for the growth certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Re-runs the pipeline at each ε and fits the constants against 1/ε.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
}

/// Top-level batch config document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub scenarios: Vec<Scenario>,
}

impl Scenario {
    /// Validates every field without running anything; errors name the
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("scenario field `name` is empty".into()));
        }
        self.mu
            .build()
            .map_err(|e| Error::Config(format!("scenario `{}` field `mu`: {e}", self.name)))?;
        self.nu
            .build()
            .map_err(|e| Error::Config(format!("scenario `{}` field `nu`: {e}", self.name)))?;
        self.cost
            .validate()
            .map_err(|e| Error::Config(format!("scenario `{}` field `cost`: {e}", self.name)))?;
        if let Some(path) = &self.cost_matrix_csv {
            if !matches!(self.cost.kind, CostKind::CustomMatrix { .. }) {
                return Err(Error::Config(format!(
                    "scenario `{}` field `cost_matrix_csv` requires cost kind custom_matrix",
                    self.name
                )));
            }
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "scenario `{}` field `cost_matrix_csv`: {} is not a file",
                    self.name,
                    path.display()
                )));
            }
        }
        if self.max_t < 1 {
            return Err(Error::Config(format!(
                "scenario `{}` field `max_t` must be >= 1",
                self.name
            )));
        }
        for (field, v) in [("ref_tol", self.ref_tol), ("stop_tol", self.stop_tol)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "scenario `{}` field `{field}` must be positive, got {v}",
                    self.name
                )));
            }
        }
        if let Some(n) = self.alpha_grid_points {
            if n < 2 {
                return Err(Error::Config(format!(
                    "scenario `{}` field `alpha_grid_points` must be >= 2",
                    self.name
                )));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Config(format!(
                    "scenario `{}` field `lambda` must be positive, got {l}",
                    self.name
                )));
            }
        }
        if let Some(grid) = &self.epsilon_grid {
            if grid.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
                return Err(Error::Config(format!(
                    "scenario `{}` field `epsilon_grid` entries must be positive",
                    self.name
                )));
            }
        }
        if let Some(p) = &self.perturbation {
            if p.magnitudes.iter().any(|m| !(*m >= 0.0) || !m.is_finite() ) {
                return Err(Error::Config(format!(
                    "scenario `{}` field `perturbation.magnitudes` must be >= 0",
                    self.name
                )));
            }
            if p.magnitudes.is_empty() || p.seeds.is_empty() {
                return Err(Error::Config(format!(
                    "scenario `{}` field `perturbation` needs magnitudes and seeds",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// The effective cost model after CSV ingestion.
    fn effective_cost(&self) -> Result<CostModel> {
        match &self.cost_matrix_csv {
            None => Ok(self.cost.clone()),
            Some(path) => CostModel::new(
                CostKind::CustomMatrix {
                    entries: read_matrix_csv(path)?,
                },
                self.cost.epsilon,
            ),
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.scenarios {
            s.validate()?;
            if !seen.insert(s.name.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate scenario name `{}`",
                    s.name
                )));
            }
        }
        Ok(())
    }
}

/// Parses a batch config document.
pub fn load_config(path: &Path) -> Result<BatchConfig> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// One named pass/fail entry in a report or summary.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub check: String,
    /// The quantity the check thresholds (a slack or max error).
    pub value: f64,
    pub pass: bool,
}

/// Growth-certificate section of a report: the a priori iterate constant
/// against the realized iterates.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthSection {
    pub lambda: f64,
    pub p: f64,
    pub kexp: f64,
    pub c0: f64,
    /// Uniform constant with |φ_t(x)| ≤ K (1 + |x|^p).
    pub k: f64,
    /// max over recorded t and support x of |φ_t(x)| / (1 + |x|^p).
    pub measured_ratio: f64,
    /// min over the Y-support of (upper bound - (ψ_T - c2)).
    pub conjugate_upper_slack: f64,
    /// min over the X-support of ((φ_{T+1} - c1) - lower bound).
    pub biconjugate_lower_slack: f64,
    pub pass: bool,
}

/// Modulus-of-continuity section: uniform-continuity propagation and the
/// uniform iterate bound for sublinear / bounded costs.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusSection {
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_q: f64,
    /// Uniform constant with |φ_t(x)| ≤ K + ω(|x|).
    pub k: f64,
    /// max over t, x of |φ_t(x)| - (K + ω(|x|)).
    pub iterate_violation: f64,
    /// max over t of the pairwise modulus violation of ψ_t.
    pub pairwise_violation: f64,
    /// max over t of the centered modulus violation of ψ_t.
    pub centered_violation: f64,
    pub pass: bool,
}

/// One sub-report of an ε sweep.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonPoint {
    pub epsilon: f64,
    pub iterations: usize,
    pub c1: f64,
    pub h_star_r: f64,
    pub kappa: f64,
    /// The constant 5(C1² ∨ H(π*|R)) of the closed-form rate.
    pub rate_constant: f64,
    pub dominance_pass: bool,
}

/// Fits of the certified constants against 1/ε.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonScalingSection {
    pub points: Vec<EpsilonPoint>,
    pub c1_slope: Option<f64>,
    pub rate_constant_slope: Option<f64>,
}

/// One row of the perturbation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub kind: PerturbKind,
    pub magnitude: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub report: StabilityReport,
    pub pass: bool,
}

/// Everything written to report.json for one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub epsilon: f64,
    /// Number of full Sinkhorn iterations performed (last recorded t).
    pub iterations: usize,
    pub log_xi: f64,
    pub bounds: BoundReport,
    pub growth: Option<GrowthSection>,
    pub modulus: Option<ModulusSection>,
    pub epsilon_scaling: Option<EpsilonScalingSection>,
    pub stability: Option<Vec<StabilityRow>>,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
    /// Raw trace rows (t = -1 .. T); exported to trace.csv, not to JSON.
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
}

/// Shortest-round-trip decimal formatting (`inf`, `NaN` for non-finite).
fn fmt(v: f64) -> String {
    format!("{v}")
}

fn verdict(check: &str, value: f64, pass: bool) -> Verdict {
    Verdict {
        check: check.to_string(),
        value,
        pass,
    }
}

/// Runs the full pipeline for one scenario without touching the
/// filesystem.
pub fn evaluate_scenario(s: &Scenario, default_grid_points: usize) -> Result<ScenarioReport> {
    let fail = |e: Error| Error::Scenario {
        name: s.name.clone(),
        source: Box::new(e),
    };
    evaluate_scenario_inner(s, default_grid_points).map_err(fail)
}

fn evaluate_scenario_inner(s: &Scenario, default_grid_points: usize) -> Result<ScenarioReport> {
    s.validate()?;
    let mx = s.mu.build()?;
    let my = s.nu.build()?;
    let model = s.effective_cost()?;
    let grid = AlphaGrid::standard(s.alpha_grid_points.unwrap_or(default_grid_points));
    let lambda = s.lambda.unwrap_or(DEFAULT_LAMBDA);

    let cost = build_cost_matrix(&model, &mx, &my)?;
    let mut trace = run(&cost, &mx, &my, s.max_t, s.stop_tol)?;
    let (_, pots) = solve_reference(&cost, &mx, &my, s.ref_tol, REF_CAP)?;
    attach_reference(&mut trace, &pots, &cost, &mx, &my)?;
    let c1c = c1_constants(&trace, &pots, &mx, &grid)?;
    let bounds = build_bound_report(&trace, &c1c, &grid)?;

    let mut verdicts = vec![
        verdict(
            "marginal_identity",
            bounds.dominance.identity_max_rel_err,
            bounds.dominance.identity_max_rel_err <= SLACK_TOL,
        ),
        verdict(
            "monotonicity",
            bounds.dominance.monotonicity_min_slack,
            bounds.dominance.monotonicity_min_slack >= -MONO_TOL,
        ),
        verdict(
            "theorem_rate",
            bounds.dominance.theorem_min_slack,
            bounds.dominance.theorem_min_slack >= -SLACK_TOL,
        ),
        verdict(
            "difference_inequality",
            bounds.dominance.diff_ineq_min_slack,
            bounds.dominance.diff_ineq_min_slack >= -SLACK_TOL,
        ),
        verdict(
            "t1_upper_bound",
            bounds.constants.t1 as f64,
            bounds.constants.t1_bound_ok,
        ),
        verdict(
            "marginal_rate_proposition",
            bounds.dominance.marginal_prop_min_slack,
            bounds.dominance.marginal_prop_min_slack >= -SLACK_TOL,
        ),
        verdict(
            "marginal_rate_corollary",
            bounds.dominance.marginal_cor_min_slack,
            bounds.dominance.marginal_cor_min_slack >= -SLACK_TOL,
        ),
        verdict(
            "coupling_entropy_intermediate",
            bounds.dominance.coupling_intermediate_min_slack,
            bounds.dominance.coupling_intermediate_min_slack >= -SLACK_TOL,
        ),
        verdict(
            "coupling_entropy_closed",
            bounds.dominance.coupling_closed_min_slack,
            bounds.dominance.coupling_closed_min_slack >= -SLACK_TOL,
        ),
        verdict(
            "suboptimality_intermediate",
            bounds.dominance.subopt_intermediate_min_slack,
            bounds.dominance.subopt_intermediate_min_slack >= -SLACK_TOL,
        ),
        verdict(
            "suboptimality_closed",
            bounds.dominance.subopt_closed_min_slack,
            bounds.dominance.subopt_closed_min_slack >= -SLACK_TOL,
        ),
        verdict(
            "dual_gap_nonnegative",
            bounds.dominance.gap_min,
            bounds.dominance.gap_min >= -MONO_TOL,
        ),
    ];

    let growth = match build_growth_certificate(&model, &mx, &my, lambda)? {
        None => None,
        Some(cert) => {
            let t_last = trace.phis.len() - 2;
            let gb = growth_bound(&cert, mx.integrate(&trace.phis[t_last]), trace.log_xi);
            let mut ratio: f64 = 0.0;
            for phi in &trace.phis {
                for (v, rx) in phi.iter().zip(&cert.radius_x) {
                    ratio = ratio.max(v.abs() / (1.0 + rx.powf(cert.p)));
                }
            }
            let upper_slack = gb
                .upper_fc
                .iter()
                .zip(trace.psis[t_last].iter().zip(&cert.c2))
                .map(|(b, (psi, c2))| b - (psi - c2))
                .fold(f64::INFINITY, f64::min);
            let lower_slack = trace.phis[t_last + 1]
                .iter()
                .zip(cert.c1.iter().zip(&gb.lower_fcc))
                .map(|(phi, (c1, b))| (phi - c1) - b)
                .fold(f64::INFINITY, f64::min);
            let pass =
                ratio <= gb.k + SLACK_TOL && upper_slack >= -SLACK_TOL && lower_slack >= -SLACK_TOL;
            verdicts.push(verdict("growth_iterate_bound", gb.k - ratio, pass));
            Some(GrowthSection {
                lambda,
                p: cert.p,
                kexp: cert.kexp,
                c0: cert.c0,
                k: gb.k,
                measured_ratio: ratio,
                conjugate_upper_slack: upper_slack,
                biconjugate_lower_slack: lower_slack,
                pass,
            })
        }
    };

    let modulus = match build_modulus_certificate(&model, &cost, trace.log_xi, &mx, &my)? {
        None => None,
        Some(cert) => {
            let radii = mx.radii();
            let mut iter_violation = f64::NEG_INFINITY;
            for phi in &trace.phis {
                for (v, r) in phi.iter().zip(&radii) {
                    iter_violation = iter_violation.max(v.abs() - (cert.k + cert.omega.eval(*r)));
                }
            }
            let mut pairwise = f64::NEG_INFINITY;
            let mut centered = f64::NEG_INFINITY;
            for psi in &trace.psis {
                let r = modulus_conjugate_check(&cert, psi, &my);
                pairwise = pairwise.max(r.max_violation_pairwise);
                centered = centered.max(r.max_violation_centered);
            }
            let pass = iter_violation <= SLACK_TOL
                && pairwise <= SLACK_TOL
                && centered <= SLACK_TOL;
            verdicts.push(verdict("modulus_iterate_bound", -iter_violation, pass));
            Some(ModulusSection {
                omega_a: cert.omega.a,
                omega_b: cert.omega.b,
                omega_q: cert.omega.q,
                k: cert.k,
                iterate_violation: iter_violation,
                pairwise_violation: pairwise,
                centered_violation: centered,
                pass,
            })
        }
    };

    let epsilon_scaling = match &s.epsilon_grid {
        None => None,
        Some(eps_grid) => {
            let mut points = Vec::with_capacity(eps_grid.len());
            for &eps in eps_grid {
                let m = model.with_epsilon(eps)?;
                let c = build_cost_matrix(&m, &mx, &my)?;
                let mut tr = run(&c, &mx, &my, s.max_t, s.stop_tol)?;
                let (_, p) = solve_reference(&c, &mx, &my, s.ref_tol, REF_CAP)?;
                attach_reference(&mut tr, &p, &c, &mx, &my)?;
                let cc = c1_constants(&tr, &p, &mx, &grid)?;
                let rep = build_bound_report(&tr, &cc, &grid)?;
                let rc = &rep.constants;
                points.push(EpsilonPoint {
                    epsilon: eps,
                    iterations: tr.len() - 1,
                    c1: rc.c1,
                    h_star_r: rc.h_star_r,
                    kappa: rc.kappa,
                    rate_constant: 5.0 * (rc.c1 * rc.c1).max(rc.h_star_r),
                    dominance_pass: rep.dominance.theorem_min_slack >= -SLACK_TOL,
                });
            }
            let inv_eps: Vec<f64> = points.iter().map(|p| 1.0 / p.epsilon).collect();
            let c1s: Vec<f64> = points.iter().map(|p| p.c1).collect();
            let rates: Vec<f64> = points.iter().map(|p| p.rate_constant).collect();
            let section = EpsilonScalingSection {
                c1_slope: fit_loglog_slope(&inv_eps, &c1s),
                rate_constant_slope: fit_loglog_slope(&inv_eps, &rates),
                points,
            };
            let sub_pass = section.points.iter().all(|p| p.dominance_pass);
            verdicts.push(verdict(
                "epsilon_grid_dominance",
                section.points.len() as f64,
                sub_pass,
            ));
            Some(section)
        }
    };

    let stability = match &s.perturbation {
        None => None,
        Some(spec) => {
            let mut rows = Vec::new();
            for &mag in &spec.magnitudes {
                for &seed in &spec.seeds {
                    let mxp = perturb(&mx, spec.kind, mag, 2 * seed)?;
                    let myp = perturb(&my, spec.kind, mag, 2 * seed + 1)?;
                    let rep = stability_bound(
                        &model, &mx, &my, &mxp, &myp, &grid, s.ref_tol, REF_CAP,
                    )?;
                    let pass = rep.measured <= rep.bound + SLACK_TOL
                        && rep.measured <= rep.same_base_bound + SLACK_TOL;
                    rows.push(StabilityRow {
                        kind: spec.kind,
                        magnitude: mag,
                        seed,
                        report: rep,
                        pass,
                    });
                }
            }
            let min_slack = rows
                .iter()
                .map(|r| (r.report.bound - r.report.measured).min(
                    r.report.same_base_bound - r.report.measured,
                ))
                .fold(f64::INFINITY, f64::min);
            verdicts.push(verdict(
                "stability",
                min_slack,
                rows.iter().all(|r| r.pass),
            ));
            Some(rows)
        }
    };

    let all_pass = verdicts.iter().all(|v| v.pass);
    Ok(ScenarioReport {
        name: s.name.clone(),
        epsilon: model.epsilon,
        iterations: trace.len() - 1,
        log_xi: trace.log_xi,
        bounds,
        growth,
        modulus,
        epsilon_scaling,
        stability,
        verdicts,
        all_pass,
        trace: trace.records,
    })
}

fn trace_csv(report: &ScenarioReport) -> String {
    let mut out = String::new();
    out.push_str("#schema=trace-v1\n");
    out.push_str(
        "t,mu_phi_t,nu_psi_t,H_mu2t_mu,H_mu_mu2t,H_nu_nu2t1,H_nu2t1_nu,H_pistar_pit,H_pit_pistar,dual_gap\n",
    );
    for r in &report.trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            fmt(r.mu_phi),
            fmt(r.nu_psi),
            fmt(r.h_mu2t_mu),
            fmt(r.h_mu_mu2t),
            fmt(r.h_nu_nu2t1),
            fmt(r.h_nu2t1_nu),
            fmt(r.h_star_pit),
            fmt(r.h_pit_star),
            fmt(r.dual_gap),
        );
    }
    out
}

fn bounds_csv(report: &BoundReport) -> String {
    let c = &report.curves;
    let mut out = String::new();
    out.push_str("#schema=bounds-v1\n");
    out.push_str(
        "t,theorem_effective,theorem_geometric,theorem_b1,theorem_b2,theorem_b3,\
         marginal_proposition,marginal_corollary,coupling_intermediate,coupling_closed,\
         subopt_intermediate,subopt_closed\n",
    );
    for i in 0..c.t.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.t[i],
            fmt(c.theorem_effective[i]),
            fmt(c.theorem_geometric[i]),
            fmt(c.theorem_b1[i]),
            fmt(c.theorem_b2[i]),
            fmt(c.theorem_b3[i]),
            fmt(c.marginal_proposition[i]),
            fmt(c.marginal_corollary[i]),
            fmt(c.coupling_intermediate[i]),
            fmt(c.coupling_closed[i]),
            fmt(c.subopt_intermediate[i]),
            fmt(c.subopt_closed[i]),
        );
    }
    out
}

fn stability_csv(rows: &[StabilityRow]) -> String {
    let mut out = String::new();
    out.push_str("#schema=stability-v1\n");
    out.push_str(
        "kind,magnitude,seed,measured,bound,same_base_bound,c1,c2,\
         H_muprime_mu,H_mu_muprime,H_nuprime_nu,H_nu_nuprime,pass\n",
    );
    for r in rows {
        let kind = match r.kind {
            PerturbKind::Reweight => "reweight",
            PerturbKind::Jitter => "jitter",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            kind,
            fmt(r.magnitude),
            r.seed,
            fmt(r.report.measured),
            fmt(r.report.bound),
            fmt(r.report.same_base_bound),
            fmt(r.report.c1),
            r.report.c2.map(fmt).unwrap_or_default(),
            fmt(r.report.h_mu_prime_mu),
            fmt(r.report.h_mu_mu_prime),
            fmt(r.report.h_nu_prime_nu),
            fmt(r.report.h_nu_nu_prime),
            r.pass,
        );
    }
    out
}

/// Runs one scenario and writes its artifacts under `out_dir`.
pub fn run_scenario(
    s: &Scenario,
    out_dir: &Path,
    default_grid_points: usize,
) -> Result<ScenarioReport> {
    let report = evaluate_scenario(s, default_grid_points)?;
    write_outputs(&report, out_dir).map_err(|e| Error::Scenario {
        name: s.name.clone(),
        source: Box::new(e),
    })?;
    Ok(report)
}

fn write_outputs(report: &ScenarioReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("trace.csv"), trace_csv(report))?;
    std::fs::write(out_dir.join("bounds.csv"), bounds_csv(&report.bounds))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(out_dir.join("report.json"), json)?;
    if let Some(rows) = &report.stability {
        std::fs::write(out_dir.join("stability.csv"), stability_csv(rows))?;
    }
    Ok(())
}

/// Per-scenario outcome recorded in summary.json.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
}

/// Aggregate outcome of a batch run.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub scenarios: Vec<ScenarioSummary>,
    pub all_pass: bool,
}

fn summarize(name: &str, outcome: &Result<ScenarioReport>) -> ScenarioSummary {
    match outcome {
        Ok(rep) => ScenarioSummary {
            name: name.to_string(),
            ok: true,
            error: None,
            verdicts: rep.verdicts.clone(),
            all_pass: rep.all_pass,
        },
        Err(e) => ScenarioSummary {
            name: name.to_string(),
            ok: false,
            error: Some(e.to_string()),
            verdicts: Vec::new(),
            all_pass: false,
        },
    }
}

/// Runs every scenario (up to `jobs` concurrently), writes per-scenario
/// directories named after each scenario plus an aggregate summary.json,
/// and reports failures in the summary rather than aborting the batch.
pub fn batch(cfg: &BatchConfig, out_dir: &Path, jobs: usize, default_grid_points: usize) -> Result<BatchSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let outcomes = run_all(cfg, out_dir, jobs, default_grid_points);
    let scenarios: Vec<ScenarioSummary> = cfg
        .scenarios
        .iter()
        .zip(&outcomes)
        .map(|(s, o)| summarize(&s.name, o))
        .collect();
    let all_pass = scenarios.iter().all(|s| s.ok && s.all_pass);
    let summary = BatchSummary {
        scenarios,
        all_pass,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    std::fs::write(out_dir.join("summary.json"), json)?;
    Ok(summary)
}

#[cfg(feature = "parallel")]
fn run_all(
    cfg: &BatchConfig,
    out_dir: &Path,
    jobs: usize,
    default_grid_points: usize,
) -> Vec<Result<ScenarioReport>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    pool.install(|| {
        cfg.scenarios
            .par_iter()
            .map(|s| run_scenario(s, &out_dir.join(&s.name), default_grid_points))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn run_all(
    cfg: &BatchConfig,
    out_dir: &Path,
    _jobs: usize,
    default_grid_points: usize,
) -> Vec<Result<ScenarioReport>> {
    cfg.scenarios
        .iter()
        .map(|s| run_scenario(s, &out_dir.join(&s.name), default_grid_points))
        .collect()
}
