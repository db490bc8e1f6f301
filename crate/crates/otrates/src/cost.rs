//! Cost families, epsilon scaling, and realized cost matrices.
//!
//! Epsilon is folded into the matrix once at construction: every matrix
//! entry is c(x_i, y_j) / eps, so all downstream math runs at eps = 1.
//! Epsilon-scaling studies rebuild the matrix with a different eps.
//!
//! The module also carries the numerical oracles for the cost-decomposition
//! inequalities that feed the growth certificates, and the per-kind
//! extractors of the split c = c1(x) + c2(y) + chat(x, y).

use serde::{Deserialize, Serialize};

use crate::measures::DiscreteMeasure;
use crate::{Error, Result};

/// Cost family. The metric is Euclidean on R^d throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostKind {
    /// c(x, y) = |x - y|^2.
    SqDistance,
    /// c(x, y) = |x - y|^p, p >= 0.
    DistancePow { p: f64 },
    /// Entries supplied directly (row-major over X-support x Y-support).
    CustomMatrix { entries: Vec<Vec<f64>> },
    /// c(x, y) = a + b |x - y|^q with q in (0, 1], a, b >= 0. The same
    /// (a, b, q) triple is the declared modulus of continuity omega.
    Modulus { a: f64, b: f64, q: f64 },
}

/// A cost family together with the regularization parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(flatten)]
    pub kind: CostKind,
    pub epsilon: f64,
}

impl CostModel {
    pub fn new(kind: CostKind, epsilon: f64) -> Result<Self> {
        let model = Self { kind, epsilon };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Cost(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        match &self.kind {
            CostKind::DistancePow { p } => {
                if !(*p >= 0.0) {
                    return Err(Error::Cost(format!("distance_pow exponent must be >= 0, got {p}")));
                }
            }
            CostKind::Modulus { a, b, q } => {
                if !(*a >= 0.0 && *b >= 0.0) {
                    return Err(Error::Cost("modulus coefficients a, b must be >= 0".into()));
                }
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(Error::Cost(format!("modulus exponent q must lie in (0, 1], got {q}")));
                }
            }
            CostKind::CustomMatrix { entries } => {
                if entries.is_empty() || entries[0].is_empty() {
                    return Err(Error::Cost("custom matrix must be nonempty".into()));
                }
                let ncols = entries[0].len();
                for (i, row) in entries.iter().enumerate() {
                    if row.len() != ncols {
                        return Err(Error::Cost(format!("custom matrix row {i} has ragged length")));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Cost(format!("custom matrix row {i} has non-finite entry")));
                    }
                }
            }
            CostKind::SqDistance => {}
        }
        Ok(())
    }

    /// Same family with a different epsilon.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kind.clone(), epsilon)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

/// Realized matrix of c(x_i, y_j) / eps over two supports.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Vec<f64>,
    nx: usize,
    ny: usize,
}

impl CostMatrix {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.ny + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.ny..(i + 1) * self.ny]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Builds the matrix of c(x_i, y_j) / eps.
pub fn build_cost_matrix(
    model: &CostModel,
    mx: &DiscreteMeasure,
    my: &DiscreteMeasure,
) -> Result<CostMatrix> {
    model.validate()?;
    if mx.is_empty() || my.is_empty() {
        return Err(Error::Cost("empty support".into()));
    }
    if mx.dim() != my.dim() {
        return Err(Error::Cost(format!(
            "support dimensions differ: {} vs {}",
            mx.dim(),
            my.dim()
        )));
    }
    let (nx, ny) = (mx.len(), my.len());
    let inv_eps = 1.0 / model.epsilon;
    let mut entries = Vec::with_capacity(nx * ny);
    match &model.kind {
        CostKind::SqDistance => {
            for x in mx.points() {
                for y in my.points() {
                    let d = dist(x, y);
                    entries.push(d * d * inv_eps);
                }
            }
        }
        CostKind::DistancePow { p } => {
            for x in mx.points() {
                for y in my.points() {
                    entries.push(dist(x, y).powf(*p) * inv_eps);
                }
            }
        }
        CostKind::Modulus { a, b, q } => {
            for x in mx.points() {
                for y in my.points() {
                    entries.push((a + b * dist(x, y).powf(*q)) * inv_eps);
                }
            }
        }
        CostKind::CustomMatrix { entries: raw } => {
            if raw.len() != nx || raw[0].len() != ny {
                return Err(Error::Cost(format!(
                    "custom matrix shape {}x{} does not match supports {nx}x{ny}",
                    raw.len(),
                    raw[0].len()
                )));
            }
            for row in raw {
                for &v in row {
                    entries.push(v * inv_eps);
                }
            }
        }
    }
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::Cost("realized cost matrix has non-finite entries".into()));
    }
    Ok(CostMatrix { entries, nx, ny })
}

/// One additive cross term K_+/- |x|^alpha |y|^beta of a cost split.
#[derive(Debug, Clone, Serialize)]
pub struct CrossTerm {
    pub k_plus: f64,
    pub k_minus: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Explicit split c/eps = c1(x) + c2(y) + chat(x, y) with
/// -a_minus(x) - Σ K_-|x|^a|y|^b <= chat <= a_plus(x) + Σ K_+|x|^a|y|^b.
///
/// `radius_x` / `radius_y` are the |x|, |y| values the split is stated in
/// (distances from the split's reference point), so downstream bounds and
/// checks share one convention.
#[derive(Debug, Clone, Serialize)]
pub struct CostDecomposition {
    pub p: f64,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    pub cross: Vec<CrossTerm>,
    pub radius_x: Vec<f64>,
    pub radius_y: Vec<f64>,
}

impl CostModel {
    /// Per-kind growth split, already divided by eps. `None` when the kind
    /// carries no growth certificate (custom matrices, sublinear kinds).
    pub fn decomposition(
        &self,
        mx: &DiscreteMeasure,
        my: &DiscreteMeasure,
    ) -> Option<CostDecomposition> {
        let inv_eps = 1.0 / self.epsilon;
        match &self.kind {
            // c = |x|^2 + |y|^2 - 2<x,y>, norms from the origin;
            // |chat| <= 2|x||y| by Cauchy-Schwarz.
            CostKind::SqDistance => {
                let origin = vec![0.0; mx.dim()];
                let rx = mx.radii_from(&origin);
                let ry = my.radii_from(&origin);
                Some(CostDecomposition {
                    p: 2.0,
                    c1: rx.iter().map(|r| r * r * inv_eps).collect(),
                    c2: ry.iter().map(|r| r * r * inv_eps).collect(),
                    a_plus: vec![0.0; mx.len()],
                    a_minus: vec![0.0; mx.len()],
                    cross: vec![CrossTerm {
                        k_plus: 2.0 * inv_eps,
                        k_minus: 2.0 * inv_eps,
                        alpha: 1.0,
                        beta: 1.0,
                    }],
                    radius_x: rx,
                    radius_y: ry,
                })
            }
            // c1 = 0, c2(y) = d(y, x0)^p with x0 the X-anchor;
            // |c - c2| <= p 2^{p-1} (|x||y|^{p-1} + |x|^p).
            CostKind::DistancePow { p } if *p >= 1.0 => {
                let x0 = mx.anchor_point().to_vec();
                let rx = mx.radii_from(&x0);
                let ry = my.radii_from(&x0);
                let k = p * (2.0f64).powf(p - 1.0) * inv_eps;
                let beta = p - 1.0;
                let a: Vec<f64> = rx.iter().map(|r| k * r.powf(*p)).collect();
                let (cross, a_plus, a_minus) = if beta == 0.0 {
                    // |y|^0 term is x-only; fold it into a_+/-.
                    let folded: Vec<f64> = a.iter().zip(&rx).map(|(av, r)| av + k * r).collect();
                    (Vec::new(), folded.clone(), folded)
                } else {
                    (
                        vec![CrossTerm {
                            k_plus: k,
                            k_minus: k,
                            alpha: 1.0,
                            beta,
                        }],
                        a.clone(),
                        a,
                    )
                };
                Some(CostDecomposition {
                    p: *p,
                    c1: vec![0.0; mx.len()],
                    c2: ry.iter().map(|r| r.powf(*p) * inv_eps).collect(),
                    a_plus,
                    a_minus,
                    cross,
                    radius_x: rx,
                    radius_y: ry,
                })
            }
            _ => None,
        }
    }

    /// Declared modulus of continuity omega(s) = a + b s^q (already divided
    /// by eps) such that |c(x,y1)/eps - c(x,y2)/eps| <= omega(d(y1,y2)), and
    /// symmetrically in x. For bounded custom matrices the oscillation bound
    /// omega = max - min is used; `matrix` must be the realized matrix then.
    pub fn modulus(&self, matrix: Option<&CostMatrix>) -> Option<Omega> {
        let inv_eps = 1.0 / self.epsilon;
        match &self.kind {
            CostKind::Modulus { a: _, b, q } => Some(Omega {
                a: 0.0,
                b: b * inv_eps,
                q: *q,
            }),
            CostKind::DistancePow { p } if *p <= 1.0 && *p > 0.0 => Some(Omega {
                a: 0.0,
                b: inv_eps,
                q: *p,
            }),
            CostKind::CustomMatrix { .. } => {
                let m = matrix?;
                Some(Omega {
                    a: m.max_entry() - m.min_entry(),
                    b: 0.0,
                    q: 1.0,
                })
            }
            _ => None,
        }
    }
}

/// Parametric concave nondecreasing modulus omega(s) = a + b s^q, q in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Omega {
    pub a: f64,
    pub b: f64,
    pub q: f64,
}

impl Omega {
    pub fn eval(&self, s: f64) -> f64 {
        self.a + self.b * s.powf(self.q)
    }
}

/// Violation report of a pointwise inequality check: max of (lhs - rhs),
/// expected <= 0.
#[derive(Debug, Clone, Serialize)]
pub struct ViolationReport {
    pub max_violation: f64,
    pub samples: usize,
}

/// Checks |d(x,y)^p - |y|^p| <= p 2^{p-1} (|x||y|^{p-1} + |x|^p) on sample
/// pairs, with |.| measured from `x0`.
pub fn check_distance_pow_decomposition(
    p: f64,
    sample_pairs: &[(Vec<f64>, Vec<f64>)],
    x0: &[f64],
) -> Result<ViolationReport> {
    if !(p >= 1.0) {
        return Err(Error::Cost(format!(
            "decomposition check needs p >= 1 (got {p}); use the modulus route for p < 1"
        )));
    }
    let mut max_violation = f64::NEG_INFINITY;
    for (x, y) in sample_pairs {
        let rx = dist(x, x0);
        let ry = dist(y, x0);
        let lhs = (dist(x, y).powf(p) - ry.powf(p)).abs();
        let rhs = p * (2.0f64).powf(p - 1.0) * (rx * ry.powf(p - 1.0) + rx.powf(p));
        max_violation = max_violation.max(lhs - rhs);
    }
    Ok(ViolationReport {
        max_violation,
        samples: sample_pairs.len(),
    })
}

/// Report of the two inequalities checked for differentiable costs.
#[derive(Debug, Clone, Serialize)]
pub struct GateauxReport {
    pub max_violation_diff: f64,
    pub max_violation_origin: f64,
    pub samples: usize,
}

/// Checks the growth inequalities implied by a derivative bound
/// |Dc(z)| <= C(1 + |z|^{p-1}) on sample pairs:
/// |c(x,y) - c(0,y)| <= 2^{p-1} C (1 + |x||y|^{p-1} + |x|^p) and
/// |c(0,y)| <= |c(0,0)| + C (1 + |y|^p). The norm on X x Y is |x| + |y|.
pub fn check_gateaux_decomposition<F>(
    cost: F,
    c_const: f64,
    p: f64,
    sample_pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<GateauxReport>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if sample_pairs.is_empty() {
        return Ok(GateauxReport {
            max_violation_diff: f64::NEG_INFINITY,
            max_violation_origin: f64::NEG_INFINITY,
            samples: 0,
        });
    }
    let dim = sample_pairs[0].0.len();
    let zero = vec![0.0; dim];
    let c00 = cost(&zero, &zero);
    let mut vd = f64::NEG_INFINITY;
    let mut vo = f64::NEG_INFINITY;
    for (x, y) in sample_pairs {
        let rx = dist(x, &zero);
        let ry = dist(y, &zero);
        let lhs = (cost(x, y) - cost(&zero, y)).abs();
        let rhs = (2.0f64).powf(p - 1.0) * c_const * (1.0 + rx * ry.powf(p - 1.0) + rx.powf(p));
        vd = vd.max(lhs - rhs);
        let lhs0 = cost(&zero, y).abs();
        let rhs0 = c00.abs() + c_const * (1.0 + ry.powf(p));
        vo = vo.max(lhs0 - rhs0);
    }
    Ok(GateauxReport {
        max_violation_diff: vd,
        max_violation_origin: vo,
        samples: sample_pairs.len(),
    })
}

/// Reads a headerless row-major CSV matrix for the custom_matrix kind.
pub fn read_matrix_csv(path: &std::path::Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Cost(format!("reading {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Cost(format!("reading {}: {e}", path.display())))?;
        let row: std::result::Result<Vec<f64>, _> =
            rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Cost(format!("parsing {}: {e}", path.display())))?);
    }
    if rows.is_empty() {
        return Err(Error::Cost(format!("{} is empty", path.display())));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atom(xs: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(xs.iter().map(|&x| vec![x]).collect(), vec![1.0; xs.len()]).unwrap()
    }

    #[test]
    fn sq_distance_entry() {
        let m = CostModel::new(CostKind::SqDistance, 1.0).unwrap();
        let c = build_cost_matrix(&m, &atom(&[0.0]), &atom(&[2.0])).unwrap();
        assert_eq!(c.at(0, 0), 4.0);
    }

    #[test]
    fn sq_distance_epsilon_scaling() {
        let m = CostModel::new(CostKind::SqDistance, 0.5).unwrap();
        let c = build_cost_matrix(&m, &atom(&[0.0]), &atom(&[2.0])).unwrap();
        assert_eq!(c.at(0, 0), 8.0);
    }

    #[test]
    fn distance_pow_one_euclidean() {
        let mx = DiscreteMeasure::new(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        let my = DiscreteMeasure::new(vec![vec![3.0, 4.0]], vec![1.0]).unwrap();
        let m = CostModel::new(CostKind::DistancePow { p: 1.0 }, 1.0).unwrap();
        let c = build_cost_matrix(&m, &mx, &my).unwrap();
        assert!((c.at(0, 0) - 5.0).abs() <= 1e-15);
    }

    #[test]
    fn custom_matrix_wrong_shape_fails() {
        let m = CostModel::new(
            CostKind::CustomMatrix {
                entries: vec![vec![1.0, 2.0]],
            },
            1.0,
        )
        .unwrap();
        let err = build_cost_matrix(&m, &atom(&[0.0, 1.0]), &atom(&[0.0, 1.0]));
        assert!(err.is_err());
    }

    #[test]
    fn decomposition_check_examples() {
        // x at the reference point: violation exactly lhs - rhs = 0 - 0.
        let r = check_distance_pow_decomposition(2.0, &[(vec![0.0], vec![3.0])], &[0.0]).unwrap();
        assert!(r.max_violation <= 0.0);
        // p=2, x=1, y=3 on R: |16-9| = 7 <= 2*2*(3+1) = 16.
        let r = check_distance_pow_decomposition(2.0, &[(vec![-1.0], vec![3.0])], &[0.0]).unwrap();
        assert!(r.max_violation <= 7.0 - 16.0 + 1e-12);
        // p=1 is the triangle inequality.
        let r = check_distance_pow_decomposition(
            1.0,
            &[(vec![1.5], vec![-2.0]), (vec![0.3], vec![0.4])],
            &[0.0],
        )
        .unwrap();
        assert!(r.max_violation <= 1e-12);
    }

    #[test]
    fn decomposition_check_rejects_sublinear_p() {
        assert!(check_distance_pow_decomposition(0.5, &[], &[0.0]).is_err());
    }

    #[test]
    fn decomposition_randomized_no_violation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..500)
                .map(|_| {
                    (
                        vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
                        vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
                    )
                })
                .collect();
            let r = check_distance_pow_decomposition(p, &pairs, &[0.0, 0.0]).unwrap();
            assert!(r.max_violation <= 1e-9, "p={p}: violation {}", r.max_violation);
        }
    }

    #[test]
    fn gateaux_check_constant_cost() {
        let pairs = vec![(vec![1.0], vec![2.0]), (vec![-1.0], vec![0.5])];
        let r = check_gateaux_decomposition(|_, _| 3.0, 1.0, 2.0, &pairs).unwrap();
        assert!(r.max_violation_diff <= 0.0);
        assert!(r.max_violation_origin <= 1e-12);
    }

    #[test]
    fn gateaux_check_quadratic_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..400)
            .map(|_| (vec![rng.gen_range(-4.0..4.0)], vec![rng.gen_range(-4.0..4.0)]))
            .collect();
        let cost = |x: &[f64], y: &[f64]| (x[0] - y[0]) * (x[0] - y[0]);
        // |Dc| <= 2(1+|z|) holds with C = 2, p = 2 for the sup-norm-compatible |z| = |x|+|y|.
        let r = check_gateaux_decomposition(cost, 2.0, 2.0, &pairs).unwrap();
        assert!(r.max_violation_diff <= 1e-9);
        assert!(r.max_violation_origin <= 1e-9);
        // x = 0 gives lhs 0.
        let r0 = check_gateaux_decomposition(cost, 2.0, 2.0, &[(vec![0.0], vec![1.7])]).unwrap();
        assert!(r0.max_violation_diff <= -(2.0f64) * 2.0 + 1e-12);
    }

    #[test]
    fn modulus_extractors() {
        let m = CostModel::new(CostKind::DistancePow { p: 0.5 }, 2.0).unwrap();
        let w = m.modulus(None).unwrap();
        assert_eq!((w.a, w.b, w.q), (0.0, 0.5, 0.5));

        let cm = CostModel::new(
            CostKind::CustomMatrix {
                entries: vec![vec![1.0, 3.0], vec![2.0, 1.5]],
            },
            1.0,
        )
        .unwrap();
        let mat = build_cost_matrix(&cm, &atom(&[0.0, 1.0]), &atom(&[0.0, 1.0])).unwrap();
        let w = cm.modulus(Some(&mat)).unwrap();
        assert_eq!(w.a, 2.0);
        assert_eq!(w.b, 0.0);
    }

    #[test]
    fn sq_distance_decomposition_reconstructs_cost() {
        let mx = atom(&[-1.0, 0.5, 2.0]);
        let my = atom(&[0.0, 1.5]);
        let model = CostModel::new(CostKind::SqDistance, 0.5).unwrap();
        let mat = build_cost_matrix(&model, &mx, &my).unwrap();
        let d = model.decomposition(&mx, &my).unwrap();
        for i in 0..mx.len() {
            for j in 0..my.len() {
                let chat = mat.at(i, j) - d.c1[i] - d.c2[j];
                let bound = d.cross[0].k_plus * d.radius_x[i] * d.radius_y[j];
                assert!(chat.abs() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn distance_pow_one_decomposition_folds_cross_term() {
        let mx = atom(&[0.0, 1.0]);
        let my = atom(&[0.5, 2.0]);
        let model = CostModel::new(CostKind::DistancePow { p: 1.0 }, 1.0).unwrap();
        let d = model.decomposition(&mx, &my).unwrap();
        assert!(d.cross.is_empty());
        let mat = build_cost_matrix(&model, &mx, &my).unwrap();
        for i in 0..mx.len() {
            for j in 0..my.len() {
                let chat = mat.at(i, j) - d.c2[j];
                assert!(chat <= d.a_plus[i] + 1e-12);
                assert!(chat >= -d.a_minus[i] - 1e-12);
            }
        }
    }

    #[test]
    fn cost_spec_json() {
        let m: CostModel = serde_json::from_str(r#"{"kind":"sq_distance","epsilon":0.5}"#).unwrap();
        assert_eq!(m.epsilon, 0.5);
        assert_eq!(m.kind, CostKind::SqDistance);
        let m: CostModel =
            serde_json::from_str(r#"{"kind":"distance_pow","p":1.5,"epsilon":1.0}"#).unwrap();
        assert_eq!(m.kind, CostKind::DistancePow { p: 1.5 });
    }

    proptest! {
        #[test]
        fn epsilon_scaling_is_entrywise(eps in 0.01f64..10.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let mx = atom(&[x]);
            let my = atom(&[y]);
            let base = build_cost_matrix(&CostModel::new(CostKind::SqDistance, 1.0).unwrap(), &mx, &my).unwrap();
            let scaled = build_cost_matrix(&CostModel::new(CostKind::SqDistance, eps).unwrap(), &mx, &my).unwrap();
            prop_assert!((scaled.at(0,0) - base.at(0,0)/eps).abs() <= 1e-12 * (1.0 + base.at(0,0)/eps).abs());
        }

        #[test]
        fn shared_support_distance_pow_is_symmetric(
            pts in proptest::collection::vec(-5.0f64..5.0, 2..6),
            p in 0.5f64..3.0,
        ) {
            let uniq: Vec<f64> = {
                let mut v = pts.clone();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v.dedup();
                v
            };
            prop_assume!(uniq.len() >= 2);
            let m = atom(&uniq);
            let model = CostModel::new(CostKind::DistancePow { p }, 1.0).unwrap();
            let c = build_cost_matrix(&model, &m, &m).unwrap();
            for i in 0..m.len() {
                for j in 0..m.len() {
                    prop_assert!((c.at(i, j) - c.at(j, i)).abs() <= 1e-12);
                }
            }
        }
    }
}
