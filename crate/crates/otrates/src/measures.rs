//! Finitely supported probability measures on R^d used as marginals.
//!
//! Measures are immutable after construction: weights are strictly
//! positive (null atoms are dropped), normalized to total mass 1, and the
//! support points are pairwise distinct. The `anchor` is the reference
//! point x0 used by the growth estimates; by default it is the support
//! point closest to the coordinate origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// A finitely supported probability measure on points of R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    anchor: usize,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

impl DiscreteMeasure {
    /// Builds a measure from raw atoms. Zero-weight atoms are dropped,
    /// remaining weights are normalized to sum to 1.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Measure(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::Measure("empty support".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Measure("zero-dimensional points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Measure(format!(
                    "point {i} has dimension {} != {dim}",
                    p.len()
                )));
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::Measure(format!("point {i} has non-finite coordinate")));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Measure(format!("weight {i} = {w} is not a nonnegative real")));
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Measure("all weights are zero".into()));
        }
        // Drop null atoms, normalize the rest.
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for (p, &w) in points.iter().zip(&weights) {
            if w > 0.0 {
                pts.push(p.clone());
                ws.push(w / total);
            }
        }
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if pts[i] == pts[j] {
                    return Err(Error::Measure(format!(
                        "coincident support points at indices {i} and {j}"
                    )));
                }
            }
        }
        let origin = vec![0.0; dim];
        let anchor = pts
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                euclidean(a, &origin)
                    .partial_cmp(&euclidean(b, &origin))
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        debug_assert!((ws.iter().sum::<f64>() - 1.0).abs() <= MASS_TOL);
        let log_weights = ws.iter().map(|w| w.ln()).collect();
        Ok(Self {
            points: pts,
            weights: ws,
            log_weights,
            anchor,
        })
    }

    /// Overrides the default (origin-closest) anchor.
    pub fn with_anchor(mut self, anchor: usize) -> Result<Self> {
        if anchor >= self.points.len() {
            return Err(Error::Measure(format!(
                "anchor index {anchor} out of range for support of size {}",
                self.points.len()
            )));
        }
        self.anchor = anchor;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn anchor_point(&self) -> &[f64] {
        &self.points[self.anchor]
    }

    /// Integral of `f` (given pointwise over the support) against the measure.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Distances d(x_i, r) from each support point to a reference point.
    pub fn radii_from(&self, r: &[f64]) -> Vec<f64> {
        self.points.iter().map(|p| euclidean(p, r)).collect()
    }

    /// Distances from each support point to the anchor.
    pub fn radii(&self) -> Vec<f64> {
        self.radii_from(&self.points[self.anchor].clone())
    }

    /// True when both measures have identical supports in identical order.
    pub fn same_support(&self, other: &Self) -> bool {
        self.points == other.points
    }
}

/// Subexponential weight families for [`discretize_subexp_family`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubexpFamily {
    Gaussian,
    ExpPower(f64),
}

impl SubexpFamily {
    fn exponent(self) -> f64 {
        match self {
            SubexpFamily::Gaussian => 2.0,
            SubexpFamily::ExpPower(p) => p,
        }
    }
}

/// Regular grid measure with weights proportional to `weight_fn`.
pub fn make_grid_measure<F>(
    lo: &[f64],
    hi: &[f64],
    counts: &[usize],
    weight_fn: F,
) -> Result<DiscreteMeasure>
where
    F: Fn(&[f64]) -> f64,
{
    if lo.len() != hi.len() || lo.len() != counts.len() {
        return Err(Error::Measure("lo/hi/counts length mismatch".into()));
    }
    if counts.iter().any(|&c| c < 1) {
        return Err(Error::Measure("counts must be >= 1 per axis".into()));
    }
    let dim = lo.len();
    let total: usize = counts.iter().product();
    let mut points = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut p = vec![0.0; dim];
        for ax in 0..dim {
            let k = idx % counts[ax];
            idx /= counts[ax];
            p[ax] = if counts[ax] == 1 {
                lo[ax]
            } else {
                lo[ax] + (hi[ax] - lo[ax]) * k as f64 / (counts[ax] - 1) as f64
            };
        }
        points.push(p);
    }
    let weights: Vec<f64> = points.iter().map(|p| weight_fn(p)).collect();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Measure("weight_fn produced a negative or non-finite value".into()));
    }
    DiscreteMeasure::new(points, weights)
}

/// Equispaced discretization of a subexponential density: n atoms per axis
/// on [mean - radius*scale, mean + radius*scale], weights proportional to
/// exp(-(|x - mean| / scale)^p).
pub fn discretize_subexp_family(
    family: SubexpFamily,
    mean: &[f64],
    scale: f64,
    n: usize,
    radius: f64,
) -> Result<DiscreteMeasure> {
    if n < 2 {
        return Err(Error::Measure("discretization needs n >= 2".into()));
    }
    if !(radius > 0.0) || !(scale > 0.0) {
        return Err(Error::Measure("radius and scale must be positive".into()));
    }
    let p = family.exponent();
    if !(p > 0.0) {
        return Err(Error::Measure("exp_power exponent must be positive".into()));
    }
    let dim = mean.len();
    let lo: Vec<f64> = mean.iter().map(|m| m - radius * scale).collect();
    let hi: Vec<f64> = mean.iter().map(|m| m + radius * scale).collect();
    make_grid_measure(&lo, &hi, &vec![n; dim], |x| {
        let r = euclidean(x, mean);
        (-(r / scale).powf(p)).exp()
    })
}

/// Perturbation kinds for stability experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    /// Multiplies each weight by exp(magnitude * u_i), u_i uniform in [-1, 1].
    Reweight,
    /// Displaces each point by magnitude * v_i, v_i uniform in the unit ball.
    Jitter,
}

/// Deterministic seeded perturbation of a measure. The support size is
/// unchanged; magnitude 0 is the identity.
pub fn perturb(
    m: &DiscreteMeasure,
    kind: PerturbKind,
    magnitude: f64,
    seed: u64,
) -> Result<DiscreteMeasure> {
    if !(magnitude >= 0.0) {
        return Err(Error::Measure("perturbation magnitude must be >= 0".into()));
    }
    if magnitude == 0.0 {
        return Ok(m.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        PerturbKind::Reweight => {
            let weights: Vec<f64> = m
                .weights()
                .iter()
                .map(|w| {
                    let u: f64 = rng.gen_range(-1.0..=1.0);
                    w * (magnitude * u).exp()
                })
                .collect();
            DiscreteMeasure::new(m.points().to_vec(), weights)
        }
        PerturbKind::Jitter => {
            let dim = m.dim();
            let points: Vec<Vec<f64>> = m
                .points()
                .iter()
                .map(|p| {
                    let v = unit_ball_sample(&mut rng, dim);
                    p.iter().zip(&v).map(|(x, d)| x + magnitude * d).collect()
                })
                .collect();
            for i in 0..points.len() {
                for j in (i + 1)..points.len() {
                    if points[i] == points[j] {
                        return Err(Error::Measure(format!(
                            "jitter produced coincident points at indices {i} and {j}"
                        )));
                    }
                }
            }
            // Weights are untouched: rebuild for the anchor, then restore
            // the originals to avoid renormalization drift.
            let mut moved = DiscreteMeasure::new(points, m.weights().to_vec())?;
            moved.weights = m.weights().to_vec();
            moved.log_weights = m.log_weights().to_vec();
            Ok(moved)
        }
    }
}

/// Uniform sample from the unit ball via rejection from the cube.
fn unit_ball_sample(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return v;
        }
    }
}

/// JSON measure spec: either an analytic family or explicit atoms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    Family {
        family: String,
        #[serde(default)]
        p: Option<f64>,
        mean: Vec<f64>,
        scale: f64,
        n: usize,
        radius: f64,
    },
    Explicit {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Family {
                family,
                p,
                mean,
                scale,
                n,
                radius,
            } => {
                let fam = match family.as_str() {
                    "gaussian" => SubexpFamily::Gaussian,
                    "exp_power" => SubexpFamily::ExpPower(p.ok_or_else(|| {
                        Error::Config("exp_power family requires field `p`".into())
                    })?),
                    other => {
                        return Err(Error::Config(format!(
                            "unknown measure family `{other}` (expected gaussian or exp_power)"
                        )))
                    }
                };
                discretize_subexp_family(fam, mean, *scale, *n, *radius)
            }
            MeasureSpec::Explicit { points, weights } => {
                DiscreteMeasure::new(points.clone(), weights.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn grid_uniform_two_points() {
        let m = make_grid_measure(&[0.0], &[1.0], &[2], |_| 1.0).unwrap();
        assert_eq!(m.points(), &[vec![0.0], vec![1.0]]);
        assert!(approx(m.weights()[0], 0.5, 1e-15));
        assert!(approx(m.weights()[1], 0.5, 1e-15));
    }

    #[test]
    fn grid_gaussian_weights() {
        let m = make_grid_measure(&[-1.0], &[1.0], &[3], |x| (-x[0] * x[0]).exp()).unwrap();
        let z = 2.0 * (-1.0f64).exp() + 1.0;
        assert!(approx(m.weights()[0], (-1.0f64).exp() / z, 1e-14));
        assert!(approx(m.weights()[1], 1.0 / z, 1e-14));
        assert!(approx(m.weights()[2], (-1.0f64).exp() / z, 1e-14));
    }

    #[test]
    fn grid_single_atom() {
        let m = make_grid_measure(&[0.3], &[0.9], &[1], |_| 7.0).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn grid_all_zero_weights_fails() {
        assert!(make_grid_measure(&[0.0], &[1.0], &[4], |_| 0.0).is_err());
    }

    #[test]
    fn subexp_gaussian_three_atoms() {
        let m = discretize_subexp_family(SubexpFamily::Gaussian, &[0.0], 1.0, 3, 1.0).unwrap();
        let z = 2.0 * (-1.0f64).exp() + 1.0;
        assert!(approx(m.weights()[0], (-1.0f64).exp() / z, 1e-14));
        assert!(approx(m.weights()[1], 1.0 / z, 1e-14));
    }

    #[test]
    fn subexp_exp_power_one_matches_gaussian_shape_at_radius_one() {
        let m = discretize_subexp_family(SubexpFamily::ExpPower(1.0), &[0.0], 1.0, 3, 1.0).unwrap();
        let z = 2.0 * (-1.0f64).exp() + 1.0;
        assert!(approx(m.weights()[0], (-1.0f64).exp() / z, 1e-14));
    }

    #[test]
    fn subexp_two_atoms_symmetric() {
        let m = discretize_subexp_family(SubexpFamily::Gaussian, &[1.0], 0.5, 2, 2.0).unwrap();
        assert!(approx(m.weights()[0], 0.5, 1e-14));
        assert!(approx(m.weights()[1], 0.5, 1e-14));
    }

    #[test]
    fn subexp_symmetric_about_mean() {
        let m = discretize_subexp_family(SubexpFamily::Gaussian, &[0.7], 1.3, 9, 3.0).unwrap();
        let n = m.len();
        for i in 0..n / 2 {
            assert!(approx(m.weights()[i], m.weights()[n - 1 - i], 1e-13));
        }
    }

    #[test]
    fn perturb_zero_magnitude_is_identity() {
        let m = discretize_subexp_family(SubexpFamily::Gaussian, &[0.0], 1.0, 5, 2.0).unwrap();
        for kind in [PerturbKind::Reweight, PerturbKind::Jitter] {
            let m2 = perturb(&m, kind, 0.0, 42).unwrap();
            assert_eq!(m2.points(), m.points());
            for (a, b) in m.weights().iter().zip(m2.weights()) {
                assert!(approx(*a, *b, 1e-15));
            }
        }
    }

    #[test]
    fn perturb_reweight_replays_seeded_generator() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let seed = 7;
        let got = perturb(&m, PerturbKind::Reweight, 0.1, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u1: f64 = rng.gen_range(-1.0..=1.0);
        let u2: f64 = rng.gen_range(-1.0..=1.0);
        let w1 = 0.5 * (0.1 * u1).exp();
        let w2 = 0.5 * (0.1 * u2).exp();
        let z = w1 + w2;
        assert!(approx(got.weights()[0], w1 / z, 1e-15));
        assert!(approx(got.weights()[1], w2 / z, 1e-15));
    }

    #[test]
    fn perturb_jitter_single_atom() {
        let m = DiscreteMeasure::new(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        let got = perturb(&m, PerturbKind::Jitter, 0.5, 3).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got.weights(), &[1.0]);
        assert_ne!(got.points()[0], vec![0.0, 0.0]);
    }

    #[test]
    fn perturb_is_deterministic() {
        let m = discretize_subexp_family(SubexpFamily::Gaussian, &[0.0], 1.0, 8, 2.0).unwrap();
        let a = perturb(&m, PerturbKind::Reweight, 0.05, 11).unwrap();
        let b = perturb(&m, PerturbKind::Reweight, 0.05, 11).unwrap();
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn zero_weight_atoms_are_dropped() {
        let m = DiscreteMeasure::new(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0.5, 0.0, 0.5],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.points(), &[vec![0.0], vec![2.0]]);
    }

    #[test]
    fn anchor_defaults_to_origin_closest() {
        let m = DiscreteMeasure::new(
            vec![vec![3.0], vec![-0.5], vec![2.0]],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        assert_eq!(m.anchor(), 1);
    }

    #[test]
    fn measure_spec_json_round_trip() {
        let spec: MeasureSpec = serde_json::from_str(
            r#"{"family":"gaussian","mean":[0.0],"scale":1.0,"n":3,"radius":1.0}"#,
        )
        .unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.len(), 3);
        let spec2: MeasureSpec =
            serde_json::from_str(r#"{"points":[[0.0],[1.0]],"weights":[0.25,0.75]}"#).unwrap();
        let m2 = spec2.build().unwrap();
        assert_eq!(m2.weights(), &[0.25, 0.75]);
    }

    proptest! {
        #[test]
        fn constructed_measures_are_normalized(
            ws in proptest::collection::vec(0.0f64..10.0, 1..20),
        ) {
            prop_assume!(ws.iter().sum::<f64>() > 0.0);
            let pts: Vec<Vec<f64>> = (0..ws.len()).map(|i| vec![i as f64]).collect();
            let m = DiscreteMeasure::new(pts, ws).unwrap();
            let total: f64 = m.weights().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(m.weights().iter().all(|&w| w > 0.0));
        }

        #[test]
        fn jitter_preserves_weights(seed in 0u64..1000, mag in 0.0f64..0.01) {
            let m = discretize_subexp_family(SubexpFamily::Gaussian, &[0.0], 1.0, 6, 2.0).unwrap();
            let j = perturb(&m, PerturbKind::Jitter, mag, seed).unwrap();
            prop_assert_eq!(j.weights(), m.weights());
            prop_assert_eq!(j.len(), m.len());
        }
    }
}
