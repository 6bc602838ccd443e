use crate::error::{Error, Result};
use crate::numerics::{solve_spd, DenseMatrix};

/// Convex feasible regions with exact (or Dykstra) Euclidean projection.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSet {
    /// `{x ≥ 0, wᵀx ≤ cap}` with `w > 0`, `cap ≥ 0`.
    NonnegHalfspace { weights: Vec<f64>, cap: f64 },
    /// `{lower ≤ x ≤ upper}`; infinite bounds allowed (`null` in JSON).
    Box {
        #[serde(with = "lower_bound")]
        lower: Vec<f64>,
        #[serde(with = "upper_bound")]
        upper: Vec<f64>,
    },
    /// `{x : a_iᵀx ≤ b_i}` for each row `i`.
    Polyhedron { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `{x : Ax + b = 0}`.
    EqualityAffine { a: Vec<Vec<f64>>, b: Vec<f64> },
}

macro_rules! bound_serde {
    ($name:ident, $inf:expr) => {
        mod $name {
            use serde::{Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
                s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
                let v: Vec<Option<f64>> = Vec::deserialize(d)?;
                Ok(v.into_iter().map(|x| x.unwrap_or($inf)).collect())
            }
        }
    };
}

bound_serde!(lower_bound, f64::NEG_INFINITY);
bound_serde!(upper_bound, f64::INFINITY);

/// Projection onto one halfspace `aᵀy ≤ b`.
fn project_halfspace(y: &mut [f64], a: &[f64], b: f64, norm_sq: f64) {
    let viol = dot(a, y) - b;
    if viol > 0.0 {
        let s = viol / norm_sq;
        for (yi, ai) in y.iter_mut().zip(a) {
            *yi -= s * ai;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub const DYKSTRA_TOL: f64 = 1e-8;
pub const DYKSTRA_MAX_ITERS: usize = 100_000;

impl ConstraintSet {
    pub fn unconstrained(dim: usize) -> Self {
        ConstraintSet::Box {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn nonneg_halfspace(weights: Vec<f64>, cap: f64) -> Result<Self> {
        let c = ConstraintSet::NonnegHalfspace { weights, cap };
        c.validate()?;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::NonnegHalfspace { weights, .. } => weights.len(),
            ConstraintSet::Box { lower, .. } => lower.len(),
            ConstraintSet::Polyhedron { a, .. } | ConstraintSet::EqualityAffine { a, .. } => {
                a.first().map_or(0, |r| r.len())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConstraintSet::NonnegHalfspace { weights, cap } => {
                if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::InvalidConfig("halfspace weights must be positive".into()));
                }
                if !(cap.is_finite() && *cap >= 0.0) {
                    return Err(Error::InvalidConfig("halfspace cap must be non-negative".into()));
                }
            }
            ConstraintSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::Dimension("box bounds differ in length".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || l.is_nan()) {
                    return Err(Error::InvalidConfig("box needs lower <= upper".into()));
                }
            }
            ConstraintSet::Polyhedron { a, b } | ConstraintSet::EqualityAffine { a, b } => {
                if a.len() != b.len() {
                    return Err(Error::Dimension("constraint rows and offsets differ".into()));
                }
                let d = self.dim();
                if a.iter().any(|r| r.len() != d) {
                    return Err(Error::Dimension("ragged constraint matrix".into()));
                }
                if a.iter().any(|r| r.iter().all(|v| *v == 0.0)) {
                    return Err(Error::InvalidConfig("zero constraint row".into()));
                }
            }
        }
        Ok(())
    }

    /// Largest constraint violation at `x` (0 when feasible).
    pub fn residual(&self, x: &[f64]) -> f64 {
        match self {
            ConstraintSet::NonnegHalfspace { weights, cap } => {
                let neg = x.iter().fold(0.0f64, |m, v| m.max(-v));
                neg.max(dot(weights, x) - cap).max(0.0)
            }
            ConstraintSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .fold(0.0f64, |m, (v, (l, u))| m.max(l - v).max(v - u)),
            ConstraintSet::Polyhedron { a, b } => a
                .iter()
                .zip(b)
                .fold(0.0f64, |m, (r, bi)| m.max(dot(r, x) - bi)),
            ConstraintSet::EqualityAffine { a, b } => a
                .iter()
                .zip(b)
                .fold(0.0f64, |m, (r, bi)| m.max((dot(r, x) + bi).abs())),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && self.residual(x) <= tol
    }

    /// Euclidean projection `argmin_{y ∈ C} ½‖x − y‖²`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point of length {} for a {}-dimensional set",
                x.len(),
                self.dim()
            )));
        }
        match self {
            ConstraintSet::NonnegHalfspace { weights, cap } => {
                Ok(project_nonneg_halfspace(x, weights, *cap))
            }
            ConstraintSet::Box { lower, upper } => Ok(x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.max(*l).min(*u))
                .collect()),
            ConstraintSet::Polyhedron { a, b } => dykstra(x, a, b),
            ConstraintSet::EqualityAffine { a, b } => project_affine(x, a, b),
        }
    }
}

/// Projection onto `{y ≥ 0, wᵀy ≤ cap}`.
///
/// The minimizer is `y(λ) = max(0, x − λw)` for the smallest `λ ≥ 0` with
/// `wᵀy(λ) ≤ cap`. `λ` is bracketed by bisection, then solved in closed
/// form on the resulting active set.
fn project_nonneg_halfspace(x: &[f64], w: &[f64], cap: f64) -> Vec<f64> {
    let clip = |lambda: f64| -> Vec<f64> {
        x.iter()
            .zip(w)
            .map(|(xi, wi)| (xi - lambda * wi).max(0.0))
            .collect()
    };
    let load = |lambda: f64| -> f64 {
        x.iter()
            .zip(w)
            .map(|(xi, wi)| wi * (xi - lambda * wi).max(0.0))
            .sum()
    };
    if load(0.0) <= cap {
        return clip(0.0);
    }
    let mut lo = 0.0;
    let mut hi = x
        .iter()
        .zip(w)
        .map(|(xi, wi)| xi / wi)
        .fold(0.0f64, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if load(mid) > cap {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * (1.0 + hi) {
            break;
        }
    }
    // closed form on the active set {i : x_i − λ w_i > 0}
    let mid = 0.5 * (lo + hi);
    let (mut sx, mut sw) = (0.0, 0.0);
    for (xi, wi) in x.iter().zip(w) {
        if xi - mid * wi > 0.0 {
            sx += wi * xi;
            sw += wi * wi;
        }
    }
    let exact = if sw > 0.0 { (sx - cap) / sw } else { mid };
    let lambda = if exact >= lo - 1e-9 * (1.0 + lo) && exact <= hi + 1e-9 * (1.0 + hi) {
        exact.max(0.0)
    } else {
        hi
    };
    let mut y = clip(lambda);
    // guard against rounding pushing wᵀy a few ulps above the cap
    let excess = dot(w, &y) - cap;
    if excess > 0.0 {
        let s = if cap > 0.0 { cap / (cap + excess) } else { 0.0 };
        y.iter_mut().for_each(|v| *v *= s);
    }
    y
}

/// Dykstra's alternating projections over the polyhedron's halfspaces.
fn dykstra(x: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = a.len();
    let norms: Vec<f64> = a.iter().map(|r| dot(r, r)).collect();
    let mut y = x.to_vec();
    let mut incr = vec![vec![0.0; x.len()]; m];
    for _ in 0..DYKSTRA_MAX_ITERS {
        let prev = y.clone();
        for i in 0..m {
            let mut z: Vec<f64> = y.iter().zip(&incr[i]).map(|(u, v)| u + v).collect();
            let before = z.clone();
            project_halfspace(&mut z, &a[i], b[i], norms[i]);
            for ((p, bz), az) in incr[i].iter_mut().zip(&before).zip(&z) {
                *p = bz - az;
            }
            y = z;
        }
        let change = y
            .iter()
            .zip(&prev)
            .fold(0.0f64, |mx, (u, v)| mx.max((u - v).abs()));
        let viol = a
            .iter()
            .zip(b)
            .fold(0.0f64, |mx, (r, bi)| mx.max(dot(r, &y) - bi));
        if change < DYKSTRA_TOL && viol < DYKSTRA_TOL {
            return Ok(y);
        }
    }
    Err(Error::ProjectionDiverged {
        iters: DYKSTRA_MAX_ITERS,
    })
}

/// `x − Aᵀ(AAᵀ)⁻¹(Ax + b)`.
fn project_affine(x: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let am = DenseMatrix::from_rows(a)?;
    let aat = am.matmul(&am.transpose())?;
    let r: Vec<f64> = am
        .matvec(x)?
        .iter()
        .zip(b)
        .map(|(u, v)| u + v)
        .collect();
    let rhs = DenseMatrix::from_vec(r.len(), 1, r)?;
    let mu = solve_spd(&aat, &rhs)?;
    let corr = am.transpose().matvec(mu.data())?;
    Ok(x.iter().zip(corr).map(|(u, c)| u - c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex4() -> ConstraintSet {
        ConstraintSet::nonneg_halfspace(vec![1.0, 1.0], 4.0).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn worked_examples() {
        let c = simplex4();
        assert_close(&c.project(&[3.0, 3.0]).unwrap(), &[2.0, 2.0], 1e-10);
        assert_close(&c.project(&[-1.0, 1.0]).unwrap(), &[0.0, 1.0], 1e-10);
        assert_close(&c.project(&[5.0, 1.0]).unwrap(), &[4.0, 0.0], 1e-10);
    }

    #[test]
    fn zero_cap_forces_origin() {
        let c = ConstraintSet::nonneg_halfspace(vec![2.0, 0.5, 1.0], 0.0).unwrap();
        assert_eq!(c.project(&[3.0, -1.0, 7.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn weighted_halfspace_kkt() {
        let w = vec![1.0, 2.0, 3.0];
        let c = ConstraintSet::nonneg_halfspace(w.clone(), 2.0).unwrap();
        let x = [4.0, 3.0, -1.0];
        let y = c.project(&x).unwrap();
        assert!((dot(&w, &y) - 2.0).abs() < 1e-12);
        // only coordinate 0 stays active: λ = 2, y = (2, 0, 0)
        assert_close(&y, &[2.0, 0.0, 0.0], 1e-10);
        let lambda = (x[0] - y[0]) / w[0];
        assert!((lambda - 2.0).abs() < 1e-10);
        assert!(x[1] - lambda * w[1] <= 0.0 && x[2] - lambda * w[2] <= 0.0);
    }

    #[test]
    fn box_clips() {
        let c = ConstraintSet::Box {
            lower: vec![0.0, f64::NEG_INFINITY],
            upper: vec![1.0, 0.5],
        };
        assert_eq!(c.project(&[2.0, 3.0]).unwrap(), vec![1.0, 0.5]);
        assert_eq!(c.project(&[-2.0, -3.0]).unwrap(), vec![0.0, -3.0]);
    }

    #[test]
    fn polyhedron_dykstra() {
        // unit simplex written as a polyhedron
        let c = ConstraintSet::Polyhedron {
            a: vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            b: vec![0.0, 0.0, 4.0],
        };
        assert_close(&c.project(&[5.0, 1.0]).unwrap(), &[4.0, 0.0], 1e-7);
        assert_close(&c.project(&[3.0, 3.0]).unwrap(), &[2.0, 2.0], 1e-7);
        assert!(c.residual(&c.project(&[9.0, -3.0]).unwrap()) < 1e-8);
    }

    #[test]
    fn affine_projection() {
        let c = ConstraintSet::EqualityAffine {
            a: vec![vec![1.0, 1.0]],
            b: vec![-1.0],
        };
        assert_close(&c.project(&[0.0, 0.0]).unwrap(), &[0.5, 0.5], 1e-12);
        assert_close(&c.project(&[2.0, 0.0]).unwrap(), &[1.5, -0.5], 1e-12);
    }

    #[test]
    fn validation() {
        assert!(ConstraintSet::nonneg_halfspace(vec![0.0], 1.0).is_err());
        assert!(ConstraintSet::nonneg_halfspace(vec![1.0], -1.0).is_err());
        assert!(ConstraintSet::Box { lower: vec![1.0], upper: vec![0.0] }.validate().is_err());
        assert!(simplex4().project(&[1.0]).is_err());
    }

    #[test]
    fn infinite_bounds_in_json() {
        let c = ConstraintSet::unconstrained(2);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(text, r#"{"kind":"box","lower":[null,null],"upper":[null,null]}"#);
        assert_eq!(serde_json::from_str::<ConstraintSet>(&text).unwrap(), c);
    }

    #[test]
    fn residuals() {
        let c = simplex4();
        assert_eq!(c.residual(&[1.0, 1.0]), 0.0);
        assert_eq!(c.residual(&[-0.5, 1.0]), 0.5);
        assert_eq!(c.residual(&[3.0, 3.0]), 2.0);
    }
}
