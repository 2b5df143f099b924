//! Smooth test objectives with closed-form gradients and known constants.
//!
//! Three families are provided:
//!
//! * rotated quadratics `½ (x − x*)ᵀ A (x − x*)`, convex and `M`-smooth with
//!   `M = λ_max(A)` but not globally Lipschitz;
//! * unregularized logistic regression on synthetic data, convex, smooth and
//!   Lipschitz;
//! * the separable nonconvex sum `Σᵢ xᵢ²/(1+xᵢ²)`, smooth, Lipschitz and
//!   bounded below at the same time.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::vector::{self, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Quadratic,
    Logistic,
    SmoothNonconvex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveConstants {
    /// Lipschitz constant `M` of the gradient.
    pub smoothness: f64,
    /// Lipschitz constant `L` of the function, `None` when unbounded.
    pub lipschitz: Option<f64>,
    /// Infimum of the objective.
    pub f_star: f64,
    pub x_star: Option<Vector>,
}

#[derive(Debug, Clone)]
enum Model {
    Quadratic {
        /// Row-major `dim × dim` Hessian.
        matrix: Vec<f64>,
        eigenvalues: Vec<f64>,
        center: Vec<f64>,
    },
    Logistic {
        /// Row-major `n × dim` feature matrix.
        features: Vec<f64>,
        /// Labels in {−1, +1}.
        labels: Vec<f64>,
    },
    SmoothNonconvex,
}

/// An immutable objective function; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Objective {
    dim: usize,
    constants: ObjectiveConstants,
    model: Model,
}

/// Largest slope of the kernel `x²/(1+x²)`.
///
/// The kernel derivative is `2x/(1+x²)²` and its second derivative
/// `(2 − 6x²)/(1+x²)³` vanishes at `x² = 1/3`, where the slope is `3√3/8`.
pub fn kernel_max_slope() -> f64 {
    3.0 * 3f64.sqrt() / 8.0
}

/// Largest curvature of the kernel `x²/(1+x²)`.
///
/// `|(2 − 6x²)/(1+x²)³|` equals 2 at the origin. Its only other critical
/// points are at `x² = 1`, where the value is `|−4/8| = ½`, and it decays to
/// zero at infinity, so the maximum is 2.
pub const KERNEL_MAX_CURVATURE: f64 = 2.0;

/// `f(x) = ½ (x − x*)ᵀ Q diag(λ) Qᵀ (x − x*)` with `Q` the orthogonal factor of
/// the QR decomposition of a seeded standard-normal matrix.
pub fn make_quadratic(
    dim: usize,
    eigenvalues: &[f64],
    x_star: &Vector,
    rotation_seed: u64,
) -> Result<Objective> {
    if dim == 0 {
        return Err(Error::config("objective.dim", "must be at least 1"));
    }
    if eigenvalues.len() != dim {
        return Err(Error::config(
            "objective.eigenvalues",
            format!("expected {dim} eigenvalues, got {}", eigenvalues.len()),
        ));
    }
    if x_star.dim() != dim {
        return Err(Error::config(
            "objective.x_star",
            format!("expected dimension {dim}, got {}", x_star.dim()),
        ));
    }
    if let Some(bad) = eigenvalues.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::config(
            "objective.eigenvalues",
            format!("eigenvalues must be positive and finite, got {bad}"),
        ));
    }

    let q = rotation(dim, rotation_seed);
    let mut matrix = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += q[(i, k)] * eigenvalues[k] * q[(j, k)];
            }
            matrix[i * dim + j] = acc;
        }
    }
    // Exact symmetry keeps grad consistent with eval to the last bit pattern.
    for i in 0..dim {
        for j in 0..i {
            let avg = 0.5 * (matrix[i * dim + j] + matrix[j * dim + i]);
            matrix[i * dim + j] = avg;
            matrix[j * dim + i] = avg;
        }
    }

    let smoothness = eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    Ok(Objective {
        dim,
        constants: ObjectiveConstants {
            smoothness,
            lipschitz: None,
            f_star: 0.0,
            x_star: Some(x_star.clone()),
        },
        model: Model::Quadratic {
            matrix,
            eigenvalues: eigenvalues.to_vec(),
            center: x_star.as_slice().to_vec(),
        },
    })
}

fn rotation(dim: usize, seed: u64) -> DMatrix<f64> {
    if dim == 1 {
        return DMatrix::identity(1, 1);
    }
    let mut rng = SimRng::new(seed, 0);
    let gauss = DMatrix::from_fn(dim, dim, |_, _| rng.standard_normal());
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Sign convention diag(R) > 0 makes Q a deterministic function of the seed.
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Logistic regression on synthetic data.
///
/// Features are drawn with uniformly random directions and norms in
/// `[½, 1]`. Labels come from a planted model `P(y = +1) = s(⟨w₀, a⟩)` with
/// `‖w₀‖ = 2` and `s` the logistic function; label noise makes the data
/// non-separable so a finite minimizer exists. `f*` is obtained by damped
/// Newton iterations until `‖∇f‖ ≤ 1e−10`.
///
/// Constants: the Hessian is `(1/n) Σ s(zᵢ)(1 − s(zᵢ)) aᵢaᵢᵀ ⪯ ¼ max‖aᵢ‖² I`,
/// so `M = ¼ max‖aᵢ‖²`; each loss term is 1-Lipschitz in its margin, so
/// `L = max‖aᵢ‖`.
pub fn make_logistic(dim: usize, n_samples: usize, data_seed: u64) -> Result<Objective> {
    if dim == 0 {
        return Err(Error::config("objective.dim", "must be at least 1"));
    }
    if n_samples < dim {
        return Err(Error::config(
            "objective.n_samples",
            format!("need n_samples >= dim ({n_samples} < {dim})"),
        ));
    }
    let mut rng = SimRng::new(data_seed, 0);

    let mut planted: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
    let scale = 2.0 / vector::norm_sq(&planted).sqrt();
    planted.iter_mut().for_each(|w| *w *= scale);

    let mut features = Vec::with_capacity(n_samples * dim);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut a: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let norm = vector::norm_sq(&a).sqrt();
        let target = rng.uniform_in(0.5, 1.0);
        a.iter_mut().for_each(|v| *v *= target / norm);
        let p = sigmoid(vector::dot(&a, &planted));
        labels.push(if rng.uniform() < p { 1.0 } else { -1.0 });
        features.extend_from_slice(&a);
    }

    let mut objective = logistic_unsolved(dim, features, labels);
    let (x_star, f_star) = newton_solve(&objective)?;
    objective.constants.f_star = f_star;
    objective.constants.x_star = Some(x_star);
    Ok(objective)
}

/// Logistic loss over explicit data, without solving for the minimizer.
///
/// `f_star` is set to 0, the trivial lower bound of the loss, and `x_star` is
/// left empty.
pub fn logistic_from_data(features: &[Vector], labels: &[f64]) -> Result<Objective> {
    let Some(first) = features.first() else {
        return Err(Error::config("objective.features", "no samples"));
    };
    let dim = first.dim();
    if features.len() != labels.len() {
        return Err(Error::config(
            "objective.labels",
            format!("{} labels for {} samples", labels.len(), features.len()),
        ));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::config(
            "objective.labels",
            format!("labels must be +1 or -1, got {bad}"),
        ));
    }
    let mut flat = Vec::with_capacity(features.len() * dim);
    for a in features {
        if a.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: a.dim(),
            });
        }
        flat.extend_from_slice(a.as_slice());
    }
    Ok(logistic_unsolved(dim, flat, labels.to_vec()))
}

fn logistic_unsolved(dim: usize, features: Vec<f64>, labels: Vec<f64>) -> Objective {
    let max_norm_sq = features
        .chunks_exact(dim)
        .map(vector::norm_sq)
        .fold(0.0, f64::max);
    Objective {
        dim,
        constants: ObjectiveConstants {
            smoothness: 0.25 * max_norm_sq,
            lipschitz: Some(max_norm_sq.sqrt()),
            f_star: 0.0,
            x_star: None,
        },
        model: Model::Logistic { features, labels },
    }
}

fn newton_solve(objective: &Objective) -> Result<(Vector, f64)> {
    let Model::Logistic { features, labels } = &objective.model else {
        unreachable!("newton_solve is only called on logistic objectives");
    };
    let dim = objective.dim;
    let n = labels.len() as f64;
    let mut x = vec![0.0; dim];
    let mut g = vec![0.0; dim];

    for _ in 0..200 {
        let f = objective.value_and_grad(&x, &mut g);
        let gnorm = vector::norm_sq(&g).sqrt();
        if gnorm <= 1e-10 {
            if f < 1e-8 || vector::norm_sq(&x).sqrt() > 1e6 {
                break;
            }
            return Ok((Vector::new(x)?, f));
        }

        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        for (a, y) in features.chunks_exact(dim).zip(labels) {
            let s = sigmoid(y * vector::dot(a, &x));
            let w = s * (1.0 - s) / n;
            for i in 0..dim {
                for j in 0..dim {
                    hess[(i, j)] += w * a[i] * a[j];
                }
            }
        }
        let Some(chol) = hess.cholesky() else {
            break;
        };
        let dir = chol.solve(&DVector::from_column_slice(&g));
        let slope = -vector::dot(&g, dir.as_slice());

        let mut step = 1.0;
        let mut trial = vec![0.0; dim];
        if gnorm > 1e-6 {
            loop {
                for i in 0..dim {
                    trial[i] = x[i] - step * dir[i];
                }
                if objective.value_unchecked(&trial) <= f + 1e-4 * step * slope || step < 1e-12 {
                    break;
                }
                step *= 0.5;
            }
        } else {
            for i in 0..dim {
                trial[i] = x[i] - dir[i];
            }
        }
        x.copy_from_slice(&trial);
        if vector::norm_sq(&x).sqrt() > 1e6 {
            break;
        }
    }
    Err(Error::config(
        "objective.data_seed",
        "logistic data are (nearly) separable: no finite minimizer; increase n_samples or change the seed",
    ))
}

/// `f(x) = Σᵢ xᵢ²/(1+xᵢ²)`.
///
/// Constants: `M = 2` (largest kernel curvature, at the origin; the Hessian
/// is diagonal), `L = √d · 3√3/8` (each partial derivative is at most
/// `3√3/8` in magnitude), `f* = 0` at `x* = 0`.
pub fn make_smooth_nonconvex(dim: usize) -> Result<Objective> {
    if dim == 0 {
        return Err(Error::config("objective.dim", "must be at least 1"));
    }
    Ok(Objective {
        dim,
        constants: ObjectiveConstants {
            smoothness: KERNEL_MAX_CURVATURE,
            lipschitz: Some((dim as f64).sqrt() * kernel_max_slope()),
            f_star: 0.0,
            x_star: Some(Vector::zeros(dim)),
        },
        model: Model::SmoothNonconvex,
    })
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^u)` without overflow.
#[inline]
fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

impl Objective {
    pub fn kind(&self) -> ObjectiveKind {
        match self.model {
            Model::Quadratic { .. } => ObjectiveKind::Quadratic,
            Model::Logistic { .. } => ObjectiveKind::Logistic,
            Model::SmoothNonconvex => ObjectiveKind::SmoothNonconvex,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> &ObjectiveConstants {
        &self.constants
    }

    pub fn smoothness(&self) -> f64 {
        self.constants.smoothness
    }

    pub fn f_star(&self) -> f64 {
        self.constants.f_star
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self.model, Model::SmoothNonconvex)
    }

    /// Eigenvalues of the Hessian, for quadratics.
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Quadratic { eigenvalues, .. } => Some(eigenvalues),
            _ => None,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !vector::all_finite(x) {
            return Err(Error::config("x", "point has non-finite components"));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vector> {
        let mut out = vec![0.0; self.dim];
        self.grad_into(x, &mut out)?;
        Vector::new(out)
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(x)?;
        if out.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: out.len(),
            });
        }
        self.value_and_grad(x, out);
        Ok(())
    }

    /// `f(x) − f*`.
    pub fn gap(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)? - self.constants.f_star)
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Quadratic { matrix, center, .. } => {
                let d = self.dim;
                let mut acc = 0.0;
                for i in 0..d {
                    let row = &matrix[i * d..(i + 1) * d];
                    let mut ar = 0.0;
                    for j in 0..d {
                        ar += row[j] * (x[j] - center[j]);
                    }
                    acc += (x[i] - center[i]) * ar;
                }
                0.5 * acc
            }
            Model::Logistic { features, labels } => {
                let mut acc = 0.0;
                for (a, y) in features.chunks_exact(self.dim).zip(labels) {
                    acc += softplus(-y * vector::dot(a, x));
                }
                acc / labels.len() as f64
            }
            Model::SmoothNonconvex => {
                let mut acc = 0.0;
                for v in x {
                    let s = v * v;
                    acc += s / (1.0 + s);
                }
                acc
            }
        }
    }

    /// Writes `∇f(x)` into `out` and returns `f(x)`. No validation.
    pub(crate) fn value_and_grad(&self, x: &[f64], out: &mut [f64]) -> f64 {
        match &self.model {
            Model::Quadratic { matrix, center, .. } => {
                let d = self.dim;
                let mut acc = 0.0;
                for i in 0..d {
                    let row = &matrix[i * d..(i + 1) * d];
                    let mut ar = 0.0;
                    for j in 0..d {
                        ar += row[j] * (x[j] - center[j]);
                    }
                    out[i] = ar;
                    acc += (x[i] - center[i]) * ar;
                }
                0.5 * acc
            }
            Model::Logistic { features, labels } => {
                out.iter_mut().for_each(|g| *g = 0.0);
                let mut acc = 0.0;
                for (a, y) in features.chunks_exact(self.dim).zip(labels) {
                    let margin = y * vector::dot(a, x);
                    acc += softplus(-margin);
                    let w = -y * sigmoid(-margin);
                    for (g, ai) in out.iter_mut().zip(a) {
                        *g += w * ai;
                    }
                }
                let n = labels.len() as f64;
                out.iter_mut().for_each(|g| *g /= n);
                acc / n
            }
            Model::SmoothNonconvex => {
                let mut acc = 0.0;
                for (g, v) in out.iter_mut().zip(x) {
                    let s = v * v;
                    let denom = 1.0 + s;
                    acc += s / denom;
                    *g = 2.0 * v / (denom * denom);
                }
                acc
            }
        }
    }

    /// Point of the audit box: `center ± radius` per coordinate, where the
    /// center is `x*` when known and the origin otherwise.
    fn sample_point(&self, rng: &mut SimRng, radius: f64) -> Vec<f64> {
        let center = self.constants.x_star.as_ref().map(|v| v.as_slice());
        (0..self.dim)
            .map(|i| center.map_or(0.0, |c| c[i]) + rng.uniform_in(-radius, radius))
            .collect()
    }
}

/// Radius of the box sampled by the audits.
pub const AUDIT_RADIUS: f64 = 5.0;

/// Largest normalized violation of
/// `|f(y) − f(x) − ⟨∇f(x), y − x⟩| ≤ (M/2)‖y − x‖²` over `n_pairs` random pairs.
///
/// Each pair contributes `(lhs − rhs)/(1 + rhs)`; the result is ≤ 0 when the
/// inequality holds everywhere it was sampled.
pub fn check_smoothness_inequality(objective: &Objective, n_pairs: usize, seed: u64) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::config("n_pairs", "must be at least 1"));
    }
    let mut rng = SimRng::new(seed, 0);
    let m = objective.smoothness();
    let mut gx = vec![0.0; objective.dim];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let x = objective.sample_point(&mut rng, AUDIT_RADIUS);
        let y = objective.sample_point(&mut rng, AUDIT_RADIUS);
        let fx = objective.value_and_grad(&x, &mut gx);
        let fy = objective.value_unchecked(&y);
        let mut inner = 0.0;
        for i in 0..objective.dim {
            inner += gx[i] * (y[i] - x[i]);
        }
        let lhs = (fy - fx - inner).abs();
        let rhs = 0.5 * m * vector::dist_sq(&x, &y);
        worst = worst.max((lhs - rhs) / (1.0 + rhs));
    }
    Ok(worst)
}

/// Largest normalized violation of `|f(x) − f(y)| ≤ L‖x − y‖`, or `None` for
/// objectives that are not globally Lipschitz.
pub fn check_lipschitz(objective: &Objective, n_pairs: usize, seed: u64) -> Result<Option<f64>> {
    if n_pairs == 0 {
        return Err(Error::config("n_pairs", "must be at least 1"));
    }
    let Some(l) = objective.constants.lipschitz else {
        return Ok(None);
    };
    let mut rng = SimRng::new(seed, 1);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let x = objective.sample_point(&mut rng, AUDIT_RADIUS);
        let y = objective.sample_point(&mut rng, AUDIT_RADIUS);
        let lhs = (objective.value_unchecked(&x) - objective.value_unchecked(&y)).abs();
        let rhs = l * vector::dist_sq(&x, &y).sqrt();
        worst = worst.max((lhs - rhs) / (1.0 + rhs));
    }
    Ok(Some(worst))
}

/// Largest value of `f* − f(x)` over `n` sampled points (≤ 0 when `f*` is a
/// valid lower bound there).
pub fn check_lower_bound(objective: &Objective, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    let mut rng = SimRng::new(seed, 2);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n {
        let x = objective.sample_point(&mut rng, AUDIT_RADIUS);
        worst = worst.max(objective.constants.f_star - objective.value_unchecked(&x));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn quadratic_1d() {
        let q = make_quadratic(1, &[2.0], &v(&[0.0]), 0).unwrap();
        assert_eq!(q.eval(&[3.0]).unwrap(), 9.0);
        assert_eq!(q.grad(&[3.0]).unwrap().as_slice(), &[6.0]);
        assert_eq!(q.smoothness(), 2.0);
        assert_eq!(q.constants().lipschitz, None);
    }

    #[test]
    fn quadratic_constants_forced_by_construction() {
        let q = make_quadratic(2, &[1.0, 100.0], &v(&[0.0, 0.0]), 7).unwrap();
        assert_eq!(q.smoothness(), 100.0);
        assert_eq!(q.eval(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(q.f_star(), 0.0);
    }

    #[test]
    fn quadratic_gradient_lipschitz_ratio_audit() {
        let q = make_quadratic(2, &[1.0, 100.0], &v(&[0.0, 0.0]), 7).unwrap();
        let mut rng = SimRng::new(11, 0);
        for _ in 0..1000 {
            let x = [rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0)];
            let y = [rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0)];
            let gx = q.grad(&x).unwrap();
            let gy = q.grad(&y).unwrap();
            let ratio = vector::dist_sq(gx.as_slice(), gy.as_slice()).sqrt()
                / vector::dist_sq(&x, &y).sqrt();
            assert!(ratio <= 100.0 + 1e-9, "ratio {ratio}");
        }
    }

    #[test]
    fn quadratic_rejects_bad_shapes() {
        assert!(matches!(
            make_quadratic(2, &[1.0], &v(&[0.0, 0.0]), 0),
            Err(Error::Config { .. })
        ));
        assert!(make_quadratic(2, &[1.0, 2.0], &v(&[0.0]), 0).is_err());
        assert!(make_quadratic(1, &[-1.0], &v(&[0.0]), 0).is_err());
    }

    #[test]
    fn rotation_is_orthogonal() {
        let q = rotation(6, 3);
        let prod = q.transpose() * &q;
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logistic_single_sample_at_origin() {
        let obj = logistic_from_data(&[v(&[1.0])], &[1.0]).unwrap();
        assert!((obj.eval(&[0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((obj.grad(&[0.0]).unwrap()[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn logistic_requires_enough_samples() {
        assert!(matches!(make_logistic(5, 4, 1), Err(Error::Config { .. })));
    }

    #[test]
    fn logistic_f_star_is_a_sampled_lower_bound() {
        let obj = make_logistic(5, 200, 3).unwrap();
        let x_star = obj.constants().x_star.clone().unwrap();
        assert!(obj.grad(x_star.as_slice()).unwrap().norm() <= 1e-10);
        assert!(obj.smoothness() <= 0.25);
        let mut rng = SimRng::new(9, 0);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
            assert!(obj.eval(&x).unwrap() >= obj.f_star());
        }
    }

    #[test]
    fn nonconvex_closed_forms() {
        let f = make_smooth_nonconvex(3).unwrap();
        assert_eq!(f.eval(&[0.0; 3]).unwrap(), 0.0);
        assert_eq!(f.grad(&[0.0; 3]).unwrap().as_slice(), &[0.0; 3]);
        let g = make_smooth_nonconvex(1).unwrap();
        assert_eq!(g.eval(&[1.0]).unwrap(), 0.5);
        assert_eq!(g.grad(&[1.0]).unwrap().as_slice(), &[0.5]);
        assert!(!g.is_convex());
    }

    #[test]
    fn nonconvex_kernel_slope_matches_grid_search() {
        let g = make_smooth_nonconvex(1).unwrap();
        let l = g.constants().lipschitz.unwrap();
        let mut best: f64 = 0.0;
        let mut max_curv: f64 = 0.0;
        let steps = 200_000;
        for k in 0..=steps {
            let x = -10.0 + 20.0 * k as f64 / steps as f64;
            let s = 1.0 + x * x;
            best = best.max((2.0 * x / (s * s)).abs());
            max_curv = max_curv.max(((2.0 - 6.0 * x * x) / (s * s * s)).abs());
        }
        assert!((best - l).abs() < 1e-6, "grid {best} vs L {l}");
        assert!((max_curv - g.smoothness()).abs() < 1e-6);
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let f = make_smooth_nonconvex(2).unwrap();
        assert_eq!(
            f.eval(&[1.0]),
            Err(Error::Dimension { expected: 2, got: 1 })
        );
        assert!(f.grad(&[1.0, 2.0, 3.0]).is_err());
        assert!(f.eval(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn smoothness_audits() {
        let q = make_quadratic(2, &[1.0, 100.0], &v(&[0.5, -1.0]), 7).unwrap();
        assert!(check_smoothness_inequality(&q, 10_000, 1).unwrap() <= 1e-9);
        let n = make_smooth_nonconvex(4).unwrap();
        assert!(check_smoothness_inequality(&n, 10_000, 2).unwrap() <= 1e-9);
        let l = make_logistic(5, 200, 3).unwrap();
        assert!(check_smoothness_inequality(&l, 10_000, 3).unwrap() <= 1e-9);
        assert!(check_smoothness_inequality(&l, 0, 3).is_err());
    }
}
