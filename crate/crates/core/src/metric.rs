//! Coefficient field `G(x)`, the Riemannian metric `g = G^{-1}`, its
//! Levi-Civita connection, and sampled certification of escape vector fields.
//!
//! Index conventions: `christoffel[k][i][j]` is `Γ^k_{ij}`; a Jacobian
//! `J[(k, j)]` is `∂_j H^k`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FsiError, Result};
use crate::poly::Polynomial;

/// Smallest eigenvalue accepted by [`invert_metric`].
pub const PD_FLOOR: f64 = 1e-12;

/// One symmetric perturbation `coef * x^powers` added to `G[row][col]`
/// (and to `G[col][row]` when off-diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationTerm {
    pub row: usize,
    pub col: usize,
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Builtin coefficient fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    Identity,
    Diagonal {
        entries: Vec<f64>,
    },
    /// `G = exp(2 phi(x)) I`.
    Conformal {
        phi: Polynomial,
    },
    /// `G = I + sum of symmetric monomial perturbations`.
    PolynomialPerturbation {
        terms: Vec<PerturbationTerm>,
    },
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::Identity
    }
}

pub type MatrixEvaluator = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type VectorEvaluator = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
enum MetricSource {
    Builtin(MetricSpec),
    Opaque(MatrixEvaluator),
}

/// How spatial derivatives of `G`, `g` and `H` are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    /// Closed-form differentiation; opaque evaluators fall back to central
    /// differences with the field's default step.
    Exact,
    /// Second-order central differences with the given step.
    Central { step: f64 },
}

/// The coefficient matrix field `G(x)` together with its inverse metric.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    source: MetricSource,
    fd_step: f64,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spec = match &self.source {
            MetricSource::Builtin(s) => format!("{s:?}"),
            MetricSource::Opaque(_) => "opaque".to_string(),
        };
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("spec", &spec)
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl MetricField {
    pub fn identity(dim: usize) -> Self {
        Self::from_spec(dim, MetricSpec::Identity)
    }

    pub fn from_spec(dim: usize, spec: MetricSpec) -> Self {
        Self {
            dim,
            source: MetricSource::Builtin(spec),
            fd_step: 1e-5,
        }
    }

    /// Wraps an arbitrary evaluator; derivatives use central differences
    /// of step `1e-5 * diameter`.
    pub fn opaque(dim: usize, diameter: f64, evaluator: MatrixEvaluator) -> Self {
        Self {
            dim,
            source: MetricSource::Opaque(evaluator),
            fd_step: 1e-5 * diameter,
        }
    }

    /// Sets the default finite-difference step to `1e-5 * diameter`.
    pub fn with_domain_diameter(mut self, diameter: f64) -> Self {
        self.fd_step = 1e-5 * diameter;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> Option<&MetricSpec> {
        match &self.source {
            MetricSource::Builtin(s) => Some(s),
            MetricSource::Opaque(_) => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.spec(), Some(MetricSpec::Identity))
    }

    /// Validates the builtin spec against `dim`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let d = self.dim;
        match self.spec() {
            Some(MetricSpec::Diagonal { entries }) => {
                if entries.len() != d {
                    return Err(format!(
                        "diagonal metric needs {d} entries, got {}",
                        entries.len()
                    ));
                }
                if entries.iter().any(|e| !(*e > 0.0)) {
                    return Err("diagonal metric entries must be positive".into());
                }
            }
            Some(MetricSpec::PolynomialPerturbation { terms }) => {
                for t in terms {
                    if t.row >= d || t.col >= d {
                        return Err(format!(
                            "perturbation index ({}, {}) out of range",
                            t.row, t.col
                        ));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `G(x)`.
    pub fn coefficient(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        match &self.source {
            MetricSource::Opaque(f) => f(x),
            MetricSource::Builtin(spec) => match spec {
                MetricSpec::Identity => DMatrix::identity(d, d),
                MetricSpec::Diagonal { entries } => {
                    DMatrix::from_diagonal(&DVector::from_column_slice(entries))
                }
                MetricSpec::Conformal { phi } => {
                    DMatrix::identity(d, d) * (2.0 * phi.eval(x)).exp()
                }
                MetricSpec::PolynomialPerturbation { terms } => {
                    let mut g = DMatrix::identity(d, d);
                    for t in terms {
                        let v = t.coef * monomial(&t.powers, x);
                        g[(t.row, t.col)] += v;
                        if t.row != t.col {
                            g[(t.col, t.row)] += v;
                        }
                    }
                    g
                }
            },
        }
    }

    /// `g(x) = G(x)^{-1}`.
    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        invert_metric(&self.coefficient(x))
    }

    /// `∂_i G(x)` for `i = 0..dim`.
    pub fn coefficient_derivatives(&self, x: &[f64], mode: DerivativeMode) -> Vec<DMatrix<f64>> {
        let d = self.dim;
        let step = match (mode, &self.source) {
            (DerivativeMode::Central { step }, _) => Some(step),
            (DerivativeMode::Exact, MetricSource::Opaque(_)) => Some(self.fd_step),
            (DerivativeMode::Exact, MetricSource::Builtin(_)) => None,
        };
        if let Some(h) = step {
            return central_differences(x, h, |y| self.coefficient(y));
        }
        let MetricSource::Builtin(spec) = &self.source else {
            unreachable!()
        };
        (0..d)
            .map(|i| match spec {
                MetricSpec::Identity | MetricSpec::Diagonal { .. } => DMatrix::zeros(d, d),
                MetricSpec::Conformal { phi } => {
                    let s = 2.0 * phi.derivative(i).eval(x) * (2.0 * phi.eval(x)).exp();
                    DMatrix::identity(d, d) * s
                }
                MetricSpec::PolynomialPerturbation { terms } => {
                    let mut m = DMatrix::zeros(d, d);
                    for t in terms {
                        let p = Polynomial::monomial(t.coef, t.powers.clone()).derivative(i);
                        let v = p.eval(x);
                        m[(t.row, t.col)] += v;
                        if t.row != t.col {
                            m[(t.col, t.row)] += v;
                        }
                    }
                    m
                }
            })
            .collect()
    }

    /// `∂_i g(x)` for `i = 0..dim`; symmetrized.
    pub fn metric_derivatives(&self, x: &[f64], mode: DerivativeMode) -> Result<Vec<DMatrix<f64>>> {
        let raw = match mode {
            DerivativeMode::Central { step } => {
                // validate positivity at the centre and at every stencil point
                self.metric(x)?;
                let mut out = Vec::with_capacity(self.dim);
                for i in 0..self.dim {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[i] += step;
                    xm[i] -= step;
                    out.push((self.metric(&xp)? - self.metric(&xm)?) / (2.0 * step));
                }
                out
            }
            DerivativeMode::Exact => {
                let g = self.metric(x)?;
                self.coefficient_derivatives(x, mode)
                    .into_iter()
                    .map(|dg| -(&g * dg * &g))
                    .collect()
            }
        };
        Ok(raw.into_iter().map(|m| symmetrize(&m)).collect())
    }
}

fn monomial(powers: &[u32], x: &[f64]) -> f64 {
    powers.iter().enumerate().fold(1.0, |acc, (i, &p)| {
        acc * x.get(i).copied().unwrap_or(0.0).powi(p as i32)
    })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn central_differences<F>(x: &[f64], h: f64, f: F) -> Vec<DMatrix<f64>>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

/// Inverts a symmetric positive definite coefficient matrix.
pub fn invert_metric(coeff: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(coeff);
    let min_eigenvalue = sym.clone().symmetric_eigen().eigenvalues.min();
    if !(min_eigenvalue > PD_FLOOR) {
        return Err(FsiError::NotPositiveDefinite { min_eigenvalue });
    }
    let chol = sym
        .cholesky()
        .ok_or(FsiError::NotPositiveDefinite { min_eigenvalue })?;
    Ok(symmetrize(&chol.inverse()))
}

/// Levi-Civita connection coefficients `Γ^k_{ij}` of `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γ^k_{ij}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut m: f64 = 0.0;
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    m = m.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        m
    }
}

/// `Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`, where `g^{kl}` is `G`.
pub fn christoffel_symbols(
    metric: &MetricField,
    x: &[f64],
    mode: DerivativeMode,
) -> Result<Christoffel> {
    let d = metric.dim();
    let coeff = metric.coefficient(x);
    let dg = metric.metric_derivatives(x, mode)?;
    let mut data = vec![0.0; d * d * d];
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += coeff[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                data[(k * d + i) * d + j] = 0.5 * s;
                data[(k * d + j) * d + i] = 0.5 * s;
            }
        }
    }
    Ok(Christoffel { dim: d, data })
}

/// Builtin vector fields `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VectorFieldSpec {
    /// `H = x − center`.
    Radial { center: Vec<f64> },
    /// `H = alpha (x − center)`.
    ScaledRadial { center: Vec<f64>, alpha: f64 },
    /// Component-wise polynomials.
    Polynomial { components: Vec<Polynomial> },
}

#[derive(Clone)]
enum FieldSource {
    Builtin(VectorFieldSpec),
    Opaque(VectorEvaluator),
}

/// A vector field `H(x)` on the elastic domain.
#[derive(Clone)]
pub struct VectorFieldH {
    dim: usize,
    source: FieldSource,
    fd_step: f64,
}

impl fmt::Debug for VectorFieldH {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spec = match &self.source {
            FieldSource::Builtin(s) => format!("{s:?}"),
            FieldSource::Opaque(_) => "opaque".to_string(),
        };
        f.debug_struct("VectorFieldH")
            .field("dim", &self.dim)
            .field("spec", &spec)
            .finish()
    }
}

impl VectorFieldH {
    pub fn from_spec(dim: usize, spec: VectorFieldSpec) -> Self {
        Self {
            dim,
            source: FieldSource::Builtin(spec),
            fd_step: 1e-5,
        }
    }

    pub fn radial(center: &[f64]) -> Self {
        Self::from_spec(
            center.len(),
            VectorFieldSpec::Radial {
                center: center.to_vec(),
            },
        )
    }

    pub fn opaque(dim: usize, diameter: f64, evaluator: VectorEvaluator) -> Self {
        Self {
            dim,
            source: FieldSource::Opaque(evaluator),
            fd_step: 1e-5 * diameter,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> Option<&VectorFieldSpec> {
        match &self.source {
            FieldSource::Builtin(s) => Some(s),
            FieldSource::Opaque(_) => None,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let d = self.dim;
        match self.spec() {
            Some(VectorFieldSpec::Radial { center })
            | Some(VectorFieldSpec::ScaledRadial { center, .. })
                if center.len() != d =>
            {
                Err(format!("vector field center needs {d} coordinates"))
            }
            Some(VectorFieldSpec::Polynomial { components }) if components.len() != d => {
                Err(format!("polynomial vector field needs {d} components"))
            }
            _ => Ok(()),
        }
    }

    /// Returns `alpha * H` (builtin specs stay builtin).
    pub fn scaled(&self, alpha: f64) -> Self {
        let source = match &self.source {
            FieldSource::Builtin(VectorFieldSpec::Radial { center }) => {
                FieldSource::Builtin(VectorFieldSpec::ScaledRadial {
                    center: center.clone(),
                    alpha,
                })
            }
            FieldSource::Builtin(VectorFieldSpec::ScaledRadial { center, alpha: a }) => {
                FieldSource::Builtin(VectorFieldSpec::ScaledRadial {
                    center: center.clone(),
                    alpha: a * alpha,
                })
            }
            FieldSource::Builtin(VectorFieldSpec::Polynomial { components }) => {
                FieldSource::Builtin(VectorFieldSpec::Polynomial {
                    components: components.iter().map(|p| p.scale(alpha)).collect(),
                })
            }
            FieldSource::Opaque(f) => {
                let f = f.clone();
                FieldSource::Opaque(Arc::new(move |x: &[f64]| f(x) * alpha))
            }
        };
        Self {
            dim: self.dim,
            source,
            fd_step: self.fd_step,
        }
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        match &self.source {
            FieldSource::Opaque(f) => f(x),
            FieldSource::Builtin(spec) => match spec {
                VectorFieldSpec::Radial { center } => {
                    DVector::from_iterator(self.dim, x.iter().zip(center).map(|(a, c)| a - c))
                }
                VectorFieldSpec::ScaledRadial { center, alpha } => DVector::from_iterator(
                    self.dim,
                    x.iter().zip(center).map(|(a, c)| alpha * (a - c)),
                ),
                VectorFieldSpec::Polynomial { components } => {
                    DVector::from_iterator(self.dim, components.iter().map(|p| p.eval(x)))
                }
            },
        }
    }

    /// `J[(k, j)] = ∂_j H^k`.
    pub fn jacobian(&self, x: &[f64], mode: DerivativeMode) -> DMatrix<f64> {
        let d = self.dim;
        let step = match (mode, &self.source) {
            (DerivativeMode::Central { step }, _) => Some(step),
            (DerivativeMode::Exact, FieldSource::Opaque(_)) => Some(self.fd_step),
            _ => None,
        };
        if let Some(h) = step {
            let mut jac = DMatrix::zeros(d, d);
            for j in 0..d {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                let col = (self.eval(&xp) - self.eval(&xm)) / (2.0 * h);
                jac.set_column(j, &col);
            }
            return jac;
        }
        match self.spec().expect("builtin") {
            VectorFieldSpec::Radial { .. } => DMatrix::identity(d, d),
            VectorFieldSpec::ScaledRadial { alpha, .. } => DMatrix::identity(d, d) * *alpha,
            VectorFieldSpec::Polynomial { components } => {
                DMatrix::from_fn(d, d, |k, j| components[k].derivative(j).eval(x))
            }
        }
    }

    /// Euclidean divergence `∂_k H^k`.
    pub fn divergence(&self, x: &[f64], mode: DerivativeMode) -> f64 {
        self.jacobian(x, mode).trace()
    }
}

/// Symmetric matrix `S` with `DH(X, X) = Xᵀ S X`, where `DH` is the covariant
/// differential of `H` for the metric `g`.
pub fn covariant_differential(
    metric: &MetricField,
    field: &VectorFieldH,
    x: &[f64],
    mode: DerivativeMode,
) -> Result<DMatrix<f64>> {
    let d = metric.dim();
    let g = metric.metric(x)?;
    let gamma = christoffel_symbols(metric, x, mode)?;
    let h = field.eval(x);
    let jac = field.jacobian(x, mode);
    // (∇H)^k_j = ∂_j H^k + Γ^k_{jl} H^l
    let nabla = DMatrix::from_fn(d, d, |k, j| {
        jac[(k, j)] + (0..d).map(|l| gamma.get(k, j, l) * h[l]).sum::<f64>()
    });
    // lowered: L_{jm} = g_{mk} (∇H)^k_j
    let lowered = nabla.transpose() * &g;
    Ok(symmetrize(&lowered))
}

/// Smallest `λ` with `S x = λ g x`.
pub fn generalized_min_eigenvalue(s: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
    let min_eigenvalue = g.clone().symmetric_eigen().eigenvalues.min();
    let chol = g
        .clone()
        .cholesky()
        .ok_or(FsiError::NotPositiveDefinite { min_eigenvalue })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(FsiError::NotPositiveDefinite { min_eigenvalue })?;
    let c = symmetrize(&(&linv * s * linv.transpose()));
    Ok(c.symmetric_eigen().eigenvalues.min())
}

/// Acceptance thresholds for [`certify_escape`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeThresholds {
    pub rho0: f64,
    pub gamma0: f64,
}

impl Default for EscapeThresholds {
    fn default() -> Self {
        Self {
            rho0: 1e-8,
            gamma0: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Refuted,
}

/// Outcome of a sampled check of the escape-field hypothesis.
///
/// `Refuted` is conclusive; `Certified` means no violation was found at the
/// reported sample resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeCertificate {
    pub rho0: f64,
    pub gamma0: f64,
    pub sample_count: usize,
    pub interior_samples: usize,
    pub boundary_samples: usize,
    pub min_interior_eigenvalue: f64,
    pub min_boundary_inner_product: f64,
    pub verdict: Verdict,
}

impl EscapeCertificate {
    /// Flat `key=value` report, one entry per line.
    pub fn to_report(&self) -> String {
        let verdict = match self.verdict {
            Verdict::Certified => "certified",
            Verdict::Refuted => "refuted",
        };
        format!(
            "rho0={:.17e}\ngamma0={:.17e}\nsample_count={}\ninterior_samples={}\nboundary_samples={}\nmin_interior_eigenvalue={:.17e}\nmin_boundary_inner_product={:.17e}\nverdict={}\n",
            self.rho0,
            self.gamma0,
            self.sample_count,
            self.interior_samples,
            self.boundary_samples,
            self.min_interior_eigenvalue,
            self.min_boundary_inner_product,
            verdict
        )
    }
}

/// Checks `DH(X,X) ≥ ϱ₀|X|²_g` at interior samples and `⟨H, ν⟩ ≥ γ₀` at
/// boundary samples.
pub fn certify_escape(
    metric: &MetricField,
    field: &VectorFieldH,
    interior: &[Vec<f64>],
    boundary: &[(Vec<f64>, Vec<f64>)],
    thresholds: EscapeThresholds,
    mode: DerivativeMode,
) -> Result<EscapeCertificate> {
    if interior.is_empty() {
        return Err(FsiError::EmptySampleSet("interior"));
    }
    if boundary.is_empty() {
        return Err(FsiError::EmptySampleSet("boundary"));
    }
    let lambdas: Vec<f64> = interior
        .par_iter()
        .map(|x| {
            let s = covariant_differential(metric, field, x, mode)?;
            let g = metric.metric(x)?;
            generalized_min_eigenvalue(&s, &g)
        })
        .collect::<Result<Vec<_>>>()?;
    let min_interior_eigenvalue = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let min_boundary_inner_product = boundary
        .par_iter()
        .map(|(x, nu)| {
            field
                .eval(x)
                .iter()
                .zip(nu)
                .map(|(h, n)| h * n)
                .sum::<f64>()
        })
        .reduce(|| f64::INFINITY, f64::min);
    let verdict = if min_interior_eigenvalue >= thresholds.rho0
        && min_boundary_inner_product >= thresholds.gamma0
    {
        Verdict::Certified
    } else {
        Verdict::Refuted
    };
    Ok(EscapeCertificate {
        rho0: min_interior_eigenvalue,
        gamma0: min_boundary_inner_product,
        sample_count: interior.len() + boundary.len(),
        interior_samples: interior.len(),
        boundary_samples: boundary.len(),
        min_interior_eigenvalue,
        min_boundary_inner_product,
        verdict,
    })
}

/// Tensor grid of `n × n` points over the bounding square of a disc, keeping
/// those in the closed disc.
pub fn disc_interior_grid(center: &[f64], radius: f64, n: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    if n < 2 {
        return vec![center.to_vec()];
    }
    for i in 0..n {
        for j in 0..n {
            let x = center[0] - radius + 2.0 * radius * i as f64 / (n - 1) as f64;
            let y = center[1] - radius + 2.0 * radius * j as f64 / (n - 1) as f64;
            let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
            if r2 <= radius * radius {
                pts.push(vec![x, y]);
            }
        }
    }
    pts
}

/// `n` equally spaced points on a circle with their outward unit normals.
pub fn disc_boundary_samples(center: &[f64], radius: f64, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let (s, c) = th.sin_cos();
            (
                vec![center[0] + radius * c, center[1] + radius * s],
                vec![c, s],
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn invert_identity_and_analytic_cases() {
        let g = invert_metric(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));

        let g = invert_metric(&mat2(2.0, 0.0, 0.0, 1.0)).unwrap();
        assert!(max_abs(&(g - mat2(0.5, 0.0, 0.0, 1.0))) <= 1e-15);

        let coeff = mat2(2.0, 1.0, 1.0, 2.0);
        let g = invert_metric(&coeff).unwrap();
        let expected = mat2(2.0, -1.0, -1.0, 2.0) / 3.0;
        assert!(max_abs(&(&g - expected)) <= 1e-15);
        assert!(max_abs(&(&g * &coeff - DMatrix::identity(2, 2))) <= 1e-12);
    }

    #[test]
    fn invert_rejects_indefinite() {
        let err = invert_metric(&mat2(1.0, 2.0, 2.0, 1.0)).unwrap_err();
        assert!(matches!(err, FsiError::NotPositiveDefinite { .. }));
        let err = invert_metric(&mat2(1.0, 0.0, 0.0, 1e-13)).unwrap_err();
        assert!(matches!(err, FsiError::NotPositiveDefinite { .. }));
    }

    #[test]
    fn flat_and_constant_metrics_have_zero_connection() {
        let flat = MetricField::identity(3);
        let gam = christoffel_symbols(&flat, &[0.3, -0.2, 0.7], DerivativeMode::Exact).unwrap();
        assert_eq!(gam.max_abs(), 0.0);

        let constant = MetricField::from_spec(
            2,
            MetricSpec::Diagonal {
                entries: vec![3.0, 3.0],
            },
        );
        let gam = christoffel_symbols(
            &constant,
            &[0.1, 0.4],
            DerivativeMode::Central { step: 1e-3 },
        )
        .unwrap();
        assert!(gam.max_abs() <= 1e-12);
    }

    /// Conformal `g = e^{2ψ} δ` has `Γ^k_{ij} = δ^k_i ∂_jψ + δ^k_j ∂_iψ − δ_{ij} ∂_kψ`.
    /// With `G = e^{2φ} I` we have `ψ = −φ`.
    #[test]
    fn conformal_connection_matches_closed_form() {
        let phi = Polynomial::from_terms(&[(-1.0, &[1, 0])]); // ψ = x₁, so g = e^{2x₁} I
        let metric = MetricField::from_spec(2, MetricSpec::Conformal { phi });
        let dpsi = [1.0, 0.0];
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for mode in [
            DerivativeMode::Exact,
            DerivativeMode::Central { step: 1e-4 },
        ] {
            let gam = christoffel_symbols(&metric, &[0.0, 0.0], mode).unwrap();
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let expected =
                            delta(k, i) * dpsi[j] + delta(k, j) * dpsi[i] - delta(i, j) * dpsi[k];
                        let tol = if mode == DerivativeMode::Exact {
                            1e-14
                        } else {
                            1e-7
                        };
                        assert!(
                            (gam.get(k, i, j) - expected).abs() <= tol,
                            "Γ^{k}_{i}{j} = {} vs {expected}",
                            gam.get(k, i, j)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn radial_field_in_flat_metric_has_identity_differential() {
        let metric = MetricField::identity(2);
        let h = VectorFieldH::radial(&[0.2, -0.1]);
        let s = covariant_differential(&metric, &h, &[0.5, 0.3], DerivativeMode::Exact).unwrap();
        assert!(max_abs(&(s - DMatrix::identity(2, 2))) <= 1e-15);
        let s = covariant_differential(&metric, &h.scaled(2.5), &[0.5, 0.3], DerivativeMode::Exact)
            .unwrap();
        assert!(max_abs(&(s - DMatrix::identity(2, 2) * 2.5)) <= 1e-15);
    }

    /// For `g = e^{2ψ} I` and `H = x`, the symmetric differential is
    /// `e^{2ψ}(1 + x·∇ψ) I` (worked out by hand from the conformal connection).
    #[test]
    fn conformal_radial_differential_closed_form() {
        // φ = 0.1 x₁ + 0.05 x₂², ψ = −φ
        let phi = Polynomial::from_terms(&[(0.1, &[1, 0]), (0.05, &[0, 2])]);
        let metric = MetricField::from_spec(2, MetricSpec::Conformal { phi: phi.clone() });
        let h = VectorFieldH::radial(&[0.0, 0.0]);
        for x in [[0.3, -0.4], [-0.7, 0.2], [0.1, 0.9]] {
            let psi = -phi.eval(&x);
            let grad_psi = [-0.1, -0.1 * x[1]];
            let factor = (2.0 * psi).exp() * (1.0 + x[0] * grad_psi[0] + x[1] * grad_psi[1]);
            let s = covariant_differential(&metric, &h, &x, DerivativeMode::Exact).unwrap();
            assert!(max_abs(&(s - DMatrix::identity(2, 2) * factor)) <= 1e-13);
        }
    }

    #[test]
    fn certification_of_flat_radial_field() {
        let center = [0.3, -0.2];
        let r0 = 1.0;
        let metric = MetricField::identity(2);
        let h = VectorFieldH::radial(&center);
        let interior = disc_interior_grid(&center, r0, 21);
        let boundary = disc_boundary_samples(&center, r0, 64);
        let cert = certify_escape(
            &metric,
            &h,
            &interior,
            &boundary,
            EscapeThresholds::default(),
            DerivativeMode::Exact,
        )
        .unwrap();
        assert_eq!(cert.verdict, Verdict::Certified);
        assert!((cert.rho0 - 1.0).abs() <= 1e-12);
        assert!((cert.gamma0 - r0).abs() <= 1e-12);
        assert!(cert.rho0 <= cert.min_interior_eigenvalue);

        let cert = certify_escape(
            &metric,
            &h.scaled(-1.0),
            &interior,
            &boundary,
            EscapeThresholds::default(),
            DerivativeMode::Exact,
        )
        .unwrap();
        assert_eq!(cert.verdict, Verdict::Refuted);
        assert!((cert.min_interior_eigenvalue + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn certification_rejects_empty_samples() {
        let metric = MetricField::identity(2);
        let h = VectorFieldH::radial(&[0.0, 0.0]);
        let b = disc_boundary_samples(&[0.0, 0.0], 1.0, 4);
        let err = certify_escape(
            &metric,
            &h,
            &[],
            &b,
            EscapeThresholds::default(),
            DerivativeMode::Exact,
        )
        .unwrap_err();
        assert_eq!(err, FsiError::EmptySampleSet("interior"));
        let err = certify_escape(
            &metric,
            &h,
            &[vec![0.0, 0.0]],
            &[],
            EscapeThresholds::default(),
            DerivativeMode::Exact,
        )
        .unwrap_err();
        assert_eq!(err, FsiError::EmptySampleSet("boundary"));
    }

    #[test]
    fn certification_propagates_indefinite_metric() {
        let metric = MetricField::from_spec(
            2,
            MetricSpec::PolynomialPerturbation {
                terms: vec![PerturbationTerm {
                    row: 0,
                    col: 0,
                    coef: -2.0,
                    powers: vec![0, 0],
                }],
            },
        );
        let h = VectorFieldH::radial(&[0.0, 0.0]);
        let b = disc_boundary_samples(&[0.0, 0.0], 1.0, 4);
        let err = certify_escape(
            &metric,
            &h,
            &[vec![0.1, 0.1]],
            &b,
            EscapeThresholds::default(),
            DerivativeMode::Exact,
        )
        .unwrap_err();
        assert!(matches!(err, FsiError::NotPositiveDefinite { .. }));
    }

    #[test]
    fn generalized_eigenvalue_of_diagonal_pair() {
        let s = mat2(3.0, 0.0, 0.0, 8.0);
        let g = mat2(1.0, 0.0, 0.0, 2.0);
        assert!((generalized_min_eigenvalue(&s, &g).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn opaque_metric_uses_finite_differences() {
        let spec = MetricField::from_spec(
            2,
            MetricSpec::PolynomialPerturbation {
                terms: vec![PerturbationTerm {
                    row: 0,
                    col: 1,
                    coef: 0.2,
                    powers: vec![1, 1],
                }],
            },
        );
        let inner = spec.clone();
        let opaque = MetricField::opaque(2, 2.0, Arc::new(move |x: &[f64]| inner.coefficient(x)));
        let x = [0.4, -0.3];
        let a = christoffel_symbols(&spec, &x, DerivativeMode::Exact).unwrap();
        let b = christoffel_symbols(&opaque, &x, DerivativeMode::Exact).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-8);
    }
}
