//! Sparse multivariate polynomials with exact differentiation.
//!
//! Used for the builtin metric/vector-field specs and for manufactured
//! space-time fields, where every derivative must be available in closed form.

use serde::{Deserialize, Serialize};

/// One monomial `coef * prod_i x_i^powers[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64, nvars: usize) -> Self {
        Self::monomial(c, vec![0; nvars])
    }

    pub fn monomial(coef: f64, powers: Vec<u32>) -> Self {
        Self {
            terms: vec![Monomial { coef, powers }],
        }
    }

    /// The coordinate function `x_var` in `nvars` variables.
    pub fn var(var: usize, nvars: usize) -> Self {
        let mut p = vec![0; nvars];
        p[var] = 1;
        Self::monomial(1.0, p)
    }

    pub fn from_terms(terms: &[(f64, &[u32])]) -> Self {
        Self {
            terms: terms
                .iter()
                .map(|(c, p)| Monomial {
                    coef: *c,
                    powers: p.to_vec(),
                })
                .collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|m| {
                m.powers.iter().enumerate().fold(m.coef, |acc, (i, &p)| {
                    acc * x.get(i).copied().unwrap_or(0.0).powi(p as i32)
                })
            })
            .sum()
    }

    pub fn derivative(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter_map(|m| {
                let p = *m.powers.get(var)?;
                if p == 0 {
                    return None;
                }
                let mut powers = m.powers.clone();
                powers[var] = p - 1;
                Some(Monomial {
                    coef: m.coef * p as f64,
                    powers,
                })
            })
            .collect();
        Self { terms }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|m| Monomial {
                    coef: m.coef * s,
                    powers: m.powers.clone(),
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let n = a.powers.len().max(b.powers.len());
                let powers = (0..n)
                    .map(|i| {
                        a.powers.get(i).copied().unwrap_or(0)
                            + b.powers.get(i).copied().unwrap_or(0)
                    })
                    .collect();
                terms.push(Monomial {
                    coef: a.coef * b.coef,
                    powers,
                });
            }
        }
        Self { terms }
    }

    /// Highest total degree among the terms (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|m| m.powers.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|m| m.coef == 0.0)
    }
}
