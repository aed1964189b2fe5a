//! Quadrature rules on the reference triangle and the reference edge.

/// Triangle rule in barycentric coordinates. Weights sum to the reference
/// triangle area `1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

/// Gauss rule on the unit interval `[0, 1]`; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// 6-point Dunavant rule, exact for degree 4.
    pub fn dunavant4() -> Self {
        let a1 = 0.445_948_490_915_964_886_318_329_253_883;
        let w1 = 0.223_381_589_678_011_465_944_795_245_614;
        let a2 = 0.091_576_213_509_770_743_459_571_463_402;
        let w2 = 0.109_951_743_655_321_867_388_538_087_720;
        let mut r = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 4,
        };
        r.push_orbit3(a1, w1);
        r.push_orbit3(a2, w2);
        r.normalize();
        r
    }

    /// 12-point Dunavant rule, exact for degree 6. Used for error norms.
    pub fn dunavant6() -> Self {
        let mut r = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 6,
        };
        r.push_orbit3(
            0.249_286_745_170_910_421_136_159_842_105,
            0.116_786_275_726_379_366_030_690_538_164,
        );
        r.push_orbit3(
            0.063_089_014_491_502_228_340_331_602_871,
            0.050_844_906_370_206_816_920_936_809_107,
        );
        let (a, b) = (
            0.053_145_049_844_816_947_353_249_671_631,
            0.310_352_451_033_784_405_416_607_733_956,
        );
        let c = 1.0 - a - b;
        let w = 0.082_851_075_618_373_575_193_553_456_421;
        for p in [
            [a, b, c],
            [b, a, c],
            [a, c, b],
            [c, a, b],
            [b, c, a],
            [c, b, a],
        ] {
            r.points.push(p);
            r.weights.push(w);
        }
        r.normalize();
        r
    }

    fn push_orbit3(&mut self, a: f64, w: f64) {
        let c = 1.0 - 2.0 * a;
        for p in [[a, a, c], [a, c, a], [c, a, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    /// Rescales published weights (given for unit total) to the reference area.
    fn normalize(&mut self) {
        let s: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w *= 0.5 / s;
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::dunavant4()
    }
}

impl EdgeRule {
    /// 3-point Gauss–Legendre, exact for degree 5.
    pub fn gauss3() -> Self {
        let d = 0.15_f64.sqrt();
        Self {
            points: vec![0.5 - d, 0.5, 0.5 + d],
            weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
        }
    }
}

impl Default for EdgeRule {
    fn default() -> Self {
        Self::gauss3()
    }
}

/// Compensated (Neumaier) summation; result depends only on the input order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫_T x^a y^b over the reference triangle is a! b! / (a + b + 2)!.
    fn exact_monomial(a: u32, b: u32) -> f64 {
        let f = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        f(a) * f(b) / f(a + b + 2)
    }

    fn check_rule(rule: &QuadratureRule) {
        assert!((rule.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        for a in 0..=rule.degree {
            for b in 0..=(rule.degree - a) {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                    .sum();
                assert!(
                    (q - exact_monomial(a, b)).abs() < 1e-14,
                    "degree ({a},{b}): {q} vs {}",
                    exact_monomial(a, b)
                );
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        check_rule(&QuadratureRule::dunavant4());
        check_rule(&QuadratureRule::dunavant6());
    }

    #[test]
    fn edge_rule_exact_to_degree_five() {
        let r = EdgeRule::gauss3();
        for p in 0..=5 {
            let q: f64 = r
                .points
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * x.powi(p))
                .sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
