//! Analytic vector fields used as initial data and manufactured solutions.

use crate::mesh::Point;

/// A smooth 2D vector field with exact first and second derivatives.
///
/// `gradient(x)[i][k] = ∂_k u^i`, `hessian(x)[i][j][k] = ∂_j ∂_k u^i`.
pub trait VectorField: Sync {
    fn value(&self, x: Point) -> [f64; 2];
    fn gradient(&self, x: Point) -> [[f64; 2]; 2];
    fn hessian(&self, x: Point) -> [[[f64; 2]; 2]; 2];

    fn laplacian(&self, x: Point) -> [f64; 2] {
        let h = self.hessian(x);
        [h[0][0][0] + h[0][1][1], h[1][0][0] + h[1][1][1]]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl VectorField for ZeroField {
    fn value(&self, _: Point) -> [f64; 2] {
        [0.0; 2]
    }
    fn gradient(&self, _: Point) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
    fn hessian(&self, _: Point) -> [[[f64; 2]; 2]; 2] {
        [[[0.0; 2]; 2]; 2]
    }
}

/// `u(x) = amplitude · b(|x − c|) · direction` with the compactly supported
/// bump `b(r) = (1 − r²/ρ²)⁴` for `r < ρ`.
#[derive(Debug, Clone, Copy)]
pub struct BumpField {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
    pub direction: [f64; 2],
}

impl BumpField {
    /// Scalar bump with its gradient and Hessian.
    fn scalar(&self, x: Point) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let rho2 = self.radius * self.radius;
        let s = 1.0 - (d[0] * d[0] + d[1] * d[1]) / rho2;
        if s <= 0.0 {
            return (0.0, [0.0; 2], [[0.0; 2]; 2]);
        }
        let b = s.powi(4);
        // ∂_k s = −2 d_k / ρ²
        let ds = [-2.0 * d[0] / rho2, -2.0 * d[1] / rho2];
        let g = [4.0 * s.powi(3) * ds[0], 4.0 * s.powi(3) * ds[1]];
        let mut h = [[0.0; 2]; 2];
        for j in 0..2 {
            for k in 0..2 {
                let dss = if j == k { -2.0 / rho2 } else { 0.0 };
                h[j][k] = 12.0 * s * s * ds[j] * ds[k] + 4.0 * s.powi(3) * dss;
            }
        }
        (b, g, h)
    }
}

impl VectorField for BumpField {
    fn value(&self, x: Point) -> [f64; 2] {
        let (b, _, _) = self.scalar(x);
        [
            self.amplitude * b * self.direction[0],
            self.amplitude * b * self.direction[1],
        ]
    }
    fn gradient(&self, x: Point) -> [[f64; 2]; 2] {
        let (_, g, _) = self.scalar(x);
        let a = self.amplitude;
        [
            [a * self.direction[0] * g[0], a * self.direction[0] * g[1]],
            [a * self.direction[1] * g[0], a * self.direction[1] * g[1]],
        ]
    }
    fn hessian(&self, x: Point) -> [[[f64; 2]; 2]; 2] {
        let (_, _, h) = self.scalar(x);
        let mut out = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i][j][k] = self.amplitude * self.direction[i] * h[j][k];
                }
            }
        }
        out
    }
}

/// Divergence-free swirl `u = amplitude · (∂_y ψ, −∂_x ψ)` with the radial
/// stream function `ψ(r) = (r − r0)² (r1 − r)² / L³`, `L = r1 − r0`; `u` and
/// `∇u·n` vanish on both circles.
#[derive(Debug, Clone, Copy)]
pub struct SwirlField {
    pub r0: f64,
    pub r1: f64,
    pub amplitude: f64,
}

impl SwirlField {
    /// ψ'(r), ψ''(r), ψ'''(r).
    fn radial(&self, r: f64) -> (f64, f64, f64) {
        let l3 = (self.r1 - self.r0).powi(3);
        let s = r - self.r0;
        let t = self.r1 - r;
        // ψ = s² t², d/dr: s' = 1, t' = −1
        let d1 = 2.0 * s * t * t - 2.0 * s * s * t;
        let d2 = 2.0 * t * t - 8.0 * s * t + 2.0 * s * s;
        let d3 = -12.0 * t + 12.0 * s;
        (d1 / l3, d2 / l3, d3 / l3)
    }

    /// Gradient and Hessian of ψ.
    fn stream_derivatives(&self, x: Point) -> ([f64; 2], [[f64; 2]; 2], [[[f64; 2]; 2]; 2]) {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r < 1e-14 || r <= self.r0 || r >= self.r1 {
            return ([0.0; 2], [[0.0; 2]; 2], [[[0.0; 2]; 2]; 2]);
        }
        let (p1, p2, p3) = self.radial(r);
        let e = [x[0] / r, x[1] / r];
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let grad = [p1 * e[0], p1 * e[1]];
        let mut hess = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                hess[a][b] = p2 * e[a] * e[b] + p1 / r * (delta(a, b) - e[a] * e[b]);
            }
        }
        // third derivatives of a radial function
        let mut third = [[[0.0; 2]; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let eee = e[a] * e[b] * e[c];
                    let sym = delta(a, b) * e[c] + delta(a, c) * e[b] + delta(b, c) * e[a];
                    third[a][b][c] = p3 * eee + (p2 / r - p1 / (r * r)) * (sym - 3.0 * eee);
                }
            }
        }
        (grad, hess, third)
    }
}

impl VectorField for SwirlField {
    fn value(&self, x: Point) -> [f64; 2] {
        let (g, _, _) = self.stream_derivatives(x);
        [self.amplitude * g[1], -self.amplitude * g[0]]
    }
    fn gradient(&self, x: Point) -> [[f64; 2]; 2] {
        let (_, h, _) = self.stream_derivatives(x);
        let a = self.amplitude;
        [[a * h[1][0], a * h[1][1]], [-a * h[0][0], -a * h[0][1]]]
    }
    fn hessian(&self, x: Point) -> [[[f64; 2]; 2]; 2] {
        let (_, _, t) = self.stream_derivatives(x);
        let a = self.amplitude;
        let mut out = [[[0.0; 2]; 2]; 2];
        for j in 0..2 {
            for k in 0..2 {
                out[0][j][k] = a * t[1][j][k];
                out[1][j][k] = -a * t[0][j][k];
            }
        }
        out
    }
}

/// Constant vector field.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub [f64; 2]);

impl VectorField for ConstantField {
    fn value(&self, _: Point) -> [f64; 2] {
        self.0
    }
    fn gradient(&self, _: Point) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
    fn hessian(&self, _: Point) -> [[[f64; 2]; 2]; 2] {
        [[[0.0; 2]; 2]; 2]
    }
}

/// Linear field `u = A x`.
#[derive(Debug, Clone, Copy)]
pub struct LinearField(pub [[f64; 2]; 2]);

impl VectorField for LinearField {
    fn value(&self, x: Point) -> [f64; 2] {
        let a = &self.0;
        [
            a[0][0] * x[0] + a[0][1] * x[1],
            a[1][0] * x[0] + a[1][1] * x[1],
        ]
    }
    fn gradient(&self, _: Point) -> [[f64; 2]; 2] {
        self.0
    }
    fn hessian(&self, _: Point) -> [[[f64; 2]; 2]; 2] {
        [[[0.0; 2]; 2]; 2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivatives(f: &dyn VectorField, x: Point) {
        let h = 1e-5;
        let g = f.gradient(x);
        let hs = f.hessian(x);
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (vp, vm) = (f.value(xp), f.value(xm));
            let (gp, gm) = (f.gradient(xp), f.gradient(xm));
            for i in 0..2 {
                let fd = (vp[i] - vm[i]) / (2.0 * h);
                assert!(
                    (fd - g[i][k]).abs() < 1e-7,
                    "grad {i}{k}: {fd} vs {}",
                    g[i][k]
                );
                for j in 0..2 {
                    let fd2 = (gp[i][j] - gm[i][j]) / (2.0 * h);
                    assert!(
                        (fd2 - hs[i][k][j]).abs() < 1e-6,
                        "hess {i}{k}{j}: {fd2} vs {}",
                        hs[i][k][j]
                    );
                }
            }
        }
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let b = BumpField {
            center: [0.1, -0.05],
            radius: 0.5,
            amplitude: 0.7,
            direction: [0.8, 0.6],
        };
        check_derivatives(&b, [0.2, 0.1]);
        check_derivatives(&b, [-0.2, 0.15]);
        assert_eq!(b.value([0.9, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn swirl_is_divergence_free_and_vanishes_on_circles() {
        let s = SwirlField {
            r0: 1.0,
            r1: 2.0,
            amplitude: 1.0,
        };
        for x in [[1.3, 0.2], [-0.5, 1.4], [0.0, -1.7]] {
            check_derivatives(&s, x);
            let g = s.gradient(x);
            assert!((g[0][0] + g[1][1]).abs() < 1e-13);
        }
        for th in [0.0, 1.0, 2.5] {
            for r in [1.0, 2.0] {
                let v = s.value([r * f64::cos(th), r * f64::sin(th)]);
                assert!(v[0].abs() < 1e-14 && v[1].abs() < 1e-14);
            }
        }
    }
}
