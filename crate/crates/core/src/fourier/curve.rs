use std::f64::consts::TAU;

use crate::map::wrap_unit;
use crate::{Error, Result};

/// Truncated Fourier series
/// `u(θ) = a₀ + Σ_{k=1..N} (a_k cos 2πkθ + b_k sin 2πkθ)`.
///
/// Coefficients are stored as `[a₀, a₁, b₁, …, a_N, b_N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierCurve {
    coeffs: Vec<f64>,
}

impl FourierCurve {
    pub fn constant(order: usize, value: f64) -> Self {
        let mut coeffs = vec![0.0; 2 * order + 1];
        coeffs[0] = value;
        FourierCurve { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::Domain(format!(
                "a Fourier curve needs 2N+1 coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(FourierCurve { coeffs })
    }

    /// Trigonometric interpolant of values on the nodes `j/(2N+1)`.
    pub fn from_node_values(values: &[f64]) -> Result<Self> {
        let m = values.len();
        if m % 2 == 0 {
            return Err(Error::Domain(format!("need an odd number of nodes, got {m}")));
        }
        let order = m / 2;
        let mut coeffs = vec![0.0; m];
        coeffs[0] = values.iter().sum::<f64>() / m as f64;
        for k in 1..=order {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, &v) in values.iter().enumerate() {
                // k*j reduced mod m keeps the angle exact
                let t = TAU * ((k * j) % m) as f64 / m as f64;
                let (s, c) = t.sin_cos();
                a += v * c;
                b += v * s;
            }
            coeffs[2 * k - 1] = 2.0 * a / m as f64;
            coeffs[2 * k] = 2.0 * b / m as f64;
        }
        Ok(FourierCurve { coeffs })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn a0(&self) -> f64 {
        self.coeffs[0]
    }

    /// Cosine coefficient `a_k`, `1 ≤ k ≤ N`.
    pub fn a(&self, k: usize) -> f64 {
        self.coeffs[2 * k - 1]
    }

    /// Sine coefficient `b_k`, `1 ≤ k ≤ N`.
    pub fn b(&self, k: usize) -> f64 {
        self.coeffs[2 * k]
    }

    /// Zero-pad or truncate to a new order.
    pub fn with_order(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(2 * order + 1, 0.0);
        FourierCurve { coeffs }
    }

    /// Collocation nodes `θⱼ = j/(2N+1)`.
    pub fn nodes(&self) -> Vec<f64> {
        let m = self.len();
        (0..m).map(|j| j as f64 / m as f64).collect()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_all(theta).0
    }

    pub fn eval_d1(&self, theta: f64) -> f64 {
        self.eval_all(theta).1
    }

    pub fn eval_d2(&self, theta: f64) -> f64 {
        self.eval_all(theta).2
    }

    /// `(u, u′, u″)` at `θ`, derivatives taken term by term.
    pub fn eval_all(&self, theta: f64) -> (f64, f64, f64) {
        let (s1, c1) = (TAU * wrap_unit(theta)).sin_cos();
        let (mut c, mut s) = (1.0, 0.0);
        let (mut u, mut d1, mut d2) = (self.coeffs[0], 0.0, 0.0);
        for k in 1..=self.order() {
            let nc = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = nc;
            let (a, b) = (self.a(k), self.b(k));
            let w = TAU * k as f64;
            u += a * c + b * s;
            d1 += w * (b * c - a * s);
            d2 -= w * w * (a * c + b * s);
        }
        (u, d1, d2)
    }

    /// `max(|a_N|, |b_N|)` relative to the largest coefficient magnitude.
    pub fn tail_ratio(&self) -> f64 {
        let n = self.order();
        if n == 0 {
            return 0.0;
        }
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        self.a(n).abs().max(self.b(n).abs()) / scale
    }

    /// `(sup |u′|, sup |u″|)` over `grid` uniform points.
    pub fn derivative_sup_norms(&self, grid: usize) -> (f64, f64) {
        (0..grid)
            .map(|j| {
                let (_, d1, d2) = self.eval_all(j as f64 / grid as f64);
                (d1.abs(), d2.abs())
            })
            .fold((0.0f64, 0.0f64), |(m1, m2), (a, b)| (m1.max(a), m2.max(b)))
    }

    /// Values on `m` uniform points `j/m`, via the rotation recurrence per
    /// frequency (O(m·N)).
    pub fn sample_uniform(&self, m: usize, offset: f64) -> Vec<f64> {
        let mut out = vec![self.coeffs[0]; m];
        for (j, o) in out.iter_mut().enumerate() {
            let theta = (j as f64 + offset) / m as f64;
            *o = self.eval(theta);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn eval_examples() {
        let c = FourierCurve::constant(4, 0.6);
        for t in [0.0, 0.3, 0.77] {
            assert_eq!(c.eval_all(t), (0.6, 0.0, 0.0));
        }
        let mut c = FourierCurve::constant(1, 0.0);
        c.coeffs_mut()[1] = 1.0;
        let (u, d1, d2) = c.eval_all(0.0);
        assert_eq!(u, 1.0);
        assert_eq!(d1, 0.0);
        assert!((d2 + 4.0 * PI * PI).abs() < 1e-12);

        let c = FourierCurve::from_coeffs(vec![0.0, 0.0, 1.0]).unwrap();
        assert!((c.eval(0.25) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_even_length() {
        assert!(FourierCurve::from_coeffs(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn tail_ratio_of_decaying_series() {
        let c = FourierCurve::from_coeffs(vec![1.0, 0.1, 0.0, 0.0, 0.001]).unwrap();
        assert!((c.tail_ratio() - 0.001).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn interpolates_own_nodes(coeffs in prop::collection::vec(-1.0..1.0f64, 9)) {
            let c = FourierCurve::from_coeffs(coeffs.clone()).unwrap();
            let vals: Vec<f64> = c.nodes().iter().map(|&t| c.eval(t)).collect();
            let back = FourierCurve::from_node_values(&vals).unwrap();
            for (a, b) in back.coeffs().iter().zip(&coeffs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn derivatives_match_fd(coeffs in prop::collection::vec(-1.0..1.0f64, 7), t in 0.0..1.0f64) {
            let c = FourierCurve::from_coeffs(coeffs).unwrap();
            let h = 1e-5;
            let fd1 = (c.eval(t + h) - c.eval(t - h)) / (2.0 * h);
            let fd2 = (c.eval_d1(t + h) - c.eval_d1(t - h)) / (2.0 * h);
            prop_assert!((c.eval_d1(t) - fd1).abs() < 1e-5 * (1.0 + fd1.abs()));
            prop_assert!((c.eval_d2(t) - fd2).abs() < 1e-4 * (1.0 + fd2.abs()));
        }
    }
}
