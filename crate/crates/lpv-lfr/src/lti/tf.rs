//! SISO transfer functions in ascending powers of the delay operator.

use nalgebra::DMatrix;

use super::StateSpaceModel;
use crate::error::{Error, Result};

/// A rational transfer function `num(q^-1) / den(q^-1)` with coefficients
/// stored in ascending delay order, `den[0] != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TransferFunction {
    /// Validates coefficient lists: both non-empty and finite, `den[0] != 0`
    /// (otherwise the system is non-causal).
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidInput(
                "transfer function needs at least one coefficient on each side".into(),
            ));
        }
        if !num.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { field: "num" });
        }
        if !den.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { field: "den" });
        }
        if den[0] == 0.0 {
            return Err(Error::NonCausal);
        }
        Ok(TransferFunction { num, den })
    }

    /// The zero system.
    pub fn zero() -> Self {
        TransferFunction {
            num: vec![0.0],
            den: vec![1.0],
        }
    }

    /// `q^-1`.
    pub fn unit_delay() -> Self {
        TransferFunction {
            num: vec![0.0, 1.0],
            den: vec![1.0],
        }
    }

    /// A static gain.
    pub fn gain(k: f64) -> Self {
        TransferFunction {
            num: vec![k],
            den: vec![1.0],
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    /// Index of the first nonzero numerator coefficient (the pure delay);
    /// equals `num.len()` for the zero system.
    pub fn min_delay(&self) -> usize {
        self.num
            .iter()
            .position(|&x| x != 0.0)
            .unwrap_or(self.num.len())
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|&x| x == 0.0)
    }

    /// Realization order of the companion form.
    pub fn order(&self) -> usize {
        self.num.len().max(self.den.len()) - 1
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        TransferFunction {
            num: self.num.iter().map(|x| x * k).collect(),
            den: self.den.clone(),
        }
    }

    /// Series interconnection `self * other`.
    pub fn series(&self, other: &TransferFunction) -> Self {
        TransferFunction {
            num: poly_mul(&self.num, &other.num),
            den: poly_mul(&self.den, &other.den),
        }
    }

    /// Direct difference-equation simulation from zero initial conditions.
    pub fn simulate(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; u.len()];
        let d0 = self.den[0];
        for t in 0..u.len() {
            let mut acc = 0.0;
            for (j, &b) in self.num.iter().enumerate().take(t + 1) {
                acc += b * u[t - j];
            }
            for (i, &a) in self.den.iter().enumerate().skip(1).take(t) {
                acc -= a * y[t - i];
            }
            y[t] = acc / d0;
        }
        y
    }

    /// First `count` impulse-response coefficients (polynomial long
    /// division of `num` by `den`).
    pub fn impulse_response(&self, count: usize) -> Vec<f64> {
        let mut h = vec![0.0; count];
        let d0 = self.den[0];
        for k in 0..count {
            let mut acc = self.num.get(k).copied().unwrap_or(0.0);
            for (i, &a) in self.den.iter().enumerate().skip(1).take(k) {
                acc -= a * h[k - i];
            }
            h[k] = acc / d0;
        }
        h
    }

    /// Controllable-canonical state-space realization (companion form,
    /// delays first). `D = 0` exactly when `min_delay() >= 1`.
    pub fn to_state_space(&self) -> StateSpaceModel {
        let n = self.order();
        let d0 = self.den[0];
        let mut a_coef = vec![0.0; n];
        for (i, &a) in self.den.iter().enumerate().skip(1) {
            a_coef[i - 1] = a / d0;
        }
        let mut b_coef = vec![0.0; n + 1];
        for (i, &b) in self.num.iter().enumerate() {
            b_coef[i] = b / d0;
        }

        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            a[(0, j)] = -a_coef[j];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = DMatrix::zeros(n, 1);
        if n > 0 {
            b[(0, 0)] = 1.0;
        }
        let mut c = DMatrix::zeros(1, n);
        for j in 0..n {
            c[(0, j)] = b_coef[j + 1] - b_coef[0] * a_coef[j];
        }
        let d = DMatrix::from_element(1, 1, b_coef[0]);

        StateSpaceModel::new(a, b, c, d).expect("companion realization is always consistent")
    }
}

/// Polynomial product (convolution of coefficient lists).
pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn unit_delay_realization() {
        let ss = TransferFunction::unit_delay().to_state_space();
        assert_eq!(ss.n(), 1);
        assert_eq!(ss.a()[(0, 0)], 0.0);
        assert_eq!(ss.b()[(0, 0)], 1.0);
        assert_eq!(ss.c()[(0, 0)], 1.0);
        assert_eq!(ss.d()[(0, 0)], 0.0);
    }

    #[test]
    fn unity_gain_realization_is_stateless() {
        let ss = TransferFunction::new(vec![1.0], vec![1.0]).unwrap().to_state_space();
        assert_eq!(ss.n(), 0);
        assert_eq!(ss.d()[(0, 0)], 1.0);
        let y = ss.simulate_siso(&[2.0, -3.0], &DVector::zeros(0)).unwrap();
        assert_eq!(y, vec![2.0, -3.0]);
    }

    #[test]
    fn non_causal_denominator_is_rejected() {
        assert!(matches!(
            TransferFunction::new(vec![1.0], vec![0.0, 1.0]),
            Err(Error::NonCausal)
        ));
    }

    #[test]
    fn min_delay_flags() {
        let tf = super::super::tests::eq10_tf();
        assert_eq!(tf.min_delay(), 1);
        assert_eq!(TransferFunction::zero().min_delay(), 1);
        assert_eq!(TransferFunction::gain(2.0).min_delay(), 0);
        assert!(tf.to_state_space().d()[(0, 0)] == 0.0);
    }

    #[test]
    fn realization_matches_long_division() {
        // Independent oracle: long division of num/den computed inline.
        let tf = super::super::tests::eq10_tf();
        let terms = 50;
        let mut h = vec![0.0; terms];
        for k in 0..terms {
            let mut acc = tf.num().get(k).copied().unwrap_or(0.0);
            for i in 1..tf.den().len() {
                if i <= k {
                    acc -= tf.den()[i] * h[k - i];
                }
            }
            h[k] = acc / tf.den()[0];
        }

        let ss = tf.to_state_space();
        assert_eq!(ss.n(), 5);
        let markov = ss.markov_parameters(terms);
        for k in 0..terms {
            assert_relative_eq!(markov[k][(0, 0)], h[k], epsilon = 1e-12);
        }

        let mut u = vec![0.0; terms];
        u[0] = 1.0;
        let y = ss.simulate_siso(&u, &DVector::zeros(5)).unwrap();
        for k in 0..terms {
            assert_relative_eq!(y[k], h[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn state_space_matches_difference_equation_over_long_run() {
        let tf = super::super::tests::eq10_tf();
        let ss = tf.to_state_space();
        let u: Vec<f64> = (0..1000).map(|t| ((t * 37 + 11) % 101) as f64 / 50.5 - 1.0).collect();
        let y_tf = tf.simulate(&u);
        let y_ss = ss.simulate_siso(&u, &DVector::zeros(5)).unwrap();
        let scale = y_tf.iter().map(|x| x.abs()).fold(1e-12, f64::max);
        for t in 0..u.len() {
            assert!((y_tf[t] - y_ss[t]).abs() / scale < 1e-12, "sample {t}");
        }
    }

    #[test]
    fn series_of_two_delays_is_two_sample_delay() {
        let two = TransferFunction::unit_delay().series(&TransferFunction::unit_delay());
        assert_eq!(two.impulse_response(4), vec![0.0, 0.0, 1.0, 0.0]);
    }
}
