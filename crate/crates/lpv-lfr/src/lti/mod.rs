//! Discrete-time LTI machinery: state-space models, transfer functions,
//! simulation, DC gain, canonical and minimal realization, frequency
//! response.
//!
//! All models are immutable after construction and all operations are pure
//! functions, so models can be shared read-only across threads.

mod minreal;
mod tf;

pub use tf::TransferFunction;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Reciprocal condition number of `(I - A)` below which the DC gain is
/// reported as singular (the model contains an integrator for practical
/// purposes and steady-state offsets are undefined).
pub const DC_GAIN_RCOND_MIN: f64 = 1e-12;

/// Default relative tolerance for [`StateSpaceModel::minimal_realization`].
/// Structural pole-zero cancellations sit many orders of magnitude above
/// this threshold.
pub const MINREAL_DEFAULT_TOL: f64 = 1e-8;

/// A discrete-time LTI state-space model
///
/// ```text
/// x(t+1) = A x(t) + B u(t)
/// y(t)   = C x(t) + D u(t)
/// ```
///
/// with named input and output channels. Multi-channel models are used to
/// carry the labeled `(u, w) -> (y, z)` core of a nonlinear LFR.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
}

fn check_finite(m: &DMatrix<f64>, field: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { field })
    }
}

impl StateSpaceModel {
    /// Builds a model from its four matrices, validating dimensional
    /// consistency and finiteness. Channels get default labels
    /// (`u`/`y` when single-channel, `u1..`/`y1..` otherwise).
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dim("A", "square", format!("{}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::dim("B", format!("{} rows", n), format!("{} rows", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::dim("C", format!("{} cols", n), format!("{} cols", c.ncols())));
        }
        let (p, m) = (c.nrows(), b.ncols());
        if d.nrows() != p || d.ncols() != m {
            return Err(Error::dim(
                "D",
                format!("{}x{}", p, m),
                format!("{}x{}", d.nrows(), d.ncols()),
            ));
        }
        check_finite(&a, "A")?;
        check_finite(&b, "B")?;
        check_finite(&c, "C")?;
        check_finite(&d, "D")?;

        let name = |prefix: &str, count: usize| -> Vec<String> {
            if count == 1 {
                vec![prefix.to_string()]
            } else {
                (1..=count).map(|i| format!("{prefix}{i}")).collect()
            }
        };
        Ok(StateSpaceModel {
            input_labels: name("u", m),
            output_labels: name("y", p),
            a,
            b,
            c,
            d,
        })
    }

    /// Replaces the channel labels.
    pub fn with_labels(mut self, inputs: &[&str], outputs: &[&str]) -> Result<Self> {
        if inputs.len() != self.n_inputs() {
            return Err(Error::dim("input_labels", self.n_inputs(), inputs.len()));
        }
        if outputs.len() != self.n_outputs() {
            return Err(Error::dim("output_labels", self.n_outputs(), outputs.len()));
        }
        self.input_labels = inputs.iter().map(|s| s.to_string()).collect();
        self.output_labels = outputs.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }
    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Runs the exact recursion `x(t+1) = A x + B u`, `y = C x + D u`.
    ///
    /// `u` holds one input vector per column; the returned matrix holds one
    /// output vector per column (same number of columns as `u`).
    pub fn simulate(&self, u: &DMatrix<f64>, x0: &DVector<f64>) -> Result<DMatrix<f64>> {
        if u.nrows() != self.n_inputs() {
            return Err(Error::dim("u", format!("{} rows", self.n_inputs()), format!("{} rows", u.nrows())));
        }
        if u.ncols() == 0 {
            return Err(Error::InvalidInput("input length must be >= 1".into()));
        }
        if x0.len() != self.n() {
            return Err(Error::dim("x0", self.n(), x0.len()));
        }
        if !u.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { field: "u" });
        }
        if !x0.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { field: "x0" });
        }

        let steps = u.ncols();
        let mut y = DMatrix::zeros(self.n_outputs(), steps);
        let mut x = x0.clone();
        let mut x_next = DVector::zeros(self.n());
        for t in 0..steps {
            let ut = u.column(t);
            let mut yt = y.column_mut(t);
            yt.gemv(1.0, &self.c, &x, 0.0);
            yt.gemv(1.0, &self.d, &ut, 1.0);
            x_next.gemv(1.0, &self.a, &x, 0.0);
            x_next.gemv(1.0, &self.b, &ut, 1.0);
            std::mem::swap(&mut x, &mut x_next);
        }
        Ok(y)
    }

    /// [`simulate`](Self::simulate) for single-input single-output models.
    pub fn simulate_siso(&self, u: &[f64], x0: &DVector<f64>) -> Result<Vec<f64>> {
        if self.n_inputs() != 1 || self.n_outputs() != 1 {
            return Err(Error::dim(
                "model",
                "1x1 channels",
                format!("{}x{}", self.n_outputs(), self.n_inputs()),
            ));
        }
        let u_mat = DMatrix::from_row_slice(1, u.len(), u);
        Ok(self.simulate(&u_mat, x0)?.row(0).iter().copied().collect())
    }

    /// Steady-state gain `D + C (I - A)^{-1} B`.
    ///
    /// Fails with [`Error::SingularDcGain`] when `(I - A)` is singular
    /// within [`DC_GAIN_RCOND_MIN`] (an integrator).
    pub fn dc_gain(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        if n == 0 {
            return Ok(self.d.clone());
        }
        let ima = DMatrix::identity(n, n) - &self.a;
        let sv = ima.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
        if !(rcond > DC_GAIN_RCOND_MIN) {
            return Err(Error::SingularDcGain { rcond });
        }
        let x = ima
            .lu()
            .solve(&self.b)
            .ok_or(Error::SingularDcGain { rcond })?;
        Ok(&self.d + &self.c * x)
    }

    /// Evaluates `C (zI - A)^{-1} B + D` at `z = exp(i 2 pi f)` for each
    /// normalized frequency `f` in `[0, 0.5]`.
    pub fn frequency_response(&self, freqs: &[f64]) -> Result<Vec<DMatrix<Complex<f64>>>> {
        for &f in freqs {
            if !(0.0..=0.5).contains(&f) || !f.is_finite() {
                return Err(Error::InvalidFrequency(f));
            }
        }
        let n = self.n();
        let to_c = |m: &DMatrix<f64>| m.map(|x| Complex::new(x, 0.0));
        let (ac, bc, cc, dc) = (to_c(&self.a), to_c(&self.b), to_c(&self.c), to_c(&self.d));
        let mut out = Vec::with_capacity(freqs.len());
        for &f in freqs {
            if n == 0 {
                out.push(dc.clone());
                continue;
            }
            let z = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * f);
            let zia = DMatrix::from_diagonal_element(n, n, z) - &ac;
            let x = zia.lu().solve(&bc).ok_or_else(|| {
                Error::Internal(format!("(zI - A) singular at normalized frequency {f}"))
            })?;
            out.push(&dc + &cc * x);
        }
        Ok(out)
    }

    /// First `count` Markov parameters `D, CB, CAB, CA^2B, ...`.
    pub fn markov_parameters(&self, count: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return out;
        }
        out.push(self.d.clone());
        let mut p = self.b.clone();
        for _ in 1..count {
            out.push(&self.c * &p);
            p = &self.a * p;
        }
        out
    }

    /// Largest eigenvalue magnitude of `A`.
    pub fn spectral_radius(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    /// Converts a SISO model to its transfer function in powers of the
    /// delay operator, via the Faddeev-LeVerrier recursion.
    pub fn to_transfer_function(&self) -> Result<TransferFunction> {
        if self.n_inputs() != 1 || self.n_outputs() != 1 {
            return Err(Error::dim(
                "model",
                "1x1 channels",
                format!("{}x{}", self.n_outputs(), self.n_inputs()),
            ));
        }
        let n = self.n();
        let d = self.d[(0, 0)];
        // den(z) = z^n + c1 z^{n-1} + ... + cn,
        // adj(zI - A) = sum_k M_{k+1} z^{n-1-k} with M_1 = I,
        // M_{k+1} = A M_k + c_k I.
        let mut m_k = DMatrix::<f64>::identity(n, n);
        let mut den = Vec::with_capacity(n + 1);
        den.push(1.0);
        let mut num = Vec::with_capacity(n + 1);
        num.push(d);
        for k in 1..=n {
            let e_k = (&self.c * &m_k * &self.b)[(0, 0)];
            let am = &self.a * m_k;
            let c_k = -am.trace() / k as f64;
            den.push(c_k);
            num.push(d * c_k + e_k);
            m_k = am + DMatrix::identity(n, n) * c_k;
        }
        // Descending powers of z over a monic denominator coincide with
        // ascending powers of the delay operator.
        TransferFunction::new(num, den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn eq10_tf() -> TransferFunction {
        TransferFunction::new(
            vec![0.0, 0.488, -0.110, 0.131, -0.079, 0.026],
            vec![0.994, -1.518, 0.929],
        )
        .unwrap()
    }

    pub(crate) fn random_stable_model(
        rng: &mut ChaCha8Rng,
        n: usize,
        m: usize,
        p: usize,
        radius: f64,
    ) -> StateSpaceModel {
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut model = StateSpaceModel::new(
            a.clone(),
            DMatrix::zeros(n, m),
            DMatrix::zeros(p, n),
            DMatrix::zeros(p, m),
        )
        .unwrap();
        let rho = model.spectral_radius();
        if rho > 0.0 {
            a *= radius / rho;
        }
        model = StateSpaceModel::new(
            a,
            DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(p, m, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        model
    }

    fn impulse(len: usize) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(1, len);
        u[(0, 0)] = 1.0;
        u
    }

    #[test]
    fn one_step_delay() {
        let model = StateSpaceModel::new(
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
        )
        .unwrap();
        let u = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let y = model.simulate(&u, &DVector::zeros(1)).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn static_pass_through() {
        let model = StateSpaceModel::new(
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let u = DMatrix::from_row_slice(1, 4, &[3.0, -1.0, 0.5, 7.0]);
        let y = model.simulate(&u, &DVector::zeros(1)).unwrap();
        assert_eq!(y, u);
    }

    #[test]
    fn impulse_of_two_mode_model_matches_geometric_sum() {
        let model = StateSpaceModel::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let y = model.simulate(&impulse(12), &DVector::zeros(2)).unwrap();
        assert_eq!(y[(0, 0)], 0.0);
        for t in 1..12 {
            let expected = 0.5_f64.powi(t as i32 - 1) + 0.25_f64.powi(t as i32 - 1);
            assert_relative_eq!(y[(0, t)], expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn simulate_rejects_bad_dimensions() {
        let model = StateSpaceModel::new(
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
        )
        .unwrap();
        let err = model
            .simulate(&DMatrix::zeros(2, 3), &DVector::zeros(1))
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { field: "u", .. }));
        let err = model
            .simulate(&DMatrix::zeros(1, 3), &DVector::zeros(2))
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { field: "x0", .. }));
    }

    #[test]
    fn dc_gain_of_unit_delay_is_one() {
        let model = TransferFunction::unit_delay().to_state_space();
        let g = model.dc_gain().unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn dc_gain_matches_coefficient_sums() {
        // Independent oracle: at z = 1 the transfer function evaluates to
        // the ratio of coefficient sums.
        let tf = eq10_tf();
        let num_sum: f64 = tf.num().iter().sum();
        let den_sum: f64 = tf.den().iter().sum();
        let g = tf.to_state_space().dc_gain().unwrap();
        assert_relative_eq!(g[(0, 0)], num_sum / den_sum, max_relative = 1e-12);
    }

    #[test]
    fn dc_gain_of_integrator_is_singular() {
        let model = StateSpaceModel::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
        )
        .unwrap();
        assert!(matches!(model.dc_gain(), Err(Error::SingularDcGain { .. })));
    }

    #[test]
    fn frequency_response_of_unit_delay() {
        let model = TransferFunction::unit_delay().to_state_space();
        let resp = model.frequency_response(&[0.0, 0.25]).unwrap();
        assert_relative_eq!(resp[0][(0, 0)].re, 1.0, max_relative = 1e-14);
        assert_relative_eq!(resp[0][(0, 0)].im, 0.0, epsilon = 1e-14);
        // One-sample delay at a quarter of the sampling rate lags 90 degrees.
        assert_relative_eq!(resp[1][(0, 0)].re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(resp[1][(0, 0)].im, -1.0, max_relative = 1e-14);
    }

    #[test]
    fn frequency_response_at_zero_equals_dc_gain() {
        let model = eq10_tf().to_state_space();
        let resp = model.frequency_response(&[0.0]).unwrap();
        let g = model.dc_gain().unwrap();
        assert_relative_eq!(resp[0][(0, 0)].re, g[(0, 0)], max_relative = 1e-12);
        assert_relative_eq!(resp[0][(0, 0)].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn frequency_response_rejects_out_of_band() {
        let model = TransferFunction::unit_delay().to_state_space();
        assert!(matches!(
            model.frequency_response(&[0.7]),
            Err(Error::InvalidFrequency(_))
        ));
    }

    #[test]
    fn simulation_is_linear_in_the_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let model = random_stable_model(&mut rng, 4, 2, 2, 0.9);
            let n_samples = 64;
            let u1 = DMatrix::from_fn(2, n_samples, |_, _| rng.random_range(-1.0..1.0));
            let u2 = DMatrix::from_fn(2, n_samples, |_, _| rng.random_range(-1.0..1.0));
            let (alpha, beta) = (1.7, -0.4);
            let x0 = DVector::zeros(4);
            let combo = model.simulate(&(&u1 * alpha + &u2 * beta), &x0).unwrap();
            let separate =
                model.simulate(&u1, &x0).unwrap() * alpha + model.simulate(&u2, &x0).unwrap() * beta;
            let scale = combo.norm().max(1e-12);
            assert!((combo - separate).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn dc_gain_equals_settled_constant_input_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let model = random_stable_model(&mut rng, 3, 1, 1, 0.8);
            let rho = model.spectral_radius();
            assert!(rho < 0.99);
            let horizon = (10.0 / (1.0 - rho)).ceil() as usize;
            let u = DMatrix::from_element(1, horizon, 1.0);
            let y = model.simulate(&u, &DVector::zeros(3)).unwrap();
            let g = model.dc_gain().unwrap()[(0, 0)];
            assert_relative_eq!(y[(0, horizon - 1)], g, max_relative = 1e-8);
        }
    }

    #[test]
    fn transfer_function_round_trip_preserves_markov_parameters() {
        let model = eq10_tf().to_state_space();
        let tf_back = model.to_transfer_function().unwrap();
        let markov = model.markov_parameters(30);
        let h = tf_back.impulse_response(30);
        for (k, m_k) in markov.iter().enumerate() {
            assert_relative_eq!(m_k[(0, 0)], h[k], epsilon = 1e-10);
        }
    }
}
