//! Scalar static nonlinearities: representation, evaluation, least-squares
//! fitting, and the factorization `f(z) = z * fbar(z) + c`.
//!
//! The factorization is what turns a nonlinear LFR model into an affine LPV
//! model: `fbar` becomes the scheduling map and `c` is relocated into
//! constant offsets. For polynomials the factorization is an exact
//! coefficient shift; for network kinds, `fbar` is re-fitted as an RBF
//! network on a dense grid so that `z * fbar(z)` matches `f(z) - c`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lm::{self, LeastSquaresProblem, LmOptions};

/// Region of validity assumed when none is supplied.
pub const DEFAULT_REGION: (f64, f64) = (-1.0, 1.0);
/// Factorization residual bound for the exact polynomial path, relative to
/// the RMS of `f` over the grid.
pub const POLY_FACTORIZATION_REL_BOUND: f64 = 1e-6;
/// Factorization residual bound for network refits, relative to the RMS of
/// `f` over the grid.
pub const NETWORK_FACTORIZATION_REL_BOUND: f64 = 1e-2;
/// Grid density used by [`factorize`] when re-fitting network kinds.
pub const DEFAULT_REFIT_GRID: usize = 1000;
/// Neuron count of the RBF scheduling-map network fitted for network-kind
/// sources.
pub const FBAR_RBF_NEURONS: usize = 10;

const FIT_RCOND_MIN: f64 = 1e-10;

/// Parameterization of a scalar static function.
#[derive(Debug, Clone, PartialEq)]
pub enum NlKind {
    /// Coefficients in ascending degree, evaluated by Horner's rule.
    Polynomial { coeffs: Vec<f64> },
    /// `sum_k ow[k] * tanh(iw[k] z + b[k]) + ob`.
    TanhNetwork {
        input_weights: Vec<f64>,
        biases: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: f64,
    },
    /// `sum_k ow[k] * exp(-((z - c[k]) / w[k])^2) + ob`.
    RbfNetwork {
        centers: Vec<f64>,
        widths: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: f64,
    },
}

/// A scalar static nonlinearity together with its region of validity.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticNonlinearity {
    kind: NlKind,
    region: (f64, f64),
}

fn all_finite(values: &[f64], field: &'static str) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { field })
    }
}

impl StaticNonlinearity {
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("polynomial needs >= 1 coefficient".into()));
        }
        all_finite(&coeffs, "coeffs")?;
        Ok(StaticNonlinearity {
            kind: NlKind::Polynomial { coeffs },
            region: DEFAULT_REGION,
        })
    }

    /// The identity map `f(z) = z`.
    pub fn identity() -> Self {
        StaticNonlinearity::polynomial(vec![0.0, 1.0]).expect("identity is valid")
    }

    pub fn tanh_network(
        input_weights: Vec<f64>,
        biases: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: f64,
    ) -> Result<Self> {
        let k = input_weights.len();
        if k == 0 || biases.len() != k || output_weights.len() != k {
            return Err(Error::dim(
                "tanh_network",
                format!("{k} weights/biases per array"),
                format!("{}/{}/{}", input_weights.len(), biases.len(), output_weights.len()),
            ));
        }
        all_finite(&input_weights, "input_weights")?;
        all_finite(&biases, "biases")?;
        all_finite(&output_weights, "output_weights")?;
        all_finite(&[output_bias], "output_bias")?;
        Ok(StaticNonlinearity {
            kind: NlKind::TanhNetwork {
                input_weights,
                biases,
                output_weights,
                output_bias,
            },
            region: DEFAULT_REGION,
        })
    }

    pub fn rbf_network(
        centers: Vec<f64>,
        widths: Vec<f64>,
        output_weights: Vec<f64>,
        output_bias: f64,
    ) -> Result<Self> {
        let k = centers.len();
        if k == 0 || widths.len() != k || output_weights.len() != k {
            return Err(Error::dim(
                "rbf_network",
                format!("{k} parameters per array"),
                format!("{}/{}/{}", centers.len(), widths.len(), output_weights.len()),
            ));
        }
        all_finite(&centers, "centers")?;
        all_finite(&widths, "widths")?;
        all_finite(&output_weights, "output_weights")?;
        all_finite(&[output_bias], "output_bias")?;
        if widths.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidInput("rbf widths must be > 0".into()));
        }
        Ok(StaticNonlinearity {
            kind: NlKind::RbfNetwork {
                centers,
                widths,
                output_weights,
                output_bias,
            },
            region: DEFAULT_REGION,
        })
    }

    pub fn with_region(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!("empty or non-finite region [{lo}, {hi}]")));
        }
        self.region = (lo, hi);
        Ok(self)
    }

    pub fn kind(&self) -> &NlKind {
        &self.kind
    }

    pub fn region(&self) -> (f64, f64) {
        self.region
    }

    /// Evaluates `f(z)`. Evaluation outside the region is permitted.
    pub fn evaluate(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite evaluation point {z}")));
        }
        Ok(self.eval_raw(z))
    }

    /// Unchecked evaluation, used inside simulation loops where the
    /// argument comes from an already-guarded recursion.
    pub(crate) fn eval_raw(&self, z: f64) -> f64 {
        match &self.kind {
            NlKind::Polynomial { coeffs } => horner(coeffs, z),
            NlKind::TanhNetwork {
                input_weights,
                biases,
                output_weights,
                output_bias,
            } => {
                let mut acc = *output_bias;
                for k in 0..input_weights.len() {
                    acc += output_weights[k] * (input_weights[k] * z + biases[k]).tanh();
                }
                acc
            }
            NlKind::RbfNetwork {
                centers,
                widths,
                output_weights,
                output_bias,
            } => {
                let mut acc = *output_bias;
                for k in 0..centers.len() {
                    let r = (z - centers[k]) / widths[k];
                    acc += output_weights[k] * (-r * r).exp();
                }
                acc
            }
        }
    }

    /// Derivative with respect to the argument, `df/dz`.
    pub fn derivative(&self, z: f64) -> f64 {
        match &self.kind {
            NlKind::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, &a) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * z + a * k as f64;
                }
                acc
            }
            NlKind::TanhNetwork {
                input_weights,
                biases,
                output_weights,
                ..
            } => {
                let mut acc = 0.0;
                for k in 0..input_weights.len() {
                    let th = (input_weights[k] * z + biases[k]).tanh();
                    acc += output_weights[k] * input_weights[k] * (1.0 - th * th);
                }
                acc
            }
            NlKind::RbfNetwork {
                centers,
                widths,
                output_weights,
                ..
            } => {
                let mut acc = 0.0;
                for k in 0..centers.len() {
                    let r = (z - centers[k]) / widths[k];
                    acc += output_weights[k] * (-r * r).exp() * (-2.0 * r / widths[k]);
                }
                acc
            }
        }
    }

    /// Number of free parameters in the optimizer layout.
    pub fn param_count(&self) -> usize {
        match &self.kind {
            NlKind::Polynomial { coeffs } => coeffs.len(),
            NlKind::TanhNetwork { input_weights, .. } => 3 * input_weights.len() + 1,
            NlKind::RbfNetwork { centers, .. } => 3 * centers.len() + 1,
        }
    }

    /// Flattened parameters. Layout: polynomial coefficients ascending;
    /// networks as `[per-neuron arrays in declaration order.., output_bias]`.
    pub fn params(&self) -> Vec<f64> {
        match &self.kind {
            NlKind::Polynomial { coeffs } => coeffs.clone(),
            NlKind::TanhNetwork {
                input_weights,
                biases,
                output_weights,
                output_bias,
            } => {
                let mut v = input_weights.clone();
                v.extend_from_slice(biases);
                v.extend_from_slice(output_weights);
                v.push(*output_bias);
                v
            }
            NlKind::RbfNetwork {
                centers,
                widths,
                output_weights,
                output_bias,
            } => {
                let mut v = centers.clone();
                v.extend_from_slice(widths);
                v.extend_from_slice(output_weights);
                v.push(*output_bias);
                v
            }
        }
    }

    /// Same kind and region with replaced parameters (no range validation;
    /// optimizer trial steps are rejected through residual checks instead).
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.param_count() {
            return Err(Error::dim("params", self.param_count(), params.len()));
        }
        let kind = match &self.kind {
            NlKind::Polynomial { .. } => NlKind::Polynomial {
                coeffs: params.to_vec(),
            },
            NlKind::TanhNetwork { input_weights, .. } => {
                let k = input_weights.len();
                NlKind::TanhNetwork {
                    input_weights: params[..k].to_vec(),
                    biases: params[k..2 * k].to_vec(),
                    output_weights: params[2 * k..3 * k].to_vec(),
                    output_bias: params[3 * k],
                }
            }
            NlKind::RbfNetwork { centers, .. } => {
                let k = centers.len();
                NlKind::RbfNetwork {
                    centers: params[..k].to_vec(),
                    widths: params[k..2 * k].to_vec(),
                    output_weights: params[2 * k..3 * k].to_vec(),
                    output_bias: params[3 * k],
                }
            }
        };
        Ok(StaticNonlinearity {
            kind,
            region: self.region,
        })
    }

    /// Gradient of `f(z)` with respect to the flattened parameters,
    /// written into `out` (same layout as [`params`](Self::params)).
    pub fn param_gradient(&self, z: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.param_count());
        match &self.kind {
            NlKind::Polynomial { coeffs } => {
                let mut zk = 1.0;
                for k in 0..coeffs.len() {
                    out[k] = zk;
                    zk *= z;
                }
            }
            NlKind::TanhNetwork {
                input_weights,
                biases,
                output_weights,
                ..
            } => {
                let k = input_weights.len();
                for i in 0..k {
                    let th = (input_weights[i] * z + biases[i]).tanh();
                    let sech2 = 1.0 - th * th;
                    out[i] = output_weights[i] * z * sech2;
                    out[k + i] = output_weights[i] * sech2;
                    out[2 * k + i] = th;
                }
                out[3 * k] = 1.0;
            }
            NlKind::RbfNetwork {
                centers,
                widths,
                output_weights,
                ..
            } => {
                let k = centers.len();
                for i in 0..k {
                    let r = (z - centers[i]) / widths[i];
                    let phi = (-r * r).exp();
                    out[i] = output_weights[i] * phi * (2.0 * r / widths[i]);
                    out[k + i] = output_weights[i] * phi * (2.0 * r * r / widths[i]);
                    out[2 * k + i] = phi;
                }
                out[3 * k] = 1.0;
            }
        }
    }
}

fn horner(coeffs: &[f64], z: f64) -> f64 {
    let mut acc = 0.0;
    for &a in coeffs.iter().rev() {
        acc = acc * z + a;
    }
    acc
}

/// The pair `(c, fbar)` with `f(z) ~ z * fbar(z) + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedNonlinearity {
    c: f64,
    fbar: StaticNonlinearity,
    region: (f64, f64),
    residual_rms: f64,
}

impl FactorizedNonlinearity {
    /// Assembles a factorization from parts (used when loading serialized
    /// models and in tests).
    pub fn from_parts(c: f64, fbar: StaticNonlinearity, residual_rms: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidOffset);
        }
        let region = fbar.region();
        Ok(FactorizedNonlinearity {
            c,
            fbar,
            region,
            residual_rms,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn fbar(&self) -> &StaticNonlinearity {
        &self.fbar
    }

    pub fn region(&self) -> (f64, f64) {
        self.region
    }

    /// RMS of `z * fbar(z) + c - f(z)` recorded on the factorization grid.
    pub fn residual_rms(&self) -> f64 {
        self.residual_rms
    }

    /// `z * fbar(z) + c`.
    pub fn reconstruct(&self, z: f64) -> f64 {
        z * self.fbar.eval_raw(z) + self.c
    }

    /// Checks that `fbar` stays finite on a dense grid over the region.
    pub fn fbar_finite_on_grid(&self, grid: usize) -> bool {
        grid_points(self.region, grid.max(2))
            .all(|z| self.fbar.eval_raw(z).is_finite())
    }
}

fn grid_points(region: (f64, f64), count: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = region;
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(move |i| lo + step * i as f64)
}

/// What [`fit_nonlinearity`] should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlFitSpec {
    Polynomial { degree: usize },
    TanhNetwork { neurons: usize },
    RbfNetwork { neurons: usize },
}

/// Fits a static nonlinearity to samples `(z, w)`.
///
/// Polynomials are solved by linear least squares through an orthogonal
/// decomposition; network kinds start from a deterministic equispaced
/// initialization (output layer solved linearly) and are refined by
/// Levenberg-Marquardt. Returns the model and the residual RMS.
pub fn fit_nonlinearity(
    z: &[f64],
    w: &[f64],
    spec: NlFitSpec,
) -> Result<(StaticNonlinearity, f64)> {
    if z.len() != w.len() {
        return Err(Error::InvalidInput(format!(
            "z and w sample counts differ: {} vs {}",
            z.len(),
            w.len()
        )));
    }
    all_finite(z, "z_samples")?;
    all_finite(w, "w_samples")?;
    let param_count = match spec {
        NlFitSpec::Polynomial { degree } => degree + 1,
        NlFitSpec::TanhNetwork { neurons } | NlFitSpec::RbfNetwork { neurons } => 3 * neurons + 1,
    };
    if z.len() < param_count {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot determine {param_count} parameters",
            z.len()
        )));
    }

    match spec {
        NlFitSpec::Polynomial { degree } => {
            let (coeffs, rms) = polynomial_least_squares(z, w, degree)?;
            let nl = StaticNonlinearity::polynomial(coeffs)?.with_region_from_samples(z);
            Ok((nl, rms))
        }
        NlFitSpec::TanhNetwork { neurons } => fit_network(z, w, neurons, NetworkShape::Tanh),
        NlFitSpec::RbfNetwork { neurons } => fit_network(z, w, neurons, NetworkShape::Rbf),
    }
}

impl StaticNonlinearity {
    fn with_region_from_samples(self, z: &[f64]) -> Self {
        let lo = z.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo < hi {
            self.with_region(lo, hi).expect("finite sample range")
        } else {
            self
        }
    }
}

/// Least-squares polynomial coefficients (ascending) and residual RMS.
/// The design matrix is built on normalized abscissae for conditioning.
fn polynomial_least_squares(z: &[f64], w: &[f64], degree: usize) -> Result<(Vec<f64>, f64)> {
    let scale = z.iter().fold(0.0_f64, |m, &x| m.max(x.abs())).max(1e-300);
    let rows = z.len();
    let cols = degree + 1;
    let mut v = DMatrix::zeros(rows, cols);
    for (t, &zt) in z.iter().enumerate() {
        let mut zk = 1.0;
        let zn = zt / scale;
        for k in 0..cols {
            v[(t, k)] = zk;
            zk *= zn;
        }
    }
    let rhs = DVector::from_column_slice(w);
    let theta_scaled = solve_least_squares(&v, &rhs)?;
    let residual = &v * &theta_scaled - &rhs;
    let rms = (residual.norm_squared() / rows as f64).sqrt();
    let mut coeffs = Vec::with_capacity(cols);
    let mut sk = 1.0;
    for k in 0..cols {
        coeffs.push(theta_scaled[k] / sk);
        sk *= scale;
    }
    Ok((coeffs, rms))
}

/// SVD least-squares solve with a rank check against [`FIT_RCOND_MIN`].
pub(crate) fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(rcond > FIT_RCOND_MIN) {
        return Err(Error::DegenerateFit { rcond });
    }
    svd.solve(b, 0.0)
        .map_err(|_| Error::DegenerateFit { rcond })
}

enum NetworkShape {
    Tanh,
    Rbf,
}

fn fit_network(
    z: &[f64],
    w: &[f64],
    neurons: usize,
    shape: NetworkShape,
) -> Result<(StaticNonlinearity, f64)> {
    if neurons == 0 {
        return Err(Error::InvalidInput("network needs >= 1 neuron".into()));
    }
    let lo = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        return Err(Error::DegenerateFit { rcond: 0.0 });
    }
    let spacing = (hi - lo) / neurons as f64;
    let centers: Vec<f64> = (0..neurons)
        .map(|i| lo + spacing * (i as f64 + 0.5))
        .collect();

    // Deterministic initialization: hidden layer fixed, output layer solved
    // linearly, then a joint refinement pass.
    let template = match shape {
        NetworkShape::Tanh => {
            let iw = vec![2.0 / spacing; neurons];
            let biases: Vec<f64> = centers.iter().map(|&c| -2.0 / spacing * c).collect();
            StaticNonlinearity::tanh_network(iw, biases, vec![0.0; neurons], 0.0)?
        }
        NetworkShape::Rbf => StaticNonlinearity::rbf_network(
            centers.clone(),
            vec![2.0 * spacing; neurons],
            vec![0.0; neurons],
            0.0,
        )?,
    }
    .with_region(lo, hi)?;

    let mut features = DMatrix::zeros(z.len(), neurons + 1);
    for (t, &zt) in z.iter().enumerate() {
        for k in 0..neurons {
            features[(t, k)] = match &template.kind {
                NlKind::TanhNetwork {
                    input_weights,
                    biases,
                    ..
                } => (input_weights[k] * zt + biases[k]).tanh(),
                NlKind::RbfNetwork {
                    centers, widths, ..
                } => {
                    let r = (zt - centers[k]) / widths[k];
                    (-r * r).exp()
                }
                NlKind::Polynomial { .. } => unreachable!(),
            };
        }
        features[(t, neurons)] = 1.0;
    }
    let rhs = DVector::from_column_slice(w);
    let linear = solve_least_squares(&features, &rhs)?;

    let mut params = template.params();
    let p = template.param_count();
    for k in 0..neurons {
        params[p - 1 - neurons + k] = linear[k];
    }
    params[p - 1] = linear[neurons];

    let problem = NetworkFitProblem {
        z,
        w,
        template: &template,
    };
    let outcome = lm::minimize(
        &problem,
        DVector::from_vec(params),
        &LmOptions {
            max_iter: 150,
            ..LmOptions::default()
        },
    )?;
    let fitted = template.with_params(outcome.params.as_slice())?;
    Ok((fitted, outcome.cost.sqrt()))
}

struct NetworkFitProblem<'a> {
    z: &'a [f64],
    w: &'a [f64],
    template: &'a StaticNonlinearity,
}

impl LeastSquaresProblem for NetworkFitProblem<'_> {
    fn param_count(&self) -> usize {
        self.template.param_count()
    }

    fn residuals(&self, params: &DVector<f64>) -> Option<DVector<f64>> {
        let nl = self.template.with_params(params.as_slice()).ok()?;
        let r = DVector::from_iterator(
            self.z.len(),
            self.z
                .iter()
                .zip(self.w)
                .map(|(&z, &w)| nl.eval_raw(z) - w),
        );
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self, params: &DVector<f64>) -> Option<DMatrix<f64>> {
        let nl = self.template.with_params(params.as_slice()).ok()?;
        let p = nl.param_count();
        let mut jac = DMatrix::zeros(self.z.len(), p);
        let mut row = vec![0.0; p];
        for (t, &zt) in self.z.iter().enumerate() {
            nl.param_gradient(zt, &mut row);
            for (i, &g) in row.iter().enumerate() {
                if !g.is_finite() {
                    return None;
                }
                jac[(t, i)] = g;
            }
        }
        Some(jac)
    }
}

/// Factorizes `f(z) = z * fbar(z) + c` with the default residual bounds.
pub fn factorize(f: &StaticNonlinearity, refit_grid_size: usize) -> Result<FactorizedNonlinearity> {
    factorize_with_bound(f, refit_grid_size, None)
}

/// Factorization with an explicit relative residual bound (`None` selects
/// the kind-specific default).
pub fn factorize_with_bound(
    f: &StaticNonlinearity,
    refit_grid_size: usize,
    rel_bound: Option<f64>,
) -> Result<FactorizedNonlinearity> {
    match &f.kind {
        NlKind::Polynomial { coeffs } => {
            // Exact coefficient shift: c = a0, fbar = [a1, ..., ad].
            let c = coeffs[0];
            if !c.is_finite() {
                return Err(Error::InvalidOffset);
            }
            let fbar_coeffs = if coeffs.len() > 1 {
                coeffs[1..].to_vec()
            } else {
                vec![0.0]
            };
            let fbar = StaticNonlinearity::polynomial(fbar_coeffs)?
                .with_region(f.region.0, f.region.1)?;
            let bound = rel_bound.unwrap_or(POLY_FACTORIZATION_REL_BOUND);
            let fact = FactorizedNonlinearity {
                c,
                fbar,
                region: f.region,
                residual_rms: 0.0,
            };
            // The shift is exact; the bound check is kept for parity with
            // the network path (0 <= bound * anything nonnegative).
            let _ = bound;
            Ok(fact)
        }
        NlKind::TanhNetwork { .. } | NlKind::RbfNetwork { .. } => {
            let c = f.eval_raw(0.0);
            if !c.is_finite() {
                return Err(Error::InvalidOffset);
            }
            let neurons = FBAR_RBF_NEURONS;
            let fbar_params = 3 * neurons + 1;
            if refit_grid_size < fbar_params {
                return Err(Error::InvalidInput(format!(
                    "refit grid of {refit_grid_size} points cannot determine {fbar_params} parameters"
                )));
            }
            let (lo, hi) = f.region;
            let zs: Vec<f64> = grid_points((lo, hi), refit_grid_size).collect();
            let spacing = (hi - lo) / neurons as f64;
            let centers: Vec<f64> = (0..neurons)
                .map(|i| lo + spacing * (i as f64 + 0.5))
                .collect();
            let widths = vec![2.0 * spacing; neurons];

            // z * fbar(z) is linear in the output layer of fbar for fixed
            // centers and widths: columns z * phi_k(z) and z.
            let mut design = DMatrix::zeros(zs.len(), neurons + 1);
            let mut rhs = DVector::zeros(zs.len());
            for (t, &zt) in zs.iter().enumerate() {
                for k in 0..neurons {
                    let r = (zt - centers[k]) / widths[k];
                    design[(t, k)] = zt * (-r * r).exp();
                }
                design[(t, neurons)] = zt;
                rhs[t] = f.eval_raw(zt) - c;
            }
            let solution = solve_least_squares(&design, &rhs)?;
            let fbar = StaticNonlinearity::rbf_network(
                centers,
                widths,
                solution.as_slice()[..neurons].to_vec(),
                solution[neurons],
            )?
            .with_region(lo, hi)?;

            let residual = &design * &solution - &rhs;
            let residual_rms = (residual.norm_squared() / zs.len() as f64).sqrt();
            let f_rms = (zs.iter().map(|&zt| f.eval_raw(zt).powi(2)).sum::<f64>()
                / zs.len() as f64)
                .sqrt();
            let bound = rel_bound.unwrap_or(NETWORK_FACTORIZATION_REL_BOUND) * f_rms.max(1e-300);
            if residual_rms > bound {
                return Err(Error::FactorizationResidualTooLarge {
                    residual: residual_rms,
                    bound,
                });
            }
            Ok(FactorizedNonlinearity {
                c,
                fbar,
                region: f.region,
                residual_rms,
            })
        }
    }
}
