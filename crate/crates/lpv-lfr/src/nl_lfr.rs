//! The nonlinear LFR model class: a discrete-time LTI core with inputs
//! `(u, w)` and outputs `(y, z)` closed through a scalar static
//! nonlinearity `w(t) = f(z(t))`, plus an optional constant output offset.
//!
//! ```text
//! x(t+1) = A x(t) + B_u u(t) + B_w f(C_z x(t) + D_zu u(t))
//! y(t)   = C_y x(t) + D_yu u(t) + D_yw f(C_z x(t) + D_zu u(t)) + y_offset
//! ```
//!
//! The feedback path must carry at least a one-sample delay: `D_zw` is a
//! stored field asserted to be exactly zero, so the restriction is an
//! explicit, testable contract rather than an implicit one.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::lti::{StateSpaceModel, TransferFunction};
use crate::static_nl::StaticNonlinearity;

/// Any state magnitude beyond this aborts a simulation as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[inline]
pub(crate) fn row_dot(row: &RowDVector<f64>, col: &DVector<f64>) -> f64 {
    row.iter().zip(col.iter()).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearLfrModel {
    a: DMatrix<f64>,
    b_u: DVector<f64>,
    b_w: DVector<f64>,
    c_y: RowDVector<f64>,
    c_z: RowDVector<f64>,
    d_yu: f64,
    d_yw: f64,
    d_zu: f64,
    d_zw: f64,
    f: StaticNonlinearity,
    y_offset: f64,
}

/// Internal signals returned by [`NonlinearLfrModel::simulate`]: the output
/// `y`, the nonlinearity input `z` and the nonlinearity output `w`. The `z`
/// trajectory is what downstream scheduling-region estimation consumes.
#[derive(Debug, Clone)]
pub struct NlLfrTrajectory {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

/// Structural diagnostics reported by
/// [`NonlinearLfrModel::validate_structure`].
#[derive(Debug, Clone)]
pub struct StructureDiagnostics {
    pub d_zw_is_zero: bool,
    pub spectral_radius: f64,
    /// DC gains of the four core channels `(u->y, u->z, w->y, w->z)`;
    /// `None` when `(I - A)` is singular.
    pub dc_gains: Option<DcGains>,
    /// `G0_4 / G0_2`; `None` when undefined.
    pub u_offset_ratio: Option<f64>,
    /// `G0_3 - G0_1 * G0_4 / G0_2`; `None` when undefined.
    pub y_offset_gain: Option<f64>,
    /// Whether the offset relocation of a nonzero factorization constant is
    /// well defined for this model.
    pub offsets_defined: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct DcGains {
    /// u -> y
    pub g1: f64,
    /// u -> z
    pub g2: f64,
    /// w -> y
    pub g3: f64,
    /// w -> z
    pub g4: f64,
}

impl NonlinearLfrModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b_u: DVector<f64>,
        b_w: DVector<f64>,
        c_y: RowDVector<f64>,
        c_z: RowDVector<f64>,
        d_yu: f64,
        d_yw: f64,
        d_zu: f64,
        d_zw: f64,
        f: StaticNonlinearity,
        y_offset: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dim("A", "square", format!("{}x{}", a.nrows(), a.ncols())));
        }
        if b_u.len() != n {
            return Err(Error::dim("B_u", n, b_u.len()));
        }
        if b_w.len() != n {
            return Err(Error::dim("B_w", n, b_w.len()));
        }
        if c_y.len() != n {
            return Err(Error::dim("C_y", n, c_y.len()));
        }
        if c_z.len() != n {
            return Err(Error::dim("C_z", n, c_z.len()));
        }
        for (value, field) in [
            (d_yu, "D_yu"),
            (d_yw, "D_yw"),
            (d_zu, "D_zu"),
            (d_zw, "D_zw"),
            (y_offset, "y_offset"),
        ] {
            if !value.is_finite() {
                return Err(Error::NonFinite { field });
            }
        }
        if !a.iter().all(|x| x.is_finite())
            || !b_u.iter().all(|x| x.is_finite())
            || !b_w.iter().all(|x| x.is_finite())
            || !c_y.iter().all(|x| x.is_finite())
            || !c_z.iter().all(|x| x.is_finite())
        {
            return Err(Error::NonFinite { field: "core matrices" });
        }
        if d_zw != 0.0 {
            return Err(Error::AlgebraicLoop);
        }
        Ok(NonlinearLfrModel {
            a,
            b_u,
            b_w,
            c_y,
            c_z,
            d_yu,
            d_yw,
            d_zu,
            d_zw,
            f,
            y_offset,
        })
    }

    /// Realizes the four-block interconnection
    /// `y = G1 u + G3 w`, `z = G2 u + G4 w`, `w = f(z)`
    /// as one stacked state-space core.
    ///
    /// `G4` must have at least a one-sample delay (no direct term),
    /// otherwise closing the loop would create an algebraic equation in `w`.
    pub fn assemble_from_blocks(
        g1: &TransferFunction,
        g2: &TransferFunction,
        g3: &TransferFunction,
        g4: &TransferFunction,
        f: StaticNonlinearity,
    ) -> Result<Self> {
        if g4.min_delay() == 0 {
            return Err(Error::AlgebraicLoop);
        }
        let blocks: Vec<StateSpaceModel> =
            [g1, g2, g3, g4].iter().map(|g| g.to_state_space()).collect();
        let dims: Vec<usize> = blocks.iter().map(|b| b.n()).collect();
        let n: usize = dims.iter().sum();
        let offsets: Vec<usize> = dims
            .iter()
            .scan(0, |acc, &d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect();

        let mut a = DMatrix::zeros(n, n);
        for (i, block) in blocks.iter().enumerate() {
            a.view_mut((offsets[i], offsets[i]), (dims[i], dims[i]))
                .copy_from(block.a());
        }
        let mut b_u = DVector::zeros(n);
        let mut b_w = DVector::zeros(n);
        b_u.rows_mut(offsets[0], dims[0]).copy_from(&blocks[0].b().column(0));
        b_u.rows_mut(offsets[1], dims[1]).copy_from(&blocks[1].b().column(0));
        b_w.rows_mut(offsets[2], dims[2]).copy_from(&blocks[2].b().column(0));
        b_w.rows_mut(offsets[3], dims[3]).copy_from(&blocks[3].b().column(0));
        let mut c_y = RowDVector::zeros(n);
        let mut c_z = RowDVector::zeros(n);
        c_y.columns_mut(offsets[0], dims[0]).copy_from(&blocks[0].c().row(0));
        c_z.columns_mut(offsets[1], dims[1]).copy_from(&blocks[1].c().row(0));
        c_y.columns_mut(offsets[2], dims[2]).copy_from(&blocks[2].c().row(0));
        c_z.columns_mut(offsets[3], dims[3]).copy_from(&blocks[3].c().row(0));

        NonlinearLfrModel::new(
            a,
            b_u,
            b_w,
            c_y,
            c_z,
            blocks[0].d()[(0, 0)],
            blocks[2].d()[(0, 0)],
            blocks[1].d()[(0, 0)],
            blocks[3].d()[(0, 0)],
            f,
            0.0,
        )
    }

    /// Wiener-Hammerstein special case: `G1 = G4 = 0`, so
    /// `y(t) = G3[f(G2[u])](t)`.
    pub fn assemble_wiener_hammerstein(
        g2: &TransferFunction,
        g3: &TransferFunction,
        f: StaticNonlinearity,
    ) -> Result<Self> {
        Self::assemble_from_blocks(&TransferFunction::zero(), g2, g3, &TransferFunction::zero(), f)
    }

    /// Feedback special case `y = G(u - f(y0))` with all four blocks equal
    /// to `G`. The negative feedback sign is folded into the `w`-channel
    /// gains (blocks 3 and 4 are `-G`) so that `f` stays identical to the
    /// textbook feedback nonlinearity and `z(t)` equals the pre-offset
    /// output.
    pub fn assemble_silverbox(
        g: &TransferFunction,
        f: StaticNonlinearity,
        y_offset: f64,
    ) -> Result<Self> {
        let neg = g.negated();
        Self::assemble_from_blocks(g, g, &neg, &neg, f)?.with_y_offset(y_offset)
    }

    pub fn with_y_offset(mut self, y_offset: f64) -> Result<Self> {
        if !y_offset.is_finite() {
            return Err(Error::NonFinite { field: "y_offset" });
        }
        self.y_offset = y_offset;
        Ok(self)
    }

    pub fn with_nonlinearity(mut self, f: StaticNonlinearity) -> Self {
        self.f = f;
        self
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b_u(&self) -> &DVector<f64> {
        &self.b_u
    }
    pub fn b_w(&self) -> &DVector<f64> {
        &self.b_w
    }
    pub fn c_y(&self) -> &RowDVector<f64> {
        &self.c_y
    }
    pub fn c_z(&self) -> &RowDVector<f64> {
        &self.c_z
    }
    pub fn d_yu(&self) -> f64 {
        self.d_yu
    }
    pub fn d_yw(&self) -> f64 {
        self.d_yw
    }
    pub fn d_zu(&self) -> f64 {
        self.d_zu
    }
    pub fn d_zw(&self) -> f64 {
        self.d_zw
    }
    pub fn f(&self) -> &StaticNonlinearity {
        &self.f
    }
    pub fn y_offset(&self) -> f64 {
        self.y_offset
    }

    /// The open-loop LTI core as a labeled `(u, w) -> (y, z)` model.
    pub fn core(&self) -> StateSpaceModel {
        let n = self.n();
        let mut b = DMatrix::zeros(n, 2);
        b.column_mut(0).copy_from(&self.b_u);
        b.column_mut(1).copy_from(&self.b_w);
        let mut c = DMatrix::zeros(2, n);
        c.row_mut(0).copy_from(&self.c_y);
        c.row_mut(1).copy_from(&self.c_z);
        let d = DMatrix::from_row_slice(2, 2, &[self.d_yu, self.d_yw, self.d_zu, self.d_zw]);
        StateSpaceModel::new(self.a.clone(), b, c, d)
            .expect("core dimensions are consistent by construction")
            .with_labels(&["u", "w"], &["y", "z"])
            .expect("label counts match")
    }

    /// Rebuilds a model around a `(u, w) -> (y, z)` core.
    pub fn from_core(
        core: &StateSpaceModel,
        f: StaticNonlinearity,
        y_offset: f64,
    ) -> Result<Self> {
        if core.n_inputs() != 2 || core.n_outputs() != 2 {
            return Err(Error::dim(
                "core",
                "2x2 channels",
                format!("{}x{}", core.n_outputs(), core.n_inputs()),
            ));
        }
        NonlinearLfrModel::new(
            core.a().clone(),
            core.b().column(0).into_owned(),
            core.b().column(1).into_owned(),
            core.c().row(0).into_owned(),
            core.c().row(1).into_owned(),
            core.d()[(0, 0)],
            core.d()[(0, 1)],
            core.d()[(1, 0)],
            core.d()[(1, 1)],
            f,
            y_offset,
        )
    }

    /// Minimal realization of the LTI core at tolerance `tol`; the
    /// nonlinearity and output offset are carried over unchanged.
    pub fn reduced(&self, tol: f64) -> Result<Self> {
        let core = self.core().minimal_realization(tol)?;
        Self::from_core(&core, self.f.clone(), self.y_offset)
    }

    /// Exact recursion of the closed-loop model. Returns the full `y`, `z`
    /// and `w` trajectories.
    pub fn simulate(&self, u: &[f64], x0: &DVector<f64>) -> Result<NlLfrTrajectory> {
        let n = self.n();
        if x0.len() != n {
            return Err(Error::dim("x0", n, x0.len()));
        }
        if !u.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { field: "u" });
        }
        if !x0.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { field: "x0" });
        }

        let steps = u.len();
        let mut y = Vec::with_capacity(steps);
        let mut z_traj = Vec::with_capacity(steps);
        let mut w_traj = Vec::with_capacity(steps);
        let mut x = x0.clone();
        let mut x_next = DVector::zeros(n);
        for (t, &ut) in u.iter().enumerate() {
            let z = row_dot(&self.c_z, &x) + self.d_zu * ut;
            let w = self.f.eval_raw(z);
            if !z.is_finite() || !w.is_finite() {
                return Err(Error::DivergedSimulation { at: t });
            }
            let yt = row_dot(&self.c_y, &x) + self.d_yu * ut + self.d_yw * w + self.y_offset;
            y.push(yt);
            z_traj.push(z);
            w_traj.push(w);

            x_next.gemv(1.0, &self.a, &x, 0.0);
            x_next.axpy(ut, &self.b_u, 1.0);
            x_next.axpy(w, &self.b_w, 1.0);
            if x_next.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
                return Err(Error::DivergedSimulation { at: t });
            }
            std::mem::swap(&mut x, &mut x_next);
        }
        Ok(NlLfrTrajectory {
            y,
            z: z_traj,
            w: w_traj,
        })
    }

    /// Reports the structural facts the embedding relies on: `D_zw = 0`,
    /// stability margin, the four channel DC gains and the finiteness of
    /// the offset-relocation ratios.
    pub fn validate_structure(&self) -> StructureDiagnostics {
        let core = self.core();
        let dc = core.dc_gain().ok().map(|g| DcGains {
            g1: g[(0, 0)],
            g2: g[(1, 0)],
            g3: g[(0, 1)],
            g4: g[(1, 1)],
        });
        let (u_offset_ratio, y_offset_gain) = match &dc {
            Some(g) => {
                let scale = g.g1.abs().max(g.g3.abs()).max(g.g4.abs()).max(1.0);
                if g.g2.abs() > 1e-12 * scale {
                    let ratio = g.g4 / g.g2;
                    (Some(ratio), Some(g.g3 - g.g1 * ratio))
                } else {
                    (None, None)
                }
            }
            None => (None, None),
        };
        StructureDiagnostics {
            d_zw_is_zero: self.d_zw == 0.0,
            spectral_radius: core.spectral_radius(),
            dc_gains: dc,
            offsets_defined: u_offset_ratio.is_some(),
            u_offset_ratio,
            y_offset_gain,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::static_nl::tests::silverbox_polynomial;
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

    pub(crate) fn silverbox_model() -> NonlinearLfrModel {
        NonlinearLfrModel::assemble_silverbox(&eq10_tf(), silverbox_polynomial(), 0.0024).unwrap()
    }

    #[test]
    fn identity_loop_through_two_delays_is_a_two_sample_delay() {
        let model = NonlinearLfrModel::assemble_wiener_hammerstein(
            &TransferFunction::unit_delay(),
            &TransferFunction::unit_delay(),
            StaticNonlinearity::identity(),
        )
        .unwrap();
        let mut u = vec![0.0; 6];
        u[0] = 1.0;
        let traj = model.simulate(&u, &DVector::zeros(model.n())).unwrap();
        assert_eq!(traj.y, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_nonlinearity_reduces_to_the_lti_cascade() {
        let g2 = TransferFunction::new(vec![0.0, 1.0, 0.4], vec![1.0, -0.6]).unwrap();
        let g3 = TransferFunction::new(vec![0.0, 0.7], vec![1.0, -0.2, 0.05]).unwrap();
        let model = NonlinearLfrModel::assemble_wiener_hammerstein(
            &g2,
            &g3,
            StaticNonlinearity::identity(),
        )
        .unwrap();

        // Independent oracle: simulate the series transfer function.
        let cascade = g2.series(&g3);
        let u: Vec<f64> = (0..500).map(|t| ((t * 17 + 3) % 23) as f64 / 11.5 - 1.0).collect();
        let y_oracle = cascade.simulate(&u);
        let traj = model.simulate(&u, &DVector::zeros(model.n())).unwrap();
        let scale = y_oracle.iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
        for t in 0..u.len() {
            assert!((traj.y[t] - y_oracle[t]).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn four_copies_of_the_fifth_order_block_give_twenty_states() {
        let model = silverbox_model();
        assert_eq!(model.n(), 20);
    }

    #[test]
    fn direct_term_in_feedback_block_is_an_algebraic_loop() {
        let g4 = TransferFunction::new(vec![1.0, 0.5], vec![1.0, -0.3]).unwrap();
        let err = NonlinearLfrModel::assemble_from_blocks(
            &TransferFunction::zero(),
            &TransferFunction::unit_delay(),
            &TransferFunction::unit_delay(),
            &g4,
            StaticNonlinearity::identity(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::AlgebraicLoop));
    }

    #[test]
    fn wiener_hammerstein_diagnostics_have_zero_feedback_gain() {
        let model = NonlinearLfrModel::assemble_wiener_hammerstein(
            &TransferFunction::new(vec![0.0, 1.0], vec![1.0, -0.5]).unwrap(),
            &TransferFunction::new(vec![0.0, 2.0], vec![1.0, -0.25]).unwrap(),
            silverbox_polynomial(),
        )
        .unwrap();
        let diag = model.validate_structure();
        assert!(diag.d_zw_is_zero);
        let g = diag.dc_gains.unwrap();
        assert_eq!(g.g4, 0.0);
        assert_eq!(diag.u_offset_ratio, Some(0.0));
        assert!(diag.offsets_defined);
        // With G4 = 0 the output relocation gain collapses to G0_3.
        assert_eq!(diag.y_offset_gain, Some(g.g3));
    }

    #[test]
    fn zero_front_gain_flags_offsets_undefined() {
        // G2 = 0 makes G0_2 = 0: relocating a nonzero constant is undefined.
        let model = NonlinearLfrModel::assemble_from_blocks(
            &TransferFunction::new(vec![0.0, 1.0], vec![1.0, -0.5]).unwrap(),
            &TransferFunction::zero(),
            &TransferFunction::new(vec![0.0, 1.0], vec![1.0, -0.4]).unwrap(),
            &TransferFunction::new(vec![0.0, 0.3], vec![1.0, -0.2]).unwrap(),
            silverbox_polynomial(),
        )
        .unwrap();
        let diag = model.validate_structure();
        assert!(!diag.offsets_defined);
        assert_eq!(diag.u_offset_ratio, None);
    }

    #[test]
    fn silverbox_channel_dc_gains_are_pairwise_consistent() {
        let diag = silverbox_model().validate_structure();
        let g = diag.dc_gains.unwrap();
        assert_relative_eq!(g.g1, g.g2, max_relative = 1e-12);
        assert_relative_eq!(g.g3, g.g4, max_relative = 1e-12);
        assert_relative_eq!(g.g3, -g.g1, max_relative = 1e-12);
    }

    #[test]
    fn zero_nonlinearity_gives_the_pure_lti_response_plus_offset() {
        let g2 = TransferFunction::new(vec![0.0, 1.0], vec![1.0, -0.5]).unwrap();
        let g3 = TransferFunction::new(vec![0.0, 1.5], vec![1.0, -0.3]).unwrap();
        let model = NonlinearLfrModel::assemble_from_blocks(
            &g2,
            &g2,
            &g3,
            &TransferFunction::zero(),
            StaticNonlinearity::polynomial(vec![0.0]).unwrap(),
        )
        .unwrap()
        .with_y_offset(0.7)
        .unwrap();

        let u: Vec<f64> = (0..200).map(|t| (t as f64 * 0.37).sin()).collect();
        let traj = model.simulate(&u, &DVector::zeros(model.n())).unwrap();

        // u -> y path only (here G1 = g2).
        let y_lti = g2.simulate(&u);
        for t in 0..u.len() {
            assert_relative_eq!(traj.y[t], y_lti[t] + 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn w_equals_f_of_z_along_the_whole_trajectory() {
        let model = silverbox_model();
        let u: Vec<f64> = (0..300).map(|t| 0.03 * (t as f64 * 0.11).sin()).collect();
        let traj = model.simulate(&u, &DVector::zeros(model.n())).unwrap();
        for t in 0..u.len() {
            assert_eq!(traj.w[t], model.f().evaluate(traj.z[t]).unwrap());
        }
    }

    #[test]
    fn shifting_the_input_shifts_the_output() {
        let g2 = TransferFunction::new(vec![0.0, 0.8], vec![1.0, -0.5]).unwrap();
        let g3 = TransferFunction::new(vec![0.0, 0.6], vec![1.0, -0.4]).unwrap();
        let f = StaticNonlinearity::polynomial(vec![0.2, 1.0, 0.0, 0.15]).unwrap();
        let model = NonlinearLfrModel::assemble_wiener_hammerstein(&g2, &g3, f).unwrap();

        let settle = 200;
        let shift = 7;
        let burst: Vec<f64> = (0..300).map(|t| (t as f64 * 0.23).sin()).collect();
        let mut u1 = vec![0.0; settle];
        u1.extend_from_slice(&burst);
        let mut u2 = vec![0.0; settle + shift];
        u2.extend_from_slice(&burst);

        let x0 = DVector::zeros(model.n());
        let y1 = model.simulate(&u1, &x0).unwrap().y;
        let y2 = model.simulate(&u2, &x0).unwrap().y;
        let scale = y1.iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
        for t in 0..burst.len() {
            let a = y1[settle + t];
            let b = y2[settle + shift + t];
            assert!((a - b).abs() / scale < 1e-9, "sample {t}: {a} vs {b}");
        }
    }

    #[test]
    fn constant_input_settles_on_the_feedback_fixed_point() {
        let g = eq10_tf();
        let model =
            NonlinearLfrModel::assemble_silverbox(&g, silverbox_polynomial(), 0.0).unwrap();
        let u0 = 0.05;

        // Independent oracle: solve y0 = G0 (u0 - f(y0)) by Newton.
        let g0 = g.num().iter().sum::<f64>() / g.den().iter().sum::<f64>();
        let f = silverbox_polynomial();
        let mut y0 = 0.0_f64;
        for _ in 0..100 {
            let fy = f.evaluate(y0).unwrap();
            let dfy = f.derivative(y0);
            let g_val = g0 * (u0 - fy) - y0;
            let g_der = -g0 * dfy - 1.0;
            y0 -= g_val / g_der;
        }

        let steps = 6000;
        let traj = model
            .simulate(&vec![u0; steps], &DVector::zeros(model.n()))
            .unwrap();
        assert_relative_eq!(traj.y[steps - 1], y0, max_relative = 1e-8);
    }

    #[test]
    fn reduction_preserves_the_simulated_output() {
        let model = silverbox_model();
        let reduced = model.reduced(1e-8).unwrap();
        assert!(reduced.n() < model.n());

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u: Vec<f64> = (0..10_000).map(|_| 0.05 * rng.random_range(-1.0..1.0)).collect();
        let y_full = model.simulate(&u, &DVector::zeros(model.n())).unwrap().y;
        let y_red = reduced.simulate(&u, &DVector::zeros(reduced.n())).unwrap().y;
        let scale = y_full.iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
        for t in 0..u.len() {
            assert!(
                (y_full[t] - y_red[t]).abs() <= 1e-8 * scale.max(1.0),
                "sample {t}"
            );
        }
    }

    #[test]
    fn divergence_reports_the_failing_index() {
        // Unstable loop: strong positive feedback through the cubic.
        let g = TransferFunction::new(vec![0.0, 2.0], vec![1.0, -0.9]).unwrap();
        let f = StaticNonlinearity::polynomial(vec![0.0, 0.0, 0.0, 4.0]).unwrap();
        let model = NonlinearLfrModel::assemble_from_blocks(
            &TransferFunction::zero(),
            &g,
            &g,
            &g,
            f,
        )
        .unwrap();
        let u = vec![5.0; 500];
        match model.simulate(&u, &DVector::zeros(model.n())) {
            Err(Error::DivergedSimulation { at }) => assert!(at < 500),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
