//! IMU preintegration and the 15-dimensional inertial factor.
//!
//! Residual layout: rotation, velocity, position, gyro-bias walk, accel-bias
//! walk. State tangent layout: rotation, position, velocity, gyro bias,
//! accel bias.

use nalgebra::{Matrix3, SMatrix, SVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::ImuState;
use crate::so3::{self, right_jacobian, right_jacobian_inv, skew};

pub const GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

type Matrix9 = SMatrix<f64, 9, 9>;
type Matrix15 = SMatrix<f64, 15, 15>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    /// Body angular rate, rad/s.
    pub gyro: Vector3<f64>,
    /// Specific force in the body frame, m/s^2.
    pub accel: Vector3<f64>,
}

/// Continuous-time noise densities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuNoise {
    /// rad/s/sqrt(Hz)
    pub gyro_white: f64,
    /// m/s^2/sqrt(Hz)
    pub accel_white: f64,
    /// rad/s^2/sqrt(Hz)
    pub gyro_walk: f64,
    /// m/s^3/sqrt(Hz)
    pub accel_walk: f64,
}

impl Default for ImuNoise {
    fn default() -> Self {
        Self {
            gyro_white: 1e-3,
            accel_white: 2e-2,
            gyro_walk: 1e-5,
            accel_walk: 3e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreintegratedImu {
    /// Rotation from the end body frame to the start body frame.
    pub dq: UnitQuaternion<f64>,
    pub dv: Vector3<f64>,
    pub dp: Vector3<f64>,
    pub dt: f64,
    pub bg0: Vector3<f64>,
    pub ba0: Vector3<f64>,
    pub j_r_bg: Matrix3<f64>,
    pub j_v_bg: Matrix3<f64>,
    pub j_v_ba: Matrix3<f64>,
    pub j_p_bg: Matrix3<f64>,
    pub j_p_ba: Matrix3<f64>,
    pub cov: Matrix15,
}

impl PreintegratedImu {
    /// Deltas corrected to first order for a new bias estimate.
    pub fn corrected(
        &self,
        bg: &Vector3<f64>,
        ba: &Vector3<f64>,
    ) -> (UnitQuaternion<f64>, Vector3<f64>, Vector3<f64>) {
        let dbg = bg - self.bg0;
        let dba = ba - self.ba0;
        (
            self.dq * so3::exp(&(self.j_r_bg * dbg)),
            self.dv + self.j_v_bg * dbg + self.j_v_ba * dba,
            self.dp + self.j_p_bg * dbg + self.j_p_ba * dba,
        )
    }

    /// Propagate `state` through the preintegrated motion (biases held).
    pub fn predict(&self, state: &ImuState, gravity: &Vector3<f64>) -> ImuState {
        let (dq, dv, dp) = self.corrected(&state.bg, &state.ba);
        let w_i = state.pose.rot.inverse();
        let dt = self.dt;
        let w_j = w_i * dq;
        let mut out = *state;
        out.pose = crate::geometry::Pose::new(
            w_j.inverse(),
            state.pose.pos + state.vel * dt + 0.5 * gravity * dt * dt + w_i * dp,
        );
        out.vel = state.vel + gravity * dt + w_i * dv;
        out
    }
}

/// Quadrature correction turning the trapezoid over step `k` into a
/// third-order rule: `-(h/12) * f''` estimated by second differences, centred
/// when both neighbours exist. Weights sum to zero, so constant offsets such as
/// biases cancel. Empty unless the neighbouring spacing matches `h`.
fn curvature_weights(samples: &[ImuSample], k: usize) -> Vec<(usize, f64)> {
    let n = samples.len();
    if n < 3 {
        return Vec::new();
    }
    let h = samples[k + 1].t - samples[k].t;
    let uniform = |i: usize| ((samples[i + 1].t - samples[i].t) - h).abs() <= 1e-9 * h;
    if k >= 1 && k + 2 < n && uniform(k - 1) && uniform(k + 1) {
        let c = h / 24.0;
        vec![(k - 1, -c), (k, c), (k + 1, c), (k + 2, -c)]
    } else {
        let j = if k + 2 < n { k } else { k - 1 };
        if !uniform(j) || !uniform(j + 1) {
            return Vec::new();
        }
        let c = h / 12.0;
        vec![(j, -c), (j + 1, 2.0 * c), (j + 2, -c)]
    }
}

/// Integrate consecutive samples: midpoint rotation with coning and
/// curvature corrections, curvature-corrected trapezoidal velocity, and a
/// position update exact for linearly varying acceleration. Panics on fewer
/// than two samples or non-increasing timestamps.
pub fn preintegrate(
    samples: &[ImuSample],
    bg: &Vector3<f64>,
    ba: &Vector3<f64>,
    noise: &ImuNoise,
) -> PreintegratedImu {
    assert!(samples.len() >= 2, "preintegration needs at least two samples");
    let n = samples.len();
    for pair in samples.windows(2) {
        assert!(pair[1].t > pair[0].t, "IMU timestamps must increase");
    }

    // Rotation pass: orientation and its gyro-bias Jacobian at every sample.
    let mut drs = Vec::with_capacity(n);
    let mut jrbg = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n - 1);
    let mut dq = UnitQuaternion::identity();
    drs.push(Matrix3::<f64>::identity());
    jrbg.push(Matrix3::<f64>::zeros());
    for k in 0..n - 1 {
        let (s0, s1) = (&samples[k], &samples[k + 1]);
        let h = s1.t - s0.t;
        let (w0, w1) = (s0.gyro - bg, s1.gyro - bg);
        let mut phi = 0.5 * (w0 + w1) * h + w0.cross(&w1) * (h * h / 12.0);
        for (i, c) in curvature_weights(samples, k) {
            phi += samples[i].gyro * c;
        }
        let dphi_dbg = -Matrix3::identity() * h + skew(&(w1 - w0)) * (h * h / 12.0);
        let step = so3::exp(&phi);
        let step_r = step.to_rotation_matrix().into_inner();
        let jr = right_jacobian(&phi);
        dq *= step;
        drs.push(drs[k] * step_r);
        jrbg.push(step_r.transpose() * jrbg[k] + jr * dphi_dbg);
        steps.push((h, step_r, jr));
    }

    // Body accelerations rotated into the start frame, with bias Jacobians.
    let acc: Vec<Vector3<f64>> = samples.iter().map(|s| s.accel - ba).collect();
    let g: Vec<Vector3<f64>> = (0..n).map(|i| drs[i] * acc[i]).collect();
    let g_bg: Vec<Matrix3<f64>> = (0..n).map(|i| -drs[i] * skew(&acc[i]) * jrbg[i]).collect();

    let mut dv = Vector3::zeros();
    let mut dp = Vector3::zeros();
    let mut j_v_bg = Matrix3::zeros();
    let mut j_v_ba = Matrix3::zeros();
    let mut j_p_bg = Matrix3::zeros();
    let mut j_p_ba = Matrix3::zeros();
    let mut cov9 = Matrix9::zeros();
    let mut total = 0.0;

    for k in 0..n - 1 {
        let (h, step_r, jr) = steps[k];
        let (dr, dr1) = (drs[k], drs[k + 1]);
        let (a0, a1) = (acc[k], acc[k + 1]);

        let mut dv_step = 0.5 * (g[k] + g[k + 1]) * h;
        let mut dv_bg = 0.5 * (g_bg[k] + g_bg[k + 1]) * h;
        let mut dv_ba = -0.5 * (dr + dr1) * h;
        for (i, c) in curvature_weights(samples, k) {
            dv_step += g[i] * c;
            dv_bg += g_bg[i] * c;
            dv_ba -= drs[i] * c;
        }
        let dp_step = (g[k] / 3.0 + g[k + 1] / 6.0) * (h * h);
        let dp_bg = (g_bg[k] / 3.0 + g_bg[k + 1] / 6.0) * (h * h);
        let dp_ba = -(dr / 3.0 + dr1 / 6.0) * (h * h);

        j_p_bg += j_v_bg * h + dp_bg;
        j_p_ba += j_v_ba * h + dp_ba;
        j_v_bg += dv_bg;
        j_v_ba += dv_ba;

        // error-state (rotation, velocity, position) covariance, first order
        // in the midpoint model
        let dacc_dba = -0.5 * (dr + dr1);
        let dpos_dba = -(dr / 3.0 + dr1 / 6.0);
        let mut a = Matrix9::identity();
        let dacc_dth0 = -0.5 * (dr * skew(&a0) + dr1 * skew(&a1) * step_r.transpose());
        let dpos_dth0 = -(dr * skew(&a0) / 3.0 + dr1 * skew(&a1) * step_r.transpose() / 6.0);
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(&step_r.transpose());
        a.fixed_view_mut::<3, 3>(3, 0).copy_from(&(dacc_dth0 * h));
        a.fixed_view_mut::<3, 3>(6, 0).copy_from(&(dpos_dth0 * h * h));
        a.fixed_view_mut::<3, 3>(6, 3).copy_from(&(Matrix3::identity() * h));
        let mut b = SMatrix::<f64, 9, 6>::zeros();
        let dacc_dng = 0.5 * dr1 * skew(&a1) * jr * h;
        b.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-jr * h));
        b.fixed_view_mut::<3, 3>(3, 0).copy_from(&(dacc_dng * h));
        b.fixed_view_mut::<3, 3>(6, 0).copy_from(&(dr1 * skew(&a1) * jr * (h * h * h / 6.0)));
        b.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-dacc_dba * h));
        b.fixed_view_mut::<3, 3>(6, 3).copy_from(&(-dpos_dba * h * h));
        let mut q = SMatrix::<f64, 6, 6>::zeros();
        let qg = noise.gyro_white * noise.gyro_white / h;
        let qa = noise.accel_white * noise.accel_white / h;
        for i in 0..3 {
            q[(i, i)] = qg;
            q[(i + 3, i + 3)] = qa;
        }
        cov9 = a * cov9 * a.transpose() + b * q * b.transpose();

        dp += dv * h + dp_step;
        dv += dv_step;
        total += h;
    }
    let j_r_bg = jrbg[n - 1];

    let mut cov = Matrix15::zeros();
    cov.fixed_view_mut::<9, 9>(0, 0).copy_from(&cov9);
    let wg = noise.gyro_walk * noise.gyro_walk * total;
    let wa = noise.accel_walk * noise.accel_walk * total;
    for i in 0..3 {
        cov[(9 + i, 9 + i)] = wg;
        cov[(12 + i, 12 + i)] = wa;
    }
    cov = 0.5 * (cov + cov.transpose());

    PreintegratedImu {
        dq: so3::canonical(dq),
        dv,
        dp,
        dt: total,
        bg0: *bg,
        ba0: *ba,
        j_r_bg,
        j_v_bg,
        j_v_ba,
        j_p_bg,
        j_p_ba,
        cov,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ImuEvaluation {
    pub residual: SVector<f64, 15>,
    pub j_i: Matrix15,
    pub j_j: Matrix15,
}

/// Inertial residual between consecutive states with first-order bias
/// correction of the preintegrated deltas.
pub fn imu_factor(
    si: &ImuState,
    sj: &ImuState,
    pre: &PreintegratedImu,
    gravity: &Vector3<f64>,
) -> ImuEvaluation {
    let dt = pre.dt;
    let ri = si.pose.rotation();
    let rj = sj.pose.rotation();
    let dbg = si.bg - pre.bg0;
    let (dq_c, dv_c, dp_c) = pre.corrected(&si.bg, &si.ba);

    let err = dq_c.inverse() * si.pose.rot * sj.pose.rot.inverse();
    let r_rot = so3::log(&err);
    let u = sj.vel - si.vel - gravity * dt;
    let w = sj.pose.pos - si.pose.pos - si.vel * dt - 0.5 * gravity * dt * dt;
    let r_vel = ri * u - dv_c;
    let r_pos = ri * w - dp_c;
    let r_bg = sj.bg - si.bg;
    let r_ba = sj.ba - si.ba;

    let mut residual = SVector::<f64, 15>::zeros();
    residual.fixed_rows_mut::<3>(0).copy_from(&r_rot);
    residual.fixed_rows_mut::<3>(3).copy_from(&r_vel);
    residual.fixed_rows_mut::<3>(6).copy_from(&r_pos);
    residual.fixed_rows_mut::<3>(9).copy_from(&r_bg);
    residual.fixed_rows_mut::<3>(12).copy_from(&r_ba);

    let jr_inv = right_jacobian_inv(&r_rot);
    let err_m = err.to_rotation_matrix().into_inner();
    let eye = Matrix3::identity();

    // state tangent columns: 0 rot, 3 pos, 6 vel, 9 bg, 12 ba
    let mut j_i = Matrix15::zeros();
    j_i.fixed_view_mut::<3, 3>(0, 0).copy_from(&(jr_inv * rj));
    j_i.fixed_view_mut::<3, 3>(0, 9).copy_from(
        &(-jr_inv * err_m.transpose() * right_jacobian(&(pre.j_r_bg * dbg)) * pre.j_r_bg),
    );
    j_i.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-ri * skew(&u)));
    j_i.fixed_view_mut::<3, 3>(3, 6).copy_from(&(-ri));
    j_i.fixed_view_mut::<3, 3>(3, 9).copy_from(&(-pre.j_v_bg));
    j_i.fixed_view_mut::<3, 3>(3, 12).copy_from(&(-pre.j_v_ba));
    j_i.fixed_view_mut::<3, 3>(6, 0).copy_from(&(-ri * skew(&w)));
    j_i.fixed_view_mut::<3, 3>(6, 3).copy_from(&(-ri));
    j_i.fixed_view_mut::<3, 3>(6, 6).copy_from(&(-ri * dt));
    j_i.fixed_view_mut::<3, 3>(6, 9).copy_from(&(-pre.j_p_bg));
    j_i.fixed_view_mut::<3, 3>(6, 12).copy_from(&(-pre.j_p_ba));
    j_i.fixed_view_mut::<3, 3>(9, 9).copy_from(&(-eye));
    j_i.fixed_view_mut::<3, 3>(12, 12).copy_from(&(-eye));

    let mut j_j = Matrix15::zeros();
    j_j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-jr_inv * rj));
    j_j.fixed_view_mut::<3, 3>(3, 6).copy_from(&ri);
    j_j.fixed_view_mut::<3, 3>(6, 3).copy_from(&ri);
    j_j.fixed_view_mut::<3, 3>(9, 9).copy_from(&eye);
    j_j.fixed_view_mut::<3, 3>(12, 12).copy_from(&eye);

    ImuEvaluation { residual, j_i, j_j }
}
