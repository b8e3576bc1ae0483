//! Adaptive Dormand–Prince 5(4) integrator with per-step output for dense
//! (cubic Hermite) interpolation.

use crate::error::{GbError, Result};

/// Tolerances and step bounds of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on accepted steps; keeps the cubic Hermite interpolant accurate.
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
    /// Relative Hamiltonian drift tolerated along a ray.
    pub hamiltonian_tol: f64,
    /// Asymmetry of M tolerated before it is re-symmetrized.
    pub symmetry_tol: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: 0.05,
            h_min: 1e-12,
            max_steps: 200_000,
            hamiltonian_tol: 1e-8,
            symmetry_tol: 1e-8,
        }
    }
}

/// Accepted steps: times, states and right-hand sides at those states.
#[derive(Debug, Clone, Default)]
pub struct StepHistory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates y' = rhs(t, y) from `t0` to `t_end`.
///
/// `after_step` may project the accepted state (it sees the state before the
/// derivative used for dense output is recomputed) and may reject the run.
pub fn integrate(
    mut rhs: impl FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    mut after_step: impl FnMut(f64, &mut [f64]) -> Result<()>,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    ctrl: &StepControl,
) -> Result<StepHistory> {
    if !(t_end > t0) {
        return Err(GbError::InvalidArgument(format!("t_end = {t_end} must exceed t0 = {t0}")));
    }
    let n = y0.len();
    let mut hist = StepHistory::default();
    let mut y = y0.to_vec();
    let mut f0 = vec![0.0; n];
    rhs(t0, &y, &mut f0)?;
    hist.times.push(t0);
    hist.states.push(y.clone());
    hist.rates.push(f0.clone());

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut t = t0;
    let mut h = ctrl.h_max.min((t_end - t0) / 16.0);
    let mut steps = 0usize;
    while t < t_end {
        steps += 1;
        if steps > ctrl.max_steps {
            return Err(GbError::IntegratorFailure {
                t,
                reason: format!("exceeded {} steps", ctrl.max_steps),
            });
        }
        let last = t + h >= t_end - 1e-14 * t_end.abs().max(1.0);
        if last {
            h = t_end - t;
        }
        k[0].copy_from_slice(&f0);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            if s == 6 {
                y_new.copy_from_slice(&tmp);
            }
            rhs(t + C[s] * h, &tmp, &mut k[s])?;
        }
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                e += E[s] * ks[i];
            }
            let scale = ctrl.atol + ctrl.rtol * y[i].abs().max(y_new[i].abs());
            err += (h * e / scale).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            if h < ctrl.h_min {
                return Err(GbError::IntegratorFailure {
                    t,
                    reason: "non-finite error estimate".into(),
                });
            }
            continue;
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&y_new);
            after_step(t, &mut y)?;
            rhs(t, &y, &mut f0)?;
            hist.times.push(t);
            hist.states.push(y.clone());
            hist.rates.push(f0.clone());
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(ctrl.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < ctrl.h_min {
                return Err(GbError::IntegratorFailure {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
        }
    }
    Ok(hist)
}

/// Cubic Hermite basis (h00, h10, h01, h11) at theta in [0, 1].
#[inline]
pub fn hermite_basis(theta: f64) -> [f64; 4] {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    [2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + theta, -2.0 * t3 + 3.0 * t2, t3 - t2]
}

/// Derivative of the Hermite basis with respect to theta.
#[inline]
pub fn hermite_basis_derivative(theta: f64) -> [f64; 4] {
    let t2 = theta * theta;
    [6.0 * t2 - 6.0 * theta, 3.0 * t2 - 4.0 * theta + 1.0, -6.0 * t2 + 6.0 * theta, 3.0 * t2 - 2.0 * theta]
}

/// Index `i` of the step interval [times[i], times[i+1]] containing `t`.
pub fn locate(times: &[f64], t: f64) -> usize {
    let n = times.len();
    if n < 2 || t <= times[0] {
        return 0;
    }
    if t >= times[n - 1] {
        return n - 2;
    }
    match times.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    }
}
