//! Time integration, decay-rate fits, and the quadratic cost.
//!
//! The stepper is Crank-Nicolson: A-stable (the assembled systems are
//! stiff: stiffness-to-mass ratios grow like `n^2`), second order, and it
//! needs a single LU factorization per run because the system matrix is
//! constant in time.

use crate::galerkin::GalerkinSystem;
use crate::{scalar, Error, Result, Scalar};
use nalgebra::{DMatrix, DVector};

/// Densely sampled solution of one linear time-invariant run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord<T: Scalar> {
    /// Uniform time grid including `t = 0`.
    pub times: Vec<T>,
    /// Coefficient vector per grid point.
    pub states: Vec<DVector<T>>,
    /// L2 norm of the temperature component per grid point.
    pub y_norm: Vec<T>,
    /// Full state-space norm per grid point.
    pub x_norm: Vec<T>,
    /// Control vector per grid point (zeros for open-loop runs).
    pub controls: Vec<DVector<T>>,
}

/// Integrates `c' = (A + B K) c` (open loop when `gain` is `None`).
pub fn integrate<T: Scalar>(
    system: &GalerkinSystem<T>,
    gain: Option<&DMatrix<T>>,
    c0: &DVector<T>,
    horizon: T,
    dt: T,
) -> Result<TrajectoryRecord<T>> {
    integrate_shifted(system, gain, c0, horizon, dt, T::zero())
}

/// Integrates the shifted dynamics `c' = (A + shift*I + B K) c`.
///
/// The shift matters for cost checks: the LQR synthesis optimizes the
/// shifted system, so its optimal-cost identity holds along shifted
/// closed-loop trajectories.
pub fn integrate_shifted<T: Scalar>(
    system: &GalerkinSystem<T>,
    gain: Option<&DMatrix<T>>,
    c0: &DVector<T>,
    horizon: T,
    dt: T,
    shift: T,
) -> Result<TrajectoryRecord<T>> {
    if !(dt > T::zero()) || !(horizon >= dt) {
        return Err(Error::InvalidConstant("need dt > 0 and horizon >= dt".into()));
    }
    let sd = system.state_dim();
    if c0.len() != sd {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, system expects {sd}",
            c0.len()
        )));
    }
    let m = system.input_count();
    if let Some(k) = gain {
        if k.nrows() != m || k.ncols() != sd {
            return Err(Error::DimensionMismatch(format!(
                "gain is {}x{}, system expects {m}x{sd}",
                k.nrows(),
                k.ncols()
            )));
        }
    }
    let mut f = system.a_mat.clone();
    for i in 0..sd {
        f[(i, i)] += shift;
    }
    if let Some(k) = gain {
        f += &system.b_mat * k;
    }
    let steps = (horizon / dt).round().to_f64().unwrap_or(1.0).max(1.0) as usize;
    let half_dt = dt * scalar::<T>(0.5);
    let eye = DMatrix::<T>::identity(sd, sd);
    let lhs = &eye - &f * half_dt;
    let rhs = &eye + &f * half_dt;
    let lu = lhs.lu();
    if !lu.is_invertible() {
        return Err(Error::SingularMatrix(
            "trapezoidal step matrix is singular for this dt".into(),
        ));
    }

    let d = system.dim();
    let mut record = TrajectoryRecord {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        y_norm: Vec::with_capacity(steps + 1),
        x_norm: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps + 1),
    };
    let mut push = |t: T, c: &DVector<T>| {
        let y = c.rows(0, d);
        let y_quad = (y.transpose() * &system.m_mat * y)[(0, 0)].max(T::zero());
        let x_quad = (c.transpose() * &system.g_mat * c)[(0, 0)].max(T::zero());
        let u = match gain {
            Some(k) => k * c,
            None => DVector::zeros(m),
        };
        record.times.push(t);
        record.y_norm.push(y_quad.sqrt());
        record.x_norm.push(x_quad.sqrt());
        record.controls.push(u);
        record.states.push(c.clone());
    };
    let mut c = c0.clone();
    push(T::zero(), &c);
    for k in 1..=steps {
        let v = &rhs * &c;
        c = lu
            .solve(&v)
            .ok_or_else(|| Error::SingularMatrix("trapezoidal solve failed".into()))?;
        push(scalar::<T>(k as f64) * dt, &c);
    }
    Ok(record)
}

/// Fitted exponential decay rate of `x_norm`: the sign-flipped least-squares
/// slope of `ln x_norm(t)` over `window` (default `[0.2 T, 0.8 T]`).
pub fn decay_rate<T: Scalar>(record: &TrajectoryRecord<T>, window: Option<(T, T)>) -> Result<T> {
    let t_end = *record.times.last().ok_or(Error::DegenerateWindow(0.0, 0.0))?;
    let (t1, t2) = window.unwrap_or((scalar::<T>(0.2) * t_end, scalar::<T>(0.8) * t_end));
    let as_f64 = |v: T| v.to_f64().unwrap_or(f64::NAN);
    if !(t1 < t2) {
        return Err(Error::DegenerateWindow(as_f64(t1), as_f64(t2)));
    }
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (t, x) in record.times.iter().zip(record.x_norm.iter()) {
        if *t >= t1 && *t <= t2 && *x > T::zero() {
            ts.push(*t);
            logs.push(x.ln());
        }
    }
    if ts.len() < 2 {
        return Err(Error::DegenerateWindow(as_f64(t1), as_f64(t2)));
    }
    let nf = scalar::<T>(ts.len() as f64);
    let mean_t = ts.iter().fold(T::zero(), |a, b| a + *b) / nf;
    let mean_l = logs.iter().fold(T::zero(), |a, b| a + *b) / nf;
    let mut num = T::zero();
    let mut den = T::zero();
    for (t, l) in ts.iter().zip(logs.iter()) {
        num += (*t - mean_t) * (*l - mean_l);
        den += (*t - mean_t) * (*t - mean_t);
    }
    if den == T::zero() {
        return Err(Error::DegenerateWindow(as_f64(t1), as_f64(t2)));
    }
    Ok(-(num / den))
}

/// Quadratic cost `integral of q * c'Gc + u'Ru` by the trapezoidal rule
/// over the record's time grid.
pub fn cost_functional<T: Scalar>(
    record: &TrajectoryRecord<T>,
    q_weight: T,
    r_matrix: &DMatrix<T>,
    g_mat: &DMatrix<T>,
) -> Result<T> {
    if record.times.len() != record.states.len() || record.times.len() != record.controls.len() {
        return Err(Error::DimensionMismatch("trajectory record is ragged".into()));
    }
    let mut integrand = Vec::with_capacity(record.times.len());
    for (c, u) in record.states.iter().zip(record.controls.iter()) {
        if c.len() != g_mat.nrows() || u.len() != r_matrix.nrows() {
            return Err(Error::DimensionMismatch(
                "record dimensions do not match the cost weights".into(),
            ));
        }
        let state_term = q_weight * (c.transpose() * g_mat * c)[(0, 0)];
        let control_term = (u.transpose() * r_matrix * u)[(0, 0)];
        integrand.push(state_term + control_term);
    }
    let half = scalar::<T>(0.5);
    let mut acc = T::zero();
    for k in 1..record.times.len() {
        acc += (record.times[k] - record.times[k - 1]) * (integrand[k] + integrand[k - 1]) * half;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{assemble_system, Basis};
    use crate::model::{BoxRegion, InputShape, ModelParams};
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    /// Minimal hand-built system: identity Gram, chosen A and B; the basis
    /// tag is nominal (integration never touches basis functions).
    fn synthetic(a: DMatrix<f64>, b: DMatrix<f64>, r: DMatrix<f64>) -> GalerkinSystem<f64> {
        let sd = a.nrows();
        let d = sd / 2;
        GalerkinSystem {
            basis: Basis::Sine2D { n: 1 },
            m_mat: DMatrix::identity(d, d),
            s_mat: DMatrix::identity(d, d),
            a_mat: a,
            b_mat: b,
            g_mat: DMatrix::identity(sd, sd),
            q_weight: 1.0,
            r_matrix: r,
            omega: 1.0,
        }
    }

    #[test]
    fn exponential_decay_to_second_order() {
        let system = synthetic(
            -DMatrix::<f64>::identity(2, 2),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(0, 0),
        );
        let c0 = DVector::from_vec(vec![1.0, 1.0]);
        let rec = integrate(&system, None, &c0, 1.0, 1e-3).unwrap();
        let exact = (-1.0f64).exp() * 2.0f64.sqrt();
        assert_relative_eq!(*rec.x_norm.last().unwrap(), exact, max_relative = 1e-6);
        assert_eq!(rec.times.len(), 1001);
        assert_eq!(rec.controls[0].len(), 0);
    }

    #[test]
    fn step_halving_quarters_the_error() {
        let system = synthetic(
            -DMatrix::<f64>::identity(2, 2),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(0, 0),
        );
        let c0 = DVector::from_vec(vec![1.0, 1.0]);
        let exact = (-1.0f64).exp() * 2.0f64.sqrt();
        let err = |dt: f64| {
            let rec = integrate(&system, None, &c0, 1.0, dt).unwrap();
            (rec.x_norm.last().unwrap() - exact).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((3.8..=4.2).contains(&ratio), "observed ratio {ratio}");
    }

    #[test]
    fn decay_rate_recovers_exact_exponential()
    {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
        let x_norm: Vec<f64> = times.iter().map(|t| (-2.0 * t).exp()).collect();
        let rec = TrajectoryRecord {
            times: times.clone(),
            states: vec![DVector::zeros(0); times.len()],
            y_norm: x_norm.clone(),
            x_norm,
            controls: vec![DVector::zeros(0); times.len()],
        };
        let rate = decay_rate(&rec, None).unwrap();
        assert_relative_eq!(rate, 2.0, epsilon = 1e-6);
        assert!(matches!(
            decay_rate(&rec, Some((1.0, 1.0))),
            Err(Error::DegenerateWindow(_, _))
        ));
    }

    #[test]
    fn zero_trajectory_has_zero_cost() {
        let system = synthetic(
            -DMatrix::<f64>::identity(2, 2),
            DMatrix::zeros(2, 0),
            DMatrix::zeros(0, 0),
        );
        let c0 = DVector::zeros(2);
        let rec = integrate(&system, None, &c0, 1.0, 0.01).unwrap();
        let j = cost_functional(&rec, 1.0, &system.r_matrix, &system.g_mat).unwrap();
        assert_eq!(j, 0.0);
    }

    #[test]
    fn scalar_lqr_cost_matches_the_riccati_value() {
        // First coordinate is the scalar plant a = b = q = r = 1 with its
        // optimal gain -(1 + sqrt(2)); the second coordinate stays zero.
        let p = 1.0 + 2.0f64.sqrt();
        let system = synthetic(
            dmatrix![1.0, 0.0; 0.0, -10.0],
            dmatrix![1.0; 0.0],
            dmatrix![1.0],
        );
        let gain = DMatrix::from_row_slice(1, 2, &[-p, 0.0]);
        let c0 = DVector::from_vec(vec![1.0, 0.0]);
        let rec = integrate(&system, Some(&gain), &c0, 12.0, 1e-3).unwrap();
        assert_relative_eq!(rec.controls[0][0], -p, max_relative = 1e-12);
        let j = cost_functional(&rec, 1.0, &system.r_matrix, &system.g_mat).unwrap();
        assert_relative_eq!(j, p, max_relative = 1e-2);
    }

    #[test]
    fn open_loop_norm_is_nonincreasing() {
        let params = ModelParams::new(0.01, 0.01, 1.0, 2.0, dmatrix![1.0]).unwrap();
        let shapes = vec![InputShape::single_box(BoxRegion::interval(0.1, 0.8), 10.0)];
        let system = assemble_system(Basis::hat1d(8).unwrap(), &params, &shapes).unwrap();
        let c0 = DVector::from_fn(system.state_dim(), |i, _| if i < 7 { 1.0 } else { 0.0 });
        let rec = integrate(&system, None, &c0, 2.0, 1e-2).unwrap();
        for w in rec.x_norm.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "norm grew: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn pathological_dt_is_reported() {
        // (I - dt/2 A) is singular when 2/dt is an eigenvalue of A.
        let system = synthetic(
            DMatrix::<f64>::identity(2, 2) * 4.0,
            DMatrix::zeros(2, 0),
            DMatrix::zeros(0, 0),
        );
        let c0 = DVector::from_vec(vec![1.0, 1.0]);
        let err = integrate(&system, None, &c0, 1.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix(_)));
    }

    #[test]
    fn shifted_integration_scales_the_decay() {
        let system = synthetic(
            -DMatrix::<f64>::identity(2, 2) * 3.0,
            DMatrix::zeros(2, 0),
            DMatrix::zeros(0, 0),
        );
        let c0 = DVector::from_vec(vec![1.0, 0.0]);
        // Shift +2 turns decay rate 3 into 1.
        let rec = integrate_shifted(&system, None, &c0, 5.0, 1e-3, 2.0).unwrap();
        let rate = decay_rate(&rec, None).unwrap();
        assert_relative_eq!(rate, 1.0, epsilon = 1e-6);
    }
}
