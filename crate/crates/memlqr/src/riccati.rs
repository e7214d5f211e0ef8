//! Dense algebraic Riccati solves and LQR gain extraction.
//!
//! All Riccati work happens in Gram-orthonormalized coordinates: with
//! `G = L L'` (Cholesky), the transformed state `c_hat = L' c` carries the
//! Euclidean inner product, operator adjoints become matrix transposes, and
//! the shifted equation
//!
//! ```text
//! A_hat' P + P A_hat - P B_hat R^{-1} B_hat' P + Q_hat = 0
//! ```
//!
//! is a standard dense CARE. It is solved with the matrix sign function of
//! the Hamiltonian (determinant-scaled Newton iteration, which needs only
//! LU solves), followed by at most one Newton-Kleinman refinement step when
//! the residual warrants it. The gain is mapped back to raw coefficient
//! coordinates as `K = -R^{-1} B_hat' P L'`.

use crate::analysis;
use crate::galerkin::{
    hat_eval, hat_eval_derivative, sine_index_pairs, Basis, GalerkinSystem,
};
use crate::model::ModeIndex;
use crate::quadrature::{gauss5, union_breakpoints};
use crate::{scalar, Error, Result, Scalar};
use nalgebra::{Cholesky, DMatrix, DVector, SVD};

/// Residual level at which a Riccati solution is accepted.
pub const RESIDUAL_ACCEPT: f64 = 1e-8;

/// Controls for the sign-function iteration.
#[derive(Clone, Copy, Debug)]
pub struct CareOptions {
    /// Relative change of the iterate that counts as converged.
    pub sign_tol: f64,
    /// Hard cap on sign iterations.
    pub max_iterations: usize,
    /// Residual above which one Newton-Kleinman step is attempted.
    pub polish_threshold: f64,
}

impl Default for CareOptions {
    fn default() -> Self {
        CareOptions { sign_tol: 1e-13, max_iterations: 100, polish_threshold: 1e-10 }
    }
}

/// Raw output of one CARE solve in orthonormalized coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CareCore<T: Scalar> {
    /// Symmetric positive-semidefinite solution.
    pub p_hat: DMatrix<T>,
    /// Frobenius residual relative to the Frobenius norm of the state cost.
    pub residual: T,
    /// Sign iterations consumed (refinement Lyapunov solves not counted).
    pub iterations: usize,
    /// Whether a Newton-Kleinman step ran and improved the residual.
    pub polished: bool,
}

/// Orthonormalized system data.
#[derive(Clone, Debug, PartialEq)]
pub struct Orthonormalized<T: Scalar> {
    /// `L' A L^{-T}`.
    pub a_hat: DMatrix<T>,
    /// `L' B`.
    pub b_hat: DMatrix<T>,
    /// State cost in hatted coordinates: `q_weight * I` (the transform is an
    /// isometry of the state space, so the weighted-identity cost persists).
    pub q_hat: DMatrix<T>,
    /// Lower-triangular Cholesky factor of the state Gram.
    pub l_factor: DMatrix<T>,
}

/// Feedback synthesis result for one assembled system.
#[derive(Clone, Debug, PartialEq)]
pub struct ARESolution<T: Scalar> {
    /// CARE solution in orthonormalized coordinates.
    pub p_hat: DMatrix<T>,
    /// `m x 2dim` gain acting on raw coefficient vectors.
    pub gain: DMatrix<T>,
    /// Relative Frobenius residual of the solved equation.
    pub residual: T,
    pub iterations: usize,
    pub polished: bool,
    /// Largest real part over the spectrum of `A + B K` (unshifted
    /// coefficient coordinates); below `-omega` by LQR construction.
    pub closed_loop_abscissa: T,
}

/// Riesz representers of the gain rows: row `i` of the gain equals
/// `c -> <alpha_i, y>_L2 + <beta_i, z>_H10` on the approximation space.
#[derive(Clone, Debug, PartialEq)]
pub struct GainRepresenters<T: Scalar> {
    pub basis: Basis,
    /// One L2 representer coefficient vector per input.
    pub alpha: Vec<DVector<T>>,
    /// One H1_0 representer coefficient vector per input.
    pub beta: Vec<DVector<T>>,
}

/// Transforms an assembled system into identity-Gram coordinates.
///
/// Contract: `<A c1, c2>_X = (L' c2)' A_hat (L' c1)` for all coefficient
/// vectors.
pub fn orthonormalize<T: Scalar>(system: &GalerkinSystem<T>) -> Result<Orthonormalized<T>> {
    let chol = Cholesky::new(system.g_mat.clone())
        .ok_or_else(|| Error::SingularMatrix("state Gram is not positive definite".into()))?;
    let l = chol.l();
    // A L^{-T} = Y  <=>  L Y' = A'.
    let yt = l
        .solve_lower_triangular(&system.a_mat.transpose())
        .ok_or_else(|| Error::SingularMatrix("Cholesky factor has a zero pivot".into()))?;
    let a_hat = l.transpose() * yt.transpose();
    let b_hat = l.transpose() * &system.b_mat;
    let sd = system.state_dim();
    let q_hat = DMatrix::<T>::identity(sd, sd) * system.q_weight;
    Ok(Orthonormalized { a_hat, b_hat, q_hat, l_factor: l })
}

/// Relative Frobenius residual `|A'P + PA - P B R^{-1} B' P + Q| / |Q|`.
pub fn care_residual<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    p: &DMatrix<T>,
) -> T {
    let g = control_term(b, r);
    let res = a.transpose() * p + p * a - p * &g * p + q;
    res.norm() / q.norm().max(scalar::<T>(f64::MIN_POSITIVE))
}

/// `B R^{-1} B'`, symmetrized; zero when there are no inputs.
fn control_term<T: Scalar>(b: &DMatrix<T>, r: &DMatrix<T>) -> DMatrix<T> {
    let n = b.nrows();
    if b.ncols() == 0 {
        return DMatrix::zeros(n, n);
    }
    let chol = Cholesky::new(r.clone()).expect("control weight must be positive definite");
    let x = chol.solve(&b.transpose());
    let g = b * x;
    (&g + g.transpose()) * scalar::<T>(0.5)
}

/// Projection of `m` onto Hamiltonian structure: `(m + J m' J) / 2` with
/// `J = [[0, I], [-I, 0]]`, evaluated blockwise.
fn hamiltonian_project<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows() / 2;
    let m11 = m.view((0, 0), (n, n));
    let m12 = m.view((0, n), (n, n));
    let m21 = m.view((n, 0), (n, n));
    let m22 = m.view((n, n), (n, n));
    let mut jmj = DMatrix::<T>::zeros(2 * n, 2 * n);
    jmj.view_mut((0, 0), (n, n)).copy_from(&(-m22.transpose()));
    jmj.view_mut((0, n), (n, n)).copy_from(&m12.transpose());
    jmj.view_mut((n, 0), (n, n)).copy_from(&m21.transpose());
    jmj.view_mut((n, n), (n, n)).copy_from(&(-m11.transpose()));
    (m + jmj) * scalar::<T>(0.5)
}

/// Matrix sign of the CARE Hamiltonian and extraction of the stabilizing
/// solution. `g` is the precomputed control term `B R^{-1} B'`.
fn sign_care<T: Scalar>(
    a: &DMatrix<T>,
    g: &DMatrix<T>,
    q: &DMatrix<T>,
    opts: &CareOptions,
) -> Result<(DMatrix<T>, usize)> {
    let n = a.nrows();
    let mut h = DMatrix::<T>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let sign_tol = scalar::<T>(opts.sign_tol);
    // Once the relative step is this small, a non-decreasing step means the
    // iteration has hit its rounding floor and further passes only churn.
    let stagnation_guard = scalar::<T>(1e-8);
    let mut z = h;
    let mut prev_rel = scalar::<T>(f64::INFINITY);
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let lu = z.clone().lu();
        // Determinant magnitude from the LU pivots, in log space so huge
        // dimension counts cannot overflow; a zero pivot means a Hamiltonian
        // eigenvalue sits on the imaginary axis and no stabilizing solution
        // exists.
        let mut log_det = T::zero();
        let mut min_pivot = scalar::<T>(f64::INFINITY);
        let u = lu.u();
        for i in 0..2 * n {
            let piv = u[(i, i)].abs();
            min_pivot = min_pivot.min(piv);
            if piv == T::zero() {
                return Err(Error::HamiltonianAxisEigenvalue { pivot: 0.0 });
            }
            log_det += piv.ln();
        }
        let c = (log_det / scalar::<T>((2 * n) as f64)).exp();
        if !(c.is_finite() && c > T::zero()) {
            return Err(Error::HamiltonianAxisEigenvalue {
                pivot: min_pivot.to_f64().unwrap_or(0.0),
            });
        }
        let z_inv = lu.try_inverse().ok_or(Error::HamiltonianAxisEigenvalue {
            pivot: min_pivot.to_f64().unwrap_or(0.0),
        })?;
        let z_new =
            hamiltonian_project(&((&z / c + z_inv * c) * scalar::<T>(0.5)));
        let rel = (&z_new - &z).norm() / z_new.norm().max(scalar::<T>(f64::MIN_POSITIVE));
        z = z_new;
        if rel <= sign_tol {
            converged = true;
            break;
        }
        if rel < stagnation_guard && rel >= prev_rel {
            converged = true;
            break;
        }
        prev_rel = rel;
    }
    if !converged {
        return Err(Error::NoConvergence {
            context: "matrix sign iteration".into(),
            iterations,
        });
    }

    // The stable invariant subspace is spanned by [I; P] and sign(H) acts
    // on it as -I, giving the overdetermined consistent system
    // [S12; S22 + I] P = -[S11 + I; S21].
    let eye = DMatrix::<T>::identity(n, n);
    let mut lhs = DMatrix::<T>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(z.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::<T>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(z.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-z.view((n, 0), (n, n))));
    let svd = SVD::new(lhs, true, true);
    let sigma_max = svd.singular_values.max();
    let eps = sigma_max * scalar::<T>(1e-13);
    let p = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::SingularMatrix(format!("sign-based extraction failed: {e}")))?;
    let p = (&p + p.transpose()) * scalar::<T>(0.5);
    Ok((p, iterations))
}

/// Solves `A'P + PA - P B R^{-1} B' P + Q = 0` for the stabilizing `P`.
///
/// Inputs are already in identity-Gram coordinates. A Newton-Kleinman step
/// (one Lyapunov solve on the closed loop) runs when the sign-function
/// residual exceeds `opts.polish_threshold` and is kept only if it helps.
pub fn solve_care<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    opts: &CareOptions,
) -> Result<CareCore<T>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch("CARE operands must share the state size".into()));
    }
    if r.nrows() != b.ncols() || r.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(
            "control weight must match the input count".into(),
        ));
    }
    let g = control_term(b, r);
    let (mut p, iterations) = sign_care(a, &g, q, opts)?;
    let mut residual = care_residual(a, b, q, r, &p);
    let mut polished = false;
    if residual.to_f64().unwrap_or(f64::INFINITY) > opts.polish_threshold {
        let f = a - &g * &p;
        let w = q + &p * &g * &p;
        let w = (&w + w.transpose()) * scalar::<T>(0.5);
        if let Ok((x, _)) = sign_care(&f, &DMatrix::zeros(n, n), &w, opts) {
            let candidate = care_residual(a, b, q, r, &x);
            if candidate < residual {
                p = x;
                residual = candidate;
                polished = true;
            }
        }
    }
    Ok(CareCore { p_hat: p, residual, iterations, polished })
}

/// Solves the Lyapunov equation `F'X + XF + W = 0` for stable `F` via the
/// sign function (the input-free case of the CARE machinery).
pub fn solve_lyapunov<T: Scalar>(
    f: &DMatrix<T>,
    w: &DMatrix<T>,
    opts: &CareOptions,
) -> Result<DMatrix<T>> {
    let n = f.nrows();
    if f.ncols() != n || w.nrows() != n || w.ncols() != n {
        return Err(Error::DimensionMismatch("Lyapunov operands must share the state size".into()));
    }
    let (x, _) = sign_care(f, &DMatrix::zeros(n, n), w, opts)?;
    Ok(x)
}

/// Full LQR synthesis for an assembled system: orthonormalize, shift by
/// `omega`, solve the CARE, map the gain back, and diagnose the closed loop.
///
/// Errors with `NoConvergence` if the final residual misses
/// [`RESIDUAL_ACCEPT`]; an accepted solution always `omega`-stabilizes the
/// (finite-dimensional) system it was computed from.
pub fn solve_are<T: Scalar>(system: &GalerkinSystem<T>) -> Result<ARESolution<T>> {
    let opts = CareOptions::default();
    let on = orthonormalize(system)?;
    let sd = system.state_dim();
    let a_omega = &on.a_hat + DMatrix::<T>::identity(sd, sd) * system.omega;
    let core = solve_care(&a_omega, &on.b_hat, &on.q_hat, &system.r_matrix, &opts)?;
    if core.residual.to_f64().unwrap_or(f64::INFINITY) > RESIDUAL_ACCEPT {
        return Err(Error::NoConvergence {
            context: format!(
                "Riccati residual {:.3e} above the acceptance level {RESIDUAL_ACCEPT:.0e}",
                core.residual.to_f64().unwrap_or(f64::NAN)
            ),
            iterations: core.iterations,
        });
    }
    // K = -R^{-1} B_hat' P L'.
    let r_chol = Cholesky::new(system.r_matrix.clone())
        .ok_or_else(|| Error::SingularMatrix("control weight is not positive definite".into()))?;
    let gain = -r_chol.solve(&(on.b_hat.transpose() * &core.p_hat * on.l_factor.transpose()));
    let closed = &system.a_mat + &system.b_mat * &gain;
    let closed_loop_abscissa = analysis::spectral_abscissa(&closed)?;
    Ok(ARESolution {
        p_hat: core.p_hat,
        gain,
        residual: core.residual,
        iterations: core.iterations,
        polished: core.polished,
        closed_loop_abscissa,
    })
}

/// Riesz representers of each gain row: `alpha_i` solves `M a = k_y'` and
/// `beta_i` solves `S b = k_z'`, making
/// `(K c)_i = <alpha_i, y>_L2 + <beta_i, z>_H10` exact on the space.
pub fn representers<T: Scalar>(
    solution: &ARESolution<T>,
    system: &GalerkinSystem<T>,
) -> Result<GainRepresenters<T>> {
    let d = system.dim();
    if solution.gain.ncols() != 2 * d {
        return Err(Error::DimensionMismatch(format!(
            "gain has {} columns, system expects {}",
            solution.gain.ncols(),
            2 * d
        )));
    }
    let chol_m = Cholesky::new(system.m_mat.clone())
        .ok_or_else(|| Error::SingularMatrix("L2 Gram is not positive definite".into()))?;
    let chol_s = Cholesky::new(system.s_mat.clone())
        .ok_or_else(|| Error::SingularMatrix("stiffness matrix is not positive definite".into()))?;
    let mut alpha = Vec::with_capacity(solution.gain.nrows());
    let mut beta = Vec::with_capacity(solution.gain.nrows());
    for i in 0..solution.gain.nrows() {
        let ky = solution.gain.view((i, 0), (1, d)).transpose();
        let kz = solution.gain.view((i, d), (1, d)).transpose();
        alpha.push(chol_m.solve(&ky).column(0).into_owned());
        beta.push(chol_s.solve(&kz).column(0).into_owned());
    }
    Ok(GainRepresenters { basis: system.basis, alpha, beta })
}

/// Distance between two gains through their representers, one
/// `(L2 distance of alpha, H10 distance of beta)` pair per input.
///
/// Hat bases integrate exactly over the union mesh of the two grids; sine
/// bases compare zero-padded coefficients (Euclidean for the L2 part,
/// stiffness-weighted for the H1_0 part).
pub fn gain_distance<T: Scalar>(
    rep_a: &GainRepresenters<T>,
    rep_b: &GainRepresenters<T>,
) -> Result<Vec<(T, T)>> {
    if rep_a.alpha.len() != rep_b.alpha.len() {
        return Err(Error::DimensionMismatch(format!(
            "representer sets cover {} and {} inputs",
            rep_a.alpha.len(),
            rep_b.alpha.len()
        )));
    }
    match (rep_a.basis, rep_b.basis) {
        (Basis::Hat1D { n: n_a }, Basis::Hat1D { n: n_b }) => {
            let breaks = union_breakpoints::<T>(n_a, n_b);
            let mut out = Vec::with_capacity(rep_a.alpha.len());
            for i in 0..rep_a.alpha.len() {
                let (aa, ab) = (&rep_a.alpha[i], &rep_b.alpha[i]);
                let (ba, bb) = (&rep_a.beta[i], &rep_b.beta[i]);
                let mut l2 = T::zero();
                let mut h10 = T::zero();
                for w in breaks.windows(2) {
                    l2 += gauss5(w[0], w[1], |x| {
                        let dv = hat_eval(n_a, aa, x) - hat_eval(n_b, ab, x);
                        dv * dv
                    });
                    h10 += gauss5(w[0], w[1], |x| {
                        let dv =
                            hat_eval_derivative(n_a, ba, x) - hat_eval_derivative(n_b, bb, x);
                        dv * dv
                    });
                }
                out.push((l2.sqrt(), h10.sqrt()));
            }
            Ok(out)
        }
        (Basis::Sine2D { n: n_a }, Basis::Sine2D { n: n_b }) => {
            let n_max = n_a.max(n_b);
            let pad = |v: &DVector<T>, n: usize| -> DVector<T> {
                let mut out = DVector::<T>::zeros(n_max * n_max);
                for (pos, (j, k)) in sine_index_pairs(n).into_iter().enumerate() {
                    out[(j - 1) * n_max + (k - 1)] = v[pos];
                }
                out
            };
            let mut out = Vec::with_capacity(rep_a.alpha.len());
            for i in 0..rep_a.alpha.len() {
                let da = pad(&rep_a.alpha[i], n_a) - pad(&rep_b.alpha[i], n_b);
                let db = pad(&rep_a.beta[i], n_a) - pad(&rep_b.beta[i], n_b);
                let l2 = da.norm();
                let mut h10_sq = T::zero();
                for (pos, (j, k)) in sine_index_pairs(n_max).into_iter().enumerate() {
                    h10_sq += ModeIndex::TwoD(j, k).lambda::<T>() * db[pos] * db[pos];
                }
                out.push((l2, h10_sq.sqrt()));
            }
            Ok(out)
        }
        _ => Err(Error::DomainMismatch(
            "gain distances need representers over the same basis kind".into(),
        )),
    }
}
