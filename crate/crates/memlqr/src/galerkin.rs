//! Finite-dimensional approximation of the coupled system.
//!
//! Coefficient coordinates are fixed once per basis and the state-space
//! inner product is carried explicitly as the Gram matrix
//! `G = blockdiag(M, S)` (L2 block for the temperature, H1_0 block for the
//! memory variable). With coefficient vectors `v1 = (y, z)`, `v2 = (p, q)`
//! the weak form reads
//!
//! ```text
//! a(v1, v2) = p' S (eta*y + z) - q' S (y - kappa*z),
//! ```
//!
//! and requiring `-<A v1, v2>_X = a(v1, v2)` for all `v2` yields
//!
//! ```text
//! A = [[-eta*M^{-1}S, -M^{-1}S], [I, -kappa*I]].
//! ```
//!
//! The memory equation `z' = y - kappa*z` is therefore represented exactly
//! regardless of the basis.

use crate::model::{DomainSpec, InputShape, ModeIndex, ModelParams};
use crate::quadrature::{gauss5, union_breakpoints, GAUSS5_NODES, GAUSS5_WEIGHTS};
use crate::{scalar, Error, Result, Scalar};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Approximation space. Dimension is `n - 1` for `Hat1D` and `n^2` for
/// `Sine2D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// Piecewise-linear hat functions on the uniform interior nodes
    /// `1/n, ..., (n-1)/n` of the unit interval.
    Hat1D { n: usize },
    /// Tensor eigenfunctions `2 sin(j pi x1) sin(k pi x2)`, `j, k <= n`,
    /// ordered lexicographically in `(j, k)`.
    Sine2D { n: usize },
}

impl Basis {
    /// Hat basis; needs `n >= 3` so at least two interior nodes exist and
    /// the coarsest spaces are not degenerate.
    pub fn hat1d(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidConstant(format!("hat basis requires n >= 3, got {n}")));
        }
        Ok(Basis::Hat1D { n })
    }

    /// Tensor sine basis on the unit square.
    pub fn sine2d(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidConstant("sine basis requires n >= 1".into()));
        }
        Ok(Basis::Sine2D { n })
    }

    /// Space dimension (half the state dimension).
    pub fn dim(&self) -> usize {
        match self {
            Basis::Hat1D { n } => n - 1,
            Basis::Sine2D { n } => n * n,
        }
    }

    /// Domain the basis functions live on.
    pub fn domain(&self) -> DomainSpec {
        match self {
            Basis::Hat1D { .. } => DomainSpec::Interval01,
            Basis::Sine2D { .. } => DomainSpec::UnitSquare,
        }
    }

    /// Mesh or index parameter `n`.
    pub fn n(&self) -> usize {
        match self {
            Basis::Hat1D { n } | Basis::Sine2D { n } => *n,
        }
    }
}

/// `(j, k)` index pairs of the `Sine2D` basis in storage order.
pub fn sine_index_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n);
    for j in 1..=n {
        for k in 1..=n {
            out.push((j, k));
        }
    }
    out
}

/// A real-valued function on the domain, passed by reference into
/// projections and norm evaluations.
pub enum ScalarField<'a, T: Scalar> {
    OneD(&'a dyn Fn(T) -> T),
    TwoD(&'a dyn Fn(T, T) -> T),
}

/// Assembled matrices for one approximation space.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinSystem<T: Scalar> {
    pub basis: Basis,
    /// L2 Gram of the basis (`dim x dim`).
    pub m_mat: DMatrix<T>,
    /// H1_0 Gram (stiffness) of the basis (`dim x dim`).
    pub s_mat: DMatrix<T>,
    /// State coefficient matrix (`2dim x 2dim`).
    pub a_mat: DMatrix<T>,
    /// Input coefficient matrix (`2dim x m`).
    pub b_mat: DMatrix<T>,
    /// State-space Gram `blockdiag(M, S)`.
    pub g_mat: DMatrix<T>,
    pub q_weight: T,
    pub r_matrix: DMatrix<T>,
    pub omega: T,
}

impl<T: Scalar> GalerkinSystem<T> {
    /// Space dimension (half the state dimension).
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Full state dimension `2 * dim`.
    pub fn state_dim(&self) -> usize {
        2 * self.basis.dim()
    }

    /// Number of control inputs.
    pub fn input_count(&self) -> usize {
        self.b_mat.ncols()
    }
}

/// L2 and H1_0 Gram matrices of `basis`.
///
/// Hat functions on mesh width `h = 1/n`: `M` is tridiagonal with diagonal
/// `2h/3` and off-diagonal `h/6`; `S` is tridiagonal with diagonal `2/h`
/// and off-diagonal `-1/h` (exact piecewise-polynomial integrals). Sine
/// tensors are L2-orthonormal, so `M = I` and `S = diag(lambda_{j,k})`.
pub fn assemble_grams<T: Scalar>(basis: Basis) -> (DMatrix<T>, DMatrix<T>) {
    match basis {
        Basis::Hat1D { n } => {
            let d = n - 1;
            let h = T::one() / scalar::<T>(n as f64);
            let mut m = DMatrix::<T>::zeros(d, d);
            let mut s = DMatrix::<T>::zeros(d, d);
            let (m_diag, m_off) = (scalar::<T>(2.0 / 3.0) * h, h / scalar::<T>(6.0));
            let (s_diag, s_off) = (scalar::<T>(2.0) / h, -T::one() / h);
            for i in 0..d {
                m[(i, i)] = m_diag;
                s[(i, i)] = s_diag;
                if i + 1 < d {
                    m[(i, i + 1)] = m_off;
                    m[(i + 1, i)] = m_off;
                    s[(i, i + 1)] = s_off;
                    s[(i + 1, i)] = s_off;
                }
            }
            (m, s)
        }
        Basis::Sine2D { n } => {
            let d = n * n;
            let m = DMatrix::<T>::identity(d, d);
            let mut s = DMatrix::<T>::zeros(d, d);
            for (pos, (j, k)) in sine_index_pairs(n).into_iter().enumerate() {
                s[(pos, pos)] = ModeIndex::TwoD(j, k).lambda::<T>();
            }
            (m, s)
        }
    }
}

/// State matrix `A = [[-eta*M^{-1}S, -M^{-1}S], [I, -kappa*I]]`.
///
/// `M^{-1}S` is realized by a Cholesky solve against `M`; `M` is positive
/// definite for every valid basis, so failure is a programming error.
pub fn assemble_state<T: Scalar>(basis: Basis, params: &ModelParams<T>) -> DMatrix<T> {
    let (m_mat, s_mat) = assemble_grams::<T>(basis);
    let d = basis.dim();
    let chol = Cholesky::new(m_mat).expect("L2 Gram matrix is positive definite");
    let w = chol.solve(&s_mat);
    let mut a = DMatrix::<T>::zeros(2 * d, 2 * d);
    a.view_mut((0, 0), (d, d)).copy_from(&(&w * -params.eta));
    a.view_mut((0, d), (d, d)).copy_from(&(-&w));
    for i in 0..d {
        a[(d + i, i)] = T::one();
        a[(d + i, d + i)] = -params.kappa;
    }
    a
}

/// Input matrix: column `i` holds the coefficients of the X-projection of
/// `(b_i, 0)`, i.e. the upper block solves `M c = l` with
/// `l[j] = integral of b_i against basis function j`, and the lower block
/// is zero (the H1_0 projection of 0).
pub fn assemble_input<T: Scalar>(basis: Basis, shapes: &[InputShape<T>]) -> Result<DMatrix<T>> {
    let d = basis.dim();
    let mut b = DMatrix::<T>::zeros(2 * d, shapes.len());
    let (m_mat, _) = assemble_grams::<T>(basis);
    let chol = Cholesky::new(m_mat).expect("L2 Gram matrix is positive definite");
    for (i, shape) in shapes.iter().enumerate() {
        shape.validate(basis.domain())?;
        let mut loads = DVector::<T>::zeros(d);
        match basis {
            Basis::Hat1D { n } => {
                for wb in &shape.boxes {
                    let (a_lo, a_hi) = (wb.region.lo[0], wb.region.hi[0]);
                    for j in 1..n {
                        loads[j - 1] += wb.amplitude * hat_box_integral::<T>(n, j, a_lo, a_hi);
                    }
                }
            }
            Basis::Sine2D { n } => {
                for (pos, (j, k)) in sine_index_pairs(n).into_iter().enumerate() {
                    for wb in &shape.boxes {
                        loads[pos] +=
                            wb.amplitude * ModeIndex::TwoD(j, k).box_integral(&wb.region)?;
                    }
                }
            }
        }
        let c = chol.solve(&loads);
        b.view_mut((0, i), (d, 1)).copy_from(&c);
    }
    Ok(b)
}

/// Builds the full system for one basis and parameter set.
pub fn assemble_system<T: Scalar>(
    basis: Basis,
    params: &ModelParams<T>,
    shapes: &[InputShape<T>],
) -> Result<GalerkinSystem<T>> {
    params.validate()?;
    if shapes.len() != params.input_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} input shapes for a {}-input cost weight",
            shapes.len(),
            params.input_count()
        )));
    }
    let (m_mat, s_mat) = assemble_grams::<T>(basis);
    let a_mat = assemble_state(basis, params);
    let b_mat = assemble_input(basis, shapes)?;
    let d = basis.dim();
    let mut g_mat = DMatrix::<T>::zeros(2 * d, 2 * d);
    g_mat.view_mut((0, 0), (d, d)).copy_from(&m_mat);
    g_mat.view_mut((d, d), (d, d)).copy_from(&s_mat);
    Ok(GalerkinSystem {
        basis,
        m_mat,
        s_mat,
        a_mat,
        b_mat,
        g_mat,
        q_weight: params.q_weight,
        r_matrix: params.r_matrix.clone(),
        omega: params.omega,
    })
}

/// Exact integral of hat function `j` (of `Hat1D { n }`) over the interval
/// `(a, b)`: the support is split at the peak so each piece is linear.
fn hat_box_integral<T: Scalar>(n: usize, j: usize, a: T, b: T) -> T {
    let nf = scalar::<T>(n as f64);
    let xl = scalar::<T>((j - 1) as f64) / nf;
    let xm = scalar::<T>(j as f64) / nf;
    let xr = scalar::<T>((j + 1) as f64) / nf;
    let half = scalar::<T>(0.5);
    let mut acc = T::zero();
    // Rising piece: value (x - xl) * n on [xl, xm].
    let (lo, hi) = (a.max(xl), b.min(xm));
    if lo < hi {
        acc += nf * half * ((hi - xl) * (hi - xl) - (lo - xl) * (lo - xl));
    }
    // Falling piece: value (xr - x) * n on [xm, xr].
    let (lo, hi) = (a.max(xm), b.min(xr));
    if lo < hi {
        acc += nf * half * ((xr - lo) * (xr - lo) - (xr - hi) * (xr - hi));
    }
    acc
}

/// Value of hat function `j` (interior node `j/n`) at `x`.
pub fn hat_value<T: Scalar>(n: usize, j: usize, x: T) -> T {
    let nf = scalar::<T>(n as f64);
    let v = T::one() - (x * nf - scalar::<T>(j as f64)).abs();
    v.max(T::zero())
}

/// Evaluates a hat-coefficient vector at `x` in `[0, 1]`.
pub fn hat_eval<T: Scalar>(n: usize, coeffs: &DVector<T>, x: T) -> T {
    assert_eq!(coeffs.len(), n - 1, "coefficient count must match the basis");
    let nf = scalar::<T>(n as f64);
    let e = (x * nf).floor().to_f64().unwrap_or(0.0) as isize;
    let e = e.clamp(0, n as isize - 1) as usize;
    let node = |i: usize| if i >= 1 && i < n { coeffs[i - 1] } else { T::zero() };
    let xe = scalar::<T>(e as f64) / nf;
    let t = (x - xe) * nf;
    node(e) * (T::one() - t) + node(e + 1) * t
}

/// Derivative of a hat-coefficient vector at `x` (piecewise constant; at a
/// node the right-hand slope is returned).
pub fn hat_eval_derivative<T: Scalar>(n: usize, coeffs: &DVector<T>, x: T) -> T {
    assert_eq!(coeffs.len(), n - 1, "coefficient count must match the basis");
    let nf = scalar::<T>(n as f64);
    let e = (x * nf).floor().to_f64().unwrap_or(0.0) as isize;
    let e = e.clamp(0, n as isize - 1) as usize;
    let node = |i: usize| if i >= 1 && i < n { coeffs[i - 1] } else { T::zero() };
    (node(e + 1) - node(e)) * nf
}

/// Evaluates a sine-coefficient vector at `(x1, x2)`.
pub fn sine2d_eval<T: Scalar>(n: usize, coeffs: &DVector<T>, x1: T, x2: T) -> T {
    assert_eq!(coeffs.len(), n * n, "coefficient count must match the basis");
    let two = scalar::<T>(2.0);
    let mut acc = T::zero();
    for (pos, (j, k)) in sine_index_pairs(n).into_iter().enumerate() {
        let sj = (scalar::<T>(j as f64) * T::pi() * x1).sin();
        let sk = (scalar::<T>(k as f64) * T::pi() * x2).sin();
        acc += coeffs[pos] * two * sj * sk;
    }
    acc
}

/// Composite 5-point Gauss rule on `[0, 1]` with `cells` equal cells;
/// returns the flat node and weight lists.
fn composite_axis<T: Scalar>(cells: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = Vec::with_capacity(5 * cells);
    let mut weights = Vec::with_capacity(5 * cells);
    let half = scalar::<T>(0.5);
    let w = T::one() / scalar::<T>(cells as f64);
    for c in 0..cells {
        let lo = scalar::<T>(c as f64) * w;
        let mid = lo + w * half;
        let hw = w * half;
        for i in 0..5 {
            nodes.push(mid + hw * scalar::<T>(GAUSS5_NODES[i]));
            weights.push(hw * scalar::<T>(GAUSS5_WEIGHTS[i]));
        }
    }
    (nodes, weights)
}

/// L2 loads of `f` against every `Sine2D { n }` basis function, by
/// composite Gauss quadrature on a `2n x 2n` cell grid (empirically ~1e-10
/// accurate for smooth data at the mode counts used here).
fn sine2d_l2_loads<T: Scalar>(n: usize, f: &dyn Fn(T, T) -> T) -> DVector<T> {
    let (nodes, weights) = composite_axis::<T>(2 * n);
    let np = nodes.len();
    // sin_table[j - 1][p] = sin(j pi x_p)
    let mut sin_table = vec![vec![T::zero(); np]; n];
    for (j, row) in sin_table.iter_mut().enumerate() {
        let jf = scalar::<T>((j + 1) as f64) * T::pi();
        for (p, node) in nodes.iter().enumerate() {
            row[p] = (jf * *node).sin();
        }
    }
    let mut loads = DVector::<T>::zeros(n * n);
    let two = scalar::<T>(2.0);
    for p in 0..np {
        // inner[k - 1] = sum_q w_q f(x_p, x_q) sin(k pi x_q)
        let mut inner = vec![T::zero(); n];
        for q in 0..np {
            let fv = f(nodes[p], nodes[q]) * weights[q];
            for (k, cell) in inner.iter_mut().enumerate() {
                *cell += fv * sin_table[k][q];
            }
        }
        for j in 0..n {
            let wp = weights[p] * sin_table[j][p] * two;
            for k in 0..n {
                loads[j * n + k] += wp * inner[k];
            }
        }
    }
    loads
}

/// Coefficients of the X-orthogonal projection of `(y, z)`: the upper block
/// solves `M c = (L2 loads of y)`, the lower block solves
/// `S d = (H1_0 loads of z)`.
///
/// `z` must vanish on the boundary. Its H1_0 loads use only point values:
/// against a hat, integration by parts gives
/// `n * (2 z(x_j) - z(x_{j-1}) - z(x_{j+1}))` exactly; against a sine
/// tensor, Green's identity turns the load into `lambda_{j,k}` times the L2
/// load.
pub fn project_state<T: Scalar>(
    basis: Basis,
    y: &ScalarField<'_, T>,
    z: &ScalarField<'_, T>,
) -> Result<DVector<T>> {
    let d = basis.dim();
    let (m_mat, s_mat) = assemble_grams::<T>(basis);
    let mut out = DVector::<T>::zeros(2 * d);
    match basis {
        Basis::Hat1D { n } => {
            let (ScalarField::OneD(fy), ScalarField::OneD(fz)) = (y, z) else {
                return Err(Error::DomainMismatch(
                    "hat basis requires one-dimensional fields".into(),
                ));
            };
            let nf = scalar::<T>(n as f64);
            let mut l2 = DVector::<T>::zeros(d);
            let mut h10 = DVector::<T>::zeros(d);
            for j in 1..n {
                let xl = scalar::<T>((j - 1) as f64) / nf;
                let xm = scalar::<T>(j as f64) / nf;
                let xr = scalar::<T>((j + 1) as f64) / nf;
                let g = |x: T| fy(x) * hat_value(n, j, x);
                l2[j - 1] = gauss5(xl, xm, g) + gauss5(xm, xr, g);
                h10[j - 1] = nf * (scalar::<T>(2.0) * fz(xm) - fz(xl) - fz(xr));
            }
            let chol_m = Cholesky::new(m_mat).expect("L2 Gram matrix is positive definite");
            let chol_s = Cholesky::new(s_mat).expect("stiffness matrix is positive definite");
            out.view_mut((0, 0), (d, 1)).copy_from(&chol_m.solve(&l2));
            out.view_mut((d, 0), (d, 1)).copy_from(&chol_s.solve(&h10));
        }
        Basis::Sine2D { n } => {
            let (ScalarField::TwoD(fy), ScalarField::TwoD(fz)) = (y, z) else {
                return Err(Error::DomainMismatch(
                    "sine basis requires two-dimensional fields".into(),
                ));
            };
            let l2 = sine2d_l2_loads(n, fy);
            let mut h10 = sine2d_l2_loads(n, fz);
            for (pos, (j, k)) in sine_index_pairs(n).into_iter().enumerate() {
                h10[pos] *= ModeIndex::TwoD(j, k).lambda::<T>();
            }
            let chol_m = Cholesky::new(m_mat).expect("L2 Gram matrix is positive definite");
            let chol_s = Cholesky::new(s_mat).expect("stiffness matrix is positive definite");
            out.view_mut((0, 0), (d, 1)).copy_from(&chol_m.solve(&l2));
            out.view_mut((d, 0), (d, 1)).copy_from(&chol_s.solve(&h10));
        }
    }
    Ok(out)
}

/// State-space inner product `c1' G c2`.
pub fn x_inner<T: Scalar>(system: &GalerkinSystem<T>, c1: &DVector<T>, c2: &DVector<T>) -> Result<T> {
    let sd = system.state_dim();
    if c1.len() != sd || c2.len() != sd {
        return Err(Error::DimensionMismatch(format!(
            "expected state vectors of length {sd}, got {} and {}",
            c1.len(),
            c2.len()
        )));
    }
    Ok((c1.transpose() * &system.g_mat * c2)[(0, 0)])
}

/// Cross Gram matrices between two hat spaces on meshes `n_a` and `n_b`:
/// entry `(i, j)` of the first is the L2 product of hat `i` of mesh `n_a`
/// with hat `j` of mesh `n_b`; the second holds the products of their
/// derivatives. Integration runs one Gauss rule per union-mesh segment,
/// where both integrands are polynomial, so the results are exact.
pub fn hat_cross_grams<T: Scalar>(n_a: usize, n_b: usize) -> (DMatrix<T>, DMatrix<T>) {
    assert!(n_a >= 3 && n_b >= 3, "hat meshes require n >= 3");
    let (da, db) = (n_a - 1, n_b - 1);
    let mut m = DMatrix::<T>::zeros(da, db);
    let mut s = DMatrix::<T>::zeros(da, db);
    let breaks = union_breakpoints::<T>(n_a, n_b);
    let half = scalar::<T>(0.5);
    let (nfa, nfb) = (scalar::<T>(n_a as f64), scalar::<T>(n_b as f64));
    for w in breaks.windows(2) {
        let (p, q) = (w[0], w[1]);
        let mid = (p + q) * half;
        let ea = (mid * nfa).floor().to_f64().unwrap() as usize;
        let eb = (mid * nfb).floor().to_f64().unwrap() as usize;
        // Hats active on this segment: the element endpoints that are
        // interior nodes. A node equal to the element's right end rises on
        // the segment (slope +n); the left end falls (slope -n).
        for (na, slope_a) in [(ea, -nfa), (ea + 1, nfa)] {
            if na < 1 || na > n_a - 1 {
                continue;
            }
            for (nb, slope_b) in [(eb, -nfb), (eb + 1, nfb)] {
                if nb < 1 || nb > n_b - 1 {
                    continue;
                }
                m[(na - 1, nb - 1)] +=
                    gauss5(p, q, |x| hat_value(n_a, na, x) * hat_value(n_b, nb, x));
                s[(na - 1, nb - 1)] += slope_a * slope_b * (q - p);
            }
        }
    }
    (m, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoxRegion;
    use crate::quadrature::gauss5_mesh;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn interval_params() -> ModelParams<f64> {
        ModelParams::new(0.01, 0.01, 1.0, 2.0, dmatrix![1.0]).unwrap()
    }

    fn square_params() -> ModelParams<f64> {
        ModelParams::new(0.005, 0.001, 0.5, 1.0, DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn basis_validation_and_dims() {
        assert!(Basis::hat1d(2).is_err());
        assert_eq!(Basis::hat1d(4).unwrap().dim(), 3);
        assert_eq!(Basis::sine2d(3).unwrap().dim(), 9);
        assert!(Basis::sine2d(0).is_err());
    }

    #[test]
    fn hat_grams_n4() {
        let (m, s) = assemble_grams::<f64>(Basis::Hat1D { n: 4 });
        assert_relative_eq!(s[(0, 0)], 8.0, max_relative = 1e-15);
        assert_relative_eq!(s[(0, 1)], -4.0, max_relative = 1e-15);
        assert_relative_eq!(m[(1, 1)], 1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(m[(1, 2)], 1.0 / 24.0, max_relative = 1e-15);
        assert_eq!(s[(0, 2)], 0.0);
    }

    #[test]
    fn sine_grams_n2() {
        let (m, s) = assemble_grams::<f64>(Basis::Sine2D { n: 2 });
        let pi2 = std::f64::consts::PI.powi(2);
        assert_eq!(m, DMatrix::identity(4, 4));
        // Order (1,1), (1,2), (2,1), (2,2).
        let expected = [2.0, 5.0, 5.0, 8.0];
        for (i, f) in expected.iter().enumerate() {
            assert_relative_eq!(s[(i, i)], f * pi2, max_relative = 1e-14);
        }
    }

    #[test]
    fn state_matrix_lower_blocks_exact() {
        let basis = Basis::hat1d(7).unwrap();
        let params = interval_params();
        let a = assemble_state(basis, &params);
        let d = basis.dim();
        for i in 0..d {
            for j in 0..d {
                let want_i = if i == j { 1.0 } else { 0.0 };
                let want_k = if i == j { -params.kappa } else { 0.0 };
                assert_eq!(a[(d + i, j)], want_i);
                assert_eq!(a[(d + i, d + j)], want_k);
            }
        }
    }

    #[test]
    fn sine_state_blocks_are_modal() {
        // With M = I and S diagonal, the upper blocks are -eta*diag(lambda)
        // and -diag(lambda); each mode decouples into a 2x2 block whose
        // characteristic polynomial matches the continuum quadratic.
        let params = square_params();
        let basis = Basis::sine2d(2).unwrap();
        let a = assemble_state(basis, &params);
        let d = 4;
        for (pos, (j, k)) in sine_index_pairs(2).into_iter().enumerate() {
            let lambda = ModeIndex::TwoD(j, k).lambda::<f64>();
            assert_relative_eq!(a[(pos, pos)], -params.eta * lambda, max_relative = 1e-14);
            assert_relative_eq!(a[(pos, d + pos)], -lambda, max_relative = 1e-14);
            // Trace and determinant of the 2x2 mode block reproduce the
            // root sum and product.
            let tr = a[(pos, pos)] + a[(d + pos, d + pos)];
            let det = a[(pos, pos)] * a[(d + pos, d + pos)] - a[(pos, d + pos)] * a[(d + pos, pos)];
            assert_relative_eq!(tr, -(params.kappa + params.eta * lambda), max_relative = 1e-14);
            assert_relative_eq!(det, lambda * (1.0 + params.eta * params.kappa), max_relative = 1e-14);
        }
    }

    #[test]
    fn hat_box_loads_match_quadrature_oracle() {
        // Independent route: composite Gauss on the union of mesh nodes and
        // box corners, where the integrand is piecewise linear.
        let n = 10;
        let (a, b) = (0.13, 0.77);
        for j in 1..n {
            let exact = hat_box_integral::<f64>(n, j, a, b);
            let mut breaks: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            breaks.extend_from_slice(&[a, b]);
            breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let quad = gauss5_mesh(&breaks, |x| {
                if x > a && x < b {
                    hat_value(n, j, x)
                } else {
                    0.0
                }
            });
            assert_relative_eq!(exact, quad, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn input_lower_block_is_zero() {
        let basis = Basis::hat1d(10).unwrap();
        let shapes = vec![InputShape::single_box(BoxRegion::interval(0.1, 0.8), 10.0)];
        let b = assemble_input(basis, &shapes).unwrap();
        assert_eq!(b.nrows(), 18);
        assert_eq!(b.ncols(), 1);
        for i in 9..18 {
            assert_eq!(b[(i, 0)], 0.0);
        }
        assert!(b.view((0, 0), (9, 1)).amax() > 0.0);
    }

    #[test]
    fn sine_input_equals_mode_moments() {
        // M = I, so the coefficients are the closed-form moments directly.
        let basis = Basis::sine2d(2).unwrap();
        let region = BoxRegion::rect(0.1, 0.3, 0.1, 0.5);
        let shapes = vec![InputShape::single_box(region.clone(), 5.0)];
        let b = assemble_input(basis, &shapes).unwrap();
        for (pos, (j, k)) in sine_index_pairs(2).into_iter().enumerate() {
            let want = 5.0 * ModeIndex::TwoD(j, k).box_integral(&region).unwrap();
            assert_relative_eq!(b[(pos, 0)], want, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn project_sine_basis_function_roundtrip() {
        let basis = Basis::sine2d(3).unwrap();
        let y = |x1: f64, x2: f64| 2.0 * (std::f64::consts::PI * x1).sin() * (std::f64::consts::PI * x2).sin();
        let zero = |_: f64, _: f64| 0.0;
        let c = project_state(basis, &ScalarField::TwoD(&y), &ScalarField::TwoD(&zero)).unwrap();
        assert_relative_eq!(c[0], 1.0, max_relative = 1e-9);
        for i in 1..18 {
            assert!(c[i].abs() < 1e-9, "coefficient {i} = {}", c[i]);
        }
    }

    #[test]
    fn project_hat_memory_block_is_the_interpolant() {
        // The H1_0 projection onto hats interpolates at the nodes: the load
        // formula uses only nodal values and the interpolant satisfies the
        // projection equations exactly.
        let n = 8;
        let basis = Basis::hat1d(n).unwrap();
        let z = |x: f64| x * (1.0 - x);
        let zero = |_: f64| 0.0;
        let c = project_state(basis, &ScalarField::OneD(&zero), &ScalarField::OneD(&z)).unwrap();
        for j in 1..n {
            let xj = j as f64 / n as f64;
            assert_relative_eq!(c[(n - 1) + (j - 1)], z(xj), max_relative = 1e-12);
        }
    }

    #[test]
    fn x_inner_basics() {
        let params = square_params();
        let shapes = vec![
            InputShape::single_box(BoxRegion::rect(0.1, 0.3, 0.1, 0.5), 5.0),
            InputShape::single_box(BoxRegion::rect(0.5, 0.7, 0.5, 0.9), 10.0),
        ];
        let system = assemble_system(Basis::sine2d(2).unwrap(), &params, &shapes).unwrap();
        let mut e0 = DVector::<f64>::zeros(8);
        e0[0] = 1.0;
        assert_eq!(x_inner(&system, &e0, &e0).unwrap(), 1.0);
        let zero = DVector::<f64>::zeros(8);
        assert_eq!(x_inner(&system, &zero, &e0).unwrap(), 0.0);
        let short = DVector::<f64>::zeros(4);
        assert!(x_inner(&system, &short, &e0).is_err());
    }

    #[test]
    fn hat_eval_matches_nodal_values() {
        let n = 5;
        let coeffs = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        for j in 1..n {
            let xj = j as f64 / n as f64;
            assert_relative_eq!(hat_eval(n, &coeffs, xj), coeffs[j - 1], max_relative = 1e-14);
        }
        assert_relative_eq!(hat_eval(n, &coeffs, 0.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(hat_eval(n, &coeffs, 1.0), 0.0, epsilon = 1e-14);
        // Midpoint of the first element.
        assert_relative_eq!(hat_eval(n, &coeffs, 0.1), 0.5, max_relative = 1e-14);
        // Derivative on the first element: (1 - 0) * 5.
        assert_relative_eq!(hat_eval_derivative(n, &coeffs, 0.1), 5.0, max_relative = 1e-14);
    }

    #[test]
    fn cross_grams_reduce_to_grams_on_equal_meshes() {
        let (m, s) = assemble_grams::<f64>(Basis::Hat1D { n: 6 });
        let (mc, sc) = hat_cross_grams::<f64>(6, 6);
        assert_relative_eq!((&m - &mc).amax(), 0.0, epsilon = 1e-14);
        assert_relative_eq!((&s - &sc).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_grams_match_bruteforce() {
        let (n_a, n_b) = (3, 5);
        let (mc, sc) = hat_cross_grams::<f64>(n_a, n_b);
        let breaks = union_breakpoints::<f64>(n_a, n_b);
        for i in 1..n_a {
            for j in 1..n_b {
                let m_ref = gauss5_mesh(&breaks, |x| hat_value(n_a, i, x) * hat_value(n_b, j, x));
                assert_relative_eq!(mc[(i - 1, j - 1)], m_ref, epsilon = 1e-14);
                // Derivative product via difference quotients on segment
                // midpoints (piecewise constant, so midpoints suffice).
                let mut s_ref = 0.0;
                for w in breaks.windows(2) {
                    let mid = 0.5 * (w[0] + w[1]);
                    let da = (hat_value(n_a, i, mid + 1e-7) - hat_value(n_a, i, mid - 1e-7)) / 2e-7;
                    let db = (hat_value(n_b, j, mid + 1e-7) - hat_value(n_b, j, mid - 1e-7)) / 2e-7;
                    s_ref += da * db * (w[1] - w[0]);
                }
                assert_relative_eq!(sc[(i - 1, j - 1)], s_ref, max_relative = 1e-6, epsilon = 1e-6);
            }
        }
    }
}
