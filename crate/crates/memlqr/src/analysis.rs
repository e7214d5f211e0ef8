//! Dense spectral diagnostics and empirical convergence probes.
//!
//! Everything here validates synthesis output rather than producing it:
//! eigenvalue reports of open and closed loops, application of a gain
//! synthesized on one mesh to a finer mesh (through its Riesz
//! representers), distances between states living on different meshes, and
//! the semigroup convergence table that backs the approximation theory
//! empirically.

use crate::galerkin::{
    assemble_grams, assemble_state, hat_cross_grams, project_state, sine_index_pairs, Basis,
    GalerkinSystem, ScalarField,
};
use crate::model::{DomainSpec, ModeIndex, ModelParams};
use crate::riccati::GainRepresenters;
use crate::simulate::integrate;
use crate::{scalar, Error, Result, Scalar};
use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex;
use std::cmp::Ordering;

/// Eigenvalues of a dense real matrix, sorted by descending real part and
/// then descending imaginary part.
///
/// Backed by Hessenberg reduction plus implicit-shift QR (real Schur form),
/// capped at `30 * dim` iterations.
pub fn eig<T: Scalar>(m: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConstant("matrix has non-finite entries".into()));
    }
    let schur = Schur::try_new(m.clone(), T::default_epsilon(), 30 * n).ok_or_else(|| {
        Error::NoConvergence { context: "QR eigenvalue iteration".into(), iterations: 30 * n }
    })?;
    let vals = schur.complex_eigenvalues();
    let mut out: Vec<Complex<T>> = vals.iter().copied().collect();
    out.sort_by(|a, b| match b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal) {
        Ordering::Equal => b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal),
        other => other,
    });
    Ok(out)
}

/// Largest real part over the spectrum of `m`.
pub fn spectral_abscissa<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    let vals = eig(m)?;
    vals.first()
        .map(|v| v.re)
        .ok_or_else(|| Error::DimensionMismatch("empty matrix has no abscissa".into()))
}

/// Largest singular value of `m` (the operator 2-norm).
pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

/// Worst pairing distance between two spectra under greedy
/// nearest-neighbor matching with consumption. Degenerate (multiple) and
/// conjugate eigenvalues make positional comparison of sorted lists
/// meaningless; matching with consumption is robust to tie reordering.
/// Returns infinity when the lengths differ.
pub fn spectrum_match_distance<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    if a.len() != b.len() {
        return scalar::<T>(f64::INFINITY);
    }
    let mut used = vec![false; b.len()];
    let mut worst = T::zero();
    for va in a {
        let mut best: Option<(usize, T)> = None;
        for (j, vb) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = ((va.re - vb.re) * (va.re - vb.re) + (va.im - vb.im) * (va.im - vb.im)).sqrt();
            if best.map(|(_, bd)| d < bd).unwrap_or(true) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.expect("lengths match, so a slot is free");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Spectrum of one matrix together with counts against a shift.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport<T: Scalar> {
    /// Raw eigenvalues, sorted by descending real part.
    pub eigenvalues: Vec<Complex<T>>,
    /// Shift the count refers to.
    pub shift: T,
    /// Number of eigenvalues with `Re(mu) + shift > 0` (strict).
    pub unstable_count: usize,
    /// Largest raw real part.
    pub abscissa: T,
}

/// Eigenvalue report of `m` with counts against `shift`.
pub fn spectrum_report<T: Scalar>(m: &DMatrix<T>, shift: T) -> Result<SpectrumReport<T>> {
    let eigenvalues = eig(m)?;
    let abscissa = eigenvalues
        .first()
        .map(|v| v.re)
        .ok_or_else(|| Error::DimensionMismatch("empty matrix has no spectrum".into()))?;
    let unstable_count = eigenvalues.iter().filter(|v| v.re + shift > T::zero()).count();
    Ok(SpectrumReport { eigenvalues, shift, unstable_count, abscissa })
}

/// Spectrum of `A + B K` (open loop when `gain` is `None`), reported
/// against `shift`.
pub fn closed_loop_spectrum<T: Scalar>(
    system: &GalerkinSystem<T>,
    gain: Option<&DMatrix<T>>,
    shift: T,
) -> Result<SpectrumReport<T>> {
    let mat = match gain {
        Some(k) => {
            if k.nrows() != system.input_count() || k.ncols() != system.state_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "gain is {}x{}, system expects {}x{}",
                    k.nrows(),
                    k.ncols(),
                    system.input_count(),
                    system.state_dim()
                )));
            }
            &system.a_mat + &system.b_mat * k
        }
        None => system.a_mat.clone(),
    };
    spectrum_report(&mat, shift)
}

/// Applies a gain born on one mesh to a system on another mesh of the same
/// kind, through its representers: row `i` of the result is
/// `[alpha_i' M_x, beta_i' S_x]` with the cross Gram matrices between the
/// two bases, which realizes `(p, q) -> <alpha_i, p> + <beta_i, q>` on the
/// target space. No solve against the target Gram is involved.
pub fn cross_apply_gain<T: Scalar>(
    rep: &GainRepresenters<T>,
    target: &GalerkinSystem<T>,
) -> Result<DMatrix<T>> {
    let m = rep.alpha.len();
    let dt = target.dim();
    let mut k = DMatrix::<T>::zeros(m, 2 * dt);
    match (rep.basis, target.basis) {
        (Basis::Hat1D { n: n_a }, Basis::Hat1D { n: n_b }) => {
            let (m_cross, s_cross) = hat_cross_grams::<T>(n_a, n_b);
            for i in 0..m {
                let row_y = rep.alpha[i].transpose() * &m_cross;
                let row_z = rep.beta[i].transpose() * &s_cross;
                k.view_mut((i, 0), (1, dt)).copy_from(&row_y);
                k.view_mut((i, dt), (1, dt)).copy_from(&row_z);
            }
        }
        (Basis::Sine2D { n: n_a }, Basis::Sine2D { n: n_b }) => {
            for (pos_b, (j, kk)) in sine_index_pairs(n_b).into_iter().enumerate() {
                if j > n_a || kk > n_a {
                    continue;
                }
                let pos_a = (j - 1) * n_a + (kk - 1);
                let lambda = ModeIndex::TwoD(j, kk).lambda::<T>();
                for i in 0..m {
                    k[(i, pos_b)] = rep.alpha[i][pos_a];
                    k[(i, dt + pos_b)] = lambda * rep.beta[i][pos_a];
                }
            }
        }
        _ => {
            return Err(Error::DomainMismatch(
                "gain transfer needs source and target bases of the same kind".into(),
            ))
        }
    }
    Ok(k)
}

/// State-space distance between coefficient vectors on two meshes of the
/// same kind: hats integrate exactly through cross Gram matrices, sines
/// compare zero-padded coefficients.
pub fn cross_x_norm<T: Scalar>(
    basis_a: Basis,
    xa: &DVector<T>,
    basis_b: Basis,
    xb: &DVector<T>,
) -> Result<T> {
    if xa.len() != 2 * basis_a.dim() || xb.len() != 2 * basis_b.dim() {
        return Err(Error::DimensionMismatch(
            "state vectors must match their bases".into(),
        ));
    }
    let quad = match (basis_a, basis_b) {
        (Basis::Hat1D { n: n_a }, Basis::Hat1D { n: n_b }) => {
            let (ma, sa) = assemble_grams::<T>(basis_a);
            let (mb, sb) = assemble_grams::<T>(basis_b);
            let (m_cross, s_cross) = hat_cross_grams::<T>(n_a, n_b);
            let (da, db) = (basis_a.dim(), basis_b.dim());
            let part = |va: nalgebra::DVectorView<'_, T>,
                        vb: nalgebra::DVectorView<'_, T>,
                        ga: &DMatrix<T>,
                        gb: &DMatrix<T>,
                        gab: &DMatrix<T>| {
                (va.transpose() * ga * va)[(0, 0)] + (vb.transpose() * gb * vb)[(0, 0)]
                    - scalar::<T>(2.0) * (va.transpose() * gab * vb)[(0, 0)]
            };
            part(xa.rows(0, da), xb.rows(0, db), &ma, &mb, &m_cross)
                + part(xa.rows(da, da), xb.rows(db, db), &sa, &sb, &s_cross)
        }
        (Basis::Sine2D { n: n_a }, Basis::Sine2D { n: n_b }) => {
            let n_max = n_a.max(n_b);
            let pad = |v: nalgebra::DVectorView<'_, T>, n: usize| -> DVector<T> {
                let mut out = DVector::<T>::zeros(n_max * n_max);
                for (pos, (j, k)) in sine_index_pairs(n).into_iter().enumerate() {
                    out[(j - 1) * n_max + (k - 1)] = v[pos];
                }
                out
            };
            let (da, db) = (basis_a.dim(), basis_b.dim());
            let dy = pad(xa.rows(0, da), n_a) - pad(xb.rows(0, db), n_b);
            let dz = pad(xa.rows(da, da), n_a) - pad(xb.rows(db, db), n_b);
            let mut acc = dy.norm_squared();
            for (pos, (j, k)) in sine_index_pairs(n_max).into_iter().enumerate() {
                acc += ModeIndex::TwoD(j, k).lambda::<T>() * dz[pos] * dz[pos];
            }
            acc
        }
        _ => {
            return Err(Error::DomainMismatch(
                "cross-mesh norms need bases of the same kind".into(),
            ))
        }
    };
    Ok(quad.max(T::zero()).sqrt())
}

/// Deviation table of one open-loop initial value across meshes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeTable<T: Scalar> {
    /// Compared mesh parameters (everything in the list but the reference).
    pub n_values: Vec<usize>,
    /// Largest mesh parameter; the comparison target.
    pub reference_n: usize,
    pub t_grid: Vec<T>,
    /// `deviations[i][k]`: state-space distance between the solution on
    /// `n_values[i]` and on the reference at `t_grid[k]`.
    pub deviations: Vec<Vec<T>>,
    /// Per compared mesh, the maximum deviation over the time grid.
    pub max_deviation: Vec<T>,
}

/// Open-loop system (no inputs) for probes.
fn open_loop_system<T: Scalar>(basis: Basis, params: &ModelParams<T>) -> GalerkinSystem<T> {
    let (m_mat, s_mat) = assemble_grams::<T>(basis);
    let a_mat = assemble_state(basis, params);
    let d = basis.dim();
    let mut g_mat = DMatrix::<T>::zeros(2 * d, 2 * d);
    g_mat.view_mut((0, 0), (d, d)).copy_from(&m_mat);
    g_mat.view_mut((d, d), (d, d)).copy_from(&s_mat);
    GalerkinSystem {
        basis,
        m_mat,
        s_mat,
        a_mat,
        b_mat: DMatrix::zeros(2 * d, 0),
        g_mat,
        q_weight: params.q_weight,
        r_matrix: DMatrix::zeros(0, 0),
        omega: params.omega,
    }
}

/// Integrates the same initial pair `(y, z)` open loop on every mesh in
/// `n_list` and tabulates the state-space deviation from the finest mesh at
/// the requested times. The `t = 0` column is the pure projection
/// difference; later columns watch the semigroups drift apart.
pub fn semigroup_convergence_probe<T: Scalar>(
    params: &ModelParams<T>,
    domain: DomainSpec,
    y: &ScalarField<'_, T>,
    z: &ScalarField<'_, T>,
    n_list: &[usize],
    t_grid: &[T],
    dt: T,
) -> Result<ProbeTable<T>> {
    params.validate()?;
    if n_list.len() < 2 {
        return Err(Error::DimensionMismatch(
            "the probe needs at least two mesh parameters".into(),
        ));
    }
    if t_grid.is_empty() {
        return Err(Error::DimensionMismatch("the probe needs a nonempty time grid".into()));
    }
    let reference_n = *n_list.iter().max().expect("nonempty list");
    let horizon = t_grid.iter().copied().fold(T::zero(), |a, b| a.max(b)).max(dt);
    let make_basis = |n: usize| -> Result<Basis> {
        match domain {
            DomainSpec::Interval01 => Basis::hat1d(n),
            DomainSpec::UnitSquare => Basis::sine2d(n),
        }
    };

    // Sampled states per mesh, in n_list order (reference included).
    let mut sampled: Vec<(usize, Basis, Vec<DVector<T>>)> = Vec::new();
    for &n in n_list {
        let basis = make_basis(n)?;
        let c0 = project_state(basis, y, z)?;
        let system = open_loop_system(basis, params);
        let rec = integrate(&system, None, &c0, horizon, dt)?;
        let last = rec.states.len() - 1;
        let samples = t_grid
            .iter()
            .map(|t| {
                let idx = (*t / dt).round().to_f64().unwrap_or(0.0).max(0.0) as usize;
                rec.states[idx.min(last)].clone()
            })
            .collect();
        sampled.push((n, basis, samples));
    }

    let reference = sampled
        .iter()
        .find(|(n, _, _)| *n == reference_n)
        .expect("reference comes from the list");
    let ref_states = reference.2.clone();
    let ref_basis = reference.1;

    let mut n_values = Vec::new();
    let mut deviations = Vec::new();
    let mut max_deviation = Vec::new();
    for (n, basis, samples) in &sampled {
        if *n == reference_n {
            continue;
        }
        let mut row = Vec::with_capacity(t_grid.len());
        for (s, r) in samples.iter().zip(ref_states.iter()) {
            row.push(cross_x_norm(*basis, s, ref_basis, r)?);
        }
        let max = row.iter().copied().fold(T::zero(), |a, b| a.max(b));
        n_values.push(*n);
        deviations.push(row);
        max_deviation.push(max);
    }
    Ok(ProbeTable { n_values, reference_n, t_grid: t_grid.to_vec(), deviations, max_deviation })
}
