//! Problem data and the closed-form spectrum of the continuum operator.
//!
//! The memory kernel turns the heat equation into a coupled first-order
//! system whose generator has, for each Dirichlet-Laplacian eigenvalue
//! `lambda`, exactly two eigenvalues `mu` solving
//!
//! ```text
//! mu^2 + (kappa + eta*lambda) * mu + lambda * (1 + eta*kappa) = 0.
//! ```
//!
//! One root branch accumulates at `-omega_zero = -(kappa + 1/eta)`, which
//! caps the decay rate any feedback can enforce.

use crate::{scalar, Error, Result, Scalar};
use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex;
use std::collections::BTreeMap;

/// Physical constants, target rate, and cost weights defining one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T: Scalar> {
    /// Diffusion constant `eta > 0`.
    pub eta: T,
    /// Memory decay constant `kappa > 0`.
    pub kappa: T,
    /// Target closed-loop decay rate; must satisfy `0 < omega < omega_zero`.
    pub omega: T,
    /// Scalar `q > 0` defining the state weight `Q = q * I`.
    pub q_weight: T,
    /// Symmetric positive-definite control weight, one row/column per input.
    pub r_matrix: DMatrix<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Builds and validates a parameter set.
    pub fn new(eta: T, kappa: T, omega: T, q_weight: T, r_matrix: DMatrix<T>) -> Result<Self> {
        let params = Self { eta, kappa, omega, q_weight, r_matrix };
        params.validate()?;
        Ok(params)
    }

    /// Spectral ceiling `omega_zero = kappa + 1/eta`.
    pub fn omega_zero(&self) -> T {
        self.kappa + T::one() / self.eta
    }

    /// Number of control inputs (the size of `r_matrix`).
    pub fn input_count(&self) -> usize {
        self.r_matrix.nrows()
    }

    /// Checks positivity of the constants, symmetry and positive
    /// definiteness of `r_matrix`, and feasibility of `omega`.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero()) {
            return Err(Error::InvalidConstant("eta must be positive".into()));
        }
        if !(self.kappa > T::zero()) {
            return Err(Error::InvalidConstant("kappa must be positive".into()));
        }
        if !(self.q_weight > T::zero()) {
            return Err(Error::InvalidConstant("q_weight must be positive".into()));
        }
        let r = &self.r_matrix;
        if r.nrows() == 0 || r.nrows() != r.ncols() {
            return Err(Error::InvalidConstant(format!(
                "r_matrix must be square and nonempty, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        let asym = (r - r.transpose()).amax();
        if asym > scalar::<T>(1e-12) * (T::one() + r.amax()) {
            return Err(Error::InvalidConstant("r_matrix must be symmetric".into()));
        }
        if Cholesky::new(r.clone()).is_none() {
            return Err(Error::InvalidConstant("r_matrix must be positive definite".into()));
        }
        let w0 = self.omega_zero();
        if !(self.omega > T::zero() && self.omega < w0) {
            return Err(Error::OmegaInfeasible {
                omega: self.omega.to_f64().unwrap_or(f64::NAN),
                omega_zero: w0.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }
}

/// Spatial domain. Only the two analytic geometries are supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainSpec {
    /// The open unit interval `(0, 1)`.
    Interval01,
    /// The open unit square `(0, 1)^2`.
    UnitSquare,
}

impl DomainSpec {
    /// Spatial dimension: 1 or 2.
    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::Interval01 => 1,
            DomainSpec::UnitSquare => 2,
        }
    }
}

/// Axis-aligned box; `lo`/`hi` hold one coordinate per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion<T: Scalar> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> BoxRegion<T> {
    /// One-dimensional box `(lo, hi)`.
    pub fn interval(lo: T, hi: T) -> Self {
        Self { lo: vec![lo], hi: vec![hi] }
    }

    /// Two-dimensional box `(lo1, hi1) x (lo2, hi2)`.
    pub fn rect(lo1: T, hi1: T, lo2: T, hi2: T) -> Self {
        Self { lo: vec![lo1, lo2], hi: vec![hi1, hi2] }
    }

    /// Number of axes.
    pub fn dimension(&self) -> usize {
        self.lo.len()
    }

    /// Checks the box sits inside `domain` with positive extent per axis.
    pub fn validate(&self, domain: DomainSpec) -> Result<()> {
        if self.lo.len() != domain.dimension() || self.hi.len() != domain.dimension() {
            return Err(Error::DomainMismatch(format!(
                "box has {} axes, domain has {}",
                self.lo.len(),
                domain.dimension()
            )));
        }
        for axis in 0..self.lo.len() {
            let (lo, hi) = (self.lo[axis], self.hi[axis]);
            if !(lo >= T::zero() && lo < hi && hi <= T::one()) {
                return Err(Error::InvalidConstant(format!(
                    "box axis {axis} must satisfy 0 <= lo < hi <= 1"
                )));
            }
        }
        Ok(())
    }

    /// Whether `point` lies in the closed box (used by quadrature oracles).
    pub fn contains(&self, point: &[T]) -> bool {
        point.len() == self.lo.len()
            && point
                .iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }
}

/// One box with an amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedBox<T: Scalar> {
    pub region: BoxRegion<T>,
    pub amplitude: T,
}

/// Control-input profile `b_i = sum_k amplitude_k * indicator(box_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputShape<T: Scalar> {
    pub boxes: Vec<WeightedBox<T>>,
}

impl<T: Scalar> InputShape<T> {
    /// Profile made of a single weighted box.
    pub fn single_box(region: BoxRegion<T>, amplitude: T) -> Self {
        Self { boxes: vec![WeightedBox { region, amplitude }] }
    }

    /// Checks every box against `domain`.
    pub fn validate(&self, domain: DomainSpec) -> Result<()> {
        for wb in &self.boxes {
            wb.region.validate(domain)?;
        }
        Ok(())
    }

    /// Pointwise value of the profile.
    pub fn eval(&self, point: &[T]) -> T {
        let mut v = T::zero();
        for wb in &self.boxes {
            if wb.region.contains(point) {
                v += wb.amplitude;
            }
        }
        v
    }
}

/// Index of one Dirichlet-Laplacian eigenfunction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeIndex {
    /// `sqrt(2) * sin(j*pi*xi)` on the interval, `j >= 1`.
    OneD(usize),
    /// `2 * sin(j*pi*xi1) * sin(k*pi*xi2)` on the square, `j, k >= 1`.
    TwoD(usize, usize),
}

impl ModeIndex {
    /// Domain the mode lives on.
    pub fn domain(&self) -> DomainSpec {
        match self {
            ModeIndex::OneD(_) => DomainSpec::Interval01,
            ModeIndex::TwoD(_, _) => DomainSpec::UnitSquare,
        }
    }

    /// Integer `lambda / pi^2` (that is `j^2` or `j^2 + k^2`); exact, so it
    /// doubles as the multiplicity-group key.
    pub fn lambda_factor(&self) -> usize {
        match self {
            ModeIndex::OneD(j) => j * j,
            ModeIndex::TwoD(j, k) => j * j + k * k,
        }
    }

    /// Laplacian eigenvalue `lambda = lambda_factor * pi^2`.
    pub fn lambda<T: Scalar>(&self) -> T {
        scalar::<T>(self.lambda_factor() as f64) * T::pi() * T::pi()
    }

    /// Integral of the L2-normalized eigenfunction over `region`.
    ///
    /// Closed form: per axis with index `m` and box edges `(a, b)`, the sine
    /// factor integrates to `(cos(m*pi*a) - cos(m*pi*b)) / (m*pi)`; the
    /// normalization contributes `sqrt(2)` per axis.
    pub fn box_integral<T: Scalar>(&self, region: &BoxRegion<T>) -> Result<T> {
        region.validate(self.domain())?;
        let axis_factor = |m: usize, a: T, b: T| -> T {
            let mp = scalar::<T>(m as f64) * T::pi();
            ((mp * a).cos() - (mp * b).cos()) / mp
        };
        let sqrt2 = scalar::<T>(2.0).sqrt();
        Ok(match self {
            ModeIndex::OneD(j) => sqrt2 * axis_factor(*j, region.lo[0], region.hi[0]),
            ModeIndex::TwoD(j, k) => {
                sqrt2 * axis_factor(*j, region.lo[0], region.hi[0])
                    * sqrt2
                    * axis_factor(*k, region.lo[1], region.hi[1])
            }
        })
    }
}

/// One eigenfunction together with its eigenvalue and multiplicity group.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianMode<T: Scalar> {
    pub index: ModeIndex,
    pub lambda: T,
    /// Ordinal of the eigenvalue group, ascending in `lambda`.
    pub group_id: usize,
}

/// All eigenfunctions sharing one Laplacian eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeGroup<T: Scalar> {
    pub group_id: usize,
    pub lambda: T,
    /// Members in lexicographic index order.
    pub members: Vec<ModeIndex>,
}

impl<T: Scalar> ModeGroup<T> {
    /// Eigenspace dimension.
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

/// Enumerates eigenvalue groups with indices up to `max_index`, ascending in
/// `lambda`. On the square, equal eigenvalues (`j^2 + k^2` ties) share a
/// group; grouping is exact because the key is an integer.
pub fn mode_groups<T: Scalar>(domain: DomainSpec, max_index: usize) -> Vec<ModeGroup<T>> {
    assert!(max_index >= 1, "max_index must be at least 1");
    let mut by_factor: BTreeMap<usize, Vec<ModeIndex>> = BTreeMap::new();
    match domain {
        DomainSpec::Interval01 => {
            for j in 1..=max_index {
                by_factor.insert(j * j, vec![ModeIndex::OneD(j)]);
            }
        }
        DomainSpec::UnitSquare => {
            for j in 1..=max_index {
                for k in 1..=max_index {
                    by_factor.entry(j * j + k * k).or_default().push(ModeIndex::TwoD(j, k));
                }
            }
        }
    }
    by_factor
        .into_iter()
        .enumerate()
        .map(|(group_id, (factor, mut members))| {
            members.sort();
            ModeGroup {
                group_id,
                lambda: scalar::<T>(factor as f64) * T::pi() * T::pi(),
                members,
            }
        })
        .collect()
}

/// Flat mode list in group order (see [`mode_groups`]).
pub fn laplacian_modes<T: Scalar>(domain: DomainSpec, max_index: usize) -> Vec<LaplacianMode<T>> {
    mode_groups::<T>(domain, max_index)
        .into_iter()
        .flat_map(|g| {
            let (lambda, group_id) = (g.lambda, g.group_id);
            g.members.into_iter().map(move |index| LaplacianMode { index, lambda, group_id })
        })
        .collect()
}

/// The two evolution-operator eigenvalues attached to one Laplacian
/// eigenvalue. `mu_plus` has the larger real part (real case) or the
/// positive imaginary part (complex case).
#[derive(Clone, Debug, PartialEq)]
pub struct AEigenpair<T: Scalar> {
    pub lambda: T,
    pub mu_plus: Complex<T>,
    pub mu_minus: Complex<T>,
}

/// Solves `mu^2 + (kappa + eta*lambda)*mu + lambda*(1 + eta*kappa) = 0`.
///
/// On the real branch the small-magnitude root is computed as
/// `product / large_root` to avoid the cancellation that the naive quadratic
/// formula suffers for large `lambda`.
pub fn a_eigenpair<T: Scalar>(lambda: T, params: &ModelParams<T>) -> AEigenpair<T> {
    let two = scalar::<T>(2.0);
    let s = params.kappa + params.eta * lambda; // -(mu+ + mu-)
    let p = lambda * (T::one() + params.eta * params.kappa); // mu+ * mu-
    let disc = s * s - scalar::<T>(4.0) * p;
    if disc >= T::zero() {
        let sq = disc.sqrt();
        let mu_minus = -(s + sq) / two;
        let mu_plus = if sq == T::zero() { mu_minus } else { p / mu_minus };
        AEigenpair {
            lambda,
            mu_plus: Complex::new(mu_plus, T::zero()),
            mu_minus: Complex::new(mu_minus, T::zero()),
        }
    } else {
        let re = -s / two;
        let im = (-disc).sqrt() / two;
        AEigenpair {
            lambda,
            mu_plus: Complex::new(re, im),
            mu_minus: Complex::new(re, -im),
        }
    }
}

/// Whether every eigenvalue with Laplacian eigenvalue `>= lambda` is
/// certified to have real part `< -omega`.
///
/// The maximal real part, as a function of `lambda`, decreases through the
/// small real branch and the complex branch, then increases along the large
/// real branch while staying below `-omega_zero < -omega`. Hence a single
/// evaluation at `lambda` certifies the whole tail.
fn tail_clear<T: Scalar>(lambda: T, params: &ModelParams<T>) -> bool {
    let pair = a_eigenpair(lambda, params);
    pair.mu_plus.re < -params.omega
}

/// Eigenvalue groups whose evolution eigenvalues reach the closed half-plane
/// `Re mu >= -omega`, enumerated over indices up to `max_index`.
///
/// Completeness is certified two ways, both required:
/// * the largest enumerated eigenvalue must sit on the real branch with both
///   roots strictly left of `-omega`, and
/// * the smallest eigenvalue *not* enumerable with `max_index` must already
///   satisfy the tail bound (this closes the gap square enumeration leaves,
///   where `(1, max_index+1)` is smaller than `(max_index, max_index)`).
pub fn unstable_index_set<T: Scalar>(
    params: &ModelParams<T>,
    domain: DomainSpec,
    max_index: usize,
) -> Result<Vec<ModeGroup<T>>> {
    params.validate()?;
    let groups = mode_groups::<T>(domain, max_index);
    let last = groups.last().expect("max_index >= 1 yields at least one group");

    let last_pair = a_eigenpair(last.lambda, params);
    let real_and_clear = last_pair.mu_plus.im == T::zero()
        && last_pair.mu_plus.re < -params.omega
        && last_pair.mu_minus.re < -params.omega;
    if !real_and_clear {
        return Err(Error::MaxIndexTooSmall {
            max_index,
            lambda: last.lambda.to_f64().unwrap_or(f64::NAN),
        });
    }

    let missing_factor = match domain {
        DomainSpec::Interval01 => (max_index + 1) * (max_index + 1),
        DomainSpec::UnitSquare => 1 + (max_index + 1) * (max_index + 1),
    };
    let lambda_missing = scalar::<T>(missing_factor as f64) * T::pi() * T::pi();
    if !tail_clear(lambda_missing, params) {
        return Err(Error::MaxIndexTooSmall {
            max_index,
            lambda: lambda_missing.to_f64().unwrap_or(f64::NAN),
        });
    }

    Ok(groups
        .into_iter()
        .filter(|g| {
            let pair = a_eigenpair(g.lambda, params);
            pair.mu_plus.re >= -params.omega || pair.mu_minus.re >= -params.omega
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn interval_params() -> ModelParams<f64> {
        ModelParams::new(0.01, 0.01, 1.0, 2.0, dmatrix![1.0]).unwrap()
    }

    fn square_params() -> ModelParams<f64> {
        ModelParams::new(0.005, 0.001, 0.5, 1.0, DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn omega_zero_values() {
        assert_eq!(interval_params().omega_zero(), 100.01);
        assert_eq!(square_params().omega_zero(), 200.001);
        let p = ModelParams::new(1.0, 1e-6, 0.5, 1.0, dmatrix![1.0]).unwrap();
        assert_relative_eq!(p.omega_zero(), 1.0, max_relative = 1e-5);
    }

    #[test]
    fn validate_rejects_infeasible_omega() {
        let at_ceiling = ModelParams::new(0.01, 0.01, 100.01, 1.0, dmatrix![1.0]);
        assert!(matches!(at_ceiling, Err(Error::OmegaInfeasible { .. })));
        let above = ModelParams::new(0.01, 0.01, 150.0, 1.0, dmatrix![1.0]);
        assert!(matches!(above, Err(Error::OmegaInfeasible { .. })));
        assert!(interval_params().validate().is_ok());
    }

    #[test]
    fn validate_rejects_bad_constants() {
        assert!(matches!(
            ModelParams::new(-0.01, 0.01, 1.0, 1.0, dmatrix![1.0]),
            Err(Error::InvalidConstant(_))
        ));
        assert!(matches!(
            ModelParams::new(0.01, 0.01, 1.0, 0.0, dmatrix![1.0]),
            Err(Error::InvalidConstant(_))
        ));
        assert!(matches!(
            ModelParams::new(0.01, 0.01, 1.0, 1.0, dmatrix![-1.0]),
            Err(Error::InvalidConstant(_))
        ));
        assert!(matches!(
            ModelParams::new(0.01, 0.01, 1.0, 1.0, dmatrix![1.0, 0.5; 0.0, 1.0]),
            Err(Error::InvalidConstant(_))
        ));
    }

    #[test]
    fn interval_modes_are_sorted_singletons() {
        let modes = laplacian_modes::<f64>(DomainSpec::Interval01, 4);
        assert_eq!(modes.len(), 4);
        assert_relative_eq!(modes[0].lambda, std::f64::consts::PI.powi(2), max_relative = 1e-15);
        assert!(modes.windows(2).all(|w| w[0].lambda < w[1].lambda));
    }

    #[test]
    fn square_modes_group_equal_eigenvalues() {
        let groups = mode_groups::<f64>(DomainSpec::UnitSquare, 2);
        // factors: 2, 5 (twice), 8
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0].members, vec![ModeIndex::TwoD(1, 1)]);
        assert_eq!(groups[1].members, vec![ModeIndex::TwoD(1, 2), ModeIndex::TwoD(2, 1)]);
        assert_eq!(groups[1].multiplicity(), 2);
        assert_relative_eq!(
            groups[0].lambda,
            2.0 * std::f64::consts::PI.powi(2),
            max_relative = 1e-15
        );
    }

    #[test]
    fn eigenpair_matches_reported_values() {
        let p = interval_params();
        let pair = a_eigenpair(std::f64::consts::PI.powi(2), &p);
        assert!((pair.mu_plus.re - (-0.05)).abs() < 0.005);
        assert!((pair.mu_plus.im - 3.14).abs() < 0.005);

        let q = square_params();
        let pair2 = a_eigenpair(2.0 * std::f64::consts::PI.powi(2), &q);
        assert!((pair2.mu_plus.re - (-0.05)).abs() < 0.005);
        assert!((pair2.mu_plus.im - 4.443).abs() < 0.005);

        let pair3 = a_eigenpair(9.0 * std::f64::consts::PI.powi(2), &p);
        assert!((pair3.mu_plus.re - (-0.449)).abs() < 0.005);
        assert!((pair3.mu_plus.im - 9.41).abs() < 0.005);
    }

    #[test]
    fn double_root_at_zero_discriminant() {
        // Pick eta, kappa, then solve for lambda making the discriminant zero:
        // (kappa + eta*lambda)^2 = 4*lambda*(1 + eta*kappa).
        let p = ModelParams::new(1.0, 1.0, 0.5, 1.0, dmatrix![1.0]).unwrap();
        // (1 + lambda)^2 = 8*lambda  =>  lambda = 3 + 2*sqrt(2) (larger root)
        let lambda = 3.0 + 2.0 * 2.0f64.sqrt();
        let pair = a_eigenpair(lambda, &p);
        assert_eq!(pair.mu_plus, pair.mu_minus);
        assert_eq!(pair.mu_plus.im, 0.0);
    }

    #[test]
    fn unstable_set_interval() {
        let p = interval_params();
        let set = unstable_index_set(&p, DomainSpec::Interval01, 128).unwrap();
        let js: Vec<usize> = set
            .iter()
            .map(|g| match g.members[0] {
                ModeIndex::OneD(j) => j,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(js, vec![1, 2, 3, 4]);
    }

    #[test]
    fn unstable_set_square_has_eight_groups() {
        let q = square_params();
        let set = unstable_index_set(&q, DomainSpec::UnitSquare, 128).unwrap();
        let factors: Vec<usize> = set.iter().map(|g| g.members[0].lambda_factor()).collect();
        assert_eq!(factors, vec![2, 5, 8, 10, 13, 17, 18, 20]);
        let mults: Vec<usize> = set.iter().map(|g| g.multiplicity()).collect();
        assert_eq!(mults, vec![1, 2, 1, 2, 2, 2, 1, 2]);
    }

    #[test]
    fn unstable_set_empty_for_tiny_omega() {
        let p = ModelParams::new(0.01, 0.01, 0.001, 1.0, dmatrix![1.0]).unwrap();
        let set = unstable_index_set(&p, DomainSpec::Interval01, 1000).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn short_enumeration_is_rejected() {
        // With max_index = 8 the largest 1D eigenvalue is still on the
        // complex branch for these constants, so completeness cannot be
        // certified.
        let p = interval_params();
        let err = unstable_index_set(&p, DomainSpec::Interval01, 8).unwrap_err();
        assert!(matches!(err, Error::MaxIndexTooSmall { max_index: 8, .. }));
    }

    #[test]
    fn box_integral_closed_form() {
        // Constant profile over the whole interval annihilates even modes.
        let whole = BoxRegion::interval(0.0, 1.0);
        let v: f64 = ModeIndex::OneD(2).box_integral(&whole).unwrap();
        assert!(v.abs() < 1e-15);
        // First-mode integral over (0, 1/2): sqrt(2)*(1 - cos(pi/2))/pi = sqrt(2)/pi.
        let half = BoxRegion::interval(0.0, 0.5);
        let v1: f64 = ModeIndex::OneD(1).box_integral(&half).unwrap();
        assert_relative_eq!(v1, 2.0f64.sqrt() / std::f64::consts::PI, max_relative = 1e-14);
    }

    #[test]
    fn shape_eval_sums_overlapping_boxes() {
        let shape = InputShape {
            boxes: vec![
                WeightedBox { region: BoxRegion::interval(0.0, 0.6), amplitude: 2.0 },
                WeightedBox { region: BoxRegion::interval(0.4, 1.0), amplitude: 3.0 },
            ],
        };
        assert_eq!(shape.eval(&[0.2]), 2.0);
        assert_eq!(shape.eval(&[0.5]), 5.0);
        assert_eq!(shape.eval(&[0.8]), 3.0);
    }
}
