//! Finite-rank test for stabilizability at a prescribed decay rate.
//!
//! Only finitely many evolution eigenvalues sit in the closed half-plane
//! `Re mu >= -omega`. Feedback can push them left if and only if, for every
//! Laplacian eigenvalue in that set, the matrix of input-profile moments
//! against the eigenspace has full column rank.

use crate::model::{unstable_index_set, DomainSpec, InputShape, ModeIndex, ModelParams};
use crate::{scalar, Error, Result, Scalar};
use nalgebra::{DMatrix, DVector, SVD};

/// Relative singular-value cutoff for the numerical rank decision.
pub const RANK_RTOL: f64 = 1e-12;

/// Moments of every input profile against one L2-normalized eigenfunction;
/// component `i` is the L2 inner product of profile `i` with the mode.
pub fn bstar_on_mode<T: Scalar>(shapes: &[InputShape<T>], mode: ModeIndex) -> Result<DVector<T>> {
    let mut v = DVector::<T>::zeros(shapes.len());
    for (i, shape) in shapes.iter().enumerate() {
        let mut acc = T::zero();
        for wb in &shape.boxes {
            acc += wb.amplitude * mode.box_integral(&wb.region)?;
        }
        v[i] = acc;
    }
    Ok(v)
}

/// Rank of `m` with cutoff `max(nrows, ncols) * sigma_max * RANK_RTOL`.
pub fn numerical_rank<T: Scalar>(m: &DMatrix<T>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = SVD::new(m.clone(), false, false);
    let sigma_max = svd.singular_values.max();
    if sigma_max == T::zero() {
        return 0;
    }
    let dim = m.nrows().max(m.ncols());
    let eps = scalar::<T>(dim as f64) * sigma_max * scalar::<T>(RANK_RTOL);
    svd.singular_values.iter().filter(|s| **s > eps).count()
}

/// Rank diagnosis for one eigenvalue group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupRank<T: Scalar> {
    pub group_id: usize,
    pub lambda: T,
    /// Eigenspace members in lexicographic index order (the column order of
    /// `bstar`).
    pub members: Vec<ModeIndex>,
    /// `input_count x multiplicity` moment matrix; row `i` is input `i`,
    /// column `j` is eigenfunction `members[j]`.
    pub bstar: DMatrix<T>,
    pub rank: usize,
    /// Eigenspace dimension the rank must reach.
    pub required_rank: usize,
    /// Whether `rank == required_rank`.
    pub pass: bool,
}

/// Outcome of the rank test over every group in the closed half-plane.
#[derive(Clone, Debug, PartialEq)]
pub struct RankReport<T: Scalar> {
    pub omega: T,
    pub groups: Vec<GroupRank<T>>,
    /// True when every group passes; the system is then stabilizable with
    /// decay rate `omega`.
    pub stabilizable: bool,
}

/// Runs the rank test for `params.omega` over inputs `shapes`.
///
/// `max_index` bounds the eigenfunction enumeration; it must be large
/// enough to certify that no group outside the enumeration reaches the
/// half-plane (see [`unstable_index_set`]).
pub fn hautus_check<T: Scalar>(
    params: &ModelParams<T>,
    domain: DomainSpec,
    shapes: &[InputShape<T>],
    max_index: usize,
) -> Result<RankReport<T>> {
    if shapes.is_empty() {
        return Err(Error::DimensionMismatch("at least one input shape is required".into()));
    }
    for shape in shapes {
        shape.validate(domain)?;
    }
    let groups = unstable_index_set(params, domain, max_index)?;
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let k = g.multiplicity();
        let m = shapes.len();
        let mut bstar = DMatrix::<T>::zeros(m, k);
        for (col, index) in g.members.iter().enumerate() {
            bstar.set_column(col, &bstar_on_mode(shapes, *index)?);
        }
        let rank = numerical_rank(&bstar);
        out.push(GroupRank {
            group_id: g.group_id,
            lambda: g.lambda,
            members: g.members,
            bstar,
            rank,
            required_rank: k,
            pass: rank == k,
        });
    }
    let stabilizable = out.iter().all(|g| g.pass);
    Ok(RankReport { omega: params.omega, groups: out, stabilizable })
}
