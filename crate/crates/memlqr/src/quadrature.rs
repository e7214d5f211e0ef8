//! Composite Gauss-Legendre quadrature used for mesh-independent integrals.
//!
//! Five nodes per panel integrate polynomials up to degree nine exactly, so
//! products of piecewise-linear functions (degree two) are integrated
//! without error as long as every kink lies on a panel boundary.

use crate::{scalar, Scalar};

/// Gauss-Legendre nodes on `[-1, 1]`, five points.
pub const GAUSS5_NODES: [f64; 5] = [
    -0.9061798459386640,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.9061798459386640,
];

/// Gauss-Legendre weights matching [`GAUSS5_NODES`].
pub const GAUSS5_WEIGHTS: [f64; 5] = [
    0.23692688505618908,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618908,
];

/// Integrates `f` over `[lo, hi]` with a single five-point panel.
pub fn gauss5<T: Scalar>(lo: T, hi: T, f: impl Fn(T) -> T) -> T {
    let half = scalar::<T>(0.5);
    let mid = (lo + hi) * half;
    let hw = (hi - lo) * half;
    let mut acc = T::zero();
    for i in 0..5 {
        let x = mid + hw * scalar::<T>(GAUSS5_NODES[i]);
        acc += scalar::<T>(GAUSS5_WEIGHTS[i]) * f(x);
    }
    acc * hw
}

/// Integrates `f` over the mesh described by sorted `breaks`, one
/// five-point panel per interval.
pub fn gauss5_mesh<T: Scalar>(breaks: &[T], f: impl Fn(T) -> T) -> T {
    let mut acc = T::zero();
    for w in breaks.windows(2) {
        acc += gauss5(w[0], w[1], &f);
    }
    acc
}

/// Integrates `f` over the rectangle `[lo.0, hi.0] x [lo.1, hi.1]` with a
/// tensorized five-by-five panel.
pub fn gauss5_rect<T: Scalar>(lo: (T, T), hi: (T, T), f: impl Fn(T, T) -> T) -> T {
    let half = scalar::<T>(0.5);
    let (mx, my) = ((lo.0 + hi.0) * half, (lo.1 + hi.1) * half);
    let (wx, wy) = ((hi.0 - lo.0) * half, (hi.1 - lo.1) * half);
    let mut acc = T::zero();
    for i in 0..5 {
        let x = mx + wx * scalar::<T>(GAUSS5_NODES[i]);
        for j in 0..5 {
            let y = my + wy * scalar::<T>(GAUSS5_NODES[j]);
            acc += scalar::<T>(GAUSS5_WEIGHTS[i] * GAUSS5_WEIGHTS[j]) * f(x, y);
        }
    }
    acc * wx * wy
}

/// Sorted union of the uniform meshes `{i/n_a}` and `{j/n_b}` on `[0, 1]`.
///
/// Duplicates are detected in integer arithmetic (`i*n_b == j*n_a`), so the
/// result is exact and deterministic.
pub fn union_breakpoints<T: Scalar>(n_a: usize, n_b: usize) -> Vec<T> {
    assert!(n_a >= 1 && n_b >= 1, "mesh sizes must be positive");
    let mut out = Vec::with_capacity(n_a + n_b + 1);
    let (mut i, mut j) = (0usize, 0usize);
    while i <= n_a || j <= n_b {
        let (ib, jb) = (i * n_b, j * n_a);
        if i <= n_a && (j > n_b || ib <= jb) {
            out.push(scalar::<T>(i as f64 / n_a as f64));
            if ib == jb {
                j += 1;
            }
            i += 1;
        } else {
            out.push(scalar::<T>(j as f64 / n_b as f64));
            j += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn degree_nine_polynomial_is_exact() {
        // int_0^1 x^9 dx = 1/10
        let got: f64 = gauss5(0.0, 1.0, |x| x.powi(9));
        assert_relative_eq!(got, 0.1, max_relative = 1e-14);
    }

    #[test]
    fn composite_mesh_splits_kinks() {
        // |x - 1/2| has a kink; splitting there makes Gauss exact.
        let breaks = [0.0, 0.5, 1.0];
        let got: f64 = gauss5_mesh(&breaks, |x| (x - 0.5).abs());
        assert_relative_eq!(got, 0.25, max_relative = 1e-14);
    }

    #[test]
    fn rectangle_rule_matches_product() {
        let got: f64 = gauss5_rect((0.0, 0.0), (1.0, 1.0), |x, y| x * x * y);
        assert_relative_eq!(got, 1.0 / 6.0, max_relative = 1e-14);
    }

    #[test]
    fn union_mesh_is_sorted_and_deduplicated() {
        let b: Vec<f64> = union_breakpoints(2, 3);
        assert_eq!(b, vec![0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0]);
        let same: Vec<f64> = union_breakpoints(4, 4);
        assert_eq!(same.len(), 5);
        let coarse_in_fine: Vec<f64> = union_breakpoints(2, 4);
        assert_eq!(coarse_in_fine.len(), 5);
    }
}
