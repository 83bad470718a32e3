//! Generating matrices of the count urn and their joint diagonalization.
//!
//! With counts ordered (odd steps, even steps), the conditional law of the
//! next step is `H_{n+1} Y_n / n` where `H_{n+1}` alternates between
//!
//! ```text
//! H_odd = | A  B |      H_even = | 0  0 |
//!         | 0  0 |               | B  A |
//! ```
//!
//! and `A = αI + (1-α)/m 11ᵀ`, `B = βI + (1-β)/m 11ᵀ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{MemoryParams, RegimeKind};
use crate::linalg::Matrix;

/// Tolerance of the internal diagonalization check.
pub const SPECTRAL_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GeneratorMatrices {
    pub m: usize,
    pub a: Matrix,
    pub b: Matrix,
    pub h_odd: Matrix,
    pub h_even: Matrix,
    pub h: Matrix,
}

fn persistence_block(m: usize, x: f64) -> Matrix {
    let off = (1.0 - x) / m as f64;
    Matrix::from_fn(m, m, |i, j| if i == j { x + off } else { off })
}

pub fn build_generators(params: &MemoryParams) -> GeneratorMatrices {
    let m = params.m();
    let a = persistence_block(m, params.alpha());
    let b = persistence_block(m, params.beta());
    let mut h_odd = Matrix::zeros(2 * m, 2 * m);
    h_odd.set_block(0, 0, &a);
    h_odd.set_block(0, m, &b);
    let mut h_even = Matrix::zeros(2 * m, 2 * m);
    h_even.set_block(m, 0, &b);
    h_even.set_block(m, m, &a);
    let h = h_odd.add(&h_even).scale(0.5);
    GeneratorMatrices {
        m,
        a,
        b,
        h_odd,
        h_even,
        h,
    }
}

impl GeneratorMatrices {
    /// `H_n` for a step taken at time `n >= 2`.
    pub fn at_time(&self, n: u64) -> &Matrix {
        if n % 2 == 1 {
            &self.h_odd
        } else {
            &self.h_even
        }
    }

    /// Adds `eps` to the (0, 0) entry of `H_odd` and rebuilds `H`. Used as a
    /// negative control for the validation suites.
    pub fn perturbed(&self, eps: f64) -> Self {
        let mut out = self.clone();
        out.h_odd[(0, 0)] += eps;
        out.h = out.h_odd.add(&out.h_even).scale(0.5);
        out
    }
}

#[derive(Clone, Debug)]
pub struct SpectralBasis {
    pub q: Matrix,
    pub p: Matrix,
}

/// Orthonormal basis u = 1/√m, w_r = (1_r, -r, 0)/√(r(r+1)) as columns.
fn helmert_basis(m: usize) -> Matrix {
    let mut q = Matrix::zeros(m, m);
    let u = 1.0 / (m as f64).sqrt();
    for i in 0..m {
        q[(i, 0)] = u;
    }
    for r in 1..m {
        let scale = 1.0 / ((r * (r + 1)) as f64).sqrt();
        for i in 0..r {
            q[(i, r)] = scale;
        }
        q[(r, r)] = -(r as f64) * scale;
    }
    q
}

/// Eigenvalues of `H` in the order of the diagonal of `PᵀHP`:
/// `(1, γ (m-1 times), 0, δ (m-1 times))`.
pub fn predicted_eigenvalues(params: &MemoryParams) -> Vec<f64> {
    let m = params.m();
    let mut out = Vec::with_capacity(2 * m);
    out.push(1.0);
    out.extend(std::iter::repeat_n(params.gamma(), m - 1));
    out.push(0.0);
    out.extend(std::iter::repeat_n(params.delta(), m - 1));
    out
}

/// Expected forms of `PᵀH_oddP`, `PᵀH_evenP` and `PᵀHP`.
pub fn predicted_conjugates(params: &MemoryParams) -> [Matrix; 3] {
    let m = params.m();
    let mut top = vec![params.gamma(); m];
    top[0] = 1.0;
    let mut bottom = vec![params.delta(); m];
    bottom[0] = 0.0;
    let dg = Matrix::diag(&top);
    let dd = Matrix::diag(&bottom);
    let mut odd = Matrix::zeros(2 * m, 2 * m);
    odd.set_block(0, 0, &dg);
    odd.set_block(0, m, &dd);
    odd.set_block(m, 0, &dg);
    odd.set_block(m, m, &dd);
    let mut even = Matrix::zeros(2 * m, 2 * m);
    even.set_block(0, 0, &dg);
    even.set_block(0, m, &dd.scale(-1.0));
    even.set_block(m, 0, &dg.scale(-1.0));
    even.set_block(m, m, &dd);
    let full = Matrix::diag(&predicted_eigenvalues(params));
    [odd, even, full]
}

/// Largest deviation of the constructive basis from the diagonalization
/// identities for the given generator matrices.
pub fn diagonalization_residual(basis: &SpectralBasis, gens: &GeneratorMatrices, params: &MemoryParams) -> f64 {
    let m = params.m();
    let q = &basis.q;
    let qt = q.transpose();
    let mut a_diag = vec![params.alpha(); m];
    a_diag[0] = 1.0;
    let mut b_diag = vec![params.beta(); m];
    b_diag[0] = 1.0;
    let pt = basis.p.transpose();
    let conj = |h: &Matrix| pt.matmul(h).matmul(&basis.p);
    let [odd, even, full] = predicted_conjugates(params);
    [
        qt.matmul(q).max_abs_diff(&Matrix::identity(m)),
        qt.matmul(&gens.a).matmul(q).max_abs_diff(&Matrix::diag(&a_diag)),
        qt.matmul(&gens.b).matmul(q).max_abs_diff(&Matrix::diag(&b_diag)),
        pt.matmul(&basis.p).max_abs_diff(&Matrix::identity(2 * m)),
        conj(&gens.h_odd).max_abs_diff(&odd),
        conj(&gens.h_even).max_abs_diff(&even),
        conj(&gens.h).max_abs_diff(&full),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn build_spectral_basis(params: &MemoryParams) -> Result<SpectralBasis> {
    let m = params.m();
    let q = helmert_basis(m);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut p = Matrix::zeros(2 * m, 2 * m);
    p.set_block(0, 0, &q.scale(s));
    p.set_block(0, m, &q.scale(s));
    p.set_block(m, 0, &q.scale(s));
    p.set_block(m, m, &q.scale(-s));
    let basis = SpectralBasis { q, p };
    let residual = diagonalization_residual(&basis, &build_generators(params), params);
    if residual > SPECTRAL_TOL {
        return Err(Error::DiagonalizationCheckFailed(residual));
    }
    Ok(basis)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub regime: RegimeKind,
    pub boundary_flags: Vec<&'static str>,
}

pub fn spectral_report(params: &MemoryParams) -> SpectralReport {
    let (gamma, delta) = (params.gamma(), params.delta());
    let mut boundary_flags = Vec::new();
    if gamma == 1.0 {
        boundary_flags.push("gamma_is_one");
    }
    if gamma == -1.0 {
        boundary_flags.push("gamma_is_minus_one");
    }
    if delta == 1.0 {
        boundary_flags.push("delta_is_one");
    }
    if delta == -1.0 {
        boundary_flags.push("delta_is_minus_one");
    }
    SpectralReport {
        eigenvalues: predicted_eigenvalues(params),
        gamma,
        delta,
        regime: params.regime().kind,
        boundary_flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn persistence_identity_and_projector() {
        let g = build_generators(&MemoryParams::new(1.0, 0.3, 2).unwrap());
        assert_eq!(g.a, Matrix::identity(2));
        let g = build_generators(&MemoryParams::new(1.0 / 3.0, 0.5, 3).unwrap());
        assert!(g.a.max_abs_diff(&Matrix::from_fn(3, 3, |_, _| 1.0 / 3.0)) < 1e-15);
    }

    #[test]
    fn explicit_a_for_p_08() {
        let g = build_generators(&MemoryParams::new(0.8, 0.2, 3).unwrap());
        let want = Matrix::from_fn(3, 3, |i, j| if i == j { 0.8 } else { 0.1 });
        assert!(g.a.max_abs_diff(&want) < 1e-15);
        for s in g.a.column_sums() {
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn m2_basis() {
        let basis = build_spectral_basis(&MemoryParams::new(0.3, 0.6, 2).unwrap()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let want = Matrix::from_fn(2, 2, |i, j| if i == 1 && j == 1 { -s } else { s });
        assert!(basis.q.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn boundary_flags() {
        let r = spectral_report(&MemoryParams::new(0.0, 0.0, 2).unwrap());
        assert_eq!(r.gamma, -1.0);
        assert_eq!(r.eigenvalues, vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!(r.boundary_flags, vec!["gamma_is_minus_one"]);

        let r = spectral_report(&MemoryParams::new(0.2, 0.2, 5).unwrap());
        assert!(r.eigenvalues[1..5].iter().all(|x| x.abs() < 1e-15));
        assert!(r.boundary_flags.is_empty());

        let r = spectral_report(&MemoryParams::new(0.8, 0.2, 3).unwrap());
        let want = [1.0, 0.25, 0.25, 0.0, 0.45, 0.45];
        for (a, b) in r.eigenvalues.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["regime"], "diffusive");
    }

    #[test]
    fn perturbation_breaks_diagonalization() {
        let params = MemoryParams::new(0.8, 0.2, 3).unwrap();
        let basis = build_spectral_basis(&params).unwrap();
        let gens = build_generators(&params).perturbed(1e-6);
        assert!(diagonalization_residual(&basis, &gens, &params) > 1e-7);
    }

    fn eigenvalues_sorted(h: &Matrix) -> Vec<f64> {
        let n = h.rows();
        let dm = nalgebra::DMatrix::from_row_slice(n, n, h.as_slice());
        let mut ev: Vec<f64> = dm.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    proptest! {
        #[test]
        fn generator_invariants(p in 0.0f64..=1.0, q in 0.0f64..=1.0, m in 2usize..9) {
            let params = MemoryParams::new(p, q, m).unwrap();
            let g = build_generators(&params);
            for h in [&g.h_odd, &g.h_even, &g.h] {
                for s in h.column_sums() {
                    prop_assert!((s - 1.0).abs() <= 1e-14);
                }
            }
            for blk in [&g.a, &g.b] {
                prop_assert!(blk.as_slice().iter().all(|&x| x >= 0.0));
            }
            let basis = build_spectral_basis(&params).unwrap();
            prop_assert!(diagonalization_residual(&basis, &g, &params) <= 1e-12);

            // general symmetric eigensolver cross-check
            let mut want = predicted_eigenvalues(&params);
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in eigenvalues_sorted(&g.h).iter().zip(&want) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }

        #[test]
        fn h_odd_maps_block_constant_vectors(a in -5.0f64..5.0, b in -5.0f64..5.0, p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
            let params = MemoryParams::new(p, q, 4).unwrap();
            let g = build_generators(&params);
            let mut y = vec![a; 4];
            y.extend(vec![b; 4]);
            let out = g.h_odd.mul_vec(&y);
            for (i, x) in out.iter().enumerate() {
                let want = if i < 4 { a + b } else { 0.0 };
                prop_assert!((x - want).abs() <= 1e-12);
            }
        }
    }
}
