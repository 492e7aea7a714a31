//! Reduced polarization state after one coupling block, and the trace form
//! of the single-block weak value.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::protocol::component_overlap;
use crate::scalar::Scalar;

/// 2×2 complex matrix in the `{|H⟩, |V⟩}` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2<T> {
    pub entries: [[Complex<T>; 2]; 2],
}

impl<T: Scalar> DensityMatrix2<T> {
    fn real(m: [[T; 2]; 2]) -> Self {
        let c = |v: T| Complex::new(v, T::zero());
        Self {
            entries: [[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]],
        }
    }

    /// Pure-state projector `|ψ⟩⟨ψ|` for `ψ = cos θ|H⟩ + sin θ|V⟩`.
    pub fn projector(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self::real([[c * c, c * s], [s * c, s * s]])
    }

    /// `σ₃ = |H⟩⟨H| − |V⟩⟨V|`.
    pub fn sigma3() -> Self {
        Self::real([[T::one(), T::zero()], [T::zero(), -T::one()]])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let a = &self.entries;
        let b = &rhs.entries;
        let mut out = [[Complex::new(T::zero(), T::zero()); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { entries: out }
    }

    pub fn trace(&self) -> Complex<T> {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        let e = &self.entries;
        (e[0][0].im).abs() <= tol
            && (e[1][1].im).abs() <= tol
            && (e[0][1] - e[1][0].conj()).norm() <= tol
    }

    /// Eigenvalues of a Hermitian 2×2 matrix, ascending.
    pub fn eigenvalues(&self) -> [T; 2] {
        let e = &self.entries;
        let a = e[0][0].re;
        let d = e[1][1].re;
        let off = e[0][1].norm();
        let half_gap = ((a - d) * (a - d) / T::of(4.0) + off * off).sqrt();
        let mid = (a + d) / T::of(2.0);
        [mid - half_gap, mid + half_gap]
    }
}

/// Polarization state after one block with the pointer traced out: the
/// pre-selected `cos α|H⟩ + sin α|V⟩` whose coherence is damped by the
/// overlap `exp(−1/(2Δ²))` of the two pointer branches.
pub fn build_rho_alpha<T: Scalar>(alpha: T, delta: T) -> Result<DensityMatrix2<T>> {
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "pointer width must be positive, got {}",
            delta.to_f64_lossy()
        )));
    }
    let (s, c) = alpha.sin_cos();
    let coherence = component_overlap(1, delta) * s * c;
    Ok(DensityMatrix2::real([
        [c * c, coherence],
        [coherence, s * s],
    ]))
}

/// `tr(Π_β σ₃ ρ_α) / tr(Π_β ρ_α)`.
pub fn wv_single_trace<T: Scalar>(alpha: T, beta: T, delta: T) -> Result<T> {
    let rho = build_rho_alpha(alpha, delta)?;
    let post = DensityMatrix2::projector(beta);
    let num = post
        .matmul(&DensityMatrix2::sigma3())
        .matmul(&rho)
        .trace()
        .re;
    let den = post.matmul(&rho).trace().re;
    if !(den > T::of(crate::protocol::DENOMINATOR_CUTOFF)) {
        return Err(Error::NearOrthogonalPostselection {
            denominator: den.to_f64_lossy(),
            cutoff: crate::protocol::DENOMINATOR_CUTOFF,
        });
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn pure_h_state() {
        let rho = build_rho_alpha(0.0, 1.3).unwrap();
        assert_eq!(rho.entries[0][0].re, 1.0);
        assert_eq!(rho.entries[1][1].re, 0.0);
        assert_eq!(rho.entries[0][1].re, 0.0);
    }

    #[test]
    fn weak_coupling_limit_is_pure_diagonal_state() {
        let rho = build_rho_alpha(FRAC_PI_4, 1e9).unwrap();
        for row in rho.entries {
            for v in row {
                assert!((v.re - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn coherence_at_unit_width() {
        let rho = build_rho_alpha(FRAC_PI_4, 1.0f64).unwrap();
        assert!((rho.entries[0][1].re - 0.303_265_329_856_316_7).abs() < 1e-15);
        assert!(build_rho_alpha(0.3, 0.0).is_err());
        assert!(build_rho_alpha(0.3, -2.0).is_err());
    }

    #[test]
    fn rho_is_a_valid_state() {
        for &(a, d) in &[
            (0.1f64, 0.3f64),
            (0.62, 5.84),
            (2.0, 1.0),
            (-1.3, 0.05),
            (0.52, 3.09),
        ] {
            let rho = build_rho_alpha(a, d).unwrap();
            assert!(rho.is_hermitian(1e-12));
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            assert!(rho.eigenvalues()[0] >= -1e-12);
        }
    }

    #[test]
    fn trace_form_examples() {
        assert!((wv_single_trace(0.0f64, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(wv_single_trace(FRAC_PI_4, FRAC_PI_4, 2.0f64).unwrap().abs() < 1e-15);
        assert!(
            (wv_single_trace(0.62f64, 2.53, 5.84).unwrap() - 2.839_334_459_687_389).abs() < 1e-12
        );
    }
}
