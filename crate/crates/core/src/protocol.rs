//! Closed-form analytic layer of the sequential weak measurement.
//!
//! A polarization qubit passes `n` identical blocks. Each block prepares
//! `cos α|H⟩ + sin α|V⟩`, translates the shared Gaussian pointer by +1 (for
//! `|H⟩`) or −1 (for `|V⟩`), and keeps the photon only if it passes the
//! projection onto `cos β|H⟩ + sin β|V⟩`. Conditioned on passing every block
//! the pointer is a coherent superposition of `n + 1` Gaussians at shifts
//! `2k − n` with amplitudes `C(n, k) μ^k ν^(n−k)`, where
//! `μ = cos α cos β` and `ν = sin α sin β`.
//!
//! Pointer moments follow from Gaussian overlap integrals between the
//! shifted copies; the overlap of components `k` and `l` is
//! `γ_kl = exp(−(k − l)² / (2Δ²))`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported number of blocks; keeps `C(n, k)` exact in `u64`.
pub const MAX_BLOCKS: u32 = 60;

/// Post-selection denominators at or below this value are rejected.
pub const DENOMINATOR_CUTOFF: f64 = 1e-12;

/// Experiment tuple: block count, pre- and post-selection angles (radians),
/// and the initial pointer width in eigenvalue units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams<T> {
    n: u32,
    alpha: T,
    beta: T,
    delta: T,
}

impl<T: Scalar> ProtocolParams<T> {
    pub fn new(n: u32, alpha: T, beta: T, delta: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if n > MAX_BLOCKS {
            return Err(Error::InvalidParameter(format!(
                "n = {n} exceeds the supported maximum {MAX_BLOCKS}"
            )));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter("angles must be finite".into()));
        }
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pointer width must be positive and finite, got {}",
                delta.to_f64_lossy()
            )));
        }
        Ok(Self {
            n,
            alpha,
            beta,
            delta,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn with_beta(&self, beta: T) -> Result<Self> {
        Self::new(self.n, self.alpha, beta, self.delta)
    }

    /// Eigenvalues of the summed observable: `−n, −n + 2, …, n`.
    pub fn spectrum(&self) -> impl Iterator<Item = i64> {
        let n = i64::from(self.n);
        (0..=n).map(move |k| 2 * k - n)
    }
}

/// Pre/post-selection overlaps `μ = cos α cos β`, `ν = sin α sin β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingWeights<T> {
    pub mu: T,
    pub nu: T,
}

pub fn coupling_weights<T: Scalar>(params: &ProtocolParams<T>) -> CouplingWeights<T> {
    weights_from_angles(params.alpha, params.beta)
}

pub(crate) fn weights_from_angles<T: Scalar>(alpha: T, beta: T) -> CouplingWeights<T> {
    CouplingWeights {
        mu: alpha.cos() * beta.cos(),
        nu: alpha.sin() * beta.sin(),
    }
}

/// Binomial coefficient in exact integer arithmetic (`n ≤ 60`).
pub fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    u64::try_from(c).expect("binomial coefficient overflows u64")
}

/// Overlap of two unit-shift pointer components `gap` blocks apart:
/// `exp(−gap² / (2Δ²))`.
pub(crate) fn component_overlap<T: Scalar>(gap: u32, delta: T) -> T {
    let g = T::of_u64(u64::from(gap) * u64::from(gap));
    (-g / (T::of(2.0) * delta * delta)).exp()
}

/// Unnormalized pointer amplitudes `C(n, k) μ^k ν^(n−k)`, `k = 0..=n`.
fn component_amplitudes<T: Scalar>(n: u32, w: CouplingWeights<T>) -> Vec<T> {
    (0..=n)
        .map(|k| T::of_u64(binomial(n, k)) * w.mu.powi(k as i32) * w.nu.powi((n - k) as i32))
        .collect()
}

/// The three double sums sharing the weights `C(n,k)C(n,l) μ^(k+l) ν^(2n−k−l) γ_kl`.
#[derive(Debug, Clone, Copy)]
struct BinomialSums<T> {
    norm: T,
    first: T,
    second: T,
}

fn binomial_sums<T: Scalar>(params: &ProtocolParams<T>) -> BinomialSums<T> {
    let n = params.n;
    let delta_sq = params.delta * params.delta;
    let a = component_amplitudes(n, coupling_weights(params));
    let centre = |k: u32, l: u32| T::of_i64(i64::from(k) + i64::from(l) - i64::from(n));

    let mut norm = T::zero();
    let mut first = T::zero();
    let mut second = T::zero();
    // diagonal terms, then each symmetric off-diagonal pair counted twice
    for k in 0..=n {
        let t = a[k as usize] * a[k as usize];
        let c = centre(k, k);
        norm = norm + t;
        first = first + c * t;
        second = second + (c * c + delta_sq) * t;
    }
    for k in 0..=n {
        for l in (k + 1)..=n {
            let t = T::of(2.0)
                * (a[k as usize] * a[l as usize] * component_overlap(l - k, params.delta));
            let c = centre(k, l);
            norm = norm + t;
            first = first + c * t;
            second = second + (c * c + delta_sq) * t;
        }
    }
    BinomialSums {
        norm,
        first,
        second,
    }
}

fn checked_denominator<T: Scalar>(den: T) -> Result<T> {
    if den > T::of(DENOMINATOR_CUTOFF) {
        Ok(den)
    } else {
        Err(Error::NearOrthogonalPostselection {
            denominator: den.to_f64_lossy(),
            cutoff: DENOMINATOR_CUTOFF,
        })
    }
}

/// Weak value of the summed observable after `n` blocks, equal to the mean
/// pointer position of the post-selected photon.
pub fn wv_sum<T: Scalar>(params: &ProtocolParams<T>) -> Result<T> {
    let s = binomial_sums(params);
    let den = checked_denominator(s.norm)?;
    Ok(s.first / den)
}

/// Second moment `⟨x²⟩` of the post-selected pointer.
pub fn second_moment<T: Scalar>(params: &ProtocolParams<T>) -> Result<T> {
    let s = binomial_sums(params);
    let den = checked_denominator(s.norm)?;
    Ok(s.second / den)
}

/// Tolerance on a negative pointer variance before it counts as a failure.
const VARIANCE_FLOOR: f64 = -1e-9;

/// Standard deviation of the post-selected pointer, `√(⟨x²⟩ − ⟨x⟩²)`.
pub fn pointer_std<T: Scalar>(params: &ProtocolParams<T>) -> Result<T> {
    let s = binomial_sums(params);
    let den = checked_denominator(s.norm)?;
    let mean = s.first / den;
    let var = s.second / den - mean * mean;
    if var < T::of(VARIANCE_FLOOR) {
        return Err(Error::InternalConsistency(format!(
            "negative pointer variance {:e}",
            var.to_f64_lossy()
        )));
    }
    Ok(var.max(T::zero()).sqrt())
}

/// Probability that a photon passes all `n` post-selections; the squared
/// norm of the unnormalized conditional pointer state.
pub fn postselect_probability<T: Scalar>(params: &ProtocolParams<T>) -> Result<T> {
    let p = binomial_sums(params).norm;
    if !(p > T::zero()) {
        return Err(Error::InternalConsistency(format!(
            "post-selection probability {:e} is not positive",
            p.to_f64_lossy()
        )));
    }
    if p > T::one() + T::of(1e-9) {
        return Err(Error::InternalConsistency(format!(
            "post-selection probability {} exceeds one",
            p.to_f64_lossy()
        )));
    }
    Ok(p.min(T::one()))
}

/// Expectation of the summed observable in the product state `|ψ(angle)⟩^⊗n`.
pub fn expectation_sigma_sum<T: Scalar>(n: u32, angle: T) -> T {
    T::of_u64(u64::from(n)) * (T::of(2.0) * angle).cos()
}

/// Single-block weak value of σ₃ from the closed μ, ν form.
///
/// In debug builds the result is cross-checked against the density-matrix
/// trace form; disagreement beyond the conditioning of the inputs is an
/// [`Error::InternalConsistency`].
pub fn wv_single<T: Scalar>(alpha: T, beta: T, delta: T) -> Result<T> {
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter(
            "pointer width must be positive".into(),
        ));
    }
    let w = weights_from_angles(alpha, beta);
    let f = component_overlap(1, delta);
    let den = checked_denominator(w.mu * w.mu + w.nu * w.nu + T::of(2.0) * (w.mu * w.nu * f))?;
    let wv = (w.mu * w.mu - w.nu * w.nu) / den;
    if cfg!(debug_assertions) {
        let traced = crate::density::wv_single_trace(alpha, beta, delta)?;
        let tol = T::of(64.0) * T::epsilon() * (T::one() + wv.abs()) / den.min(T::one());
        if (traced - wv).abs() > tol {
            return Err(Error::InternalConsistency(format!(
                "closed-form weak value {} disagrees with trace form {}",
                wv.to_f64_lossy(),
                traced.to_f64_lossy()
            )));
        }
    }
    Ok(wv)
}

/// One shifted Gaussian of the final pointer state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerTerm<T> {
    pub shift: T,
    pub amplitude: T,
}

/// Exact unnormalized post-selected pointer state `Σ_k a_k χ(x − s_k)` with
/// `χ` a normalized Gaussian of width `width`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerSuperposition<T> {
    pub width: T,
    pub terms: Vec<PointerTerm<T>>,
}

pub fn final_amplitudes<T: Scalar>(params: &ProtocolParams<T>) -> PointerSuperposition<T> {
    let n = params.n;
    let terms = component_amplitudes(n, coupling_weights(params))
        .into_iter()
        .enumerate()
        .map(|(k, amplitude)| PointerTerm {
            shift: T::of_i64(2 * k as i64 - i64::from(n)),
            amplitude,
        })
        .collect();
    PointerSuperposition {
        width: params.delta,
        terms,
    }
}

impl<T: Scalar> PointerSuperposition<T> {
    /// Overlap integral `∫ χ(x − a) χ(x − b) dx = exp(−(a − b)² / (8Δ²))`.
    fn overlap(&self, a: T, b: T) -> T {
        let d = a - b;
        (-(d * d) / (T::of(8.0) * self.width * self.width)).exp()
    }

    /// Returns `(∫|ψ|², ∫x|ψ|², ∫x²|ψ|²)` by pairwise Gaussian overlaps.
    fn raw_moments(&self) -> (T, T, T) {
        let mut m0 = T::zero();
        let mut m1 = T::zero();
        let mut m2 = T::zero();
        let var = self.width * self.width;
        for p in &self.terms {
            for q in &self.terms {
                let w = p.amplitude * q.amplitude * self.overlap(p.shift, q.shift);
                let mid = (p.shift + q.shift) / T::of(2.0);
                m0 = m0 + w;
                m1 = m1 + w * mid;
                m2 = m2 + w * (mid * mid + var);
            }
        }
        (m0, m1, m2)
    }

    pub fn squared_norm(&self) -> T {
        self.raw_moments().0
    }

    /// Normalized `(⟨x⟩, ⟨x²⟩)` of `|ψ|²`.
    pub fn moments(&self) -> Result<(T, T)> {
        let (m0, m1, m2) = self.raw_moments();
        let m0 = checked_denominator(m0)?;
        Ok((m1 / m0, m2 / m0))
    }

    /// Unnormalized amplitude `Σ_k a_k χ(x − s_k)` at `x`.
    pub fn amplitude_at(&self, x: T) -> T {
        let var = self.width * self.width;
        let norm = (self.width * T::of(2.0 * std::f64::consts::PI).sqrt())
            .sqrt()
            .recip();
        self.terms.iter().fold(T::zero(), |acc, t| {
            let d = x - t.shift;
            acc + t.amplitude * norm * (-(d * d) / (T::of(4.0) * var)).exp()
        })
    }
}

/// One row of a post-selection-angle sweep. Failing points keep the error.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint<T> {
    pub beta: T,
    pub outcome: Result<SweepValues<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepValues<T> {
    pub wv: T,
    pub std: T,
    pub probability: T,
}

pub fn sweep_beta<T: Scalar>(n: u32, alpha: T, delta: T, beta_grid: &[T]) -> Vec<SweepPoint<T>> {
    beta_grid
        .iter()
        .map(|&beta| {
            let outcome = ProtocolParams::new(n, alpha, beta, delta).and_then(|p| {
                Ok(SweepValues {
                    wv: wv_sum(&p)?,
                    std: pointer_std(&p)?,
                    probability: postselect_probability(&p)?,
                })
            });
            SweepPoint { beta, outcome }
        })
        .collect()
}
