//! Brute-force pointer evolution on a uniform grid.
//!
//! This module is the independent check on the analytic layer. It never
//! uses the binomial structure of the final state: the sequential route
//! applies the blocks one after another to a sampled Gaussian, and the joint
//! route materializes the full `2ⁿ × nodes` state of `n` pre-selected qubits
//! sharing one pointer, translates every branch, and projects each qubit.
//!
//! Grid spacing is `1/q` for an integer `q`, so the unit translation of a
//! block moves amplitudes by exactly `q` nodes with no interpolation.

use std::io::{self, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::protocol::{coupling_weights, CouplingWeights, ProtocolParams};
use crate::scalar::Scalar;

/// Number of pointer widths kept on each side of a Gaussian.
pub const SUPPORT_SIGMAS: f64 = 12.0;

/// Joint states larger than this many amplitudes are refused.
pub const JOINT_ENTRY_LIMIT: u128 = 1_000_000_000;

pub const DEFAULT_DX: f64 = 0.01;

/// Uniform grid on `[−half_span, half_span]` with spacing `1/nodes_per_unit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    nodes_per_unit: u32,
    half_nodes: usize,
}

impl GridSpec {
    /// `1/dx` must be an integer; `half_span` is rounded up to a node.
    pub fn new(dx: f64, half_span: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() || dx > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must lie in (0, 1], got {dx}"
            )));
        }
        let q = (1.0 / dx).round();
        if (q * dx - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "grid spacing {dx} does not divide the unit shift"
            )));
        }
        if !(half_span > 0.0) || !half_span.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "half span must be positive, got {half_span}"
            )));
        }
        Self::from_nodes(q as u32, (half_span * q - 1e-9).ceil() as usize)
    }

    pub fn from_nodes(nodes_per_unit: u32, half_nodes: usize) -> Result<Self> {
        if nodes_per_unit == 0 || half_nodes == 0 {
            return Err(Error::InvalidParameter("empty grid".into()));
        }
        Ok(Self {
            nodes_per_unit,
            half_nodes,
        })
    }

    /// Default domain for a protocol: half span `n + 12Δ`.
    pub fn for_params<T: Scalar>(params: &ProtocolParams<T>, dx: f64) -> Result<Self> {
        Self::new(dx, required_half_span(params))
    }

    pub fn nodes_per_unit(&self) -> u32 {
        self.nodes_per_unit
    }

    pub fn half_nodes(&self) -> usize {
        self.half_nodes
    }

    pub fn len(&self) -> usize {
        2 * self.half_nodes + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        1.0 / f64::from(self.nodes_per_unit)
    }

    pub fn half_span(&self) -> f64 {
        self.half_nodes as f64 / f64::from(self.nodes_per_unit)
    }

    pub fn spacing<T: Scalar>(&self) -> T {
        T::one() / T::of_u64(u64::from(self.nodes_per_unit))
    }

    pub fn position<T: Scalar>(&self, index: usize) -> T {
        T::of_i64(index as i64 - self.half_nodes as i64) / T::of_u64(u64::from(self.nodes_per_unit))
    }

    pub fn positions<T: Scalar>(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len()).map(move |i| self.position(i))
    }

    fn accommodates<T: Scalar>(&self, params: &ProtocolParams<T>) -> bool {
        let needed = (required_half_span(params) * f64::from(self.nodes_per_unit) - 1e-9).ceil();
        self.half_nodes as f64 >= needed
    }
}

fn required_half_span<T: Scalar>(params: &ProtocolParams<T>) -> f64 {
    f64::from(params.n()) + SUPPORT_SIGMAS * params.delta().to_f64_lossy()
}

/// Complex pointer wavefunction sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction<T> {
    spec: GridSpec,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Scalar> GridWavefunction<T> {
    pub fn from_amplitudes(spec: GridSpec, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() != spec.len() {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes for a grid of {} nodes",
                amplitudes.len(),
                spec.len()
            )));
        }
        Ok(Self { spec, amplitudes })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    /// `Σ |ψᵢ|² dx`.
    pub fn squared_norm(&self) -> T {
        self.amplitudes
            .iter()
            .fold(T::zero(), |acc, a| acc + a.norm_sqr())
            * self.spec.spacing()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.squared_norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InternalConsistency(format!(
                "cannot normalize a wavefunction of squared norm {:e}",
                norm.to_f64_lossy()
            )));
        }
        let scale = norm.sqrt().recip();
        Ok(self.scaled(scale))
    }

    fn scaled(&self, factor: T) -> Self {
        Self {
            spec: self.spec,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// `|ψᵢ|²` per node.
    pub fn density(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Two-column plot dump: `# x density`, then `x<TAB>density` per node.
    pub fn write_density<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# x density")?;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let x: T = self.spec.position(i);
            writeln!(
                out,
                "{}\t{}",
                crate::format::num(x.to_f64_lossy()),
                crate::format::num(a.norm_sqr().to_f64_lossy())
            )?;
        }
        Ok(())
    }
}

/// Normalized Gaussian `∝ exp(−(x − c)² / (4w²))`, set to zero beyond
/// `12w` from the centre so that unit shifts move only exact zeros off the
/// domain edge.
pub fn init_gaussian<T: Scalar>(
    spec: GridSpec,
    width: T,
    center: T,
) -> Result<GridWavefunction<T>> {
    if !(width > T::zero()) || !width.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Gaussian width must be positive, got {}",
            width.to_f64_lossy()
        )));
    }
    let reach = T::of(SUPPORT_SIGMAS) * width;
    let edge = T::of(spec.half_span());
    if !center.is_finite() || center - reach < -edge || center + reach > edge {
        return Err(Error::Truncation(format!(
            "domain ±{} too small for an {}-sigma Gaussian of width {} at {}",
            spec.half_span(),
            SUPPORT_SIGMAS,
            width.to_f64_lossy(),
            center.to_f64_lossy()
        )));
    }
    let four_var = T::of(4.0) * width * width;
    let amplitudes = spec
        .positions::<T>()
        .map(|x| {
            let d = x - center;
            let re = if d.abs() <= reach {
                (-(d * d) / four_var).exp()
            } else {
                T::zero()
            };
            Complex::new(re, T::zero())
        })
        .collect();
    GridWavefunction { spec, amplitudes }.normalized()
}

fn shift_slice<T: Scalar>(src: &[Complex<T>], dst: &mut [Complex<T>], nodes: i64) -> Result<()> {
    let len = src.len() as i64;
    for (i, a) in src.iter().enumerate() {
        let j = i as i64 + nodes;
        if (0..len).contains(&j) {
            dst[j as usize] = *a;
        } else if !a.is_zero_amp() {
            return Err(Error::Truncation(format!(
                "shift by {nodes} nodes pushes non-zero amplitude past the grid edge"
            )));
        }
    }
    Ok(())
}

trait ZeroAmp {
    fn is_zero_amp(&self) -> bool;
}

impl<T: Scalar> ZeroAmp for Complex<T> {
    fn is_zero_amp(&self) -> bool {
        self.re == T::zero() && self.im == T::zero()
    }
}

/// Translates the wavefunction by a whole number of nodes.
pub fn shift_nodes<T: Scalar>(wf: &GridWavefunction<T>, nodes: i64) -> Result<GridWavefunction<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut amplitudes = vec![zero; wf.amplitudes.len()];
    shift_slice(&wf.amplitudes, &mut amplitudes, nodes)?;
    Ok(GridWavefunction {
        spec: wf.spec,
        amplitudes,
    })
}

/// Translates the wavefunction by `displacement`, which must be a whole
/// multiple of the grid spacing.
pub fn shift<T: Scalar>(wf: &GridWavefunction<T>, displacement: T) -> Result<GridWavefunction<T>> {
    let exact = displacement * T::of_u64(u64::from(wf.spec.nodes_per_unit));
    let nodes = exact.round();
    if (exact - nodes).abs() > T::of(1e-9) {
        return Err(Error::InvalidParameter(format!(
            "displacement {} is not a multiple of the grid spacing",
            displacement.to_f64_lossy()
        )));
    }
    let nodes = nodes
        .to_i64()
        .ok_or_else(|| Error::InvalidParameter("displacement out of range".into()))?;
    shift_nodes(wf, nodes)
}

/// One block: `μ·ψ(x − 1) + ν·ψ(x + 1)`, unnormalized, together with the
/// fraction of squared norm that survived the post-selection.
pub fn apply_block<T: Scalar>(
    wf: &GridWavefunction<T>,
    alpha: T,
    beta: T,
) -> Result<(GridWavefunction<T>, T)> {
    apply_block_weights(wf, crate::protocol::weights_from_angles(alpha, beta))
}

pub fn apply_block_weights<T: Scalar>(
    wf: &GridWavefunction<T>,
    w: CouplingWeights<T>,
) -> Result<(GridWavefunction<T>, T)> {
    let q = i64::from(wf.spec.nodes_per_unit);
    let h = shift_nodes(wf, q)?;
    let v = shift_nodes(wf, -q)?;
    let amplitudes = h
        .amplitudes
        .iter()
        .zip(&v.amplitudes)
        .map(|(a, b)| a * w.mu + b * w.nu)
        .collect();
    let out = GridWavefunction {
        spec: wf.spec,
        amplitudes,
    };
    let before = wf.squared_norm();
    let weight = if before > T::zero() {
        out.squared_norm() / before
    } else {
        T::zero()
    };
    Ok((out, weight))
}

/// Normalized conditional pointer state and the probability of reaching it.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution<T> {
    pub wavefunction: GridWavefunction<T>,
    pub probability: T,
}

fn check_domain<T: Scalar>(params: &ProtocolParams<T>, spec: &GridSpec) -> Result<()> {
    if spec.accommodates(params) {
        Ok(())
    } else {
        Err(Error::Truncation(format!(
            "half span {} is below n + {}Δ = {}",
            spec.half_span(),
            SUPPORT_SIGMAS,
            required_half_span(params)
        )))
    }
}

/// One photon through `n` blocks in sequence.
pub fn evolve_sequential<T: Scalar>(
    params: &ProtocolParams<T>,
    spec: GridSpec,
) -> Result<Evolution<T>> {
    evolve_sequential_with(params, spec, coupling_weights(params))
}

/// As [`evolve_sequential`] with explicit block weights.
pub fn evolve_sequential_with<T: Scalar>(
    params: &ProtocolParams<T>,
    spec: GridSpec,
    weights: CouplingWeights<T>,
) -> Result<Evolution<T>> {
    check_domain(params, &spec)?;
    let mut wf = init_gaussian(spec, params.delta(), T::zero())?;
    let mut probability = T::one();
    for _ in 0..params.n() {
        let (next, weight) = apply_block_weights(&wf, weights)?;
        if !(weight > T::zero()) {
            return Err(Error::NearOrthogonalPostselection {
                denominator: weight.to_f64_lossy(),
                cutoff: 0.0,
            });
        }
        probability = probability * weight;
        wf = next.normalized()?;
    }
    Ok(Evolution {
        wavefunction: wf,
        probability,
    })
}

/// Amplitudes of `n` qubits and one pointer, indexed by
/// `(bitstring, node)`; bit `i` set means qubit `i` is `|H⟩`.
#[derive(Debug, Clone)]
pub struct JointState<T> {
    spec: GridSpec,
    qubits: u32,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Scalar> JointState<T> {
    /// `|ψ_α⟩^⊗n ⊗ |pointer⟩`.
    pub fn prepare(qubits: u32, alpha: T, pointer: &GridWavefunction<T>) -> Result<Self> {
        let spec = *pointer.spec();
        let entries = (1u128 << qubits.min(127)) * spec.len() as u128;
        if qubits >= 64 || entries > JOINT_ENTRY_LIMIT {
            return Err(Error::MemoryGuard {
                entries,
                limit: JOINT_ENTRY_LIMIT,
            });
        }
        let (s, c) = alpha.sin_cos();
        let mut amplitudes = Vec::with_capacity(entries as usize);
        for bits in 0..(1u64 << qubits) {
            let coefficient =
                (0..qubits).fold(
                    T::one(),
                    |acc, i| {
                        if bits >> i & 1 == 1 {
                            acc * c
                        } else {
                            acc * s
                        }
                    },
                );
            amplitudes.extend(pointer.amplitudes().iter().map(|a| a * coefficient));
        }
        Ok(Self {
            spec,
            qubits,
            amplitudes,
        })
    }

    pub fn entries(&self) -> usize {
        self.amplitudes.len()
    }

    /// `exp(−i Σ σ₃⁽ᵏ⁾ ⊗ p)`: each branch moves by `#H − #V` units.
    pub fn apply_coupling(&mut self) -> Result<()> {
        let len = self.spec.len();
        let q = i64::from(self.spec.nodes_per_unit);
        let zero = Complex::new(T::zero(), T::zero());
        let mut scratch = vec![zero; len];
        for (bits, row) in self.amplitudes.chunks_mut(len).enumerate() {
            let up = i64::from((bits as u64).count_ones());
            let down = i64::from(self.qubits) - up;
            scratch.iter_mut().for_each(|a| *a = zero);
            shift_slice(row, &mut scratch, (up - down) * q)?;
            row.copy_from_slice(&scratch);
        }
        Ok(())
    }

    /// Projects every qubit onto `cos β|H⟩ + sin β|V⟩`, leaving the
    /// unnormalized pointer state.
    pub fn project(&self, beta: T) -> GridWavefunction<T> {
        let len = self.spec.len();
        let (s, c) = beta.sin_cos();
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; len];
        for (bits, row) in self.amplitudes.chunks(len).enumerate() {
            let coefficient =
                (0..self.qubits).fold(
                    T::one(),
                    |acc, i| {
                        if bits >> i & 1 == 1 {
                            acc * c
                        } else {
                            acc * s
                        }
                    },
                );
            for (o, a) in out.iter_mut().zip(row) {
                *o = *o + a * coefficient;
            }
        }
        GridWavefunction {
            spec: self.spec,
            amplitudes: out,
        }
    }
}

/// `n` pre-selected qubits coupled at once to one pointer, then
/// post-selected together.
pub fn evolve_joint<T: Scalar>(params: &ProtocolParams<T>, spec: GridSpec) -> Result<Evolution<T>> {
    check_domain(params, &spec)?;
    let entries = (1u128 << params.n().min(127)) * spec.len() as u128;
    if entries > JOINT_ENTRY_LIMIT {
        return Err(Error::MemoryGuard {
            entries,
            limit: JOINT_ENTRY_LIMIT,
        });
    }
    let pointer = init_gaussian(spec, params.delta(), T::zero())?;
    let mut joint = JointState::prepare(params.n(), params.alpha(), &pointer)?;
    joint.apply_coupling()?;
    let conditional = joint.project(params.beta());
    let probability = conditional.squared_norm();
    Ok(Evolution {
        wavefunction: conditional.normalized()?,
        probability,
    })
}

/// Riemann-sum mean and standard deviation of `|ψ|²`.
pub fn moments<T: Scalar>(wf: &GridWavefunction<T>) -> (T, T) {
    let density = wf.density();
    let xs: Vec<T> = wf.spec.positions().collect();
    let mass = density.iter().fold(T::zero(), |a, &d| a + d);
    let mean = xs
        .iter()
        .zip(&density)
        .fold(T::zero(), |a, (&x, &d)| a + x * d)
        / mass;
    let var = xs.iter().zip(&density).fold(T::zero(), |a, (&x, &d)| {
        let c = x - mean;
        a + c * c * d
    }) / mass;
    (mean, var.sqrt())
}

/// `√(Σ |aᵢ − bᵢ|² dx)`.
pub fn l2_distance<T: Scalar>(a: &GridWavefunction<T>, b: &GridWavefunction<T>) -> Result<T> {
    if a.spec != b.spec {
        return Err(Error::InvalidParameter(
            "wavefunctions live on different grids".into(),
        ));
    }
    let sum = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .fold(T::zero(), |acc, (x, y)| acc + (x - y).norm_sqr());
    Ok((sum * a.spec.spacing()).sqrt())
}

/// Cumulative distribution of `|ψ|²` with node `i` owning the cell
/// `[xᵢ − dx/2, xᵢ + dx/2]`; linear inside each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf<T> {
    spec: GridSpec,
    upper: Vec<T>,
}

pub fn cdf<T: Scalar>(wf: &GridWavefunction<T>) -> Cdf<T> {
    let dx = wf.spec.spacing::<T>();
    let mut acc = T::zero();
    let mut upper: Vec<T> = wf
        .amplitudes
        .iter()
        .map(|a| {
            acc = acc + a.norm_sqr() * dx;
            acc
        })
        .collect();
    if acc > T::zero() {
        upper.iter_mut().for_each(|v| *v = *v / acc);
    }
    Cdf {
        spec: wf.spec,
        upper,
    }
}

impl<T: Scalar> Cdf<T> {
    /// Cumulative mass at each cell's upper edge; the last entry is 1.
    pub fn values(&self) -> &[T] {
        &self.upper
    }

    fn lower_edge(&self, cell: usize) -> T {
        self.spec.position::<T>(cell) - self.spec.spacing::<T>() / T::of(2.0)
    }

    fn below(&self, cell: usize) -> T {
        if cell == 0 {
            T::zero()
        } else {
            self.upper[cell - 1]
        }
    }

    /// `P(X ≤ x)`.
    pub fn at(&self, x: T) -> T {
        let first = self.lower_edge(0);
        let dx = self.spec.spacing::<T>();
        if x <= first {
            return T::zero();
        }
        let cells = (x - first) / dx;
        let cell = cells.floor().to_usize().unwrap_or(usize::MAX);
        if cell >= self.upper.len() {
            return T::one();
        }
        let frac = cells - T::of_u64(cell as u64);
        let lo = self.below(cell);
        lo + frac * (self.upper[cell] - lo)
    }

    /// `P(X > x)`.
    pub fn tail_above(&self, x: T) -> T {
        T::one() - self.at(x)
    }

    /// Inverse of [`Cdf::at`] for `u ∈ [0, 1]`.
    pub fn quantile(&self, u: T) -> T {
        let cell = self
            .upper
            .partition_point(|&c| c < u)
            .min(self.upper.len() - 1);
        let lo = self.below(cell);
        let mass = self.upper[cell] - lo;
        let frac = if mass > T::zero() {
            ((u - lo) / mass).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        self.lower_edge(cell) + frac * self.spec.spacing::<T>()
    }
}
