//! Uniform sampling of pure states from constrained regions of Hilbert space
//! and Monte Carlo estimation of state-measure averages.
//!
//! A region is a product of hyperspheres, one per block of flat indices.
//! Microcanonical regions have one block per joint subspace `(A, B)` with
//! radius `√W_AB`; canonical regions have one block per shell with radius
//! `√W_E`. Each block is sampled from normalized standard-normal vectors,
//! which is exactly uniform on the sphere.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::CompositeSpectrum;
use crate::state::PureState;

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Microcanonical,
    Canonical,
}

/// Fixed subspace weights `{W_AB}` or fixed shell weights `{W_E}`.
///
/// Weights are stored densely, aligned with the composite's subspaces or
/// shells respectively.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintProfile {
    Microcanonical { weights: Vec<f64> },
    Canonical { weights: Vec<f64> },
}

impl ConstraintProfile {
    /// Microcanonical profile from explicit `((A, B), W_AB)` entries; missing
    /// subspaces get weight 0.
    pub fn microcanonical(
        composite: &CompositeSpectrum,
        entries: &[((usize, usize), f64)],
    ) -> Result<Self> {
        let mut weights = vec![0.0; composite.subspaces().len()];
        for &((a, b), w) in entries {
            let k = composite
                .subspace_index(a, b)
                .ok_or(Error::UnknownSubspace(a, b))?;
            weights[k] += w;
        }
        Self::microcanonical_dense(composite, weights)
    }

    /// `W_AB = W_A^g · W_B^c`, the weights of a product initial state.
    pub fn microcanonical_product(
        composite: &CompositeSpectrum,
        gas_weights: &[f64],
        container_weights: &[f64],
    ) -> Result<Self> {
        check_distribution(gas_weights, composite.gas().len())?;
        check_distribution(container_weights, composite.container().len())?;
        let weights = gas_weights
            .iter()
            .flat_map(|wa| container_weights.iter().map(move |wb| wa * wb))
            .collect();
        Self::microcanonical_dense(composite, weights)
    }

    pub fn microcanonical_dense(composite: &CompositeSpectrum, weights: Vec<f64>) -> Result<Self> {
        check_distribution(&weights, composite.subspaces().len())?;
        Ok(Self::Microcanonical { weights })
    }

    /// Canonical profile from `(E, W_E)` entries; `E` must match a shell.
    pub fn canonical(composite: &CompositeSpectrum, entries: &[(f64, f64)]) -> Result<Self> {
        let mut weights = vec![0.0; composite.shells().len()];
        for &(e, w) in entries {
            let s = composite.shell_index(e).ok_or(Error::UnknownShell(e))?;
            weights[s] += w;
        }
        Self::canonical_dense(composite, weights)
    }

    pub fn canonical_dense(composite: &CompositeSpectrum, weights: Vec<f64>) -> Result<Self> {
        check_distribution(&weights, composite.shells().len())?;
        Ok(Self::Canonical { weights })
    }

    pub fn kind(&self) -> ConstraintKind {
        match self {
            Self::Microcanonical { .. } => ConstraintKind::Microcanonical,
            Self::Canonical { .. } => ConstraintKind::Canonical,
        }
    }

    pub fn weights(&self) -> &[f64] {
        match self {
            Self::Microcanonical { weights } | Self::Canonical { weights } => weights,
        }
    }

    /// Shell weights implied by the profile.
    pub fn shell_weights(&self, composite: &CompositeSpectrum) -> Vec<f64> {
        match self {
            Self::Microcanonical { weights } => crate::state::shell_sums(composite, weights),
            Self::Canonical { weights } => weights.clone(),
        }
    }
}

pub(crate) fn check_distribution(weights: &[f64], expected: usize) -> Result<()> {
    if weights.len() != expected {
        return Err(Error::WeightCount {
            expected,
            found: weights.len(),
        });
    }
    if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidWeight(w));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::WeightsNotNormalized(sum));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|mean − value| / std_error`; zero error with exact agreement gives 0.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, value: f64, sigmas: f64) -> bool {
        self.z_score(value) <= sigmas
    }

    pub fn from_values(values: &[f64], seed: u64) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, found: n });
        }
        let mean = compensated_sum(values.iter().copied()) / n as f64;
        let var = compensated_sum(values.iter().map(|x| (x - mean).powi(2))) / (n - 1) as f64;
        Ok(Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            n_samples: n,
            seed,
        })
    }
}

// Neumaier summation; long runs of near-identical values otherwise drift by
// far more than their standard error.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Anything that draws pure states from a fixed distribution.
pub trait StateSampler: Sync {
    fn composite(&self) -> &Arc<CompositeSpectrum>;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PureState;
}

#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    radius: f64,
}

/// Uniform sampler over a product of hyperspheres.
#[derive(Debug, Clone)]
pub struct RegionSampler {
    composite: Arc<CompositeSpectrum>,
    blocks: Vec<Block>,
}

impl RegionSampler {
    pub fn new(composite: Arc<CompositeSpectrum>, profile: &ConstraintProfile) -> Result<Self> {
        let blocks = match profile {
            ConstraintProfile::Microcanonical { weights } => {
                check_distribution(weights, composite.subspaces().len())?;
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, &w)| Block {
                        indices: composite.subspace_indices(k).collect(),
                        radius: w.sqrt(),
                    })
                    .collect()
            }
            ConstraintProfile::Canonical { weights } => {
                check_distribution(weights, composite.shells().len())?;
                weights
                    .iter()
                    .enumerate()
                    .map(|(s, &w)| Block {
                        indices: composite.shell_indices(s),
                        radius: w.sqrt(),
                    })
                    .collect()
            }
        };
        Ok(Self { composite, blocks })
    }

    /// Uniform over the whole unit sphere of the composite (no constraint).
    pub fn unconstrained(composite: Arc<CompositeSpectrum>) -> Self {
        let blocks = vec![Block {
            indices: (0..composite.dim()).collect(),
            radius: 1.0,
        }];
        Self { composite, blocks }
    }
}

impl StateSampler for RegionSampler {
    fn composite(&self) -> &Arc<CompositeSpectrum> {
        &self.composite
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PureState {
        let mut amps = vec![Complex64::new(0.0, 0.0); self.composite.dim()];
        for block in &self.blocks {
            if block.radius == 0.0 {
                continue;
            }
            let mut n2 = 0.0;
            for &i in &block.indices {
                let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                n2 += z.norm_sqr();
                amps[i] = z;
            }
            let scale = block.radius / n2.sqrt();
            for &i in &block.indices {
                amps[i] *= scale;
            }
        }
        PureState::from_parts_unchecked(self.composite.clone(), amps)
    }
}

/// Draws one state uniformly from the region of fixed `{W_AB}`.
pub fn sample_microcanonical<R: Rng + ?Sized>(
    composite: &Arc<CompositeSpectrum>,
    profile: &ConstraintProfile,
    rng: &mut R,
) -> Result<PureState> {
    if profile.kind() != ConstraintKind::Microcanonical {
        return Err(Error::ProfileKind {
            expected: "microcanonical",
        });
    }
    Ok(RegionSampler::new(composite.clone(), profile)?.sample(rng))
}

/// Draws one state uniformly from the region of fixed `{W_E}`.
pub fn sample_canonical<R: Rng + ?Sized>(
    composite: &Arc<CompositeSpectrum>,
    profile: &ConstraintProfile,
    rng: &mut R,
) -> Result<PureState> {
    if profile.kind() != ConstraintKind::Canonical {
        return Err(Error::ProfileKind {
            expected: "canonical",
        });
    }
    Ok(RegionSampler::new(composite.clone(), profile)?.sample(rng))
}

/// Generator for draw `index` of a run seeded with `seed`. Every draw owns a
/// separate ChaCha stream, so results do not depend on how draws are
/// distributed across threads.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Evaluates `measure` on `n` independent draws, returned in draw order.
pub fn sample_values<S, T, F>(sampler: &S, n: usize, seed: u64, measure: F) -> Vec<T>
where
    S: StateSampler,
    T: Send,
    F: Fn(&PureState) -> T + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| measure(&sampler.sample(&mut draw_rng(seed, i))))
        .collect()
}

/// Sample mean and standard error of a scalar measure.
pub fn mc_average<S, F>(measure: F, sampler: &S, n: usize, seed: u64) -> Result<McEstimate>
where
    S: StateSampler,
    F: Fn(&PureState) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    McEstimate::from_values(&sample_values(sampler, n, seed, measure), seed)
}

/// Component-wise estimates for a vector-valued measure of fixed length.
pub fn mc_average_vec<S, F>(measure: F, sampler: &S, n: usize, seed: u64) -> Result<Vec<McEstimate>>
where
    S: StateSampler,
    F: Fn(&PureState) -> Vec<f64> + Sync,
{
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let rows = sample_values(sampler, n, seed, measure);
    let width = rows[0].len();
    (0..width)
        .map(|j| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            McEstimate::from_values(&column, seed)
        })
        .collect()
}

/// Random product state `|g> ⊗ |c>` whose local level populations are the
/// given weights; the direction inside each level is uniform.
pub fn sample_product_state<R: Rng + ?Sized>(
    composite: &Arc<CompositeSpectrum>,
    gas_weights: &[f64],
    container_weights: &[f64],
    rng: &mut R,
) -> Result<PureState> {
    check_distribution(gas_weights, composite.gas().len())?;
    check_distribution(container_weights, composite.container().len())?;
    let gas = local_vector(composite.gas(), gas_weights, rng);
    let cont = local_vector(composite.container(), container_weights, rng);
    PureState::product(composite.clone(), &gas, &cont)
}

fn local_vector<R: Rng + ?Sized>(
    spectrum: &crate::spectrum::Spectrum,
    weights: &[f64],
    rng: &mut R,
) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(spectrum.dim());
    for (level, &w) in spectrum.levels().iter().zip(weights) {
        let mut block: Vec<Complex64> = (0..level.degeneracy)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let n = block.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        block.iter_mut().for_each(|z| *z *= w.sqrt() / n);
        v.extend(block);
    }
    v
}

/// Fills `out` with a uniform point on the real sphere of radius `radius`.
pub fn sample_real_sphere<R: Rng + ?Sized>(radius: f64, out: &mut [f64], rng: &mut R) {
    let mut n2 = 0.0;
    for x in out.iter_mut() {
        *x = rng.sample(StandardNormal);
        n2 += *x * *x;
    }
    let s = radius / n2.sqrt();
    out.iter_mut().for_each(|x| *x *= s);
}

/// Monte Carlo estimates of `<x_l^{u_l} x_m^{u_m}>` over the real sphere of
/// radius `radius` in `dim` dimensions, for each exponent pair, using the
/// same `n` draws for every pair. Coordinates `l = 0`, `m = 1` (both 0 when
/// `dim = 1`).
pub fn sphere_moments_mc(
    radius: f64,
    dim: usize,
    exponents: &[(u32, u32)],
    n: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("sphere dimension must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let m = if dim > 1 { 1 } else { 0 };
    let rows: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |buf, i| {
                sample_real_sphere(radius, buf, &mut draw_rng(seed, i));
                exponents
                    .iter()
                    .map(|&(ul, um)| buf[0].powi(ul as i32) * buf[m].powi(um as i32))
                    .collect()
            },
        )
        .collect();
    (0..exponents.len())
        .map(|j| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            McEstimate::from_values(&column, seed)
        })
        .collect()
}
