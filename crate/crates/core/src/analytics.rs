//! Closed-form predictions for constrained Hilbert-space regions.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::sampling::{check_distribution, WEIGHT_SUM_TOLERANCE};
use crate::spectrum::{CompositeSpectrum, Spectrum};
use crate::state::DensityMatrix;

/// Minimum-purity gas state compatible with fixed level populations:
/// `ρ_min = Σ_{A,a} (W_A / N_A) |A,a><A,a|`, `P_min = Σ_A W_A² / N_A`.
pub fn min_purity_state(gas: &Spectrum, gas_weights: &[f64]) -> Result<(DensityMatrix, f64)> {
    check_distribution(gas_weights, gas.len())?;
    let mut diag = Vec::with_capacity(gas.dim());
    let mut p = 0.0;
    for (level, &w) in gas.levels().iter().zip(gas_weights) {
        let n = level.degeneracy as f64;
        diag.extend(std::iter::repeat_n(w / n, level.degeneracy));
        p += w * w / n;
    }
    Ok((DensityMatrix::from_diagonal(&diag)?, p))
}

/// Entropy of the minimum-purity state, `−Σ_A W_A ln(W_A / N_A)`.
pub fn max_entropy_micro(gas_weights: &[f64], degeneracies: &[usize]) -> Result<f64> {
    check_distribution(gas_weights, degeneracies.len())?;
    check_degeneracies(degeneracies)?;
    Ok(gas_weights
        .iter()
        .zip(degeneracies)
        .filter(|(w, _)| **w > 0.0)
        .map(|(&w, &n)| -w * (w / n as f64).ln())
        .sum())
}

/// Exact Hilbert-space average of the gas purity over the microcanonical
/// region of a product initial state with populations `{W_A}`, `{W_B}`:
///
/// ```text
/// <P> = Σ_A W_A²/N_A (1 − Σ_B W_B²) + Σ_B W_B²/N_B (1 − Σ_A W_A²)
///     + Σ_{A,B} W_A² W_B² (N_A + N_B) / (N_A N_B + 1)
/// ```
pub fn expected_purity_exact(
    composite: &CompositeSpectrum,
    gas_weights: &[f64],
    container_weights: &[f64],
) -> Result<f64> {
    let (gas, cont) = (composite.gas(), composite.container());
    check_distribution(gas_weights, gas.len())?;
    check_distribution(container_weights, cont.len())?;
    let ng = gas.degeneracies();
    let nc = cont.degeneracies();

    let gas_min: f64 = sum_sq_over(gas_weights, &ng);
    let cont_min: f64 = sum_sq_over(container_weights, &nc);
    let gas_sq: f64 = gas_weights.iter().map(|w| w * w).sum();
    let cont_sq: f64 = container_weights.iter().map(|w| w * w).sum();

    let mut same_subspace = 0.0;
    for (&wa, &na) in gas_weights.iter().zip(&ng) {
        for (&wb, &nb) in container_weights.iter().zip(&nc) {
            let (na, nb) = (na as f64, nb as f64);
            same_subspace += wa * wa * wb * wb * (na + nb) / (na * nb + 1.0);
        }
    }
    Ok(gas_min * (1.0 - cont_sq) + cont_min * (1.0 - gas_sq) + same_subspace)
}

/// Large-degeneracy approximation `Σ_A W_A²/N_A + Σ_B W_B²/N_B`.
pub fn expected_purity_approx(
    gas_weights: &[f64],
    gas_degeneracies: &[usize],
    container_weights: &[f64],
    container_degeneracies: &[usize],
) -> Result<f64> {
    check_distribution(gas_weights, gas_degeneracies.len())?;
    check_distribution(container_weights, container_degeneracies.len())?;
    check_degeneracies(gas_degeneracies)?;
    check_degeneracies(container_degeneracies)?;
    Ok(sum_sq_over(gas_weights, gas_degeneracies)
        + sum_sq_over(container_weights, container_degeneracies))
}

/// Average purity of a uniformly random pure state on an `N_g × N_c` system,
/// `(N_g + N_c) / (N_g N_c + 1)`.
pub fn lubkin_average(n_gas: usize, n_container: usize) -> Result<f64> {
    if n_gas == 0 || n_container == 0 {
        return Err(Error::InvalidArgument(
            "subsystem dimensions must be at least 1".into(),
        ));
    }
    let (g, c) = (n_gas as f64, n_container as f64);
    Ok((g + c) / (g * c + 1.0))
}

fn sum_sq_over(weights: &[f64], degeneracies: &[usize]) -> f64 {
    weights
        .iter()
        .zip(degeneracies)
        .map(|(w, &n)| w * w / n as f64)
        .sum()
}

fn check_degeneracies(degeneracies: &[usize]) -> Result<()> {
    if degeneracies.contains(&0) {
        return Err(Error::NonPositiveDegeneracy(f64::NAN));
    }
    Ok(())
}

/// Average of `x_l^{u_l} x_m^{u_m}` (`l ≠ m`) over the uniform measure on the
/// real sphere of radius `radius` in `dim` dimensions.
///
/// A complex block of `N_AB` amplitudes is a real sphere with `dim = 2 N_AB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentQuery {
    pub radius: f64,
    pub dim: usize,
    pub u_l: u32,
    pub u_m: u32,
}

impl MomentQuery {
    pub fn new(radius: f64, dim: usize, u_l: u32, u_m: u32) -> Self {
        Self {
            radius,
            dim,
            u_l,
            u_m,
        }
    }
}

/// Exponent pairs with a closed form, as `(min, max)`.
pub const SUPPORTED_MOMENTS: [(u32, u32); 6] = [(0, 0), (0, 1), (1, 1), (0, 2), (2, 2), (0, 4)];

pub fn hypersphere_moment(q: MomentQuery) -> Result<f64> {
    if !(q.radius.is_finite() && q.radius >= 0.0) {
        return Err(Error::InvalidMomentQuery(format!("radius {}", q.radius)));
    }
    if q.dim == 0 {
        return Err(Error::InvalidMomentQuery("dimension must be at least 1".into()));
    }
    let (lo, hi) = (q.u_l.min(q.u_m), q.u_l.max(q.u_m));
    if lo > 0 && q.dim < 2 {
        return Err(Error::InvalidMomentQuery(
            "two distinct coordinates need dimension at least 2".into(),
        ));
    }
    let d = q.dim as f64;
    let r2 = q.radius * q.radius;
    // Γ(d/2) / (4 Γ(d/2 + 2))
    let quartic = || (ln_gamma(d / 2.0) - ln_gamma(d / 2.0 + 2.0)).exp() / 4.0;
    match (lo, hi) {
        (0, 0) => Ok(1.0),
        (0, 1) | (1, 1) => Ok(0.0),
        (0, 2) => Ok(r2 / d),
        (2, 2) => Ok(r2 * r2 * quartic()),
        (0, 4) => Ok(3.0 * r2 * r2 * quartic()),
        _ => Err(Error::UnsupportedMoment(q.u_l, q.u_m)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionExponent {
    /// `N_AB`, the large-degeneracy simplification.
    #[default]
    Leading,
    /// `N_AB − 1/2`.
    Exact,
}

impl RegionExponent {
    fn of(self, n: usize) -> f64 {
        match self {
            Self::Leading => n as f64,
            Self::Exact => n as f64 - 0.5,
        }
    }
}

/// Logarithm of the size of the region with subspace weights `{W_AB}`, up to
/// weight-independent constants: `Σ_AB N_AB ln W_AB`. Returns `−∞` if any
/// weight is zero.
pub fn region_log_size(
    composite: &CompositeSpectrum,
    subspace_weights: &[f64],
    exponent: RegionExponent,
) -> Result<f64> {
    check_distribution(subspace_weights, composite.subspaces().len())?;
    Ok(composite
        .subspaces()
        .iter()
        .zip(subspace_weights)
        .map(|(s, &w)| exponent.of(s.dim) * w.ln())
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantDistribution {
    /// `W^d_AB`, aligned with the composite's subspaces.
    pub weights: Vec<f64>,
    /// `λ_E = N_E / W_E` per shell; `None` where `W_E = 0`.
    pub lambdas: Vec<Option<f64>>,
    /// Number of container levels, to recover `(A, B)` from the flat index.
    pub container_levels: usize,
}

impl DominantDistribution {
    pub fn weight(&self, gas_level: usize, container_level: usize) -> f64 {
        self.weights[gas_level * self.container_levels + container_level]
    }
}

/// Maximizer of the region size at fixed shell weights:
/// `W^d_AB = N_AB W_E / N_E` for `E = E_A + E_B`.
pub fn dominant_distribution(
    composite: &CompositeSpectrum,
    shell_weights: &[f64],
) -> Result<DominantDistribution> {
    check_distribution(shell_weights, composite.shells().len())?;
    let mut weights = vec![0.0; composite.subspaces().len()];
    let mut lambdas = Vec::with_capacity(composite.shells().len());
    for (shell, &we) in composite.shells().iter().zip(shell_weights) {
        if we == 0.0 {
            lambdas.push(None);
            continue;
        }
        let lambda = shell.dim as f64 / we;
        lambdas.push(Some(lambda));
        for &k in &shell.members {
            weights[k] = composite.subspaces()[k].dim as f64 / lambda;
        }
    }
    Ok(DominantDistribution {
        weights,
        lambdas,
        container_levels: composite.container().len(),
    })
}

/// Region size relative to the dominant region, `Ã / Ã^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRatio {
    /// Second-order expansion about the dominant distribution,
    /// `Π exp(−N_E² ε_AB² / (2 N_AB W_E²))`.
    pub gaussian: f64,
    /// `exp(ln Ã(W^d + ε) − ln Ã(W^d))` with the leading exponent.
    pub exact: f64,
}

pub fn region_size_ratio(
    composite: &CompositeSpectrum,
    shell_weights: &[f64],
    perturbation: &[f64],
) -> Result<RegionRatio> {
    let dd = dominant_distribution(composite, shell_weights)?;
    if perturbation.len() != composite.subspaces().len() {
        return Err(Error::WeightCount {
            expected: composite.subspaces().len(),
            found: perturbation.len(),
        });
    }
    for (s, shell) in composite.shells().iter().enumerate() {
        let sum: f64 = shell.members.iter().map(|&k| perturbation[k]).sum();
        if sum.abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::ShellSumViolation { shell: s, sum });
        }
    }
    let mut log_gauss = 0.0;
    let mut log_exact = 0.0;
    for (k, sub) in composite.subspaces().iter().enumerate() {
        let (wd, eps) = (dd.weights[k], perturbation[k]);
        if wd + eps < 0.0 {
            return Err(Error::InfeasiblePerturbation(k));
        }
        if wd == 0.0 {
            // zero-weight shell; shell sum and feasibility force ε = 0
            continue;
        }
        let s = composite.shell_of(k);
        let (ne, we, nab) = (
            composite.shells()[s].dim as f64,
            shell_weights[s],
            sub.dim as f64,
        );
        log_gauss -= ne * ne * eps * eps / (2.0 * nab * we * we);
        log_exact += nab * (eps / wd).ln_1p();
    }
    Ok(RegionRatio {
        gaussian: log_gauss.exp(),
        exact: log_exact.exp(),
    })
}

/// Gas marginal `W^d_A = Σ_B W^d_AB`.
pub fn marginal_gas_distribution(dd: &DominantDistribution) -> Vec<f64> {
    dd.weights
        .chunks(dd.container_levels)
        .map(|row| row.iter().sum())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub kt: f64,
    /// Euclidean norm of the log-weight residuals.
    pub residual: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares fit of `ln(W_A / N_A) = −E_A / kT + c` over levels with
/// nonzero weight.
pub fn fit_temperature(gas: &Spectrum, level_weights: &[f64]) -> Result<TemperatureFit> {
    if level_weights.len() != gas.len() {
        return Err(Error::WeightCount {
            expected: gas.len(),
            found: level_weights.len(),
        });
    }
    let pts: Vec<(f64, f64)> = gas
        .levels()
        .iter()
        .zip(level_weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(l, &w)| (l.energy, (w / l.degeneracy as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientFitPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(TemperatureFit {
        kt: -1.0 / slope,
        residual,
        slope,
        intercept,
        points: pts.len(),
    })
}

/// `W_A ∝ N_A exp(−E_A / kT)`, normalized.
pub fn gibbs_distribution(gas: &Spectrum, kt: f64) -> Vec<f64> {
    let e0 = gas.energy(0);
    let raw: Vec<f64> = gas
        .levels()
        .iter()
        .map(|l| l.degeneracy as f64 * (-(l.energy - e0) / kt).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}
