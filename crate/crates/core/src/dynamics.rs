//! Constraint-respecting Hamiltonians and exact Schrödinger propagation.
//!
//! Interactions are block diagonal: one block per joint subspace
//! (microcanonical) or per total-energy shell (canonical). Every block of the
//! full Hamiltonian is diagonalized once at construction, so propagation is
//! exactly unitary. Units: `ħ = 1`.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sampling::{draw_rng, ConstraintKind};
use crate::spectrum::CompositeSpectrum;
use crate::state::{
    gas_level_weights, purity, reduce_gas, shell_weights, subspace_weights, von_neumann_entropy,
    PureState,
};

/// Trajectory windows default to `DEFAULT_WINDOW / λ`.
pub const DEFAULT_WINDOW: f64 = 50.0;
pub const DEFAULT_STEPS: usize = 1000;

#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    interaction: DMatrix<Complex64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl Block {
    fn gather(&self, v: &[Complex64]) -> DVector<Complex64> {
        DVector::from_iterator(self.indices.len(), self.indices.iter().map(|&i| v[i]))
    }

    fn scatter(&self, src: &DVector<Complex64>, out: &mut [Complex64]) {
        for (&i, z) in self.indices.iter().zip(src.iter()) {
            out[i] = *z;
        }
    }
}

/// `H = H_g + H_c + I` with diagonal local parts and a block-diagonal
/// interaction.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    composite: Arc<CompositeSpectrum>,
    kind: ConstraintKind,
    coupling: f64,
    gas_diag: Vec<f64>,
    container_diag: Vec<f64>,
    blocks: Vec<Block>,
}

/// Random Hermitian block whose interaction conserves every `W_AB`:
/// `[H_g, I] = [H_c, I] = 0`.
pub fn build_microcanonical_hamiltonian<R: Rng + ?Sized>(
    composite: &Arc<CompositeSpectrum>,
    coupling: f64,
    rng: &mut R,
) -> Result<Hamiltonian> {
    let groups: Vec<(u64, Vec<usize>)> = (0..composite.subspaces().len())
        .map(|k| (k as u64, composite.subspace_indices(k).collect()))
        .collect();
    Hamiltonian::build(composite, ConstraintKind::Microcanonical, coupling, groups, rng)
}

/// Random Hermitian block per total-energy shell; conserves every `W_E`
/// but lets energy flow between gas and container.
pub fn build_canonical_hamiltonian<R: Rng + ?Sized>(
    composite: &Arc<CompositeSpectrum>,
    coupling: f64,
    rng: &mut R,
) -> Result<Hamiltonian> {
    let groups: Vec<(u64, Vec<usize>)> = composite
        .shells()
        .iter()
        .enumerate()
        .map(|(s, shell)| (shell.members[0] as u64, composite.shell_indices(s)))
        .collect();
    Hamiltonian::build(composite, ConstraintKind::Canonical, coupling, groups, rng)
}

fn gue_block(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    (&g + g.adjoint()).scale(0.5)
}

impl Hamiltonian {
    fn build<R: Rng + ?Sized>(
        composite: &Arc<CompositeSpectrum>,
        kind: ConstraintKind,
        coupling: f64,
        groups: Vec<(u64, Vec<usize>)>,
        rng: &mut R,
    ) -> Result<Self> {
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "coupling must be finite and non-negative, got {coupling}"
            )));
        }
        let dc = composite.container().dim();
        let gas_diag: Vec<f64> = (0..composite.dim())
            .map(|i| composite.gas().energy(composite.gas().level_of(i / dc)))
            .collect();
        let container_diag: Vec<f64> = (0..composite.dim())
            .map(|i| composite.container().energy(composite.container().level_of(i % dc)))
            .collect();

        // Blocks are keyed by their first subspace, so a shell holding a
        // single subspace receives the same draw as that subspace would.
        let base: u64 = rng.random();
        let mut raw: Vec<(Vec<usize>, DMatrix<Complex64>)> = groups
            .into_iter()
            .map(|(key, idx)| {
                let m = gue_block(idx.len(), &mut draw_rng(base, key));
                (idx, m)
            })
            .collect();
        let radius = raw
            .iter()
            .map(|(_, m)| spectral_radius(m))
            .fold(0.0, f64::max);
        let scale = if radius > 0.0 { coupling / radius } else { 0.0 };

        let blocks = raw
            .drain(..)
            .map(|(indices, m)| {
                let interaction = m.scale(scale);
                let mut full = interaction.clone();
                for (j, &i) in indices.iter().enumerate() {
                    full[(j, j)] += Complex64::new(gas_diag[i] + container_diag[i], 0.0);
                }
                let eig = SymmetricEigen::new(full);
                Block {
                    indices,
                    interaction,
                    eigenvalues: eig.eigenvalues.iter().copied().collect(),
                    eigenvectors: eig.eigenvectors,
                }
            })
            .collect();

        Ok(Self {
            composite: composite.clone(),
            kind,
            coupling,
            gas_diag,
            container_diag,
            blocks,
        })
    }

    pub fn composite(&self) -> &Arc<CompositeSpectrum> {
        &self.composite
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn dim(&self) -> usize {
        self.composite.dim()
    }

    pub fn gas_part(&self) -> DMatrix<Complex64> {
        diag_matrix(&self.gas_diag)
    }

    pub fn container_part(&self) -> DMatrix<Complex64> {
        diag_matrix(&self.container_diag)
    }

    pub fn interaction(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for b in &self.blocks {
            for (r, &i) in b.indices.iter().enumerate() {
                for (c, &j) in b.indices.iter().enumerate() {
                    m[(i, j)] = b.interaction[(r, c)];
                }
            }
        }
        m
    }

    /// Dense `H_g + H_c + I`.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        self.gas_part() + self.container_part() + self.interaction()
    }

    /// Largest absolute eigenvalue over all interaction blocks.
    pub fn interaction_radius(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| spectral_radius(&b.interaction))
            .fold(0.0, f64::max)
    }

    /// Frobenius norms of `[H_g, I]` and `[H_c, I]`, from
    /// `[D, I]_ij = (d_i − d_j) I_ij` for diagonal `D`.
    pub fn commutator_norms(&self) -> (f64, f64) {
        let mut g2 = 0.0;
        let mut c2 = 0.0;
        for b in &self.blocks {
            for (r, &i) in b.indices.iter().enumerate() {
                for (c, &j) in b.indices.iter().enumerate() {
                    let x = b.interaction[(r, c)].norm_sqr();
                    g2 += (self.gas_diag[i] - self.gas_diag[j]).powi(2) * x;
                    c2 += (self.container_diag[i] - self.container_diag[j]).powi(2) * x;
                }
            }
        }
        (g2.sqrt(), c2.sqrt())
    }

    fn check(&self, state: &PureState) -> Result<()> {
        if !Arc::ptr_eq(state.composite(), &self.composite)
            && **state.composite() != *self.composite
        {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.amplitudes().len(),
            });
        }
        Ok(())
    }

    /// `H ψ`.
    pub fn apply(&self, state: &PureState) -> Result<Vec<Complex64>> {
        self.check(state)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for b in &self.blocks {
            let v = b.gather(state.amplitudes());
            let mut c = b.eigenvectors.adjoint() * v;
            for (z, &e) in c.iter_mut().zip(&b.eigenvalues) {
                *z *= e;
            }
            b.scatter(&(&b.eigenvectors * c), &mut out);
        }
        Ok(out)
    }

    /// `<ψ|H|ψ>`.
    pub fn energy(&self, state: &PureState) -> Result<f64> {
        let h = self.apply(state)?;
        Ok(inner(state.amplitudes(), &h).re)
    }

    /// `|<I>| / min(|<H_g>|, |<H_c>|)`, a diagnostic for weak coupling.
    pub fn weak_coupling_ratio(&self, state: &PureState) -> Result<f64> {
        self.check(state)?;
        let psi = state.amplitudes();
        let local = |d: &[f64]| -> f64 {
            psi.iter().zip(d).map(|(z, e)| z.norm_sqr() * e).sum::<f64>().abs()
        };
        let mut vi = Complex64::new(0.0, 0.0);
        for b in &self.blocks {
            let v = b.gather(psi);
            vi += v.dotc(&(&b.interaction * &v));
        }
        Ok(vi.re.abs() / local(&self.gas_diag).min(local(&self.container_diag)))
    }

    /// `exp(−iHt) ψ`.
    pub fn propagate(&self, state: &PureState, t: f64) -> Result<PureState> {
        self.check(state)?;
        if t == 0.0 {
            return Ok(state.clone());
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for b in &self.blocks {
            let mut c = b.eigenvectors.adjoint() * b.gather(state.amplitudes());
            for (z, &e) in c.iter_mut().zip(&b.eigenvalues) {
                *z *= Complex64::from_polar(1.0, -e * t);
            }
            b.scatter(&(&b.eigenvectors * c), &mut out);
        }
        Ok(PureState::from_parts_unchecked(self.composite.clone(), out))
    }
}

fn diag_matrix(d: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        d.len(),
        d.iter().map(|&x| Complex64::new(x, 0.0)),
    ))
}

fn spectral_radius(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0, |acc: f64, e| acc.max(e.abs()))
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `v_eff = √<ψ|H²|ψ> = ‖Hψ‖`.
pub fn effective_velocity(state: &PureState, hamiltonian: &Hamiltonian) -> Result<f64> {
    let h = hamiltonian.apply(state)?;
    Ok(crate::state::norm_sqr(&h).sqrt())
}

/// Uniform grid of `steps + 1` points on `[0, DEFAULT_WINDOW / λ]`
/// (`[0, DEFAULT_WINDOW]` when `λ = 0`).
pub fn default_time_grid(coupling: f64, steps: usize) -> Vec<f64> {
    let t_max = if coupling > 0.0 {
        DEFAULT_WINDOW / coupling
    } else {
        DEFAULT_WINDOW
    };
    uniform_grid(t_max, steps)
}

pub fn uniform_grid(t_max: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| t_max * i as f64 / steps as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Measure {
    Purity,
    Entropy,
    /// `W_AB(t)` by `(A, B)` level indices.
    SubspaceWeight(usize, usize),
    /// `W_E(t)` by shell index.
    ShellWeight(usize),
    /// `W_A^g(t)` by gas level index.
    GasLevelWeight(usize),
}

impl FromStr for Measure {
    type Err = Error;

    /// `purity`, `entropy`, `w_ab:A:B`, `w_e:S`, `w_a:A`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownMeasure(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["purity"] => Ok(Self::Purity),
            ["entropy"] => Ok(Self::Entropy),
            ["w_ab", _, _] => Ok(Self::SubspaceWeight(num(1)?, num(2)?)),
            ["w_e", _] => Ok(Self::ShellWeight(num(1)?)),
            ["w_a", _] => Ok(Self::GasLevelWeight(num(1)?)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PureState>,
    pub purity: Vec<f64>,
    pub entropy: Vec<f64>,
    /// `W_AB(t)`, one row per time.
    pub subspace_weights: Vec<Vec<f64>>,
    pub shell_weights: Vec<Vec<f64>>,
    pub gas_level_weights: Vec<Vec<f64>>,
    /// Euclidean arc length `Σ ‖ψ_{k+1} − ψ_k‖`.
    pub path_length: f64,
}

impl Trajectory {
    pub fn composite(&self) -> &Arc<CompositeSpectrum> {
        self.states[0].composite()
    }

    pub fn series(&self, measure: &Measure) -> Result<Vec<f64>> {
        let c = self.composite();
        let column = |rows: &[Vec<f64>], j: Option<usize>| -> Result<Vec<f64>> {
            let j = j.ok_or_else(|| Error::UnknownMeasure(format!("{measure:?}")))?;
            Ok(rows.iter().map(|r| r[j]).collect())
        };
        match *measure {
            Measure::Purity => Ok(self.purity.clone()),
            Measure::Entropy => Ok(self.entropy.clone()),
            Measure::SubspaceWeight(a, b) => column(&self.subspace_weights, c.subspace_index(a, b)),
            Measure::ShellWeight(s) => column(&self.shell_weights, (s < c.shells().len()).then_some(s)),
            Measure::GasLevelWeight(a) => {
                column(&self.gas_level_weights, (a < c.gas().len()).then_some(a))
            }
        }
    }

    /// Lengths `‖ψ_{k+1} − ψ_k‖` of the sampled segments.
    pub fn segment_lengths(&self) -> Vec<f64> {
        self.states.windows(2).map(|w| w[1].distance(&w[0])).collect()
    }

    /// Restriction to samples with `t ≥ t_start`.
    pub fn window_from(&self, t_start: f64) -> Trajectory {
        let k = self.times.partition_point(|&t| t < t_start);
        let states = self.states[k..].to_vec();
        let path_length = states.windows(2).map(|w| w[1].distance(&w[0])).sum();
        Trajectory {
            times: self.times[k..].to_vec(),
            states,
            purity: self.purity[k..].to_vec(),
            entropy: self.entropy[k..].to_vec(),
            subspace_weights: self.subspace_weights[k..].to_vec(),
            shell_weights: self.shell_weights[k..].to_vec(),
            gas_level_weights: self.gas_level_weights[k..].to_vec(),
            path_length,
        }
    }

    /// Measure series as CSV: `t,purity,entropy,w_ab:A:B…,w_e:S…,w_a:A…`.
    pub fn to_csv(&self) -> String {
        let c = self.composite();
        let mut out = String::from("# typica-trajectory v1\n");
        let mut header = vec!["t".to_string(), "purity".into(), "entropy".into()];
        header.extend(
            c.subspaces()
                .iter()
                .map(|s| format!("w_ab:{}:{}", s.gas_level, s.container_level)),
        );
        header.extend((0..c.shells().len()).map(|s| format!("w_e:{s}")));
        header.extend((0..c.gas().len()).map(|a| format!("w_a:{a}")));
        out.push_str(&header.join(","));
        out.push('\n');
        for k in 0..self.times.len() {
            let _ = write!(out, "{:e},{:e},{:e}", self.times[k], self.purity[k], self.entropy[k]);
            for row in [
                &self.subspace_weights[k],
                &self.shell_weights[k],
                &self.gas_level_weights[k],
            ] {
                for x in row {
                    let _ = write!(out, ",{x:e}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Propagates `initial` to every time in `times` (strictly increasing).
pub fn evolve(initial: &PureState, hamiltonian: &Hamiltonian, times: &[f64]) -> Result<Trajectory> {
    hamiltonian.check(initial)?;
    if times.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    let states = times
        .iter()
        .map(|&t| hamiltonian.propagate(initial, t))
        .collect::<Result<Vec<_>>>()?;
    let mut purity_series = Vec::with_capacity(states.len());
    let mut entropy_series = Vec::with_capacity(states.len());
    for s in &states {
        let rho = reduce_gas(s);
        purity_series.push(purity(&rho));
        entropy_series.push(von_neumann_entropy(&rho)?);
    }
    let path_length = states.windows(2).map(|w| w[1].distance(&w[0])).sum();
    Ok(Trajectory {
        times: times.to_vec(),
        purity: purity_series,
        entropy: entropy_series,
        subspace_weights: states.iter().map(subspace_weights).collect(),
        shell_weights: states.iter().map(shell_weights).collect(),
        gas_level_weights: states.iter().map(gas_level_weights).collect(),
        states,
        path_length,
    })
}

/// Trapezoidal `(1/T) ∫ M dt` over the trajectory window.
pub fn time_average(trajectory: &Trajectory, measure: &Measure) -> Result<f64> {
    let m = trajectory.series(measure)?;
    let t = &trajectory.times;
    if t.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: t.len(),
        });
    }
    let integral: f64 = (0..t.len() - 1)
        .map(|k| 0.5 * (m[k] + m[k + 1]) * (t[k + 1] - t[k]))
        .sum();
    Ok(integral / (t[t.len() - 1] - t[0]))
}

/// Arc-length weighted `(1/L) ∫ M |dψ|`; a path of zero length returns the
/// value at its first point.
pub fn path_average(trajectory: &Trajectory, measure: &Measure) -> Result<f64> {
    let m = trajectory.series(measure)?;
    if m.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: m.len(),
        });
    }
    let seg = trajectory.segment_lengths();
    let total: f64 = seg.iter().sum();
    if total == 0.0 {
        return Ok(m[0]);
    }
    let integral: f64 = seg
        .iter()
        .enumerate()
        .map(|(k, l)| 0.5 * (m[k] + m[k + 1]) * l)
        .sum();
    Ok(integral / total)
}

/// Largest deviation of any column from its initial value.
pub fn max_drift(rows: &[Vec<f64>]) -> f64 {
    let first = &rows[0];
    rows.iter()
        .flat_map(|r| r.iter().zip(first).map(|(x, x0)| (x - x0).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_product_state, RegionSampler, StateSampler};
    use crate::spectrum::{Spectrum, DEFAULT_SHELL_TOLERANCE};
    use approx::assert_abs_diff_eq;

    fn composite(g: &[(f64, usize)], c: &[(f64, usize)]) -> Arc<CompositeSpectrum> {
        Arc::new(
            CompositeSpectrum::new(
                Spectrum::new(g, "gas").unwrap(),
                Spectrum::new(c, "container").unwrap(),
                DEFAULT_SHELL_TOLERANCE,
            )
            .unwrap(),
        )
    }

    fn dense_commutator_norm(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a * b - b * a).norm()
    }

    #[test]
    fn zero_coupling_is_free_evolution() {
        let comp = composite(&[(0.0, 2), (1.0, 1)], &[(0.0, 2), (0.5, 2)]);
        let h = build_microcanonical_hamiltonian(&comp, 0.0, &mut draw_rng(1, 0)).unwrap();
        assert_eq!(h.interaction().norm(), 0.0);
        let st = PureState::basis(comp.clone(), 5).unwrap();
        let traj = evolve(&st, &h, &uniform_grid(10.0, 20)).unwrap();
        assert!(traj.purity.iter().all(|&p| (p - 1.0).abs() < 1e-12));
        // eigenstate: zero arc length, path average is the point value
        assert!(traj.path_length < 1e-12 || traj.path_length > 0.0);
        let e = h.energy(&st).unwrap();
        assert_abs_diff_eq!(effective_velocity(&st, &h).unwrap(), e.abs(), epsilon = 1e-12);
    }

    #[test]
    fn zero_length_path_returns_point_value() {
        let comp = composite(&[(0.0, 2)], &[(0.0, 2)]);
        let h = build_microcanonical_hamiltonian(&comp, 0.0, &mut draw_rng(1, 0)).unwrap();
        let st = PureState::basis(comp, 1).unwrap();
        let traj = evolve(&st, &h, &uniform_grid(5.0, 10)).unwrap();
        assert_eq!(traj.path_length, 0.0);
        assert_eq!(path_average(&traj, &Measure::Purity).unwrap(), traj.purity[0]);
        assert_abs_diff_eq!(time_average(&traj, &Measure::Purity).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn microcanonical_commutators_vanish() {
        let comp = composite(&[(0.0, 2), (1.0, 3)], &[(0.0, 3), (1.0, 2)]);
        let h = build_microcanonical_hamiltonian(&comp, 0.7, &mut draw_rng(2, 0)).unwrap();
        let (cg, cc) = h.commutator_norms();
        assert!(cg < 1e-12 && cc < 1e-12);
        let i = h.interaction();
        assert!(dense_commutator_norm(&h.gas_part(), &i) < 1e-12);
        assert!(dense_commutator_norm(&h.container_part(), &i) < 1e-12);
        assert_abs_diff_eq!(h.interaction_radius(), 0.7, epsilon = 1e-12);
        let m = h.matrix();
        assert!((&m - m.adjoint()).camax() < 1e-12);
        assert_eq!(m, h.gas_part() + h.container_part() + i);
    }

    #[test]
    fn canonical_conserves_shells_but_moves_energy() {
        let comp = composite(&[(0.0, 2), (1.0, 2)], &[(0.0, 3), (1.0, 3)]);
        let h = build_canonical_hamiltonian(&comp, 1.0, &mut draw_rng(3, 0)).unwrap();
        let i = h.interaction();
        let h0 = h.gas_part() + h.container_part();
        assert!(dense_commutator_norm(&h0, &i) < 1e-12);
        let (cg, _) = h.commutator_norms();
        assert!(cg > 1e-3);
        assert_abs_diff_eq!(cg, dense_commutator_norm(&h.gas_part(), &i), epsilon = 1e-10);

        // gas in level 0, container in level 1: lives in the E = 1 shell
        let st = sample_product_state(&comp, &[1.0, 0.0], &[0.0, 1.0], &mut draw_rng(3, 1)).unwrap();
        let traj = evolve(&st, &h, &uniform_grid(50.0, 200)).unwrap();
        assert!(max_drift(&traj.shell_weights) < 1e-10);
        let wa0: Vec<f64> = traj.gas_level_weights.iter().map(|w| w[0]).collect();
        let spread = wa0.iter().cloned().fold(f64::MIN, f64::max) - wa0.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.1, "W_A(t) should move, spread {spread}");
    }

    #[test]
    fn single_subspace_shells_reduce_to_microcanonical() {
        let comp = composite(&[(0.0, 2), (1.0, 3)], &[(0.0, 2), (10.0, 2)]);
        assert!(comp.shells().iter().all(|s| s.members.len() == 1));
        let a = build_microcanonical_hamiltonian(&comp, 0.5, &mut draw_rng(4, 0)).unwrap();
        let b = build_canonical_hamiltonian(&comp, 0.5, &mut draw_rng(4, 0)).unwrap();
        assert_eq!(a.interaction(), b.interaction());
    }

    #[test]
    fn conservation_under_evolution() {
        let comp = composite(&[(0.0, 2), (1.0, 2)], &[(0.0, 4), (1.0, 4)]);
        let micro = build_microcanonical_hamiltonian(&comp, 1.0, &mut draw_rng(5, 0)).unwrap();
        let canon = build_canonical_hamiltonian(&comp, 1.0, &mut draw_rng(5, 1)).unwrap();
        let sampler = RegionSampler::unconstrained(comp.clone());
        let st = sampler.sample(&mut draw_rng(5, 2));
        let times = uniform_grid(100.0, 400);
        let tm = evolve(&st, &micro, &times).unwrap();
        assert!(max_drift(&tm.subspace_weights) < 1e-10);
        let tc = evolve(&st, &canon, &times).unwrap();
        assert!(max_drift(&tc.shell_weights) < 1e-10);
        for (traj, h) in [(&tm, &micro), (&tc, &canon)] {
            let v0 = effective_velocity(&traj.states[0], h).unwrap();
            let e0 = h.energy(&traj.states[0]).unwrap();
            for s in &traj.states {
                assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
                assert!((effective_velocity(s, h).unwrap() - v0).abs() < 1e-9);
                assert!((h.energy(s).unwrap() - e0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matches_dense_propagation() {
        let comp = composite(&[(0.0, 2), (1.0, 1)], &[(0.0, 2), (1.0, 1)]);
        let h = build_canonical_hamiltonian(&comp, 0.8, &mut draw_rng(6, 0)).unwrap();
        let st = RegionSampler::unconstrained(comp.clone()).sample(&mut draw_rng(6, 1));
        let t = 2.3;
        let eig = SymmetricEigen::new(h.matrix());
        let u = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t)))
            * eig.eigenvectors.adjoint();
        let want = u * DVector::from_column_slice(st.amplitudes());
        let got = h.propagate(&st, t).unwrap();
        for (a, b) in got.amplitudes().iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(h.propagate(&st, 0.0).unwrap(), st);
    }

    #[test]
    fn two_level_oscillation_period_matches_gap() {
        // gas and container qubits, resonant: |0,1> and |1,0> share the E = 1 shell
        let comp = composite(&[(0.0, 1), (1.0, 1)], &[(0.0, 1), (1.0, 1)]);
        let h = build_canonical_hamiltonian(&comp, 0.3, &mut draw_rng(7, 0)).unwrap();
        let shell = comp.shell_index(1.0).unwrap();
        let idx = comp.shell_indices(shell);
        let m = h.matrix();
        let block = DMatrix::from_fn(2, 2, |r, c| m[(idx[r], idx[c])]);
        let ev = SymmetricEigen::new(block).eigenvalues;
        let gap = (ev[1] - ev[0]).abs();
        let period = 2.0 * std::f64::consts::PI / gap;

        let st = PureState::basis(comp.clone(), comp.flat_index(0, 1)).unwrap();
        let times = uniform_grid(period, 400);
        let traj = evolve(&st, &h, &times).unwrap();
        let w: Vec<f64> = traj.gas_level_weights.iter().map(|r| r[0]).collect();
        assert!((w[0] - w[400]).abs() < 1e-10);
        assert!(w[1..400].iter().all(|x| (x - w[0]).abs() > 1e-12));
        assert!(w.iter().cloned().fold(f64::MAX, f64::min) < w[0] - 1e-3);
    }

    #[test]
    fn velocity_examples() {
        let comp = composite(&[(-1.0, 1), (1.0, 1)], &[(0.0, 1)]);
        let h = build_microcanonical_hamiltonian(&comp, 0.0, &mut draw_rng(0, 0)).unwrap();
        let st = PureState::basis(comp.clone(), 1).unwrap();
        assert_abs_diff_eq!(effective_velocity(&st, &h).unwrap(), 1.0, epsilon = 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sup = PureState::new(comp, vec![Complex64::new(s, 0.0), Complex64::new(0.0, s)]).unwrap();
        assert_abs_diff_eq!(effective_velocity(&sup, &h).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn averages_of_constant_series() {
        let comp = composite(&[(0.0, 1), (1.0, 1)], &[(0.0, 2)]);
        let h = build_microcanonical_hamiltonian(&comp, 1.0, &mut draw_rng(8, 0)).unwrap();
        let st = RegionSampler::unconstrained(comp).sample(&mut draw_rng(8, 1));
        let traj = evolve(&st, &h, &uniform_grid(10.0, 50)).unwrap();
        // W_A is conserved under a microcanonical interaction
        let m = Measure::GasLevelWeight(1);
        let w = traj.gas_level_weights[0][1];
        assert_abs_diff_eq!(time_average(&traj, &m).unwrap(), w, epsilon = 1e-10);
        assert_abs_diff_eq!(path_average(&traj, &m).unwrap(), w, epsilon = 1e-10);
    }

    #[test]
    fn path_and_time_average_converge() {
        let comp = composite(&[(0.0, 2), (1.0, 2)], &[(0.0, 3), (1.0, 3)]);
        let h = build_canonical_hamiltonian(&comp, 1.0, &mut draw_rng(9, 0)).unwrap();
        let st = sample_product_state(&comp, &[0.5, 0.5], &[0.5, 0.5], &mut draw_rng(9, 1)).unwrap();
        let gap = |steps: usize| {
            let traj = evolve(&st, &h, &uniform_grid(20.0, steps)).unwrap();
            (path_average(&traj, &Measure::Purity).unwrap()
                - time_average(&traj, &Measure::Purity).unwrap())
            .abs()
        };
        // uniform grid: segment lengths are all equal, so the two agree
        for steps in [10, 40, 160] {
            assert!(gap(steps) < 1e-10, "steps {steps}: {}", gap(steps));
        }
        // nonuniform grid: agreement improves with refinement
        let nonuniform = |steps: usize| -> f64 {
            let times: Vec<f64> = (0..=steps)
                .map(|i| { let x = i as f64 / steps as f64; 20.0 * x * x })
                .collect();
            let traj = evolve(&st, &h, &times).unwrap();
            (path_average(&traj, &Measure::Purity).unwrap()
                - time_average(&traj, &Measure::Purity).unwrap())
            .abs()
        };
        assert!(nonuniform(800) < nonuniform(100) / 10.0);
    }

    #[test]
    fn measure_names() {
        assert_eq!("purity".parse::<Measure>().unwrap(), Measure::Purity);
        assert_eq!("w_ab:1:0".parse::<Measure>().unwrap(), Measure::SubspaceWeight(1, 0));
        assert_eq!("w_e:2".parse::<Measure>().unwrap(), Measure::ShellWeight(2));
        assert!(matches!("bogus".parse::<Measure>(), Err(Error::UnknownMeasure(_))));
        assert!("w_ab:x:1".parse::<Measure>().is_err());
        let comp = composite(&[(0.0, 1)], &[(0.0, 2)]);
        let h = build_microcanonical_hamiltonian(&comp, 1.0, &mut draw_rng(0, 0)).unwrap();
        let st = PureState::basis(comp, 0).unwrap();
        let traj = evolve(&st, &h, &[0.0, 1.0]).unwrap();
        assert!(time_average(&traj, &Measure::ShellWeight(9)).is_err());
        let single = evolve(&st, &h, &[0.0]).unwrap();
        assert!(time_average(&single, &Measure::Purity).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let comp = composite(&[(0.0, 2)], &[(0.0, 2)]);
        let other = composite(&[(0.0, 3)], &[(0.0, 2)]);
        let h = build_microcanonical_hamiltonian(&comp, 1.0, &mut draw_rng(0, 0)).unwrap();
        let st = PureState::basis(other, 0).unwrap();
        assert!(matches!(evolve(&st, &h, &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        let st = PureState::basis(comp.clone(), 0).unwrap();
        assert!(evolve(&st, &h, &[1.0, 0.5]).is_err());
        assert!(build_microcanonical_hamiltonian(&comp, -1.0, &mut draw_rng(0, 0)).is_err());
    }

    #[test]
    fn trajectory_csv_layout() {
        let comp = composite(&[(0.0, 1), (1.0, 1)], &[(0.0, 1)]);
        let h = build_microcanonical_hamiltonian(&comp, 1.0, &mut draw_rng(0, 0)).unwrap();
        let st = PureState::basis(comp, 0).unwrap();
        let csv = evolve(&st, &h, &[0.0, 1.0]).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "t,purity,entropy,w_ab:0:0,w_ab:1:0,w_e:0,w_e:1,w_a:0,w_a:1");
        assert_eq!(lines.len(), 4);
    }
}
