//! Subsystem spectra and the joint index space of a bipartite composite.
//!
//! The composite basis is the product basis `|A,a> ⊗ |B,b>` ordered
//! lexicographically in `(A, a, B, b)`: gas index `g = offset(A) + a`,
//! container index `c = offset(B) + b`, flat index `g * dim(container) + c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance used to group `E_A + E_B` into shells.
pub const DEFAULT_SHELL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub degeneracy: usize,
}

/// Energy levels of one subsystem, sorted by strictly increasing energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    label: String,
    levels: Vec<Level>,
    offsets: Vec<usize>,
    dim: usize,
}

impl Spectrum {
    pub fn new(levels: &[(f64, usize)], label: impl Into<String>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        let mut sorted: Vec<Level> = Vec::with_capacity(levels.len());
        for &(energy, degeneracy) in levels {
            if !energy.is_finite() {
                return Err(Error::NonFiniteEnergy(energy));
            }
            if degeneracy == 0 {
                return Err(Error::NonPositiveDegeneracy(energy));
            }
            sorted.push(Level { energy, degeneracy });
        }
        sorted.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        for pair in sorted.windows(2) {
            if pair[0].energy == pair[1].energy {
                return Err(Error::DuplicateEnergy(pair[0].energy));
            }
        }
        let mut offsets = Vec::with_capacity(sorted.len());
        let mut dim = 0;
        for level in &sorted {
            offsets.push(dim);
            dim += level.degeneracy;
        }
        Ok(Self {
            label: label.into(),
            levels: sorted,
            offsets,
            dim,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Total Hilbert-space dimension `Σ_A N_A`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn energy(&self, level: usize) -> f64 {
        self.levels[level].energy
    }

    pub fn degeneracy(&self, level: usize) -> usize {
        self.levels[level].degeneracy
    }

    pub fn degeneracies(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.degeneracy).collect()
    }

    /// First basis index belonging to `level`.
    pub fn offset(&self, level: usize) -> usize {
        self.offsets[level]
    }

    /// Basis indices spanned by `level`.
    pub fn range(&self, level: usize) -> std::ops::Range<usize> {
        let start = self.offsets[level];
        start..start + self.levels[level].degeneracy
    }

    /// Level that contains basis index `index`.
    pub fn level_of(&self, index: usize) -> usize {
        match self.offsets.binary_search(&index) {
            Ok(l) => l,
            Err(l) => l - 1,
        }
    }

    pub fn level_index(&self, energy: f64) -> Option<usize> {
        self.levels.iter().position(|l| l.energy == energy)
    }
}

/// Joint degeneracy subspace `(A, B)` of the uncoupled local Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSubspace {
    pub gas_level: usize,
    pub container_level: usize,
    /// `N_AB = N_A · N_B`.
    pub dim: usize,
    /// `E_A + E_B`.
    pub energy: f64,
}

/// All subspaces whose total energy agrees within the shell tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    /// Lowest member energy; the shell's representative value.
    pub energy: f64,
    /// Indices into [`CompositeSpectrum::subspaces`], ascending.
    pub members: Vec<usize>,
    /// `N_E = Σ_{A,B/E} N_AB`.
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpectrum {
    gas: Spectrum,
    container: Spectrum,
    subspaces: Vec<JointSubspace>,
    shells: Vec<Shell>,
    shell_of: Vec<usize>,
    shell_tolerance: f64,
}

impl CompositeSpectrum {
    pub fn new(gas: Spectrum, container: Spectrum, shell_tolerance: f64) -> Result<Self> {
        if !(shell_tolerance.is_finite() && shell_tolerance >= 0.0) {
            return Err(Error::InvalidTolerance(shell_tolerance));
        }
        let mut subspaces = Vec::with_capacity(gas.len() * container.len());
        for (a, gl) in gas.levels().iter().enumerate() {
            for (b, cl) in container.levels().iter().enumerate() {
                subspaces.push(JointSubspace {
                    gas_level: a,
                    container_level: b,
                    dim: gl.degeneracy * cl.degeneracy,
                    energy: gl.energy + cl.energy,
                });
            }
        }

        let mut by_energy: Vec<usize> = (0..subspaces.len()).collect();
        by_energy.sort_by(|&i, &j| subspaces[i].energy.total_cmp(&subspaces[j].energy));
        let mut shells: Vec<Shell> = Vec::new();
        for k in by_energy {
            let e = subspaces[k].energy;
            match shells.last_mut() {
                Some(shell) if (e - shell.energy).abs() <= shell_tolerance => {
                    shell.members.push(k);
                    shell.dim += subspaces[k].dim;
                }
                _ => shells.push(Shell {
                    energy: e,
                    members: vec![k],
                    dim: subspaces[k].dim,
                }),
            }
        }
        let mut shell_of = vec![0; subspaces.len()];
        for (s, shell) in shells.iter_mut().enumerate() {
            shell.members.sort_unstable();
            for &k in &shell.members {
                shell_of[k] = s;
            }
        }

        Ok(Self {
            gas,
            container,
            subspaces,
            shells,
            shell_of,
            shell_tolerance,
        })
    }

    pub fn gas(&self) -> &Spectrum {
        &self.gas
    }

    pub fn container(&self) -> &Spectrum {
        &self.container
    }

    /// Joint subspaces in lexicographic `(A, B)` order.
    pub fn subspaces(&self) -> &[JointSubspace] {
        &self.subspaces
    }

    pub fn shells(&self) -> &[Shell] {
        &self.shells
    }

    pub fn shell_tolerance(&self) -> f64 {
        self.shell_tolerance
    }

    /// Total dimension `dim(gas) · dim(container)`.
    pub fn dim(&self) -> usize {
        self.gas.dim() * self.container.dim()
    }

    pub fn subspace_index(&self, gas_level: usize, container_level: usize) -> Option<usize> {
        (gas_level < self.gas.len() && container_level < self.container.len())
            .then(|| gas_level * self.container.len() + container_level)
    }

    pub fn shell_of(&self, subspace: usize) -> usize {
        self.shell_of[subspace]
    }

    pub fn shell_index(&self, energy: f64) -> Option<usize> {
        self.shells
            .iter()
            .position(|s| (s.energy - energy).abs() <= self.shell_tolerance)
    }

    pub fn flat_index(&self, gas_basis: usize, container_basis: usize) -> usize {
        gas_basis * self.container.dim() + container_basis
    }

    /// Flat amplitude indices of subspace `k`, in `(a, b)` order.
    pub fn subspace_indices(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let s = self.subspaces[k];
        let dc = self.container.dim();
        let cr = self.container.range(s.container_level);
        self.gas
            .range(s.gas_level)
            .flat_map(move |g| cr.clone().map(move |c| g * dc + c))
    }

    /// Flat amplitude indices of shell `s`, member subspaces concatenated.
    pub fn shell_indices(&self, s: usize) -> Vec<usize> {
        self.shells[s]
            .members
            .iter()
            .flat_map(|&k| self.subspace_indices(k))
            .collect()
    }

    /// Subspace containing flat index `i`.
    pub fn subspace_of_flat(&self, i: usize) -> usize {
        let dc = self.container.dim();
        let a = self.gas.level_of(i / dc);
        let b = self.container.level_of(i % dc);
        a * self.container.len() + b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(levels: &[(f64, usize)]) -> Spectrum {
        Spectrum::new(levels, "t").unwrap()
    }

    #[test]
    fn minimal_spectrum() {
        let s = sp(&[(0.0, 1)]);
        assert_eq!(s.dim(), 1);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn two_level_spectrum() {
        let s = sp(&[(1.0, 2), (0.0, 2)]);
        assert_eq!(s.dim(), 4);
        assert_eq!(s.len(), 2);
        assert_eq!(s.energy(0), 0.0);
        assert_eq!(s.range(1), 2..4);
        assert_eq!(s.level_of(3), 1);
        assert_eq!(s.level_of(1), 0);
    }

    #[test]
    fn rejects_bad_levels() {
        assert_eq!(
            Spectrum::new(&[(0.0, 1), (0.0, 3)], "g"),
            Err(Error::DuplicateEnergy(0.0))
        );
        assert_eq!(
            Spectrum::new(&[(0.0, 0)], "g"),
            Err(Error::NonPositiveDegeneracy(0.0))
        );
        assert_eq!(Spectrum::new(&[], "g"), Err(Error::EmptySpectrum));
        assert!(Spectrum::new(&[(f64::NAN, 1)], "g").is_err());
    }

    #[test]
    fn compose_symmetric_example() {
        let c = CompositeSpectrum::new(
            sp(&[(0.0, 2), (1.0, 2)]),
            sp(&[(0.0, 4), (1.0, 4)]),
            DEFAULT_SHELL_TOLERANCE,
        )
        .unwrap();
        assert_eq!(c.subspaces().len(), 4);
        assert!(c.subspaces().iter().all(|s| s.dim == 8));
        let shells: Vec<(f64, usize)> = c.shells().iter().map(|s| (s.energy, s.dim)).collect();
        assert_eq!(shells, vec![(0.0, 8), (1.0, 16), (2.0, 8)]);
    }

    #[test]
    fn compose_trivial() {
        let c = CompositeSpectrum::new(sp(&[(0.0, 1)]), sp(&[(0.0, 1)]), 0.0).unwrap();
        assert_eq!(c.subspaces().len(), 1);
        assert_eq!(c.subspaces()[0].dim, 1);
        assert_eq!(c.shells().len(), 1);
        assert_eq!(c.shells()[0].dim, 1);
    }

    #[test]
    fn compose_asymmetric_matches_enumeration() {
        let gas = [(0.0, 1), (1.0, 3)];
        let cont = [(0.0, 2), (1.0, 2)];
        let c = CompositeSpectrum::new(sp(&gas), sp(&cont), DEFAULT_SHELL_TOLERANCE).unwrap();
        // brute force: every pair (A,B), bucket by E_A + E_B
        let mut expected: std::collections::BTreeMap<i64, (Vec<(usize, usize)>, usize)> =
            Default::default();
        for (a, &(ea, na)) in gas.iter().enumerate() {
            for (b, &(eb, nb)) in cont.iter().enumerate() {
                let e = expected.entry((ea + eb) as i64).or_default();
                e.0.push((a, b));
                e.1 += na * nb;
            }
        }
        assert_eq!(c.shells().len(), expected.len());
        for (shell, (e, (members, n))) in c.shells().iter().zip(expected) {
            assert_eq!(shell.energy, e as f64);
            assert_eq!(shell.dim, n);
            let got: Vec<(usize, usize)> = shell
                .members
                .iter()
                .map(|&k| (c.subspaces()[k].gas_level, c.subspaces()[k].container_level))
                .collect();
            assert_eq!(got, members);
        }
        assert_eq!(
            c.shells().iter().map(|s| s.dim).collect::<Vec<_>>(),
            vec![2, 8, 6]
        );
    }

    #[test]
    fn tolerance_merges_nearby_energies() {
        let c = CompositeSpectrum::new(
            sp(&[(0.0, 1), (0.1 + 0.2, 1)]),
            sp(&[(0.0, 1), (0.3, 1)]),
            DEFAULT_SHELL_TOLERANCE,
        )
        .unwrap();
        assert_eq!(c.shells().len(), 3);
        assert!(CompositeSpectrum::new(sp(&[(0.0, 1)]), sp(&[(0.0, 1)]), -1.0).is_err());
    }

    #[test]
    fn subspace_indices_cover_basis() {
        let c = CompositeSpectrum::new(
            sp(&[(0.0, 2), (1.0, 3)]),
            sp(&[(0.0, 1), (2.0, 2)]),
            0.0,
        )
        .unwrap();
        let mut seen = vec![false; c.dim()];
        for k in 0..c.subspaces().len() {
            let idx: Vec<usize> = c.subspace_indices(k).collect();
            assert_eq!(idx.len(), c.subspaces()[k].dim);
            for i in idx {
                assert!(!seen[i]);
                assert_eq!(c.subspace_of_flat(i), k);
                seen[i] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    fn arb_levels() -> impl Strategy<Value = Vec<(f64, usize)>> {
        proptest::collection::btree_map(0i32..8, 1usize..5, 1..5)
            .prop_map(|m| m.into_iter().map(|(e, n)| (e as f64, n)).collect())
    }

    proptest! {
        #[test]
        fn shells_partition_subspaces(g in arb_levels(), c in arb_levels()) {
            let comp = CompositeSpectrum::new(sp(&g), sp(&c), DEFAULT_SHELL_TOLERANCE).unwrap();
            let mut count = vec![0usize; comp.subspaces().len()];
            for shell in comp.shells() {
                for &k in &shell.members {
                    count[k] += 1;
                    prop_assert!((comp.subspaces()[k].energy - shell.energy).abs() < 1e-9);
                }
            }
            prop_assert!(count.iter().all(|&n| n == 1));
            let total: usize = comp.shells().iter().map(|s| s.dim).sum();
            prop_assert_eq!(total, comp.gas().dim() * comp.container().dim());
            let sub_total: usize = comp.subspaces().iter().map(|s| s.dim).sum();
            prop_assert_eq!(sub_total, comp.dim());
        }
    }
}
