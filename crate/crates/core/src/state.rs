//! Pure states over a composite basis and the local measures derived from them.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectrum::{CompositeSpectrum, Spectrum};

pub const NORM_TOLERANCE: f64 = 1e-10;
const HERMITIAN_TOLERANCE: f64 = 1e-10;
const NEGATIVE_EIGENVALUE_LIMIT: f64 = -1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    composite: Arc<CompositeSpectrum>,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Wraps `amplitudes` if they are normalized to within [`NORM_TOLERANCE`].
    pub fn new(composite: Arc<CompositeSpectrum>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != composite.dim() {
            return Err(Error::DimensionMismatch {
                expected: composite.dim(),
                found: amplitudes.len(),
            });
        }
        let n2 = norm_sqr(&amplitudes);
        if !n2.is_finite() || (n2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Unnormalized(n2));
        }
        Ok(Self {
            composite,
            amplitudes,
        })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(
        composite: Arc<CompositeSpectrum>,
        mut amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        let n2 = norm_sqr(&amplitudes);
        if !(n2.is_finite() && n2 > 0.0) {
            return Err(Error::Unnormalized(n2));
        }
        let s = 1.0 / n2.sqrt();
        amplitudes.iter_mut().for_each(|z| *z *= s);
        Self::new(composite, amplitudes)
    }

    /// Basis state `|i>` of the flat layout.
    pub fn basis(composite: Arc<CompositeSpectrum>, index: usize) -> Result<Self> {
        let dim = composite.dim();
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self::new(composite, amps)
    }

    /// `|g> ⊗ |c>` from local vectors; each is normalized first.
    pub fn product(
        composite: Arc<CompositeSpectrum>,
        gas: &[Complex64],
        container: &[Complex64],
    ) -> Result<Self> {
        let (dg, dc) = (composite.gas().dim(), composite.container().dim());
        if gas.len() != dg {
            return Err(Error::DimensionMismatch {
                expected: dg,
                found: gas.len(),
            });
        }
        if container.len() != dc {
            return Err(Error::DimensionMismatch {
                expected: dc,
                found: container.len(),
            });
        }
        let mut amps = Vec::with_capacity(dg * dc);
        for g in gas {
            for c in container {
                amps.push(g * c);
            }
        }
        Self::normalized(composite, amps)
    }

    pub(crate) fn from_parts_unchecked(
        composite: Arc<CompositeSpectrum>,
        amplitudes: Vec<Complex64>,
    ) -> Self {
        debug_assert_eq!(amplitudes.len(), composite.dim());
        Self {
            composite,
            amplitudes,
        }
    }

    pub fn composite(&self) -> &Arc<CompositeSpectrum> {
        &self.composite
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    /// `ψ` reshaped as a `dim(gas) × dim(container)` matrix.
    pub fn amplitude_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            self.composite.gas().dim(),
            self.composite.container().dim(),
            &self.amplitudes,
        )
    }

    /// `‖ψ − φ‖`.
    pub fn distance(&self, other: &PureState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Writes the state as CSV with a header recording the composite layout.
    pub fn to_csv(&self) -> String {
        let c = &self.composite;
        let mut out = String::new();
        out.push_str("# typica-state v1\n");
        let _ = writeln!(out, "# gas: {}", levels_header(c.gas()));
        let _ = writeln!(out, "# container: {}", levels_header(c.container()));
        let _ = writeln!(out, "# shell_tolerance: {:e}", c.shell_tolerance());
        out.push_str("index,A,a,B,b,re,im\n");
        let dc = c.container().dim();
        for (i, z) in self.amplitudes.iter().enumerate() {
            let (g, cb) = (i / dc, i % dc);
            let la = c.gas().level_of(g);
            let lb = c.container().level_of(cb);
            let _ = writeln!(
                out,
                "{i},{la},{},{lb},{},{:e},{:e}",
                g - c.gas().offset(la),
                cb - c.container().offset(lb),
                z.re,
                z.im
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut gas = None;
        let mut container = None;
        let mut tol = crate::spectrum::DEFAULT_SHELL_TOLERANCE;
        let mut rows = Vec::new();
        let mut saw_columns = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(h) = line.strip_prefix('#') {
                let h = h.trim();
                if let Some(v) = h.strip_prefix("gas:") {
                    gas = Some(parse_levels_header(v, "gas")?);
                } else if let Some(v) = h.strip_prefix("container:") {
                    container = Some(parse_levels_header(v, "container")?);
                } else if let Some(v) = h.strip_prefix("shell_tolerance:") {
                    tol = parse_num(v)?;
                }
                continue;
            }
            if !saw_columns {
                if line != "index,A,a,B,b,re,im" {
                    return Err(Error::Parse(format!("unexpected column header `{line}`")));
                }
                saw_columns = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Parse(format!("expected 7 fields in `{line}`")));
            }
            let index: usize = parse_num(fields[0])?;
            rows.push((index, Complex64::new(parse_num(fields[5])?, parse_num(fields[6])?)));
        }
        let gas = gas.ok_or_else(|| Error::Parse("missing gas header".into()))?;
        let container = container.ok_or_else(|| Error::Parse("missing container header".into()))?;
        let composite = Arc::new(CompositeSpectrum::new(gas, container, tol)?);
        if rows.len() != composite.dim() {
            return Err(Error::DimensionMismatch {
                expected: composite.dim(),
                found: rows.len(),
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); composite.dim()];
        let mut seen = vec![false; composite.dim()];
        for (i, z) in rows {
            if i >= amps.len() || seen[i] {
                return Err(Error::Parse(format!("bad or repeated index {i}")));
            }
            seen[i] = true;
            amps[i] = z;
        }
        Self::new(composite, amps)
    }
}

fn levels_header(s: &Spectrum) -> String {
    s.levels()
        .iter()
        .map(|l| format!("{:e}:{}", l.energy, l.degeneracy))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_levels_header(v: &str, label: &str) -> Result<Spectrum> {
    let levels = v
        .trim()
        .split(',')
        .map(|item| {
            let (e, n) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad level `{item}`")))?;
            Ok((parse_num(e)?, parse_num(n)?))
        })
        .collect::<Result<Vec<(f64, usize)>>>()?;
    Spectrum::new(&levels, label)
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse `{}`", s.trim())))
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Hermitian, unit-trace, positive semidefinite operator on one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix("matrix must be square and nonempty".into()));
        }
        let herm_err = (&matrix - matrix.adjoint()).camax();
        if herm_err > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm_err:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > NORM_TOLERANCE || tr.im.abs() > NORM_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!("trace is {tr}")));
        }
        let rho = Self { matrix };
        if let Some(&min) = rho.eigenvalues().iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -NORM_TOLERANCE {
                return Err(Error::NegativeEigenvalue(min));
            }
        }
        Ok(rho)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let d = nalgebra::DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&x| Complex64::new(x, 0.0)),
        );
        Self::new(DMatrix::from_diagonal(&d))
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, unitary: &DMatrix<Complex64>) -> Result<Self> {
        if unitary.shape() != self.matrix.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: unitary.nrows(),
            });
        }
        Ok(Self::from_matrix_unchecked(unitary * &self.matrix * unitary.adjoint()))
    }
}

/// `ρ^g = Tr_c |ψ><ψ|`, entries `Σ_{B,b} ψ_ab^{AB} (ψ_a'b^{A'B})*`.
pub fn reduce_gas(state: &PureState) -> DensityMatrix {
    let m = state.amplitude_matrix();
    DensityMatrix::from_matrix_unchecked(&m * m.adjoint())
}

/// `ρ^c = Tr_g |ψ><ψ|`.
pub fn reduce_container(state: &PureState) -> DensityMatrix {
    let m = state.amplitude_matrix();
    DensityMatrix::from_matrix_unchecked(m.transpose() * m.conjugate())
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Hermitian: Tr ρ² = Σ_ij |ρ_ij|²
    rho.matrix.iter().map(|z| z.norm_sqr()).sum()
}

/// Local purity of the gas evaluated as the literal quadruple amplitude sum
/// `Σ ψ_{gc} ψ*_{g'c} ψ_{g'c'} ψ*_{gc'}`. Scales as `dim(g)²·dim(c)²`; use
/// `purity(&reduce_gas(…))` outside of small cross-checks.
pub fn purity_from_amplitudes(state: &PureState) -> f64 {
    let dg = state.composite.gas().dim();
    let dc = state.composite.container().dim();
    let psi = |g: usize, c: usize| state.amplitudes[g * dc + c];
    let mut acc = Complex64::new(0.0, 0.0);
    for g in 0..dg {
        for gp in 0..dg {
            for c in 0..dc {
                for cp in 0..dc {
                    acc += psi(g, c) * psi(gp, c).conj() * psi(gp, cp) * psi(g, cp).conj();
                }
            }
        }
    }
    acc.re
}

/// `−Σ W_n ln W_n` with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of_spectrum(&rho.eigenvalues())
}

pub(crate) fn entropy_of_spectrum(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &w in eigenvalues {
        if w < NEGATIVE_EIGENVALUE_LIMIT {
            return Err(Error::NegativeEigenvalue(w));
        }
        if w > 0.0 {
            s -= w * w.ln();
        }
    }
    Ok(s)
}

/// `W_AB = Σ_{a,b} |ψ_ab^{AB}|²`, indexed like [`CompositeSpectrum::subspaces`].
pub fn subspace_weights(state: &PureState) -> Vec<f64> {
    let c = &state.composite;
    let dc = c.container().dim();
    let nb = c.container().len();
    let mut w = vec![0.0; c.subspaces().len()];
    for la in 0..c.gas().len() {
        for g in c.gas().range(la) {
            let row = &state.amplitudes[g * dc..(g + 1) * dc];
            for lb in 0..nb {
                w[la * nb + lb] += row[c.container().range(lb)]
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>();
            }
        }
    }
    w
}

/// `W_E = Σ_{A,B/E} W_AB`, indexed like [`CompositeSpectrum::shells`].
pub fn shell_weights(state: &PureState) -> Vec<f64> {
    shell_sums(&state.composite, &subspace_weights(state))
}

pub(crate) fn shell_sums(composite: &CompositeSpectrum, per_subspace: &[f64]) -> Vec<f64> {
    composite
        .shells()
        .iter()
        .map(|s| s.members.iter().map(|&k| per_subspace[k]).sum())
        .collect()
}

/// Gas level populations `W_A = Σ_B W_AB`.
pub fn gas_level_weights(state: &PureState) -> Vec<f64> {
    let c = &state.composite;
    let nb = c.container().len();
    subspace_weights(state)
        .chunks(nb)
        .map(|row| row.iter().sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::DEFAULT_SHELL_TOLERANCE;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

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

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(comp: Arc<CompositeSpectrum>, rng: &mut ChaCha8Rng) -> PureState {
        let amps = (0..comp.dim())
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        PureState::normalized(comp, amps).unwrap()
    }

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        let g = DMatrix::from_fn(n, n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        g.qr().q()
    }

    #[test]
    fn rejects_unnormalized() {
        let comp = composite(&[(0.0, 2)], &[(0.0, 1)]);
        let r = PureState::new(comp.clone(), vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(r, Err(Error::Unnormalized(_))));
        let r = PureState::new(comp, vec![c(1.0, 0.0)]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn product_state_reduces_to_projector() {
        let comp = composite(&[(0.0, 2)], &[(0.0, 3)]);
        let g = [c(0.6, 0.0), c(0.0, 0.8)];
        let cv = [c(1.0, 0.0), c(1.0, 1.0), c(0.0, -2.0)];
        let st = PureState::product(comp, &g, &cv).unwrap();
        let rho = reduce_gas(&st);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!((rho.matrix()[(i, j)] - g[i] * g[j].conj()).norm(), 0.0, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(purity(&rho), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(purity_from_amplitudes(&st), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(von_neumann_entropy(&rho).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn bell_state() {
        let comp = composite(&[(0.0, 2)], &[(0.0, 2)]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let st = PureState::new(comp, vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]).unwrap();
        let rho = reduce_gas(&st);
        assert_abs_diff_eq!(rho.matrix()[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.matrix()[(1, 1)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(purity(&rho), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(purity_from_amplitudes(&st), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(von_neumann_entropy(&rho).unwrap(), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn reduced_spectrum_matches_singular_values() {
        let comp = composite(&[(0.0, 2)], &[(0.0, 2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let st = random_state(comp.clone(), &mut rng);
            let rho = reduce_gas(&st);
            assert_abs_diff_eq!(rho.matrix().trace().re, 1.0, epsilon = 1e-12);
            let mut sv: Vec<f64> = st
                .amplitude_matrix()
                .svd(false, false)
                .singular_values
                .iter()
                .map(|s| s * s)
                .collect();
            sv.sort_by(|a, b| a.total_cmp(b));
            let ev = rho.eigenvalues();
            for (a, b) in ev.iter().zip(&sv) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn purity_examples() {
        let p = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(purity(&p), 1.0);
        let m = DensityMatrix::from_diagonal(&[0.25; 4]).unwrap();
        assert_abs_diff_eq!(purity(&m), 0.25, epsilon = 1e-15);
        let d = DensityMatrix::from_diagonal(&[0.5, 0.25, 0.25]).unwrap();
        assert_abs_diff_eq!(purity(&d), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn entropy_examples() {
        let p = DensityMatrix::from_diagonal(&[0.0, 1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&p).unwrap(), 0.0, epsilon = 1e-15);
        for n in [2usize, 3, 7] {
            let m = DensityMatrix::from_diagonal(&vec![1.0 / n as f64; n]).unwrap();
            assert_abs_diff_eq!(von_neumann_entropy(&m).unwrap(), (n as f64).ln(), epsilon = 1e-12);
        }
        let d = DensityMatrix::from_diagonal(&[0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&d).unwrap(), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn entropy_rejects_corrupted_spectrum() {
        assert!(matches!(
            entropy_of_spectrum(&[1.1, -0.1]),
            Err(Error::NegativeEigenvalue(_))
        ));
        // tiny negative rounding noise is clamped
        assert_abs_diff_eq!(entropy_of_spectrum(&[1.0, -1e-11]).unwrap(), 0.0);
        assert!(DensityMatrix::from_diagonal(&[1.2, -0.2]).is_err());
        assert!(DensityMatrix::from_diagonal(&[0.5, 0.4]).is_err());
    }

    #[test]
    fn quadruple_sum_matches_trace_path() {
        let comp = composite(&[(0.0, 2), (1.0, 2)], &[(0.0, 1), (1.0, 3)]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let st = random_state(comp.clone(), &mut rng);
            assert_abs_diff_eq!(purity_from_amplitudes(&st), purity(&reduce_gas(&st)), epsilon = 1e-10);
        }
    }

    #[test]
    fn subspace_weight_examples() {
        let comp = composite(&[(0.0, 2), (1.0, 2)], &[(0.0, 2)]);
        // all amplitude in (A=1, B=0)
        let st = PureState::basis(comp.clone(), comp.flat_index(3, 1)).unwrap();
        assert_eq!(subspace_weights(&st), vec![0.0, 1.0]);
        assert_eq!(shell_weights(&st), vec![0.0, 1.0]);
        let amps = vec![c(0.5, 0.0); 8]
            .into_iter()
            .enumerate()
            .map(|(i, z)| if i % 2 == 0 { z } else { c(0.0, 0.0) })
            .collect();
        let st = PureState::new(comp, amps).unwrap();
        let w = subspace_weights(&st);
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn product_weights_factorize() {
        let comp = composite(&[(0.0, 2), (1.0, 2)], &[(0.0, 4), (1.0, 4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut local = |spec: &Spectrum, weights: &[f64]| -> Vec<Complex64> {
            let mut v = Vec::new();
            for (l, &w) in weights.iter().enumerate() {
                let block: Vec<Complex64> = (0..spec.degeneracy(l))
                    .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                    .collect();
                let n = norm_sqr(&block).sqrt();
                v.extend(block.into_iter().map(|z| z * (w.sqrt() / n)));
            }
            v
        };
        let g = local(comp.gas(), &[0.3, 0.7]);
        let cv = local(comp.container(), &[0.4, 0.6]);
        let st = PureState::product(comp, &g, &cv).unwrap();
        let w = subspace_weights(&st);
        for (got, want) in w.iter().zip([0.12, 0.18, 0.28, 0.42]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let we = shell_weights(&st);
        for (got, want) in we.iter().zip([0.12, 0.46, 0.42]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let wa = gas_level_weights(&st);
        assert_abs_diff_eq!(wa[0], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn uniform_state_shell_weights_follow_dimensions() {
        let comp = composite(&[(0.0, 2), (1.0, 2)], &[(0.0, 4), (1.0, 4)]);
        let s = 1.0 / (comp.dim() as f64).sqrt();
        let st = PureState::new(comp.clone(), vec![c(s, 0.0); comp.dim()]).unwrap();
        let we = shell_weights(&st);
        for (got, want) in we.iter().zip([0.25, 0.5, 0.25]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(PureState::from_csv("hello").is_err());
        assert!(PureState::from_csv("# gas: 0:1\n# container: 0:1\nindex,A,a,B,b,re,im\n0,0,0,0,0,2,0\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn local_measures_are_consistent(seed in any::<u64>(), ng in 1usize..4, nc in 1usize..5, ng2 in 1usize..3) {
            let comp = composite(&[(0.0, ng), (1.5, ng2)], &[(0.0, nc), (0.5, 2)]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let st = random_state(comp, &mut rng);
            let rg = reduce_gas(&st);
            let rc = reduce_container(&st);
            let p = purity(&rg);
            prop_assert!((p - purity_from_amplitudes(&st)).abs() < 1e-10);
            prop_assert!((p - purity(&rc)).abs() < 1e-10);
            prop_assert!(p <= 1.0 + 1e-12 && p >= 1.0 / rg.dim() as f64 - 1e-12);
            let s = von_neumann_entropy(&rg).unwrap();
            prop_assert!(s >= -1e-12 && s <= (rg.dim() as f64).ln() + 1e-12);
            let u = random_unitary(rg.dim(), &mut rng);
            let rot = rg.conjugate(&u).unwrap();
            prop_assert!((purity(&rot) - p).abs() < 1e-10);
            prop_assert!((von_neumann_entropy(&rot).unwrap() - s).abs() < 1e-10);
            prop_assert!(DensityMatrix::new(rg.matrix().clone()).is_ok());
        }

        #[test]
        fn csv_round_trip(seed in any::<u64>()) {
            let comp = composite(&[(0.0, 2), (0.25, 1)], &[(-1.0, 2), (3.0, 1)]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let st = random_state(comp, &mut rng);
            let back = PureState::from_csv(&st.to_csv()).unwrap();
            prop_assert_eq!(back, st);
        }
    }
}
