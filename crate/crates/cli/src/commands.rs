use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use typica::analytics::{gibbs_distribution, TemperatureFit};
use typica::dynamics::{default_time_grid, max_drift, uniform_grid, DEFAULT_STEPS};
use typica::sampling::{draw_rng, sample_product_state, sample_values, sphere_moments_mc};
use typica::state::gas_level_weights;
use typica::{
    build_canonical_hamiltonian, build_microcanonical_hamiltonian, dominant_distribution,
    effective_velocity, evolve, expected_purity_approx, expected_purity_exact, fit_temperature,
    hypersphere_moment, lubkin_average, marginal_gas_distribution, max_entropy_micro, mc_average,
    min_purity_state, path_average, purity, reduce_gas, time_average, von_neumann_entropy,
    CompositeSpectrum, ConstraintKind, ConstraintProfile, McEstimate, Measure, MomentQuery,
    PureState, RegionSampler, Spectrum, StateSampler, Trajectory,
};

use crate::config::{ExperimentConfig, InitialState, DEFAULT_SAMPLES};
use crate::CliError;

const CONSERVATION_TOLERANCE: f64 = 1e-10;
const NORM_TOLERANCE: f64 = 1e-9;

pub const SAMPLES_HEADER: &str = "# typica-samples v1";
pub const SUMMARY_HEADER: &str = "measure,mean,std_error,n,seed";

fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Metadata carried by every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    /// Fully resolved configuration, as TOML.
    pub config: String,
}

impl RunInfo {
    fn new(command: &str, cfg: &ExperimentConfig) -> Result<Self, CliError> {
        Ok(Self {
            command: command.into(),
            version: version().into(),
            seed: cfg.seed()?,
            config_hash: cfg.hash(),
            config: cfg.to_toml(),
        })
    }
}

pub fn build_composite(cfg: &ExperimentConfig) -> Result<Arc<CompositeSpectrum>, CliError> {
    let gas = cfg
        .gas
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [gas] section".into()))?;
    let cont = cfg
        .container
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [container] section".into()))?;
    let composite = CompositeSpectrum::new(
        Spectrum::new(&gas.levels, "gas")?,
        Spectrum::new(&cont.levels, "container")?,
        cfg.shell_tolerance(),
    )?;
    Ok(Arc::new(composite))
}

/// Resolved constraint: the sampling profile plus the product populations
/// when the config supplies them.
struct Constraint {
    profile: Option<ConstraintProfile>,
    product: Option<(Vec<f64>, Vec<f64>)>,
}

fn resolve_constraint(
    cfg: &ExperimentConfig,
    comp: &CompositeSpectrum,
) -> Result<Constraint, CliError> {
    let Some(cc) = &cfg.constraint else {
        return Ok(Constraint {
            profile: None,
            product: None,
        });
    };
    let product = match (&cc.gas_weights, &cc.container_weights) {
        (Some(g), Some(c)) => Some((g.clone(), c.clone())),
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "gas_weights and container_weights must be given together".into(),
            ))
        }
    };
    let explicit = usize::from(cc.subspace_weights.is_some()) + usize::from(cc.shell_weights.is_some());
    if explicit + usize::from(product.is_some()) != 1 {
        return Err(CliError::Config(
            "give exactly one of: gas/container weights, subspace_weights, shell_weights".into(),
        ));
    }
    let profile = match cc.kind {
        ConstraintKind::Microcanonical => {
            if cc.shell_weights.is_some() {
                return Err(CliError::Config("shell_weights need kind = \"canonical\"".into()));
            }
            if let Some((g, c)) = &product {
                ConstraintProfile::microcanonical_product(comp, g, c)?
            } else {
                let entries: Vec<((usize, usize), f64)> = cc
                    .subspace_weights
                    .iter()
                    .flatten()
                    .map(|&(a, b, w)| ((a, b), w))
                    .collect();
                ConstraintProfile::microcanonical(comp, &entries)?
            }
        }
        ConstraintKind::Canonical => {
            if cc.subspace_weights.is_some() {
                return Err(CliError::Config(
                    "subspace_weights need kind = \"microcanonical\"".into(),
                ));
            }
            if let Some((g, c)) = &product {
                let micro = ConstraintProfile::microcanonical_product(comp, g, c)?;
                ConstraintProfile::canonical_dense(comp, micro.shell_weights(comp))?
            } else {
                ConstraintProfile::canonical(comp, cc.shell_weights.as_deref().unwrap_or(&[]))?
            }
        }
    };
    Ok(Constraint {
        profile: Some(profile),
        product,
    })
}

fn sampler_for(comp: &Arc<CompositeSpectrum>, c: &Constraint) -> Result<RegionSampler, CliError> {
    Ok(match &c.profile {
        Some(p) => RegionSampler::new(comp.clone(), p)?,
        None => RegionSampler::unconstrained(comp.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellEntry {
    pub energy: f64,
    pub dim: usize,
    pub weight: f64,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceEntry {
    pub gas_level: usize,
    pub container_level: usize,
    pub energy: f64,
    pub dim: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    #[serde(flatten)]
    pub run: RunInfo,
    pub constraint: Option<ConstraintKind>,
    /// Gas level populations the local predictions refer to: the fixed
    /// `W_A` (microcanonical) or the dominant marginal `W^d_A` (canonical).
    pub gas_weights: Option<Vec<f64>>,
    pub min_purity: Option<f64>,
    pub max_entropy: Option<f64>,
    pub expected_purity_exact: Option<f64>,
    pub expected_purity_approx: Option<f64>,
    pub lubkin: Option<f64>,
    pub shells: Vec<ShellEntry>,
    pub dominant: Vec<SubspaceEntry>,
    pub marginal: Vec<f64>,
    pub temperature: Option<TemperatureFit>,
    pub gibbs: Option<Vec<f64>>,
    pub monte_carlo_purity: Option<McEstimate>,
}

pub fn cmd_predict(cfg: &ExperimentConfig) -> Result<PredictReport, CliError> {
    let run = RunInfo::new("predict", cfg)?;
    let comp = build_composite(cfg)?;
    let constraint = resolve_constraint(cfg, &comp)?;
    let (gas, cont) = (comp.gas(), comp.container());

    let single_levels = gas.len() == 1 && cont.len() == 1;
    let lubkin = (constraint.profile.is_none() || single_levels)
        .then(|| lubkin_average(gas.dim(), cont.dim()))
        .transpose()?;

    let shell_w = match &constraint.profile {
        Some(p) => p.shell_weights(&comp),
        None => comp
            .shells()
            .iter()
            .map(|s| s.dim as f64 / comp.dim() as f64)
            .collect(),
    };
    let dd = dominant_distribution(&comp, &shell_w)?;
    let marginal = marginal_gas_distribution(&dd);

    let gas_weights = match (&constraint.profile, &constraint.product) {
        (Some(ConstraintProfile::Microcanonical { .. }), Some((g, _))) => Some(g.clone()),
        (Some(ConstraintProfile::Microcanonical { weights }), None) => Some(
            weights
                .chunks(cont.len())
                .map(|row| row.iter().sum())
                .collect(),
        ),
        (Some(ConstraintProfile::Canonical { .. }), _) => Some(marginal.clone()),
        (None, _) => None,
    };
    let (min_purity, max_entropy) = match &gas_weights {
        Some(w) => {
            let w = renormalize(w);
            (
                Some(min_purity_state(gas, &w)?.1),
                Some(max_entropy_micro(&w, &gas.degeneracies())?),
            )
        }
        None => (None, None),
    };
    let (exact, approx) = match (&constraint.profile, &constraint.product) {
        (Some(ConstraintProfile::Microcanonical { .. }), Some((g, c))) => (
            Some(expected_purity_exact(&comp, g, c)?),
            Some(expected_purity_approx(
                g,
                &gas.degeneracies(),
                c,
                &cont.degeneracies(),
            )?),
        ),
        (None, _) if single_levels => (lubkin, None),
        _ => (None, None),
    };
    let temperature = fit_temperature(gas, &marginal).ok();
    let gibbs = temperature.map(|t| gibbs_distribution(gas, t.kt));

    let want_mc = cfg.predict.monte_carlo || cfg.predict.n.is_some();
    let monte_carlo_purity = if want_mc {
        let n = cfg.predict.n.unwrap_or(DEFAULT_SAMPLES);
        let sampler = sampler_for(&comp, &constraint)?;
        Some(mc_average(|s| purity(&reduce_gas(s)), &sampler, n, run.seed)?)
    } else {
        None
    };

    let shells = comp
        .shells()
        .iter()
        .zip(&shell_w)
        .zip(&dd.lambdas)
        .map(|((s, &weight), &lambda)| ShellEntry {
            energy: s.energy,
            dim: s.dim,
            weight,
            lambda,
        })
        .collect();
    let dominant = comp
        .subspaces()
        .iter()
        .zip(&dd.weights)
        .map(|(s, &weight)| SubspaceEntry {
            gas_level: s.gas_level,
            container_level: s.container_level,
            energy: s.energy,
            dim: s.dim,
            weight,
        })
        .collect();

    Ok(PredictReport {
        run,
        constraint: constraint.profile.as_ref().map(ConstraintProfile::kind),
        gas_weights,
        min_purity,
        max_entropy,
        expected_purity_exact: exact,
        expected_purity_approx: approx,
        lubkin,
        shells,
        dominant,
        marginal,
        temperature,
        gibbs,
        monte_carlo_purity,
    })
}

// Marginals are sums of floats; the analytics entry points insist on an
// exact unit sum.
fn renormalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    #[serde(flatten)]
    pub run: RunInfo,
    pub constraint: Option<ConstraintKind>,
    pub n: usize,
    pub purity: Option<McEstimate>,
    pub entropy: Option<McEstimate>,
    pub gas_level_weights: Option<Vec<McEstimate>>,
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    /// One row per draw: `sample,purity,entropy,w_a:A...`.
    pub samples_csv: String,
    /// `measure,mean,std_error,n,seed`.
    pub summary_csv: String,
    pub report: SampleReport,
}

pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<SampleOutput, CliError> {
    let run = RunInfo::new("sample", cfg)?;
    let comp = build_composite(cfg)?;
    let constraint = resolve_constraint(cfg, &comp)?;
    let sampler = sampler_for(&comp, &constraint)?;
    let n = cfg.sample.n.unwrap_or(DEFAULT_SAMPLES);
    if n == 0 {
        return Err(CliError::Config("sample.n must be at least 1".into()));
    }
    let rows = sample_values(&sampler, n, run.seed, |s| {
        let rho = reduce_gas(s);
        let mut row = vec![
            purity(&rho),
            von_neumann_entropy(&rho).unwrap_or(f64::NAN),
        ];
        row.extend(gas_level_weights(s));
        row
    });

    let na = comp.gas().len();
    let mut samples_csv = format!("{SAMPLES_HEADER}\nsample,purity,entropy");
    for a in 0..na {
        let _ = write!(samples_csv, ",w_a:{a}");
    }
    samples_csv.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let _ = write!(samples_csv, "{i}");
        for x in row {
            let _ = write!(samples_csv, ",{x:e}");
        }
        samples_csv.push('\n');
    }

    let column = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    let estimate = |j: usize| McEstimate::from_values(&column(j), run.seed).ok();
    let purity_est = estimate(0);
    let entropy_est = estimate(1);
    let level_est: Option<Vec<McEstimate>> = (0..na).map(|a| estimate(2 + a)).collect();

    let mut summary_csv = format!("{SUMMARY_HEADER}\n");
    let mut names = vec!["purity".to_string(), "entropy".to_string()];
    names.extend((0..na).map(|a| format!("w_a:{a}")));
    for (j, name) in names.iter().enumerate() {
        match estimate(j) {
            Some(e) => {
                let _ = writeln!(summary_csv, "{name},{:e},{:e},{n},{}", e.mean, e.std_error, run.seed);
            }
            None => {
                let _ = writeln!(summary_csv, "{name},{:e},NaN,{n},{}", rows[0][j], run.seed);
            }
        }
    }

    Ok(SampleOutput {
        samples_csv,
        summary_csv,
        report: SampleReport {
            run,
            constraint: constraint.profile.as_ref().map(ConstraintProfile::kind),
            n,
            purity: purity_est,
            entropy: entropy_est,
            gas_level_weights: level_est,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub time_purity: f64,
    pub path_purity: f64,
    pub time_entropy: f64,
    pub path_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    #[serde(flatten)]
    pub run: RunInfo,
    pub hamiltonian: ConstraintKind,
    pub coupling: f64,
    pub t_max: f64,
    pub steps: usize,
    pub commutator_gas: f64,
    pub commutator_container: f64,
    pub weak_coupling_ratio: f64,
    pub max_subspace_weight_drift: f64,
    pub max_shell_weight_drift: f64,
    pub max_gas_level_weight_spread: f64,
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
    pub max_velocity_drift: f64,
    pub effective_velocity: f64,
    pub path_length: f64,
    pub full_window: Averages,
    pub second_half: Averages,
    pub expected_purity_exact: Option<f64>,
    pub max_entropy: Option<f64>,
    /// Whether every conservation law held within tolerance.
    pub conserved: bool,
}

#[derive(Debug, Clone)]
pub struct EvolveOutput {
    pub trajectory_csv: String,
    pub snapshots: Vec<String>,
    pub report: EvolveReport,
}

fn averages(t: &Trajectory) -> Result<Averages, CliError> {
    Ok(Averages {
        time_purity: time_average(t, &Measure::Purity)?,
        path_purity: path_average(t, &Measure::Purity)?,
        time_entropy: time_average(t, &Measure::Entropy)?,
        path_entropy: path_average(t, &Measure::Entropy)?,
    })
}

/// Runs the trajectory and checks conservation. A breach is reported as a
/// [`CliError::Validation`] only by the binary; the output is always built.
pub fn cmd_evolve(cfg: &ExperimentConfig) -> Result<EvolveOutput, CliError> {
    let run = RunInfo::new("evolve", cfg)?;
    let comp = build_composite(cfg)?;
    let constraint = resolve_constraint(cfg, &comp)?;
    let ev = &cfg.evolve;
    let kind = constraint
        .profile
        .as_ref()
        .map(ConstraintProfile::kind)
        .ok_or_else(|| CliError::Config("evolve needs a [constraint] section".into()))?;
    let coupling = ev.coupling.unwrap_or(1.0);
    let steps = ev.steps.unwrap_or(DEFAULT_STEPS);
    if steps == 0 {
        return Err(CliError::Config("evolve.steps must be at least 1".into()));
    }
    let times = match ev.t_max {
        Some(t) if t > 0.0 && t.is_finite() => uniform_grid(t, steps),
        Some(t) => return Err(CliError::Config(format!("evolve.t_max must be positive, got {t}"))),
        None => default_time_grid(coupling, steps),
    };
    let t_max = times[times.len() - 1];

    let mut h_rng = draw_rng(run.seed, 0);
    let h = match kind {
        ConstraintKind::Microcanonical => build_microcanonical_hamiltonian(&comp, coupling, &mut h_rng)?,
        ConstraintKind::Canonical => build_canonical_hamiltonian(&comp, coupling, &mut h_rng)?,
    };
    let mut s_rng = draw_rng(run.seed, 1);
    let initial = match ev.initial {
        InitialState::Product => {
            let (g, c) = constraint.product.as_ref().ok_or_else(|| {
                CliError::Config(
                    "initial = \"product\" needs constraint.gas_weights and container_weights".into(),
                )
            })?;
            sample_product_state(&comp, g, c, &mut s_rng)?
        }
        InitialState::Basis => PureState::basis(
            comp.clone(),
            ev.basis_index
                .ok_or_else(|| CliError::Config("initial = \"basis\" needs basis_index".into()))?,
        )?,
        InitialState::Region => sampler_for(&comp, &constraint)?.sample(&mut s_rng),
    };

    let traj = evolve(&initial, &h, &times)?;
    let late = traj.window_from(t_max / 2.0);
    let (cg, cc) = h.commutator_norms();
    let v0 = effective_velocity(&initial, &h)?;
    let e0 = h.energy(&initial)?;
    let mut norm_drift = 0.0f64;
    let mut energy_drift = 0.0f64;
    let mut v_drift = 0.0f64;
    for s in &traj.states {
        norm_drift = norm_drift.max((s.norm_sqr() - 1.0).abs());
        energy_drift = energy_drift.max((h.energy(s)? - e0).abs());
        v_drift = v_drift.max((effective_velocity(s, &h)? - v0).abs());
    }
    let spread = (0..comp.gas().len())
        .map(|a| {
            let col = traj.gas_level_weights.iter().map(|r| r[a]);
            col.clone().fold(f64::MIN, f64::max) - col.fold(f64::MAX, f64::min)
        })
        .fold(0.0, f64::max);
    let w_ab_drift = max_drift(&traj.subspace_weights);
    let w_e_drift = max_drift(&traj.shell_weights);
    let conserved = w_e_drift <= CONSERVATION_TOLERANCE
        && norm_drift <= NORM_TOLERANCE
        && (kind == ConstraintKind::Canonical || w_ab_drift <= CONSERVATION_TOLERANCE);

    let (exact, s_max) = match (&constraint.profile, &constraint.product) {
        (Some(ConstraintProfile::Microcanonical { .. }), Some((g, c))) => (
            Some(expected_purity_exact(&comp, g, c)?),
            Some(max_entropy_micro(g, &comp.gas().degeneracies())?),
        ),
        _ => (None, None),
    };

    let snapshots = if ev.dump_states {
        traj.states.iter().map(PureState::to_csv).collect()
    } else {
        Vec::new()
    };

    Ok(EvolveOutput {
        trajectory_csv: traj.to_csv(),
        snapshots,
        report: EvolveReport {
            run,
            hamiltonian: kind,
            coupling,
            t_max,
            steps,
            commutator_gas: cg,
            commutator_container: cc,
            weak_coupling_ratio: h.weak_coupling_ratio(&initial)?,
            max_subspace_weight_drift: w_ab_drift,
            max_shell_weight_drift: w_e_drift,
            max_gas_level_weight_spread: spread,
            max_norm_drift: norm_drift,
            max_energy_drift: energy_drift,
            max_velocity_drift: v_drift,
            effective_velocity: v0,
            path_length: traj.path_length,
            full_window: averages(&traj)?,
            second_half: averages(&late)?,
            expected_purity_exact: exact,
            max_entropy: s_max,
            conserved,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsReport {
    #[serde(flatten)]
    pub run: RunInfo,
    pub query: MomentQuery,
    pub closed_form: f64,
    pub monte_carlo: McEstimate,
    pub z_score: f64,
}

/// Closed-form sphere moment next to its Monte Carlo estimate. Query
/// fields come from `[moments]`.
pub fn cmd_moments(cfg: &ExperimentConfig) -> Result<MomentsReport, CliError> {
    let run = RunInfo::new("moments", cfg)?;
    let m = cfg
        .moments
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [moments] section or flags".into()))?;
    let need = |name: &str| CliError::Config(format!("moments.{name} is required"));
    let query = MomentQuery::new(
        m.radius.unwrap_or(1.0),
        m.dim.ok_or_else(|| need("dim"))?,
        m.u_l.ok_or_else(|| need("u_l"))?,
        m.u_m.ok_or_else(|| need("u_m"))?,
    );
    let closed_form = hypersphere_moment(query)?;
    let n = m.n.unwrap_or(DEFAULT_SAMPLES);
    let est = sphere_moments_mc(query.radius, query.dim, &[(query.u_l, query.u_m)], n, run.seed)?;
    let monte_carlo = est[0];
    Ok(MomentsReport {
        run,
        query,
        closed_form,
        z_score: monte_carlo.z_score(closed_form),
        monte_carlo,
    })
}
