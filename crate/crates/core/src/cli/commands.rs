use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{Backend, MeanFieldModel, RunConfig, CONFIG_ECHO_PREFIX};
use super::output::{format_number, CsvTable, ParsedCsv};
use super::Failure;
use crate::analytic::{
    mean_fidelity_cat, mean_fidelity_css, monte_carlo_free_dephasing, var_fidelity_css, var_fidelity_css_exact,
    CatParity, FreeState,
};
use crate::ensemble::{sample_detunings, DetuningModel, EnsembleParams, SpinCoherentParams, TimeGrid};
use crate::lindblad::{
    build_collective_generator, build_full_generator_in_sector, prepare_state, record_trajectory, steady_amplitude,
    steady_state, wigner, Basis, Generator, Sector, SnapshotRow, StateKind, WignerWindow, FULL_SPACE_CAP,
};
use crate::meanfield::{
    fit_ellipse, integrate_full, integrate_reduced, project_two_group, refine_boundary, symmetric_full_state,
    symmetric_steady_state, sync_phase_sweep, two_group_full_state, EllipseFit, MeanFieldState, ReducedModel,
    ReducedState, SyncPhasePoint, SyncStatus,
};
use crate::ode::Tolerance;

/// Snapshot grid of a `lindblad` run whose config has none.
const DEFAULT_LINDBLAD_GRID: TimeGrid = TimeGrid {
    t_start: 0.0,
    t_end: 400.0,
    n_points: 401,
};

/// Result of one subcommand: the file contents and the number of
/// unconverged points they contain.
pub struct Outcome {
    pub contents: String,
    pub unconverged: usize,
}

impl Outcome {
    fn table(table: CsvTable, unconverged: usize) -> Self {
        Outcome {
            contents: table.render(),
            unconverged,
        }
    }
}

fn header(table: &mut CsvTable, subcommand: &str, config: &RunConfig) {
    table.comment(format!("spincat {subcommand}"));
    table.comment(format!("seed: {}", config.seeds.master_seed));
    table.comment(format!("config: {}", config.echo()));
}

fn missing(field: &str, subcommand: &str) -> Failure {
    Failure::Config(format!("`{field}` is required by {subcommand}"))
}

fn require_grid(config: &RunConfig, subcommand: &str) -> Result<TimeGrid, Failure> {
    config.grid.ok_or_else(|| missing("grid", subcommand))
}

fn coherent_angles(state: StateKind) -> Result<(SpinCoherentParams, Option<CatParity>), Failure> {
    match state {
        StateKind::Css { theta, phi } => Ok((SpinCoherentParams::new(theta, phi)?, None)),
        StateKind::Cat { theta, phi, parity } => Ok((SpinCoherentParams::new(theta, phi)?, Some(parity))),
        StateKind::BosonicCoherent { .. } => Err(Failure::Config(
            "state must be `css` or `cat` for this subcommand".into(),
        )),
    }
}

pub fn free_dephasing(config: &RunConfig) -> Result<Outcome, Failure> {
    let name = "free-dephasing";
    let state = config.state.ok_or_else(|| missing("state", name))?;
    let grid = require_grid(config, name)?;
    let (coherent, cat) = coherent_angles(state)?;
    let free_state = match cat {
        None => FreeState::Coherent,
        Some(parity) => FreeState::Cat { parity },
    };
    let n = config.params.n_spins;
    let traces = monte_carlo_free_dephasing(free_state, &coherent, &config.detuning, n, &grid, &config.seeds)?;
    let shown = config
        .free_dephasing
        .and_then(|s| s.realization_columns)
        .unwrap_or(traces.realizations.len())
        .min(traces.realizations.len());
    let mut columns = vec!["t".to_owned()];
    columns.extend((0..shown).map(|i| format!("realization_{i}")));
    columns.extend(["mean", "stderr", "analytic_mean", "variance", "variance_stderr", "analytic_variance"].map(String::from));
    let mut table = CsvTable::new(columns);
    header(&mut table, name, config);
    table.comment(format!("realizations: {}", traces.realizations.len()));
    let sigma = match config.detuning {
        DetuningModel::Gaussian { sigma } => Some(sigma),
        _ => None,
    };
    for (i, &t) in traces.times.iter().enumerate() {
        let (mean, variance) = match (sigma, free_state) {
            (Some(s), FreeState::Coherent) => (
                mean_fidelity_css(coherent.theta, s, n, t),
                var_fidelity_css_exact(coherent.theta, s, n, t),
            ),
            (Some(s), FreeState::Cat { parity }) => (mean_fidelity_cat(coherent.theta, s, n, parity, t)?, f64::NAN),
            (None, _) => (f64::NAN, f64::NAN),
        };
        let mut row = vec![t];
        row.extend(traces.realizations[..shown].iter().map(|r| r[i]));
        row.extend([
            traces.mean[i],
            traces.stderr[i],
            mean,
            traces.variance[i],
            traces.variance_stderr[i],
            variance,
        ]);
        table.push_numbers(row);
    }
    Ok(Outcome::table(table, 0))
}

pub fn analytic(config: &RunConfig) -> Result<Outcome, Failure> {
    let name = "analytic";
    let state = config.state.ok_or_else(|| missing("state", name))?;
    let grid = require_grid(config, name)?;
    let (coherent, _) = coherent_angles(state)?;
    let sigma = match config.detuning {
        DetuningModel::Gaussian { sigma } => sigma,
        _ => return Err(Failure::Config("analytic curves need a gaussian detuning model".into())),
    };
    let n = config.params.n_spins;
    let theta = coherent.theta;
    let mut table = CsvTable::new([
        "t",
        "css_mean",
        "css_variance",
        "css_variance_exact",
        "even_cat_mean",
        "odd_cat_mean",
    ]);
    header(&mut table, name, config);
    table.comment(format!("css_mean_saturated: {}", format_number(mean_fidelity_css(theta, sigma, n, f64::INFINITY))));
    for t in grid.times() {
        let odd = if theta == 0.0 {
            f64::NAN
        } else {
            mean_fidelity_cat(theta, sigma, n, CatParity::Odd, t)?
        };
        table.push_numbers([
            t,
            mean_fidelity_css(theta, sigma, n, t),
            var_fidelity_css(theta, sigma, n, t),
            var_fidelity_css_exact(theta, sigma, n, t),
            mean_fidelity_cat(theta, sigma, n, CatParity::Even, t)?,
            odd,
        ]);
    }
    Ok(Outcome::table(table, 0))
}

fn lindblad_generator(
    params: &EnsembleParams,
    detunings: &[f64],
    backend: Backend,
    state: StateKind,
) -> Result<Generator, Failure> {
    let all_zero = detunings.iter().all(|d| *d == 0.0);
    let collective = match backend {
        Backend::Auto => all_zero,
        Backend::Collective => true,
        Backend::Full => false,
    };
    if collective {
        return Ok(build_collective_generator(params, detunings)?);
    }
    let sector = match state {
        StateKind::Cat { parity: CatParity::Even, .. } => Sector::Even,
        StateKind::Cat { parity: CatParity::Odd, .. } => Sector::Odd,
        _ => Sector::All,
    };
    Ok(build_full_generator_in_sector(params, detunings, sector, FULL_SPACE_CAP)?)
}

pub fn lindblad(config: &RunConfig) -> Result<Outcome, Failure> {
    let name = "lindblad";
    let state = config.state.ok_or_else(|| missing("state", name))?;
    let grid = config.grid.unwrap_or(DEFAULT_LINDBLAD_GRID);
    grid.validate()?;
    let section = config.lindblad.unwrap_or_default();
    let tol = Tolerance::new(section.atol, section.rtol);
    let params = config.params;
    let count = if config.detuning.is_deterministic() {
        1
    } else {
        config.seeds.realization_count
    };
    let times = grid.times();
    let runs: Vec<(crate::lindblad::Trajectory, Basis, Option<String>)> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<_, Failure> {
            let detunings = sample_detunings(&config.detuning, params.n_spins, config.seeds.realization_seed(i))?;
            let generator = lindblad_generator(&params, &detunings, section.backend, state)?;
            let prepared = prepare_state(state, generator.basis())?;
            let traj = record_trajectory(&generator, &prepared.density(), &prepared.psi, &times, tol, section.eigen_stride)?;
            Ok((traj, generator.basis(), prepared.warning))
        })
        .collect::<Result<_, _>>()?;

    let mut table = CsvTable::new(SnapshotRow::COLUMNS);
    header(&mut table, name, config);
    let basis = runs[0].1;
    table.comment(format!(
        "backend: {}",
        match basis {
            Basis::Collective { .. } => "collective".to_owned(),
            Basis::FullProduct { sector, .. } => format!("full ({sector:?} sector)").to_lowercase(),
        }
    ));
    table.comment(format!("realizations: {count}"));
    if let Some(w) = &runs[0].2 {
        table.comment(format!("warning: {w}"));
    }
    let worst = |f: fn(&crate::lindblad::Trajectory) -> f64| runs.iter().map(|r| f(&r.0)).fold(0.0, f64::max);
    table.comment(format!("max_trace_error: {}", format_number(worst(|t| t.max_trace_error))));
    table.comment(format!("max_hermiticity_error: {}", format_number(worst(|t| t.max_hermiticity_error))));
    table.comment(format!("max_parity_drift: {}", format_number(worst(|t| t.max_parity_drift))));
    let min_eig = runs.iter().map(|r| r.0.min_eigenvalue).fold(f64::INFINITY, f64::min);
    table.comment(format!(
        "min_eigenvalue: {}",
        format_number(if min_eig.is_finite() { min_eig } else { f64::NAN })
    ));
    let scale = 1.0 / count as f64;
    for (j, &t) in times.iter().enumerate() {
        let mut acc = [0.0; 5];
        for (traj, _, _) in &runs {
            let v = traj.rows[j].values();
            for (a, x) in acc.iter_mut().zip(&v[1..]) {
                *a += x;
            }
        }
        let mut row = vec![t];
        row.extend(acc.iter().map(|a| a * scale));
        table.push_numbers(row);
    }
    Ok(Outcome::table(table, 0))
}

pub fn hp_sweep(config: &RunConfig) -> Result<Outcome, Failure> {
    let name = "hp-sweep";
    let section = config.hp_sweep.as_ref().ok_or_else(|| missing("hp_sweep", name))?;
    let etas = section.eta.values().map_err(Failure::Config)?;
    section.steady.validate()?;
    let params = config.params;
    let results: Vec<_> = etas
        .par_iter()
        .map(|&eta| steady_amplitude(&EnsembleParams { eta, ..params }, &section.steady))
        .collect::<Result<_, _>>()?;
    let mut table = CsvTable::new(["eta", "amplitude", "sqrt_2eta", "t_final", "converged"]);
    header(&mut table, name, config);
    let mut unconverged = 0;
    for r in &results {
        unconverged += usize::from(!r.converged);
        table.push_numbers([
            r.eta,
            r.amplitude,
            (2.0 * r.eta / params.gamma2).sqrt(),
            r.t_final,
            if r.converged { 1.0 } else { 0.0 },
        ]);
    }
    table.comment(format!("unconverged: {unconverged}"));
    Ok(Outcome::table(table, unconverged))
}

pub fn wigner_map(config: &RunConfig) -> Result<Outcome, Failure> {
    let name = "wigner";
    let section = config.wigner.clone().ok_or_else(|| missing("wigner", name))?;
    let params = config.params;
    let (steady, rho) = steady_state(&params, &section.steady)?;
    let window = section
        .window
        .unwrap_or_else(|| WignerWindow::around_amplitude(params.eta / params.gamma2, section.points));
    let grid = wigner(&rho, &window)?;
    let mut table = CsvTable::new(["re_beta", "im_beta", "W"]);
    header(&mut table, name, config);
    table.comment(format!("amplitude: {}", format_number(steady.amplitude)));
    table.comment(format!("t_final: {}", format_number(steady.t_final)));
    table.comment(format!("converged: {}", steady.converged));
    table.comment(format!("integral: {}", format_number(grid.integral())));
    if grid.truncation_warning {
        table.comment("warning: window extends past |beta|^2 = N/2, where the finite spin length distorts the bosonic picture");
    }
    for (i, &im) in grid.im_axis.iter().enumerate() {
        for (j, &re) in grid.re_axis.iter().enumerate() {
            table.push_numbers([re, im, grid.values[[i, j]]]);
        }
    }
    Ok(Outcome::table(table, usize::from(!steady.converged)))
}

fn symmetric_projection(state: &MeanFieldState) -> ReducedState {
    let n = state.n_spins() as f64;
    let mean: Complex64 = state.coherences.iter().sum::<Complex64>() / n;
    ReducedState {
        amplitude: state.coherences.iter().map(|c| c.norm()).sum::<f64>() / n,
        phase: mean.arg(),
        inversion: state.inversions.iter().sum::<f64>() / n,
    }
}

pub fn mf_trajectory(config: &RunConfig) -> Result<Outcome, Failure> {
    let name = "mf-trajectory";
    let section = config.mean_field.ok_or_else(|| missing("mean_field", name))?;
    let grid = require_grid(config, name)?;
    grid.validate()?;
    let params = config.params;
    let n = params.n_spins;
    let tol = Tolerance::new(section.atol, section.rtol);
    let times = grid.times();
    let two_group = matches!(config.detuning, DetuningModel::TwoGroup { .. });
    let initial = match section.initial {
        Some(s) => ReducedState {
            amplitude: s.amplitude,
            phase: s.phase,
            inversion: s.inversion,
        },
        None => {
            let steady = symmetric_steady_state(n, params.eta / params.gamma2)?;
            let spread_model = section.model == MeanFieldModel::TwoEnsemble || (section.model == MeanFieldModel::Full && two_group);
            if spread_model {
                ReducedState { phase: 0.0, ..steady }
            } else {
                steady
            }
        }
    };
    let mut table = CsvTable::new(["t", "amplitude", "phase", "inversion", "bloch_excess"]);
    header(&mut table, name, config);
    let rows: Vec<(ReducedState, f64)> = match section.model {
        MeanFieldModel::Symmetric => integrate_reduced(ReducedModel::Symmetric, initial, &params, &times, tol)?
            .into_iter()
            .map(|s| (s, s.bound_excess()))
            .collect(),
        MeanFieldModel::TwoEnsemble => {
            let DetuningModel::TwoGroup { delta } = config.detuning else {
                return Err(Failure::Config("the two_ensemble model needs a two_group detuning model".into()));
            };
            integrate_reduced(ReducedModel::TwoEnsemble { delta }, initial, &params, &times, tol)?
                .into_iter()
                .map(|s| (s, s.bound_excess()))
                .collect()
        }
        MeanFieldModel::Full => {
            let detunings = sample_detunings(&config.detuning, n, config.seeds.realization_seed(0))?;
            let start = if two_group {
                two_group_full_state(n, initial)?
            } else {
                symmetric_full_state(n, initial)
            };
            let states = integrate_full(&start, &params, &detunings, &times, tol)?;
            let mut out = Vec::with_capacity(states.len());
            for s in &states {
                let reduced = if two_group { project_two_group(s)? } else { symmetric_projection(s) };
                out.push((reduced, s.bloch_excess()));
            }
            out
        }
    };
    let worst = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    table.comment(format!("max_bloch_excess: {}", format_number(worst)));
    for (&t, (s, excess)) in times.iter().zip(&rows) {
        table.push_numbers([t, s.amplitude, s.phase, s.inversion, *excess]);
    }
    Ok(Outcome::table(table, 0))
}

pub fn sync_sweep(config: &RunConfig) -> Result<Outcome, Failure> {
    let name = "sync-sweep";
    let section = config.sync.as_ref().ok_or_else(|| missing("sync", name))?;
    let etas = section.eta_tilde.values().map_err(Failure::Config)?;
    let deltas = section.delta_tilde.values().map_err(Failure::Config)?;
    section.options.validate()?;
    let n = config.params.n_spins;
    let mut points = sync_phase_sweep(n, &etas, &deltas, &section.options)?;
    let grid_count = points.len();
    if section.refine {
        let extra = refine_boundary(n, &points, &section.options)?;
        points.extend(extra);
    }
    let mut table = CsvTable::new(["eta_tilde", "delta_tilde", "zeta_ss", "status"]);
    header(&mut table, name, config);
    table.comment(format!("grid_points: {grid_count}"));
    table.comment(format!("refinement_points: {}", points.len() - grid_count));
    let unconverged = points.iter().filter(|p| p.status == SyncStatus::Unconverged).count();
    table.comment(format!("unconverged: {unconverged}"));
    for p in &points {
        table.push_cells(vec![
            format_number(p.eta_tilde),
            format_number(p.delta_tilde),
            format_number(p.zeta_ss.unwrap_or(f64::NAN)),
            p.status.label().to_owned(),
        ]);
    }
    Ok(Outcome::table(table, unconverged))
}

/// Phase points and spin count recorded in a `sync-sweep` output file.
pub fn read_phase_points(text: &str) -> Result<(Vec<SyncPhasePoint>, Option<usize>), String> {
    let csv = ParsedCsv::parse(text)?;
    let (ce, cd, cz, cs) = (
        csv.column("eta_tilde")?,
        csv.column("delta_tilde")?,
        csv.column("zeta_ss")?,
        csv.column("status")?,
    );
    let n = csv
        .comments
        .iter()
        .find_map(|c| c.strip_prefix(CONFIG_ECHO_PREFIX.trim_start_matches("# ")))
        .and_then(|json| serde_json::from_str::<RunConfig>(json).ok())
        .map(|c| c.params.n_spins);
    let mut points = Vec::with_capacity(csv.rows.len());
    for i in 0..csv.rows.len() {
        let zeta = csv.number(i, cz)?;
        let status = SyncStatus::parse(&csv.rows[i][cs]).ok_or_else(|| format!("row {}: unknown status `{}`", i + 1, csv.rows[i][cs]))?;
        points.push(SyncPhasePoint {
            eta_tilde: csv.number(i, ce)?,
            delta_tilde: csv.number(i, cd)?,
            zeta_ss: (!zeta.is_nan()).then_some(zeta),
            status,
        });
    }
    Ok((points, n))
}

pub fn ellipse_fit(config: &RunConfig) -> Result<Outcome, Failure> {
    let name = "ellipse-fit";
    let section = config.fit.as_ref().ok_or_else(|| missing("fit", name))?;
    let text = std::fs::read_to_string(&section.input)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", section.input.display())))?;
    let (points, recorded_n) =
        read_phase_points(&text).map_err(|e| Failure::Config(format!("{}: {e}", section.input.display())))?;
    let n = config.params.n_spins;
    if let Some(m) = recorded_n {
        if m != n {
            return Err(Failure::Config(format!(
                "{} was computed for n_spins = {m}, config has {n}",
                section.input.display()
            )));
        }
    }
    let fit: EllipseFit = fit_ellipse(&points, n)?;
    let mut contents = serde_json::to_string_pretty(&fit).expect("fit serializes");
    contents.push('\n');
    Ok(Outcome { contents, unconverged: 0 })
}
