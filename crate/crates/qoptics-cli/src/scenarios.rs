//! Scenario execution: build models from parameter maps and compute the
//! requested outputs.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use qoptics::correlators::{
    emission_spectrum, ringdown, sensor_correlations, two_mode_capture, CorrelationGrid,
    CouplingMode, FilterSpec, SensorOutput, SensorSpec, Splitting,
};
use qoptics::dynamics::{ propagate, TimeGrid };
use qoptics::entanglement::{ concurrence, log_negativity };
use qoptics::hilbert::{ expectation, partial_trace, StateMatrix };
use qoptics::liouville::{ assemble, steady_state, steady_state_derivative };
use qoptics::metrology::counting_fisher;
use qoptics::models::{
    build_dicke_cavity, build_dimer_cavity, build_driven_dimer, build_lambda, build_tls,
    CavityParams, DickeParams, DimerParams, LambdaParams, SystemModel, TlsParams,
};
use qoptics::reductions::{ classify_mechanisms, mechanism_analytics, Mechanism };

use crate::config::{ OutputKind, ScenarioConfig, ScenarioKind, Tolerances };
use crate::error::{ CliError, CliResult };
use crate::svg;
use crate::table::ResultTable;

/// Everything needed to evaluate one scenario point.
#[derive(Clone, Debug)]
pub struct PointContext {
    pub kind: ScenarioKind,
    pub params: BTreeMap<String, f64>,
    pub outputs: Vec<OutputKind>,
    pub tols: Tolerances,
    pub seed: u64,
    pub fisher_param: Option<String>,
}

impl PointContext {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let (params, _) = config.normalized_params();
        Self {
            kind: config.scenario,
            params,
            outputs: config.outputs.clone(),
            tols: config.effective_tolerances(None),
            seed: config.seed,
            fisher_param: config.fisher_param.clone(),
        }
    }
}

/// Artifacts of one full (non-sweep) run.
pub struct RunArtifacts {
    /// `(output name, table)` pairs, one CSV each.
    pub tables: Vec<(String, ResultTable)>,
    /// `(file stem, svg body)` pairs.
    pub plots: Vec<(String, String)>,
}

fn get(params: &BTreeMap<String, f64>, key: &str) -> CliResult<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| CliError::validation(format!("missing required parameter '{key}'")))
}

fn get_or(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn usize_param(params: &BTreeMap<String, f64>, key: &str, default: usize) -> CliResult<usize> {
    let v = get_or(params, key, default as f64);
    if v < 0.0 || v.fract() != 0.0 {
        return Err(CliError::validation(format!("parameter '{key}' must be a nonnegative integer")));
    }
    Ok(v as usize)
}

/// Which outputs each scenario kind supports.
pub fn supported_outputs(kind: ScenarioKind) -> &'static [OutputKind] {
    use OutputKind::*;
    match kind {
        ScenarioKind::Tls => &[SteadyState, Dynamics, Spectrum, Fisher],
        ScenarioKind::Lambda => &[SteadyState, Dynamics, Spectrum],
        ScenarioKind::DimerFreeSpace => {
            &[SteadyState, Dynamics, Spectrum, Concurrence, Fisher, Ringdown]
        }
        ScenarioKind::DimerCavity => {
            &[SteadyState, Dynamics, Spectrum, Concurrence, Fisher, Ringdown, MechanismReport]
        }
        ScenarioKind::DickeCavity => &[SteadyState, Dynamics, Concurrence, Ringdown],
        ScenarioKind::CascadedSensors => &[G2Map],
        ScenarioKind::TwoModeCapture => &[NegativityMap],
    }
}

/// Validate the output list against the scenario kind.
pub fn validate_outputs(ctx: &PointContext) -> CliResult<()> {
    let supported = supported_outputs(ctx.kind);
    for out in &ctx.outputs {
        if !supported.contains(out) {
            return Err(CliError::validation(format!(
                "output '{}' is not supported by scenario '{:?}'",
                out.name(),
                ctx.kind
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Model construction.
// ---------------------------------------------------------------------------

fn dimer_params(p: &BTreeMap<String, f64>) -> CliResult<DimerParams> {
    Ok(DimerParams {
        gamma: get(p, "gamma")?,
        gamma12: get_or(p, "gamma12", 0.0),
        j: get_or(p, "j", 0.0),
        delta: get_or(p, "delta", 0.0),
        big_delta: get_or(p, "big_delta", 0.0),
        omega: get_or(p, "omega", 0.0),
        pump: get_or(p, "pump", 0.0),
    })
}

fn cavity_params(p: &BTreeMap<String, f64>) -> CliResult<CavityParams> {
    Ok(CavityParams {
        g: get(p, "g")?,
        kappa: get(p, "kappa")?,
        delta_a: get_or(p, "delta_a", 0.0),
        n_trunc: usize_param(p, "n_trunc", 2)?,
    })
}

fn tls_params(p: &BTreeMap<String, f64>) -> CliResult<TlsParams> {
    Ok(TlsParams {
        delta_sigma: get_or(p, "delta_sigma", 0.0),
        omega_tilde: C64::new(get_or(p, "omega", 0.0), get_or(p, "omega_im", 0.0)),
        gamma: get(p, "gamma")?,
    })
}

fn lambda_params(p: &BTreeMap<String, f64>) -> CliResult<LambdaParams> {
    Ok(LambdaParams {
        delta1: get_or(p, "delta1", 0.0),
        delta2: get_or(p, "delta2", 0.0),
        delta_v: get(p, "delta_v")?,
        omega: get(p, "omega")?,
        big_gamma: get(p, "big_gamma")?,
        gamma_v: get_or(p, "gamma_v", 0.0),
    })
}

fn dicke_params(p: &BTreeMap<String, f64>) -> CliResult<DickeParams> {
    Ok(DickeParams {
        n: usize_param(p, "n", 2)?,
        j: get_or(p, "j", 0.0),
        gamma: get(p, "gamma")?,
        gamma_col: get_or(p, "gamma_col", 0.0),
        pump: get_or(p, "pump", 0.0),
        cavity: cavity_params(p)?,
    })
}

/// Build the model for a scenario; returns the model and the label of its
/// primary emission operator.
pub fn build_model(ctx: &PointContext) -> CliResult<(SystemModel, &'static str)> {
    match ctx.kind {
        ScenarioKind::Tls => Ok((build_tls(tls_params(&ctx.params)?)?, "sigma")),
        ScenarioKind::Lambda => Ok((build_lambda(lambda_params(&ctx.params)?)?, "sigma12")),
        ScenarioKind::DimerFreeSpace | ScenarioKind::CascadedSensors => {
            Ok((build_driven_dimer(dimer_params(&ctx.params)?)?, "S_minus"))
        }
        ScenarioKind::DimerCavity => Ok((
            build_dimer_cavity(dimer_params(&ctx.params)?, cavity_params(&ctx.params)?)?,
            "a",
        )),
        ScenarioKind::DickeCavity => Ok((build_dicke_cavity(dicke_params(&ctx.params)?)?, "a")),
        ScenarioKind::TwoModeCapture => Ok((build_tls(tls_params(&ctx.params)?)?, "sigma")),
    }
}

// ---------------------------------------------------------------------------
// Output computation.
// ---------------------------------------------------------------------------

fn steady_state_of(ctx: &PointContext) -> CliResult<(SystemModel, &'static str, StateMatrix)> {
    let (model, emit) = build_model(ctx)?;
    let rho = steady_state(&assemble(&model)?)?;
    Ok((model, emit, rho))
}

fn out_steady_state(ctx: &PointContext) -> CliResult<ResultTable> {
    let (_, _, rho) = steady_state_of(ctx)?;
    let mut table = ResultTable::new(vec![
        "row".into(),
        "col".into(),
        "re".into(),
        "im".into(),
    ]);
    let d = rho.matrix.nrows();
    for i in 0..d {
        for j in 0..d {
            let z = rho.matrix[(i, j)];
            table.push_values(vec![i as f64, j as f64, z.re, z.im]);
        }
    }
    Ok(table)
}

fn out_dynamics(ctx: &PointContext) -> CliResult<(ResultTable, String)> {
    let (model, _) = build_model(ctx)?;
    let t_max = get_or(&ctx.params, "t_max", 10.0);
    let n_samples = usize_param(&ctx.params, "n_samples", 201)?.max(2);
    let grid = if get_or(&ctx.params, "log_time", 0.0) != 0.0 {
        TimeGrid::logspace(t_max * 1e-6, t_max, n_samples)?
    } else {
        TimeGrid::linspace(0.0, t_max, n_samples)?
    };
    let rho0 = StateMatrix::basis(model.space.clone(), 0)?;
    let sup = assemble(&model)?;
    let states = propagate(&sup, &rho0, &grid)?;
    let d = model.space.total_dim();
    let mut columns = vec!["t (1/gamma)".to_string()];
    columns.extend((0..d).map(|k| format!("p{k}")));
    let mut table = ResultTable::new(columns);
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); d];
    let ts: Vec<f64> = grid.samples().to_vec();
    for (t, state) in ts.iter().zip(states.iter()) {
        let mut row = vec![*t];
        for k in 0..d {
            let p = state.matrix[(k, k)].re;
            row.push(p);
            series[k].push(p);
        }
        table.push_values(row);
    }
    let named: Vec<(String, Vec<f64>)> =
        (0..d).map(|k| (format!("p{k}"), series[k].clone())).collect();
    let series_refs: Vec<(&str, &[f64])> =
        named.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    let plot = svg::line_plot("populations", "t (1/gamma)", "population", &ts, &series_refs);
    Ok((table, plot))
}

fn out_spectrum(ctx: &PointContext) -> CliResult<(ResultTable, String)> {
    let (model, emit) = build_model(ctx)?;
    let emit_op = model.op(emit)?.clone();
    let w_min = get_or(&ctx.params, "omega_min", -20.0);
    let w_max = get_or(&ctx.params, "omega_max", 20.0);
    let n_w = usize_param(&ctx.params, "n_omega", 801)?.max(2);
    let filter = get_or(&ctx.params, "gamma_filter", 0.0);
    let grid: Vec<f64> = (0..n_w)
        .map(|k| w_min + (w_max - w_min) * k as f64 / (n_w - 1) as f64)
        .collect();
    let curve = emission_spectrum(&model, &emit_op, &grid, filter)?;
    let mut table = ResultTable::new(vec![
        "omega (gamma)".into(),
        "S_inelastic".into(),
        "S_elastic_weight".into(),
    ]);
    for (w, s) in curve.omega_grid.iter().zip(curve.inelastic_density.iter()) {
        table.push_values(vec![*w, *s, curve.elastic_weight]);
    }
    let plot = svg::line_plot(
        "emission spectrum",
        "omega (gamma)",
        "S(omega)",
        &curve.omega_grid,
        &[("S_inelastic", curve.inelastic_density.as_slice())],
    );
    Ok((table, plot))
}

fn out_concurrence(ctx: &PointContext) -> CliResult<(ResultTable, f64)> {
    let c = concurrence_scalar(ctx)?;
    let mut table = ResultTable::new(vec!["concurrence".into()]);
    table.push_values(vec![c]);
    Ok((table, c))
}

fn concurrence_scalar(ctx: &PointContext) -> CliResult<f64> {
    let (_, _, rho) = steady_state_of(ctx)?;
    let reduced = if rho.space.n_sites() > 2 || rho.space.total_dim() != 4 {
        partial_trace(&rho, &[0, 1])?
    } else {
        rho
    };
    Ok(concurrence(&reduced)?)
}

fn out_g2_map(ctx: &PointContext) -> CliResult<(ResultTable, String)> {
    let (model, emit) = build_model(ctx)?;
    let emit_op = model.op(emit)?.clone();
    let w_min = get_or(&ctx.params, "w_min", -10.0);
    let w_max = get_or(&ctx.params, "w_max", 10.0);
    let n_w = usize_param(&ctx.params, "n_w", 11)?.max(2);
    let gamma_xi = get_or(&ctx.params, "gamma_xi", get(&ctx.params, "gamma")? / 2.0);
    let axis: Vec<f64> = (0..n_w)
        .map(|k| w_min + (w_max - w_min) * k as f64 / (n_w - 1) as f64)
        .collect();
    let grid = CorrelationGrid::map(axis.clone(), axis.clone(), &["g2"], |w1, w2| {
        let sensors = [
            SensorSpec { delta_xi: w1, gamma_xi, coupling_mode: CouplingMode::Vanishing },
            SensorSpec { delta_xi: w2, gamma_xi, coupling_mode: CouplingMode::Vanishing },
        ];
        match sensor_correlations(&model, &emit_op, &sensors)? {
            SensorOutput::G2(v) => Ok(vec![v]),
            SensorOutput::Spectrum(v) => Ok(vec![v]),
        }
    })?;
    let values = &grid.values["g2"];
    let mut table = ResultTable::new(vec![
        "omega1 (gamma)".into(),
        "omega2 (gamma)".into(),
        "g2".into(),
    ]);
    for (i, w1) in axis.iter().enumerate() {
        for (j, w2) in axis.iter().enumerate() {
            table.push_values(vec![*w1, *w2, values[(i, j)]]);
        }
    }
    let plot = svg::heatmap("g2(omega1, omega2)", "omega1", "omega2", &axis, &axis, values);
    Ok((table, plot))
}

fn capture_result(ctx: &PointContext) -> CliResult<qoptics::correlators::CaptureResult> {
    let (model, emit) = build_model(ctx)?;
    let emit_op = model.op(emit)?.clone();
    let gamma = get(&ctx.params, "gamma")?;
    let t0 = get_or(&ctx.params, "capture_t0", 0.0);
    let duration = get(&ctx.params, "capture_duration")?;
    let delay = get_or(&ctx.params, "capture_delay", 0.0);
    let filters = [
        FilterSpec {
            duration,
            start: t0 + (-delay).max(0.0),
            detuning: get(&ctx.params, "capture_delta1")?,
            phase: get_or(&ctx.params, "capture_phase1", 0.0),
        },
        FilterSpec {
            duration,
            start: t0 + delay.max(0.0),
            detuning: get(&ctx.params, "capture_delta2")?,
            phase: get_or(&ctx.params, "capture_phase2", 0.0),
        },
    ];
    let splitting = if get_or(&ctx.params, "splitting_physical", 0.0) != 0.0 {
        Splitting::Physical
    } else {
        Splitting::Digital
    };
    let hint = ctx.params.get("fock_hint").map(|v| *v as usize);
    Ok(two_mode_capture(&model, &emit_op, gamma, &filters, splitting, hint)?)
}

fn out_negativity(ctx: &PointContext) -> CliResult<(ResultTable, f64)> {
    let capture = capture_result(ctx)?;
    let (neg, log_neg) = log_negativity(&capture.state, 1)?;
    let mut table = ResultTable::new(vec![
        "log_negativity".into(),
        "negativity".into(),
        "mode_overlap_re".into(),
        "mode_overlap_im".into(),
        "orthogonal".into(),
        "fock_dim".into(),
    ]);
    table.push_values(vec![
        log_neg,
        neg,
        capture.overlap.re,
        capture.overlap.im,
        if capture.orthogonal { 1.0 } else { 0.0 },
        capture.fock_dim as f64,
    ]);
    Ok((table, log_neg))
}

fn out_fisher(ctx: &PointContext) -> CliResult<(ResultTable, f64)> {
    let theta_name = ctx
        .fisher_param
        .clone()
        .ok_or_else(|| CliError::validation("fisher output requires the 'fisher_param' field"))?;
    let theta = get(&ctx.params, &theta_name)?;
    let site = usize_param(&ctx.params, "fisher_site", 0)?;
    let build = |value: f64| {
        let mut params = ctx.params.clone();
        params.insert(theta_name.clone(), value);
        let probe = PointContext { params, ..ctx.clone() };
        let (model, _) = build_model(&probe)
            .map_err(|e| qoptics::Error::Invalid(e.to_string()))?;
        assemble(&model)
    };
    let drho = steady_state_derivative(&build, theta, None)?;
    let (model, _) = build_model(ctx)?;
    let rho = steady_state(&assemble(&model)?)?;
    let result = counting_fisher(&rho, &drho, site, &theta_name)?;
    let mut table = ResultTable::new(vec![
        "fisher".into(),
        "fisher_poissonian".into(),
        "fisher_vacuum_bound".into(),
        "dropped_mass".into(),
    ]);
    table.push_row(vec![
        Some(result.f),
        result.f_p,
        Some(result.f0),
        Some(result.dropped_mass),
    ]);
    Ok((table, result.f))
}

fn out_ringdown(ctx: &PointContext) -> CliResult<(ResultTable, (f64, f64))> {
    let (driven, emit) = build_model(ctx)?;
    let rho0 = steady_state(&assemble(&driven)?)?;
    // Switch off the coherent drive and the pump for the decay stage.
    let mut undriven_params = ctx.params.clone();
    undriven_params.insert("omega".into(), 0.0);
    undriven_params.insert("pump".into(), 0.0);
    let probe = PointContext { params: undriven_params, ..ctx.clone() };
    let (undriven, _) = build_model(&probe)?;
    let photon = undriven.op(emit)?.clone();
    let kappa = if emit == "a" { get(&ctx.params, "kappa")? } else { get(&ctx.params, "gamma")? };
    let t_max = get_or(&ctx.params, "t_max", 10.0);
    let n_samples = usize_param(&ctx.params, "n_samples", 101)?.max(2);
    let grid = TimeGrid::linspace(0.0, t_max, n_samples)?;
    let result = ringdown(&rho0, &undriven, &photon, kappa, &grid)?;
    let mut table = ResultTable::new(vec![
        "t (1/gamma)".into(),
        "intensity".into(),
        "n_T".into(),
        "g2_T".into(),
        "dark_excitation".into(),
    ]);
    for (t, i) in grid.samples().iter().zip(result.intensity.iter()) {
        table.push_values(vec![
            *t,
            *i,
            result.n_t,
            result.g_t2,
            if result.dark_excitation { 1.0 } else { 0.0 },
        ]);
    }
    Ok((table, (result.n_t, result.g_t2)))
}

fn mechanism_flag_name(m: Mechanism) -> &'static str {
    match m {
        Mechanism::ResolvedAntisymmetric => "active_resolved_antisymmetric",
        Mechanism::ResolvedSymmetric => "active_resolved_symmetric",
        Mechanism::DetuningFeeding => "active_detuning_feeding",
        Mechanism::SpontaneousBell => "active_spontaneous_bell",
        Mechanism::CavityBell => "active_cavity_bell",
        Mechanism::PumpedAntisymmetric => "active_pumped_antisymmetric",
        Mechanism::SidebandLocked => "active_sideband_locked",
    }
}

fn out_mechanism_report(ctx: &PointContext) -> CliResult<ResultTable> {
    let params = dimer_params(&ctx.params)?;
    let cavity = cavity_params(&ctx.params)?;
    let report = mechanism_analytics(&params, &cavity)?;
    let assessments = classify_mechanisms(&params, Some(&cavity))?;

    let mut columns: Vec<String> = vec![
        "gamma_p".into(),
        "cooperativity".into(),
        "gamma_s".into(),
        "gamma_a".into(),
        "gamma_ia".into(),
        "gamma_is".into(),
        "rho_a_ss_coh".into(),
        "tau_a_coh".into(),
        "rho_s_ss_coh".into(),
        "tau_s_coh".into(),
        "rho_s_ss_incoh".into(),
        "tau_s_incoh".into(),
        "p_opt".into(),
        "rho_s_ss_max".into(),
        "gamma_eff_detuning".into(),
        "rho_a_ss_detuning".into(),
        "gamma_a_ringdown".into(),
        "delta_max_bell".into(),
        "rho_a_ss_pumped".into(),
    ];
    let mut row: Vec<Option<f64>> = vec![
        Some(report.gamma_p),
        Some(report.cooperativity),
        Some(report.gamma_s),
        Some(report.gamma_a),
        Some(report.gamma_ia),
        Some(report.gamma_is),
        Some(report.rho_a_ss_coh),
        Some(report.tau_a_coh),
        Some(report.rho_s_ss_coh),
        Some(report.tau_s_coh),
        report.rho_s_ss_incoh,
        report.tau_s_incoh,
        report.p_opt,
        report.rho_s_ss_max,
        Some(report.gamma_eff_detuning),
        Some(report.rho_a_ss_detuning),
        Some(report.gamma_a_ringdown),
        report.delta_max_bell,
        report.rho_a_ss_pumped,
    ];
    for assessment in &assessments {
        columns.push(mechanism_flag_name(assessment.mechanism).to_string());
        row.push(Some(if assessment.active { 1.0 } else { 0.0 }));
    }
    let mut table = ResultTable::new(columns);
    table.push_row(row);
    Ok(table)
}

/// Compute all requested outputs of a non-sweep run.
pub fn compute_run(ctx: &PointContext) -> CliResult<RunArtifacts> {
    validate_outputs(ctx)?;
    let mut tables = Vec::new();
    let mut plots = Vec::new();
    for out in &ctx.outputs {
        match out {
            OutputKind::SteadyState => tables.push(("steady_state".into(), out_steady_state(ctx)?)),
            OutputKind::Dynamics => {
                let (table, plot) = out_dynamics(ctx)?;
                tables.push(("dynamics".into(), table));
                plots.push(("dynamics".into(), plot));
            }
            OutputKind::Spectrum => {
                let (table, plot) = out_spectrum(ctx)?;
                tables.push(("spectrum".into(), table));
                plots.push(("spectrum".into(), plot));
            }
            OutputKind::G2Map => {
                let (table, plot) = out_g2_map(ctx)?;
                tables.push(("g2_map".into(), table));
                plots.push(("g2_map".into(), plot));
            }
            OutputKind::Concurrence => {
                let (table, _) = out_concurrence(ctx)?;
                tables.push(("concurrence".into(), table));
            }
            OutputKind::NegativityMap => {
                let (table, _) = out_negativity(ctx)?;
                tables.push(("negativity_map".into(), table));
            }
            OutputKind::Fisher => {
                let (table, _) = out_fisher(ctx)?;
                tables.push(("fisher".into(), table));
            }
            OutputKind::Ringdown => {
                let (table, _) = out_ringdown(ctx)?;
                tables.push(("ringdown".into(), table));
            }
            OutputKind::MechanismReport => {
                tables.push(("mechanism_report".into(), out_mechanism_report(ctx)?));
            }
        }
    }
    Ok(RunArtifacts { tables, plots })
}

/// Scalar column names contributed by an output kind in sweep mode.
pub fn sweep_columns(out: OutputKind) -> CliResult<&'static [&'static str]> {
    match out {
        OutputKind::SteadyState => Ok(&["intensity", "purity"]),
        OutputKind::Concurrence => Ok(&["concurrence"]),
        OutputKind::NegativityMap => Ok(&["log_negativity"]),
        OutputKind::Fisher => Ok(&["fisher"]),
        OutputKind::Ringdown => Ok(&["n_T", "g2_T"]),
        _ => Err(CliError::validation(format!(
            "output '{}' produces no scalar and cannot be swept",
            out.name()
        ))),
    }
}

/// Evaluate the scalar outputs of one sweep point.
pub fn compute_scalars(ctx: &PointContext) -> CliResult<Vec<f64>> {
    validate_outputs(ctx)?;
    let mut values = Vec::new();
    for out in &ctx.outputs {
        match out {
            OutputKind::SteadyState => {
                let (model, emit, rho) = steady_state_of(ctx)?;
                let emit_op = model.op(emit)?;
                let n_op = emit_op.dagger().dot(emit_op)?;
                let intensity = expectation(&rho, &n_op)?.re;
                let purity = rho
                    .matrix
                    .dot(&rho.matrix)
                    .diag()
                    .iter()
                    .map(|z| z.re)
                    .sum::<f64>();
                values.push(intensity);
                values.push(purity);
            }
            OutputKind::Concurrence => values.push(concurrence_scalar(ctx)?),
            OutputKind::NegativityMap => values.push(out_negativity(ctx)?.1),
            OutputKind::Fisher => values.push(out_fisher(ctx)?.1),
            OutputKind::Ringdown => {
                let (_, (n_t, g2_t)) = out_ringdown(ctx)?;
                values.push(n_t);
                values.push(g2_t);
            }
            other => {
                return Err(CliError::validation(format!(
                    "output '{}' produces no scalar and cannot be swept",
                    other.name()
                )))
            }
        }
    }
    Ok(values)
}

