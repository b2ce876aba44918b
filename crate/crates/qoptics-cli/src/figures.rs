//! Built-in figure presets: curated parameter sets that each render one CSV
//! table and one SVG plot.

use ndarray::{ Array1, Array2 };
use num_complex::Complex64 as C64;

use qoptics::correlators::{ emission_spectrum, two_mode_capture, FilterSpec, Splitting };
use qoptics::dynamics::{ propagate, TimeGrid };
use qoptics::entanglement::{ concurrence, fidelity_and_herald, log_negativity };
use qoptics::hilbert::{ expectation, partial_trace, StateMatrix };
use qoptics::liouville::{ assemble, steady_state, steady_state_derivative };
use qoptics::metrology::{ distribution_fisher, joint_frequency_fisher };
use qoptics::models::{
    build_dicke_cavity, build_dimer_cavity, build_driven_dimer, build_lambda, build_tls,
    free_space_couplings, CavityParams, DickeParams, DimerParams, DipoleOrientation,
    FreeSpaceGeometry, LambdaParams, TlsParams,
};
use qoptics::reductions::{ intensity_analytics, two_photon_params };

use crate::error::{ CliError, CliResult };
use crate::scenarios::RunArtifacts;
use crate::svg;
use crate::table::ResultTable;

/// Names of all available presets.
pub const PRESETS: &[&str] = &[
    "intensity_vs_delta",
    "spectrum_13_sidebands",
    "lambda_metastability",
    "concurrence_mechanism_I",
    "concurrence_mechanism_II",
    "wstate_fidelity_N5",
    "mollow_triplet",
    "EN_frequency_map",
    "fisher_distance",
    "joint_fisher_map",
];

/// Render a preset by name.
pub fn render(preset: &str) -> CliResult<RunArtifacts> {
    match preset {
        "intensity_vs_delta" => intensity_vs_delta(),
        "spectrum_13_sidebands" => spectrum_13_sidebands(),
        "lambda_metastability" => lambda_metastability(),
        "concurrence_mechanism_I" => concurrence_mechanism_i(),
        "concurrence_mechanism_II" => concurrence_mechanism_ii(),
        "wstate_fidelity_N5" => wstate_fidelity_n5(),
        "mollow_triplet" => mollow_triplet(),
        "EN_frequency_map" => en_frequency_map(),
        "fisher_distance" => fisher_distance(),
        "joint_fisher_map" => joint_fisher_map(),
        other => Err(CliError::validation(format!(
            "unknown figure preset '{other}'; available: {}",
            PRESETS.join(", ")
        ))),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

fn single(name: &str, table: ResultTable, plot: String) -> RunArtifacts {
    RunArtifacts {
        tables: vec![(name.to_string(), table)],
        plots: vec![(name.to_string(), plot)],
    }
}

/// Weak-drive dimer intensity versus laser detuning: numerics against the
/// perturbative closed form, showing one- and two-photon resonances.
fn intensity_vs_delta() -> CliResult<RunArtifacts> {
    let base = DimerParams {
        gamma: 1.0,
        gamma12: 0.0,
        j: 953.939,
        delta: 300.0,
        big_delta: 0.0,
        omega: 10.0,
        pump: 0.0,
    };
    let r = (base.j * base.j + base.delta * base.delta).sqrt();
    let grid = linspace(-1.3 * r, 1.3 * r, 241);
    let mut numeric = Vec::new();
    let mut analytic = Vec::new();
    let mut table = ResultTable::new(vec![
        "big_delta (gamma)".into(),
        "intensity_numeric".into(),
        "intensity_analytic".into(),
    ]);
    for &d in &grid {
        let params = DimerParams { big_delta: d, ..base };
        let model = build_driven_dimer(params)?;
        let rho = steady_state(&assemble(&model)?)?;
        let s = model.op("S_minus")?;
        let i_num = expectation(&rho, &s.dagger().dot(s)?)?.re;
        let i_ana = intensity_analytics(&params)?.total;
        numeric.push(i_num);
        analytic.push(i_ana);
        table.push_values(vec![d, i_num, i_ana]);
    }
    let plot = svg::line_plot(
        "dimer intensity vs detuning",
        "big_delta (gamma)",
        "intensity",
        &grid,
        &[("numeric", &numeric), ("analytic", &analytic)],
    );
    Ok(single("intensity_vs_delta", table, plot))
}

/// Strongly driven dimer at mixing angle pi/4: the emission spectrum carries
/// thirteen resolved lines.
fn spectrum_13_sidebands() -> CliResult<RunArtifacts> {
    let j = 100.0 / std::f64::consts::SQRT_2;
    let params = DimerParams {
        gamma: 1.0,
        gamma12: 0.0,
        j,
        delta: j,
        big_delta: 0.0,
        omega: 100.0,
        pump: 0.0,
    };
    let model = build_driven_dimer(params)?;
    let emit = model.op("S_minus")?.clone();
    let grid = linspace(-320.0, 320.0, 1601);
    let curve = emission_spectrum(&model, &emit, &grid, 0.1)?;
    let mut table = ResultTable::new(vec!["omega (gamma)".into(), "S_inelastic".into()]);
    for (w, s) in curve.omega_grid.iter().zip(curve.inelastic_density.iter()) {
        table.push_values(vec![*w, *s]);
    }
    let plot = svg::line_plot(
        "thirteen-line dimer spectrum",
        "omega (gamma)",
        "S(omega)",
        &curve.omega_grid,
        &[("S_inelastic", curve.inelastic_density.as_slice())],
    );
    Ok(single("spectrum_13_sidebands", table, plot))
}

/// Raman three-level system: two-plateau population transfer with a slow
/// metastable stage.
fn lambda_metastability() -> CliResult<RunArtifacts> {
    let model = build_lambda(LambdaParams {
        delta1: 0.0,
        delta2: 0.0,
        delta_v: 1e5,
        omega: 1e3,
        big_gamma: 1.0,
        gamma_v: 0.0,
    })?;
    let sup = assemble(&model)?;
    let rho0 = StateMatrix::basis(model.space.clone(), 0)?;
    let grid = TimeGrid::logspace(1e-1, 1e6, 240)?;
    let states = propagate(&sup, &rho0, &grid)?;
    let ts: Vec<f64> = grid.samples().iter().map(|t| t.log10()).collect();
    let mut p1 = Vec::new();
    let mut p2 = Vec::new();
    let mut pv = Vec::new();
    let mut table = ResultTable::new(vec![
        "t (1/gamma)".into(),
        "rho_11".into(),
        "rho_22".into(),
        "rho_VV".into(),
    ]);
    for (t, state) in grid.samples().iter().zip(states.iter()) {
        let (a, b, c) = (
            state.matrix[(0, 0)].re,
            state.matrix[(1, 1)].re,
            state.matrix[(2, 2)].re,
        );
        p1.push(a);
        p2.push(b);
        pv.push(c);
        table.push_values(vec![*t, a, b, c]);
    }
    let plot = svg::line_plot(
        "metastable population transfer",
        "log10 t (1/gamma)",
        "population",
        &ts,
        &[("rho_11", &p1), ("rho_22", &p2), ("rho_VV", &pv)],
    );
    Ok(single("lambda_metastability", table, plot))
}

fn dimer_cavity_concurrence(params: DimerParams, cavity: CavityParams) -> CliResult<f64> {
    let model = build_dimer_cavity(params, cavity)?;
    let rho = steady_state(&assemble(&model)?)?;
    Ok(concurrence(&partial_trace(&rho, &[0, 1])?)?)
}

/// Steady concurrence versus cavity detuning for a strongly coupled pair:
/// entanglement switches on when the cavity addresses one dressed branch.
fn concurrence_mechanism_i() -> CliResult<RunArtifacts> {
    let params = DimerParams {
        gamma: 1.0,
        gamma12: 0.999,
        j: 9.18e4,
        delta: 918.0,
        big_delta: 0.0,
        omega: 1e4,
        pump: 0.0,
    };
    let r = (params.j * params.j + params.delta * params.delta).sqrt();
    let grid = linspace(-1.3 * r, 0.3 * r, 41);
    let mut cs = Vec::new();
    let mut table = ResultTable::new(vec!["delta_a (gamma)".into(), "concurrence".into()]);
    for &da in &grid {
        let c = dimer_cavity_concurrence(
            params,
            CavityParams { g: 1e3, kappa: 1e4, delta_a: da, n_trunc: 2 },
        )?;
        cs.push(c);
        table.push_values(vec![da, c]);
    }
    let plot = svg::line_plot(
        "concurrence vs cavity detuning",
        "delta_a (gamma)",
        "concurrence",
        &grid,
        &[("concurrence", &cs)],
    );
    Ok(single("concurrence_mechanism_I", table, plot))
}

/// Steady concurrence versus drive strength for a detuned molecular pair in
/// a fast cavity.
fn concurrence_mechanism_ii() -> CliResult<RunArtifacts> {
    let grid = linspace(1.0, 30.0, 30);
    let mut cs = Vec::new();
    let mut table = ResultTable::new(vec!["omega (gamma)".into(), "concurrence".into()]);
    for &omega in &grid {
        let c = dimer_cavity_concurrence(
            DimerParams {
                gamma: 1.0,
                gamma12: 0.0,
                j: 0.0,
                delta: 7.65,
                big_delta: 0.0,
                omega,
                pump: 0.0,
            },
            CavityParams { g: 19.25, kappa: 58.0, delta_a: 0.0, n_trunc: 3 },
        )?;
        cs.push(c);
        table.push_values(vec![omega, c]);
    }
    let plot = svg::line_plot(
        "concurrence vs drive",
        "omega (gamma)",
        "concurrence",
        &grid,
        &[("concurrence", &cs)],
    );
    Ok(single("concurrence_mechanism_II", table, plot))
}

/// Incoherently pumped five-emitter register: W-state fidelity versus pump
/// rate, bare and cavity-photon-heralded.
fn wstate_fidelity_n5() -> CliResult<RunArtifacts> {
    let n = 5usize;
    let cavity = CavityParams { g: 1e3, kappa: 1e4, delta_a: -3e5, n_trunc: 1 };
    // The cavity is resonant with the topmost collective transition, so the
    // pumped register funnels into the symmetric one-hole state. The optimal
    // pump balances repumping of subradiant leakage (~Nγ) against
    // saturation toward full inversion (~N Γ_P).
    let gamma_p = 4.0 * cavity.g * cavity.g / cavity.kappa;
    let p_opt = n as f64 * gamma_p.sqrt();

    // One-hole W state on the emitters, cavity in vacuum.
    let cav_dim = cavity.n_trunc + 1;
    let dim = (1usize << n) * cav_dim;
    let mut target = Array1::<C64>::zeros(dim);
    let amp = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    let full = (1usize << n) - 1;
    for k in 0..n {
        target[(full - (1usize << (n - 1 - k))) * cav_dim] = amp;
    }

    let pumps: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|s| s * p_opt).collect();
    let mut f_plain = Vec::new();
    let mut f_herald = Vec::new();
    let mut table = ResultTable::new(vec![
        "pump (gamma)".into(),
        "fidelity".into(),
        "heralded_fidelity".into(),
    ]);
    for &pump in &pumps {
        let model = build_dicke_cavity(DickeParams {
            n,
            j: 1e5,
            gamma: 1.0,
            gamma_col: 0.999,
            pump,
            cavity,
        })?;
        let rho = steady_state(&assemble(&model)?)?;
        let herald = model.op("a")?;
        let (f, fh) = fidelity_and_herald(&rho, &target, Some(herald))?;
        let fh = fh.unwrap_or(f);
        f_plain.push(f);
        f_herald.push(fh);
        table.push_values(vec![pump, f, fh]);
    }
    let plot = svg::line_plot(
        "W-state fidelity vs pump",
        "pump (gamma)",
        "fidelity",
        &pumps,
        &[("fidelity", &f_plain), ("heralded", &f_herald)],
    );
    Ok(single("wstate_fidelity_N5", table, plot))
}

/// Resonance fluorescence of a strongly driven two-level emitter.
fn mollow_triplet() -> CliResult<RunArtifacts> {
    let model = build_tls(TlsParams {
        delta_sigma: 0.0,
        omega_tilde: C64::new(10.0, 0.0),
        gamma: 1.0,
    })?;
    let emit = model.op("sigma")?.clone();
    let grid = linspace(-30.0, 30.0, 1201);
    let curve = emission_spectrum(&model, &emit, &grid, 0.0)?;
    let mut table = ResultTable::new(vec!["omega (gamma)".into(), "S_inelastic".into()]);
    for (w, s) in curve.omega_grid.iter().zip(curve.inelastic_density.iter()) {
        table.push_values(vec![*w, *s]);
    }
    let plot = svg::line_plot(
        "strong-drive fluorescence triplet",
        "omega (gamma)",
        "S(omega)",
        &curve.omega_grid,
        &[("S_inelastic", curve.inelastic_density.as_slice())],
    );
    Ok(single("mollow_triplet", table, plot))
}

fn capture_tls_state(
    omega: f64,
    d1: f64,
    d2: f64,
    duration: f64,
    hint: Option<usize>,
) -> CliResult<qoptics::correlators::CaptureResult> {
    let model = build_tls(TlsParams {
        delta_sigma: 0.0,
        omega_tilde: C64::new(omega, 0.0),
        gamma: 1.0,
    })?;
    let emit = model.op("sigma")?.clone();
    let filters = [
        FilterSpec { duration, start: 0.0, detuning: d1, phase: 0.0 },
        FilterSpec { duration, start: 0.0, detuning: d2, phase: 0.0 },
    ];
    Ok(two_mode_capture(&model, &emit, 1.0, &filters, Splitting::Digital, hint)?)
}

/// Logarithmic negativity between two captured temporal-spectral modes of
/// resonance fluorescence, mapped over the two filter frequencies.
fn en_frequency_map() -> CliResult<RunArtifacts> {
    // Moderate drive amplitude; the even-count axis keeps every filter off
    // the elastic line, where the capture would need a very deep Fock space.
    let omega = 0.5;
    let duration = 2.0 * std::f64::consts::PI * 8e6 * 100e-9; // 100 ns window
    let axis = linspace(-3.0, 3.0, 6);
    let mut values = Array2::<f64>::zeros((axis.len(), axis.len()));
    let mut table = ResultTable::new(vec![
        "delta1 (gamma)".into(),
        "delta2 (gamma)".into(),
        "log_negativity".into(),
    ]);
    for (i, &d1) in axis.iter().enumerate() {
        for (j, &d2) in axis.iter().enumerate() {
            let capture = capture_tls_state(omega, d1, d2, duration, Some(7))?;
            let (_, e_n) = log_negativity(&capture.state, 1)?;
            values[(i, j)] = e_n;
            table.push_values(vec![d1, d2, e_n]);
        }
    }
    let plot = svg::heatmap(
        "two-mode log-negativity map",
        "delta2 (gamma)",
        "delta1 (gamma)",
        &axis,
        &axis,
        &values,
    );
    Ok(single("EN_frequency_map", table, plot))
}

/// Fisher information of the emitter populations with respect to the
/// inter-emitter distance, versus drive strength; the optimum sits near the
/// two-photon saturation scale.
fn fisher_distance() -> CliResult<RunArtifacts> {
    let xi0 = 0.3;
    let geometry = |xi: f64| FreeSpaceGeometry {
        r12: xi,
        k: 1.0,
        orientation: DipoleOrientation::HAggregate,
    };
    let dimer = |xi: f64, omega: f64| -> Result<DimerParams, qoptics::Error> {
        let (j, gamma12) = free_space_couplings(geometry(xi), 1.0, 1.0)?;
        Ok(DimerParams {
            gamma: 1.0,
            gamma12,
            j,
            delta: 0.0,
            big_delta: 0.0,
            omega,
            pump: 0.0,
        })
    };
    let tp = two_photon_params(&dimer(xi0, 1.0).map_err(CliError::from)?)?;
    let omega_2ps = tp.omega_2ps.ok_or_else(|| {
        CliError::numerical("two-photon saturation scale undefined for this geometry")
    })?;

    let omegas = logspace(0.1 * omega_2ps, 10.0 * omega_2ps, 25);
    let mut fs = Vec::new();
    let mut table = ResultTable::new(vec![
        "omega (gamma)".into(),
        "fisher".into(),
        "omega_2ps (gamma)".into(),
    ]);
    for &omega in &omegas {
        let build = |xi: f64| assemble(&build_driven_dimer(dimer(xi, omega)?)?);
        let drho = steady_state_derivative(&build, xi0, None)?;
        let rho = steady_state(&build(xi0).map_err(CliError::from)?)?;
        let p: Vec<f64> = rho.matrix.diag().iter().map(|z| z.re).collect();
        let dp: Vec<f64> = drho.diag().iter().map(|z| z.re).collect();
        let (f, _, _) = distribution_fisher(&p, &dp)?;
        fs.push(f);
        table.push_values(vec![omega, f, omega_2ps]);
    }
    let log_omegas: Vec<f64> = omegas.iter().map(|w| w.log10()).collect();
    let plot = svg::line_plot(
        "distance Fisher information vs drive",
        "log10 omega (gamma)",
        "F_xi",
        &log_omegas,
        &[("fisher", &fs)],
    );
    Ok(single("fisher_distance", table, plot))
}

/// Joint photon-number Fisher information of the two captured modes with
/// respect to the drive strength, mapped over the filter frequencies.
fn joint_fisher_map() -> CliResult<RunArtifacts> {
    // Same windowing as the negativity map at a moderate drive; the
    // even-count axis avoids the elastic line.
    let omega = 0.5;
    let duration = 2.0 * std::f64::consts::PI * 8e6 * 100e-9;
    let hint = Some(4);
    let h = 1e-3 * omega;
    let axis = linspace(-3.0, 3.0, 4);

    let joint_p = |om: f64, d1: f64, d2: f64| -> CliResult<Array2<f64>> {
        let capture = capture_tls_state(om, d1, d2, duration, hint)?;
        let dim = capture.fock_dim;
        let mut p = Array2::<f64>::zeros((dim, dim));
        for n1 in 0..dim {
            for n2 in 0..dim {
                let idx = n1 * dim + n2;
                p[(n1, n2)] = capture.state.matrix[(idx, idx)].re;
            }
        }
        Ok(p)
    };

    let mut values = Array2::<f64>::zeros((axis.len(), axis.len()));
    let mut table = ResultTable::new(vec![
        "delta1 (gamma)".into(),
        "delta2 (gamma)".into(),
        "fisher_joint".into(),
    ]);
    for (i, &d1) in axis.iter().enumerate() {
        for (j, &d2) in axis.iter().enumerate() {
            let p = joint_p(omega, d1, d2)?;
            let p_plus = joint_p(omega + h, d1, d2)?;
            let p_minus = joint_p(omega - h, d1, d2)?;
            let dp = (&p_plus - &p_minus) / (2.0 * h);
            let result = joint_frequency_fisher(&p, &dp, "omega")?;
            values[(i, j)] = result.f;
            table.push_values(vec![d1, d2, result.f]);
        }
    }
    let plot = svg::heatmap(
        "joint counting Fisher information map",
        "delta2 (gamma)",
        "delta1 (gamma)",
        &axis,
        &axis,
        &values,
    );
    Ok(single("joint_fisher_map", table, plot))
}
