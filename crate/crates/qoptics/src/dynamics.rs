//! Time propagation, Monte Carlo wave-function trajectories, and
//! conditional no-jump evolution.
//!
//! Time-independent propagation prefers the spectral path
//! `ρ(t) = ρ_ss + Σ_{μ≥2} e^{Λ_μ t} Tr[Λ_μ^L ρ0] Λ_μ^R` whenever the
//! eigenbasis is well-conditioned, and falls back to adaptive
//! Dormand-Prince 5(4) integration on `vec ρ` otherwise. The integrator is
//! shared with the time-dependent (capture/cascade) path and with the
//! non-Hermitian trajectory evolution.

use ndarray::{ Array1, Array2 };
use ndarray_linalg::{ Eigh, UPLO };
use num_complex::Complex64 as C64;
use rand::{ Rng, SeedableRng };
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::hilbert::StateMatrix;
use crate::liouville::{
    hamiltonian_term, sandwich, spectral_decomposition,
    unvectorize, vectorize, Superoperator,
};
use crate::models::SystemModel;
use crate::{ Error, Result, I };

/// Strictly increasing sampling grid in units of 1/γ.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    samples: Vec<f64>,
}

impl TimeGrid {
    /// Build from explicit samples (≥ 2, strictly increasing).
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Invalid("time grid needs at least 2 samples".into()));
        }
        if samples.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("time grid must be strictly increasing".into()));
        }
        Ok(Self { samples })
    }

    /// Uniform grid with `n` samples on `[start, end]`.
    pub fn linspace(start: f64, end: f64, n: usize) -> Result<Self> {
        if n < 2 || end <= start {
            return Err(Error::Invalid("need n >= 2 and end > start".into()));
        }
        let dt = (end - start) / (n - 1) as f64;
        Self::new((0..n).map(|k| start + k as f64 * dt).collect())
    }

    /// Logarithmic grid with `n` samples on `[start, end]` (start > 0).
    pub fn logspace(start: f64, end: f64, n: usize) -> Result<Self> {
        if n < 2 || end <= start || start <= 0.0 {
            return Err(Error::Invalid("need n >= 2 and end > start > 0".into()));
        }
        let (a, b) = (start.ln(), end.ln());
        let dt = (b - a) / (n - 1) as f64;
        Self::new((0..n).map(|k| (a + k as f64 * dt).exp()).collect())
    }

    /// Sample times.
    pub fn samples(&self) -> &[f64] { &self.samples }

    /// First sample.
    pub fn start(&self) -> f64 { self.samples[0] }

    /// Last sample.
    pub fn end(&self) -> f64 { *self.samples.last().unwrap() }
}

/// Default relative tolerance of the adaptive integrator.
pub const ODE_RTOL: f64 = 1e-9;
/// Default absolute tolerance of the adaptive integrator.
pub const ODE_ATOL: f64 = 1e-12;
/// Spectral-path eigenbasis condition threshold.
pub const SPECTRAL_COND_MAX: f64 = 1e8;

// Dormand-Prince 5(4) Butcher tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
    -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0,
];

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1` with adaptive
/// Dormand-Prince 5(4) steps.
pub fn integrate_adaptive<F>(
    f: &F,
    t0: f64,
    t1: f64,
    y0: &Array1<C64>,
    rtol: f64,
    atol: f64,
) -> Result<Array1<C64>>
where
    F: Fn(f64, &Array1<C64>) -> Array1<C64>,
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(y0.clone());
    }
    let mut t = t0;
    let mut y = y0.clone();
    let mut h = (span / 100.0).min(span);
    let h_min = span * 1e-14;
    let mut k: Vec<Array1<C64>> = vec![Array1::zeros(y0.len()); 7];
    let mut n_steps = 0usize;

    while t < t1 {
        if h < h_min {
            return Err(Error::Integration(format!(
                "step size underflow at t = {t:.6e} (h = {h:.3e})"
            )));
        }
        if t + h > t1 {
            h = t1 - t;
        }
        // Stage evaluations.
        for s in 0..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = DP_A[s][j];
                if a != 0.0 {
                    ys.scaled_add(C64::new(a * h, 0.0), kj);
                }
            }
            k[s] = f(t + DP_C[s] * h, &ys);
        }
        // 5th-order solution and embedded error estimate.
        let mut y5 = y.clone();
        let mut err_vec: Array1<C64> = Array1::zeros(y.len());
        for s in 0..7 {
            if DP_B5[s] != 0.0 {
                y5.scaled_add(C64::new(DP_B5[s] * h, 0.0), &k[s]);
            }
            let diff = DP_B5[s] - DP_B4[s];
            if diff != 0.0 {
                err_vec.scaled_add(C64::new(diff * h, 0.0), &k[s]);
            }
        }
        let mut err: f64 = 0.0;
        for (e, (yo, yn)) in err_vec.iter().zip(y.iter().zip(y5.iter())) {
            let scale = atol + rtol * yo.norm().max(yn.norm());
            let r = e.norm() / scale;
            err += r * r;
        }
        err = (err / y.len() as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y5;
            n_steps += 1;
            if n_steps > 50_000_000 {
                return Err(Error::Integration("step budget exhausted".into()));
            }
        }
        // PI-free classic step-size controller.
        let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
        h *= factor.clamp(0.2, 5.0);
    }
    Ok(y)
}

/// Propagate a state under a time-independent Liouvillian on a grid.
///
/// Uses the spectral decomposition when the eigenbasis condition is below
/// [`SPECTRAL_COND_MAX`], otherwise adaptive ODE integration of `vec ρ`.
/// The returned sequence is aligned with the grid samples (the first entry
/// is ρ0 evolved to the first sample time, which reproduces ρ0 when the
/// grid starts at 0).
pub fn propagate(
    l: &Superoperator,
    rho0: &StateMatrix,
    grid: &TimeGrid,
) -> Result<Vec<StateMatrix>> {
    if let Ok(dec) = spectral_decomposition(l) {
        if dec.condition < SPECTRAL_COND_MAX {
            return grid
                .samples()
                .iter()
                .map(|&t| dec.evolve(rho0, t - grid.start()))
                .collect();
        }
    }
    propagate_ode(l, rho0, grid)
}

fn propagate_ode(
    l: &Superoperator,
    rho0: &StateMatrix,
    grid: &TimeGrid,
) -> Result<Vec<StateMatrix>> {
    let f = |_t: f64, y: &Array1<C64>| l.matrix.dot(y);
    let mut out = Vec::with_capacity(grid.samples().len());
    let mut y = vectorize(&rho0.matrix);
    let mut t_prev = grid.start();
    for &t in grid.samples() {
        y = integrate_adaptive(&f, t_prev, t, &y, ODE_RTOL, ODE_ATOL)?;
        t_prev = t;
        let rho = unvectorize(&y, l.dim);
        out.push(StateMatrix::new_unchecked(l.space.clone(), rho)?.hermitize_normalize()?);
    }
    Ok(out)
}

/// One dissipative channel prepared for matrix-form evaluation.
struct GenChannel {
    a: Array2<C64>,
    b_dag: Array2<C64>,
    /// K = B†A.
    k: Array2<C64>,
    rate: f64,
    amplitude: Option<crate::models::Amplitude>,
}

/// One cascaded coupling prepared for matrix-form evaluation.
struct GenCascade {
    c: Array2<C64>,
    x: Array2<C64>,
    x_dag: Array2<C64>,
    c_dag: Array2<C64>,
    /// X†C.
    xd_c: Array2<C64>,
    /// C†X.
    cd_x: Array2<C64>,
    coupling: f64,
    amplitude: Option<crate::models::Amplitude>,
}

/// Precomputed time-dependent generator of a model.
///
/// The right-hand side is evaluated in matrix form (products of d×d
/// matrices, O(d³)) rather than through the dense superoperator (O(d⁴)),
/// which dominates for the composite spaces used in temporal-mode capture.
struct TimedepGenerator {
    h: Array2<C64>,
    channels: Vec<GenChannel>,
    cascades: Vec<GenCascade>,
    dim: usize,
}

impl TimedepGenerator {
    fn build(model: &SystemModel) -> Self {
        let d = model.space.total_dim();
        let channels = model
            .channels
            .iter()
            .map(|ch| {
                let b_dag = ch.b.matrix.t().mapv(|z| z.conj());
                let k = b_dag.dot(&ch.a.matrix);
                GenChannel {
                    a: ch.a.matrix.clone(),
                    b_dag,
                    k,
                    rate: ch.rate,
                    amplitude: ch.amplitude.clone(),
                }
            })
            .collect();
        let cascades = model
            .cascades
            .iter()
            .map(|casc| {
                let c = casc.source.matrix.clone();
                let x = casc.target.matrix.clone();
                let x_dag = x.t().mapv(|z| z.conj());
                let c_dag = c.t().mapv(|z| z.conj());
                let xd_c = x_dag.dot(&c);
                let cd_x = c_dag.dot(&x);
                GenCascade {
                    c,
                    x,
                    x_dag,
                    c_dag,
                    xd_c,
                    cd_x,
                    coupling: casc.coupling,
                    amplitude: casc.amplitude.clone(),
                }
            })
            .collect();
        Self { h: model.hamiltonian.matrix.clone(), channels, cascades, dim: d }
    }

    fn rhs(&self, t: f64, y: &Array1<C64>) -> Array1<C64> {
        let d = self.dim;
        let rho = y.view().into_shape((d, d)).expect("state length is d²");
        // −i [H, ρ].
        let mut out = self.h.dot(&rho);
        out -= &rho.dot(&self.h);
        out.mapv_inplace(|z| z * C64::new(0.0, -1.0));
        for ch in &self.channels {
            let eff = match &ch.amplitude {
                None => ch.rate,
                Some(amp) => ch.rate * amp(t).norm_sqr(),
            };
            if eff == 0.0 {
                continue;
            }
            // rate (A ρ B† − ½{K, ρ}).
            let sandwich = ch.a.dot(&rho).dot(&ch.b_dag);
            out.scaled_add(C64::new(eff, 0.0), &sandwich);
            let anti = &ch.k.dot(&rho) + &rho.dot(&ch.k);
            out.scaled_add(C64::new(-eff / 2.0, 0.0), &anti);
        }
        for casc in &self.cascades {
            let k = match &casc.amplitude {
                None => C64::new(casc.coupling, 0.0),
                Some(amp) => amp(t) * casc.coupling,
            };
            if k.norm_sqr() == 0.0 {
                continue;
            }
            // −k* [X†, Cρ] − k [ρC†, X].
            let c_rho = casc.c.dot(&rho);
            let t1 = &casc.xd_c.dot(&rho) - &c_rho.dot(&casc.x_dag);
            out.scaled_add(-k.conj(), &t1);
            let rho_cd = rho.dot(&casc.c_dag);
            let t2 = &rho.dot(&casc.cd_x) - &casc.x.dot(&rho_cd);
            out.scaled_add(-k, &t2);
        }
        out.into_shape(d * d).expect("square matrix flattens")
    }
}

/// Propagate a model with time-dependent channel or cascade amplitudes.
///
/// Integrates the vectorized master equation with adaptive steps between
/// grid samples; trace is preserved to 1e-8 (checked).
pub fn propagate_timedep(
    model: &SystemModel,
    rho0: &StateMatrix,
    grid: &TimeGrid,
) -> Result<Vec<StateMatrix>> {
    propagate_timedep_with_tol(model, rho0, grid, ODE_RTOL, ODE_ATOL)
}

/// [`propagate_timedep`] with explicit integrator tolerances (used by the
/// capture routines, whose observables need far less than the default
/// accuracy).
pub fn propagate_timedep_with_tol(
    model: &SystemModel,
    rho0: &StateMatrix,
    grid: &TimeGrid,
    rtol: f64,
    atol: f64,
) -> Result<Vec<StateMatrix>> {
    let gen = TimedepGenerator::build(model);
    let d = model.space.total_dim();
    let f = |t: f64, y: &Array1<C64>| gen.rhs(t, y);
    let mut out = Vec::with_capacity(grid.samples().len());
    let mut y = vectorize(&rho0.matrix);
    let mut t_prev = grid.start();
    for &t in grid.samples() {
        y = integrate_adaptive(&f, t_prev, t, &y, rtol, atol)?;
        t_prev = t;
        let rho = unvectorize(&y, d);
        let tr = rho.diag().sum();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::Integration(format!(
                "trace drifted to {tr} at t = {t:.6e}"
            )));
        }
        out.push(StateMatrix::new_unchecked(model.space.clone(), rho)?.hermitize_normalize()?);
    }
    Ok(out)
}

/// One recorded quantum trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    /// Jump events as (time, jump-channel index).
    pub jump_events: Vec<(f64, usize)>,
    /// Normalized state vectors at the grid samples.
    pub sampled_states: Vec<Array1<C64>>,
    /// Stream index used for this trajectory's RNG.
    pub stream: u64,
}

/// Diagonalized jump structure of a model: operators `L_m` with rates `d_m`
/// from the Kossakowski eigenbasis of the channel rate matrix.
pub struct JumpBasis {
    pub ops: Vec<Array2<C64>>,
    pub rates: Vec<f64>,
}

/// Diagonalize the static channels of a model into jump form.
pub fn jump_basis(model: &SystemModel) -> Result<JumpBasis> {
    if model.is_time_dependent() || !model.cascades.is_empty() {
        return Err(Error::InvalidModel(
            "trajectories need a time-independent, cascade-free model".into(),
        ));
    }
    // Distinct operators and the Kossakowski matrix over them.
    let mut stored: Vec<Array2<C64>> = Vec::new();
    let idx = |m: &Array2<C64>, stored: &mut Vec<Array2<C64>>| -> usize {
        for (k, o) in stored.iter().enumerate() {
            if o == m {
                return k;
            }
        }
        stored.push(m.clone());
        stored.len() - 1
    };
    let mut entries = Vec::new();
    for ch in &model.channels {
        let i = idx(&ch.a.matrix, &mut stored);
        let j = idx(&ch.b.matrix, &mut stored);
        entries.push((i, j, ch.rate));
    }
    let n = stored.len();
    let mut k_mat = Array2::<C64>::zeros((n, n));
    for (i, j, r) in entries {
        k_mat[(i, j)] += C64::new(r, 0.0);
    }
    let (vals, u) = k_mat.eigh(UPLO::Lower)?;
    let d = model.space.total_dim();
    let mut ops = Vec::new();
    let mut rates = Vec::new();
    for m in 0..n {
        if vals[m] <= 1e-14 {
            continue;
        }
        let mut lm = Array2::<C64>::zeros((d, d));
        for i in 0..n {
            lm.scaled_add(u[(i, m)], &stored[i]);
        }
        ops.push(lm);
        rates.push(vals[m]);
    }
    Ok(JumpBasis { ops, rates })
}

/// Monte Carlo wave-function unraveling.
///
/// Trajectories use independent counter-based RNG streams derived from
/// `(seed, trajectory index)` and are averaged into a density-matrix
/// sequence on the grid. Per-step total jump probability is kept below 0.1
/// by adaptive step halving.
pub fn mcwf(
    model: &SystemModel,
    psi0: &Array1<C64>,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
) -> Result<(Vec<StateMatrix>, Vec<TrajectoryRecord>)> {
    let basis = jump_basis(model)?;
    let d = model.space.total_dim();
    if psi0.len() != d {
        return Err(Error::DimensionMismatch { op_dim: psi0.len(), expected: d });
    }
    // Effective non-Hermitian Hamiltonian H_eff = H − (i/2) Σ d_m L_m†L_m.
    let mut h_eff = model.hamiltonian.matrix.mapv(|z| z);
    for (lm, &rate) in basis.ops.iter().zip(&basis.rates) {
        let lml = lm.t().mapv(|z| z.conj()).dot(lm);
        h_eff.scaled_add(C64::new(0.0, -rate / 2.0), &lml);
    }
    let gen = h_eff.mapv(|z| z * (-I));

    let records: Vec<Result<TrajectoryRecord>> = (0..n_traj)
        .into_par_iter()
        .map(|traj| run_trajectory(&gen, &basis, psi0, grid, seed, traj as u64))
        .collect();
    let mut recs = Vec::with_capacity(n_traj);
    for r in records {
        recs.push(r?);
    }

    let mut avg = Vec::with_capacity(grid.samples().len());
    for s in 0..grid.samples().len() {
        let mut rho = Array2::<C64>::zeros((d, d));
        for rec in &recs {
            let psi = &rec.sampled_states[s];
            for i in 0..d {
                for j in 0..d {
                    rho[(i, j)] += psi[i] * psi[j].conj();
                }
            }
        }
        rho.mapv_inplace(|z| z / n_traj as f64);
        avg.push(StateMatrix::new_unchecked(model.space.clone(), rho)?.hermitize_normalize()?);
    }
    Ok((avg, recs))
}

fn rk4_step(gen: &Array2<C64>, psi: &Array1<C64>, dt: f64) -> Array1<C64> {
    let h = C64::new(dt, 0.0);
    let k1 = gen.dot(psi);
    let mut tmp = psi.clone();
    tmp.scaled_add(h * 0.5, &k1);
    let k2 = gen.dot(&tmp);
    tmp = psi.clone();
    tmp.scaled_add(h * 0.5, &k2);
    let k3 = gen.dot(&tmp);
    tmp = psi.clone();
    tmp.scaled_add(h, &k3);
    let k4 = gen.dot(&tmp);
    let mut out = psi.clone();
    out.scaled_add(h / 6.0, &k1);
    out.scaled_add(h / 3.0, &k2);
    out.scaled_add(h / 3.0, &k3);
    out.scaled_add(h / 6.0, &k4);
    out
}

fn run_trajectory(
    gen: &Array2<C64>,
    basis: &JumpBasis,
    psi0: &Array1<C64>,
    grid: &TimeGrid,
    seed: u64,
    traj: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(traj.wrapping_add(1));

    let norm0: f64 = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut psi = psi0.mapv(|z| z / norm0);
    let mut t = grid.start();
    let mut jump_events = Vec::new();
    let mut sampled = Vec::with_capacity(grid.samples().len());

    let total_rate: f64 = basis.rates.iter().sum::<f64>().max(1e-12);
    let dt_base = (0.02 / total_rate).min((grid.end() - grid.start()) / 200.0);

    for (s, &t_target) in grid.samples().iter().enumerate() {
        if s == 0 && (t_target - t).abs() < 1e-300 {
            sampled.push(psi.clone());
            continue;
        }
        while t < t_target {
            let mut dt = dt_base.min(t_target - t);
            // Jump probabilities per channel; refine dt until total < 0.1.
            let mut refine = 0;
            let dps: Vec<f64> = loop {
                let dps: Vec<f64> = basis
                    .ops
                    .iter()
                    .zip(&basis.rates)
                    .map(|(lm, &rate)| {
                        let lpsi = lm.dot(&psi);
                        dt * rate * lpsi.iter().map(|z| z.norm_sqr()).sum::<f64>()
                    })
                    .collect();
                let total: f64 = dps.iter().sum();
                if total < 0.1 {
                    break dps;
                }
                dt /= 2.0;
                refine += 1;
                if refine > 60 {
                    return Err(Error::StepRefinement);
                }
            };

            // Independent uniform draw per channel; the channel with the
            // largest excess δp_μ − r_μ fires.
            let mut fired: Option<(usize, f64)> = None;
            for (mu, &dp) in dps.iter().enumerate() {
                let r: f64 = rng.gen();
                if r < dp {
                    let excess = dp - r;
                    if fired.map_or(true, |(_, best)| excess > best) {
                        fired = Some((mu, excess));
                    }
                }
            }

            if let Some((mu, _)) = fired {
                let mut new_psi = basis.ops[mu].dot(&psi);
                let norm: f64 = new_psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-150 {
                    return Err(Error::InvalidState(
                        "jump annihilated the trajectory state".into(),
                    ));
                }
                new_psi.mapv_inplace(|z| z / norm);
                psi = new_psi;
                jump_events.push((t + dt, mu));
            } else {
                let mut new_psi = rk4_step(gen, &psi, dt);
                let norm: f64 = new_psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                new_psi.mapv_inplace(|z| z / norm);
                psi = new_psi;
            }
            t += dt;
        }
        sampled.push(psi.clone());
    }
    Ok(TrajectoryRecord { jump_events, sampled_states: sampled, stream: traj })
}

/// Conditional no-jump evolution.
///
/// Propagates `dρ/dt = −i[H, ρ] − (1/2) Σ rate {B†A, ρ}` (the jump terms
/// removed), returning the renormalized conditional states and the survival
/// probability `P_nojump(t) = Tr ρ_unnorm(t)`.
pub fn no_jump_conditional(
    model: &SystemModel,
    rho0: &StateMatrix,
    grid: &TimeGrid,
) -> Result<(Vec<StateMatrix>, Vec<f64>)> {
    if model.is_time_dependent() || !model.cascades.is_empty() {
        return Err(Error::InvalidModel(
            "no-jump evolution needs a time-independent, cascade-free model".into(),
        ));
    }
    let d = model.space.total_dim();
    let eye = Array2::<C64>::eye(d);
    let mut l_nj = hamiltonian_term(&model.hamiltonian.matrix);
    for ch in &model.channels {
        if ch.rate != 0.0 {
            let bda = ch.b.dagger().matrix.dot(&ch.a.matrix);
            let mut anti = sandwich(&bda, &eye);
            anti += &sandwich(&eye, &bda);
            l_nj.scaled_add(C64::new(-ch.rate / 2.0, 0.0), &anti);
        }
    }
    let f = |_t: f64, y: &Array1<C64>| l_nj.dot(y);
    let mut states = Vec::with_capacity(grid.samples().len());
    let mut survival = Vec::with_capacity(grid.samples().len());
    let mut y = vectorize(&rho0.matrix);
    let mut t_prev = grid.start();
    for &t in grid.samples() {
        y = integrate_adaptive(&f, t_prev, t, &y, ODE_RTOL, ODE_ATOL)?;
        t_prev = t;
        let rho = unvectorize(&y, d);
        let p = rho.diag().sum().re;
        survival.push(p.max(0.0));
        if p < 1e-14 {
            // Survival exhausted; stop refining the conditional state.
            let last = states
                .last()
                .cloned()
                .unwrap_or_else(|| rho0.clone());
            states.push(last);
            continue;
        }
        states.push(
            StateMatrix::new_unchecked(model.space.clone(), rho)?.hermitize_normalize()?,
        );
    }
    Ok((states, survival))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::SpaceDescriptor;
    use crate::liouville::assemble;
    use crate::models::{ build_driven_dimer, build_tls, DimerParams, TlsParams };
    use approx::{ assert_abs_diff_eq, assert_relative_eq };

    fn tls_model(omega: f64) -> SystemModel {
        build_tls(TlsParams {
            delta_sigma: 0.0,
            omega_tilde: C64::new(omega, 0.0),
            gamma: 1.0,
        }).unwrap()
    }

    #[test]
    fn excited_tls_decays_exponentially() {
        let m = tls_model(0.0);
        let l = assemble(&m).unwrap();
        let rho0 = StateMatrix::basis(m.space.clone(), 1).unwrap();
        let grid = TimeGrid::linspace(0.0, 5.0, 11).unwrap();
        let states = propagate(&l, &rho0, &grid).unwrap();
        for (rho, &t) in states.iter().zip(grid.samples()) {
            assert_abs_diff_eq!(rho.matrix[(1, 1)].re, (-t).exp(), epsilon = 1e-8);
        }
    }

    #[test]
    fn time_translation_property() {
        let m = tls_model(0.8);
        let l = assemble(&m).unwrap();
        let rho0 = StateMatrix::basis(m.space.clone(), 1).unwrap();
        let g1 = TimeGrid::linspace(0.0, 1.3, 2).unwrap();
        let g2 = TimeGrid::linspace(0.0, 0.9, 2).unwrap();
        let g3 = TimeGrid::linspace(0.0, 2.2, 2).unwrap();
        let mid = propagate(&l, &rho0, &g1).unwrap().pop().unwrap();
        let fin_a = propagate(&l, &mid, &g2).unwrap().pop().unwrap();
        let fin_b = propagate(&l, &rho0, &g3).unwrap().pop().unwrap();
        for (a, b) in fin_a.matrix.iter().zip(fin_b.matrix.iter()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn dimer_two_photon_rabi_oscillation() {
        // Omega = 1e-2 R, beta = 0: gg <-> ee oscillation at 2|Omega_2p|
        // with small one-excitation population. R is chosen large enough
        // that decay feeds a negligible incoherent one-excitation
        // population over one oscillation period (2γ/(2|Ω_2p|) ≪ (Ω/R)²).
        let j = 1.0e9;
        let omega = 1.0e7;
        let m = build_driven_dimer(DimerParams {
            gamma: 1.0, gamma12: 0.0, j, delta: 0.0,
            big_delta: 0.0, omega, pump: 0.0,
        }).unwrap();
        let l = assemble(&m).unwrap();
        let rho0 = StateMatrix::basis(m.space.clone(), 0).unwrap();
        let omega_2p = 2.0 * omega * omega / j; // magnitude
        let t_half = std::f64::consts::PI / (2.0 * omega_2p);
        let grid = TimeGrid::linspace(0.0, 2.0 * t_half, 4001).unwrap();
        let states = propagate(&l, &rho0, &grid).unwrap();
        // Locate the maximum of the ee population.
        let (k_max, p_max) = states
            .iter()
            .map(|s| s.matrix[(3, 3)].re)
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let t_max = grid.samples()[k_max];
        assert!(p_max > 0.9, "peak ee population {p_max} too small");
        assert_relative_eq!(t_max, t_half, max_relative = 0.01);
        // One-excitation population stays < 10 (Omega/R)^2.
        let bound = 10.0 * (omega / j).powi(2);
        for s in &states {
            let p1 = s.matrix[(1, 1)].re + s.matrix[(2, 2)].re;
            assert!(p1 < bound, "one-excitation population {p1} exceeds {bound}");
        }
    }

    #[test]
    fn timedep_constant_amplitude_matches_static() {
        let mut m = tls_model(0.6);
        // Make the decay channel trivially "time-dependent".
        m.channels[0].amplitude = Some(std::sync::Arc::new(|_t| C64::new(1.0, 0.0)));
        let rho0 = StateMatrix::basis(m.space.clone(), 1).unwrap();
        let grid = TimeGrid::linspace(0.0, 3.0, 7).unwrap();
        let td = propagate_timedep(&m, &rho0, &grid).unwrap();
        let m_static = tls_model(0.6);
        let l = assemble(&m_static).unwrap();
        let st = propagate(&l, &rho0, &grid).unwrap();
        for (a, b) in td.iter().zip(st.iter()) {
            for (x, y) in a.matrix.iter().zip(b.matrix.iter()) {
                assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-8);
            }
        }
    }

    /// Single-mode capture of the photon emitted by a decaying TLS.
    ///
    /// A boxcar filter mode of duration T captures the overlap
    /// |∫ v*(t) ξ(t) dt|² with the exponential photon ξ(t) = √γ e^{−γt/2};
    /// a matched exponential filter captures the full photon.
    #[test]
    fn single_mode_capture_overlap() {
        let t_cap = 20.0_f64;
        // Boxcar: g(t) = -1/sqrt(t - t0), t0 = 0, regularized start.
        let pop_boxcar = run_capture(t_cap, move |_t| C64::new(1.0 / t_cap.sqrt(), 0.0));
        let overlap = 2.0 * (1.0 - (-t_cap / 2.0_f64).exp()) / t_cap.sqrt();
        assert_relative_eq!(pop_boxcar, overlap * overlap, max_relative = 0.02);

        // Matched filter: v(t) = sqrt(gamma) e^{-gamma t/2} captures ~all.
        let pop_matched = run_capture(t_cap, |t: f64| C64::new((-t / 2.0).exp(), 0.0));
        assert!(pop_matched > 0.98, "matched capture population {pop_matched}");
    }

    /// Integrate the cascaded capture equation for a given (unnormalized)
    /// filter profile v(t) on [0, T]; returns the final mode population.
    fn run_capture<V>(t_cap: f64, v: V) -> f64
    where
        V: Fn(f64) -> C64 + Send + Sync + Copy + 'static,
    {
        use crate::hilbert::{ embed, make_ladder, LadderKind };
        use crate::models::{ Cascade, Channel };
        use std::sync::Arc;

        // Normalize v on [0, T] numerically.
        let n_quad = 20_000;
        let dt = t_cap / n_quad as f64;
        let norm2: f64 = (0..n_quad)
            .map(|k| v((k as f64 + 0.5) * dt).norm_sqr() * dt)
            .sum();
        let norm = norm2.sqrt();

        // g(t) = -v*(t)/sqrt(int_0^t |v|^2) with the cumulative integral
        // evaluated analytically enough via quadrature cached in a closure.
        let cum: Arc<Vec<f64>> = Arc::new(
            (0..=n_quad)
                .scan(0.0, |acc, k| {
                    if k > 0 {
                        *acc += v((k as f64 - 0.5) * dt).norm_sqr() * dt / norm2;
                    }
                    Some(*acc)
                })
                .collect(),
        );
        let cum_at = move |t: f64| -> f64 {
            let x = (t / dt).clamp(0.0, n_quad as f64);
            let k = x.floor() as usize;
            let frac = x - k as f64;
            let lo = cum[k.min(n_quad)];
            let hi = cum[(k + 1).min(n_quad)];
            lo + frac * (hi - lo)
        };

        let space = SpaceDescriptor::new(vec![2, 3]).unwrap();
        let sqb = make_ladder(LadderKind::QubitLowering, None).unwrap();
        let sigma = embed(&sqb, 0, &space).unwrap();
        let ab = make_ladder(LadderKind::BosonAnnihilation, Some(2)).unwrap();
        let a = embed(&ab, 1, &space).unwrap();

        let g_fun = move |t: f64| -> C64 {
            if t <= 0.0 || t > t_cap {
                return C64::new(0.0, 0.0);
            }
            let c = cum_at(t);
            if c < 1e-12 {
                return C64::new(0.0, 0.0);
            }
            -(v(t).conj() / norm) / c.sqrt()
        };

        let g_amp: crate::models::Amplitude = Arc::new(g_fun);
        let h = crate::hilbert::Operator::new(
            space.clone(),
            Array2::<C64>::zeros((6, 6)),
        ).unwrap();
        let channels = vec![
            Channel::simple(sigma.clone(), 1.0),
            Channel {
                a: a.clone(),
                b: a.clone(),
                rate: 1.0,
                amplitude: Some(g_amp.clone()),
            },
        ];
        let mut model = SystemModel::new(space.clone(), h, channels, Default::default()).unwrap();
        model.cascades.push(Cascade {
            source: sigma,
            target: a.clone(),
            coupling: 1.0, // sqrt(gamma) with gamma = 1
            amplitude: Some(g_amp),
        });

        // Excited TLS, empty mode; regularized start eps*T.
        let rho0 = StateMatrix::basis(space, 3).unwrap(); // |e> (x) |0>
        let eps = 1e-4 * t_cap;
        let grid = TimeGrid::new(vec![eps, t_cap]).unwrap();
        let states = propagate_timedep(&model, &rho0, &grid).unwrap();
        let rho_end = states.last().unwrap();
        let na = a.dagger().dot(&a).unwrap();
        crate::hilbert::expectation(rho_end, &na).unwrap().re
    }

    #[test]
    fn mcwf_waiting_time_distribution() {
        let m = tls_model(0.0);
        let psi0 = ndarray::array![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let grid = TimeGrid::linspace(0.0, 12.0, 3).unwrap();
        let n_traj = 2000;
        let (_, recs) = mcwf(&m, &psi0, &grid, n_traj, 7).unwrap();
        let mut first_jumps: Vec<f64> = recs
            .iter()
            .filter_map(|r| r.jump_events.first().map(|&(t, _)| t))
            .collect();
        first_jumps.sort_by(f64::total_cmp);
        let n = first_jumps.len() as f64;
        assert!(n > 1900.0, "almost every trajectory should jump by t = 12");
        // KS statistic vs 1 - exp(-t), alpha = 1% critical value 1.63/sqrt(n).
        let mut ks: f64 = 0.0;
        for (i, &t) in first_jumps.iter().enumerate() {
            let f = 1.0 - (-t).exp();
            let emp_hi = (i as f64 + 1.0) / n;
            let emp_lo = i as f64 / n;
            ks = ks.max((emp_hi - f).abs()).max((f - emp_lo).abs());
        }
        assert!(ks < 1.63 / n.sqrt(), "KS statistic {ks} too large");
    }

    #[test]
    fn mcwf_average_converges_to_master_equation() {
        let m = tls_model(0.7);
        let psi0 = ndarray::array![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let grid = TimeGrid::linspace(0.0, 4.0, 9).unwrap();
        let (avg, _) = mcwf(&m, &psi0, &grid, 2000, 11).unwrap();
        let l = assemble(&m).unwrap();
        let rho0 = StateMatrix::basis(m.space.clone(), 0).unwrap();
        let exact = propagate(&l, &rho0, &grid).unwrap();
        for (a, b) in avg.iter().zip(exact.iter()) {
            let dev = (a.matrix[(1, 1)] - b.matrix[(1, 1)]).norm();
            // Population variance <= 1/4 per trajectory: 3 sigma bound.
            assert!(dev < 3.0 * 0.5 / (2000.0_f64).sqrt(), "deviation {dev}");
        }
    }

    #[test]
    fn mcwf_reproducible_across_runs() {
        let m = tls_model(0.5);
        let psi0 = ndarray::array![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let grid = TimeGrid::linspace(0.0, 2.0, 5).unwrap();
        let (a1, _) = mcwf(&m, &psi0, &grid, 64, 3).unwrap();
        let (a2, _) = mcwf(&m, &psi0, &grid, 64, 3).unwrap();
        for (x, y) in a1.iter().zip(a2.iter()) {
            for (p, q) in x.matrix.iter().zip(y.matrix.iter()) {
                assert_eq!(p, q);
            }
        }
    }

    #[test]
    fn no_jump_survival_of_excited_tls() {
        let m = tls_model(0.0);
        let rho0 = StateMatrix::basis(m.space.clone(), 1).unwrap();
        let grid = TimeGrid::linspace(0.0, 6.0, 13).unwrap();
        let (states, survival) = no_jump_conditional(&m, &rho0, &grid).unwrap();
        for ((&t, p), s) in grid.samples().iter().zip(&survival).zip(&states) {
            assert_abs_diff_eq!(*p, (-t).exp(), epsilon = 1e-8);
            // Conditional state stays excited.
            assert_abs_diff_eq!(s.matrix[(1, 1)].re, 1.0, epsilon = 1e-8);
        }
        // Monotone nonincreasing survival.
        for w in survival.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn no_jump_ground_state_is_inert() {
        let m = tls_model(0.0);
        let rho0 = StateMatrix::basis(m.space.clone(), 0).unwrap();
        let grid = TimeGrid::linspace(0.0, 6.0, 7).unwrap();
        let (_, survival) = no_jump_conditional(&m, &rho0, &grid).unwrap();
        for p in survival {
            assert_abs_diff_eq!(p, 1.0, epsilon = 1e-9);
        }
    }
}
