//! Analytic reductions and effective models.
//!
//! Closed-form steady states and rates for the driven emitter dimer (dressed
//! one- and two-photon excitation channels, emission intensity and
//! visibility), the metastable Λ-system, cavity-mediated collective decay
//! (flat and frequency-resolved Purcell regimes), and a classifier for the
//! entanglement-generation mechanisms supported by these models. Every
//! quantity here has an independent numerical counterpart elsewhere in the
//! crate; the unit tests cross-validate the two routes.

use ndarray::Array2;
use ndarray_linalg::{ Eigh, UPLO };
use num_complex::Complex64 as C64;

use crate::hilbert::{ Operator, SpaceDescriptor };
use crate::liouville::{ assemble, sandwich, Superoperator };
use crate::models::{
    build_driven_dimer, excitonic, purcell_cooperativity, CavityParams, Channel, DimerParams,
    LambdaParams, SystemModel,
};
use crate::{ Error, Result, I, ONE };

/// Ratio defining "much greater than" in regime checks: `a ≫ b` holds when
/// `a ≥ DOMINANCE_RATIO · b`.
pub const DOMINANCE_RATIO: f64 = 3.0;

// ---------------------------------------------------------------------------
// Dressed-state energies and transition frequencies of the driven dimer.
// ---------------------------------------------------------------------------

/// Perturbative dressed-state data of the resonantly driven dimer
/// (drive detuning Δ = 0, drive Ω ≪ R).
#[derive(Clone, Copy, Debug)]
pub struct TwoPhotonParams {
    /// Mixing angle β = atan2(δ, J).
    pub beta: f64,
    /// Dipole splitting R = √(J² + δ²).
    pub r: f64,
    /// Signed two-photon Rabi frequency Ω₂ₚ = −2Ω² cos β / R.
    pub omega_2p: f64,
    /// Second-order dressed energies, ordered from the highest branch down:
    /// the shifted |+⟩, the anchor at 0, the shifted two-photon branch, and
    /// the shifted |−⟩.
    pub energies: [f64; 4],
    /// Sideband offsets of the emission multiplet (positive side; the
    /// spectrum contains mirrored partners at the negated offsets plus the
    /// central line).
    pub sidebands: [f64; 6],
    /// Two-photon splitting 2|Ω₂ₚ| separating the inner sideband pairs.
    pub splitting: f64,
    /// Drive strength saturating the two-photon transition,
    /// Ω₂ₚₛ = √(Rγ/cos β)/2; `None` when cos β ≤ 0.
    pub omega_2ps: Option<f64>,
    /// Largest mixing angle keeping the two-photon resonance resolvable,
    /// β_max = arccos(γ/4R); `None` when γ/4R > 1.
    pub beta_max: Option<f64>,
    /// Drive strength of maximal two-photon visibility,
    /// Ω_v = R√(2/(tan²β + 8R²/γ²)).
    pub omega_v: f64,
}

/// Compute the dressed-state frequencies of the driven dimer to second order
/// in Ω/R. Requires R > 0.
pub fn two_photon_params(params: &DimerParams) -> Result<TwoPhotonParams> {
    let exc = excitonic(params.j, params.delta, params.gamma, params.gamma12, params.omega)?;
    let (beta, r, om) = (exc.beta, exc.r, params.omega);
    let gamma = params.gamma;
    let c = beta.cos();
    let shift = 2.0 * om * om / r;

    let energies = [
        r + (c + 1.0) * shift,
        0.0,
        -2.0 * c * shift,
        -r + (c - 1.0) * shift,
    ];
    let sidebands = [
        2.0 * r + 2.0 * shift,
        r + (3.0 * c + 1.0) * shift,
        r + (c + 1.0) * shift,
        r - (c - 1.0) * shift,
        r - (3.0 * c - 1.0) * shift,
        2.0 * c * shift,
    ];
    let omega_2ps = if c > 0.0 { Some(0.5 * (r * gamma / c).sqrt()) } else { None };
    let beta_max = if gamma <= 4.0 * r { Some((gamma / (4.0 * r)).acos()) } else { None };
    let tan2 = beta.tan().powi(2);
    let omega_v = r * (2.0 / (tan2 + 8.0 * r * r / (gamma * gamma))).sqrt();

    Ok(TwoPhotonParams {
        beta,
        r,
        omega_2p: exc.omega_2p,
        energies,
        sidebands,
        splitting: 2.0 * exc.omega_2p.abs(),
        omega_2ps,
        beta_max,
        omega_v,
    })
}

// ---------------------------------------------------------------------------
// Steady states of the effective one- and two-photon excitation models.
// ---------------------------------------------------------------------------

/// Steady state of the effective two-photon (|gg⟩ ↔ |ee⟩) excitation channel
/// in the dressed basis {|gg⟩, |+⟩, |−⟩, |ee⟩}.
#[derive(Clone, Copy, Debug)]
pub struct TwoPhotonSteady {
    /// Population of |ee⟩.
    pub rho_ee: f64,
    /// Population of |+⟩ (cascade intermediate, equal to `rho_ee`).
    pub rho_pp: f64,
    /// Population of |−⟩ (equal to `rho_ee`).
    pub rho_mm: f64,
    /// Population of |gg⟩.
    pub rho_gg: f64,
    /// Coherence ⟨gg|ρ|ee⟩ sustaining the two-photon drive.
    pub rho_gg_ee: C64,
}

/// Closed-form steady state of the two-photon channel at detuning Δ with
/// two-photon Rabi frequency Ω₂ₚ (from the dimer parameters).
pub fn model_2p_steady(params: &DimerParams) -> Result<TwoPhotonSteady> {
    let exc = excitonic(params.j, params.delta, params.gamma, params.gamma12, params.omega)?;
    let (g, d, o2) = (params.gamma, params.big_delta, exc.omega_2p);
    let rho_ee = o2 * o2 / (g * g + 4.0 * d * d + 4.0 * o2 * o2);
    let rho_gg = 1.0 - 3.0 * rho_ee;
    let rho_gg_ee = I * C64::new(o2, 0.0) * (rho_gg - rho_ee) / C64::new(g, -2.0 * d);
    Ok(TwoPhotonSteady { rho_ee, rho_pp: rho_ee, rho_mm: rho_ee, rho_gg, rho_gg_ee })
}

/// Steady state of the one-photon excitation channels in the dressed basis.
#[derive(Clone, Copy, Debug)]
pub struct OnePhotonSteady {
    /// Population of |+⟩: 4Ω₊²/ξ₊.
    pub rho_pp: f64,
    /// Population of |−⟩: 4Ω₋²/ξ₋.
    pub rho_mm: f64,
    /// Dressed coherence ⟨+|ρ|−⟩ (real at this order).
    pub rho_pm: f64,
    /// Population of |ee⟩ from sequential excitation: ρ₊₊ρ₋₋.
    pub rho_ee: f64,
    /// Lorentzian denominator ξ₊ = γ₊² + 4(Δ+R)² + 8Ω₊².
    pub xi_plus: f64,
    /// Lorentzian denominator ξ₋ = γ₋² + 4(Δ−R)² + 8Ω₋².
    pub xi_minus: f64,
}

/// Closed-form steady state of the one-photon channels at detuning Δ.
pub fn model_1p_steady(params: &DimerParams) -> Result<OnePhotonSteady> {
    let exc = excitonic(params.j, params.delta, params.gamma, params.gamma12, params.omega)?;
    let (g, d, om, r, beta) = (params.gamma, params.big_delta, params.omega, exc.r, exc.beta);
    let (op2, om2) = (exc.omega_plus.powi(2), exc.omega_minus.powi(2));
    let xi_plus = exc.gamma_plus.powi(2) + 4.0 * (d + r).powi(2) + 8.0 * op2;
    let xi_minus = exc.gamma_minus.powi(2) + 4.0 * (d - r).powi(2) + 8.0 * om2;
    let rho_pp = 4.0 * op2 / xi_plus;
    let rho_mm = 4.0 * om2 / xi_minus;
    let chi = 2.0 * (g * g * d * d + (d * d + 2.0 * om * om).powi(2))
        + g * g * r * r * (2.0 * beta).cos()
        + r * r * (g * g - 4.0 * d * d + 8.0 * om * om)
        + 2.0 * r.powi(4)
        - 4.0 * d * r * beta.cos() * (g * g + 4.0 * om * om);
    let rho_pm = 2.0 * om * om * beta.sin() * (d * d - r * r - 2.0 * om * om) / chi;
    Ok(OnePhotonSteady { rho_pp, rho_mm, rho_pm, rho_ee: rho_pp * rho_mm, xi_plus, xi_minus })
}

/// Emission intensity decomposed into one- and two-photon contributions.
#[derive(Clone, Copy, Debug)]
pub struct IntensityAnalytics {
    /// Total intensity I = ⟨S⁺S⁻⟩.
    pub total: f64,
    /// One-photon contribution.
    pub one_photon: f64,
    /// Two-photon contribution 4ρ_ee⁽²⁾.
    pub two_photon: f64,
    /// Exact visibility of the two-photon resonance, I⁽²⁾/I⁽¹⁾.
    pub visibility: Option<f64>,
    /// Small-drive peak visibility 8R²Ω²cos²β / (γ²[R²−Ω²+(R²+Ω²)cos 2β]).
    pub visibility_peak: f64,
    /// Zero-delay autocorrelation g⁽²⁾(0) = 4ρ_ee/I²; `None` when I < 1e-14.
    pub g2: Option<f64>,
}

/// Closed-form emission intensity of the driven dimer at detuning Δ.
///
/// Combines the one- and two-photon steady states through
/// I = 2ρ_ee + (1+cos β)ρ₊₊ + (1−cos β)ρ₋₋ + 2 sin β Re ρ₊₋.
pub fn intensity_analytics(params: &DimerParams) -> Result<IntensityAnalytics> {
    let exc = excitonic(params.j, params.delta, params.gamma, params.gamma12, params.omega)?;
    let p1 = model_1p_steady(params)?;
    let p2 = model_2p_steady(params)?;
    let c = exc.beta.cos();
    let s = exc.beta.sin();
    let one_photon = 2.0 * p1.rho_ee
        + (1.0 + c) * p1.rho_pp
        + (1.0 - c) * p1.rho_mm
        + 2.0 * s * p1.rho_pm;
    let two_photon = 4.0 * p2.rho_ee;
    let total = one_photon + two_photon;
    let visibility = if one_photon > f64::MIN_POSITIVE { Some(two_photon / one_photon) } else { None };
    let (g, om, r) = (params.gamma, params.omega, exc.r);
    let denom = g * g * (r * r - om * om + (r * r + om * om) * (2.0 * exc.beta).cos());
    let visibility_peak = if denom.abs() > f64::MIN_POSITIVE {
        8.0 * r * r * om * om * c * c / denom
    } else {
        f64::INFINITY
    };
    let rho_ee = p1.rho_ee + p2.rho_ee;
    let g2 = if total >= 1e-14 { Some(4.0 * rho_ee / (total * total)) } else { None };
    Ok(IntensityAnalytics { total, one_photon, two_photon, visibility, visibility_peak, g2 })
}

// ---------------------------------------------------------------------------
// Metastable Λ-system.
// ---------------------------------------------------------------------------

/// Closed-form steady state, relaxation rate, and metastable plateau of the
/// symmetric Λ-system (both legs driven with Ω, |2⟩ → |1⟩ decay Γ, no decay
/// out of |V⟩, degenerate lower levels).
#[derive(Clone, Debug)]
pub struct LambdaAnalytics {
    /// Steady-state density matrix in the basis {|1⟩, |2⟩, |V⟩}.
    pub rho_ss: Array2<C64>,
    /// Exact slow relaxation rate Γ_c toward the steady state.
    pub gamma_c: f64,
    /// Metastable-regime approximation Γ_c ≈ 3ΓΩ²/(2Δ_V²).
    pub gamma_c_approx: f64,
    /// Effective two-photon coupling Ω₂ₚ = Ω²/Δ_V between |1⟩ and |2⟩.
    pub omega_2p: f64,
    /// Metastable plateau of the |2⟩ population, 4Ω₂ₚ²/(Γ² + 8Ω₂ₚ²).
    pub rho_22_mm: f64,
    /// Metastable plateau of the ⟨1|ρ|2⟩ coherence, −2iΓΩ₂ₚ/(Γ² + 8Ω₂ₚ²).
    pub rho_12_mm: C64,
    gamma: f64,
    rho_vv_ss: f64,
}

impl LambdaAnalytics {
    /// Vault population at time t starting from |1⟩:
    /// ρ_VV(t) = ρ_VV^ss (1 − e^{−Γ_c t}).
    pub fn rho_vv_t(&self, t: f64) -> f64 {
        self.rho_vv_ss * (1.0 - (-self.gamma_c * t).exp())
    }

    /// Metastable-manifold transient of the |2⟩ population starting from
    /// |1⟩, valid on times short against 1/Γ_c.
    pub fn rho_22_meta_t(&self, t: f64) -> f64 {
        let g = self.gamma;
        let kappa = (C64::new(g * g / 4.0 - 16.0 * self.omega_2p.powi(2), 0.0)).sqrt() * 0.5;
        let envelope = if kappa.norm() < 1e-300 {
            ONE + C64::new(0.75 * g * t, 0.0)
        } else {
            (kappa * t).cosh() + (kappa * t).sinh() * C64::new(0.75 * g, 0.0) / kappa
        };
        self.rho_22_mm * (1.0 - ((-0.75 * g * t).exp() * envelope).re)
    }
}

/// Closed-form analytics of the Λ-system. Requires degenerate lower levels
/// (`delta1 = delta2 = 0`), no vault decay (`gamma_v = 0`), and Δ_V ≠ 0.
pub fn hae_lambda(params: &LambdaParams) -> Result<LambdaAnalytics> {
    if params.delta1 != 0.0 || params.delta2 != 0.0 {
        return Err(Error::InvalidModel("analytics require degenerate lower levels".into()));
    }
    if params.gamma_v != 0.0 {
        return Err(Error::InvalidModel("analytics require gamma_v = 0".into()));
    }
    if params.delta_v == 0.0 {
        return Err(Error::InvalidModel("analytics require delta_v != 0".into()));
    }
    let (g, dv, om) = (params.big_gamma, params.delta_v, params.omega);
    let d = g * g * dv * dv + 2.0 * g * g * om * om + 12.0 * om.powi(4);

    let rho_11 = (g * g * om * om + g * g * dv * dv + 4.0 * om.powi(4)) / d;
    let rho_22 = 4.0 * om.powi(4) / d;
    let rho_vv = om * om * (g * g + 4.0 * om * om) / d;
    let rho_12 = -2.0 * I * g * om * om * dv / d;
    let rho_1v = C64::new(-g * om, 0.0) * C64::new(g * dv, -2.0 * om * om) / d;
    let rho_2v = -2.0 * I * g * om.powi(3) / d;

    let mut rho_ss = Array2::<C64>::zeros((3, 3));
    rho_ss[(0, 0)] = C64::new(rho_11, 0.0);
    rho_ss[(1, 1)] = C64::new(rho_22, 0.0);
    rho_ss[(2, 2)] = C64::new(rho_vv, 0.0);
    rho_ss[(0, 1)] = rho_12;
    rho_ss[(1, 0)] = rho_12.conj();
    rho_ss[(0, 2)] = rho_1v;
    rho_ss[(2, 0)] = rho_1v.conj();
    rho_ss[(1, 2)] = rho_2v;
    rho_ss[(2, 1)] = rho_2v.conj();

    let chi = g.powi(4) * dv * dv
        + 32.0 * om.powi(4) * (dv * dv + om * om)
        + 4.0 * g * g * (dv.powi(4) + 3.0 * dv * dv * om * om + om.powi(4));
    let gamma_c = 4.0 * (12.0 * g * om.powi(6) + g.powi(3) * om * om * (dv * dv + 2.0 * om * om))
        / chi;
    let gamma_c_approx = 1.5 * g * om * om / (dv * dv);

    let omega_2p = om * om / dv;
    let mm_denom = g * g + 8.0 * omega_2p * omega_2p;
    Ok(LambdaAnalytics {
        rho_ss,
        gamma_c,
        gamma_c_approx,
        omega_2p,
        rho_22_mm: 4.0 * omega_2p * omega_2p / mm_denom,
        rho_12_mm: -2.0 * I * C64::new(g * omega_2p, 0.0) / mm_denom,
        gamma: g,
        rho_vv_ss: rho_vv,
    })
}

// ---------------------------------------------------------------------------
// Cavity elimination: flat and frequency-resolved Purcell decay.
// ---------------------------------------------------------------------------

/// Dimer with the cavity adiabatically eliminated into a flat collective
/// decay channel (Γ_P/2)D[S⁻] with Γ_P = g²κ/(κ²/4 + Δ_a²), plus the
/// cavity-induced collective Lamb shift −g²Δ_a/(κ²/4 + Δ_a²) S⁺S⁻.
///
/// Valid in the fast-cavity regime κ ≫ R, Ω, Γ_P.
pub fn collective_purcell(params: &DimerParams, cavity: &CavityParams) -> Result<SystemModel> {
    let (gamma_p, _) = purcell_cooperativity(cavity.g, cavity.kappa, params.gamma, cavity.delta_a)?;
    let mut model = build_driven_dimer(*params)?;
    let s_tot = model.op("S_minus")?.clone();
    let shift = -cavity.g * cavity.g * cavity.delta_a
        / (cavity.kappa * cavity.kappa / 4.0 + cavity.delta_a * cavity.delta_a);
    if shift != 0.0 {
        let splus_sminus = s_tot.dagger().dot(&s_tot)?;
        let h = &model.hamiltonian.matrix + &splus_sminus.matrix.mapv(|z| z * shift);
        model.hamiltonian = Operator::new(model.space.clone(), h)?;
    }
    model.channels.push(Channel::simple(s_tot, gamma_p));
    Ok(model)
}

/// Effective dimer Liouvillian from a second-order (Born-Markov) elimination
/// of the cavity that retains the frequency dependence of the cavity
/// response across the dressed transitions.
///
/// Diagonalizes the coherent dimer Hamiltonian (including the drive), and
/// adds, for every pair of dressed transitions, the term
/// `g_ij g_mn* / (κ/2 + i(Δ_a − ω_ij)) · [σ_ij ρ, σ_mn†] + H.c.`
/// to the bare dimer Liouvillian, where σ_ij = |j⟩⟨i| lowers transition
/// i → j at frequency ω_ij = λ_i − λ_j and g_ij = g ⟨j|S⁻|i⟩.
pub fn nakajima_elimination(
    params: &DimerParams,
    cavity: &CavityParams,
) -> Result<Superoperator> {
    let model = build_driven_dimer(*params)?;
    let base = assemble(&model)?;
    let d = base.dim;
    let s_tot = model.op("S_minus")?.matrix.clone();
    let (evals, evecs) = model.hamiltonian.matrix.eigh(UPLO::Lower)?;

    // Dressed-basis matrix elements of S⁻ and the transition data.
    let mut terms: Vec<(Array2<C64>, C64, f64)> = Vec::new(); // (σ_ij, g_ij, ω_ij)
    for i in 0..d {
        for j in 0..d {
            let vi = evecs.column(i);
            let vj = evecs.column(j);
            let g_ij: C64 = vj
                .iter()
                .enumerate()
                .map(|(a, &ca)| {
                    ca.conj()
                        * s_tot
                            .row(a)
                            .iter()
                            .zip(vi.iter())
                            .map(|(&sab, &cb)| sab * cb)
                            .sum::<C64>()
                })
                .sum();
            let g_ij = g_ij * cavity.g;
            if g_ij.norm() < 1e-14 {
                continue;
            }
            let mut sigma = Array2::<C64>::zeros((d, d));
            for a in 0..d {
                for b in 0..d {
                    sigma[(a, b)] = vj[a] * vi[b].conj();
                }
            }
            terms.push((sigma, g_ij, evals[i] - evals[j]));
        }
    }

    let eye = Array2::<C64>::eye(d);
    let mut l = base.matrix;
    for (sig_ij, g_ij, omega_ij) in &terms {
        let denom = C64::new(cavity.kappa / 2.0, cavity.delta_a - omega_ij);
        for (sig_mn, g_mn, _) in &terms {
            let coeff = *g_ij * g_mn.conj() / denom;
            let sig_mn_dag = sig_mn.t().mapv(|z| z.conj());
            // coeff ([σ_ij ρ, σ_mn†]) + H.c.
            let gain = sandwich(sig_ij, &sig_mn_dag);
            let drag = sandwich(&sig_mn_dag.dot(sig_ij), &eye);
            l += &(gain.mapv(|z| z * coeff) - drag.mapv(|z| z * coeff));
            let gain_h = sandwich(sig_mn, &sig_ij.t().mapv(|z| z.conj()));
            let drag_h = sandwich(&eye, &sig_ij.t().mapv(|z| z.conj()).dot(sig_mn));
            l += &(gain_h.mapv(|z| z * coeff.conj()) - drag_h.mapv(|z| z * coeff.conj()));
        }
    }
    Ok(Superoperator { dim: d, matrix: l, space: model.space })
}

/// Which collective-decay branch a frequency-resolved Purcell filter
/// enhances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PurcellBranch {
    /// Cavity at the upper dressed transition (Δ_a ≈ +R).
    Antisymmetric,
    /// Cavity at the lower dressed transition (Δ_a ≈ −R).
    Symmetric,
}

/// Effective jump operator of the frequency-resolved Purcell regime on the
/// bare two-qubit space (basis |gg⟩, |ge⟩, |eg⟩, |ee⟩):
/// ξ_A = |gg⟩⟨+| − (β/2)|−⟩⟨ee| and ξ_S = −|+⟩⟨ee| + (β/2)|gg⟩⟨−|,
/// both carrying the flat Purcell rate Γ_P.
pub fn freq_resolved_jump_op(beta: f64, branch: PurcellBranch) -> Result<Operator> {
    let space = SpaceDescriptor::qubits(2);
    let alpha = std::f64::consts::FRAC_PI_4 - beta / 2.0;
    // |+⟩ = cos α |eg⟩ + sin α |ge⟩, |−⟩ = −sin α |eg⟩ + cos α |ge⟩.
    let plus = [0.0, alpha.sin(), alpha.cos(), 0.0];
    let minus = [0.0, alpha.cos(), -alpha.sin(), 0.0];
    let gg = [1.0, 0.0, 0.0, 0.0];
    let ee = [0.0, 0.0, 0.0, 1.0];
    let outer = |ket: &[f64; 4], bra: &[f64; 4], w: f64| {
        let mut m = Array2::<C64>::zeros((4, 4));
        for a in 0..4 {
            for b in 0..4 {
                m[(a, b)] = C64::new(w * ket[a] * bra[b], 0.0);
            }
        }
        m
    };
    let m = match branch {
        PurcellBranch::Antisymmetric => {
            outer(&gg, &plus, 1.0) + outer(&minus, &ee, -beta / 2.0)
        }
        PurcellBranch::Symmetric => {
            outer(&plus, &ee, -1.0) + outer(&gg, &minus, beta / 2.0)
        }
    };
    Operator::new(space, m)
}

// ---------------------------------------------------------------------------
// Mechanism rates, populations, and timescales.
// ---------------------------------------------------------------------------

/// Closed-form rates, steady-state dressed populations, and preparation
/// timescales of the cavity-assisted entanglement mechanisms.
#[derive(Clone, Copy, Debug)]
pub struct MechanismReport {
    /// Flat collective Purcell rate Γ_P at the configured Δ_a.
    pub gamma_p: f64,
    /// Cooperativity C = 4g²/(κγ).
    pub cooperativity: f64,
    /// Superradiant decay rate Γ_S = γ + γ₁₂ + 2Γ_P.
    pub gamma_s: f64,
    /// Subradiant decay rate Γ_A = γ − γ₁₂.
    pub gamma_a: f64,
    /// Frequency-resolved feeding rate of |−⟩: Γ_IA = β²Γ_P/2.
    pub gamma_ia: f64,
    /// Frequency-resolved drain rate of |ee⟩ and |−⟩: Γ_IS = 2Γ_P.
    pub gamma_is: f64,
    /// Whether β² > (2/C)(1 − γ₁₂/γ), required for antisymmetric trapping.
    pub beta_threshold_ok: bool,
    /// Steady |−⟩ population with coherent two-photon drive and Δ_a ≈ +R.
    pub rho_a_ss_coh: f64,
    /// Preparation time of the |−⟩ state, 2/(Γ_IA + γ₋).
    pub tau_a_coh: f64,
    /// Steady |+⟩ population with coherent drive and Δ_a ≈ −R.
    pub rho_s_ss_coh: f64,
    /// Preparation time of the |+⟩ state under coherent driving.
    pub tau_s_coh: f64,
    /// Steady |+⟩ population under incoherent pumping; `None` without pump.
    pub rho_s_ss_incoh: Option<f64>,
    /// Preparation time under incoherent pumping; `None` without pump.
    pub tau_s_incoh: Option<f64>,
    /// Pump rate maximizing the incoherent |+⟩ population,
    /// P_opt = (Γ_P/2)√((κ/J)² + 16/C).
    pub p_opt: Option<f64>,
    /// Incoherent |+⟩ population at P_opt, [1 + √((κ/J)² + 16/C)/2]⁻¹.
    pub rho_s_ss_max: Option<f64>,
    /// Detuning-induced |−⟩ feeding rate, Γ_eff = 4Γ_S δ²/(Γ_S² + 24Ω²).
    pub gamma_eff_detuning: f64,
    /// Steady |−⟩ population of the detuning mechanism, 2Ω²/(δ² + 2Ω²).
    pub rho_a_ss_detuning: f64,
    /// Slow ring-down rate of the antisymmetric channel, γ + 4δ²/Γ_S.
    pub gamma_a_ringdown: f64,
    /// Largest detuning preserving the spontaneous Bell mechanism,
    /// δ_max = Ω√(2(1+√5)J/γ); `None` when J = 0.
    pub delta_max_bell: Option<f64>,
    /// Steady |−⟩ population of the pumped degenerate mechanism,
    /// 2(Γ_P+γ)²/(P² + 3P(Γ_P+γ) + 4(Γ_P+γ)²); `None` without pump.
    pub rho_a_ss_pumped: Option<f64>,
}

/// Evaluate all mechanism closed forms for a dimer-plus-cavity setting.
pub fn mechanism_analytics(
    params: &DimerParams,
    cavity: &CavityParams,
) -> Result<MechanismReport> {
    let exc = excitonic(params.j, params.delta, params.gamma, params.gamma12, params.omega)?;
    let (gamma_p, coop) =
        purcell_cooperativity(cavity.g, cavity.kappa, params.gamma, cavity.delta_a)?;
    let (gamma, gamma12, p) = (params.gamma, params.gamma12, params.pump);
    let beta = exc.beta;
    let gamma_s = gamma + gamma12 + 2.0 * gamma_p;
    let gamma_a = gamma - gamma12;
    let gamma_ia = beta * beta * gamma_p / 2.0;
    let gamma_is = 2.0 * gamma_p;
    let beta_threshold_ok = beta * beta > (2.0 / coop) * (1.0 - gamma12 / gamma);

    let rho_a_ss_coh = gamma_ia / (gamma_ia + exc.gamma_minus);
    let tau_a_coh = 2.0 / (gamma_ia + exc.gamma_minus);

    let o2 = exc.omega_2p;
    let p_s = 2.0 * o2 * o2 / gamma_p;
    let rho_s_ss_coh = if p_s > 0.0 {
        1.0 / (1.0 + exc.gamma_plus * (1.0 / p_s + 1.0 / gamma_p))
    } else {
        0.0
    };
    let root = (C64::new(1.0 - (2.0 * o2 / gamma_p).powi(2), 0.0)).sqrt().re;
    let tau_s_coh = if root < 1.0 { 2.0 / gamma_p / (1.0 - root) } else { f64::INFINITY };

    let (rho_s_ss_incoh, tau_s_incoh) = if p > 0.0 && params.j != 0.0 {
        let ratio = cavity.kappa / params.j;
        let rho = 1.0
            / (1.0
                + p / (2.0 * gamma_p)
                + exc.gamma_plus / p
                + gamma_p / (8.0 * p) * ratio * ratio);
        let tau = 1.0 / (p + gamma_p - (gamma_p * gamma_p + p * exc.gamma_plus).sqrt());
        (Some(rho), Some(tau))
    } else {
        (None, None)
    };
    let (p_opt, rho_s_ss_max) = if params.j != 0.0 {
        let root = ((cavity.kappa / params.j).powi(2) + 16.0 / coop).sqrt();
        (Some(gamma_p / 2.0 * root), Some(1.0 / (1.0 + root / 2.0)))
    } else {
        (None, None)
    };

    let om = params.omega;
    let delta = params.delta;
    let gamma_eff_detuning =
        4.0 * gamma_s * delta * delta / (gamma_s * gamma_s + 24.0 * om * om);
    let rho_a_ss_detuning = 2.0 * om * om / (delta * delta + 2.0 * om * om);
    let gamma_a_ringdown = gamma + 4.0 * delta * delta / gamma_s;

    let delta_max_bell = if params.j > 0.0 {
        Some(om * (2.0 * (1.0 + 5.0_f64.sqrt()) * params.j / gamma).sqrt())
    } else {
        None
    };
    let rho_a_ss_pumped = if p > 0.0 {
        let q = gamma_p + gamma;
        Some(2.0 * q * q / (p * p + 3.0 * p * q + 4.0 * q * q))
    } else {
        None
    };

    Ok(MechanismReport {
        gamma_p,
        cooperativity: coop,
        gamma_s,
        gamma_a,
        gamma_ia,
        gamma_is,
        beta_threshold_ok,
        rho_a_ss_coh,
        tau_a_coh,
        rho_s_ss_coh,
        tau_s_coh,
        rho_s_ss_incoh,
        tau_s_incoh,
        p_opt,
        rho_s_ss_max,
        gamma_eff_detuning,
        rho_a_ss_detuning,
        gamma_a_ringdown,
        delta_max_bell,
        rho_a_ss_pumped,
    })
}

/// Unsimplified relaxation rate of the antisymmetric population under
/// collective decay Γ_S with inter-emitter detuning δ and drive Ω.
///
/// This is the exact adiabatic-elimination result for the dimer whose only
/// dissipation is the collective channel Γ_S; it estimates the Liouvillian
/// gap of that model and reduces to 4Γ_S δ²/(Γ_S² + 24Ω²) in the limit
/// Ω ≫ δ.
pub fn detuning_relaxation_rate(gamma_s: f64, delta: f64, omega: f64) -> f64 {
    let d2 = delta * delta;
    let o2 = omega * omega;
    let gs2 = gamma_s * gamma_s;
    let chi = gs2 * gs2 * (d2 + 2.0 * o2)
        + gs2 * (6.0 * d2 * d2 - 4.0 * d2 * o2 + 64.0 * o2 * o2)
        + 8.0 * (d2 * d2 * d2 - 4.0 * d2 * d2 * o2 + 4.0 * d2 * o2 * o2
            + 48.0 * o2 * o2 * o2);
    4.0 * gamma_s * d2 * (d2 + 2.0 * o2) * (gs2 + 2.0 * d2 + 8.0 * o2) / chi
}

/// Preparation timescale of hidden antisymmetric entanglement in a chiral
/// waveguide: τ = 24Ω²/(Γ(4δ² + Δγ²)) with Γ = 2(γ_R + γ_L) and
/// Δγ = γ_R − γ_L. Valid for Ω ≫ δ, Δγ.
pub fn chiral_hae_timescale(omega: f64, gamma_r: f64, gamma_l: f64, delta: f64) -> Result<f64> {
    if gamma_r < 0.0 || gamma_l < 0.0 || gamma_r + gamma_l == 0.0 {
        return Err(Error::InvalidModel("chiral rates must be nonnegative, not both zero".into()));
    }
    let big_gamma = 2.0 * (gamma_r + gamma_l);
    let dgamma = gamma_r - gamma_l;
    let denom = big_gamma * (4.0 * delta * delta + dgamma * dgamma);
    if denom == 0.0 {
        return Err(Error::InvalidModel("tau undefined: delta = 0 and symmetric decay".into()));
    }
    Ok(24.0 * omega * omega / denom)
}

// ---------------------------------------------------------------------------
// Mechanism classifier.
// ---------------------------------------------------------------------------

/// The entanglement-generation mechanisms distinguished by the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mechanism {
    /// Frequency-resolved Purcell trapping of |−⟩ (cavity at Δ_a ≈ +R).
    ResolvedAntisymmetric,
    /// Frequency-resolved Purcell stabilization of |+⟩ (Δ_a ≈ −R).
    ResolvedSymmetric,
    /// Detuning-mediated feeding of |−⟩ in the fast-cavity regime.
    DetuningFeeding,
    /// Spontaneous two-photon Bell-state buildup without a cavity.
    SpontaneousBell,
    /// Cavity-assisted two-photon Bell-state buildup (fast cavity).
    CavityBell,
    /// Incoherently pumped |−⟩ trapping in the degenerate dimer.
    PumpedAntisymmetric,
    /// Cavity locked to a two-photon sideband (Δ_a ≈ ±2Ω₂ₚ).
    SidebandLocked,
}

/// One regime condition evaluated by the classifier.
#[derive(Clone, Debug)]
pub struct ConditionCheck {
    /// Human-readable condition label.
    pub label: String,
    /// Whether the condition holds (with the dominance-ratio margin where
    /// the condition is an inequality of scales).
    pub satisfied: bool,
    /// The dimensionless ratio that was compared (margin diagnostics).
    pub ratio: f64,
}

/// Assessment of one mechanism: the conditions checked and the verdict.
#[derive(Clone, Debug)]
pub struct MechanismAssessment {
    pub mechanism: Mechanism,
    /// True when every condition is satisfied.
    pub active: bool,
    pub conditions: Vec<ConditionCheck>,
}

fn check(label: &str, a: f64, b: f64) -> ConditionCheck {
    // `a ≫ b` with the dominance margin; for b = 0 any positive a passes.
    let ratio = if b == 0.0 { f64::INFINITY } else { a / b };
    ConditionCheck {
        label: label.to_string(),
        satisfied: a >= DOMINANCE_RATIO * b && a > 0.0,
        ratio,
    }
}

fn check_flag(label: &str, satisfied: bool, ratio: f64) -> ConditionCheck {
    ConditionCheck { label: label.to_string(), satisfied, ratio }
}

/// Classify which mechanisms the given parameter point supports. Pass
/// `None` for `cavity` to assess the free-space mechanisms only.
pub fn classify_mechanisms(
    params: &DimerParams,
    cavity: Option<&CavityParams>,
) -> Result<Vec<MechanismAssessment>> {
    let exc = excitonic(params.j, params.delta, params.gamma, params.gamma12, params.omega)?;
    let gamma = params.gamma;
    let o2 = exc.omega_2p.abs();
    let mut out = Vec::new();

    let cavity_data = match cavity {
        Some(cv) => {
            let (gp_res, coop) = purcell_cooperativity(cv.g, cv.kappa, gamma, 0.0)?;
            Some((cv, gp_res, coop))
        }
        None => None,
    };

    // Frequency-resolved Purcell mechanisms (need R ≫ κ ≫ Γ_P ≫ γ).
    for (mech, sign) in [
        (Mechanism::ResolvedSymmetric, -1.0),
        (Mechanism::ResolvedAntisymmetric, 1.0),
    ] {
        let mut conds = Vec::new();
        match cavity_data {
            Some((cv, gp, coop)) => {
                conds.push(check_flag("C > 1", coop > 1.0, coop));
                conds.push(check("R >> kappa", exc.r, cv.kappa));
                conds.push(check("kappa >> Gamma_P", cv.kappa, gp));
                conds.push(check("Gamma_P >> gamma", gp, gamma));
                let target = sign * exc.r;
                conds.push(check_flag(
                    "cavity on dressed transition",
                    (cv.delta_a - target).abs() <= cv.kappa / 2.0,
                    (cv.delta_a - target).abs() / (cv.kappa / 2.0),
                ));
                match mech {
                    Mechanism::ResolvedSymmetric => {
                        if params.pump > 0.0 {
                            conds.push(check("Gamma_P >> P", gp, params.pump));
                            conds.push(check_flag(
                                "P >= gamma",
                                params.pump >= gamma,
                                params.pump / gamma,
                            ));
                        } else {
                            conds.push(check_flag(
                                "two-photon drive present",
                                params.omega > 0.0 && o2 > 0.0,
                                o2 / gamma,
                            ));
                            conds.push(check("kappa >> Omega_2p", cv.kappa, o2));
                        }
                    }
                    _ => {
                        conds.push(check_flag(
                            "two-photon drive present",
                            params.omega > 0.0 && o2 > 0.0,
                            o2 / gamma,
                        ));
                        let thresh = (2.0 / coop) * (1.0 - params.gamma12 / gamma);
                        conds.push(check_flag(
                            "beta^2 above trapping threshold",
                            exc.beta.powi(2) > thresh,
                            if thresh > 0.0 { exc.beta.powi(2) / thresh } else { f64::INFINITY },
                        ));
                    }
                }
            }
            None => conds.push(check_flag("cavity present", false, 0.0)),
        }
        let active = conds.iter().all(|c| c.satisfied);
        out.push(MechanismAssessment { mechanism: mech, active, conditions: conds });
    }

    // Detuning-mediated feeding (fast cavity, Ω ≳ δ).
    {
        let mut conds = Vec::new();
        match cavity_data {
            Some((cv, gp, _)) => {
                let gamma_s = gamma + params.gamma12 + 2.0 * gp;
                let gamma_a = gamma - params.gamma12;
                conds.push(check("kappa >> R", cv.kappa, exc.r));
                conds.push(check("kappa >> Omega", cv.kappa, params.omega));
                conds.push(check_flag(
                    "Omega >= delta",
                    params.omega >= params.delta.abs() && params.delta != 0.0,
                    if params.delta != 0.0 { params.omega / params.delta.abs() } else { 0.0 },
                ));
                conds.push(check_flag(
                    "cavity near resonance",
                    cv.delta_a.abs() <= cv.kappa / 2.0,
                    cv.delta_a.abs() / (cv.kappa / 2.0),
                ));
                let eff = if params.delta != 0.0 {
                    4.0 * gamma_s * params.delta.powi(2)
                        / (gamma_s * gamma_s + 24.0 * params.omega.powi(2))
                } else {
                    0.0
                };
                conds.push(check_flag(
                    "Gamma_eff > Gamma_A",
                    eff > gamma_a,
                    if gamma_a > 0.0 { eff / gamma_a } else { f64::INFINITY },
                ));
            }
            None => conds.push(check_flag("cavity present", false, 0.0)),
        }
        let active = conds.iter().all(|c| c.satisfied);
        out.push(MechanismAssessment {
            mechanism: Mechanism::DetuningFeeding,
            active,
            conditions: conds,
        });
    }

    // Spontaneous Bell buildup (two-photon coherence without a cavity).
    {
        let mut conds = vec![
            check_flag(
                "delta >= J",
                params.delta.abs() >= params.j.abs(),
                if params.j != 0.0 { params.delta.abs() / params.j.abs() } else { f64::INFINITY },
            ),
            check_flag(
                "Omega_2p comparable to gamma",
                o2 >= gamma / DOMINANCE_RATIO && o2 <= gamma * DOMINANCE_RATIO,
                o2 / gamma,
            ),
        ];
        if let Some((cv, gp, _)) = cavity_data {
            conds.push(check_flag("cavity negligible", gp < gamma, gp / gamma));
            conds.push(check_flag("kappa < J", cv.kappa < params.j.abs(), cv.kappa / params.j.abs()));
        }
        let active = conds.iter().all(|c| c.satisfied);
        out.push(MechanismAssessment {
            mechanism: Mechanism::SpontaneousBell,
            active,
            conditions: conds,
        });
    }

    // Cavity-assisted Bell buildup (fast cavity, two-photon drive present).
    {
        let mut conds = Vec::new();
        match cavity_data {
            Some((cv, gp, _)) => {
                conds.push(check("kappa >> Omega", cv.kappa, params.omega));
                conds.push(check("kappa >> delta", cv.kappa, params.delta.abs()));
                conds.push(check("kappa >> J", cv.kappa, params.j.abs()));
                conds.push(check_flag(
                    "Omega_2p comparable to gamma",
                    o2 >= gamma / DOMINANCE_RATIO,
                    o2 / gamma,
                ));
                if params.omega >= params.j.abs() {
                    conds.push(check_flag("Gamma_P > Omega", gp > params.omega, gp / params.omega));
                }
                conds.push(check_flag(
                    "drive below saturation of R",
                    params.omega < DOMINANCE_RATIO * exc.r,
                    params.omega / exc.r,
                ));
            }
            None => conds.push(check_flag("cavity present", false, 0.0)),
        }
        let active = conds.iter().all(|c| c.satisfied);
        out.push(MechanismAssessment {
            mechanism: Mechanism::CavityBell,
            active,
            conditions: conds,
        });
    }

    // Pumped antisymmetric trapping (degenerate dimer, incoherent pump).
    {
        let mut conds = Vec::new();
        match cavity_data {
            Some((cv, gp, _)) => {
                conds.push(check_flag("pump present", params.pump > 0.0, params.pump / gamma));
                conds.push(check_flag(
                    "near-maximal collective decay",
                    params.gamma12 >= 0.9 * gamma,
                    params.gamma12 / gamma,
                ));
                conds.push(check("kappa >> R", cv.kappa, exc.r));
                conds.push(check("J >> delta", params.j.abs(), params.delta.abs()));
                conds.push(check("Gamma_P >> P", gp, params.pump));
                conds.push(check("P >> gamma", params.pump, gamma));
            }
            None => conds.push(check_flag("cavity present", false, 0.0)),
        }
        let active = conds.iter().all(|c| c.satisfied);
        out.push(MechanismAssessment {
            mechanism: Mechanism::PumpedAntisymmetric,
            active,
            conditions: conds,
        });
    }

    // Cavity locked to a two-photon sideband.
    {
        let mut conds = Vec::new();
        match cavity_data {
            Some((cv, _, coop)) => {
                conds.push(check_flag("C > 1", coop > 1.0, coop));
                conds.push(check_flag(
                    "kappa below J",
                    cv.kappa <= params.j.abs(),
                    if params.j != 0.0 { cv.kappa / params.j.abs() } else { f64::INFINITY },
                ));
                let off = (cv.delta_a.abs() - 2.0 * o2).abs();
                conds.push(check_flag(
                    "cavity on two-photon sideband",
                    o2 > 0.0 && off <= cv.kappa / 2.0,
                    if o2 > 0.0 { off / (cv.kappa / 2.0) } else { f64::INFINITY },
                ));
            }
            None => conds.push(check_flag("cavity present", false, 0.0)),
        }
        let active = conds.iter().all(|c| c.satisfied);
        out.push(MechanismAssessment {
            mechanism: Mechanism::SidebandLocked,
            active,
            conditions: conds,
        });
    }

    Ok(out)
}

/// Convenience: the set of active mechanisms from [`classify_mechanisms`].
pub fn active_mechanisms(
    params: &DimerParams,
    cavity: Option<&CavityParams>,
) -> Result<Vec<Mechanism>> {
    Ok(classify_mechanisms(params, cavity)?
        .into_iter()
        .filter(|a| a.active)
        .map(|a| a.mechanism)
        .collect())
}

// ---------------------------------------------------------------------------
// Helpers shared with tests.
// ---------------------------------------------------------------------------

/// Transform a 4×4 bare-basis density matrix into the dressed basis
/// {|gg⟩, |+⟩, |−⟩, |ee⟩} for the given mixing angle β.
pub fn to_dressed_basis(rho: &Array2<C64>, beta: f64) -> Array2<C64> {
    let alpha = std::f64::consts::FRAC_PI_4 - beta / 2.0;
    // Columns are the dressed states expressed in {|gg⟩,|ge⟩,|eg⟩,|ee⟩}.
    let mut u = Array2::<C64>::zeros((4, 4));
    u[(0, 0)] = ONE;
    u[(1, 1)] = C64::new(alpha.sin(), 0.0);
    u[(2, 1)] = C64::new(alpha.cos(), 0.0);
    u[(1, 2)] = C64::new(alpha.cos(), 0.0);
    u[(2, 2)] = C64::new(-alpha.sin(), 0.0);
    u[(3, 3)] = ONE;
    let u_dag = u.t().mapv(|z| z.conj());
    u_dag.dot(rho).dot(&u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ propagate, TimeGrid };
    use crate::hilbert::{ expectation, partial_trace };
    use crate::liouville::{ spectral_decomposition, steady_state };
    use crate::models::{ build_dimer_cavity, build_lambda };
    use approx::assert_abs_diff_eq;

    fn base_dimer(j: f64, delta: f64, omega: f64, big_delta: f64) -> DimerParams {
        DimerParams {
            gamma: 1.0,
            gamma12: 0.0,
            j,
            delta,
            big_delta,
            omega,
            pump: 0.0,
        }
    }

    #[test]
    fn dressed_energies_match_numeric_spectrum() {
        let params = base_dimer(30.0, 10.0, 1.0, 0.0);
        let tp = two_photon_params(&params).unwrap();
        let model = build_driven_dimer(params).unwrap();
        let (mut evals, _) = model.hamiltonian.matrix.eigh(UPLO::Lower).unwrap();
        evals.as_slice_mut().unwrap().sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut predicted = tp.energies;
        predicted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (num, ana) in evals.iter().zip(predicted.iter()) {
            assert_abs_diff_eq!(num, ana, epsilon = 1e-3);
        }
    }

    #[test]
    fn sideband_pairs_split_by_twice_omega_2p() {
        let params = base_dimer(40.0, 25.0, 2.0, 0.0);
        let tp = two_photon_params(&params).unwrap();
        let s = tp.sidebands;
        assert_abs_diff_eq!(s[1] - s[2], tp.splitting, epsilon = 1e-12);
        assert_abs_diff_eq!(s[3] - s[4], tp.splitting, epsilon = 1e-12);
        assert_abs_diff_eq!(s[5], tp.splitting, epsilon = 1e-12);
    }

    #[test]
    fn omega_v_approaches_half_gamma_for_large_r() {
        // At β = 0 and R ≫ γ the optimal-visibility drive tends to γ/2.
        let params = base_dimer(1.0e4, 0.0, 1.0, 0.0);
        let tp = two_photon_params(&params).unwrap();
        assert_abs_diff_eq!(tp.omega_v, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn two_photon_steady_matches_full_numerics() {
        let params = base_dimer(953.939, 300.0, 10.0, 0.0);
        let exc = excitonic(params.j, params.delta, 1.0, 0.0, params.omega).unwrap();
        let model = build_driven_dimer(params).unwrap();
        let rho = steady_state(&assemble(&model).unwrap()).unwrap();
        let dressed = to_dressed_basis(&rho.matrix, exc.beta);
        let p2 = model_2p_steady(&params).unwrap();
        let p1 = model_1p_steady(&params).unwrap();

        let rho_ee = dressed[(3, 3)].re;
        let pred_ee = p2.rho_ee + p1.rho_ee;
        assert!(
            (rho_ee - pred_ee).abs() <= 0.05 * rho_ee,
            "rho_ee numeric {rho_ee:.6e} vs predicted {pred_ee:.6e}"
        );
        let rho_pp = dressed[(1, 1)].re;
        let pred_pp = p2.rho_pp + p1.rho_pp;
        assert!(
            (rho_pp - pred_pp).abs() <= 0.05 * rho_pp,
            "rho_pp numeric {rho_pp:.6e} vs predicted {pred_pp:.6e}"
        );
        let coh = dressed[(0, 3)];
        assert!(
            (coh - p2.rho_gg_ee).norm() <= 0.1 * coh.norm(),
            "gg-ee coherence numeric {coh:?} vs predicted {:?}",
            p2.rho_gg_ee
        );
    }

    #[test]
    fn one_photon_steady_matches_full_numerics_on_resonance() {
        let mut params = base_dimer(953.939, 300.0, 10.0, 0.0);
        let exc = excitonic(params.j, params.delta, 1.0, 0.0, params.omega).unwrap();
        params.big_delta = -exc.r;
        let model = build_driven_dimer(params).unwrap();
        let rho = steady_state(&assemble(&model).unwrap()).unwrap();
        let dressed = to_dressed_basis(&rho.matrix, exc.beta);
        let p1 = model_1p_steady(&params).unwrap();
        let rho_pp = dressed[(1, 1)].re;
        assert!(
            (rho_pp - p1.rho_pp).abs() <= 0.05 * rho_pp,
            "rho_pp numeric {rho_pp:.6e} vs predicted {:.6e}",
            p1.rho_pp
        );
        // Near saturation of the |+⟩ transition the population approaches 1/2.
        assert!(p1.rho_pp > 0.4);
    }

    #[test]
    fn intensity_matches_numeric_emission() {
        for big_delta in [0.0, -50.0, 1000.0] {
            let params = base_dimer(953.939, 300.0, 10.0, big_delta);
            let model = build_driven_dimer(params).unwrap();
            let rho = steady_state(&assemble(&model).unwrap()).unwrap();
            let s_tot = model.op("S_minus").unwrap();
            let numeric = expectation(&rho, &s_tot.dagger().dot(s_tot).unwrap())
                .unwrap()
                .re;
            let ana = intensity_analytics(&params).unwrap();
            assert!(
                (numeric - ana.total).abs() <= 0.05 * numeric.max(1e-12),
                "Delta {big_delta}: numeric {numeric:.6e} vs analytic {:.6e}",
                ana.total
            );
        }
    }

    #[test]
    fn g2_matches_numeric_two_photon_moment() {
        let params = base_dimer(953.939, 300.0, 10.0, 0.0);
        let model = build_driven_dimer(params).unwrap();
        let rho = steady_state(&assemble(&model).unwrap()).unwrap();
        let s_tot = model.op("S_minus").unwrap();
        let s2 = s_tot.dot(s_tot).unwrap();
        let num = expectation(&rho, &s2.dagger().dot(&s2).unwrap()).unwrap().re;
        let den = expectation(&rho, &s_tot.dagger().dot(s_tot).unwrap()).unwrap().re;
        let g2_numeric = num / (den * den);
        let g2_ana = intensity_analytics(&params).unwrap().g2.unwrap();
        assert!(
            (g2_numeric - g2_ana).abs() <= 0.1 * g2_numeric,
            "g2 numeric {g2_numeric:.4e} vs analytic {g2_ana:.4e}"
        );
    }

    fn lambda_params(delta_v: f64, omega: f64, big_gamma: f64) -> LambdaParams {
        LambdaParams {
            delta1: 0.0,
            delta2: 0.0,
            delta_v,
            omega,
            big_gamma,
            gamma_v: 0.0,
        }
    }

    #[test]
    fn lambda_steady_state_closed_form_is_exact() {
        for (dv, om, g) in [(50.0, 2.0, 1.0), (200.0, 5.0, 0.3), (30.0, 10.0, 2.0)] {
            let params = lambda_params(dv, om, g);
            let model = build_lambda(params).unwrap();
            let rho = steady_state(&assemble(&model).unwrap()).unwrap();
            let ana = hae_lambda(&params).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (rho.matrix[(i, j)] - ana.rho_ss[(i, j)]).norm() < 1e-10,
                        "entry ({i},{j}): numeric {:?} vs closed form {:?}",
                        rho.matrix[(i, j)],
                        ana.rho_ss[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn lambda_gamma_c_matches_liouvillian_gap() {
        let params = lambda_params(1.0e4, 100.0, 1.0);
        let ana = hae_lambda(&params).unwrap();
        let sup = assemble(&build_lambda(params).unwrap()).unwrap();
        let spec = spectral_decomposition(&sup).unwrap();
        let gap = spec
            .eigenvalues
            .iter()
            .map(|l| -l.re)
            .filter(|r| *r > 1e-9)
            .fold(f64::INFINITY, f64::min);
        assert!(
            (gap - ana.gamma_c).abs() <= 0.05 * gap,
            "gap {gap:.6e} vs Gamma_c {:.6e}",
            ana.gamma_c
        );
        // Metastable regime: the simple approximation is also close.
        assert!((ana.gamma_c_approx - ana.gamma_c).abs() <= 0.1 * ana.gamma_c);
    }

    #[test]
    fn lambda_transients_match_propagation() {
        let params = lambda_params(1.0e4, 100.0, 1.0);
        let ana = hae_lambda(&params).unwrap();
        let model = build_lambda(params).unwrap();
        let sup = assemble(&model).unwrap();
        let rho0 = crate::hilbert::StateMatrix::basis(model.space.clone(), 0).unwrap();

        // Metastable plateau of the |2⟩ population.
        let t_meta = 20.0;
        let grid = TimeGrid::linspace(0.0, t_meta, 21).unwrap();
        let states = propagate(&sup, &rho0, &grid).unwrap();
        let rho22 = states.last().unwrap().matrix[(1, 1)].re;
        assert!(
            (rho22 - ana.rho_22_meta_t(t_meta)).abs() <= 0.02,
            "rho22 numeric {rho22:.4} vs metastable transient {:.4}",
            ana.rho_22_meta_t(t_meta)
        );
        assert!((ana.rho_22_mm - 4.0 / 9.0).abs() < 1e-12);

        // Slow filling of the vault level.
        let t_slow = 2.0 / ana.gamma_c;
        let grid = TimeGrid::linspace(0.0, t_slow, 11).unwrap();
        let states = propagate(&sup, &rho0, &grid).unwrap();
        let rho_vv = states.last().unwrap().matrix[(2, 2)].re;
        let pred = ana.rho_vv_t(t_slow);
        assert!(
            (rho_vv - pred).abs() <= 0.05 * ana.rho_ss[(2, 2)].re,
            "rho_VV numeric {rho_vv:.4} vs predicted {pred:.4}"
        );
    }

    #[test]
    fn nakajima_reduces_to_flat_purcell_for_fast_cavity() {
        let params = DimerParams {
            gamma: 1.0,
            gamma12: 0.9,
            j: 100.0,
            delta: 10.0,
            big_delta: 0.0,
            omega: 5.0,
            pump: 0.0,
        };
        let exc = excitonic(params.j, params.delta, 1.0, 0.9, params.omega).unwrap();
        let bare = assemble(&build_driven_dimer(params).unwrap()).unwrap();
        let mut errs = Vec::new();
        for kappa_over_r in [10.0, 100.0] {
            let kappa = kappa_over_r * exc.r;
            let cavity = CavityParams { g: 10.0, kappa, delta_a: 0.0, n_trunc: 1 };
            let reduced = nakajima_elimination(&params, &cavity).unwrap();
            let flat = assemble(&collective_purcell(&params, &cavity).unwrap()).unwrap();
            let diff = (&reduced.matrix - &flat.matrix).mapv(|z| z.norm()).sum();
            let purcell_norm = (&flat.matrix - &bare.matrix).mapv(|z| z.norm()).sum();
            errs.push(diff / purcell_norm);
        }
        assert!(errs[1] < errs[0], "error should shrink with kappa: {errs:?}");
        assert!(errs[1] < 0.05, "fast-cavity limit not reached: {errs:?}");
    }

    #[test]
    fn nakajima_without_coupling_is_the_bare_dimer() {
        let params = base_dimer(20.0, 5.0, 2.0, 0.0);
        let cavity = CavityParams { g: 0.0, kappa: 100.0, delta_a: 0.0, n_trunc: 1 };
        let reduced = nakajima_elimination(&params, &cavity).unwrap();
        let bare = assemble(&build_driven_dimer(params).unwrap()).unwrap();
        let diff = (&reduced.matrix - &bare.matrix).mapv(|z| z.norm()).sum();
        assert!(diff < 1e-12);
    }

    #[test]
    fn flat_purcell_concurrence_matches_full_cavity_model() {
        let params = DimerParams {
            gamma: 1.0,
            gamma12: 0.999,
            j: 0.0,
            delta: 1.0e3,
            big_delta: 0.0,
            omega: 1.0e2,
            pump: 0.0,
        };
        let cavity = CavityParams { g: 500.0, kappa: 1.0e4, delta_a: 0.0, n_trunc: 2 };
        let full = build_dimer_cavity(params, cavity).unwrap();
        let rho_full = steady_state(&assemble(&full).unwrap()).unwrap();
        let qubits = partial_trace(&rho_full, &[0, 1]).unwrap();
        let c_full = crate::entanglement::concurrence(&qubits).unwrap();

        let reduced = collective_purcell(&params, &cavity).unwrap();
        let rho_red = steady_state(&assemble(&reduced).unwrap()).unwrap();
        let c_red = crate::entanglement::concurrence(&rho_red).unwrap();
        assert!(
            (c_full - c_red).abs() <= 0.03,
            "concurrence full {c_full:.4} vs reduced {c_red:.4}"
        );
    }

    #[test]
    fn detuning_feeding_rate_matches_reduced_model_gap() {
        let params = DimerParams {
            gamma: 1.0,
            gamma12: 0.999,
            j: 0.0,
            delta: 2.0,
            big_delta: 0.0,
            omega: 20.0,
            pump: 0.0,
        };
        // Deep overdamped regime Γ_S ≫ Ω ≫ δ, where the closed-form feeding
        // rate is asymptotically exact.
        let cavity = CavityParams { g: 122.4, kappa: 300.0, delta_a: 0.0, n_trunc: 1 };
        let report = mechanism_analytics(&params, &cavity).unwrap();
        let sup = assemble(&collective_purcell(&params, &cavity).unwrap()).unwrap();
        let spec = spectral_decomposition(&sup).unwrap();
        let gap = spec
            .eigenvalues
            .iter()
            .map(|l| -l.re)
            .filter(|r| *r > 1e-9)
            .fold(f64::INFINITY, f64::min);
        assert!(
            (gap - report.gamma_eff_detuning).abs() <= 0.1 * gap,
            "gap {gap:.4e} vs Gamma_eff {:.4e}",
            report.gamma_eff_detuning
        );
    }

    #[test]
    fn optimal_pump_maximizes_incoherent_population() {
        let base = DimerParams {
            gamma: 1.0,
            gamma12: 0.999,
            j: 1.0e4,
            delta: 0.0,
            big_delta: 0.0,
            omega: 0.0,
            pump: 1.0,
        };
        let cavity = CavityParams { g: 500.0, kappa: 2.0e3, delta_a: 0.0, n_trunc: 1 };
        let report = mechanism_analytics(&base, &cavity).unwrap();
        let p_opt = report.p_opt.unwrap();
        let value = |p: f64| {
            let mut params = base;
            params.pump = p;
            mechanism_analytics(&params, &cavity)
                .unwrap()
                .rho_s_ss_incoh
                .unwrap()
        };
        let best = value(p_opt);
        assert!(
            (best - report.rho_s_ss_max.unwrap()).abs() <= 0.01 * best,
            "population at P_opt {best:.4} vs closed-form max {:.4}",
            report.rho_s_ss_max.unwrap()
        );
        // Scan around the optimum: no grid point beats it by more than 0.1%.
        for k in -20..=20 {
            let p = p_opt * (1.0 + 0.05 * k as f64);
            if p > 0.0 {
                assert!(value(p) <= best * 1.001, "pump {p} beats the closed-form optimum");
            }
        }
    }

    #[test]
    fn freq_resolved_jump_ops_have_expected_structure() {
        let xi_a = freq_resolved_jump_op(0.0, PurcellBranch::Antisymmetric).unwrap();
        // At β = 0 the antisymmetric branch is exactly |gg⟩⟨+|.
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(xi_a.matrix[(0, 1)].re, inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(xi_a.matrix[(0, 2)].re, inv_sqrt2, epsilon = 1e-12);
        assert_abs_diff_eq!(xi_a.matrix[(1, 3)].re, 0.0, epsilon = 1e-12);

        let beta = 0.2;
        let xi_s = freq_resolved_jump_op(beta, PurcellBranch::Symmetric).unwrap();
        // The |gg⟩⟨−| admixture carries weight β/2.
        let minus_weight =
            (xi_s.matrix[(0, 1)].norm_sqr() + xi_s.matrix[(0, 2)].norm_sqr()).sqrt();
        assert_abs_diff_eq!(minus_weight, beta / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn classifier_flags_resolved_symmetric_branch() {
        let params = DimerParams {
            gamma: 1.0,
            gamma12: 0.999,
            j: 9.18e4,
            delta: 918.0,
            big_delta: 0.0,
            omega: 1.0e4,
            pump: 0.0,
        };
        let exc = excitonic(params.j, params.delta, 1.0, 0.999, params.omega).unwrap();
        let cavity = CavityParams { g: 1.0e3, kappa: 1.0e4, delta_a: -exc.r, n_trunc: 1 };
        let active = active_mechanisms(&params, Some(&cavity)).unwrap();
        assert_eq!(active, vec![Mechanism::ResolvedSymmetric]);
    }

    #[test]
    fn classifier_flags_detuning_feeding_for_molecule_set() {
        // Rates in units of γ = 2π·40 MHz.
        let params = DimerParams {
            gamma: 1.0,
            gamma12: 0.0,
            j: 0.0,
            delta: 7.65,
            big_delta: 0.0,
            omega: 9.25,
            pump: 0.0,
        };
        let cavity = CavityParams { g: 19.25, kappa: 58.0, delta_a: 0.0, n_trunc: 2 };
        let active = active_mechanisms(&params, Some(&cavity)).unwrap();
        assert_eq!(active, vec![Mechanism::DetuningFeeding]);
    }

    #[test]
    fn classifier_finds_nothing_for_plain_weak_dimer() {
        let params = base_dimer(10.0, 1.0, 1.0, 0.0);
        let active = active_mechanisms(&params, None).unwrap();
        assert!(active.is_empty(), "unexpected mechanisms: {active:?}");
    }

    #[test]
    fn chiral_timescale_scales_quadratically_in_drive() {
        let t1 = chiral_hae_timescale(5.0, 1.2, 0.8, 0.3).unwrap();
        let t2 = chiral_hae_timescale(10.0, 1.2, 0.8, 0.3).unwrap();
        assert_abs_diff_eq!(t2 / t1, 4.0, epsilon = 1e-12);
        assert!(chiral_hae_timescale(1.0, 1.0, 1.0, 0.0).is_err());
    }
}
