//! Canonical open-system model builders and derived coupling parameters.
//!
//! Every builder returns an immutable [`SystemModel`]: a Hilbert-space
//! descriptor, a (rotating-frame) Hamiltonian, a list of dissipative
//! channels, optional cascaded couplings, and a label table exposing the
//! named operators of the model (`sigma1`, `sigma2`, `a`, `S_minus`, ...).
//!
//! All rates are expressed in units of the local spontaneous-emission rate γ
//! (γ ≡ 1 internally); builders take γ explicitly so scaled variants remain
//! possible. The rotating frame is the laser frame whenever a coherent drive
//! is present, otherwise the mean-emitter frame (cavity detunings are then
//! interpreted relative to the emitter frequency).

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::{ Eigh, UPLO };
use num_complex::Complex64 as C64;

use crate::hilbert::{
    embed, make_ladder, LadderKind, Operator, SpaceDescriptor,
};
use crate::{ Error, Result, ONE };

/// Time-dependent complex amplitude multiplying a channel or cascade.
pub type Amplitude = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// One dissipative channel.
///
/// A channel `(A, B, rate)` contributes `(rate/2)·(2 A ρ B† − {B†A, ρ})` to
/// the master equation. When `amplitude` is present the effective rate at
/// time `t` is `rate · |amplitude(t)|²` (used for temporal-mode filters).
#[derive(Clone)]
pub struct Channel {
    pub a: Operator,
    pub b: Operator,
    pub rate: f64,
    pub amplitude: Option<Amplitude>,
}

impl Channel {
    /// Ordinary single-operator channel `(A, A, rate)`.
    pub fn simple(a: Operator, rate: f64) -> Self {
        Self { b: a.clone(), a, rate, amplitude: None }
    }

    /// Cross channel `(A, B, rate)`.
    pub fn cross(a: Operator, b: Operator, rate: f64) -> Self {
        Self { a, b, rate, amplitude: None }
    }
}

impl std::fmt::Debug for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Channel")
            .field("rate", &self.rate)
            .field("time_dependent", &self.amplitude.is_some())
            .finish()
    }
}

/// Unidirectional (cascaded) coupling from a source operator `source` into a
/// target operator `target`.
///
/// With `k(t) = coupling · amplitude(t)` (or the constant `coupling`), the
/// contribution to the master equation is
/// `−k(t)* [target†, source·ρ] − k(t) [ρ·source†, target]`.
#[derive(Clone)]
pub struct Cascade {
    pub source: Operator,
    pub target: Operator,
    pub coupling: f64,
    pub amplitude: Option<Amplitude>,
}

impl std::fmt::Debug for Cascade {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cascade")
            .field("coupling", &self.coupling)
            .field("time_dependent", &self.amplitude.is_some())
            .finish()
    }
}

/// A complete open-system model.
#[derive(Clone, Debug)]
pub struct SystemModel {
    pub space: SpaceDescriptor,
    pub hamiltonian: Operator,
    pub channels: Vec<Channel>,
    pub cascades: Vec<Cascade>,
    pub labels: HashMap<String, Operator>,
}

impl SystemModel {
    /// Assemble a model from parts, validating Hermiticity of the
    /// Hamiltonian (1e-12) and positivity of same-operator-family rate
    /// blocks.
    pub fn new(
        space: SpaceDescriptor,
        hamiltonian: Operator,
        channels: Vec<Channel>,
        labels: HashMap<String, Operator>,
    ) -> Result<Self> {
        if !hamiltonian.is_hermitian(1e-12) {
            return Err(Error::InvalidModel("Hamiltonian not Hermitian to 1e-12".into()));
        }
        let model = Self { space, hamiltonian, channels, cascades: Vec::new(), labels };
        model.check_dissipator_positivity()?;
        Ok(model)
    }

    /// Look up a labelled operator.
    pub fn op(&self, name: &str) -> Result<&Operator> {
        self.labels
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("no operator labelled '{name}'")))
    }

    /// True when any channel or cascade carries a time-dependent amplitude.
    pub fn is_time_dependent(&self) -> bool {
        self.channels.iter().any(|c| c.amplitude.is_some())
            || self.cascades.iter().any(|c| c.amplitude.is_some())
    }

    /// Check that the rate matrix of cross-coupled channel families is
    /// Hermitian positive semidefinite (complete positivity).
    ///
    /// Channels are grouped into families sharing the same operator pool;
    /// within a family the matrix `γ_ij` multiplying `A_i ρ A_j†` must have
    /// nonnegative eigenvalues.
    fn check_dissipator_positivity(&self) -> Result<()> {
        // Collect distinct jump operators (by matrix identity) among
        // time-independent channels and build the Kossakowski matrix.
        let static_channels: Vec<&Channel> =
            self.channels.iter().filter(|c| c.amplitude.is_none()).collect();
        let mut stored: Vec<Operator> = Vec::new();
        let idx = |op: &Operator, stored: &mut Vec<Operator>| -> usize {
            for (k, o) in stored.iter().enumerate() {
                if o.matrix == op.matrix {
                    return k;
                }
            }
            stored.push(op.clone());
            stored.len() - 1
        };
        let mut kossakowski_entries: Vec<(usize, usize, f64)> = Vec::new();
        for c in &static_channels {
            let i = idx(&c.a, &mut stored);
            let j = idx(&c.b, &mut stored);
            kossakowski_entries.push((i, j, c.rate));
        }
        let n = stored.len();
        if n == 0 {
            return Ok(());
        }
        let mut k_mat = Array2::<C64>::zeros((n, n));
        for (i, j, r) in kossakowski_entries {
            k_mat[(i, j)] += C64::new(r, 0.0);
        }
        // Hermitian check.
        let adj = k_mat.t().mapv(|z| z.conj());
        let herm_dev = k_mat
            .iter()
            .zip(adj.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        if herm_dev > 1e-10 {
            return Err(Error::InvalidModel(
                "channel rate matrix not Hermitian".into(),
            ));
        }
        let herm = (&k_mat + &adj).mapv(|z| z * 0.5);
        let (vals, _) = herm.eigh(UPLO::Lower)?;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::InvalidModel(format!(
                "channel rate matrix has negative eigenvalue {min:.3e} (non-positive dissipator)"
            )));
        }
        Ok(())
    }
}

/// Parameters of the driven two-emitter (dimer) model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimerParams {
    /// Local spontaneous-emission rate γ (the global rate unit).
    pub gamma: f64,
    /// Collective decay rate γ12.
    pub gamma12: f64,
    /// Coherent dipole-dipole coupling J.
    pub j: f64,
    /// Half the qubit-qubit detuning δ.
    pub delta: f64,
    /// Laser-qubit detuning Δ.
    pub big_delta: f64,
    /// Rabi frequency Ω of the coherent drive.
    pub omega: f64,
    /// Incoherent pump rate P per emitter.
    pub pump: f64,
}

impl DimerParams {
    fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(Error::InvalidModel("gamma must be positive".into()));
        }
        if self.gamma12.abs() > self.gamma * (1.0 + 1e-12) {
            return Err(Error::InvalidModel(
                "|gamma12| > gamma gives a non-positive dissipator".into(),
            ));
        }
        if self.pump < 0.0 {
            return Err(Error::InvalidModel("pump rate must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Parameters of a lossy cavity mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityParams {
    /// Emitter-photon coupling g.
    pub g: f64,
    /// Photon leakage rate κ.
    pub kappa: f64,
    /// Laser-cavity (or emitter-cavity) detuning Δ_a.
    pub delta_a: f64,
    /// Fock-space truncation (highest retained photon number).
    pub n_trunc: usize,
}

impl CavityParams {
    fn validate(&self) -> Result<()> {
        if self.kappa <= 0.0 {
            return Err(Error::InvalidModel("kappa must be positive".into()));
        }
        if self.n_trunc < 1 {
            return Err(Error::InvalidTruncation(self.n_trunc));
        }
        Ok(())
    }
}

/// Relative orientation of the transition dipoles and the separation axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DipoleOrientation {
    /// H-aggregate: dipoles perpendicular to the separation axis (μ̂ ⟂ r̂).
    HAggregate,
    /// J-aggregate: dipoles parallel to the separation axis (μ̂ ∥ r̂).
    JAggregate,
    /// General angle ζ between μ̂ and r̂ (radians).
    Angle(f64),
}

impl DipoleOrientation {
    /// cos ζ = μ̂ · r̂.
    pub fn mu_dot_r(&self) -> f64 {
        match self {
            DipoleOrientation::HAggregate => 0.0,
            DipoleOrientation::JAggregate => 1.0,
            DipoleOrientation::Angle(zeta) => zeta.cos(),
        }
    }
}

/// Free-space geometry of an emitter pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeSpaceGeometry {
    /// Inter-emitter distance r12.
    pub r12: f64,
    /// Resonant wavenumber k = 2π/λ0.
    pub k: f64,
    /// Dipole orientation.
    pub orientation: DipoleOrientation,
}

/// Excitonic (dressed-pair) derived parameters of the dimer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcitonicParams {
    /// Mixing angle β = atan2(δ, J) ∈ (−π, π].
    pub beta: f64,
    /// Dipole Rabi frequency R = √(J² + δ²).
    pub r: f64,
    /// Superradiant decay rate γ₊ = γ + γ12 cos β.
    pub gamma_plus: f64,
    /// Subradiant decay rate γ₋ = γ − γ12 cos β.
    pub gamma_minus: f64,
    /// Incoherent |+⟩↔|−⟩ coupling γ_C = γ12 sin β.
    pub gamma_c: f64,
    /// Drive amplitude of |+⟩: Ω₊ = Ω√(1 + cos β).
    pub omega_plus: f64,
    /// Drive amplitude of |−⟩: Ω₋ = Ω√(1 − cos β).
    pub omega_minus: f64,
    /// Signed two-photon Rabi frequency Ω_2p = −2Ω² cos β / R.
    pub omega_2p: f64,
}

/// Parameters of the three-level Λ-type model on {|1⟩, |2⟩, |V⟩}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaParams {
    /// Energy of |1⟩ in the rotating frame.
    pub delta1: f64,
    /// Energy of |2⟩.
    pub delta2: f64,
    /// Energy of |V⟩ (the virtually-populated level), Δ_V.
    pub delta_v: f64,
    /// Coupling Ω of both legs.
    pub omega: f64,
    /// Decay rate Γ of |2⟩ → |1⟩.
    pub big_gamma: f64,
    /// Decay rate Γ_V of |V⟩ → |1⟩.
    pub gamma_v: f64,
}

impl LambdaParams {
    fn validate(&self) -> Result<()> {
        if self.big_gamma <= 0.0 {
            return Err(Error::InvalidModel("Gamma must be positive".into()));
        }
        if self.gamma_v < 0.0 {
            return Err(Error::InvalidModel("Gamma_V must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Parameters of the resonance-fluorescence two-level system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TlsParams {
    /// Qubit-laser detuning Δ_σ.
    pub delta_sigma: f64,
    /// Complex Rabi amplitude Ω̃ (drive term Ω̃σ + Ω̃*σ†).
    pub omega_tilde: C64,
    /// Decay rate γ.
    pub gamma: f64,
}

/// Parameters of the N-emitter Dicke model coupled to a cavity.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeParams {
    /// Emitter count (2 ≤ N ≤ 6).
    pub n: usize,
    /// All-to-all coherent coupling J.
    pub j: f64,
    /// Local decay rate γ.
    pub gamma: f64,
    /// Collective decay rate γ_col.
    pub gamma_col: f64,
    /// Incoherent pump rate P per emitter.
    pub pump: f64,
    /// Cavity parameters; `delta_a` is interpreted as Δ̃_a = ω_a − ω_q.
    pub cavity: CavityParams,
}

impl DickeParams {
    fn validate(&self) -> Result<()> {
        if !(2..=6).contains(&self.n) {
            return Err(Error::InvalidModel(format!(
                "emitter count must lie in 2..=6, got {}", self.n
            )));
        }
        if self.gamma_col.abs() > self.gamma * (1.0 + 1e-12) {
            return Err(Error::InvalidModel(
                "|gamma_col| > gamma gives a non-positive dissipator".into(),
            ));
        }
        self.cavity.validate()
    }
}

/// Free-space coherent and collective couplings (J, γ12) of an emitter pair.
///
/// Evaluates the exact dipole-dipole expressions in ξ = k·r12 and
/// cos ζ = μ̂·r̂:
///
/// γ12 = (3√(γ1γ2)/2) { (1 − cos²ζ) sin ξ/ξ
///                     + (1 − 3cos²ζ)(cos ξ/ξ² − sin ξ/ξ³) },
/// J   = (3√(γ1γ2)/4) { −(1 − cos²ζ) cos ξ/ξ
///                     + (1 − 3cos²ζ)(sin ξ/ξ² + cos ξ/ξ³) }.
pub fn free_space_couplings(
    geometry: FreeSpaceGeometry,
    gamma1: f64,
    gamma2: f64,
) -> Result<(f64, f64)> {
    if geometry.r12 <= 0.0 || geometry.k <= 0.0 {
        return Err(Error::InvalidModel("geometry requires r12 > 0 and k > 0".into()));
    }
    let xi = geometry.k * geometry.r12;
    if xi == 0.0 {
        return Err(Error::SingularDistance);
    }
    let mu_r = geometry.orientation.mu_dot_r();
    let perp = 1.0 - mu_r * mu_r;
    let quad = 1.0 - 3.0 * mu_r * mu_r;
    let root = (gamma1 * gamma2).sqrt();
    let (s, c) = (xi.sin(), xi.cos());
    let gamma12 = 1.5 * root * (perp * s / xi + quad * (c / (xi * xi) - s / (xi * xi * xi)));
    let j = 0.75 * root * (-perp * c / xi + quad * (s / (xi * xi) + c / (xi * xi * xi)));
    Ok((j, gamma12))
}

/// Excitonic derived parameters of the dimer.
///
/// β = atan2(δ, J) ∈ (−π, π]; errors when J = δ = 0 (undefined angle).
pub fn excitonic(j: f64, delta: f64, gamma: f64, gamma12: f64, omega: f64) -> Result<ExcitonicParams> {
    if j == 0.0 && delta == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    let beta = delta.atan2(j);
    let r = j.hypot(delta);
    let cb = beta.cos();
    let sb = beta.sin();
    Ok(ExcitonicParams {
        beta,
        r,
        gamma_plus: gamma + gamma12 * cb,
        gamma_minus: gamma - gamma12 * cb,
        gamma_c: gamma12 * sb,
        omega_plus: omega * (1.0 + cb).max(0.0).sqrt(),
        omega_minus: omega * (1.0 - cb).max(0.0).sqrt(),
        omega_2p: -2.0 * omega * omega * cb / r,
    })
}

/// Purcell rate and cooperativity of an emitter-cavity pair.
///
/// Γ_P(Δ_a) = g²κ/(κ²/4 + Δ_a²), reducing to 4g²/κ on resonance;
/// C = 4g²/(κγ) (resonant convention).
pub fn purcell_cooperativity(g: f64, kappa: f64, gamma: f64, delta_a: f64) -> Result<(f64, f64)> {
    if kappa <= 0.0 || gamma <= 0.0 {
        return Err(Error::InvalidModel("kappa and gamma must be positive".into()));
    }
    let gamma_p = g * g * kappa / (kappa * kappa / 4.0 + delta_a * delta_a);
    let coop = 4.0 * g * g / (kappa * gamma);
    Ok((gamma_p, coop))
}

/// Effective incoherent pump rate from adiabatic elimination of a fast
/// auxiliary level: P = 4Ω²/Γ_fast (valid for Γ_fast ≫ Ω).
pub fn effective_incoherent_pump(omega: f64, gamma_fast: f64) -> Result<f64> {
    if gamma_fast <= 0.0 {
        return Err(Error::InvalidModel("Gamma_fast must be positive".into()));
    }
    Ok(4.0 * omega * omega / gamma_fast)
}

/// Coherent displacement removing a cavity drive in favour of an effective
/// emitter drive: α = −Ω_a/(Δ_a + iκ/2), Ω_eff = gα.
pub fn displace_away_cavity_drive(
    omega_a: f64,
    delta_a: f64,
    kappa: f64,
    g: f64,
) -> (C64, C64) {
    let alpha = -C64::new(omega_a, 0.0) / C64::new(delta_a, kappa / 2.0);
    (alpha, alpha * g)
}

fn qubit_lowering() -> Operator {
    make_ladder(LadderKind::QubitLowering, None).expect("2x2 lowering always valid")
}

/// Build the driven two-emitter model.
///
/// Rotating-frame Hamiltonian
/// H = (Δ+δ)σ1†σ1 + (Δ−δ)σ2†σ2 + J(σ1†σ2 + σ2†σ1) + Ω Σ_i(σ_i + σ_i†),
/// with channels (σ1,σ1,γ), (σ2,σ2,γ), (σ1,σ2,γ12), (σ2,σ1,γ12) and pump
/// channels (σ_i†, σ_i†, P) when P > 0.
pub fn build_driven_dimer(params: DimerParams) -> Result<SystemModel> {
    params.validate()?;
    let space = SpaceDescriptor::qubits(2);
    let s = qubit_lowering();
    let s1 = embed(&s, 0, &space)?;
    let s2 = embed(&s, 1, &space)?;
    let n1 = s1.dagger().dot(&s1)?;
    let n2 = s2.dagger().dot(&s2)?;

    let mut h = Array2::<C64>::zeros((4, 4));
    h += &n1.matrix.mapv(|z| z * (params.big_delta + params.delta));
    h += &n2.matrix.mapv(|z| z * (params.big_delta - params.delta));
    let hop = s1.dagger().dot(&s2)?;
    h += &hop.matrix.mapv(|z| z * params.j);
    h += &hop.matrix.t().mapv(|z| z.conj() * params.j);
    if params.omega != 0.0 {
        let drive = &s1.matrix + &s2.matrix;
        h += &drive.mapv(|z| z * params.omega);
        h += &drive.t().mapv(|z| z.conj() * params.omega);
    }

    let mut channels = vec![
        Channel::simple(s1.clone(), params.gamma),
        Channel::simple(s2.clone(), params.gamma),
        Channel::cross(s1.clone(), s2.clone(), params.gamma12),
        Channel::cross(s2.clone(), s1.clone(), params.gamma12),
    ];
    if params.pump > 0.0 {
        channels.push(Channel::simple(s1.dagger(), params.pump));
        channels.push(Channel::simple(s2.dagger(), params.pump));
    }

    let mut labels = HashMap::new();
    labels.insert("sigma1".into(), s1.clone());
    labels.insert("sigma2".into(), s2.clone());
    labels.insert(
        "S_minus".into(),
        Operator::new(space.clone(), &s1.matrix + &s2.matrix)?,
    );
    SystemModel::new(space.clone(), Operator::new(space, h)?, channels, labels)
}

/// Build the dimer coupled to a lossy cavity mode (Tavis-Cummings coupling).
///
/// Adds Δ_a a†a + g(a†(σ1+σ2) + a(σ1†+σ2†)) to the dimer Hamiltonian and
/// the leakage channel (a, a, κ). Subsystem order: emitter 1, emitter 2,
/// cavity.
pub fn build_dimer_cavity(params: DimerParams, cavity: CavityParams) -> Result<SystemModel> {
    params.validate()?;
    cavity.validate()?;
    let space = SpaceDescriptor::new(vec![2, 2, cavity.n_trunc + 1])?;
    let s = qubit_lowering();
    let s1 = embed(&s, 0, &space)?;
    let s2 = embed(&s, 1, &space)?;
    let a_local = make_ladder(LadderKind::BosonAnnihilation, Some(cavity.n_trunc))?;
    let a = embed(&a_local, 2, &space)?;

    let n1 = s1.dagger().dot(&s1)?;
    let n2 = s2.dagger().dot(&s2)?;
    let na = a.dagger().dot(&a)?;

    let d = space.total_dim();
    let mut h = Array2::<C64>::zeros((d, d));
    h += &n1.matrix.mapv(|z| z * (params.big_delta + params.delta));
    h += &n2.matrix.mapv(|z| z * (params.big_delta - params.delta));
    let hop = s1.dagger().dot(&s2)?;
    h += &hop.matrix.mapv(|z| z * params.j);
    h += &hop.matrix.t().mapv(|z| z.conj() * params.j);
    h += &na.matrix.mapv(|z| z * cavity.delta_a);
    let s_tot = &s1.matrix + &s2.matrix;
    let tc = a.dagger().matrix.dot(&s_tot);
    h += &tc.mapv(|z| z * cavity.g);
    h += &tc.t().mapv(|z| z.conj() * cavity.g);
    if params.omega != 0.0 {
        h += &s_tot.mapv(|z| z * params.omega);
        h += &s_tot.t().mapv(|z| z.conj() * params.omega);
    }

    let mut channels = vec![
        Channel::simple(s1.clone(), params.gamma),
        Channel::simple(s2.clone(), params.gamma),
        Channel::cross(s1.clone(), s2.clone(), params.gamma12),
        Channel::cross(s2.clone(), s1.clone(), params.gamma12),
        Channel::simple(a.clone(), cavity.kappa),
    ];
    if params.pump > 0.0 {
        channels.push(Channel::simple(s1.dagger(), params.pump));
        channels.push(Channel::simple(s2.dagger(), params.pump));
    }

    let mut labels = HashMap::new();
    labels.insert("sigma1".into(), s1.clone());
    labels.insert("sigma2".into(), s2.clone());
    labels.insert("a".into(), a);
    labels.insert("S_minus".into(), Operator::new(space.clone(), s_tot)?);
    SystemModel::new(space.clone(), Operator::new(space, h)?, channels, labels)
}

/// Build the N-emitter Dicke model coupled to a cavity.
///
/// H = J S⁺S⁻ + Δ̃_a a†a + g(a†S⁻ + aS⁺) on the full 2^N ⊗ (n_trunc+1)
/// space, with local decay γ, pairwise collective decay γ_col, local pump
/// channels P, and cavity loss κ.
pub fn build_dicke_cavity(params: DickeParams) -> Result<SystemModel> {
    params.validate()?;
    let n = params.n;
    let mut dims = vec![2usize; n];
    dims.push(params.cavity.n_trunc + 1);
    let space = SpaceDescriptor::new(dims)?;
    let s = qubit_lowering();
    let sigmas: Vec<Operator> = (0..n)
        .map(|i| embed(&s, i, &space))
        .collect::<Result<_>>()?;
    let a_local = make_ladder(LadderKind::BosonAnnihilation, Some(params.cavity.n_trunc))?;
    let a = embed(&a_local, n, &space)?;

    let d = space.total_dim();
    let mut s_minus = Array2::<C64>::zeros((d, d));
    for sig in &sigmas {
        s_minus += &sig.matrix;
    }
    let s_plus = s_minus.t().mapv(|z| z.conj());

    let mut h = s_plus.dot(&s_minus).mapv(|z| z * params.j);
    let na = a.dagger().dot(&a)?;
    h += &na.matrix.mapv(|z| z * params.cavity.delta_a);
    let tc = a.dagger().matrix.dot(&s_minus);
    h += &tc.mapv(|z| z * params.cavity.g);
    h += &tc.t().mapv(|z| z.conj() * params.cavity.g);

    let mut channels = Vec::new();
    for sig in &sigmas {
        channels.push(Channel::simple(sig.clone(), params.gamma));
    }
    for i in 0..n {
        for k in 0..n {
            if i != k {
                channels.push(Channel::cross(
                    sigmas[i].clone(),
                    sigmas[k].clone(),
                    params.gamma_col,
                ));
            }
        }
    }
    if params.pump > 0.0 {
        for sig in &sigmas {
            channels.push(Channel::simple(sig.dagger(), params.pump));
        }
    }
    channels.push(Channel::simple(a.clone(), params.cavity.kappa));

    let mut labels = HashMap::new();
    for (i, sig) in sigmas.iter().enumerate() {
        labels.insert(format!("sigma{}", i + 1), sig.clone());
    }
    labels.insert("a".into(), a);
    labels.insert("S_minus".into(), Operator::new(space.clone(), s_minus)?);
    labels.insert("S_plus".into(), Operator::new(space.clone(), s_plus)?);
    SystemModel::new(space.clone(), Operator::new(space, h)?, channels, labels)
}

/// Build the resonance-fluorescence two-level system.
///
/// H = Δ_σ σ†σ + (Ω̃σ + Ω̃*σ†), channel (σ, σ, γ).
pub fn build_tls(params: TlsParams) -> Result<SystemModel> {
    if params.gamma <= 0.0 {
        return Err(Error::InvalidModel("gamma must be positive".into()));
    }
    let space = SpaceDescriptor::qubit();
    let s = qubit_lowering();
    let mut h = Array2::<C64>::zeros((2, 2));
    h[(1, 1)] = C64::new(params.delta_sigma, 0.0);
    h += &s.matrix.mapv(|z| z * params.omega_tilde);
    h += &s.matrix.t().mapv(|z| z.conj() * params.omega_tilde.conj());
    let channels = vec![Channel::simple(s.clone(), params.gamma)];
    let mut labels = HashMap::new();
    labels.insert("sigma".into(), s);
    SystemModel::new(space.clone(), Operator::new(space, h)?, channels, labels)
}

/// Basis index of |1⟩ in the Λ-system.
pub const LAMBDA_1: usize = 0;
/// Basis index of |2⟩ in the Λ-system.
pub const LAMBDA_2: usize = 1;
/// Basis index of |V⟩ in the Λ-system.
pub const LAMBDA_V: usize = 2;

/// Build the three-level Λ-type model on the ordered basis {|1⟩, |2⟩, |V⟩}.
///
/// H = Δ1|1⟩⟨1| + Δ2|2⟩⟨2| + Δ_V|V⟩⟨V| + Ω(|1⟩⟨V| + |2⟩⟨V| + h.c.),
/// channels (|1⟩⟨2|, Γ) and (|1⟩⟨V|, Γ_V).
pub fn build_lambda(params: LambdaParams) -> Result<SystemModel> {
    params.validate()?;
    let space = SpaceDescriptor::new(vec![3])?;
    let mut h = Array2::<C64>::zeros((3, 3));
    h[(LAMBDA_1, LAMBDA_1)] = C64::new(params.delta1, 0.0);
    h[(LAMBDA_2, LAMBDA_2)] = C64::new(params.delta2, 0.0);
    h[(LAMBDA_V, LAMBDA_V)] = C64::new(params.delta_v, 0.0);
    h[(LAMBDA_1, LAMBDA_V)] = C64::new(params.omega, 0.0);
    h[(LAMBDA_V, LAMBDA_1)] = C64::new(params.omega, 0.0);
    h[(LAMBDA_2, LAMBDA_V)] = C64::new(params.omega, 0.0);
    h[(LAMBDA_V, LAMBDA_2)] = C64::new(params.omega, 0.0);

    let mut s12 = Array2::<C64>::zeros((3, 3));
    s12[(LAMBDA_1, LAMBDA_2)] = ONE;
    let mut s1v = Array2::<C64>::zeros((3, 3));
    s1v[(LAMBDA_1, LAMBDA_V)] = ONE;
    let sigma12 = Operator::new(space.clone(), s12)?;
    let sigma1v = Operator::new(space.clone(), s1v)?;

    let mut channels = vec![Channel::simple(sigma12.clone(), params.big_gamma)];
    if params.gamma_v > 0.0 {
        channels.push(Channel::simple(sigma1v.clone(), params.gamma_v));
    }
    let mut labels = HashMap::new();
    labels.insert("sigma12".into(), sigma12);
    labels.insert("sigma1V".into(), sigma1v);
    SystemModel::new(space.clone(), Operator::new(space, h)?, channels, labels)
}
