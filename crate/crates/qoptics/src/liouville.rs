//! Vectorized Liouvillians: assembly, steady states, parameter derivatives,
//! spectral decomposition, and metastability analysis.
//!
//! Vectorization is row-major throughout: `vec ρ` stacks the rows of ρ, and
//! the identity `A ρ B ↔ (A ⊗ Bᵀ) vec ρ` holds. A channel `(A, B, rate)`
//! therefore contributes
//! `(rate/2)·(2 A⊗B̄ − (B†A)⊗I − I⊗(B†A)ᵀ)`,
//! and the coherent part contributes `−i(H⊗I − I⊗Hᵀ)`.

use ndarray::{ Array1, Array2, linalg::kron };
use ndarray_linalg::{ Eig, Factorize, Solve };
use num_complex::Complex64 as C64;

use crate::hilbert::{ SpaceDescriptor, StateMatrix };
use crate::models::SystemModel;
use crate::{ Error, Result, I, ONE };

/// A superoperator on vectorized density matrices (row-major convention).
#[derive(Clone, Debug)]
pub struct Superoperator {
    /// Hilbert-space dimension d; the matrix is d²×d².
    pub dim: usize,
    /// Dense d²×d² matrix acting on `vec ρ`.
    pub matrix: Array2<C64>,
    /// Space descriptor of the underlying Hilbert space.
    pub space: SpaceDescriptor,
}

impl Superoperator {
    /// Apply to a density matrix, returning dρ/dt as a matrix.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let v = vectorize(rho);
        let w = self.matrix.dot(&v);
        unvectorize(&w, self.dim)
    }

    /// Max-row-sum (∞) norm.
    pub fn norm_inf(&self) -> f64 {
        self.matrix
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    }
}

/// Row-major vectorization of a matrix.
pub fn vectorize(m: &Array2<C64>) -> Array1<C64> {
    Array1::from_iter(m.iter().cloned())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &Array1<C64>, d: usize) -> Array2<C64> {
    Array2::from_shape_vec((d, d), v.to_vec()).expect("length d*d by construction")
}

/// Superoperator term for `A ρ B` in the row-major convention: `A ⊗ Bᵀ`.
pub fn sandwich(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    kron(a, &b.t().to_owned())
}

/// Contribution of one channel `(A, B, rate)`:
/// `(rate/2)(2 A⊗B̄ − (B†A)⊗I − I⊗(B†A)ᵀ)`.
pub fn channel_term(a: &Array2<C64>, b: &Array2<C64>, rate: f64) -> Array2<C64> {
    let d = a.nrows();
    let eye = Array2::<C64>::eye(d);
    let b_dag = b.t().mapv(|z| z.conj());
    let bda = b_dag.dot(a);
    let mut term = sandwich(a, &b_dag).mapv(|z| z * 2.0);
    term -= &sandwich(&bda, &eye);
    term -= &sandwich(&eye, &bda);
    term.mapv(|z| z * (rate / 2.0))
}

/// Contribution of a cascaded coupling with constant complex strength `k`,
/// source operator `c` and target operator `x`:
/// `−k*[x†, cρ] − k[ρc†, x]`.
pub fn cascade_term(c: &Array2<C64>, x: &Array2<C64>, k: C64) -> Array2<C64> {
    let d = c.nrows();
    let eye = Array2::<C64>::eye(d);
    let x_dag = x.t().mapv(|z| z.conj());
    let c_dag = c.t().mapv(|z| z.conj());
    // [x†, cρ] → (x†c)⊗I − c⊗(x†)ᵀ ; [ρc†, x] → I⊗(c†x)ᵀ − x⊗(c†)ᵀ.
    let t1 = &sandwich(&x_dag.dot(c), &eye) - &sandwich(c, &x_dag);
    let t2 = &sandwich(&eye, &c_dag.dot(x)) - &sandwich(x, &c_dag);
    t1.mapv(|z| z * (-k.conj())) + t2.mapv(|z| z * (-k))
}

/// Coherent (Hamiltonian) term `−i(H⊗I − I⊗Hᵀ)`.
pub fn hamiltonian_term(h: &Array2<C64>) -> Array2<C64> {
    let d = h.nrows();
    let eye = Array2::<C64>::eye(d);
    (&sandwich(h, &eye) - &sandwich(&eye, h)).mapv(|z| z * (-I))
}

/// Assemble the (time-independent) Liouvillian of a model.
///
/// Errors when any channel or cascade carries a time-dependent amplitude;
/// those models must be propagated with the time-dependent integrator.
pub fn assemble(model: &SystemModel) -> Result<Superoperator> {
    if model.is_time_dependent() {
        return Err(Error::TimeDependentChannels);
    }
    let d = model.space.total_dim();
    let mut l = hamiltonian_term(&model.hamiltonian.matrix);
    for ch in &model.channels {
        if ch.rate != 0.0 {
            l += &channel_term(&ch.a.matrix, &ch.b.matrix, ch.rate);
        }
    }
    for casc in &model.cascades {
        if casc.coupling != 0.0 {
            l += &cascade_term(
                &casc.source.matrix,
                &casc.target.matrix,
                C64::new(casc.coupling, 0.0),
            );
        }
    }
    Ok(Superoperator { dim: d, matrix: l, space: model.space.clone() })
}

/// Relative tolerance defining a "zero" Liouvillian eigenvalue.
pub const ZERO_EIG_REL_TOL: f64 = 1e-10;

/// Dimension threshold below which steady-state uniqueness is verified by a
/// full eigendecomposition (above it, the residual check stands in).
const EIG_CHECK_MAX_DIM: usize = 4096;

/// Steady state of a Liouvillian via the trace-row trick.
///
/// The first row of L is replaced by the trace functional and the system is
/// solved against the unit vector. Uniqueness of the zero eigenvalue is
/// verified spectrally for moderate dimensions; for large systems the
/// fixed-point residual is checked instead.
pub fn steady_state(l: &Superoperator) -> Result<StateMatrix> {
    let d = l.dim;
    let n = d * d;
    let norm = l.norm_inf().max(1.0);

    if n <= EIG_CHECK_MAX_DIM {
        let (vals, _) = l.matrix.eig()?;
        let mut re: Vec<f64> = vals.iter().map(|z| z.re.abs()).collect();
        re.sort_by(f64::total_cmp);
        if re.len() > 1 && re[1] < ZERO_EIG_REL_TOL * norm {
            return Err(Error::DegenerateSteadyState);
        }
    }

    let mut m = l.matrix.clone();
    for j in 0..n {
        m[(0, j)] = C64::new(0.0, 0.0);
    }
    for i in 0..d {
        m[(0, i * d + i)] = ONE;
    }
    let mut rhs = Array1::<C64>::zeros(n);
    rhs[0] = ONE;
    let fac = m.factorize()?;
    let mut sol = fac.solve(&rhs)?;
    // Iterative refinement: weakly coupled subsystems (e.g. sensor modes)
    // carry populations many orders below the solver's one-shot absolute
    // accuracy, and their moments are meaningful.
    for _ in 0..2 {
        let residual = &rhs - &m.dot(&sol);
        let correction = fac.solve(&residual)?;
        sol += &correction;
    }
    let rho = unvectorize(&sol, d);

    // Fixed-point residual check (also guards the large-dimension path
    // against a silently degenerate nullspace).
    let resid = l
        .apply(&rho)
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    if resid > 1e-8 * norm {
        return Err(Error::Linalg(format!(
            "steady-state residual {resid:.2e} exceeds tolerance"
        )));
    }
    StateMatrix::new(l.space.clone(), rho).or_else(|_| {
        // Round-off can leave tiny Hermiticity defects; repair and re-validate.
        let st = StateMatrix::new_unchecked(l.space.clone(), rho_repair(&sol, d))?;
        st.validate()?;
        Ok(st)
    })
}

fn rho_repair(sol: &Array1<C64>, d: usize) -> Array2<C64> {
    let rho = unvectorize(sol, d);
    let adj = rho.t().mapv(|z| z.conj());
    let mut m = (&rho + &adj).mapv(|z| z * 0.5);
    let tr = m.diag().sum();
    m.mapv_inplace(|z| z / tr);
    m
}

/// Derivative of the steady state with respect to a model parameter.
///
/// `build` maps the parameter value to an assembled Liouvillian. The
/// derivative of L is taken by central difference with step
/// `h = 1e-6·max(|θ|, 1)` (overridable) and the sensitivity is obtained from
/// the trace-constrained solve of `L ∂ρ = −(∂L) ρ_ss`.
pub fn steady_state_derivative<F>(build: F, theta: f64, h: Option<f64>) -> Result<Array2<C64>>
where
    F: Fn(f64) -> Result<Superoperator>,
{
    let h = h.unwrap_or(1e-6 * theta.abs().max(1.0));
    let l0 = build(theta)?;
    let rho_ss = steady_state(&l0)?;
    let lp = build(theta + h)?;
    let lm = build(theta - h)?;
    let dl = (&lp.matrix - &lm.matrix).mapv(|z| z / (2.0 * h));

    let d = l0.dim;
    let n = d * d;
    let rhs_full = dl.dot(&vectorize(&rho_ss.matrix)).mapv(|z| -z);
    let mut m = l0.matrix.clone();
    for j in 0..n {
        m[(0, j)] = C64::new(0.0, 0.0);
    }
    for i in 0..d {
        m[(0, i * d + i)] = ONE;
    }
    let mut rhs = rhs_full;
    rhs[0] = C64::new(0.0, 0.0); // derivative is traceless
    let sol = m.solve(&rhs)?;
    Ok(unvectorize(&sol, d))
}

/// Spectral decomposition of a Liouvillian.
///
/// Eigenvalues are sorted by descending real part (ties broken by descending
/// imaginary part). Right eigenmatrices are row-major reshapes of the right
/// eigenvectors; left eigenmatrices come from the inverse of the eigenvector
/// matrix, normalized so that `Tr[Λ_μ^L Λ_ν^R] = δ_μν`, with the stationary
/// pair rescaled so that `Tr[Λ_1^R] = 1` (hence `Λ_1^L ≈ I`).
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<C64>,
    pub right: Vec<Array2<C64>>,
    pub left: Vec<Array2<C64>>,
    pub dim: usize,
    pub space: SpaceDescriptor,
    /// 1-norm condition estimate of the eigenvector matrix (diagnoses
    /// near-defective Liouvillians; large values mean the spectral path is
    /// unreliable).
    pub condition: f64,
}

impl SpectralDecomposition {
    /// Overlap coefficient `c_μ = Tr[Λ_μ^L ρ0]`.
    pub fn coefficient(&self, mu: usize, rho0: &Array2<C64>) -> C64 {
        self.left[mu].dot(rho0).diag().sum()
    }

    /// Reconstruct `ρ(t) = Σ_μ e^{Λ_μ t} Tr[Λ_μ^L ρ0] Λ_μ^R`.
    pub fn evolve(&self, rho0: &StateMatrix, t: f64) -> Result<StateMatrix> {
        let d = self.dim;
        let mut acc = Array2::<C64>::zeros((d, d));
        for mu in 0..self.eigenvalues.len() {
            let c = self.coefficient(mu, &rho0.matrix);
            let phase = (self.eigenvalues[mu] * t).exp();
            acc += &self.right[mu].mapv(|z| z * (c * phase));
        }
        StateMatrix::new_unchecked(self.space.clone(), acc)?.hermitize_normalize()
    }
}

/// Full spectral decomposition of a Liouvillian.
pub fn spectral_decomposition(l: &Superoperator) -> Result<SpectralDecomposition> {
    let d = l.dim;
    let n = d * d;
    let (vals, vecs) = l.matrix.eig()?;

    // Sort indices: descending real part, ties by descending imaginary part.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        vals[b]
            .re
            .total_cmp(&vals[a].re)
            .then(vals[b].im.total_cmp(&vals[a].im))
    });

    // Permuted eigenvector matrix and its inverse (rows = left eigenvectors).
    let mut v = Array2::<C64>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        v.column_mut(new).assign(&vecs.column(old));
    }
    let v_inv = invert(&v)?;
    let condition = norm1(&v) * norm1(&v_inv);

    let mut eigenvalues = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    for new in 0..n {
        eigenvalues.push(vals[order[new]]);
        let r = unvectorize(&v.column(new).to_owned(), d);
        // Left eigenmatrix chosen so Tr[L R] equals the vector inner product:
        // (Λ^L)_{ij} = w_{j·d+i}, i.e. the transpose of the row-major reshape.
        let w = v_inv.row(new).to_owned();
        let lmat = unvectorize(&w, d).t().to_owned();
        right.push(r);
        left.push(lmat);
    }

    // Rescale the stationary pair so the right eigenmatrix has unit trace.
    let tr = right[0].diag().sum();
    if tr.norm() > 1e-14 {
        let tr_c = tr;
        right[0].mapv_inplace(|z| z / tr_c);
        left[0].mapv_inplace(|z| z * tr_c);
    }

    Ok(SpectralDecomposition {
        eigenvalues, right, left, dim: d, space: l.space.clone(), condition,
    })
}

fn invert(m: &Array2<C64>) -> Result<Array2<C64>> {
    use ndarray_linalg::Inverse;
    Ok(m.inv()?)
}

fn norm1(m: &Array2<C64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// Summary of the low-lying Liouvillian spectrum and its clustering.
#[derive(Clone, Debug)]
pub struct MetastabilityReport {
    /// Spectral gap |Re Λ_2|.
    pub gap: f64,
    /// Cluster index m (m = 1 means no metastable manifold was detected).
    pub cluster_index: usize,
    /// Slowest relaxation timescale τ_2 = 1/|Re Λ_2|.
    pub tau_2: f64,
    /// Timescale of the first mode outside the cluster, τ_{m+1}.
    pub tau_next: f64,
    /// Separation ratio Re Λ_{m+1} / Re Λ_m (≥ threshold when metastable).
    pub separation: f64,
}

/// Default separation-ratio threshold for metastable-cluster detection.
pub const METASTABILITY_RATIO: f64 = 10.0;

/// Detect a metastable cluster and build the metastable state.
///
/// The cluster index m maximizes `Re Λ_{m+1} / Re Λ_m` over
/// `2 ≤ m ≤ min(8, d²−1)`; when the best ratio does not exceed `threshold`
/// (default 10) the report carries m = 1 and the metastable state is the
/// steady state itself. Otherwise
/// `ρ^MM = ρ_ss + Σ_{μ=2..m} Tr[Λ_μ^L ρ0] Λ_μ^R`, Hermitized and
/// renormalized.
pub fn metastability(
    decomp: &SpectralDecomposition,
    rho0: &StateMatrix,
    threshold: Option<f64>,
) -> Result<(MetastabilityReport, StateMatrix)> {
    let threshold = threshold.unwrap_or(METASTABILITY_RATIO);
    let n = decomp.eigenvalues.len();
    let re = |mu: usize| decomp.eigenvalues[mu].re.abs();

    let gap = if n > 1 { re(1) } else { 0.0 };
    let m_max = 8.min(n.saturating_sub(1));
    let mut best_m = 1usize;
    let mut best_ratio = 0.0_f64;
    for m in 2..=m_max.max(2).min(n - 1) {
        // Eigenvalues are 0-indexed: Λ_m is entry m−1, Λ_{m+1} entry m.
        let inner = re(m - 1);
        let outer = re(m);
        if inner < 1e-300 {
            continue;
        }
        let ratio = outer / inner;
        if ratio > best_ratio {
            best_ratio = ratio;
            best_m = m;
        }
    }

    let rho_ss = StateMatrix::new_unchecked(decomp.space.clone(), decomp.right[0].clone())?
        .hermitize_normalize()?;

    if best_ratio <= threshold || n < 3 {
        let report = MetastabilityReport {
            gap,
            cluster_index: 1,
            tau_2: if gap > 0.0 { 1.0 / gap } else { f64::INFINITY },
            tau_next: if n > 1 { 1.0 / re(1).max(1e-300) } else { f64::INFINITY },
            separation: best_ratio,
        };
        return Ok((report, rho_ss));
    }

    let mut acc = rho_ss.matrix.clone();
    for mu in 1..best_m {
        let c = decomp.coefficient(mu, &rho0.matrix);
        acc += &decomp.right[mu].mapv(|z| z * c);
    }
    let mm = StateMatrix::new_unchecked(decomp.space.clone(), acc)?.hermitize_normalize()?;

    let report = MetastabilityReport {
        gap,
        cluster_index: best_m,
        tau_2: if gap > 0.0 { 1.0 / gap } else { f64::INFINITY },
        tau_next: 1.0 / re(best_m).max(1e-300),
        separation: best_ratio,
    };
    Ok((report, mm))
}
