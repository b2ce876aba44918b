//! Tensor-product Hilbert-space bookkeeping and elementary operator/state
//! algebra.
//!
//! All storage is dense complex. A [`SpaceDescriptor`] fixes the ordered list
//! of subsystem dimensions; every [`Operator`] and [`StateMatrix`] carries a
//! copy and operations check compatibility. The subsystem order convention is
//! emitters first (ascending index), then cavity, then sensors.

use ndarray::{ Array1, Array2, linalg::kron };
use ndarray_linalg::{ Eigh, UPLO };
use num_complex::Complex64 as C64;

use crate::{ Error, Result };

/// Ordered list of subsystem dimensions of a tensor-product space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceDescriptor {
    dims: Vec<usize>,
}

impl SpaceDescriptor {
    /// Create a descriptor from subsystem dimensions (each ≥ 2: 2 for qubits,
    /// `n_trunc + 1` for truncated bosonic modes).
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d < 2) {
            return Err(Error::Invalid(
                "space needs at least one subsystem, all dimensions >= 2".into(),
            ));
        }
        Ok(Self { dims })
    }

    /// Single-qubit space.
    pub fn qubit() -> Self { Self { dims: vec![2] } }

    /// Space of `n` qubits.
    pub fn qubits(n: usize) -> Self { Self { dims: vec![2; n] } }

    /// Subsystem dimensions in fixed order.
    pub fn dims(&self) -> &[usize] { &self.dims }

    /// Number of subsystems.
    pub fn n_sites(&self) -> usize { self.dims.len() }

    /// Total Hilbert-space dimension (product of subsystem dimensions).
    pub fn total_dim(&self) -> usize { self.dims.iter().product() }

    /// Append another space on the right (e.g. attach a sensor mode).
    pub fn extend(&self, other: &SpaceDescriptor) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims }
    }
}

/// Dense operator on a tensor-product space.
#[derive(Clone, Debug)]
pub struct Operator {
    pub space: SpaceDescriptor,
    pub matrix: Array2<C64>,
}

impl Operator {
    /// Wrap a matrix, checking its dimension against the space.
    pub fn new(space: SpaceDescriptor, matrix: Array2<C64>) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { op_dim: matrix.nrows(), expected: d });
        }
        Ok(Self { space, matrix })
    }

    /// Identity on a space.
    pub fn identity(space: SpaceDescriptor) -> Self {
        let d = space.total_dim();
        Self { space, matrix: Array2::eye(d) }
    }

    /// Hermitian adjoint.
    pub fn dagger(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.t().mapv(|z| z.conj()) }
    }

    /// Matrix product `self · other` (same space).
    pub fn dot(&self, other: &Operator) -> Result<Self> {
        check_spaces(&self.space, &other.space)?;
        Ok(Self { space: self.space.clone(), matrix: self.matrix.dot(&other.matrix) })
    }

    /// Hermiticity check to tolerance `tol` in max-norm.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let adj = self.matrix.t().mapv(|z| z.conj());
        self.matrix
            .iter()
            .zip(adj.iter())
            .all(|(a, b)| (a - b).norm() <= tol)
    }
}

/// Density matrix with trace/Hermiticity/positivity invariants.
#[derive(Clone, Debug)]
pub struct StateMatrix {
    pub space: SpaceDescriptor,
    pub matrix: Array2<C64>,
}

/// Hermiticity tolerance for state validation.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Trace tolerance for state validation.
pub const TRACE_TOL: f64 = 1e-9;
/// Positivity floor (absorbs integration round-off).
pub const POSITIVITY_FLOOR: f64 = -1e-8;

impl StateMatrix {
    /// Wrap a matrix as a state, validating Hermiticity (1e-10), unit trace
    /// (1e-9), and positivity (minimum eigenvalue ≥ −1e-8).
    pub fn new(space: SpaceDescriptor, matrix: Array2<C64>) -> Result<Self> {
        let state = Self::new_unchecked(space, matrix)?;
        state.validate()?;
        Ok(state)
    }

    /// Wrap without invariant validation (dimension still checked). Used
    /// internally for intermediate quantities (e.g. unnormalized conditional
    /// states).
    pub fn new_unchecked(space: SpaceDescriptor, matrix: Array2<C64>) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { op_dim: matrix.nrows(), expected: d });
        }
        Ok(Self { space, matrix })
    }

    /// Pure state |ψ⟩⟨ψ| from a normalized state vector.
    pub fn pure(space: SpaceDescriptor, psi: &Array1<C64>) -> Result<Self> {
        let d = space.total_dim();
        if psi.len() != d {
            return Err(Error::DimensionMismatch { op_dim: psi.len(), expected: d });
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = psi[i] * psi[j].conj() / norm2;
            }
        }
        Self::new(space, m)
    }

    /// Basis state |k⟩⟨k| of the full space.
    pub fn basis(space: SpaceDescriptor, k: usize) -> Result<Self> {
        let d = space.total_dim();
        let mut psi = Array1::zeros(d);
        psi[k] = C64::new(1.0, 0.0);
        Self::pure(space, &psi)
    }

    /// Trace.
    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }

    /// Validate the state invariants.
    pub fn validate(&self) -> Result<()> {
        let adj = self.matrix.t().mapv(|z| z.conj());
        let herm_dev = self
            .matrix
            .iter()
            .zip(adj.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        if herm_dev > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "Hermiticity deviation {herm_dev:.2e} > {HERMITICITY_TOL:.0e}"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace = {tr} != 1")));
        }
        let min_eig = min_eigenvalue(&self.matrix)?;
        if min_eig < POSITIVITY_FLOOR {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {min_eig:.2e} < {POSITIVITY_FLOOR:.0e}"
            )));
        }
        Ok(())
    }

    /// Hermitize and renormalize (used after spectral reconstruction, where
    /// round-off accumulates).
    pub fn hermitize_normalize(&self) -> Result<Self> {
        let adj = self.matrix.t().mapv(|z| z.conj());
        let mut m = (&self.matrix + &adj).mapv(|z| z * 0.5);
        let tr = m.diag().sum();
        if tr.norm() < 1e-14 {
            return Err(Error::InvalidState("zero trace, cannot normalize".into()));
        }
        m.mapv_inplace(|z| z / tr);
        Self::new_unchecked(self.space.clone(), m)
    }
}

fn check_spaces(a: &SpaceDescriptor, b: &SpaceDescriptor) -> Result<()> {
    if a != b {
        return Err(Error::SpaceMismatch(a.total_dim(), b.total_dim()));
    }
    Ok(())
}

/// Minimum eigenvalue of a (near-)Hermitian matrix.
pub(crate) fn min_eigenvalue(m: &Array2<C64>) -> Result<f64> {
    let herm = {
        let adj = m.t().mapv(|z| z.conj());
        (m + &adj).mapv(|z| z * 0.5)
    };
    let (vals, _) = herm.eigh(UPLO::Lower)?;
    Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Kind of elementary ladder operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderKind {
    /// 2×2 qubit lowering operator σ = |g⟩⟨e|.
    QubitLowering,
    /// Truncated bosonic annihilation operator with entries √n.
    BosonAnnihilation,
}

/// Build an elementary ladder operator on a single subsystem.
///
/// For `QubitLowering` the result is the 2×2 matrix with ⟨g|σ|e⟩ = 1 (basis
/// order |g⟩, |e⟩); `n_trunc` is ignored. For `BosonAnnihilation`, `n_trunc`
/// must be ≥ 1 and the result is the `(n_trunc+1)`-dimensional truncated
/// annihilation matrix.
pub fn make_ladder(kind: LadderKind, n_trunc: Option<usize>) -> Result<Operator> {
    match kind {
        LadderKind::QubitLowering => {
            let mut m = Array2::zeros((2, 2));
            m[(0, 1)] = C64::new(1.0, 0.0);
            Operator::new(SpaceDescriptor::qubit(), m)
        }
        LadderKind::BosonAnnihilation => {
            let n = n_trunc.unwrap_or(0);
            if n < 1 {
                return Err(Error::InvalidTruncation(n));
            }
            let d = n + 1;
            let mut m = Array2::zeros((d, d));
            for k in 1..d {
                m[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
            }
            Operator::new(SpaceDescriptor::new(vec![d])?, m)
        }
    }
}

/// Embed a single-subsystem operator at `site` of a composite space, with
/// identities on all other factors.
pub fn embed(op: &Operator, site: usize, space: &SpaceDescriptor) -> Result<Operator> {
    let n = space.n_sites();
    if site >= n {
        return Err(Error::SiteOutOfRange { site, n_sites: n });
    }
    let d_site = space.dims()[site];
    if op.matrix.nrows() != d_site {
        return Err(Error::DimensionMismatch { op_dim: op.matrix.nrows(), expected: d_site });
    }
    let mut acc = Array2::eye(1);
    for (k, &d) in space.dims().iter().enumerate() {
        let factor = if k == site { op.matrix.clone() } else { Array2::eye(d) };
        acc = kron(&acc, &factor);
    }
    Operator::new(space.clone(), acc)
}

/// Expectation value Tr[op · state].
pub fn expectation(state: &StateMatrix, op: &Operator) -> Result<C64> {
    check_spaces(&state.space, &op.space)?;
    Ok(op.matrix.dot(&state.matrix).diag().sum())
}

/// Partial trace keeping the given (sorted, deduplicated internally) sites.
pub fn partial_trace(state: &StateMatrix, keep: &[usize]) -> Result<StateMatrix> {
    let dims = state.space.dims().to_vec();
    let n = dims.len();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() || keep.iter().any(|&s| s >= n) {
        return Err(Error::BadKeepSet);
    }
    let traced: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
    let d_keep: usize = keep.iter().map(|&s| dims[s]).product();
    let d_tr: usize = traced.iter().map(|&s| dims[s]).product();

    // Strides of each site index in the flat basis label (row-major over
    // sites in order).
    let mut strides = vec![1usize; n];
    for s in (0..n.saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * dims[s + 1];
    }
    let flat = |sites: &[usize], multi: usize| -> usize {
        // Decompose `multi` over the listed sites (row-major) and flatten
        // into the full-space index contribution.
        let mut rem = multi;
        let mut idx = 0usize;
        for (pos, &s) in sites.iter().enumerate() {
            let block: usize = sites[pos + 1..].iter().map(|&t| dims[t]).product();
            let digit = rem / block;
            rem %= block;
            idx += digit * strides[s];
        }
        idx
    };

    let mut reduced = Array2::<C64>::zeros((d_keep, d_keep));
    for ik in 0..d_keep {
        for jk in 0..d_keep {
            let mut acc = C64::new(0.0, 0.0);
            for it in 0..d_tr {
                let row = flat(&keep, ik) + flat(&traced, it);
                let col = flat(&keep, jk) + flat(&traced, it);
                acc += state.matrix[(row, col)];
            }
            reduced[(ik, jk)] = acc;
        }
    }
    let keep_dims: Vec<usize> = keep.iter().map(|&s| dims[s]).collect();
    StateMatrix::new_unchecked(SpaceDescriptor::new(keep_dims)?, reduced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn qubit_lowering_matrix() {
        let s = make_ladder(LadderKind::QubitLowering, None).unwrap();
        assert_eq!(s.matrix[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(s.matrix[(1, 0)], C64::new(0.0, 0.0));
        assert_eq!(s.matrix[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(s.matrix[(1, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn boson_annihilation_entries() {
        let a = make_ladder(LadderKind::BosonAnnihilation, Some(3)).unwrap();
        assert_eq!(a.matrix.nrows(), 4);
        for k in 1..4 {
            assert_abs_diff_eq!(a.matrix[(k - 1, k)].re, (k as f64).sqrt(), epsilon = 1e-15);
        }
        assert!(make_ladder(LadderKind::BosonAnnihilation, Some(0)).is_err());
        assert!(make_ladder(LadderKind::BosonAnnihilation, None).is_err());
    }

    #[test]
    fn number_operator_from_ladder() {
        let a = make_ladder(LadderKind::BosonAnnihilation, Some(4)).unwrap();
        let n = a.dagger().dot(&a).unwrap();
        for k in 0..5 {
            assert_abs_diff_eq!(n.matrix[(k, k)].re, k as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn embed_matches_kron_order() {
        let space = SpaceDescriptor::qubits(2);
        let s = make_ladder(LadderKind::QubitLowering, None).unwrap();
        let s1 = embed(&s, 0, &space).unwrap();
        let s2 = embed(&s, 1, &space).unwrap();
        // Basis order |gg>, |ge>, |eg>, |ee> (site 0 is the slow index).
        assert_eq!(s1.matrix[(0, 2)], C64::new(1.0, 0.0));
        assert_eq!(s1.matrix[(1, 3)], C64::new(1.0, 0.0));
        assert_eq!(s2.matrix[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(s2.matrix[(2, 3)], C64::new(1.0, 0.0));
    }

    #[test]
    fn state_validation_rejects_bad_trace() {
        let space = SpaceDescriptor::qubit();
        let m = Array2::eye(2); // trace 2
        assert!(StateMatrix::new(space, m).is_err());
    }

    #[test]
    fn partial_trace_of_product_state() {
        let space = SpaceDescriptor::qubits(2);
        // |e>_1 (x) (|g>+|e>)/sqrt2 on site 2
        let inv = 1.0 / 2.0_f64.sqrt();
        let psi = ndarray::array![
            C64::new(0.0, 0.0), C64::new(0.0, 0.0),
            C64::new(inv, 0.0), C64::new(inv, 0.0)
        ];
        let rho = StateMatrix::pure(space, &psi).unwrap();
        let r1 = partial_trace(&rho, &[0]).unwrap();
        assert_abs_diff_eq!(r1.matrix[(1, 1)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r1.matrix[(0, 0)].re, 0.0, epsilon = 1e-12);
        let r2 = partial_trace(&rho, &[1]).unwrap();
        assert_abs_diff_eq!(r2.matrix[(0, 1)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r2.matrix[(0, 0)].re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_bell_state_is_maximally_mixed() {
        let space = SpaceDescriptor::qubits(2);
        let inv = 1.0 / 2.0_f64.sqrt();
        let psi = ndarray::array![
            C64::new(inv, 0.0), C64::new(0.0, 0.0),
            C64::new(0.0, 0.0), C64::new(inv, 0.0)
        ];
        let rho = StateMatrix::pure(space, &psi).unwrap();
        let r = partial_trace(&rho, &[0]).unwrap();
        assert_abs_diff_eq!(r.matrix[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix[(1, 1)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.matrix[(0, 1)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn expectation_number() {
        let space = SpaceDescriptor::new(vec![4]).unwrap();
        let a = make_ladder(LadderKind::BosonAnnihilation, Some(3)).unwrap();
        let n = a.dagger().dot(&a).unwrap();
        let rho = StateMatrix::basis(space, 2).unwrap();
        let v = expectation(&rho, &n).unwrap();
        assert_abs_diff_eq!(v.re, 2.0, epsilon = 1e-14);
    }
}
