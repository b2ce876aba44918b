//! Entanglement measures, fidelities, heralded post-selection, and optical
//! witnesses.
//!
//! Conventions:
//! - the concurrence uses the spin-flip construction on a two-qubit state,
//!   with eigenvalues of ρ(σ_y⊗σ_y)ρ*(σ_y⊗σ_y) clamped at zero below 1e-12
//!   before taking square roots;
//! - the (log-)negativity transposes the first block of the bipartition;
//!   E_N = log2(1 + 2N). The result is partition-symmetric;
//! - witnesses operate on normally-ordered sensor moments; a vanishing
//!   denominator yields an absent value rather than an error.

use ndarray::{ Array1, Array2 };
use ndarray_linalg::{ Eig, Eigh, UPLO };
use num_complex::Complex64 as C64;

use crate::hilbert::{ expectation, Operator, StateMatrix };
use crate::{ Error, Result };

/// Bundle of entanglement measures; absent entries were not requested or are
/// undefined for the given state.
#[derive(Clone, Debug, Default)]
pub struct EntanglementReport {
    /// Two-qubit concurrence C ∈ [0, 1].
    pub concurrence: Option<f64>,
    /// Negativity N ≥ 0.
    pub negativity: Option<f64>,
    /// Logarithmic negativity E_N = log2(1 + 2N) ≥ 0.
    pub log_negativity: Option<f64>,
    /// Fidelity F = ⟨ψ|ρ|ψ⟩ ∈ [0, 1].
    pub fidelity: Option<f64>,
    /// Heralded fidelity F_H of the jump-conditioned state.
    pub heralded_fidelity: Option<f64>,
}

/// Eigenvalues of the spin-flip matrix below this threshold are treated as
/// numerical zeros (tiny negatives arise routinely).
pub const CONCURRENCE_EIG_FLOOR: f64 = 1e-12;

/// Two-qubit concurrence C = max(0, √λ1 − √λ2 − √λ3 − √λ4), with λ the
/// descending eigenvalues of ρ(σ_y⊗σ_y)ρ*(σ_y⊗σ_y).
pub fn concurrence(rho: &StateMatrix) -> Result<f64> {
    let d = rho.space.total_dim();
    if d != 4 {
        return Err(Error::DimensionMismatch { op_dim: d, expected: 4 });
    }
    // σ_y ⊗ σ_y in the product basis {|00⟩,|01⟩,|10⟩,|11⟩} is the
    // anti-diagonal matrix diag⁻(−1, 1, 1, −1).
    let mut yy = Array2::<C64>::zeros((4, 4));
    yy[[0, 3]] = C64::new(-1.0, 0.0);
    yy[[1, 2]] = C64::new(1.0, 0.0);
    yy[[2, 1]] = C64::new(1.0, 0.0);
    yy[[3, 0]] = C64::new(-1.0, 0.0);
    let conj = rho.matrix.mapv(|z| z.conj());
    let tilde = yy.dot(&conj).dot(&yy);
    let m = rho.matrix.dot(&tilde);
    let (eigs, _) = m.eig()?;
    let mut lam: Vec<f64> = eigs
        .iter()
        .map(|z| if z.re < CONCURRENCE_EIG_FLOOR { 0.0 } else { z.re })
        .collect();
    lam.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((lam[0].sqrt() - lam[1].sqrt() - lam[2].sqrt() - lam[3].sqrt()).max(0.0))
}

/// Negativity and logarithmic negativity across the bipartition that puts the
/// first `split` sites in the transposed block.
///
/// N = Σ |negative eigenvalues of ρ^{T_A}|, E_N = log2(1 + 2N).
pub fn log_negativity(rho: &StateMatrix, split: usize) -> Result<(f64, f64)> {
    let dims = rho.space.dims();
    if split == 0 || split >= dims.len() {
        return Err(Error::BadKeepSet);
    }
    let da: usize = dims[..split].iter().product();
    let db: usize = dims[split..].iter().product();
    let mut pt = Array2::<C64>::zeros((da * db, da * db));
    for a in 0..da {
        for b in 0..db {
            for ap in 0..da {
                for bp in 0..db {
                    pt[[a * db + b, ap * db + bp]] =
                        rho.matrix[[ap * db + b, a * db + bp]];
                }
            }
        }
    }
    let (eigs, _) = pt.eigh(UPLO::Lower)?;
    let neg: f64 = eigs.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
    Ok((neg, (1.0 + 2.0 * neg).log2()))
}

/// Fidelity to a pure target and, optionally, the fidelity of the state
/// conditioned on one detection event of the herald operator:
/// ρ_c = aρa†/Tr[aρa†].
pub fn fidelity_and_herald(
    rho: &StateMatrix,
    target: &Array1<C64>,
    herald: Option<&Operator>,
) -> Result<(f64, Option<f64>)> {
    let d = rho.space.total_dim();
    if target.len() != d {
        return Err(Error::DimensionMismatch { op_dim: target.len(), expected: d });
    }
    let overlap = |m: &Array2<C64>| -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += target[i].conj() * m[[i, j]] * target[j];
            }
        }
        acc.re
    };
    let f = overlap(&rho.matrix);
    let fh = match herald {
        None => None,
        Some(a) => {
            if a.space.total_dim() != d {
                return Err(Error::DimensionMismatch {
                    op_dim: a.space.total_dim(),
                    expected: d,
                });
            }
            let conditioned = a.matrix.dot(&rho.matrix).dot(&a.matrix.t().mapv(|z| z.conj()));
            let norm: C64 = (0..d).map(|i| conditioned[[i, i]]).sum();
            if norm.re < 1e-14 {
                return Err(Error::HeraldImpossible);
            }
            Some(overlap(&conditioned) / norm.re)
        }
    };
    Ok((f, fh))
}

/// Normally-ordered sensor moments up to fourth order at two frequencies.
///
/// All entries are steady-state expectation values of the two filtered modes
/// (a1, a2): populations, pair correlations, and the anomalous fourth-order
/// cross moment ⟨a1†² a2²⟩ entering the Bell combination.
#[derive(Clone, Copy, Debug)]
pub struct SensorMoments {
    /// ⟨a1† a1⟩.
    pub n1: f64,
    /// ⟨a2† a2⟩.
    pub n2: f64,
    /// ⟨a1†² a1²⟩.
    pub n1n1: f64,
    /// ⟨a2†² a2²⟩.
    pub n2n2: f64,
    /// ⟨a1† a2† a2 a1⟩.
    pub cross: f64,
    /// ⟨a1†² a2²⟩ (complex; its conjugate is ⟨a2†² a1²⟩).
    pub a1sq_a2sq: C64,
}

impl SensorMoments {
    /// Evaluates the moments on a state given the two mode operators.
    pub fn from_state(rho: &StateMatrix, a1: &Operator, a2: &Operator) -> Result<Self> {
        let a1d = a1.dagger();
        let a2d = a2.dagger();
        let ev = |op: Operator| -> Result<C64> { expectation(rho, &op) };
        let n1 = ev(a1d.dot(a1)?)?.re;
        let n2 = ev(a2d.dot(a2)?)?.re;
        let n1n1 = ev(a1d.dot(&a1d)?.dot(a1)?.dot(a1)?)?.re;
        let n2n2 = ev(a2d.dot(&a2d)?.dot(a2)?.dot(a2)?)?.re;
        let cross = ev(a1d.dot(&a2d)?.dot(a2)?.dot(a1)?)?.re;
        let a1sq_a2sq = ev(a1d.dot(&a1d)?.dot(a2)?.dot(a2)?)?;
        Ok(SensorMoments { n1, n2, n1n1, n2n2, cross, a1sq_a2sq })
    }
}

/// Optical nonclassicality witnesses from two-frequency sensor moments.
///
/// Returns (R, B): the cross-correlation ratio
/// R = g²(ω1,ω2) / [g²(ω1,ω1) g²(ω2,ω2)], classical when R ≤ 1, and the
/// moment combination
/// B = √2 |(⟨a1†²a1²⟩ + ⟨a2†²a2²⟩ − 4⟨a1†a2†a2a1⟩ − ⟨a1†²a2²⟩ − ⟨a2†²a1²⟩)
///       / (⟨a1†²a1²⟩ + ⟨a2†²a2²⟩ + 4⟨a1†a2†a2a1⟩)|, classical when B ≤ 2.
/// An entry is None when its denominator vanishes.
pub fn witnesses(m: &SensorMoments) -> (Option<f64>, Option<f64>) {
    let r = {
        let denom = m.n1n1 * m.n2n2;
        if denom.abs() < 1e-30 || m.n1 < 1e-15 || m.n2 < 1e-15 {
            None
        } else {
            // R = [cross/(n1 n2)] / [(n1n1/n1²)(n2n2/n2²)]
            Some(m.cross * m.n1 * m.n2 / denom)
        }
    };
    let b = {
        let denom = m.n1n1 + m.n2n2 + 4.0 * m.cross;
        if denom.abs() < 1e-30 {
            None
        } else {
            let numer =
                m.n1n1 + m.n2n2 - 4.0 * m.cross - 2.0 * m.a1sq_a2sq.re;
            Some(2f64.sqrt() * (numer / denom).abs())
        }
    };
    (r, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use crate::hilbert::SpaceDescriptor;

    fn pure2(amp: [C64; 4]) -> StateMatrix {
        let psi = Array1::from(amp.to_vec());
        StateMatrix::pure(SpaceDescriptor::qubits(2), &psi).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 { C64::new(re, im) }

    #[test]
    fn bell_state_concurrence_is_one() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho = pure2([c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        assert_abs_diff_eq!(concurrence(&rho).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn product_state_concurrence_is_zero() {
        let rho = pure2([c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_abs_diff_eq!(concurrence(&rho).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn pure_state_concurrence_matches_closed_form() {
        // C(a|00⟩+b|01⟩+c|10⟩+d|11⟩) = 2|ad − bc|.
        let (a, b, cc, d) = (c(0.5, 0.1), c(0.3, -0.2), c(-0.4, 0.3), c(0.2, 0.5));
        let norm = (a.norm_sqr() + b.norm_sqr() + cc.norm_sqr() + d.norm_sqr()).sqrt();
        let amp = [a / norm, b / norm, cc / norm, d / norm];
        let rho = pure2(amp);
        let expected = 2.0 * (amp[0] * amp[3] - amp[1] * amp[2]).norm();
        assert_abs_diff_eq!(concurrence(&rho).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn bell_state_negativity() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho = pure2([c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        let (n, en) = log_negativity(&rho, 1).unwrap();
        assert_abs_diff_eq!(n, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(en, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn separable_state_negativity_is_zero() {
        let rho = pure2([c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let (n, en) = log_negativity(&rho, 1).unwrap();
        assert_abs_diff_eq!(n, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(en, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_entanglement_log_negativity_closed_form() {
        // √(1−p)|00⟩ + √p|11⟩ has E_N = log2(1 + 2√(p(1−p))).
        for &p in &[0.1f64, 0.25, 0.5, 0.9] {
            let rho = pure2([
                c((1.0 - p).sqrt(), 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(p.sqrt(), 0.0),
            ]);
            let (_, en) = log_negativity(&rho, 1).unwrap();
            let expected = (1.0 + 2.0 * (p * (1.0 - p)).sqrt()).log2();
            assert_abs_diff_eq!(en, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn negativity_is_partition_symmetric() {
        let (a, b, cc, d) = (c(0.5, 0.1), c(0.3, -0.2), c(-0.4, 0.3), c(0.2, 0.5));
        let norm = (a.norm_sqr() + b.norm_sqr() + cc.norm_sqr() + d.norm_sqr()).sqrt();
        let rho = pure2([a / norm, b / norm, cc / norm, d / norm]);
        let (n1, _) = log_negativity(&rho, 1).unwrap();
        // Swap the two qubits and transpose the (new) first block.
        let mut swapped = Array2::<C64>::zeros((4, 4));
        let perm = [0usize, 2, 1, 3];
        for i in 0..4 {
            for j in 0..4 {
                swapped[[perm[i], perm[j]]] = rho.matrix[[i, j]];
            }
        }
        let rho_sw = StateMatrix::new(SpaceDescriptor::qubits(2), swapped).unwrap();
        let (n2, _) = log_negativity(&rho_sw, 1).unwrap();
        assert_abs_diff_eq!(n1, n2, epsilon = 1e-10);
    }

    #[test]
    fn ppt_mixture_of_products_has_zero_negativity() {
        // Convex mixtures of product states are PPT, hence E_N = 0.
        let kets: [[C64; 4]; 3] = [
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.6, 0.0), c(0.8, 0.0)],
            [c(0.48, 0.0), c(0.64, 0.0), c(0.36, 0.0), c(0.48, 0.0)],
        ];
        let weights = [0.5, 0.3, 0.2];
        let mut m = Array2::<C64>::zeros((4, 4));
        for (k, w) in kets.iter().zip(weights) {
            for i in 0..4 {
                for j in 0..4 {
                    m[[i, j]] += c(w, 0.0) * k[i] * k[j].conj();
                }
            }
        }
        let rho = StateMatrix::new(SpaceDescriptor::qubits(2), m).unwrap();
        let (n, _) = log_negativity(&rho, 1).unwrap();
        assert!(n < 1e-10, "PPT mixture should have zero negativity, got {n}");
    }

    #[test]
    fn fidelity_of_pure_state_to_itself_is_one() {
        // |W_5⟩: symmetric single-deexcitation state of 5 qubits.
        let n = 5usize;
        let dim = 1 << n;
        let mut psi = Array1::<C64>::zeros(dim);
        let amp = 1.0 / (n as f64).sqrt();
        for k in 0..n {
            // one qubit in |g⟩ (bit 0), the rest excited (bit 1)
            let idx = (dim - 1) ^ (1 << k);
            psi[idx] = c(amp, 0.0);
        }
        let rho = StateMatrix::pure(SpaceDescriptor::qubits(n), &psi).unwrap();
        let (f, fh) = fidelity_and_herald(&rho, &psi, None).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
        assert!(fh.is_none());
    }

    #[test]
    fn herald_on_dark_operator_is_impossible() {
        let rho = pure2([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        // Lowering |00⟩ annihilates it.
        let mut a = Array2::<C64>::zeros((4, 4));
        a[[0, 1]] = c(1.0, 0.0); // |00⟩⟨01|
        let op = Operator::new(SpaceDescriptor::qubits(2), a).unwrap();
        let psi = array![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let err = fidelity_and_herald(&rho, &psi, Some(&op)).unwrap_err();
        assert!(matches!(err, Error::HeraldImpossible));
    }

    #[test]
    fn herald_conditions_the_state() {
        // ρ = (|00⟩⟨00| + |ψ⟩⟨ψ|)/2 with |ψ⟩ = |11⟩; heralding on the
        // first-qubit lowering operator selects the |11⟩ → |01⟩ branch.
        let mut m = Array2::<C64>::zeros((4, 4));
        m[[0, 0]] = c(0.5, 0.0);
        m[[3, 3]] = c(0.5, 0.0);
        let rho = StateMatrix::new(SpaceDescriptor::qubits(2), m).unwrap();
        let mut a = Array2::<C64>::zeros((4, 4));
        a[[1, 3]] = c(1.0, 0.0); // |01⟩⟨11|
        let op = Operator::new(SpaceDescriptor::qubits(2), a).unwrap();
        let psi = array![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let (f, fh) = fidelity_and_herald(&rho, &psi, Some(&op)).unwrap();
        assert_abs_diff_eq!(f, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fh.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coherent_moments_are_classical() {
        // For coherent modes all normally-ordered moments factorize.
        let (n1, n2) = (0.3, 0.7);
        let m = SensorMoments {
            n1,
            n2,
            n1n1: n1 * n1,
            n2n2: n2 * n2,
            cross: n1 * n2,
            a1sq_a2sq: c(n1 * n2, 0.0),
        };
        let (r, b) = witnesses(&m);
        assert_abs_diff_eq!(r.unwrap(), 1.0, epsilon = 1e-12);
        assert!(b.unwrap() <= 2.0 + 1e-12);
    }

    #[test]
    fn independent_thermal_moments_do_not_violate_csi() {
        // Thermal: ⟨a†²a²⟩ = 2n̄²; independent: cross = n̄1 n̄2, ⟨a1†²a2²⟩ = 0.
        let (n1, n2) = (0.4, 0.9);
        let m = SensorMoments {
            n1,
            n2,
            n1n1: 2.0 * n1 * n1,
            n2n2: 2.0 * n2 * n2,
            cross: n1 * n2,
            a1sq_a2sq: c(0.0, 0.0),
        };
        let (r, b) = witnesses(&m);
        assert!(r.unwrap() <= 1.0);
        assert!(b.unwrap() <= 2.0);
    }

    #[test]
    fn witnesses_report_absent_on_zero_denominator() {
        let m = SensorMoments {
            n1: 0.0,
            n2: 0.0,
            n1n1: 0.0,
            n2n2: 0.0,
            cross: 0.0,
            a1sq_a2sq: c(0.0, 0.0),
        };
        let (r, b) = witnesses(&m);
        assert!(r.is_none());
        assert!(b.is_none());
    }
}
