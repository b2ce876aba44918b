//! Classical Fisher information (FI) for photon-counting parameter
//! estimation: full counting distributions, the Poissonian surrogate,
//! spectrum-summed FI, and joint two-mode FI.
//!
//! Conventions:
//! - probabilities below [`PROB_FLOOR`] are dropped from FI sums; the dropped
//!   probability mass is reported so near-zero denominators cannot inflate
//!   the result silently;
//! - the zero-count term F0 = [∂_θ p(0)]²/p(0) is reported separately; it
//!   bounds the gap between the full counting FI and the Poissonian value,
//!   |F − F_P| ≤ F0;
//! - parameter derivatives use central differences with default step
//!   1e-6·max(|θ|, 1).

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::hilbert::StateMatrix;
use crate::{ Error, Result };

/// Probabilities below this floor are excluded from FI sums.
pub const PROB_FLOOR: f64 = 1e-14;

/// Default relative step for central-difference parameter derivatives.
pub const DERIVATIVE_STEP_REL: f64 = 1e-6;

/// Fisher-information summary for one parameter.
#[derive(Clone, Debug, Default)]
pub struct FisherResult {
    /// Parameter name (caller-supplied label).
    pub theta: String,
    /// Classical FI of the counting distribution.
    pub f: f64,
    /// Poissonian FI (∂_θ n̄)²/n̄, when computed.
    pub f_p: Option<f64>,
    /// Joint two-mode FI, when computed.
    pub f_joint: Option<f64>,
    /// Marginal FIs (F1, F2) of the two modes, when computed.
    pub f_marginals: Option<(f64, f64)>,
    /// Zero-count term [∂_θ p(0)]²/p(0).
    pub f0: f64,
    /// Total probability mass dropped by the floor, Σ_{p≤floor} p.
    pub dropped_mass: f64,
}

/// Default central-difference step for a parameter value.
pub fn derivative_step(theta: f64) -> f64 {
    DERIVATIVE_STEP_REL * theta.abs().max(1.0)
}

/// Classical FI of a discrete distribution: F = Σ_n [∂p(n)]²/p(n) over
/// outcomes with p(n) > floor. Returns (F, F0, dropped_mass); F0 is the
/// n = 0 term (0 when p(0) is below the floor).
pub fn distribution_fisher(p: &[f64], dp: &[f64]) -> Result<(f64, f64, f64)> {
    if p.is_empty() || p.len() != dp.len() {
        return Err(Error::EmptyDistribution);
    }
    if p.iter().all(|&x| x <= PROB_FLOOR) {
        return Err(Error::EmptyDistribution);
    }
    let mut f = 0.0;
    let mut f0 = 0.0;
    let mut dropped = 0.0;
    for (n, (&pn, &dpn)) in p.iter().zip(dp).enumerate() {
        if pn > PROB_FLOOR {
            let term = dpn * dpn / pn;
            f += term;
            if n == 0 {
                f0 = term;
            }
        } else {
            dropped += pn.max(0.0);
        }
    }
    Ok((f, f0, dropped))
}

/// Photon-counting distribution p(n) of one mode: the diagonal of ρ,
/// marginalized over every other subsystem.
///
/// `site` indexes the counted subsystem in the state's tensor order.
pub fn counting_distribution(rho: &Array2<C64>, dims: &[usize], site: usize) -> Result<Vec<f64>> {
    if site >= dims.len() {
        return Err(Error::SiteOutOfRange { site, n_sites: dims.len() });
    }
    let total: usize = dims.iter().product();
    if rho.nrows() != total {
        return Err(Error::DimensionMismatch { op_dim: rho.nrows(), expected: total });
    }
    let stride: usize = dims[site + 1..].iter().product();
    let d_site = dims[site];
    let mut p = vec![0.0; d_site];
    for idx in 0..total {
        let n = (idx / stride) % d_site;
        p[n] += rho[[idx, idx]].re;
    }
    Ok(p)
}

/// Full-counting FI of one mode of a parametrized state.
///
/// `drho` is the parameter derivative of the density matrix (from
/// `liouville::steady_state_derivative` or a finite difference).
pub fn counting_fisher(
    rho: &StateMatrix,
    drho: &Array2<C64>,
    site: usize,
    theta_name: &str,
) -> Result<FisherResult> {
    let dims = rho.space.dims();
    let p = counting_distribution(&rho.matrix, dims, site)?;
    let dp = counting_distribution(drho, dims, site)?;
    let (f, f0, dropped_mass) = distribution_fisher(&p, &dp)?;
    Ok(FisherResult {
        theta: theta_name.into(),
        f,
        f0,
        dropped_mass,
        ..Default::default()
    })
}

/// Poissonian FI F_P = (∂_θ n̄)²/n̄ with a central-difference derivative.
pub fn poissonian_fisher<F>(nbar: F, theta: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let n0 = nbar(theta);
    if n0 <= 0.0 {
        return Err(Error::NonpositiveMean(n0));
    }
    let h = derivative_step(theta);
    let dn = (nbar(theta + h) - nbar(theta - h)) / (2.0 * h);
    Ok(dn * dn / n0)
}

/// Spectrum-summed FI: F = Σ_ω [∂_θ S(ω,θ)]²/S(ω,θ) over grid points with
/// S > floor (unit detector efficiency; each frequency bin treated as an
/// independent Poissonian counter).
pub fn spectrum_fisher_sum<F>(s: F, omega_grid: &[f64], theta: f64) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let h = derivative_step(theta);
    omega_grid
        .iter()
        .map(|&w| {
            let val = s(w, theta);
            if val <= PROB_FLOOR {
                return 0.0;
            }
            let ds = (s(w, theta + h) - s(w, theta - h)) / (2.0 * h);
            ds * ds / val
        })
        .sum()
}

/// Joint two-mode FI from a joint counting distribution p(n1, n2) and its
/// parameter derivative.
///
/// F_joint sums over the joint outcomes; the marginals come from row and
/// column sums. The Cauchy-Schwarz-type bound F_joint ≥ (F1 + F2)/2 is
/// asserted with 1e-9 slack.
pub fn joint_frequency_fisher(
    p: &Array2<f64>,
    dp: &Array2<f64>,
    theta_name: &str,
) -> Result<FisherResult> {
    if p.is_empty() || p.dim() != dp.dim() {
        return Err(Error::EmptyDistribution);
    }
    let flat_p: Vec<f64> = p.iter().copied().collect();
    let flat_dp: Vec<f64> = dp.iter().copied().collect();
    let (f_joint, f0, dropped_mass) = distribution_fisher(&flat_p, &flat_dp)?;

    let marginal = |axis: usize| -> (Vec<f64>, Vec<f64>) {
        let len = if axis == 0 { p.nrows() } else { p.ncols() };
        let mut mp = vec![0.0; len];
        let mut mdp = vec![0.0; len];
        for i in 0..p.nrows() {
            for j in 0..p.ncols() {
                let k = if axis == 0 { i } else { j };
                mp[k] += p[[i, j]];
                mdp[k] += dp[[i, j]];
            }
        }
        (mp, mdp)
    };
    let (p1, dp1) = marginal(0);
    let (p2, dp2) = marginal(1);
    let (f1, _, _) = distribution_fisher(&p1, &dp1)?;
    let (f2, _, _) = distribution_fisher(&p2, &dp2)?;
    debug_assert!(
        f_joint >= 0.5 * (f1 + f2) - 1e-9,
        "joint FI bound violated: {f_joint} < ({f1} + {f2})/2"
    );
    Ok(FisherResult {
        theta: theta_name.into(),
        f: f_joint,
        f_joint: Some(f_joint),
        f_marginals: Some((f1, f2)),
        f0,
        dropped_mass,
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{ assert_abs_diff_eq, assert_relative_eq };
    use num_complex::Complex64 as C64;
    use crate::hilbert::SpaceDescriptor;
    use crate::liouville::{ assemble, steady_state, steady_state_derivative };
    use crate::models::{ build_tls, TlsParams };

    fn poisson_pmf(nbar: f64, len: usize) -> Vec<f64> {
        let mut p = Vec::with_capacity(len);
        let mut term = (-nbar).exp();
        for n in 0..len {
            p.push(term);
            term *= nbar / (n as f64 + 1.0);
        }
        p
    }

    #[test]
    fn poisson_family_fisher_is_inverse_mean() {
        // F w.r.t. n̄ for a Poisson distribution equals 1/n̄.
        let nbar = 2.5;
        let h = 1e-6;
        let len = 60;
        let p = poisson_pmf(nbar, len);
        let pp = poisson_pmf(nbar + h, len);
        let pm = poisson_pmf(nbar - h, len);
        let dp: Vec<f64> = pp.iter().zip(&pm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let (f, _, _) = distribution_fisher(&p, &dp).unwrap();
        assert_relative_eq!(f, 1.0 / nbar, max_relative = 1e-6);
    }

    #[test]
    fn theta_independent_state_has_zero_fisher() {
        let p = vec![0.5, 0.3, 0.2];
        let dp = vec![0.0, 0.0, 0.0];
        let (f, f0, _) = distribution_fisher(&p, &dp).unwrap();
        assert_abs_diff_eq!(f, 0.0);
        assert_abs_diff_eq!(f0, 0.0);
    }

    #[test]
    fn empty_distribution_rejected() {
        assert!(matches!(
            distribution_fisher(&[], &[]),
            Err(Error::EmptyDistribution)
        ));
        assert!(matches!(
            distribution_fisher(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::EmptyDistribution)
        ));
    }

    #[test]
    fn counting_fisher_matches_finite_difference() {
        // TLS excited-state counting FI w.r.t. the drive amplitude:
        // analytic steady-state derivative vs two-sided difference.
        let build = |omega: f64| -> crate::Result<_> {
            let model = build_tls(TlsParams {
                delta_sigma: 0.4,
                omega_tilde: C64::new(omega, 0.0),
                gamma: 1.0,
            })?;
            assemble(&model)
        };
        let theta = 0.3;
        let l = build(theta).unwrap();
        let rho = steady_state(&l).unwrap();
        let drho = steady_state_derivative(|t| build(t), theta, None).unwrap();
        let fa = counting_fisher(&rho, &drho, 0, "omega").unwrap();

        let h = 1e-5;
        let rp = steady_state(&build(theta + h).unwrap()).unwrap();
        let rm = steady_state(&build(theta - h).unwrap()).unwrap();
        let dnum = (&rp.matrix - &rm.matrix).mapv(|z| z / (2.0 * h));
        let fn_ = counting_fisher(&rho, &dnum, 0, "omega").unwrap();
        assert_relative_eq!(fa.f, fn_.f, max_relative = 1e-6);
        assert!(fa.f > 0.0);
    }

    #[test]
    fn poissonian_fisher_of_linear_mean() {
        let theta = 0.7;
        let f = poissonian_fisher(|t| t, theta).unwrap();
        assert_relative_eq!(f, 1.0 / theta, max_relative = 1e-6);
    }

    #[test]
    fn poissonian_fisher_vanishes_at_extremum() {
        // n̄(θ) even around θ = 0 (resonant TLS vs detuning).
        let f = poissonian_fisher(|t: f64| 1.0 / (1.0 + t * t), 0.0).unwrap();
        assert_abs_diff_eq!(f, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn poissonian_fisher_rejects_nonpositive_mean() {
        assert!(matches!(
            poissonian_fisher(|_| 0.0, 1.0),
            Err(Error::NonpositiveMean(_))
        ));
    }

    #[test]
    fn sedrakyan_bound_holds_for_counting_distributions() {
        // |F − F_P| ≤ F0 on a family p(n|θ) built from a TLS-like mean.
        for &theta in &[0.1f64, 0.4, 1.1, 2.0] {
            let nbar = |t: f64| 4.0 * t * t / (1.0 + 8.0 * t * t) + 0.05;
            let len = 60;
            let h = derivative_step(theta);
            let p = poisson_pmf(nbar(theta), len);
            let pp = poisson_pmf(nbar(theta + h), len);
            let pm = poisson_pmf(nbar(theta - h), len);
            let dp: Vec<f64> =
                pp.iter().zip(&pm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let (f, f0, _) = distribution_fisher(&p, &dp).unwrap();
            let fp = poissonian_fisher(nbar, theta).unwrap();
            assert!(
                (f - fp).abs() <= f0 + 1e-9,
                "bound violated at theta={theta}: |{f} - {fp}| > {f0}"
            );
        }
    }

    #[test]
    fn spectrum_fisher_flat_spectrum_is_zero() {
        let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let f = spectrum_fisher_sum(|_, _| 1.0, &grid, 0.5);
        assert_abs_diff_eq!(f, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn spectrum_fisher_grid_refinement_scales_linearly() {
        // Summed (not integrated) FI doubles with grid density once the
        // peak is resolved: F(2N)/F(N) → 2.
        let s = |w: f64, t: f64| 1.0 / (1.0 + (w - t) * (w - t));
        let grid_n = |n: usize| -> Vec<f64> {
            (0..n).map(|i| -10.0 + 20.0 * i as f64 / (n - 1) as f64).collect()
        };
        let f1 = spectrum_fisher_sum(s, &grid_n(2001), 0.3) / 2001.0;
        let f2 = spectrum_fisher_sum(s, &grid_n(4001), 0.3) / 4001.0;
        assert_relative_eq!(f1, f2, max_relative = 1e-2);
    }

    #[test]
    fn joint_fisher_additivity_for_product_distribution() {
        let nbar1 = 1.2;
        let nbar2 = 0.8;
        let h = 1e-6;
        // θ scales both means: n̄_i(θ) = θ·n̄_i at θ = 1.
        let joint = |theta: f64| -> Array2<f64> {
            let p1 = poisson_pmf(theta * nbar1, 40);
            let p2 = poisson_pmf(theta * nbar2, 40);
            let mut m = Array2::zeros((40, 40));
            for i in 0..40 {
                for j in 0..40 {
                    m[[i, j]] = p1[i] * p2[j];
                }
            }
            m
        };
        let p = joint(1.0);
        let dp = (&joint(1.0 + h) - &joint(1.0 - h)) / (2.0 * h);
        let res = joint_frequency_fisher(&p, &dp, "scale").unwrap();
        let (f1, f2) = res.f_marginals.unwrap();
        assert_relative_eq!(res.f, f1 + f2, max_relative = 1e-6);
    }

    #[test]
    fn joint_fisher_perfect_correlation_no_doubling() {
        // p(n, n) concentrated on the diagonal: knowing one mode determines
        // the other, so F_joint equals the marginal FI (no additivity gain).
        let nbar = 1.5;
        let h = 1e-6;
        let joint = |theta: f64| -> Array2<f64> {
            let p1 = poisson_pmf(theta * nbar, 40);
            let mut m = Array2::zeros((40, 40));
            for i in 0..40 {
                m[[i, i]] = p1[i];
            }
            m
        };
        let p = joint(1.0);
        let dp = (&joint(1.0 + h) - &joint(1.0 - h)) / (2.0 * h);
        let res = joint_frequency_fisher(&p, &dp, "scale").unwrap();
        let (f1, f2) = res.f_marginals.unwrap();
        assert_relative_eq!(res.f, f1, max_relative = 1e-9);
        assert_relative_eq!(f1, f2, max_relative = 1e-12);
    }

    #[test]
    fn fisher_invariant_under_outcome_relabeling() {
        let p = vec![0.1, 0.2, 0.3, 0.4];
        let dp = vec![0.05, -0.02, 0.01, -0.04];
        let (f, _, _) = distribution_fisher(&p, &dp).unwrap();
        let perm = [2usize, 0, 3, 1];
        let p2: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let dp2: Vec<f64> = perm.iter().map(|&i| dp[i]).collect();
        let (f2, _, _) = distribution_fisher(&p2, &dp2).unwrap();
        assert_abs_diff_eq!(f, f2, epsilon = 1e-14);
    }

    #[test]
    fn counting_distribution_marginalizes_correctly() {
        // Two qubits: ρ diagonal (0.1, 0.2, 0.3, 0.4); counting site 1
        // marginalizes site 0.
        let mut m = Array2::<C64>::zeros((4, 4));
        for (i, v) in [0.1, 0.2, 0.3, 0.4].iter().enumerate() {
            m[[i, i]] = C64::new(*v, 0.0);
        }
        let p = counting_distribution(&m, &[2, 2], 1).unwrap();
        assert_abs_diff_eq!(p[0], 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 0.6, epsilon = 1e-14);
    }
}
