//! Classical-output stage: Hadamard-test probabilities, binomial shot noise,
//! amplitude-estimation query accounting and reconstruction of prices from an
//! amplitude and a propagated norm.
//!
//! All query counts follow the unit-constant convention: every hidden
//! constant in an `O(·)` bound is set to one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of a single-point readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutPlan {
    /// Flat grid index of the priced node.
    pub q: usize,
    /// Target absolute price accuracy.
    pub eps_v: f64,
    /// Failure probability.
    pub delta: f64,
    /// Reference-state normalisation `𝒩_ς`.
    #[serde(default = "one")]
    pub n_ref: f64,
    /// Joint reference normalisation `𝒩_{ς,ξ}`.
    #[serde(default = "one")]
    pub n_ref_xi: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl ReadoutPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_v > 0.0) {
            return Err(Error::invalid("eps_v must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        for (name, c) in [("n_ref", self.n_ref), ("n_ref_xi", self.n_ref_xi)] {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Hadamard-test success probability `a = (1 + 𝒩_{ς,ξ}𝒩_ς ψ_q)/2`.
pub fn hadamard_prob(psi_q: f64, n_ref: f64, n_ref_xi: f64) -> Result<f64> {
    let x = n_ref * n_ref_xi * psi_q;
    if !(x.abs() <= 1.0) {
        return Err(Error::invalid(format!("|𝒩·ψ_q| = {} exceeds one", x.abs())));
    }
    Ok(0.5 * (1.0 + x))
}

/// Inverse of [`hadamard_prob`]: `ψ_q = (2a − 1)/(𝒩_{ς,ξ}𝒩_ς)`.
pub fn invert_prob(a: f64, n_ref: f64, n_ref_xi: f64) -> f64 {
    (2.0 * a - 1.0) / (n_ref_xi * n_ref)
}

/// Empirical frequency of `shots` Bernoulli(`a`) outcomes, seeded.
pub fn sample_prob(a: f64, shots: u64, seed: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) || shots == 0 {
        return Err(Error::invalid("sampling needs a ∈ [0, 1] and at least one shot"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = Binomial::new(shots, a)
        .map_err(|e| Error::invalid(format!("binomial model: {e}")))?
        .sample(&mut rng);
    Ok(hits as f64 / shots as f64)
}

/// Amplitude-estimation queries `⌈(1/ε) ln(1/δ)⌉`.
pub fn miqae_queries(eps_ae: f64, delta: f64) -> Result<u64> {
    if !(eps_ae > 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("need eps > 0 and delta in (0, 1)"));
    }
    Ok(ceil_tol((1.0 / eps_ae) * (1.0 / delta).ln()))
}

/// Ceiling that ignores round-off just above an integer.
fn ceil_tol(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Simulated amplitude-estimation output: `a` perturbed by a seeded uniform
/// error of magnitude at most `eps_ae`, clipped to `[0, 1]`.
pub fn miqae_estimate(a: f64, eps_ae: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: f64 = rng.random_range(-1.0..=1.0);
    (a + eps_ae * e).clamp(0.0, 1.0)
}

/// `V_q = ψ_q · N_V(0)`, with `ψ` renormalised over the `V` block and
/// `N_V(0)² = N(0)² − ‖augmentation block‖²`.
///
/// `state_dim` is the length of the `V` block and `aug_norm` the (exactly
/// known) norm of the augmentation block.
pub fn point_price(direction: &[f64], q: usize, n0: f64, state_dim: usize, aug_norm: f64) -> Result<f64> {
    if q >= state_dim || state_dim > direction.len() {
        return Err(Error::invalid(format!("index {q} is not in the V block of length {state_dim}")));
    }
    let nv2 = n0 * n0 - aug_norm * aug_norm;
    if nv2 < 0.0 {
        return Err(Error::numerical("propagated norm is smaller than the augmentation block"));
    }
    let vb: f64 = direction[..state_dim].iter().map(|x| x * x).sum::<f64>().sqrt();
    if vb == 0.0 {
        return Ok(0.0);
    }
    Ok(direction[q] / vb * nv2.sqrt())
}

/// Applications of the pricing unitary `⌈N(0)·(1/ε_V)·ln(1/δ)⌉`.
pub fn query_budget(eps_v: f64, n0: f64, delta: f64) -> Result<u64> {
    if !(eps_v > 0.0 && n0 >= 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("need eps_v > 0, N0 ≥ 0 and delta in (0, 1)"));
    }
    Ok(ceil_tol(n0 / eps_v * (1.0 / delta).ln()))
}

/// Price estimated from `shots` Hadamard-test samples of the amplitude
/// `ψ_q = direction[q]`, scaled by the `V`-block norm.
pub fn sampled_price(
    direction: &[f64],
    q: usize,
    n0: f64,
    state_dim: usize,
    aug_norm: f64,
    plan: &ReadoutPlan,
    shots: u64,
) -> Result<f64> {
    plan.validate()?;
    if q >= state_dim || state_dim > direction.len() {
        return Err(Error::invalid(format!("index {q} is not in the V block of length {state_dim}")));
    }
    let nv2 = n0 * n0 - aug_norm * aug_norm;
    if nv2 < 0.0 {
        return Err(Error::numerical("propagated norm is smaller than the augmentation block"));
    }
    let vb: f64 = direction[..state_dim].iter().map(|x| x * x).sum::<f64>().sqrt();
    if vb == 0.0 {
        return Ok(0.0);
    }
    let a = hadamard_prob(direction[q] / vb, plan.n_ref, plan.n_ref_xi)?;
    let a_hat = sample_prob(a, shots, plan.seed)?;
    Ok(invert_prob(a_hat, plan.n_ref, plan.n_ref_xi) * nv2.sqrt())
}

/// Norm recovered from a terminal norm and a postselection probability that
/// carry relative errors `ε_term` and `ε_shot`: `N(0) = N_T √(p/C)`.
///
/// Returns `(estimate, first-order bound ε_term + ½ε_shot)`.
pub fn propagate_norm(nt: f64, eps_term: f64, p_post: f64, eps_shot: f64, c: f64) -> (f64, f64) {
    let est = nt * (1.0 + eps_term) * (p_post * (1.0 + eps_shot) / c).sqrt();
    (est, eps_term.abs() + 0.5 * eps_shot.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_round_trip() {
        assert_eq!(hadamard_prob(0.0, 1.0, 1.0).unwrap(), 0.5);
        assert_eq!(hadamard_prob(1.0, 1.0, 1.0).unwrap(), 1.0);
        for &psi in &[-0.7, 0.123, 0.999] {
            let a = hadamard_prob(psi, 0.8, 0.9).unwrap();
            assert!((invert_prob(a, 0.8, 0.9) - psi).abs() < 1e-15);
        }
        assert!(hadamard_prob(1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn sampling_concentrates_and_is_reproducible() {
        let a = 0.37;
        let shots = 10_000_000;
        let f = sample_prob(a, shots, 3).unwrap();
        assert!((f - a).abs() < 5.0 * (a * (1.0 - a) / shots as f64).sqrt());
        assert_eq!(sample_prob(0.0, 1000, 1).unwrap(), 0.0);
        assert_eq!(sample_prob(1.0, 1000, 1).unwrap(), 1.0);
        assert_eq!(sample_prob(a, 999, 42).unwrap().to_bits(), sample_prob(a, 999, 42).unwrap().to_bits());
    }

    #[test]
    fn query_formulas() {
        assert_eq!(miqae_queries(0.01, (-1.0f64).exp()).unwrap(), 100);
        assert_eq!(miqae_queries(0.1, (-2.0f64).exp()).unwrap(), 20);
        assert_eq!(miqae_queries(0.005, (-1.0f64).exp()).unwrap(), 200);
        assert_eq!(query_budget(1.0, 1.0, (-1.0f64).exp()).unwrap(), 1);
        assert_eq!(query_budget(0.5, 1.0, (-1.0f64).exp()).unwrap(), 2);
        let e = miqae_estimate(0.4, 0.01, 9);
        assert!((e - 0.4).abs() <= 0.01);
    }

    #[test]
    fn point_price_removes_augmentation() {
        assert_eq!(point_price(&[0.0, 1.0, 0.0], 1, 1.0, 3, 0.0).unwrap(), 1.0);
        // w = (3, 4, 12): V block (3, 4), augmentation 12, N0 = 13.
        let d = [3.0 / 13.0, 4.0 / 13.0, 12.0 / 13.0];
        assert!((point_price(&d, 0, 13.0, 2, 12.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(point_price(&d, 2, 13.0, 2, 12.0).is_err());
    }
}
