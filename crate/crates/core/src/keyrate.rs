//! Reverse-reconciliation key rate against the strengthened eavesdropper.
//!
//! Every mode outside the OLT and the active ONU (the other ONUs, the
//! splitter ports, the fiber and electronic-noise losses) is conceded to
//! Eve, so her entropy is that of everything she purifies: `S(E') =
//! S(A C1 D2)`, and after the ONU's homodyne on `C1`, `S(E'|x_C1) =
//! S(A D2 | x_C1)`. The detector loss mode `D2` is trusted.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{CovarianceMatrix, Quadrature};
use crate::protocol::{collapse_channel, network_covariance_from_totals, ChannelTotals, ProtocolParams};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateReport<T> {
    pub mutual_information_bits: T,
    pub holevo_bits: T,
    /// `β·I − χ`; negative when no key can be extracted.
    pub key_rate_bits: T,
    pub key_rate_clamped: T,
    pub nus_joint: Vec<T>,
    pub nus_conditional: Vec<T>,
    pub totals: ChannelTotals<T>,
}

fn require_mode<T: Real>(gamma: &CovarianceMatrix<T>, label: &str) -> Result<usize> {
    gamma
        .mode_index(label)
        .ok_or_else(|| Error::Argument(format!("covariance matrix has no mode {label}")))
}

/// Alice–ONU mutual information in bits on the x quadrature.
///
/// `I = ½·log2((V_A + 1)/(V_A|C1 + 1))` with `V_A|C1 = V_A − ⟨A C1⟩²/V_C1`;
/// the `+1` terms are the vacuum noise of Alice's heterodyne.
pub fn mutual_information<T: Real>(gamma: &CovarianceMatrix<T>) -> Result<T> {
    mutual_information_on(gamma, Quadrature::X)
}

pub fn mutual_information_on<T: Real>(gamma: &CovarianceMatrix<T>, quadrature: Quadrature) -> Result<T> {
    let a = require_mode(gamma, "A")?;
    let c = require_mode(gamma, "C1")?;
    let q = match quadrature {
        Quadrature::X => 0,
        Quadrature::P => 1,
    };
    let v_a = gamma.entry(2 * a + q, 2 * a + q);
    let v_c = gamma.entry(2 * c + q, 2 * c + q);
    let cov = gamma.entry(2 * a + q, 2 * c + q);
    if !(v_c > T::zero()) {
        return Err(Error::DegenerateMeasurement { variance: v_c.as_f64() });
    }
    let v_cond = v_a - cov * cov / v_c;
    if v_cond < T::lit(-1e-9) {
        return Err(Error::Numerical(format!(
            "conditional variance V_A|C1 = {v_cond} is negative"
        )));
    }
    let one = T::one();
    Ok(((v_a + one) / (v_cond.max(T::zero()) + one)).log2() * T::lit(0.5))
}

/// Holevo bound split into its two entropies and their spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct HolevoTerms<T> {
    pub bits: T,
    pub entropy_joint: T,
    pub entropy_conditional: T,
    pub nus_joint: Vec<T>,
    pub nus_conditional: Vec<T>,
}

/// `χ = S(A C1 D2) − S(A D2 | x_C1)` in bits.
pub fn holevo_bound<T: Real>(gamma: &CovarianceMatrix<T>) -> Result<T> {
    Ok(holevo_terms(gamma, Quadrature::X)?.bits)
}

pub fn holevo_terms<T: Real>(gamma: &CovarianceMatrix<T>, quadrature: Quadrature) -> Result<HolevoTerms<T>> {
    require_mode(gamma, "A")?;
    require_mode(gamma, "D2")?;
    let c = require_mode(gamma, "C1")?;
    let nus_joint = gamma.symplectic_eigenvalues()?;
    let conditional = gamma.homodyne_condition(c, quadrature)?;
    let nus_conditional = conditional.symplectic_eigenvalues()?;
    let entropy = |nus: &[T]| nus.iter().fold(T::zero(), |s, &nu| s + crate::gaussian::entropy_g(nu));
    let entropy_joint = entropy(&nus_joint);
    let entropy_conditional = entropy(&nus_conditional);
    Ok(HolevoTerms {
        bits: entropy_joint - entropy_conditional,
        entropy_joint,
        entropy_conditional,
        nus_joint,
        nus_conditional,
    })
}

/// Key rate for an already built (A, C1, D2) covariance matrix.
pub fn evaluate<T: Real>(
    gamma: &CovarianceMatrix<T>,
    beta: T,
    totals: ChannelTotals<T>,
    quadrature: Quadrature,
) -> Result<KeyRateReport<T>> {
    let info = mutual_information_on(gamma, quadrature)?;
    let holevo = holevo_terms(gamma, quadrature)?;
    let key = beta * info - holevo.bits;
    Ok(KeyRateReport {
        mutual_information_bits: info,
        holevo_bits: holevo.bits,
        key_rate_bits: key,
        key_rate_clamped: key.max(T::zero()),
        nus_joint: holevo.nus_joint,
        nus_conditional: holevo.nus_conditional,
        totals,
    })
}

/// Key rate with the channel given directly, e.g. from parameter estimation.
/// `params` supplies `V`, `β` and `η_d`; its channel fields are ignored.
pub fn key_rate_from_totals<T: Real>(params: &ProtocolParams<T>, totals: ChannelTotals<T>) -> Result<KeyRateReport<T>> {
    params.validate()?;
    let gamma = network_covariance_from_totals(params.v, params.eta_d, &totals)?;
    evaluate(&gamma, params.beta, totals, Quadrature::X)
}

/// Secret key rate in bits per symbol for the given configuration.
pub fn secret_key_rate<T: Real>(params: &ProtocolParams<T>) -> Result<KeyRateReport<T>> {
    let totals = collapse_channel(params)?;
    key_rate_from_totals(params, totals)
}
