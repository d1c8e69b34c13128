//! Entanglement-based model of the downstream access network.
//!
//! The OLT (Alice) holds mode `A` of an EPR pair and sends the other half
//! through fiber, the passive splitter (ODN) and the ONU's own
//! electronic-noise beamsplitter; all of that collapses into one channel
//! with total transmittance `T_tot` and input-referred excess noise
//! `ε_tot`. The ONU's finite detection efficiency is a trusted beamsplitter
//! whose loss port is mode `D2`; the detected mode is `C1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{scaled_identity, sigma_z, CovarianceMatrix};
use crate::scalar::Real;

/// Passive splitter transmittance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitterModel<T> {
    /// Lossless balanced splitter: `1/n` to each ONU.
    #[serde(rename = "ideal_1_over_n")]
    Ideal,
    /// Measured splitter transmittance toward the active ONU.
    Explicit(T),
}

/// Physical and protocol parameters. Variances and noises are in shot-noise
/// units, lengths in km, losses in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams<T> {
    /// EPR variance `V = V_mod + 1`.
    pub v: T,
    pub beta: T,
    pub eta_d: T,
    pub eta_e: T,
    pub alpha_db_per_km: T,
    pub distance_km: T,
    /// 1 means point-to-point (no splitter).
    pub n_onus: u32,
    /// OLT–ODN, ODN and ODN–ONU excess noise, or a single pre-summed value.
    pub epsilon_segments: Vec<T>,
    pub splitter_model: SplitterModel<T>,
}

impl<T: Real> Default for ProtocolParams<T> {
    fn default() -> Self {
        Self {
            v: T::lit(5.0),
            beta: T::lit(0.956),
            eta_d: T::lit(0.6),
            eta_e: T::lit(0.99),
            alpha_db_per_km: T::lit(0.2),
            distance_km: T::lit(10.0),
            n_onus: 4,
            epsilon_segments: vec![T::lit(0.05)],
            splitter_model: SplitterModel::Ideal,
        }
    }
}

impl<T: Real> ProtocolParams<T> {
    /// Modulation variance of the equivalent prepare-and-measure scheme.
    pub fn v_mod(&self) -> T {
        self.v - T::one()
    }

    pub fn with_v_mod(mut self, v_mod: T) -> Self {
        self.v = v_mod + T::one();
        self
    }

    pub fn with_distance(mut self, distance_km: T) -> Self {
        self.distance_km = distance_km;
        self
    }

    pub fn with_onus(mut self, n_onus: u32) -> Self {
        self.n_onus = n_onus;
        self
    }

    /// Replaces the segment list by a single total excess noise.
    pub fn with_epsilon_total(mut self, eps: T) -> Self {
        self.epsilon_segments = vec![eps];
        self
    }

    pub fn epsilon_total(&self) -> T {
        self.epsilon_segments.iter().fold(T::zero(), |s, &e| s + e)
    }

    /// Checks every parameter invariant; the message names the violated one.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let (zero, one) = (T::zero(), T::one());
        if !(self.v >= one) {
            return bad(format!("v = {} violates V >= 1", self.v));
        }
        if !(self.beta > zero && self.beta <= one) {
            return bad(format!("beta = {} violates 0 < beta <= 1", self.beta));
        }
        if !(self.eta_d > zero && self.eta_d <= one) {
            return bad(format!("eta_d = {} violates 0 < eta_d <= 1", self.eta_d));
        }
        if !(self.eta_e > zero && self.eta_e <= one) {
            return bad(format!("eta_e = {} violates 0 < eta_e <= 1", self.eta_e));
        }
        if !(self.alpha_db_per_km >= zero) || !self.alpha_db_per_km.is_finite() {
            return bad(format!(
                "alpha_db_per_km = {} violates alpha >= 0",
                self.alpha_db_per_km
            ));
        }
        if !(self.distance_km >= zero) || !self.distance_km.is_finite() {
            return bad(format!("distance_km = {} violates distance >= 0", self.distance_km));
        }
        if self.n_onus < 1 {
            return bad("n_onus = 0 violates n_onus >= 1".into());
        }
        if self.epsilon_segments.is_empty() {
            return bad("epsilon_segments is empty".into());
        }
        if let Some(e) = self.epsilon_segments.iter().find(|e| !(**e >= zero) || !e.is_finite()) {
            return bad(format!("epsilon segment {e} violates epsilon >= 0"));
        }
        if let SplitterModel::Explicit(eta) = self.splitter_model {
            if !(eta > zero && eta <= one) {
                return bad(format!("eta_odn = {eta} violates 0 < eta_odn <= 1"));
            }
        }
        Ok(())
    }
}

/// Collapsed channel: multiplicative transmittance, additive excess noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelTotals<T> {
    pub t_tot: T,
    /// Referred to the channel input.
    pub epsilon_tot: T,
}

impl<T: Real> ChannelTotals<T> {
    pub fn new(t_tot: T, epsilon_tot: T) -> Result<Self> {
        if !(t_tot > T::zero() && t_tot <= T::one()) {
            return Err(Error::domain("T_tot", t_tot.as_f64(), "must lie in (0, 1]"));
        }
        if !(epsilon_tot >= T::zero()) || !epsilon_tot.is_finite() {
            return Err(Error::domain(
                "epsilon_tot",
                epsilon_tot.as_f64(),
                "must be finite and >= 0",
            ));
        }
        Ok(Self { t_tot, epsilon_tot })
    }
}

pub fn splitter_transmittance<T: Real>(n_onus: u32, model: SplitterModel<T>) -> Result<T> {
    if n_onus < 1 {
        return Err(Error::Config("n_onus = 0 violates n_onus >= 1".into()));
    }
    match model {
        SplitterModel::Ideal => Ok(T::one() / T::from_u32(n_onus).expect("u32 fits")),
        SplitterModel::Explicit(eta) if eta > T::zero() && eta <= T::one() => Ok(eta),
        SplitterModel::Explicit(eta) => Err(Error::Config(format!("eta_odn = {eta} violates 0 < eta_odn <= 1"))),
    }
}

/// Power transmittance of `distance_km` of fiber at `alpha` dB/km.
pub fn fiber_transmittance<T: Real>(alpha_db_per_km: T, distance_km: T) -> T {
    db_to_transmittance(alpha_db_per_km * distance_km)
}

pub fn db_to_transmittance<T: Real>(loss_db: T) -> T {
    T::lit(10.0).powf(-loss_db / T::lit(10.0))
}

/// `T_tot = T_fiber · η_ODN · η_e`, `ε_tot = Σ ε_segments`.
pub fn collapse_channel<T: Real>(params: &ProtocolParams<T>) -> Result<ChannelTotals<T>> {
    params.validate()?;
    let t = fiber_transmittance(params.alpha_db_per_km, params.distance_km)
        * splitter_transmittance(params.n_onus, params.splitter_model)?
        * params.eta_e;
    ChannelTotals::new(t, params.epsilon_total())
}

/// Two-mode state (A, B'2) at the ONU input, before detection.
pub fn build_ab_covariance<T: Real>(v: T, totals: &ChannelTotals<T>) -> Result<CovarianceMatrix<T>> {
    if !(v >= T::one()) {
        return Err(Error::domain("EPR variance V", v.as_f64(), "must be >= 1"));
    }
    let ChannelTotals { t_tot, epsilon_tot } = *totals;
    let cross = (t_tot * (v * v - T::one())).sqrt();
    let bob = t_tot * (v - T::one() + epsilon_tot) + T::one();
    let gamma = CovarianceMatrix::from_mode_blocks(&["A", "B'2"], |i, j| match (i, j) {
        (0, 0) => scaled_identity(v),
        (0, 1) => sigma_z(cross),
        _ => scaled_identity(bob),
    })?;
    gamma.ensure_physical()?;
    Ok(gamma)
}

/// Three-mode state (A, C1, D2): the detector beamsplitter applied to B'2.
pub fn network_covariance_from_totals<T: Real>(
    v: T,
    eta_d: T,
    totals: &ChannelTotals<T>,
) -> Result<CovarianceMatrix<T>> {
    let gamma = build_ab_covariance(v, totals)?
        .beamsplitter_transform(1, eta_d, "D2")?
        .relabel(1, "C1")?;
    gamma.ensure_physical()?;
    Ok(gamma)
}

pub fn build_network_covariance<T: Real>(params: &ProtocolParams<T>) -> Result<CovarianceMatrix<T>> {
    let totals = collapse_channel(params)?;
    network_covariance_from_totals(params.v, params.eta_d, &totals)
}

/// The (A, C1, D2) matrix written out entry by entry.
///
/// The A–D2 correlation carries `−√(T(1−η)(V²−1))·σ_z` in both off-diagonal
/// positions, as the beamsplitter algebra and symmetry require.
pub fn network_covariance_closed_form<T: Real>(
    v: T,
    eta_d: T,
    totals: &ChannelTotals<T>,
) -> Result<CovarianceMatrix<T>> {
    let ChannelTotals { t_tot, epsilon_tot } = *totals;
    let one = T::one();
    let w = t_tot * (v - one + epsilon_tot);
    let ac = (t_tot * eta_d * (v * v - one)).sqrt();
    let ad = -(t_tot * (one - eta_d) * (v * v - one)).sqrt();
    let cd = -((one - eta_d) * eta_d).sqrt() * w;
    CovarianceMatrix::from_mode_blocks(&["A", "C1", "D2"], |i, j| match (i, j) {
        (0, 0) => scaled_identity(v),
        (0, 1) => sigma_z(ac),
        (0, 2) => sigma_z(ad),
        (1, 1) => scaled_identity(eta_d * w + one),
        (1, 2) => scaled_identity(cd),
        _ => scaled_identity((one - eta_d) * w + one),
    })
}

/// Same configuration with the splitter removed.
pub fn point_to_point_params<T: Real>(params: &ProtocolParams<T>) -> ProtocolParams<T> {
    ProtocolParams {
        n_onus: 1,
        ..params.clone()
    }
}
