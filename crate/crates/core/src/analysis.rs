//! Parameter studies over the downstream network: key-rate grid, tolerable
//! excess noise, comparison with point-to-point links, and the optimal
//! modulation variance.
//!
//! Grid cells are independent; they are evaluated with rayon (or serially)
//! and stored in axis order, distance-major.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::keyrate::{key_rate_from_totals, secret_key_rate};
use crate::protocol::{db_to_transmittance, splitter_transmittance, ChannelTotals};
use crate::rootfind::{bisect, golden_section_max, interior_local_maxima, log_space};
use crate::table::{Field, Metadata, SweepResult, Tabular};
use crate::ProtocolParams;

/// Absolute bisection tolerance on the tolerable excess noise, in SNU.
pub const EPS_TOLERANCE: f64 = 1e-5;
/// Bisection keeps going until `|K(ε*)|` is below this many bits.
pub const EPS_ROOT_RATE_TOLERANCE: f64 = 1e-6;
/// Golden-section tolerance on the modulation variance, in SNU.
pub const VMOD_TOLERANCE: f64 = 1e-4;
pub const VMOD_COARSE_POINTS: usize = 64;
pub const VMOD_FALLBACK_POINTS: usize = 1024;
pub const DEFAULT_VMOD_BRACKET: (f64, f64) = (0.01, 100.0);
pub const DEFAULT_EPS_MAX: f64 = 2.0;

/// Serial or rayon-parallel cell evaluation; results are identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Serial,
    #[default]
    Parallel,
}

fn map_cells<I, O, F>(exec: Exec, inputs: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    match exec {
        Exec::Serial => inputs.iter().map(f).collect(),
        Exec::Parallel => inputs.par_iter().map(f).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub distances_km: Vec<f64>,
    pub onu_counts: Vec<u32>,
    pub base_params: ProtocolParams,
}

impl SweepGrid {
    pub fn new(distances_km: Vec<f64>, onu_counts: Vec<u32>, base_params: ProtocolParams) -> Result<Self> {
        if distances_km.is_empty() || onu_counts.is_empty() {
            return Err(Error::Config("sweep axes must be non-empty".into()));
        }
        if !distances_km.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Config("distances_km must be strictly increasing".into()));
        }
        if !onu_counts.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Config("onu_counts must be strictly increasing".into()));
        }
        if onu_counts[0] < 1 {
            return Err(Error::Config("onu_counts must be >= 1".into()));
        }
        base_params.validate()?;
        Ok(Self {
            distances_km,
            onu_counts,
            base_params,
        })
    }

    /// 0..=30 km in 1 km steps against 2..=64 ONUs.
    pub fn default_axes(base_params: ProtocolParams) -> Self {
        Self {
            distances_km: (0..=30).map(f64::from).collect(),
            onu_counts: (2..=64).collect(),
            base_params,
        }
    }

    /// `(distance, n)` pairs, distance-major.
    pub fn points(&self) -> Vec<(f64, u32)> {
        self.distances_km
            .iter()
            .flat_map(|&d| self.onu_counts.iter().map(move |&n| (d, n)))
            .collect()
    }

    pub fn params_at(&self, distance_km: f64, n_onus: u32) -> ProtocolParams {
        self.base_params.clone().with_distance(distance_km).with_onus(n_onus)
    }
}

fn cell_error(coords: String, e: Error) -> String {
    Error::Cell {
        coords,
        source: Box::new(e),
    }
    .to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateCell {
    pub distance_km: f64,
    pub n_onus: u32,
    pub key_rate_bits: Option<f64>,
    pub key_rate_clamped: Option<f64>,
    pub error: Option<String>,
}

impl Tabular for KeyRateCell {
    fn header() -> Vec<&'static str> {
        vec![
            "distance [km]",
            "n_onus [count]",
            "key_rate [bits/symbol]",
            "key_rate_clamped [bits/symbol]",
            "error",
        ]
    }
    fn row(&self) -> Vec<Field> {
        vec![
            Field::Real(self.distance_km),
            Field::Int(self.n_onus.into()),
            self.key_rate_bits.into(),
            self.key_rate_clamped.into(),
            self.error.clone().map_or(Field::Absent, Field::Text),
        ]
    }
}

/// Raw and clamped key rate at every `(distance, n)` of the grid.
pub fn keyrate_grid(grid: &SweepGrid, exec: Exec) -> SweepResult<KeyRateCell> {
    let cells = map_cells(exec, &grid.points(), |&(d, n)| {
        match secret_key_rate(&grid.params_at(d, n)) {
            Ok(r) => KeyRateCell {
                distance_km: d,
                n_onus: n,
                key_rate_bits: Some(r.key_rate_bits),
                key_rate_clamped: Some(r.key_rate_clamped),
                error: None,
            },
            Err(e) => KeyRateCell {
                distance_km: d,
                n_onus: n,
                key_rate_bits: None,
                key_rate_clamped: None,
                error: Some(cell_error(format!("distance_km={d}, n_onus={n}"), e)),
            },
        }
    });
    SweepResult {
        metadata: Metadata::new("keyrate_grid", &grid.base_params),
        cells,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    /// Largest total excess noise with non-negative key rate, SNU.
    pub eps_star: f64,
    /// Key rate is already non-positive at zero excess noise.
    pub below_threshold: bool,
    pub key_rate_at_root: f64,
    pub iterations: usize,
}

/// Root of `K(ε_tot) = 0` on `[0, eps_max]` by bisection.
///
/// Returns `eps_star = 0` with `below_threshold` when `K(0) <= 0`, and a
/// bracket error when `K(eps_max)` is still positive.
pub fn tolerable_excess_noise(params: &ProtocolParams, eps_max: f64) -> Result<Tolerance> {
    params.validate()?;
    if !(eps_max > 0.0) || !eps_max.is_finite() {
        return Err(Error::domain("eps_max", eps_max, "must be finite and > 0"));
    }
    let rate =
        |eps: f64| -> Result<f64> { Ok(secret_key_rate(&params.clone().with_epsilon_total(eps))?.key_rate_bits) };
    let k0 = rate(0.0)?;
    if k0 <= 0.0 {
        return Ok(Tolerance {
            eps_star: 0.0,
            below_threshold: true,
            key_rate_at_root: k0,
            iterations: 0,
        });
    }
    let kmax = rate(eps_max)?;
    if kmax > 0.0 {
        return Err(Error::BracketTooSmall { eps_max, rate: kmax });
    }
    let root = bisect(rate, 0.0, eps_max, EPS_TOLERANCE, EPS_ROOT_RATE_TOLERANCE, 200)?;
    if !root.converged {
        return Err(Error::Numerical(format!(
            "bisection stalled at eps = {} with K = {}",
            root.x, root.fx
        )));
    }
    Ok(Tolerance {
        eps_star: root.x,
        below_threshold: false,
        key_rate_at_root: root.fx,
        iterations: root.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceCell {
    pub distance_km: f64,
    pub n_onus: u32,
    pub eps_star: Option<f64>,
    pub below_threshold: bool,
    pub key_rate_at_root: Option<f64>,
    pub error: Option<String>,
}

impl Tabular for ToleranceCell {
    fn header() -> Vec<&'static str> {
        vec![
            "distance [km]",
            "n_onus [count]",
            "tolerable_excess_noise [SNU]",
            "below_threshold [flag]",
            "key_rate_at_root [bits/symbol]",
            "error",
        ]
    }
    fn row(&self) -> Vec<Field> {
        vec![
            Field::Real(self.distance_km),
            Field::Int(self.n_onus.into()),
            self.eps_star.into(),
            Field::Flag(self.below_threshold),
            self.key_rate_at_root.into(),
            self.error.clone().map_or(Field::Absent, Field::Text),
        ]
    }
}

pub fn tolerance_grid(grid: &SweepGrid, eps_max: f64, exec: Exec) -> SweepResult<ToleranceCell> {
    let cells = map_cells(exec, &grid.points(), |&(d, n)| {
        match tolerable_excess_noise(&grid.params_at(d, n), eps_max) {
            Ok(t) => ToleranceCell {
                distance_km: d,
                n_onus: n,
                eps_star: Some(t.eps_star),
                below_threshold: t.below_threshold,
                key_rate_at_root: Some(t.key_rate_at_root),
                error: None,
            },
            Err(e) => ToleranceCell {
                distance_km: d,
                n_onus: n,
                eps_star: None,
                below_threshold: false,
                key_rate_at_root: None,
                error: Some(cell_error(format!("distance_km={d}, n_onus={n}"), e)),
            },
        }
    });
    SweepResult {
        metadata: Metadata::new("tolerable_excess_noise", &grid.base_params),
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareCell {
    pub fiber_loss_db: f64,
    pub n_onus: u32,
    pub splitter_loss_db: f64,
    pub key_rate_downstream: Option<f64>,
    pub key_rate_point_to_point: Option<f64>,
    /// `100·K_down/K_ptp`; absent when `K_ptp <= 0`.
    pub ratio_percent: Option<f64>,
    pub error: Option<String>,
}

impl Tabular for CompareCell {
    fn header() -> Vec<&'static str> {
        vec![
            "fiber_loss [dB]",
            "n_onus [count]",
            "splitter_loss [dB]",
            "key_rate_downstream [bits/symbol]",
            "key_rate_point_to_point [bits/symbol]",
            "ratio [%]",
            "error",
        ]
    }
    fn row(&self) -> Vec<Field> {
        vec![
            Field::Real(self.fiber_loss_db),
            Field::Int(self.n_onus.into()),
            Field::Real(self.splitter_loss_db),
            self.key_rate_downstream.into(),
            self.key_rate_point_to_point.into(),
            self.ratio_percent.into(),
            self.error.clone().map_or(Field::Absent, Field::Text),
        ]
    }
}

/// Downstream vs point-to-point key rate at a given fiber loss.
///
/// The fiber loss replaces the distance-derived loss of `base`; the
/// downstream link additionally loses the splitter transmittance (10·log10 n
/// dB for the ideal splitter). Detector, electronic noise, excess noise, V
/// and β come from `base`.
pub fn compare_point_to_point(
    base: &ProtocolParams,
    fiber_loss_db: f64,
    onu_counts: &[u32],
) -> Result<Vec<CompareCell>> {
    base.validate()?;
    if !(fiber_loss_db >= 0.0) || !fiber_loss_db.is_finite() {
        return Err(Error::domain("fiber_loss_db", fiber_loss_db, "must be finite and >= 0"));
    }
    let t_ptp = db_to_transmittance(fiber_loss_db) * base.eta_e;
    let eps = base.epsilon_total();
    let ptp = ChannelTotals::new(t_ptp, eps).and_then(|t| key_rate_from_totals(base, t));
    Ok(onu_counts
        .iter()
        .map(|&n| {
            let coords = format!("fiber_loss_db={fiber_loss_db}, n_onus={n}");
            let split = splitter_transmittance(n, base.splitter_model);
            let down = split.and_then(|s| {
                let totals = ChannelTotals::new(t_ptp * s, eps)?;
                key_rate_from_totals(&base.clone().with_onus(n), totals)
            });
            let splitter_loss_db = splitter_transmittance(n, base.splitter_model)
                .map(|s| -10.0 * s.log10())
                .unwrap_or(f64::NAN);
            match (ptp.clone(), down) {
                (Ok(p), Ok(d)) => {
                    let kp = p.key_rate_bits;
                    let kd = d.key_rate_bits;
                    CompareCell {
                        fiber_loss_db,
                        n_onus: n,
                        splitter_loss_db,
                        key_rate_downstream: Some(kd),
                        key_rate_point_to_point: Some(kp),
                        ratio_percent: (kp > 0.0).then(|| kd / kp * 100.0),
                        error: None,
                    }
                }
                (Err(e), _) | (_, Err(e)) => CompareCell {
                    fiber_loss_db,
                    n_onus: n,
                    splitter_loss_db,
                    key_rate_downstream: None,
                    key_rate_point_to_point: None,
                    ratio_percent: None,
                    error: Some(cell_error(coords, e)),
                },
            }
        })
        .collect())
}

/// [`compare_point_to_point`] over several fiber losses, loss-major.
pub fn compare_sweep(
    base: &ProtocolParams,
    losses_db: &[f64],
    onu_counts: &[u32],
    exec: Exec,
) -> Result<SweepResult<CompareCell>> {
    let per_loss = map_cells(exec, losses_db, |&l| compare_point_to_point(base, l, onu_counts));
    let mut cells = Vec::new();
    for r in per_loss {
        cells.extend(r?);
    }
    Ok(SweepResult {
        metadata: Metadata::new("compare_point_to_point", base),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalVariance {
    pub v_mod: f64,
    pub key_rate_bits: f64,
    /// The coarse scan was not unimodal; the result comes from a dense grid.
    pub fallback: bool,
}

/// Modulation variance maximizing the raw key rate within `bracket`.
///
/// A 64-point log-spaced scan seeds the golden-section bracket and checks
/// that the profile has a single interior peak; otherwise a 1024-point
/// log-spaced grid is used and the result flagged.
pub fn optimal_modulation_variance(params: &ProtocolParams, bracket: (f64, f64)) -> Result<OptimalVariance> {
    params.validate()?;
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) || !hi.is_finite() {
        return Err(Error::Argument(format!(
            "modulation variance bracket [{lo}, {hi}] must satisfy 0 < lo < hi"
        )));
    }
    let rate = |v_mod: f64| -> Result<f64> { Ok(secret_key_rate(&params.clone().with_v_mod(v_mod))?.key_rate_bits) };
    let scan = |n: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let xs = log_space(lo, hi, n);
        let ks = xs.iter().map(|&x| rate(x)).collect::<Result<Vec<_>>>()?;
        Ok((xs, ks))
    };
    let argmax = |ks: &[f64]| {
        ks.iter()
            .enumerate()
            .fold(0, |best, (i, &k)| if k > ks[best] { i } else { best })
    };

    let (xs, ks) = scan(VMOD_COARSE_POINTS)?;
    if interior_local_maxima(&ks).len() > 1 {
        let (xs, ks) = scan(VMOD_FALLBACK_POINTS)?;
        let i = argmax(&ks);
        return Ok(OptimalVariance {
            v_mod: xs[i],
            key_rate_bits: ks[i],
            fallback: true,
        });
    }
    let i = argmax(&ks);
    let a = xs[i.saturating_sub(1)];
    let b = xs[(i + 1).min(xs.len() - 1)];
    let best = golden_section_max(rate, a, b, VMOD_TOLERANCE)?;
    // A peak at the bracket edge can beat the interior golden-section value.
    let (v_mod, key_rate_bits) = if ks[i] > best.fx {
        (xs[i], ks[i])
    } else {
        (best.x, best.fx)
    };
    Ok(OptimalVariance {
        v_mod,
        key_rate_bits,
        fallback: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeCell {
    pub distance_km: f64,
    pub n_onus: u32,
    pub v_mod_opt: Option<f64>,
    pub key_rate_opt: Option<f64>,
    pub fallback: bool,
    pub error: Option<String>,
}

impl Tabular for OptimizeCell {
    fn header() -> Vec<&'static str> {
        vec![
            "distance [km]",
            "n_onus [count]",
            "optimal_v_mod [SNU]",
            "key_rate_at_optimum [bits/symbol]",
            "fallback_grid [flag]",
            "error",
        ]
    }
    fn row(&self) -> Vec<Field> {
        vec![
            Field::Real(self.distance_km),
            Field::Int(self.n_onus.into()),
            self.v_mod_opt.into(),
            self.key_rate_opt.into(),
            Field::Flag(self.fallback),
            self.error.clone().map_or(Field::Absent, Field::Text),
        ]
    }
}

pub fn optimize_grid(grid: &SweepGrid, bracket: (f64, f64), exec: Exec) -> SweepResult<OptimizeCell> {
    let cells = map_cells(exec, &grid.points(), |&(d, n)| {
        match optimal_modulation_variance(&grid.params_at(d, n), bracket) {
            Ok(o) => OptimizeCell {
                distance_km: d,
                n_onus: n,
                v_mod_opt: Some(o.v_mod),
                key_rate_opt: Some(o.key_rate_bits),
                fallback: o.fallback,
                error: None,
            },
            Err(e) => OptimizeCell {
                distance_km: d,
                n_onus: n,
                v_mod_opt: None,
                key_rate_opt: None,
                fallback: false,
                error: Some(cell_error(format!("distance_km={d}, n_onus={n}"), e)),
            },
        }
    });
    SweepResult {
        metadata: Metadata::new("optimal_modulation_variance", &grid.base_params),
        cells,
    }
}
