//! Prepare-and-measure Monte Carlo: Gaussian-modulated coherent states sent
//! through the collapsed channel and homodyned at the ONU, followed by the
//! parameter-estimation step that recovers `(T_tot, ε_tot)` from the data.
//!
//! Randomness is ChaCha8 in counter mode: sample block `b` draws from stream
//! `b` of the generator keyed by the seed, so blocks can be produced in any
//! order or in parallel with identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::Exec;
use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::keyrate::{key_rate_from_totals, secret_key_rate};
use crate::protocol::{build_network_covariance, collapse_channel};
use crate::table::csv_text;
use crate::ChannelTotals;
use crate::ProtocolParams;

/// Samples per generator stream.
pub const BLOCK_SIZE: usize = 1 << 14;
/// Jackknife groups used for standard errors.
pub const JACKKNIFE_GROUPS: usize = 100;
pub const MIN_ESTIMATION_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McDataset {
    pub seed: u64,
    pub n_samples: usize,
    pub alice_x: Vec<f64>,
    pub alice_p: Vec<f64>,
    pub onu_x: Vec<f64>,
    pub params_used: ProtocolParams,
}

/// Per-sample model: `onu_x = √(η_d·T)·alice_x + z`, `z ~ N(0, 1 + η_d·T·ε)`.
#[derive(Debug, Clone, Copy)]
struct Channel {
    modulation_sd: f64,
    gain: f64,
    noise_sd: f64,
}

impl Channel {
    fn new(params: &ProtocolParams) -> Result<Self> {
        let totals = collapse_channel(params)?;
        let eff = params.eta_d * totals.t_tot;
        Ok(Self {
            modulation_sd: params.v_mod().sqrt(),
            gain: eff.sqrt(),
            noise_sd: (1.0 + eff * totals.epsilon_tot).sqrt(),
        })
    }
}

struct Block {
    alice_x: Vec<f64>,
    alice_p: Vec<f64>,
    onu_x: Vec<f64>,
}

fn generate_block(seed: u64, block: usize, len: usize, ch: Channel) -> Block {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    let mut out = Block {
        alice_x: Vec::with_capacity(len),
        alice_p: Vec::with_capacity(len),
        onu_x: Vec::with_capacity(len),
    };
    for _ in 0..len {
        let ax: f64 = rng.sample::<f64, _>(StandardNormal) * ch.modulation_sd;
        let ap: f64 = rng.sample::<f64, _>(StandardNormal) * ch.modulation_sd;
        let z: f64 = rng.sample::<f64, _>(StandardNormal) * ch.noise_sd;
        out.alice_x.push(ax);
        out.alice_p.push(ap);
        out.onu_x.push(ch.gain * ax + z);
    }
    out
}

fn block_ranges(n_samples: usize) -> Vec<(usize, usize)> {
    (0..n_samples.div_ceil(BLOCK_SIZE))
        .map(|b| (b * BLOCK_SIZE, ((b + 1) * BLOCK_SIZE).min(n_samples)))
        .collect()
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < 2 {
        return Err(Error::Argument(format!("n_samples = {n_samples} must be >= 2")));
    }
    Ok(())
}

/// Draws `n_samples` prepare-and-measure rounds.
pub fn simulate(params: &ProtocolParams, n_samples: usize, seed: u64, exec: Exec) -> Result<McDataset> {
    check_samples(n_samples)?;
    let ch = Channel::new(params)?;
    let ranges = block_ranges(n_samples);
    let gen = |(b, &(start, end)): (usize, &(usize, usize))| generate_block(seed, b, end - start, ch);
    let blocks: Vec<Block> = match exec {
        Exec::Serial => ranges.iter().enumerate().map(gen).collect(),
        Exec::Parallel => ranges.par_iter().enumerate().map(gen).collect(),
    };
    let mut ds = McDataset {
        seed,
        n_samples,
        alice_x: Vec::with_capacity(n_samples),
        alice_p: Vec::with_capacity(n_samples),
        onu_x: Vec::with_capacity(n_samples),
        params_used: params.clone(),
    };
    for b in blocks {
        ds.alice_x.extend(b.alice_x);
        ds.alice_p.extend(b.alice_p);
        ds.onu_x.extend(b.onu_x);
    }
    Ok(ds)
}

impl McDataset {
    /// CSV with columns index, alice_x, alice_p, onu_x.
    pub fn to_csv(&self) -> String {
        csv_text(
            &[
                "index [count]",
                "alice_x [sqrt SNU]",
                "alice_p [sqrt SNU]",
                "onu_x [sqrt SNU]",
            ],
            (0..self.n_samples).map(|i| {
                [
                    i.to_string(),
                    sig12(self.alice_x[i]),
                    sig12(self.alice_p[i]),
                    sig12(self.onu_x[i]),
                ]
            }),
        )
    }

    /// Jackknife group sums of the x-quadrature data.
    fn group_sums(&self) -> Vec<Sums> {
        let ranges = block_ranges(self.n_samples);
        let partials: Vec<Vec<(usize, Sums)>> = ranges
            .iter()
            .map(|&(s, e)| block_partials(s, &self.alice_x[s..e], &self.onu_x[s..e], self.n_samples))
            .collect();
        reduce_groups(partials, self.n_samples)
    }
}

/// Raw moment sums over a set of samples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sums {
    n: f64,
    a: f64,
    o: f64,
    aa: f64,
    oo: f64,
    ao: f64,
}

impl Sums {
    fn push(&mut self, a: f64, o: f64) {
        self.n += 1.0;
        self.a += a;
        self.o += o;
        self.aa += a * a;
        self.oo += o * o;
        self.ao += a * o;
    }

    fn add(self, r: Sums) -> Sums {
        Sums {
            n: self.n + r.n,
            a: self.a + r.a,
            o: self.o + r.o,
            aa: self.aa + r.aa,
            oo: self.oo + r.oo,
            ao: self.ao + r.ao,
        }
    }

    fn sub(self, r: Sums) -> Sums {
        Sums {
            n: self.n - r.n,
            a: self.a - r.a,
            o: self.o - r.o,
            aa: self.aa - r.aa,
            oo: self.oo - r.oo,
            ao: self.ao - r.ao,
        }
    }

    /// Unbiased sample (co)variances: (var a, var o, cov a o).
    fn moments(&self) -> (f64, f64, f64) {
        let n = self.n;
        let var_a = (self.aa - self.a * self.a / n) / (n - 1.0);
        let var_o = (self.oo - self.o * self.o / n) / (n - 1.0);
        let cov = (self.ao - self.a * self.o / n) / (n - 1.0);
        (var_a, var_o, cov)
    }
}

fn groups_for(n_samples: usize) -> usize {
    JACKKNIFE_GROUPS.min(n_samples)
}

fn group_of(index: usize, n_samples: usize) -> usize {
    ((index as u128 * groups_for(n_samples) as u128) / n_samples as u128) as usize
}

/// Per-group partial sums of one block starting at global index `start`.
fn block_partials(start: usize, a: &[f64], o: &[f64], n_samples: usize) -> Vec<(usize, Sums)> {
    let mut out: Vec<(usize, Sums)> = Vec::new();
    for (k, (&ai, &oi)) in a.iter().zip(o).enumerate() {
        let g = group_of(start + k, n_samples);
        match out.last_mut() {
            Some((last, s)) if *last == g => s.push(ai, oi),
            _ => {
                let mut s = Sums::default();
                s.push(ai, oi);
                out.push((g, s));
            }
        }
    }
    out
}

/// Folds block partials into group sums, in block order.
fn reduce_groups(partials: Vec<Vec<(usize, Sums)>>, n_samples: usize) -> Vec<Sums> {
    let mut groups = vec![Sums::default(); groups_for(n_samples)];
    for block in partials {
        for (g, s) in block {
            groups[g] = groups[g].add(s);
        }
    }
    groups
}

/// Group sums produced without materializing the dataset.
fn streamed_group_sums(params: &ProtocolParams, n_samples: usize, seed: u64, exec: Exec) -> Result<Vec<Sums>> {
    check_samples(n_samples)?;
    let ch = Channel::new(params)?;
    let ranges = block_ranges(n_samples);
    let work = |(b, &(s, e)): (usize, &(usize, usize))| {
        let blk = generate_block(seed, b, e - s, ch);
        block_partials(s, &blk.alice_x, &blk.onu_x, n_samples)
    };
    let partials: Vec<_> = match exec {
        Exec::Serial => ranges.iter().enumerate().map(work).collect(),
        Exec::Parallel => ranges.par_iter().enumerate().map(work).collect(),
    };
    Ok(reduce_groups(partials, n_samples))
}

/// Leave-one-group-out jackknife: (full-sample value, standard error).
fn jackknife<F: Fn(&Sums) -> Result<f64>>(groups: &[Sums], stat: F) -> Result<(f64, f64)> {
    let total = groups.iter().fold(Sums::default(), |acc, g| acc.add(*g));
    let full = stat(&total)?;
    let g = groups.len() as f64;
    let loo = groups
        .iter()
        .map(|s| stat(&total.sub(*s)))
        .collect::<Result<Vec<_>>>()?;
    let mean = loo.iter().sum::<f64>() / g;
    let ss = loo.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    Ok((full, ((g - 1.0) / g * ss).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub n_samples: usize,
    pub t_hat: f64,
    pub eps_hat: f64,
    pub t_se: f64,
    pub eps_se: f64,
}

fn estimator(eta_d: f64, v_mod: f64) -> impl Fn(&Sums) -> Result<(f64, f64)> {
    move |s: &Sums| {
        let (_, var_o, cov) = s.moments();
        let t_hat = cov * cov / (eta_d * v_mod * v_mod);
        if !(t_hat > 0.0) || !t_hat.is_finite() {
            return Err(Error::Estimation(format!("T_hat = {t_hat} is not positive")));
        }
        let eps_hat = (var_o - eta_d * t_hat * v_mod - 1.0) / (eta_d * t_hat);
        Ok((t_hat, eps_hat))
    }
}

fn estimate_from_groups(groups: &[Sums], n_samples: usize, eta_d: f64, v_mod: f64) -> Result<McEstimate> {
    if n_samples < MIN_ESTIMATION_SAMPLES {
        return Err(Error::Argument(format!(
            "estimation needs at least {MIN_ESTIMATION_SAMPLES} samples, got {n_samples}"
        )));
    }
    if !(v_mod > 0.0) || !(eta_d > 0.0) {
        return Err(Error::Estimation(format!(
            "need V_mod > 0 and eta_d > 0 (got {v_mod}, {eta_d})"
        )));
    }
    let est = estimator(eta_d, v_mod);
    let (t_hat, t_se) = jackknife(groups, |s| Ok(est(s)?.0))?;
    let (eps_hat, eps_se) = jackknife(groups, |s| Ok(est(s)?.1))?;
    Ok(McEstimate {
        n_samples,
        t_hat,
        eps_hat,
        t_se,
        eps_se,
    })
}

/// Parameter estimation with known detector efficiency and modulation variance:
/// `T̂ = cov(a, o)² / (η_d·V_mod²)`, `ε̂ = (var(o) − η_d·T̂·V_mod − 1)/(η_d·T̂)`.
pub fn estimate(ds: &McDataset, eta_d: f64, v_mod: f64) -> Result<McEstimate> {
    estimate_from_groups(&ds.group_sums(), ds.n_samples, eta_d, v_mod)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Moment checks pass within this many standard errors.
    pub moment_sigmas: f64,
    /// `T̂` and `ε̂` checks pass within this many standard errors.
    pub estimate_sigmas: f64,
    /// Plug-in key rate passes within this many bits of the ground truth.
    pub key_rate_bits: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            moment_sigmas: 5.0,
            estimate_sigmas: 3.0,
            key_rate_bits: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    /// Absent for the key-rate check, which uses an absolute tolerance.
    pub standard_error: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub note: Option<String>,
}

impl Check {
    fn sigma(name: &str, observed: f64, expected: f64, se: f64, sigmas: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            expected,
            standard_error: Some(se),
            tolerance: sigmas,
            passed: se > 0.0 && (observed - expected).abs() <= sigmas * se,
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub n_samples: usize,
    pub params: ProtocolParams,
    pub totals: ChannelTotals,
    pub estimate: McEstimate,
    pub key_rate_truth: f64,
    pub key_rate_plugin: Option<f64>,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Samples the channel and compares against the analytic model.
///
/// Checks, in order: the three x-quadrature moments `⟨x_A²⟩`, `⟨x_C1²⟩`,
/// `⟨x_A x_C1⟩` against the (A, C1, D2) covariance entries; `T̂` and `ε̂`
/// against the configured channel; and the key rate obtained by plugging
/// the estimates into the key-rate formula against the ground-truth rate.
/// Failures are report entries, not errors.
pub fn validate(
    params: &ProtocolParams,
    n_samples: usize,
    seed: u64,
    tol: Tolerances,
    exec: Exec,
) -> Result<ValidationReport> {
    let totals = collapse_channel(params)?;
    let gamma = build_network_covariance(params)?;
    let truth = secret_key_rate(params)?;
    let v_mod = params.v_mod();
    let groups = streamed_group_sums(params, n_samples, seed, exec)?;
    let estimate = estimate_from_groups(&groups, n_samples, params.eta_d, v_mod)?;

    // Prepare-and-measure moments mapped onto the entanglement-based entries.
    let cross_scale = ((params.v + 1.0) / v_mod).sqrt();
    let (m_aa, se_aa) = jackknife(&groups, |s| Ok(s.moments().0 + 1.0))?;
    let (m_cc, se_cc) = jackknife(&groups, |s| Ok(s.moments().1))?;
    let (m_ac, se_ac) = jackknife(&groups, |s| Ok(s.moments().2 * cross_scale))?;

    let mut checks = vec![
        Check::sigma("moment_xA_xA", m_aa, gamma.entry(0, 0), se_aa, tol.moment_sigmas),
        Check::sigma("moment_xC1_xC1", m_cc, gamma.entry(2, 2), se_cc, tol.moment_sigmas),
        Check::sigma("moment_xA_xC1", m_ac, gamma.entry(0, 2), se_ac, tol.moment_sigmas),
        Check::sigma(
            "t_hat",
            estimate.t_hat,
            totals.t_tot,
            estimate.t_se,
            tol.estimate_sigmas,
        ),
        Check::sigma(
            "eps_hat",
            estimate.eps_hat,
            totals.epsilon_tot,
            estimate.eps_se,
            tol.estimate_sigmas,
        ),
    ];

    // Negative noise estimates are clipped to 0 before the key-rate plug-in.
    let plug = ChannelTotals::new(estimate.t_hat.min(1.0), estimate.eps_hat.max(0.0))
        .and_then(|t| key_rate_from_totals(params, t));
    let (key_rate_plugin, key_check) = match plug {
        Ok(r) => {
            let k = r.key_rate_bits;
            let passed = (k - truth.key_rate_bits).abs() <= tol.key_rate_bits;
            (
                Some(k),
                Check {
                    name: "key_rate_plugin".into(),
                    observed: k,
                    expected: truth.key_rate_bits,
                    standard_error: None,
                    tolerance: tol.key_rate_bits,
                    passed,
                    note: (estimate.eps_hat < 0.0).then(|| "eps_hat clipped to 0".to_string()),
                },
            )
        }
        Err(e) => (
            None,
            Check {
                name: "key_rate_plugin".into(),
                observed: f64::NAN,
                expected: truth.key_rate_bits,
                standard_error: None,
                tolerance: tol.key_rate_bits,
                passed: false,
                note: Some(e.to_string()),
            },
        ),
    };
    checks.push(key_check);
    let all_passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        seed,
        n_samples,
        params: params.clone(),
        totals,
        estimate,
        key_rate_truth: truth.key_rate_bits,
        key_rate_plugin,
        checks,
        all_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let p = ProtocolParams::default();
        let a = simulate(&p, 40_000, 7, Exec::Parallel).unwrap();
        let b = simulate(&p, 40_000, 7, Exec::Serial).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, 40_000, 8, Exec::Serial).unwrap();
        assert_ne!(a.onu_x, c.onu_x);
    }

    #[test]
    fn prefix_is_stable_across_lengths() {
        let p = ProtocolParams::default();
        let short = simulate(&p, 100, 3, Exec::Serial).unwrap();
        let long = simulate(&p, BLOCK_SIZE + 10, 3, Exec::Serial).unwrap();
        assert_eq!(short.onu_x[..], long.onu_x[..100]);
    }

    #[test]
    fn vacuum_input_gives_shot_noise() {
        let p = ProtocolParams {
            v: 1.0,
            eta_d: 1.0,
            epsilon_segments: vec![0.0],
            ..ProtocolParams::default()
        };
        let ds = simulate(&p, 200_000, 11, Exec::Parallel).unwrap();
        assert!(ds.alice_x.iter().all(|&x| x == 0.0));
        let var = ds.onu_x.iter().map(|x| x * x).sum::<f64>() / ds.n_samples as f64;
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn streamed_and_stored_sums_agree() {
        let p = ProtocolParams::default();
        let n = 3 * BLOCK_SIZE + 123;
        let ds = simulate(&p, n, 5, Exec::Serial).unwrap();
        let streamed = streamed_group_sums(&p, n, 5, Exec::Parallel).unwrap();
        assert_eq!(ds.group_sums(), streamed);
        assert_eq!(streamed.len(), JACKKNIFE_GROUPS);
        let total: f64 = streamed.iter().map(|s| s.n).sum();
        assert_eq!(total, n as f64);
    }

    #[test]
    fn estimation_errors() {
        let p = ProtocolParams::default();
        let ds = simulate(&p, 50, 1, Exec::Serial).unwrap();
        assert!(matches!(estimate(&ds, 0.6, 4.0), Err(Error::Argument(_))));
        let ds = simulate(&p, 500, 1, Exec::Serial).unwrap();
        assert!(matches!(estimate(&ds, 0.6, 0.0), Err(Error::Estimation(_))));
        assert!(simulate(&p, 1, 1, Exec::Serial).is_err());
    }

    #[test]
    fn small_validation_completes() {
        let r = validate(&ProtocolParams::default(), 100, 9, Tolerances::default(), Exec::Serial).unwrap();
        assert_eq!(r.checks.len(), 6);
        for c in &r.checks[..5] {
            let se = c.standard_error.unwrap();
            assert!(se.is_finite() && se > 0.0, "{}: {se}", c.name);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let ds = simulate(&ProtocolParams::default(), 3, 2, Exec::Serial).unwrap();
        let csv = ds.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "index [count],alice_x [sqrt SNU],alice_p [sqrt SNU],onu_x [sqrt SNU]"
        );
        assert!(lines[3].starts_with("2,"));
    }
}
