//! Run configuration: a flat INI-style text file.
//!
//! ```text
//! # comment
//! [params]
//! v_mod = 4
//! n_onus = 16
//! epsilon_segments = 0.02, 0.01, 0.02
//! splitter_model = explicit(0.055)
//!
//! [sweep]
//! distances_km = 0:1:30
//! onu_counts = 2, 4, 8, 16, 32, 64
//! ```
//!
//! Lists are comma separated; `start:step:stop` expands to an inclusive
//! arithmetic range. Unknown sections and keys are rejected so typos fail
//! loudly. Every key is optional and falls back to the defaults below.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::analysis::{DEFAULT_EPS_MAX, DEFAULT_VMOD_BRACKET};
use crate::error::{Error, Result};
use crate::protocol::SplitterModel;
use crate::ProtocolParams;

pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub distances_km: Vec<f64>,
    pub onu_counts: Vec<u32>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            distances_km: (0..=30).map(f64::from).collect(),
            onu_counts: (2..=64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceBlock {
    pub distances_km: Vec<f64>,
    pub onu_counts: Vec<u32>,
    pub eps_max: f64,
}

impl Default for ToleranceBlock {
    fn default() -> Self {
        let axes = SweepBlock::default();
        Self {
            distances_km: axes.distances_km,
            onu_counts: axes.onu_counts,
            eps_max: DEFAULT_EPS_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareBlock {
    pub losses_db: Vec<f64>,
    pub onu_counts: Vec<u32>,
}

impl Default for CompareBlock {
    fn default() -> Self {
        Self {
            losses_db: vec![4.0, 8.0, 10.0, 12.0],
            onu_counts: vec![1, 2, 4, 8, 16, 32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeBlock {
    pub distances_km: Vec<f64>,
    pub onu_counts: Vec<u32>,
    pub v_mod_lo: f64,
    pub v_mod_hi: f64,
}

impl Default for OptimizeBlock {
    fn default() -> Self {
        Self {
            distances_km: vec![5.0, 10.0, 20.0, 30.0],
            onu_counts: vec![2, 4, 8, 16, 32, 64],
            v_mod_lo: DEFAULT_VMOD_BRACKET.0,
            v_mod_hi: DEFAULT_VMOD_BRACKET.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McBlock {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for McBlock {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_MC_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

/// Parsed configuration file. Absent sections stay `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub params: ProtocolParams,
    pub sweep: Option<SweepBlock>,
    pub tolerance: Option<ToleranceBlock>,
    pub compare: Option<CompareBlock>,
    pub optimize: Option<OptimizeBlock>,
    pub mc: Option<McBlock>,
}

impl RunConfig {
    /// Defaults for every section, used when no file is given.
    pub fn with_all_defaults() -> Self {
        Self {
            params: ProtocolParams::default(),
            sweep: Some(SweepBlock::default()),
            tolerance: Some(ToleranceBlock::default()),
            compare: Some(CompareBlock::default()),
            optimize: Some(OptimizeBlock::default()),
            mc: Some(McBlock::default()),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let sections = tokenize(text)?;
        let mut cfg = RunConfig::default();
        for mut kv in sections {
            match kv.name.as_str() {
                "params" => cfg.params = parse_params(&mut kv)?,
                "sweep" => {
                    let d = SweepBlock::default();
                    cfg.sweep = Some(SweepBlock {
                        distances_km: kv.take("distances_km", parse_f64_list)?.unwrap_or(d.distances_km),
                        onu_counts: kv.take("onu_counts", parse_u32_list)?.unwrap_or(d.onu_counts),
                    });
                }
                "tolerance" => {
                    let d = ToleranceBlock::default();
                    cfg.tolerance = Some(ToleranceBlock {
                        distances_km: kv.take("distances_km", parse_f64_list)?.unwrap_or(d.distances_km),
                        onu_counts: kv.take("onu_counts", parse_u32_list)?.unwrap_or(d.onu_counts),
                        eps_max: kv.take("eps_max", parse_f64)?.unwrap_or(d.eps_max),
                    });
                }
                "compare" => {
                    let d = CompareBlock::default();
                    cfg.compare = Some(CompareBlock {
                        losses_db: kv.take("losses_db", parse_f64_list)?.unwrap_or(d.losses_db),
                        onu_counts: kv.take("onu_counts", parse_u32_list)?.unwrap_or(d.onu_counts),
                    });
                }
                "optimize" => {
                    let d = OptimizeBlock::default();
                    cfg.optimize = Some(OptimizeBlock {
                        distances_km: kv.take("distances_km", parse_f64_list)?.unwrap_or(d.distances_km),
                        onu_counts: kv.take("onu_counts", parse_u32_list)?.unwrap_or(d.onu_counts),
                        v_mod_lo: kv.take("v_mod_lo", parse_f64)?.unwrap_or(d.v_mod_lo),
                        v_mod_hi: kv.take("v_mod_hi", parse_f64)?.unwrap_or(d.v_mod_hi),
                    });
                }
                "mc" => {
                    let d = McBlock::default();
                    cfg.mc = Some(McBlock {
                        n_samples: kv.take("n_samples", parse_int::<usize>)?.unwrap_or(d.n_samples),
                        seed: kv.take("seed", parse_int::<u64>)?.unwrap_or(d.seed),
                    });
                }
                other => return Err(Error::Config(format!("unknown section [{other}]"))),
            }
            kv.finish()?;
        }
        cfg.params.validate()?;
        Ok(cfg)
    }

    /// Canonical text form. Reals use the shortest representation that
    /// parses back to the same bits, so `parse(to_ini(c)) == c`.
    pub fn to_ini(&self) -> String {
        let mut out = String::from("[params]\n");
        let p = &self.params;
        let _ = writeln!(out, "v = {}", p.v);
        let _ = writeln!(out, "beta = {}", p.beta);
        let _ = writeln!(out, "eta_d = {}", p.eta_d);
        let _ = writeln!(out, "eta_e = {}", p.eta_e);
        let _ = writeln!(out, "alpha_db_per_km = {}", p.alpha_db_per_km);
        let _ = writeln!(out, "distance_km = {}", p.distance_km);
        let _ = writeln!(out, "n_onus = {}", p.n_onus);
        let _ = writeln!(out, "epsilon_segments = {}", join(&p.epsilon_segments));
        let _ = match p.splitter_model {
            SplitterModel::Ideal => writeln!(out, "splitter_model = ideal_1_over_n"),
            SplitterModel::Explicit(eta) => writeln!(out, "splitter_model = explicit({eta})"),
        };
        if let Some(b) = &self.sweep {
            let _ = write!(
                out,
                "\n[sweep]\ndistances_km = {}\nonu_counts = {}\n",
                join(&b.distances_km),
                join(&b.onu_counts)
            );
        }
        if let Some(b) = &self.tolerance {
            let _ = write!(
                out,
                "\n[tolerance]\ndistances_km = {}\nonu_counts = {}\neps_max = {}\n",
                join(&b.distances_km),
                join(&b.onu_counts),
                b.eps_max
            );
        }
        if let Some(b) = &self.compare {
            let _ = write!(
                out,
                "\n[compare]\nlosses_db = {}\nonu_counts = {}\n",
                join(&b.losses_db),
                join(&b.onu_counts)
            );
        }
        if let Some(b) = &self.optimize {
            let _ = write!(
                out,
                "\n[optimize]\ndistances_km = {}\nonu_counts = {}\nv_mod_lo = {}\nv_mod_hi = {}\n",
                join(&b.distances_km),
                join(&b.onu_counts),
                b.v_mod_lo,
                b.v_mod_hi
            );
        }
        if let Some(b) = &self.mc {
            let _ = write!(out, "\n[mc]\nn_samples = {}\nseed = {}\n", b.n_samples, b.seed);
        }
        out
    }
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Keys of one section, consumed as they are read.
struct Section {
    name: String,
    entries: BTreeMap<String, String>,
}

impl Section {
    fn take<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(raw) => parse(&raw)
                .map(Some)
                .map_err(|e| Error::Config(format!("[{}] {key}: {}", self.name, strip(e)))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_keys().next() {
            None => Ok(()),
            Some(key) => Err(Error::Config(format!("unknown key `{key}` in [{}]", self.name))),
        }
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Section>> {
    let opt = ini::ParseOption {
        enabled_escape: false,
        ..Default::default()
    };
    let doc =
        ini::Ini::load_from_str_opt(text, opt).map_err(|e| Error::Config(format!("line {}: {}", e.line, e.msg)))?;
    let mut sections: Vec<Section> = Vec::new();
    for (name, props) in doc.iter() {
        let Some(name) = name else {
            match props.iter().next() {
                None => continue,
                Some((key, _)) => return Err(Error::Config(format!("key `{key}` outside of any section"))),
            }
        };
        if sections.iter().any(|s| s.name == name) {
            return Err(Error::Config(format!("duplicate section [{name}]")));
        }
        let mut entries = BTreeMap::new();
        for (key, value) in props.iter() {
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}` in [{name}]")));
            }
        }
        sections.push(Section {
            name: name.to_string(),
            entries,
        });
    }
    Ok(sections)
}

fn parse_params(kv: &mut Section) -> Result<ProtocolParams> {
    let d = ProtocolParams::default();
    let v = kv.take("v", parse_f64)?;
    let v_mod = kv.take("v_mod", parse_f64)?;
    let v = match (v, v_mod) {
        (Some(_), Some(_)) => return Err(Error::Config("give either v or v_mod, not both".into())),
        (Some(v), None) => v,
        (None, Some(m)) => m + 1.0,
        (None, None) => d.v,
    };
    Ok(ProtocolParams {
        v,
        beta: kv.take("beta", parse_f64)?.unwrap_or(d.beta),
        eta_d: kv.take("eta_d", parse_f64)?.unwrap_or(d.eta_d),
        eta_e: kv.take("eta_e", parse_f64)?.unwrap_or(d.eta_e),
        alpha_db_per_km: kv.take("alpha_db_per_km", parse_f64)?.unwrap_or(d.alpha_db_per_km),
        distance_km: kv.take("distance_km", parse_f64)?.unwrap_or(d.distance_km),
        n_onus: kv.take("n_onus", parse_int::<u32>)?.unwrap_or(d.n_onus),
        epsilon_segments: kv
            .take("epsilon_segments", |s| {
                split_list(s)?.iter().map(|x| parse_f64(x)).collect()
            })?
            .unwrap_or(d.epsilon_segments),
        splitter_model: kv.take("splitter_model", parse_splitter)?.unwrap_or(d.splitter_model),
    })
}

fn parse_splitter(s: &str) -> Result<SplitterModel<f64>> {
    if s == "ideal_1_over_n" {
        return Ok(SplitterModel::Ideal);
    }
    s.strip_prefix("explicit(")
        .and_then(|r| r.strip_suffix(')'))
        .map(|inner| parse_f64(inner.trim()).map(SplitterModel::Explicit))
        .unwrap_or_else(|| {
            Err(Error::Config(format!(
                "`{s}` is not ideal_1_over_n or explicit(<transmittance>)"
            )))
        })
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Config(format!("`{s}` is not a number")))
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| Error::Config(format!("`{s}` is not a non-negative integer in range")))
}

fn split_list(s: &str) -> Result<Vec<&str>> {
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if items.iter().any(|x| x.is_empty()) {
        return Err(Error::Config(format!("`{s}` has an empty list entry")));
    }
    Ok(items)
}

/// Comma list whose entries are numbers or inclusive `start:step:stop` ranges.
fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in split_list(s)? {
        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
        match parts[..] {
            [x] => out.push(parse_f64(x)?),
            [a, step, b] => {
                let (a, step, b) = (parse_f64(a)?, parse_f64(step)?, parse_f64(b)?);
                if !(step > 0.0) || !(b >= a) {
                    return Err(Error::Config(format!("`{item}` needs step > 0 and stop >= start")));
                }
                // Index-based so the endpoints are hit without drift.
                let count = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|i| a + step * i as f64));
            }
            _ => return Err(Error::Config(format!("`{item}` is not a number or start:step:stop"))),
        }
    }
    Ok(out)
}

fn parse_u32_list(s: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for item in split_list(s)? {
        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
        match parts[..] {
            [x] => out.push(parse_int(x)?),
            [a, step, b] => {
                let (a, step, b): (u32, u32, u32) = (parse_int(a)?, parse_int(step)?, parse_int(b)?);
                if step == 0 || b < a {
                    return Err(Error::Config(format!("`{item}` needs step > 0 and stop >= start")));
                }
                out.extend((a..=b).step_by(step as usize));
            }
            _ => return Err(Error::Config(format!("`{item}` is not an integer or start:step:stop"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        let c = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn parses_params_and_sections() {
        let text = "\
[params]
v_mod = 3.2
n_onus = 16
epsilon_segments = 0.01, 0.02 ,0.03
splitter_model = explicit(0.055)

[sweep]
distances_km = 0:5:20
onu_counts = 2:2:8, 64

[mc]
n_samples = 1000
";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.params.v, 4.2);
        assert_eq!(c.params.n_onus, 16);
        assert_eq!(c.params.epsilon_segments, vec![0.01, 0.02, 0.03]);
        assert_eq!(c.params.splitter_model, SplitterModel::Explicit(0.055));
        let s = c.sweep.unwrap();
        assert_eq!(s.distances_km, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(s.onu_counts, vec![2, 4, 6, 8, 64]);
        assert_eq!(
            c.mc.unwrap(),
            McBlock {
                n_samples: 1000,
                seed: DEFAULT_SEED
            }
        );
        assert!(c.compare.is_none());
    }

    #[test]
    fn fractional_range_hits_endpoint() {
        let v = parse_f64_list("0:0.1:1").unwrap();
        assert_eq!(v.len(), 11);
        assert!((v[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut c = RunConfig::with_all_defaults();
        c.params.v = 1.0 + 1.0 / 3.0;
        c.params.epsilon_segments = vec![0.1 + 0.2, 1e-300, 0.0];
        c.params.splitter_model = SplitterModel::Explicit(std::f64::consts::FRAC_1_SQRT_2);
        c.compare.as_mut().unwrap().losses_db = vec![4.000000000000001, 12.5];
        let back = RunConfig::parse(&c.to_ini()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_ini(), c.to_ini());
    }

    #[test]
    fn invalid_params_name_the_invariant() {
        let e = RunConfig::parse("[params]\nv = 0.5\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("V >= 1"), "{e}");
    }

    #[test]
    fn syntax_errors_are_located() {
        let cases = [
            ("[params]\nbeta 0.9\n", "expecting"),
            ("[params]\nbogus = 1\n", "unknown key `bogus`"),
            ("[plots]\n", "unknown section"),
            ("x = 1\n", "outside of any section"),
            ("[params]\nbeta = 0.9\nbeta = 0.8\n", "duplicate key"),
            ("[params]\nbeta = high\n", "[params] beta: `high`"),
            ("[params]\n[params]\n", "duplicate section"),
            ("[params]\nv = 5\nv_mod = 4\n", "either v or v_mod"),
            ("[sweep]\nonu_counts = 2,,4\n", "empty list entry"),
            ("[params]\nsplitter_model = lossy\n", "ideal_1_over_n"),
            ("[params\n", "line 2: expecting"),
        ];
        for (text, needle) in cases {
            let e = RunConfig::parse(text).unwrap_err().to_string();
            assert!(e.contains(needle), "{text:?} -> {e}");
        }
    }
}
