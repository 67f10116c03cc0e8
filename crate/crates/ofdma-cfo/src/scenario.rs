//! Scenario files: the structured-text (TOML) schema describing one
//! experiment, its validation, and the validated in-memory form the harness
//! runs.
//!
//! Schema overview (all sections except `[cfo]` and `[run]` have defaults
//! where noted):
//!
//! ```toml
//! [system]
//! subcarriers = 128        # power of two
//! users = 4
//! cp_len = 32
//! window_len = 14          # receiver window roll-off (even); 0 = none
//! cs_len = 7               # optional, defaults to window_len / 2
//! allocation = "generalized"   # generalized | interleaved | blocked
//! allocation_seed = 7          # optional, defaults to the master seed
//! modulation = 4               # 4 | 16
//! null_dc = false              # optional: leave subcarrier 0 unused
//! guard_high = 0               # optional: leave the top bins unused
//!
//! [channel]
//! profile = "profiles/sui2-like.profile"   # relative to the scenario file
//! normalization = "expected"   # optional: expected | per_realization
//!
//! [cfo]
//! mode = "fixed"               # fixed | uniform
//! values = [-0.44, 0.09, -0.34, 0.18]   # fixed mode, one per user
//! redraw = true                # uniform mode: fresh CFOs every trial
//!
//! [[compensators]]
//! method = "quasi_banded"      # direct_zf | banded | quasi_banded | cg_mmse | none
//! windowed = true
//! band_halfwidth = 10          # optional, defaults to floor(1.1 N / N_w)
//! cg_iterations = 32           # optional (cg_mmse only)
//!
//! [run]
//! snr_db = [5, 10, 15, 20, 25, 30, 35]
//! trials = 4000
//! master_seed = 20240901
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::channel::{ChannelProfile, Normalization};
use crate::numerics::QamOrder;
use crate::receiver::default_band_halfwidth;
use crate::waveform::{AllocationScheme, OfdmaConfig};
use crate::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    system: RawSystem,
    channel: RawChannel,
    cfo: RawCfo,
    #[serde(default)]
    compensators: Vec<RawCompensator>,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    subcarriers: usize,
    users: usize,
    cp_len: usize,
    window_len: usize,
    cs_len: Option<usize>,
    allocation: String,
    allocation_seed: Option<u64>,
    modulation: u32,
    #[serde(default)]
    null_dc: bool,
    #[serde(default)]
    guard_high: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    profile: String,
    normalization: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCfo {
    mode: String,
    values: Option<Vec<f64>>,
    redraw: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompensator {
    method: String,
    #[serde(default)]
    windowed: bool,
    band_halfwidth: Option<usize>,
    cg_iterations: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    snr_db: Vec<f64>,
    trials: usize,
    master_seed: u64,
}

/// CFO assignment policy of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum CfoPolicy {
    /// The same printed list for every trial.
    Fixed(Vec<f64>),
    /// Uniform over (-0.5, 0.5]; `redraw` controls whether every trial gets
    /// fresh offsets or one seeded draw serves the whole run.
    Uniform { redraw: bool },
}

impl CfoPolicy {
    pub fn is_fixed(&self) -> bool {
        matches!(self, CfoPolicy::Fixed(_))
    }

    /// CFOs change between trials (interference matrices must be rebuilt).
    pub fn per_trial(&self) -> bool {
        matches!(self, CfoPolicy::Uniform { redraw: true })
    }
}

/// Detection methods the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DirectZf,
    Banded,
    QuasiBanded,
    CgMmse,
    /// No compensation: the DFT output feeds detection directly.
    None,
}

impl Method {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "direct_zf" => Ok(Method::DirectZf),
            "banded" => Ok(Method::Banded),
            "quasi_banded" => Ok(Method::QuasiBanded),
            "cg_mmse" => Ok(Method::CgMmse),
            "none" => Ok(Method::None),
            other => Err(Error::InvalidScenario(format!(
                "unknown compensator method '{other}'"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Method::DirectZf => "direct_zf",
            Method::Banded => "banded",
            Method::QuasiBanded => "quasi_banded",
            Method::CgMmse => "cg_mmse",
            Method::None => "none",
        }
    }

    fn needs_band(self) -> bool {
        matches!(self, Method::Banded | Method::QuasiBanded)
    }
}

/// One compensator configuration within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompensatorSpec {
    pub method: Method,
    pub windowed: bool,
    pub band_halfwidth: usize,
    pub cg_iterations: usize,
}

impl CompensatorSpec {
    /// Stable label used in CSV outputs.
    pub fn label(&self) -> String {
        format!(
            "{}_{}",
            self.method.name(),
            if self.windowed { "windowed" } else { "plain" }
        )
    }
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub cfg: OfdmaConfig,
    pub allocation_scheme: AllocationScheme,
    pub allocation_seed: Option<u64>,
    pub active_bins: Vec<usize>,
    pub modulation: QamOrder,
    pub profile: ChannelProfile,
    pub profile_path: String,
    pub cfo_policy: CfoPolicy,
    pub compensators: Vec<CompensatorSpec>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
}

impl Scenario {
    /// Loads and validates a scenario file; the channel profile path is
    /// resolved relative to the scenario file's directory.
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let raw: RawScenario = toml::from_str(&text)
            .map_err(|e| Error::InvalidScenario(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
        Scenario::from_raw(raw, base, name)
    }

    fn from_raw(raw: RawScenario, base: &Path, name: String) -> Result<Scenario> {
        let sys = &raw.system;
        let cs_len = sys.cs_len.unwrap_or(sys.window_len / 2);
        let cfg = OfdmaConfig::new(sys.subcarriers, sys.users, sys.cp_len, cs_len, sys.window_len)
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;

        let allocation_scheme = match sys.allocation.as_str() {
            "generalized" => AllocationScheme::Generalized,
            "interleaved" => AllocationScheme::Interleaved,
            "blocked" => AllocationScheme::Blocked,
            other => {
                return Err(Error::InvalidScenario(format!(
                    "unknown allocation scheme '{other}'"
                )))
            }
        };

        let modulation = QamOrder::from_points(sys.modulation)
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;

        let first_bin = usize::from(sys.null_dc);
        let top = cfg
            .n
            .checked_sub(sys.guard_high)
            .filter(|&t| t > first_bin)
            .ok_or_else(|| {
                Error::InvalidScenario("guard bands leave no active subcarriers".into())
            })?;
        let active_bins: Vec<usize> = (first_bin..top).collect();
        if active_bins.len() % cfg.users != 0 {
            return Err(Error::InvalidScenario(format!(
                "{} active subcarriers do not split over {} users",
                active_bins.len(),
                cfg.users
            )));
        }

        let profile_path = base.join(&raw.channel.profile);
        let mut profile = ChannelProfile::load(&profile_path)
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        profile.normalization = match raw.channel.normalization.as_deref() {
            None | Some("expected") => Normalization::Expected,
            Some("per_realization") => Normalization::PerRealization,
            Some(other) => {
                return Err(Error::InvalidScenario(format!(
                    "unknown channel normalization '{other}'"
                )))
            }
        };
        if profile.channel_len() > cfg.max_channel_len() {
            return Err(Error::InvalidScenario(format!(
                "channel impulse response ({} taps) exceeds what the cyclic prefix \
                 absorbs ({} samples)",
                profile.channel_len(),
                cfg.max_channel_len()
            )));
        }

        let cfo_policy = match raw.cfo.mode.as_str() {
            "fixed" => {
                let values = raw.cfo.values.clone().ok_or_else(|| {
                    Error::InvalidScenario("fixed CFO mode needs a values list".into())
                })?;
                if values.len() != cfg.users {
                    return Err(Error::InvalidScenario(format!(
                        "{} CFO values for {} users",
                        values.len(),
                        cfg.users
                    )));
                }
                CfoPolicy::Fixed(values)
            }
            "uniform" => CfoPolicy::Uniform {
                redraw: raw.cfo.redraw.unwrap_or(true),
            },
            other => {
                return Err(Error::InvalidScenario(format!("unknown CFO mode '{other}'")))
            }
        };

        let mut compensators = Vec::new();
        for raw_comp in &raw.compensators {
            let method = Method::parse(&raw_comp.method)?;
            if raw_comp.windowed && cfg.n_w == 0 {
                return Err(Error::InvalidScenario(
                    "windowed compensator requires window_len > 0".into(),
                ));
            }
            let band_halfwidth = match raw_comp.band_halfwidth {
                Some(d) => d,
                None if method.needs_band() => {
                    if cfg.n_w == 0 {
                        return Err(Error::InvalidScenario(
                            "band half-width must be given explicitly when window_len = 0".into(),
                        ));
                    }
                    default_band_halfwidth(cfg.n, cfg.n_w)
                }
                None => 0,
            };
            if method.needs_band() {
                let active_n = active_bins.len();
                if band_halfwidth == 0 || band_halfwidth >= active_n.div_ceil(2) {
                    return Err(Error::InvalidScenario(format!(
                        "band half-width {band_halfwidth} out of range for {active_n} active bins"
                    )));
                }
            }
            compensators.push(CompensatorSpec {
                method,
                windowed: raw_comp.windowed,
                band_halfwidth,
                cg_iterations: raw_comp.cg_iterations.unwrap_or(32),
            });
        }
        if compensators.is_empty() {
            return Err(Error::InvalidScenario(
                "scenario lists no compensators".into(),
            ));
        }

        if raw.run.snr_db.is_empty() {
            return Err(Error::InvalidScenario("snr grid is empty".into()));
        }
        if raw.run.trials == 0 {
            return Err(Error::InvalidScenario("trials must be at least 1".into()));
        }

        Ok(Scenario {
            name,
            cfg,
            allocation_scheme,
            allocation_seed: sys.allocation_seed,
            active_bins,
            modulation,
            profile,
            profile_path: raw.channel.profile.clone(),
            cfo_policy,
            compensators,
            snr_db: raw.run.snr_db.clone(),
            trials: raw.run.trials,
            master_seed: raw.run.master_seed,
        })
    }

    /// Bits carried by one trial (one OFDMA symbol).
    pub fn bits_per_trial(&self) -> usize {
        self.active_bins.len() * self.modulation.bits_per_symbol()
    }

    /// Ordered configuration echo for provenance output.
    pub fn meta_entries(&self) -> Vec<(String, String)> {
        let scheme = match self.allocation_scheme {
            AllocationScheme::Generalized => "generalized",
            AllocationScheme::Interleaved => "interleaved",
            AllocationScheme::Blocked => "blocked",
        };
        let cfo = match &self.cfo_policy {
            CfoPolicy::Fixed(values) => format!("fixed {values:?}"),
            CfoPolicy::Uniform { redraw } => format!("uniform redraw={redraw}"),
        };
        let mut out = vec![
            ("scenario".into(), self.name.clone()),
            ("subcarriers".into(), self.cfg.n.to_string()),
            ("users".into(), self.cfg.users.to_string()),
            ("cp_len".into(), self.cfg.n_cp.to_string()),
            ("cs_len".into(), self.cfg.n_cs.to_string()),
            ("window_len".into(), self.cfg.n_w.to_string()),
            ("guard_removal_len".into(), self.cfg.guard_len().to_string()),
            ("allocation".into(), scheme.into()),
            (
                "allocation_seed".into(),
                self.allocation_seed
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "master".into()),
            ),
            ("active_subcarriers".into(), self.active_bins.len().to_string()),
            ("modulation".into(), self.modulation.points().to_string()),
            ("channel_profile".into(), self.profile_path.clone()),
            (
                "channel_normalization".into(),
                match self.profile.normalization {
                    Normalization::Expected => "expected".into(),
                    Normalization::PerRealization => "per_realization".into(),
                },
            ),
            ("cfo_policy".into(), cfo),
            ("csi".into(), "genie".into()),
            ("trials".into(), self.trials.to_string()),
            ("bits_per_trial".into(), self.bits_per_trial().to_string()),
            ("master_seed".into(), self.master_seed.to_string()),
        ];
        for (i, comp) in self.compensators.iter().enumerate() {
            out.push((
                format!("compensator_{i}"),
                format!(
                    "{} d={} cg_iterations={}",
                    comp.label(),
                    comp.band_halfwidth,
                    comp.cg_iterations
                ),
            ));
        }
        out
    }
}

/// One row of the complexity report.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityCase {
    pub n: usize,
    pub users: usize,
    pub d: usize,
    pub cg_iterations: usize,
    pub window_len: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComplexityScenario {
    cases: Vec<ComplexityCase>,
}

/// Loads a complexity-report parameter file (a TOML list of `[[cases]]`).
pub fn load_complexity_cases(path: &Path) -> Result<Vec<ComplexityCase>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let raw: RawComplexityScenario = toml::from_str(&text)
        .map_err(|e| Error::InvalidScenario(format!("{}: {e}", path.display())))?;
    if raw.cases.is_empty() {
        return Err(Error::InvalidScenario("no complexity cases listed".into()));
    }
    for case in &raw.cases {
        if case.n == 0 || case.users == 0 || case.cg_iterations == 0 {
            return Err(Error::InvalidScenario(
                "complexity case has zero-valued parameters".into(),
            ));
        }
    }
    Ok(raw.cases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_profile(dir: &Path) {
        let mut f = std::fs::File::create(dir.join("flat.profile")).unwrap();
        writeln!(f, "0 0.0").unwrap();
    }

    fn scenario_text() -> &'static str {
        r#"
[system]
subcarriers = 32
users = 4
cp_len = 8
window_len = 8
allocation = "generalized"
modulation = 4

[channel]
profile = "flat.profile"

[cfo]
mode = "fixed"
values = [0.20, -0.35, 0.45, -0.11]

[[compensators]]
method = "quasi_banded"
windowed = true

[run]
snr_db = [20]
trials = 10
master_seed = 1
"#
    }

    #[test]
    fn loads_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        write_profile(dir.path());
        let path = dir.path().join("demo.scn");
        std::fs::write(&path, scenario_text()).unwrap();
        let s = Scenario::load(&path).unwrap();
        assert_eq!(s.name, "demo");
        assert_eq!(s.cfg.n, 32);
        assert_eq!(s.cfg.n_cs, 4); // defaults to window_len / 2
        assert_eq!(s.compensators[0].band_halfwidth, 4); // floor(1.1*32/8)
        assert_eq!(s.bits_per_trial(), 64);
        assert!(s.cfo_policy.is_fixed());
    }

    #[test]
    fn rejects_wrong_cfo_count() {
        let dir = tempfile::tempdir().unwrap();
        write_profile(dir.path());
        let path = dir.path().join("bad.scn");
        std::fs::write(&path, scenario_text().replace("0.20, -0.35, 0.45, -0.11", "0.2")).unwrap();
        match Scenario::load(&path) {
            Err(Error::InvalidScenario(msg)) => assert!(msg.contains("CFO")),
            other => panic!("expected invalid scenario, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_method() {
        let dir = tempfile::tempdir().unwrap();
        write_profile(dir.path());
        let path = dir.path().join("bad.scn");
        std::fs::write(&path, scenario_text().replace("quasi_banded", "magic")).unwrap();
        assert!(matches!(
            Scenario::load(&path),
            Err(Error::InvalidScenario(_))
        ));
        std::fs::write(&path, format!("{}\nunknown_key = 3\n", scenario_text())).unwrap();
        assert!(matches!(
            Scenario::load(&path),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn guard_bands_shrink_the_active_set() {
        let dir = tempfile::tempdir().unwrap();
        write_profile(dir.path());
        let path = dir.path().join("guards.scn");
        std::fs::write(
            &path,
            scenario_text().replace(
                "modulation = 4",
                "modulation = 4\nnull_dc = true\nguard_high = 7",
            ),
        )
        .unwrap();
        let s = Scenario::load(&path).unwrap();
        assert_eq!(s.active_bins.len(), 24);
        assert_eq!(s.active_bins[0], 1);
        assert_eq!(*s.active_bins.last().unwrap(), 24);
    }
}
