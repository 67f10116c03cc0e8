//! Monte-Carlo orchestration: BER sweeps, interference heatmaps, SINR
//! comparisons and the complexity report, with deterministic seeding and
//! CSV emission.
//!
//! Determinism contract: every random draw comes from a stream id derived
//! from (purpose, SNR index, trial index) under the master seed, trials are
//! collected in index order and aggregated sequentially, so results are
//! byte-identical for any worker count. Timestamps only ever appear in
//! `result.meta`, never in the CSVs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{draw_channel, CfoSet, ChannelRealization};
use crate::detection::{
    build_composite_channel, equalize_and_demap, measure_sinr, DetectionReport,
};
use crate::numerics::{qam_map, CMatrix, DenseLu, RngStream};
use crate::receiver::{
    build_interference_matrix, extract_banded, extract_quasi_banded, interference_power_map,
    make_window, receive_plain, receive_windowed, ReceiverWindow,
};
use crate::scenario::{CfoPolicy, ComplexityCase, Method, Scenario};
use crate::solver::{
    complexity_cm, factorize_quasi_banded, solve_cg_mmse, ComplexityParams, QuasiBandedLu,
    Technique,
};
use crate::waveform::{cyclic_extend, frame_from_bin_symbols, map_subcarriers,
    synthesize_time_symbol, Allocation,
};
use crate::{Error, Result};

/// Stream id of the allocation shuffle.
const STREAM_ALLOCATION: u64 = 0;

const PURPOSE_CFO: u64 = 1;
const PURPOSE_CHANNEL: u64 = 2;
const PURPOSE_NOISE: u64 = 3;
const PURPOSE_BITS: u64 = 4;

/// Derives the stream id of one draw purpose within one trial.
fn trial_stream(purpose: u64, snr_idx: usize, trial: usize) -> u64 {
    purpose | ((snr_idx as u64 + 1) << 4) | ((trial as u64 + 1) << 20)
}

/// Execution options orthogonal to the scenario itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Rayon worker count; 0 picks the default.
    pub workers: usize,
    /// Replaces the scenario's master seed.
    pub seed_override: Option<u64>,
}

/// One BER table row.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub technique: String,
    pub bits: u64,
    pub errors: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// One SINR table row (aggregate power ratio over all frames).
#[derive(Debug, Clone, PartialEq)]
pub struct SinrPoint {
    pub technique: String,
    pub frames: u64,
    pub signal_power: f64,
    pub residual_power: f64,
    pub mean_frame_sinr_db: f64,
}

impl SinrPoint {
    pub fn sinr_db(&self) -> f64 {
        if self.residual_power == 0.0 {
            crate::detection::SINR_CAP_DB
        } else {
            (10.0 * (self.signal_power / self.residual_power).log10())
                .min(crate::detection::SINR_CAP_DB)
        }
    }
}

/// Everything one experiment run produces.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub ber: Vec<BerPoint>,
    pub sinr: Vec<SinrPoint>,
    pub meta: Vec<(String, String)>,
}

impl ScenarioResult {
    pub fn ber_csv(&self) -> String {
        let mut out = String::from("snr_db,technique,bits,errors,ber\n");
        for p in &self.ber {
            out.push_str(&format!(
                "{},{},{},{},{:.6e}\n",
                p.snr_db,
                p.technique,
                p.bits,
                p.errors,
                p.ber()
            ));
        }
        out
    }

    pub fn sinr_csv(&self) -> String {
        let mut out =
            String::from("technique,frames,signal_power,residual_power,sinr_db,mean_frame_sinr_db\n");
        for p in &self.sinr {
            out.push_str(&format!(
                "{},{},{:.6e},{:.6e},{:.4},{:.4}\n",
                p.technique,
                p.frames,
                p.signal_power,
                p.residual_power,
                p.sinr_db(),
                p.mean_frame_sinr_db
            ));
        }
        out
    }

    pub fn meta_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out
    }

    /// Writes `ber.csv` / `sinr.csv` (when populated) and `result.meta`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut written = Vec::new();
        if !self.ber.is_empty() {
            let path = dir.join("ber.csv");
            std::fs::write(&path, self.ber_csv())
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            written.push(path);
        }
        if !self.sinr.is_empty() {
            let path = dir.join("sinr.csv");
            std::fs::write(&path, self.sinr_csv())
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            written.push(path);
        }
        let path = dir.join("result.meta");
        std::fs::write(&path, self.meta_text())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(path);
        Ok(written)
    }
}

/// Per-compensator solver state, reusable across trials while the CFOs (and
/// hence the interference matrix) stay fixed.
enum TechState {
    /// No compensation: DFT output feeds detection directly.
    Passthrough,
    Dense(DenseLu),
    Band(QuasiBandedLu),
    /// CG keeps the dense active-submatrix; regularization comes per SNR.
    Cg(CMatrix),
}

struct Engine<'a> {
    s: &'a Scenario,
    master_seed: u64,
    alloc: Allocation,
    window: Option<ReceiverWindow>,
    need_windowed: bool,
    need_plain: bool,
}

struct TechTally {
    report: DetectionReport,
    signal_power: f64,
    residual_power: f64,
    frame_sinr_db_sum: f64,
    frames: u64,
}

impl TechTally {
    fn new() -> Self {
        TechTally {
            report: DetectionReport::default(),
            signal_power: 0.0,
            residual_power: 0.0,
            frame_sinr_db_sum: 0.0,
            frames: 0,
        }
    }
}

struct TrialOut {
    per_tech: Vec<(DetectionReport, f64, f64, f64)>,
}

impl<'a> Engine<'a> {
    fn new(s: &'a Scenario, opts: &RunOptions) -> Result<Self> {
        let master_seed = opts.seed_override.unwrap_or(s.master_seed);
        let alloc_seed = s.allocation_seed.unwrap_or(master_seed);
        let alloc = Allocation::build(
            s.allocation_scheme,
            &s.cfg,
            &s.active_bins,
            &RngStream::new(alloc_seed, STREAM_ALLOCATION),
        )?;
        let need_windowed = s.compensators.iter().any(|c| c.windowed);
        let need_plain = s.compensators.iter().any(|c| !c.windowed);
        let window = if need_windowed {
            Some(make_window(s.cfg.n, s.cfg.n_w)?)
        } else {
            None
        };
        Ok(Engine {
            s,
            master_seed,
            alloc,
            window,
            need_windowed,
            need_plain,
        })
    }

    /// Builds the interference matrices and per-compensator solver states
    /// for one CFO set.
    fn build_states(&self, cfos: &CfoSet) -> Result<Vec<TechState>> {
        let active = self.alloc.active_bins();
        let lambda_windowed = if self
            .s
            .compensators
            .iter()
            .any(|c| c.windowed && c.method != Method::None)
        {
            let lambda = build_interference_matrix(cfos, &self.alloc, &self.s.cfg, true)?;
            Some(lambda.mat.principal_submatrix(active))
        } else {
            None
        };
        let lambda_plain = if self
            .s
            .compensators
            .iter()
            .any(|c| !c.windowed && c.method != Method::None)
        {
            let lambda = build_interference_matrix(cfos, &self.alloc, &self.s.cfg, false)?;
            Some(lambda.mat.principal_submatrix(active))
        } else {
            None
        };

        self.s
            .compensators
            .iter()
            .map(|comp| {
                if comp.method == Method::None {
                    return Ok(TechState::Passthrough);
                }
                let mat = if comp.windowed {
                    lambda_windowed.as_ref().unwrap()
                } else {
                    lambda_plain.as_ref().unwrap()
                };
                match comp.method {
                    Method::None => unreachable!(),
                    Method::DirectZf => Ok(TechState::Dense(DenseLu::factor(mat)?)),
                    Method::CgMmse => Ok(TechState::Cg(mat.clone())),
                    Method::Banded | Method::QuasiBanded => {
                        let qb = if comp.method == Method::QuasiBanded {
                            extract_quasi_banded(mat, comp.band_halfwidth)?
                        } else {
                            extract_banded(mat, comp.band_halfwidth)?
                        };
                        match factorize_quasi_banded(&qb) {
                            Ok(fact) => Ok(TechState::Band(fact)),
                            Err(Error::NearSingular { step, pivot }) => {
                                log::warn!(
                                    "{}: banded factorization pivot {pivot:.3e} at step {step}; \
                                     falling back to dense solve",
                                    comp.label()
                                );
                                Ok(TechState::Dense(DenseLu::factor(mat)?))
                            }
                            Err(e) => Err(e),
                        }
                    }
                }
            })
            .collect()
    }

    fn fixed_cfos(&self) -> Option<CfoSet> {
        match &self.s.cfo_policy {
            CfoPolicy::Fixed(values) => Some(CfoSet::new(values.clone())),
            CfoPolicy::Uniform { redraw: false } => {
                let mut rng = RngStream::new(self.master_seed, trial_stream(PURPOSE_CFO, 0, 0)).rng();
                Some(CfoSet::draw_uniform(self.s.cfg.users, &mut rng))
            }
            CfoPolicy::Uniform { redraw: true } => None,
        }
    }

    fn run_trial(
        &self,
        snr_idx: usize,
        trial: usize,
        noise_var: f64,
        cfos: &CfoSet,
        states: &[TechState],
    ) -> Result<TrialOut> {
        let s = self.s;
        let cfg = &s.cfg;
        let active = self.alloc.active_bins();
        let bps = s.modulation.bits_per_symbol();

        let mut bits_rng = RngStream::new(
            self.master_seed,
            trial_stream(PURPOSE_BITS, snr_idx, trial),
        )
        .rng();
        let bits: Vec<u8> = (0..active.len() * bps)
            .map(|_| rand::Rng::random_range(&mut bits_rng, 0..2u8))
            .collect();
        let symbols = qam_map(&bits, s.modulation)?;
        let frame = frame_from_bin_symbols(&self.alloc, cfg, &symbols)?;

        let mut extended = Vec::with_capacity(cfg.users);
        for user in 0..cfg.users {
            let mapped = map_subcarriers(&frame.per_user[user], &self.alloc, user, cfg.n)?;
            let time = synthesize_time_symbol(&mapped)?;
            extended.push(cyclic_extend(&time, cfg)?);
        }

        let mut channel_rng = RngStream::new(
            self.master_seed,
            trial_stream(PURPOSE_CHANNEL, snr_idx, trial),
        )
        .rng();
        let channels: Vec<ChannelRealization> = (0..cfg.users)
            .map(|_| draw_channel(&s.profile, &mut channel_rng))
            .collect();

        let received = crate::channel::apply_uplink(
            &extended,
            &channels,
            cfos,
            cfg.n,
            noise_var,
            &RngStream::new(
                self.master_seed,
                trial_stream(PURPOSE_NOISE, snr_idx, trial),
            ),
        )?;

        let dft_windowed = if self.need_windowed {
            Some(receive_windowed(
                &received,
                cfg,
                self.window.as_ref().expect("window built for windowed chain"),
            )?)
        } else {
            None
        };
        let dft_plain = if self.need_plain {
            Some(receive_plain(&received, cfg)?)
        } else {
            None
        };
        let composite_windowed = if self.need_windowed {
            Some(build_composite_channel(
                &channels,
                cfos,
                &self.alloc,
                cfg,
                cfg.guard_len(),
            )?)
        } else {
            None
        };
        let composite_plain = if self.need_plain {
            Some(build_composite_channel(
                &channels, cfos, &self.alloc, cfg, cfg.n_cp,
            )?)
        } else {
            None
        };

        let mut per_tech = Vec::with_capacity(s.compensators.len());
        for (comp, state) in s.compensators.iter().zip(states) {
            let spectrum = if comp.windowed {
                dft_windowed.as_ref().unwrap()
            } else {
                dft_plain.as_ref().unwrap()
            };
            let composite = if comp.windowed {
                composite_windowed.as_ref().unwrap()
            } else {
                composite_plain.as_ref().unwrap()
            };
            let rhs: Vec<Complex64> = active.iter().map(|&bin| spectrum[bin]).collect();
            let solved = match state {
                TechState::Passthrough => rhs,
                TechState::Dense(lu) => lu.solve(&rhs)?,
                TechState::Band(fact) => fact.solve(&rhs)?,
                TechState::Cg(mat) => {
                    solve_cg_mmse(mat, &rhs, noise_var, comp.cg_iterations, None)?.solution
                }
            };
            let mut detected = vec![Complex64::ZERO; cfg.n];
            for (&bin, &value) in active.iter().zip(&solved) {
                detected[bin] = value;
            }
            let (decided, soft, erased) =
                equalize_and_demap(&detected, composite, &self.alloc, s.modulation)?;
            let report = DetectionReport::from_decisions(&decided, &bits, &erased, bps)?;
            let signal: f64 = symbols.iter().map(|z| z.norm_sqr()).sum();
            let residual: f64 = soft
                .iter()
                .zip(&symbols)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            let frame_sinr = measure_sinr(&soft, &symbols)?;
            per_tech.push((report, signal, residual, frame_sinr));
        }
        Ok(TrialOut { per_tech })
    }

    /// Runs all trials of one SNR point and folds them in trial order.
    fn run_point(&self, snr_idx: usize, snr_db: f64) -> Result<Vec<TechTally>> {
        let noise_var = 10f64.powf(-snr_db / 10.0);
        let fixed_cfos = self.fixed_cfos();
        let fixed_states = match &fixed_cfos {
            Some(cfos) => Some(self.build_states(cfos)?),
            None => None,
        };

        let outs: Vec<TrialOut> = (0..self.s.trials)
            .into_par_iter()
            .map(|trial| match (&fixed_cfos, &fixed_states) {
                (Some(cfos), Some(states)) => {
                    self.run_trial(snr_idx, trial, noise_var, cfos, states)
                }
                _ => {
                    let mut rng = RngStream::new(
                        self.master_seed,
                        trial_stream(PURPOSE_CFO, snr_idx, trial),
                    )
                    .rng();
                    let cfos = CfoSet::draw_uniform(self.s.cfg.users, &mut rng);
                    let states = self.build_states(&cfos)?;
                    self.run_trial(snr_idx, trial, noise_var, &cfos, &states)
                }
            })
            .collect::<Result<_>>()?;

        let mut tallies: Vec<TechTally> = self
            .s
            .compensators
            .iter()
            .map(|_| TechTally::new())
            .collect();
        for out in outs {
            for (tally, (report, signal, residual, frame_sinr)) in
                tallies.iter_mut().zip(out.per_tech)
            {
                tally.report.merge(&report);
                tally.signal_power += signal;
                tally.residual_power += residual;
                tally.frame_sinr_db_sum += frame_sinr;
                tally.frames += 1;
            }
        }
        Ok(tallies)
    }
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    pool.install(job)
}

fn base_meta(s: &Scenario, master_seed: u64, started: Instant) -> Vec<(String, String)> {
    let mut meta = s.meta_entries();
    meta.push(("master_seed_used".into(), master_seed.to_string()));
    meta.push(("version".into(), env!("CARGO_PKG_VERSION").into()));
    meta.push((
        "wall_time_ms".into(),
        started.elapsed().as_millis().to_string(),
    ));
    meta
}

/// Runs the Monte-Carlo BER sweep of a scenario.
pub fn run_ber_experiment(s: &Scenario, opts: &RunOptions) -> Result<ScenarioResult> {
    let started = Instant::now();
    with_pool(opts.workers, || {
        let engine = Engine::new(s, opts)?;
        let mut ber = Vec::new();
        for (snr_idx, &snr_db) in s.snr_db.iter().enumerate() {
            let tallies = engine.run_point(snr_idx, snr_db)?;
            for (comp, tally) in s.compensators.iter().zip(&tallies) {
                ber.push(BerPoint {
                    snr_db,
                    technique: comp.label(),
                    bits: tally.report.bits_total,
                    errors: tally.report.bit_errors,
                });
            }
        }
        Ok(ScenarioResult {
            name: s.name.clone(),
            ber,
            sinr: Vec::new(),
            meta: base_meta(s, engine.master_seed, started),
        })
    })
}

/// Runs the paired SINR comparison at one fixed SNR: every compensator sees
/// the same received signals (identical streams), so the per-technique SINR
/// rows are directly comparable.
pub fn run_sinr_comparison(s: &Scenario, opts: &RunOptions) -> Result<ScenarioResult> {
    if s.snr_db.len() != 1 {
        return Err(Error::InvalidScenario(format!(
            "SINR comparison needs exactly one SNR point, scenario has {}",
            s.snr_db.len()
        )));
    }
    let started = Instant::now();
    with_pool(opts.workers, || {
        let engine = Engine::new(s, opts)?;
        let snr_db = s.snr_db[0];
        let tallies = engine.run_point(0, snr_db)?;
        let mut ber = Vec::new();
        let mut sinr = Vec::new();
        for (comp, tally) in s.compensators.iter().zip(&tallies) {
            ber.push(BerPoint {
                snr_db,
                technique: comp.label(),
                bits: tally.report.bits_total,
                errors: tally.report.bit_errors,
            });
            sinr.push(SinrPoint {
                technique: comp.label(),
                frames: tally.frames,
                signal_power: tally.signal_power,
                residual_power: tally.residual_power,
                mean_frame_sinr_db: tally.frame_sinr_db_sum / tally.frames.max(1) as f64,
            });
        }
        Ok(ScenarioResult {
            name: s.name.clone(),
            ber,
            sinr,
            meta: base_meta(s, engine.master_seed, started),
        })
    })
}

/// Interference power maps (dB) of one scenario's windowed and plain
/// receive chains.
#[derive(Debug, Clone)]
pub struct HeatmapResult {
    pub windowed: Vec<Vec<f64>>,
    pub plain: Vec<Vec<f64>>,
}

impl HeatmapResult {
    fn render(map: &[Vec<f64>]) -> String {
        let mut out = String::new();
        for row in map {
            let cells: Vec<String> = row.iter().map(|db| format!("{db:.4}")).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    /// Writes `heatmap_windowed.txt` and `heatmap_plain.txt`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let windowed = dir.join("heatmap_windowed.txt");
        std::fs::write(&windowed, Self::render(&self.windowed))
            .map_err(|e| Error::io(windowed.display().to_string(), e))?;
        let plain = dir.join("heatmap_plain.txt");
        std::fs::write(&plain, Self::render(&self.plain))
            .map_err(|e| Error::io(plain.display().to_string(), e))?;
        Ok(vec![windowed, plain])
    }
}

/// Builds the windowed/plain interference power maps for a fixed-CFO
/// scenario.
pub fn run_heatmap(s: &Scenario, opts: &RunOptions) -> Result<HeatmapResult> {
    let values = match &s.cfo_policy {
        CfoPolicy::Fixed(values) => values.clone(),
        _ => {
            return Err(Error::InvalidScenario(
                "heatmap generation needs a fixed CFO list".into(),
            ))
        }
    };
    with_pool(opts.workers, || {
        let engine = Engine::new(s, opts)?;
        let cfos = CfoSet::new(values);
        let windowed = build_interference_matrix(&cfos, &engine.alloc, &s.cfg, true)?;
        let plain = build_interference_matrix(&cfos, &engine.alloc, &s.cfg, false)?;
        Ok(HeatmapResult {
            windowed: interference_power_map(&windowed.mat),
            plain: interference_power_map(&plain.mat),
        })
    })
}

/// Analytic (and, for the quasi-banded solver, instrumented) cost table.
///
/// Columns: technique, parameters, complex multiplications from the cost
/// model, ratio against the CG row, and for the quasi-banded rows the
/// multiplication counts measured on a seeded random system (factorization
/// and one solve listed separately).
pub fn complexity_report(cases: &[ComplexityCase]) -> Result<String> {
    let mut out = String::from(
        "technique,n,k,d,i,n_w,complex_mults,ratio_vs_cg,measured_factor_mults,measured_solve_mults\n",
    );
    for case in cases {
        let params = ComplexityParams {
            n: case.n,
            k: case.users,
            d: case.d,
            i: case.cg_iterations,
            n_w: case.window_len,
        };
        let cg = complexity_cm(Technique::Cg, &params);
        for (technique, label) in [
            (Technique::DirectZf, "direct_zf"),
            (Technique::Cg, "cg"),
            (Technique::QuasiBanded, "quasi_banded"),
        ] {
            let cm = complexity_cm(technique, &params);
            let measured = if technique == Technique::QuasiBanded {
                let (factor, solve) = instrument_case(case)?;
                format!("{factor},{solve}")
            } else {
                ",".into()
            };
            out.push_str(&format!(
                "{label},{},{},{},{},{},{:.1},{:.4},{measured}\n",
                case.n,
                case.users,
                case.d,
                case.cg_iterations,
                case.window_len,
                cm,
                cm / cg,
            ));
        }
    }
    Ok(out)
}

/// Measures executed complex multiplications on a seeded diagonally
/// dominant quasi-banded system of the case's size.
fn instrument_case(case: &ComplexityCase) -> Result<(u64, u64)> {
    let n = case.n;
    let d = case.d;
    let mut rng = RngStream::new(0xC0DE, (n as u64) << 8 | d as u64).rng();
    let mut dense = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) <= d || i.abs_diff(j) >= n - d {
                dense[(i, j)] = Complex64::new(
                    rand::Rng::random_range(&mut rng, -1.0..1.0),
                    rand::Rng::random_range(&mut rng, -1.0..1.0),
                );
            }
        }
    }
    for i in 0..n {
        let row_sum: f64 = (0..n)
            .filter(|&j| j != i)
            .map(|j| dense[(i, j)].norm())
            .sum();
        dense[(i, i)] = Complex64::new(row_sum + 1.0, 0.0);
    }
    let qb = extract_quasi_banded(&dense, d)?;
    let fact = factorize_quasi_banded(&qb)?;
    let rhs: Vec<Complex64> = (0..n)
        .map(|_| {
            Complex64::new(
                rand::Rng::random_range(&mut rng, -1.0..1.0),
                rand::Rng::random_range(&mut rng, -1.0..1.0),
            )
        })
        .collect();
    let (_, solve_count) = fact.solve_counted(&rhs)?;
    Ok((fact.factor_mults, solve_count))
}

/// Writes the complexity CSV to `complexity.csv` in `dir`.
pub fn write_complexity_report(cases: &[ComplexityCase], dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let path = dir.join("complexity.csv");
    std::fs::write(&path, complexity_report(cases)?)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}
