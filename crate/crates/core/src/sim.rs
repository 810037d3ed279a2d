//! Monte Carlo link simulation.
//!
//! Every realization is an independent work unit with its own random
//! streams. Results are collected in realization order and reduced
//! sequentially, so the output does not depend on the worker count.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::Modulation;
use crate::beamformer::{
    build_etr, composite_for_unintended, design_equalizer, etr_composite, power_breakdown, tr_composite, CompositeCir,
    EqualizerDesign, EqualizerTaps, Mode, Scheme,
};
use crate::channel::{channel_power, draw_cir, CirSet, PdpSpec};
use crate::dsp::energy;
use crate::stream::{stream, Purpose, MAX_ATTEMPTS};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Description of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: PdpSpec,
    pub antennas: usize,
    pub mode: Mode,
    /// Equalizer length; ignored in TR mode.
    pub eq_len: usize,
    #[serde(default)]
    pub design: EqualizerDesign,
    pub modulation: Modulation,
    /// SNR values in dB, with `SNR = rho Gamma / N`.
    pub snr_db: Vec<f64>,
    pub realizations: u64,
    pub symbols: usize,
    pub seed: u64,
    pub rho: f64,
    /// Worker cap; `None` uses the global pool. Never affects results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl SimConfig {
    /// Desk-scale defaults: 100 realizations of 10^5 symbols, `L_E = L`.
    pub fn new(spec: PdpSpec, antennas: usize, mode: Mode) -> Self {
        SimConfig {
            spec,
            antennas,
            mode,
            eq_len: spec.len,
            design: EqualizerDesign::default(),
            modulation: Modulation::Bpsk,
            snr_db: (0..=30).step_by(2).map(f64::from).collect(),
            realizations: 100,
            symbols: 100_000,
            seed: 1,
            rho: 1.0,
            threads: None,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.spec.violations();
        if self.antennas < 1 {
            v.push("antennas must be at least 1".into());
        }
        if self.eq_len < 1 {
            v.push("equalizer length must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            v.push("SNR grid must not be empty".into());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            v.push("SNR values must be finite".into());
        }
        if self.realizations < 1 {
            v.push("realizations must be at least 1".into());
        }
        if self.realizations >= 1 << 48 {
            v.push("realizations must be below 2^48".into());
        }
        if self.symbols < 1 {
            v.push("symbols per realization must be at least 1".into());
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            v.push("rho must be positive and finite".into());
        }
        if self.threads == Some(0) {
            v.push("thread count must be at least 1".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v.join("; ")))
        }
    }

    /// Complex noise variance for an SNR in dB.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        self.rho * self.spec.gain / 10f64.powf(snr_db / 10.0)
    }

    /// Symbols excluded at each end of a burst.
    pub fn edge(&self) -> usize {
        2 * self.spec.len + if self.mode == Mode::Etr { self.eq_len } else { 0 }
    }
}

/// Bit error rate at one SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub errors: u64,
    pub bits: u64,
    pub ber: f64,
    /// Half-width of the 95% Wald interval.
    pub ci95: f64,
}

impl BerPoint {
    fn new(snr_db: f64, errors: u64, bits: u64) -> Self {
        let ber = errors as f64 / bits as f64;
        let ci95 = Z95 * (ber * (1.0 - ber) / bits as f64).sqrt();
        BerPoint { snr_db, errors, bits, ber, ci95 }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

fn estimate(x: &[f64]) -> Estimate {
    let (mean, var) = mean_var(x);
    Estimate { mean, se: (var / x.len() as f64).sqrt() }
}

/// Ratio of means in dB with a delta-method standard error.
fn ratio_db(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len() as f64;
    let (mx, vx) = mean_var(num);
    let (my, vy) = mean_var(den);
    let cov = if num.len() > 1 {
        num.iter().zip(den).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let rel_var = (vx / (mx * mx) + vy / (my * my) - 2.0 * cov / (mx * my)) / n;
    Estimate { mean: 10.0 * (mx / my).log10(), se: 10.0 / std::f64::consts::LN_10 * rel_var.max(0.0).sqrt() }
}

/// Measured power statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStats {
    pub p_s: Estimate,
    pub p_isi: Estimate,
    pub p_h: Estimate,
    /// Unbiased sample variance of `P_h`.
    pub var_p_h: f64,
    /// `rho / P_g`, ETR only.
    pub rho_over_pg: Option<Estimate>,
}

/// Measured spatial focusing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusingStats {
    pub p_s: Estimate,
    pub p_isi: Estimate,
    pub p_int_tr: Estimate,
    pub total_eq: Estimate,
    pub total_eq_unintended: Estimate,
    /// `P_S / P_int`, dB.
    pub eta_tr_db: Estimate,
    /// `(P_S + P_ISI) / (P_int + P_ISI)`, dB.
    pub eta_tr_apparent_db: Estimate,
    /// ETR total intended over total unintended power, dB.
    pub eta_eq_apparent_db: Estimate,
}

/// Outcome of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub ber: Vec<BerPoint>,
    pub powers: Option<PowerStats>,
    pub focusing: Option<FocusingStats>,
    /// Realizations redrawn because of a near-singular channel.
    pub redraws: u64,
}

impl SimResult {
    fn empty(config: &SimConfig) -> Self {
        SimResult { config: config.clone(), ber: Vec::new(), powers: None, focusing: None, redraws: 0 }
    }
}

/// Runs `f` for every realization index and returns results in index order.
fn per_realization<T, F>(config: &SimConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let run = || (0..config.realizations).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Draws the intended channel of one realization, redrawing while the
/// equalizer designs fail on a near-singular spectrum.
///
/// `eq_lens` lists the equalizer lengths that must all be designable.
fn draw_user(config: &SimConfig, r: u64, eq_lens: &[usize]) -> Result<(CirSet, Vec<EqualizerTaps>, u32)> {
    for attempt in 0..MAX_ATTEMPTS {
        let cirs = draw_cir(&config.spec, config.antennas, &mut stream(config.seed, r, attempt, Purpose::Channel))?;
        let eqs: Result<Vec<_>> = eq_lens.iter().map(|&le| design_equalizer(&cirs, le, config.design)).collect();
        match eqs {
            Ok(eqs) => return Ok((cirs, eqs, attempt)),
            Err(Error::NearSingularChannel { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RedrawBudgetExhausted { realization: r, attempts: MAX_ATTEMPTS })
}

fn eq_lens(config: &SimConfig) -> Vec<usize> {
    if config.mode == Mode::Etr {
        vec![config.eq_len]
    } else {
        vec![]
    }
}

fn composite(config: &SimConfig, cirs: &CirSet, eqs: &[EqualizerTaps]) -> Result<CompositeCir> {
    match config.mode {
        Mode::Tr => tr_composite(cirs, config.rho),
        Mode::Etr => etr_composite(cirs, &eqs[0], config.rho),
    }
}

fn symbol_bits(modulation: Modulation, symbols: usize, rng: &mut impl Rng) -> Vec<u8> {
    let bps = modulation.bits_per_symbol();
    let mut bits = Vec::with_capacity(symbols * bps);
    while bits.len() < symbols * bps {
        let word: u64 = rng.random();
        let take = (symbols * bps - bits.len()).min(64);
        bits.extend((0..take).map(|k| ((word >> k) & 1) as u8));
    }
    bits
}

fn modulate(modulation: Modulation, bits: &[u8]) -> Vec<Complex64> {
    let level = |b: u8| if b == 0 { 1.0 } else { -1.0 };
    match modulation {
        Modulation::Bpsk => bits.iter().map(|&b| Complex64::new(level(b), 0.0)).collect(),
        Modulation::Qpsk => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            bits.chunks_exact(2).map(|p| Complex64::new(level(p[0]) * s, level(p[1]) * s)).collect()
        }
    }
}

/// Transmits random symbols through `c` and counts bit errors at every noise
/// variance in `noise_vars`.
///
/// The noiseless received samples and the unit-variance noise sequence are
/// shared across noise levels. Returns `(errors, bits)` per level.
pub fn simulate_link(
    c: &CompositeCir,
    modulation: Modulation,
    symbols: usize,
    edge: usize,
    noise_vars: &[f64],
    bits_rng: &mut impl Rng,
    noise_rng: &mut impl Rng,
) -> Vec<(u64, u64)> {
    let total = symbols + 2 * edge;
    let bits = symbol_bits(modulation, total, bits_rng);
    let tx = modulate(modulation, &bits);
    let amp = c.rho.sqrt();
    let peak = c.taps[c.peak_index];
    // Ideal phase synchronization on the composite peak.
    let derotate = if peak.norm() > 0.0 { peak.conj() / peak.norm() } else { Complex64::new(1.0, 0.0) };
    let d = c.peak_index;

    let clean: Vec<Complex64> = (edge..edge + symbols)
        .map(|m| {
            let n = m + d;
            let lo = n.saturating_sub(total - 1);
            let hi = n.min(c.taps.len() - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in lo..=hi {
                acc += c.taps[k] * tx[n - k];
            }
            acc * amp * derotate
        })
        .collect();
    let half = std::f64::consts::FRAC_1_SQRT_2;
    // Derotation preserves circular noise statistics, so it is not applied to w.
    let noise: Vec<Complex64> = (0..symbols)
        .map(|_| {
            let re: f64 = noise_rng.sample(StandardNormal);
            let im: f64 = noise_rng.sample(StandardNormal);
            Complex64::new(re * half, im * half)
        })
        .collect();

    let bps = modulation.bits_per_symbol();
    let counted = (symbols * bps) as u64;
    noise_vars
        .iter()
        .map(|&nv| {
            let sd = nv.sqrt();
            let mut errors = 0u64;
            for (j, (y, w)) in clean.iter().zip(&noise).enumerate() {
                let y = y + w * sd;
                let m = edge + j;
                match modulation {
                    Modulation::Bpsk => errors += u64::from((y.re < 0.0) as u8 != bits[m]),
                    Modulation::Qpsk => {
                        errors += u64::from((y.re < 0.0) as u8 != bits[2 * m]);
                        errors += u64::from((y.im < 0.0) as u8 != bits[2 * m + 1]);
                    }
                }
            }
            (errors, counted)
        })
        .collect()
}

/// Monte Carlo bit error rate over the configured SNR grid.
pub fn run_ber(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let lens = eq_lens(config);
    let noise_vars: Vec<f64> = config.snr_db.iter().map(|&s| config.noise_variance(s)).collect();
    let edge = config.edge();
    let parts = per_realization(config, |r| {
        let (cirs, eqs, attempt) = draw_user(config, r, &lens)?;
        let c = composite(config, &cirs, &eqs)?;
        let counts = simulate_link(
            &c,
            config.modulation,
            config.symbols,
            edge,
            &noise_vars,
            &mut stream(config.seed, r, 0, Purpose::Bits),
            &mut stream(config.seed, r, 0, Purpose::Noise),
        );
        Ok((counts, attempt))
    })?;
    let mut result = SimResult::empty(config);
    let mut errors = vec![0u64; noise_vars.len()];
    let mut bits = vec![0u64; noise_vars.len()];
    for (counts, attempt) in &parts {
        result.redraws += u64::from(*attempt);
        for (k, (e, b)) in counts.iter().enumerate() {
            errors[k] += e;
            bits[k] += b;
        }
    }
    result.ber = config.snr_db.iter().enumerate().map(|(k, &s)| BerPoint::new(s, errors[k], bits[k])).collect();
    Ok(result)
}

/// Sample means of the instantaneous powers of the configured mode, plus
/// `P_h` statistics and, for ETR, `rho / P_g`.
pub fn measure_powers(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let lens = eq_lens(config);
    let samples = per_realization(config, |r| {
        let (cirs, eqs, attempt) = draw_user(config, r, &lens)?;
        let p = power_breakdown(&composite(config, &cirs, &eqs)?);
        let ph = channel_power(&cirs)?;
        let rho_pg = match config.mode {
            Mode::Etr => Some(config.rho / build_etr(&cirs, &eqs[0])?.norm),
            Mode::Tr => None,
        };
        Ok((p.signal, p.isi, ph, rho_pg, attempt))
    })?;
    type Sample = (f64, f64, f64, Option<f64>, u32);
    let col = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    let ph = col(&|s| s.2);
    let mut result = SimResult::empty(config);
    result.redraws = samples.iter().map(|s| u64::from(s.4)).sum();
    result.powers = Some(PowerStats {
        p_s: estimate(&col(&|s| s.0)),
        p_isi: estimate(&col(&|s| s.1)),
        p_h: estimate(&ph),
        var_p_h: mean_var(&ph).1,
        rho_over_pg: (config.mode == Mode::Etr).then(|| estimate(&col(&|s| s.3.unwrap_or(f64::NAN)))),
    });
    Ok(result)
}

/// Instantaneous powers entering the focusing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusingSample {
    pub p_s: f64,
    pub p_isi: f64,
    /// TR power at tap `L-1` of the unintended receiver.
    pub p_int_tr: f64,
    /// ETR total power at the intended receiver.
    pub total_eq: f64,
    /// ETR total power at the unintended receiver.
    pub total_eq_unintended: f64,
}

/// Focusing powers for one pair of intended and unintended channels.
pub fn focusing_sample(user: &CirSet, other: &CirSet, eq: &EqualizerTaps, rho: f64) -> Result<FocusingSample> {
    let tr = power_breakdown(&tr_composite(user, rho)?);
    let int = composite_for_unintended(user, other, Scheme::Tr, rho)?;
    let p_int_tr = power_breakdown(&int).signal;
    let total_eq = rho * energy(&etr_composite(user, eq, rho)?.taps);
    let total_eq_unintended = rho * energy(&composite_for_unintended(user, other, Scheme::Etr(eq), rho)?.taps);
    Ok(FocusingSample { p_s: tr.signal, p_isi: tr.isi, p_int_tr, total_eq, total_eq_unintended })
}

/// Aggregates focusing samples into ratio-of-means estimates.
pub fn focusing_stats(samples: &[FocusingSample]) -> FocusingStats {
    let col = |f: fn(&FocusingSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    let (ps, isi, int) = (col(|s| s.p_s), col(|s| s.p_isi), col(|s| s.p_int_tr));
    let (teq, tequ) = (col(|s| s.total_eq), col(|s| s.total_eq_unintended));
    let received: Vec<f64> = ps.iter().zip(&isi).map(|(a, b)| a + b).collect();
    let leaked: Vec<f64> = int.iter().zip(&isi).map(|(a, b)| a + b).collect();
    FocusingStats {
        p_s: estimate(&ps),
        p_isi: estimate(&isi),
        p_int_tr: estimate(&int),
        total_eq: estimate(&teq),
        total_eq_unintended: estimate(&tequ),
        eta_tr_db: ratio_db(&ps, &int),
        eta_tr_apparent_db: ratio_db(&received, &leaked),
        eta_eq_apparent_db: ratio_db(&teq, &tequ),
    }
}

/// Spatial focusing of TR and ETR (`L_E = eq_len`) against an independent
/// unintended receiver drawn from the same PDP. `mode` is ignored.
pub fn measure_focusing(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let samples = per_realization(config, |r| {
        let (user, eqs, attempt) = draw_user(config, r, &[config.eq_len])?;
        let other =
            draw_cir(&config.spec, config.antennas, &mut stream(config.seed, r, 0, Purpose::UnintendedChannel))?;
        Ok((focusing_sample(&user, &other, &eqs[0], config.rho)?, attempt))
    })?;
    let mut result = SimResult::empty(config);
    result.redraws = samples.iter().map(|s| u64::from(s.1)).sum();
    let flat: Vec<FocusingSample> = samples.into_iter().map(|s| s.0).collect();
    result.focusing = Some(focusing_stats(&flat));
    Ok(result)
}

/// One row of an equalizer-length sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eq_len: usize,
    pub signal: Estimate,
    pub isi: Estimate,
    /// Mean signal over mean ISI, dB (`+inf` without ISI).
    pub sir_db: f64,
}

/// Outcome of [`sweep_equalizer_length`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Realizations whose ISI power is non-increasing along the grid.
    pub monotone_realizations: u64,
    pub realizations: u64,
    pub redraws: u64,
}

/// ETR signal and ISI power over equalizer lengths, on one shared set of
/// channel realizations.
pub fn sweep_equalizer_length(config: &SimConfig, le_grid: &[usize]) -> Result<Sweep> {
    config.validate()?;
    if le_grid.is_empty() || le_grid.contains(&0) {
        return Err(Error::InvalidConfig("equalizer length grid must be nonempty and positive".into()));
    }
    let samples = per_realization(config, |r| {
        let (cirs, eqs, attempt) = draw_user(config, r, le_grid)?;
        let powers = eqs
            .iter()
            .map(|eq| etr_composite(&cirs, eq, config.rho).map(|c| power_breakdown(&c)))
            .collect::<Result<Vec<_>>>()?;
        Ok((powers, attempt))
    })?;
    let rows = le_grid
        .iter()
        .enumerate()
        .map(|(k, &eq_len)| {
            let signal = estimate(&samples.iter().map(|s| s.0[k].signal).collect::<Vec<_>>());
            let isi = estimate(&samples.iter().map(|s| s.0[k].isi).collect::<Vec<_>>());
            SweepRow { eq_len, signal, isi, sir_db: 10.0 * (signal.mean / isi.mean).log10() }
        })
        .collect();
    let monotone_realizations = samples.iter().filter(|s| s.0.windows(2).all(|w| w[1].isi <= w[0].isi)).count() as u64;
    Ok(Sweep {
        rows,
        monotone_realizations,
        realizations: config.realizations,
        redraws: samples.iter().map(|s| u64::from(s.1)).sum(),
    })
}
