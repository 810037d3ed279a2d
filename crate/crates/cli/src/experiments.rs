//! Built-in experiments. Each returns the tables it produced.

use trbeam_core::analytics::{
    db, eta_tr_apparent_hat, eta_tr_hat, p_isi_hat, p_signal, pe_theoretical, usable_power_hat, var_ph, Modulation,
    PowerReport,
};
use trbeam_core::beamformer::{design_equalizer, etr_composite, tr_composite, EqualizerDesign, Mode};
use trbeam_core::channel::{draw_cir, PdpSpec};
use trbeam_core::sim::{measure_focusing, measure_powers, run_ber, sweep_equalizer_length, SimConfig, SimResult};
use trbeam_core::stream::{stream, Purpose};

use crate::analysis::{bound_snr_at_ber, snr_at_ber};
use crate::compare::{self, compare_report};
use crate::config::ExperimentConfig;
use crate::table::{fmt_db, fmt_sci, Key, Table};
use crate::CliError;

/// All six built-in channel presets.
pub const ALL_PRESETS: [&str; 6] =
    ["ts2.5-model1", "ts5-model1", "ts10-model1", "ts2.5-model2", "ts5-model2", "ts10-model2"];

/// The four channels of the BER approximation study.
pub const BER_APPROX_PRESETS: [&str; 4] = ["ts5-model1", "ts5-model2", "ts2.5-model1", "ts2.5-model2"];

/// BER at which threshold SNRs are read off.
pub const TARGET_BER: f64 = 1e-4;

/// Delay spread used by `params-vs-L`, seconds.
const PARAMS_SIGMA: f64 = 8e-9;
const PARAMS_SIGMA2_RATIO: f64 = 1.75;
const PARAMS_GAMMA: f64 = 0.4786;

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    match cfg.experiment.as_str() {
        "time-compression" => time_compression(cfg),
        "le-sweep" => le_sweep(cfg),
        "params-vs-L" => params_vs_l(cfg),
        "focusing-table" => focusing_table(cfg),
        "ber-approx" => ber_approx(cfg),
        "ber-tr-vs-etr" => ber_curves(cfg, "ber-tr-vs-etr", &ALL_PRESETS, &[4]),
        "ber-scenarios" => ber_curves(cfg, "ber-scenarios", &ALL_PRESETS, &[4, 8]),
        "power-check" => power_check(cfg),
        other => Err(CliError::Config(format!("unknown experiment {other:?}"))),
    }
}

fn model_label(spec: &PdpSpec) -> String {
    format!("model{}", spec.model_number())
}

fn spec_key(exp: &str, spec: &PdpSpec) -> Key {
    Key::new(exp, &model_label(spec)).ts(spec.ts).len(spec.len)
}

fn antennas(cfg: &ExperimentConfig, default: &[usize]) -> Vec<usize> {
    cfg.link.antennas.clone().unwrap_or_else(|| default.to_vec())
}

fn modulations(cfg: &ExperimentConfig) -> Vec<Modulation> {
    cfg.link.modulation.clone().unwrap_or_else(|| vec![Modulation::Bpsk])
}

fn design(cfg: &ExperimentConfig) -> EqualizerDesign {
    cfg.beamformer.design.unwrap_or_default()
}

fn realizations(cfg: &ExperimentConfig, desk: u64, full: u64) -> u64 {
    cfg.link.realizations.unwrap_or(if cfg.full_scale { full } else { desk })
}

fn symbols(cfg: &ExperimentConfig) -> usize {
    cfg.link.symbols.unwrap_or(if cfg.full_scale { 1_000_000 } else { 100_000 })
}

fn snr_grid(cfg: &ExperimentConfig, max_db: i32) -> Vec<f64> {
    cfg.link.snr_db.clone().unwrap_or_else(|| (0..=max_db).step_by(2).map(f64::from).collect())
}

/// Simulation config shared by every experiment.
fn sim_config(cfg: &ExperimentConfig, spec: &PdpSpec, m: usize, mode: Mode) -> SimConfig {
    let mut s = SimConfig::new(*spec, m, mode);
    s.eq_len = cfg.beamformer.eq_len.unwrap_or(spec.len);
    s.design = design(cfg);
    s.seed = cfg.seed;
    s.rho = cfg.rho();
    s.threads = cfg.threads;
    s.realizations = realizations(cfg, 100, 1000);
    s.symbols = symbols(cfg);
    s
}

/// One channel realization and its TR and ETR composites.
fn time_compression(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let name = "time-compression";
    let mut t = Table::new(name, &["stage", "antenna", "tap", "re", "im", "power"]);
    for (_, spec) in cfg.specs_or(&["ts2.5-model2"])? {
        for m in antennas(cfg, &[4]) {
            let le = cfg.beamformer.eq_len.unwrap_or(spec.len);
            let cirs = draw_cir(&spec, m, &mut stream(cfg.seed, 0, 0, Purpose::Channel))?;
            let key = spec_key(name, &spec).antennas(m).eq_len(le);
            let mut emit = |stage: &str, antenna: String, taps: &[trbeam_core::Complex64], scale: f64| {
                for (k, v) in taps.iter().enumerate() {
                    t.push(
                        &key,
                        vec![
                            stage.into(),
                            antenna.clone(),
                            k.to_string(),
                            fmt_sci(v.re),
                            fmt_sci(v.im),
                            fmt_sci(scale * v.norm_sqr()),
                        ],
                    );
                }
            };
            for (i, h) in cirs.taps.iter().enumerate() {
                emit("cir", (i + 1).to_string(), h, 1.0);
            }
            let rho = cfg.rho();
            emit("tr", String::new(), &tr_composite(&cirs, rho)?.taps, rho);
            let eq = design_equalizer(&cirs, le, design(cfg))?;
            emit("etr", String::new(), &etr_composite(&cirs, &eq, rho)?.taps, rho);
        }
    }
    Ok(vec![t])
}

fn le_sweep(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let name = "le-sweep";
    let grid = cfg.beamformer.le_grid.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16, 24, 33, 48, 66]);
    let mut t = Table::new(
        name,
        &["design", "signal", "signal_se", "isi", "isi_se", "signal_db", "isi_db", "sir_db", "monotone_fraction"],
    );
    for (_, spec) in cfg.specs_or(&ALL_PRESETS)? {
        for m in antennas(cfg, &[4]) {
            let sc = sim_config(cfg, &spec, m, Mode::Etr);
            let sweep = sweep_equalizer_length(&sc, &grid)?;
            let frac = sweep.monotone_realizations as f64 / sweep.realizations as f64;
            for row in &sweep.rows {
                t.push(
                    &spec_key(name, &spec).antennas(m).eq_len(row.eq_len),
                    vec![
                        sc.design.as_str().into(),
                        fmt_sci(row.signal.mean),
                        fmt_sci(row.signal.se),
                        fmt_sci(row.isi.mean),
                        fmt_sci(row.isi.se),
                        fmt_db(db(row.signal.mean)),
                        fmt_db(db(row.isi.mean)),
                        fmt_db(row.sir_db),
                        fmt_sci(frac),
                    ],
                );
            }
        }
    }
    Ok(vec![t])
}

/// Cluster boundaries `L1 ~ L/4` and `L2 ~ L/2` of the swept two-cluster model.
pub fn params_clusters(len: usize) -> (usize, usize) {
    let l1 = ((len as f64 / 4.0).round() as usize).max(1);
    let l2 = ((len as f64 / 2.0).round() as usize).max(l1 + 1).min(len);
    (l1, l2)
}

fn params_vs_l(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let name = "params-vs-L";
    let mut t = Table::new(
        name,
        &[
            "ts_over_sigma",
            "l1",
            "l2",
            "u_hat_db",
            "eta_tr_hat_db",
            "eta_tr_apparent_hat_db",
            "eta_eq_bound_db",
            "var_ph_over_gain2",
        ],
    );
    let gain = cfg.gain();
    let rho = cfg.rho();
    for m in antennas(cfg, &[4]) {
        for model in [1u8, 2] {
            for ratio in [0.3125, 0.625, 1.25] {
                for len in (4..=64).step_by(4) {
                    let ts = ratio * PARAMS_SIGMA;
                    let (spec, l1, l2) = match model {
                        1 => (PdpSpec::one_cluster(ts, PARAMS_SIGMA, len, gain), String::new(), String::new()),
                        _ => {
                            let (l1, l2) = params_clusters(len);
                            let s2 = PARAMS_SIGMA2_RATIO * PARAMS_SIGMA;
                            let spec = PdpSpec::two_cluster(ts, PARAMS_SIGMA, s2, len, l1, l2, PARAMS_GAMMA, gain);
                            (spec, l1.to_string(), l2.to_string())
                        }
                    };
                    spec.validate()?;
                    let r = PowerReport::new(&spec, m, rho);
                    t.push(
                        &spec_key(name, &spec).antennas(m),
                        vec![
                            fmt_db(ratio),
                            l1,
                            l2,
                            fmt_db(db(r.u_hat)),
                            fmt_db(db(r.eta_tr_hat)),
                            fmt_db(db(r.eta_tr_apparent_hat)),
                            fmt_db(db(r.eta_eq_bound)),
                            fmt_sci(r.var_ph / (gain * gain)),
                        ],
                    );
                }
            }
        }
    }
    Ok(vec![t])
}

fn focusing_table(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let name = "focusing-table";
    let mut t = Table::new(
        name,
        &[
            "eta_tr_db",
            "eta_tr_se_db",
            "eta_tr_hat_db",
            "eta_tr_apparent_db",
            "eta_tr_apparent_se_db",
            "eta_tr_apparent_hat_db",
            "eta_eq_apparent_db",
            "eta_eq_apparent_se_db",
            "eta_eq_bound_db",
        ],
    );
    for (_, spec) in cfg.specs_or(&ALL_PRESETS)? {
        for m in antennas(cfg, &[4]) {
            let mut sc = sim_config(cfg, &spec, m, Mode::Etr);
            sc.realizations = realizations(cfg, 1000, 1000);
            let f = measure_focusing(&sc)?.focusing.expect("focusing stats");
            let r = PowerReport::new(&spec, m, sc.rho);
            t.push(
                &spec_key(name, &spec).antennas(m).eq_len(sc.eq_len),
                vec![
                    fmt_db(f.eta_tr_db.mean),
                    fmt_db(f.eta_tr_db.se),
                    fmt_db(db(r.eta_tr_hat)),
                    fmt_db(f.eta_tr_apparent_db.mean),
                    fmt_db(f.eta_tr_apparent_db.se),
                    fmt_db(db(r.eta_tr_apparent_hat)),
                    fmt_db(f.eta_eq_apparent_db.mean),
                    fmt_db(f.eta_eq_apparent_db.se),
                    fmt_db(db(r.eta_eq_bound)),
                ],
            );
        }
    }
    Ok(vec![t])
}

/// Theoretical BER of a config at one SNR: the Gaussian-ISI approximation
/// for TR, the `rho M Gamma` received-power bound for ETR.
pub fn theory_ber(sc: &SimConfig, snr_db: f64) -> f64 {
    let ps = p_signal(sc.rho, sc.antennas, sc.spec.gain);
    pe_theoretical(sc.mode, sc.modulation, ps, p_isi_hat(&sc.spec, sc.rho), sc.noise_variance(snr_db))
}

const BER_COLUMNS: [&str; 7] = ["mode", "modulation", "ber", "ci95", "errors", "bits", "ber_theory"];

fn push_ber_rows(t: &mut Table, exp: &str, sc: &SimConfig, res: &SimResult) {
    for p in &res.ber {
        let key = spec_key(exp, &sc.spec).antennas(sc.antennas).snr(p.snr_db);
        let key = if sc.mode == Mode::Etr { key.eq_len(sc.eq_len) } else { key };
        t.push(
            &key,
            vec![
                sc.mode.as_str().into(),
                sc.modulation.as_str().into(),
                fmt_sci(p.ber),
                fmt_sci(p.ci95),
                p.errors.to_string(),
                p.bits.to_string(),
                fmt_sci(theory_ber(sc, p.snr_db)),
            ],
        );
    }
}

fn ber_approx(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let name = "ber-approx";
    let mut t = Table::new(name, &BER_COLUMNS);
    let mut summary = Table::new("ber-approx-summary", &["modulation", "max_abs_gap", "snr_at_max_gap_db"]);
    for (_, spec) in cfg.specs_or(&BER_APPROX_PRESETS)? {
        for m in antennas(cfg, &[4]) {
            for modulation in modulations(cfg) {
                let mut sc = sim_config(cfg, &spec, m, Mode::Tr);
                sc.modulation = modulation;
                sc.snr_db = snr_grid(cfg, 30);
                let res = run_ber(&sc)?;
                push_ber_rows(&mut t, name, &sc, &res);
                let (snr, gap) = res
                    .ber
                    .iter()
                    .map(|p| (p.snr_db, (p.ber - theory_ber(&sc, p.snr_db)).abs()))
                    .fold((f64::NAN, -1.0), |a, b| if b.1 > a.1 { b } else { a });
                summary.push(
                    &spec_key("ber-approx", &spec).antennas(m),
                    vec![modulation.as_str().into(), fmt_sci(gap), fmt_db(snr)],
                );
            }
        }
    }
    Ok(vec![t, summary])
}

/// TR and ETR curves. The summary reports the TR floor between the two
/// highest grid SNRs (with the summed 95% half-widths, so the floor holds when the
/// two intervals overlap) and the ETR threshold SNR at [`TARGET_BER`].
fn ber_curves(
    cfg: &ExperimentConfig,
    name: &str,
    presets: &[&str],
    default_m: &[usize],
) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new(name, &BER_COLUMNS);
    let mut summary = Table::new(
        &format!("{name}-summary"),
        &[
            "mode",
            "modulation",
            "floor_delta",
            "floor_ci95",
            "snr_at_target_db",
            "bound_snr_at_target_db",
            "gap_to_bound_db",
        ],
    );
    for (_, spec) in cfg.specs_or(presets)? {
        for m in antennas(cfg, default_m) {
            for modulation in modulations(cfg) {
                for mode in [Mode::Tr, Mode::Etr] {
                    let mut sc = sim_config(cfg, &spec, m, mode);
                    sc.modulation = modulation;
                    sc.snr_db = snr_grid(cfg, 40);
                    let res = run_ber(&sc)?;
                    push_ber_rows(&mut t, name, &sc, &res);

                    let n = res.ber.len();
                    let (delta, ci) = if n >= 2 {
                        let (a, b) = (res.ber[n - 2], res.ber[n - 1]);
                        ((a.ber - b.ber).abs(), a.ci95 + b.ci95)
                    } else {
                        (f64::NAN, f64::NAN)
                    };
                    let curve: Vec<(f64, f64)> = res.ber.iter().map(|p| (p.snr_db, p.ber)).collect();
                    let at = snr_at_ber(&curve, TARGET_BER).unwrap_or(f64::NAN);
                    let (bound, gap) = match (mode, modulation) {
                        (Mode::Etr, Modulation::Bpsk) => {
                            let b = bound_snr_at_ber(m, TARGET_BER);
                            (b, at - b)
                        }
                        _ => (f64::NAN, f64::NAN),
                    };
                    let key = spec_key(name, &spec).antennas(m);
                    let key = if mode == Mode::Etr { key.eq_len(sc.eq_len) } else { key };
                    summary.push(
                        &key,
                        vec![
                            mode.as_str().into(),
                            modulation.as_str().into(),
                            fmt_sci(delta),
                            fmt_sci(ci),
                            fmt_db(at),
                            fmt_db(bound),
                            fmt_db(gap),
                        ],
                    );
                }
            }
        }
    }
    Ok(vec![t, summary])
}

/// Monte Carlo power statistics against the closed forms.
fn power_check(cfg: &ExperimentConfig) -> Result<Vec<Table>, CliError> {
    let name = "power-check";
    let mut t = Table::new(name, &compare::COLUMNS);
    for (_, spec) in cfg.specs_or(&ALL_PRESETS)? {
        for m in antennas(cfg, &[4]) {
            let mut tr = sim_config(cfg, &spec, m, Mode::Tr);
            tr.realizations = realizations(cfg, 10_000, 10_000);
            let closed = PowerReport::new(&spec, m, tr.rho);
            let mut res = measure_powers(&tr)?;
            res.focusing = measure_focusing(&tr)?.focusing;
            t.rows.extend(compare_report(name, &res, &closed)?.rows);
            let mut etr = tr.clone();
            etr.mode = Mode::Etr;
            t.rows.extend(compare_report(name, &measure_powers(&etr)?, &closed)?.rows);
        }
    }
    Ok(vec![t])
}

/// Closed-form helpers re-exported for tests of the `params-vs-L` table.
pub fn params_row(spec: &PdpSpec, m: usize, rho: f64) -> [f64; 4] {
    [
        db(usable_power_hat(spec, m)),
        db(eta_tr_hat(spec, m)),
        db(eta_tr_apparent_hat(spec, m, rho)),
        var_ph(spec, m) / (spec.gain * spec.gain),
    ]
}
