//! Side-by-side comparison of simulated and closed-form powers.

use trbeam_core::analytics::PowerReport;
use trbeam_core::sim::SimResult;

use crate::table::{fmt_sci, Key, Table};
use crate::CliError;

/// Columns after the key columns.
pub const COLUMNS: [&str; 6] = ["mode", "quantity", "simulated", "simulated_se", "closed_form", "rel_error"];

/// Builds the comparison rows for every statistic present in `sim`.
///
/// Fails if `sim` and `closed` describe different channels, antenna counts
/// or transmit powers.
pub fn compare_report(experiment: &str, sim: &SimResult, closed: &PowerReport) -> Result<Table, CliError> {
    let cfg = &sim.config;
    if cfg.spec != closed.spec || cfg.antennas != closed.antennas || cfg.rho != closed.rho {
        return Err(CliError::Config(format!(
            "mismatched specs: simulation {:?} M={} rho={}, closed form {:?} M={} rho={}",
            cfg.spec, cfg.antennas, cfg.rho, closed.spec, closed.antennas, closed.rho
        )));
    }
    let mut t = Table::new(experiment, &COLUMNS);
    let key = Key::new(experiment, &format!("model{}", cfg.spec.model_number()))
        .ts(cfg.spec.ts)
        .len(cfg.spec.len)
        .antennas(cfg.antennas);
    let key = if cfg.mode == trbeam_core::beamformer::Mode::Etr { key.eq_len(cfg.eq_len) } else { key };
    let mode = cfg.mode.as_str();
    let mut row = |quantity: &str, sim: f64, se: f64, closed: f64| {
        let rel = if sim == closed { 0.0 } else { (sim - closed) / closed };
        t.push(&key, vec![mode.into(), quantity.into(), fmt_sci(sim), fmt_sci(se), fmt_sci(closed), fmt_sci(rel)]);
    };
    if let Some(p) = &sim.powers {
        match cfg.mode {
            trbeam_core::beamformer::Mode::Tr => {
                row("p_s", p.p_s.mean, p.p_s.se, closed.p_s);
                row("p_isi", p.p_isi.mean, p.p_isi.se, closed.p_isi_hat);
            }
            trbeam_core::beamformer::Mode::Etr => {
                if let Some(r) = p.rho_over_pg {
                    row("rho_over_pg", r.mean, r.se, closed.p_eq_bound);
                }
            }
        }
        row("p_h", p.p_h.mean, p.p_h.se, closed.antennas as f64 * closed.gain);
        row("var_p_h", p.var_p_h, f64::NAN, closed.var_ph);
    }
    if let Some(f) = &sim.focusing {
        row("p_int_tr", f.p_int_tr.mean, f.p_int_tr.se, closed.p_int_tr_hat);
        row("p_int_eq", f.total_eq_unintended.mean, f.total_eq_unintended.se, closed.p_int_eq_hat);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use trbeam_core::beamformer::Mode;
    use trbeam_core::channel::{PdpSpec, DEFAULT_GAIN};
    use trbeam_core::sim::{Estimate, PowerStats, SimConfig};

    fn exact(spec: &PdpSpec) -> (SimResult, PowerReport) {
        let closed = PowerReport::new(spec, 4, 1.0);
        let e = |m: f64| Estimate { mean: m, se: 0.0 };
        let sim = SimResult {
            config: SimConfig::new(*spec, 4, Mode::Tr),
            ber: vec![],
            powers: Some(PowerStats {
                p_s: e(closed.p_s),
                p_isi: e(closed.p_isi_hat),
                p_h: e(4.0 * spec.gain),
                var_p_h: closed.var_ph,
                rho_over_pg: None,
            }),
            focusing: None,
            redraws: 0,
        };
        (sim, closed)
    }

    #[test]
    fn identical_inputs_have_zero_error() {
        let spec = PdpSpec::preset("ts2.5-model2", DEFAULT_GAIN).unwrap();
        let (sim, closed) = exact(&spec);
        let t = compare_report("power-check", &sim, &closed).unwrap();
        assert_eq!(t.rows.len(), 4);
        let col = t.column("rel_error").unwrap();
        assert!(t.rows.iter().all(|r| r[col] == fmt_sci(0.0)));
    }

    #[test]
    fn mismatched_specs_are_rejected() {
        let spec = PdpSpec::preset("ts2.5-model2", DEFAULT_GAIN).unwrap();
        let (sim, _) = exact(&spec);
        let other = PowerReport::new(&PdpSpec::preset("ts5-model2", DEFAULT_GAIN).unwrap(), 4, 1.0);
        assert!(matches!(compare_report("x", &sim, &other), Err(CliError::Config(_))));
        let fewer = PowerReport::new(&spec, 2, 1.0);
        assert!(compare_report("x", &sim, &fewer).is_err());
    }
}
