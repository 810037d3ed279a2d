//! Closed-form power components, focusing parameters and error probabilities.
//!
//! The model-specific expressions are evaluated term by term for auditability.
//! Each also has a generic counterpart written against an arbitrary PDP, which
//! the tests use as an oracle.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::beamformer::Mode;
use crate::channel::{Clusters, PdpSpec};

/// Symbol alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modulation {
    Bpsk,
    /// Gray-coded, two bits per symbol.
    Qpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
        }
    }
}

/// Which printing of the two-cluster `C[l, n]` coefficient table to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CTable {
    /// Third case carries the relative cluster power `gamma`, so that
    /// `C[l, n]` equals the unnormalized PDP at tap `L-1-l+n`.
    Corrected,
    /// Third case without `gamma`, exactly as typeset in the source.
    AsPrinted,
}

/// Received desired-symbol power `rho M Gamma`.
pub fn p_signal(rho: f64, antennas: usize, gain: f64) -> f64 {
    rho * antennas as f64 * gain
}

/// ETR received power upper bound `rho M Gamma`.
pub fn p_eq_bound(rho: f64, antennas: usize, gain: f64) -> f64 {
    rho * antennas as f64 * gain
}

/// Total ETR power at an unintended receiver, `rho Gamma`.
pub fn p_int_eq_hat(rho: f64, gain: f64) -> f64 {
    rho * gain
}

/// Generic ISI approximation for an arbitrary PDP:
/// `(rho/Gamma) sum_{l != L-1} sum_n p[n] p[L-1-l+n]`.
pub fn p_isi_from_profile(power: &[f64], rho: f64, gain: f64) -> f64 {
    let l_taps = power.len() as i64;
    let mut total = 0.0;
    for l in 0..(2 * l_taps - 1).max(0) {
        if l == l_taps - 1 {
            continue;
        }
        for n in (l - l_taps + 1).max(0)..=l.min(l_taps - 1) {
            total += power[n as usize] * power[(l_taps - 1 - l + n) as usize];
        }
    }
    rho / gain * total
}

/// Generic TR interference approximation `(rho/Gamma) sum_l p[l]^2`.
pub fn p_int_tr_from_profile(power: &[f64], rho: f64, gain: f64) -> f64 {
    rho / gain * power.iter().map(|p| p * p).sum::<f64>()
}

/// Single-cluster normalization ratio `(1 - e^{-Ts/sigma}) / (1 - e^{-L Ts/sigma})`.
fn one_cluster_norm(a: f64, len: usize) -> f64 {
    (1.0 - (-a).exp()) / (1.0 - (-(len as f64) * a).exp())
}

/// `sum_{l != L-1} sum_n e^{-(L-1-l+2n) a}` with the usual index limits.
fn one_cluster_isi_sum(a: f64, len: usize) -> f64 {
    let l_taps = len as i64;
    let mut total = 0.0;
    for l in 0..2 * l_taps - 1 {
        if l == l_taps - 1 {
            continue;
        }
        for n in (l - l_taps + 1).max(0)..=l.min(l_taps - 1) {
            total += (-((l_taps - 1 - l + 2 * n) as f64) * a).exp();
        }
    }
    total
}

/// `(1 + e^{-L a})(1 - e^{-a}) / ((1 + e^{-a})(1 - e^{-L a}))`.
fn one_cluster_int_factor(a: f64, len: usize) -> f64 {
    let el = (-(len as f64) * a).exp();
    let e1 = (-a).exp();
    (1.0 + el) * (1.0 - e1) / ((1.0 + e1) * (1.0 - el))
}

struct TwoCluster {
    ts: f64,
    sigma1: f64,
    sigma2: f64,
    len: i64,
    l1: i64,
    l2: i64,
    gamma: f64,
}

impl TwoCluster {
    fn from_spec(spec: &PdpSpec) -> Option<Self> {
        match spec.clusters {
            Clusters::Two { sigma1, sigma2, l1, l2, gamma } => Some(TwoCluster {
                ts: spec.ts,
                sigma1,
                sigma2,
                len: spec.len as i64,
                l1: l1 as i64,
                l2: l2 as i64,
                gamma,
            }),
            Clusters::One { .. } => None,
        }
    }

    fn e1(&self, n: i64) -> f64 {
        (-(n as f64) * self.ts / self.sigma1).exp()
    }

    fn e2(&self, n: i64) -> f64 {
        (-((n - self.l1) as f64) * self.ts / self.sigma2).exp()
    }

    /// `sum_{n<L2} e1(n) + gamma sum_{n>=L1} e2(n)`.
    fn denominator(&self) -> f64 {
        (0..self.l2).map(|n| self.e1(n)).sum::<f64>()
            + self.gamma * (self.l1..self.len).map(|n| self.e2(n)).sum::<f64>()
    }

    /// `sum e1^2 + gamma^2 sum e2^2 + 2 gamma sum_{overlap} e1 e2`.
    fn square_sum(&self) -> f64 {
        let first: f64 = (0..self.l2).map(|n| self.e1(2 * n)).sum();
        let second: f64 = (self.l1..self.len).map(|n| self.e2(n).powi(2)).sum();
        let cross: f64 = (self.l1..self.l2).map(|n| self.e1(n) * self.e2(n)).sum();
        first + self.gamma * self.gamma * second + 2.0 * self.gamma * cross
    }

    // Bounds are written as in the case table, `a + 1 <= n`.
    #[allow(clippy::int_plus_one)]
    fn c(&self, l: i64, n: i64, table: CTable) -> f64 {
        let len = self.len;
        let k = len - 1 - l + n;
        if l - len + 1 <= n && n <= l - len + self.l1 {
            self.e1(k)
        } else if l - len + self.l1 + 1 <= n && n <= l - len + self.l2 {
            self.e1(k) + self.gamma * self.e2(k)
        } else if l - len + self.l2 + 1 <= n && n <= l {
            match table {
                CTable::Corrected => self.gamma * self.e2(k),
                CTable::AsPrinted => self.e2(k),
            }
        } else {
            0.0
        }
    }

    fn isi_sum(&self, table: CTable) -> f64 {
        let len = self.len;
        let mut total = 0.0;
        for l in 0..2 * len - 1 {
            if l == len - 1 {
                continue;
            }
            let lo = (l - len + 1).max(0);
            let first: f64 = (lo..=l.min(self.l2 - 1)).map(|n| self.e1(n) * self.c(l, n, table)).sum();
            let second: f64 = (lo.max(self.l1)..=l.min(len - 1)).map(|n| self.e2(n) * self.c(l, n, table)).sum();
            total += first + self.gamma * second;
        }
        total
    }
}

/// Two-cluster `C[l, n]` coefficient. Returns `None` for single-cluster specs.
pub fn c_coefficient(spec: &PdpSpec, l: i64, n: i64, table: CTable) -> Option<f64> {
    TwoCluster::from_spec(spec).map(|t| t.c(l, n, table))
}

/// Two-cluster ISI approximation with an explicit choice of `C[l, n]` table.
/// Returns `None` for single-cluster specs.
pub fn p_isi_hat_two_cluster(spec: &PdpSpec, rho: f64, table: CTable) -> Option<f64> {
    TwoCluster::from_spec(spec).map(|t| rho * spec.gain * t.isi_sum(table) / t.denominator().powi(2))
}

/// Approximate TR ISI power `P_ISI`.
pub fn p_isi_hat(spec: &PdpSpec, rho: f64) -> f64 {
    match spec.clusters {
        Clusters::One { sigma } => {
            let a = spec.ts / sigma;
            rho * spec.gain * one_cluster_norm(a, spec.len).powi(2) * one_cluster_isi_sum(a, spec.len)
        }
        Clusters::Two { .. } => p_isi_hat_two_cluster(spec, rho, CTable::Corrected).unwrap_or(f64::NAN),
    }
}

/// Approximate usable power ratio `U = P_S / P_ISI`, `+inf` without ISI.
pub fn usable_power_hat(spec: &PdpSpec, antennas: usize) -> f64 {
    let m = antennas as f64;
    let (num, isi_sum) = match spec.clusters {
        Clusters::One { sigma } => {
            let a = spec.ts / sigma;
            let el = (-(spec.len as f64) * a).exp();
            ((1.0 - el).powi(2), (1.0 - (-a).exp()).powi(2) * one_cluster_isi_sum(a, spec.len))
        }
        Clusters::Two { .. } => {
            let t = TwoCluster::from_spec(spec).expect("two-cluster spec");
            (t.denominator().powi(2), t.isi_sum(CTable::Corrected))
        }
    };
    if isi_sum == 0.0 {
        f64::INFINITY
    } else {
        m * num / isi_sum
    }
}

/// Approximate TR interference power at an unintended receiver.
pub fn p_int_tr_hat(spec: &PdpSpec, rho: f64) -> f64 {
    rho * spec.gain * int_factor(spec)
}

/// `P_int / (rho Gamma)`, the same factor that controls `Var[P_h]`.
fn int_factor(spec: &PdpSpec) -> f64 {
    match spec.clusters {
        Clusters::One { sigma } => one_cluster_int_factor(spec.ts / sigma, spec.len),
        Clusters::Two { .. } => {
            let t = TwoCluster::from_spec(spec).expect("two-cluster spec");
            t.square_sum() / t.denominator().powi(2)
        }
    }
}

/// Approximate TR effective spatial focusing `P_S / P_int`.
pub fn eta_tr_hat(spec: &PdpSpec, antennas: usize) -> f64 {
    let m = antennas as f64;
    match spec.clusters {
        Clusters::One { sigma } => {
            let a = spec.ts / sigma;
            let el = (-(spec.len as f64) * a).exp();
            let e1 = (-a).exp();
            m * (1.0 + e1) * (1.0 - el) / ((1.0 + el) * (1.0 - e1))
        }
        Clusters::Two { .. } => {
            let t = TwoCluster::from_spec(spec).expect("two-cluster spec");
            m * t.denominator().powi(2) / t.square_sum()
        }
    }
}

/// Approximate TR apparent power focusing `(P_S + P_ISI) / (P_int + P_ISI)`.
pub fn eta_tr_apparent_hat(spec: &PdpSpec, antennas: usize, rho: f64) -> f64 {
    let isi = p_isi_hat(spec, rho);
    (p_signal(rho, antennas, spec.gain) + isi) / (p_int_tr_hat(spec, rho) + isi)
}

/// Variance of the TR normalization power `P_h`.
pub fn var_ph(spec: &PdpSpec, antennas: usize) -> f64 {
    antennas as f64 * spec.gain * spec.gain * int_factor(spec)
}

/// Complementary error function, relative error below `1e-13` on `[0, 6]`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        // erf(x) = 2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (1*3*...*(2n+1))
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term > 1e-17 * sum {
            n += 1.0;
            term *= 2.0 * x * x / (2.0 * n + 1.0);
            sum += term;
        }
        return 1.0 - 2.0 / PI.sqrt() * (-x * x).exp() * sum;
    }
    if x > 27.0 {
        return 0.0;
    }
    // erfc(x) = e^{-x^2}/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
    // Modified Lentz evaluation.
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..2000 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        d = if d == 0.0 { tiny } else { 1.0 / d };
        c = x + a / c;
        if c == 0.0 {
            c = tiny;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Standard Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    if x < 0.0 {
        1.0 - q_function(-x)
    } else {
        0.5 * erfc(x / std::f64::consts::SQRT_2)
    }
}

/// Gaussian-approximation bit error probability.
///
/// For TR, residual ISI is treated as extra Gaussian noise. For ETR the ISI
/// is assumed removed, so `p_isi` is ignored and `p_s` is the ETR received
/// power. `noise` is the complex noise variance.
pub fn pe_theoretical(mode: Mode, modulation: Modulation, p_s: f64, p_isi: f64, noise: f64) -> f64 {
    let disturbance = match mode {
        Mode::Tr => p_isi + noise,
        Mode::Etr => noise,
    };
    let snr = if disturbance.is_infinite() {
        0.0
    } else if disturbance == 0.0 {
        f64::INFINITY
    } else {
        p_s / disturbance
    };
    match modulation {
        Modulation::Bpsk => q_function((2.0 * snr).sqrt()),
        Modulation::Qpsk => q_function(snr.sqrt()),
    }
}

/// Every closed-form quantity for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub spec: PdpSpec,
    pub antennas: usize,
    pub rho: f64,
    pub gain: f64,
    pub p_s: f64,
    pub p_isi_hat: f64,
    pub p_int_tr_hat: f64,
    pub p_int_eq_hat: f64,
    pub p_eq_bound: f64,
    pub u_hat: f64,
    pub eta_tr_hat: f64,
    pub eta_tr_apparent_hat: f64,
    pub eta_eq_bound: f64,
    pub var_ph: f64,
}

impl PowerReport {
    pub fn new(spec: &PdpSpec, antennas: usize, rho: f64) -> Self {
        let gain = spec.gain;
        PowerReport {
            spec: *spec,
            antennas,
            rho,
            gain,
            p_s: p_signal(rho, antennas, gain),
            p_isi_hat: p_isi_hat(spec, rho),
            p_int_tr_hat: p_int_tr_hat(spec, rho),
            p_int_eq_hat: p_int_eq_hat(rho, gain),
            p_eq_bound: p_eq_bound(rho, antennas, gain),
            u_hat: usable_power_hat(spec, antennas),
            eta_tr_hat: eta_tr_hat(spec, antennas),
            eta_tr_apparent_hat: eta_tr_apparent_hat(spec, antennas, rho),
            eta_eq_bound: p_eq_bound(rho, antennas, gain) / p_int_eq_hat(rho, gain),
            var_ph: var_ph(spec, antennas),
        }
    }
}

/// `10 log10(x)`.
pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}
