//! Indoor power-delay profiles and Rayleigh CIR realizations.
//!
//! Two exponential PDP families are supported: a single scattering cluster
//! and two overlapping clusters. Each profile is normalized so that the
//! expected CIR power of every antenna equals the channel gain `gain`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default total channel gain used by experiment configs.
///
/// Every reported ratio is invariant to this value.
pub const DEFAULT_GAIN: f64 = 1e-2;

/// Shape of the power-delay profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Clusters {
    /// Single exponentially decaying cluster with delay spread `sigma` (s).
    One { sigma: f64 },
    /// First cluster over taps `[0, l2)` with spread `sigma1`, second cluster
    /// starting at tap `l1` with spread `sigma2` and relative power `gamma`.
    Two { sigma1: f64, sigma2: f64, l1: usize, l2: usize, gamma: f64 },
}

/// Parameterization of a tapped-delay-line channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdpSpec {
    /// Tap spacing in seconds.
    pub ts: f64,
    /// CIR length in taps.
    pub len: usize,
    /// Total expected channel gain per antenna.
    pub gain: f64,
    pub clusters: Clusters,
}

/// Table of built-in presets: `(name, ts, len, l1, l2)`.
const PRESET_TABLE: [(&str, f64, usize, usize, usize); 3] =
    [("ts2.5", 2.5e-9, 33, 9, 17), ("ts5", 5e-9, 17, 5, 9), ("ts10", 10e-9, 9, 2, 5)];

const PRESET_SIGMA: f64 = 8e-9;
const PRESET_SIGMA2: f64 = 14e-9;
const PRESET_GAMMA: f64 = 0.4786;

impl PdpSpec {
    pub fn one_cluster(ts: f64, sigma: f64, len: usize, gain: f64) -> Self {
        PdpSpec { ts, len, gain, clusters: Clusters::One { sigma } }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn two_cluster(
        ts: f64,
        sigma1: f64,
        sigma2: f64,
        len: usize,
        l1: usize,
        l2: usize,
        gamma: f64,
        gain: f64,
    ) -> Self {
        PdpSpec { ts, len, gain, clusters: Clusters::Two { sigma1, sigma2, l1, l2, gamma } }
    }

    /// Names accepted by [`PdpSpec::preset`].
    pub fn preset_names() -> Vec<String> {
        PRESET_TABLE.iter().flat_map(|(ts, ..)| [format!("{ts}-model1"), format!("{ts}-model2")]).collect()
    }

    /// Built-in Table-I style preset, e.g. `"ts2.5-model2"`, with the given gain.
    pub fn preset(name: &str, gain: f64) -> Result<Self> {
        let (ts_name, model) =
            name.rsplit_once('-').ok_or_else(|| Error::InvalidConfig(format!("unknown preset {name:?}")))?;
        let &(_, ts, len, l1, l2) = PRESET_TABLE
            .iter()
            .find(|row| row.0 == ts_name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset {name:?}")))?;
        match model {
            "model1" => Ok(Self::one_cluster(ts, PRESET_SIGMA, len, gain)),
            "model2" => Ok(Self::two_cluster(ts, PRESET_SIGMA, PRESET_SIGMA2, len, l1, l2, PRESET_GAMMA, gain)),
            _ => Err(Error::InvalidConfig(format!("unknown preset {name:?}"))),
        }
    }

    /// `1` for a single cluster, `2` for two clusters.
    pub fn model_number(&self) -> u8 {
        match self.clusters {
            Clusters::One { .. } => 1,
            Clusters::Two { .. } => 2,
        }
    }

    /// Lists every invariant violation; empty when the spec is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.ts) {
            out.push(format!("tap spacing must be positive, got {}", self.ts));
        }
        if self.len < 1 {
            out.push("CIR length must be at least 1".to_string());
        }
        if !positive(self.gain) {
            out.push(format!("channel gain must be positive, got {}", self.gain));
        }
        match self.clusters {
            Clusters::One { sigma } => {
                if !positive(sigma) {
                    out.push(format!("sigma must be positive, got {sigma}"));
                }
            }
            Clusters::Two { sigma1, sigma2, l1, l2, gamma } => {
                if !positive(sigma1) {
                    out.push(format!("sigma1 must be positive, got {sigma1}"));
                }
                if !positive(sigma2) {
                    out.push(format!("sigma2 must be positive, got {sigma2}"));
                }
                if !positive(gamma) {
                    out.push(format!("gamma must be positive, got {gamma}"));
                }
                if !(0 < l1 && l1 < l2 && l2 <= self.len) {
                    out.push(format!("cluster taps must satisfy 0 < L1 < L2 <= L, got L1={l1} L2={l2} L={}", self.len));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v.join("; ")))
        }
    }

    /// Unnormalized profile shape (the PDP divided by `A`).
    pub(crate) fn shape(&self) -> Vec<f64> {
        let ts = self.ts;
        match self.clusters {
            Clusters::One { sigma } => (0..self.len).map(|n| (-(n as f64) * ts / sigma).exp()).collect(),
            Clusters::Two { sigma1, sigma2, l1, l2, gamma } => (0..self.len)
                .map(|n| {
                    let first = if n < l2 { (-(n as f64) * ts / sigma1).exp() } else { 0.0 };
                    let second = if n >= l1 { gamma * (-((n - l1) as f64) * ts / sigma2).exp() } else { 0.0 };
                    first + second
                })
                .collect(),
        }
    }
}

/// Per-tap expected power `E[|h[n]|^2]` and the normalization constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpProfile {
    pub power: Vec<f64>,
    pub norm: f64,
}

/// Evaluates the normalized power-delay profile of `spec`.
pub fn pdp_profile(spec: &PdpSpec) -> Result<PdpProfile> {
    spec.validate()?;
    let shape = spec.shape();
    let norm = spec.gain / shape.iter().sum::<f64>();
    Ok(PdpProfile { power: shape.iter().map(|s| s * norm).collect(), norm })
}

/// One realization of the `M` antenna-to-receiver CIRs.
#[derive(Debug, Clone, PartialEq)]
pub struct CirSet {
    /// `taps[i][n]` is tap `n` of antenna `i`.
    pub taps: Vec<Vec<Complex64>>,
    pub spec: PdpSpec,
}

impl CirSet {
    /// Wraps explicit taps; every antenna must have `spec.len` taps.
    pub fn from_taps(taps: Vec<Vec<Complex64>>, spec: PdpSpec) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidConfig("at least one antenna is required".into()));
        }
        if let Some(bad) = taps.iter().find(|h| h.len() != spec.len) {
            return Err(Error::InvalidConfig(format!("CIR has {} taps, spec says {}", bad.len(), spec.len)));
        }
        Ok(CirSet { taps, spec })
    }

    pub fn antennas(&self) -> usize {
        self.taps.len()
    }

    pub fn len(&self) -> usize {
        self.spec.len
    }

    pub fn is_empty(&self) -> bool {
        self.spec.len == 0
    }
}

/// Draws `antennas` independent Rayleigh CIRs following `spec`.
///
/// Each tap is zero-mean circular complex Gaussian with variance `p[n]`.
pub fn draw_cir<R: Rng + ?Sized>(spec: &PdpSpec, antennas: usize, rng: &mut R) -> Result<CirSet> {
    let profile = pdp_profile(spec)?;
    draw_with_profile(spec, &profile, antennas, rng)
}

pub(crate) fn draw_with_profile<R: Rng + ?Sized>(
    spec: &PdpSpec,
    profile: &PdpProfile,
    antennas: usize,
    rng: &mut R,
) -> Result<CirSet> {
    if antennas == 0 {
        return Err(Error::InvalidConfig("at least one antenna is required".into()));
    }
    let taps = (0..antennas)
        .map(|_| {
            profile
                .power
                .iter()
                .map(|&p| {
                    let s = (p / 2.0).sqrt();
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * s, im * s)
                })
                .collect()
        })
        .collect();
    Ok(CirSet { taps, spec: *spec })
}

/// Total channel power `P_h` summed over antennas and taps.
pub fn channel_power(cirs: &CirSet) -> Result<f64> {
    let p: f64 = cirs.taps.iter().map(|h| crate::dsp::energy(h)).sum();
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::DegenerateChannel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{stream, Purpose};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_tap_takes_all_power() {
        let p = pdp_profile(&PdpSpec::one_cluster(1e-9, 5e-9, 1, 0.3)).unwrap();
        assert_eq!(p.power, vec![0.3]);
        assert!((p.norm - 0.3).abs() < 1e-15);
    }

    #[test]
    fn two_tap_half_decay() {
        let ts = 1e-9;
        let sigma = ts / std::f64::consts::LN_2;
        let g = 0.09;
        let p = pdp_profile(&PdpSpec::one_cluster(ts, sigma, 2, g)).unwrap();
        assert!((p.power[0] - 2.0 * g / 3.0).abs() < 1e-15);
        assert!((p.power[1] - g / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_cluster_preset_profile() {
        let spec = PdpSpec::preset("ts2.5-model2", 0.01).unwrap();
        let p = pdp_profile(&spec).unwrap();
        assert_eq!(p.power.len(), 33);
        let total: f64 = p.power.iter().sum();
        assert!((total - 0.01).abs() < 1e-12 * 0.01);
        // Branch structure: single branch before L1, both on [L1, L2), second after.
        let a = p.norm;
        let e1 = |n: usize| (-(n as f64) * 2.5 / 8.0).exp();
        let e2 = |n: usize| 0.4786 * (-((n - 9) as f64) * 2.5 / 14.0).exp();
        for n in 0..33 {
            let expect = match n {
                0..=8 => a * e1(n),
                9..=16 => a * (e1(n) + e2(n)),
                _ => a * e2(n),
            };
            assert!((p.power[n] - expect).abs() <= 1e-15 * expect, "tap {n}");
        }
    }

    #[test]
    fn preset_catalog() {
        let names = PdpSpec::preset_names();
        assert_eq!(names.len(), 6);
        for name in &names {
            let spec = PdpSpec::preset(name, DEFAULT_GAIN).unwrap();
            assert!(spec.violations().is_empty(), "{name}");
        }
        let ts10 = PdpSpec::preset("ts10-model2", 1.0).unwrap();
        assert_eq!(ts10.len, 9);
        assert_eq!(ts10.clusters, Clusters::Two { sigma1: 8e-9, sigma2: 14e-9, l1: 2, l2: 5, gamma: 0.4786 });
        assert!(PdpSpec::preset("ts7-model1", 1.0).is_err());
        assert!(PdpSpec::preset("ts5-model3", 1.0).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(pdp_profile(&PdpSpec::one_cluster(0.0, 1.0, 4, 1.0)).is_err());
        assert!(pdp_profile(&PdpSpec::one_cluster(1.0, -1.0, 4, 1.0)).is_err());
        assert!(pdp_profile(&PdpSpec::one_cluster(1.0, 1.0, 0, 1.0)).is_err());
        assert!(pdp_profile(&PdpSpec::one_cluster(1.0, 1.0, 4, 0.0)).is_err());
        let bad_order = PdpSpec::two_cluster(1.0, 1.0, 1.0, 10, 5, 5, 0.5, 1.0);
        assert!(pdp_profile(&bad_order).is_err());
        let too_long = PdpSpec::two_cluster(1.0, 1.0, 1.0, 10, 2, 11, 0.5, 1.0);
        assert!(pdp_profile(&too_long).is_err());
        let zero_l1 = PdpSpec::two_cluster(1.0, 1.0, 1.0, 10, 0, 4, 0.5, 1.0);
        assert!(pdp_profile(&zero_l1).is_err());
        assert!(PdpSpec::two_cluster(1.0, 1.0, 1.0, 10, 2, 4, 0.0, 1.0).validate().is_err());
    }

    #[test]
    fn channel_power_cases() {
        let one = PdpSpec::one_cluster(1.0, 1.0, 2, 1.0);
        let cirs = CirSet::from_taps(vec![vec![c(1.0, 0.0), c(0.0, 1.0)]], one).unwrap();
        assert_eq!(channel_power(&cirs).unwrap(), 2.0);
        let single = PdpSpec::one_cluster(1.0, 1.0, 1, 1.0);
        let cirs = CirSet::from_taps(vec![vec![c(1.0, 0.0)], vec![c(-1.0, 0.0)]], single).unwrap();
        assert_eq!(channel_power(&cirs).unwrap(), 2.0);
        let zero = CirSet::from_taps(vec![vec![c(0.0, 0.0); 2]; 3], one).unwrap();
        assert_eq!(channel_power(&zero), Err(Error::DegenerateChannel));
    }

    #[test]
    fn draws_are_reproducible() {
        let spec = PdpSpec::preset("ts5-model2", DEFAULT_GAIN).unwrap();
        let a = draw_cir(&spec, 4, &mut stream(11, 42, 0, Purpose::Channel)).unwrap();
        // Interleave unrelated draws; the keyed stream must not care.
        let _ = draw_cir(&spec, 4, &mut stream(11, 41, 0, Purpose::Channel)).unwrap();
        let b = draw_cir(&spec, 4, &mut stream(11, 42, 0, Purpose::Channel)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.antennas(), 4);
        assert_eq!(a.len(), 17);
    }

    #[test]
    fn sample_statistics_match_profile() {
        let spec = PdpSpec::preset("ts10-model1", DEFAULT_GAIN).unwrap();
        let profile = pdp_profile(&spec).unwrap();
        let m = 2;
        let runs = 100_000u64;
        let l = spec.len;
        let mut pow = vec![0.0; l];
        let mut pow_sq = vec![0.0; l];
        let mut mean = vec![Complex64::new(0.0, 0.0); l];
        let mut cross = Complex64::new(0.0, 0.0);
        let mut cross_sq = 0.0;
        let mut ph = 0.0;
        let mut ph_sq = 0.0;
        for r in 0..runs {
            let cirs = draw_cir(&spec, m, &mut stream(3, r, 0, Purpose::Channel)).unwrap();
            let h = &cirs.taps[0];
            for n in 0..l {
                let p = h[n].norm_sqr();
                pow[n] += p;
                pow_sq[n] += p * p;
                mean[n] += h[n];
            }
            let x = cirs.taps[0][0] * cirs.taps[1][0].conj();
            cross += x;
            cross_sq += x.norm_sqr();
            let p = channel_power(&cirs).unwrap();
            ph += p;
            ph_sq += p * p;
        }
        let nr = runs as f64;
        for n in 0..l {
            let m1 = pow[n] / nr;
            let se = ((pow_sq[n] / nr - m1 * m1) / nr).sqrt();
            assert!((m1 - profile.power[n]).abs() < 3.0 * se, "tap {n} power");
            // Real and imaginary parts each have variance p/2.
            let mse = (profile.power[n] / 2.0 / nr).sqrt();
            let mu = mean[n] / nr;
            assert!(mu.re.abs() < 3.0 * mse && mu.im.abs() < 3.0 * mse, "tap {n} mean");
        }
        let cx = cross / nr;
        let cse = (cross_sq / nr / nr / 2.0).sqrt();
        assert!(cx.re.abs() < 3.0 * cse && cx.im.abs() < 3.0 * cse, "cross-correlation {cx}");
        let mp = ph / nr;
        let pse = ((ph_sq / nr - mp * mp) / nr).sqrt();
        assert!((mp - m as f64 * DEFAULT_GAIN).abs() < 3.0 * pse);
    }

    proptest! {
        #[test]
        fn profiles_sum_to_gain(
            ts in 0.1f64..20.0,
            s1 in 0.5f64..30.0,
            s2 in 0.5f64..30.0,
            len in 2usize..80,
            gamma in 0.01f64..3.0,
            gain in 1e-6f64..1.0,
            f1 in 0.0f64..1.0,
            f2 in 0.0f64..1.0,
        ) {
            let one = pdp_profile(&PdpSpec::one_cluster(ts, s1, len, gain)).unwrap();
            let l1 = 1 + ((len - 2) as f64 * f1) as usize;
            let l2 = l1 + 1 + ((len - l1 - 1) as f64 * f2) as usize;
            let two = pdp_profile(&PdpSpec::two_cluster(ts, s1, s2, len, l1, l2, gamma, gain)).unwrap();
            for p in [one, two] {
                let total: f64 = p.power.iter().sum();
                prop_assert!((total - gain).abs() < 1e-12 * gain);
                prop_assert!(p.power.iter().all(|&v| v >= 0.0));
            }
        }
    }
}
