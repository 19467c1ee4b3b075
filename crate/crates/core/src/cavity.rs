//! Cavity-QED rates and steady-state input-output branch amplitudes.
//!
//! A coherent input `|α⟩` on the in-coupling mirror leaves the system in four
//! coherent output modes: reflection `r`, transmission `t`, mirror scattering
//! `m` and atomic scattering `a`. Their amplitudes depend on whether the atom
//! couples to the cavity (`N = 1`, state ↑) or not (`N = 0`, state ↓).
//!
//! Every rate and detuning is a plain number in units of 2π·MHz.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{domain, Error, Result};

/// Vacuum speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const RATE_SUM_TOL: f64 = 1e-9;

/// Cavity-QED parameter set (all in 2π·MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    g: f64,
    kappa: f64,
    kappa_r: f64,
    kappa_t: f64,
    kappa_m: f64,
    gamma: f64,
    delta_a: f64,
    delta_c: f64,
}

impl CavityParams {
    /// Builds a parameter set; `kappa` must equal `kappa_r + kappa_t + kappa_m`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        g: f64,
        kappa: f64,
        kappa_r: f64,
        kappa_t: f64,
        kappa_m: f64,
        gamma: f64,
        delta_a: f64,
        delta_c: f64,
    ) -> Result<Self> {
        let all = [g, kappa, kappa_r, kappa_t, kappa_m, gamma, delta_a, delta_c];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(domain("cavity parameters must be finite"));
        }
        if [g, kappa, kappa_r, kappa_t, kappa_m, gamma].iter().any(|&v| v < 0.0) {
            return Err(domain("cavity rates must be nonnegative"));
        }
        if (kappa - (kappa_r + kappa_t + kappa_m)).abs() > RATE_SUM_TOL {
            return Err(domain(format!(
                "kappa = {kappa} differs from kappa_r + kappa_t + kappa_m = {}",
                kappa_r + kappa_t + kappa_m
            )));
        }
        Ok(Self {
            g,
            kappa,
            kappa_r,
            kappa_t,
            kappa_m,
            gamma,
            delta_a,
            delta_c,
        })
    }

    /// Resonant parameters with `kappa` derived from its three channels.
    pub fn from_channels(g: f64, kappa_r: f64, kappa_t: f64, kappa_m: f64, gamma: f64) -> Result<Self> {
        Self::new(g, kappa_r + kappa_t + kappa_m, kappa_r, kappa_t, kappa_m, gamma, 0.0, 0.0)
    }

    /// The experimental cavity, `(g, κ, κ_r, γ) = 2π·(7.8, 2.5, 2.3, 3) MHz`, on resonance.
    ///
    /// Only `κ_t + κ_m = 0.2` is known; the split is put entirely into
    /// transmission since no observable depends on it.
    pub fn paper() -> Self {
        Self::from_channels(7.8, 2.3, 0.2, 0.0, 3.0).expect("valid preset")
    }

    /// Fiber-resonator outlook: `g = 2π·240 MHz`, 39 µm length, 13.5 ppm
    /// parasitic loss per mirror, 1300 ppm out-coupling transmission.
    pub fn fiber() -> Self {
        fiber_params(39e-6, 13.5, 1300.0, 240.0, 3.0).expect("valid preset")
    }

    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn kappa_r(&self) -> f64 {
        self.kappa_r
    }
    pub fn kappa_t(&self) -> f64 {
        self.kappa_t
    }
    pub fn kappa_m(&self) -> f64 {
        self.kappa_m
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn delta_a(&self) -> f64 {
        self.delta_a
    }
    pub fn delta_c(&self) -> f64 {
        self.delta_c
    }

    pub fn with_detunings(mut self, delta_a: f64, delta_c: f64) -> Self {
        self.delta_a = delta_a;
        self.delta_c = delta_c;
        self
    }

    pub fn with_delta_a(mut self, delta_a: f64) -> Self {
        self.delta_a = delta_a;
        self
    }

    pub fn with_delta_c(mut self, delta_c: f64) -> Self {
        self.delta_c = delta_c;
        self
    }

    pub fn with_g(self, g: f64) -> Result<Self> {
        Self::new(
            g,
            self.kappa,
            self.kappa_r,
            self.kappa_t,
            self.kappa_m,
            self.gamma,
            self.delta_a,
            self.delta_c,
        )
    }

    /// Redistributes `κ − κ_r` between transmission and mirror scattering.
    pub fn with_loss_split(self, kappa_t: f64) -> Result<Self> {
        let rest = self.kappa - self.kappa_r;
        if !(0.0..=rest + RATE_SUM_TOL).contains(&kappa_t) {
            return Err(domain(format!("kappa_t = {kappa_t} outside [0, {rest}]")));
        }
        Self::new(
            self.g,
            self.kappa,
            self.kappa_r,
            kappa_t,
            (rest - kappa_t).max(0.0),
            self.gamma,
            self.delta_a,
            self.delta_c,
        )
    }

    /// Parses the flat `key = value` config format.
    ///
    /// Keys: `g, kappa, kappa_r, kappa_t, kappa_m, gamma, delta_a, delta_c`.
    /// `kappa` may be omitted and is then derived; missing detunings default
    /// to zero. Unknown keys are ignored so distillation settings can share
    /// the same file.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let table = parse_flat_config(text)?;
        let get = |key: &str| table.get(key).copied();
        let need = |key: &str| get(key).ok_or_else(|| Error::Config(format!("missing key `{key}`")));
        let kappa_r = need("kappa_r")?;
        let kappa_t = get("kappa_t").unwrap_or(0.0);
        let kappa_m = get("kappa_m").unwrap_or(0.0);
        let kappa = get("kappa").unwrap_or(kappa_r + kappa_t + kappa_m);
        Self::new(
            need("g")?,
            kappa,
            kappa_r,
            kappa_t,
            kappa_m,
            need("gamma")?,
            get("delta_a").unwrap_or(0.0),
            get("delta_c").unwrap_or(0.0),
        )
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.entries() {
            let _ = writeln!(out, "{key} = {value:?}");
        }
        out
    }

    pub(crate) fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("g", self.g),
            ("kappa", self.kappa),
            ("kappa_r", self.kappa_r),
            ("kappa_t", self.kappa_t),
            ("kappa_m", self.kappa_m),
            ("gamma", self.gamma),
            ("delta_a", self.delta_a),
            ("delta_c", self.delta_c),
        ]
    }
}

/// Parses `key = number` lines (TOML subset) into a map of floats.
pub(crate) fn parse_flat_config(text: &str) -> Result<std::collections::BTreeMap<String, f64>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut out = std::collections::BTreeMap::new();
    for (key, value) in table {
        let number = match value {
            toml::Value::Float(f) => f,
            toml::Value::Integer(i) => i as f64,
            other => {
                return Err(Error::Config(format!(
                    "key `{key}` must be a number, found {}",
                    other.type_str()
                )))
            }
        };
        out.insert(key, number);
    }
    Ok(out)
}

/// Coherent output amplitudes for one atomic branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAmplitudes {
    pub r: Complex64,
    pub t: Complex64,
    pub m: Complex64,
    pub a: Complex64,
    pub alpha: Complex64,
    pub coupled: bool,
}

impl BranchAmplitudes {
    /// Loss-mode amplitudes `(t, m, a)`.
    pub fn loss_modes(&self) -> [Complex64; 3] {
        [self.t, self.m, self.a]
    }

    /// Total output intensity `|r|² + |t|² + |m|² + |a|²`.
    pub fn output_power(&self) -> f64 {
        self.r.norm_sqr() + self.loss_modes().iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

/// Steady-state input-output amplitudes for the coupling (`coupled = true`,
/// `N = 1`) or non-coupling (`N = 0`) atomic state.
pub fn branch_amplitudes(params: &CavityParams, coupled: bool, alpha: Complex64) -> BranchAmplitudes {
    let i = Complex64::i();
    let n = if coupled { 1.0 } else { 0.0 };
    let g2 = n * params.g * params.g;
    let cav = i * params.delta_c + params.kappa;
    let atom = i * params.delta_a + params.gamma;
    let denom = g2 + cav * atom;
    let r = (g2 + (cav - 2.0 * params.kappa_r) * atom) / denom;
    let t = 2.0 * (params.kappa_r * params.kappa_t).sqrt() * atom / denom;
    let m = 2.0 * (params.kappa_r * params.kappa_m).sqrt() * atom / denom;
    let a = Complex64::new(2.0 * (params.kappa_r * params.gamma).sqrt() * n.sqrt() * params.g, 0.0) / denom;
    BranchAmplitudes {
        r: r * alpha,
        t: t * alpha,
        m: m * alpha,
        a: a * alpha,
        alpha,
        coupled,
    }
}

fn require_decay_rates(params: &CavityParams) -> Result<()> {
    if params.kappa <= 0.0 || params.gamma <= 0.0 {
        return Err(domain("cooperativity needs kappa > 0 and gamma > 0"));
    }
    Ok(())
}

/// Cooperativity `C = g²/(2κγ)`.
pub fn cooperativity(params: &CavityParams) -> Result<f64> {
    require_decay_rates(params)?;
    Ok(params.g * params.g / (2.0 * params.kappa * params.gamma))
}

/// Coherence retention factor `ξ = (κ_r/κ)·g²/(g² + κγ)`.
pub fn xi(params: &CavityParams) -> Result<f64> {
    require_decay_rates(params)?;
    let g2 = params.g * params.g;
    Ok(params.kappa_r / params.kappa * g2 / (g2 + params.kappa * params.gamma))
}

/// Same quantity through the cooperativity, `(κ_r/κ)·2C/(2C + 1)`.
pub fn xi_from_cooperativity(params: &CavityParams) -> Result<f64> {
    let c = cooperativity(params)?;
    Ok(params.kappa_r / params.kappa * 2.0 * c / (2.0 * c + 1.0))
}

/// Largest single-photon fidelity reachable for a weak coherent input.
pub fn f1_max(params: &CavityParams) -> Result<f64> {
    xi(params)
}

/// Converts a fractional round-trip loss into a field decay rate in 2π·MHz,
/// `κ = c·ℓ/(4L)`.
pub fn decay_rate_from_loss(length_m: f64, loss_fraction: f64) -> f64 {
    SPEED_OF_LIGHT * loss_fraction / (4.0 * length_m) / (2.0 * std::f64::consts::PI * 1e6)
}

/// Cavity rates of a fiber Fabry–Pérot resonator from its geometry.
///
/// `κ_r` comes from the out-coupler transmission, `κ_m` from the parasitic
/// loss of both mirrors, and `κ_t = 0`. Losses are in ppm, rates in 2π·MHz.
pub fn fiber_params(
    length_m: f64,
    parasitic_loss_per_mirror_ppm: f64,
    outcoupler_transmission_ppm: f64,
    g: f64,
    gamma: f64,
) -> Result<CavityParams> {
    if !(length_m > 0.0) {
        return Err(domain(format!("cavity length {length_m} must be positive")));
    }
    if parasitic_loss_per_mirror_ppm < 0.0 || !(outcoupler_transmission_ppm > 0.0) {
        return Err(domain("mirror losses must be nonnegative and transmission positive"));
    }
    let kappa_r = decay_rate_from_loss(length_m, outcoupler_transmission_ppm * 1e-6);
    let kappa_m = decay_rate_from_loss(length_m, 2.0 * parasitic_loss_per_mirror_ppm * 1e-6);
    CavityParams::from_channels(g, kappa_r, 0.0, kappa_m, gamma)
}
