//! Rate-constant expressions, free of any state-vector bookkeeping.

use std::f64::consts::PI;

use crate::config::ProcessConfig;
use crate::state::{EnvironmentalState, BOLTZMANN, GAS_CONSTANT};

/// `k = A·exp(−Ea/(k_B T))·(T/D)^B·(1 + E·P)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrheniusParams {
    pub a: f64,
    /// J
    pub ea: f64,
    pub b: f64,
    /// K
    pub d: f64,
    /// Pa⁻¹
    pub e: f64,
}

impl ArrheniusParams {
    pub fn new(a: f64) -> Self {
        Self {
            a,
            ea: 0.0,
            b: 0.0,
            d: 300.0,
            e: 0.0,
        }
    }

    /// `A·exp(C/T)·(T/300)^B`, the form used for fall-off sub-constants.
    pub fn from_c(a: f64, b: f64, c: f64) -> Self {
        Self {
            a,
            ea: -c * BOLTZMANN,
            b,
            d: 300.0,
            e: 0.0,
        }
    }

    pub fn from_config(p: &ProcessConfig) -> Self {
        let ea = if p.has_param("C") {
            -p.param("C") * BOLTZMANN
        } else {
            p.param("Ea")
        };
        Self {
            a: p.param("A"),
            ea,
            b: p.param("B"),
            d: p.param("D"),
            e: p.param("E"),
        }
    }

    /// Sub-constant `prefix_A`, `prefix_B`, `prefix_C` of a composite expression.
    pub fn from_prefixed(p: &ProcessConfig, prefix: &str) -> Self {
        Self::from_c(
            p.param(&format!("{prefix}_A")),
            p.param(&format!("{prefix}_B")),
            p.param(&format!("{prefix}_C")),
        )
    }

    pub fn rate_constant(&self, temperature: f64, pressure: f64) -> f64 {
        let mut k = self.a * (-self.ea / (BOLTZMANN * temperature)).exp();
        if self.b != 0.0 {
            k *= (temperature / self.d).powf(self.b);
        }
        if self.e != 0.0 {
            k *= 1.0 + self.e * pressure;
        }
        k
    }
}

pub fn arrhenius_rate_constant(p: &ArrheniusParams, env: &EnvironmentalState) -> f64 {
    p.rate_constant(env.temperature, env.pressure)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TroeParams {
    pub k0: ArrheniusParams,
    pub kinf: ArrheniusParams,
    pub fc: f64,
    pub n: f64,
}

impl TroeParams {
    pub fn from_config(p: &ProcessConfig) -> Self {
        Self {
            k0: ArrheniusParams::from_prefixed(p, "k0"),
            kinf: ArrheniusParams::from_prefixed(p, "kinf"),
            fc: p.param("Fc"),
            n: p.param("N"),
        }
    }
}

/// Fall-off rate constant; `m` is the air number density in cm⁻³.
pub fn troe_rate_constant(p: &TroeParams, temperature: f64, m: f64) -> f64 {
    let k0m = p.k0.rate_constant(temperature, 0.0) * m;
    let kinf = p.kinf.rate_constant(temperature, 0.0);
    if k0m <= 0.0 {
        return 0.0;
    }
    let ratio = k0m / kinf;
    let l = ratio.log10();
    k0m / (1.0 + ratio) * p.fc.powf(1.0 / (1.0 + l * l / p.n))
}

/// `k = k1 + k2·[M]`
pub fn custom_h2o2_rate_constant(
    k1: &ArrheniusParams,
    k2: &ArrheniusParams,
    temperature: f64,
    m: f64,
) -> f64 {
    k1.rate_constant(temperature, 0.0) + k2.rate_constant(temperature, 0.0) * m
}

/// `k = k0 + k3[M]/(1 + k3[M]/k2)`
pub fn custom_oh_hno3_rate_constant(
    k0: &ArrheniusParams,
    k2: &ArrheniusParams,
    k3: &ArrheniusParams,
    temperature: f64,
    m: f64,
) -> f64 {
    let k3m = k3.rate_constant(temperature, 0.0) * m;
    let k2v = k2.rate_constant(temperature, 0.0);
    k0.rate_constant(temperature, 0.0) + k3m / (1.0 + k3m / k2v)
}

/// `k = A·exp(−B/T)·exp(C/T³)`
pub fn wennberg_tunneling_rate_constant(a: f64, b: f64, c: f64, temperature: f64) -> f64 {
    a * (-b / temperature).exp() * (c / temperature.powi(3)).exp()
}

/// Nitrate-forming fall-off term A(T, [M], n) of the RO2 + NO branching ratio.
pub fn wennberg_a(temperature: f64, m: f64, n: f64) -> f64 {
    let k0m = 2.0e-22 * n.exp() * m;
    let kinf = 0.43 * (temperature / 298.0).powi(-8);
    let ratio = k0m / kinf;
    let l = ratio.log10();
    k0m / (1.0 + ratio) * 0.41_f64.powf(1.0 / (1.0 + l * l))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WennbergNoRo2Params {
    pub x: f64,
    pub y: f64,
    pub a0: f64,
    pub n: f64,
}

impl WennbergNoRo2Params {
    pub fn from_config(p: &ProcessConfig) -> Self {
        Self {
            x: p.param("X"),
            y: p.param("Y"),
            a0: p.param("a0"),
            n: p.param("n"),
        }
    }
}

/// Returns `(k_nitrate, k_alkoxy)`.
pub fn wennberg_no_ro2_rate_constants(
    p: &WennbergNoRo2Params,
    temperature: f64,
    m: f64,
) -> (f64, f64) {
    let overall = p.x * (-p.y / temperature).exp();
    let a = wennberg_a(temperature, m, p.n);
    let z = wennberg_a(293.0, 2.45e19, p.n) * (1.0 - p.a0) / p.a0;
    let nitrate = a / (a + z);
    (overall * nitrate, overall * (1.0 - nitrate))
}

/// Henry's law constant at `T`, M Pa⁻¹.
pub fn henrys_law_constant(h298: f64, c: f64, temperature: f64) -> f64 {
    h298 * (c * (1.0 / temperature - 1.0 / 298.0)).exp()
}

/// `K_eq = A·exp(C(1/T − 1/298))`
pub fn aqueous_equilibrium_constant(a: f64, c: f64, temperature: f64) -> f64 {
    a * (c * (1.0 / temperature - 1.0 / 298.0)).exp()
}

/// Saturation vapour pressure (atm) from `log10 p = B1/T + B2 + B3·T + B4·ln T`.
pub fn simpol_vapor_pressure(b: [f64; 4], temperature: f64) -> f64 {
    let log10p = b[0] / temperature + b[1] + b[2] * temperature + b[3] * temperature.ln();
    10f64.powf(log10p)
}

/// Mean molecular speed, m s⁻¹.
pub fn mean_molecular_speed(temperature: f64, molecular_weight: f64) -> f64 {
    (8.0 * GAS_CONSTANT * temperature / (PI * molecular_weight)).sqrt()
}

/// Transition-regime correction and its derivative with respect to Kn.
pub fn fuchs_sutugin(kn: f64, alpha: f64) -> (f64, f64) {
    let num = 0.75 * alpha * (1.0 + kn);
    let den = kn * kn + kn + 0.283 * kn * alpha + 0.75 * alpha;
    let dnum = 0.75 * alpha;
    let dden = 2.0 * kn + 1.0 + 0.283 * alpha;
    (num / den, (dnum * den - num * dden) / (den * den))
}

/// Per-particle condensation rate `4π r D f_fs(Kn, α)` (m³ s⁻¹) and its radius derivative.
/// `mean_free_path` is `3 D / c̄`.
pub fn condensation_rate(
    radius: f64,
    diffusion: f64,
    mean_free_path: f64,
    alpha: f64,
) -> (f64, f64) {
    let kn = mean_free_path / radius;
    let (f, df) = fuchs_sutugin(kn, alpha);
    let kc = 4.0 * PI * radius * diffusion * f;
    (kc, 4.0 * PI * diffusion * (f - kn * df))
}
