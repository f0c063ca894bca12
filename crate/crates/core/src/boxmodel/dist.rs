//! Initial aerosol distributions: lognormal modes, their discretisation into
//! size bins, and sampling into computational particles.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("need at least one bin and 0 < d_min < d_max (got n = {n_bins}, {d_min} .. {d_max})")]
    BadBins {
        n_bins: usize,
        d_min: f64,
        d_max: f64,
    },
    #[error("particle count must be positive")]
    NoParticles,
    #[error("no modes to sample from")]
    NoModes,
    #[error("mode `{0}`: number, diameter and spread must be positive and finite, with GSD > 1")]
    BadMode(String),
    #[error("mode `{name}`: composition fractions sum to {sum}, expected 1")]
    Composition { name: String, sum: f64 },
}

/// A lognormal number distribution with a fixed composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub name: String,
    /// m⁻³
    #[serde(rename = "number_m3")]
    pub number: f64,
    /// Geometric mean diameter, m.
    #[serde(rename = "gmd_m")]
    pub gmd: f64,
    pub gsd: f64,
    /// Mass fractions by aerosol species.
    pub composition: BTreeMap<String, f64>,
}

impl Mode {
    pub fn check(&self) -> Result<(), DistError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(self.number) && ok(self.gmd) && self.gsd.is_finite() && self.gsd > 1.0) {
            return Err(DistError::BadMode(self.name.clone()));
        }
        let sum: f64 = self.composition.values().sum();
        if (sum - 1.0).abs() > 1e-9 || self.composition.values().any(|f| *f < 0.0) {
            return Err(DistError::Composition {
                name: self.name.clone(),
                sum,
            });
        }
        Ok(())
    }

    /// Mass per unit volume of particle material, given species densities.
    pub fn density(&self, density_of: &dyn Fn(&str) -> f64) -> f64 {
        let inv: f64 = self
            .composition
            .iter()
            .map(|(s, f)| f / density_of(s))
            .sum();
        1.0 / inv
    }

    /// Total particle volume per m³ of air.
    pub fn volume_concentration(&self) -> f64 {
        let l = self.gsd.ln();
        self.number * PI / 6.0 * self.gmd.powi(3) * (4.5 * l * l).exp()
    }

    /// Median diameter of the mass (volume) distribution.
    pub fn mass_median_diameter(&self) -> f64 {
        let l = self.gsd.ln();
        self.gmd * (3.0 * l * l).exp()
    }
}

/// Log-spaced bin edges; `n_bins + 1` values.
pub fn bin_edges(n_bins: usize, d_min: f64, d_max: f64) -> Vec<f64> {
    let (a, b) = (d_min.ln(), d_max.ln());
    (0..=n_bins)
        .map(|i| (a + (b - a) * i as f64 / n_bins as f64).exp())
        .collect()
}

/// Default sectional range: three geometric standard deviations below the
/// smallest mode and above the largest.
pub fn default_bin_range(modes: &[Mode]) -> Option<(f64, f64)> {
    let lo = modes
        .iter()
        .map(|m| m.gmd / m.gsd.powi(3))
        .fold(f64::INFINITY, f64::min);
    let hi = modes
        .iter()
        .map(|m| m.gmd * m.gsd.powi(3))
        .fold(0.0, f64::max);
    (lo.is_finite() && hi > lo).then_some((lo, hi))
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / SQRT_2))
}

/// Fraction of a mode's volume in each bin. Mass below the first edge is
/// added to the first bin and mass above the last edge to the last bin, so
/// the fractions sum to one.
pub fn mode_volume_fractions(mode: &Mode, edges: &[f64]) -> Vec<f64> {
    let dm = mode.mass_median_diameter().ln();
    let s = mode.gsd.ln();
    let n = edges.len() - 1;
    let cdf: Vec<f64> = edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if i == 0 {
                0.0
            } else if i == n {
                1.0
            } else {
                std_normal_cdf((e.ln() - dm) / s)
            }
        })
        .collect();
    cdf.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Per-bin species mass (kg m⁻³) for every mode, plus the bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMass {
    pub edges: Vec<f64>,
    pub mass: Vec<BTreeMap<String, f64>>,
}

impl BinnedMass {
    /// Geometric midpoint of each bin.
    pub fn mid_diameters(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| (w[0] * w[1]).sqrt())
            .collect()
    }

    pub fn total(&self, species: &str) -> f64 {
        self.mass.iter().filter_map(|m| m.get(species)).sum()
    }
}

pub fn discretize_modes_to_bins(
    modes: &[Mode],
    n_bins: usize,
    d_min: f64,
    d_max: f64,
    density_of: &dyn Fn(&str) -> f64,
) -> Result<BinnedMass, DistError> {
    if n_bins == 0 || !(d_min > 0.0 && d_max > d_min && d_max.is_finite()) {
        return Err(DistError::BadBins {
            n_bins,
            d_min,
            d_max,
        });
    }
    for m in modes {
        m.check()?;
    }
    let edges = bin_edges(n_bins, d_min, d_max);
    let mut mass = vec![BTreeMap::new(); n_bins];
    for m in modes {
        let total = m.volume_concentration() * m.density(density_of);
        for (bin, frac) in mass.iter_mut().zip(mode_volume_fractions(m, &edges)) {
            for (s, f) in &m.composition {
                *bin.entry(s.clone()).or_insert(0.0) += total * frac * f;
            }
        }
    }
    Ok(BinnedMass { edges, mass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    /// m
    pub diameter: f64,
    /// Real particles per m³ this one stands for.
    pub weight: f64,
    /// Species mass per particle, kg.
    pub mass: BTreeMap<String, f64>,
}

/// How computational particles are shared out between modes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticleWeighting {
    /// Counts proportional to number concentration; every particle weighs `N_total / n`.
    #[default]
    Equal,
    /// Equal counts per mode; particles of mode `k` weigh `N_k / n_k`.
    PerMode,
}

/// Draw `n` equally weighted particles from the number-weighted mixture of `modes`.
pub fn sample_particles(
    modes: &[Mode],
    n: usize,
    seed: u64,
    density_of: &dyn Fn(&str) -> f64,
) -> Result<Vec<Particle>, DistError> {
    sample_particles_weighted(modes, n, seed, ParticleWeighting::Equal, density_of)
}

/// Draw `n` particles from `modes`.
///
/// Each mode receives its share of `n` by largest remainder, and its
/// diameters come from stratified inverse-CDF sampling (one uniform draw in
/// each of the mode's equal-probability strata).
pub fn sample_particles_weighted(
    modes: &[Mode],
    n: usize,
    seed: u64,
    weighting: ParticleWeighting,
    density_of: &dyn Fn(&str) -> f64,
) -> Result<Vec<Particle>, DistError> {
    if n == 0 {
        return Err(DistError::NoParticles);
    }
    if modes.is_empty() {
        return Err(DistError::NoModes);
    }
    for m in modes {
        m.check()?;
    }
    let n_total: f64 = modes.iter().map(|m| m.number).sum();
    let shares: Vec<f64> = match weighting {
        ParticleWeighting::Equal => modes.iter().map(|m| m.number / n_total).collect(),
        ParticleWeighting::PerMode => vec![1.0 / modes.len() as f64; modes.len()],
    };
    let counts = largest_remainder(&shares, n);
    let std = Normal::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for (m, &k) in modes.iter().zip(&counts) {
        let weight = match weighting {
            ParticleWeighting::Equal => n_total / n as f64,
            ParticleWeighting::PerMode => m.number / k as f64,
        };
        let rho = m.density(density_of);
        let s = m.gsd.ln();
        for j in 0..k {
            let u = (j as f64 + rng.random::<f64>()) / k as f64;
            let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
            let d = m.gmd * (s * std.inverse_cdf(u)).exp();
            let total = rho * PI / 6.0 * d.powi(3);
            out.push(Particle {
                diameter: d,
                weight,
                mass: m
                    .composition
                    .iter()
                    .map(|(sp, f)| (sp.clone(), total * f))
                    .collect(),
            });
        }
    }
    Ok(out)
}

fn largest_remainder(shares: &[f64], n: usize) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}
