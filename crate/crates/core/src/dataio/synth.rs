//! Synthetic QoS corpus with known ground truth.
//!
//! Users and services sit in cities on the unit square; cities belong to
//! countries and each site has an AS drawn from its country's providers. The
//! clean response time is
//!
//! `softplus(bias + u·v + distance_weight · |city_u - city_s| + as_u + as_s)`
//!
//! and the observed value multiplies it by lognormal noise. Feature
//! corruption and missing service features are applied after labelling.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{inject_feature_noise, QoSRecord};
use crate::autodiff::softplus;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_services: usize,
    pub latent_dim: usize,
    pub noise_user_fraction: f64,
    pub missing_fraction: f64,
    pub seed: u64,
    pub countries: usize,
    pub cities_per_country: usize,
    pub as_per_country: usize,
    /// Log-scale standard deviation of the multiplicative observation noise.
    pub obs_noise: f64,
    pub bias: f64,
    pub distance_weight: f64,
    pub as_effect: f64,
    pub factor_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 50,
            n_services: 80,
            latent_dim: 4,
            noise_user_fraction: 0.0,
            missing_fraction: 0.0,
            seed: 0,
            countries: 4,
            cities_per_country: 3,
            as_per_country: 2,
            obs_noise: 0.1,
            bias: -0.5,
            distance_weight: 3.0,
            as_effect: 0.5,
            factor_scale: 0.6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    pub country: usize,
    pub city: usize,
    pub autonomous_system: usize,
}

/// Everything needed to score predictions against the generating process.
#[derive(Clone, Debug)]
pub struct SynthGroundTruth {
    pub user_factors: Vec<Vec<f64>>,
    pub service_factors: Vec<Vec<f64>>,
    pub city_coords: Vec<(f64, f64)>,
    pub users: Vec<Site>,
    pub services: Vec<Site>,
    /// Noise-free response time of each record, in record order.
    pub clean_rt: Vec<f64>,
    pub corrupted_users: Vec<u32>,
    pub missing_services: Vec<u32>,
}

impl SynthGroundTruth {
    /// MAE of the clean response time as a predictor of the observed one,
    /// restricted to `indices`.
    pub fn noise_floor_mae(&self, records: &[QoSRecord], indices: &[usize]) -> f64 {
        let n = indices.len().max(1) as f64;
        indices
            .iter()
            .map(|&i| (records[i].rt - self.clean_rt[i]).abs())
            .sum::<f64>()
            / n
    }
}

fn city_name(c: usize) -> String {
    format!("city{c:02}")
}

fn as_name(a: usize) -> String {
    format!("AS{:04}", 100 + a)
}

fn country_name(c: usize) -> String {
    format!("country{c}")
}

/// Generates the full `n_users × n_services` matrix as records, row-major.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Vec<QoSRecord>, SynthGroundTruth)> {
    if cfg.n_users == 0 || cfg.n_services == 0 || cfg.latent_dim == 0 {
        return Err(Error::InvalidArgument("synthetic sizes must be positive".into()));
    }
    if cfg.countries == 0 || cfg.cities_per_country == 0 || cfg.as_per_country == 0 {
        return Err(Error::InvalidArgument("synthetic geography sizes must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.missing_fraction) || !(0.0..=1.0).contains(&cfg.noise_user_fraction) {
        return Err(Error::InvalidArgument("synthetic fractions must be in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_cities = cfg.countries * cfg.cities_per_country;
    let n_as = cfg.countries * cfg.as_per_country;

    let centres: Vec<(f64, f64)> = (0..cfg.countries)
        .map(|_| (rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)))
        .collect();
    let city_coords: Vec<(f64, f64)> = (0..n_cities)
        .map(|c| {
            let (x, y) = centres[c / cfg.cities_per_country];
            (x + rng.random_range(-0.12..0.12), y + rng.random_range(-0.12..0.12))
        })
        .collect();
    let effect = Normal::new(0.0, cfg.as_effect.max(1e-12)).expect("valid normal");
    let user_as_effect: Vec<f64> = (0..n_as).map(|_| effect.sample(&mut rng)).collect();
    let service_as_effect: Vec<f64> = (0..n_as).map(|_| effect.sample(&mut rng)).collect();

    let place = |rng: &mut ChaCha8Rng| {
        let city = rng.random_range(0..n_cities);
        let country = city / cfg.cities_per_country;
        let autonomous_system = country * cfg.as_per_country + rng.random_range(0..cfg.as_per_country);
        Site {
            country,
            city,
            autonomous_system,
        }
    };
    let users: Vec<Site> = (0..cfg.n_users).map(|_| place(&mut rng)).collect();
    let services: Vec<Site> = (0..cfg.n_services).map(|_| place(&mut rng)).collect();

    let f = Normal::new(0.0, cfg.factor_scale / (cfg.latent_dim as f64).sqrt()).expect("valid normal");
    let factors = |n: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..cfg.latent_dim).map(|_| f.sample(rng)).collect())
            .collect()
    };
    let user_factors = factors(cfg.n_users, &mut rng);
    let service_factors = factors(cfg.n_services, &mut rng);

    let obs = Normal::new(0.0, cfg.obs_noise.max(0.0)).expect("valid normal");
    let mut records = Vec::with_capacity(cfg.n_users * cfg.n_services);
    let mut clean_rt = Vec::with_capacity(cfg.n_users * cfg.n_services);
    for (u, us) in users.iter().enumerate() {
        for (s, ss) in services.iter().enumerate() {
            let dot: f64 = user_factors[u].iter().zip(&service_factors[s]).map(|(a, b)| a * b).sum();
            let (ux, uy) = city_coords[us.city];
            let (sx, sy) = city_coords[ss.city];
            let dist = ((ux - sx).powi(2) + (uy - sy).powi(2)).sqrt();
            let logit = cfg.bias
                + dot
                + cfg.distance_weight * dist
                + user_as_effect[us.autonomous_system]
                + service_as_effect[ss.autonomous_system];
            let clean = softplus(logit);
            let noisy = if cfg.obs_noise > 0.0 {
                clean * obs.sample(&mut rng).exp()
            } else {
                clean
            };
            clean_rt.push(clean);
            records.push(QoSRecord {
                user_id: u as u32,
                service_id: s as u32,
                rt: noisy,
                user_country: Some(country_name(us.country)),
                user_as: Some(as_name(us.autonomous_system)),
                user_city: Some(city_name(us.city)),
                service_country: Some(country_name(ss.country)),
                service_as: Some(as_name(ss.autonomous_system)),
                service_city: Some(city_name(ss.city)),
            });
        }
    }

    let mut corrupted_users = Vec::new();
    if cfg.noise_user_fraction > 0.0 {
        let noisy = inject_feature_noise(&records, cfg.noise_user_fraction, cfg.seed ^ 0x006e_6f69_7365)?;
        records = noisy.records;
        corrupted_users = noisy.corrupted_users;
    }

    let n_missing = (cfg.missing_fraction * cfg.n_services as f64).round() as usize;
    let missing: BTreeSet<u32> = sample(&mut rng, cfg.n_services, n_missing)
        .iter()
        .map(|s| s as u32)
        .collect();
    for r in records.iter_mut().filter(|r| missing.contains(&r.service_id)) {
        r.service_country = None;
        r.service_as = None;
        r.service_city = None;
    }

    Ok((
        records,
        SynthGroundTruth {
            user_factors,
            service_factors,
            city_coords,
            users,
            services,
            clean_rt,
            corrupted_users,
            missing_services: missing.into_iter().collect(),
        },
    ))
}
