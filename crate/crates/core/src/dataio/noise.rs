use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::QoSRecord;
use crate::error::{Error, Result};

/// Records after corruption together with the users that were corrupted.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyRecords {
    pub records: Vec<QoSRecord>,
    /// Sorted ascending.
    pub corrupted_users: Vec<u32>,
}

/// Gives a random `ceil(fraction · |users|)` subset of users a fake city and
/// AS. Each corrupted user receives one fake value per feature, drawn
/// uniformly from the other in-vocabulary values, applied to all of that
/// user's records. Labels are untouched.
pub fn inject_feature_noise(records: &[QoSRecord], user_fraction: f64, seed: u64) -> Result<NoisyRecords> {
    if !(user_fraction > 0.0 && user_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "user fraction must be in (0, 1], got {user_fraction}"
        )));
    }
    let users: BTreeSet<u32> = records.iter().map(|r| r.user_id).collect();
    let users: Vec<u32> = users.into_iter().collect();
    let n_corrupt = ((user_fraction * users.len() as f64).ceil() as usize).min(users.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<u32> = users.choose_multiple(&mut rng, n_corrupt).copied().collect();
    chosen.sort_unstable();

    let cities = pool(records.iter().map(|r| r.user_city.as_deref()));
    let ases = pool(records.iter().map(|r| r.user_as.as_deref()));
    for (name, p) in [("user_city", &cities), ("user_as", &ases)] {
        if p.len() < 2 && n_corrupt > 0 {
            return Err(Error::Data(format!(
                "cannot corrupt `{name}`: vocabulary has {} value(s)",
                p.len()
            )));
        }
    }

    // Original values held by each chosen user, so the fake differs from all.
    let mut held: BTreeMap<u32, (BTreeSet<String>, BTreeSet<String>)> =
        chosen.iter().map(|u| (*u, Default::default())).collect();
    for r in records {
        if let Some((c, a)) = held.get_mut(&r.user_id) {
            c.extend(r.user_city.clone());
            a.extend(r.user_as.clone());
        }
    }

    let mut fake: BTreeMap<u32, (String, String)> = BTreeMap::new();
    for u in &chosen {
        let (c_held, a_held) = &held[u];
        let city = pick_other(&cities, c_held, &mut rng, "user_city")?;
        let asn = pick_other(&ases, a_held, &mut rng, "user_as")?;
        fake.insert(*u, (city, asn));
    }

    let records = records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let Some((city, asn)) = fake.get(&r.user_id) {
                r.user_city = Some(city.clone());
                r.user_as = Some(asn.clone());
            }
            r
        })
        .collect();
    Ok(NoisyRecords {
        records,
        corrupted_users: chosen,
    })
}

fn pool<'a>(values: impl Iterator<Item = Option<&'a str>>) -> Vec<String> {
    let set: BTreeSet<&str> = values.flatten().collect();
    set.into_iter().map(str::to_string).collect()
}

fn pick_other<R: Rng>(pool: &[String], held: &BTreeSet<String>, rng: &mut R, name: &str) -> Result<String> {
    let options: Vec<&String> = pool.iter().filter(|v| !held.contains(*v)).collect();
    if options.is_empty() {
        return Err(Error::Data(format!("no alternative value left for `{name}`")));
    }
    Ok(options[rng.random_range(0..options.len())].clone())
}
