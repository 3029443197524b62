//! Memory-based collaborative filtering: user-based (UPCC), service-based
//! (IPCC) and blended (UIPCC) Pearson-correlation predictors.
//!
//! UPCC predicts `r̄_u + Σ sim(u,v) (r_vs − r̄_v) / Σ sim(u,v)` over the
//! `top_k` most similar users `v` with positive similarity that observed
//! `s`. IPCC is the same computation on the transposed matrix.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::dataio::QoSRecord;
use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 10;

/// Dense user × service matrix with an observation mask.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingMatrix {
    users: usize,
    services: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl RatingMatrix {
    pub fn new(users: usize, services: usize) -> Self {
        RatingMatrix {
            users,
            services,
            values: vec![0.0; users * services],
            observed: vec![false; users * services],
        }
    }

    /// Rows of `Option`s; `None` marks an unobserved entry.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let services = rows.first().map_or(0, Vec::len);
        let mut m = RatingMatrix::new(rows.len(), services);
        for (u, row) in rows.iter().enumerate() {
            if row.len() != services {
                return Err(Error::InvalidArgument(format!("row {u} has {} entries, expected {services}", row.len())));
            }
            for (s, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    m.set(u, s, *v)?;
                }
            }
        }
        Ok(m)
    }

    /// Matrix sized to fit every user and service id in `records`.
    pub fn from_records<'a, I>(records: I, users: usize, services: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a QoSRecord>,
    {
        let mut m = RatingMatrix::new(users, services);
        for r in records {
            m.set(r.user_id as usize, r.service_id as usize, r.rt)?;
        }
        Ok(m)
    }

    pub fn set(&mut self, u: usize, s: usize, value: f64) -> Result<()> {
        if u >= self.users || s >= self.services {
            return Err(Error::InvalidArgument(format!(
                "entry ({u}, {s}) outside a {}x{} matrix",
                self.users, self.services
            )));
        }
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::Data(format!("observed value at ({u}, {s}) must be positive, got {value}")));
        }
        self.values[u * self.services + s] = value;
        self.observed[u * self.services + s] = true;
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn services(&self) -> usize {
        self.services
    }

    pub fn get(&self, u: usize, s: usize) -> Option<f64> {
        let i = u * self.services + s;
        self.observed[i].then(|| self.values[i])
    }

    pub fn user_row(&self, u: usize) -> (&[f64], &[bool]) {
        let r = u * self.services..(u + 1) * self.services;
        (&self.values[r.clone()], &self.observed[r])
    }

    pub fn transpose(&self) -> Self {
        let mut t = RatingMatrix::new(self.services, self.users);
        for u in 0..self.users {
            for s in 0..self.services {
                let i = u * self.services + s;
                let j = s * self.users + u;
                t.values[j] = self.values[i];
                t.observed[j] = self.observed[i];
            }
        }
        t
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|o| **o).count()
    }

    /// Mean of all observed entries, `None` for an empty matrix.
    pub fn global_mean(&self) -> Option<f64> {
        let n = self.observed_count();
        (n > 0).then(|| {
            self.values
                .iter()
                .zip(&self.observed)
                .filter(|(_, o)| **o)
                .map(|(v, _)| v)
                .sum::<f64>()
                / n as f64
        })
    }

    fn row_mean(&self, u: usize) -> Option<f64> {
        let (v, o) = self.user_row(u);
        let (sum, n) = v
            .iter()
            .zip(o)
            .filter(|(_, o)| **o)
            .fold((0.0, 0usize), |(s, n), (x, _)| (s + x, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Pearson correlation over co-observed entries, 0 when fewer than two
/// entries overlap or either side is constant there.
pub fn pearson_sim(a: &[f64], a_mask: &[bool], b: &[f64], b_mask: &[bool]) -> f64 {
    let both: Vec<usize> = (0..a.len().min(b.len())).filter(|i| a_mask[*i] && b_mask[*i]).collect();
    if both.len() < 2 {
        return 0.0;
    }
    let n = both.len() as f64;
    let ma = both.iter().map(|i| a[*i]).sum::<f64>() / n;
    let mb = both.iter().map(|i| b[*i]).sum::<f64>() / n;
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for &i in &both {
        let (x, y) = (a[i] - ma, b[i] - mb);
        num += x * y;
        da += x * x;
        db += y * y;
    }
    if da == 0.0 || db == 0.0 {
        return 0.0;
    }
    (num / (da.sqrt() * db.sqrt())).clamp(-1.0, 1.0)
}

fn similarities(m: &RatingMatrix, u: usize) -> Vec<f64> {
    let (a, am) = m.user_row(u);
    (0..m.users())
        .map(|v| {
            if v == u {
                return 0.0;
            }
            let (b, bm) = m.user_row(v);
            pearson_sim(a, am, b, bm)
        })
        .collect()
}

fn neighbourhood_predict(m: &RatingMatrix, sims: &[f64], means: &[Option<f64>], u: usize, s: usize, top_k: usize) -> Option<f64> {
    let base = means[u]?;
    let mut neighbours: Vec<(f64, usize)> = (0..m.users())
        .filter(|v| *v != u && sims[*v] > 0.0 && m.get(*v, s).is_some())
        .map(|v| (sims[v], v))
        .collect();
    if neighbours.is_empty() {
        return None;
    }
    neighbours.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(Ordering::Equal).then(x.1.cmp(&y.1)));
    neighbours.truncate(top_k);
    let (num, den) = neighbours.iter().fold((0.0, 0.0), |(num, den), (w, v)| {
        let dev = m.get(*v, s).expect("filtered on observed") - means[*v].expect("observed row has a mean");
        (num + w * dev, den + w)
    });
    Some(base + num / den)
}

fn row_means(m: &RatingMatrix) -> Vec<Option<f64>> {
    (0..m.users()).map(|u| m.row_mean(u)).collect()
}

/// User-based prediction, `None` when no positively similar user observed `s`.
pub fn upcc_predict(m: &RatingMatrix, u: usize, s: usize, top_k: usize) -> Option<f64> {
    if u >= m.users() || s >= m.services() {
        return None;
    }
    neighbourhood_predict(m, &similarities(m, u), &row_means(m), u, s, top_k)
}

/// Service-based prediction: UPCC on the transposed matrix.
pub fn ipcc_predict(m: &RatingMatrix, u: usize, s: usize, top_k: usize) -> Option<f64> {
    upcc_predict(&m.transpose(), s, u, top_k)
}

/// `w · UPCC + (1 − w) · IPCC`; one abstaining side defers to the other and
/// a double abstention yields the global mean.
pub fn uipcc_predict(m: &RatingMatrix, u: usize, s: usize, w: f64, top_k: usize) -> Result<f64> {
    blend(upcc_predict(m, u, s, top_k), ipcc_predict(m, u, s, top_k), w, m.global_mean())
}

fn blend(up: Option<f64>, ip: Option<f64>, w: f64, fallback: Option<f64>) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidArgument(format!("blend weight must be in [0, 1], got {w}")));
    }
    match (up, ip) {
        (Some(a), Some(b)) => Ok(w * a + (1.0 - w) * b),
        (Some(a), None) => Ok(a),
        (None, Some(b)) => Ok(b),
        (None, None) => fallback.ok_or_else(|| Error::Data("no observed entries to fall back on".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CfMethod {
    Upcc,
    Ipcc,
    /// Blend weight on the UPCC side.
    Uipcc(f64),
}

impl CfMethod {
    pub fn name(&self) -> String {
        match self {
            CfMethod::Upcc => "upcc".into(),
            CfMethod::Ipcc => "ipcc".into(),
            CfMethod::Uipcc(w) => format!("uipcc(w={w})"),
        }
    }
}

/// Batch predictor: similarity rows are computed once per distinct user (or
/// service) in the query set, in parallel.
pub struct CfPredictor {
    users: RatingMatrix,
    services: RatingMatrix,
    user_means: Vec<Option<f64>>,
    service_means: Vec<Option<f64>>,
    top_k: usize,
}

impl CfPredictor {
    pub fn new(matrix: RatingMatrix, top_k: usize) -> Self {
        let services = matrix.transpose();
        CfPredictor {
            user_means: row_means(&matrix),
            service_means: row_means(&services),
            users: matrix,
            services,
            top_k,
        }
    }

    fn side(m: &RatingMatrix, means: &[Option<f64>], queries: &[(usize, usize)], top_k: usize) -> Vec<Option<f64>> {
        let mut by_row: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, (r, _)) in queries.iter().enumerate() {
            by_row.entry(*r).or_default().push(i);
        }
        let groups: Vec<(usize, Vec<usize>)> = by_row.into_iter().collect();
        let answers: Vec<Vec<(usize, Option<f64>)>> = groups
            .par_iter()
            .map(|(r, idx)| {
                if *r >= m.users() {
                    return idx.iter().map(|i| (*i, None)).collect();
                }
                let sims = similarities(m, *r);
                idx.iter()
                    .map(|i| {
                        let c = queries[*i].1;
                        let p = (c < m.services()).then(|| neighbourhood_predict(m, &sims, means, *r, c, top_k)).flatten();
                        (*i, p)
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![None; queries.len()];
        for (i, p) in answers.into_iter().flatten() {
            out[i] = p;
        }
        out
    }

    /// Predictions for `(user, service)` queries; abstentions fall back to
    /// the global mean of the training matrix.
    pub fn predict(&self, queries: &[(usize, usize)], method: CfMethod) -> Result<Vec<f64>> {
        let fallback = self.users.global_mean();
        let up = || Self::side(&self.users, &self.user_means, queries, self.top_k);
        let ip = || {
            let flipped: Vec<(usize, usize)> = queries.iter().map(|(u, s)| (*s, *u)).collect();
            Self::side(&self.services, &self.service_means, &flipped, self.top_k)
        };
        let (up, ip, w) = match method {
            CfMethod::Upcc => (up(), vec![None; queries.len()], 1.0),
            CfMethod::Ipcc => (vec![None; queries.len()], ip(), 0.0),
            CfMethod::Uipcc(w) => (up(), ip(), w),
        };
        up.into_iter().zip(ip).map(|(a, b)| blend(a, b, w, fallback)).collect()
    }
}
