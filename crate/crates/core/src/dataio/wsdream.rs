use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::QoSRecord;
use crate::error::{Error, Result};

/// Location metadata for one user or service row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SiteMeta {
    pub country: Option<String>,
    pub autonomous_system: Option<String>,
    pub city: Option<String>,
}

fn normalise(field: &str) -> Option<String> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("null") {
        None
    } else {
        Some(f.to_string())
    }
}

fn header_key(h: &str) -> String {
    h.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .trim()
        .to_ascii_lowercase()
}

/// Parses a tab-separated metadata list with a header row.
///
/// Columns are located by header name (`country`, `as`, `city`); any that
/// are absent are treated as missing for every row. Separator lines made of
/// `=` or `-` are skipped.
pub fn read_site_meta<R: Read>(input: R) -> Result<Vec<SiteMeta>> {
    let mut lines = BufReader::new(input).lines();
    let header = loop {
        match lines.next() {
            None => return Err(Error::Data("metadata file is empty".into())),
            Some(l) => {
                let l = l.map_err(|e| Error::io("<metadata>", e))?;
                if !l.trim().is_empty() {
                    break l;
                }
            }
        }
    };
    let keys: Vec<String> = header.split('\t').map(header_key).collect();
    let col = |name: &str| keys.iter().position(|k| k == name);
    let (country, asn, city) = (col("country"), col("as"), col("city"));

    let mut out = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io("<metadata>", e))?;
        let t = line.trim();
        if t.is_empty() || t.chars().all(|c| c == '=' || c == '-') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let get = |c: Option<usize>| c.and_then(|i| fields.get(i)).and_then(|f| normalise(f));
        out.push(SiteMeta {
            country: get(country),
            autonomous_system: get(asn),
            city: get(city),
        });
    }
    Ok(out)
}

/// Parses a whitespace-separated response-time matrix (rows = users).
pub fn read_rt_matrix<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<matrix>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Data(format!("line {}: unparsable value `{tok}`", n + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(Error::Data(format!(
                    "line {}: expected {} columns, found {}",
                    n + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Joins a matrix with user and service metadata into records.
///
/// Entries `<= 0` are unobserved (the raw data uses `-1` for failures) and
/// produce no record. Records come out in row-major order.
pub fn assemble_records(
    matrix: &[Vec<f64>],
    users: &[SiteMeta],
    services: &[SiteMeta],
) -> Result<Vec<QoSRecord>> {
    let cols = matrix.first().map_or(0, Vec::len);
    if matrix.len() != users.len() {
        return Err(Error::Data(format!(
            "matrix has {} rows but user list has {} entries",
            matrix.len(),
            users.len()
        )));
    }
    if cols != services.len() {
        return Err(Error::Data(format!(
            "matrix has {cols} columns but service list has {} entries",
            services.len()
        )));
    }
    let mut out = Vec::new();
    for (u, row) in matrix.iter().enumerate() {
        for (s, &rt) in row.iter().enumerate() {
            if !(rt > 0.0) {
                continue;
            }
            let (um, sm) = (&users[u], &services[s]);
            out.push(QoSRecord {
                user_id: u as u32,
                service_id: s as u32,
                rt,
                user_country: um.country.clone(),
                user_as: um.autonomous_system.clone(),
                user_city: um.city.clone(),
                service_country: sm.country.clone(),
                service_as: sm.autonomous_system.clone(),
                service_city: sm.city.clone(),
            });
        }
    }
    Ok(out)
}

/// Loads the raw WS-Dream layout (`rtMatrix.txt`, `userlist.txt`, `wslist.txt`).
pub fn load_wsdream(rt_matrix: &Path, user_meta: &Path, service_meta: &Path) -> Result<Vec<QoSRecord>> {
    let open = |p: &Path| File::open(p).map_err(|e| Error::io(p, e));
    let matrix = read_rt_matrix(open(rt_matrix)?)?;
    let users = read_site_meta(open(user_meta)?)?;
    let services = read_site_meta(open(service_meta)?)?;
    assemble_records(&matrix, &users, &services)
}

/// Number of strictly positive entries, i.e. the expected record count.
pub fn positive_entries(matrix: &[Vec<f64>]) -> usize {
    matrix.iter().flatten().filter(|v| **v > 0.0).count()
}
