use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed invocation. Location features are `None` when missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoSRecord {
    pub user_id: u32,
    pub service_id: u32,
    pub rt: f64,
    pub user_country: Option<String>,
    pub user_as: Option<String>,
    pub user_city: Option<String>,
    pub service_country: Option<String>,
    pub service_as: Option<String>,
    pub service_city: Option<String>,
}

impl QoSRecord {
    /// A record with every location feature missing.
    pub fn bare(user_id: u32, service_id: u32, rt: f64) -> Self {
        QoSRecord {
            user_id,
            service_id,
            rt,
            user_country: None,
            user_as: None,
            user_city: None,
            service_country: None,
            service_as: None,
            service_city: None,
        }
    }

    /// True when any location feature of the user or the service is missing.
    pub fn has_missing(&self) -> bool {
        [
            &self.user_country,
            &self.user_as,
            &self.user_city,
            &self.service_country,
            &self.service_as,
            &self.service_city,
        ]
        .iter()
        .any(|f| f.is_none())
    }
}

pub const CSV_HEADER: [&str; 9] = [
    "user_id",
    "service_id",
    "rt",
    "user_country",
    "user_as",
    "user_city",
    "service_country",
    "service_as",
    "service_city",
];

pub fn write_records_csv<W: Write>(records: &[QoSRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<QoSRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Data(format!("unexpected record CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: QoSRecord = row?;
        out.push(r);
    }
    Ok(out)
}

pub fn save_records(records: &[QoSRecord], path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records_csv(records, std::io::BufWriter::new(f))
}

pub fn load_records(path: &Path) -> Result<Vec<QoSRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records_csv(std::io::BufReader::new(f))
}
