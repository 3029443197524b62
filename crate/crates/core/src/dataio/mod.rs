//! Data ingestion and preparation.

mod iforest;
mod noise;
mod record;
mod split;
mod synth;
mod vocab;
mod wsdream;

pub use iforest::{average_path_length, filter_outliers_iforest, harmonic, IsolationForest};
pub use noise::{inject_feature_noise, NoisyRecords};
pub use record::{load_records, read_records_csv, save_records, write_records_csv, QoSRecord, CSV_HEADER};
pub use split::{
    density_case, split_by_counts, split_by_density, DensityCase, Split, SplitManifest, SplitSpec,
    DENSITY_CASES,
};
pub use synth::{synth_generate, Site, SynthConfig, SynthGroundTruth};
pub use vocab::{EncodedRecord, Encoder, Feature, VocabSizes, Vocabulary, MISSING_ID};
pub use wsdream::{assemble_records, load_wsdream, positive_entries, read_rt_matrix, read_site_meta, SiteMeta};
