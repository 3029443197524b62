//! Checkpoint container: a text manifest terminated by a line `end`, followed
//! by the raw little-endian `f64` blocks it describes.
//!
//! ```text
//! pdsnet-checkpoint 1
//! fingerprint E=10 N=64 k=512 posterior=512 head=1024,512,256 vocab=340,5826,...
//! parameters 12345678
//! tensor embed.user_id 340x1024 0 348160
//! ...
//! end
//! ```
//!
//! Offsets and lengths count `f64` values from the start of the binary part.

use std::fs;
use std::path::Path;

use super::net::PdsNet;
use super::spec::Architecture;
use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "pdsnet-checkpoint 1";
const END: &[u8] = b"end\n";

pub fn save_params(net: &PdsNet, path: &Path) -> Result<()> {
    let store = net.params();
    let mut manifest = format!(
        "{CHECKPOINT_MAGIC}\nfingerprint {}\nparameters {}\n",
        net.arch().fingerprint(),
        store.scalar_count()
    );
    let mut offset = 0usize;
    let mut blob = Vec::with_capacity(store.scalar_count() * 8);
    for (_, name, t) in store.iter() {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!("tensor {name} {} {offset} {}\n", dims.join("x"), t.len()));
        offset += t.len();
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    manifest.push_str("end\n");
    let mut bytes = manifest.into_bytes();
    bytes.extend_from_slice(&blob);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint. With `expected`, a differing architecture is a
/// [`Error::ConfigMismatch`].
pub fn load_params(path: &Path, expected: Option<&Architecture>) -> Result<PdsNet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let truncated = || Error::Data(format!("{}: truncated or malformed checkpoint", path.display()));
    let split = bytes
        .windows(END.len())
        .enumerate()
        .find(|(i, w)| *w == END && (*i == 0 || bytes[i - 1] == b'\n'))
        .map(|(i, _)| i)
        .ok_or_else(truncated)?;
    let manifest = std::str::from_utf8(&bytes[..split]).map_err(|_| truncated())?;
    let blob = &bytes[split + END.len()..];

    let mut lines = manifest.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::Data(format!("{}: not a checkpoint file", path.display())));
    }
    let fingerprint = lines
        .next()
        .and_then(|l| l.strip_prefix("fingerprint "))
        .ok_or_else(truncated)?;
    let arch = Architecture::from_fingerprint(fingerprint)?;
    if let Some(want) = expected {
        if *want != arch {
            return Err(Error::ConfigMismatch(format!(
                "checkpoint has `{}`, configuration expects `{}`",
                arch.fingerprint(),
                want.fingerprint()
            )));
        }
    }
    let count: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("parameters "))
        .and_then(|n| n.parse().ok())
        .ok_or_else(truncated)?;
    if blob.len() != count * 8 {
        return Err(truncated());
    }

    let mut store = ParamStore::new();
    for line in lines {
        let fields: Vec<&str> = line.split(' ').collect();
        let [kind, name, dims, offset, len] = fields[..] else {
            return Err(truncated());
        };
        if kind != "tensor" {
            return Err(truncated());
        }
        let shape: Vec<usize> = dims
            .split('x')
            .filter(|d| !d.is_empty())
            .map(|d| d.parse().map_err(|_| truncated()))
            .collect::<Result<_>>()?;
        let offset: usize = offset.parse().map_err(|_| truncated())?;
        let len: usize = len.parse().map_err(|_| truncated())?;
        let raw = blob.get(offset * 8..(offset + len) * 8).ok_or_else(truncated)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        store.add(name, Tensor::new(shape, data)?)?;
    }
    let mut net = PdsNet::init(arch, 0)?;
    net.load_from(&store)?;
    Ok(net)
}
