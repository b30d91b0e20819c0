//! Versioned JSON checkpoints. Floats are written in shortest round-trip
//! form, so save followed by load reproduces every weight bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Network;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "spiking-network";

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    network: Network,
}

pub fn write_checkpoint(net: &Network) -> String {
    let env = Envelope {
        format: FORMAT.into(),
        version: CHECKPOINT_VERSION,
        network: net.clone(),
    };
    serde_json::to_string(&env).expect("network serializes")
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Network> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        version: u32,
    }
    let header: Header = serde_json::from_slice(bytes)
        .map_err(|e| Error::Checkpoint(format!("invalid checkpoint: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "unknown format {:?}",
            header.format
        )));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: header.version.to_string(),
        });
    }
    let env: Envelope = serde_json::from_slice(bytes)
        .map_err(|e| Error::Checkpoint(format!("invalid checkpoint: {e}")))?;
    env.network
        .validate()
        .map_err(|e| Error::Checkpoint(format!("inconsistent network: {e}")))?;
    Ok(env.network)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_checkpoint(net))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    read_checkpoint(&std::fs::read(path)?)
}
