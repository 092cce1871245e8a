//! Binary controller checkpoints.
//!
//! ```text
//! magic      8 bytes  "AUGSCTRL"
//! version    u32 LE
//! config     u32 LE length + JSON
//! baseline   u8 flag + f64 LE
//! steps      u64 LE
//! params     u64 LE count + f64 LE each
//! ```

use super::{Controller, ControllerConfig, Layout};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"AUGSCTRL";
const VERSION: u32 = 1;

pub(super) fn encode(controller: &Controller) -> Vec<u8> {
    let config = serde_json::to_vec(&controller.config).expect("config serializes");
    let mut out = Vec::with_capacity(64 + config.len() + 8 * controller.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.push(u8::from(controller.baseline.is_some()));
    out.extend_from_slice(&controller.baseline.unwrap_or(0.0).to_le_bytes());
    out.extend_from_slice(&controller.step_count.to_le_bytes());
    out.extend_from_slice(&(controller.params.len() as u64).to_le_bytes());
    for p in &controller.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length matches"))
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<Controller> {
    let mut r = Reader { bytes };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a controller checkpoint".into()));
    }
    let version = u32::from_le_bytes(r.array()?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let config_len = u32::from_le_bytes(r.array()?) as usize;
    let config: ControllerConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| Error::Checkpoint(format!("bad config: {e}")))?;
    config.validate()?;
    let has_baseline = r.array::<1>()?[0] != 0;
    let baseline = f64::from_le_bytes(r.array()?);
    let step_count = u64::from_le_bytes(r.array()?);
    let count = u64::from_le_bytes(r.array()?) as usize;
    let layout = Layout::new(&config);
    if count != layout.total {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {count} parameters, config implies {}",
            layout.total
        )));
    }
    let params = (0..count)
        .map(|_| r.array().map(f64::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    if !r.bytes.is_empty() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(Controller {
        config,
        layout,
        params,
        baseline: has_baseline.then_some(baseline),
        step_count,
    })
}
