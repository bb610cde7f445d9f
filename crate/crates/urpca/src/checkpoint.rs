//! Model checkpoints: the magic `URPC1\n`, a `key: value` text header ended
//! by a blank line, then every parameter as a little-endian `f32` in layout
//! order.

use std::fs;
use std::path::Path;

use urpca_core::rpca::{BlockVariant, ModelConfig, UnfoldedModel};

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"URPC1\n";
const MAGIC_STEM: &[u8; 4] = b"URPC";

/// Header fields besides the model shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckpointMeta {
    pub seed: u64,
}

pub fn encode(model: &UnfoldedModel<f32>, meta: CheckpointMeta) -> Vec<u8> {
    let config = model.config();
    let first = config.block_convs()[0];
    let mut out = MAGIC.to_vec();
    let header = format!(
        "variant: {}\nlayers: {}\nn_fft: {}\nkernel: {}\nstride: {}\npad: {}\nseed: {}\nparams: {}\n\n",
        config.variant,
        config.layers,
        config.n_fft,
        first.kernel,
        first.stride,
        first.pad,
        meta.seed,
        model.params().len()
    );
    out.extend_from_slice(header.as_bytes());
    out.reserve(model.params().len() * 4);
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<(UnfoldedModel<f32>, CheckpointMeta)> {
    if bytes.len() < MAGIC.len() || &bytes[..6] != MAGIC {
        if bytes.len() >= 6 && &bytes[..4] == MAGIC_STEM && bytes[5] == b'\n' {
            return Err(Error::VersionMismatch {
                path: path.into(),
                found: (bytes[4] as char).to_string(),
                expected: "1".into(),
            });
        }
        return Err(Error::BadMagic { path: path.into(), expected: "URPC checkpoint" });
    }
    let body = &bytes[6..];
    let end = body
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::format(path, "header is not terminated by a blank line"))?;
    let header = std::str::from_utf8(&body[..end]).map_err(|_| Error::format(path, "header is not UTF-8"))?;
    let field = |key: &str| -> Result<&str> {
        header
            .lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(':')).map(str::trim))
            .ok_or_else(|| Error::format(path, format!("missing header field `{key}`")))
    };
    let number = |key: &str| -> Result<usize> {
        field(key)?.parse().map_err(|_| Error::format(path, format!("header field `{key}` is not a number")))
    };
    let variant: BlockVariant =
        field("variant")?.parse().map_err(|_| Error::format(path, "unknown block variant"))?;
    let mut config = ModelConfig::new(variant, number("layers")?, number("n_fft")?);
    let kernel = number("kernel")?;
    if variant != BlockVariant::RucAe {
        config.kernel = kernel;
    }
    config.validate().map_err(|e| Error::format(path, e.to_string()))?;
    let first = config.block_convs()[0];
    if (first.kernel, first.stride, first.pad) != (kernel, number("stride")?, number("pad")?) {
        return Err(Error::format(path, "conv geometry is not one this build can construct"));
    }
    let seed = field("seed")?.parse().map_err(|_| Error::format(path, "header field `seed` is not a number"))?;
    let count = number("params")?;
    if count != config.param_count() {
        return Err(Error::format(path, format!("{count} parameters, the model needs {}", config.param_count())));
    }
    let data = &body[end + 2..];
    if data.len() != count * 4 {
        return Err(Error::Truncated { path: path.into(), record: data.len() / 4 });
    }
    let params = data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let model = UnfoldedModel::from_params(config, params).map_err(|e| Error::format(path, e.to_string()))?;
    Ok((model, CheckpointMeta { seed }))
}

pub fn save(path: &Path, model: &UnfoldedModel<f32>, meta: CheckpointMeta) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::write(path, encode(model, meta)).map_err(Error::io(path))
}

pub fn load(path: &Path) -> Result<(UnfoldedModel<f32>, CheckpointMeta)> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode(path, &bytes)
}
