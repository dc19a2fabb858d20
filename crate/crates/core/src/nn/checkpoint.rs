//! Binary network archive.
//!
//! Layout: the magic line `DSAFE1\n`, then per network a text header line
//! `name sizes activation\n` (sizes comma-separated, activation the output
//! tag) immediately followed by its parameters as little-endian `f64`, layer
//! by layer, weights row-major then biases. An optional trailing text line
//! of `key=value` pairs carries scalar metadata.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &[u8] = b"DSAFE1\n";

/// Serialise named networks plus an optional metadata line.
pub fn encode(networks: &[(&str, &Mlp)], footer: Option<&str>) -> Result<Vec<u8>> {
    let mut out = MAGIC.to_vec();
    for (name, net) in networks {
        if name.is_empty() || name.contains(char::is_whitespace) || name.contains('=') {
            return Err(Error::InvalidArgument(format!("bad network name `{name}`")));
        }
        let sizes: Vec<String> = net.layer_sizes().iter().map(|s| s.to_string()).collect();
        out.extend(format!("{name} {} {}\n", sizes.join(","), net.output_activation()).bytes());
        for (w, b) in net.weights().iter().zip(net.biases()) {
            for v in w.iter() {
                out.extend(v.to_le_bytes());
            }
            for v in b.iter() {
                out.extend(v.to_le_bytes());
            }
        }
    }
    if let Some(f) = footer {
        if f.contains('\n') || !f.split_whitespace().all(|t| t.contains('=')) {
            return Err(Error::InvalidArgument("footer must be one line of key=value".into()));
        }
        out.extend(f.bytes());
        out.push(b'\n');
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn line(&mut self) -> Result<&str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint(format!("unterminated line at byte {}", self.pos)))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::Checkpoint(format!("non-UTF-8 header at byte {}", self.pos)))?;
        self.pos += end + 1;
        Ok(line)
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let need = n * 8;
        if self.bytes.len() - self.pos < need {
            return Err(Error::Checkpoint(format!(
                "truncated parameters for {what}: need {need} bytes, {} left",
                self.bytes.len() - self.pos
            )));
        }
        let out = self.bytes[self.pos..self.pos + need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        self.pos += need;
        Ok(out)
    }
}

/// Networks in file order plus the metadata line, if present.
pub type Decoded = (Vec<(String, Mlp)>, Option<String>);

pub fn decode(bytes: &[u8]) -> Result<Decoded> {
    if !bytes.starts_with(MAGIC) {
        return Err(Error::Checkpoint("missing DSAFE1 magic".into()));
    }
    let mut r = Reader {
        bytes,
        pos: MAGIC.len(),
    };
    let mut nets = Vec::new();
    let mut footer = None;
    while r.pos < bytes.len() {
        let line = r.line()?.to_string();
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.first().is_some_and(|t| t.contains('=')) {
            footer = Some(line.clone());
            if r.pos != bytes.len() {
                return Err(Error::Checkpoint("data after metadata line".into()));
            }
            break;
        }
        let [name, sizes, tag] = tokens[..] else {
            return Err(Error::Checkpoint(format!("bad network header `{line}`")));
        };
        let sizes: Vec<usize> = sizes
            .split(',')
            .map(|s| s.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Checkpoint(format!("bad layer sizes in `{line}`")))?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Checkpoint(format!("bad layer sizes in `{line}`")));
        }
        let act: Activation = tag
            .parse()
            .map_err(|_| Error::Checkpoint(format!("unknown activation `{tag}`")))?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let w = r.floats(fan_in * fan_out, name)?;
            let b = r.floats(fan_out, name)?;
            weights.push(Array2::from_shape_vec((fan_out, fan_in), w).unwrap());
            biases.push(Array1::from(b));
        }
        let net = Mlp::from_parts(weights, biases, act)
            .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        nets.push((name.to_string(), net));
    }
    Ok((nets, footer))
}

/// Write via a sibling temporary file and rename, so readers never observe
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => tmp_name.into(),
    };
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Decoded> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
