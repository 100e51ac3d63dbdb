//! Binary checkpointing for networks and optimizer state.
//!
//! Parameters are stored as little-endian f64 bit patterns, so a round-trip
//! is exact. The stream-level helpers are reused by the agent checkpoint,
//! which bundles two networks plus its own header around them.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::optim::{OptAlgo, OptimizerState};
use super::Mlp;

const NET_MAGIC: &[u8; 8] = b"SRLNET01";
/// Sanity cap on deserialized layer widths; real configs are ~100s of units.
const MAX_LAYER_DIM: u32 = 1 << 24;

pub(crate) fn w_u8<W: Write>(w: &mut W, v: u8) -> io::Result<()> {
    w.write_all(&[v])
}

pub(crate) fn w_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn w_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn w_f64<W: Write>(w: &mut W, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn r_u8<R: Read>(r: &mut R) -> io::Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

pub(crate) fn r_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn r_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn r_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn w_vec<W: Write>(w: &mut W, v: &[f64]) -> io::Result<()> {
    for x in v {
        w_f64(w, *x)?;
    }
    Ok(())
}

fn r_vec<R: Read>(r: &mut R, len: usize) -> io::Result<Vec<f64>> {
    let mut v = Vec::with_capacity(len);
    for _ in 0..len {
        v.push(r_f64(r)?);
    }
    Ok(v)
}

pub(crate) fn write_mlp<W: Write>(w: &mut W, net: &Mlp) -> io::Result<()> {
    w_u32(w, net.layer_sizes.len() as u32)?;
    for &s in &net.layer_sizes {
        w_u32(w, s as u32)?;
    }
    for l in 0..net.weights.len() {
        w_vec(w, &net.weights[l])?;
        w_vec(w, &net.biases[l])?;
    }
    Ok(())
}

pub(crate) fn read_mlp<R: Read>(r: &mut R) -> io::Result<Mlp> {
    let n = r_u32(r)?;
    if !(2..=64).contains(&n) {
        return Err(bad(format!("implausible layer count {n}")));
    }
    let mut layer_sizes = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let s = r_u32(r)?;
        if s == 0 || s > MAX_LAYER_DIM {
            return Err(bad(format!("implausible layer size {s}")));
        }
        layer_sizes.push(s as usize);
    }
    let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
    let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
    for l in 0..layer_sizes.len() - 1 {
        let wlen = layer_sizes[l] * layer_sizes[l + 1];
        let w = r_vec(r, wlen)?;
        let b = r_vec(r, layer_sizes[l + 1])?;
        if w.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter in checkpoint"));
        }
        weights.push(w);
        biases.push(b);
    }
    Ok(Mlp { layer_sizes, weights, biases })
}

pub(crate) fn write_opt<W: Write>(w: &mut W, opt: &OptimizerState) -> io::Result<()> {
    match opt.algo {
        OptAlgo::Sgd => w_u8(w, 0)?,
        OptAlgo::Adam { beta1, beta2, eps } => {
            w_u8(w, 1)?;
            w_f64(w, beta1)?;
            w_f64(w, beta2)?;
            w_f64(w, eps)?;
        }
    }
    w_f64(w, opt.lr)?;
    w_u64(w, opt.step)?;
    if matches!(opt.algo, OptAlgo::Adam { .. }) {
        for group in [&opt.m_w, &opt.v_w, &opt.m_b, &opt.v_b] {
            for v in group {
                w_vec(w, v)?;
            }
        }
    }
    Ok(())
}

pub(crate) fn read_opt<R: Read>(r: &mut R, net: &Mlp) -> io::Result<OptimizerState> {
    let algo = match r_u8(r)? {
        0 => OptAlgo::Sgd,
        1 => {
            let beta1 = r_f64(r)?;
            let beta2 = r_f64(r)?;
            let eps = r_f64(r)?;
            OptAlgo::Adam { beta1, beta2, eps }
        }
        t => return Err(bad(format!("unknown optimizer tag {t}"))),
    };
    let lr = r_f64(r)?;
    if !(lr.is_finite() && lr > 0.0) {
        return Err(bad(format!("implausible learning rate {lr}")));
    }
    let step = r_u64(r)?;
    let (mut m_w, mut v_w, mut m_b, mut v_b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    if matches!(algo, OptAlgo::Adam { .. }) {
        for group in [&mut m_w, &mut v_w] {
            for w in &net.weights {
                group.push(r_vec(r, w.len())?);
            }
        }
        for group in [&mut m_b, &mut v_b] {
            for b in &net.biases {
                group.push(r_vec(r, b.len())?);
            }
        }
    }
    Ok(OptimizerState { algo, lr, step, m_w, v_w, m_b, v_b })
}

fn map_read_err(path: &Path, e: io::Error) -> Error {
    match e.kind() {
        io::ErrorKind::InvalidData => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("checkpoint: {e}"),
        },
        io::ErrorKind::UnexpectedEof => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "checkpoint: truncated file".into(),
        },
        _ => Error::io(path, e),
    }
}

/// Saves a network with its optimizer state; the round-trip through
/// `load_mlp` is bit-exact.
pub fn save_mlp(path: impl AsRef<Path>, net: &Mlp, opt: &OptimizerState) -> Result<()> {
    let path = path.as_ref();
    let inner = || -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(NET_MAGIC)?;
        write_mlp(&mut w, net)?;
        write_opt(&mut w, opt)?;
        w.flush()
    };
    inner().map_err(|e| Error::io(path, e))
}

pub fn load_mlp(path: impl AsRef<Path>) -> Result<(Mlp, OptimizerState)> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let inner = |r: &mut BufReader<File>| -> io::Result<(Mlp, OptimizerState)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != NET_MAGIC {
            return Err(bad("not a network checkpoint (bad magic)"));
        }
        let net = read_mlp(r)?;
        let opt = read_opt(r, &net)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(bad("trailing bytes after checkpoint"));
        }
        Ok((net, opt))
    };
    inner(&mut r).map_err(|e| map_read_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::apply_update;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn trained_pair(seed: u64) -> (Mlp, OptimizerState) {
        let mut net = Mlp::init(&[5, 8, 3], seed).unwrap();
        let mut opt = OptimizerState::adam(1e-3, &net).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xabcd);
        for _ in 0..5 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let up: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = net.backward(&x, &up).unwrap();
            apply_update(&mut net, &g, &mut opt).unwrap();
        }
        (net, opt)
    }

    #[test]
    fn adam_checkpoint_round_trips_exactly() {
        let (net, opt) = trained_pair(21);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_mlp(&path, &net, &opt).unwrap();
        let (net2, opt2) = load_mlp(&path).unwrap();
        assert_eq!(net, net2);
        assert_eq!(opt, opt2);
        assert_eq!(opt2.step_count(), 5);
    }

    #[test]
    fn sgd_checkpoint_round_trips_exactly() {
        let net = Mlp::init(&[4, 4, 2], 3).unwrap();
        let opt = OptimizerState::sgd(0.05, &net).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_mlp(&path, &net, &opt).unwrap();
        let (net2, opt2) = load_mlp(&path).unwrap();
        assert_eq!(net, net2);
        assert_eq!(opt, opt2);
    }

    #[test]
    fn corrupt_files_are_parse_errors() {
        let (net, opt) = trained_pair(9);
        let dir = tempfile::tempdir().unwrap();

        let bad_magic = dir.path().join("bad_magic.ckpt");
        std::fs::write(&bad_magic, b"NOTMAGIC").unwrap();
        assert!(matches!(load_mlp(&bad_magic), Err(Error::Parse { .. })));

        let path = dir.path().join("net.ckpt");
        save_mlp(&path, &net, &opt).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let truncated = dir.path().join("truncated.ckpt");
        std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_mlp(&truncated), Err(Error::Parse { .. })));

        let padded = dir.path().join("padded.ckpt");
        let mut extra = bytes.clone();
        extra.push(0);
        std::fs::write(&padded, &extra).unwrap();
        assert!(matches!(load_mlp(&padded), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            load_mlp("/nonexistent/dir/net.ckpt"),
            Err(Error::Io { .. })
        ));
    }
}
