//! Model checkpoints: magic `LPNN`, version 1, then per layer its shape,
//! row-major weights and biases, all little-endian.

use std::io::{Read, Write};

use super::{DenseLayer, MlpModel, TrainHistory};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LPNN";
const VERSION: u32 = 1;

fn io(e: std::io::Error) -> Error {
    Error::io("<checkpoint>", e)
}

pub fn write_checkpoint<W: Write>(model: &MlpModel, mut w: W) -> Result<()> {
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(model.layers().len() as u32).to_le_bytes()).map_err(io)?;
    for l in model.layers() {
        w.write_all(&(l.in_dim as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(l.out_dim as u32).to_le_bytes()).map_err(io)?;
        for v in l.weights.iter().chain(&l.biases) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("checkpoint truncated".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("checkpoint truncated".into()))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<MlpModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("checkpoint truncated".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n_layers = read_u32(&mut r)? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = read_u32(&mut r)? as usize;
        let out_dim = read_u32(&mut r)? as usize;
        let weights = read_f64s(&mut r, in_dim * out_dim)?;
        let biases = read_f64s(&mut r, out_dim)?;
        layers.push(DenseLayer {
            in_dim,
            out_dim,
            weights,
            biases,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    MlpModel::from_layers(layers)
}

/// `epoch,train_loss,val_acc`; val_acc is empty when no validation set was used.
pub fn write_history_csv<W: Write>(history: &TrainHistory, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "train_loss", "val_acc"])?;
    for e in &history.epochs {
        out.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            e.val_acc.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{init_mlp, MlpConfig};

    #[test]
    fn round_trip_and_layout() {
        let model = init_mlp(&MlpConfig::new(3, vec![4], 2, 1)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"LPNN");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(buf.len(), 12 + (8 + (12 + 4) * 8) + (8 + (8 + 2) * 8));
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), model);
    }

    #[test]
    fn rejects_corruption() {
        let model = init_mlp(&MlpConfig::new(3, vec![4], 2, 1)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_checkpoint(extra.as_slice()).is_err());
    }

    #[test]
    fn history_csv() {
        let h = TrainHistory {
            epochs: vec![crate::mlp::EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                val_acc: Some(0.75),
            }],
            best_epoch: 1,
            best_val_acc: Some(0.75),
        };
        let mut buf = Vec::new();
        write_history_csv(&h, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,train_loss,val_acc\n1,0.5,0.75\n");
    }
}
