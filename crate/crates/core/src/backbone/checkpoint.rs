//! Binary model checkpoints.
//!
//! Single little-endian file, layout version 1:
//!
//! ```text
//! magic            b"HSBK"
//! version          u32      (= 1)
//! hidden           u64
//! encoder_layers   u64
//! decoder_layers   u64
//! dropout          f64
//! residual         u8
//! learning_rate    f64
//! batch_size       u64
//! epochs           u64
//! bn_momentum      f64
//! seed             u64
//! dims.text        u64
//! dims.user        u64
//! dims.entity      u64      (entity vocabulary size)
//! num_classes      u64
//! adam_t           u64
//! rng_word_pos     u128     (dropout stream position)
//! parameter tensors, in the fixed traversal order
//!   encoders T, U, E then decoder blocks then output layer; encoder blocks
//!   as lin.w, lin.b, act.a, decoder blocks as lin.w, lin.b, bn.gamma,
//!   bn.beta, act.a; per tensor: values, then Adam first moments, then Adam
//!   second moments, all raw f64
//! batch-norm buffers, decoder block order: running_mean then running_var
//! ```
//!
//! Every length is derived from the header, so the file has no per-tensor
//! framing. A checkpoint loads back into a bit-identical model.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{BackboneModel, FeatureDims, ModelConfig};

const MAGIC: &[u8; 4] = b"HSBK";
const VERSION: u32 = 1;

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    fn u128(&mut self, v: u128) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    fn f64_slice(&mut self, vs: &[f64]) -> std::io::Result<()> {
        for v in vs {
            self.f64(*v)?;
        }
        Ok(())
    }
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.inner.write_all(&[v])
    }
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> std::io::Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn u32(&mut self) -> std::io::Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>()?))
    }
    fn u64(&mut self) -> std::io::Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }
    fn u128(&mut self) -> std::io::Result<u128> {
        Ok(u128::from_le_bytes(self.bytes::<16>()?))
    }
    fn f64(&mut self) -> std::io::Result<f64> {
        Ok(f64::from_le_bytes(self.bytes::<8>()?))
    }
    fn f64_slice(&mut self, out: &mut [f64]) -> std::io::Result<()> {
        for v in out {
            *v = self.f64()?;
        }
        Ok(())
    }
    fn u8(&mut self) -> std::io::Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
}

pub fn save_checkpoint(model: &mut BackboneModel, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = Writer {
        inner: BufWriter::new(file),
    };
    (|| -> std::io::Result<()> {
        w.inner.write_all(MAGIC)?;
        w.u32(VERSION)?;
        let cfg = model.config().clone();
        w.u64(cfg.hidden as u64)?;
        w.u64(cfg.encoder_layers as u64)?;
        w.u64(cfg.decoder_layers as u64)?;
        w.f64(cfg.dropout)?;
        w.u8(cfg.residual as u8)?;
        w.f64(cfg.learning_rate)?;
        w.u64(cfg.batch_size as u64)?;
        w.u64(cfg.epochs as u64)?;
        w.f64(cfg.bn_momentum)?;
        w.u64(cfg.seed)?;
        let dims = model.dims();
        w.u64(dims.text as u64)?;
        w.u64(dims.user as u64)?;
        w.u64(dims.entity as u64)?;
        w.u64(model.num_classes() as u64)?;
        w.u64(model.adam_t())?;
        w.u128(model.rng_mut().get_word_pos())?;

        let mut result = Ok(());
        model.for_each_param(&mut |_, p| {
            if result.is_ok() {
                result = w
                    .f64_slice(&p.data)
                    .and_then(|_| {
                        let (m1, m2) = p.moments();
                        w.f64_slice(m1).and_then(|_| w.f64_slice(m2))
                    });
            }
        });
        result?;

        for ti in 0..3 {
            for block in &model.encoders_mut()[ti] {
                if let Some(bn) = &block.bn {
                    w.f64_slice(&bn.running_mean)?;
                    w.f64_slice(&bn.running_var)?;
                }
            }
        }
        for block in model.decoder_blocks_mut().iter() {
            if let Some(bn) = &block.bn {
                w.f64_slice(&bn.running_mean)?;
                w.f64_slice(&bn.running_var)?;
            }
        }
        w.inner.flush()
    })()
    .map_err(io_err)
}

pub fn load_checkpoint(path: &Path) -> Result<BackboneModel> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut r = Reader {
        inner: BufReader::new(file),
    };
    let mut parse = || -> std::io::Result<Result<BackboneModel>> {
        let magic = r.bytes::<4>()?;
        if &magic != MAGIC {
            return Ok(Err(Error::Checkpoint("bad magic".into())));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Ok(Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            ))));
        }
        let config = ModelConfig {
            hidden: r.u64()? as usize,
            encoder_layers: r.u64()? as usize,
            decoder_layers: r.u64()? as usize,
            dropout: r.f64()?,
            residual: r.u8()? != 0,
            learning_rate: r.f64()?,
            batch_size: r.u64()? as usize,
            epochs: r.u64()? as usize,
            bn_momentum: r.f64()?,
            seed: r.u64()?,
        };
        let dims = FeatureDims {
            text: r.u64()? as usize,
            user: r.u64()? as usize,
            entity: r.u64()? as usize,
        };
        let num_classes = r.u64()? as usize;
        let adam_t = r.u64()?;
        let word_pos = r.u128()?;

        let mut model = match BackboneModel::new(&config, dims, num_classes) {
            Ok(m) => m,
            Err(e) => return Ok(Err(e)),
        };
        let mut io_result = Ok(());
        model.for_each_param(&mut |_, p| {
            if io_result.is_ok() {
                io_result = r.f64_slice(&mut p.data).and_then(|_| {
                    let (m1, m2) = p.moments_mut();
                    r.f64_slice(m1).and_then(|_| r.f64_slice(m2))
                });
            }
        });
        io_result?;
        for ti in 0..3 {
            for block in &mut model.encoders_mut()[ti] {
                if let Some(bn) = &mut block.bn {
                    r.f64_slice(&mut bn.running_mean)?;
                    r.f64_slice(&mut bn.running_var)?;
                }
            }
        }
        for block in model.decoder_blocks_mut().iter_mut() {
            if let Some(bn) = &mut block.bn {
                r.f64_slice(&mut bn.running_mean)?;
                r.f64_slice(&mut bn.running_var)?;
            }
        }
        model.set_adam_t(adam_t);
        *model.rng_mut() = ChaCha8Rng::seed_from_u64(config.seed);
        model.rng_mut().set_word_pos(word_pos);

        let mut trailing = [0u8; 1];
        match r.inner.read(&mut trailing)? {
            0 => Ok(Ok(model)),
            _ => Ok(Err(Error::Checkpoint("trailing bytes".into()))),
        }
    };
    parse().map_err(io_err)?
}
