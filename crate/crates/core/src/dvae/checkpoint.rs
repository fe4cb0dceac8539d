//! Versioned D-VAE checkpoint: weights plus normalization running stats.
//! Loading reproduces inference outputs bit-exactly.

use super::{DVAEConfig, DVAEState, DvaeError};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: [u8; 4] = *b"DVCK";
const VERSION: u32 = 1;

pub fn save_dvae(state: &mut DVAEState, path: &Path) -> Result<(), DvaeError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [
        state.class_count,
        state.channels,
        state.height,
        state.width,
        state.latent_channels,
        state.downsample,
        state.epoch,
    ] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    let mut blocks: Vec<Vec<f32>> = Vec::new();
    state.visit_params(&mut |p| blocks.push(p.w.clone()));
    state.visit_buffers(&mut |b| blocks.push(b.clone()));
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for block in &blocks {
        w.write_all(&(block.len() as u64).to_le_bytes())?;
        for &v in block {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), DvaeError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            DvaeError::Checkpoint("truncated checkpoint".into())
        } else {
            DvaeError::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32, DvaeError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn load_dvae(path: &Path) -> Result<DVAEState, DvaeError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if magic != MAGIC {
        return Err(DvaeError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(DvaeError::Checkpoint(format!("unsupported version {version}")));
    }
    let class_count = read_u32(&mut r)? as usize;
    let channels = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let width = read_u32(&mut r)? as usize;
    let latent_channels = read_u32(&mut r)? as usize;
    let downsample = read_u32(&mut r)? as usize;
    let epoch = read_u32(&mut r)? as usize;

    let cfg = DVAEConfig { latent_channels, downsample, ..Default::default() };
    let mut state = DVAEState::init(&cfg, class_count, channels, height, width)?;
    state.epoch = epoch;

    let block_count = read_u32(&mut r)? as usize;
    let mut blocks: Vec<Vec<f32>> = Vec::with_capacity(block_count);
    for _ in 0..block_count {
        let mut len_b = [0u8; 8];
        read_exact(&mut r, &mut len_b)?;
        let len = u64::from_le_bytes(len_b) as usize;
        let mut data = vec![0f32; len];
        for v in data.iter_mut() {
            let mut b = [0u8; 4];
            read_exact(&mut r, &mut b)?;
            *v = f32::from_le_bytes(b);
        }
        blocks.push(data);
    }

    let mut expected = 0usize;
    state.visit_params(&mut |_| expected += 1);
    state.visit_buffers(&mut |_| expected += 1);
    if expected != block_count {
        return Err(DvaeError::Checkpoint(format!(
            "block count {block_count} does not match architecture ({expected})"
        )));
    }

    let mut it = blocks.into_iter();
    let mut mismatch = false;
    state.visit_params(&mut |p| {
        let block = it.next().expect("counted above");
        if block.len() == p.w.len() {
            p.w = block;
        } else {
            mismatch = true;
        }
    });
    state.visit_buffers(&mut |b| {
        let block = it.next().expect("counted above");
        if block.len() == b.len() {
            *b = block;
        } else {
            mismatch = true;
        }
    });
    if mismatch {
        return Err(DvaeError::Checkpoint("parameter block size mismatch".into()));
    }
    Ok(state)
}
