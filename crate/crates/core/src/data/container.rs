//! `UEPD` container: a bit-exact little-endian dump of a dataset plus an
//! optional perturbation block.
//!
//! Layout (no padding):
//! magic `UEPD` | u32 version=1 | u32 N, K, C, H, W | u8 has_perturbation |
//! u8 bound_kind (0 none, 1 linf, 2 l2, 3 l0) | f32 epsilon |
//! N*C*H*W f32 pixels | N u16 labels | [N*C*H*W f32 deltas]

use super::{DataError, LabeledImageSet, NormBound, NormKind, PerturbationSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: [u8; 4] = *b"UEPD";
const VERSION: u32 = 1;

pub fn write_container(
    set: &LabeledImageSet,
    perturb: Option<&PerturbationSet>,
    path: &Path,
) -> Result<(), DataError> {
    set.validate()?;
    if let Some(p) = perturb {
        if p.len() != set.len()
            || p.channels != set.channels
            || p.height != set.height
            || p.width != set.width
        {
            return Err(DataError::ShapeMismatch("perturbation/dataset geometry".into()));
        }
        p.validate()?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [set.len(), set.class_count, set.channels, set.height, set.width] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    let (flag, kind, eps) = match perturb {
        None => (0u8, 0u8, 0f32),
        Some(p) => {
            let kind = match p.bound.kind {
                NormKind::LInf => 1u8,
                NormKind::L2 => 2,
                NormKind::L0 => 3,
            };
            (1u8, kind, p.bound.epsilon)
        }
    };
    w.write_all(&[flag, kind])?;
    w.write_all(&eps.to_le_bytes())?;
    for &px in &set.images {
        w.write_all(&px.to_le_bytes())?;
    }
    for &l in &set.labels {
        w.write_all(&l.to_le_bytes())?;
    }
    if let Some(p) = perturb {
        for &d in &p.deltas {
            w.write_all(&d.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<(), DataError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            DataError::TruncatedFile
        } else {
            DataError::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32, DataError> {
    let mut b = [0u8; 4];
    read_exact_or_truncated(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_container(
    path: &Path,
) -> Result<(LabeledImageSet, Option<PerturbationSet>), DataError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut magic)?;
    if magic != MAGIC {
        return Err(DataError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(DataError::VersionMismatch(version));
    }
    let n = read_u32(&mut r)? as usize;
    let k = read_u32(&mut r)? as usize;
    let c = read_u32(&mut r)? as usize;
    let h = read_u32(&mut r)? as usize;
    let w = read_u32(&mut r)? as usize;
    let mut flags = [0u8; 2];
    read_exact_or_truncated(&mut r, &mut flags)?;
    let mut eps_b = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut eps_b)?;
    let epsilon = f32::from_le_bytes(eps_b);

    let sample = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or(DataError::TruncatedFile)?;
    let pixel_count = n.checked_mul(sample).ok_or(DataError::TruncatedFile)?;

    let mut images = vec![0f32; pixel_count];
    let mut buf = vec![0u8; 4 * 4096];
    let mut filled = 0usize;
    while filled < pixel_count {
        let take = (pixel_count - filled).min(4096);
        read_exact_or_truncated(&mut r, &mut buf[..4 * take])?;
        for (i, chunk) in buf[..4 * take].chunks_exact(4).enumerate() {
            images[filled + i] = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        filled += take;
    }
    let mut labels = vec![0u16; n];
    for l in labels.iter_mut() {
        let mut b = [0u8; 2];
        read_exact_or_truncated(&mut r, &mut b)?;
        *l = u16::from_le_bytes(b);
    }

    let perturb = if flags[0] != 0 {
        let kind = match flags[1] {
            1 => NormKind::LInf,
            2 => NormKind::L2,
            3 => NormKind::L0,
            other => {
                return Err(DataError::InvariantViolation(format!(
                    "perturbation flagged but bound kind is {other}"
                )))
            }
        };
        let mut deltas = vec![0f32; pixel_count];
        let mut filled = 0usize;
        while filled < pixel_count {
            let take = (pixel_count - filled).min(4096);
            read_exact_or_truncated(&mut r, &mut buf[..4 * take])?;
            for (i, chunk) in buf[..4 * take].chunks_exact(4).enumerate() {
                deltas[filled + i] = f32::from_le_bytes(chunk.try_into().unwrap());
            }
            filled += take;
        }
        Some(PerturbationSet {
            deltas,
            bound: NormBound { kind, epsilon },
            classwise: false,
            channels: c,
            height: h,
            width: w,
        })
    } else {
        None
    };

    // trailing bytes mean the header lied about the payload length
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => {}
        _ => return Err(DataError::TruncatedFile),
    }

    let set = LabeledImageSet::new(images, labels, k, c, h, w)?;
    if let Some(p) = &perturb {
        p.validate()?;
    }
    Ok((set, perturb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_dataset, SynthConfig};

    fn sample_set() -> LabeledImageSet {
        let cfg = SynthConfig { train_per_class: 6, test_per_class: 2, seed: 5, ..Default::default() };
        generate_synthetic_dataset(&cfg).unwrap().0
    }

    #[test]
    fn round_trip_bit_exact() {
        let set = sample_set();
        let perturb = PerturbationSet {
            deltas: set.images.iter().map(|_| 0.01f32).collect(),
            bound: NormBound::linf(0.05),
            classwise: false,
            channels: set.channels,
            height: set.height,
            width: set.width,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.uepd");
        write_container(&set, Some(&perturb), &path).unwrap();
        let (set2, perturb2) = read_container(&path).unwrap();
        assert_eq!(set.images, set2.images);
        assert_eq!(set.labels, set2.labels);
        assert_eq!(set.class_count, set2.class_count);
        let p2 = perturb2.unwrap();
        assert_eq!(perturb.deltas, p2.deltas);
        assert_eq!(perturb.bound, p2.bound);
    }

    #[test]
    fn corrupted_magic_is_detected() {
        let set = sample_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.uepd");
        write_container(&set, None, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_container(&path), Err(DataError::BadMagic)));
    }

    #[test]
    fn version_mismatch_is_detected() {
        let set = sample_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.uepd");
        write_container(&set, None, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_container(&path), Err(DataError::VersionMismatch(9))));
    }

    #[test]
    fn short_payload_is_truncated() {
        let set = sample_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.uepd");
        write_container(&set, None, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_container(&path), Err(DataError::TruncatedFile)));
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let set = sample_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.uepd");
        write_container(&set, None, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0, 1, 2]);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_container(&path), Err(DataError::TruncatedFile)));
    }

    #[test]
    fn out_of_range_pixel_is_invariant_violation() {
        let set = sample_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.uepd");
        write_container(&set, None, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // first pixel starts after 4 magic + 4 version + 5*4 dims + 2 flags + 4 eps
        let off = 4 + 4 + 20 + 2 + 4;
        bytes[off..off + 4].copy_from_slice(&2.0f32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_container(&path), Err(DataError::InvariantViolation(_))));
    }
}
