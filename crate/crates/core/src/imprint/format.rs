//! `.mwic` classifier container:
//! `"MWIC" | version u16 | dim u32 | K u32 | head u8 | threshold f64 | K × name | dim·K × f64`,
//! little-endian, weights column-major.

use std::fs;
use std::path::Path;

use super::{Head, ImprintClassifier};
use crate::codec::{put_string, ByteReader};
use crate::error::{Error, Result};

pub const MWIC_MAGIC: [u8; 4] = *b"MWIC";
pub const MWIC_VERSION: u16 = 1;

pub fn write_classifier(clf: &ImprintClassifier) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(23 + clf.weights().len() * 8);
    out.extend_from_slice(&MWIC_MAGIC);
    out.extend_from_slice(&MWIC_VERSION.to_le_bytes());
    out.extend_from_slice(&(clf.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(clf.num_classes() as u32).to_le_bytes());
    out.push(match clf.head() {
        Head::Sigmoid => 0,
        Head::Softmax => 1,
    });
    out.extend_from_slice(&clf.threshold().to_le_bytes());
    for name in clf.class_names() {
        put_string(&mut out, name)?;
    }
    for w in clf.weights() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub fn read_classifier(bytes: &[u8]) -> Result<ImprintClassifier> {
    let mut rd = ByteReader::new(bytes);
    rd.magic(MWIC_MAGIC)?;
    let version = rd.u16("version")?;
    if version != MWIC_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: MWIC_VERSION,
            found: version,
        });
    }
    let dim = rd.u32("dim")? as usize;
    let k = rd.u32("class count")? as usize;
    let head = match rd.u8("head")? {
        0 => Head::Sigmoid,
        1 => Head::Softmax,
        other => return Err(Error::InvalidDataset(format!("unknown head tag {other}"))),
    };
    let threshold = rd.f64("threshold")?;
    let mut names = Vec::with_capacity(k.min(1 << 16));
    for _ in 0..k {
        names.push(rd.string("class name")?);
    }
    let count = dim.checked_mul(k).ok_or(Error::Truncated("weights"))?;
    let mut weights = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        weights.push(rd.f64("weights")?);
    }
    rd.finish()?;
    if dim == 0 {
        return Err(Error::InvalidDataset("classifier dimension is zero".into()));
    }
    ImprintClassifier::from_parts(dim, names, weights, head, threshold)
}

pub fn save_classifier(clf: &ImprintClassifier, path: impl AsRef<Path>) -> Result<()> {
    fs::write(&path, write_classifier(clf)?).map_err(Error::file(&path))?;
    Ok(())
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<ImprintClassifier> {
    read_classifier(&fs::read(&path).map_err(Error::file(&path))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ImprintClassifier {
        ImprintClassifier::imprint(
            3,
            Head::Softmax,
            0.37,
            vec![
                ("cat", vec![&[0.1f32, 0.2, 0.3][..]]),
                ("dog", vec![&[-1.0f32, 0.0, 0.5][..]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let clf = sample();
        let back = read_classifier(&write_classifier(&clf).unwrap()).unwrap();
        assert_eq!(back, clf);
        let bits = |w: &[f64]| w.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.weights()), bits(clf.weights()));
    }

    #[test]
    fn add_class_then_save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.mwic");
        let mut clf = sample();
        clf.add_class("bird", &[&[0.0, 0.0, 1.0]]).unwrap();
        save_classifier(&clf, &path).unwrap();
        let back = load_classifier(&path).unwrap();
        assert_eq!(back.num_classes(), 3);
        assert_eq!(back.class_names()[2], "bird");
    }

    #[test]
    fn mismatched_declared_dim() {
        let mut bytes = write_classifier(&sample()).unwrap();
        bytes[6..10].copy_from_slice(&4u32.to_le_bytes());
        assert!(matches!(read_classifier(&bytes), Err(Error::Truncated(_))));
        bytes[6..10].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            read_classifier(&bytes),
            Err(Error::TrailingBytes(16))
        ));
    }

    #[test]
    fn format_errors() {
        let good = write_classifier(&sample()).unwrap();
        let mut bytes = good.clone();
        bytes[..4].copy_from_slice(b"MWIE");
        assert!(matches!(
            read_classifier(&bytes),
            Err(Error::BadMagic { .. })
        ));
        let mut bytes = good.clone();
        bytes[4] = 9;
        assert!(matches!(
            read_classifier(&bytes),
            Err(Error::UnsupportedVersion { found: 9, .. })
        ));
        let mut bytes = good.clone();
        bytes[14] = 7;
        assert!(matches!(
            read_classifier(&bytes),
            Err(Error::InvalidDataset(_))
        ));
        assert!(matches!(
            read_classifier(&good[..good.len() - 3]),
            Err(Error::Truncated(_))
        ));
    }
}
