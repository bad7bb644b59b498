//! Binary model file. See `docs/model-format.md` for the byte layout.
//!
//! All numerics are little-endian. The file is
//! `header | section table | section payloads | crc64`, where the trailing
//! CRC-64/XZ covers every preceding byte.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use crc::{Crc, CRC_64_XZ};

use super::binning::{FeatureInfo, FeatureKind};
use super::model::{Model, TrainingMetadata};
use super::tree::{Node, SplitRule, Tree};
use super::{CatMode, GbdtConfig};
use crate::encode::{ColumnStats, EncoderMode, EncoderSpec, FittedEncoder};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"CTRBOOST";
pub const FORMAT_VERSION: u32 = 1;

const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);
const HEADER_LEN: usize = 8 + 4 + 8 + 4;
const ENTRY_LEN: usize = 4 + 8 + 8;

const TAG_CONFIG: [u8; 4] = *b"CONF";
const TAG_BINS: [u8; 4] = *b"BINS";
const TAG_ENCODER: [u8; 4] = *b"ENCD";
const TAG_TREES: [u8; 4] = *b"TREE";
const TAG_META: [u8; 4] = *b"META";

/// Writes `model` to `path`.
pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

/// Reads and validates a model file.
pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let sections: [([u8; 4], Vec<u8>); 5] = [
        (TAG_CONFIG, write_config(&model.config)),
        (TAG_BINS, write_bins(&model.features)),
        (TAG_ENCODER, write_encoder(model.encoder.as_ref())),
        (TAG_TREES, write_trees(model.base_score, &model.trees)),
        (TAG_META, write_meta(&model.metadata)),
    ];
    let payload_len: usize = sections.iter().map(|(_, s)| s.len()).sum();
    let total = HEADER_LEN + ENTRY_LEN * sections.len() + payload_len + 8;

    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u64(&mut out, total as u64);
    put_u32(&mut out, sections.len() as u32);
    let mut offset = HEADER_LEN + ENTRY_LEN * sections.len();
    for (tag, payload) in &sections {
        out.extend_from_slice(tag);
        put_u64(&mut out, offset as u64);
        put_u64(&mut out, payload.len() as u64);
        offset += payload.len();
    }
    for (_, payload) in &sections {
        out.extend_from_slice(payload);
    }
    let crc = CHECKSUM.checksum(&out);
    put_u64(&mut out, crc);
    debug_assert_eq!(out.len(), total);
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < HEADER_LEN + 8 {
        return Err(Error::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let computed = CHECKSUM.checksum(body);
    if stored != computed {
        let declared = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        if bytes[..8] == MAGIC && declared > bytes.len() as u64 {
            return Err(Error::Truncated);
        }
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    if bytes[..8] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut header = Cursor::new(&body[8..]);
    let version = header.read_u32::<LE>().map_err(eof)?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let declared = header.read_u64::<LE>().map_err(eof)?;
    if declared != bytes.len() as u64 {
        return Err(Error::Malformed(format!(
            "declared length {declared} differs from file length {}",
            bytes.len()
        )));
    }
    let n_sections = header.read_u32::<LE>().map_err(eof)? as usize;
    let mut config = None;
    let mut bins = None;
    let mut encoder = None;
    let mut trees = None;
    let mut meta = None;
    for _ in 0..n_sections {
        let mut tag = [0u8; 4];
        header.read_exact(&mut tag).map_err(eof)?;
        let offset = header.read_u64::<LE>().map_err(eof)? as usize;
        let len = header.read_u64::<LE>().map_err(eof)? as usize;
        let end = offset
            .checked_add(len)
            .filter(|&e| e <= body.len())
            .ok_or(Error::Truncated)?;
        let mut r = Reader(Cursor::new(&body[offset..end]));
        match tag {
            TAG_CONFIG => config = Some(read_config(&mut r)?),
            TAG_BINS => bins = Some(read_bins(&mut r)?),
            TAG_ENCODER => encoder = Some(read_encoder(&mut r)?),
            TAG_TREES => trees = Some(read_trees(&mut r)?),
            TAG_META => meta = Some(read_meta(&mut r)?),
            // Unknown sections are skipped.
            _ => continue,
        }
        if r.0.position() as usize != len {
            return Err(Error::Malformed(format!(
                "section {} has trailing bytes",
                String::from_utf8_lossy(&tag)
            )));
        }
    }
    let missing = |name: &str| Error::Malformed(format!("missing {name} section"));
    let (base_score, trees) = trees.ok_or_else(|| missing("TREE"))?;
    let model = Model {
        config: config.ok_or_else(|| missing("CONF"))?,
        base_score,
        features: bins.ok_or_else(|| missing("BINS"))?,
        encoder: encoder.ok_or_else(|| missing("ENCD"))?,
        trees,
        metadata: meta.ok_or_else(|| missing("META"))?,
    };
    validate(&model)?;
    Ok(model)
}

fn validate(model: &Model) -> Result<()> {
    for (t, tree) in model.trees.iter().enumerate() {
        let bad = |msg: String| Err(Error::Malformed(format!("tree {t}: {msg}")));
        if tree.nodes.is_empty() {
            return bad("no nodes".into());
        }
        for (i, node) in tree.nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                rule,
                left,
                right,
                ..
            } = node
            {
                let Some(info) = model.features.get(*feature as usize) else {
                    return bad(format!("node {i} uses unknown feature {feature}"));
                };
                // Children come after their parent, which also rules out cycles.
                for child in [*left, *right] {
                    if child as usize <= i || child as usize >= tree.nodes.len() {
                        return bad(format!("node {i} has invalid child {child}"));
                    }
                }
                match (rule, &info.kind) {
                    (SplitRule::Numeric { .. }, FeatureKind::Numeric { .. }) => {}
                    (SplitRule::Categorical { left }, FeatureKind::Categorical { dictionary }) => {
                        if left.iter().any(|&c| c as usize >= dictionary.len()) || left.windows(2).any(|w| w[0] >= w[1])
                        {
                            return bad(format!("node {i} has an invalid category set"));
                        }
                    }
                    _ => return bad(format!("node {i} rule does not match feature kind")),
                }
            }
        }
    }
    Ok(())
}

fn eof(_: std::io::Error) -> Error {
    Error::Truncated
}

fn put_u8(out: &mut Vec<u8>, v: u8) {
    out.push(v);
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.write_u32::<LE>(v).expect("write to Vec");
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.write_u64::<LE>(v).expect("write to Vec");
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.write_f64::<LE>(v).expect("write to Vec");
}

fn put_len(out: &mut Vec<u8>, n: usize) {
    put_u32(out, u32::try_from(n).expect("length fits in u32"));
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_len(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    put_len(out, values.len());
    values.iter().for_each(|&v| put_f64(out, v));
}

struct Reader<'a>(Cursor<&'a [u8]>);

impl Reader<'_> {
    fn u8(&mut self) -> Result<u8> {
        self.0.read_u8().map_err(eof)
    }

    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Malformed(format!("invalid boolean byte {b}"))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        self.0.read_u32::<LE>().map_err(eof)
    }

    fn u64(&mut self) -> Result<u64> {
        self.0.read_u64::<LE>().map_err(eof)
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Malformed("value exceeds usize".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        self.0.read_f64::<LE>().map_err(eof)
    }

    /// Element count, checked against the bytes left so a corrupt count
    /// cannot trigger a huge allocation.
    fn len(&mut self, min_item_bytes: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        let remaining = self.0.get_ref().len() - self.0.position() as usize;
        if n.saturating_mul(min_item_bytes) > remaining {
            return Err(Error::Truncated);
        }
        Ok(n)
    }

    fn str(&mut self) -> Result<String> {
        let n = self.len(1)?;
        let mut buf = vec![0u8; n];
        self.0.read_exact(&mut buf).map_err(eof)?;
        String::from_utf8(buf).map_err(|_| Error::Malformed("invalid UTF-8 string".into()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
}

fn write_config(c: &GbdtConfig) -> Vec<u8> {
    let mut out = Vec::new();
    put_u64(&mut out, c.n_trees as u64);
    put_f64(&mut out, c.learning_rate);
    put_u64(&mut out, c.max_depth as u64);
    put_f64(&mut out, c.lambda);
    put_f64(&mut out, c.gamma);
    put_f64(&mut out, c.min_child_weight);
    put_u64(&mut out, c.max_bins as u64);
    put_u64(&mut out, c.min_category_count);
    put_u64(&mut out, c.early_stopping_rounds as u64);
    put_u8(
        &mut out,
        match c.cat_mode {
            CatMode::Native => 0,
            CatMode::Encoded => 1,
        },
    );
    put_u64(&mut out, c.seed);
    out
}

fn read_config(r: &mut Reader) -> Result<GbdtConfig> {
    Ok(GbdtConfig {
        n_trees: r.usize()?,
        learning_rate: r.f64()?,
        max_depth: r.usize()?,
        lambda: r.f64()?,
        gamma: r.f64()?,
        min_child_weight: r.f64()?,
        max_bins: r.usize()?,
        min_category_count: r.u64()?,
        early_stopping_rounds: r.usize()?,
        cat_mode: match r.u8()? {
            0 => CatMode::Native,
            1 => CatMode::Encoded,
            b => return Err(Error::Malformed(format!("unknown cat_mode {b}"))),
        },
        seed: r.u64()?,
    })
}

fn write_bins(features: &[FeatureInfo]) -> Vec<u8> {
    let mut out = Vec::new();
    put_len(&mut out, features.len());
    for f in features {
        put_str(&mut out, &f.name);
        match &f.kind {
            FeatureKind::Numeric { thresholds } => {
                put_u8(&mut out, 0);
                put_f64s(&mut out, thresholds);
            }
            FeatureKind::Categorical { dictionary } => {
                put_u8(&mut out, 1);
                put_len(&mut out, dictionary.len());
                dictionary.iter().for_each(|s| put_str(&mut out, s));
            }
        }
    }
    out
}

fn read_bins(r: &mut Reader) -> Result<Vec<FeatureInfo>> {
    let n = r.len(5)?;
    (0..n)
        .map(|_| {
            let name = r.str()?;
            let kind = match r.u8()? {
                0 => FeatureKind::Numeric { thresholds: r.f64s()? },
                1 => {
                    let n = r.len(4)?;
                    FeatureKind::Categorical {
                        dictionary: (0..n).map(|_| r.str()).collect::<Result<_>>()?,
                    }
                }
                b => return Err(Error::Malformed(format!("unknown feature kind {b}"))),
            };
            Ok(FeatureInfo { name, kind })
        })
        .collect()
}

fn mode_byte(mode: EncoderMode) -> u8 {
    match mode {
        EncoderMode::Label => 0,
        EncoderMode::Target => 1,
        EncoderMode::KfoldTarget => 2,
        EncoderMode::OrderedTs => 3,
        EncoderMode::NativePassthrough => 4,
    }
}

fn write_encoder(encoder: Option<&FittedEncoder>) -> Vec<u8> {
    let mut out = Vec::new();
    let Some(enc) = encoder else {
        put_u8(&mut out, 0);
        return out;
    };
    put_u8(&mut out, 1);
    let spec = &enc.spec;
    put_u8(&mut out, mode_byte(spec.mode));
    put_f64(&mut out, spec.smoothing);
    put_u64(&mut out, spec.k_folds as u64);
    put_u64(&mut out, spec.n_permutations as u64);
    put_u64(&mut out, spec.seed);
    match spec.prior {
        Some(p) => {
            put_u8(&mut out, 1);
            put_f64(&mut out, p);
        }
        None => put_u8(&mut out, 0),
    }
    put_f64(&mut out, enc.prior);
    put_len(&mut out, enc.columns.len());
    for col in &enc.columns {
        put_str(&mut out, &col.name);
        put_len(&mut out, col.dictionary.len());
        col.dictionary.iter().for_each(|s| put_str(&mut out, s));
        col.target_sums.iter().for_each(|&v| put_f64(&mut out, v));
        col.counts.iter().for_each(|&v| put_u64(&mut out, v));
    }
    out
}

fn read_encoder(r: &mut Reader) -> Result<Option<FittedEncoder>> {
    if !r.bool()? {
        return Ok(None);
    }
    let mode = match r.u8()? {
        0 => EncoderMode::Label,
        1 => EncoderMode::Target,
        2 => EncoderMode::KfoldTarget,
        3 => EncoderMode::OrderedTs,
        4 => EncoderMode::NativePassthrough,
        b => return Err(Error::Malformed(format!("unknown encoder mode {b}"))),
    };
    let smoothing = r.f64()?;
    let k_folds = r.usize()?;
    let n_permutations = r.usize()?;
    let seed = r.u64()?;
    let prior_override = if r.bool()? { Some(r.f64()?) } else { None };
    let spec = EncoderSpec {
        mode,
        smoothing,
        k_folds,
        n_permutations,
        seed,
        prior: prior_override,
    };
    let prior = r.f64()?;
    let n_cols = r.len(8)?;
    let columns = (0..n_cols)
        .map(|_| {
            let name = r.str()?;
            let card = r.len(4 + 8 + 8)?;
            let dictionary = (0..card).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
            let target_sums = (0..card).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let counts = (0..card).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            Ok(ColumnStats {
                name,
                dictionary,
                target_sums,
                counts,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Some(FittedEncoder { spec, prior, columns }))
}

fn write_trees(base_score: f64, trees: &[Tree]) -> Vec<u8> {
    let mut out = Vec::new();
    put_f64(&mut out, base_score);
    put_len(&mut out, trees.len());
    for tree in trees {
        put_len(&mut out, tree.nodes.len());
        for node in &tree.nodes {
            match node {
                Node::Leaf { weight } => {
                    put_u8(&mut out, 0);
                    put_f64(&mut out, *weight);
                }
                Node::Split {
                    feature,
                    rule,
                    default_left,
                    gain,
                    left,
                    right,
                } => {
                    put_u8(&mut out, 1);
                    put_u32(&mut out, *feature);
                    put_u8(&mut out, u8::from(*default_left));
                    put_f64(&mut out, *gain);
                    put_u32(&mut out, *left);
                    put_u32(&mut out, *right);
                    match rule {
                        SplitRule::Numeric { threshold, bin } => {
                            put_u8(&mut out, 0);
                            put_f64(&mut out, *threshold);
                            put_u32(&mut out, *bin);
                        }
                        SplitRule::Categorical { left } => {
                            put_u8(&mut out, 1);
                            put_len(&mut out, left.len());
                            left.iter().for_each(|&c| put_u32(&mut out, c));
                        }
                    }
                }
            }
        }
    }
    out
}

fn read_trees(r: &mut Reader) -> Result<(f64, Vec<Tree>)> {
    let base_score = r.f64()?;
    let n_trees = r.len(4)?;
    let trees = (0..n_trees)
        .map(|_| {
            let n_nodes = r.len(9)?;
            let nodes = (0..n_nodes)
                .map(|_| match r.u8()? {
                    0 => Ok(Node::Leaf { weight: r.f64()? }),
                    1 => {
                        let feature = r.u32()?;
                        let default_left = r.bool()?;
                        let gain = r.f64()?;
                        let left = r.u32()?;
                        let right = r.u32()?;
                        let rule = match r.u8()? {
                            0 => SplitRule::Numeric {
                                threshold: r.f64()?,
                                bin: r.u32()?,
                            },
                            1 => {
                                let n = r.len(4)?;
                                SplitRule::Categorical {
                                    left: (0..n).map(|_| r.u32()).collect::<Result<_>>()?,
                                }
                            }
                            b => return Err(Error::Malformed(format!("unknown split rule {b}"))),
                        };
                        Ok(Node::Split {
                            feature,
                            rule,
                            default_left,
                            gain,
                            left,
                            right,
                        })
                    }
                    b => Err(Error::Malformed(format!("unknown node tag {b}"))),
                })
                .collect::<Result<_>>()?;
            Ok(Tree { nodes })
        })
        .collect::<Result<_>>()?;
    Ok((base_score, trees))
}

fn write_meta(m: &TrainingMetadata) -> Vec<u8> {
    let mut out = Vec::new();
    put_u64(&mut out, m.seed);
    put_u64(&mut out, m.n_train_rows as u64);
    put_u64(&mut out, m.n_valid_rows as u64);
    put_f64(&mut out, m.train_positive_rate);
    put_u64(&mut out, m.iterations_run as u64);
    put_u64(&mut out, m.best_iteration as u64);
    put_u8(&mut out, u8::from(m.stopped_early));
    put_f64s(&mut out, &m.train_logloss);
    put_f64s(&mut out, &m.valid_logloss);
    out
}

fn read_meta(r: &mut Reader) -> Result<TrainingMetadata> {
    Ok(TrainingMetadata {
        seed: r.u64()?,
        n_train_rows: r.usize()?,
        n_valid_rows: r.usize()?,
        train_positive_rate: r.f64()?,
        iterations_run: r.usize()?,
        best_iteration: r.usize()?,
        stopped_early: r.bool()?,
        train_logloss: r.f64s()?,
        valid_logloss: r.f64s()?,
    })
}
