//! Binary model container.
//!
//! ```text
//! magic            8 bytes  "ATHALANG"
//! format_version   u32      currently 1
//! params section   u64 byte length, payload
//! registry section u64 byte length, payload
//! vocab section    u64 byte length, payload
//! trees section    u64 byte length, payload
//! ```
//!
//! All integers are little-endian; strings are `u32` byte length + UTF-8.
//! The full layout is described in `docs/model-format.md`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::corpus::ClassRegistry;
use crate::features::{FeatureConfig, FeatureKind, NgramRange, Vocabulary};
use crate::forest::{FeatureSampling, Forest, ForestModel, ForestParams, Node, Tree};

pub const MAGIC: &[u8; 8] = b"ATHALANG";
pub const FORMAT_VERSION: u32 = 1;

const NODE_LEAF: u8 = 0x00;
const NODE_SPLIT: u8 = 0x01;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("unsupported model file: expected {expected}, found {found}")]
    Version { expected: String, found: String },

    #[error("truncated model file in {section} section")]
    Truncated { section: &'static str },

    #[error("malformed {section} section: {message}")]
    Structure {
        section: &'static str,
        message: String,
    },
}

// -- writing --------------------------------------------------------------

#[derive(Default)]
struct Buf(Vec<u8>);

impl Buf {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn section(&mut self, payload: Buf) {
        self.u64(payload.0.len() as u64);
        self.0.extend_from_slice(&payload.0);
    }
}

fn params_payload(p: &ForestParams) -> Buf {
    let mut b = Buf::default();
    b.u32(p.n_trees as u32);
    b.u32(p.max_depth.unwrap_or(0) as u32);
    b.u32(p.min_samples_split as u32);
    let per_split = match p.features_per_split {
        FeatureSampling::Count(k) => k as u32,
        _ => unreachable!("trained forests carry a resolved feature count"),
    };
    b.u32(per_split);
    b.u8(u8::from(p.bootstrap));
    b.u64(p.seed);
    b
}

fn registry_payload(r: &ClassRegistry) -> Buf {
    let mut b = Buf::default();
    b.u32(r.len() as u32);
    for name in r.names() {
        b.str(name);
    }
    b
}

fn vocabulary_payload(v: &Vocabulary) -> Buf {
    let mut b = Buf::default();
    let cfg = v.config();
    b.u8(match cfg.kind {
        FeatureKind::Char => 0,
        FeatureKind::Word => 1,
    });
    b.u32(cfg.range.min as u32);
    b.u32(cfg.range.max as u32);
    b.u8(u8::from(cfg.fold_apostrophes));
    b.u32(v.dimension() as u32);
    for (g, c) in v.entries() {
        b.str(g);
        b.u64(*c);
    }
    b
}

fn trees_payload(trees: &[Tree]) -> Buf {
    let mut b = Buf::default();
    b.u32(trees.len() as u32);
    for t in trees {
        b.u32(t.nodes().len() as u32);
        for n in t.nodes() {
            match n {
                Node::Split {
                    feature, threshold, ..
                } => {
                    b.u8(NODE_SPLIT);
                    b.u32(*feature);
                    b.f64(*threshold);
                }
                Node::Leaf { class_counts } => {
                    b.u8(NODE_LEAF);
                    b.u32(class_counts.len() as u32);
                    for &(c, n) in class_counts {
                        b.u32(c);
                        b.u32(n);
                    }
                }
            }
        }
    }
    b
}

pub fn to_bytes(model: &ForestModel) -> Vec<u8> {
    let mut b = Buf::default();
    b.0.extend_from_slice(MAGIC);
    b.u32(FORMAT_VERSION);
    b.section(params_payload(model.forest().params()));
    b.section(registry_payload(model.registry()));
    b.section(vocabulary_payload(model.vocabulary()));
    b.section(trees_payload(model.forest().trees()));
    b.0
}

pub fn write_model<W: Write>(model: &ForestModel, mut w: W) -> Result<(), FormatError> {
    w.write_all(&to_bytes(model))?;
    w.flush()?;
    Ok(())
}

// -- reading --------------------------------------------------------------

struct Cursor<'a> {
    bytes: &'a [u8],
    section: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.bytes.len() < n {
            return Err(FormatError::Truncated {
                section: self.section,
            });
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, FormatError> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.bad("invalid UTF-8 string"))
    }
    fn bad(&self, message: impl Into<String>) -> FormatError {
        FormatError::Structure {
            section: self.section,
            message: message.into(),
        }
    }
    /// Splits off the next length-prefixed section.
    fn section(&mut self, name: &'static str) -> Result<Cursor<'a>, FormatError> {
        self.section = name;
        let len = self.u64()?;
        let len = usize::try_from(len).map_err(|_| self.bad("section length overflows"))?;
        Ok(Cursor {
            bytes: self.take(len)?,
            section: name,
        })
    }
    fn finish(&self) -> Result<(), FormatError> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(self.bad(format!("{} unexpected trailing bytes", self.bytes.len())))
        }
    }
    /// Guards allocations driven by untrusted counts.
    fn check_count(&self, count: usize, min_item_size: usize) -> Result<(), FormatError> {
        if count.saturating_mul(min_item_size) > self.bytes.len() {
            return Err(FormatError::Truncated {
                section: self.section,
            });
        }
        Ok(())
    }
}

fn read_params(c: &mut Cursor) -> Result<ForestParams, FormatError> {
    let n_trees = c.u32()? as usize;
    let max_depth = match c.u32()? {
        0 => None,
        d => Some(d as usize),
    };
    let min_samples_split = c.u32()? as usize;
    let per_split = c.u32()? as usize;
    let bootstrap = match c.u8()? {
        0 => false,
        1 => true,
        other => return Err(c.bad(format!("bootstrap flag {other:#04x}"))),
    };
    let seed = c.u64()?;
    c.finish()?;
    Ok(ForestParams {
        n_trees,
        max_depth,
        min_samples_split,
        features_per_split: FeatureSampling::Count(per_split),
        bootstrap,
        seed,
    })
}

fn read_registry(c: &mut Cursor) -> Result<ClassRegistry, FormatError> {
    let n = c.u32()? as usize;
    c.check_count(n, 4)?;
    let names = (0..n).map(|_| c.str()).collect::<Result<Vec<_>, _>>()?;
    c.finish()?;
    ClassRegistry::new(names).map_err(|e| c.bad(e.to_string()))
}

fn read_vocabulary(c: &mut Cursor) -> Result<Vocabulary, FormatError> {
    let kind = match c.u8()? {
        0 => FeatureKind::Char,
        1 => FeatureKind::Word,
        other => return Err(c.bad(format!("feature kind {other:#04x}"))),
    };
    let min = c.u32()? as usize;
    let max = c.u32()? as usize;
    let range = NgramRange::new(min, max).map_err(|e| c.bad(e.to_string()))?;
    let fold_apostrophes = match c.u8()? {
        0 => false,
        1 => true,
        other => return Err(c.bad(format!("flags byte {other:#04x}"))),
    };
    let n = c.u32()? as usize;
    c.check_count(n, 12)?;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let g = c.str()?;
        let count = c.u64()?;
        entries.push((g, count));
    }
    c.finish()?;
    let config = FeatureConfig {
        kind,
        range,
        fold_apostrophes,
    };
    Vocabulary::from_entries(config, entries).map_err(|e| c.bad(e.to_string()))
}

fn read_trees(c: &mut Cursor) -> Result<Vec<Tree>, FormatError> {
    let n_trees = c.u32()? as usize;
    c.check_count(n_trees, 4)?;
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let n_nodes = c.u32()? as usize;
        c.check_count(n_nodes, 5)?;
        let mut items = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            match c.u8()? {
                NODE_SPLIT => {
                    let feature = c.u32()?;
                    let threshold = c.f64()?;
                    items.push(Ok((feature, threshold)));
                }
                NODE_LEAF => {
                    let pairs = c.u32()? as usize;
                    c.check_count(pairs, 8)?;
                    let mut counts = Vec::with_capacity(pairs);
                    for _ in 0..pairs {
                        counts.push((c.u32()?, c.u32()?));
                    }
                    items.push(Err(counts));
                }
                other => {
                    return Err(c.bad(format!("tree {t}: unknown node flag {other:#04x}")));
                }
            }
        }
        trees.push(Tree::from_preorder(items).map_err(|e| c.bad(format!("tree {t}: {e}")))?);
    }
    c.finish()?;
    Ok(trees)
}

pub fn from_bytes(bytes: &[u8]) -> Result<ForestModel, FormatError> {
    let expected = || format!("{} v{FORMAT_VERSION}", String::from_utf8_lossy(MAGIC));
    if bytes.is_empty() {
        return Err(FormatError::Version {
            expected: expected(),
            found: "empty stream".into(),
        });
    }
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        let head = &bytes[..bytes.len().min(8)];
        return Err(FormatError::Version {
            expected: expected(),
            found: format!("magic {:?}", String::from_utf8_lossy(head)),
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(FormatError::Version {
            expected: expected(),
            found: format!("version {version}"),
        });
    }

    let mut top = Cursor {
        bytes: &bytes[12..],
        section: "header",
    };
    let params = read_params(&mut top.section("params")?)?;
    let registry = read_registry(&mut top.section("registry")?)?;
    let vocabulary = read_vocabulary(&mut top.section("vocabulary")?)?;
    let mut tree_cursor = top.section("trees")?;
    let trees = read_trees(&mut tree_cursor)?;
    top.section = "trailer";
    top.finish()?;

    let forest = Forest::from_parts(params, registry.len(), vocabulary.dimension(), trees)
        .map_err(|e| FormatError::Structure {
            section: "trees",
            message: e.to_string(),
        })?;
    ForestModel::new(forest, vocabulary, registry).map_err(|e| FormatError::Structure {
        section: "model",
        message: e.to_string(),
    })
}

pub fn read_model<R: Read>(mut r: R) -> Result<ForestModel, FormatError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
