use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Compressed sparse storage (shared layout for rows and columns).
#[derive(Debug, Clone, Default)]
struct Compressed {
    ptr: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<u32>,
}

impl Compressed {
    fn slice(&self, i: usize) -> (&[u32], &[u32]) {
        let (a, b) = (self.ptr[i], self.ptr[i + 1]);
        (&self.idx[a..b], &self.val[a..b])
    }
}

/// Labeled sparse count matrix held both row-major and column-major, so
/// split search can gather a feature column for a node from whichever side
/// is cheaper.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    rows: Compressed,
    cols: Compressed,
    labels: Vec<u32>,
    n_classes: usize,
    dimension: usize,
}

impl TrainingSet {
    pub fn new(x: &[FeatureVector], y: &[u32], n_classes: usize) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(y.len(), x.len()));
        }
        let dimension = x[0].dimension();
        if let Some(bad) = x.iter().find(|v| v.dimension() != dimension) {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: bad.dimension(),
            });
        }
        if let Some(&label) = y.iter().find(|&&l| l as usize >= n_classes) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: n_classes,
            });
        }

        let nnz: usize = x.iter().map(|v| v.entries().len()).sum();
        let mut rows = Compressed {
            ptr: Vec::with_capacity(x.len() + 1),
            idx: Vec::with_capacity(nnz),
            val: Vec::with_capacity(nnz),
        };
        rows.ptr.push(0);
        let mut col_len = vec![0usize; dimension];
        for v in x {
            for &(f, c) in v.entries() {
                rows.idx.push(f);
                rows.val.push(c);
                col_len[f as usize] += 1;
            }
            rows.ptr.push(rows.idx.len());
        }

        let mut ptr = Vec::with_capacity(dimension + 1);
        ptr.push(0);
        for len in &col_len {
            ptr.push(ptr.last().unwrap() + len);
        }
        let mut fill = ptr[..dimension].to_vec();
        let mut idx = vec![0u32; nnz];
        let mut val = vec![0u32; nnz];
        for r in 0..x.len() {
            let (fs, cs) = rows.slice(r);
            for (&f, &c) in fs.iter().zip(cs) {
                let at = &mut fill[f as usize];
                idx[*at] = r as u32;
                val[*at] = c;
                *at += 1;
            }
        }
        let cols = Compressed { ptr, idx, val };

        Ok(Self {
            rows,
            cols,
            labels: y.to_vec(),
            n_classes,
            dimension,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, row: u32) -> u32 {
        self.labels[row as usize]
    }

    /// Value of `feature` in `row` (0 when absent).
    pub fn value(&self, row: u32, feature: u32) -> u32 {
        let (fs, cs) = self.rows.slice(row as usize);
        match fs.binary_search(&feature) {
            Ok(p) => cs[p],
            Err(_) => 0,
        }
    }

    /// Nonzero `(row, value)` pairs of a feature column, rows ascending.
    pub(crate) fn column(&self, feature: u32) -> (&[u32], &[u32]) {
        self.cols.slice(feature as usize)
    }

    /// Dense copy of one row.
    pub fn dense_row(&self, row: u32) -> Vec<u32> {
        let mut out = vec![0; self.dimension];
        let (fs, cs) = self.rows.slice(row as usize);
        for (&f, &c) in fs.iter().zip(cs) {
            out[f as usize] = c;
        }
        out
    }
}
