//! Tabular binary-classification datasets and seeded labeled/unlabeled/test
//! partitions of their row indices.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Label column name written by [`write_csv`].
pub const LABEL_HEADER: &str = "label";

/// The 30-feature Wisconsin diagnostic breast cancer file (569 rows,
/// `diagnosis` is `M` or `B`, `id` is a sample identifier).
pub const WBC_CSV: &str = include_str!("../data/wbc.csv");

/// A dense feature matrix with binary labels.
///
/// Features are stored row-major; every value is finite and every label is
/// 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    source_id: String,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let n_cols = feature_names.len();
        let n_rows = rows.len();
        let mut features = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} values, expected {n_cols}",
                    row.len()
                )));
            }
            features.extend(row);
        }
        Self::from_flat(features, labels, feature_names, source_id)
    }

    /// Builds a dataset from a row-major feature buffer.
    pub fn from_flat(
        features: Vec<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let n_cols = feature_names.len();
        let n_rows = labels.len();
        if n_cols == 0 {
            return Err(Error::InvalidDataset("need at least one feature".into()));
        }
        if n_rows < 3 {
            return Err(Error::InvalidDataset(format!(
                "need at least 3 rows, got {n_rows}"
            )));
        }
        if features.len() != n_rows * n_cols {
            return Err(Error::InvalidDataset(format!(
                "feature buffer has {} values, expected {}",
                features.len(),
                n_rows * n_cols
            )));
        }
        if let Some(pos) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidDataset(format!(
                "label {} at row {pos} is not 0 or 1",
                labels[pos]
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, column {}",
                pos / n_cols,
                pos % n_cols
            )));
        }
        Ok(Self {
            features,
            n_rows,
            n_cols,
            labels,
            feature_names,
            source_id: source_id.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.features[i * self.n_cols + j])
    }
}

/// Which column of a CSV file holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    /// Zero-based position in the header.
    Index(usize),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// All-digit strings are read as positions, anything else as a name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Name(name) => write!(f, "{name}"),
            LabelColumn::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub label_column: LabelColumn,
    /// Raw label value mapped to class 1; the other value becomes class 0.
    pub positive_label: String,
    /// Non-feature columns (sample ids and the like) to discard.
    pub drop_columns: Vec<String>,
}

/// Loads a comma-delimited file with a header row.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let source_id = path.display().to_string();
    read_csv(file, &source_id, options)
}

/// Parses CSV text from any reader. `source_id` is used in error messages
/// and stored on the dataset.
pub fn read_csv<R: Read>(reader: R, source_id: &str, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let malformed = |row: usize, err: csv::Error| Error::MalformedCsv {
        source_id: source_id.to_string(),
        row,
        message: err.to_string(),
    };

    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(1, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyFile {
            source_id: source_id.to_string(),
        });
    }

    let label_idx = match &options.label_column {
        LabelColumn::Name(name) => header.iter().position(|h| h == name),
        LabelColumn::Index(i) => (*i < header.len()).then_some(*i),
    }
    .ok_or_else(|| Error::MissingLabelColumn {
        source_id: source_id.to_string(),
        column: options.label_column.to_string(),
    })?;
    let label_name = header[label_idx].clone();

    let mut dropped = BTreeSet::new();
    for name in &options.drop_columns {
        let idx =
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingDropColumn {
                    source_id: source_id.to_string(),
                    column: name.clone(),
                })?;
        dropped.insert(idx);
    }
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&j| j != label_idx && !dropped.contains(&j))
        .collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&j| header[j].clone()).collect();

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        // header is line 1
        let line = k + 2;
        let record = record.map_err(|e| malformed(line, e))?;
        if record.len() != header.len() {
            return Err(Error::MalformedCsv {
                source_id: source_id.to_string(),
                row: line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for &j in &feature_cols {
            let cell = &record[j];
            let value = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    source_id: source_id.to_string(),
                    row: line,
                    column: header[j].clone(),
                    value: cell.to_string(),
                })?;
            features.push(value);
        }
        raw_labels.push(record[label_idx].to_string());
    }
    if raw_labels.is_empty() {
        return Err(Error::EmptyFile {
            source_id: source_id.to_string(),
        });
    }

    let classes: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    if classes.len() != 2 {
        return Err(Error::LabelClasses {
            source_id: source_id.to_string(),
            column: label_name,
            found: classes.into_iter().map(str::to_string).collect(),
        });
    }
    if !classes.contains(options.positive_label.as_str()) {
        return Err(Error::UnknownPositiveLabel {
            source_id: source_id.to_string(),
            column: label_name,
            label: options.positive_label.clone(),
        });
    }
    let labels = raw_labels
        .iter()
        .map(|y| u8::from(*y == options.positive_label))
        .collect();

    Dataset::from_flat(features, labels, feature_names, source_id)
}

/// Writes the dataset as CSV: feature columns, then a `label` column holding
/// `0`/`1`. Floats use the shortest representation that parses back exactly.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::MalformedCsv {
        source_id: dataset.source_id.clone(),
        row: 0,
        message: e.to_string(),
    };
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(LABEL_HEADER);
    wtr.write_record(&header).map_err(to_err)?;
    for i in 0..dataset.n_rows {
        let mut record: Vec<String> = dataset.row(i).iter().map(f64::to_string).collect();
        record.push(dataset.labels[i].to_string());
        wtr.write_record(&record).map_err(to_err)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: dataset.source_id.clone().into(),
        source,
    })
}

/// The built-in WBC diagnostic dataset with `M` as the positive class and the
/// `id` column dropped. Not standardized.
pub fn wbc() -> Dataset {
    let options = CsvOptions {
        label_column: LabelColumn::Name("diagnosis".into()),
        positive_label: "M".into(),
        drop_columns: vec!["id".into()],
    };
    read_csv(WBC_CSV.as_bytes(), "builtin:wbc", &options).expect("bundled WBC file is valid")
}

/// Z-scores every column using the sample standard deviation (n - 1).
/// Constant columns become all zeros.
pub fn standardize(dataset: &Dataset) -> Dataset {
    let n = dataset.n_rows as f64;
    let mut out = dataset.clone();
    for j in 0..dataset.n_cols {
        let first = dataset.features[j];
        if dataset.column(j).all(|v| v == first) {
            for i in 0..dataset.n_rows {
                out.features[i * dataset.n_cols + j] = 0.0;
            }
            continue;
        }
        let mean = dataset.column(j).sum::<f64>() / n;
        let var = dataset.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        for i in 0..dataset.n_rows {
            let v = &mut out.features[i * dataset.n_cols + j];
            *v = (*v - mean) / sd;
        }
    }
    out
}

/// Disjoint labeled (L), unlabeled (U) and test (T) index sets covering
/// `0..n`. Each set is kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    test: Vec<usize>,
    seed: u64,
}

impl IndexPartition {
    pub fn new(
        mut labeled: Vec<usize>,
        mut unlabeled: Vec<usize>,
        mut test: Vec<usize>,
        seed: u64,
    ) -> Result<Self> {
        labeled.sort_unstable();
        unlabeled.sort_unstable();
        test.sort_unstable();
        let p = Self {
            labeled,
            unlabeled,
            test,
            seed,
        };
        let n = p.len();
        p.validate(n)?;
        Ok(p)
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total number of indices across the three sets.
    pub fn len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that the sets are pairwise disjoint, cover `0..n` and that T is
    /// non-empty.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.test.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        let mut seen = vec![false; n];
        for &i in self.labeled.iter().chain(&self.unlabeled).chain(&self.test) {
            if i >= n || seen[i] {
                return Err(Error::InvalidDataset(format!(
                    "index {i} is out of range or appears in more than one set"
                )));
            }
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidDataset(format!(
                "index {missing} is in none of L, U, T"
            )));
        }
        Ok(())
    }

    /// Returns the partition obtained by moving `batch` from U to L.
    pub fn advance(&self, batch: &[usize]) -> Result<Self> {
        let moving: BTreeSet<usize> = batch.iter().copied().collect();
        if moving.len() != batch.len() {
            return Err(Error::InvalidDataset("batch contains duplicates".into()));
        }
        if let Some(&bad) = moving
            .iter()
            .find(|i| self.unlabeled.binary_search(i).is_err())
        {
            return Err(Error::InvalidDataset(format!(
                "index {bad} is not in the unlabeled pool"
            )));
        }
        let mut labeled = self.labeled.clone();
        labeled.extend(batch);
        labeled.sort_unstable();
        let unlabeled = self
            .unlabeled
            .iter()
            .copied()
            .filter(|i| !moving.contains(i))
            .collect();
        Ok(Self {
            labeled,
            unlabeled,
            test: self.test.clone(),
            seed: self.seed,
        })
    }
}

/// Number of test points used for `n` rows: `round(n * test_fraction)`,
/// clamped to `1..=n-1`.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    ((n as f64 * test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Draws T uniformly, then L uniformly from the remainder; U is the rest.
pub fn make_partition(
    dataset: &Dataset,
    warmup_size: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<IndexPartition> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidTestFraction(test_fraction));
    }
    let n = dataset.n_rows;
    let n_test = test_size(n, test_fraction);
    let available = n - n_test;
    if warmup_size + 1 > available {
        return Err(Error::WarmupTooLarge {
            warmup: warmup_size,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let test = order[..n_test].to_vec();
    let labeled = order[n_test..n_test + warmup_size].to_vec();
    let unlabeled = order[n_test + warmup_size..].to_vec();
    IndexPartition::new(labeled, unlabeled, test, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opts(label: &str, positive: &str) -> CsvOptions {
        CsvOptions {
            label_column: LabelColumn::Name(label.into()),
            positive_label: positive.into(),
            drop_columns: vec![],
        }
    }

    fn toy(rows: usize) -> Dataset {
        let feats = (0..rows).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let labels = (0..rows).map(|i| (i % 2) as u8).collect();
        Dataset::new(feats, labels, vec!["a".into(), "b".into()], "toy").unwrap()
    }

    #[test]
    fn maps_positive_label_to_one() {
        let text = "x,y\n1.0,A\n2.0,B\n3.0,A\n";
        let d = read_csv(text.as_bytes(), "t", &opts("y", "A")).unwrap();
        assert_eq!(d.labels(), &[1, 0, 1]);
        assert_eq!(d.feature_names(), &["x".to_string()]);
        assert_eq!(d.row(2), &[3.0]);
    }

    #[test]
    fn label_column_by_index() {
        let text = "y,x\nA,1\nB,2\nB,3\n";
        let mut o = opts("y", "B");
        o.label_column = "0".parse().unwrap();
        let d = read_csv(text.as_bytes(), "t", &o).unwrap();
        assert_eq!(d.labels(), &[0, 1, 1]);
    }

    #[test]
    fn textual_feature_cell_is_located() {
        let text = "x,z,y\n1,2,A\n2,oops,B\n3,4,A\n";
        match read_csv(text.as_bytes(), "t", &opts("y", "A")) {
            Err(Error::NonNumericCell {
                row, column, value, ..
            }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "z");
                assert_eq!(value, "oops");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_three_classes_and_empty_files() {
        let text = "x,y\n1,A\n2,B\n3,C\n";
        assert!(matches!(
            read_csv(text.as_bytes(), "t", &opts("y", "A")),
            Err(Error::LabelClasses { .. })
        ));
        assert!(matches!(
            read_csv("".as_bytes(), "t", &opts("y", "A")),
            Err(Error::EmptyFile { .. })
        ));
        assert!(matches!(
            read_csv("x,y\n".as_bytes(), "t", &opts("y", "A")),
            Err(Error::EmptyFile { .. })
        ));
    }

    #[test]
    fn missing_file_is_reported() {
        let err = load_csv("/nonexistent/wbc.csv", &opts("y", "A")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn drop_columns_are_removed() {
        let text = "id,x,y\n10,1,A\n11,2,B\n12,3,A\n";
        let mut o = opts("y", "A");
        o.drop_columns = vec!["id".into()];
        let d = read_csv(text.as_bytes(), "t", &o).unwrap();
        assert_eq!(d.n_features(), 1);
        o.drop_columns = vec!["nope".into()];
        assert!(read_csv(text.as_bytes(), "t", &o).is_err());
    }

    #[test]
    fn bundled_wbc_shape() {
        let d = wbc();
        assert_eq!(d.n_rows(), 569);
        assert_eq!(d.n_features(), 30);
        assert_eq!(d.labels().iter().filter(|&&y| y == 1).count(), 212);
    }

    #[test]
    fn standardize_hand_cases() {
        let d = Dataset::new(
            vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]],
            vec![0, 1, 0],
            vec!["a".into(), "c".into()],
            "t",
        )
        .unwrap();
        let s = standardize(&d);
        for (i, want) in [-1.0, 0.0, 1.0].iter().enumerate() {
            assert!((s.row(i)[0] - want).abs() < 1e-15);
            assert_eq!(s.row(i)[1], 0.0);
        }
    }

    #[test]
    fn partition_counts_for_wbc_sizes() {
        let d = toy(569);
        let p = make_partition(&d, 50, 0.3, 7).unwrap();
        assert_eq!(p.test().len(), 171);
        assert_eq!(p.labeled().len(), 50);
        assert_eq!(p.unlabeled().len(), 348);
        p.validate(569).unwrap();
        assert_eq!(p, make_partition(&d, 50, 0.3, 7).unwrap());
        assert_ne!(p, make_partition(&d, 50, 0.3, 8).unwrap());
    }

    #[test]
    fn cold_start_partition_and_limits() {
        let d = toy(10);
        let p = make_partition(&d, 0, 0.3, 1).unwrap();
        assert!(p.labeled().is_empty());
        assert_eq!(p.unlabeled().len(), 7);
        assert!(matches!(
            make_partition(&d, 7, 0.3, 1),
            Err(Error::WarmupTooLarge { .. })
        ));
        assert!(make_partition(&d, 6, 0.3, 1).is_ok());
        assert!(make_partition(&d, 1, 1.0, 1).is_err());
    }

    #[test]
    fn advance_moves_indices() {
        let d = toy(20);
        let p = make_partition(&d, 3, 0.25, 3).unwrap();
        let batch = p.unlabeled()[..2].to_vec();
        let q = p.advance(&batch).unwrap();
        assert_eq!(q.labeled().len(), 5);
        assert_eq!(q.unlabeled().len(), p.unlabeled().len() - 2);
        q.validate(20).unwrap();
        assert!(p.advance(&[p.test()[0]]).is_err());
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_cover(
            n in 3usize..400,
            frac in 0.05f64..0.95,
            warm_share in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let d = toy(n);
            let available = n - test_size(n, frac);
            prop_assume!(available >= 1);
            let warmup = ((available - 1) as f64 * warm_share) as usize;
            let p = make_partition(&d, warmup, frac, seed).unwrap();
            prop_assert!(p.validate(n).is_ok());
            prop_assert_eq!(p.labeled().len(), warmup);
            prop_assert!(!p.unlabeled().is_empty());
        }

        #[test]
        fn standardize_is_idempotent(
            cols in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 5), 1..4)
        ) {
            let d_cols = cols.len();
            let rows: Vec<Vec<f64>> = (0..5).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
            let names = (0..d_cols).map(|j| format!("f{j}")).collect();
            let d = Dataset::new(rows, vec![0, 1, 0, 1, 1], names, "p").unwrap();
            let once = standardize(&d);
            let twice = standardize(&once);
            for i in 0..5 {
                for (a, b) in once.row(i).iter().zip(twice.row(i)) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn csv_round_trip_is_exact(
            values in proptest::collection::vec(-1e6f64..1e6, 12),
            flip in 0usize..4,
        ) {
            let rows: Vec<Vec<f64>> = values.chunks(3).map(<[f64]>::to_vec).collect();
            let mut labels = vec![0u8, 1, 0, 1];
            labels[flip] ^= 1;
            if labels.iter().all(|&y| y == labels[0]) { labels[0] ^= 1; }
            let names = vec!["a".to_string(), "b".into(), "c".into()];
            let d = Dataset::new(rows, labels, names, "rt").unwrap();
            let mut buf = Vec::new();
            write_csv(&d, &mut buf).unwrap();
            let o = CsvOptions {
                label_column: LabelColumn::Name(LABEL_HEADER.into()),
                positive_label: "1".into(),
                drop_columns: vec![],
            };
            let back = read_csv(buf.as_slice(), "rt", &o).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
