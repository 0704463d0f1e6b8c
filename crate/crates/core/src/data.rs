//! Labelled feature vectors: CSV ingestion, a synthetic surrogate, stratified
//! splitting and min-max normalization.
//!
//! Expected CSV schema: 12 numeric feature columns followed by one label
//! column holding a vowel name (`ae, ah, aw, er, ih, iy, uw`). A header row is
//! optional and detected by a non-numeric first field. Files that store the
//! label first, or carry speaker/id columns, must be reduced to this layout
//! beforehand (e.g. with `cut`).

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VOWEL_CLASSES: [&str; 7] = ["ae", "ah", "aw", "er", "ih", "iy", "uw"];
pub const VOWEL_FEATURES: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Class-balanced labelled dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VowelDataset {
    classes: Vec<String>,
    dim: usize,
    samples: Vec<Sample>,
}

impl VowelDataset {
    /// Validates dimensions, labels and equal per-class counts.
    pub fn new(classes: Vec<String>, dim: usize, samples: Vec<Sample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::Dataset(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.features.len()
                )));
            }
            if s.label >= classes.len() {
                return Err(Error::Dataset(format!("sample {i} has label index {}", s.label)));
            }
            if s.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::Dataset(format!("sample {i} has a non-finite feature")));
            }
        }
        let ds = VowelDataset { classes, dim, samples };
        let counts = ds.class_counts();
        if counts.windows(2).any(|w| w[0] != w[1]) {
            let listing: Vec<String> = ds
                .classes
                .iter()
                .zip(&counts)
                .map(|(c, k)| format!("{c}={k}"))
                .collect();
            return Err(Error::Dataset(format!("unequal class counts: {}", listing.join(", "))));
        }
        Ok(ds)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    fn with_samples(&self, samples: Vec<Sample>) -> Self {
        VowelDataset {
            classes: self.classes.clone(),
            dim: self.dim,
            samples,
        }
    }
}

/// Reads the 12-feature + label CSV layout described in the module docs.
pub fn load_dataset(path: &Path) -> Result<VowelDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<VowelDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let classes: Vec<String> = VOWEL_CLASSES.iter().map(|c| c.to_string()).collect();
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != VOWEL_FEATURES + 1 {
            return Err(Error::Dataset(format!(
                "row {} has {} columns, expected {} features + 1 label",
                row + 1,
                record.len(),
                VOWEL_FEATURES
            )));
        }
        let first = record.get(0).unwrap_or_default();
        if row == 0 && first.parse::<f64>().is_err() {
            continue;
        }
        let features = (0..VOWEL_FEATURES)
            .map(|c| {
                let field = record.get(c).unwrap_or_default();
                field.parse::<f64>().map_err(|_| {
                    Error::Dataset(format!("row {}, column {}: '{field}' is not a number", row + 1, c + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let name = record.get(VOWEL_FEATURES).unwrap_or_default();
        let label = classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Dataset(format!("row {}: unknown label '{name}'", row + 1)))?;
        samples.push(Sample { features, label });
    }
    if samples.is_empty() {
        return Err(Error::Dataset("no samples".into()));
    }
    VowelDataset::new(classes, VOWEL_FEATURES, samples)
}

/// Writes the same layout [`load_dataset`] reads, with a header row.
pub fn dataset_to_csv(ds: &VowelDataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..ds.dim()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for s in ds.samples() {
        let mut rec: Vec<String> = s.features.iter().map(|x| format!("{x:?}")).collect();
        rec.push(ds.classes()[s.label].clone());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Standard deviation of class centroids in units of the within-class spread.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: VOWEL_CLASSES.len(),
            per_class: 37,
            dim: VOWEL_FEATURES,
            separation: 1.0,
            seed: 0,
        }
    }
}

/// Isotropic Gaussian blobs around centroids drawn from `N(0, separation² I)`.
pub fn synth_dataset(spec: &SynthSpec) -> Result<VowelDataset> {
    if !(spec.separation > 0.0) || spec.classes == 0 || spec.per_class == 0 || spec.dim == 0 {
        return Err(Error::InvalidConfig(format!(
            "synthetic dataset needs positive classes, per_class, dim and separation (got {spec:?})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let centroids: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..spec.dim).map(|_| spec.separation * normal()).collect())
        .collect();
    let mut samples = Vec::with_capacity(spec.classes * spec.per_class);
    for (label, c) in centroids.iter().enumerate() {
        for _ in 0..spec.per_class {
            let features = c.iter().map(|mu| mu + normal()).collect();
            samples.push(Sample { features, label });
        }
    }
    let classes = if spec.classes == VOWEL_CLASSES.len() {
        VOWEL_CLASSES.iter().map(|c| c.to_string()).collect()
    } else {
        (0..spec.classes).map(|i| format!("c{i}")).collect()
    };
    VowelDataset::new(classes, spec.dim, samples)
}

/// Stratified split. Each class contributes `⌊(1 − ratio)·count⌋` samples to
/// the test side and the rest to the train side.
pub fn split_dataset(ds: &VowelDataset, ratio: f64, seed: u64) -> Result<(VowelDataset, VowelDataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, name) in ds.classes().iter().enumerate() {
        let mut members: Vec<&Sample> = ds.samples().iter().filter(|s| s.label == label).collect();
        let count = members.len();
        let n_test = ((1.0 - ratio) * count as f64 + 1e-9).floor() as usize;
        if n_test == 0 || n_test == count {
            return Err(Error::Dataset(format!(
                "class '{name}' has {count} samples, too few to split at ratio {ratio}"
            )));
        }
        members.shuffle(&mut rng);
        test.extend(members[..n_test].iter().map(|s| (*s).clone()));
        train.extend(members[n_test..].iter().map(|s| (*s).clone()));
    }
    Ok((ds.with_samples(train), ds.with_samples(test)))
}

/// Per-feature affine map onto `[0, π]`, fit on one dataset and applied to any.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(ds: &VowelDataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::Dataset("cannot fit a normalizer on an empty dataset".into()));
        }
        let mut min = vec![f64::INFINITY; ds.dim()];
        let mut max = vec![f64::NEG_INFINITY; ds.dim()];
        for s in ds.samples() {
            for (j, &x) in s.features.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(Normalizer { min, max })
    }

    /// Maps into `[0, π]`; values outside the fitted range are clamped and
    /// constant features map to `π/2`.
    pub fn transform_vec(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let span = hi - lo;
                if span <= 0.0 {
                    PI / 2.0
                } else {
                    (PI * (v - lo) / span).clamp(0.0, PI)
                }
            })
            .collect()
    }

    pub fn transform(&self, ds: &VowelDataset) -> VowelDataset {
        ds.with_samples(
            ds.samples()
                .iter()
                .map(|s| Sample {
                    features: self.transform_vec(&s.features),
                    label: s.label,
                })
                .collect(),
        )
    }
}

/// Fits the normalizer on `train` and applies it to both splits.
pub fn normalize_split(train: &VowelDataset, test: &VowelDataset) -> Result<(VowelDataset, VowelDataset, Normalizer)> {
    let norm = Normalizer::fit(train)?;
    Ok((norm.transform(train), norm.transform(test), norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical_csv(per_class: usize, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,f11,f12,vowel\n");
        }
        for (c, name) in VOWEL_CLASSES.iter().enumerate() {
            for k in 0..per_class {
                let row: Vec<String> = (0..12).map(|j| format!("{}", (c * 100 + k * 3 + j) as f64 * 0.5)).collect();
                out.push_str(&format!("{},{name}\n", row.join(",")));
            }
        }
        out
    }

    #[test]
    fn canonical_shape_loads() {
        let ds = parse_dataset(&canonical_csv(37, true)).unwrap();
        assert_eq!(ds.len(), 259);
        assert_eq!(ds.classes().len(), 7);
        assert_eq!(ds.class_counts(), vec![37; 7]);
        let no_header = parse_dataset(&canonical_csv(37, false)).unwrap();
        assert_eq!(ds, no_header);
    }

    #[test]
    fn wrong_column_count_names_it() {
        let text = "1,2,3,4,5,6,7,8,9,10,11,ae\n";
        let err = parse_dataset(text).unwrap_err().to_string();
        assert!(err.contains("12 columns"), "{err}");
    }

    #[test]
    fn unknown_label_and_unequal_counts() {
        let bad_label = "1,2,3,4,5,6,7,8,9,10,11,12,oo\n";
        assert!(parse_dataset(bad_label).unwrap_err().to_string().contains("unknown label"));
        let mut text = canonical_csv(2, false);
        text.push_str("1,2,3,4,5,6,7,8,9,10,11,12,ae\n");
        let err = parse_dataset(&text).unwrap_err().to_string();
        assert!(err.contains("ae=3") && err.contains("uw=2"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let ds = synth_dataset(&SynthSpec {
            per_class: 4,
            ..SynthSpec::default()
        })
        .unwrap();
        let back = parse_dataset(&dataset_to_csv(&ds).unwrap()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn synth_size_and_determinism() {
        let spec = SynthSpec::default();
        let a = synth_dataset(&spec).unwrap();
        assert_eq!(a.len(), 259);
        assert_eq!(a, synth_dataset(&spec).unwrap());
        assert!(synth_dataset(&SynthSpec { separation: 0.0, ..spec }).is_err());
    }

    fn nearest_centroid_accuracy(train: &VowelDataset, test: &VowelDataset) -> f64 {
        let k = train.classes().len();
        let mut centroids = vec![vec![0.0; train.dim()]; k];
        let counts = train.class_counts();
        for s in train.samples() {
            for (c, x) in centroids[s.label].iter_mut().zip(&s.features) {
                *c += x / counts[s.label] as f64;
            }
        }
        let hits = test
            .samples()
            .iter()
            .filter(|s| {
                let best = (0..k)
                    .min_by(|&a, &b| {
                        let da: f64 = centroids[a].iter().zip(&s.features).map(|(c, x)| (c - x).powi(2)).sum();
                        let db: f64 = centroids[b].iter().zip(&s.features).map(|(c, x)| (c - x).powi(2)).sum();
                        da.total_cmp(&db)
                    })
                    .unwrap();
                best == s.label
            })
            .count();
        hits as f64 / test.len() as f64
    }

    #[test]
    fn wide_separation_is_classically_separable() {
        let mut last = 0.0;
        for sep in [0.3, 3.0, 30.0] {
            let ds = synth_dataset(&SynthSpec {
                separation: sep,
                seed: 2,
                ..SynthSpec::default()
            })
            .unwrap();
            let (train, test) = split_dataset(&ds, 0.7, 1).unwrap();
            let acc = nearest_centroid_accuracy(&train, &test);
            assert!(acc >= last - 0.05);
            last = acc;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn stratified_split_counts() {
        let ds = synth_dataset(&SynthSpec::default()).unwrap();
        let (train, test) = split_dataset(&ds, 0.7, 3).unwrap();
        assert_eq!(train.class_counts(), vec![26; 7]);
        assert_eq!(test.class_counts(), vec![11; 7]);
        for s in test.samples() {
            assert!(!train.samples().contains(s));
        }
        assert_eq!(split_dataset(&ds, 0.7, 3).unwrap(), (train, test));
    }

    #[test]
    fn split_rejects_tiny_classes_and_bad_ratio() {
        let ds = synth_dataset(&SynthSpec {
            per_class: 1,
            ..SynthSpec::default()
        })
        .unwrap();
        assert!(split_dataset(&ds, 0.7, 0).is_err());
        let ds = synth_dataset(&SynthSpec::default()).unwrap();
        assert!(split_dataset(&ds, 1.0, 0).is_err());
    }

    #[test]
    fn normalization_range_and_idempotence() {
        let ds = synth_dataset(&SynthSpec::default()).unwrap();
        let (train, test) = split_dataset(&ds, 0.7, 0).unwrap();
        let (ntrain, ntest, _) = normalize_split(&train, &test).unwrap();
        for s in ntrain.samples().iter().chain(ntest.samples()) {
            assert!(s.features.iter().all(|x| (0.0..=PI).contains(x)));
        }
        let (again, _, _) = normalize_split(&ntrain, &ntest).unwrap();
        for (a, b) in again.samples().iter().zip(ntrain.samples()) {
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
