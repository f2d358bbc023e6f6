//! Seeded synthetic graphs for tests and experiments.
//!
//! Specs can be written as whitespace- or newline-separated `key=value`
//! pairs, `#` starting a comment:
//!
//! ```text
//! kind=sbm blocks=100,100 p_in=0.2 p_out=0.01
//! features=gaussian dim=16 signal=1.5
//! labels=blocks train=0.6 val=0.2 seed=7
//! ```
//!
//! Keys: `kind` (`er`, `sbm`, `star`, `path`, `grid`), `n`, `p`, `blocks`,
//! `p_in`, `p_out`, `leaves`, `rows`, `cols`, `features` (`onehot`,
//! `gaussian`), `dim`, `signal`, `labels` (`blocks`, `modulo`), `classes`,
//! `train`, `val` (fractions) or `train_per_class`, `val_count`,
//! `test_count`, and `seed`.

use std::collections::HashMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DataError, Dataset, Splits};
use crate::graph::SparseGraph;

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    ErdosRenyi {
        n: usize,
        p: f64,
    },
    /// Stochastic block model; blocks are contiguous id ranges.
    Sbm {
        block_sizes: Vec<usize>,
        p_in: f64,
        p_out: f64,
    },
    /// Node 0 joined to `leaves` others.
    Star {
        leaves: usize,
    },
    Path {
        n: usize,
    },
    Grid {
        rows: usize,
        cols: usize,
    },
}

impl Generator {
    pub fn num_nodes(&self) -> usize {
        match self {
            Generator::ErdosRenyi { n, .. } | Generator::Path { n } => *n,
            Generator::Sbm { block_sizes, .. } => block_sizes.iter().sum(),
            Generator::Star { leaves } => leaves + 1,
            Generator::Grid { rows, cols } => rows * cols,
        }
    }

    /// Block id of every node; a single block for non-SBM generators.
    pub fn blocks(&self) -> Vec<usize> {
        match self {
            Generator::Sbm { block_sizes, .. } => block_sizes
                .iter()
                .enumerate()
                .flat_map(|(k, &size)| std::iter::repeat_n(k, size))
                .collect(),
            other => vec![0; other.num_nodes()],
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(DataError::Spec(format!("{name}={p} is not a probability")))
            }
        };
        match self {
            Generator::ErdosRenyi { p, .. } => prob("p", *p)?,
            Generator::Sbm {
                block_sizes,
                p_in,
                p_out,
            } => {
                if block_sizes.is_empty() {
                    return Err(DataError::Spec("sbm needs at least one block".into()));
                }
                prob("p_in", *p_in)?;
                prob("p_out", *p_out)?;
            }
            _ => {}
        }
        if self.num_nodes() == 0 {
            return Err(DataError::Spec("graph has no nodes".into()));
        }
        Ok(())
    }

    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SparseGraph, DataError> {
        self.validate()?;
        let n = self.num_nodes();
        let mut edges = Vec::new();
        match self {
            Generator::ErdosRenyi { p, .. } => {
                for u in 0..n {
                    for v in u + 1..n {
                        if rng.random_bool(*p) {
                            edges.push((u, v));
                        }
                    }
                }
            }
            Generator::Sbm { p_in, p_out, .. } => {
                let blocks = self.blocks();
                for u in 0..n {
                    for v in u + 1..n {
                        let p = if blocks[u] == blocks[v] { *p_in } else { *p_out };
                        if rng.random_bool(p) {
                            edges.push((u, v));
                        }
                    }
                }
            }
            Generator::Star { leaves } => edges.extend((1..=*leaves).map(|l| (0, l))),
            Generator::Path { .. } => edges.extend((1..n).map(|v| (v - 1, v))),
            Generator::Grid { rows, cols } => {
                for r in 0..*rows {
                    for c in 0..*cols {
                        let v = r * cols + c;
                        if c + 1 < *cols {
                            edges.push((v, v + 1));
                        }
                        if r + 1 < *rows {
                            edges.push((v, v + cols));
                        }
                    }
                }
            }
        }
        Ok(SparseGraph::from_edges(n, &edges)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureKind {
    /// Identity features, one column per node.
    OneHot,
    /// `x_v = signal * mu_{y_v} + e_v` with standard normal class means and
    /// noise.
    Gaussian { dim: usize, signal: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelRule {
    Blocks,
    Modulo { classes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    /// Random fractions for train and validation; the rest is test.
    Fractions { train: f64, val: f64 },
    /// `train_per_class` nodes of every class for training, then `val` and
    /// `test` nodes drawn from the remainder.
    PerClass {
        train_per_class: usize,
        val: usize,
        test: usize,
    },
}

const KNOWN_KEYS: &[&str] = &[
    "kind",
    "n",
    "p",
    "blocks",
    "p_in",
    "p_out",
    "leaves",
    "rows",
    "cols",
    "features",
    "dim",
    "signal",
    "labels",
    "classes",
    "train",
    "val",
    "train_per_class",
    "val_count",
    "test_count",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub generator: Generator,
    pub features: FeatureKind,
    pub labels: LabelRule,
    pub split: SplitRule,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(generator: Generator) -> Self {
        Self {
            generator,
            features: FeatureKind::Gaussian { dim: 16, signal: 1.0 },
            labels: LabelRule::Blocks,
            split: SplitRule::Fractions { train: 0.6, val: 0.2 },
            seed: 0,
        }
    }

    /// Parses the `key=value` form described in the module docs.
    pub fn parse(text: &str) -> Result<Self, DataError> {
        let mut pairs = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                let (k, v) = token
                    .split_once('=')
                    .ok_or_else(|| DataError::Spec(format!("expected key=value, found {token:?}")))?;
                pairs.push((k.to_string(), v.to_string()));
            }
        }
        Self::from_pairs(pairs)
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut map: HashMap<String, String> = HashMap::new();
        for (k, v) in pairs {
            map.insert(k, v);
        }
        if let Some(k) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(DataError::Spec(format!("unknown key {k:?}")));
        }
        let get = |key: &str| map.get(key).cloned();
        fn num<T: std::str::FromStr>(key: &str, v: Option<String>) -> Result<Option<T>, DataError> {
            v.map(|s| {
                s.parse()
                    .map_err(|_| DataError::Spec(format!("bad value {s:?} for {key}")))
            })
            .transpose()
        }
        fn req<T>(key: &str, v: Option<T>) -> Result<T, DataError> {
            v.ok_or_else(|| DataError::Spec(format!("missing {key}")))
        }

        let kind = req("kind", get("kind"))?;
        let generator = match kind.as_str() {
            "er" => Generator::ErdosRenyi {
                n: req("n", num("n", get("n"))?)?,
                p: req("p", num("p", get("p"))?)?,
            },
            "sbm" => {
                let blocks = req("blocks", get("blocks"))?;
                let block_sizes = blocks
                    .split(',')
                    .map(|b| b.parse().map_err(|_| DataError::Spec(format!("bad block size {b:?}"))))
                    .collect::<Result<Vec<usize>, _>>()?;
                Generator::Sbm {
                    block_sizes,
                    p_in: req("p_in", num("p_in", get("p_in"))?)?,
                    p_out: req("p_out", num("p_out", get("p_out"))?)?,
                }
            }
            "star" => Generator::Star {
                leaves: req("leaves", num("leaves", get("leaves"))?)?,
            },
            "path" => Generator::Path {
                n: req("n", num("n", get("n"))?)?,
            },
            "grid" => Generator::Grid {
                rows: req("rows", num("rows", get("rows"))?)?,
                cols: req("cols", num("cols", get("cols"))?)?,
            },
            other => return Err(DataError::Spec(format!("unknown kind {other:?}"))),
        };
        let mut spec = SyntheticSpec::new(generator);
        match get("features").as_deref() {
            None | Some("gaussian") => {
                spec.features = FeatureKind::Gaussian {
                    dim: num("dim", get("dim"))?.unwrap_or(16),
                    signal: num("signal", get("signal"))?.unwrap_or(1.0),
                }
            }
            Some("onehot") => spec.features = FeatureKind::OneHot,
            Some(other) => return Err(DataError::Spec(format!("unknown features {other:?}"))),
        }
        match get("labels").as_deref() {
            None | Some("blocks") => spec.labels = LabelRule::Blocks,
            Some("modulo") => {
                spec.labels = LabelRule::Modulo {
                    classes: req("classes", num("classes", get("classes"))?)?,
                }
            }
            Some(other) => return Err(DataError::Spec(format!("unknown labels {other:?}"))),
        }
        if let Some(per_class) = num("train_per_class", get("train_per_class"))? {
            spec.split = SplitRule::PerClass {
                train_per_class: per_class,
                val: req("val_count", num("val_count", get("val_count"))?)?,
                test: req("test_count", num("test_count", get("test_count"))?)?,
            };
        } else {
            spec.split = SplitRule::Fractions {
                train: num("train", get("train"))?.unwrap_or(0.6),
                val: num("val", get("val"))?.unwrap_or(0.2),
            };
        }
        spec.seed = num("seed", get("seed"))?.unwrap_or(0);
        Ok(spec)
    }

    /// Generates the dataset from `self.seed`.
    pub fn generate(&self) -> Result<Dataset, DataError> {
        self.generate_with(&mut ChaCha8Rng::seed_from_u64(self.seed))
    }

    pub fn generate_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset, DataError> {
        let graph = self.generator.build(rng)?;
        let n = graph.num_nodes();
        let labels: Vec<usize> = match self.labels {
            LabelRule::Blocks => self.generator.blocks(),
            LabelRule::Modulo { classes } => {
                if classes == 0 {
                    return Err(DataError::Spec("classes must be positive".into()));
                }
                (0..n).map(|v| v % classes).collect()
            }
        };
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let features = match self.features {
            FeatureKind::OneHot => Array2::eye(n),
            FeatureKind::Gaussian { dim, signal } => {
                if dim == 0 {
                    return Err(DataError::Spec("dim must be positive".into()));
                }
                let means = Array2::from_shape_simple_fn((num_classes, dim), || rng.sample::<f64, _>(StandardNormal));
                Array2::from_shape_fn((n, dim), |(v, k)| {
                    signal * means[[labels[v], k]] + rng.sample::<f64, _>(StandardNormal)
                })
            }
        };
        let splits = self.make_splits(&labels, num_classes, rng)?;
        Dataset::new(graph, features, labels, splits)
    }

    fn make_splits<R: Rng + ?Sized>(
        &self,
        labels: &[usize],
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Splits, DataError> {
        let n = labels.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let (train, rest) = match self.split {
            SplitRule::Fractions { train, val } => {
                if !(0.0..=1.0).contains(&train) || !(0.0..=1.0).contains(&val) || train + val > 1.0 {
                    return Err(DataError::Spec(format!("bad split fractions {train}, {val}")));
                }
                let n_train = (train * n as f64).round() as usize;
                let n_val = ((val * n as f64).round() as usize).min(n - n_train);
                let rest = order.split_off(n_train);
                let (val_part, test_part) = rest.split_at(n_val);
                return Ok(Splits {
                    train: sorted(order),
                    val: sorted(val_part.to_vec()),
                    test: sorted(test_part.to_vec()),
                });
            }
            SplitRule::PerClass { train_per_class, .. } => {
                let mut taken = vec![0usize; num_classes];
                let mut train = Vec::new();
                let mut rest = Vec::new();
                for v in order {
                    if taken[labels[v]] < train_per_class {
                        taken[labels[v]] += 1;
                        train.push(v);
                    } else {
                        rest.push(v);
                    }
                }
                (train, rest)
            }
        };
        let SplitRule::PerClass { val, test, .. } = self.split else {
            unreachable!()
        };
        if val + test > rest.len() {
            return Err(DataError::Spec(format!(
                "{val} validation + {test} test nodes requested, {} available",
                rest.len()
            )));
        }
        Ok(Splits {
            train: sorted(train),
            val: sorted(rest[..val].to_vec()),
            test: sorted(rest[val..val + test].to_vec()),
        })
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erdos_renyi_extremes() {
        let empty = SyntheticSpec::parse("kind=er n=100 p=0").unwrap().generate().unwrap();
        assert_eq!(empty.graph.nnz(), 0);
        let full = SyntheticSpec::parse("kind=er n=100 p=1").unwrap().generate().unwrap();
        assert_eq!(full.graph.nnz(), 9900);
    }

    #[test]
    fn sbm_intra_block_edges_match_binomial() {
        let ds = SyntheticSpec::parse("kind=sbm blocks=100,100 p_in=0.2 p_out=0.01 seed=3")
            .unwrap()
            .generate()
            .unwrap();
        let intra = ds.graph.edges().filter(|&(u, v)| ds.labels[u] == ds.labels[v]).count() as f64;
        let pairs: f64 = 2.0 * (100.0 * 99.0 / 2.0);
        let mean = pairs * 0.2;
        let sd = (pairs * 0.2 * 0.8).sqrt();
        assert!((intra - mean).abs() < 3.0 * sd, "{intra} vs {mean} ± {sd}");
        assert_eq!(ds.num_classes, 2);
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticSpec::parse("kind=sbm blocks=20,20 p_in=0.3 p_out=0.05 seed=9").unwrap();
        assert_eq!(spec.generate().unwrap(), spec.generate().unwrap());
    }

    #[test]
    fn per_class_split() {
        let spec = SyntheticSpec::parse(
            "kind=sbm blocks=30,30,30 p_in=0.1 p_out=0.01 train_per_class=5 val_count=20 test_count=40",
        )
        .unwrap();
        let ds = spec.generate().unwrap();
        assert_eq!(ds.splits.train.len(), 15);
        assert_eq!(ds.splits.val.len(), 20);
        assert_eq!(ds.splits.test.len(), 40);
        for c in 0..3 {
            assert_eq!(ds.splits.train.iter().filter(|&&v| ds.labels[v] == c).count(), 5);
        }
    }

    #[test]
    fn grid_and_star_shapes() {
        let grid = Generator::Grid { rows: 3, cols: 4 }
            .build(&mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(grid.num_edges(), 3 * 3 + 2 * 4);
        let star = Generator::Star { leaves: 5 }
            .build(&mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(star.degree(0), 5);
    }

    #[test]
    fn parse_errors() {
        assert!(SyntheticSpec::parse("kind=er n=10 p=1.5").unwrap().generate().is_err());
        assert!(SyntheticSpec::parse("kind=er n=10").is_err());
        assert!(SyntheticSpec::parse("kind=er n=10 p=0.1 colour=red").is_err());
        assert!(SyntheticSpec::parse("kind=blob").is_err());
        assert!(SyntheticSpec::parse("kind er").is_err());
    }
}
