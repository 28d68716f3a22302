//! Seeded generators for the annulus example and the three iterated
//! experiments.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::model::LabeledDataset;

use ExperimentKind as Kind;

const ANNULUS_INNER: f64 = 4.5;
const ANNULUS_OUTER: f64 = 5.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    Example,
    Ex1,
    Ex2,
    Ex3,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [Self::Example, Self::Ex1, Self::Ex2, Self::Ex3];

    pub fn name(self) -> &'static str {
        match self {
            Self::Example => "EXAMPLE",
            Self::Ex1 => "EX1",
            Self::Ex2 => "EX2",
            Self::Ex3 => "EX3",
        }
    }

    /// Number of planted anomalies.
    pub fn n_anomalies(self) -> usize {
        match self {
            Self::Example => 3,
            _ => 5,
        }
    }

    pub fn n_obs(self) -> usize {
        match self {
            Self::Example => 100,
            Self::Ex1 => 405,
            Self::Ex2 | Self::Ex3 => 805,
        }
    }

    fn stream_tag(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EXAMPLE" => Ok(Self::Example),
            "EX1" => Ok(Self::Ex1),
            "EX2" => Ok(Self::Ex2),
            "EX3" => Ok(Self::Ex3),
            _ => invalid(format!("unknown experiment `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub iterations: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(
        experiment: ExperimentKind,
        iterations: usize,
        repetitions: usize,
        seed: u64,
    ) -> Result<Self> {
        if iterations == 0 || repetitions == 0 {
            return invalid("iterations and repetitions must be at least 1");
        }
        Ok(Self {
            experiment,
            iterations,
            repetitions,
            seed,
        })
    }

    /// Ten iterations of ten repetitions.
    pub fn standard(experiment: ExperimentKind, seed: u64) -> Self {
        Self {
            experiment,
            iterations: 10,
            repetitions: 10,
            seed,
        }
    }

    /// Every (iteration, repetition) cell, 1-based, iteration-major.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        (1..=self.iterations)
            .flat_map(|i| (1..=self.repetitions).map(move |r| (i, r)))
            .collect()
    }
}

/// Generator for one cell. The stream packs experiment, iteration and
/// repetition so that every cell draws from an independent sequence.
pub fn cell_rng(kind: ExperimentKind, iteration: usize, repetition: usize, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = (kind.stream_tag() << 56)
        | ((iteration as u64 & 0xff_ffff) << 28)
        | (repetition as u64 & 0xfff_ffff);
    rng.set_stream(stream);
    rng
}

fn annulus_point(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let r = rng.random_range(ANNULUS_INNER..ANNULUS_OUTER);
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    (r * a.cos(), r * a.sin())
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite positive SD")
}

fn labels(n_normal: usize, n_anom: usize) -> Vec<u8> {
    let mut l = vec![0u8; n_normal];
    l.resize(n_normal + n_anom, 1);
    l
}

/// Generates the dataset for one cell. The Example ignores `iteration`.
pub fn generate(
    kind: ExperimentKind,
    iteration: usize,
    repetition: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if iteration == 0 {
        return invalid("iterations are numbered from 1");
    }
    let mut rng = cell_rng(kind, iteration, repetition, seed);
    let shift = (iteration - 1) as f64;
    let name = format!("{kind}-i{iteration}-r{repetition}");
    let (x, n_normal) = match kind {
        Kind::Example => {
            let mut x = Array2::zeros((100, 2));
            for i in 0..97 {
                let (a, b) = annulus_point(&mut rng);
                x[[i, 0]] = a;
                x[[i, 1]] = b;
            }
            let centre = normal(0.0, 0.3);
            for i in 97..100 {
                x[[i, 0]] = centre.sample(&mut rng);
                x[[i, 1]] = centre.sample(&mut rng);
            }
            (x, 97)
        }
        Kind::Ex1 => {
            let mut x = Array2::zeros((405, 6));
            for v in x.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let dim1 = normal(2.0 + shift / 2.0, 0.2);
            for i in 400..405 {
                x[[i, 0]] = dim1.sample(&mut rng);
            }
            (x, 400)
        }
        Kind::Ex2 => {
            let mut x = Array2::zeros((805, 4));
            for i in 0..805 {
                let (a, b) = annulus_point(&mut rng);
                x[[i, 0]] = a;
                x[[i, 1]] = b;
                x[[i, 2]] = StandardNormal.sample(&mut rng);
                x[[i, 3]] = StandardNormal.sample(&mut rng);
            }
            let x1 = normal(5.0 - shift / 2.0, 0.1);
            let x2 = normal(0.0, 0.1);
            for i in 800..805 {
                x[[i, 0]] = x1.sample(&mut rng);
                x[[i, 1]] = x2.sample(&mut rng);
            }
            (x, 800)
        }
        Kind::Ex3 => {
            let mut x = Array2::zeros((805, 6));
            for v in x.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for i in 0..800 {
                x[[i, 0]] += if i < 400 { -5.0 } else { 5.0 };
            }
            let dim1 = normal(3.0 - shift * 0.3, 0.2);
            for i in 800..805 {
                x[[i, 0]] = dim1.sample(&mut rng);
            }
            (x, 800)
        }
    };
    let n_anom = x.nrows() - n_normal;
    LabeledDataset::new(name, x, Some(labels(n_normal, n_anom)))
}

/// The annulus example: 97 ring points and 3 central anomalies, listed last.
pub fn gen_example(seed: u64) -> Result<LabeledDataset> {
    generate(Kind::Example, 1, 1, seed)
}

pub fn gen_ex1(iteration: usize, seed: u64) -> Result<LabeledDataset> {
    generate(Kind::Ex1, iteration, 1, seed)
}

pub fn gen_ex2(iteration: usize, seed: u64) -> Result<LabeledDataset> {
    generate(Kind::Ex2, iteration, 1, seed)
}

pub fn gen_ex3(iteration: usize, seed: u64) -> Result<LabeledDataset> {
    generate(Kind::Ex3, iteration, 1, seed)
}
