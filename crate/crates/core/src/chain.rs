//! The Markov chain on arrows: each step right-composes one generator drawn
//! from the kernel row of the current target window.
//!
//! Randomness comes from ChaCha8 keyed by `seed_from_u64(master_seed)` with
//! the stream id set to the path index ([`path_rng`]). Given
//! `(master_seed, path_index)` every trajectory is bit-reproducible across
//! platforms and independent of thread scheduling.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::groupoid::{Generator, Metric, ReducedWord, Rewrite};
use crate::kernel::TransitionKernel;
use crate::scalar::Scalar;

/// Default step cap for hitting-time sampling.
pub const DEFAULT_HITTING_CAP: u64 = 1_000_000;

/// Random source for path `path_index` under `master_seed`.
pub fn path_rng(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}

/// Draws the next generator out of `window`.
pub fn sample_generator<T: Scalar, R: Rng + ?Sized>(
    kernel: &TransitionKernel<T>,
    window: usize,
    rng: &mut R,
) -> Generator {
    kernel.select(window, rng.random::<f64>())
}

/// One chain step from `w`.
pub fn step<T: Scalar, R: Rng + ?Sized>(
    w: &ReducedWord,
    kernel: &TransitionKernel<T>,
    rng: &mut R,
) -> ReducedWord {
    let g = sample_generator(kernel, w.target(), rng);
    w.append(g)
        .expect("sampled generator starts at the target window")
}

/// A running chain that tracks word and metric length incrementally.
#[derive(Debug, Clone)]
pub struct Walker<'a, T: Scalar, R> {
    kernel: &'a TransitionKernel<T>,
    metric: &'a Metric<T>,
    word: ReducedWord,
    metric_len: T,
    steps: u64,
    rng: R,
}

impl<'a, T: Scalar, R: Rng> Walker<'a, T, R> {
    pub fn new(
        start: ReducedWord,
        kernel: &'a TransitionKernel<T>,
        metric: &'a Metric<T>,
        rng: R,
    ) -> Self {
        let metric_len = start.metric_length(metric);
        Walker {
            kernel,
            metric,
            word: start,
            metric_len,
            steps: 0,
            rng,
        }
    }

    pub fn step(&mut self) -> Rewrite {
        let g = sample_generator(self.kernel, self.word.target(), &mut self.rng);
        let rewrite = self
            .word
            .push(g)
            .expect("sampled generator starts at the target window");
        self.metric_len += rewrite.metric_delta(self.metric);
        self.steps += 1;
        rewrite
    }

    pub fn advance(&mut self, n: u64) {
        for _ in 0..n {
            self.step();
        }
    }

    pub fn word(&self) -> &ReducedWord {
        &self.word
    }

    pub fn word_len(&self) -> usize {
        self.word.len()
    }

    /// Metric length maintained by summing rewrite deltas.
    pub fn metric_len(&self) -> T {
        self.metric_len
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Per-step lengths recorded in streaming mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthPoint {
    pub n: u64,
    pub word_len: usize,
    pub metric_len: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// Keep every state word.
    Full,
    /// Keep only the current word plus per-step length pairs.
    Streaming,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryStates {
    Full(Vec<ReducedWord>),
    Streaming {
        lengths: Vec<LengthPoint>,
        last: ReducedWord,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: ReducedWord,
    pub seed: u64,
    pub states: TrajectoryStates,
}

impl Trajectory {
    pub fn final_word(&self) -> &ReducedWord {
        match &self.states {
            TrajectoryStates::Full(states) => states.last().expect("trajectory holds the start"),
            TrajectoryStates::Streaming { last, .. } => last,
        }
    }

    /// `(n, |W_n|, |W_n|_metric)` for every recorded step.
    pub fn lengths<T: Scalar>(&self, metric: &Metric<T>) -> Vec<LengthPoint> {
        match &self.states {
            TrajectoryStates::Full(states) => states
                .iter()
                .enumerate()
                .map(|(n, w)| LengthPoint {
                    n: n as u64,
                    word_len: w.len(),
                    metric_len: w.metric_length(metric).to_f64_lossy(),
                })
                .collect(),
            TrajectoryStates::Streaming { lengths, .. } => lengths.clone(),
        }
    }

    /// CSV with header `n,word_len,metric_len`, LF line endings.
    pub fn write_csv<T: Scalar, W: Write>(&self, metric: &Metric<T>, mut out: W) -> io::Result<()> {
        writeln!(out, "n,word_len,metric_len")?;
        for p in self.lengths(metric) {
            writeln!(out, "{},{},{}", p.n, p.word_len, p.metric_len)?;
        }
        Ok(())
    }
}

/// Runs `n_steps` steps from `start`, deterministically in `seed`.
pub fn simulate<T: Scalar>(
    start: &ReducedWord,
    kernel: &TransitionKernel<T>,
    metric: &Metric<T>,
    n_steps: u64,
    seed: u64,
    mode: RecordMode,
) -> Trajectory {
    let mut walker = Walker::new(start.clone(), kernel, metric, path_rng(seed, 0));
    let states = match mode {
        RecordMode::Full => {
            let mut states = Vec::with_capacity(n_steps as usize + 1);
            states.push(start.clone());
            for _ in 0..n_steps {
                walker.step();
                states.push(walker.word().clone());
            }
            TrajectoryStates::Full(states)
        }
        RecordMode::Streaming => {
            let mut lengths = Vec::with_capacity(n_steps as usize + 1);
            let point = |w: &Walker<T, ChaCha8Rng>| LengthPoint {
                n: w.steps(),
                word_len: w.word_len(),
                metric_len: w.metric_len().to_f64_lossy(),
            };
            lengths.push(point(&walker));
            for _ in 0..n_steps {
                walker.step();
                lengths.push(point(&walker));
            }
            TrajectoryStates::Streaming {
                lengths,
                last: walker.word().clone(),
            }
        }
    };
    Trajectory {
        initial: start.clone(),
        seed,
        states,
    }
}

/// First time the chain started at `e_{target.from}` equals the one-letter
/// word `target`, or `None` if that does not happen within `cap` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HittingTimeSample {
    #[serde(serialize_with = "serialize_generator")]
    pub target: Generator,
    pub time: Option<u64>,
    pub cap: u64,
}

fn serialize_generator<S: serde::Serializer>(g: &Generator, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(g)
}

impl HittingTimeSample {
    pub fn is_censored(&self) -> bool {
        self.time.is_none()
    }

    /// `lambda^T`, with censored samples contributing 0 (valid for `lambda < 1`
    /// up to the truncation `lambda^cap`).
    pub fn discounted(&self, lambda: f64) -> f64 {
        self.time.map_or(0.0, |t| lambda.powf(t as f64))
    }
}

/// Samples one hitting time with a caller-supplied random source.
///
/// A word of length `L` needs at least `L - 1` more steps to become a single
/// letter, so paths that can no longer reach the target before `cap` are
/// censored early.
pub fn hitting_time_with<T: Scalar, R: Rng + ?Sized>(
    target: Generator,
    kernel: &TransitionKernel<T>,
    cap: u64,
    rng: &mut R,
) -> HittingTimeSample {
    assert!(cap >= 1, "cap must be at least 1");
    let mut w = ReducedWord::unit(target.from());
    let mut n = 0u64;
    while n < cap {
        let g = sample_generator(kernel, w.target(), rng);
        w.push(g)
            .expect("sampled generator starts at the target window");
        n += 1;
        if w.len() == 1 && w.letters()[0] == target {
            return HittingTimeSample {
                target,
                time: Some(n),
                cap,
            };
        }
        if n + (w.len() as u64).saturating_sub(1) > cap {
            break;
        }
    }
    HittingTimeSample {
        target,
        time: None,
        cap,
    }
}

pub fn sample_hitting_time<T: Scalar>(
    target: Generator,
    kernel: &TransitionKernel<T>,
    cap: u64,
    seed: u64,
) -> HittingTimeSample {
    hitting_time_with(target, kernel, cap, &mut path_rng(seed, 0))
}

/// `count` independent samples; sample `s` uses stream `s` of `master_seed`.
pub fn hitting_time_samples<T: Scalar>(
    target: Generator,
    kernel: &TransitionKernel<T>,
    cap: u64,
    master_seed: u64,
    count: u64,
) -> Vec<HittingTimeSample> {
    (0..count)
        .into_par_iter()
        .map(|s| hitting_time_with(target, kernel, cap, &mut path_rng(master_seed, s)))
        .collect()
}
