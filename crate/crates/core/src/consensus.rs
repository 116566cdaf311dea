//! Running consensus: every sampling interval each sensor adds its new
//! local innovation to its state and the network performs `Q` synchronous
//! averaging rounds, `Gamma <- W^Q (Gamma + gamma)`.
//!
//! Four accumulators run side by side:
//!
//! | stream  | innovation                                   | local estimate        |
//! |---------|----------------------------------------------|-----------------------|
//! | `check` | secure-phase bits, zero afterwards           | `lambda_M = N Gamma_j` |
//! | `main`  | monitoring bits of every sensor              | `lambda_N = N Gamma_j` |
//! | `tilde` | monitoring bits of secure sensors only       | `lambda_S = N Gamma_j` |
//! | `xi`    | increments of the per-sensor CUSUM statistic | `eta3 = Gamma_j`       |

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::topology::WeightMatrix;

/// `N^{3/2} s^Q / (1 - s^Q)` with `s = sigma_2(W)`: the largest possible gap
/// between a local bit-sum estimate and the true sum.
pub fn lemma1_bound(n: usize, sigma2: f64, q_rounds: usize) -> f64 {
    let sq = libm::pow(sigma2, q_rounds as f64);
    libm::pow(n as f64, 1.5) * sq / (1.0 - sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Check,
    Main,
    Tilde,
    Xi,
}

impl Stream {
    pub const ALL: [Stream; 4] = [Stream::Check, Stream::Main, Stream::Tilde, Stream::Xi];

    fn index(self) -> usize {
        self as usize
    }
}

/// Weight matrices of the four streams (shared, read-only).
#[derive(Debug, Clone)]
pub struct ConsensusMatrices {
    pub check: Arc<WeightMatrix>,
    pub main: Arc<WeightMatrix>,
    pub tilde: Arc<WeightMatrix>,
    pub xi: Arc<WeightMatrix>,
}

impl ConsensusMatrices {
    /// The same matrix for every stream.
    pub fn uniform(w: Arc<WeightMatrix>) -> Self {
        Self { check: w.clone(), main: w.clone(), tilde: w.clone(), xi: w }
    }

    pub fn get(&self, s: Stream) -> &WeightMatrix {
        match s {
            Stream::Check => &self.check,
            Stream::Main => &self.main,
            Stream::Tilde => &self.tilde,
            Stream::Xi => &self.xi,
        }
    }

    pub fn dim(&self) -> usize {
        self.check.dim()
    }
}

/// Per-sensor estimates of the three bit sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLambdaEstimates {
    pub lambda_m_hat: f64,
    pub lambda_n_hat: f64,
    pub lambda_s_hat: f64,
    /// Error bounds for `lambda_M`, `lambda_N`, `lambda_S` in that order.
    pub error_bounds: [f64; 3],
}

/// Innovations of one sampling interval; `None` means the zero vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct Innovations<'a> {
    pub check: Option<&'a [f64]>,
    pub main: Option<&'a [f64]>,
    pub tilde: Option<&'a [f64]>,
    pub xi: Option<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub struct ConsensusState {
    matrices: ConsensusMatrices,
    q_rounds: usize,
    acc: [Vec<f64>; 4],
    // Skip the Q products while a stream has only ever seen zeros.
    active: [bool; 4],
    intervals: [usize; 4],
    totals: Option<[f64; 4]>,
    bounds: [f64; 3],
    scratch: Vec<f64>,
}

impl ConsensusState {
    pub fn new(matrices: ConsensusMatrices, q_rounds: usize) -> Self {
        let n = matrices.dim();
        let bound = |s: Stream| lemma1_bound(n, matrices.get(s).sigma2(), q_rounds);
        let bounds = [bound(Stream::Check), bound(Stream::Main), bound(Stream::Tilde)];
        Self {
            matrices,
            q_rounds,
            acc: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            active: [false; 4],
            intervals: [0; 4],
            totals: None,
            bounds,
            scratch: vec![0.0; n],
        }
    }

    /// Also track the true injected totals (for verification only; the
    /// detectors never read them).
    pub fn with_verification(mut self) -> Self {
        self.totals = Some([0.0; 4]);
        self
    }

    pub fn n_sensors(&self) -> usize {
        self.acc[0].len()
    }

    pub fn q_rounds(&self) -> usize {
        self.q_rounds
    }

    pub fn matrices(&self) -> &ConsensusMatrices {
        &self.matrices
    }

    /// Number of intervals applied to a stream so far.
    pub fn intervals(&self, s: Stream) -> usize {
        self.intervals[s.index()]
    }

    pub fn accumulator(&self, s: Stream) -> &[f64] {
        &self.acc[s.index()]
    }

    /// Sum of all innovations injected into a stream (verification mode).
    pub fn injected_total(&self, s: Stream) -> Option<f64> {
        self.totals.map(|t| t[s.index()])
    }

    /// Overwrites one accumulator, e.g. to start from exact averages.
    pub fn set_accumulator(&mut self, s: Stream, values: &[f64]) -> Result<()> {
        let i = s.index();
        check_dim(self.acc[i].len(), values.len())?;
        self.acc[i].copy_from_slice(values);
        self.active[i] = values.iter().any(|&v| v != 0.0);
        if let Some(t) = self.totals.as_mut() {
            t[i] = values.iter().sum();
        }
        Ok(())
    }

    /// Adds `innovation` to one stream and applies its matrix `Q` times.
    pub fn advance(&mut self, s: Stream, innovation: Option<&[f64]>) -> Result<()> {
        let i = s.index();
        let n = self.acc[i].len();
        if let Some(v) = innovation {
            check_dim(n, v.len())?;
            for (a, &x) in self.acc[i].iter_mut().zip(v) {
                *a += x;
            }
            if let Some(t) = self.totals.as_mut() {
                t[i] += v.iter().sum::<f64>();
            }
            if !self.active[i] {
                self.active[i] = v.iter().any(|&x| x != 0.0);
            }
        }
        self.intervals[i] += 1;
        if !self.active[i] {
            return Ok(());
        }
        let w = match s {
            Stream::Check => &self.matrices.check,
            Stream::Main => &self.matrices.main,
            Stream::Tilde => &self.matrices.tilde,
            Stream::Xi => &self.matrices.xi,
        };
        for _ in 0..self.q_rounds {
            w.apply(&self.acc[i], &mut self.scratch);
            core::mem::swap(&mut self.acc[i], &mut self.scratch);
        }
        Ok(())
    }

    /// One sampling interval for the three bit-sum streams.
    pub fn advance_lambda(&mut self, inn: &Innovations<'_>) -> Result<()> {
        self.advance(Stream::Check, inn.check)?;
        self.advance(Stream::Main, inn.main)?;
        self.advance(Stream::Tilde, inn.tilde)
    }

    /// One sampling interval for the CUSUM-increment stream.
    pub fn advance_xi(&mut self, xi: Option<&[f64]>) -> Result<()> {
        self.advance(Stream::Xi, xi)
    }

    /// One full sampling interval on all four streams.
    pub fn consensus_interval(&mut self, inn: &Innovations<'_>) -> Result<()> {
        self.advance_lambda(inn)?;
        self.advance_xi(inn.xi)
    }

    /// `N e_j^T Gamma` for each bit-sum stream, with the matching error bounds.
    pub fn local_lambda(&self, j: usize) -> LocalLambdaEstimates {
        let n = self.n_sensors();
        let nf = n as f64;
        LocalLambdaEstimates {
            lambda_m_hat: nf * self.acc[Stream::Check.index()][j],
            lambda_n_hat: nf * self.acc[Stream::Main.index()][j],
            lambda_s_hat: nf * self.acc[Stream::Tilde.index()][j],
            error_bounds: self.bounds,
        }
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
