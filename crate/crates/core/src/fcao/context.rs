//! Per-frame view of the coherence objective.
//!
//! When frame k is optimized with the other K-1 frames fixed, only the
//! k-th entry of every measurement-matrix column changes:
//! `gamma_m[k] = t_k . a_m`. The context caches the contribution of the
//! fixed rows to every pairwise inner product (`s_pairs`) and column
//! norm (`q`), after which each candidate `t_k` costs O(M*D + M^2)
//! instead of a full matrix rebuild.

use ndarray::Array2;
use num_complex::Complex64;

use crate::channel::SensingDictionary;
use crate::coherence::{pair_count, pair_from_index, CoherenceVector};
use crate::error::{Error, Result};
use crate::par;
use crate::ris::ConfigurationMatrix;

/// Fixed data for optimizing one frame configuration.
#[derive(Debug, Clone)]
pub struct FrameContext {
    /// Dictionary matrix, (L*N_a) x M.
    a: Array2<Complex64>,
    /// Hermitian inner products of the fixed rows, one per pair (m < m').
    s_pairs: Vec<Complex64>,
    /// Squared norms of the fixed rows per column.
    q: Vec<f64>,
    frame: usize,
    groups: usize,
    states: usize,
}

impl FrameContext {
    /// Builds the context for frame `k` of `config` against `dictionary`.
    pub fn new(
        config: &ConfigurationMatrix,
        k: usize,
        dictionary: &SensingDictionary,
    ) -> Result<Self> {
        if k >= config.frame_count() {
            return Err(Error::IndexOutOfRange {
                what: "frame",
                index: k,
                size: config.frame_count(),
            });
        }
        let dims = config.group_count() * config.state_count();
        if dims != dictionary.matrix().nrows() {
            return Err(Error::ShapeMismatch(format!(
                "configuration has {dims} duration columns but the dictionary has {} rows",
                dictionary.matrix().nrows()
            )));
        }
        let a = dictionary.matrix().clone();
        let m_count = a.ncols();

        // gamma entries of the fixed frames: (K-1) x M
        let fixed: Vec<Vec<Complex64>> = config
            .frames()
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, frame)| {
                let t = frame.as_flat();
                (0..m_count)
                    .map(|m| {
                        let mut acc = Complex64::default();
                        for (d, &td) in t.iter().enumerate() {
                            acc += a[(d, m)] * td;
                        }
                        acc
                    })
                    .collect()
            })
            .collect();

        let q: Vec<f64> = (0..m_count)
            .map(|m| fixed.iter().map(|row| row[m].norm_sqr()).sum())
            .collect();
        let s_pairs = par::map_indexed(pair_count(m_count), 128, |p| {
            let (m, mp) = pair_from_index(m_count, p);
            fixed.iter().map(|row| row[m].conj() * row[mp]).sum()
        });

        Ok(Self {
            a,
            s_pairs,
            q,
            frame: k,
            groups: config.group_count(),
            states: config.state_count(),
        })
    }

    pub fn frame_index(&self) -> usize {
        self.frame
    }

    pub fn group_count(&self) -> usize {
        self.groups
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    /// Length of the flattened frame configuration, L*N_a.
    pub fn dims(&self) -> usize {
        self.groups * self.states
    }

    pub fn block_count(&self) -> usize {
        self.a.ncols()
    }

    /// Variable row of the measurement matrix: w_m = t . a_m per column.
    pub(crate) fn variable_row(&self, t: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(t.len(), self.dims());
        let m_count = self.block_count();
        let mut w = vec![Complex64::default(); m_count];
        for (d, &td) in t.iter().enumerate() {
            if td == 0.0 {
                continue;
            }
            for (m, wm) in w.iter_mut().enumerate() {
                *wm += self.a[(d, m)] * td;
            }
        }
        w
    }

    /// Pairwise coherences for candidate `t`; `None` if some column is
    /// degenerate (zero norm) at this point.
    pub(crate) fn pair_coherences(&self, w: &[Complex64]) -> Option<Vec<Complex64>> {
        let m_count = self.block_count();
        let p: Vec<f64> = (0..m_count).map(|m| self.q[m] + w[m].norm_sqr()).collect();
        if p.iter().any(|&v| v <= 1e-300) {
            return None;
        }
        let mut values = Vec::with_capacity(self.s_pairs.len());
        let mut idx = 0;
        for m in 0..m_count {
            for mp in m + 1..m_count {
                let inner = self.s_pairs[idx] + w[m].conj() * w[mp];
                values.push(inner / (p[m] * p[mp]).sqrt());
                idx += 1;
            }
        }
        Some(values)
    }

    /// Coherence vector at `t`, failing on degenerate columns.
    pub fn coherences(&self, t: &[f64]) -> Result<CoherenceVector> {
        let w = self.variable_row(t);
        match self.pair_coherences(&w) {
            Some(values) => CoherenceVector::from_values(self.block_count(), values),
            None => {
                let m = (0..self.block_count())
                    .find(|&m| self.q[m] + w[m].norm_sqr() <= 1e-300)
                    .unwrap_or(0);
                Err(Error::DegenerateColumn(m))
            }
        }
    }

    /// Average mutual coherence of the matrix with frame k replaced by
    /// `t`; +infinity when a column degenerates.
    pub fn mu(&self, t: &[f64]) -> f64 {
        let w = self.variable_row(t);
        match self.pair_coherences(&w) {
            Some(values) => {
                let m = self.block_count();
                if m < 2 {
                    return 0.0;
                }
                let l1: f64 = values.iter().map(|u| u.norm()).sum();
                2.0 * l1 / (m * (m - 1)) as f64
            }
            None => f64::INFINITY,
        }
    }

    /// Smooth penalty `sum_{m<m'} (rho/2) |c(t) - kappa|^2`;
    /// +infinity when a column degenerates.
    pub fn penalty_value(&self, t: &[f64], kappa: &[Complex64], rho: f64) -> f64 {
        let w = self.variable_row(t);
        match self.pair_coherences(&w) {
            Some(values) => values
                .iter()
                .zip(kappa)
                .map(|(c, k)| 0.5 * rho * (c - k).norm_sqr())
                .sum(),
            None => f64::INFINITY,
        }
    }

    /// Analytic gradient of [`Self::penalty_value`] with respect to the
    /// real vector `t` (chain rule through the normalized Hermitian
    /// coherences). Zero when the point is degenerate; the line search
    /// rejects such candidates through the infinite objective.
    pub fn penalty_gradient(&self, t: &[f64], kappa: &[Complex64], rho: f64) -> Vec<f64> {
        let dims = self.dims();
        let m_count = self.block_count();
        let w = self.variable_row(t);
        let p: Vec<f64> = (0..m_count).map(|m| self.q[m] + w[m].norm_sqr()).collect();
        if p.iter().any(|&v| v <= 1e-300) {
            return vec![0.0; dims];
        }

        // Per-column accumulators: grad_d = sum_m Re[A[d,m] * acc_m].
        let mut acc = vec![Complex64::default(); m_count];
        let mut idx = 0;
        for m in 0..m_count {
            for mp in m + 1..m_count {
                let d = (p[m] * p[mp]).sqrt();
                let c = (self.s_pairs[idx] + w[m].conj() * w[mp]) / d;
                let e = c - kappa[idx];
                let sigma = rho * (e.conj() * c).re;
                let scale = rho / d;
                acc[m] += e * w[mp].conj() * scale - w[m].conj() * (sigma / p[m]);
                acc[mp] += e.conj() * w[m].conj() * scale - w[mp].conj() * (sigma / p[mp]);
                idx += 1;
            }
        }

        let mut grad = vec![0.0; dims];
        for (d, g) in grad.iter_mut().enumerate() {
            let mut dot = 0.0;
            for (m, a) in acc.iter().enumerate() {
                let v = self.a[(d, m)];
                dot += v.re * a.re - v.im * a.im;
            }
            *g = dot;
        }
        grad
    }
}
