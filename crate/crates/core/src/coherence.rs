//! Measurement matrix Gamma = T A, pairwise column coherences, the
//! averaged mutual coherence objective, and an orthogonal-matching-pursuit
//! recovery check tying coherence to sparse reconstructability.
//!
//! Coherences use the Hermitian inner product (conjugate on the first
//! argument): for complex dictionaries the plain transpose would not
//! measure correlation magnitude. Pair values are computed independently
//! per pair and reduced in a fixed order, so the parallel build is
//! bit-identical to the sequential one.

use ndarray::Array2;
use num_complex::Complex64;

use crate::channel::{SensingDictionary, SpaceReflectionVector};
use crate::error::{Error, Result};
use crate::par;
use crate::ris::ConfigurationMatrix;

/// The K x M measurement matrix mapping space reflection vectors to
/// per-frame mean measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    matrix: Array2<Complex64>,
}

impl MeasurementMatrix {
    pub fn from_matrix(matrix: Array2<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn frame_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn block_count(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Exact product Gamma = T A.
pub fn measurement_matrix(
    config: &ConfigurationMatrix,
    dictionary: &SensingDictionary,
) -> Result<MeasurementMatrix> {
    let inner = config.group_count() * config.state_count();
    if inner != dictionary.matrix().nrows() {
        return Err(Error::ShapeMismatch(format!(
            "configuration has {inner} columns but the dictionary has {} rows",
            dictionary.matrix().nrows()
        )));
    }
    let t = config.to_array().mapv(|x| Complex64::new(x, 0.0));
    Ok(MeasurementMatrix { matrix: t.dot(dictionary.matrix()) })
}

/// Pairwise column coherences, ordered (0,1), (0,2), ..., (0,M-1),
/// (1,2), ..., (M-2,M-1).
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceVector {
    blocks: usize,
    values: Vec<Complex64>,
}

impl CoherenceVector {
    pub fn from_values(blocks: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != pair_count(blocks) {
            return Err(Error::ShapeMismatch(format!(
                "coherence vector needs {} entries for {blocks} blocks, got {}",
                pair_count(blocks),
                values.len()
            )));
        }
        Ok(Self { blocks, values })
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Flat position of the unordered pair (m, m'), m < m'.
    pub fn pair_index(&self, m: usize, m_prime: usize) -> usize {
        pair_index(self.blocks, m, m_prime)
    }

    /// Iterates `((m, m'), u)` in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), Complex64)> + '_ {
        let blocks = self.blocks;
        self.values
            .iter()
            .enumerate()
            .map(move |(p, &u)| (pair_from_index(blocks, p), u))
    }

    /// L1 norm: the sum of coherence moduli.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|u| u.norm()).sum()
    }
}

pub(crate) fn pair_count(blocks: usize) -> usize {
    blocks * blocks.saturating_sub(1) / 2
}

pub(crate) fn pair_index(blocks: usize, m: usize, m_prime: usize) -> usize {
    debug_assert!(m < m_prime && m_prime < blocks);
    m * blocks - m * (m + 1) / 2 + (m_prime - m - 1)
}

pub(crate) fn pair_from_index(blocks: usize, mut p: usize) -> (usize, usize) {
    for m in 0..blocks {
        let row = blocks - m - 1;
        if p < row {
            return (m, m + 1 + p);
        }
        p -= row;
    }
    unreachable!("pair index out of range")
}

/// Normalized Hermitian inner products between all column pairs of Gamma.
/// A zero column is an error naming the offending block.
pub fn column_coherences(gamma: &MeasurementMatrix) -> Result<CoherenceVector> {
    column_coherences_inner(gamma, false)
}

/// Sequential twin of [`column_coherences`] for benches.
#[doc(hidden)]
pub fn column_coherences_sequential(gamma: &MeasurementMatrix) -> Result<CoherenceVector> {
    column_coherences_inner(gamma, true)
}

fn column_coherences_inner(
    gamma: &MeasurementMatrix,
    force_sequential: bool,
) -> Result<CoherenceVector> {
    let m_count = gamma.block_count();
    let norms = column_norms(gamma)?;
    let g = &gamma.matrix;
    let pair = |p: usize| -> Complex64 {
        let (m, mp) = pair_from_index(m_count, p);
        let mut inner = Complex64::default();
        for k in 0..g.nrows() {
            inner += g[(k, m)].conj() * g[(k, mp)];
        }
        inner / (norms[m] * norms[mp])
    };
    let values = if force_sequential {
        par::map_indexed_seq(pair_count(m_count), pair)
    } else {
        par::map_indexed(pair_count(m_count), 128, pair)
    };
    CoherenceVector::from_values(m_count, values)
}

fn column_norms(gamma: &MeasurementMatrix) -> Result<Vec<f64>> {
    let g = &gamma.matrix;
    let mut norms = Vec::with_capacity(g.ncols());
    for m in 0..g.ncols() {
        let n: f64 = (0..g.nrows()).map(|k| g[(k, m)].norm_sqr()).sum::<f64>().sqrt();
        if n <= 0.0 {
            return Err(Error::DegenerateColumn(m));
        }
        norms.push(n);
    }
    Ok(norms)
}

/// Averaged mutual coherence: the mean coherence modulus over all ordered
/// pairs, `2/(M(M-1)) * sum_{m<m'} |u_{m,m'}|`. Zero when M < 2.
pub fn average_mutual_coherence(gamma: &MeasurementMatrix) -> Result<f64> {
    Ok(mu_from_coherences(&column_coherences(gamma)?))
}

/// The same average computed from an existing coherence vector.
pub fn mu_from_coherences(u: &CoherenceVector) -> f64 {
    let m = u.block_count();
    if m < 2 {
        return 0.0;
    }
    2.0 * u.l1_norm() / (m * (m - 1)) as f64
}

/// Result of an OMP recovery run.
#[derive(Debug, Clone)]
pub struct OmpRecovery {
    pub estimate: SpaceReflectionVector,
    pub support: Vec<usize>,
    pub residual_norm: f64,
}

/// Orthogonal matching pursuit: `sparsity` greedy correlation-maximizing
/// column picks, each followed by a least-squares refit on the selected
/// support. `y` must be the offset-removed measurement, i.e. a (possibly
/// noisy) image of `Gamma * eta`.
pub fn omp_recover(
    gamma: &MeasurementMatrix,
    y: &[Complex64],
    sparsity: usize,
) -> Result<OmpRecovery> {
    let k = gamma.frame_count();
    let m_count = gamma.block_count();
    if y.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "measurement has {} entries but the matrix has {k} rows",
            y.len()
        )));
    }
    if sparsity > k {
        return Err(Error::SparsityTooLarge { sparsity, measurements: k });
    }
    let g = gamma.matrix();
    let norms: Vec<f64> = (0..m_count)
        .map(|m| (0..k).map(|r| g[(r, m)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    if norms.iter().all(|&n| n <= 0.0) {
        return Err(Error::DegenerateColumn(0));
    }

    let mut residual = y.to_vec();
    let mut support: Vec<usize> = Vec::new();
    let mut coefficients: Vec<Complex64> = Vec::new();
    for _ in 0..sparsity {
        // Most correlated unselected column; ties break toward the lower
        // index for determinism.
        let mut best: Option<(usize, f64)> = None;
        for m in 0..m_count {
            if norms[m] <= 0.0 || support.contains(&m) {
                continue;
            }
            let corr: Complex64 =
                (0..k).map(|r| g[(r, m)].conj() * residual[r]).sum::<Complex64>();
            let score = corr.norm() / norms[m];
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((m, score));
            }
        }
        let Some((pick, score)) = best else { break };
        if score <= 1e-15 {
            break;
        }
        support.push(pick);

        // Least squares on the chosen support via the normal equations.
        let s = support.len();
        let mut gram = vec![vec![Complex64::default(); s]; s];
        let mut rhs = vec![Complex64::default(); s];
        for (i, &mi) in support.iter().enumerate() {
            for (j, &mj) in support.iter().enumerate() {
                gram[i][j] = (0..k).map(|r| g[(r, mi)].conj() * g[(r, mj)]).sum();
            }
            rhs[i] = (0..k).map(|r| g[(r, mi)].conj() * y[r]).sum();
        }
        coefficients = solve_dense(gram, rhs)?;
        for r in 0..k {
            let mut fit = Complex64::default();
            for (i, &mi) in support.iter().enumerate() {
                fit += g[(r, mi)] * coefficients[i];
            }
            residual[r] = y[r] - fit;
        }
    }

    let entries: Vec<(usize, Complex64)> =
        support.iter().copied().zip(coefficients.iter().copied()).collect();
    let estimate = SpaceReflectionVector::from_sparse(m_count, &entries)?;
    let residual_norm = residual.iter().map(|r| r.norm_sqr()).sum::<f64>().sqrt();
    Ok(OmpRecovery { estimate, support, residual_norm })
}

/// Gaussian elimination with partial pivoting on a small dense complex
/// system.
fn solve_dense(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .expect("non-empty range");
        if a[pivot][col].norm() <= 1e-300 {
            return Err(Error::ShapeMismatch("singular least-squares system in OMP".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for j in col..n {
                let v = a[col][j];
                a[row][j] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = vec![Complex64::default(); n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in col + 1..n {
            acc -= a[col][j] * x[j];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}
