//! Uniform sampling with replacement and the sampling operator `R_Ω`.
//!
//! Indices are 0-based in memory and 1-based in the observation file format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{check_dims, Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng;

/// The collection Ω: an ordered list of index pairs in which duplicates are
/// allowed, plus the distinct cells with their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMultiset {
    m: usize,
    n: usize,
    pairs: Vec<(usize, usize)>,
    /// Distinct cells in row-major order with multiplicity `t_ij`.
    cells: Vec<(usize, usize, u32)>,
    seed: u64,
}

impl SampleMultiset {
    pub fn new(m: usize, n: usize, pairs: Vec<(usize, usize)>, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "ambient dimensions must be positive, got {m}x{n}"
            )));
        }
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("sample must contain at least one pair".into()));
        }
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= m || j >= n) {
            return Err(Error::InvalidArgument(format!(
                "index ({i}, {j}) (0-based) outside {m}x{n}"
            )));
        }
        let mut counts: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for &p in &pairs {
            *counts.entry(p).or_insert(0) += 1;
        }
        let cells = counts.into_iter().map(|((i, j), t)| (i, j, t)).collect();
        Ok(Self {
            m,
            n,
            pairs,
            cells,
            seed,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// `|Ω|`, counting duplicates.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Distinct cells `(i, j, t_ij)` in row-major order.
    pub fn cells(&self) -> &[(usize, usize, u32)] {
        &self.cells
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A sample holding the first `count` draws.
    pub fn prefix(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.len() {
            return Err(Error::InvalidArgument(format!(
                "prefix length {count} out of range 1..={}",
                self.len()
            )));
        }
        Self::new(self.m, self.n, self.pairs[..count].to_vec(), self.seed)
    }
}

/// Draws `count` i.i.d. uniform cells of `[m] × [n]`.
pub fn sample_uniform(m: usize, n: usize, count: usize, seed: u64) -> Result<SampleMultiset> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "ambient dimensions must be positive, got {m}x{n}"
        )));
    }
    let mut g = rng::stream(seed, rng::STREAM_SAMPLING);
    let pairs = (0..count)
        .map(|_| (g.random_range(0..m), g.random_range(0..n)))
        .collect();
    SampleMultiset::new(m, n, pairs, seed)
}

pub(crate) fn romega_raw(omega: &SampleMultiset, z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(omega.m, omega.n);
    for &(i, j, t) in &omega.cells {
        out[(i, j)] = f64::from(t) * z[(i, j)];
    }
    out
}

/// `R_Ω(Z)`: entry `(i, j)` is `t_ij Z_ij`, zero off the sample.
pub fn apply_romega(omega: &SampleMultiset, z: &DenseMatrix) -> Result<DenseMatrix> {
    check_dims(omega.dims(), z.dims())?;
    Ok(DenseMatrix::from_trusted(romega_raw(omega, z)))
}

pub(crate) fn romega_inner_raw(omega: &SampleMultiset, z: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    omega
        .cells
        .iter()
        .map(|&(i, j, t)| f64::from(t) * z[(i, j)] * w[(i, j)])
        .sum()
}

/// `⟨R_Ω(Z), W⟩ = Σ_{(i,j)∈Ω} Z_ij W_ij`, each duplicate counted.
pub fn romega_inner(omega: &SampleMultiset, z: &DenseMatrix, w: &DenseMatrix) -> Result<f64> {
    check_dims(omega.dims(), z.dims())?;
    check_dims(omega.dims(), w.dims())?;
    Ok(romega_inner_raw(omega, z, w))
}

/// Largest multiplicity in Ω, which is also the operator norm of `R_Ω`.
pub fn max_multiplicity(omega: &SampleMultiset) -> u32 {
    omega.cells.iter().map(|c| c.2).max().unwrap_or(0)
}

/// Ω together with the observed values of the unknown matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    sample: SampleMultiset,
    values: Vec<f64>,
    /// Observed value per distinct cell, aligned with `sample.cells()`.
    cell_values: Vec<f64>,
}

impl ObservationSet {
    /// Checks alignment, finiteness and that duplicated pairs carry identical values.
    pub fn new(sample: SampleMultiset, values: Vec<f64>) -> Result<Self> {
        if values.len() != sample.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for {} sampled pairs",
                values.len(),
                sample.len()
            )));
        }
        let mut seen: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&p, &v) in sample.pairs.iter().zip(&values) {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite value at {p:?}")));
            }
            if let Some(&prev) = seen.get(&p) {
                if prev.to_bits() != v.to_bits() {
                    return Err(Error::InvalidInput(format!(
                        "duplicate pair {p:?} carries different values {prev} and {v}"
                    )));
                }
            } else {
                seen.insert(p, v);
            }
        }
        let cell_values = sample.cells.iter().map(|&(i, j, _)| seen[&(i, j)]).collect();
        Ok(Self {
            sample,
            values,
            cell_values,
        })
    }

    /// Observes `a` on Ω.
    pub fn from_matrix(sample: SampleMultiset, a: &DenseMatrix) -> Result<Self> {
        check_dims(sample.dims(), a.dims())?;
        let values = sample.pairs.iter().map(|&(i, j)| a[(i, j)]).collect();
        let cell_values = sample.cells.iter().map(|&(i, j, _)| a[(i, j)]).collect();
        Ok(Self {
            sample,
            values,
            cell_values,
        })
    }

    pub fn sample(&self) -> &SampleMultiset {
        &self.sample
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        self.sample.dims()
    }

    /// `(i, j, t_ij, A_ij)` per distinct cell.
    pub(crate) fn cells(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        self.sample
            .cells
            .iter()
            .zip(&self.cell_values)
            .map(|(&(i, j, t), &a)| (i, j, f64::from(t), a))
    }

    /// Root mean square of the observed values, duplicates counted.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Writes `m n count` followed by one `i j value` line per draw (1-based).
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let (m, n) = self.dims();
        let mut buf = String::with_capacity(32 * (self.values.len() + 1));
        writeln!(buf, "{m} {n} {}", self.values.len()).unwrap();
        for (&(i, j), v) in self.sample.pairs.iter().zip(&self.values) {
            writeln!(buf, "{} {} {v}", i + 1, j + 1).unwrap();
        }
        w.write_all(buf.as_bytes())?;
        Ok(())
    }

    /// Parses the observation file format. The resulting sample has seed 0.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));

        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty observation file".into(),
        })?;
        let header = header?;
        let head: Vec<usize> = parse_fields(&header, 1)?;
        let [m, n, count] = head[..] else {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected `m n count`, got `{header}`"),
            });
        };

        let mut pairs = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [i, j, v] = fields[..] else {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected `i j value`, got `{line}`"),
                });
            };
            let parse_idx = |s: &str, bound: usize| -> Result<usize> {
                let k: usize = s.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad index `{s}`"),
                })?;
                if k == 0 || k > bound {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("index {k} outside 1..={bound}"),
                    });
                }
                Ok(k - 1)
            };
            pairs.push((parse_idx(i, m)?, parse_idx(j, n)?));
            values.push(v.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad value `{v}`"),
            })?);
        }
        if pairs.len() != count {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header announces {count} observations, found {}", pairs.len()),
            });
        }
        Self::new(SampleMultiset::new(m, n, pairs, 0)?, values)
    }
}

fn parse_fields<T: std::str::FromStr>(line: &str, lineno: usize) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|s| {
            s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("cannot parse `{s}`"),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian;
    use std::collections::HashMap;

    fn example() -> (SampleMultiset, DenseMatrix) {
        let omega = SampleMultiset::new(2, 2, vec![(0, 0), (0, 0), (1, 1)], 0).unwrap();
        let a = DenseMatrix::from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        (omega, a)
    }

    #[test]
    fn single_cell_sampling() {
        let s = sample_uniform(1, 1, 3, 99).unwrap();
        assert_eq!(s.pairs(), &[(0, 0), (0, 0), (0, 0)]);
        assert_eq!(max_multiplicity(&s), 3);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_uniform(13, 17, 200, 42).unwrap();
        let b = sample_uniform(13, 17, 200, 42).unwrap();
        let c = sample_uniform(13, 17, 200, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.pairs(), c.pairs());
    }

    #[test]
    fn sampling_errors() {
        assert!(matches!(sample_uniform(3, 3, 0, 1), Err(Error::InvalidArgument(_))));
        assert!(SampleMultiset::new(2, 2, vec![(2, 0)], 0).is_err());
        assert!(SampleMultiset::new(2, 2, vec![], 0).is_err());
    }

    #[test]
    fn cell_frequencies_concentrate() {
        let (m, n, count) = (50, 50, 100_000);
        let s = sample_uniform(m, n, count, 7).unwrap();
        let p = 1.0 / (m * n) as f64;
        let mean = count as f64 * p;
        let sd = (count as f64 * p * (1.0 - p)).sqrt();
        let mut freq = vec![0u32; m * n];
        for &(i, j) in s.pairs() {
            freq[i * n + j] += 1;
        }
        for f in freq {
            assert!((f64::from(f) - mean).abs() <= 5.0 * sd, "frequency {f}");
        }
    }

    #[test]
    fn romega_counts_duplicates() {
        let (omega, a) = example();
        let r = apply_romega(&omega, &a).unwrap();
        assert_eq!(r.to_row_major(), vec![2.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn romega_full_cover_is_identity() {
        let pairs = (0..3).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
        let omega = SampleMultiset::new(3, 4, pairs, 0).unwrap();
        let mut g = rng::stream(1, 0);
        let z = DenseMatrix::new(gaussian(3, 4, &mut g)).unwrap();
        assert_eq!(apply_romega(&omega, &z).unwrap(), z);
    }

    #[test]
    fn romega_dimension_mismatch() {
        let (omega, _) = example();
        let z = DenseMatrix::zeros(3, 2);
        assert!(matches!(apply_romega(&omega, &z), Err(Error::DimensionMismatch { .. })));
        assert!(romega_inner(&omega, &z, &z).is_err());
    }

    #[test]
    fn romega_is_linear_and_self_adjoint() {
        let mut g = rng::stream(2, 0);
        let omega = sample_uniform(6, 5, 40, 3).unwrap();
        let z = DenseMatrix::new(gaussian(6, 5, &mut g)).unwrap();
        let w = DenseMatrix::new(gaussian(6, 5, &mut g)).unwrap();
        let (a, b) = (1.7, -0.3);
        let comb = DenseMatrix::new(z.as_matrix() * a + w.as_matrix() * b).unwrap();
        let lhs = apply_romega(&omega, &comb).unwrap();
        let rhs = apply_romega(&omega, &z).unwrap().as_matrix() * a
            + apply_romega(&omega, &w).unwrap().as_matrix() * b;
        assert!((lhs.as_matrix() - rhs).amax() < 1e-12);

        let zw = apply_romega(&omega, &z).unwrap().dot(&w);
        let wz = z.dot(&apply_romega(&omega, &w).unwrap());
        assert!((zw - wz).abs() < 1e-12);
        assert!((romega_inner(&omega, &z, &w).unwrap() - zw).abs() < 1e-12);
    }

    #[test]
    fn lemma1_worked_example() {
        let (omega, a) = example();
        let raz = romega_inner(&omega, &a, &a).unwrap();
        let ra = apply_romega(&omega, &a).unwrap();
        assert_eq!(raz, 18.0);
        assert_eq!(ra.norm_squared(), 20.0);

        let w = DenseMatrix::identity(2);
        let raw = romega_inner(&omega, &a, &w).unwrap();
        let rww = romega_inner(&omega, &w, &w).unwrap();
        assert_eq!(raw, 6.0);
        assert_eq!(rww, 3.0);
        assert!(raw <= raz.sqrt() * rww.sqrt());
        assert!((raz.sqrt() * rww.sqrt() - 7.348_469_228_349_534).abs() < 1e-12);
    }

    #[test]
    fn max_multiplicity_examples() {
        let (omega, _) = example();
        assert_eq!(max_multiplicity(&omega), 2);
        let distinct = SampleMultiset::new(2, 2, vec![(0, 0), (1, 0), (0, 1)], 0).unwrap();
        assert_eq!(max_multiplicity(&distinct), 1);
    }

    #[test]
    fn max_multiplicity_matches_hashmap_count() {
        let s = sample_uniform(30, 30, 900, 2024).unwrap();
        let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
        for &p in s.pairs() {
            *counts.entry(p).or_default() += 1;
        }
        assert_eq!(max_multiplicity(&s), *counts.values().max().unwrap());
        assert_eq!(s.cells().len(), counts.len());
    }

    #[test]
    fn operator_norm_bound_holds_with_stated_frequency() {
        // ‖R_Ω‖ ≤ (8/3) sqrt(β) log n w.p. ≥ 1 − n^{1−β}, β = 2
        let beta: f64 = 2.0;
        for (m, n) in [(5, 5), (20, 30), (40, 40)] {
            let limit = 8.0 / 3.0 * beta.sqrt() * (n as f64).ln();
            let trials = 1000;
            let ok = (0..trials)
                .filter(|&t| {
                    let s = sample_uniform(m, n, m * n, t).unwrap();
                    f64::from(max_multiplicity(&s)) <= limit
                })
                .count();
            let required = 1.0 - (n as f64).powf(1.0 - beta);
            assert!(ok as f64 / trials as f64 >= required, "{m}x{n}: {ok}/{trials}");
        }
    }

    #[test]
    fn observation_file_round_trip() {
        let mut g = rng::stream(5, 0);
        let a = DenseMatrix::new(gaussian(4, 6, &mut g) * 1e-3).unwrap();
        let obs = ObservationSet::from_matrix(sample_uniform(4, 6, 30, 8).unwrap(), &a).unwrap();
        let mut buf = Vec::new();
        obs.write(&mut buf).unwrap();
        let back = ObservationSet::read(buf.as_slice()).unwrap();
        assert_eq!(back.sample().pairs(), obs.sample().pairs());
        assert_eq!(back.sample().seed(), 0);
        for (x, y) in back.values().iter().zip(obs.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn observation_file_errors() {
        assert!(ObservationSet::read("2 2 2\n1 1 1.0\n".as_bytes()).is_err());
        assert!(ObservationSet::read("2 2 1\n3 1 1.0\n".as_bytes()).is_err());
        assert!(ObservationSet::read("2 2 1\n1 1 abc\n".as_bytes()).is_err());
        // duplicates with conflicting values
        assert!(ObservationSet::read("2 2 2\n1 1 1.0\n1 1 2.0\n".as_bytes()).is_err());
        let ok = ObservationSet::read("2 2 2\n1 1 1.5\n1 1 1.5\n".as_bytes()).unwrap();
        assert_eq!(max_multiplicity(ok.sample()), 2);
    }
}
