//! Posterior similarity matrices, variation of information and
//! VI-optimal point estimates of the nested partition.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{canonical_labels, NestedPartition};

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts.filter(|&c| c > 0).map(|c| {
        let p = c as f64 / n;
        -p * p.ln()
    }).sum()
}

/// Dense relabelling to `0..k`; returns the labels and `k`.
fn dense(z: &[usize]) -> (Vec<usize>, usize) {
    let c = canonical_labels(z);
    let k = c.iter().max().map_or(0, |m| m + 1);
    (c, k)
}

/// Variation of information between two partitions, in nats.
pub fn vi_distance(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    let (a, ka) = dense(a);
    let (b, kb) = dense(b);
    Ok(vi_dense(&a, ka, &b, kb))
}

/// VI for labels already in `0..ka` and `0..kb`.
fn vi_dense(a: &[usize], ka: usize, b: &[usize], kb: usize) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let mut table = vec![0usize; ka * kb];
    let mut ca = vec![0usize; ka];
    let mut cb = vec![0usize; kb];
    for (&i, &j) in a.iter().zip(b) {
        table[i * kb + j] += 1;
        ca[i] += 1;
        cb[j] += 1;
    }
    // VI = H(a) + H(b) - 2 I(a, b) = 2 H(a, b) - H(a) - H(b).
    let vi = 2.0 * entropy(table.into_iter(), nf) - entropy(ca.into_iter(), nf) - entropy(cb.into_iter(), nf);
    vi.max(0.0)
}

/// Symmetric matrix of co-clustering frequencies with unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix(pub DMatrix<f64>);

impl SimilarityMatrix {
    /// Co-clustering frequencies of a set of label vectors of equal length.
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a [usize]>) -> Result<Self> {
        let mut it = labels.into_iter().peekable();
        let n = it.peek().ok_or_else(|| Error::Config("no draws for the similarity matrix".into()))?.len();
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut count = 0usize;
        for z in it {
            if z.len() != n {
                return Err(Error::SizeMismatch(z.len(), n));
            }
            count += 1;
            for i in 0..n {
                for j in 0..i {
                    if z[i] == z[j] {
                        m[(i, j)] += 1.0;
                    }
                }
            }
        }
        let c = count as f64;
        for i in 0..n {
            m[(i, i)] = 1.0;
            for j in 0..i {
                let v = m[(i, j)] / c;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(SimilarityMatrix(m))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for i in 0..self.len() {
            out.write_record(self.0.row(i).iter().map(|v| format!("{v}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Data(format!("bad similarity entry {s:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::SizeMismatch(r.len(), n));
        }
        Ok(SimilarityMatrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }
}

/// y-level similarity matrix.
pub fn psm_y(draws: &[NestedPartition]) -> Result<SimilarityMatrix> {
    SimilarityMatrix::from_labels(draws.iter().map(|p| p.zy()))
}

/// x-level similarity matrix over `members` (typically one estimated
/// y-cluster): two points co-cluster when they share both labels.
pub fn psm_x_within(draws: &[NestedPartition], members: &[usize]) -> Result<SimilarityMatrix> {
    let sub: Vec<Vec<usize>> = draws.iter().map(|p| restrict(&p.joint_labels(), members)).collect();
    if members.is_empty() {
        return Ok(SimilarityMatrix(DMatrix::zeros(0, 0)));
    }
    SimilarityMatrix::from_labels(sub.iter().map(Vec::as_slice))
}

/// x-level similarity over all points given an estimated y-partition:
/// pairs in different estimated y-clusters get 0.
pub fn psm_x_given(draws: &[NestedPartition], zy_est: &[usize]) -> Result<SimilarityMatrix> {
    let n = zy_est.len();
    let (zy, k) = dense(zy_est);
    let mut m = DMatrix::<f64>::identity(n, n);
    for j in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| zy[i] == j).collect();
        let sub = psm_x_within(draws, &members)?;
        for (a, &i) in members.iter().enumerate() {
            for (b, &l) in members.iter().enumerate() {
                m[(i, l)] = sub.get(a, b);
            }
        }
    }
    Ok(SimilarityMatrix(m))
}

fn restrict(z: &[usize], members: &[usize]) -> Vec<usize> {
    members.iter().map(|&i| z[i]).collect()
}

/// Distinct partitions (canonical labels) with their multiplicities.
struct Support {
    parts: Vec<(Vec<usize>, usize)>,
    weights: Vec<f64>,
}

impl Support {
    fn new<'a>(labels: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut parts: Vec<(Vec<usize>, usize)> = Vec::new();
        let mut weights = Vec::new();
        let mut total = 0.0;
        for z in labels {
            let (c, k) = dense(z);
            total += 1.0;
            match index.get(&c) {
                Some(&u) => weights[u] += 1.0,
                None => {
                    index.insert(c.clone(), parts.len());
                    parts.push((c, k));
                    weights.push(1.0);
                }
            }
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Support { parts, weights }
    }

    fn expected_vi(&self, c: &[usize], k: usize) -> f64 {
        self.parts.iter().zip(&self.weights).map(|((z, kz), w)| w * vi_dense(c, k, z, *kz)).sum()
    }

    /// Sampled partition with the smallest expected VI (ties: first sampled).
    fn best(&self) -> (Vec<usize>, f64) {
        let mut best = (0, f64::INFINITY);
        for (u, (z, k)) in self.parts.iter().enumerate() {
            let v = self.expected_vi(z, *k);
            if v < best.1 {
                best = (u, v);
            }
        }
        (self.parts[best.0].0.clone(), best.1)
    }

    /// Moves single items between clusters (or to a new cluster) while the
    /// expected VI decreases.
    fn refine(&self, mut c: Vec<usize>, mut value: f64, max_sweeps: usize) -> (Vec<usize>, f64) {
        for _ in 0..max_sweeps {
            let mut improved = false;
            for i in 0..c.len() {
                let k = c.iter().max().map_or(0, |m| m + 1);
                let orig = c[i];
                let mut best = (orig, value);
                for target in 0..=k {
                    if target == orig {
                        continue;
                    }
                    c[i] = target;
                    let (d, kd) = dense(&c);
                    let v = self.expected_vi(&d, kd);
                    if v < best.1 - 1e-12 {
                        best = (target, v);
                    }
                }
                c[i] = best.0;
                if best.0 != orig {
                    c = canonical_labels(&c);
                    value = best.1;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        (c, value)
    }

    /// Largest VI from `c` among the closest `level` fraction of the draws.
    fn ball_size(&self, c: &[usize], k: usize, level: f64) -> f64 {
        let mut d: Vec<(f64, f64)> =
            self.parts.iter().zip(&self.weights).map(|((z, kz), w)| (vi_dense(c, k, z, *kz), *w)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut mass = 0.0;
        for (v, w) in d {
            mass += w;
            if mass >= level - 1e-12 {
                return v;
            }
        }
        0.0
    }
}

/// Options for the VI point estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    /// Run a greedy single-item refinement after the search over sampled partitions.
    pub refine: bool,
    pub max_refine_sweeps: usize,
    /// Credible level for the ball size.
    pub ball_level: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions { refine: false, max_refine_sweeps: 20, ball_level: 0.95 }
    }
}

/// Nested partition point estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    /// y-level labels in first-appearance order.
    pub zy: Vec<usize>,
    /// x-level labels, local to each estimated y-cluster.
    pub zx: Vec<usize>,
    /// Posterior expected VI of the y-estimate.
    pub expected_vi: f64,
    /// Largest VI distance from the y-estimate among the closest 95% of draws.
    pub ball_size: f64,
    /// Posterior expected VI of each nested x-estimate.
    pub x_expected_vi: Vec<f64>,
}

impl PointEstimate {
    pub fn k(&self) -> usize {
        self.zy.iter().max().map_or(0, |m| m + 1)
    }

    /// Number of x-clusters in each estimated y-cluster.
    pub fn kj(&self) -> Vec<usize> {
        let mut kj = vec![0; self.k()];
        for (&j, &l) in self.zy.iter().zip(&self.zx) {
            kj[j] = kj[j].max(l + 1);
        }
        kj
    }

    pub fn partition(&self) -> Result<NestedPartition> {
        NestedPartition::new(self.zy.clone(), self.zx.clone())
    }
}

/// Minimiser of the posterior expected VI over sampled y-partitions, then
/// per estimated y-cluster the nested x-partition minimising expected VI
/// over the induced sampled partitions of its members.
pub fn vi_point_estimate(draws: &[NestedPartition], opts: &SummaryOptions) -> Result<PointEstimate> {
    let n = draws.first().ok_or_else(|| Error::Config("no draws to summarise".into()))?.len();
    if let Some(p) = draws.iter().find(|p| p.len() != n) {
        return Err(Error::SizeMismatch(p.len(), n));
    }
    let support = Support::new(draws.iter().map(|p| p.zy()));
    let (mut zy, mut expected_vi) = support.best();
    if opts.refine {
        (zy, expected_vi) = support.refine(zy, expected_vi, opts.max_refine_sweeps);
    }
    let (zy, k) = dense(&zy);
    let ball_size = support.ball_size(&zy, k, opts.ball_level);

    let joint: Vec<Vec<usize>> = draws.iter().map(|p| p.joint_labels()).collect();
    let mut zx = vec![0; n];
    let mut x_expected_vi = Vec::with_capacity(k);
    for j in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| zy[i] == j).collect();
        let sub: Vec<Vec<usize>> = joint.iter().map(|z| restrict(z, &members)).collect();
        let s = Support::new(sub.iter().map(Vec::as_slice));
        let (mut zl, mut v) = s.best();
        if opts.refine {
            (zl, v) = s.refine(zl, v, opts.max_refine_sweeps);
        }
        let zl = canonical_labels(&zl);
        for (&i, &l) in members.iter().zip(&zl) {
            zx[i] = l;
        }
        x_expected_vi.push(v);
    }
    Ok(PointEstimate { zy, zx, expected_vi, ball_size, x_expected_vi })
}

/// Posterior expected VI of `c` against the draws' y-partitions.
pub fn expected_vi(c: &[usize], draws: &[NestedPartition]) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Config("no draws".into()));
    }
    let mut total = 0.0;
    for p in draws {
        total += vi_distance(c, p.zy())?;
    }
    Ok(total / draws.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(zy: &[usize]) -> NestedPartition {
        NestedPartition::new(zy.to_vec(), vec![0; zy.len()]).unwrap()
    }

    #[test]
    fn vi_identities() {
        let a = [0, 0, 1, 1, 2];
        assert_eq!(vi_distance(&a, &a).unwrap(), 0.0);
        let singletons: Vec<usize> = (0..7).collect();
        let one = vec![0; 7];
        assert!((vi_distance(&singletons, &one).unwrap() - 7f64.ln()).abs() < 1e-12);
        assert!(vi_distance(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn vi_is_label_invariant() {
        assert_eq!(vi_distance(&[0, 0, 1], &[5, 5, 2]).unwrap(), 0.0);
    }

    #[test]
    fn psm_two_draws() {
        let draws = vec![part(&[0, 0, 1]), part(&[0, 1, 1])];
        let m = psm_y(&draws).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 2), 0.5);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(2, 2), 1.0);
    }

    #[test]
    fn identical_draws_give_that_partition() {
        let p = NestedPartition::new(vec![0, 0, 1, 1], vec![0, 1, 0, 0]).unwrap();
        let est = vi_point_estimate(&[p.clone(), p.clone(), p.clone()], &SummaryOptions::default()).unwrap();
        assert_eq!(est.zy, p.zy());
        assert_eq!(est.zx, p.zx());
        assert_eq!(est.ball_size, 0.0);
        assert_eq!(est.kj(), vec![2, 1]);
    }

    #[test]
    fn refinement_never_increases_expected_vi() {
        let draws = vec![part(&[0, 0, 1, 1, 2]), part(&[0, 0, 0, 1, 1]), part(&[0, 1, 1, 2, 2]), part(&[0, 0, 1, 1, 1])];
        let plain = vi_point_estimate(&draws, &SummaryOptions::default()).unwrap();
        let refined = vi_point_estimate(&draws, &SummaryOptions { refine: true, ..Default::default() }).unwrap();
        assert!(refined.expected_vi <= plain.expected_vi + 1e-12);
        assert!((expected_vi(&refined.zy, &draws).unwrap() - refined.expected_vi).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let m = psm_y(&[part(&[0, 0, 1]), part(&[0, 1, 1]), part(&[0, 0, 0])]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(SimilarityMatrix::read_csv(buf.as_slice()).unwrap(), m);
    }
}
