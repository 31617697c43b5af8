//! Real positive-semidefinite covariance kernels `Γ` on a finite label set.

use std::path::Path;

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Smallest eigenvalue tolerated before a kernel is declared indefinite.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSpec {
    labels: Vec<String>,
    /// Row-major `k × k`.
    matrix: Vec<f64>,
}

impl GammaSpec {
    /// Validates symmetry and positive semidefiniteness.
    pub fn new(labels: Vec<String>, matrix: Vec<f64>) -> Result<Self> {
        let k = labels.len();
        if k == 0 {
            return Err(Error::parameter("covariance needs at least one label"));
        }
        if matrix.len() != k * k {
            return Err(Error::DimensionMismatch { expected: k * k, got: matrix.len() });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::parameter("covariance entries must be finite"));
        }
        for i in 0..k {
            for j in 0..i {
                let (a, b) = (matrix[i * k + j], matrix[j * k + i]);
                if (a - b).abs() > 1e-12 * 1.0f64.max(a.abs()) {
                    return Err(Error::parameter(format!(
                        "covariance not symmetric at ({}, {})",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        let spec = GammaSpec { labels, matrix };
        let min_eigenvalue = spec.min_eigenvalue()?;
        if min_eigenvalue < -PSD_TOLERANCE {
            return Err(Error::NotPsd { min_eigenvalue });
        }
        Ok(spec)
    }

    /// `Γ = δ` on labels `"0", "1", …`.
    pub fn identity(k: usize) -> Self {
        Self::identity_with_labels((0..k).map(|i| i.to_string()).collect())
    }

    pub fn identity_with_labels(labels: Vec<String>) -> Self {
        let k = labels.len();
        let mut matrix = vec![0.0; k * k];
        for i in 0..k {
            matrix[i * k + i] = 1.0;
        }
        GammaSpec { labels, matrix }
    }

    /// `Γ ≡ 1`: every label is the same variable.
    pub fn ones(k: usize) -> Self {
        GammaSpec {
            labels: (0..k).map(|i| i.to_string()).collect(),
            matrix: vec![1.0; k * k],
        }
    }

    /// Brownian covariance `Γ_{ts} = min(t, s)` for strictly increasing
    /// positive times.
    pub fn brownian_min(times: &[f64]) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::parameter("Brownian covariance needs at least one time"));
        }
        if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::parameter("Brownian times must be positive and strictly increasing"));
        }
        let k = times.len();
        let mut matrix = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                matrix[i * k + j] = times[i].min(times[j]);
            }
        }
        let labels = times.iter().map(|t| format!("{t}")).collect();
        Ok(GammaSpec { labels, matrix })
    }

    /// Reads a symmetric CSV: a header row of labels followed by `k` rows of
    /// `k` reals.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let labels: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut matrix = Vec::with_capacity(labels.len() * labels.len());
        let mut rows = 0;
        for record in reader.records() {
            let record = record?;
            if record.len() != labels.len() {
                return Err(Error::Parse(format!(
                    "covariance row {} has {} entries, expected {}",
                    rows + 1,
                    record.len(),
                    labels.len()
                )));
            }
            for field in record.iter() {
                matrix.push(
                    field
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad covariance entry {field:?}: {e}")))?,
                );
            }
            rows += 1;
        }
        if rows != labels.len() {
            return Err(Error::Parse(format!(
                "covariance has {rows} rows for {} labels",
                labels.len()
            )));
        }
        Self::new(labels, matrix)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.matrix[mu * self.len() + nu]
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let k = self.len();
        let mat = Mat::<f64>::from_fn(k, k, |i, j| self.matrix[i * k + j]);
        let eig = mat.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)?;
        Ok(eig.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Pivoted Cholesky factor `L` (`k × r`, row-major) with `Γ ≈ L Lᵀ`.
    ///
    /// Columns stop once the largest remaining diagonal falls below
    /// [`PSD_TOLERANCE`], so rank-deficient kernels give `r < k`.
    pub fn factor(&self) -> GammaFactor {
        let k = self.len();
        let mut residual = self.matrix.clone();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        while columns.len() < k {
            let (pivot, diag) = (0..k)
                .map(|i| (i, residual[i * k + i]))
                .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            if diag <= PSD_TOLERANCE {
                break;
            }
            let scale = diag.sqrt();
            let col: Vec<f64> = (0..k).map(|i| residual[i * k + pivot] / scale).collect();
            for i in 0..k {
                for j in 0..k {
                    residual[i * k + j] -= col[i] * col[j];
                }
            }
            columns.push(col);
        }
        let rank = columns.len();
        let mut factor = vec![0.0; k * rank];
        for (r, col) in columns.iter().enumerate() {
            for i in 0..k {
                factor[i * rank + r] = col[i];
            }
        }
        GammaFactor { labels: k, rank, factor }
    }
}

/// `Γ ≈ L Lᵀ`; row `μ` of `L` mixes `rank` iid families into label `μ`.
#[derive(Debug, Clone)]
pub struct GammaFactor {
    pub labels: usize,
    pub rank: usize,
    factor: Vec<f64>,
}

impl GammaFactor {
    pub fn get(&self, mu: usize, kappa: usize) -> f64 {
        self.factor[mu * self.rank + kappa]
    }

    /// `Σ_κ L[μ,κ] z[κ]`.
    pub fn mix(&self, mu: usize, z: &[f64]) -> f64 {
        let row = &self.factor[mu * self.rank..(mu + 1) * self.rank];
        row.iter().zip(z).map(|(l, z)| l * z).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(g: &GammaSpec) -> Vec<f64> {
        let f = g.factor();
        let k = g.len();
        let mut out = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                out[i * k + j] = (0..f.rank).map(|r| f.get(i, r) * f.get(j, r)).sum();
            }
        }
        out
    }

    #[test]
    fn factor_reconstructs_full_and_deficient_kernels() {
        let bm = GammaSpec::brownian_min(&[0.5, 1.0, 2.5]).unwrap();
        assert_eq!(bm.factor().rank, 3);
        for (a, b) in reconstruct(&bm).iter().zip(&bm.matrix) {
            assert!((a - b).abs() < 1e-12);
        }
        let ones = GammaSpec::ones(3);
        assert_eq!(ones.factor().rank, 1);
        for (a, b) in reconstruct(&ones).iter().zip(&ones.matrix) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let bad = GammaSpec::new(vec!["a".into(), "b".into()], vec![1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(bad, Err(Error::NotPsd { .. })));
        let asym = GammaSpec::new(vec!["a".into(), "b".into()], vec![1.0, 0.5, 0.0, 1.0]);
        assert!(asym.is_err());
        assert!(GammaSpec::brownian_min(&[1.0, 1.0]).is_err());
        assert!(GammaSpec::brownian_min(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = GammaSpec::from_csv_str("x,y\n2,1\n1,2\n").unwrap();
        assert_eq!(g.labels(), &["x".to_string(), "y".to_string()]);
        assert_eq!(g.get(0, 1), 1.0);
        assert_eq!(g.label_index("y"), Some(1));
        assert!(GammaSpec::from_csv_str("x,y\n2,1\n").is_err());
        assert!(GammaSpec::from_csv_str("x,y\n2,q\n1,2\n").is_err());
    }
}
