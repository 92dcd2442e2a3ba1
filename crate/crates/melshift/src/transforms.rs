//! Linear operators of the pipeline: mel filterbank, its Moore-Penrose
//! pseudo-inverse, the orthonormal DCT-II over the one-sided spectrum, and
//! the fused compositions of both directions.
//!
//! Everything is built once in double precision and is immutable afterwards,
//! so a `TransformSet` can be shared freely across threads.

use ndarray::Array2;
use serde::Serialize;

use crate::config::MelConfig;
use crate::error::{Error, Result};

/// Precomputed operators for one `MelConfig`.
#[derive(Debug, Clone)]
pub struct TransformSet {
    config: MelConfig,
    mel_matrix: Array2<f64>,
    mel_pinv: Array2<f64>,
    dct: Array2<f64>,
    idct: Array2<f64>,
    fused_forward: Array2<f64>,
    fused_backward: Array2<f64>,
}

impl TransformSet {
    /// Build all operators for `config`.
    pub fn build(config: &MelConfig) -> Result<Self> {
        config.validate()?;
        let mel_matrix = build_mel_filterbank(config)?;
        let mel_pinv = build_pseudo_inverse(&mel_matrix)?;
        let dct = build_dct(config.n_freq_bins())?;
        let idct = dct.t().to_owned();
        let fused_forward = dct.dot(&mel_pinv);
        let fused_backward = mel_matrix.dot(&idct);
        Ok(TransformSet {
            config: config.clone(),
            mel_matrix,
            mel_pinv,
            dct,
            idct,
            fused_forward,
            fused_backward,
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.config
    }

    /// The mel filterbank M, n_mels x K.
    pub fn mel_matrix(&self) -> &Array2<f64> {
        &self.mel_matrix
    }

    /// Moore-Penrose pseudo-inverse of M, K x n_mels.
    pub fn mel_pinv(&self) -> &Array2<f64> {
        &self.mel_pinv
    }

    /// Orthonormal DCT-II matrix, K x K.
    pub fn dct(&self) -> &Array2<f64> {
        &self.dct
    }

    /// Inverse DCT; the transpose of `dct` by orthonormality.
    pub fn idct(&self) -> &Array2<f64> {
        &self.idct
    }

    /// Fused mel-to-cepstrum operator D * M+, K x n_mels.
    pub fn fused_forward(&self) -> &Array2<f64> {
        &self.fused_forward
    }

    /// Fused cepstrum-to-mel operator M * D^-1, n_mels x K.
    pub fn fused_backward(&self) -> &Array2<f64> {
        &self.fused_backward
    }

    /// Apply the fused forward operator to frame-major mel features
    /// (n_frames x n_mels), giving frame-major coefficients (n_frames x K).
    pub fn apply_forward(&self, mel_frames: &Array2<f64>) -> Array2<f64> {
        mel_frames.dot(&self.fused_forward.t())
    }

    /// Apply the fused backward operator to frame-major coefficients
    /// (n_frames x K), giving frame-major mel features (n_frames x n_mels).
    pub fn apply_backward(&self, cep_frames: &Array2<f64>) -> Array2<f64> {
        cep_frames.dot(&self.fused_backward.t())
    }

    /// Numerical residuals of the operator invariants, for diagnostics.
    pub fn residuals(&self) -> TransformResiduals {
        let k = self.config.n_freq_bins();
        let eye_k = Array2::<f64>::eye(k);
        let dct_orthonormality = max_abs_norm(&(self.dct.dot(&self.idct) - &eye_k));

        let m = &self.mel_matrix;
        let mp = &self.mel_pinv;
        let penrose_m_pinv_m = max_abs_norm(&(m.dot(mp).dot(m) - m));
        let penrose_pinv_m_pinv = max_abs_norm(&(mp.dot(m).dot(mp) - mp));
        let projector = m.dot(mp);
        let projector_idempotence = max_abs_norm(&(projector.dot(&projector) - &projector));

        let fusion_forward = max_abs_norm(&(self.dct.dot(&self.mel_pinv) - &self.fused_forward));
        let fusion_backward = max_abs_norm(&(self.mel_matrix.dot(&self.idct) - &self.fused_backward));

        TransformResiduals {
            dct_orthonormality,
            penrose_m_pinv_m,
            penrose_pinv_m_pinv,
            projector_idempotence,
            fusion_forward,
            fusion_backward,
        }
    }
}

/// Residuals reported by `melshift transforms --check`. Each is the largest
/// absolute entry of the named defect matrix.
#[derive(Debug, Clone, Serialize)]
pub struct TransformResiduals {
    /// D * D^T - I.
    pub dct_orthonormality: f64,
    /// M * M+ * M - M.
    pub penrose_m_pinv_m: f64,
    /// M+ * M * M+ - M+.
    pub penrose_pinv_m_pinv: f64,
    /// P * P - P with P = M * M+.
    pub projector_idempotence: f64,
    /// Deviation of the fused forward operator from D * M+.
    pub fusion_forward: f64,
    /// Deviation of the fused backward operator from M * D^-1.
    pub fusion_backward: f64,
}

/// Largest absolute entry; the residual norm used for every operator
/// invariant in this crate. Unlike the row-sum operator norm it does not
/// scale with K, so a fixed bound means the same thing at any size.
pub fn max_abs_norm(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Triangular mel filterbank, n_mels x K, band centers uniformly spaced on
/// the configured mel scale between f_min and f_max.
pub fn build_mel_filterbank(config: &MelConfig) -> Result<Array2<f64>> {
    config.validate()?;
    let k_bins = config.n_freq_bins();
    let n_mels = config.n_mels;
    let scale = config.mel_scale;
    let bin_hz = config.sample_rate as f64 / config.n_fft as f64;

    let mel_min = scale.hz_to_mel(config.f_min as f64);
    let mel_max = scale.hz_to_mel(config.f_max as f64);
    let hz_points: Vec<f64> = (0..n_mels + 2)
        .map(|i| {
            let mel = mel_min + (mel_max - mel_min) * i as f64 / (n_mels + 1) as f64;
            scale.mel_to_hz(mel)
        })
        .collect();

    let mut weights = Array2::<f64>::zeros((n_mels, k_bins));
    for m in 0..n_mels {
        let lower = hz_points[m];
        let center = hz_points[m + 1];
        let upper = hz_points[m + 2];
        let norm = if config.area_normalize {
            2.0 / (upper - lower)
        } else {
            1.0
        };
        let mut row_has_weight = false;
        for k in 0..k_bins {
            let f = k as f64 * bin_hz;
            let rising = (f - lower) / (center - lower).max(f64::MIN_POSITIVE);
            let falling = (upper - f) / (upper - center).max(f64::MIN_POSITIVE);
            let w = rising.min(falling);
            if w > 0.0 {
                weights[[m, k]] = w * norm;
                row_has_weight = true;
            }
        }
        if !row_has_weight {
            return Err(Error::Config(format!(
                "mel band {m} is empty: adjacent mel centers collapse onto the same FFT bin \
                 (centers {lower:.2} Hz / {center:.2} Hz / {upper:.2} Hz, bin width {bin_hz:.2} Hz)"
            )));
        }
    }
    Ok(weights)
}

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// max_singular_value * 1e-12 are treated as zero; if that makes the matrix
/// rank-deficient the call fails naming the effective rank.
pub fn build_pseudo_inverse(matrix: &Array2<f64>) -> Result<Array2<f64>> {
    const RELATIVE_CUTOFF: f64 = 1e-12;

    let (rows, cols) = matrix.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch(
            "cannot invert an empty matrix".into(),
        ));
    }
    let dm = nalgebra::DMatrix::from_row_iterator(rows, cols, matrix.iter().cloned());
    let svd = dm.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let full_rank = rows.min(cols);
    let cutoff = max_sv * RELATIVE_CUTOFF;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| max_sv > 0.0 && s >= cutoff)
        .count();
    if rank < full_rank {
        return Err(Error::RankDeficient {
            rank,
            expected: full_rank,
        });
    }

    // pinv = V * S^+ * U^T, assembled as (S^+ U^T) first.
    let mut ut = u.transpose();
    for (i, mut row) in ut.row_iter_mut().enumerate() {
        let s = svd.singular_values[i];
        let inv = if s >= cutoff { 1.0 / s } else { 0.0 };
        row *= inv;
    }
    let pinv = v_t.transpose() * ut;
    Ok(Array2::from_shape_fn((cols, rows), |(i, j)| pinv[(i, j)]))
}

/// Orthonormal DCT-II matrix of size K x K: entry (k, m) is
/// s(k) * cos(pi * k * (2m + 1) / (2K)) with s(0) = sqrt(1/K) and
/// s(k>0) = sqrt(2/K), so the inverse is exactly the transpose.
pub fn build_dct(k_bins: usize) -> Result<Array2<f64>> {
    if k_bins < 2 {
        return Err(Error::Config(format!(
            "DCT size must be at least 2, got {k_bins}"
        )));
    }
    let kf = k_bins as f64;
    let s0 = (1.0 / kf).sqrt();
    let s = (2.0 / kf).sqrt();
    // Reduce k * (2m + 1) mod 4K in exact integer arithmetic before the
    // cosine; for large K the unreduced angle loses enough precision to
    // push the orthonormality residual orders of magnitude up.
    let four_k = 4 * k_bins as u64;
    let mut d = Array2::<f64>::zeros((k_bins, k_bins));
    for k in 0..k_bins {
        let scale = if k == 0 { s0 } else { s };
        for m in 0..k_bins {
            let reduced = (k as u64 * (2 * m as u64 + 1)) % four_k;
            let angle = std::f64::consts::PI * reduced as f64 / (2.0 * kf);
            d[[k, m]] = scale * angle.cos();
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MelScale;
    use ndarray::Array1;

    fn default_config() -> MelConfig {
        MelConfig::default()
    }

    /// Independent pseudo-inverse for full-row-rank M: M^T (M M^T)^-1 with
    /// the inverse computed by Gauss-Jordan elimination. Shares no code with
    /// the SVD path.
    fn pinv_via_normal_equations(m: &Array2<f64>) -> Array2<f64> {
        let gram = m.dot(&m.t());
        let n = gram.nrows();
        let mut aug = Array2::<f64>::zeros((n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                aug[[i, j]] = gram[[i, j]];
            }
            aug[[i, n + i]] = 1.0;
        }
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&a, &b| {
                    aug[[a, col]]
                        .abs()
                        .partial_cmp(&aug[[b, col]].abs())
                        .unwrap()
                })
                .unwrap();
            if pivot_row != col {
                for j in 0..2 * n {
                    aug.swap([col, j], [pivot_row, j]);
                }
            }
            let pivot = aug[[col, col]];
            assert!(pivot.abs() > 1e-12, "gram matrix is singular");
            for j in 0..2 * n {
                aug[[col, j]] /= pivot;
            }
            for i in 0..n {
                if i != col {
                    let factor = aug[[i, col]];
                    for j in 0..2 * n {
                        aug[[i, j]] -= factor * aug[[col, j]];
                    }
                }
            }
        }
        let gram_inv = aug.slice(ndarray::s![.., n..]).to_owned();
        m.t().dot(&gram_inv)
    }

    #[test]
    fn dct_k2_matches_closed_form() {
        let d = build_dct(2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [[r, r], [r, -r]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[[i, j]] - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dct_is_orthonormal() {
        for k in [8usize, 64, 513] {
            let d = build_dct(k).unwrap();
            let eye = Array2::<f64>::eye(k);
            let residual = max_abs_norm(&(d.dot(&d.t()) - &eye));
            assert!(residual < 1e-12, "K={k}: residual {residual:e}");
        }
    }

    #[test]
    fn dct_of_constant_vector_is_pure_dc() {
        let k = 64;
        let d = build_dct(k).unwrap();
        let constant = Array1::<f64>::from_elem(k, 3.5);
        let coeffs = d.dot(&constant);
        assert!((coeffs[0] - 3.5 * (k as f64).sqrt()).abs() < 1e-10);
        for i in 1..k {
            assert!(coeffs[i].abs() < 1e-10, "coefficient {i} = {}", coeffs[i]);
        }
    }

    #[test]
    fn dct_rejects_tiny_sizes() {
        assert!(build_dct(1).is_err());
    }

    #[test]
    fn filterbank_shape_and_nonnegativity() {
        let fb = build_mel_filterbank(&default_config()).unwrap();
        assert_eq!(fb.dim(), (80, 513));
        assert!(fb.iter().all(|&w| w >= 0.0));
        // Every row has positive mass.
        for row in fb.rows() {
            assert!(row.iter().any(|&w| w > 0.0));
        }
    }

    #[test]
    fn filterbank_rows_are_unimodal() {
        let fb = build_mel_filterbank(&default_config()).unwrap();
        for (m, row) in fb.rows().into_iter().enumerate() {
            let mut increasing = true;
            let mut switched = false;
            let mut prev = 0.0;
            for &w in row.iter() {
                if increasing {
                    if w < prev {
                        increasing = false;
                        switched = true;
                    }
                } else {
                    assert!(
                        w <= prev + 1e-12,
                        "row {m} rises again after falling"
                    );
                }
                prev = w;
            }
            // A row that never switches direction is still unimodal.
            let _ = switched;
        }
    }

    #[test]
    fn filterbank_rejects_collapsed_bands() {
        // 32 bands over 33 bins with a 24 kHz range: the bottom mel bands are
        // far narrower than one FFT bin, so some row must come out empty.
        let config = MelConfig {
            n_fft: 64,
            win_length: 64,
            hop_length: 16,
            n_mels: 32,
            ..default_config()
        };
        let err = build_mel_filterbank(&config).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
    }

    #[test]
    fn filterbank_htk_differs_from_slaney() {
        let slaney = build_mel_filterbank(&default_config()).unwrap();
        let htk = build_mel_filterbank(&MelConfig {
            mel_scale: MelScale::Htk,
            ..default_config()
        })
        .unwrap();
        assert!(max_abs_norm(&(&slaney - &htk)) > 1e-3);
    }

    #[test]
    fn area_normalization_scales_rows() {
        let plain = build_mel_filterbank(&default_config()).unwrap();
        let normed = build_mel_filterbank(&MelConfig {
            area_normalize: true,
            ..default_config()
        })
        .unwrap();
        assert_eq!(plain.dim(), normed.dim());
        // Normalized rows integrate to roughly constant mass.
        let peak_plain = plain.row(40).iter().cloned().fold(0.0, f64::max);
        let peak_normed = normed.row(40).iter().cloned().fold(0.0, f64::max);
        assert!((peak_plain - 1.0).abs() < 0.2);
        assert!(peak_normed < peak_plain);
    }

    #[test]
    fn pinv_of_orthonormal_matrix_is_its_transpose() {
        let d = build_dct(16).unwrap();
        let pinv = build_pseudo_inverse(&d).unwrap();
        assert!(max_abs_norm(&(&pinv - &d.t())) < 1e-10);
    }

    #[test]
    fn pinv_of_zero_matrix_is_rank_deficient() {
        let zero = Array2::<f64>::zeros((4, 8));
        match build_pseudo_inverse(&zero) {
            Err(Error::RankDeficient { rank, expected }) => {
                assert_eq!(rank, 0);
                assert_eq!(expected, 4);
            }
            other => panic!("expected rank-deficient error, got {other:?}"),
        }
    }

    #[test]
    fn pinv_of_duplicated_rows_is_rank_deficient() {
        let mut m = Array2::<f64>::zeros((3, 6));
        for j in 0..6 {
            m[[0, j]] = (j + 1) as f64;
            m[[1, j]] = 2.0 * (j + 1) as f64;
            m[[2, j]] = if j == 0 { 1.0 } else { 0.0 };
        }
        match build_pseudo_inverse(&m) {
            Err(Error::RankDeficient { rank, expected }) => {
                assert_eq!(rank, 2);
                assert_eq!(expected, 3);
            }
            other => panic!("expected rank-deficient error, got {other:?}"),
        }
    }

    #[test]
    fn default_filterbank_pinv_satisfies_penrose_conditions() {
        let m = build_mel_filterbank(&default_config()).unwrap();
        let mp = build_pseudo_inverse(&m).unwrap();
        assert_eq!(mp.dim(), (513, 80));

        // M * M+ is the identity for a full-row-rank filterbank.
        let eye = Array2::<f64>::eye(80);
        assert!(max_abs_norm(&(m.dot(&mp) - &eye)) < 1e-6);

        // Four Penrose conditions.
        assert!(max_abs_norm(&(m.dot(&mp).dot(&m) - &m)) < 1e-8);
        assert!(max_abs_norm(&(mp.dot(&m).dot(&mp) - &mp)) < 1e-8);
        let mmp = m.dot(&mp);
        assert!(max_abs_norm(&(&mmp.t().to_owned() - &mmp)) < 1e-8);
        let mpm = mp.dot(&m);
        assert!(max_abs_norm(&(&mpm.t().to_owned() - &mpm)) < 1e-8);

        // Cross-check against an algebraically independent construction.
        let oracle = pinv_via_normal_equations(&m);
        assert!(max_abs_norm(&(&mp - &oracle)) < 1e-8);
    }

    #[test]
    fn fused_operators_match_components() {
        let ts = TransformSet::build(&default_config()).unwrap();
        let forward_direct = ts.dct().dot(ts.mel_pinv());
        let diff = (&forward_direct - ts.fused_forward())
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        assert!(diff < 1e-12);

        let backward_direct = ts.mel_matrix().dot(ts.idct());
        let diff = (&backward_direct - ts.fused_backward())
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        assert!(diff < 1e-12);
    }

    #[test]
    fn fused_and_stepwise_paths_agree_on_features() {
        let ts = TransformSet::build(&default_config()).unwrap();
        // Deterministic pseudo-random feature block, 10 frames.
        let features = Array2::from_shape_fn((10, 80), |(i, j)| {
            ((i * 80 + j) as f64 * 0.7391).sin() * 3.0 - 1.0
        });

        let fused = ts.apply_forward(&features);
        // Stepwise: pinv then dct, frame by frame.
        let lin = features.dot(&ts.mel_pinv().t());
        let stepwise = lin.dot(&ts.dct().t());
        let num = max_abs_norm(&(&fused - &stepwise));
        let den = max_abs_norm(&stepwise).max(f64::MIN_POSITIVE);
        assert!(num / den < 1e-10);

        // Zero input maps to zero on both paths.
        let zero = Array2::<f64>::zeros((3, 80));
        assert!(ts.apply_forward(&zero).iter().all(|&v| v == 0.0));

        // Single-frame shapes.
        let one = Array2::<f64>::zeros((1, 80));
        assert_eq!(ts.apply_forward(&one).dim(), (1, 513));
        assert_eq!(ts.apply_backward(&Array2::<f64>::zeros((1, 513))).dim(), (1, 80));
    }

    #[test]
    fn residual_report_is_within_spec_bounds() {
        let ts = TransformSet::build(&default_config()).unwrap();
        let r = ts.residuals();
        assert!(r.dct_orthonormality < 1e-10);
        assert!(r.penrose_m_pinv_m < 1e-8);
        assert!(r.penrose_pinv_m_pinv < 1e-8);
        assert!(r.projector_idempotence < 1e-8);
        assert!(r.fusion_forward < 1e-12);
        assert!(r.fusion_backward < 1e-12);
    }
}
