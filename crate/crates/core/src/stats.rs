//! Inferential statistics: OLS with standardized coefficients, one-way ANOVA
//! with partial eta squared, Welch's t-test and normal-approximation
//! confidence intervals.
//!
//! p-values come from a self-contained regularized incomplete beta function,
//! so there is no numeric dependency beyond `std`.

use serde::{Deserialize, Serialize};

use crate::geometry::{GroupStatus, PairRecord};
use crate::{Error, Matrix, Result};

pub mod dist {
    //! Special functions and the handful of distribution functions the
    //! inferential layer needs.

    use std::f64::consts::PI;

    const LANCZOS_G: f64 = 7.0;
    const LANCZOS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];

    /// Natural log of the gamma function for `x > 0`.
    pub fn ln_gamma(x: f64) -> f64 {
        if x < 0.5 {
            // reflection
            (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
        } else {
            let x = x - 1.0;
            let mut a = LANCZOS[0];
            let t = x + LANCZOS_G + 0.5;
            for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
                a += c / (x + i as f64);
            }
            0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
        }
    }

    /// Continued fraction for the incomplete beta (modified Lentz).
    fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
        const EPS: f64 = 1e-15;
        const TINY: f64 = 1e-300;
        let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
        let mut c = 1.0;
        let mut d = 1.0 - qab * x / qap;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        let mut h = d;
        for m in 1..=10_000 {
            let m = m as f64;
            let m2 = 2.0 * m;
            let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
            let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }

    /// Regularized incomplete beta `I_x(a, b)`.
    pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let ln_front =
            ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
        let front = ln_front.exp();
        if x < (a + 1.0) / (a + b + 2.0) {
            front * beta_cf(a, b, x) / a
        } else {
            1.0 - front * beta_cf(b, a, 1.0 - x) / b
        }
    }

    /// Two-sided p-value of a t statistic with `df` degrees of freedom.
    pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        if t.is_infinite() {
            return 0.0;
        }
        inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
    }

    /// Cumulative distribution of Student's t.
    pub fn t_cdf(t: f64, df: f64) -> f64 {
        let tail = 0.5 * t_two_sided_p(t, df);
        if t >= 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }

    /// Upper-tail probability `P(F > f)` for an F(d1, d2) variable.
    pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
        if f.is_infinite() {
            return 0.0;
        }
        if f <= 0.0 {
            return 1.0;
        }
        inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
    }

    /// Standard normal quantile (Wichura's AS241, ~1e-16 relative).
    pub fn normal_quantile(p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let q = p - 0.5;
        if q.abs() <= 0.425 {
            let r = 0.180625 - q * q;
            return q * poly(&A, r) / poly(&B, r);
        }
        let r = if q < 0.0 { p } else { 1.0 - p };
        let r = (-r.ln()).sqrt();
        let val = if r <= 5.0 {
            let r = r - 1.6;
            poly(&C, r) / poly(&D, r)
        } else {
            let r = r - 5.0;
            poly(&E, r) / poly(&F, r)
        };
        if q < 0.0 {
            -val
        } else {
            val
        }
    }

    fn poly(coef: &[f64; 8], x: f64) -> f64 {
        coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        133.141_667_891_784_38,
        1_971.590_950_306_551_4,
        13_731.693_765_509_461,
        45_921.953_931_549_87,
        67_265.770_927_008_7,
        33_430.575_583_588_13,
        2_509.080_928_730_122_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_91,
        687.187_007_492_057_9,
        5_394.196_021_424_751,
        21_213.794_301_586_597,
        39_307.895_800_092_71,
        28_729.085_735_721_943,
        5_226.495_278_852_545,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        0.241_780_725_177_450_6,
        0.022_723_844_989_269_184,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        0.689_767_334_985_1,
        0.148_103_976_427_480_08,
        0.015_198_666_563_616_457,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        0.296_560_571_828_504_87,
        0.026_532_189_526_576_124,
        0.001_242_660_947_388_078_4,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_888,
        0.136_929_880_922_735_8,
        0.014_875_361_290_850_615,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_7e-15,
    ];
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` or `"nan"`
/// so degenerate results survive a JSON round trip.
pub mod sentinel {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float {other:?}"))),
            },
        }
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            #[derive(serde::Serialize)]
            struct W(#[serde(with = "super")] f64);
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for &x in v {
                seq.serialize_element(&W(x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            #[derive(Deserialize)]
            struct W(#[serde(with = "super")] f64);
            Ok(Vec::<W>::deserialize(d)?.into_iter().map(|w| w.0).collect())
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    #[serde(with = "sentinel::vec")]
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Zero for the intercept column.
    pub standardized_beta: Vec<f64>,
    pub r_squared: f64,
    pub residual_ss: f64,
    pub df_residual: usize,
}

/// Least-squares fit of `y` on the columns of `x` (include an intercept
/// column of ones explicitly).
///
/// Solved by Householder QR; coefficient covariance is `s^2 (R^T R)^-1`.
/// A column is treated as the intercept when it is constant and nonzero;
/// standardized coefficients are `b_j * sd(x_j) / sd(y)`, which equals the
/// slope of a refit on z-scored data when an intercept is present.
pub fn ols(y: &[f64], x: &Matrix) -> Result<OlsFit> {
    let (n, k) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Shape(format!("{} outcomes for {n} design rows", y.len())));
    }
    if k == 0 {
        return Err(Error::Shape("design matrix has no columns".into()));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!("{n} rows for {k} coefficients")));
    }

    // column-major working copy of [X | y]
    let mut a: Vec<Vec<f64>> = (0..k).map(|j| (0..n).map(|i| x.get(i, j)).collect()).collect();
    let mut qty = y.to_vec();
    let col_scale: Vec<f64> = a
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();

    for j in 0..k {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * col_scale[j].max(f64::MIN_POSITIVE) {
            return Err(Error::Singular { column: j });
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(col.iter()).map(|(p, q)| p * q).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        };
        for col in a.iter_mut().skip(j) {
            reflect(&mut col[j..]);
        }
        reflect(&mut qty[j..]);
    }

    // R is upper-triangular in a[col][row]
    let r = |i: usize, j: usize| a[j][i];
    let mut b = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r(i, j) * b[j]).sum();
        b[i] = (qty[i] - s) / r(i, i);
    }
    // R^-1, upper-triangular
    let mut rinv = vec![vec![0.0; k]; k];
    for i in (0..k).rev() {
        rinv[i][i] = 1.0 / r(i, i);
        for j in i + 1..k {
            let s: f64 = (i + 1..=j).map(|m| r(i, m) * rinv[m][j]).sum();
            rinv[i][j] = -s / r(i, i);
        }
    }

    let residual_ss: f64 = qty[k..].iter().map(|v| v * v).sum();
    let df = n - k;
    let sigma2 = residual_ss / df as f64;
    let standard_errors: Vec<f64> = (0..k)
        .map(|i| (sigma2 * rinv[i].iter().map(|v| v * v).sum::<f64>()).sqrt())
        .collect();
    let t_values: Vec<f64> = b
        .iter()
        .zip(&standard_errors)
        .map(|(&bi, &se)| {
            if se > 0.0 {
                bi / se
            } else if bi == 0.0 {
                0.0
            } else {
                bi.signum() * f64::INFINITY
            }
        })
        .collect();
    let p_values = t_values
        .iter()
        .map(|&t| dist::t_two_sided_p(t, df as f64))
        .collect();

    let y_mean = mean(y);
    let sst: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - residual_ss / sst } else { 0.0 };
    let sd_y = (sst / (n as f64 - 1.0)).sqrt();
    let standardized_beta = (0..k)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
            let sd_x = sample_variance(&col).sqrt();
            if sd_x == 0.0 || sd_y == 0.0 {
                0.0
            } else {
                b[j] * sd_x / sd_y
            }
        })
        .collect();

    Ok(OlsFit {
        coefficients: b,
        standard_errors,
        t_values,
        p_values,
        standardized_beta,
        r_squared,
        residual_ss,
        df_residual: df,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    #[serde(with = "sentinel")]
    pub f_value: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
    pub partial_eta_sq: f64,
    pub ss_between: f64,
    pub ss_within: f64,
}

/// Classical one-way ANOVA. Zero within-group variance with a nonzero
/// between-group effect yields `F = +inf` and `p = 0`.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData("ANOVA needs at least 2 groups".into()));
    }
    if groups.iter().any(|g| g.as_ref().is_empty()) {
        return Err(Error::InsufficientData("every ANOVA group needs a value".into()));
    }
    let total: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let df_between = groups.len() - 1;
    let df_within = total - groups.len();
    if df_within == 0 {
        return Err(Error::InsufficientData(
            "ANOVA needs a group with at least 2 values".into(),
        ));
    }
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let (f_value, p_value) = if ss_within > 0.0 {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        (f, dist::f_sf(f, df_between as f64, df_within as f64))
    } else if ss_between > 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (0.0, 1.0)
    };
    let denom = ss_between + ss_within;
    let partial_eta_sq = if denom > 0.0 { ss_between / denom } else { 0.0 };
    Ok(AnovaResult {
        f_value,
        df_between,
        df_within,
        p_value,
        partial_eta_sq,
        ss_between,
        ss_within,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's unequal-variance t-test of `mean(a) - mean(b)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Domain("Welch's t needs at least 2 values per sample".into()));
    }
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if va == 0.0 && vb == 0.0 {
        return Err(Error::Domain("both samples have zero variance".into()));
    }
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let t = (mean(a) - mean(b)) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2)
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    Ok(WelchResult {
        t,
        df,
        p: dist::t_two_sided_p(t, df),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

/// `mean +- z * sd / sqrt(n)` with `z` the `(1 + level) / 2` normal quantile.
pub fn mean_ci(values: &[f64], level: f64) -> Result<MeanCi> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition(format!("confidence level {level} outside (0, 1)")));
    }
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "confidence interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    let m = mean(values);
    let half = dist::normal_quantile((1.0 + level) / 2.0) * sample_variance(values).sqrt()
        / (values.len() as f64).sqrt();
    Ok(MeanCi {
        mean: m,
        lo: m - half,
        hi: m + half,
        level,
    })
}

pub const INTERACTION_TERMS: [&str; 4] = ["intercept", "within", "contrast_word", "within_x_contrast_word"];

/// Pair-level model of group status by word type: similarity regressed on
/// an intercept, `within` (1 for same-label pairs), `contrast_word` (1 for
/// pairs from the second word) and their product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionFit {
    pub reference_word: String,
    pub contrast_word: String,
    pub terms: Vec<String>,
    pub fit: OlsFit,
}

impl InteractionFit {
    /// Contrast-word gap minus reference-word gap, with gap = within - between.
    pub fn interaction(&self) -> f64 {
        self.fit.coefficients[3]
    }
}

pub fn interaction_model(reference: &[PairRecord], contrast: &[PairRecord]) -> Result<InteractionFit> {
    let word_of = |records: &[PairRecord], role: &str| -> Result<String> {
        let first = records
            .first()
            .ok_or_else(|| Error::InsufficientData(format!("no pair records for the {role} word")))?;
        if records.iter().any(|r| r.word != first.word) {
            return Err(Error::Validation(format!("{role} pair records mix several words")));
        }
        Ok(first.word.clone())
    };
    let reference_word = word_of(reference, "reference")?;
    let contrast_word = word_of(contrast, "contrast")?;
    if reference_word == contrast_word {
        return Err(Error::Validation(format!("both record sets are for {reference_word:?}")));
    }
    let n = reference.len() + contrast.len();
    let mut x = Matrix::zeros(n, 4);
    let mut y = Vec::with_capacity(n);
    for (row, (r, code)) in reference
        .iter()
        .map(|r| (r, 0.0))
        .chain(contrast.iter().map(|r| (r, 1.0)))
        .enumerate()
    {
        let within = if r.group_status == GroupStatus::Within { 1.0 } else { 0.0 };
        x.row_mut(row).copy_from_slice(&[1.0, within, code, within * code]);
        y.push(r.similarity);
    }
    Ok(InteractionFit {
        reference_word,
        contrast_word,
        terms: INTERACTION_TERMS.iter().map(|t| t.to_string()).collect(),
        fit: ols(&y, &x)?,
    })
}
