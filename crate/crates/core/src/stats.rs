//! Pearson correlation with significance, OLS multiple regression with full
//! inferential output, VIF, and report rendering.
//!
//! The production OLS path goes through a QR decomposition; tail
//! probabilities of the t and F distributions come from the regularized
//! incomplete beta function.

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::beta_reg;

use crate::tsv::{fmt_f64, TsvWriter};
use crate::{Error, Result};

/// Two-sided p-value for a t statistic with `df` degrees of freedom.
pub fn t_p_value(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Upper-tail p-value for an F statistic with (df1, df2) degrees of freedom.
pub fn f_p_value(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if !f.is_finite() {
        return 0.0;
    }
    let x = df2 / (df2 + df1 * f);
    beta_reg(df2 / 2.0, df1 / 2.0, x).clamp(0.0, 1.0)
}

/// Two-sided critical value of the t distribution, e.g. `level` 0.95
/// gives the 97.5% quantile. Solved by bisection on [`t_p_value`].
pub fn t_critical(df: f64, level: f64) -> f64 {
    let alpha = 1.0 - level;
    let (mut lo, mut hi) = (0.0, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_p_value(mid, df) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Product-moment correlation with a two-sided p-value from
/// t = r * sqrt((n-2) / (1-r^2)).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    assert_eq!(x.len(), y.len(), "pearson inputs must have equal length");
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewRows {
            n,
            needed: 2,
            predictors: 1,
        });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x".into()));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if 1.0 - r * r <= f64::EPSILON {
        0.0
    } else {
        t_p_value(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok((r, p))
}

/// A complete-case design: named predictor columns plus one response.
/// Rows with missing cells must be dropped before construction.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub predictor_names: Vec<String>,
    pub predictors: Vec<Vec<f64>>,
    pub response_name: String,
    pub response: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(
        predictor_names: Vec<String>,
        predictors: Vec<Vec<f64>>,
        response_name: impl Into<String>,
        response: Vec<f64>,
    ) -> Result<DesignMatrix> {
        assert_eq!(predictor_names.len(), predictors.len());
        let n = response.len();
        for col in &predictors {
            assert_eq!(col.len(), n, "ragged design matrix");
        }
        let p = predictors.len();
        if n <= p + 1 {
            return Err(Error::TooFewRows {
                n,
                needed: p + 1,
                predictors: p,
            });
        }
        Ok(DesignMatrix {
            predictor_names,
            predictors,
            response_name: response_name.into(),
            response,
        })
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    fn with_intercept(&self) -> DMatrix<f64> {
        let n = self.n();
        let p = self.predictors.len();
        let mut x = DMatrix::zeros(n, p + 1);
        for i in 0..n {
            x[(i, 0)] = 1.0;
        }
        for (j, col) in self.predictors.iter().enumerate() {
            for i in 0..n {
                x[(i, j + 1)] = col[i];
            }
        }
        x
    }
}

#[derive(Debug, Clone)]
pub struct Coefficient {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct RegressionResult {
    pub response: String,
    /// Intercept first, then one entry per predictor.
    pub coefficients: Vec<Coefficient>,
    pub f_stat: f64,
    pub df_model: usize,
    pub df_resid: usize,
    pub p_model: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares through a QR decomposition, with standard
/// errors from the diagonal of sigma^2 (X'X)^-1 = sigma^2 R^-1 R^-T.
pub fn ols_fit(design: &DesignMatrix) -> Result<RegressionResult> {
    let n = design.n();
    let p = design.predictors.len();
    let x = design.with_intercept();
    let y = DVector::from_column_slice(&design.response);

    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..=p).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    let deficient = (0..=p).any(|i| r[(i, i)].abs() <= max_diag * 1e-10);
    if deficient || max_diag == 0.0 {
        return Err(Error::RankDeficient(dependent_columns(design)));
    }

    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient(dependent_columns(design)))?;

    let fitted = &x * &beta;
    let resid = &y - &fitted;
    let ss_resid: f64 = resid.iter().map(|e| e * e).sum();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let ss_total: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let ss_model = ss_total - ss_resid;

    let df_model = p;
    let df_resid = n - p - 1;
    let sigma2 = ss_resid / df_resid as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p + 1, p + 1))
        .ok_or_else(|| Error::RankDeficient(dependent_columns(design)))?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let mut coefficients = Vec::with_capacity(p + 1);
    for j in 0..=p {
        let name = if j == 0 {
            "(Constant)".to_string()
        } else {
            design.predictor_names[j - 1].clone()
        };
        let se = (sigma2 * xtx_inv[(j, j)]).sqrt();
        let t = beta[j] / se;
        coefficients.push(Coefficient {
            name,
            beta: beta[j],
            se,
            t,
            p: t_p_value(t, df_resid as f64),
        });
    }

    let r_squared = if ss_total > 0.0 {
        1.0 - ss_resid / ss_total
    } else {
        0.0
    };
    let f_stat = if ss_resid > 0.0 && df_model > 0 {
        (ss_model / df_model as f64) / sigma2
    } else {
        f64::INFINITY
    };
    let p_model = f_p_value(f_stat, df_model as f64, df_resid as f64);

    Ok(RegressionResult {
        response: design.response_name.clone(),
        coefficients,
        f_stat,
        df_model,
        df_resid,
        p_model,
        r_squared,
        n,
    })
}

/// Name the predictor columns involved in an exact linear dependency:
/// each column that is (numerically) perfectly explained by the others,
/// the intercept included as a regressor.
fn dependent_columns(design: &DesignMatrix) -> Vec<String> {
    let n = design.n();
    let p = design.predictors.len();
    let mut names = Vec::new();
    for j in 0..p {
        let mut x = DMatrix::zeros(n, p);
        for i in 0..n {
            x[(i, 0)] = 1.0;
        }
        let mut c = 1;
        for (k, col) in design.predictors.iter().enumerate() {
            if k == j {
                continue;
            }
            for i in 0..n {
                x[(i, c)] = col[i];
            }
            c += 1;
        }
        let y = DVector::from_column_slice(&design.predictors[j]);
        let sol = x.clone().svd(true, true).solve(&y, 1e-12);
        if let Ok(b) = sol {
            let resid = &y - &x * b;
            let scale = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            if resid.norm() <= 1e-8 * scale {
                names.push(design.predictor_names[j].clone());
            }
        }
    }
    if names.is_empty() {
        names = design.predictor_names.clone();
    }
    names
}

/// Symmetric correlation matrix with two-sided p-values, computed over
/// pairwise-complete rows. Cells that cannot be computed (zero variance
/// or too few complete pairs) are `None`.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub r: Vec<Vec<Option<f64>>>,
    pub p: Vec<Vec<Option<f64>>>,
    pub warnings: Vec<String>,
}

pub fn correlation_table(columns: &[(String, Vec<Option<f64>>)]) -> CorrelationMatrix {
    let k = columns.len();
    assert!(k >= 2, "need at least two columns");
    let names: Vec<String> = columns.iter().map(|(n, _)| n.clone()).collect();
    let mut r = vec![vec![None; k]; k];
    let mut p = vec![vec![None; k]; k];
    let mut warnings = Vec::new();
    for i in 0..k {
        r[i][i] = Some(1.0);
        for j in i + 1..k {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (a, b) in columns[i].1.iter().zip(&columns[j].1) {
                if let (Some(a), Some(b)) = (a, b) {
                    if a.is_finite() && b.is_finite() {
                        xs.push(*a);
                        ys.push(*b);
                    }
                }
            }
            match pearson(&xs, &ys) {
                Ok((rv, pv)) => {
                    r[i][j] = Some(rv);
                    r[j][i] = Some(rv);
                    p[i][j] = Some(pv);
                    p[j][i] = Some(pv);
                }
                Err(e) => warnings.push(format!("{} / {}: {}", names[i], names[j], e)),
            }
        }
    }
    CorrelationMatrix {
        names,
        r,
        p,
        warnings,
    }
}

/// VIF_j = 1 / (1 - R_j^2) from regressing predictor j on the others.
/// Perfect collinearity yields the infinite sentinel.
pub fn vif(columns: &[(String, Vec<f64>)]) -> Result<Vec<f64>> {
    assert!(columns.len() >= 2, "need at least two predictors");
    let mut out = Vec::with_capacity(columns.len());
    for j in 0..columns.len() {
        let names: Vec<String> = columns
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, (n, _))| n.clone())
            .collect();
        let preds: Vec<Vec<f64>> = columns
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, (_, c))| c.clone())
            .collect();
        let design = DesignMatrix::new(names, preds, columns[j].0.clone(), columns[j].1.clone())?;
        match ols_fit(&design) {
            Ok(fit) => {
                let r2 = fit.r_squared;
                out.push(if 1.0 - r2 <= 1e-12 {
                    f64::INFINITY
                } else {
                    1.0 / (1.0 - r2)
                });
            }
            Err(Error::RankDeficient(_)) => out.push(f64::INFINITY),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `<.0001` below 1e-4, otherwise four decimals.
pub fn format_p(p: f64) -> String {
    if p < 1e-4 {
        "<.0001".to_string()
    } else {
        format!("{:.4}", p)
    }
}

/// Aligned plain-text table: one row per coefficient plus the model line
/// "F(df_model,df_resid) = ..., p = ..., R^2 = ...".
pub fn regression_report(result: &RegressionResult) -> String {
    let mut rows: Vec<[String; 5]> = vec![[
        String::new(),
        "β".into(),
        "SE β".into(),
        "t".into(),
        "p".into(),
    ]];
    for c in &result.coefficients {
        rows.push([
            c.name.clone(),
            format!("{:.6}", c.beta),
            format!("{:.6}", c.se),
            format!("{:.2}", c.t),
            format_p(c.p),
        ]);
    }
    let mut widths = [0usize; 5];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = format!("Multiple regression for {}\n", result.response);
    for row in &rows {
        let mut line = format!("{:<w$}", row[0], w = widths[0]);
        for (cell, w) in row.iter().zip(widths.iter()).skip(1) {
            let pad = w - cell.chars().count();
            line.push_str("  ");
            for _ in 0..pad {
                line.push(' ');
            }
            line.push_str(cell);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push_str(&format!(
        "F({},{}) = {:.3}, p = {}, R² = {:.4}\n",
        result.df_model,
        result.df_resid,
        result.f_stat,
        format_p(result.p_model),
        result.r_squared
    ));
    out
}

/// Machine-readable duplicate of [`regression_report`].
pub fn regression_tsv(result: &RegressionResult, comment: Option<&str>) -> String {
    let mut w = TsvWriter::new(comment, &["term", "beta", "se", "t", "p"]);
    for c in &result.coefficients {
        w.row(&[
            c.name.clone(),
            fmt_f64(c.beta),
            fmt_f64(c.se),
            fmt_f64(c.t),
            fmt_f64(c.p),
        ]);
    }
    w.row(&[
        "(Model)".into(),
        format!("F({},{})", result.df_model, result.df_resid),
        fmt_f64(result.f_stat),
        fmt_f64(result.r_squared),
        fmt_f64(result.p_model),
    ]);
    w.finish()
}

/// Correlation matrix in the r-above / p-below layout: coefficients above
/// the diagonal, significance below, blank diagonal.
pub fn correlation_report(m: &CorrelationMatrix) -> String {
    let k = m.names.len();
    let mut header = vec![String::new()];
    for i in 0..k {
        header.push(format!("{}.", i + 1));
    }
    let mut out = header.join("\t");
    out.push('\n');
    for i in 0..k {
        let mut row = vec![format!("{}. {}", i + 1, m.names[i])];
        for j in 0..k {
            if i == j {
                row.push(String::new());
            } else if j > i {
                row.push(match m.r[i][j] {
                    Some(r) => format!("{:.2}", r),
                    None => "NA".into(),
                });
            } else {
                row.push(match m.p[i][j] {
                    Some(p) => format_p(p),
                    None => "NA".into(),
                });
            }
        }
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: normal equations by Gauss-Jordan elimination,
    /// textbook formulas for SE/t/p/F/R^2.
    pub fn ols_oracle(design: &DesignMatrix) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let n = design.n();
        let p = design.predictors.len();
        let m = p + 1;
        let mut x = vec![vec![0.0f64; m]; n];
        for i in 0..n {
            x[i][0] = 1.0;
            for j in 0..p {
                x[i][j + 1] = design.predictors[j][i];
            }
        }
        let y = &design.response;
        // X'X and X'y
        let mut xtx = vec![vec![0.0f64; m]; m];
        let mut xty = vec![0.0f64; m];
        for a in 0..m {
            for b in 0..m {
                xtx[a][b] = (0..n).map(|i| x[i][a] * x[i][b]).sum();
            }
            xty[a] = (0..n).map(|i| x[i][a] * y[i]).sum();
        }
        let inv = invert(&xtx);
        let beta: Vec<f64> = (0..m).map(|a| (0..m).map(|b| inv[a][b] * xty[b]).sum()).collect();
        let mut ss_resid = 0.0;
        for i in 0..n {
            let fit: f64 = (0..m).map(|a| x[i][a] * beta[a]).sum();
            ss_resid += (y[i] - fit) * (y[i] - fit);
        }
        let mean_y = y.iter().sum::<f64>() / n as f64;
        let ss_total: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
        let sigma2 = ss_resid / (n - m) as f64;
        let se: Vec<f64> = (0..m).map(|a| (sigma2 * inv[a][a]).sqrt()).collect();
        let r2 = 1.0 - ss_resid / ss_total;
        let f = ((ss_total - ss_resid) / p as f64) / sigma2;
        (beta, se, r2, f)
    }

    fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = a.len();
        let mut aug: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for col in 0..m {
            let pivot = (col..m)
                .max_by(|&a, &b| aug[a][col].abs().partial_cmp(&aug[b][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, pivot);
            let pv = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= pv;
            }
            for row in 0..m {
                if row != col {
                    let factor = aug[row][col];
                    for k in 0..2 * m {
                        let v = aug[col][k];
                        aug[row][k] -= factor * v;
                    }
                }
            }
        }
        aug.into_iter().map(|r| r[m..].to_vec()).collect()
    }

    pub fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DesignMatrix {
        let predictors: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .collect();
        let response: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = 1.5 + rng.gen_range(-1.0..1.0);
                for (j, col) in predictors.iter().enumerate() {
                    v += (j as f64 - 1.0) * col[i];
                }
                v
            })
            .collect();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        DesignMatrix::new(names, predictors, "y", response).unwrap()
    }

    #[test]
    fn pearson_perfect_correlation() {
        let x = vec![1.0, 2.0, 3.0, 5.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap().0 - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap().0 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_example() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![2.0, 1.0, 4.0, 3.0];
        let (r, p) = pearson(&x, &y).unwrap();
        assert!((r - 0.6).abs() < 1e-12);
        // oracle: t = 0.6*sqrt(2/0.64) = 1.06066, two-sided p with 2 df
        let t: f64 = 0.6 * (2.0f64 / 0.64).sqrt();
        let p_oracle = t_p_value(t, 2.0);
        assert!((p - p_oracle).abs() < 1e-12);
        assert!((p - 0.4).abs() < 0.01, "p = {p}");
    }

    #[test]
    fn pearson_rejects_constant_column() {
        let x = vec![1.0, 1.0, 1.0];
        let y = vec![1.0, 2.0, 3.0];
        assert!(matches!(pearson(&x, &y), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn pearson_permutation_false_positive_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 30;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut hits = 0;
        let shuffles = 1000;
        for _ in 0..shuffles {
            for i in (1..n).rev() {
                y.swap(i, rng.gen_range(0..=i));
            }
            if pearson(&x, &y).unwrap().1 < 0.05 {
                hits += 1;
            }
        }
        let frac = hits as f64 / shuffles as f64;
        assert!((0.03..=0.07).contains(&frac), "false positive rate {frac}");
    }

    #[test]
    fn ols_noiseless_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let d = DesignMatrix::new(vec!["x".into()], vec![x], "y", y).unwrap();
        let fit = ols_fit(&d).unwrap();
        assert!((fit.coefficients[0].beta - 3.0).abs() < 1e-10);
        assert!((fit.coefficients[1].beta - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ols_intercept_only() {
        let y = vec![1.0, 2.0, 3.0, 6.0];
        let d = DesignMatrix::new(vec![], vec![], "y", y.clone()).unwrap();
        let fit = ols_fit(&d).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((fit.coefficients[0].beta - mean).abs() < 1e-12);
    }

    #[test]
    fn ols_matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.gen_range(20..=100);
            let p = rng.gen_range(1..=6);
            let d = random_design(&mut rng, n, p);
            let fit = ols_fit(&d).unwrap();
            let (beta, se, r2, f) = ols_oracle(&d);
            for j in 0..=p {
                let c = &fit.coefficients[j];
                assert!(rel_err(c.beta, beta[j]) < 1e-8, "beta {} vs {}", c.beta, beta[j]);
                assert!(rel_err(c.se, se[j]) < 1e-8);
                assert!(rel_err(c.t, beta[j] / se[j]) < 1e-8);
                let p_oracle = t_p_value(beta[j] / se[j], fit.df_resid as f64);
                assert!((c.p - p_oracle).abs() < 1e-10);
            }
            assert!(rel_err(fit.r_squared, r2) < 1e-8);
            assert!(rel_err(fit.f_stat, f) < 1e-8);
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-12)
    }

    #[test]
    fn ols_residual_orthogonality_and_zero_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_design(&mut rng, 60, 4);
        let fit = ols_fit(&d).unwrap();
        let resid: Vec<f64> = (0..d.n())
            .map(|i| {
                let mut v = d.response[i] - fit.coefficients[0].beta;
                for (j, col) in d.predictors.iter().enumerate() {
                    v -= fit.coefficients[j + 1].beta * col[i];
                }
                v
            })
            .collect();
        let tol = 1e-8 * d.n() as f64;
        assert!(resid.iter().sum::<f64>().abs() < tol);
        for col in &d.predictors {
            let dot: f64 = resid.iter().zip(col).map(|(r, x)| r * x).sum();
            assert!(dot.abs() < tol, "residual not orthogonal: {dot}");
        }
        // R^2 equals squared correlation of fitted values with the response
        let fitted: Vec<f64> = (0..d.n()).map(|i| d.response[i] - resid[i]).collect();
        let (r, _) = pearson(&fitted, &d.response).unwrap();
        assert!((fit.r_squared - r * r).abs() < 1e-10);
    }

    #[test]
    fn ols_scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = random_design(&mut rng, 50, 3);
        let fit = ols_fit(&d).unwrap();
        let c = 37.5;
        let mut scaled = d.clone();
        for v in scaled.predictors[1].iter_mut() {
            *v *= c;
        }
        let fit2 = ols_fit(&scaled).unwrap();
        assert!(rel_err(fit2.coefficients[2].beta, fit.coefficients[2].beta / c) < 1e-8);
        assert!(rel_err(fit2.coefficients[2].se, fit.coefficients[2].se / c) < 1e-8);
        assert!(rel_err(fit2.coefficients[2].t, fit.coefficients[2].t) < 1e-8);
        assert!(rel_err(fit2.f_stat, fit.f_stat) < 1e-8);
        assert!(rel_err(fit2.r_squared, fit.r_squared) < 1e-8);
    }

    #[test]
    fn ols_rank_deficient_names_columns() {
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v - 1.0).collect();
        let x3 = vec![0.3, -1.0, 2.0, 0.7, 1.1, -0.4];
        let y = vec![1.0, 0.0, 2.0, 1.0, 3.0, 2.0];
        let d = DesignMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![x1, x2, x3],
            "y",
            y,
        )
        .unwrap();
        match ols_fit(&d) {
            Err(Error::RankDeficient(cols)) => {
                assert!(cols.contains(&"a".to_string()) && cols.contains(&"b".to_string()));
                assert!(!cols.contains(&"c".to_string()));
            }
            other => panic!("expected rank-deficiency error, got {other:?}"),
        }
    }

    #[test]
    fn correlation_table_matches_pairwise_pearson() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cols: Vec<(String, Vec<Option<f64>>)> = (0..3)
            .map(|j| {
                (
                    format!("v{j}"),
                    (0..40).map(|_| Some(rng.gen_range(-1.0..1.0))).collect(),
                )
            })
            .collect();
        let m = correlation_table(&cols);
        for i in 0..3 {
            assert_eq!(m.r[i][i], Some(1.0));
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let x: Vec<f64> = cols[i].1.iter().map(|v| v.unwrap()).collect();
                let y: Vec<f64> = cols[j].1.iter().map(|v| v.unwrap()).collect();
                let (r, p) = pearson(&x, &y).unwrap();
                assert_eq!(m.r[i][j], Some(r));
                assert_eq!(m.p[i][j], Some(p));
                assert_eq!(m.r[i][j], m.r[j][i]);
            }
        }
    }

    #[test]
    fn correlation_table_identical_columns() {
        let col: Vec<Option<f64>> = vec![Some(1.0), Some(2.0), Some(5.0), Some(3.0)];
        let m = correlation_table(&[("a".into(), col.clone()), ("b".into(), col)]);
        assert!((m.r[0][1].unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_report_layout() {
        let a: Vec<Option<f64>> = vec![1.0, 2.0, 3.0, 5.0].into_iter().map(Some).collect();
        let b: Vec<Option<f64>> = vec![2.0, 1.0, 5.0, 4.0].into_iter().map(Some).collect();
        let m = correlation_table(&[("A".into(), a), ("B".into(), b)]);
        let text = correlation_report(&m);
        let lines: Vec<&str> = text.lines().collect();
        // row A: blank diagonal, r above; row B: p below, blank diagonal
        let row_a: Vec<&str> = lines[1].split('\t').collect();
        let row_b: Vec<&str> = lines[2].split('\t').collect();
        assert_eq!(row_a[1], "");
        assert_eq!(row_a[2], format!("{:.2}", m.r[0][1].unwrap()));
        assert_eq!(row_b[1], format_p(m.p[1][0].unwrap()));
        assert_eq!(row_b[2], "");
    }

    #[test]
    fn vif_anchor_at_r_03() {
        // construct two columns with sample correlation exactly 0.3
        let x1 = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let r = 0.3f64;
        let x2: Vec<f64> = x1
            .iter()
            .enumerate()
            .map(|(i, v)| r * v + (1.0 - r * r).sqrt() * if i % 2 == i / 4 { 1.0 } else { -1.0 })
            .collect();
        let (rr, _) = pearson(&x1, &x2).unwrap();
        assert!((rr - 0.3).abs() < 1e-10, "construction broke: r = {rr}");
        let v = vif(&[("a".into(), x1.clone()), ("b".into(), x2.clone())]).unwrap();
        assert!((v[0] - 1.0 / (1.0 - 0.09)).abs() < 1e-10);
        assert!((v[0] - 1.0989).abs() < 1e-3);
        // two-predictor VIF equals 1/(1-r^2) of their pearson r
        assert!((v[1] - 1.0 / (1.0 - rr * rr)).abs() < 1e-10);
    }

    #[test]
    fn vif_orthogonal_and_collinear() {
        let x1 = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let x2 = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
        assert!(pearson(&x1, &x2).unwrap().0.abs() < 1e-12);
        let v = vif(&[("a".into(), x1.clone()), ("b".into(), x2.clone())]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-10);
        assert!((v[1] - 1.0).abs() < 1e-10);
        let dup = vif(&[("a".into(), x1.clone()), ("b".into(), x1)]).unwrap();
        assert!(dup[0].is_infinite() && dup[1].is_infinite());
    }

    #[test]
    fn vif_planted_r_squared() {
        // x3 = (x1 + x2)/sqrt(2) + noise scaled for R_3^2 = 0.5
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4000;
        let x1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let signal: Vec<f64> = (0..n).map(|i| x1[i] + x2[i]).collect();
        let var_s = variance(&signal);
        let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scale = (var_s / variance(&noise)).sqrt();
        let x3: Vec<f64> = (0..n).map(|i| signal[i] + scale * noise[i]).collect();
        let v = vif(&[
            ("a".into(), x1),
            ("b".into(), x2),
            ("c".into(), x3),
        ])
        .unwrap();
        assert!((v[2] - 2.0).abs() < 0.15, "VIF_3 = {}", v[2]);
    }

    fn variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn report_formatting_matches_layout() {
        // synthetic result with the reference degrees of freedom
        let result = RegressionResult {
            response: "ffd".into(),
            coefficients: vec![Coefficient {
                name: "(Constant)".into(),
                beta: 268.793017,
                se: 16.4469826,
                t: 16.34,
                p: 3e-5,
            }],
            f_stat: 4.629,
            df_model: 5,
            df_resid: 1285,
            p_model: 0.0003,
            r_squared: 0.0177,
            n: 1291,
        };
        let text = regression_report(&result);
        assert!(text.contains("F(5,1285) = 4.629, p = 0.0003"), "{text}");
        assert!(text.contains("<.0001"));
        assert_eq!(format_p(0.00003), "<.0001");
        assert_eq!(format_p(0.0221), "0.0221");
        assert_eq!(format_p(0.0003), "0.0003");
    }

    #[test]
    fn t_and_f_tails_sanity() {
        // reference values from the standard normal limit and symmetry
        assert!((t_p_value(0.0, 10.0) - 1.0).abs() < 1e-12);
        assert!((t_p_value(1.96, 1e7) - 0.05).abs() < 1e-4);
        assert!((f_p_value(1.0, 1.0, 1e7) - t_p_value(1.0, 1e7)).abs() < 1e-6);
        let crit = t_critical(1e7, 0.95);
        assert!((crit - 1.959964).abs() < 1e-4, "crit = {crit}");
    }
}
