//! Built-in unnormalised targets and user-supplied grid targets.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::ln_gamma;

const LN_2PI: f64 = 1.837_877_066_409_345_4;

type LogDensity = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// An unnormalised target density, known only through `log p`.
///
/// `log p` may return −∞ (density zero) outside the target's support.
/// Every counted evaluation increments a shared counter so tests and the
/// experiment driver can audit their density-evaluation budget.
#[derive(Clone)]
pub struct Target {
    log_p: Arc<LogDensity>,
    dim: usize,
    /// Known normaliser ∫ p dν, when available.
    pub normalizer: Option<f64>,
    /// Mean of the normalised target, when defined.
    pub true_mean: Option<Vec<f64>>,
    /// Set when `true_mean` is a principal-value/symmetry convention
    /// rather than an absolutely convergent integral.
    pub mean_is_principal_value: bool,
    pub label: String,
    evals: Arc<AtomicU64>,
}

impl std::fmt::Debug for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Target")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("normalizer", &self.normalizer)
            .field("true_mean", &self.true_mean)
            .finish()
    }
}

impl Target {
    pub fn from_fn(
        dim: usize,
        label: impl Into<String>,
        log_p: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Target {
            log_p: Arc::new(log_p),
            dim,
            normalizer: None,
            true_mean: None,
            mean_is_principal_value: false,
            label: label.into(),
            evals: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// log p(y), counted against the evaluation budget.
    pub fn log_density(&self, y: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.log_p)(y)
    }

    /// Total counted evaluations since construction (shared across clones).
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// c × [0.5 N(−2u, I) + 0.5 N(2u, I)]
    Ewgmm,
    /// c × [0.35 N(−2u, I) + 0.25 N(2u, I) + 0.4 N(u, I)]
    ImbalancedGmm,
    /// c × [0.5 t(−2u, I, 2) + 0.5 t(2u, I, 2)]
    Ewsmm,
}

impl TargetKind {
    pub fn parse(s: &str) -> Result<TargetKind> {
        match s {
            "ewgmm" => Ok(TargetKind::Ewgmm),
            "imbalanced_gmm" | "imbalanced-gmm" => Ok(TargetKind::ImbalancedGmm),
            "ewsmm" => Ok(TargetKind::Ewsmm),
            other => Err(Error::Config(format!("unknown target kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetKind::Ewgmm => "ewgmm",
            TargetKind::ImbalancedGmm => "imbalanced_gmm",
            TargetKind::Ewsmm => "ewsmm",
        }
    }
}

fn log_iso_normal(y: &[f64], m: &[f64]) -> f64 {
    let d = y.len() as f64;
    let q: f64 = y.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * d * LN_2PI - 0.5 * q
}

/// log t(y; m, I, a), the multivariate Student density with identity scale.
fn log_iso_student(y: &[f64], m: &[f64], a: f64) -> f64 {
    let d = y.len() as f64;
    let q: f64 = y.iter().zip(m).map(|(u, v)| (u - v) * (u - v)).sum();
    ln_gamma(0.5 * (a + d))
        - ln_gamma(0.5 * a)
        - 0.5 * d * (a * std::f64::consts::PI).ln()
        - 0.5 * (a + d) * (1.0 + q / a).ln()
}

fn log_sum_weighted(terms: &[(f64, f64)]) -> f64 {
    // terms: (log weight, log density)
    let mx = terms
        .iter()
        .map(|(lw, ld)| lw + ld)
        .fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    mx + terms
        .iter()
        .map(|(lw, ld)| (lw + ld - mx).exp())
        .sum::<f64>()
        .ln()
}

/// The stock multimodal targets used across the experiment suites.
pub fn builtin_target(kind: TargetKind, d: usize, c: f64) -> Result<Target> {
    if d == 0 {
        return Err(Error::Config("target dimension must be >= 1".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Config("target scale c must be positive".into()));
    }
    let ln_c = c.ln();
    let u = |s: f64| vec![s; d];
    let mut t = match kind {
        TargetKind::Ewgmm => {
            let (m1, m2) = (u(-2.0), u(2.0));
            let lw = 0.5f64.ln();
            let mut t = Target::from_fn(d, format!("ewgmm(d={d},c={c})"), move |y| {
                ln_c + log_sum_weighted(&[(lw, log_iso_normal(y, &m1)), (lw, log_iso_normal(y, &m2))])
            });
            t.true_mean = Some(vec![0.0; d]);
            t
        }
        TargetKind::ImbalancedGmm => {
            let (m1, m2, m3) = (u(-2.0), u(2.0), u(1.0));
            let (w1, w2, w3) = (0.35f64.ln(), 0.25f64.ln(), 0.4f64.ln());
            let mut t = Target::from_fn(d, format!("imbalanced_gmm(d={d},c={c})"), move |y| {
                ln_c + log_sum_weighted(&[
                    (w1, log_iso_normal(y, &m1)),
                    (w2, log_iso_normal(y, &m2)),
                    (w3, log_iso_normal(y, &m3)),
                ])
            });
            // 0.35(−2) + 0.25(2) + 0.4(1) = 0.2 per coordinate.
            t.true_mean = Some(vec![0.2; d]);
            t
        }
        TargetKind::Ewsmm => {
            let (m1, m2) = (u(-2.0), u(2.0));
            let lw = 0.5f64.ln();
            let a = 2.0;
            let mut t = Target::from_fn(d, format!("ewsmm(d={d},c={c})"), move |y| {
                ln_c + log_sum_weighted(&[
                    (lw, log_iso_student(y, &m1, a)),
                    (lw, log_iso_student(y, &m2, a)),
                ])
            });
            // Component means do not exist at a = 2; the mixture mean is 0
            // by symmetry in the principal-value sense only.
            t.true_mean = Some(vec![0.0; d]);
            t.mean_is_principal_value = true;
            t
        }
    };
    t.normalizer = Some(c);
    Ok(t)
}

/// Tabulated target on a rectangular tensor grid, multilinear interpolation
/// inside the box and −∞ outside.
#[derive(Debug)]
struct GridTarget {
    axes: Vec<Vec<f64>>,
    /// values[i1 * s1 + i2 * s2 + ...] with row-major strides.
    values: Vec<f64>,
    strides: Vec<usize>,
}

impl GridTarget {
    fn log_p(&self, y: &[f64]) -> f64 {
        let d = self.axes.len();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0f64; d];
        for k in 0..d {
            let ax = &self.axes[k];
            if y[k] < ax[0] || y[k] > *ax.last().unwrap() {
                return f64::NEG_INFINITY;
            }
            if ax.len() == 1 {
                base[k] = 0;
                frac[k] = 0.0;
                continue;
            }
            // Last interval handles y == max.
            let j = match ax.binary_search_by(|v| v.partial_cmp(&y[k]).unwrap()) {
                Ok(i) => i.min(ax.len() - 2),
                Err(i) => i - 1,
            };
            base[k] = j;
            frac[k] = (y[k] - ax[j]) / (ax[j + 1] - ax[j]);
        }
        // Multilinear blend over the 2^d cell corners.
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut off = 0usize;
            for k in 0..d {
                let hi = (corner >> k) & 1 == 1;
                let fk = frac[k];
                if hi {
                    if self.axes[k].len() == 1 {
                        w = 0.0;
                        break;
                    }
                    w *= fk;
                    off += (base[k] + 1) * self.strides[k];
                } else {
                    w *= 1.0 - fk;
                    off += base[k] * self.strides[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[off];
            }
        }
        acc
    }
}

/// Loads a grid target file: UTF-8 CSV with header `x1,...,xd,logp`,
/// rows sorted lexicographically by coordinates, rectangular tensor grid.
pub fn load_grid_target(path: impl AsRef<Path>) -> Result<Target> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    parse_grid_target(&text, &path.as_ref().display().to_string())
}

pub fn parse_grid_target(text: &str, label: &str) -> Result<Target> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols.last() != Some(&"logp") {
        return Err(Error::Parse(
            "grid header must be x1,...,xd,logp".into(),
        ));
    }
    let d = cols.len() - 1;
    for (k, c) in cols[..d].iter().enumerate() {
        if *c != format!("x{}", k + 1) {
            return Err(Error::Parse(format!(
                "grid header column {} must be x{}, got '{c}'",
                k + 1,
                k + 1
            )));
        }
    }
    let mut points: Vec<(Vec<f64>, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, got {}",
                lineno + 2,
                d + 1,
                fields.len()
            )));
        }
        let mut coords = Vec::with_capacity(d);
        for f in &fields[..d] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number '{f}'", lineno + 2)))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("row {}: non-finite coordinate", lineno + 2)));
            }
            coords.push(v);
        }
        let v: f64 = fields[d]
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad logp '{}'", lineno + 2, fields[d])))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("row {}: non-finite logp", lineno + 2)));
        }
        points.push((coords, v));
    }
    if points.is_empty() {
        return Err(Error::Parse("grid file has no data rows".into()));
    }

    // Recover per-axis sorted unique coordinates.
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); d];
    for (coords, _) in &points {
        for k in 0..d {
            let ax = &mut axes[k];
            if !ax.iter().any(|&v| v == coords[k]) {
                ax.push(coords[k]);
            }
        }
    }
    for ax in &mut axes {
        let mut sorted = ax.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted != *ax && {
            let mut rev = ax.clone();
            rev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rev != sorted
        } {
            return Err(Error::Parse("non-monotone grid axis".into()));
        }
        *ax = sorted;
    }
    let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    if total != points.len() {
        return Err(Error::Parse(format!(
            "grid is not a rectangular tensor product: {} rows vs {} expected",
            points.len(),
            total
        )));
    }
    let mut strides = vec![0usize; d];
    let mut s = 1usize;
    for k in (0..d).rev() {
        strides[k] = s;
        s *= sizes[k];
    }
    let mut values = vec![f64::NAN; total];
    for (coords, v) in &points {
        let mut off = 0usize;
        for k in 0..d {
            let i = axes[k].iter().position(|&a| a == coords[k]).unwrap();
            off += i * strides[k];
        }
        if !values[off].is_nan() {
            return Err(Error::Parse("duplicate grid row".into()));
        }
        values[off] = *v;
    }
    let gt = GridTarget { axes, values, strides };
    Ok(Target::from_fn(d, label.to_string(), move |y| gt.log_p(y)))
}
