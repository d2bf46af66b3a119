use serde::Serialize;

use crate::expr::Expr;

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    pub fn of(v: f64) -> Option<Sign> {
        if v > 0.0 {
            Some(Sign::Positive)
        } else if v < 0.0 {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

/// A root of b located to within `root_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Zero {
    /// Reported location (bracket midpoint).
    pub x: f64,
    /// Bracket with b(lo) on the left-interval side, b(hi) on the right-interval side.
    pub lo: f64,
    pub hi: f64,
    /// b touches zero without changing sign.
    pub tangent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroStructure {
    pub c0: f64,
    pub c_n: f64,
    pub zeros: Vec<Zero>,
    /// Sign of b on each maximal interval between consecutive zeros
    /// (zeros.len() + 1 entries).
    pub interval_signs: Vec<Sign>,
    pub warnings: Vec<String>,
}

impl ZeroStructure {
    pub fn has_tangent_zero(&self) -> bool {
        self.zeros.iter().any(|z| z.tangent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroOptions {
    pub root_tol: f64,
    /// Scan step as a fraction of cN - c0.
    pub scan_fraction: f64,
}

impl Default for ZeroOptions {
    fn default() -> Self {
        ZeroOptions {
            root_tol: 1e-10,
            scan_fraction: 1e-3,
        }
    }
}

/// Bisection on a sign change of `g` inside [lo, hi].
fn bisect<F>(g: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64), AnalysisError>
where
    F: Fn(f64) -> Result<f64, AnalysisError>,
{
    let glo = g(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= tol {
            break;
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok((mid, mid));
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Locates the zeros of a one-dimensional b on [c0, cN] by a bracketing scan
/// followed by bisection. Double roots are found through sign changes of b'.
pub fn find_zero_structure(
    b: &Expr,
    c0: f64,
    c_n: f64,
    opts: &ZeroOptions,
) -> Result<ZeroStructure, AnalysisError> {
    if !(c0 < c_n) {
        return Err(AnalysisError::InvalidInterval { c0, c_n });
    }
    let n = (1.0 / opts.scan_fraction).round().max(2.0) as usize;
    let step = (c_n - c0) / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| c0 + step * i as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| b.eval1(x)).collect::<Result<_, _>>()?;
    let eval = |x: f64| -> Result<f64, AnalysisError> { Ok(b.eval1(x)?) };
    let slope = |x: f64| -> Result<f64, AnalysisError> { Ok(b.eval_with_derivative(&[x], 0)?.1) };

    let mut zeros: Vec<Zero> = Vec::new();
    let push = |z: Zero, zeros: &mut Vec<Zero>| {
        if zeros.last().is_none_or(|last| z.x - last.x > opts.root_tol) {
            zeros.push(z);
        }
    };

    for i in 0..n {
        let (xa, xb) = (grid[i], grid[i + 1]);
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            let tangent = i > 0 && {
                let left = values[i - 1];
                left != 0.0 && fb != 0.0 && (left > 0.0) == (fb > 0.0)
            };
            push(
                Zero {
                    x: xa,
                    lo: xa,
                    hi: xa,
                    tangent,
                },
                &mut zeros,
            );
            continue;
        }
        if fb != 0.0 && (fa > 0.0) != (fb > 0.0) {
            let (lo, hi) = bisect(eval, xa, xb, opts.root_tol)?;
            push(
                Zero {
                    x: 0.5 * (lo + hi),
                    lo,
                    hi,
                    tangent: false,
                },
                &mut zeros,
            );
            continue;
        }
        // Interior touch: |b| has a local minimum near grid point i or i+1.
        if i + 2 <= n && fb != 0.0 {
            let fc = values[i + 2];
            let same = fc != 0.0 && (fa > 0.0) == (fb > 0.0) && (fb > 0.0) == (fc > 0.0);
            if same && fb.abs() <= fa.abs() && fb.abs() <= fc.abs() {
                let (sa, sc) = (slope(xa)?, slope(grid[i + 2])?);
                if sa != 0.0 && sc != 0.0 && (sa > 0.0) != (sc > 0.0) {
                    let (lo, hi) = bisect(slope, xa, grid[i + 2], opts.root_tol * 1e-3)?;
                    let xm = 0.5 * (lo + hi);
                    if b.eval1(xm)?.abs() <= opts.root_tol {
                        push(
                            Zero {
                                x: xm,
                                lo: xm,
                                hi: xm,
                                tangent: true,
                            },
                            &mut zeros,
                        );
                    }
                }
            }
        }
    }
    if values[n] == 0.0 {
        push(
            Zero {
                x: c_n,
                lo: c_n,
                hi: c_n,
                tangent: false,
            },
            &mut zeros,
        );
    }

    // Interval signs from midpoints between consecutive zeros (and the ends).
    let mut edges = vec![c0];
    edges.extend(zeros.iter().map(|z| z.x));
    edges.push(c_n);
    let mut interval_signs = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let v = b.eval1(mid)?;
        let sign = Sign::of(v).ok_or(AnalysisError::SignViolation { at: mid, value: v })?;
        interval_signs.push(sign);
    }

    let mut warnings = Vec::new();
    for (k, z) in zeros.iter_mut().enumerate() {
        let tangent = interval_signs[k] == interval_signs[k + 1];
        if tangent && !z.tangent {
            z.tangent = true;
        }
        if z.tangent {
            warnings.push(format!(
                "tangent zero at x = {:.12}: b vanishes without changing sign",
                z.x
            ));
        }
    }

    Ok(ZeroStructure {
        c0,
        c_n,
        zeros,
        interval_signs,
        warnings,
    })
}
