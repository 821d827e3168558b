//! Terminal payoffs sampled on grids and their terminal normalisation.

use crate::error::{Error, Result};
use crate::fdgrid::TensorGrid;

/// Supported terminal payoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    Call,
    Put,
    /// `(Σ w_i S_i − K)^+` with positive weights summing to one.
    BasketCall,
    /// `(Σ_{up} w_i S_i − Σ_{down} w_j S_j − K)^+`; weights are signed, each group
    /// summing to ±1.
    Spread,
    /// `(max_i S_i − K)^+`.
    BestOfCall,
    /// `(min_i S_i − K)^+`.
    WorstOfCall,
}

/// A payoff with its strike and, for basket/spread, its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec {
    pub kind: PayoffKind,
    pub strike: f64,
    /// Per-asset weights (basket/spread); for best-of/worst-of only the length
    /// (the arity) is used.
    pub weights: Vec<f64>,
}

impl PayoffSpec {
    pub fn call(strike: f64) -> Self {
        Self {
            kind: PayoffKind::Call,
            strike,
            weights: vec![1.0],
        }
    }

    pub fn put(strike: f64) -> Self {
        Self {
            kind: PayoffKind::Put,
            strike,
            weights: vec![1.0],
        }
    }

    pub fn worst_of(strike: f64, assets: usize) -> Self {
        Self {
            kind: PayoffKind::WorstOfCall,
            strike,
            weights: vec![1.0; assets],
        }
    }

    pub fn best_of(strike: f64, assets: usize) -> Self {
        Self {
            kind: PayoffKind::BestOfCall,
            strike,
            weights: vec![1.0; assets],
        }
    }

    pub fn basket(strike: f64, weights: Vec<f64>) -> Self {
        Self {
            kind: PayoffKind::BasketCall,
            strike,
            weights,
        }
    }

    pub fn spread(strike: f64, weights: Vec<f64>) -> Self {
        Self {
            kind: PayoffKind::Spread,
            strike,
            weights,
        }
    }

    /// Number of price coordinates the payoff reads.
    pub fn arity(&self) -> usize {
        match self.kind {
            PayoffKind::Call | PayoffKind::Put => 1,
            _ => self.weights.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike >= 0.0 && self.strike.is_finite()) {
            return Err(Error::invalid("strike must be finite and non-negative"));
        }
        if self.arity() == 0 {
            return Err(Error::invalid("payoff needs at least one asset"));
        }
        match self.kind {
            PayoffKind::BasketCall => {
                let sum: f64 = self.weights.iter().sum();
                if self.weights.iter().any(|&w| w <= 0.0) || (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid("basket weights must be positive and sum to 1"));
                }
            }
            PayoffKind::Spread => {
                let up: f64 = self.weights.iter().filter(|w| **w > 0.0).sum();
                let down: f64 = self.weights.iter().filter(|w| **w < 0.0).sum();
                if (up - 1.0).abs() > 1e-12 || (down + 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(
                        "spread weights: positive group must sum to 1 and negative group to -1",
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Payoff value at the price vector `s` (extra coordinates are ignored).
    pub fn eval(&self, s: &[f64]) -> f64 {
        let k = self.strike;
        let d = self.arity();
        let s = &s[..d];
        let x = match self.kind {
            PayoffKind::Call => s[0] - k,
            PayoffKind::Put => k - s[0],
            PayoffKind::BasketCall | PayoffKind::Spread => {
                s.iter().zip(&self.weights).map(|(s, w)| s * w).sum::<f64>() - k
            }
            PayoffKind::BestOfCall => s.iter().copied().fold(f64::NEG_INFINITY, f64::max) - k,
            PayoffKind::WorstOfCall => s.iter().copied().fold(f64::INFINITY, f64::min) - k,
        };
        x.max(0.0)
    }
}

/// Samples the payoff at every node. The leading `arity` axes are read as prices;
/// any further axes (Heston variances) are ignored.
pub fn sample_payoff(spec: &PayoffSpec, grid: &TensorGrid) -> Result<Vec<f64>> {
    spec.validate()?;
    let d = spec.arity();
    if grid.ndim() != d && grid.ndim() != 2 * d {
        return Err(Error::invalid(format!(
            "payoff reads {d} prices but the grid has {} axes",
            grid.ndim()
        )));
    }
    Ok(grid.sample(|x| spec.eval(x)))
}

/// Terminal normalisation of the sampled payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalNorm {
    /// Exact grid sum `√(Σ_j f(S_j)²)`.
    pub grid_sum: f64,
    /// Integral form `(∫|f|² / Π h)^{1/2}` over the price box.
    pub integral: f64,
    /// `|integral − grid_sum| / grid_sum` (zero when both vanish).
    pub relative_gap: f64,
}

/// Computes both forms of the terminal norm. Only the price axes enter the
/// integral; for Heston grids the variance register multiplies the norm by
/// `√(N_v)` in both forms.
pub fn terminal_norm(spec: &PayoffSpec, grid: &TensorGrid) -> Result<TerminalNorm> {
    let samples = sample_payoff(spec, grid)?;
    let grid_sum = samples.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d = spec.arity();
    let price_axes = &grid.axes[..d];
    let extra: usize = grid.axes[d..].iter().map(|a| a.points).product();
    let h: f64 = price_axes.iter().map(|a| a.spacing).product();
    let integral_sq = match spec.kind {
        PayoffKind::Call => {
            let (k, m) = (spec.strike, price_axes[0].upper);
            let lo = price_axes[0].lower.max(k);
            if m > lo {
                ((m - k).powi(3) - (lo - k).powi(3)) / 3.0
            } else {
                0.0
            }
        }
        PayoffKind::Put => {
            let (k, lo) = (spec.strike, price_axes[0].lower);
            let hi = price_axes[0].upper.min(k);
            if hi > lo {
                ((k - lo).powi(3) - (k - hi).powi(3)) / 3.0
            } else {
                0.0
            }
        }
        _ => box_quadrature(spec, price_axes),
    };
    let integral = (extra as f64 * integral_sq / h).sqrt();
    let relative_gap = if grid_sum == 0.0 {
        if integral == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (integral - grid_sum).abs() / grid_sum
    };
    Ok(TerminalNorm {
        grid_sum,
        integral,
        relative_gap,
    })
}

/// Tensor Gauss–Legendre quadrature of `f²` over the price box, composite over
/// panels so the payoff kinks are resolved.
fn box_quadrature(spec: &PayoffSpec, axes: &[crate::fdgrid::Axis]) -> f64 {
    const NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const WEIGHTS: [f64; 4] = [0.347_854_845_137_453_8, 0.652_145_154_862_546_2, 0.652_145_154_862_546_2, 0.347_854_845_137_453_8];
    let d = axes.len();
    let panels = match d {
        1 => 4096,
        2 => 256,
        3 => 32,
        _ => 8,
    };
    let per_axis = panels * NODES.len();
    let pts: Vec<Vec<(f64, f64)>> = axes
        .iter()
        .map(|a| {
            let w = (a.upper - a.lower) / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let mid = a.lower + (p as f64 + 0.5) * w;
                    NODES.iter().zip(WEIGHTS).map(move |(x, wt)| (mid + 0.5 * w * x, 0.5 * w * wt))
                })
                .collect()
        })
        .collect();
    let total = per_axis.pow(d as u32);
    let mut acc = 0.0;
    let mut s = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for j in (0..d).rev() {
            let (x, wt) = pts[j][rem % per_axis];
            rem /= per_axis;
            s[j] = x;
            w *= wt;
        }
        acc += w * spec.eval(&s).powi(2);
    }
    acc
}
