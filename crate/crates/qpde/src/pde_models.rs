//! Semi-discrete pricing systems `dV/dt = A V + b` for the Black–Scholes and
//! Heston PDEs, and their homogeneous augmentations `dw/dt = S w`.
//!
//! Backward pricing PDEs are written as `∂V/∂t + 𝓛V = 0`; the assembled
//! generator is `A = −𝓛_h` so that the terminal-value problem reads
//! `dV/dt = A V + b` and the solution at `t = 0` is `e^{−S T} w(T)`.
//!
//! Boundary treatment:
//! * Dirichlet faces (`V = 0`, only used at `S = 0`) keep their nodes in the state
//!   with a zero generator row, so register sizes stay powers of two;
//! * Neumann faces with slope `g` eliminate ghost nodes by
//!   `V_{−1} = V_1 − 2Δg` (lower) and `V_N = V_{N−2} + 2Δg` (upper); the constant
//!   part of every eliminated ghost flows into `b`. When a mixed stencil reaches a
//!   corner ghost, both axes are reflected and the constants summed.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fdgrid::{Axis, SparseOperator, TensorGrid};

/// Closure applied on one face of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Closure {
    /// `V = 0` on the face; nodes retained with zero generator rows.
    Dirichlet,
    /// `∂V/∂x = slope` on the face, imposed through a ghost node.
    Neumann { slope: f64 },
}

/// Lower/upper closures of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceClosure {
    pub lower: Closure,
    pub upper: Closure,
}

/// Per-axis boundary description, in grid-axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub faces: Vec<FaceClosure>,
}

/// Polynomial local volatility `σ(S) = Σ_q c_q S^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalVol {
    pub coeffs: Vec<f64>,
}

impl LocalVol {
    pub fn constant(sigma: f64) -> Self {
        Self { coeffs: vec![sigma] }
    }

    /// Polynomial degree Q_σ.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }
}

/// Black–Scholes model with per-asset polynomial local volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct BsParams {
    pub rate: f64,
    pub maturity: f64,
    pub local_vol: Vec<LocalVol>,
    /// `s × s` correlation matrix.
    pub correlation: DMatrix<f64>,
}

impl BsParams {
    /// Single-asset model with constant volatility.
    pub fn single(rate: f64, maturity: f64, sigma: f64) -> Self {
        Self {
            rate,
            maturity,
            local_vol: vec![LocalVol::constant(sigma)],
            correlation: DMatrix::identity(1, 1),
        }
    }

    pub fn assets(&self) -> usize {
        self.local_vol.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0) {
            return Err(Error::invalid("maturity must be positive"));
        }
        let d = self.assets();
        if d == 0 {
            return Err(Error::invalid("at least one asset is required"));
        }
        if self.correlation.shape() != (d, d) {
            return Err(Error::invalid(format!(
                "correlation must be {d}x{d}, got {:?}",
                self.correlation.shape()
            )));
        }
        check_correlation(&self.correlation, "correlation")
    }
}

/// Multi-asset Heston model; correlation blocks are `d × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct HestonParams {
    pub rate: f64,
    pub maturity: f64,
    pub kappa: Vec<f64>,
    pub theta: Vec<f64>,
    /// Vol-of-vol σ_i.
    pub sigma: Vec<f64>,
    pub gamma_ss: DMatrix<f64>,
    pub gamma_sv: DMatrix<f64>,
    pub gamma_vv: DMatrix<f64>,
}

impl HestonParams {
    /// One-asset model with spot/variance correlation `rho`.
    pub fn single(rate: f64, maturity: f64, kappa: f64, theta: f64, sigma: f64, rho: f64) -> Self {
        Self {
            rate,
            maturity,
            kappa: vec![kappa],
            theta: vec![theta],
            sigma: vec![sigma],
            gamma_ss: DMatrix::identity(1, 1),
            gamma_sv: DMatrix::from_element(1, 1, rho),
            gamma_vv: DMatrix::identity(1, 1),
        }
    }

    pub fn assets(&self) -> usize {
        self.kappa.len()
    }

    /// The full `2d × 2d` correlation `[[Γ^SS, Γ^Sv], [Γ^Sv^T, Γ^vv]]`.
    pub fn full_correlation(&self) -> DMatrix<f64> {
        let d = self.assets();
        let mut g = DMatrix::zeros(2 * d, 2 * d);
        g.view_mut((0, 0), (d, d)).copy_from(&self.gamma_ss);
        g.view_mut((0, d), (d, d)).copy_from(&self.gamma_sv);
        g.view_mut((d, 0), (d, d)).copy_from(&self.gamma_sv.transpose());
        g.view_mut((d, d), (d, d)).copy_from(&self.gamma_vv);
        g
    }

    /// Validates positivity, shapes and PSD-ness. The Feller condition is not required.
    pub fn validate(&self) -> Result<()> {
        let d = self.assets();
        if d == 0 || self.theta.len() != d || self.sigma.len() != d {
            return Err(Error::invalid("kappa, theta and sigma must have one entry per asset"));
        }
        if !(self.maturity > 0.0) {
            return Err(Error::invalid("maturity must be positive"));
        }
        for i in 0..d {
            if !(self.kappa[i] > 0.0 && self.theta[i] > 0.0 && self.sigma[i] >= 0.0) {
                return Err(Error::invalid(format!(
                    "asset {i}: need kappa > 0, theta > 0, sigma >= 0"
                )));
            }
        }
        for (name, m) in [("gamma_ss", &self.gamma_ss), ("gamma_sv", &self.gamma_sv), ("gamma_vv", &self.gamma_vv)] {
            if m.shape() != (d, d) {
                return Err(Error::invalid(format!("{name} must be {d}x{d}")));
            }
        }
        check_correlation(&self.full_correlation(), "full Heston correlation")
    }

    /// True when 2κθ ≥ σ² for every asset (informational only).
    pub fn feller_satisfied(&self) -> bool {
        (0..self.assets()).all(|i| 2.0 * self.kappa[i] * self.theta[i] >= self.sigma[i].powi(2))
    }
}

fn check_correlation(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        if (m[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("{name} must have unit diagonal")));
        }
        for j in 0..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(Error::invalid(format!("{name} must be symmetric")));
            }
        }
    }
    let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min_eig < -1e-10 {
        return Err(Error::invalid(format!(
            "{name} is not positive semidefinite (smallest eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

/// Semi-discrete affine system `dV/dt = A V + b`.
#[derive(Debug, Clone)]
pub struct AffineSystem {
    pub a: SparseOperator,
    pub b: Vec<f64>,
    pub grid: TensorGrid,
    pub boundary: BoundarySpec,
}

impl AffineSystem {
    pub fn dim(&self) -> usize {
        self.grid.volume()
    }
}

/// How the source term was folded into a homogeneous generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Augmentation {
    /// One extra state holding the constant `scale`; `S = [[A, b/scale], [0, 0]]`.
    Scalar,
    /// A doubled register holding `scale·r0` with `r0` uniform of unit norm;
    /// `S = [[A, B/scale], [0, 0]]` with `B = √vol·diag(b)`.
    Register { b_diag: Vec<f64>, r0: Vec<f64> },
}

/// Homogeneous system `dw/dt = S w` with terminal data `w(T)`.
///
/// The augmentation block of `w` is constant in time (its generator rows are
/// zero) and has Euclidean norm exactly `scale`.
#[derive(Debug, Clone)]
pub struct HomogeneousSystem {
    pub s: SparseOperator,
    pub terminal: Vec<f64>,
    pub augmentation: Augmentation,
    /// Length of the `V` block (the grid volume).
    pub state_dim: usize,
    /// Norm of the augmentation block.
    pub scale: f64,
}

impl HomogeneousSystem {
    pub fn dim(&self) -> usize {
        self.s.dim_rows()
    }

    /// Number of qubits of the system register (`⌈log2 dim⌉`).
    pub fn qubits(&self) -> u32 {
        usize::BITS - (self.dim() - 1).leading_zeros()
    }

    /// Augmentation block of a full state vector.
    pub fn augmentation_block<'a>(&self, w: &'a [f64]) -> &'a [f64] {
        &w[self.state_dim..]
    }
}

// ---------------------------------------------------------------------------
// Generic assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Deriv {
    Id,
    D1(usize),
    D2(usize),
    Mixed(usize, usize),
}

/// Coefficient of a generator term as a function of the node coordinates.
type Coefficient<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

struct Term<'a> {
    deriv: Deriv,
    coef: Coefficient<'a>,
}

impl<'a> Term<'a> {
    fn new(deriv: Deriv, coef: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        Self {
            deriv,
            coef: Box::new(coef),
        }
    }
}

fn stencil(grid: &TensorGrid, d: Deriv) -> Vec<(Vec<(usize, i64)>, f64)> {
    let h = |a: usize| grid.axes[a].spacing;
    match d {
        Deriv::Id => vec![(vec![], 1.0)],
        Deriv::D1(a) => vec![(vec![(a, 1)], 0.5 / h(a)), (vec![(a, -1)], -0.5 / h(a))],
        Deriv::D2(a) => {
            let w = 1.0 / (h(a) * h(a));
            vec![(vec![(a, 1)], w), (vec![], -2.0 * w), (vec![(a, -1)], w)]
        }
        Deriv::Mixed(i, j) => {
            let w = 0.25 / (h(i) * h(j));
            vec![
                (vec![(i, 1), (j, 1)], w),
                (vec![(i, 1), (j, -1)], -w),
                (vec![(i, -1), (j, 1)], -w),
                (vec![(i, -1), (j, -1)], w),
            ]
        }
    }
}

/// Assembles `A = −𝓛_h` and `b` for `𝓛 = Σ coef·deriv` under the given closures.
fn assemble_generator(grid: &TensorGrid, terms: &[Term<'_>], boundary: &BoundarySpec) -> Result<(SparseOperator, Vec<f64>)> {
    let nd = grid.ndim();
    if boundary.faces.len() != nd {
        return Err(Error::invalid("boundary spec must list one closure per axis"));
    }
    let stencils: Vec<_> = terms.iter().map(|t| stencil(grid, t.deriv)).collect();
    let vol = grid.volume();
    let mut b = vec![0.0; vol];
    let mut trip = Vec::new();
    for row in 0..vol {
        let k = grid.multi_index(row);
        let pinned = (0..nd).any(|a| {
            (k[a] == 0 && boundary.faces[a].lower == Closure::Dirichlet)
                || (k[a] + 1 == grid.axes[a].points && boundary.faces[a].upper == Closure::Dirichlet)
        });
        if pinned {
            continue;
        }
        let x = grid.coords(row);
        for (term, st) in terms.iter().zip(&stencils) {
            let c = (term.coef)(&x);
            if c == 0.0 {
                continue;
            }
            for (offsets, w) in st {
                let mut nb = k.clone();
                let mut constant = 0.0;
                for &(a, o) in offsets {
                    let n = grid.axes[a].points as i64;
                    let h = grid.axes[a].spacing;
                    let target = k[a] as i64 + o;
                    nb[a] = if target < 0 {
                        match boundary.faces[a].lower {
                            Closure::Neumann { slope } => {
                                constant -= 2.0 * h * slope;
                                (1).min(n - 1) as usize
                            }
                            Closure::Dirichlet => unreachable!("pinned rows are skipped"),
                        }
                    } else if target >= n {
                        match boundary.faces[a].upper {
                            Closure::Neumann { slope } => {
                                constant += 2.0 * h * slope;
                                (n - 2).max(0) as usize
                            }
                            Closure::Dirichlet => unreachable!("pinned rows are skipped"),
                        }
                    } else {
                        target as usize
                    };
                }
                trip.push((row, grid.flat_index(&nb), -c * w));
                b[row] -= c * w * constant;
            }
        }
    }
    Ok((SparseOperator::from_triplets(vol, vol, trip), b))
}

fn check_price_axis(axis: &Axis) -> Result<()> {
    if axis.lower != 0.0 {
        return Err(Error::invalid(format!(
            "price axis `{}` must start at 0, got {}",
            axis.label, axis.lower
        )));
    }
    if axis.points < 3 {
        return Err(Error::invalid(format!("price axis `{}` needs at least 3 points", axis.label)));
    }
    Ok(())
}

/// Neumann slope imposed at `S_max`: the vanilla call grows with slope one, while
/// the multi-asset Worst-of call is flat in each price direction.
fn price_upper_slope(assets: usize) -> f64 {
    if assets == 1 {
        1.0
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Black–Scholes
// ---------------------------------------------------------------------------

/// Multi-asset payoff classes, for boundary-compatibility checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffClass {
    WorstOfCall,
    BestOfCall,
    BasketCall,
    Spread,
}

/// One-asset Black–Scholes system on `[0, S_max]`: Dirichlet `V = 0` at `S = 0` and
/// Neumann slope one at `S_max`.
///
/// The `strike` does not enter the generator; it is accepted for signature
/// symmetry with the payoff sampling and validated as non-negative.
pub fn assemble_bs1d(p: &BsParams, axis: &Axis, strike: f64) -> Result<AffineSystem> {
    p.validate()?;
    if p.assets() != 1 {
        return Err(Error::invalid("assemble_bs1d needs a single-asset model"));
    }
    if !(strike >= 0.0) {
        return Err(Error::invalid("strike must be non-negative"));
    }
    let grid = TensorGrid::new(vec![axis.clone()])?;
    assemble_bs_grid(p, grid)
}

/// Multi-asset Black–Scholes system for the Worst-of call (the only payoff whose
/// faces admit a closure without auxiliary lower-dimensional PDEs).
pub fn assemble_bs_multi(p: &BsParams, grid: &TensorGrid, payoff: PayoffClass) -> Result<AffineSystem> {
    p.validate()?;
    if payoff != PayoffClass::WorstOfCall {
        return Err(Error::Unsupported(format!(
            "{payoff:?}: boundary closure requires auxiliary lower-dimensional PDEs, unsupported"
        )));
    }
    if grid.ndim() != p.assets() {
        return Err(Error::invalid(format!(
            "grid has {} axes but the model has {} assets",
            grid.ndim(),
            p.assets()
        )));
    }
    assemble_bs_grid(p, grid.clone())
}

fn assemble_bs_grid(p: &BsParams, grid: TensorGrid) -> Result<AffineSystem> {
    let d = p.assets();
    for a in &grid.axes {
        check_price_axis(a)?;
    }
    let r = p.rate;
    let slope = price_upper_slope(d);
    let mut terms = Vec::new();
    for i in 0..d {
        let lv = &p.local_vol[i];
        terms.push(Term::new(Deriv::D2(i), move |x: &[f64]| {
            let s = lv.eval(x[i]);
            0.5 * s * s * x[i] * x[i]
        }));
        terms.push(Term::new(Deriv::D1(i), move |x: &[f64]| r * x[i]));
        for j in i + 1..d {
            let rho = p.correlation[(i, j)];
            if rho == 0.0 {
                continue;
            }
            let (li, lj) = (&p.local_vol[i], &p.local_vol[j]);
            terms.push(Term::new(Deriv::Mixed(i, j), move |x: &[f64]| {
                rho * li.eval(x[i]) * lj.eval(x[j]) * x[i] * x[j]
            }));
        }
    }
    terms.push(Term::new(Deriv::Id, move |_: &[f64]| -r));
    let boundary = BoundarySpec {
        faces: vec![
            FaceClosure {
                lower: Closure::Dirichlet,
                upper: Closure::Neumann { slope },
            };
            d
        ],
    };
    let (a, b) = assemble_generator(&grid, &terms, &boundary)?;
    Ok(AffineSystem { a, b, grid, boundary })
}

// ---------------------------------------------------------------------------
// Heston
// ---------------------------------------------------------------------------

/// One-asset Heston system on `[0, S_max] × [v_min, v_max]`: Dirichlet at `S = 0`,
/// Neumann slope one at `S_max`, homogeneous Neumann on both variance faces.
pub fn assemble_heston1d(p: &HestonParams, s_axis: &Axis, v_axis: &Axis) -> Result<AffineSystem> {
    if p.assets() != 1 {
        return Err(Error::invalid("assemble_heston1d needs a single-asset model"));
    }
    let grid = TensorGrid::new(vec![s_axis.clone(), v_axis.clone()])?;
    assemble_heston_multi(p, &grid)
}

/// Multi-asset Heston system on a grid listing the `d` price axes followed by the
/// `d` variance axes.
pub fn assemble_heston_multi(p: &HestonParams, grid: &TensorGrid) -> Result<AffineSystem> {
    p.validate()?;
    let d = p.assets();
    if grid.ndim() != 2 * d {
        return Err(Error::invalid(format!(
            "Heston grid needs {} axes (d prices then d variances), got {}",
            2 * d,
            grid.ndim()
        )));
    }
    for a in &grid.axes[..d] {
        check_price_axis(a)?;
    }
    for a in &grid.axes[d..] {
        if a.lower < 0.0 {
            return Err(Error::invalid(format!("variance axis `{}` must have v_min >= 0", a.label)));
        }
    }
    let r = p.rate;
    let sqrt_vv = |x: &[f64], i: usize, j: usize| (x[d + i] * x[d + j]).max(0.0).sqrt();
    let mut terms = Vec::new();
    for i in 0..d {
        let (kap, th, sig) = (p.kappa[i], p.theta[i], p.sigma[i]);
        terms.push(Term::new(Deriv::D2(i), move |x: &[f64]| 0.5 * x[d + i] * x[i] * x[i]));
        terms.push(Term::new(Deriv::D1(i), move |x: &[f64]| r * x[i]));
        terms.push(Term::new(Deriv::D2(d + i), move |x: &[f64]| 0.5 * sig * sig * x[d + i]));
        terms.push(Term::new(Deriv::D1(d + i), move |x: &[f64]| kap * (th - x[d + i])));
        for j in i + 1..d {
            let rho = p.gamma_ss[(i, j)];
            if rho != 0.0 {
                terms.push(Term::new(Deriv::Mixed(i, j), move |x: &[f64]| {
                    rho * sqrt_vv(x, i, j) * x[i] * x[j]
                }));
            }
            let rvv = p.gamma_vv[(i, j)];
            let sj = p.sigma[j];
            if rvv != 0.0 {
                terms.push(Term::new(Deriv::Mixed(d + i, d + j), move |x: &[f64]| {
                    rvv * sig * sj * sqrt_vv(x, i, j)
                }));
            }
        }
        for j in 0..d {
            let rsv = p.gamma_sv[(i, j)];
            let sj = p.sigma[j];
            if rsv != 0.0 {
                terms.push(Term::new(Deriv::Mixed(i, d + j), move |x: &[f64]| {
                    rsv * sj * x[i] * sqrt_vv(x, i, j)
                }));
            }
        }
    }
    terms.push(Term::new(Deriv::Id, move |_: &[f64]| -r));
    let slope = price_upper_slope(d);
    let mut faces = vec![
        FaceClosure {
            lower: Closure::Dirichlet,
            upper: Closure::Neumann { slope },
        };
        d
    ];
    faces.extend(vec![
        FaceClosure {
            lower: Closure::Neumann { slope: 0.0 },
            upper: Closure::Neumann { slope: 0.0 },
        };
        d
    ]);
    let boundary = BoundarySpec { faces };
    let (a, b) = assemble_generator(grid, &terms, &boundary)?;
    Ok(AffineSystem {
        a,
        b,
        grid: grid.clone(),
        boundary,
    })
}

// ---------------------------------------------------------------------------
// Homogeneous augmentation
// ---------------------------------------------------------------------------

fn check_terminal(sys: &AffineSystem, terminal: &[f64]) -> Result<()> {
    if terminal.len() != sys.dim() {
        return Err(Error::invalid(format!(
            "terminal vector has {} entries, system has {}",
            terminal.len(),
            sys.dim()
        )));
    }
    Ok(())
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid("augmentation scale must be positive and finite"));
    }
    Ok(())
}

/// Scalar augmentation `S = [[A, b], [0, 0]]`, terminal `(V(T), 1)`.
pub fn augment_scalar(sys: &AffineSystem, terminal: &[f64]) -> Result<HomogeneousSystem> {
    augment_scalar_scaled(sys, terminal, 1.0)
}

/// Scalar augmentation with the constant state held at `scale`:
/// `S = [[A, b/scale], [0, 0]]`, terminal `(V(T), scale)`.
///
/// The `V` dynamics are unchanged for any `scale`; larger values shrink the
/// coupling column and therefore the negative part of the Hermitian part of `S`.
pub fn augment_scalar_scaled(sys: &AffineSystem, terminal: &[f64], scale: f64) -> Result<HomogeneousSystem> {
    check_terminal(sys, terminal)?;
    check_scale(scale)?;
    let n = sys.dim();
    let mut t = sys.a.triplets();
    t.extend(sys.b.iter().enumerate().map(|(i, &bi)| (i, n, bi / scale)));
    let mut w = terminal.to_vec();
    w.push(scale);
    Ok(HomogeneousSystem {
        s: SparseOperator::from_triplets(n + 1, n + 1, t),
        terminal: w,
        augmentation: Augmentation::Scalar,
        state_dim: n,
        scale,
    })
}

/// Register-doubling augmentation: `r0` uniform with unit norm, `B = √vol·diag(b)`,
/// `S = [[A, B], [0, 0]]`, terminal `(V(T), r0)`.
pub fn augment_register(sys: &AffineSystem, terminal: &[f64]) -> Result<HomogeneousSystem> {
    augment_register_scaled(sys, terminal, 1.0)
}

/// Register-doubling augmentation with the register held at `scale·r0`.
pub fn augment_register_scaled(sys: &AffineSystem, terminal: &[f64], scale: f64) -> Result<HomogeneousSystem> {
    check_terminal(sys, terminal)?;
    check_scale(scale)?;
    let n = sys.dim();
    let root = (n as f64).sqrt();
    let r0 = vec![1.0 / root; n];
    let b_diag: Vec<f64> = sys.b.iter().map(|bi| root * bi).collect();
    let mut t = sys.a.triplets();
    t.extend(b_diag.iter().enumerate().map(|(i, &bi)| (i, n + i, bi / scale)));
    let mut w = terminal.to_vec();
    w.extend(r0.iter().map(|r| scale * r));
    Ok(HomogeneousSystem {
        s: SparseOperator::from_triplets(2 * n, 2 * n, t),
        terminal: w,
        augmentation: Augmentation::Register { b_diag, r0 },
        state_dim: n,
        scale,
    })
}

/// Default augmentation scale: `max(1, ‖b‖₂, ‖V(T)‖₂)`.
pub fn auto_scale(sys: &AffineSystem, terminal: &[f64]) -> f64 {
    let nb = sys.b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = terminal.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0f64.max(nb).max(nv)
}
