//! Smooth-boundary learning in `[0, 1]^d`.
//!
//! The boundary `x_d = g*(x̃)` is learned by running the threshold learner
//! along the vertical line through every lattice node `l ∈ {0, 1/M, …, 1}^{d-1}`
//! and then interpolating the learned heights cell by cell. Cells are the
//! boxes `I_q = Π [γ q_i / M, γ (q_i + 1) / M]`, each carrying `γ + 1` nodes
//! per axis, and the interpolant on a cell is the tensor-product Lagrange
//! polynomial through those nodes.
//!
//! Lattice nodes and cells are addressed by integer multi-indices: node
//! `(i_1, …, i_{d-1})` sits at `(i_1 / M, …, i_{d-1} / M)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelers::BoundaryLabeler;
use crate::rng::{derive_seed, stream_rng};
use crate::threshold_learner::{run_threshold_learner, LearnerConfig, StopReason, ThresholdResult};

pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;
pub const DEFAULT_QUADRATURE_RESOLUTION: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub height: f64,
}

/// Boundary function families available to experiments.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryFunction {
    /// `a Σ_i (x_i - b)^2 + c`.
    Quadratic { a: f64, b: f64, c: f64 },
    Constant { value: f64 },
    /// `intercept + Σ_i slopes[i] x_i`.
    Affine { intercept: f64, slopes: Vec<f64> },
    /// `base + Σ height · exp(1 - 1 / (1 - r²))`, with `r = |x - center| / radius < 1`.
    SumOfBumps { base: f64, bumps: Vec<Bump> },
    /// `low` for `x_1 < at`, `high` otherwise. Not smooth; used to exercise
    /// [`holder_check`].
    Step { at: f64, low: f64, high: f64 },
    #[serde(skip)]
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for BoundaryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryFunction::Quadratic { a, b, c } => write!(f, "Quadratic({a}, {b}, {c})"),
            BoundaryFunction::Constant { value } => write!(f, "Constant({value})"),
            BoundaryFunction::Affine { intercept, slopes } => write!(f, "Affine({intercept}, {slopes:?})"),
            BoundaryFunction::SumOfBumps { base, bumps } => write!(f, "SumOfBumps({base}, {bumps:?})"),
            BoundaryFunction::Step { at, low, high } => write!(f, "Step({at}, {low}, {high})"),
            BoundaryFunction::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl PartialEq for BoundaryFunction {
    fn eq(&self, other: &Self) -> bool {
        use BoundaryFunction::*;
        match (self, other) {
            (Quadratic { a, b, c }, Quadratic { a: a2, b: b2, c: c2 }) => a == a2 && b == b2 && c == c2,
            (Constant { value }, Constant { value: v2 }) => value == v2,
            (Affine { intercept, slopes }, Affine { intercept: i2, slopes: s2 }) => intercept == i2 && slopes == s2,
            (SumOfBumps { base, bumps }, SumOfBumps { base: b2, bumps: bu2 }) => base == b2 && bumps == bu2,
            (Step { at, low, high }, Step { at: a2, low: l2, high: h2 }) => at == a2 && low == l2 && high == h2,
            (Custom(a), Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl BoundaryFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BoundaryFunction::Quadratic { a, b, c } => a * x.iter().map(|xi| (xi - b).powi(2)).sum::<f64>() + c,
            BoundaryFunction::Constant { value } => *value,
            BoundaryFunction::Affine { intercept, slopes } => {
                intercept + slopes.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>()
            }
            BoundaryFunction::SumOfBumps { base, bumps } => {
                base + bumps
                    .iter()
                    .map(|bump| {
                        let r2 = bump
                            .center
                            .iter()
                            .zip(x)
                            .map(|(c, xi)| (xi - c).powi(2))
                            .sum::<f64>()
                            / (bump.radius * bump.radius);
                        if r2 < 1.0 {
                            bump.height * (1.0 - 1.0 / (1.0 - r2)).exp()
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
            }
            BoundaryFunction::Step { at, low, high } => {
                if x[0] < *at {
                    *low
                } else {
                    *high
                }
            }
            BoundaryFunction::Custom(g) => g(x),
        }
    }
}

/// A boundary `g: [0, 1]^{d-1} → [0, 1]` with declared Hölder constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothBoundary {
    pub dim: usize,
    pub func: BoundaryFunction,
    pub holder_k: f64,
    pub holder_gamma: f64,
}

impl SmoothBoundary {
    pub fn new(dim: usize, func: BoundaryFunction, holder_k: f64, holder_gamma: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid(format!("boundary dimension must be >= 2, got {dim}")));
        }
        if !(holder_k > 0.0) || !(holder_gamma >= 1.0) {
            return Err(Error::invalid("Hölder constants need K > 0 and γ >= 1"));
        }
        let b = SmoothBoundary {
            dim,
            func,
            holder_k,
            holder_gamma,
        };
        // Range check on a coarse lattice.
        let res = 16usize;
        let axes = dim - 1;
        let mut x = vec![0.0; axes];
        for idx in 0..(res + 1).pow(axes as u32) {
            let mut rest = idx;
            for xi in x.iter_mut() {
                *xi = (rest % (res + 1)) as f64 / res as f64;
                rest /= res + 1;
            }
            let v = b.eval(&x);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("boundary leaves [0, 1]: g({x:?}) = {v}")));
            }
        }
        Ok(b)
    }

    /// `g(x₁) = (x₁ - 0.4)² + 0.1` in `d = 2`, with `(K, γ) = (1, 2)`.
    pub fn reference_quadratic() -> Self {
        SmoothBoundary {
            dim: 2,
            func: BoundaryFunction::Quadratic { a: 1.0, b: 0.4, c: 0.1 },
            holder_k: 1.0,
            holder_gamma: 2.0,
        }
    }

    pub fn eval(&self, x_tilde: &[f64]) -> f64 {
        self.func.eval(x_tilde)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: usize,
    pub gamma: usize,
    pub dim: usize,
}

impl GridSpec {
    pub fn new(m: usize, gamma: usize, dim: usize) -> Result<Self> {
        if gamma == 0 || m == 0 || m % gamma != 0 {
            return Err(Error::invalid(format!("M = {m} must be a positive multiple of γ = {gamma}")));
        }
        if dim < 2 {
            return Err(Error::invalid(format!("grid dimension must be >= 2, got {dim}")));
        }
        Ok(GridSpec { m, gamma, dim })
    }

    pub fn axes(&self) -> usize {
        self.dim - 1
    }

    /// Nodes per axis, `M + 1`.
    pub fn side(&self) -> usize {
        self.m + 1
    }

    pub fn node_count(&self) -> usize {
        self.side().pow(self.axes() as u32)
    }

    pub fn cells_per_axis(&self) -> usize {
        self.m / self.gamma
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis().pow(self.axes() as u32)
    }

    pub fn node_index(&self, node: &[usize]) -> usize {
        node.iter().rev().fold(0, |acc, &i| acc * self.side() + i)
    }

    pub fn node_at(&self, mut index: usize) -> Vec<usize> {
        (0..self.axes())
            .map(|_| {
                let i = index % self.side();
                index /= self.side();
                i
            })
            .collect()
    }

    pub fn node_point(&self, node: &[usize]) -> Vec<f64> {
        node.iter().map(|&i| i as f64 / self.m as f64).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.node_count()).map(|i| self.node_at(i))
    }

    /// The cell owning `x̃`; points on shared faces go to the lower cell.
    pub fn cell_of(&self, x: &[f64]) -> Vec<usize> {
        let per = self.cells_per_axis();
        let scale = self.m as f64 / self.gamma as f64;
        x.iter()
            .map(|&xi| {
                let s = (xi * scale).ceil() as i64 - 1;
                s.clamp(0, per as i64 - 1) as usize
            })
            .collect()
    }

    fn cell_contains(&self, cell: &[usize], node: &[usize]) -> bool {
        cell.len() == self.axes()
            && node.len() == self.axes()
            && cell.iter().zip(node).all(|(&q, &l)| {
                q < self.cells_per_axis() && l >= self.gamma * q && l <= self.gamma * q + self.gamma
            })
    }

    /// All `(γ + 1)^{d-1}` nodes of `cell`.
    pub fn cell_nodes(&self, cell: &[usize]) -> Vec<Vec<usize>> {
        let per_axis = self.gamma + 1;
        (0..per_axis.pow(self.axes() as u32))
            .map(|mut k| {
                cell.iter()
                    .map(|&q| {
                        let j = k % per_axis;
                        k /= per_axis;
                        self.gamma * q + j
                    })
                    .collect()
            })
            .collect()
    }
}

/// `M` = smallest multiple of `γ` that is at least `ceil(ε^{-1/γ})`.
pub fn build_grid(epsilon: f64, gamma: usize, dim: usize) -> Result<GridSpec> {
    build_grid_with_limit(epsilon, gamma, dim, DEFAULT_NODE_LIMIT)
}

pub fn build_grid_with_limit(epsilon: f64, gamma: usize, dim: usize, node_limit: u64) -> Result<GridSpec> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if gamma == 0 {
        return Err(Error::invalid("γ must be a positive integer"));
    }
    if dim < 2 {
        return Err(Error::invalid(format!("dimension must be >= 2, got {dim}")));
    }
    let base = (epsilon.powf(-1.0 / gamma as f64) - 1e-9).ceil().max(1.0) as usize;
    let m = base.div_ceil(gamma) * gamma;
    let nodes = ((m + 1) as u128).saturating_pow((dim - 1) as u32);
    if nodes > node_limit as u128 {
        return Err(Error::GridTooLarge {
            nodes,
            limit: node_limit,
        });
    }
    GridSpec::new(m, gamma, dim)
}

/// `Q_{q,l}(x̃) = Π_i Π_{j ≠ M l_i - γ q_i} (x̃_i - (γ q_i + j)/M) / (l_i - (γ q_i + j)/M)`.
pub fn lagrange_basis(grid: &GridSpec, cell: &[usize], node: &[usize], x: &[f64]) -> Result<f64> {
    if !grid.cell_contains(cell, node) {
        return Err(Error::NodeNotInCell {
            cell: cell.to_vec(),
            node: node.to_vec(),
        });
    }
    if x.len() != grid.axes() {
        return Err(Error::DimensionMismatch {
            expected: grid.axes(),
            got: x.len(),
        });
    }
    Ok(basis_unchecked(grid, cell, node, x))
}

fn basis_unchecked(grid: &GridSpec, cell: &[usize], node: &[usize], x: &[f64]) -> f64 {
    let m = grid.m as f64;
    let mut value = 1.0;
    for ((&q, &l), &xi) in cell.iter().zip(node).zip(x) {
        let li = l as f64 / m;
        for j in 0..=grid.gamma {
            let k = grid.gamma * q + j;
            if k == l {
                continue;
            }
            let kn = k as f64 / m;
            value *= (xi - kn) / (li - kn);
        }
    }
    value
}

fn cell_sum(
    grid: &GridSpec,
    cell: &[usize],
    x: &[f64],
    mut value_of: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<f64> {
    if x.len() != grid.axes() {
        return Err(Error::DimensionMismatch {
            expected: grid.axes(),
            got: x.len(),
        });
    }
    if cell.len() != grid.axes() || cell.iter().any(|&q| q >= grid.cells_per_axis()) {
        return Err(Error::invalid(format!("cell {cell:?} is outside the grid")));
    }
    let mut total = 0.0;
    for node in grid.cell_nodes(cell) {
        total += value_of(&node)? * basis_unchecked(grid, cell, &node, x);
    }
    Ok(total)
}

/// Learned (or given) boundary heights at lattice nodes.
pub type NodeValues = BTreeMap<Vec<usize>, f64>;

/// `Σ_l g_l Q_{q,l}(x̃)` over the nodes of cell `q`, clamped to `[0, 1]`.
pub fn interpolate_cell(values: &NodeValues, grid: &GridSpec, cell: &[usize], x: &[f64]) -> Result<f64> {
    Ok(interpolate_cell_raw(values, grid, cell, x)?.clamp(0.0, 1.0))
}

/// As [`interpolate_cell`], without the clamp.
pub fn interpolate_cell_raw(values: &NodeValues, grid: &GridSpec, cell: &[usize], x: &[f64]) -> Result<f64> {
    cell_sum(grid, cell, x, |node| {
        values.get(node).copied().ok_or_else(|| Error::MissingNode(node.to_vec()))
    })
}

/// The piecewise interpolant `g(x̃) = Σ_q g_q(x̃) 1[x̃ ∈ I_q]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseBoundary {
    pub grid: GridSpec,
    /// Dense node heights, indexed by [`GridSpec::node_index`].
    node_values: Vec<f64>,
}

impl PiecewiseBoundary {
    pub fn from_values(grid: GridSpec, values: &NodeValues) -> Result<Self> {
        let mut dense = vec![0.0; grid.node_count()];
        for node in grid.nodes() {
            let v = *values.get(&node).ok_or_else(|| Error::MissingNode(node.clone()))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("node value {v} at {node:?} outside [0, 1]")));
            }
            dense[grid.node_index(&node)] = v;
        }
        Ok(PiecewiseBoundary {
            grid,
            node_values: dense,
        })
    }

    /// Samples `g` at every lattice node.
    pub fn from_function(grid: GridSpec, g: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = grid.nodes().map(|n| (n.clone(), g(&grid.node_point(&n)))).collect();
        Self::from_values(grid, &values)
    }

    pub fn node_value(&self, node: &[usize]) -> f64 {
        self.node_values[self.grid.node_index(node)]
    }

    pub fn node_values(&self) -> NodeValues {
        self.grid.nodes().map(|n| (n.clone(), self.node_value(&n))).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_raw(x).clamp(0.0, 1.0)
    }

    fn eval_raw(&self, x: &[f64]) -> f64 {
        let cell = self.grid.cell_of(x);
        cell_sum(&self.grid, &cell, x, |node| Ok(self.node_value(node))).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRun {
    pub node: Vec<usize>,
    pub seed: u64,
    pub result: ThresholdResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryResult {
    pub boundary: PiecewiseBoundary,
    pub total_queries: u64,
    pub per_node: Vec<NodeRun>,
    pub stop_reason: StopReason,
    /// Nodes whose threshold run ran out of budget.
    pub degraded_nodes: Vec<Vec<usize>>,
}

/// Learns the boundary of `labeler` to L¹ precision `cfg.epsilon`.
///
/// Every node uses confidence `cfg.delta / node_count` and its own random
/// stream `derive_seed(root_seed, [node_index])`. `cfg.max_queries` is the
/// budget of each node run.
pub fn run_boundary_learner(
    labeler: &BoundaryLabeler,
    cfg: &LearnerConfig,
    gamma: usize,
    root_seed: u64,
) -> Result<BoundaryResult> {
    cfg.validate()?;
    let grid = build_grid(cfg.epsilon, gamma, labeler.boundary.dim)?;
    let node_cfg = LearnerConfig {
        delta: cfg.delta / grid.node_count() as f64,
        ..*cfg
    };
    let mut per_node = Vec::with_capacity(grid.node_count());
    let mut values = NodeValues::new();
    let mut degraded = Vec::new();
    let mut total = 0u64;
    for (index, node) in grid.nodes().enumerate() {
        let line = labeler.restrict(&grid.node_point(&node))?;
        let seed = derive_seed(root_seed, &[index as u64]);
        let result = run_threshold_learner(&line, &node_cfg, &mut stream_rng(seed))?;
        total += result.total_queries;
        if !result.completed() {
            degraded.push(node.clone());
        }
        values.insert(node.clone(), result.theta_hat);
        per_node.push(NodeRun { node, seed, result });
    }
    Ok(BoundaryResult {
        boundary: PiecewiseBoundary::from_values(grid, &values)?,
        total_queries: total,
        per_node,
        stop_reason: if degraded.is_empty() {
            StopReason::Completed
        } else {
            StopReason::BudgetExhausted
        },
        degraded_nodes: degraded,
    })
}

/// Midpoint-rule estimate of `∫ |g1 - g2|` over `[0, 1]^{d-1}`.
pub fn l1_distance(
    g1: impl Fn(&[f64]) -> f64,
    g2: impl Fn(&[f64]) -> f64,
    dim: usize,
    resolution: usize,
) -> Result<f64> {
    if resolution < 16 {
        return Err(Error::invalid("quadrature needs at least 16 points per axis"));
    }
    if dim < 2 {
        return Err(Error::invalid(format!("dimension must be >= 2, got {dim}")));
    }
    let axes = dim - 1;
    let cells = resolution.pow(axes as u32);
    let h = 1.0 / resolution as f64;
    let mut x = vec![0.0; axes];
    let mut total = 0.0;
    for idx in 0..cells {
        let mut rest = idx;
        for xi in x.iter_mut() {
            *xi = ((rest % resolution) as f64 + 0.5) * h;
            rest /= resolution;
        }
        total += (g1(&x) - g2(&x)).abs();
    }
    Ok(total / cells as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `m`-th derivative of `phi` at 0 by central differences with step `h`.
fn central_derivative(phi: &impl Fn(f64) -> f64, m: usize, h: f64) -> f64 {
    if m == 0 {
        return phi(0.0);
    }
    let mut acc = 0.0;
    for i in 0..=m {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(m, i) * phi((m as f64 / 2.0 - i as f64) * h);
    }
    acc / h.powi(m as i32)
}

/// Samples random pairs `(x, y)` and checks the Taylor remainder bound
/// `|g(y) - T_x(y)| <= K ‖y - x‖^γ + 1e-6`, with `T_x` the order-`⌊γ⌋`
/// Taylor polynomial built from finite differences along `y - x`.
pub fn holder_check<R: Rng + ?Sized>(g: &SmoothBoundary, samples: usize, rng: &mut R) -> Result<bool> {
    if samples < 100 {
        return Err(Error::invalid("Hölder check needs at least 100 samples"));
    }
    let order = g.holder_gamma.floor() as usize;
    let axes = g.dim - 1;
    let mut factorial = 1.0;
    let factorials: Vec<f64> = (0..=order)
        .map(|m| {
            if m > 0 {
                factorial *= m as f64;
            }
            factorial
        })
        .collect();
    for _ in 0..samples {
        let x: Vec<f64> = (0..axes).map(|_| rng.gen()).collect();
        let y: Vec<f64> = (0..axes).map(|_| rng.gen()).collect();
        let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let r = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        if r == 0.0 {
            continue;
        }
        let dir: Vec<f64> = diff.iter().map(|d| d / r).collect();
        let phi = |s: f64| {
            let p: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + s * di).collect();
            g.eval(&p)
        };
        let taylor: f64 = (0..=order)
            .map(|m| {
                let h = if m <= 1 { 1e-5 } else { 1e-3 };
                central_derivative(&phi, m, h) / factorials[m] * r.powi(m as i32)
            })
            .sum();
        if (g.eval(&y) - taylor).abs() > g.holder_k * r.powf(g.holder_gamma) + 1e-6 {
            return Ok(false);
        }
    }
    Ok(true)
}
