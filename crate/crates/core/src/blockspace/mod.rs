//! Grouped multi-block separable model: two groups of blocks coupled by one
//! linear equality `Σ A_i x_i + Σ B_j y_j = c`.
//!
//! Block spaces are Euclidean; matrix variables are vectorized column-major so
//! the Euclidean norm coincides with the Frobenius norm.

mod fixture;
mod map;
mod objective;

use nalgebra::DVector;
use serde::Serialize;

pub use crate::error::Group;
use crate::error::{Error, Result};
pub use fixture::{
    make_identity_quadratic_problem, make_quadratic_test_problem, quadratic_saddle_point, QuadraticFixture,
};
pub use map::LinearMap;
pub use objective::{mat_of, vec_of, ConstraintSet, Objective, PSD_SLACK};

/// Relative threshold on `σ_min / σ_max` for the full-column-rank check.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub dim: usize,
    pub map: LinearMap,
    pub objective: Objective,
}

impl BlockSpec {
    pub fn new(map: LinearMap, objective: Objective) -> Result<Self> {
        let dim = map.cols();
        if dim == 0 {
            return Err(Error::Dimension("block dimension must be at least 1".into()));
        }
        objective.check_dim(dim)?;
        Ok(Self { dim, map, objective })
    }

    pub fn constraint_set(&self) -> ConstraintSet {
        self.objective.constraint_set()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableProblem {
    pub x_blocks: Vec<BlockSpec>,
    pub y_blocks: Vec<BlockSpec>,
    pub c: DVector<f64>,
}

impl SeparableProblem {
    pub fn new(x_blocks: Vec<BlockSpec>, y_blocks: Vec<BlockSpec>, c: DVector<f64>) -> Result<Self> {
        let problem = Self { x_blocks, y_blocks, c };
        problem.check_structure()?;
        Ok(problem)
    }

    fn check_structure(&self) -> Result<()> {
        if self.x_blocks.is_empty() || self.y_blocks.is_empty() {
            return Err(Error::Dimension(format!(
                "need p >= 1 and q >= 1, got p = {}, q = {}",
                self.p(),
                self.q()
            )));
        }
        for (group, index, block) in self.blocks() {
            if block.map.rows() != self.n() {
                return Err(Error::BlockDimension {
                    group,
                    index,
                    expected: self.n(),
                    got: block.map.rows(),
                });
            }
            if block.map.cols() != block.dim {
                return Err(Error::BlockDimension {
                    group,
                    index,
                    expected: block.dim,
                    got: block.map.cols(),
                });
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.x_blocks.len()
    }

    pub fn q(&self) -> usize {
        self.y_blocks.len()
    }

    /// Row dimension shared by every block map.
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn blocks(&self) -> impl Iterator<Item = (Group, usize, &BlockSpec)> {
        self.x_blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (Group::X, i, b))
            .chain(self.y_blocks.iter().enumerate().map(|(j, b)| (Group::Y, j, b)))
    }

    pub fn group(&self, g: Group) -> &[BlockSpec] {
        match g {
            Group::X => &self.x_blocks,
            Group::Y => &self.y_blocks,
        }
    }

    pub fn x_dim(&self) -> usize {
        self.x_blocks.iter().map(|b| b.dim).sum()
    }

    pub fn y_dim(&self) -> usize {
        self.y_blocks.iter().map(|b| b.dim).sum()
    }

    /// Length of the flattened `w = (x, y, λ)`.
    pub fn total_dim(&self) -> usize {
        self.x_dim() + self.y_dim() + self.n()
    }
}

/// Full iterate `w = (x₁..x_p, y₁..y_q, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedPoint {
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub lambda: DVector<f64>,
}

impl GroupedPoint {
    pub fn zeros(problem: &SeparableProblem) -> Self {
        Self {
            x: problem.x_blocks.iter().map(|b| DVector::zeros(b.dim)).collect(),
            y: problem.y_blocks.iter().map(|b| DVector::zeros(b.dim)).collect(),
            lambda: DVector::zeros(problem.n()),
        }
    }

    pub fn group(&self, g: Group) -> &[DVector<f64>] {
        match g {
            Group::X => &self.x,
            Group::Y => &self.y,
        }
    }

    pub fn check_dims(&self, problem: &SeparableProblem) -> Result<()> {
        for g in [Group::X, Group::Y] {
            let blocks = problem.group(g);
            let vals = self.group(g);
            if blocks.len() != vals.len() {
                return Err(Error::Dimension(format!(
                    "point has {} {g} blocks, problem has {}",
                    vals.len(),
                    blocks.len()
                )));
            }
            for (index, (b, v)) in blocks.iter().zip(vals).enumerate() {
                if b.dim != v.len() {
                    return Err(Error::BlockDimension {
                        group: g,
                        index,
                        expected: b.dim,
                        got: v.len(),
                    });
                }
            }
        }
        if self.lambda.len() != problem.n() {
            return Err(Error::Dimension(format!(
                "multiplier has length {}, expected {}",
                self.lambda.len(),
                problem.n()
            )));
        }
        Ok(())
    }

    pub fn flatten(&self) -> DVector<f64> {
        let len = self.x.iter().chain(&self.y).map(|v| v.len()).sum::<usize>() + self.lambda.len();
        let mut out = Vec::with_capacity(len);
        for v in self.x.iter().chain(&self.y) {
            out.extend_from_slice(v.as_slice());
        }
        out.extend_from_slice(self.lambda.as_slice());
        DVector::from_vec(out)
    }

    pub fn from_flat(problem: &SeparableProblem, flat: &DVector<f64>) -> Result<Self> {
        if flat.len() != problem.total_dim() {
            return Err(Error::Dimension(format!(
                "flat vector has length {}, expected {}",
                flat.len(),
                problem.total_dim()
            )));
        }
        let mut offset = 0;
        let mut take = |len: usize| {
            let v = flat.rows(offset, len).into_owned();
            offset += len;
            v
        };
        let x = problem.x_blocks.iter().map(|b| take(b.dim)).collect();
        let y = problem.y_blocks.iter().map(|b| take(b.dim)).collect();
        let lambda = take(problem.n());
        Ok(Self { x, y, lambda })
    }

    /// `self + alpha · other`
    pub fn add_scaled(&mut self, alpha: f64, other: &GroupedPoint) {
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            a.axpy(alpha, b, 1.0);
        }
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            a.axpy(alpha, b, 1.0);
        }
        self.lambda.axpy(alpha, &other.lambda, 1.0);
    }

    pub fn scaled(&self, alpha: f64) -> GroupedPoint {
        GroupedPoint {
            x: self.x.iter().map(|v| v * alpha).collect(),
            y: self.y.iter().map(|v| v * alpha).collect(),
            lambda: &self.lambda * alpha,
        }
    }

    pub fn zeros_like(&self) -> GroupedPoint {
        self.scaled(0.0)
    }

    /// Largest entrywise change over all primal blocks (the IER metric).
    pub fn primal_max_abs_diff(&self, other: &GroupedPoint) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// `Σ_i map_i · v_i`, accumulated left to right.
pub fn group_image(blocks: &[BlockSpec], values: &[DVector<f64>], n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (b, v) in blocks.iter().zip(values) {
        b.map.apply_add(v, &mut out);
    }
    out
}

/// `Σ A_i x_i + Σ B_j y_j − c`.
pub fn residual(problem: &SeparableProblem, point: &GroupedPoint) -> Result<DVector<f64>> {
    point.check_dims(problem)?;
    let mut r = -&problem.c;
    for (b, v) in problem.x_blocks.iter().zip(&point.x) {
        b.map.apply_add(v, &mut r);
    }
    for (b, v) in problem.y_blocks.iter().zip(&point.y) {
        b.map.apply_add(v, &mut r);
    }
    Ok(r)
}

/// `h(u) = Σ f_i(x_i) + Σ g_j(y_j)`.
pub fn objective_value(problem: &SeparableProblem, point: &GroupedPoint) -> Result<f64> {
    point.check_dims(problem)?;
    let mut total = 0.0;
    for (group, index, block) in problem.blocks() {
        let v = &point.group(group)[index];
        total += block.objective.eval(v).map_err(|e| Error::Oracle {
            group,
            index,
            source: Box::new(e),
        })?;
    }
    Ok(total)
}

/// `h(u) − ⟨λ, r⟩ + (β/2)‖r‖²` with `r` the constraint residual.
pub fn augmented_lagrangian(
    problem: &SeparableProblem,
    point: &GroupedPoint,
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Argument(format!("penalty must be positive, got {beta}")));
    }
    let h = objective_value(problem, point)?;
    let r = residual(problem, point)?;
    Ok(h + penalty_terms(&point.lambda, &r, beta))
}

pub(crate) fn penalty_terms(lambda: &DVector<f64>, r: &DVector<f64>, beta: f64) -> f64 {
    -lambda.dot(r) + 0.5 * beta * r.norm_squared()
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockStatus {
    pub group: Group,
    pub index: usize,
    pub dim: usize,
    pub rows: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub dims_ok: bool,
    pub rank_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub blocks: Vec<BlockStatus>,
    pub failures: Vec<String>,
}

/// Per-block full-column-rank and dimension checks.
pub fn validate(problem: &SeparableProblem) -> ValidationReport {
    let mut failures = Vec::new();
    if problem.p() == 0 || problem.q() == 0 {
        failures.push(format!("need p, q >= 1 (p = {}, q = {})", problem.p(), problem.q()));
    }
    let mut blocks = Vec::new();
    for (group, index, block) in problem.blocks() {
        let rows = block.map.rows();
        let dims_ok = block.dim >= 1
            && block.map.cols() == block.dim
            && rows == problem.n()
            && block.objective.check_dim(block.dim).is_ok();
        if !dims_ok {
            failures.push(format!("{group} block {index}: inconsistent dimensions"));
        }
        let (sigma_min, sigma_max) = block.map.singular_value_range().unwrap_or((f64::NAN, f64::NAN));
        let rank_ok = sigma_max > 0.0 && sigma_min > RANK_TOL * sigma_max;
        if !rank_ok {
            failures.push(format!(
                "{group} block {index}: map lacks full column rank (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e})"
            ));
        }
        blocks.push(BlockStatus {
            group,
            index,
            dim: block.dim,
            rows,
            sigma_min,
            sigma_max,
            dims_ok,
            rank_ok,
        });
    }
    ValidationReport { ok: failures.is_empty(), blocks, failures }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn half_square() -> Objective {
        Objective::Quadratic { hessian: DMatrix::identity(1, 1), linear: DVector::zeros(1) }
    }

    pub(crate) fn scalar_problem(c: f64) -> SeparableProblem {
        SeparableProblem::new(
            vec![BlockSpec::new(LinearMap::identity(1), half_square()).unwrap()],
            vec![BlockSpec::new(LinearMap::identity(1), half_square()).unwrap()],
            DVector::from_element(1, c),
        )
        .unwrap()
    }

    fn scalar_point(x: f64, y: f64, l: f64) -> GroupedPoint {
        GroupedPoint {
            x: vec![DVector::from_element(1, x)],
            y: vec![DVector::from_element(1, y)],
            lambda: DVector::from_element(1, l),
        }
    }

    #[test]
    fn scalar_residual_objective_lagrangian() {
        let pr = scalar_problem(0.0);
        let w = scalar_point(0.5, 0.25, 1.0);
        assert_eq!(residual(&pr, &w).unwrap()[0], 0.75);
        assert_eq!(objective_value(&pr, &w).unwrap(), 0.15625);
        assert!((augmented_lagrangian(&pr, &w, 1.0).unwrap() - (-0.3125)).abs() < 1e-15);
    }

    #[test]
    fn zero_point_residual_is_minus_c() {
        let pr = scalar_problem(2.5);
        let r = residual(&pr, &GroupedPoint::zeros(&pr)).unwrap();
        assert_eq!(r[0], -2.5);
    }

    #[test]
    fn quadratic_minimizers_have_zero_objective() {
        let shifted = Objective::Quadratic {
            hessian: DMatrix::identity(1, 1),
            linear: DVector::from_element(1, -1.0),
        };
        let pr = SeparableProblem::new(
            vec![BlockSpec::new(LinearMap::identity(1), shifted).unwrap()],
            vec![BlockSpec::new(LinearMap::identity(1), half_square()).unwrap()],
            DVector::zeros(1),
        )
        .unwrap();
        // ½‖x − 1‖² = ½x² − x + ½; the constant is dropped, so h(1, 0) = −½
        let h = objective_value(&pr, &scalar_point(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(h + 0.5, 0.0);
    }

    #[test]
    fn dimension_mismatch_names_block() {
        let pr = scalar_problem(0.0);
        let mut w = scalar_point(0.0, 0.0, 0.0);
        w.y[0] = DVector::zeros(2);
        match residual(&pr, &w) {
            Err(Error::BlockDimension { group: Group::Y, index: 0, expected: 1, got: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_flags_zero_column() {
        let good = scalar_problem(0.0);
        assert!(validate(&good).ok);
        let mut bad = good.clone();
        bad.x_blocks[0].map = LinearMap::Dense(DMatrix::zeros(1, 1));
        let rep = validate(&bad);
        assert!(!rep.ok);
        assert!(!rep.blocks[0].rank_ok);
        assert!(rep.blocks[1].rank_ok);
    }

    #[test]
    fn validate_tall_map() {
        let obj = Objective::Quadratic { hessian: DMatrix::identity(2, 2), linear: DVector::zeros(2) };
        let a = LinearMap::Dense(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]));
        let pr = SeparableProblem::new(
            vec![BlockSpec::new(a, obj.clone()).unwrap()],
            vec![BlockSpec::new(LinearMap::Dense(DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 0.0, 0.0])), obj).unwrap()],
            DVector::zeros(3),
        )
        .unwrap();
        assert!(validate(&pr).ok);
    }

    #[test]
    fn flatten_roundtrip() {
        let pr = scalar_problem(0.0);
        let w = scalar_point(1.0, 2.0, 3.0);
        assert_eq!(GroupedPoint::from_flat(&pr, &w.flatten()).unwrap(), w);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn point(problem: &SeparableProblem, seed: u64) -> GroupedPoint {
        let mut rng = crate::rng::Stream::new(seed);
        let flat = DVector::from_fn(problem.total_dim(), |_, _| rng.normal());
        GroupedPoint::from_flat(problem, &flat).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn residual_is_affine(seed in 0u64..1000, a in 0u64..1000, b in 0u64..1000, alpha in -2.0f64..2.0) {
            let fx = make_quadratic_test_problem(2, 2, 6, seed).unwrap();
            let (w1, w2) = (point(&fx.problem, a), point(&fx.problem, b + 1000));
            let mut mix = w1.scaled(alpha);
            mix.add_scaled(1.0 - alpha, &w2);
            let lhs = residual(&fx.problem, &mix).unwrap();
            let rhs = residual(&fx.problem, &w1).unwrap() * alpha + residual(&fx.problem, &w2).unwrap() * (1.0 - alpha);
            prop_assert!((lhs - &rhs).amax() <= 1e-12 * (1.0 + rhs.amax()));
        }

        #[test]
        fn penalty_does_not_depend_on_objectives(seed in 0u64..1000, a in 0u64..1000, beta in 0.01f64..10.0) {
            let fx = make_quadratic_test_problem(1, 2, 5, seed).unwrap();
            let mut other = fx.problem.clone();
            for block in other.x_blocks.iter_mut().chain(other.y_blocks.iter_mut()) {
                let d = block.dim;
                block.objective = Objective::L1 { weight: 0.3 };
                prop_assert_eq!(block.dim, d);
            }
            let w = point(&fx.problem, a);
            let pen = |p: &SeparableProblem| augmented_lagrangian(p, &w, beta).unwrap() - objective_value(p, &w).unwrap();
            let (x, y) = (pen(&fx.problem), pen(&other));
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }

        #[test]
        fn flatten_round_trip(seed in 0u64..1000, a in 0u64..1000) {
            let fx = make_quadratic_test_problem(3, 1, 7, seed).unwrap();
            let w = point(&fx.problem, a);
            prop_assert_eq!(GroupedPoint::from_flat(&fx.problem, &w.flatten()).unwrap(), w);
        }
    }
}
