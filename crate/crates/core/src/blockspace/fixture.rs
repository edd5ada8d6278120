//! Strongly convex quadratic fixtures with an exactly computed saddle point.

use nalgebra::{DMatrix, DVector};

use super::{BlockSpec, GroupedPoint, LinearMap, Objective, SeparableProblem};
use crate::error::{Error, Result};
use crate::rng::Stream;

#[derive(Debug, Clone)]
pub struct QuadraticFixture {
    pub problem: SeparableProblem,
    pub w_star: GroupedPoint,
    pub seed: u64,
}

/// Random fixture with `p` x-blocks, `q` y-blocks and `n` constraint rows.
///
/// Block objectives are `½ xᵀPx + qᵀx` with `P = GGᵀ/d + I`; maps are Gaussian
/// and therefore of full column rank with probability one.
pub fn make_quadratic_test_problem(p: usize, q: usize, n: usize, seed: u64) -> Result<QuadraticFixture> {
    if p == 0 || q == 0 || n == 0 {
        return Err(Error::Argument(format!("need p, q, n >= 1 (got {p}, {q}, {n})")));
    }
    let mut rng = Stream::new(seed);
    let dim = n.min(n.div_ceil(p + q) + 1);
    let block = |rng: &mut Stream| -> Result<BlockSpec> {
        let a = DMatrix::from_fn(n, dim, |_, _| rng.normal());
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.normal());
        let hessian = &g * g.transpose() / dim as f64 + DMatrix::identity(dim, dim);
        let linear = DVector::from_fn(dim, |_, _| rng.normal());
        BlockSpec::new(LinearMap::Dense(a), Objective::Quadratic { hessian, linear })
    };
    let x_blocks = (0..p).map(|_| block(&mut rng)).collect::<Result<Vec<_>>>()?;
    let y_blocks = (0..q).map(|_| block(&mut rng)).collect::<Result<Vec<_>>>()?;
    let c = DVector::from_fn(n, |_, _| rng.normal());
    let problem = SeparableProblem::new(x_blocks, y_blocks, c)?;
    let w_star = quadratic_saddle_point(&problem)?;
    Ok(QuadraticFixture { problem, w_star, seed })
}

/// `f = ½‖x‖²`, `g = ½‖y‖²`, identity maps, `x + y = c`.
pub fn make_identity_quadratic_problem(c: DVector<f64>) -> Result<QuadraticFixture> {
    let n = c.len();
    let half = || Objective::Quadratic { hessian: DMatrix::identity(n, n), linear: DVector::zeros(n) };
    let problem = SeparableProblem::new(
        vec![BlockSpec::new(LinearMap::identity(n), half())?],
        vec![BlockSpec::new(LinearMap::identity(n), half())?],
        c,
    )?;
    let w_star = quadratic_saddle_point(&problem)?;
    Ok(QuadraticFixture { problem, w_star, seed: 0 })
}

/// Solves the KKT system `P u − Mᵀλ = −q`, `M u = c` of an all-quadratic
/// problem by dense LU.
pub fn quadratic_saddle_point(problem: &SeparableProblem) -> Result<GroupedPoint> {
    let primal = problem.x_dim() + problem.y_dim();
    let n = problem.n();
    let size = primal + n;
    let mut kkt = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    let mut offset = 0;
    for (group, index, block) in problem.blocks() {
        let Objective::Quadratic { hessian, linear } = &block.objective else {
            return Err(Error::Unsupported(format!(
                "{group} block {index} is not quadratic; no closed-form saddle point"
            )));
        };
        let d = block.dim;
        let a = block.map.to_dense();
        kkt.view_mut((offset, offset), (d, d)).copy_from(hessian);
        kkt.view_mut((offset, primal), (d, n)).copy_from(&(-a.transpose()));
        kkt.view_mut((primal, offset), (n, d)).copy_from(&a);
        rhs.rows_mut(offset, d).copy_from(&(-linear));
        offset += d;
    }
    rhs.rows_mut(primal, n).copy_from(&problem.c);
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("KKT system is singular".into()))?;
    GroupedPoint::from_flat(problem, &sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockspace::{residual, validate};

    #[test]
    fn identity_fixture_origin() {
        let fx = make_identity_quadratic_problem(DVector::zeros(3)).unwrap();
        assert_eq!(fx.w_star.flatten().amax(), 0.0);
    }

    #[test]
    fn identity_fixture_unit_offset() {
        // x − λ = 0, y − λ = 0, x + y = 1  ⇒  x = y = λ = ½
        let fx = make_identity_quadratic_problem(DVector::from_element(2, 1.0)).unwrap();
        for v in fx.w_star.flatten().iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn random_fixture_is_valid_and_feasible() {
        for seed in 0..5 {
            let fx = make_quadratic_test_problem(2, 3, 9, seed).unwrap();
            assert!(validate(&fx.problem).ok);
            let r = residual(&fx.problem, &fx.w_star).unwrap();
            assert!(r.amax() < 1e-12);
        }
    }

    #[test]
    fn random_fixture_stationarity() {
        let fx = make_quadratic_test_problem(1, 2, 6, 3).unwrap();
        let w = &fx.w_star;
        for (group, index, block) in fx.problem.blocks() {
            let Objective::Quadratic { hessian, linear } = &block.objective else { unreachable!() };
            let v = &w.group(group)[index];
            let grad = hessian * v + linear - block.map.apply_transpose(&w.lambda);
            assert!(grad.amax() < 1e-12);
        }
    }

    #[test]
    fn single_row_fixture() {
        let fx = make_quadratic_test_problem(1, 1, 1, 0).unwrap();
        assert_eq!(fx.problem.x_blocks[0].dim, 1);
        assert!(validate(&fx.problem).ok);
    }
}
