//! Linear programs over stationary edge flows.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use super::model::EdgeModel;

/// Adds flow variables with conservation and moment constraints
/// `sum phi_k F = gamma_k * scale` (or `= gamma_k` without a scale variable).
fn add_flows(
    problem: &mut Problem,
    model: &EdgeModel,
    targets: &[f64],
    objective: impl Fn(usize, usize) -> f64,
    scale: Option<Variable>,
) -> Vec<Vec<Variable>> {
    let flow: Vec<Vec<Variable>> = (0..model.graph.size())
        .map(|i| {
            (0..model.graph.successors(i).len())
                .map(|e| problem.add_var(objective(i, e), (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    let mut balance: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); model.graph.size()];
    for (i, e, j) in model.edges() {
        if i != j {
            balance[i].push((flow[i][e], 1.0));
            balance[j].push((flow[i][e], -1.0));
        }
    }
    for row in balance.into_iter().filter(|r| !r.is_empty()) {
        problem.add_constraint(row, ComparisonOp::Eq, 0.0);
    }
    for (k, &g) in targets.iter().enumerate() {
        let mut expr: Vec<(Variable, f64)> = model
            .edges()
            .filter(|&(i, e, _)| model.phi[k][i][e] != 0.0)
            .map(|(i, e, _)| (flow[i][e], model.phi[k][i][e]))
            .collect();
        match scale {
            Some(s) => {
                expr.push((s, -g));
                problem.add_constraint(expr, ComparisonOp::Eq, 0.0);
            }
            None => problem.add_constraint(expr, ComparisonOp::Eq, g),
        }
    }
    flow
}

fn total(flow: &[Vec<Variable>]) -> Vec<(Variable, f64)> {
    flow.iter().flatten().map(|&v| (v, 1.0)).collect()
}

/// Range `[c_lo, c_hi]` of total masses of sub-probability flows hitting the targets,
/// or `None` when no flow of mass at most one does.
pub(crate) fn mass_range(model: &EdgeModel, targets: &[f64]) -> Option<(f64, f64)> {
    let solve = |dir| {
        let mut problem = Problem::new(dir);
        let flow = add_flows(&mut problem, model, targets, |_, _| 1.0, None);
        problem.add_constraint(total(&flow), ComparisonOp::Le, 1.0);
        problem.solve().ok().map(|s| s.objective())
    };
    let lo = solve(OptimizationDirection::Minimize)?;
    let hi = solve(OptimizationDirection::Maximize)?;
    Some((lo.max(0.0), hi.min(1.0)))
}

/// Edges used by some flow of total mass `mass` hitting the targets, plus a
/// normalized flow supported on exactly those edges.
///
/// Works in the cone `sum F = mass * tau`, `sum phi_k F = gamma_k * tau`, where
/// every edge in the maximal support can be made to carry at least one unit.
pub(crate) fn maximal_support(
    model: &EdgeModel,
    targets: &[f64],
    mass: f64,
) -> Option<(Vec<Vec<bool>>, Vec<Vec<f64>>)> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let tau = problem.add_var(0.0, (0.0, f64::INFINITY));
    let flow = add_flows(&mut problem, model, targets, |_, _| 0.0, Some(tau));
    let mut sum = total(&flow);
    sum.push((tau, -mass));
    problem.add_constraint(sum, ComparisonOp::Eq, 0.0);
    for &f in flow.iter().flatten() {
        let y = problem.add_var(1.0, (0.0, 1.0));
        problem.add_constraint([(y, 1.0), (f, -1.0)], ComparisonOp::Le, 0.0);
    }
    let sol = problem.solve().ok()?;
    let t = sol[tau];
    if t <= 1e-9 {
        return None;
    }
    let keep: Vec<Vec<bool>> = flow
        .iter()
        .map(|row| row.iter().map(|&f| sol[f] > 0.5).collect())
        .collect();
    let normalized = flow
        .iter()
        .zip(&keep)
        .map(|(row, kr)| {
            row.iter()
                .zip(kr)
                .map(|(&f, &k)| if k { sol[f] / (t * mass) } else { 0.0 })
                .collect()
        })
        .collect();
    Some((keep, normalized))
}

/// A probability flow maximizing `sum grad * F` subject to the targets.
pub(crate) fn linear_oracle(
    model: &EdgeModel,
    targets: &[f64],
    grad: &[Vec<f64>],
) -> Option<Vec<Vec<f64>>> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let flow = add_flows(&mut problem, model, targets, |i, e| grad[i][e], None);
    problem.add_constraint(total(&flow), ComparisonOp::Eq, 1.0);
    let sol = problem.solve().ok()?;
    Some(
        flow.iter()
            .map(|row| row.iter().map(|&f| sol[f].max(0.0)).collect())
            .collect(),
    )
}
