//! Dimension formulas for Birkhoff level sets.
//!
//! `alpha3` maximizes `h / lambda` over Markov measures meeting the moment
//! targets, `alpha4` also lets a fraction `1 - c` of the mass escape with
//! entropy `delta_inf` and expansion `L`, and `freq_spectrum` picks the formula
//! matching the map's tail behaviour. All optimization runs on a finite
//! truncation and is exact there because every potential is locally constant.

mod dual;
mod lp;
mod model;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infinity::max_entropy_certificate;
use crate::maps::{MapFamily, MapSystem, TailRegime};
use crate::measure::MarkovMeasure;
use crate::potential::Potential;
use crate::thermo::{s_infinity, SInfOptions};

use dual::{golden_max, maximize_ratio, DualSettings, Optimum, Ratio};
use model::EdgeModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Max moment violation accepted from the dual solver.
    pub constraint_tol: f64,
    /// Dinkelbach stopping threshold on `sup (h - t lambda)`.
    pub residual_tol: f64,
    /// Final width of the golden-section search on the mass `c`.
    pub mass_tol: f64,
    pub max_newton: usize,
    pub max_dinkelbach: usize,
    /// Starting multipliers for the dual solver; zeros when absent.
    pub initial_multipliers: Option<Vec<f64>>,
    /// Truncation used for the `delta_inf` certificate.
    pub delta_k: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            constraint_tol: 1e-10,
            residual_tol: 1e-12,
            mass_tol: 1e-4,
            max_newton: 100,
            max_dinkelbach: 100,
            initial_multipliers: None,
            delta_k: 160,
        }
    }
}

impl SolverOptions {
    fn dual(&self) -> DualSettings {
        DualSettings {
            gradient_tol: self.constraint_tol,
            residual_tol: self.residual_tol,
            max_newton: self.max_newton,
            max_dinkelbach: self.max_dinkelbach,
            initial_q: self.initial_multipliers.clone(),
        }
    }
}

/// Potentials, targets and the truncation they are solved on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumQuery {
    pub map: MapFamily,
    pub potentials: Vec<Potential>,
    pub targets: Vec<f64>,
    pub k: usize,
    #[serde(default)]
    pub options: SolverOptions,
}

impl SpectrumQuery {
    pub fn new(map: MapFamily, potentials: Vec<Potential>, targets: Vec<f64>, k: usize) -> Self {
        SpectrumQuery {
            map,
            potentials,
            targets,
            k,
            options: SolverOptions::default(),
        }
    }

    /// Digit-frequency query: `1_{I_i}` for every symbol of the truncation, with
    /// targets padded by zeros.
    pub fn frequencies(map: MapFamily, gamma: &[f64], k: usize) -> Result<Self> {
        let size = truncation(&MapSystem::new(map.clone())?, k)?.size();
        if gamma.len() > size {
            return Err(Error::InvalidArgument(format!(
                "{} frequencies given but the truncation has {size} symbols",
                gamma.len()
            )));
        }
        let potentials = (1..=size).map(Potential::indicator).collect();
        let mut targets = gamma.to_vec();
        targets.resize(size, 0.0);
        Ok(Self::new(map, potentials, targets, k))
    }

    fn validate(&self) -> Result<MapSystem> {
        if self.potentials.len() != self.targets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} potentials but {} targets",
                self.potentials.len(),
                self.targets.len()
            )));
        }
        if let Some(g) = self.targets.iter().find(|g| !g.is_finite()) {
            return Err(Error::InvalidArgument(format!("target {g} is not finite")));
        }
        MapSystem::new(self.map.clone())
    }

    fn model(&self, map: &MapSystem) -> Result<EdgeModel> {
        EdgeModel::build(map, &truncation(map, self.k)?, &self.potentials)
    }
}

/// The first `k` symbols, or the whole alphabet when it is finite.
fn truncation(map: &MapSystem, k: usize) -> Result<crate::shift::FiniteSubshift> {
    map.derive_transitions(map.alphabet_size().unwrap_or(k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    /// Realized by a probability measure.
    Z0,
    /// Realized only by a sub-probability measure, the rest escaping.
    #[serde(rename = "Z_minus_Z0")]
    ZMinusZ0,
    #[serde(rename = "not_in_Z")]
    NotInZ,
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub tag: Membership,
    /// Feasible total masses of flows on the truncation meeting the targets.
    pub mass_range: Option<(f64, f64)>,
    /// The verdict was reached on a truncation of an infinite alphabet.
    pub truncation_dependent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Multipliers {
    pub t: f64,
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchValue {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvergenceReport {
    pub k: usize,
    pub dinkelbach_iterations: usize,
    pub newton_iterations: usize,
    /// Max `|int phi_i d mu - gamma_i / c|` of the optimizer.
    pub constraint_residual: f64,
    pub dinkelbach_residual: f64,
    pub fallback: bool,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    pub value: f64,
    /// Mass `c` of the optimizing measure; `1` for probability measures.
    pub mass: f64,
    pub entropy: f64,
    pub lyapunov: f64,
    pub optimizer: Option<MarkovMeasure>,
    pub multipliers: Multipliers,
    pub membership: Membership,
    pub branches: Vec<BranchValue>,
    pub report: ConvergenceReport,
}

impl SpectrumResult {
    fn branch(&self, name: &str) -> Option<f64> {
        self.branches
            .iter()
            .find(|b| b.name == name)
            .map(|b| b.value)
    }

    /// Value of a named branch (`alpha3`, `alpha4`, `s_inf`, `dim_transient`, ...).
    pub fn branch_value(&self, name: &str) -> Option<f64> {
        self.branch(name)
    }
}

fn escape_allowed(map: &MapSystem, potentials: &[Potential]) -> bool {
    map.alphabet_size().is_none() && potentials.iter().all(Potential::vanishes_at_infinity)
}

pub fn membership(q: &SpectrumQuery) -> Result<MembershipReport> {
    let map = q.validate()?;
    let model = q.model(&map)?;
    Ok(classify(&map, &model, q))
}

fn classify(map: &MapSystem, model: &EdgeModel, q: &SpectrumQuery) -> MembershipReport {
    let range = lp::mass_range(model, &q.targets);
    let tag = match range {
        Some((_, hi)) if hi >= 1.0 - 1e-9 => Membership::Z0,
        Some(_) if escape_allowed(map, &q.potentials) => Membership::ZMinusZ0,
        _ => Membership::NotInZ,
    };
    MembershipReport {
        tag,
        mass_range: range,
        truncation_dependent: map.alphabet_size().is_none(),
    }
}

/// A solved fractional program on the support of the feasible flows.
struct Solved {
    opt: Optimum,
    optimizer: MarkovMeasure,
    /// Multipliers in the query's potential order.
    q: Vec<f64>,
    constraint_residual: f64,
}

/// Maximizes `ratio` over probability measures with `int phi = gamma`.
fn solve_targets(
    model: &EdgeModel,
    gamma: &[f64],
    ratio: Ratio,
    s: &DualSettings,
) -> Result<Solved> {
    let (keep, start) = lp::maximal_support(model, gamma, 1.0)
        .ok_or_else(|| Error::Infeasible("no probability measure meets the targets".into()))?;
    let support = model
        .support(&keep)?
        .ok_or_else(|| Error::Infeasible("feasible support has no cycle".into()))?;
    // Constraints that vanish on the support with a zero target are inert.
    let which: Vec<usize> = (0..gamma.len())
        .filter(|&k| gamma[k] != 0.0 || support.model.phi[k].iter().flatten().any(|&v| v != 0.0))
        .collect();
    let pieces = model.components(&keep)?;
    if pieces.len() == 1 {
        let piece = pieces.into_iter().next().unwrap();
        let reduced = piece.model.select_potentials(&which);
        let g: Vec<f64> = which.iter().map(|&k| gamma[k]).collect();
        let mut local = s.clone();
        local.initial_q = s.initial_q.as_ref().map(|q0| {
            which
                .iter()
                .map(|&k| q0.get(k).copied().unwrap_or(0.0))
                .collect()
        });
        let opt = maximize_ratio(&reduced, &g, ratio, Some(&piece.pick(&start)), &local)?;
        return finish(&piece.model, gamma, opt, &which);
    }
    // A ratio of affine functions of the mixture weights peaks at a single
    // component, so without active constraints the best component is optimal.
    let mut best: Option<Solved> = None;
    for piece in &pieces {
        if let Ok(c) = solve_targets(&piece.model, gamma, ratio, s) {
            if best.as_ref().map_or(true, |b| c.opt.t > b.opt.t) {
                best = Some(c);
            }
        }
    }
    if which.is_empty() {
        return best.ok_or_else(|| Error::Infeasible("no component meets the targets".into()));
    }
    let opt = dual::frank_wolfe(&support.model, gamma, ratio, Some(&support.pick(&start)))?;
    match best {
        Some(b) if b.opt.t >= opt.t => Ok(b),
        _ => finish(
            &support.model,
            gamma,
            opt,
            &(0..gamma.len()).collect::<Vec<_>>(),
        ),
    }
}

fn finish(model: &EdgeModel, gamma: &[f64], opt: Optimum, which: &[usize]) -> Result<Solved> {
    let mut q = vec![0.0; gamma.len()];
    for (qi, &k) in opt.q.iter().zip(which) {
        q[k] = *qi;
    }
    let (_, _, moments) = model.statistics(&opt.flow);
    let constraint_residual = moments
        .iter()
        .zip(gamma)
        .map(|(m, g)| (m - g).abs())
        .fold(0.0, f64::max);
    let optimizer = model.measure(&opt.flow)?;
    Ok(Solved {
        opt,
        optimizer,
        q,
        constraint_residual,
    })
}

fn report_from(k: usize, solved: &Solved) -> ConvergenceReport {
    let mut flags = Vec::new();
    if solved.opt.fallback {
        flags.push("frank_wolfe_fallback".to_string());
    }
    ConvergenceReport {
        k,
        dinkelbach_iterations: solved.opt.dinkelbach_iterations,
        newton_iterations: solved.opt.newton_iterations,
        constraint_residual: solved.constraint_residual,
        dinkelbach_residual: solved.opt.residual.abs(),
        fallback: solved.opt.fallback,
        flags,
    }
}

/// `sup h / lambda` over probability Markov measures on the truncation meeting the targets.
pub fn alpha3(q: &SpectrumQuery) -> Result<SpectrumResult> {
    let map = q.validate()?;
    let model = q.model(&map)?;
    let mem = classify(&map, &model, q);
    if mem.tag != Membership::Z0 {
        return Err(Error::Infeasible(format!(
            "targets are {:?}, not realizable by a probability measure",
            mem.tag
        )));
    }
    let solved = solve_targets(&model, &q.targets, Ratio::PLAIN, &q.options.dual())?;
    let mut report = report_from(q.k, &solved);
    if mem.truncation_dependent {
        report.flags.push("truncated".to_string());
    }
    let value = solved.opt.t;
    Ok(SpectrumResult {
        value,
        mass: 1.0,
        entropy: solved.opt.entropy,
        lyapunov: solved.opt.lyapunov,
        optimizer: Some(solved.optimizer),
        multipliers: Multipliers {
            t: value,
            q: solved.q,
        },
        membership: mem.tag,
        branches: vec![BranchValue {
            name: "alpha3".into(),
            value,
        }],
        report,
    })
}

/// `sup (c h + (1 - c) delta_inf) / (c lambda + (1 - c) L)` over masses `c` and
/// probability measures meeting `gamma / c`; at `c = 0` (only for `gamma = 0`)
/// the value is `delta_inf / L`.
pub fn alpha4(q: &SpectrumQuery, delta_inf: f64, l: f64) -> Result<SpectrumResult> {
    let map = q.validate()?;
    match map.tail_regime() {
        TailRegime::UnboundedDerivative => {
            return Err(Error::Unsupported(
                "alpha4 needs a finite L = sup log|T'|".into(),
            ))
        }
        TailRegime::Finite => {}
        TailRegime::BoundedDerivative => {
            if !q.potentials.iter().all(Potential::vanishes_at_infinity) {
                return Err(Error::InvalidArgument(
                    "alpha4 needs potentials vanishing at infinity".into(),
                ));
            }
        }
    }
    if !(l > 0.0) || !delta_inf.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need L > 0 and finite delta_inf, got {l}, {delta_inf}"
        )));
    }
    let model = q.model(&map)?;
    let mem = classify(&map, &model, q);
    let (c_lo, c_hi) = match (mem.tag, mem.mass_range) {
        (Membership::NotInZ, _) | (_, None) => {
            return Err(Error::Infeasible("targets are not in Z".into()))
        }
        (_, Some(r)) if map.alphabet_size().is_some() => (r.1.max(r.0), r.1),
        (_, Some(r)) => r,
    };
    let settings = q.options.dual();
    let zero_target = q.targets.iter().all(|&g| g == 0.0);
    let solve_at = |c: f64| -> Option<Solved> {
        if c <= 0.0 {
            return None;
        }
        let gamma: Vec<f64> = q.targets.iter().map(|g| g / c).collect();
        let ratio = Ratio {
            a: c,
            b: (1.0 - c) * delta_inf,
            d: (1.0 - c) * l,
        };
        solve_targets(&model, &gamma, ratio, &settings).ok()
    };
    let value_at = |c: f64| -> f64 {
        if c <= 1e-12 {
            return if zero_target {
                delta_inf / l
            } else {
                f64::NEG_INFINITY
            };
        }
        solve_at(c).map_or(f64::NEG_INFINITY, |s| s.opt.t)
    };
    let mut candidates = vec![c_hi, c_lo];
    if c_hi - c_lo > q.options.mass_tol {
        candidates.push(golden_max(value_at, c_lo, c_hi, q.options.mass_tol));
    }
    let mut best: Option<(f64, f64)> = None;
    for &c in &candidates {
        let v = value_at(c);
        if v.is_finite() && best.map_or(true, |(_, bv)| v > bv + 1e-15) {
            best = Some((c, v));
        }
    }
    let (c, value) = best.ok_or_else(|| Error::Infeasible("no feasible mass".into()))?;
    let mut flags = vec![];
    if mem.truncation_dependent {
        flags.push("truncated".to_string());
    }
    let mut branches = vec![BranchValue {
        name: "alpha4".into(),
        value,
    }];
    if zero_target {
        branches.push(BranchValue {
            name: "delta_inf_over_L".into(),
            value: delta_inf / l,
        });
    }
    if c <= 1e-12 {
        return Ok(SpectrumResult {
            value,
            mass: 0.0,
            entropy: delta_inf,
            lyapunov: l,
            optimizer: None,
            multipliers: Multipliers {
                t: value,
                q: vec![0.0; q.targets.len()],
            },
            membership: mem.tag,
            branches,
            report: ConvergenceReport {
                k: q.k,
                flags,
                ..Default::default()
            },
        });
    }
    let solved =
        solve_at(c).ok_or_else(|| Error::NoConvergence("optimal mass lost on re-solve".into()))?;
    let mut report = report_from(q.k, &solved);
    report.flags.extend(flags);
    Ok(SpectrumResult {
        value,
        mass: c,
        entropy: solved.opt.entropy,
        lyapunov: solved.opt.lyapunov,
        optimizer: Some(solved.optimizer),
        multipliers: Multipliers {
            t: value,
            q: solved.q,
        },
        membership: mem.tag,
        branches,
        report,
    })
}

/// `dim Lambda_T` for `F_lambda`: `-log 4 / log(lambda (1 - lambda))` for `lambda <= 1/2`, else 1.
pub fn transient_dimension(map: &MapFamily) -> Result<f64> {
    match map {
        MapFamily::FLambda { lambda } if *lambda > 0.0 && *lambda < 1.0 => {
            if *lambda <= 0.5 {
                Ok(-(4f64.ln()) / (lambda * (1.0 - lambda)).ln())
            } else {
                Ok(1.0)
            }
        }
        MapFamily::FLambda { lambda } => Err(Error::InvalidMap(format!(
            "lambda = {lambda} not in (0, 1)"
        ))),
        _ => Err(Error::Unsupported(
            "transient dimension has a closed form only for f_lambda".into(),
        )),
    }
}

/// Settings for [`freq_spectrum`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FreqOptions {
    pub k: usize,
    pub solver: SolverOptions,
    pub s_inf: SInfOptions,
}

impl Default for FreqOptions {
    fn default() -> Self {
        FreqOptions {
            k: 30,
            solver: SolverOptions::default(),
            s_inf: SInfOptions::default(),
        }
    }
}

fn empty_result(
    k: usize,
    tag: Membership,
    branches: Vec<BranchValue>,
    value: f64,
    flag: &str,
) -> SpectrumResult {
    SpectrumResult {
        value,
        mass: 0.0,
        entropy: 0.0,
        lyapunov: 0.0,
        optimizer: None,
        multipliers: Multipliers {
            t: value,
            q: Vec::new(),
        },
        membership: tag,
        branches,
        report: ConvergenceReport {
            k,
            flags: vec![flag.to_string()],
            ..Default::default()
        },
    }
}

/// Dimension of the level set of `q`, by the formula matching the map's tail.
///
/// Finite alphabets give `alpha3`; Gauss-type maps give `max{s_inf, alpha3}` on
/// `Z0` and `s_inf` on `Z \ Z0`; bounded-derivative maps give `alpha4` with
/// `delta_inf` certified at truncation `q.options.delta_k`. When no formula
/// applies the branch values are reported and `value` is NaN.
pub fn dimension(q: &SpectrumQuery, s_inf_opts: &SInfOptions) -> Result<SpectrumResult> {
    let sys = q.validate()?;
    let mem = membership(q)?;
    if mem.tag == Membership::NotInZ {
        return Ok(empty_result(q.k, mem.tag, vec![], 0.0, "empty_level_set"));
    }
    match sys.tail_regime() {
        TailRegime::Finite => alpha3(q),
        TailRegime::UnboundedDerivative => {
            let s = s_infinity(&sys, s_inf_opts)?;
            let s_branch = BranchValue {
                name: "s_inf".into(),
                value: s.value,
            };
            if mem.tag == Membership::ZMinusZ0 {
                let mut r = empty_result(q.k, mem.tag, vec![s_branch], s.value, "truncated");
                r.report.flags.extend(s.warnings);
                return Ok(r);
            }
            let mut r = alpha3(q)?;
            r.branches.push(s_branch);
            r.report.flags.extend(s.warnings);
            if s.value > r.value {
                r.value = s.value;
                r.report.flags.push("s_inf_dominates".into());
            }
            Ok(r)
        }
        TailRegime::BoundedDerivative => {
            let cert = max_entropy_certificate(&sys, q.options.delta_k)?;
            let delta = BranchValue {
                name: "delta_inf".into(),
                value: cert.entropy,
            };
            if !q.potentials.iter().all(Potential::vanishes_at_infinity) {
                let mut r = if mem.tag == Membership::Z0 {
                    alpha3(q)?
                } else {
                    empty_result(q.k, mem.tag, vec![], f64::NAN, "truncated")
                };
                r.value = f64::NAN;
                r.branches.push(delta);
                r.report.flags.push("no_dimension_formula".into());
                return Ok(r);
            }
            let l = sys
                .sup_log_derivative()
                .expect("bounded regime has finite L");
            let mut r = alpha4(q, cert.entropy, l)?;
            r.branches.push(delta);
            Ok(r)
        }
    }
}

/// Dimension of the set of points whose digit `i` has frequency `gamma_i`
/// (and every later digit frequency zero).
///
/// At `gamma = 0` on `F_lambda` the transient set competes with `alpha4(0)`.
pub fn freq_spectrum(map: &MapFamily, gamma: &[f64], opts: &FreqOptions) -> Result<SpectrumResult> {
    if gamma.iter().any(|&g| !(g >= 0.0)) || gamma.iter().sum::<f64>() > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(
            "frequencies must be nonnegative with sum at most 1".into(),
        ));
    }
    let mut query = SpectrumQuery::frequencies(map.clone(), gamma, opts.k)?;
    query.options = opts.solver.clone();
    let mut r = dimension(&query, &opts.s_inf)?;
    let bounded = MapSystem::new(map.clone())?.tail_regime() == TailRegime::BoundedDerivative;
    if bounded && gamma.iter().all(|&g| g == 0.0) {
        match transient_dimension(map) {
            Ok(d) => {
                r.branches.push(BranchValue {
                    name: "dim_transient".into(),
                    value: d,
                });
                if d > r.value {
                    r.value = d;
                    r.report.flags.push("transient_dominates".into());
                }
            }
            Err(_) => r.report.flags.push("transient_dimension_unknown".into()),
        }
    }
    Ok(r)
}
