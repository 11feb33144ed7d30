//! One function per subcommand, each producing a [`Report`].

use birkhoff_core::infinity::{delta_inf_counting, max_entropy_certificate};
use birkhoff_core::spectrum::{
    dimension, freq_spectrum, transient_dimension, FreqOptions, SpectrumQuery, SpectrumResult,
};
use birkhoff_core::suspension::{abramov_check, build_split_shift_with_base, roof_base};
use birkhoff_core::thermo::{gurevich_pressure, s_infinity, topological_entropy};
use birkhoff_core::{FiniteSubshift, MapFamily, MarkovMeasure, Potential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Config, SchemaError};
use crate::output::{flags, joined, num, opt_num, Report};

#[derive(Debug)]
pub enum Failure {
    Schema(SchemaError),
    Solver(birkhoff_core::Error),
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::Schema(e)
    }
}

impl From<birkhoff_core::Error> for Failure {
    fn from(e: birkhoff_core::Error) -> Self {
        Failure::Solver(e)
    }
}

type Outcome = Result<Report, Failure>;

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub fn pressure(cfg: &Config, k: Option<usize>, n_max: Option<usize>) -> Outcome {
    let map = cfg.system();
    let k = k.or(cfg.k).unwrap_or(40);
    let n_max = n_max.or(cfg.n_max).unwrap_or(14);
    let f = match cfg.potentials.as_slice() {
        [] => Potential::constant(0.0, 1),
        [f] => f.clone(),
        _ => {
            return Err(
                SchemaError("potentials: pressure takes at most one potential".into()).into(),
            )
        }
    };
    let base = cfg.base_symbol.unwrap_or(1);
    let est = gurevich_pressure(&map, &f, k, base, n_max)?;
    Ok(pressure_report(est, "pressure"))
}

pub fn entropy(cfg: &Config, k: Option<usize>, n_max: Option<usize>) -> Outcome {
    let map = cfg.system();
    let k = k.or(cfg.k).unwrap_or(40);
    let n_max = n_max.or(cfg.n_max).unwrap_or(14);
    let est = topological_entropy(&map, k, n_max)?;
    Ok(pressure_report(est, "entropy"))
}

fn pressure_report(est: birkhoff_core::thermo::PressureEstimate, command: &str) -> Report {
    let rows = est
        .n
        .iter()
        .skip(1)
        .zip(&est.p_n)
        .map(|(&n, &p)| {
            vec![
                n.to_string(),
                num(p),
                num(est.log_perron),
                est.k.to_string(),
                String::new(),
            ]
        })
        .collect();
    let plot = est
        .n
        .iter()
        .skip(1)
        .zip(&est.p_n)
        .map(|(&n, &p)| (n as f64, p))
        .collect();
    Report {
        header: vec!["n", "p_n", "log_perron", "k", "flags"],
        rows,
        json: json!({ "command": command, "estimate": to_json(&est) }),
        plot: Some(("n", "p_n", plot)),
    }
}

pub fn s_inf(cfg: &Config) -> Outcome {
    let map = cfg.system();
    let r = s_infinity(&map, &cfg.s_inf)?;
    let k_max = cfg.s_inf.k_schedule.iter().max().copied().unwrap_or(0);
    let plot = r
        .trace
        .iter()
        .filter_map(|s| s.log_pressure.last().map(|&p| (s.t, p)))
        .collect();
    Ok(Report {
        header: vec!["value", "bracket_lo", "bracket_hi", "k", "flags"],
        rows: vec![vec![
            num(r.value),
            num(r.bracket.0),
            num(r.bracket.1),
            k_max.to_string(),
            flags(&r.warnings),
        ]],
        json: json!({ "command": "s-inf", "map": to_json(&cfg.map), "result": to_json(&r) }),
        plot: Some(("t", "log_pressure_at_max_k", plot)),
    })
}

pub fn delta_inf(cfg: &Config, k: Option<usize>, n_max: Option<usize>) -> Outcome {
    let map = cfg.system();
    let k = k.or(cfg.k).unwrap_or(60);
    let n_max = n_max.or(cfg.n_max).unwrap_or(40);
    let m_list = cfg.m.clone().unwrap_or_else(|| vec![1, 2, 4]);
    let q_list = cfg.q.clone().unwrap_or_else(|| vec![2, 4, 8]);
    let table = delta_inf_counting(&map, k, &m_list, &q_list, n_max)?;
    let cert_k = cfg.certificate_k.unwrap_or(40);
    let cert = max_entropy_certificate(&map, cert_k)?;
    let mut rows: Vec<Vec<String>> = table
        .entries
        .iter()
        .map(|e| {
            let flag = if e.estimate.is_none() {
                "no_excursions"
            } else {
                ""
            };
            vec![
                "counting".into(),
                e.m.to_string(),
                e.q.to_string(),
                opt_num(e.estimate),
                k.to_string(),
                flag.into(),
            ]
        })
        .collect();
    let mut cert_flags = Vec::new();
    if !cert.decay_ok {
        cert_flags.push("decay_failed".to_string());
    }
    if cert.degenerate {
        cert_flags.push("degenerate".to_string());
    }
    rows.push(vec![
        "certificate".into(),
        String::new(),
        String::new(),
        num(cert.entropy),
        cert_k.to_string(),
        flags(&cert_flags),
    ]);
    let plot = table
        .corner
        .rates
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite())
        .map(|(i, &r)| ((i + 1) as f64, r))
        .collect();
    Ok(Report {
        header: vec!["kind", "M", "q", "value", "k", "flags"],
        rows,
        json: json!({
            "command": "delta-inf",
            "counting": to_json(&table),
            "certificate": to_json(&cert),
        }),
        plot: Some(("n", "corner_rate", plot)),
    })
}

/// Row-stochastic weights drawn uniformly from `[0.05, 1]` on allowed transitions.
fn random_measure(
    s: &FiniteSubshift,
    rng: &mut ChaCha8Rng,
) -> Result<MarkovMeasure, birkhoff_core::Error> {
    let rows = (0..s.size())
        .map(|i| {
            let w: Vec<f64> = s
                .successors(i)
                .iter()
                .map(|_| rng.gen_range(0.05..1.0))
                .collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(|x| x / t).collect()
        })
        .collect();
    MarkovMeasure::from_rows(s.clone(), rows)
}

pub fn suspension_check(cfg: &Config, k: Option<usize>) -> Outcome {
    let map = cfg.system();
    let k = k.or(cfg.k).unwrap_or(10);
    let m_list = cfg.m.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let samples = cfg.samples.unwrap_or(20);
    let seed = cfg.seed.unwrap_or(0);
    let base = map.derive_transitions(k)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &m in &m_list {
        let split = build_split_shift_with_base(&map, m, k, roof_base(&map))?;
        let results: Vec<_> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((m * samples + i) as u64);
                let mm = random_measure(&base, &mut rng)?;
                abramov_check(&mm, &split)
            })
            .collect::<Result<_, _>>()?;
        for (i, c) in results.iter().enumerate() {
            rows.push(vec![
                m.to_string(),
                i.to_string(),
                num(c.pushed),
                num(c.predicted),
                num(c.gap()),
                k.to_string(),
                String::new(),
            ]);
        }
        checks.push(json!({ "m": m, "vertices": split.vertex_count(), "base": split.roof.base, "checks": to_json(&results) }));
    }
    Ok(Report {
        header: vec![
            "m",
            "sample",
            "pushed_entropy",
            "predicted",
            "gap",
            "k",
            "flags",
        ],
        rows,
        json: json!({ "command": "suspension-check", "seed": seed, "k": k, "orders": checks }),
        plot: None,
    })
}

fn spectrum_rows(gammas: &[Vec<f64>], results: &[SpectrumResult]) -> Report {
    let rows = gammas
        .iter()
        .zip(results)
        .map(|(g, r)| {
            vec![
                joined(g),
                num(r.value),
                num(r.mass),
                to_json(&r.membership)
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                num(r.report.constraint_residual),
                num(r.report.dinkelbach_residual),
                r.report.k.to_string(),
                flags(&r.report.flags),
            ]
        })
        .collect();
    let plot = gammas
        .iter()
        .zip(results)
        .map(|(g, r)| (g[0], r.value))
        .collect();
    let points: Vec<_> = gammas
        .iter()
        .zip(results)
        .map(|(g, r)| json!({ "gamma": g, "result": to_json(r) }))
        .collect();
    Report {
        header: vec![
            "gamma",
            "value",
            "mass",
            "membership",
            "constraint_residual",
            "dinkelbach_residual",
            "k",
            "flags",
        ],
        rows,
        json: json!({ "points": points }),
        plot: Some(("gamma_1", "dimension", plot)),
    }
}

pub fn spectrum(cfg: &Config, gammas: &[Vec<f64>], k: Option<usize>) -> Outcome {
    let gammas = cfg.targets(gammas)?;
    let k = k.or(cfg.k).unwrap_or(30);
    let results: Vec<SpectrumResult> = gammas
        .par_iter()
        .map(|g| {
            let mut q = if cfg.potentials.is_empty() {
                SpectrumQuery::frequencies(cfg.map.clone(), g, k)?
            } else {
                SpectrumQuery::new(cfg.map.clone(), cfg.potentials.clone(), g.clone(), k)
            };
            q.options = cfg.solver.clone();
            dimension(&q, &cfg.s_inf)
        })
        .collect::<Result<_, _>>()?;
    let mut report = spectrum_rows(&gammas, &results);
    report.json["command"] = json!("spectrum");
    report.json["map"] = to_json(&cfg.map);
    report.json["potentials"] = to_json(&cfg.potentials);
    Ok(report)
}

pub fn freq(cfg: &Config, gammas: &[Vec<f64>], k: Option<usize>) -> Outcome {
    let gammas = cfg.targets(gammas)?;
    let opts = FreqOptions {
        k: k.or(cfg.k).unwrap_or(30),
        solver: cfg.solver.clone(),
        s_inf: cfg.s_inf.clone(),
    };
    let results: Vec<SpectrumResult> = gammas
        .par_iter()
        .map(|g| freq_spectrum(&cfg.map, g, &opts))
        .collect::<Result<_, _>>()?;
    let mut report = spectrum_rows(&gammas, &results);
    report.json["command"] = json!("freq-spectrum");
    report.json["map"] = to_json(&cfg.map);
    Ok(report)
}

pub fn transient(map: &MapFamily) -> Outcome {
    let d = transient_dimension(map)?;
    let MapFamily::FLambda { lambda } = map else {
        unreachable!("only f_lambda has a closed form")
    };
    Ok(Report {
        header: vec!["lambda", "value", "flags"],
        rows: vec![vec![num(*lambda), num(d), String::new()]],
        json: json!({ "command": "transient-dim", "lambda": lambda, "value": d }),
        plot: None,
    })
}
