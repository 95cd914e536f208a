//! Bias and MSE of the naive, held-out, propensity and cMLE estimators.
//!
//! Per (scenario, policy) cell there are up to three families of trials:
//!
//! - `hard`: the policy as configured, without Gumbel noise. Its naive
//!   estimate is the reference every percentage is taken against.
//! - `split`: the same policy drawing a held-out twin each round, run for
//!   `T/2` rounds when the budget is matched.
//! - `gumbel`: the policy with Gumbel noise at the cMLE scale, which the
//!   conditional likelihood needs. Propensity weights use this data too
//!   when the hard policy can give an arm zero probability.

use std::fmt::Write as _;
use std::path::Path;

use adabias::cmle::{cd_fit, CmleConfig};
use adabias::estimators::{
    attach, heldout_estimate, naive_estimate, propensity_estimate, EstimateVector, Method,
};
use adabias::simulate::{map_trials, run_trial, TrialOptions};
use adabias::stats::{ErrorAccumulator, ErrorSummary};
use adabias::{ArmModel, Policy, PolicyConfig, Trace, TrialSeed};

use super::{cell_seed, slug, HARD, MCMC, RANDOMIZED, SPLIT};
use crate::output::{num, CsvOut};
use crate::spec::{DebiasSpec, ExperimentSpec, Scenario};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Hard,
    Split,
    Gumbel,
}

impl DataSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DataSource::Hard => "hard",
            DataSource::Split => "split",
            DataSource::Gumbel => "gumbel",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub method: Method,
    pub data: DataSource,
    pub arms: Vec<ErrorSummary>,
    pub pooled: ErrorSummary,
}

impl EstimatorResult {
    fn from_errors(
        method: Method,
        data: DataSource,
        k: usize,
        errors: &[Vec<Option<f64>>],
    ) -> Self {
        let mut acc = ErrorAccumulator::new(k);
        for e in errors {
            acc.push(e);
        }
        Self {
            method,
            data,
            arms: acc.arms(),
            pooled: acc.pooled(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmleFit {
    pub trial: u64,
    pub theta: Vec<f64>,
    pub acceptance_rate: f64,
    pub final_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasCell {
    pub scenario: String,
    pub policy: String,
    pub means: Vec<f64>,
    /// The hard naive estimate comes first.
    pub results: Vec<EstimatorResult>,
    pub fits: Vec<CmleFit>,
    /// Average fitted `θ` per gradient iteration, starting at `θ_0`.
    pub mean_trajectory: Vec<Vec<f64>>,
}

impl DebiasCell {
    pub fn reference(&self) -> &EstimatorResult {
        &self.results[0]
    }

    pub fn get(&self, method: Method, data: DataSource) -> Option<&EstimatorResult> {
        self.results
            .iter()
            .find(|r| r.method == method && r.data == data)
    }

    /// First result for `method`, whatever its data source.
    pub fn method(&self, method: Method) -> Option<&EstimatorResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

#[derive(Debug, Clone)]
pub struct Debias {
    pub cells: Vec<DebiasCell>,
}

fn errors(est: &EstimateVector, trace: &Trace) -> Vec<Option<f64>> {
    est.errors(trace)
}

/// Whether the hard policy gives every arm positive probability.
fn hard_propensity_defined(policy: &PolicyConfig) -> bool {
    matches!(policy.policy, Policy::EpsGreedy { epsilon } if epsilon > 0.0)
}

struct GumbelTrial {
    naive: Vec<Option<f64>>,
    propensity: Option<Vec<Option<f64>>>,
    fit: Option<(CmleFit, Vec<Option<f64>>, Vec<Vec<f64>>)>,
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    spec: &ExperimentSpec,
    d: &DebiasSpec,
    si: usize,
    pi: usize,
    s: &Scenario,
    p: &PolicyConfig,
    trace_dir: Option<&Path>,
) -> Result<DebiasCell, CliError> {
    let arms: Vec<ArmModel> = s.arms(spec.family, spec.obs_std)?;
    let k = arms.len();
    let trials = spec.trials.get();
    let labels = |stream: u64| cell_seed(spec.seed, &[si as u64, pi as u64, stream]);
    let wants = |m: Method| d.estimators.contains(&m);
    let hard = p.without_gumbel();
    let cmle_cfg: CmleConfig = match p.policy {
        Policy::Thompson(_) => d.cmle_thompson,
        _ => d.cmle,
    };
    let randomized = hard.with_gumbel(cmle_cfg.tau);
    let prop_on_hard = hard_propensity_defined(&hard);
    let mut results = Vec::new();

    let hard_seed = labels(HARD);
    let hard_runs: Vec<adabias::Result<(Vec<Option<f64>>, Option<Vec<Option<f64>>>)>> =
        map_trials(trials, |i| {
            let t = run_trial(
                &arms,
                &hard,
                s.horizon,
                TrialSeed::new(hard_seed, i),
                TrialOptions::default(),
            )?;
            let prop = if wants(Method::Propensity) && prop_on_hard {
                Some(errors(&propensity_estimate(&t)?, &t))
            } else {
                None
            };
            Ok((errors(&naive_estimate(&t), &t), prop))
        });
    let hard_runs = hard_runs.into_iter().collect::<adabias::Result<Vec<_>>>()?;
    let naive: Vec<_> = hard_runs.iter().map(|r| r.0.clone()).collect();
    results.push(EstimatorResult::from_errors(
        Method::Naive,
        DataSource::Hard,
        k,
        &naive,
    ));

    if wants(Method::Heldout) {
        let horizon = if d.budget_matched_split {
            s.horizon / 2
        } else {
            s.horizon
        };
        let split_seed = labels(SPLIT);
        let runs: Vec<adabias::Result<Vec<Option<f64>>>> = map_trials(trials, |i| {
            let t = run_trial(
                &arms,
                &hard,
                horizon,
                TrialSeed::new(split_seed, i),
                TrialOptions { split: true },
            )?;
            Ok(errors(&heldout_estimate(&t)?, &t))
        });
        let runs = runs.into_iter().collect::<adabias::Result<Vec<_>>>()?;
        results.push(EstimatorResult::from_errors(
            Method::Heldout,
            DataSource::Split,
            k,
            &runs,
        ));
    }

    if wants(Method::Propensity) && prop_on_hard {
        let prop: Vec<_> = hard_runs.iter().map(|r| r.1.clone().unwrap()).collect();
        results.push(EstimatorResult::from_errors(
            Method::Propensity,
            DataSource::Hard,
            k,
            &prop,
        ));
    }

    let prop_on_gumbel = wants(Method::Propensity) && !prop_on_hard;
    let n_fit = if wants(Method::Cmle) {
        spec.cmle_trials()
    } else {
        0
    };
    let n_gumbel = if prop_on_gumbel {
        trials.max(n_fit)
    } else {
        n_fit
    };
    let mut fits = Vec::new();
    let mut mean_trajectory = Vec::new();
    if n_gumbel > 0 {
        let gumbel_seed = labels(RANDOMIZED);
        let cfg = CmleConfig {
            seed: cell_seed(spec.seed, &[si as u64, pi as u64, MCMC, cmle_cfg.seed]),
            ..cmle_cfg
        };
        let runs: Vec<adabias::Result<GumbelTrial>> = map_trials(n_gumbel, |i| {
            let mut t = run_trial(
                &arms,
                &randomized,
                s.horizon,
                TrialSeed::new(gumbel_seed, i),
                TrialOptions::default(),
            )?;
            let naive_est = naive_estimate(&t);
            let naive = errors(&naive_est, &t);
            let prop_est = prop_on_gumbel
                .then(|| propensity_estimate(&t))
                .transpose()?;
            let propensity = prop_est.as_ref().map(|e| errors(e, &t));
            let fit = if (i as usize) < n_fit {
                let r = cd_fit(&t, &cfg)?;
                let err = r
                    .theta
                    .iter()
                    .zip(&arms)
                    .map(|(x, a)| Some(x - a.mean))
                    .collect();
                let f = CmleFit {
                    trial: i,
                    theta: r.theta.clone(),
                    acceptance_rate: r.acceptance_rate,
                    final_grad_norm: r.final_grad_norm,
                };
                Some((f, err, r.trajectory))
            } else {
                None
            };
            if let Some(dir) = trace_dir {
                attach(&mut t, naive_est);
                if let Some(e) = prop_est {
                    attach(&mut t, e);
                }
                if let Some((f, _, _)) = &fit {
                    let counts = t.final_counts();
                    attach(
                        &mut t,
                        EstimateVector {
                            method: Method::Cmle,
                            estimates: f.theta.iter().map(|&x| Some(x)).collect(),
                            counts,
                        },
                    );
                }
                let path = dir.join(format!("{}_{}_{i}.json", slug(&s.name), slug(&p.name())));
                std::fs::write(&path, t.to_json()?).map_err(|e| {
                    adabias::Error::Serialization(format!("{}: {e}", path.display()))
                })?;
            }
            Ok(GumbelTrial {
                naive,
                propensity,
                fit,
            })
        });
        let runs = runs.into_iter().collect::<adabias::Result<Vec<_>>>()?;

        let naive: Vec<_> = runs.iter().map(|r| r.naive.clone()).collect();
        results.push(EstimatorResult::from_errors(
            Method::Naive,
            DataSource::Gumbel,
            k,
            &naive,
        ));
        if prop_on_gumbel {
            let prop: Vec<_> = runs.iter().map(|r| r.propensity.clone().unwrap()).collect();
            results.push(EstimatorResult::from_errors(
                Method::Propensity,
                DataSource::Gumbel,
                k,
                &prop,
            ));
        }
        if n_fit > 0 {
            let errs: Vec<_> = runs
                .iter()
                .filter_map(|r| r.fit.as_ref().map(|f| f.1.clone()))
                .collect();
            results.push(EstimatorResult::from_errors(
                Method::Cmle,
                DataSource::Gumbel,
                k,
                &errs,
            ));
            let len = cfg.n_gd_iters + 1;
            mean_trajectory = vec![vec![0.0; k]; len];
            for (f, _, traj) in runs.into_iter().filter_map(|r| r.fit) {
                for (acc, th) in mean_trajectory.iter_mut().zip(&traj) {
                    for (a, x) in acc.iter_mut().zip(th) {
                        *a += x / n_fit as f64;
                    }
                }
                fits.push(f);
            }
        }
    }

    Ok(DebiasCell {
        scenario: s.name.clone(),
        policy: p.name(),
        means: s.means.clone(),
        results,
        fits,
        mean_trajectory,
    })
}

/// Runs every cell. With `out_dir` set and `save_traces` on, randomized
/// traces are written under `out_dir/traces`.
pub fn run(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<Debias, CliError> {
    let d = spec
        .debias
        .as_ref()
        .ok_or_else(|| CliError::Validation("missing [debias] section".into()))?;
    let trace_dir = match (out_dir, d.save_traces) {
        (Some(dir), true) => {
            let t = dir.join("traces");
            std::fs::create_dir_all(&t)?;
            Some(t)
        }
        _ => None,
    };
    let mut cells = Vec::new();
    for (si, s) in spec.scenarios.iter().enumerate() {
        for (pi, p) in spec.policies.iter().enumerate() {
            cells.push(run_cell(spec, d, si, pi, s, p, trace_dir.as_deref())?);
        }
    }
    Ok(Debias { cells })
}

fn pct(x: f64, reference: f64) -> String {
    num(100.0 * x / reference)
}

pub fn write(r: &Debias, dir: &Path, header: &str) -> Result<(), CliError> {
    let mut out = CsvOut::create(
        &dir.join("debias.csv"),
        header,
        &[
            "scenario",
            "policy",
            "estimator",
            "data",
            "arm",
            "bias",
            "bias_se",
            "mse",
            "mse_se",
            "trials",
            "excluded",
            "bias_pct_of_naive",
            "mse_pct_of_naive",
        ],
    )?;
    for c in &r.cells {
        let reference = c.reference();
        for res in &c.results {
            let rows = res
                .arms
                .iter()
                .zip(&reference.arms)
                .enumerate()
                .map(|(a, pair)| (a.to_string(), pair))
                .chain(std::iter::once((
                    "pooled".to_string(),
                    (&res.pooled, &reference.pooled),
                )));
            for (arm, (s, rs)) in rows {
                out.row([
                    c.scenario.clone(),
                    c.policy.clone(),
                    res.method.to_string(),
                    res.data.as_str().to_string(),
                    arm,
                    num(s.bias),
                    num(s.bias_se),
                    num(s.mse),
                    num(s.mse_se),
                    s.trials.to_string(),
                    s.excluded.to_string(),
                    pct(s.bias.abs(), rs.bias.abs()),
                    pct(s.mse, rs.mse),
                ])?;
            }
        }
    }
    out.finish()?;

    let fitted: Vec<&DebiasCell> = r.cells.iter().filter(|c| !c.fits.is_empty()).collect();
    if fitted.is_empty() {
        return Ok(());
    }
    let mut out = CsvOut::create(
        &dir.join("cmle_fits.csv"),
        header,
        &[
            "scenario",
            "policy",
            "trial",
            "arm",
            "theta",
            "error",
            "acceptance_rate",
            "final_grad_norm",
        ],
    )?;
    for c in &fitted {
        for f in &c.fits {
            for (a, (th, mu)) in f.theta.iter().zip(&c.means).enumerate() {
                out.row([
                    c.scenario.clone(),
                    c.policy.clone(),
                    f.trial.to_string(),
                    a.to_string(),
                    num(*th),
                    num(th - mu),
                    num(f.acceptance_rate),
                    num(f.final_grad_norm),
                ])?;
            }
        }
    }
    out.finish()?;
    for c in &fitted {
        let k = c.means.len();
        let cols: Vec<String> = std::iter::once("iteration".to_string())
            .chain((1..=k).map(|a| format!("theta_{a}")))
            .collect();
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        let name = format!(
            "cmle_trajectory_{}_{}.csv",
            slug(&c.scenario),
            slug(&c.policy)
        );
        let mut out = CsvOut::create(&dir.join(name), header, &cols)?;
        for (i, th) in c.mean_trajectory.iter().enumerate() {
            out.row(std::iter::once(i.to_string()).chain(th.iter().map(|x| num(*x))))?;
        }
        out.finish()?;
    }
    Ok(())
}

impl Debias {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.cells {
            let r = c.reference();
            let _ = writeln!(
                s,
                "{} {}: naive(hard) bias {:+.4} mse {:.4}",
                c.scenario, c.policy, r.pooled.bias, r.pooled.mse
            );
            for res in &c.results[1..] {
                let _ = writeln!(
                    s,
                    "  {:<10} {:<6} bias {:+.4} ({:5.1}% of naive)  mse {:.4} ({:5.1}%)",
                    res.method.as_str(),
                    res.data.as_str(),
                    res.pooled.bias,
                    100.0 * res.pooled.bias.abs() / r.pooled.bias.abs(),
                    res.pooled.mse,
                    100.0 * res.pooled.mse / r.pooled.mse
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(estimators: &str, policy: &str) -> ExperimentSpec {
        let text = format!(
            r#"
seed = 5
trials = 40

[[scenarios]]
means = [1.0, 0.75]
horizon = 8

[[policies]]
{policy}

[debias]
estimators = {estimators}
cmle_trials = 6
cmle = {{ n_gd_iters = 20 }}
"#
        );
        ExperimentSpec::from_str_with_format(&text, false).unwrap()
    }

    #[test]
    fn greedy_uses_gumbel_data_for_propensity() {
        let s = spec(
            r#"["naive", "heldout", "propensity", "cmle"]"#,
            r#"kind = "greedy""#,
        );
        let r = run(&s, None).unwrap();
        let c = &r.cells[0];
        assert_eq!(c.reference().method, Method::Naive);
        assert_eq!(c.reference().data, DataSource::Hard);
        assert!(c.get(Method::Propensity, DataSource::Gumbel).is_some());
        assert!(c.get(Method::Heldout, DataSource::Split).is_some());
        let cmle = c.get(Method::Cmle, DataSource::Gumbel).unwrap();
        assert_eq!(cmle.pooled.trials, 6);
        assert_eq!(c.fits.len(), 6);
        assert_eq!(c.mean_trajectory.len(), 21);
        assert_eq!(
            c.get(Method::Naive, DataSource::Gumbel)
                .unwrap()
                .pooled
                .trials,
            40
        );
    }

    #[test]
    fn eps_greedy_propensity_uses_hard_data() {
        let s = spec(r#"["propensity"]"#, r#"kind = "eps_greedy""#);
        let r = run(&s, None).unwrap();
        let c = &r.cells[0];
        assert!(c.get(Method::Propensity, DataSource::Hard).is_some());
        assert_eq!(c.results.len(), 2);
        assert!(c.fits.is_empty());
    }

    #[test]
    fn traces_are_saved_with_estimates() {
        let mut s = spec(r#"["cmle"]"#, r#"kind = "greedy""#);
        s.debias.as_mut().unwrap().save_traces = true;
        let dir = tempfile::tempdir().unwrap();
        run(&s, Some(dir.path())).unwrap();
        let text = std::fs::read_to_string(dir.path().join("traces/T8_K2_greedy_0.json")).unwrap();
        let t = Trace::from_json(&text).unwrap();
        assert!(t.estimates.contains_key("cmle"));
        assert!(t.estimates.contains_key("naive"));
    }
}
