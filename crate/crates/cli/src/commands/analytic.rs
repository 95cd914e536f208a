//! Exact bias of two Bernoulli arms over a grid of means.

use std::fmt::Write as _;
use std::path::Path;

use adabias::simulate::{
    bernoulli_t3_closed_form, enumerate_bernoulli_exact, map_trials, ExactBias,
};
use adabias::{Policy, PolicyConfig};

use crate::output::{num, CsvOut};
use crate::spec::ExperimentSpec;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub mu1: f64,
    pub mu2: f64,
    pub exact: ExactBias,
    /// The T = 3 Greedy closed form, where it applies.
    pub closed: Option<ExactBias>,
}

#[derive(Debug, Clone)]
pub struct Heatmap {
    pub horizon: usize,
    pub grid: usize,
    pub points: Vec<GridPoint>,
    /// Largest bias of either arm with both means strictly inside (0, 1).
    pub max_interior_bias: f64,
    pub max_closed_form_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Analytic {
    pub policy: String,
    pub heatmaps: Vec<Heatmap>,
}

/// `n` evenly spaced points on `[0, 1]`; `[0]` when `n == 1`.
pub fn grid_values(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

pub fn heatmap(policy: &PolicyConfig, horizon: usize, grid: usize) -> Result<Heatmap, CliError> {
    let values = grid_values(grid);
    let closed_applies = horizon == 3 && policy.policy == Policy::Greedy && policy.gumbel.is_none();
    let cells: Vec<(f64, f64)> = values
        .iter()
        .flat_map(|&a| values.iter().map(move |&b| (a, b)))
        .collect();
    let points: Vec<adabias::Result<GridPoint>> = map_trials(cells.len(), |i| {
        let (mu1, mu2) = cells[i as usize];
        Ok(GridPoint {
            mu1,
            mu2,
            exact: enumerate_bernoulli_exact(mu1, mu2, policy, horizon)?,
            closed: closed_applies.then(|| bernoulli_t3_closed_form(mu1, mu2)),
        })
    });
    let points: Vec<GridPoint> = points.into_iter().collect::<adabias::Result<_>>()?;
    let interior = |p: &&GridPoint| p.mu1 > 0.0 && p.mu1 < 1.0 && p.mu2 > 0.0 && p.mu2 < 1.0;
    let max_interior_bias = points
        .iter()
        .filter(interior)
        .map(|p| p.exact.bias1.max(p.exact.bias2))
        .fold(f64::NEG_INFINITY, f64::max);
    let max_closed_form_residual = closed_applies.then(|| {
        points
            .iter()
            .map(|p| {
                let c = p.closed.unwrap();
                (p.exact.bias1 - c.bias1)
                    .abs()
                    .max((p.exact.bias2 - c.bias2).abs())
            })
            .fold(0.0, f64::max)
    });
    Ok(Heatmap {
        horizon,
        grid,
        points,
        max_interior_bias,
        max_closed_form_residual,
    })
}

pub fn run(spec: &ExperimentSpec) -> Result<Analytic, CliError> {
    let a = spec
        .analytic
        .as_ref()
        .ok_or_else(|| CliError::Validation("missing [analytic] section".into()))?;
    let heatmaps = a
        .horizons
        .iter()
        .map(|&h| heatmap(&a.policy, h, a.grid))
        .collect::<Result<_, _>>()?;
    Ok(Analytic {
        policy: a.policy.name(),
        heatmaps,
    })
}

pub fn write(r: &Analytic, dir: &Path, header: &str) -> Result<(), CliError> {
    for h in &r.heatmaps {
        let mut cols = vec!["mu1", "mu2", "bias1", "bias2"];
        if h.max_closed_form_residual.is_some() {
            cols.extend(["closed_bias1", "closed_bias2"]);
        }
        let mut out = CsvOut::create(
            &dir.join(format!("analytic_T{}.csv", h.horizon)),
            header,
            &cols,
        )?;
        for p in &h.points {
            let mut row = vec![
                num(p.mu1),
                num(p.mu2),
                num(p.exact.bias1),
                num(p.exact.bias2),
            ];
            if let Some(c) = p.closed {
                row.extend([num(c.bias1), num(c.bias2)]);
            }
            out.row(row)?;
        }
        out.finish()?;
    }
    let mut out = CsvOut::create(
        &dir.join("analytic_summary.csv"),
        header,
        &[
            "policy",
            "horizon",
            "grid",
            "max_interior_bias",
            "max_closed_form_residual",
        ],
    )?;
    for h in &r.heatmaps {
        out.row([
            r.policy.clone(),
            h.horizon.to_string(),
            h.grid.to_string(),
            num(h.max_interior_bias),
            h.max_closed_form_residual.map(num).unwrap_or_default(),
        ])?;
    }
    out.finish()?;
    Ok(())
}

impl Analytic {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for h in &self.heatmaps {
            let _ = write!(
                s,
                "{} T={} grid {}x{}: max interior bias {:.3e}",
                self.policy, h.horizon, h.grid, h.grid, h.max_interior_bias
            );
            if let Some(r) = h.max_closed_form_residual {
                let _ = write!(s, ", max |exact - closed form| {r:.3e}");
            }
            s.push('\n');
        }
        s
    }
}
