//! Deterministic parameter sweeps over a 1D or 2D grid.
//!
//! Points are evaluated in parallel on a bounded worker pool, but the output
//! table is assembled sequentially in grid order, so the CSV bytes do not
//! depend on the worker count.

use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::{ CliError, CliResult };
use crate::scenarios::{ compute_scalars, sweep_columns, PointContext };
use crate::table::ResultTable;

/// One grid point: parameter assignments in axis order.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub assignments: Vec<(String, f64)>,
}

/// Materialize the full grid (row-major: first axis outer, second inner).
/// An absent or empty sweep block yields a single point with no overrides.
pub fn grid_points(config: &ScenarioConfig) -> CliResult<Vec<SweepPoint>> {
    let axes = config.sweep.as_ref().map(|s| s.axes.as_slice()).unwrap_or(&[]);
    if axes.is_empty() {
        return Ok(vec![SweepPoint { assignments: Vec::new() }]);
    }
    let grids: Vec<(String, Vec<f64>)> = axes
        .iter()
        .map(|axis| Ok((axis.param.clone(), axis.values()?)))
        .collect::<CliResult<_>>()?;
    let mut points = Vec::new();
    match grids.as_slice() {
        [(name, values)] => {
            for &v in values {
                points.push(SweepPoint { assignments: vec![(name.clone(), v)] });
            }
        }
        [(n1, v1), (n2, v2)] => {
            for &a in v1 {
                for &b in v2 {
                    points.push(SweepPoint {
                        assignments: vec![(n1.clone(), a), (n2.clone(), b)],
                    });
                }
            }
        }
        _ => return Err(CliError::validation("at most two sweep axes are supported")),
    }
    Ok(points)
}

/// Run the sweep with `workers` threads and return the result table.
///
/// A point that fails numerically is kept in the table with empty value
/// cells and `ok = 0`; validation failures abort the whole sweep.
pub fn run_sweep(config: &ScenarioConfig, workers: usize) -> CliResult<ResultTable> {
    config.validate()?;
    let base = PointContext::from_config(config);
    crate::scenarios::validate_outputs(&base)?;

    let mut value_columns: Vec<&'static str> = Vec::new();
    for out in &base.outputs {
        value_columns.extend_from_slice(sweep_columns(*out)?);
    }

    let points = grid_points(config)?;
    for point in &points {
        for (name, _) in &point.assignments {
            if !base.params.contains_key(name) {
                return Err(CliError::validation(format!(
                    "swept parameter '{name}' does not exist in the parameter block"
                )));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::numerical(format!("worker pool: {e}")))?;

    // Evaluate in parallel; results carry their grid index so assembly order
    // is fixed regardless of completion order.
    let results: Vec<CliResult<Vec<f64>>> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(idx, point)| {
                let mut params = base.params.clone();
                for (name, value) in &point.assignments {
                    params.insert(name.clone(), *value);
                }
                let ctx = PointContext {
                    params,
                    seed: base.seed.wrapping_add(idx as u64),
                    ..base.clone()
                };
                compute_scalars(&ctx)
            })
            .collect()
    });

    let mut columns: Vec<String> = points
        .first()
        .map(|p| p.assignments.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    columns.extend(value_columns.iter().map(|c| c.to_string()));
    columns.push("ok".to_string());
    let n_values = value_columns.len();

    let mut table = ResultTable::new(columns);
    for (point, result) in points.iter().zip(results.into_iter()) {
        let mut row: Vec<Option<f64>> =
            point.assignments.iter().map(|(_, v)| Some(*v)).collect();
        match result {
            Ok(values) => {
                row.extend(values.into_iter().map(Some));
                row.push(Some(1.0));
            }
            Err(e @ CliError::Validation(_)) => return Err(e),
            Err(_) => {
                // Out-of-regime point: flagged, never dropped.
                row.extend(std::iter::repeat(None).take(n_values));
                row.push(Some(0.0));
            }
        }
        table.push_row(row);
    }
    Ok(table)
}
