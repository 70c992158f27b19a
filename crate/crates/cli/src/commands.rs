use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use cdeforest::simgen::{self, SecondResponse, UnivariateSimConfig, N_IRRELEVANT, N_RELEVANT};
use cdeforest::{
    cde_loss, BandwidthSpec, ConditionalDensity, Forest, ForestDensity, ForestParams, Lattice,
    LossReport, TrainingSet,
};

use crate::table::{self, Table};
use crate::{
    CliError, EvaluateArgs, GridArgs, PredictArgs, SecondLaw, SimModel, SimulateArgs, Switch,
    TrainArgs,
};

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let (headers, x, z) = match a.model {
        SimModel::Univariate => {
            let cfg = UnivariateSimConfig { n: a.n, sigma: a.sigma, seed: a.seed };
            let (x, z) = simgen::gen_univariate::<f64>(&cfg);
            let mut headers: Vec<String> = (1..=N_RELEVANT).map(|j| format!("x{j}")).collect();
            headers.extend((1..=N_IRRELEVANT).map(|j| format!("y{j}")));
            headers.push("z".into());
            (headers, x, z)
        }
        SimModel::Joint => {
            let law = match a.z2_law {
                SecondLaw::Between => SecondResponse::BetweenFirstAndX,
                SecondLaw::Above => SecondResponse::AboveX,
            };
            let (x, z) = simgen::gen_joint::<f64>(a.n, a.seed, law);
            (vec!["x".into(), "z1".into(), "z2".into()], x, z)
        }
    };
    let rows: Vec<Vec<f64>> = x
        .rows()
        .into_iter()
        .zip(z.rows())
        .map(|(xr, zr)| xr.iter().chain(zr.iter()).copied().collect())
        .collect();
    table::write_rows(&a.out, &headers, rows.iter().map(Vec::as_slice))
}

fn default_responses(t: &Table) -> Result<Vec<String>, CliError> {
    if t.column_index("z").is_some() {
        return Ok(vec!["z".into()]);
    }
    let names: Vec<String> = (1..)
        .map(|j| format!("z{j}"))
        .take_while(|n| t.column_index(n).is_some())
        .collect();
    if names.is_empty() {
        return Err(CliError::Input(
            "no response column: expected `z` or `z1`, or pass --response-cols".into(),
        ));
    }
    Ok(names)
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let t = Table::read(&a.data)?;
    let responses = match &a.response_cols {
        Some(cols) => cols.clone(),
        None => default_responses(&t)?,
    };
    let z = t.select(&responses)?;
    let covariates: Vec<String> =
        t.headers.iter().filter(|h| !responses.contains(h)).cloned().collect();
    if covariates.is_empty() {
        return Err(CliError::Input(format!("{}: no covariate columns", a.data.display())));
    }
    let x = t.select(&covariates)?;
    let p = covariates.len();
    let params = ForestParams {
        n_trees: a.ntrees,
        node_size: a.node_size,
        mtry: a.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize),
        n_basis: a.n_basis,
        criterion: a.criterion,
        bootstrap: matches!(a.bootstrap, Switch::On),
        seed: a.seed,
    };
    let data = TrainingSet::with_names(x, z, covariates, responses)?;

    let start = Instant::now();
    let forest = Forest::fit(&data, &params)?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut out = table::create(&a.out)?;
    out.write_all(&forest.to_json())
        .and_then(|_| out.flush())
        .map_err(|e| table::write_error(&a.out, e))?;
    eprintln!("train_time_seconds={elapsed:.6}");
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Lattice<f64>, CliError> {
    let bad = |why: String| CliError::Input(format!("--grid `{spec}`: {why}"));
    let dims = spec
        .split(',')
        .map(|part| {
            let fields: Vec<&str> = part.trim().split(':').collect();
            let [lo, hi, steps] = fields[..] else {
                return Err(bad(format!("`{part}` is not min:max:steps")));
            };
            let lo: f64 = lo.trim().parse().map_err(|_| bad(format!("bad minimum `{lo}`")))?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad(format!("bad maximum `{hi}`")))?;
            let steps: usize =
                steps.trim().parse().map_err(|_| bad(format!("bad step count `{steps}`")))?;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(bad(format!("need finite min < max, got {lo}:{hi}")));
            }
            if steps < 2 {
                return Err(bad("need at least 2 steps per dimension".into()));
            }
            Ok((lo, hi, steps))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Lattice::uniform(&dims)?)
}

fn parse_bandwidth(spec: &str) -> Result<BandwidthSpec<f64>, CliError> {
    if spec.trim() == "adaptive" {
        return Ok(BandwidthSpec::Adaptive);
    }
    let h = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|h| h.is_finite() && *h > 0.0)
                .ok_or_else(|| {
                    CliError::Input(format!(
                        "--bandwidth `{spec}`: expected `adaptive` or positive numbers"
                    ))
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BandwidthSpec::Fixed(h))
}

struct Setup {
    forest: Forest<f64>,
    table: Table,
    x: Array2<f64>,
    lattice: Lattice<f64>,
    grid: Array2<f64>,
    bandwidth: BandwidthSpec<f64>,
}

fn setup(a: &GridArgs) -> Result<Setup, CliError> {
    let forest = Forest::<f64>::load(&a.model)?;
    let table = Table::read(&a.data)?;
    let missing: Vec<&String> = forest
        .covariate_names()
        .iter()
        .filter(|n| table.column_index(n).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Input(format!(
            "{}: model expects {} covariates, missing {:?}",
            a.data.display(),
            forest.n_covariates(),
            missing
        )));
    }
    let x = table.select(forest.covariate_names())?;
    let lattice = parse_grid(&a.grid)?;
    if lattice.dim() != forest.dim() {
        return Err(CliError::Input(format!(
            "--grid has {} dimensions, model has {} responses",
            lattice.dim(),
            forest.dim()
        )));
    }
    let bandwidth = parse_bandwidth(&a.bandwidth)?;
    if let BandwidthSpec::Fixed(h) = &bandwidth {
        if h.len() != 1 && h.len() != forest.dim() {
            return Err(CliError::Input(format!(
                "--bandwidth has {} values, model has {} responses",
                h.len(),
                forest.dim()
            )));
        }
    }
    let grid = lattice.points();
    Ok(Setup { forest, table, x, lattice, grid, bandwidth })
}

pub fn predict(a: &PredictArgs) -> Result<(), CliError> {
    let s = setup(&a.common)?;
    let start = Instant::now();
    let densities: Vec<Vec<f64>> = (0..s.x.nrows())
        .into_par_iter()
        .map(|i| {
            let q = s.x.row(i).to_vec();
            Ok(s.forest.predict_density(&q, s.grid.view(), &s.bandwidth)?.values)
        })
        .collect::<Result<_, CliError>>()?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut out = table::create(&a.out)?;
    let io = |e| table::write_error(&a.out, e);
    let mut header = vec!["query_index".to_string()];
    header.extend(s.forest.response_names().iter().cloned());
    header.push("density".into());
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (q, values) in densities.iter().enumerate() {
        for (point, v) in s.grid.rows().into_iter().zip(values) {
            write!(out, "{q}").map_err(io)?;
            for c in point {
                write!(out, ",{}", table::fmt_num(*c)).map_err(io)?;
            }
            writeln!(out, ",{}", table::fmt_num(*v)).map_err(io)?;
        }
    }
    out.flush().map_err(io)?;
    eprintln!("predict_time_seconds={elapsed:.6}");
    Ok(())
}

fn uniform_over(lattice: &Lattice<f64>) -> impl ConditionalDensity<f64> {
    let volume: f64 = lattice.axes().iter().map(|a| a[a.len() - 1] - a[0]).product();
    let level = 1.0 / volume;
    move |_: &[f64], g: ArrayView2<f64>| Ok(vec![level; g.nrows()])
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let s = setup(&a.common)?;
    let z = s.table.select(s.forest.response_names())?;
    let start = Instant::now();
    let report: LossReport<f64> = if a.reference_uniform {
        cde_loss(&uniform_over(&s.lattice), s.x.view(), z.view(), s.grid.view())?
    } else {
        let est = ForestDensity { forest: &s.forest, bandwidth: s.bandwidth.clone() };
        cde_loss(&est, s.x.view(), z.view(), s.grid.view())?
    };
    let elapsed = start.elapsed().as_secs_f64();

    let fields = [
        ("loss", table::fmt_num(report.loss)),
        ("se", table::fmt_num(report.se)),
        ("term_sq", table::fmt_num(report.term_sq)),
        ("term_lik", table::fmt_num(report.term_lik)),
        ("n_test", report.n_test.to_string()),
        ("outside_hull", report.outside_hull.to_string()),
    ];
    for (k, v) in &fields {
        println!("{k}={v}");
    }
    println!("note=se is the standard error across test points, not across repeated simulations");
    eprintln!("predict_time_seconds={elapsed:.6}");

    if let Some(path) = &a.out {
        write_report(path, &fields)?;
    }
    Ok(())
}

fn write_report(path: &Path, fields: &[(&str, String)]) -> Result<(), CliError> {
    let mut out = table::create(path)?;
    let io = |e| table::write_error(path, e);
    let keys: Vec<&str> = fields.iter().map(|f| f.0).collect();
    let values: Vec<&str> = fields.iter().map(|f| f.1.as_str()).collect();
    writeln!(out, "{}", keys.join(",")).map_err(io)?;
    writeln!(out, "{}", values.join(",")).map_err(io)?;
    out.flush().map_err(io)
}
