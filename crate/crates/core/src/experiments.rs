//! Seeded Monte Carlo studies of the estimator, written as long-format CSV.
//!
//! Every cell `(function, size, replicate)` owns an RNG stream derived
//! from the master seed and its position in plan order, so any cell can be
//! rerun alone and parallel runs produce the same bytes as serial ones.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate, normalize_by_degree_one, EstimateTable};
use crate::generator::{grow, GrowthConfig};
use crate::pa_model::{census_from_snapshot, PaFunction};
use crate::rng::stream_seed;
use crate::stats;
use crate::theory::{solve_malthusian, SolveOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFunction {
    pub id: String,
    pub f: PaFunction,
}

/// What to simulate. Missing JSON fields take the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub functions: Vec<NamedFunction>,
    pub sizes: Vec<u64>,
    pub replicates: usize,
    pub master_seed: u64,
    pub degrees_of_interest: Vec<u32>,
    pub outputs: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            functions: PaFunction::reference_set()
                .into_iter()
                .map(|(id, f)| NamedFunction { id, f })
                .collect(),
            sizes: vec![10_000, 100_000],
            replicates: 100,
            master_seed: 20_240_601,
            degrees_of_interest: (1..=30).collect(),
            outputs: None,
        }
    }
}

impl ExperimentPlan {
    /// 1000 replicates of 10^4, 10^5 and 10^6 nodes, degrees up to 70.
    pub fn full_scale() -> Self {
        ExperimentPlan {
            sizes: vec![10_000, 100_000, 1_000_000],
            replicates: 1000,
            degrees_of_interest: (1..=70).collect(),
            ..ExperimentPlan::default()
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(s)?;
        plan.check()?;
        Ok(plan)
    }

    pub fn check(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.functions.is_empty() || self.sizes.is_empty() {
            return Err(Error::Config(
                "plan needs at least one function and one size".into(),
            ));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("network size {n} is below 2")));
        }
        if self.degrees_of_interest.contains(&0) {
            return Err(Error::Config("degrees of interest start at 1".into()));
        }
        Ok(())
    }

    /// Stream id of cell `(function, size, replicate)` in plan order.
    pub fn stream_id(&self, f_index: usize, size_index: usize, rep: usize) -> u64 {
        ((f_index * self.sizes.len() + size_index) * self.replicates + rep) as u64
    }

    pub fn cell_seed(&self, f_index: usize, size_index: usize, rep: usize) -> u64 {
        stream_seed(self.master_seed, self.stream_id(f_index, size_index, rep))
    }

    fn cells(&self, sizes: &[usize]) -> Vec<Cell> {
        let mut out = Vec::new();
        for fi in 0..self.functions.len() {
            for &si in sizes {
                for rep in 0..self.replicates {
                    out.push(Cell { fi, si, rep });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    fi: usize,
    si: usize,
    rep: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

fn map_cells<T, F>(cells: &[Cell], exec: Execution, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Cell) -> Result<T> + Sync,
{
    match exec {
        Execution::Serial => cells.iter().map(job).collect(),
        Execution::Parallel => cells.par_iter().map(&job).collect(),
    }
}

/// Grows one replicate and estimates from its snapshot.
pub fn replicate_estimate(f: &PaFunction, n: u64, seed: u64) -> Result<EstimateTable> {
    let (tree, _) = grow(&GrowthConfig::new(f.clone(), n, seed))?;
    estimate(&census_from_snapshot(&tree))
}

fn estimate_cell(plan: &ExperimentPlan, c: &Cell) -> Result<EstimateTable> {
    replicate_estimate(
        &plan.functions[c.fi].f,
        plan.sizes[c.si],
        plan.cell_seed(c.fi, c.si, c.rep),
    )
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRow {
    pub f_id: String,
    pub n: u64,
    pub rep: usize,
    pub k: u32,
    pub r_hat_normalized: Option<f64>,
}

/// For every cell: grow, estimate, normalize by `r̂_1`, and keep the
/// degrees of interest.
pub fn run_consistency_study(
    plan: &ExperimentPlan,
    exec: Execution,
) -> Result<Vec<ConsistencyRow>> {
    plan.check()?;
    let sizes: Vec<usize> = (0..plan.sizes.len()).collect();
    let cells = plan.cells(&sizes);
    let per_cell = map_cells(&cells, exec, |c| {
        let table = estimate_cell(plan, c)?;
        let normalized = normalize_by_degree_one(&table).ok();
        Ok(plan
            .degrees_of_interest
            .iter()
            .map(|&k| ConsistencyRow {
                f_id: plan.functions[c.fi].id.clone(),
                n: plan.sizes[c.si],
                rep: c.rep,
                k,
                r_hat_normalized: normalized.as_ref().and_then(|t| t.r_hat(k)),
            })
            .collect::<Vec<_>>())
    })?;
    Ok(per_cell.into_iter().flatten().collect())
}

pub fn write_consistency_csv<W: Write>(rows: &[ConsistencyRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["f_id", "n", "rep", "k", "r_hat_normalized"])?;
    for r in rows {
        out.write_record([
            r.f_id.clone(),
            r.n.to_string(),
            r.rep.to_string(),
            r.k.to_string(),
            fmt_opt(r.r_hat_normalized),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub f_id: String,
    pub k: u32,
    /// Unbiased sample variance of the raw `r̂_k` over defined replicates.
    pub s_k: f64,
    pub support_count: usize,
    /// Same for `r̂_k / r̂_1`, the scale used when comparing functions.
    pub s_k_normalized: Option<f64>,
}

/// Size used by the variance study: the plan's only size, or its largest.
pub fn variance_study_size(plan: &ExperimentPlan) -> u64 {
    plan.sizes.iter().copied().max().unwrap_or(0)
}

pub fn run_variance_study(plan: &ExperimentPlan, exec: Execution) -> Result<Vec<VarianceRow>> {
    plan.check()?;
    let n = variance_study_size(plan);
    let si = plan
        .sizes
        .iter()
        .position(|&s| s == n)
        .expect("size taken from plan");
    let cells = plan.cells(&[si]);
    let tables = map_cells(&cells, exec, |c| {
        let t = estimate_cell(plan, c)?;
        let r1 = t.r_hat(1).filter(|&r| r > 0.0);
        Ok(plan
            .degrees_of_interest
            .iter()
            .map(|&k| (t.r_hat(k), t.r_hat(k).zip(r1).map(|(r, r1)| r / r1)))
            .collect::<Vec<_>>())
    })?;
    let mut rows = Vec::new();
    for (fi, nf) in plan.functions.iter().enumerate() {
        let block = &tables[fi * plan.replicates..(fi + 1) * plan.replicates];
        for (j, &k) in plan.degrees_of_interest.iter().enumerate() {
            let vals: Vec<f64> = block.iter().filter_map(|row| row[j].0).collect();
            let normalized: Vec<f64> = block.iter().filter_map(|row| row[j].1).collect();
            if let Some(s_k) = stats::sample_variance(&vals) {
                rows.push(VarianceRow {
                    f_id: nf.id.clone(),
                    k,
                    s_k,
                    support_count: vals.len(),
                    s_k_normalized: stats::sample_variance(&normalized),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_variance_csv<W: Write>(rows: &[VarianceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["f_id", "k", "s_k", "support_count", "s_k_normalized"])?;
    for r in rows {
        out.write_record([
            r.f_id.clone(),
            r.k.to_string(),
            r.s_k.to_string(),
            r.support_count.to_string(),
            fmt_opt(r.s_k_normalized),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityRow {
    pub f_id: String,
    pub n: u64,
    pub rep: usize,
    /// `√n (r̂_k − r_k)`; absent when `r̂_k` is undefined.
    pub scaled_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalitySummary {
    pub f_id: String,
    pub n: u64,
    pub count: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub qq_correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QqPoint {
    pub f_id: String,
    pub n: u64,
    pub normal_quantile: f64,
    pub studentized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityStudy {
    pub k: u32,
    /// True `r_k = f(k)/λ*` per function, in plan order.
    pub truth: Vec<f64>,
    pub rows: Vec<NormalityRow>,
    pub summary: Vec<NormalitySummary>,
    pub qq: Vec<QqPoint>,
}

/// `√n (r̂_k − r_k)` for every cell, with per-(function, size) variance
/// and normal QQ diagnostics of the studentized errors.
pub fn run_normality_study(
    plan: &ExperimentPlan,
    k: u32,
    exec: Execution,
) -> Result<NormalityStudy> {
    plan.check()?;
    if k == 0 {
        return Err(Error::Config("degree must be at least 1".into()));
    }
    let truth = plan
        .functions
        .iter()
        .map(|nf| {
            let sol = solve_malthusian(&nf.f, &SolveOptions::default())?;
            Ok(nf.f.value(k as u64) / sol.lambda_star)
        })
        .collect::<Result<Vec<f64>>>()?;
    let sizes: Vec<usize> = (0..plan.sizes.len()).collect();
    let cells = plan.cells(&sizes);
    let rows = map_cells(&cells, exec, |c| {
        let n = plan.sizes[c.si];
        let r = estimate_cell(plan, c)?.r_hat(k);
        Ok(NormalityRow {
            f_id: plan.functions[c.fi].id.clone(),
            n,
            rep: c.rep,
            scaled_error: r.map(|r| (n as f64).sqrt() * (r - truth[c.fi])),
        })
    })?;

    let mut summary = Vec::new();
    let mut qq = Vec::new();
    for (g, group) in rows.chunks(plan.replicates).enumerate() {
        let (f_id, n) = (group[0].f_id.clone(), group[0].n);
        debug_assert_eq!(plan.sizes[g % plan.sizes.len()], n);
        let vals: Vec<f64> = group.iter().filter_map(|r| r.scaled_error).collect();
        if vals.is_empty() {
            continue;
        }
        let pairs = stats::normal_qq_pairs(&vals);
        summary.push(NormalitySummary {
            f_id: f_id.clone(),
            n,
            count: vals.len(),
            mean: stats::mean(&vals),
            variance: stats::sample_variance(&vals),
            qq_correlation: stats::correlation(&pairs),
        });
        qq.extend(pairs.into_iter().map(|(q, z)| QqPoint {
            f_id: f_id.clone(),
            n,
            normal_quantile: q,
            studentized: z,
        }));
    }
    Ok(NormalityStudy {
        k,
        truth,
        rows,
        summary,
        qq,
    })
}

impl NormalityStudy {
    pub fn write_rows_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["f_id", "n", "rep", "sqrt_n_times_error"])?;
        for r in &self.rows {
            out.write_record([
                r.f_id.clone(),
                r.n.to_string(),
                r.rep.to_string(),
                fmt_opt(r.scaled_error),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "f_id",
            "n",
            "k",
            "count",
            "mean",
            "variance",
            "qq_correlation",
        ])?;
        for s in &self.summary {
            out.write_record([
                s.f_id.clone(),
                s.n.to_string(),
                self.k.to_string(),
                s.count.to_string(),
                fmt_opt(s.mean),
                fmt_opt(s.variance),
                fmt_opt(s.qq_correlation),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_qq_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["f_id", "n", "normal_quantile", "studentized_error"])?;
        for p in &self.qq {
            out.write_record([
                p.f_id.clone(),
                p.n.to_string(),
                p.normal_quantile.to_string(),
                p.studentized.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub f_id: String,
    pub n: Option<u64>,
    pub k: Option<u32>,
    pub count: usize,
    pub mean: f64,
    pub variance: Option<f64>,
    pub quartiles: stats::Quartiles,
}

/// Groups long-format rows by `(f_id, n, k)` (whichever are present) and
/// summarizes the value column, the last column that is not a key or
/// `rep`. Empty values are skipped. Output is sorted by key.
pub fn summarize<R: Read>(inputs: Vec<R>) -> Result<Vec<SummaryRow>> {
    type Key = (String, Option<u64>, Option<u32>);
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    let mut schema: Option<Vec<String>> = None;
    for input in inputs {
        let mut rdr = csv::Reader::from_reader(input);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        match &schema {
            Some(s) if *s != headers => {
                return Err(Error::Format(format!(
                    "mismatched headers {headers:?} vs {s:?}"
                )));
            }
            _ => schema = Some(headers.clone()),
        }
        let col = |name: &str| headers.iter().position(|h| h == name);
        let f_col = col("f_id").ok_or_else(|| Error::Format("missing f_id column".into()))?;
        let (n_col, k_col) = (col("n"), col("k"));
        let value_col = (0..headers.len())
            .rev()
            .find(|&i| !matches!(headers[i].as_str(), "f_id" | "n" | "k" | "rep"))
            .ok_or_else(|| Error::Format("no value column".into()))?;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Format(format!("row {}: invalid {what}", line + 2));
            let n = match n_col {
                Some(i) => Some(rec[i].parse::<u64>().map_err(|_| bad("n"))?),
                None => None,
            };
            let k = match k_col {
                Some(i) => Some(rec[i].parse::<u32>().map_err(|_| bad("k"))?),
                None => None,
            };
            let raw = rec[value_col].trim();
            let entry = groups.entry((rec[f_col].to_string(), n, k)).or_default();
            if !raw.is_empty() {
                entry.push(raw.parse::<f64>().map_err(|_| bad(&headers[value_col]))?);
            }
        }
    }
    Ok(groups
        .into_iter()
        .filter_map(|((f_id, n, k), vals)| {
            let quartiles = stats::quartiles(&vals)?;
            Some(SummaryRow {
                f_id,
                n,
                k,
                count: vals.len(),
                mean: stats::mean(&vals)?,
                variance: stats::sample_variance(&vals),
                quartiles,
            })
        })
        .collect())
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "f_id", "n", "k", "count", "mean", "variance", "min", "q1", "median", "q3", "max",
    ])?;
    for r in rows {
        let q = &r.quartiles;
        out.write_record([
            r.f_id.clone(),
            r.n.map(|v| v.to_string()).unwrap_or_default(),
            r.k.map(|v| v.to_string()).unwrap_or_default(),
            r.count.to_string(),
            r.mean.to_string(),
            fmt_opt(r.variance),
            q.min.to_string(),
            q.q1.to_string(),
            q.median.to_string(),
            q.q3.to_string(),
            q.max.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Consistency,
    Variance,
    Normality,
}

impl std::str::FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistency" => Ok(Study::Consistency),
            "variance" => Ok(Study::Variance),
            "normality" => Ok(Study::Normality),
            other => Err(Error::Config(format!("unknown study {other:?}"))),
        }
    }
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<File> {
    let path = dir.join(name);
    let file = File::create(&path)?;
    written.push(path);
    Ok(file)
}

/// Runs a study and writes its CSV files into `out_dir`; returns the paths.
pub fn run_study_to_dir(
    plan: &ExperimentPlan,
    study: Study,
    k: u32,
    out_dir: &Path,
    exec: Execution,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match study {
        Study::Consistency => {
            let rows = run_consistency_study(plan, exec)?;
            let mut buf = Vec::new();
            write_consistency_csv(&rows, &mut buf)?;
            create(out_dir, "consistency.csv", &mut written)?.write_all(&buf)?;
            let summary = summarize(vec![buf.as_slice()])?;
            write_summary_csv(
                &summary,
                create(out_dir, "consistency_summary.csv", &mut written)?,
            )?;
        }
        Study::Variance => {
            let rows = run_variance_study(plan, exec)?;
            write_variance_csv(&rows, create(out_dir, "variance.csv", &mut written)?)?;
            let meta = serde_json::json!({
                "variance": "unbiased",
                "s_k": "raw r_hat_k",
                "s_k_normalized": "r_hat_k / r_hat_1",
                "n": variance_study_size(plan),
                "replicates": plan.replicates,
                "master_seed": plan.master_seed,
            });
            let mut f = create(out_dir, "variance.meta.json", &mut written)?;
            serde_json::to_writer_pretty(&mut f, &meta)?;
            writeln!(f)?;
        }
        Study::Normality => {
            let s = run_normality_study(plan, k, exec)?;
            s.write_rows_csv(create(out_dir, "normality.csv", &mut written)?)?;
            s.write_summary_csv(create(out_dir, "normality_summary.csv", &mut written)?)?;
            s.write_qq_csv(create(out_dir, "normality_qq.csv", &mut written)?)?;
        }
    }
    Ok(written)
}
