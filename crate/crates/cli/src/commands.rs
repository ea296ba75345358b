//! Subcommand drivers. Every artifact embeds the resolved [`RunConfig`].

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use ssc_core::io::{write_atomic, write_json_atomic};
use ssc_core::state_evolution::{mse_floor, tol_e0};
use ssc_core::thresholds::ThresholdReport;
use ssc_core::verification::{run_suite, LemmaReport, SuiteConfig};
use ssc_core::*;

use crate::config::{OutputFormat, RunConfig, SeMode};

/// Whether the analysis itself succeeded; errors are reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    ChecksFailed,
}

struct Writer<'a> {
    dir: &'a Path,
    config_line: String,
    written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        Ok(Self { dir: &cfg.out, config_line: serde_json::to_string(cfg)?, written: Vec::new() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV preceded by a `# config=` comment line.
    fn csv<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let line = &self.config_line;
        write_atomic(&path, |w| {
            writeln!(w, "# config={line}")?;
            body(w)
        })
        .with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, cfg: &RunConfig, result: impl Serialize) -> Result<()> {
        let path = self.path(name);
        write_json_atomic(&path, &json!({ "config": cfg, "result": result }))
            .with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    fn report(&self) {
        for p in &self.written {
            println!("wrote {}", p.display());
        }
    }
}

fn rate_tables(cfg: &RunConfig, params: &UnderlyingParams) -> Result<Tables> {
    let grid = TableGrid { n_points: cfg.table_points, ..TableGrid::default_for(params) };
    Ok(Tables::build(params, &grid, &cfg.mc())?)
}

fn threshold_factory(cfg: &RunConfig, snr: f64) -> Result<CachedTableFactory> {
    let c = capacity(snr);
    Ok(CachedTableFactory::for_rates(cfg.mc(), 1.0 / snr, c / 100.0, c, cfg.table_points)?)
}

pub fn cmd_tables(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let tables = rate_tables(cfg, &params)?;
    let mut w = Writer::new(cfg)?;
    match cfg.format {
        OutputFormat::Csv => {
            w.csv(&format!("mmse_B{}.csv", cfg.b), |out| tables.mmse.write_csv(out))?;
            w.csv(&format!("entropy_B{}.csv", cfg.b), |out| tables.entropy.write_csv(out))?;
        }
        OutputFormat::Json => {
            let table = |t: &MonotoneTable| {
                json!({ "meta": t.meta(), "sigma": t.sigma_grid(), "value": t.values(), "stderr": t.stderrs() })
            };
            w.json(&format!("tables_B{}.json", cfg.b), cfg, json!({ "mmse": table(&tables.mmse), "entropy": table(&tables.entropy) }))?;
        }
    }
    w.report();
    Ok(Outcome::Ok)
}

pub fn cmd_se(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let tables = rate_tables(cfg, &params)?;
    let e0 = mse_floor(&params, &tables.mmse, &cfg.iteration())?;
    let tol = tol_e0(e0, &params, &tables.mmse, &cfg.iteration());
    let mut w = Writer::new(cfg)?;
    match cfg.se_mode {
        SeMode::Underlying => {
            let init = cfg.e_init.unwrap_or(1.0);
            let rep = iterate_underlying(init, &params, &tables.mmse, &cfg.iteration().traced())?;
            let summary = json!({
                "mode": "underlying", "e_init": init, "E0": e0, "tol_e0": tol,
                "reaches_floor": (rep.final_value - e0).abs() <= tol,
                "report": FixedPointReport { trace: Vec::new(), ..rep.clone() },
            });
            if cfg.format == OutputFormat::Csv {
                w.csv("se_underlying.csv", |out| {
                    writeln!(out, "t,E")?;
                    for (t, e) in rep.trace.iter().enumerate() {
                        writeln!(out, "{t},{e:.17e}")?;
                    }
                    Ok(())
                })?;
                w.json("se_underlying.json", cfg, summary)?;
            } else {
                w.json("se_underlying.json", cfg, json!({ "summary": summary, "trace": rep.trace }))?;
            }
            if !rep.converged {
                log::warn!("underlying SE did not converge in {} iterations", rep.iterations);
            }
        }
        SeMode::Coupled => {
            let j = CouplingMatrix::new(cfg.gamma, cfg.w, &cfg.design_function()?)?;
            let init = match cfg.e_init {
                Some(e) => ErrorProfile::flat(cfg.gamma, cfg.w, e)?,
                None => ErrorProfile::pinned_ones(cfg.gamma, cfg.w),
            };
            let rep = iterate_coupled(&init, &j, &params, &tables.mmse, &cfg.coupled_iteration().traced())?;
            let max_entry = rep.final_value.values.iter().copied().fold(0.0, f64::max);
            let summary = json!({
                "mode": "coupled", "init": if cfg.e_init.is_some() { "flat" } else { "pinned_ones" },
                "E0": e0, "tol_e0": tol, "max_entry": max_entry, "success": max_entry <= e0 + tol,
                "report": FixedPointReport { trace: Vec::new(), ..rep.clone() },
            });
            if cfg.format == OutputFormat::Csv {
                w.csv("se_coupled.csv", |out| {
                    writeln!(out, "t,r,E_r")?;
                    for (t, p) in rep.trace.iter().enumerate() {
                        for (r, e) in p.values.iter().enumerate() {
                            writeln!(out, "{t},{},{e:.17e}", r + 1)?;
                        }
                    }
                    Ok(())
                })?;
                w.json("se_coupled.json", cfg, summary)?;
            } else {
                let trace: Vec<&Vec<f64>> = rep.trace.iter().map(|p| &p.values).collect();
                w.json("se_coupled.json", cfg, json!({ "summary": summary, "trace": trace }))?;
            }
            if !rep.converged {
                log::warn!("coupled SE did not converge in {} iterations", rep.iterations);
            }
        }
    }
    w.report();
    Ok(Outcome::Ok)
}

pub fn cmd_potential(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let tables = rate_tables(cfg, &params)?;
    let curve = PotentialCurve::uniform(&params, &tables, cfg.potential_points)?;
    let gap = free_energy_gap(&params, &tables, cfg.gap_grid, &cfg.iteration())?;
    let mut w = Writer::new(cfg)?;
    match cfg.format {
        OutputFormat::Csv => {
            w.csv("potential.csv", |out| curve.write_csv(out))?;
            w.json("gap.json", cfg, gap)?;
        }
        OutputFormat::Json => w.json("potential.json", cfg, json!({ "curve": curve, "gap": gap }))?,
    }
    println!("Delta F_u = {}", if gap.delta_f.is_finite() { format!("{:.6e}", gap.delta_f) } else { "inf".into() });
    w.report();
    Ok(Outcome::Ok)
}

/// Threshold triple at one `(B, snr)`.
struct Row {
    b: usize,
    snr: f64,
    reports: [(&'static str, std::result::Result<ThresholdReport, String>); 3],
}

impl Row {
    fn value(&self, i: usize) -> f64 {
        self.reports[i].1.as_ref().map_or(f64::NAN, |r| r.value)
    }

    fn failed(&self) -> bool {
        self.reports.iter().any(|(_, r)| r.is_err())
    }

    fn to_json(&self) -> Value {
        let mut m = serde_json::Map::new();
        for (name, r) in &self.reports {
            m.insert((*name).into(), match r {
                Ok(rep) => json!(rep),
                Err(e) => json!({ "error": e }),
            });
        }
        m.insert("B".into(), json!(self.b));
        m.insert("snr".into(), json!(self.snr));
        m.insert("C".into(), json!(capacity(self.snr)));
        Value::Object(m)
    }
}

fn threshold_row(cfg: &RunConfig, b: usize, snr: f64) -> Result<Row> {
    let factory = threshold_factory(cfg, snr)?;
    let base = UnderlyingParams::from_snr(b, 1.0, snr)?;
    let opts = cfg.threshold_options();
    let design = cfg.design_function()?;
    let e = |r: ssc_core::Result<ThresholdReport>| r.map_err(|e| e.to_string());
    let row = Row {
        b,
        snr,
        reports: [
            ("R_u", e(amp_threshold_underlying(&base, &factory, &opts))),
            ("R_pot", e(potential_threshold(&base, &factory, &opts))),
            ("R_c", e(amp_threshold_coupled(&base, cfg.gamma, cfg.w, &design, &factory, &opts))),
        ],
    };
    for (name, r) in &row.reports {
        if let Err(msg) = r {
            eprintln!("{name} at B={b} snr={snr}: {msg}");
        }
    }
    Ok(row)
}

const SWEEP_HEADER: &str = "B,snr,Gamma,w,R_u,R_pot,R_c,C";

fn write_rows(out: &mut dyn Write, cfg: &RunConfig, rows: &[Row]) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.b, r.snr, cfg.gamma, cfg.w, r.value(0), r.value(1), r.value(2), capacity(r.snr)
        )?;
    }
    Ok(())
}

fn emit_rows(cfg: &RunConfig, rows: &[Row], stem: &str) -> Result<Outcome> {
    let mut w = Writer::new(cfg)?;
    let json_rows: Vec<Value> = rows.iter().map(Row::to_json).collect();
    if cfg.format == OutputFormat::Csv {
        w.csv(&format!("{stem}.csv"), |out| write_rows(out, cfg, rows))?;
    }
    w.json(&format!("{stem}.json"), cfg, json_rows)?;
    for r in rows {
        println!(
            "B={} snr={}: R_u={:.4} R_pot={:.4} R_c(Gamma={}, w={})={:.4} C={:.4}",
            r.b, r.snr, r.value(0), r.value(1), cfg.gamma, cfg.w, r.value(2), capacity(r.snr)
        );
    }
    w.report();
    Ok(if rows.iter().any(Row::failed) { Outcome::ChecksFailed } else { Outcome::Ok })
}

pub fn cmd_thresholds(cfg: &RunConfig) -> Result<Outcome> {
    let row = threshold_row(cfg, cfg.b, cfg.snr)?;
    emit_rows(cfg, &[row], "thresholds")
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let mut rows = Vec::new();
    for &snr in &cfg.sweep_snr {
        for &b in &cfg.sweep_b {
            log::info!("sweep: B={b} snr={snr}");
            rows.push(threshold_row(cfg, b, snr)?);
        }
    }
    emit_rows(cfg, &rows, "sweep")
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params()?;
    let tables = rate_tables(cfg, &params)?;
    let suite = SuiteConfig {
        params,
        gamma: cfg.gamma,
        w: cfg.w,
        w_list: cfg.w_list.clone(),
        design: cfg.design_function()?,
        mc: cfg.mc(),
        h: cfg.h,
        iteration: cfg.iteration(),
        coupled_iteration: cfg.coupled_iteration(),
    };
    let reports = run_suite(&suite, &tables)?;
    print_summary(&reports);
    let mut w = Writer::new(cfg)?;
    w.json("verify.json", cfg, &reports)?;
    w.report();
    Ok(if reports.iter().any(LemmaReport::failed) { Outcome::ChecksFailed } else { Outcome::Ok })
}

fn print_summary(reports: &[LemmaReport]) {
    println!("{:<26} {:<6} {:>14} {:>14}", "check", "status", "measured", "bound");
    for r in reports {
        let first = |v: &[f64]| v.first().map_or("-".to_string(), |x| format!("{x:.4e}"));
        println!("{:<26} {:<6} {:>14} {:>14}", r.name, r.status(), first(&r.measured), first(&r.bound));
        if !r.detail.is_empty() {
            println!("    {}", r.detail);
        }
    }
}
