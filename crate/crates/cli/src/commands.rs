use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use log::{info, warn};
use patina_core::calibration::{calibrate as fit, load_measurements};
use patina_core::config::ForcingMode;
use patina_core::convergence::{battery, ConvergenceReport};
use patina_core::simulation::format_number;
use patina_core::{run, AdvectionScheme, RunConfig, SimulationOutput};

use crate::manifest::RunManifest;
use crate::svg::{Chart, Series};
use crate::{CalibrateArgs, Outcome, RunArgs};

const RATIO_TOLERANCE: f64 = 0.005;
const MIN_TEMPORAL_ORDER: f64 = 1.9;

/// Config file plus command-line overrides.
fn resolve(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(env) = &args.env {
        cfg.forcing.mode = ForcingMode::TimeSeries;
        cfg.forcing.env = Some(env.clone());
    }
    if args.chamber {
        cfg.forcing.mode = ForcingMode::ConstantChamber;
    }
    if args.cycles {
        cfg.forcing.mode = ForcingMode::CycleSchedule;
    }
    if args.central_advection {
        cfg.grid.advection = AdvectionScheme::Central;
    }
    if let Some(a) = args.seed_a {
        cfg.seeds.a0 = a;
    }
    if let Some(b) = args.seed_b {
        cfg.seeds.b0 = b;
    }
    if let Some(h) = args.horizon_hours {
        cfg.horizon_hours = h;
    }
    Ok(cfg)
}

fn manifest_for(command: &str, args: &RunArgs, cfg: &RunConfig) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, cfg.to_text());
    if let Some(p) = &args.config {
        m.add_input(p)?;
    }
    if cfg.forcing.mode == ForcingMode::TimeSeries {
        if let Some(p) = &cfg.forcing.env {
            m.add_input(p)?;
        }
    }
    Ok(m)
}

fn write_output(dir: &Path, name: &str, contents: &str, manifest: &mut RunManifest) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    manifest.add_output(name, contents.as_bytes());
    Ok(())
}

fn fronts_chart(out: &SimulationOutput) -> Chart {
    let series = |name: &str, f: fn(&patina_core::FrontState) -> f64| {
        Series::line(name, out.records.iter().map(|r| (r.t_hours, f(&r.fronts))).collect())
    };
    Chart {
        title: "Interface positions".into(),
        x_label: "time (h)".into(),
        y_label: "position (cm)".into(),
        series: vec![
            series("a(t)  copper/cuprite", |f| f.a),
            series("beta(t)  cuprite/brochantite", |f| f.beta),
            series("gamma(t)  brochantite/air", |f| f.gamma),
        ],
    }
}

pub fn simulate(args: &RunArgs) -> Result<Outcome> {
    let started = Instant::now();
    let cfg = resolve(args)?;
    let sim = cfg.simulation()?;
    let mut manifest = manifest_for("simulate", args, &cfg)?;
    let out = run(&sim)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_output(&args.out, "simulation.csv", &out.to_csv(), &mut manifest)?;
    write_output(&args.out, "fronts.svg", &fronts_chart(&out).render(), &mut manifest)?;
    write_output(&args.out, "resolved.cfg", &cfg.to_text(), &mut manifest)?;
    let last = out.last();
    if last.clamps.velocity > 0 || last.clamps.concentration > 0 {
        warn!(
            "positivity repairs: {} rate clamps, {} concentration clamps",
            last.clamps.velocity, last.clamps.concentration
        );
    }
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(&args.out)?;
    println!(
        "t = {} h: a = {} cm, gamma = {} cm, total = {} cm ({} steps)",
        format_number(last.t_hours),
        format_number(last.fronts.a),
        format_number(last.fronts.gamma),
        format_number(last.total),
        out.steps
    );
    Ok(Outcome::Ok)
}

pub fn calibrate(args: &CalibrateArgs) -> Result<Outcome> {
    let started = Instant::now();
    let mut cfg = resolve(&args.run)?;
    if args.no_tie_dw_ds {
        cfg.calibration.tie_dw_ds = false;
    } else if args.tie_dw_ds {
        cfg.calibration.tie_dw_ds = true;
    }
    let sim = cfg.simulation()?;
    let measurements = load_measurements(&args.measurements)?;
    let mut manifest = manifest_for("calibrate", &args.run, &cfg)?;
    manifest.add_input(&args.measurements)?;

    let result = fit(&cfg.diffusivities, &measurements, &sim, &cfg.calibration)?;
    info!("calibration used {} simulator runs", result.evaluations);

    let fitted = RunConfig {
        diffusivities: result.diffusivities,
        ..cfg.clone()
    };
    let horizon = measurements.iter().map(|m| m.time).fold(0.0, f64::max);
    let curve = run(&patina_core::SimulationConfig {
        diffusivities: result.diffusivities,
        horizon_hours: horizon,
        stride: 1,
        ..sim
    })?;
    let chart = Chart {
        title: "Total patina thickness: simulation and measurements".into(),
        x_label: "time (h)".into(),
        y_label: "thickness (cm)".into(),
        series: vec![
            Series::line("simulation", curve.records.iter().map(|r| (r.t_hours, r.total)).collect()),
            Series::points(
                "measured (mean +/- std)",
                measurements.iter().map(|m| (m.time, m.mean)).collect(),
                measurements.iter().map(|m| m.std).collect(),
            ),
        ],
    };

    fs::create_dir_all(&args.run.out).with_context(|| format!("creating {}", args.run.out.display()))?;
    write_output(&args.run.out, "calibration.csv", &result.to_csv(), &mut manifest)?;
    write_output(&args.run.out, "calibration.svg", &chart.render(), &mut manifest)?;
    write_output(&args.run.out, "calibrated.cfg", &fitted.to_text(), &mut manifest)?;
    if !result.converged {
        manifest.status = "budget exhausted".into();
    }
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    manifest.write(&args.run.out)?;

    let d = &result.diffusivities;
    println!(
        "D_g = {} D_s = {} D_o = {} D_w = {} cm^2/s",
        format_number(d.d_g),
        format_number(d.d_s),
        format_number(d.d_o),
        format_number(d.d_w)
    );
    println!("residual = {} after {} runs", format_number(result.residual), result.evaluations);
    for p in &result.points {
        println!(
            "  t = {} h: measured {} +/- {} cm, predicted {} cm",
            format_number(p.time),
            format_number(p.measured),
            format_number(p.std),
            format_number(p.predicted)
        );
    }
    if result.converged {
        Ok(Outcome::Ok)
    } else {
        eprintln!("error: evaluation budget exhausted; best point so far was written");
        Ok(Outcome::Exhausted)
    }
}

pub fn validate(args: &RunArgs) -> Result<Outcome> {
    let cfg = resolve(args)?;
    let out = run(&cfg.simulation()?)?;
    // growth after t = 0, so the seed layers do not count as converted material
    let moles = &out.last().moles.growth_since(&out.records[0].moles);
    println!("mole balance of growth over {} h", format_number(out.last().t_hours));
    println!(
        "  copper wasted {} mol/cm2, cuprite formed {} mol/cm2",
        format_number(moles.copper_wasted),
        format_number(moles.cuprite_formed)
    );
    println!(
        "  cuprite wasted {} mol/cm2, brochantite formed {} mol/cm2",
        format_number(moles.cuprite_wasted),
        format_number(moles.brochantite_formed)
    );
    let ratios = [
        ("copper wasted / cuprite formed", moles.copper_ratio()),
        ("cuprite wasted / brochantite formed", moles.cuprite_ratio()),
    ];
    if ratios.iter().all(|(_, r)| r.is_none()) {
        println!("no growth; ratios undefined");
        warn!("no growth; ratios undefined");
        return Ok(Outcome::Ok);
    }
    let mut ok = true;
    for (name, r) in ratios {
        match r {
            Some(r) => {
                let dev = (r - 2.0) / 2.0;
                let pass = dev.abs() <= RATIO_TOLERANCE;
                ok &= pass;
                println!(
                    "  {name} = {r:.5} (deviation {:+.3} %) {}",
                    100.0 * dev,
                    if pass { "ok" } else { "FAILED" }
                );
            }
            None => {
                println!("  {name}: undefined (no growth)");
                warn!("{name} undefined: no growth");
            }
        }
    }
    Ok(if ok { Outcome::Ok } else { Outcome::CheckFailed })
}

fn print_convergence(r: &ConvergenceReport) {
    println!("temporal (scalar IMEX test, u' = -u to t = 1)");
    println!("  {:>10}  {:>12}  {:>6}", "dt", "error", "order");
    for (i, (dt, e)) in r.temporal.rows.iter().enumerate() {
        let order = if i == 0 { String::from("-") } else { format!("{:.3}", r.temporal.orders[i - 1]) };
        println!("  {:>10}  {:>12}  {:>6}", format_number(*dt), format_number(*e), order);
    }
    let scheme = match r.scheme {
        AdvectionScheme::Upwind => "upwind",
        AdvectionScheme::Central => "central",
    };
    println!("spatial ({scheme} advection, manufactured advection-diffusion)");
    println!("  {:>10}  {:>12}  {:>6}", "dz", "error", "order");
    for (i, (h, e)) in r.spatial.rows.iter().enumerate() {
        let order = if i == 0 { String::from("-") } else { format!("{:.3}", r.spatial.orders[i - 1]) };
        println!("  {:>10}  {:>12}  {:>6}", format_number(*h), format_number(*e), order);
    }
    if let Some(sc) = &r.self_convergence {
        println!(
            "self-convergence: total {} cm -> {} cm under refinement ({:.4} %)",
            format_number(sc.coarse_total),
            format_number(sc.fine_total),
            100.0 * sc.relative_change()
        );
    }
    println!("observed temporal order {:.3}", r.temporal.min_order());
    println!("observed spatial order {:.3}", r.spatial.observed());
}

pub fn convergence(args: &RunArgs) -> Result<Outcome> {
    let cfg = resolve(args)?;
    let sim = cfg.simulation()?;
    let report = battery(cfg.grid.advection, Some(&sim))?;
    print_convergence(&report);
    if report.temporal.min_order() < MIN_TEMPORAL_ORDER {
        eprintln!(
            "error: temporal order {:.3} below {MIN_TEMPORAL_ORDER}",
            report.temporal.min_order()
        );
        return Ok(Outcome::CheckFailed);
    }
    Ok(Outcome::Ok)
}
