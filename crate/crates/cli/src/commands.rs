use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::BufReader;

use anyhow::{Context, Result};
use bt_core::equivariant::{
    classify, extract_multipliers, read_multipliers_csv, write_multipliers_csv, ClassifyOptions,
    EquivariantQuantization, Verdict,
};
use bt_core::operator::{DensityState, HermitianOperator};
use bt_core::povm::{run_noise_trials, variance_identity_check, write_trials_csv};
use bt_core::quantization::{
    axiom_report, harmonic_probes, rawnsley_function, standard_cocycle, write_operator, Quantizer, AXIOM_NAMES,
};
use bt_core::smearing::{expected_c_plus, expected_total_unsharpness};
use bt_core::sphere::{parse_function, ComplexFunction, QuadratureGrid, SphereFunction};
use bt_core::unsharpness::{metric_decompose, metric_reconstruct, total_unsharpness, write_metric_csv};
use bt_core::Error;

use crate::quantizer::QuantizerSpec;
use crate::report::{cell, write_file, Summary};
use crate::settings::{Command, Settings};

/// Invalid input from the user, as opposed to a failed computation.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn as_usage<T, E: fmt::Display>(r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| Usage(e.to_string()).into())
}

fn function(src: &str, flag: &str) -> Result<SphereFunction> {
    as_usage(parse_function(src).map_err(|e| format!("--{flag}: {e}")))
}

fn quantizer(s: &Settings) -> Result<QuantizerSpec> {
    as_usage(QuantizerSpec::parse(&s.quantizer, s.t, s.rho.as_deref(), s.v.as_deref()))
}

fn order_text(order: f64) -> String {
    if order.is_infinite() {
        "inf".into()
    } else {
        format!("{order:.6}")
    }
}

/// Local order in `ℏ = 1/k` between two levels.
fn tail_order(k0: usize, k1: usize, r0: f64, r1: f64) -> f64 {
    if r1 <= 0.0 {
        return f64::INFINITY;
    }
    (r0 / r1).ln() / (k1 as f64 / k0 as f64).ln()
}

/// Runs the selected command; `Ok(false)` means a check failed.
pub fn run(s: &Settings) -> Result<bool> {
    match s.command {
        Command::Axioms => axioms(s),
        Command::Metric => metric(s),
        Command::Classify => classify_cmd(s),
        Command::Noise => noise(s),
        Command::Rawnsley => rawnsley(s),
        Command::Toeplitz => toeplitz(s),
    }
}

fn axioms(s: &Settings) -> Result<bool> {
    if s.ks.len() < 3 {
        return usage(format!("axioms needs at least three levels, got {}", s.ks.len()));
    }
    let spec = quantizer(s)?;
    let f = function(&s.f, "f")?;
    let g = function(&s.g, "g")?;
    let band = f.band() + g.band() + 2;
    let family = spec.family(&s.ks, band)?;
    let bracket = f.poisson_bracket(&g) * 0.5;
    let cocycle = match &spec {
        QuantizerSpec::Standard => standard_cocycle(&f, &g),
        // a vanishing symmetric part is the point of this construction
        QuantizerSpec::Metaplectic => ComplexFunction::new(SphereFunction::zero(0), bracket),
        _ => ComplexFunction::new(expected_c_plus(&f, &g, |p| spec.expected_metric(p), band), bracket),
    };
    let rec = axiom_report(&family, &f, &g, &cocycle)?;

    let mut csv = String::from("k,hbar,r1,r2,r3,r4,r5\n");
    for (k, r) in rec.ks.iter().zip(&rec.residuals) {
        let cols: Vec<String> = r.iter().map(|v| cell(*v)).collect();
        csv += &format!("{k},{},{}\n", cell(1.0 / *k as f64), cols.join(","));
    }
    write_file(&s.out, "convergence.csv", csv.as_bytes())?;

    let mut sum = Summary::default();
    sum.value("command", "axioms");
    sum.value("quantizer", family[0].label());
    sum.value("f", &s.f);
    sum.value("g", &s.g);
    for (i, o) in rec.orders.iter().enumerate() {
        sum.value(&format!("slope.r{}", i + 1), order_text(*o));
    }
    let n = rec.ks.len();
    for (i, o) in rec.orders.iter().enumerate() {
        let name = format!("r{}", i + 1);
        let min = s.tol(&name);
        // the check uses the finest pair: small levels are pre-asymptotic
        let tail = if o.is_infinite() {
            f64::INFINITY
        } else {
            tail_order(rec.ks[n - 2], rec.ks[n - 1], rec.residuals[n - 2][i], rec.residuals[n - 1][i])
        };
        sum.value(&format!("tail_slope.r{}", i + 1), order_text(tail));
        let detail = if o.is_infinite() {
            format!("{} holds to roundoff at every level", AXIOM_NAMES[i])
        } else {
            format!("{} order {} between k = {} and {} >= {min}", AXIOM_NAMES[i], order_text(tail), rec.ks[n - 2], rec.ks[n - 1])
        };
        sum.check(&name, tail >= min, detail);
    }
    sum.finish(&s.out)
}

fn metric(s: &Settings) -> Result<bool> {
    let &[coarse_k, fine_k] = s.ks.as_slice() else {
        return usage(format!("metric needs a pair of levels k,2k; got {} level(s)", s.ks.len()));
    };
    if fine_k != 2 * coarse_k {
        return usage(format!("metric needs levels k,2k; got {coarse_k},{fine_k}"));
    }
    let spec = quantizer(s)?;
    let coarse = spec.build(coarse_k, 2)?;
    let fine = spec.build(fine_k, 2)?;
    let grid = QuadratureGrid::build(s.grid);
    let field = metric_reconstruct(&coarse, &fine, &grid, None)?;
    let total = total_unsharpness(&field);
    let expected = expected_total_unsharpness(|p| spec.expected_metric(p));

    let mut sum = Summary::default();
    sum.value("command", "metric");
    sum.value("quantizer", coarse.label());
    sum.value("levels", format!("{coarse_k},{fine_k}"));
    sum.value("points", field.points.len());
    sum.value("total_unsharpness", format!("{total:.12}"));
    sum.value("total_over_2pi", format!("{:.12}", total / (2.0 * PI)));
    sum.value("expected_total", format!("{expected:.12}"));
    match metric_decompose(&field) {
        Ok(dec) => {
            let mut buf = Vec::new();
            write_metric_csv(&mut buf, &field, &dec)?;
            write_file(&s.out, "metric.csv", &buf)?;
            sum.value("min_rho_eigenvalue", format!("{:.12e}", dec.min_rho_eigenvalue()));
        }
        Err(e) => {
            sum.value("decomposition", &e);
            if spec.is_povm() {
                sum.check("decomposition", false, e.to_string());
            }
        }
    }
    let rel = (total - expected).abs() / expected.max(2.0 * PI);
    let tol = s.tol("total");
    sum.check("total", rel <= tol, format!("relative deviation {rel:.3e} from {expected:.6} <= {tol}"));
    let at_least = total >= 2.0 * PI - s.tol("least");
    sum.value("verdict", if at_least { "total >= 2pi" } else { "total < 2pi" });
    if spec.is_povm() {
        sum.check("least", at_least, format!("total {total:.6} against 2pi = {:.6}", 2.0 * PI));
    }
    sum.finish(&s.out)
}

fn classify_cmd(s: &Settings) -> Result<bool> {
    let opts = ClassifyOptions {
        mu_tol: s.tol("mu"),
        min_exponent: s.tol("exponent"),
        ..ClassifyOptions::default()
    };
    let mut sum = Summary::default();
    sum.value("command", "classify");
    let (family, spec): (Vec<EquivariantQuantization>, Option<QuantizerSpec>) = match &s.multipliers {
        Some(path) => {
            let file = as_usage(File::open(path).map_err(|e| format!("{}: {e}", path.display())))?;
            let family = read_multipliers_csv(BufReader::new(file))
                .with_context(|| format!("reading {}", path.display()))?;
            sum.value("source", path.display());
            (family, None)
        }
        None => {
            if s.ks.len() < 2 {
                return usage("classify needs at least two levels");
            }
            let spec = quantizer(s)?;
            sum.value("source", &s.quantizer);
            let mut family = Vec::new();
            for q in spec.family(&s.ks, opts.max_degree)? {
                match extract_multipliers(&q, opts.max_degree) {
                    Ok(ex) => {
                        sum.value(&format!("equivariance_residual.k{}", q.level()), format!("{:.3e}", ex.equivariance_residual));
                        family.push(ex.quantization);
                    }
                    Err(e @ Error::NotEquivariant { .. }) => {
                        sum.value("verdict", "not-equivariant");
                        sum.check("equivariant", false, format!("level {}: {e}", q.level()));
                        return sum.finish(&s.out);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            (family, Some(spec))
        }
    };
    let mut buf = Vec::new();
    write_multipliers_csv(&mut buf, &family)?;
    write_file(&s.out, "multipliers.csv", &buf)?;

    let rep = classify(&family, &opts)?;
    let mut text = Vec::new();
    rep.write_text(&mut text)?;
    write_file(&s.out, "report.txt", &text)?;

    sum.value("mu", format!("{:.12}", rep.mu));
    sum.value("t", rep.t.map_or("none".into(), |t| format!("{t:.12}")));
    sum.value("exponent", order_text(rep.exponent));
    sum.value("verdict", rep.verdict);
    match spec {
        Some(QuantizerSpec::Standard) | Some(QuantizerSpec::Heat(0.0)) => {
            sum.check("verdict", rep.verdict == Verdict::EquivalentToStandard, rep.verdict.to_string());
        }
        Some(QuantizerSpec::Heat(t0)) => {
            let tol = s.tol("t") * t0;
            let ok = matches!(rep.verdict, Verdict::EquivalentToHeat(t) if (t - t0).abs() <= tol);
            sum.check("verdict", ok, format!("{} against heat t = {t0} +- {tol:.3e}", rep.verdict));
        }
        Some(QuantizerSpec::Metaplectic) => {
            sum.check("verdict", rep.verdict == Verdict::NonPovm, rep.verdict.to_string());
        }
        _ => {}
    }
    sum.finish(&s.out)
}

fn noise(s: &Settings) -> Result<bool> {
    let spec = quantizer(s)?;
    let f = function(&s.f, "f")?;
    let trials = run_noise_trials(&s.ks, s.trials, s.seed)?;
    let mut buf = Vec::new();
    write_trials_csv(&mut buf, &trials)?;
    write_file(&s.out, "trials.csv", &buf)?;

    let min = trials.iter().map(|t| t.result.slack).fold(f64::INFINITY, f64::min);
    let mut worst_variance = 0.0f64;
    for &k in &s.ks {
        let q = spec.build(k, 2 * f.band())?;
        for j in 0..8u64 {
            let state = DensityState::random(k + 1, s.seed.wrapping_mul(31).wrapping_add(k as u64 * 8 + j));
            worst_variance = worst_variance.max(variance_identity_check(&q, &f, &state)?);
        }
    }

    let mut sum = Summary::default();
    sum.value("command", "noise");
    sum.value("trials", trials.len());
    sum.value("seed", s.seed);
    sum.value("min_slack", format!("{min:.6e}"));
    sum.value("variance_identity_residual", format!("{worst_variance:.3e}"));
    let tol = s.tol("slack");
    sum.check("slack", min >= -tol, format!("min slack {min:.3e} >= -{tol:e}"));
    let tol = s.tol("variance");
    sum.check("variance", worst_variance <= tol, format!("variance identity residual {worst_variance:.3e} <= {tol:e}"));
    sum.finish(&s.out)
}

fn rawnsley(s: &Settings) -> Result<bool> {
    const BAND: usize = 3;
    let spec = quantizer(s)?;
    let probes = harmonic_probes(BAND);
    let expected = spec.expected_correction();
    let mut csv = String::from("k,l,m,density,correction\n");
    let mut sum = Summary::default();
    sum.value("command", "rawnsley");
    sum.value("quantizer", &s.quantizer);
    let mut finest: Option<(usize, f64)> = None;
    for &k in &s.ks {
        let q = spec.build(k, BAND)?;
        let rep = rawnsley_function(&q, &probes, BAND)?;
        for l in 0..=BAND {
            for m in -(l as i64)..=l as i64 {
                csv += &format!("{k},{l},{m},{},{}\n", cell(rep.density.coeff(l, m)), cell(rep.correction.coeff(l, m)));
            }
        }
        sum.value(&format!("mean_correction.k{k}"), format!("{:.12}", rep.mean_correction));
        if let Some(e) = &expected {
            let err = (0..=BAND.max(e.band()))
                .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
                .map(|(l, m)| (rep.correction.coeff(l, m) - e.coeff(l, m)).abs())
                .fold(0.0, f64::max);
            sum.value(&format!("correction_error.k{k}"), format!("{err:.3e}"));
            if finest.is_none_or(|(fk, _)| k > fk) {
                finest = Some((k, err));
            }
        }
    }
    write_file(&s.out, "rawnsley.csv", csv.as_bytes())?;
    if let Some((k, err)) = finest {
        let tol = if spec.correction_is_exact() { s.tol("density") } else { s.tol("r") };
        sum.check("correction", err <= tol, format!("coefficient error {err:.3e} at k = {k} <= {tol:e}"));
    }
    sum.finish(&s.out)
}

fn toeplitz(s: &Settings) -> Result<bool> {
    let spec = quantizer(s)?;
    let f = function(&s.f, "f")?;
    let tol = s.tol("identity");
    let mut sum = Summary::default();
    sum.value("command", "toeplitz");
    sum.value("f", &s.f);
    for &k in &s.ks {
        let q = spec.build(k, f.band())?;
        let a = q.quantize(&f)?;
        let mut buf = Vec::new();
        write_operator(&mut buf, k, &a)?;
        write_file(&s.out, &format!("operator_k{k}.txt"), &buf)?;
        let ev = a.eigenvalues();
        sum.value(&format!("trace.k{k}"), format!("{:.12}", a.trace()));
        sum.value(&format!("spectrum.k{k}"), format!("[{:.12}, {:.12}]", ev[0], ev[ev.len() - 1]));
        let res = q.base().resolution_residual();
        sum.check(&format!("resolution.k{k}"), res <= tol, format!("{res:.3e} <= {tol:e}"));
        let one = q.quantize(&SphereFunction::constant(1.0))?;
        let unital = (&one - &HermitianOperator::identity(k + 1)).operator_norm();
        sum.check(&format!("unital.k{k}"), unital <= tol, format!("{unital:.3e} <= {tol:e}"));
    }
    sum.finish(&s.out)
}
