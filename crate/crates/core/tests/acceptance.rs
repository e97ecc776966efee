//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary under `cargo test`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use bt_core::equivariant::{classify_quantizers, legendre_identity_check, ClassifyOptions, Verdict};
use bt_core::fit::order_in_hbar;
use bt_core::operator::{DensityState, HermitianOperator};
use bt_core::povm::{
    discretize_povm, naimark_dilate, q_pairing_slack, run_noise_trials, variance_identity_check,
};
use bt_core::quantization::{coherent_state, harmonic_probes, rawnsley_function, Quantizer, ToeplitzQuantizer};
use bt_core::smearing::{
    expected_total_unsharpness, heat_quantizer, metaplectic_quantizer, rho_quantizer, vector_twist_quantizer,
    MarkovOptions, RhoField, VectorField,
};
use bt_core::sphere::{QuadratureGrid, SphereFunction, SpherePoint};
use bt_core::unsharpness::{
    cocycle_estimate, cocycle_extrapolate, cocycle_limit, hochschild_residual, leibniz_residual,
    metric_reconstruct, sym_eigenvalues, total_unsharpness, Mat2, MetricField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<(bool, String), bt_core::Error>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

const COARSE: usize = 64;
const FINE: usize = 128;

fn metric_grid() -> QuadratureGrid {
    QuadratureGrid::build(16)
}

fn metric_of<Q: Quantizer>(coarse: &Q, fine: &Q) -> Result<MetricField, bt_core::Error> {
    metric_reconstruct(coarse, fine, &metric_grid(), None)
}

/// `max |λ_i(G − E)| / max |λ_i(E)|` over the field.
fn relative_form_error(field: &MetricField, expected: impl Fn(&SpherePoint) -> Mat2) -> f64 {
    field
        .forms
        .iter()
        .zip(&field.points)
        .map(|(g, p)| {
            let e = expected(p);
            let d = [[g[0][0] - e[0][0], g[0][1] - e[0][1]], [g[1][0] - e[1][0], g[1][1] - e[1][1]]];
            let (lo, hi) = sym_eigenvalues(&d);
            let (elo, ehi) = sym_eigenvalues(&e);
            lo.abs().max(hi.abs()) / elo.abs().max(ehi.abs())
        })
        .fold(0.0, f64::max)
}

fn identity_form(s: f64) -> impl Fn(&SpherePoint) -> Mat2 {
    move |_| [[s, 0.0], [0.0, s]]
}

fn resolution_of_identity() -> Outcome {
    let mut worst = 0.0f64;
    for k in [2, 8, 32, 128] {
        let q = ToeplitzQuantizer::new(k, 0)?;
        let one = q.toeplitz(&SphereFunction::constant(1.0))?;
        worst = worst.max((&one - &HermitianOperator::identity(k + 1)).operator_norm());
    }
    Ok((worst <= 1e-10, format!("max ‖T(1) − I‖ = {worst:.2e}")))
}

/// `(k+1) C(k,m) ∫₀¹ u^m (1−u)^{k−m} (1−2u) du` through Beta-function ratios.
fn beta_oracle(k: usize, m: usize) -> f64 {
    let ln_fact = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
    let ln_binom = ln_fact(k) - ln_fact(m) - ln_fact(k - m);
    let ln_beta = |a: usize, b: usize| ln_fact(a - 1) + ln_fact(b - 1) - ln_fact(a + b - 1);
    let kf = (k + 1) as f64;
    kf * ((ln_binom + ln_beta(m + 1, k - m + 1)).exp() - 2.0 * (ln_binom + ln_beta(m + 2, k - m + 1)).exp())
}

fn closed_form_toeplitz() -> Outcome {
    let mut worst = 0.0f64;
    for k in [2, 8, 32, 128] {
        let q = ToeplitzQuantizer::new(k, 1)?;
        let mut eig = q.toeplitz(&SphereFunction::z())?.eigenvalues();
        eig.reverse();
        for (m, e) in eig.iter().enumerate() {
            let oracle = beta_oracle(k, m);
            let closed = (k as f64 - 2.0 * m as f64) / (k as f64 + 2.0);
            worst = worst.max((e - oracle).abs()).max((oracle - closed).abs());
        }
    }
    Ok((worst <= 1e-10, format!("max eigenvalue deviation {worst:.2e}")))
}

fn berezin_expansion() -> Outcome {
    let z = SphereFunction::z();
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [8, 32, 128] {
        let q = ToeplitzQuantizer::new(k, 1)?;
        let b = q.berezin(&z)?;
        let kf = k as f64;
        let lhs = &(&(&b - &z) * kf) + &(&z * 2.0);
        let sup = lhs.sup_norm();
        let closed = (&lhs - &(&z * (4.0 / (kf + 2.0)))).sup_norm();
        ok &= sup <= 8.0 / kf && closed <= 1e-10;
        detail.push(format!("k={k}: {sup:.4e} (≤ {:.4e})", 8.0 / kf));
    }
    Ok((ok, detail.join(", ")))
}

fn standard_unsharpness() -> Outcome {
    let z = SphereFunction::z();
    let (a, b) = (ToeplitzQuantizer::new(COARSE, 2)?, ToeplitzQuantizer::new(FINE, 2)?);
    let c = cocycle_extrapolate(&a, &b, &z, &z)?;
    let expected = &z.multiply(&z) - &SphereFunction::constant(1.0);
    let rel = (&c.c_plus - &expected).sup_norm() / expected.sup_norm();
    Ok((rel <= 0.05, format!("relative sup error {rel:.3e}")))
}

fn heat_scaling(metrics: &Metrics) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (t, m) in &metrics.heat {
        let rel = relative_form_error(m, identity_form(1.0 + 4.0 * t));
        ok &= rel <= 0.02;
        detail.push(format!("t={t}: {rel:.3e}"));
    }
    Ok((ok, detail.join(", ")))
}

fn markov_construction(metrics: &Metrics) -> Outcome {
    let iso = relative_form_error(&metrics.markov_iso, identity_form(1.5));
    let iso_abs = iso * 1.5;
    let rho = RhoField::ZzRankOne(ZZ_SCALE);
    let expect = |p: &SpherePoint| {
        let r = rho.at(p);
        [[1.0 + r[0][0], r[0][1]], [r[1][0], 1.0 + r[1][1]]]
    };
    let zz = relative_form_error(&metrics.markov_zz, expect);
    let total = total_unsharpness(&metrics.markov_zz);
    let oracle = expected_total_unsharpness(expect);
    let total_rel = (total - oracle).abs() / oracle;
    Ok((
        iso_abs <= 0.075 && zz <= 0.07 && total_rel <= 0.05,
        format!("isotropic |G − 1.5g| ≤ {iso_abs:.3e}, rank-one rel {zz:.3e}, total {total:.5} vs {oracle:.5} ({total_rel:.2e})"),
    ))
}

fn least_unsharpness(metrics: &Metrics) -> Outcome {
    let floor = 2.0 * PI - 0.05;
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, m) in metrics.all() {
        let total = total_unsharpness(m);
        ok &= total >= floor;
        detail.push(format!("{name} {total:.4}"));
    }
    let std_rel = (total_unsharpness(&metrics.standard) - 2.0 * PI).abs() / (2.0 * PI);
    ok &= std_rel <= 0.01;
    Ok((ok, format!("standard off by {std_rel:.2e}; {}", detail.join(", "))))
}

fn noise_inequality() -> Outcome {
    let levels = [2, 4, 8];
    let per_level = 334;
    let trials = run_noise_trials(&levels, per_level, 11)?;
    let noise_min = trials.iter().map(|t| t.result.slack).fold(f64::INFINITY, f64::min);
    let mut pairing_min = f64::INFINITY;
    let mut count = 0;
    for (i, &k) in levels.iter().enumerate() {
        let povm = discretize_povm(&ToeplitzQuantizer::new(k, 0)?);
        let dil = naimark_dilate(&povm)?;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        for _ in 0..per_level {
            let s: Vec<f64> = (0..povm.len()).map(|_| rng.sample(StandardNormal)).collect();
            let t: Vec<f64> = (0..povm.len()).map(|_| rng.sample(StandardNormal)).collect();
            let state = DensityState::random(k + 1, rng.random());
            pairing_min = pairing_min.min(q_pairing_slack(&dil, &s, &t, &state)?);
            count += 1;
        }
    }
    Ok((
        trials.len() >= 1000 && count >= 1000 && noise_min >= -1e-10 && pairing_min >= -1e-10,
        format!(
            "{} trials, min noise slack {noise_min:.3e}; {count} pairings, min Cauchy-Schwarz slack {pairing_min:.3e}",
            trials.len()
        ),
    ))
}

fn variance_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for k in [2, 8, 32] {
        let q = ToeplitzQuantizer::new(k, 6)?;
        for _ in 0..10 {
            let f = SphereFunction::random(3, &mut rng);
            let state = DensityState::random(k + 1, rng.random());
            worst = worst.max(variance_identity_check(&q, &f, &state)?);
        }
    }
    let k = 128;
    let q = ToeplitzQuantizer::new(k, 1)?;
    let state = coherent_state(k, &SpherePoint::new(FRAC_PI_2, 0.0)).density();
    let kvar = k as f64 * state.variance(&q.toeplitz(&SphereFunction::z())?)?;
    // binomial spin distribution on the equator with eigenvalues (k − 2m)/(k + 2)
    let oracle = (k as f64 / (k as f64 + 2.0)).powi(2);
    Ok((
        worst <= 1e-10 && (kvar - 1.0).abs() <= 0.05 && (kvar - oracle).abs() <= 1e-10,
        format!("identity residual {worst:.2e}; k·Var = {kvar:.6} (oracle {oracle:.6})"),
    ))
}

fn legendre_identities() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for n in 1..=40 {
        let (a, b) = legendre_identity_check(n)?;
        worst = (worst.0.max(a), worst.1.max(b));
    }
    Ok((
        worst.0 <= 1e-8 && worst.1 <= 1e-8,
        format!("product {:.2e}, gradient {:.2e}", worst.0, worst.1),
    ))
}

fn classification() -> Outcome {
    let opts = ClassifyOptions::default();
    let levels = [32, 64, 128];
    let heat: Vec<_> = levels.iter().map(|&k| heat_quantizer(k, 6, 0.2)).collect::<Result<_, _>>()?;
    let h = classify_quantizers(&heat, &opts)?;
    let t = h.t.unwrap_or(f64::NAN);
    let heat_ok = (t - 0.2).abs() <= 0.05 * 0.2 && h.exponent >= 1.8 && matches!(h.verdict, Verdict::EquivalentToHeat(_));
    let meta: Vec<_> = levels.iter().map(|&k| metaplectic_quantizer(k, 6)).collect::<Result<_, _>>()?;
    let m = classify_quantizers(&meta, &opts)?;
    let meta_ok = m.verdict == Verdict::NonPovm && m.mu.abs() <= 0.05;
    Ok((
        heat_ok && meta_ok,
        format!(
            "heat: t = {t:.6}, exponent {}, {}; metaplectic: μ = {:.2e}, {}",
            h.exponent, h.verdict, m.mu, m.verdict
        ),
    ))
}

fn rawnsley() -> Outcome {
    let probes = harmonic_probes(3);
    let mut std_err = 0.0f64;
    let mut mean_err = 0.0f64;
    let mut twist = Vec::new();
    for k in [16, 32, 64] {
        let q = ToeplitzQuantizer::new(k, 3)?;
        let r = rawnsley_function(&q, &probes, 3)?;
        let hbar = 1.0 / k as f64;
        std_err = std_err.max((&r.density - &SphereFunction::constant(1.0 + hbar)).sup_norm());
        mean_err = mean_err.max((r.mean_correction - 1.0).abs());
        let tw = vector_twist_quantizer(k, 3, VectorField::rotation([0.3, -0.2, 1.0]))?;
        let rt = rawnsley_function(&tw, &probes, 3)?;
        twist.push((&rt.correction - &r.correction).sup_norm() * k as f64);
    }
    // |r_twist − r| ≤ C ℏ with C bounded (here it vanishes)
    let twist_c = twist.iter().cloned().fold(0.0, f64::max);
    Ok((
        std_err <= 1e-10 && mean_err <= 1e-10 && twist_c <= 1.0,
        format!("|R − (1+ℏ)| ≤ {std_err:.2e}, |⟨r⟩ − 1| ≤ {mean_err:.2e}, twist |Δr|·k ≤ {twist_c:.2e}"),
    ))
}

fn metaplectic_second_order() -> Outcome {
    let p3 = SphereFunction::legendre(3);
    let residual = |k: usize| -> Result<f64, bt_core::Error> {
        let q = metaplectic_quantizer(k, 6)?;
        let t = q.quantize(&p3)?;
        Ok((&t.jordan_product(&t)? - &q.quantize(&p3.multiply(&p3))?).operator_norm())
    };
    let (a, b) = (residual(COARSE)?, residual(FINE)?);
    let ratio = a / b;
    Ok((
        (3.2..=4.8).contains(&ratio),
        format!("residual {a:.3e} → {b:.3e}, ratio {ratio:.3}"),
    ))
}

fn cocycle_algebra() -> Outcome {
    // higher bands are still pre-asymptotic at these levels (k·residual keeps growing)
    let ks = [32, 64, 128];
    let qs: Vec<_> = ks.iter().map(|&k| ToeplitzQuantizer::new(k, 3)).collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut orders = Vec::new();
    for _ in 0..3 {
        let f: Vec<_> = (0..3).map(|_| SphereFunction::random(1, &mut rng)).collect();
        let mut hoch = Vec::new();
        let mut leib = Vec::new();
        for q in &qs {
            let full = |a: &SphereFunction, b: &SphereFunction| cocycle_estimate(q, a, b).map(|e| e.full());
            hoch.push(hochschild_residual(full, &f[0], &f[1], &f[2])?);
            let plus = |a: &SphereFunction, b: &SphereFunction| cocycle_estimate(q, a, b).map(|e| e.c_plus);
            leib.push(leibniz_residual(plus, &f[0], &f[1], &f[2])?);
        }
        orders.push((order_in_hbar(&ks, &hoch, 0.0)?, order_in_hbar(&ks, &leib, 0.0)?));
    }
    let min_order = orders.iter().map(|(a, b)| a.min(*b)).fold(f64::INFINITY, f64::min);
    let max_order = orders.iter().map(|(a, b)| a.max(*b)).fold(0.0, f64::max);

    let levels = [32, 40, 48, 56, 64, 80, 96, 112, 128];
    let family: Vec<_> = levels.iter().map(|&k| ToeplitzQuantizer::new(k, 4)).collect::<Result<_, _>>()?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let f = SphereFunction::random(2, &mut rng);
        let c = cocycle_limit(&family, &f, &f)?;
        worst = worst.max(c.c_plus.extrema().1);
    }
    Ok((
        (0.8..=1.2).contains(&min_order) && max_order <= 1.2 && worst <= 1e-6,
        format!("orders in [{min_order:.3}, {max_order:.3}]; max extrapolated c₊(f,f) = {worst:.2e}"),
    ))
}

const ZZ_SCALE: f64 = 0.5;

/// Metrics shared by the Markov and least-unsharpness criteria.
struct Metrics {
    standard: MetricField,
    heat: Vec<(f64, MetricField)>,
    markov_iso: MetricField,
    markov_zz: MetricField,
    twist_rotation: MetricField,
    twist_gradient: MetricField,
}

impl Metrics {
    fn build() -> Result<Self, bt_core::Error> {
        let opts = MarkovOptions::default();
        let rho = |r: RhoField| -> Result<MetricField, bt_core::Error> {
            metric_of(&rho_quantizer(COARSE, 2, r.clone(), opts)?, &rho_quantizer(FINE, 2, r, opts)?)
        };
        let twist = |v: VectorField| -> Result<MetricField, bt_core::Error> {
            metric_of(&vector_twist_quantizer(COARSE, 2, v.clone())?, &vector_twist_quantizer(FINE, 2, v)?)
        };
        Ok(Self {
            standard: metric_of(&ToeplitzQuantizer::new(COARSE, 2)?, &ToeplitzQuantizer::new(FINE, 2)?)?,
            heat: [0.1, 0.25]
                .iter()
                .map(|&t| Ok((t, metric_of(&heat_quantizer(COARSE, 2, t)?, &heat_quantizer(FINE, 2, t)?)?)))
                .collect::<Result<_, bt_core::Error>>()?,
            markov_iso: rho(RhoField::Isotropic(0.5))?,
            markov_zz: rho(RhoField::ZzRankOne(ZZ_SCALE))?,
            twist_rotation: twist(VectorField::rotation([0.3, -0.2, 1.0]))?,
            twist_gradient: twist(VectorField::gradient_of(SphereFunction::z()))?,
        })
    }

    fn all(&self) -> Vec<(String, &MetricField)> {
        let mut v = vec![("standard".to_string(), &self.standard)];
        for (t, m) in &self.heat {
            v.push((format!("heat:{t}"), m));
        }
        v.push(("markov:iso".into(), &self.markov_iso));
        v.push(("markov:zz".into(), &self.markov_zz));
        v.push(("twist:rot".into(), &self.twist_rotation));
        v.push(("twist:grad".into(), &self.twist_gradient));
        v
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let metrics = match Metrics::build() {
        Ok(m) => Some(m),
        Err(e) => {
            println!("metric construction failed: {e}");
            None
        }
    };
    let metrics = &metrics;
    let needs_metrics = |f: fn(&Metrics) -> Outcome| {
        move || match metrics {
            Some(m) => f(m),
            None => Ok((false, "metrics unavailable".into())),
        }
    };
    let criteria: Vec<(&str, Check<'_>)> = vec![
        ("resolution of identity", Box::new(resolution_of_identity)),
        ("closed-form Toeplitz spectrum", Box::new(closed_form_toeplitz)),
        ("Berezin expansion", Box::new(berezin_expansion)),
        ("standard unsharpness", Box::new(standard_unsharpness)),
        ("heat-smear scaling", Box::new(needs_metrics(heat_scaling))),
        ("Markov construction", Box::new(needs_metrics(markov_construction))),
        ("least unsharpness", Box::new(needs_metrics(least_unsharpness))),
        ("noise inequality", Box::new(noise_inequality)),
        ("variance identity", Box::new(variance_identity)),
        ("Legendre identities", Box::new(legendre_identities)),
        ("classification", Box::new(classification)),
        ("Rawnsley density", Box::new(rawnsley)),
        ("metaplectic second order", Box::new(metaplectic_second_order)),
        ("cocycle algebra", Box::new(cocycle_algebra)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            t0.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
