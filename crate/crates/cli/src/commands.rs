//! Subcommand implementations. Each command resolves its inputs, runs the
//! core operations, writes exactly one JSON report on success or audit
//! violation, and never exposes rejected intermediate draws.

use std::time::Instant;

use compriv_core::io::{load_family, read_matrix_csv, write_matrix_csv};
use compriv_core::mechanism::{default_c, min_m_for_truncation_bound};
use compriv_core::pca::PcaReport;
use compriv_core::streams::derive_stream;
use compriv_core::{
    acceptance_radius, alpha_bound, analytic_truncation_bound, binary, check_assumption1,
    compute_delta_max, concentration_audit, covariance_distance_v, dominance_audit,
    empirical_covariance, estimate_truncation_prob, kron_a_bounds, kron_a_exact,
    kron_a_quadrature, log_density_ratio, sanitize as core_sanitize, synth, AssumptionReport,
    ConcentrationPoint, CovarianceMatrix, DataMatrix, DominanceAudit, Error, PrivacyReport,
    ProjectionConfig, Result, TruncationEstimate,
};
use ndarray::Array1;
use serde::Serialize;

use crate::{
    write_report, AuditArgs, BinaryDemoArgs, BoundArgs, PcaArgs, SanitizeArgs,
};

/// Exit disposition of a command that completed.
pub enum Outcome {
    Clean,
    AuditViolation,
}

const AUDIT_TAU_GRID: [f64; 4] = [0.2, 0.3, 0.5, 0.8];
const MAX_CONCENTRATION_PAIRS: usize = 10;

#[derive(Serialize)]
struct SanitizeResult {
    n: usize,
    p: usize,
    m: usize,
    delta_max: f64,
    c_constant: f64,
    retries: usize,
    threshold: f64,
    achieved_deviation: f64,
    seed_used: u64,
    fingerprint: String,
    output: String,
}

pub fn sanitize(args: SanitizeArgs, started: Instant) -> Result<Outcome> {
    let raw = read_matrix_csv(&args.input, args.header)?;
    let x = DataMatrix::new(raw)?;
    let reference = read_matrix_csv(&args.reference, args.header)?;
    let sigma_ref = CovarianceMatrix::from_matrix(&reference.view(), x.n())?;
    let cfg = ProjectionConfig::new(args.m, args.seed)
        .with_c(args.c.unwrap_or_else(default_c))
        .with_max_retries(args.max_retries);
    let out = core_sanitize(&x, &sigma_ref, &cfg, args.delta_max)?;
    write_matrix_csv(&args.output, &out.entries.view())?;
    let result = SanitizeResult {
        n: x.n(),
        p: x.p(),
        m: args.m,
        delta_max: args.delta_max,
        c_constant: cfg.c_constant,
        retries: out.retries,
        threshold: out.threshold,
        achieved_deviation: out.achieved_deviation,
        seed_used: out.seed_used,
        fingerprint: out.source_fingerprint.clone(),
        output: args.output.display().to_string(),
    };
    let report = args.report.clone();
    write_report(&report, "sanitize", Some(args.seed), &args, started, result)?;
    println!(
        "sanitize: accepted after {} retries (deviation {:.6} <= {:.6})",
        out.retries, out.achieved_deviation, out.threshold
    );
    Ok(Outcome::Clean)
}

#[derive(Serialize)]
struct FamilyEcho {
    n: usize,
    p: usize,
    members: usize,
    reference_index: usize,
    delta_max_pairwise: f64,
    delta_max_used: f64,
    population_mode: bool,
}

#[derive(Serialize)]
struct KronBlock {
    exact: f64,
    lower: f64,
    upper: f64,
    quadrature_64: Option<f64>,
}

#[derive(Serialize)]
struct PairBound {
    member_index: usize,
    privacy: PrivacyReport,
    assumption: AssumptionReport,
    kron: KronBlock,
}

#[derive(Serialize)]
struct BoundResult {
    family: FamilyEcho,
    m_threshold: f64,
    truncation_prob_bound: f64,
    pairs: Vec<PairBound>,
}

pub fn bound(args: BoundArgs, started: Instant) -> Result<Outcome> {
    let family = load_family(&args.family)?;
    let (n, p) = (family.n(), family.p());
    let c = args.c.unwrap_or_else(default_c);
    let delta_max_used = compute_delta_max(&family)?;
    let trunc = analytic_truncation_bound(n, p, args.m);
    let reference = family.reference_covariance();
    let mut pairs = Vec::new();
    for i in 0..family.len() {
        if i == family.reference_index() {
            continue;
        }
        let other = family.covariance(i);
        let privacy = alpha_bound(reference, other, n, p, args.m, delta_max_used, c, trunc)?;
        let assumption = check_assumption1(reference, other, 0.0);
        let sandwich = kron_a_bounds(reference, other)?;
        let kron = KronBlock {
            exact: kron_a_exact(reference, other)?,
            lower: sandwich.lower,
            upper: sandwich.upper,
            quadrature_64: (p <= compriv_core::privacy::KRON_MAX_P)
                .then(|| kron_a_quadrature(reference, other, 64))
                .transpose()?,
        };
        pairs.push(PairBound {
            member_index: i,
            privacy,
            assumption,
            kron,
        });
    }
    let result = BoundResult {
        family: FamilyEcho {
            n,
            p,
            members: family.len(),
            reference_index: family.reference_index(),
            delta_max_pairwise: family.delta_max_pairwise(),
            delta_max_used,
            population_mode: family.population_sigma().is_some(),
        },
        m_threshold: min_m_for_truncation_bound(n, p),
        truncation_prob_bound: trunc,
        pairs,
    };
    let out = args.out.clone();
    write_report(&out, "bound", None, &args, started, result)?;
    println!("bound: {} pair report(s) written", family.len() - 1);
    Ok(Outcome::Clean)
}

#[derive(Serialize)]
struct TruncationBlock {
    member_index: usize,
    /// Whether m clears the 2(C1+C2)ln(2np) floor, the regime the analytic
    /// bound covers; violations are only flagged when it does.
    covered: bool,
    estimate: TruncationEstimate,
    three_sigma: f64,
    violation: bool,
}

#[derive(Serialize)]
struct ConcentrationBlock {
    column_pair: (usize, usize),
    points: Vec<ConcentrationPoint>,
    violation: bool,
}

#[derive(Serialize)]
struct DominancePair {
    member_index: usize,
    alpha: PrivacyReport,
    from_member: DominanceAudit,
    from_reference: DominanceAudit,
    violation: bool,
}

#[derive(Serialize)]
struct DominanceBlock {
    skipped: Option<String>,
    pairs: Vec<DominancePair>,
}

#[derive(Serialize)]
struct AuditResult {
    n: usize,
    p: usize,
    m: usize,
    trials: u64,
    c_constant: f64,
    delta_max_used: f64,
    radius: f64,
    truncation: Vec<TruncationBlock>,
    concentration: Vec<ConcentrationBlock>,
    dominance: DominanceBlock,
    violations: u64,
    passed: bool,
}

pub fn audit(args: AuditArgs, started: Instant) -> Result<Outcome> {
    let family = load_family(&args.family)?;
    let (n, p) = (family.n(), family.p());
    let c = args.c.unwrap_or_else(default_c);
    let delta_max_used = match args.delta_max {
        Some(d) if d >= 0.0 => d,
        Some(d) => {
            return Err(Error::PreconditionFailed(format!(
                "delta_max override {d} must be nonnegative"
            )))
        }
        None => compute_delta_max(&family)?,
    };
    let radius = acceptance_radius(n, p, args.m, delta_max_used, c);
    let analytic = analytic_truncation_bound(n, p, args.m);
    let covered = args.m as f64 >= min_m_for_truncation_bound(n, p);
    let reference = family.reference_covariance();
    let mut violations = 0u64;

    let mut truncation = Vec::new();
    for i in 0..family.len() {
        let cfg = ProjectionConfig::new(args.m, derive_stream(args.seed, &[10, i as u64]).id())
            .with_c(c);
        let estimate =
            estimate_truncation_prob(family.member(i), reference, &cfg, delta_max_used, args.trials)?;
        let three_sigma =
            3.0 * (estimate.analytic_bound * (1.0 - estimate.analytic_bound) / args.trials as f64)
                .sqrt();
        let violation = covered && estimate.estimate > estimate.analytic_bound + three_sigma;
        violations += violation as u64;
        truncation.push(TruncationBlock {
            member_index: i,
            covered,
            estimate,
            three_sigma,
            violation,
        });
    }

    let mut concentration = Vec::new();
    let ref_entries = family.reference().entries();
    'pairs: for j in 0..p {
        for k in (j + 1)..p {
            if concentration.len() >= MAX_CONCENTRATION_PAIRS {
                break 'pairs;
            }
            let unit = |col: usize| -> Array1<f64> {
                let v = ref_entries.column(col).to_owned();
                let norm = v.dot(&v).sqrt();
                v.mapv(|e| e / norm)
            };
            let x = unit(j);
            let y = unit(k);
            let seed = derive_stream(args.seed, &[20, j as u64, k as u64]).id();
            let points = concentration_audit(&x, &y, args.m, &AUDIT_TAU_GRID, args.trials, seed)?;
            let violation = points.iter().any(|pt| pt.exceeds);
            violations += violation as u64;
            concentration.push(ConcentrationBlock {
                column_pair: (j, k),
                points,
                violation,
            });
        }
    }

    let mechanism_dead = truncation.iter().any(|t| t.estimate.estimate >= 1.0);
    let dominance = if mechanism_dead {
        DominanceBlock {
            skipped: Some(
                "mechanism never accepted during the truncation block; nothing to sanitize"
                    .into(),
            ),
            pairs: Vec::new(),
        }
    } else {
        let mut pairs = Vec::new();
        for i in 0..family.len() {
            if i == family.reference_index() {
                continue;
            }
            let other = family.covariance(i);
            let alpha =
                alpha_bound(reference, other, n, p, args.m, delta_max_used, c, analytic)?;
            let cfg_member =
                ProjectionConfig::new(args.m, derive_stream(args.seed, &[30, i as u64]).id())
                    .with_c(c);
            let from_member = dominance_audit(
                family.member(i),
                reference,
                other,
                &cfg_member,
                delta_max_used,
                args.trials,
                alpha.alpha_bound,
                analytic,
            )?;
            let cfg_ref =
                ProjectionConfig::new(args.m, derive_stream(args.seed, &[31, i as u64]).id())
                    .with_c(c);
            let from_reference = dominance_audit(
                family.reference(),
                reference,
                other,
                &cfg_ref,
                delta_max_used,
                args.trials,
                alpha.alpha_bound,
                analytic,
            )?;
            let violation = from_member.violations + from_reference.violations > 0;
            violations += violation as u64;
            pairs.push(DominancePair {
                member_index: i,
                alpha,
                from_member,
                from_reference,
                violation,
            });
        }
        DominanceBlock {
            skipped: None,
            pairs,
        }
    };

    let passed = violations == 0;
    let result = AuditResult {
        n,
        p,
        m: args.m,
        trials: args.trials,
        c_constant: c,
        delta_max_used,
        radius,
        truncation,
        concentration,
        dominance,
        violations,
        passed,
    };
    let out = args.out.clone();
    write_report(&out, "audit", Some(args.seed), &args, started, result)?;
    if passed {
        println!("audit: all empirical bounds held");
        Ok(Outcome::Clean)
    } else {
        println!("audit: {violations} violation(s); see report");
        Ok(Outcome::AuditViolation)
    }
}

pub fn pca(args: PcaArgs, started: Instant) -> Result<Outcome> {
    let x = DataMatrix::new(read_matrix_csv(&args.input, args.header)?)?;
    let xc = read_matrix_csv(&args.compressed, args.header)?;
    let c = args.c.unwrap_or_else(default_c);
    let report: PcaReport = compriv_core::pca::compressed_pca_report(
        &x,
        &xc.view(),
        args.d,
        x.n(),
        x.p(),
        args.m,
        args.delta_max,
        c,
    )?;
    let violation =
        report.b_within_tau == Some(false) || report.zb_holds == Some(false);
    let out = args.out.clone();
    write_report(&out, "pca", None, &args, started, &report)?;
    if violation {
        println!("pca: certificate bound exceeded; see report");
        Ok(Outcome::AuditViolation)
    } else {
        println!(
            "pca: projector distance {:.6}, bound {:.6}, applicable {}",
            report.projector_distance, report.zb_bound, report.applicable
        );
        Ok(Outcome::Clean)
    }
}

#[derive(Serialize)]
struct SanitizeEcho {
    retries: usize,
    threshold: f64,
    achieved_deviation: f64,
    seed_used: u64,
    fingerprint: String,
}

#[derive(Serialize)]
struct BinaryDemoResult {
    n: usize,
    p: usize,
    k: usize,
    row: usize,
    tau_flip: f64,
    v_distance: f64,
    delta: binary::BinaryDelta,
    privacy: binary::BinaryAlpha,
    sanitize_base: SanitizeEcho,
    sanitize_neighbor: SanitizeEcho,
    log_ratio_base: f64,
    log_ratio_neighbor: f64,
    ratios_within_alpha: bool,
    pca_base: PcaReport,
    pca_neighbor: PcaReport,
}

pub fn binary_demo(args: BinaryDemoArgs, started: Instant) -> Result<Outcome> {
    let c = args.c.unwrap_or_else(default_c);
    let base = synth::random_sign_matrix(args.n, args.p, derive_stream(args.seed, &[1]))?;
    let inst = binary::make_neighbor(&base, args.row, args.k, derive_stream(args.seed, &[2]))?;
    let delta = binary::binary_delta_exact(&inst)?;
    let v_distance = covariance_distance_v(&base, &inst.neighbor)?;
    let privacy = binary::binary_alpha_report(&inst, args.m, c)?;
    let sigma_base = empirical_covariance(&base, args.n)?;
    let sigma_neighbor = empirical_covariance(&inst.neighbor, args.n)?;

    let cfg_base =
        ProjectionConfig::new(args.m, derive_stream(args.seed, &[3]).id()).with_c(c);
    let xc_base = core_sanitize(&base, &sigma_base, &cfg_base, v_distance)?;
    let cfg_neighbor =
        ProjectionConfig::new(args.m, derive_stream(args.seed, &[4]).id()).with_c(c);
    let xc_neighbor = core_sanitize(&inst.neighbor, &sigma_base, &cfg_neighbor, v_distance)?;

    let trunc = privacy.report.inputs_echo.truncation_prob_bound;
    let log_ratio_base =
        log_density_ratio(&xc_base.entries, &sigma_base, &sigma_neighbor, trunc, trunc)?;
    let log_ratio_neighbor =
        log_density_ratio(&xc_neighbor.entries, &sigma_base, &sigma_neighbor, trunc, trunc)?;
    let alpha = privacy.report.alpha_bound;
    let ratios_within_alpha =
        log_ratio_base.abs() <= alpha && log_ratio_neighbor.abs() <= alpha;

    let pca_base = compriv_core::pca::compressed_pca_report(
        &base,
        &xc_base.entries.view(),
        args.d,
        args.n,
        args.p,
        args.m,
        v_distance,
        c,
    )?;
    let pca_neighbor = compriv_core::pca::compressed_pca_report(
        &inst.neighbor,
        &xc_neighbor.entries.view(),
        args.d,
        args.n,
        args.p,
        args.m,
        v_distance,
        c,
    )?;

    let echo = |out: &compriv_core::CompressedMatrix| SanitizeEcho {
        retries: out.retries,
        threshold: out.threshold,
        achieved_deviation: out.achieved_deviation,
        seed_used: out.seed_used,
        fingerprint: out.source_fingerprint.clone(),
    };
    let result = BinaryDemoResult {
        n: args.n,
        p: args.p,
        k: args.k,
        row: args.row,
        tau_flip: inst.tau_flip(),
        v_distance,
        delta,
        sanitize_base: echo(&xc_base),
        sanitize_neighbor: echo(&xc_neighbor),
        log_ratio_base,
        log_ratio_neighbor,
        ratios_within_alpha,
        privacy,
        pca_base,
        pca_neighbor,
    };
    let out = args.out.clone();
    write_report(&out, "binary-demo", Some(args.seed), &args, started, result)?;
    println!(
        "binary-demo: |log ratios| ({:.4}, {:.4}) vs alpha {:.4}",
        log_ratio_base.abs(),
        log_ratio_neighbor.abs(),
        alpha
    );
    Ok(Outcome::Clean)
}
