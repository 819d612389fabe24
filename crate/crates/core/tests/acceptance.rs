//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nqdreg::experiments::{decomposition_check, reference_config, EvalTarget, SchemeConfig};
use nqdreg::kernels::gaussian_kernel;
use nqdreg::lemma_suite::{verify_riemann_limits, BandwidthRule, EvalSpec, RiemannMode};
use nqdreg::nqd_errors::{adjacent_pairs, check_nqd, CovarianceSpec, ErrorModel, Marginal, NqdViolationReport};
use nqdreg::weights::{check_b, check_ladder, nn_weights, CheckParams, ConditionId, NeighborRule, SchemeRule};
use nqdreg::{bias, run_experiment, verify_lemma22, ConvergenceReport, DesignGrid, TheoremId};

const RIEMANN_LADDER: [usize; 3] = [100, 1_000, 10_000];
const RIEMANN_FINAL_GAP: f64 = 0.02;
const RIEMANN_BUDGET: Duration = Duration::from_secs(2);

const NQD_SAMPLES: usize = 100_000;
const NQD_SEED: u64 = 42;
const CONTROL_MIN_VIOLATION: f64 = 0.05;
const NQD_BUDGET: Duration = Duration::from_secs(10);

const LEMMA22_NS: [usize; 2] = [50, 200];
const LEMMA22_REPLICATES: usize = 10_000;
const LEMMA22_SEED: u64 = 7;
const LEMMA22_BUDGET: Duration = Duration::from_secs(30);

const FINAL_RATIO: f64 = 0.25;
const MEAN_BUDGET: Duration = Duration::from_secs(60);
const UNIFORM_BUDGET: Duration = Duration::from_secs(600);
const EXCEEDANCE_FINAL: f64 = 0.05;
const CONTROL_MIN_EXCEEDANCE: f64 = 0.5;
const CONTROL_EVAL_X: f64 = 0.25;
const PROBABILITY_BUDGET: Duration = Duration::from_secs(60);

const A4_RADIUS: f64 = 0.2;
const A4_N: usize = 10_000;
const A4_LIMIT: f64 = 1e-3;

const VALIDATOR_LADDER: [usize; 3] = [100, 1_000, 10_000];
const VALIDATOR_POINTS: [f64; 3] = [0.25, 0.5, 0.75];
const B3_REL_TOL: f64 = 4.0 * f64::EPSILON;
const B4_RADII: [f64; 3] = [0.05, 0.1, 0.25];

const DECOMPOSITION_REPLICATES: usize = 20_000;

type Criterion = (&'static str, fn(&mut Outcome));

struct Outcome {
    lines: Vec<(bool, String)>,
}

impl Outcome {
    fn new() -> Self {
        Self { lines: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: impl Into<String>) -> bool {
        let detail = detail.into();
        println!("    [{}] {detail}", if ok { "ok" } else { "FAIL" });
        self.lines.push((ok, detail));
        ok
    }

    fn timed(&mut self, start: Instant, budget: Duration) {
        let elapsed = start.elapsed();
        self.check(elapsed <= budget, format!("runtime {:.2}s <= {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()));
    }

    fn pass(&self) -> bool {
        self.lines.iter().all(|l| l.0)
    }
}

fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

fn fmt_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn criterion_riemann(o: &mut Outcome) {
    let start = Instant::now();
    let kernel = gaussian_kernel();
    for mode in [RiemannMode::Signed, RiemannMode::Abs] {
        for eval in [EvalSpec::Point { x: 0.5 }, EvalSpec::Interval { tau: 0.1 }] {
            let rep = verify_riemann_limits(&kernel, BandwidthRule::REFERENCE, &RIEMANN_LADDER, eval, mode).unwrap();
            let gaps: Vec<f64> = rep.ladder.iter().map(|r| r.gap.abs()).collect();
            let last = *gaps.last().unwrap();
            o.check(
                rep.precondition_failure.is_none() && rep.strictly_decreasing && last < RIEMANN_FINAL_GAP,
                format!("{:?} {mode:?} {eval:?}: gaps {} strictly decreasing, final < {RIEMANN_FINAL_GAP}", rep.lemma_id, fmt_list(&gaps)),
            );
        }
    }
    o.timed(start, RIEMANN_BUDGET);
}

/// `P(X ≤ 0, Y ≤ 0) − 1/4` for a standard bivariate normal with correlation `rho`.
fn orthant_gap(rho: f64) -> f64 {
    rho.asin() / (2.0 * PI)
}

fn median_cell(rep: &NqdViolationReport) -> f64 {
    let centre = rep
        .grid
        .iter()
        .copied()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap();
    rep.point_statistic(0, 1, centre, centre).unwrap()
}

fn criterion_nqd(o: &mut Outcome) {
    let start = Instant::now();
    let explicit = |rho: f64| CovarianceSpec::Explicit { matrix: vec![vec![1.0, rho], vec![rho, 1.0]] };
    let cases = [
        ("gauss_negcorr rho=-0.5", ErrorModel::gauss_negcorr(explicit(-0.5), 1.0).unwrap(), vec![(0, 1)]),
        (
            "gauss_negcorr banded rho=-0.5, n=10",
            ErrorModel::gauss_negcorr(CovarianceSpec::Banded { rho: -0.5 }, 1.0).unwrap(),
            adjacent_pairs(10),
        ),
        ("neg_ma1 theta=0.6, n=10", ErrorModel::neg_ma1(0.6, 1.0).unwrap(), adjacent_pairs(10)),
    ];
    for (name, model, pairs) in cases {
        let rep = check_nqd(&model, &pairs, NQD_SAMPLES, None, NQD_SEED).unwrap();
        o.check(
            rep.max_violation <= rep.noise_band,
            format!("{name}: max_violation {:.3e} <= band {:.3e} ({} tests)", rep.max_violation, rep.noise_band, rep.test_count()),
        );
    }
    let control = ErrorModel::gauss_corr(explicit(0.5), 1.0).unwrap();
    let rep = check_nqd(&control, &[(0, 1)], NQD_SAMPLES, None, NQD_SEED).unwrap();
    let median = median_cell(&rep);
    let oracle = orthant_gap(0.5);
    o.check(
        rep.max_violation > CONTROL_MIN_VIOLATION && median > CONTROL_MIN_VIOLATION,
        format!("gauss_corr rho=+0.5 control: max_violation {:.4}, median quadrant {median:.4} > {CONTROL_MIN_VIOLATION}", rep.max_violation),
    );
    o.check(
        (median - oracle).abs() <= rep.noise_band,
        format!("median quadrant {median:.4} within band of orthant oracle {oracle:.4}"),
    );
    o.timed(start, NQD_BUDGET);
}

fn criterion_lemma22(o: &mut Outcome) {
    let start = Instant::now();
    let models = [
        ("iid normal", ErrorModel::iid(Marginal::Normal, 1.0).unwrap()),
        ("iid centered-exponential", ErrorModel::iid(Marginal::CenteredExponential, 1.0).unwrap()),
        ("iid uniform-centered", ErrorModel::iid(Marginal::UniformCentered, 1.0).unwrap()),
        ("neg_ma1 theta=0.6", ErrorModel::neg_ma1(0.6, 1.0).unwrap()),
        ("gauss_negcorr banded rho=-0.5", ErrorModel::gauss_negcorr(CovarianceSpec::Banded { rho: -0.5 }, 1.0).unwrap()),
    ];
    for (name, model) in models {
        let rep = verify_lemma22(&model, &LEMMA22_NS, LEMMA22_REPLICATES, LEMMA22_SEED).unwrap();
        for (label, lr) in [("second moment", &rep.variance), ("maximal", &rep.maximal)] {
            let worst = lr.ladder.iter().map(|r| r.gap - r.slack).fold(f64::NEG_INFINITY, f64::max);
            o.check(lr.pass, format!("{name} {label}: max(gap - 5 SE) = {worst:.3e} <= 0"));
        }
    }
    o.timed(start, LEMMA22_BUDGET);
}

fn convergence_lines(o: &mut Outcome, label: &str, rep: &ConvergenceReport) {
    let stats = rep.statistics();
    o.check(non_increasing(&stats), format!("{label}: statistics {} non-increasing", fmt_list(&stats)));
    o.check(rep.hypotheses_met, format!("{label}: weight hypotheses validated"));
}

fn mean_run(o: &mut Outcome, theorem: TheoremId, scheme: Option<SchemeConfig>) -> ConvergenceReport {
    let start = Instant::now();
    let mut config = reference_config(theorem);
    if let Some(s) = scheme {
        config.scheme = s;
    }
    let rep = run_experiment(&config).unwrap();
    let label = format!("{theorem}");
    convergence_lines(o, &label, &rep);
    let stats = rep.statistics();
    let (first, last) = (stats[0], stats[stats.len() - 1]);
    o.check(last < FINAL_RATIO * first, format!("{label}: final {last:.4e} < first/4 = {:.4e}", FINAL_RATIO * first));
    o.timed(start, MEAN_BUDGET);
    rep
}

fn probability_run(o: &mut Outcome, theorem: TheoremId) {
    let start = Instant::now();
    let config = reference_config(theorem);
    let rep = run_experiment(&config).unwrap();
    convergence_lines(o, &format!("{theorem}"), &rep);
    let last = *rep.statistics().last().unwrap();
    o.check(last < EXCEEDANCE_FINAL, format!("{theorem}: final exceedance {last:.4} < {EXCEEDANCE_FINAL}"));

    let mut control = config.clone();
    control.weight_scale = 2.0;
    control.eval = EvalTarget::Point { x: CONTROL_EVAL_X };
    let scaled = control.weights(*control.n_ladder.last().unwrap()).unwrap();
    let b = bias(&control.g, &scaled).unwrap()[0];
    let rep = run_experiment(&control).unwrap();
    let last = *rep.statistics().last().unwrap();
    o.check(
        last > CONTROL_MIN_EXCEEDANCE && !rep.hypotheses_met,
        format!("{theorem} doubled weights at x={CONTROL_EVAL_X} (bias {b:.4}): final exceedance {last:.4} > {CONTROL_MIN_EXCEEDANCE}, hypotheses flagged"),
    );
    o.timed(start, PROBABILITY_BUDGET);
}

fn criterion_uniform(o: &mut Outcome) {
    let start = Instant::now();
    let uniform = run_experiment(&reference_config(TheoremId::T32)).unwrap();
    let point = run_experiment(&reference_config(TheoremId::T31)).unwrap();
    convergence_lines(o, "T32", &uniform);
    let stats = uniform.statistics();
    let (first, last) = (stats[0], stats[stats.len() - 1]);
    o.check(last < FINAL_RATIO * first, format!("T32: final {last:.4e} < first/4 = {:.4e}", FINAL_RATIO * first));
    let dominated = uniform.rows.iter().zip(&point.rows).all(|(u, p)| u.statistic >= p.statistic);
    o.check(dominated, format!("sup {} >= pointwise {} at every n", fmt_list(&stats), fmt_list(&point.statistics())));
    o.timed(start, UNIFORM_BUDGET);
}

fn criterion_kernel(o: &mut Outcome) {
    mean_run(o, TheoremId::C31, None);
    probability_run(o, TheoremId::C32);
    let h = BandwidthRule::REFERENCE.bandwidth(A4_N);
    let design = Arc::new(DesignGrid::equispaced(A4_N).unwrap());
    let wm = nqdreg::pc_weights(design.clone(), &[0.5], &gaussian_kernel(), h).unwrap();
    let a4 = check_b(&wm, ConditionId::A4, &CheckParams::default().with_a(A4_RADIUS)).unwrap().statistic;
    o.check(a4 < A4_LIMIT, format!("A4 at a={A4_RADIUS}, n={A4_N}, h={h}: {a4:.4e} < {A4_LIMIT:e}"));
    let narrow = nqdreg::pc_weights(design, &[0.5], &gaussian_kernel(), 0.05).unwrap();
    let info = check_b(&narrow, ConditionId::A4, &CheckParams::default().with_a(A4_RADIUS)).unwrap().statistic;
    println!("    [info] same statistic with h=0.05: {info:.4e}");
}

fn criterion_validators(o: &mut Outcome) {
    let params = CheckParams::default();
    let rule = NeighborRule::REFERENCE;
    for &n in &VALIDATOR_LADDER {
        let k = rule.neighbors(n);
        let wm = nn_weights(Arc::new(DesignGrid::equispaced(n).unwrap()), &VALIDATOR_POINTS, k).unwrap();
        let b1 = check_b(&wm, ConditionId::B1, &params).unwrap().statistic;
        o.check(b1 == 0.0, format!("nn n={n} k={k}: B1 = {b1:e} (exactly 0)"));
        let b3 = check_b(&wm, ConditionId::B3, &params).unwrap();
        let target = 1.0 / k as f64;
        let worst = b3.per_eval_point.iter().map(|p| (p.1 - target).abs()).fold(0.0, f64::max);
        o.check(worst <= B3_REL_TOL * target, format!("nn n={n} k={k}: B3 = 1/k (max deviation {worst:e})"));
    }
    for a in B4_RADII {
        let stats: Vec<(usize, usize, f64)> = VALIDATOR_LADDER
            .iter()
            .map(|&n| {
                let k = rule.neighbors(n);
                let wm = nn_weights(Arc::new(DesignGrid::equispaced(n).unwrap()), &VALIDATOR_POINTS, k).unwrap();
                (n, k, check_b(&wm, ConditionId::B4, &params.with_a(a)).unwrap().statistic)
            })
            .collect();
        let ok = stats.iter().all(|&(n, k, s)| (k as f64 / n as f64) >= a || s == 0.0)
            && non_increasing(&stats.iter().map(|s| s.2).collect::<Vec<_>>())
            && stats.last().unwrap().2 == 0.0;
        o.check(ok, format!("nn B4 a={a}: {:?} vanishes once k*mesh < a", stats.iter().map(|s| s.2).collect::<Vec<_>>()));
    }
    let pc = SchemeRule::PriestleyChao { kernel: gaussian_kernel(), bandwidth: BandwidthRule::REFERENCE };
    let pc_params = CheckParams::default().with_a(0.25);
    for id in [ConditionId::B1, ConditionId::B2, ConditionId::B3, ConditionId::B4] {
        let rep = check_ladder(|n| pc.build(n, &VALIDATOR_POINTS), id, &pc_params, &VALIDATOR_LADDER, None).unwrap();
        let stats: Vec<f64> = rep.rungs.iter().map(|r| r.statistic).collect();
        o.check(rep.pass, format!("pc gaussian h=n^-1/4 {id}: {} (threshold {})", fmt_list(&stats), rep.rungs[0].threshold));
    }
}

fn criterion_decomposition(o: &mut Outcome) {
    for theorem in [TheoremId::T31, TheoremId::C31] {
        let mut config = reference_config(theorem);
        config.replicates = DECOMPOSITION_REPLICATES;
        for &n in &config.n_ladder.clone() {
            let d = decomposition_check(&config, n).unwrap()[0];
            o.check(
                d.pass(),
                format!(
                    "{theorem} n={n}: MC L2 {:.5e} vs bias^2 + MC variance {:.5e} / exact variance {:.5e} (3 SE = {:.2e})",
                    d.mc_l2,
                    d.bias_sq + d.variance_mc,
                    d.bias_sq + d.variance_exact,
                    3.0 * d.mc_stderr
                ),
            );
        }
    }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 Riemann limits (pointwise and uniform)", criterion_riemann),
        ("2 NQD generators and positive-dependence control", criterion_nqd),
        ("3 partial-sum moment inequalities", criterion_lemma22),
        ("4 mean convergence, nearest-neighbour weights", |o| {
            mean_run(o, TheoremId::T31, None);
        }),
        ("5 uniform mean convergence", criterion_uniform),
        ("6 convergence in probability and doubled-weights control", |o| probability_run(o, TheoremId::T33)),
        ("7 kernel weights (mean, probability, A4 locality)", criterion_kernel),
        ("8 weight validators", criterion_validators),
        ("9 bias/variance decomposition", criterion_decomposition),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        println!("criterion {name}");
        let mut o = Outcome::new();
        f(&mut o);
        let pass = o.pass();
        println!("{} criterion {name}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed += 1;
        }
    }
    println!("acceptance: {failed} criterion(s) failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
