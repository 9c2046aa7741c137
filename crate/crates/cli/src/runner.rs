//! Scenario execution: place, deliver, decode, compare with the closed
//! forms, then optionally certify and run the error-correcting round trip.

use log::{debug, info};
use rayon::prelude::*;
use thiserror::Error;

use codedcache::analytics::{
    t_dedicated, t_nondistinct, t_offline, t_online, t_single_cache, t_uniform, to_decimal,
    AnalyticsError,
};
use codedcache::converse::{
    build_instance, certify_optimality, ConverseError, Granularity, Verdict,
};
use codedcache::decode::verify_all;
use codedcache::delivery::{deliver_distinct, deliver_nondistinct, DeliveryError};
use codedcache::ecc::{
    encode_concatenated, inject_errors, restore_log, syndrome_decode, EccError, LinearBlockCode,
};
use codedcache::online::{OnlineError, OnlineState};
use codedcache::placement::PlacementError;
use codedcache::rng::{derive_key, KeyedStream};
use codedcache::{
    Association, Bits, DemandVector, Library, PlacementMode, PlacementState, Profile, Rational,
    SystemParams, TransmissionLog,
};

use crate::config::{
    CodeChoice, ConverseSpec, EccSpec, ErrorPatterns, Mode, PlaintextSweep, Reference, Scenario,
};
use crate::report::{comparison, Agreement, Outcome, ResultRow};

/// Errors that stop a run before any verdict; mismatches and decode
/// failures are reported through [`Outcome`] instead.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Delivery(#[from] DeliveryError),
    #[error(transparent)]
    Online(#[from] OnlineError),
    #[error(transparent)]
    Ecc(#[from] EccError),
    #[error(transparent)]
    Converse(#[from] ConverseError),
    #[error("{0}")]
    Setup(String),
}

/// Largest error-pattern or plaintext sweep the runner will enumerate.
const SWEEP_LIMIT: u64 = 1 << 22;

pub fn run(s: &Scenario, jobs: Option<usize>) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    header(s, &mut out);
    match s.mode {
        Mode::OfflineDistinct | Mode::OfflineNondistinct | Mode::Ecc => {
            let point = Point {
                index: 0,
                params: s.params.clone(),
                association: s.association.clone(),
                ecc: s.ecc.clone(),
            };
            let piece = offline_point(s, &point, true)?;
            merge(&mut out, piece);
        }
        Mode::Online => online(s, &mut out)?,
        Mode::Sweep => sweep(s, jobs, &mut out)?,
    }
    out.line("");
    out.line(if out.ok() {
        "result: PASS"
    } else {
        "result: FAIL"
    });
    Ok(out)
}

fn merge(out: &mut Outcome, piece: Outcome) {
    out.report.push_str(&piece.report);
    out.rows.extend(piece.rows);
    out.artifacts.extend(piece.artifacts);
    out.failures.extend(piece.failures);
}

fn groups_text(a: &Association) -> String {
    a.groups()
        .iter()
        .map(|g| {
            format!(
                "{{{}}}",
                g.iter()
                    .map(|u| u.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn demand_text(d: &DemandVector) -> String {
    let v: Vec<String> = d.as_slice().iter().map(|f| f.to_string()).collect();
    format!("({})", v.join(","))
}

fn mode_text(m: PlacementMode) -> &'static str {
    match m {
        PlacementMode::ExactFraction => "exact-fraction",
        PlacementMode::RandomSampled => "random",
    }
}

fn header(s: &Scenario, out: &mut Outcome) {
    let p = &s.params;
    out.line(format!("scenario {} ({})", s.name, s.mode));
    let catalog = if p.catalog_size != p.num_files {
        format!(" N'={}", p.catalog_size)
    } else {
        String::new()
    };
    out.line(format!(
        "N={}{catalog} K={} Λ={} M={} F={} q={}",
        p.num_files,
        p.num_users,
        p.num_caches,
        p.cache_size,
        p.file_size,
        p.q()
    ));
    out.line(format!(
        "association {}  profile {}",
        groups_text(&s.association),
        s.association.profile()
    ));
    if s.mode != Mode::Online {
        out.line(format!("demand {}", demand_text(&s.demand)));
    }
    out.line(format!(
        "placement {}, seed {}; library seed {}",
        mode_text(s.placement),
        s.placement_seed,
        s.library_seed
    ));
}

#[derive(Debug, Clone)]
struct Point {
    index: usize,
    params: SystemParams,
    association: Association,
    ecc: Option<EccSpec>,
}

fn place(s: &Scenario, params: &SystemParams) -> Result<PlacementState, RunError> {
    Ok(match s.placement {
        PlacementMode::ExactFraction => PlacementState::place_exact(params)?,
        PlacementMode::RandomSampled => PlacementState::place_random(params, s.placement_seed)?,
    })
}

/// Closed form for the scheme in use. The flag is set when M = 0, where
/// the value returned is the unicast limit.
fn offline_formula(
    distinct_scheme: bool,
    params: &SystemParams,
    assoc: &Association,
    demand: &DemandVector,
) -> Result<(Rational, bool), RunError> {
    if !distinct_scheme {
        return Ok((t_nondistinct(demand, assoc, params), false));
    }
    match t_offline(&assoc.profile(), params) {
        Ok(t) => Ok((t, false)),
        Err(AnalyticsError::ZeroMemory { unicast_time }) => Ok((unicast_time, true)),
        Err(e) => Err(RunError::Setup(e.to_string())),
    }
}

fn offline_point(s: &Scenario, pt: &Point, artifacts: bool) -> Result<Outcome, RunError> {
    let mut out = Outcome::default();
    let params = &pt.params;
    let assoc = &pt.association;
    let demand = &s.demand;
    let placement = place(s, params)?;
    let library = Library::new(s.library_seed, params.file_size);
    let distinct_scheme = match s.mode {
        Mode::OfflineDistinct => true,
        Mode::OfflineNondistinct => false,
        _ => demand.is_distinct(),
    };
    let log = if distinct_scheme {
        deliver_distinct(&placement, &library, assoc, demand)?
    } else {
        deliver_nondistinct(&placement, &library, assoc, demand)?
    };
    info!(
        "{}: point {} sent {} transmissions",
        s.name,
        pt.index,
        log.len()
    );

    out.line("");
    if s.mode == Mode::Sweep {
        out.line(format!(
            "point {}: profile {} M={}",
            pt.index,
            assoc.profile(),
            params.cache_size
        ));
    } else {
        out.line(format!(
            "transmissions ({} scheme):",
            if distinct_scheme {
                "distinct-demand"
            } else {
                "leader"
            }
        ));
        for t in log.transmissions() {
            out.line(format!(
                "  {:>2}  {}  [{} bits]",
                t.round,
                t.describe(),
                t.len()
            ));
        }
    }

    let decoded = match verify_all(&placement, &library, assoc, demand, &log, s.general_decoder) {
        Ok(()) => {
            out.line(format!(
                "decoding: all {} users recovered their files ({})",
                assoc.num_users(),
                if s.general_decoder {
                    "general decoder"
                } else {
                    "peeling"
                }
            ));
            true
        }
        Err(e) => {
            out.fail(format!("decoding failed: {e}"));
            false
        }
    };

    let measured = log.normalized_time();
    let (formula, limit) = offline_formula(distinct_scheme, params, assoc, demand)?;
    let agree = match placement.mode() {
        PlacementMode::ExactFraction if formula == measured => Agreement::Yes,
        PlacementMode::ExactFraction => Agreement::No,
        PlacementMode::RandomSampled => Agreement::NotComparable,
    };
    let mut line = format!("delivery time: {}", comparison(measured, Some(formula)));
    if limit {
        line.push_str(" (M = 0: unicast limit)");
    }
    if agree == Agreement::NotComparable {
        let dev = (to_decimal(measured) - to_decimal(formula)) / to_decimal(formula);
        line = format!(
            "delivery time: {measured} ({:.6}), expected {formula} ({:.6}), deviation {:+.4}%",
            to_decimal(measured),
            to_decimal(formula),
            dev * 100.0
        );
    }
    out.line(line);
    if agree == Agreement::No {
        out.line("FAILURE: measured time differs from the closed form");
    }

    let verdict = match &s.converse {
        Some(c) => converse(c, &placement, assoc, demand, &log, &mut out, artifacts)?,
        None => None,
    };

    let (coded_time, ecc_ok, delta) = match &pt.ecc {
        Some(e) => {
            let (t, ok) = ecc(
                e,
                &placement,
                &library,
                assoc,
                demand,
                &log,
                s.general_decoder,
                &mut out,
            )?;
            (Some(t), ok, e.delta)
        }
        None => (None, true, 0),
    };

    let reference = s
        .sweep
        .as_ref()
        .and_then(|sw| reference(sw.reference, params));

    if artifacts {
        if s.write_trace {
            out.artifacts.push(("trace.txt".into(), log.to_trace()));
        }
        if s.write_placement {
            out.artifacts
                .push(("placement.txt".into(), placement.summary_table()));
        }
    }
    out.rows.push(ResultRow {
        scenario: s.name.clone(),
        point: pt.index,
        slot: 0,
        profile: assoc.profile(),
        cache_size: params.cache_size,
        delta,
        measured,
        formula: Some(formula),
        agree,
        decoded: decoded && ecc_ok,
        verdict,
        coded_time,
        reference,
    });
    Ok(out)
}

fn reference(r: Reference, params: &SystemParams) -> Option<Rational> {
    let k = params.num_users as usize;
    match r {
        Reference::None => None,
        Reference::Uniform => t_uniform(k, params).ok(),
        Reference::Dedicated => t_dedicated(k, params).ok(),
        Reference::SingleCache => Some(t_single_cache(k, params)),
    }
}

fn verdict_line(v: &Verdict) -> String {
    let opt = |x: Option<usize>| x.map_or("over budget".to_string(), |v| v.to_string());
    format!(
        "converse: {} (|H| = {} bits, sent {}; α = {}, κ = {}; one bit per subfile: |H| = {}, α = {}, κ = {}, {} transmissions)",
        v.label(),
        v.h.size_bits,
        v.measured_bits,
        opt(v.alpha),
        opt(v.kappa),
        v.reduced_h,
        opt(v.reduced_alpha),
        opt(v.reduced_kappa),
        v.reduced_transmissions
    )
}

fn converse(
    c: &ConverseSpec,
    placement: &PlacementState,
    assoc: &Association,
    demand: &DemandVector,
    log: &TransmissionLog,
    out: &mut Outcome,
    artifacts: bool,
) -> Result<Option<String>, RunError> {
    if placement.mode() != PlacementMode::ExactFraction {
        out.line("converse: skipped (needs exact-fraction placement)");
        return Ok(None);
    }
    if demand.distinct_among(assoc.users()) != assoc.num_users() as usize {
        out.line("converse: skipped (needs distinct demands)");
        return Ok(None);
    }
    let v = certify_optimality(
        placement,
        assoc,
        demand,
        log,
        c.message_budget,
        c.minrank_budget,
    )?;
    out.line(format!(
        "generalized independent set H = {}",
        v.h.describe()
    ));
    out.line(verdict_line(&v));
    for f in &v.failures {
        out.line(format!("  certificate failure: {f}"));
    }
    if c.dump_instance && artifacts {
        let inst = build_instance(placement, assoc, demand, Granularity::Bits)?;
        out.artifacts
            .push(("instance.txt".into(), inst.to_adjacency_text()));
    }
    Ok(Some(v.label().to_string()))
}

fn build_code(e: &EccSpec, k: usize) -> Result<LinearBlockCode, RunError> {
    let d = 2 * e.delta + 1;
    let code = match e.code {
        CodeChoice::Optimal if e.delta == 0 => LinearBlockCode::identity(k),
        CodeChoice::Optimal => LinearBlockCode::optimal(k, d)?,
        CodeChoice::Hamming11_7 => LinearBlockCode::hamming_11_7(),
        CodeChoice::Identity => LinearBlockCode::identity(k),
        CodeChoice::Repetition => LinearBlockCode::repetition_per_bit(k, d)?,
        CodeChoice::Generator => {
            LinearBlockCode::from_text("generator", e.generator.as_deref().unwrap_or(""))?
        }
    };
    if code.d() < d {
        return Err(RunError::Setup(format!(
            "code {} has distance {}, correcting {} errors needs {d}",
            code.name(),
            code.d(),
            e.delta
        )));
    }
    Ok(code)
}

/// All position sets of size `delta` in `0..n`, or a seeded sample.
fn error_patterns(e: &EccSpec, n: usize) -> Result<Vec<Vec<usize>>, RunError> {
    match e.errors {
        ErrorPatterns::Exhaustive => {
            let total = codedcache::analytics::binom(n as i64, e.delta as i64);
            if total as u64 > SWEEP_LIMIT {
                return Err(RunError::Setup(format!(
                    "{total} error patterns exceed the exhaustive limit; use errors = \"sampled\""
                )));
            }
            let mut all = Vec::new();
            let mut cur: Vec<usize> = (0..e.delta).collect();
            if e.delta > n {
                return Ok(all);
            }
            loop {
                all.push(cur.clone());
                let Some(i) = (0..e.delta).rev().find(|&i| cur[i] < n - e.delta + i) else {
                    break;
                };
                cur[i] += 1;
                for j in i + 1..e.delta {
                    cur[j] = cur[j - 1] + 1;
                }
            }
            Ok(all)
        }
        ErrorPatterns::Sampled => {
            let mut rng = KeyedStream::new(derive_key(&[0x6563_6373, e.seed]));
            Ok((0..e.samples)
                .map(|_| {
                    let mut pos: Vec<usize> = Vec::new();
                    while pos.len() < e.delta.min(n) {
                        let p = rng.below(n as u64) as usize;
                        if !pos.contains(&p) {
                            pos.push(p);
                        }
                    }
                    pos.sort_unstable();
                    pos
                })
                .collect())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn ecc(
    e: &EccSpec,
    placement: &PlacementState,
    library: &Library,
    assoc: &Association,
    demand: &DemandVector,
    log: &TransmissionLog,
    general: bool,
    out: &mut Outcome,
) -> Result<(Rational, bool), RunError> {
    let code = build_code(e, log.total_bits())?;
    let run = encode_concatenated(log, &code)?;
    let patterns = error_patterns(e, code.n())?;
    let mut ok = 0;
    for p in &patterns {
        let bad = inject_errors(&run, p, e.delta)?;
        let good = syndrome_decode(&bad, &code)
            .map(|plain| restore_log(log, &plain))
            .map(|restored| {
                verify_all(placement, library, assoc, demand, &restored, general).is_ok()
            })
            .unwrap_or(false);
        if good {
            ok += 1;
        } else {
            debug!("error pattern {p:?} not corrected");
        }
    }
    out.line(format!(
        "error correction: {} [n={}, k={}, d={}], δ={}, padding {} bits, coded time {} ({:.6})",
        code.name(),
        code.n(),
        code.k(),
        code.d(),
        e.delta,
        run.padding,
        run.coded_time(),
        to_decimal(run.coded_time())
    ));
    out.line(format!(
        "  {ok}/{} error patterns: every user decoded",
        patterns.len()
    ));
    let mut all_ok = ok == patterns.len();
    if e.plaintexts == PlaintextSweep::All {
        let k = code.k();
        let trials = (1u64 << k.min(63)).saturating_mul(patterns.len() as u64);
        if k >= 63 || trials > SWEEP_LIMIT {
            return Err(RunError::Setup(format!(
                "plaintext sweep over 2^{k} messages is too large"
            )));
        }
        let mut good = 0u64;
        for m in 0..1u64 << k {
            let msg: Bits = (0..k).map(|i| m >> i & 1 == 1).collect();
            let cw = code.encode(&msg);
            for p in &patterns {
                let mut r = cw.clone();
                for &i in p {
                    let b = r[i];
                    r.set(i, !b);
                }
                if code.decode(&r).is_ok_and(|d| d == msg) {
                    good += 1;
                }
            }
        }
        out.line(format!(
            "  {good}/{trials} plaintext × pattern trials decoded"
        ));
        all_ok &= good == trials;
    }
    if !all_ok {
        out.fail("error-correcting delivery did not recover every pattern");
    }
    Ok((run.coded_time(), all_ok))
}

fn online(s: &Scenario, out: &mut Outcome) -> Result<(), RunError> {
    let o = s
        .online
        .as_ref()
        .ok_or_else(|| RunError::Setup("missing [online] section".into()))?;
    let library = Library::new(s.library_seed, s.params.file_size);
    let mut state = if o.random_order {
        OnlineState::with_random_order(
            &s.params,
            s.placement,
            s.placement_seed,
            library,
            &o.popular,
            &o.cached,
        )?
    } else {
        OnlineState::new(
            &s.params,
            s.placement,
            s.placement_seed,
            library,
            &o.popular,
            &o.cached,
        )?
    };
    let order: Vec<String> = state
        .cached_files()
        .iter()
        .map(|&f| format!("{f}:o={}", state.order_of(f).unwrap_or(0)))
        .collect();
    out.line(format!("initial cache {}", order.join(" ")));
    for (i, input) in o.slots.iter().enumerate() {
        let before = state.clone();
        let slot = i as u64 + 1;
        out.line("");
        match state.step(&s.association, input) {
            Ok(r) => {
                let arrivals: Vec<String> = r
                    .arrivals
                    .iter()
                    .map(|(a, d)| format!("{a} replaces {d}"))
                    .collect();
                out.line(format!(
                    "slot {slot}: demand {}{}",
                    demand_text(&r.demand),
                    if arrivals.is_empty() {
                        String::new()
                    } else {
                        format!(", {}", arrivals.join(", "))
                    }
                ));
                out.line(format!(
                    "  uncached {:?}, reduced profile {}",
                    r.uncached, r.reduced_profile
                ));
                for t in r.log.transmissions() {
                    out.line(format!(
                        "  {:>2}  {}  [{} bits]",
                        t.round,
                        t.describe(),
                        t.len()
                    ));
                }
                let formula = r.formula.or_else(|| {
                    r.demand
                        .is_distinct()
                        .then(|| t_online(&r.reduced_profile, r.u_count(), &s.params).ok())
                        .flatten()
                });
                out.line(format!(
                    "  delivery time: {}",
                    comparison(r.measured, formula)
                ));
                for ev in &r.evictions {
                    let mut line = format!(
                        "  evict {} (o={}), insert {}",
                        ev.evicted, ev.order, ev.inserted
                    );
                    if !ev.tie.is_empty() {
                        line.push_str(&format!(", tie among {:?} broken by o", ev.tie));
                    }
                    out.line(line);
                }
                out.line(format!("  cached after: {:?}", r.cached_after));
                let verdict = match &s.converse {
                    Some(c) if r.demand.is_distinct() => {
                        let mut pre = before.clone();
                        pre.evolve_popular(&input.arrivals)?;
                        converse(
                            c,
                            pre.placement(),
                            &s.association,
                            &r.demand,
                            &r.log,
                            out,
                            false,
                        )?
                    }
                    _ => None,
                };
                let agree = match (r.formula, formula) {
                    (Some(f), _) if f == r.measured => Agreement::Yes,
                    (Some(_), _) => Agreement::No,
                    (None, _) => Agreement::NotComparable,
                };
                out.rows.push(ResultRow {
                    scenario: s.name.clone(),
                    point: 0,
                    slot,
                    profile: r.reduced_profile.clone(),
                    cache_size: s.params.cache_size,
                    delta: 0,
                    measured: r.measured,
                    formula,
                    agree,
                    decoded: true,
                    verdict,
                    coded_time: None,
                    reference: None,
                });
                if s.write_trace {
                    out.artifacts
                        .push((format!("trace_slot{slot}.txt"), r.log.to_trace()));
                }
            }
            Err(e @ (OnlineError::Decode { .. } | OnlineError::FormulaMismatch { .. })) => {
                out.fail(e.to_string());
                return Ok(());
            }
            Err(e) => return Err(RunError::Setup(format!("slot {slot}: {e}"))),
        }
    }
    if s.write_placement {
        out.artifacts
            .push(("placement.txt".into(), state.placement().summary_table()));
    }
    Ok(())
}

fn sweep(s: &Scenario, jobs: Option<usize>, out: &mut Outcome) -> Result<(), RunError> {
    let sw = s
        .sweep
        .as_ref()
        .ok_or_else(|| RunError::Setup("missing [sweep] section".into()))?;
    let mut points = Vec::new();
    for &m in &sw.cache_sizes {
        for profile in &sw.profiles {
            for &delta in &sw.deltas {
                let params = s.params.with_cache_size(m);
                params
                    .validate()
                    .map_err(|e| RunError::Setup(format!("M = {m}: {e}")))?;
                let ecc = (delta > 0 || s.ecc.is_some()).then(|| {
                    let mut e = s.ecc.clone().unwrap_or(EccSpec {
                        delta,
                        code: CodeChoice::Optimal,
                        generator: None,
                        errors: ErrorPatterns::Exhaustive,
                        samples: 64,
                        seed: 0,
                        plaintexts: PlaintextSweep::Log,
                    });
                    e.delta = delta;
                    e
                });
                points.push(Point {
                    index: points.len(),
                    params,
                    association: association_for(profile),
                    ecc,
                });
            }
        }
    }
    info!("{}: {} grid points", s.name, points.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Setup(e.to_string()))?;
    let pieces: Vec<Result<Outcome, RunError>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| offline_point(s, p, false))
            .collect()
    });
    for piece in pieces {
        merge(out, piece?);
    }
    out.line("");
    out.line("table:");
    out.line("  profile  M  delta  measured  formula  coded  reference");
    let rows: Vec<String> = out
        .rows
        .iter()
        .map(|r| {
            let opt = |x: Option<Rational>| x.map_or("-".to_string(), |v| v.to_string());
            format!(
                "  {}  {}  {}  {}  {}  {}  {}",
                r.profile,
                r.cache_size,
                r.delta,
                r.measured,
                opt(r.formula),
                opt(r.coded_time),
                opt(r.reference)
            )
        })
        .collect();
    for r in rows {
        out.line(r);
    }
    Ok(())
}

fn association_for(profile: &Profile) -> Association {
    Association::from_counts(profile.counts())
}
