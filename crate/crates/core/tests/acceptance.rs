//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phonecamp::config::{Config, Thresholds};
use phonecamp::identity::{estimate_cross_platform_savings, name_similarity};
use phonecamp::metrics::{
    automation_fraction, collusion_adjusted_visibility, compute_visibility, gap_stats, inter_arrival_stats,
    pearson_correlation, sequence_analysis, suspension_stats, ActorAction, ActorRecord, EngagementActors, GroupBy,
};
use phonecamp::model::{Account, AccountKey, AccountStatus, Engagement, Platform, Post, PostKey};
use phonecamp::phone::{extract_phone_numbers, normalize_phone, CountryTable};
use phonecamp::pipeline::{
    build_report, report_csv, report_json, run_pipeline, sweep_merge_thresholds, PipelineInputs,
};
use phonecamp::synth::{evaluate_clustering, generate_corpus, GroundTruth, SynthFiles, SynthSpec};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = f()?;
    let took = start.elapsed();
    check(
        took < limit,
        format!("{out}; {:.2}s", took.as_secs_f64()),
        format!("{out}; took {:.2}s, limit {}s", took.as_secs_f64(), limit.as_secs()),
    )
}

fn write_synth(spec: &SynthSpec, dir: &Path) -> SynthFiles {
    generate_corpus(spec).unwrap().write_to_dir(dir).unwrap()
}

fn inputs(files: &SynthFiles) -> PipelineInputs {
    PipelineInputs {
        posts: vec![files.posts.clone()],
        snapshots: vec![files.snapshot.clone()],
        dnc: Some(files.dnc.clone()),
        actors: Some(files.actors.clone()),
        ..Default::default()
    }
}

// ---------------------------------------------------------------------------

const SEPARATORS: &[&str] = &["", " ", "-", ".", "  ", " - ", "(", ")", ") ", "-.", "\t"];

fn decorate(rng: &mut ChaCha8Rng, digits: &str, plus: bool) -> String {
    let mut s = String::from(if plus { "+" } else { "" });
    for (i, d) in digits.chars().enumerate() {
        if i > 0 {
            s.push_str(SEPARATORS[rng.random_range(0..SEPARATORS.len())]);
        }
        s.push(d);
    }
    s
}

fn normalization() -> Outcome {
    let table = CountryTable::bundled();
    let variants = [
        "1-888-551-2881",
        "1(888)551-2881",
        "1(888) 551-2881",
        "1.888.551.2881",
        "1 888 551 2881",
    ];
    for v in variants {
        let n = normalize_phone(v, table).map_err(|e| format!("{v}: {e}"))?;
        if n.canonical != "18885512881" {
            return Err(format!("{v} normalized to {}", n.canonical));
        }
        let found = extract_phone_numbers(&format!("Call {v} now"), table);
        if found.len() != 1 || found[0].phone.canonical != "18885512881" {
            return Err(format!("extraction of {v} gave {found:?}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2881);
    let prefixes = ["1", "44", "91", "62", "1888"];
    let mut mismatches = 0;
    for i in 0..10_000 {
        let digits = if i % 5 == 0 {
            "18885512881".to_string()
        } else {
            let p = prefixes[rng.random_range(0..prefixes.len())];
            let rest: String = (0..11 - p.len())
                .map(|_| char::from(b'0' + rng.random_range(0..10u8)))
                .collect();
            format!("{p}{rest}")
        };
        let plus = digits.starts_with(['4', '6', '9']);
        let text = decorate(&mut rng, &digits, plus);
        let normalized = normalize_phone(&text, table).map(|p| p.canonical).ok();
        let extracted = extract_phone_numbers(&format!("reach us on {text} today"), table);
        let extracted_ok = extracted.len() == 1 && extracted[0].phone.canonical == digits;
        if normalized.as_deref() != Some(digits.as_str()) || !extracted_ok {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        "5 variants -> 18885512881; 10000 random separator insertions, 0 mismatches".into(),
        format!("{mismatches} of 10000 random separator insertions mismatched"),
    )
}

// ---------------------------------------------------------------------------

fn recovery_scores(overlap: f64, dir: &Path) -> Result<(f64, f64, usize), String> {
    let spec = SynthSpec::planted(11, 10, 3, 500, overlap);
    let files = write_synth(&spec, dir);
    let run = run_pipeline(&inputs(&files), &Config::default(), None).map_err(|e| e.to_string())?;
    let truth = GroundTruth::load(&files.truth).map_err(|e| e.to_string())?;
    let s = evaluate_clustering(&run.artifacts.partition(), &truth.posts).map_err(|e| e.to_string())?;
    Ok((s.f1, s.ari, run.artifacts.campaigns.len()))
}

fn planted_recovery(tmp: &Path) -> Outcome {
    let (f1, ari, n) = recovery_scores(0.0, &tmp.join("disjoint"))?;
    let (f1o, ario, no) = recovery_scores(0.3, &tmp.join("overlap"))?;
    check(
        f1 == 1.0 && ari == 1.0 && f1o >= 0.9,
        format!("disjoint: {n} campaigns F1={f1} ARI={ari}; overlap 0.3: {no} campaigns F1={f1o:.4} ARI={ario:.4}"),
        format!("disjoint F1={f1} ARI={ari} ({n} campaigns); overlap 0.3 F1={f1o} ({no} campaigns)"),
    )
}

// ---------------------------------------------------------------------------

fn silhouette_knee(tmp: &Path) -> Outcome {
    let files = write_synth(&SynthSpec::planted(11, 10, 3, 500, 0.3), &tmp.join("knee"));
    let config = Config::default();
    let corpus = run_pipeline(&inputs(&files), &config, None)
        .map_err(|e| e.to_string())?
        .corpus;
    let sweep = sweep_merge_thresholds(&corpus, &config, &[0.3, 0.7, 0.95]).map_err(|e| e.to_string())?;
    let s: Vec<Option<f64>> = sweep.iter().map(|p| p.silhouette).collect();
    let line = sweep
        .iter()
        .map(|p| format!("t={} campaigns={} s={:?}", p.threshold, p.campaigns, p.silhouette))
        .collect::<Vec<_>>()
        .join(", ");
    // an undefined silhouette (a single campaign) ranks below any defined one
    let knee =
        s[1].is_some_and(|mid| mid >= s[0].unwrap_or(f64::NEG_INFINITY) && mid >= s[2].unwrap_or(f64::NEG_INFINITY));
    check(knee, line.clone(), line)
}

// ---------------------------------------------------------------------------

const PHONES: [&str; 4] = ["18885512881", "442079460000", "919876543210", "6281234567890"];

struct RandomCorpus {
    posts: Vec<Post>,
    accounts: Vec<Account>,
    actors: Vec<ActorRecord>,
}

fn random_corpus(rng: &mut ChaCha8Rng) -> RandomCorpus {
    let table = CountryTable::bundled();
    let n = rng.random_range(0..=200);
    let authors = rng.random_range(1..=12);
    let mut posts = Vec::with_capacity(n);
    for i in 0..n {
        let platform = Platform::ALL[rng.random_range(0..5)];
        let phone = PHONES[rng.random_range(0..PHONES.len())];
        posts.push(Post {
            post_id: format!("p{i}"),
            platform,
            author: format!("u{}", rng.random_range(0..authors)),
            timestamp: rng.random_range(0..200_000),
            text: format!("call {phone}"),
            urls: vec![],
            phones: vec![normalize_phone(phone, table).unwrap()],
            engagement: Engagement {
                likes: rng.random_range(0..20),
                shares: rng.random_range(0..10),
                reactions: 0,
                views: rng.random_range(0..1000),
            },
            client: None,
            language: None,
            has_photo: false,
        });
    }
    let keys: BTreeSet<AccountKey> = posts.iter().map(|p| p.author_key()).collect();
    let accounts: Vec<Account> = keys
        .into_iter()
        .map(|k| {
            let mut a = Account::new(k.platform, k.user_id.clone());
            a.status =
                [AccountStatus::Active, AccountStatus::Suspended, AccountStatus::Deleted][rng.random_range(0..3)];
            a
        })
        .collect();
    let mut actors = Vec::new();
    for p in &posts {
        for _ in 0..rng.random_range(0..6) {
            actors.push(ActorRecord {
                platform: p.platform,
                post_id: p.post_id.clone(),
                user_id: format!("u{}", rng.random_range(0..authors + 5)),
                action: [ActorAction::Like, ActorAction::Share, ActorAction::Reaction][rng.random_range(0..3)],
            });
        }
    }
    RandomCorpus {
        posts,
        accounts,
        actors,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn oracle_gaps(ts: &[i64]) -> Option<(usize, f64, f64, f64)> {
    let mut t = ts.to_vec();
    t.sort();
    let mut g: Vec<i64> = (1..t.len()).map(|i| t[i] - t[i - 1]).collect();
    if g.is_empty() {
        return None;
    }
    let n = g.len();
    let mean = g.iter().sum::<i64>() as f64 / n as f64;
    g.sort();
    let median = if n % 2 == 1 {
        g[n / 2] as f64
    } else {
        (g[n / 2 - 1] + g[n / 2]) as f64 / 2.0
    };
    // smallest value with at least 90% of observations at or below it
    let p90 = *g
        .iter()
        .find(|&&v| g.iter().filter(|&&w| w <= v).count() * 10 >= n * 9)
        .unwrap() as f64;
    Some((n, mean, median, p90))
}

fn oracle_visibility(p: &Post) -> u64 {
    match p.platform {
        Platform::YT => p.engagement.likes,
        Platform::FL => 0,
        _ => p.engagement.likes + p.engagement.shares,
    }
}

fn action_counts(platform: Platform, action: ActorAction) -> bool {
    match (platform, action) {
        (Platform::FL, _) => false,
        (Platform::FB, _) => true,
        (Platform::YT, a) => a == ActorAction::Like,
        (_, a) => a != ActorAction::Reaction,
    }
}

fn oracle_pearson(x: &[i64], y: &[i64]) -> Option<f64> {
    let n = x.len() as i128;
    if n < 2 {
        return None;
    }
    let sx: i128 = x.iter().map(|&v| v as i128).sum();
    let sy: i128 = y.iter().map(|&v| v as i128).sum();
    let sxx: i128 = x.iter().map(|&v| (v as i128).pow(2)).sum();
    let syy: i128 = y.iter().map(|&v| (v as i128).pow(2)).sum();
    let sxy: i128 = x.iter().zip(y).map(|(&a, &b)| a as i128 * b as i128).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 || vy == 0 {
        return None;
    }
    Some((n * sxy - sx * sy) as f64 / ((vx as f64) * (vy as f64)).sqrt())
}

fn oracle_ari(pred: &[usize], truth: &[usize]) -> (f64, f64, f64) {
    let n = pred.len();
    let (mut tp, mut fp, mut fneg, mut tn) = (0i128, 0i128, 0i128, 0i128);
    for i in 0..n {
        for j in i + 1..n {
            match (pred[i] == pred[j], truth[i] == truth[j]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => tn += 1,
            }
        }
    }
    let p = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fneg == 0 {
        1.0
    } else {
        tp as f64 / (tp + fneg) as f64
    };
    let den = (tp + fneg) * (fneg + tn) + (tp + fp) * (fp + tn);
    let ari = if den == 0 {
        1.0
    } else {
        (2 * (tp * tn - fneg * fp)) as f64 / den as f64
    };
    (p, r, ari)
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let th = Thresholds::default();
    let mut checks: BTreeMap<&str, usize> = BTreeMap::new();
    for round in 0..100 {
        let c = random_corpus(&mut rng);
        let posts: Vec<&Post> = c.posts.iter().collect();
        let fail = |what: &str| Err(format!("corpus {round}: {what} disagrees with oracle"));

        let ts: Vec<i64> = posts.iter().map(|p| p.timestamp).collect();
        let got = gap_stats(&ts).map(|g| (g.gaps, g.mean, g.median, g.p90));
        let want = oracle_gaps(&ts);
        let same = match (got, want) {
            (None, None) => true,
            (Some(a), Some(b)) => a.0 == b.0 && close(a.1, b.1) && a.2 == b.2 && a.3 == b.3,
            _ => false,
        };
        if !same {
            return fail("inter-arrival");
        }
        let per = inter_arrival_stats(&posts, GroupBy::Platform);
        for p in Platform::ALL {
            let ts: Vec<i64> = posts.iter().filter(|x| x.platform == p).map(|x| x.timestamp).collect();
            let got = per
                .get(p.as_str())
                .copied()
                .flatten()
                .map(|g| (g.gaps, g.mean, g.median, g.p90));
            let want = oracle_gaps(&ts);
            let same = match (got, want) {
                (None, None) => true,
                (Some(a), Some(b)) => a.0 == b.0 && close(a.1, b.1) && a.2 == b.2 && a.3 == b.3,
                _ => false,
            };
            if !same {
                return fail("per-platform inter-arrival");
            }
        }
        *checks.entry("inter-arrival").or_insert(0) += 1;

        match automation_fraction(&posts, &th) {
            Ok(r) => {
                let mut t = ts.clone();
                t.sort();
                let below = t.windows(2).filter(|w| w[1] - w[0] < th.automation_gap_seconds).count();
                if r.gaps_below != below
                    || r.gaps != t.len() - 1
                    || !close(r.fraction, below as f64 / (t.len() - 1) as f64)
                {
                    return fail("automation fraction");
                }
            }
            Err(_) if posts.len() < 2 => {}
            Err(_) => return fail("automation fraction"),
        }
        *checks.entry("automation").or_insert(0) += 1;

        let x: Vec<i64> = posts.iter().map(|p| p.engagement.likes as i64).collect();
        let y: Vec<i64> = posts
            .iter()
            .map(|p| (p.engagement.views as i64) - 3 * p.engagement.shares as i64)
            .collect();
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        match (pearson_correlation(&xf, &yf).ok(), oracle_pearson(&x, &y)) {
            (None, None) => {}
            (Some(a), Some(b)) if close(a, b) => {}
            _ => return fail("pearson"),
        }
        *checks.entry("pearson").or_insert(0) += 1;

        let accounts: Vec<&Account> = c.accounts.iter().collect();
        let s = suspension_stats(&accounts, &posts);
        let mut want_lifetimes = BTreeMap::new();
        for a in &c.accounts {
            if a.status != AccountStatus::Suspended {
                continue;
            }
            let own: Vec<i64> = c
                .posts
                .iter()
                .filter(|p| p.author_key() == a.key())
                .map(|p| p.timestamp)
                .collect();
            if let (Some(lo), Some(hi)) = (own.iter().min(), own.iter().max()) {
                want_lifetimes.insert(a.key(), (hi - lo) as f64 / 86_400.0);
            }
        }
        let suspended = c
            .accounts
            .iter()
            .filter(|a| a.status == AccountStatus::Suspended)
            .count();
        let within = want_lifetimes.values().filter(|&&d| d < 1.0).count();
        let lifetimes_match = s.lifetimes_days.len() == want_lifetimes.len()
            && s.lifetimes_days
                .iter()
                .zip(&want_lifetimes)
                .all(|(a, b)| a.0 == b.0 && close(*a.1, *b.1));
        if s.suspended_count != suspended || s.within_a_day != within || !lifetimes_match {
            return fail("suspension lifetimes");
        }
        *checks.entry("suspension").or_insert(0) += 1;

        let vis = compute_visibility(&posts);
        let mut want_raw: BTreeMap<Platform, u64> = Platform::ALL.iter().map(|&p| (p, 0)).collect();
        for p in &posts {
            *want_raw.get_mut(&p.platform).unwrap() += oracle_visibility(p);
        }
        if vis.raw != want_raw || vis.total != want_raw.values().sum::<u64>() {
            return fail("visibility");
        }
        *checks.entry("visibility").or_insert(0) += 1;

        let mut actors = EngagementActors::new();
        for a in &c.actors {
            actors.insert(a.clone());
        }
        let authors: BTreeSet<AccountKey> = posts.iter().map(|p| p.author_key()).collect();
        let got = collusion_adjusted_visibility(&posts, &authors, &actors);
        if c.actors.is_empty() {
            if got.is_ok() {
                return fail("collusion without actor data");
            }
        } else {
            let got = got.map_err(|e| e.to_string())?;
            let mut want: BTreeMap<Platform, u64> = Platform::ALL.iter().map(|&p| (p, 0)).collect();
            for p in &posts {
                let colluding = c
                    .actors
                    .iter()
                    .filter(|a| a.platform == p.platform && a.post_id == p.post_id)
                    .filter(|a| authors.contains(&AccountKey::new(a.platform, a.user_id.clone())))
                    .filter(|a| action_counts(p.platform, a.action))
                    .count() as u64;
                *want.get_mut(&p.platform).unwrap() += oracle_visibility(p).saturating_sub(colluding);
            }
            if got.collusion_adjusted.as_ref() != Some(&want) {
                return fail("collusion adjustment");
            }
        }
        *checks.entry("collusion").or_insert(0) += 1;

        let seq = sequence_analysis(PHONES.iter().copied(), &posts);
        let mut histogram: BTreeMap<Platform, usize> = Platform::ALL.iter().map(|&p| (p, 0)).collect();
        let mut entries = 0;
        for phone in PHONES {
            let mut firsts: Vec<(i64, usize)> = Platform::ALL
                .iter()
                .enumerate()
                .filter_map(|(rank, &pl)| {
                    posts
                        .iter()
                        .filter(|p| p.platform == pl && p.phones[0].canonical == phone)
                        .map(|p| p.timestamp)
                        .min()
                        .map(|t| (t, rank))
                })
                .collect();
            if firsts.is_empty() {
                continue;
            }
            firsts.sort();
            let want: Vec<Platform> = firsts.iter().map(|&(_, r)| Platform::ALL[r]).collect();
            let Some(e) = seq.entries.iter().find(|e| e.phone == phone) else {
                return fail("sequence entry missing");
            };
            let latency = firsts.get(1).map(|&(t, _)| t - firsts[0].0);
            if e.sequence != want || e.start != want[0] || e.inter_osn_latency != latency {
                return fail("first-appearance sequence");
            }
            *histogram.get_mut(&want[0]).unwrap() += 1;
            entries += 1;
        }
        if seq.start_histogram != histogram || seq.entries.len() != entries {
            return fail("sequence histogram");
        }
        *checks.entry("sequences").or_insert(0) += 1;

        let pred: Vec<usize> = (0..posts.len()).map(|_| rng.random_range(0..4)).collect();
        let truth: Vec<usize> = posts
            .iter()
            .map(|p| PHONES.iter().position(|&ph| ph == p.phones[0].canonical).unwrap())
            .collect();
        let as_map = |labels: &[usize]| -> BTreeMap<PostKey, String> {
            posts
                .iter()
                .zip(labels)
                .map(|(p, l)| (p.key(), l.to_string()))
                .collect()
        };
        let got = evaluate_clustering(&as_map(&pred), &as_map(&truth)).map_err(|e| e.to_string())?;
        let (p, r, ari) = oracle_ari(&pred, &truth);
        if !close(got.precision, p) || !close(got.recall, r) || !close(got.ari, ari) {
            return fail("clustering scores");
        }
        *checks.entry("clustering scores").or_insert(0) += 1;
    }
    let summary = checks
        .iter()
        .map(|(k, v)| format!("{k} {v}/100"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(summary)
}

// ---------------------------------------------------------------------------

fn paper_values() -> Outcome {
    let r = pearson_correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).map_err(|e| e.to_string())?;
    if r != 1.0 {
        return Err(format!("pearson([1,2,3],[2,4,6]) = {r}"));
    }
    let sim = name_similarity("kitten", "sitting");
    if (sim - (1.0 - 3.0 / 7.0)).abs() > 1e-12 {
        return Err(format!("name_similarity(kitten, sitting) = {sim}"));
    }
    let audience = BTreeMap::from([
        (Platform::FB, Some(21_053)),
        (Platform::GP, Some(11_538)),
        (Platform::YT, Some(2_816)),
    ]);
    let mut s =
        estimate_cross_platform_savings(&audience, &Thresholds::default(), Platform::TW).map_err(|e| e.to_string())?;
    if s.total_victims != 35_407 {
        return Err(format!("victims = {}", s.total_victims));
    }
    if s.total_savings_cents != 1_029_989_630 || s.total_savings_usd != "10299896.30" {
        return Err(format!("savings = {}", s.total_savings_usd));
    }
    s.reconcile(8.8e6);
    let note = s.annotation.as_ref().map(|a| a.note.clone()).unwrap_or_default();
    check(
        !note.is_empty(),
        format!(
            "pearson=1.0, kitten/sitting={sim:.12}, victims=35407, savings=${}, annotation: {note}",
            s.total_savings_usd
        ),
        "no annotation for the 8.8M reference".into(),
    )
}

// ---------------------------------------------------------------------------

fn flickr_start(tmp: &Path) -> Outcome {
    let mut spec = SynthSpec::planted(21, 4, 3, 200, 0.0);
    let starts = [Platform::TW, Platform::FB, Platform::GP, Platform::YT];
    for (c, start) in spec.campaigns.iter_mut().zip(starts) {
        c.start_platform = Some(start);
    }
    let files = write_synth(&spec, &tmp.join("flickr"));
    let mut config = Config::default();
    config.thresholds.min_campaign_posts = 100;
    let run = run_pipeline(&inputs(&files), &config, None).map_err(|e| e.to_string())?;
    let report = build_report(&run.artifacts, &run.corpus);
    let fl_posts = run.corpus.posts().filter(|p| p.platform == Platform::FL).count();
    let hist = &report.sequences.start_histogram;
    let fl = hist.get(&Platform::FL).copied().unwrap_or(usize::MAX);
    check(
        fl == 0 && report.sequences.phones == 12 && fl_posts > 0,
        format!("{fl_posts} Flickr posts, start histogram {hist:?}, Flickr starts = {fl}"),
        format!(
            "Flickr starts = {fl}, phones = {}, Flickr posts = {fl_posts}",
            report.sequences.phones
        ),
    )
}

// ---------------------------------------------------------------------------

fn determinism(tmp: &Path) -> Outcome {
    let files = write_synth(&SynthSpec::planted(31, 4, 3, 150, 0.3), &tmp.join("det"));
    let mut config = Config::default();
    config.thresholds.min_campaign_posts = 50;
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let data = tmp.join(format!("det-{run}"));
        let out = run_pipeline(&inputs(&files), &config, Some(&data)).map_err(|e| e.to_string())?;
        let dir = data.join("runs").join(out.artifacts.run_id());
        let json = std::fs::read(dir.join("report.json")).map_err(|e| e.to_string())?;
        let csv = std::fs::read(dir.join("report.csv")).map_err(|e| e.to_string())?;
        let report = build_report(&out.artifacts, &out.corpus);
        if report_json(&report).as_bytes() != json || report_csv(&report).as_bytes() != csv {
            return Err("exported report differs from the rebuilt one".into());
        }
        outputs.push((json, csv));
    }
    check(
        outputs[0] == outputs[1],
        format!(
            "report.json ({} bytes) and report.csv ({} bytes) identical across runs",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
        "exported reports differ between runs".into(),
    )
}

// ---------------------------------------------------------------------------

fn cli(data: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_phonecamp"))
        .arg("--data-dir")
        .arg(data)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn cli_only(tmp: &Path) -> Outcome {
    let input = tmp.join("cli-in");
    let input_s = input.to_str().unwrap();
    cli(
        tmp,
        &[
            "synth",
            "--campaigns",
            "3",
            "--phones",
            "3",
            "--posts",
            "100",
            "--overlap",
            "0.3",
            "--seed",
            "4",
            "--out",
            input_s,
        ],
    )?;
    let posts = input.join("posts.jsonl");
    let truth = input.join("truth.json");
    let mut reports = Vec::new();
    for run in ["x", "y"] {
        let data = tmp.join(format!("cli-{run}"));
        cli(&data, &["ingest", posts.to_str().unwrap()])?;
        cli(
            &data,
            &["snapshot", input.join("accounts_snapshot.jsonl").to_str().unwrap()],
        )?;
        cli(&data, &["cluster", "--dnc", input.join("dnc.txt").to_str().unwrap()])?;
        cli(&data, &["flag"])?;
        cli(&data, &["metrics"])?;
        cli(&data, &["identities"])?;
        let scores: serde_json::Value =
            serde_json::from_str(&cli(&data, &["evaluate", "--truth", truth.to_str().unwrap()])?)
                .map_err(|e| e.to_string())?;
        if scores["f1"].as_f64() != Some(1.0) {
            return Err(format!("CLI evaluation F1 = {}", scores["f1"]));
        }
        reports.push((cli(&data, &["report"])?, cli(&data, &["report", "--format", "csv"])?));
    }
    let ui_built = Path::new(env!("CARGO_MANIFEST_DIR")).join("../triage_ui").exists();
    check(
        reports[0] == reports[1] && !ui_built,
        "synth, ingest, snapshot, cluster, flag, metrics, identities, evaluate, report via CLI; no UI component".into(),
        format!("reports equal: {}; UI present: {ui_built}", reports[0] == reports[1]),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let t = tmp.path();
    let criteria: Vec<Criterion> = vec![
        (
            "phone normalization conformance",
            Box::new(|| timed(Duration::from_secs(5), normalization)),
        ),
        (
            "planted-campaign recovery",
            Box::new(|| timed(Duration::from_secs(60), || planted_recovery(t))),
        ),
        ("silhouette knee", Box::new(|| silhouette_knee(t))),
        ("metric oracle equivalence", Box::new(metric_oracles)),
        ("paper-value unit checks", Box::new(paper_values)),
        ("flickr never chosen as start", Box::new(|| flickr_start(t))),
        ("pipeline determinism", Box::new(|| determinism(t))),
        ("cli-only suite", Box::new(|| cli_only(t))),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
