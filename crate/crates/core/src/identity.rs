//! Spammer identity matching by name similarity, suspension rates among
//! matched identities, and the cross-platform savings estimate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Thresholds;
use crate::ingest::Corpus;
use crate::model::{Account, AccountKey, AccountStatus, Platform};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("no audience data for platform {0}")]
    MissingAudienceData(String),
}

/// Lowercase and collapse runs of whitespace.
pub fn normalize_name(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Unit-cost Levenshtein distance over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / max_len` on normalized names; 1 means identical.
pub fn name_similarity(s1: &str, s2: &str) -> f64 {
    let (a, b) = (normalize_name(s1), normalize_name(s2));
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(&a, &b) as f64 / longest as f64
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IdentityCandidate {
    pub account: AccountKey,
    pub display_name: String,
    pub screen_name: Option<String>,
}

impl IdentityCandidate {
    /// `None` when the account has no usable name.
    pub fn from_account(a: &Account) -> Option<Self> {
        let screen_name = a
            .screen_name
            .as_ref()
            .filter(|s| !normalize_name(s).is_empty())
            .cloned();
        let display_name = if normalize_name(&a.display_name).is_empty() {
            screen_name.clone()?
        } else {
            a.display_name.clone()
        };
        Some(Self {
            account: a.key(),
            display_name,
            screen_name,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameFeature {
    ScreenName,
    DisplayName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEvidence {
    pub a: AccountKey,
    pub b: AccountKey,
    pub score: f64,
    pub feature: NameFeature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCluster {
    pub members: Vec<AccountKey>,
    pub platforms: BTreeSet<Platform>,
    pub evidence: Vec<MatchEvidence>,
}

impl IdentityCluster {
    pub fn is_cross_platform(&self) -> bool {
        self.platforms.len() > 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub clusters: Vec<IdentityCluster>,
    pub within_platform: usize,
    pub cross_platform: usize,
    /// Clusters per number of platforms spanned.
    pub by_platforms_spanned: BTreeMap<usize, usize>,
}

/// Screen names are compared when both sides have one, display names otherwise.
fn pair_score(a: &IdentityCandidate, b: &IdentityCandidate) -> (f64, NameFeature) {
    match (&a.screen_name, &b.screen_name) {
        (Some(x), Some(y)) => (name_similarity(x, y), NameFeature::ScreenName),
        _ => (
            name_similarity(&a.display_name, &b.display_name),
            NameFeature::DisplayName,
        ),
    }
}

/// Connected components of account pairs scoring at least `identity_similarity`.
pub fn match_identities(accounts: &[&Account], thresholds: &Thresholds) -> IdentityReport {
    let mut cands: Vec<IdentityCandidate> = accounts
        .iter()
        .filter_map(|a| IdentityCandidate::from_account(a))
        .collect();
    cands.sort();
    cands.dedup_by(|a, b| a.account == b.account);

    let n = cands.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut evidence = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (score, feature) = pair_score(&cands[i], &cands[j]);
            if score >= thresholds.identity_similarity {
                evidence.push((i, j, score, feature));
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &r) in roots.iter().enumerate() {
        groups.entry(r).or_default().push(i);
    }
    let mut report = IdentityReport::default();
    for (root, members) in groups {
        if members.len() < 2 {
            continue;
        }
        let cluster = IdentityCluster {
            members: members.iter().map(|&i| cands[i].account.clone()).collect(),
            platforms: members.iter().map(|&i| cands[i].account.platform).collect(),
            evidence: evidence
                .iter()
                .filter(|(i, _, _, _)| roots[*i] == root)
                .map(|&(i, j, score, feature)| MatchEvidence {
                    a: cands[i].account.clone(),
                    b: cands[j].account.clone(),
                    score,
                    feature,
                })
                .collect(),
        };
        if cluster.is_cross_platform() {
            report.cross_platform += 1;
        } else {
            report.within_platform += 1;
        }
        *report.by_platforms_spanned.entry(cluster.platforms.len()).or_insert(0) += 1;
        report.clusters.push(cluster);
    }
    report
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuspensionCount {
    pub suspended: usize,
    pub members: usize,
}

impl SuspensionCount {
    pub fn fraction(&self) -> Option<f64> {
        (self.members > 0).then(|| self.suspended as f64 / self.members as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentitySuspension {
    pub counts: BTreeMap<Platform, SuspensionCount>,
    /// Suspended share per platform; `None` where no cluster member lives.
    pub fractions: BTreeMap<Platform, Option<f64>>,
}

impl IdentitySuspension {
    /// How much larger `a`'s suspended share is than `b`'s, relative to `a`.
    pub fn asymmetry(&self, a: Platform, b: Platform) -> Option<f64> {
        asymmetry(
            self.fractions.get(&a).copied().flatten()?,
            self.fractions.get(&b).copied().flatten()?,
        )
    }
}

pub fn asymmetry(fa: f64, fb: f64) -> Option<f64> {
    (fa > 0.0).then(|| (fa - fb) / fa)
}

pub fn identity_suspension_stats(clusters: &[IdentityCluster], corpus: &Corpus) -> IdentitySuspension {
    let mut counts: BTreeMap<Platform, SuspensionCount> = BTreeMap::new();
    let members: BTreeSet<&AccountKey> = clusters.iter().flat_map(|c| &c.members).collect();
    for key in members {
        let c = counts.entry(key.platform).or_default();
        c.members += 1;
        if corpus
            .account(key)
            .is_some_and(|a| a.status == AccountStatus::Suspended)
        {
            c.suspended += 1;
        }
    }
    let fractions = Platform::ALL
        .iter()
        .map(|p| (*p, counts.get(p).and_then(SuspensionCount::fraction)))
        .collect();
    IdentitySuspension { counts, fractions }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsAnnotation {
    pub reference_usd: f64,
    pub exact_usd: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsEstimate {
    pub seed_platform: Platform,
    pub per_platform: BTreeMap<Platform, u64>,
    pub total_victims: u64,
    pub cost_per_victim_cents: u64,
    pub total_savings_cents: u128,
    /// Exact decimal dollars, two places.
    pub total_savings_usd: String,
    /// Audiences of suspended accounts are unknown, so this is a floor.
    pub lower_bound: bool,
    pub annotation: Option<SavingsAnnotation>,
}

impl SavingsEstimate {
    pub fn total_savings(&self) -> f64 {
        self.total_savings_cents as f64 / 100.0
    }

    /// Attach a note when an externally quoted figure disagrees with the exact product.
    pub fn reconcile(&mut self, reference_usd: f64) {
        let reference_cents = (reference_usd * 100.0).round();
        if reference_cents != self.total_savings_cents as f64 {
            self.annotation = Some(SavingsAnnotation {
                reference_usd,
                exact_usd: self.total_savings_usd.clone(),
                note: format!(
                    "{} victims x ${} = ${}; quoted figure ${reference_usd:.2} does not match the product",
                    self.total_victims,
                    cents_to_usd(self.cost_per_victim_cents as u128),
                    self.total_savings_usd
                ),
            });
        }
    }
}

pub fn cents_to_usd(cents: u128) -> String {
    format!("{}.{:02}", cents / 100, cents % 100)
}

pub fn usd_to_cents(usd: f64) -> u64 {
    (usd * 100.0).round() as u64
}

/// Sum the audiences of every platform except `seed_platform` and price them.
/// `None` entries mark platforms whose audience could not be collected.
pub fn estimate_cross_platform_savings(
    audience: &BTreeMap<Platform, Option<u64>>,
    thresholds: &Thresholds,
    seed_platform: Platform,
) -> Result<SavingsEstimate, IdentityError> {
    let mut per_platform = BTreeMap::new();
    for (&p, count) in audience {
        if p == seed_platform {
            continue;
        }
        let c = count.ok_or_else(|| IdentityError::MissingAudienceData(p.to_string()))?;
        per_platform.insert(p, c);
    }
    if per_platform.is_empty() {
        return Err(IdentityError::MissingAudienceData("any non-seed platform".into()));
    }
    let total_victims: u64 = per_platform.values().sum();
    let cost_per_victim_cents = usd_to_cents(thresholds.cost_per_victim_usd);
    let total_savings_cents = total_victims as u128 * cost_per_victim_cents as u128;
    Ok(SavingsEstimate {
        seed_platform,
        per_platform,
        total_victims,
        cost_per_victim_cents,
        total_savings_cents,
        total_savings_usd: cents_to_usd(total_savings_cents),
        lower_bound: true,
        annotation: None,
    })
}

/// Followers, per non-seed platform, of identities that also hold a suspended
/// account on `seed_platform`.
pub fn savings_audience(
    clusters: &[IdentityCluster],
    corpus: &Corpus,
    seed_platform: Platform,
) -> BTreeMap<Platform, Option<u64>> {
    let mut out: BTreeMap<Platform, Option<u64>> = BTreeMap::new();
    let mut counted = BTreeSet::new();
    for c in clusters {
        let seeded = c
            .members
            .iter()
            .any(|k| k.platform == seed_platform && corpus.account(k).is_some_and(Account::is_suspended));
        if !seeded {
            continue;
        }
        for k in c.members.iter().filter(|k| k.platform != seed_platform) {
            if !counted.insert(k) {
                continue;
            }
            let followers = corpus.account(k).map(|a| a.followers);
            let slot = out.entry(k.platform).or_insert(Some(0));
            *slot = match (*slot, followers) {
                (Some(s), Some(f)) => Some(s + f),
                _ => None,
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-matrix Wagner-Fischer, kept separate from the two-row version.
    fn oracle_distance(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in d[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            }
        }
        d[a.len()][b.len()]
    }

    fn acct(p: Platform, id: &str, screen: Option<&str>, display: &str) -> Account {
        let mut a = Account::new(p, id);
        a.screen_name = screen.map(str::to_string);
        a.display_name = display.into();
        a
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(name_similarity("abc", "abc"), 1.0);
        assert!((name_similarity("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        assert_eq!(name_similarity("a", ""), 0.0);
        assert_eq!(name_similarity("", "  "), 1.0);
        assert_eq!(name_similarity("Tech  Help", "tech help"), 1.0);
        assert!((name_similarity("techhelp99", "techhelp_99") - 10.0 / 11.0).abs() < 1e-12);
        assert_eq!(name_similarity("alice", "zorro"), 0.0);
    }

    #[test]
    fn matching_examples() {
        let th = Thresholds::default();
        let a = acct(Platform::TW, "1", Some("techhelp99"), "x");
        let b = acct(Platform::FB, "2", Some("techhelp_99"), "y");
        let r = match_identities(&[&a, &b], &th);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.cross_platform, 1);
        assert_eq!(r.clusters[0].evidence[0].feature, NameFeature::ScreenName);

        let a = acct(Platform::TW, "1", Some("alice"), "x");
        let b = acct(Platform::FB, "2", Some("zorro"), "x");
        assert!(match_identities(&[&a, &b], &th).clusters.is_empty());

        let t = acct(Platform::TW, "1", Some("support desk"), "Support Desk");
        let g = acct(Platform::GP, "2", None, "Support Desk");
        let y = acct(Platform::YT, "3", None, "support desk");
        let r = match_identities(&[&t, &g, &y], &th);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].platforms.len(), 3);
        assert_eq!(r.by_platforms_spanned[&3], 1);
    }

    #[test]
    fn suspension_fractions() {
        let mut corpus = Corpus::new();
        let mut keys = vec![];
        for i in 0..5 {
            let mut a = acct(Platform::TW, &format!("t{i}"), Some("name"), "n");
            if i < 3 {
                a.status = AccountStatus::Suspended;
            }
            keys.push(a.key());
            corpus.upsert_account(a);
        }
        let cluster = IdentityCluster {
            platforms: BTreeSet::from([Platform::TW]),
            members: keys,
            evidence: vec![],
        };
        let s = identity_suspension_stats(&[cluster], &corpus);
        assert_eq!(s.fractions[&Platform::TW], Some(0.6));
        assert_eq!(s.fractions[&Platform::FB], None);
        assert!((asymmetry(0.60, 0.04).unwrap() - 0.9333333333333333).abs() < 1e-12);
    }

    #[test]
    fn savings_examples() {
        let th = Thresholds::default();
        let aud = BTreeMap::from([
            (Platform::TW, None),
            (Platform::FB, Some(21_053)),
            (Platform::GP, Some(11_538)),
            (Platform::YT, Some(2_816)),
        ]);
        let mut s = estimate_cross_platform_savings(&aud, &th, Platform::TW).unwrap();
        assert_eq!(s.total_victims, 35_407);
        assert_eq!(s.total_savings_cents, 1_029_989_630);
        assert_eq!(s.total_savings_usd, "10299896.30");
        assert!(s.lower_bound);
        s.reconcile(8.8e6);
        assert!(s.annotation.as_ref().unwrap().note.contains("10299896.30"));
        let mut same = s.clone();
        same.annotation = None;
        same.reconcile(10_299_896.30);
        assert!(same.annotation.is_none());

        let zeros = BTreeMap::from([(Platform::FB, Some(0)), (Platform::GP, Some(0))]);
        let z = estimate_cross_platform_savings(&zeros, &th, Platform::TW).unwrap();
        assert_eq!((z.total_victims, z.total_savings_cents), (0, 0));
        let missing = BTreeMap::from([(Platform::FB, None)]);
        assert!(matches!(
            estimate_cross_platform_savings(&missing, &th, Platform::TW),
            Err(IdentityError::MissingAudienceData(_))
        ));
    }

    proptest! {
        #[test]
        fn similarity_agrees_with_oracle(a in "[a-c ]{0,20}", b in "[a-c ]{0,20}") {
            let s = name_similarity(&a, &b);
            prop_assert_eq!(s, name_similarity(&b, &a));
            prop_assert!((0.0..=1.0).contains(&s));
            let (na, nb) = (normalize_name(&a), normalize_name(&b));
            prop_assert_eq!(s == 1.0, na == nb);
            let longest = na.chars().count().max(nb.chars().count());
            let expect = if longest == 0 { 1.0 } else { 1.0 - oracle_distance(&na, &nb) as f64 / longest as f64 };
            prop_assert!((s - expect).abs() < 1e-12);
        }

        #[test]
        fn matching_is_order_invariant(names in proptest::collection::vec("[ab]{1,4}", 2..8), rot in 0usize..8) {
            let th = Thresholds::default();
            let accts: Vec<Account> = names
                .iter()
                .enumerate()
                .map(|(i, n)| acct(Platform::ALL[i % 5], &i.to_string(), Some(n), n))
                .collect();
            let fwd: Vec<&Account> = accts.iter().collect();
            let mut rev = fwd.clone();
            rev.reverse();
            let len = rev.len();
            rev.rotate_left(rot % len);
            prop_assert_eq!(match_identities(&fwd, &th), match_identities(&rev, &th));
        }

        #[test]
        fn savings_arithmetic_is_exact(counts in proptest::collection::vec(0u64..1_000_000, 1..4), cents in 0u64..100_000) {
            let th = Thresholds { cost_per_victim_usd: cents as f64 / 100.0, ..Default::default() };
            let aud: BTreeMap<Platform, Option<u64>> =
                counts.iter().enumerate().map(|(i, c)| (Platform::ALL[i + 1], Some(*c))).collect();
            let s = estimate_cross_platform_savings(&aud, &th, Platform::TW).unwrap();
            prop_assert_eq!(s.total_victims, counts.iter().sum::<u64>());
            prop_assert_eq!(s.total_savings_cents, s.total_victims as u128 * cents as u128);
            prop_assert_eq!(s.per_platform.values().sum::<u64>(), s.total_victims);
        }
    }
}
