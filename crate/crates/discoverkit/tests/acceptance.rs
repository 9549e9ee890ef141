//! Acceptance suite. Each test is one criterion and prints a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`). Tolerances
//! are pinned here, in code.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use discoverkit::datestamp::UtcInstant;
use discoverkit::diagnostics::{diagnose_many, DiagnosisOptions, EndpointStatus};
use discoverkit::freshfinds::{
    gap_report_at, match_all, normalize_title, HoldingsIndex, MatchMethod,
};
use discoverkit::metrics::{anonymized_report, fleet_totals, group_growth, growth, GroupBy};
use discoverkit::mock::{corpus_from_seed, CorpusOptions, FaultMode, FaultProfile, MockServer};
use discoverkit::oai::{parse_response, FaultKind, OaiClient, OaiEndpoint, ParseOutcome, Verb};
use discoverkit::quality::{find_rights_statements, NormalizedLicense};
use discoverkit::registry::{table1_period, table1_profiles, RepositoryProfile};

fn conclude(criterion: &str, result: Result<String, String>) {
    match result {
        Ok(detail) => println!("PASS  {criterion}: {detail}"),
        Err(detail) => {
            println!("FAIL  {criterion}: {detail}");
            panic!("{criterion} failed: {detail}");
        }
    }
}

fn check(ok: bool, message: &str, failures: &mut Vec<String>) {
    if !ok {
        failures.push(message.to_string());
    }
}

fn verdict(failures: Vec<String>, pass_detail: String) -> Result<String, String> {
    if failures.is_empty() {
        Ok(pass_detail)
    } else {
        Err(failures.join("; "))
    }
}

// ---------------------------------------------------------------- criterion 1

#[test]
fn criterion_1_fleet_totals_reproduction() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let profiles = table1_profiles();
    let period = table1_period();
    let records: Vec<_> = profiles
        .iter()
        .map(|p| growth(p, period.start.instant, period.end.instant).expect("seed has counts"))
        .collect();
    let totals = fleet_totals(&records).expect("distinct ids");

    check(
        totals.total_start == 1_456_834,
        &format!("total_start {} != 1456834", totals.total_start),
        &mut failures,
    );
    check(
        totals.total_end == 2_185_604,
        &format!("total_end {} != 2185604", totals.total_end),
        &mut failures,
    );
    let percent: f64 = totals.percent.as_deref().unwrap_or("0").parse().unwrap();
    check(
        (percent - 50.02).abs() <= 0.01,
        &format!("growth {percent}% not within 50.02 ± 0.01"),
        &mut failures,
    );
    let elapsed = started.elapsed();
    check(
        elapsed < Duration::from_secs(1),
        &format!("took {elapsed:?}, budget 1 s"),
        &mut failures,
    );

    conclude(
        "criterion 1 (fleet totals reproduction)",
        verdict(
            failures,
            format!(
                "totals ({}, {}), growth {percent:.2}% in {elapsed:?}",
                totals.total_start, totals.total_end
            ),
        ),
    );
}

// ---------------------------------------------------------------- criterion 2

fn fault_for(status: EndpointStatus) -> FaultMode {
    match status {
        EndpointStatus::Functional => FaultMode::Healthy,
        EndpointStatus::NonOperatingOaiPmh => FaultMode::MalformedXmlOnListRecords,
        EndpointStatus::NoOaiPmh => FaultMode::Http404Everywhere,
        EndpointStatus::WrongOaiResolver => FaultMode::WrongResolverBaseurl,
        EndpointStatus::NoFullTextHarvesting => FaultMode::NoFulltextLinks,
        EndpointStatus::LittleFullTextIndexing => FaultMode::SparseFulltextLinks { fraction: 0.10 },
    }
}

#[test]
fn criterion_2_pilot_fleet_classification() {
    let started = Instant::now();
    let mut failures = Vec::new();

    let profiles = table1_profiles();
    let period = table1_period();
    let start_status = |p: &RepositoryProfile| p.status_at(period.start.instant).unwrap();
    let end_status = |p: &RepositoryProfile| p.status_at(period.end.instant).unwrap();

    // one mock server per repository, fault chosen from its start status
    let servers: Vec<MockServer> = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let corpus = corpus_from_seed(1000 + i as u64, 40, &CorpusOptions::default());
            MockServer::serve(corpus, FaultProfile::new(fault_for(start_status(p))), 0)
                .expect("ephemeral port")
        })
        .collect();
    let targets: Vec<(Option<String>, OaiEndpoint)> = profiles
        .iter()
        .zip(&servers)
        .map(|(p, s)| {
            (
                Some(p.id.clone()),
                OaiEndpoint::local(s.base_url()).unwrap(),
            )
        })
        .collect();
    let opts = DiagnosisOptions::default();

    let reports = diagnose_many(&targets, &opts, 4);
    let mut non_functional = 0;
    for (profile, report) in profiles.iter().zip(&reports) {
        let expected = start_status(profile);
        if report.status != EndpointStatus::Functional {
            non_functional += 1;
        }
        check(
            report.status == expected,
            &format!(
                "{}: diagnosed {:?}, registry start label says {:?}",
                profile.id, report.status, expected
            ),
            &mut failures,
        );
    }
    check(
        non_functional == 15,
        &format!("{non_functional} non-functional at start, expected 15"),
        &mut failures,
    );

    // interventions: hot-swap every server to its end-state fault profile
    for (profile, server) in profiles.iter().zip(&servers) {
        server
            .set_fault(FaultProfile::new(fault_for(end_status(profile))))
            .unwrap();
    }
    let reports = diagnose_many(&targets, &opts, 4);
    let functional = reports
        .iter()
        .filter(|r| r.status == EndpointStatus::Functional)
        .count();
    check(
        functional == 22,
        &format!("{functional} functional at end, expected 22"),
        &mut failures,
    );
    for (profile, report) in profiles.iter().zip(&reports) {
        check(
            report.status == end_status(profile),
            &format!(
                "{}: end status {:?} != {:?}",
                profile.id,
                report.status,
                end_status(profile)
            ),
            &mut failures,
        );
        if profile.id == "stanford-university" {
            check(
                report.status == EndpointStatus::NoOaiPmh,
                &format!("stanford ended {:?}, expected NoOaiPmh", report.status),
                &mut failures,
            );
        }
    }
    let elapsed = started.elapsed();
    check(
        elapsed < Duration::from_secs(60),
        &format!("took {elapsed:?}, budget 60 s"),
        &mut failures,
    );

    conclude(
        "criterion 2 (pilot fleet classification)",
        verdict(failures, format!(
            "23 repositories: 15 non-functional at start, 22 functional after interventions, in {elapsed:?}"
        )),
    );
}

// ---------------------------------------------------------------- criterion 3

fn harvest_identifiers(server: &MockServer) -> Result<(Vec<String>, u32), String> {
    let endpoint = OaiEndpoint::local(server.base_url()).unwrap();
    let client = OaiClient::new(endpoint);
    let mut stream = client.list_records("oai_dc", None, None, None);
    let mut ids = Vec::new();
    for item in &mut stream {
        match item {
            Ok(rec) => ids.push(rec.header.identifier),
            Err(e) => return Err(format!("harvest error: {e}")),
        }
    }
    Ok((ids, stream.pages_fetched()))
}

#[test]
fn criterion_3_paging_oracle() {
    let started = Instant::now();
    let mut failures = Vec::new();

    // fixed case: 1,000 records at page size 25 → 40 pages
    let corpus = corpus_from_seed(42, 1000, &CorpusOptions::default());
    let server = MockServer::serve(corpus, FaultProfile::healthy(), 0).unwrap();
    let (ids, pages) = harvest_identifiers(&server).expect("healthy harvest");
    // oracle: the server's own manifest, fetched over the wire
    let manifest_body = ureq::get(&server.manifest_url())
        .timeout(Duration::from_secs(5))
        .call()
        .unwrap()
        .into_string()
        .unwrap();
    let manifest: discoverkit::mock::MockManifest = serde_json::from_str(&manifest_body).unwrap();
    check(
        ids.len() == 1000,
        &format!("{} records, expected 1000", ids.len()),
        &mut failures,
    );
    check(
        pages == 40,
        &format!("{pages} pages, expected 40"),
        &mut failures,
    );
    let unique: BTreeSet<&String> = ids.iter().collect();
    check(
        unique.len() == 1000,
        "identifiers not unique",
        &mut failures,
    );
    let mut sorted = ids.clone();
    sorted.sort();
    let mut expected = manifest.identifiers.clone();
    expected.sort();
    check(
        sorted == expected,
        "harvest multiset differs from manifest",
        &mut failures,
    );
    drop(server);

    // property: 50 seeded random (N, k) pairs
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for round in 0..50u64 {
        let n: usize = if round < 44 {
            rng.gen_range(0..=350)
        } else {
            rng.gen_range(500..=5000)
        };
        let k: usize = if round < 44 {
            rng.gen_range(1..=n.max(1))
        } else {
            // keep page counts bounded for the large corpora
            rng.gen_range((n / 60).max(1)..=n)
        };
        let options = CorpusOptions {
            page_size: k,
            ..Default::default()
        };
        let corpus = corpus_from_seed(9000 + round, n, &options);
        let mut expected = corpus.identifiers();
        expected.sort();
        let server = MockServer::serve(corpus, FaultProfile::healthy(), 0).unwrap();
        match harvest_identifiers(&server) {
            Ok((mut ids, _)) => {
                let unique = ids.iter().collect::<BTreeSet<_>>().len();
                check(
                    unique == n,
                    &format!("(N={n}, k={k}): {unique} unique ids"),
                    &mut failures,
                );
                ids.sort();
                check(
                    ids == expected,
                    &format!("(N={n}, k={k}): multiset mismatch"),
                    &mut failures,
                );
            }
            Err(e) => check(false, &format!("(N={n}, k={k}): {e}"), &mut failures),
        }
    }
    let elapsed = started.elapsed();
    check(
        elapsed < Duration::from_secs(30),
        &format!("took {elapsed:?}, budget 30 s"),
        &mut failures,
    );

    conclude(
        "criterion 3 (paging oracle)",
        verdict(
            failures,
            format!("1000/25 → 40 pages plus 50 random (N, k) pairs in {elapsed:?}"),
        ),
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_protocol_robustness_fuzz() {
    let mut failures = Vec::new();

    // seed bodies: real responses from a healthy mock, plus pathological ones
    let corpus = corpus_from_seed(
        4,
        6,
        &CorpusOptions {
            page_size: 3,
            ..Default::default()
        },
    );
    let server = MockServer::serve(corpus, FaultProfile::healthy(), 0).unwrap();
    let fetch = |query: &str| -> Vec<u8> {
        let url = format!("{}?{query}", server.base_url());
        let mut body = Vec::new();
        use std::io::Read;
        ureq::get(&url)
            .timeout(Duration::from_secs(5))
            .call()
            .unwrap()
            .into_reader()
            .read_to_end(&mut body)
            .unwrap();
        body
    };
    let mut seeds: Vec<Vec<u8>> = vec![
        fetch("verb=Identify"),
        fetch("verb=ListMetadataFormats"),
        fetch("verb=ListRecords&metadataPrefix=oai_dc"),
        fetch("verb=ListRecords&metadataPrefix=oai_dc&from=2030-01-01"),
        fetch("verb=GetRecord&metadataPrefix=oai_dc&identifier=missing"),
        b"<html><body>login</body></html>".to_vec(),
        b"<OAI-PMH xmlns=\"http://www.openarchives.org/OAI/2.0/\"><ListRecords><record>".to_vec(),
        b"".to_vec(),
        b"\xff\xfe\x00\x01garbage".to_vec(),
    ];
    drop(server);
    seeds.push(vec![b'<'; 512]);

    let verbs = [
        Verb::Identify,
        Verb::ListMetadataFormats,
        Verb::ListSets,
        Verb::ListRecords,
        Verb::ListIdentifiers,
        Verb::GetRecord,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let mut outcome_counts = [0usize; 3];
    for _ in 0..10_000 {
        let mut body = seeds[rng.gen_range(0..seeds.len())].clone();
        for _ in 0..rng.gen_range(0..8) {
            if body.is_empty() {
                break;
            }
            match rng.gen_range(0..5) {
                0 => {
                    let i = rng.gen_range(0..body.len());
                    body[i] = rng.gen();
                }
                1 => {
                    let cut = rng.gen_range(0..body.len());
                    body.truncate(cut);
                }
                2 => {
                    let i = rng.gen_range(0..=body.len());
                    let chunk: Vec<u8> = (0..rng.gen_range(1..16)).map(|_| rng.gen()).collect();
                    body.splice(i..i, chunk);
                }
                3 => {
                    let start = rng.gen_range(0..body.len());
                    let end = rng.gen_range(start..body.len());
                    let slice: Vec<u8> = body[start..end].to_vec();
                    let at = rng.gen_range(0..=body.len());
                    body.splice(at..at, slice);
                }
                _ => {
                    let start = rng.gen_range(0..body.len());
                    let end = rng.gen_range(start..body.len());
                    body.drain(start..end);
                }
            }
        }
        let verb = verbs[rng.gen_range(0..verbs.len())];
        match parse_response(&body, verb) {
            ParseOutcome::Parsed(_) => outcome_counts[0] += 1,
            ParseOutcome::ProtocolError(e) => {
                outcome_counts[1] += 1;
                check(
                    !e.code.name().is_empty(),
                    "protocol error without code",
                    &mut failures,
                );
            }
            ParseOutcome::Fault(f) => {
                outcome_counts[2] += 1;
                let canonical = matches!(
                    f.kind,
                    FaultKind::NotXml
                        | FaultKind::WrongNamespace
                        | FaultKind::VerbMismatch
                        | FaultKind::Truncated
                );
                check(
                    canonical,
                    &format!("non-canonical fault {:?}", f.kind),
                    &mut failures,
                );
            }
        }
    }
    let total: usize = outcome_counts.iter().sum();
    check(
        total == 10_000,
        "some inputs produced no outcome",
        &mut failures,
    );

    conclude(
        "criterion 4 (protocol robustness fuzz)",
        verdict(
            failures,
            format!(
                "10000 mutated inputs, zero crashes ({} parsed / {} protocol errors / {} faults)",
                outcome_counts[0], outcome_counts[1], outcome_counts[2]
            ),
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_rights_detection_precision_recall() {
    let mut failures = Vec::new();

    let planted: &[(&str, NormalizedLicense)] = &[
        (
            "This work is licensed under CC BY 4.0",
            NormalizedLicense::CcBy,
        ),
        (
            "License: https://creativecommons.org/licenses/by-nc/4.0/",
            NormalizedLicense::CcByNc,
        ),
        (
            "https://creativecommons.org/licenses/by-nc-sa/4.0/",
            NormalizedLicense::CcByNcSa,
        ),
        (
            "https://creativecommons.org/publicdomain/zero/1.0/",
            NormalizedLicense::Cc0,
        ),
        (
            "Distributed under the terms of a CC-BY-NC-ND license",
            NormalizedLicense::CcByNcNd,
        ),
        ("released as cc by-sa 3.0", NormalizedLicense::CcBySa),
        ("CC-BY-ND 4.0", NormalizedLicense::CcByNd),
        ("All rights reserved", NormalizedLicense::AllRightsReserved),
        (
            "Rights retained by the author",
            NormalizedLicense::RightsRetained,
        ),
        (
            "subject to the rights retention strategy",
            NormalizedLicense::RightsRetained,
        ),
        (
            "CC0 1.0 Universal public domain dedication",
            NormalizedLicense::Cc0,
        ),
        (
            "Creative Commons Attribution-ShareAlike applies",
            NormalizedLicense::CcBySa,
        ),
    ];
    // filler vocabulary is license-free by construction
    let filler = [
        "metadata",
        "repository",
        "harvest",
        "quarterly",
        "report",
        "issued",
        "during",
        "autumn",
        "review",
        "cycle",
        "collection",
        "deposit",
        "archive",
        "records",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phrase = |rng: &mut ChaCha8Rng, n: usize| -> String {
        (0..n)
            .map(|_| filler[rng.gen_range(0..filler.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut true_positives = 0usize;
    let mut false_negatives = 0usize;
    let mut false_positives = 0usize;
    for i in 0..200 {
        if i < 150 {
            let (pattern, expected) = planted[rng.gen_range(0..planted.len())];
            let lead = rng.gen_range(0..8);
            let tail = rng.gen_range(0..8);
            let snippet = format!(
                "{} {pattern} {}",
                phrase(&mut rng, lead),
                phrase(&mut rng, tail)
            );
            let matches = find_rights_statements(&snippet);
            let hit = matches.iter().any(|m| m.normalized_license == expected);
            if hit {
                true_positives += 1;
            } else {
                false_negatives += 1;
                check(
                    false,
                    &format!("missed {pattern:?} in {snippet:?}"),
                    &mut failures,
                );
            }
        } else {
            let words = rng.gen_range(4..16);
            let snippet = phrase(&mut rng, words);
            let matches = find_rights_statements(&snippet);
            if !matches.is_empty() {
                false_positives += 1;
                check(
                    false,
                    &format!(
                        "false positive in {snippet:?}: {:?}",
                        matches[0].matched_text
                    ),
                    &mut failures,
                );
            }
        }
    }
    let precision = true_positives as f64 / (true_positives + false_positives).max(1) as f64;
    let recall = true_positives as f64 / (true_positives + false_negatives).max(1) as f64;
    check(
        precision == 1.0,
        &format!("precision {precision}"),
        &mut failures,
    );
    check(recall == 1.0, &format!("recall {recall}"), &mut failures);

    conclude(
        "criterion 5 (rights detection)",
        verdict(
            failures,
            format!(
                "precision {precision:.2}, recall {recall:.2} over 150 planted + 50 clean snippets"
            ),
        ),
    );
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_compliance_monotonicity_and_determinism() {
    use discoverkit::compliance::{default_catalog, score_outcomes, CheckOutcome};
    let mut failures = Vec::new();

    let catalog = default_catalog();
    let ids: Vec<String> = catalog.all_checks().map(|(_, c)| c.id.clone()).collect();
    let choices = [CheckOutcome::Yes, CheckOutcome::No, CheckOutcome::Unknown];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut flips = 0usize;
    for _ in 0..1000 {
        let outcomes: BTreeMap<String, CheckOutcome> = ids
            .iter()
            .map(|id| (id.clone(), choices[rng.gen_range(0..3)]))
            .collect();
        let (scores, overall) = score_outcomes(catalog, &outcomes);
        for id in &ids {
            if outcomes[id] == CheckOutcome::Yes {
                continue;
            }
            let mut flipped = outcomes.clone();
            flipped.insert(id.clone(), CheckOutcome::Yes);
            let (new_scores, new_overall) = score_outcomes(catalog, &flipped);
            flips += 1;
            check(
                new_overall >= overall,
                &format!("overall dropped when {id} flipped to yes"),
                &mut failures,
            );
            for (cid, score) in &scores {
                check(
                    new_scores[cid] >= *score,
                    &format!("{cid} dropped when {id} flipped"),
                    &mut failures,
                );
            }
        }
    }

    // bit-stability: identical evidence twice, identical bytes out
    let profile = RepositoryProfile::new("det-repo", "Det University");
    let endpoint = OaiEndpoint::new("https://det.example/oai").unwrap();
    let diagnosis = {
        use discoverkit::diagnostics::{ProbeOutcome, ProbeResult, DIAGNOSIS_SCHEMA, PROBE_ORDER};
        discoverkit::diagnostics::DiagnosisReport {
            schema: DIAGNOSIS_SCHEMA.to_string(),
            repository_id: Some("det-repo".into()),
            endpoint,
            probes: PROBE_ORDER
                .iter()
                .map(|p| ProbeResult {
                    probe: *p,
                    outcome: ProbeOutcome::Pass,
                    detail: "ok".into(),
                    latency_ms: 3,
                    fault: None,
                })
                .collect(),
            status: EndpointStatus::Functional,
            fulltext_link_fraction: 0.8,
            little_fulltext_threshold: 0.25,
            recommendations: vec![],
            generated_at: UtcInstant(1_700_000_000),
        }
    };
    let records = corpus_from_seed(66, 40, &CorpusOptions::default())
        .records()
        .to_vec();
    let quality = discoverkit::quality::score_records("det-repo", &records).unwrap();
    let mut declarations = BTreeMap::new();
    declarations.insert(
        "accessibility-statement".to_string(),
        discoverkit::compliance::Declaration {
            value: true,
            evidence: "published".into(),
        },
    );
    let at = UtcInstant(1_700_000_123);
    let run = || {
        discoverkit::compliance::evaluate_at(
            catalog,
            &profile,
            &diagnosis,
            &quality,
            &declarations,
            at,
        )
        .unwrap()
    };
    let a = serde_json::to_vec(&run()).unwrap();
    let b = serde_json::to_vec(&run()).unwrap();
    check(a == b, "evaluate output is not bit-stable", &mut failures);

    conclude(
        "criterion 6 (compliance monotonicity and determinism)",
        verdict(
            failures,
            format!("{flips} monotone flips over 1000 random outcome vectors; evaluate bit-stable"),
        ),
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_anonymization() {
    let mut failures = Vec::new();
    let profiles = table1_profiles();
    let period = table1_period();
    let (t0, t1) = (period.start.instant, period.end.instant);
    let fleet = {
        let records: Vec<_> = profiles
            .iter()
            .map(|p| growth(p, t0, t1).unwrap())
            .collect();
        fleet_totals(&records).unwrap()
    };

    for group_by in [
        GroupBy::default(),
        GroupBy {
            visibility: true,
            carnegie: false,
        },
        GroupBy {
            visibility: false,
            carnegie: true,
        },
        GroupBy {
            visibility: true,
            carnegie: true,
        },
    ] {
        let reports = anonymized_report(profiles, t0, t1, group_by, 3);
        let serialized = serde_json::to_string(&reports).unwrap();
        for p in profiles {
            check(
                !serialized.contains(&p.institution),
                &format!("output leaks institution {:?}", p.institution),
                &mut failures,
            );
            check(
                !serialized.contains(&p.id),
                &format!("output leaks id {:?}", p.id),
                &mut failures,
            );
        }
        // conservation: unsuppressed output totals plus suppressed-group
        // remainders (recomputed internally) equal the fleet totals exactly
        let raw = group_growth(profiles, t0, t1, group_by);
        let mut start_sum = 0u64;
        let mut end_sum = 0u64;
        for (report, group) in reports.iter().zip(&raw) {
            check(
                report.group == group.key,
                "group ordering mismatch",
                &mut failures,
            );
            let totals = fleet_totals(&group.records).unwrap();
            check(
                report.suppressed == (group.records.len() < 3),
                &format!("suppression flag wrong for {}", report.group_label),
                &mut failures,
            );
            if report.suppressed {
                check(
                    report.total_start.is_none()
                        && report.total_end.is_none()
                        && report.percent_growth.is_none(),
                    &format!("suppressed group {} exposes totals", report.group_label),
                    &mut failures,
                );
                start_sum += totals.total_start;
                end_sum += totals.total_end;
            } else {
                check(
                    report.total_start == Some(totals.total_start),
                    "unsuppressed start total mismatch",
                    &mut failures,
                );
                check(
                    report.total_end == Some(totals.total_end),
                    "unsuppressed end total mismatch",
                    &mut failures,
                );
                start_sum += report.total_start.unwrap();
                end_sum += report.total_end.unwrap();
            }
        }
        check(
            start_sum == fleet.total_start,
            &format!("start conservation broken: {start_sum}"),
            &mut failures,
        );
        check(
            end_sum == fleet.total_end,
            &format!("end conservation broken: {end_sum}"),
            &mut failures,
        );
    }

    conclude(
        "criterion 7 (anonymization)",
        verdict(
            failures,
            "no identifying substrings in any grouping; group totals conserve fleet totals exactly"
                .to_string(),
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

/// Independent full-matrix edit distance for the oracle.
fn oracle_levenshtein(a: &[char], b: &[char]) -> usize {
    let mut matrix = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in matrix.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in matrix[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            matrix[i][j] = (matrix[i - 1][j] + 1)
                .min(matrix[i][j - 1] + 1)
                .min(matrix[i - 1][j - 1] + cost);
        }
    }
    matrix[a.len()][b.len()]
}

struct Oracle {
    dois: BTreeMap<String, String>,
    titles: Vec<(String, String)>, // (record id, normalized title)
}

impl Oracle {
    fn build(records: &[discoverkit::oai::DublinCoreRecord]) -> Oracle {
        use discoverkit::oai::DcElement;
        let mut dois: BTreeMap<String, String> = BTreeMap::new();
        let mut titles = Vec::new();
        for rec in records.iter().filter(|r| !r.header.deleted) {
            let id = rec.header.identifier.clone();
            for value in rec.values(DcElement::Identifier) {
                let v = value.trim().to_ascii_lowercase();
                if v.starts_with("10.") && v.contains('/') {
                    dois.entry(v)
                        .and_modify(|e| {
                            if id < *e {
                                *e = id.clone();
                            }
                        })
                        .or_insert_with(|| id.clone());
                }
            }
            for value in rec.values(DcElement::Title) {
                let norm = normalize_title(value);
                if !norm.is_empty() {
                    titles.push((id.clone(), norm));
                }
            }
        }
        titles.sort();
        titles.dedup();
        Oracle { dois, titles }
    }

    fn match_one(
        &self,
        work: &discoverkit::freshfinds::ExternalWork,
        threshold: f64,
    ) -> (MatchMethod, Option<String>) {
        if let Some(doi) = &work.doi {
            if let Some(id) = self.dois.get(doi) {
                return (MatchMethod::DoiExact, Some(id.clone()));
            }
        }
        let norm = normalize_title(&work.title);
        if norm.is_empty() {
            return (MatchMethod::None, None);
        }
        let exact: Vec<&String> = self
            .titles
            .iter()
            .filter(|(_, t)| *t == norm)
            .map(|(id, _)| id)
            .collect();
        if let Some(id) = exact.into_iter().min() {
            return (MatchMethod::TitleExactNormalized, Some(id.clone()));
        }
        let query: Vec<char> = norm.chars().collect();
        let mut best: Option<(f64, &String)> = None;
        for (id, title) in &self.titles {
            let cand: Vec<char> = title.chars().collect();
            let max = query.len().max(cand.len());
            // sound pruning: distance is at least the length difference
            if max == 0 || (query.len().abs_diff(cand.len()) as f64 / max as f64) > 1.0 - threshold
            {
                continue;
            }
            let sim = 1.0 - oracle_levenshtein(&query, &cand) as f64 / max as f64;
            if sim < threshold {
                continue;
            }
            let better = match &best {
                None => true,
                Some((bs, bid)) => sim > *bs || (sim == *bs && id < *bid),
            };
            if better {
                best = Some((sim, id));
            }
        }
        match best {
            Some((_, id)) => (MatchMethod::TitleFuzzy, Some(id.clone())),
            None => (MatchMethod::None, None),
        }
    }
}

#[test]
fn criterion_8_fresh_finds_oracle_equivalence() {
    use discoverkit::freshfinds::ExternalWork;
    use discoverkit::oai::DcElement;
    let mut failures = Vec::new();
    let threshold = 0.93;

    let corpus = corpus_from_seed(8, 600, &CorpusOptions::default());
    let holdings = corpus.records().to_vec();
    let index = HoldingsIndex::build(&holdings);
    let oracle = Oracle::build(&holdings);

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let published = discoverkit::datestamp::Datestamp::parse("2024-06-15").unwrap();
    let doi_bearing: Vec<&discoverkit::oai::DublinCoreRecord> = holdings
        .iter()
        .filter(|r| {
            r.values(DcElement::Identifier)
                .iter()
                .any(|v| v.starts_with("10."))
        })
        .collect();

    let novel_words = [
        "zephyr",
        "quorum",
        "obsidian",
        "katabatic",
        "brume",
        "വാക്ക്",
        "midden",
    ];
    let mut works: Vec<ExternalWork> = Vec::new();
    for i in 0..1000usize {
        let work = match i % 4 {
            // exact DOI copy with an unrelated title
            0 => {
                let rec = doi_bearing[rng.gen_range(0..doi_bearing.len())];
                let doi = rec
                    .values(DcElement::Identifier)
                    .iter()
                    .find(|v| v.starts_with("10."))
                    .unwrap()
                    .to_lowercase();
                ExternalWork {
                    doi: Some(doi),
                    title: format!("unrelated {} {}", novel_words[i % novel_words.len()], i),
                    authors: vec![],
                    published,
                    source: "oracle-fixture".into(),
                }
            }
            // case/punctuation variant of a held title
            1 => {
                let rec = &holdings[rng.gen_range(0..holdings.len())];
                let title = rec
                    .values(DcElement::Title)
                    .first()
                    .cloned()
                    .unwrap_or_default();
                ExternalWork {
                    doi: None,
                    title: format!("The {}!", title.to_uppercase().replace(' ', "  ")),
                    authors: vec![],
                    published,
                    source: "oracle-fixture".into(),
                }
            }
            // typo'd title: may or may not clear the threshold — the oracle decides
            2 => {
                let rec = &holdings[rng.gen_range(0..holdings.len())];
                let title = rec
                    .values(DcElement::Title)
                    .first()
                    .cloned()
                    .unwrap_or_default();
                let mut chars: Vec<char> = title.chars().collect();
                for _ in 0..rng.gen_range(1..=2) {
                    if chars.is_empty() {
                        break;
                    }
                    let at = rng.gen_range(0..chars.len());
                    match rng.gen_range(0..3) {
                        0 => chars[at] = 'q',
                        1 => {
                            chars.remove(at);
                        }
                        _ => chars.insert(at, 'x'),
                    }
                }
                ExternalWork {
                    doi: None,
                    title: chars.into_iter().collect(),
                    authors: vec![],
                    published,
                    source: "oracle-fixture".into(),
                }
            }
            // novel work, sometimes with a DOI the repository has never seen
            _ => ExternalWork {
                doi: (rng.gen_bool(0.3)).then(|| format!("10.9999/none.{i}")),
                title: (0..rng.gen_range(3..7))
                    .map(|_| novel_words[rng.gen_range(0..novel_words.len())])
                    .collect::<Vec<_>>()
                    .join(" "),
                authors: vec![],
                published,
                source: "oracle-fixture".into(),
            },
        };
        works.push(work);
    }

    let results = match_all(&works, &index, threshold);
    let mut by_method = BTreeMap::new();
    for (work, result) in works.iter().zip(&results) {
        let (expected_method, expected_record) = oracle.match_one(work, threshold);
        check(
            result.method == expected_method && result.matched_record == expected_record,
            &format!(
                "work {:?} (doi {:?}): impl ({:?}, {:?}) vs oracle ({:?}, {:?})",
                work.title,
                work.doi,
                result.method,
                result.matched_record,
                expected_method,
                expected_record
            ),
            &mut failures,
        );
        *by_method
            .entry(format!("{:?}", result.method))
            .or_insert(0usize) += 1;
    }

    // conservation on 100 random feeds
    for round in 0..100u64 {
        let mut feed_rng = ChaCha8Rng::seed_from_u64(7000 + round);
        let len = feed_rng.gen_range(0..=60);
        let feed: Vec<ExternalWork> = (0..len)
            .map(|_| works[feed_rng.gen_range(0..works.len())].clone())
            .collect();
        let report = gap_report_at(&feed, &index, "oracle-repo", threshold, UtcInstant(0));
        check(
            report.checked == report.matched + report.missing.len(),
            &format!("conservation broken on feed {round}"),
            &mut failures,
        );
        check(
            report.checked == feed.len(),
            "checked != feed length",
            &mut failures,
        );
    }

    conclude(
        "criterion 8 (fresh finds oracle equivalence)",
        verdict(failures, format!("1000 works match the brute-force oracle exactly ({by_method:?}); conservation holds on 100 random feeds")),
    );
}
