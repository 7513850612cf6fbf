//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach the terminal.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num::{BigInt, One};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ultramono::corpus::{random_nested_levels, shrinking_family, tame_sequence};
use ultramono::monotone::{classify, extract, peaks, term, DEFAULT_SEARCH_BOUND};
use ultramono::rational::{int, ratio};
use ultramono::saturation::{cantor_intersection, saturation_witness, NestedFamily, SymbolicInterval};
use ultramono::ultrapower::default_eps;
use ultramono::{
    Case, Decision, Direction, ExactSet, Hyper, IndexSet, OracleState, Rational, SaturationError,
    SequenceExpr, SharedOracle,
};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn corpus() -> Vec<SequenceExpr> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    (0..1000).map(|_| tame_sequence(&mut rng, 3)).collect()
}

fn expected_direction(case: Case) -> Direction {
    match case {
        Case::ConstantCase => Direction::Constant,
        Case::IncreasingCase => Direction::StrictlyIncreasing,
        Case::DecreasingCase => Direction::StrictlyDecreasing,
    }
}

fn monotone_suite(seqs: &[SequenceExpr]) -> Outcome {
    let started = Instant::now();
    let mut cases = BTreeMap::new();
    for seq in seqs {
        let oracle = SharedOracle::fresh();
        let tri = classify(seq, &oracle).map_err(|e| format!("classify {seq}: {e}"))?;
        let ex = extract(&tri, 100, DEFAULT_SEARCH_BOUND).map_err(|e| format!("extract {seq}: {e}"))?;
        check(ex.indices.len() == 100 && ex.is_valid(), || format!("{seq}: invalid extraction"))?;
        check(ex.direction == expected_direction(tri.case), || format!("{seq}: direction mismatch"))?;
        for (n, v) in ex.indices.iter().zip(&ex.values) {
            check(term(seq, *n) == *v, || format!("{seq}: value at {n} differs from eval"))?;
        }
        *cases.entry(format!("{:?}", tri.case)).or_insert(0) += 1;
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{} sequences, cases {cases:?}, {:.1?}", seqs.len(), elapsed))
}

fn trichotomy_suite(seqs: &[SequenceExpr]) -> Outcome {
    for seq in seqs {
        let oracle = SharedOracle::fresh();
        let tri = classify(seq, &oracle).map_err(|e| format!("classify {seq}: {e}"))?;
        let m = tri.measures().map_err(|e| e.to_string())?;
        check(m.iter().filter(|&&x| x == 1).count() == 1, || format!("{seq}: measures {m:?}"))?;
        for n in 0..1000 {
            let hits = [&tri.below, &tri.equal, &tri.above]
                .iter()
                .filter(|s| s.contains(n).unwrap_or(false))
                .count();
            check(hits == 1, || format!("{seq}: index {n} in {hits} parts"))?;
        }
    }
    Ok(format!("{} sequences, partition of 0..1000 checked", seqs.len()))
}

fn residue_set(m: u64, mask: u32) -> ExactSet {
    ExactSet::periodic(m, (0..m).filter(|r| mask >> r & 1 == 1))
}

fn ultrafilter_suite() -> Outcome {
    let mut checks = 0u64;
    for r12 in 0..12 {
        let mut o = OracleState::default();
        o.force_residue(12, r12).map_err(|e| e.to_string())?;
        let mu = |o: &mut OracleState, s: &ExactSet| o.measure(&IndexSet::Exact(s.clone())).unwrap();
        for m in 1..=12u64 {
            // Disjoint pairs (A, B) of residue sets mod m: each residue goes
            // to A, to B, or to neither.
            let pairs = 3u64.pow(m as u32);
            for code in 0..pairs {
                let (mut a, mut b, mut c) = (0u32, 0u32, code);
                for r in 0..m {
                    match c % 3 {
                        1 => a |= 1 << r,
                        2 => b |= 1 << r,
                        _ => {}
                    }
                    c /= 3;
                }
                let (sa, sb) = (residue_set(m, a), residue_set(m, b));
                let union = sa.union(&sb);
                let (ma, mb, mu_union) = (mu(&mut o, &sa), mu(&mut o, &sb), mu(&mut o, &union));
                check(mu_union == ma + mb, || format!("r12={r12}: μ({union}) != μ({sa}) + μ({sb})"))?;
                checks += 1;
            }
            for mask in 0..1u32 << m {
                let s = residue_set(m, mask);
                let total = mu(&mut o, &s) + mu(&mut o, &s.complement());
                check(total == 1, || format!("r12={r12}: μ({s}) + μ(complement) = {total}"))?;
                // Finite changes do not move the measure.
                let f = ExactSet::finite([0, 5, 11]);
                let moved = s.union(&f).intersect(&ExactSet::cofinite_except([3, 7]));
                check(mu(&mut o, &moved) == mu(&mut o, &s), || format!("r12={r12}: {s} vs {moved}"))?;
                checks += 2;
            }
            for (d, rd) in o.tower().clone() {
                if d <= 12 && 12 % d == 0 {
                    check(rd == r12 % d, || format!("r12={r12}: r_{d} = {rd}"))?;
                }
            }
        }
        for mask in 0..1u32 << 12 {
            let finite = ExactSet::finite((0..12).filter(|k| mask >> k & 1 == 1));
            check(mu(&mut o, &finite) == 0, || format!("μ({finite}) != 0"))?;
            check(mu(&mut o, &finite.complement()) == 1, || format!("μ(!{finite}) != 1"))?;
            checks += 2;
        }
        o.verify().map_err(|e| e.to_string())?;
    }
    Ok(format!("{checks} checks over 12 residue towers"))
}

fn field_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let oracle = SharedOracle::fresh();
    let pool: Vec<Hyper> = (0..300).map(|_| Hyper::new(tame_sequence(&mut rng, 2), &oracle)).collect();
    let zero = Hyper::standard(int(0), &oracle);
    let err = |e: ultramono::UltraError| e.to_string();
    let mut counts = [0u32; 4];
    let mut zero_scale = 0;
    let mut done = 0;
    while done < 10_000 {
        let u = &pool[rng.gen_range(0..pool.len())];
        let v = &pool[rng.gen_range(0..pool.len())];
        let w = &pool[rng.gen_range(0..pool.len())];
        let uv = u.compare(v).map_err(err)?;
        match done % 4 {
            0 => {
                let vu = v.compare(u).map_err(err)?;
                let diff = u.sub(v).map_err(err)?.signum().map_err(err)?;
                check(vu == uv.reverse() && diff == uv, || format!("trichotomy {u} {v}"))?;
            }
            1 => {
                let vw = v.compare(w).map_err(err)?;
                if uv != Ordering::Greater && vw != Ordering::Greater {
                    let uw = u.compare(w).map_err(err)?;
                    let strict = uv == Ordering::Less || vw == Ordering::Less;
                    let ok = if strict { uw == Ordering::Less } else { uw == Ordering::Equal };
                    check(ok, || format!("transitivity {u} {v} {w}"))?;
                }
            }
            2 => {
                let shifted = u.add(w).map_err(err)?.compare(&v.add(w).map_err(err)?).map_err(err)?;
                check(shifted == uv, || format!("translation {u} {v} {w}"))?;
            }
            _ => {
                let positive = if w.compare(&zero).map_err(err)? == Ordering::Less { w.neg() } else { w.clone() };
                if positive.compare(&zero).map_err(err)? == Ordering::Greater {
                    let scaled = u
                        .mul(&positive)
                        .map_err(err)?
                        .compare(&v.mul(&positive).map_err(err)?)
                        .map_err(err)?;
                    check(scaled == uv, || format!("scaling {u} {v} {positive}"))?;
                } else {
                    zero_scale += 1;
                }
            }
        }
        counts[done % 4] += 1;
        done += 1;
    }
    oracle.lock().verify().map_err(|e| e.to_string())?;
    Ok(format!(
        "10000 checks (trichotomy {}, transitivity {}, translation {}, scaling {} incl. {} with w = 0)",
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        zero_scale
    ))
}

fn infinitesimal_suite() -> Outcome {
    let oracle = SharedOracle::fresh();
    let n = SequenceExpr::index;
    let c = SequenceExpr::int;
    let u = Hyper::new(c(1) / (n() + c(1)), &oracle);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let tiny = Rational::new(BigInt::one(), BigInt::from(10).pow(18));
    let mut qs = vec![tiny.clone()];
    while qs.len() < 100 {
        let exp: u32 = rng.gen_range(0..=18);
        let mantissa: i64 = rng.gen_range(1..=999);
        qs.push(Rational::new(BigInt::from(mantissa), BigInt::from(10).pow(exp)));
    }
    let min = qs.iter().min().cloned().expect("nonempty");
    check(min == tiny, || "smallest q is not 1e-18".into())?;
    for q in &qs {
        check(u.compare_standard(&int(0)) == Ok(Ordering::Greater), || "u <= 0".into())?;
        check(u.compare_standard(q) == Ok(Ordering::Less), || format!("u >= {q}"))?;
    }
    let one_plus = Hyper::new(c(1) + c(1) / (n() + c(1)), &oracle).standard_part(&default_eps());
    check(one_plus.as_ref().is_ok_and(|p| p.exact && p.value == int(1)), || format!("st(1+u) = {one_plus:?}"))?;
    let e = (c(2) * n().pow(2) + c(1)) / (n().pow(2) + c(3));
    let two = Hyper::new(e, &oracle).standard_part(&default_eps());
    check(two.as_ref().is_ok_and(|p| p.exact && p.value == int(2)), || format!("st(...) = {two:?}"))?;
    Ok("0 < u < q for 100 q (min 1e-18); st(1+u) = 1 and st((2n²+1)/(n²+3)) = 2 exactly".into())
}

/// The image of a periodic set under `n ↦ n + 1`'s inverse, which swaps
/// evens and odds.
fn shift_by_one(s: &IndexSet) -> Option<IndexSet> {
    let e = s.as_exact()?;
    if e.exceptions().next().is_some() {
        return None;
    }
    let m = e.modulus();
    Some(IndexSet::Exact(ExactSet::periodic(m, (0..m).filter(|&r| e.has_residue((r + 1) % m)))))
}

fn branch_suite() -> Outcome {
    let alt = SequenceExpr::periodic(vec![int(1), int(-1)]);
    let mut ledgers: Vec<(BTreeMap<u64, u64>, Vec<Decision>)> = Vec::new();
    for (r, expected) in [(0, ExactSet::periodic(2, [0])), (1, ExactSet::periodic(2, [1]))] {
        let oracle = SharedOracle::fresh();
        oracle.force_residue(2, r).map_err(|e| e.to_string())?;
        let tri = classify(&alt, &oracle).map_err(|e| e.to_string())?;
        tri.measures().map_err(|e| e.to_string())?;
        check(tri.case == Case::ConstantCase, || format!("r_2={r}: case {:?}", tri.case))?;
        check(tri.equal.as_exact() == Some(&expected), || format!("r_2={r}: B = {}", tri.equal))?;
        let state = oracle.snapshot();
        ledgers.push((state.tower().clone(), state.ledger().to_vec()));
    }
    let (t0, l0) = &ledgers[0];
    let (t1, l1) = &ledgers[1];
    check(t0.len() == 1 && t1.len() == 1 && t0.get(&2) == Some(&0) && t1.get(&2) == Some(&1), || {
        format!("towers {t0:?} / {t1:?}")
    })?;
    // Relabelling evens and odds maps one ledger onto the other.
    let key = |d: &Decision, s: &IndexSet| (s.label(), d.verdict, format!("{:?}", d.reason));
    let mut image: Vec<_> = l0
        .iter()
        .map(|d| shift_by_one(&d.set).map(|s| key(d, &s)))
        .collect::<Option<_>>()
        .ok_or("ledger holds a set with exceptions")?;
    let mut other: Vec<_> = l1.iter().map(|d| key(d, &d.set)).collect();
    image.sort();
    other.sort();
    check(image == other, || format!("ledgers differ beyond the residue: {image:?} vs {other:?}"))?;
    Ok(format!("B = evens / odds; {} decisions each, equal up to swapping r_2", l0.len()))
}

fn brute_peaks(values: &[Rational]) -> (Vec<usize>, Direction) {
    let n = values.len();
    let peaks: Vec<usize> = (0..n).filter(|&i| (i + 1..n).all(|j| values[i] > values[j])).collect();
    if peaks.len() >= 2 {
        return (peaks, Direction::StrictlyDecreasing);
    }
    let mut chain = vec![0];
    let mut i = 0;
    loop {
        match (i + 1..n).find(|&j| values[j] > values[i]) {
            Some(j) => {
                chain.push(j);
                i = j;
            }
            None => return (chain, Direction::StrictlyIncreasing),
        }
    }
}

fn newman_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut decreasing = 0;
    for k in 0..200 {
        let seq = if k % 2 == 0 {
            tame_sequence(&mut rng, 3)
        } else {
            SequenceExpr::rand(rng.gen(), int(-10), int(10)) + tame_sequence(&mut rng, 1)
        };
        let values: Vec<Rational> = (0..200).map(|n| term(&seq, n)).collect();
        let ex = peaks(&seq, 200).map_err(|e| e.to_string())?;
        check(ex.is_valid(), || format!("{seq}: peaks not monotone"))?;
        let (indices, direction) = brute_peaks(&values);
        let indices: Vec<u64> = indices.into_iter().map(|i| i as u64).collect();
        check(ex.indices == indices && ex.direction == direction, || format!("{seq}: disagrees with brute force"))?;
        if direction == Direction::StrictlyDecreasing {
            decreasing += 1;
        }
    }
    Ok(format!("200 sequences x 200 terms agree with brute force ({decreasing} peak runs)"))
}

fn cantor_suite() -> Outcome {
    let oracle = SharedOracle::fresh();
    let n = SequenceExpr::index;
    let c = SequenceExpr::int;
    let third = || SequenceExpr::constant(ratio(1, 3));
    let eps = default_eps();
    let k0 = NestedFamily::symbolic(vec![SymbolicInterval::new(c(0), c(1) / (n() + c(1)))], 64);
    let p0 = cantor_intersection(&k0, &oracle, &eps).map_err(|e| e.to_string())?;
    check(p0.exact && p0.value == int(0), || format!("[0, 1/(n+1)] gave {p0:?}"))?;
    let k1 = NestedFamily::symbolic(
        vec![SymbolicInterval::new(third() - c(1) / (n() + c(1)), third() + c(1) / (n() + c(1)))],
        64,
    );
    let p1 = cantor_intersection(&k1, &oracle, &eps).map_err(|e| e.to_string())?;
    check(p1.exact && p1.value == ratio(1, 3), || format!("1/3 family gave {p1:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    for k in 0..200 {
        let fam = if k % 2 == 0 { shrinking_family(&mut rng, 64) } else { random_nested_levels(&mut rng, 64) };
        let o = SharedOracle::fresh();
        let p = cantor_intersection(&fam, &o, &eps).map_err(|e| format!("family {k}: {e}"))?;
        for level in 0..64 {
            let set = fam.level(level).map_err(|e| e.to_string())?;
            let inside = if p.exact { set.contains(&p.value) } else { set.contains_within(&p.value, &eps) };
            check(inside, || format!("family {k}: {} outside level {level}", p.value))?;
        }
    }

    let unbounded = NestedFamily::symbolic(vec![SymbolicInterval { lo: Some(n()), hi: None }], 64);
    let w = saturation_witness(&unbounded, &oracle).map_err(|e| e.to_string())?;
    check(w.levels.iter().all(|l| l.verdict == 1), || "unbounded witness misses a level".into())?;
    let refused = cantor_intersection(&unbounded, &oracle, &eps);
    check(refused == Err(SaturationError::NotBounded), || format!("unbounded family gave {refused:?}"))?;
    Ok("0 and 1/3 exact; 200 random families contain their point at all 64 levels; [n, inf) is NotBounded with witness n".into())
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ultramono"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn reproducibility_suite(dir: &Path) -> Outcome {
    let session: Vec<Vec<&str>> = vec![
        vec!["classify", "--seq", "per[1,-1] * (1 + 1/(n+1))"],
        vec!["extract", "--seq", "ifmod(3,1; n; -n) / (n+2)", "--count", "10"],
        vec!["measure", "--set", "mod(12,{0,5,7}) | finite{1}"],
        vec!["compare", "--seq", "per[2,0,1]", "--seq", "1/(n+1)"],
        vec!["st", "--seq", "per[1,-1] + 1/(n+1)"],
        vec!["prop-decreasing", "--seq", "per[2,1] * (1 + 1/(n+1))", "--count", "5"],
        vec!["cantor", "--family", "[0, 1/(n+2)] u [1, 1 + 1/(n+2)]", "--depth", "16"],
        vec!["saturate", "--family", "[1/3 - 1/(n+1), 1/3 + 1/(n+1)]", "--depth", "8"],
        vec!["compare", "--seq", "rand(9, 0, 1) + 5", "--seq", "3"],
    ];
    let state = |i: usize| dir.join(format!("state{i}.json"));
    let path_str = |p: &Path| p.to_string_lossy().into_owned();
    let mut outputs = Vec::new();
    for (i, cmd) in session.iter().enumerate() {
        let mut args: Vec<String> = cmd.iter().map(|s| s.to_string()).collect();
        args.push("--json".into());
        if i > 0 {
            args.extend(["--oracle-state".into(), path_str(&state(i - 1))]);
        }
        args.extend(["--save-oracle".into(), path_str(&state(i))]);
        args.extend(["--trace".into(), path_str(&dir.join(format!("trace{i}.jsonl")))]);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        outputs.push(cli(&refs)?);
    }
    // Replaying each command against the state it saved gives the same bytes.
    for (i, cmd) in session.iter().enumerate() {
        let saved = path_str(&state(i));
        let again = path_str(&dir.join(format!("again{i}.json")));
        let mut args: Vec<&str> = cmd.clone();
        args.extend(["--json", "--oracle-state", &saved, "--save-oracle", &again]);
        let out = cli(&args)?;
        check(out == outputs[i], || format!("command {i}: output differs on replay"))?;
        let (a, b) = (std::fs::read(&saved).map_err(|e| e.to_string())?, std::fs::read(&again).map_err(|e| e.to_string())?);
        check(a == b, || format!("command {i}: saved state differs on replay"))?;
        let restored: OracleState = serde_json::from_slice(&a).map_err(|e| e.to_string())?;
        check(serde_json::to_vec(&restored).map_err(|e| e.to_string())? == a, || format!("state {i} does not round trip"))?;
    }
    // Re-running the whole session from scratch reproduces every output.
    for (i, cmd) in session.iter().enumerate() {
        let mut args: Vec<String> = cmd.iter().map(|s| s.to_string()).collect();
        args.push("--json".into());
        let fresh = dir.join(format!("fresh{i}.json"));
        if i > 0 {
            args.extend(["--oracle-state".into(), path_str(&dir.join(format!("fresh{}.json", i - 1)))]);
        }
        args.extend(["--save-oracle".into(), path_str(&fresh)]);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        check(cli(&refs)? == outputs[i], || format!("command {i}: fresh session differs"))?;
    }
    // Each trace replays against the state the command started from.
    for i in 0..session.len() {
        let trace = path_str(&dir.join(format!("trace{i}.jsonl")));
        let mut args = vec!["trace-replay", "--trace", &trace];
        let before;
        if i > 0 {
            before = path_str(&state(i - 1));
            args.extend(["--oracle-state", &before]);
        }
        cli(&args)?;
    }
    Ok(format!("{} commands: outputs, saved states and ledger digests byte-identical on replay", session.len()))
}

fn main() {
    let seqs = corpus();
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("monotone subsequences", Box::new(|| monotone_suite(&seqs))),
        ("trichotomy exclusivity", Box::new(|| trichotomy_suite(&seqs))),
        ("ultrafilter algebra", Box::new(ultrafilter_suite)),
        ("ordered-field laws", Box::new(field_suite)),
        ("infinitesimals", Box::new(infinitesimal_suite)),
        ("branch demonstration", Box::new(branch_suite)),
        ("peak cross-check", Box::new(newman_suite)),
        ("Cantor intersections", Box::new(cantor_suite)),
        ("reproducibility", Box::new(|| reproducibility_suite(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {}. {name} ({secs:.1}s): {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {}. {name} ({secs:.1}s): {reason}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
