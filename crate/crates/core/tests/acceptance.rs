//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{central_diff, mc_kl, random_rotation, rel_err, rng, uniform};
use rand::Rng;
use sinc_core::compose::{compose_strict, ComposeError, LabeledMotion, Source};
use sinc_core::geometry::{matrix_to_rot6d, rot6d_to_matrix, Rot6D, RotMatrix};
use sinc_core::losses::*;
use sinc_core::metrics::{ape, ave, temos_score, JointTrajectory, Variant};
use sinc_core::motion::{canonicalize, MotionSequence, Pose};
use sinc_core::partlab::{
    build_prompt, label_accuracy, parse_response, BodyPart, LookupTable, Mark, PartAnnotation, PartSet,
    PromptKind, Slot,
};
use sinc_core::pipeline::toy::{self, ToyConfig};
use sinc_core::pipeline::*;
use sinc_core::textaug::{compose_description, inflect_gerund, test_description, ConjunctionTable};

use BodyPart::*;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("rotation round trip and Gram-Schmidt", rotation_suite),
        ("composition partition vs brute-force oracle", composition_partition),
        ("response parser fixtures", parser_fixtures),
        ("accuracy scorer on hand-scored fixture", accuracy_scorer),
        ("loss suite: Monte-Carlo KL, gradients, re-summation", loss_suite),
        ("metric zero/offset laws", metric_laws),
        ("few-shot prompt byte reproduction", prompt_golden),
        ("pipeline determinism and filtering", pipeline_determinism),
        ("text augmentation coverage", text_augmentation),
        ("end-to-end offline smoke", end_to_end),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({detail})", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

fn rotation_suite() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst_trip = 0.0f64;
    let mut worst_ortho = 0.0f64;
    for _ in 0..1000 {
        let m = random_rotation(&mut r);
        let flat: [f64; 9] = std::array::from_fn(|k| m[k / 3][k % 3]);
        let rot = RotMatrix::from_row_major(flat);
        let back = rot6d_to_matrix(&matrix_to_rot6d(&rot).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let diff = back.to_row_major().iter().zip(&flat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_trip = worst_trip.max(diff);

        let six = matrix_to_rot6d(&rot).unwrap();
        let noisy = Rot6D(std::array::from_fn(|k| six.0[k] + r.random_range(-0.1..=0.1)));
        let g = rot6d_to_matrix(&noisy).map_err(|e| e.to_string())?;
        worst_ortho = worst_ortho.max(g.orthonormality_error()).max((g.0.determinant() - 1.0).abs());
    }
    let elapsed = start.elapsed();
    ensure(worst_trip <= 1e-9, || format!("round trip error {worst_trip:e}"))?;
    ensure(worst_ortho <= 1e-9, || format!("orthonormality error {worst_ortho:e}"))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("max trip {worst_trip:.1e}, max ortho {worst_ortho:.1e}, {elapsed:.2?}"))
}

const ORACLE_OWNER: [BodyPart; 22] = [
    GlobalOrientation, LeftLeg, RightLeg, Torso, LeftLeg, RightLeg, Torso, LeftLeg, RightLeg, Torso, LeftLeg,
    RightLeg, Torso, LeftArm, RightArm, Torso, LeftArm, RightArm, LeftArm, RightArm, LeftArm, RightArm,
];

fn marker_motion(id: &str, len: usize, scale: f64) -> MotionSequence {
    let frames = (0..len)
        .map(|f| {
            let mut p = Pose::identity();
            for j in 0..22 {
                let angle = scale * (0.05 * j as f64 + 0.01 * f as f64);
                let m = RotMatrix::about_z(angle) * RotMatrix::from_row_major(flip(scale));
                p.rotations[j] = matrix_to_rot6d(&m).unwrap();
            }
            p.translation = [scale * 0.02 * f as f64, 0.5 * scale, 0.9];
            p
        })
        .collect();
    MotionSequence::new(id, 30.0, frames).unwrap()
}

/// A fixed half-turn about x for one of the two sources, so A and B rotations differ.
fn flip(scale: f64) -> [f64; 9] {
    if scale > 0.0 {
        [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0]
    }
}

fn random_partsets(r: &mut rand::rngs::StdRng) -> (PartSet, PartSet) {
    if r.random_bool(0.8) {
        let (mut a, mut b) = (PartSet::EMPTY, PartSet::EMPTY);
        for p in BodyPart::ALL {
            match r.random_range(0..3) {
                0 => a.insert(p),
                1 => b.insert(p),
                _ => {}
            }
        }
        (a, b)
    } else {
        (PartSet::from_bits(r.random_range(0..64)), PartSet::from_bits(r.random_range(0..64)))
    }
}

fn composition_partition() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(202);
    let (mut ok, mut rejected, mut coupled) = (0, 0, 0);
    for case in 0..500 {
        let (pa, pb) = random_partsets(&mut r);
        let (la, lb) = (r.random_range(1..60), r.random_range(1..60));
        let ma = marker_motion("a", la, 1.0);
        let mb = marker_motion("b", lb, -1.0);
        let a = LabeledMotion::new(ma.clone(), "act a", pa);
        let b = LabeledMotion::new(mb.clone(), "act b", pb);
        let got = compose_strict(&a, &b);

        // oracle
        let a_empty = pa.iter().next().is_none();
        let b_empty = pb.iter().next().is_none();
        let overlap = BodyPart::ALL.iter().any(|p| pa.contains(*p) && pb.contains(*p));
        if a_empty || b_empty || overlap {
            match got {
                Err(ComposeError::Incompatible { .. } | ComposeError::EmptyPartSet(_)) => {
                    rejected += 1;
                    continue;
                }
                other => return Err(format!("case {case}: expected rejection for {pa:?}/{pb:?}, got {other:?}")),
            }
        }
        let res = got.map_err(|e| format!("case {case}: {e}"))?;
        let count = |s: PartSet| BodyPart::ALL.iter().filter(|p| s.contains(**p)).count();
        let swap = count(pb) > count(pa);
        let (src_a, src_b, parts_b) = if swap { (&mb, &ma, pa) } else { (&ma, &mb, pb) };
        let legs_global = [LeftLeg, RightLeg, GlobalOrientation];
        let b_moves = legs_global.iter().any(|p| parts_b.contains(*p));
        let claimed = |p: BodyPart| parts_b.contains(p) || (b_moves && legs_global.contains(&p));
        let n = la.min(lb);
        ensure(res.motion.len() == n, || format!("case {case}: length {} != {n}", res.motion.len()))?;
        ensure(res.swapped == swap, || format!("case {case}: swap flag"))?;

        let canon_a = canonicalize(src_a).unwrap();
        let canon_b = canonicalize(src_b).unwrap();
        for j in 0..22 {
            let want = if claimed(ORACLE_OWNER[j]) { Source::B } else { Source::A };
            ensure(res.source_map.get(Slot::Joint(j)) == want, || format!("case {case}: joint {j} source"))?;
            let src = if want == Source::B { &canon_b } else { &canon_a };
            for f in 0..n {
                ensure(res.motion.frames[f].rotations[j] == src.frames[f].rotations[j], || {
                    format!("case {case}: joint {j} frame {f} data")
                })?;
            }
        }
        let want_t = if claimed(GlobalOrientation) { Source::B } else { Source::A };
        ensure(res.source_map.get(Slot::Translation) == want_t, || format!("case {case}: translation source"))?;
        let src = if want_t == Source::B { &canon_b } else { &canon_a };
        for f in 0..n {
            ensure(res.motion.frames[f].translation == src.frames[f].translation, || {
                format!("case {case}: translation frame {f}")
            })?;
        }
        if b_moves {
            coupled += 1;
            for j in 0..22 {
                if legs_global.contains(&ORACLE_OWNER[j]) {
                    ensure(res.source_map.get(Slot::Joint(j)) == Source::B, || format!("case {case}: coupling"))?;
                }
            }
            ensure(res.source_map.get(Slot::Translation) == Source::B, || format!("case {case}: coupling t"))?;
        }
        ok += 1;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("{ok} composed ({coupled} with leg/global coupling), {rejected} rejected, {elapsed:.2?}"))
}

fn set(ps: &[BodyPart]) -> PartSet {
    ps.iter().copied().collect()
}

fn parser_fixtures() -> Result<String, String> {
    let lookup = LookupTable::builtin();
    // (response as written, prompt kind, expected parts)
    let fixtures: Vec<(&str, PromptKind, PartSet)> = vec![
        ("right arm", PromptKind::ListFewShot, set(&[RightArm])),
        ("left leg", PromptKind::ListFewShot, set(&[LeftLeg])),
        ("left arm right arm torso", PromptKind::ListFewShot, set(&[LeftArm, RightArm, Torso])),
        (
            "left arm right arm left leg right leg waist",
            PromptKind::ListFewShot,
            set(&[LeftArm, RightArm, LeftLeg, RightLeg, GlobalOrientation]),
        ),
        ("left arm torso", PromptKind::ListFewShot, set(&[LeftArm, Torso])),
        ("left arm right arm arm torso", PromptKind::ListFewShot, set(&[LeftArm, RightArm, Torso])),
        ("right leg left leg buttocks", PromptKind::ListOnly, set(&[RightLeg, LeftLeg, GlobalOrientation])),
        ("left arm right arm arm torso neck", PromptKind::ListOnly, set(&[LeftArm, RightArm, Torso])),
    ];
    let render = |s: PartSet| -> String {
        s.iter()
            .map(|p| match p {
                GlobalOrientation => "waist".to_string(),
                other => other.title().to_lowercase(),
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    for (text, kind, want) in &fixtures {
        let got = parse_response(text, *kind, &lookup);
        ensure(got == *want, || format!("{text:?} parsed to {got:?}, want {want:?}"))?;
        let again = parse_response(&render(got), *kind, &lookup);
        ensure(again == got, || format!("not idempotent on {text:?}"))?;
        let variants = [
            text.to_uppercase(),
            text.replace(' ', ", ").replace("left, ", "left ").replace("right, ", "right ") + ".",
            format!("- {}!", text.replace("arm ", "arm;\n")),
            text.split(' ').collect::<Vec<_>>().join("  "),
        ];
        for v in &variants {
            let got_v = parse_response(v, *kind, &lookup);
            ensure(got_v == *want, || format!("{v:?} parsed to {got_v:?}"))?;
        }
    }
    Ok(format!("{} fixtures x 5 spellings", fixtures.len()))
}

fn accuracy_scorer() -> Result<String, String> {
    use Mark::{No as N, Sometimes as S, Yes as Y};
    // marks: left arm, right arm, left leg, right leg, torso, global
    let rows: Vec<(&str, [Mark; 6], &[BodyPart])> = vec![
        ("walk", [S, S, Y, Y, N, Y], &[LeftLeg, RightLeg, GlobalOrientation]),
        ("wave right hand", [N, Y, N, N, N, N], &[RightArm]),
        ("wave left hand", [Y, N, N, N, N, N], &[RightArm]),
        ("kick right", [N, N, S, Y, N, S], &[RightLeg]),
        ("bow", [N, N, N, N, Y, S], &[Torso, GlobalOrientation]),
        ("jump", [S, S, Y, Y, N, Y], &[LeftLeg, RightLeg]),
        ("clap", [Y, Y, N, N, N, N], &[LeftArm, RightArm]),
        ("sit down", [N, N, Y, Y, S, Y], &[LeftLeg, RightLeg, Torso, GlobalOrientation]),
        ("turn around", [N, N, Y, Y, N, Y], &[GlobalOrientation]),
        ("raise both arms", [Y, Y, N, N, N, N], &[LeftArm, RightArm, Torso]),
        ("nod", [N, N, N, N, Y, N], &[]),
        ("stretch", [S, S, S, S, S, S], &[LeftArm, RightArm, LeftLeg, RightLeg, Torso, GlobalOrientation]),
        ("throw ball", [N, Y, N, N, S, N], &[LeftArm, RightArm, Torso]),
        ("crawl", [Y, Y, Y, Y, S, Y], &[LeftArm, RightArm, LeftLeg, RightLeg, GlobalOrientation]),
        ("squat", [N, N, Y, Y, N, Y], &[LeftLeg, RightLeg, Torso, GlobalOrientation]),
        ("stand on left leg", [N, N, Y, S, N, S], &[LeftLeg]),
        ("punch with right hand", [N, Y, N, N, S, N], &[RightArm, Torso]),
        ("run", [S, S, Y, Y, N, Y], &[LeftArm, RightArm, LeftLeg, RightLeg, GlobalOrientation]),
        ("bend forward", [N, N, N, N, Y, N], &[Torso]),
        ("scratch head", [S, Y, N, N, N, N], &[LeftArm]),
    ];
    let anns: Vec<PartAnnotation> = rows.iter().map(|(a, m, _)| PartAnnotation::new(*a, *m)).collect();
    let preds: HashMap<String, PartSet> = rows.iter().map(|(a, _, p)| (a.to_string(), set(p))).collect();
    let report = label_accuracy(&preds, &anns).map_err(|e| e.to_string())?;
    // Scored by hand, row by row, before the scorer existed.
    let expected = [
        (LeftArm, 15.5),
        (RightArm, 16.0),
        (LeftLeg, 18.0),
        (RightLeg, 18.0),
        (Torso, 14.5),
        (GlobalOrientation, 17.0),
    ];
    for (part, total) in expected {
        let got = report.part(part);
        ensure(got == total / 20.0, || format!("{part:?}: {got} != {total}/20"))?;
    }
    ensure((report.mean - 99.0 / 120.0).abs() <= 1e-15, || format!("mean {}", report.mean))?;

    let all_s: Vec<PartAnnotation> = rows.iter().map(|(a, _, _)| PartAnnotation::new(*a, [S; 6])).collect();
    let r2 = label_accuracy(&preds, &all_s).map_err(|e| e.to_string())?;
    ensure(r2.per_part.values().all(|v| *v == 0.5) && r2.mean == 0.5, || "all-Sometimes is not 0.5".into())?;
    Ok(format!("mean {:.3}", report.mean))
}

fn gauss(pairs: &[(f64, f64)]) -> GaussianParams {
    GaussianParams::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect()).unwrap()
}

fn loss_suite() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(505);
    let mut worst_mc = 0.0f64;
    for (case, d) in [1usize, 8].iter().flat_map(|d| std::iter::repeat_n(*d, 20)).enumerate() {
        let draw = |r: &mut rand::rngs::StdRng| -> Vec<(f64, f64)> {
            (0..d).map(|_| (uniform(r, -0.5, 0.5), uniform(r, 0.8, 1.25))).collect()
        };
        let (p, q) = (draw(&mut r), draw(&mut r));
        let exact = kl_diag(&gauss(&p), &gauss(&q)).unwrap();
        let est = mc_kl(&p, &q, 1_000_000, 1000 + case as u64);
        worst_mc = worst_mc.max((exact - est).abs());
    }
    ensure(worst_mc < 1e-2, || format!("Monte-Carlo gap {worst_mc}"))?;

    // gradients
    let mut worst_grad = 0.0f64;
    let mut track = |a: &[f64], n: &[f64]| {
        for (x, y) in a.iter().zip(n) {
            worst_grad = worst_grad.max(rel_err(*x, *y));
        }
    };
    let h = 1e-5;
    for _ in 0..10 {
        let d = 4;
        let draw = |r: &mut rand::rngs::StdRng| -> Vec<(f64, f64)> {
            (0..d).map(|_| (uniform(r, -1.0, 1.0), uniform(r, 0.5, 2.0))).collect()
        };
        let (p, q) = (draw(&mut r), draw(&mut r));
        let flat: Vec<f64> = p.iter().chain(&q).flat_map(|(m, s)| [*m, *s]).collect();
        let numeric = central_diff(&flat, h, |x| {
            let pairs: Vec<(f64, f64)> = x.chunks(2).map(|c| (c[0], c[1])).collect();
            kl_diag(&gauss(&pairs[..d]), &gauss(&pairs[d..])).unwrap()
        });
        let (gp, gq) = kl_diag_grad(&gauss(&p), &gauss(&q)).unwrap();
        let analytic: Vec<f64> = (0..d)
            .flat_map(|i| [gp.mu[i], gp.sigma[i]])
            .chain((0..d).flat_map(|i| [gq.mu[i], gq.sigma[i]]))
            .collect();
        track(&analytic, &numeric);

        // keep differences away from the smooth-L1 kink at |d| = 1
        let x: Vec<f64> = (0..12).map(|_| uniform(&mut r, -3.0, 3.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let off = if r.random_bool(0.5) { uniform(&mut r, -0.9, 0.9) } else { uniform(&mut r, 1.1, 3.0) };
                v + off
            })
            .collect();
        let (gx, gy) = smooth_l1_grad(&x, &y).unwrap();
        track(&gx, &central_diff(&x, h, |v| smooth_l1(v, &y).unwrap()));
        track(&gy, &central_diff(&y, h, |v| smooth_l1(&x, v).unwrap()));
    }

    // total loss: gradient over every input, and re-summation
    let d = 6;
    let n = 2 * 135;
    let mut worst_sum = 0.0f64;
    for _ in 0..5 {
        let t: Vec<(f64, f64)> = (0..d).map(|_| (uniform(&mut r, -1.0, 1.0), uniform(&mut r, 0.5, 2.0))).collect();
        let m: Vec<(f64, f64)> = (0..d).map(|_| (uniform(&mut r, -1.0, 1.0), uniform(&mut r, 0.5, 2.0))).collect();
        let z_t: Vec<f64> = (0..d).map(|_| uniform(&mut r, -1.0, 1.0)).collect();
        let z_m: Vec<f64> = z_t.iter().map(|v| v + uniform(&mut r, -0.8, 0.8)).collect();
        let gt: Vec<f64> = (0..n).map(|_| uniform(&mut r, -2.0, 2.0)).collect();
        let near_or_far = |r: &mut rand::rngs::StdRng, v: &f64| {
            v + if r.random_bool(0.5) { uniform(r, -0.9, 0.9) } else { uniform(r, 1.1, 2.0) }
        };
        let rec_t: Vec<f64> = gt.iter().map(|v| near_or_far(&mut r, v)).collect();
        let rec_m: Vec<f64> = gt.iter().map(|v| near_or_far(&mut r, v)).collect();

        let (tg, mg) = (gauss(&t), gauss(&m));
        let inputs = LossInputs { text: &tg, motion: &mg, z_t: &z_t, z_m: &z_m, gt: &gt, rec_t: &rec_t, rec_m: &rec_m };
        let b = total_loss(&inputs).unwrap();
        let parts = kl_to_standard(&tg)
            + kl_to_standard(&mg)
            + kl_diag(&tg, &mg).unwrap()
            + kl_diag(&mg, &tg).unwrap()
            + smooth_l1(&gt, &rec_t).unwrap()
            + smooth_l1(&gt, &rec_m).unwrap()
            + smooth_l1(&z_t, &z_m).unwrap();
        worst_sum = worst_sum.max((b.total - parts).abs());

        let grad = total_loss_grad(&inputs).unwrap();
        // flatten: text mu/sigma, motion mu/sigma, z_t, z_m, gt, rec_t, rec_m
        let mut flat: Vec<f64> = Vec::new();
        for g in [&t, &m] {
            flat.extend(g.iter().map(|p| p.0));
            flat.extend(g.iter().map(|p| p.1));
        }
        for v in [&z_t, &z_m, &gt, &rec_t, &rec_m] {
            flat.extend(v.iter());
        }
        let eval = |x: &[f64]| {
            let mut o = 0;
            let mut take = |k: usize| {
                let s = &x[o..o + k];
                o += k;
                s.to_vec()
            };
            let (tm, ts, mm, ms) = (take(d), take(d), take(d), take(d));
            let (zt, zm, g, rt, rm) = (take(d), take(d), take(n), take(n), take(n));
            let (tg, mg) = (GaussianParams::new(tm, ts).unwrap(), GaussianParams::new(mm, ms).unwrap());
            total_loss(&LossInputs { text: &tg, motion: &mg, z_t: &zt, z_m: &zm, gt: &g, rec_t: &rt, rec_m: &rm })
                .unwrap()
                .total
        };
        let numeric = central_diff(&flat, h, eval);
        let mut analytic = Vec::new();
        for g in [&grad.text, &grad.motion] {
            analytic.extend(&g.mu);
            analytic.extend(&g.sigma);
        }
        for v in [&grad.z_t, &grad.z_m, &grad.gt, &grad.rec_t, &grad.rec_m] {
            analytic.extend(v.iter());
        }
        track(&analytic, &numeric);
    }
    ensure(worst_grad < 1e-5, || format!("gradient relative error {worst_grad:e}"))?;
    ensure(worst_sum <= 1e-12, || format!("re-summation gap {worst_sum:e}"))?;
    Ok(format!(
        "MC gap {worst_mc:.1e}, grad rel err {worst_grad:.1e}, sum gap {worst_sum:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn random_trajectory(seed: u64, frames: usize) -> Vec<Vec<[f64; 3]>> {
    let mut r = rng(seed);
    (0..frames)
        .map(|_| (0..22).map(|_| [0; 3].map(|_: u8| uniform(&mut r, -1.0, 1.0))).collect())
        .collect()
}

fn metric_laws() -> Result<String, String> {
    let tol = 1e-9;
    let gt_raw = random_trajectory(606, 30);
    let gt = JointTrajectory::new(gt_raw.clone()).unwrap();
    for v in Variant::ALL {
        ensure(ape(&gt, &gt, v).unwrap().abs() <= tol, || format!("APE {v:?} of identical"))?;
        ensure(ave(&gt, &gt, v).unwrap().abs() <= tol, || format!("AVE {v:?} of identical"))?;
    }
    let f: Vec<f64> = (0..256).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1 + 0.01).collect();
    ensure((temos_score(&f, &f).unwrap() - 1.0).abs() <= tol, || "score(f, f)".into())?;

    let offset = [0.3, -1.2, 0.4];
    let norm = offset.iter().map(|v| v * v).sum::<f64>().sqrt();
    let xy_norm = (offset[0] * offset[0] + offset[1] * offset[1]).sqrt();
    let shifted = JointTrajectory::new(
        gt_raw
            .iter()
            .map(|fr| fr.iter().map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]]).collect())
            .collect(),
    )
    .unwrap();
    let checks = [
        (ape(&shifted, &gt, Variant::Root).unwrap(), norm),
        (ape(&shifted, &gt, Variant::MeanGlobal).unwrap(), norm),
        (ape(&shifted, &gt, Variant::Traj).unwrap(), xy_norm),
        (ape(&shifted, &gt, Variant::MeanLocal).unwrap(), 0.0),
    ];
    for (i, (got, want)) in checks.iter().enumerate() {
        ensure((got - want).abs() <= tol, || format!("offset check {i}: {got} vs {want}"))?;
    }
    for v in Variant::ALL {
        ensure(ave(&shifted, &gt, v).unwrap().abs() <= tol, || format!("AVE {v:?} under offset"))?;
    }
    let unit_offset = JointTrajectory::new(
        gt_raw.iter().map(|fr| fr.iter().map(|p| [p[0] + 1.0, p[1], p[2]]).collect()).collect(),
    )
    .unwrap();
    ensure((ape(&unit_offset, &gt, Variant::Traj).unwrap() - 1.0).abs() <= tol, || "unit traj".into())?;

    let f3: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
    let neg: Vec<f64> = f.iter().map(|v| -v).collect();
    ensure((temos_score(&f, &f3).unwrap() - 1.0).abs() <= tol, || "score(f, 3f)".into())?;
    ensure(temos_score(&f, &neg).unwrap().abs() <= tol, || "score(f, -f)".into())?;
    let (e1, e2) = ([1.0, 0.0, 0.0], [0.0, 2.0, 0.0]);
    ensure((temos_score(&e1, &e2).unwrap() - 0.5).abs() <= tol, || "orthogonal".into())?;
    Ok("all laws within 1e-9".into())
}

fn prompt_golden() -> Result<String, String> {
    let golden = include_str!("golden/fewshot_prompt.txt");
    let action = "jump over a rope";
    let got = build_prompt(action, PromptKind::ListFewShot).map_err(|e| e.to_string())?;
    let want = golden.replace("[ACTION]", action);
    if got != want {
        let line = got.lines().zip(want.lines()).position(|(a, b)| a != b);
        return Err(format!("differs (first differing line {line:?}, lengths {} vs {})", got.len(), want.len()));
    }
    Ok(format!("{} bytes", got.len()))
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["motions", "sidecars"] {
        for e in std::fs::read_dir(dir.join(sub)).unwrap() {
            let p = e.unwrap().path();
            out.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
        }
    }
    out.insert("manifest.json".into(), std::fs::read(dir.join("manifest.json")).unwrap());
    out
}

fn pipeline_determinism() -> Result<String, String> {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let corpus_dir = tmp.path().join("corpus");
    toy::generate(&corpus_dir, ToyConfig::default()).map_err(|e| e.to_string())?;
    let corpus = Corpus::load(&corpus_dir).map_err(|e| e.to_string())?;
    ensure(corpus.motions.len() == 50, || format!("{} motions", corpus.motions.len()))?;

    let build = |name: &str, p: f64| {
        let specs = sample_synth_pairs(&corpus, p, 42, usize::MAX).unwrap();
        let out = tmp.path().join(name);
        let manifest = build_dataset(&corpus, &specs, &out, 7).unwrap();
        (manifest, read_tree(&out))
    };
    let (m1, t1) = build("run1", 1.0);
    let (_, t2) = build("run2", 1.0);
    ensure(t1 == t2, || "two builds differ".into())?;

    let (m0, _) = build("p0", 0.0);
    ensure(m0.items.is_empty() && m0.skipped == 0, || "p = 0 emitted pairs".into())?;

    // singles: segments overlapping no other segment of the same motion
    let segs = &corpus.segments;
    let single: Vec<&LabeledSegment> = segs
        .iter()
        .filter(|s| {
            !segs.iter().any(|o| {
                o.id != s.id && o.motion_id == s.motion_id && s.start_frame < o.end_frame && o.start_frame < s.end_frame
            })
        })
        .collect();
    let pairable = single
        .iter()
        .filter(|s| single.iter().any(|o| !s.parts.is_empty() && !o.parts.is_empty() && s.parts.is_disjoint(o.parts)))
        .count();
    ensure(m1.items.len() == pairable && m1.skipped == 0, || {
        format!("p = 1 emitted {} of {pairable} pairable singles", m1.items.len())
    })?;

    let real = extract_real_pairs(&corpus);
    let overlap = |p: &PairSpec| {
        let (a, b) = (corpus.segment(&p.seg_a).unwrap(), corpus.segment(&p.seg_b).unwrap());
        a.end_frame.min(b.end_frame) - a.start_frame.max(b.start_frame)
    };
    let none = HashSet::new();
    let train: HashSet<PairSpec> = filter_split(&corpus, &real, SplitRole::Train, &none).unwrap().into_iter().collect();
    let eval: HashSet<PairSpec> = filter_split(&corpus, &real, SplitRole::Eval, &none).unwrap().into_iter().collect();
    let has_stand = |p: &PairSpec| {
        [&p.seg_a, &p.seg_b].iter().any(|id| corpus.segment(id).unwrap().action.trim().eq_ignore_ascii_case("stand"))
    };
    let (mut short, mut stand) = (0, 0);
    for p in &real {
        let in_bounds = (15..=600).contains(&overlap(p));
        short += usize::from(!in_bounds);
        stand += usize::from(in_bounds && has_stand(p));
        ensure(train.contains(p) == in_bounds, || format!("train filter on {p:?}"))?;
        ensure(eval.contains(p) == (in_bounds && !has_stand(p)), || format!("eval filter on {p:?}"))?;
    }
    ensure(short > 0, || "toy corpus has no out-of-bounds overlaps to filter".into())?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!(
        "{} synthetic pairs, {} real pairs ({short} out of bounds, {stand} with stand), {elapsed:.2?}",
        m1.items.len(),
        real.len()
    ))
}

const GERUNDS: &[(&str, &str)] = &[
    ("walk", "walking"), ("run", "running"), ("jump", "jumping"), ("wave", "waving"), ("sit", "sitting"),
    ("stand", "standing"), ("kick", "kicking"), ("throw", "throwing"), ("catch", "catching"), ("dance", "dancing"),
    ("skip", "skipping"), ("hop", "hopping"), ("swim", "swimming"), ("crawl", "crawling"), ("bend", "bending"),
    ("squat", "squatting"), ("stretch", "stretching"), ("clap", "clapping"), ("punch", "punching"),
    ("push", "pushing"), ("pull", "pulling"), ("lift", "lifting"), ("raise", "raising"), ("lower", "lowering"),
    ("turn", "turning"), ("spin", "spinning"), ("step", "stepping"), ("stop", "stopping"), ("shuffle", "shuffling"),
    ("bow", "bowing"), ("nod", "nodding"), ("shake", "shaking"), ("lie", "lying"), ("tie", "tying"),
    ("see", "seeing"), ("be", "being"), ("sing", "singing"), ("swing", "swinging"), ("climb", "climbing"),
    ("kneel", "kneeling"), ("drop", "dropping"), ("grab", "grabbing"), ("wipe", "wiping"), ("rub", "rubbing"),
    ("tap", "tapping"), ("jog", "jogging"), ("limp", "limping"), ("march", "marching"), ("salute", "saluting"),
    ("scratch", "scratching"),
];

fn text_augmentation() -> Result<String, String> {
    let table = ConjunctionTable::builtin();
    let pairs = [
        ("walk", "wave"),
        ("sit down", "stretch"),
        ("walk forward", "wave with the right hand"),
        ("run", "clap"),
        ("jump", "raise both arms"),
        ("turn around", "nod"),
        ("kick with the left leg", "punch"),
        ("bow", "wave with the left hand"),
        ("stand", "scratch head"),
        ("march in place", "salute"),
    ];
    let padded = |s: &str| format!(" {s} ");
    let occurrences = |hay: &str, needle: &str| padded(hay).matches(&padded(needle)).count();
    let mut runs = 0;
    for (a, b) in pairs {
        let labels = vec![a.to_string(), b.to_string()];
        let reversed = vec![b.to_string(), a.to_string()];
        let candidates: Vec<String> = table
            .entries
            .iter()
            .flat_map(|e| {
                [
                    test_description(&labels, &e.text, &table).unwrap(),
                    test_description(&reversed, &e.text, &table).unwrap(),
                ]
            })
            .collect();
        for seed in 0..200u64 {
            let out = compose_description(&labels, seed, &table).map_err(|e| e.to_string())?;
            for l in [a, b] {
                let n = occurrences(&out, l) + occurrences(&out, &inflect_gerund(l));
                ensure(n == 1, || format!("{l:?} appears {n} times in {out:?}"))?;
            }
            let templates = candidates.iter().filter(|c| **c == out).count();
            ensure(templates == 1, || format!("{out:?} matches {templates} templates"))?;
            runs += 1;
        }
    }
    let l = vec!["walk".to_string(), "wave".to_string()];
    let w = test_description(&l, "while", &table).map_err(|e| e.to_string())?;
    ensure(w == "walk while waving", || format!("got {w:?}"))?;
    ensure(GERUNDS.len() >= 50, || "gerund list too short".into())?;
    for (verb, want) in GERUNDS {
        let got = inflect_gerund(verb);
        ensure(got == *want, || format!("{verb} -> {got}, want {want}"))?;
    }
    Ok(format!("{runs} seeded runs, {} verbs", GERUNDS.len()))
}

/// The `sinc` binary next to this test executable, built on demand.
fn sinc_binary() -> Result<PathBuf, String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let profile_dir = exe.parent().and_then(Path::parent).ok_or("no target dir")?;
    let bin = profile_dir.join(format!("sinc{}", std::env::consts::EXE_SUFFIX));
    if !bin.exists() {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let status = Command::new(cargo)
            .args(["build", "-p", "sinc-cli", "--bin", "sinc"])
            .current_dir(env!("CARGO_MANIFEST_DIR"))
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success() && bin.exists(), || format!("could not build {}", bin.display()))?;
    }
    Ok(bin)
}

fn end_to_end() -> Result<String, String> {
    let bin = sinc_binary()?;
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    toy::generate(&corpus, ToyConfig::default()).map_err(|e| e.to_string())?;
    let run = |args: &[&Path]| {
        Command::new(&bin)
            .args(args)
            .env_remove("SINC_COMPLETION_API_KEY")
            .output()
            .map_err(|e| e.to_string())
    };
    let ds = tmp.path().join("dataset");
    let out = run(&[
        Path::new("synth-dataset"), Path::new("--corpus"), &corpus, Path::new("--out"), &ds,
        Path::new("--p"), Path::new("0.5"), Path::new("--seed"), Path::new("3"), Path::new("--aug-seed"), Path::new("4"),
    ])?;
    ensure(out.status.success(), || format!("synth-dataset failed: {}", String::from_utf8_lossy(&out.stderr)))?;

    let gt = tmp.path().join("gt");
    std::fs::create_dir(&gt).unwrap();
    let mut n = 0;
    for e in std::fs::read_dir(ds.join("motions")).unwrap() {
        let p = e.unwrap().path();
        std::fs::copy(&p, gt.join(p.file_name().unwrap())).unwrap();
        n += 1;
    }
    ensure(n > 0, || "no motions emitted".into())?;
    let report = tmp.path().join("report.json");
    let out = run(&[Path::new("evaluate"), Path::new("--gen"), &ds, Path::new("--gt"), &gt, Path::new("--report"), &report])?;
    ensure(out.status.code() == Some(0), || format!("evaluate exit {:?}", out.status.code()))?;
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let keys = [
        "ape_root", "ape_traj", "ape_mean_local", "ape_mean_global", "ave_root", "ave_traj", "ave_mean_local",
        "ave_mean_global",
    ];
    for (id, item) in json["items"].as_object().unwrap().iter().chain([("mean".to_string(), json["mean"].clone())].iter().map(|(k, v)| (k, v))) {
        for k in keys {
            ensure(item[k].as_f64() == Some(0.0), || format!("{id}: {k} = {}", item[k]))?;
        }
    }
    Ok(format!("{n} motions evaluated, all positional metrics 0"))
}
