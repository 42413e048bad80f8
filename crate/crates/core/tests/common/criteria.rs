//! The acceptance checks. Each returns a one-line summary on success and a
//! description of the first discrepancy on failure.

use std::fs;

use arcprompt::dsl::{apply_instruction, parse_instruction, verify_instruction, Instruction};
use arcprompt::harness::{report_without_timing, run_eval, RunConfig, RunFlow, REPORT_JSON};
use arcprompt::llm::{ChatMessage, CompletionParams, ScriptedBackend};
use arcprompt::memory::{
    describe_prompt, refine_with_memory, EmbeddingBackend, HashedEmbedder, MemoryEntry, MemoryKind, MemoryStore,
    RetrievalConfig, HASHED_DIM,
};
use arcprompt::pool::{filter_candidates, Candidate, View};
use arcprompt::task::{serialize_task, TaskPair};
use arcprompt::views::{extract_objects, SegmentationConfig};
use arcprompt::{parse_task, redact_test_output, Grid, Task};
use chrono::DateTime;
use rand::Rng;

use super::*;

pub type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn golden_replay_config(dataset: &std::path::Path, out: &std::path::Path) -> RunConfig {
    RunConfig::new(dataset, out, RunFlow::Naive, "gpt-4")
}

pub fn golden_backend() -> ScriptedBackend {
    ScriptedBackend::load_dir(fixtures().join("transcripts").join("naive")).unwrap()
}

pub const ANSWER_157: [[u8; 4]; 4] = [[2, 0, 0, 3], [0, 0, 0, 0], [0, 0, 0, 0], [4, 0, 0, 9]];
pub const ANSWER_162: [[u8; 3]; 3] = [[3, 3, 4], [7, 0, 1], [7, 0, 1]];

pub fn golden_replay() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = golden_replay_config(&fixtures().join("tasks"), out.path());
    let report = run_eval(&config, &golden_backend(), &HashedEmbedder::default()).map_err(|e| e.to_string())?;
    ensure(report.total == 2 && report.solved == 2, || {
        format!("solved {}/{}", report.solved, report.total)
    })?;
    let expected = [
        ("66e6c45b", Grid::from_rows(&ANSWER_157).unwrap()),
        ("68b67ca3", Grid::from_rows(&ANSWER_162).unwrap()),
    ];
    for (id, grid) in expected {
        let r = report
            .results
            .iter()
            .find(|r| r.task_id == id)
            .ok_or_else(|| format!("{id} missing"))?;
        ensure(r.prediction.as_ref() == Some(&grid), || {
            format!("{id} predicted {:?}", r.prediction)
        })?;
    }
    Ok("solved 2/2, predictions exact".into())
}

pub fn dsl_ground_truth() -> Outcome {
    let config = SegmentationConfig::default();
    let checks = [
        (
            "68b67ca3",
            "subsample row_offset=0 row_stride=2 col_offset=0 col_stride=2",
            3,
        ),
        ("66e6c45b", "scatter_to_corners selector=nth-in-order(1)", 2),
    ];
    for (id, program, pairs) in checks {
        let task = fixture_task(id);
        ensure(task.train.len() == pairs, || {
            format!("{id} has {} train pairs", task.train.len())
        })?;
        let instr = parse_instruction(program).map_err(|e| e.to_string())?;
        let report = verify_instruction(&instr, &task.train, &config);
        ensure(report.passed(), || format!("{id}: {:?}", report.first_failure()))?;
        // the test pair too
        let test = &task.test[0];
        let got = apply_instruction(&instr, &test.input, &config).map_err(|e| e.to_string())?;
        ensure(Some(&got) == test.output.as_ref(), || {
            format!("{id} test pair: got {got:?}")
        })?;
    }
    Ok("both programs reproduce every train output".into())
}

pub fn interpreter_algebra(count: usize) -> Outcome {
    let config = SegmentationConfig::default();
    let run = |text: &str, g: &Grid| apply_instruction(&parse_instruction(text).unwrap(), g, &config).unwrap();
    let mut rng = rng(3);
    for n in 0..count {
        let g = to_grid(&random_rows(&mut rng, 10, 9));
        ensure(run("rotate quarter_turns=1\n".repeat(4).as_str(), &g) == g, || {
            format!("grid {n}: rotate^4 != id")
        })?;
        for axis in ["horizontal", "vertical", "main-diagonal", "anti-diagonal"] {
            let twice = format!("reflect axis={axis}\nreflect axis={axis}");
            ensure(run(&twice, &g) == g, || format!("grid {n}: reflect({axis})^2 != id"))?;
        }
        ensure(
            run("rotate quarter_turns=2", &g) == run("reflect axis=vertical\nreflect axis=horizontal", &g),
            || format!("grid {n}: rotate(2) != reflect(h) . reflect(v)"),
        )?;
    }
    Ok(format!("{count} grids, 0 failures"))
}

pub fn object_extraction(count: usize) -> Outcome {
    let mut rng = rng(4);
    for n in 0..count {
        let rows = random_rows(&mut rng, 8, 3);
        let g = to_grid(&rows);
        for (connectivity, grouping) in CONFIGS {
            let config = SegmentationConfig::new(connectivity, grouping, 0);
            let ours: Vec<Vec<(usize, usize)>> = extract_objects(&g, &config)
                .iter()
                .map(|o| o.cells.iter().map(|c| (c.row, c.col)).collect())
                .collect();
            let eight = connectivity == arcprompt::views::Connectivity::Eight;
            let same = grouping == arcprompt::views::Grouping::SameValue;
            let oracle = oracle_components(&rows, eight, same, 0);
            ensure(ours == oracle, || {
                format!("grid {n} {connectivity:?}/{grouping:?}: {ours:?} vs {oracle:?}\n{rows:?}")
            })?;
        }
    }
    Ok(format!("{count} grids x 4 configs, 0 disagreements"))
}

fn differs_on_some_pair(instr: &Instruction, pairs: &[(Rows, Rows)]) -> bool {
    pairs.iter().any(|(i, o)| oracle_run(instr, i).as_ref() != Some(o))
}

fn dsl_candidate(instr: &Instruction, index: usize) -> Candidate {
    Candidate {
        view: View::Generic,
        broad_description: String::new(),
        detailed_steps: instr.to_string(),
        instruction: Some(instr.clone()),
        sample_index: index,
        dsl_error: None,
    }
}

pub fn filter_soundness(tasks: usize) -> Outcome {
    let mut rng = rng(5);
    let backend = ScriptedBackend::new();
    let params = CompletionParams::new("unused", 1);
    let config = SegmentationConfig::default();
    let mut decoys_total = 0;
    let mut built = 0;
    while built < tasks {
        let program = random_program(&mut rng);
        let inputs: Vec<Rows> = (0..3)
            .map(|_| {
                let (r, c) = (rng.gen_range(2..=8), rng.gen_range(2..=4) * 2);
                sized_rows(&mut rng, r, c, 4)
            })
            .collect();
        let Some(pairs) = inputs
            .iter()
            .map(|i| oracle_run(&program, i).map(|o| (i.clone(), o)))
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let mut decoys = Vec::new();
        for _ in 0..50 {
            let d = mutate(&mut rng, &program);
            if differs_on_some_pair(&d, &pairs) && !decoys.contains(&d) {
                decoys.push(d);
            }
            if decoys.len() == 3 {
                break;
            }
        }
        if decoys.is_empty() {
            continue;
        }
        built += 1;
        let train: Vec<TaskPair> = pairs
            .iter()
            .map(|(i, o)| TaskPair::new(to_grid(i), to_grid(o)))
            .collect();
        let mut pool = vec![dsl_candidate(&program, 0)];
        pool.extend(decoys.iter().enumerate().map(|(i, d)| dsl_candidate(d, i + 1)));
        let outcomes = filter_candidates(&pool, &train, &backend, &params, &config);
        ensure(outcomes[0].survived(), || {
            format!(
                "planted `{program}` discarded: {:?}",
                outcomes[0].report.first_failure()
            )
        })?;
        for o in &outcomes[1..] {
            ensure(!o.survived(), || {
                format!("decoy `{}` of `{program}` survived", o.candidate.detailed_steps)
            })?;
        }
        decoys_total += decoys.len();
    }
    Ok(format!(
        "{tasks} tasks, planted always kept, {decoys_total} decoys all discarded"
    ))
}

pub fn knn_exactness(entries: usize, queries: usize) -> Outcome {
    const DIM: usize = 16;
    let mut rng = rng(6);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut store = MemoryStore::open(dir.path(), DIM).map_err(|e| e.to_string())?;
    let mut plain: Vec<(String, Vec<f64>)> = Vec::new();
    for i in 0..entries {
        // every fifth entry repeats an earlier vector so ties occur
        let embedding = if i % 5 == 4 {
            plain[rng.gen_range(0..plain.len())].1.clone()
        } else {
            random_unit(&mut rng, DIM)
        };
        let id = format!("m{:04}", (i * 7919) % 10_000);
        store
            .insert(MemoryEntry {
                id: id.clone(),
                kind: MemoryKind::Broad,
                text: format!("entry {i}"),
                embedding: embedding.clone(),
                source_task: "synthetic".into(),
                created_at: DateTime::from_timestamp(0, 0).unwrap(),
            })
            .map_err(|e| e.to_string())?;
        plain.push((id, embedding));
    }
    let query_set: Vec<(Vec<f64>, usize)> = (0..queries)
        .map(|q| {
            let v = if q % 4 == 0 {
                plain[rng.gen_range(0..plain.len())].1.clone()
            } else {
                random_unit(&mut rng, DIM)
            };
            (v, rng.gen_range(1..=20))
        })
        .collect();
    let ids = |s: &MemoryStore, q: &[f64], k: usize| -> Result<Vec<String>, String> {
        Ok(s.top_k(q, MemoryKind::Broad, k)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|(e, _)| e.id.clone())
            .collect())
    };
    for (n, (q, k)) in query_set.iter().enumerate() {
        let expected = brute_top_k(&plain, q, *k);
        let got = ids(&store, q, *k)?;
        ensure(got == expected, || format!("query {n} k={k}: {got:?} vs {expected:?}"))?;
    }
    drop(store);
    let reopened = MemoryStore::open(dir.path(), DIM).map_err(|e| e.to_string())?;
    ensure(reopened.len() == entries, || {
        format!("reopened store has {} entries", reopened.len())
    })?;
    for (n, (q, k)) in query_set.iter().enumerate() {
        let expected = brute_top_k(&plain, q, *k);
        let got = ids(&reopened, q, *k)?;
        ensure(got == expected, || {
            format!("after reopen, query {n}: {got:?} vs {expected:?}")
        })?;
    }
    Ok(format!(
        "{entries} entries x {queries} queries exact, identical after reopen"
    ))
}

fn loop_task() -> Task {
    fixture_task("68b67ca3")
}

/// Store holding, for each text, five close variants (so each text has
/// its own neighbourhood) plus two unrelated entries.
pub fn seeded_store(texts: &[&str]) -> MemoryStore {
    let embedder = HashedEmbedder::default();
    let mut store = MemoryStore::in_memory(HASHED_DIM);
    let mut remember = |id: String, text: String| {
        arcprompt::memory::record_solution(&id, &text, &text, &embedder, &mut store).unwrap();
    };
    for (t, text) in texts.iter().enumerate() {
        for v in 0..5 {
            remember(format!("near{t}-{v}"), format!("{text} variant{v}"));
        }
    }
    remember("far0".into(), "unrelated words here".into());
    remember("far1".into(), "nothing in common".into());
    store
}

/// Script a broad-description loop whose generations are `texts`, in order.
pub fn script_loop(task: &Task, store: &MemoryStore, k: usize, texts: &[&str]) -> ScriptedBackend {
    let embedder = HashedEmbedder::default();
    let mut backend = ScriptedBackend::new();
    let mut retrieved: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for text in texts {
        let refs: Vec<&str> = retrieved.iter().map(String::as_str).collect();
        let prompt = describe_prompt(task, MemoryKind::Broad, &refs, None);
        assert!(seen.insert(prompt.clone()), "two iterations would share a prompt");
        backend.insert(
            vec![ChatMessage::user(prompt)],
            vec![format!("Broad description: {text}")],
        );
        let q = embedder.embed(text).unwrap();
        retrieved = store
            .top_k(&q, MemoryKind::Broad, k)
            .unwrap()
            .into_iter()
            .map(|(e, _)| e.text.clone())
            .collect();
    }
    backend
}

pub fn memory_loop_bounds() -> Outcome {
    let task = loop_task();
    let fixed = "take every second cell";
    let texts = ["alpha beta gamma", "delta epsilon zeta", "eta theta iota"];
    let store = seeded_store(&[fixed, texts[0], texts[1], texts[2]]);
    let config = RetrievalConfig::default();
    ensure(config.k == 5 && config.max_refine_iters == 3, || {
        format!("defaults {config:?}")
    })?;
    let params = CompletionParams::new("m", 1);
    let embedder = HashedEmbedder::default();
    let run = |backend: &ScriptedBackend| {
        refine_with_memory(
            &task,
            backend,
            &params,
            &embedder,
            &store,
            MemoryKind::Broad,
            &config,
            None,
        )
        .map_err(|e| e.to_string())
    };

    let out = run(&script_loop(&task, &store, config.k, &[fixed, fixed]))?;
    ensure(
        out.trace.steps.len() == 2 && out.trace.converged && out.text == fixed,
        || format!("fixed point: {:?}", out.trace),
    )?;
    let sim = out.trace.steps[1].similarity_to_previous.unwrap_or(0.0);
    ensure((sim - 1.0).abs() < 1e-9, || format!("fixed point similarity {sim}"))?;
    ensure(out.trace.steps[1].retrieved_ids.len() == 5, || {
        format!("retrieved {} neighbours", out.trace.steps[1].retrieved_ids.len())
    })?;

    let vecs: Vec<Vec<f64>> = texts.iter().map(|t| embedder.embed(t).unwrap()).collect();
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let c = brute_cosine(&vecs[a], &vecs[b]);
        ensure(c < config.convergence_threshold, || format!("texts {a},{b} cosine {c}"))?;
    }
    let out = run(&script_loop(&task, &store, config.k, &texts))?;
    ensure(
        out.trace.steps.len() == 3 && !out.trace.converged && out.text == texts[2],
        || format!("non-converging: {:?}", out.trace),
    )?;
    Ok("converged at 2 on a fixed point, stopped at 3 otherwise, k=5 retrieved".into())
}

pub fn format_fidelity() -> Outcome {
    let mut checked = 0;
    let mut entries: Vec<_> = fs::read_dir(fixtures().join("tasks"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for path in entries {
        let id = path.file_stem().unwrap().to_str().unwrap().to_string();
        let task = parse_task(&fs::read_to_string(&path).unwrap(), &id).map_err(|e| e.to_string())?;
        let golden_path = fixtures().join("redacted").join(format!("{id}.json"));
        let golden = fs::read_to_string(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
        let ours = redact_test_output(&task);
        ensure(ours == golden.trim_end(), || {
            format!("{id}: redaction differs\n{ours}\n{golden}")
        })?;
        ensure(ours.contains("\"to_be_filled\""), || {
            format!("{id}: no literal placeholder")
        })?;
        // the golden file must itself parse back to the task minus answers
        let back = parse_task(&golden, &id).map_err(|e| e.to_string())?;
        ensure(back.train == task.train && back.test[0].output.is_none(), || {
            format!("{id}: golden does not parse back")
        })?;
        ensure(!serialize_task(&task).is_empty(), || "empty serialization".into())?;
        checked += 1;
    }
    ensure(checked >= 2, || format!("only {checked} fixture tasks"))?;
    Ok(format!("{checked} fixture tasks match their golden files"))
}

pub fn reproducibility() -> Outcome {
    let dataset = fixtures().join("tasks");
    let mut reports = Vec::new();
    for _ in 0..2 {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut config = golden_replay_config(&dataset, out.path());
        config.seed = 17;
        config.concurrency = 2;
        run_eval(&config, &golden_backend(), &HashedEmbedder::default()).map_err(|e| e.to_string())?;
        let json = fs::read_to_string(out.path().join(REPORT_JSON)).map_err(|e| e.to_string())?;
        reports.push(report_without_timing(&json).map_err(|e| e.to_string())?);
    }
    ensure(reports[0] == reports[1], || "report.json differs between runs".into())?;
    Ok(format!("{} identical bytes", reports[0].len()))
}
