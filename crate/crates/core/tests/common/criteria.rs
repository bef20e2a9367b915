//! One check per acceptance criterion that the core crate can decide on its
//! own. Each returns a short detail line on success and the first
//! counterexample on failure. Seeds are fixed so failures reproduce.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use agentloom_core::artifact::{ContactVector, ShapeParams, SHAPE_LEN};
use agentloom_core::evalharness::{load_dataset, run_benchmark, BenchConfig, BenchContext, BenchOutput};
use agentloom_core::executor::{execute_graph, AdapterSet, ExecConfig, MockAdapter, MockConfig, ToolAdapter, ToolArgs, ToolError};
use agentloom_core::integration::{
    discriminate_modify, reading, transform_contact, transform_shape, MeasurementField, MeasurementSet,
    ShapeMeasurementModel, VertexPartMap,
};
use agentloom_core::llm::{CompletionRequest, ScriptedBackend};
use agentloom_core::planner::{parse_emission, parse_invocation, parse_tool_graph, validate_graph};
use agentloom_core::registry::{QaPair, ToolDocument};
use agentloom_core::retrieval::{HashingEmbedder, RetrievalIndex};
use agentloom_core::{ArtifactValue, ToolCatalog, ToolInvocation};
use async_trait::async_trait;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bleu_oracle, contact_oracle, edges_respected, random_graph, random_sentence, sequential_reference};

pub type Outcome = Result<String, String>;

pub fn bench_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/bench")
}

async fn bench_with(script: &str) -> Result<BenchOutput, String> {
    let dir = bench_dir();
    let records = load_dataset(dir.join("bench50.jsonl")).map_err(|e| e.to_string())?;
    let backend = ScriptedBackend::load(dir.join(script)).map_err(|e| e.to_string())?;
    let catalog = ToolCatalog::builtin();
    let embedder = HashingEmbedder::default();
    let index = RetrievalIndex::build(&embedder, catalog.documents()).await.map_err(|e| e.to_string())?;
    let ctx = BenchContext {
        catalog: &catalog,
        backend: &backend,
        index: Some((&index, &embedder)),
        config: BenchConfig::default(),
    };
    run_benchmark(&ctx, &records).await.map_err(|e| e.to_string())
}

pub async fn metric_closure() -> Outcome {
    let start = Instant::now();
    let out = bench_with("replay.jsonl").await?;
    let elapsed = start.elapsed();
    let m = &out.report.overall;
    let all = [m.sr_t, m.sr_act, m.sr_args, m.sr, m.iou];
    if m.n != 50 || all.iter().any(|&v| v != 1.0) {
        return Err(format!("n={} metrics={all:?}", m.n));
    }
    if elapsed >= Duration::from_secs(5) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("n=50, all five metrics 1.0, {elapsed:.2?}"))
}

pub async fn controlled_degradation() -> Outcome {
    let action = bench_with("corrupt_action.jsonl").await?.report.overall;
    if action.sr_act != 0.8 || action.sr_t != 1.0 {
        return Err(format!("action corruption: SR_act={} SR_t={}", action.sr_act, action.sr_t));
    }
    let thought = bench_with("corrupt_thought.jsonl").await?.report.overall;
    if thought.sr_t != 0.9 {
        return Err(format!("thought corruption: SR_t={}", thought.sr_t));
    }
    Ok(format!("SR_act={:.3} SR_t={:.3}; SR_t={:.3} after thought flips", action.sr_act, action.sr_t, thought.sr_t))
}

pub fn bleu_oracle_check() -> Outcome {
    use agentloom_core::evalharness::bleu;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // vocabulary of 10 tokens, lengths up to 20
    let vocab = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
    let sentence = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(0..=20);
        (0..n).map(|_| *vocab.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
    };
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (c, r) = (sentence(&mut rng), sentence(&mut rng));
        let (got, want) = (bleu(&c, &r), bleu_oracle(&c, &r));
        let err = (got - want).abs();
        if err > 1e-9 || !(0.0..=1.0).contains(&got) {
            return Err(format!("bleu({c:?}, {r:?}) = {got}, oracle {want}"));
        }
        worst = worst.max(err);
    }
    for _ in 0..50 {
        let s = random_sentence(&mut rng, 20);
        if !s.is_empty() && bleu(&s, &s) != 1.0 {
            return Err(format!("identity failed for {s:?}"));
        }
    }
    if bleu("x y z w", "a b c d") != 0.0 {
        return Err("disjoint pair did not score 0".into());
    }
    Ok(format!("1000 pairs, max |diff| {worst:.1e}; identity 1.0, disjoint 0.0"))
}

/// Three tools with ten distinct queries each.
pub fn retrieval_documents() -> Vec<ToolDocument> {
    let subjects = [
        "skier", "surfer", "boxer", "climber", "dancer", "cyclist", "golfer", "diver", "runner", "archer",
    ];
    let templates = [
        ("Body Pose Estimation", "estimate the body pose of the {}"),
        ("Body Shape Measurement", "how tall and heavy is the {}"),
        ("Image Caption", "describe the photo showing a {}"),
    ];
    templates
        .iter()
        .map(|(tool, template)| ToolDocument {
            tool_name: tool.to_string(),
            qa_pairs: subjects
                .iter()
                .map(|s| QaPair {
                    query: template.replace("{}", s),
                    invocation: ToolInvocation::call(tool, "example.jpg"),
                })
                .collect(),
        })
        .collect()
}

/// Brute-force ranking: embed by hand from the embedder's bucket function,
/// dot every stored vector, stable-sort descending.
fn scan(embedder: &HashingEmbedder, stored: &[Vec<f64>], query: &str) -> Vec<(usize, f64)> {
    let embed = |text: &str| {
        let mut v = vec![0.0; 256];
        for token in text.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            v[embedder.bucket(token)] += 1.0;
        }
        v
    };
    let q = embed(query);
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored: Vec<(usize, f64)> = stored
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let sn = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = q.iter().zip(s).map(|(a, b)| a * b).sum();
            (i, if qn == 0.0 || sn == 0.0 { 0.0 } else { dot / (qn * sn) })
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    scored
}

pub async fn retrieval_oracle() -> Outcome {
    let embedder = HashingEmbedder::default();
    let docs = retrieval_documents();
    let index = RetrievalIndex::build(&embedder, &docs).await.map_err(|e| e.to_string())?;
    let queries: Vec<String> = docs.iter().flat_map(|d| d.qa_pairs.iter().map(|p| p.query.clone())).collect();
    let stored: Vec<Vec<f64>> = queries
        .iter()
        .map(|q| {
            let mut v = vec![0.0; 256];
            for token in q.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
                v[embedder.bucket(token)] += 1.0;
            }
            v
        })
        .collect();

    let words: Vec<&str> = queries.iter().flat_map(|q| q.split(' ')).chain(["jump", "photo", "the"]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..200 {
        let n = rng.gen_range(1..=6);
        let query = (0..n).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ");
        let got = index.retrieve(&embedder, &query, index.len()).await.map_err(|e| e.to_string())?;
        let want = scan(&embedder, &stored, &query);
        if got.len() != want.len() {
            return Err(format!("case {case}: {} results, scan has {}", got.len(), want.len()));
        }
        for (pos, ((example, score), (_, want_score))) in got.iter().zip(&want).enumerate() {
            let id = index.examples().iter().position(|e| e.id == example.id).unwrap();
            let own = want.iter().find(|(i, _)| *i == id).unwrap().1;
            // positions may only differ among equal scores
            if (score - want_score).abs() > 1e-12 || (own - want_score).abs() > 1e-12 {
                return Err(format!("case {case} {query:?}: rank {pos} is {} ({score}), scan has {want_score}", example.id));
            }
        }
        let ids: Vec<usize> = got
            .iter()
            .map(|(e, _)| index.examples().iter().position(|x| x.id == e.id).unwrap())
            .collect();
        for w in got.windows(2).zip(ids.windows(2)) {
            let ((a, b), (ia, ib)) = ((w.0[0].1, w.0[1].1), (w.1[0], w.1[1]));
            if a < b || (a == b && ia > ib) {
                return Err(format!("case {case}: order or tie-break violated at {ia}/{ib}"));
            }
        }
    }
    for (i, q) in queries.iter().enumerate() {
        let top = index.retrieve(&embedder, q, 1).await.map_err(|e| e.to_string())?;
        if top[0].0.id != index.examples()[i].id || (top[0].1 - 1.0).abs() > 1e-12 {
            return Err(format!("stored query {q:?} retrieved {} at {}", top[0].0.id, top[0].1));
        }
    }
    Ok(format!("200 random queries match the scan; {}/{} stored queries rank 1 at 1.0", queries.len(), queries.len()))
}

/// A mock that sleeps before answering, so waves really overlap.
struct SlowMock {
    inner: MockAdapter,
    delay: Duration,
}

#[async_trait]
impl ToolAdapter for SlowMock {
    fn tool_name(&self) -> &str {
        self.inner.tool_name()
    }

    async fn invoke(&self, args: &ToolArgs) -> Result<ArtifactValue, ToolError> {
        tokio::time::sleep(self.delay).await;
        self.inner.call(args)
    }
}

pub async fn executor_equivalence() -> Outcome {
    let start = Instant::now();
    let catalog = ToolCatalog::builtin();
    let images = vec!["example.jpg".to_string()];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut partial = 0;
    for case in 0..100 {
        let graph = random_graph(&mut rng, &catalog, 8);
        let validated = validate_graph(&graph, &catalog).map_err(|e| format!("case {case}: {e}: {}", graph.render()))?;
        let mut config = MockConfig {
            seed: rng.gen(),
            ..MockConfig::default()
        };
        if rng.gen_bool(0.3) {
            config.fail_on = vec![graph.steps[rng.gen_range(0..graph.steps.len())].tool.clone()];
        }
        let mut adapters = AdapterSet::new();
        for card in catalog.cards() {
            adapters.insert(Arc::new(SlowMock {
                inner: MockAdapter::new(&card.name, config.clone()),
                delay: Duration::from_millis(rng.gen_range(0..3)),
            }));
        }
        let mut invocations = vec![0usize; graph.steps.len()];
        let trace = execute_graph(&validated, &adapters, &images, &ExecConfig::default(), &mut |e| {
            if let agentloom_core::executor::ExecEvent::StepStarted { step_id, .. } = e {
                invocations[step_id] += 1;
            }
        })
        .await
        .map_err(|e| e.to_string())?;
        let reference = sequential_reference(&validated, &config, &images);
        for (i, (r, (status, output))) in trace.results.iter().zip(&reference).enumerate() {
            if r.status != *status || r.output != *output {
                return Err(format!("case {case} step {i}: {:?} vs reference {status:?} in {}", r.status, graph.render()));
            }
        }
        if !edges_respected(&validated, &trace.results) {
            return Err(format!("case {case}: an edge ordering is violated"));
        }
        if invocations.iter().any(|&n| n > 1) {
            return Err(format!("case {case}: a step was invoked twice"));
        }
        let contained = validated.graph.edges().iter().all(|&(u, v)| trace.results[u].is_ok() || !trace.results[v].is_ok());
        if !contained {
            return Err(format!("case {case}: a failed step has an ok dependent"));
        }
        partial += usize::from(!trace.results.iter().all(|r| r.is_ok()));
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("100 DAGs ({partial} with failures) match the sequential reference, {elapsed:.2?}"))
}

pub fn contact_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let n_parts = rng.gen_range(1..=18);
        let parts: Vec<String> = agentloom_core::integration::PART_VOCABULARY[..n_parts].iter().map(|s| s.to_string()).collect();
        let v = rng.gen_range(1..=200);
        let assignment: Vec<usize> = (0..v).map(|_| rng.gen_range(0..n_parts)).collect();
        let map = VertexPartMap::new(parts.clone(), assignment.clone()).map_err(|e| e.to_string())?;
        let contact = super::random_contact(&mut rng, v);
        let got = transform_contact(&contact, &map).map_err(|e| e.to_string())?;
        let want = contact_oracle(contact.bits(), &parts, &assignment);
        if got != want {
            return Err(format!("case {case}: {got:?} vs {want:?}"));
        }
        for c in [ContactVector::zeros(v), ContactVector::new(vec![true; v])] {
            let got = transform_contact(&c, &map).map_err(|e| e.to_string())?;
            if got != contact_oracle(c.bits(), &parts, &assignment) {
                return Err(format!("case {case}: extreme vector gave {got:?}"));
            }
        }
    }
    Ok("100 random maps match the direct scan; zero and all-contact exact".into())
}

fn random_model(rng: &mut ChaCha8Rng) -> ShapeMeasurementModel {
    let mut a = [[0.0; SHAPE_LEN]; 5];
    a.iter_mut().flatten().for_each(|x| *x = rng.gen_range(-2.0..2.0));
    let b = [1.7, 70.0, 0.95, 0.82, 1.0].map(|v: f64| v * rng.gen_range(0.8..1.2));
    ShapeMeasurementModel::new(a, b).expect("finite")
}

fn random_beta(rng: &mut ChaCha8Rng) -> [f64; SHAPE_LEN] {
    std::array::from_fn(|_| rng.gen_range(-3.0..3.0))
}

pub async fn shape_transform() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bundled = ShapeMeasurementModel::bundled();
    let zero = transform_shape(&ShapeParams::zeros(), &bundled).measurements;
    if zero != MeasurementSet::from_array(bundled.offset()) {
        return Err(format!("beta=0 gave {zero:?}"));
    }
    for case in 0..100 {
        let model = random_model(&mut rng);
        let (b1, b2) = (random_beta(&mut rng), random_beta(&mut rng));
        let sum: [f64; SHAPE_LEN] = std::array::from_fn(|i| b1[i] + b2[i]);
        let at = |beta: [f64; SHAPE_LEN]| model.apply(&ShapeParams::new(beta.to_vec()).unwrap());
        let (m1, m2, m12, b) = (at(b1), at(b2), at(sum), model.offset());
        for i in 0..5 {
            let lhs = m12[i] - b[i];
            let rhs = (m1[i] - b[i]) + (m2[i] - b[i]);
            if (lhs - rhs).abs() > 1e-9 {
                return Err(format!("case {case} field {i}: {lhs} vs {rhs}"));
            }
        }
    }

    for case in 0..50 {
        let mut values = [
            rng.gen_range(3.0..9.0),
            rng.gen_range(30.0..150.0),
            rng.gen_range(0.6..1.4),
            rng.gen_range(0.5..1.3),
            rng.gen_range(0.7..1.4),
        ];
        if rng.gen_bool(0.2) {
            values[1] = rng.gen_range(400.0..900.0); // a second flagged field
        }
        let original = reading(MeasurementSet::from_array(values));
        let new_height = rng.gen_range(1.4..2.2);
        // the reply restates some unflagged fields with drifted values
        let mut reply = format!("Height: {new_height:.2}");
        for field in [MeasurementField::Chest, MeasurementField::Waist, MeasurementField::Hip] {
            if rng.gen_bool(0.5) {
                reply.push_str(&format!(", {}: {:.2}", field.label(), rng.gen_range(0.3..2.0)));
            }
        }
        let backend = ScriptedBackend::always(&reply);
        let revision = discriminate_modify(&backend, "How tall is he?", &original, &CompletionRequest::default())
            .await
            .map_err(|e| format!("case {case}: {e}"))?;
        let flagged: Vec<MeasurementField> = original.flags.iter().map(|f| f.field).collect();
        let revised = revision.reading.measurements;
        if format!("{:.2}", revised.height.unwrap()) != format!("{new_height:.2}") {
            return Err(format!("case {case}: height not corrected ({:?})", revised.height));
        }
        for field in MeasurementField::ALL.into_iter().filter(|f| !flagged.contains(f)) {
            let (a, b) = (original.measurements.get(field), revised.get(field));
            if a.map(f64::to_bits) != b.map(f64::to_bits)
                || original.measurements.render_field(field) != revised.render_field(field)
            {
                return Err(format!("case {case}: unflagged {field:?} changed {a:?} -> {b:?}"));
            }
        }
    }
    Ok("beta=0 gives b; linearity holds on 100 pairs; 50/50 modifications preserve unflagged fields".into())
}

fn mutate(rng: &mut ChaCha8Rng, text: &str) -> String {
    let alphabet: Vec<char> = "[]{};,=_.: \n0123456789abcxyzYesNoActionThought\u{e9}\u{1f600}".chars().collect();
    let mut chars: Vec<char> = text.chars().collect();
    for _ in 0..rng.gen_range(1..6) {
        let pos = rng.gen_range(0..=chars.len());
        match rng.gen_range(0..3) {
            0 if pos < chars.len() => {
                chars.remove(pos);
            }
            1 if pos < chars.len() => chars.truncate(pos),
            _ => chars.insert(pos, *alphabet.choose(rng).unwrap()),
        }
    }
    chars.into_iter().collect()
}

pub fn grammar_roundtrip() -> Outcome {
    let catalog = ToolCatalog::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut seeds = Vec::new();
    for case in 0..500 {
        let graph = random_graph(&mut rng, &catalog, 8);
        let text = graph.render();
        let parsed = parse_tool_graph(&text).map_err(|e| format!("case {case}: {e} for {text}"))?;
        let again = parsed.render();
        if again != text {
            return Err(format!("case {case}: {text:?} -> {again:?}"));
        }
        seeds.push(text);
    }
    seeds.push("Thought: Do I need to use a tool? Yes\nAction: Body Pose Estimation\nAction Input: image=example.jpg".into());
    seeds.push("Thought: Do I need to use a tool? No\nAI: hello".into());
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = Vec::new();
    for _ in 0..10_000 {
        let input = if rng.gen_bool(0.2) {
            (0..rng.gen_range(0..60)).map(|_| rng.gen::<char>()).collect()
        } else {
            let seed = seeds.choose(&mut rng).unwrap().clone();
            mutate(&mut rng, &seed)
        };
        let ok = std::panic::catch_unwind(|| {
            let _ = parse_tool_graph(&input);
            let _ = parse_invocation(&input);
            let _ = parse_emission(&input);
        });
        if ok.is_err() {
            crashes.push(input);
        }
    }
    std::panic::set_hook(hook);
    match crashes.first() {
        Some(input) => Err(format!("{} inputs crashed a parser, first: {input:?}", crashes.len())),
        None => Ok("500 graphs round-trip byte-identically; 10000 fuzzed inputs, no crash".into()),
    }
}
