mod common;

use common::criteria;

#[tokio::test]
async fn replayed_golds_score_perfectly() {
    criteria::metric_closure().await.unwrap();
}

#[tokio::test]
async fn corruptions_degrade_exactly() {
    criteria::controlled_degradation().await.unwrap();
}

#[test]
fn bleu_matches_oracle() {
    criteria::bleu_oracle_check().unwrap();
}

#[tokio::test]
async fn retrieval_matches_scan() {
    criteria::retrieval_oracle().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_execution_matches_sequential() {
    criteria::executor_equivalence().await.unwrap();
}

#[test]
fn contact_matches_scan() {
    criteria::contact_equivalence().unwrap();
}

#[tokio::test]
async fn shape_transform_properties() {
    criteria::shape_transform().await.unwrap();
}

#[test]
fn grammar_roundtrip_and_fuzz() {
    criteria::grammar_roundtrip().unwrap();
}
