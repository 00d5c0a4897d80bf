//! Ingest through evaluation on a small corpus, with logits that force known
//! spans so every answer is predictable.

use bioqa_core::decoder::LogitRecord;
use bioqa_core::ingest::{
    build_pairs, from_squad_json, parse_bioasq, to_squad_json, Abstract, MemoryStore, PairMode, QaPair, Strategy,
    StrategyConfig,
};
use bioqa_core::metrics::{evaluate, GoldStandard};
use bioqa_core::postprocess::{answers_to_json, parse_answers_json};
use bioqa_core::predict::{assemble, audit_question, group_by_question, predict_pair, LogitTable, PredictConfig, Scorer};
use bioqa_core::tokenizer::{encode_qa_pair, EncodeConfig, Feature, Vocab};

const DOC: &str = r#"{"questions": [
  {"id": "f1", "type": "factoid", "body": "Which protein binds gp130?", "exact_answer": [["IL-6", "interleukin 6"]],
   "snippets": [{"text": "IL-6 binds gp130 on most cells.", "document": "http://www.ncbi.nlm.nih.gov/pubmed/11",
                 "beginSection": "abstract", "offsetInBeginSection": 0}]},
  {"id": "l1", "type": "list", "body": "List 2 kinases activated downstream.", "exact_answer": [["JAK1"], ["TYK2"]],
   "snippets": [{"text": "Downstream, JAK1 and TYK2 are activated.", "document": "http://www.ncbi.nlm.nih.gov/pubmed/11",
                 "beginSection": "abstract", "offsetInBeginSection": 0}]},
  {"id": "y1", "type": "yesno", "body": "Is gp130 a receptor subunit?", "exact_answer": "yes",
   "snippets": [{"text": "gp130 is a shared receptor subunit.", "document": "http://www.ncbi.nlm.nih.gov/pubmed/11",
                 "beginSection": "abstract", "offsetInBeginSection": 0}]}
]}"#;

fn store() -> MemoryStore {
    let mut s = MemoryStore::new();
    s.insert(
        Abstract::new(
            "11",
            "Cytokine signalling through gp130",
            "Cytokines act in many tissues. IL-6 binds gp130 on most cells. Downstream, JAK1 and TYK2 are \
             activated. gp130 is a shared receptor subunit. Signalling ends quickly.",
        )
        .unwrap(),
    );
    s
}

/// Logits putting all start and end mass on the first occurrence of
/// `target` in the window, or uniform logits when the window lacks it.
fn forced(f: &Feature, context: &str, target: &str, cls: f64) -> LogitRecord {
    let l = f.max_seq_len();
    let mut s = vec![0.0; l];
    let mut e = vec![0.0; l];
    if let Some(at) = context.find(target) {
        let end = at + target.len();
        let first = f.token_spans.iter().position(|sp| sp.is_some_and(|(a, _)| a == at));
        let last = f.token_spans.iter().position(|sp| sp.is_some_and(|(_, b)| b == end));
        if let (Some(i), Some(j)) = (first, last) {
            s[i] = 40.0;
            e[j] = 40.0;
        }
    }
    LogitRecord {
        pair_id: f.pair_id.clone(),
        window_index: f.window_index,
        start_logits: s,
        end_logits: e,
        cls_logit: cls,
    }
}

#[test]
fn appended_passages_flow_through_to_scores() {
    let parsed = parse_bioasq(DOC).unwrap();
    let store = store();
    let cfg = StrategyConfig::new(Strategy::AppendedSnippet, 1).unwrap();

    // training pairs: offsets sound and stable through the SQuAD layout
    for q in &parsed.questions {
        let pairs = build_pairs(q, &cfg, Some(&store), PairMode::Train).unwrap().pairs;
        assert!(!pairs.is_empty(), "{}", q.id);
        assert!(pairs.iter().all(QaPair::offsets_sound));
        let json = to_squad_json(&pairs, true).unwrap();
        assert_eq!(from_squad_json(&json).unwrap(), pairs);
    }
    let list = &parsed.questions[1];
    let list_pairs = build_pairs(list, &cfg, Some(&store), PairMode::Train).unwrap().pairs;
    assert_eq!(list_pairs.len(), 2, "one pair per answer occurrence");

    // inference pairs in a small window size, so passages span windows
    let mut infer: Vec<QaPair> = Vec::new();
    for q in &parsed.questions {
        infer.extend(build_pairs(q, &cfg, Some(&store), PairMode::Infer).unwrap().pairs);
    }
    let texts: Vec<&str> = infer.iter().flat_map(|p| [p.question.as_str(), p.context.as_str()]).collect();
    let vocab = Vocab::from_corpus(texts, 500).unwrap();
    let pcfg = PredictConfig {
        encode: EncodeConfig {
            max_seq_len: 24,
            doc_stride: 6,
        },
        ..PredictConfig::default()
    };
    let mut records = Vec::new();
    let mut windows = 0;
    for p in &infer {
        let feats = encode_qa_pair(p, &vocab, &pcfg.encode, false).unwrap();
        windows += feats.len();
        for f in &feats {
            let (target, cls) = match p.question_id.as_str() {
                "f1" => ("IL-6", 0.0),
                "l1" if f.window_index % 2 == 0 => ("JAK1", 0.0),
                "l1" => ("TYK2", 0.0),
                _ => ("gp130", 3.0),
            };
            records.push(forced(f, &p.context, target, cls));
        }
    }
    assert!(windows > infer.len(), "expected multi-window passages");
    let table = LogitTable::new(records).unwrap();

    let mut answers = Vec::new();
    for group in group_by_question(&infer) {
        let preds: Vec<_> = group
            .iter()
            .map(|p| predict_pair(p, &vocab, Scorer::Logits(&table), &pcfg).unwrap())
            .collect();
        let audit = audit_question(&group, &preds).unwrap();
        answers.push(assemble(&audit, pcfg.threshold).unwrap());
    }
    let submitted = parse_answers_json(&answers_to_json(&answers).unwrap()).unwrap();
    let gold = GoldStandard::from_parsed(&parsed).unwrap();
    let report = evaluate(&submitted, &gold).unwrap();
    let f = report.factoid.unwrap();
    assert_eq!((f.strict_accuracy, f.mrr), (1.0, 1.0));
    assert_eq!(report.yesno.unwrap().accuracy, 1.0);
    let l = report.list.unwrap();
    assert_eq!(l.mean_recall, 1.0, "{:?}", submitted[1]);
    assert!(report.per_question.iter().all(|q| !q.missing));
}
