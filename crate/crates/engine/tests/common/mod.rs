#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use eyeqa_core::corpus::{chunk_corpus, Document, DocumentKind, SplitterConfig};
use eyeqa_core::evalkit::{parse_question_bank, BankMode, EvalQuestion};
use eyeqa_engine::gateway::{BackendConfig, Gateway, MockScript};
use eyeqa_engine::{Engine, RetrievalSource, Retriever};

/// Matches the mock default so the standard engine's embedder fits the index.
pub const DIM: usize = eyeqa_core::index::DEFAULT_DIM;

pub fn toy_documents() -> Vec<Document> {
    let doc = |id: &str, text: &str| Document {
        id: id.into(),
        text: text.into(),
        kind: DocumentKind::Freeform,
    };
    vec![
        doc(
            "myopia",
            "Myopia is nearsightedness: distant objects look blurred while near vision stays clear.\n\n\
             Myopia progression in children can be slowed with low-dose atropine drops and more time outdoors.\n\n\
             Myopia is not reversible, but glasses, contact lenses or refractive surgery correct the blur.",
        ),
        doc(
            "glaucoma",
            "Glaucoma damages the optic nerve, usually because intraocular pressure is too high.\n\n\
             Glaucoma often has no early symptoms, so regular pressure checks matter after age forty.\n\n\
             Glaucoma treatment lowers eye pressure with drops, laser trabeculoplasty or surgery.",
        ),
        doc(
            "cataract",
            "A cataract is clouding of the natural lens that makes vision dim and glary.\n\n\
             Cataract surgery replaces the cloudy lens with a clear artificial intraocular lens.",
        ),
        doc(
            "detachment",
            "Retinal detachment presents with flashes, floaters and a curtain over the vision.\n\n\
             Retinal detachment is an emergency that needs prompt surgical repair.",
        ),
    ]
}

pub fn embedder() -> Gateway {
    Gateway::new(BackendConfig {
        embedding_dim: DIM,
        ..BackendConfig::default()
    })
    .unwrap()
}

pub async fn toy_retriever() -> Retriever {
    let chunks = chunk_corpus(&toy_documents(), &SplitterConfig::new(120, 20).unwrap());
    Retriever::build(&chunks, &embedder()).await.unwrap()
}

/// Standard variants on mock backends, with the toy corpus as the book
/// index and `script` answering every chat call.
pub async fn toy_engine(script: MockScript) -> Engine {
    let mut retrievers = BTreeMap::new();
    retrievers.insert(RetrievalSource::Book, Arc::new(toy_retriever().await));
    Engine::standard_mock(script, retrievers).unwrap()
}

pub fn toy_bank() -> Vec<EvalQuestion> {
    let text = r#"{"id":"t1","disease":"myopia","persona":"patient","domain":"treatment_and_prevention","text":"How can myopia progression in children be slowed?"}
{"id":"t2","disease":"glaucoma","persona":"medical_student","domain":"treatment_and_prevention","text":"What treatments lower eye pressure in glaucoma?"}
{"id":"t3","disease":"cataract","persona":"patient","domain":"treatment_and_prevention","text":"What happens during cataract surgery?"}
"#;
    parse_question_bank(text, BankMode::Lenient).unwrap()
}
