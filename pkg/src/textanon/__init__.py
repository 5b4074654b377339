"""Named-entity anonymisation with a linear-chain CRF tagger."""

__version__ = "0.1.0"

from .anonymizer import (
    AuditRecord,
    ConsistencyMap,
    PseudonymLexicon,
    Strategy,
    StrategyKind,
    anonymize_document,
    anonymize_raw_text,
    anonymize_sentence,
)
from .corpus import (
    Corpus,
    CorpusFormat,
    EntitySpan,
    Sentence,
    TagSchema,
    Token,
    decode_spans,
    decode_tags,
    encode_spans,
    parse_corpus,
    read_corpus,
    split_corpus,
    write_corpus,
)
from .crf import (
    CrfModel,
    CrfTagger,
    Posterior,
    TrainConfig,
    load_model,
    log_partition,
    nll_and_gradient,
    posteriors,
    save_model,
    score_sequence,
    sequence_probability,
    tag_sentence,
    train,
    viterbi,
)
from .features import (
    EncodedSentence,
    FeatureIndex,
    FeatureTemplateConfig,
    build_feature_index,
    encode_sentence,
    extract_features,
)
from .metrics import Counts, EvalReport, f1, precision, recall, span_counts, token_counts, weighted_report
from .tagger import SequenceTagger
