"""Comment generation with a topic-aware pointer-generator network."""

from ._tpgn import (
    TopicModel,
    TpgnError,
    bleu_1,
    cider_d,
    config_keys,
    diversity_count,
    extract_keywords,
    rank,
    rouge_l,
    run_command,
    score_report,
    sentence_keywords,
    tokenize,
    train_lda,
)

__all__ = [
    "TopicModel",
    "TpgnError",
    "bleu_1",
    "cider_d",
    "config_keys",
    "diversity_count",
    "extract_keywords",
    "rank",
    "rouge_l",
    "run_command",
    "score_report",
    "sentence_keywords",
    "tokenize",
    "train_lda",
]
