"""Log-augmented dense retrieval.

Fuses dense (or BM25) document scores with click-log evidence gathered from
the most similar logged queries, plus the training losses, ranking metrics,
and regression analysis used to study the approach.
"""

__version__ = "0.1.0"

from .corpus import (ClickLog, ClickRecord, Document, Query, Triple, group_of,
                     load_click_log, load_documents, load_queries, load_triples,
                     subsample_queries)
from .embed import (EmbeddingMatrix, HashingEmbedder, LookupEmbedder, dot,
                    hash_embed, load_embeddings, save_embeddings)
from .evaluation import (Qrels, build_dctr_qrels, build_raw_qrels, evaluate,
                         mrr, ndcg_at_k, recall_at_k)
from .fusion import (FusionConfig, LaderTrace, fuse, lader_score, run_queries,
                     softmax, write_run)
from .index import FlatIndex, ScoredList, batch_search, build_index, load_index, \
    save_index, search
from .lexical import InvertedIndex, bm25_search, build_lexical
from .losses import LossBatch, LossGrads, combined_loss, inbatch_nll, triplet_loss
from .synthbench import SynthData, SynthSpec, generate, write_fixture

__all__ = [
    "__version__",
    "ClickLog", "ClickRecord", "Document", "Query", "Triple",
    "group_of", "load_click_log", "load_documents", "load_queries",
    "load_triples", "subsample_queries",
    "EmbeddingMatrix", "HashingEmbedder", "LookupEmbedder", "dot",
    "hash_embed", "load_embeddings", "save_embeddings",
    "Qrels", "build_dctr_qrels", "build_raw_qrels", "evaluate",
    "mrr", "ndcg_at_k", "recall_at_k",
    "FusionConfig", "LaderTrace", "fuse", "lader_score", "run_queries",
    "softmax", "write_run",
    "FlatIndex", "ScoredList", "batch_search", "build_index", "load_index",
    "save_index", "search",
    "InvertedIndex", "bm25_search", "build_lexical",
    "LossBatch", "LossGrads", "combined_loss", "inbatch_nll", "triplet_loss",
    "SynthData", "SynthSpec", "generate", "write_fixture",
]
