"""Memory-network models for clause-level emotion cause extraction."""

__version__ = "0.1.0"

from .corpus import (Clause, CorpusError, Document, EmotionAnnotation, Instance, Token,
                     Vocabulary, build_instances, build_vocabulary, encode_documents,
                     parse_corpus, split_documents, write_corpus)
from .embeddings import (EmbeddingMatrix, SkipgramConfig, load_embeddings, lookup,
                         random_init, train_skipgram)
from .memnet import (AttentionTrace, Gradients, MemnetParams, attention_scores,
                     memnet_backward, memnet_forward, memory_read, softmax_norm)
from .convms import (ConvMSParams, SlotOutputs, conv_scores_first_hop,
                     conv_scores_multi_query, convms_backward, convms_forward, slot_read)
from .training import (TrainConfig, TrainHistory, apply_dropout, bce_loss, gradient_check,
                       sgd_step, train)
from .evaluate import (MetricsReport, PredictionResult, ProtocolConfig, clause_prf,
                       dump_attention, epoch_probability_trace, extract_keyword,
                       keyword_prf, predict_document, run_protocol)
from .model_io import load_model, save_model

__all__ = [name for name in dir() if not name.startswith("_")]
