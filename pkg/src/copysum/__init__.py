"""Desk-scale summarization with control over verbatim copying.

The package trains a decoder-only Transformer over the concatenated
source+summary sequence, steers how much it copies through per-category
token sampling at training time, and searches/reranks candidate summaries
at decoding time. Everything runs on a from-scratch float64 autodiff core.
"""

from .autodiff import Parameter, Tensor
from .bpe import Vocabulary, train_bpe
from .data import CorpusRecord, SynthConfig, ingest, synth_generate
from .decoding import (
    Hypothesis,
    RerankConfig,
    SearchConfig,
    beam_search,
    best_first_search,
    rerank,
)
from .metrics import RougeScore, copy_rate, rouge_l, rouge_n
from .model import JointSequence, ModelConfig, PrefixLM, build_attention_mask
from .training import SamplingConfig, TrainConfig, TrainingExample, sampling_preset, train

__version__ = "0.1.0"

__all__ = [
    "Parameter",
    "Tensor",
    "Vocabulary",
    "train_bpe",
    "CorpusRecord",
    "SynthConfig",
    "ingest",
    "synth_generate",
    "Hypothesis",
    "RerankConfig",
    "SearchConfig",
    "beam_search",
    "best_first_search",
    "rerank",
    "RougeScore",
    "copy_rate",
    "rouge_l",
    "rouge_n",
    "JointSequence",
    "ModelConfig",
    "PrefixLM",
    "build_attention_mask",
    "SamplingConfig",
    "TrainConfig",
    "TrainingExample",
    "sampling_preset",
    "train",
    "__version__",
]
