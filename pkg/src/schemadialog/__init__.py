"""Schema-guided dialog engine.

Predicts the next system action by aligning a dialog history to an
explicit task-schema graph, with a classifier baseline, ablation
variants, a zero-shot transfer harness, and a prediction service.
"""

from .corpus import (
    Corpus,
    Dialog,
    Example,
    Speaker,
    Split,
    Turn,
    dump_corpus,
    load_corpus,
    make_examples,
    serialize_context,
    split_leave_one_domain,
    split_leave_one_task,
    split_standard,
)
from .encoder import (
    EncodedSequence,
    EncoderConfig,
    EncoderParams,
    backward,
    encode,
    hashed_encode,
    init_params,
)
from .errors import SchemaDialogError
from .experiments import ExperimentSpec, evaluate_model, run_experiment
from .metrics import MetricReport, accuracy, significance, weighted_f1
from .model import (
    AblationFlags,
    ActionDistribution,
    ActionVocabulary,
    BaselineHead,
    BaselineModel,
    CandidateSet,
    HashedEncoder,
    SamModel,
    TrainableEncoder,
    baseline_forward,
    build_candidate_set,
    load_model,
    parse_flags,
    predict,
    propagate_to_actions,
    sam_forward,
    save_model,
    schema_attention,
)
from .schema import (
    SchemaGraph,
    SchemaNode,
    ValidationReport,
    candidate_nodes,
    dump_schema,
    load_schema,
    next_action,
    node_text_repr,
    to_system_only,
    validate,
)
from .synthetic import SyntheticConfig, generate_synthetic
from .text import TokenSeq, Vocab, build_vocab, tokenize
from .training import Batch, TrainConfig, build_candidates, nll_loss, train

__version__ = "0.1.0"
