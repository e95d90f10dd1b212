"""Hidden-population sampling over attributed query APIs.

Core pieces: entity datasets with hidden-property oracles (`dataset`), the
conjunctive query lattice (`query`), a simulated paginated API (`simapi`),
budgeted samplers including the tree-guided Thompson sampler (`samplers`),
and the replicated-experiment harness (`harness`).
"""

from .dataset import (
    AttributeSchema,
    Dataset,
    DatasetError,
    EntityRecord,
    HiddenPropertySpec,
    TransformSpec,
    apply_transform,
    load_dataset,
)
from .harness import (
    ExperimentSpec,
    FileSource,
    ablation,
    normalized_recall,
    recall,
    run_experiment,
    throughput_rate,
    true_precision_map,
)
from .query import Query, is_generalization, matches, root_query, specialize
from .samplers import (
    QueryPool,
    QueryStats,
    SampleLog,
    SamplerConfig,
    expected_reward,
    run,
    thompson_draw,
)
from .simapi import ApiConfig, ApiResponse, BudgetLedger, SimulatedApi, build_index
from .synth import SynthSpec, generate

__version__ = "0.1.0"
