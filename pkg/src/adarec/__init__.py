"""Adaptive LLM recommendation pipeline.

Narrative profiling of tabular users, staged cosine retrieval, causal
feature discovery with mutual-information ranking, structured reasoning
prompts for a pluggable LLM backend, and offline evaluation.
"""

__version__ = "0.1.0"

from .dataset import (  # noqa: F401
    Dataset,
    DistributionSummary,
    FeatureDescriptor,
    FeatureSchema,
    Record,
    compute_summaries,
    load_csv,
    write_csv,
)
from .profiling import (  # noqa: F401
    NarrativeProfile,
    build_profiling_prompt,
    generate_profile,
    load_expert_profiles,
    render_distribution_text,
)
from .retrieval import (  # noqa: F401
    NeighborSet,
    NumericVector,
    VectorLayout,
    cosine_similarity,
    select_representative_cases,
    select_stages,
    vectorize,
)
from .importance import MIScore, discretize, mutual_information, rank_features  # noqa: F401
from .causal import (  # noqa: F401
    CausalFeatureSet,
    CITestResult,
    PartialAncestralGraph,
    Skeleton,
    causal_features,
    ci_test,
    encode_dataset,
    fci_skeleton,
    orient_pag,
)
from .reasoning import (  # noqa: F401
    AblationFlags,
    PromptBundle,
    Recommendation,
    TaskSpec,
    assemble_prompt,
    parse_response,
    recommend,
)
from .llm_client import (  # noqa: F401
    Backend,
    CompletionRequest,
    CompletionResponse,
    LiveBackend,
    LlmSettings,
    MockBackend,
    ReplayBackend,
    canonical_hash,
    complete,
)
from .evaluation import BinaryMetrics, CtrResult, binary_metrics, expected_ctr  # noqa: F401
from .synth import Mechanism, ScmSpec, generate, make_pipeline_fixture  # noqa: F401
