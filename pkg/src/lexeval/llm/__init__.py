"""Prompting, backend access and multiple-choice scoring."""

from lexeval.llm.backends import (
    API_KEY_ENV,
    BackendConfig,
    BackendError,
    HttpBackend,
    OracleBackend,
    PositionalBackend,
    RetryPolicy,
    ScoreRequest,
    UniformBackend,
    make_backend,
    meta_resolver,
)
from lexeval.llm.cache import CachedBackend, ResponseCache, cache_key
from lexeval.llm.prompts import (
    ESSAY,
    NONE_ID,
    SEMANTIC,
    SENTENCE,
    WORDLEVEL,
    McqOption,
    McqTask,
    PromptError,
    build_prompt,
    build_semantic_prompt,
    build_wordlevel_prompt,
)
from lexeval.llm.scoring import (
    OptionDistribution,
    PermutationPolicy,
    permutations_for,
    score_once,
    score_with_permutations,
    select,
    softmax,
)
