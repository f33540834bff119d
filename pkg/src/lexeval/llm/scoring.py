"""Label log-probabilities -> per-option distributions, averaged over orderings."""

from __future__ import annotations

import hashlib
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from lexeval.llm.backends import Backend, BackendError, ScoreRequest
from lexeval.llm.prompts import WORDLEVEL, McqTask, build_prompt

FLOOR_MARGIN = 10.0
TIE_TOLERANCE = 1e-12
_ENUMERATE_LIMIT = 40320  # 8!


@dataclass(frozen=True)
class PermutationPolicy:
    mode: str = "none"
    sample_size: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("full", "sample", "none"):
            raise ValueError(f"unknown permutation mode {self.mode!r}")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "PermutationPolicy":
        """``full``, ``none`` or ``sample:N``."""
        mode, _, n = text.partition(":")
        if mode == "sample":
            return cls("sample", int(n) if n else 10, seed)
        return cls(mode, seed=seed)

    def describe(self) -> str:
        return f"sample:{self.sample_size}" if self.mode == "sample" else self.mode


@dataclass
class OptionDistribution:
    probs: dict[str, float]
    permutations_used: int
    raw: list[dict[str, float]] = field(default_factory=list, repr=False)
    orders: list[tuple[int, ...]] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"probs": self.probs, "permutations_used": self.permutations_used}


def softmax(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    e = np.exp(v - v.max())
    return e / e.sum()


def score_once(
    backend: Backend,
    prompt: str,
    labels: Sequence[str],
    option_ids: Sequence[str] = (),
    meta=None,
) -> dict[str, float]:
    """Log-probability per label at the first output position.

    Labels missing from the returned alternatives get the floor value
    ``min(returned) - 10``.
    """
    returned = backend.top_logprobs(ScoreRequest(prompt, tuple(labels), tuple(option_ids), meta or {}))
    if not returned:
        raise BackendError("response missing logprob data")
    floor = min(returned.values()) - FLOOR_MARGIN
    return {lab: float(returned.get(lab, floor)) for lab in labels}


def _task_seed(task: McqTask, seed: int) -> np.random.Generator:
    digest = hashlib.sha256(
        "\x1f".join([task.template, task.context, task.target, *task.option_ids]).encode("utf-8")
    ).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "little")])


def permutations_for(n: int, policy: PermutationPolicy, rng: np.random.Generator | None = None) -> list[tuple[int, ...]]:
    """Orderings of ``n`` items under ``policy`` (identity first for ``none``)."""
    if policy.mode == "none" or n <= 1:
        return [tuple(range(n))]
    total = math.factorial(n)
    if policy.mode == "full" and total > _ENUMERATE_LIMIT:
        raise ValueError(f"full permutation of {n} options ({total} orders) is too large; use sample:N")
    if policy.mode == "full" or policy.sample_size >= total:
        return list(itertools.permutations(range(n)))
    rng = rng or np.random.default_rng(policy.seed)
    if total <= _ENUMERATE_LIMIT:
        every = list(itertools.permutations(range(n)))
        picks = rng.choice(total, size=policy.sample_size, replace=False)
        return [every[int(i)] for i in picks]
    seen: dict[tuple[int, ...], None] = {}
    while len(seen) < policy.sample_size:
        seen.setdefault(tuple(int(i) for i in rng.permutation(n)), None)
    return list(seen)


def task_orders(task: McqTask, policy: PermutationPolicy) -> list[tuple[int, ...]]:
    rng = _task_seed(task, policy.seed)
    if task.template == WORDLEVEL:
        # the none option stays last; only real meanings move
        n_real = task.n_options - 1
        return [p + (n_real,) for p in permutations_for(n_real, policy, rng)]
    return permutations_for(task.n_options, policy, rng)


def score_with_permutations(
    backend: Backend,
    task: McqTask,
    policy: PermutationPolicy = PermutationPolicy(),
    max_workers: int = 1,
) -> OptionDistribution:
    orders = task_orders(task, policy)
    labels = task.labels()

    def run(order: tuple[int, ...]) -> dict[str, float]:
        prompt = build_prompt(task, order)
        ids = tuple(task.options[k].option_id for k in order)
        return score_once(backend, prompt, labels, ids, task.meta)

    if max_workers > 1 and len(orders) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            raw = list(pool.map(run, orders))
    else:
        raw = [run(o) for o in orders]

    per_option: list[list[float]] = [[] for _ in task.options]
    for order, lps in zip(orders, raw):
        p = softmax([lps[lab] for lab in labels])
        for pos, k in enumerate(order):
            per_option[k].append(float(p[pos]))
    probs = {opt.option_id: math.fsum(v) / len(orders) for opt, v in zip(task.options, per_option)}
    return OptionDistribution(probs, len(orders), raw, orders)


def select(dist: OptionDistribution, tolerance: float = TIE_TOLERANCE) -> str:
    """Arg-max option; near-exact ties go to the earliest canonical option."""
    if not dist.probs:
        raise ValueError("empty distribution")
    best = max(dist.probs.values())
    for oid, p in dist.probs.items():
        if p >= best - tolerance:
            return oid
    raise AssertionError("unreachable")
