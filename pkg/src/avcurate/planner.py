"""Deterministic generator of the three-stage progressive training plan.

Stage 1 is text-to-audio only; stage 2 interleaves single-task minibatches
drawn from a categorical task policy; stage 3 keeps the policy and adds the
two robustness augmentations (prompt-token dropout and off-screen mixing)
as per-item directives. Plans stop at the data-plan boundary: steps name
items and augmentations, never tensors.

Every stochastic decision pulls, in a documented order, from one split-mix
generator seeded by the caller: (1) the task draw, (2) any epoch reshuffle
of the drawn task's dataset, (3) per item, dropout coin flips token by
token, then the off-screen coin flip and pool pick. Plans are therefore
byte-identical across runs and platforms for identical inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import BadStageOrder, EmptyPool, NotSimplex, UnknownDataset
from .rng import SplitMix64

SIMPLEX_TOLERANCE = 1e-9


class Task(str, Enum):
    T2A = "T2A"
    V2A = "V2A"
    VT2A = "VT2A"


TASK_ORDER = (Task.T2A, Task.V2A, Task.VT2A)


class StageId(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"


@dataclass(frozen=True)
class SamplingPolicy:
    pi_t2a: float
    pi_v2a: float
    pi_vt2a: float

    @classmethod
    def point_mass_t2a(cls) -> "SamplingPolicy":
        return cls(1.0, 0.0, 0.0)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.pi_t2a, self.pi_v2a, self.pi_vt2a)


def validate_policy(policy: SamplingPolicy) -> None:
    weights = policy.as_tuple()
    if any(w < 0 for w in weights):
        raise NotSimplex(f"negative weight in {weights}")
    if abs(sum(weights) - 1.0) > SIMPLEX_TOLERANCE:
        raise NotSimplex(f"weights {weights} sum to {sum(weights)}, not 1")


@dataclass
class AugmentConfig:
    text_dropout_p: float = 0.3
    offscreen_mix_p: float = 0.3
    offscreen_pool: str = ""
    prompt_template: str = ", with {caption} in the background"
    mix_gain_db: float = -3.0

    def __post_init__(self):
        if not 0.0 <= self.text_dropout_p <= 1.0:
            raise ValueError("text_dropout_p must be in [0, 1]")
        if not 0.0 <= self.offscreen_mix_p <= 1.0:
            raise ValueError("offscreen_mix_p must be in [0, 1]")


@dataclass
class StagePlan:
    stage: StageId
    n_steps: int
    policy: SamplingPolicy
    batch_size: int = 1
    augment: Optional[AugmentConfig] = None

    def __post_init__(self):
        if self.n_steps <= 0:
            raise ValueError("n_steps must be positive")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.stage == StageId.S1:
            self.policy = SamplingPolicy.point_mass_t2a()
        validate_policy(self.policy)
        if self.augment is not None and self.stage != StageId.S3:
            raise ValueError("augmentations are S3-only")


@dataclass
class DatasetItem:
    id: str
    prompt: str = ""
    caption: str = ""
    video_id: str = ""
    audio_id: str = ""


@dataclass
class Dataset:
    id: str
    task: Optional[Task] = None
    items: list[DatasetItem] = field(default_factory=list)


@dataclass
class StepDescriptor:
    step_index: int
    stage: StageId
    task: Task
    dataset_id: str
    batch_size: int
    item_ids: list[str]
    augmentations: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "stage": self.stage.value,
            "task": self.task.value,
            "dataset_id": self.dataset_id,
            "batch_size": self.batch_size,
            "item_ids": list(self.item_ids),
            "augmentations": list(self.augmentations),
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ": "))


# --- the sampling primitives --------------------------------------------------

def sample_task(rng: SplitMix64, policy: SamplingPolicy) -> Task:
    """Inverse-CDF draw over the fixed task order; a draw landing exactly on
    a CDF boundary belongs to the later interval."""
    validate_policy(policy)
    u = rng.uniform()
    cumulative = 0.0
    for task, weight in zip(TASK_ORDER, policy.as_tuple()):
        cumulative += weight
        if u < cumulative:
            return task
    return TASK_ORDER[-1]


def text_dropout(tokens: list[str], p: float, rng: SplitMix64) -> tuple[list[str], list[int]]:
    """Independently delete each token with probability p; order preserved.
    Returns (kept tokens, keep mask)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("dropout probability must be in [0, 1]")
    kept: list[str] = []
    mask: list[int] = []
    for token in tokens:
        keep = rng.uniform() >= p
        mask.append(1 if keep else 0)
        if keep:
            kept.append(token)
    return kept, mask


def offscreen_augment(item_id: str, overlay: DatasetItem, template: str,
                      gain_db: float = -3.0) -> dict:
    """Directive telling the materializer to mix an overlay under the sample
    and extend the prompt to describe it; the waveform mix itself happens at
    materialization time."""
    return {
        "kind": "OffscreenMix",
        "item_id": item_id,
        "overlay_id": overlay.id,
        "gain_db": gain_db,
        "prompt_suffix": template.format(caption=overlay.caption),
    }


# --- plan generation ------------------------------------------------------------

_STAGE_RANK = {StageId.S1: 1, StageId.S2: 2, StageId.S3: 3}


def _check_stage_order(stages: list[StagePlan]) -> None:
    if not stages:
        raise BadStageOrder("plan needs at least one stage")
    ranks = [_STAGE_RANK[s.stage] for s in stages]
    if ranks != sorted(ranks) or len(set(ranks)) != len(ranks):
        raise BadStageOrder(f"stages out of order: {[s.stage.value for s in stages]}")
    for rank in ranks:
        if rank > 1 and rank - 1 not in ranks:
            raise BadStageOrder(f"stage S{rank} requires S{rank - 1} before it")


class _EpochSampler:
    """Without-replacement batches over one dataset, reshuffled per epoch."""

    def __init__(self, dataset: Dataset, rng: SplitMix64):
        self.dataset = dataset
        self._rng = rng
        self._order: list[int] = []
        self._cursor = 0

    def next_batch(self, size: int) -> list[DatasetItem]:
        size = min(size, len(self.dataset.items))
        batch = []
        for _ in range(size):
            if self._cursor >= len(self._order):
                self._order = list(range(len(self.dataset.items)))
                self._rng.shuffle(self._order)
                self._cursor = 0
            batch.append(self.dataset.items[self._order[self._cursor]])
            self._cursor += 1
        return batch


def _resolve_task_datasets(stages: list[StagePlan],
                           datasets: dict[str, Dataset]) -> dict[Task, Dataset]:
    by_task: dict[Task, Dataset] = {}
    for dataset in datasets.values():
        if dataset.task is not None:
            if dataset.task in by_task:
                raise UnknownDataset(
                    f"two datasets claim task {dataset.task.value}: "
                    f"{by_task[dataset.task].id} and {dataset.id}")
            by_task[dataset.task] = dataset
    needed: set[Task] = set()
    for stage in stages:
        for task, weight in zip(TASK_ORDER, stage.policy.as_tuple()):
            if weight > 0:
                needed.add(task)
    for task in needed:
        if task not in by_task:
            raise UnknownDataset(f"no dataset registered for task {task.value}")
        if not by_task[task].items:
            raise UnknownDataset(f"dataset {by_task[task].id} for {task.value} is empty")
    return by_task


def make_plan(stages: list[StagePlan], seed: int,
              datasets: dict[str, Dataset]) -> Iterator[StepDescriptor]:
    """Yield the full step stream for the staged schedule.

    Exactly one task (and one dataset) per step; augmentation directives
    appear only in S3 steps.
    """
    _check_stage_order(stages)
    by_task = _resolve_task_datasets(stages, datasets)
    for stage in stages:
        if stage.stage == StageId.S3 and stage.augment is not None:
            aug = stage.augment
            if aug.offscreen_mix_p > 0:
                pool = datasets.get(aug.offscreen_pool)
                if pool is None:
                    raise UnknownDataset(f"off-screen pool {aug.offscreen_pool!r} not registered")
                if not pool.items:
                    raise EmptyPool(f"off-screen pool {aug.offscreen_pool!r} is empty")

    rng = SplitMix64(seed)
    samplers = {task: _EpochSampler(ds, rng) for task, ds in by_task.items()}
    step_index = 0
    for stage in stages:
        aug = stage.augment if stage.stage == StageId.S3 else None
        pool = datasets[aug.offscreen_pool] if aug and aug.offscreen_mix_p > 0 else None
        for _ in range(stage.n_steps):
            task = sample_task(rng, stage.policy)
            batch = samplers[task].next_batch(stage.batch_size)
            directives: list[dict] = []
            if aug is not None:
                for item in batch:
                    if aug.text_dropout_p > 0:
                        _, mask = text_dropout(item.prompt.split(), aug.text_dropout_p, rng)
                        directives.append(
                            {"kind": "TextDropout", "item_id": item.id, "keep": mask})
                    if aug.offscreen_mix_p > 0 and rng.uniform() < aug.offscreen_mix_p:
                        overlay = pool.items[rng.randrange(len(pool.items))]
                        directives.append(offscreen_augment(
                            item.id, overlay, aug.prompt_template, aug.mix_gain_db))
            yield StepDescriptor(
                step_index=step_index,
                stage=stage.stage,
                task=task,
                dataset_id=by_task[task].id,
                batch_size=len(batch),
                item_ids=[item.id for item in batch],
                augmentations=directives,
            )
            step_index += 1


def write_plan(steps: Iterable[StepDescriptor], path: str | Path) -> int:
    count = 0
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for step in steps:
            fh.write(step.to_json_line() + "\n")
            count += 1
    tmp.replace(path)
    return count


# --- manifest bridge ---------------------------------------------------------------

def dataset_from_manifest(entries, dataset_id: str,
                          task: Optional[Task] = None) -> Dataset:
    """Build a plan dataset from curated manifest entries.

    Only Accepted/Reviewed samples are eligible; Discarded ids can never
    re-enter a training plan.
    """
    from .core import Status  # local import keeps the module order acyclic

    items = []
    for entry in entries:
        if entry.status not in (Status.ACCEPTED, Status.REVIEWED):
            continue
        caption = entry.caption.text if entry.caption else ""
        items.append(DatasetItem(
            id=entry.id,
            prompt=caption,
            caption=caption,
            video_id=entry.media.video_path or "",
            audio_id=entry.media.audio_path,
        ))
    return Dataset(id=dataset_id, task=task, items=items)


# --- config parsing ---------------------------------------------------------------

def policy_from_dict(raw: dict) -> SamplingPolicy:
    return SamplingPolicy(
        pi_t2a=float(raw.get("pi_t2a", 0.0)),
        pi_v2a=float(raw.get("pi_v2a", 0.0)),
        pi_vt2a=float(raw.get("pi_vt2a", 0.0)),
    )


def plan_config_from_dict(raw: dict) -> tuple[list[StagePlan], dict[str, Dataset]]:
    stages = []
    for stage_raw in raw.get("stages", []):
        augment = None
        if stage_raw.get("augment"):
            augment = AugmentConfig(**stage_raw["augment"])
        stages.append(StagePlan(
            stage=StageId(stage_raw["stage"]),
            n_steps=int(stage_raw["n_steps"]),
            policy=policy_from_dict(stage_raw.get("policy", {"pi_t2a": 1.0})),
            batch_size=int(stage_raw.get("batch_size", 1)),
            augment=augment,
        ))
    datasets: dict[str, Dataset] = {}
    for ds_raw in raw.get("datasets", []):
        items = [DatasetItem(
            id=i["id"],
            prompt=i.get("prompt", ""),
            caption=i.get("caption", ""),
            video_id=i.get("video_id", ""),
            audio_id=i.get("audio_id", ""),
        ) for i in ds_raw.get("items", [])]
        datasets[ds_raw["id"]] = Dataset(
            id=ds_raw["id"],
            task=Task(ds_raw["task"]) if ds_raw.get("task") else None,
            items=items,
        )
    return stages, datasets
