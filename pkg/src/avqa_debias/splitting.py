"""Head/tail distribution-shift construction from answer frequencies.

Groups of (task, question_type) samples are kept only when their answer
distribution is imbalanced, measured by normalized Shannon entropy below
a threshold (default 0.9). Within a kept group an answer class is *tail*
when its count is at most ``tail_factor`` times the mean class count
(default 1.2), and *head* otherwise; two-answer groups instead label the
strictly less frequent answer as tail.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO

from .data import CorpusError, GroupKey, QASample, QuestionType, Task, group_samples


class SplitLabel(enum.Enum):
    HEAD = "head"
    TAIL = "tail"


class SplitRule(enum.Enum):
    GENERAL_THRESHOLD = "general_threshold"
    TWO_ANSWER_LOW_FREQUENCY = "two_answer_low_frequency"


class TiePolicy(enum.Enum):
    ERROR = "error"
    BOTH_HEAD = "both_head"


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitConfig:
    entropy_threshold: float = 0.9
    tail_factor: float = 1.2
    epsilon_entropy: float = 0.0
    two_answer_tie: TiePolicy = TiePolicy.ERROR

    def __post_init__(self):
        if not 0.0 < self.entropy_threshold <= 1.0:
            raise ValueError("entropy_threshold must be in (0, 1]")
        if self.tail_factor <= 0:
            raise ValueError("tail_factor must be positive")

    def tail_factor_exact(self) -> Fraction:
        # str() round-trips the decimal the user wrote, so 1.2 becomes 6/5
        # and the count <= factor * mean comparison stays exact for
        # integer counts.
        return Fraction(str(self.tail_factor))


@dataclass(frozen=True)
class AnswerDistribution:
    group: GroupKey
    counts: dict[str, int]
    total: int = field(init=False)
    class_count: int = field(init=False)
    entropy: float = field(init=False)  # nats
    normalized_entropy: float = field(init=False)

    def __post_init__(self):
        if not self.counts:
            raise SplitError(f"empty answer distribution for group {self.group}")
        if any(c < 1 for c in self.counts.values()):
            raise SplitError("zero or negative answer counts are not representable")
        total = sum(self.counts.values())
        n = len(self.counts)
        h = 0.0
        for c in self.counts.values():
            p = c / total
            if p > 0.0:  # defensive; zero-count classes are never stored
                h -= p * math.log(p)
        object.__setattr__(self, "total", total)
        object.__setattr__(self, "class_count", n)
        object.__setattr__(self, "entropy", h)
        # A single-class group is trivially "balanced": normalized entropy
        # is pinned to 1 so any threshold < 1 excludes it.
        hbar = 1.0 if n == 1 else h / math.log(n)
        object.__setattr__(self, "normalized_entropy", hbar)

    @property
    def mean_count(self) -> Fraction:
        return Fraction(self.total, self.class_count)


@dataclass(frozen=True)
class SplitAssignment:
    sample_id: str
    group: GroupKey
    label: SplitLabel
    answer_class: str
    rule: SplitRule


@dataclass
class GroupReport:
    distribution: AnswerDistribution
    retained: bool
    labels: dict[str, SplitLabel] | None
    rule: SplitRule | None


@dataclass
class SplitResult:
    assignments: list[SplitAssignment]
    skipped_groups: list[GroupKey]
    group_reports: list[GroupReport]


def answer_distribution(samples: list[QASample]) -> AnswerDistribution:
    """Answer-class histogram and entropy statistics for one group."""
    if not samples:
        raise SplitError("cannot build an answer distribution from an empty group")
    group = samples[0].group
    counts: dict[str, int] = {}
    for s in samples:
        if s.group != group:
            raise SplitError(
                f"mixed groups in one distribution: {group} vs {s.group}"
            )
        counts[s.answer] = counts.get(s.answer, 0) + 1
    return AnswerDistribution(group=group, counts=counts)


def select_imbalanced_groups(
    dists: list[AnswerDistribution], cfg: SplitConfig = SplitConfig()
) -> list[AnswerDistribution]:
    """Keep groups whose normalized entropy is strictly below the threshold."""
    cutoff = cfg.entropy_threshold - cfg.epsilon_entropy
    return [d for d in dists if d.normalized_entropy < cutoff]


def split_head_tail(
    dist: AnswerDistribution, cfg: SplitConfig = SplitConfig()
) -> tuple[dict[str, SplitLabel], SplitRule]:
    """Label each answer class of one retained group as head or tail."""
    if dist.class_count == 1:
        raise SplitError(
            f"group {dist.group} has a single answer class; no shift is definable"
        )
    if dist.class_count == 2:
        (a, ca), (b, cb) = sorted(dist.counts.items())
        if ca == cb:
            if cfg.two_answer_tie is TiePolicy.ERROR:
                raise SplitError(
                    f"group {dist.group}: two answer classes with equal counts; "
                    "the low-frequency rule cannot break the tie "
                    "(set two_answer_tie=BOTH_HEAD to force head)"
                )
            labels = {a: SplitLabel.HEAD, b: SplitLabel.HEAD}
        elif ca < cb:
            labels = {a: SplitLabel.TAIL, b: SplitLabel.HEAD}
        else:
            labels = {a: SplitLabel.HEAD, b: SplitLabel.TAIL}
        return labels, SplitRule.TWO_ANSWER_LOW_FREQUENCY

    cutoff = cfg.tail_factor_exact() * dist.mean_count
    labels = {
        cls: (SplitLabel.TAIL if Fraction(c) <= cutoff else SplitLabel.HEAD)
        for cls, c in dist.counts.items()
    }
    return labels, SplitRule.GENERAL_THRESHOLD


def assign_splits(
    corpus: list[QASample], cfg: SplitConfig = SplitConfig()
) -> SplitResult:
    """Run the full pipeline: group, measure entropy, filter, label samples.

    Samples in excluded (balanced) groups get no assignment; their groups
    are listed in ``skipped_groups``. Deterministic given corpus order.
    """
    if not corpus:
        raise SplitError("empty corpus")
    groups = group_samples(corpus)
    retained: dict[GroupKey, tuple[dict[str, SplitLabel], SplitRule]] = {}
    skipped: list[GroupKey] = []
    reports: list[GroupReport] = []
    for key, members in groups.items():
        dist = answer_distribution(members)
        if select_imbalanced_groups([dist], cfg):
            try:
                labels, rule = split_head_tail(dist, cfg)
            except SplitError as exc:
                raise SplitError(f"group {key}: {exc}") from exc
            retained[key] = (labels, rule)
            reports.append(GroupReport(dist, retained=True, labels=labels, rule=rule))
        else:
            skipped.append(key)
            reports.append(GroupReport(dist, retained=False, labels=None, rule=None))
    assignments = [
        SplitAssignment(
            sample_id=s.id,
            group=s.group,
            label=retained[s.group][0][s.answer],
            answer_class=s.answer,
            rule=retained[s.group][1],
        )
        for s in corpus
        if s.group in retained
    ]
    return SplitResult(assignments=assignments, skipped_groups=skipped, group_reports=reports)


def write_splits(assignments: list[SplitAssignment], stream: IO[bytes]) -> None:
    """Write assignments as JSONL: id, task, question_type, answer, split, rule."""
    for a in assignments:
        obj = {
            "id": a.sample_id,
            "task": a.group.task.value,
            "question_type": a.group.question_type.value,
            "answer": a.answer_class,
            "split": a.label.value,
            "rule": a.rule.value,
        }
        stream.write(json.dumps(obj, ensure_ascii=False).encode("utf-8") + b"\n")


def read_splits(stream: IO[bytes]) -> list[SplitAssignment]:
    """Parse a splits JSONL file back into assignments."""
    out: list[SplitAssignment] = []
    for lineno, raw in enumerate(stream, start=1):
        raw = raw.rstrip(b"\r\n")
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorpusError(f"malformed splits line: {exc}", lineno) from exc
        try:
            out.append(
                SplitAssignment(
                    sample_id=obj["id"],
                    group=GroupKey(task=Task(obj["task"]), question_type=QuestionType(obj["question_type"])),
                    label=SplitLabel(obj["split"]),
                    answer_class=obj["answer"],
                    rule=SplitRule(obj["rule"]),
                )
            )
        except (KeyError, ValueError) as exc:
            raise CorpusError(f"invalid splits record: {exc}", lineno) from exc
    return out


def group_report_json(result: SplitResult) -> dict:
    """Side-channel per-group statistics: entropy, mean count, retained flag, labels."""
    groups = []
    for rep in result.group_reports:
        dist = rep.distribution
        groups.append(
            {
                "task": dist.group.task.value,
                "question_type": dist.group.question_type.value,
                "class_count": dist.class_count,
                "total": dist.total,
                "entropy_nats": dist.entropy,
                "normalized_entropy": dist.normalized_entropy,
                "mean_count": float(dist.mean_count),
                "retained": rep.retained,
                "rule": rep.rule.value if rep.rule else None,
                "labels": {k: v.value for k, v in sorted(rep.labels.items())} if rep.labels else None,
            }
        )
    return {"schema_version": 1, "groups": groups}
