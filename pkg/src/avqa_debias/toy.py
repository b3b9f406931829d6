"""Desk-scale demonstration of shortcut debiasing on a synthetic task.

The generator plants a uni-modal shortcut: the true label is a function
of the audio and video features jointly, while a channel of the question
feature encodes the label directly with probability ``bias_strength``
during training. Test samples where the shortcut agrees with the label
are the head regime; samples where it disagrees are the tail regime. A
model that memorizes the question shortcut aces the head and fails the
tail, which is exactly what the debiasing objective is meant to prevent.

The classifier is a small numpy network: one affine+ramp encoder per
modality, an affine fusion head producing the answer logits, and one
two-layer perceptron bias learner per modality. Bias learners exist only
at training time; inference uses the encoders and fusion head alone.
"""

from __future__ import annotations

import enum
import math
import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from .data import QASample, QuestionType, Task
from .losses import LogitBundle, MccdConfig, joint_components_stacked
from .scoring import RobustnessReport, score_predictions
from .splitting import SplitAssignment, SplitLabel, SplitRule


class ToyError(ValueError):
    pass


def class_name(label: int) -> str:
    return f"c{label:02d}"


def class_index(name: str) -> int:
    if not name.startswith("c"):
        raise ToyError(f"not a synthetic answer class: {name!r}")
    return int(name[1:])


@dataclass(frozen=True)
class SyntheticConfig:
    num_classes: int = 6
    feature_dim: int = 16
    train_n: int = 4000
    test_n: int = 2000
    bias_strength: float = 0.9
    tail_fraction: float = 0.3
    noise_scale: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ToyError("need at least 2 answer classes")
        if not 0.0 <= self.bias_strength <= 1.0:
            raise ToyError("bias_strength must lie in [0, 1]")
        if not 0.0 < self.tail_fraction < 1.0:
            raise ToyError("tail_fraction must lie in (0, 1)")
        if self.train_n < 1 or self.test_n < 1:
            raise ToyError("train_n and test_n must be positive")


@dataclass(frozen=True)
class ToySample:
    qa: QASample
    label: int
    audio: np.ndarray
    video: np.ndarray
    question: np.ndarray


class AblationVariant(enum.Enum):
    FULL = "full"
    WITHOUT_DQ = "without_dq"
    WITHOUT_DV = "without_dv"
    WITHOUT_DA = "without_da"
    WITHOUT_MD = "without_md"
    WITHOUT_CG = "without_cg"
    BASELINE_CE_ONLY = "baseline"


@dataclass(frozen=True)
class AblationSpec:
    variant: AblationVariant = AblationVariant.FULL

    def effective(self, cfg: MccdConfig) -> tuple[MccdConfig, tuple[str, ...], int]:
        """Resolve (mccd config, discrepancy heads, rescale share) for the variant."""
        v = self.variant
        heads: tuple[str, ...] = ("audio", "video", "question")
        share = 3
        if v is AblationVariant.WITHOUT_DQ:
            heads, share = ("audio", "video"), 2
        elif v is AblationVariant.WITHOUT_DV:
            heads, share = ("audio", "question"), 2
        elif v is AblationVariant.WITHOUT_DA:
            heads, share = ("video", "question"), 2
        elif v is AblationVariant.WITHOUT_MD:
            cfg = replace(cfg, alpha=0.0)
        elif v is AblationVariant.WITHOUT_CG:
            cfg = replace(cfg, beta=0.0)
        elif v is AblationVariant.BASELINE_CE_ONLY:
            cfg = replace(cfg, alpha=0.0, beta=0.0)
        return cfg, heads, share


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 1e-3
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 20
    mccd: MccdConfig = field(default_factory=MccdConfig)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ToyError("epochs and batch_size must be >= 1")


# Answer-class skew for the synthetic corpus; geometric decay keeps the
# normalized entropy of the training answer distribution below 0.9 so
# the shift-splitter retains the group.
_SKEW_RATIO = 0.55


def _label_probs(num_classes: int) -> np.ndarray:
    w = _SKEW_RATIO ** np.arange(num_classes)
    return w / w.sum()


def _make_sample(sid: str, label: int) -> QASample:
    return QASample(
        id=sid,
        task=Task.AVQA,
        question_type=QuestionType.EXISTENTIAL,
        question=f"synthetic probe {sid}",
        answer=class_name(label),
    )


@dataclass
class SyntheticData:
    train: list[ToySample]
    test: list[ToySample]
    splits: list[SplitAssignment]
    config: SyntheticConfig


def generate_synthetic(cfg: SyntheticConfig = SyntheticConfig()) -> SyntheticData:
    """Build train/test corpora with a planted question shortcut.

    The label factors into an audio cluster and a video cluster, so
    neither modality alone determines it; the question feature carries a
    one-hot shortcut channel equal to the label with probability
    ``bias_strength`` on the training side. Test samples are drawn head
    (shortcut agrees) or tail (shortcut disagrees) per ``tail_fraction``
    and labeled accordingly.
    """
    rng = np.random.default_rng(cfg.seed)
    c, d = cfg.num_classes, cfg.feature_dim
    if d < c:
        raise ToyError("feature_dim must be at least num_classes for the shortcut channel")
    n_video = 2
    n_audio = math.ceil(c / n_video)
    audio_protos = rng.choice([-1.0, 1.0], size=(n_audio, d))
    video_protos = rng.choice([-1.0, 1.0], size=(n_video, d))
    probs = _label_probs(c)

    def draw(n: int, prefix: str, regime: np.ndarray | None) -> list[ToySample]:
        labels = rng.choice(c, size=n, p=probs)
        samples = []
        for i, label in enumerate(labels):
            label = int(label)
            audio = audio_protos[label // n_video] + cfg.noise_scale * rng.standard_normal(d)
            video = video_protos[label % n_video] + cfg.noise_scale * rng.standard_normal(d)
            if regime is None:
                shortcut_ok = rng.random() < cfg.bias_strength
            else:
                shortcut_ok = bool(regime[i])
            if shortcut_ok or c < 2:
                shortcut = label
            else:
                shortcut = int(rng.integers(c - 1))
                if shortcut >= label:
                    shortcut += 1
            question = 0.1 * rng.standard_normal(d)
            question[shortcut] += 2.0
            sid = f"{prefix}-{i:05d}"
            samples.append(
                ToySample(
                    qa=_make_sample(sid, label),
                    label=label,
                    audio=audio,
                    video=video,
                    question=question,
                )
            )
        return samples

    train = draw(cfg.train_n, "train", regime=None)
    head_mask = np.ones(cfg.test_n, dtype=bool)
    n_tail = int(round(cfg.tail_fraction * cfg.test_n))
    head_mask[:n_tail] = False
    rng.shuffle(head_mask)
    test = draw(cfg.test_n, "test", regime=head_mask)

    splits = [
        SplitAssignment(
            sample_id=s.qa.id,
            group=s.qa.group,
            label=SplitLabel.HEAD if head_mask[i] else SplitLabel.TAIL,
            answer_class=s.qa.answer,
            rule=SplitRule.GENERAL_THRESHOLD,
        )
        for i, s in enumerate(test)
    ]
    return SyntheticData(train=train, test=test, splits=splits, config=cfg)


@dataclass
class ToyModel:
    """Parameter container; the forward/backward passes live in free functions."""

    num_classes: int
    feature_dim: int
    hidden: int
    params: dict[str, np.ndarray]

    MODALITIES = ("audio", "video", "question")

    @classmethod
    def initialize(
        cls, num_classes: int, feature_dim: int, hidden: int = 32, seed: int = 0
    ) -> "ToyModel":
        rng = np.random.default_rng(seed)
        p: dict[str, np.ndarray] = {}

        def affine(name: str, out_dim: int, in_dim: int) -> None:
            p[f"{name}_W"] = rng.standard_normal((out_dim, in_dim)) * math.sqrt(2.0 / in_dim)
            p[f"{name}_b"] = np.zeros(out_dim)

        for m in cls.MODALITIES:
            affine(f"enc_{m}", hidden, feature_dim)
            affine(f"bias_{m}_1", hidden, hidden)
            affine(f"bias_{m}_2", num_classes, hidden)
        affine("fusion", num_classes, 3 * hidden)
        return cls(num_classes=num_classes, feature_dim=feature_dim, hidden=hidden, params=p)

    def fusion_param_names(self) -> list[str]:
        """Parameters used at inference: encoders and the fusion head only."""
        names = [f"enc_{m}_{s}" for m in self.MODALITIES for s in ("W", "b")]
        return names + ["fusion_W", "fusion_b"]


def _stack_features(samples: list[ToySample]) -> dict[str, np.ndarray]:
    return {
        "audio": np.stack([s.audio for s in samples]),
        "video": np.stack([s.video for s in samples]),
        "question": np.stack([s.question for s in samples]),
    }


def _forward_cache(model: ToyModel, x: dict[str, np.ndarray]) -> dict:
    p = model.params
    cache: dict = {"x": x, "z": {}, "h": {}, "bz": {}, "ba": {}}
    logits: dict[str, np.ndarray] = {}
    for m in ToyModel.MODALITIES:
        z = x[m] @ p[f"enc_{m}_W"].T + p[f"enc_{m}_b"]
        h = np.maximum(z, 0.0)
        cache["z"][m] = z
        cache["h"][m] = h
        bz = h @ p[f"bias_{m}_1_W"].T + p[f"bias_{m}_1_b"]
        ba = np.maximum(bz, 0.0)
        cache["bz"][m] = bz
        cache["ba"][m] = ba
        logits[m] = ba @ p[f"bias_{m}_2_W"].T + p[f"bias_{m}_2_b"]
    h_cat = np.concatenate([cache["h"][m] for m in ToyModel.MODALITIES], axis=1)
    cache["h_cat"] = h_cat
    logits["fused"] = h_cat @ p["fusion_W"].T + p["fusion_b"]
    cache["logits"] = logits
    return cache


def forward(model: ToyModel, samples: list[ToySample]) -> dict[str, np.ndarray]:
    """All four logit heads for a batch, as (K, C) matrices keyed by head name."""
    if not samples:
        raise ToyError("empty batch")
    x = _stack_features(samples)
    for m in ToyModel.MODALITIES:
        if x[m].shape[1] != model.feature_dim:
            raise ToyError(
                f"{m} feature dim {x[m].shape[1]} does not match model dim {model.feature_dim}"
            )
    return _forward_cache(model, x)["logits"]


def forward_bundle(model: ToyModel, sample: ToySample) -> LogitBundle:
    """Single-sample convenience wrapper around forward()."""
    logits = forward(model, [sample])
    return LogitBundle(
        audio=logits["audio"][0],
        video=logits["video"][0],
        question=logits["question"][0],
        fused=logits["fused"][0],
    )


def predict_logits(model: ToyModel, samples: list[ToySample]) -> np.ndarray:
    """Inference-path logits: encoders + fusion head, bias learners untouched."""
    p = {name: model.params[name] for name in model.fusion_param_names()}
    x = _stack_features(samples)
    hs = []
    for m in ToyModel.MODALITIES:
        hs.append(np.maximum(x[m] @ p[f"enc_{m}_W"].T + p[f"enc_{m}_b"], 0.0))
    return np.concatenate(hs, axis=1) @ p["fusion_W"].T + p["fusion_b"]


def _backward(model: ToyModel, cache: dict, dlogits: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    p = model.params
    g = {name: np.zeros_like(arr) for name, arr in p.items()}
    h_cat = cache["h_cat"]
    dy = dlogits["fused"]
    g["fusion_W"] += dy.T @ h_cat
    g["fusion_b"] += dy.sum(axis=0)
    dh_cat = dy @ p["fusion_W"]
    hdim = model.hidden
    for idx, m in enumerate(ToyModel.MODALITIES):
        dh = dh_cat[:, idx * hdim : (idx + 1) * hdim].copy()
        # bias-learner branch
        dyb = dlogits[m]
        ba, bz, h = cache["ba"][m], cache["bz"][m], cache["h"][m]
        g[f"bias_{m}_2_W"] += dyb.T @ ba
        g[f"bias_{m}_2_b"] += dyb.sum(axis=0)
        dba = dyb @ p[f"bias_{m}_2_W"]
        dbz = dba * (bz > 0.0)
        g[f"bias_{m}_1_W"] += dbz.T @ h
        g[f"bias_{m}_1_b"] += dbz.sum(axis=0)
        dh += dbz @ p[f"bias_{m}_1_W"]
        # encoder
        dz = dh * (cache["z"][m] > 0.0)
        g[f"enc_{m}_W"] += dz.T @ cache["x"][m]
        g[f"enc_{m}_b"] += dz.sum(axis=0)
    return g


class Adam:
    """Plain Adam with the standard moment constants."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, grad in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * grad
            self.v[k] = b2 * self.v[k] + (1 - b2) * grad * grad
            m_hat = self.m[k] / (1 - b1**self.t)
            v_hat = self.v[k] / (1 - b2**self.t)
            self.params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    model: ToyModel
    history: list[dict]


def train(
    model: ToyModel,
    corpus: list[ToySample],
    tcfg: TrainConfig = TrainConfig(),
    spec: AblationSpec = AblationSpec(),
) -> TrainResult:
    """Algorithm: seeded shuffle, minibatch joint loss, Adam, stepped lr decay."""
    if not corpus:
        raise ToyError("empty training corpus")
    cfg, heads, share = spec.effective(tcfg.mccd)
    rng = np.random.default_rng(tcfg.seed)
    opt = Adam(model.params, lr=tcfg.learning_rate)
    labels_all = np.array([s.label for s in corpus])
    history: list[dict] = []
    n = len(corpus)
    for epoch in range(1, tcfg.epochs + 1):
        opt.lr = tcfg.learning_rate * tcfg.lr_decay_factor ** ((epoch - 1) // tcfg.lr_decay_every)
        order = rng.permutation(n)
        sums = {"L_a": 0.0, "L_d": 0.0, "L_c": 0.0}
        correct = 0
        batches = 0
        for start in range(0, n, tcfg.batch_size):
            idx = order[start : start + tcfg.batch_size]
            batch = [corpus[i] for i in idx]
            labels = labels_all[idx]
            cache = _forward_cache(model, _stack_features(batch))
            la, ld, lc, dlogits = joint_components_stacked(
                cache["logits"], labels, cfg, heads=heads, share=share
            )
            total = la.value + ld.value + lc.value
            if not math.isfinite(total):
                raise ToyError(
                    f"non-finite loss at epoch {epoch} (L_a={la.value}, "
                    f"L_d={ld.value}, L_c={lc.value}); training aborted"
                )
            correct += int(np.sum(np.argmax(cache["logits"]["fused"], axis=1) == labels))
            sums["L_a"] += la.value
            sums["L_d"] += ld.value
            sums["L_c"] += lc.value
            batches += 1
            grads = _backward(model, cache, dlogits)
            opt.step(grads)
        history.append(
            {
                "epoch": epoch,
                "L_a": sums["L_a"] / batches,
                "L_d": sums["L_d"] / batches,
                "L_c": sums["L_c"] / batches,
                "train_acc": correct / n,
                "lr": opt.lr,
            }
        )
    return TrainResult(model=model, history=history)


def evaluate(
    model: ToyModel, test: list[ToySample], splits: list[SplitAssignment]
) -> RobustnessReport:
    """Score argmax answers of the fusion path under the given head/tail splits."""
    logits = predict_logits(model, test)
    preds = {
        s.qa.id: class_name(int(np.argmax(logits[i]))) for i, s in enumerate(test)
    }
    return score_predictions([s.qa for s in test], splits, preds)


def _acc_float(x) -> float | None:
    return None if x is None else float(x)


def run_variant(
    scfg: SyntheticConfig, tcfg: TrainConfig, spec: AblationSpec, seed: int
) -> dict:
    """One end-to-end run: generate, train, evaluate; seed drives all three."""
    data = generate_synthetic(replace(scfg, seed=seed))
    model = ToyModel.initialize(
        num_classes=scfg.num_classes, feature_dim=scfg.feature_dim, seed=seed
    )
    result = train(model, data.train, replace(tcfg, seed=seed), spec)
    report = evaluate(result.model, data.test, data.splits)
    agg = report.aggregate
    return {
        "variant": spec.variant.value,
        "seed": seed,
        "head_acc": _acc_float(agg.head_acc),
        "tail_acc": _acc_float(agg.tail_acc),
        "overall_acc": _acc_float(agg.overall_acc),
        "final_epoch": result.history[-1],
    }


def ablation_run(
    scfg: SyntheticConfig,
    tcfg: TrainConfig,
    variants: list[AblationSpec],
    seeds: list[int],
) -> list[dict]:
    """Median head/tail/overall accuracy per variant over the given seeds."""
    rows = []
    for spec in variants:
        runs = [run_variant(scfg, tcfg, spec, seed) for seed in seeds]
        rows.append(
            {
                "variant": spec.variant.value,
                "seeds": list(seeds),
                "median_head_acc": statistics.median(r["head_acc"] for r in runs),
                "median_tail_acc": statistics.median(r["tail_acc"] for r in runs),
                "median_overall_acc": statistics.median(r["overall_acc"] for r in runs),
                "runs": runs,
            }
        )
    return rows


def render_ablation_table(rows: list[dict]) -> str:
    header = f"| {'Variant':<12} | {'H':>7} | {'T':>7} | {'Avg.':>7} |"
    out = [header, "|" + "-" * (len(header) - 2) + "|"]
    for row in rows:
        out.append(
            f"| {row['variant']:<12} "
            f"| {row['median_head_acc'] * 100:7.2f} "
            f"| {row['median_tail_acc'] * 100:7.2f} "
            f"| {row['median_overall_acc'] * 100:7.2f} |"
        )
    return "\n".join(out) + "\n"
