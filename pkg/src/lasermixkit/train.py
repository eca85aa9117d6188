"""Semi-supervised training engine: split planning, the consistency training
loop (scene mixing + mean teacher + optional image alignment terms), loss
bookkeeping, and the resulting teacher model.

Determinism contract: for a fixed config and seed the whole run is
bit-reproducible. Every strategy consumes the same per-batch random draws
(labeled pick, area count m) so that disabling the auxiliary terms reproduces
plain supervised training exactly.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _backend
from .cloud import IGNORE_ID, check_labels
from .errors import ConfigError, EmptyInputError, ValidationError
from .model import (
    FeatureScaler,
    ModelParams,
    ProjectionHead,
    chain_to_params,
    cross_entropy_loss,
    ema_update,
    evaluate,
    featurize,
    fit_scaler,
    fold_scaler,
    forward_logits,
    generate_pseudo_labels,
    lkg_loss,
    mean_teacher_loss,
    sgd_step,
    softmax,
    zero_params,
)
from .camera import masked_cosine_loss
from .geometry import make_inclination_partition

SPLIT_STRATEGIES = ("random", "uniform", "sequential")
TRAIN_STRATEGIES = (
    "sup_only",
    "mean_teacher_only",
    "lasermix",
    "lasermix_pp",
    "mix_unlabeled_only",
)


@dataclass(frozen=True)
class LossWeights:
    """Multipliers of the auxiliary objectives (supervised term is fixed at 1)."""

    lambda_mix: float = 2.0
    lambda_mt: float = 250.0
    lambda_c2l: float = 1.5
    lambda_lkg: float = 1.0

    def __post_init__(self):
        for name in ("lambda_mix", "lambda_mt", "lambda_c2l", "lambda_lkg"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be nonnegative")


@dataclass
class LossReport:
    """Per-epoch loss values; absent terms hold 0 with their flag off."""

    sup: float
    mix: float = 0.0
    mt: float = 0.0
    c2l: float = 0.0
    lkg: float = 0.0
    mix_present: bool = False
    mt_present: bool = False
    c2l_present: bool = False
    lkg_present: bool = False
    total: float = 0.0


def total_loss(sup, mix, mt, c2l, lkg, weights,
               mix_present=True, mt_present=True, c2l_present=True, lkg_present=True):
    """Weighted sum of the present terms."""
    total = float(sup)
    if mix_present:
        total += weights.lambda_mix * mix
    if mt_present:
        total += weights.lambda_mt * mt
    if c2l_present:
        total += weights.lambda_c2l * c2l
    if lkg_present:
        total += weights.lambda_lkg * lkg
    return total


def make_loss_report(sup, mix, mt, c2l, lkg, weights,
                     mix_present, mt_present, c2l_present, lkg_present):
    return LossReport(
        sup=sup,
        mix=mix if mix_present else 0.0,
        mt=mt if mt_present else 0.0,
        c2l=c2l if c2l_present else 0.0,
        lkg=lkg if lkg_present else 0.0,
        mix_present=mix_present,
        mt_present=mt_present,
        c2l_present=c2l_present,
        lkg_present=lkg_present,
        total=total_loss(sup, mix, mt, c2l, lkg, weights,
                         mix_present, mt_present, c2l_present, lkg_present),
    )


@dataclass
class SplitPlan:
    labeled_indices: np.ndarray
    unlabeled_indices: np.ndarray
    strategy: str
    seed: int


def split_frames(total, ratio, strategy, seed=0):
    """Plan which frame indices count as labeled.

    RANDOM: seeded shuffle, first k. UNIFORM: floor(i * total / k). SEQUENTIAL:
    first k. k = round(ratio * total), at least 1.
    """
    total = int(total)
    ratio = float(ratio)
    strategy = str(strategy).strip().lower()
    if total < 1:
        raise ValidationError("need at least one frame")
    if not (0.0 < ratio <= 1.0):
        raise ValidationError(f"ratio must lie in (0, 1], got {ratio}")
    if strategy not in SPLIT_STRATEGIES:
        raise ValidationError(f"unknown split strategy {strategy!r}")
    k = int(np.floor(ratio * total + 0.5))
    k = max(1, min(total, k))
    if strategy == "sequential":
        labeled = np.arange(k, dtype=np.int64)
    elif strategy == "uniform":
        labeled = (np.arange(k, dtype=np.int64) * total) // k
    else:
        rng = np.random.Generator(np.random.PCG64(seed))
        labeled = np.sort(rng.permutation(total)[:k]).astype(np.int64)
    mask = np.zeros(total, dtype=bool)
    mask[labeled] = True
    unlabeled = np.flatnonzero(~mask).astype(np.int64)
    return SplitPlan(labeled_indices=labeled, unlabeled_indices=unlabeled,
                     strategy=strategy, seed=seed)


@dataclass
class TrainConfig:
    num_classes: int
    ratio: float = 0.05
    split: str = "uniform"
    strategy: str = "lasermix"
    m_min: int = 2
    m_max: int = 6
    threshold: float = 0.9
    ema: float = 0.99
    lr: float = 0.02
    epochs: int = 3
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    phi_min: Optional[float] = None
    phi_max: Optional[float] = None

    def validate(self):
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if not (0.0 < self.ratio <= 1.0):
            raise ConfigError(f"ratio must lie in (0, 1], got {self.ratio}")
        if self.split not in SPLIT_STRATEGIES:
            raise ConfigError(f"unknown split strategy {self.split!r}")
        if self.strategy not in TRAIN_STRATEGIES:
            raise ConfigError(f"unknown training strategy {self.strategy!r}")
        if not (1 <= self.m_min <= self.m_max):
            raise ConfigError("need 1 <= m_min <= m_max")
        if not (0.0 <= self.threshold <= 1.0):
            raise ConfigError("threshold must lie in [0, 1]")
        if not (0.0 <= self.ema < 1.0):
            raise ConfigError("ema must lie in [0, 1)")
        if self.lr <= 0.0:
            raise ConfigError("lr must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if (self.phi_min is None) != (self.phi_max is None):
            raise ConfigError("phi_min and phi_max must be given together")
        if self.phi_min is not None and not (self.phi_min < self.phi_max):
            raise ConfigError("phi_min must be < phi_max")


@dataclass
class PrototypeScoreProvider:
    """Per-point class scores from painted colors vs. a per-class prototype
    table (C x K): cosine similarity of each point's painted evidence with
    every class prototype. The painted validity channel is the mask."""

    prototypes: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.prototypes, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] < 2:
            raise ValidationError("prototype table must be (C, K) with C >= 2")
        self.prototypes = p

    def __call__(self, painted):
        """painted: (N, K+1) channels with the trailing validity flag."""
        k = self.prototypes.shape[1]
        if painted is None or painted.shape[1] != k + 1:
            raise ValidationError(
                f"painted channels must be (N, {k + 1}) including validity"
            )
        colors = painted[:, :k]
        mask = painted[:, k] > 0.0
        norms = np.sqrt((colors * colors).sum(axis=1))
        unit = np.where(norms[:, None] > 0.0, colors / np.where(norms[:, None] > 0.0, norms[:, None], 1.0), 0.0)
        proto_norms = np.sqrt((self.prototypes * self.prototypes).sum(axis=1))
        proto_unit = self.prototypes / np.where(proto_norms[:, None] > 0.0, proto_norms[:, None], 1.0)
        scores = unit @ proto_unit.T
        return scores, mask


@dataclass
class TrainResult:
    teacher: ModelParams
    student: ModelParams
    teacher_raw: ModelParams
    head: Optional[ProjectionHead]
    scaler: FeatureScaler
    split: SplitPlan
    reports: List[LossReport]
    val_metrics: Optional[object]
    use_painted: bool


class _TermAccumulator:
    """Running mean of a loss term over the batches where it was present."""

    def __init__(self):
        self.total = 0.0
        self.count = 0

    def add(self, value):
        self.total += value
        self.count += 1

    @property
    def present(self):
        return self.count > 0

    @property
    def mean(self):
        return self.total / self.count if self.count else 0.0


def run_semi_supervised(train_clouds, config, val_clouds=None, lkg_provider=None):
    """Train the linear classifier with the configured consistency strategy.

    Returns a TrainResult holding the EMA teacher (both in scaler space and
    folded back to raw features), per-epoch loss reports, and validation
    metrics when val_clouds are given.
    """
    config.validate()
    train_clouds = list(train_clouds)
    if not train_clouds:
        raise ConfigError("no training scans")
    use_painted = config.strategy == "lasermix_pp"
    if use_painted:
        for i, cloud in enumerate(train_clouds):
            if cloud.painted is None:
                raise ConfigError(f"strategy lasermix_pp needs painted channels (scan {i})")

    split = split_frames(len(train_clouds), config.ratio, config.split, config.seed)
    labeled = split.labeled_indices
    unlabeled = split.unlabeled_indices
    needs_unlabeled = config.strategy != "sup_only"
    if needs_unlabeled and unlabeled.size == 0:
        raise ConfigError(f"strategy {config.strategy} needs unlabeled scans; ratio={config.ratio}")
    for i in labeled:
        check_labels(train_clouds[i], config.num_classes)

    # Per-scan caches: raw features, scaled features, beam angles, labels.
    feats_raw = [featurize(c, use_painted) for c in train_clouds]
    scaler = fit_scaler([feats_raw[i] for i in labeled])
    feats = [scaler.apply(f) for f in feats_raw]
    incl = [f[:, 4].copy() for f in feats_raw]  # inclination column, unscaled

    if config.phi_min is not None:
        phi_lo, phi_hi = float(config.phi_min), float(config.phi_max)
    else:
        non_empty = [a for a in incl if a.size]
        if not non_empty:
            raise ConfigError("all training scans are empty")
        phi_lo = min(float(a.min()) for a in non_empty)
        phi_hi = max(float(a.max()) for a in non_empty)
        if phi_hi <= phi_lo:
            phi_lo -= 1e-6
            phi_hi += 1e-6

    weights = config.weights
    want_mix = config.strategy in ("lasermix", "lasermix_pp", "mix_unlabeled_only")
    want_mt = config.strategy in ("mean_teacher_only", "lasermix", "lasermix_pp",
                                  "mix_unlabeled_only")
    do_mix = want_mix and weights.lambda_mix > 0.0
    do_mt = want_mt and weights.lambda_mt > 0.0
    do_c2l = use_painted and weights.lambda_c2l > 0.0
    do_lkg = use_painted and weights.lambda_lkg > 0.0 and lkg_provider is not None

    num_feats = feats[0].shape[1] if feats else 0
    student = zero_params(config.num_classes, num_feats)
    teacher = student
    rng = np.random.Generator(np.random.PCG64(config.seed))
    head = None
    painted_dim = 0
    if use_painted:
        painted_dim = train_clouds[0].painted.shape[1] - 1
        head = ProjectionHead(rng.normal(0.0, 0.1, size=(painted_dim, num_feats)))

    batch_pool = unlabeled if unlabeled.size else labeled
    reports = []

    for _epoch in range(config.epochs):
        order = rng.permutation(batch_pool.size)
        acc = {name: _TermAccumulator() for name in ("sup", "mix", "mt", "c2l", "lkg")}
        for pos in order:
            u_idx = int(batch_pool[pos])
            l_idx = int(labeled[rng.integers(0, labeled.size)])
            m = int(rng.integers(config.m_min, config.m_max + 1))

            grad_w = np.zeros_like(student.weights)
            grad_b = np.zeros_like(student.bias)
            head_grad = None

            # supervised term on the labeled scan
            probs_l = softmax(forward_logits(student, feats[l_idx]))
            sup, dlogits = cross_entropy_loss(probs_l, train_clouds[l_idx].labels)
            dw, db = chain_to_params(dlogits, feats[l_idx])
            grad_w += dw
            grad_b += db
            acc["sup"].add(sup)

            if needs_unlabeled:
                pseudo = None
                if do_mix or do_mt:
                    teacher_probs = softmax(forward_logits(teacher, feats[u_idx]))
                    pseudo = generate_pseudo_labels(teacher_probs, config.threshold)

                if do_mt:
                    logits_u = forward_logits(student, feats[u_idx])
                    probs_u = softmax(logits_u)
                    mt, dlogits_u = mean_teacher_loss(probs_u, teacher_probs)
                    dw, db = chain_to_params(dlogits_u, feats[u_idx])
                    grad_w += weights.lambda_mt * dw
                    grad_b += weights.lambda_mt * db
                    acc["mt"].add(mt)

                if do_mix:
                    if config.strategy == "mix_unlabeled_only":
                        p_idx = int(unlabeled[rng.integers(0, unlabeled.size)])
                        partner_probs = softmax(forward_logits(teacher, feats[p_idx]))
                        partner_pl = generate_pseudo_labels(partner_probs, config.threshold)
                        partner_labels = np.where(
                            partner_pl.keep_mask, partner_pl.labels, IGNORE_ID
                        )
                    else:
                        p_idx = l_idx
                        partner_labels = train_clouds[l_idx].labels
                    u_labels = np.where(pseudo.keep_mask, pseudo.labels, IGNORE_ID)
                    bounds = make_inclination_partition(phi_lo, phi_hi, m).bounds
                    areas_u = _backend.bin_values(incl[u_idx], bounds)
                    areas_p = _backend.bin_values(incl[p_idx], bounds)
                    keep_u = areas_u % 2 == 0
                    give_p = areas_p % 2 == 1
                    feats_ma = np.concatenate([feats[u_idx][keep_u], feats[p_idx][give_p]])
                    labels_ma = np.concatenate([u_labels[keep_u], partner_labels[give_p]])
                    feats_mb = np.concatenate([feats[u_idx][~keep_u], feats[p_idx][~give_p]])
                    labels_mb = np.concatenate([u_labels[~keep_u], partner_labels[~give_p]])
                    both_feats = np.concatenate([feats_ma, feats_mb])
                    both_labels = np.concatenate([labels_ma, labels_mb])
                    try:
                        probs_m = softmax(forward_logits(student, both_feats))
                        mix, dlogits_m = cross_entropy_loss(probs_m, both_labels)
                    except EmptyInputError:
                        pass
                    else:
                        dw, db = chain_to_params(dlogits_m, both_feats)
                        grad_w += weights.lambda_mix * dw
                        grad_b += weights.lambda_mix * db
                        acc["mix"].add(mix)

                if do_c2l or do_lkg:
                    painted = train_clouds[u_idx].painted
                    validity = painted[:, painted_dim] > 0.0
                    if do_c2l and validity.any():
                        out = head.apply(feats[u_idx])
                        c2l, grad_out = masked_cosine_loss(
                            out, painted[:, :painted_dim], validity
                        )
                        head_grad = weights.lambda_c2l * (grad_out.T @ feats[u_idx])
                        acc["c2l"].add(c2l)
                    if do_lkg:
                        scores, mask_lkg = lkg_provider(painted)
                        if mask_lkg.any():
                            logits_u2 = forward_logits(student, feats[u_idx])
                            lkg, dlogits_lkg = lkg_loss(logits_u2, scores, mask_lkg)
                            dw, db = chain_to_params(dlogits_lkg, feats[u_idx])
                            grad_w += weights.lambda_lkg * dw
                            grad_b += weights.lambda_lkg * db
                            acc["lkg"].add(lkg)

            student = sgd_step(student, grad_w, grad_b, config.lr)
            if head_grad is not None:
                head = ProjectionHead(head.matrix - config.lr * head_grad)
            teacher = ema_update(teacher, student, config.ema)

        reports.append(make_loss_report(
            acc["sup"].mean, acc["mix"].mean, acc["mt"].mean,
            acc["c2l"].mean, acc["lkg"].mean, weights,
            acc["mix"].present, acc["mt"].present,
            acc["c2l"].present, acc["lkg"].present,
        ))

    val_metrics = None
    if val_clouds is not None:
        val_metrics = evaluate(teacher, val_clouds, config.num_classes,
                               use_painted=use_painted, scaler=scaler)
    return TrainResult(
        teacher=fold_scaler(teacher, scaler),
        student=fold_scaler(student, scaler),
        teacher_raw=teacher,
        head=head,
        scaler=scaler,
        split=split,
        reports=reports,
        val_metrics=val_metrics,
        use_painted=use_painted,
    )
