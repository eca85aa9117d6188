"""Linear per-point classifier, training losses with analytic gradients,
pseudo-labeling, EMA teacher updates, and segmentation metrics.

Gradient conventions: every loss returns its gradient with respect to the
logits (or projection outputs) that produced it; chain_to_params turns a
logit gradient into (dW, db) for the linear trunk. All gradients are checked
against central finite differences in the test suite.
"""

from dataclasses import dataclass

import numpy as np

from .camera import masked_cosine_loss
from .cloud import IGNORE_ID
from .errors import EmptyInputError, ValidationError
from .geometry import inclination, scan_range


@dataclass(frozen=True)
class ModelParams:
    """weights: (C, d); bias: (C,). Logits are x @ W.T + b."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        b = np.ascontiguousarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ValidationError(f"weights (C, d) and bias (C,) disagree: {w.shape} vs {b.shape}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValidationError("model parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def num_classes(self):
        return self.weights.shape[0]

    @property
    def num_features(self):
        return self.weights.shape[1]


def zero_params(num_classes, num_features):
    return ModelParams(np.zeros((num_classes, num_features)), np.zeros(num_classes))


@dataclass
class PseudoLabels:
    labels: np.ndarray
    keep_mask: np.ndarray
    threshold: float


def forward_logits(params, features):
    features = np.asarray(features, dtype=np.float64)
    return features @ params.weights.T + params.bias


def softmax(logits):
    """Row-wise softmax, stabilized by max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, features):
    """Per-point class probabilities of the linear softmax classifier."""
    return softmax(forward_logits(params, features))


def chain_to_params(logit_grad, features):
    """Push a (N, C) logit gradient through logits = x W^T + b."""
    logit_grad = np.asarray(logit_grad, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    return logit_grad.T @ features, logit_grad.sum(axis=0)


def cross_entropy_loss(probs, labels):
    """Mean -log p[label] over non-ignored points.

    Returns (loss, gradient w.r.t. logits) with the usual softmax identity
    grad = (p - onehot) / N_valid on valid rows, 0 on ignored rows.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ValidationError("probs must be (N, C) with one label per row")
    valid = labels != IGNORE_ID
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise EmptyInputError("cross_entropy_loss: every point is ignored")
    if labels[valid].max() >= probs.shape[1]:
        raise ValidationError("label id out of range")
    idx = np.flatnonzero(valid)
    picked = probs[idx, labels[idx]]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    grad = np.zeros_like(probs)
    grad[idx] = probs[idx] / n_valid
    grad[idx, labels[idx]] -= 1.0 / n_valid
    return loss, grad


def generate_pseudo_labels(teacher_probs, threshold):
    """Argmax labels kept where the max probability reaches the threshold.

    Ties resolve to the lowest class id (argmax semantics).
    """
    probs = np.asarray(teacher_probs, dtype=np.float64)
    threshold = float(threshold)
    if not (0.0 <= threshold <= 1.0):
        raise ValidationError(f"threshold must lie in [0, 1], got {threshold}")
    labels = probs.argmax(axis=1).astype(np.int64)
    keep = probs.max(axis=1) >= threshold
    return PseudoLabels(labels=labels, keep_mask=keep, threshold=threshold)


def mean_teacher_loss(student_probs, teacher_probs):
    """Mean squared L2 distance between probability rows.

    Returns (loss, gradient w.r.t. the student logits); the teacher is a
    constant target. The gradient goes through the student softmax Jacobian:
    with r = 2 (p - q) / N, dL/dz_j = p_j (r_j - <r, p>).
    """
    p = np.asarray(student_probs, dtype=np.float64)
    q = np.asarray(teacher_probs, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 2:
        raise ValidationError("probability arrays must share an (N, C) shape")
    if p.shape[0] == 0:
        raise EmptyInputError("mean_teacher_loss: no points")
    n = p.shape[0]
    diff = p - q
    loss = float((diff * diff).sum() / n)
    r = 2.0 * diff / n
    grad = p * (r - (r * p).sum(axis=1, keepdims=True))
    return loss, grad


def lkg_loss(student_logits, image_scores, mask):
    """Masked mean (1 - cosine) between L2-normalized logits and per-point
    image-derived class scores. Returns (loss, gradient w.r.t. logits)."""
    return masked_cosine_loss(student_logits, image_scores, mask)


@dataclass(frozen=True)
class ProjectionHead:
    """Single linear map from trunk features to the painted-feature space.

    When the two dimensions match, a residual pass-through is added.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValidationError("projection matrix must be 2-D")
        if not np.isfinite(m).all():
            raise ValidationError("projection matrix must be finite")
        object.__setattr__(self, "matrix", m)

    @property
    def residual(self):
        return self.matrix.shape[0] == self.matrix.shape[1]

    def apply(self, features):
        out = np.asarray(features, dtype=np.float64) @ self.matrix.T
        if self.residual:
            out = out + features
        return out


def c2l_loss(head, features, painted_features, mask):
    """Cosine alignment of projected trunk features with painted image
    features on masked points. Returns (loss, gradient w.r.t. head.matrix)."""
    out = head.apply(features)
    loss, grad_out = masked_cosine_loss(out, painted_features, mask)
    grad_matrix = grad_out.T @ np.asarray(features, dtype=np.float64)
    return loss, grad_matrix


def ema_update(teacher, student, alpha):
    """teacher <- alpha * teacher + (1 - alpha) * student, elementwise."""
    alpha = float(alpha)
    if not (0.0 <= alpha < 1.0):
        raise ValidationError(f"alpha must lie in [0, 1), got {alpha}")
    return ModelParams(
        alpha * teacher.weights + (1.0 - alpha) * student.weights,
        alpha * teacher.bias + (1.0 - alpha) * student.bias,
    )


def sgd_step(params, grad_weights, grad_bias, lr):
    """One plain gradient-descent step."""
    return ModelParams(
        params.weights - lr * np.asarray(grad_weights, dtype=np.float64),
        params.bias - lr * np.asarray(grad_bias, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# features


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature standardization fitted on the labeled split."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, features):
        return (features - self.mean) / self.std


BASE_FEATURE_NAMES = ("x", "y", "z", "range", "inclination", "intensity")


def featurize(cloud, use_painted=False):
    """Per-point feature rows: x, y, z, range, inclination, intensity, and the
    painted channels (validity included) when requested."""
    coords = cloud.coords
    cols = [
        coords[:, 0],
        coords[:, 1],
        coords[:, 2],
        scan_range(coords) if len(cloud) else np.zeros(0),
        inclination(coords) if len(cloud) else np.zeros(0),
        cloud.intensity,
    ]
    feats = np.stack(cols, axis=1) if len(cloud) else np.zeros((0, 6))
    if use_painted:
        if cloud.painted is None:
            raise ValidationError("cloud carries no painted channels")
        feats = np.concatenate([feats, cloud.painted], axis=1)
    return feats


def fit_scaler(feature_blocks):
    """Mean/std over stacked feature rows; zero-variance features get std 1."""
    stacked = np.concatenate([np.asarray(f, dtype=np.float64) for f in feature_blocks])
    if stacked.shape[0] == 0:
        raise EmptyInputError("cannot fit a scaler on zero rows")
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return FeatureScaler(mean=mean, std=std)


def fold_scaler(params, scaler):
    """Rewrite (W, b) so they act on raw features: W x' + b with
    x' = (x - mu) / sigma equals (W / sigma) x + (b - W (mu / sigma))."""
    w = params.weights / scaler.std
    b = params.bias - w @ scaler.mean
    return ModelParams(w, b)


# ---------------------------------------------------------------------------
# metrics


def confusion_counts(pred, gt, num_classes):
    """(TP, FP, FN, support) per class, ignoring IGNORE_ID ground truth."""
    pred = np.asarray(pred, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    valid = gt != IGNORE_ID
    pred = pred[valid]
    gt = gt[valid]
    tp = np.zeros(num_classes, dtype=np.int64)
    fp = np.zeros(num_classes, dtype=np.int64)
    fn = np.zeros(num_classes, dtype=np.int64)
    for c in range(num_classes):
        pc = pred == c
        gc = gt == c
        tp[c] = int((pc & gc).sum())
        fp[c] = int((pc & ~gc).sum())
        fn[c] = int((~pc & gc).sum())
    return tp, fp, fn


@dataclass
class EvalResult:
    per_class_iou: np.ndarray
    miou: float
    macc: float


def metrics_from_counts(tp, fp, fn):
    """IoU/mAcc from pooled counts; classes absent from both prediction and
    ground truth are excluded from the means."""
    tp = np.asarray(tp, dtype=np.float64)
    fp = np.asarray(fp, dtype=np.float64)
    fn = np.asarray(fn, dtype=np.float64)
    denom = tp + fp + fn
    iou = np.full(tp.shape, np.nan)
    seen = denom > 0
    iou[seen] = tp[seen] / denom[seen]
    miou = float(iou[seen].mean()) if seen.any() else 0.0
    support = tp + fn
    has_gt = support > 0
    recall = np.zeros_like(tp)
    recall[has_gt] = tp[has_gt] / support[has_gt]
    macc = float(recall[has_gt].mean()) if has_gt.any() else 0.0
    return EvalResult(per_class_iou=iou, miou=miou, macc=macc)


def evaluate(params, clouds, num_classes, use_painted=False, scaler=None):
    """Pool predictions over labeled clouds and report IoU/mIoU/mAcc."""
    tp = np.zeros(num_classes, dtype=np.int64)
    fp = np.zeros(num_classes, dtype=np.int64)
    fn = np.zeros(num_classes, dtype=np.int64)
    for cloud in clouds:
        if cloud.labels is None:
            raise ValidationError("evaluate needs labeled clouds")
        feats = featurize(cloud, use_painted)
        if scaler is not None:
            feats = scaler.apply(feats)
        pred = forward_logits(params, feats).argmax(axis=1)
        t, f, n = confusion_counts(pred, cloud.labels, num_classes)
        tp += t
        fp += f
        fn += n
    return metrics_from_counts(tp, fp, fn)
