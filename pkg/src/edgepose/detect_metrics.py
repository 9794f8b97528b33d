"""Detection matching and precision/recall over axis-aligned boxes.

Predictions are matched greedily in order of descending confidence: each
prediction claims the unmatched ground-truth box of the same class with
the highest overlap, provided the IoU clears the threshold. Ties in
confidence keep input order; ties in overlap go to the lowest ground
truth index. The tallies always satisfy tp + fp = number of scored
predictions and tp + fn = number of ground-truth boxes.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_IOU_MIN = 0.5
DEFAULT_SCORE_MIN = 0.0


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box [x_min, x_max) x [y_min, y_max) with a class label.

    Coordinates are pixels; score is a confidence in [0, 1] (ground-truth
    boxes conventionally carry 1.0).
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_id: int
    score: float = 1.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate box: [{self.x_min}, {self.x_max}) x [{self.y_min}, {self.y_max})"
            )
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class MatchResult:
    true_positives: int
    false_positives: int
    false_negatives: int
    pairs: tuple[tuple[int, int], ...]  # (prediction index, ground-truth index)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; zero for disjoint boxes."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def match_detections(
    predictions,
    ground_truths,
    iou_min: float = DEFAULT_IOU_MIN,
    score_min: float = DEFAULT_SCORE_MIN,
) -> MatchResult:
    """Greedily pair predictions with ground truths of the same class.

    Predictions scoring below ``score_min`` are dropped before matching
    and never counted. Pair indices refer to positions in the original
    input sequences.
    """
    if not 0.0 < iou_min <= 1.0:
        raise ValueError(f"iou_min must lie in (0, 1], got {iou_min}")
    preds = [(i, p) for i, p in enumerate(predictions) if p.score >= score_min]
    # Stable sort: equal scores keep their input order.
    preds.sort(key=lambda item: -item[1].score)

    gts = list(ground_truths)
    matched_gt = [False] * len(gts)
    pairs = []
    for pred_index, pred in preds:
        best_iou = 0.0
        best_gt = -1
        for gt_index, gt in enumerate(gts):
            if matched_gt[gt_index] or gt.class_id != pred.class_id:
                continue
            overlap = iou(pred, gt)
            if overlap > best_iou:
                best_iou = overlap
                best_gt = gt_index
        if best_gt >= 0 and best_iou >= iou_min:
            matched_gt[best_gt] = True
            pairs.append((pred_index, best_gt))

    tp = len(pairs)
    return MatchResult(
        true_positives=tp,
        false_positives=len(preds) - tp,
        false_negatives=len(gts) - tp,
        pairs=tuple(pairs),
    )


def precision(result: MatchResult) -> float | None:
    """tp / (tp + fp), or None when no predictions were scored."""
    denom = result.true_positives + result.false_positives
    if denom == 0:
        return None
    return result.true_positives / denom


def recall(result: MatchResult) -> float | None:
    """tp / (tp + fn), or None when there are no ground-truth boxes."""
    denom = result.true_positives + result.false_negatives
    if denom == 0:
        return None
    return result.true_positives / denom
