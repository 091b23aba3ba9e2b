"""Training losses over a taxonomy: the per-depth conditional loss, the
flat cross-entropy used for fine-tuning, and a finite-difference
gradient checker.

Both losses consume leaf logits and return the analytic gradient with
respect to them, so callers never need autodiff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, NonFiniteLogit
from .taxonomy import TaxonomyTree, leaf_distribution

# Floor applied to any node mass before taking its log.
TINY = 1e-300

# Ceiling on the total loss of one example; beyond it the value and its
# gradient are rescaled to keep updates bounded.
LOSS_CEILING = 1e3


@dataclass
class LossReport:
    """One example's loss value, its decomposition, and its gradient.

    ``per_depth`` maps depth d to that depth's contribution; depth 0 is
    always present with value 0.0 (the root is certain).  The entries sum
    to ``loss``.  ``clamped`` marks values rescaled at the ceiling.
    """

    loss: float
    per_depth: dict[int, float] = field(default_factory=dict)
    grad: np.ndarray = field(default_factory=lambda: np.zeros(0))
    clamped: bool = False


def _clamp(
    loss: float, per_depth: dict[int, float], grad: np.ndarray, underflow: bool
) -> LossReport:
    """Pin the loss at the ceiling when a gold mass underflowed or the
    total overran it; components and gradient are rescaled in proportion
    so the per-depth sum still equals the reported loss."""
    if underflow or loss > LOSS_CEILING:
        scale = LOSS_CEILING / loss
        per_depth = {d: v * scale for d, v in per_depth.items()}
        return LossReport(
            loss=LOSS_CEILING, per_depth=per_depth, grad=grad * scale, clamped=True
        )
    return LossReport(loss=loss, per_depth=per_depth, grad=grad, clamped=False)


def conditional_hier_loss(tree: TaxonomyTree, logits, gold_leaf: str) -> LossReport:
    """Negative log probability of the gold node at every depth.

    The term at depth d is -log of the subtree mass of the gold leaf's
    ancestor at that depth; depths past the gold leaf contribute nothing.
    A gold leaf shallower than the tree's maximum therefore trains only
    the depths it defines.
    """
    probs = leaf_distribution(tree, logits)
    gold_depth = tree.depth_of(gold_leaf)
    tree.leaf_index(gold_leaf)

    per_depth: dict[int, float] = {0: 0.0}
    grad = np.zeros_like(probs)
    total = 0.0
    underflow = False
    for d in range(1, gold_depth + 1):
        node = tree.correct_node_at_depth(gold_leaf, d)
        idx = list(tree.subtree_leaf_indices(node))
        raw = float(probs[idx].sum())
        underflow = underflow or raw < TINY
        mass = max(raw, TINY)
        component = -math.log(mass)
        per_depth[d] = component
        total += component
        # d/dx of -log(sum_{i in S} softmax_i): softmax everywhere,
        # minus softmax_i / mass inside the subtree.
        grad += probs
        grad[idx] -= probs[idx] / mass
    return _clamp(total, per_depth, grad, underflow)


def unconditional_loss(tree: TaxonomyTree, logits, gold_leaf: str) -> LossReport:
    """Plain cross-entropy on the leaf softmax, ignoring the hierarchy.

    The single component is filed under the gold leaf's depth so reports
    stay comparable with the conditional loss.
    """
    probs = leaf_distribution(tree, logits)
    gold_ix = tree.leaf_index(gold_leaf)
    raw = float(probs[gold_ix])
    mass = max(raw, TINY)
    loss = -math.log(mass)
    grad = probs.copy()
    grad[gold_ix] -= 1.0
    per_depth = {0: 0.0, tree.depth_of(gold_leaf): loss}
    return _clamp(loss, per_depth, grad, raw < TINY)


def gradient_check(fn, x, step: float = 1e-5) -> float:
    """Worst relative error between fn's gradient and central differences.

    ``fn(x)`` must return ``(loss, grad)``.  The relative error at each
    coordinate uses max(|analytic|, |numeric|, 1e-8) as denominator so
    near-zero entries do not blow up the ratio.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise LengthMismatch("gradient_check expects a 1-d point")
    if not np.all(np.isfinite(x)):
        raise NonFiniteLogit("gradient_check point must be finite")
    _, grad = fn(x)
    worst = 0.0
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        lp, _ = fn(xp)
        lm, _ = fn(xm)
        numeric = (lp - lm) / (2.0 * step)
        denom = max(abs(float(grad[i])), abs(numeric), 1e-8)
        worst = max(worst, abs(float(grad[i]) - numeric) / denom)
    return worst


def check_loss_gradients(
    tree: TaxonomyTree,
    trials: int = 100,
    seed: int = 0,
    scale: float = 1.5,
) -> dict[str, float]:
    """Max finite-difference error for both losses over random trials.

    Each trial draws fresh logits and a random gold leaf; every logit
    coordinate is checked, so the coordinate count is trials times the
    leaf count.  The logit scale keeps softmax masses large enough that
    double-precision central differences stay meaningful; the gradient
    itself is exact for any finite logits.
    """
    rng = np.random.default_rng(seed)
    worst = {"conditional": 0.0, "unconditional": 0.0}
    for _ in range(trials):
        logits = rng.normal(0.0, scale, size=len(tree.leaves))
        gold = tree.leaves[int(rng.integers(len(tree.leaves)))]
        for key, loss_fn in (
            ("conditional", conditional_hier_loss),
            ("unconditional", unconditional_loss),
        ):
            err = gradient_check(
                lambda x, f=loss_fn: (
                    (r := f(tree, x, gold)).loss,
                    r.grad,
                ),
                logits,
            )
            worst[key] = max(worst[key], err)
    return worst
