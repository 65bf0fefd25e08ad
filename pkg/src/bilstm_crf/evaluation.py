"""Strict (exact boundary and class) span scoring, CoNLL style."""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import extract_spans
from .errors import ShapeMismatchError


@dataclass
class Counts:
    tp: int = 0
    gold: int = 0
    pred: int = 0

    @property
    def precision(self):
        return self.tp / self.pred if self.pred else 0.0

    @property
    def recall(self):
        return self.tp / self.gold if self.gold else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class EvalReport:
    per_class: dict = field(default_factory=dict)
    overall: Counts = field(default_factory=Counts)
    tokens: int = 0
    correct_tokens: int = 0

    @property
    def precision(self):
        return self.overall.precision

    @property
    def recall(self):
        return self.overall.recall

    @property
    def f1(self):
        return self.overall.f1

    @property
    def token_accuracy(self):
        return self.correct_tokens / self.tokens if self.tokens else 0.0


def strict_score(gold, pred):
    if len(gold) != len(pred):
        first = min(len(gold), len(pred))
        raise ShapeMismatchError(
            f"gold has {len(gold)} sentences, prediction has {len(pred)} "
            f"(first divergent sentence {first})")
    tagset = gold.tagset
    report = EvalReport(per_class={c: Counts() for c in tagset.classes})
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise ShapeMismatchError(
                f"sentence {i}: gold has {len(g)} tokens, prediction has {len(p)}")
        if g.tags is None or p.tags is None:
            raise ShapeMismatchError(f"sentence {i}: missing tags")
        gold_spans = set(extract_spans(g.tags, tagset))
        pred_spans = set(extract_spans(p.tags, tagset))
        for sp in gold_spans:
            report.per_class[sp.label].gold += 1
        for sp in pred_spans:
            report.per_class[sp.label].pred += 1
            if sp in gold_spans:
                report.per_class[sp.label].tp += 1
        report.tokens += len(g)
        report.correct_tokens += sum(a == b for a, b in zip(g.tags, p.tags))
    for c in report.per_class.values():
        report.overall.tp += c.tp
        report.overall.gold += c.gold
        report.overall.pred += c.pred
    return report


def _pct(x):
    return f"{100.0 * x:.2f}"


def format_report(report):
    """Fixed-width table with percentages at two decimals."""
    rows = [(name, c) for name, c in report.per_class.items()]
    rows.append(("overall", report.overall))
    width = max(12, *(len(name) for name, _ in rows))
    lines = [f"{'class':<{width}} {'Precision':>9} {'Recall':>9} {'F1':>9}"]
    for name, c in rows:
        lines.append(f"{name:<{width}} {_pct(c.precision):>9} {_pct(c.recall):>9} {_pct(c.f1):>9}")
    return "\n".join(lines) + "\n"


def report_to_keyvalue(report):
    lines = []
    for name, c in [*report.per_class.items(), ("overall", report.overall)]:
        lines += [f"{name}.tp={c.tp}", f"{name}.gold={c.gold}", f"{name}.pred={c.pred}",
                  f"{name}.precision={c.precision:.6f}", f"{name}.recall={c.recall:.6f}",
                  f"{name}.f1={c.f1:.6f}"]
    lines.append(f"token_accuracy={report.token_accuracy:.6f}")
    return "\n".join(lines) + "\n"
