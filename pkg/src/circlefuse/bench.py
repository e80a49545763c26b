"""Seeded synthetic benchmark comparing fusion strategies.

For each seed: plant ground truth, simulate the model ensemble, then score
(a) every model individually after NMS, (b) all models pooled through one
NMS pass, (c) the pooled Soft-NMS variant, and (d) weighted circle fusion
on the per-model NMS outputs. Reported numbers are means across seeds; the
per-seed series are kept so method orderings can be tested with a paired
sign test.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from scipy.stats import binomtest

from .backends import ModelRun
from .evaluation import EvalConfig, EvalReport, evaluate
from .fusion import WcfConfig, wcf
from .suppression import nms, soft_nms
from .synthetic import SynthConfig, simulate_ensemble

__all__ = ["BenchResult", "bench_table1", "paired_sign_test"]

POOLED_NMS = "nms-pool"
POOLED_SOFT_NMS = "soft-nms-pool"
WCF_METHOD = "wcf"
MODEL_AVG = "model avg."


@dataclass(slots=True)
class BenchResult:
    seeds: list[int]
    # method -> one EvalReport per seed; individual models appear as model_1..model_K
    reports: dict[str, list[EvalReport]] = field(default_factory=dict)

    def series(self, method: str, metric: str = "map_50_95") -> list[float]:
        return [getattr(r, metric) for r in self.reports[method]]

    def mean(self, method: str, metric: str = "map_50_95") -> float:
        values = self.series(method, metric)
        return sum(values) / len(values)

    def model_ids(self) -> list[str]:
        return [m for m in self.reports if m.startswith("model_")]

    def to_markdown(self) -> str:
        header = "| Method | mAP(0.5:0.95) | mAP@0.5 | mAP@0.75 | Average Recall(0.5:0.95) |"
        rule = "|---|---|---|---|---|"
        rows = []
        order = self.model_ids() + [MODEL_AVG, POOLED_NMS, POOLED_SOFT_NMS, WCF_METHOD]
        for method in order:
            rows.append(
                "| {} | {:.3f} | {:.3f} | {:.3f} | {:.3f} |".format(
                    method,
                    self.mean(method, "map_50_95"),
                    self.mean(method, "ap_50"),
                    self.mean(method, "ap_75"),
                    self.mean(method, "average_recall"),
                )
            )
        lines = [header, rule, *rows]
        lines.append("")
        lines.append(f"seeds: {self.seeds}")
        return "\n".join(lines)


def _mean_report(reports: list[EvalReport]) -> EvalReport:
    n = len(reports)
    thresholds = reports[0].ap_per_threshold.keys()
    return EvalReport(
        ap_per_threshold={
            t: sum(r.ap_per_threshold[t] for r in reports) / n for t in thresholds
        },
        map_50_95=sum(r.map_50_95 for r in reports) / n,
        ap_50=sum(r.ap_50 for r in reports) / n if reports[0].ap_50 is not None else None,
        ap_75=sum(r.ap_75 for r in reports) / n if reports[0].ap_75 is not None else None,
        average_recall=sum(r.average_recall for r in reports) / n,
        n_gt=reports[0].n_gt,
        n_pred=round(sum(r.n_pred for r in reports) / n),
    )


def bench_table1(
    synth_cfg: SynthConfig,
    seeds: list[int],
    *,
    wcf_cfg: WcfConfig = WcfConfig(),
    nms_ciou: float = 0.5,
    eval_cfg: EvalConfig = EvalConfig(),
) -> BenchResult:
    """Run the method comparison over the given seeds."""
    if not seeds:
        raise ValueError("bench_table1 needs at least one seed")
    result = BenchResult(seeds=list(seeds))

    for seed in seeds:
        gt, runs = simulate_ensemble(replace(synth_cfg, seed=seed))
        gts = gt.circles

        deduped = [
            ModelRun(run.model_id, nms(run.detections, nms_ciou), run.source) for run in runs
        ]
        single_reports = []
        for run in deduped:
            report = evaluate(run.detections, gts, eval_cfg)
            result.reports.setdefault(run.model_id, []).append(report)
            single_reports.append(report)
        result.reports.setdefault(MODEL_AVG, []).append(_mean_report(single_reports))

        pooled = [d for run in runs for d in run.detections]
        result.reports.setdefault(POOLED_NMS, []).append(
            evaluate(nms(pooled, nms_ciou), gts, eval_cfg)
        )
        result.reports.setdefault(POOLED_SOFT_NMS, []).append(
            evaluate(soft_nms(pooled), gts, eval_cfg)
        )
        result.reports.setdefault(WCF_METHOD, []).append(
            evaluate(wcf(deduped, wcf_cfg), gts, eval_cfg)
        )
    return result


def paired_sign_test(a: list[float], b: list[float]) -> float:
    """One-sided sign test p-value for the hypothesis median(a - b) > 0.

    Ties are discarded; with no informative pairs the p-value is 1.0.
    """
    if len(a) != len(b):
        raise ValueError("paired series must have equal length")
    wins = sum(1 for x, y in zip(a, b) if x > y)
    informative = sum(1 for x, y in zip(a, b) if x != y)
    if informative == 0:
        return 1.0
    return float(binomtest(wins, informative, 0.5, alternative="greater").pvalue)
