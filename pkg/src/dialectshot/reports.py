"""Report builders mirroring the evaluation-matrix, gap, and comparison tables.

A matrix report is a train-dialect by eval-dialect grid per task, each cell
holding the finetuned score F, the adapted score TTA, and their difference.
The grid need not be square: a row's self-cell may be absent or supplied
separately.  Row, column, and corner averages are always recomputed from the
present cells; externally printed averages can be checked against them and
flagged when inconsistent.  Values stay unrounded internally and round to two
decimals only when rendered.
"""

import io
import csv
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .metrics import EvalResult, MetricsError, dialectal_gap, pearson

AVG = "Average"


@dataclass
class Cell:
    f: Optional[float] = None
    tta: Optional[float] = None

    @property
    def delta(self):
        if self.f is None or self.tta is None:
            return None
        return self.tta - self.f


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


@dataclass
class MatrixReport:
    tasks: List[str]
    train_dialects: List[str]
    eval_dialects: List[str]
    metrics: Dict[str, str]
    cells: Dict[Tuple[str, str, str], Cell]
    errors: List[dict] = field(default_factory=list)
    cross_task: Optional[Dict[Tuple[str, str], Cell]] = None

    def cell(self, task, train, eval_dialect) -> Cell:
        return self.cells.get((task, train, eval_dialect), Cell())

    def _triples(self, task, pairs):
        cells = [self.cell(task, tr, ev) for tr, ev in pairs]
        return (
            _mean([c.f for c in cells]),
            _mean([c.tta for c in cells]),
            _mean([c.delta for c in cells]),
        )

    def row_average(self, task, train):
        return self._triples(task, [(train, ev) for ev in self.eval_dialects])

    def col_average(self, task, eval_dialect):
        return self._triples(task, [(tr, eval_dialect) for tr in self.train_dialects])

    def corner_average(self, task):
        return self._triples(
            task, [(tr, ev) for tr in self.train_dialects for ev in self.eval_dialects]
        )

    def compare_averages(self, printed, tol=0.0105):
        """Flag printed average values that disagree with the recomputed ones.

        ``printed`` maps (task, "row"|"col"|"corner", dialect-or-"") to an
        (f, tta, delta) triple, entries optionally None.  Returns a list of
        discrepancy records; an empty list means every printed average is
        reproducible from the cells.
        """
        flags = []
        for (task, kind, tag), triple in printed.items():
            if kind == "row":
                computed = self.row_average(task, tag)
            elif kind == "col":
                computed = self.col_average(task, tag)
            elif kind == "corner":
                computed = self.corner_average(task)
            else:
                raise MetricsError(f"unknown average kind {kind!r}")
            for name, printed_v, computed_v in zip(("f", "tta", "delta"), triple, computed):
                if printed_v is None:
                    continue
                if computed_v is None or abs(computed_v - printed_v) > tol:
                    flags.append(
                        {
                            "task": task,
                            "kind": kind,
                            "tag": tag,
                            "column": name,
                            "printed": printed_v,
                            "computed": computed_v,
                        }
                    )
        return flags


def _rescale_value(value, metric):
    return (value + 100.0) / 2.0 if metric == "mcc" else value


def build_matrix_report(results, dialect_order=None, task_order=None, cross_task=False):
    """Assemble a MatrixReport from evaluation cells.

    At most one result may exist per (task, train, eval, mode).  Cell deltas
    are TTA - F where both are present; diagonal TTA cells are absent by
    protocol, leaving their delta empty.
    """
    tasks, train_dialects, eval_dialects = [], [], []
    metrics = {}
    cells: Dict[Tuple[str, str, str], Cell] = {}
    seen = set()
    for res in results:
        key = (res.task, res.train_dialect, res.eval_dialect, res.mode)
        if key in seen:
            raise MetricsError(f"duplicate matrix cell {key}")
        seen.add(key)
        if res.task not in tasks:
            tasks.append(res.task)
        metrics.setdefault(res.task, res.metric)
        if metrics[res.task] != res.metric:
            raise MetricsError(f"task {res.task!r} mixes metric kinds")
        if res.train_dialect not in train_dialects:
            train_dialects.append(res.train_dialect)
        if res.eval_dialect not in eval_dialects:
            eval_dialects.append(res.eval_dialect)
        cell = cells.setdefault((res.task, res.train_dialect, res.eval_dialect), Cell())
        if res.mode == "F":
            cell.f = res.value
        else:
            cell.tta = res.value

    def ordered(tags, order):
        if not order:
            return tags
        return [t for t in order if t in tags] + [t for t in tags if t not in order]

    report = MatrixReport(
        tasks=ordered(tasks, task_order),
        train_dialects=ordered(train_dialects, dialect_order),
        eval_dialects=ordered(eval_dialects, dialect_order),
        metrics=metrics,
        cells=cells,
    )
    for (task, train, ev), cell in cells.items():
        if cell.delta is not None and abs(cell.delta - (cell.tta - cell.f)) > 1e-12:
            raise MetricsError(f"inconsistent delta in cell ({task}, {train}, {ev})")
    if cross_task:
        report.cross_task = _build_cross_task(report)
    return report


def _build_cross_task(report: MatrixReport):
    """Average cells across tasks per (train, eval), rescaling mcc onto [0, 100]."""
    out = {}
    for train in report.train_dialects:
        for ev in report.eval_dialects:
            fs, ttas = [], []
            for task in report.tasks:
                cell = report.cell(task, train, ev)
                metric = report.metrics[task]
                if cell.f is not None:
                    fs.append(_rescale_value(cell.f, metric))
                if cell.tta is not None:
                    ttas.append(_rescale_value(cell.tta, metric))
            out[(train, ev)] = Cell(f=_mean(fs), tta=_mean(ttas))
    return out


def cross_task_to_csv(report: MatrixReport) -> str:
    if report.cross_task is None:
        raise MetricsError("report was built without cross-task averaging")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["train"]
    for tag in report.eval_dialects:
        header += [f"{tag}_F", f"{tag}_TTA", f"{tag}_delta"]
    writer.writerow(header)
    for train in report.train_dialects:
        row = [train]
        for ev in report.eval_dialects:
            cell = report.cross_task[(train, ev)]
            row += [_fmt(cell.f), _fmt(cell.tta), _fmt(cell.delta)]
        writer.writerow(row)
    return buf.getvalue()


def _fmt(value):
    return "" if value is None else f"{value:.2f}"


def matrix_to_csv(report: MatrixReport) -> str:
    """Wide CSV, one row per (task, train dialect) plus a per-task Average row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["task", "metric", "train"]
    for tag in report.eval_dialects + [AVG]:
        header += [f"{tag}_F", f"{tag}_TTA", f"{tag}_delta"]
    writer.writerow(header)
    for task in report.tasks:
        for train in report.train_dialects:
            row = [task, report.metrics[task], train]
            for ev in report.eval_dialects:
                cell = report.cell(task, train, ev)
                row += [_fmt(cell.f), _fmt(cell.tta), _fmt(cell.delta)]
            row += [_fmt(v) for v in report.row_average(task, train)]
            writer.writerow(row)
        row = [task, report.metrics[task], AVG]
        for ev in report.eval_dialects:
            row += [_fmt(v) for v in report.col_average(task, ev)]
        row += [_fmt(v) for v in report.corner_average(task)]
        writer.writerow(row)
    return buf.getvalue()


def parse_matrix_csv(text) -> List[EvalResult]:
    """Inverse of :func:`matrix_to_csv`; average rows and columns are skipped."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MetricsError("empty matrix CSV") from None
    if header[:3] != ["task", "metric", "train"]:
        raise MetricsError("matrix CSV must start with task,metric,train columns")
    slots = []  # (eval_tag, mode, column index)
    for i, name in enumerate(header[3:], start=3):
        tag, _, kind = name.rpartition("_")
        if not tag or kind not in ("F", "TTA", "delta"):
            raise MetricsError(f"bad matrix CSV column {name!r}")
        if tag != AVG and kind in ("F", "TTA"):
            slots.append((tag, kind, i))
    results = []
    for row in reader:
        task, metric, train = row[0], row[1], row[2]
        if train == AVG:
            continue
        for tag, mode, i in slots:
            if i < len(row) and row[i] != "":
                results.append(
                    EvalResult(
                        train_dialect=train,
                        eval_dialect=tag,
                        task=task,
                        mode=mode,
                        metric=metric,
                        value=float(row[i]),
                    )
                )
    return results


def matrix_to_markdown(report: MatrixReport) -> str:
    rows = [["Task", "Train"]]
    for tag in report.eval_dialects + [AVG]:
        rows[0] += [f"{tag} F", f"{tag} TTA", f"{tag} d"]
    for task in report.tasks:
        for train in report.train_dialects:
            row = [task, train]
            for ev in report.eval_dialects:
                cell = report.cell(task, train, ev)
                row += [_fmt(cell.f), _fmt(cell.tta), _fmt(cell.delta)]
            row += [_fmt(v) for v in report.row_average(task, train)]
            rows.append(row)
        row = [task, AVG]
        for ev in report.eval_dialects:
            row += [_fmt(v) for v in report.col_average(task, ev)]
        row += [_fmt(v) for v in report.corner_average(task)]
        rows.append(row)
    return _markdown_table(rows)


def _markdown_table(rows):
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for j, row in enumerate(rows):
        lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |")
        if j == 0:
            lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
    return "\n".join(lines) + "\n"


@dataclass
class GapReport:
    """Per-task, per-dialect gaps and adaptation deltas, plus their correlation."""

    reference: str
    tasks: List[str]
    dialects: List[str]  # evaluation dialects, reference excluded
    gaps: Dict[Tuple[str, str], float]
    deltas: Dict[Tuple[str, str], float]
    average_gap: Dict[str, float]
    r: float
    p: float
    n: int


def build_gap_report(report: MatrixReport, reference) -> GapReport:
    """Gaps of the reference dialect's row, with Pearson (gap, delta) statistics.

    For every task the reference self-cell F value anchors the gap; each other
    dialect contributes gap = rescaled(self) - rescaled(cross) and
    delta = TTA - F from the same row.
    """
    if reference not in report.train_dialects:
        raise MetricsError(f"reference dialect {reference!r} has no matrix row")
    dialects = [d for d in report.eval_dialects if d != reference]
    if not dialects:
        raise MetricsError("gap report needs at least one non-reference dialect")
    gaps, deltas, average_gap = {}, {}, {}
    pairs_x, pairs_y = [], []
    for task in report.tasks:
        self_cell = report.cell(task, reference, reference)
        if self_cell.f is None:
            raise MetricsError(f"missing {reference!r} self-cell for task {task!r}")
        cross = []
        for tag in dialects:
            cell = report.cell(task, reference, tag)
            if cell.f is None:
                raise MetricsError(f"missing F cell ({task!r}, {reference!r}, {tag!r})")
            cross.append(cell.f)
        gap_values, avg = dialectal_gap(self_cell.f, cross, report.metrics[task])
        average_gap[task] = avg
        for tag, gap in zip(dialects, gap_values):
            gaps[(task, tag)] = gap
            cell = report.cell(task, reference, tag)
            if cell.delta is not None:
                deltas[(task, tag)] = cell.delta
                pairs_x.append(gap)
                pairs_y.append(cell.delta)
    r, p = pearson(pairs_x, pairs_y)
    return GapReport(
        reference=reference,
        tasks=list(report.tasks),
        dialects=dialects,
        gaps=gaps,
        deltas=deltas,
        average_gap=average_gap,
        r=r,
        p=p,
        n=len(pairs_x),
    )


def gap_to_csv(report: GapReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["task", "stat"] + report.dialects + [AVG])
    for task in report.tasks:
        writer.writerow(
            [task, "gap"]
            + [_fmt(report.gaps.get((task, d))) for d in report.dialects]
            + [_fmt(report.average_gap[task])]
        )
        writer.writerow(
            [task, "delta"]
            + [_fmt(report.deltas.get((task, d))) for d in report.dialects]
            + [""]
        )
    writer.writerow(["all", "pearson_r", f"{report.r:.4f}"] + [""] * len(report.dialects))
    writer.writerow(["all", "pearson_p", f"{report.p:.4f}"] + [""] * len(report.dialects))
    writer.writerow(["all", "pearson_n", str(report.n)] + [""] * len(report.dialects))
    return buf.getvalue()


def gap_to_markdown(report: GapReport) -> str:
    rows = [["Task", "Stat"] + report.dialects + [AVG]]
    for task in report.tasks:
        rows.append(
            [task, "Gap"]
            + [_fmt(report.gaps.get((task, d))) for d in report.dialects]
            + [_fmt(report.average_gap[task])]
        )
        rows.append(
            [task, "Delta"]
            + [_fmt(report.deltas.get((task, d))) for d in report.dialects]
            + [""]
        )
    table = _markdown_table(rows)
    return table + f"\nPearson r = {report.r:.4f} (p = {report.p:.4f}, n = {report.n})\n"


@dataclass
class ComparisonReport:
    """Dialect-finetuned vs reference-finetuned vs adapted, with difference columns."""

    reference: str
    tasks: List[str]
    dialects: List[str]
    # group name -> (task, dialect) -> value
    values: Dict[str, Dict[Tuple[str, str], float]]

    GROUPS = ("dialect_ft", "ref_ft", "shot", "shot_minus_ref", "dialect_minus_shot")

    def averages(self, group, task):
        return _mean([self.values[group].get((task, d)) for d in self.dialects])


def build_comparison_report(report: MatrixReport, reference) -> ComparisonReport:
    """Per (task, dialect): in-dialect finetuning vs reference finetuning vs adaptation.

    The difference columns are adapted-minus-reference and
    dialect-minus-adapted, matching the sign conventions of the source tables.
    """
    if reference not in report.train_dialects:
        raise MetricsError(f"reference dialect {reference!r} has no matrix row")
    dialects = [d for d in report.eval_dialects if d != reference]
    values = {g: {} for g in ComparisonReport.GROUPS}
    for task in report.tasks:
        for tag in dialects:
            own = report.cell(task, tag, tag).f
            ref = report.cell(task, reference, tag).f
            shot = report.cell(task, reference, tag).tta
            missing = [
                name
                for name, v in (
                    ("dialect-finetuned F", own),
                    ("reference F", ref),
                    ("reference TTA", shot),
                )
                if v is None
            ]
            if missing:
                raise MetricsError(f"comparison cell ({task!r}, {tag!r}) missing {missing}")
            values["dialect_ft"][(task, tag)] = own
            values["ref_ft"][(task, tag)] = ref
            values["shot"][(task, tag)] = shot
            values["shot_minus_ref"][(task, tag)] = shot - ref
            values["dialect_minus_shot"][(task, tag)] = own - shot
    return ComparisonReport(
        reference=reference, tasks=list(report.tasks), dialects=dialects, values=values
    )


def comparison_to_csv(report: ComparisonReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["dialect"]
    for group in ComparisonReport.GROUPS:
        header += [f"{group}_{task}" for task in report.tasks]
    writer.writerow(header)
    for tag in report.dialects:
        row = [tag]
        for group in ComparisonReport.GROUPS:
            row += [_fmt(report.values[group].get((task, tag))) for task in report.tasks]
        writer.writerow(row)
    row = [AVG]
    for group in ComparisonReport.GROUPS:
        row += [_fmt(report.averages(group, task)) for task in report.tasks]
    writer.writerow(row)
    return buf.getvalue()


def comparison_to_markdown(report: ComparisonReport) -> str:
    rows = [["Dialect"]]
    for group in ComparisonReport.GROUPS:
        rows[0] += [f"{group} {task}" for task in report.tasks]
    for tag in report.dialects + [AVG]:
        row = [tag]
        for group in ComparisonReport.GROUPS:
            if tag == AVG:
                row += [_fmt(report.averages(group, task)) for task in report.tasks]
            else:
                row += [_fmt(report.values[group].get((task, tag))) for task in report.tasks]
        rows.append(row)
    return _markdown_table(rows)
