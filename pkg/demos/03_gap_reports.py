# Dialect-gap bookkeeping on hand-made evaluation cells.
#
# A matrix report collects eval(X, Y) cells per task; the gap report measures
# how much each non-reference dialect trails the reference's self-evaluation
# and correlates those gaps with the adaptation deltas.  The numbers below
# are invented for the demonstration.
#
# Run: python demos/03_gap_reports.py

from dialectshot import EvalResult, build_gap_report, build_matrix_report
from dialectshot.reports import gap_to_markdown, matrix_to_markdown

REF = "ref"
DIALECTS = ("north", "south", "island")

cells = []
# Reference self-evaluation plus its row of cross-dialect cells, two tasks.
for task, metric, self_value, cross in (
    ("polarity", "accuracy", 90.0, {"north": (84.0, 86.5), "south": (81.0, 84.5), "island": (86.0, 87.0)}),
    ("acceptability", "mcc", 52.0, {"north": (30.0, 38.0), "south": (22.0, 33.0), "island": (40.0, 44.0)}),
):
    cells.append(EvalResult(REF, REF, task, "F", metric, self_value))
    for tag, (f_value, tta_value) in cross.items():
        cells.append(EvalResult(REF, tag, task, "F", metric, f_value))
        cells.append(EvalResult(REF, tag, task, "TTA", metric, tta_value))

report = build_matrix_report(cells, dialect_order=[REF, *DIALECTS])
print(matrix_to_markdown(report))

gap = build_gap_report(report, REF)
print(gap_to_markdown(gap))
print("wider gap, larger adaptation benefit?" , f"r = {gap.r:+.3f} over n = {gap.n} pairs")
