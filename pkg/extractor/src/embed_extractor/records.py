"""TSV input parsing: one record per line, text plus optional pair plus label."""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


class ExtractError(ValueError):
    """Raised on malformed input rows or extraction misconfiguration."""


@dataclass
class TextRecord:
    text: str
    text_pair: Optional[str]
    label: int


def read_tsv(path):
    """Parse a headerless TSV with columns text[, text2], label.

    Every parse failure names the offending 1-based row.
    """
    path = Path(path)
    records = []
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row:
                raise ExtractError(f"row {row_no}: empty line")
            if len(row) == 2:
                text, pair, label_raw = row[0], None, row[1]
            elif len(row) == 3:
                text, pair, label_raw = row[0], row[1], row[2]
            else:
                raise ExtractError(
                    f"row {row_no}: expected 2 or 3 tab-separated columns, got {len(row)}"
                )
            if not text.strip() or (pair is not None and not pair.strip()):
                raise ExtractError(f"row {row_no}: empty text segment")
            try:
                label = int(label_raw)
            except ValueError:
                raise ExtractError(f"row {row_no}: label {label_raw!r} is not an integer") from None
            if label < 0:
                raise ExtractError(f"row {row_no}: label {label} is negative")
            records.append(TextRecord(text=text, text_pair=pair, label=label))
    if not records:
        raise ExtractError(f"{path} contains no records")
    return records
