"""The raw-trial CSV schema shared by model runs, sessions and analysis."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

CSV_FIELDS = (
    "experiment",
    "subject_or_run",
    "session",
    "block",
    "trial",
    "image_id",
    "condition",
    "true_category",
    "response",
    "rt_ms",
    "is_practice",
)
CSV_HEADER = ",".join(CSV_FIELDS)

NO_RESPONSE = "na"
ADAPTER_ERROR = "adapter_error"
NA = "na"


@dataclass(frozen=True)
class TrialRow:
    """One forced-choice trial in the raw-trial CSV."""

    experiment: str
    subject_or_run: str
    session: int
    block: int
    trial: int
    image_id: str
    condition: str
    true_category: str
    response: str  # category name, "na" (no response) or "adapter_error"
    rt_ms: int | None  # None -> "na" (models and no-response trials)
    is_practice: bool

    @property
    def is_no_response(self) -> bool:
        return self.response == NO_RESPONSE

    @property
    def is_adapter_error(self) -> bool:
        return self.response == ADAPTER_ERROR

    @property
    def is_correct(self) -> bool:
        return self.response == self.true_category

    def to_csv_values(self) -> list[str]:
        return [
            self.experiment,
            self.subject_or_run,
            str(self.session),
            str(self.block),
            str(self.trial),
            self.image_id,
            self.condition,
            self.true_category,
            self.response,
            NA if self.rt_ms is None else str(self.rt_ms),
            "true" if self.is_practice else "false",
        ]

    @classmethod
    def from_csv_values(cls, values: list[str]) -> "TrialRow":
        if len(values) != len(CSV_FIELDS):
            raise ValueError(f"expected {len(CSV_FIELDS)} columns, got {len(values)}")
        return cls(
            experiment=values[0],
            subject_or_run=values[1],
            session=int(values[2]),
            block=int(values[3]),
            trial=int(values[4]),
            image_id=values[5],
            condition=values[6],
            true_category=values[7],
            response=values[8],
            rt_ms=None if values[9] == NA else int(values[9]),
            is_practice=values[10] == "true",
        )


def write_trials(rows: Iterable[TrialRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for row in rows:
            writer.writerow(row.to_csv_values())


def read_trials(path) -> list[TrialRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CSV_FIELDS):
            raise ValueError(f"unexpected CSV header: {header}")
        return [TrialRow.from_csv_values(values) for values in reader if values]
