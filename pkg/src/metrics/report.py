import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

CSV_HEADER = ("sample_id", "task", "metric", "value")
UNITS = {"psnr": "dB", "hd95": "px"}


@dataclass(frozen=True)
class MetricRow:
    sample_id: str
    task: str
    metric: str
    value: float

    @property
    def units(self) -> str:
        return UNITS.get(self.metric.split("_")[0], "")


@dataclass
class MetricReport:
    rows: list[MetricRow] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def add(self, sample_id: str, task: str, metric: str, value: float) -> None:
        self.rows.append(MetricRow(str(sample_id), task, metric, float(value)))

    def warn(self, message: str) -> None:
        logger.warning(message)
        self.warnings.append(message)

    def extend(self, other: "MetricReport") -> None:
        self.rows.extend(other.rows)
        self.warnings.extend(other.warnings)

    def summary(self) -> dict[tuple[str, str], float]:
        """Mean value per (task, metric); infinite rows make the mean infinite."""
        groups: dict[tuple[str, str], list[float]] = defaultdict(list)
        for row in self.rows:
            groups[(row.task, row.metric)].append(row.value)
        return {key: math.fsum(values) / len(values) for key, values in groups.items()}

    def mean(self, task: str, metric: str) -> float:
        try:
            return self.summary()[(task, metric)]
        except KeyError:
            raise KeyError(f"No '{metric}' rows for task '{task}' in the report.") from None

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_HEADER)
            for row in self.rows:
                writer.writerow((row.sample_id, row.task, row.metric, repr(row.value)))
        logger.info("Metric report written | path=%s rows=%d warnings=%d", path, len(self.rows), len(self.warnings))
