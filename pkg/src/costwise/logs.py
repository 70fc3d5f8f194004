"""Workload logs: JSON Lines, one executed job (plan document + metadata) per line."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .plan import PlanError, PlanNode, build_plan, to_document


@dataclass(eq=False)
class LoggedJob:
    job_id: str
    template: str
    day: int
    adhoc: bool
    plan: PlanNode

    def to_json(self) -> str:
        return json.dumps(
            {
                "job_id": self.job_id,
                "template": self.template,
                "day": self.day,
                "adhoc": self.adhoc,
                "plan": to_document(self.plan),
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "LoggedJob":
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PlanError(f"malformed log line: {exc}") from exc
        if not isinstance(doc, dict) or "plan" not in doc:
            raise PlanError("log line must be an object with a 'plan'")
        return cls(
            job_id=str(doc.get("job_id", "")),
            template=str(doc.get("template", "")),
            day=int(doc.get("day", 0)),
            adhoc=bool(doc.get("adhoc", False)),
            plan=build_plan(doc["plan"]),
        )


def write_jobs(path: Union[str, Path], jobs: Iterable[LoggedJob]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for job in jobs:
            fh.write(job.to_json())
            fh.write("\n")
            n += 1
    return n


def read_jobs(path: Union[str, Path]) -> list[LoggedJob]:
    with open(path, encoding="utf-8") as fh:
        return [LoggedJob.from_json(line) for line in fh if line.strip()]
