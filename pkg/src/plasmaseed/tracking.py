"""Local experiment tracker.

Runs live in a plain directory tree, one JSON document per run plus
append-only metric logs and a copied artifacts folder:

    <root>/<experiment>/<run_id>/
        meta.json             run document (params, tags, artifacts, status)
        metrics/<name>.log    one "step value" line per observation
        artifacts/...         copied files, sha256 recorded in meta

The layout is diff-able and rsync-friendly, and the in-memory index can
always be rebuilt by rescanning the root.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import shutil
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    FilterSyntaxError,
    ImmutableRunError,
    TrackingError,
)

META_NAME = "meta.json"
_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")

RUNNING = "running"
FINISHED = "finished"
FAILED = "failed"
# scan-time label for a directory that never saw finish_run (crash, kill)
INCOMPLETE = "incomplete"

_END_STATES = (FINISHED, FAILED)


def _check_name(name: str, kind: str) -> str:
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise TrackingError(
            f"{kind} name {name!r} is not filesystem-safe; "
            "use letters, digits, '.', '_' or '-'")
    return name


def _write_json_atomic(path: Path, doc: dict) -> None:
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    os.replace(tmp, path)


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunRecord:
    """One tracked run. Mutable while running, frozen once finished."""

    store_root: Path
    experiment: str
    run_id: str
    status: str = RUNNING
    start_time: float = 0.0
    end_time: float | None = None
    params: dict = field(default_factory=dict)
    tags: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)  # {"path", "sha256"} dicts

    @property
    def run_dir(self) -> Path:
        return self.store_root / self.experiment / self.run_id

    def _meta_doc(self) -> dict:
        return {
            "version": 1,
            "run_id": self.run_id,
            "experiment": self.experiment,
            "status": self.status,
            "start_time": self.start_time,
            "end_time": self.end_time,
            "params": dict(self.params),
            "tags": dict(self.tags),
            "artifacts": list(self.artifacts),
        }

    def _save_meta(self) -> None:
        _write_json_atomic(self.run_dir / META_NAME, self._meta_doc())

    def _require_running(self, action: str) -> None:
        if self.status in _END_STATES:
            raise ImmutableRunError(
                f"cannot {action}: run {self.run_id} is {self.status}")

    def metric_series(self, name: str) -> list[tuple[int, float]]:
        """(step, value) pairs in log order; empty if never logged."""
        path = self.run_dir / "metrics" / f"{name}.log"
        if not path.exists():
            return []
        series = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            step_s, value_s = line.split(None, 1)
            series.append((int(step_s), float(value_s)))
        return series

    def metric_names(self) -> list[str]:
        mdir = self.run_dir / "metrics"
        if not mdir.is_dir():
            return []
        return sorted(p.stem for p in mdir.glob("*.log"))

    def last_metrics(self) -> dict:
        """Latest logged value per metric name."""
        out = {}
        for name in self.metric_names():
            series = self.metric_series(name)
            if series:
                out[name] = series[-1][1]
        return out

    def summary(self) -> dict:
        status = self.status
        if status == RUNNING:
            status = INCOMPLETE  # on-disk runs without a finish marker
        return {
            "run_id": self.run_id,
            "experiment": self.experiment,
            "status": status,
            "start_time": self.start_time,
            "end_time": self.end_time,
            "params": dict(self.params),
            "tags": dict(self.tags),
            "metrics": self.last_metrics(),
            "artifacts": [a["path"] for a in self.artifacts],
        }


class RunStore:
    """Directory-backed collection of experiments and runs."""

    def __init__(self, root):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            probe = self.root / ".write_probe"
            probe.write_text("", encoding="utf-8")
            probe.unlink()
        except OSError as exc:
            raise TrackingError(f"store root {self.root} is not writable: {exc}")

    def experiments(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def run_ids(self, experiment: str) -> list[str]:
        exp_dir = self.root / experiment
        if not exp_dir.is_dir():
            return []
        return sorted(p.name for p in exp_dir.iterdir()
                      if (p / META_NAME).is_file())

    def load_run(self, experiment: str, run_id: str) -> RunRecord:
        meta_path = self.root / experiment / run_id / META_NAME
        if not meta_path.is_file():
            raise TrackingError(f"no run {run_id!r} in experiment {experiment!r}")
        doc = json.loads(meta_path.read_text(encoding="utf-8"))
        return RunRecord(
            store_root=self.root,
            experiment=doc["experiment"],
            run_id=doc["run_id"],
            status=doc["status"],
            start_time=doc["start_time"],
            end_time=doc.get("end_time"),
            params=dict(doc.get("params", {})),
            tags=dict(doc.get("tags", {})),
            artifacts=list(doc.get("artifacts", [])),
        )

    def iter_runs(self, experiment: str | None = None):
        names = [experiment] if experiment is not None else self.experiments()
        for name in names:
            for run_id in self.run_ids(name):
                yield self.load_run(name, run_id)


def start_run(store: RunStore, experiment: str, params: dict | None = None) -> RunRecord:
    """Create a new run directory with status=running."""
    _check_name(experiment, "experiment")
    params = {str(k): str(v) for k, v in (params or {}).items()}
    for _ in range(8):
        run_id = uuid.uuid4().hex[:12]
        run_dir = store.root / experiment / run_id
        if not run_dir.exists():
            break
    else:  # pragma: no cover - 8 uuid collisions
        raise TrackingError("could not allocate a fresh run id")
    run = RunRecord(store_root=store.root, experiment=experiment,
                    run_id=run_id, status=RUNNING, start_time=time.time(),
                    params=params)
    try:
        (run_dir / "metrics").mkdir(parents=True)
        (run_dir / "artifacts").mkdir()
    except OSError as exc:
        raise TrackingError(f"cannot create run directory {run_dir}: {exc}")
    run._save_meta()
    return run


def log_metric(run: RunRecord, name: str, value: float, step: int = 0) -> None:
    """Append one observation to the metric's log file."""
    run._require_running("log a metric")
    _check_name(name, "metric")
    value = float(value)
    path = run.run_dir / "metrics" / f"{name}.log"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(f"{int(step)} {value!r}\n")
        fh.flush()
        os.fsync(fh.fileno())


def set_tag(run: RunRecord, name: str, value: str) -> None:
    run._require_running("set a tag")
    _check_name(name, "tag")
    run.tags[name] = str(value)
    run._save_meta()


def log_artifact(run: RunRecord, file_path, name: str | None = None) -> str:
    """Copy a file under the run and record its content hash.

    Returns the run-relative artifact path.
    """
    run._require_running("log an artifact")
    src = Path(file_path)
    if not src.is_file():
        raise TrackingError(f"artifact {src} is not a readable file")
    dest_name = name if name is not None else src.name
    _check_name(dest_name, "artifact")
    rel = f"artifacts/{dest_name}"
    dest = run.run_dir / rel
    shutil.copyfile(src, dest)
    entry = {"path": rel, "sha256": _sha256_file(dest)}
    run.artifacts = [a for a in run.artifacts if a["path"] != rel] + [entry]
    run._save_meta()
    return rel


def finish_run(run: RunRecord, status: str = FINISHED) -> RunRecord:
    """Freeze the run. Further writes raise ImmutableRunError."""
    if status not in _END_STATES:
        raise TrackingError(f"finish status must be one of {_END_STATES}")
    run._require_running("finish")
    run.status = status
    run.end_time = time.time()
    run._save_meta()
    return run


def audit_artifacts(run: RunRecord) -> list[tuple[str, bool]]:
    """(path, hash-matches) for every recorded artifact."""
    results = []
    for entry in run.artifacts:
        path = run.run_dir / entry["path"]
        ok = path.is_file() and _sha256_file(path) == entry["sha256"]
        results.append((entry["path"], bool(ok)))
    return results


# filter grammar: clause ("and" clause)*, where a clause is either
#   <metric> <op> <number>          rmse < 4       metrics.rmse <= 3.5
#   params.<name> =|==|!= <value>   params.family = et
# documented with examples in docs/filter_grammar.md

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<string>'[^']*'|\"[^\"]*\")"
    r"|(?P<op><=|>=|==|!=|<|>|=)"
    r"|(?P<word>[A-Za-z0-9._-]+))")

_METRIC_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "=": lambda a, b: a == b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def _tokenize(expr: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(expr):
        m = _TOKEN_RE.match(expr, pos)
        if m is None or m.end() == pos:
            tail = expr[pos:].strip()
            if not tail:
                break
            raise FilterSyntaxError(f"unrecognized filter text at {tail!r}")
        if m.group("string") is not None:
            tokens.append(("value", m.group("string")[1:-1]))
        elif m.group("op") is not None:
            tokens.append(("op", m.group("op")))
        else:
            tokens.append(("word", m.group("word")))
        pos = m.end()
    return tokens


@dataclass
class _Clause:
    kind: str  # "metric" or "param"
    name: str
    op: str
    value: object

    def matches(self, summary: dict) -> bool:
        if self.kind == "param":
            if self.name not in summary["params"]:
                return False
            current = summary["params"][self.name]
            return (current == self.value) == (self.op in ("=", "=="))
        if self.name not in summary["metrics"]:
            return False
        return _METRIC_OPS[self.op](summary["metrics"][self.name], self.value)


def parse_filter(expr: str) -> list[_Clause]:
    """Parse a filter expression into clauses; raises FilterSyntaxError."""
    tokens = _tokenize(expr)
    if not tokens:
        return []
    clauses = []
    i = 0
    while True:
        remaining = tokens[i:]
        if len(remaining) < 3:
            raise FilterSyntaxError(
                f"incomplete clause near {' '.join(str(t[1]) for t in remaining) or 'end'!s}")
        (name_kind, name), (op_kind, op), (val_kind, val) = remaining[:3]
        if name_kind != "word" or op_kind != "op":
            raise FilterSyntaxError(
                f"expected '<name> <op> <value>', got {name!r} {op!r}")
        if name.lower() == "and":
            raise FilterSyntaxError("dangling 'and' in filter")
        if name.startswith("params."):
            if op not in ("=", "==", "!="):
                raise FilterSyntaxError(
                    f"param clauses support = and !=, not {op!r}")
            clauses.append(_Clause("param", name[len("params."):], op, str(val)))
        else:
            metric = name[len("metrics."):] if name.startswith("metrics.") else name
            if not metric:
                raise FilterSyntaxError(f"empty metric name in {name!r}")
            if val_kind == "value":
                raise FilterSyntaxError(
                    f"metric {metric!r} must be compared to a number")
            try:
                number = float(val)
            except ValueError:
                raise FilterSyntaxError(
                    f"metric {metric!r} compared to non-number {val!r}")
            clauses.append(_Clause("metric", metric, op, number))
        i += 3
        if i == len(tokens):
            return clauses
        joiner_kind, joiner = tokens[i]
        if joiner_kind != "word" or joiner.lower() != "and":
            raise FilterSyntaxError(
                f"expected 'and' between clauses, got {joiner!r}")
        i += 1


def query_runs(store: RunStore, experiment: str | None = None,
               filter_expr: str = "") -> list[dict]:
    """Run summaries sorted by start time, ties broken by run_id."""
    clauses = parse_filter(filter_expr)
    summaries = [run.summary() for run in store.iter_runs(experiment)]
    if clauses:
        summaries = [s for s in summaries
                     if all(c.matches(s) for c in clauses)]
    summaries.sort(key=lambda s: (s["start_time"], s["run_id"]))
    return summaries
