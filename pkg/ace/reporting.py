"""Run manifests and their table renderings."""

import csv
import io
import json
from dataclasses import asdict, dataclass, field

from .exceptions import ConfigurationError
from .metrics import EvalReport, fmt

REPORT_COLUMNS = (
    "epsilon", "effective_epsilon", "aurc_x1000", "nll", "brier", "accuracy_percent",
    "selective_risk", "coverage", "mean_queries",
)
MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    config_hash: str
    name: str
    seed: int
    tables: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def rows(self, table):
        return self.tables[table]

    def to_json(self):
        data = {
            "config_hash": self.config_hash,
            "name": self.name,
            "seed": self.seed,
            "tables": {name: [asdict(r) for r in rows] for name, rows in self.tables.items()},
            # keys are sorted on dump; this keeps the report order
            "table_order": list(self.tables),
            "details": self.details,
            "files": sorted(self.files),
        }
        return json.dumps(data, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
            order = data.get("table_order") or sorted(data["tables"])
            tables = {name: [EvalReport(**r) for r in data["tables"][name]] for name in order}
            return cls(config_hash=data["config_hash"], name=data["name"], seed=data["seed"],
                       tables=tables, details=data.get("details", {}), files=data.get("files", []))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigurationError(f"not a run manifest: {exc}") from exc


def _sorted(rows):
    return sorted(rows, key=lambda r: r.epsilon)


def write_report_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(report_csv_text(rows))


def report_csv_text(rows, table=None):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow((["table"] if table else []) + list(REPORT_COLUMNS))
    for row in _sorted(rows):
        writer.writerow(([table] if table else []) + [fmt(getattr(row, c)) for c in REPORT_COLUMNS])
    return out.getvalue()


def read_report_csv(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
                raise ConfigurationError(f"{path}: unexpected report columns {reader.fieldnames}")
            return [
                EvalReport(**{c: float(r[c]) if r[c] != "" else None for c in REPORT_COLUMNS})
                for r in reader
            ]
    except OSError as exc:
        raise ConfigurationError(f"cannot read report {path}: {exc}") from exc


def _cell(value, spec):
    return "-" if value is None else format(value, spec)


def render_rows(rows):
    """Aligned plain-text table: AURC x1000, accuracy in percent with 2 decimals."""
    header = ["eps", "effective eps", "eff/eps", "AURC x1e3", "NLL", "Brier", "Accuracy %",
              "Sel. risk", "Coverage", "Queries/sample"]
    body = []
    for r in _sorted(rows):
        body.append([
            _cell(r.epsilon, "g"),
            _cell(r.effective_epsilon, ".6g"),
            _cell(r.unspent_ratio, ".3f"),
            _cell(r.aurc_x1000, ".2f"),
            _cell(r.nll, ".4f"),
            _cell(r.brier, ".4f"),
            _cell(r.accuracy_percent, ".2f"),
            _cell(r.selective_risk, ".4f"),
            _cell(r.coverage, ".4f"),
            _cell(r.mean_queries, ".2f"),
        ])
    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(line, widths)) for line in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def report_table(manifest):
    if not any(manifest.tables.values()):
        raise ConfigurationError("manifest has no report rows")
    parts = [f"run {manifest.name} seed={manifest.seed} config={manifest.config_hash[:12]}"]
    for name, rows in manifest.tables.items():
        detail = manifest.details.get(name, {})
        title = name
        if detail:
            title += " (" + ", ".join(f"{k}={v}" for k, v in sorted(detail.items())) + ")"
        parts.append("")
        parts.append(title)
        parts.append(render_rows(rows))
    return "\n".join(parts) + "\n"


def report_csv(manifest):
    out = [",".join(["table", *REPORT_COLUMNS])]
    for name, rows in manifest.tables.items():
        out.extend(report_csv_text(rows, table=name).splitlines()[1:])
    return "\n".join(out) + "\n"
