import re
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from ace.exceptions import ConfigurationError
from ace.metrics import EvalReport, RCCurve, rc_curve, worst_case_for
from ace.reporting import (
    REPORT_COLUMNS, RunManifest, read_report_csv, render_rows, report_csv, report_table, write_report_csv,
)
from ace.svg import render_rc_svg, rc_svg

from .factories import scored


def row(epsilon, aurc=10.0, effective=None, accuracy=90.0, **extra):
    effective = epsilon / 2 if effective is None else effective
    return EvalReport(epsilon=epsilon, effective_epsilon=effective, aurc_x1000=aurc, nll=0.3, brier=0.15,
                      accuracy_percent=accuracy, **extra)


def manifest(**tables):
    return RunManifest(config_hash="ab" * 32, name="unit", seed=7, tables=tables,
                       details={name: {"scorer": "softmax_response"} for name in tables})


class RenderTests(SimpleTestCase):
    def test_rows_are_ordered_by_epsilon(self):
        text = render_rows([row(0.2), row(0.0), row(0.05)])
        eps = [line.split()[0] for line in text.splitlines()[2:]]
        self.assertEqual(eps, ["0", "0.05", "0.2"])

    def test_clean_only(self):
        lines = render_rows([row(0.0, effective=0.0)]).splitlines()
        self.assertEqual(len(lines), 3)
        cells = lines[2].split()
        self.assertEqual(cells[:3], ["0", "0", "-"])
        self.assertEqual(cells[6], "90.00")

    def test_formats(self):
        cells = render_rows([row(0.1, aurc=123.456, accuracy=87.654321, mean_queries=2.5)]).splitlines()[2].split()
        self.assertEqual(cells[2], "0.500")
        self.assertEqual(cells[3], "123.46")
        self.assertEqual(cells[6], "87.65")
        self.assertEqual(cells[-1], "2.50")

    def test_report_table_lists_every_table(self):
        text = report_table(manifest(softmax_whitebox=[row(0.0), row(0.1)], selnet_direct=[row(0.0)]))
        self.assertTrue(text.startswith(f"run unit seed=7 config={'ab' * 6}\n"))
        self.assertIn("softmax_whitebox (scorer=softmax_response)", text)
        self.assertIn("selnet_direct", text)

    def test_empty_manifest(self):
        with self.assertRaises(ConfigurationError):
            report_table(manifest())


class CsvTests(SimpleTestCase):
    def test_report_csv_reads_back(self):
        rows = [row(0.05, aurc=1 / 3, selective_risk=0.125, coverage=0.7), row(0.0, effective=0.0)]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "table.csv"
            write_report_csv(rows, path)
            header = path.read_text().splitlines()[0]
            loaded = read_report_csv(path)
        self.assertEqual(header, ",".join(REPORT_COLUMNS))
        self.assertEqual(loaded, sorted(rows, key=lambda r: r.epsilon))

    def test_unexpected_columns(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "table.csv"
            path.write_text("eps,aurc\n0,1\n")
            with self.assertRaises(ConfigurationError):
                read_report_csv(path)

    def test_combined_csv_tags_the_table(self):
        lines = report_csv(manifest(a=[row(0.0)], b=[row(0.1), row(0.0)])).splitlines()
        self.assertEqual(lines[0], "table," + ",".join(REPORT_COLUMNS))
        self.assertEqual([line.split(",")[:2] for line in lines[1:]], [["a", "0"], ["b", "0"], ["b", "0.10000000000000001"]])

    def test_manifest_json(self):
        original = manifest(softmax_whitebox=[row(0.0), row(0.1, mean_queries=3.0)])
        original.files = ["report.txt", "data/test.csv"]
        loaded = RunManifest.from_json(original.to_json())
        self.assertEqual(loaded.tables, original.tables)
        self.assertEqual(loaded.files, ["data/test.csv", "report.txt"])
        self.assertEqual(loaded.to_json(), original.to_json())
        with self.assertRaises(ConfigurationError):
            RunManifest.from_json('{"name": "x"}')


class SvgTests(SimpleTestCase):
    def setUp(self):
        self.items = scored([0.9, 0.8, 0.7, 0.6, 0.5], [0, 1, 0, 0, 1])

    def test_flat_zero_curve(self):
        text = rc_svg([("clean", rc_curve(scored([0.9, 0.5], [0, 0])))])
        self.assertIn(">clean 0.0</text>", text)
        points = re.search(r'<polyline points="([^"]+)"', text).group(1).split()
        self.assertEqual({p.split(",")[1] for p in points}, {"430.00"})

    def test_same_input_same_bytes(self):
        curves = [("eps=0", rc_curve(self.items)), ("worst case", worst_case_for(self.items), "worst")]
        with tempfile.TemporaryDirectory() as tmp:
            a, b = Path(tmp) / "a.svg", Path(tmp) / "b.svg"
            render_rc_svg(curves, a, title="t")
            render_rc_svg(curves, b, title="t")
            self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_worst_case_is_never_below_the_observed(self):
        observed = rc_curve(self.items)
        worst = worst_case_for(self.items)
        at = {c: r for c, r in zip(worst.coverage.tolist(), worst.risk.tolist())}
        for c, r in zip(observed.coverage.tolist(), observed.risk.tolist()):
            self.assertGreaterEqual(at[c], r)
        text = rc_svg([("observed", observed), ("worst case", worst, "worst")])
        self.assertIn('stroke-dasharray="6,4"', text)

    def test_names_are_escaped(self):
        self.assertIn("a&lt;b", rc_svg([("a<b", rc_curve(self.items))]))

    def test_nothing_to_plot(self):
        with self.assertRaises(ConfigurationError):
            rc_svg([])
        empty = RCCurve(coverage=np.zeros(0), risk=np.zeros(0), threshold=np.zeros(0), counts=np.zeros(0))
        with self.assertRaises(ConfigurationError):
            rc_svg([("empty", empty)])
