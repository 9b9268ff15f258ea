#!/usr/bin/env python3
"""
Excel exporter for feedwatch evaluation reports
Creates a workbook with one styled sheet per report table
"""

import logging
import math
from pathlib import Path

import openpyxl
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils import get_column_letter

from evaluation import METRIC_NAMES, REPORT_TABLES, read_eval_report

logger = logging.getLogger(__name__)

HEADER_FILL = PatternFill(start_color="E6E6FA", end_color="E6E6FA", fill_type="solid")
SHEET_TITLES = {
    "metrics_grid": "Metrics grid",
    "roc_points": "ROC points",
    "sweep_accuracy": "Sweep accuracy",
    "top_features": "Top features",
}


class ReportExcelExporter:
    def __init__(self, report_dir):
        """Load the evaluation report written by ``write_eval_report``."""
        self.report_dir = Path(report_dir)
        self.report = read_eval_report(self.report_dir)

    def _summary_rows(self):
        summary = self.report["summary"]
        rows = [("schema_version", summary["schema_version"])]
        for key, value in sorted(summary.get("config", {}).items()):
            if not isinstance(value, dict):
                rows.append((f"config.{key}", str(value)))
        roc = summary.get("roc")
        if roc:
            rows.append(("roc.cell", roc["cell"]))
            rows.append(("roc.auc", round(roc["auc"], 4)))
            for fpr, tpr in sorted(roc["tpr_at_fpr"].items(), key=lambda kv: float(kv[0])):
                rows.append((f"roc.tpr_at_fpr.{fpr}", round(tpr, 4)))
        for name, cell in summary.get("cells", {}).items():
            for role, accuracy in sorted(cell.get("role_accuracy", {}).items()):
                rows.append((f"{name}.accuracy.{role}", round(accuracy, 4)))
            rows.append((f"{name}.features", len(cell.get("features", []))))
        return rows

    @staticmethod
    def _style_sheet(ws, widths):
        for col_idx, width in enumerate(widths, 1):
            cell = ws.cell(row=1, column=col_idx)
            cell.font = Font(bold=True, size=11)
            cell.fill = HEADER_FILL
            cell.alignment = Alignment(horizontal="center")
            ws.column_dimensions[get_column_letter(col_idx)].width = width
        ws.auto_filter.ref = ws.dimensions
        ws.freeze_panes = "A2"

    def _add_table(self, wb, name, frame):
        ws = wb.create_sheet(SHEET_TITLES[name])
        ws.append(list(frame.columns))
        for record in frame.itertuples(index=False):
            row = []
            for column, value in zip(frame.columns, record):
                if column in METRIC_NAMES or column in ("weight", "mean_accuracy", "std_accuracy"):
                    value = round(float(value), 4)
                elif hasattr(value, "item"):
                    value = value.item()
                if isinstance(value, float) and not math.isfinite(value):
                    # threshold column opens with +inf
                    value = str(value)
                row.append(value)
            ws.append(row)
        widths = [max(12, len(str(c)) + 4) for c in frame.columns]
        self._style_sheet(ws, widths)
        return ws

    def create_workbook(self):
        wb = openpyxl.Workbook()
        ws = wb.active
        ws.title = "Summary"
        ws.append(["key", "value"])
        for row in self._summary_rows():
            ws.append(list(row))
        self._style_sheet(ws, [34, 20])
        for name in REPORT_TABLES:
            frame = self.report.get(name)
            if frame is not None:
                self._add_table(wb, name, frame)
        return wb

    def export(self, output_file=None):
        output_file = Path(output_file) if output_file else self.report_dir / "feedwatch_report.xlsx"
        wb = self.create_workbook()
        wb.save(output_file)
        logger.info("Saved workbook %s with %d sheet(s)", output_file, len(wb.sheetnames))
        return output_file
