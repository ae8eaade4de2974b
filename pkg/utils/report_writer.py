"""
报告输出
report.json、每条轨迹/扫描一份 CSV、manifest.json 以及可选的 Excel 结论汇总
"""

import csv
import hashlib
import json
import logging
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from openpyxl import Workbook
from openpyxl.styles import Alignment, Font, PatternFill

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "overtake-lq-report/1"
RED_VERDICTS = ("refuted",)


def jsonable(value: Any) -> Any:
    """numpy 类型转为内置类型；非有限浮点数写成字符串"""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, Path):
        return str(value)
    return value


def format_cell(value: Any) -> str:
    """CSV 单元: 浮点数用 repr(17 位有效数字)"""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return "" if value is None else str(value)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


class ReportWriter:
    """一次场景运行的输出目录"""

    def __init__(self, output_dir: str = "output"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[Path] = []

    def _track(self, path: Path) -> Path:
        if path not in self.written:
            self.written.append(path)
        return path

    def write_table(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        """写一张 CSV 表(表头 + 数据行)"""
        path = self.output_dir / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(v) for v in row])
        logger.debug(f"写入表格: {path.name} ({len(rows)} 行)")
        return self._track(path)

    def write_json(self, name: str, data: Dict) -> Path:
        path = self.output_dir / name
        with open(path, "w", encoding="utf-8") as f:
            json.dump(jsonable(data), f, ensure_ascii=False, indent=2, sort_keys=False)
            f.write("\n")
        return self._track(path)

    def write_report(self, scenario_name: str, digest: str, commands: List[Dict],
                     config_used: Optional[Dict] = None) -> Path:
        """report.json；generated_at 是唯一随运行变化的字段"""
        report = {
            "schema": REPORT_SCHEMA,
            "generated_at": datetime.now().isoformat(timespec="seconds"),
            "scenario": scenario_name,
            "scenario_digest": digest,
            "config": config_used or {},
            "commands": commands,
        }
        return self.write_json("report.json", report)

    def write_manifest(self) -> Dict:
        """manifest.json: 已写文件的 SHA-256 与大小(不含自身)"""
        files = [{"path": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size}
                 for p in self.written]
        manifest = {"schema": REPORT_SCHEMA, "files": files}
        path = self.output_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest, f, ensure_ascii=False, indent=2)
            f.write("\n")
        return manifest

    def export_to_excel(self, results: List[Dict], excel_path: Optional[Path] = None) -> Path:
        """
        结论汇总工作簿(每个命令一行)

        Args:
            results: [{"index", "command", "label", "success", "verdict", "summary", "error"}]
            excel_path: 缺省为 verdicts_<时间戳>.xlsx

        Returns:
            工作簿路径
        """
        if excel_path is None:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            excel_path = self.output_dir / f"verdicts_{timestamp}.xlsx"
        excel_path = Path(excel_path)

        print(f"\n导出Excel: {excel_path.name}")
        print("-" * 70)

        wb = Workbook()
        ws = wb.active
        ws.title = "结论汇总"
        headers = ['序号', '命令', '对象', '成功', '结论', '摘要', '错误']
        ws.append(headers)

        header_fill = PatternFill(start_color="4472C4", end_color="4472C4", fill_type="solid")
        header_font = Font(bold=True, color="FFFFFF")
        for cell in ws[1]:
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = Alignment(horizontal='center', vertical='center')

        red_font = Font(color="FF0000", bold=True)
        red_fill = PatternFill(start_color="FFE6E6", end_color="FFE6E6", fill_type="solid")
        for row_num, result in enumerate(results, start=2):
            ws.append([
                result.get("index", row_num - 1),
                result.get("command", ""),
                result.get("label", ""),
                "✓" if result.get("success") else "✗",
                result.get("verdict", ""),
                result.get("summary", ""),
                result.get("error", "") or "",
            ])
            flagged = (not result.get("success")) or result.get("verdict") in RED_VERDICTS
            if flagged:
                for col in range(1, len(headers) + 1):
                    cell = ws.cell(row_num, col)
                    cell.font = red_font
                    cell.fill = red_fill
            mark = "⚠️ " if flagged else ""
            print(f"  {row_num - 1}. {result.get('command', '')} | {mark}{result.get('verdict', '')}")

        column_widths = [6, 16, 24, 8, 28, 50, 40]
        for i, width in enumerate(column_widths, 1):
            ws.column_dimensions[ws.cell(1, i).column_letter].width = width
        for row in ws.iter_rows(min_row=2, max_row=ws.max_row):
            for cell in row:
                cell.alignment = Alignment(horizontal='left', vertical='center', wrap_text=True)

        wb.save(excel_path)
        print(f"\n✓ Excel导出成功: {excel_path}")
        self._track(excel_path)
        return excel_path
