"""
Styled Excel export of result tables (optional, needs openpyxl)
"""
import logging
from pathlib import Path
from typing import Dict

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from acdc_plf.config import settings

logger = logging.getLogger(__name__)


def write_workbook(tables: Dict[str, pd.DataFrame], path: Path) -> Path:
    """All tables as sheets, with rows breaching a voltage band highlighted"""
    wb = Workbook()
    wb.remove(wb.active)

    header_fill = PatternFill(start_color='366092', end_color='366092', fill_type='solid')
    header_font = Font(bold=True, color='FFFFFF')
    violation_fill = PatternFill(start_color='FFE6E6', end_color='FFE6E6', fill_type='solid')
    border = Border(
        left=Side(style='thin'),
        right=Side(style='thin'),
        top=Side(style='thin'),
        bottom=Side(style='thin')
    )

    for name, frame in tables.items():
        ws = wb.create_sheet(title=name[:31])
        headers = list(frame.columns)
        for col, header in enumerate(headers, 1):
            cell = ws.cell(row=1, column=col, value=header)
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = Alignment(horizontal='center', vertical='center')
            cell.border = border

        band_idx = [k for k, c in enumerate(frame.columns) if c.split("_")[0] in ("ovp", "lvp")]
        for row_idx, row in enumerate(frame.itertuples(index=False, name=None), 2):
            flagged = any(
                isinstance(row[k], float) and row[k] > settings.band_highlight_probability for k in band_idx
            )
            for col, value in enumerate(row, 1):
                if isinstance(value, float) and np.isnan(value):
                    value = None
                elif isinstance(value, np.generic):
                    value = value.item()
                cell = ws.cell(row=row_idx, column=col, value=value)
                cell.border = border
                if flagged:
                    cell.fill = violation_fill

        # Auto-adjust column widths
        for col in range(1, len(headers) + 1):
            max_length = max([len(str(headers[col - 1]))]
                             + [len(str(v)) for v in frame.iloc[:200, col - 1] if v is not None])
            ws.column_dimensions[get_column_letter(col)].width = min(max_length + 2, 50)

    wb.save(path)
    wb.close()
    logger.debug("Wrote %s with %d sheets", path, len(tables))
    return path
