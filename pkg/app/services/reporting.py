import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from app.core.errors import ParameterError
from app.core.logging_config import get_logger
from app.services.experiments import ExperimentResult

logger = get_logger(__name__)

SCHEMA_VERSION = "v1"


def schema_tag(command: str) -> str:
    return f"perfectsim.{command}/{SCHEMA_VERSION}"


def with_exact_columns(table: pd.DataFrame) -> pd.DataFrame:
    """
    Menambahkan kolom <nama>_exact berisi repr float untuk replay
    """
    out = table.copy()
    for column in table.columns:
        if pd.api.types.is_float_dtype(table[column]):
            out[f"{column}_exact"] = [repr(float(v)) for v in table[column]]
    return out


def _plain(value: Any) -> Any:
    # NaN/inf -> null, tipe numpy -> tipe Python
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def table_to_csv(table: pd.DataFrame) -> str:
    return with_exact_columns(table).to_csv(
        index=False,
        float_format="%.6g",
        na_rep="NaN",
        lineterminator="\n",
    )


def table_to_records(table: pd.DataFrame) -> List[Dict]:
    return [_plain(row) for row in table.to_dict(orient="records")]


def result_document(result: ExperimentResult) -> Dict:
    return {
        "schema": schema_tag(result.command),
        "config": _plain(result.config),
        "rows": table_to_records(result.table),
        "extras": _plain(result.extras),
    }


def render(result: ExperimentResult, fmt: str = "csv") -> str:
    """
    Tabel utama sebagai teks CSV atau dokumen JSON
    """
    fmt = fmt.lower()
    if fmt == "csv":
        return table_to_csv(result.table)
    if fmt == "json":
        return json.dumps(result_document(result), indent=2, allow_nan=False) + "\n"
    raise ParameterError(f"Format tidak valid: {fmt}")


def _render_side(name: str, result: ExperimentResult, table: pd.DataFrame, fmt: str) -> str:
    if fmt == "csv":
        return table_to_csv(table)
    document = {
        "schema": schema_tag(f"{result.command}.{name}"),
        "config": _plain(result.config),
        "rows": table_to_records(table),
    }
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def side_path(out: Path, name: str) -> Path:
    return out.with_name(f"{out.stem}_{name}{out.suffix}")


def write_result(result: ExperimentResult, out: Optional[str], fmt: str = "csv") -> List[Path]:
    """
    Menulis tabel utama dan tabel samping (<stem>_<nama>.<ext>)
    """
    try:
        fmt = fmt.lower()
        if out is None:
            return []
        path = Path(out)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        written = [path]
        path.write_text(render(result, fmt), encoding="utf-8")
        for name, table in result.side_tables.items():
            target = side_path(path, name)
            target.write_text(_render_side(name, result, table, fmt), encoding="utf-8")
            written.append(target)
        logger.info(f"Hasil ditulis ke {path}")
        return written
    except Exception as e:
        logger.error(f"Error saat menulis hasil: {str(e)}")
        raise
