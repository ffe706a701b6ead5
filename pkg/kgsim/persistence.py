"""
Atomic CSV/JSON writers and the gnuplot script emitter.
"""

import csv
import io
import json
import math
import os
import uuid
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import aiofiles
import aiofiles.os
import numpy as np
from jinja2 import Environment, PackageLoader, StrictUndefined
from pydantic import BaseModel

from .config import config

PathLike = Union[str, os.PathLike]

_templates = Environment(
    loader=PackageLoader("kgsim", "templates"),
    undefined=StrictUndefined,
    keep_trailing_newline=True,
)


def format_value(value: Any) -> str:
    """Floats at 17 significant digits; None as an empty field."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float) or hasattr(value, "dtype"):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return format(value, config.FLOAT_FORMAT)
    return str(value)


def render_csv(rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buffer.getvalue()


async def _write_atomic(path: PathLike, data: Union[str, bytes]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{uuid.uuid4().hex}.tmp")
    try:
        if isinstance(data, bytes):
            async with aiofiles.open(tmp, "wb") as f:
                await f.write(data)
        else:
            async with aiofiles.open(tmp, "w", encoding="utf-8", newline="\n") as f:
                await f.write(data)
        await aiofiles.os.replace(tmp, path)
    finally:
        if tmp.exists():
            await aiofiles.os.remove(tmp)
    return path


async def write_text_atomic(path: PathLike, text: str) -> Path:
    """Write to a temporary sibling, then rename over the target."""
    return await _write_atomic(path, text)


async def write_npz(path: PathLike, **arrays: np.ndarray) -> Path:
    buffer = io.BytesIO()
    np.savez_compressed(buffer, **arrays)
    return await _write_atomic(path, buffer.getvalue())


async def write_csv(path: PathLike, rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> Path:
    return await write_text_atomic(path, render_csv(rows, columns))


def _default(value: Any):
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"cannot serialise {type(value).__name__}")


async def write_json(path: PathLike, data: Union[BaseModel, Dict[str, Any]]) -> Path:
    if isinstance(data, BaseModel):
        text = data.model_dump_json(indent=2)
    else:
        text = json.dumps(data, indent=2, default=_default)
    return await write_text_atomic(path, text + "\n")


async def read_json(path: PathLike) -> Dict[str, Any]:
    async with aiofiles.open(path, "r", encoding="utf-8") as f:
        return json.loads(await f.read())


def render_gnuplot(csv_name: str, x: str, columns: List[str], title: str, output: Optional[str] = None) -> str:
    template = _templates.get_template("timeseries.gp.j2")
    return template.render(csv_name=csv_name, x=x, columns=columns, title=title, output=output)


async def write_gnuplot(
    path: PathLike, csv_name: str, x: str, columns: List[str], title: str
) -> Path:
    output = Path(path).with_suffix(".png").name
    return await write_text_atomic(path, render_gnuplot(csv_name, x, columns, title, output))
