"""
产物读写：CSV（17 位有效数字）、JSON、势场与解快照的 dump/load

写入统一走 aiofiles，调用方在事件循环里 await。
"""

import csv
import hashlib
import io
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

import aiofiles
import aiofiles.os
import numpy as np

from utils.errors import InputError
from utils.lattice import TorusGeometry, all_coords, indices_of
from utils.potential import PotentialField, field_from_values

logger = logging.getLogger(__name__)

MAX_LOG_SCALE = 700.0


def format_value(value: Any) -> str:
    """CSV 单元格：浮点 .17g，布尔 true/false，缺失值为空串"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if isinstance(value, (tuple, list)):
        return " ".join(format_value(v) for v in value)
    return str(value)


def parse_value(text: str) -> Any:
    """format_value 的逆：空串 → None，true/false → bool，其余尽量转数字"""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def render_records(records: List[Dict[str, Any]], header: Optional[Sequence[str]] = None) -> str:
    """字典行 → CSV 文本，列顺序取 header 或首行键顺序（后续行的新键依次追加）"""
    if header is None:
        header = []
        for record in records:
            for key in record:
                if key not in header:
                    header.append(key)
    return render_csv(header, ([record.get(k) for k in header] for record in records))


def parse_csv(text: str) -> List[Dict[str, Any]]:
    reader = csv.DictReader(io.StringIO(text))
    return [{k: parse_value(v) for k, v in row.items()} for row in reader]


def checksum(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


async def write_text(path: str, text: str) -> str:
    """写文件并返回内容 sha256"""
    directory = os.path.dirname(path)
    if directory:
        await aiofiles.os.makedirs(directory, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8", newline="") as f:
        await f.write(text)
    logger.debug(f"💾 已写入 {path}")
    return checksum(text)


async def read_text(path: str) -> str:
    try:
        async with aiofiles.open(path, "r", encoding="utf-8", newline="") as f:
            return await f.read()
    except FileNotFoundError:
        raise InputError(f"文件不存在: {path}")


async def write_records(path: str, records: List[Dict[str, Any]],
                        header: Optional[Sequence[str]] = None) -> str:
    return await write_text(path, render_records(records, header))


async def read_records(path: str) -> List[Dict[str, Any]]:
    return parse_csv(await read_text(path))


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"无法序列化为 JSON: {type(value).__name__}")


def render_json(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True, default=_json_default) + "\n"


async def write_json(path: str, data: Any) -> str:
    return await write_text(path, render_json(data))


async def read_json(path: str) -> Any:
    text = await read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"JSON 解析失败 {path}: {e}")


def _coord_header(d: int) -> List[str]:
    return [f"coord_{i + 1}" for i in range(d)]


def field_csv(field: PotentialField) -> str:
    """coord_1..coord_d,xi，按线性下标（字典序）排列"""
    g = field.geometry
    coords = all_coords(g)
    return render_csv(_coord_header(g.d) + ["xi"],
                      ([*map(int, coords[i]), float(field.values[i])] for i in range(g.size)))


def parse_field(text: str, gamma: float, seed: Optional[int] = None) -> PotentialField:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("势场 CSV 为空")
    d = len(header) - 1
    if d < 1 or header != _coord_header(d) + ["xi"]:
        raise InputError(f"势场 CSV 表头不合法: {header}")
    rows = [row for row in reader if row]
    side = round(len(rows) ** (1.0 / d))
    if side ** d != len(rows):
        raise InputError(f"行数 {len(rows)} 不是 {d} 维环面的站点数")
    g = TorusGeometry(d, side)
    coords = np.array([[int(c) for c in row[:d]] for row in rows], dtype=np.int64)
    values = np.empty(g.size)
    values[indices_of(coords, g)] = [float(row[d]) for row in rows]
    return field_from_values(g, values, gamma, seed)


async def dump_field(path: str, field: PotentialField) -> str:
    return await write_text(path, field_csv(field))


async def load_field(path: str, gamma: float, seed: Optional[int] = None) -> PotentialField:
    return parse_field(await read_text(path), gamma, seed)


def snapshot_csv(snapshot) -> str:
    """coord_1..coord_d,u[,stderr]

    log_scale 不溢出时写真实值；否则写存储值，列名为 u_scaled，真实值 = u_scaled·exp(log_scale)
    """
    g: TorusGeometry = snapshot.geometry
    coords = all_coords(g)
    overflow = snapshot.log_scale > MAX_LOG_SCALE
    factor = 1.0 if overflow else math.exp(snapshot.log_scale)
    header = _coord_header(g.d) + ["u_scaled" if overflow else "u"]
    with_stderr = snapshot.mc_stderr is not None
    if with_stderr:
        header.append("stderr")
    rows = []
    for i in range(g.size):
        row = [*map(int, coords[i]), float(snapshot.u[i]) * factor]
        if with_stderr:
            row.append(float(snapshot.mc_stderr[i]) * factor)
        rows.append(row)
    return render_csv(header, rows)


async def dump_snapshot(path: str, snapshot) -> Dict[str, str]:
    """快照 CSV + JSON sidecar，返回 {路径: sha256}"""
    sidecar_path = os.path.splitext(path)[0] + ".json"
    return {
        path: await write_text(path, snapshot_csv(snapshot)),
        sidecar_path: await write_json(sidecar_path, snapshot.sidecar()),
    }
