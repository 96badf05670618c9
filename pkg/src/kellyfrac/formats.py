"""File formats: price CSVs, return CSVs, JSON reports, atomic writes.

Price CSVs come in two layouts, which may be mixed across files:

* wide: ``date,<id1>,<id2>,...``, one column per instrument;
* per-instrument: ``date,adj_close``; the instrument id is the file stem.

Dates are ISO-8601 (``YYYY-MM-DD``). Files are joined on the intersection
of their dates. Inside a file every cell is required.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import GbmParams
from .errors import InputError, StorageError
from .estimation import InstrumentPanel

SCHEMA_VERSION = 1
PER_INSTRUMENT_HEADER = ["date", "adj_close"]


@dataclass(frozen=True)
class PanelIngest:
    panel: InstrumentPanel
    dropped: dict = field(default_factory=dict)


def _read_rows(path: Path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except FileNotFoundError:
        raise StorageError(f"{path}: no such file") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise StorageError(f"{path}: {exc}") from None


def _parse_number(text: str, where: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise InputError(f"{where}: cannot parse {text!r} as a number") from None
    if not math.isfinite(x):
        raise InputError(f"{where}: non-finite value {text!r}")
    return x


def _parse_date(text: str, where: str) -> np.datetime64:
    try:
        return np.datetime64(dt.date.fromisoformat(text.strip()), "D")
    except ValueError:
        raise InputError(f"{where}: cannot parse {text!r} as an ISO-8601 date") from None


def read_price_file(path) -> tuple[list, dict]:
    """Parse one price CSV into ``(ids, {date: row_of_prices})``."""
    path = Path(path)
    rows = _read_rows(path)
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise InputError(f"{path}, line 1: header must start with 'date' and name at least one column")
    if [h.lower() for h in header] == PER_INSTRUMENT_HEADER:
        ids = [path.stem]
    else:
        ids = header[1:]
        if any(not i for i in ids):
            raise InputError(f"{path}, line 1: empty instrument name in header")
    width = len(header)
    data = {}
    for lineno, row in enumerate(rows[1:], start=2):
        where = f"{path}, line {lineno}"
        if len(row) != width:
            raise InputError(f"{where}: expected {width} cells, found {len(row)}")
        date = _parse_date(row[0], where)
        if date in data:
            raise InputError(f"{where}: duplicate date {date}")
        vals = []
        for col, cell in zip(header[1:], row[1:]):
            if not cell.strip():
                raise InputError(f"{where}: missing value for {col!r}")
            vals.append(_parse_number(cell, f"{where}, column {col!r}"))
        data[date] = vals
    return ids, data


def ingest_panel(paths) -> PanelIngest:
    """Read and align one or more price CSVs.

    ``dropped`` maps each file to the number of its rows whose date is not
    shared by every other file.
    """
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    paths = [Path(p) for p in paths]
    if not paths:
        raise InputError("no price files given")
    parsed = [read_price_file(p) for p in paths]
    ids = [i for file_ids, _ in parsed for i in file_ids]
    if len(set(ids)) != len(ids):
        raise InputError(f"instrument ids collide across files: {ids}")
    common = set(parsed[0][1])
    for _, data in parsed[1:]:
        common &= set(data)
    dates = sorted(common)
    if len(dates) < 3:
        raise InputError(f"only {len(dates)} dates are shared by all files; need at least 3")
    dropped = {str(p): len(data) - len(dates) for p, (_, data) in zip(paths, parsed)}
    prices = np.array([[v for _, data in parsed for v in data[d]] for d in dates])
    panel = InstrumentPanel(tuple(ids), np.array(dates, dtype="datetime64[D]"), prices)
    return PanelIngest(panel, dropped)


def read_returns(path) -> np.ndarray:
    """Per-period returns from a one-column CSV; a non-numeric first row is a header."""
    path = Path(path)
    rows = [r for r in _read_rows(path) if any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    out = []
    for lineno, row in enumerate(rows, start=1):
        cells = [c for c in row if c.strip()]
        where = f"{path}, line {lineno}"
        if len(cells) != 1:
            raise InputError(f"{where}: expected exactly one value, found {len(cells)}")
        if lineno == 1:
            try:
                float(cells[0])
            except ValueError:
                continue
        out.append(_parse_number(cells[0], where))
    return np.array(out)


def fmt_float(x) -> str:
    """17 significant digits; integral values keep a trailing ``.0``."""
    text = format(float(x), ".17g")
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def panel_to_csv(panel: InstrumentPanel) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", *panel.instrument_ids])
    for d, row in zip(panel.dates, panel.prices):
        w.writerow([str(d), *(fmt_float(x) for x in row)])
    return buf.getvalue()


def to_jsonable(obj):
    """Convert numpy containers, dates and dataclass-free nests to plain Python."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist()) if obj.dtype.kind != "M" else [str(d) for d in obj]
    if isinstance(obj, np.datetime64):
        return str(obj)
    if isinstance(obj, (dt.date, dt.datetime)):
        return obj.isoformat()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _emit(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, dict)) for v in obj):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in obj) + "]"
        items = ",\n".join(pad + _emit(v, indent, level + 1) for v in obj)
        return "[\n" + items + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(f"{pad}{json.dumps(k)}: {_emit(v, indent, level + 1)}" for k, v in obj.items())
        return "{\n" + items + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits.

    NaN and infinities become ``null``.
    """
    return _emit(to_jsonable(obj), indent, 0) + "\n"


def write_atomic(path, data) -> Path:
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from None
    return path


def params_to_dict(params: GbmParams, instrument_ids=None) -> dict:
    ids = list(instrument_ids) if instrument_ids is not None else [f"asset{j + 1}" for j in range(params.m)]
    return {
        "instrument_ids": ids,
        "mu": params.mu,
        "sigma": params.sigma,
        "corr": params.corr,
        "cov": params.cov,
    }


def params_from_dict(d: dict, where: str = "params") -> tuple[GbmParams, list]:
    """Build :class:`GbmParams` from ``{mu, sigma, corr}`` or ``{mu, cov}``."""
    try:
        mu = np.asarray(d["mu"], dtype=float)
        if "sigma" in d and "corr" in d:
            params = GbmParams(mu, d["sigma"], d["corr"])
        elif "cov" in d:
            params = GbmParams.from_covariance(mu, d["cov"])
        else:
            raise InputError(f"{where}: need 'sigma' and 'corr', or 'cov'")
    except (KeyError, TypeError) as exc:
        raise InputError(f"{where}: malformed parameter block ({exc})") from None
    ids = list(d.get("instrument_ids") or [f"asset{j + 1}" for j in range(params.m)])
    if len(ids) != params.m:
        raise InputError(f"{where}: {len(ids)} instrument ids for {params.m} instruments")
    return params, ids


@dataclass(frozen=True)
class ParamsFile:
    """Parameters loaded from JSON.

    ``params`` is what leverage is computed from (the post-tax block of an
    ``estimate`` report). ``pre_tax`` and ``tax_rates`` are set only when
    the file carries them.
    """

    params: GbmParams
    instrument_ids: list
    pre_tax: GbmParams | None = None
    tax_rates: np.ndarray | None = None


def load_params(path) -> ParamsFile:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise StorageError(f"{path}: no such file") from None
    except OSError as exc:
        raise StorageError(f"{path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a JSON object")
    if "post_tax" in doc:
        post, ids = params_from_dict(doc["post_tax"], f"{path}: post_tax")
        pre = None
        if "pre_tax" in doc:
            pre, _ = params_from_dict(doc["pre_tax"], f"{path}: pre_tax")
        rates = np.asarray(doc["tax_rates"], dtype=float) if "tax_rates" in doc else None
        return ParamsFile(post, ids, pre, rates)
    params, ids = params_from_dict(doc, str(path))
    return ParamsFile(params, ids)
