"""Self-describing result tables: CSV with ``#`` metadata lines, or JSON.

CSV layout::

    # cdmaload <version>
    # command: curve
    # param alpha=0.5
    # unit snr_db=dB
    col_a,col_b
    1.0,2.0
    #! failed: <message>        (only when the run aborted)

The JSON form carries the same fields as one object.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field


@dataclass
class Table:
    command: str
    columns: list
    rows: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    units: dict = field(default_factory=dict)
    version: str = ""
    status: str = "ok"
    message: str = ""

    def column(self, name):
        return [r[name] for r in self.rows]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(text):
    if text == "":
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def to_csv(table):
    buf = io.StringIO()
    buf.write(f"# cdmaload {table.version}\n")
    buf.write(f"# command: {table.command}\n")
    for k, v in table.params.items():
        buf.write(f"# param {k}={_fmt(v)}\n")
    for k, v in table.units.items():
        buf.write(f"# unit {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(r.get(c)) for c in table.columns])
    if table.status != "ok":
        buf.write(f"#! {table.status}: {table.message}\n")
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def to_json(table):
    obj = {
        "tool": "cdmaload",
        "version": table.version,
        "command": table.command,
        "params": table.params,
        "units": table.units,
        "columns": table.columns,
        "rows": [[_json_value(r.get(c)) for c in table.columns] for r in table.rows],
        "status": table.status,
        "message": table.message,
    }
    return json.dumps(obj, indent=2) + "\n"


def _from_json_value(v):
    if isinstance(v, str) and v in ("inf", "-inf", "nan"):
        return float(v)
    return v


def read_table(text):
    """Parse either output format back into a :class:`Table`."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(text)
        cols = obj["columns"]
        rows = [dict(zip(cols, map(_from_json_value, r))) for r in obj["rows"]]
        return Table(
            obj["command"], cols, rows, obj["params"], obj["units"],
            obj["version"], obj["status"], obj["message"],
        )
    t = Table(command="", columns=[])
    data_lines = []
    for line in text.splitlines():
        if line.startswith("#!"):
            status, _, msg = line[2:].strip().partition(": ")
            t.status, t.message = status, msg
        elif line.startswith("# cdmaload "):
            t.version = line[len("# cdmaload "):].strip()
        elif line.startswith("# command: "):
            t.command = line[len("# command: "):].strip()
        elif line.startswith("# param "):
            k, _, v = line[len("# param "):].partition("=")
            t.params[k] = _parse(v)
        elif line.startswith("# unit "):
            k, _, v = line[len("# unit "):].partition("=")
            t.units[k] = v
        elif line.startswith("#"):
            continue
        elif line.strip():
            data_lines.append(line)
    reader = csv.reader(data_lines)
    header = next(reader, [])
    t.columns = header
    t.rows = [dict(zip(header, map(_parse, rec))) for rec in reader]
    return t
