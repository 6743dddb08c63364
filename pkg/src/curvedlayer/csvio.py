"""CSV tables with a one-line schema header.

Line 1 is ``# schema=<name> columns=<c1;c2;...> generated=<UTC timestamp>``;
the body (column names, then rows) is a deterministic function of the data:
floats are written with ``repr`` so they round-trip exactly.
"""

import csv
import datetime as _dt
import io


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if hasattr(v, "dtype"):
        v = v.item()
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def format_table(name, columns, rows, generated=None):
    """Return ``(header_line, body)`` strings."""
    if generated is None:
        generated = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    header = f"# schema={name} columns={';'.join(columns)} generated={generated}\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        if len(r) != len(columns):
            raise ValueError(f"row has {len(r)} cells, schema {name} has {len(columns)}")
        w.writerow([_cell(v) for v in r])
    return header, buf.getvalue()


def write_table(path, name, columns, rows, generated=None):
    header, body = format_table(name, columns, rows, generated)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header)
        fh.write(body)


def read_table(path):
    """Return ``(schema_name, columns, rows)`` with cells as strings."""
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.startswith("# schema="):
            raise ValueError(f"{path}: missing schema header")
        name = first.split()[1].split("=", 1)[1]
        reader = csv.reader(fh)
        columns = next(reader)
        rows = list(reader)
    return name, columns, rows


def table_body(path):
    """File content after the header line (what determinism is defined on)."""
    with open(path, "rb") as fh:
        fh.readline()
        return fh.read()
