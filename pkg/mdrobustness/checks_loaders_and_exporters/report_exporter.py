import importlib.resources
import json
import logging
import os

import pandas as pd
import yaml
from jinja2 import Template

logger = logging.getLogger(__name__)


class Exporter:
    """
    Registry of run-log exporters keyed by format.

    Exporter functions take ``data`` (the run log: a system-information dict
    followed by entry dicts) and ``file`` (the path to write). Formats are
    registered by instantiating a subclass.

    Methods
    -------
    export(data, format, file)
        Write ``data`` with the exporter registered for ``format``.

    Raises
    ------
    ValueError
        If the format is not registered.
    """

    format_dictionary = {}

    def __init__(self, format, exporter_function):
        type(self).format_dictionary[format] = exporter_function

    @classmethod
    def export(cls, data, format, file):
        if format not in cls.format_dictionary:
            raise ValueError(f"Format '{format}' is not supported.")
        output_function = cls.format_dictionary[format]
        return output_function(data, file)


class JSONExporter(Exporter):
    def __init__(self):
        Exporter.__init__(self, "json", self._export)

    @staticmethod
    def _export(data, file):
        with open(file, "w") as f:
            json.dump({"run_log": data}, f, indent=4, default=str)
        return f"{file} exported"


class CSVExporter(Exporter):
    """Run log as a flat table; the system information becomes the first row's description."""

    def __init__(self):
        Exporter.__init__(self, "csv", self._export)

    @staticmethod
    def _export(data, file):
        rows = [{"timestamp": "", "description": json.dumps(data[0])}] + list(data[1:])
        pd.DataFrame(rows).to_csv(file, index=False)
        return f"{file} exported"


class TXTExporter(Exporter):
    def __init__(self):
        Exporter.__init__(self, "txt", self._export)

    @staticmethod
    def _export(data, file):
        with open(file, "w") as f:
            for item in data:
                if isinstance(item, (dict, list)):
                    f.write(f"{json.dumps(item, indent=4, default=str)}\n")
                else:
                    f.write(f"{item}\n")
        return f"{file} exported"


class YAMLExporter(Exporter):
    def __init__(self):
        Exporter.__init__(self, "yaml", self._export)

    @staticmethod
    def _export(data, file):
        with open(file, "w") as f:
            yaml.safe_dump(data, f, sort_keys=False)
        return f"{file} exported"


def render_html(file, sys_info: dict, log_entries: list, tables: dict | None = None):
    """
    Render the run log, plus optional titled result tables, to an HTML page.

    Parameters
    ----------
    file : str or PathLike
    sys_info : dict
        Run environment shown in the page header.
    log_entries : list of dict
        Run-log entries; outcomes are decorated with a tick or cross.
    tables : dict of str to pd.DataFrame, optional
        Result tables rendered below the log, in insertion order.
    """
    html_template = (
        importlib.resources.files("mdrobustness.checks_loaders_and_exporters")
        .joinpath("report_template.html")
        .read_text(encoding="utf-8")
    )
    log_df = pd.DataFrame(log_entries)
    rows = log_df.values.tolist()
    rows = [["✅ pass" if v == "pass" else v for v in row] for row in rows]
    rows = [["❌ fail" if v == "fail" else v for v in row] for row in rows]
    rendered = Template(html_template).render(
        name=os.path.splitext(os.path.basename(file))[0],
        sys_info=sys_info,
        columns=log_df.columns.tolist(),
        rows=rows,
        tables={
            title: table.to_html(classes="result", float_format=lambda v: f"{v:.4f}")
            for title, table in (tables or {}).items()
        },
    )
    with open(file, "w", encoding="utf-8") as f:
        f.write(rendered)
    logger.info("report written to %s", file)
    return f"{file} exported"


class HTMLExporter(Exporter):
    def __init__(self):
        Exporter.__init__(self, "html", self._export)

    @staticmethod
    def _export(data, file):
        return render_html(file, data[0], data[1:])


# register the exporters
JSONExporter()
CSVExporter()
TXTExporter()
YAMLExporter()
HTMLExporter()
