import copy
import getpass
import platform
import warnings

import numpy as np
import pandas as pd
import pandera

from mdrobustness import __version__
from mdrobustness.checks_loaders_and_exporters.report_exporter import Exporter, render_html
from mdrobustness.errors import HardCheckError

ENTRY_TYPES = ("info", "error", "warning")


def _plain(value):
    return value.item() if isinstance(value, np.generic) else value


class RunLog:
    """
    QA record of an experiment run.

    ``log[0]`` describes the environment; every later element is an entry
    ``{timestamp, description, outcome, failing_ids, number_failing, status}``
    with ``outcome`` "pass" or "fail" and ``status`` one of info, warning or
    error.

    Parameters
    ----------
    hard_check : bool
        When True, ``check_status`` raises on failed error entries; otherwise
        it only warns.
    """

    def __init__(self, hard_check: bool = True):
        self.hard_check = hard_check
        self.log = self._create_log()

    def __repr__(self):
        return self.__str__()

    def __str__(self):
        copy_log = self._format_log()
        sys_info = "\n".join([f"{key}: {value}" for key, value in copy_log[0].items()])
        headers = ["Timestamp", "Status", "Description", "Outcome", "Failing IDs", "Number Failing"]
        header_row = " | ".join(headers)
        separator = "-|-".join(["-" * len(h) for h in headers])
        rows = []
        for entry in copy_log[1:]:
            row = [
                entry.get("timestamp", ""),
                entry.get("status", "").upper(),
                entry.get("description", ""),
                entry.get("outcome", ""),
                ", ".join(map(str, entry.get("failing_ids", []))),
                str(entry.get("number_failing", "")),
            ]
            rows.append(" | ".join(row))
        return "\n".join([sys_info, "\n", header_row, separator] + rows)

    @property
    def sys_info(self) -> dict:
        return self.log[0]

    @property
    def entries(self) -> list[dict]:
        return self.log[1:]

    def _create_log(self):
        sys_info = {
            "date": pd.Timestamp.now().strftime("%Y-%m-%d"),
            "user": getpass.getuser(),
            "device": platform.node(),
            "device_platform": platform.platform(),
            "architecture": platform.architecture()[0],
            "python_version": platform.python_version(),
            "numpy_version": np.__version__,
            "pandas_version": pd.__version__,
            "pandera_version": pandera.__version__,
            "mdrobustness_version": __version__,
        }
        return [sys_info]

    def add_entry(self, description, failing_ids, outcome, entry_type="info"):
        if entry_type not in ENTRY_TYPES:
            raise ValueError("entry_type must be 'info', 'error', or 'warning'.")
        failing_ids = [_plain(i) for i in failing_ids] if failing_ids is not None else []
        self.log.append(
            {
                "timestamp": pd.Timestamp.now().strftime("%H:%M:%S"),
                "description": description,
                "outcome": "pass" if outcome else "fail",
                "failing_ids": failing_ids,
                "number_failing": len(failing_ids),
                "status": entry_type,
            }
        )

    def failed(self, status: str | None = None) -> list[dict]:
        return [
            e for e in self.entries
            if e["outcome"] == "fail" and (status is None or e["status"] == status)
        ]

    def _format_log(self):
        # long id lists are cut to the first ten
        log_copy = copy.deepcopy(self.log)
        for entry in log_copy[1:]:
            if len(entry.get("failing_ids", [])) > 10:
                entry["failing_ids"] = entry["failing_ids"][:10] + ["..."]
        return log_copy

    def export(self, file, format):
        return Exporter.export(self._format_log(), format, file)

    def export_html(self, file, tables: dict | None = None):
        """HTML page of the log followed by the given result tables."""
        log = self._format_log()
        return render_html(file, log[0], log[1:], tables)

    def check_status(self):
        """
        Warn once for failed warning entries; raise ``HardCheckError`` for
        failed error entries when hard checking, warn otherwise.
        """
        error_count = len(self.failed("error"))
        warning_count = len(self.failed("warning"))
        if warning_count > 0:
            warnings.warn(
                f"Soft checks failed: {warning_count} warning(s) found, "
                "see log output for more details",
                UserWarning,
                stacklevel=2,
            )
        if self.hard_check and error_count > 0:
            raise HardCheckError(
                f"Hard checks failed: {error_count} error(s) found, see log output for more details"
            )
        elif error_count > 0:
            warnings.warn(
                f"Soft checks failed: {error_count} error(s) found, "
                "see log output for more details",
                UserWarning,
                stacklevel=2,
            )
