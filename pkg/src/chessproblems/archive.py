"""An append-only archive of compositions in a directory.

``compositions.jsonl`` holds one JSON object per line, one line per
`CompositionRecord`, written with sorted keys so that equal runs give equal
files. ``compositions.keys`` holds a header line naming the kind of dedup
key, plain or symmetric, then the key of every record, one per line, in the
same order; it can always be rebuilt from the records.
"""
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path

from .composer import CompositionRecord, dedup_key

__all__ = [
    "ArchiveError",
    "Archive",
    "ENV_VAR",
    "default_directory",
    "render_local_time",
]

logger = logging.getLogger(__name__)

ENV_VAR = "CHESSPROBLEMS_ARCHIVE"
_DEFAULT_DIRECTORY = "compositions"
_HEADERS = {False: "# plain", True: "# symmetric"}


class ArchiveError(Exception):
    """Reading or writing the archive failed. `stats` holds the statistics
    of the run that was going on, if any.
    """

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


def default_directory():
    """The archive directory: ``$CHESSPROBLEMS_ARCHIVE`` if set, else
    ``./compositions``.
    """
    return Path(os.environ.get(ENV_VAR) or _DEFAULT_DIRECTORY)


class Archive:
    RECORDS = "compositions.jsonl"
    INDEX = "compositions.keys"

    def __init__(self, directory=None):
        self.directory = Path(directory or default_directory())
        self._keys = None
        self._symmetric = None
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            msg = "Cannot create archive {}: {}".format(self.directory, e)
            raise ArchiveError(msg) from e

    @property
    def records_path(self):
        return self.directory / self.RECORDS

    @property
    def index_path(self):
        return self.directory / self.INDEX

    def _lines(self):
        try:
            text = self.records_path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return []
        except OSError as e:
            msg = "Cannot read {}: {}".format(self.records_path, e)
            raise ArchiveError(msg) from e
        lines = text.split("\n")
        if lines[-1]:
            logger.warning(
                "Ignoring an unterminated last line in %s", self.records_path
            )
        return [ln for ln in lines[:-1] if ln.strip()]

    def records(self):
        """Return all records, in archive order."""
        records = []
        for i, line in enumerate(self._lines(), start=1):
            try:
                records.append(CompositionRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as e:
                msg = "Corrupt record on line {} of {}: {}".format(
                    i, self.records_path, e
                )
                raise ArchiveError(msg) from e
        return records

    def __iter__(self):
        return iter(self.records())

    def __len__(self):
        return len(self._lines())

    def keys(self, symmetric=False):
        """The set of dedup keys in the archive, plain or `symmetric`.

        The index is rebuilt when it holds the other kind of key or when
        it does not have one key per record.
        """
        if self._keys is None or self._symmetric != symmetric:
            flavour, keys = self._read_index()
            if flavour == symmetric and len(keys) == len(self._lines()):
                self._symmetric, self._keys = flavour, keys
            else:
                self.rebuild_index(symmetric)
        return set(self._keys)

    def _read_index(self):
        """Return the kind of key the index holds and the keys. A missing
        index holds no keys of either kind.
        """
        try:
            text = self.index_path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None, []
        except OSError as e:
            msg = "Cannot read {}: {}".format(self.index_path, e)
            raise ArchiveError(msg) from e
        lines = [ln for ln in text.splitlines() if ln.strip()]
        # indices without a header hold plain keys
        flavour = False
        if lines and lines[0].startswith("#"):
            flavour = lines.pop(0) == _HEADERS[True]
        return flavour, lines

    def rebuild_index(self, symmetric=False):
        """Rewrite the key index from the records."""
        records = self.records()
        if records:
            logger.warning("Rebuilding the key index of %s", self.directory)
        keys = [dedup_key(r.position(), symmetric) for r in records]
        lines = [_HEADERS[symmetric]] + keys
        try:
            self.index_path.write_text(
                "".join(ln + "\n" for ln in lines), encoding="utf-8"
            )
        except OSError as e:
            msg = "Cannot write {}: {}".format(self.index_path, e)
            raise ArchiveError(msg) from e
        self._symmetric, self._keys = symmetric, keys
        return len(keys)

    def append(self, record, key=None):
        """Append `record` and its dedup `key` (by default the key of its
        position of the kind the index holds). Each file gets a single
        write of whole lines.
        """
        symmetric = bool(self._symmetric)
        if key is None:
            key = dedup_key(record.position(), symmetric)
        line = json.dumps(record.to_dict(), sort_keys=True) + "\n"
        entry = key + "\n"
        if not self.index_path.exists():
            entry = _HEADERS[symmetric] + "\n" + entry
        try:
            with open(self.records_path, "a", encoding="utf-8") as f:
                f.write(line)
            with open(self.index_path, "a", encoding="utf-8") as f:
                f.write(entry)
        except OSError as e:
            msg = "Cannot append to {}: {}".format(self.directory, e)
            raise ArchiveError(msg) from e
        if self._keys is not None:
            self._keys.append(key)


def render_local_time(utc_text, tz=None):
    """Render an archived UTC timestamp in local time (or in `tz`) as
    ``2017.8.23 4:51:51 AM``.
    """
    dt = datetime.strptime(utc_text, "%Y-%m-%dT%H:%M:%SZ")
    dt = dt.replace(tzinfo=timezone.utc).astimezone(tz)
    return "{}.{}.{} {}:{:02d}:{:02d} {}".format(
        dt.year,
        dt.month,
        dt.day,
        dt.hour % 12 or 12,
        dt.minute,
        dt.second,
        "AM" if dt.hour < 12 else "PM",
    )
