"""Plain ``key = value`` settings files.

A settings file has no section headers; ``#`` and ``;`` start comments.
Keys may carry a dotted prefix naming the part of the package they are for,
e.g. ``aesthetics.quiet_key = 1.5`` or ``substrate.noise = 0.05``, so one
file can configure everything. Defaults live with the code that uses them;
a file only overrides.
"""
import configparser
import warnings
from pathlib import Path

__all__ = ["SettingsError", "read_settings", "parse_settings", "section"]

_SECTION = "settings"


class SettingsError(ValueError):
    """A settings file could not be read or has a bad value."""


def parse_settings(text):
    """Parse settings from a string and return a flat dict of strings."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    parser.optionxform = str
    try:
        parser.read_string("[{}]\n{}".format(_SECTION, text))
    except configparser.Error as e:
        raise SettingsError(str(e)) from e
    return dict(parser[_SECTION])


def read_settings(path):
    """Read the settings file at `path`. A missing file is an error."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SettingsError("Cannot read settings {}: {}".format(path, e))
    return parse_settings(text)


def section(settings, prefix, known, convert=float):
    """Return the settings under ``prefix.`` (or unprefixed keys that are
    in `known`) converted with `convert`.

    Keys under the prefix that are not in `known` are ignored with a
    warning.
    """
    result = {}
    for key, value in (settings or {}).items():
        if key.startswith(prefix + "."):
            name = key[len(prefix) + 1:]
        elif key in known:
            name = key
        else:
            continue
        if name not in known:
            warnings.warn("Unknown setting {!r} ignored.".format(key))
            continue
        try:
            result[name] = convert(value)
        except (TypeError, ValueError):
            msg = "Bad value for setting {!r}: {!r}".format(key, value)
            raise SettingsError(msg)
    return result
