"""Exception hierarchy. Exit codes here are the CLI's contract."""

from __future__ import annotations


class PaneltapError(Exception):
    """Base class; carries the process exit code for the CLI."""

    exit_code = 1


class ValidationError(PaneltapError):
    exit_code = 2


class AuthorizationError(PaneltapError):
    exit_code = 3


class ConfigurationError(PaneltapError):
    exit_code = 4


class StorageError(PaneltapError):
    exit_code = 5


class MalformedUrlError(ValidationError):
    """URL could not be parsed at all - distinct from 'no match'."""
