"""RIS-based electromagnetic shielding: channels, SMSE optimization, indoor
tracing and reflectarray patterns."""

__version__ = "0.1.0"
