"""Vendored third-party EDF/BDF readers used as interop oracles only.

These files are copied verbatim (plus this note) from their upstream
projects so recordings we produce are checked by independently written
parsers. Not part of the neurodeck package.
"""
