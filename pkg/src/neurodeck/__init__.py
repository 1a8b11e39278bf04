"""neurodeck: an open EEG data-collection stack.

Virtual low-cost EEG headsets stream framed samples over a documented wire
protocol to a recording engine that writes EDF+/BDF+ files, pairs them with
FHIR-subset screening responses, and uploads both to a self-hosted gateway.
"""

__version__ = "0.1.0"
