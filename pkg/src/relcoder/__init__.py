"""Relation-aware multi-label ICD code prediction at desk scale."""

__version__ = "0.1.0"
