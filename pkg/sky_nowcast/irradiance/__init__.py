"""Irradiance series handling: ingestion, interpolation, filtering and shifting."""
