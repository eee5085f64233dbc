"""Test package for sky_nowcast."""
