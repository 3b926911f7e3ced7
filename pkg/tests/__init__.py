"""Test package for cfair-audit."""
