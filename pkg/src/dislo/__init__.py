"""Nonlocal phase-field dislocation energies."""
