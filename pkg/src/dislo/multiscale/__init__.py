"""Constructive multiscale procedures."""
