"""HTTP service around the sweep commands."""

from kerrsim.service.app import create_app

__all__ = ["create_app"]
